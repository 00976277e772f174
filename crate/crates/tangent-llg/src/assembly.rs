//! Exact P1 finite-element assembly on tetrahedral meshes: scalar mass and
//! stiffness, the DMI coupling blocks for the configured Lifshitz operator,
//! the state-dependent cross-product matrix, and the cut-off weighted mass.
//!
//! Vector unknowns are ordered vertex-major, component-minor: the degree of
//! freedom for component `c` at vertex `z` sits at index `3 z + c`. All
//! state-dependent integrands are evaluated with the degree-3 rule of
//! [`crate::quadrature::DEGREE3`]; that rule is exact for the cross term
//! (a degree-3 polynomial) and is the defining quadrature for the
//! non-polynomial cut-off weight.

use thiserror::Error;

use crate::linalg::SparseMatrix;
use crate::mesh::{cell_geometry, Mesh, Point3};
use crate::physics::DmiForm;
use crate::quadrature::DEGREE3;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("field length {len} is not 3 x vertex count ({nverts} vertices)")]
    FieldLength { len: usize, nverts: usize },
    #[error("weight vector has length {len}, expected cells x quadrature points = {expected}")]
    WeightLength { len: usize, expected: usize },
}

/// Piecewise-linear vector field given by three scalars per mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalVectorField {
    values: Vec<f64>,
}

impl NodalVectorField {
    pub fn zeros(nverts: usize) -> Self {
        Self {
            values: vec![0.0; 3 * nverts],
        }
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self, AssemblyError> {
        if !values.len().is_multiple_of(3) {
            return Err(AssemblyError::FieldLength {
                len: values.len(),
                nverts: values.len() / 3,
            });
        }
        Ok(Self { values })
    }

    pub fn constant(nverts: usize, v: [f64; 3]) -> Self {
        let mut values = Vec::with_capacity(3 * nverts);
        for _ in 0..nverts {
            values.extend_from_slice(&v);
        }
        Self { values }
    }

    pub fn vertex_count(&self) -> usize {
        self.values.len() / 3
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, z: usize) -> [f64; 3] {
        [
            self.values[3 * z],
            self.values[3 * z + 1],
            self.values[3 * z + 2],
        ]
    }

    pub fn set(&mut self, z: usize, v: [f64; 3]) {
        self.values[3 * z..3 * z + 3].copy_from_slice(&v);
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Largest deviation of a nodal Euclidean norm from 1.
    pub fn max_unit_deviation(&self) -> f64 {
        (0..self.vertex_count())
            .map(|z| {
                let v = self.get(z);
                ((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Member of the admissible set: unit nodal values up to `tol`.
    pub fn is_admissible(&self, tol: f64) -> bool {
        self.max_unit_deviation() <= tol
    }
}

/// Nodal interpolant of a vertex-wise function.
pub fn interpolate_nodal<F>(f: F, mesh: &Mesh) -> NodalVectorField
where
    F: Fn(Point3) -> [f64; 3],
{
    let mut field = NodalVectorField::zeros(mesh.vertex_count());
    for z in 0..mesh.vertex_count() {
        field.set(z, f(mesh.vertex(z)));
    }
    field
}

/// State-independent forms of a mesh: scalar mass and stiffness (N x N) and
/// the DMI blocks (3N x 3N) realizing `c(u,v) = <D u, v>` for the configured
/// Lifshitz operator.
#[derive(Debug, Clone)]
pub struct FormSet {
    pub scalar_mass: SparseMatrix,
    pub scalar_stiffness: SparseMatrix,
    pub dmi_blocks: SparseMatrix,
    pub dmi_form: DmiForm,
}

impl FormSet {
    /// |Omega| as the total mass, sum of all scalar mass entries.
    pub fn domain_volume(&self) -> f64 {
        self.scalar_mass.values().iter().sum()
    }
}

/// Assembles the static forms with exact integration of the piecewise
/// polynomial integrands. `dmi_form = None` yields an empty DMI block.
pub fn assemble_static(mesh: &Mesh, dmi_form: DmiForm) -> FormSet {
    let n = mesh.vertex_count();
    let mut mass = Vec::with_capacity(16 * mesh.cell_count());
    let mut stiff = Vec::with_capacity(16 * mesh.cell_count());
    let mut dmi = Vec::new();
    for c in 0..mesh.cell_count() {
        let (vol, grads) = cell_geometry(mesh, c);
        let cell = mesh.cell(c);
        for a in 0..4 {
            for b in 0..4 {
                let m_ab = if a == b { vol / 10.0 } else { vol / 20.0 };
                mass.push((cell[a], cell[b], m_ab));
                let s_ab = vol
                    * (grads[a][0] * grads[b][0]
                        + grads[a][1] * grads[b][1]
                        + grads[a][2] * grads[b][2]);
                stiff.push((cell[a], cell[b], s_ab));
            }
        }
        if !matches!(dmi_form, DmiForm::None) {
            // D(phi_a e_c) is constant on the cell; <D(phi_a e_c), phi_b e_d>
            // = [D(phi_a e_c)]_d * V/4
            for a in 0..4 {
                for comp in 0..3 {
                    let op = lifshitz_apply(dmi_form, grads[a], comp);
                    for b in 0..4 {
                        for d in 0..3 {
                            if op[d] != 0.0 {
                                dmi.push((3 * cell[b] + d, 3 * cell[a] + comp, op[d] * vol / 4.0));
                            }
                        }
                    }
                }
            }
        }
    }
    FormSet {
        scalar_mass: SparseMatrix::from_triplets(n, n, &mass).unwrap(),
        scalar_stiffness: SparseMatrix::from_triplets(n, n, &stiff).unwrap(),
        dmi_blocks: SparseMatrix::from_triplets(3 * n, 3 * n, &dmi).unwrap(),
        dmi_form,
    }
}

/// The Lifshitz operator applied to `phi e_comp` for a hat function with
/// gradient `g`: curl for the bulk form, `(-d1 u3, -d2 u3, d1 u1 + d2 u2)`
/// for the interfacial form.
fn lifshitz_apply(form: DmiForm, g: [f64; 3], comp: usize) -> [f64; 3] {
    match form {
        DmiForm::Bulk => {
            // curl(phi e_c) = grad(phi) x e_c
            let e = unit(comp);
            cross(g, e)
        }
        DmiForm::Interfacial => match comp {
            0 => [0.0, 0.0, g[0]],
            1 => [0.0, 0.0, g[1]],
            _ => [-g[0], -g[1], 0.0],
        },
        DmiForm::None => [0.0; 3],
    }
}

fn unit(c: usize) -> [f64; 3] {
    let mut e = [0.0; 3];
    e[c] = 1.0;
    e
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Sparsity pattern of 3x3 vertex blocks with per-cell slot tables, reused
/// by the per-step assemblies so that time stepping rewrites values only.
#[derive(Debug, Clone)]
pub struct BlockPattern {
    pattern: SparseMatrix,
    /// for each cell: nnz slot of (3*local_b + d, 3*local_a + c) entries,
    /// row-major over the 12 x 12 local block
    cell_slots: Vec<Vec<usize>>,
}

impl BlockPattern {
    pub fn new(mesh: &Mesh) -> Self {
        let n = mesh.vertex_count();
        let mut triplets = Vec::with_capacity(144 * mesh.cell_count());
        for c in 0..mesh.cell_count() {
            let cell = mesh.cell(c);
            for &zb in &cell {
                for &za in &cell {
                    for d in 0..3 {
                        for comp in 0..3 {
                            triplets.push((3 * zb + d, 3 * za + comp, 0.0));
                        }
                    }
                }
            }
        }
        let pattern = SparseMatrix::from_triplets(3 * n, 3 * n, &triplets).unwrap();
        let mut cell_slots = Vec::with_capacity(mesh.cell_count());
        for c in 0..mesh.cell_count() {
            let cell = mesh.cell(c);
            let mut slots = Vec::with_capacity(144);
            for &zb in &cell {
                for d in 0..3 {
                    let row = 3 * zb + d;
                    let lo = pattern.row_ptr()[row];
                    let hi = pattern.row_ptr()[row + 1];
                    for &za in &cell {
                        for comp in 0..3 {
                            let col = 3 * za + comp;
                            let k = pattern.col_idx()[lo..hi].binary_search(&col).unwrap();
                            slots.push(lo + k);
                        }
                    }
                }
            }
            cell_slots.push(slots);
        }
        Self {
            pattern,
            cell_slots,
        }
    }

    /// Fresh matrix with this pattern and all-zero values.
    pub fn zero_matrix(&self) -> SparseMatrix {
        let mut m = self.pattern.clone();
        m.values_mut().fill(0.0);
        m
    }

    fn slot(&self, cell: usize, local_b: usize, d: usize, local_a: usize, comp: usize) -> usize {
        // layout: ((local_b * 3 + d) * 4 + local_a) * 3 + comp
        self.cell_slots[cell][((local_b * 3 + d) * 4 + local_a) * 3 + comp]
    }

    /// Adds the cross-product form `(u, w) -> <m x u, w>` into `values`.
    /// The integrand is degree 3 and integrated exactly.
    pub fn add_cross(&self, mesh: &Mesh, m: &NodalVectorField, values: &mut [f64]) {
        let rule = DEGREE3;
        for c in 0..mesh.cell_count() {
            let (vol, _) = cell_geometry(mesh, c);
            let cell = mesh.cell(c);
            let m_at: [[f64; 3]; 4] = [
                m.get(cell[0]),
                m.get(cell[1]),
                m.get(cell[2]),
                m.get(cell[3]),
            ];
            // phi_a(x_q) phi_b(x_q) weighted sums of the skew matrix of m
            for q in 0..rule.len() {
                let bc = rule.barycentric(q);
                let w = 6.0 * vol * rule.weights[q];
                let mut mq = [0.0; 3];
                for i in 0..4 {
                    for d in 0..3 {
                        mq[d] += bc[i] * m_at[i][d];
                    }
                }
                for lb in 0..4 {
                    for la in 0..4 {
                        let f = w * bc[lb] * bc[la];
                        // block entry (d, comp) = (m x e_comp) . e_d
                        // = skew(m)[d][comp]
                        values[self.slot(c, lb, 0, la, 1)] += -f * mq[2];
                        values[self.slot(c, lb, 0, la, 2)] += f * mq[1];
                        values[self.slot(c, lb, 1, la, 0)] += f * mq[2];
                        values[self.slot(c, lb, 1, la, 2)] += -f * mq[0];
                        values[self.slot(c, lb, 2, la, 0)] += -f * mq[1];
                        values[self.slot(c, lb, 2, la, 1)] += f * mq[0];
                    }
                }
            }
        }
    }

    /// Adds the weighted vector mass `(u, w) -> <weight u, w>` into `values`,
    /// with `weight` given at the degree-3 quadrature points, cell-major.
    pub fn add_weighted_mass(
        &self,
        mesh: &Mesh,
        weights: &[f64],
        values: &mut [f64],
    ) -> Result<(), AssemblyError> {
        let rule = DEGREE3;
        let expected = mesh.cell_count() * rule.len();
        if weights.len() != expected {
            return Err(AssemblyError::WeightLength {
                len: weights.len(),
                expected,
            });
        }
        for c in 0..mesh.cell_count() {
            let (vol, _) = cell_geometry(mesh, c);
            for q in 0..rule.len() {
                let bc = rule.barycentric(q);
                let w = 6.0 * vol * rule.weights[q] * weights[c * rule.len() + q];
                for lb in 0..4 {
                    for la in 0..4 {
                        let f = w * bc[lb] * bc[la];
                        for d in 0..3 {
                            values[self.slot(c, lb, d, la, d)] += f;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Expands an N x N scalar matrix onto the block pattern, placing
    /// `scale * s(a,b)` at every component-diagonal slot `(3a+d, 3b+d)`.
    pub fn add_scalar_expanded(&self, scalar: &SparseMatrix, scale: f64, values: &mut [f64]) {
        let pat = &self.pattern;
        for a in 0..scalar.nrows() {
            for k in scalar.row_ptr()[a]..scalar.row_ptr()[a + 1] {
                let b = scalar.col_idx()[k];
                let v = scale * scalar.values()[k];
                for d in 0..3 {
                    let row = 3 * a + d;
                    let col = 3 * b + d;
                    let lo = pat.row_ptr()[row];
                    let hi = pat.row_ptr()[row + 1];
                    let s = pat.col_idx()[lo..hi].binary_search(&col).unwrap();
                    values[lo + s] += v;
                }
            }
        }
    }

    /// Adds `scale * (M + M^T)` for a 3N x 3N matrix sharing this pattern's
    /// vertex adjacency (used for the symmetrized DMI blocks).
    pub fn add_symmetrized(&self, m: &SparseMatrix, scale: f64, values: &mut [f64]) {
        let pat = &self.pattern;
        for row in 0..m.nrows() {
            for k in m.row_ptr()[row]..m.row_ptr()[row + 1] {
                let col = m.col_idx()[k];
                let v = scale * m.values()[k];
                for (r, c) in [(row, col), (col, row)] {
                    let lo = pat.row_ptr()[r];
                    let hi = pat.row_ptr()[r + 1];
                    let s = pat.col_idx()[lo..hi].binary_search(&c).unwrap();
                    values[lo + s] += v;
                }
            }
        }
    }
}

/// Assembles the trilinear cross term `(u, w) -> <m x u, w>` as a 3N x 3N
/// matrix (skew-symmetric by construction of the integrand).
pub fn assemble_cross(mesh: &Mesh, m: &NodalVectorField) -> SparseMatrix {
    let pattern = BlockPattern::new(mesh);
    let mut out = pattern.zero_matrix();
    let n = out.nnz();
    let mut values = vec![0.0; n];
    pattern.add_cross(mesh, m, &mut values);
    out.values_mut().copy_from_slice(&values);
    out
}

/// Assembles `(u, w) -> <weight u, w>` with the weight sampled at the
/// degree-3 quadrature points (cell-major layout, as produced by
/// `physics::lambda_at_quadrature`).
pub fn assemble_weighted_mass(mesh: &Mesh, weights: &[f64]) -> Result<SparseMatrix, AssemblyError> {
    let pattern = BlockPattern::new(mesh);
    let mut out = pattern.zero_matrix();
    let n = out.nnz();
    let mut values = vec![0.0; n];
    pattern.add_weighted_mass(mesh, weights, &mut values)?;
    out.values_mut().copy_from_slice(&values);
    Ok(out)
}

/// x^T (M (x) I3) y for a scalar N x N matrix and vector fields x, y.
pub fn vec_bilinear_scalar(
    scalar: &SparseMatrix,
    x: &NodalVectorField,
    y: &NodalVectorField,
) -> f64 {
    let xv = x.as_slice();
    let yv = y.as_slice();
    let mut total = 0.0;
    for a in 0..scalar.nrows() {
        for k in scalar.row_ptr()[a]..scalar.row_ptr()[a + 1] {
            let b = scalar.col_idx()[k];
            let v = scalar.values()[k];
            total += v
                * (xv[3 * a] * yv[3 * b]
                    + xv[3 * a + 1] * yv[3 * b + 1]
                    + xv[3 * a + 2] * yv[3 * b + 2]);
        }
    }
    total
}

/// y = (M (x) I3) x for a scalar N x N matrix.
pub fn vec_matvec_scalar(scalar: &SparseMatrix, x: &NodalVectorField) -> NodalVectorField {
    let xv = x.as_slice();
    let mut out = NodalVectorField::zeros(x.vertex_count());
    let ov = out.as_mut_slice();
    for a in 0..scalar.nrows() {
        let mut acc = [0.0; 3];
        for k in scalar.row_ptr()[a]..scalar.row_ptr()[a + 1] {
            let b = scalar.col_idx()[k];
            let v = scalar.values()[k];
            for d in 0..3 {
                acc[d] += v * xv[3 * b + d];
            }
        }
        ov[3 * a..3 * a + 3].copy_from_slice(&acc);
    }
    out
}

/// ||curl u||^2 (bulk) computed from the piecewise-constant curl per cell.
pub fn curl_norm_sq(mesh: &Mesh, u: &NodalVectorField) -> f64 {
    let mut total = 0.0;
    for c in 0..mesh.cell_count() {
        let (vol, grads) = cell_geometry(mesh, c);
        let cell = mesh.cell(c);
        let mut jac = [[0.0; 3]; 3]; // jac[comp][dir] = d_dir u_comp
        for (i, &z) in cell.iter().enumerate() {
            let uz = u.get(z);
            for comp in 0..3 {
                for dir in 0..3 {
                    jac[comp][dir] += uz[comp] * grads[i][dir];
                }
            }
        }
        let curl = [
            jac[2][1] - jac[1][2],
            jac[0][2] - jac[2][0],
            jac[1][0] - jac[0][1],
        ];
        total += vol * (curl[0] * curl[0] + curl[1] * curl[1] + curl[2] * curl[2]);
    }
    total
}
