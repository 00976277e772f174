//! Discrete tangent space machinery: per-vertex orthonormal frames spanning
//! the plane orthogonal to m(z), reduction of 3N systems to 2N constrained
//! unknowns, nodal projection onto unit nodal values, and the geometric
//! estimates satisfied by projected updates.
//!
//! Constraints are handled by frame reduction rather than saddle-point
//! multipliers: with T the block-diagonal 3N x 2N frame matrix, the reduced
//! system is T^T A T c = T^T b and v = T c is tangent at m exactly by
//! construction.

use std::cell::RefCell;

use thiserror::Error;

use crate::assembly::NodalVectorField;
use crate::linalg::{LinearOperator, SparseMatrix};

#[derive(Debug, Error)]
pub enum TangentError {
    #[error("degenerate state: |m| = {norm:e} < 1/2 at vertex {vertex}")]
    DegenerateState { vertex: usize, norm: f64 },
    #[error("degenerate projection: |w| = {norm:e} at vertex {vertex}")]
    DegenerateProjection { vertex: usize, norm: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Orthonormal pair (t1, t2) per vertex with t1, t2 orthogonal to m(z).
#[derive(Debug, Clone)]
pub struct TangentFrame {
    t1: Vec<[f64; 3]>,
    t2: Vec<[f64; 3]>,
}

impl TangentFrame {
    pub fn vertex_count(&self) -> usize {
        self.t1.len()
    }

    pub fn t1(&self, z: usize) -> [f64; 3] {
        self.t1[z]
    }

    pub fn t2(&self, z: usize) -> [f64; 3] {
        self.t2[z]
    }
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Deterministic frame for K_h(m): at each vertex, pick the coordinate axis
/// e_j with the smallest |m_j| (lowest j on ties), set
/// t1 = normalize(e_j - (e_j . m^) m^) and t2 = m^ x t1. Requires
/// |m(z)| >= 1/2; the smallest-component rule keeps the projection
/// denominator above sqrt(2/3).
pub fn build_frame(m: &NodalVectorField) -> Result<TangentFrame, TangentError> {
    let n = m.vertex_count();
    let mut t1 = Vec::with_capacity(n);
    let mut t2 = Vec::with_capacity(n);
    for z in 0..n {
        let mz = m.get(z);
        let norm = dot3(mz, mz).sqrt();
        if norm < 0.5 {
            return Err(TangentError::DegenerateState { vertex: z, norm });
        }
        let unit = [mz[0] / norm, mz[1] / norm, mz[2] / norm];
        let mut j = 0;
        for d in 1..3 {
            if unit[d].abs() < unit[j].abs() {
                j = d;
            }
        }
        let mut e = [0.0; 3];
        e[j] = 1.0;
        let proj = dot3(e, unit);
        let mut a = [
            e[0] - proj * unit[0],
            e[1] - proj * unit[1],
            e[2] - proj * unit[2],
        ];
        let an = dot3(a, a).sqrt();
        for d in 0..3 {
            a[d] /= an;
        }
        let b = cross3(unit, a);
        t1.push(a);
        t2.push(b);
    }
    Ok(TangentFrame { t1, t2 })
}

/// v = T c: expands reduced coefficients (c1, c2 per vertex) into a nodal
/// field tangent at the frame's base state, exactly.
pub fn expand(c: &[f64], frame: &TangentFrame) -> NodalVectorField {
    assert_eq!(c.len(), 2 * frame.vertex_count());
    let mut v = NodalVectorField::zeros(frame.vertex_count());
    for z in 0..frame.vertex_count() {
        let (c1, c2) = (c[2 * z], c[2 * z + 1]);
        let (a, b) = (frame.t1[z], frame.t2[z]);
        v.set(
            z,
            [
                c1 * a[0] + c2 * b[0],
                c1 * a[1] + c2 * b[1],
                c1 * a[2] + c2 * b[2],
            ],
        );
    }
    v
}

/// b_red = T^T b.
pub fn reduce_rhs(b: &[f64], frame: &TangentFrame) -> Vec<f64> {
    assert_eq!(b.len(), 3 * frame.vertex_count());
    let mut out = vec![0.0; 2 * frame.vertex_count()];
    for z in 0..frame.vertex_count() {
        let bz = [b[3 * z], b[3 * z + 1], b[3 * z + 2]];
        out[2 * z] = dot3(frame.t1[z], bz);
        out[2 * z + 1] = dot3(frame.t2[z], bz);
    }
    out
}

/// Galerkin restriction (A_red, b_red) = (T^T A T, T^T b) of a 3N system to
/// the discrete tangent space at the frame's base state.
pub fn reduce(
    a: &SparseMatrix,
    b: &[f64],
    frame: &TangentFrame,
) -> Result<(SparseMatrix, Vec<f64>), TangentError> {
    let n = frame.vertex_count();
    if a.nrows() != 3 * n || a.ncols() != 3 * n || b.len() != 3 * n {
        return Err(TangentError::DimensionMismatch(format!(
            "expected a 3Nx3N system with N = {n}, got {}x{} and rhs length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let mut triplets = Vec::with_capacity(4 * a.nnz() / 9 + 16);
    for row in 0..a.nrows() {
        let zb = row / 3;
        let d = row % 3;
        for k in a.row_ptr()[row]..a.row_ptr()[row + 1] {
            let col = a.col_idx()[k];
            let v = a.values()[k];
            if v == 0.0 {
                continue;
            }
            let za = col / 3;
            let comp = col % 3;
            let tb = [frame.t1[zb][d], frame.t2[zb][d]];
            let ta = [frame.t1[za][comp], frame.t2[za][comp]];
            for p in 0..2 {
                for q in 0..2 {
                    triplets.push((2 * zb + p, 2 * za + q, tb[p] * v * ta[q]));
                }
            }
        }
    }
    let a_red = SparseMatrix::from_triplets(2 * n, 2 * n, &triplets).unwrap();
    Ok((a_red, reduce_rhs(b, frame)))
}

/// Matrix-free T^T A T for the iterative solver; avoids forming the reduced
/// matrix every time step.
pub struct ReducedOperator<'a> {
    a: &'a SparseMatrix,
    frame: &'a TangentFrame,
    scratch_in: RefCell<Vec<f64>>,
    scratch_out: RefCell<Vec<f64>>,
}

impl<'a> ReducedOperator<'a> {
    pub fn new(a: &'a SparseMatrix, frame: &'a TangentFrame) -> Self {
        let n3 = 3 * frame.vertex_count();
        assert_eq!(a.nrows(), n3);
        assert_eq!(a.ncols(), n3);
        Self {
            a,
            frame,
            scratch_in: RefCell::new(vec![0.0; n3]),
            scratch_out: RefCell::new(vec![0.0; n3]),
        }
    }
}

impl LinearOperator for ReducedOperator<'_> {
    fn dim(&self) -> usize {
        2 * self.frame.vertex_count()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let frame = self.frame;
        let mut full = self.scratch_in.borrow_mut();
        let mut out = self.scratch_out.borrow_mut();
        for z in 0..frame.vertex_count() {
            let (c1, c2) = (x[2 * z], x[2 * z + 1]);
            let (a, b) = (frame.t1[z], frame.t2[z]);
            for d in 0..3 {
                full[3 * z + d] = c1 * a[d] + c2 * b[d];
            }
        }
        self.a.matvec(&full, &mut out);
        for z in 0..frame.vertex_count() {
            let oz = [out[3 * z], out[3 * z + 1], out[3 * z + 2]];
            y[2 * z] = dot3(frame.t1[z], oz);
            y[2 * z + 1] = dot3(frame.t2[z], oz);
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let frame = self.frame;
        let mut diag = vec![0.0; 2 * frame.vertex_count()];
        for z in 0..frame.vertex_count() {
            // 3x3 diagonal block of A at vertex z
            let mut block = [[0.0; 3]; 3];
            for d in 0..3 {
                let row = 3 * z + d;
                for k in self.a.row_ptr()[row]..self.a.row_ptr()[row + 1] {
                    let col = self.a.col_idx()[k];
                    if col / 3 == z {
                        block[d][col % 3] = self.a.values()[k];
                    }
                }
            }
            for (p, t) in [frame.t1[z], frame.t2[z]].iter().enumerate() {
                let mut acc = 0.0;
                for d in 0..3 {
                    for e in 0..3 {
                        acc += t[d] * block[d][e] * t[e];
                    }
                }
                diag[2 * z + p] = acc;
            }
        }
        diag
    }
}

/// Vertex-wise normalization w(z)/|w(z)| onto the admissible set. Inside the
/// schemes |m + k v|^2 = 1 + k^2 |v|^2 >= 1; general inputs only need to
/// stay away from zero.
pub fn nodal_projection(w: &NodalVectorField) -> Result<NodalVectorField, TangentError> {
    let mut out = NodalVectorField::zeros(w.vertex_count());
    for z in 0..w.vertex_count() {
        let wz = w.get(z);
        let norm = dot3(wz, wz).sqrt();
        if norm < 1e-12 {
            return Err(TangentError::DegenerateProjection { vertex: z, norm });
        }
        out.set(z, [wz[0] / norm, wz[1] / norm, wz[2] / norm]);
    }
    Ok(out)
}

/// Excess over the two nodewise geometric estimates of projected updates:
/// `max_z |m'(z)-m(z)| - k |v(z)|` and
/// `max_z |m'(z)-m(z)-k v(z)| - k^2 |v(z)|^2 / 2`.
/// Both are nonpositive (up to roundoff) for scheme-produced triples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricResiduals {
    pub step_excess: f64,
    pub taylor_excess: f64,
}

pub fn geometric_residuals(
    m: &NodalVectorField,
    v: &NodalVectorField,
    m_new: &NodalVectorField,
    k: f64,
) -> GeometricResiduals {
    let mut step_excess = f64::NEG_INFINITY;
    let mut taylor_excess = f64::NEG_INFINITY;
    for z in 0..m.vertex_count() {
        let (mz, vz, nz) = (m.get(z), v.get(z), m_new.get(z));
        let dm = [nz[0] - mz[0], nz[1] - mz[1], nz[2] - mz[2]];
        let v_norm = dot3(vz, vz).sqrt();
        step_excess = step_excess.max(dot3(dm, dm).sqrt() - k * v_norm);
        let r = [dm[0] - k * vz[0], dm[1] - k * vz[1], dm[2] - k * vz[2]];
        taylor_excess = taylor_excess.max(dot3(r, r).sqrt() - 0.5 * k * k * v_norm * v_norm);
    }
    GeometricResiduals {
        step_excess,
        taylor_excess,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_static, vec_bilinear_scalar};
    use crate::mesh::generate_type1;
    use crate::physics::DmiForm;
    use proptest::prelude::*;

    fn frame_invariants(m: &NodalVectorField, frame: &TangentFrame) {
        for z in 0..m.vertex_count() {
            let mz = m.get(z);
            let norm = dot3(mz, mz).sqrt();
            let unit = [mz[0] / norm, mz[1] / norm, mz[2] / norm];
            let a = frame.t1(z);
            let b = frame.t2(z);
            assert!((dot3(a, a) - 1.0).abs() < 1e-12);
            assert!((dot3(b, b) - 1.0).abs() < 1e-12);
            assert!(dot3(a, b).abs() < 1e-12);
            assert!(dot3(a, unit).abs() < 1e-12);
            assert!(dot3(b, unit).abs() < 1e-12);
        }
    }

    #[test]
    fn frame_for_axis_aligned_states() {
        let mut m = NodalVectorField::zeros(2);
        m.set(0, [0.0, 0.0, 1.0]);
        m.set(1, [1.0, 0.0, 0.0]);
        let frame = build_frame(&m).unwrap();
        assert_eq!(frame.t1(0), [1.0, 0.0, 0.0]);
        assert_eq!(frame.t2(0), [0.0, 1.0, 0.0]);
        assert_eq!(frame.t1(1), [0.0, 1.0, 0.0]);
        assert_eq!(frame.t2(1), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn frame_rejects_degenerate_state() {
        let mut m = NodalVectorField::zeros(2);
        m.set(0, [0.0, 0.0, 1.0]);
        m.set(1, [0.1, 0.0, 0.0]);
        let e = build_frame(&m).unwrap_err();
        assert!(matches!(e, TangentError::DegenerateState { vertex: 1, .. }));
    }

    #[test]
    fn expand_of_unit_coefficient_returns_t1() {
        let m = NodalVectorField::constant(3, [0.0, 0.0, 1.0]);
        let frame = build_frame(&m).unwrap();
        let mut c = vec![0.0; 6];
        c[2] = 1.0; // vertex 1, first frame vector
        let v = expand(&c, &frame);
        assert_eq!(v.get(0), [0.0; 3]);
        assert_eq!(v.get(1), frame.t1(1));
        assert_eq!(v.get(2), [0.0; 3]);
    }

    #[test]
    fn reduce_of_identity_is_identity() {
        let m = NodalVectorField::constant(4, [0.0, 0.0, 1.0]);
        let frame = build_frame(&m).unwrap();
        let mut triplets = Vec::new();
        for i in 0..12 {
            triplets.push((i, i, 1.0));
        }
        let a = SparseMatrix::from_triplets(12, 12, &triplets).unwrap();
        let (a_red, _) = reduce(&a, &[0.0; 12], &frame).unwrap();
        for p in 0..8 {
            for q in 0..8 {
                let expect = if p == q { 1.0 } else { 0.0 };
                assert!((a_red.get(p, q) - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rhs_orthogonal_to_tangent_space_reduces_to_zero() {
        // b pointing along m at every vertex is orthogonal to range(T)
        let m = NodalVectorField::constant(3, [0.0, 0.0, 1.0]);
        let frame = build_frame(&m).unwrap();
        let b = vec![0.0, 0.0, 5.0, 0.0, 0.0, -2.0, 0.0, 0.0, 0.1];
        for v in reduce_rhs(&b, &frame) {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn reduced_operator_matches_explicit_reduction() {
        let mesh = generate_type1([2, 1, 1], [1.0, 1.0, 1.0]).unwrap();
        let m = crate::assembly::interpolate_nodal(
            |x| {
                let t = x[0] + x[1];
                [t.cos(), t.sin(), 1.0]
            },
            &mesh,
        );
        let m = nodal_projection(&m).unwrap();
        let frame = build_frame(&m).unwrap();
        let a = crate::assembly::assemble_cross(&mesh, &m);
        let b = vec![0.0; 3 * mesh.vertex_count()];
        let (a_red, _) = reduce(&a, &b, &frame).unwrap();
        let op = ReducedOperator::new(&a, &frame);
        let n2 = 2 * mesh.vertex_count();
        let x: Vec<f64> = (0..n2).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut y_op = vec![0.0; n2];
        op.apply(&x, &mut y_op);
        let mut y_mat = vec![0.0; n2];
        a_red.matvec(&x, &mut y_mat);
        for i in 0..n2 {
            assert!((y_op[i] - y_mat[i]).abs() < 1e-13);
        }
        let d_op = op.diagonal();
        for i in 0..n2 {
            assert!((d_op[i] - a_red.get(i, i)).abs() < 1e-13);
        }
    }

    #[test]
    fn projection_normalizes() {
        let mut w = NodalVectorField::zeros(2);
        w.set(0, [2.0, 0.0, 0.0]);
        w.set(1, [1.0, 0.1, 0.0]);
        let p = nodal_projection(&w).unwrap();
        assert_eq!(p.get(0), [1.0, 0.0, 0.0]);
        let n = (1.0f64 + 0.01).sqrt();
        let expect = [1.0 / n, 0.1 / n, 0.0];
        for d in 0..3 {
            assert!((p.get(1)[d] - expect[d]).abs() < 1e-15);
        }
    }

    #[test]
    fn projection_rejects_near_zero() {
        let w = NodalVectorField::zeros(1);
        assert!(matches!(
            nodal_projection(&w),
            Err(TangentError::DegenerateProjection { vertex: 0, .. })
        ));
    }

    #[test]
    fn projection_does_not_increase_exchange_energy_on_type1() {
        // angle-condition mesh + nodal norms >= 1 imply the gradient norm
        // cannot grow under nodal projection
        let mesh = generate_type1([3, 3, 2], [1.0, 1.0, 0.7]).unwrap();
        let forms = assemble_static(&mesh, DmiForm::None);
        let mut state = 3u64;
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for trial in 0..100 {
            let mut w = NodalVectorField::zeros(mesh.vertex_count());
            for z in 0..mesh.vertex_count() {
                // nodal norms in [1, 3]
                let dir = [next(), next(), next()];
                let n = dot3(dir, dir).sqrt().max(1e-9);
                let scale = 1.0 + 2.0 * (next() + 0.5).clamp(0.0, 1.0);
                w.set(
                    z,
                    [dir[0] / n * scale, dir[1] / n * scale, dir[2] / n * scale],
                );
            }
            let p = nodal_projection(&w).unwrap();
            let before = vec_bilinear_scalar(&forms.scalar_stiffness, &w, &w);
            let after = vec_bilinear_scalar(&forms.scalar_stiffness, &p, &p);
            assert!(
                after <= before * (1.0 + 1e-12) + 1e-12,
                "trial {trial}: {after} > {before}"
            );
        }
    }

    #[test]
    fn geometric_residuals_hand_case() {
        // m = (1,0,0), v = (0,1,0), k = 0.1: |m'-m| ~ 0.09963 <= 0.1
        let m = NodalVectorField::constant(1, [1.0, 0.0, 0.0]);
        let v = NodalVectorField::constant(1, [0.0, 1.0, 0.0]);
        let k = 0.1;
        let mut w = NodalVectorField::zeros(1);
        w.set(0, [1.0, 0.1, 0.0]);
        let m_new = nodal_projection(&w).unwrap();
        let dm = {
            let a = m_new.get(0);
            ((a[0] - 1.0).powi(2) + a[1].powi(2)).sqrt()
        };
        assert!((dm - 0.09962741).abs() < 1e-7);
        let res = geometric_residuals(&m, &v, &m_new, k);
        assert!(res.step_excess <= 1e-12);
        assert!(res.taylor_excess <= 1e-12);
    }

    #[test]
    fn geometric_residuals_zero_update() {
        let m = NodalVectorField::constant(2, [0.0, 1.0, 0.0]);
        let v = NodalVectorField::zeros(2);
        let res = geometric_residuals(&m, &v, &m, 0.3);
        assert!(res.step_excess <= 0.0);
        assert!(res.taylor_excess <= 0.0);
    }

    #[test]
    fn geometric_residuals_random_tangent_updates() {
        let mut state = 11u64;
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for _ in 0..100 {
            let dir = [next(), next(), next()];
            let n = dot3(dir, dir).sqrt().max(1e-9);
            let mz = [dir[0] / n, dir[1] / n, dir[2] / n];
            let m = NodalVectorField::constant(1, mz);
            let frame = build_frame(&m).unwrap();
            let c = [next() * 4.0, next() * 4.0];
            let v = expand(&c, &frame);
            let k = 0.05 + (next() + 0.5).abs() * 0.2;
            let vz = v.get(0);
            let w = NodalVectorField::constant(
                1,
                [mz[0] + k * vz[0], mz[1] + k * vz[1], mz[2] + k * vz[2]],
            );
            let m_new = nodal_projection(&w).unwrap();
            let res = geometric_residuals(&m, &v, &m_new, k);
            assert!(res.step_excess <= 1e-12, "{res:?}");
            assert!(res.taylor_excess <= 1e-12, "{res:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn frame_invariants_hold_for_random_states(seed in 0u64..10_000) {
            let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(7);
            let mut next = move || {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            };
            let mut m = NodalVectorField::zeros(8);
            for z in 0..8 {
                let dir = [next(), next(), next()];
                let n = dot3(dir, dir).sqrt().max(1e-9);
                m.set(z, [dir[0] / n, dir[1] / n, dir[2] / n]);
            }
            let frame = build_frame(&m).unwrap();
            frame_invariants(&m, &frame);
        }

        #[test]
        fn reduce_then_expand_is_identity_on_tangent_fields(seed in 0u64..10_000) {
            let mut state = seed.wrapping_mul(0x2545f4914f6cdd1d).wrapping_add(3);
            let mut next = move || {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            };
            let mut m = NodalVectorField::zeros(6);
            for z in 0..6 {
                let dir = [next(), next(), next()];
                let n = dot3(dir, dir).sqrt().max(1e-9);
                m.set(z, [dir[0] / n, dir[1] / n, dir[2] / n]);
            }
            let frame = build_frame(&m).unwrap();
            let c: Vec<f64> = (0..12).map(|_| next() * 3.0).collect();
            let v = expand(&c, &frame);
            // tangency is exact by construction
            for z in 0..6 {
                prop_assert!(dot3(v.get(z), m.get(z)).abs() < 1e-13);
            }
            let back = reduce_rhs(v.as_slice(), &frame);
            for i in 0..12 {
                prop_assert!((back[i] - c[i]).abs() < 1e-14);
            }
        }
    }
}
