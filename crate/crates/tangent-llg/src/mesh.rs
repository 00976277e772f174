//! Tetrahedral meshes: representation, the structured box generators
//! (types I and II), ASCII import/export, and mesh-quality analysis.
//!
//! Coordinates live in the same nondimensional length unit as the material
//! lengths `lex` and `ldm`. Cells are positively oriented: the signed volume
//! `det(v1-v0, v2-v0, v3-v0)/6` of every cell is strictly positive.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

pub type Point3 = [f64; 3];

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cell {cell}: vertex index {index} out of range ({nverts} vertices)")]
    IndexOutOfRange {
        cell: usize,
        index: usize,
        nverts: usize,
    },
    #[error("cell {cell}: duplicate vertex index {index}")]
    DuplicateVertex { cell: usize, index: usize },
    #[error("cell {cell}: nonpositive signed volume {volume:e}")]
    InvertedCell { cell: usize, volume: f64 },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Conforming tetrahedral mesh, immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point3>,
    cells: Vec<[usize; 4]>,
}

impl Mesh {
    /// Builds a mesh and checks the cell invariants (index bounds, no
    /// duplicate vertices within a cell, positive signed volume).
    pub fn new(vertices: Vec<Point3>, cells: Vec<[usize; 4]>) -> Result<Self, MeshError> {
        let nverts = vertices.len();
        for (c, cell) in cells.iter().enumerate() {
            for &i in cell {
                if i >= nverts {
                    return Err(MeshError::IndexOutOfRange {
                        cell: c,
                        index: i,
                        nverts,
                    });
                }
            }
            for a in 0..4 {
                for b in (a + 1)..4 {
                    if cell[a] == cell[b] {
                        return Err(MeshError::DuplicateVertex {
                            cell: c,
                            index: cell[a],
                        });
                    }
                }
            }
            let vol = signed_volume(&vertices, cell);
            if vol <= 0.0 {
                return Err(MeshError::InvertedCell {
                    cell: c,
                    volume: vol,
                });
            }
        }
        Ok(Self { vertices, cells })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 4]] {
        &self.cells
    }

    pub fn vertex(&self, i: usize) -> Point3 {
        self.vertices[i]
    }

    pub fn cell(&self, c: usize) -> [usize; 4] {
        self.cells[c]
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        signed_volume(&self.vertices, &self.cells[c])
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.cell_count()).map(|c| self.cell_volume(c)).sum()
    }

    /// Diameter (longest edge) of a cell.
    pub fn cell_diameter(&self, c: usize) -> f64 {
        let cell = self.cells[c];
        let mut d: f64 = 0.0;
        for a in 0..4 {
            for b in (a + 1)..4 {
                d = d.max(dist(self.vertices[cell[a]], self.vertices[cell[b]]));
            }
        }
        d
    }

    /// Axis-aligned bounding box as (min, max) corners.
    pub fn bounding_box(&self) -> (Point3, Point3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for d in 0..3 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (lo, hi)
    }
}

fn dist(a: Point3, b: Point3) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

fn signed_volume(vertices: &[Point3], cell: &[usize; 4]) -> f64 {
    let p0 = vertices[cell[0]];
    let mut e = [[0.0; 3]; 3];
    for j in 0..3 {
        let pj = vertices[cell[j + 1]];
        for d in 0..3 {
            e[j][d] = pj[d] - p0[d];
        }
    }
    det3(&e) / 6.0
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Volume and the four constant hat-function gradients of a cell.
///
/// `grads[i]` is the gradient of the P1 basis function attached to the i-th
/// local vertex; the gradients sum to zero.
pub(crate) fn cell_geometry(mesh: &Mesh, c: usize) -> (f64, [[f64; 3]; 4]) {
    let cell = mesh.cells[c];
    let p0 = mesh.vertices[cell[0]];
    let mut e = [[0.0; 3]; 3];
    for j in 0..3 {
        let pj = mesh.vertices[cell[j + 1]];
        for d in 0..3 {
            e[j][d] = pj[d] - p0[d];
        }
    }
    let det = det3(&e);
    // rows of inv(E)^T are the gradients of phi_1..phi_3
    let inv_det = 1.0 / det;
    let cof = [
        [
            e[1][1] * e[2][2] - e[1][2] * e[2][1],
            e[1][2] * e[2][0] - e[1][0] * e[2][2],
            e[1][0] * e[2][1] - e[1][1] * e[2][0],
        ],
        [
            e[0][2] * e[2][1] - e[0][1] * e[2][2],
            e[0][0] * e[2][2] - e[0][2] * e[2][0],
            e[0][1] * e[2][0] - e[0][0] * e[2][1],
        ],
        [
            e[0][1] * e[1][2] - e[0][2] * e[1][1],
            e[0][2] * e[1][0] - e[0][0] * e[1][2],
            e[0][0] * e[1][1] - e[0][1] * e[1][0],
        ],
    ];
    let mut grads = [[0.0; 3]; 4];
    for j in 0..3 {
        for d in 0..3 {
            grads[j + 1][d] = cof[j][d] * inv_det;
        }
    }
    for d in 0..3 {
        grads[0][d] = -grads[1][d] - grads[2][d] - grads[3][d];
    }
    (det / 6.0, grads)
}

/// Quality report produced by [`analyze_mesh`].
#[derive(Debug, Clone, PartialEq)]
pub struct MeshQualityReport {
    pub h_max: f64,
    pub h_min: f64,
    /// True iff every off-diagonal entry of the assembled scalar stiffness
    /// matrix is `<= tolerance`.
    pub angle_condition_holds: bool,
    /// Most positive off-diagonal stiffness entry encountered.
    pub worst_offdiag: f64,
    /// Number of vertex pairs whose stiffness entry violates the condition.
    pub offending_pairs: usize,
}

pub const ANGLE_CONDITION_TOL: f64 = 1e-12;

/// Checks the sign condition on the off-diagonal entries of the scalar
/// stiffness matrix and measures element diameters.
pub fn analyze_mesh(mesh: &Mesh) -> MeshQualityReport {
    analyze_mesh_tol(mesh, ANGLE_CONDITION_TOL)
}

pub fn analyze_mesh_tol(mesh: &Mesh, tol: f64) -> MeshQualityReport {
    let mut offdiag: HashMap<(usize, usize), f64> = HashMap::new();
    let mut h_max: f64 = 0.0;
    let mut h_min = f64::INFINITY;
    for c in 0..mesh.cell_count() {
        let d = mesh.cell_diameter(c);
        h_max = h_max.max(d);
        h_min = h_min.min(d);
        let (vol, grads) = cell_geometry(mesh, c);
        let cell = mesh.cell(c);
        for a in 0..4 {
            for b in (a + 1)..4 {
                let v = vol
                    * (grads[a][0] * grads[b][0]
                        + grads[a][1] * grads[b][1]
                        + grads[a][2] * grads[b][2]);
                let key = if cell[a] < cell[b] {
                    (cell[a], cell[b])
                } else {
                    (cell[b], cell[a])
                };
                *offdiag.entry(key).or_insert(0.0) += v;
            }
        }
    }
    let mut worst = f64::NEG_INFINITY;
    let mut offending = 0;
    for &v in offdiag.values() {
        worst = worst.max(v);
        if v > tol {
            offending += 1;
        }
    }
    if offdiag.is_empty() {
        worst = 0.0;
    }
    MeshQualityReport {
        h_max,
        h_min,
        angle_condition_holds: offending == 0,
        worst_offdiag: worst,
        offending_pairs: offending,
    }
}

fn check_box_args(nx: [usize; 3], lengths: [f64; 3]) -> Result<(), MeshError> {
    if nx.contains(&0) {
        return Err(MeshError::InvalidArgument(format!(
            "cell counts must be >= 1 per axis, got {nx:?}"
        )));
    }
    if lengths.iter().any(|&l| !(l > 0.0)) {
        return Err(MeshError::InvalidArgument(format!(
            "box lengths must be positive, got {lengths:?}"
        )));
    }
    Ok(())
}

const PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

struct BoxGrid {
    nx: [usize; 3],
    step: [f64; 3],
}

impl BoxGrid {
    fn vid(&self, i: usize, j: usize, k: usize) -> usize {
        i + (self.nx[0] + 1) * (j + (self.nx[1] + 1) * k)
    }

    // push order matches vid(): i fastest, then j, then k
    fn corner_vertices(&self) -> Vec<Point3> {
        let mut v = Vec::with_capacity((self.nx[0] + 1) * (self.nx[1] + 1) * (self.nx[2] + 1));
        for k in 0..=self.nx[2] {
            for j in 0..=self.nx[1] {
                for i in 0..=self.nx[0] {
                    v.push([
                        i as f64 * self.step[0],
                        j as f64 * self.step[1],
                        k as f64 * self.step[2],
                    ]);
                }
            }
        }
        v
    }
}

fn oriented(vertices: &[Point3], mut cell: [usize; 4]) -> [usize; 4] {
    if signed_volume(vertices, &cell) < 0.0 {
        cell.swap(2, 3);
    }
    cell
}

/// Type-I (Kuhn) mesh: each grid cube is split into six tetrahedra around
/// its main diagonal, so that every tetrahedron has three mutually
/// perpendicular edges. Meshes of this type satisfy the angle condition.
pub fn generate_type1(nx: [usize; 3], lengths: [f64; 3]) -> Result<Mesh, MeshError> {
    check_box_args(nx, lengths)?;
    let grid = BoxGrid {
        nx,
        step: [
            lengths[0] / nx[0] as f64,
            lengths[1] / nx[1] as f64,
            lengths[2] / nx[2] as f64,
        ],
    };
    let vertices = grid.corner_vertices();
    let mut cells = Vec::with_capacity(6 * nx[0] * nx[1] * nx[2]);
    for k in 0..nx[2] {
        for j in 0..nx[1] {
            for i in 0..nx[0] {
                for perm in &PERMS {
                    let path = kuhn_path([i, j, k], perm, &grid);
                    cells.push(oriented(&vertices, path));
                }
            }
        }
    }
    Mesh::new(vertices, cells)
}

/// Walks the cube from corner (i,j,k) to the opposite corner along the axes
/// in `perm` order; the four visited grid points form one Kuhn tetrahedron
/// whose first-to-last edge is the cube's main diagonal.
fn kuhn_path(base: [usize; 3], perm: &[usize; 3], grid: &BoxGrid) -> [usize; 4] {
    let mut p = base;
    let mut ids = [0usize; 4];
    ids[0] = grid.vid(p[0], p[1], p[2]);
    for (step, &axis) in perm.iter().enumerate() {
        p[axis] += 1;
        ids[step + 1] = grid.vid(p[0], p[1], p[2]);
    }
    ids
}

/// Type-II mesh: the six Kuhn tetrahedra of each cube are bisected at the
/// midpoint of their longest edge (the cube's main diagonal), giving twelve
/// tetrahedra per cube. Meshes of this type violate the angle condition.
pub fn generate_type2(nx: [usize; 3], lengths: [f64; 3]) -> Result<Mesh, MeshError> {
    check_box_args(nx, lengths)?;
    let grid = BoxGrid {
        nx,
        step: [
            lengths[0] / nx[0] as f64,
            lengths[1] / nx[1] as f64,
            lengths[2] / nx[2] as f64,
        ],
    };
    let mut vertices = grid.corner_vertices();
    let ncorner = vertices.len();
    // one midpoint per cube, appended after the grid corners
    let mid_id = |i: usize, j: usize, k: usize| ncorner + i + nx[0] * (j + nx[1] * k);
    for k in 0..nx[2] {
        for j in 0..nx[1] {
            for i in 0..nx[0] {
                vertices.push([
                    (i as f64 + 0.5) * grid.step[0],
                    (j as f64 + 0.5) * grid.step[1],
                    (k as f64 + 0.5) * grid.step[2],
                ]);
            }
        }
    }
    let mut cells = Vec::with_capacity(12 * nx[0] * nx[1] * nx[2]);
    for k in 0..nx[2] {
        for j in 0..nx[1] {
            for i in 0..nx[0] {
                let m = mid_id(i, j, k);
                for perm in &PERMS {
                    let [p0, p1, p2, p3] = kuhn_path([i, j, k], perm, &grid);
                    cells.push(oriented(&vertices, [p0, p1, p2, m]));
                    cells.push(oriented(&vertices, [m, p1, p2, p3]));
                }
            }
        }
    }
    Mesh::new(vertices, cells)
}

const MESH_MAGIC: &str = "tetmesh 1";

/// Loads a mesh from the ASCII `tetmesh 1` format. Any malformed line,
/// out-of-range index, or inverted element is reported with its line number.
pub fn load_mesh<P: AsRef<Path>>(path: P) -> Result<Mesh, MeshError> {
    let path_str = path.as_ref().display().to_string();
    let text = std::fs::read_to_string(path.as_ref()).map_err(|source| MeshError::Io {
        path: path_str.clone(),
        source,
    })?;
    parse_mesh(&text, &path_str)
}

pub fn parse_mesh(text: &str, origin: &str) -> Result<Mesh, MeshError> {
    let err = |line: usize, msg: String| MeshError::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l));
    let (ln, header) = lines
        .next()
        .ok_or_else(|| err(1, "empty file".to_string()))?;
    if header.trim() != MESH_MAGIC {
        return Err(err(ln, format!("expected header '{MESH_MAGIC}'")));
    }
    let (ln, counts) = lines
        .next()
        .ok_or_else(|| err(2, "missing vertex/cell counts".to_string()))?;
    let mut it = counts.split_whitespace();
    let nv: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| err(ln, "bad vertex count".to_string()))?;
    let nc: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| err(ln, "bad cell count".to_string()))?;
    if it.next().is_some() {
        return Err(err(ln, "trailing tokens after counts".to_string()));
    }
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| err(2 + nv, "unexpected end of file in vertex block".to_string()))?;
        let mut p = [0.0; 3];
        let mut it = line.split_whitespace();
        for coord in &mut p {
            *coord = it
                .next()
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| err(ln, "expected three coordinates".to_string()))?;
        }
        if it.next().is_some() {
            return Err(err(ln, "trailing tokens after coordinates".to_string()));
        }
        vertices.push(p);
    }
    let mut cells = Vec::with_capacity(nc);
    for c in 0..nc {
        let (ln, line) = lines.next().ok_or_else(|| {
            err(
                2 + nv + nc,
                "unexpected end of file in cell block".to_string(),
            )
        })?;
        let mut cell = [0usize; 4];
        let mut it = line.split_whitespace();
        for idx in &mut cell {
            *idx = it
                .next()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| err(ln, "expected four vertex indices".to_string()))?;
        }
        if it.next().is_some() {
            return Err(err(ln, "trailing tokens after cell indices".to_string()));
        }
        for &i in &cell {
            if i >= nv {
                return Err(err(
                    ln,
                    format!("index out of range: vertex {i} of {nv} in cell {c}"),
                ));
            }
        }
        for a in 0..4 {
            for b in (a + 1)..4 {
                if cell[a] == cell[b] {
                    return Err(err(ln, format!("duplicate vertex {} in cell {c}", cell[a])));
                }
            }
        }
        let vol = signed_volume(&vertices, &cell);
        if vol <= 0.0 {
            return Err(err(
                ln,
                format!("inverted element: cell {c} has signed volume {vol:e}"),
            ));
        }
        cells.push(cell);
    }
    Mesh::new(vertices, cells)
}

/// Serializes a mesh to the `tetmesh 1` format with 17 significant digits,
/// so that `load(save(m)) == m` bit-exactly.
pub fn mesh_to_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MESH_MAGIC}");
    let _ = writeln!(s, "{} {}", mesh.vertex_count(), mesh.cell_count());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]);
    }
    for c in mesh.cells() {
        let _ = writeln!(s, "{} {} {} {}", c[0], c[1], c[2], c[3]);
    }
    s
}

pub fn save_mesh<P: AsRef<Path>>(mesh: &Mesh, path: P) -> Result<(), MeshError> {
    let path_str = path.as_ref().display().to_string();
    std::fs::write(path.as_ref(), mesh_to_string(mesh)).map_err(|source| MeshError::Io {
        path: path_str,
        source,
    })
}
