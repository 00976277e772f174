//! Shared helpers for the integration suites: the dense saddle-point oracle
//! for constrained solves and deterministic random field generators.

#![allow(clippy::needless_range_loop)]
// each integration binary compiles this module and uses a subset of it
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tangent_llg::assembly::NodalVectorField;
use tangent_llg::linalg::{DenseMatrix, SparseMatrix};
use tangent_llg::mesh::Mesh;

/// Solves the constrained variational problem by Lagrange multipliers:
/// `[A B^T; B 0] [v; mu] = [b; 0]` with one constraint row `m(z) . v(z) = 0`
/// per vertex, via dense LU. Independent of the frame-reduction path used by
/// the production schemes.
pub fn kkt_solve(a: &SparseMatrix, b: &[f64], m: &NodalVectorField) -> NodalVectorField {
    let n3 = a.nrows();
    let n = n3 / 3;
    assert_eq!(b.len(), n3);
    assert_eq!(m.vertex_count(), n);
    let dim = n3 + n;
    let mut kkt = DenseMatrix::zeros(dim, dim);
    for r in 0..n3 {
        for k in a.row_ptr()[r]..a.row_ptr()[r + 1] {
            kkt.set(r, a.col_idx()[k], a.values()[k]);
        }
    }
    for z in 0..n {
        let mz = m.get(z);
        for d in 0..3 {
            kkt.set(n3 + z, 3 * z + d, mz[d]);
            kkt.set(3 * z + d, n3 + z, mz[d]);
        }
    }
    let mut rhs = vec![0.0; dim];
    rhs[..n3].copy_from_slice(b);
    let sol = kkt.lu_solve(&rhs).expect("saddle-point system is regular");
    NodalVectorField::from_values(sol[..n3].to_vec()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random field with unit nodal values.
pub fn random_unit_field(nverts: usize, rng: &mut ChaCha8Rng) -> NodalVectorField {
    let mut f = NodalVectorField::zeros(nverts);
    for z in 0..nverts {
        loop {
            let v: [f64; 3] = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if norm > 0.1 {
                f.set(z, [v[0] / norm, v[1] / norm, v[2] / norm]);
                break;
            }
        }
    }
    f
}

/// Random field with nodal norms in [1, 3].
pub fn random_field_norm_at_least_one(nverts: usize, rng: &mut ChaCha8Rng) -> NodalVectorField {
    let mut f = random_unit_field(nverts, rng);
    for z in 0..nverts {
        let scale: f64 = rng.random_range(1.0..3.0);
        let v = f.get(z);
        f.set(z, [v[0] * scale, v[1] * scale, v[2] * scale]);
    }
    f
}

/// Smooth admissible state used as a non-trivial initial condition.
pub fn smooth_unit_state(mesh: &Mesh, wavelength: f64) -> NodalVectorField {
    let field = tangent_llg::assembly::interpolate_nodal(
        |x| {
            let u = x[0] / wavelength;
            let v = x[1] / wavelength;
            let w = x[2] / wavelength;
            [
                (2.0 * u).cos() * (v + 0.3).sin() + 0.1,
                (u - w).sin() + 0.2,
                (3.0 * v).cos() * (w + 0.5).cos() + 1.2,
            ]
        },
        mesh,
    );
    tangent_llg::tangent::nodal_projection(&field).unwrap()
}

pub fn sup_diff(a: &NodalVectorField, b: &NodalVectorField) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
