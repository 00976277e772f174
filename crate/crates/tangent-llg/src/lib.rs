//! Finite-element library for the Landau-Lifshitz-Gilbert equation with
//! Dzyaloshinskii-Moriya interaction (DMI), built around three tangent plane
//! time integrators:
//!
//! * `TPS1` -- first-order scheme with nodal projection,
//! * `PF-TPS1` -- its projection-free variant,
//! * `TPS2` -- the (almost) second-order scheme with cut-off Lagrange
//!   multiplier weight and optional artificial stabilization.
//!
//! All quantities are nondimensional: lengths share one unit with the
//! exchange length `lex` and the DMI length `ldm`, time is rescaled so that
//! the Gilbert damping `alpha` and the time-step size `k` are dimensionless.
//!
//! The crate is organized bottom-up: [`mesh`] and [`linalg`] provide the
//! discrete substrate, [`assembly`] builds the P1 bilinear forms, [`physics`]
//! holds material data and energy evaluation, [`tangent`] realizes the
//! discrete tangent space machinery, [`integrators`] implements the schemes
//! and the simulation driver, [`diagnostics`] the observables, and [`config`]
//! / [`output`] the file formats used by the `tangent-llg` CLI.

// indexed loops mirror the math in the numeric kernels; `!(x > 0.0)`
// validation guards intentionally reject NaN
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod config;
pub mod diagnostics;
pub mod integrators;
pub mod linalg;
pub mod mesh;
pub mod output;
pub mod physics;
pub mod quadrature;
pub mod tangent;

pub use assembly::{assemble_cross, assemble_static, assemble_weighted_mass, interpolate_nodal};
pub use assembly::{FormSet, NodalVectorField};
pub use config::{parse_config, InitialCondition, MeshSource, SimConfig};
pub use integrators::{run, validate_config, IntegratorState, SchemeChoice, SchemeKind, Stepper};
pub use linalg::{solve, SolveReport, SparseMatrix};
pub use mesh::{analyze_mesh, generate_type1, generate_type2, load_mesh, save_mesh, Mesh};
pub use physics::{DmiForm, MaterialParams};
pub use tangent::{build_frame, nodal_projection, TangentFrame};
