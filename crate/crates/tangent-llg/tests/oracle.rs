//! Constrained-solve oracle checks beyond the acceptance criteria.

mod common;

use tangent_llg::assembly::{assemble_static, interpolate_nodal};
use tangent_llg::integrators::{IntegratorState, SchemeChoice, SolverOptions, Stepper};
use tangent_llg::mesh::generate_type1;
use tangent_llg::physics::{DmiForm, MaterialParams};

fn tight() -> SolverOptions {
    SolverOptions {
        tol: 1e-12,
        maxit_factor: 20,
    }
}

// The boundary-driven <m, curl phi> term makes even a uniform state move
// under bulk DMI; the computed update must match the dense multiplier
// oracle.
#[test]
fn uniform_bulk_dmi_update_matches_kkt_oracle() {
    let mesh = generate_type1([1, 1, 1], [1.0, 1.0, 1.0]).unwrap();
    let forms = assemble_static(&mesh, DmiForm::Bulk);
    let params = MaterialParams::new(1.0, 1.0, 0.5, DmiForm::Bulk).unwrap();
    let k = 0.05;
    let mut stepper = Stepper::new(
        &mesh,
        &forms,
        &params,
        SchemeChoice::tps1(1.0).unwrap(),
        k,
        tight(),
    )
    .unwrap();
    let state = IntegratorState::initial(interpolate_nodal(|_| [0.0, 0.0, 1.0], &mesh));
    let (a, b) = stepper.assemble_system(&state, k).unwrap();
    let v_oracle = common::kkt_solve(&a, &b, &state.m);
    let out = stepper.step(&state).unwrap();
    let max_v = out
        .v
        .as_slice()
        .iter()
        .fold(0.0f64, |acc, &x| acc.max(x.abs()));
    assert!(max_v > 1e-3, "uniform state must move under bulk DMI");
    assert!(common::sup_diff(&out.v, &v_oracle) <= 1e-8 * max_v.max(1.0));
}

// Same system, same v: the two first-order schemes differ only in the
// update rule, and the projection-free one matches the oracle as well.
#[test]
fn pftps1_update_matches_kkt_oracle() {
    let mesh = generate_type1([1, 1, 1], [1.0, 1.0, 1.0]).unwrap();
    let forms = assemble_static(&mesh, DmiForm::Bulk);
    let params = MaterialParams::new(1.0, 2.0, 0.3, DmiForm::Bulk).unwrap();
    let k = 0.04;
    let mut stepper = Stepper::new(
        &mesh,
        &forms,
        &params,
        SchemeChoice::pf_tps1(0.7).unwrap(),
        k,
        tight(),
    )
    .unwrap();
    let mut state = IntegratorState::initial(common::smooth_unit_state(&mesh, 0.9));
    for _ in 0..5 {
        let (a, b) = stepper.assemble_system(&state, k).unwrap();
        let v_oracle = common::kkt_solve(&a, &b, &state.m);
        let out = stepper.step(&state).unwrap();
        let scale = out
            .v
            .as_slice()
            .iter()
            .fold(1.0f64, |acc, &x| acc.max(x.abs()));
        assert!(common::sup_diff(&out.v, &v_oracle) <= 1e-8 * scale);
        state = out.state;
    }
}
