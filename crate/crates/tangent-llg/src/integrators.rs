//! The three tangent plane time integrators and the simulation driver.
//!
//! Every scheme solves one linear system per step for the tangential update
//! `v` in the discrete tangent space at the current magnetization, then
//! advances the state:
//!
//! * TPS1: matrix `alpha M + X(m) + lex^2 theta k S`, projected update;
//! * PF-TPS1: same system, plain linear update `m + k v`;
//! * TPS2: matrix `W + X(m) + (lex^2/2) k (1 + rho) S + (ldm/4) k (C+C^T)`
//!   with the cut-off weighted mass `W`, projected update.
//!
//! The common right-hand side is
//! `-lex^2 S m - (ldm/2)(C + C^T) m + M h_low`.
//! Constrained solves go through the per-vertex frame reduction of
//! [`crate::tangent`]; the reduced systems have a positive definite
//! symmetric part (for TPS2 under the ellipticity threshold checked at
//! construction), so the iterative solver always converges.

use thiserror::Error;

use crate::assembly::{
    vec_bilinear_scalar, vec_matvec_scalar, BlockPattern, FormSet, NodalVectorField,
};
use crate::config::{build_initial, ConfigError, SimConfig};
use crate::diagnostics::{Sample, StepRecord, TimeSeries};
use crate::linalg::{solve_op, SolveReport};
use crate::mesh::{analyze_mesh, Mesh};
use crate::physics::{
    cutoff_w, energy_breakdown, lambda_at_quadrature, lower_order_field, m_of_k, rho_of_k,
    MaterialParams, PhysicsError,
};
use crate::quadrature::DEGREE3;
use crate::tangent::{
    build_frame, expand, nodal_projection, reduce_rhs, ReducedOperator, TangentError,
};

#[derive(Debug, Error)]
pub enum IntegratorError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(
        "TPS2 ellipticity check failed at k = {k}: coefficient \
         2a^2/(2a + M(k)k) - ldm^2 k/(4 lex^2) = {coefficient:e} <= 0; \
         largest admissible time-step size is about {k_max:e}"
    )]
    Ellipticity {
        k: f64,
        coefficient: f64,
        k_max: f64,
    },
    #[error("linear solve failed at step {step}: {iterations} iterations, relative residual {relative_residual:e}")]
    SolveFailed {
        step: usize,
        iterations: usize,
        relative_residual: f64,
    },
    #[error(transparent)]
    Tangent(#[from] TangentError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error("config rejected: {0}")]
    ConfigRejected(String),
    #[error(transparent)]
    Initial(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Tps1,
    PfTps1,
    Tps2,
}

impl SchemeKind {
    pub fn projects(self) -> bool {
        !matches!(self, SchemeKind::PfTps1)
    }
}

/// Scheme selection: `theta` modulates the implicitness of the exchange term
/// for TPS1/PF-TPS1; TPS2 instead uses the fixed Crank-Nicolson-type weight
/// with optional artificial stabilization `rho(k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeChoice {
    pub kind: SchemeKind,
    pub theta: f64,
    pub stabilization_on: bool,
}

impl SchemeChoice {
    pub fn tps1(theta: f64) -> Result<Self, IntegratorError> {
        check_theta(theta)?;
        Ok(Self {
            kind: SchemeKind::Tps1,
            theta,
            stabilization_on: false,
        })
    }

    pub fn pf_tps1(theta: f64) -> Result<Self, IntegratorError> {
        check_theta(theta)?;
        Ok(Self {
            kind: SchemeKind::PfTps1,
            theta,
            stabilization_on: false,
        })
    }

    pub fn tps2(stabilization_on: bool) -> Self {
        Self {
            kind: SchemeKind::Tps2,
            theta: 0.5,
            stabilization_on,
        }
    }
}

fn check_theta(theta: f64) -> Result<(), IntegratorError> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(IntegratorError::InvalidArgument(format!(
            "theta must lie in [0, 1], got {theta}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorState {
    pub step: usize,
    pub time: f64,
    pub m: NodalVectorField,
}

impl IntegratorState {
    pub fn initial(m: NodalVectorField) -> Self {
        Self {
            step: 0,
            time: 0.0,
            m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    /// Iteration cap as a multiple of the reduced system dimension.
    pub maxit_factor: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            maxit_factor: 10,
        }
    }
}

/// Scalars recorded while stepping; consumed by the diagnostics module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepScalars {
    pub v_l2_sq: f64,
    pub grad_v_l2_sq: f64,
    pub curl_v_dot_v: f64,
    pub weighted_v_v: f64,
    pub stab_rho: f64,
    pub grad_pred_l2_sq: f64,
    pub grad_new_l2_sq: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub v: NodalVectorField,
    pub state: IntegratorState,
    pub solve: SolveReport,
    pub scalars: StepScalars,
}

/// Reusable per-run context: block sparsity pattern, pattern-aligned static
/// values, and the TPS2 cut-off constants. Rebuilding matrices per step only
/// rewrites values.
pub struct Stepper<'a> {
    mesh: &'a Mesh,
    forms: &'a FormSet,
    params: &'a MaterialParams,
    scheme: SchemeChoice,
    k: f64,
    solver: SolverOptions,
    pattern: BlockPattern,
    mass_values: Vec<f64>,
    stiff_values: Vec<f64>,
    /// (C + C^T) on the block pattern; empty when no DMI form is configured.
    dmi_sym_values: Vec<f64>,
    system: crate::linalg::SparseMatrix,
    m_cap: f64,
    rho: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(
        mesh: &'a Mesh,
        forms: &'a FormSet,
        params: &'a MaterialParams,
        scheme: SchemeChoice,
        k: f64,
        solver: SolverOptions,
    ) -> Result<Self, IntegratorError> {
        if !(k > 0.0) {
            return Err(IntegratorError::InvalidArgument(format!(
                "time-step size must be positive, got {k}"
            )));
        }
        let (m_cap, rho) = if matches!(scheme.kind, SchemeKind::Tps2) {
            let m_cap = m_of_k(k)?;
            let rho = if scheme.stabilization_on {
                rho_of_k(k)?
            } else {
                0.0
            };
            let coefficient = tps2_ellipticity_coefficient(k, params);
            if coefficient <= 0.0 {
                return Err(IntegratorError::Ellipticity {
                    k,
                    coefficient,
                    k_max: tps2_k_threshold(params),
                });
            }
            (m_cap, rho)
        } else {
            (0.0, 0.0)
        };
        let pattern = BlockPattern::new(mesh);
        let system = pattern.zero_matrix();
        let nnz = system.nnz();
        let mut mass_values = vec![0.0; nnz];
        pattern.add_scalar_expanded(&forms.scalar_mass, 1.0, &mut mass_values);
        let mut stiff_values = vec![0.0; nnz];
        pattern.add_scalar_expanded(&forms.scalar_stiffness, 1.0, &mut stiff_values);
        let mut dmi_sym_values = Vec::new();
        if forms.dmi_blocks.nnz() > 0 {
            dmi_sym_values = vec![0.0; nnz];
            pattern.add_symmetrized(&forms.dmi_blocks, 1.0, &mut dmi_sym_values);
        }
        Ok(Self {
            mesh,
            forms,
            params,
            scheme,
            k,
            solver,
            pattern,
            mass_values,
            stiff_values,
            dmi_sym_values,
            system,
            m_cap,
            rho,
        })
    }

    pub fn scheme(&self) -> SchemeChoice {
        self.scheme
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Stabilization factor in effect (zero unless TPS2 with stabilization).
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn step(&mut self, state: &IntegratorState) -> Result<StepOutcome, IntegratorError> {
        self.step_with_dt(state, self.k)
    }

    /// One step of size `dt` (the driver truncates the final step to land on
    /// the final time exactly). TPS2 keeps `M(k)` and `rho(k)` frozen at the
    /// nominal step size.
    pub fn step_with_dt(
        &mut self,
        state: &IntegratorState,
        dt: f64,
    ) -> Result<StepOutcome, IntegratorError> {
        let (b, weights) = self.fill_system(state, dt)?;
        let frame = build_frame(&state.m)?;
        let b_red = reduce_rhs(&b, &frame);
        let op = ReducedOperator::new(&self.system, &frame);
        let maxit = self.solver.maxit_factor * b_red.len();
        let (c, report) = solve_op(&op, &b_red, self.solver.tol, maxit);
        if !report.converged {
            return Err(IntegratorError::SolveFailed {
                step: state.step,
                iterations: report.iterations,
                relative_residual: report.relative_residual,
            });
        }
        let v = expand(&c, &frame);

        let nverts = state.m.vertex_count();
        let mut predictor = NodalVectorField::zeros(nverts);
        for (i, p) in predictor.as_mut_slice().iter_mut().enumerate() {
            *p = state.m.as_slice()[i] + dt * v.as_slice()[i];
        }
        let m_new = if self.scheme.kind.projects() {
            nodal_projection(&predictor)?
        } else {
            predictor.clone()
        };

        let v_l2_sq = vec_bilinear_scalar(&self.forms.scalar_mass, &v, &v);
        let grad_v_l2_sq = vec_bilinear_scalar(&self.forms.scalar_stiffness, &v, &v);
        let curl_v_dot_v = if self.forms.dmi_blocks.nnz() > 0 {
            self.forms.dmi_blocks.bilinear(v.as_slice(), v.as_slice())
        } else {
            0.0
        };
        let weighted_v_v = match self.scheme.kind {
            SchemeKind::Tps2 => self.weighted_mass_energy(&weights, &v),
            _ => self.params.alpha * v_l2_sq,
        };
        let scalars = StepScalars {
            v_l2_sq,
            grad_v_l2_sq,
            curl_v_dot_v,
            weighted_v_v,
            stab_rho: self.rho,
            grad_pred_l2_sq: vec_bilinear_scalar(
                &self.forms.scalar_stiffness,
                &predictor,
                &predictor,
            ),
            grad_new_l2_sq: vec_bilinear_scalar(&self.forms.scalar_stiffness, &m_new, &m_new),
        };
        Ok(StepOutcome {
            v,
            state: IntegratorState {
                step: state.step + 1,
                time: state.time + dt,
                m: m_new,
            },
            solve: report,
            scalars,
        })
    }

    /// The assembled 3N x 3N system and right-hand side of the scheme's
    /// variational problem at the given state (before tangent-space
    /// reduction); used by the saddle-point oracle tests.
    pub fn assemble_system(
        &mut self,
        state: &IntegratorState,
        dt: f64,
    ) -> Result<(crate::linalg::SparseMatrix, Vec<f64>), IntegratorError> {
        let (b, _) = self.fill_system(state, dt)?;
        Ok((self.system.clone(), b))
    }

    /// Writes the scheme matrix into `self.system` and returns the
    /// right-hand side (and TPS2 cut-off weights, for the damping record).
    fn fill_system(
        &mut self,
        state: &IntegratorState,
        dt: f64,
    ) -> Result<(Vec<f64>, Vec<f64>), IntegratorError> {
        let lex2 = self.params.lex * self.params.lex;
        let ldm_s = self.params.ldm_signed();
        let alpha = self.params.alpha;
        let m = &state.m;

        let mut weights = Vec::new();
        {
            let values = self.system.values_mut();
            match self.scheme.kind {
                SchemeKind::Tps1 | SchemeKind::PfTps1 => {
                    let theta_term = lex2 * self.scheme.theta * dt;
                    for (i, v) in values.iter_mut().enumerate() {
                        *v = alpha * self.mass_values[i] + theta_term * self.stiff_values[i];
                    }
                }
                SchemeKind::Tps2 => {
                    let stiff_term = 0.5 * lex2 * dt * (1.0 + self.rho);
                    let dmi_term = 0.25 * ldm_s * dt;
                    if self.dmi_sym_values.is_empty() {
                        for (i, v) in values.iter_mut().enumerate() {
                            *v = stiff_term * self.stiff_values[i];
                        }
                    } else {
                        for (i, v) in values.iter_mut().enumerate() {
                            *v = stiff_term * self.stiff_values[i]
                                + dmi_term * self.dmi_sym_values[i];
                        }
                    }
                }
            }
        }
        if matches!(self.scheme.kind, SchemeKind::Tps2) {
            let lambda = lambda_at_quadrature(m, self.mesh, self.params);
            weights = lambda
                .iter()
                .map(|&s| cutoff_w(s, self.m_cap, dt, alpha))
                .collect();
            let values = self.system.values_mut();
            // split borrow: pattern methods only read the pattern
            let pattern = &self.pattern;
            pattern
                .add_weighted_mass(self.mesh, &weights, values)
                .expect("weights are generated with the rule layout");
            pattern.add_cross(self.mesh, m, values);
        } else {
            let values = self.system.values_mut();
            self.pattern.add_cross(self.mesh, m, values);
        }

        // rhs: -lex^2 S m - (ldm/2)(C + C^T) m + M h_low
        let stiff_m = vec_matvec_scalar(&self.forms.scalar_stiffness, m);
        let mut b = vec![0.0; 3 * m.vertex_count()];
        for (bi, si) in b.iter_mut().zip(stiff_m.as_slice()) {
            *bi = -lex2 * si;
        }
        if self.forms.dmi_blocks.nnz() > 0 {
            let half = -0.5 * ldm_s;
            self.forms.dmi_blocks.matvec_acc(m.as_slice(), half, &mut b);
            // transpose part: b -= (ldm/2) C^T m, accumulated column-wise
            let c = &self.forms.dmi_blocks;
            for row in 0..c.nrows() {
                let mrow = m.as_slice()[row];
                for k in c.row_ptr()[row]..c.row_ptr()[row + 1] {
                    b[c.col_idx()[k]] += half * c.values()[k] * mrow;
                }
            }
        }
        let h_low = lower_order_field(m, state.time, self.params);
        if h_low.as_slice().iter().any(|&x| x != 0.0) {
            let mass_h = vec_matvec_scalar(&self.forms.scalar_mass, &h_low);
            for (bi, hi) in b.iter_mut().zip(mass_h.as_slice()) {
                *bi += hi;
            }
        }
        Ok((b, weights))
    }

    /// <W v, v> evaluated with the defining quadrature rule.
    fn weighted_mass_energy(&self, weights: &[f64], v: &NodalVectorField) -> f64 {
        let rule = DEGREE3;
        let mut total = 0.0;
        for c in 0..self.mesh.cell_count() {
            let vol = self.mesh.cell_volume(c);
            let cell = self.mesh.cell(c);
            for q in 0..rule.len() {
                let bc = rule.barycentric(q);
                let mut vq = [0.0; 3];
                for (i, &z) in cell.iter().enumerate() {
                    let vz = v.get(z);
                    for d in 0..3 {
                        vq[d] += bc[i] * vz[d];
                    }
                }
                let w = weights[c * rule.len() + q];
                total += 6.0
                    * vol
                    * rule.weights[q]
                    * w
                    * (vq[0] * vq[0] + vq[1] * vq[1] + vq[2] * vq[2]);
            }
        }
        total
    }
}

/// Ellipticity coefficient of the TPS2 bilinear form from the well-posedness
/// argument (with the Young-inequality weight `eps = lex^2/ldm`):
/// `2 alpha^2 / (2 alpha + M(k) k) - ldm^2 k / (4 lex^2)`.
pub fn tps2_ellipticity_coefficient(k: f64, params: &MaterialParams) -> f64 {
    let m_cap = match m_of_k(k) {
        Ok(m) => m,
        Err(_) => return f64::NEG_INFINITY,
    };
    let alpha = params.alpha;
    2.0 * alpha * alpha / (2.0 * alpha + m_cap * k)
        - params.ldm * params.ldm * k / (4.0 * params.lex * params.lex)
}

/// Largest time-step size for which the TPS2 ellipticity coefficient stays
/// positive (bisection; the coefficient is monotone in k on (0,1)).
pub fn tps2_k_threshold(params: &MaterialParams) -> f64 {
    let mut lo = 1e-12;
    let mut hi = 1.0 - 1e-12;
    if tps2_ellipticity_coefficient(hi, params) > 0.0 {
        return hi;
    }
    if tps2_ellipticity_coefficient(lo, params) <= 0.0 {
        return 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tps2_ellipticity_coefficient(mid, params) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// One-shot TPS1 step (builds a fresh context; use [`Stepper`] for runs).
pub fn tps1_step(
    mesh: &Mesh,
    forms: &FormSet,
    params: &MaterialParams,
    state: &IntegratorState,
    k: f64,
    theta: f64,
    solver: SolverOptions,
) -> Result<StepOutcome, IntegratorError> {
    Stepper::new(mesh, forms, params, SchemeChoice::tps1(theta)?, k, solver)?.step(state)
}

/// One-shot PF-TPS1 step: identical linear system, plain linear update.
pub fn pftps1_step(
    mesh: &Mesh,
    forms: &FormSet,
    params: &MaterialParams,
    state: &IntegratorState,
    k: f64,
    theta: f64,
    solver: SolverOptions,
) -> Result<StepOutcome, IntegratorError> {
    Stepper::new(
        mesh,
        forms,
        params,
        SchemeChoice::pf_tps1(theta)?,
        k,
        solver,
    )?
    .step(state)
}

/// One-shot TPS2 step.
pub fn tps2_step(
    mesh: &Mesh,
    forms: &FormSet,
    params: &MaterialParams,
    state: &IntegratorState,
    k: f64,
    stabilization_on: bool,
    solver: SolverOptions,
) -> Result<StepOutcome, IntegratorError> {
    Stepper::new(
        mesh,
        forms,
        params,
        SchemeChoice::tps2(stabilization_on),
        k,
        solver,
    )?
    .step(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
    Info,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    fn error(message: String) -> Self {
        Self {
            severity: Severity::Error,
            message,
        }
    }

    fn warning(message: String) -> Self {
        Self {
            severity: Severity::Warning,
            message,
        }
    }

    fn info(message: String) -> Self {
        Self {
            severity: Severity::Info,
            message,
        }
    }
}

/// Checks a configuration against the schemes' theory conditions. Violations
/// of the convergence theory are warnings, not errors: the reference
/// experiments deliberately run such configurations and the methods behave
/// identically in practice. Only TPS2 well-posedness is a hard error.
pub fn validate_config(cfg: &SimConfig, mesh: &Mesh) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let scheme = cfg.scheme;
    let params = &cfg.material;
    if !(cfg.k > 0.0) {
        out.push(Diagnostic::error(format!(
            "time-step size must be positive, got k = {}",
            cfg.k
        )));
    }
    if cfg.t_final < 0.0 {
        out.push(Diagnostic::error(format!(
            "final time must be nonnegative, got T = {}",
            cfg.t_final
        )));
    }
    if cfg.output_every == 0 {
        out.push(Diagnostic::error(
            "output_every must be at least 1".to_string(),
        ));
    }
    if !(cfg.solver_tol > 0.0) {
        out.push(Diagnostic::error(format!(
            "solver_tol must be positive, got {}",
            cfg.solver_tol
        )));
    }
    if matches!(scheme.kind, SchemeKind::Tps2) {
        if cfg.k >= 1.0 {
            out.push(Diagnostic::error(format!(
                "TPS2 requires k < 1 for the cut-off M(k) = |k log k|^-1, got k = {}",
                cfg.k
            )));
        } else {
            let coefficient = tps2_ellipticity_coefficient(cfg.k, params);
            if coefficient <= 0.0 {
                out.push(Diagnostic::error(format!(
                    "TPS2 ellipticity fails at k = {}: coefficient {coefficient:e} <= 0; \
                     the threshold time-step size is about {:e}",
                    cfg.k,
                    tps2_k_threshold(params)
                )));
            }
        }
    }
    match scheme.kind {
        SchemeKind::Tps1 => {
            if scheme.theta < 0.5 {
                out.push(Diagnostic::warning(format!(
                    "TPS1 with theta = {} < 1/2 is outside the convergence theory \
                     (needs k/h^2 -> 0)",
                    scheme.theta
                )));
            } else if scheme.theta == 0.5 {
                out.push(Diagnostic::warning(
                    "TPS1 with theta = 1/2: instability observed for theta=1/2 at small h; \
                     no artificial damping is left to control the energy"
                        .to_string(),
                ));
            }
        }
        SchemeKind::PfTps1 => {
            if scheme.theta <= 0.5 {
                out.push(Diagnostic::warning(format!(
                    "PF-TPS1 with theta = {} <= 1/2 is outside the convergence theory \
                     (needs theta > 1/2)",
                    scheme.theta
                )));
            }
        }
        SchemeKind::Tps2 => {}
    }
    if matches!(scheme.kind, SchemeKind::Tps1 | SchemeKind::Tps2) {
        let report = analyze_mesh(mesh);
        if !report.angle_condition_holds {
            out.push(Diagnostic::warning(format!(
                "mesh violates the angle condition ({} offending vertex pairs, worst \
                 off-diagonal {:e}); projection energy decrease is monitored, not guaranteed",
                report.offending_pairs, report.worst_offdiag
            )));
        }
        let ratio = cfg.k / report.h_min;
        out.push(Diagnostic::info(format!(
            "k/h = {ratio:.4e} (k = {}, h_min = {:.4e}); the theory assumes k/h -> 0",
            cfg.k, report.h_min
        )));
        if ratio > 1.0 {
            out.push(Diagnostic::warning(format!(
                "k/h = {ratio:.3} is large; the CFL-type condition k/h -> 0 is far from \
                 satisfied"
            )));
        }
    }
    out
}

pub struct RunOutput {
    pub final_state: IntegratorState,
    pub series: TimeSeries,
}

/// A failed run still carries the diagnostics recorded so far, so the driver
/// can write partial output.
#[derive(Debug)]
pub struct RunFailure {
    pub error: IntegratorError,
    pub partial: TimeSeries,
}

/// Drives the configured scheme over `ceil(T/k)` steps (the last step is
/// truncated to land on T exactly). Deterministic for a fixed config and
/// mesh. Samples are recorded at t = 0, every `output_every`-th step, and at
/// the final step.
pub fn run(cfg: &SimConfig, mesh: &Mesh) -> Result<RunOutput, Box<RunFailure>> {
    let empty_series = |scheme: SchemeKind| TimeSeries {
        scheme,
        samples: Vec::new(),
        steps: Vec::new(),
        initial_exchange: 0.0,
        initial_dmi: 0.0,
    };
    let fail =
        |error: IntegratorError, partial: TimeSeries| Box::new(RunFailure { error, partial });

    let diags = validate_config(cfg, mesh);
    let errors: Vec<&Diagnostic> = diags
        .iter()
        .filter(|d| d.severity == Severity::Error)
        .collect();
    if !errors.is_empty() {
        let msg = errors
            .iter()
            .map(|d| d.message.clone())
            .collect::<Vec<_>>()
            .join("; ");
        return Err(fail(
            IntegratorError::ConfigRejected(msg),
            empty_series(cfg.scheme.kind),
        ));
    }

    let m0 = match build_initial(cfg, mesh) {
        Ok(m) => m,
        Err(e) => return Err(fail(e.into(), empty_series(cfg.scheme.kind))),
    };
    let m0 = if cfg.scheme.kind.projects() {
        match nodal_projection(&m0) {
            Ok(m) => m,
            Err(e) => return Err(fail(e.into(), empty_series(cfg.scheme.kind))),
        }
    } else {
        m0
    };

    let forms = crate::assembly::assemble_static(mesh, cfg.material.dmi_form);
    let solver = SolverOptions {
        tol: cfg.solver_tol,
        ..SolverOptions::default()
    };
    let mut stepper = match Stepper::new(mesh, &forms, &cfg.material, cfg.scheme, cfg.k, solver) {
        Ok(s) => s,
        Err(e) => return Err(fail(e, empty_series(cfg.scheme.kind))),
    };

    let mut state = IntegratorState::initial(m0);
    let e0 = energy_breakdown(&state.m, &forms, &cfg.material, 0.0);
    let mut series = TimeSeries {
        scheme: cfg.scheme.kind,
        samples: Vec::new(),
        steps: Vec::new(),
        initial_exchange: e0.exchange,
        initial_dmi: e0.dmi,
    };
    series
        .samples
        .push(make_sample(&state, &forms, &cfg.material, 0.0, mesh, true));

    let n_steps = step_count(cfg.t_final, cfg.k);
    let mut stability_window = true;
    for i in 0..n_steps {
        let remaining = cfg.t_final - i as f64 * cfg.k;
        let dt = cfg.k.min(remaining);
        if dt <= 0.0 {
            break;
        }
        let outcome = match stepper.step_with_dt(&state, dt) {
            Ok(o) => o,
            Err(e) => return Err(fail(e, series)),
        };
        let record = StepRecord {
            dt,
            v_l2_sq: outcome.scalars.v_l2_sq,
            grad_v_l2_sq: outcome.scalars.grad_v_l2_sq,
            curl_v_dot_v: outcome.scalars.curl_v_dot_v,
            weighted_v_v: outcome.scalars.weighted_v_v,
            stab_rho: outcome.scalars.stab_rho,
            grad_pred_l2_sq: outcome.scalars.grad_pred_l2_sq,
            grad_new_l2_sq: outcome.scalars.grad_new_l2_sq,
            e_exchange_after: 0.5
                * cfg.material.lex
                * cfg.material.lex
                * outcome.scalars.grad_new_l2_sq,
            e_dmi_after: if forms.dmi_blocks.nnz() > 0 {
                0.5 * cfg.material.ldm_signed()
                    * forms
                        .dmi_blocks
                        .bilinear(outcome.state.m.as_slice(), outcome.state.m.as_slice())
            } else {
                0.0
            },
        };
        stability_window &= record.stability_ok();
        series.steps.push(record);
        state = outcome.state;
        if (i + 1) % cfg.output_every == 0 || i + 1 == n_steps {
            let v_norm = outcome.scalars.v_l2_sq.max(0.0).sqrt();
            series.samples.push(make_sample(
                &state,
                &forms,
                &cfg.material,
                v_norm,
                mesh,
                stability_window,
            ));
            stability_window = true;
        }
    }
    Ok(RunOutput {
        final_state: state,
        series,
    })
}

/// ceil(T/k) with a relative guard so that T/k within roundoff of an integer
/// is not bumped to an extra step.
pub fn step_count(t_final: f64, k: f64) -> usize {
    if t_final <= 0.0 {
        return 0;
    }
    let ratio = t_final / k;
    let rounded = ratio.round();
    if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
        rounded as usize
    } else {
        ratio.ceil() as usize
    }
}

fn make_sample(
    state: &IntegratorState,
    forms: &FormSet,
    params: &MaterialParams,
    v_norm_l2: f64,
    mesh: &Mesh,
    stability_ok: bool,
) -> Sample {
    let e = energy_breakdown(&state.m, forms, params, state.time);
    Sample {
        t: state.time,
        e_total: e.total(),
        e_exchange: e.exchange,
        e_dmi: e.dmi,
        e_lower: e.anisotropy + e.zeeman,
        avg_m: crate::diagnostics::avg_magnetization(&state.m, forms),
        v_norm_l2,
        constraint_l1: crate::diagnostics::constraint_violation_l1(&state.m, mesh),
        stability_ok,
    }
}
