//! Material parameters, nondimensionalization, energy evaluation, the
//! Lagrange-multiplier field lambda, and the TPS2 auxiliary functions
//! `W_M`, `M(k)`, `rho(k)`, plus the explicitly treated lower-order field
//! contributions (uniaxial anisotropy, applied field pulse).

use thiserror::Error;

use crate::assembly::{vec_bilinear_scalar, FormSet, NodalVectorField};
use crate::mesh::{cell_geometry, Mesh};
use crate::quadrature::DEGREE3;

pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;
/// Rescaled gyromagnetic ratio of the electron, m/(A s).
pub const GAMMA0: f64 = 2.21e5;

#[derive(Debug, Error)]
pub enum PhysicsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DmiForm {
    Bulk,
    Interfacial,
    #[default]
    None,
}

/// Sign of the DMI constant. The schemes assume `D > 0`; a negative constant
/// only flips the chirality and is realized by negating the assembled DMI
/// blocks wherever they enter energy and field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Chirality {
    #[default]
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anisotropy {
    /// Rescaled uniaxial strength 2K/(mu0 Ms^2).
    pub q: f64,
    /// Easy axis, unit length.
    pub axis: [f64; 3],
}

/// Piecewise-linear applied field pulse: linear ramp up, hold, linear ramp
/// down, zero outside the support. Times are dimensionless.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSchedule {
    pub h_max: f64,
    pub t_ramp_up: f64,
    pub t_hold: f64,
    pub t_ramp_down: f64,
    pub direction: [f64; 3],
}

impl PulseSchedule {
    pub fn amplitude(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        if t < self.t_ramp_up {
            return self.h_max * t / self.t_ramp_up;
        }
        let t1 = self.t_ramp_up + self.t_hold;
        if t <= t1 {
            return self.h_max;
        }
        let t2 = t1 + self.t_ramp_down;
        if t < t2 {
            return self.h_max * (t2 - t) / self.t_ramp_down;
        }
        0.0
    }

    pub fn field_at(&self, t: f64) -> [f64; 3] {
        let a = self.amplitude(t);
        [
            a * self.direction[0],
            a * self.direction[1],
            a * self.direction[2],
        ]
    }
}

/// Nondimensional material data. Lengths (`lex`, `ldm`) share the mesh
/// coordinate unit.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialParams {
    pub lex: f64,
    pub ldm: f64,
    pub alpha: f64,
    pub dmi_form: DmiForm,
    pub chirality: Chirality,
    pub anisotropy: Option<Anisotropy>,
    pub zeeman: Option<PulseSchedule>,
}

impl MaterialParams {
    pub fn new(lex: f64, ldm: f64, alpha: f64, dmi_form: DmiForm) -> Result<Self, PhysicsError> {
        if !(lex > 0.0) {
            return Err(PhysicsError::InvalidArgument(format!(
                "lex must be positive, got {lex}"
            )));
        }
        if !(ldm >= 0.0) {
            return Err(PhysicsError::InvalidArgument(format!(
                "ldm must be nonnegative (use the chirality flag for D < 0), got {ldm}"
            )));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(PhysicsError::InvalidArgument(format!(
                "alpha must lie in (0, 1], got {alpha}"
            )));
        }
        if ldm > 0.0 && matches!(dmi_form, DmiForm::None) {
            return Err(PhysicsError::InvalidArgument(
                "ldm > 0 requires a DMI form (bulk or interfacial)".to_string(),
            ));
        }
        Ok(Self {
            lex,
            ldm,
            alpha,
            dmi_form,
            chirality: Chirality::Positive,
            anisotropy: None,
            zeeman: None,
        })
    }

    pub fn with_chirality(mut self, chirality: Chirality) -> Self {
        self.chirality = chirality;
        self
    }

    pub fn with_anisotropy(mut self, q: f64, axis: [f64; 3]) -> Result<Self, PhysicsError> {
        let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(PhysicsError::InvalidArgument(format!(
                "anisotropy axis must have unit norm, got |a| = {norm}"
            )));
        }
        self.anisotropy = Some(Anisotropy { q, axis });
        Ok(self)
    }

    pub fn with_zeeman(mut self, pulse: PulseSchedule) -> Self {
        self.zeeman = Some(pulse);
        self
    }

    /// DMI length with the chirality sign applied; multiplies the assembled
    /// DMI blocks everywhere they appear.
    pub fn ldm_signed(&self) -> f64 {
        match self.chirality {
            Chirality::Positive => self.ldm,
            Chirality::Negative => -self.ldm,
        }
    }
}

/// Output of [`rescale`]: the material lengths in nanometers and the
/// dimensionless time-step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rescaled {
    pub lex_nm: f64,
    pub ldm_nm: f64,
    pub k: f64,
}

/// Nondimensionalization from SI inputs: `lex = sqrt(2A/(mu0 Ms^2))`,
/// `ldm = 2D/(mu0 Ms^2)`, and dimensionless time `t' = gamma0 Ms t`.
pub fn rescale(
    a_j_per_m: f64,
    d_j_per_m2: f64,
    ms_a_per_m: f64,
    gamma0: f64,
    time_step_s: f64,
) -> Result<Rescaled, PhysicsError> {
    for (name, v) in [
        ("A", a_j_per_m),
        ("Ms", ms_a_per_m),
        ("gamma0", gamma0),
        ("time step", time_step_s),
    ] {
        if !(v > 0.0) {
            return Err(PhysicsError::InvalidArgument(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    if d_j_per_m2 < 0.0 {
        return Err(PhysicsError::InvalidArgument(format!(
            "D must be nonnegative here (use the chirality flag for D < 0), got {d_j_per_m2}"
        )));
    }
    let mu0_ms2 = MU0 * ms_a_per_m * ms_a_per_m;
    Ok(Rescaled {
        lex_nm: (2.0 * a_j_per_m / mu0_ms2).sqrt() * 1e9,
        ldm_nm: 2.0 * d_j_per_m2 / mu0_ms2 * 1e9,
        k: gamma0 * ms_a_per_m * time_step_s,
    })
}

/// Rescaled uniaxial anisotropy strength 2K/(mu0 Ms^2).
pub fn rescale_anisotropy(k_j_per_m3: f64, ms_a_per_m: f64) -> f64 {
    2.0 * k_j_per_m3 / (MU0 * ms_a_per_m * ms_a_per_m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub exchange: f64,
    pub dmi: f64,
    pub anisotropy: f64,
    pub zeeman: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.exchange + self.dmi + self.anisotropy + self.zeeman
    }

    /// Exchange + DMI, the part governed by the discrete energy laws.
    pub fn intrinsic(&self) -> f64 {
        self.exchange + self.dmi
    }
}

/// Total energy `lex^2/2 ||grad m||^2 + ldm/2 <D m, m>` plus the configured
/// lower-order contributions at time `t`.
pub fn energy(m: &NodalVectorField, forms: &FormSet, params: &MaterialParams, t: f64) -> f64 {
    energy_breakdown(m, forms, params, t).total()
}

pub fn energy_breakdown(
    m: &NodalVectorField,
    forms: &FormSet,
    params: &MaterialParams,
    t: f64,
) -> EnergyBreakdown {
    let exchange =
        0.5 * params.lex * params.lex * vec_bilinear_scalar(&forms.scalar_stiffness, m, m);
    let dmi = if forms.dmi_blocks.nnz() == 0 {
        0.0
    } else {
        0.5 * params.ldm_signed() * forms.dmi_blocks.bilinear(m.as_slice(), m.as_slice())
    };
    let mut anisotropy = 0.0;
    if let Some(ani) = &params.anisotropy {
        // (q/2) int [1 - (a.m)^2]; (a.m) is P1, so the integral is exact
        let n = m.vertex_count();
        let mut w = NodalVectorField::zeros(n);
        for z in 0..n {
            let v = m.get(z);
            let s = ani.axis[0] * v[0] + ani.axis[1] * v[1] + ani.axis[2] * v[2];
            w.set(z, [s, 0.0, 0.0]);
        }
        let volume = forms.domain_volume();
        let mut aa = 0.0;
        let scalar = &forms.scalar_mass;
        for a in 0..scalar.nrows() {
            for k in scalar.row_ptr()[a]..scalar.row_ptr()[a + 1] {
                let b = scalar.col_idx()[k];
                aa += scalar.values()[k] * w.get(a)[0] * w.get(b)[0];
            }
        }
        anisotropy = 0.5 * ani.q * (volume - aa);
    }
    let mut zeeman = 0.0;
    if let Some(pulse) = &params.zeeman {
        let h = pulse.field_at(t);
        if h != [0.0; 3] {
            // -int h . m with uniform h: componentwise 1^T M m_c
            let scalar = &forms.scalar_mass;
            let mut int_m = [0.0; 3];
            for a in 0..scalar.nrows() {
                for k in scalar.row_ptr()[a]..scalar.row_ptr()[a + 1] {
                    let b = scalar.col_idx()[k];
                    let v = scalar.values()[k];
                    let mb = m.get(b);
                    for d in 0..3 {
                        int_m[d] += v * mb[d];
                    }
                }
            }
            zeeman = -(h[0] * int_m[0] + h[1] * int_m[1] + h[2] * int_m[2]);
        }
    }
    EnergyBreakdown {
        exchange,
        dmi,
        anisotropy,
        zeeman,
    }
}

/// Lagrange multiplier `lambda = -lex^2 |grad m|^2 - ldm (D m) . m`
/// evaluated at the degree-3 quadrature points (cell-major layout), with the
/// piecewise-constant gradient and the piecewise-linear m itself.
pub fn lambda_at_quadrature(
    m: &NodalVectorField,
    mesh: &Mesh,
    params: &MaterialParams,
) -> Vec<f64> {
    let rule = DEGREE3;
    let ldm_s = params.ldm_signed();
    let lex2 = params.lex * params.lex;
    let mut out = Vec::with_capacity(mesh.cell_count() * rule.len());
    for c in 0..mesh.cell_count() {
        let (_, grads) = cell_geometry(mesh, c);
        let cell = mesh.cell(c);
        let mut jac = [[0.0; 3]; 3]; // jac[comp][dir]
        for (i, &z) in cell.iter().enumerate() {
            let mz = m.get(z);
            for comp in 0..3 {
                for dir in 0..3 {
                    jac[comp][dir] += mz[comp] * grads[i][dir];
                }
            }
        }
        let grad_sq: f64 = jac.iter().flatten().map(|g| g * g).sum();
        let dm = match params.dmi_form {
            DmiForm::Bulk => [
                jac[2][1] - jac[1][2],
                jac[0][2] - jac[2][0],
                jac[1][0] - jac[0][1],
            ],
            DmiForm::Interfacial => [-jac[2][0], -jac[2][1], jac[0][0] + jac[1][1]],
            DmiForm::None => [0.0; 3],
        };
        for q in 0..rule.len() {
            let bc = rule.barycentric(q);
            let mut mq = [0.0; 3];
            for (i, &z) in cell.iter().enumerate() {
                let mz = m.get(z);
                for d in 0..3 {
                    mq[d] += bc[i] * mz[d];
                }
            }
            let dm_dot_m = dm[0] * mq[0] + dm[1] * mq[1] + dm[2] * mq[2];
            out.push(-lex2 * grad_sq - ldm_s * dm_dot_m);
        }
    }
    out
}

/// Cut-off `W_M(s)`: `alpha + k min{s, M}/2` for `s >= 0`,
/// `2 alpha^2 / (2 alpha + k min{-s, M})` for `s < 0`. Satisfies
/// `W_M(s) >= 2 alpha^2/(2 alpha + M k)` and `|W_M(s) - alpha| <= M k / 2`.
pub fn cutoff_w(s: f64, m_cap: f64, k: f64, alpha: f64) -> f64 {
    if s >= 0.0 {
        alpha + k * s.min(m_cap) / 2.0
    } else {
        2.0 * alpha * alpha / (2.0 * alpha + k * (-s).min(m_cap))
    }
}

/// Cut-off cap `M(k) = |k log k|^{-1}` (natural logarithm), defined for
/// `0 < k < 1`.
pub fn m_of_k(k: f64) -> Result<f64, PhysicsError> {
    check_k_range(k)?;
    Ok(1.0 / (k * k.ln()).abs())
}

/// Stabilization factor `rho(k) = |k log k|`, the reciprocal of `M(k)`.
pub fn rho_of_k(k: f64) -> Result<f64, PhysicsError> {
    check_k_range(k)?;
    Ok((k * k.ln()).abs())
}

fn check_k_range(k: f64) -> Result<(), PhysicsError> {
    if !(k > 0.0 && k < 1.0) {
        return Err(PhysicsError::InvalidArgument(format!(
            "M(k) and rho(k) require 0 < k < 1, got {k}"
        )));
    }
    Ok(())
}

/// Explicit lower-order field `h(z) = q (a . m(z)) a + h_ext(t)`, to be
/// tested against the mass matrix on the right-hand side of each scheme.
pub fn lower_order_field(
    m: &NodalVectorField,
    t: f64,
    params: &MaterialParams,
) -> NodalVectorField {
    let n = m.vertex_count();
    let mut h = NodalVectorField::zeros(n);
    let hext = params
        .zeeman
        .as_ref()
        .map(|p| p.field_at(t))
        .unwrap_or([0.0; 3]);
    let ani = params.anisotropy.as_ref();
    if ani.is_none() && hext == [0.0; 3] {
        return h;
    }
    for z in 0..n {
        let mut hz = hext;
        if let Some(a) = ani {
            let mz = m.get(z);
            let s = a.q * (a.axis[0] * mz[0] + a.axis[1] * mz[1] + a.axis[2] * mz[2]);
            for d in 0..3 {
                hz[d] += s * a.axis[d];
            }
        }
        h.set(z, hz);
    }
    h
}
