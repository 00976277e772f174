//! Flat `key = value` configuration files, experiment presets, and the
//! construction of meshes and initial states from a parsed [`SimConfig`].
//!
//! Unknown keys are errors (typo safety). Lengths are given in the same
//! unit as the mesh coordinates; alternatively the material can be given in
//! SI units (`A`, `D`, `Ms`, `K`, `dt_s`, `T_s`) and is nondimensionalized
//! at load, with the derived values reported.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::assembly::NodalVectorField;
use crate::integrators::{SchemeChoice, SchemeKind};
use crate::mesh::{generate_type1, generate_type2, load_mesh, Mesh, MeshError};
use crate::output::{load_field, OutputError};
use crate::physics::{
    rescale, rescale_anisotropy, Chirality, DmiForm, MaterialParams, PulseSchedule, GAMMA0,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}:{line}: unknown key '{key}'")]
    UnknownKey {
        origin: String,
        line: usize,
        key: String,
    },
    #[error("{origin}:{line}: duplicate key '{key}'")]
    DuplicateKey {
        origin: String,
        line: usize,
        key: String,
    },
    #[error("{origin}:{line}: expected 'key = value', got '{text}'")]
    Syntax {
        origin: String,
        line: usize,
        text: String,
    },
    #[error("{origin}:{line}: invalid value for '{key}': {msg}")]
    InvalidValue {
        origin: String,
        line: usize,
        key: String,
        msg: String,
    },
    #[error("missing key {0}")]
    MissingKey(String),
    #[error("conflicting keys: {0}")]
    Conflict(String),
    #[error("{0}")]
    Semantic(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Field(#[from] OutputError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Type1 { nx: [usize; 3], lengths: [f64; 3] },
    Type2 { nx: [usize; 3], lengths: [f64; 3] },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Uniform([f64; 3]),
    /// `(0,0,-1)` inside the x1x2-disk of this radius around the bounding
    /// box center, `(0,0,1)` outside.
    SkyrmionLike {
        r_inner: f64,
    },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scheme: SchemeChoice,
    pub k: f64,
    pub t_final: f64,
    pub material: MaterialParams,
    pub mesh_source: MeshSource,
    pub initial: InitialCondition,
    pub output_every: usize,
    pub solver_tol: f64,
    pub output_dir: Option<PathBuf>,
}

const KNOWN_KEYS: &[&str] = &[
    "scheme",
    "theta",
    "stabilization",
    "k",
    "T",
    "lex",
    "ldm",
    "alpha",
    "dmi",
    "chirality",
    "anisotropy_q",
    "anisotropy_axis",
    "pulse_hmax",
    "pulse_ramp_up",
    "pulse_hold",
    "pulse_ramp_down",
    "pulse_direction",
    "mesh",
    "initial",
    "output_every",
    "solver_tol",
    "output_dir",
    "A",
    "D",
    "Ms",
    "K",
    "gamma0",
    "dt_s",
    "T_s",
];

pub fn parse_config<P: AsRef<Path>>(path: P) -> Result<SimConfig, ConfigError> {
    parse_config_verbose(path).map(|(cfg, _)| cfg)
}

/// Like [`parse_config`] but also returns the notes produced while deriving
/// nondimensional quantities from SI inputs.
pub fn parse_config_verbose<P: AsRef<Path>>(
    path: P,
) -> Result<(SimConfig, Vec<String>), ConfigError> {
    let origin = path.as_ref().display().to_string();
    let text = std::fs::read_to_string(path.as_ref()).map_err(|source| ConfigError::Io {
        path: origin.clone(),
        source,
    })?;
    parse_config_text(&text, &origin)
}

struct RawEntry {
    line: usize,
    value: String,
    used: bool,
}

struct RawConfig {
    origin: String,
    entries: BTreeMap<String, RawEntry>,
}

impl RawConfig {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    fn invalid(&self, key: &str, line: usize, msg: String) -> ConfigError {
        ConfigError::InvalidValue {
            origin: self.origin.clone(),
            line,
            key: key.to_string(),
            msg,
        }
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| self.invalid(key, line, e.to_string())),
        }
    }

    fn parse_vec3(&mut self, key: &str) -> Result<Option<[f64; 3]>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => {
                let parts: Vec<&str> = v.split(',').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(self.invalid(key, line, "expected 'x,y,z'".to_string()));
                }
                let mut out = [0.0; 3];
                for (o, p) in out.iter_mut().zip(&parts) {
                    *o = p
                        .parse()
                        .map_err(|e| self.invalid(key, line, format!("{e}")))?;
                }
                Ok(Some(out))
            }
        }
    }
}

pub fn parse_config_str(text: &str, origin: &str) -> Result<SimConfig, ConfigError> {
    parse_config_text(text, origin).map(|(cfg, _)| cfg)
}

pub fn parse_config_text(
    text: &str,
    origin: &str,
) -> Result<(SimConfig, Vec<String>), ConfigError> {
    let mut entries: BTreeMap<String, RawEntry> = BTreeMap::new();
    for (n, raw_line) in text.lines().enumerate() {
        let line = n + 1;
        let stripped = match raw_line.find('#') {
            Some(i) => &raw_line[..i],
            None => raw_line,
        };
        let stripped = stripped.trim();
        if stripped.is_empty() {
            continue;
        }
        let Some((key, value)) = stripped.split_once('=') else {
            return Err(ConfigError::Syntax {
                origin: origin.to_string(),
                line,
                text: stripped.to_string(),
            });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey {
                origin: origin.to_string(),
                line,
                key,
            });
        }
        if entries.contains_key(&key) {
            return Err(ConfigError::DuplicateKey {
                origin: origin.to_string(),
                line,
                key,
            });
        }
        entries.insert(
            key,
            RawEntry {
                line,
                value,
                used: false,
            },
        );
    }
    let mut raw = RawConfig {
        origin: origin.to_string(),
        entries,
    };
    let mut notes = Vec::new();

    // physical-unit mode: derive nondimensional quantities where SI keys
    // are given; conflicts with direct keys are errors
    let si_a: Option<f64> = raw.parse("A")?;
    let si_d: Option<f64> = raw.parse("D")?;
    let si_ms: Option<f64> = raw.parse("Ms")?;
    let si_k_ani: Option<f64> = raw.parse("K")?;
    let gamma0: f64 = raw.parse("gamma0")?.unwrap_or(GAMMA0);
    let dt_s: Option<f64> = raw.parse("dt_s")?;
    let t_s: Option<f64> = raw.parse("T_s")?;
    let physical =
        si_a.is_some() || si_d.is_some() || si_k_ani.is_some() || dt_s.is_some() || t_s.is_some();
    if physical && si_ms.is_none() {
        return Err(ConfigError::MissingKey(
            "Ms (required whenever SI keys are used)".to_string(),
        ));
    }
    for (si, direct) in [
        (si_a.map(|_| "A"), "lex"),
        (si_d.map(|_| "D"), "ldm"),
        (dt_s.map(|_| "dt_s"), "k"),
        (t_s.map(|_| "T_s"), "T"),
        (si_k_ani.map(|_| "K"), "anisotropy_q"),
    ] {
        if let Some(si_key) = si {
            if raw.entries.contains_key(direct) {
                return Err(ConfigError::Conflict(format!(
                    "'{si_key}' and '{direct}' specify the same quantity"
                )));
            }
        }
    }

    let mut lex: Option<f64> = raw.parse("lex")?;
    let mut ldm: Option<f64> = raw.parse("ldm")?;
    let mut k: Option<f64> = raw.parse("k")?;
    let mut t_final: Option<f64> = raw.parse("T")?;
    let mut anisotropy_q: Option<f64> = raw.parse("anisotropy_q")?;
    if let (Some(a), Some(ms)) = (si_a, si_ms) {
        let r = rescale(a, si_d.unwrap_or(0.0), ms, gamma0, dt_s.unwrap_or(1e-12))
            .map_err(|e| ConfigError::Semantic(e.to_string()))?;
        lex = Some(r.lex_nm);
        notes.push(format!("derived lex = {} (from A, Ms)", r.lex_nm));
        if si_d.is_some() {
            ldm = Some(r.ldm_nm);
            notes.push(format!("derived ldm = {} (from D, Ms)", r.ldm_nm));
        }
        if dt_s.is_some() {
            k = Some(r.k);
            notes.push(format!("derived k = {} (from gamma0 Ms dt_s)", r.k));
        }
    } else if physical && (si_d.is_some() || dt_s.is_some() || t_s.is_some()) && si_a.is_none() {
        // D / time rescaling without A still needs Ms only
        let ms = si_ms.unwrap();
        if let Some(d) = si_d {
            let v = 2.0 * d / (crate::physics::MU0 * ms * ms) * 1e9;
            ldm = Some(v);
            notes.push(format!("derived ldm = {v} (from D, Ms)"));
        }
        if let Some(dt) = dt_s {
            let v = gamma0 * ms * dt;
            k = Some(v);
            notes.push(format!("derived k = {v} (from gamma0 Ms dt_s)"));
        }
    }
    if let (Some(ts), Some(ms)) = (t_s, si_ms) {
        let v = gamma0 * ms * ts;
        t_final = Some(v);
        notes.push(format!("derived T = {v} (from gamma0 Ms T_s)"));
    }
    if let (Some(kq), Some(ms)) = (si_k_ani, si_ms) {
        let v = rescale_anisotropy(kq, ms);
        anisotropy_q = Some(v);
        notes.push(format!("derived anisotropy_q = {v} (from K, Ms)"));
    }

    let scheme_name = raw
        .take("scheme")
        .ok_or_else(|| ConfigError::MissingKey("scheme".to_string()))?;
    let theta: Option<f64> = raw.parse("theta")?;
    let stabilization: Option<String> = raw.parse("stabilization")?;
    let scheme = match scheme_name.1.as_str() {
        "tps1" | "pftps1" => {
            let th = theta.ok_or_else(|| ConfigError::MissingKey("theta".to_string()))?;
            if stabilization.is_some() {
                return Err(ConfigError::Semantic(
                    "'stabilization' applies to scheme tps2 only".to_string(),
                ));
            }
            let make = if scheme_name.1 == "tps1" {
                SchemeChoice::tps1
            } else {
                SchemeChoice::pf_tps1
            };
            make(th).map_err(|e| ConfigError::Semantic(e.to_string()))?
        }
        "tps2" => {
            if theta.is_some() {
                return Err(ConfigError::Semantic(
                    "'theta' applies to schemes tps1 and pftps1 only".to_string(),
                ));
            }
            let stab = match stabilization.as_deref() {
                None | Some("on") => true,
                Some("off") => false,
                Some(other) => {
                    return Err(ConfigError::Semantic(format!(
                        "stabilization must be 'on' or 'off', got '{other}'"
                    )))
                }
            };
            SchemeChoice::tps2(stab)
        }
        other => {
            return Err(raw.invalid(
                "scheme",
                scheme_name.0,
                format!("expected tps1, pftps1, or tps2, got '{other}'"),
            ))
        }
    };

    let k = k.ok_or_else(|| ConfigError::MissingKey("k".to_string()))?;
    let t_final = t_final.ok_or_else(|| ConfigError::MissingKey("T".to_string()))?;
    let lex = lex.ok_or_else(|| ConfigError::MissingKey("lex".to_string()))?;
    let ldm = ldm.unwrap_or(0.0);
    let alpha = raw
        .parse::<f64>("alpha")?
        .ok_or_else(|| ConfigError::MissingKey("alpha".to_string()))?;
    if !(k > 0.0) {
        return Err(ConfigError::Semantic(format!(
            "k must be positive, got {k}"
        )));
    }
    if t_final < 0.0 {
        return Err(ConfigError::Semantic(format!(
            "T must be nonnegative, got {t_final}"
        )));
    }

    let dmi_form = match raw.take("dmi") {
        None => {
            if ldm > 0.0 {
                return Err(ConfigError::MissingKey(
                    "dmi (required when ldm > 0)".to_string(),
                ));
            }
            DmiForm::None
        }
        Some((line, v)) => match v.as_str() {
            "bulk" => DmiForm::Bulk,
            "interfacial" => DmiForm::Interfacial,
            "none" => DmiForm::None,
            other => {
                return Err(raw.invalid(
                    "dmi",
                    line,
                    format!("expected bulk, interfacial, or none, got '{other}'"),
                ))
            }
        },
    };
    let chirality = match raw.take("chirality") {
        None => Chirality::Positive,
        Some((line, v)) => match v.as_str() {
            "positive" => Chirality::Positive,
            "negative" => Chirality::Negative,
            other => {
                return Err(raw.invalid(
                    "chirality",
                    line,
                    format!("expected positive or negative, got '{other}'"),
                ))
            }
        },
    };

    let mut material = MaterialParams::new(lex, ldm, alpha, dmi_form)
        .map_err(|e| ConfigError::Semantic(e.to_string()))?
        .with_chirality(chirality);
    let axis = raw.parse_vec3("anisotropy_axis")?;
    match (anisotropy_q, axis) {
        (Some(q), Some(a)) => {
            material = material
                .with_anisotropy(q, a)
                .map_err(|e| ConfigError::Semantic(e.to_string()))?;
        }
        (Some(_), None) => {
            return Err(ConfigError::MissingKey(
                "anisotropy_axis (required with anisotropy_q)".to_string(),
            ))
        }
        (None, Some(_)) => {
            return Err(ConfigError::MissingKey(
                "anisotropy_q (required with anisotropy_axis)".to_string(),
            ))
        }
        (None, None) => {}
    }
    let pulse_hmax: Option<f64> = raw.parse("pulse_hmax")?;
    let pulse_up: Option<f64> = raw.parse("pulse_ramp_up")?;
    let pulse_hold: Option<f64> = raw.parse("pulse_hold")?;
    let pulse_down: Option<f64> = raw.parse("pulse_ramp_down")?;
    let pulse_dir = raw.parse_vec3("pulse_direction")?;
    let any_pulse = pulse_hmax.is_some()
        || pulse_up.is_some()
        || pulse_hold.is_some()
        || pulse_down.is_some()
        || pulse_dir.is_some();
    if any_pulse {
        let (Some(h_max), Some(up), Some(hold), Some(down), Some(direction)) =
            (pulse_hmax, pulse_up, pulse_hold, pulse_down, pulse_dir)
        else {
            return Err(ConfigError::MissingKey(
                "pulse_hmax, pulse_ramp_up, pulse_hold, pulse_ramp_down, pulse_direction \
                 (all required together)"
                    .to_string(),
            ));
        };
        if up < 0.0 || hold < 0.0 || down < 0.0 {
            return Err(ConfigError::Semantic(
                "pulse durations must be nonnegative".to_string(),
            ));
        }
        material = material.with_zeeman(PulseSchedule {
            h_max,
            t_ramp_up: up,
            t_hold: hold,
            t_ramp_down: down,
            direction,
        });
    }

    let mesh_source = {
        let (line, v) = raw
            .take("mesh")
            .ok_or_else(|| ConfigError::MissingKey("mesh".to_string()))?;
        parse_mesh_source(&v).map_err(|msg| raw.invalid("mesh", line, msg))?
    };
    let initial = {
        let (line, v) = raw
            .take("initial")
            .ok_or_else(|| ConfigError::MissingKey("initial".to_string()))?;
        parse_initial(&v).map_err(|msg| raw.invalid("initial", line, msg))?
    };

    let output_every = raw.parse::<usize>("output_every")?.unwrap_or(1);
    if output_every == 0 {
        return Err(ConfigError::Semantic(
            "output_every must be at least 1".to_string(),
        ));
    }
    let solver_tol = raw.parse::<f64>("solver_tol")?.unwrap_or(1e-10);
    if !(solver_tol > 0.0) {
        return Err(ConfigError::Semantic(format!(
            "solver_tol must be positive, got {solver_tol}"
        )));
    }
    let output_dir = raw.take("output_dir").map(|(_, v)| PathBuf::from(v));

    Ok((
        SimConfig {
            scheme,
            k,
            t_final,
            material,
            mesh_source,
            initial,
            output_every,
            solver_tol,
            output_dir,
        },
        notes,
    ))
}

fn parse_mesh_source(v: &str) -> Result<MeshSource, String> {
    let mut it = v.split_whitespace();
    match it.next() {
        Some("type1") | Some("type2") => {
            let kind = v.split_whitespace().next().unwrap().to_string();
            let nums: Vec<&str> = it.collect();
            if nums.len() != 6 {
                return Err("expected 'type1|type2 NX NY NZ LX LY LZ'".to_string());
            }
            let mut nx = [0usize; 3];
            for (o, s) in nx.iter_mut().zip(&nums[..3]) {
                *o = s.parse().map_err(|e| format!("{e}"))?;
            }
            let mut lengths = [0.0f64; 3];
            for (o, s) in lengths.iter_mut().zip(&nums[3..]) {
                *o = s.parse().map_err(|e| format!("{e}"))?;
            }
            Ok(if kind == "type1" {
                MeshSource::Type1 { nx, lengths }
            } else {
                MeshSource::Type2 { nx, lengths }
            })
        }
        Some("file") => {
            let rest = v["file".len()..].trim();
            if rest.is_empty() {
                return Err("expected 'file PATH'".to_string());
            }
            Ok(MeshSource::File(PathBuf::from(rest)))
        }
        _ => Err("expected 'type1 ...', 'type2 ...', or 'file PATH'".to_string()),
    }
}

fn parse_initial(v: &str) -> Result<InitialCondition, String> {
    let mut it = v.split_whitespace();
    match it.next() {
        Some("uniform") => {
            let rest: Vec<&str> = it.collect();
            if rest.len() != 1 {
                return Err("expected 'uniform MX,MY,MZ'".to_string());
            }
            let parts: Vec<&str> = rest[0].split(',').collect();
            if parts.len() != 3 {
                return Err("expected 'uniform MX,MY,MZ'".to_string());
            }
            let mut m = [0.0; 3];
            for (o, s) in m.iter_mut().zip(&parts) {
                *o = s.trim().parse().map_err(|e| format!("{e}"))?;
            }
            Ok(InitialCondition::Uniform(m))
        }
        Some("skyrmion") => {
            let rest: Vec<&str> = it.collect();
            if rest.len() != 1 {
                return Err("expected 'skyrmion R_INNER'".to_string());
            }
            let r: f64 = rest[0].parse().map_err(|e| format!("{e}"))?;
            if !(r > 0.0) {
                return Err("skyrmion radius must be positive".to_string());
            }
            Ok(InitialCondition::SkyrmionLike { r_inner: r })
        }
        Some("file") => {
            let rest = v["file".len()..].trim();
            if rest.is_empty() {
                return Err("expected 'file PATH'".to_string());
            }
            Ok(InitialCondition::File(PathBuf::from(rest)))
        }
        _ => Err("expected 'uniform ...', 'skyrmion R', or 'file PATH'".to_string()),
    }
}

fn g17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Canonical emission; `parse(emit(cfg)) == cfg` for any valid config.
pub fn emit_config(cfg: &SimConfig) -> String {
    let mut s = String::new();
    let scheme = match cfg.scheme.kind {
        SchemeKind::Tps1 => "tps1",
        SchemeKind::PfTps1 => "pftps1",
        SchemeKind::Tps2 => "tps2",
    };
    s.push_str(&format!("scheme = {scheme}\n"));
    match cfg.scheme.kind {
        SchemeKind::Tps1 | SchemeKind::PfTps1 => {
            s.push_str(&format!("theta = {}\n", g17(cfg.scheme.theta)));
        }
        SchemeKind::Tps2 => {
            s.push_str(&format!(
                "stabilization = {}\n",
                if cfg.scheme.stabilization_on {
                    "on"
                } else {
                    "off"
                }
            ));
        }
    }
    s.push_str(&format!("k = {}\n", g17(cfg.k)));
    s.push_str(&format!("T = {}\n", g17(cfg.t_final)));
    let m = &cfg.material;
    s.push_str(&format!("lex = {}\n", g17(m.lex)));
    s.push_str(&format!("ldm = {}\n", g17(m.ldm)));
    s.push_str(&format!("alpha = {}\n", g17(m.alpha)));
    let dmi = match m.dmi_form {
        DmiForm::Bulk => "bulk",
        DmiForm::Interfacial => "interfacial",
        DmiForm::None => "none",
    };
    s.push_str(&format!("dmi = {dmi}\n"));
    if m.chirality == Chirality::Negative {
        s.push_str("chirality = negative\n");
    }
    if let Some(a) = &m.anisotropy {
        s.push_str(&format!("anisotropy_q = {}\n", g17(a.q)));
        s.push_str(&format!(
            "anisotropy_axis = {},{},{}\n",
            g17(a.axis[0]),
            g17(a.axis[1]),
            g17(a.axis[2])
        ));
    }
    if let Some(p) = &m.zeeman {
        s.push_str(&format!("pulse_hmax = {}\n", g17(p.h_max)));
        s.push_str(&format!("pulse_ramp_up = {}\n", g17(p.t_ramp_up)));
        s.push_str(&format!("pulse_hold = {}\n", g17(p.t_hold)));
        s.push_str(&format!("pulse_ramp_down = {}\n", g17(p.t_ramp_down)));
        s.push_str(&format!(
            "pulse_direction = {},{},{}\n",
            g17(p.direction[0]),
            g17(p.direction[1]),
            g17(p.direction[2])
        ));
    }
    match &cfg.mesh_source {
        MeshSource::Type1 { nx, lengths } => {
            s.push_str(&format!(
                "mesh = type1 {} {} {} {} {} {}\n",
                nx[0],
                nx[1],
                nx[2],
                g17(lengths[0]),
                g17(lengths[1]),
                g17(lengths[2])
            ));
        }
        MeshSource::Type2 { nx, lengths } => {
            s.push_str(&format!(
                "mesh = type2 {} {} {} {} {} {}\n",
                nx[0],
                nx[1],
                nx[2],
                g17(lengths[0]),
                g17(lengths[1]),
                g17(lengths[2])
            ));
        }
        MeshSource::File(p) => {
            s.push_str(&format!("mesh = file {}\n", p.display()));
        }
    }
    match &cfg.initial {
        InitialCondition::Uniform(v) => {
            s.push_str(&format!(
                "initial = uniform {},{},{}\n",
                g17(v[0]),
                g17(v[1]),
                g17(v[2])
            ));
        }
        InitialCondition::SkyrmionLike { r_inner } => {
            s.push_str(&format!("initial = skyrmion {}\n", g17(*r_inner)));
        }
        InitialCondition::File(p) => {
            s.push_str(&format!("initial = file {}\n", p.display()));
        }
    }
    s.push_str(&format!("output_every = {}\n", cfg.output_every));
    s.push_str(&format!("solver_tol = {}\n", g17(cfg.solver_tol)));
    if let Some(dir) = &cfg.output_dir {
        s.push_str(&format!("output_dir = {}\n", dir.display()));
    }
    s
}

/// Builds the mesh named by the config.
pub fn build_mesh(source: &MeshSource) -> Result<Mesh, MeshError> {
    match source {
        MeshSource::Type1 { nx, lengths } => generate_type1(*nx, *lengths),
        MeshSource::Type2 { nx, lengths } => generate_type2(*nx, *lengths),
        MeshSource::File(path) => load_mesh(path),
    }
}

/// Builds the configured initial state on the given mesh (not yet projected;
/// the driver projects for the schemes that require admissible states).
pub fn build_initial(cfg: &SimConfig, mesh: &Mesh) -> Result<NodalVectorField, ConfigError> {
    match &cfg.initial {
        InitialCondition::Uniform(v) => Ok(NodalVectorField::constant(mesh.vertex_count(), *v)),
        InitialCondition::SkyrmionLike { r_inner } => {
            let (lo, hi) = mesh.bounding_box();
            let cx = 0.5 * (lo[0] + hi[0]);
            let cy = 0.5 * (lo[1] + hi[1]);
            let r = *r_inner;
            Ok(crate::assembly::interpolate_nodal(
                move |x| {
                    let rr = ((x[0] - cx).powi(2) + (x[1] - cy).powi(2)).sqrt();
                    if rr <= r {
                        [0.0, 0.0, -1.0]
                    } else {
                        [0.0, 0.0, 1.0]
                    }
                },
                mesh,
            ))
        }
        InitialCondition::File(path) => {
            let field = load_field(path)?;
            if field.vertex_count() != mesh.vertex_count() {
                return Err(ConfigError::Semantic(format!(
                    "initial field has {} vertices, mesh has {}",
                    field.vertex_count(),
                    mesh.vertex_count()
                )));
            }
            Ok(field)
        }
    }
}
