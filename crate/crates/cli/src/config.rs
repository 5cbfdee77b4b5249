//! Run configuration: an optional JSON file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spherical_core::params::map_quantum_to_classical;
use spherical_core::saddle::{Engine, CONTINUUM_PLACEHOLDER_M};
use spherical_core::{ClassicalParams, QuantumParams};

use crate::error::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(rename = "K")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(rename = "Kperp")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kperp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(rename = "M")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumBlock {
    #[serde(rename = "A")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(rename = "B")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(rename = "J0")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(rename = "M")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

/// On-disk run configuration. Exactly one of `classical` / `quantum` may be
/// given; `d` and `alpha` sit at top level for the quantum block.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub classical: Option<ClassicalBlock>,
    pub quantum: Option<QuantumBlock>,
    pub d: Option<f64>,
    pub alpha: Option<f64>,
    pub engine: Option<Engine>,
    pub tol: Option<f64>,
    pub u_grid: Option<Vec<f64>>,
    pub g_grid: Option<Vec<f64>>,
    pub h_grid: Option<Vec<f64>>,
    pub rho_range: Option<(i64, i64)>,
    pub r_range: Option<(i64, i64)>,
    pub alpha_sweep: Option<(f64, f64, usize)>,
    #[serde(rename = "L")]
    pub l: Option<usize>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }
}

/// Parameters after merging file and flags.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "block", rename_all = "lowercase")]
pub enum ParamSource {
    Classical(ClassicalBlock),
    Quantum {
        #[serde(flatten)]
        q: QuantumBlock,
        #[serde(skip_serializing_if = "Option::is_none")]
        d: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
    },
}

impl ParamSource {
    pub fn merge(file: &RunConfig, flags_c: ClassicalBlock, flags_q: QuantumBlock) -> Result<Self, CliError> {
        if file.classical.is_some() && file.quantum.is_some() {
            return Err(CliError::Validation("config holds both classical and quantum blocks".into()));
        }
        let flag_quantum = flags_q.a.is_some()
            || flags_q.b.is_some()
            || flags_q.j0.is_some()
            || flags_q.h0.is_some()
            || flags_q.beta.is_some();
        let flag_classical = flags_c.k.is_some() || flags_c.kperp.is_some() || flags_c.h.is_some();
        if flag_quantum && flag_classical {
            return Err(CliError::Validation(
                "quantum (--A --B --J0 --h0 --beta) and classical (--K --Kperp --h) parameters are mutually exclusive".into(),
            ));
        }
        let quantum = flag_quantum || (file.quantum.is_some() && !flag_classical);
        if quantum && file.classical.is_some() {
            return Err(CliError::Validation("quantum flags given with a classical config block".into()));
        }
        if flag_classical && file.quantum.is_some() {
            return Err(CliError::Validation("classical flags given with a quantum config block".into()));
        }
        if quantum {
            let base = file.quantum.clone().unwrap_or_default();
            let q = QuantumBlock {
                a: flags_q.a.or(base.a),
                b: flags_q.b.or(base.b),
                j0: flags_q.j0.or(base.j0),
                h0: flags_q.h0.or(base.h0),
                beta: flags_q.beta.or(base.beta),
                m: flags_c.m.or(flags_q.m).or(base.m),
            };
            Ok(ParamSource::Quantum {
                q,
                d: flags_c.d.or(file.d),
                alpha: flags_c.alpha.or(file.alpha),
            })
        } else {
            let base = file.classical.clone().unwrap_or_default();
            Ok(ParamSource::Classical(ClassicalBlock {
                d: flags_c.d.or(base.d).or(file.d),
                k: flags_c.k.or(base.k),
                kperp: flags_c.kperp.or(base.kperp),
                alpha: flags_c.alpha.or(base.alpha).or(file.alpha),
                h: flags_c.h.or(base.h),
                m: flags_c.m.or(base.m),
            }))
        }
    }

    pub fn d(&self) -> Option<f64> {
        match self {
            ParamSource::Classical(c) => c.d,
            ParamSource::Quantum { d, .. } => *d,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            ParamSource::Classical(c) => c.alpha,
            ParamSource::Quantum { alpha, .. } => *alpha,
        }
    }

    pub fn kperp(&self) -> Option<f64> {
        match self {
            ParamSource::Classical(c) => c.kperp,
            ParamSource::Quantum { .. } => self.resolve(Engine::FiniteM).ok().map(|p| p.kperp),
        }
    }

    /// Full classical record. d defaults to 1, h and alpha to 0; the
    /// continuum engine tolerates a missing M.
    pub fn resolve(&self, engine: Engine) -> Result<ClassicalParams, CliError> {
        let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| CliError::Validation(format!("missing --{flag}")));
        let m = |m: Option<usize>| match (m, engine) {
            (Some(m), _) => Ok(m),
            (None, Engine::Continuum) => Ok(CONTINUUM_PLACEHOLDER_M),
            (None, _) => Err(CliError::Validation("missing --M".into())),
        };
        let p = match self {
            ParamSource::Classical(c) => ClassicalParams::new(
                c.d.unwrap_or(1.0),
                need(c.k, "K")?,
                need(c.kperp, "Kperp")?,
                c.alpha.unwrap_or(0.0),
                c.h.unwrap_or(0.0),
                m(c.m)?,
            )?,
            ParamSource::Quantum { q, d, alpha } => {
                let q = QuantumParams {
                    a: need(q.a, "A")?,
                    b: need(q.b, "B")?,
                    j0: need(q.j0, "J0")?,
                    h0: q.h0.unwrap_or(0.0),
                    beta: need(q.beta, "beta")?,
                    m: q.m.ok_or_else(|| CliError::Validation("missing --M".into()))?,
                };
                map_quantum_to_classical(&q, d.unwrap_or(1.0), alpha.unwrap_or(0.0))?
            }
        };
        Ok(p)
    }
}

/// "a:b:n" into (a, b, n).
pub fn parse_sweep(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected a:b:n, got {s:?}"));
    }
    let a = parts[0].parse::<f64>().map_err(|e| format!("{s:?}: {e}"))?;
    let b = parts[1].parse::<f64>().map_err(|e| format!("{s:?}: {e}"))?;
    let n = parts[2].parse::<usize>().map_err(|e| format!("{s:?}: {e}"))?;
    if n == 0 {
        return Err("sweep needs at least one point".into());
    }
    Ok((a, b, n))
}

/// "a:b" into an inclusive integer range.
pub fn parse_range(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected a:b, got {s:?}"))?;
    let a = a.parse::<i64>().map_err(|e| format!("{s:?}: {e}"))?;
    let b = b.parse::<i64>().map_err(|e| format!("{s:?}: {e}"))?;
    if b < a {
        return Err(format!("empty range {s:?}"));
    }
    Ok((a, b))
}

pub fn linear_sweep((a, b, n): (f64, f64, usize)) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}
