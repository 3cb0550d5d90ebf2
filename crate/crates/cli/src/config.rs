//! Plain-text run configuration.
//!
//! Configs are TOML with four optional tables — `[domain]`, `[covariance]`,
//! `[coefficients]`, `[sim]` — plus `[sweep]` for the mass-grid commands.
//! Unknown keys are hard errors, as are keys that do not belong to the
//! selected `kind` of a table: a typo never silently falls back to a
//! default. Omitted keys take the documented defaults (K = 32, grid 64,
//! T = 1, dt = 1/256). `resolve` produces the fully explicit echo that is
//! embedded in every report; serializing the echo back to TOML and parsing
//! it again reproduces the same resolved config.

use serde::{Deserialize, Serialize};
use skwave_core::noise::build_covariance;
use skwave_core::spectrum::build_domain;
use skwave_core::{
    CoefficientPreset, Coefficients, CovarianceQ, DecayLaw, Equation, ExperimentConfig, SimConfig,
    SpectralDomain,
};

pub const DEFAULT_TRUNCATION: usize = 32;
pub const DEFAULT_GRID_RES: usize = 64;
pub const DEFAULT_T_FINAL: f64 = 1.0;
/// Default step density: dt = 1/256.
pub const DEFAULT_STEPS_PER_UNIT: f64 = 256.0;

fn err(msg: impl Into<String>) -> anyhow::Error {
    anyhow::anyhow!(msg.into())
}

// ---------------------------------------------------------------------------
// File-level (all optional) sections.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<CovarianceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<CoefficientsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side_lengths: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_res: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovKind {
    Flat,
    PowerIndex,
    PowerEigenvalue,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceSection {
    pub kind: CovKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_exponent: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoeffKind {
    Zero,
    Additive,
    SaturatingDiffusion,
    SineDrift,
    SineDriftSaturating,
    LinearDrift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsSection {
    pub kind: CoeffKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equation: Option<Equation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub save_stride: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_moment: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_threshold: Option<f64>,
}

// ---------------------------------------------------------------------------
// Resolved, fully explicit configuration (the report echo).
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedConfig {
    pub domain: DomainSection,
    pub covariance: CovarianceSection,
    pub coefficients: CoefficientsSection,
    pub sim: SimSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

pub fn parse_config(text: &str) -> anyhow::Result<ResolvedConfig> {
    let file: FileConfig = toml::from_str(text).map_err(|e| err(format!("config parse error: {e}")))?;
    resolve(file)
}

/// Rejects keys that the selected `kind` does not use.
fn reject_unused(section: &str, unused: &[(&str, bool)]) -> anyhow::Result<()> {
    for (name, present) in unused {
        if *present {
            return Err(err(format!("`{name}` is not a key of the selected {section} kind")));
        }
    }
    Ok(())
}

pub fn resolve(file: FileConfig) -> anyhow::Result<ResolvedConfig> {
    let d = file.domain.unwrap_or_default();
    let domain = DomainSection {
        side_lengths: Some(d.side_lengths.unwrap_or_else(|| vec![std::f64::consts::PI])),
        truncation: Some(d.truncation.unwrap_or(DEFAULT_TRUNCATION)),
        grid_res: Some(d.grid_res.unwrap_or(DEFAULT_GRID_RES)),
    };

    let c = file.covariance.unwrap_or(CovarianceSection {
        kind: CovKind::Flat,
        level: None,
        scale: None,
        rate: None,
        values: None,
        q_exponent: None,
    });
    let covariance = match c.kind {
        CovKind::Flat => {
            reject_unused(
                "covariance",
                &[("scale", c.scale.is_some()), ("rate", c.rate.is_some()), ("values", c.values.is_some())],
            )?;
            CovarianceSection { level: Some(c.level.unwrap_or(1.0)), ..c }
        }
        CovKind::PowerIndex | CovKind::PowerEigenvalue => {
            reject_unused(
                "covariance",
                &[("level", c.level.is_some()), ("values", c.values.is_some())],
            )?;
            let rate = c.rate.ok_or_else(|| err("power-law covariance needs `rate`"))?;
            CovarianceSection { scale: Some(c.scale.unwrap_or(1.0)), rate: Some(rate), ..c }
        }
        CovKind::Explicit => {
            reject_unused(
                "covariance",
                &[("level", c.level.is_some()), ("scale", c.scale.is_some()), ("rate", c.rate.is_some())],
            )?;
            if c.values.is_none() {
                return Err(err("explicit covariance needs `values`"));
            }
            c
        }
    };

    let co = file.coefficients.unwrap_or(CoefficientsSection {
        kind: CoeffKind::Additive,
        amplitude: None,
        c0: None,
        c1: None,
        rate: None,
    });
    let need = |opt: Option<f64>, name: &str| {
        opt.ok_or_else(|| err(format!("coefficient kind needs `{name}`")))
    };
    let coefficients = match co.kind {
        CoeffKind::Zero | CoeffKind::Additive => {
            reject_unused(
                "coefficients",
                &[
                    ("amplitude", co.amplitude.is_some()),
                    ("c0", co.c0.is_some()),
                    ("c1", co.c1.is_some()),
                    ("rate", co.rate.is_some()),
                ],
            )?;
            co
        }
        CoeffKind::SaturatingDiffusion => {
            reject_unused(
                "coefficients",
                &[("amplitude", co.amplitude.is_some()), ("rate", co.rate.is_some())],
            )?;
            need(co.c0, "c0")?;
            need(co.c1, "c1")?;
            co
        }
        CoeffKind::SineDrift => {
            reject_unused(
                "coefficients",
                &[("c0", co.c0.is_some()), ("c1", co.c1.is_some()), ("rate", co.rate.is_some())],
            )?;
            need(co.amplitude, "amplitude")?;
            co
        }
        CoeffKind::SineDriftSaturating => {
            reject_unused("coefficients", &[("rate", co.rate.is_some())])?;
            need(co.amplitude, "amplitude")?;
            need(co.c0, "c0")?;
            need(co.c1, "c1")?;
            co
        }
        CoeffKind::LinearDrift => {
            reject_unused(
                "coefficients",
                &[
                    ("amplitude", co.amplitude.is_some()),
                    ("c0", co.c0.is_some()),
                    ("c1", co.c1.is_some()),
                ],
            )?;
            need(co.rate, "rate")?;
            co
        }
    };

    let truncation = domain.truncation.unwrap();
    let s = file.sim.unwrap_or_default();
    let t_final = s.t_final.unwrap_or(DEFAULT_T_FINAL);
    let n_steps = s
        .n_steps
        .unwrap_or_else(|| ((t_final * DEFAULT_STEPS_PER_UNIT).round() as usize).max(1));
    let pad = |xs: Option<Vec<f64>>, name: &str| -> anyhow::Result<Vec<f64>> {
        let mut xs = xs.unwrap_or_default();
        if xs.len() > truncation {
            return Err(err(format!(
                "{name} has {} entries but only {truncation} modes are retained",
                xs.len()
            )));
        }
        xs.resize(truncation, 0.0);
        Ok(xs)
    };
    let sim = SimSection {
        equation: Some(s.equation.unwrap_or(Equation::Wave)),
        mu: Some(s.mu.unwrap_or(0.1)),
        t_final: Some(t_final),
        n_steps: Some(n_steps),
        seed: Some(s.seed.unwrap_or(0)),
        u0: Some(pad(s.u0, "u0")?),
        v0: Some(pad(s.v0, "v0")?),
        save_stride: Some(s.save_stride.unwrap_or(1)),
    };

    let sweep = file.sweep.map(|w| SweepSection {
        mu_grid: w.mu_grid,
        n_paths: Some(w.n_paths.unwrap_or(64)),
        p_moment: Some(w.p_moment.unwrap_or(2.0)),
        ratio_threshold: Some(w.ratio_threshold.unwrap_or(0.1)),
    });

    Ok(ResolvedConfig { domain, covariance, coefficients, sim, sweep })
}

impl ResolvedConfig {
    pub fn build_domain(&self) -> anyhow::Result<SpectralDomain> {
        let d = &self.domain;
        Ok(build_domain(
            d.side_lengths.as_ref().unwrap(),
            d.truncation.unwrap(),
            d.grid_res.unwrap(),
        )?)
    }

    pub fn build_covariance(&self, domain: &SpectralDomain) -> anyhow::Result<CovarianceQ> {
        let c = &self.covariance;
        let law = match c.kind {
            CovKind::Flat => DecayLaw::Flat { level: c.level.unwrap() },
            CovKind::PowerIndex => {
                DecayLaw::PowerIndex { scale: c.scale.unwrap(), rate: c.rate.unwrap() }
            }
            CovKind::PowerEigenvalue => {
                DecayLaw::PowerEigenvalue { scale: c.scale.unwrap(), rate: c.rate.unwrap() }
            }
            CovKind::Explicit => DecayLaw::Explicit { values: c.values.clone().unwrap() },
        };
        Ok(build_covariance(domain, law, c.q_exponent)?)
    }

    pub fn build_coefficients(&self) -> Coefficients {
        let c = &self.coefficients;
        let preset = match c.kind {
            CoeffKind::Zero => CoefficientPreset::Zero,
            CoeffKind::Additive => CoefficientPreset::Additive,
            CoeffKind::SaturatingDiffusion => CoefficientPreset::SaturatingDiffusion {
                c0: c.c0.unwrap(),
                c1: c.c1.unwrap(),
            },
            CoeffKind::SineDrift => CoefficientPreset::SineDrift { amplitude: c.amplitude.unwrap() },
            CoeffKind::SineDriftSaturating => CoefficientPreset::SineDriftSaturating {
                amplitude: c.amplitude.unwrap(),
                c0: c.c0.unwrap(),
                c1: c.c1.unwrap(),
            },
            CoeffKind::LinearDrift => CoefficientPreset::LinearDrift { rate: c.rate.unwrap() },
        };
        preset.build()
    }

    pub fn build_sim(&self, seed_override: Option<u64>) -> SimConfig {
        let s = &self.sim;
        SimConfig {
            equation: s.equation.unwrap(),
            mu: s.mu.unwrap(),
            t_final: s.t_final.unwrap(),
            n_steps: s.n_steps.unwrap(),
            seed: seed_override.unwrap_or_else(|| s.seed.unwrap()),
            u0: s.u0.clone().unwrap(),
            v0: s.v0.clone().unwrap(),
            save_stride: s.save_stride.unwrap(),
        }
    }

    /// Sweep settings lowered onto the simulation base; `paths_override`
    /// comes from the command line.
    pub fn build_experiment(
        &self,
        seed_override: Option<u64>,
        paths_override: Option<usize>,
    ) -> anyhow::Result<ExperimentConfig> {
        let w = self
            .sweep
            .as_ref()
            .ok_or_else(|| err("this command needs a `[sweep]` table with a `mu_grid`"))?;
        let mu_grid = w
            .mu_grid
            .clone()
            .ok_or_else(|| err("the `[sweep]` table needs a `mu_grid`"))?;
        Ok(ExperimentConfig {
            mu_grid,
            n_paths: paths_override.unwrap_or_else(|| w.n_paths.unwrap()),
            p_moment: w.p_moment.unwrap(),
            ratio_threshold: w.ratio_threshold.unwrap(),
            base: self.build_sim(seed_override),
        })
    }

}
