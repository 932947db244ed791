//! Experiment, checks and bounds-grid files (TOML, unknown keys rejected).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adversary::AdversaryConfig;
use crate::bounds::{BoundsOptions, DelayConvention};
use crate::error::{config_err, Error, Result};
use crate::execution::ExecutionConfig;
use crate::metrics::GrowthConvention;
use crate::model::{ModelKind, ModelParams};
use crate::oracle::TableRetention;

/// `[params]` of an experiment: model parameters with the reference
/// constants as defaults. Exactly one of `p` and `target_ex` is given;
/// `target_ex` tunes `p` so that `p·q·E[n_alert]` (or `E[n*_alert]` when
/// messages are lost) equals it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub n: u32,
    pub t: u32,
    pub s: f64,
    #[serde(default = "one")]
    pub q: u32,
    #[serde(default)]
    pub delta_net: u32,
    #[serde(default = "yes")]
    pub b_flag: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_ex: Option<f64>,
    #[serde(default = "kappa")]
    pub kappa: u32,
    #[serde(default = "eta_kappa")]
    pub eta_kappa: u64,
    #[serde(default = "epsilon")]
    pub epsilon: f64,
    #[serde(default = "c")]
    pub c: f64,
}

fn one() -> u32 {
    1
}
fn yes() -> bool {
    true
}
fn kappa() -> u32 {
    64
}
fn eta_kappa() -> u64 {
    4000
}
fn epsilon() -> f64 {
    0.005
}
fn c() -> f64 {
    0.5
}

/// `p` giving `p·q·E[n_alert] = a`, with `E[n*_alert]` when `b_flag` is off.
pub fn tune_p(a: f64, n: u32, t: u32, s: f64, q: u32, b_flag: bool) -> Result<f64> {
    let alert = if b_flag { 1.0 - s } else { (1.0 - s) * (1.0 - s) };
    let denom = q as f64 * alert * (n.saturating_sub(t)) as f64;
    let p = a / denom;
    if !(denom > 0.0 && (0.0..=1.0).contains(&p)) {
        return Err(config_err(format!("params.target_ex: no p in [0, 1] gives {a} with s = {s}")));
    }
    Ok(p)
}

impl ParamsSpec {
    pub fn resolve(&self) -> Result<ModelParams> {
        let p = match (self.p, self.target_ex) {
            (Some(p), None) => p,
            (None, Some(a)) => tune_p(a, self.n, self.t, self.s, self.q, self.b_flag)?,
            _ => return Err(config_err("params: give exactly one of `p` and `target_ex`")),
        };
        let params = ModelParams {
            n: self.n,
            t: self.t,
            s: self.s,
            q: self.q,
            delta_net: self.delta_net,
            b_flag: self.b_flag,
            p,
            kappa: self.kappa,
            eta_kappa: self.eta_kappa,
            epsilon: self.epsilon,
            c: self.c,
        };
        params.validate().map_err(|e| config_err(format!("params: {e}")))?;
        Ok(params)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthCheck {
    /// Defaults to `(1−ε)` times the model's success expectation.
    pub tau: Option<f64>,
    /// Defaults to ηκ.
    pub window: Option<u64>,
    #[serde(default)]
    pub convention: GrowthConvention,
    /// Defaults to 0.95.
    pub min_pass_rate: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrefixCheck {
    /// Defaults to `⌈(1+c)(1+ε)ηκ·E⌉` (plus 2Δ under delay).
    pub k: Option<u64>,
    /// Defaults to 0.95 unless `min_violation_rate` is given.
    pub min_pass_rate: Option<f64>,
    /// Require violations in at least this fraction of trials.
    pub min_violation_rate: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityCheck {
    /// Defaults to `(1+δ/σ)·t/E[n_alert]` in the model's variant.
    pub mu: Option<f64>,
    /// Defaults to the common-prefix `k`.
    pub ell: Option<u64>,
    /// Defaults to 0.95.
    pub min_pass_rate: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowCheck {
    /// Window start spacing; defaults to ηκ/4.
    pub stride: Option<u64>,
    /// Fraction of typical windows required; defaults to 0.95.
    pub min_fraction: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationsCheck {
    /// Window start spacing; defaults to ηκ/4.
    pub stride: Option<u64>,
    /// Defaults to 0.95, or 0.90 for clause e) under message loss.
    pub min_fraction: Option<f64>,
    /// Clauses that gate the check, among `a`..`e`; defaults to `["e"]`.
    /// All five are reported either way.
    pub clauses: Option<Vec<char>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsCheck {
    #[serde(default = "three")]
    pub sigmas: f64,
    /// Batch count per trial for the standard errors.
    #[serde(default = "batches")]
    pub batches: usize,
}

impl Default for MomentsCheck {
    fn default() -> Self {
        MomentsCheck { sigmas: three(), batches: batches() }
    }
}

fn three() -> f64 {
    3.0
}
fn batches() -> usize {
    50
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiCheck {
    #[serde(default = "three")]
    pub sigmas: f64,
    /// Fewer qualifying races than this fails the check.
    #[serde(default)]
    pub min_races: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Empty {}

/// Enabled checks; each present table turns a check and its threshold on.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<MomentsCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain_growth: Option<GrowthCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub common_prefix: Option<PrefixCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain_quality: Option<QualityCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub typical: Option<WindowCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relations: Option<RelationsCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bad_events: Option<Empty>,
}

impl ChecksConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(cs) = self.relations.as_ref().and_then(|r| r.clauses.as_ref()) {
            if let Some(c) = cs.iter().find(|c| !('a'..='e').contains(c)) {
                return Err(config_err(format!("checks.relations.clauses: unknown clause `{c}`")));
            }
        }
        let rates = [
            ("checks.chain_growth.min_pass_rate", self.chain_growth.as_ref().and_then(|c| c.min_pass_rate)),
            ("checks.common_prefix.min_pass_rate", self.common_prefix.as_ref().and_then(|c| c.min_pass_rate)),
            ("checks.common_prefix.min_violation_rate", self.common_prefix.as_ref().and_then(|c| c.min_violation_rate)),
            ("checks.chain_quality.min_pass_rate", self.chain_quality.as_ref().and_then(|c| c.min_pass_rate)),
            ("checks.typical.min_fraction", self.typical.as_ref().and_then(|c| c.min_fraction)),
            ("checks.relations.min_fraction", self.relations.as_ref().and_then(|c| c.min_fraction)),
        ];
        for (path, v) in rates {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    return Err(config_err(format!("{path}: {v} is not in [0, 1]")));
                }
            }
        }
        if let Some(m) = &self.moments {
            if m.sigmas.is_nan() || m.sigmas <= 0.0 || m.batches < 2 {
                return Err(config_err("checks.moments: need sigmas > 0 and batches ≥ 2"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub rounds: u64,
    #[serde(default = "one_trial")]
    pub trials: u64,
    #[serde(default)]
    pub seed_base: u64,
    /// Output directory; not part of the config hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<PathBuf>,
    #[serde(default = "yes")]
    pub write_traces: bool,
    #[serde(default = "successes")]
    pub retention: TableRetention,
    pub params: ParamsSpec,
    pub adversary: AdversaryConfig,
    #[serde(default)]
    pub bounds: BoundsOptions,
    #[serde(default)]
    pub checks: ChecksConfig,
}

fn one_trial() -> u64 {
    1
}
fn successes() -> TableRetention {
    TableRetention::Successes
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(config_err("trials must be at least 1"));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(config_err("name must be a non-empty file-name fragment"));
        }
        self.checks.validate()?;
        self.execution_config(0).and_then(|c| c.validate())
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        self.params.resolve()
    }

    /// Configuration of trial `i`, seeded with `seed_base + i`.
    pub fn execution_config(&self, trial: u64) -> Result<ExecutionConfig> {
        Ok(ExecutionConfig {
            params: self.model_params()?,
            rounds: self.rounds,
            adversary: self.adversary.clone(),
            seed: self.seed_base.wrapping_add(trial),
            retention: self.retention,
        })
    }

    /// First 16 hex digits of SHA-256 over the canonical TOML, without `outputs`.
    pub fn config_hash(&self) -> Result<String> {
        let mut canon = self.clone();
        canon.outputs = None;
        Ok(hash_text(&canon.to_toml()?))
    }
}

pub fn hash_text(text: &str) -> String {
    hex::encode(&Sha256::digest(text.as_bytes())[..8])
}

/// Checks file for an existing trace: `[bounds]` options and `[checks.*]` tables.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksFile {
    #[serde(default)]
    pub bounds: BoundsOptions,
    #[serde(default)]
    pub checks: ChecksConfig,
}

impl ChecksFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        let f: ChecksFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        f.checks.validate()?;
        Ok(f)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Grid for Figure-1 curves and per-point bounds reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: u32,
    #[serde(default = "c")]
    pub c: f64,
    #[serde(default = "epsilon")]
    pub epsilon: f64,
    #[serde(default = "one")]
    pub q: u32,
    #[serde(default = "all_models")]
    pub models: Vec<ModelKind>,
    /// Explicit corruption counts; defaults to `0..n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<u32>>,
    pub ex: f64,
    pub ex_star: f64,
    #[serde(default = "delay_delta")]
    pub delta_net: u32,
    /// Absent drops the `4Δ/ηκ` term, as the reference numbers do.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_kappa: Option<u64>,
    #[serde(default)]
    pub delay_convention: DelayConvention,
}

fn all_models() -> Vec<ModelKind> {
    vec![ModelKind::Sync, ModelKind::Delay, ModelKind::MsgLoss]
}
fn delay_delta() -> u32 {
    10
}

impl GridSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let g: GridSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if g.n < 2 {
            return Err(config_err("n must be at least 2"));
        }
        if let Some(ts) = &g.t_grid {
            if let Some(t) = ts.iter().find(|&&t| t >= g.n) {
                return Err(config_err(format!("t_grid: {t} is not below n = {}", g.n)));
            }
        }
        Ok(g)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn t_values(&self) -> Vec<u32> {
        self.t_grid.clone().unwrap_or_else(|| (0..self.n).collect())
    }

    pub fn config_hash(&self) -> Result<String> {
        Ok(hash_text(&self.to_toml()?))
    }
}
