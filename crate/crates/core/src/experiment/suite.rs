//! Multi-trial runs: per-trial analysis, the aggregate summary and its checks.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::AdversaryConfig;
use crate::bounds::{relation_expectations, BoundsOptions, BoundsReport, RelationExpectations};
use crate::chain::{BlockRef, ChainStore};
use crate::error::{config_err, Error, Result};
use crate::execution::Executor;
use crate::experiment::config::{hash_text, ChecksConfig, ChecksFile, ExperimentSpec};
use crate::metrics::properties::{chain_quality_of_heads, common_prefix_from_history};
use crate::metrics::{
    relations_check, sample_windows, typical_check, BadEvents, ChainGrowthResult, ChainQualityResult, Collector,
    CommonPrefixResult, GrowthConvention, PhiEstimate, PropertyParams, RoundIndicators, TypicalSummary,
};
use crate::model::{ModelKind, ModelParams};
use crate::stats::batch_means_se;
use crate::view::{tool_version, ExecutionView, RoundRecord, RoundSink, TraceWriter};

/// Encoding of the per-round indicator files.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for RowFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(RowFormat::Csv),
            "json" => Ok(RowFormat::Json),
            other => Err(config_err(format!("unknown format `{other}` (expected csv or json)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SuiteOptions<'a> {
    /// Output directory; nothing is written when absent.
    pub out: Option<&'a Path>,
    /// Worker threads; the global pool when absent.
    pub jobs: Option<usize>,
    pub format: RowFormat,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Batch-means standard error of `mean`.
    pub se: f64,
}

/// Per-round means of every indicator column.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub x: Estimate,
    pub y: Estimate,
    pub z: Estimate,
    pub x_iso: Estimate,
    pub y_iso: Estimate,
    pub x_star: Estimate,
    pub y_star: Estimate,
    pub n_alert: Estimate,
    pub n_star_alert: Estimate,
    pub n_on_longest: Estimate,
}

impl Moments {
    pub fn of(rows: &[RoundIndicators], batches: usize) -> Self {
        let est = |f: fn(&RoundIndicators) -> f64| {
            let xs: Vec<f64> = rows.iter().map(f).collect();
            Estimate { mean: crate::stats::mean(&xs), se: batch_means_se(&xs, batches) }
        };
        Moments {
            x: est(|r| r.x as u8 as f64),
            y: est(|r| r.y as u8 as f64),
            z: est(|r| r.z as f64),
            x_iso: est(|r| r.x_iso as u8 as f64),
            y_iso: est(|r| r.y_iso as u8 as f64),
            x_star: est(|r| r.x_star as u8 as f64),
            y_star: est(|r| r.y_star as u8 as f64),
            n_alert: est(|r| r.n_alert as f64),
            n_star_alert: est(|r| r.n_star_alert as f64),
            n_on_longest: est(|r| r.n_on_longest as f64),
        }
    }

    fn to_array(self) -> [Estimate; 10] {
        [self.x, self.y, self.z, self.x_iso, self.y_iso, self.x_star, self.y_star, self.n_alert, self.n_star_alert, self.n_on_longest]
    }

    fn from_array(a: [Estimate; 10]) -> Self {
        let [x, y, z, x_iso, y_iso, x_star, y_star, n_alert, n_star_alert, n_on_longest] = a;
        Moments { x, y, z, x_iso, y_iso, x_star, y_star, n_alert, n_star_alert, n_on_longest }
    }

    /// Pools equal-length trials: mean of means, errors added in quadrature.
    pub fn pool(all: &[Moments]) -> Moments {
        if all.is_empty() {
            return Moments::default();
        }
        let k = all.len() as f64;
        let mut acc = [(0.0, 0.0); 10];
        for m in all {
            for (a, e) in acc.iter_mut().zip(m.to_array()) {
                a.0 += e.mean;
                a.1 += e.se * e.se;
            }
        }
        Moments::from_array(acc.map(|(m, v)| Estimate { mean: m / k, se: v.sqrt() / k }))
    }
}

/// Per-window hold counts of relation clauses a)–e).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseCounts {
    pub windows: u64,
    pub holds: [u64; 5],
}

impl ClauseCounts {
    pub fn add(&mut self, other: &ClauseCounts) {
        self.windows += other.windows;
        for (a, b) in self.holds.iter_mut().zip(other.holds) {
            *a += b;
        }
    }

    pub fn fraction(&self, clause: char) -> Option<f64> {
        let i = (clause as u8).checked_sub(b'a').filter(|&i| i < 5)? as usize;
        (self.windows > 0).then(|| self.holds[i] as f64 / self.windows as f64)
    }
}

/// Property thresholds after filling in the per-model defaults.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub tau: Option<f64>,
    pub window: Option<u64>,
    pub growth_convention: GrowthConvention,
    pub k: Option<u64>,
    pub mu: Option<f64>,
    pub ell: Option<u64>,
    /// Spacing of the sampled ηκ-windows.
    pub stride: u64,
    /// Rounds kept clear at both ends of the view.
    pub margin: u64,
}

/// Per-round success expectation the model's properties are stated in.
pub fn success_expectation(kind: ModelKind, exp: &RelationExpectations) -> f64 {
    match kind {
        ModelKind::Sync => exp.ex,
        ModelKind::Delay => exp.ex_iso,
        ModelKind::MsgLoss => exp.ex_star,
    }
}

/// `⌈(1+c)(1+ε)ηκ·E⌉`, plus 2Δ under delay.
pub fn default_prefix_k(params: &ModelParams, exp: &RelationExpectations) -> u64 {
    let e = success_expectation(params.kind(), exp);
    let k = ((1.0 + params.c) * (1.0 + params.epsilon) * params.eta_kappa as f64 * e).ceil() as u64;
    k + 2 * params.delta_net as u64
}

/// `(1 + δ/σ)·t/E[n_alert]`, with `2σ′` under delay and `σ*`, `E[n*_alert]`
/// under message loss.
pub fn default_quality_mu(params: &ModelParams, exp: &RelationExpectations) -> f64 {
    let t = params.t as f64;
    match params.kind() {
        ModelKind::Sync => (1.0 + exp.delta / exp.sigma) * t / exp.e_n_alert,
        ModelKind::Delay => (1.0 + exp.delta / (2.0 * exp.sigma_prime)) * t / exp.e_n_alert,
        ModelKind::MsgLoss => (1.0 + exp.delta / exp.sigma_star) * t / exp.e_n_star_alert,
    }
}

impl Thresholds {
    pub fn resolve(params: &ModelParams, checks: &ChecksConfig, exp: &RelationExpectations) -> Self {
        let e = success_expectation(params.kind(), exp);
        let mut th = Thresholds {
            stride: (params.eta_kappa / 4).max(1),
            margin: params.delta_net as u64,
            ..Default::default()
        };
        if let Some(g) = &checks.chain_growth {
            th.tau = Some(g.tau.unwrap_or((1.0 - params.epsilon) * e));
            th.window = Some(g.window.unwrap_or(params.eta_kappa));
            th.growth_convention = g.convention;
        }
        let k = checks.common_prefix.as_ref().and_then(|c| c.k).unwrap_or_else(|| default_prefix_k(params, exp));
        if checks.common_prefix.is_some() {
            th.k = Some(k);
        }
        if let Some(q) = &checks.chain_quality {
            th.mu = Some(q.mu.unwrap_or_else(|| default_quality_mu(params, exp)));
            th.ell = Some(q.ell.unwrap_or(k));
        }
        let stride = checks
            .relations
            .as_ref()
            .and_then(|r| r.stride)
            .or_else(|| checks.typical.as_ref().and_then(|t| t.stride));
        if let Some(s) = stride {
            th.stride = s.max(1);
        }
        th
    }

    fn property_params(&self) -> PropertyParams {
        PropertyParams {
            growth: self.tau.zip(self.window),
            growth_convention: self.growth_convention,
            prefix_k: self.k,
            quality: self.mu.zip(self.ell),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: u64,
    pub seed: u64,
    pub rounds: u64,
    pub moments: Moments,
    pub bad_events: BadEvents,
    pub chain_growth: Option<ChainGrowthResult>,
    pub common_prefix: Option<CommonPrefixResult>,
    pub chain_quality: Option<ChainQualityResult>,
    pub typical: TypicalSummary,
    pub relations: ClauseCounts,
    pub phi: Option<PhiEstimate>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PassRate {
    pub executions: u64,
    pub passed: u64,
    pub rate: f64,
}

impl PassRate {
    fn of(it: impl Iterator<Item = bool>) -> Self {
        let (mut executions, mut passed) = (0, 0);
        for p in it {
            executions += 1;
            passed += p as u64;
        }
        let rate = if executions == 0 { f64::NAN } else { passed as f64 / executions as f64 };
        PassRate { executions, passed, rate }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub name: String,
    pub observed: f64,
    /// Human-readable acceptance condition on `observed`.
    pub requirement: String,
    pub passed: bool,
}

impl CheckLine {
    fn new(name: &str, observed: f64, requirement: String, passed: bool) -> Self {
        CheckLine { name: name.into(), observed, requirement, passed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub tool: String,
    pub config_hash: String,
    pub name: String,
    pub model: ModelKind,
    pub trials: u64,
    pub rounds: u64,
    pub seed_base: u64,
    pub params: ModelParams,
    pub adversary: AdversaryConfig,
    pub bounds: BoundsReport,
    pub expectations: RelationExpectations,
    pub thresholds: Thresholds,
    pub estimates: Moments,
    pub chain_growth: Option<PassRate>,
    pub common_prefix: Option<PassRate>,
    pub chain_quality: Option<PassRate>,
    pub typical: TypicalSummary,
    pub relations: ClauseCounts,
    pub phi: Option<PhiEstimate>,
    pub bad_events: BadEvents,
    pub checks: Vec<CheckLine>,
    pub all_passed: bool,
    pub per_trial: Vec<TrialReport>,
}

impl SuiteSummary {
    pub fn check(&self, name: &str) -> Option<&CheckLine> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// Plain-text digest; the first line is the file header.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {} config_hash={}", self.tool, self.config_hash);
        let _ = writeln!(s, "experiment {} ({} model, {} adversary)", self.name, self.model, self.adversary.name());
        let p = &self.params;
        let _ = writeln!(
            s,
            "n={} t={} s={} q={} delta={} b={} p={:e} kappa={} eta_kappa={} epsilon={} c={}",
            p.n, p.t, p.s, p.q, p.delta_net, p.b_flag as u8, p.p, p.kappa, p.eta_kappa, p.epsilon, p.c
        );
        let _ = writeln!(s, "trials={} rounds={} seed_base={}", self.trials, self.rounds, self.seed_base);
        let _ = writeln!(s, "delta_min={} s_max={} majority_ok={}", self.bounds.delta_min, self.bounds.s_max, self.bounds.majority_ok);
        let e = &self.estimates;
        let x = &self.expectations;
        let mut rows = vec![("X", e.x, x.ex), ("Y", e.y, x.ey), ("Z", e.z, x.ez)];
        match self.model {
            ModelKind::Sync => {}
            ModelKind::Delay => rows.extend([("X'", e.x_iso, x.ex_iso), ("Y'", e.y_iso, x.ey_iso)]),
            ModelKind::MsgLoss => rows.extend([("X*", e.x_star, x.ex_star), ("Y*", e.y_star, x.ey_star)]),
        }
        for (name, est, expect) in rows {
            let _ = writeln!(s, "{name:<3} mean={:.6} se={:.6} expected={:.6}", est.mean, est.se, expect);
        }
        let _ = writeln!(
            s,
            "n_alert={:.3} n_star_alert={:.3} n_on_longest={:.3}",
            e.n_alert.mean, e.n_star_alert.mean, e.n_on_longest.mean
        );
        for (name, rate) in [("chain_growth", self.chain_growth), ("common_prefix", self.common_prefix), ("chain_quality", self.chain_quality)] {
            if let Some(r) = rate {
                let _ = writeln!(s, "{name}: {}/{} executions passed", r.passed, r.executions);
            }
        }
        let _ = writeln!(s, "typical windows: {}/{}", self.typical.typical, self.typical.windows);
        let h = &self.relations.holds;
        let _ = writeln!(
            s,
            "relation windows: {} (a={} b={} c={} d={} e={})",
            self.relations.windows, h[0], h[1], h[2], h[3], h[4]
        );
        if let Some(phi) = &self.phi {
            let _ = writeln!(s, "phi races={} wins={} estimate={:?}", phi.races, phi.wins, phi.estimate);
        }
        let b = &self.bad_events;
        let _ = writeln!(s, "bad events: insertions={} copies={} predictions={}", b.insertions, b.copies, b.predictions);
        for c in &self.checks {
            let _ = writeln!(s, "{} {}: observed {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.observed, c.requirement);
        }
        let _ = writeln!(s, "{}", if self.all_passed { "ALL PASSED" } else { "SOME CHECKS FAILED" });
        s
    }
}

/// Analysis inputs shared by every trial of a suite.
struct Context<'a> {
    params: ModelParams,
    checks: &'a ChecksConfig,
    exp: RelationExpectations,
    bounds: BoundsReport,
    thresholds: Thresholds,
}

impl<'a> Context<'a> {
    fn new(params: &ModelParams, opts: &BoundsOptions, checks: &'a ChecksConfig) -> Result<Self> {
        let exp = relation_expectations(params, opts)?;
        let bounds = BoundsReport::compute(params, opts)?;
        let thresholds = Thresholds::resolve(params, checks, &exp);
        Ok(Context { params: params.clone(), checks, exp, bounds, thresholds })
    }

    fn collector(&self) -> Result<Collector> {
        Collector::new(&self.params, &self.thresholds.property_params(), self.params.kind() == ModelKind::MsgLoss)
    }

    fn batches(&self) -> usize {
        self.checks.moments.as_ref().map_or(50, |m| m.batches)
    }

    fn analyze(&self, trial: u64, seed: u64, c: Collector, store: &ChainStore, heads: &[BlockRef]) -> Result<(TrialReport, Vec<RoundIndicators>)> {
        let Collector { indicators, adoption, growth, history, phi } = c;
        let rows = indicators.finish();
        let bad_events = adoption.finish(store)?;
        let common_prefix = match (history, self.thresholds.k) {
            (Some(h), Some(k)) => Some(common_prefix_from_history(store, &h.finish(), k)?),
            _ => None,
        };
        let chain_quality = match (self.thresholds.mu, self.thresholds.ell) {
            (Some(mu), Some(ell)) => Some(chain_quality_of_heads(store, &self.params, heads, mu, ell)?),
            _ => None,
        };
        let th = &self.thresholds;
        let windows = sample_windows(rows.len(), self.params.eta_kappa as usize, th.stride as usize, th.margin as usize);
        let mut typical = TypicalSummary::default();
        let mut relations = ClauseCounts::default();
        for w in windows {
            typical.record(&typical_check(&rows, w.clone(), &self.params, &self.exp, &bad_events)?);
            let cl = relations_check(&rows, w, &self.params, self.params.kind(), &self.exp)?;
            relations.windows += 1;
            for (h, ok) in relations.holds.iter_mut().zip(cl.as_array()) {
                *h += ok as u64;
            }
        }
        let report = TrialReport {
            trial,
            seed,
            rounds: rows.len() as u64,
            moments: Moments::of(&rows, self.batches()),
            bad_events,
            chain_growth: growth.map(|g| g.finish()),
            common_prefix,
            chain_quality,
            typical,
            relations,
            phi: phi.map(|p| p.finish()),
        };
        Ok((report, rows))
    }

    fn summarize(&self, header: Header, per_trial: Vec<TrialReport>) -> SuiteSummary {
        let moments: Vec<Moments> = per_trial.iter().map(|t| t.moments).collect();
        let mut bad_events = BadEvents::default();
        let mut typical = TypicalSummary::default();
        let mut relations = ClauseCounts::default();
        let mut phi: Option<PhiEstimate> = None;
        for t in &per_trial {
            bad_events.add(&t.bad_events);
            typical.windows += t.typical.windows;
            typical.typical += t.typical.typical;
            for &(clause, n) in &t.typical.failures {
                match typical.failures.iter_mut().find(|(c, _)| *c == clause) {
                    Some((_, m)) => *m += n,
                    None => typical.failures.push((clause, n)),
                }
            }
            relations.add(&t.relations);
            if let Some(p) = &t.phi {
                phi.get_or_insert_with(PhiEstimate::default).merge(p);
            }
        }
        let rate = |f: fn(&TrialReport) -> Option<bool>| {
            let v: Vec<bool> = per_trial.iter().filter_map(f).collect();
            (!v.is_empty()).then(|| PassRate::of(v.into_iter()))
        };
        let mut summary = SuiteSummary {
            tool: tool_version(),
            config_hash: header.config_hash,
            name: header.name,
            model: self.params.kind(),
            trials: per_trial.len() as u64,
            rounds: header.rounds,
            seed_base: header.seed_base,
            params: self.params.clone(),
            adversary: header.adversary,
            bounds: self.bounds.clone(),
            expectations: self.exp,
            thresholds: self.thresholds,
            estimates: Moments::pool(&moments),
            chain_growth: rate(|t| t.chain_growth.as_ref().map(|r| r.pass)),
            common_prefix: rate(|t| t.common_prefix.as_ref().map(|r| r.pass)),
            chain_quality: rate(|t| t.chain_quality.as_ref().map(|r| r.pass)),
            typical,
            relations,
            phi,
            bad_events,
            checks: Vec::new(),
            all_passed: true,
            per_trial,
        };
        summary.checks = self.evaluate(&summary);
        summary.all_passed = summary.checks.iter().all(|c| c.passed);
        summary
    }

    fn evaluate(&self, s: &SuiteSummary) -> Vec<CheckLine> {
        let mut out = Vec::new();
        let checks = self.checks;
        let p = &self.params;
        let e = &s.estimates;
        if let Some(m) = &checks.moments {
            let k = m.sigmas;
            let (lo, hi) = (self.bounds.ex_lower, self.bounds.ex_upper);
            let (a, b) = (lo - k * e.x.se, hi + k * e.x.se);
            out.push(CheckLine::new("lemma1_x", e.x.mean, format!("in [{a:.6}, {b:.6}]"), a <= e.x.mean && e.x.mean <= b));
            let xh = e.x.mean;
            let floor = xh * (1.0 - xh) - k * e.y.se;
            out.push(CheckLine::new("lemma2_y", e.y.mean, format!(">= {floor:.6}"), e.y.mean >= floor));
            let near = |name: &str, est: Estimate, target: f64| {
                let tol = k * est.se;
                let ok = (est.mean - target).abs() <= tol;
                CheckLine::new(name, est.mean, format!("within {tol:.6} of {target:.6}"), ok)
            };
            out.push(near("ez", e.z, self.exp.ez));
            match p.kind() {
                ModelKind::Delay => {
                    let d = p.delta_net as i32;
                    out.push(near("x_iso", e.x_iso, xh * (1.0 - xh).powi(d - 1)));
                    out.push(near("y_iso", e.y_iso, xh * (1.0 - xh).powi(2 * d - 1)));
                }
                ModelKind::MsgLoss => {
                    out.push(near("n_on_longest", e.n_on_longest, self.bounds.e_n_alert));
                    out.push(near("n_star_alert", e.n_star_alert, self.bounds.e_n_star_alert));
                }
                ModelKind::Sync => {}
            }
        }
        let rate_check = |name: &str, rate: Option<PassRate>, min: f64| {
            let r = rate.unwrap_or_default();
            let ok = r.executions > 0 && r.rate >= min;
            CheckLine::new(name, r.rate, format!(">= {min} of {} executions", r.executions), ok)
        };
        if let Some(g) = &checks.chain_growth {
            out.push(rate_check("chain_growth", s.chain_growth, g.min_pass_rate.unwrap_or(0.95)));
        }
        if let Some(c) = &checks.common_prefix {
            if c.min_pass_rate.is_some() || c.min_violation_rate.is_none() {
                out.push(rate_check("common_prefix", s.common_prefix, c.min_pass_rate.unwrap_or(0.95)));
            }
            if let Some(v) = c.min_violation_rate {
                let r = s.common_prefix.unwrap_or_default();
                let viol = if r.executions == 0 { f64::NAN } else { 1.0 - r.rate };
                let ok = r.executions > 0 && viol >= v;
                out.push(CheckLine::new("common_prefix_violations", viol, format!(">= {v} of {} executions", r.executions), ok));
            }
        }
        if let Some(q) = &checks.chain_quality {
            out.push(rate_check("chain_quality", s.chain_quality, q.min_pass_rate.unwrap_or(0.95)));
        }
        if let Some(t) = &checks.typical {
            let min = t.min_fraction.unwrap_or(0.95);
            let w = s.typical.windows;
            let frac = if w == 0 { f64::NAN } else { s.typical.typical as f64 / w as f64 };
            out.push(CheckLine::new("typical", frac, format!(">= {min} of {w} windows"), w > 0 && frac >= min));
        }
        if let Some(r) = &checks.relations {
            let clauses = r.clauses.clone().unwrap_or_else(|| vec!['e']);
            for c in clauses {
                let default = if c == 'e' && p.kind() == ModelKind::MsgLoss { 0.90 } else { 0.95 };
                let min = r.min_fraction.unwrap_or(default);
                let frac = s.relations.fraction(c);
                let ok = frac.is_some_and(|f| f >= min);
                let name = format!("relation_{c}");
                out.push(CheckLine::new(&name, frac.unwrap_or(f64::NAN), format!(">= {min} of {} windows", s.relations.windows), ok));
            }
        }
        if let Some(ph) = &checks.phi {
            let est = s.phi.unwrap_or_default();
            let bound = self.exp.phi;
            match (est.estimate, est.standard_error) {
                (Some(v), Some(se)) => {
                    let lim = bound + ph.sigmas * se;
                    let ok = v <= lim && est.races >= ph.min_races;
                    let req = format!("<= {lim:.6} with >= {} races (got {})", ph.min_races, est.races);
                    out.push(CheckLine::new("phi", v, req, ok));
                }
                _ => out.push(CheckLine::new("phi", f64::NAN, "at least one race".into(), false)),
            }
        }
        if checks.bad_events.is_some() {
            let total = s.bad_events.total();
            out.push(CheckLine::new("bad_events", total as f64, "== 0".into(), total == 0));
        }
        out
    }
}

struct Header {
    config_hash: String,
    name: String,
    rounds: u64,
    seed_base: u64,
    adversary: AdversaryConfig,
}

/// Streams one trial to an optional trace file.
struct TrialSink<'a, W: Write> {
    collector: &'a mut Collector,
    trace: Option<TraceWriter<W>>,
}

impl<W: Write> RoundSink for TrialSink<'_, W> {
    fn on_round(&mut self, rec: &RoundRecord, store: &ChainStore) -> Result<()> {
        self.collector.on_round(rec, store)?;
        if let Some(t) = &mut self.trace {
            t.on_round(rec, store)?;
        }
        Ok(())
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn trial_stem(trial: u64) -> String {
    format!("trial-{trial:04}")
}

/// Writes per-round indicators with a leading header (a `#` line for CSV,
/// in-band keys for JSON).
pub fn write_indicators<W: Write>(mut out: W, rows: &[RoundIndicators], format: RowFormat, config_hash: &str, seed: u64) -> Result<()> {
    match format {
        RowFormat::Csv => {
            writeln!(out, "# {} config_hash={config_hash} seed={seed}", tool_version())?;
            crate::metrics::indicators::write_csv(&mut out, rows)?;
        }
        RowFormat::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                tool: String,
                config_hash: &'a str,
                seed: u64,
                rows: &'a [RoundIndicators],
            }
            let doc = Doc { tool: tool_version(), config_hash, seed, rows };
            serde_json::to_writer(&mut out, &doc).map_err(|e| Error::Parse(e.to_string()))?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn run_trial(ctx: &Context<'_>, spec: &ExperimentSpec, hash: &str, trial: u64, opts: &SuiteOptions<'_>) -> Result<TrialReport> {
    let config = spec.execution_config(trial)?;
    let mut exec = Executor::new(&config)?;
    let mut collector = ctx.collector()?;
    let trace = match opts.out {
        Some(dir) if spec.write_traces => {
            let path = dir.join(format!("{}.trace.jsonl", trial_stem(trial)));
            Some(TraceWriter::new(create(&path)?, hash, config.seed, config.rounds, &config.params, &config.adversary)?)
        }
        _ => None,
    };
    let mut sink = TrialSink { collector: &mut collector, trace };
    exec.run(config.rounds, &mut sink)?;
    if let Some(t) = sink.trace.take() {
        t.finish(exec.store())?;
    }
    let (report, rows) = ctx.analyze(trial, config.seed, collector, exec.store(), exec.heads())?;
    if let Some(dir) = opts.out {
        let ext = match opts.format {
            RowFormat::Csv => "csv",
            RowFormat::Json => "json",
        };
        let path = dir.join(format!("{}.indicators.{ext}", trial_stem(trial)));
        write_indicators(create(&path)?, &rows, opts.format, hash, config.seed)?;
    }
    Ok(report)
}

fn write_summary(dir: &Path, summary: &SuiteSummary) -> Result<()> {
    let mut f = create(&dir.join("summary.json"))?;
    f.write_all(summary.to_json()?.as_bytes())?;
    f.flush()?;
    let mut f = create(&dir.join("summary.txt"))?;
    f.write_all(summary.to_text().as_bytes())?;
    f.flush()?;
    Ok(())
}

/// Runs every trial (in parallel across seeds), reduces the reports in trial
/// order and writes the output files when `opts.out` is set.
pub fn run_suite(spec: &ExperimentSpec, opts: &SuiteOptions<'_>) -> Result<SuiteSummary> {
    spec.validate()?;
    let params = spec.model_params()?;
    let hash = spec.config_hash()?;
    let ctx = Context::new(&params, &spec.bounds, &spec.checks)?;
    if let Some(dir) = opts.out {
        fs::create_dir_all(dir).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))?;
    }
    let work = || -> Result<Vec<TrialReport>> {
        (0..spec.trials).into_par_iter().map(|i| run_trial(&ctx, spec, &hash, i, opts)).collect()
    };
    let per_trial = match opts.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| config_err(format!("jobs: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let header = Header {
        config_hash: hash,
        name: spec.name.clone(),
        rounds: spec.rounds,
        seed_base: spec.seed_base,
        adversary: spec.adversary.clone(),
    };
    let summary = ctx.summarize(header, per_trial);
    if let Some(dir) = opts.out {
        write_summary(dir, &summary)?;
    }
    Ok(summary)
}

/// Runs the checks of `file` against a recorded view. The summary's config
/// hash covers both the trace's hash and the checks file.
pub fn check_view(view: &ExecutionView, trace_hash: &str, file: &ChecksFile, out: Option<&Path>) -> Result<SuiteSummary> {
    file.checks.validate()?;
    let ctx = Context::new(&view.params, &file.bounds, &file.checks)?;
    let mut collector = ctx.collector()?;
    view.replay(&mut collector)?;
    let heads = view.final_heads();
    let (report, _) = ctx.analyze(0, view.seed, collector, &view.store, &heads)?;
    let header = Header {
        config_hash: hash_text(&format!("{trace_hash}\n{}", file.to_toml()?)),
        name: "check".into(),
        rounds: view.len(),
        seed_base: view.seed,
        adversary: view.adversary.clone(),
    };
    let summary = ctx.summarize(header, vec![report]);
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_summary(dir, &summary)?;
    }
    Ok(summary)
}
