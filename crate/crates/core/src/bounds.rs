//! Closed-form expectations, δ and s_max thresholds, and Figure-1 curves.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::model::{ModelKind, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedCounts {
    pub alert: f64,
    pub sleepy: f64,
    pub star_alert: f64,
}

pub fn expected_counts(n: u32, t: u32, s: f64) -> Result<ExpectedCounts> {
    if t >= n {
        return Err(config_err(format!("t = {t} must be below n = {n}")));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(config_err(format!("s = {s} outside [0, 1]")));
    }
    let honest = (n - t) as f64;
    Ok(ExpectedCounts { alert: (1.0 - s) * honest, sleepy: s * honest, star_alert: (1.0 - s) * (1.0 - s) * honest })
}

/// `(a/(1+a), a)` with `a = p·q·e_n_alert`.
pub fn ex_bounds(p: f64, q: u32, e_n_alert: f64) -> (f64, f64) {
    let a = p * q as f64 * e_n_alert;
    (a / (1.0 + a), a)
}

/// Probability that a single honest party, alert with probability `alert`,
/// fails all of its `q` queries.
fn party_miss(alert: f64, p: f64, q: u32) -> f64 {
    1.0 - alert * (1.0 - (1.0 - p).powi(q as i32))
}

/// Exact `P[X_i = 1]` when each honest party is alert independently with
/// probability `alert`.
pub fn ex_exact_with(honest: u32, alert: f64, p: f64, q: u32) -> f64 {
    1.0 - party_miss(alert, p, q).powi(honest as i32)
}

/// Exact `P[Y_i = 1]` under the same independence.
pub fn ey_exact_with(honest: u32, alert: f64, p: f64, q: u32) -> f64 {
    if honest == 0 {
        return 0.0;
    }
    let miss = party_miss(alert, p, q);
    honest as f64 * (1.0 - miss) * miss.powi(honest as i32 - 1)
}

pub fn ez(params: &ModelParams) -> f64 {
    params.q as f64 * params.p * params.t as f64
}

/// `E[X′] = E[X](1−E[X])^{Δ−1}`; Δ ≤ 1 leaves `ex` unchanged.
pub fn ex_iso(ex: f64, delta_net: u32) -> f64 {
    ex * (1.0 - ex).powi(delta_net.saturating_sub(1) as i32)
}

/// `E[X](1−E[X])^{2Δ−1}`, the lower bound used for `E[Y′]`.
pub fn ey_iso(ex: f64, delta_net: u32) -> f64 {
    ex * (1.0 - ex).powi((2 * delta_net).saturating_sub(1) as i32)
}

/// Which expectation feeds the delay-model δ bound.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DelayConvention {
    /// Substitutes `E[X′]`, reproducing the reference δ = 0.46.
    #[default]
    Isolated,
    /// Uses `E[X]` as the bound is stated.
    Strict,
}

/// Which value stands in for `E[X]` (and `E[X*]`) in δ and s_max.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExSource {
    /// `p·q·E[n_alert]`, the value fixed by difficulty tuning.
    #[default]
    Upper,
    /// The exact success probability.
    Exact,
}

/// `ηκ`, where `Infinite` drops the `4Δ/ηκ` term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EtaKappa {
    Finite(u64),
    Infinite,
}

impl EtaKappa {
    fn inverse(self) -> f64 {
        match self {
            EtaKappa::Finite(0) => f64::INFINITY,
            EtaKappa::Finite(v) => 1.0 / v as f64,
            EtaKappa::Infinite => 0.0,
        }
    }
}

/// Minimum admissible δ. For the delay model `ex` is whatever the chosen
/// [`DelayConvention`] substitutes.
pub fn delta_min(kind: ModelKind, ex: f64, ex_star: f64, epsilon: f64, delta_net: u32, eta_kappa: EtaKappa) -> Result<f64> {
    match kind {
        ModelKind::Sync | ModelKind::MsgLoss if delta_net != 0 => {
            Err(config_err(format!("{kind} model has no network delay, got Δ = {delta_net}")))
        }
        ModelKind::Delay if delta_net == 0 => Err(config_err("delay model requires Δ ≥ 1")),
        ModelKind::Sync => Ok(2.0 * ex + 2.0 * epsilon),
        ModelKind::MsgLoss => Ok(3.0 * epsilon + 2.0 * ex_star),
        ModelKind::Delay => {
            let d = delta_net as f64;
            Ok(2.0 * d * ex + 4.0 * epsilon + 4.0 * d * eta_kappa.inverse())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SMax {
    pub value: f64,
    /// False when the majority assumption fails even with no sleep.
    pub satisfiable: bool,
    /// The reference closed form (message-loss model only), unclamped.
    pub printed: Option<f64>,
}

pub fn s_max(kind: ModelKind, c: f64, delta: f64, t: u32, n: u32) -> Result<SMax> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(config_err(format!("c = {c} outside (0, 1]")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(config_err(format!("δ = {delta} outside (0, 1)")));
    }
    if t >= n {
        return Err(config_err(format!("t = {t} must be below n = {n}")));
    }
    let k = c * (1.0 - delta);
    let r = t as f64 / (n - t) as f64;
    match kind {
        ModelKind::Sync | ModelKind::Delay => {
            let raw = 1.0 - r / k;
            Ok(SMax { value: raw.clamp(0.0, 1.0), satisfiable: raw >= 0.0, printed: None })
        }
        ModelKind::MsgLoss => {
            let printed = Some((2.0 * k - (1.0 + 4.0 * (1.0 + k * r)).sqrt()) / (2.0 * (1.0 + k)));
            if k < r {
                return Ok(SMax { value: 0.0, satisfiable: false, printed });
            }
            // With u = 1 − s: (k+1)u² − u − r ≥ 0; the larger root lies in
            // [vertex, 1] because g(vertex) < 0 ≤ g(1).
            let g = |u: f64| (k + 1.0) * u * u - u - r;
            let (mut lo, mut hi) = (1.0 / (2.0 * (k + 1.0)), 1.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-16 {
                    break;
                }
            }
            Ok(SMax { value: (1.0 - hi).clamp(0.0, 1.0), satisfiable: true, printed })
        }
    }
}

pub fn phi_bound(s: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&s) {
        return Err(Error::Domain(format!("φ bound needs s in [0, 1), got {s}")));
    }
    Ok(s / (1.0 - s))
}

/// Largest `t/n` allowed by the majority assumption with no sleep.
pub fn max_adv_fraction(c: f64, delta: f64) -> f64 {
    let k = c * (1.0 - delta);
    k / (1.0 + k)
}

/// Knobs for turning a parameter point into thresholds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsOptions {
    pub ex_source: ExSource,
    pub delay_convention: DelayConvention,
    /// Drop the `4Δ/ηκ` term, as the reference numbers do.
    pub drop_eta_term: bool,
}

/// Expectations and lemma constants at one parameter point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationExpectations {
    pub ex: f64,
    pub ey: f64,
    pub ez: f64,
    pub ex_iso: f64,
    pub ey_iso: f64,
    pub ex_star: f64,
    pub ey_star: f64,
    pub e_n_alert: f64,
    pub e_n_star_alert: f64,
    pub delta: f64,
    pub sigma: f64,
    pub sigma_prime: f64,
    pub sigma_star: f64,
    pub phi: f64,
}

pub fn sigmas(epsilon: f64, ex: f64, ex_star: f64, delta_net: u32) -> (f64, f64, f64) {
    (
        (1.0 - epsilon) * (1.0 - ex),
        (1.0 - epsilon) * (1.0 - ex).powi(delta_net as i32),
        (1.0 - epsilon) * (1.0 - ex_star),
    )
}

/// Exact per-round expectations, with δ taken from `opts`.
pub fn relation_expectations(params: &ModelParams, opts: &BoundsOptions) -> Result<RelationExpectations> {
    params.validate()?;
    let report = BoundsReport::compute(params, opts)?;
    let honest = params.honest_count();
    let alert = 1.0 - params.s;
    let ex = ex_exact_with(honest, alert, params.p, params.q);
    let ey = ey_exact_with(honest, alert, params.p, params.q);
    let ex_star = ex_exact_with(honest, alert * alert, params.p, params.q);
    let ey_star = ey_exact_with(honest, alert * alert, params.p, params.q);
    let (sigma, sigma_prime, sigma_star) = sigmas(params.epsilon, ex, ex_star, params.delta_net);
    let d = params.delta_net;
    Ok(RelationExpectations {
        ex,
        ey,
        ez: ez(params),
        ex_iso: ex_iso(ex, d),
        ey_iso: ey * (1.0 - ex).powi((2 * d).saturating_sub(2) as i32),
        ex_star,
        ey_star,
        e_n_alert: report.e_n_alert,
        e_n_star_alert: report.e_n_star_alert,
        delta: report.delta_min,
        sigma,
        sigma_prime,
        sigma_star,
        phi: if params.s < 1.0 { params.s / (1.0 - params.s) } else { f64::INFINITY },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub model: ModelKind,
    pub e_n_alert: f64,
    pub e_n_sleepy: f64,
    pub e_n_star_alert: f64,
    pub ex_lower: f64,
    pub ex_upper: f64,
    pub ex_exact: f64,
    pub ey_lower: f64,
    pub ez: f64,
    pub ex_iso: f64,
    pub ey_iso: f64,
    pub ex_star: f64,
    pub delta_min: f64,
    pub s_max: f64,
    pub s_max_satisfiable: bool,
    pub s_max_printed: Option<f64>,
    pub phi_max: Option<f64>,
    pub sigma: f64,
    pub sigma_prime: f64,
    pub sigma_star: f64,
    pub majority_ok: bool,
    pub max_adv_fraction: f64,
    /// `2E[X] ≤ 1`, needed by the unique-success bound.
    pub ex_at_most_half: bool,
}

impl BoundsReport {
    pub fn compute(params: &ModelParams, opts: &BoundsOptions) -> Result<Self> {
        params.validate()?;
        let model = params.kind();
        let counts = expected_counts(params.n, params.t, params.s)?;
        let (ex_lower, ex_upper) = ex_bounds(params.p, params.q, counts.alert);
        let honest = params.honest_count();
        let ex_exact = ex_exact_with(honest, 1.0 - params.s, params.p, params.q);
        let (ex, ex_star) = match opts.ex_source {
            ExSource::Upper => (ex_upper, ex_bounds(params.p, params.q, counts.star_alert).1),
            ExSource::Exact => {
                let alert = 1.0 - params.s;
                (ex_exact, ex_exact_with(honest, alert * alert, params.p, params.q))
            }
        };
        let ex_for_delta = match (model, opts.delay_convention) {
            (ModelKind::Delay, DelayConvention::Isolated) => ex_iso(ex, params.delta_net),
            _ => ex,
        };
        let eta = if opts.drop_eta_term { EtaKappa::Infinite } else { EtaKappa::Finite(params.eta_kappa) };
        let delta = delta_min(model, ex_for_delta, ex_star, params.epsilon, params.delta_net, eta)?;
        let (sigma, sigma_prime, sigma_star) = sigmas(params.epsilon, ex, ex_star, params.delta_net);
        let k = params.c * (1.0 - delta);
        let majority_ok = match model {
            ModelKind::Sync | ModelKind::Delay => params.t as f64 <= k * counts.alert,
            ModelKind::MsgLoss => params.t as f64 + (1.0 - params.s) * counts.sleepy <= k * counts.star_alert,
        };
        // δ ≥ 1 leaves no admissible s; report it as unsatisfiable.
        let sm = if delta < 1.0 {
            s_max(model, params.c, delta, params.t, params.n)?
        } else {
            SMax { value: 0.0, satisfiable: false, printed: None }
        };
        Ok(BoundsReport {
            model,
            e_n_alert: counts.alert,
            e_n_sleepy: counts.sleepy,
            e_n_star_alert: counts.star_alert,
            ex_lower,
            ex_upper,
            ex_exact,
            ey_lower: ex * (1.0 - ex),
            ez: ez(params),
            ex_iso: ex_iso(ex, params.delta_net),
            ey_iso: ey_iso(ex, params.delta_net),
            ex_star,
            delta_min: delta,
            s_max: sm.value,
            s_max_satisfiable: sm.satisfiable,
            s_max_printed: sm.printed,
            phi_max: phi_bound(params.s).ok(),
            sigma,
            sigma_prime,
            sigma_star,
            majority_ok,
            max_adv_fraction: if delta < 1.0 { max_adv_fraction(params.c, delta) } else { 0.0 },
            ex_at_most_half: 2.0 * ex <= 1.0,
        })
    }
}

/// Fixed expectations a Figure-1 series is drawn at.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExFamily {
    pub ex: f64,
    pub ex_star: f64,
    #[serde(default)]
    pub delta_net: u32,
    /// Absent means the `4Δ/ηκ` term is dropped.
    #[serde(default)]
    pub eta_kappa: Option<u64>,
    #[serde(default)]
    pub delay_convention: DelayConvention,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: u32,
    pub t_fraction: f64,
    pub delta: f64,
    pub s_max: f64,
    pub satisfiable: bool,
}

pub fn figure1_dataset(kind: ModelKind, c: f64, epsilon: f64, family: &ExFamily, n: u32, t_grid: &[u32]) -> Result<Vec<CurvePoint>> {
    let delta_net = if kind == ModelKind::Delay { family.delta_net } else { 0 };
    let ex = match (kind, family.delay_convention) {
        (ModelKind::Delay, DelayConvention::Isolated) => ex_iso(family.ex, delta_net),
        _ => family.ex,
    };
    let eta = family.eta_kappa.map_or(EtaKappa::Infinite, EtaKappa::Finite);
    let delta = delta_min(kind, ex, family.ex_star, epsilon, delta_net, eta)?;
    t_grid
        .iter()
        .map(|&t| {
            if t >= n {
                return Err(config_err(format!("grid point t = {t} not below n = {n}")));
            }
            let sm = s_max(kind, c, delta, t, n)?;
            Ok(CurvePoint { t, t_fraction: t as f64 / n as f64, delta, s_max: sm.value, satisfiable: sm.satisfiable })
        })
        .collect()
}

pub const FIGURE1_HEADER: &str = "model,t_fraction,s_max";

/// Figure-1 rows for several series, one per line after the header.
pub fn figure1_csv(series: &[(ModelKind, Vec<CurvePoint>)]) -> String {
    let mut out = String::from(FIGURE1_HEADER);
    out.push('\n');
    for (kind, points) in series {
        for pt in points {
            out.push_str(&format!("{kind},{},{}\n", pt.t_fraction, pt.s_max));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn counts() {
        let c = expected_counts(100, 20, 0.0).unwrap();
        assert_eq!((c.alert, c.sleepy, c.star_alert), (80.0, 0.0, 80.0));
        let c = expected_counts(100, 20, 1.0).unwrap();
        assert_eq!((c.alert, c.sleepy, c.star_alert), (0.0, 80.0, 0.0));
        let c = expected_counts(110, 10, 0.25).unwrap();
        assert_eq!((c.alert, c.sleepy, c.star_alert), (75.0, 25.0, 56.25));
        assert!(expected_counts(10, 10, 0.1).is_err());
        assert!(expected_counts(10, 1, 1.5).is_err());
    }

    #[test]
    fn lemma_one_bounds() {
        assert_eq!(ex_bounds(0.0, 1, 80.0), (0.0, 0.0));
        assert_eq!(ex_bounds(0.5, 2, 1.0), (0.5, 1.0));
        let (lo, hi) = ex_bounds(0.0003, 1, 100.0);
        assert!(close(lo, 0.03 / 1.03, 1e-15) && close(hi, 0.03, 1e-15));
        assert!(close(lo, 0.029126, 1e-6));
    }

    #[test]
    fn exact_probabilities_match_enumeration() {
        // Two honest parties, alert prob a, success prob g = 1 − (1−p)^q each.
        let (p, q, a) = (0.3, 2, 0.6);
        let g: f64 = 1.0 - (1.0f64 - p).powi(q as i32);
        let one = a * g;
        assert!(close(ex_exact_with(2, a, p, q), 1.0 - (1.0 - one).powi(2), 1e-15));
        assert!(close(ey_exact_with(2, a, p, q), 2.0 * one * (1.0 - one), 1e-15));
        assert_eq!(ey_exact_with(0, a, p, q), 0.0);
    }

    #[test]
    fn delta_min_reference_values() {
        assert!(close(delta_min(ModelKind::Sync, 0.03, 0.0, 0.005, 0, EtaKappa::Infinite).unwrap(), 0.07, 1e-12));
        assert!(close(delta_min(ModelKind::MsgLoss, 0.0, 0.03, 0.005, 0, EtaKappa::Infinite).unwrap(), 0.075, 1e-12));
        assert!(close(delta_min(ModelKind::Delay, 0.022, 0.0, 0.005, 10, EtaKappa::Infinite).unwrap(), 0.46, 1e-12));
        let with_eta = delta_min(ModelKind::Delay, 0.022, 0.0, 0.005, 10, EtaKappa::Finite(4000)).unwrap();
        assert!(close(with_eta, 0.46 + 0.01, 1e-12));
        assert!(delta_min(ModelKind::Delay, 0.03, 0.0, 0.005, 0, EtaKappa::Infinite).is_err());
        assert!(delta_min(ModelKind::Sync, 0.03, 0.0, 0.005, 2, EtaKappa::Infinite).is_err());
    }

    #[test]
    fn s_max_examples() {
        assert_eq!(s_max(ModelKind::Sync, 0.5, 0.07, 0, 110).unwrap().value, 1.0);
        let v = s_max(ModelKind::Sync, 0.5, 0.07, 10, 110).unwrap().value;
        assert!(close(v, 1.0 - 0.1 / 0.465, 1e-12) && close(v, 0.7849, 1e-4));
        let m = s_max(ModelKind::MsgLoss, 0.5, 0.075, 0, 100).unwrap();
        assert!(close(m.value, 0.4625 / 1.4625, 1e-12), "{}", m.value);
        let unsat = s_max(ModelKind::MsgLoss, 0.5, 0.075, 40, 100).unwrap();
        assert!(!unsat.satisfiable && unsat.value == 0.0);
        assert!(s_max(ModelKind::Sync, 0.0, 0.07, 1, 10).is_err());
    }

    #[test]
    fn phi_and_fraction() {
        assert_eq!(phi_bound(0.0).unwrap(), 0.0);
        assert_eq!(phi_bound(0.5).unwrap(), 1.0);
        assert!(close(phi_bound(0.2).unwrap(), 0.25, 1e-15));
        assert!(matches!(phi_bound(1.0), Err(Error::Domain(_))));
        assert!(close(max_adv_fraction(1.0, 1e-12), 0.5, 1e-9));
        assert!(close(max_adv_fraction(1.0, 0.07), 0.93 / 1.93, 1e-12));
        assert!(close(max_adv_fraction(0.5, 0.07), 0.465 / 1.465, 1e-12));
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigmas(0.0, 0.0, 0.0, 3).0, 1.0);
        assert!(close(sigmas(0.005, 0.03, 0.0, 0).0, 0.96515, 1e-12));
        let (s, sp, _) = sigmas(0.005, 0.03, 0.0, 1);
        assert_eq!(s, sp);
    }

    #[test]
    fn report_for_reference_sync_point() {
        let params = ModelParams::sync(110, 10, 0.5, 0.0006);
        let opts = BoundsOptions { drop_eta_term: true, ..Default::default() };
        let r = BoundsReport::compute(&params, &opts).unwrap();
        assert!(close(r.ex_upper, 0.03, 1e-12));
        assert!(close(r.delta_min, 0.07, 1e-12));
        assert!(r.ex_lower <= r.ex_exact && r.ex_exact <= r.ex_upper);
        assert!(r.majority_ok);
        assert_eq!(r.phi_max, Some(1.0));
    }

    #[test]
    fn figure1_endpoints() {
        let fam = ExFamily { ex: 0.03, ex_star: 0.03, delta_net: 10, eta_kappa: None, delay_convention: DelayConvention::Isolated };
        let grid: Vec<u32> = (0..100).collect();
        let sync = figure1_dataset(ModelKind::Sync, 0.5, 0.005, &fam, 100, &grid).unwrap();
        assert_eq!(sync[0].s_max, 1.0);
        let csv = figure1_csv(&[(ModelKind::Sync, sync)]);
        assert!(csv.starts_with("model,t_fraction,s_max\nsync,0,1\n"));
    }

    /// Closed form of the larger root of (k+1)u² − u − r, as s = 1 − u.
    fn msgloss_closed_form(k: f64, r: f64) -> f64 {
        (2.0 * k + 1.0 - (1.0 + 4.0 * (1.0 + k) * r).sqrt()) / (2.0 * (1.0 + k))
    }

    proptest::proptest! {
        #[test]
        fn ex_lower_not_above_upper(p in 0.0f64..1.0, q in 1u32..5, e in 0.0f64..200.0) {
            let (lo, hi) = ex_bounds(p, q, e);
            proptest::prop_assert!(lo <= hi);
        }

        #[test]
        fn s_max_monotone_in_t(c in 0.05f64..=1.0, delta in 0.01f64..0.99, n in 2u32..200) {
            for kind in [ModelKind::Sync, ModelKind::MsgLoss] {
                let mut prev = f64::INFINITY;
                for t in 0..n {
                    let v = s_max(kind, c, delta, t, n).unwrap().value;
                    proptest::prop_assert!((0.0..=1.0).contains(&v));
                    proptest::prop_assert!(v <= prev + 1e-12);
                    prev = v;
                }
            }
            proptest::prop_assert_eq!(s_max(ModelKind::Sync, c, delta, 0, n).unwrap().value, 1.0);
        }

        #[test]
        fn msgloss_root_solves_defining_equality(c in 0.05f64..=1.0, delta in 0.01f64..0.99, n in 2u32..200, t in 0u32..200) {
            let t = t % n;
            let sm = s_max(ModelKind::MsgLoss, c, delta, t, n).unwrap();
            let k = c * (1.0 - delta);
            let r = t as f64 / (n - t) as f64;
            if sm.satisfiable {
                let s = sm.value;
                let h = (n - t) as f64;
                let lhs = t as f64 + s * (1.0 - s) * h;
                let rhs = k * (1.0 - s) * (1.0 - s) * h;
                proptest::prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1e-9), "lhs {} rhs {}", lhs, rhs);
                proptest::prop_assert!((s - msgloss_closed_form(k, r)).abs() < 1e-9);
            } else {
                proptest::prop_assert!(k < r);
            }
        }

        #[test]
        fn delta_min_closed_forms(ex in 0.0f64..0.5, eps in 0.0f64..0.1) {
            proptest::prop_assert_eq!(delta_min(ModelKind::Sync, ex, 0.0, eps, 0, EtaKappa::Infinite).unwrap(), 2.0 * ex + 2.0 * eps);
            proptest::prop_assert_eq!(delta_min(ModelKind::MsgLoss, 0.0, ex, eps, 0, EtaKappa::Infinite).unwrap(), 3.0 * eps + 2.0 * ex);
        }

        #[test]
        fn isolated_unique_bound_below_unique_bound(ex in 0.0f64..=1.0, d in 1u32..30) {
            proptest::prop_assert!(ey_iso(ex, d) <= ex * (1.0 - ex) + 1e-15);
        }
    }
}
