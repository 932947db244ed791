//! Typical-execution predicate and the per-model relation clauses a)–e).

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::bounds::RelationExpectations;
use crate::error::{Error, Result};
use crate::metrics::bad_events::BadEvents;
use crate::metrics::indicators::{RoundIndicators, Sums};
use crate::model::{ModelKind, ModelParams};

/// Variables whose concentration defines a typical window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    X,
    Y,
    Z,
    XIso,
    YIso,
    XStar,
    YStar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "variable")]
pub enum TypicalClause {
    Lower(Variable),
    Upper(Variable),
    BadEvents,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypicalOutcome {
    pub typical: bool,
    pub failed: Option<TypicalClause>,
}

pub fn family(kind: ModelKind) -> [Variable; 3] {
    match kind {
        ModelKind::Sync => [Variable::X, Variable::Y, Variable::Z],
        ModelKind::Delay => [Variable::XIso, Variable::YIso, Variable::Z],
        ModelKind::MsgLoss => [Variable::XStar, Variable::YStar, Variable::Z],
    }
}

impl Sums {
    pub fn get(&self, v: Variable) -> u64 {
        match v {
            Variable::X => self.x,
            Variable::Y => self.y,
            Variable::Z => self.z,
            Variable::XIso => self.x_iso,
            Variable::YIso => self.y_iso,
            Variable::XStar => self.x_star,
            Variable::YStar => self.y_star,
        }
    }
}

impl RelationExpectations {
    /// Per-round mean of a variable.
    pub fn get(&self, v: Variable) -> f64 {
        match v {
            Variable::X => self.ex,
            Variable::Y => self.ey,
            Variable::Z => self.ez,
            Variable::XIso => self.ex_iso,
            Variable::YIso => self.ey_iso,
            Variable::XStar => self.ex_star,
            Variable::YStar => self.ey_star,
        }
    }
}

fn slice(rows: &[RoundIndicators], s: &Range<usize>) -> Result<Sums> {
    rows.get(s.clone()).map(Sums::of).ok_or_else(|| Error::Precondition(format!("window {s:?} outside {} rounds", rows.len())))
}

/// `(1−ε)E[V(S)] < V(S) < (1+ε)E[V(S)]` for the model's family and no bad
/// events. A variable with zero expectation must sum to zero.
pub fn typical_check(
    rows: &[RoundIndicators],
    s: Range<usize>,
    params: &ModelParams,
    exp: &RelationExpectations,
    bad: &BadEvents,
) -> Result<TypicalOutcome> {
    let len = s.len() as u64;
    if len < params.eta_kappa {
        return Err(Error::Precondition(format!("window of {len} rounds is shorter than ηκ = {}", params.eta_kappa)));
    }
    let sums = slice(rows, &s)?;
    let eps = params.epsilon;
    for v in family(params.kind()) {
        let e = exp.get(v) * len as f64;
        let got = sums.get(v) as f64;
        if e == 0.0 {
            if got != 0.0 {
                return Ok(TypicalOutcome { typical: false, failed: Some(TypicalClause::Upper(v)) });
            }
            continue;
        }
        if got <= (1.0 - eps) * e {
            return Ok(TypicalOutcome { typical: false, failed: Some(TypicalClause::Lower(v)) });
        }
        if got >= (1.0 + eps) * e {
            return Ok(TypicalOutcome { typical: false, failed: Some(TypicalClause::Upper(v)) });
        }
    }
    if bad.total() > 0 {
        return Ok(TypicalOutcome { typical: false, failed: Some(TypicalClause::BadEvents) });
    }
    Ok(TypicalOutcome { typical: true, failed: None })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clauses {
    pub a: bool,
    pub b: bool,
    pub c: bool,
    pub d: bool,
    pub e: bool,
}

impl Clauses {
    pub fn as_array(&self) -> [bool; 5] {
        [self.a, self.b, self.c, self.d, self.e]
    }
}

/// Strict upper bound on `Z`; with no corruption a zero count holds trivially.
fn z_below(z: u64, bound: f64, t: u32) -> bool {
    (z as f64) < bound || (t == 0 && z == 0)
}

/// Evaluates clauses a)–e) of the model's relation lemma on window `s`.
/// For the delay model `s` is `S′`; d) sums `Z` over `S′` extended by Δ
/// after it and e) by Δ on both sides.
pub fn relations_check(
    rows: &[RoundIndicators],
    s: Range<usize>,
    params: &ModelParams,
    kind: ModelKind,
    exp: &RelationExpectations,
) -> Result<Clauses> {
    let len = s.len() as u64;
    if len < params.eta_kappa {
        return Err(Error::Precondition(format!("window of {len} rounds is shorter than ηκ = {}", params.eta_kappa)));
    }
    let sums = slice(rows, &s)?;
    let n = len as f64;
    let eps = params.epsilon;
    let t = params.t;
    let tf = t as f64;
    let z = sums.z;
    Ok(match kind {
        ModelKind::Sync => {
            let ex = exp.ex;
            Clauses {
                a: (1.0 - eps) * ex * n < sums.x as f64 && (sums.x as f64) < (1.0 + eps) * ex * n,
                b: (1.0 - eps) * ex * (1.0 - ex) * n < sums.y as f64,
                c: z_below(z, (1.0 + eps) * tf / exp.e_n_alert * ex / (1.0 - ex) * n, t),
                d: z_below(z, (1.0 + exp.delta / exp.sigma) * tf / exp.e_n_alert * sums.x as f64, t),
                e: z_below(z, sums.y as f64, t),
            }
        }
        ModelKind::Delay => {
            let ex = exp.ex;
            let d = params.delta_net as usize;
            let ext_d = s.start..s.end + d;
            let ext_e = s.start.checked_sub(d).ok_or_else(|| {
                Error::Precondition(format!("window {s:?} leaves no room for Δ = {d} rounds before it"))
            })?..s.end + d;
            let z_d = slice(rows, &ext_d)?.z;
            let z_e = slice(rows, &ext_e)?.z;
            let dd = params.delta_net as i32;
            Clauses {
                a: (1.0 - eps) * ex * (1.0 - ex).powi(dd - 1) * n < sums.x_iso as f64,
                b: (1.0 - eps) * ex * (1.0 - ex).powi(2 * dd - 1) * n < sums.y_iso as f64,
                c: z_below(z, (1.0 + eps) * tf / exp.e_n_alert * ex / (1.0 - ex) * n, t),
                d: z_below(z_d, (1.0 + exp.delta / (2.0 * exp.sigma_prime)) * tf / exp.e_n_alert * sums.x_iso as f64, t),
                e: z_below(z_e, sums.y_iso as f64, t),
            }
        }
        ModelKind::MsgLoss => {
            let ex = exp.ex_star;
            Clauses {
                a: (1.0 - eps) * ex * n < sums.x_star as f64,
                b: (1.0 - eps) * ex * (1.0 - ex) * n < sums.y_star as f64,
                c: z_below(z, (1.0 + eps) * tf / exp.e_n_star_alert * ex / (1.0 - ex) * n, t),
                d: z_below(z, (1.0 + exp.delta / exp.sigma_star) * tf / exp.e_n_star_alert * sums.x_star as f64, t),
                e: z_below(z, sums.y_star as f64 * (1.0 - eps) * (1.0 - exp.phi), t),
            }
        }
    })
}

/// Sliding windows of `len` rounds, `stride` apart, keeping `margin` rounds
/// free on both sides.
pub fn sample_windows(total: usize, len: usize, stride: usize, margin: usize) -> Vec<Range<usize>> {
    let stride = stride.max(1);
    let mut out = Vec::new();
    let mut start = margin;
    while len > 0 && start + len + margin <= total {
        out.push(start..start + len);
        start += stride;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{relation_expectations, BoundsOptions};

    fn rows_with(n: usize, x_every: usize, z_every: usize) -> Vec<RoundIndicators> {
        (0..n)
            .map(|i| {
                let x = i % x_every == 0;
                RoundIndicators { round: i as u64 + 1, x, y: x, x_star: x, y_star: x, x_iso: x, y_iso: x, z: (i % z_every == 0) as u32, ..Default::default() }
            })
            .collect()
    }

    fn exp_with(ex: f64, ey: f64, ez: f64) -> RelationExpectations {
        let mut e = relation_expectations(&ModelParams::sync(10, 1, 0.0, 0.01), &BoundsOptions::default()).unwrap();
        e.ex = ex;
        e.ey = ey;
        e.ez = ez;
        e
    }

    fn params(eta: u64) -> ModelParams {
        let mut p = ModelParams::sync(10, 1, 0.0, 0.01);
        p.eta_kappa = eta;
        p
    }

    #[test]
    fn exact_expectation_is_typical() {
        let rows = rows_with(100, 10, 50);
        let e = exp_with(0.1, 0.1, 0.02);
        let out = typical_check(&rows, 0..100, &params(100), &e, &BadEvents::default()).unwrap();
        assert_eq!(out, TypicalOutcome { typical: true, failed: None });
    }

    #[test]
    fn boundary_is_excluded() {
        // 128 rounds, X(S) = 10 = (1+ε)·E[X(S)] with E = 8, ε = 1/4, all exact in binary.
        let rows = rows_with(128, 13, 50);
        let mut p = params(128);
        p.epsilon = 0.25;
        let e = exp_with(0.0625, 0.0625, 0.02);
        let out = typical_check(&rows, 0..128, &p, &e, &BadEvents::default()).unwrap();
        assert_eq!(out.failed, Some(TypicalClause::Upper(Variable::X)));
        let rows = rows_with(100, 10, 50);
        let p = params(100);
        let bad = BadEvents { copies: 1, ..Default::default() };
        let out = typical_check(&rows, 0..100, &p, &exp_with(0.1, 0.1, 0.02), &bad).unwrap();
        assert_eq!(out.failed, Some(TypicalClause::BadEvents));
        assert!(typical_check(&rows, 0..50, &p, &e, &bad).is_err());
    }

    #[test]
    fn no_corruption_z_clauses_hold() {
        let rows: Vec<_> = rows_with(100, 10, 1).into_iter().map(|r| RoundIndicators { z: 0, ..r }).collect();
        let mut p = params(100);
        p.t = 0;
        let e = exp_with(0.1, 0.1, 0.0);
        for kind in [ModelKind::Sync, ModelKind::MsgLoss] {
            let c = relations_check(&rows, 0..100, &p, kind, &e).unwrap();
            assert!(c.c && c.d && c.e, "{kind}");
        }
    }

    #[test]
    fn delay_window_needs_margin() {
        let rows = rows_with(120, 10, 50);
        let mut p = params(100).with_delay(5);
        p.eta_kappa = 100;
        let e = exp_with(0.1, 0.1, 0.02);
        assert!(relations_check(&rows, 0..100, &p, ModelKind::Delay, &e).is_err());
        assert!(relations_check(&rows, 5..105, &p, ModelKind::Delay, &e).is_ok());
        assert!(relations_check(&rows, 16..116, &p, ModelKind::Delay, &e).is_err());
    }

    #[test]
    fn windows() {
        assert_eq!(sample_windows(10, 4, 2, 0), vec![0..4, 2..6, 4..8, 6..10]);
        assert_eq!(sample_windows(10, 4, 3, 1), vec![1..5, 4..8]);
        assert!(sample_windows(3, 4, 1, 0).is_empty());
    }
}
