//! Chain growth, common prefix and chain quality over recorded executions.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::chain::{BlockRef, ChainStore};
use crate::error::{Error, Result};
use crate::model::{Creator, ModelParams, PartyId, Status};
use crate::view::{ExecutionView, HeadTracker, RoundRecord, RoundSink};

/// Interval convention for chain growth.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthConvention {
    /// `window + 1` rounds must add `τ·window` blocks.
    #[default]
    Extended,
    /// `window` rounds must add `τ·window` blocks.
    Original,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthWitness {
    pub party: PartyId,
    pub start_round: u64,
    pub end_round: u64,
    pub growth: u64,
    pub required: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainGrowthResult {
    pub pass: bool,
    pub intervals: u64,
    pub violations: u64,
    /// Interval with the smallest growth relative to the requirement.
    pub witness: Option<GrowthWitness>,
}

/// Streaming chain-growth checker. A party's chain at round `r` is its head
/// after its activation in `r`.
pub struct ChainGrowthTracker {
    params: ModelParams,
    tau: f64,
    window: u64,
    span: usize,
    heads: HeadTracker,
    /// Per honest party, heights at alert rounds in a ring of `span` slots.
    ring: Vec<Vec<Option<u64>>>,
    result: ChainGrowthResult,
    worst_margin: f64,
}

impl ChainGrowthTracker {
    pub fn new(params: &ModelParams, tau: f64, window: u64, convention: GrowthConvention) -> Result<Self> {
        if window == 0 {
            return Err(Error::Precondition("chain-growth window must be at least 1".into()));
        }
        let span = match convention {
            GrowthConvention::Extended => window + 1,
            GrowthConvention::Original => window,
        } as usize;
        Ok(ChainGrowthTracker {
            params: params.clone(),
            tau,
            window,
            span,
            heads: HeadTracker::new(params.n),
            ring: vec![vec![None; span]; params.n as usize],
            result: ChainGrowthResult { pass: true, intervals: 0, violations: 0, witness: None },
            worst_margin: f64::INFINITY,
        })
    }

    pub fn finish(self) -> ChainGrowthResult {
        self.result
    }
}

impl RoundSink for ChainGrowthTracker {
    fn on_round(&mut self, rec: &RoundRecord, store: &ChainStore) -> Result<()> {
        self.heads.apply(rec);
        let required = self.tau * self.window as f64;
        let slot = (rec.round as usize) % self.span;
        for party in self.params.honest_parties() {
            let i = party as usize;
            let now = if rec.status(party, &self.params) == Status::Alert {
                Some(store.height(self.heads.heads[i])?)
            } else {
                None
            };
            // The slot about to be overwritten holds round `rec.round − span`,
            // so the interval start is one slot further ahead.
            let start_slot = (slot + 1) % self.span;
            let start_round = rec.round + 1;
            if let (Some(h1), Some(h0)) = (now, self.ring[i][start_slot]) {
                if start_round > self.span as u64 {
                    let start_round = start_round - self.span as u64;
                    let growth = h1.saturating_sub(h0);
                    self.result.intervals += 1;
                    let margin = growth as f64 - required;
                    let violated = (growth as f64) < required;
                    if violated {
                        self.result.violations += 1;
                        self.result.pass = false;
                    }
                    if margin < self.worst_margin {
                        self.worst_margin = margin;
                        self.result.witness =
                            Some(GrowthWitness { party, start_round, end_round: rec.round, growth, required });
                    }
                }
            }
            self.ring[i][slot] = now;
        }
        Ok(())
    }
}

pub fn chain_growth_check(view: &ExecutionView, tau: f64, window: u64, convention: GrowthConvention) -> Result<ChainGrowthResult> {
    let mut t = ChainGrowthTracker::new(&view.params, tau, window, convention)?;
    view.replay(&mut t)?;
    Ok(t.finish())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Holding {
    pub party: PartyId,
    pub round: u64,
}

/// First and last round at which an alert honest party held each head.
/// Sleepy parties adopt nothing, so their stale chains are not recorded.
pub struct HeadHistory {
    params: ModelParams,
    heads: HeadTracker,
    held: HashMap<BlockRef, (Holding, Holding)>,
}

impl HeadHistory {
    pub fn new(params: &ModelParams) -> Self {
        HeadHistory { params: params.clone(), heads: HeadTracker::new(params.n), held: HashMap::new() }
    }

    /// `(head, first holding, last holding)` sorted by first holding round.
    pub fn finish(self) -> Vec<(BlockRef, Holding, Holding)> {
        let mut out: Vec<_> = self.held.into_iter().map(|(b, (f, l))| (b, f, l)).collect();
        out.sort_by_key(|(b, f, _)| (f.round, b.0));
        out
    }
}

impl RoundSink for HeadHistory {
    fn on_round(&mut self, rec: &RoundRecord, _store: &ChainStore) -> Result<()> {
        self.heads.apply(rec);
        for party in self.params.honest_parties() {
            if rec.status(party, &self.params) != Status::Alert {
                continue;
            }
            let at = Holding { party, round: rec.round };
            self.held
                .entry(self.heads.heads[party as usize])
                .and_modify(|(_, last)| *last = at)
                .or_insert((at, at));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrefixWitness {
    pub earlier: Holding,
    pub earlier_head: BlockRef,
    pub later: Holding,
    pub later_head: BlockRef,
    /// Blocks of the earlier chain beyond the common ancestor.
    pub depth: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommonPrefixResult {
    pub pass: bool,
    pub heads: u64,
    pub violations: u64,
    /// Deepest violation found.
    pub witness: Option<PrefixWitness>,
}

/// Checks every pair of held chains `(C1 at r1, C2 at r2)` with `r1 ≤ r2`.
/// Each distinct head is checked once, over the widest holding interval.
pub fn common_prefix_from_history(store: &ChainStore, history: &[(BlockRef, Holding, Holding)], k: u64) -> Result<CommonPrefixResult> {
    let mut res = CommonPrefixResult { pass: true, heads: history.len() as u64, violations: 0, witness: None };
    for &(h1, first1, _) in history {
        let len1 = store.height(h1)?;
        if len1 <= k {
            continue;
        }
        let anchor = store.ancestor_at(h1, len1 - k)?;
        for &(h2, _, last2) in history {
            if last2.round < first1.round || store.is_ancestor(anchor, h2)? {
                continue;
            }
            let depth = len1 - store.height(store.common_ancestor(h1, h2)?)?;
            res.pass = false;
            res.violations += 1;
            if res.witness.is_none_or(|w| depth > w.depth) {
                res.witness = Some(PrefixWitness { earlier: first1, earlier_head: h1, later: last2, later_head: h2, depth });
            }
        }
    }
    Ok(res)
}

pub fn common_prefix_check(view: &ExecutionView, k: u64) -> Result<CommonPrefixResult> {
    let mut hist = HeadHistory::new(&view.params);
    view.replay(&mut hist)?;
    common_prefix_from_history(&view.store, &hist.finish(), k)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityWitness {
    pub party: PartyId,
    /// Heights of the first and last block of the window.
    pub from_height: u64,
    pub to_height: u64,
    pub adversarial: u64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainQualityResult {
    pub pass: bool,
    /// Every honest chain was shorter than the window.
    pub vacuous: bool,
    pub windows: u64,
    pub violations: u64,
    pub max_ratio: f64,
    /// Window with the highest adversarial ratio.
    pub witness: Option<QualityWitness>,
}

pub fn chain_quality_of_heads(store: &ChainStore, params: &ModelParams, heads: &[BlockRef], mu: f64, ell: u64) -> Result<ChainQualityResult> {
    if ell == 0 {
        return Err(Error::Precondition("chain-quality window must be at least 1".into()));
    }
    let mut res = ChainQualityResult { pass: true, vacuous: true, windows: 0, violations: 0, max_ratio: 0.0, witness: None };
    let mut seen = Vec::new();
    for party in params.honest_parties() {
        let head = heads[party as usize];
        if seen.contains(&head) {
            continue;
        }
        seen.push(head);
        let chain = store.chain_of(head)?;
        if (chain.len() as u64) < ell {
            continue;
        }
        res.vacuous = false;
        let adv: Vec<u64> = chain
            .iter()
            .map(|&b| store.get(b).map(|blk| (blk.creator == Creator::Adversary) as u64))
            .collect::<Result<_>>()?;
        let ell = ell as usize;
        let mut count: u64 = adv[..ell].iter().sum();
        for start in 0..=chain.len() - ell {
            if start > 0 {
                count = count + adv[start + ell - 1] - adv[start - 1];
            }
            res.windows += 1;
            let ratio = count as f64 / ell as f64;
            if ratio > mu {
                res.pass = false;
                res.violations += 1;
            }
            if res.witness.is_none() || ratio > res.max_ratio {
                res.max_ratio = ratio;
                res.witness = Some(QualityWitness {
                    party,
                    from_height: start as u64 + 1,
                    to_height: (start + ell) as u64,
                    adversarial: count,
                    ratio,
                });
            }
        }
    }
    Ok(res)
}

/// Windows of `ell` consecutive blocks over every honest party's final chain.
pub fn chain_quality_check(view: &ExecutionView, mu: f64, ell: u64) -> Result<ChainQualityResult> {
    chain_quality_of_heads(&view.store, &view.params, &view.final_heads(), mu, ell)
}
