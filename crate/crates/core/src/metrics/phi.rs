//! Empirical frequency of off-longest parties out-racing the longest-chain set.
//!
//! A race starts at a round where the longest public chain just grew to
//! length `L` and some honest party is left one block behind (it held or
//! received nothing longer than `L − 1`). During the race an honest success
//! extending a chain of length `L` that existed at the start is an on-chain
//! success and ends the race as a loss. Any other honest success is an
//! off-chain one; two of them before any on-chain success is a win. Races do
//! not overlap, and a race unresolved at the end of a view is dropped.

use serde::{Deserialize, Serialize};

use crate::chain::ChainStore;
use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelParams};
use crate::stats::proportion_se;
use crate::view::{ExecutionView, HeadTracker, RoundRecord, RoundSink};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhiEstimate {
    pub races: u64,
    pub wins: u64,
    /// `None` when no race qualified.
    pub estimate: Option<f64>,
    pub standard_error: Option<f64>,
}

impl PhiEstimate {
    pub fn merge(&mut self, other: &PhiEstimate) {
        self.races += other.races;
        self.wins += other.wins;
        self.finalize();
    }

    fn finalize(&mut self) {
        if self.races == 0 {
            self.estimate = None;
            self.standard_error = None;
        } else {
            self.estimate = Some(self.wins as f64 / self.races as f64);
            self.standard_error = Some(proportion_se(self.wins, self.races));
        }
    }
}

struct Race {
    start_round: u64,
    length: u64,
    off_successes: u32,
}

pub struct PhiTracker {
    params: ModelParams,
    heads: HeadTracker,
    /// Heights each honest party will have available at the start of the next round.
    reach: Vec<u64>,
    l_max: u64,
    prev_l_max: u64,
    race: Option<Race>,
    result: PhiEstimate,
}

impl PhiTracker {
    pub fn new(params: &ModelParams) -> Result<Self> {
        if params.kind() != ModelKind::MsgLoss {
            return Err(Error::Precondition("φ races are defined for the message-loss model".into()));
        }
        Ok(PhiTracker {
            params: params.clone(),
            heads: HeadTracker::new(params.n),
            reach: vec![0; params.n as usize],
            l_max: 0,
            prev_l_max: 0,
            race: None,
            result: PhiEstimate::default(),
        })
    }

    pub fn finish(mut self) -> PhiEstimate {
        self.result.finalize();
        self.result
    }
}

impl RoundSink for PhiTracker {
    fn on_round(&mut self, rec: &RoundRecord, store: &ChainStore) -> Result<()> {
        let round = rec.round;
        if self.race.is_none() && self.l_max > self.prev_l_max {
            let behind = self.params.honest_parties().any(|p| self.reach[p as usize] + 1 == self.l_max);
            if behind {
                self.race = Some(Race { start_round: round, length: self.l_max, off_successes: 0 });
            }
        }

        if let Some(race) = &mut self.race {
            let mut on = false;
            for &(_, b) in &rec.honest_successes {
                let parent = store.get(b)?.parent.expect("honest blocks have parents");
                let pb = store.get(parent)?;
                if pb.height == race.length && pb.created_round < race.start_round {
                    on = true;
                } else {
                    race.off_successes += 1;
                }
            }
            if on {
                self.result.races += 1;
                self.race = None;
            } else if race.off_successes >= 2 {
                self.result.races += 1;
                self.result.wins += 1;
                self.race = None;
            }
        }

        self.heads.apply(rec);
        self.prev_l_max = self.l_max;
        let mut delivered_max = 0;
        for &b in &rec.delivered {
            delivered_max = delivered_max.max(store.height(b)?);
        }
        for party in self.params.honest_parties() {
            let i = party as usize;
            let mut h = store.height(self.heads.heads[i])?;
            if !rec.delivered_to(party, &self.params).is_empty() {
                h = h.max(delivered_max);
            }
            self.reach[i] = h;
            self.l_max = self.l_max.max(h);
        }
        self.l_max = self.l_max.max(delivered_max);
        Ok(())
    }
}

pub fn phi_estimate(views: &[ExecutionView]) -> Result<PhiEstimate> {
    let mut total = PhiEstimate::default();
    for view in views {
        let mut tracker = PhiTracker::new(&view.params)?;
        view.replay(&mut tracker)?;
        total.merge(&tracker.finish());
    }
    total.finalize();
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::AdversaryConfig;
    use crate::execution::{run_execution, ExecutionConfig};

    fn view(s: f64, seed: u64, rounds: u64) -> ExecutionView {
        let params = ModelParams::sync(30, 0, s, 0.004).with_message_loss();
        run_execution(&ExecutionConfig::new(params, rounds, AdversaryConfig::HonestMirror, seed)).unwrap()
    }

    #[test]
    fn no_sleep_no_races() {
        let est = phi_estimate(&[view(0.0, 1, 3000)]).unwrap();
        assert_eq!(est.races, 0);
        assert_eq!(est.estimate, None);
    }

    #[test]
    fn wrong_model_rejected() {
        let v = run_execution(&ExecutionConfig::new(ModelParams::sync(3, 0, 0.1, 0.1), 10, AdversaryConfig::HonestMirror, 1)).unwrap();
        assert!(phi_estimate(&[v]).is_err());
    }

    #[test]
    fn estimate_is_a_proportion_and_below_vacuous_bound() {
        let est = phi_estimate(&[view(0.5, 2, 20_000), view(0.5, 3, 20_000)]).unwrap();
        assert!(est.races > 50, "{est:?}");
        let phi = est.estimate.unwrap();
        assert!((0.0..=1.0).contains(&phi));
        assert!(est.wins <= est.races);
    }
}
