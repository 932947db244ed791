//! Replacement of blocks from uniquely successful rounds.
//!
//! A block `B` at height `h` from a round with `Y = 1` (`Y* = 1` when
//! messages are lost) is replaced when some honest party adopts a chain whose
//! block at height `h` is not `B`. Only the first replacement is recorded.
//! The replacing path is the adopted chain above its common ancestor with `B`.

use serde::{Deserialize, Serialize};

use crate::chain::{BlockRef, ChainStore};
use crate::error::Result;
use crate::metrics::indicators::extract_indicators;
use crate::model::{Creator, PartyId};
use crate::view::ExecutionView;

/// How a replacement came about, following the four ways a uniquely
/// successful block can be displaced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplacementCase {
    /// The block at `h` is adversarial and was mined no later than `B`.
    Precomputed,
    /// Honest blocks up to `h`, extended by the adversary above it.
    OffChainThenAdversary,
    /// An adversarial block at or below `h`, mined after `B`.
    AdversarialFork,
    /// No adversarial block on the replacing path.
    HonestOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub round: u64,
    pub block: BlockRef,
    pub height: u64,
    pub replaced_round: u64,
    pub party: PartyId,
    pub head: BlockRef,
    /// The block now at height `h` was mined by the adversary.
    pub at_height_adversarial: bool,
    pub case: ReplacementCase,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplacementReport {
    pub unique_rounds: u64,
    pub replacements: Vec<Replacement>,
}

impl ReplacementReport {
    pub fn count(&self, case: ReplacementCase) -> u64 {
        self.replacements.iter().filter(|r| r.case == case).count() as u64
    }
}

struct Watched {
    round: u64,
    block: BlockRef,
    height: u64,
}

fn classify(store: &ChainStore, w: &Watched, head: BlockRef) -> Result<(bool, ReplacementCase)> {
    let at_h = store.ancestor_at(head, w.height)?;
    let fork = store.height(store.common_ancestor(head, w.block)?)?;
    let (mut low, mut high) = (false, false);
    let mut cur = head;
    loop {
        let b = store.get(cur)?;
        if b.height <= fork {
            break;
        }
        if b.creator == Creator::Adversary {
            if b.height <= w.height {
                low = true;
            } else {
                high = true;
            }
        }
        cur = b.parent.expect("blocks above the fork have parents");
    }
    let at = store.get(at_h)?;
    let at_adv = at.creator == Creator::Adversary;
    let case = if low {
        if at_adv && at.created_round <= w.round {
            ReplacementCase::Precomputed
        } else {
            ReplacementCase::AdversarialFork
        }
    } else if high {
        ReplacementCase::OffChainThenAdversary
    } else {
        ReplacementCase::HonestOnly
    };
    Ok((at_adv, case))
}

pub fn block_replacements(view: &ExecutionView) -> Result<ReplacementReport> {
    let rows = extract_indicators(view)?;
    let star = !view.params.b_flag;
    let store = &view.store;
    let mut report = ReplacementReport::default();
    let mut watched: Vec<Watched> = Vec::new();
    for (rec, row) in view.rounds.iter().zip(&rows) {
        if if star { row.y_star } else { row.y } {
            // the on-longest success is the highest one
            let mut best: Option<(u64, BlockRef)> = None;
            for &(_, b) in &rec.honest_successes {
                let h = store.height(b)?;
                if best.is_none_or(|(bh, _)| h > bh) {
                    best = Some((h, b));
                }
            }
            if let Some((height, block)) = best {
                report.unique_rounds += 1;
                watched.push(Watched { round: rec.round, block, height });
            }
        }
        for &(party, head) in &rec.head_updates {
            let hh = store.height(head)?;
            let mut i = 0;
            while i < watched.len() {
                let w = &watched[i];
                if w.height <= hh && store.ancestor_at(head, w.height)? != w.block {
                    let (at_height_adversarial, case) = classify(store, w, head)?;
                    report.replacements.push(Replacement {
                        round: w.round,
                        block: w.block,
                        height: w.height,
                        replaced_round: rec.round,
                        party,
                        head,
                        at_height_adversarial,
                        case,
                    });
                    watched.swap_remove(i);
                } else {
                    i += 1;
                }
            }
        }
    }
    report.replacements.sort_by_key(|r| (r.replaced_round, r.round));
    Ok(report)
}
