//! Per-round random variables extracted from recorded rounds.
//!
//! `C_i` is the set of longest chains at the start of round `i`: chains whose
//! length equals the longest honest head or delivered payload seen up to the
//! end of round `i − 1`. A party's chain at round `i` is the head it mines on
//! (after adopting deliveries); a sleepy party's is the head it holds.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::chain::{BlockRef, ChainStore};
use crate::error::Result;
use crate::model::{ModelParams, Status};
use crate::view::{ExecutionView, HeadTracker, RoundRecord, RoundSink};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundIndicators {
    pub round: u64,
    pub x: bool,
    pub y: bool,
    pub z: u32,
    pub x_iso: bool,
    pub y_iso: bool,
    pub x_star: bool,
    pub y_star: bool,
    /// Some honest success came from a party whose chain was not in `C_i`.
    pub x_tilde: bool,
    pub n_alert: u32,
    pub n_star_alert: u32,
    /// Honest parties, alert or not, whose chain is in `C_i`.
    pub n_on_longest: u32,
}

pub const CSV_HEADER: &str = "round,x,y,z,x_iso,y_iso,x_star,y_star,n_alert,n_star_alert,x_tilde,n_on_longest";

impl RoundIndicators {
    pub fn csv_row(&self) -> String {
        let b = |v: bool| v as u8;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.round,
            b(self.x),
            b(self.y),
            self.z,
            b(self.x_iso),
            b(self.y_iso),
            b(self.x_star),
            b(self.y_star),
            self.n_alert,
            self.n_star_alert,
            b(self.x_tilde),
            self.n_on_longest
        )
    }
}

pub fn write_csv<W: Write>(mut out: W, rows: &[RoundIndicators]) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Streaming extractor; isolation flags are filled in by [`finish`](Self::finish).
pub struct IndicatorExtractor {
    params: ModelParams,
    heads: HeadTracker,
    /// Length of the longest public chain seen so far.
    l_max: u64,
    rows: Vec<RoundIndicators>,
}

impl IndicatorExtractor {
    pub fn new(params: &ModelParams) -> Self {
        IndicatorExtractor { params: params.clone(), heads: HeadTracker::new(params.n), l_max: 0, rows: Vec::new() }
    }

    /// Length of the chains in `C_i` for the next round to be processed.
    pub fn longest(&self) -> u64 {
        self.l_max
    }

    pub fn finish(mut self) -> Vec<RoundIndicators> {
        apply_isolation(&mut self.rows, self.params.delta_net);
        self.rows
    }
}

impl RoundSink for IndicatorExtractor {
    fn on_round(&mut self, rec: &RoundRecord, store: &ChainStore) -> Result<()> {
        let params = &self.params;
        let mut row = RoundIndicators {
            round: rec.round,
            x: !rec.honest_successes.is_empty(),
            y: rec.honest_successes.len() == 1,
            z: rec.adversary_successes.len() as u32,
            n_alert: rec.n_alert(params),
            ..RoundIndicators::default()
        };

        let start_heads = self.heads.heads.clone();
        self.heads.apply(rec);
        let mut on_longest_success = 0usize;
        for party in params.honest_parties() {
            let i = party as usize;
            let status = rec.status(party, params);
            let success = rec.honest_successes.iter().find(|(p, _)| *p == party).map(|&(_, b)| b);
            let chain = match (status, success) {
                (Status::Alert, Some(b)) => store.get(b)?.parent.unwrap_or(BlockRef::GENESIS),
                (Status::Alert, None) => self.heads.heads[i],
                _ => start_heads[i],
            };
            let on_longest = store.height(chain)? == self.l_max;
            row.n_on_longest += on_longest as u32;
            if status == Status::Alert {
                row.n_star_alert += on_longest as u32;
            }
            if success.is_some() {
                if on_longest {
                    on_longest_success += 1;
                } else {
                    row.x_tilde = true;
                }
            }
        }
        row.x_star = on_longest_success > 0;
        row.y_star = row.y && on_longest_success == 1;

        for &(_, h) in &rec.head_updates {
            self.l_max = self.l_max.max(store.height(h)?);
        }
        for &b in &rec.delivered {
            self.l_max = self.l_max.max(store.height(b)?);
        }
        self.rows.push(row);
        Ok(())
    }
}

/// Fills `x_iso`/`y_iso` from `x` and `y`; rounds outside the slice count as
/// unsuccessful.
pub fn apply_isolation(rows: &mut [RoundIndicators], delta_net: u32) {
    let w = delta_net.saturating_sub(1) as usize;
    // prefix[i] = successful rounds among rows[..i]
    let mut prefix = Vec::with_capacity(rows.len() + 1);
    prefix.push(0usize);
    for r in rows.iter() {
        prefix.push(prefix.last().unwrap() + r.x as usize);
    }
    let count = |lo: usize, hi: usize| prefix[hi] - prefix[lo];
    let n = rows.len();
    for (i, row) in rows.iter_mut().enumerate() {
        let before = count(i.saturating_sub(w), i);
        let after = count((i + 1).min(n), (i + 1 + w).min(n));
        row.x_iso = row.x && before == 0;
        row.y_iso = row.y && before == 0 && after == 0;
    }
}

pub fn extract_indicators(view: &ExecutionView) -> Result<Vec<RoundIndicators>> {
    let mut ex = IndicatorExtractor::new(&view.params);
    view.replay(&mut ex)?;
    Ok(ex.finish())
}

/// Sums of each variable over a slice of rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sums {
    pub rounds: u64,
    pub x: u64,
    pub y: u64,
    pub z: u64,
    pub x_iso: u64,
    pub y_iso: u64,
    pub x_star: u64,
    pub y_star: u64,
}

impl Sums {
    pub fn of(rows: &[RoundIndicators]) -> Self {
        rows.iter().fold(Sums::default(), |mut s, r| {
            s.rounds += 1;
            s.x += r.x as u64;
            s.y += r.y as u64;
            s.z += r.z as u64;
            s.x_iso += r.x_iso as u64;
            s.y_iso += r.y_iso as u64;
            s.x_star += r.x_star as u64;
            s.y_star += r.y_star as u64;
            s
        })
    }
}
