//! Recorded executions and their line-delimited trace format.
//!
//! A trace is one JSON object per line. The first line is a header carrying
//! the tool version, config hash, seed, parameters and adversary; every
//! following line is one round:
//!
//! ```text
//! {"round":1,"status":"CAAS","blocks":[...],"heads":[[2,1]],"honest":[[2,1]],
//!  "adversary":[],"diffused":[["P2",1]],"delivered":[1]}
//! ```
//!
//! Party numbers in `heads`/`honest` are 1-based like `P_i`; block numbers
//! are arena references (`0` is genesis). `blocks` lists the blocks created in
//! that round with their oracle `id`, so a trace is enough to rebuild the view.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::adversary::AdversaryConfig;
use crate::chain::{BlockRef, ChainStore, NewBlock};
use crate::error::{Error, Result};
use crate::model::{Creator, ModelParams, PartyId, PartySet, Sender, Status};

pub const TOOL_NAME: &str = "backbone-sim";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn tool_version() -> String {
    format!("{TOOL_NAME} {TOOL_VERSION}")
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoundRecord {
    pub round: u64,
    /// Honest parties asleep this round; corrupted parties never sleep.
    pub sleepy: PartySet,
    /// Parties whose head changed, with the head held after their activation.
    pub head_updates: Vec<(PartyId, BlockRef)>,
    pub honest_successes: Vec<(PartyId, BlockRef)>,
    pub adversary_successes: Vec<BlockRef>,
    pub diffused: Vec<(Sender, BlockRef)>,
    /// Payloads written to RECEIVE strings at the end of the round.
    pub delivered: Vec<BlockRef>,
}

impl RoundRecord {
    pub fn status(&self, party: PartyId, params: &ModelParams) -> Status {
        if params.is_corrupted(party) {
            Status::Corrupted
        } else if self.sleepy.contains(party) {
            Status::Sleepy
        } else {
            Status::Alert
        }
    }

    pub fn n_alert(&self, params: &ModelParams) -> u32 {
        params.honest_count() - self.sleepy.len() as u32
    }

    /// What `party` had written to its RECEIVE string at the end of the round.
    pub fn delivered_to(&self, party: PartyId, params: &ModelParams) -> &[BlockRef] {
        match self.status(party, params) {
            Status::Alert => &self.delivered,
            Status::Sleepy if params.b_flag => &self.delivered,
            _ => &[],
        }
    }
}

/// Consumer of rounds as they are produced, for runs too long to keep whole.
pub trait RoundSink {
    fn on_round(&mut self, record: &RoundRecord, store: &ChainStore) -> Result<()>;
}

impl<S: RoundSink + ?Sized> RoundSink for &mut S {
    fn on_round(&mut self, record: &RoundRecord, store: &ChainStore) -> Result<()> {
        (**self).on_round(record, store)
    }
}

impl<A: RoundSink, B: RoundSink> RoundSink for (A, B) {
    fn on_round(&mut self, record: &RoundRecord, store: &ChainStore) -> Result<()> {
        self.0.on_round(record, store)?;
        self.1.on_round(record, store)
    }
}

impl ExecutionView {
    /// Feeds every recorded round to `sink`, against the final store.
    pub fn replay<S: RoundSink + ?Sized>(&self, sink: &mut S) -> Result<()> {
        self.rounds.iter().try_for_each(|r| sink.on_round(r, &self.store))
    }
}

#[derive(Clone, Debug)]
pub struct ExecutionView {
    pub params: ModelParams,
    pub seed: u64,
    pub adversary: AdversaryConfig,
    pub rounds: Vec<RoundRecord>,
    pub store: ChainStore,
}

impl ExecutionView {
    /// Record of a 1-based round number.
    pub fn round(&self, round: u64) -> Result<&RoundRecord> {
        round
            .checked_sub(1)
            .and_then(|i| self.rounds.get(i as usize))
            .ok_or(Error::RoundOutOfRange(round))
    }

    pub fn len(&self) -> u64 {
        self.rounds.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    /// Heads of all parties after the last round (corrupted entries stay at genesis).
    pub fn final_heads(&self) -> Vec<BlockRef> {
        let mut tracker = HeadTracker::new(self.params.n);
        self.rounds.iter().for_each(|r| tracker.apply(r));
        tracker.heads
    }

    pub fn write_trace<W: Write>(&self, out: W, config_hash: &str) -> Result<()> {
        let mut w = TraceWriter::new(out, config_hash, self.seed, self.len(), &self.params, &self.adversary)?;
        self.replay(&mut w)?;
        w.finish(&self.store)
    }

    /// Rebuilds a view from a trace, returning it with the header's config hash.
    pub fn read_trace<R: BufRead>(input: R) -> Result<(ExecutionView, String)> {
        let mut lines = input.lines();
        let header_line = lines.next().ok_or_else(|| Error::Parse("empty trace".into()))??;
        let header: TraceHeader = serde_json::from_str(&header_line).map_err(json_err)?;
        if header.kind != "header" {
            return Err(Error::Parse("first trace line must be the header".into()));
        }
        header.params.validate()?;
        let params = header.params;
        let mut store = ChainStore::new();
        let mut rounds = Vec::with_capacity(header.rounds as usize);
        let party = |p: u32| -> Result<PartyId> {
            p.checked_sub(1).filter(|&i| i < params.n).ok_or_else(|| Error::Parse(format!("bad party number {p}")))
        };
        let block = |store: &ChainStore, r: u32| -> Result<BlockRef> {
            let r = BlockRef(r);
            if store.contains(r) {
                Ok(r)
            } else {
                Err(Error::Parse(format!("reference to unknown block {r}")))
            }
        };
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let tr: TraceRound = serde_json::from_str(&line).map_err(json_err)?;
            if tr.round != rounds.len() as u64 + 1 {
                return Err(Error::Parse(format!("expected round {}, found {}", rounds.len() + 1, tr.round)));
            }
            for b in &tr.blocks {
                let r = store.insert(NewBlock {
                    parent: block(&store, b.parent)?,
                    id: b.id,
                    creator: b.creator,
                    created_round: b.round,
                    nonce: b.nonce,
                })?;
                if r.0 != b.r {
                    return Err(Error::Parse(format!("block {} out of order", b.r)));
                }
            }
            if tr.status.chars().count() != params.n as usize {
                return Err(Error::Parse(format!("round {}: status has wrong length", tr.round)));
            }
            let mut sleepy = PartySet::with_capacity(params.n);
            for (i, c) in tr.status.chars().enumerate() {
                let st = Status::from_code(c).ok_or_else(|| Error::Parse(format!("bad status `{c}`")))?;
                if (st == Status::Corrupted) != params.is_corrupted(i as u32) {
                    return Err(Error::Parse(format!("round {}: corruption does not match t", tr.round)));
                }
                if st == Status::Sleepy {
                    sleepy.insert(i as u32);
                }
            }
            rounds.push(RoundRecord {
                round: tr.round,
                sleepy,
                head_updates: tr.heads.iter().map(|&(p, h)| Ok((party(p)?, block(&store, h)?))).collect::<Result<_>>()?,
                honest_successes: tr.honest.iter().map(|&(p, h)| Ok((party(p)?, block(&store, h)?))).collect::<Result<_>>()?,
                adversary_successes: tr.adversary.iter().map(|&h| block(&store, h)).collect::<Result<_>>()?,
                diffused: tr.diffused.iter().map(|&(s, h)| Ok((s, block(&store, h)?))).collect::<Result<_>>()?,
                delivered: tr.delivered.iter().map(|&h| block(&store, h)).collect::<Result<_>>()?,
            });
        }
        let view = ExecutionView { params, seed: header.seed, adversary: header.adversary, rounds, store };
        Ok((view, header.config_hash))
    }
}

/// Streams trace lines as rounds complete.
pub struct TraceWriter<W: Write> {
    out: W,
    params: ModelParams,
    next_block: usize,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, config_hash: &str, seed: u64, rounds: u64, params: &ModelParams, adversary: &AdversaryConfig) -> Result<Self> {
        let header = TraceHeader {
            kind: "header".into(),
            tool: tool_version(),
            config_hash: config_hash.into(),
            seed,
            rounds,
            params: params.clone(),
            adversary: adversary.clone(),
        };
        serde_json::to_writer(&mut out, &header).map_err(json_err)?;
        out.write_all(b"\n")?;
        Ok(TraceWriter { out, params: params.clone(), next_block: 1 })
    }

    /// Checks that every stored block was written and flushes.
    pub fn finish(mut self, store: &ChainStore) -> Result<()> {
        if self.next_block != store.len() {
            return Err(Error::Protocol("store holds blocks outside the recorded rounds".into()));
        }
        self.out.flush()?;
        Ok(())
    }
}

impl<W: Write> RoundSink for TraceWriter<W> {
    fn on_round(&mut self, rec: &RoundRecord, store: &ChainStore) -> Result<()> {
        let mut blocks = Vec::new();
        while self.next_block < store.len() {
            let r = BlockRef(self.next_block as u32);
            let b = store.get(r)?;
            if b.created_round != rec.round {
                break;
            }
            blocks.push(TraceBlock {
                r: r.0,
                id: b.id,
                parent: b.parent.map_or(0, |p| p.0),
                creator: b.creator,
                round: b.created_round,
                nonce: b.nonce,
            });
            self.next_block += 1;
        }
        let line = TraceRound {
            round: rec.round,
            status: (0..self.params.n).map(|i| rec.status(i, &self.params).code()).collect(),
            blocks,
            heads: rec.head_updates.iter().map(|&(p, h)| (p + 1, h.0)).collect(),
            honest: rec.honest_successes.iter().map(|&(p, h)| (p + 1, h.0)).collect(),
            adversary: rec.adversary_successes.iter().map(|b| b.0).collect(),
            diffused: rec.diffused.iter().map(|&(s, b)| (s, b.0)).collect(),
            delivered: rec.delivered.iter().map(|b| b.0).collect(),
        };
        serde_json::to_writer(&mut self.out, &line).map_err(json_err)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }
}

/// Replays per-party heads round by round.
#[derive(Clone, Debug)]
pub struct HeadTracker {
    pub heads: Vec<BlockRef>,
}

impl HeadTracker {
    pub fn new(n: u32) -> Self {
        HeadTracker { heads: vec![BlockRef::GENESIS; n as usize] }
    }

    pub fn apply(&mut self, record: &RoundRecord) {
        for &(p, h) in &record.head_updates {
            self.heads[p as usize] = h;
        }
    }
}

/// Collects every round into an [`ExecutionView`].
#[derive(Default)]
pub struct Recorder {
    pub rounds: Vec<RoundRecord>,
}

impl RoundSink for Recorder {
    fn on_round(&mut self, record: &RoundRecord, _store: &ChainStore) -> Result<()> {
        self.rounds.push(record.clone());
        Ok(())
    }
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Parse(e.to_string())
}

#[derive(Serialize, Deserialize)]
struct TraceHeader {
    kind: String,
    tool: String,
    config_hash: String,
    seed: u64,
    rounds: u64,
    params: ModelParams,
    adversary: AdversaryConfig,
}

#[derive(Serialize, Deserialize)]
struct TraceBlock {
    r: u32,
    id: u64,
    parent: u32,
    creator: Creator,
    round: u64,
    nonce: u32,
}

#[derive(Serialize, Deserialize)]
struct TraceRound {
    round: u64,
    status: String,
    blocks: Vec<TraceBlock>,
    heads: Vec<(u32, u32)>,
    honest: Vec<(u32, u32)>,
    adversary: Vec<u32>,
    diffused: Vec<(Sender, u32)>,
    delivered: Vec<u32>,
}
