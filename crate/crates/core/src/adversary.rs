//! Adversary strategies driven through corrupted-party activation slots.
//!
//! The adversary is activated once for every corrupted party slot of the
//! round-robin, and once more after `P_n` (the rushing activation, where it
//! reads the whole round's traffic before completing). Its `t·q` query pool
//! is spent in full at the first activation of each round.

use serde::{Deserialize, Serialize};

use crate::chain::{BlockRef, ChainStore, NewBlock};
use crate::diffuse::DiffuseState;
use crate::error::{Error, Result};
use crate::model::{Creator, ModelParams, PartyId, Sender};
use crate::oracle::{Caller, OracleState, QueryInput};
use crate::view::ExecutionView;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AdversaryConfig {
    /// Behaves like `t` always-alert honest parties.
    HonestMirror,
    /// Mines privately and releases a strictly longer chain right after an
    /// honest success.
    Withhold,
    /// Forks `fork_depth` blocks below the public tip and releases the branch
    /// once it is strictly longer; restarts when it trails by more than
    /// `give_up` blocks (default `2 · fork_depth`).
    PrefixFork {
        fork_depth: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        give_up: Option<u64>,
    },
}

impl AdversaryConfig {
    pub fn name(&self) -> &'static str {
        match self {
            AdversaryConfig::HonestMirror => "honest-mirror",
            AdversaryConfig::Withhold => "withhold",
            AdversaryConfig::PrefixFork { .. } => "prefix-fork",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Slot(PartyId),
    Rush,
}

/// Mutable world the adversary acts on during one activation.
pub struct AdversaryCtx<'a> {
    pub round: u64,
    pub params: &'a ModelParams,
    pub store: &'a mut ChainStore,
    pub oracle: &'a mut OracleState,
    pub diffuse: &'a mut DiffuseState,
    /// Blocks the adversary creates are appended here, withheld or not.
    pub successes: &'a mut Vec<BlockRef>,
}

#[derive(Clone, Debug)]
struct PrivateFork {
    tip: BlockRef,
}

#[derive(Clone, Debug)]
pub struct AdversaryState {
    strategy: AdversaryConfig,
    /// Longest chain diffused by anyone so far (first seen wins ties).
    public_best: BlockRef,
    private_tip: BlockRef,
    withheld: bool,
    fork: Option<PrivateFork>,
    peeked: usize,
    mined_this_round: bool,
    nonce: u32,
}

impl AdversaryState {
    pub fn new(strategy: AdversaryConfig) -> Self {
        AdversaryState {
            strategy,
            public_best: BlockRef::GENESIS,
            private_tip: BlockRef::GENESIS,
            withheld: false,
            fork: None,
            peeked: 0,
            mined_this_round: false,
            nonce: 0,
        }
    }

    pub fn strategy(&self) -> &AdversaryConfig {
        &self.strategy
    }

    pub fn public_best(&self) -> BlockRef {
        self.public_best
    }

    /// Heads of chains mined but not yet released.
    pub fn private_heads(&self) -> Vec<BlockRef> {
        match (&self.strategy, &self.fork) {
            (AdversaryConfig::Withhold, _) if self.withheld => vec![self.private_tip],
            (AdversaryConfig::PrefixFork { .. }, Some(f)) => vec![f.tip],
            _ => Vec::new(),
        }
    }

    pub fn begin_round(&mut self) {
        self.peeked = 0;
        self.mined_this_round = false;
        self.nonce = 0;
    }

    /// One adversary activation: a corrupted party's slot or the closing
    /// rushing activation, after which the adversary is marked complete.
    pub fn step(&mut self, activation: Activation, ctx: &mut AdversaryCtx<'_>) -> Result<()> {
        let peek = ctx.diffuse.adversary_peek();
        let honest_success_seen = peek.iter().any(|(s, _)| matches!(s, Sender::Party(_)));
        for &(_, payload) in &peek[self.peeked..] {
            if ctx.store.height(payload)? > ctx.store.height(self.public_best)? {
                self.public_best = payload;
            }
        }
        self.peeked = peek.len();

        if !self.mined_this_round && matches!(activation, Activation::Slot(_)) {
            self.mined_this_round = true;
            self.mine(ctx)?;
        }

        if activation == Activation::Rush {
            self.maybe_release(ctx, honest_success_seen)?;
            ctx.diffuse.mark_adversary_complete();
        }
        Ok(())
    }

    fn mine(&mut self, ctx: &mut AdversaryCtx<'_>) -> Result<()> {
        let public_height = ctx.store.height(self.public_best)?;
        match self.strategy.clone() {
            AdversaryConfig::HonestMirror => {
                for _ in 0..ctx.params.t {
                    for _ in 0..ctx.params.q {
                        if let Some(b) = self.query(ctx, self.public_best)? {
                            ctx.diffuse.send(Sender::Adversary, Some(b))?;
                            break;
                        }
                    }
                }
            }
            AdversaryConfig::Withhold => {
                let private_height = ctx.store.height(self.private_tip)?;
                if private_height < public_height || !self.withheld {
                    self.private_tip = self.public_best;
                    self.withheld = false;
                }
                let tip = self.mine_chained(ctx, self.private_tip)?;
                if tip != self.private_tip {
                    self.private_tip = tip;
                    self.withheld = true;
                }
            }
            AdversaryConfig::PrefixFork { fork_depth, give_up } => {
                let give_up = give_up.unwrap_or(2 * fork_depth);
                let restart = match &self.fork {
                    None => true,
                    Some(f) => public_height.saturating_sub(ctx.store.height(f.tip)?) > give_up,
                };
                if restart {
                    let base = ctx.store.ancestor_at(self.public_best, public_height.saturating_sub(fork_depth))?;
                    self.fork = Some(PrivateFork { tip: base });
                }
                let tip = self.fork.as_ref().map(|f| f.tip).expect("fork set above");
                let tip = self.mine_chained(ctx, tip)?;
                self.fork = Some(PrivateFork { tip });
            }
        }
        Ok(())
    }

    fn maybe_release(&mut self, ctx: &mut AdversaryCtx<'_>, honest_success_seen: bool) -> Result<()> {
        let public_height = ctx.store.height(self.public_best)?;
        match self.strategy {
            AdversaryConfig::HonestMirror => {}
            AdversaryConfig::Withhold => {
                if self.withheld && honest_success_seen && ctx.store.height(self.private_tip)? > public_height {
                    ctx.diffuse.send(Sender::Adversary, Some(self.private_tip))?;
                    self.public_best = self.private_tip;
                    self.withheld = false;
                }
            }
            AdversaryConfig::PrefixFork { .. } => {
                if let Some(f) = &self.fork {
                    if ctx.store.height(f.tip)? > public_height {
                        ctx.diffuse.send(Sender::Adversary, Some(f.tip))?;
                        self.public_best = f.tip;
                        self.fork = None;
                    }
                }
            }
        }
        Ok(())
    }

    /// Spends the whole remaining pool extending `tip`, each success becoming
    /// the parent of the next attempt. Returns the new tip.
    fn mine_chained(&mut self, ctx: &mut AdversaryCtx<'_>, mut tip: BlockRef) -> Result<BlockRef> {
        while ctx.oracle.remaining(Caller::Adversary) > 0 {
            if let Some(b) = self.query(ctx, tip)? {
                tip = b;
            }
        }
        Ok(tip)
    }

    fn query(&mut self, ctx: &mut AdversaryCtx<'_>, parent: BlockRef) -> Result<Option<BlockRef>> {
        if ctx.oracle.remaining(Caller::Adversary) == 0 {
            return Ok(None);
        }
        let input = QueryInput {
            parent_id: ctx.store.get(parent)?.id,
            creator: Creator::Adversary,
            round: ctx.round,
            nonce: self.nonce,
        };
        self.nonce += 1;
        let answer = ctx.oracle.calc_query(Caller::Adversary, input)?;
        if !answer.success {
            return Ok(None);
        }
        let b = ctx.store.insert(NewBlock {
            parent,
            id: answer.sample,
            creator: Creator::Adversary,
            created_round: ctx.round,
            nonce: input.nonce,
        })?;
        ctx.successes.push(b);
        Ok(Some(b))
    }
}

/// Adversarial PoW successes in `round` (withheld blocks included).
pub fn z_count(view: &ExecutionView, round: u64) -> Result<usize> {
    view.round(round).map(|r| r.adversary_successes.len())
}

impl From<&AdversaryState> for AdversaryConfig {
    fn from(s: &AdversaryState) -> Self {
        s.strategy.clone()
    }
}

impl std::str::FromStr for AdversaryConfig {
    type Err = Error;

    /// Parses `honest-mirror`, `withhold` or `prefix-fork:<depth>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "honest-mirror" => Ok(AdversaryConfig::HonestMirror),
            None if s == "withhold" => Ok(AdversaryConfig::Withhold),
            Some(("prefix-fork", depth)) => depth
                .parse()
                .map(|fork_depth| AdversaryConfig::PrefixFork { fork_depth, give_up: None })
                .map_err(|_| Error::Config(format!("bad fork depth `{depth}`"))),
            _ => Err(Error::Config(format!("unknown adversary strategy `{s}`"))),
        }
    }
}
