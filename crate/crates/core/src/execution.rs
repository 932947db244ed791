//! Control program: round-robin activation, static corruption, sleep
//! scheduling and the honest protocol step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{Activation, AdversaryConfig, AdversaryCtx, AdversaryState};
use crate::chain::{select_chain, BlockRef, ChainStore, NewBlock};
use crate::diffuse::DiffuseState;
use crate::error::{config_err, Result};
use crate::model::{Creator, ModelParams, PartyId, PartySet, Sender, Status};
use crate::oracle::{Caller, OracleState, QueryInput, TableRetention};
use crate::view::{ExecutionView, Recorder, RoundRecord, RoundSink};

/// Stream index of the sleep scheduler under a given seed.
const SLEEP_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecutionConfig {
    pub params: ModelParams,
    pub rounds: u64,
    pub adversary: AdversaryConfig,
    pub seed: u64,
    #[serde(default = "default_retention")]
    pub retention: TableRetention,
}

fn default_retention() -> TableRetention {
    TableRetention::Successes
}

impl ExecutionConfig {
    pub fn new(params: ModelParams, rounds: u64, adversary: AdversaryConfig, seed: u64) -> Self {
        ExecutionConfig { params, rounds, adversary, seed, retention: default_retention() }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.rounds == 0 {
            return Err(config_err("rounds must be at least 1"));
        }
        if let AdversaryConfig::PrefixFork { fork_depth: 0, .. } = self.adversary {
            return Err(config_err("prefix-fork depth must be at least 1"));
        }
        Ok(())
    }
}

/// Statuses fixed at the start: `P_1..P_t` corrupted, the rest honest.
pub fn register_corruptions(params: &ModelParams) -> Result<Vec<Status>> {
    if params.t >= params.n {
        return Err(config_err(format!("t = {} must be below n = {}", params.t, params.n)));
    }
    Ok((0..params.n).map(|i| if params.is_corrupted(i) { Status::Corrupted } else { Status::Alert }).collect())
}

/// Each honest party independently asleep with probability `s`.
pub fn sample_sleep<R: Rng>(honest: impl Iterator<Item = PartyId>, s: f64, rng: &mut R) -> PartySet {
    honest.filter(|_| rng.random_bool(s)).collect()
}

/// One alert activation: adopt the longest delivered chain, then spend up to
/// `q` queries extending it and send the first success (or nothing).
/// Returns the new head and the block created, if any.
#[allow(clippy::too_many_arguments)]
pub fn honest_step(
    party: PartyId,
    receive: &[BlockRef],
    current: BlockRef,
    round: u64,
    q: u32,
    store: &mut ChainStore,
    oracle: &mut OracleState,
    diffuse: &mut DiffuseState,
) -> Result<(BlockRef, Option<BlockRef>)> {
    let adopted = select_chain(current, receive, store)?;
    let parent_id = store.get(adopted)?.id;
    for nonce in 0..q {
        let input = QueryInput { parent_id, creator: Creator::Party(party), round, nonce };
        let answer = oracle.calc_query(Caller::Party(party), input)?;
        if answer.success {
            let b = store.insert(NewBlock {
                parent: adopted,
                id: answer.sample,
                creator: Creator::Party(party),
                created_round: round,
                nonce,
            })?;
            diffuse.send(Sender::Party(party), Some(b))?;
            return Ok((b, Some(b)));
        }
    }
    diffuse.send(Sender::Party(party), None)?;
    Ok((adopted, None))
}

/// Runs rounds one at a time; owns the whole protocol state.
pub struct Executor {
    params: ModelParams,
    base_status: Vec<Status>,
    heads: Vec<BlockRef>,
    store: ChainStore,
    oracle: OracleState,
    diffuse: DiffuseState,
    adversary: AdversaryState,
    sleep_rng: ChaCha8Rng,
    round: u64,
}

impl Executor {
    pub fn new(config: &ExecutionConfig) -> Result<Self> {
        config.validate()?;
        let params = config.params.clone();
        let mut sleep_rng = ChaCha8Rng::seed_from_u64(config.seed);
        sleep_rng.set_stream(SLEEP_STREAM);
        Ok(Executor {
            base_status: register_corruptions(&params)?,
            heads: vec![BlockRef::GENESIS; params.n as usize],
            store: ChainStore::new(),
            oracle: OracleState::new(&params, config.seed, config.retention),
            diffuse: DiffuseState::new(params.n, params.t, params.delta_net, params.b_flag),
            adversary: AdversaryState::new(config.adversary.clone()),
            sleep_rng,
            round: 0,
            params,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Last completed round (0 before the first step).
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn heads(&self) -> &[BlockRef] {
        &self.heads
    }

    pub fn store(&self) -> &ChainStore {
        &self.store
    }

    pub fn oracle(&self) -> &OracleState {
        &self.oracle
    }

    pub fn diffuse(&self) -> &DiffuseState {
        &self.diffuse
    }

    pub fn adversary(&self) -> &AdversaryState {
        &self.adversary
    }

    pub fn into_store(self) -> ChainStore {
        self.store
    }

    pub fn step(&mut self) -> Result<RoundRecord> {
        let sleepy = sample_sleep(self.params.honest_parties(), self.params.s, &mut self.sleep_rng);
        self.step_with_sleepy(sleepy)
    }

    /// Runs one round with an explicit sleep schedule. Entries for corrupted
    /// parties are ignored.
    pub fn step_with_sleepy(&mut self, sleepy: PartySet) -> Result<RoundRecord> {
        let round = self.round + 1;
        let sleepy: PartySet = sleepy.iter().filter(|&i| i < self.params.n && !self.params.is_corrupted(i)).collect();
        let statuses: Vec<Status> = self
            .base_status
            .iter()
            .enumerate()
            .map(|(i, &s)| if sleepy.contains(i as PartyId) { Status::Sleepy } else { s })
            .collect();

        self.oracle.reset_round();
        self.adversary.begin_round();
        let mut record = RoundRecord { round, sleepy, ..RoundRecord::default() };

        for party in 0..self.params.n {
            match statuses[party as usize] {
                Status::Corrupted => self.activate_adversary(Activation::Slot(party), round, &mut record)?,
                Status::Sleepy => {}
                Status::Alert => {
                    let receive = self.diffuse.take_receive(party);
                    let current = self.heads[party as usize];
                    let (head, created) = honest_step(
                        party,
                        &receive,
                        current,
                        round,
                        self.params.q,
                        &mut self.store,
                        &mut self.oracle,
                        &mut self.diffuse,
                    )?;
                    if let Some(b) = created {
                        record.honest_successes.push((party, b));
                    }
                    if head != current {
                        self.heads[party as usize] = head;
                        record.head_updates.push((party, head));
                    }
                }
            }
        }
        self.activate_adversary(Activation::Rush, round, &mut record)?;

        record.diffused = self.diffuse.adversary_peek();
        record.delivered = self.diffuse.end_round(&statuses)?.payloads;
        self.round = round;
        Ok(record)
    }

    fn activate_adversary(&mut self, activation: Activation, round: u64, record: &mut RoundRecord) -> Result<()> {
        let mut ctx = AdversaryCtx {
            round,
            params: &self.params,
            store: &mut self.store,
            oracle: &mut self.oracle,
            diffuse: &mut self.diffuse,
            successes: &mut record.adversary_successes,
        };
        self.adversary.step(activation, &mut ctx)
    }

    /// Runs `rounds` more rounds, handing each record to `sink`.
    pub fn run<S: RoundSink + ?Sized>(&mut self, rounds: u64, sink: &mut S) -> Result<()> {
        for _ in 0..rounds {
            let record = self.step()?;
            sink.on_round(&record, &self.store)?;
        }
        Ok(())
    }
}

pub fn run_execution(config: &ExecutionConfig) -> Result<ExecutionView> {
    let mut exec = Executor::new(config)?;
    let mut recorder = Recorder::default();
    exec.run(config.rounds, &mut recorder)?;
    Ok(ExecutionView {
        params: config.params.clone(),
        seed: config.seed,
        adversary: config.adversary.clone(),
        rounds: recorder.rounds,
        store: exec.into_store(),
    })
}

/// Runs a whole execution without keeping its rounds; returns the final store.
pub fn run_streaming<S: RoundSink + ?Sized>(config: &ExecutionConfig, sink: &mut S) -> Result<ChainStore> {
    let mut exec = Executor::new(config)?;
    exec.run(config.rounds, sink)?;
    Ok(exec.into_store())
}
