//! Ideal random-oracle functionality with per-round calculation budgets.

use std::collections::HashMap;
use std::fmt;

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Creator, ModelParams, PartyId};

/// Stream index of the oracle's sample generator under a given seed.
const ORACLE_STREAM: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Caller {
    Party(PartyId),
    Adversary,
}

impl fmt::Display for Caller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Caller::Party(i) => write!(f, "P{}", i + 1),
            Caller::Adversary => f.write_str("adversary"),
        }
    }
}

/// Canonical query input: the content of the block being attempted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QueryInput {
    pub parent_id: u64,
    pub creator: Creator,
    pub round: u64,
    pub nonce: u32,
}

/// Which table entries survive the end of a round.
///
/// `Full` keeps every pair forever. `Successes` drops unsuccessful pairs when
/// the round closes: their inputs embed a past round, so no later calculation
/// query can repeat them, and block verification only ever asks about
/// successful pairs. Long Monte Carlo runs use it to keep memory flat.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableRetention {
    #[default]
    Full,
    Successes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueryAnswer {
    pub sample: u64,
    pub success: bool,
}

#[derive(Clone, Debug)]
pub struct OracleState {
    table: HashMap<QueryInput, u64>,
    round_failures: HashMap<QueryInput, u64>,
    retention: TableRetention,
    budgets: Vec<u32>,
    adversary_pool: u32,
    q: u32,
    t: u32,
    rng: ChaCha8Rng,
    threshold: u128,
    kappa: u32,
}

impl OracleState {
    pub fn new(params: &ModelParams, seed: u64, retention: TableRetention) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ORACLE_STREAM);
        OracleState {
            table: HashMap::new(),
            round_failures: HashMap::new(),
            retention,
            budgets: vec![params.q; params.n as usize],
            adversary_pool: params.t * params.q,
            q: params.q,
            t: params.t,
            rng,
            threshold: params.threshold(),
            kappa: params.kappa,
        }
    }

    pub fn threshold(&self) -> u128 {
        self.threshold
    }

    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    pub fn remaining(&self, caller: Caller) -> u32 {
        match caller {
            Caller::Party(i) => self.budgets.get(i as usize).copied().unwrap_or(0),
            Caller::Adversary => self.adversary_pool,
        }
    }

    /// Number of pairs currently held.
    pub fn table_len(&self) -> usize {
        self.table.len() + self.round_failures.len()
    }

    pub fn calc_query(&mut self, caller: Caller, input: QueryInput) -> Result<QueryAnswer> {
        let budget = match caller {
            Caller::Party(i) => self.budgets.get_mut(i as usize),
            Caller::Adversary => Some(&mut self.adversary_pool),
        };
        match budget {
            Some(b) if *b > 0 => *b -= 1,
            _ => return Err(Error::BudgetExhausted(caller)),
        }
        let sample = match self.lookup(&input) {
            Some(y) => y,
            None => {
                let y = self.fresh_sample();
                if self.retention == TableRetention::Full || self.is_success(y) {
                    self.table.insert(input, y);
                } else {
                    self.round_failures.insert(input, y);
                }
                y
            }
        };
        Ok(QueryAnswer { sample, success: self.is_success(sample) })
    }

    pub fn verify_query(&self, input: &QueryInput, sample: u64) -> bool {
        self.lookup(input) == Some(sample)
    }

    /// Restores all budgets; the table is left as is apart from the
    /// end-of-round eviction of [`TableRetention::Successes`].
    pub fn reset_round(&mut self) {
        self.budgets.iter_mut().for_each(|b| *b = self.q);
        self.adversary_pool = self.t * self.q;
        self.round_failures.clear();
    }

    /// Debug dump, one `parent_id,creator,round,nonce -> sample` line per pair,
    /// sorted for stable output.
    pub fn dump(&self) -> String {
        let mut rows: Vec<_> = self.table.iter().chain(self.round_failures.iter()).collect();
        rows.sort_by_key(|(k, _)| (k.round, k.creator, k.parent_id, k.nonce));
        rows.iter()
            .map(|(k, v)| format!("{},{},{},{} -> {}\n", k.parent_id, k.creator, k.round, k.nonce, v))
            .collect()
    }

    fn lookup(&self, input: &QueryInput) -> Option<u64> {
        self.table.get(input).or_else(|| self.round_failures.get(input)).copied()
    }

    fn is_success(&self, sample: u64) -> bool {
        (sample as u128) < self.threshold
    }

    fn fresh_sample(&mut self) -> u64 {
        self.rng.next_u64() >> (64 - self.kappa)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64, kappa: u32) -> ModelParams {
        ModelParams::sync(4, 1, 0.0, p).with_kappa(kappa).with_q(2)
    }

    fn input(round: u64, nonce: u32) -> QueryInput {
        QueryInput { parent_id: 0, creator: Creator::Party(1), round, nonce }
    }

    #[test]
    fn certain_and_impossible_thresholds() {
        let mut o = OracleState::new(&params(1.0, 16), 1, TableRetention::Full);
        assert!(o.calc_query(Caller::Party(1), input(1, 0)).unwrap().success);
        let mut o = OracleState::new(&params(0.0, 16), 1, TableRetention::Full);
        assert!(!o.calc_query(Caller::Party(1), input(1, 0)).unwrap().success);
    }

    #[test]
    fn repeated_input_returns_recorded_sample() {
        let mut o = OracleState::new(&params(0.5, 64), 7, TableRetention::Full);
        let a = o.calc_query(Caller::Party(1), input(1, 0)).unwrap();
        let b = o.calc_query(Caller::Party(1), input(1, 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(o.table_len(), 1);
    }

    #[test]
    fn verify_semantics() {
        let mut o = OracleState::new(&params(0.5, 64), 7, TableRetention::Full);
        let a = o.calc_query(Caller::Party(2), input(1, 0)).unwrap();
        assert!(o.verify_query(&input(1, 0), a.sample));
        assert!(!o.verify_query(&input(1, 1), a.sample));
        assert!(!o.verify_query(&input(1, 0), a.sample ^ 1));
    }

    #[test]
    fn budgets_are_enforced_and_restored() {
        let mut o = OracleState::new(&params(0.5, 64), 7, TableRetention::Full);
        o.calc_query(Caller::Party(3), input(1, 0)).unwrap();
        o.calc_query(Caller::Party(3), input(1, 1)).unwrap();
        assert!(matches!(o.calc_query(Caller::Party(3), input(1, 2)), Err(Error::BudgetExhausted(_))));
        // t = 1, q = 2
        o.calc_query(Caller::Adversary, input(1, 10)).unwrap();
        o.calc_query(Caller::Adversary, input(1, 11)).unwrap();
        assert!(o.calc_query(Caller::Adversary, input(1, 12)).is_err());

        let before = o.table_len();
        o.reset_round();
        assert_eq!(o.table_len(), before);
        let budgets = (o.remaining(Caller::Party(3)), o.remaining(Caller::Adversary));
        o.reset_round();
        assert_eq!(budgets, (o.remaining(Caller::Party(3)), o.remaining(Caller::Adversary)));
        assert_eq!(budgets, (2, 2));
        assert!(o.calc_query(Caller::Party(3), input(2, 0)).is_ok());
    }

    #[test]
    fn success_retention_keeps_only_successful_pairs_across_rounds() {
        let mut o = OracleState::new(&params(0.5, 16), 3, TableRetention::Successes);
        let mut kept = Vec::new();
        for round in 1..50 {
            for nonce in 0..2 {
                let a = o.calc_query(Caller::Party(1), input(round, nonce)).unwrap();
                if a.success {
                    kept.push((input(round, nonce), a.sample));
                }
            }
            o.reset_round();
        }
        assert_eq!(o.table_len(), kept.len());
        assert!(kept.iter().all(|(i, y)| o.verify_query(i, *y)));
    }

    #[test]
    fn empirical_success_rate_matches_p() {
        // 10^5 fresh queries at p = 0.25; 3σ of the binomial proportion.
        let mut p = params(0.25, 16);
        p.q = 100_000;
        let mut o = OracleState::new(&p, 42, TableRetention::Successes);
        let n = 100_000;
        let mut hits = 0u32;
        let mut sum = 0f64;
        for nonce in 0..n {
            let a = o.calc_query(Caller::Party(1), input(1, nonce)).unwrap();
            hits += a.success as u32;
            sum += a.sample as f64 / 65536.0;
        }
        let rate = hits as f64 / n as f64;
        let sigma = (0.25f64 * 0.75 / n as f64).sqrt();
        assert!((rate - 0.25).abs() <= 3.0 * sigma, "rate {rate}");
        assert!(3.0 * sigma <= 0.01);
        // Uniformity of sample/2^κ: variance of U(0,1) is 1/12.
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() <= 3.0 * (1.0 / 12.0 / n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn samples_are_pure_function_of_seed_and_order() {
        let draw = |seed| {
            let mut o = OracleState::new(&params(0.5, 64), seed, TableRetention::Full);
            (0..2).map(|k| o.calc_query(Caller::Party(1), input(1, k)).unwrap().sample).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }
}
