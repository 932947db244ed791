//! Model parameters and party bookkeeping for `M(q, Δ, B)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Zero-based party index; party `P_i` of the protocol is index `i - 1`.
pub type PartyId = u32;

/// The three supported instantiations of `M(q, Δ, B)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// `M(q, 0, 1)`: synchronous, sleepy parties still receive.
    Sync,
    /// `M(1, Δ, 1)`: bounded delay, sleepy parties still receive.
    Delay,
    /// `M(q, 0, 0)`: synchronous, sleepy parties lose messages.
    MsgLoss,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Sync => "sync",
            ModelKind::Delay => "delay",
            ModelKind::MsgLoss => "msgloss",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sync" => Ok(ModelKind::Sync),
            "delay" => Ok(ModelKind::Delay),
            "msgloss" => Ok(ModelKind::MsgLoss),
            other => Err(config_err(format!("unknown model `{other}`"))),
        }
    }
}

/// Execution parameters. `p` is the configured primitive; the difficulty
/// threshold `T` is derived from it (see [`ModelParams::threshold`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub n: u32,
    pub t: u32,
    pub s: f64,
    pub q: u32,
    pub delta_net: u32,
    pub b_flag: bool,
    pub p: f64,
    pub kappa: u32,
    pub eta_kappa: u64,
    pub epsilon: f64,
    pub c: f64,
}

impl ModelParams {
    pub const MIN_KAPPA: u32 = 8;
    pub const MAX_KAPPA: u32 = 64;

    /// Synchronous `M(1, 0, 1)` parameters with the reference constants
    /// (κ = 64, ηκ = 4000, ε = 0.005, c = 0.5).
    pub fn sync(n: u32, t: u32, s: f64, p: f64) -> Self {
        ModelParams {
            n,
            t,
            s,
            q: 1,
            delta_net: 0,
            b_flag: true,
            p,
            kappa: 64,
            eta_kappa: 4000,
            epsilon: 0.005,
            c: 0.5,
        }
    }

    pub fn with_q(mut self, q: u32) -> Self {
        self.q = q;
        self
    }

    pub fn with_delay(mut self, delta_net: u32) -> Self {
        self.delta_net = delta_net;
        self
    }

    pub fn with_message_loss(mut self) -> Self {
        self.b_flag = false;
        self
    }

    pub fn with_kappa(mut self, kappa: u32) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(config_err(format!("n must be at least 2, got {}", self.n)));
        }
        if self.t >= self.n {
            return Err(config_err(format!("t must be below n ({} >= {})", self.t, self.n)));
        }
        if !(0.0..=1.0).contains(&self.s) {
            return Err(config_err(format!("s must lie in [0, 1], got {}", self.s)));
        }
        if self.q < 1 {
            return Err(config_err("q must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(config_err(format!("p must lie in [0, 1], got {}", self.p)));
        }
        if !(Self::MIN_KAPPA..=Self::MAX_KAPPA).contains(&self.kappa) {
            return Err(config_err(format!(
                "kappa must lie in [{}, {}], got {}",
                Self::MIN_KAPPA,
                Self::MAX_KAPPA,
                self.kappa
            )));
        }
        if self.eta_kappa < 1 {
            return Err(config_err("eta_kappa must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(config_err(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(0.0..=1.0).contains(&self.c) {
            return Err(config_err(format!("c must lie in [0, 1], got {}", self.c)));
        }
        if self.delta_net > 0 && !self.b_flag {
            return Err(config_err("M(q, Δ>0, 0) is not a supported instantiation"));
        }
        if self.delta_net > 0 && self.q != 1 {
            return Err(config_err("the bounded-delay model requires q = 1"));
        }
        Ok(())
    }

    pub fn kind(&self) -> ModelKind {
        if self.delta_net > 0 {
            ModelKind::Delay
        } else if self.b_flag {
            ModelKind::Sync
        } else {
            ModelKind::MsgLoss
        }
    }

    /// `T = round(p · 2^κ)`, which may equal `2^κ` when `p = 1`.
    pub fn threshold(&self) -> u128 {
        let domain = (1u128 << self.kappa) as f64;
        let t = (self.p * domain).round();
        (t as u128).min(1u128 << self.kappa)
    }

    pub fn honest_count(&self) -> u32 {
        self.n - self.t
    }

    pub fn is_corrupted(&self, party: PartyId) -> bool {
        party < self.t
    }

    pub fn honest_parties(&self) -> std::ops::Range<PartyId> {
        self.t..self.n
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Alert,
    Sleepy,
    Corrupted,
}

impl Status {
    pub fn code(self) -> char {
        match self {
            Status::Alert => 'A',
            Status::Sleepy => 'S',
            Status::Corrupted => 'C',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'A' => Some(Status::Alert),
            'S' => Some(Status::Sleepy),
            'C' => Some(Status::Corrupted),
            _ => None,
        }
    }
}

/// Fixed-capacity bit set over party indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct PartySet {
    words: Vec<u64>,
}

impl PartySet {
    pub fn with_capacity(n: u32) -> Self {
        PartySet { words: vec![0; (n as usize).div_ceil(64)] }
    }

    pub fn insert(&mut self, party: PartyId) {
        let (w, b) = (party as usize / 64, party % 64);
        if w >= self.words.len() {
            self.words.resize(w + 1, 0);
        }
        self.words[w] |= 1 << b;
    }

    pub fn contains(&self, party: PartyId) -> bool {
        let (w, b) = (party as usize / 64, party % 64);
        self.words.get(w).is_some_and(|word| word & (1 << b) != 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = PartyId> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let bit = rest.trailing_zeros();
                rest &= rest - 1;
                Some(wi as u32 * 64 + bit)
            })
        })
    }
}

impl FromIterator<PartyId> for PartySet {
    fn from_iter<I: IntoIterator<Item = PartyId>>(iter: I) -> Self {
        let mut set = PartySet::default();
        for p in iter {
            set.insert(p);
        }
        set
    }
}

/// Who produced a block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Creator {
    Genesis,
    Party(PartyId),
    Adversary,
}

impl fmt::Display for Creator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Creator::Genesis => f.write_str("G"),
            Creator::Party(i) => write!(f, "P{}", i + 1),
            Creator::Adversary => f.write_str("A"),
        }
    }
}

impl std::str::FromStr for Creator {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "G" => Ok(Creator::Genesis),
            "A" => Ok(Creator::Adversary),
            _ => s
                .strip_prefix('P')
                .and_then(|i| i.parse::<u32>().ok())
                .filter(|&i| i >= 1)
                .map(|i| Creator::Party(i - 1))
                .ok_or_else(|| crate::Error::Parse(format!("bad creator `{s}`"))),
        }
    }
}

/// Sender of a diffused message.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sender {
    Party(PartyId),
    Adversary,
}

impl fmt::Display for Sender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sender::Party(i) => write!(f, "P{}", i + 1),
            Sender::Adversary => f.write_str("A"),
        }
    }
}

impl std::str::FromStr for Sender {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.parse::<Creator>()? {
            Creator::Party(i) => Ok(Sender::Party(i)),
            Creator::Adversary => Ok(Sender::Adversary),
            Creator::Genesis => Err(crate::Error::Parse("genesis cannot send".into())),
        }
    }
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(Creator);
string_serde!(Sender);
