//! Random variables, bad events and backbone property checks over executions.

pub mod bad_events;
pub mod indicators;
pub mod phi;
pub mod properties;
pub mod replacement;
pub mod typical;

use serde::{Deserialize, Serialize};

pub use bad_events::{detect_bad_events, AdoptionTracker, BadEvents};
pub use indicators::{extract_indicators, IndicatorExtractor, RoundIndicators, Sums};
pub use phi::{phi_estimate, PhiEstimate, PhiTracker};
pub use properties::{
    chain_growth_check, chain_quality_check, common_prefix_check, ChainGrowthResult, ChainGrowthTracker, ChainQualityResult,
    CommonPrefixResult, GrowthConvention, HeadHistory,
};
pub use replacement::{block_replacements, Replacement, ReplacementCase, ReplacementReport};
pub use typical::{relations_check, sample_windows, typical_check, Clauses, TypicalClause, TypicalOutcome};

use crate::chain::ChainStore;
use crate::error::Result;
use crate::model::ModelParams;
use crate::view::{RoundRecord, RoundSink};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TypicalSummary {
    pub windows: u64,
    pub typical: u64,
    /// First failing clause per atypical window, counted.
    pub failures: Vec<(TypicalClause, u64)>,
}

impl TypicalSummary {
    pub fn record(&mut self, out: &TypicalOutcome) {
        self.windows += 1;
        match out.failed {
            None => self.typical += 1,
            Some(c) => match self.failures.iter_mut().find(|(k, _)| *k == c) {
                Some((_, n)) => *n += 1,
                None => self.failures.push((c, 1)),
            },
        }
    }

    pub fn is_typical(&self) -> bool {
        self.windows > 0 && self.typical == self.windows
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub chain_growth: Option<ChainGrowthResult>,
    pub common_prefix: Option<CommonPrefixResult>,
    pub chain_quality: Option<ChainQualityResult>,
    pub bad_events: BadEvents,
    pub typical: Option<TypicalSummary>,
}

/// Parameters of the property checks; absent entries are skipped.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertyParams {
    pub growth: Option<(f64, u64)>,
    #[serde(default)]
    pub growth_convention: GrowthConvention,
    pub prefix_k: Option<u64>,
    pub quality: Option<(f64, u64)>,
}

/// Everything the per-trial report needs, gathered in one pass over the rounds.
pub struct Collector {
    pub indicators: IndicatorExtractor,
    pub adoption: AdoptionTracker,
    pub growth: Option<ChainGrowthTracker>,
    pub history: Option<HeadHistory>,
    pub phi: Option<PhiTracker>,
}

impl Collector {
    pub fn new(params: &ModelParams, props: &PropertyParams, with_phi: bool) -> Result<Self> {
        Ok(Collector {
            indicators: IndicatorExtractor::new(params),
            adoption: AdoptionTracker::new(),
            growth: props.growth.map(|(tau, w)| ChainGrowthTracker::new(params, tau, w, props.growth_convention)).transpose()?,
            history: props.prefix_k.map(|_| HeadHistory::new(params)),
            phi: if with_phi { Some(PhiTracker::new(params)?) } else { None },
        })
    }
}

impl RoundSink for Collector {
    fn on_round(&mut self, rec: &RoundRecord, store: &ChainStore) -> Result<()> {
        self.indicators.on_round(rec, store)?;
        self.adoption.on_round(rec, store)?;
        if let Some(g) = &mut self.growth {
            g.on_round(rec, store)?;
        }
        if let Some(h) = &mut self.history {
            h.on_round(rec, store)?;
        }
        if let Some(p) = &mut self.phi {
            p.on_round(rec, store)?;
        }
        Ok(())
    }
}
