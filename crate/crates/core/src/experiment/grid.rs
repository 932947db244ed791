//! Figure-1 series and per-point bounds reports over a corruption grid.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::{figure1_csv, figure1_dataset, BoundsOptions, BoundsReport, CurvePoint, ExFamily, ExSource};
use crate::error::{Error, Result};
use crate::experiment::config::{tune_p, GridSpec};
use crate::model::{ModelKind, ModelParams};
use crate::view::tool_version;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub model: ModelKind,
    #[serde(flatten)]
    pub curve: CurvePoint,
    /// Report at `s = s_max` with `p` tuned to the grid's expectation; `None`
    /// when no such `p` exists (for instance `s_max = 1`).
    pub report: Option<BoundsReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsOutput {
    pub tool: String,
    pub config_hash: String,
    pub grid: GridSpec,
    pub points: Vec<GridPoint>,
}

impl BoundsOutput {
    /// figure1.csv contents, headed by a `#` line.
    pub fn figure1(&self) -> String {
        let mut series: Vec<(ModelKind, Vec<CurvePoint>)> = Vec::new();
        for pt in &self.points {
            match series.last_mut() {
                Some((k, v)) if *k == pt.model => v.push(pt.curve),
                _ => series.push((pt.model, vec![pt.curve])),
            }
        }
        format!("# {} config_hash={}\n{}", self.tool, self.config_hash, figure1_csv(&series))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("figure1.csv"), self.figure1())?;
        fs::write(dir.join("bounds.json"), self.to_json()?)?;
        Ok(())
    }
}

fn point_params(grid: &GridSpec, kind: ModelKind, t: u32, s: f64) -> Result<ModelParams> {
    let b_flag = kind != ModelKind::MsgLoss;
    let target = if b_flag { grid.ex } else { grid.ex_star };
    let p = tune_p(target, grid.n, t, s, grid.q, b_flag)?;
    let mut params = ModelParams::sync(grid.n, t, s, p).with_q(grid.q);
    params.epsilon = grid.epsilon;
    params.c = grid.c;
    if let Some(eta) = grid.eta_kappa {
        params.eta_kappa = eta;
    }
    if kind == ModelKind::Delay {
        params = params.with_q(1).with_delay(grid.delta_net);
    }
    if !b_flag {
        params = params.with_message_loss();
    }
    params.validate()?;
    Ok(params)
}

/// Evaluates every model of the grid at every `t`.
pub fn emit_bounds(grid: &GridSpec) -> Result<BoundsOutput> {
    let family = ExFamily {
        ex: grid.ex,
        ex_star: grid.ex_star,
        delta_net: grid.delta_net,
        eta_kappa: grid.eta_kappa,
        delay_convention: grid.delay_convention,
    };
    let opts = BoundsOptions {
        ex_source: ExSource::Upper,
        delay_convention: grid.delay_convention,
        drop_eta_term: grid.eta_kappa.is_none(),
    };
    let ts = grid.t_values();
    let mut points = Vec::new();
    for &kind in &grid.models {
        for curve in figure1_dataset(kind, grid.c, grid.epsilon, &family, grid.n, &ts)? {
            let report = point_params(grid, kind, curve.t, curve.s_max).and_then(|p| BoundsReport::compute(&p, &opts)).ok();
            points.push(GridPoint { model: kind, curve, report });
        }
    }
    Ok(BoundsOutput { tool: tool_version(), config_hash: grid.config_hash()?, grid: grid.clone(), points })
}
