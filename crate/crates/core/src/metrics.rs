//! Shooting-skill metrics per player and period: RBPostXg, GenPostXg and
//! the GAX / EGA baselines.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GoalPoint, TruncatedGaussian};
use crate::mixture::MixtureModel;
use crate::players::PlayerWeightsFile;
use crate::preprocess::{CanonicalShot, Half};

pub const METRIC_COLUMNS: [&str; 11] = [
    "player_id",
    "season_id",
    "half",
    "shot_count",
    "goals",
    "sum_xg",
    "sum_postxg_ext",
    "gax",
    "ega",
    "rb_postxg",
    "gen_postxg",
];

/// `sum_k theta_k * v_k`.
pub fn rb_postxg(theta: &[f64], values: &[f64]) -> Result<f64> {
    if theta.len() != values.len() {
        return Err(Error::InvalidInput(format!(
            "{} weights against {} component values",
            theta.len(),
            values.len()
        )));
    }
    Ok(theta.iter().zip(values).map(|(t, v)| t * v).sum())
}

/// Per-shot GenPostXg under the global weights of a trimmed model.
pub struct GenPostXg<'a> {
    dists: Vec<&'a TruncatedGaussian>,
    log_beta: Vec<f64>,
    values: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenValue {
    pub value: f64,
    /// Every component density underflowed and the nearest component
    /// (Mahalanobis) took all the responsibility.
    pub fallback: bool,
}

impl<'a> GenPostXg<'a> {
    pub fn new(model: &'a MixtureModel, values: &'a [f64]) -> Result<Self> {
        if model.is_empty() {
            return Err(Error::InvalidModel("model has no components".into()));
        }
        if values.len() != model.len() {
            return Err(Error::InvalidInput(format!(
                "{} component values for {} components",
                values.len(),
                model.len()
            )));
        }
        Ok(GenPostXg {
            dists: model.distributions().collect(),
            log_beta: model.weights.iter().map(|w| w.ln()).collect(),
            values,
        })
    }

    pub fn evaluate(&self, p: GoalPoint) -> Result<GenValue> {
        if !p.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite shot {p:?}")));
        }
        let logs: Vec<f64> = self.dists.iter().zip(&self.log_beta).map(|(d, lb)| lb + d.log_pdf(p)).collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            let nearest = self
                .dists
                .iter()
                .enumerate()
                .filter(|(k, _)| self.log_beta[*k].is_finite())
                .min_by(|a, b| a.1.mahalanobis_sq(p).total_cmp(&b.1.mahalanobis_sq(p)))
                .map(|(k, _)| k)
                .unwrap_or(0);
            log::debug!("GenPostXg fell back to the nearest component for {p:?}");
            return Ok(GenValue { value: self.values[nearest], fallback: true });
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for (l, v) in logs.iter().zip(self.values) {
            let r = (l - max).exp();
            num += r * v;
            den += r;
        }
        Ok(GenValue { value: num / den, fallback: false })
    }
}

pub fn gen_postxg_shot(p: GoalPoint, model: &MixtureModel, values: &[f64]) -> Result<f64> {
    Ok(GenPostXg::new(model, values)?.evaluate(p)?.value)
}

/// Which way round expected goals added is taken.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EgaSign {
    /// `postxg_ext - xg`: well-struck shots add value.
    #[default]
    PostMinusPre,
    PreMinusPost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub player_id: String,
    pub season_id: String,
    pub half: Half,
    pub shot_count: usize,
    pub goals: usize,
    pub sum_xg: f64,
    pub sum_postxg_ext: f64,
    pub gax: f64,
    pub ega: f64,
    pub rb_postxg: f64,
    pub gen_postxg: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricTable {
    pub rows: Vec<MetricRow>,
    /// Shots whose GenPostXg needed the nearest-component fallback.
    pub n_fallback: usize,
}

type PeriodKey = (String, String, Half);

/// One row per (player, season, half), sorted by that key. RBPostXg uses the
/// weights fitted on the period's own shots.
pub fn player_table(
    shots: &[CanonicalShot],
    weights: &PlayerWeightsFile,
    model: &MixtureModel,
    values: &[f64],
    ega_sign: EgaSign,
) -> Result<MetricTable> {
    weights.check_model(model)?;
    let gen = GenPostXg::new(model, values)?;
    let mut groups: BTreeMap<PeriodKey, Vec<&CanonicalShot>> = BTreeMap::new();
    for s in shots {
        groups.entry((s.player_id.clone(), s.season_id.clone(), s.half)).or_default().push(s);
    }
    let rows: Vec<(MetricRow, usize)> = groups
        .par_iter()
        .map(|((player_id, season_id, half), group)| {
            let period = weights.period(player_id, season_id, *half).ok_or_else(|| {
                Error::InvalidInput(format!("no fitted weights for {player_id} / {season_id} / {half}"))
            })?;
            let rb = rb_postxg(&period.theta, values)?;
            let mut goals = 0;
            let mut sum_xg = 0.0;
            let mut sum_post = 0.0;
            let mut ega = 0.0;
            let mut gen_sum = 0.0;
            let mut n_fallback = 0;
            for s in group {
                goals += usize::from(s.is_goal);
                sum_xg += s.xg;
                sum_post += s.postxg_ext;
                ega += match ega_sign {
                    EgaSign::PostMinusPre => s.postxg_ext - s.xg,
                    EgaSign::PreMinusPost => s.xg - s.postxg_ext,
                };
                let g = gen.evaluate(s.end_point)?;
                gen_sum += g.value;
                n_fallback += usize::from(g.fallback);
            }
            let row = MetricRow {
                player_id: player_id.clone(),
                season_id: season_id.clone(),
                half: *half,
                shot_count: group.len(),
                goals,
                sum_xg,
                sum_postxg_ext: sum_post,
                gax: goals as f64 - sum_xg,
                ega,
                rb_postxg: rb,
                gen_postxg: gen_sum / group.len() as f64,
            };
            Ok((row, n_fallback))
        })
        .collect::<Result<_>>()?;
    let n_fallback = rows.iter().map(|(_, f)| f).sum();
    if n_fallback > 0 {
        log::info!("{n_fallback} shots used the nearest-component GenPostXg fallback");
    }
    Ok(MetricTable { rows: rows.into_iter().map(|(r, _)| r).collect(), n_fallback })
}

impl MetricTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut rows: Vec<&MetricRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            (&a.player_id, &a.season_id, a.half.to_string()).cmp(&(&b.player_id, &b.season_id, b.half.to_string()))
        });
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
        for r in rows {
            w.serialize(r).map_err(|e| Error::format(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rd = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
        let headers = rd.headers().map_err(|e| Error::format(path, e))?.clone();
        if headers.iter().ne(METRIC_COLUMNS) {
            return Err(Error::format(path, format!("unexpected metric columns {headers:?}")));
        }
        let rows = rd
            .deserialize()
            .collect::<std::result::Result<Vec<MetricRow>, _>>()
            .map_err(|e| Error::format(path, e))?;
        Ok(MetricTable { rows, n_fallback: 0 })
    }
}
