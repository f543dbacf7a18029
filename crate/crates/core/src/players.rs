//! Per-player component weights under the Dirichlet(alpha * beta) prior.
//!
//! Components are fixed (the trimmed global model); only the simplex
//! `theta` of each player is estimated. The M-step adds `alpha * beta_k`
//! pseudo-counts to the expected counts, so small samples are pulled back
//! towards the global weights.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GoalPoint, TruncatedGaussian};
use crate::mixture::{DensityTable, MixtureModel};
use crate::preprocess::{CanonicalShot, Half};

pub const DEFAULT_ALPHA: f64 = 30.0;
const LOG_DENSITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HierarchyConfig {
    pub alpha: f64,
    pub tol_per_shot: f64,
    pub max_iter: usize,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig { alpha: DEFAULT_ALPHA, tol_per_shot: 1e-8, max_iter: 200 }
    }
}

impl HierarchyConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        HierarchyConfig { alpha, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be positive and finite, got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlayerWeights {
    pub theta: Vec<f64>,
    pub shot_count: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Objective before the first update and after each update.
    pub trace: Vec<f64>,
}

/// `ll + sum_k alpha * beta_k * ln(theta_k)`, the quantity each M-step
/// maximizes in expectation.
pub fn player_log_posterior(log_likelihood: f64, theta: &[f64], beta: &[f64], alpha: f64) -> f64 {
    let prior: f64 = theta
        .iter()
        .zip(beta)
        .filter(|(_, &b)| b > 0.0)
        .map(|(t, b)| alpha * b * t.ln())
        .sum();
    log_likelihood + prior
}

fn check_model(model: &MixtureModel) -> Result<()> {
    if model.is_empty() {
        return Err(Error::InvalidModel("model has no components".into()));
    }
    model.validate()
}

/// Fits one player's weights. No shots means `theta = beta`, bit for bit.
pub fn fit_player(shots: &[GoalPoint], model: &MixtureModel, config: &HierarchyConfig) -> Result<PlayerWeights> {
    check_model(model)?;
    config.validate()?;
    let beta = &model.weights;
    if shots.is_empty() {
        return Ok(PlayerWeights {
            theta: beta.clone(),
            shot_count: 0,
            iterations: 0,
            converged: true,
            trace: Vec::new(),
        });
    }
    let dists: Vec<&TruncatedGaussian> = model.distributions().collect();
    let table = DensityTable::new(shots, &dists)?;
    fit_from_table(&table, beta, config)
}

fn fit_from_table(table: &DensityTable, beta: &[f64], config: &HierarchyConfig) -> Result<PlayerWeights> {
    let n = table.n() as f64;
    let alpha = config.alpha;
    let mut theta = beta.to_vec();
    let (mut counts, ll) = table.e_step(&theta);
    let mut trace = vec![player_log_posterior(ll, &theta, beta, alpha)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        theta = counts.iter().zip(beta).map(|(c, b)| (c + alpha * b) / (n + alpha)).collect();
        let total: f64 = theta.iter().sum();
        theta.iter_mut().for_each(|t| *t /= total);
        let (c, ll) = table.e_step(&theta);
        counts = c;
        let obj = player_log_posterior(ll, &theta, beta, alpha);
        if !obj.is_finite() {
            return Err(Error::ConvergenceFailure(format!("player objective became {obj}")));
        }
        let gain = obj - trace.last().unwrap();
        trace.push(obj);
        if gain.abs() < config.tol_per_shot * n {
            converged = true;
            break;
        }
    }
    Ok(PlayerWeights { theta, shot_count: table.n(), iterations, converged, trace })
}

/// Fits every group independently, in parallel.
pub fn fit_player_weights<K>(
    groups: &BTreeMap<K, Vec<GoalPoint>>,
    model: &MixtureModel,
    config: &HierarchyConfig,
) -> Result<BTreeMap<K, PlayerWeights>>
where
    K: Ord + Clone + Send + Sync,
{
    check_model(model)?;
    config.validate()?;
    let fitted: Vec<(K, PlayerWeights)> = groups
        .par_iter()
        .map(|(key, shots)| fit_player(shots, model, config).map(|w| (key.clone(), w)))
        .collect::<Result<_>>()?;
    Ok(fitted.into_iter().collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihoodScore {
    pub mean: f64,
    pub n_shots: usize,
    /// Shots whose mixture density fell below 1e-300 and were floored.
    pub n_floored: usize,
}

/// Mean over shots of `log sum_k theta_k f_k(shot)`, each shot scored with
/// its own player's weights.
pub fn log_likelihood_per_shot<K: Ord>(
    groups: &BTreeMap<K, Vec<GoalPoint>>,
    weights: &BTreeMap<K, Vec<f64>>,
    model: &MixtureModel,
) -> Result<LogLikelihoodScore> {
    check_model(model)?;
    let dists: Vec<&TruncatedGaussian> = model.distributions().collect();
    let mut total = 0.0;
    let mut n_shots = 0;
    let mut n_floored = 0;
    for (key, shots) in groups {
        let theta = weights
            .get(key)
            .ok_or_else(|| Error::InvalidInput("a scored player has no fitted weights".into()))?;
        if theta.len() != model.len() {
            return Err(Error::InvalidInput("weights do not match the model's components".into()));
        }
        for p in shots {
            if !p.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite shot {p:?}")));
            }
            let f: f64 = theta.iter().zip(&dists).map(|(t, d)| t * d.log_pdf(*p).exp()).sum();
            if f < LOG_DENSITY_FLOOR {
                n_floored += 1;
                total += LOG_DENSITY_FLOOR.ln();
            } else {
                total += f.ln();
            }
            n_shots += 1;
        }
    }
    if n_shots == 0 {
        return Err(Error::InvalidInput("no shots to score".into()));
    }
    Ok(LogLikelihoodScore { mean: total / n_shots as f64, n_shots, n_floored })
}

// ---------------------------------------------------------------------------
// Persistence

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodEntry {
    pub season_id: String,
    pub half: Half,
    pub theta: Vec<f64>,
    pub shot_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerEntry {
    /// Fit on all of the player's shots.
    pub theta: Vec<f64>,
    pub shot_count: usize,
    /// One fit per (season, half), used for period metrics.
    #[serde(default)]
    pub periods: Vec<PeriodEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerWeightsFile {
    pub model_hash: String,
    pub alpha: f64,
    pub players: BTreeMap<String, PlayerEntry>,
}

impl PlayerWeightsFile {
    /// Fits the overall and per-period weights of every player in `shots`.
    pub fn fit(shots: &[CanonicalShot], model: &MixtureModel, config: &HierarchyConfig) -> Result<Self> {
        let mut overall: BTreeMap<String, Vec<GoalPoint>> = BTreeMap::new();
        let mut periods: BTreeMap<(String, String, Half), Vec<GoalPoint>> = BTreeMap::new();
        for s in shots {
            overall.entry(s.player_id.clone()).or_default().push(s.end_point);
            periods
                .entry((s.player_id.clone(), s.season_id.clone(), s.half))
                .or_default()
                .push(s.end_point);
        }
        let overall = fit_player_weights(&overall, model, config)?;
        let periods = fit_player_weights(&periods, model, config)?;
        let mut players: BTreeMap<String, PlayerEntry> = overall
            .into_iter()
            .map(|(id, w)| (id, PlayerEntry { theta: w.theta, shot_count: w.shot_count, periods: Vec::new() }))
            .collect();
        for ((id, season_id, half), w) in periods {
            players.get_mut(&id).expect("every period belongs to a fitted player").periods.push(PeriodEntry {
                season_id,
                half,
                theta: w.theta,
                shot_count: w.shot_count,
            });
        }
        Ok(PlayerWeightsFile { model_hash: model.hash(), alpha: config.alpha, players })
    }

    /// Errors unless this file was fit against `model`.
    pub fn check_model(&self, model: &MixtureModel) -> Result<()> {
        let found = model.hash();
        if self.model_hash != found {
            return Err(Error::ModelHashMismatch { expected: self.model_hash.clone(), found });
        }
        Ok(())
    }

    pub fn period(&self, player_id: &str, season_id: &str, half: Half) -> Option<&PeriodEntry> {
        self.players
            .get(player_id)?
            .periods
            .iter()
            .find(|p| p.season_id == season_id && p.half == half)
    }

    /// Weights of a player, or `beta` for players never seen.
    pub fn theta_or<'a>(&'a self, player_id: &str, beta: &'a [f64]) -> &'a [f64] {
        self.players.get(player_id).map(|e| e.theta.as_slice()).unwrap_or(beta)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::format(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))
    }
}
