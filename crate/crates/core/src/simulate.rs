//! Synthetic shot corpora drawn from the hierarchical generative model.
//!
//! Each player gets `theta* ~ Dirichlet(alpha * beta)`; each shot picks a
//! component from `theta*`, an end point from that component and a goal
//! from `Bernoulli(postxg(point))`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Gamma;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GoalFrame;
use crate::mixture::{build_grid, CovarianceInterpolator, GridSpec, MixtureModel};
use crate::preprocess::{BodyPart, CanonicalShot, Half, Outcome};
use crate::rng::{seeded, StageRng};
use crate::valuation::PostXgModel;

/// Distance recorded on simulated shots (the simulator has no start points).
pub const NOMINAL_DISTANCE_YD: f64 = 18.0;
pub const SIM_SEASON: &str = "sim";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotsPerPlayer {
    Fixed(usize),
    /// Uniform on `min..=max`.
    Uniform { min: usize, max: usize },
}

impl ShotsPerPlayer {
    fn validate(&self) -> Result<()> {
        match *self {
            ShotsPerPlayer::Uniform { min, max } if min > max => {
                Err(Error::InvalidParameter(format!("shot range {min}..={max} is empty")))
            }
            _ => Ok(()),
        }
    }

    fn draw(&self, rng: &mut StageRng) -> usize {
        match *self {
            ShotsPerPlayer::Fixed(n) => n,
            ShotsPerPlayer::Uniform { min, max } => rng.random_range(min..=max),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationSpec {
    pub n_players: usize,
    pub shots_per_player: ShotsPerPlayer,
    pub alpha: f64,
    pub model: MixtureModel,
    pub postxg: PostXgModel,
    pub seed: u64,
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_players == 0 {
            return Err(Error::InvalidParameter("n_players must be at least 1".into()));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be positive and finite, got {}", self.alpha)));
        }
        self.shots_per_player.validate()?;
        if self.model.is_empty() {
            return Err(Error::InvalidModel("model has no components".into()));
        }
        self.model.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub model_hash: String,
    pub alpha: f64,
    pub seed: u64,
    pub players: BTreeMap<String, Vec<f64>>,
}

impl GroundTruth {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::format(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedCorpus {
    pub shots: Vec<CanonicalShot>,
    pub truth: GroundTruth,
}

/// Normalized Gamma draws; components with zero weight get exactly zero.
pub fn sample_dirichlet(alpha: f64, beta: &[f64], rng: &mut StageRng) -> Result<Vec<f64>> {
    if beta.len() == 1 {
        return Ok(vec![1.0]);
    }
    for _ in 0..1000 {
        let mut g = Vec::with_capacity(beta.len());
        for &b in beta {
            if b == 0.0 {
                g.push(0.0);
            } else {
                let d = Gamma::new(alpha * b, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                g.push(rng.sample(d));
            }
        }
        let total: f64 = g.iter().sum();
        if total > 0.0 && total.is_finite() {
            return Ok(g.into_iter().map(|x| x / total).collect());
        }
    }
    Err(Error::InvalidParameter(format!("Dirichlet draws underflowed for alpha {alpha}")))
}

pub fn player_label(i: usize, n_players: usize) -> String {
    let width = n_players.saturating_sub(1).to_string().len();
    format!("sim{i:0width$}")
}

/// Halves alternate shot by shot; first-half shots fall in `[0, 0.5)` of the
/// season and second-half shots in `[0.5, 1)`, so a median split by time
/// recovers the halves when shot counts are even.
fn season_time(i: usize, n: usize) -> f64 {
    let base = if i % 2 == 0 { 0.0 } else { 0.5 };
    base + 0.5 * (i / 2) as f64 / n.div_ceil(2) as f64
}

fn simulate_player(spec: &SimulationSpec, index: usize) -> Result<(Vec<f64>, Vec<CanonicalShot>)> {
    let mut rng = seeded(spec.seed, index as u64);
    let n = spec.shots_per_player.draw(&mut rng);
    let theta = sample_dirichlet(spec.alpha, &spec.model.weights, &mut rng)?;
    let frame = &spec.model.frame;
    let id = player_label(index, spec.n_players);
    let pick = if theta.len() > 1 {
        Some(WeightedIndex::new(&theta).map_err(|e| Error::InvalidParameter(e.to_string()))?)
    } else {
        None
    };
    let mut shots = Vec::with_capacity(n);
    for i in 0..n {
        let k = pick.as_ref().map(|w| rng.sample(w)).unwrap_or(0);
        let p = spec.model.components[k].distribution().sample(&mut rng)?;
        let value = spec.postxg.postxg(frame, p);
        let is_goal = rng.random::<f64>() < value;
        let outcome = if is_goal {
            Outcome::Goal
        } else if frame.contains(p) {
            Outcome::Saved
        } else {
            Outcome::OffTarget
        };
        shots.push(CanonicalShot {
            player_id: id.clone(),
            season_id: SIM_SEASON.into(),
            half: if i % 2 == 0 { Half::First } else { Half::Second },
            timestamp: Some(season_time(i, n)),
            body_part: BodyPart::RightFoot,
            reflected: false,
            end_point: p,
            outcome,
            is_goal,
            xg: 0.0,
            postxg_ext: value,
            distance: NOMINAL_DISTANCE_YD,
        });
    }
    Ok((theta, shots))
}

/// Player `i` draws from its own stream `(seed, i)`, so the corpus does not
/// depend on the thread count.
pub fn simulate_corpus(spec: &SimulationSpec) -> Result<SimulatedCorpus> {
    spec.validate()?;
    let per_player: Vec<(Vec<f64>, Vec<CanonicalShot>)> =
        (0..spec.n_players).into_par_iter().map(|i| simulate_player(spec, i)).collect::<Result<_>>()?;
    let mut players = BTreeMap::new();
    let mut shots = Vec::new();
    for (i, (theta, s)) in per_player.into_iter().enumerate() {
        players.insert(player_label(i, spec.n_players), theta);
        shots.extend(s);
    }
    if !shots.is_empty() {
        let mean = shots.iter().map(|s| s.postxg_ext).sum::<f64>() / shots.len() as f64;
        shots.iter_mut().for_each(|s| s.xg = mean);
    }
    Ok(SimulatedCorpus {
        shots,
        truth: GroundTruth { model_hash: spec.model.hash(), alpha: spec.alpha, seed: spec.seed, players },
    })
}

/// Reference scoring surface: corners score, the middle at mid height is
/// where keepers stand.
pub const REFERENCE_POSTXG: [f64; 7] = [-1.0, 0.0, 0.10, 0.0, -1.2, 0.55, 0.0];

/// Active components of the reference model as `(iz, iy, lambda index, weight)`.
const REFERENCE_ACTIVE: [(usize, usize, usize, f64); 12] = [
    (0, 5, 0, 0.14),
    (0, 1, 0, 0.10),
    (0, 9, 0, 0.10),
    (2, 3, 0, 0.08),
    (2, 7, 0, 0.08),
    (5, 1, 0, 0.06),
    (5, 9, 0, 0.06),
    (3, 5, 1, 0.12),
    (0, 5, 1, 0.10),
    (5, 5, 1, 0.08),
    (1, 0, 1, 0.04),
    (1, 10, 1, 0.04),
];

/// A trimmed twelve-component model on the default grid plus the
/// reference PostXg surface; the default simulation source.
pub fn reference_model() -> (MixtureModel, PostXgModel) {
    let spec = GridSpec::default();
    let frame = GoalFrame::default();
    let grid = build_grid(&spec, &frame, &CovarianceInterpolator::default()).expect("default grid is valid");
    let l = spec.lambdas.len();
    let mut components = Vec::new();
    let mut weights = Vec::new();
    for (iz, iy, il, w) in REFERENCE_ACTIVE {
        components.push(grid[(iz * spec.n_y + iy) * l + il].clone());
        weights.push(w);
    }
    let mut model = MixtureModel::new(frame, components, weights).expect("reference weights form a simplex");
    model.grid = Some(spec);
    model.trimmed = true;
    model.prune_threshold = Some(crate::mixture::DEFAULT_PRUNE_THRESHOLD);
    (model, PostXgModel::new(REFERENCE_POSTXG, 0.0).expect("finite coefficients"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{GoalPoint, SymMatrix2};
    use crate::mixture::MixtureComponent;

    fn spec(n_players: usize, shots: ShotsPerPlayer, alpha: f64) -> SimulationSpec {
        let (model, postxg) = reference_model();
        SimulationSpec { n_players, shots_per_player: shots, alpha, model, postxg, seed: 42 }
    }

    #[test]
    fn zero_shots_still_emits_truth() {
        let c = simulate_corpus(&spec(5, ShotsPerPlayer::Fixed(0), 30.0)).unwrap();
        assert!(c.shots.is_empty());
        assert_eq!(c.truth.players.len(), 5);
    }

    #[test]
    fn single_component_truth_is_one() {
        let comp = MixtureComponent::new(0, GoalPoint::new(0.0, 1.0), SymMatrix2::identity(), 1.0).unwrap();
        let model = MixtureModel::new(GoalFrame::default(), vec![comp], vec![1.0]).unwrap();
        let s = SimulationSpec {
            n_players: 4,
            shots_per_player: ShotsPerPlayer::Fixed(3),
            alpha: 30.0,
            model,
            postxg: PostXgModel::constant(0.2).unwrap(),
            seed: 1,
        };
        let c = simulate_corpus(&s).unwrap();
        assert!(c.truth.players.values().all(|t| t == &vec![1.0]));
        assert_eq!(c.shots.len(), 12);
    }

    #[test]
    fn huge_alpha_gives_beta() {
        let s = spec(200, ShotsPerPlayer::Fixed(0), 1e6);
        let c = simulate_corpus(&s).unwrap();
        let l1s: Vec<f64> = c
            .truth
            .players
            .values()
            .map(|t| t.iter().zip(&s.model.weights).map(|(a, b)| (a - b).abs()).sum())
            .collect();
        // E|theta_k - beta_k| ~ sqrt(2 / pi) * sd_k for large alpha
        let expect: f64 = s
            .model
            .weights
            .iter()
            .map(|b| (2.0 / std::f64::consts::PI).sqrt() * (b * (1.0 - b) / (s.alpha + 1.0)).sqrt())
            .sum();
        let mean = l1s.iter().sum::<f64>() / l1s.len() as f64;
        assert!((mean / expect - 1.0).abs() < 0.1, "{mean} vs {expect}");

        let tight = SimulationSpec { alpha: 1e8, ..s };
        let c = simulate_corpus(&tight).unwrap();
        for t in c.truth.players.values() {
            let l1: f64 = t.iter().zip(&tight.model.weights).map(|(a, b)| (a - b).abs()).sum();
            assert!(l1 < 1e-3, "{l1}");
        }
    }

    #[test]
    fn dirichlet_mean_is_beta() {
        let s = spec(10_000, ShotsPerPlayer::Fixed(0), 30.0);
        let c = simulate_corpus(&s).unwrap();
        let n = c.truth.players.len() as f64;
        for (k, &b) in s.model.weights.iter().enumerate() {
            let mean = c.truth.players.values().map(|t| t[k]).sum::<f64>() / n;
            let se = (b * (1.0 - b) / (s.alpha + 1.0) / n).sqrt();
            assert!((mean - b).abs() < 3.0 * se, "component {k}: {mean} vs {b}");
        }
    }

    #[test]
    fn zero_weight_components_draw_exact_zero() {
        let mut rng = seeded(3, 0);
        let t = sample_dirichlet(5.0, &[0.5, 0.0, 0.5], &mut rng).unwrap();
        assert_eq!(t[1], 0.0);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn corpus_is_reproducible_and_well_formed() {
        let s = spec(30, ShotsPerPlayer::Uniform { min: 3, max: 9 }, 10.0);
        let a = simulate_corpus(&s).unwrap();
        let b = simulate_corpus(&s).unwrap();
        assert_eq!(serde_json::to_string(&a.shots).unwrap(), serde_json::to_string(&b.shots).unwrap());
        assert_eq!(a.truth, b.truth);
        let frame = GoalFrame::default();
        let xg = a.shots[0].xg;
        for sh in &a.shots {
            assert!(sh.end_point.z >= 0.0);
            assert_eq!(sh.xg, xg);
            if !frame.contains(sh.end_point) {
                assert!(!sh.is_goal);
                assert_eq!(sh.postxg_ext, 0.0);
            }
        }
        let first: Vec<&CanonicalShot> = a.shots.iter().filter(|s| s.player_id == a.shots[0].player_id).collect();
        for (i, sh) in first.iter().enumerate() {
            assert_eq!(sh.half, if i % 2 == 0 { Half::First } else { Half::Second });
        }
    }

    #[test]
    fn labels_sort_in_player_order() {
        assert_eq!(player_label(7, 1000), "sim007");
        assert_eq!(player_label(0, 1), "sim0");
    }
}
