//! Coordinates-only PostXg model and Monte Carlo component values.
//!
//! The scoring probability of an on-frame end point is a logistic of a
//! cubic in `y` and a cubic in `z` (no cross terms). Off-frame points score
//! zero by definition. A component's value is the expected PostXg of a shot
//! drawn from it.

use std::path::Path;

use nalgebra::{SMatrix, SVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GoalFrame, GoalPoint, TruncatedGaussian};
use crate::mixture::MixtureModel;
use crate::rng::seeded;

pub const N_COEFFICIENTS: usize = 7;
pub const COEFFICIENT_NAMES: [&str; N_COEFFICIENTS] = ["intercept", "y", "y2", "y3", "z", "z2", "z3"];
pub const DEFAULT_RIDGE: f64 = 1e-4;
pub const DEFAULT_VALUE_SAMPLES: usize = 100_000;

type Vec7 = SVector<f64, N_COEFFICIENTS>;
type Mat7 = SMatrix<f64, N_COEFFICIENTS, N_COEFFICIENTS>;

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn features(p: GoalPoint) -> [f64; N_COEFFICIENTS] {
    let (y, z) = (p.y, p.z);
    [1.0, y, y * y, y * y * y, z, z * z, z * z * z]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostXgModel {
    pub coefficients: [f64; N_COEFFICIENTS],
    pub ridge: f64,
}

impl PostXgModel {
    pub fn new(coefficients: [f64; N_COEFFICIENTS], ridge: f64) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("PostXg coefficients must be finite".into()));
        }
        if !(ridge >= 0.0) {
            return Err(Error::InvalidParameter(format!("ridge must be non-negative, got {ridge}")));
        }
        Ok(PostXgModel { coefficients, ridge })
    }

    /// A model whose on-frame probability is `p` everywhere.
    pub fn constant(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!("constant probability must be in (0, 1), got {p}")));
        }
        let mut c = [0.0; N_COEFFICIENTS];
        c[0] = (p / (1.0 - p)).ln();
        PostXgModel::new(c, 0.0)
    }

    pub fn log_odds(&self, p: GoalPoint) -> f64 {
        features(p).iter().zip(&self.coefficients).map(|(x, c)| x * c).sum()
    }

    /// The unmasked logistic; what the fit models on the frame.
    pub fn probability_unmasked(&self, p: GoalPoint) -> f64 {
        logistic(self.log_odds(p))
    }

    pub fn postxg(&self, frame: &GoalFrame, p: GoalPoint) -> f64 {
        if frame.contains(p) {
            self.probability_unmasked(p)
        } else {
            0.0
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&PostXgFile::from(self)).map_err(|e| Error::format(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let f: PostXgFile = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
        f.into_model().map_err(|e| Error::format(path, e))
    }
}

pub fn postxg(model: &PostXgModel, frame: &GoalFrame, p: GoalPoint) -> f64 {
    model.postxg(frame, p)
}

#[derive(Serialize, Deserialize)]
struct Coefficients {
    intercept: f64,
    y: f64,
    y2: f64,
    y3: f64,
    z: f64,
    z2: f64,
    z3: f64,
}

#[derive(Serialize, Deserialize)]
struct PostXgFile {
    coefficients: Coefficients,
    ridge: f64,
}

impl From<&PostXgModel> for PostXgFile {
    fn from(m: &PostXgModel) -> Self {
        let c = m.coefficients;
        PostXgFile {
            coefficients: Coefficients { intercept: c[0], y: c[1], y2: c[2], y3: c[3], z: c[4], z2: c[5], z3: c[6] },
            ridge: m.ridge,
        }
    }
}

impl PostXgFile {
    fn into_model(self) -> Result<PostXgModel> {
        let c = self.coefficients;
        PostXgModel::new([c.intercept, c.y, c.y2, c.y3, c.z, c.z2, c.z3], self.ridge)
    }
}

// ---------------------------------------------------------------------------
// Fitting

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PostXgFitOptions {
    /// Penalty on the non-intercept coefficients, per observation.
    pub ridge: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for PostXgFitOptions {
    fn default() -> Self {
        PostXgFitOptions { ridge: DEFAULT_RIDGE, grad_tol: 1e-8, max_iter: 100 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostXgFit {
    pub model: PostXgModel,
    pub iterations: usize,
    pub converged: bool,
    pub n_used: usize,
    pub n_off_frame: usize,
}

struct Design {
    x: Vec<[f64; N_COEFFICIENTS]>,
    y: Vec<f64>,
}

impl Design {
    /// Mean penalized log-likelihood (to be maximized).
    fn objective(&self, w: &Vec7, ridge: f64) -> f64 {
        let mut ll = 0.0;
        for (x, &t) in self.x.iter().zip(&self.y) {
            let eta = dot(x, w);
            ll += t * eta - softplus(eta);
        }
        ll / self.x.len() as f64 - 0.5 * ridge * penalty_norm(w)
    }

    fn gradient_hessian(&self, w: &Vec7, ridge: f64) -> (Vec7, Mat7) {
        let n = self.x.len() as f64;
        let mut g = Vec7::zeros();
        let mut h = Mat7::zeros();
        for (x, &t) in self.x.iter().zip(&self.y) {
            let p = logistic(dot(x, w));
            let xv = Vec7::from_row_slice(x);
            g += xv * (t - p);
            h += xv * xv.transpose() * (p * (1.0 - p));
        }
        g /= n;
        h /= n;
        for j in 1..N_COEFFICIENTS {
            g[j] -= ridge * w[j];
            h[(j, j)] += ridge;
        }
        (g, h)
    }
}

fn dot(x: &[f64; N_COEFFICIENTS], w: &Vec7) -> f64 {
    x.iter().zip(w.iter()).map(|(a, b)| a * b).sum()
}

fn penalty_norm(w: &Vec7) -> f64 {
    w.iter().skip(1).map(|c| c * c).sum()
}

fn design(shots: &[(GoalPoint, bool)], frame: &GoalFrame) -> Result<(Design, usize)> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut off = 0;
    for (p, goal) in shots {
        if !p.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite training point {p:?}")));
        }
        if !frame.contains(*p) {
            off += 1;
            continue;
        }
        x.push(features(*p));
        y.push(if *goal { 1.0 } else { 0.0 });
    }
    let goals = y.iter().filter(|&&t| t == 1.0).count();
    if goals == 0 || goals == y.len() {
        return Err(Error::InvalidInput(format!(
            "PostXg training needs both goals and non-goals on the frame ({goals} goals out of {})",
            y.len()
        )));
    }
    Ok((Design { x, y }, off))
}

/// Ridge-penalized logistic fit by damped Newton steps. Off-frame shots are
/// excluded from training.
pub fn fit_postxg(shots: &[(GoalPoint, bool)], frame: &GoalFrame, opts: &PostXgFitOptions) -> Result<PostXgFit> {
    if !(opts.ridge >= 0.0) {
        return Err(Error::InvalidParameter(format!("ridge must be non-negative, got {}", opts.ridge)));
    }
    let (d, n_off_frame) = design(shots, frame)?;
    let mut w = Vec7::zeros();
    let mut obj = d.objective(&w, opts.ridge);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let (g, h) = d.gradient_hessian(&w, opts.ridge);
        if g.amax() < opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let step = match h.cholesky() {
            Some(c) => c.solve(&g),
            None => g,
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let cand = w + step * t;
            let cand_obj = d.objective(&cand, opts.ridge);
            if cand_obj.is_finite() && cand_obj >= obj {
                w = cand;
                obj = cand_obj;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            let (g, _) = d.gradient_hessian(&w, opts.ridge);
            if g.amax() < opts.grad_tol * 1e3 {
                converged = true;
                break;
            }
            return Err(Error::ConvergenceFailure(format!(
                "PostXg Newton step found no ascent after step halving (gradient {:e})",
                g.amax()
            )));
        }
    }
    if !converged {
        let (g, _) = d.gradient_hessian(&w, opts.ridge);
        converged = g.amax() < opts.grad_tol;
    }
    let mut c = [0.0; N_COEFFICIENTS];
    c.copy_from_slice(w.as_slice());
    Ok(PostXgFit {
        model: PostXgModel::new(c, opts.ridge)?,
        iterations,
        converged,
        n_used: d.x.len(),
        n_off_frame,
    })
}

// ---------------------------------------------------------------------------
// Component values

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentValue {
    pub v: f64,
    pub mc_std_error: f64,
    pub n_samples: usize,
}

/// Monte Carlo estimate of `E[postxg(X)]` for `X` drawn from `dist`.
pub fn component_value(
    dist: &TruncatedGaussian,
    model: &PostXgModel,
    frame: &GoalFrame,
    n_samples: usize,
    seed: u64,
) -> Result<ComponentValue> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("component value needs at least one sample".into()));
    }
    let mut rng = seeded(seed, 0);
    // Welford
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..n_samples {
        let x = model.postxg(frame, dist.sample(&mut rng)?);
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let sd = if n_samples > 1 { (m2 / (n_samples - 1) as f64).sqrt() } else { 0.0 };
    Ok(ComponentValue { v: mean, mc_std_error: sd / (n_samples as f64).sqrt(), n_samples })
}

/// Values for every component of `mixture`, component `k` seeded with
/// `seed + k`.
pub fn component_values(
    mixture: &MixtureModel,
    model: &PostXgModel,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<ComponentValue>> {
    let dists: Vec<&TruncatedGaussian> = mixture.distributions().collect();
    dists
        .par_iter()
        .enumerate()
        .map(|(k, d)| component_value(d, model, &mixture.frame, n_samples, seed.wrapping_add(k as u64)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentValuesFile {
    pub model_hash: String,
    pub seed: u64,
    pub n_samples: usize,
    pub values: Vec<ComponentValue>,
}

impl ComponentValuesFile {
    pub fn compute(mixture: &MixtureModel, model: &PostXgModel, n_samples: usize, seed: u64) -> Result<Self> {
        Ok(ComponentValuesFile {
            model_hash: mixture.hash(),
            seed,
            n_samples,
            values: component_values(mixture, model, n_samples, seed)?,
        })
    }

    pub fn check_model(&self, mixture: &MixtureModel) -> Result<()> {
        let found = mixture.hash();
        if self.model_hash != found {
            return Err(Error::ModelHashMismatch { expected: self.model_hash.clone(), found });
        }
        if self.values.len() != mixture.len() {
            return Err(Error::InvalidInput("component values do not match the model".into()));
        }
        Ok(())
    }

    pub fn v(&self) -> Vec<f64> {
        self.values.iter().map(|c| c.v).collect()
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SymMatrix2;
    use crate::mixture::{build_grid, CovarianceInterpolator, GridSpec};
    use rand::Rng;

    const TRUTH: [f64; 7] = [-1.2, 0.05, -0.12, 0.0, -0.6, 0.5, -0.05];

    fn uniform_shots(n: usize, coef: [f64; 7], seed: u64) -> Vec<(GoalPoint, bool)> {
        let m = PostXgModel::new(coef, 0.0).unwrap();
        let mut rng = seeded(seed, 0);
        (0..n)
            .map(|_| {
                let p = GoalPoint::new(rng.random_range(-4.0..=4.0), rng.random_range(0.0..=2.67));
                let goal = rng.random::<f64>() < m.probability_unmasked(p);
                (p, goal)
            })
            .collect()
    }

    #[test]
    fn postxg_examples() {
        let f = GoalFrame::default();
        let zero = PostXgModel::new([0.0; 7], 0.0).unwrap();
        assert_eq!(zero.postxg(&f, GoalPoint::new(5.0, 1.0)), 0.0);
        assert_eq!(zero.postxg(&f, GoalPoint::new(1.0, 1.0)), 0.5);
        let m = PostXgModel::new([-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.0).unwrap();
        assert!((m.postxg(&f, GoalPoint::new(0.3, 2.0)) - 0.268_941_421_369_995_1).abs() < 1e-12);
    }

    #[test]
    fn logistic_is_stable_at_extremes() {
        assert_eq!(logistic(-800.0), 0.0);
        assert_eq!(logistic(800.0), 1.0);
        assert!((softplus(-800.0)).abs() < 1e-300);
        assert_eq!(softplus(800.0), 800.0);
    }

    #[test]
    fn identical_labels_are_rejected() {
        let shots = vec![(GoalPoint::new(0.0, 1.0), false); 10];
        assert!(matches!(
            fit_postxg(&shots, &GoalFrame::default(), &PostXgFitOptions::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn off_frame_shots_are_excluded() {
        let mut shots = uniform_shots(2000, TRUTH, 1);
        let a = fit_postxg(&shots, &GoalFrame::default(), &PostXgFitOptions::default()).unwrap();
        shots.push((GoalPoint::new(6.0, 1.0), false));
        shots.push((GoalPoint::new(0.0, 3.5), true));
        let b = fit_postxg(&shots, &GoalFrame::default(), &PostXgFitOptions::default()).unwrap();
        assert_eq!(b.n_off_frame, 2);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn recovers_known_coefficients() {
        let shots = uniform_shots(100_000, TRUTH, 2);
        let fit = fit_postxg(&shots, &GoalFrame::default(), &PostXgFitOptions::default()).unwrap();
        assert!(fit.converged);
        let truth = PostXgModel::new(TRUTH, 0.0).unwrap();
        let se: f64 = shots
            .iter()
            .map(|(p, _)| (fit.model.probability_unmasked(*p) - truth.probability_unmasked(*p)).powi(2))
            .sum();
        let rmse = (se / shots.len() as f64).sqrt();
        assert!(rmse < 0.02, "rmse {rmse}");
    }

    #[test]
    fn duplicating_data_leaves_fit_unchanged() {
        let shots = uniform_shots(3000, TRUTH, 3);
        let twice = [shots.clone(), shots.clone()].concat();
        let a = fit_postxg(&shots, &GoalFrame::default(), &PostXgFitOptions::default()).unwrap();
        let b = fit_postxg(&twice, &GoalFrame::default(), &PostXgFitOptions::default()).unwrap();
        for (x, y) in a.model.coefficients.iter().zip(&b.model.coefficients) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    /// Gradient ascent with Armijo backtracking, run in whitened coordinates
    /// `w = L^-T u` where `L L^T = X^T X / n` so the raw cubic features are
    /// not badly conditioned.
    fn gradient_reference(d: &Design, ridge: f64) -> Vec7 {
        let mut gram = Mat7::zeros();
        for x in &d.x {
            let xv = Vec7::from_row_slice(x);
            gram += xv * xv.transpose();
        }
        gram /= d.x.len() as f64;
        let l = gram.cholesky().unwrap().l();
        let lt_inv = l.transpose().try_inverse().unwrap();
        let l_inv = l.try_inverse().unwrap();
        let grad_u = |u: &Vec7| l_inv * d.gradient_hessian(&(lt_inv * u), ridge).0;
        let obj_u = |u: &Vec7| d.objective(&(lt_inv * u), ridge);
        let mut u = Vec7::zeros();
        let mut obj = obj_u(&u);
        let mut g = grad_u(&u);
        let mut t: f64 = 1.0;
        for _ in 0..100_000 {
            if g.amax() < 1e-10 {
                break;
            }
            t = (t * 2.0).min(64.0);
            loop {
                let cand = u + g * t;
                let o = obj_u(&cand);
                if o >= obj + 1e-4 * t * g.norm_squared() || t < 1e-12 {
                    u = cand;
                    obj = o;
                    break;
                }
                t *= 0.5;
            }
            g = grad_u(&u);
        }
        lt_inv * u
    }

    #[test]
    fn newton_matches_gradient_reference() {
        let shots = uniform_shots(1000, TRUTH, 4);
        let frame = GoalFrame::default();
        let opts = PostXgFitOptions { grad_tol: 1e-12, ..Default::default() };
        let fit = fit_postxg(&shots, &frame, &opts).unwrap();
        let (d, _) = design(&shots, &frame).unwrap();
        let w = gradient_reference(&d, opts.ridge);
        for (a, b) in fit.model.coefficients.iter().zip(w.iter()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn file_round_trip() {
        let m = PostXgModel::new(TRUTH, 1e-4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("postxg.json");
        m.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        for name in COEFFICIENT_NAMES {
            assert!(text.contains(&format!("\"{name}\"")));
        }
        assert_eq!(PostXgModel::load(&path).unwrap(), m);
    }

    #[test]
    fn far_off_frame_component_has_zero_value() {
        let d = TruncatedGaussian::new(GoalPoint::new(50.0, 1.0), SymMatrix2::identity().scaled(1e-4)).unwrap();
        let m = PostXgModel::new(TRUTH, 0.0).unwrap();
        let v = component_value(&d, &m, &GoalFrame::default(), 10_000, 1).unwrap();
        assert_eq!(v.v, 0.0);
        assert_eq!(v.mc_std_error, 0.0);
    }

    #[test]
    fn constant_model_value_matches_frame_probability() {
        let frame = GoalFrame::default();
        let d = TruncatedGaussian::new(GoalPoint::new(3.2, 2.0), SymMatrix2::new(0.8, 0.3, 0.6)).unwrap();
        let cv = component_value(&d, &PostXgModel::constant(0.3).unwrap(), &frame, 100_000, 11).unwrap();
        let mut rng = seeded(999, 5);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| frame.contains(d.sample(&mut rng).unwrap())).count();
        let p = hits as f64 / n as f64;
        let oracle_se = 0.3 * (p * (1.0 - p) / n as f64).sqrt();
        let se = (cv.mc_std_error.powi(2) + oracle_se.powi(2)).sqrt();
        assert!((cv.v - 0.3 * p).abs() < 3.0 * se, "{} vs {}", cv.v, 0.3 * p);
    }

    #[test]
    fn fresh_seed_with_more_samples_agrees() {
        let d = TruncatedGaussian::new(GoalPoint::new(1.0, 0.5), SymMatrix2::new(0.7, 0.15, 0.3)).unwrap();
        let m = PostXgModel::new(TRUTH, 0.0).unwrap();
        let f = GoalFrame::default();
        let a = component_value(&d, &m, &f, 20_000, 1).unwrap();
        let b = component_value(&d, &m, &f, 40_000, 2).unwrap();
        let se = (a.mc_std_error.powi(2) + b.mc_std_error.powi(2)).sqrt();
        assert!((a.v - b.v).abs() < 3.0 * se);
    }

    #[test]
    fn narrow_components_beat_their_wide_twins() {
        let spec = GridSpec::default();
        let frame = GoalFrame::default();
        let comps = build_grid(&spec, &frame, &CovarianceInterpolator::default()).unwrap();
        let m = PostXgModel::new([-0.5, 0.0, -0.05, 0.0, 0.0, 0.0, 0.0], 0.0).unwrap();
        let mut max_on_frame: f64 = 0.0;
        for iy in 0..=80 {
            for iz in 0..=27 {
                let p = GoalPoint::new(-4.0 + 0.1 * iy as f64, 0.1 * iz as f64);
                max_on_frame = max_on_frame.max(m.postxg(&frame, p));
            }
        }
        for pair in comps.chunks(2) {
            let (iy, iz) = ((pair[0].grid_index / 2) % spec.n_y, pair[0].grid_index / 2 / spec.n_y);
            let narrow = component_value(pair[0].distribution(), &m, &frame, 20_000, 7).unwrap();
            let wide = component_value(pair[1].distribution(), &m, &frame, 20_000, 7).unwrap();
            assert!(narrow.v >= 0.0 && narrow.v <= max_on_frame);
            assert!(wide.v >= 0.0 && wide.v <= max_on_frame);
            if iy == 0 || iy == spec.n_y - 1 || iz == 0 || iz == spec.n_z - 1 {
                continue;
            }
            assert!(narrow.v >= wide.v, "component {} narrow {} wide {}", pair[0].grid_index, narrow.v, wide.v);
        }
    }
}
