//! The saturated component grid and the global mixture weights.
//!
//! Components are fixed truncated Gaussians laid on an inclusive grid of
//! intended locations over the goal mouth, each paired with every
//! covariance scale. Only the weights are inferred: MAP-EM under a
//! symmetric Dirichlet prior, whose small concentration pushes the weight of
//! unsupported components towards zero. Components below a threshold are
//! then pruned and the weights re-estimated on the survivors.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{GoalFrame, GoalPoint, SymMatrix2, TruncatedGaussian};

pub const DEFAULT_PRIOR_ALPHA: f64 = 0.5;
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_y: usize,
    pub n_z: usize,
    pub lambdas: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n_y: 11, n_z: 6, lambdas: vec![1.0, 3.8] }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_y < 2 || self.n_z < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 2 x 2 means, got {} x {}",
                self.n_y, self.n_z
            )));
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "covariance scales must be positive, got {:?}",
                self.lambdas
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_y * self.n_z * self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Execution-error covariance as a function of intended shot height:
/// linear between two measured heights, extrapolated outside them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceInterpolator {
    pub low_z: f64,
    pub low: SymMatrix2,
    pub high_z: f64,
    pub high: SymMatrix2,
    pub eigenvalue_floor: f64,
}

impl Default for CovarianceInterpolator {
    fn default() -> Self {
        CovarianceInterpolator {
            low_z: 0.14,
            low: SymMatrix2::new(0.704, 0.157, 0.297),
            high_z: 1.75,
            high: SymMatrix2::new(0.782, 0.442, 0.742),
            eigenvalue_floor: 1e-4,
        }
    }
}

impl CovarianceInterpolator {
    /// A height-independent error model.
    pub fn constant(cov: SymMatrix2) -> Self {
        CovarianceInterpolator { low_z: 0.0, low: cov, high_z: 1.0, high: cov, eigenvalue_floor: 1e-4 }
    }

    pub fn at(&self, intended_z: f64) -> Result<SymMatrix2> {
        if !(intended_z >= 0.0) {
            return Err(Error::InvalidParameter(format!("intended height must be >= 0, got {intended_z}")));
        }
        let t = (intended_z - self.low_z) / (self.high_z - self.low_z);
        // (1 - t) a + t b hits both endpoints exactly
        let lerp = |a: f64, b: f64| (1.0 - t) * a + t * b;
        let m = SymMatrix2::new(
            lerp(self.low.yy, self.high.yy),
            lerp(self.low.yz, self.high.yz),
            lerp(self.low.zz, self.high.zz),
        );
        Ok(m.with_eigenvalue_floor(self.eigenvalue_floor))
    }
}

pub fn interpolate_covariance(intended_z: f64) -> Result<SymMatrix2> {
    CovarianceInterpolator::default().at(intended_z)
}

/// A fixed truncated Gaussian: intended location, nominal execution error
/// and its scale.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    /// Position in the saturated grid this component came from.
    pub grid_index: usize,
    pub mean: GoalPoint,
    pub base_covariance: SymMatrix2,
    pub lambda: f64,
    dist: TruncatedGaussian,
}

impl MixtureComponent {
    pub fn new(grid_index: usize, mean: GoalPoint, base_covariance: SymMatrix2, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        let dist = TruncatedGaussian::new(mean, base_covariance.scaled(lambda))?;
        Ok(MixtureComponent { grid_index, mean, base_covariance, lambda, dist })
    }

    pub fn effective_covariance(&self) -> SymMatrix2 {
        self.dist.covariance()
    }

    pub fn distribution(&self) -> &TruncatedGaussian {
        &self.dist
    }
}

/// Lays `n_y * n_z` means evenly over the frame, edges included, and pairs
/// each with every scale. Index order: row (z) major, then column (y), then scale.
pub fn build_grid(
    spec: &GridSpec,
    frame: &GoalFrame,
    error_model: &CovarianceInterpolator,
) -> Result<Vec<MixtureComponent>> {
    spec.validate()?;
    frame.validate()?;
    let mut out = Vec::with_capacity(spec.len());
    for iz in 0..spec.n_z {
        let z = frame.height * iz as f64 / (spec.n_z - 1) as f64;
        let base = error_model.at(z)?;
        for iy in 0..spec.n_y {
            // integer numerator keeps the grid exactly symmetric about 0
            let steps = 2 * iy as i64 - (spec.n_y as i64 - 1);
            let y = frame.half_width() * steps as f64 / (spec.n_y - 1) as f64;
            for &lambda in &spec.lambdas {
                out.push(MixtureComponent::new(out.len(), GoalPoint::new(y, z), base, lambda)?);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub final_log_posterior: f64,
    pub n_shots: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    pub frame: GoalFrame,
    pub grid: Option<GridSpec>,
    pub components: Vec<MixtureComponent>,
    pub weights: Vec<f64>,
    pub trimmed: bool,
    pub prune_threshold: Option<f64>,
    pub diagnostics: Option<FitDiagnostics>,
}

impl MixtureModel {
    pub fn new(frame: GoalFrame, components: Vec<MixtureComponent>, weights: Vec<f64>) -> Result<Self> {
        let model = MixtureModel {
            frame,
            grid: None,
            components,
            weights,
            trimmed: false,
            prune_threshold: None,
            diagnostics: None,
        };
        model.validate()?;
        Ok(model)
    }

    /// Saturated default grid with uniform weights.
    pub fn saturated(spec: &GridSpec, frame: &GoalFrame, error_model: &CovarianceInterpolator) -> Result<Self> {
        let components = build_grid(spec, frame, error_model)?;
        let k = components.len();
        let mut m = MixtureModel::new(*frame, components, vec![1.0 / k as f64; k])?;
        m.grid = Some(spec.clone());
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidModel("no components".into()));
        }
        if self.weights.len() != self.components.len() {
            return Err(Error::InvalidModel(format!(
                "{} weights for {} components",
                self.weights.len(),
                self.components.len()
            )));
        }
        check_simplex(&self.weights, 1e-9).map_err(Error::InvalidModel)
    }

    pub fn distributions(&self) -> impl Iterator<Item = &TruncatedGaussian> {
        self.components.iter().map(|c| c.distribution())
    }

    /// Mixture density at a point under the global weights.
    pub fn pdf(&self, p: GoalPoint) -> f64 {
        self.components.iter().zip(&self.weights).map(|(c, w)| w * c.distribution().log_pdf(p).exp()).sum()
    }

    /// SHA-256 over the canonical JSON of components and weights.
    pub fn hash(&self) -> String {
        let doc = ModelFile::from(self);
        let body = serde_json::to_vec(&(&doc.components, &doc.weights)).expect("model serializes");
        hex::encode(Sha256::digest(&body))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&ModelFile::from(self)).map_err(|e| Error::format(path, e))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
        file.into_model().map_err(|e| Error::format(path, e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidModel(e.to_string()))?;
        file.into_model()
    }
}

pub(crate) fn check_simplex(w: &[f64], tol: f64) -> Result<(), String> {
    if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err("weights must be finite and non-negative".into());
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > tol {
        return Err(format!("weights sum to {s}, not 1"));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ComponentFile {
    index: usize,
    mean: GoalPoint,
    base_covariance: SymMatrix2,
    lambda: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    frame: GoalFrame,
    #[serde(default)]
    grid: Option<GridSpec>,
    trimmed: bool,
    #[serde(default)]
    prune_threshold: Option<f64>,
    components: Vec<ComponentFile>,
    weights: Vec<f64>,
    #[serde(default)]
    diagnostics: Option<FitDiagnostics>,
}

impl From<&MixtureModel> for ModelFile {
    fn from(m: &MixtureModel) -> Self {
        ModelFile {
            frame: m.frame,
            grid: m.grid.clone(),
            trimmed: m.trimmed,
            prune_threshold: m.prune_threshold,
            components: m
                .components
                .iter()
                .map(|c| ComponentFile {
                    index: c.grid_index,
                    mean: c.mean,
                    base_covariance: c.base_covariance,
                    lambda: c.lambda,
                })
                .collect(),
            weights: m.weights.clone(),
            diagnostics: m.diagnostics.clone(),
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<MixtureModel> {
        let components = self
            .components
            .into_iter()
            .map(|c| MixtureComponent::new(c.index, c.mean, c.base_covariance, c.lambda))
            .collect::<Result<Vec<_>>>()?;
        let m = MixtureModel {
            frame: self.frame,
            grid: self.grid,
            components,
            weights: self.weights,
            trimmed: self.trimmed,
            prune_threshold: self.prune_threshold,
            diagnostics: self.diagnostics,
        };
        m.validate()?;
        Ok(m)
    }
}

// ---------------------------------------------------------------------------
// Density tables shared by the weight fits

/// Per-shot component densities, stored as `exp(log f_ik - max_k log f_ik)`
/// with the row maximum kept aside so nothing underflows.
#[derive(Debug, Clone)]
pub(crate) struct DensityTable {
    pub k: usize,
    pub row_max: Vec<f64>,
    pub scaled: Vec<f64>,
}

const CHUNK: usize = 2048;

impl DensityTable {
    pub fn new(shots: &[GoalPoint], dists: &[&TruncatedGaussian]) -> Result<Self> {
        let k = dists.len();
        let mut row_max = vec![0.0; shots.len()];
        let mut scaled = vec![0.0; shots.len() * k];
        let bad = scaled
            .par_chunks_mut(k.max(1))
            .zip(row_max.par_iter_mut())
            .zip(shots.par_iter())
            .map(|((row, m), p)| {
                if !p.is_finite() {
                    return true;
                }
                for (r, d) in row.iter_mut().zip(dists) {
                    *r = d.log_pdf(*p);
                }
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if !max.is_finite() {
                    return true;
                }
                *m = max;
                for r in row.iter_mut() {
                    *r = (*r - max).exp();
                }
                false
            })
            .filter(|&b| b)
            .count();
        if bad > 0 {
            return Err(Error::InvalidInput(format!(
                "{bad} shots are non-finite or outside the support (z < 0)"
            )));
        }
        Ok(DensityTable { k, row_max, scaled })
    }

    pub fn n(&self) -> usize {
        self.row_max.len()
    }

    /// Expected component counts and the log-likelihood under `weights`.
    /// Chunked so the floating-point reduction order never depends on threads.
    pub fn e_step(&self, weights: &[f64]) -> (Vec<f64>, f64) {
        let k = self.k;
        let partials: Vec<(Vec<f64>, f64)> = self
            .scaled
            .par_chunks(CHUNK * k)
            .zip(self.row_max.par_chunks(CHUNK))
            .map(|(rows, maxes)| self.e_step_chunk(rows, maxes, weights))
            .collect();
        let mut counts = vec![0.0; k];
        let mut ll = 0.0;
        for (c, l) in partials {
            for (a, b) in counts.iter_mut().zip(c) {
                *a += b;
            }
            ll += l;
        }
        (counts, ll)
    }

    #[cfg(test)]
    pub fn e_step_serial(&self, weights: &[f64]) -> (Vec<f64>, f64) {
        self.e_step_chunk(&self.scaled, &self.row_max, weights)
    }

    fn e_step_chunk(&self, rows: &[f64], maxes: &[f64], weights: &[f64]) -> (Vec<f64>, f64) {
        let k = self.k;
        let mut counts = vec![0.0; k];
        let mut ll = 0.0;
        for (row, &m) in rows.chunks_exact(k).zip(maxes) {
            let s: f64 = row.iter().zip(weights).map(|(d, w)| d * w).sum();
            ll += m + s.ln();
            let inv = 1.0 / s;
            for ((c, d), w) in counts.iter_mut().zip(row).zip(weights) {
                *c += d * w * inv;
            }
        }
        (counts, ll)
    }

    pub fn log_likelihood(&self, weights: &[f64]) -> f64 {
        self.e_step(weights).1
    }
}

// ---------------------------------------------------------------------------
// Global weights

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub prior_alpha: f64,
    /// Stop once the objective improves by less than this per shot.
    pub tol_per_shot: f64,
    pub max_iter: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions { prior_alpha: DEFAULT_PRIOR_ALPHA, tol_per_shot: 1e-8, max_iter: 500 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalFit {
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective before the first update and after every update.
    pub trace: Vec<f64>,
    pub n_shots: usize,
}

impl GlobalFit {
    pub fn final_log_posterior(&self) -> f64 {
        *self.trace.last().expect("trace is never empty")
    }
}

/// Log-likelihood plus the Dirichlet(`prior_alpha`) log-density written in
/// log-ratio coordinates, where the simplex Jacobian lifts every exponent by
/// one: `sum_k alpha * ln(beta_k)`. This objective is bounded above, so the
/// mode exists even for `alpha < 1`; in simplex coordinates it would not.
pub fn penalized_log_posterior(log_likelihood: f64, weights: &[f64], prior_alpha: f64) -> f64 {
    let prior: f64 = weights.iter().map(|w| w.ln()).sum();
    log_likelihood + prior_alpha * prior
}

/// MAP weights over fixed components (uniform start).
pub fn fit_global_weights(
    shots: &[GoalPoint],
    components: &[MixtureComponent],
    opts: &EmOptions,
) -> Result<GlobalFit> {
    let k = components.len();
    fit_global_weights_from(shots, components, &vec![1.0 / k.max(1) as f64; k], opts)
}

pub fn fit_global_weights_from(
    shots: &[GoalPoint],
    components: &[MixtureComponent],
    init: &[f64],
    opts: &EmOptions,
) -> Result<GlobalFit> {
    if shots.is_empty() {
        return Err(Error::InvalidInput("global weight fit needs at least one shot".into()));
    }
    if components.is_empty() {
        return Err(Error::InvalidModel("no components".into()));
    }
    if !(opts.prior_alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("prior alpha must be positive, got {}", opts.prior_alpha)));
    }
    if init.len() != components.len() {
        return Err(Error::InvalidInput("initial weights do not match components".into()));
    }
    check_simplex(init, 1e-9).map_err(Error::InvalidInput)?;
    if init.iter().any(|&w| w == 0.0) {
        return Err(Error::InvalidInput("initial weights must be strictly positive".into()));
    }
    let dists: Vec<&TruncatedGaussian> = components.iter().map(|c| c.distribution()).collect();
    let table = DensityTable::new(shots, &dists)?;
    em_map(&table, init.to_vec(), opts)
}

/// EM with M-step `beta_k = (n_k + alpha) / (N + K alpha)`: the exact
/// maximizer of the expected complete-data log-posterior, so the trace is
/// non-decreasing. Unsupported components shrink to about `alpha / N`.
pub(crate) fn em_map(table: &DensityTable, mut weights: Vec<f64>, opts: &EmOptions) -> Result<GlobalFit> {
    let n = table.n() as f64;
    let k = table.k as f64;
    let (mut counts, ll) = table.e_step(&weights);
    let mut trace = vec![penalized_log_posterior(ll, &weights, opts.prior_alpha)];
    let mut converged = false;
    let mut iterations = 0;
    let denom = n + k * opts.prior_alpha;
    while iterations < opts.max_iter {
        iterations += 1;
        weights = counts.iter().map(|c| (c + opts.prior_alpha) / denom).collect();
        // guard the sum against drift over hundreds of iterations
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let (c, ll) = table.e_step(&weights);
        counts = c;
        let obj = penalized_log_posterior(ll, &weights, opts.prior_alpha);
        if !obj.is_finite() {
            return Err(Error::ConvergenceFailure(format!("objective became {obj} at iteration {iterations}")));
        }
        let gain = obj - trace.last().unwrap();
        trace.push(obj);
        if gain.abs() < opts.tol_per_shot * n {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("global weight fit stopped at the {}-iteration cap", opts.max_iter);
    }
    Ok(GlobalFit { weights, iterations, converged, trace, n_shots: table.n() })
}

impl MixtureModel {
    /// Fits the global weights in place and records diagnostics.
    pub fn fit(&mut self, shots: &[GoalPoint], opts: &EmOptions) -> Result<GlobalFit> {
        let fit = fit_global_weights(shots, &self.components, opts)?;
        self.weights = fit.weights.clone();
        self.diagnostics = Some(FitDiagnostics {
            iterations: fit.iterations,
            converged: fit.converged,
            final_log_posterior: fit.final_log_posterior(),
            n_shots: fit.n_shots,
        });
        Ok(fit)
    }
}

/// Drops components below `threshold` and renormalizes the survivors.
pub fn prune(model: &MixtureModel, threshold: f64) -> Result<MixtureModel> {
    if model.trimmed {
        return Err(Error::InvalidModel("model is already trimmed".into()));
    }
    let keep: Vec<usize> = (0..model.len()).filter(|&i| model.weights[i] >= threshold).collect();
    if keep.is_empty() {
        return Err(Error::PruneEverything(threshold));
    }
    let total: f64 = keep.iter().map(|&i| model.weights[i]).sum();
    Ok(MixtureModel {
        frame: model.frame,
        grid: model.grid.clone(),
        components: keep.iter().map(|&i| model.components[i].clone()).collect(),
        weights: keep.iter().map(|&i| model.weights[i] / total).collect(),
        trimmed: true,
        prune_threshold: Some(threshold),
        diagnostics: None,
    })
}

/// Prune, then re-estimate the weights on the trimmed set, warm-started
/// from the renormalized survivors.
pub fn prune_and_refit(
    model: &MixtureModel,
    shots: &[GoalPoint],
    threshold: f64,
    opts: &EmOptions,
) -> Result<MixtureModel> {
    let mut trimmed = prune(model, threshold)?;
    let fit = fit_global_weights_from(shots, &trimmed.components, &trimmed.weights, opts)?;
    trimmed.diagnostics = Some(FitDiagnostics {
        iterations: fit.iterations,
        converged: fit.converged,
        final_log_posterior: fit.final_log_posterior(),
        n_shots: fit.n_shots,
    });
    trimmed.weights = fit.weights;
    Ok(trimmed)
}

/// Mean log-likelihood per shot under the global weights (held-out scoring).
pub fn mean_log_likelihood(shots: &[GoalPoint], model: &MixtureModel) -> Result<f64> {
    if shots.is_empty() {
        return Err(Error::InvalidInput("no shots to score".into()));
    }
    let dists: Vec<&TruncatedGaussian> = model.distributions().collect();
    let table = DensityTable::new(shots, &dists)?;
    Ok(table.log_likelihood(&model.weights) / shots.len() as f64)
}
