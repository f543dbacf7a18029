//! Split-half stability harness: cross-half metric correlations, minimum
//! sample-size sweeps with player-level bootstrap intervals, the end-to-end
//! analysis and the preprocessing sensitivity grid.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GoalPoint;
use crate::metrics::{player_table, EgaSign, MetricRow, MetricTable};
use crate::mixture::{
    fit_global_weights, prune_and_refit, CovarianceInterpolator, EmOptions, FitDiagnostics, GridSpec, MixtureModel,
    DEFAULT_PRUNE_THRESHOLD,
};
use crate::players::{HierarchyConfig, PlayerWeightsFile};
use crate::preprocess::{run_pipeline, CanonicalShot, Half, PipelineConfig, ShotRecord};
use crate::rng::{derive_seed, seeded, stage_seed, Stage};
use crate::valuation::{fit_postxg, ComponentValuesFile, PostXgFitOptions, PostXgModel, DEFAULT_VALUE_SAMPLES};

pub const MIN_PLAYERS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "gax")]
    Gax,
    #[serde(rename = "ega")]
    Ega,
    #[serde(rename = "rb_postxg")]
    RbPostxg,
    #[serde(rename = "gen_postxg")]
    GenPostxg,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Gax, Metric::Ega, Metric::RbPostxg, Metric::GenPostxg];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Gax => "gax",
            Metric::Ega => "ega",
            Metric::RbPostxg => "rb_postxg",
            Metric::GenPostxg => "gen_postxg",
        }
    }

    pub fn of(self, row: &MetricRow) -> f64 {
        match self {
            Metric::Gax => row.gax,
            Metric::Ega => row.ega,
            Metric::RbPostxg => row.rb_postxg,
            Metric::GenPostxg => row.gen_postxg,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMethod {
    #[default]
    Pearson,
    Spearman,
}

impl FromStr for CorrelationMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "pearson" => Ok(CorrelationMethod::Pearson),
            "spearman" => Ok(CorrelationMethod::Spearman),
            _ => Err(format!("unknown correlation method {s:?}")),
        }
    }
}

/// Two-pass Pearson correlation; `None` when either side has no variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    if x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn correlation(x: &[f64], y: &[f64], method: CorrelationMethod) -> Option<f64> {
    match method {
        CorrelationMethod::Pearson => pearson(x, y),
        CorrelationMethod::Spearman => pearson(&ranks(x), &ranks(y)),
    }
}

/// A player-season present in both halves.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSeason<'a> {
    pub player_id: &'a str,
    pub season_id: &'a str,
    pub first: &'a MetricRow,
    pub second: &'a MetricRow,
}

/// Player-seasons whose halves both have at least `min_shots` shots.
pub fn paired_seasons(table: &MetricTable, min_shots: usize) -> Vec<PairedSeason<'_>> {
    let mut halves: BTreeMap<(&str, &str), (Option<&MetricRow>, Option<&MetricRow>)> = BTreeMap::new();
    for r in &table.rows {
        let e = halves.entry((r.player_id.as_str(), r.season_id.as_str())).or_default();
        match r.half {
            Half::First => e.0 = Some(r),
            Half::Second => e.1 = Some(r),
        }
    }
    halves
        .into_iter()
        .filter_map(|((player_id, season_id), pair)| match pair {
            (Some(first), Some(second)) if first.shot_count >= min_shots && second.shot_count >= min_shots => {
                Some(PairedSeason { player_id, season_id, first, second })
            }
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub metrics: Vec<Metric>,
    /// `values[i][j]`: first-half metric `i` against second-half metric `j`.
    pub values: Vec<Vec<Option<f64>>>,
    pub min_shots: usize,
    pub n_players: usize,
    pub method: CorrelationMethod,
}

impl CorrelationMatrix {
    pub fn get(&self, first: Metric, second: Metric) -> Option<f64> {
        let i = self.metrics.iter().position(|m| *m == first)?;
        let j = self.metrics.iter().position(|m| *m == second)?;
        self.values[i][j]
    }
}

fn columns(pairs: &[PairedSeason<'_>], m: Metric) -> (Vec<f64>, Vec<f64>) {
    pairs.iter().map(|p| (m.of(p.first), m.of(p.second))).unzip()
}

pub fn split_half_correlations(
    table: &MetricTable,
    min_shots: usize,
    method: CorrelationMethod,
) -> Result<CorrelationMatrix> {
    let pairs = paired_seasons(table, min_shots);
    if pairs.len() < MIN_PLAYERS {
        return Err(Error::InsufficientSample { found: pairs.len(), needed: MIN_PLAYERS });
    }
    let values = Metric::ALL
        .iter()
        .map(|&a| {
            let (x, _) = columns(&pairs, a);
            Metric::ALL
                .iter()
                .map(|&b| {
                    let (_, y) = columns(&pairs, b);
                    correlation(&x, &y, method)
                })
                .collect()
        })
        .collect();
    Ok(CorrelationMatrix { metrics: Metric::ALL.to_vec(), values, min_shots, n_players: pairs.len(), method })
}

// ---------------------------------------------------------------------------
// Threshold sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilityOptions {
    /// Minimum shots per half for the full correlation matrix.
    pub min_shots: usize,
    pub thresholds: Vec<usize>,
    pub n_bootstrap: usize,
    /// Central coverage of the percentile interval.
    pub ci_level: f64,
    pub method: CorrelationMethod,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            min_shots: 0,
            thresholds: vec![0, 10, 20, 30, 40, 50, 60],
            n_bootstrap: 1000,
            ci_level: 0.90,
            method: CorrelationMethod::Pearson,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStability {
    pub metric: Metric,
    pub correlation: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// Replicates where the correlation was defined.
    pub n_replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub threshold: usize,
    pub n_players: usize,
    /// Empty when fewer than three players qualify.
    pub metrics: Vec<MetricStability>,
}

impl ThresholdResult {
    pub fn get(&self, m: Metric) -> Option<&MetricStability> {
        self.metrics.iter().find(|s| s.metric == m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub correlation_matrix: Option<CorrelationMatrix>,
    pub thresholds: Vec<usize>,
    pub results: Vec<ThresholdResult>,
    pub n_bootstrap: usize,
    pub ci_level: f64,
    pub seed: u64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sweep_threshold(
    table: &MetricTable,
    threshold: usize,
    n_bootstrap: usize,
    ci_level: f64,
    method: CorrelationMethod,
    seed: u64,
) -> ThresholdResult {
    let pairs = paired_seasons(table, threshold);
    if pairs.len() < MIN_PLAYERS {
        return ThresholdResult { threshold, n_players: pairs.len(), metrics: Vec::new() };
    }
    let cols: Vec<(Vec<f64>, Vec<f64>)> = Metric::ALL.iter().map(|&m| columns(&pairs, m)).collect();
    let n = pairs.len();
    let base = derive_seed(seed, threshold as u64);
    let replicates: Vec<Vec<Option<f64>>> = (0..n_bootstrap)
        .into_par_iter()
        .map(|b| {
            let mut rng = seeded(base, b as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            cols.iter()
                .map(|(x, y)| {
                    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
                    let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
                    correlation(&xs, &ys, method)
                })
                .collect()
        })
        .collect();
    let tail = (1.0 - ci_level) / 2.0;
    let metrics = Metric::ALL
        .iter()
        .enumerate()
        .map(|(j, &metric)| {
            let mut rs: Vec<f64> = replicates.iter().filter_map(|r| r[j]).collect();
            rs.sort_by(f64::total_cmp);
            let (ci_low, ci_high) = if rs.is_empty() {
                (None, None)
            } else {
                (Some(quantile(&rs, tail)), Some(quantile(&rs, 1.0 - tail)))
            };
            MetricStability {
                metric,
                correlation: correlation(&cols[j].0, &cols[j].1, method),
                ci_low,
                ci_high,
                n_replicates: rs.len(),
            }
        })
        .collect();
    ThresholdResult { threshold, n_players: n, metrics }
}

/// Self-correlation of every metric per threshold, with percentile
/// bootstrap intervals from resampling player-seasons.
pub fn threshold_sweep(table: &MetricTable, opts: &StabilityOptions, seed: u64) -> Result<StabilityReport> {
    if opts.thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("thresholds must be sorted ascending".into()));
    }
    if opts.n_bootstrap == 0 {
        return Err(Error::InvalidParameter("n_bootstrap must be at least 1".into()));
    }
    if !(opts.ci_level > 0.0 && opts.ci_level < 1.0) {
        return Err(Error::InvalidParameter(format!("ci_level must be in (0, 1), got {}", opts.ci_level)));
    }
    let results = opts
        .thresholds
        .iter()
        .map(|&t| sweep_threshold(table, t, opts.n_bootstrap, opts.ci_level, opts.method, seed))
        .collect();
    let correlation_matrix = match split_half_correlations(table, opts.min_shots, opts.method) {
        Ok(m) => Some(m),
        Err(Error::InsufficientSample { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(StabilityReport {
        correlation_matrix,
        thresholds: opts.thresholds.clone(),
        results,
        n_bootstrap: opts.n_bootstrap,
        ci_level: opts.ci_level,
        seed,
    })
}

fn opt_field(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl StabilityReport {
    pub fn result(&self, threshold: usize) -> Option<&ThresholdResult> {
        self.results.iter().find(|r| r.threshold == threshold)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::format(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))
    }

    /// Rows of `threshold, metric, correlation, ci_low, ci_high`; missing
    /// values are empty fields.
    pub fn sweep_rows(&self) -> Vec<[String; 5]> {
        let mut rows = Vec::new();
        for r in &self.results {
            if r.metrics.is_empty() {
                for m in Metric::ALL {
                    rows.push([r.threshold.to_string(), m.to_string(), String::new(), String::new(), String::new()]);
                }
            }
            for s in &r.metrics {
                rows.push([
                    r.threshold.to_string(),
                    s.metric.to_string(),
                    opt_field(s.correlation),
                    opt_field(s.ci_low),
                    opt_field(s.ci_high),
                ]);
            }
        }
        rows
    }

    pub fn write_sweep_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
        w.write_record(["threshold", "metric", "correlation", "ci_low", "ci_high"])
            .map_err(|e| Error::format(path, e))?;
        for row in self.sweep_rows() {
            w.write_record(&row).map_err(|e| Error::format(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// The full first-half by second-half matrix in long form.
    pub fn write_matrix_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
        w.write_record(["first_half", "second_half", "correlation", "min_shots", "n_players"])
            .map_err(|e| Error::format(path, e))?;
        if let Some(m) = &self.correlation_matrix {
            for (i, a) in m.metrics.iter().enumerate() {
                for (j, b) in m.metrics.iter().enumerate() {
                    w.write_record([
                        a.name().to_string(),
                        b.name().to_string(),
                        opt_field(m.values[i][j]),
                        m.min_shots.to_string(),
                        m.n_players.to_string(),
                    ])
                    .map_err(|e| Error::format(path, e))?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

// ---------------------------------------------------------------------------
// End-to-end analysis

/// Every tunable of the model stages, as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub preprocess: PipelineConfig,
    pub grid: GridSpec,
    pub error_model: CovarianceInterpolator,
    pub prior_alpha: f64,
    pub em_tol_per_shot: f64,
    pub em_max_iter: usize,
    pub prune_threshold: f64,
    pub hierarchy: HierarchyConfig,
    pub postxg: PostXgFitOptions,
    pub value_samples: usize,
    pub ega_sign: EgaSign,
    pub stability: StabilityOptions,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let em = EmOptions::default();
        AnalysisConfig {
            preprocess: PipelineConfig::default(),
            grid: GridSpec::default(),
            error_model: CovarianceInterpolator::default(),
            prior_alpha: em.prior_alpha,
            em_tol_per_shot: em.tol_per_shot,
            em_max_iter: em.max_iter,
            prune_threshold: DEFAULT_PRUNE_THRESHOLD,
            hierarchy: HierarchyConfig::default(),
            postxg: PostXgFitOptions::default(),
            value_samples: DEFAULT_VALUE_SAMPLES,
            ega_sign: EgaSign::default(),
            stability: StabilityOptions::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn em_options(&self) -> EmOptions {
        EmOptions { prior_alpha: self.prior_alpha, tol_per_shot: self.em_tol_per_shot, max_iter: self.em_max_iter }
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub saturated: MixtureModel,
    pub model: MixtureModel,
    pub postxg: PostXgModel,
    pub values: ComponentValuesFile,
    pub weights: PlayerWeightsFile,
    pub table: MetricTable,
    pub report: StabilityReport,
}

pub fn points(shots: &[CanonicalShot]) -> Vec<GoalPoint> {
    shots.iter().map(|s| s.end_point).collect()
}

/// Fits the saturated global weights on every shot.
pub fn fit_saturated(shots: &[CanonicalShot], config: &AnalysisConfig) -> Result<MixtureModel> {
    let mut m = MixtureModel::saturated(&config.grid, &config.preprocess.frame, &config.error_model)?;
    let fit = fit_global_weights(&points(shots), &m.components, &config.em_options())?;
    m.weights = fit.weights.clone();
    m.diagnostics = Some(FitDiagnostics {
        iterations: fit.iterations,
        converged: fit.converged,
        final_log_posterior: fit.final_log_posterior(),
        n_shots: fit.n_shots,
    });
    Ok(m)
}

pub fn fit_postxg_on(shots: &[CanonicalShot], config: &AnalysisConfig) -> Result<PostXgModel> {
    let data: Vec<(GoalPoint, bool)> = shots.iter().map(|s| (s.end_point, s.is_goal)).collect();
    Ok(fit_postxg(&data, &config.preprocess.frame, &config.postxg)?.model)
}

/// Runs every model stage on canonical shots.
pub fn run_analysis_on_shots(shots: &[CanonicalShot], config: &AnalysisConfig, seed: u64) -> Result<Analysis> {
    let saturated = fit_saturated(shots, config)?;
    let model = prune_and_refit(&saturated, &points(shots), config.prune_threshold, &config.em_options())?;
    let postxg = fit_postxg_on(shots, config)?;
    let values = ComponentValuesFile::compute(&model, &postxg, config.value_samples, stage_seed(seed, Stage::Values))?;
    let weights = PlayerWeightsFile::fit(shots, &model, &config.hierarchy)?;
    let table = player_table(shots, &weights, &model, &values.v(), config.ega_sign)?;
    let report = threshold_sweep(&table, &config.stability, stage_seed(seed, Stage::Bootstrap))?;
    Ok(Analysis { saturated, model, postxg, values, weights, table, report })
}

/// Preprocesses raw records, then runs every model stage.
pub fn run_analysis(raw: &[ShotRecord], config: &AnalysisConfig, seed: u64) -> Result<Analysis> {
    let out = run_pipeline(raw, &config.preprocess)?;
    run_analysis_on_shots(&out.shots, config, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCell {
    pub min_distance_yd: f64,
    pub reflect_left_foot: bool,
    pub report: Option<StabilityReport>,
    pub error: Option<String>,
}

impl SensitivityCell {
    /// A file-name-safe label such as `d6_reflect`.
    pub fn label(&self) -> String {
        format!("d{}_{}", self.min_distance_yd, if self.reflect_left_foot { "reflect" } else { "noreflect" })
    }
}

/// Re-runs the whole analysis for every (distance, reflection) setting.
/// Every cell uses the same base seed, so a cell with the default settings
/// reproduces the standalone run.
pub fn sensitivity_grid(
    raw: &[ShotRecord],
    distance_thresholds: &[f64],
    reflections: &[bool],
    config: &AnalysisConfig,
    seed: u64,
) -> Vec<SensitivityCell> {
    let settings: Vec<(f64, bool)> =
        distance_thresholds.iter().flat_map(|&d| reflections.iter().map(move |&r| (d, r))).collect();
    settings
        .par_iter()
        .map(|&(d, r)| {
            let mut cfg = config.clone();
            cfg.preprocess.min_distance_yd = d;
            cfg.preprocess.reflect_left_foot = r;
            let (report, error) = match run_analysis(raw, &cfg, seed) {
                Ok(a) => (Some(a.report), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SensitivityCell { min_distance_yd: d, reflect_left_foot: r, report, error }
        })
        .collect()
}

pub fn write_sensitivity_csv(cells: &[SensitivityCell], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    w.write_record(["min_distance_yd", "reflect_left_foot", "threshold", "metric", "correlation", "ci_low", "ci_high"])
        .map_err(|e| Error::format(path, e))?;
    for c in cells {
        let Some(report) = &c.report else { continue };
        for row in report.sweep_rows() {
            let mut rec = vec![c.min_distance_yd.to_string(), c.reflect_left_foot.to_string()];
            rec.extend(row);
            w.write_record(&rec).map_err(|e| Error::format(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn row(player: &str, half: Half, n: usize, vals: [f64; 4]) -> MetricRow {
        MetricRow {
            player_id: player.into(),
            season_id: "s".into(),
            half,
            shot_count: n,
            goals: 0,
            sum_xg: 0.0,
            sum_postxg_ext: 0.0,
            gax: vals[0],
            ega: vals[1],
            rb_postxg: vals[2],
            gen_postxg: vals[3],
        }
    }

    fn table(first: &[[f64; 4]], second: &[[f64; 4]], counts: &[usize]) -> MetricTable {
        let mut rows = Vec::new();
        for (i, (a, b)) in first.iter().zip(second).enumerate() {
            let id = format!("p{i:03}");
            rows.push(row(&id, Half::First, counts[i], *a));
            rows.push(row(&id, Half::Second, counts[i], *b));
        }
        MetricTable { rows, n_fallback: 0 }
    }

    fn naive_pearson(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0);
        let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        cov / (sx * sy)
    }

    #[test]
    fn identical_and_negated_columns() {
        let first = [[1.0, 2.0, 0.1, 0.2], [2.0, 1.0, 0.3, 0.1], [0.5, 3.0, 0.2, 0.4], [4.0, 0.0, 0.5, 0.3]];
        let second: Vec<[f64; 4]> = first.iter().map(|r| [r[0], -r[1], r[2], r[3]]).collect();
        let m = split_half_correlations(&table(&first, &second, &[50; 4]), 40, CorrelationMethod::Pearson).unwrap();
        assert!((m.get(Metric::Gax, Metric::Gax).unwrap() - 1.0).abs() < 1e-12);
        assert!((m.get(Metric::Ega, Metric::Ega).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(m.n_players, 4);
    }

    #[test]
    fn too_few_players_is_an_error() {
        let first = [[1.0; 4], [2.0; 4], [3.0; 4]];
        let t = table(&first, &first, &[50, 50, 10]);
        assert!(matches!(
            split_half_correlations(&t, 40, CorrelationMethod::Pearson),
            Err(Error::InsufficientSample { found: 2, needed: 3 })
        ));
    }

    #[test]
    fn both_halves_must_meet_the_threshold() {
        let first = [[1.0; 4], [2.0; 4], [3.0; 4], [4.0; 4]];
        let mut t = table(&first, &first, &[50; 4]);
        t.rows[1].shot_count = 39;
        assert_eq!(paired_seasons(&t, 40).len(), 3);
        t.rows.remove(2);
        assert_eq!(paired_seasons(&t, 40).len(), 2);
    }

    #[test]
    fn spearman_uses_average_ranks() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 8.0, 27.0, 64.0];
        assert!((correlation(&x, &y, CorrelationMethod::Spearman).unwrap() - 1.0).abs() < 1e-15);
        assert!(correlation(&x, &y, CorrelationMethod::Pearson).unwrap() < 1.0);
    }

    proptest! {
        #[test]
        fn pearson_matches_textbook(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..60)) {
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let Some(r) = pearson(&x, &y) {
                prop_assert!((r - naive_pearson(&x, &y)).abs() < 1e-12);
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }
    }

    fn noisy_table(n: usize, seed: u64) -> MetricTable {
        let mut rng = seeded(seed, 0);
        let mut first = Vec::new();
        let mut second = Vec::new();
        for _ in 0..n {
            let skill: f64 = rng.random();
            let f = |rng: &mut crate::rng::StageRng, s: f64| [rng.random(), rng.random(), s + 0.3 * rng.random::<f64>(), s + 0.1 * rng.random::<f64>()];
            first.push(f(&mut rng, skill));
            second.push(f(&mut rng, skill));
        }
        let counts: Vec<usize> = (0..n).map(|i| 5 + i % 60).collect();
        table(&first, &second, &counts)
    }

    #[test]
    fn threshold_zero_matches_the_matrix_diagonal() {
        let t = noisy_table(80, 1);
        let opts = StabilityOptions { thresholds: vec![0, 30], n_bootstrap: 200, ..Default::default() };
        let r = threshold_sweep(&t, &opts, 5).unwrap();
        let m = split_half_correlations(&t, 0, CorrelationMethod::Pearson).unwrap();
        for metric in Metric::ALL {
            assert_eq!(r.result(0).unwrap().get(metric).unwrap().correlation, m.get(metric, metric));
        }
        assert!(r.result(30).unwrap().n_players < 80);
    }

    #[test]
    fn single_replicate_interval_collapses() {
        let t = noisy_table(30, 2);
        let opts = StabilityOptions { thresholds: vec![0], n_bootstrap: 1, ..Default::default() };
        let r = threshold_sweep(&t, &opts, 9).unwrap();
        for s in &r.results[0].metrics {
            assert_eq!(s.ci_low, s.ci_high);
            assert_eq!(s.n_replicates, 1);
        }
    }

    #[test]
    fn sweep_is_reproducible_and_reports_missing_thresholds() {
        let t = noisy_table(40, 3);
        let opts = StabilityOptions { thresholds: vec![0, 1000], n_bootstrap: 300, ..Default::default() };
        let a = threshold_sweep(&t, &opts, 11).unwrap();
        let b = threshold_sweep(&t, &opts, 11).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.result(1000).unwrap().metrics.is_empty());
        let c = threshold_sweep(&t, &opts, 12).unwrap();
        for (x, y) in a.results[0].metrics.iter().zip(&c.results[0].metrics) {
            let p = x.correlation.unwrap();
            assert!(y.ci_low.unwrap() <= p && p <= y.ci_high.unwrap());
        }
        let unsorted = StabilityOptions { thresholds: vec![10, 0], ..opts };
        assert!(threshold_sweep(&t, &unsorted, 1).is_err());
    }

    #[test]
    fn interval_narrows_with_more_replicates_on_average() {
        let t = noisy_table(60, 4);
        let width = |n: usize, seed: u64| {
            let opts = StabilityOptions { thresholds: vec![0], n_bootstrap: n, ..Default::default() };
            let r = threshold_sweep(&t, &opts, seed).unwrap();
            let s = r.results[0].get(Metric::GenPostxg).unwrap();
            s.ci_high.unwrap() - s.ci_low.unwrap()
        };
        let small: f64 = (0..10).map(|s| width(100, s)).sum::<f64>() / 10.0;
        let large: f64 = (0..10).map(|s| width(10_000, 100 + s)).sum::<f64>() / 10.0;
        // percentile widths converge (from either side) as replicates grow; allow MC slack
        assert!(large <= small * 1.05, "{large} vs {small}");
    }

    #[test]
    fn csv_exports_have_the_documented_columns() {
        let t = noisy_table(20, 5);
        let opts = StabilityOptions { thresholds: vec![0, 500], n_bootstrap: 50, ..Default::default() };
        let r = threshold_sweep(&t, &opts, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sweep.csv");
        r.write_sweep_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), "threshold,metric,correlation,ci_low,ci_high");
        assert_eq!(text.lines().count(), 1 + 8);
        let q = dir.path().join("report.json");
        r.save_json(&q).unwrap();
        assert_eq!(StabilityReport::load_json(&q).unwrap(), r);
    }
}
