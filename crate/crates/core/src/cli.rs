//! The `shotmix` command line. Every subcommand reads and writes the file
//! formats of the library modules and leaves a `manifest.json` in its
//! output directory.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on data, model or
//! convergence errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluation::{
    fit_postxg_on, fit_saturated, points, sensitivity_grid, threshold_sweep, write_sensitivity_csv, AnalysisConfig,
    CorrelationMethod,
};
use crate::metrics::{player_table, EgaSign, MetricTable};
use crate::mixture::{prune_and_refit, MixtureModel};
use crate::players::PlayerWeightsFile;
use crate::preprocess::{read_records, read_shots, run_pipeline_parsed, write_rejections, write_shots, CanonicalShot};
use crate::rng::{stage_seed, Stage};
use crate::simulate::{reference_model, simulate_corpus, ShotsPerPlayer, SimulationSpec};
use crate::valuation::{ComponentValuesFile, PostXgModel};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "shotmix", version, about = "Shot end-coordinate mixture model and shooting-skill metrics")]
pub struct Cli {
    /// Config file (TOML or JSON) with the analysis settings
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Base seed threaded into every stochastic stage
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (0 = one per core)
    #[arg(long, global = true, env = "SHOTMIX_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Raw shot events to canonical goal-frame shots
    Preprocess(PreprocessArgs),
    /// Fit global weights over the saturated grid
    FitGlobal(FitGlobalArgs),
    /// Prune low-weight components and refit the survivors
    Prune(PruneArgs),
    /// Fit per-player and per-period component weights
    FitPlayers(FitPlayersArgs),
    /// Fit the coordinates-only PostXg model
    FitPostxg(FitPostxgArgs),
    /// Monte Carlo component values
    Values(ValuesArgs),
    /// Per-player, per-period metric table (fits missing stages in-process)
    Metrics(MetricsArgs),
    /// Split-half stability report
    Evaluate(EvaluateArgs),
    /// Re-run the analysis over distance filters and reflection settings
    Sensitivity(SensitivityArgs),
    /// Draw a synthetic corpus from the generative model
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Raw shots, CSV or JSON lines (by extension)
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Minimum distance from the goal center in yards [default: 6]
    #[arg(long)]
    pub min_distance_yd: Option<f64>,
    /// Keep left-footed shots unmirrored
    #[arg(long)]
    pub no_reflect: bool,
    /// Comma-separated seasons whose post widths are corrected [default: the four inflated seasons]
    #[arg(long, value_delimiter = ',')]
    pub post_correction_seasons: Option<Vec<String>>,
    /// Recorded distance of a post-edge coordinate from the post center [default: 0.30]
    #[arg(long)]
    pub inflated_half_width_yd: Option<f64>,
    /// True half width of a post [default: 0.12]
    #[arg(long)]
    pub true_half_width_yd: Option<f64>,
    /// Distance from a post center beyond which the correction is the identity [default: 1.0]
    #[arg(long)]
    pub correction_limit_yd: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitGlobalArgs {
    /// Canonical shots (JSON lines)
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Symmetric Dirichlet prior on the global weights [default: 0.5]
    #[arg(long)]
    pub prior_alpha: Option<f64>,
    /// EM iteration cap [default: 500]
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Stop once the objective gains less than this per shot [default: 1e-8]
    #[arg(long)]
    pub tol_per_shot: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    /// Saturated model from fit-global
    #[arg(long)]
    pub input: PathBuf,
    /// Shots used to refit the trimmed weights
    #[arg(long)]
    pub shots: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Drop components whose weight is below this [default: 0.01]
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitPlayersArgs {
    /// Canonical shots (JSON lines)
    #[arg(long)]
    pub input: PathBuf,
    /// Trimmed model from prune
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Existing players file to update; must have been fit against the same model
    #[arg(long)]
    pub players: Option<PathBuf>,
    /// Shrinkage strength towards the global weights [default: 30]
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitPostxgArgs {
    /// Canonical shots (JSON lines)
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Per-observation ridge penalty [default: 1e-4]
    #[arg(long)]
    pub ridge: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ValuesArgs {
    /// Trimmed model from prune
    #[arg(long, alias = "input")]
    pub model: PathBuf,
    /// PostXg model from fit-postxg
    #[arg(long)]
    pub postxg: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Monte Carlo draws per component [default: 100000]
    #[arg(long)]
    pub n_samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EgaSignArg {
    PostMinusPre,
    PreMinusPost,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Canonical shots (JSON lines)
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Trimmed model; fit from the shots when absent
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Players file; fit when absent
    #[arg(long)]
    pub players: Option<PathBuf>,
    /// PostXg model; fit when absent
    #[arg(long)]
    pub postxg: Option<PathBuf>,
    /// Component values; computed when absent
    #[arg(long)]
    pub values: Option<PathBuf>,
    /// Expected goals added sign convention [default: post-minus-pre]
    #[arg(long, value_enum)]
    pub ega_sign: Option<EgaSignArg>,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    /// Comma-separated minimum shots per half [default: 0,10,20,30,40,50,60]
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<usize>>,
    /// Bootstrap replicates [default: 1000]
    #[arg(long)]
    pub n_bootstrap: Option<usize>,
    /// Minimum shots per half for the full correlation matrix [default: 0]
    #[arg(long)]
    pub min_shots: Option<usize>,
    /// Correlation coefficient [default: pearson]
    #[arg(long, value_enum)]
    pub method: Option<CorrelationMethod>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Metric table from metrics
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub stability: StabilityArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Reflection {
    Both,
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    /// Raw shots, CSV or JSON lines
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Comma-separated minimum shot distances in yards
    #[arg(long, value_delimiter = ',', default_value = "4,6,8")]
    pub distances: Vec<f64>,
    /// Left-foot reflection settings to run
    #[arg(long, value_enum, default_value_t = Reflection::Both)]
    pub reflection: Reflection,
    #[command(flatten)]
    pub stability: StabilityArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub n_players: usize,
    /// Fixed shots per player (overrides the range)
    #[arg(long)]
    pub shots: Option<usize>,
    #[arg(long, default_value_t = 80)]
    pub min_shots: usize,
    #[arg(long, default_value_t = 100)]
    pub max_shots: usize,
    /// Dirichlet concentration for the players' true weights
    #[arg(long, default_value_t = 30.0)]
    pub alpha: f64,
    /// Source mixture model [default: built-in reference model]
    #[arg(long, requires = "postxg")]
    pub model: Option<PathBuf>,
    /// Source PostXg model [default: built-in reference surface]
    #[arg(long, requires = "model")]
    pub postxg: Option<PathBuf>,
}

/// Parses `argv` and runs it, returning the process exit status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    if cli.threads > 0 {
        // fails harmlessly if a pool already exists in this process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

// ---------------------------------------------------------------------------
// Manifests

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub inputs: Vec<FileHash>,
    pub seed: u64,
    pub artifacts: Vec<FileHash>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(&path, e))
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn basename(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

struct Output {
    dir: PathBuf,
    artifacts: Vec<String>,
    inputs: Vec<PathBuf>,
}

impl Output {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Output { dir: dir.to_path_buf(), artifacts: Vec::new(), inputs: Vec::new() })
    }

    fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Path of an artifact, recorded for the manifest.
    fn artifact(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.dir.join(name)
    }

    fn finish(self, command: &str, config: &AnalysisConfig, params: serde_json::Value, seed: u64) -> Result<()> {
        let canonical = serde_json::to_string(&json!({ "config": config, "params": params }))
            .expect("config serializes");
        let inputs = self
            .inputs
            .iter()
            .map(|p| Ok(FileHash { path: basename(p), sha256: sha256_file(p)? }))
            .collect::<Result<_>>()?;
        let mut names = self.artifacts.clone();
        names.sort();
        names.dedup();
        let artifacts = names
            .iter()
            .map(|n| Ok(FileHash { path: n.clone(), sha256: sha256_file(&self.dir.join(n))? }))
            .collect::<Result<_>>()?;
        let manifest = RunManifest {
            command: command.to_string(),
            config_hash: hex::encode(Sha256::digest(canonical.as_bytes())),
            inputs,
            seed,
            artifacts,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        };
        let path = self.dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }
}

// ---------------------------------------------------------------------------
// Commands

pub fn load_config(path: Option<&Path>) -> Result<AnalysisConfig> {
    let Some(path) = path else { return Ok(AnalysisConfig::default()) };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let config: AnalysisConfig = if is_json {
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))?
    } else {
        toml::from_str(&text).map_err(|e| Error::format(path, e))?
    };
    Ok(config)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_stability(config: &mut AnalysisConfig, a: &StabilityArgs) {
    set(&mut config.stability.thresholds, a.thresholds.clone());
    set(&mut config.stability.n_bootstrap, a.n_bootstrap);
    set(&mut config.stability.min_shots, a.min_shots);
    set(&mut config.stability.method, a.method);
}

fn load_shots(path: &Path) -> Result<Vec<CanonicalShot>> {
    let shots = read_shots(path)?;
    if shots.is_empty() {
        return Err(Error::InvalidInput(format!("{} contains no shots", path.display())));
    }
    Ok(shots)
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut config = load_config(cli.config.as_deref())?;
    let seed = cli.seed;
    match &cli.command {
        Command::Preprocess(a) => {
            let p = &mut config.preprocess;
            set(&mut p.min_distance_yd, a.min_distance_yd);
            if a.no_reflect {
                p.reflect_left_foot = false;
            }
            set(&mut p.post_correction_seasons, a.post_correction_seasons.clone());
            set(&mut p.inflated_half_width_yd, a.inflated_half_width_yd);
            set(&mut p.true_half_width_yd, a.true_half_width_yd);
            set(&mut p.correction_limit_yd, a.correction_limit_yd);
            let mut out = Output::create(&a.output)?;
            out.input(&a.input);
            let parsed = read_records(&a.input)?;
            let result = run_pipeline_parsed(&parsed, &config.preprocess)?;
            write_shots(&out.artifact("shots.jsonl"), &result.shots)?;
            write_rejections(&out.artifact("rejections.csv"), &result.rejections)?;
            let anomalies_path = out.artifact("anomalies.csv");
            let mut w = csv::Writer::from_path(&anomalies_path).map_err(|e| Error::format(&anomalies_path, e))?;
            w.write_record(["row_number", "kind"]).map_err(|e| Error::format(&anomalies_path, e))?;
            for an in &result.anomalies {
                w.write_record([an.row_number.to_string().as_str(), an.kind])
                    .map_err(|e| Error::format(&anomalies_path, e))?;
            }
            w.flush().map_err(|e| Error::io(&anomalies_path, e))?;
            eprintln!(
                "{} shots kept, {} rejected, {} anomalies",
                result.shots.len(),
                result.rejections.len(),
                result.anomalies.len()
            );
            out.finish("preprocess", &config, json!({}), seed)
        }
        Command::FitGlobal(a) => {
            set(&mut config.prior_alpha, a.prior_alpha);
            set(&mut config.em_max_iter, a.max_iter);
            set(&mut config.em_tol_per_shot, a.tol_per_shot);
            let mut out = Output::create(&a.output)?;
            out.input(&a.input);
            let shots = load_shots(&a.input)?;
            let model = fit_saturated(&shots, &config)?;
            model.save(&out.artifact("saturated.json"))?;
            out.finish("fit-global", &config, json!({}), seed)
        }
        Command::Prune(a) => {
            set(&mut config.prune_threshold, a.threshold);
            let mut out = Output::create(&a.output)?;
            out.input(&a.input);
            out.input(&a.shots);
            let saturated = MixtureModel::load(&a.input)?;
            let shots = load_shots(&a.shots)?;
            let model = prune_and_refit(&saturated, &points(&shots), config.prune_threshold, &config.em_options())?;
            eprintln!("{} of {} components kept", model.len(), saturated.len());
            model.save(&out.artifact("model.json"))?;
            out.finish("prune", &config, json!({}), seed)
        }
        Command::FitPlayers(a) => {
            set(&mut config.hierarchy.alpha, a.alpha);
            let mut out = Output::create(&a.output)?;
            out.input(&a.input);
            out.input(&a.model);
            let model = MixtureModel::load(&a.model)?;
            let existing = match &a.players {
                Some(p) => {
                    out.input(p);
                    let f = PlayerWeightsFile::load(p)?;
                    f.check_model(&model)?;
                    Some(f)
                }
                None => None,
            };
            let shots = load_shots(&a.input)?;
            let mut fitted = PlayerWeightsFile::fit(&shots, &model, &config.hierarchy)?;
            if let Some(mut old) = existing {
                old.players.append(&mut fitted.players);
                old.alpha = fitted.alpha;
                fitted = old;
            }
            fitted.save(&out.artifact("players.json"))?;
            out.finish("fit-players", &config, json!({ "update": a.players.is_some() }), seed)
        }
        Command::FitPostxg(a) => {
            set(&mut config.postxg.ridge, a.ridge);
            let mut out = Output::create(&a.output)?;
            out.input(&a.input);
            let shots = load_shots(&a.input)?;
            fit_postxg_on(&shots, &config)?.save(&out.artifact("postxg.json"))?;
            out.finish("fit-postxg", &config, json!({}), seed)
        }
        Command::Values(a) => {
            set(&mut config.value_samples, a.n_samples);
            let mut out = Output::create(&a.output)?;
            out.input(&a.model);
            out.input(&a.postxg);
            let model = MixtureModel::load(&a.model)?;
            let postxg = PostXgModel::load(&a.postxg)?;
            let values =
                ComponentValuesFile::compute(&model, &postxg, config.value_samples, stage_seed(seed, Stage::Values))?;
            values.save(&out.artifact("values.json"))?;
            out.finish("values", &config, json!({}), seed)
        }
        Command::Metrics(a) => {
            if let Some(s) = a.ega_sign {
                config.ega_sign = match s {
                    EgaSignArg::PostMinusPre => EgaSign::PostMinusPre,
                    EgaSignArg::PreMinusPost => EgaSign::PreMinusPost,
                };
            }
            let mut out = Output::create(&a.output)?;
            out.input(&a.input);
            let shots = load_shots(&a.input)?;
            let model = match &a.model {
                Some(p) => {
                    out.input(p);
                    MixtureModel::load(p)?
                }
                None => {
                    let saturated = fit_saturated(&shots, &config)?;
                    saturated.save(&out.artifact("saturated.json"))?;
                    let m = prune_and_refit(&saturated, &points(&shots), config.prune_threshold, &config.em_options())?;
                    m.save(&out.artifact("model.json"))?;
                    m
                }
            };
            let values = match &a.values {
                Some(p) => {
                    out.input(p);
                    let v = ComponentValuesFile::load(p)?;
                    v.check_model(&model)?;
                    v
                }
                None => {
                    let postxg = match &a.postxg {
                        Some(p) => {
                            out.input(p);
                            PostXgModel::load(p)?
                        }
                        None => {
                            let m = fit_postxg_on(&shots, &config)?;
                            m.save(&out.artifact("postxg.json"))?;
                            m
                        }
                    };
                    let v = ComponentValuesFile::compute(
                        &model,
                        &postxg,
                        config.value_samples,
                        stage_seed(seed, Stage::Values),
                    )?;
                    v.save(&out.artifact("values.json"))?;
                    v
                }
            };
            let weights = match &a.players {
                Some(p) => {
                    out.input(p);
                    PlayerWeightsFile::load(p)?
                }
                None => {
                    let w = PlayerWeightsFile::fit(&shots, &model, &config.hierarchy)?;
                    w.save(&out.artifact("players.json"))?;
                    w
                }
            };
            let table = player_table(&shots, &weights, &model, &values.v(), config.ega_sign)?;
            table.write_csv(&out.artifact("metrics.csv"))?;
            out.finish("metrics", &config, json!({}), seed)
        }
        Command::Evaluate(a) => {
            apply_stability(&mut config, &a.stability);
            let mut out = Output::create(&a.output)?;
            out.input(&a.input);
            let table = MetricTable::read_csv(&a.input)?;
            let report = threshold_sweep(&table, &config.stability, stage_seed(seed, Stage::Bootstrap))?;
            report.save_json(&out.artifact("report.json"))?;
            report.write_sweep_csv(&out.artifact("sweep.csv"))?;
            report.write_matrix_csv(&out.artifact("matrix.csv"))?;
            out.finish("evaluate", &config, json!({}), seed)
        }
        Command::Sensitivity(a) => {
            apply_stability(&mut config, &a.stability);
            let mut out = Output::create(&a.output)?;
            out.input(&a.input);
            let parsed = read_records(&a.input)?;
            let records: Vec<_> = parsed.records.into_iter().map(|(_, r)| r).collect();
            let reflections: &[bool] = match a.reflection {
                Reflection::Both => &[true, false],
                Reflection::On => &[true],
                Reflection::Off => &[false],
            };
            let cells = sensitivity_grid(&records, &a.distances, reflections, &config, seed);
            for c in &cells {
                let path = out.artifact(&format!("cell_{}.json", c.label()));
                let text = serde_json::to_string_pretty(c).map_err(|e| Error::format(&path, e))?;
                fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
                if let Some(err) = &c.error {
                    eprintln!("cell {}: {err}", c.label());
                }
            }
            write_sensitivity_csv(&cells, &out.artifact("sensitivity.csv"))?;
            let params = json!({ "distances": a.distances, "reflections": reflections });
            out.finish("sensitivity", &config, params, seed)
        }
        Command::Simulate(a) => {
            let mut out = Output::create(&a.output)?;
            let (model, postxg) = match (&a.model, &a.postxg) {
                (Some(m), Some(p)) => {
                    out.input(m);
                    out.input(p);
                    (MixtureModel::load(m)?, PostXgModel::load(p)?)
                }
                _ => reference_model(),
            };
            let shots_per_player = match a.shots {
                Some(n) => ShotsPerPlayer::Fixed(n),
                None => ShotsPerPlayer::Uniform { min: a.min_shots, max: a.max_shots },
            };
            let spec = SimulationSpec {
                n_players: a.n_players,
                shots_per_player,
                alpha: a.alpha,
                model,
                postxg,
                seed: stage_seed(seed, Stage::Simulation),
            };
            let corpus = simulate_corpus(&spec)?;
            write_shots(&out.artifact("shots.jsonl"), &corpus.shots)?;
            corpus.truth.save(&out.artifact("truth.json"))?;
            spec.model.save(&out.artifact("source_model.json"))?;
            spec.postxg.save(&out.artifact("source_postxg.json"))?;
            let params = json!({
                "n_players": a.n_players,
                "shots_per_player": shots_per_player,
                "alpha": a.alpha,
            });
            out.finish("simulate", &config, params, seed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(main_with_args(["shotmix", "no-such-command"]), 1);
        assert_eq!(main_with_args(["shotmix", "evaluate"]), 1);
        assert_eq!(main_with_args(["shotmix", "--help"]), 0);
    }

    #[test]
    fn every_subcommand_help_lists_its_flags() {
        let mut cmd = Cli::command();
        for sub in cmd.get_subcommands_mut() {
            let help = sub.render_long_help().to_string();
            for arg in sub.get_arguments() {
                if let Some(long) = arg.get_long() {
                    assert!(help.contains(&format!("--{long}")), "{} lacks --{long}", sub.get_name());
                }
            }
        }
    }

    #[test]
    fn config_files_parse_in_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("c.toml");
        fs::write(&toml_path, "prune_threshold = 0.02\n[hierarchy]\nalpha = 12.0\n[preprocess]\nmin_distance_yd = 8.0\n")
            .unwrap();
        let c = load_config(Some(&toml_path)).unwrap();
        assert_eq!(c.prune_threshold, 0.02);
        assert_eq!(c.hierarchy.alpha, 12.0);
        assert_eq!(c.preprocess.min_distance_yd, 8.0);
        assert!(c.preprocess.reflect_left_foot);
        let json_path = dir.path().join("c.json");
        fs::write(&json_path, r#"{"value_samples": 500, "stability": {"n_bootstrap": 10}}"#).unwrap();
        let c = load_config(Some(&json_path)).unwrap();
        assert_eq!(c.value_samples, 500);
        assert_eq!(c.stability.n_bootstrap, 10);
        assert_eq!(c.stability.ci_level, 0.90);
    }
}
