//! Split-half self-correlation of each metric with bootstrap intervals,
//! swept over minimum shots per half.

use shotmix::evaluation::{run_analysis_on_shots, AnalysisConfig};
use shotmix::simulate::{reference_model, simulate_corpus, ShotsPerPlayer, SimulationSpec};

fn main() -> shotmix::Result<()> {
    let (model, postxg) = reference_model();
    let spec = SimulationSpec {
        n_players: 300,
        shots_per_player: ShotsPerPlayer::Uniform { min: 40, max: 100 },
        alpha: 30.0,
        model,
        postxg,
        seed: 11,
    };
    let corpus = simulate_corpus(&spec)?;
    let mut config = AnalysisConfig::default();
    config.value_samples = 20_000;
    config.stability.n_bootstrap = 300;
    let analysis = run_analysis_on_shots(&corpus.shots, &config, 11)?;

    for r in &analysis.report.results {
        println!("min shots per half {:>2}: {} players", r.threshold, r.n_players);
        for m in &r.metrics {
            let f = |x: Option<f64>| x.map_or("   n/a".to_string(), |v| format!("{v:+.3}"));
            println!("  {:<11} {}  [{}, {}]", format!("{:?}", m.metric), f(m.correlation), f(m.ci_low), f(m.ci_high));
        }
    }
    Ok(())
}
