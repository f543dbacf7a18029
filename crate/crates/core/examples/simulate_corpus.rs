//! Draw a synthetic corpus with known per-player weights and check the
//! population goal rate against the component values.

use shotmix::simulate::{reference_model, simulate_corpus, ShotsPerPlayer, SimulationSpec};
use shotmix::valuation::component_values;

fn main() -> shotmix::Result<()> {
    let (model, postxg) = reference_model();
    let spec = SimulationSpec {
        n_players: 2000,
        shots_per_player: ShotsPerPlayer::Uniform { min: 20, max: 60 },
        alpha: 30.0,
        model: model.clone(),
        postxg,
        seed: 8,
    };
    let corpus = simulate_corpus(&spec)?;
    let n = corpus.shots.len() as f64;
    let goals = corpus.shots.iter().filter(|s| s.is_goal).count() as f64;
    let values = component_values(&model, &postxg, 100_000, 0)?;
    let expected: f64 = model.weights.iter().zip(&values).map(|(b, v)| b * v.v).sum();
    println!("{} shots from {} players", corpus.shots.len(), corpus.truth.players.len());
    println!("goal rate {:.4}, sum of weighted component values {:.4}", goals / n, expected);
    println!("first shot: {:?}", corpus.shots[0]);
    Ok(())
}
