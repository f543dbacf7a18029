//! GAX, EGA, RBPostXg and GenPostXg per player-half on a simulated corpus.

use shotmix::metrics::{player_table, EgaSign};
use shotmix::players::{HierarchyConfig, PlayerWeightsFile};
use shotmix::simulate::{reference_model, simulate_corpus, ShotsPerPlayer, SimulationSpec};
use shotmix::valuation::component_values;

fn main() -> shotmix::Result<()> {
    let (model, postxg) = reference_model();
    let spec = SimulationSpec {
        n_players: 5,
        shots_per_player: ShotsPerPlayer::Fixed(60),
        alpha: 30.0,
        model: model.clone(),
        postxg,
        seed: 4,
    };
    let corpus = simulate_corpus(&spec)?;
    let weights = PlayerWeightsFile::fit(&corpus.shots, &model, &HierarchyConfig::default())?;
    let values: Vec<f64> = component_values(&model, &postxg, 50_000, 2)?.iter().map(|v| v.v).collect();
    let table = player_table(&corpus.shots, &weights, &model, &values, EgaSign::default())?;

    println!("player  half    n  goals     gax     ega  rb_postxg  gen_postxg");
    for r in &table.rows {
        println!(
            "{:<6} {:>5} {:>4} {:>6} {:>7.2} {:>7.2} {:>10.4} {:>11.4}",
            r.player_id,
            r.half.to_string(),
            r.shot_count,
            r.goals,
            r.gax,
            r.ega,
            r.rb_postxg,
            r.gen_postxg
        );
    }
    Ok(())
}
