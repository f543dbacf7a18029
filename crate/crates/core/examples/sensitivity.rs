//! Re-run the analysis under several distance filters and with and without
//! left-foot reflection.

use shotmix::evaluation::{sensitivity_grid, AnalysisConfig, Metric};
use shotmix::preprocess::BodyPart;
use shotmix::simulate::{reference_model, simulate_corpus, ShotsPerPlayer, SimulationSpec};

fn main() -> shotmix::Result<()> {
    let frame = shotmix::geometry::GoalFrame::default();
    let (model, postxg) = reference_model();
    let spec = SimulationSpec {
        n_players: 120,
        shots_per_player: ShotsPerPlayer::Fixed(60),
        alpha: 30.0,
        model,
        postxg,
        seed: 21,
    };
    // spread shots over distances and make every third one a mirrored left-footer
    let mut raw: Vec<_> = simulate_corpus(&spec)?.shots.iter().map(|s| s.to_record(&frame)).collect();
    for (i, r) in raw.iter_mut().enumerate() {
        r.start.x = frame.goal_line_x - (3 + i * 7 % 25) as f64;
        if i % 3 == 0 {
            r.body_part = BodyPart::LeftFoot;
            r.end.y = 2.0 * frame.y_center - r.end.y;
        }
    }

    let mut config = AnalysisConfig::default();
    config.value_samples = 10_000;
    config.stability.n_bootstrap = 100;
    config.stability.thresholds = vec![10];
    for cell in sensitivity_grid(&raw, &[4.0, 8.0, 16.0], &[true, false], &config, 21) {
        match (&cell.report, &cell.error) {
            (Some(report), _) => {
                let r = report.result(10).expect("threshold was requested");
                let gen = r.get(Metric::GenPostxg).and_then(|m| m.correlation);
                println!("{:<14} {} players, GenPostXg r = {gen:?}", cell.label(), r.n_players);
            }
            (None, Some(e)) => println!("{:<14} failed: {e}", cell.label()),
            (None, None) => unreachable!(),
        }
    }
    Ok(())
}
