//! Fit global weights over the saturated grid, then prune and refit.

use rand::Rng;
use shotmix::geometry::GoalFrame;
use shotmix::mixture::{prune_and_refit, CovarianceInterpolator, EmOptions, GridSpec, MixtureModel};
use shotmix::rng::seeded;

fn main() -> shotmix::Result<()> {
    let frame = GoalFrame::default();
    let mut saturated = MixtureModel::saturated(&GridSpec::default(), &frame, &CovarianceInterpolator::default())?;

    // shots aimed at the two low corners and one high corner
    let targets = [6, 20, 127];
    let mut rng = seeded(3, 0);
    let shots: Vec<_> = (0..6000)
        .map(|_| {
            let k = targets[rng.random_range(0..targets.len())];
            saturated.components[k].distribution().sample(&mut rng)
        })
        .collect::<shotmix::Result<_>>()?;

    let opts = EmOptions { max_iter: 2000, ..Default::default() };
    let fit = saturated.fit(&shots, &opts)?;
    println!("EM: {} iterations, converged {}, log-posterior {:.2}", fit.iterations, fit.converged, fit.final_log_posterior());

    let trimmed = prune_and_refit(&saturated, &shots, 0.01, &opts)?;
    println!("{} of {} components survive pruning", trimmed.len(), saturated.len());
    for (c, w) in trimmed.components.iter().zip(&trimmed.weights) {
        println!("  #{:>3} mean ({:+.2}, {:.2}) lambda {:.1} weight {:.3}", c.grid_index, c.mean.y, c.mean.z, c.lambda, w);
    }
    Ok(())
}
