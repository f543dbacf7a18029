//! Per-player weights shrunk toward the global weights; fewer shots means
//! more shrinkage.

use shotmix::players::{fit_player, HierarchyConfig};
use shotmix::rng::seeded;
use shotmix::simulate::{reference_model, sample_dirichlet};

fn main() -> shotmix::Result<()> {
    let (model, _) = reference_model();
    let mut rng = seeded(5, 0);
    let theta_star = sample_dirichlet(30.0, &model.weights, &mut rng)?;
    let pick = rand::distr::weighted::WeightedIndex::new(&theta_star).unwrap();

    let all: Vec<_> = (0..2000)
        .map(|_| model.components[rand::Rng::sample(&mut rng, &pick)].distribution().sample(&mut rng))
        .collect::<shotmix::Result<_>>()?;

    let l1 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
    for n in [0, 10, 100, 2000] {
        let fit = fit_player(&all[..n], &model, &HierarchyConfig::default())?;
        println!(
            "{n:>5} shots: L1 to truth {:.3}, L1 to global {:.3}, {} iterations",
            l1(&fit.theta, &theta_star),
            l1(&fit.theta, &model.weights),
            fit.iterations
        );
    }
    Ok(())
}
