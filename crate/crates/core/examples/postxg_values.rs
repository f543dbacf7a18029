//! Fit the cubic-logit PostXg surface and compute component values.

use rand::Rng;
use shotmix::geometry::{GoalFrame, GoalPoint};
use shotmix::rng::seeded;
use shotmix::simulate::reference_model;
use shotmix::valuation::{component_values, fit_postxg, PostXgFitOptions, COEFFICIENT_NAMES};

fn main() -> shotmix::Result<()> {
    let frame = GoalFrame::default();
    let (mixture, truth) = reference_model();
    let mut rng = seeded(9, 0);
    let shots: Vec<(GoalPoint, bool)> = (0..20_000)
        .map(|_| {
            let p = GoalPoint::new(rng.random_range(-4.0..=4.0), rng.random_range(0.0..=2.67));
            (p, rng.random::<f64>() < truth.postxg(&frame, p))
        })
        .collect();

    let fit = fit_postxg(&shots, &frame, &PostXgFitOptions::default())?;
    println!("Newton converged {} after {} steps", fit.converged, fit.iterations);
    for (name, (c, t)) in COEFFICIENT_NAMES.iter().zip(fit.model.coefficients.iter().zip(truth.coefficients)) {
        println!("  {name:<10} {c:+.3}  (true {t:+.3})");
    }

    let values = component_values(&mixture, &fit.model, 50_000, 1)?;
    for (c, v) in mixture.components.iter().zip(&values) {
        println!("v[{:>3}] = {:.4} +- {:.4}", c.grid_index, v.v, v.mc_std_error);
    }
    Ok(())
}
