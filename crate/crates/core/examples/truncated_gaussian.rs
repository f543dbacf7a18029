//! Density, acceptance probability and rejection sampling for a truncated
//! bivariate Gaussian on the goal plane.

use shotmix::geometry::{GoalPoint, SymMatrix2, TruncatedGaussian};
use shotmix::rng::seeded;

fn main() -> shotmix::Result<()> {
    let g = TruncatedGaussian::new(GoalPoint::new(0.0, 0.3), SymMatrix2::new(0.7, 0.16, 0.3))?;
    println!("P(z >= 0) = {:.4}", g.acceptance_probability());
    for p in [GoalPoint::new(0.0, 0.0), GoalPoint::new(1.0, 0.5), GoalPoint::new(0.0, -0.1)] {
        println!("pdf({:>4.1}, {:>4.1}) = {:.5}", p.y, p.z, g.pdf(p)?);
    }

    let mut rng = seeded(1, 0);
    let n = 50_000;
    let mut mean = GoalPoint::default();
    for _ in 0..n {
        let s = g.sample(&mut rng)?;
        mean.y += s.y / n as f64;
        mean.z += s.z / n as f64;
    }
    println!("sample mean over {n} draws: ({:.3}, {:.3})", mean.y, mean.z);
    Ok(())
}
