//! Solves the score equation for a simulated sample and compares the fitted
//! distribution function with the truth.
//!
//! cargo run --example fit_npmle

use multicens::{gen_mc, score_residual, solve_score, sup_distance, DiscreteDist, SolverConfig, TrueModel};

fn main() -> multicens::Result<()> {
    let truth = TrueModel::gamma(5.0, 1.0)?;
    let sample = gen_mc(&truth, 400, 400, 11)?;
    let cfg = SolverConfig::default();
    let (fit, report) = solve_score(&sample, &cfg)?;
    println!(
        "k = {}, gamma = {:.4}, iterations = {}, residual = {:.2e}",
        sample.k(),
        report.gamma,
        report.iterations,
        score_residual(&fit, &sample, report.gamma)?
    );
    let positive = fit.masses().iter().filter(|&&w| w > 0.0).count();
    println!("{} atoms, {} with positive mass", fit.len(), positive);

    let unc = DiscreteDist::empirical(sample.x())?;
    println!("sup |G_hat - G|      = {:.4}", sup_distance(&fit, &truth, 2001)?);
    println!("sup |G_m - G| (x only) = {:.4}", sup_distance(&unc, &truth, 2001)?);

    println!("   t   G_hat(t)   G(t)");
    for t in [2.0, 3.0, 4.0, 5.0, 6.0, 8.0] {
        println!("{t:4.1}   {:.4}   {:.4}", fit.cdf(t), truth.cdf(t));
    }
    Ok(())
}
