//! From a prevalent cohort to the incidence law: fit the length-biased law,
//! reweight by 1/t and smooth.
//!
//! cargo run --release --example length_biased

use multicens::{
    gen_lb, kde_unbiased, kernel_epanechnikov, lb_to_mc, solve_score, unbiased_cdf, CensorDist, SolverConfig,
    TrueModel,
};

fn main() -> multicens::Result<()> {
    let fu = TrueModel::gamma(4.0, 1.0)?;
    let lb = gen_lb(&fu, CensorDist::Exponential { mean: 6.0 }, 1400, 600, 5)?;
    let sample = lb_to_mc(&lb)?;
    let (fit, _) = solve_score(&sample, &SolverConfig::default())?;
    let ue = unbiased_cdf(&fit)?;
    println!("p_hat = {:.3}, mu_U_hat = {:.4} (true 1/4)", sample.phat(), ue.mu_u_hat());

    let ks = ue
        .fu()
        .atoms()
        .iter()
        .map(|&t| (ue.fu().cdf(t) - fu.cdf(t)).abs().max((ue.fu().cdf_left(t) - fu.cdf(t)).abs()))
        .fold(0.0, f64::max);
    println!("KS distance of F_U_hat to Gamma(4) = {ks:.4}");

    let est = kde_unbiased(&ue, &kernel_epanechnikov(), 0.6)?;
    println!("   t   f_U_hat(t)   f_U(t)");
    for t in [1.0, 2.0, 3.0, 4.0, 6.0, 8.0] {
        println!("{t:4.1}   {:.4}       {:.4}", est.eval(t), fu.pdf(t));
    }
    Ok(())
}
