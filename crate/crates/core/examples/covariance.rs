//! Covariance of the fitted distribution function: bootstrap and the explicit
//! plug-in formula for a length-biased cohort, then the implied covariance of
//! F_U_hat and of the smoothed density.
//!
//! cargo run --release --example covariance

use multicens::{
    gen_lb, kernel_epanechnikov, lb_to_mc, psi_u_bootstrap, psi_u_explicit, psi_z_hat, sigma_hat, solve_score,
    unbiased_cdf, CensorDist, CovGrid, SolverConfig, TrueModel,
};

fn show(name: &str, c: &CovGrid) {
    println!("{name}");
    for i in 0..c.len() {
        let row: Vec<String> = (0..c.len()).map(|j| format!("{:8.4}", c.get(i, j))).collect();
        println!("  {:4.1} |{}", c.grid()[i], row.join(""));
    }
}

fn main() -> multicens::Result<()> {
    let fu = TrueModel::gamma(4.0, 1.0)?;
    let lb = gen_lb(&fu, CensorDist::Exponential { mean: 6.26 }, 700, 300, 9)?;
    let sample = lb_to_mc(&lb)?;
    let solver = SolverConfig::default();
    let (fit, _) = solve_score(&sample, &solver)?;
    let kernel = kernel_epanechnikov();
    let grid = [2.5, 3.5, 4.5, 5.5, 7.0];

    let (boot, rep) = psi_u_bootstrap(&sample, 200, &grid, 1, &solver)?;
    show(&format!("bootstrap ({} resamples, {} failed)", rep.resamples, rep.failures), &boot);
    let (explicit, info) = psi_u_explicit(&lb, &fit, &grid, &kernel)?;
    show(&format!("explicit formula (p_hat = {:.2})", info.p_hat), &explicit);

    // covariance of sqrt(k)(F_U_hat - F_U), through a finer grid for G
    let fine: Vec<f64> = (0..=60).map(|i| 1.0 + 0.125 * i as f64).collect();
    let (psi_fine, _) = psi_u_bootstrap(&sample, 200, &fine, 2, &solver)?;
    let ue = unbiased_cdf(&fit)?;
    show("covariance of F_U_hat", &psi_z_hat(&psi_fine, &ue, &grid)?);

    // the density covariance needs psi_Z around (s, t) +- h
    let dense: Vec<f64> = (0..=40).map(|i| 2.0 + 0.1 * i as f64).collect();
    let psi_z = psi_z_hat(&psi_fine, &ue, &dense)?;
    let h = 0.8;
    println!("sigma_hat of the density at (4, 4), h = {h}: {:.4}", sigma_hat(&psi_z, &kernel, h, 4.0, 4.0)?);
    Ok(())
}
