//! Smooths a fitted distribution with the Epanechnikov kernel under the
//! three bandwidth rules and reports the ISE of each.
//!
//! cargo run --example kde_bandwidths

use multicens::{
    bandwidth_oracle, bandwidth_reference, bandwidth_theoretical, gen_mc, ise, kernel_epanechnikov, solve_score,
    BandwidthGrid, IseWindow, KdeEstimate, SolverConfig, TrueModel,
};

fn main() -> multicens::Result<()> {
    let truth = TrueModel::gamma(5.0, 1.0)?;
    let kernel = kernel_epanechnikov();
    let sample = gen_mc(&truth, 200, 200, 3)?;
    let (fit, _) = solve_score(&sample, &SolverConfig::default())?;

    let b = truth.quantile(0.999);
    let window = IseWindow { a: 0.0, b, points: 2049 };
    let h_ref = bandwidth_reference(&sample, &kernel)?;
    let h_th = bandwidth_theoretical(sample.k(), sample.phat(), &kernel, truth.l2_gpp_on(0.0, b))?;
    let h_or = bandwidth_oracle(&fit, &truth, &kernel, window, &BandwidthGrid::around(h_ref).values())?;

    for (name, h) in [("reference", h_ref), ("theoretical", h_th), ("oracle", h_or)] {
        let est = KdeEstimate::new(fit.clone(), kernel, h)?;
        println!("{name:>11}: h = {h:.3}, ISE = {:.3e}", ise(&est, &truth, 0.0, b, 2049));
    }

    let est = KdeEstimate::new(fit, kernel, h_ref)?;
    println!("   t   g_hat(t)   g(t)");
    for t in [1.0, 2.5, 4.0, 5.5, 7.0, 9.0] {
        println!("{t:4.1}   {:.4}    {:.4}", est.eval(t), truth.pdf(t));
    }
    Ok(())
}
