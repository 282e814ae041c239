//! Draws a multiplicatively censored sample and a length-biased cohort, and
//! prints a few summary numbers for each.
//!
//! cargo run --example simulate_samples

use multicens::{gen_lb, gen_mc, lb_to_mc, CensorDist, TrueModel};

fn main() -> multicens::Result<()> {
    let g = TrueModel::gamma(5.0, 1.0)?;
    let s = gen_mc(&g, 100, 100, 7)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("multiplicative censoring, Gamma(5) truth");
    println!("  m = {}, n = {}, p_hat = {}", s.m(), s.n(), s.phat());
    // E[X] = 5 and E[Y] = E[Z] E[U] = 2.5
    println!("  mean of x = {:.3} (5), mean of y = {:.3} (2.5)", mean(s.x()), mean(s.y()));

    let fu = TrueModel::gamma(4.0, 1.0)?;
    let lb = gen_lb(&fu, CensorDist::Exponential { mean: 6.0 }, 150, 50, 7)?;
    let pooled = lb_to_mc(&lb)?;
    println!("length-biased cohort, Gamma(4) incidence law");
    println!("  {} records, {} with observed failure", lb.len(), lb.uncensored_count());
    // totals of uncensored prevalent cases are biased towards long lifetimes
    println!("  mean uncensored total = {:.3} (unbiased mean 4)", mean(pooled.x()));

    let mut out = Vec::new();
    s.write_csv(&mut out)?;
    let text = String::from_utf8(out).unwrap();
    println!("first CSV rows:");
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
