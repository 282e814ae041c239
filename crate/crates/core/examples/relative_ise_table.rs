//! The relative ISE table: how much worse the density estimate gets when the
//! censored observations are thrown away.
//!
//! cargo run --release --example relative_ise_table -- [reps]

use multicens::{kernel_epanechnikov, run_relative_ise, BandwidthRule, ExperimentConfig};

fn main() -> multicens::Result<()> {
    let reps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let kernel = kernel_epanechnikov();
    println!("alpha  size      rule         mean %  95% CI");
    for (alpha, rule) in [(5.0, BandwidthRule::Reference), (4.0, BandwidthRule::Reference), (3.0, BandwidthRule::Oracle)] {
        let cfg = ExperimentConfig {
            alpha,
            sizes: vec![(50, 50), (100, 100)],
            reps,
            rule,
            ..ExperimentConfig::default()
        };
        for r in run_relative_ise(&cfg, &kernel)? {
            println!(
                "{alpha:5}  {:8}  {:11}  {:6.1}  ({:.1}, {:.1})",
                r.size_label(),
                rule.to_string(),
                r.mean_rel_increase,
                r.ci_low,
                r.ci_high
            );
        }
    }
    Ok(())
}
