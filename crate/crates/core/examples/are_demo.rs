//! Efficiency gain from the censored observations in the exponential model:
//! the MLE of the mean from x alone against the MLE from x and y together.
//! With n = upsilon m the variance ratio tends to 1 + upsilon / 2.
//!
//! cargo run --release --example are_demo

fn main() -> multicens::Result<()> {
    let m = 500;
    for n in [250, 500, 1000] {
        let ratio = multicens::are_demo(1.0, m, n, 2000, 1)?;
        let upsilon = n as f64 / m as f64;
        println!("upsilon = {upsilon}: Var(x only) / Var(x and y) = {ratio:.3}, predicted {:.2}", 1.0 + upsilon / 2.0);
    }
    Ok(())
}
