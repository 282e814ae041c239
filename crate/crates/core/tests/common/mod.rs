#![allow(dead_code)]

use multicens::rng::substream;
use multicens::simulate::gen_mc_with;
use multicens::{solve_score, SolverConfig, TrueModel};
use rayon::prelude::*;

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `sqrt(k) (G_hat(t) - G(t))` on `grid` for `reps` independent
/// multiplicatively censored samples.
pub fn replication_rows(model: &TrueModel, m: usize, n: usize, grid: &[f64], reps: usize, seed: u64) -> Vec<Vec<f64>> {
    let root_k = ((m + n) as f64).sqrt();
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r as u64);
            let s = gen_mc_with(model, m, n, &mut rng).unwrap();
            let (fit, _) = solve_score(&s, &SolverConfig::default()).unwrap();
            grid.iter().map(|&t| root_k * (fit.cdf(t) - model.cdf(t))).collect()
        })
        .collect()
}

/// Sample covariance (divisor `B - 1`) and the standard error of each entry,
/// from the fourth-moment formula `Var(s_ij) ~ Var((x_i - m_i)(x_j - m_j)) / B`.
pub fn covariance_with_se(rows: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let b = rows.len() as f64;
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / b).collect();
    let mut cov = vec![vec![0.0; d]; d];
    let mut se = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            let prods: Vec<f64> = rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).collect();
            let c = prods.iter().sum::<f64>() / (b - 1.0);
            let v = prods.iter().map(|p| (p - c).powi(2)).sum::<f64>() / (b - 1.0);
            cov[i][j] = c;
            se[i][j] = (v / b).sqrt();
        }
    }
    (cov, se)
}
