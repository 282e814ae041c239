//! Integrated squared error and the Monte Carlo experiments built on it.

use rand_distr::{Distribution, Exp, Gamma};
use rayon::prelude::*;

use crate::dist::{DiscreteDist, Kernel, TrueModel};
use crate::error::{invalid, Error, Result};
use crate::kde::{
    bandwidth_oracle, bandwidth_theoretical, reference_from_uncensored, BandwidthGrid, BandwidthRule, IseWindow,
    KdeEstimate,
};
use crate::npmle::{solve_score, SolverConfig};
use crate::quad::simpson;
use crate::rng::substream;
use crate::simulate::{gen_mc_with, MCSample};

/// `int_a^b (g_hat - g)^2` by composite Simpson on `grid_n` points.
pub fn ise(est: &KdeEstimate, model: &TrueModel, a: f64, b: f64, grid_n: usize) -> f64 {
    ise_fn(|t| est.eval(t), model, a, b, grid_n)
}

/// As [`ise`] for an arbitrary density estimate.
pub fn ise_fn<F: Fn(f64) -> f64>(ghat: F, model: &TrueModel, a: f64, b: f64, grid_n: usize) -> f64 {
    simpson(
        |t| {
            let d = ghat(t) - model.pdf(t);
            d * d
        },
        a,
        b,
        grid_n,
    )
    .max(0.0)
}

/// Mean and normal-approximation 95% interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// `mean +- 1.96 sd / sqrt(n)` with the standard deviation taken over `n`.
pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.len() < 2 {
        return Err(invalid("summarize needs at least two values"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let half = 1.96 * var.sqrt() / n.sqrt();
    Ok(Summary {
        mean,
        ci_low: mean - half,
        ci_high: mean + half,
    })
}

/// One cell of the relative-ISE tables.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Shape of the unit-scale Gamma truth.
    pub alpha: f64,
    /// `(m, n)` pairs, one result each.
    pub sizes: Vec<(usize, usize)>,
    pub reps: usize,
    pub rule: BandwidthRule,
    pub seed: u64,
    /// Upper ISE limit as a quantile level of the truth.
    pub ise_quantile: f64,
    pub grid_n: usize,
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            alpha: 5.0,
            sizes: vec![(50, 50)],
            reps: 500,
            rule: BandwidthRule::Reference,
            seed: crate::rng::DEFAULT_SEED,
            ise_quantile: 0.999,
            grid_n: 2049,
            solver: SolverConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(invalid("reps must be at least 1"));
        }
        if self.sizes.is_empty() {
            return Err(invalid("at least one sample size is required"));
        }
        if self.sizes.iter().any(|&(m, n)| m == 0 && n == 0) {
            return Err(invalid("every size needs m + n >= 1"));
        }
        if !(self.ise_quantile > 0.0 && self.ise_quantile < 1.0) {
            return Err(invalid("ise_quantile must lie in (0, 1)"));
        }
        if self.grid_n < 3 {
            return Err(invalid("grid_n must be at least 3"));
        }
        self.solver.validate()
    }
}

/// Outcome of one table cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub m: usize,
    pub n: usize,
    pub alpha: f64,
    /// Mean of `100 (ISE_0 - ISE_1) / ISE_1`.
    pub mean_rel_increase: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub reps_used: usize,
    pub reps_failed: usize,
    /// `(ISE_0, ISE_1)` per successful replication: uncensored-only, full sample.
    pub pairs: Vec<(f64, f64)>,
}

impl ExperimentResult {
    pub fn size_label(&self) -> String {
        format!("{}+{}", self.m, self.n)
    }
}

/// Substream index for replication `rep` of size cell `cell`.
pub(crate) fn replication_stream(cell: usize, rep: usize) -> u64 {
    ((cell as u64) << 32) | rep as u64
}

struct Replication<'a> {
    model: &'a TrueModel,
    kernel: &'a Kernel,
    window: IseWindow,
    rule: BandwidthRule,
    solver: &'a SolverConfig,
    l2_gpp: f64,
}

impl Replication<'_> {
    fn bandwidth(&self, dist: &DiscreteDist, x: &[f64], k: usize, p: f64) -> Result<f64> {
        match self.rule {
            BandwidthRule::Reference => reference_from_uncensored(x, self.kernel),
            BandwidthRule::Theoretical => bandwidth_theoretical(k, p, self.kernel, self.l2_gpp),
            BandwidthRule::Oracle => {
                let h_ref = reference_from_uncensored(x, self.kernel)?;
                let grid = BandwidthGrid::around(h_ref).values();
                bandwidth_oracle(dist, self.model, self.kernel, self.window, &grid)
            }
        }
    }

    fn ise_of(&self, dist: DiscreteDist, h: f64) -> Result<f64> {
        let est = KdeEstimate::new(dist, *self.kernel, h)?;
        Ok(ise(&est, self.model, self.window.a, self.window.b, self.window.points))
    }

    /// `(ISE_0, ISE_1)` for one sample.
    fn run(&self, sample: &MCSample) -> Result<(f64, f64)> {
        let (full, _) = solve_score(sample, self.solver)?;
        let unc = DiscreteDist::empirical(sample.x())?;
        let h_full = self.bandwidth(&full, sample.x(), sample.k(), sample.phat())?;
        let h_unc = self.bandwidth(&unc, sample.x(), sample.m(), 1.0)?;
        Ok((self.ise_of(unc, h_unc)?, self.ise_of(full, h_full)?))
    }
}

/// Relative increase in ISE from discarding the censored subsample, for each
/// configured size.
///
/// Replications run in parallel on the current rayon pool; each draws from
/// its own substream and results are reduced in replication order, so the
/// output does not depend on the thread count. Replications whose solve
/// fails are excluded and counted.
pub fn run_relative_ise(config: &ExperimentConfig, kernel: &Kernel) -> Result<Vec<ExperimentResult>> {
    config.validate()?;
    let model = TrueModel::gamma(config.alpha, 1.0)?;
    let window = IseWindow {
        a: 0.0,
        b: model.quantile(config.ise_quantile),
        points: config.grid_n,
    };
    let rep = Replication {
        model: &model,
        kernel,
        window,
        rule: config.rule,
        solver: &config.solver,
        l2_gpp: model.l2_gpp_on(0.0, window.b),
    };
    let mut results = Vec::with_capacity(config.sizes.len());
    for (cell, &(m, n)) in config.sizes.iter().enumerate() {
        let outcomes: Vec<Result<(f64, f64)>> = (0..config.reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = substream(config.seed, replication_stream(cell, r));
                let sample = gen_mc_with(&model, m, n, &mut rng)?;
                rep.run(&sample)
            })
            .collect();
        let mut pairs = Vec::with_capacity(config.reps);
        let mut failed = 0;
        for o in outcomes {
            match o {
                Ok(p) => pairs.push(p),
                Err(Error::NonConvergence { .. }) | Err(Error::DegenerateTruncation { .. }) => failed += 1,
                Err(e) => return Err(e),
            }
        }
        let rel: Vec<f64> = pairs.iter().map(|(i0, i1)| 100.0 * (i0 - i1) / i1).collect();
        let s = if rel.len() >= 2 {
            summarize(&rel)?
        } else {
            let v = rel.first().copied().unwrap_or(f64::NAN);
            Summary { mean: v, ci_low: v, ci_high: v }
        };
        results.push(ExperimentResult {
            m,
            n,
            alpha: config.alpha,
            mean_rel_increase: s.mean,
            ci_low: s.ci_low,
            ci_high: s.ci_high,
            reps_used: pairs.len(),
            reps_failed: failed,
            pairs,
        });
    }
    Ok(results)
}

/// Empirical mean ISE against the two-term asymptotic expansion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpansionCheck {
    pub empirical_mean_ise: f64,
    pub predicted: f64,
    pub bandwidth: f64,
    pub reps_failed: usize,
}

/// Leading ISE terms `h^4 sigma^4 / 4 ||g''||^2 + nu^2 / (h k p)`.
pub fn ise_expansion(h: f64, k: usize, p: f64, kernel: &Kernel, l2_gpp: f64) -> f64 {
    let s2 = kernel.sigma2();
    h.powi(4) * s2 * s2 / 4.0 * l2_gpp + kernel.nu2() / (h * k as f64 * p)
}

/// Compares the Monte Carlo mean ISE on `[0, q_eta]` at the theoretical
/// bandwidth with the asymptotic expansion evaluated there.
#[allow(clippy::too_many_arguments)]
pub fn ise_expansion_check(
    model: &TrueModel,
    k: usize,
    p: f64,
    kernel: &Kernel,
    eta_q: f64,
    reps: usize,
    seed: u64,
    solver: &SolverConfig,
) -> Result<ExpansionCheck> {
    if reps == 0 || k == 0 || !(p > 0.0 && p <= 1.0) {
        return Err(invalid("ise_expansion_check needs reps >= 1, k >= 1 and p in (0, 1]"));
    }
    let upper = model.quantile(eta_q);
    let l2 = model.l2_gpp_on(0.0, upper);
    let h = bandwidth_theoretical(k, p, kernel, l2)?;
    let predicted = ise_expansion(h, k, p, kernel, l2);
    let m = (k as f64 * p).round() as usize;
    let n = k - m;
    let outcomes: Vec<Result<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r as u64);
            let sample = gen_mc_with(model, m, n, &mut rng)?;
            let (fit, _) = solve_score(&sample, solver)?;
            let est = KdeEstimate::new(fit, *kernel, h)?;
            Ok(ise(&est, model, 0.0, upper, 4097))
        })
        .collect();
    let mut values = Vec::with_capacity(reps);
    let mut failed = 0;
    for o in outcomes {
        match o {
            Ok(v) => values.push(v),
            Err(Error::NonConvergence { .. }) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    if values.is_empty() {
        return Err(invalid("every replication failed"));
    }
    Ok(ExpansionCheck {
        empirical_mean_ise: values.iter().sum::<f64>() / values.len() as f64,
        predicted,
        bandwidth: h,
        reps_failed: failed,
    })
}

/// Variance ratio of the uncensored-only and full-sample MLEs of `theta` when
/// uncensored draws are Gamma(2, theta) and censored draws Exp(mean theta).
pub fn are_demo(theta: f64, m: usize, n: usize, reps: usize, seed: u64) -> Result<f64> {
    if reps < 100 {
        return Err(invalid("are_demo needs at least 100 replications"));
    }
    if m == 0 || !(theta > 0.0 && theta.is_finite()) {
        return Err(invalid("are_demo needs m >= 1 and a positive theta"));
    }
    let gamma = Gamma::new(2.0, theta).map_err(|e| invalid(e.to_string()))?;
    let exp = Exp::new(1.0 / theta).map_err(|e| invalid(e.to_string()))?;
    let estimates: Vec<(f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r as u64);
            let sx: f64 = (0..m).map(|_| gamma.sample(&mut rng)).sum();
            let sy: f64 = (0..n).map(|_| exp.sample(&mut rng)).sum();
            let full = (sx + sy) / (2 * m + n) as f64;
            let unc = sx / (2 * m) as f64;
            (unc, full)
        })
        .collect();
    let var = |vals: Vec<f64>| {
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    };
    let v_unc = var(estimates.iter().map(|e| e.0).collect());
    let v_full = var(estimates.iter().map(|e| e.1).collect());
    Ok(v_unc / v_full)
}
