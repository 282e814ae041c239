//! Nonparametric maximum likelihood under multiplicative censoring.
//!
//! The estimator `G` solves the score equation
//!
//! ```text
//! dG(t) = p dG_m(t) + (1 - p) [ int_{0<y<=t} dF_n(y) / int_{y<=z} z^-1 dG(z) ] t^-1 dG(t)
//! ```
//!
//! on the pooled observations `t_1 < ... < t_K`, with no mass below a
//! truncation point `gamma`. Solutions are fixed points of the
//! self-consistency map
//!
//! ```text
//! phi_i(a) = (1/k) [ u_i + (a_i / t_i) sum_{j <= i} c_j / sum_{q >= max(j, r0)} a_q / t_q ]
//! ```
//!
//! where `u_i` and `c_i` count the uncensored and censored observations at
//! `t_i` and `r0` is the first atom at or above `gamma`. `phi` is the EM map
//! of the concave log-likelihood `sum u_i log a_i + sum c_j log S_j`, so the
//! solver iterates it (with squared extrapolation, plain EM being very slow
//! under heavy censoring) and handles censored-only atoms whose mass tends to
//! zero with an active set: such atoms are removed once small and shrinking,
//! and put back if the Karush-Kuhn-Tucker condition fails after convergence.

use crate::dist::{AtomCounts, DiscreteDist, TrueModel};
use crate::error::{invalid, Error, Result};
use crate::quad::linspace;
use crate::simulate::MCSample;

/// Settings for [`solve_score`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Exponent in the default truncation `gamma = k^(-1 / (2 alpha_trunc))`.
    pub alpha_trunc: f64,
    /// Explicit truncation point; replaces the default sequence when set.
    pub gamma_override: Option<f64>,
    /// Sup-norm tolerance on successive iterates.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial damping `d` in `a <- (1 - d) a + d phi(a)`.
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha_trunc: 2.0,
            gamma_override: None,
            tol: 1e-10,
            max_iter: 100_000,
            damping: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(invalid("tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(invalid("damping must lie in (0, 1]"));
        }
        if !(self.alpha_trunc >= 2.0 && self.alpha_trunc.is_finite()) {
            return Err(invalid("alpha_trunc must be at least 2"));
        }
        if let Some(g) = self.gamma_override {
            if !(g > 0.0 && g.is_finite()) {
                return Err(invalid("gamma_override must be positive"));
            }
        }
        Ok(())
    }

    /// Truncation point for a sample of size `k`.
    pub fn gamma(&self, k: usize) -> f64 {
        self.gamma_override
            .unwrap_or_else(|| (k as f64).powf(-1.0 / (2.0 * self.alpha_trunc)))
    }
}

/// Diagnostics of one solve.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    /// Extrapolation cycles, each of at most three evaluations of `phi`.
    pub iterations: usize,
    /// Last sup-norm change between iterates.
    pub final_delta: f64,
    /// Sup residual `max |a_i - phi_i(a)|` of the returned masses.
    pub residual: f64,
    /// Index of the first atom at or above the truncation point.
    pub r0_index: usize,
    pub gamma: f64,
    /// Whether oscillation forced the damping down.
    pub damping_triggered: bool,
    /// Uncensored observations below the truncation point, given no mass.
    pub dropped_uncensored: usize,
    /// Censored-only atoms carrying zero mass at the solution.
    pub zero_mass_atoms: usize,
}

/// Pooled, tie-merged observations.
#[derive(Clone, Debug)]
pub(crate) struct Pooled {
    pub atoms: Vec<f64>,
    pub counts: Vec<AtomCounts>,
}

pub(crate) fn pool(sample: &MCSample) -> Pooled {
    let mut tagged: Vec<(f64, bool)> = sample
        .x()
        .iter()
        .map(|&v| (v, false))
        .chain(sample.y().iter().map(|&v| (v, true)))
        .collect();
    tagged.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut atoms: Vec<f64> = Vec::with_capacity(tagged.len());
    let mut counts: Vec<AtomCounts> = Vec::with_capacity(tagged.len());
    for (v, censored) in tagged {
        if atoms.last() != Some(&v) {
            atoms.push(v);
            counts.push(AtomCounts::default());
        }
        let c = counts.last_mut().unwrap();
        if censored {
            c.censored += 1;
        } else {
            c.uncensored += 1;
        }
    }
    Pooled { atoms, counts }
}

/// The self-consistency map on atoms `r0..K`.
struct ScoreMap<'a> {
    atoms: &'a [f64],
    uncensored: Vec<f64>,
    censored: Vec<f64>,
    /// Censored observations below the truncation point.
    censored_below: f64,
    /// Number of observations that can carry mass: `k` minus dropped uncensored.
    k_eff: f64,
    suffix: Vec<f64>,
}

impl<'a> ScoreMap<'a> {
    fn new(pooled: &'a Pooled, r0: usize) -> Self {
        let uncensored: Vec<f64> = pooled.counts[r0..].iter().map(|c| c.uncensored as f64).collect();
        let censored: Vec<f64> = pooled.counts[r0..].iter().map(|c| c.censored as f64).collect();
        let censored_below = pooled.counts[..r0].iter().map(|c| c.censored as f64).sum::<f64>();
        let k_eff = uncensored.iter().sum::<f64>() + censored.iter().sum::<f64>() + censored_below;
        let len = uncensored.len();
        Self {
            atoms: &pooled.atoms[r0..],
            uncensored,
            censored,
            censored_below,
            k_eff,
            suffix: vec![0.0; len],
        }
    }

    fn len(&self) -> usize {
        self.uncensored.len()
    }

    /// Writes `sum_{j <= i} c_j / S_max(j, r0)` into `out` for every active index.
    fn inner_sums(&mut self, a: &[f64], out: &mut [f64]) {
        let n = self.len();
        let mut acc = 0.0;
        for i in (0..n).rev() {
            acc += a[i] / self.atoms[i];
            self.suffix[i] = acc;
        }
        let mut inner = if self.censored_below > 0.0 {
            self.censored_below / self.suffix[0]
        } else {
            0.0
        };
        for i in 0..n {
            if self.censored[i] > 0.0 {
                inner += self.censored[i] / self.suffix[i];
            }
            out[i] = inner;
        }
    }

    /// Log-likelihood `sum u_i log a_i + sum c_j log S_max(j, r0)`.
    fn loglik(&self, a: &[f64]) -> f64 {
        let mut acc = 0.0;
        let mut total = 0.0;
        for i in (0..self.len()).rev() {
            acc += a[i] / self.atoms[i];
            if self.uncensored[i] > 0.0 {
                total += self.uncensored[i] * a[i].ln();
            }
            if self.censored[i] > 0.0 {
                total += self.censored[i] * acc.ln();
            }
        }
        if self.censored_below > 0.0 {
            total += self.censored_below * acc.ln();
        }
        total
    }

    /// `phi(a)`, normalised by `k_eff` so that it maps the simplex into itself.
    fn apply(&mut self, a: &[f64], inner: &mut [f64], out: &mut [f64]) {
        self.inner_sums(a, inner);
        for i in 0..self.len() {
            out[i] = (self.uncensored[i] + a[i] / self.atoms[i] * inner[i]) / self.k_eff;
        }
    }
}

/// Iterations between active-set pruning passes.
const PRUNE_EVERY: usize = 25;
/// Consecutive increases of the step size that trigger the damping fallback.
const OSCILLATION_RUN: usize = 10;

/// Relaxed step `max(0, (1 - d) a + d phi)`, renormalised into `out`.
/// Returns the sup-norm change before renormalisation.
fn relax(a: &[f64], phi: &[f64], damping: f64, out: &mut [f64]) -> f64 {
    let mut delta: f64 = 0.0;
    for i in 0..a.len() {
        out[i] = ((1.0 - damping) * a[i] + damping * phi[i]).max(0.0);
        delta = delta.max((out[i] - a[i]).abs());
    }
    normalize(out);
    delta
}

fn normalize(a: &mut [f64]) {
    let total: f64 = a.iter().sum();
    for v in a.iter_mut() {
        *v /= total;
    }
}

/// Solves the score equation for `G` by fixed-point iteration of `phi`,
/// accelerated with squared extrapolation (SQUAREM). An extrapolated point is
/// kept only if it does not lower the likelihood, so each cycle is at least
/// as good as two plain steps would be.
pub fn solve_score(sample: &MCSample, cfg: &SolverConfig) -> Result<(DiscreteDist, SolveReport)> {
    cfg.validate()?;
    let pooled = pool(sample);
    let k = sample.k();
    let gamma = cfg.gamma(k);
    let r0 = pooled.atoms.partition_point(|&t| t < gamma);
    if r0 == pooled.atoms.len() {
        return Err(Error::DegenerateTruncation { gamma });
    }
    let dropped_uncensored: usize = pooled.counts[..r0].iter().map(|c| c.uncensored).sum();
    let mut map = ScoreMap::new(&pooled, r0);
    let len = map.len();

    // n = 0 (after truncation): phi is constant, the empirical masses
    if map.censored_below == 0.0 && map.censored.iter().all(|&c| c == 0.0) {
        let a: Vec<f64> = map.uncensored.iter().map(|u| u / map.k_eff).collect();
        return finish(&pooled, r0, a, gamma, 1, 0.0, false, dropped_uncensored, &mut map);
    }

    let mut a = vec![1.0 / len as f64; len];
    let mut a1 = vec![0.0; len];
    let mut a2 = vec![0.0; len];
    let mut jump = vec![0.0; len];
    let mut phi = vec![0.0; len];
    let mut inner = vec![0.0; len];
    let mut protected = vec![false; len];
    let mut damping = cfg.damping;
    let mut damping_triggered = false;
    let mut prev_delta = f64::INFINITY;
    let mut rising = 0usize;
    let mut delta = f64::INFINITY;
    let prune_level = 1e-3 / map.k_eff;

    let mut iter = 0;
    while iter < cfg.max_iter {
        iter += 1;
        map.apply(&a, &mut inner, &mut phi);
        delta = relax(&a, &phi, damping, &mut a1);

        if delta > prev_delta {
            rising += 1;
            if rising >= OSCILLATION_RUN && damping > 0.5 {
                damping = 0.5;
                damping_triggered = true;
                rising = 0;
            }
        } else {
            rising = 0;
        }
        prev_delta = delta;

        if iter % PRUNE_EVERY == 0 || delta <= cfg.tol {
            // an atom is shrinking when phi_i < a_i
            let mut removed = 0.0;
            for i in 0..len - 1 {
                if map.uncensored[i] == 0.0
                    && !protected[i]
                    && a[i] > 0.0
                    && a[i] < prune_level
                    && phi[i] <= a[i]
                {
                    removed += a[i];
                    a[i] = 0.0;
                }
            }
            if removed > 0.0 {
                normalize(&mut a);
                prev_delta = f64::INFINITY;
                continue;
            }
        }

        if delta <= cfg.tol {
            a.copy_from_slice(&a1);
            // optimality of the zero atoms: d/da_i loglik <= k_eff
            map.inner_sums(&a, &mut inner);
            let mut readded = false;
            for i in 0..len {
                if a[i] == 0.0 && inner[i] / map.atoms[i] > map.k_eff * (1.0 + 1e-9) {
                    a[i] = prune_level;
                    protected[i] = true;
                    readded = true;
                }
            }
            if !readded {
                break;
            }
            normalize(&mut a);
            prev_delta = f64::INFINITY;
            continue;
        }

        // squared extrapolation: a - 2s r + s^2 v with r = a1 - a, v = a2 - 2 a1 + a
        map.apply(&a1, &mut inner, &mut phi);
        relax(&a1, &phi, damping, &mut a2);
        let (mut rr, mut vv) = (0.0, 0.0);
        for i in 0..len {
            let r = a1[i] - a[i];
            let v = a2[i] - 2.0 * a1[i] + a[i];
            rr += r * r;
            vv += v * v;
        }
        let step = if vv > 0.0 { -(rr / vv).sqrt().max(1.0) } else { -1.0 };
        if step < -1.0 {
            let mut lost_protected = false;
            for i in 0..len {
                let r = a1[i] - a[i];
                let v = a2[i] - 2.0 * a1[i] + a[i];
                jump[i] = (a[i] - 2.0 * step * r + step * step * v).max(0.0);
                lost_protected |= protected[i] && jump[i] == 0.0;
            }
            if !lost_protected && jump.iter().sum::<f64>() > 0.0 {
                normalize(&mut jump);
                map.apply(&jump, &mut inner, &mut phi);
                relax(&jump, &phi, damping, &mut a1);
                if map.loglik(&a1) >= map.loglik(&a) {
                    std::mem::swap(&mut a, &mut a1);
                    continue;
                }
            }
        }
        std::mem::swap(&mut a, &mut a2);
    }
    if delta > cfg.tol {
        return Err(Error::NonConvergence {
            iterations: iter,
            final_delta: delta,
        });
    }
    finish(&pooled, r0, a, gamma, iter, delta, damping_triggered, dropped_uncensored, &mut map)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    pooled: &Pooled,
    r0: usize,
    a: Vec<f64>,
    gamma: f64,
    iterations: usize,
    final_delta: f64,
    damping_triggered: bool,
    dropped_uncensored: usize,
    map: &mut ScoreMap<'_>,
) -> Result<(DiscreteDist, SolveReport)> {
    let len = a.len();
    let mut phi = vec![0.0; len];
    let mut inner = vec![0.0; len];
    map.apply(&a, &mut inner, &mut phi);
    let residual = a
        .iter()
        .zip(&phi)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let zero_mass_atoms = a.iter().filter(|&&v| v == 0.0).count();
    let mut masses = vec![0.0; r0];
    masses.extend(a);
    let dist = DiscreteDist::with_counts(pooled.atoms.clone(), masses, pooled.counts.clone())?;
    Ok((
        dist,
        SolveReport {
            iterations,
            final_delta,
            residual,
            r0_index: r0,
            gamma,
            damping_triggered,
            dropped_uncensored,
            zero_mass_atoms,
        },
    ))
}

/// `max_{i >= r0} |w_i - phi_i(w)|` for masses `w` on the pooled atoms of `sample`.
pub fn score_residual(dist: &DiscreteDist, sample: &MCSample, gamma: f64) -> Result<f64> {
    let pooled = pool(sample);
    if dist.atoms() != pooled.atoms.as_slice() {
        return Err(invalid("distribution is not defined on the pooled atoms of the sample"));
    }
    let r0 = pooled.atoms.partition_point(|&t| t < gamma);
    if r0 == pooled.atoms.len() {
        return Err(Error::DegenerateTruncation { gamma });
    }
    let mut map = ScoreMap::new(&pooled, r0);
    let w = &dist.masses()[r0..];
    let mut phi = vec![0.0; w.len()];
    let mut inner = vec![0.0; w.len()];
    map.apply(w, &mut inner, &mut phi);
    Ok(w.iter()
        .zip(&phi)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// `max |G_hat(t) - G(t)|` over the atoms and `grid_n` points on `[0, tau_eff]`,
/// with `G_hat` evaluated right-continuously.
pub fn sup_distance(dist: &DiscreteDist, model: &TrueModel, grid_n: usize) -> Result<f64> {
    if grid_n < 2 {
        return Err(invalid("grid_n must be at least 2"));
    }
    let upper = model.tau_eff().max(*dist.atoms().last().unwrap());
    let grid = linspace(0.0, upper, grid_n);
    Ok(dist
        .atoms()
        .iter()
        .chain(&grid)
        .map(|&t| (dist.cdf(t) - model.cdf(t)).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::gen_mc;

    fn cfg_with_gamma(g: f64) -> SolverConfig {
        SolverConfig {
            gamma_override: Some(g),
            ..SolverConfig::default()
        }
    }

    #[test]
    fn single_uncensored_point() {
        let s = MCSample::new(vec![2.0], vec![]).unwrap();
        let (d, rep) = solve_score(&s, &SolverConfig::default()).unwrap();
        assert_eq!(d.atoms(), &[2.0]);
        assert_eq!(d.masses(), &[1.0]);
        assert_eq!(rep.iterations, 1);
    }

    /// Brute-force scan of the 1-simplex for fixed points of phi on
    /// x = {2}, y = {1}: a1 -> a1 / (1 + a1).
    #[test]
    fn two_point_fixed_point() {
        let phi1 = |a1: f64| {
            let a2 = 1.0 - a1;
            0.5 * a1 / (a1 + a2 / 2.0)
        };
        let fixed: Vec<f64> = (0..=100_000)
            .map(|i| i as f64 / 100_000.0)
            .filter(|&a1| 1.0 - a1 >= 0.5 && (phi1(a1) - a1).abs() < 1e-12)
            .collect();
        assert_eq!(fixed, vec![0.0]);

        let s = MCSample::new(vec![2.0], vec![1.0]).unwrap();
        let (d, rep) = solve_score(&s, &cfg_with_gamma(0.5)).unwrap();
        assert_eq!(d.atoms(), &[1.0, 2.0]);
        assert!(d.masses()[0].abs() < 1e-10, "{:?}", d.masses());
        assert!((d.masses()[1] - 1.0).abs() < 1e-10);
        assert_eq!(rep.zero_mass_atoms, 1);
    }

    #[test]
    fn uncensored_only_reduces_to_empirical() {
        let model = TrueModel::gamma(4.0, 1.0).unwrap();
        let s = gen_mc(&model, 300, 0, 3).unwrap();
        let (d, _) = solve_score(&s, &cfg_with_gamma(1e-6)).unwrap();
        let emp = DiscreteDist::empirical(s.x()).unwrap();
        assert_eq!(d.atoms(), emp.atoms());
        for t in d.atoms() {
            assert!((d.cdf(*t) - emp.cdf(*t)).abs() < 1e-12);
        }
        assert_eq!(score_residual(&d, &s, 1e-6).unwrap(), 0.0);
    }

    #[test]
    fn uniform_masses_are_not_a_fixed_point() {
        let s = MCSample::new(vec![2.0], vec![1.0]).unwrap();
        let d = DiscreteDist::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        // phi_1(1/2, 1/2) = 1/2 * (1/2) / (3/4) = 1/3
        let r = score_residual(&d, &s, 0.5).unwrap();
        assert!((r - (0.5 - 1.0 / 3.0)).abs() < 1e-15, "{r}");
    }

    #[test]
    fn ties_are_merged_with_counts() {
        let s = MCSample::new(vec![2.0, 3.0, 3.0], vec![3.0, 1.0]).unwrap();
        let (d, rep) = solve_score(&s, &cfg_with_gamma(0.1)).unwrap();
        assert_eq!(d.atoms(), &[1.0, 2.0, 3.0]);
        let c = d.counts().unwrap();
        assert_eq!(c[2], AtomCounts { uncensored: 2, censored: 1 });
        assert!(rep.residual <= 1e-9);
    }

    #[test]
    fn truncation_zeroes_low_atoms() {
        let model = TrueModel::gamma(3.0, 1.0).unwrap();
        let s = gen_mc(&model, 60, 60, 9).unwrap();
        let gamma = 0.8;
        let (d, rep) = solve_score(&s, &cfg_with_gamma(gamma)).unwrap();
        for (t, w) in d.atoms().iter().zip(d.masses()) {
            if *t < gamma {
                assert_eq!(*w, 0.0);
            }
        }
        assert!(rep.r0_index > 0);
        assert!(rep.residual <= 1e-9);
    }

    #[test]
    fn degenerate_truncation_is_reported() {
        let s = MCSample::new(vec![0.5], vec![0.2]).unwrap();
        assert!(matches!(
            solve_score(&s, &cfg_with_gamma(1.0)),
            Err(Error::DegenerateTruncation { .. })
        ));
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let model = TrueModel::gamma(5.0, 1.0).unwrap();
        let s = gen_mc(&model, 50, 50, 1).unwrap();
        let cfg = SolverConfig {
            max_iter: 3,
            ..SolverConfig::default()
        };
        assert!(matches!(solve_score(&s, &cfg), Err(Error::NonConvergence { iterations: 3, .. })));
    }

    #[test]
    fn sup_distance_examples() {
        let pm = TrueModel::point_mass(2.0).unwrap();
        let d = DiscreteDist::point_mass(2.0).unwrap();
        assert_eq!(sup_distance(&d, &pm, 10).unwrap(), 0.0);
        assert!(sup_distance(&d, &pm, 1).is_err());
    }

    #[test]
    fn sup_distance_matches_brute_force() {
        let model = TrueModel::gamma(5.0, 1.0).unwrap();
        let s = gen_mc(&model, 10_000, 0, 2).unwrap();
        let d = DiscreteDist::empirical(s.x()).unwrap();
        let grid_n = 64;
        let upper = model.tau_eff().max(*d.atoms().last().unwrap());
        let mut brute: f64 = 0.0;
        let mut pts: Vec<f64> = d.atoms().to_vec();
        pts.extend((0..grid_n).map(|i| upper * i as f64 / (grid_n - 1) as f64));
        for t in pts {
            let ecdf = s.x().iter().filter(|&&x| x <= t).count() as f64 / 10_000.0;
            brute = brute.max((ecdf - model.cdf(t)).abs());
        }
        let got = sup_distance(&d, &model, grid_n).unwrap();
        assert!((got - brute).abs() < 1e-12, "{got} vs {brute}");
    }
}
