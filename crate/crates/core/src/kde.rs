//! Kernel smoothing of a fitted distribution and bandwidth selection.

use crate::dist::{DiscreteDist, Kernel, TrueModel};
use crate::error::{invalid, Error, Result};
use crate::ise::ise_fn;
use crate::quad::logspace;
use crate::simulate::MCSample;

/// `g_hat(t) = h^-1 sum_i w_i K((t - t_i) / h)`.
#[derive(Clone, Debug)]
pub struct KdeEstimate {
    dist: DiscreteDist,
    kernel: Kernel,
    bandwidth: f64,
}

impl KdeEstimate {
    pub fn new(dist: DiscreteDist, kernel: Kernel, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(Self {
            dist,
            kernel,
            bandwidth,
        })
    }

    pub fn dist(&self) -> &DiscreteDist {
        &self.dist
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn eval(&self, t: f64) -> f64 {
        kde_eval(self, t)
    }

    /// Support of the estimate, `[min atom - h, max atom + h]`.
    pub fn support(&self) -> (f64, f64) {
        let atoms = self.dist.atoms();
        (atoms[0] - self.bandwidth, atoms[atoms.len() - 1] + self.bandwidth)
    }
}

/// Evaluates the estimate at `t`, summing only atoms with `|t - t_i| < h`.
pub fn kde_eval(est: &KdeEstimate, t: f64) -> f64 {
    let h = est.bandwidth;
    let atoms = est.dist.atoms();
    let masses = est.dist.masses();
    let lo = atoms.partition_point(|&a| a <= t - h);
    let hi = atoms.partition_point(|&a| a < t + h);
    let mut acc = 0.0;
    for i in lo..hi {
        acc += masses[i] * est.kernel.eval((t - atoms[i]) / h);
    }
    acc / h
}

/// Gamma(4, beta) reference rule on the uncensored subsample:
/// `2 beta_hat (nu^2 / (m sigma^4))^(1/5)` with `beta_hat = sum x / (4 m)`.
pub fn bandwidth_reference(sample: &MCSample, kernel: &Kernel) -> Result<f64> {
    reference_from_uncensored(sample.x(), kernel)
}

pub(crate) fn reference_from_uncensored(x: &[f64], kernel: &Kernel) -> Result<f64> {
    let m = x.len();
    if m == 0 {
        return Err(invalid("the reference rule needs at least one uncensored observation"));
    }
    let m = m as f64;
    let beta_hat = x.iter().sum::<f64>() / (4.0 * m);
    let s2 = kernel.sigma2();
    Ok(2.0 * beta_hat * (kernel.nu2() / (m * s2 * s2)).powf(0.2))
}

/// ISE-order minimising bandwidth `(nu^2 / (k p sigma^4 ||g''||^2))^(1/5)`.
pub fn bandwidth_theoretical(k: usize, p: f64, kernel: &Kernel, l2_gpp: f64) -> Result<f64> {
    if k == 0 || !(p > 0.0 && p <= 1.0) || !(l2_gpp > 0.0 && l2_gpp.is_finite()) {
        return Err(invalid("bandwidth_theoretical needs k >= 1, p in (0, 1] and a positive finite ||g''||^2"));
    }
    let s2 = kernel.sigma2();
    Ok((kernel.nu2() / (k as f64 * p * s2 * s2 * l2_gpp)).powf(0.2))
}

/// Candidate bandwidths for the oracle search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandwidthGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

/// Points in the default oracle grid.
pub const ORACLE_GRID_POINTS: usize = 40;

impl BandwidthGrid {
    /// 40 log-spaced points on `[h_ref / 8, 8 h_ref]`.
    pub fn around(h_ref: f64) -> Self {
        Self {
            lo: h_ref / 8.0,
            hi: 8.0 * h_ref,
            points: ORACLE_GRID_POINTS,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lo];
        }
        logspace(self.lo, self.hi, self.points)
    }
}

/// Integration window and resolution of an ISE evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IseWindow {
    pub a: f64,
    pub b: f64,
    pub points: usize,
}

/// The ISE-minimising bandwidth among `candidates` (first minimiser on ties).
pub fn bandwidth_oracle(
    dist: &DiscreteDist,
    model: &TrueModel,
    kernel: &Kernel,
    window: IseWindow,
    candidates: &[f64],
) -> Result<f64> {
    Ok(oracle_profile(dist, model, kernel, window, candidates)?.0)
}

/// Oracle bandwidth together with the ISE at every candidate.
pub fn oracle_profile(
    dist: &DiscreteDist,
    model: &TrueModel,
    kernel: &Kernel,
    window: IseWindow,
    candidates: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if candidates.is_empty() {
        return Err(invalid("empty bandwidth grid"));
    }
    if !(window.b > window.a && window.a >= 0.0) {
        return Err(invalid("ISE window must satisfy b > a >= 0"));
    }
    let mut best = (f64::INFINITY, candidates[0]);
    let mut profile = Vec::with_capacity(candidates.len());
    for &h in candidates {
        let est = KdeEstimate::new(dist.clone(), *kernel, h)?;
        let v = ise_fn(|t| kde_eval(&est, t), model, window.a, window.b, window.points);
        if v < best.0 {
            best = (v, h);
        }
        profile.push(v);
    }
    Ok((best.1, profile))
}

/// How a bandwidth is chosen for each estimator in an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BandwidthRule {
    /// Gamma(4, beta) reference rule on the uncensored subsample.
    Reference,
    /// Closed-form optimum using the true `||g''||^2` and `p_hat`.
    Theoretical,
    /// Truth-aware ISE minimiser over a log grid around the reference rule.
    Oracle,
}

impl std::str::FromStr for BandwidthRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reference" => Ok(Self::Reference),
            "theoretical" => Ok(Self::Theoretical),
            "oracle" => Ok(Self::Oracle),
            other => Err(invalid(format!("unknown bandwidth rule {other:?}"))),
        }
    }
}

impl std::fmt::Display for BandwidthRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Reference => "reference",
            Self::Theoretical => "theoretical",
            Self::Oracle => "oracle",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::kernel_epanechnikov;
    use crate::quad::simpson;
    use crate::rng::substream;
    use rand::Rng;

    #[test]
    fn point_mass_kde() {
        let k = kernel_epanechnikov();
        let est = KdeEstimate::new(DiscreteDist::point_mass(2.0).unwrap(), k, 0.5).unwrap();
        assert_eq!(kde_eval(&est, 2.0), 0.75 / 0.5);
        assert_eq!(kde_eval(&est, 2.5), 0.0);
        assert_eq!(kde_eval(&est, 1.5), 0.0);
        assert_eq!(kde_eval(&est, 3.0), 0.0);
        assert!(KdeEstimate::new(DiscreteDist::point_mass(2.0).unwrap(), k, 0.0).is_err());
    }

    #[test]
    fn matches_brute_force_double_loop() {
        let k = kernel_epanechnikov();
        let mut rng = substream(5, 0);
        let mut atoms: Vec<f64> = (0..50).map(|_| rng.random_range(0.1..10.0)).collect();
        atoms.sort_by(f64::total_cmp);
        atoms.dedup();
        let raw: Vec<f64> = atoms.iter().map(|_| rng.random::<f64>()).collect();
        let tot: f64 = raw.iter().sum();
        let masses: Vec<f64> = raw.iter().map(|w| w / tot).collect();
        let d = DiscreteDist::new(atoms.clone(), masses.clone()).unwrap();
        let h = 0.7;
        let est = KdeEstimate::new(d, k, h).unwrap();
        for _ in 0..100 {
            let t = rng.random_range(-1.0..11.0);
            let mut brute = 0.0;
            for (a, w) in atoms.iter().zip(&masses) {
                let u: f64 = (t - a) / h;
                if u.abs() < 1.0 {
                    brute += w * 0.75 * (1.0 - u * u) / h;
                }
            }
            assert!((kde_eval(&est, t) - brute).abs() < 1e-14);
        }
    }

    #[test]
    fn integrates_to_one_and_is_location_equivariant() {
        let k = kernel_epanechnikov();
        let d = DiscreteDist::new(vec![1.0, 1.3, 4.0], vec![0.2, 0.5, 0.3]).unwrap();
        let est = KdeEstimate::new(d.clone(), k, 0.4).unwrap();
        let (lo, hi) = est.support();
        let total = simpson(|t| kde_eval(&est, t), lo, hi, 20_001);
        assert!((total - 1.0).abs() < 1e-6, "{total}");
        let shifted = KdeEstimate::new(d.shifted(2.5).unwrap(), k, 0.4).unwrap();
        for i in 0..50 {
            let t = 0.1 * i as f64;
            assert!((kde_eval(&est, t) - kde_eval(&shifted, t + 2.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_limit_at_an_atom() {
        let k = kernel_epanechnikov();
        let d = DiscreteDist::new(vec![1.0, 2.0], vec![0.3, 0.7]).unwrap();
        for &h in &[1e-2, 1e-4, 1e-6] {
            let est = KdeEstimate::new(d.clone(), k, h).unwrap();
            assert!((kde_eval(&est, 1.0) * h - 0.3 * 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_rule_examples() {
        let k = kernel_epanechnikov();
        let s = MCSample::new(vec![4.0; 4], vec![]).unwrap();
        let h = bandwidth_reference(&s, &k).unwrap();
        // beta_hat = 1; (0.6 / (4 * 0.04))^(1/5) = 3.75^(1/5), up to the quadrature in the kernel moments
        assert!((h - 2.0 * 3.75f64.powf(0.2)).abs() < 1e-10);
        assert!((h - 2.6052).abs() < 1e-4);
        let scaled = MCSample::new(vec![12.0; 4], vec![1.0]).unwrap();
        assert!((bandwidth_reference(&scaled, &k).unwrap() - 3.0 * h).abs() < 1e-12);
        let more = MCSample::new(vec![4.0; 16], vec![]).unwrap();
        assert!((bandwidth_reference(&more, &k).unwrap() - h * 4f64.powf(-0.2)).abs() < 1e-12);
        let none = MCSample::new(vec![], vec![1.0]).unwrap();
        assert!(bandwidth_reference(&none, &k).is_err());
    }

    #[test]
    fn theoretical_rule_recovers_reference_constant() {
        let k = kernel_epanechnikov();
        for &beta in &[0.5, 1.0, 1.7] {
            let l2 = TrueModel::gamma(4.0, beta).unwrap().l2_gpp_on(0.0, 80.0 * beta);
            let m = 137;
            let x = vec![4.0 * beta; m];
            let reference = reference_from_uncensored(&x, &k).unwrap();
            let theoretical = bandwidth_theoretical(m, 1.0, &k, l2).unwrap();
            assert!((reference / theoretical - 1.0).abs() < 1e-8, "beta={beta}");
        }
        let h = bandwidth_theoretical(100, 0.5, &k, 0.02).unwrap();
        assert!((bandwidth_theoretical(3200, 0.5, &k, 0.02).unwrap() - h / 2.0).abs() < 1e-12);
        assert!((bandwidth_theoretical(100, 0.25, &k, 0.02).unwrap() - h * 2f64.powf(0.2)).abs() < 1e-12);
    }

    #[test]
    fn oracle_picks_grid_argmin() {
        let k = kernel_epanechnikov();
        let model = TrueModel::gamma(5.0, 1.0).unwrap();
        let window = IseWindow { a: 0.0, b: model.quantile(0.999), points: 2049 };
        let s = crate::simulate::gen_mc(&model, 100, 0, 12).unwrap();
        let d = DiscreteDist::empirical(s.x()).unwrap();
        let h_ref = bandwidth_reference(&s, &k).unwrap();
        let grid = BandwidthGrid::around(h_ref).values();
        let (h, profile) = oracle_profile(&d, &model, &k, window, &grid).unwrap();
        let argmin = profile
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(h, grid[argmin]);
        // minimum strictly inside the grid
        assert!(argmin > 0 && argmin < grid.len() - 1, "argmin {argmin}");

        let pair = [grid[argmin], grid[0]];
        assert_eq!(bandwidth_oracle(&d, &model, &k, window, &pair).unwrap(), grid[argmin]);
        let pair = [grid[0], grid[argmin]];
        assert_eq!(bandwidth_oracle(&d, &model, &k, window, &pair).unwrap(), grid[argmin]);
        assert!(bandwidth_oracle(&d, &model, &k, window, &[]).is_err());
    }

    #[test]
    fn oracle_on_fine_discretization_is_small() {
        let k = kernel_epanechnikov();
        let model = TrueModel::gamma(5.0, 1.0).unwrap();
        let n = 10_000;
        let atoms: Vec<f64> = (0..n).map(|i| model.quantile((i as f64 + 0.5) / n as f64)).collect();
        let d = DiscreteDist::new(atoms, vec![1.0 / n as f64; n]).unwrap();
        let window = IseWindow { a: 0.0, b: model.quantile(0.999), points: 4097 };
        let grid = BandwidthGrid { lo: 0.02, hi: 2.0, points: 12 }.values();
        let (h, profile) = oracle_profile(&d, &model, &k, window, &grid).unwrap();
        // independent coarse scan
        let coarse_min = grid
            .iter()
            .map(|&h| {
                let est = KdeEstimate::new(d.clone(), k, h).unwrap();
                let f = |t: f64| (kde_eval(&est, t) - model.pdf(t)).powi(2);
                let pts = 40_000;
                let step = window.b / pts as f64;
                let v: f64 = (0..pts).map(|i| f((i as f64 + 0.5) * step)).sum::<f64>() * step;
                (v, h)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
            .1;
        assert_eq!(h, coarse_min);
        assert!(h < 0.3, "h={h} profile={profile:?}");
    }
}
