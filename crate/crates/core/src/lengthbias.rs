//! Length-biased sampling: the unbiased lifetime law, its density, and
//! covariance-function estimators for the fitted processes.
//!
//! Under stationary incidence the total lifetime of a prevalent case follows
//! the length-biased law `G`, and the law of interest is
//!
//! ```text
//! F_U(t) = int_0^t s^-1 dG(s) / int_0^inf s^-1 dG(s).
//! ```

use rayon::prelude::*;

use crate::dist::{DiscreteDist, Kernel};
use crate::error::{invalid, Error, Result};
use crate::kde::{reference_from_uncensored, KdeEstimate};
use crate::npmle::{solve_score, SolverConfig};
use crate::quad::{linspace, simpson};
use crate::rng::substream;
use crate::simulate::{lb_to_mc, LbSample, MCSample};

/// Fitted length-biased law together with the implied unbiased law.
#[derive(Clone, Debug)]
pub struct UnbiasedEstimate {
    dist: DiscreteDist,
    mu_u_hat: f64,
    fu: DiscreteDist,
}

impl UnbiasedEstimate {
    /// The fitted length-biased distribution `G_hat`.
    pub fn dist(&self) -> &DiscreteDist {
        &self.dist
    }

    /// `int z^-1 dG_hat(z)`.
    pub fn mu_u_hat(&self) -> f64 {
        self.mu_u_hat
    }

    /// `F_U_hat`, on the atoms of `G_hat`.
    pub fn fu(&self) -> &DiscreteDist {
        &self.fu
    }
}

/// Reweights `G_hat` by `1/t` to obtain `F_U_hat`.
pub fn unbiased_cdf(dist: &DiscreteDist) -> Result<UnbiasedEstimate> {
    let mu = dist.mean_inverse();
    let raw: Vec<f64> = dist
        .atoms()
        .iter()
        .zip(dist.masses())
        .map(|(t, w)| w / t)
        .collect();
    let fu = DiscreteDist::new(dist.atoms().to_vec(), normalize(raw))?;
    Ok(UnbiasedEstimate {
        dist: dist.clone(),
        mu_u_hat: mu,
        fu,
    })
}

/// Length-biased version of `fu`: masses proportional to `t w`.
pub fn length_biased(fu: &DiscreteDist) -> Result<DiscreteDist> {
    let raw: Vec<f64> = fu.atoms().iter().zip(fu.masses()).map(|(t, w)| t * w).collect();
    DiscreteDist::new(fu.atoms().to_vec(), normalize(raw))
}

fn normalize(mut raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    for v in raw.iter_mut() {
        *v /= total;
    }
    raw
}

/// Kernel estimate of the unbiased density `f_U`.
pub fn kde_unbiased(ue: &UnbiasedEstimate, kernel: &Kernel, h: f64) -> Result<KdeEstimate> {
    KdeEstimate::new(ue.fu.clone(), *kernel, h)
}

/// A covariance function tabulated on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CovGrid {
    grid: Vec<f64>,
    // row-major, grid.len() x grid.len()
    values: Vec<f64>,
}

impl CovGrid {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_grid(&grid)?;
        if values.len() != grid.len() * grid.len() {
            return Err(invalid("covariance values do not match the grid size"));
        }
        Ok(Self { grid, values })
    }

    /// Tabulates `f` on `grid x grid`.
    pub fn from_fn(grid: Vec<f64>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        check_grid(&grid)?;
        let values = grid
            .iter()
            .flat_map(|&s| grid.iter().map(move |&t| (s, t)))
            .map(|(s, t)| f(s, t))
            .collect();
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.len() + j]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.get(i, i)).collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    fn range(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }

    fn require_inside(&self, x: f64) -> Result<()> {
        let (lo, hi) = self.range();
        if x < lo || x > hi || !x.is_finite() {
            return Err(Error::GridMismatch { point: x, lo, hi });
        }
        Ok(())
    }

    /// Bilinear interpolation; callers guarantee `(x, y)` lies on the grid range.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        let (i, wx) = self.locate(x);
        let (j, wy) = self.locate(y);
        let n = self.len();
        if n == 1 {
            return self.values[0];
        }
        let v00 = self.get(i, j);
        let v01 = self.get(i, j + 1);
        let v10 = self.get(i + 1, j);
        let v11 = self.get(i + 1, j + 1);
        (1.0 - wx) * ((1.0 - wy) * v00 + wy * v01) + wx * ((1.0 - wy) * v10 + wy * v11)
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let g = &self.grid;
        if g.len() == 1 {
            return (0, 0.0);
        }
        let i = g.partition_point(|&v| v <= x).clamp(1, g.len() - 1) - 1;
        let w = ((x - g[i]) / (g[i + 1] - g[i])).clamp(0.0, 1.0);
        (i, w)
    }

    /// Long-format `s,t,value` rows.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s", "t", "value"])?;
        for (i, &s) in self.grid.iter().enumerate() {
            for (j, &t) in self.grid.iter().enumerate() {
                w.write_record([
                    crate::simulate::fmt_f64(s),
                    crate::simulate::fmt_f64(t),
                    crate::simulate::fmt_f64(self.get(i, j)),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("empty evaluation grid"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) || grid.iter().any(|v| !v.is_finite()) {
        return Err(invalid("evaluation grid must be finite and strictly increasing"));
    }
    Ok(())
}

/// Fills the upper triangle with `f(i, j)` (`i <= j`) and mirrors it.
fn symmetric_from(grid: &[f64], f: impl Fn(usize, usize) -> f64) -> Result<CovGrid> {
    let n = grid.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = f(i, j);
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    CovGrid::new(grid.to_vec(), values)
}

/// Uncensored fraction at or below which the limiting operator need not be
/// invertible.
pub const INVERTIBILITY_THRESHOLD: f64 = 0.59;

/// Lattice size used for the double Stieltjes integral against `d zeta`.
pub const ZETA_LATTICE_POINTS: usize = 512;

/// Side information from [`psi_u_explicit`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitReport {
    pub p_hat: f64,
    /// Bandwidth of the plug-in density estimates of `g` and `g_*`.
    pub bandwidth: f64,
    /// `p_hat <= 0.59`: the formula is evaluable but not known to be consistent.
    pub low_uncensored_fraction: bool,
}

/// Plug-in evaluation of the closed-form covariance of `sqrt(k) (G_hat - G)`
/// under length-biased right-censored sampling.
///
/// For `s <= t` the covariance is
///
/// ```text
/// p { int_0^s b^2 dG_* - int_0^s b dG_* int_0^t b dG_* }
///   + (1 - p) int_0^t int_0^s f(x) f(y) { e(x^y) + h(x^y) [1/f(x v y) - 1/f(x^y)] - h(x) h(y) } dz(x) dz(y)
/// ```
///
/// with `z = b = g / (p g_*)`, `h(x) = int_0^x F_*(y) d[1/f(y)]` and
/// `e(x) = 2 int_0^x h(y) d[1/f(y)]`. Plug-ins: `p_hat = m/k`; `G_*`, `F_*`
/// the empirical laws of uncensored and censored totals; `f` the step density
/// of `G_hat`; `g` and `g_*` reference-rule kernel estimates of `G_hat` and of
/// the uncensored totals. Integrals against `d[1/f]` are exact sums over the
/// jumps of `1/f`; `d zeta` is discretised on a uniform lattice of
/// [`ZETA_LATTICE_POINTS`] points from the first mass point of `G_hat` to the
/// largest grid point.
pub fn psi_u_explicit(
    lb: &LbSample,
    dist: &DiscreteDist,
    grid: &[f64],
    kernel: &Kernel,
) -> Result<(CovGrid, ExplicitReport)> {
    check_grid(grid)?;
    let mc = lb_to_mc(lb)?;
    let (m, n) = (mc.m(), mc.n());
    if m == 0 {
        return Err(invalid("the explicit covariance needs uncensored records"));
    }
    let p = mc.phat();
    let first_mass = dist
        .atoms()
        .iter()
        .zip(dist.masses())
        .find(|(_, w)| **w > 0.0)
        .map(|(t, _)| *t)
        .expect("distribution carries mass");
    let t_max = grid[grid.len() - 1];
    if grid[0] <= 0.0 {
        return Err(invalid("evaluation grid must be positive"));
    }
    // f_hat vanishes from the last mass point onwards
    let last_mass = dist
        .atoms()
        .iter()
        .zip(dist.masses())
        .rev()
        .find(|(_, w)| **w > 0.0)
        .map(|(t, _)| *t)
        .unwrap();
    if t_max > last_mass {
        return Err(Error::ZeroDensity { at: last_mass });
    }

    let h = reference_from_uncensored(mc.x(), kernel)?;
    let g_hat = KdeEstimate::new(dist.clone(), *kernel, h)?;
    let g_star = KdeEstimate::new(DiscreteDist::empirical(mc.x())?, *kernel, h)?;
    let zeta = |x: f64| -> Result<f64> {
        let gs = g_star.eval(x);
        if gs <= 0.0 {
            return Err(Error::ZeroDensity { at: x });
        }
        Ok(g_hat.eval(x) / (p * gs))
    };

    // first term: sums over the uncensored totals
    let mut xs = mc.x().to_vec();
    xs.sort_by(f64::total_cmp);
    let beta: Vec<f64> = xs.iter().map(|&x| zeta(x)).collect::<Result<_>>()?;
    let mut b1 = Vec::with_capacity(m + 1);
    let mut b2 = Vec::with_capacity(m + 1);
    b1.push(0.0);
    b2.push(0.0);
    for b in &beta {
        b1.push(b1.last().unwrap() + b / m as f64);
        b2.push(b2.last().unwrap() + b * b / m as f64);
    }
    let upto = |s: f64| xs.partition_point(|&x| x <= s);
    let first = |s: f64, t: f64| {
        let (is, it) = (upto(s), upto(t));
        p * (b2[is] - b1[is] * b1[it])
    };

    let second = if n > 0 {
        Some(SecondTerm::build(&mc, dist, first_mass, t_max, &zeta)?)
    } else {
        None
    };

    let cov = symmetric_from(grid, |i, j| {
        let (s, t) = (grid[i], grid[j]);
        let mut v = first(s, t);
        if let Some(sec) = &second {
            v += (1.0 - p) * sec.at(s, t);
        }
        v
    })?;
    Ok((
        cov,
        ExplicitReport {
            p_hat: p,
            bandwidth: h,
            low_uncensored_fraction: p <= INVERTIBILITY_THRESHOLD,
        },
    ))
}

/// The censored-term double integral, tabulated as 2-D prefix sums on the
/// `zeta` lattice.
struct SecondTerm {
    lattice: Vec<f64>,
    // prefix[(l + 1) * (L + 1) + (q + 1)] = sum over lattice cells <= (l, q)
    prefix: Vec<f64>,
}

impl SecondTerm {
    fn build(
        mc: &MCSample,
        dist: &DiscreteDist,
        lo: f64,
        hi: f64,
        zeta: &impl Fn(f64) -> Result<f64>,
    ) -> Result<Self> {
        let f_star = DiscreteDist::empirical(mc.y())?;
        let atoms = dist.atoms();
        // jumps of 1/f_hat, located just after each atom
        let mut jump_at = Vec::new();
        let mut jump = Vec::new();
        for i in 0..atoms.len() - 1 {
            let before = dist.censored_density(atoms[i]);
            let after = dist.censored_density(atoms[i + 1]);
            if after > 0.0 && before > 0.0 && after != before {
                jump_at.push(atoms[i]);
                jump.push(1.0 / after - 1.0 / before);
            }
        }
        // h and e just before each jump, then cumulative
        let mut h_before = Vec::with_capacity(jump.len() + 1);
        let mut e_before = Vec::with_capacity(jump.len() + 1);
        let (mut h_acc, mut e_acc) = (0.0, 0.0);
        for (at, dj) in jump_at.iter().zip(&jump) {
            h_before.push(h_acc);
            e_before.push(e_acc);
            e_acc += 2.0 * h_acc * dj;
            h_acc += f_star.cdf(*at) * dj;
        }
        h_before.push(h_acc);
        e_before.push(e_acc);
        let count_before = |x: f64| jump_at.partition_point(|&a| a < x);

        let lattice = linspace(lo, hi, ZETA_LATTICE_POINTS);
        let len = lattice.len();
        let mut fz = Vec::with_capacity(len);
        let mut hz = Vec::with_capacity(len);
        let mut ez = Vec::with_capacity(len);
        let mut dz = Vec::with_capacity(len);
        let mut prev_zeta = None;
        for &z in &lattice {
            let f = dist.censored_density(z);
            if f <= 0.0 {
                return Err(Error::ZeroDensity { at: z });
            }
            let c = count_before(z);
            fz.push(f);
            hz.push(h_before[c]);
            ez.push(e_before[c]);
            let zv = zeta(z)?;
            dz.push(prev_zeta.map_or(0.0, |p| zv - p));
            prev_zeta = Some(zv);
        }

        let stride = len + 1;
        let mut prefix = vec![0.0; stride * stride];
        for l in 0..len {
            let mut row = 0.0;
            for q in 0..len {
                let (a, b) = if l <= q { (l, q) } else { (q, l) };
                let kernel = ez[a] + hz[a] * (1.0 / fz[b] - 1.0 / fz[a]) - hz[l] * hz[q];
                row += fz[l] * fz[q] * kernel * dz[l] * dz[q];
                prefix[(l + 1) * stride + q + 1] = prefix[l * stride + q + 1] + row;
            }
        }
        Ok(Self { lattice, prefix })
    }

    fn at(&self, s: f64, t: f64) -> f64 {
        let ls = self.lattice.partition_point(|&z| z <= s);
        let lt = self.lattice.partition_point(|&z| z <= t);
        self.prefix[ls * (self.lattice.len() + 1) + lt]
    }
}

/// Outcome counts of a bootstrap run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BootstrapReport {
    pub resamples: usize,
    /// Resamples whose solve failed and were redrawn.
    pub failures: usize,
}

/// Bootstrap covariance of `sqrt(k) G_hat(grid)`.
///
/// Uncensored and censored subsamples are resampled separately with
/// replacement, keeping `m` and `n` fixed. Resample `i` draws from substream
/// `i`; failed solves are replaced by further substreams and the run aborts
/// after `10 b` failures.
pub fn psi_u_bootstrap(
    sample: &MCSample,
    b: usize,
    grid: &[f64],
    seed: u64,
    solver: &SolverConfig,
) -> Result<(CovGrid, BootstrapReport)> {
    check_grid(grid)?;
    if b < 2 {
        return Err(invalid("the bootstrap needs at least two resamples"));
    }
    let sqrt_k = (sample.k() as f64).sqrt();
    let refit = |attempt: usize| -> Result<Option<Vec<f64>>> {
        use rand::Rng;
        let mut rng = substream(seed, attempt as u64);
        let x: Vec<f64> = (0..sample.m())
            .map(|_| sample.x()[rng.random_range(0..sample.m())])
            .collect();
        let y: Vec<f64> = (0..sample.n())
            .map(|_| sample.y()[rng.random_range(0..sample.n())])
            .collect();
        let resample = MCSample::new(x, y)?;
        match solve_score(&resample, solver) {
            Ok((fit, _)) => Ok(Some(grid.iter().map(|&t| sqrt_k * fit.cdf(t)).collect())),
            Err(Error::NonConvergence { .. }) | Err(Error::DegenerateTruncation { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(b);
    let mut failures = 0;
    let mut next = 0;
    while rows.len() < b {
        let want = b - rows.len();
        let batch: Vec<Result<Option<Vec<f64>>>> = (next..next + want).into_par_iter().map(refit).collect();
        next += want;
        for r in batch {
            match r? {
                Some(row) => rows.push(row),
                None => failures += 1,
            }
        }
        if failures > 10 * b {
            return Err(Error::BootstrapFailed { failures });
        }
    }

    let dim = grid.len();
    let mut mean = vec![0.0; dim];
    for row in &rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / b as f64;
        }
    }
    let cov = symmetric_from(grid, |i, j| {
        rows.iter()
            .map(|r| (r[i] - mean[i]) * (r[j] - mean[j]))
            .sum::<f64>()
            / (b - 1) as f64
    })?;
    Ok((cov, BootstrapReport { resamples: b, failures }))
}

/// `L_u(z) = z^-1 [1{z <= u} - F_U(u)]`.
fn l_fn(z: f64, u: f64, fu_at_u: f64) -> f64 {
    (if z <= u { 1.0 } else { 0.0 } - fu_at_u) / z
}

/// `psi_Z(s, t) = mu^-2 int int psi_U(x, y) dL_s(x) dL_t(y)` for `s, t` in `grid`.
///
/// `dL_s` is discretised onto the nodes of `psi_u`: node `j` receives the
/// increment of `L_s` over the cell between the midpoints adjacent to it, so
/// the integral is truncated to the range of the `psi_u` grid.
pub fn psi_z_hat(psi_u: &CovGrid, ue: &UnbiasedEstimate, grid: &[f64]) -> Result<CovGrid> {
    check_grid(grid)?;
    for &s in grid {
        psi_u.require_inside(s)?;
    }
    let nodes = psi_u.grid();
    let nn = nodes.len();
    let mut bounds = Vec::with_capacity(nn + 1);
    bounds.push(nodes[0]);
    for w in nodes.windows(2) {
        bounds.push(0.5 * (w[0] + w[1]));
    }
    bounds.push(nodes[nn - 1]);
    let weights: Vec<Vec<f64>> = grid
        .iter()
        .map(|&s| {
            let fs = ue.fu.cdf(s);
            (0..nn)
                .map(|j| l_fn(bounds[j + 1], s, fs) - l_fn(bounds[j], s, fs))
                .collect()
        })
        .collect();
    let inv_mu2 = ue.mu_u_hat.powi(-2);
    symmetric_from(grid, |a, b| {
        let (wa, wb) = (&weights[a], &weights[b]);
        let mut acc = 0.0;
        for i in 0..nn {
            if wa[i] == 0.0 {
                continue;
            }
            let mut row = 0.0;
            for j in 0..nn {
                row += psi_u.get(i, j) * wb[j];
            }
            acc += wa[i] * row;
        }
        inv_mu2 * acc
    })
}

/// Quadrature nodes per axis in [`sigma_hat`].
pub const SIGMA_QUAD_POINTS: usize = 257;

/// `h^-1 int int psi(s - u h, t - v h) dK(u) dK(v)`, integrating against
/// `K'(u) du` by Simpson quadrature with `psi` bilinearly interpolated.
pub fn sigma_hat(psi: &CovGrid, kernel: &Kernel, h: f64, s: f64, t: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(invalid("bandwidth must be positive"));
    }
    for x in [s - h, s + h, t - h, t + h] {
        psi.require_inside(x)?;
    }
    let inner = |u: f64| {
        let ku = kernel.deriv(u);
        if ku == 0.0 {
            return 0.0;
        }
        ku * simpson(
            |v| psi.interpolate(s - u * h, t - v * h) * kernel.deriv(v),
            -1.0,
            1.0,
            SIGMA_QUAD_POINTS,
        )
    };
    Ok(simpson(inner, -1.0, 1.0, SIGMA_QUAD_POINTS) / h)
}
