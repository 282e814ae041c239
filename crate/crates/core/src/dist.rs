//! Ground-truth families, weighted-atom distributions, smoothing kernels and the
//! censored-sample density transform.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{invalid, Result};
use crate::quad::simpson;

/// Shape/scale parametrisation of the Gamma family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaSpec {
    pub shape: f64,
    pub scale: f64,
}

impl GammaSpec {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(invalid(format!("gamma shape must be positive, got {shape}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid(format!("gamma scale must be positive, got {scale}")));
        }
        Ok(Self { shape, scale })
    }

    /// Unit-scale Gamma, the simulation family `g_alpha`.
    pub fn unit(shape: f64) -> Result<Self> {
        Self::new(shape, 1.0)
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }
}

/// Density `x^(a-1) e^(-x/b) / (Gamma(a) b^a)` for `x >= 0`.
pub fn gamma_pdf(spec: GammaSpec, x: f64) -> f64 {
    let GammaSpec { shape, scale } = spec;
    if x < 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        return match shape.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Equal) => 1.0 / scale,
            Some(std::cmp::Ordering::Greater) => 0.0,
            _ => f64::INFINITY,
        };
    }
    ((shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()).exp()
}

/// Regularized lower incomplete gamma `P(a, x/b)`.
pub fn gamma_cdf(spec: GammaSpec, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    gamma_lr(spec.shape, x / spec.scale)
}

fn gamma_second_deriv(spec: GammaSpec, x: f64) -> f64 {
    let GammaSpec { shape: a, scale: b } = spec;
    if x < 0.0 {
        return 0.0;
    }
    // g'' = C e^{-x/b} [ (a-1)(a-2) x^{a-3} - 2(a-1) x^{a-2}/b + x^{a-1}/b^2 ]
    let log_c = -ln_gamma(a) - a * b.ln();
    let e = (log_c - x / b).exp();
    let term = |coef: f64, pow: f64| {
        if coef == 0.0 {
            0.0
        } else if x == 0.0 {
            if pow > 0.0 {
                0.0
            } else if pow == 0.0 {
                coef
            } else {
                coef.signum() * f64::INFINITY
            }
        } else {
            coef * x.powf(pow)
        }
    };
    e * (term((a - 1.0) * (a - 2.0), a - 3.0)
        + term(-2.0 * (a - 1.0) / b, a - 2.0)
        + term(1.0 / (b * b), a - 1.0))
}

/// A ground-truth lifetime distribution used by the simulators and oracles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TrueModel {
    Gamma(GammaSpec),
    /// Degenerate law at a single positive point.
    PointMass(f64),
}

/// Quantile level standing in for the upper support bound of unbounded families.
pub const EFFECTIVE_TAU_LEVEL: f64 = 0.9999;

impl TrueModel {
    pub fn gamma(shape: f64, scale: f64) -> Result<Self> {
        GammaSpec::new(shape, scale).map(TrueModel::Gamma)
    }

    pub fn point_mass(at: f64) -> Result<Self> {
        if !(at > 0.0 && at.is_finite()) {
            return Err(invalid(format!("point mass location must be positive, got {at}")));
        }
        Ok(TrueModel::PointMass(at))
    }

    /// Density. A point mass has no density and reports zero everywhere.
    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            TrueModel::Gamma(s) => gamma_pdf(s, x),
            TrueModel::PointMass(_) => 0.0,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            TrueModel::Gamma(s) => gamma_cdf(s, x),
            TrueModel::PointMass(c) => {
                if x >= c {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        match *self {
            TrueModel::Gamma(s) => gamma_second_deriv(s, x),
            TrueModel::PointMass(_) => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            TrueModel::Gamma(s) => s.mean(),
            TrueModel::PointMass(c) => c,
        }
    }

    /// Upper limit of the support, `sup{t : G(t) < 1}`.
    pub fn tau(&self) -> f64 {
        match *self {
            TrueModel::Gamma(_) => f64::INFINITY,
            TrueModel::PointMass(c) => c,
        }
    }

    /// Finite stand-in for `tau`: the support bound itself or the 0.9999 quantile.
    pub fn tau_eff(&self) -> f64 {
        let tau = self.tau();
        if tau.is_finite() {
            tau
        } else {
            self.quantile(EFFECTIVE_TAU_LEVEL)
        }
    }

    /// Quantile by bisection on the distribution function.
    pub fn quantile(&self, q: f64) -> f64 {
        match *self {
            TrueModel::PointMass(c) => c,
            TrueModel::Gamma(s) => {
                if q <= 0.0 {
                    return 0.0;
                }
                let mut hi = s.mean().max(s.scale);
                while gamma_cdf(s, hi) < q {
                    hi *= 2.0;
                    if !hi.is_finite() {
                        return f64::INFINITY;
                    }
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if gamma_cdf(s, mid) < q {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            TrueModel::PointMass(c) => c,
            TrueModel::Gamma(s) => Gamma::new(s.shape, s.scale)
                .expect("validated gamma parameters")
                .sample(rng),
        }
    }

    /// `int_a^b [g''(s)]^2 ds` by 20001-point Simpson quadrature.
    pub fn l2_gpp_on(&self, a: f64, b: f64) -> f64 {
        match *self {
            TrueModel::PointMass(_) => f64::INFINITY,
            TrueModel::Gamma(_) => simpson(
                |x| {
                    let v = self.second_deriv(x);
                    v * v
                },
                a,
                b,
                20_001,
            ),
        }
    }

    /// `||g''||_2^2` on `[0, tau_eff]`.
    pub fn l2_gpp(&self) -> f64 {
        self.l2_gpp_on(0.0, self.tau_eff())
    }
}

/// Per-atom observation counts of a fitted distribution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AtomCounts {
    pub uncensored: usize,
    pub censored: usize,
}

/// A discrete distribution on strictly increasing positive atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDist {
    atoms: Vec<f64>,
    masses: Vec<f64>,
    counts: Option<Vec<AtomCounts>>,
    // cumulative[i] = sum_{j <= i} w_j
    cumulative: Vec<f64>,
    // inv_tail[i] = sum_{j >= i} w_j / t_j
    inv_tail: Vec<f64>,
}

/// Tolerance on the total mass of a [`DiscreteDist`].
pub const MASS_TOL: f64 = 1e-12;

impl DiscreteDist {
    pub fn new(atoms: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        Self::build(atoms, masses, None)
    }

    pub fn with_counts(atoms: Vec<f64>, masses: Vec<f64>, counts: Vec<AtomCounts>) -> Result<Self> {
        if counts.len() != atoms.len() {
            return Err(invalid("counts and atoms differ in length"));
        }
        Self::build(atoms, masses, Some(counts))
    }

    fn build(atoms: Vec<f64>, masses: Vec<f64>, counts: Option<Vec<AtomCounts>>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(invalid("a discrete distribution needs at least one atom"));
        }
        if atoms.len() != masses.len() {
            return Err(invalid("atoms and masses differ in length"));
        }
        if !atoms.iter().all(|t| t.is_finite() && *t > 0.0) {
            return Err(invalid("atoms must be finite and positive"));
        }
        if atoms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("atoms must be strictly increasing"));
        }
        if !masses.iter().all(|w| w.is_finite() && *w >= 0.0) {
            return Err(invalid("masses must be finite and nonnegative"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(invalid(format!("masses sum to {total}, not 1")));
        }
        let mut cumulative = Vec::with_capacity(masses.len());
        let mut acc = 0.0;
        for w in &masses {
            acc += w;
            cumulative.push(acc);
        }
        let mut inv_tail = vec![0.0; masses.len()];
        let mut acc = 0.0;
        for i in (0..masses.len()).rev() {
            acc += masses[i] / atoms[i];
            inv_tail[i] = acc;
        }
        Ok(Self {
            atoms,
            masses,
            counts,
            cumulative,
            inv_tail,
        })
    }

    pub fn point_mass(at: f64) -> Result<Self> {
        Self::new(vec![at], vec![1.0])
    }

    /// Empirical distribution of `values`; ties are merged into one atom.
    pub fn empirical(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("empirical distribution of an empty sample"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut atoms = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for v in sorted {
            if atoms.last() == Some(&v) {
                *counts.last_mut().unwrap() += 1;
            } else {
                atoms.push(v);
                counts.push(1);
            }
        }
        let masses = counts.iter().map(|&c| c as f64 / n).collect();
        let counts = counts
            .into_iter()
            .map(|c| AtomCounts {
                uncensored: c,
                censored: 0,
            })
            .collect();
        Self::with_counts(atoms, masses, counts)
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn counts(&self) -> Option<&[AtomCounts]> {
        self.counts.as_deref()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Right-continuous distribution function.
    pub fn cdf(&self, t: f64) -> f64 {
        let idx = self.atoms.partition_point(|&a| a <= t);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    /// Left limit `G(t-)`.
    pub fn cdf_left(&self, t: f64) -> f64 {
        let idx = self.atoms.partition_point(|&a| a < t);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    /// `sum_{t_i >= y} w_i / t_i`.
    pub fn censored_density(&self, y: f64) -> f64 {
        let idx = self.atoms.partition_point(|&a| a < y);
        self.inv_tail.get(idx).copied().unwrap_or(0.0)
    }

    /// `int z^{-1} dG(z)`.
    pub fn mean_inverse(&self) -> f64 {
        self.inv_tail[0]
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().zip(&self.masses).map(|(t, w)| t * w).sum()
    }

    /// Writes `atom,mass,uncensored_count,censored_count` rows; counts are 0
    /// when the distribution carries none.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        use crate::simulate::fmt_f64;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["atom", "mass", "uncensored_count", "censored_count"])?;
        for i in 0..self.len() {
            let c = self.counts.as_ref().map(|c| c[i]).unwrap_or_default();
            w.write_record([
                fmt_f64(self.atoms[i]),
                fmt_f64(self.masses[i]),
                c.uncensored.to_string(),
                c.censored.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Shift every atom by `c`. Fails if an atom would become nonpositive.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        let atoms = self.atoms.iter().map(|t| t + c).collect();
        Self::build(atoms, self.masses.clone(), self.counts.clone())
    }
}

/// The density `f(y) = int_{y <= z} z^{-1} dG(z)` of a multiplicatively censored draw.
pub fn censored_density(dist: &DiscreteDist, y: f64) -> f64 {
    dist.censored_density(y)
}

/// A smoothing kernel supported on `(-1, 1)` with cached moments.
#[derive(Clone, Copy, Debug)]
pub struct Kernel {
    name: &'static str,
    profile: fn(f64) -> f64,
    profile_deriv: fn(f64) -> f64,
    nu2: f64,
    sigma2: f64,
    total_variation: f64,
    mass: f64,
    first_moment: f64,
}

/// Node count for the cached kernel moments.
pub const KERNEL_QUAD_POINTS: usize = 2049;

impl Kernel {
    /// Builds a kernel from its profile on `(-1, 1)` and the profile's derivative.
    ///
    /// Moments are computed once here by composite Simpson quadrature on 2048
    /// intervals. The profile must integrate to one and have zero mean.
    pub fn new(name: &'static str, profile: fn(f64) -> f64, profile_deriv: fn(f64) -> f64) -> Result<Self> {
        let eval = |u: f64| if u.abs() < 1.0 { profile(u) } else { 0.0 };
        let n = KERNEL_QUAD_POINTS;
        let mass = simpson(eval, -1.0, 1.0, n);
        let first_moment = simpson(|u| u * eval(u), -1.0, 1.0, n);
        let nu2 = simpson(|u| eval(u).powi(2), -1.0, 1.0, n);
        let sigma2 = simpson(|u| u * u * eval(u), -1.0, 1.0, n);
        let h = 2.0 / (n - 1) as f64;
        let mut total_variation = 0.0;
        let mut prev = 0.0;
        for i in 1..n - 1 {
            let v = eval(-1.0 + h * i as f64);
            total_variation += (v - prev).abs();
            prev = v;
        }
        total_variation += prev.abs();
        if (mass - 1.0).abs() > 1e-10 {
            return Err(invalid(format!("kernel {name} integrates to {mass}")));
        }
        if first_moment.abs() > 1e-10 {
            return Err(invalid(format!("kernel {name} has first moment {first_moment}")));
        }
        Ok(Self {
            name,
            profile,
            profile_deriv,
            nu2,
            sigma2,
            total_variation,
            mass,
            first_moment,
        })
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn eval(&self, u: f64) -> f64 {
        if u.abs() < 1.0 {
            (self.profile)(u)
        } else {
            0.0
        }
    }

    /// Derivative `K'(u)` on the closed interval `[-1, 1]` (one-sided at the
    /// endpoints), zero outside it.
    pub fn deriv(&self, u: f64) -> f64 {
        if u.abs() <= 1.0 {
            (self.profile_deriv)(u)
        } else {
            0.0
        }
    }

    /// `int K^2`.
    pub fn nu2(&self) -> f64 {
        self.nu2
    }

    /// `int u^2 K(u) du`.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn total_variation(&self) -> f64 {
        self.total_variation
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn first_moment(&self) -> f64 {
        self.first_moment
    }
}

fn epanechnikov_profile(u: f64) -> f64 {
    0.75 * (1.0 - u * u)
}

fn epanechnikov_deriv(u: f64) -> f64 {
    -1.5 * u
}

/// `K(u) = 3/4 (1 - u^2)` on `(-1, 1)`.
pub fn kernel_epanechnikov() -> Kernel {
    Kernel::new("epanechnikov", epanechnikov_profile, epanechnikov_deriv)
        .expect("epanechnikov kernel satisfies the moment conditions")
}
