//! Seeded generators for multiplicatively censored samples and for
//! length-biased, right-censored prevalent-cohort samples.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp};

use crate::dist::{GammaSpec, TrueModel};
use crate::error::{invalid, Error, Result};

/// Observed pair of uncensored draws and multiplicatively censored draws.
#[derive(Clone, Debug, PartialEq)]
pub struct MCSample {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl MCSample {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.is_empty() && y.is_empty() {
            return Err(invalid("sample must contain at least one observation"));
        }
        if !x.iter().chain(&y).all(|v| v.is_finite() && *v > 0.0) {
            return Err(invalid("observations must be finite and positive"));
        }
        Ok(Self { x, y })
    }

    /// Uncensored draws.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Censored draws.
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn m(&self) -> usize {
        self.x.len()
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.x.len() + self.y.len()
    }

    /// Fraction of uncensored observations, `m / k`.
    pub fn phat(&self) -> f64 {
        self.m() as f64 / self.k() as f64
    }

    /// Writes `value,censored` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["value", "censored"])?;
        for v in &self.x {
            w.write_record([fmt_f64(*v), "0".to_string()])?;
        }
        for v in &self.y {
            w.write_record([fmt_f64(*v), "1".to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `value,censored` rows; lines starting with `#` are skipped.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(invalid(format!("expected 2 columns, found {}", rec.len())));
            }
            let v = parse_f64(&rec[0])?;
            match &rec[1] {
                "0" => x.push(v),
                "1" => y.push(v),
                other => return Err(invalid(format!("censored flag must be 0 or 1, got {other:?}"))),
            }
        }
        Self::new(x, y)
    }
}

/// Shortest round-trip text, in exponent form for very small or large values.
pub(crate) fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| invalid(format!("not a number: {s:?}")))
}

/// Draws `m` uncensored values from `model` and `n` products `z * u` with
/// `z ~ model` and `u ~ Uniform(0, 1)`.
pub fn gen_mc(model: &TrueModel, m: usize, n: usize, seed: u64) -> Result<MCSample> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    gen_mc_with(model, m, n, &mut rng)
}

/// As [`gen_mc`], drawing from a caller-owned generator.
pub fn gen_mc_with<R: Rng + ?Sized>(model: &TrueModel, m: usize, n: usize, rng: &mut R) -> Result<MCSample> {
    if m + n == 0 {
        return Err(invalid("m + n must be at least 1"));
    }
    let x: Vec<f64> = (0..m).map(|_| model.sample(rng)).collect();
    let y: Vec<f64> = (0..n)
        .map(|_| {
            let z = model.sample(rng);
            // open interval keeps every censored value strictly positive
            let u: f64 = loop {
                let u: f64 = rng.random();
                if u > 0.0 {
                    break u;
                }
            };
            z * u
        })
        .collect();
    MCSample::new(x, y)
}

/// Distribution of the residual censoring time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CensorDist {
    /// Degenerate at `+inf`: no censoring.
    Never,
    Exponential { mean: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl CensorDist {
    pub fn cdf(&self, d: f64) -> f64 {
        match *self {
            CensorDist::Never => 0.0,
            CensorDist::Exponential { mean } => {
                if d <= 0.0 {
                    0.0
                } else {
                    1.0 - (-d / mean).exp()
                }
            }
            CensorDist::Uniform { lo, hi } => ((d - lo) / (hi - lo)).clamp(0.0, 1.0),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            CensorDist::Never => Ok(()),
            CensorDist::Exponential { mean } if mean > 0.0 && mean.is_finite() => Ok(()),
            CensorDist::Uniform { lo, hi } if lo >= 0.0 && hi > lo && hi.is_finite() => Ok(()),
            other => Err(invalid(format!("invalid censoring distribution {other:?}"))),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            CensorDist::Never => f64::INFINITY,
            CensorDist::Exponential { mean } => Exp::new(1.0 / mean).expect("validated").sample(rng),
            CensorDist::Uniform { lo, hi } => rng.random_range(lo..hi),
        }
    }
}

/// Parses `never`, `exp:MEAN` or `unif:LO:HI`.
impl std::str::FromStr for CensorDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let c = match parts.as_slice() {
            ["never"] => CensorDist::Never,
            ["exp", mean] => CensorDist::Exponential { mean: parse_f64(mean)? },
            ["unif", lo, hi] => CensorDist::Uniform {
                lo: parse_f64(lo)?,
                hi: parse_f64(hi)?,
            },
            _ => return Err(invalid(format!("censoring must be never, exp:MEAN or unif:LO:HI, got {s:?}"))),
        };
        c.validate()?;
        Ok(c)
    }
}

/// One prevalent-cohort record `(A, min(R, D), Delta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LbRecord {
    pub onset_age: f64,
    pub followup: f64,
    /// `true` when the failure was observed (`R <= D`).
    pub delta: bool,
}

impl LbRecord {
    /// Observed endpoint `A + min(R, D)`.
    pub fn total(&self) -> f64 {
        self.onset_age + self.followup
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LbSample {
    records: Vec<LbRecord>,
}

impl LbSample {
    pub fn new(records: Vec<LbRecord>) -> Result<Self> {
        if records
            .iter()
            .any(|r| !(r.onset_age >= 0.0 && r.followup >= 0.0 && r.total().is_finite()))
        {
            return Err(invalid("onset ages and follow-up times must be finite and nonnegative"));
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[LbRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn uncensored_count(&self) -> usize {
        self.records.iter().filter(|r| r.delta).count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["onset_age", "followup", "delta"])?;
        for r in &self.records {
            w.write_record([
                fmt_f64(r.onset_age),
                fmt_f64(r.followup),
                if r.delta { "1" } else { "0" }.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut records = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(invalid(format!("expected 3 columns, found {}", rec.len())));
            }
            let delta = match &rec[2] {
                "1" => true,
                "0" => false,
                other => return Err(invalid(format!("delta must be 0 or 1, got {other:?}"))),
            };
            records.push(LbRecord {
                onset_age: parse_f64(&rec[0])?,
                followup: parse_f64(&rec[1])?,
                delta,
            });
        }
        Self::new(records)
    }
}

/// Upper bound on draws made by [`gen_lb`] before giving up.
pub const MAX_LB_DRAWS: u64 = 10_000_000;

/// Draws a total lifetime from the length-biased version of `fu_model`.
fn length_biased_draw<R: Rng + ?Sized>(fu_model: &TrueModel, rng: &mut R) -> f64 {
    match *fu_model {
        // t f_U(t) / mu_U for Gamma(a, b) is Gamma(a + 1, b)
        TrueModel::Gamma(s) => TrueModel::Gamma(GammaSpec {
            shape: s.shape + 1.0,
            scale: s.scale,
        })
        .sample(rng),
        TrueModel::PointMass(c) => c,
    }
}

/// Generates prevalent-cohort records until exactly `target_m` uncensored and
/// `target_n` censored records have been kept.
///
/// Each candidate draws a total lifetime `T` from the length-biased law, an
/// onset age `A ~ Uniform(0, T)`, residual `R = T - A` and an independent
/// residual censoring time `D`.
pub fn gen_lb(
    fu_model: &TrueModel,
    censor: CensorDist,
    target_m: usize,
    target_n: usize,
    seed: u64,
) -> Result<LbSample> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    gen_lb_with(fu_model, censor, target_m, target_n, &mut rng)
}

pub fn gen_lb_with<R: Rng + ?Sized>(
    fu_model: &TrueModel,
    censor: CensorDist,
    target_m: usize,
    target_n: usize,
    rng: &mut R,
) -> Result<LbSample> {
    let mu = fu_model.mean();
    if !(mu.is_finite() && mu > 0.0) {
        return Err(invalid(format!("mean of the unbiased law must be finite and positive, got {mu}")));
    }
    censor.validate()?;
    let mut uncensored = Vec::with_capacity(target_m);
    let mut censored = Vec::with_capacity(target_n);
    let mut draws = 0u64;
    while uncensored.len() < target_m || censored.len() < target_n {
        if draws >= MAX_LB_DRAWS {
            return Err(Error::TargetsNotReached {
                draws,
                target_m,
                target_n,
                got_m: uncensored.len(),
                got_n: censored.len(),
            });
        }
        draws += 1;
        let t = length_biased_draw(fu_model, rng);
        let a = t * rng.random::<f64>();
        let r = t - a;
        let d = censor.sample(rng);
        if r <= d {
            if uncensored.len() < target_m {
                uncensored.push(LbRecord {
                    onset_age: a,
                    followup: r,
                    delta: true,
                });
            }
        } else if censored.len() < target_n {
            censored.push(LbRecord {
                onset_age: a,
                followup: d,
                delta: false,
            });
        }
    }
    // records keep generation order within each class
    uncensored.extend(censored);
    LbSample::new(uncensored)
}

/// Uncensored totals become direct draws, censored totals multiplicatively
/// censored draws.
pub fn lb_to_mc(sample: &LbSample) -> Result<MCSample> {
    if sample.is_empty() {
        return Err(invalid("empty length-biased sample"));
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for r in sample.records() {
        if r.delta {
            x.push(r.total());
        } else {
            y.push(r.total());
        }
    }
    MCSample::new(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::simpson;

    #[test]
    fn point_mass_censored_draws_are_scaled_uniforms() {
        let pm = TrueModel::point_mass(2.0).unwrap();
        let s = gen_mc(&pm, 0, 3, 99).unwrap();
        assert_eq!(s.m(), 0);
        assert_eq!(s.n(), 3);
        assert!(s.y().iter().all(|&y| y > 0.0 && y <= 2.0));
        assert_eq!(s, gen_mc(&pm, 0, 3, 99).unwrap());
        assert_ne!(s, gen_mc(&pm, 0, 3, 100).unwrap());
    }

    #[test]
    fn empty_sample_rejected() {
        let pm = TrueModel::point_mass(2.0).unwrap();
        assert!(gen_mc(&pm, 0, 0, 1).is_err());
    }

    fn ks_against(mut values: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        values.sort_by(f64::total_cmp);
        let n = values.len() as f64;
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let f = cdf(v);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    /// F(t) = int_0^t f(u) du with f(u) = int_u^inf z^-1 g(z) dz, by nested quadrature.
    fn censored_cdf_oracle(model: TrueModel, grid: &[f64]) -> Vec<f64> {
        let upper = model.quantile(1.0 - 1e-13);
        let f = |u: f64| simpson(|z| model.pdf(z) / z, u.max(1e-12), upper, 2001);
        grid.iter()
            .map(|&t| if t <= 0.0 { 0.0 } else { simpson(f, 1e-12, t, 401) })
            .collect()
    }

    #[test]
    fn censored_draws_follow_the_transformed_law() {
        let model = TrueModel::gamma(5.0, 1.0).unwrap();
        let grid: Vec<f64> = (0..=300).map(|i| i as f64 * 0.05).collect();
        let table = censored_cdf_oracle(model, &grid);
        let interp = |t: f64| {
            let pos = (t / 0.05).min(299.999);
            let i = pos.floor() as usize;
            let w = pos - i as f64;
            table[i] * (1.0 - w) + table[i + 1] * w
        };
        let s = gen_mc(&model, 0, 10_000, 5).unwrap();
        let d = ks_against(s.y().to_vec(), interp);
        // 1% critical value 1.63/sqrt(n)
        assert!(d < 1.63 / 100.0, "ks={d}");
        let big = gen_mc(&model, 0, 100_000, 6).unwrap();
        assert!(ks_against(big.y().to_vec(), interp) < 0.02);
    }

    #[test]
    fn point_mass_lifetime_without_censoring() {
        let pm = TrueModel::point_mass(3.0).unwrap();
        let s = gen_lb(&pm, CensorDist::Never, 200, 0, 1).unwrap();
        assert_eq!(s.len(), 200);
        for r in s.records() {
            assert!(r.delta);
            assert!((0.0..=3.0).contains(&r.onset_age));
            assert!((r.total() - 3.0).abs() <= 4.0 * f64::EPSILON * 3.0);
        }
        let mean_a: f64 = s.records().iter().map(|r| r.onset_age).sum::<f64>() / 200.0;
        assert!((mean_a - 1.5).abs() < 0.2);
    }

    #[test]
    fn length_bias_inflates_observed_totals() {
        let fu = TrueModel::gamma(4.0, 1.0).unwrap();
        let censor = CensorDist::Exponential { mean: 5.0 };
        let a = gen_lb(&fu, censor, 50, 50, 17).unwrap();
        assert_eq!(a, gen_lb(&fu, censor, 50, 50, 17).unwrap());
        assert_eq!(a.uncensored_count(), 50);
        assert_eq!(a.len(), 100);
        // Monte Carlo oracle for E[A + R | Delta = 1] from 10^5 draws
        let big = gen_lb(&fu, censor, 100_000, 0, 18).unwrap();
        let mc_mean: f64 = big.records().iter().map(LbRecord::total).sum::<f64>() / 1e5;
        assert!(mc_mean > fu.mean() + 0.5, "{mc_mean}");
        let small_mean: f64 = a.records()[..50].iter().map(LbRecord::total).sum::<f64>() / 50.0;
        assert!(small_mean > fu.mean(), "{small_mean}");
    }

    #[test]
    fn uncensored_totals_follow_the_selection_density() {
        // g_*(t) proportional to g(t) int_0^t [1 - F_D(r)] dr / t
        let fu = TrueModel::gamma(4.0, 1.0).unwrap();
        let g = TrueModel::gamma(5.0, 1.0).unwrap();
        let mean_d = 5.0;
        let censor = CensorDist::Exponential { mean: mean_d };
        let dens = |t: f64| if t <= 0.0 { 0.0 } else { g.pdf(t) * mean_d * (1.0 - (-t / mean_d).exp()) / t };
        let upper = 40.0;
        let norm = simpson(dens, 0.0, upper, 40_001);
        let step = 0.01;
        let mut cum = vec![0.0];
        for i in 0..4000 {
            let a = i as f64 * step;
            cum.push(cum[i] + simpson(dens, a, a + step, 5) / norm);
        }
        let cdf = |t: f64| {
            let pos = (t / step).min(3999.999);
            let i = pos.floor() as usize;
            let w = pos - i as f64;
            cum[i] * (1.0 - w) + cum[i + 1] * w
        };
        let s = gen_lb(&fu, censor, 100_000, 0, 23).unwrap();
        let totals: Vec<f64> = s.records().iter().map(LbRecord::total).collect();
        let d = ks_against(totals, cdf);
        assert!(d < 1.63 / (1e5f64).sqrt(), "ks={d}");
    }

    #[test]
    fn lb_to_mc_partitions_by_delta() {
        let recs = vec![
            LbRecord { onset_age: 1.0, followup: 2.0, delta: true },
            LbRecord { onset_age: 0.5, followup: 0.25, delta: false },
            LbRecord { onset_age: 2.0, followup: 1.5, delta: true },
        ];
        let mc = lb_to_mc(&LbSample::new(recs.clone()).unwrap()).unwrap();
        assert_eq!(mc.x(), &[3.0, 3.5]);
        assert_eq!(mc.y(), &[0.75]);
        assert!((mc.phat() - 2.0 / 3.0).abs() < 1e-15);
        let all: Vec<LbRecord> = recs.into_iter().filter(|r| r.delta).collect();
        assert_eq!(lb_to_mc(&LbSample::new(all).unwrap()).unwrap().n(), 0);
    }

    #[test]
    fn csv_round_trips() {
        let model = TrueModel::gamma(3.0, 1.0).unwrap();
        let s = gen_mc(&model, 5, 4, 3).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(MCSample::read_csv(buf.as_slice()).unwrap(), s);
        let lb = gen_lb(&model, CensorDist::Uniform { lo: 0.0, hi: 4.0 }, 3, 3, 4).unwrap();
        let mut buf = Vec::new();
        lb.write_csv(&mut buf).unwrap();
        assert_eq!(LbSample::read_csv(buf.as_slice()).unwrap(), lb);
    }
}
