//! Command-line front end.
//!
//! Settings come from three layers, later ones winning: built-in defaults, an
//! optional `--config` file of `key = value` lines, and command-line flags.
//! Config keys are the long flag names. Every output starts with `#` lines
//! echoing the effective settings; thread count and output paths are left out
//! so that the bytes do not depend on them.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{value_parser, Arg, ArgMatches, Command};
use rayon::prelude::*;

use crate::dist::{kernel_epanechnikov, DiscreteDist, Kernel, TrueModel};
use crate::error::{Error, Result};
use crate::ise::{are_demo, replication_stream, run_relative_ise, ExperimentConfig};
use crate::kde::{
    bandwidth_oracle, bandwidth_theoretical, reference_from_uncensored, BandwidthGrid, BandwidthRule, IseWindow,
    KdeEstimate,
};
use crate::lengthbias::{psi_u_bootstrap, psi_u_explicit, psi_z_hat, unbiased_cdf, CovGrid};
use crate::npmle::{solve_score, SolverConfig};
use crate::quad::linspace;
use crate::rng::substream;
use crate::simulate::{fmt_f64, gen_lb, gen_mc, gen_mc_with, lb_to_mc, CensorDist, LbSample, MCSample};

struct Key {
    name: &'static str,
    default: &'static str,
    help: &'static str,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default, help }
}

const SEED: Key = key("seed", "20120501", "master seed");
const INPUT: Key = key("input", "", "sample CSV to read");
const FORMAT: Key = key("format", "mc", "input layout: mc (value,censored) or lb (onset_age,followup,delta)");
const ALPHA: Key = key("alpha", "5", "shape of the unit-scale Gamma truth");
const RULE: Key = key("rule", "reference", "bandwidth rule: reference, theoretical or oracle");

const SOLVER: [Key; 5] = [
    key("alpha-trunc", "2", "truncation exponent: gamma = k^(-1/(2 alpha-trunc))"),
    key("gamma-override", "", "fixed truncation point, replacing the default sequence"),
    key("tol", "1e-10", "sup-norm convergence tolerance of the solver"),
    key("max-iter", "100000", "solver iteration cap"),
    key("damping", "1", "initial damping factor in (0, 1]"),
];

struct Sub {
    name: &'static str,
    about: &'static str,
    keys: Vec<&'static Key>,
}

fn with_solver(mut keys: Vec<&'static Key>) -> Vec<&'static Key> {
    keys.extend(SOLVER.iter());
    keys
}

fn subcommands() -> Vec<Sub> {
    static SIM_MODEL: Key = key("model", "mc", "mc (multiplicative censoring) or lb (length-biased cohort)");
    static SCALE: Key = key("scale", "1", "Gamma scale");
    static M: Key = key("m", "50", "uncensored sample size");
    static N: Key = key("n", "50", "censored sample size");
    static CENSOR: Key = key("censor", "exp:6", "lb residual censoring: never, exp:MEAN or unif:LO:HI");
    static TARGET_KDE: Key = key("target", "g", "g (the fitted law) or fu (the unbiased law)");
    static BANDWIDTH: Key = key("bandwidth", "", "fixed bandwidth, replacing the rule");
    static TRUTH_ALPHA: Key = key("truth-alpha", "5", "Gamma shape of the truth used by the theoretical and oracle rules");
    static POINTS: Key = key("points", "201", "evaluation grid size");
    static T_MAX: Key = key("t-max", "", "right end of the evaluation grid (default: last atom + bandwidth)");
    static SIZES: Key = key("sizes", "50+50", "comma-separated m+n sizes");
    static REPS: Key = key("reps", "500", "replications per size");
    static ISE_Q: Key = key("ise-quantile", "0.999", "ISE upper limit as a quantile of the truth");
    static GRID_N: Key = key("grid-n", "2049", "ISE quadrature points");
    static METHOD: Key = key("method", "bootstrap", "bootstrap or explicit (lb input only)");
    static TARGET_COV: Key = key("target", "u", "u (covariance of G) or z (covariance of F_U)");
    static GRID: Key = key("grid", "", "comma-separated evaluation points (default: 9 deciles of the uncensored values)");
    static RESAMPLES: Key = key("resamples", "400", "bootstrap resamples");
    static INNER: Key = key("inner-points", "101", "grid size of the intermediate covariance of G for target z");
    static THETA: Key = key("theta", "1", "exponential mean of the truth");
    static ARE_M: Key = key("m", "500", "uncensored sample size");
    static ARE_N: Key = key("n", "500", "censored sample size");
    static ARE_REPS: Key = key("reps", "2000", "replications");
    static FIG_SIZES: Key = key("sizes", "50+50,100+100,200+200", "comma-separated m+n sizes");
    static PATHS: Key = key("paths", "100", "sample paths per panel");
    vec![
        Sub {
            name: "simulate",
            about: "Draw a multiplicatively censored or length-biased sample",
            keys: vec![&SIM_MODEL, &ALPHA, &SCALE, &M, &N, &CENSOR, &SEED],
        },
        Sub {
            name: "fit",
            about: "Solve the score equation and print the fitted atoms",
            keys: with_solver(vec![&INPUT, &FORMAT]),
        },
        Sub {
            name: "kde",
            about: "Kernel density estimate of the fitted law",
            keys: with_solver(vec![&INPUT, &FORMAT, &TARGET_KDE, &RULE, &BANDWIDTH, &TRUTH_ALPHA, &POINTS, &T_MAX]),
        },
        Sub {
            name: "experiment",
            about: "Relative ISE increase from discarding the censored data",
            keys: with_solver(vec![&ALPHA, &SIZES, &REPS, &RULE, &SEED, &ISE_Q, &GRID_N]),
        },
        Sub {
            name: "covariance",
            about: "Covariance function of the fitted distribution",
            keys: with_solver(vec![&INPUT, &FORMAT, &METHOD, &TARGET_COV, &GRID, &RESAMPLES, &INNER, &SEED]),
        },
        Sub {
            name: "are-demo",
            about: "Variance ratio of the exponential-mean MLE without and with censored data",
            keys: vec![&THETA, &ARE_M, &ARE_N, &ARE_REPS, &SEED],
        },
        Sub {
            name: "figure-paths",
            about: "Overlaid density sample paths, uncensored-only against full sample",
            keys: with_solver(vec![&ALPHA, &FIG_SIZES, &PATHS, &POINTS, &SEED]),
        },
    ]
}

/// The clap command tree.
pub fn command() -> Command {
    let mut cmd = Command::new("multicens")
        .about("Estimation under multiplicative censoring and length-biased sampling")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_parser(value_parser!(PathBuf))
                .help("file of key = value settings; flags take precedence"),
        )
        .arg(
            Arg::new("threads")
                .long("threads")
                .global(true)
                .value_parser(value_parser!(usize))
                .help("worker threads (0: one per core)"),
        )
        .arg(
            Arg::new("output")
                .long("output")
                .short('o')
                .global(true)
                .value_parser(value_parser!(PathBuf))
                .help("output file (default: stdout)"),
        );
    for sub in subcommands() {
        let mut sc = Command::new(sub.name).about(sub.about);
        for k in &sub.keys {
            let help = if k.default.is_empty() {
                k.help.to_string()
            } else {
                format!("{} [default: {}]", k.help, k.default)
            };
            sc = sc.arg(Arg::new(k.name).long(k.name).value_name("VALUE").help(help));
        }
        if sub.name == "figure-paths" {
            sc = sc.arg(
                Arg::new("mean-output")
                    .long("mean-output")
                    .value_parser(value_parser!(PathBuf))
                    .help("pointwise-mean CSV (default: the output path with extension mean.csv)"),
            );
        }
        cmd = cmd.subcommand(sc);
    }
    cmd
}

/// Effective settings of one invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub subcommand: String,
    /// `(key, value)` in declaration order; an empty value means unset.
    pub settings: Vec<(String, String)>,
    /// 0 lets rayon choose.
    pub threads: usize,
    pub output: Option<PathBuf>,
    pub mean_output: Option<PathBuf>,
}

impl RunConfig {
    fn raw(&self, name: &str) -> &str {
        self.settings
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
            .unwrap_or_else(|| panic!("no setting {name} for {}", self.subcommand))
    }

    fn get<T: FromStr>(&self, name: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(name);
        raw.parse()
            .map_err(|e| Error::Usage(format!("invalid value {raw:?} for --{name}: {e}")))
    }

    fn opt<T: FromStr>(&self, name: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if self.raw(name).is_empty() {
            Ok(None)
        } else {
            self.get(name).map(Some)
        }
    }

    /// The `#` header echoing the effective settings.
    pub fn header(&self) -> String {
        let mut h = format!("# multicens {}\n", self.subcommand);
        for (k, v) in &self.settings {
            let _ = writeln!(h, "# {k} = {v}");
        }
        h
    }
}

/// Parses `argv` (including the program name) and merges the config file.
pub fn parse_config<I, T>(argv: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = command()
        .try_get_matches_from(argv)
        .map_err(|e| Error::Usage(e.render().to_string()))?;
    from_matches(&matches)
}

fn from_matches(matches: &ArgMatches) -> Result<RunConfig> {
    let (name, sub_m) = matches
        .subcommand()
        .ok_or_else(|| Error::Usage("a subcommand is required".into()))?;
    let sub = subcommands()
        .into_iter()
        .find(|s| s.name == name)
        .expect("clap only accepts declared subcommands");
    let file = match sub_m.get_one::<PathBuf>("config") {
        Some(path) => {
            let entries = read_config_file(path)?;
            if let Some(bad) = entries.keys().find(|k| !sub.keys.iter().any(|key| key.name == k.as_str())) {
                return Err(Error::Usage(format!(
                    "unknown key {bad:?} in {} for subcommand {name}",
                    path.display()
                )));
            }
            entries
        }
        None => BTreeMap::new(),
    };
    let settings = sub
        .keys
        .iter()
        .map(|k| {
            let v = sub_m
                .get_one::<String>(k.name)
                .or_else(|| file.get(k.name))
                .map(String::as_str)
                .unwrap_or(k.default);
            (k.name.to_string(), v.trim().to_string())
        })
        .collect();
    let mean_output = if name == "figure-paths" {
        sub_m.get_one::<PathBuf>("mean-output").cloned()
    } else {
        None
    };
    Ok(RunConfig {
        subcommand: name.to_string(),
        settings,
        threads: sub_m.get_one::<usize>("threads").copied().unwrap_or(0),
        output: sub_m.get_one::<PathBuf>("output").cloned(),
        mean_output,
    })
}

/// Reads `key = value` lines; blank lines and `#` comments are skipped.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    parse_config_text(&text).map_err(|e| match e {
        Error::Usage(msg) => Error::Usage(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("line {}: expected key = value", no + 1)))?;
        let k = k.trim().to_string();
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Usage(format!("line {}: duplicate key {k:?}", no + 1)));
        }
    }
    Ok(out)
}

/// 0 success, 1 usage, 2 numerical failure, 3 I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) | Error::InvalidInput(_) => 1,
        Error::Io(_) | Error::Csv(_) => 3,
        Error::NonConvergence { .. }
        | Error::DegenerateTruncation { .. }
        | Error::TargetsNotReached { .. }
        | Error::ZeroDensity { .. }
        | Error::GridMismatch { .. }
        | Error::BootstrapFailed { .. } => 2,
    }
}

/// Runs the CLI and returns the process exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    if argv.len() <= 1 {
        eprintln!("{}", command().render_help());
        return 1;
    }
    let matches = match command().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match from_matches(&matches).and_then(|cfg| execute(&cfg)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs one configured subcommand on a pool of `cfg.threads` workers.
pub fn execute(cfg: &RunConfig) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {} worker threads: {e}", cfg.threads)))?;
    let outputs = pool.install(|| render(cfg))?;
    let mut outputs = outputs.into_iter();
    let main = outputs.next().expect("every subcommand renders a main output");
    match &cfg.output {
        Some(path) => std::fs::write(path, main)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(main.as_bytes())?;
        }
    }
    if let Some(mean) = outputs.next() {
        let path = match (&cfg.mean_output, &cfg.output) {
            (Some(p), _) => p.clone(),
            (None, Some(p)) => p.with_extension("mean.csv"),
            (None, None) => unreachable!("checked by figure_paths"),
        };
        std::fs::write(path, mean)?;
    }
    Ok(())
}

/// Output documents of a subcommand, each with the settings header.
pub fn render(cfg: &RunConfig) -> Result<Vec<String>> {
    let kernel = kernel_epanechnikov();
    let docs = match cfg.subcommand.as_str() {
        "simulate" => vec![simulate(cfg)?],
        "fit" => vec![fit(cfg)?],
        "kde" => vec![kde(cfg, &kernel)?],
        "experiment" => vec![experiment(cfg, &kernel)?],
        "covariance" => vec![covariance(cfg, &kernel)?],
        "are-demo" => vec![are(cfg)?],
        "figure-paths" => {
            if cfg.output.is_none() && cfg.mean_output.is_none() {
                return Err(Error::Usage("figure-paths writes two files and needs --output".into()));
            }
            let (paths, mean) = figure_paths(cfg, &kernel)?;
            vec![paths, mean]
        }
        other => return Err(Error::Usage(format!("unknown subcommand {other:?}"))),
    };
    let header = cfg.header();
    Ok(docs.into_iter().map(|d| format!("{header}{d}")).collect())
}

fn csv_string(write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

fn solver(cfg: &RunConfig) -> Result<SolverConfig> {
    let s = SolverConfig {
        alpha_trunc: cfg.get("alpha-trunc")?,
        gamma_override: cfg.opt("gamma-override")?,
        tol: cfg.get("tol")?,
        max_iter: cfg.get("max-iter")?,
        damping: cfg.get("damping")?,
    };
    s.validate().map_err(|e| Error::Usage(e.to_string()))?;
    Ok(s)
}

fn parse_sizes(raw: &str) -> Result<Vec<(usize, usize)>> {
    raw.split(',')
        .map(|part| {
            let (m, n) = part
                .trim()
                .split_once('+')
                .ok_or_else(|| Error::Usage(format!("size {part:?} is not of the form m+n")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Usage(format!("size {part:?} is not of the form m+n")))
            };
            Ok((parse(m)?, parse(n)?))
        })
        .collect()
}

fn parse_list(raw: &str, name: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Usage(format!("invalid number {v:?} in --{name}")))
        })
        .collect()
}

struct Loaded {
    mc: MCSample,
    lb: Option<LbSample>,
}

fn load(cfg: &RunConfig) -> Result<Loaded> {
    let path: String = cfg.get("input")?;
    if path.is_empty() {
        return Err(Error::Usage(format!("{} needs --input", cfg.subcommand)));
    }
    let file = std::fs::File::open(&path)?;
    match cfg.raw("format") {
        "mc" => Ok(Loaded {
            mc: MCSample::read_csv(file)?,
            lb: None,
        }),
        "lb" => {
            let lb = LbSample::read_csv(file)?;
            Ok(Loaded {
                mc: lb_to_mc(&lb)?,
                lb: Some(lb),
            })
        }
        other => Err(Error::Usage(format!("--format must be mc or lb, got {other:?}"))),
    }
}

fn simulate(cfg: &RunConfig) -> Result<String> {
    let model = TrueModel::gamma(cfg.get("alpha")?, cfg.get("scale")?)?;
    let (m, n, seed): (usize, usize, u64) = (cfg.get("m")?, cfg.get("n")?, cfg.get("seed")?);
    match cfg.raw("model") {
        "mc" => {
            let s = gen_mc(&model, m, n, seed)?;
            csv_string(|b| s.write_csv(b))
        }
        "lb" => {
            let censor: CensorDist = cfg.get("censor")?;
            let s = gen_lb(&model, censor, m, n, seed)?;
            csv_string(|b| s.write_csv(b))
        }
        other => Err(Error::Usage(format!("--model must be mc or lb, got {other:?}"))),
    }
}

fn fit(cfg: &RunConfig) -> Result<String> {
    let data = load(cfg)?;
    let (dist, report) = solve_score(&data.mc, &solver(cfg)?)?;
    let mut out = format!(
        "# iterations = {}\n# residual = {}\n# gamma = {}\n",
        report.iterations,
        fmt_f64(report.residual),
        fmt_f64(report.gamma)
    );
    out.push_str(&csv_string(|b| dist.write_csv(b))?);
    Ok(out)
}

fn kde(cfg: &RunConfig, kernel: &Kernel) -> Result<String> {
    let data = load(cfg)?;
    let (fit, _) = solve_score(&data.mc, &solver(cfg)?)?;
    let rule: BandwidthRule = cfg.get("rule")?;
    let target = cfg.raw("target");
    let dist = match target {
        "g" => fit,
        "fu" => unbiased_cdf(&fit)?.fu().clone(),
        other => return Err(Error::Usage(format!("--target must be g or fu, got {other:?}"))),
    };
    let h = match cfg.opt::<f64>("bandwidth")? {
        Some(h) => h,
        None => match rule {
            BandwidthRule::Reference => reference_from_uncensored(data.mc.x(), kernel)?,
            _ if target == "fu" => {
                return Err(Error::Usage(
                    "target fu takes the reference rule or an explicit --bandwidth".into(),
                ))
            }
            BandwidthRule::Theoretical => {
                let truth = TrueModel::gamma(cfg.get("truth-alpha")?, 1.0)?;
                let l2 = truth.l2_gpp_on(0.0, truth.quantile(0.999));
                bandwidth_theoretical(data.mc.k(), data.mc.phat(), kernel, l2)?
            }
            BandwidthRule::Oracle => {
                let truth = TrueModel::gamma(cfg.get("truth-alpha")?, 1.0)?;
                let window = IseWindow {
                    a: 0.0,
                    b: truth.quantile(0.999),
                    points: 2049,
                };
                let grid = BandwidthGrid::around(reference_from_uncensored(data.mc.x(), kernel)?).values();
                bandwidth_oracle(&dist, &truth, kernel, window, &grid)?
            }
        },
    };
    let est = KdeEstimate::new(dist, *kernel, h)?;
    let t_max = match cfg.opt::<f64>("t-max")? {
        Some(t) => t,
        None => est.support().1,
    };
    let ts = linspace(0.0, t_max, cfg.get("points")?);
    let mut out = format!("# bandwidth = {}\nt,ghat\n", fmt_f64(h));
    for t in ts {
        let _ = writeln!(out, "{},{}", fmt_f64(t), fmt_f64(est.eval(t)));
    }
    Ok(out)
}

fn experiment(cfg: &RunConfig, kernel: &Kernel) -> Result<String> {
    let config = ExperimentConfig {
        alpha: cfg.get("alpha")?,
        sizes: parse_sizes(cfg.raw("sizes"))?,
        reps: cfg.get("reps")?,
        rule: cfg.get("rule")?,
        seed: cfg.get("seed")?,
        ise_quantile: cfg.get("ise-quantile")?,
        grid_n: cfg.get("grid-n")?,
        solver: solver(cfg)?,
    };
    config.validate().map_err(|e| Error::Usage(e.to_string()))?;
    let results = run_relative_ise(&config, kernel)?;
    let mut out = String::from("size_label,alpha,mean_pct,ci_low,ci_high,reps_used,reps_failed\n");
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.size_label(),
            fmt_f64(r.alpha),
            fmt_f64(r.mean_rel_increase),
            fmt_f64(r.ci_low),
            fmt_f64(r.ci_high),
            r.reps_used,
            r.reps_failed
        );
    }
    Ok(out)
}

fn covariance(cfg: &RunConfig, kernel: &Kernel) -> Result<String> {
    let data = load(cfg)?;
    let solver = solver(cfg)?;
    let (fit, _) = solve_score(&data.mc, &solver)?;
    let grid = match cfg.raw("grid") {
        "" => {
            let mut x = data.mc.x().to_vec();
            x.sort_by(f64::total_cmp);
            if x.is_empty() {
                return Err(Error::Usage("no uncensored values to place a default grid; pass --grid".into()));
            }
            let mut g: Vec<f64> = (1..=9).map(|d| x[(d * (x.len() - 1)) / 10]).collect();
            g.dedup();
            g
        }
        raw => parse_list(raw, "grid")?,
    };
    let target = cfg.raw("target");
    let psi_grid = match target {
        "u" => grid.clone(),
        "z" => {
            let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            linspace(lo, hi, cfg.get("inner-points")?)
        }
        other => return Err(Error::Usage(format!("--target must be u or z, got {other:?}"))),
    };
    let mut notes = String::new();
    let psi_u = match cfg.raw("method") {
        "bootstrap" => {
            let (cov, rep) = psi_u_bootstrap(&data.mc, cfg.get("resamples")?, &psi_grid, cfg.get("seed")?, &solver)?;
            let _ = writeln!(notes, "# bootstrap_failures = {}", rep.failures);
            cov
        }
        "explicit" => {
            let lb = data
                .lb
                .as_ref()
                .ok_or_else(|| Error::Usage("--method explicit needs --format lb input".into()))?;
            let (cov, rep) = psi_u_explicit(lb, &fit, &psi_grid, kernel)?;
            if rep.low_uncensored_fraction {
                let msg = format!(
                    "uncensored fraction {} is at or below 0.59; the explicit formula is not known to be consistent here",
                    fmt_f64(rep.p_hat)
                );
                eprintln!("warning: {msg}");
                let _ = writeln!(notes, "# warning: {msg}");
            }
            cov
        }
        other => return Err(Error::Usage(format!("--method must be bootstrap or explicit, got {other:?}"))),
    };
    let cov: CovGrid = if target == "z" {
        psi_z_hat(&psi_u, &unbiased_cdf(&fit)?, &grid)?
    } else {
        psi_u
    };
    notes.push_str(&csv_string(|b| cov.write_csv(b))?);
    Ok(notes)
}

fn are(cfg: &RunConfig) -> Result<String> {
    let (theta, m, n, reps, seed): (f64, usize, usize, usize, u64) =
        (cfg.get("theta")?, cfg.get("m")?, cfg.get("n")?, cfg.get("reps")?, cfg.get("seed")?);
    let ratio = are_demo(theta, m, n, reps, seed)?;
    let predicted = 1.0 + n as f64 / (2.0 * m as f64);
    Ok(format!(
        "theta,m,n,reps,variance_ratio,predicted\n{},{m},{n},{reps},{},{}\n",
        fmt_f64(theta),
        fmt_f64(ratio),
        fmt_f64(predicted)
    ))
}

/// Density paths for the uncensored-only and full-sample estimators.
///
/// For size cell `c`, path `r` uses the same substream as replication `r` of
/// the experiment. Both estimators use the reference bandwidth of the
/// uncensored values. Returns the long-format paths CSV and the pointwise-mean
/// CSV.
fn figure_paths(cfg: &RunConfig, kernel: &Kernel) -> Result<(String, String)> {
    let model = TrueModel::gamma(cfg.get("alpha")?, 1.0)?;
    let sizes = parse_sizes(cfg.raw("sizes"))?;
    let paths: usize = cfg.get("paths")?;
    let seed: u64 = cfg.get("seed")?;
    let solver = solver(cfg)?;
    if paths == 0 {
        return Err(Error::Usage("--paths must be at least 1".into()));
    }
    let ts = linspace(0.0, model.quantile(0.999), cfg.get("points")?);
    let mut path_csv = String::from("panel,replication,t,ghat\n");
    let mut mean_csv = String::from("panel,t,mean_ghat,true_g\n");
    for (cell, &(m, n)) in sizes.iter().enumerate() {
        let curves: Vec<(Vec<f64>, Vec<f64>)> = (0..paths)
            .into_par_iter()
            .map(|r| {
                let mut rng = substream(seed, replication_stream(cell, r));
                let sample = gen_mc_with(&model, m, n, &mut rng)?;
                let h = reference_from_uncensored(sample.x(), kernel)?;
                let unc = KdeEstimate::new(DiscreteDist::empirical(sample.x())?, *kernel, h)?;
                let full = KdeEstimate::new(solve_score(&sample, &solver)?.0, *kernel, h)?;
                Ok((
                    ts.iter().map(|&t| unc.eval(t)).collect(),
                    ts.iter().map(|&t| full.eval(t)).collect(),
                ))
            })
            .collect::<Result<_>>()?;
        for (panel, pick) in [("unc", 0usize), ("full", 1)] {
            let label = format!("{panel}_{m}+{n}");
            let mut mean = vec![0.0; ts.len()];
            for (r, c) in curves.iter().enumerate() {
                let curve = if pick == 0 { &c.0 } else { &c.1 };
                for (i, (&t, &v)) in ts.iter().zip(curve).enumerate() {
                    mean[i] += v;
                    let _ = writeln!(path_csv, "{label},{r},{},{}", fmt_f64(t), fmt_f64(v));
                }
            }
            for (&t, s) in ts.iter().zip(&mean) {
                let _ = writeln!(
                    mean_csv,
                    "{label},{},{},{}",
                    fmt_f64(t),
                    fmt_f64(s / paths as f64),
                    fmt_f64(model.pdf(t))
                );
            }
        }
    }
    Ok((path_csv, mean_csv))
}
