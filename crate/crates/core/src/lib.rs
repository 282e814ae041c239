//! Nonparametric estimation of a lifetime distribution and its density from
//! multiplicatively censored data, with the length-biased sampling extension.
//!
//! The pipeline is: simulate or load a sample ([`simulate`]), solve the score
//! equation for the distribution function ([`npmle`]), smooth it with a kernel
//! ([`kde`]), and judge the result by integrated squared error ([`ise`]).
//! [`lengthbias`] maps the fitted distribution to the unbiased lifetime law and
//! estimates covariance functions.

pub mod cli;
pub mod dist;
pub mod error;
pub mod ise;
pub mod kde;
pub mod lengthbias;
pub mod npmle;
pub mod quad;
pub mod rng;
pub mod simulate;

pub use dist::{censored_density, gamma_cdf, gamma_pdf, kernel_epanechnikov, DiscreteDist, GammaSpec, Kernel, TrueModel};
pub use error::{Error, Result};
pub use ise::{are_demo, ise, ise_expansion_check, ise_fn, run_relative_ise, summarize, ExperimentConfig, ExperimentResult, Summary};
pub use kde::{bandwidth_oracle, bandwidth_reference, bandwidth_theoretical, kde_eval, BandwidthGrid, BandwidthRule, IseWindow, KdeEstimate};
pub use lengthbias::{kde_unbiased, psi_u_bootstrap, psi_u_explicit, psi_z_hat, sigma_hat, unbiased_cdf, CovGrid, UnbiasedEstimate};
pub use npmle::{score_residual, solve_score, sup_distance, SolveReport, SolverConfig};
pub use simulate::{gen_lb, gen_mc, lb_to_mc, CensorDist, LbRecord, LbSample, MCSample};
