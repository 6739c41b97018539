//! Independent numerical oracles for the closed forms: Rayleigh-ensemble
//! Monte Carlo averaging, deterministic quadrature averaging, and a
//! sampling estimator of the mutual information of the Gaussian
//! conditional channel.

use crate::capacity::{heterodyne_integrand, holevo_integrand, CapacityResult, Method};
use crate::medium::{diffusion_averages, MediumError, MediumParams};
use crate::quad::{self, QuadError};
use crate::rng::{SampleRng, SALT_MUTUAL_INFO, SALT_TAU};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const LN_2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("domain error: {what} (got {value})")]
    Domain { what: &'static str, value: f64 },
    #[error(transparent)]
    Medium(#[from] MediumError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Seed material for a deterministic sample stream. Identical
/// (master_seed, stream_id) reproduce identical sequences regardless of
/// thread schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }
}

/// Monte Carlo estimate with its standard error (sample sd / sqrt(n)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: u64,
}

/// Which capacity-of-tau integrand an averaging oracle evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityKind {
    Heterodyne,
    Holevo,
}

/// `n` i.i.d. draws from the exponential density with mean `tau_bar`
/// (inverse-CDF method, u = 0 excluded).
pub fn sample_tau(tau_bar: f64, n: usize, rng: RngSpec) -> Result<Vec<f64>, OracleError> {
    if !(tau_bar > 0.0) {
        return Err(OracleError::Domain {
            what: "tau_bar must be positive",
            value: tau_bar,
        });
    }
    if n == 0 {
        return Err(OracleError::Domain {
            what: "n must be at least 1",
            value: 0.0,
        });
    }
    Ok((0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = SampleRng::from_key(rng.master_seed, rng.stream_id, SALT_TAU, i);
            -tau_bar * r.uniform_open().ln()
        })
        .collect())
}

/// Mean and standard error over an index-ordered sample vector. The
/// reduction order is fixed, so results are identical for any number of
/// worker threads.
fn reduce(samples: &[f64]) -> McEstimate {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let std_error = if n > 1 {
        let ss = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
        (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
    } else {
        0.0
    };
    McEstimate {
        mean,
        std_error,
        n_samples: n as u64,
    }
}

/// Monte Carlo Rayleigh average of the chosen capacity integrand.
///
/// Fluctuations of the noise weight sigma are not sampled: they are
/// smaller than the mean by a factor of order N and are replaced by
/// sigma_bar, exactly as in the closed forms. The microscopic simulator
/// is where sigma fluctuates naturally.
pub fn mc_average_capacity(
    kind: CapacityKind,
    p: &MediumParams,
    n: usize,
    rng: RngSpec,
) -> Result<McEstimate, OracleError> {
    if n == 0 {
        return Err(OracleError::Domain {
            what: "n must be at least 1",
            value: 0.0,
        });
    }
    let da = diffusion_averages(p)?;
    let a = da.tau_bar * p.power_per_p0();
    let s = da.sigma_bar - 1.0;
    let r_eff = p.power_per_p0() * da.tau_bar / da.sigma_bar;
    let samples: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = SampleRng::from_key(rng.master_seed, rng.stream_id, SALT_TAU, i);
            let u = -r.uniform_open().ln();
            match kind {
                CapacityKind::Heterodyne => heterodyne_integrand(r_eff, u),
                CapacityKind::Holevo => holevo_integrand(a, s, u),
            }
        })
        .collect();
    Ok(reduce(&samples))
}

/// Deterministic quadrature of the same Rayleigh average, with a
/// certified absolute error bound.
pub fn quad_average_capacity(
    kind: CapacityKind,
    p: &MediumParams,
    abs_tol: f64,
) -> Result<CapacityResult, OracleError> {
    if !(abs_tol > 0.0) {
        return Err(OracleError::Domain {
            what: "abs_tol must be positive",
            value: abs_tol,
        });
    }
    let da = diffusion_averages(p)?;
    let a = da.tau_bar * p.power_per_p0();
    let s = da.sigma_bar - 1.0;
    let r_eff = p.power_per_p0() * da.tau_bar / da.sigma_bar;
    let q = match kind {
        CapacityKind::Heterodyne => {
            quad::exp_weighted_integral(&mut |u| heterodyne_integrand(r_eff, u), abs_tol)?
        }
        CapacityKind::Holevo => {
            quad::exp_weighted_integral(&mut |u| holevo_integrand(a, s, u), abs_tol)?
        }
    };
    Ok(CapacityResult {
        bits: q.value,
        method: Method::QuadOracle,
        err_estimate: q.err_estimate,
    })
}

/// Sampling estimator of the mutual information of the Gaussian channel
/// nu = sqrt(r) mu + w in normalized coordinates (mu and w are unit
/// variance complex Gaussians). Uses the analytic marginal of nu, a
/// complex Gaussian of variance 1 + r, so the estimator is bias-free and
/// converges to log2(1 + r).
pub fn mutual_info_gaussian(r: f64, n: usize, rng: RngSpec) -> Result<McEstimate, OracleError> {
    if !(r > 0.0) {
        return Err(OracleError::Domain {
            what: "snr must be positive",
            value: r,
        });
    }
    if n == 0 {
        return Err(OracleError::Domain {
            what: "n must be at least 1",
            value: 0.0,
        });
    }
    let log2_1pr = r.ln_1p() / LN_2;
    let samples: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut g = SampleRng::from_key(rng.master_seed, rng.stream_id, SALT_MUTUAL_INFO, i);
            let (m_re, m_im) = g.normal_pair();
            let (w_re, w_im) = g.normal_pair();
            // complex unit-variance: each quadrature carries variance 1/2
            let half = std::f64::consts::FRAC_1_SQRT_2;
            let (mu_re, mu_im) = (half * m_re, half * m_im);
            let (w_re, w_im) = (half * w_re, half * w_im);
            let sq = r.sqrt();
            let nu_re = sq * mu_re + w_re;
            let nu_im = sq * mu_im + w_im;
            let w2 = w_re * w_re + w_im * w_im;
            let nu2 = nu_re * nu_re + nu_im * nu_im;
            // log2 P(nu|mu)/p~(nu) = log2(1+r) + (|nu|^2/(1+r) - |w|^2)/ln 2
            log2_1pr + (nu2 / (1.0 + r) - w2) / LN_2
        })
        .collect();
    Ok(reduce(&samples))
}

// ---------------------------------------------------------------------
// Kolmogorov-Smirnov test
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sided KS test of `samples` against the exponential distribution
/// with the given mean. The p-value uses the asymptotic Kolmogorov
/// distribution with the standard small-sample correction.
pub fn ks_exponential(samples: &[f64], mean: f64) -> KsResult {
    assert!(mean > 0.0 && !samples.is_empty());
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = -(-x / mean).exp_m1();
        d = d.max(cdf - i as f64 / n).max((i + 1) as f64 / n - cdf);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64 * lambda).powi(2)).exp();
        p += 2.0 * sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    KsResult {
        statistic: d,
        p_value: p.clamp(0.0, 1.0),
    }
}
