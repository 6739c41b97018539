//! Microscopic oracle: a quasi-1D tight-binding waveguide with on-site
//! disorder and uniform linear gain.
//!
//! The lattice is a width x length strip with nearest-neighbor hopping
//! of unit strength, on-site energies drawn uniformly from
//! [-W/2, W/2], and a uniform imaginary potential +i eta in the active
//! region (eta > 0 amplifies). Clean semi-infinite strips serve as
//! leads. The 2N x 2N scattering matrix is built slice by slice with a
//! recursive Green-function sweep; raw transfer-matrix products over
//! long systems would blow up exponentially, the recursion stays
//! bounded.

use crate::medium::{MediumError, ScatteringMatrix};
use crate::rng::{SampleRng, SALT_DISORDER};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Linear solves with a 1-norm condition estimate above this value are
/// treated as a pole of the scattering matrix on the real energy axis,
/// i.e. the sample is at or beyond its lasing instability.
const COND_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WgsimError {
    #[error("invalid lattice spec: {what} (got {value})")]
    InvalidSpec { what: &'static str, value: f64 },
    #[error("no propagating modes at energy {energy} for width {width}")]
    NoPropagatingModes { width: usize, energy: f64 },
    #[error("mode index {index} out of range for {n_modes} propagating modes")]
    ModeIndex { index: usize, n_modes: usize },
    #[error("lasing instability: linear solve singular to working precision at slice {slice}{}",
            sample_index.map(|i| format!(" of sample {i}")).unwrap_or_default())]
    LasingInstability {
        sample_index: Option<usize>,
        slice: usize,
    },
    #[error("mean-free-path fit residual {residual:.3} exceeds 10%")]
    FitQuality { residual: f64 },
    #[error("ballistic limit: zero disorder gives a divergent mean free path")]
    BallisticRegime,
    #[error(transparent)]
    Medium(#[from] MediumError),
}

/// Geometry, disorder, gain and seed of one lattice ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    /// Transverse sites; also the budget of propagating modes.
    pub width: usize,
    /// Longitudinal sites of the active region.
    pub length: usize,
    /// Half-width of the uniform on-site energy distribution, in units
    /// of the hopping energy.
    pub disorder_strength: f64,
    /// Uniform imaginary on-site potential, units of hopping energy.
    pub gain: f64,
    /// Operating energy in units of hopping (0 = band center).
    pub energy: f64,
    pub seed: u64,
}

impl LatticeSpec {
    pub fn validate(&self) -> Result<(), WgsimError> {
        if self.width == 0 {
            return Err(WgsimError::InvalidSpec {
                what: "width must be positive",
                value: 0.0,
            });
        }
        if self.length == 0 {
            return Err(WgsimError::InvalidSpec {
                what: "length must be positive",
                value: 0.0,
            });
        }
        if !(self.disorder_strength >= 0.0) {
            return Err(WgsimError::InvalidSpec {
                what: "disorder_strength must be nonnegative",
                value: self.disorder_strength,
            });
        }
        if !(self.gain >= 0.0) {
            return Err(WgsimError::InvalidSpec {
                what: "gain must be nonnegative",
                value: self.gain,
            });
        }
        if !self.energy.is_finite() {
            return Err(WgsimError::InvalidSpec {
                what: "energy must be finite",
                value: self.energy,
            });
        }
        Ok(())
    }

    fn disorder_stream(&self) -> u64 {
        ((self.length as u64) << 32) ^ self.width as u64
    }
}

/// Transverse mode data of the clean leads at the operating energy.
struct Leads {
    /// W x W orthogonal matrix of transverse modes (columns).
    u: DMatrix<f64>,
    /// Lead self-energy in site space, complex symmetric.
    sigma: DMatrix<Complex64>,
    /// Indices of propagating modes.
    prop: Vec<usize>,
    /// Group velocities 2 sin k of the propagating modes.
    vel: Vec<f64>,
}

fn make_leads(width: usize, energy: f64) -> Result<Leads, WgsimError> {
    let w = width;
    let norm = (2.0 / (w as f64 + 1.0)).sqrt();
    let mut u = DMatrix::zeros(w, w);
    let mut g_mode = vec![Complex64::new(0.0, 0.0); w];
    let mut prop = Vec::new();
    let mut vel = Vec::new();
    for m in 1..=w {
        let theta = PI * m as f64 / (w as f64 + 1.0);
        for y in 1..=w {
            u[(y - 1, m - 1)] = norm * (theta * y as f64).sin();
        }
        let eps = -2.0 * theta.cos();
        let z = energy - eps;
        if z.abs() < 2.0 {
            // open channel: retarded surface GF -e^{ik}, velocity 2 sin k
            let v = (4.0 - z * z).sqrt();
            g_mode[m - 1] = Complex64::new(z / 2.0, -v / 2.0);
            prop.push(m - 1);
            vel.push(v);
        } else {
            // closed channel: the decaying real branch
            let root = (z * z - 4.0).sqrt();
            g_mode[m - 1] = Complex64::new((z - z.signum() * root) / 2.0, 0.0);
        }
    }
    if prop.is_empty() {
        return Err(WgsimError::NoPropagatingModes { width, energy });
    }
    // sigma = U diag(g) U^T over all channels, open and closed
    let mut sigma = DMatrix::zeros(w, w);
    for a in 0..w {
        for b in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..w {
                acc += g_mode[m] * (u[(a, m)] * u[(b, m)]);
            }
            sigma[(a, b)] = acc;
        }
    }
    Ok(Leads {
        u,
        sigma,
        prop,
        vel,
    })
}

/// Number of propagating modes at the given width and energy.
pub fn n_propagating(width: usize, energy: f64) -> usize {
    (1..=width)
        .filter(|&m| {
            let eps = -2.0 * (PI * m as f64 / (width as f64 + 1.0)).cos();
            (energy - eps).abs() < 2.0
        })
        .count()
}

/// 1-norm: maximum column sum of absolute values.
fn norm_1(m: &DMatrix<Complex64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse with a conditioning check standing in for pole detection.
fn invert_checked(m: &DMatrix<Complex64>, slice: usize) -> Result<DMatrix<Complex64>, usize> {
    let inv = m.clone().try_inverse().ok_or(slice)?;
    if norm_1(m) * norm_1(&inv) > COND_LIMIT {
        return Err(slice);
    }
    Ok(inv)
}

/// Full 2N x 2N scattering matrix of one disorder realization.
pub fn scattering_matrix(spec: &LatticeSpec) -> Result<ScatteringMatrix, WgsimError> {
    scattering_matrix_sample(spec, 0).map_err(|e| match e {
        WgsimError::LasingInstability { slice, .. } => WgsimError::LasingInstability {
            sample_index: None,
            slice,
        },
        other => other,
    })
}

fn scattering_matrix_sample(
    spec: &LatticeSpec,
    sample_index: usize,
) -> Result<ScatteringMatrix, WgsimError> {
    spec.validate()?;
    let leads = make_leads(spec.width, spec.energy)?;
    let w = spec.width;
    let lz = spec.length;

    // draw the disorder once in a fixed site order, shared by both sweeps
    let mut rng = SampleRng::from_key(
        spec.seed,
        spec.disorder_stream(),
        SALT_DISORDER,
        sample_index as u64,
    );
    let eps: Vec<f64> = (0..lz * w)
        .map(|_| spec.disorder_strength * (rng.uniform() - 0.5))
        .collect();

    // inverse-GF slice blocks A_j = E - h_j - Sigma(ends)
    let gain = Complex64::new(0.0, spec.gain);
    let build_a = |j: usize| -> DMatrix<Complex64> {
        let mut a = DMatrix::zeros(w, w);
        for y in 0..w {
            a[(y, y)] = Complex64::new(spec.energy - eps[j * w + y], 0.0) - gain;
            if y + 1 < w {
                a[(y, y + 1)] = Complex64::new(1.0, 0.0);
                a[(y + 1, y)] = Complex64::new(1.0, 0.0);
            }
        }
        // both lead self-energies land on the same slice when lz == 1
        if j == 0 {
            a -= &leads.sigma;
        }
        if j == lz - 1 {
            a -= &leads.sigma;
        }
        a
    };

    let lasing = |slice: usize| WgsimError::LasingInstability {
        sample_index: Some(sample_index),
        slice,
    };

    // left sweep: g_j = (A_j - g_{j-1})^-1, P_j = -g_j P_{j-1}
    let mut g_left = invert_checked(&build_a(0), 0).map_err(lasing)?;
    let mut p = g_left.clone();
    for j in 1..lz {
        let mut a = build_a(j);
        a -= &g_left;
        g_left = invert_checked(&a, j).map_err(lasing)?;
        p = -(&g_left * p);
    }
    let g_nn = g_left; // fully connected G at the receiver edge
    let g_n1 = p;

    // right sweep: g_j = (A_j - g_{j+1})^-1, Q_j = -g_j Q_{j+1}
    let mut g_right = invert_checked(&build_a(lz - 1), lz - 1).map_err(lasing)?;
    let mut q = g_right.clone();
    for j in (0..lz - 1).rev() {
        let mut a = build_a(j);
        a -= &g_right;
        g_right = invert_checked(&a, j).map_err(lasing)?;
        q = -(&g_right * q);
    }
    let g_11 = g_right;
    let g_1n = q;

    // Fisher-Lee projection onto the propagating modes
    let np = leads.prop.len();
    let mut u_prop = DMatrix::zeros(w, np);
    for (col, &m) in leads.prop.iter().enumerate() {
        for y in 0..w {
            u_prop[(y, col)] = leads.u[(y, m)];
        }
    }
    let sqrt_v: Vec<f64> = leads.vel.iter().map(|v| v.sqrt()).collect();
    let project = |g: &DMatrix<Complex64>| -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(np, np);
        for a in 0..np {
            for b in 0..np {
                let mut acc = Complex64::new(0.0, 0.0);
                for x in 0..w {
                    let mut inner = Complex64::new(0.0, 0.0);
                    for y in 0..w {
                        inner += g[(x, y)] * u_prop[(y, b)];
                    }
                    acc += u_prop[(x, a)] * inner;
                }
                out[(a, b)] = Complex64::i() * (sqrt_v[a] * sqrt_v[b]) * acc;
            }
        }
        out
    };

    let mut s = DMatrix::zeros(2 * np, 2 * np);
    let blocks = [
        (project(&g_11), 0, 0, true),   // sender reflection
        (project(&g_1n), 0, np, false), // receiver -> sender
        (project(&g_n1), np, 0, false), // sender -> receiver
        (project(&g_nn), np, np, true), // receiver reflection
    ];
    for (block, r0, c0, diag) in blocks {
        for a in 0..np {
            for b in 0..np {
                s[(r0 + a, c0 + b)] = block[(a, b)]
                    - if diag && a == b {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
            }
        }
    }
    Ok(ScatteringMatrix::new(s, np)?)
}

/// Per-ensemble summaries of one lattice specification.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub tau_samples: Vec<f64>,
    pub sigma_samples: Vec<f64>,
    pub min_eig_samples: Vec<f64>,
    pub tau_bar_hat: f64,
    pub sigma_bar_hat: f64,
    /// Smallest eigenvalue of S S^dag - 1 across the whole ensemble.
    pub min_eig_ssdagger: f64,
    /// Largest entry of |S S^dag - 1| across the ensemble; meaningful
    /// as a flux-conservation check only at zero gain.
    pub max_unitarity_violation: f64,
    pub n_samples: usize,
    pub spec: LatticeSpec,
    pub alpha: usize,
    pub beta: usize,
}

/// Independent disorder realizations with seed-derived per-sample
/// streams; bit-identical for a fixed seed at any thread count.
pub fn run_ensemble(
    spec: &LatticeSpec,
    n_samples: usize,
    alpha: usize,
    beta: usize,
) -> Result<EnsembleStats, WgsimError> {
    spec.validate()?;
    if n_samples == 0 {
        return Err(WgsimError::InvalidSpec {
            what: "n_samples must be at least 1",
            value: 0.0,
        });
    }
    let np = n_propagating(spec.width, spec.energy);
    if np == 0 {
        return Err(WgsimError::NoPropagatingModes {
            width: spec.width,
            energy: spec.energy,
        });
    }
    for &idx in &[alpha, beta] {
        if idx >= np {
            return Err(WgsimError::ModeIndex {
                index: idx,
                n_modes: np,
            });
        }
    }

    let per_sample: Vec<Result<(f64, f64, f64, f64), WgsimError>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let s = scattering_matrix_sample(spec, i)?;
            let tau = s.tau(alpha, beta)?;
            let sigma = s.receiver_row_weight(beta)?;
            Ok((tau, sigma, s.min_eig_ss_dagger(), s.unitarity_violation()))
        })
        .collect();

    let mut tau_samples = Vec::with_capacity(n_samples);
    let mut sigma_samples = Vec::with_capacity(n_samples);
    let mut min_eig_samples = Vec::with_capacity(n_samples);
    let mut max_viol = 0.0f64;
    for r in per_sample {
        let (tau, sigma, min_eig, viol) = r?;
        tau_samples.push(tau);
        sigma_samples.push(sigma);
        min_eig_samples.push(min_eig);
        max_viol = max_viol.max(viol);
    }
    let n = n_samples as f64;
    Ok(EnsembleStats {
        tau_bar_hat: tau_samples.iter().sum::<f64>() / n,
        sigma_bar_hat: sigma_samples.iter().sum::<f64>() / n,
        min_eig_ssdagger: min_eig_samples.iter().copied().fold(f64::INFINITY, f64::min),
        max_unitarity_violation: max_viol,
        tau_samples,
        sigma_samples,
        min_eig_samples,
        n_samples,
        spec: *spec,
        alpha,
        beta,
    })
}

/// Result of the mean-free-path calibration fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfpFit {
    /// Transport mean free path in lattice units.
    pub mfp: f64,
    /// Relative rms residual of the 1/L fit.
    pub residual: f64,
}

/// Fits the ensemble-mean total transmission to (4/3) N l / L over a
/// length sweep at zero gain, returning the transport mean free path in
/// lattice units. This maps the lattice disorder strength onto the l/L
/// coordinate of the diffusion formulas.
pub fn calibrate_mfp(
    base: &LatticeSpec,
    lengths: &[usize],
    n_samples: usize,
) -> Result<MfpFit, WgsimError> {
    base.validate()?;
    if base.gain != 0.0 {
        return Err(WgsimError::InvalidSpec {
            what: "calibration requires zero gain",
            value: base.gain,
        });
    }
    if base.disorder_strength == 0.0 {
        return Err(WgsimError::BallisticRegime);
    }
    if lengths.len() < 2 {
        return Err(WgsimError::InvalidSpec {
            what: "need at least two lengths to fit",
            value: lengths.len() as f64,
        });
    }
    let np = n_propagating(base.width, base.energy) as f64;
    let mut t_means = Vec::with_capacity(lengths.len());
    for &len in lengths {
        let spec = LatticeSpec {
            length: len,
            ..*base
        };
        let totals: Vec<Result<f64, WgsimError>> = (0..n_samples)
            .into_par_iter()
            .map(|i| Ok(scattering_matrix_sample(&spec, i)?.total_transmission()))
            .collect();
        let mut sum = 0.0;
        for t in totals {
            sum += t?;
        }
        t_means.push(sum / n_samples as f64);
    }
    // least squares of T against c/L with c = (4/3) N l
    let sxy: f64 = t_means
        .iter()
        .zip(lengths)
        .map(|(t, &l)| t / l as f64)
        .sum();
    let sxx: f64 = lengths.iter().map(|&l| 1.0 / (l as f64 * l as f64)).sum();
    let c = sxy / sxx;
    let mfp = 3.0 * c / (4.0 * np);
    let mut ss = 0.0;
    for (t, &l) in t_means.iter().zip(lengths) {
        let fit = c / l as f64;
        ss += ((t - fit) / fit).powi(2);
    }
    let residual = (ss / lengths.len() as f64).sqrt();
    if residual > 0.10 {
        return Err(WgsimError::FitQuality { residual });
    }
    Ok(MfpFit { mfp, residual })
}

/// Histogram of per-sample receiver signal-to-noise ratios. Unlike the
/// Rayleigh oracle, the denominator here uses each sample's own sigma.
pub fn snr_histogram(stats: &EnsembleStats, power_per_p0: f64) -> Vec<(f64, usize)> {
    let rs: Vec<f64> = stats
        .tau_samples
        .iter()
        .zip(&stats.sigma_samples)
        .map(|(t, s)| power_per_p0 * t / s)
        .collect();
    let n_bins = (rs.len() as f64).sqrt().ceil() as usize;
    let max = rs.iter().copied().fold(0.0f64, f64::max);
    let width = if max > 0.0 { max / n_bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; n_bins];
    for &r in &rs {
        let mut b = (r / width) as usize;
        if b >= n_bins {
            b = n_bins - 1;
        }
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| ((i as f64 + 0.5) * width, c))
        .collect()
}
