//! Channel-model data layer: waveguide parameters, diffusion-theory
//! ensemble averages, the effective signal-to-noise ratio, and
//! instance-level queries on scattering matrices.

use nalgebra::{DMatrix, DMatrixView};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MediumError {
    #[error("invalid parameter: {what} (got {value})")]
    InvalidParameter { what: &'static str, value: f64 },
    #[error("at or above the laser threshold: length_ratio = {length_ratio} >= pi, diffusion averages diverge")]
    AboveThreshold { length_ratio: f64 },
    #[error("mode index {index} out of range for {n_modes} modes")]
    ModeIndex { index: usize, n_modes: usize },
    #[error("degenerate scattering matrix: receiver row {beta} has zero norm")]
    DegenerateRow { beta: usize },
    #[error("scattering matrix must be 2N x 2N with N = {n_modes}, got {rows} x {cols}")]
    Dimension {
        n_modes: usize,
        rows: usize,
        cols: usize,
    },
}

/// Geometry and gain of the waveguide channel.
///
/// All lengths enter through two dimensionless ratios: `length_ratio`
/// is L/l_a (system length over amplification length) and `mfp_ratio`
/// is l/L (transport mean free path over system length). The input
/// power is P/P0 with P0 the single-mode quantum unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumParams {
    n_modes: u32,
    length_ratio: f64,
    mfp_ratio: f64,
    power_per_p0: f64,
}

impl MediumParams {
    /// `length_ratio` must lie in `[0, pi]`; the laser threshold itself
    /// (`pi`) is accepted as a closed boundary point because the
    /// effective signal-to-noise ratio stays finite there.
    pub fn new(
        n_modes: u32,
        length_ratio: f64,
        mfp_ratio: f64,
        power_per_p0: f64,
    ) -> Result<Self, MediumError> {
        if n_modes == 0 {
            return Err(MediumError::InvalidParameter {
                what: "n_modes must be positive",
                value: 0.0,
            });
        }
        if !(0.0..=PI).contains(&length_ratio) {
            return Err(MediumError::InvalidParameter {
                what: "length_ratio must lie in [0, pi]",
                value: length_ratio,
            });
        }
        if !(mfp_ratio > 0.0) {
            return Err(MediumError::InvalidParameter {
                what: "mfp_ratio must be positive",
                value: mfp_ratio,
            });
        }
        if !(power_per_p0 > 0.0) {
            return Err(MediumError::InvalidParameter {
                what: "power_per_p0 must be positive",
                value: power_per_p0,
            });
        }
        Ok(Self {
            n_modes,
            length_ratio,
            mfp_ratio,
            power_per_p0,
        })
    }

    pub fn n_modes(&self) -> u32 {
        self.n_modes
    }
    /// L/l_a.
    pub fn length_ratio(&self) -> f64 {
        self.length_ratio
    }
    /// l/L.
    pub fn mfp_ratio(&self) -> f64 {
        self.mfp_ratio
    }
    /// P/P0.
    pub fn power_per_p0(&self) -> f64 {
        self.power_per_p0
    }
    /// P/(N P0).
    pub fn power_per_mode(&self) -> f64 {
        self.power_per_p0 / self.n_modes as f64
    }
    /// l/l_a.
    pub fn mfp_over_la(&self) -> f64 {
        self.mfp_ratio * self.length_ratio
    }

    /// Advisory flag: true when the parameters leave the diffusive
    /// window (l no longer small against both L and l_a). Computations
    /// still proceed; the diffusion formulas just lose accuracy.
    pub fn outside_diffusive_regime(&self) -> bool {
        self.mfp_ratio > 0.2 || self.mfp_over_la() > 0.2
    }
}

/// Ensemble means of the transmission intensity and of the total output
/// weight of a receiver mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionAverages {
    /// Mean of |t_ba|^2.
    pub tau_bar: f64,
    /// Mean of sum_n (|t_bn|^2 + |r_bn|^2); 1 exactly without gain.
    pub sigma_bar: f64,
}

/// sin(x)/x with the x = 0 limit.
fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Diffusion-theory averages of transmission and output weight.
///
/// tau_bar = (4 l / 3 l_a) / (N sin(L/l_a)),
/// sigma_bar = 1 + (4 l / 3 l_a) (1 - cos(L/l_a)) / sin(L/l_a),
/// with the analytic limit tau_bar = (4/3)(l/L)/N, sigma_bar = 1 at
/// zero amplification. Diverges at the laser threshold L/l_a = pi.
pub fn diffusion_averages(p: &MediumParams) -> Result<DiffusionAverages, MediumError> {
    let lr = p.length_ratio;
    if lr >= PI {
        return Err(MediumError::AboveThreshold { length_ratio: lr });
    }
    let n = p.n_modes as f64;
    if lr == 0.0 {
        return Ok(DiffusionAverages {
            tau_bar: 4.0 / 3.0 * p.mfp_ratio / n,
            sigma_bar: 1.0,
        });
    }
    let lola = p.mfp_over_la();
    let s = lr.sin();
    Ok(DiffusionAverages {
        tau_bar: (4.0 * lola / 3.0) / (n * s),
        sigma_bar: 1.0 + (4.0 * lola / 3.0) * (1.0 - lr.cos()) / s,
    })
}

/// Effective signal-to-noise ratio
/// R_eff = (P/NP0) [1 - cos(L/l_a) + (3 l_a / 4 l) sin(L/l_a)]^-1.
///
/// Written with sin(x)/x so the expression is exact at both boundary
/// points: (4/3)(l/L)(P/NP0) at zero amplification and P/(2NP0) at the
/// laser threshold (a removable singularity of the tau/sigma form).
pub fn r_eff(p: &MediumParams) -> f64 {
    let lr = p.length_ratio;
    if lr == PI {
        return 0.5 * p.power_per_mode();
    }
    let denom = (1.0 - lr.cos()) + 3.0 / (4.0 * p.mfp_ratio) * sinc(lr);
    p.power_per_mode() / denom
}

// ---------------------------------------------------------------------
// Scattering matrices
// ---------------------------------------------------------------------

/// A 2N x 2N scattering matrix partitioned into N x N blocks. Rows and
/// columns 0..N belong to the sender lead, N..2N to the receiver lead,
/// so `t` (sender to receiver) is the lower-left block and `r`
/// (reflection on the receiver side) the lower-right one.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix {
    s: DMatrix<Complex64>,
    n_modes: usize,
}

impl ScatteringMatrix {
    pub fn new(s: DMatrix<Complex64>, n_modes: usize) -> Result<Self, MediumError> {
        if s.nrows() != 2 * n_modes || s.ncols() != 2 * n_modes || n_modes == 0 {
            return Err(MediumError::Dimension {
                n_modes,
                rows: s.nrows(),
                cols: s.ncols(),
            });
        }
        Ok(Self { s, n_modes })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.s
    }

    /// Transmission block, sender to receiver.
    pub fn t(&self) -> DMatrixView<'_, Complex64> {
        let n = self.n_modes;
        self.s.view((n, 0), (n, n))
    }

    /// Reflection block on the receiver side.
    pub fn r(&self) -> DMatrixView<'_, Complex64> {
        let n = self.n_modes;
        self.s.view((n, n), (n, n))
    }

    /// Transmission block, receiver to sender.
    pub fn t_prime(&self) -> DMatrixView<'_, Complex64> {
        let n = self.n_modes;
        self.s.view((0, n), (n, n))
    }

    /// Reflection block on the sender side.
    pub fn r_prime(&self) -> DMatrixView<'_, Complex64> {
        let n = self.n_modes;
        self.s.view((0, 0), (n, n))
    }

    /// |t_ba|^2 for receiver mode `beta`, sender mode `alpha`.
    pub fn tau(&self, alpha: usize, beta: usize) -> Result<f64, MediumError> {
        self.check_mode(alpha)?;
        self.check_mode(beta)?;
        Ok(self.s[(self.n_modes + beta, alpha)].norm_sqr())
    }

    /// Row norm sum_n |S_bn|^2 of receiver row `beta` over all 2N columns.
    pub fn receiver_row_weight(&self, beta: usize) -> Result<f64, MediumError> {
        self.check_mode(beta)?;
        Ok(self
            .s
            .row(self.n_modes + beta)
            .iter()
            .map(|z| z.norm_sqr())
            .sum())
    }

    /// Total transmission sum_{nm} |t_nm|^2.
    pub fn total_transmission(&self) -> f64 {
        self.t().iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest entry of |S S^dag - 1|; zero for a flux-conserving medium.
    pub fn unitarity_violation(&self) -> f64 {
        self.ss_dagger_minus_identity()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hermitian matrix S S^dag - 1.
    /// Nonnegative (within tolerance) for an amplifying medium, where
    /// the spontaneous-emission noise weight must be a valid covariance.
    pub fn min_eig_ss_dagger(&self) -> f64 {
        let m = self.ss_dagger_minus_identity();
        m.symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Super-unitarity check with numerical slack proportional to the
    /// squared matrix scale.
    pub fn is_super_unitary(&self) -> bool {
        let scale2 = self.s.iter().map(|z| z.norm_sqr()).sum::<f64>();
        self.min_eig_ss_dagger() >= -1e-10 * scale2.max(1.0)
    }

    fn ss_dagger_minus_identity(&self) -> DMatrix<Complex64> {
        let mut m = &self.s * self.s.adjoint();
        for i in 0..m.nrows() {
            m[(i, i)] -= Complex64::new(1.0, 0.0);
        }
        m
    }

    fn check_mode(&self, index: usize) -> Result<(), MediumError> {
        if index >= self.n_modes {
            return Err(MediumError::ModeIndex {
                index,
                n_modes: self.n_modes,
            });
        }
        Ok(())
    }
}

/// Signal-to-noise ratio at the receiver for one scattering instance:
/// R = (P/P0) |t_ba|^2 / sum_n (|t_bn|^2 + |r_bn|^2).
pub fn snr_instance(
    s: &ScatteringMatrix,
    alpha: usize,
    beta: usize,
    power_per_p0: f64,
) -> Result<f64, MediumError> {
    let num = s.tau(alpha, beta)?;
    let denom = s.receiver_row_weight(beta)?;
    if denom <= 0.0 {
        return Err(MediumError::DegenerateRow { beta });
    }
    Ok(power_per_p0 * num / denom)
}

/// Spontaneous-emission noise weight of receiver mode `beta`, fixed by
/// the fluctuation-dissipation relation: sum_n |S_bn|^2 - 1. Zero for a
/// unitary matrix; negative values signal a passive lossy medium, to
/// which the amplifier formulas do not apply.
pub fn fd_noise_weight(s: &ScatteringMatrix, beta: usize) -> Result<f64, MediumError> {
    Ok(s.receiver_row_weight(beta)? - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(n: u32, lr: f64, mfp: f64, p: f64) -> MediumParams {
        MediumParams::new(n, lr, mfp, p).unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(MediumParams::new(0, 1.0, 0.1, 1.0).is_err());
        assert!(MediumParams::new(10, -0.1, 0.1, 1.0).is_err());
        assert!(MediumParams::new(10, PI + 1e-9, 0.1, 1.0).is_err());
        assert!(MediumParams::new(10, 1.0, 0.0, 1.0).is_err());
        assert!(MediumParams::new(10, 1.0, 0.1, 0.0).is_err());
        assert!(MediumParams::new(10, PI, 0.1, 1.0).is_ok());
    }

    #[test]
    fn diffusive_regime_flag() {
        assert!(!params(10, 1.0, 0.05, 1.0).outside_diffusive_regime());
        assert!(params(10, 1.0, 0.25, 1.0).outside_diffusive_regime());
        // l/l_a = 0.14 * 3.0 > 0.2 even though l/L is small
        assert!(params(10, 3.0, 0.14, 1.0).outside_diffusive_regime());
    }

    #[test]
    fn diffusion_averages_reference_point() {
        let da = diffusion_averages(&params(10, PI / 2.0, 0.1, 1.0)).unwrap();
        assert_relative_eq!(da.tau_bar, 0.020943951023931953, max_relative = 1e-14);
        assert_relative_eq!(da.sigma_bar, 1.2094395102393195, max_relative = 1e-14);
    }

    #[test]
    fn diffusion_averages_zero_gain_limit() {
        let da = diffusion_averages(&params(10, 0.0, 0.1, 1.0)).unwrap();
        assert_relative_eq!(da.tau_bar, 4.0 * 0.1 / (3.0 * 10.0), max_relative = 1e-15);
        assert_eq!(da.sigma_bar, 1.0);
    }

    #[test]
    fn diffusion_averages_near_threshold_divergence() {
        let da = diffusion_averages(&params(10, PI - 1e-6, 0.1, 1.0)).unwrap();
        assert!(da.tau_bar > 1e4 && da.tau_bar.is_finite());
        assert!(da.sigma_bar > 1e5 && da.sigma_bar.is_finite());
        assert!(diffusion_averages(&params(10, PI, 0.1, 1.0)).is_err());
    }

    #[test]
    fn r_eff_boundary_values() {
        // exact threshold value P/(2NP0)
        assert_eq!(r_eff(&params(7, PI, 0.3, 7.0)), 0.5);
        // zero-gain limit (4/3)(l/NL) P/P0
        let p = params(10, 0.0, 0.1, 10.0);
        assert_relative_eq!(r_eff(&p), 0.13333333333333333, max_relative = 1e-15);
        // generic point, independently evaluated
        let p = params(10, PI / 2.0, 0.1, 10.0);
        assert_relative_eq!(r_eff(&p), 0.17317071954881532, max_relative = 1e-13);
    }

    #[test]
    fn r_eff_equals_power_times_tau_over_sigma() {
        for i in 0..10 {
            for j in 0..10 {
                for k in 0..10 {
                    let lr = 1e-3 + (PI - 2e-3) * i as f64 / 9.0;
                    let mfp = 0.01 + 0.15 * j as f64 / 9.0;
                    let pw = 10f64.powf(-2.0 + 4.0 * k as f64 / 9.0);
                    let p = params(10, lr, mfp, pw);
                    let da = diffusion_averages(&p).unwrap();
                    let lhs = r_eff(&p);
                    let rhs = pw * da.tau_bar / da.sigma_bar;
                    assert_relative_eq!(lhs, rhs, max_relative = 1e-14);
                }
            }
        }
    }

    #[test]
    fn r_eff_monotone_in_amplification() {
        let mut prev = 0.0;
        for i in 0..=100 {
            let lr = PI * i as f64 / 100.0;
            let v = r_eff(&params(10, lr, 0.05, 1.0));
            assert!(v >= prev, "r_eff not nondecreasing at lr = {lr}");
            prev = v;
        }
    }

    fn identity_s(n: usize) -> ScatteringMatrix {
        // t = t' = 1, r = r' = 0
        let mut s = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            s[(n + i, i)] = Complex64::new(1.0, 0.0);
            s[(i, n + i)] = Complex64::new(1.0, 0.0);
        }
        ScatteringMatrix::new(s, n).unwrap()
    }

    #[test]
    fn snr_identity_channel() {
        let s = identity_s(4);
        assert_relative_eq!(snr_instance(&s, 2, 2, 3.5).unwrap(), 3.5);
        assert_eq!(snr_instance(&s, 1, 2, 3.5).unwrap(), 0.0);
    }

    #[test]
    fn snr_single_mode_hand_value() {
        // |t|^2 = 0.25, |r|^2 = 0.5, P/P0 = 8 -> 8 * 0.25 / 0.75
        let mut m = DMatrix::zeros(2, 2);
        m[(1, 0)] = Complex64::new(0.5, 0.0);
        m[(1, 1)] = Complex64::new(0.0, 0.5f64.sqrt());
        m[(0, 0)] = Complex64::new(0.1, 0.0);
        let s = ScatteringMatrix::new(m, 1).unwrap();
        assert_relative_eq!(
            snr_instance(&s, 0, 0, 8.0).unwrap(),
            2.6666666666666665,
            max_relative = 1e-15
        );
    }

    #[test]
    fn snr_degenerate_row() {
        let m = DMatrix::zeros(2, 2);
        let s = ScatteringMatrix::new(m, 1).unwrap();
        assert!(matches!(
            snr_instance(&s, 0, 0, 1.0),
            Err(MediumError::DegenerateRow { beta: 0 })
        ));
    }

    #[test]
    fn fd_weight_unitary_and_gain() {
        let s = identity_s(3);
        for beta in 0..3 {
            assert!(fd_noise_weight(&s, beta).unwrap().abs() < 1e-15);
        }
        // single-mode pure gain: s = sqrt(2) transmission
        let mut m = DMatrix::zeros(2, 2);
        m[(1, 0)] = Complex64::new(2f64.sqrt(), 0.0);
        m[(0, 1)] = Complex64::new(2f64.sqrt(), 0.0);
        let s = ScatteringMatrix::new(m, 1).unwrap();
        assert_relative_eq!(fd_noise_weight(&s, 0).unwrap(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn eigen_helpers_on_hand_matrices() {
        let s = identity_s(3);
        assert!(s.unitarity_violation() < 1e-15);
        assert!(s.min_eig_ss_dagger().abs() < 1e-12);
        assert!(s.is_super_unitary());

        let mut m = DMatrix::zeros(2, 2);
        m[(1, 0)] = Complex64::new(2f64.sqrt(), 0.0);
        m[(0, 1)] = Complex64::new(2f64.sqrt(), 0.0);
        let s = ScatteringMatrix::new(m, 1).unwrap();
        assert_relative_eq!(s.min_eig_ss_dagger(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(s.unitarity_violation(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn dimension_check() {
        assert!(ScatteringMatrix::new(DMatrix::zeros(3, 3), 1).is_err());
        assert!(ScatteringMatrix::new(DMatrix::zeros(2, 2), 0).is_err());
    }

    proptest! {
        #[test]
        fn snr_invariant_under_row_phase(phase in 0.0f64..std::f64::consts::TAU) {
            // multiplying receiver row beta by a unit-modulus phase scales
            // numerator and denominator identically
            let mut m = DMatrix::zeros(4, 4);
            let vals = [0.3, -0.4, 0.25, 0.6, 0.1, -0.2, 0.45, 0.05];
            for (k, &v) in vals.iter().enumerate() {
                m[(2 + k / 4, k % 4)] = Complex64::new(v, 0.5 * v);
            }
            let s0 = ScatteringMatrix::new(m.clone(), 2).unwrap();
            let base = snr_instance(&s0, 1, 0, 2.0).unwrap();
            let rot = Complex64::from_polar(1.0, phase);
            for c in 0..4 {
                m[(2, c)] *= rot;
            }
            let s1 = ScatteringMatrix::new(m, 2).unwrap();
            let rotated = snr_instance(&s1, 1, 0, 2.0).unwrap();
            prop_assert!((base - rotated).abs() <= 1e-12 * base.max(1.0));
        }
    }
}
