//! Closed-form channel capacities: per-instance and disorder-averaged
//! heterodyne capacity, per-instance and disorder-averaged Holevo
//! capacity, the fluctuation-free reference C0, the universal threshold
//! limit C_inf, and the published asymptotic approximations.
//!
//! All capacities are reported in bits per channel use; natural-log
//! intermediates are converted once at the boundary.

use crate::medium::{diffusion_averages, r_eff, MediumError, MediumParams};
use crate::quad::{self, QuadError};
use crate::specfun::{self, SpecFunError, EULER_GAMMA};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const LN_2: f64 = std::f64::consts::LN_2;

/// Below this value of sigma_bar - 1 the closed Holevo average is a
/// difference of two diverging terms and the quadrature path takes over.
const SIGMA_DELEGATE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CapacityError {
    #[error("domain error: {what} (got {value})")]
    Domain { what: &'static str, value: f64 },
    #[error(transparent)]
    Medium(#[from] MediumError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

/// How a capacity value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    HeterodyneClosed,
    HeterodyneInstance,
    HolevoClosed,
    HolevoInstance,
    C0Reference,
    CInfinity,
    Approximation,
    McOracle,
    QuadOracle,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::HeterodyneClosed => "heterodyne_closed",
            Method::HeterodyneInstance => "heterodyne_instance",
            Method::HolevoClosed => "holevo_closed",
            Method::HolevoInstance => "holevo_instance",
            Method::C0Reference => "c0_reference",
            Method::CInfinity => "c_infinity",
            Method::Approximation => "approximation",
            Method::McOracle => "mc_oracle",
            Method::QuadOracle => "quad_oracle",
        }
    }
}

/// A capacity in bits per channel use, tagged with the method that
/// produced it. `err_estimate` is 0 for exact closed forms and carries
/// the quadrature bound otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    pub bits: f64,
    pub method: Method,
    pub err_estimate: f64,
}

impl CapacityResult {
    fn exact(bits: f64, method: Method) -> Self {
        Self {
            bits,
            method,
            err_estimate: 0.0,
        }
    }
}

/// Single-instance heterodyne capacity log2(1 + R).
pub fn c_heterodyne_instance(r: f64) -> Result<CapacityResult, CapacityError> {
    if !(r >= 0.0) {
        return Err(CapacityError::Domain {
            what: "snr must be nonnegative",
            value: r,
        });
    }
    Ok(CapacityResult::exact(
        r.ln_1p() / LN_2,
        Method::HeterodyneInstance,
    ))
}

/// Rayleigh-averaged heterodyne capacity
/// C = e^(1/R_eff) Gamma(0; 1/R_eff) / ln 2.
pub fn c_heterodyne_avg(r_eff: f64) -> Result<CapacityResult, CapacityError> {
    if !(r_eff >= 0.0) {
        return Err(CapacityError::Domain {
            what: "r_eff must be nonnegative",
            value: r_eff,
        });
    }
    if r_eff == 0.0 {
        return Ok(CapacityResult::exact(0.0, Method::HeterodyneClosed));
    }
    Ok(CapacityResult::exact(
        specfun::exp_gamma0(1.0 / r_eff)? / LN_2,
        Method::HeterodyneClosed,
    ))
}

/// Fluctuation-free reference C0 = log2(1 + R_eff).
pub fn c0_reference(r_eff: f64) -> Result<CapacityResult, CapacityError> {
    if !(r_eff >= 0.0) {
        return Err(CapacityError::Domain {
            what: "r_eff must be nonnegative",
            value: r_eff,
        });
    }
    Ok(CapacityResult::exact(
        r_eff.ln_1p() / LN_2,
        Method::C0Reference,
    ))
}

/// Universal laser-threshold capacity
/// C_inf = e^(2NP0/P) Gamma(0; 2NP0/P) / ln 2, a function of the
/// dimensionless power per mode only.
pub fn c_infinity(power_per_mode: f64) -> Result<CapacityResult, CapacityError> {
    if !(power_per_mode > 0.0) {
        return Err(CapacityError::Domain {
            what: "power per mode must be positive",
            value: power_per_mode,
        });
    }
    Ok(CapacityResult::exact(
        specfun::exp_gamma0(2.0 / power_per_mode)? / LN_2,
        Method::CInfinity,
    ))
}

/// Single-instance Holevo capacity
/// C_H = g(tau P/P0 + sigma - 1) - g(sigma - 1).
pub fn c_holevo_instance(
    tau: f64,
    sigma: f64,
    power_per_p0: f64,
) -> Result<CapacityResult, CapacityError> {
    if !(tau >= 0.0) {
        return Err(CapacityError::Domain {
            what: "tau must be nonnegative",
            value: tau,
        });
    }
    if !(sigma >= 1.0) {
        return Err(CapacityError::Domain {
            what: "sigma must be at least 1",
            value: sigma,
        });
    }
    if !(power_per_p0 > 0.0) {
        return Err(CapacityError::Domain {
            what: "power_per_p0 must be positive",
            value: power_per_p0,
        });
    }
    let s = sigma - 1.0;
    let bits = specfun::g_entropy(tau * power_per_p0 + s)? - specfun::g_entropy(s)?;
    Ok(CapacityResult::exact(bits, Method::HolevoInstance))
}

/// Holevo integrand after the substitution tau = tau_bar * u, in bits:
/// g(a u + s) - g(s) with a = tau_bar P/P0 and s = sigma_bar - 1.
pub(crate) fn holevo_integrand(a: f64, s: f64, u: f64) -> f64 {
    let base = specfun::g_entropy(s).expect("s >= 0 by construction");
    specfun::g_entropy(a * u + s).expect("argument >= 0 by construction") - base
}

/// Heterodyne integrand after the same substitution: log2(1 + R_eff u).
pub(crate) fn heterodyne_integrand(r_eff: f64, u: f64) -> f64 {
    (r_eff * u).ln_1p() / LN_2
}

/// Disorder-averaged Holevo capacity, closed form:
/// C_H = (tau_bar P/P0) log2(sigma_bar/(sigma_bar-1))
///     + (tau_bar P/(P0 ln2)) [e^(1/R) Gamma(0;1/R) - e^(1/R') Gamma(0;1/R')]
/// with R = (P/P0) tau_bar/sigma_bar and R/R' = 1 - 1/sigma_bar.
///
/// At zero amplification the closed form is indeterminate and the call
/// delegates to [`c_holevo_noamp`]; just above it (sigma_bar - 1 below
/// 1e-8) the two diverging terms cancel catastrophically and the
/// quadrature path is used instead.
pub fn c_holevo_avg(p: &MediumParams) -> Result<CapacityResult, CapacityError> {
    let da = diffusion_averages(p)?;
    if p.length_ratio() == 0.0 {
        return c_holevo_noamp(da.tau_bar, p.power_per_p0());
    }
    let a = da.tau_bar * p.power_per_p0();
    let s = da.sigma_bar - 1.0;
    if s < SIGMA_DELEGATE {
        let q = quad::exp_weighted_integral(&mut |u| holevo_integrand(a, s, u), 1e-11)?;
        return Ok(CapacityResult {
            bits: q.value,
            method: Method::HolevoClosed,
            err_estimate: q.err_estimate,
        });
    }
    Ok(CapacityResult::exact(
        c_holevo_closed_from(a, s)?,
        Method::HolevoClosed,
    ))
}

/// The averaged-Holevo closed form in the reduced coordinates
/// a = tau_bar P/P0 and s = sigma_bar - 1 > 0.
pub fn c_holevo_closed_from(a: f64, s: f64) -> Result<f64, CapacityError> {
    if !(a > 0.0) {
        return Err(CapacityError::Domain {
            what: "tau_bar P/P0 must be positive",
            value: a,
        });
    }
    if !(s > 0.0) {
        return Err(CapacityError::Domain {
            what: "sigma_bar - 1 must be positive for the closed form",
            value: s,
        });
    }
    // log2(sigma/(sigma-1)) via log1p to avoid cancellation near sigma = 1
    let first = a * (-(-1.0 / (1.0 + s)).ln_1p()) / LN_2;
    let second = a / LN_2 * (specfun::exp_gamma0((1.0 + s) / a)? - specfun::exp_gamma0(s / a)?);
    Ok(first + second)
}

/// Rayleigh-averaged Holevo capacity of an unamplified channel
/// (sigma = 1): the integral of g(tau P/P0) against the exponential
/// density with mean tau_bar, by adaptive quadrature to 1e-9 bits.
pub fn c_holevo_noamp(tau_bar: f64, power_per_p0: f64) -> Result<CapacityResult, CapacityError> {
    c_holevo_noamp_with_tol(tau_bar, power_per_p0, 1e-9)
}

/// Same as [`c_holevo_noamp`] with an explicit absolute tolerance.
pub fn c_holevo_noamp_with_tol(
    tau_bar: f64,
    power_per_p0: f64,
    abs_tol: f64,
) -> Result<CapacityResult, CapacityError> {
    if !(tau_bar > 0.0) {
        return Err(CapacityError::Domain {
            what: "tau_bar must be positive",
            value: tau_bar,
        });
    }
    if !(power_per_p0 > 0.0) {
        return Err(CapacityError::Domain {
            what: "power_per_p0 must be positive",
            value: power_per_p0,
        });
    }
    let a = tau_bar * power_per_p0;
    let q = quad::exp_weighted_integral(&mut |u| holevo_integrand(a, 0.0, u), abs_tol)?;
    Ok(CapacityResult {
        bits: q.value,
        method: Method::HolevoClosed,
        err_estimate: q.err_estimate,
    })
}

/// Weak-amplification approximation of the averaged Holevo capacity:
/// C_H(L/l_a) = C_H(0) - (4 l L^2 / 3 l_a^2) log2(pi l_a / L),
/// valid for length_ratio below 0.3.
pub fn c_holevo_initial_decrease(p: &MediumParams) -> Result<CapacityResult, CapacityError> {
    let lr = p.length_ratio();
    if lr >= 0.3 {
        return Err(CapacityError::Domain {
            what: "initial-decrease expansion requires length_ratio < 0.3",
            value: lr,
        });
    }
    let tau0 = 4.0 / 3.0 * p.mfp_ratio() / p.n_modes() as f64;
    let base = c_holevo_noamp_with_tol(tau0, p.power_per_p0(), 1e-10)?;
    let correction = if lr == 0.0 {
        0.0
    } else {
        4.0 / 3.0 * p.mfp_ratio() * lr * lr * (std::f64::consts::PI / lr).log2()
    };
    Ok(CapacityResult {
        bits: base.bits - correction,
        method: Method::Approximation,
        err_estimate: base.err_estimate,
    })
}

/// Reporting helper: ratio of the threshold capacity to the capacity
/// without amplification, with the two asymptotic factors it approaches
/// (3L/8l at small power, 1 + ln(L/l)/ln(P/NP0) at large power).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainFactorReport {
    pub ratio: f64,
    pub small_power_factor: f64,
    pub large_power_factor: f64,
}

pub fn amplification_increase_factor(
    p: &MediumParams,
) -> Result<GainFactorReport, CapacityError> {
    let no_amp = MediumParams::new(p.n_modes(), 0.0, p.mfp_ratio(), p.power_per_p0())?;
    let c0 = c_heterodyne_avg(r_eff(&no_amp))?.bits;
    let cinf = c_infinity(p.power_per_mode())?.bits;
    Ok(GainFactorReport {
        ratio: cinf / c0,
        small_power_factor: 3.0 / (8.0 * p.mfp_ratio()),
        large_power_factor: 1.0 + (1.0 / p.mfp_ratio()).ln() / p.power_per_mode().ln(),
    })
}

/// gamma/ln2, the large-R gap between C0 and the averaged heterodyne
/// capacity.
pub fn gamma_over_ln2() -> f64 {
    EULER_GAMMA / LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn params(n: u32, lr: f64, mfp: f64, p: f64) -> MediumParams {
        MediumParams::new(n, lr, mfp, p).unwrap()
    }

    #[test]
    fn heterodyne_instance_values() {
        assert_eq!(c_heterodyne_instance(0.0).unwrap().bits, 0.0);
        assert_relative_eq!(c_heterodyne_instance(1.0).unwrap().bits, 1.0);
        // identity channel: log2(1 + P/P0), independent of amplification
        assert_relative_eq!(
            c_heterodyne_instance(8.0).unwrap().bits,
            (9.0f64).log2(),
            max_relative = 1e-15
        );
        assert!(c_heterodyne_instance(-1e-12).is_err());
    }

    #[test]
    fn heterodyne_avg_reference_values() {
        // frozen by the dual-method oracle and by the quadrature
        // int_0^inf e^-u log2(1+u) du
        assert_relative_eq!(
            c_heterodyne_avg(1.0).unwrap().bits,
            0.86034738227088595,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            c_heterodyne_avg(1e4).unwrap().bits,
            12.456356041494459,
            max_relative = 1e-13
        );
        // large-R asymptote log2(R) - gamma/ln2
        let asym = (1e4f64).log2() - gamma_over_ln2();
        assert!((c_heterodyne_avg(1e4).unwrap().bits - asym).abs() < 0.0015);
        // small-R linear regime
        let c = c_heterodyne_avg(1e-6).unwrap().bits;
        assert_relative_eq!(c, 1e-6 / LN_2, max_relative = 1e-5);
        assert_eq!(c_heterodyne_avg(0.0).unwrap().bits, 0.0);
    }

    #[test]
    fn c0_and_ordering() {
        assert_relative_eq!(c0_reference(1.0).unwrap().bits, 1.0);
        assert_relative_eq!(c0_reference(3.0).unwrap().bits, 2.0);
        for i in 0..200 {
            let r = 10f64.powf(-6.0 + 12.0 * i as f64 / 199.0);
            let c = c_heterodyne_avg(r).unwrap().bits;
            let c0 = c0_reference(r).unwrap().bits;
            assert!(c < c0, "ordering violated at r_eff = {r}");
        }
        // gap approaches gamma/ln2 = 0.832746 at large R
        let gap = c0_reference(1e6).unwrap().bits - c_heterodyne_avg(1e6).unwrap().bits;
        assert!((gap - gamma_over_ln2()).abs() < 0.01);
        assert_relative_eq!(gap, 0.832727078443, max_relative = 1e-9);
    }

    #[test]
    fn c_infinity_values() {
        assert_relative_eq!(
            c_infinity(1.0).unwrap().bits,
            0.52128700371590688,
            max_relative = 1e-13
        );
        // equals the heterodyne average at the threshold snr P/(2NP0)
        assert_relative_eq!(
            c_infinity(1.0).unwrap().bits,
            c_heterodyne_avg(0.5).unwrap().bits,
            max_relative = 1e-15
        );
        // small-power linear form
        let p = 1e-6;
        assert_relative_eq!(
            c_infinity(p).unwrap().bits,
            p / (2.0 * LN_2),
            max_relative = 1e-5
        );
        // large-power log form
        let p = 1e6;
        let asym = (p / 2.0).log2() - gamma_over_ln2();
        assert!((c_infinity(p).unwrap().bits - asym).abs() < 1e-4);
        assert!(c_infinity(0.0).is_err());
    }

    #[test]
    fn holevo_instance_values() {
        assert_relative_eq!(
            c_holevo_instance(0.5, 1.0, 2.0).unwrap().bits,
            2.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            c_holevo_instance(0.5, 2.0, 2.0).unwrap().bits,
            0.7548875021634685,
            max_relative = 1e-13
        );
        assert_eq!(c_holevo_instance(0.0, 5.0, 2.0).unwrap().bits, 0.0);
        assert!(c_holevo_instance(-0.1, 1.0, 1.0).is_err());
        assert!(c_holevo_instance(0.5, 0.999, 1.0).is_err());
    }

    #[test]
    fn holevo_avg_reference_point() {
        // frozen 80-digit value for N=10, L/l_a = pi/2, l/L = 0.1, P/NP0 = 1
        let p = params(10, PI / 2.0, 0.1, 10.0);
        assert_relative_eq!(
            c_holevo_avg(&p).unwrap().bits,
            0.395036758757736,
            max_relative = 1e-12
        );
    }

    #[test]
    fn holevo_avg_threshold_error_and_delegation() {
        assert!(c_holevo_avg(&params(10, PI, 0.1, 10.0)).is_err());
        // lr = 0 delegates to the unamplified quadrature
        let p = params(10, 0.0, 0.1, 10.0);
        let a = c_holevo_avg(&p).unwrap().bits;
        let b = c_holevo_noamp(4.0 / 300.0, 10.0).unwrap().bits;
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn holevo_avg_continuous_at_zero_gain() {
        // sigma_bar - 1 ~ 7e-10 forces the quadrature path; the result
        // must sit within 1e-6 bits of the unamplified value
        let p = params(10, 1e-4, 0.1, 10.0);
        let a = c_holevo_avg(&p).unwrap();
        let b = c_holevo_noamp(4.0 / 300.0, 10.0).unwrap();
        assert!((a.bits - b.bits).abs() < 1e-6);
        assert!(a.err_estimate > 0.0);
    }

    #[test]
    fn holevo_noamp_reference_point() {
        // tau_bar = (4/3)(0.1)/10, P/P0 = 10; frozen dual-quadrature value
        let r = c_holevo_noamp(4.0 / 300.0, 10.0).unwrap();
        assert!((r.bits - 0.521513815764605).abs() < 1e-9);
        assert!(r.err_estimate <= 1e-9);
        // always above the heterodyne average at the same snr
        let het = c_heterodyne_avg(4.0 / 300.0 * 10.0).unwrap().bits;
        assert!(r.bits >= het);
        assert!(c_holevo_noamp(0.0, 1.0).is_err());
    }

    #[test]
    fn holevo_noamp_closed_form_oracle() {
        // independent closed form (a/ln2)(e^(1/a)Gamma(0;1/a) + gamma - ln a)
        // obtained by integrating g against the exponential weight by parts
        for &(tau_bar, power) in &[(4.0 / 300.0, 10.0), (0.05, 1.0), (0.002, 37.0)] {
            let a: f64 = tau_bar * power;
            let closed =
                a / LN_2 * (specfun::exp_gamma0(1.0 / a).unwrap() + EULER_GAMMA - a.ln());
            let quadv = c_holevo_noamp_with_tol(tau_bar, power, 1e-11).unwrap().bits;
            assert_relative_eq!(closed, quadv, max_relative = 1e-9);
        }
    }

    #[test]
    fn holevo_dominates_heterodyne_below_threshold() {
        for i in 0..12 {
            let lr = 0.05 + (PI - 0.1) * i as f64 / 11.0;
            for &mfp in &[0.01, 0.05, 0.14] {
                let p = params(10, lr, mfp, 10.0);
                let ch = c_holevo_avg(&p).unwrap().bits;
                let het = c_heterodyne_avg(r_eff(&p)).unwrap().bits;
                assert!(
                    ch >= het - 1e-9,
                    "holevo {ch} below heterodyne {het} at lr={lr} mfp={mfp}"
                );
            }
        }
    }

    #[test]
    fn heterodyne_avg_monotone_in_amplification() {
        let mut prev = -1.0;
        for i in 0..=64 {
            let lr = PI * i as f64 / 64.0;
            let c = c_heterodyne_avg(r_eff(&params(10, lr, 0.05, 10.0)))
                .unwrap()
                .bits;
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn initial_decrease_values() {
        // lr = 0 reproduces C_H(0) exactly
        let p0 = params(10, 0.0, 0.1, 10.0);
        let a = c_holevo_initial_decrease(&p0).unwrap().bits;
        let b = c_holevo_noamp_with_tol(4.0 / 300.0, 10.0, 1e-10).unwrap().bits;
        assert_relative_eq!(a, b, max_relative = 1e-12);

        // frozen correction at lr = 0.1, l/L = 0.1:
        // (4*0.1*0.01/3) log2(pi/0.1) = 6.63123229915e-3
        let p = params(10, 0.1, 0.1, 10.0);
        let dec = c_holevo_initial_decrease(&p).unwrap().bits;
        assert_relative_eq!(b - dec, 6.63123229915e-3, max_relative = 1e-9);

        assert!(c_holevo_initial_decrease(&params(10, 0.3, 0.1, 10.0)).is_err());
    }

    #[test]
    fn initial_decrease_tracks_exact_difference() {
        // Frozen exact differences c_holevo_avg - c_holevo_noamp at
        // mfp = 0.05, P/NP0 = 1 (80-digit oracle). The published
        // leading-log formula overstates these by 25-30%, so the frozen
        // truth is pinned here and the stated 10% comparison lives in
        // the acceptance suite.
        for &(lr, want) in &[(0.05, -7.5122578e-4), (0.1, -2.3450261e-3)] {
            let p = params(10, lr, 0.05, 10.0);
            let delta = c_holevo_avg(&p).unwrap().bits
                - c_holevo_noamp_with_tol(4.0 / 3.0 * 0.05 / 10.0, 10.0, 1e-11)
                    .unwrap()
                    .bits;
            assert_relative_eq!(delta, want, max_relative = 1e-6);
        }
    }

    #[test]
    fn gain_factor_report() {
        let p = params(10, 1.0, 0.05, 1e-3 * 10.0);
        let rep = amplification_increase_factor(&p).unwrap();
        assert_relative_eq!(rep.small_power_factor, 7.5, max_relative = 1e-15);
        // at P/NP0 = 1e-3 the ratio is close to the small-power factor
        assert!((rep.ratio / rep.small_power_factor - 1.0).abs() < 0.05);
    }
}
