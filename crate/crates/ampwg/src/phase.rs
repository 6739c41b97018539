//! Phase diagram of amplification benefit: the separatrix in the
//! (l/L, P/NP0) plane where the universal threshold capacity equals the
//! Holevo capacity of the unamplified channel. On one side (region A)
//! threshold-strength amplification raises the Holevo capacity, on the
//! other (region B) it lowers it.

use crate::capacity::{self, CapacityError};
use crate::medium::MediumParams;
use crate::specfun::EULER_GAMMA;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Residual tolerance that defines the boundary, in bits.
const BOUNDARY_TOL: f64 = 1e-9;
/// Quadrature tolerance used inside the gap; must resolve the boundary.
const GAP_QUAD_TOL: f64 = 1e-11;
/// Resolution of the sign-change scan.
const SCAN_POINTS_PER_DECADE: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhaseError {
    #[error("domain error: {what} (got {value})")]
    Domain { what: &'static str, value: f64 },
    #[error(
        "no sign change over the bracket [{low:e}, {high:e}] \
         (gap {gap_low:e} .. {gap_high:e})"
    )]
    NoSignChange {
        low: f64,
        high: f64,
        gap_low: f64,
        gap_high: f64,
    },
    #[error(transparent)]
    Capacity(#[from] CapacityError),
}

/// A solved point of the separatrix. `residual` is the capacity gap
/// C_inf - C_H(0) re-evaluated at the returned point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparatrixPoint {
    pub mfp_ratio: f64,
    pub power_per_mode: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Region {
    A,
    B,
    Boundary,
}

/// C_inf - C_H(0) in the N-free coordinates: the unamplified Holevo
/// average depends on N and P/P0 only through tau_bar P/P0
/// = (4/3)(l/L)(P/NP0).
pub fn capacity_gap(mfp_ratio: f64, power_per_mode: f64) -> Result<f64, PhaseError> {
    if !(mfp_ratio > 0.0) {
        return Err(PhaseError::Domain {
            what: "mfp_ratio must be positive",
            value: mfp_ratio,
        });
    }
    let cinf = capacity::c_infinity(power_per_mode)?;
    let ch0 =
        capacity::c_holevo_noamp_with_tol(4.0 / 3.0 * mfp_ratio, power_per_mode, GAP_QUAD_TOL)?;
    Ok(cinf.bits - ch0.bits)
}

/// Classifies a parameter point by the sign of C_inf - C_H(0), using the
/// point's own tau_bar at zero amplification and its P/P0.
pub fn region_of(p: &MediumParams) -> Result<Region, PhaseError> {
    let tau0 = 4.0 / 3.0 * p.mfp_ratio() / p.n_modes() as f64;
    let cinf = capacity::c_infinity(p.power_per_mode())?;
    let ch0 = capacity::c_holevo_noamp_with_tol(tau0, p.power_per_p0(), GAP_QUAD_TOL)?;
    let gap = cinf.bits - ch0.bits;
    Ok(if gap > BOUNDARY_TOL {
        Region::A
    } else if gap < -BOUNDARY_TOL {
        Region::B
    } else {
        Region::Boundary
    })
}

/// Small-power branch of the separatrix:
/// P/NP0 = (3L/4l) exp(-3L/8l + gamma).
pub fn small_power_asymptote(mfp_ratio: f64) -> f64 {
    3.0 / (4.0 * mfp_ratio) * (-3.0 / (8.0 * mfp_ratio) + EULER_GAMMA).exp()
}

/// l/L value the separatrix saturates to at large power: 3/(8e).
pub fn saturation_mfp() -> f64 {
    3.0 / (8.0 * std::f64::consts::E)
}

/// Root of the capacity gap in power at fixed l/L, by bisection with a
/// secant polish, to |residual| <= 1e-9 bits.
pub fn separatrix(
    mfp_ratio: f64,
    bracket: (f64, f64),
) -> Result<SeparatrixPoint, PhaseError> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(PhaseError::Domain {
            what: "bracket must satisfy 0 < low < high",
            value: lo,
        });
    }
    let mut g_lo = capacity_gap(mfp_ratio, lo)?;
    let mut g_hi = capacity_gap(mfp_ratio, hi)?;
    if g_lo == 0.0 {
        return Ok(SeparatrixPoint {
            mfp_ratio,
            power_per_mode: lo,
            residual: g_lo,
        });
    }
    if g_hi == 0.0 {
        return Ok(SeparatrixPoint {
            mfp_ratio,
            power_per_mode: hi,
            residual: g_hi,
        });
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(PhaseError::NoSignChange {
            low: lo,
            high: hi,
            gap_low: g_lo,
            gap_high: g_hi,
        });
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        // secant proposal, clamped into the bracket; bisection fallback
        let sec = lo - g_lo * (hi - lo) / (g_hi - g_lo);
        mid = if sec > lo && sec < hi {
            sec
        } else {
            0.5 * (lo + hi)
        };
        let g_mid = capacity_gap(mfp_ratio, mid)?;
        if g_mid.abs() <= BOUNDARY_TOL || (hi - lo) < f64::EPSILON * hi {
            return Ok(SeparatrixPoint {
                mfp_ratio,
                power_per_mode: mid,
                residual: g_mid,
            });
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
            g_hi = g_mid;
        }
    }
    Ok(SeparatrixPoint {
        mfp_ratio,
        power_per_mode: mid,
        residual: capacity_gap(mfp_ratio, mid)?,
    })
}

/// All separatrix roots found for one l/L value on a logarithmic power
/// scan. An empty list means no sign change up to `scan_max_power`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub mfp_ratio: f64,
    pub roots: Vec<SeparatrixPoint>,
}

/// Scans a log-power grid for sign changes (200 points per decade, the
/// curve can be steep near its small-power branch) and solves every
/// bracket found. Points where no root exists are reported with an
/// empty root list; the rest of the curve is still returned.
pub fn separatrix_curve(
    mfp_grid: &[f64],
    scan_max_power: f64,
) -> Result<Vec<CurvePoint>, PhaseError> {
    let mut out = Vec::with_capacity(mfp_grid.len());
    for &mfp in mfp_grid {
        if !(mfp > 0.0) {
            return Err(PhaseError::Domain {
                what: "mfp grid values must be positive",
                value: mfp,
            });
        }
        // start the scan safely below the small-power branch
        let p_start = (small_power_asymptote(mfp) * 1e-2).max(1e-12);
        let decades = (scan_max_power / p_start).log10();
        let n_scan = (decades * SCAN_POINTS_PER_DECADE as f64).ceil() as usize + 1;
        let mut roots = Vec::new();
        let mut prev_p = p_start;
        let mut prev_g = capacity_gap(mfp, prev_p)?;
        for i in 1..=n_scan {
            let p = p_start * (scan_max_power / p_start).powf(i as f64 / n_scan as f64);
            let g = capacity_gap(mfp, p)?;
            if prev_g.signum() != g.signum() {
                roots.push(separatrix(mfp, (prev_p, p))?);
            }
            prev_p = p;
            prev_g = g;
        }
        out.push(CurvePoint {
            mfp_ratio: mfp,
            roots,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_examples() {
        // strong power, weak disorder: amplification helps
        let p = MediumParams::new(10, 0.0, 0.05, 100.0).unwrap();
        assert_eq!(region_of(&p).unwrap(), Region::A);
        // l/L above the saturation value: it does not
        let p = MediumParams::new(10, 0.0, 0.3, 100.0).unwrap();
        assert_eq!(region_of(&p).unwrap(), Region::B);
    }

    #[test]
    fn solved_point_is_boundary_and_flips() {
        let root = separatrix(0.05, (1e-3, 1e-1)).unwrap();
        assert!(root.residual.abs() <= 1e-9);
        // re-evaluate independently
        assert!(capacity_gap(0.05, root.power_per_mode).unwrap().abs() <= 1e-9);
        let n = 10u32;
        let at = |pw: f64| MediumParams::new(n, 0.0, 0.05, pw * n as f64).unwrap();
        assert_eq!(region_of(&at(root.power_per_mode)).unwrap(), Region::Boundary);
        assert_eq!(region_of(&at(root.power_per_mode * 1.01)).unwrap(), Region::A);
        assert_eq!(region_of(&at(root.power_per_mode * 0.99)).unwrap(), Region::B);
    }

    #[test]
    fn root_at_mfp_005_matches_frozen_oracle() {
        // 80-digit bisection on the same gap function gives 0.01567298381
        let root = separatrix(0.05, (1e-3, 1e-1)).unwrap();
        assert!(
            (root.power_per_mode / 0.01567298381 - 1.0).abs() < 1e-6,
            "root {}",
            root.power_per_mode
        );
    }

    #[test]
    fn tiny_mfp_root_sits_on_the_asymptote() {
        let asym = small_power_asymptote(0.02);
        let root = separatrix(0.02, (asym / 10.0, asym * 10.0)).unwrap();
        assert!(
            (root.power_per_mode / asym - 1.0).abs() < 5e-2,
            "root {} asym {asym}",
            root.power_per_mode
        );
    }

    #[test]
    fn no_sign_change_is_reported() {
        let err = separatrix(0.2, (1e-2, 1e6)).unwrap_err();
        assert!(matches!(err, PhaseError::NoSignChange { .. }));
    }

    #[test]
    fn curve_finds_roots_below_saturation_only() {
        let curve = separatrix_curve(&[0.02, 0.05, 0.1, 0.2], 1e6).unwrap();
        assert_eq!(curve.len(), 4);
        assert_eq!(curve[0].roots.len(), 1);
        assert_eq!(curve[1].roots.len(), 1);
        assert_eq!(curve[2].roots.len(), 1);
        assert!(curve[3].roots.is_empty(), "0.2 exceeds 3/(8e) = {}", saturation_mfp());
        for cp in &curve[..3] {
            for r in &cp.roots {
                assert!(r.residual.abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn n_cancellation() {
        // the gap must not depend on N once expressed per mode
        let base = capacity_gap(0.05, 0.02).unwrap();
        for n in [1u32, 10, 100] {
            let p = MediumParams::new(n, 0.0, 0.05, 0.02 * n as f64).unwrap();
            let tau0 = 4.0 / 3.0 * p.mfp_ratio() / p.n_modes() as f64;
            let cinf = capacity::c_infinity(p.power_per_mode()).unwrap().bits;
            let ch0 = capacity::c_holevo_noamp_with_tol(tau0, p.power_per_p0(), 1e-11)
                .unwrap()
                .bits;
            let gap = cinf - ch0;
            assert!(
                (gap - base).abs() <= 1e-12 * base.abs().max(1e-6),
                "N = {n}: {gap} vs {base}"
            );
        }
    }
}
