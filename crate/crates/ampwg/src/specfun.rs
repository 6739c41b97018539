//! Special functions shared by every closed form: the incomplete gamma
//! function `Γ(0;x)` (the exponential integral E1), its overflow-safe
//! product `eˣΓ(0;x)`, and the Gaussian-state entropy `g(x)`.

use thiserror::Error;

/// Euler's constant to full double precision.
pub const EULER_GAMMA: f64 = 0.5772156649015329;

const LN_2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecFunError {
    #[error("domain error: {func} requires {requirement}, got {value}")]
    Domain {
        func: &'static str,
        requirement: &'static str,
        value: f64,
    },
}

/// Incomplete gamma function `Γ(0;x) = ∫ₓ^∞ t⁻¹ e⁻ᵗ dt` for `x > 0`.
///
/// Power series below the crossover at `x = 1`, backward-recurrence
/// continued fraction above it. Relative accuracy is better than 1e-12
/// over `[1e-12, 700]`; for larger `x` the value underflows to 0.
pub fn gamma0(x: f64) -> Result<f64, SpecFunError> {
    if !(x > 0.0) {
        return Err(SpecFunError::Domain {
            func: "gamma0",
            requirement: "x > 0",
            value: x,
        });
    }
    if x <= 1.0 {
        Ok(e1_series(x))
    } else {
        Ok((-x).exp() * e1_cf_scaled(x))
    }
}

/// `eˣ·Γ(0;x)` for `x > 0`, computed without ever forming `eˣ` when
/// `x > 1`, so it stays finite up to at least `x = 1e6`.
pub fn exp_gamma0(x: f64) -> Result<f64, SpecFunError> {
    if !(x > 0.0) {
        return Err(SpecFunError::Domain {
            func: "exp_gamma0",
            requirement: "x > 0",
            value: x,
        });
    }
    if x <= 1.0 {
        Ok(x.exp() * e1_series(x))
    } else {
        Ok(e1_cf_scaled(x))
    }
}

/// Gaussian-state entropy `g(x) = (x+1)log₂(x+1) − x log₂x` in bits,
/// with `g(0) = 0` by the `x log x → 0` limit.
///
/// Evaluated as `x·ln(1+1/x) + ln(1+x)` over `ln 2`, which is stable for
/// both tiny and huge arguments.
pub fn g_entropy(x: f64) -> Result<f64, SpecFunError> {
    if !(x >= 0.0) {
        return Err(SpecFunError::Domain {
            func: "g_entropy",
            requirement: "x >= 0",
            value: x,
        });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok((x * (1.0 / x).ln_1p() + x.ln_1p()) / LN_2)
}

/// Power series `E1(x) = −γ − ln x − Σ_{k≥1} (−x)ᵏ/(k·k!)`, accurate for
/// `x ≤ 1` where no cancellation occurs.
fn e1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0; // (-x)^k / k!
    for k in 1..=60 {
        term *= -x / k as f64;
        let add = -term / k as f64;
        sum += add;
        if add.abs() <= sum.abs() * 1e-17 + 1e-300 {
            break;
        }
    }
    -EULER_GAMMA - x.ln() + sum
}

/// Backward-recurrence continued fraction for `eˣE1(x)`, `x > 1`.
fn e1_cf_scaled(x: f64) -> f64 {
    let m = 20 + (80.0 / x) as usize;
    let mut t = 0.0;
    for k in (1..=m).rev() {
        let k = k as f64;
        t = k / (1.0 + k / (x + t));
    }
    1.0 / (x + t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Frozen reference values generated with an 80-digit dual-method
    /// oracle (power series and Lentz continued fraction, required to
    /// agree before freezing).
    const E1_TABLE: &[(f64, f64)] = &[
        (1e-12, 27.053805451028015),
        (1e-8, 17.843465089050833),
        (1e-4, 8.6332247045747054),
        (1e-2, 4.0379295765381138),
        (0.1, 1.8229239584193906),
        (0.33, 0.83610116145500246),
        (0.5, 0.55977359477616081),
        (1.0, 0.21938393439552027),
        (2.0, 0.04890051070806112),
        (2.5, 0.024914917870269735),
        (5.0, 0.0011482955912753258),
        (8.0, 3.7665622843924902e-5),
        (10.0, 4.1569689296853243e-6),
        (20.0, 9.8355252906498817e-11),
        (43.0, 4.8094965569500179e-21),
        (100.0, 3.6835977616820322e-46),
        (300.0, 1.7103842768045101e-133),
        (700.0, 1.4065187662340329e-307),
    ];

    const EXP_E1_TABLE: &[(f64, f64)] = &[
        (1e-6, 13.238309131365004),
        (1e-3, 6.337874070325488),
        (0.5, 0.92291063248373047),
        (1.0, 0.59634736232319407),
        (2.0, 0.36132861688822258),
        (10.0, 0.091563333939788082),
        (100.0, 0.0099019422867330184),
        (1e4, 9.999000199940024e-5),
        (1e6, 9.9999900000199999e-7),
    ];

    /// Test-side oracle: forward (modified Lentz) continued fraction,
    /// an evaluation route independent of the backward recurrence used
    /// by the implementation. Valid for x >= 0.25 or so.
    fn e1_lentz(x: f64) -> f64 {
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..100_000 {
            let a = -(i as f64) * (i as f64);
            b += 2.0;
            d = a * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + a / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = c * d;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x).exp() * h
    }

    /// Test-side oracle: Kahan-summed power series, valid while the
    /// largest term stays small enough that cancellation leaves at
    /// least 11 digits (x <= 6).
    fn e1_series_oracle(x: f64) -> f64 {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        let mut term = 1.0f64;
        for k in 1..=200 {
            term *= -x / k as f64;
            let add = -term / k as f64;
            let y = add - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            if add.abs() <= sum.abs() * 1e-18 + 1e-320 {
                break;
            }
        }
        -EULER_GAMMA - x.ln() + sum
    }

    #[test]
    fn gamma0_matches_frozen_table() {
        for &(x, want) in E1_TABLE {
            let got = gamma0(x).unwrap();
            assert_relative_eq!(got, want, max_relative = 1e-12);
        }
    }

    #[test]
    fn exp_gamma0_matches_frozen_table() {
        for &(x, want) in EXP_E1_TABLE {
            let got = exp_gamma0(x).unwrap();
            assert_relative_eq!(got, want, max_relative = 1e-12);
        }
    }

    #[test]
    fn gamma0_domain_and_underflow() {
        assert!(gamma0(0.0).is_err());
        assert!(gamma0(-1.0).is_err());
        assert!(gamma0(f64::NAN).is_err());
        // large x underflows to exactly 0
        assert_eq!(gamma0(800.0).unwrap(), 0.0);
    }

    #[test]
    fn gamma0_monotonically_decreasing() {
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let x = 10f64.powf(-6.0 + 9.0 * i as f64 / 199.0);
            let v = gamma0(x.min(700.0)).unwrap();
            assert!(v < prev, "gamma0 not decreasing at x = {x}");
            prev = v;
        }
    }

    #[test]
    fn series_and_continued_fraction_agree_on_overlap() {
        // Both routes hold 1e-11 relative accuracy in f64 on [0.25, 6];
        // outside this window one of them loses digits to cancellation
        // or slow convergence, and the frozen high-precision table takes
        // over as the oracle.
        for i in 0..=120 {
            let x = 0.25 * (24f64).powf(i as f64 / 120.0);
            let a = e1_series_oracle(x);
            let b = e1_lentz(x);
            assert_relative_eq!(a, b, max_relative = 1e-11);
            assert_relative_eq!(gamma0(x).unwrap(), b, max_relative = 1e-11);
        }
    }

    #[test]
    fn backward_recurrence_matches_lentz_up_to_700() {
        for i in 0..=60 {
            let x = 1.0 * (700f64).powf(i as f64 / 60.0);
            let a = gamma0(x).unwrap();
            let b = e1_lentz(x);
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn gamma0_derivative_identity() {
        // d/dx Gamma(0;x) = -e^-x / x, central differences, h = x*1e-6
        for i in 0..100 {
            let x = 10f64.powf(-8.0 + 10.0 * i as f64 / 99.0);
            let h = x * 1e-6;
            let fd = (gamma0(x + h).unwrap() - gamma0(x - h).unwrap()) / (2.0 * h);
            let exact = -(-x).exp() / x;
            assert_relative_eq!(fd, exact, max_relative = 1e-6);
        }
    }

    #[test]
    fn exp_gamma0_small_x_divergence() {
        // e^x Gamma(0;x) -> -gamma - ln x as x -> 0+
        for &x in &[1e-6, 1e-9, 1e-12] {
            let v = exp_gamma0(x).unwrap();
            let asym = -EULER_GAMMA - x.ln();
            assert_relative_eq!(v, asym, max_relative = 1e-5);
        }
    }

    #[test]
    fn exp_gamma0_large_x_asymptotic() {
        // three-term asymptotic series 1/x - 1/x^2 + 2/x^3
        for &x in &[1e4, 1e5, 1e6] {
            let v = exp_gamma0(x).unwrap();
            let asym = 1.0 / x - 1.0 / (x * x) + 2.0 / (x * x * x);
            assert_relative_eq!(v, asym, max_relative = 1e-10);
        }
    }

    #[test]
    fn g_entropy_values_and_domain() {
        assert_eq!(g_entropy(0.0).unwrap(), 0.0);
        assert_relative_eq!(g_entropy(1.0).unwrap(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(
            g_entropy(2.0).unwrap(),
            2.7548875021634685,
            max_relative = 1e-14
        );
        assert!(g_entropy(-1e-9).is_err());
    }

    #[test]
    fn g_entropy_monotone_increasing() {
        let mut prev = -1.0;
        for i in 0..300 {
            let x = 10f64.powf(-9.0 + 18.0 * i as f64 / 299.0);
            let v = g_entropy(x).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn g_entropy_concave_on_fixed_grid() {
        // 1000 deterministic pairs drawn over [0, 1e6]
        let mut state = 0x243f_6a88_85a3_08d3u64;
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 1e6
        };
        for _ in 0..1000 {
            let (a, b) = (next(), next());
            let lhs = g_entropy(0.5 * (a + b)).unwrap();
            let rhs = 0.5 * (g_entropy(a).unwrap() + g_entropy(b).unwrap());
            assert!(lhs >= rhs - 1e-12 * rhs.abs().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn exp_gamma0_bracket(exp in -9.0f64..8.0) {
            // standard E1 bracket: 1/(x+1) < e^x E1(x) < 1/x
            let x = 10f64.powf(exp);
            let v = exp_gamma0(x).unwrap();
            prop_assert!(v > 1.0 / (x + 1.0));
            prop_assert!(v < 1.0 / x);
        }

        #[test]
        fn g_concavity_random_pairs(a in 0.0f64..1e6, b in 0.0f64..1e6) {
            let lhs = g_entropy(0.5 * (a + b)).unwrap();
            let rhs = 0.5 * (g_entropy(a).unwrap() + g_entropy(b).unwrap());
            prop_assert!(lhs >= rhs - 1e-12 * rhs.abs().max(1.0));
        }
    }
}
