//! Quadrature support: Gauss-Laguerre rules for integrals against the
//! weight `e⁻ᵘ` on `[0, ∞)`, an adaptive Gauss-Legendre scheme for
//! finite intervals, and the combined exponential-weight integrator used
//! by the capacity averages.

use std::f64::consts::PI;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error(
        "quadrature failed to reach abs_tol {abs_tol:e} within the iteration budget \
         (best error bound {best_err:e})"
    )]
    ConvergenceFailure { abs_tol: f64, best_err: f64 },
}

/// A quadrature value with a certified absolute error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub err_estimate: f64,
}

// ---------------------------------------------------------------------
// Gauss-Legendre
// ---------------------------------------------------------------------

/// Nodes and weights on [-1, 1] by Newton iteration on the Legendre
/// recurrence.
fn gauss_legendre_nodes(n: usize) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = (((2 * j + 1) as f64) * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        out[i] = (-z, w);
        out[n - 1 - i] = (z, w);
    }
    out
}

fn gl10() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| gauss_legendre_nodes(10))
}

fn gl_sum(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    gl10().iter().map(|&(x, w)| w * f(mid + c * x)).sum::<f64>() * c
}

/// Adaptive 10-point Gauss-Legendre with interval bisection. The error
/// estimate per interval is the defect between the parent rule and the
/// sum of its two halves, which is conservative for smooth integrands.
pub fn adaptive_integral(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Result<QuadResult, QuadError> {
    struct Seg {
        a: f64,
        b: f64,
        whole: f64,
        err: f64,
        sum2: f64,
        left: f64,
    }
    let make = |f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, whole: f64| {
        let mid = 0.5 * (a + b);
        let left = gl_sum(f, a, mid);
        let right = gl_sum(f, mid, b);
        Seg {
            a,
            b,
            whole,
            err: (left + right - whole).abs(),
            sum2: left + right,
            left,
        }
    };

    let whole = gl_sum(f, a, b);
    let mut active = vec![make(f, a, b, whole)];
    let mut done_value = 0.0;
    let mut done_err = 0.0;
    let mut n_intervals = 1usize;

    while let Some(seg) = active.pop() {
        let budget = abs_tol - done_err;
        // share the remaining budget across the still-active segments
        let local = (budget / (active.len() + 1) as f64).max(1e-300);
        if seg.err <= local || seg.b - seg.a < 1e-15 * (b - a).abs() {
            done_value += seg.sum2;
            done_err += seg.err;
            continue;
        }
        if n_intervals >= max_intervals {
            return Err(QuadError::ConvergenceFailure {
                abs_tol,
                best_err: done_err + seg.err + active.iter().map(|s| s.err).sum::<f64>(),
            });
        }
        let mid = 0.5 * (seg.a + seg.b);
        let right_whole = seg.sum2 - seg.left;
        let l = make(f, seg.a, mid, seg.left);
        let r = make(f, mid, seg.b, right_whole);
        // keep the worst segment on top so the budget is spent where needed
        active.push(if l.err >= r.err { r } else { l });
        active.push(if l.err >= r.err { l } else { r });
        let last = active.len() - 1;
        if active[last].err < active[last - 1].err {
            active.swap(last, last - 1);
        }
        n_intervals += 2;
    }
    Ok(QuadResult {
        value: done_value,
        err_estimate: done_err,
    })
}

// ---------------------------------------------------------------------
// Gauss-Laguerre
// ---------------------------------------------------------------------

/// Nodes and weights for `∫₀^∞ e⁻ˣ f(x) dx ≈ Σ wᵢ f(xᵢ)`, by Newton
/// iteration on the Laguerre recurrence.
fn gauss_laguerre_nodes(n: usize) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); n];
    let mut z = 0.0;
    let mut z_prev2 = 0.0;
    for i in 0..n {
        let z_prev = z;
        z = match i {
            0 => 3.0 / (1.0 + 2.4 * n as f64),
            1 => z + 15.0 / (1.0 + 2.5 * n as f64),
            _ => {
                let ai = (i - 1) as f64;
                z + (1.0 + 2.55 * ai) / (1.9 * ai) * (z - z_prev2)
            }
        };
        z_prev2 = z_prev;
        let mut p2 = 0.0;
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = 1.0;
            p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = (((2 * j - 1) as f64 - z) * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            pp = n as f64 * (p1 - p2) / z;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-14 * z.max(1.0) {
                break;
            }
        }
        out[i] = (z, -1.0 / (pp * n as f64 * p2));
    }
    out
}

fn laguerre_rule(n: usize) -> &'static [(f64, f64)] {
    static N40: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    static N80: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    match n {
        40 => N40.get_or_init(|| gauss_laguerre_nodes(40)),
        80 => N80.get_or_init(|| gauss_laguerre_nodes(80)),
        _ => unreachable!("only the cached rule sizes are used"),
    }
}

/// Fixed-order Gauss-Laguerre evaluation of `∫₀^∞ e⁻ᵘ f(u) du`.
pub fn laguerre_integral(f: &mut dyn FnMut(f64) -> f64, n: usize) -> f64 {
    laguerre_rule(n).iter().map(|&(x, w)| w * f(x)).sum()
}

// ---------------------------------------------------------------------
// Exponential-weight integrator
// ---------------------------------------------------------------------

/// `∫₀^∞ e⁻ᵘ f(u) du` for a nondecreasing concave `f` (all capacity
/// integrands are of this shape).
///
/// Gauss-Laguerre first (order 40 vs 80 as the error estimate); if the
/// two orders disagree, falls back to adaptive Gauss-Legendre on `[0, X]`
/// plus an analytic tail bound. Concavity makes the tail certifiable:
/// `f(u) ≤ f(X) + f'(X)(u−X)` gives `∫_X^∞ e⁻ᵘ f ≤ e⁻ˣ(f(X) + f'(X))`
/// with `f'(X) ≤ f(X) − f(X−1)`.
pub fn exp_weighted_integral(
    f: &mut dyn FnMut(f64) -> f64,
    abs_tol: f64,
) -> Result<QuadResult, QuadError> {
    let q40 = laguerre_integral(f, 40);
    let q80 = laguerre_integral(f, 80);
    let gl_err = (q40 - q80).abs();
    if gl_err <= 0.5 * abs_tol {
        return Ok(QuadResult {
            value: q80,
            err_estimate: gl_err,
        });
    }

    // tail cut: e^-X times the concave linear bound below abs_tol/10
    let mut x_cut = 45.0;
    let mut tail = f64::INFINITY;
    while x_cut < 745.0 {
        let fx = f(x_cut);
        let slope = (fx - f(x_cut - 1.0)).max(0.0);
        tail = (-x_cut).exp() * (fx.abs() + slope);
        if tail < 0.1 * abs_tol {
            break;
        }
        x_cut += 50.0;
    }
    let inner = adaptive_integral(
        &mut |u| (-u).exp() * f(u),
        0.0,
        x_cut,
        0.8 * abs_tol,
        40_000,
    )?;
    Ok(QuadResult {
        value: inner.value,
        err_estimate: inner.err_estimate + tail,
    })
}
