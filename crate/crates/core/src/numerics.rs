//! Small numerical toolkit: standard normal functions, bracketed root
//! search, golden-section search, Gauss-Legendre quadrature and finite
//! differences.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::sync::OnceLock;

use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{ModelError, Result};

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal survival function, accurate in the upper tail.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal quantile, polished with two Newton steps on the
/// tail-appropriate side.
pub fn norm_inv_cdf(p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
    if p <= 0.0 || p >= 1.0 {
        return -SQRT_2 * erfc_inv(2.0 * p);
    }
    let mut x = -SQRT_2 * erfc_inv(2.0 * p);
    for _ in 0..2 {
        let resid = if p < 0.5 { norm_cdf(x) - p } else { (1.0 - p) - norm_sf(x) };
        x -= resid / norm_pdf(x);
    }
    x
}

/// `x Φ(x) + φ(x)`, the antiderivative of `Φ`.
pub(crate) fn norm_cdf_integral(x: f64) -> f64 {
    x * norm_cdf(x) + norm_pdf(x)
}

pub const BISECTION_MAX_ITER: usize = 200;

/// Bisection for a monotone function on `[lo, hi]` with a sign change.
/// Returns the midpoint once the bracket is narrower than `tol`.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(ModelError::RootNonconvergence(format!(
            "no sign change on [{lo}, {hi}]"
        )));
    }
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(ModelError::RootNonconvergence(format!(
        "bisection exceeded {BISECTION_MAX_ITER} iterations"
    )))
}

/// Golden-section search for the maximum of a unimodal function on
/// `[lo, hi]`. Returns `(argmax, max)`.
pub fn golden_max<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

const GL_ORDER: usize = 10;

fn gauss_legendre_nodes() -> &'static [(f64, f64); GL_ORDER] {
    static NODES: OnceLock<[(f64, f64); GL_ORDER]> = OnceLock::new();
    NODES.get_or_init(|| {
        // Newton iteration on P_n from the Chebyshev initial guesses.
        let n = GL_ORDER;
        let mut out = [(0.0, 0.0); GL_ORDER];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            out[i] = (-x, w);
            out[n - 1 - i] = (x, w);
        }
        out
    })
}

/// Composite Gauss-Legendre quadrature of `f` over `[a, b]` split into
/// `panels` equal panels.
pub fn integrate<F>(mut f: F, a: f64, b: f64, panels: usize) -> f64
where
    F: FnMut(f64) -> f64,
{
    let nodes = gauss_legendre_nodes();
    let width = (b - a) / panels as f64;
    let half = 0.5 * width;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * width;
        let mut s = 0.0;
        for &(x, w) in nodes {
            s += w * f(mid + half * x);
        }
        total += s * half;
    }
    total
}

/// Derivative by central differences with a relative step, falling back to
/// a second-order one-sided stencil when `x - h` would cross `lower`.
pub fn derivative<F>(mut f: F, x: f64, rel_step: f64, lower: Option<f64>) -> f64
where
    F: FnMut(f64) -> f64,
{
    let h = rel_step * x.abs().max(1.0);
    match lower {
        Some(lb) if x - h < lb => (-3.0 * f(x) + 4.0 * f(x + h) - f(x + 2.0 * h)) / (2.0 * h),
        _ => (f(x + h) - f(x - h)) / (2.0 * h),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normal_quantile_inverts_cdf() {
        for &p in &[1e-6, 0.01, 0.3, 0.5, 0.7, 0.975, 1.0 - 1e-9] {
            assert_relative_eq!(norm_cdf(norm_inv_cdf(p)), p, max_relative = 1e-12);
        }
        assert_relative_eq!(norm_inv_cdf(0.7), 0.524_400_512_708_041, epsilon = 1e-12);
    }

    #[test]
    fn quadrature_is_exact_for_polynomials_and_accurate_for_gaussians() {
        assert_relative_eq!(integrate(|x| x.powi(7), 0.0, 2.0, 1), 32.0, max_relative = 1e-13);
        assert_relative_eq!(integrate(norm_pdf, -10.0, 10.0, 40), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn golden_section_finds_interior_maximum() {
        let (x, fx) = golden_max(|x| -(x - 0.3).powi(2), 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-9);
        assert!(fx.abs() < 1e-18);
    }

    #[test]
    fn bisection_requires_a_bracket() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
        let r = bisect(|x| x.powi(3) - 2.0, 0.0, 2.0, 1e-13).unwrap();
        assert_relative_eq!(r, 2f64.cbrt(), epsilon = 1e-12);
    }

    #[test]
    fn one_sided_stencil_at_lower_bound() {
        let d = derivative(|x| (x + 1.0).ln(), 0.0, 1e-4, Some(0.0));
        assert!((d - 1.0).abs() < 1e-7);
        let d = derivative(f64::exp, 1.0, 1e-4, None);
        assert_relative_eq!(d, 1f64.exp(), max_relative = 1e-7);
    }
}
