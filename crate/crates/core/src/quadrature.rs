//! Small adaptive quadrature helpers used where no closed-form antiderivative
//! is available.

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || !delta.is_finite() || delta.abs() <= 15.0 * tol || delta.abs() <= 1e-15 * (left + right).abs() {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Integral of `f` over `[0, x]`, split into unit panels so that the
/// adaptive rule sees the structure of rapidly varying integrands.
pub fn integrate_from_zero<F: Fn(f64) -> f64>(f: &F, x: f64, tol: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let panels = x.ceil().max(1.0) as usize;
    let width = x / panels as f64;
    (0..panels)
        .map(|k| {
            let a = k as f64 * width;
            let b = if k + 1 == panels { x } else { a + width };
            adaptive_simpson(f, a, b, tol / panels as f64)
        })
        .sum()
}

/// Integral of `f` over `[0, inf)` using the map `x = s / (1 - s)`.
///
/// The integrand must decay fast enough for the transformed integrand to
/// vanish at `s = 1`.
pub fn integrate_half_line<F: Fn(f64) -> f64>(f: &F, tol: f64) -> f64 {
    let g = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let one_minus = 1.0 - s;
        let x = s / one_minus;
        let v = f(x) / (one_minus * one_minus);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    // Panels concentrate resolution near the origin of the original variable.
    let breaks = [0.0, 0.25, 0.5, 0.75, 0.9, 0.97, 0.99, 0.999, 1.0];
    breaks
        .windows(2)
        .map(|p| adaptive_simpson(&g, p[0], p[1], tol / 8.0))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = adaptive_simpson(&|x: f64| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12);
        assert!((v - 0.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_on_half_line() {
        let v = integrate_half_line(&|x: f64| (-2.0 * x).exp(), 1e-12);
        assert!((v - 0.5).abs() < 1e-10, "{v}");
    }

    #[test]
    fn power_decay_on_half_line() {
        // int_0^inf (1+x)^-3 dx = 1/2
        let v = integrate_half_line(&|x: f64| (1.0 + x).powi(-3), 1e-12);
        assert!((v - 0.5).abs() < 1e-9, "{v}");
    }

    #[test]
    fn from_zero_matches_closed_form() {
        let v = integrate_from_zero(&|x: f64| x.exp(), 3.5, 1e-12);
        assert!((v - (3.5f64.exp() - 1.0)).abs() < 1e-9);
    }
}
