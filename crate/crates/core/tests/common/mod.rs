//! Shared test oracles, independent of the implementation paths they check:
//! adaptive Simpson quadrature on the real line and direct closed-form
//! soliton expressions.

#![allow(dead_code)]

/// Adaptive Simpson quadrature with interval-halving error control. The
/// per-half tolerance is floored near machine epsilon so the recursion
/// always terminates.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            let half_tol = (0.5 * tol).max(5e-17);
            recurse(f, a, fa, m, fm, flm, left, half_tol, depth - 1)
                + recurse(f, m, fm, b, fb, frm, right, half_tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(a, fa, b, fb, fm);
    recurse(f, a, fa, b, fb, fm, whole, tol, 20)
}

/// Integrate a rapidly decaying function over the whole line: truncate at
/// `span` (the soliton family decays like `exp(-sqrt(c)|x|)`) and seed the
/// adaptive rule on width-2 panels so no localized feature can hide between
/// the initial sample points.
pub fn line_integral(f: impl Fn(f64) -> f64, span: f64) -> f64 {
    let panels = (span.abs().ceil() as i64).max(1);
    let width = span / panels as f64;
    let mut total = 0.0;
    for i in -panels..panels {
        let a = i as f64 * width;
        total += adaptive_simpson(&f, a, a + width, 1e-14);
    }
    total
}

/// `phi_c(y) = 3c / (2 cosh^2(sqrt(c) y / 2))`, straight from the formula.
pub fn phi(c: f64, y: f64) -> f64 {
    let s = (0.5 * c.sqrt() * y).cosh();
    1.5 * c / (s * s)
}

/// `d/dy phi_c(y)` by hand.
pub fn phi_x(c: f64, y: f64) -> f64 {
    let z = 0.5 * c.sqrt() * y;
    -1.5 * c * c.sqrt() * z.tanh() / z.cosh().powi(2)
}

/// `d/dc phi_c(y)` by hand.
pub fn phi_c_deriv(c: f64, y: f64) -> f64 {
    let z = 0.5 * c.sqrt() * y;
    let sech2 = 1.0 / z.cosh().powi(2);
    1.5 * sech2 * (1.0 - z * z.tanh())
}

/// `d/dy d/dc phi_c(y)` by hand (for the H1 part of the g oracle).
pub fn phi_c_deriv_x(c: f64, y: f64) -> f64 {
    // d/dz [ (3/2) sech^2 z (1 - z tanh z) ] * dz/dy, dz/dy = sqrt(c)/2
    let z = 0.5 * c.sqrt() * y;
    let sech2 = 1.0 / z.cosh().powi(2);
    let t = z.tanh();
    let dz = 1.5 * sech2 * (-3.0 * t + 2.0 * z * t * t - z * sech2);
    dz * 0.5 * c.sqrt()
}
