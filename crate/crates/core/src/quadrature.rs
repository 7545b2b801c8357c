//! Adaptive Simpson integration.

const MAX_DEPTH: u32 = 50;

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
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
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Integral of `f` over `[a, b]` to roughly absolute tolerance `tol`.
///
/// The interval is first cut into a few panels so a narrow peak cannot hide
/// between the initial sample points.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    const PANELS: usize = 16;
    let h = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == PANELS { b } else { lo + h };
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = simpson(fa, fm, fb, lo, hi);
            refine(&f, lo, hi, fa, fm, fb, whole, tol / PANELS as f64, MAX_DEPTH)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_exponentials() {
        assert!((adaptive_simpson(|x| x * x * x, 0.0, 2.0, 1e-12) - 4.0).abs() < 1e-12);
        let e = adaptive_simpson(f64::exp, 0.0, 1.0, 1e-12);
        assert!((e - (std::f64::consts::E - 1.0)).abs() < 1e-11);
    }

    #[test]
    fn narrow_gaussian_peak_at_the_endpoint() {
        let w: f64 = 1e-4;
        let f = |s: f64| (-s * s / (4.0 * w)).exp() / (std::f64::consts::PI * w).sqrt();
        let v = adaptive_simpson(f, 0.0, 10.0, 1e-10);
        assert!((v - 1.0).abs() < 1e-8, "{v}");
    }
}
