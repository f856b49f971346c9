//! Quadrature helpers: Gauss–Legendre panels and polar rules for
//! integrands concentrated near a point.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

use crate::{vec2, Vec2, TWO_PI};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    static RULE16: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    let build = |n: usize| {
        let mut v = GaussLegendre::new(NonZeroUsize::new(n).expect("positive order"))
            .as_node_weight_pairs()
            .to_vec();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    if n == 16 {
        return RULE16.get_or_init(|| build(16)).clone();
    }
    build(n)
}

/// Radial panel breakpoints on `[r0, r1]`: geometric from `core` outward.
pub fn geometric_breaks(r0: f64, r1: f64, core: f64, ratio: f64) -> Vec<f64> {
    let mut b = vec![r0];
    let mut r = r0.max(core);
    if r > r0 {
        b.push(r.min(r1));
    }
    while r < r1 {
        r = (r * ratio).min(r1);
        b.push(r);
    }
    b.dedup();
    b
}

/// `∫_{r0<|x-c|<r1} f` with Gauss–Legendre panels graded geometrically
/// from `core` in the radius and the trapezoid rule in angle.
pub fn polar_annulus(c: Vec2, r0: f64, r1: f64, core: f64, n_theta: usize, f: impl Fn(Vec2) -> f64) -> f64 {
    let gl = gauss_legendre(16);
    let breaks = geometric_breaks(r0, r1, core, 1.6);
    let dth = TWO_PI / n_theta as f64;
    let dirs: Vec<Vec2> = (0..n_theta).map(|k| {
        let (s, co) = (k as f64 * dth).sin_cos();
        vec2(co, s)
    }).collect();
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        for &(x, wt) in &gl {
            let r = 0.5 * (a + b) + 0.5 * (b - a) * x;
            let ring: f64 = dirs.iter().map(|d| f(c + d * r)).sum();
            total += 0.5 * (b - a) * wt * r * ring * dth;
        }
    }
    total
}

/// `n`-point Gauss–Legendre estimate of `∫_a^b f`.
pub fn gauss_panel(a: f64, b: f64, rule: &[(f64, f64)], f: &mut impl FnMut(f64) -> f64) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    rule.iter().map(|&(x, w)| w * f(c + h * x)).sum::<f64>() * h
}

/// Adaptive bisection on Gauss–Legendre panels until a panel and its two
/// halves agree to `tol` (absolute, split across levels).
pub fn adaptive(a: f64, b: f64, tol: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    fn rec(a: f64, b: f64, whole: f64, tol: f64, depth: u32, rule: &[(f64, f64)], f: &mut impl FnMut(f64) -> f64) -> f64 {
        let m = 0.5 * (a + b);
        let l = gauss_panel(a, m, rule, f);
        let r = gauss_panel(m, b, rule, f);
        if depth == 0 || (l + r - whole).abs() <= tol {
            return l + r;
        }
        rec(a, m, l, 0.5 * tol, depth - 1, rule, f) + rec(m, b, r, 0.5 * tol, depth - 1, rule, f)
    }
    let rule = gauss_legendre(10);
    let whole = gauss_panel(a, b, &rule, &mut f);
    rec(a, b, whole, tol, 24, &rule, &mut f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exactness() {
        let r = gauss_legendre(8);
        let s: f64 = r.iter().map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_kinks() {
        let v = adaptive(-1.0, 2.0, 1e-12, |x: f64| x.abs());
        assert!((v - 2.5).abs() < 1e-11);
    }

    #[test]
    fn polar_annulus_area() {
        let a = polar_annulus(vec2(0.3, 0.1), 0.1, 0.5, 0.01, 32, |_| 1.0);
        assert!((a - std::f64::consts::PI * 0.24).abs() < 1e-13);
    }
}
