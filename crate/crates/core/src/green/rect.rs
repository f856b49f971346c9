//! Rectangle Green function by the method of images on top of the closed
//! form for the strip `0 < x₁ < a`:
//!
//! `G_strip(z, w) = -(1/2π) log|sin(π(z - w)/2a) / sin(π(z + w̄)/2a)|`.
//!
//! Odd reflection across `x₂ = 0` and periodization by `2b` in `x₂` give
//! the rectangle. Image terms decay like `exp(-2πkb/a)`, so with `a` the
//! shorter side a handful of terms reach machine precision.

use nalgebra::Complex;

use super::Jet;
use crate::{Mat2, Vec2, TWO_PI};

type C = Complex<f64>;

#[derive(Clone, Debug)]
pub struct RectGreen {
    origin: Vec2,
    a: f64,
    b: f64,
    swap: bool,
    terms: i32,
}

/// `log sin θ` with its first two θ-derivatives (real part of the value only).
fn log_sin(th: C) -> (f64, C, C) {
    let (u, v) = (th.re, th.im);
    let su = u.sin();
    let shv = v.sinh();
    let val = 0.5 * (su * su + shv * shv).ln();
    let s = th.sin();
    let c = th.cos();
    (val, c / s, -C::new(1.0, 0.0) / (s * s))
}

/// `log(sin θ / θ)` with derivatives, accurate near θ = 0.
fn log_sinc(th: C) -> (f64, C, C) {
    if th.norm() > 0.1 {
        let (v, d1, d2) = log_sin(th);
        let inv = C::new(1.0, 0.0) / th;
        (v - th.norm().ln(), d1 - inv, d2 + inv * inv)
    } else {
        let t2 = th * th;
        let t4 = t2 * t2;
        let val = -t2 / 6.0 - t4 / 180.0 - t4 * t2 / 2835.0;
        let d1 = -th / 3.0 - t2 * th / 45.0 - t4 * th * (2.0 / 945.0);
        let d2 = -C::new(1.0 / 3.0, 0.0) - t2 / 15.0 - t4 * (2.0 / 189.0);
        (val.re, d1, d2)
    }
}

impl RectGreen {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        let (w, h) = (x1 - x0, y1 - y0);
        let swap = w > h;
        let (a, b) = if swap { (h, w) } else { (w, h) };
        let terms = ((7.0 * a / b).ceil() as i32).max(2) + 1;
        Self { origin: Vec2::new(x0, y0), a, b, swap, terms }
    }

    fn local(&self, p: Vec2) -> C {
        let d = p - self.origin;
        if self.swap {
            C::new(d.y, d.x)
        } else {
            C::new(d.x, d.y)
        }
    }

    pub fn value(&self, x: Vec2, y: Vec2) -> f64 {
        self.jet(x, y).v
    }

    pub fn jet(&self, x: Vec2, y: Vec2) -> Jet {
        let z = self.local(x);
        let w = self.local(y);
        let k0 = std::f64::consts::PI / (2.0 * self.a);
        let i = C::new(0.0, 1.0);
        let mut val = 0.0;
        let mut grad = [0.0; 2];
        let mut hess = [[0.0; 2]; 2];
        let mut mixed = [[0.0; 2]; 2];
        let cx = [C::new(1.0, 0.0), i];
        // (coefficient, argument, y₁ sign, y₂ sign, regularize)
        let mut add = |coef: f64, arg: C, s1: f64, s2: f64, sinc: bool| {
            let th = arg * k0;
            let (v, d1, d2) = if sinc { log_sinc(th) } else { log_sin(th) };
            let f1 = d1 * (coef * k0);
            let f2 = d2 * (coef * k0 * k0);
            val += coef * v;
            let dy = [C::new(s1, 0.0), i * s2];
            for a in 0..2 {
                grad[a] += (cx[a] * f1).re;
                for b in 0..2 {
                    hess[a][b] += (cx[a] * cx[b] * f2).re;
                    mixed[a][b] += (cx[a] * dy[b] * f2).re;
                }
            }
        };
        let two_b = C::new(0.0, 2.0 * self.b);
        for k in -self.terms..=self.terms {
            let shift = two_b * k as f64;
            add(1.0, z - w - shift, -1.0, -1.0, k == 0);
            add(-1.0, z + w.conj() - shift, 1.0, -1.0, false);
            add(-1.0, z - w.conj() - shift, -1.0, 1.0, false);
            add(1.0, z + w - shift, 1.0, 1.0, false);
        }
        val += k0.ln();
        let c = -1.0 / TWO_PI;
        let mut jet = Jet {
            v: c * val,
            g: Vec2::new(grad[0], grad[1]) * c,
            h: Mat2::new(hess[0][0], hess[0][1], hess[1][0], hess[1][1]) * c,
            m: Mat2::new(mixed[0][0], mixed[0][1], mixed[1][0], mixed[1][1]) * c,
        };
        if self.swap {
            let p = Mat2::new(0.0, 1.0, 1.0, 0.0);
            jet.g = p * jet.g;
            jet.h = p * jet.h * p;
            jet.m = p * jet.m * p;
        }
        jet
    }
}
