//! The weight `h(x) = ĥ(x) exp(-4π Σ α_i G(x, p_i))`.

use serde::{Deserialize, Serialize};

use crate::green::GreenEvaluator;
use crate::{vec2, Error, Mat2, Result, Vec2, FOUR_PI};

/// `log ĥ` as a polynomial `Σ c x^i y^j`; the empty polynomial is `ĥ ≡ 1`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogPoly {
    /// `(i, j, c)` triples.
    pub terms: Vec<(u32, u32, f64)>,
}

impl LogPoly {
    pub fn constant(c: f64) -> Self {
        Self { terms: vec![(0, 0, c)] }
    }

    /// `|x|²`, i.e. `ĥ = e^{|x|²}`.
    pub fn radial_quadratic(a: f64) -> Self {
        Self { terms: vec![(2, 0, a), (0, 2, a)] }
    }

    fn mono(p: f64, k: u32, d: u32) -> f64 {
        if d > k {
            return 0.0;
        }
        let mut c = 1.0;
        for t in 0..d {
            c *= (k - t) as f64;
        }
        c * p.powi((k - d) as i32)
    }

    /// `∂^{dx}_x ∂^{dy}_y` of the polynomial.
    pub fn deriv(&self, p: Vec2, dx: u32, dy: u32) -> f64 {
        self.terms
            .iter()
            .map(|&(i, j, c)| c * Self::mono(p.x, i, dx) * Self::mono(p.y, j, dy))
            .sum()
    }

    pub fn value(&self, p: Vec2) -> f64 {
        self.deriv(p, 0, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vortex {
    pub point: [f64; 2],
    pub alpha: f64,
}

impl Vortex {
    pub fn p(&self) -> Vec2 {
        vec2(self.point[0], self.point[1])
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    #[serde(default)]
    pub log_hat: LogPoly,
    #[serde(default)]
    pub vortices: Vec<Vortex>,
}

/// `h` together with derivatives of `log h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightJet {
    pub h: f64,
    pub log_h: f64,
    pub grad: Vec2,
    pub hess: Mat2,
    /// `Δ log h`, equal to `Δ log ĥ` away from the vortices.
    pub lap: f64,
}

impl WeightSpec {
    pub fn unit() -> Self {
        Self::default()
    }

    pub fn with_log_hat(log_hat: LogPoly) -> Self {
        Self { log_hat, vortices: vec![] }
    }

    pub fn is_unit(&self) -> bool {
        self.vortices.is_empty() && self.log_hat.terms.iter().all(|t| t.2 == 0.0)
    }

    pub fn validate(&self, green: &GreenEvaluator) -> Result<()> {
        for v in &self.vortices {
            if !(v.alpha > -1.0) {
                return Err(Error::Argument(format!("vortex strength {} must exceed -1", v.alpha)));
            }
            green.domain().require_interior(v.p(), "vortex point")?;
        }
        Ok(())
    }

    fn vortex_hit(&self, green: &GreenEvaluator, x: Vec2) -> Option<&Vortex> {
        let tol = 1e-14 * green.domain().diameter();
        self.vortices.iter().find(|v| (v.p() - x).norm() <= tol)
    }

    /// `h(x)` on the closed domain.
    pub fn h(&self, green: &GreenEvaluator, x: Vec2) -> Result<f64> {
        if let Some(v) = self.vortex_hit(green, x) {
            return if v.alpha > 0.0 {
                Ok(0.0)
            } else if v.alpha == 0.0 {
                Ok(self.log_hat.value(x).exp())
            } else {
                Err(Error::Singularity(format!("h is infinite at the vortex ({}, {})", x.x, x.y)))
            };
        }
        let mut lh = self.log_hat.value(x);
        for v in &self.vortices {
            if v.alpha != 0.0 {
                lh -= FOUR_PI * v.alpha * green.green_value(x, v.p())?;
            }
        }
        Ok(lh.exp())
    }

    /// `h` with the gradient, Hessian and Laplacian of `log h` at an interior point.
    pub fn jet(&self, green: &GreenEvaluator, x: Vec2) -> Result<WeightJet> {
        if let Some(v) = self.vortex_hit(green, x) {
            if v.alpha != 0.0 {
                return Err(Error::Singularity(format!("log h is singular at the vortex ({}, {})", x.x, x.y)));
            }
        }
        let lp = &self.log_hat;
        let mut log_h = lp.value(x);
        let mut grad = vec2(lp.deriv(x, 1, 0), lp.deriv(x, 0, 1));
        let mut hess = Mat2::new(lp.deriv(x, 2, 0), lp.deriv(x, 1, 1), lp.deriv(x, 1, 1), lp.deriv(x, 0, 2));
        let lap = hess.trace();
        for v in &self.vortices {
            if v.alpha == 0.0 {
                continue;
            }
            let g = green.green_jet(x, v.p())?;
            log_h -= FOUR_PI * v.alpha * g.v;
            grad -= g.g * (FOUR_PI * v.alpha);
            hess -= g.h * (FOUR_PI * v.alpha);
        }
        Ok(WeightJet { h: log_h.exp(), log_h, grad, hess, lap })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;

    #[test]
    fn unit_weight() {
        let g = GreenEvaluator::auto(Domain::unit_disk()).unwrap();
        let w = WeightSpec::unit();
        let j = w.jet(&g, vec2(0.2, 0.1)).unwrap();
        assert_eq!(j.h, 1.0);
        assert_eq!(j.lap, 0.0);
    }

    #[test]
    fn single_vortex() {
        let g = GreenEvaluator::auto(Domain::unit_disk()).unwrap();
        let p = vec2(0.3, 0.0);
        let w = WeightSpec { log_hat: LogPoly::default(), vortices: vec![Vortex { point: [0.3, 0.0], alpha: 1.0 }] };
        let x = vec2(-0.3, 0.0);
        let expect = (-FOUR_PI * g.green_value(x, p).unwrap()).exp();
        assert!((w.h(&g, x).unwrap() - expect).abs() < 1e-15);
        assert_eq!(w.h(&g, p).unwrap(), 0.0);
        // h ~ c |x - p|² near the vortex
        let r1 = w.h(&g, p + vec2(1e-3, 0.0)).unwrap();
        let r2 = w.h(&g, p + vec2(2e-3, 0.0)).unwrap();
        assert!((r2 / r1 - 4.0).abs() < 1e-2);
        let neg = WeightSpec { log_hat: LogPoly::default(), vortices: vec![Vortex { point: [0.3, 0.0], alpha: -0.5 }] };
        assert!(matches!(neg.h(&g, p), Err(Error::Singularity(_))));
        // boundary: G = 0 so h = ĥ
        assert_eq!(w.h(&g, vec2(0.0, 1.0)).unwrap(), 1.0);
    }

    #[test]
    fn log_derivatives_match_differences() {
        let g = GreenEvaluator::auto(Domain::unit_disk()).unwrap();
        let w = WeightSpec {
            log_hat: LogPoly { terms: vec![(2, 0, 1.0), (0, 2, 1.0), (3, 0, 0.5)] },
            vortices: vec![Vortex { point: [0.3, -0.2], alpha: 0.7 }],
        };
        let x = vec2(-0.1, 0.25);
        let j = w.jet(&g, x).unwrap();
        let s = 1e-5;
        let lh = |p: Vec2| w.h(&g, p).unwrap().ln();
        let fdx = (lh(x + vec2(s, 0.0)) - lh(x - vec2(s, 0.0))) / (2.0 * s);
        assert!((fdx - j.grad.x).abs() < 1e-7);
        let fxx = (lh(x + vec2(s, 0.0)) - 2.0 * lh(x) + lh(x - vec2(s, 0.0))) / (s * s);
        assert!((fxx - j.hess[(0, 0)]).abs() < 1e-3);
        assert!((j.hess.trace() - j.lap).abs() < 1e-10);
        assert!((j.lap - (4.0 + 3.0 * x.x)).abs() < 1e-12);
    }
}
