//! Dirichlet Green function `G(x, y)` and its regular part
//! `R(x, y) = G(x, y) + (1/2π) log|x - y|`.
//!
//! Every backend computes a [`Jet`] of `R`; derivatives of `G` follow by
//! adding the explicit logarithmic part.

mod bie;
mod disk;
mod gridded;
mod rect;

use serde::{Deserialize, Serialize};

use crate::geometry::{Domain, Location, Shape};
use crate::{Error, Mat2, Result, Vec2, TWO_PI};

pub use bie::BieGreen;
pub use gridded::GridGreen;
pub use rect::RectGreen;

/// Value and derivatives of a two-point function `F(x, y)`:
/// gradient and Hessian in `x`, and mixed partials `m[(a, b)] = ∂_{x_a}∂_{y_b} F`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub g: Vec2,
    pub h: Mat2,
    pub m: Mat2,
}

impl Jet {
    fn scaled(self, s: f64) -> Self {
        Jet { v: self.v * s, g: self.g * s, h: self.h * s, m: self.m * s }
    }
}

impl std::ops::Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet { v: self.v + o.v, g: self.g + o.g, h: self.h + o.h, m: self.m + o.m }
    }
}

/// Jet of `-(1/2π) log|x - y|`.
pub fn log_jet(x: Vec2, y: Vec2) -> Jet {
    let d = x - y;
    let r2 = d.norm_squared();
    let c = -1.0 / TWO_PI;
    let g = d / r2;
    let h = (Mat2::identity() * r2 - d * d.transpose() * 2.0) / (r2 * r2);
    Jet { v: 0.5 * r2.ln(), g, h, m: -h }.scaled(c)
}

/// Robin function `x ↦ R(x, x)` with gradient and Hessian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobinJet {
    pub v: f64,
    pub g: Vec2,
    pub h: Mat2,
}

/// First (and optionally second) partials of `G` and `R` in the first argument.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreenDerivatives {
    pub grad_g: Vec2,
    pub grad_r: Vec2,
    pub hess_g: Option<Mat2>,
    pub hess_r: Option<Mat2>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenBackend {
    /// Closed form or image series where available, boundary integrals otherwise.
    #[default]
    Auto,
    /// Closed form (disk) or image series (rectangle).
    Analytic,
    /// Nyström double-layer boundary integral (smooth domains).
    Boundary,
    /// Harmonic correction solved on a Shortley–Weller grid and
    /// interpolated bilinearly.
    Grid,
}

enum Imp {
    Disk,
    Rect(RectGreen),
    Bie(BieGreen),
    Grid(GridGreen),
}

/// Green-function evaluator. Immutable apart from internally synchronized caches.
pub struct GreenEvaluator {
    domain: Domain,
    tol: f64,
    backend: GreenBackend,
    imp: Imp,
}

impl std::fmt::Debug for GreenEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreenEvaluator")
            .field("domain", &self.domain.id())
            .field("backend", &self.backend)
            .field("tol", &self.tol)
            .finish()
    }
}

impl GreenEvaluator {
    pub fn new(domain: Domain, backend: GreenBackend) -> Result<Self> {
        let (imp, backend) = match (backend, &domain.shape) {
            (GreenBackend::Auto | GreenBackend::Analytic, Shape::UnitDisk) => (Imp::Disk, GreenBackend::Analytic),
            (GreenBackend::Auto | GreenBackend::Analytic, Shape::Rectangle { x0, y0, x1, y1 }) => {
                (Imp::Rect(RectGreen::new(*x0, *y0, *x1, *y1)), GreenBackend::Analytic)
            }
            (GreenBackend::Analytic, _) => {
                return Err(Error::Capability(format!("no closed form Green function for {}", domain.id())))
            }
            (GreenBackend::Auto | GreenBackend::Boundary, _) => {
                if !domain.is_smooth() {
                    return Err(Error::Capability("boundary integrals need a smooth boundary".into()));
                }
                (Imp::Bie(BieGreen::new(domain.clone())), GreenBackend::Boundary)
            }
            (GreenBackend::Grid, _) => (Imp::Grid(GridGreen::new(domain.clone())?), GreenBackend::Grid),
        };
        let tol = match backend {
            GreenBackend::Grid => (domain.spacing / domain.diameter()).powi(2),
            _ => 1e-10,
        };
        Ok(Self { domain, tol, backend, imp })
    }

    /// Default evaluator for a domain.
    pub fn auto(domain: Domain) -> Result<Self> {
        Self::new(domain, GreenBackend::Auto)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn backend(&self) -> GreenBackend {
        self.backend
    }

    /// Relative error target of this evaluator.
    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    fn raw_jet(&self, x: Vec2, y: Vec2) -> Jet {
        match &self.imp {
            Imp::Disk => disk::jet(x, y),
            Imp::Rect(r) => r.jet(x, y),
            Imp::Bie(b) => b.jet(x, y),
            Imp::Grid(g) => g.jet(x, y),
        }
    }

    fn raw_value(&self, x: Vec2, y: Vec2) -> f64 {
        match &self.imp {
            Imp::Disk => disk::value(x, y),
            Imp::Rect(r) => r.value(x, y),
            Imp::Bie(b) => b.value(x, y),
            Imp::Grid(g) => g.value(x, y),
        }
    }

    fn check_distinct(&self, x: Vec2, y: Vec2) -> Result<()> {
        if (x - y).norm() <= 1e-14 * self.domain.diameter() {
            return Err(Error::Domain(format!("coincident points ({}, {})", x.x, x.y)));
        }
        Ok(())
    }

    /// `G(x, y)`. Zero when either point lies on the boundary.
    pub fn green_value(&self, x: Vec2, y: Vec2) -> Result<f64> {
        let lx = self.domain.locate(x);
        let ly = self.domain.locate(y);
        if lx == Location::Exterior || ly == Location::Exterior {
            return Err(Error::Domain("query point outside the domain".into()));
        }
        if lx == Location::Boundary || ly == Location::Boundary {
            return Ok(0.0);
        }
        self.check_distinct(x, y)?;
        if let Imp::Disk = self.imp {
            return Ok(disk::green(x, y));
        }
        Ok(self.raw_value(x, y) - (x - y).norm().ln() / TWO_PI)
    }

    /// `R(x, y)`; `x = y` allowed.
    pub fn regular_part(&self, x: Vec2, y: Vec2) -> Result<f64> {
        self.domain.require_interior(x, "x")?;
        self.domain.require_interior(y, "y")?;
        Ok(self.raw_value(x, y))
    }

    /// Jet of `R(x, y)`.
    pub fn regular_jet(&self, x: Vec2, y: Vec2) -> Result<Jet> {
        self.domain.require_interior(x, "x")?;
        self.domain.require_interior(y, "y")?;
        Ok(self.raw_jet(x, y))
    }

    /// Jet of `G(x, y)`, `x ≠ y`.
    pub fn green_jet(&self, x: Vec2, y: Vec2) -> Result<Jet> {
        self.domain.require_interior(x, "x")?;
        self.domain.require_interior(y, "y")?;
        self.check_distinct(x, y)?;
        Ok(self.raw_jet(x, y) + log_jet(x, y))
    }

    /// Partials of `G` and `R` in the first argument; `order` is 1 or 2.
    /// The `G` entries are NaN on the diagonal `x = y`.
    pub fn green_derivatives(&self, x: Vec2, y: Vec2, order: u8) -> Result<GreenDerivatives> {
        if order != 1 && order != 2 {
            return Err(Error::Argument(format!("derivative order must be 1 or 2, got {order}")));
        }
        let r = self.regular_jet(x, y)?;
        let gj = if self.check_distinct(x, y).is_ok() {
            r + log_jet(x, y)
        } else {
            Jet { v: f64::NAN, g: Vec2::repeat(f64::NAN), h: Mat2::repeat(f64::NAN), m: Mat2::repeat(f64::NAN) }
        };
        Ok(GreenDerivatives {
            grad_g: gj.g,
            grad_r: r.g,
            hess_g: (order == 2).then_some(gj.h),
            hess_r: (order == 2).then_some(r.h),
        })
    }

    /// `R(x, x)` with derivatives of the diagonal restriction.
    pub fn robin(&self, x: Vec2) -> Result<RobinJet> {
        let j = self.regular_jet(x, x)?;
        // R(x, y) = R(y, x), so ∇_y R = ∇_x R and ∇²_y R = ∇²_x R on the diagonal.
        Ok(RobinJet { v: j.v, g: j.g * 2.0, h: j.h * 2.0 + j.m + j.m.transpose() })
    }
}
