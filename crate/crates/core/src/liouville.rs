//! Entire solutions of the Liouville equation `Δv + e^v = 0`, the
//! linearized operator at `v_{0,0}`, its kernel, and the local bubble
//! profile used near blow-up points.

use serde::{Deserialize, Serialize};

use crate::quad::polar_annulus;
use crate::{vec2, Error, Result, Vec2, EIGHT_PI};

/// `v_{μ,a}(z) = log(8e^μ / (1 + e^μ |z + a|²)²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntireBubble {
    pub mu: f64,
    pub a: Vec2,
}

impl EntireBubble {
    pub fn new(mu: f64, a: Vec2) -> Self {
        Self { mu, a }
    }

    pub fn center(&self) -> Vec2 {
        -self.a
    }

    pub fn value(&self, z: Vec2) -> f64 {
        let e = self.mu.exp();
        (8.0 * e).ln() - 2.0 * (e * (z + self.a).norm_squared()).ln_1p()
    }

    pub fn grad(&self, z: Vec2) -> Vec2 {
        let e = self.mu.exp();
        let d = z + self.a;
        -d * (4.0 * e / (1.0 + e * d.norm_squared()))
    }

    /// `∫_{|z + a| < R} e^v`: polar quadrature plus the analytic tail
    /// `8π / (1 + R²e^μ)`, which together recover `8π`.
    pub fn mass(&self, radius: f64) -> Result<f64> {
        if !(radius > 0.0) {
            return Err(Error::Argument("truncation radius must be positive".into()));
        }
        let core = 0.25 * (-0.5 * self.mu).exp();
        let inner = polar_annulus(self.center(), 0.0, radius, core.min(radius), 16, |z| self.value(z).exp());
        Ok(inner + self.tail(radius))
    }

    /// Mass outside the truncation disk.
    pub fn tail(&self, radius: f64) -> f64 {
        EIGHT_PI / (1.0 + radius * radius * self.mu.exp())
    }
}

/// `Y₀ = (1 - |z|²)/(1 + |z|²)`, `Y₁ = z₁/(1 + |z|²)`, `Y₂ = z₂/(1 + |z|²)`,
/// and their localized versions `ψ_{j,i}(z) = Y_i(√h z)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelFunctions {
    pub index: usize,
    pub h: f64,
}

impl KernelFunctions {
    /// Plain `Y_i`.
    pub fn y(index: usize) -> Self {
        Self { index, h: 1.0 }
    }

    pub fn value(&self, z: Vec2) -> f64 {
        kernel_value(self.index, self.h, z)
    }
}

/// `ψ_i(z) = Y_i(√h z)`.
pub fn kernel_value(i: usize, h: f64, z: Vec2) -> f64 {
    let w = z * h.sqrt();
    let d = 1.0 + w.norm_squared();
    match i {
        0 => (1.0 - w.norm_squared()) / d,
        1 => w.x / d,
        2 => w.y / d,
        _ => panic!("kernel index must be 0, 1 or 2"),
    }
}

/// Uniform square grid `[-R, R]²` used for operator residuals in
/// scaled coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SquareGrid {
    pub n: usize,
    pub half_width: f64,
}

impl SquareGrid {
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        let h = self.spacing();
        vec2(-self.half_width + i as f64 * h, -self.half_width + j as f64 * h)
    }

    pub fn sample(&self, f: impl Fn(Vec2) -> f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n * self.n);
        for j in 0..self.n {
            for i in 0..self.n {
                v.push(f(self.node(i, j)));
            }
        }
        v
    }

    /// Five-point Laplacian plus `c(z) φ` on interior nodes, zero on the rim.
    pub fn apply(&self, phi: &[f64], c: impl Fn(Vec2) -> f64) -> Vec<f64> {
        let n = self.n;
        let h2 = self.spacing().powi(2);
        let mut out = vec![0.0; n * n];
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let k = j * n + i;
                let lap = (phi[k + 1] + phi[k - 1] + phi[k + n] + phi[k - n] - 4.0 * phi[k]) / h2;
                out[k] = lap + c(self.node(i, j)) * phi[k];
            }
        }
        out
    }
}

/// Discrete `Lφ = Δφ + 8(1 + |z|²)⁻² φ` on a square grid.
pub fn apply_linearized(grid: &SquareGrid, phi: &[f64]) -> Result<Vec<f64>> {
    if grid.n < 3 || phi.len() != grid.n * grid.n {
        return Err(Error::Argument("field does not match the grid".into()));
    }
    // at least 16 nodes across the unit core
    if grid.spacing() > 2.0 / 16.0 {
        return Err(Error::Resolution(format!("spacing {} leaves fewer than 16 nodes across the core", grid.spacing())));
    }
    Ok(grid.apply(phi, |z| 8.0 / (1.0 + z.norm_squared()).powi(2)))
}

/// Local bubble `U(x) = log(e^μ / (1 + (λh₀/8) e^μ |x - x*|²)²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BubbleProfile {
    /// Peak value `μ` of `U`, reached at `center`.
    pub mu: f64,
    pub center: Vec2,
    pub h0: f64,
    pub lambda: f64,
}

impl BubbleProfile {
    pub fn new(mu: f64, center: Vec2, h0: f64, lambda: f64) -> Result<Self> {
        if !(h0 > 0.0) {
            return Err(Error::Argument(format!("weight value h0 = {h0} must be positive")));
        }
        Ok(Self { mu, center, h0, lambda })
    }

    fn k(&self) -> f64 {
        self.lambda * self.h0 / 8.0 * self.mu.exp()
    }

    pub fn value(&self, x: Vec2) -> f64 {
        self.mu - 2.0 * (self.k() * (x - self.center).norm_squared()).ln_1p()
    }

    pub fn grad(&self, x: Vec2) -> Vec2 {
        let k = self.k();
        let d = x - self.center;
        -d * (4.0 * k / (1.0 + k * d.norm_squared()))
    }
}

/// `U(x)` for the given profile parameters.
pub fn profile_u(p: &BubbleProfile, x: Vec2) -> Result<f64> {
    if !(p.h0 > 0.0) {
        return Err(Error::Argument(format!("weight value h0 = {} must be positive", p.h0)));
    }
    Ok(p.value(x))
}

/// Center `x*` with `∇U(x_peak) = ∇log h(x_peak)`, by the fixed-point
/// iteration `d ← -g(1 + k|d|²)/(4k)` on `d = x_peak - x*`.
pub fn shifted_center(x_peak: Vec2, mu: f64, lambda: f64, h0: f64, grad_log_h: Vec2) -> Result<Vec2> {
    if !(h0 > 0.0) {
        return Err(Error::Argument(format!("weight value h0 = {h0} must be positive")));
    }
    let k = lambda * h0 / 8.0 * mu.exp();
    let g = grad_log_h;
    // |d| solves k|g||d|² - 4k|d| + |g| = 0, real only when 4k ≥ |g|²
    if g.norm_squared() > 4.0 * k {
        return Err(Error::Convergence(format!("no shifted center: |grad log h|² = {} exceeds 4k = {}", g.norm_squared(), 4.0 * k)));
    }
    let mut d = Vec2::zeros();
    for _ in 0..50 {
        let next = -g * ((1.0 + k * d.norm_squared()) / (4.0 * k));
        let step = (next - d).norm();
        d = next;
        if !d.iter().all(|v| v.is_finite()) {
            break;
        }
        if step <= 1e-15 * (1.0 + d.norm()) {
            return Ok(x_peak - d);
        }
    }
    Err(Error::Convergence(format!("shifted center iteration failed for mu = {mu}, |grad log h| = {}", g.norm())))
}
