//! Measurements on solved or synthetic fields: peaks and local masses,
//! inner/outer errors, the `λ` expansion, linearized spectra, normalized
//! differences and their kernel projections, radial averages, the
//! Pohozaev identity, the Green representation and the kernel system.

use nalgebra::{DMatrix, DVector, Matrix3, Schur, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::Domain;
use crate::green::GreenEvaluator;
use crate::grid::{Discretization, ScalarField};
use crate::hamiltonian::{g_star, BlowupConfiguration};
use crate::liouville::{kernel_value, shifted_center, BubbleProfile};
use crate::quad::{gauss_legendre, geometric_breaks, polar_annulus};
use crate::solver::{find_peak, BranchPoint, GelfandProblem};
use crate::weight::WeightSpec;
use crate::{vec2, Error, Mat2, Result, Vec2, EIGHT_PI, TWO_PI};

/// Angular nodes for circle integrals.
pub const CIRCLE_NODES: usize = 512;

/// Point values and gradients of a field.
pub trait Sampler: Sync {
    fn value(&self, p: Vec2) -> f64;
    fn grad(&self, p: Vec2) -> Vec2;
    /// Local resolution, when the field comes from a grid.
    fn spacing(&self, _p: Vec2) -> Option<f64> {
        None
    }
}

/// Bilinear interpolation of a node field and of its nodal derivatives.
#[derive(Clone, Debug)]
pub struct GridSampler {
    pub field: ScalarField,
    dx: ScalarField,
    dy: ScalarField,
}

impl GridSampler {
    pub fn new(field: ScalarField) -> Self {
        let dx = field.derivative(0);
        let dy = field.derivative(1);
        Self { field, dx, dy }
    }
}

impl Sampler for GridSampler {
    fn value(&self, p: Vec2) -> f64 {
        self.field.interpolate(p).unwrap_or(f64::NAN)
    }
    fn grad(&self, p: Vec2) -> Vec2 {
        vec2(self.dx.interpolate(p).unwrap_or(f64::NAN), self.dy.interpolate(p).unwrap_or(f64::NAN))
    }
    fn spacing(&self, p: Vec2) -> Option<f64> {
        Some(self.field.spec.spacing_at(p))
    }
}

/// A closure sampler with centered-difference gradients.
pub struct FnSampler<F> {
    pub f: F,
    pub step: f64,
}

impl<F: Fn(Vec2) -> f64 + Sync> Sampler for FnSampler<F> {
    fn value(&self, p: Vec2) -> f64 {
        (self.f)(p)
    }
    fn grad(&self, p: Vec2) -> Vec2 {
        let s = self.step;
        vec2(
            ((self.f)(p + vec2(s, 0.0)) - (self.f)(p - vec2(s, 0.0))) / (2.0 * s),
            ((self.f)(p + vec2(0.0, s)) - (self.f)(p - vec2(0.0, s))) / (2.0 * s),
        )
    }
}

fn circle(c: Vec2, r: f64, k: usize) -> (Vec2, Vec2) {
    let (s, co) = (TWO_PI * k as f64 / CIRCLE_NODES as f64).sin_cos();
    let nu = vec2(co, s);
    (c + nu * r, nu)
}

fn check_circle(domain: Option<&Domain>, c: Vec2, r: f64) -> Result<()> {
    if let Some(d) = domain {
        if !d.contains(c) || d.distance_to_boundary(c) <= r {
            return Err(Error::Geometry(format!("circle of radius {r} around ({}, {}) leaves the domain", c.x, c.y)));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- peaks

/// Per-point data of a bubbling solution in the normalized form
/// `ũ = w - log ∫h e^w`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakRecord {
    pub location: Vec2,
    /// `μ_j = max_{B_{r₀}(q_j)} ũ`.
    pub mu: f64,
    /// `μ̂_j = μ_j + log λ`.
    pub mu_hat: f64,
    pub center: Vec2,
    pub rho: f64,
    pub h: f64,
    /// `G_j*(x_j)` for the configuration points.
    pub g_star: f64,
    /// `μ_j + ũ₀ + 2 log(λ h(x_j)/8) + G_j*(x_j)`.
    pub height_residual: f64,
    /// `e^{μ_j} h(x_j)² e^{G_j*(x_j)}`.
    pub balance: f64,
    /// `|x_j - q_j|`.
    pub offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakData {
    pub peaks: Vec<PeakRecord>,
    pub mu: f64,
    /// `ũ` on the boundary, `-log ∫h e^w`.
    pub u0: f64,
    pub lambda: f64,
    pub r0: f64,
}

impl PeakData {
    pub fn mu_hat(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.mu_hat).collect()
    }
}

pub fn peak_data(
    p: &GelfandProblem,
    green: &GreenEvaluator,
    cfg: &BlowupConfiguration,
    point: &BranchPoint,
    r0: f64,
) -> Result<PeakData> {
    let mass = p.mass(&point.w);
    let u0 = -mass.ln();
    // ∫h e^ũ = 1 by construction; check the arithmetic
    let norm = mass * u0.exp();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Numerical(format!("normalization ∫h e^ũ = {norm}")));
    }
    let lambda = point.eps2 * mass;
    let mut peaks = Vec::with_capacity(cfg.m());
    for (j, &q) in cfg.points.iter().enumerate() {
        let pk = find_peak(&p.disc, &point.w, q, r0)?;
        let mu = pk.height + u0;
        let wj = p.weight.jet(green, pk.location)?;
        let center = shifted_center(pk.location, mu, lambda, wj.h, wj.grad)?;
        let ball = p.disc.ball_weights(q, r0)?;
        let rho = point.eps2 * ball.iter().map(|&(k, c)| c * p.h[k] * point.w[k].exp()).sum::<f64>();
        let gs = g_star(green, &cfg.points, j, pk.location)?;
        peaks.push(PeakRecord {
            location: pk.location,
            mu,
            mu_hat: mu + lambda.ln(),
            center,
            rho,
            h: wj.h,
            g_star: gs,
            height_residual: mu + u0 + 2.0 * (lambda * wj.h / 8.0).ln() + gs,
            balance: (mu + gs).exp() * wj.h * wj.h,
            offset: (pk.location - q).norm(),
        });
    }
    let mu = peaks.iter().fold(f64::NEG_INFINITY, |m, r| m.max(r.mu));
    Ok(PeakData { peaks, mu, u0, lambda, r0 })
}

// ---------------------------------------------------- inner/outer errors

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerOuter {
    /// `sup |η_j|` on `B_{r₀}(x_j)`.
    pub eta_sup: Vec<f64>,
    /// `sup |φ|` and `sup |∇φ|` outside the balls `B_{r₀}(q_j)`.
    pub phi_sup: f64,
    pub phi_grad_sup: f64,
}

/// `η_j = ũ - U_j - (G_j*(x) - G_j*(x_j))` near each peak and
/// `φ = ũ - Σ ρ_j G(x, x_j) - ũ₀` away from them, on grid nodes.
pub fn inner_outer_errors(
    p: &GelfandProblem,
    green: &GreenEvaluator,
    cfg: &BlowupConfiguration,
    point: &BranchPoint,
    peaks: &PeakData,
) -> Result<InnerOuter> {
    let disc = &*p.disc;
    let pts = disc.points();
    let u: Vec<f64> = point.w.iter().map(|w| w + peaks.u0).collect();
    let mut eta_sup = Vec::with_capacity(cfg.m());
    for (j, pk) in peaks.peaks.iter().enumerate() {
        let prof = BubbleProfile::new(pk.mu, pk.center, pk.h, peaks.lambda)?;
        let mut s: f64 = 0.0;
        for (k, &x) in pts.iter().enumerate() {
            if (x - pk.location).norm() < peaks.r0 {
                let eta = u[k] - prof.value(x) - (g_star(green, &cfg.points, j, x)? - pk.g_star);
                s = s.max(eta.abs());
            }
        }
        eta_sup.push(s);
    }
    let mut phi = vec![f64::NAN; pts.len()];
    for (k, &x) in pts.iter().enumerate() {
        if cfg.points.iter().any(|&q| (x - q).norm() < peaks.r0) {
            continue;
        }
        let mut v = u[k] - peaks.u0;
        for pk in &peaks.peaks {
            v -= pk.rho * green.green_value(x, pk.location)?;
        }
        phi[k] = v;
    }
    let phi_sup = phi.iter().filter(|v| v.is_finite()).fold(0.0_f64, |m, v| m.max(v.abs()));
    let phi_grad_sup = nodal_gradient_sup(disc, &phi);
    Ok(InnerOuter { eta_sup, phi_sup, phi_grad_sup })
}

/// `sup |∇f|` by centered differences at unknowns whose four neighbours
/// carry finite values.
fn nodal_gradient_sup(disc: &Discretization, f: &[f64]) -> f64 {
    let s = &*disc.spec;
    let mut best: f64 = 0.0;
    for (row, &k) in disc.nodes.iter().enumerate() {
        let (i, j) = (k % s.nx(), k / s.nx());
        let get = |ii: usize, jj: usize| disc.unknown[s.idx(ii, jj)].map(|r| f[r]).filter(|v| v.is_finite());
        let (Some(e), Some(w), Some(n), Some(so)) = (get(i + 1, j), get(i - 1, j), get(i, j + 1), get(i, j - 1)) else {
            continue;
        };
        if !f[row].is_finite() {
            continue;
        }
        let gx = (e - w) / (s.xs[i + 1] - s.xs[i - 1]);
        let gy = (n - so) / (s.ys[j + 1] - s.ys[j - 1]);
        best = best.max(gx.hypot(gy));
    }
    best
}

// ------------------------------------------------------ λ expansion

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub lambda_gap: f64,
    pub predicted: f64,
    /// `None` when `l(q)` and `D(q)` both vanish.
    pub ratio: Option<f64>,
    pub l_term: f64,
    pub d_term: f64,
    pub mu: f64,
    /// Size of the neglected terms, `μ² e^{-3μ/2}`.
    pub remainder_scale: f64,
}

/// Leading terms of `λ - 8πm` from `μ_1`, `l(q)` and the renormalized
/// `D(q)` (the `log r` dependence of both terms cancels, so they are
/// evaluated at `r = 1`).
pub fn expansion_prediction(cfg: &BlowupConfiguration, lambda: f64, mu1: f64, l: f64, d: f64) -> (f64, f64) {
    let m = cfg.m() as f64;
    let s = cfg.h[0] * cfg.h[0] * cfg.g_star[0].exp();
    let e = (-mu1).exp();
    let l_term = 2.0 * l * e / (m * s) * (mu1 + (lambda * s).ln() - 2.0);
    let d_term = 8.0 * e / (std::f64::consts::PI * m * s) * d;
    (l_term, d_term)
}

pub fn expansion_check(cfg: &BlowupConfiguration, lambda: f64, mu1: f64, l: f64, d: f64) -> ExpansionReport {
    let (l_term, d_term) = expansion_prediction(cfg, lambda, mu1, l, d);
    let predicted = l_term + d_term;
    let gap = lambda - EIGHT_PI * cfg.m() as f64;
    let degenerate = l == 0.0 && d == 0.0;
    ExpansionReport {
        lambda_gap: gap,
        predicted,
        ratio: (!degenerate).then(|| gap / predicted),
        l_term,
        d_term,
        mu: mu1,
        remainder_scale: mu1 * mu1 * (-1.5 * mu1).exp(),
    }
}

// ------------------------------------------------- linearized spectrum

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Eigenvalues of `Δ_h + ε² h e^w` nearest the shift, by magnitude.
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub nondegenerate: bool,
}

/// The `k` eigenvalues of `L + ε² h e^w` nearest 0 by shift-invert Arnoldi
/// with explicit restarts.
pub fn linearized_spectrum(p: &GelfandProblem, w: &[f64], eps2: f64, k: usize, threshold: f64) -> Result<Spectrum> {
    let n = p.n();
    let k = k.clamp(1, n);
    let diag: Vec<f64> = p.h.iter().zip(w).map(|(h, w)| eps2 * h * w.exp()).collect();
    let lu = p.factor_shifted(&diag)?;
    let a_op = |x: &[f64]| -> Vec<f64> {
        let mut y = p.disc.apply_laplacian(x, None);
        for (i, v) in y.iter_mut().enumerate() {
            *v += diag[i] * x[i];
        }
        y
    };
    let dim = (3 * k + 20).min(n);
    let mut start: Vec<f64> = (0..n).map(|i| 1.0 + 0.3 * ((i as f64) * 0.7548776662).sin()).collect();
    let mut best = (Vec::new(), Vec::new());
    for _restart in 0..12 {
        let (vs, h) = arnoldi(&|x: &[f64]| lu.solve(x), &start, dim);
        let m = h.ncols();
        let hm = h.view((0, 0), (m, m)).into_owned();
        let mut theta: Vec<f64> = Schur::new(hm.clone()).complex_eigenvalues().iter().map(|z| z.re).collect();
        theta.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
        theta.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
        let mut vals = Vec::new();
        let mut res = Vec::new();
        let mut next = vec![0.0; n];
        for &t in theta.iter().take(k) {
            let y = null_vector(&(&hm - DMatrix::identity(m, m) * t));
            let mut x = vec![0.0; n];
            for (c, v) in vs.iter().take(m).enumerate() {
                for i in 0..n {
                    x[i] += y[c] * v[i];
                }
            }
            let lam = 1.0 / t;
            let ax = a_op(&x);
            let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let r = ax.iter().zip(&x).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt() / xn;
            vals.push(lam);
            res.push(r / lam.abs().max(1.0));
            for i in 0..n {
                next[i] += x[i] / xn;
            }
        }
        let done = res.iter().all(|&r| r < 1e-9);
        best = (vals, res);
        if done {
            break;
        }
        start = next;
    }
    let (eigenvalues, residuals) = best;
    if residuals.iter().any(|&r| !(r < 1e-6)) {
        return Err(Error::Numerical(format!("eigen-iteration stagnated, relative residuals {residuals:?}")));
    }
    let min = eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    Ok(Spectrum { nondegenerate: min > threshold, eigenvalues, residuals })
}

/// Arnoldi basis and `(m+1) × m` Hessenberg matrix for `op`.
fn arnoldi(op: &dyn Fn(&[f64]) -> Vec<f64>, start: &[f64], m: usize) -> (Vec<Vec<f64>>, DMatrix<f64>) {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let nrm = dot(start, start).sqrt();
    let mut v = vec![start.iter().map(|x| x / nrm).collect::<Vec<f64>>()];
    let mut h = DMatrix::zeros(m + 1, m);
    for j in 0..m {
        let mut w = op(&v[j]);
        // two passes of Gram–Schmidt
        for _ in 0..2 {
            for (i, vi) in v.iter().enumerate() {
                let c = dot(&w, vi);
                h[(i, j)] += c;
                for (a, b) in w.iter_mut().zip(vi) {
                    *a -= c * b;
                }
            }
        }
        let beta = dot(&w, &w).sqrt();
        h[(j + 1, j)] = beta;
        if beta < 1e-300 {
            return (v, h.view((0, 0), (j + 2, j + 1)).into_owned());
        }
        v.push(w.iter().map(|x| x / beta).collect());
    }
    (v, h)
}

fn null_vector(a: &DMatrix<f64>) -> DVector<f64> {
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let k = (0..svd.singular_values.len()).min_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j])).unwrap();
    vt.row(k).transpose()
}

// ------------------------------------------------ normalized differences

/// `ξ = (û₁ - û₂)/‖û₁ - û₂‖_∞` with `c = (e^{û₁} - e^{û₂})/(û₁ - û₂)` and
/// `g* = h (e^{û₁} - e^{û₂})/‖û₁ - û₂‖_∞` on a tensor grid.
#[derive(Clone, Debug)]
pub struct XiField {
    pub xi: ScalarField,
    pub norm: f64,
    pub c: ScalarField,
    pub g: ScalarField,
    pub h: ScalarField,
    /// `sup |Δξ + h c ξ|` at nodes whose stencil lies in the domain.
    pub identity_residual: f64,
}

/// `û = w + log ε²` on every node, `w = 0` outside the domain.
pub fn hat_field(p: &GelfandProblem, point: &BranchPoint) -> ScalarField {
    let le = point.eps2.ln();
    p.field(&point.w).map(|v| v + le)
}

/// `h` on every node: the weight inside the domain, `ĥ` elsewhere.
pub fn weight_field(spec: &std::sync::Arc<crate::grid::GridSpec>, domain: &Domain, green: &GreenEvaluator, weight: &WeightSpec) -> ScalarField {
    ScalarField::sample(spec.clone(), |x| {
        if domain.contains(x) {
            weight.h(green, x).unwrap_or_else(|_| weight.log_hat.value(x).exp())
        } else {
            weight.log_hat.value(x).exp()
        }
    })
}

/// Solution pairs at the same `ε`.
pub fn xi_field(p: &GelfandProblem, a: &BranchPoint, b: &BranchPoint, h: &ScalarField) -> Result<XiField> {
    if (a.eps - b.eps).abs() > 1e-12 * a.eps.max(b.eps) {
        return Err(Error::Argument(format!("pair has different ε: {} and {}", a.eps, b.eps)));
    }
    xi_from_hats(&p.disc.domain, &hat_field(p, a), &hat_field(p, b), h)
}

/// Any pair of `û` fields on one grid (synthetic mode).
pub fn xi_from_hats(domain: &Domain, u1: &ScalarField, u2: &ScalarField, h: &ScalarField) -> Result<XiField> {
    let spec = u1.spec.clone();
    let inside: Vec<bool> = (0..spec.len()).map(|k| domain.contains(spec.node_at(k))).collect();
    let norm = (0..spec.len()).filter(|&k| inside[k]).fold(0.0_f64, |m, k| m.max((u1.values[k] - u2.values[k]).abs()));
    if norm == 0.0 {
        return Err(Error::DegeneratePair("the two fields coincide".into()));
    }
    let xi = u1.zip(u2, |a, b| (a - b) / norm);
    let c = u1.zip(u2, |a, b| if a == b { a.exp() } else { (a.exp() - b.exp()) / (a - b) });
    let mut g = u1.zip(u2, |a, b| (a.exp() - b.exp()) / norm);
    for (gv, hv) in g.values.iter_mut().zip(&h.values) {
        *gv *= hv;
    }
    let identity_residual = laplace_residual(&xi, &g, &inside);
    Ok(XiField { xi, norm, c, g, h: h.clone(), identity_residual })
}

/// `sup |Δ_h f + g|` at interior tensor nodes with all neighbours inside.
fn laplace_residual(f: &ScalarField, g: &ScalarField, inside: &[bool]) -> f64 {
    let s = &*f.spec;
    let mut best: f64 = 0.0;
    for j in 1..s.ny() - 1 {
        for i in 1..s.nx() - 1 {
            let ks = [s.idx(i, j), s.idx(i + 1, j), s.idx(i - 1, j), s.idx(i, j + 1), s.idx(i, j - 1)];
            if !ks.iter().all(|&k| inside[k]) {
                continue;
            }
            let second = |m: f64, c: f64, p: f64, hm: f64, hp: f64| 2.0 * (hm * p - (hm + hp) * c + hp * m) / (hm * hp * (hm + hp));
            let lap = second(f.at(i - 1, j), f.at(i, j), f.at(i + 1, j), s.xs[i] - s.xs[i - 1], s.xs[i + 1] - s.xs[i])
                + second(f.at(i, j - 1), f.at(i, j), f.at(i, j + 1), s.ys[j] - s.ys[j - 1], s.ys[j + 1] - s.ys[j]);
            best = best.max((lap + g.values[ks[0]]).abs());
        }
    }
    best
}

/// Length scale `e^{-(μ̂ - log 8)/2}` of the rescaled variable `z`.
pub fn core_scale(mu_hat: f64) -> f64 {
    (-(mu_hat - 8f64.ln()) / 2.0).exp()
}

// ---------------------------------------------------- kernel projection

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionCoefficients {
    pub b: [f64; 3],
    /// Relative weighted `L²` misfit.
    pub residual: f64,
}

/// Weighted least squares of `ξ(e^{-(μ̂ - log 8)/2} z + x_j)` against
/// `ψ_i(z) = Y_i(√h z)` over `|z| ≤ R` with weight `8h/(1 + h|z|²)²`.
pub fn project_kernel(xi: &dyn Sampler, center: Vec2, mu_hat: f64, h: f64, window: f64) -> Result<ProjectionCoefficients> {
    let scale = core_scale(mu_hat);
    if let Some(dx) = xi.spacing(center) {
        // at least 8 nodes per unit of z
        if dx > scale / 8.0 {
            return Err(Error::Resolution(format!("spacing {dx:.3e} does not resolve the core scale {scale:.3e}")));
        }
    }
    let gl = gauss_legendre(16);
    let n_theta = 128;
    let breaks = geometric_breaks(0.0, window, 0.25, 1.5);
    let mut a = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    let mut ff = 0.0;
    let mut samples = Vec::new();
    for wnd in breaks.windows(2) {
        let (r0, r1) = (wnd[0], wnd[1]);
        for &(x, wt) in &gl {
            let r = 0.5 * (r0 + r1) + 0.5 * (r1 - r0) * x;
            for k in 0..n_theta {
                let (s, c) = (TWO_PI * k as f64 / n_theta as f64).sin_cos();
                let z = vec2(c, s) * r;
                let weight = 8.0 * h / (1.0 + h * r * r).powi(2) * 0.5 * (r1 - r0) * wt * r * TWO_PI / n_theta as f64;
                let f = xi.value(center + z * scale);
                let psi = Vector3::new(kernel_value(0, h, z), kernel_value(1, h, z), kernel_value(2, h, z));
                a += psi * psi.transpose() * weight;
                rhs += psi * (weight * f);
                ff += weight * f * f;
                samples.push((weight, f, psi));
            }
        }
    }
    if !ff.is_finite() {
        return Err(Error::Geometry("projection window leaves the sampled region".into()));
    }
    let b = a.lu().solve(&rhs).ok_or_else(|| Error::Numerical("singular projection system".into()))?;
    let mis: f64 = samples.iter().map(|(w, f, psi)| w * (f - psi.dot(&b)).powi(2)).sum();
    Ok(ProjectionCoefficients { b: [b[0], b[1], b[2]], residual: (mis / ff.max(f64::MIN_POSITIVE)).sqrt() })
}

// ------------------------------------------------------- radial average

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub radii: Vec<f64>,
    /// `ξ*(r) = ∫₀^{2π} ξ(r, θ) dθ`.
    pub average: Vec<f64>,
    /// `∮ (ψ ∂_ν ξ - ξ ∂_ν ψ) dσ` with the test function `ψ_{n,j}`.
    pub flux: Vec<f64>,
}

/// The radial test function `(1 - a|x - x_j|²)/(1 + a|x - x_j|²)`,
/// `a = h e^{μ̂}/8`, and its radial derivative.
fn test_function(a: f64, r: f64) -> (f64, f64) {
    let t = a * r * r;
    ((1.0 - t) / (1.0 + t), -4.0 * a * r / (1.0 + t).powi(2))
}

pub fn radial_average(xi: &dyn Sampler, domain: Option<&Domain>, center: Vec2, mu_hat: f64, h: f64, radii: &[f64]) -> Result<RadialProfile> {
    let a = h * mu_hat.exp() / 8.0;
    let mut average = Vec::with_capacity(radii.len());
    let mut flux = Vec::with_capacity(radii.len());
    let dth = TWO_PI / CIRCLE_NODES as f64;
    for &r in radii {
        check_circle(domain, center, r)?;
        let (psi, dpsi) = test_function(a, r);
        let (mut avg, mut fl) = (0.0, 0.0);
        for k in 0..CIRCLE_NODES {
            let (x, nu) = circle(center, r, k);
            let v = xi.value(x);
            avg += v * dth;
            fl += (psi * xi.grad(x).dot(&nu) - v * dpsi) * r * dth;
        }
        average.push(avg);
        flux.push(fl);
    }
    Ok(RadialProfile { radii: radii.to_vec(), average, flux })
}

// ------------------------------------------------------ Pohozaev identity

/// `B̃_j = 8 √(2/h) ∫_{ℝ²} |z|²/(1 + |z|²)³ dz`, with the radial integral by
/// quadrature plus the analytic tail beyond `|z| = 200`.
pub fn b_tilde(h: f64) -> f64 {
    let big = 200.0_f64;
    let inner = polar_annulus(Vec2::zeros(), 0.0, big, 0.5, 4, |z| {
        let s = z.norm_squared();
        s / (1.0 + s).powi(3)
    });
    // ∫_{|z|>R} ≈ 2π ∫_R^∞ (r^{-3} - 3r^{-5}) dr
    let tail = TWO_PI * (0.5 / (big * big) - 0.75 / big.powi(4));
    8.0 * (2.0 / h).sqrt() * (inner + tail)
}

/// The harmonic correction `φ_{n,j}` of the Pohozaev identity.
pub struct PohozaevSetup<'a> {
    pub green: &'a GreenEvaluator,
    pub weight: &'a WeightSpec,
    /// Peaks `x_{n,k}` of the first field.
    pub centers: Vec<Vec2>,
    pub mu_hat: Vec<f64>,
    pub lambda: f64,
}

impl PohozaevSetup<'_> {
    /// Gradient and Hessian of `φ_{n,j}` at `y`.
    fn phi(&self, j: usize, y: Vec2) -> Result<(Vec2, Mat2)> {
        let m = self.centers.len() as f64;
        let c = self.lambda / m;
        let r = self.green.regular_jet(y, self.centers[j])?;
        let (mut g, mut h) = (r.g, r.h);
        for (l, &x) in self.centers.iter().enumerate() {
            if l != j {
                let jet = self.green.green_jet(y, x)?;
                g += jet.g;
                h += jet.h;
            }
        }
        Ok((g * c, h * c))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PohozaevReport {
    pub j: usize,
    pub component: usize,
    pub radius: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub b_tilde: f64,
    pub predicted_lhs: Option<f64>,
    pub predicted_rhs: Option<f64>,
}

/// Both sides of the Pohozaev identity for `v^{(k)} = û^{(k)} - φ_{n,j}` on
/// `B_r(x_j)`, component `i ∈ {0, 1}`. `b` holds `(b_{k,1}, b_{k,2})` per
/// peak for the leading-order predictions.
#[allow(clippy::too_many_arguments)]
pub fn pohozaev_sides(
    setup: &PohozaevSetup,
    u1: &dyn Sampler,
    u2: &dyn Sampler,
    norm: f64,
    j: usize,
    r: f64,
    i: usize,
    b: Option<&[[f64; 2]]>,
) -> Result<PohozaevReport> {
    if i > 1 || j >= setup.centers.len() {
        return Err(Error::Argument("component must be 0 or 1 and j a valid peak".into()));
    }
    let dom = setup.green.domain();
    let c = setup.centers[j];
    check_circle(Some(dom), c, r)?;
    let dth = TWO_PI / CIRCLE_NODES as f64;
    let e = |v: Vec2| v[i];
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for k in 0..CIRCLE_NODES {
        let (x, nu) = circle(c, r, k);
        let (dphi, _) = setup.phi(j, x)?;
        let g1 = u1.grad(x);
        let g2 = u2.grad(x);
        let dxi = (g1 - g2) / norm;
        let dv1 = g1 - dphi;
        let dv2 = g2 - dphi;
        lhs += (nu.dot(&dxi) * e(dv1) + nu.dot(&dv2) * e(dxi) - 0.5 * (dv1 + dv2).dot(&dxi) * nu[i]) * r * dth;
        let hx = setup.weight.h(setup.green, x)?;
        rhs -= hx * (u1.value(x).exp() - u2.value(x).exp()) / norm * nu[i] * r * dth;
    }
    // volume term, radially graded toward the core
    let core = core_scale(setup.mu_hat[j]).min(0.25 * r);
    let gl = gauss_legendre(16);
    let n_theta = 256;
    for w in geometric_breaks(0.0, r, core, 1.5).windows(2) {
        let (a, bnd) = (w[0], w[1]);
        for &(t, wt) in &gl {
            let rr = 0.5 * (a + bnd) + 0.5 * (bnd - a) * t;
            for k in 0..n_theta {
                let (s, co) = (TWO_PI * k as f64 / n_theta as f64).sin_cos();
                let x = c + vec2(co, s) * rr;
                let (dphi, _) = setup.phi(j, x)?;
                let wj = setup.weight.jet(setup.green, x)?;
                let gstar = wj.h * (u1.value(x).exp() - u2.value(x).exp()) / norm;
                rhs += gstar * e(dphi + wj.grad) * 0.5 * (bnd - a) * wt * rr * TWO_PI / n_theta as f64;
            }
        }
    }
    let hj = setup.weight.h(setup.green, c)?;
    let bt = 4.0 * std::f64::consts::PI * (2.0 / hj).sqrt();
    let (predicted_lhs, predicted_rhs) = match b {
        Some(b) => {
            let (l, rr) = pohozaev_predictions(setup, j, i, b)?;
            (Some(l), Some(rr))
        }
        None => (None, None),
    };
    Ok(PohozaevReport { j, component: i, radius: r, lhs, rhs, residual: lhs - rhs, b_tilde: bt, predicted_lhs, predicted_rhs })
}

/// Leading orders of the two sides from the kernel coefficients.
fn pohozaev_predictions(setup: &PohozaevSetup, j: usize, i: usize, b: &[[f64; 2]]) -> Result<(f64, f64)> {
    let xs = &setup.centers;
    if b.len() != xs.len() {
        return Err(Error::Argument("one coefficient pair per peak is required".into()));
    }
    let bt = |k: usize| -> Result<f64> { Ok(4.0 * std::f64::consts::PI * (2.0 / setup.weight.h(setup.green, xs[k])?).sqrt()) };
    // D_{x_i} ∂_{y_h} R(y, x) at y = x_j, x = x_j is the mixed partial m[(h, i)]
    let rj = setup.green.regular_jet(xs[j], xs[j])?;
    let mut lhs = 0.0;
    for hh in 0..2 {
        lhs += (-setup.mu_hat[j] / 2.0).exp() * rj.m[(hh, i)] * b[j][hh] * bt(j)?;
    }
    for k in 0..xs.len() {
        if k == j {
            continue;
        }
        let gj = setup.green.green_jet(xs[k], xs[j])?;
        for hh in 0..2 {
            lhs += (-setup.mu_hat[k] / 2.0).exp() * gj.m[(hh, i)] * b[k][hh] * bt(k)?;
        }
    }
    lhs *= -EIGHT_PI;
    let (_, hphi) = setup.phi(j, xs[j])?;
    let wj = setup.weight.jet(setup.green, xs[j])?;
    let d2 = hphi + wj.hess;
    let rhs = bt(j)? * (-setup.mu_hat[j] / 2.0).exp() * (0..2).map(|hh| d2[(hh, i)] * b[j][hh]).sum::<f64>();
    Ok((lhs, rhs))
}

// ------------------------------------------------ Green representation

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenRepresentation {
    /// `A_j = ∫_{Ω_j} g*` over the Voronoi cells of the peaks.
    pub a: Vec<f64>,
    /// `b_{n,j,h} = ∫_{Ω_j} (y - x_j)_h g*`.
    pub b: Vec<[f64; 2]>,
    /// Sup of `ξ` minus the reconstruction outside `∪ B_θ(x_j)`.
    pub error: f64,
    /// Sup of the dipole part of the reconstruction there.
    pub dipole: f64,
}

/// Monopole and dipole moments of `g*` on the grid and the far-field
/// reconstruction `Σ A_j G(x_j, x) + Σ b_{j,h} ∂_{y_h} G(y, x)|_{y = x_j}`.
pub fn green_representation(disc: &Discretization, green: &GreenEvaluator, xi: &XiField, centers: &[Vec2], theta: f64) -> Result<GreenRepresentation> {
    for (k, &a) in centers.iter().enumerate() {
        for &b in &centers[..k] {
            if (a - b).norm() <= 2.0 * theta {
                return Err(Error::Geometry("patches around the peaks overlap".into()));
            }
        }
    }
    let m = centers.len();
    let nearest = |x: Vec2| (0..m).min_by(|&a, &b| (x - centers[a]).norm().total_cmp(&(x - centers[b]).norm())).unwrap();
    let mut a = vec![0.0; m];
    let mut b = vec![[0.0; 2]; m];
    for (row, &k) in disc.nodes.iter().enumerate() {
        let x = disc.spec.node_at(k);
        let j = nearest(x);
        let g = xi.g.values[k] * disc.quad_nodes[row];
        a[j] += g;
        b[j][0] += (x.x - centers[j].x) * g;
        b[j][1] += (x.y - centers[j].y) * g;
    }
    for (&x, &q) in disc.bpoints.iter().zip(&disc.quad_bnd) {
        let j = nearest(x);
        let g = xi.g.interpolate(x).unwrap_or(0.0) * q;
        a[j] += g;
        b[j][0] += (x.x - centers[j].x) * g;
        b[j][1] += (x.y - centers[j].y) * g;
    }
    let (mut error, mut dipole): (f64, f64) = (0.0, 0.0);
    for &k in &disc.nodes {
        let x = disc.spec.node_at(k);
        if centers.iter().any(|&c| (x - c).norm() < theta) {
            continue;
        }
        let (mut rec, mut dip) = (0.0, 0.0);
        for j in 0..m {
            // ∂_{y_h} G(y, x) at y = x_j is the x-gradient of G(x_j, ·) swapped: use the jet at (x_j, x)
            let jet = green.green_jet(centers[j], x)?;
            rec += a[j] * jet.v;
            dip += b[j][0] * jet.g.x + b[j][1] * jet.g.y;
        }
        rec += dip;
        error = error.max((xi.xi.values[k] - rec).abs());
        dipole = dipole.max(dip.abs());
    }
    Ok(GreenRepresentation { a, b, error, dipole })
}

// --------------------------------------------------------- kernel system

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSystem {
    pub vector: Vec<f64>,
    pub residual: f64,
}

/// `|D²f_m · b|` with `b = (b̂_{k,h} B̃_k)` and
/// `b̂_{k,h} = e^{(μ̂_j - μ̂_k)/2} b_{k,h}` relative to the reference peak `j`.
pub fn kernel_system_check(hessian: &DMatrix<f64>, b: &[[f64; 2]], mu_hat: &[f64], h: &[f64], j: usize) -> Result<KernelSystem> {
    let m = b.len();
    if hessian.nrows() != 2 * m || hessian.ncols() != 2 * m || mu_hat.len() != m || h.len() != m || j >= m {
        return Err(Error::Argument(format!("dimension mismatch: Hessian {}×{}, {m} peaks", hessian.nrows(), hessian.ncols())));
    }
    let mut v = DVector::zeros(2 * m);
    for k in 0..m {
        let bt = 4.0 * std::f64::consts::PI * (2.0 / h[k]).sqrt();
        let f = ((mu_hat[j] - mu_hat[k]) / 2.0).exp();
        v[2 * k] = f * b[k][0] * bt;
        v[2 * k + 1] = f * b[k][1] * bt;
    }
    let residual = (hessian * &v).norm();
    Ok(KernelSystem { vector: v.iter().copied().collect(), residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::liouville::EntireBubble;
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn b_tilde_closed_form() {
        assert!((b_tilde(1.0) - 4.0 * PI * 2f64.sqrt()).abs() < 1e-6);
        assert!((b_tilde(2.5) - 4.0 * PI * (2.0 / 2.5f64).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn projection_reproduces_kernel_functions() {
        let h = 1.7;
        let mu_hat = 9.0;
        let c = vec2(0.1, -0.2);
        let s = core_scale(mu_hat);
        for i in 0..3 {
            let f = FnSampler { f: move |x: Vec2| kernel_value(i, h, (x - c) / s), step: 1e-7 };
            let p = project_kernel(&f, c, mu_hat, h, 20.0).unwrap();
            for k in 0..3 {
                let want = if k == i { 1.0 } else { 0.0 };
                assert!((p.b[k] - want).abs() < 1e-10, "{i} {k} {:?}", p.b);
            }
            assert!(p.residual < 1e-10);
        }
    }

    #[test]
    fn radial_average_of_odd_field_vanishes() {
        let f = FnSampler { f: |x: Vec2| x.x / (1.0 + x.norm_squared()), step: 1e-6 };
        let r = radial_average(&f, None, Vec2::zeros(), 6.0, 1.0, &[0.1, 0.3]).unwrap();
        assert!(r.average.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn kernel_system_values() {
        let hs = DMatrix::identity(2, 2) * -4.0;
        let z = kernel_system_check(&hs, &[[0.0, 0.0]], &[5.0], &[1.0], 0).unwrap();
        assert_eq!(z.residual, 0.0);
        let b = [[0.3, -0.4]];
        let r = kernel_system_check(&hs, &b, &[5.0], &[1.0], 0).unwrap();
        let v = DVector::from_vec(r.vector.clone());
        assert!((r.residual - 4.0 * v.norm()).abs() < 1e-12);
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let null = kernel_system_check(&sing, &[[1.0, -1.0]], &[5.0], &[1.0], 0).unwrap();
        assert!(null.residual < 1e-12);
        assert!(kernel_system_check(&hs, &b, &[5.0, 1.0], &[1.0], 0).is_err());
    }

    #[test]
    fn pohozaev_on_exact_bubbles() {
        let g = GreenEvaluator::auto(Domain::unit_disk()).unwrap();
        let w = WeightSpec::unit();
        let mu = 4.0;
        let b1 = EntireBubble::new(mu, vec2(-0.1, 0.0));
        let b2 = EntireBubble::new(mu, vec2(0.1, 0.0));
        let u1 = FnSampler { f: move |x: Vec2| b1.value(x), step: 1e-6 };
        let u2 = FnSampler { f: move |x: Vec2| b2.value(x), step: 1e-6 };
        let setup = PohozaevSetup { green: &g, weight: &w, centers: vec![vec2(0.1, 0.0)], mu_hat: vec![mu + 8f64.ln()], lambda: EIGHT_PI };
        for i in 0..2 {
            let rep = pohozaev_sides(&setup, &u1, &u2, 1.0, 0, 0.5, i, None).unwrap();
            assert!(rep.residual.abs() < 1e-6 * (1.0 + rep.lhs.abs()), "{rep:?}");
        }
    }

    #[test]
    fn same_center_pair_projects_on_y0() {
        let d = Domain::unit_disk();
        let delta = 1e-3;
        let spec = Arc::new(GridSpec::uniform(vec2(-1.0, -1.0), vec2(1.0, 1.0), 1025));
        let hat = |dl: f64| ScalarField::sample(spec.clone(), move |x| (8.0 * dl / (dl + x.norm_squared()).powi(2)).ln());
        let h = ScalarField::sample(spec.clone(), |_| 1.0);
        let xi = xi_from_hats(&d, &hat(delta), &hat(1.1 * delta), &h).unwrap();
        let s = GridSampler::new(xi.xi.clone());
        let p = project_kernel(&s, Vec2::zeros(), (8.0 / delta).ln(), 1.0, 20.0).unwrap();
        assert!((p.b[0] - 1.0).abs() < 5e-2 && p.b[1].abs() < 5e-2 && p.b[2].abs() < 5e-2, "{p:?}");
        assert!(matches!(xi_from_hats(&d, &hat(delta), &hat(delta), &h), Err(Error::DegeneratePair(_))));
    }

    #[test]
    fn spectrum_of_laplacian_on_disk() {
        let d = Domain::unit_disk();
        let g = GreenEvaluator::auto(d.clone()).unwrap();
        let p = GelfandProblem::new(crate::solver::discretize(&d, 97).unwrap(), &g, WeightSpec::unit()).unwrap();
        let s = linearized_spectrum(&p, &vec![0.0; p.n()], 0.0, 3, 1e-8).unwrap();
        assert!((s.eigenvalues[0] + 5.7832).abs() < 0.01 * 5.7832, "{s:?}");
        assert!(s.nondegenerate);
    }
}
