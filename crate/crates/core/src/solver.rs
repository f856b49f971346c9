//! Discrete Gel'fand problem `-Δw = ε² h e^w`, `w = 0` on the boundary:
//! damped Newton at fixed `ε`, bubble-ansatz initial guesses, and branch
//! continuation by prescribed peak height.

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::geometry::Domain;
use crate::green::GreenEvaluator;
use crate::grid::{Discretization, Grading, GridSpec, ScalarField};
use crate::hamiltonian::BlowupConfiguration;
use crate::sparse::{SparseLu, Symbolic, Triplets};
use crate::weight::WeightSpec;
use crate::{vec2, Error, Result, Vec2, EIGHT_PI};

/// Grid for the solver: at least 32 nodes across the domain.
pub fn discretize(domain: &Domain, n: usize) -> Result<Discretization> {
    discretize_with(domain, n, None)
}

/// Tensor grading around `centers` so that the spacing there is about
/// `core / 32` on an `n`-node grid; `None` when the uniform grid already is
/// that fine.
pub fn grading(domain: &Domain, n: usize, centers: &[Vec2], core: f64) -> Option<Grading> {
    let (lo, hi) = domain.bbox();
    let base = (hi - lo).max() / (n - 1) as f64;
    let ratio = (32.0 * base / core).clamp(1.0, 64.0);
    (ratio > 1.0 && !centers.is_empty()).then(|| Grading { centers: centers.to_vec(), width: 3.0 * core, ratio })
}

/// Grading for bubbles of height `μ̂` at `cfg`, used when
/// `e^{μ̂} × spacing² > 0.1`.
pub fn grading_for(domain: &Domain, n: usize, cfg: &BlowupConfiguration, mu_hat: f64) -> Option<Grading> {
    let (lo, hi) = domain.bbox();
    let base = (hi - lo).max() / (n - 1) as f64;
    if mu_hat.exp() * base * base <= 0.1 {
        return None;
    }
    let hmax = cfg.h.iter().fold(0.0_f64, |m, &h| m.max(h));
    // core radius of the bubble in physical units
    let core = (8.0 / (hmax * mu_hat.exp())).sqrt();
    grading(domain, n, &cfg.points, core)
}

/// Uniform or graded grid with `n` nodes along the longer side.
pub fn discretize_with(domain: &Domain, n: usize, grading: Option<&Grading>) -> Result<Discretization> {
    check_resolution(domain, n)?;
    let (lo, hi) = domain.bbox();
    let (nx, ny) = axis_counts(lo, hi, n);
    match grading {
        None => Discretization::new(domain, GridSpec::uniform_xy(lo, hi, nx, ny)),
        Some(g) => Discretization::new(domain, GridSpec::graded_xy(lo, hi, nx, ny, g)),
    }
}

/// [`discretize_with`] and [`grading_for`] combined.
pub fn discretize_for(domain: &Domain, n: usize, cfg: &BlowupConfiguration, mu_hat: f64) -> Result<Discretization> {
    discretize_with(domain, n, grading_for(domain, n, cfg, mu_hat).as_ref())
}

fn axis_counts(lo: Vec2, hi: Vec2, n: usize) -> (usize, usize) {
    let (w, h) = (hi.x - lo.x, hi.y - lo.y);
    if w >= h {
        (n, ((n - 1) as f64 * h / w).round() as usize + 1)
    } else {
        (((n - 1) as f64 * w / h).round() as usize + 1, n)
    }
}

fn check_resolution(domain: &Domain, n: usize) -> Result<()> {
    let (lo, hi) = domain.bbox();
    let across = (n - 1) as f64 * (hi - lo).min() / (hi - lo).max();
    if n < 2 || across < 32.0 {
        return Err(Error::Resolution(format!("{n} nodes leave fewer than 32 across the domain")));
    }
    Ok(())
}

/// A discretized Gel'fand problem: grid, weight samples and a cached
/// symbolic factorization.
pub struct GelfandProblem {
    pub disc: Arc<Discretization>,
    pub weight: WeightSpec,
    /// `h` at the unknowns and at the boundary points.
    pub h: Vec<f64>,
    pub h_bnd: Vec<f64>,
    symbolic: Mutex<Symbolic>,
    bordered: Mutex<Symbolic>,
}

impl GelfandProblem {
    pub fn new(disc: Discretization, green: &GreenEvaluator, weight: WeightSpec) -> Result<Self> {
        weight.validate(green)?;
        let h = disc.points().iter().map(|&p| weight.h(green, p)).collect::<Result<Vec<_>>>()?;
        let h_bnd = disc.bpoints.iter().map(|&p| weight.h(green, p)).collect::<Result<Vec<_>>>()?;
        Ok(Self { disc: Arc::new(disc), weight, h, h_bnd, symbolic: Mutex::default(), bordered: Mutex::default() })
    }

    pub fn n(&self) -> usize {
        self.disc.n_unknowns()
    }

    /// `F(w) = -L w - ε² h e^w`.
    pub fn residual(&self, w: &[f64], eps2: f64) -> Vec<f64> {
        let mut r = self.disc.apply_laplacian(w, None);
        for (k, v) in r.iter_mut().enumerate() {
            *v = -*v - eps2 * self.h[k] * w[k].exp();
        }
        r
    }

    /// `ε² sup h e^w`, the natural size of both terms of the residual.
    pub fn scale(&self, w: &[f64], eps2: f64) -> f64 {
        eps2 * self.h.iter().zip(w).fold(0.0_f64, |m, (h, w)| m.max(h * w.exp()))
    }

    /// `∫_Ω h e^w` with `w = 0` on the boundary.
    pub fn mass(&self, w: &[f64]) -> f64 {
        let e: Vec<f64> = self.h.iter().zip(w).map(|(h, w)| h * w.exp()).collect();
        self.disc.integrate(&e, &self.h_bnd)
    }

    /// `λ = ε² ∫ h e^w`.
    pub fn lambda(&self, w: &[f64], eps2: f64) -> f64 {
        eps2 * self.mass(w)
    }

    pub fn field(&self, w: &[f64]) -> ScalarField {
        self.disc.scatter(w, 0.0)
    }

    /// LU of `L + c` for a diagonal `c` on the unknowns.
    pub fn factor_shifted(&self, diag: &[f64]) -> Result<SparseLu> {
        let mut t = self.disc.laplacian.clone();
        for (k, &c) in diag.iter().enumerate() {
            t.push(k, k, c);
        }
        self.symbolic.lock().unwrap().factor(&t)
    }

    fn jacobian(&self, w: &[f64], eps2: f64) -> Result<SparseLu> {
        let d: Vec<f64> = self.h.iter().zip(w).map(|(h, w)| eps2 * h * w.exp()).collect();
        // J = -(L + ε² h e^w); solve with the positive sign and flip
        self.factor_shifted(&d)
    }
}

/// Settings for [`newton_solve`] and the bordered iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonOptions {
    /// Relative to `ε² sup h e^w`.
    pub tol: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 60, max_backtracks: 30 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonResult {
    pub w: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Damped Newton on `F(w) = -L w - ε² h e^w` at fixed `ε`.
pub fn newton_solve(p: &GelfandProblem, w0: &[f64], eps: f64, opts: &NewtonOptions) -> Result<NewtonResult> {
    check_start(p, w0, eps)?;
    newton_core(p, w0, eps * eps, None, opts)
}

fn check_start(p: &GelfandProblem, w0: &[f64], eps: f64) -> Result<()> {
    if !(eps >= 0.0) || w0.len() != p.n() || w0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("need ε ≥ 0 and a finite initial field on the unknowns".into()));
    }
    Ok(())
}

/// Newton on `F(w) - c`, with the tolerance taken relative to `F`.
fn newton_core(p: &GelfandProblem, w0: &[f64], eps2: f64, offset: Option<&[f64]>, opts: &NewtonOptions) -> Result<NewtonResult> {
    if eps2 == 0.0 && offset.is_none() {
        return Ok(NewtonResult { w: vec![0.0; p.n()], iterations: 0, residual: 0.0 });
    }
    let res = |w: &[f64]| {
        let mut r = p.residual(w, eps2);
        if let Some(c) = offset {
            r.iter_mut().zip(c).for_each(|(a, b)| *a -= b);
        }
        r
    };
    let mut w = w0.to_vec();
    let mut r = res(&w);
    let mut nr = sup(&r);
    for it in 0..=opts.max_iter {
        let sc = p.scale(&w, eps2);
        if sc.is_finite() && nr <= opts.tol * sc {
            return Ok(NewtonResult { w, iterations: it, residual: nr });
        }
        if it == opts.max_iter {
            break;
        }
        let lu = p.jacobian(&w, eps2)?;
        // (L + ε²he^w) δ = r  ⇔  J δ = -r
        let dw = lu.solve(&r);
        if dw.iter().any(|v| !v.is_finite()) {
            return Err(Error::Convergence("Newton step is not finite".into()));
        }
        // affine-invariant damping: the simplified correction J⁻¹F(trial),
        // with the same factorization, has to shrink
        let nd = sup(&dw);
        let mut t: f64 = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_backtracks {
            let trial: Vec<f64> = w.iter().zip(&dw).map(|(a, b)| a + t * b).collect();
            let rt = res(&trial);
            if rt.iter().all(|v| v.is_finite()) {
                let nbar = sup(&lu.solve(&rt));
                if nbar <= (1.0 - 0.25 * t) * nd || nbar <= 1e-12 * (1.0 + sup(&trial)) {
                    w = trial;
                    r = rt;
                    nr = sup(&r);
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            // the full step may still be the right one at roundoff level
            if nr <= 1e3 * opts.tol * sc {
                return Ok(NewtonResult { w, iterations: it + 1, residual: nr });
            }
            return Err(Error::Convergence(format!("damping failed at iteration {it}, residual {nr:.3e}")));
        }
    }
    Err(Error::Convergence(format!("no convergence in {} iterations, residual {nr:.3e}", opts.max_iter)))
}

/// Least step of the residual and tilt homotopies.
const MIN_HOMOTOPY_STEP: f64 = 1e-3;

/// Newton from `w₀`, falling back to the residual homotopy
/// `F(w) = (1 - t) F(w₀)` traced from `t = 0` to `1` with step halving.
fn residual_homotopy(p: &GelfandProblem, w0: &[f64], eps2: f64, opts: &NewtonOptions) -> Result<NewtonResult> {
    let quick = NewtonOptions { max_iter: opts.max_iter.min(PREDICTED_ITERATIONS), ..*opts };
    match newton_core(p, w0, eps2, None, &quick) {
        Err(e) if e.is_convergence() => {}
        r => return r,
    }
    let r0 = p.residual(w0, eps2);
    let mut w = w0.to_vec();
    let (mut t, mut dt) = (0.0_f64, 0.125_f64);
    let mut iterations = 0;
    while t < 1.0 {
        let next = (t + dt).min(1.0);
        let c: Vec<f64> = r0.iter().map(|v| (1.0 - next) * v).collect();
        match newton_core(p, &w, eps2, Some(&c), &quick) {
            Ok(res) => {
                iterations += res.iterations;
                w = res.w;
                t = next;
                dt = (2.0 * dt).min(0.25);
            }
            Err(e) if e.is_convergence() && dt > MIN_HOMOTOPY_STEP => dt *= 0.5,
            Err(e) => return Err(e),
        }
    }
    let mut res = newton_core(p, &w, eps2, None, opts)?;
    res.iterations += iterations;
    Ok(res)
}

/// Secant steps allowed in [`height_homotopy`].
const HOMOTOPY_STEPS: usize = 40;

/// Newton from `(w₀, ε₀²)`, falling back to pinning the peak height of `w₀`:
/// the bordered system is solved for `(w, ε²)` and the pinned height moved
/// by secant steps until `ε²` matches, then Newton polishes. Both damping
/// orders of the bordered iteration are tried.
fn height_homotopy(p: &GelfandProblem, w0: &[f64], eps2_0: f64, eps2: f64, opts: &NewtonOptions) -> Result<NewtonResult> {
    let quick = NewtonOptions { max_iter: opts.max_iter.min(PREDICTED_ITERATIONS), ..*opts };
    match newton_core(p, w0, eps2, None, &quick) {
        Err(e) if e.is_convergence() => {}
        r => return r,
    }
    match pinned_path(p, w0, eps2_0, eps2, opts, true) {
        Err(e) if e.is_convergence() => pinned_path(p, w0, eps2_0, eps2, opts, false),
        r => r,
    }
}

/// The pinned-height path of [`height_homotopy`] with the given damping order.
fn pinned_path(p: &GelfandProblem, w0: &[f64], eps2_0: f64, eps2: f64, opts: &NewtonOptions, natural_first: bool) -> Result<NewtonResult> {
    let quick = NewtonOptions { max_iter: opts.max_iter.min(PREDICTED_ITERATIONS), ..*opts };
    let node = (0..p.n()).max_by(|&a, &b| w0[a].total_cmp(&w0[b])).expect("unknowns");
    let target = eps2.ln();
    let mut sa = w0[node];
    let (mut wa, ka) = bordered_core(p, node, sa, w0, eps2_0, opts, natural_first)?;
    let mut ga = ka.ln() - target;
    // past the fold log ε² falls with unit slope in the peak height
    let mut slope = -1.0;
    for _ in 0..HOMOTOPY_STEPS {
        if ga.abs() <= 1e-8 {
            break;
        }
        let mut ds = -ga / slope;
        let (sb, wb, kb) = loop {
            let sb = sa + ds;
            let guess: Vec<f64> = wa.iter().map(|v| v * sb / sa).collect();
            match bordered_core(p, node, sb, &guess, eps2, &quick, natural_first) {
                Ok((w, k)) => break (sb, w, k),
                Err(e) if e.is_convergence() && ds.abs() > 1e-6 => ds *= 0.5,
                Err(e) => return Err(e),
            }
        };
        let gb = kb.ln() - target;
        slope = (gb - ga) / (sb - sa);
        if !(slope < 0.0) {
            return Err(Error::Convergence("height homotopy left the bubbling side of the branch".into()));
        }
        (sa, wa, ga) = (sb, wb, gb);
    }
    newton_core(p, &wa, eps2, None, opts)
}

/// Fixed-`ε` solve from an ansatz centered at `start`, which need not be
/// critical for `f_m` nor of the right height. Plain Newton first. Otherwise `log h` is tilted by
/// `τ = -Σ_j χ_j(x) ∇_j f_m · (x - c_j)`, with Gaussian cutoffs `χ_j` of
/// width `r₀`, so that the start is critical; the tilted problem is solved
/// and the tilt then removed in steps at fixed `ε`, letting the bubbles drift.
pub fn homotopy_solve(
    p: &GelfandProblem,
    green: &GreenEvaluator,
    start: &BlowupConfiguration,
    ans: &Ansatz,
    eps: f64,
    r0: f64,
    opts: &NewtonOptions,
) -> Result<NewtonResult> {
    let w0 = &ans.w;
    check_start(p, w0, eps)?;
    let eps2 = eps * eps;
    let quick = NewtonOptions { max_iter: opts.max_iter.min(PREDICTED_ITERATIONS), ..*opts };
    match newton_core(p, w0, eps2, None, &quick) {
        Err(e) if e.is_convergence() => {}
        r => return r,
    }
    let g = crate::hamiltonian::f_m_grad(green, &p.weight, &start.points)?;
    let tau: Vec<f64> = p
        .disc
        .points()
        .iter()
        .map(|&x| {
            start.points.iter().enumerate().fold(0.0, |acc, (j, &c)| {
                let d = x - c;
                let chi = (-0.5 * d.norm_squared() / (r0 * r0)).exp();
                acc - chi * (g[2 * j] * d.x + g[2 * j + 1] * d.y)
            })
        })
        .collect();
    let mut q = GelfandProblem {
        disc: p.disc.clone(),
        weight: p.weight.clone(),
        h: p.h.clone(),
        h_bnd: p.h_bnd.clone(),
        symbolic: Mutex::default(),
        bordered: Mutex::default(),
    };
    let tilt = |q: &mut GelfandProblem, theta: f64| {
        for ((hq, hp), t) in q.h.iter_mut().zip(&p.h).zip(&tau) {
            *hq = hp * (theta * t).exp();
        }
    };
    tilt(&mut q, 1.0);
    let first = match height_homotopy(&q, &ans.w, ans.eps2, eps2, opts) {
        Err(e) if e.is_convergence() => residual_homotopy(&q, &ans.w, eps2, opts)?,
        r => r?,
    };
    let mut iterations = first.iterations;
    // (θ, w) of the last two converged tilts
    let mut prev: Option<(f64, Vec<f64>)> = None;
    let (mut theta, mut w) = (1.0_f64, first.w);
    let mut dt = 0.25_f64;
    while theta > 0.0 {
        let next = (theta - dt).max(0.0);
        let guess: Vec<f64> = match &prev {
            Some((tp, wp)) => {
                let c = (next - theta) / (theta - tp);
                w.iter().zip(wp).map(|(a, b)| a + c * (a - b)).collect()
            }
            None => w.clone(),
        };
        tilt(&mut q, next);
        match newton_core(&q, &guess, eps2, None, &quick) {
            Ok(res) => {
                iterations += res.iterations;
                prev = Some((theta, std::mem::replace(&mut w, res.w)));
                theta = next;
                dt = (2.0 * dt).min(0.25);
            }
            Err(e) if e.is_convergence() && dt > MIN_HOMOTOPY_STEP => dt *= 0.5,
            Err(e) => return Err(e),
        }
    }
    let mut res = newton_core(p, &w, eps2, None, opts)?;
    res.iterations += iterations;
    Ok(res)
}

/// Heights `μ̂_j` balanced so that `e^{μ̂_j} h_j² e^{G_j*}` is the same for
/// every point, anchored at `μ̂_0`.
pub fn balanced_heights(cfg: &BlowupConfiguration, mu_hat0: f64) -> Vec<f64> {
    let key = |j: usize| 2.0 * cfg.h[j].ln() + cfg.g_star[j];
    (0..cfg.m()).map(|j| mu_hat0 + key(0) - key(j)).collect()
}

/// Default patch radius around each point: half the distance to the
/// boundary or to the neighbour bisector, capped at `diam / 8`.
pub fn default_r0(cfg: &BlowupConfiguration, domain: &Domain) -> f64 {
    let mut r = domain.diameter() / 8.0;
    for (j, &q) in cfg.points.iter().enumerate() {
        r = r.min(0.5 * domain.distance_to_boundary(q));
        for &p in &cfg.points[..j] {
            r = r.min(0.25 * (p - q).norm());
        }
    }
    r
}

/// Initial guess built from local bubbles matched to the Green field.
#[derive(Clone, Debug, PartialEq)]
pub struct Ansatz {
    pub w: Vec<f64>,
    pub eps2: f64,
    pub mu_hat: Vec<f64>,
}

impl Ansatz {
    pub fn eps(&self) -> f64 {
        self.eps2.sqrt()
    }
}

/// Composite of the inner profiles `G_j*(x) - 2 log(1/k_j + |x - q_j|²)`,
/// `k_j = h(q_j) e^{μ̂_j} / 8`, and the outer field `8π Σ_j G(x, q_j)`:
/// their difference `-2 log(1 + 1/(k_j |x - q_j|²))` is added to the outer
/// field for every point. The peak relation gives
/// `ε² = 64 e^{-μ̂_0} / (h_0² e^{G_0*})`. The mismatch at `r₀` must stay
/// below 1.
pub fn bubble_ansatz(
    p: &GelfandProblem,
    green: &GreenEvaluator,
    cfg: &BlowupConfiguration,
    mu_hat: &[f64],
    r0: f64,
) -> Result<Ansatz> {
    if mu_hat.len() != cfg.m() {
        return Err(Error::Argument("one height per point is required".into()));
    }
    let k: Vec<f64> = (0..cfg.m()).map(|j| cfg.h[j] * mu_hat[j].exp() / 8.0).collect();
    for (j, &kj) in k.iter().enumerate() {
        // inner minus outer at |x - q_j| = r₀
        let gap = 2.0 * (1.0 / (kj * r0 * r0)).ln_1p();
        if !(gap <= 1.0) {
            return Err(Error::Ansatz(format!("height {} at point {j} is too small: inner/outer mismatch {gap:.3}", mu_hat[j])));
        }
    }
    composite(p, green, cfg, mu_hat)
}

/// The composite field of [`bubble_ansatz`] without the mismatch check.
fn composite(p: &GelfandProblem, green: &GreenEvaluator, cfg: &BlowupConfiguration, mu_hat: &[f64]) -> Result<Ansatz> {
    let k: Vec<f64> = (0..cfg.m()).map(|j| cfg.h[j] * mu_hat[j].exp() / 8.0).collect();
    let pts = p.disc.points();
    // nodes this close to a point count as its center
    let tiny = (1e-13 * green.domain().diameter()).powi(2);
    let mut w = Vec::with_capacity(pts.len());
    for &x in &pts {
        let mut v = 0.0;
        let mut center = None;
        for (j, &q) in cfg.points.iter().enumerate() {
            let d2 = (x - q).norm_squared();
            if d2 <= tiny {
                center = Some(j);
                continue;
            }
            // inner minus outer is -2 log(1 + 1/(k d²))
            v += EIGHT_PI * green.green_value(x, q)? - 2.0 * (1.0 / (k[j] * d2)).ln_1p();
        }
        if let Some(j) = center {
            // inner profile at its own center
            v += cfg.g_star[j] + 2.0 * k[j].ln();
            for (l, &q) in cfg.points.iter().enumerate() {
                if l != j {
                    v -= EIGHT_PI * green.green_value(x, q)?;
                }
            }
        }
        w.push(v);
    }
    let eps2 = 64.0 * (-mu_hat[0]).exp() / (cfg.h[0] * cfg.h[0] * cfg.g_star[0].exp());
    Ok(Ansatz { w, eps2, mu_hat: mu_hat.to_vec() })
}

/// A local maximum of a solution with its sub-grid refinement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub location: Vec2,
    pub height: f64,
    /// Unknown index of the maximal node.
    pub node: usize,
}

/// Maximum of `w` over the nodes in `B_radius(center)`, refined by
/// one-dimensional parabolas through the neighbouring nodes.
pub fn find_peak(disc: &Discretization, w: &[f64], center: Vec2, radius: f64) -> Result<Peak> {
    let spec = &*disc.spec;
    let mut best: Option<(usize, f64)> = None;
    for (row, &k) in disc.nodes.iter().enumerate() {
        if (spec.node_at(k) - center).norm() <= radius && best.map_or(true, |(_, v)| w[row] > v) {
            best = Some((row, w[row]));
        }
    }
    let Some((row, top)) = best else {
        return Err(Error::PatchSize(format!("no grid node within {radius} of ({}, {})", center.x, center.y)));
    };
    let k = disc.nodes[row];
    let (i, j) = (k % spec.nx(), k / spec.nx());
    let x = spec.node(i, j);
    let local = spec.spacing_at(x);
    if (x - center).norm() > radius - 1.5 * local {
        return Err(Error::PatchSize(format!("maximum sits on the rim of the patch of radius {radius}")));
    }
    let val = |ii: usize, jj: usize| disc.unknown[spec.idx(ii, jj)].map_or(0.0, |r| w[r]);
    let fit = |fm: f64, f0: f64, fp: f64, a: f64, b: f64| -> (f64, f64) {
        let c2 = (a * (fp - f0) + b * (fm - f0)) / (a * b * (a + b));
        let c1 = ((fp - f0) - c2 * b * b) / b;
        if c2 >= 0.0 {
            return (0.0, 0.0);
        }
        let t = (-c1 / (2.0 * c2)).clamp(-a, b);
        (t, c1 * t + c2 * t * t)
    };
    let (tx, gx) = fit(val(i - 1, j), top, val(i + 1, j), spec.xs[i] - spec.xs[i - 1], spec.xs[i + 1] - spec.xs[i]);
    let (ty, gy) = fit(val(i, j - 1), top, val(i, j + 1), spec.ys[j] - spec.ys[j - 1], spec.ys[j + 1] - spec.ys[j]);
    Ok(Peak { location: x + vec2(tx, ty), height: top + gx + gy, node: row })
}

/// A converged solution on the branch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    /// Prescribed height at the tracked node.
    pub s: f64,
    pub eps: f64,
    pub eps2: f64,
    pub lambda: f64,
    pub max_w: f64,
    pub peaks: Vec<Peak>,
    pub residual: f64,
    /// Interior values of `w`.
    #[serde(skip)]
    pub w: Vec<f64>,
}

impl BranchPoint {
    pub fn from_solution(p: &GelfandProblem, cfg: &BlowupConfiguration, r0: f64, w: Vec<f64>, eps2: f64, s: f64) -> Result<Self> {
        let peaks = cfg.points.iter().map(|&q| find_peak(&p.disc, &w, q, r0)).collect::<Result<Vec<_>>>()?;
        let max_w = peaks.iter().fold(f64::NEG_INFINITY, |m, pk| m.max(pk.height));
        let residual = sup(&p.residual(&w, eps2));
        Ok(Self { s, eps: eps2.sqrt(), eps2, lambda: p.lambda(&w, eps2), max_w, peaks, residual, w })
    }
}

/// Points ordered by prescribed height.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub configuration: BlowupConfiguration,
    pub points: Vec<BranchPoint>,
}

/// Maximum of `ε²` along a branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub s: f64,
    pub eps2: f64,
}

impl Branch {
    /// Parabolic estimate of the largest `ε²`, when it is attained in the
    /// interior of the sampled heights.
    pub fn fold(&self) -> Option<Fold> {
        let pts = &self.points;
        let k = (0..pts.len()).max_by(|&a, &b| pts[a].eps2.total_cmp(&pts[b].eps2))?;
        if k == 0 || k + 1 == pts.len() {
            return None;
        }
        let (x0, x1, x2) = (pts[k - 1].s, pts[k].s, pts[k + 1].s);
        let (y0, y1, y2) = (pts[k - 1].eps2, pts[k].eps2, pts[k + 1].eps2);
        let d01 = (y1 - y0) / (x1 - x0);
        let d12 = (y2 - y1) / (x2 - x1);
        let c2 = (d12 - d01) / (x2 - x0);
        let c1 = d01 - c2 * (x0 + x1);
        let s = -c1 / (2.0 * c2);
        let eps2 = y1 + c1 * (s - x1) + c2 * (s * s - x1 * x1);
        Some(Fold { s, eps2 })
    }
}

/// Solution of the bordered system `{F(w, ε²) = 0, w_node = s}`.
pub fn bordered_solve(p: &GelfandProblem, node: usize, s: f64, w0: &[f64], eps2_0: f64, opts: &NewtonOptions) -> Result<(Vec<f64>, f64)> {
    bordered_core(p, node, s, w0, eps2_0, opts, false)
}

/// The bordered iteration. Each step tries residual decrease and the
/// affine-invariant test of the fixed-ε iteration, with `δκ` measured
/// relative to `κ`, in the order set by `natural_first`.
fn bordered_core(
    p: &GelfandProblem,
    node: usize,
    s: f64,
    w0: &[f64],
    eps2_0: f64,
    opts: &NewtonOptions,
    natural_first: bool,
) -> Result<(Vec<f64>, f64)> {
    let n = p.n();
    let mut w = w0.to_vec();
    let mut kappa = eps2_0;
    let eval = |w: &[f64], kappa: f64| -> (Vec<f64>, f64) { (p.residual(w, kappa), w[node] - s) };
    let norm = |r: &(Vec<f64>, f64), w: &[f64], kappa: f64| {
        let sc = p.scale(w, kappa).max(f64::MIN_POSITIVE);
        (sup(&r.0) / sc).max(r.1.abs() / (1.0 + s.abs()))
    };
    let mut r = eval(&w, kappa);
    let mut nr = norm(&r, &w, kappa);
    for it in 0..=opts.max_iter {
        if nr <= opts.tol {
            return Ok((w, kappa));
        }
        if it == opts.max_iter {
            break;
        }
        // rows: (L + κ h e^w) δw + h e^w δκ = r, δw_node = s - w_node
        let mut t = Triplets::with_capacity(n + 1, p.disc.laplacian.entries.len() + 2 * n + 2);
        t.entries.extend_from_slice(&p.disc.laplacian.entries);
        for k in 0..n {
            let e = p.h[k] * w[k].exp();
            t.push(k, k, kappa * e);
            t.push(k, n, e);
        }
        t.push(n, node, 1.0);
        t.push(n, n, 0.0);
        let lu = p.bordered.lock().unwrap().factor(&t).map_err(|e| Error::Reparameterize(format!("bordered system: {e}")))?;
        let mut rhs = r.0.clone();
        rhs.push(-r.1);
        let d = lu.solve(&rhs);
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::Reparameterize("bordered system is singular at this height".into()));
        }
        let corr = |d: &[f64]| sup(&d[..n]).max(d[n].abs() / kappa);
        let nd = corr(&d);
        let mut accepted = false;
        // near roundoff only the residual test is meaningful
        let orders: &[bool] = if nr <= 1e3 * opts.tol { &[false] } else if natural_first { &[true, false] } else { &[false, true] };
        'tests: for &natural in orders {
            let mut step = 1.0;
            for _ in 0..=opts.max_backtracks {
                let tw: Vec<f64> = w.iter().zip(&d[..n]).map(|(a, b)| a + step * b).collect();
                let tk = kappa + step * d[n];
                if tk > 0.0 {
                    let rt = eval(&tw, tk);
                    let nt = norm(&rt, &tw, tk);
                    let ok = nt.is_finite()
                        && if natural {
                            let mut rhs = rt.0.clone();
                            rhs.push(-rt.1);
                            corr(&lu.solve(&rhs)) <= (1.0 - 0.25 * step) * nd
                        } else {
                            nt < (1.0 - 1e-4 * step) * nr
                        };
                    if ok {
                        (w, kappa, r, nr) = (tw, tk, rt, nt);
                        accepted = true;
                        break 'tests;
                    }
                }
                step *= 0.5;
            }
        }
        if !accepted {
            if nr <= 1e3 * opts.tol {
                return Ok((w, kappa));
            }
            return Err(Error::Convergence(format!("bordered line search failed at height {s}, residual {nr:.3e}")));
        }
    }
    Err(Error::Convergence(format!("bordered iteration did not converge at height {s}, residual {nr:.3e}")))
}

/// Initial guess of the given peak height: the scaled torsion profile
/// `-L ψ = h` for low heights, the bubble ansatz otherwise.
pub fn height_guess(p: &GelfandProblem, green: &GreenEvaluator, cfg: &BlowupConfiguration, node: usize, s: f64) -> Result<(Vec<f64>, f64)> {
    if s < 2.0 {
        let lu = p.factor_shifted(&vec![0.0; p.n()])?;
        let psi: Vec<f64> = lu.solve(&p.h).into_iter().map(|v| -v).collect();
        let c = s / psi[node];
        return Ok((psi.iter().map(|v| v * c).collect(), c));
    }
    let x = p.disc.point(node);
    let j = (0..cfg.m()).min_by(|&a, &b| (cfg.points[a] - x).norm().total_cmp(&(cfg.points[b] - x).norm())).unwrap();
    // the ansatz peak value is G_j*(q_j) + 2 log k_j
    let k = ((s - cfg.g_star[j]) / 2.0).exp();
    let mu0 = (8.0 * k / cfg.h[j]).ln();
    let mut mu = balanced_heights(cfg, 0.0);
    let shift = mu0 - mu[j];
    for v in &mut mu {
        *v += shift;
    }
    let a = composite(p, green, cfg, &mu)?;
    Ok((a.w, a.eps2))
}

/// Height bisections allowed per requested height.
const MAX_HALVINGS: usize = 8;
/// Iteration budget of a bordered solve started from a predictor.
const PREDICTED_ITERATIONS: usize = 15;

/// One bordered solve at height `s`, predicted from the converged history.
fn continuation_step(
    p: &GelfandProblem,
    green: &GreenEvaluator,
    cfg: &BlowupConfiguration,
    node: usize,
    s: f64,
    history: &[(f64, Vec<f64>, f64)],
    opts: &NewtonOptions,
) -> Result<(Vec<f64>, f64)> {
    let (w0, k0) = match history {
        [] => height_guess(p, green, cfg, node, s)?,
        [(sa, wa, ka)] => (wa.iter().map(|v| v * s / sa).collect(), *ka),
        [.., (sa, wa, ka), (sb, wb, kb)] => {
            let t = (s - sb) / (sb - sa);
            let w = wb.iter().zip(wa).map(|(vb, va)| vb + t * (vb - va)).collect();
            (w, kb * (kb / ka).powf(t))
        }
    };
    // a good predictor converges quickly; otherwise the caller shortens the step
    let quick = NewtonOptions { max_iter: opts.max_iter.min(PREDICTED_ITERATIONS), ..*opts };
    let first = if history.is_empty() { opts } else { &quick };
    match bordered_solve(p, node, s, &w0, k0, first) {
        Err(e) if history.len() == 1 && e.is_convergence() => {
            // a single point gives a poor predictor; retry from a fresh guess
            let (w1, k1) = height_guess(p, green, cfg, node, s)?;
            bordered_solve(p, node, s, &w1, k1, opts)
        }
        r => r,
    }
}

/// Continuation in the prescribed height of the grid node nearest `q_0`.
pub fn continue_branch(
    p: &GelfandProblem,
    green: &GreenEvaluator,
    cfg: &BlowupConfiguration,
    heights: &[f64],
    r0: f64,
    opts: &NewtonOptions,
) -> Result<Branch> {
    if heights.is_empty() || heights.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Argument("heights must be strictly increasing".into()));
    }
    let node = p.disc.unknown[p.disc.spec.nearest(cfg.points[0])]
        .ok_or_else(|| Error::Domain("tracked point has no interior grid node".into()))?;
    // converged (s, w, ε²), including unreported intermediate heights
    let mut history: Vec<(f64, Vec<f64>, f64)> = Vec::new();
    let mut points: Vec<BranchPoint> = Vec::with_capacity(heights.len());
    for &target in heights {
        let mut pending = vec![target];
        let mut halvings = 0;
        while let Some(&s) = pending.last() {
            match continuation_step(p, green, cfg, node, s, &history, opts) {
                Ok((w, eps2)) => {
                    pending.pop();
                    history.push((s, w, eps2));
                }
                Err(e) if e.is_convergence() && !history.is_empty() && halvings < MAX_HALVINGS => {
                    // shorten the step toward the last converged height
                    let last = history[history.len() - 1].0;
                    pending.push(0.5 * (last + s));
                    halvings += 1;
                }
                Err(e) => return Err(e),
            }
        }
        let (s, w, eps2) = history.last().cloned().expect("a converged height");
        points.push(BranchPoint::from_solution(p, cfg, r0, w, eps2, s)?);
    }
    Ok(Branch { configuration: cfg.clone(), points })
}

/// Settings for [`uniqueness_probe`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSpec {
    pub starts: usize,
    /// Relative perturbation of the ansatz heights.
    pub height: f64,
    /// Center jitter as a fraction of `r₀`.
    pub jitter: f64,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self { starts: 5, height: 0.2, jitter: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeStatus {
    Bubbling,
    Minimal,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRun {
    pub start: usize,
    pub mu_hat: Vec<f64>,
    pub centers: Vec<Vec2>,
    pub status: ProbeStatus,
    pub iterations: usize,
    pub max_w: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub eps: f64,
    pub runs: Vec<ProbeRun>,
    /// Largest pairwise sup-difference among bubbling runs and the reference.
    pub max_difference: f64,
}

/// Re-solves at the fixed `ε` of `point` from perturbed ansatz starts and
/// compares the converged m-bubbling solutions.
pub fn uniqueness_probe(
    p: &GelfandProblem,
    green: &GreenEvaluator,
    cfg: &BlowupConfiguration,
    point: &BranchPoint,
    r0: f64,
    spec: &ProbeSpec,
    opts: &NewtonOptions,
) -> Result<ProbeReport> {
    let k = spec.starts.max(1);
    // ansatz heights reproducing the reference peaks: w(q_j) = G_j*(q_j) + 2 log k_j
    let base: Vec<f64> =
        point.peaks.iter().enumerate().map(|(j, pk)| (8.0 / cfg.h[j]).ln() + 0.5 * (pk.height - cfg.g_star[j])).collect();
    let mut runs = Vec::with_capacity(k);
    let mut solutions = vec![point.w.clone()];
    for i in 0..k {
        let c = if k == 1 { 0.0 } else { -1.0 + 2.0 * i as f64 / (k - 1) as f64 };
        let mu: Vec<f64> = base.iter().map(|m| m * (1.0 + spec.height * c)).collect();
        let ang = 2.399963229728653 * i as f64;
        let rad = spec.jitter * r0 * (i + 1) as f64 / k as f64;
        let centers: Vec<Vec2> = cfg.points.iter().map(|&q| q + vec2(ang.cos(), ang.sin()) * rad).collect();
        let shifted = BlowupConfiguration::new(centers.clone(), green, &p.weight)?;
        let ans = bubble_ansatz(p, green, &shifted, &mu, r0)?;
        let run = match homotopy_solve(p, green, &shifted, &ans, point.eps, r0, opts) {
            Ok(res) => {
                let peaks: Vec<f64> = cfg
                    .points
                    .iter()
                    .map(|&q| find_peak(&p.disc, &res.w, q, 1.5 * r0).map(|pk| pk.height).unwrap_or(f64::NEG_INFINITY))
                    .collect();
                let bubbling = peaks.iter().zip(&point.peaks).all(|(h, pk)| *h > 0.5 * pk.height);
                let max_w = sup(&res.w);
                if bubbling {
                    solutions.push(res.w.clone());
                }
                ProbeRun {
                    start: i,
                    mu_hat: mu,
                    centers,
                    status: if bubbling { ProbeStatus::Bubbling } else { ProbeStatus::Minimal },
                    iterations: res.iterations,
                    max_w,
                }
            }
            Err(e) if e.is_convergence() => {
                ProbeRun { start: i, mu_hat: mu, centers, status: ProbeStatus::Failed, iterations: opts.max_iter, max_w: f64::NAN }
            }
            Err(e) => return Err(e),
        };
        runs.push(run);
    }
    let mut max_difference: f64 = 0.0;
    for a in 0..solutions.len() {
        for b in a + 1..solutions.len() {
            let d = solutions[a].iter().zip(&solutions[b]).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
            max_difference = max_difference.max(d);
        }
    }
    Ok(ProbeReport { eps: point.eps, runs, max_difference })
}
