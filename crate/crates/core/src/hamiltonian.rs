//! The m-vortex Hamiltonian
//! `f_m(q) = Σ_j [log h(q_j) + 4πR(q_j, q_j)] + 4π Σ_{l≠j} G(q_l, q_j)`,
//! its critical points, and the per-configuration quantities `G_j*`,
//! `l(q)`, `D(q)`, `Φ_j` and `f_{q,j}`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::green::GreenEvaluator;
use crate::quad::{adaptive, gauss_legendre, geometric_breaks};
use crate::weight::WeightSpec;
use crate::{vec2, Error, Mat2, Result, Vec2, EIGHT_PI, FOUR_PI, TWO_PI};

/// Candidate blow-up points with cached `G_j*(q_j)` and `h(q_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupConfiguration {
    pub points: Vec<Vec2>,
    pub g_star: Vec<f64>,
    pub h: Vec<f64>,
}

impl BlowupConfiguration {
    pub fn new(points: Vec<Vec2>, green: &GreenEvaluator, weight: &WeightSpec) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Argument("configuration needs at least one point".into()));
        }
        check_admissible(&points, green, weight, 0.0)?;
        let g_star = (0..points.len()).map(|j| g_star(green, &points, j, points[j])).collect::<Result<Vec<_>>>()?;
        let h = points.iter().map(|&q| weight.h(green, q)).collect::<Result<Vec<_>>>()?;
        Ok(Self { points, g_star, h })
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    /// `h(q_j) e^{G_j*(q_j)}`.
    pub fn strength(&self, j: usize) -> f64 {
        self.h[j] * self.g_star[j].exp()
    }

    pub fn flat(&self) -> DVector<f64> {
        flatten(&self.points)
    }
}

fn flatten(points: &[Vec2]) -> DVector<f64> {
    DVector::from_iterator(2 * points.len(), points.iter().flat_map(|p| [p.x, p.y]))
}

fn unflatten(v: &DVector<f64>) -> Vec<Vec2> {
    (0..v.len() / 2).map(|j| vec2(v[2 * j], v[2 * j + 1])).collect()
}

/// Interior, pairwise distinct and off the vortex points; `margin` is an
/// extra required distance to the boundary.
fn check_admissible(points: &[Vec2], green: &GreenEvaluator, weight: &WeightSpec, margin: f64) -> Result<()> {
    let dom = green.domain();
    let tiny = 1e-12 * dom.diameter();
    for (j, &q) in points.iter().enumerate() {
        dom.require_interior(q, "blow-up point")?;
        if margin > 0.0 && dom.distance_to_boundary(q) < margin {
            return Err(Error::Domain(format!("point {j} is within {margin} of the boundary")));
        }
        for &p in &points[..j] {
            if (p - q).norm() <= tiny {
                return Err(Error::Domain(format!("coincident blow-up points at ({}, {})", q.x, q.y)));
            }
        }
        for v in &weight.vortices {
            if (v.p() - q).norm() <= tiny {
                return Err(Error::Domain(format!("blow-up point on the vortex ({}, {})", q.x, q.y)));
            }
        }
    }
    Ok(())
}

/// `G_j*(x) = 8πR(x, q_j) + 8π Σ_{l≠j} G(x, q_l)`.
pub fn g_star(green: &GreenEvaluator, points: &[Vec2], j: usize, x: Vec2) -> Result<f64> {
    let mut s = EIGHT_PI * green.regular_part(x, points[j])?;
    for (l, &q) in points.iter().enumerate() {
        if l != j {
            s += EIGHT_PI * green.green_value(x, q)?;
        }
    }
    Ok(s)
}

/// `f_{q,j}(x) = G_j*(x) - G_j*(q_j) + log(h(x)/h(q_j))`.
pub fn f_qj(cfg: &BlowupConfiguration, green: &GreenEvaluator, weight: &WeightSpec, j: usize, x: Vec2) -> Result<f64> {
    let gs = g_star(green, &cfg.points, j, x)?;
    Ok(gs - cfg.g_star[j] + (weight.h(green, x)? / cfg.h[j]).ln())
}

/// `Φ_j(x, q) = 8π Σ_l G(x, q_l) - G_j*(q_j) + log(h(x)/h(q_j))`.
pub fn phi_j(cfg: &BlowupConfiguration, green: &GreenEvaluator, weight: &WeightSpec, j: usize, x: Vec2) -> Result<f64> {
    let mut s = -cfg.g_star[j] + (weight.h(green, x)? / cfg.h[j]).ln();
    for &q in &cfg.points {
        s += EIGHT_PI * green.green_value(x, q)?;
    }
    Ok(s)
}

/// `f_m` at the given points.
pub fn f_m(green: &GreenEvaluator, weight: &WeightSpec, points: &[Vec2]) -> Result<f64> {
    check_admissible(points, green, weight, 0.0)?;
    let mut s = 0.0;
    for (j, &q) in points.iter().enumerate() {
        s += weight.h(green, q)?.ln() + FOUR_PI * green.regular_part(q, q)?;
        for &p in &points[j + 1..] {
            s += EIGHT_PI * green.green_value(p, q)?;
        }
    }
    Ok(s)
}

/// Value, gradient and Hessian of `f_m` in the flat layout
/// `(q_1x, q_1y, q_2x, …)`.
pub fn f_m_derivatives(green: &GreenEvaluator, weight: &WeightSpec, points: &[Vec2]) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    check_admissible(points, green, weight, 0.0)?;
    let n = 2 * points.len();
    let mut val = 0.0;
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    for (j, &q) in points.iter().enumerate() {
        let w = weight.jet(green, q)?;
        let r = green.robin(q)?;
        val += w.log_h + FOUR_PI * r.v;
        let g = w.grad + r.g * FOUR_PI;
        let h = w.hess + r.h * FOUR_PI;
        add_vec(&mut grad, j, g);
        add_block(&mut hess, j, j, h);
        for (l, &p) in points.iter().enumerate() {
            if l == j {
                continue;
            }
            // jet of G(x, y) at x = q_j, y = q_l
            let jet = green.green_jet(q, p)?;
            if l > j {
                val += EIGHT_PI * jet.v;
            }
            add_vec(&mut grad, j, jet.g * EIGHT_PI);
            add_block(&mut hess, j, j, jet.h * EIGHT_PI);
            add_block(&mut hess, j, l, jet.m * EIGHT_PI);
        }
    }
    Ok((val, grad, hess))
}

pub fn f_m_grad(green: &GreenEvaluator, weight: &WeightSpec, points: &[Vec2]) -> Result<DVector<f64>> {
    Ok(f_m_derivatives(green, weight, points)?.1)
}

pub fn f_m_hess(green: &GreenEvaluator, weight: &WeightSpec, points: &[Vec2]) -> Result<DMatrix<f64>> {
    Ok(f_m_derivatives(green, weight, points)?.2)
}

fn add_vec(v: &mut DVector<f64>, j: usize, g: Vec2) {
    v[2 * j] += g.x;
    v[2 * j + 1] += g.y;
}

fn add_block(m: &mut DMatrix<f64>, j: usize, l: usize, b: Mat2) {
    for a in 0..2 {
        for c in 0..2 {
            m[(2 * j + a, 2 * l + c)] += b[(a, c)];
        }
    }
}

/// A converged critical point of `f_m` with its Hessian spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointRecord {
    pub configuration: BlowupConfiguration,
    pub value: f64,
    pub grad_norm: f64,
    pub hessian: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub degenerate: bool,
}

impl CriticalPointRecord {
    pub fn build(green: &GreenEvaluator, weight: &WeightSpec, points: Vec<Vec2>, threshold: f64) -> Result<Self> {
        let (value, grad, hess) = f_m_derivatives(green, weight, &points)?;
        let sym = (&hess + hess.transpose()) * 0.5;
        let mut eigenvalues: Vec<f64> = SymmetricEigen::new(sym.clone()).eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(f64::total_cmp);
        let max = eigenvalues.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
        let min = eigenvalues.iter().fold(f64::INFINITY, |m, e| m.min(e.abs()));
        Ok(Self {
            configuration: BlowupConfiguration::new(points, green, weight)?,
            value,
            grad_norm: grad.norm(),
            hessian: sym,
            eigenvalues,
            degenerate: min < threshold * max,
        })
    }

    pub fn determinant(&self) -> f64 {
        self.eigenvalues.iter().product()
    }
}

/// Multistart settings for [`find_critical_points`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpec {
    /// Start points keep this fraction of the diameter from the boundary.
    pub margin: f64,
    /// Start grid nodes per axis of the bounding box.
    pub density: usize,
    pub max_starts: usize,
    pub max_iter: usize,
    /// Relative eigenvalue threshold for the degeneracy flag.
    pub degeneracy: f64,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self { margin: 0.05, density: 7, max_starts: 400, max_iter: 80, degeneracy: 1e-6 }
    }
}

/// Result of a multistart search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub records: Vec<CriticalPointRecord>,
    pub starts: usize,
    pub failed: usize,
}

/// Multistart trust-region Newton on `∇f_m = 0`, deduplicated modulo
/// permutations at `1e-4 × diameter`.
pub fn find_critical_points(green: &GreenEvaluator, weight: &WeightSpec, m: usize, spec: &SearchSpec) -> Result<SearchOutcome> {
    if m == 0 || spec.density < 1 {
        return Err(Error::Argument("need m ≥ 1 and a positive start density".into()));
    }
    weight.validate(green)?;
    let dom = green.domain();
    let diam = dom.diameter();
    let (lo, hi) = dom.bbox();
    let margin = spec.margin * diam;
    let mut sites = Vec::new();
    for j in 0..spec.density {
        for i in 0..spec.density {
            let p = vec2(
                lo.x + (hi.x - lo.x) * (i as f64 + 0.5) / spec.density as f64,
                lo.y + (hi.y - lo.y) * (j as f64 + 0.5) / spec.density as f64,
            );
            let clear = weight.vortices.iter().all(|v| (v.p() - p).norm() > margin);
            if dom.contains(p) && dom.distance_to_boundary(p) >= margin && clear {
                sites.push(p);
            }
        }
    }
    let mut starts = Vec::new();
    combinations(sites.len(), m, &mut Vec::new(), 0, &mut |c| starts.push(c.iter().map(|&k| sites[k]).collect::<Vec<_>>()));
    if starts.len() > spec.max_starts {
        let stride = starts.len().div_ceil(spec.max_starts);
        starts = starts.into_iter().step_by(stride).collect();
    }
    let runs: Vec<Option<Vec<Vec2>>> = starts
        .par_iter()
        .map(|s| newton_critical(green, weight, s.clone(), 0.25 * margin, spec.max_iter).ok())
        .collect();
    let failed = runs.iter().filter(|r| r.is_none()).count();
    let mut found: Vec<Vec<Vec2>> = runs.into_iter().flatten().map(canonical).collect();
    found.sort_by(|a, b| cmp_config(a, b));
    let tol = 1e-4 * diam;
    let mut unique: Vec<Vec<Vec2>> = Vec::new();
    for c in found {
        if !unique.iter().any(|u| config_distance(u, &c) <= tol) {
            unique.push(c);
        }
    }
    let records = unique
        .into_iter()
        .map(|c| CriticalPointRecord::build(green, weight, c, spec.degeneracy))
        .collect::<Result<Vec<_>>>()?;
    Ok(SearchOutcome { records, starts: starts.len(), failed })
}

fn combinations(n: usize, k: usize, cur: &mut Vec<usize>, from: usize, out: &mut impl FnMut(&[usize])) {
    if cur.len() == k {
        out(cur);
        return;
    }
    for i in from..n {
        cur.push(i);
        combinations(n, k, cur, i + 1, out);
        cur.pop();
    }
}

fn canonical(mut c: Vec<Vec2>) -> Vec<Vec2> {
    c.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    c
}

fn cmp_config(a: &[Vec2], b: &[Vec2]) -> std::cmp::Ordering {
    for (p, q) in a.iter().zip(b) {
        let o = p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y));
        if o.is_ne() {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

/// Max point distance minimized over permutations.
fn config_distance(a: &[Vec2], b: &[Vec2]) -> f64 {
    fn rec(a: &[Vec2], b: &[Vec2], used: &mut Vec<bool>, k: usize, cur: f64, best: &mut f64) {
        if cur >= *best {
            return;
        }
        if k == a.len() {
            *best = cur;
            return;
        }
        for i in 0..b.len() {
            if !used[i] {
                used[i] = true;
                rec(a, b, used, k + 1, cur.max((a[k] - b[i]).norm()), best);
                used[i] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(a, b, &mut vec![false; b.len()], 0, 0.0, &mut best);
    best
}

/// Powell dogleg on `F = ∇f_m`, `J = D²f_m`, with merit `½|F|²`.
pub fn newton_critical(green: &GreenEvaluator, weight: &WeightSpec, start: Vec<Vec2>, margin: f64, max_iter: usize) -> Result<Vec<Vec2>> {
    let diam = green.domain().diameter();
    let mut x = flatten(&start);
    let (mut f, mut g, mut h) = f_m_derivatives(green, weight, &start)?;
    let mut radius = 0.1 * diam;
    for _ in 0..max_iter {
        if g.norm() <= 1e-11 * (1.0 + f.abs()) {
            return Ok(unflatten(&x));
        }
        let hg = &h * &g;
        let newton = h.clone().lu().solve(&(-&g));
        let hhg = &h * &hg;
        let cauchy = if hhg.norm_squared() > 0.0 { -&hg * (hg.norm_squared() / hhg.norm_squared()) } else { -&hg };
        let step = match newton {
            Some(pn) if pn.norm() <= radius => pn,
            _ if cauchy.norm() >= radius || hg.norm() == 0.0 => -&hg * (radius / hg.norm().max(f64::MIN_POSITIVE)),
            Some(pn) => {
                let d = &pn - &cauchy;
                let (a, b, c) = (d.norm_squared(), 2.0 * cauchy.dot(&d), cauchy.norm_squared() - radius * radius);
                let tau = (-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a);
                &cauchy + d * tau
            }
            None => cauchy.clone(),
        };
        let trial = &x + &step;
        let pts = unflatten(&trial);
        let eval = check_admissible(&pts, green, weight, margin).and_then(|_| f_m_derivatives(green, weight, &pts));
        let Ok((f1, g1, h1)) = eval else {
            radius *= 0.25;
            if radius < 1e-14 * diam {
                break;
            }
            continue;
        };
        let predicted = 0.5 * g.norm_squared() - 0.5 * (&g + &h * &step).norm_squared();
        let actual = 0.5 * g.norm_squared() - 0.5 * g1.norm_squared();
        let rho = if predicted > 0.0 { actual / predicted } else { -1.0 };
        if rho > 0.75 && step.norm() > 0.99 * radius {
            radius = (2.0 * radius).min(diam);
        } else if rho < 0.25 {
            radius = 0.25 * step.norm();
        }
        if rho > 1e-4 || (actual >= 0.0 && g1.norm() < g.norm()) {
            x = trial;
            (f, g, h) = (f1, g1, h1);
        }
        if radius < 1e-14 * diam {
            break;
        }
    }
    if g.norm() <= 1e-8 * (1.0 + f.abs()) {
        return Ok(unflatten(&x));
    }
    Err(Error::Convergence(format!("critical point iteration stalled with |grad| = {:.3e}", g.norm())))
}

/// `l(q) = Σ_j Δlog h(q_j) h(q_j) e^{G_j*(q_j)}`.
pub fn l_of_q(cfg: &BlowupConfiguration, green: &GreenEvaluator, weight: &WeightSpec) -> Result<f64> {
    let mut s = 0.0;
    for (j, &q) in cfg.points.iter().enumerate() {
        s += weight.jet(green, q)?.lap * cfg.strength(j);
    }
    Ok(s)
}

/// `D(q)` with its finite-radius samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DReport {
    pub value: f64,
    /// Difference of the last two extrapolants.
    pub error: f64,
    pub radii: Vec<f64>,
    pub samples: Vec<f64>,
    /// Coefficient `L` of the `(π/2) L log(1/r)` growth removed from
    /// each sample; equals `l(q)` at critical points.
    pub log_coefficient: f64,
}

/// `D(q) = lim_{r→0} Σ_j h(q_j)e^{G_j*(q_j)} (∫_{Ω_j∖B_{r_j}(q_j)} e^{Φ_j} - π/r_j²)`
/// with `r_j = r √(8h(q_j)e^{G_j*(q_j)})` and `Ω_j` the Voronoi cells.
///
/// When `Δlog h(q_j) ≠ 0` the sum grows like `(π/2) l(q) log(1/r)`; that
/// term is removed from every sample so the limit exists, which is the
/// same as evaluating the `l(q)` term of the `λ` expansion at `r = 1`.
/// The samples are extrapolated in `r²`.
pub fn d_of_q(cfg: &BlowupConfiguration, green: &GreenEvaluator, weight: &WeightSpec, radii: Option<&[f64]>) -> Result<DReport> {
    let dom = green.domain();
    let m = cfg.m();
    let mut rho0 = Vec::with_capacity(m);
    for (j, &q) in cfg.points.iter().enumerate() {
        let mut r = dom.distance_to_boundary(q);
        for (l, &p) in cfg.points.iter().enumerate() {
            if l != j {
                r = r.min(0.5 * (p - q).norm());
            }
        }
        for v in &weight.vortices {
            r = r.min((v.p() - q).norm());
        }
        rho0.push(0.5 * r);
    }
    let scales: Vec<f64> = (0..m).map(|j| (8.0 * cfg.strength(j)).sqrt()).collect();
    let default: Vec<f64>;
    let radii = match radii {
        Some(r) => r,
        None => {
            let top = (0..m).map(|j| rho0[j] / scales[j]).fold(f64::INFINITY, f64::min) * 0.5;
            default = (0..4).map(|k| top * 0.5f64.powi(k)).collect();
            &default
        }
    };
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[1] < w[0])) || radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::Convergence("radii schedule must be positive and strictly decreasing with at least two entries".into()));
    }
    for j in 0..m {
        if radii[0] * scales[j] >= rho0[j] {
            return Err(Error::Argument(format!("largest radius {} does not fit inside the cell of point {j}", radii[0])));
        }
    }
    // Per point: the far part outside B_ρ0 and the local Taylor data of f_{q,j}.
    let mut far = Vec::with_capacity(m);
    let mut tr_a = Vec::with_capacity(m);
    for j in 0..m {
        let q = cfg.points[j];
        far.push(outer_integral(cfg, green, weight, j, rho0[j])? - std::f64::consts::PI / (rho0[j] * rho0[j]));
        let w = weight.jet(green, q)?;
        let mut grad = w.grad + green.regular_jet(q, q)?.g * EIGHT_PI;
        for (l, &p) in cfg.points.iter().enumerate() {
            if l != j {
                grad += green.green_jet(q, p)?.g * EIGHT_PI;
            }
        }
        tr_a.push(w.lap + grad.norm_squared());
    }
    let log_coefficient: f64 = (0..m).map(|j| cfg.strength(j) * tr_a[j]).sum();
    let mut samples = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut s = 0.0;
        for j in 0..m {
            let near = annulus_integral(cfg, green, weight, j, r * scales[j], rho0[j])?;
            s += cfg.strength(j) * (near + far[j]);
        }
        samples.push(s - 0.5 * std::f64::consts::PI * log_coefficient * (1.0 / r).ln());
    }
    // Richardson in r²
    let mut table = samples.clone();
    let mut last = Vec::new();
    for level in 1..table.len() {
        for i in (level..table.len()).rev() {
            let ratio = (radii[i - level] / radii[i]).powi(2 * level as i32);
            table[i] = table[i] + (table[i] - table[i - 1]) / (ratio - 1.0);
        }
        last.push(table[table.len() - 1]);
    }
    let value = *last.last().unwrap();
    let error = if last.len() >= 2 { (last[last.len() - 1] - last[last.len() - 2]).abs() } else { (samples[1] - samples[0]).abs() };
    if !(error <= 1e-3 * (1.0 + value.abs())) {
        return Err(Error::Convergence(format!("D(q) extrapolation not Cauchy: successive estimates differ by {error:.3e}")));
    }
    Ok(DReport { value, error, radii: radii.to_vec(), samples, log_coefficient })
}

/// `∫_{r<|x-q_j|<ρ0} |x-q_j|^{-4} (e^{f_{q,j}} - 1)`.
fn annulus_integral(cfg: &BlowupConfiguration, green: &GreenEvaluator, weight: &WeightSpec, j: usize, r: f64, rho0: f64) -> Result<f64> {
    let q = cfg.points[j];
    let gl = gauss_legendre(16);
    let n_theta = 64;
    let dirs: Vec<Vec2> = (0..n_theta).map(|k| {
        let (s, c) = (TWO_PI * k as f64 / n_theta as f64).sin_cos();
        vec2(c, s)
    }).collect();
    let mut total = 0.0;
    for w in geometric_breaks(r, rho0, r, 1.5).windows(2) {
        let (a, b) = (w[0], w[1]);
        for &(x, wt) in &gl {
            let t = 0.5 * (a + b) + 0.5 * (b - a) * x;
            let mut ring = 0.0;
            for d in &dirs {
                ring += f_qj(cfg, green, weight, j, q + d * t)?.exp_m1();
            }
            total += 0.5 * (b - a) * wt * ring * (TWO_PI / n_theta as f64) / (t * t * t);
        }
    }
    Ok(total)
}

/// `∫_{Ω_j∖B_ρ0(q_j)} e^{Φ_j}` in polar coordinates about `q_j`, with the
/// outer radius the first exit from the domain or the Voronoi cell.
fn outer_integral(cfg: &BlowupConfiguration, green: &GreenEvaluator, weight: &WeightSpec, j: usize, rho0: f64) -> Result<f64> {
    let q = cfg.points[j];
    let dom = green.domain();
    let gl = gauss_legendre(16);
    let mut err = None;
    let radial = |theta: f64| -> f64 {
        let e = vec2(theta.cos(), theta.sin());
        let mut end = dom.ray_exit(q, e);
        for (l, &p) in cfg.points.iter().enumerate() {
            let d = p - q;
            if l != j && e.dot(&d) > 0.0 {
                end = end.min(d.norm_squared() / (2.0 * e.dot(&d)));
            }
        }
        if end <= rho0 {
            return 0.0;
        }
        // two panels, the inner one where e^{Φ} still decays like t^{-4}
        let mid = (2.0 * rho0).min(end);
        let mut s = 0.0;
        for (a, b) in [(rho0, mid), (mid, end)] {
            if b <= a {
                continue;
            }
            for &(x, w) in &gl {
                let t = 0.5 * (a + b) + 0.5 * (b - a) * x;
                match phi_j(cfg, green, weight, j, q + e * t) {
                    Ok(v) => s += 0.5 * (b - a) * w * v.exp() * t,
                    Err(e) => err = Some(e),
                }
            }
        }
        s
    };
    let scale = 1.0 / (rho0 * rho0);
    let v = adaptive(0.0, TWO_PI, 1e-10 * scale, radial);
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::weight::LogPoly;
    use std::f64::consts::PI;

    fn disk() -> GreenEvaluator {
        GreenEvaluator::auto(Domain::unit_disk()).unwrap()
    }

    #[test]
    fn disk_values() {
        let g = disk();
        let w = WeightSpec::unit();
        assert_eq!(f_m(&g, &w, &[vec2(0.0, 0.0)]).unwrap(), 0.0);
        assert!((f_m(&g, &w, &[vec2(0.5, 0.0)]).unwrap() - 2.0 * 0.75f64.ln()).abs() < 1e-14);
        let (_, grad, hess) = f_m_derivatives(&g, &w, &[vec2(0.0, 0.0)]).unwrap();
        assert!(grad.norm() < 1e-15);
        assert!((hess - DMatrix::identity(2, 2) * -4.0).norm() < 1e-12);
        assert!(f_m(&g, &w, &[vec2(0.1, 0.0), vec2(0.1, 0.0)]).is_err());
    }

    #[test]
    fn permutation_invariance_and_symmetry() {
        let g = disk();
        let w = WeightSpec::with_log_hat(LogPoly::radial_quadratic(1.0));
        let a = [vec2(0.2, 0.1), vec2(-0.3, 0.4), vec2(0.0, -0.5)];
        let b = [a[2], a[0], a[1]];
        assert_eq!(f_m(&g, &w, &a).unwrap(), f_m(&g, &w, &b).unwrap());
        let grad = f_m_grad(&g, &w, &[vec2(0.4, 0.0), vec2(-0.4, 0.0)]).unwrap();
        assert_eq!(grad[1], 0.0);
        assert_eq!(grad[3], 0.0);
    }

    #[test]
    fn derivatives_match_differences() {
        let g = GreenEvaluator::auto(Domain::rectangle(0.0, 0.0, 2.0, 1.0).unwrap()).unwrap();
        let w = WeightSpec::with_log_hat(LogPoly { terms: vec![(2, 0, 1.0), (1, 1, -0.5)] });
        let pts = [vec2(0.6, 0.4), vec2(1.3, 0.7)];
        let (_, grad, hess) = f_m_derivatives(&g, &w, &pts).unwrap();
        let s = 1e-5;
        let shift = |k: usize, d: f64| {
            let mut p = pts.to_vec();
            if k % 2 == 0 { p[k / 2].x += d } else { p[k / 2].y += d }
            p
        };
        for k in 0..4 {
            let fd = (f_m(&g, &w, &shift(k, s)).unwrap() - f_m(&g, &w, &shift(k, -s)).unwrap()) / (2.0 * s);
            assert!((fd - grad[k]).abs() < 1e-6 * (1.0 + grad[k].abs()), "grad {k}");
            let gd = (f_m_grad(&g, &w, &shift(k, s)).unwrap() - f_m_grad(&g, &w, &shift(k, -s)).unwrap()) / (2.0 * s);
            for i in 0..4 {
                assert!((gd[i] - hess[(i, k)]).abs() < 1e-5 * (1.0 + hess[(i, k)].abs()), "hess {i},{k}");
            }
        }
    }

    #[test]
    fn disk_critical_point() {
        let g = disk();
        let w = WeightSpec::unit();
        let out = find_critical_points(&g, &w, 1, &SearchSpec::default()).unwrap();
        assert_eq!(out.records.len(), 1);
        let r = &out.records[0];
        assert!(r.configuration.points[0].norm() < 1e-10);
        assert!((r.eigenvalues[0] + 4.0).abs() < 1e-9 && (r.eigenvalues[1] + 4.0).abs() < 1e-9);
        assert!(!r.degenerate);
        assert!((r.determinant() - 16.0).abs() < 1e-8);
    }

    #[test]
    fn d_and_l_on_the_disk() {
        let g = disk();
        let w = WeightSpec::unit();
        let cfg = BlowupConfiguration::new(vec![vec2(0.0, 0.0)], &g, &w).unwrap();
        assert_eq!(l_of_q(&cfg, &g, &w).unwrap(), 0.0);
        let d = d_of_q(&cfg, &g, &w, None).unwrap();
        // the integrand is exactly |x|^{-4}, so every sample is -π
        for s in &d.samples {
            assert!((s + PI).abs() < 1e-9, "{s}");
        }
        assert!((d.value + PI).abs() < 1e-9);
        assert!(d_of_q(&cfg, &g, &w, Some(&[0.01, 0.02])).is_err());
        let wq = WeightSpec::with_log_hat(LogPoly::radial_quadratic(1.0));
        let cq = BlowupConfiguration::new(vec![vec2(0.0, 0.0)], &g, &wq).unwrap();
        assert!((l_of_q(&cq, &g, &wq).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn auxiliary_functions() {
        let g = disk();
        let w = WeightSpec::with_log_hat(LogPoly { terms: vec![(1, 0, 0.3)] });
        let cfg = BlowupConfiguration::new(vec![vec2(0.2, 0.1), vec2(-0.3, -0.2)], &g, &w).unwrap();
        assert!(f_qj(&cfg, &g, &w, 0, cfg.points[0]).unwrap().abs() < 1e-14);
        let x = vec2(0.05, 0.4);
        // Φ_j = f_{q,j} - 4 log|x - q_j|
        let lhs = phi_j(&cfg, &g, &w, 0, x).unwrap() - f_qj(&cfg, &g, &w, 0, x).unwrap();
        assert!((lhs + 4.0 * (x - cfg.points[0]).norm().ln()).abs() < 1e-12);
        let u = WeightSpec::unit();
        let c0 = BlowupConfiguration::new(vec![vec2(0.0, 0.0)], &g, &u).unwrap();
        assert!((phi_j(&c0, &g, &u, 0, x).unwrap() + 4.0 * x.norm().ln()).abs() < 1e-13);
    }
}
