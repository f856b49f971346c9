//! Tensor-product node grids, Shortley–Weller Laplacians on masked domains,
//! cut-cell quadrature and grid-sampled fields.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::geometry::{Domain, Location};
use crate::sparse::Triplets;
use crate::{vec2, Error, Result, Vec2};

/// Node coordinates of a (possibly graded) tensor-product grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

/// Axis grading: spacing shrinks by roughly `ratio` within `width` of each center.
#[derive(Clone, Debug, PartialEq)]
pub struct Grading {
    pub centers: Vec<Vec2>,
    pub width: f64,
    pub ratio: f64,
}

fn graded_axis(lo: f64, hi: f64, n: usize, centers: &[f64], width: f64, ratio: f64) -> Vec<f64> {
    let amp = ratio - 1.0;
    let cum = |x: f64| {
        let mut f = x - lo;
        for &c in centers {
            f += amp * width * (((x - c) / width).atan() - ((lo - c) / width).atan());
        }
        f
    };
    let total = cum(hi);
    let mut xs = Vec::with_capacity(n);
    for i in 0..n {
        if i == 0 {
            xs.push(lo);
            continue;
        }
        if i == n - 1 {
            xs.push(hi);
            continue;
        }
        let target = total * i as f64 / (n - 1) as f64;
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if cum(m) < target {
                a = m;
            } else {
                b = m;
            }
            if b - a <= 1e-16 * (hi - lo) {
                break;
            }
        }
        let mut x = 0.5 * (a + b);
        for &c in centers {
            if (x - c).abs() < 1e-12 * (hi - lo) {
                x = c;
            }
        }
        xs.push(x);
    }
    xs
}

impl GridSpec {
    /// `n × n` nodes spanning `[lo, hi]`.
    pub fn uniform(lo: Vec2, hi: Vec2, n: usize) -> Self {
        Self::uniform_xy(lo, hi, n, n)
    }

    pub fn uniform_xy(lo: Vec2, hi: Vec2, nx: usize, ny: usize) -> Self {
        let axis = |a: f64, b: f64, n: usize| (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
        Self { xs: axis(lo.x, hi.x, nx), ys: axis(lo.y, hi.y, ny) }
    }

    pub fn graded(lo: Vec2, hi: Vec2, n: usize, g: &Grading) -> Self {
        Self::graded_xy(lo, hi, n, n, g)
    }

    pub fn graded_xy(lo: Vec2, hi: Vec2, nx: usize, ny: usize, g: &Grading) -> Self {
        let dedup = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            v
        };
        let cx = dedup(g.centers.iter().map(|c| c.x).collect());
        let cy = dedup(g.centers.iter().map(|c| c.y).collect());
        Self {
            xs: graded_axis(lo.x, hi.x, nx, &cx, g.width, g.ratio),
            ys: graded_axis(lo.y, hi.y, ny, &cy, g.width, g.ratio),
        }
    }

    pub fn nx(&self) -> usize {
        self.xs.len()
    }
    pub fn ny(&self) -> usize {
        self.ys.len()
    }
    pub fn len(&self) -> usize {
        self.xs.len() * self.ys.len()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.xs.len() + i
    }
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        vec2(self.xs[i], self.ys[j])
    }
    #[inline]
    pub fn node_at(&self, k: usize) -> Vec2 {
        let nx = self.xs.len();
        self.node(k % nx, k / nx)
    }
    pub fn max_spacing(&self) -> f64 {
        let m = |v: &[f64]| v.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        m(&self.xs).max(m(&self.ys))
    }
    pub fn min_spacing(&self) -> f64 {
        let m = |v: &[f64]| v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        m(&self.xs).min(m(&self.ys))
    }
    /// Local spacing (geometric mean of the two axes) near `p`.
    pub fn spacing_at(&self, p: Vec2) -> f64 {
        let s = |v: &[f64], x: f64| {
            let i = cell_index(v, x).unwrap_or(0);
            v[i + 1] - v[i]
        };
        (s(&self.xs, p.x) * s(&self.ys, p.y)).sqrt()
    }

    /// Cell `(i, j)` containing `p` with local coordinates in `[0, 1]²`.
    pub fn locate(&self, p: Vec2) -> Option<(usize, usize, f64, f64)> {
        let i = cell_index(&self.xs, p.x)?;
        let j = cell_index(&self.ys, p.y)?;
        let tx = (p.x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        let ty = (p.y - self.ys[j]) / (self.ys[j + 1] - self.ys[j]);
        Some((i, j, tx, ty))
    }

    /// Nearest node index.
    pub fn nearest(&self, p: Vec2) -> usize {
        let near = |v: &[f64], x: f64| match cell_index(v, x) {
            Some(i) => {
                if x - v[i] <= v[i + 1] - x {
                    i
                } else {
                    i + 1
                }
            }
            None => {
                if x < v[0] {
                    0
                } else {
                    v.len() - 1
                }
            }
        };
        self.idx(near(&self.xs, p.x), near(&self.ys, p.y))
    }
}

fn cell_index(v: &[f64], x: f64) -> Option<usize> {
    let n = v.len();
    if n < 2 || !(x >= v[0] && x <= v[n - 1]) {
        return None;
    }
    let k = v.partition_point(|&a| a <= x);
    Some(k.saturating_sub(1).min(n - 2))
}

/// Field sampled at every node of a tensor grid. Nodes outside the domain
/// carry an extension value (zero for Dirichlet solutions).
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub spec: Arc<GridSpec>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(spec: Arc<GridSpec>) -> Self {
        let n = spec.len();
        Self { spec, values: vec![0.0; n] }
    }

    pub fn sample(spec: Arc<GridSpec>, f: impl Fn(Vec2) -> f64) -> Self {
        let values = (0..spec.len()).map(|k| f(spec.node_at(k))).collect();
        Self { spec, values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { spec: self.spec.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip(&self, o: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        assert!(Arc::ptr_eq(&self.spec, &o.spec) || *self.spec == *o.spec, "fields on different grids");
        Self {
            spec: self.spec.clone(),
            values: self.values.iter().zip(&o.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.idx(i, j)]
    }

    /// Bilinear interpolation; `None` outside the grid box.
    pub fn interpolate(&self, p: Vec2) -> Option<f64> {
        let (i, j, tx, ty) = self.spec.locate(p)?;
        let v00 = self.at(i, j);
        let v10 = self.at(i + 1, j);
        let v01 = self.at(i, j + 1);
        let v11 = self.at(i + 1, j + 1);
        Some((1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11))
    }

    /// Nodal partial derivative along `axis` (0 = x, 1 = y): three-point
    /// formula on the non-uniform grid, one-sided at the grid edge.
    pub fn derivative(&self, axis: usize) -> ScalarField {
        let s = &*self.spec;
        let (nx, ny) = (s.nx(), s.ny());
        let mut out = vec![0.0; s.len()];
        for j in 0..ny {
            for i in 0..nx {
                let (coords, k, n) = if axis == 0 { (&s.xs, i, nx) } else { (&s.ys, j, ny) };
                let val = |kk: usize| if axis == 0 { self.at(kk, j) } else { self.at(i, kk) };
                let d = if k == 0 {
                    (val(1) - val(0)) / (coords[1] - coords[0])
                } else if k == n - 1 {
                    (val(n - 1) - val(n - 2)) / (coords[n - 1] - coords[n - 2])
                } else {
                    let hm = coords[k] - coords[k - 1];
                    let hp = coords[k + 1] - coords[k];
                    (hm * hm * (val(k + 1) - val(k)) + hp * hp * (val(k) - val(k - 1))) / (hm * hp * (hm + hp))
                };
                out[s.idx(i, j)] = d;
            }
        }
        ScalarField { spec: self.spec.clone(), values: out }
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Reference to a quadrature vertex: unknown index or boundary point index.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Vert {
    Node(usize),
    Bnd(usize),
}

/// Shortley–Weller discretization of a domain on a tensor grid.
///
/// Unknowns are the interior nodes; boundary data live on the points where
/// grid lines cross the boundary.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub domain: Domain,
    pub spec: Arc<GridSpec>,
    /// Per node: unknown index, or `None` for boundary/exterior nodes.
    pub unknown: Vec<Option<usize>>,
    /// Node index of each unknown.
    pub nodes: Vec<usize>,
    pub bpoints: Vec<Vec2>,
    /// Discrete Laplacian on unknowns (boundary values removed).
    pub laplacian: Triplets,
    /// Coupling to boundary values: `(row, boundary point, coefficient)`.
    pub boundary_coupling: Vec<(usize, usize, f64)>,
    /// Cut-cell quadrature weights on unknowns and boundary points.
    pub quad_nodes: Vec<f64>,
    pub quad_bnd: Vec<f64>,
    /// Boundary crossing on the arm from unknown `k` in direction `d`
    /// (E, W, N, S): `(boundary point, arm length)`.
    cuts: BTreeMap<(usize, u8), usize>,
    /// Boundary point index of grid nodes lying exactly on the boundary.
    node_bnd: BTreeMap<usize, usize>,
}

const DIRS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

impl Discretization {
    pub fn new(domain: &Domain, spec: GridSpec) -> Result<Self> {
        let spec = Arc::new(spec);
        let (nx, ny) = (spec.nx(), spec.ny());
        if nx < 3 || ny < 3 {
            return Err(Error::Resolution("grid needs at least 3 nodes per direction".into()));
        }
        let mut unknown = vec![None; spec.len()];
        let mut nodes = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                if domain.locate(spec.node(i, j)) == Location::Interior {
                    unknown[spec.idx(i, j)] = Some(nodes.len());
                    nodes.push(spec.idx(i, j));
                }
            }
        }
        if nodes.is_empty() {
            return Err(Error::Geometry("no grid node lies inside the domain".into()));
        }
        let n = nodes.len();
        let mut bpoints = Vec::new();
        let mut node_bnd = BTreeMap::new();
        for k in 0..spec.len() {
            if domain.locate(spec.node_at(k)) == Location::Boundary {
                node_bnd.insert(k, bpoints.len());
                bpoints.push(spec.node_at(k));
            }
        }
        let mut laplacian = Triplets::with_capacity(n, 5 * n);
        let mut boundary_coupling = Vec::new();
        let mut cuts = BTreeMap::new();
        for (row, &k) in nodes.iter().enumerate() {
            let (i, j) = ((k % nx) as i64, (k / nx) as i64);
            let p = spec.node(i as usize, j as usize);
            // arm lengths and targets, E W N S
            let mut arm = [0.0; 4];
            let mut target = [Vert::Node(0); 4];
            for (d, &(di, dj)) in DIRS.iter().enumerate() {
                let (ii, jj) = (i + di, j + dj);
                if ii < 0 || jj < 0 || ii >= nx as i64 || jj >= ny as i64 {
                    return Err(Error::Geometry("domain touches the edge of the grid box".into()));
                }
                let q = spec.node(ii as usize, jj as usize);
                let full = (q - p).norm();
                match unknown[spec.idx(ii as usize, jj as usize)] {
                    Some(col) => {
                        arm[d] = full;
                        target[d] = Vert::Node(col);
                    }
                    None if node_bnd.contains_key(&spec.idx(ii as usize, jj as usize)) => {
                        let bp = node_bnd[&spec.idx(ii as usize, jj as usize)];
                        arm[d] = full;
                        cuts.insert((row, d as u8), bp);
                        target[d] = Vert::Bnd(bp);
                    }
                    None => {
                        let t = domain.segment_exit(p, q);
                        arm[d] = t * full;
                        cuts.insert((row, d as u8), bpoints.len());
                        target[d] = Vert::Bnd(bpoints.len());
                        bpoints.push(p + (q - p) * t);
                    }
                }
            }
            let mut diag = 0.0;
            for (a, b) in [(0usize, 1usize), (2, 3)] {
                let s = arm[a] + arm[b];
                for d in [a, b] {
                    let c = 2.0 / (arm[d] * s);
                    diag -= c;
                    match target[d] {
                        Vert::Node(col) => laplacian.push(row, col, c),
                        Vert::Bnd(bp) => boundary_coupling.push((row, bp, c)),
                    }
                }
            }
            laplacian.push(row, row, diag);
        }
        let mut disc = Self {
            domain: domain.clone(),
            spec,
            unknown,
            nodes,
            bpoints,
            laplacian,
            boundary_coupling,
            quad_nodes: vec![],
            quad_bnd: vec![],
            cuts,
            node_bnd,
        };
        disc.build_quadrature();
        Ok(disc)
    }

    /// Uniform `n × n` grid over the bounding box.
    pub fn uniform(domain: &Domain, n: usize) -> Result<Self> {
        let (lo, hi) = domain.bbox();
        Self::new(domain, GridSpec::uniform(lo, hi, n))
    }

    pub fn n_unknowns(&self) -> usize {
        self.nodes.len()
    }

    pub fn point(&self, row: usize) -> Vec2 {
        self.spec.node_at(self.nodes[row])
    }

    pub fn points(&self) -> Vec<Vec2> {
        (0..self.nodes.len()).map(|r| self.point(r)).collect()
    }

    fn cell_polygon(&self, i: usize, j: usize) -> Option<Vec<Vert>> {
        let s = &*self.spec;
        let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
        let inside: Vec<Option<usize>> = corners.iter().map(|&(a, b)| self.unknown[s.idx(a, b)]).collect();
        let count = inside.iter().filter(|u| u.is_some()).count();
        if count == 0 {
            return None;
        }
        let on_bnd: Vec<Option<usize>> = corners.iter().map(|&(a, b)| self.node_bnd.get(&s.idx(a, b)).copied()).collect();
        let mut poly = Vec::with_capacity(6);
        for e in 0..4 {
            let (a, b) = (e, (e + 1) % 4);
            if let Some(ra) = inside[a] {
                poly.push(Vert::Node(ra));
            } else if let Some(bp) = on_bnd[a] {
                poly.push(Vert::Bnd(bp));
            }
            match (inside[a], inside[b]) {
                (Some(ra), None) if on_bnd[b].is_none() => {
                    poly.push(Vert::Bnd(self.cuts[&(ra, dir_code(corners[a], corners[b]))]))
                }
                (None, Some(rb)) if on_bnd[a].is_none() => {
                    poly.push(Vert::Bnd(self.cuts[&(rb, dir_code(corners[b], corners[a]))]))
                }
                _ => {}
            }
        }
        Some(poly)
    }

    fn vert_pos(&self, v: Vert) -> Vec2 {
        match v {
            Vert::Node(r) => self.point(r),
            Vert::Bnd(b) => self.bpoints[b],
        }
    }

    fn build_quadrature(&mut self) {
        let mut qn = vec![0.0; self.nodes.len()];
        let mut qb = vec![0.0; self.bpoints.len()];
        let s = self.spec.clone();
        for j in 0..s.ny() - 1 {
            for i in 0..s.nx() - 1 {
                let Some(poly) = self.cell_polygon(i, j) else { continue };
                if poly.len() == 4 && poly.iter().all(|v| matches!(v, Vert::Node(_))) {
                    let area = (s.xs[i + 1] - s.xs[i]) * (s.ys[j + 1] - s.ys[j]);
                    for v in &poly {
                        if let Vert::Node(r) = v {
                            qn[*r] += 0.25 * area;
                        }
                    }
                    continue;
                }
                let p0 = self.vert_pos(poly[0]);
                for k in 1..poly.len().saturating_sub(1) {
                    let (a, b) = (self.vert_pos(poly[k]) - p0, self.vert_pos(poly[k + 1]) - p0);
                    let area = 0.5 * (a.x * b.y - a.y * b.x);
                    for v in [poly[0], poly[k], poly[k + 1]] {
                        match v {
                            Vert::Node(r) => qn[r] += area / 3.0,
                            Vert::Bnd(bp) => qb[bp] += area / 3.0,
                        }
                    }
                }
            }
        }
        self.quad_nodes = qn;
        self.quad_bnd = qb;
    }

    /// `∫_Ω f` from values on unknowns and on boundary points.
    pub fn integrate(&self, interior: &[f64], boundary: &[f64]) -> f64 {
        let a: f64 = self.quad_nodes.iter().zip(interior).map(|(w, v)| w * v).sum();
        let b: f64 = self.quad_bnd.iter().zip(boundary).map(|(w, v)| w * v).sum();
        a + b
    }

    pub fn area(&self) -> f64 {
        self.quad_nodes.iter().sum::<f64>() + self.quad_bnd.iter().sum::<f64>()
    }

    /// Quadrature weights for `∫_{B_r(c)} f` acting on unknowns, with values
    /// on the circle interpolated linearly along grid edges. The ball must
    /// stay inside the domain.
    pub fn ball_weights(&self, c: Vec2, r: f64) -> Result<Vec<(usize, f64)>> {
        let s = &*self.spec;
        if self.domain.distance_to_boundary(c) <= r || !self.domain.contains(c) {
            return Err(Error::Geometry(format!("ball of radius {r} around ({}, {}) leaves the domain", c.x, c.y)));
        }
        let inside = |p: Vec2| (p - c).norm() < r;
        let (Some((i0, j0, ..)), Some((i1, j1, ..))) =
            (s.locate(c - vec2(r, r)), s.locate(c + vec2(r, r)))
        else {
            return Err(Error::Geometry("ball exceeds the grid box".into()));
        };
        let mut w: BTreeMap<usize, f64> = BTreeMap::new();
        let row = |i: usize, j: usize| -> Result<usize> {
            self.unknown[s.idx(i, j)].ok_or_else(|| Error::Geometry("ball touches non-interior nodes".into()))
        };
        for j in j0..=j1.min(s.ny() - 2) {
            for i in i0..=i1.min(s.nx() - 2) {
                let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
                let pos: Vec<Vec2> = corners.iter().map(|&(a, b)| s.node(a, b)).collect();
                let ins: Vec<bool> = pos.iter().map(|&p| inside(p)).collect();
                let count = ins.iter().filter(|&&b| b).count();
                if count == 0 {
                    continue;
                }
                // polygon vertices as (position, [(row, coefficient)])
                let mut poly: Vec<(Vec2, [(usize, f64); 2])> = Vec::with_capacity(6);
                for e in 0..4 {
                    let (a, b) = (e, (e + 1) % 4);
                    if ins[a] {
                        poly.push((pos[a], [(row(corners[a].0, corners[a].1)?, 1.0), (0, 0.0)]));
                    }
                    if ins[a] != ins[b] {
                        let (pin, pout) = if ins[a] { (pos[a], pos[b]) } else { (pos[b], pos[a]) };
                        let t = circle_exit(pin - c, pout - c, r);
                        let x = pin + (pout - pin) * t;
                        let ta = if ins[a] { t } else { 1.0 - t };
                        poly.push((
                            x,
                            [
                                (row(corners[a].0, corners[a].1)?, 1.0 - ta),
                                (row(corners[b].0, corners[b].1)?, ta),
                            ],
                        ));
                    }
                }
                let p0 = poly[0].0;
                for k in 1..poly.len().saturating_sub(1) {
                    let (a, b) = (poly[k].0 - p0, poly[k + 1].0 - p0);
                    let area = 0.5 * (a.x * b.y - a.y * b.x);
                    for v in [&poly[0], &poly[k], &poly[k + 1]] {
                        for &(rr, cf) in &v.1 {
                            if cf != 0.0 {
                                *w.entry(rr).or_insert(0.0) += area / 3.0 * cf;
                            }
                        }
                    }
                }
            }
        }
        Ok(w.into_iter().collect())
    }

    /// Interior values of a node field.
    pub fn gather(&self, f: &ScalarField) -> Vec<f64> {
        self.nodes.iter().map(|&k| f.values[k]).collect()
    }

    /// Node field from interior values; other nodes get `outside`.
    pub fn scatter(&self, v: &[f64], outside: f64) -> ScalarField {
        let mut values = vec![outside; self.spec.len()];
        for (r, &k) in self.nodes.iter().enumerate() {
            values[k] = v[r];
        }
        ScalarField { spec: self.spec.clone(), values }
    }

    /// `L u + B g`: discrete Laplacian with boundary values `g`.
    pub fn apply_laplacian(&self, u: &[f64], g: Option<&[f64]>) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.laplacian.apply(u, &mut out);
        if let Some(g) = g {
            for &(r, b, c) in &self.boundary_coupling {
                out[r] += c * g[b];
            }
        }
        out
    }

    /// Right-hand side contribution `B g` of boundary values.
    pub fn boundary_rhs(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes.len()];
        for &(r, b, c) in &self.boundary_coupling {
            out[r] += c * g[b];
        }
        out
    }
}

fn dir_code(from: (usize, usize), to: (usize, usize)) -> u8 {
    match (to.0 as i64 - from.0 as i64, to.1 as i64 - from.1 as i64) {
        (1, 0) => 0,
        (-1, 0) => 1,
        (0, 1) => 2,
        _ => 3,
    }
}

/// Fraction along `a → b` (relative to the center) where `|p| = r`; `a` inside.
fn circle_exit(a: Vec2, b: Vec2, r: f64) -> f64 {
    let d = b - a;
    let qa = d.norm_squared();
    let qb = 2.0 * a.dot(&d);
    let qc = a.norm_squared() - r * r;
    let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
    ((-qb + disc) / (2.0 * qa)).clamp(0.0, 1.0)
}
