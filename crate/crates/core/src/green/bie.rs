//! Nyström discretization of the double-layer equation for the harmonic
//! part `R(·, y)` on smooth domains.
//!
//! `R(x, y) = ∫ K(x, t) μ(t) ds`, `K = (x - t)·ν_t / (2π|x - t|²)`, where
//! `-μ/2 + Kμ = (1/2π) log|t - y|` on the boundary. The matrix does not
//! depend on `y`, so one LU per resolution serves every source.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;

use super::Jet;
use crate::geometry::Domain;
use crate::{Mat2, Vec2, TWO_PI};

struct Panel {
    pts: Vec<Vec2>,
    nrm: Vec<Vec2>,
    wts: Vec<f64>,
    lu: PartialPivLu<f64>,
}

/// Densities for `g`, `∂_{y₁} g`, `∂_{y₂} g`.
type Densities = [Vec<f64>; 3];

pub struct BieGreen {
    domain: Domain,
    max_speed: f64,
    panels: RwLock<HashMap<usize, Arc<Panel>>>,
    densities: Mutex<HashMap<(u64, u64, usize), Arc<Densities>>>,
}

const MIN_NODES: usize = 256;
const MAX_NODES: usize = 2048;

impl BieGreen {
    pub fn new(domain: Domain) -> Self {
        let max_speed = (0..1024)
            .map(|k| domain.boundary(TWO_PI * k as f64 / 1024.0).unwrap().speed())
            .fold(0.0, f64::max);
        Self { domain, max_speed, panels: RwLock::default(), densities: Mutex::default() }
    }

    fn nodes_for(&self, x: Vec2, y: Vec2) -> usize {
        let d = self.domain.distance_to_boundary(x).min(self.domain.distance_to_boundary(y));
        let want = 34.0 * self.max_speed / d.max(1e-12);
        if want >= MAX_NODES as f64 {
            return MAX_NODES;
        }
        (want as usize).next_power_of_two().clamp(MIN_NODES, MAX_NODES)
    }

    fn panel(&self, n: usize) -> Arc<Panel> {
        if let Some(p) = self.panels.read().unwrap().get(&n) {
            return p.clone();
        }
        let samples: Vec<_> = (0..n).map(|k| self.domain.boundary(TWO_PI * k as f64 / n as f64).unwrap()).collect();
        let pts: Vec<Vec2> = samples.iter().map(|s| s.p).collect();
        let nrm: Vec<Vec2> = samples.iter().map(|s| s.normal()).collect();
        let wts: Vec<f64> = samples.iter().map(|s| s.speed() * TWO_PI / n as f64).collect();
        let a = Mat::<f64>::from_fn(n, n, |i, j| {
            if i == j {
                -0.5 - samples[i].curvature() / (2.0 * TWO_PI) * wts[j]
            } else {
                let d = pts[i] - pts[j];
                d.dot(&nrm[j]) / (TWO_PI * d.norm_squared()) * wts[j]
            }
        });
        let panel = Arc::new(Panel { pts, nrm, wts, lu: a.partial_piv_lu() });
        self.panels.write().unwrap().insert(n, panel.clone());
        panel
    }

    fn densities(&self, y: Vec2, n: usize, panel: &Panel) -> Arc<Densities> {
        let key = (y.x.to_bits(), y.y.to_bits(), n);
        if let Some(d) = self.densities.lock().unwrap().get(&key) {
            return d.clone();
        }
        let mut rhs = Mat::<f64>::zeros(n, 3);
        for (j, t) in panel.pts.iter().enumerate() {
            let d = t - y;
            let r2 = d.norm_squared();
            rhs[(j, 0)] = 0.5 * r2.ln() / TWO_PI;
            rhs[(j, 1)] = -d.x / (TWO_PI * r2);
            rhs[(j, 2)] = -d.y / (TWO_PI * r2);
        }
        let sol = panel.lu.solve(&rhs);
        let col = |c: usize| (0..n).map(|j| sol[(j, c)]).collect::<Vec<_>>();
        let dens = Arc::new([col(0), col(1), col(2)]);
        let mut cache = self.densities.lock().unwrap();
        if cache.len() > 8192 {
            cache.clear();
        }
        cache.insert(key, dens.clone());
        dens
    }

    pub fn value(&self, x: Vec2, y: Vec2) -> f64 {
        self.jet(x, y).v
    }

    pub fn jet(&self, x: Vec2, y: Vec2) -> Jet {
        let n = self.nodes_for(x, y);
        let panel = self.panel(n);
        let dens = self.densities(y, n, &panel);
        // subtract the density at the closest node: ∫K = -1 and ∇∫K = 0 inside
        let near = (0..n)
            .min_by(|&a, &b| (panel.pts[a] - x).norm_squared().total_cmp(&(panel.pts[b] - x).norm_squared()))
            .unwrap();
        let star = [dens[0][near], dens[1][near], dens[2][near]];
        let mut jet = Jet { v: -star[0], ..Default::default() };
        for j in 0..n {
            let d = x - panel.pts[j];
            let nu = panel.nrm[j];
            let r2 = d.norm_squared();
            let dn = d.dot(&nu);
            let w = panel.wts[j] / TWO_PI;
            let k = dn / r2;
            let gk = nu / r2 - d * (2.0 * dn / (r2 * r2));
            let hk = -(nu * d.transpose() + d * nu.transpose()) * (2.0 / (r2 * r2))
                - Mat2::identity() * (2.0 * dn / (r2 * r2))
                + d * d.transpose() * (8.0 * dn / (r2 * r2 * r2));
            let m0 = (dens[0][j] - star[0]) * w;
            jet.v += k * m0;
            jet.g += gk * m0;
            jet.h += hk * m0;
            let m1 = (dens[1][j] - star[1]) * w;
            let m2 = (dens[2][j] - star[2]) * w;
            jet.m += Mat2::from_columns(&[gk * m1, gk * m2]);
        }
        jet
    }
}
