//! Harmonic correction solved on the domain grid: `R(·, y)` is the discrete
//! harmonic function with boundary values `(1/2π) log|t - y|`. Solutions are
//! cached per source and interpolated bilinearly; derivatives use centered
//! differences with step twice the grid spacing.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use super::Jet;
use crate::geometry::Domain;
use crate::grid::{Discretization, ScalarField};
use crate::sparse::SparseLu;
use crate::{Result, Vec2, TWO_PI};

pub struct GridGreen {
    disc: Discretization,
    lu: SparseLu,
    step: f64,
    cache: RwLock<HashMap<(u64, u64), Arc<ScalarField>>>,
}

impl GridGreen {
    pub fn new(domain: Domain) -> Result<Self> {
        let (lo, hi) = domain.bbox();
        let n = ((hi - lo).max() / domain.spacing).ceil() as usize + 1;
        let disc = Discretization::uniform(&domain, n.max(17))?;
        let lu = SparseLu::new(&disc.laplacian)?;
        let step = 2.0 * disc.spec.max_spacing();
        Ok(Self { disc, lu, step, cache: RwLock::default() })
    }

    fn correction(&self, y: Vec2) -> Arc<ScalarField> {
        let key = (y.x.to_bits(), y.y.to_bits());
        if let Some(f) = self.cache.read().unwrap().get(&key) {
            return f.clone();
        }
        let data = |p: Vec2| 0.5 * (p - y).norm_squared().ln() / TWO_PI;
        let g: Vec<f64> = self.disc.bpoints.iter().map(|&p| data(p)).collect();
        let mut rhs = self.disc.boundary_rhs(&g);
        rhs.iter_mut().for_each(|v| *v = -*v);
        self.lu.solve_in_place(&mut rhs);
        let mut field = ScalarField::sample(self.disc.spec.clone(), data);
        for (r, &k) in self.disc.nodes.iter().enumerate() {
            field.values[k] = rhs[r];
        }
        let field = Arc::new(field);
        self.cache.write().unwrap().insert(key, field.clone());
        field
    }

    pub fn value(&self, x: Vec2, y: Vec2) -> f64 {
        self.correction(y).interpolate(x).unwrap_or(f64::NAN)
    }

    pub fn jet(&self, x: Vec2, y: Vec2) -> Jet {
        let s = self.step;
        let e = [Vec2::new(s, 0.0), Vec2::new(0.0, s)];
        let f = |a: Vec2, b: Vec2| self.value(a, b);
        let v = f(x, y);
        let mut jet = Jet { v, ..Default::default() };
        for a in 0..2 {
            jet.g[a] = (f(x + e[a], y) - f(x - e[a], y)) / (2.0 * s);
            for b in 0..2 {
                jet.h[(a, b)] = if a == b {
                    (f(x + e[a], y) - 2.0 * v + f(x - e[a], y)) / (s * s)
                } else {
                    (f(x + e[a] + e[b], y) - f(x + e[a] - e[b], y) - f(x - e[a] + e[b], y) + f(x - e[a] - e[b], y))
                        / (4.0 * s * s)
                };
                jet.m[(a, b)] = (f(x + e[a], y + e[b]) - f(x + e[a], y - e[b]) - f(x - e[a], y + e[b])
                    + f(x - e[a], y - e[b]))
                    / (4.0 * s * s);
            }
        }
        jet
    }
}
