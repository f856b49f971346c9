//! Shared fixtures for the benchmarks.

use gelfand_core::solver::{continue_branch, default_r0, discretize_for, GelfandProblem, NewtonOptions};
use gelfand_core::{BlowupConfiguration, BranchPoint, Domain, GreenEvaluator, Vec2, WeightSpec};

/// The unit disk with `h ≡ 1` and its blow-up point at the origin.
pub struct DiskCase {
    pub domain: Domain,
    pub green: GreenEvaluator,
    pub weight: WeightSpec,
    pub cfg: BlowupConfiguration,
}

impl DiskCase {
    pub fn new() -> Self {
        let domain = Domain::unit_disk();
        let green = GreenEvaluator::auto(domain.clone()).expect("disk Green function");
        let weight = WeightSpec::unit();
        let cfg = BlowupConfiguration::new(vec![Vec2::zeros()], &green, &weight).expect("origin");
        Self { domain, green, weight, cfg }
    }

    /// Problem on an `n`-node grid graded for the radial solution with parameter `delta`.
    pub fn problem(&self, n: usize, delta: f64) -> GelfandProblem {
        let disc = discretize_for(&self.domain, n, &self.cfg, (8.0 / delta).ln()).expect("grid");
        GelfandProblem::new(disc, &self.green, self.weight.clone()).expect("problem")
    }

    /// Converged radial solution with peak height `2 log((1 + δ)/δ)`.
    pub fn solution(&self, p: &GelfandProblem, delta: f64) -> BranchPoint {
        let s = 2.0 * ((1.0 + delta) / delta).ln();
        let r0 = default_r0(&self.cfg, &self.domain);
        let b = continue_branch(p, &self.green, &self.cfg, &[s], r0, &NewtonOptions::default()).expect("branch");
        b.points.into_iter().next().expect("one point")
    }
}

impl Default for DiskCase {
    fn default() -> Self {
        Self::new()
    }
}
