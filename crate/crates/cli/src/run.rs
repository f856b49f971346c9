//! Task pipelines.

use std::path::PathBuf;
use std::time::Instant;

use gelfand_core::diagnostics::{
    expansion_check, inner_outer_errors, linearized_spectrum, peak_data, ExpansionReport, InnerOuter, PeakData, Spectrum,
};
use gelfand_core::hamiltonian::{d_of_q, find_critical_points, l_of_q};
use gelfand_core::solver::{
    balanced_heights, bubble_ansatz, continue_branch, default_r0, discretize_for, newton_solve, uniqueness_probe, Branch,
    GelfandProblem, NewtonOptions,
};
use gelfand_core::{vec2, BlowupConfiguration, BranchPoint, Domain, Error, GreenEvaluator, WeightSpec};
use serde::Serialize;

use crate::config::{height_of_delta, parse, ratio_or_nan, Points, ScenarioConfig, Task};
use crate::output::{num, sha256_hex, Artifacts, FileRecord};

/// Failures mapped to exit statuses.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Schema(String),
    #[error("{0}")]
    Convergence(String),
    #[error("{0}")]
    Internal(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Schema(_) => 2,
            Failure::Convergence(_) => 3,
            Failure::Internal(_) => 1,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_convergence() {
            Failure::Convergence(e.to_string())
        } else {
            Failure::Internal(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Internal(format!("output: {e}"))
    }
}

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub grid: Option<usize>,
    pub tol: Option<f64>,
    pub threads: Option<usize>,
}

#[derive(Serialize)]
struct TaskRecord {
    index: usize,
    kind: &'static str,
    status: &'static str,
    message: Option<String>,
    operations: &'static [&'static str],
    files: Vec<FileRecord>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config_sha256: String,
    config: &'a ScenarioConfig,
    grid: usize,
    tol: f64,
    threads: Option<usize>,
    tasks: Vec<TaskRecord>,
    wall_time_seconds: f64,
}

fn operations(t: &Task) -> &'static [&'static str] {
    match t {
        Task::GreenTable { .. } => &["green_value", "regular_part"],
        Task::CriticalPoints { .. } => &["find_critical_points", "CriticalPointRecord::build"],
        Task::Solve { .. } => &["bubble_ansatz", "newton_solve"],
        Task::Continue { .. } => &["continue_branch", "Branch::fold"],
        Task::Diagnose { .. } => &["continue_branch", "peak_data", "inner_outer_errors", "l_of_q", "d_of_q", "expansion_check", "linearized_spectrum"],
        Task::UniquenessProbe { .. } => &["continue_branch", "uniqueness_probe"],
        Task::Sweep { .. } => &["continue_branch", "peak_data", "inner_outer_errors", "l_of_q", "d_of_q", "expansion_check"],
    }
}

/// Runs the tasks of `kind` (all tasks when `None`) and writes artifacts
/// and a manifest under `out`.
pub fn run_scenario(text: &str, kind: Option<&str>, out: PathBuf, ov: &Overrides) -> Result<(), Failure> {
    let start = Instant::now();
    let mut cfg = parse(text).map_err(|e| Failure::Schema(e.0))?;
    if let Some(g) = ov.grid {
        cfg.grid = g;
    }
    if let Some(t) = ov.tol {
        if !(t > 0.0) {
            return Err(Failure::Schema(format!("tolerance {t} must be positive")));
        }
        cfg.newton.tol = t;
    }
    cfg.validate().map_err(|e| Failure::Schema(e.0))?;
    let selected: Vec<(usize, &Task)> = cfg.tasks.iter().enumerate().filter(|(_, t)| kind.is_none_or(|k| t.kind() == k)).collect();
    if selected.is_empty() {
        return Err(Failure::Schema(format!("no task of kind {} in the config", kind.unwrap_or("any"))));
    }
    let domain = Domain::new(cfg.domain.clone()).map_err(|e| Failure::Schema(e.to_string()))?;
    let green = GreenEvaluator::new(domain.clone(), cfg.green_backend).map_err(|e| Failure::Schema(e.to_string()))?;
    cfg.weight.validate(&green).map_err(|e| Failure::Schema(e.to_string()))?;

    let mut art = Artifacts::new(&out)?;
    let mut ctx = Ctx { domain, green, weight: cfg.weight.clone(), grid: cfg.grid, newton: cfg.newton };
    let mut records = Vec::new();
    let mut summary = String::new();
    let mut failure = None;
    for (i, task) in selected {
        let before = art.files.len();
        let res = ctx.run(i, task, &mut art, &mut summary);
        let files = art.files[before..].to_vec();
        let (status, message) = match &res {
            Ok(()) => ("ok", None),
            Err(e) => ("failed", Some(e.to_string())),
        };
        records.push(TaskRecord { index: i, kind: task.kind(), status, message, operations: operations(task), files });
        if let Err(e) = res {
            summary.push_str(&format!("task {i} ({}) failed: {e}\n", task.kind()));
            failure = Some(e);
            break;
        }
    }
    art.write("summary.txt", summary.as_bytes())?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: sha256_hex(text.as_bytes()),
        config: &cfg,
        grid: cfg.grid,
        tol: cfg.newton.tol,
        threads: ov.threads,
        tasks: records,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    art.json("manifest.json", &manifest)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

struct Ctx {
    domain: Domain,
    green: GreenEvaluator,
    weight: WeightSpec,
    grid: usize,
    newton: NewtonOptions,
}

/// Everything reported for one solution.
#[derive(Serialize)]
struct PointReport<'a> {
    point: &'a BranchPoint,
    peaks: PeakData,
    errors: InnerOuter,
    expansion: ExpansionReport,
    spectrum: Option<Spectrum>,
}

/// `μ̂` of the radial disk solution with peak height `s`.
fn mu_hat_of_height(s: f64) -> f64 {
    (8.0 * ((s / 2.0).exp() - 1.0)).ln()
}

impl Ctx {
    fn configuration(&self, at: &Points) -> Result<BlowupConfiguration, Failure> {
        let points = match at.explicit() {
            Some(p) => p,
            None => {
                let m = at.m.unwrap_or(1);
                let found = find_critical_points(&self.green, &self.weight, m, &Default::default())?;
                let best = found
                    .records
                    .into_iter()
                    .filter(|r| !r.degenerate)
                    .max_by(|a, b| a.value.total_cmp(&b.value))
                    .ok_or_else(|| Failure::Convergence(format!("no non-degenerate critical point with m = {m}")))?;
                best.configuration.points
            }
        };
        Ok(BlowupConfiguration::new(points, &self.green, &self.weight)?)
    }

    fn problem(&self, cfg: &BlowupConfiguration, mu_hat: f64) -> Result<GelfandProblem, Failure> {
        let disc = discretize_for(&self.domain, self.grid, cfg, mu_hat)?;
        Ok(GelfandProblem::new(disc, &self.green, self.weight.clone())?)
    }

    fn branch(&self, cfg: &BlowupConfiguration, heights: &[f64]) -> Result<(GelfandProblem, Branch, f64), Failure> {
        let top = heights.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s));
        let p = self.problem(cfg, mu_hat_of_height(top))?;
        let r0 = default_r0(cfg, &self.domain);
        let b = continue_branch(&p, &self.green, cfg, heights, r0, &self.newton)?;
        Ok((p, b, r0))
    }

    fn point_report<'a>(
        &self,
        p: &GelfandProblem,
        cfg: &BlowupConfiguration,
        pt: &'a BranchPoint,
        r0: f64,
        ld: (f64, f64),
        spectrum: bool,
    ) -> Result<PointReport<'a>, Failure> {
        let peaks = peak_data(p, &self.green, cfg, pt, r0)?;
        let errors = inner_outer_errors(p, &self.green, cfg, pt, &peaks)?;
        let expansion = expansion_check(cfg, peaks.lambda, peaks.peaks[0].mu, ld.0, ld.1);
        let spectrum = if spectrum { Some(linearized_spectrum(p, &pt.w, pt.eps2, 3, 1e-6)?) } else { None };
        Ok(PointReport { point: pt, peaks, errors, expansion, spectrum })
    }

    fn l_and_d(&self, cfg: &BlowupConfiguration) -> Result<(f64, f64), Failure> {
        Ok((l_of_q(cfg, &self.green, &self.weight)?, d_of_q(cfg, &self.green, &self.weight, None)?.value))
    }

    fn run(&mut self, i: usize, task: &Task, art: &mut Artifacts, summary: &mut String) -> Result<(), Failure> {
        let stem = format!("task{i:02}_{}", task.kind());
        match task {
            Task::GreenTable { points } => {
                let pts: Vec<_> = points.iter().map(|p| vec2(p[0], p[1])).collect();
                let mut rows = Vec::new();
                for (a, &x) in pts.iter().enumerate() {
                    for (b, &y) in pts.iter().enumerate() {
                        let g = if a == b { f64::NAN } else { self.green.green_value(x, y)? };
                        let r = self.green.regular_part(x, y)?;
                        rows.push(vec![a.to_string(), b.to_string(), num(x.x), num(x.y), num(y.x), num(y.y), num(g), num(r)]);
                    }
                }
                art.csv(&format!("{stem}.csv"), &["i", "j", "x1", "x2", "y1", "y2", "green", "regular_part"], &rows)?;
                summary.push_str(&format!("task {i}: Green table over {} points\n", pts.len()));
            }
            Task::CriticalPoints { m, search } => {
                let out = find_critical_points(&self.green, &self.weight, *m, search)?;
                let mut header: Vec<String> = ["index", "value", "grad_norm", "degenerate", "hessian_det"].iter().map(|s| s.to_string()).collect();
                header.extend((0..2 * m).map(|k| format!("eig_{k}")));
                header.extend((0..*m).flat_map(|j| [format!("q{j}_x"), format!("q{j}_y")]));
                let rows: Vec<Vec<String>> = out
                    .records
                    .iter()
                    .enumerate()
                    .map(|(k, r)| {
                        let mut row = vec![k.to_string(), num(r.value), num(r.grad_norm), r.degenerate.to_string(), num(r.determinant())];
                        row.extend(r.eigenvalues.iter().map(|&e| num(e)));
                        row.extend(r.configuration.points.iter().flat_map(|q| [num(q.x), num(q.y)]));
                        row
                    })
                    .collect();
                art.csv(&format!("{stem}.csv"), &header, &rows)?;
                art.json(&format!("{stem}.json"), &out)?;
                summary.push_str(&format!("task {i}: {} critical points of f_{m} from {} starts\n", out.records.len(), out.starts));
            }
            Task::Solve { mu_hat, .. } => {
                let cfg = self.configuration(&task.at().unwrap())?;
                let p = self.problem(&cfg, *mu_hat)?;
                let r0 = default_r0(&cfg, &self.domain);
                let mu = balanced_heights(&cfg, *mu_hat);
                let ans = bubble_ansatz(&p, &self.green, &cfg, &mu, r0)?;
                let res = newton_solve(&p, &ans.w, ans.eps(), &self.newton)?;
                let node = p.disc.unknown[p.disc.spec.nearest(cfg.points[0])].unwrap_or(0);
                let s = res.w[node];
                let pt = BranchPoint::from_solution(&p, &cfg, r0, res.w, ans.eps2, s)?;
                art.csv(&format!("{stem}.csv"), &branch_header(cfg.m()), &[branch_row(&pt)])?;
                art.json(&format!("{stem}.json"), &pt)?;
                summary.push_str(&format!("task {i}: solved at ε² = {}, λ = {}, max w = {}\n", pt.eps2, pt.lambda, pt.max_w));
            }
            Task::Continue { heights, .. } => {
                let cfg = self.configuration(&task.at().unwrap())?;
                let (_, b, _) = self.branch(&cfg, heights)?;
                let rows: Vec<_> = b.points.iter().map(branch_row).collect();
                art.csv(&format!("{stem}.csv"), &branch_header(cfg.m()), &rows)?;
                #[derive(Serialize)]
                struct Out<'a> {
                    branch: &'a Branch,
                    fold: Option<gelfand_core::solver::Fold>,
                }
                art.json(&format!("{stem}.json"), &Out { branch: &b, fold: b.fold() })?;
                summary.push_str(&format!("task {i}: branch with {} points\n", b.points.len()));
            }
            Task::Diagnose { heights, spectrum, .. } => {
                let cfg = self.configuration(&task.at().unwrap())?;
                let (p, b, r0) = self.branch(&cfg, heights)?;
                let ld = self.l_and_d(&cfg)?;
                let mut rows = Vec::new();
                for (k, pt) in b.points.iter().enumerate() {
                    let rep = self.point_report(&p, &cfg, pt, r0, ld, *spectrum)?;
                    art.json(&format!("{stem}_point{k:02}.json"), &rep)?;
                    let min_eig = rep.spectrum.as_ref().map_or(f64::NAN, |s| s.eigenvalues.iter().fold(f64::INFINITY, |m, e| m.min(e.abs())));
                    rows.push(vec![
                        num(pt.s),
                        num(pt.eps2),
                        num(rep.peaks.lambda),
                        num(rep.peaks.mu),
                        num(rep.expansion.lambda_gap),
                        num(ratio_or_nan(&rep.expansion)),
                        num(rep.errors.phi_sup),
                        num(min_eig),
                    ]);
                }
                art.csv(
                    &format!("{stem}.csv"),
                    &["s", "eps2", "lambda", "mu", "lambda_gap", "lambda_gap_ratio", "phi_sup", "min_abs_eig"],
                    &rows,
                )?;
                summary.push_str(&format!("task {i}: diagnosed {} points\n", b.points.len()));
            }
            Task::UniquenessProbe { height, probe, .. } => {
                let cfg = self.configuration(&task.at().unwrap())?;
                let (p, b, r0) = self.branch(&cfg, &[*height])?;
                let rep = uniqueness_probe(&p, &self.green, &cfg, &b.points[0], r0, probe, &self.newton)?;
                let rows: Vec<_> = rep
                    .runs
                    .iter()
                    .map(|r| vec![r.start.to_string(), format!("{:?}", r.status).to_lowercase(), r.iterations.to_string(), num(r.max_w)])
                    .collect();
                art.csv(&format!("{stem}.csv"), &["start", "status", "iterations", "max_w"], &rows)?;
                art.json(&format!("{stem}.json"), &rep)?;
                summary.push_str(&format!("task {i}: probe at ε = {}, max difference {:e}\n", rep.eps, rep.max_difference));
            }
            Task::Sweep { deltas, .. } => {
                let cfg = self.configuration(&task.at().unwrap())?;
                let ld = self.l_and_d(&cfg)?;
                let mut rows = Vec::new();
                for &delta in deltas {
                    let (p, b, r0) = self.branch(&cfg, &[height_of_delta(delta)])?;
                    let pt = &b.points[0];
                    let rep = self.point_report(&p, &cfg, pt, r0, ld, false)?;
                    let mut push = |q: &str, j: Option<usize>, v: f64| {
                        rows.push(vec![num(delta), q.to_string(), j.map_or(String::new(), |j| j.to_string()), num(v)]);
                    };
                    push("eps2", None, pt.eps2);
                    push("lambda", None, rep.peaks.lambda);
                    push("max_w", None, pt.max_w);
                    push("mu", None, rep.peaks.mu);
                    push("lambda_gap", None, rep.expansion.lambda_gap);
                    push("lambda_gap_ratio", None, ratio_or_nan(&rep.expansion));
                    push("phi_sup", None, rep.errors.phi_sup);
                    push("phi_grad_sup", None, rep.errors.phi_grad_sup);
                    for (j, pk) in rep.peaks.peaks.iter().enumerate() {
                        push("mu_hat", Some(j), pk.mu_hat);
                        push("rho_j", Some(j), pk.rho);
                        push("offset", Some(j), pk.offset);
                        push("height_residual", Some(j), pk.height_residual);
                        push("balance", Some(j), pk.balance);
                        push("eta_sup", Some(j), rep.errors.eta_sup[j]);
                    }
                }
                art.csv(&format!("{stem}.csv"), &["delta", "quantity", "peak", "value"], &rows)?;
                summary.push_str(&format!("task {i}: sweep over {} values of δ\n", deltas.len()));
            }
        }
        Ok(())
    }
}

fn branch_header(m: usize) -> Vec<String> {
    let mut h: Vec<String> = ["s", "eps", "eps2", "lambda", "max_w", "residual"].iter().map(|c| c.to_string()).collect();
    h.extend((0..m).flat_map(|j| [format!("peak{j}_x"), format!("peak{j}_y"), format!("peak{j}_height")]));
    h
}

fn branch_row(pt: &BranchPoint) -> Vec<String> {
    let mut r = vec![num(pt.s), num(pt.eps), num(pt.eps2), num(pt.lambda), num(pt.max_w), num(pt.residual)];
    r.extend(pt.peaks.iter().flat_map(|p| [num(p.location.x), num(p.location.y), num(p.height)]));
    r
}
