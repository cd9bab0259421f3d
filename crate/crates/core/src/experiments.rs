//! Experiment recipes behind the `gradfit` binary.
//!
//! A refinement level is two rounds of uniform bisection, so the mesh width
//! halves from one level to the next and all levels are similar.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::global_approx::{
    apriori_bound, build_space, diagnostics, local_constants, BoundaryCondition, GlobalError, Ratio, SolveOptions,
};
use crate::local_approx::{default_rule, LocalError};
use crate::mesh::{builtin, Mesh, MeshError};
use crate::registry::{lookup, RegistryEntry, RegistryError};
use crate::tree::{
    near_best_report, tree_budget_schedule, tree_threshold, Control, NearBestRow, TreeError, TreeOptions,
    ENUMERATION_LIMIT, SCHEMA,
};

pub const MAX_DEGREE: usize = 4;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("cannot read mesh file {path}: {source}")]
    MeshFile { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Global(#[from] GlobalError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Local(#[from] LocalError),
}

impl ExperimentError {
    /// 2 for configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_)
            | ExperimentError::Registry(RegistryError::UnknownFunction { .. })
            | ExperimentError::MeshFile { .. }
            | ExperimentError::Mesh(MeshError::Parse(_)) => 2,
            ExperimentError::Global(GlobalError::InconsistentBc(_) | GlobalError::UnknownBoundaryCondition(_)) => 2,
            ExperimentError::Tree(TreeError::BudgetTooSmall { .. } | TreeError::EnumerationBudget(_)) => 2,
            ExperimentError::Tree(TreeError::BadThreshold(_)) => 2,
            _ => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeshSource {
    UnitSquare,
    LShape,
    File(PathBuf),
}

impl FromStr for MeshSource {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "unit-square" => MeshSource::UnitSquare,
            "l-shape" => MeshSource::LShape,
            path => MeshSource::File(PathBuf::from(path)),
        })
    }
}

impl MeshSource {
    pub fn load(&self) -> Result<Mesh, ExperimentError> {
        match self {
            MeshSource::UnitSquare => Ok(builtin::unit_square()),
            MeshSource::LShape => Ok(builtin::l_shape()),
            MeshSource::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|source| ExperimentError::MeshFile { path: path.clone(), source })?;
                Ok(Mesh::from_text(&text)?)
            }
        }
    }
}

/// Parses `"3"` (meaning `1..=3`), `"2..5"` (inclusive) or `"1,3,4"`.
pub fn parse_levels(s: &str) -> Result<Vec<usize>, ExperimentError> {
    let bad = || ExperimentError::Config(format!("invalid level list '{s}'"));
    let levels: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (a.trim().parse::<usize>().map_err(|_| bad())?, b.trim().parse::<usize>().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else if s.contains(',') {
        s.split(',').map(|p| p.trim().parse::<usize>().map_err(|_| bad())).collect::<Result<_, _>>()?
    } else {
        let n = s.trim().parse::<usize>().map_err(|_| bad())?;
        (1..=n).collect()
    };
    if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad());
    }
    Ok(levels)
}

pub fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>, ExperimentError> {
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|_| ExperimentError::Config(format!("invalid {what} '{p}'"))))
        .collect()
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub function: String,
    pub degree: usize,
    /// Defaults to the entry's preferred condition.
    pub bc: Option<BoundaryCondition>,
    /// Defaults to the entry's domain.
    pub mesh: Option<MeshSource>,
    pub levels: Vec<usize>,
    pub thresholds: Vec<f64>,
    pub budgets: Vec<usize>,
    pub quad_degree: Option<usize>,
    pub cg_tol: f64,
    /// Seeds the gradient check at setup.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            function: "sine".into(),
            degree: 1,
            bc: None,
            mesh: None,
            levels: (1..=5).collect(),
            thresholds: Vec::new(),
            budgets: Vec::new(),
            quad_degree: None,
            cg_tol: 1e-12,
            seed: 0,
        }
    }
}

/// Validated inputs shared by all recipes.
pub struct Setup {
    pub entry: RegistryEntry,
    pub bc: BoundaryCondition,
    pub mesh: Mesh,
    pub opts: SolveOptions,
}

impl ExperimentConfig {
    pub fn setup(&self) -> Result<Setup, ExperimentError> {
        if !(1..=MAX_DEGREE).contains(&self.degree) {
            return Err(ExperimentError::Config(format!("degree {} outside 1..={MAX_DEGREE}", self.degree)));
        }
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return Err(ExperimentError::Config(format!("cg tolerance {} outside (0, 1)", self.cg_tol)));
        }
        if let Some(q) = self.quad_degree {
            if q == 0 || q > crate::quadrature::MAX_DEGREE {
                return Err(ExperimentError::Config(format!(
                    "quadrature degree {q} outside 1..={}",
                    crate::quadrature::MAX_DEGREE
                )));
            }
        }
        let entry = lookup(&self.function)?;
        let mut probe = entry.domain.initial_mesh();
        probe.refine_uniform(2)?;
        entry.function.check_gradient(&probe, 16, &mut ChaCha8Rng::seed_from_u64(self.seed))?;
        let bc = self.bc.unwrap_or_else(|| entry.default_bc());
        if !entry.supports(bc) {
            return Err(ExperimentError::Config(format!("'{}' is not compatible with {bc}", entry.name)));
        }
        let mesh = match &self.mesh {
            Some(src) => src.load()?,
            None => entry.domain.initial_mesh(),
        };
        if !mesh.is_conforming() {
            return Err(ExperimentError::Config("initial mesh is not conforming".into()));
        }
        let opts = SolveOptions { quad_degree: self.quad_degree, cg_tol: self.cg_tol };
        Ok(Setup { entry, bc, mesh, opts })
    }

    fn tree_options(&self) -> Result<TreeOptions, ExperimentError> {
        let rule = match self.quad_degree {
            Some(q) => Some(crate::quadrature::triangle_rule(q).map_err(|e| ExperimentError::Config(e.to_string()))?),
            None => None,
        };
        Ok(TreeOptions { rule, ..TreeOptions::default() })
    }
}

/// The mesh of `level` (two bisection rounds per level).
pub fn level_mesh(mesh0: &Mesh, level: usize) -> Result<Mesh, MeshError> {
    let mut m = mesh0.clone();
    m.refine_uniform(2 * level)?;
    Ok(m)
}

fn fmt_f(x: f64) -> String {
    format!("{x:.10e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

/// `log(a₁/a₂) / log(b₁/b₂)`.
fn order(a1: f64, a2: f64, b1: f64, b2: f64) -> Option<f64> {
    (a1 > 0.0 && a2 > 0.0 && b1 != b2).then(|| (a1 / a2).ln() / (b1 / b2).ln())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub level: usize,
    pub h: f64,
    pub elements: usize,
    pub dofs: usize,
    #[serde(rename = "E")]
    pub e: f64,
    pub local_sum: f64,
    pub ratio: Ratio,
    pub apriori_bound: Option<f64>,
    /// Order against the previous level.
    pub eoc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatesTable {
    pub rows: Vec<RateRow>,
    /// Order over the last three levels.
    pub final_eoc: Option<f64>,
}

pub const RATES_HEADER: &str = "level,h,elements,dofs,E,local_sum,ratio,apriori_bound,eoc";

impl RatesTable {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{RATES_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.level,
                fmt_f(r.h),
                r.elements,
                r.dofs,
                fmt_f(r.e),
                fmt_f(r.local_sum),
                r.ratio,
                fmt_opt(r.apriori_bound),
                fmt_opt(r.eoc)
            );
        }
        out
    }
}

pub fn run_rates(config: &ExperimentConfig) -> Result<RatesTable, ExperimentError> {
    let setup = config.setup()?;
    let degree = config.degree;
    let rule = setup.opts.rule(degree)?;
    let mut rows: Vec<RateRow> = Vec::new();
    for &level in &config.levels {
        let mesh = level_mesh(&setup.mesh, level)?;
        let space = build_space(&mesh, degree, setup.bc)?;
        let d = diagnostics(&setup.entry.function, &space, &setup.opts)?;
        let h = mesh.max_diameter();
        let s = degree + 1;
        let apriori = match (d.ratio.value(), setup.entry.function.max_derivative_order()) {
            (Some(delta), Some(m)) if m >= s => {
                Some(apriori_bound(&setup.entry.function, &mesh, degree, s, delta, &rule)?.bound)
            }
            _ => None,
        };
        let eoc = rows.last().and_then(|p| order(p.e, d.e, p.h, h));
        rows.push(RateRow {
            level,
            h,
            elements: d.elements,
            dofs: d.dofs,
            e: d.e,
            local_sum: d.local_sum,
            ratio: d.ratio,
            apriori_bound: apriori,
            eoc,
        });
    }
    let final_eoc = (rows.len() >= 3).then(|| {
        let (a, b) = (&rows[rows.len() - 3], &rows[rows.len() - 1]);
        order(a.e, b.e, a.h, b.h)
    });
    Ok(RatesTable { rows, final_eoc: final_eoc.flatten() })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecouplingRow {
    pub level: usize,
    pub elements: usize,
    pub dofs: usize,
    pub local_sum: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub ratio: Ratio,
    pub interp_error: f64,
    pub max_delta_k: f64,
    /// Bound on the decoupling coefficient from the `δ_K`.
    pub theoretical_bound: f64,
}

pub const DECOUPLING_HEADER: &str = "level,elements,dofs,local_sum,E,ratio,interp_error,max_delta_k,theoretical_bound";

pub fn decoupling_csv(rows: &[DecouplingRow]) -> String {
    let mut out = format!("{DECOUPLING_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.level,
            r.elements,
            r.dofs,
            fmt_f(r.local_sum),
            fmt_f(r.e),
            r.ratio,
            fmt_f(r.interp_error),
            fmt_f(r.max_delta_k),
            fmt_f(r.theoretical_bound)
        );
    }
    out
}

pub fn run_decoupling(config: &ExperimentConfig) -> Result<Vec<DecouplingRow>, ExperimentError> {
    let setup = config.setup()?;
    let mut rows = Vec::new();
    for &level in &config.levels {
        let mesh = level_mesh(&setup.mesh, level)?;
        let space = build_space(&mesh, config.degree, setup.bc)?;
        let d = diagnostics(&setup.entry.function, &space, &setup.opts)?;
        let constants = local_constants(&space)?;
        rows.push(DecouplingRow {
            level,
            elements: d.elements,
            dofs: d.dofs,
            local_sum: d.local_sum,
            e: d.e,
            ratio: d.ratio,
            interp_error: d.interp_error,
            max_delta_k: constants.max_delta(),
            theoretical_bound: constants.global_bound(config.degree),
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeRow {
    pub control: Control,
    pub elements: usize,
    pub leaves: usize,
    #[serde(rename = "E")]
    pub e: f64,
    /// `(Σ_{M′} ε)^{1/2}`.
    pub broken_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeReport {
    pub rows: Vec<TreeRow>,
    /// Least-squares slope of `log E` against `log #M`.
    pub slope: Option<f64>,
    /// JSON lines of the last run.
    #[serde(skip)]
    pub log: String,
}

pub const TREE_HEADER: &str = "control,value,elements,leaves,E,broken_error";

impl TreeReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{TREE_HEADER}\n");
        for r in &self.rows {
            let (kind, value) = match r.control {
                Control::Threshold(t) => ("threshold", fmt_f(t)),
                Control::Budget(n) => ("budget", n.to_string()),
            };
            let _ = writeln!(out, "{kind},{value},{},{},{},{}", r.elements, r.leaves, fmt_f(r.e), fmt_f(r.broken_error));
        }
        out
    }
}

/// Least-squares slope of `log y` against `log x` over pairs with `y > 0`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Points used for the slope: the upper two decades of `#M`.
pub fn asymptotic_slope(pairs: &[(usize, f64)]) -> Option<f64> {
    let top = pairs.iter().map(|p| p.0).max()? as f64;
    let pts: Vec<(f64, f64)> = pairs.iter().filter(|p| p.0 as f64 >= top / 100.0).map(|p| (p.0 as f64, p.1)).collect();
    loglog_slope(&pts)
}

/// Budgets doubling from `2·#M₀` up to and including `max`.
pub fn budget_schedule(initial: usize, max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut b = 2 * initial;
    while b < max {
        out.push(b);
        b *= 2;
    }
    out.push(max);
    out
}

pub fn run_tree(config: &ExperimentConfig) -> Result<TreeReport, ExperimentError> {
    let setup = config.setup()?;
    let opts = config.tree_options()?;
    let v = &setup.entry.function;
    let rule = setup.opts.rule(config.degree)?;
    let ritz = |mesh: &Mesh| -> Result<f64, ExperimentError> {
        let space = build_space(mesh, config.degree, setup.bc)?;
        Ok(crate::global_approx::ritz_projection(v, &space, &rule, config.cg_tol)?.e)
    };
    let mut rows = Vec::new();
    let mut log = String::new();
    if !config.thresholds.is_empty() {
        for &t in &config.thresholds {
            let run = tree_threshold(v, &setup.mesh, config.degree, t, &opts)?;
            let e = ritz(&run.mesh)?;
            log = run.log_jsonl();
            log.push_str(&crate::tree::final_record(Control::Threshold(t), e, None, None));
            log.push('\n');
            rows.push(TreeRow {
                control: Control::Threshold(t),
                elements: run.mesh.active_count(),
                leaves: run.tree.leaf_count(),
                e,
                broken_error: run.tree.broken_error(),
            });
        }
    } else {
        let budgets = match config.budgets.as_slice() {
            [] => return Err(ExperimentError::Config("tree needs --thresholds or --budget".into())),
            [n] => budget_schedule(setup.mesh.active_count(), *n),
            many => many.to_vec(),
        };
        let snapshots = tree_budget_schedule(v, &setup.mesh, config.degree, &budgets, &opts)?;
        for s in &snapshots {
            let e = ritz(&s.run.mesh)?;
            rows.push(TreeRow {
                control: Control::Budget(s.budget),
                elements: s.run.mesh.active_count(),
                leaves: s.run.tree.leaf_count(),
                e,
                broken_error: s.run.tree.broken_error(),
            });
        }
        if let (Some(last), Some(row)) = (snapshots.last(), rows.last()) {
            log = last.run.log_jsonl();
            log.push_str(&crate::tree::final_record(Control::Budget(last.budget), row.e, None, None));
            log.push('\n');
        }
    }
    let pairs: Vec<(usize, f64)> = rows.iter().map(|r| (r.elements, r.e)).collect();
    Ok(TreeReport { slope: asymptotic_slope(&pairs), rows, log })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub schema: &'static str,
    pub function: String,
    pub degree: usize,
    pub rows: Vec<NearBestRow>,
    pub max_c1: Option<f64>,
}

/// Thresholds `t₀/2^k` with `t₀ = max ε(M₀)/2`, extended while `#M_t` fits
/// the enumeration limit.
pub fn automatic_thresholds(config: &ExperimentConfig, setup: &Setup) -> Result<Vec<f64>, ExperimentError> {
    let opts = config.tree_options()?;
    let rule = opts.rule.clone().unwrap_or_else(|| default_rule(config.degree));
    let v = &setup.entry.function;
    let mut top: f64 = 0.0;
    for k in setup.mesh.active_ids() {
        top = top.max(crate::local_approx::local_best_fit(v, &setup.mesh, k, config.degree, &rule)?.epsilon());
    }
    if top == 0.0 {
        return Ok(vec![1.0]);
    }
    let limit = setup.mesh.active_count() + ENUMERATION_LIMIT;
    let mut out = Vec::new();
    let mut t = top / 2.0;
    for _ in 0..40 {
        let run = tree_threshold(v, &setup.mesh, config.degree, t, &opts)?;
        if run.mesh.active_count() > limit {
            break;
        }
        out.push(t);
        t /= 2.0;
    }
    Ok(out)
}

pub fn run_oracle(config: &ExperimentConfig) -> Result<OracleReport, ExperimentError> {
    let setup = config.setup()?;
    let opts = config.tree_options()?;
    let thresholds =
        if config.thresholds.is_empty() { automatic_thresholds(config, &setup)? } else { config.thresholds.clone() };
    let rows = near_best_report(
        &setup.entry.function,
        &setup.mesh,
        config.degree,
        setup.bc,
        &thresholds,
        config.cg_tol,
        &opts,
    )?;
    let max_c1 = rows
        .iter()
        .filter_map(|r| match r.c1 {
            crate::tree::RealizedConstant::Value(c) => Some(c),
            crate::tree::RealizedConstant::Exact => None,
        })
        .reduce(f64::max);
    Ok(OracleReport { schema: SCHEMA, function: config.function.clone(), degree: config.degree, rows, max_c1 })
}

/// Size and shape summary of a mesh after `levels.last()` levels (0 if none).
pub fn mesh_info(config: &ExperimentConfig) -> Result<serde_json::Value, ExperimentError> {
    let mesh0 = match &config.mesh {
        Some(src) => src.load()?,
        None => lookup(&config.function)?.domain.initial_mesh(),
    };
    let level = config.levels.last().copied().unwrap_or(0);
    let mesh = level_mesh(&mesh0, level)?;
    Ok(json!({
        "schema": SCHEMA,
        "level": level,
        "vertices": mesh.vertices().len(),
        "elements": mesh.active_count(),
        "conforming": mesh.is_conforming(),
        "area": mesh.total_area(),
        "max_diameter": mesh.max_diameter(),
        "max_shape_coefficient": mesh.max_shape_coefficient(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_parsing() {
        assert_eq!(parse_levels("3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_levels("2..4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_levels("0,2,5").unwrap(), vec![0, 2, 5]);
        assert!(parse_levels("4..2").is_err());
        assert!(parse_levels("1,1").is_err());
        assert!(parse_levels("x").is_err());
    }

    #[test]
    fn slope_of_exact_power() {
        let pts: Vec<(f64, f64)> = (1..6).map(|k| (10f64.powi(k), 3.0 * 10f64.powi(k).powf(-0.5))).collect();
        assert!((loglog_slope(&pts).unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(budget_schedule(2, 20), vec![4, 8, 16, 20]);
        assert_eq!(budget_schedule(2, 2), vec![2]);
    }

    #[test]
    fn config_errors_map_to_exit_code_two() {
        let cfg = ExperimentConfig { degree: 5, ..Default::default() };
        assert_eq!(cfg.setup().err().unwrap().exit_code(), 2);
        let cfg = ExperimentConfig { function: "missing".into(), ..Default::default() };
        assert_eq!(cfg.setup().err().unwrap().exit_code(), 2);
        let cfg =
            ExperimentConfig { function: "lshape".into(), bc: Some(BoundaryCondition::Dirichlet0), ..Default::default() };
        assert_eq!(cfg.setup().err().unwrap().exit_code(), 2);
    }

    #[test]
    fn polynomial_members_have_zero_error() {
        let cfg =
            ExperimentConfig { function: "poly_2".into(), degree: 2, levels: vec![0, 1, 2], ..Default::default() };
        let t = run_rates(&cfg).unwrap();
        for r in &t.rows {
            assert!(r.e < 1e-10, "{}", r.e);
            assert_eq!(r.ratio, Ratio::Member);
        }
        assert!(t.to_csv().starts_with(RATES_HEADER));
    }

    #[test]
    fn rates_are_deterministic() {
        let cfg = ExperimentConfig { levels: vec![1, 2], ..Default::default() };
        assert_eq!(run_rates(&cfg).unwrap().to_csv(), run_rates(&cfg).unwrap().to_csv());
    }

    #[test]
    fn threshold_schedule_gives_nonincreasing_error() {
        let cfg = ExperimentConfig {
            function: "lshape".into(),
            thresholds: vec![1e-2, 2.5e-3, 6.25e-4],
            ..Default::default()
        };
        let r = run_tree(&cfg).unwrap();
        for w in r.rows.windows(2) {
            assert!(w[1].e <= w[0].e * (1.0 + 1e-9));
            assert!(w[1].elements >= w[0].elements);
        }
        assert!(r.log.lines().all(|l| l.contains(SCHEMA)));
    }
}
