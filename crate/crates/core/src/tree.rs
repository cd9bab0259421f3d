//! Adaptive tree approximation driven by the local errors `ε(K) = e(v,K)²`.
//!
//! Two variants are provided: the threshold algorithm, which grows every node
//! whose modified indicator `η` exceeds `t`, and a budgeted greedy variant that
//! bisects the leaf with the largest `η` while the completed mesh stays within
//! a prescribed size. [`sigma_prime`] enumerates all bisection subtrees of a
//! small forest and serves as the reference for near-best comparisons.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::global_approx::{build_space, ritz_projection, BoundaryCondition, GlobalError};
use crate::local_approx::{default_rule, EpsilonCache, LocalError, TargetFunction};
use crate::mesh::{Mesh, MeshError};
use crate::quadrature::TriangleRule;

pub const DEFAULT_DEPTH_CAP: u32 = 40;
/// Largest `N − #M₀` accepted by [`sigma_prime`].
pub const ENUMERATION_LIMIT: usize = 12;
pub const SCHEMA: &str = "gradfit/v1";

#[derive(Debug, Error, Clone)]
pub enum TreeError {
    #[error("threshold must be positive (got {0})")]
    BadThreshold(f64),
    #[error("budget {budget} is below the initial element count {initial}")]
    BudgetTooSmall { budget: usize, initial: usize },
    #[error("N − #M0 = {0} exceeds the enumeration limit {ENUMERATION_LIMIT}")]
    EnumerationBudget(usize),
    #[error("depth cap of {cap} generations reached")]
    DepthCap { cap: u32, partial: Box<TreeRun> },
    #[error("no run has more leaves than initial elements")]
    NoRefinement,
    #[error(transparent)]
    Local(#[from] LocalError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Global(#[from] GlobalError),
}

/// `η(K_i) = (ε(K_i)^{-1} + η(K)^{-1})^{-1}`, zero when either argument is zero.
pub fn child_eta(eps: f64, parent_eta: f64) -> f64 {
    if eps == 0.0 || parent_eta == 0.0 {
        0.0
    } else {
        1.0 / (1.0 / eps + 1.0 / parent_eta)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeNode {
    pub element: usize,
    pub eps: f64,
    pub eta: f64,
    /// Index of the parent node.
    pub parent: Option<usize>,
    pub children: Option<[usize; 2]>,
    pub generation: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    Threshold(f64),
    Budget(usize),
}

/// The refinement forest with its indicators and current leaf set `M′`.
#[derive(Clone, Debug, PartialEq)]
pub struct ApproxTree {
    pub nodes: Vec<TreeNode>,
    pub roots: Vec<usize>,
    pub control: Control,
}

impl ApproxTree {
    fn new(control: Control) -> Self {
        ApproxTree { nodes: Vec::new(), roots: Vec::new(), control }
    }

    fn push(&mut self, node: TreeNode) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    /// Node indices of the leaves, in increasing element id.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.nodes.len()).filter(|&i| self.nodes[i].children.is_none()).collect();
        out.sort_by_key(|&i| self.nodes[i].element);
        out
    }

    pub fn leaf_elements(&self) -> Vec<usize> {
        self.leaves().into_iter().map(|i| self.nodes[i].element).collect()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.children.is_none()).count()
    }

    /// `(Σ_{K∈M′} ε(K))^{1/2}`, the best error in the broken space on `M′`.
    pub fn broken_error(&self) -> f64 {
        self.nodes.iter().filter(|n| n.children.is_none()).map(|n| n.eps).sum::<f64>().sqrt()
    }

    /// Largest relative deviation from the `η` recursion over all non-root nodes.
    pub fn recursion_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for n in &self.nodes {
            let expected = match n.parent {
                None => n.eps,
                Some(p) => child_eta(n.eps, self.nodes[p].eta),
            };
            let scale = expected.abs().max(f64::MIN_POSITIVE);
            worst = worst.max((n.eta - expected).abs() / scale);
        }
        worst
    }
}

/// One bisection of the tree.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogRecord {
    pub step: usize,
    pub element: usize,
    pub eps: f64,
    pub eta: f64,
    pub leaf_count: usize,
}

#[derive(Clone, Debug)]
pub struct TreeRun {
    /// Mesh holding every element the tree refers to. For the threshold
    /// variant its active elements are exactly the leaves `M′`.
    pub forest: Mesh,
    /// The completion of `M′`.
    pub mesh: Mesh,
    pub tree: ApproxTree,
    pub log: Vec<LogRecord>,
    /// `(#M, (Σ_{M′} ε)^{1/2})` after every accepted step, starting with the
    /// initial mesh.
    pub history: Vec<(usize, f64)>,
}

impl TreeRun {
    /// JSON lines, one per bisection.
    pub fn log_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.log {
            out.push_str(
                &json!({"schema": SCHEMA, "step": r.step, "element": r.element, "eps": r.eps,
                        "eta": r.eta, "leaf_count": r.leaf_count})
                .to_string(),
            );
            out.push('\n');
        }
        out
    }
}

/// Final JSON line of a run.
pub fn final_record(control: Control, e: f64, sigma_prime: Option<f64>, c1: Option<f64>) -> String {
    let tb = match control {
        Control::Threshold(t) => json!(t),
        Control::Budget(n) => json!(n),
    };
    json!({"schema": SCHEMA, "threshold_or_budget": tb, "E": e, "sigma_prime": sigma_prime,
           "C1_realized": c1})
    .to_string()
}

#[derive(Clone, Debug)]
pub struct TreeOptions {
    pub rule: Option<TriangleRule>,
    pub depth_cap: u32,
}

impl Default for TreeOptions {
    fn default() -> Self {
        TreeOptions { rule: None, depth_cap: DEFAULT_DEPTH_CAP }
    }
}

struct Evaluator<'a> {
    v: &'a TargetFunction,
    degree: usize,
    rule: TriangleRule,
    cache: EpsilonCache,
}

impl<'a> Evaluator<'a> {
    fn new(v: &'a TargetFunction, degree: usize, opts: &TreeOptions) -> Self {
        let rule = opts.rule.clone().unwrap_or_else(|| default_rule(degree));
        Evaluator { v, degree, rule, cache: EpsilonCache::new() }
    }

    fn eps(&mut self, mesh: &Mesh, k: usize) -> Result<f64, LocalError> {
        self.cache.get_or_compute(self.v, mesh, k, self.degree, &self.rule)
    }

    /// `ε` of both children, evaluated concurrently.
    fn eps_pair(&mut self, mesh: &Mesh, [a, b]: [usize; 2]) -> Result<(f64, f64), LocalError> {
        let (ca, cb) = (self.cache.get(self.v, a, self.degree), self.cache.get(self.v, b, self.degree));
        let (v, d, rule) = (self.v, self.degree, &self.rule);
        let eval = |k: usize, c: Option<f64>| -> Result<f64, LocalError> {
            match c {
                Some(e) => Ok(e),
                None => crate::local_approx::local_best_fit(v, mesh, k, d, rule).map(|f| f.epsilon()),
            }
        };
        let (ea, eb) = rayon::join(|| eval(a, ca), || eval(b, cb));
        let (ea, eb) = (ea?, eb?);
        self.cache.insert(self.v, a, self.degree, ea);
        self.cache.insert(self.v, b, self.degree, eb);
        Ok((ea, eb))
    }
}

fn seed_roots(
    tree: &mut ApproxTree,
    mesh: &Mesh,
    eval: &mut Evaluator<'_>,
) -> Result<(), TreeError> {
    for k in mesh.active_ids() {
        let eps = eval.eps(mesh, k)?;
        let idx = tree.push(TreeNode {
            element: k,
            eps,
            eta: eps,
            parent: None,
            children: None,
            generation: 0,
        });
        tree.roots.push(idx);
    }
    Ok(())
}

fn attach_children(
    tree: &mut ApproxTree,
    node: usize,
    children: [usize; 2],
    eps: (f64, f64),
) -> [usize; 2] {
    let parent_eta = tree.nodes[node].eta;
    let generation = tree.nodes[node].generation + 1;
    let mut idx = [0; 2];
    for (slot, (k, e)) in [(children[0], eps.0), (children[1], eps.1)].into_iter().enumerate() {
        idx[slot] = tree.push(TreeNode {
            element: k,
            eps: e,
            eta: child_eta(e, parent_eta),
            parent: Some(node),
            children: None,
            generation,
        });
    }
    tree.nodes[node].children = Some(idx);
    idx
}

/// Threshold algorithm: grow every node with `η > t`, then complete the leaves.
pub fn tree_threshold(
    v: &TargetFunction,
    mesh0: &Mesh,
    degree: usize,
    t: f64,
    opts: &TreeOptions,
) -> Result<TreeRun, TreeError> {
    if !(t > 0.0) {
        return Err(TreeError::BadThreshold(t));
    }
    let mut eval = Evaluator::new(v, degree, opts);
    let mut work = mesh0.clone();
    let mut tree = ApproxTree::new(Control::Threshold(t));
    seed_roots(&mut tree, &work, &mut eval)?;
    let mut log = Vec::new();
    let mut capped = false;
    // depth-first, left child first, as in the recursive formulation
    let mut stack: Vec<usize> = tree.roots.iter().rev().copied().collect();
    while let Some(node) = stack.pop() {
        if tree.nodes[node].eta <= t {
            continue;
        }
        if tree.nodes[node].generation >= opts.depth_cap {
            capped = true;
            continue;
        }
        let element = tree.nodes[node].element;
        let (c1, c2) = work.bisect(element)?;
        let eps = eval.eps_pair(&work, [c1, c2])?;
        let [a, b] = attach_children(&mut tree, node, [c1, c2], eps);
        log.push(LogRecord {
            step: log.len() + 1,
            element,
            eps: tree.nodes[node].eps,
            eta: tree.nodes[node].eta,
            leaf_count: work.active_count(),
        });
        stack.push(b);
        stack.push(a);
    }
    let mesh = work.completed()?;
    let history = vec![(mesh.active_count(), tree.broken_error())];
    let run = TreeRun { forest: work, mesh, tree, log, history };
    if capped {
        return Err(TreeError::DepthCap { cap: opts.depth_cap, partial: Box::new(run) });
    }
    Ok(run)
}

#[derive(PartialEq)]
struct Candidate {
    eta: f64,
    element: usize,
    node: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // largest η first, then lowest element id
        self.eta.total_cmp(&other.eta).then_with(|| other.element.cmp(&self.element))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Snapshot of the budget run when its completed mesh last fitted a budget.
#[derive(Clone, Debug)]
pub struct BudgetSnapshot {
    pub budget: usize,
    pub run: TreeRun,
}

/// Greedy variant for several budgets at once.
///
/// The greedy sequence does not depend on the budget except through the
/// stopping step, so the run for a smaller budget is a prefix of the run for
/// a larger one. Budgets are processed in increasing order.
pub fn tree_budget_schedule(
    v: &TargetFunction,
    mesh0: &Mesh,
    degree: usize,
    budgets: &[usize],
    opts: &TreeOptions,
) -> Result<Vec<BudgetSnapshot>, TreeError> {
    let initial = mesh0.active_count();
    let mut sorted = budgets.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if let Some(&b) = sorted.iter().find(|&&b| b < initial) {
        return Err(TreeError::BudgetTooSmall { budget: b, initial });
    }
    let Some(&largest) = sorted.last() else { return Ok(Vec::new()) };
    if !mesh0.is_conforming() {
        return Err(GlobalError::NonConforming.into());
    }

    let mut eval = Evaluator::new(v, degree, opts);
    let mut master = mesh0.clone();
    let mut tree = ApproxTree::new(Control::Budget(largest));
    seed_roots(&mut tree, &master, &mut eval)?;
    let mut heap: BinaryHeap<Candidate> = tree
        .roots
        .iter()
        .map(|&i| Candidate { eta: tree.nodes[i].eta, element: tree.nodes[i].element, node: i })
        .collect();
    let mut log = Vec::new();
    let mut history = vec![(master.active_count(), tree.broken_error())];
    let mut leaf_sum: f64 = tree.nodes.iter().map(|n| n.eps).sum();
    let mut snapshots = Vec::new();
    let mut pending = sorted.into_iter().peekable();
    let snapshot = |tree: &ApproxTree, master: &Mesh, log: &[LogRecord], history: &[(usize, f64)], budget: usize| {
        let mut t = tree.clone();
        t.control = Control::Budget(budget);
        BudgetSnapshot {
            budget,
            run: TreeRun {
                forest: master.clone(),
                mesh: master.clone(),
                tree: t,
                log: log.to_vec(),
                history: history.to_vec(),
            },
        }
    };
    let mut capped = false;

    while let Some(&budget) = pending.peek() {
        let Some(top) = heap.pop() else {
            snapshots.push(snapshot(&tree, &master, &log, &history, budget));
            pending.next();
            continue;
        };
        let node = top.node;
        if top.eta == 0.0 {
            // nothing left to improve; every remaining budget sees this mesh
            heap.push(top);
            snapshots.push(snapshot(&tree, &master, &log, &history, budget));
            pending.next();
            continue;
        }
        if tree.nodes[node].generation >= opts.depth_cap {
            capped = true;
            continue;
        }
        let element = tree.nodes[node].element;
        let children = if let Some(ch) = master.element(element).children {
            // already split by an earlier completion: the count is unchanged
            ch
        } else {
            let cp = master.checkpoint();
            master.refine_conforming(element)?;
            if master.active_count() > budget {
                master.rollback(cp);
                heap.push(top);
                snapshots.push(snapshot(&tree, &master, &log, &history, budget));
                pending.next();
                continue;
            }
            master.element(element).children.expect("just bisected")
        };
        let eps = eval.eps_pair(&master, children)?;
        let [a, b] = attach_children(&mut tree, node, children, eps);
        leaf_sum += eps.0 + eps.1 - tree.nodes[node].eps;
        for i in [a, b] {
            heap.push(Candidate { eta: tree.nodes[i].eta, element: tree.nodes[i].element, node: i });
        }
        log.push(LogRecord {
            step: log.len() + 1,
            element,
            eps: tree.nodes[node].eps,
            eta: tree.nodes[node].eta,
            // each bisection adds one leaf
            leaf_count: mesh0.active_count() + log.len() + 1,
        });
        history.push((master.active_count(), leaf_sum.max(0.0).sqrt()));
    }
    if capped {
        let last = snapshots.pop().map(|s| s.run);
        if let Some(run) = last {
            return Err(TreeError::DepthCap { cap: opts.depth_cap, partial: Box::new(run) });
        }
    }
    Ok(snapshots)
}

/// Greedy budget algorithm for a single budget `N`.
pub fn tree_budget(
    v: &TargetFunction,
    mesh0: &Mesh,
    degree: usize,
    budget: usize,
    opts: &TreeOptions,
) -> Result<TreeRun, TreeError> {
    let mut s = tree_budget_schedule(v, mesh0, degree, &[budget], opts)?;
    Ok(s.pop().expect("one budget").run)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SigmaPrimeResult {
    #[serde(rename = "N")]
    pub n: usize,
    pub value: f64,
    /// Element ids of the optimal leaf set on the enumeration mesh.
    pub leaves: Vec<usize>,
}

/// Best broken errors over all bisection subtrees, by exhaustive enumeration.
///
/// Returns `σ′(v, N)` for every `N` in `#M₀..=n_max` together with the
/// enumeration mesh, on which the returned leaf ids live.
pub fn sigma_prime_table(
    v: &TargetFunction,
    mesh0: &Mesh,
    degree: usize,
    n_max: usize,
    opts: &TreeOptions,
) -> Result<(Vec<SigmaPrimeResult>, Mesh), TreeError> {
    let n0 = mesh0.active_count();
    if n_max < n0 {
        return Err(TreeError::BudgetTooSmall { budget: n_max, initial: n0 });
    }
    if n_max - n0 > ENUMERATION_LIMIT {
        return Err(TreeError::EnumerationBudget(n_max - n0));
    }
    let mut eval = Evaluator::new(v, degree, opts);
    let mut scratch = mesh0.clone();
    let roots = scratch.active_ids();
    let mut eps: HashMap<usize, f64> = HashMap::new();
    for &k in &roots {
        eps.insert(k, eval.eps(&scratch, k)?);
    }
    let value = |set: &[usize], eps: &HashMap<usize, f64>| set.iter().map(|k| eps[k]).sum::<f64>();

    let mut best: Vec<(f64, Vec<usize>)> = Vec::with_capacity(n_max - n0 + 1);
    let mut level: Vec<Vec<usize>> = vec![roots.clone()];
    best.push((value(&roots, &eps), roots));
    for _ in n0..n_max {
        let mut next: HashSet<Vec<usize>> = HashSet::new();
        for set in &level {
            for (i, &k) in set.iter().enumerate() {
                let ch = scratch.children_or_bisect(k)?;
                if !eps.contains_key(&ch[0]) {
                    let (a, b) = eval.eps_pair(&scratch, ch)?;
                    eps.insert(ch[0], a);
                    eps.insert(ch[1], b);
                }
                let mut s = Vec::with_capacity(set.len() + 1);
                s.extend_from_slice(&set[..i]);
                s.extend_from_slice(&set[i + 1..]);
                s.extend_from_slice(&ch);
                s.sort_unstable();
                next.insert(s);
            }
        }
        let mut candidates: Vec<Vec<usize>> = next.into_iter().collect();
        candidates.sort_unstable();
        let mut champion: Option<(f64, &Vec<usize>)> = None;
        for c in &candidates {
            let s = value(c, &eps);
            if champion.is_none_or(|b| s < b.0) {
                champion = Some((s, c));
            }
        }
        let (s, c) = champion.expect("every leaf can be bisected");
        best.push((s, c.clone()));
        level = candidates;
    }
    // at most N leaves: running minimum over exact leaf counts
    let mut out = Vec::with_capacity(best.len());
    let mut running: Option<(f64, Vec<usize>)> = None;
    for (j, (s, leaves)) in best.into_iter().enumerate() {
        if running.as_ref().is_none_or(|r| s < r.0) {
            running = Some((s, leaves));
        }
        let r = running.as_ref().expect("set above");
        out.push(SigmaPrimeResult { n: n0 + j, value: r.0.max(0.0).sqrt(), leaves: r.1.clone() });
    }
    Ok((out, scratch))
}

/// `σ′(v, N) = min { (Σ_{K∈M′} ε(K))^{1/2} : M′ a bisection subtree, #M′ ≤ N }`.
pub fn sigma_prime(
    v: &TargetFunction,
    mesh0: &Mesh,
    degree: usize,
    n: usize,
    opts: &TreeOptions,
) -> Result<SigmaPrimeResult, TreeError> {
    let (mut table, _) = sigma_prime_table(v, mesh0, degree, n, opts)?;
    Ok(table.pop().expect("non-empty table"))
}

/// `E / σ′`, with both-zero reported as exact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RealizedConstant {
    Value(f64),
    Exact,
}

impl Serialize for RealizedConstant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            RealizedConstant::Value(c) => s.serialize_f64(*c),
            RealizedConstant::Exact => s.serialize_str("exact"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NearBestRow {
    pub threshold: f64,
    /// `#M_t`.
    pub elements: usize,
    /// `#M′_t`.
    pub leaves: usize,
    #[serde(rename = "E")]
    pub e: f64,
    pub sigma_prime: f64,
    #[serde(rename = "C1_realized")]
    pub c1: RealizedConstant,
}

/// For each threshold: `E(v, S(M_t))`, `#M_t` and `σ′(v, #M_t)`.
pub fn near_best_report(
    v: &TargetFunction,
    mesh0: &Mesh,
    degree: usize,
    bc: BoundaryCondition,
    thresholds: &[f64],
    cg_tol: f64,
    opts: &TreeOptions,
) -> Result<Vec<NearBestRow>, TreeError> {
    let rule = opts.rule.clone().unwrap_or_else(|| default_rule(degree));
    let mut runs = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let run = tree_threshold(v, mesh0, degree, t, opts)?;
        let space = build_space(&run.mesh, degree, bc)?;
        let e = ritz_projection(v, &space, &rule, cg_tol)?.e;
        runs.push((t, run.mesh.active_count(), run.tree.leaf_count(), e));
    }
    let n_max = runs.iter().map(|r| r.1).max().unwrap_or(mesh0.active_count());
    let (table, _) = sigma_prime_table(v, mesh0, degree, n_max, opts)?;
    let n0 = mesh0.active_count();
    Ok(runs
        .into_iter()
        .map(|(threshold, elements, leaves, e)| {
            let sigma = table[elements - n0].value;
            let scale = table[0].value.max(e);
            let c1 = if e <= 1e-12 * scale.max(f64::MIN_POSITIVE) && sigma <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
                RealizedConstant::Exact
            } else {
                RealizedConstant::Value(e / sigma)
            };
            NearBestRow { threshold, elements, leaves, e, sigma_prime: sigma, c1 }
        })
        .collect())
}

/// Sizes of one completion: `(#M₀, #M′, #complete(M′))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CompletionSample {
    pub initial: usize,
    pub leaves: usize,
    pub completed: usize,
}

/// `max (#M − #M₀) / (#M′ − #M₀)` over samples with `#M′ > #M₀`.
pub fn completion_overhead(samples: &[CompletionSample]) -> Result<f64, TreeError> {
    samples
        .iter()
        .filter(|s| s.leaves > s.initial)
        .map(|s| (s.completed - s.initial) as f64 / (s.leaves - s.initial) as f64)
        .reduce(f64::max)
        .ok_or(TreeError::NoRefinement)
}

/// Random leaf bisections without completion, sampling the completion
/// overhead at each checkpoint.
pub fn completion_stress<R: rand::Rng>(
    mesh0: &Mesh,
    bisections: usize,
    checkpoints: &[usize],
    rng: &mut R,
) -> Result<Vec<CompletionSample>, TreeError> {
    let mut work = mesh0.clone();
    let initial = mesh0.active_count();
    let mut leaves = work.active_ids();
    let mut out = Vec::new();
    for step in 1..=bisections {
        let i = rng.gen_range(0..leaves.len());
        let k = leaves.swap_remove(i);
        let (a, b) = work.bisect(k)?;
        leaves.push(a);
        leaves.push(b);
        if checkpoints.contains(&step) {
            let completed = work.completed()?.active_count();
            out.push(CompletionSample { initial, leaves: work.active_count(), completed });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::builtin::{unit_square, unit_square_level};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn x2() -> TargetFunction {
        TargetFunction::new("x2", |x| x[0] * x[0], |x| [2.0 * x[0], 0.0])
    }

    fn bump() -> TargetFunction {
        let f = |x: [f64; 2]| (-40.0 * ((x[0] - 0.3).powi(2) + (x[1] - 0.6).powi(2))).exp();
        TargetFunction::new("bump", move |x| f(x), move |x| {
            let s = -80.0 * f(x);
            [s * (x[0] - 0.3), s * (x[1] - 0.6)]
        })
    }

    #[test]
    fn eta_guard_and_harmonic_mean() {
        assert_eq!(child_eta(0.0, 1.0), 0.0);
        assert_eq!(child_eta(1.0, 0.0), 0.0);
        assert!((child_eta(1.0, 1.0) - 0.5).abs() < 1e-16);
        assert!(child_eta(2.0, 3.0) <= 2.0f64.min(3.0));
    }

    #[test]
    fn polynomial_targets_leave_the_mesh_alone() {
        let m = unit_square();
        let v = TargetFunction::new("p1", |x| x[0] - 2.0 * x[1], |_| [1.0, -2.0]);
        let run = tree_threshold(&v, &m, 1, 1e-8, &TreeOptions::default()).unwrap();
        assert_eq!(run.mesh.active_count(), 2);
        assert!(run.log.is_empty());
    }

    #[test]
    fn large_threshold_keeps_initial_mesh() {
        let m = unit_square_level(1);
        let run = tree_threshold(&bump(), &m, 1, 1e3, &TreeOptions::default()).unwrap();
        assert_eq!(run.mesh.active_count(), m.active_count());
    }

    #[test]
    fn threshold_invariants() {
        let m = unit_square();
        let t = 1e-4;
        let run = tree_threshold(&bump(), &m, 1, t, &TreeOptions::default()).unwrap();
        assert!(run.tree.recursion_defect() < 1e-12);
        for n in &run.tree.nodes {
            if n.children.is_some() {
                assert!(n.eta > t);
            } else {
                assert!(n.eta <= t);
            }
            if let Some(p) = n.parent {
                assert!(n.eta <= n.eps.min(run.tree.nodes[p].eta));
            }
        }
        // leaves partition the domain
        let area: f64 = run.tree.leaf_elements().iter().map(|&k| run.forest.area(k)).sum();
        assert!((area - 1.0).abs() < 1e-12);
        assert!(run.mesh.is_conforming());
        assert_eq!(run.forest.active_count(), run.tree.leaf_count());
    }

    #[test]
    fn budget_respects_size_and_decreases_error() {
        let m = unit_square();
        // the bump is poorly resolved on the coarse elements without a finer rule
        let opts = TreeOptions { rule: Some(crate::quadrature::triangle_rule(18).unwrap()), ..Default::default() };
        let run = tree_budget(&bump(), &m, 1, 60, &opts).unwrap();
        assert!(run.mesh.active_count() <= 60);
        assert!(run.mesh.is_conforming());
        for w in run.history.windows(2) {
            assert!(w[1].1 <= w[0].1 * (1.0 + 1e-12), "{:?}", run.history);
        }
        let same = tree_budget(&bump(), &m, 1, 2, &TreeOptions::default()).unwrap();
        assert_eq!(same.mesh.active_count(), 2);
        assert!(matches!(
            tree_budget(&bump(), &m, 1, 1, &TreeOptions::default()),
            Err(TreeError::BudgetTooSmall { .. })
        ));
    }

    #[test]
    fn schedule_prefix_matches_single_runs() {
        let m = unit_square();
        let opts = TreeOptions::default();
        let sched = tree_budget_schedule(&bump(), &m, 1, &[20, 40], &opts).unwrap();
        for s in &sched {
            let single = tree_budget(&bump(), &m, 1, s.budget, &opts).unwrap();
            assert_eq!(single.mesh.active_ids(), s.run.mesh.active_ids());
        }
    }

    /// Independent optimum over subtrees by dynamic programming on the
    /// bisection forest: `best(K, k)` is the least `Σε` with `k` leaves below `K`.
    fn dp_sigma(v: &TargetFunction, mesh0: &Mesh, degree: usize, extra: usize) -> Vec<f64> {
        fn best(m: &mut Mesh, v: &TargetFunction, d: usize, k: usize, budget: usize) -> Vec<f64> {
            let e = crate::local_approx::epsilon(v, m, k, d).unwrap();
            let mut out = vec![f64::INFINITY; budget + 1];
            out[1] = e;
            if budget >= 2 {
                let [a, b] = m.children_or_bisect(k).unwrap();
                let ba = best(m, v, d, a, budget - 1);
                let bb = best(m, v, d, b, budget - 1);
                for i in 1..budget {
                    for j in 1..=(budget - i) {
                        out[i + j] = out[i + j].min(ba[i] + bb[j]);
                    }
                }
            }
            out
        }
        let mut m = mesh0.clone();
        let roots = m.active_ids();
        let budget = extra + 1;
        let mut forest = vec![0.0];
        for r in roots {
            let b = best(&mut m, v, degree, r, budget);
            let mut next = vec![f64::INFINITY; forest.len() + budget];
            for (i, fi) in forest.iter().enumerate() {
                for (j, bj) in b.iter().enumerate().skip(1) {
                    next[i + j] = next[i + j].min(fi + bj);
                }
            }
            forest = next;
        }
        let n0 = mesh0.active_count();
        let mut out = Vec::new();
        let mut running = f64::INFINITY;
        for n in n0..=n0 + extra {
            running = running.min(forest[n]);
            out.push(running.sqrt());
        }
        out
    }

    #[test]
    fn enumeration_matches_dynamic_programming() {
        let m = unit_square();
        for v in [x2(), bump()] {
            let (table, _) = sigma_prime_table(&v, &m, 1, 10, &TreeOptions::default()).unwrap();
            let dp = dp_sigma(&v, &m, 1, 8);
            for (s, d) in table.iter().zip(&dp) {
                assert!((s.value - d).abs() <= 1e-12 * d.max(1e-300), "{} {}", s.value, d);
            }
            for w in table.windows(2) {
                assert!(w[1].value <= w[0].value);
            }
        }
    }

    #[test]
    fn x2_on_square_with_four_leaves() {
        let m = unit_square();
        let opts = TreeOptions::default();
        let s2 = sigma_prime(&x2(), &m, 1, 2, &opts).unwrap();
        let direct = (crate::local_approx::epsilon(&x2(), &m, 0, 1).unwrap()
            + crate::local_approx::epsilon(&x2(), &m, 1, 1).unwrap())
        .sqrt();
        assert!((s2.value - direct).abs() < 1e-15);
        let (table, scratch) = sigma_prime_table(&x2(), &m, 1, 4, &opts).unwrap();
        let s4 = &table[2];
        assert!(s4.leaves.len() <= 4);
        let recomputed: f64 = s4
            .leaves
            .iter()
            .map(|&k| crate::local_approx::epsilon(&x2(), &scratch, k, 1).unwrap())
            .sum::<f64>()
            .sqrt();
        assert!((recomputed - s4.value).abs() < 1e-14);
        assert!(matches!(sigma_prime(&x2(), &m, 1, 15, &opts), Err(TreeError::EnumerationBudget(13))));
    }

    #[test]
    fn completion_ratio_examples() {
        let mut m = unit_square();
        m.bisect(0).unwrap();
        let completed = m.completed().unwrap();
        let s = CompletionSample { initial: 2, leaves: m.active_count(), completed: completed.active_count() };
        assert_eq!((s.leaves, s.completed), (3, 4));
        assert_eq!(completion_overhead(&[s]).unwrap(), 2.0);
        let conforming = CompletionSample { initial: 2, leaves: 4, completed: 4 };
        assert_eq!(completion_overhead(&[conforming]).unwrap(), 1.0);
        assert!(completion_overhead(&[CompletionSample { initial: 2, leaves: 2, completed: 2 }]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples = completion_stress(&unit_square(), 100, &[50, 100], &mut rng).unwrap();
        assert!(completion_overhead(&samples).unwrap().is_finite());
    }

    #[test]
    fn log_lines_carry_schema() {
        let run = tree_threshold(&bump(), &unit_square(), 1, 1e-3, &TreeOptions::default()).unwrap();
        let text = run.log_jsonl();
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert_eq!(v["schema"], SCHEMA);
        }
        let fin: serde_json::Value =
            serde_json::from_str(&final_record(Control::Threshold(1e-3), 0.1, None, None)).unwrap();
        assert_eq!(fin["threshold_or_budget"], 1e-3);
    }
}
