//! Continuous Lagrange spaces on conforming meshes, the Ritz projection, the
//! quasi-interpolant built from local best fits and Scott–Zhang functionals,
//! and the diagnostics comparing global and local best errors.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::local_approx::{
    default_rule, delta_from_terms, delta_k_terms, element_points, local_best_fit,
    poincare_trace_constants, LocalBestFit, LocalConstants, LocalError, TargetFunction,
};
use crate::mesh::{FaceKey, Mesh, MeshError, Point};
use crate::polynomial::{
    edge_basis, scott_zhang_value, triangle_basis, ElementGeometry, NodeKey, PolynomialError,
};
use crate::quadrature::{edge_rule, triangle_rule, TriangleRule};
use crate::sparse::{pcg, CsrMatrix, SolverError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// Homogeneous Dirichlet values.
    Dirichlet0,
    /// Natural boundary; functions are determined up to constants.
    Neumann,
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryCondition::Dirichlet0 => "dirichlet0",
            BoundaryCondition::Neumann => "neumann",
        })
    }
}

impl FromStr for BoundaryCondition {
    type Err = GlobalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dirichlet0" => Ok(BoundaryCondition::Dirichlet0),
            "neumann" => Ok(BoundaryCondition::Neumann),
            other => Err(GlobalError::UnknownBoundaryCondition(other.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlobalError {
    #[error("mesh is not conforming")]
    NonConforming,
    #[error("'{0}' is not declared to vanish on the boundary; dirichlet0 requires it")]
    InconsistentBc(String),
    #[error("unknown boundary condition '{0}'")]
    UnknownBoundaryCondition(String),
    #[error("star around ({0}, {1}) is not edge-connected")]
    StarNotFaceConnected(f64, f64),
    #[error("derivative order s = {s} outside 1..={max}")]
    InvalidOrder { s: usize, max: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Local(#[from] LocalError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Polynomial(#[from] PolynomialError),
}

/// Edge carrying the Scott–Zhang functional of a constrained node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FaceChoice {
    pub edge: FaceKey,
    /// Index in [`FeSpace::edges`].
    pub edge_index: usize,
    /// Index of the node among the edge basis nodes, oriented from the lower
    /// to the higher vertex id.
    pub local: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalNode {
    pub key: NodeKey,
    pub location: Point,
    pub on_boundary: bool,
    pub constrained: bool,
    pub face: Option<FaceChoice>,
    pub dof: Option<usize>,
    /// Active elements containing the node, increasing id.
    pub star: Vec<usize>,
}

/// The Lagrange space of degree `ℓ` on a conforming mesh.
///
/// Functions in the space are represented by their values at all global
/// nodes, boundary nodes included.
#[derive(Clone, Debug)]
pub struct FeSpace<'m> {
    mesh: &'m Mesh,
    degree: usize,
    bc: BoundaryCondition,
    nodes: Vec<GlobalNode>,
    elements: Vec<usize>,
    element_nodes: Vec<Vec<usize>>,
    position: Vec<usize>,
    edges: Vec<FaceKey>,
    node_index: HashMap<NodeKey, usize>,
    dofs: usize,
}

pub fn build_space(mesh: &Mesh, degree: usize, bc: BoundaryCondition) -> Result<FeSpace<'_>, GlobalError> {
    if !mesh.is_conforming() {
        return Err(GlobalError::NonConforming);
    }
    let basis = triangle_basis(degree)?;
    let elements = mesh.active_ids();
    let mut position = vec![usize::MAX; mesh.elements().len()];
    let mut node_index: HashMap<NodeKey, usize> = HashMap::new();
    let mut keys: Vec<NodeKey> = Vec::new();
    let mut stars: Vec<Vec<usize>> = Vec::new();
    let mut element_nodes = Vec::with_capacity(elements.len());
    let mut edge_index: HashMap<FaceKey, usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut vertex_edges: Vec<Vec<usize>> = vec![Vec::new(); mesh.vertices().len()];

    for (pos, &k) in elements.iter().enumerate() {
        position[k] = pos;
        let el = mesh.element(k);
        for e in el.edges() {
            if !edge_index.contains_key(&e) {
                edge_index.insert(e, edges.len());
                let (a, b) = e.vertices();
                vertex_edges[a].push(edges.len());
                vertex_edges[b].push(edges.len());
                edges.push(e);
            }
        }
        let mut local = Vec::with_capacity(basis.len());
        for alpha in &basis.nodes {
            let key = NodeKey::new(el.vertex_ids, alpha);
            let idx = *node_index.entry(key).or_insert_with(|| {
                keys.push(key);
                stars.push(Vec::new());
                keys.len() - 1
            });
            stars[idx].push(k);
            local.push(idx);
        }
        element_nodes.push(local);
    }

    let boundary_edge: Vec<bool> = edges.iter().map(|&e| mesh.is_boundary_edge(e)).collect();
    let ebasis = edge_basis(degree)?;
    let mut nodes = Vec::with_capacity(keys.len());
    let mut dofs = 0;
    for (key, star) in keys.into_iter().zip(stars) {
        let candidates: Vec<usize> = match (key.vertex(), key.edge()) {
            (Some(v), _) => vertex_edges[v].clone(),
            (None, Some(e)) => vec![edge_index[&e]],
            _ => Vec::new(),
        };
        let on_boundary = candidates.iter().any(|&i| boundary_edge[i]);
        let constrained =
            !(star.len() == 1 && (bc == BoundaryCondition::Neumann || !on_boundary));
        let face = if constrained {
            let pick = if on_boundary {
                candidates.iter().copied().filter(|&i| boundary_edge[i]).min()
            } else {
                candidates.iter().copied().min()
            }
            .expect("constrained nodes lie on an edge");
            let edge = edges[pick];
            let (a, b) = edge.vertices();
            let target = [key.weight(a), key.weight(b), 0];
            let local = ebasis.nodes.iter().position(|n| *n == target).expect("edge node exists");
            Some(FaceChoice { edge, edge_index: pick, local })
        } else {
            None
        };
        let dof = if bc == BoundaryCondition::Dirichlet0 && on_boundary {
            None
        } else {
            dofs += 1;
            Some(dofs - 1)
        };
        nodes.push(GlobalNode {
            key,
            location: key.location(degree, mesh.vertices()),
            on_boundary,
            constrained,
            face,
            dof,
            star,
        });
    }
    Ok(FeSpace { mesh, degree, bc, nodes, elements, element_nodes, position, edges, node_index, dofs })
}

impl<'m> FeSpace<'m> {
    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn nodes(&self) -> &[GlobalNode] {
        &self.nodes
    }

    pub fn node(&self, key: &NodeKey) -> Option<&GlobalNode> {
        self.node_index.get(key).map(|&i| &self.nodes[i])
    }

    pub fn dof_count(&self) -> usize {
        self.dofs
    }

    /// Active element ids in increasing order.
    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    /// Edges numbered by first appearance over the elements and their local
    /// edges.
    pub fn edges(&self) -> &[FaceKey] {
        &self.edges
    }

    /// Global node indices of an active element, in local basis order.
    pub fn element_nodes(&self, element: usize) -> &[usize] {
        &self.element_nodes[self.position[element]]
    }

    /// Local coefficient vector of a global function on an element.
    pub fn local_values(&self, coefficients: &[f64], element: usize) -> Vec<f64> {
        self.element_nodes(element).iter().map(|&i| coefficients[i]).collect()
    }

    /// Nodal values of `f` at all global nodes.
    pub fn nodal_values(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|n| f(n.location)).collect()
    }

    /// Evaluates a global function on one element at barycentric coordinates.
    pub fn eval(&self, coefficients: &[f64], element: usize, lam: &[f64; 3]) -> f64 {
        let basis = triangle_basis(self.degree).expect("validated degree");
        basis.values(lam).iter().zip(self.element_nodes(element)).map(|(p, &i)| p * coefficients[i]).sum()
    }

    /// Rows `dof_id,x,y,value` for every degree of freedom.
    pub fn coefficients_csv(&self, coefficients: &[f64]) -> String {
        let mut rows: Vec<(usize, &GlobalNode, f64)> = self
            .nodes
            .iter()
            .zip(coefficients)
            .filter_map(|(n, &c)| n.dof.map(|d| (d, n, c)))
            .collect();
        rows.sort_by_key(|r| r.0);
        let mut out = String::from("dof_id,x,y,value\n");
        for (d, n, c) in rows {
            out.push_str(&format!("{d},{:.16e},{:.16e},{:.16e}\n", n.location[0], n.location[1], c));
        }
        out
    }

    /// A global function as a target, located pointwise through a bucket grid.
    pub fn as_target(&self, coefficients: &[f64], name: &str) -> TargetFunction {
        let locator = std::sync::Arc::new(FunctionLocator::new(self, coefficients));
        let l2 = locator.clone();
        TargetFunction::new(name, move |x| locator.value(x), move |x| l2.gradient(x))
    }
}

/// Piecewise polynomial data detached from the mesh, for pointwise evaluation.
struct FunctionLocator {
    degree: usize,
    geoms: Vec<ElementGeometry>,
    values: Vec<Vec<f64>>,
    origin: Point,
    cell: f64,
    dims: (usize, usize),
    buckets: Vec<Vec<usize>>,
}

impl FunctionLocator {
    fn new(space: &FeSpace<'_>, coefficients: &[f64]) -> Self {
        let mesh = space.mesh;
        let geoms: Vec<ElementGeometry> =
            space.elements.iter().map(|&k| ElementGeometry::new(mesh.corners(k))).collect();
        let values = space.elements.iter().map(|&k| space.local_values(coefficients, k)).collect();
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for g in &geoms {
            for p in g.corners {
                for i in 0..2 {
                    lo[i] = lo[i].min(p[i]);
                    hi[i] = hi[i].max(p[i]);
                }
            }
        }
        let n = geoms.len().max(1) as f64;
        let cell = (((hi[0] - lo[0]) * (hi[1] - lo[1])) / n).sqrt().max(1e-12);
        let dims = (
            ((hi[0] - lo[0]) / cell).ceil() as usize + 1,
            ((hi[1] - lo[1]) / cell).ceil() as usize + 1,
        );
        let mut buckets = vec![Vec::new(); dims.0 * dims.1];
        for (i, g) in geoms.iter().enumerate() {
            let (mut a, mut b) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for p in g.corners {
                for c in 0..2 {
                    a[c] = a[c].min(p[c]);
                    b[c] = b[c].max(p[c]);
                }
            }
            let to_cell = |x: f64, o: f64, d: usize| (((x - o) / cell).floor().max(0.0) as usize).min(d - 1);
            for cx in to_cell(a[0], lo[0], dims.0)..=to_cell(b[0], lo[0], dims.0) {
                for cy in to_cell(a[1], lo[1], dims.1)..=to_cell(b[1], lo[1], dims.1) {
                    buckets[cy * dims.0 + cx].push(i);
                }
            }
        }
        FunctionLocator { degree: space.degree, geoms, values, origin: lo, cell, dims, buckets }
    }

    /// The element containing `x` most deeply.
    fn locate(&self, x: Point) -> Option<(usize, [f64; 3])> {
        let cx = ((x[0] - self.origin[0]) / self.cell).floor();
        let cy = ((x[1] - self.origin[1]) / self.cell).floor();
        if cx < 0.0 || cy < 0.0 {
            return None;
        }
        let (cx, cy) = (cx as usize, cy as usize);
        if cx >= self.dims.0 || cy >= self.dims.1 {
            return None;
        }
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &i in &self.buckets[cy * self.dims.0 + cx] {
            let lam = self.geoms[i].barycentric(x);
            let depth = lam[0].min(lam[1]).min(lam[2]);
            if best.as_ref().is_none_or(|b| depth > b.2) {
                best = Some((i, lam, depth));
            }
        }
        best.filter(|b| b.2 > -1e-9).map(|b| (b.0, b.1))
    }

    fn value(&self, x: Point) -> f64 {
        let basis = triangle_basis(self.degree).expect("validated degree");
        match self.locate(x) {
            Some((i, lam)) => basis.values(&lam).iter().zip(&self.values[i]).map(|(p, c)| p * c).sum(),
            None => f64::NAN,
        }
    }

    fn gradient(&self, x: Point) -> [f64; 2] {
        let basis = triangle_basis(self.degree).expect("validated degree");
        match self.locate(x) {
            Some((i, lam)) => {
                let mut g = [0.0, 0.0];
                for (d, c) in basis.gradients(&self.geoms[i], &lam).iter().zip(&self.values[i]) {
                    g[0] += c * d[0];
                    g[1] += c * d[1];
                }
                g
            }
            None => [f64::NAN, f64::NAN],
        }
    }
}

/// Quadrature and solver settings shared by the global routines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// Overrides the default `2ℓ + 4`.
    pub quad_degree: Option<usize>,
    pub cg_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { quad_degree: None, cg_tol: 1e-12 }
    }
}

impl SolveOptions {
    pub fn rule(&self, degree: usize) -> Result<TriangleRule, GlobalError> {
        match self.quad_degree {
            Some(q) => Ok(triangle_rule(q).map_err(LocalError::from)?),
            None => Ok(default_rule(degree)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RitzResult {
    /// Values at all global nodes; zero-mean representative for Neumann.
    pub coefficients: Vec<f64>,
    /// `E(v,M)` by direct quadrature of `∥∇(v − V_M)∥²`.
    pub e: f64,
    /// `(∥∇v∥² − ∥∇V_M∥²)^{1/2}` when the target knows its energy.
    pub e_identity: Option<f64>,
    pub iterations: usize,
    pub residual: f64,
}

struct LocalSystem {
    stiffness: Vec<f64>,
    load: Vec<f64>,
}

fn local_system(v: &TargetFunction, corners: &[Point; 3], degree: usize, rule: &TriangleRule) -> LocalSystem {
    let basis = triangle_basis(degree).expect("validated degree");
    let geom = ElementGeometry::new(*corners);
    let n = basis.len();
    let mut stiffness = vec![0.0; n * n];
    let mut load = vec![0.0; n];
    // gradients of P_ℓ are exact under any rule of degree ≥ 2ℓ−2
    let poly = triangle_rule((2 * degree).saturating_sub(2).max(1)).expect("degree in range");
    for (lam, &w) in poly.points.iter().zip(&poly.weights) {
        let g = basis.gradients(&geom, lam);
        for i in 0..n {
            for j in 0..n {
                stiffness[i * n + j] += w * geom.area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            }
        }
    }
    for (x, w) in element_points(v, corners, rule) {
        let g = basis.gradients(&geom, &geom.barycentric(x));
        let gv = v.gradient(x);
        for i in 0..n {
            load[i] += w * (gv[0] * g[i][0] + gv[1] * g[i][1]);
        }
    }
    LocalSystem { stiffness, load }
}

/// `∥∇(v − V)∥` over the mesh for a global function `V`.
pub fn energy_error(
    v: &TargetFunction,
    space: &FeSpace<'_>,
    coefficients: &[f64],
    rule: &TriangleRule,
) -> f64 {
    let basis = triangle_basis(space.degree).expect("validated degree");
    let total: f64 = space
        .elements
        .par_iter()
        .map(|&k| {
            let corners = space.mesh.corners(k);
            let geom = ElementGeometry::new(corners);
            let c = space.local_values(coefficients, k);
            element_points(v, &corners, rule)
                .into_iter()
                .map(|(x, w)| {
                    let mut r = v.gradient(x);
                    for (d, ci) in basis.gradients(&geom, &geom.barycentric(x)).iter().zip(&c) {
                        r[0] -= ci * d[0];
                        r[1] -= ci * d[1];
                    }
                    w * (r[0] * r[0] + r[1] * r[1])
                })
                .sum::<f64>()
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    total.max(0.0).sqrt()
}

fn reference_means(degree: usize) -> Vec<f64> {
    let basis = triangle_basis(degree).expect("validated degree");
    let rule = triangle_rule(degree).expect("degree in range");
    let mut m = vec![0.0; basis.len()];
    for (lam, &w) in rule.points.iter().zip(&rule.weights) {
        for (mi, p) in m.iter_mut().zip(basis.values(lam)) {
            *mi += w * p;
        }
    }
    m
}

/// `∫_Ω V` for a global function.
pub fn integral(space: &FeSpace<'_>, coefficients: &[f64]) -> f64 {
    let means = reference_means(space.degree);
    space
        .elements
        .iter()
        .map(|&k| {
            let c = space.local_values(coefficients, k);
            space.mesh.area(k) * c.iter().zip(&means).map(|(a, b)| a * b).sum::<f64>()
        })
        .sum()
}

/// Galerkin projection of `v` in the `H¹` seminorm.
pub fn ritz_projection(
    v: &TargetFunction,
    space: &FeSpace<'_>,
    rule: &TriangleRule,
    cg_tol: f64,
) -> Result<RitzResult, GlobalError> {
    if space.bc == BoundaryCondition::Dirichlet0 && !v.vanishes_on_boundary() {
        return Err(GlobalError::InconsistentBc(v.name().to_string()));
    }
    let systems: Vec<LocalSystem> = space
        .elements
        .par_iter()
        .map(|&k| local_system(v, &space.mesh.corners(k), space.degree, rule))
        .collect();
    let n_loc = triangle_basis(space.degree)?.len();
    let mut triplets = Vec::with_capacity(systems.len() * n_loc * n_loc);
    let mut rhs = vec![0.0; space.dofs];
    for (pos, sys) in systems.iter().enumerate() {
        let ids = &space.element_nodes[pos];
        for i in 0..n_loc {
            let Some(di) = space.nodes[ids[i]].dof else { continue };
            rhs[di] += sys.load[i];
            for j in 0..n_loc {
                if let Some(dj) = space.nodes[ids[j]].dof {
                    triplets.push((di, dj, sys.stiffness[i * n_loc + j]));
                }
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(space.dofs, triplets);
    let neumann = space.bc == BoundaryCondition::Neumann;
    let max_iter = (10 * space.dofs).max(200);
    let outcome = pcg(&matrix, &rhs, cg_tol, max_iter, neumann)?;
    let mut coefficients: Vec<f64> =
        space.nodes.iter().map(|n| n.dof.map_or(0.0, |d| outcome.solution[d])).collect();
    if neumann {
        let shift = -integral(space, &coefficients) / space.mesh.total_area();
        coefficients.iter_mut().for_each(|c| *c += shift);
    }
    let e = energy_error(v, space, &coefficients, rule);
    let e_identity = v.exact_energy().map(|energy| {
        let vh = matrix.energy(&outcome.solution);
        (energy - vh).max(0.0).sqrt()
    });
    Ok(RitzResult { coefficients, e, e_identity, iterations: outcome.iterations, residual: outcome.residual })
}

/// Best fits on all active elements, in increasing element id.
pub fn local_fits(
    v: &TargetFunction,
    mesh: &Mesh,
    degree: usize,
    rule: &TriangleRule,
) -> Result<Vec<LocalBestFit>, GlobalError> {
    let ids = mesh.active_ids();
    let fits: Result<Vec<_>, LocalError> =
        ids.par_iter().map(|&k| local_best_fit(v, mesh, k, degree, rule)).collect();
    Ok(fits?)
}

/// `(Σ_K e(v,K)²)^{1/2}` over the active elements.
pub fn local_error_sum(v: &TargetFunction, mesh: &Mesh, degree: usize, rule: &TriangleRule) -> Result<f64, GlobalError> {
    let eps: Vec<f64> = local_fits(v, mesh, degree, rule)?.iter().map(|f| f.epsilon()).collect();
    Ok(eps.iter().sum::<f64>().sqrt())
}

/// Nodal values of `Πv`: local best fits at unconstrained nodes and
/// Scott–Zhang values on the chosen face elsewhere.
pub fn interpolate(v: &TargetFunction, space: &FeSpace<'_>, rule: &TriangleRule) -> Result<Vec<f64>, GlobalError> {
    let mesh = space.mesh;
    let mut needs_fit = vec![false; space.elements.len()];
    for node in &space.nodes {
        if node.constrained {
            if !mesh.face_connected(&node.star, node.location) {
                return Err(GlobalError::StarNotFaceConnected(node.location[0], node.location[1]));
            }
        } else {
            needs_fit[space.position[node.star[0]]] = true;
        }
    }
    let fits: Vec<Option<LocalBestFit>> = space
        .elements
        .par_iter()
        .zip(needs_fit.par_iter())
        .map(|(&k, &need)| need.then(|| local_best_fit(v, mesh, k, space.degree, rule)).transpose())
        .collect::<Result<_, _>>()?;
    let erule = edge_rule(2 * space.degree + 4);
    let value = |x: Point| v.value(x);
    space
        .nodes
        .par_iter()
        .enumerate()
        .map(|(idx, node)| {
            if let Some(face) = node.face {
                if space.bc == BoundaryCondition::Dirichlet0 && node.on_boundary && v.vanishes_on_boundary() {
                    return Ok(0.0);
                }
                let (a, b) = face.edge.vertices();
                Ok(scott_zhang_value(&value, space.degree, face.local, mesh.vertex(a), mesh.vertex(b), &erule)?)
            } else {
                let k = node.star[0];
                let local = space.element_nodes(k).iter().position(|&i| i == idx).expect("node in its star");
                Ok(fits[space.position[k]].as_ref().expect("fit computed").coefficients[local])
            }
        })
        .collect()
}

/// Outcome of `E / (Σ e²)^{1/2}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Ratio {
    Value(f64),
    /// Both errors vanish: `v` lies in the space.
    Member,
    /// Only the local errors vanish: `v` is broken polynomial but not continuous.
    Infinite,
}

impl Ratio {
    /// Classifies with zero thresholds relative to `scale = ∥∇v∥`.
    pub fn classify(global: f64, local: f64, scale: f64) -> Ratio {
        let zero = |x: f64| x <= 1e-10 * scale.max(f64::MIN_POSITIVE);
        match (zero(local), zero(global)) {
            (true, true) => Ratio::Member,
            (true, false) => Ratio::Infinite,
            _ => Ratio::Value(global / local),
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Ratio::Value(r) => Some(*r),
            _ => None,
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Value(r) => write!(f, "{r:.10e}"),
            Ratio::Member => f.write_str("0/0: member"),
            Ratio::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Ratio::Value(r) => s.serialize_f64(*r),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

/// Global, local and interpolation errors of one instance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    #[serde(rename = "E")]
    pub e: f64,
    pub local_sum: f64,
    pub ratio: Ratio,
    pub interp_error: f64,
    pub dofs: usize,
    pub elements: usize,
    #[serde(skip)]
    pub ritz: RitzResult,
    #[serde(skip)]
    pub interpolant: Vec<f64>,
}

/// `∥∇v∥` over the mesh by quadrature.
pub fn gradient_norm(v: &TargetFunction, mesh: &Mesh, rule: &TriangleRule) -> f64 {
    let s: f64 = mesh
        .active_ids()
        .par_iter()
        .map(|&k| {
            element_points(v, &mesh.corners(k), rule)
                .into_iter()
                .map(|(x, w)| {
                    let g = v.gradient(x);
                    w * (g[0] * g[0] + g[1] * g[1])
                })
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    s.sqrt()
}

pub fn diagnostics(v: &TargetFunction, space: &FeSpace<'_>, opts: &SolveOptions) -> Result<Diagnostics, GlobalError> {
    let rule = opts.rule(space.degree)?;
    let ritz = ritz_projection(v, space, &rule, opts.cg_tol)?;
    let local_sum = local_error_sum(v, space.mesh, space.degree, &rule)?;
    let interpolant = interpolate(v, space, &rule)?;
    let interp_error = energy_error(v, space, &interpolant, &rule);
    let scale = gradient_norm(v, space.mesh, &rule);
    Ok(Diagnostics {
        e: ritz.e,
        local_sum,
        ratio: Ratio::classify(ritz.e, local_sum, scale),
        interp_error,
        dofs: space.dofs,
        elements: space.elements.len(),
        ritz,
        interpolant,
    })
}

/// `E(v,M) / (Σ e(v,K)²)^{1/2}`.
pub fn decoupling_ratio(
    v: &TargetFunction,
    mesh: &Mesh,
    degree: usize,
    bc: BoundaryCondition,
    opts: &SolveOptions,
) -> Result<Ratio, GlobalError> {
    let space = build_space(mesh, degree, bc)?;
    let rule = opts.rule(degree)?;
    let e = ritz_projection(v, &space, &rule, opts.cg_tol)?.e;
    let local = local_error_sum(v, mesh, degree, &rule)?;
    Ok(Ratio::classify(e, local, gradient_norm(v, mesh, &rule)))
}

/// `δ_K` for every active element together with `μ_z` and `N_M`.
pub fn local_constants(space: &FeSpace<'_>) -> Result<LocalConstants, GlobalError> {
    let mesh = space.mesh;
    let stars = mesh.vertex_stars();
    let is_constrained = |k: &NodeKey| space.node(k).is_some_and(|n| n.constrained);
    let per_element: Vec<_> = space
        .elements
        .par_iter()
        .map(|&k| delta_k_terms(mesh, &stars, k, space.degree, &is_constrained).map(|t| (k, t)))
        .collect::<Result<_, _>>()?;
    let (c_p, c_tr) = poincare_trace_constants(2)?;
    let mut delta = Vec::with_capacity(per_element.len());
    let mut mu = Vec::new();
    for (k, terms) in per_element {
        delta.push((k, delta_from_terms(&terms)));
        mu.extend(terms.iter().map(|t| (k, t.node, t.mu)));
    }
    let n_m = space.nodes.iter().map(|n| n.star.len()).max().unwrap_or(0);
    Ok(LocalConstants { c_p, c_tr, delta, mu, n_m })
}

/// `s! / (⌈s/2⌉!)² · C_P^{s−1}`.
pub fn bramble_hilbert_constant(s: usize) -> f64 {
    let f = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();
    let (c_p, _) = poincare_trace_constants(2).expect("d = 2");
    f(s) / f(s.div_ceil(2)).powi(2) * c_p.powi(s as i32 - 1)
}

/// `|v|²_{s,2;K} = Σ_{|α|=s} ∥∂^α v∥²_K`.
pub fn seminorm_sq(v: &TargetFunction, corners: &[Point; 3], s: usize, rule: &TriangleRule) -> Result<f64, GlobalError> {
    if v.max_derivative_order().is_none_or(|m| m < s) {
        return Err(LocalError::MissingDerivatives(v.name().to_string(), s).into());
    }
    Ok(element_points(v, corners, rule)
        .into_iter()
        .map(|(x, w)| {
            let d = v.derivatives(x, s).expect("order checked");
            w * d.iter().map(|a| a * a).sum::<f64>()
        })
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AprioriBound {
    /// `(Σ_K h_K^{2(s−1)} |v|²_{s,2;K})^{1/2}`.
    pub raw_sum: f64,
    /// `s!/(⌈s/2⌉!)² C_P^{s−1} δ̂`.
    pub constant: f64,
    pub bound: f64,
}

pub fn apriori_bound(
    v: &TargetFunction,
    mesh: &Mesh,
    degree: usize,
    s: usize,
    delta_hat: f64,
    rule: &TriangleRule,
) -> Result<AprioriBound, GlobalError> {
    if s == 0 || s > degree + 1 {
        return Err(GlobalError::InvalidOrder { s, max: degree + 1 });
    }
    let terms: Vec<f64> = mesh
        .active_ids()
        .par_iter()
        .map(|&k| {
            let h = mesh.shape_metrics(k).0;
            seminorm_sq(v, &mesh.corners(k), s, rule).map(|q| h.powi(2 * (s as i32 - 1)) * q)
        })
        .collect::<Result<_, _>>()?;
    let raw_sum = terms.iter().sum::<f64>().sqrt();
    let constant = bramble_hilbert_constant(s) * delta_hat;
    Ok(AprioriBound { raw_sum, constant, bound: constant * raw_sum })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::builtin::{l_shape, unit_square, unit_square_level};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sine() -> TargetFunction {
        TargetFunction::new(
            "sine",
            |x| (PI * x[0]).sin() * (PI * x[1]).sin(),
            |x| {
                [
                    PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
                    PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
                ]
            },
        )
        .with_exact_energy(PI * PI / 2.0)
        .vanishing_on_boundary()
    }

    fn quadratic() -> TargetFunction {
        TargetFunction::new(
            "q",
            |x| 1.0 + x[0] - 2.0 * x[1] + x[0] * x[1] + 0.5 * x[0] * x[0],
            |x| [1.0 + x[1] + x[0], -2.0 + x[0]],
        )
    }

    #[test]
    fn dof_counts() {
        let m = unit_square();
        assert_eq!(build_space(&m, 1, BoundaryCondition::Dirichlet0).unwrap().dof_count(), 0);
        assert_eq!(build_space(&m, 1, BoundaryCondition::Neumann).unwrap().dof_count(), 4);
        let m2 = unit_square_level(2);
        // level 2: 8 triangles, vertices on the 3x3 grid, one interior
        let interior = m2
            .vertices()
            .iter()
            .filter(|p| p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0)
            .count();
        assert_eq!(build_space(&m2, 1, BoundaryCondition::Dirichlet0).unwrap().dof_count(), interior);
        let s3 = build_space(&m2, 3, BoundaryCondition::Neumann).unwrap();
        for n in s3.nodes() {
            if n.key.support_len() == 3 {
                assert!(!n.constrained);
            }
        }
        // node count of a degree-ℓ space on a conforming mesh: V + (ℓ−1)E + (ℓ−1)(ℓ−2)/2·T
        let (v, e, t) = (m2.vertices().len(), s3.edges().len(), m2.active_count());
        assert_eq!(s3.nodes().len(), v + 2 * e + t);
    }

    #[test]
    fn boundary_faces_for_boundary_nodes() {
        let m = unit_square_level(3);
        for l in 1..=3 {
            let s = build_space(&m, l, BoundaryCondition::Dirichlet0).unwrap();
            for n in s.nodes() {
                if n.constrained && n.on_boundary {
                    assert!(m.is_boundary_edge(n.face.unwrap().edge));
                }
                if n.on_boundary {
                    assert!(n.dof.is_none());
                }
            }
        }
    }

    #[test]
    fn members_are_reproduced() {
        let m = l_shape();
        let v = quadratic();
        for l in 2..=4 {
            let s = build_space(&m, l, BoundaryCondition::Neumann).unwrap();
            let rule = default_rule(l);
            let exact = s.nodal_values(|x| v.value(x));
            let pi = interpolate(&v, &s, &rule).unwrap();
            for (a, b) in exact.iter().zip(&pi) {
                assert!((a - b).abs() < 1e-11, "{l}: {a} {b}");
            }
            let r = ritz_projection(&v, &s, &rule, 1e-13).unwrap();
            assert!(r.e < 1e-8, "{}", r.e);
        }
    }

    #[test]
    fn constants_interpolate_to_constants() {
        let m = unit_square_level(2);
        let v = TargetFunction::new("c", |_| 2.5, |_| [0.0, 0.0]);
        for l in 1..=3 {
            let s = build_space(&m, l, BoundaryCondition::Neumann).unwrap();
            for c in interpolate(&v, &s, &default_rule(l)).unwrap() {
                assert!((c - 2.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn energy_identity_matches_quadrature() {
        let m = unit_square_level(4);
        let s = build_space(&m, 2, BoundaryCondition::Dirichlet0).unwrap();
        let r = ritz_projection(&sine(), &s, &triangle_rule(12).unwrap(), 1e-14).unwrap();
        let rel = (r.e - r.e_identity.unwrap()).abs() / r.e;
        assert!(rel < 1e-7, "{rel}");
        assert!(r.e <= PI / 2f64.sqrt());
    }

    #[test]
    fn dirichlet_requires_declaration() {
        let m = unit_square_level(1);
        let s = build_space(&m, 1, BoundaryCondition::Dirichlet0).unwrap();
        assert!(matches!(
            ritz_projection(&quadratic(), &s, &default_rule(1), 1e-10),
            Err(GlobalError::InconsistentBc(_))
        ));
    }

    #[test]
    fn sandwich_and_galerkin_optimality() {
        let m = unit_square_level(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for l in 1..=2 {
            let s = build_space(&m, l, BoundaryCondition::Dirichlet0).unwrap();
            let d = diagnostics(&sine(), &s, &SolveOptions::default()).unwrap();
            assert!(d.local_sum <= d.e * (1.0 + 1e-6));
            assert!(d.e <= d.interp_error * (1.0 + 1e-6));
            let rule = default_rule(l);
            for _ in 0..20 {
                let w: Vec<f64> = d
                    .ritz
                    .coefficients
                    .iter()
                    .zip(s.nodes())
                    .map(|(c, n)| if n.dof.is_some() { c + 0.05 * (rng.gen::<f64>() - 0.5) } else { 0.0 })
                    .collect();
                assert!(d.e <= energy_error(&sine(), &s, &w, &rule));
            }
            for (c, n) in d.interpolant.iter().zip(s.nodes()) {
                if n.on_boundary {
                    assert_eq!(*c, 0.0);
                }
            }
        }
    }

    #[test]
    fn interpolant_is_a_projection() {
        let m = unit_square_level(2);
        let v = TargetFunction::new("w", |x| (x[0] * 3.0).sin() + x[1].powi(3), |x| {
            [3.0 * (x[0] * 3.0).cos(), 3.0 * x[1] * x[1]]
        });
        for l in 1..=3 {
            let s = build_space(&m, l, BoundaryCondition::Neumann).unwrap();
            let rule = default_rule(l);
            let pv = interpolate(&v, &s, &rule).unwrap();
            let again = interpolate(&s.as_target(&pv, "pv"), &s, &rule).unwrap();
            for (a, b) in pv.iter().zip(&again) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn neumann_solution_has_zero_mean() {
        let m = l_shape();
        let s = build_space(&m, 2, BoundaryCondition::Neumann).unwrap();
        let r = ritz_projection(&quadratic(), &s, &default_rule(2), 1e-12).unwrap();
        assert!(integral(&s, &r.coefficients).abs() < 1e-10);
    }

    #[test]
    fn csv_header_and_rows() {
        let m = unit_square();
        let s = build_space(&m, 1, BoundaryCondition::Neumann).unwrap();
        let csv = s.coefficients_csv(&[1.0, 2.0, 3.0, 4.0]);
        assert!(csv.starts_with("dof_id,x,y,value\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn ratio_classification() {
        assert_eq!(Ratio::classify(0.0, 0.0, 1.0), Ratio::Member);
        assert_eq!(Ratio::classify(0.5, 0.0, 1.0), Ratio::Infinite);
        assert_eq!(Ratio::classify(0.5, 0.25, 1.0), Ratio::Value(2.0));
        assert_eq!(serde_json::to_string(&Ratio::Member).unwrap(), "\"0/0: member\"");
    }

    #[test]
    fn bramble_hilbert_constants() {
        let (c_p, _) = poincare_trace_constants(2).unwrap();
        assert_eq!(bramble_hilbert_constant(1), 1.0);
        assert!((bramble_hilbert_constant(2) - 2.0 * c_p).abs() < 1e-15);
        assert!((bramble_hilbert_constant(3) - 1.5 * c_p * c_p).abs() < 1e-15);
    }
}
