//! Elementwise best approximation of gradients and the constants that control
//! the interaction between neighbouring elements.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

use crate::mesh::{Mesh, MeshError, Point};
use crate::polynomial::{
    reference_norms, triangle_basis, ElementGeometry, NodeKey, PolynomialError,
};
use crate::quadrature::{
    adaptive_points, edge_rule, triangle_contains, triangle_rule, QuadratureError, TriangleRule,
    MAX_GRADED_LEVELS,
};

/// First positive zero of the Bessel function `J_1`.
pub const BESSEL_J11: f64 = 3.831705970207512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalError {
    #[error("degenerate element {0}")]
    Degenerate(usize),
    #[error("singular Gram system on element {0}")]
    SingularGram(usize),
    #[error("function is not zero-mean on the element (mean {0:e})")]
    NonZeroMean(f64),
    #[error("gradient of '{name}' inconsistent at ({x}, {y}): relative error {rel:e}")]
    GradientMismatch { name: String, x: f64, y: f64, rel: f64 },
    #[error("only two-dimensional meshes are supported (got d = {0})")]
    UnsupportedDimension(usize),
    #[error("'{0}' provides no derivatives of order {1}")]
    MissingDerivatives(String, usize),
    #[error("star around ({0}, {1}) is not edge-connected")]
    StarNotFaceConnected(f64, f64),
    #[error("node {0:?} has no dual face norm")]
    NoDualNorm(NodeKey),
    #[error(transparent)]
    Polynomial(#[from] PolynomialError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

impl LocalError {
    /// Attaches an element id to element-level failures.
    fn at(self, element: usize) -> Self {
        match self {
            LocalError::Degenerate(_) => LocalError::Degenerate(element),
            LocalError::SingularGram(_) => LocalError::SingularGram(element),
            other => other,
        }
    }
}

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
/// `(x, s)` ↦ `[∂^(s,0) v, ∂^(s−1,1) v, …, ∂^(0,s) v]` at `x`.
pub type DerivativeFn = Arc<dyn Fn(Point, usize) -> Vec<f64> + Send + Sync>;

/// A target function together with its gradient and optional extra data.
#[derive(Clone)]
pub struct TargetFunction {
    name: String,
    value: ScalarFn,
    gradient: VectorFn,
    derivatives: Option<(DerivativeFn, usize)>,
    singular_points: Vec<Point>,
    exact_energy: Option<f64>,
    vanishes_on_boundary: bool,
}

impl fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetFunction")
            .field("name", &self.name)
            .field("singular_points", &self.singular_points)
            .field("exact_energy", &self.exact_energy)
            .field("vanishes_on_boundary", &self.vanishes_on_boundary)
            .finish_non_exhaustive()
    }
}

impl TargetFunction {
    pub fn new<V, G>(name: impl Into<String>, value: V, gradient: G) -> Self
    where
        V: Fn(Point) -> f64 + Send + Sync + 'static,
        G: Fn(Point) -> [f64; 2] + Send + Sync + 'static,
    {
        TargetFunction {
            name: name.into(),
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            derivatives: None,
            singular_points: Vec::new(),
            exact_energy: None,
            vanishes_on_boundary: false,
        }
    }

    /// Attaches derivatives of orders `0..=max_order`.
    pub fn with_derivatives<D>(mut self, max_order: usize, d: D) -> Self
    where
        D: Fn(Point, usize) -> Vec<f64> + Send + Sync + 'static,
    {
        self.derivatives = Some((Arc::new(d), max_order));
        self
    }

    pub fn with_singular_points(mut self, points: Vec<Point>) -> Self {
        self.singular_points = points;
        self
    }

    /// `∥∇v∥²` over the intended domain.
    pub fn with_exact_energy(mut self, energy: f64) -> Self {
        self.exact_energy = Some(energy);
        self
    }

    /// Declares `v = 0` on the boundary of the intended domain.
    pub fn vanishing_on_boundary(mut self) -> Self {
        self.vanishes_on_boundary = true;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, x: Point) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: Point) -> [f64; 2] {
        (self.gradient)(x)
    }

    pub fn derivatives(&self, x: Point, order: usize) -> Option<Vec<f64>> {
        match &self.derivatives {
            Some((d, max)) if order <= *max => Some(d(x, order)),
            _ => None,
        }
    }

    pub fn max_derivative_order(&self) -> Option<usize> {
        self.derivatives.as_ref().map(|d| d.1)
    }

    pub fn singular_points(&self) -> &[Point] {
        &self.singular_points
    }

    pub fn exact_energy(&self) -> Option<f64> {
        self.exact_energy
    }

    pub fn vanishes_on_boundary(&self) -> bool {
        self.vanishes_on_boundary
    }

    /// `v + c` under a new name; gradient and singularities are shared.
    pub fn shifted(&self, c: f64) -> Self {
        let value = self.value.clone();
        let mut out = self.clone();
        out.name = format!("{}+{c}", self.name);
        out.value = Arc::new(move |x| value(x) + c);
        out.vanishes_on_boundary = self.vanishes_on_boundary && c == 0.0;
        out
    }

    /// Compares the gradient with central differences of step `1e-6·diam`
    /// at `samples` random points of `mesh` and returns the worst relative error.
    pub fn check_gradient<R: Rng>(
        &self,
        mesh: &Mesh,
        samples: usize,
        rng: &mut R,
    ) -> Result<f64, LocalError> {
        let (lo, hi) = bounding_box(mesh);
        let diam = ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt();
        let step = 1e-6 * diam;
        let active = mesh.active_ids();
        let mut worst: f64 = 0.0;
        let mut taken = 0;
        while taken < samples {
            let k = active[rng.gen_range(0..active.len())];
            let (a, b) = (rng.gen::<f64>(), rng.gen::<f64>());
            let (a, b) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
            let lam = [1.0 - a - b, a, b];
            // keep the stencil inside the element and away from declared singularities
            if lam.iter().any(|&l| l < 0.05) {
                continue;
            }
            let x = crate::quadrature::map_point(&mesh.corners(k), &lam);
            if self
                .singular_points
                .iter()
                .any(|z| ((z[0] - x[0]).powi(2) + (z[1] - x[1]).powi(2)).sqrt() < 1e-2 * diam)
            {
                continue;
            }
            taken += 1;
            let g = self.gradient(x);
            let fd = [
                (self.value([x[0] + step, x[1]]) - self.value([x[0] - step, x[1]])) / (2.0 * step),
                (self.value([x[0], x[1] + step]) - self.value([x[0], x[1] - step])) / (2.0 * step),
            ];
            let scale = g[0].hypot(g[1]).max(1.0);
            let rel = (g[0] - fd[0]).hypot(g[1] - fd[1]) / scale;
            if rel > 1e-5 {
                return Err(LocalError::GradientMismatch {
                    name: self.name.clone(),
                    x: x[0],
                    y: x[1],
                    rel,
                });
            }
            worst = worst.max(rel);
        }
        Ok(worst)
    }
}

fn bounding_box(mesh: &Mesh) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in mesh.vertices() {
        for i in 0..2 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    (lo, hi)
}

/// Default rule for local errors of degree `ℓ`: exact to order `2ℓ + 4`.
pub fn default_rule(degree: usize) -> TriangleRule {
    triangle_rule(2 * degree + 4).expect("degree at most 8 is tabulated")
}

/// Physical quadrature points on a triangle, graded toward any singular point
/// of `v` in its closure and refined where `|∇v|²` is poorly resolved.
pub fn element_points(v: &TargetFunction, corners: &[Point; 3], rule: &TriangleRule) -> Vec<(Point, f64)> {
    let hint = v.singular_points.iter().copied().find(|&z| triangle_contains(corners, z));
    let levels = if hint.is_some() { MAX_GRADED_LEVELS } else { 0 };
    let indicator = |x: Point| {
        let g = v.gradient(x);
        g[0] * g[0] + g[1] * g[1]
    };
    adaptive_points(&indicator, corners, rule, hint, levels)
}

/// The mean-matched best fit `P_K` on one element.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalBestFit {
    pub element: usize,
    pub degree: usize,
    /// Nodal values in the order of [`triangle_basis`] nodes relative to the
    /// element's vertex order.
    pub coefficients: Vec<f64>,
    /// `e(v,K) = ∥∇(v − P_K)∥_{L²(K)}`.
    pub e: f64,
    pub mean_matched: bool,
    /// `max_i |∫∇(v−P_K)·∇Φ_i| / (∥∇v∥ ∥∇Φ_i∥)`.
    pub orthogonality_residual: f64,
    /// `|∫(P_K − v)| / ∫|v|`.
    pub mean_residual: f64,
}

impl LocalBestFit {
    /// Evaluates `P_K` at barycentric coordinates.
    pub fn eval(&self, lam: &[f64; 3]) -> f64 {
        let basis = triangle_basis(self.degree).expect("validated degree");
        basis.values(lam).iter().zip(&self.coefficients).map(|(p, c)| p * c).sum()
    }

    /// `ε(K) = e(v,K)²`.
    pub fn epsilon(&self) -> f64 {
        self.e * self.e
    }
}

/// Best fit on an element of a mesh.
pub fn local_best_fit(
    v: &TargetFunction,
    mesh: &Mesh,
    element: usize,
    degree: usize,
    rule: &TriangleRule,
) -> Result<LocalBestFit, LocalError> {
    let mut fit = fit_on_triangle(v, &mesh.corners(element), degree, rule).map_err(|e| e.at(element))?;
    fit.element = element;
    Ok(fit)
}

/// Best fit on a free-standing triangle; `element` is set to `usize::MAX`.
pub fn fit_on_triangle(
    v: &TargetFunction,
    corners: &[Point; 3],
    degree: usize,
    rule: &TriangleRule,
) -> Result<LocalBestFit, LocalError> {
    let basis = triangle_basis(degree)?;
    let geom = ElementGeometry::new(*corners);
    if !(geom.area > 1e-300) || !geom.grad_lambda.iter().flatten().all(|g| g.is_finite()) {
        return Err(LocalError::Degenerate(usize::MAX));
    }
    let n = basis.len();
    let pts = element_points(v, corners, rule);

    // Gram system for the zero-mean directions Φ_i − mean(Φ_i), i ≥ 1; their
    // gradients coincide with those of Φ_i.
    let mut gram = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    let mut phi_int = vec![0.0; n];
    let mut v_int = 0.0;
    let mut v_abs = 0.0;
    let mut grad_v_sq = 0.0;
    let mut cache = Vec::with_capacity(pts.len());
    for &(x, w) in &pts {
        let lam = geom.barycentric(x);
        let phi = basis.values(&lam);
        let grads = basis.gradients(&geom, &lam);
        let gv = v.gradient(x);
        let val = v.value(x);
        v_int += w * val;
        v_abs += w * val.abs();
        grad_v_sq += w * (gv[0] * gv[0] + gv[1] * gv[1]);
        for i in 0..n {
            phi_int[i] += w * phi[i];
            rhs[i] += w * (gv[0] * grads[i][0] + gv[1] * grads[i][1]);
            for j in i..n {
                gram[(i, j)] += w * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
            }
        }
        cache.push((w, gv, grads));
    }
    for i in 0..n {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
    }
    let reduced = gram.view((1, 1), (n - 1, n - 1)).into_owned();
    let b = rhs.rows(1, n - 1).into_owned();
    let chol = reduced.cholesky().ok_or(LocalError::SingularGram(usize::MAX))?;
    let c = chol.solve(&b);

    // P = Σ_{i≥1} c_i Φ_i + κ with κ matching the mean of v.
    let area = geom.area;
    let kappa = (v_int - (1..n).map(|i| c[i - 1] * phi_int[i]).sum::<f64>()) / area;
    let mut coefficients = vec![kappa; n];
    for i in 1..n {
        coefficients[i] += c[i - 1];
    }

    let mut e_sq = 0.0;
    let mut ortho = vec![0.0; n];
    for (w, gv, grads) in &cache {
        let mut gp = [0.0, 0.0];
        for i in 0..n {
            gp[0] += coefficients[i] * grads[i][0];
            gp[1] += coefficients[i] * grads[i][1];
        }
        let r = [gv[0] - gp[0], gv[1] - gp[1]];
        e_sq += w * (r[0] * r[0] + r[1] * r[1]);
        for i in 0..n {
            ortho[i] += w * (r[0] * grads[i][0] + r[1] * grads[i][1]);
        }
    }
    let gv_norm = grad_v_sq.sqrt();
    let orthogonality_residual = if gv_norm > 0.0 {
        (0..n)
            .map(|i| ortho[i].abs() / (gv_norm * gram[(i, i)].sqrt()))
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    let p_int: f64 = coefficients.iter().zip(&phi_int).map(|(c, m)| c * m).sum();
    let mean_residual = if v_abs > 0.0 { (p_int - v_int).abs() / v_abs } else { p_int.abs() };

    Ok(LocalBestFit {
        element: usize::MAX,
        degree,
        coefficients,
        e: e_sq.max(0.0).sqrt(),
        mean_matched: true,
        orthogonality_residual,
        mean_residual,
    })
}

/// `ē(v,K)`: componentwise `L²(K)` best approximation of `∇v` by `P_{ℓ−1}`.
pub fn decoupled_local_error(
    v: &TargetFunction,
    mesh: &Mesh,
    element: usize,
    degree: usize,
    rule: &TriangleRule,
) -> Result<f64, LocalError> {
    decoupled_on_triangle(v, &mesh.corners(element), degree, rule).map_err(|e| e.at(element))
}

pub fn decoupled_on_triangle(
    v: &TargetFunction,
    corners: &[Point; 3],
    degree: usize,
    rule: &TriangleRule,
) -> Result<f64, LocalError> {
    triangle_basis(degree)?;
    let geom = ElementGeometry::new(*corners);
    let pts = element_points(v, corners, rule);
    let lower = degree - 1;
    let values = |lam: &[f64; 3]| -> Vec<f64> {
        if lower == 0 {
            vec![1.0]
        } else {
            triangle_basis(lower).expect("degree in range").values(lam)
        }
    };
    let n = if lower == 0 { 1 } else { triangle_basis(lower)?.len() };
    let mut mass = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DMatrix::<f64>::zeros(n, 2);
    let mut cache = Vec::with_capacity(pts.len());
    for &(x, w) in &pts {
        let phi = values(&geom.barycentric(x));
        let g = v.gradient(x);
        for i in 0..n {
            rhs[(i, 0)] += w * g[0] * phi[i];
            rhs[(i, 1)] += w * g[1] * phi[i];
            for j in 0..n {
                mass[(i, j)] += w * phi[i] * phi[j];
            }
        }
        cache.push((w, g, phi));
    }
    let chol = mass.cholesky().ok_or(LocalError::SingularGram(usize::MAX))?;
    let coef = chol.solve(&rhs);
    let mut sq = 0.0;
    for (w, g, phi) in &cache {
        for comp in 0..2 {
            let r: f64 = g[comp] - (0..n).map(|i| coef[(i, comp)] * phi[i]).sum::<f64>();
            sq += w * r * r;
        }
    }
    Ok(sq.max(0.0).sqrt())
}

/// `ε(K) = e(v,K)²` with the default rule.
pub fn epsilon(v: &TargetFunction, mesh: &Mesh, element: usize, degree: usize) -> Result<f64, LocalError> {
    Ok(local_best_fit(v, mesh, element, degree, &default_rule(degree))?.epsilon())
}

/// Memo of `ε` keyed by function name, element id and degree.
///
/// Element ids are only meaningful within one mesh lineage; after a
/// [`Mesh::rollback`] call [`EpsilonCache::forget_from`] with the first
/// discarded id.
#[derive(Debug, Default, Clone)]
pub struct EpsilonCache {
    values: HashMap<String, HashMap<(usize, usize), f64>>,
    evaluations: usize,
}

impl EpsilonCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, v: &TargetFunction, element: usize, degree: usize) -> Option<f64> {
        self.values.get(v.name()).and_then(|m| m.get(&(element, degree)).copied())
    }

    pub fn insert(&mut self, v: &TargetFunction, element: usize, degree: usize, eps: f64) {
        self.values.entry(v.name().to_string()).or_default().insert((element, degree), eps);
    }

    pub fn get_or_compute(
        &mut self,
        v: &TargetFunction,
        mesh: &Mesh,
        element: usize,
        degree: usize,
        rule: &TriangleRule,
    ) -> Result<f64, LocalError> {
        if let Some(e) = self.get(v, element, degree) {
            return Ok(e);
        }
        let eps = local_best_fit(v, mesh, element, degree, rule)?.epsilon();
        self.evaluations += 1;
        self.insert(v, element, degree, eps);
        Ok(eps)
    }

    /// Number of `ε` evaluations performed through this cache.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn forget_from(&mut self, first_id: usize) {
        for m in self.values.values_mut() {
            m.retain(|&(k, _), _| k < first_id);
        }
    }
}

/// `(C_P, C_Tr)` with `C_Tr = √(C_P (C_P + 2/d))`.
pub fn poincare_trace_constants(dim: usize) -> Result<(f64, f64), LocalError> {
    if dim != 2 {
        return Err(LocalError::UnsupportedDimension(dim));
    }
    let cp = 1.0 / BESSEL_J11;
    Ok((cp, (cp * (cp + 2.0 / dim as f64)).sqrt()))
}

/// Constants of the local decoupling estimate on a mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalConstants {
    pub c_p: f64,
    pub c_tr: f64,
    /// `δ_K` per active element, in increasing element id.
    pub delta: Vec<(usize, f64)>,
    /// `μ_z` per (element, constrained node).
    pub mu: Vec<(usize, NodeKey, f64)>,
    /// Largest number of elements in a node star.
    pub n_m: usize,
}

impl LocalConstants {
    pub fn max_delta(&self) -> f64 {
        self.delta.iter().map(|d| d.1).fold(0.0, f64::max)
    }

    /// Bound on `∥∇(v − Πv)∥ / (Σ e²)^{1/2}` from summing the local estimates,
    /// `(1 + max δ_K² (1 + n_ℓ N_M))^{1/2}` with `n_ℓ = 3ℓ` boundary nodes per element.
    pub fn global_bound(&self, degree: usize) -> f64 {
        let d = self.max_delta();
        (1.0 + d * d * (1.0 + (3 * degree * self.n_m) as f64)).sqrt()
    }
}

/// Elements of a conforming mesh containing a node: the intersection of the
/// vertex stars of its support.
pub fn node_star(stars: &[Vec<usize>], key: &NodeKey) -> Vec<usize> {
    let mut parts = key.parts();
    let first = parts.next().expect("node has support").0;
    let mut out = stars[first].clone();
    for (v, _) in parts {
        out.retain(|k| stars[v].contains(k));
    }
    out
}

/// One term of the `δ_K` sum, exposed for independent checks.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaTerm {
    pub node: NodeKey,
    pub d_hat: f64,
    pub mu: f64,
    /// `h_K ∥∇Φ_z∥_K / ∥Φ_z∥_K`.
    pub inverse_ratio: f64,
}

/// Terms of `δ_K² = 4 d C_Tr Σ d_ẑ² μ_z h_K² ∥∇Φ_z∥² / ∥Φ_z∥²` over the
/// constrained nodes of `element`.
pub fn delta_k_terms(
    mesh: &Mesh,
    stars: &[Vec<usize>],
    element: usize,
    degree: usize,
    is_constrained: &dyn Fn(&NodeKey) -> bool,
) -> Result<Vec<DeltaTerm>, LocalError> {
    let basis = triangle_basis(degree)?;
    let ids = mesh.element(element).vertex_ids;
    let corners = mesh.corners(element);
    let geom = ElementGeometry::new(corners);
    let h_k = mesh.shape_metrics(element).0;
    let area_k = mesh.area(element);
    let rule = triangle_rule(2 * degree)?;
    let mut terms = Vec::new();
    for (i, alpha) in basis.nodes.iter().enumerate() {
        let key = NodeKey::new(ids, alpha);
        if !is_constrained(&key) {
            continue;
        }
        let z = key.location(degree, mesh.vertices());
        let star = node_star(stars, &key);
        if !mesh.face_connected(&star, z) {
            return Err(LocalError::StarNotFaceConnected(z[0], z[1]));
        }
        let mu = area_k / (h_k * h_k)
            * star
                .iter()
                .map(|&k| {
                    let h = mesh.shape_metrics(k).0;
                    h * h / mesh.area(k)
                })
                .sum::<f64>();
        let (mut m, mut g) = (0.0, 0.0);
        for (lam, &w) in rule.points.iter().zip(&rule.weights) {
            let phi = basis.values(lam)[i];
            let d = basis.gradients(&geom, lam)[i];
            m += w * phi * phi;
            g += w * (d[0] * d[0] + d[1] * d[1]);
        }
        let d_hat = reference_norms(degree, alpha)?.d_hat().ok_or(LocalError::NoDualNorm(key))?;
        terms.push(DeltaTerm { node: key, d_hat, mu, inverse_ratio: h_k * (g / m).sqrt() });
    }
    Ok(terms)
}

/// `δ_K` from its terms.
pub fn delta_from_terms(terms: &[DeltaTerm]) -> f64 {
    let (_, c_tr) = poincare_trace_constants(2).expect("d = 2");
    let s: f64 = terms.iter().map(|t| t.d_hat.powi(2) * t.mu * t.inverse_ratio.powi(2)).sum();
    (4.0 * 2.0 * c_tr * s).sqrt()
}

pub fn delta_k_bound(
    mesh: &Mesh,
    element: usize,
    degree: usize,
    is_constrained: &dyn Fn(&NodeKey) -> bool,
) -> Result<f64, LocalError> {
    let stars = mesh.vertex_stars();
    Ok(delta_from_terms(&delta_k_terms(mesh, &stars, element, degree, is_constrained)?))
}

/// Both sides of `∥w∥_F ≤ C_Tr (h_K|F|/|K|)^{1/2} h_K^{1/2} ∥∇w∥_K` for a
/// zero-mean polynomial given by its nodal values; `face` is the local edge
/// opposite vertex `face`.
pub fn trace_inequality_check(
    coefficients: &[f64],
    degree: usize,
    corners: &[Point; 3],
    face: usize,
) -> Result<(f64, f64), LocalError> {
    let basis = triangle_basis(degree)?;
    let geom = ElementGeometry::new(*corners);
    let rule = triangle_rule(2 * degree)?;
    let (mut mean, mut l2, mut grad) = (0.0, 0.0, 0.0);
    for (lam, &w) in rule.points.iter().zip(&rule.weights) {
        let phi = basis.values(lam);
        let g = basis.gradients(&geom, lam);
        let val: f64 = phi.iter().zip(coefficients).map(|(p, c)| p * c).sum();
        let mut gw = [0.0, 0.0];
        for (gi, c) in g.iter().zip(coefficients) {
            gw[0] += c * gi[0];
            gw[1] += c * gi[1];
        }
        mean += w * val;
        l2 += w * val * val;
        grad += w * (gw[0] * gw[0] + gw[1] * gw[1]);
    }
    let area = geom.area;
    if mean.abs() > 1e-10 * l2.sqrt().max(f64::MIN_POSITIVE) {
        return Err(LocalError::NonZeroMean(mean));
    }
    let p = corners[(face + 1) % 3];
    let q = corners[(face + 2) % 3];
    let len = crate::mesh::distance(p, q);
    let mut face_sq = 0.0;
    for (t, w) in edge_rule(2 * degree).parameters() {
        let mut lam = [0.0; 3];
        lam[(face + 1) % 3] = 1.0 - t;
        lam[(face + 2) % 3] = t;
        let val: f64 = basis.values(&lam).iter().zip(coefficients).map(|(p, c)| p * c).sum();
        face_sq += w * val * val;
    }
    let lhs = (face_sq * len).sqrt();
    let h = geom.diameter();
    let (_, c_tr) = poincare_trace_constants(2)?;
    let rhs = c_tr * (h * len / area).sqrt() * h.sqrt() * (grad * area).sqrt();
    Ok((lhs, rhs))
}
