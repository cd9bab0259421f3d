//! Lagrange bases on triangles and edges, dual face bases and Scott–Zhang
//! nodal functionals.
//!
//! Basis functions are stored as coefficient vectors over homogeneous
//! barycentric monomials `λ^α`, `|α| = ℓ`, obtained once per degree from the
//! nodal Vandermonde system. Evaluation therefore only needs barycentric
//! coordinates and the element's constant `∇λ_k`.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::mesh::{distance, signed_area, Point};
use crate::quadrature::{edge_rule, triangle_rule, EdgeRule};

pub const MAX_POLY_DEGREE: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolynomialError {
    #[error("unsupported polynomial degree {0} (supported: 1..={MAX_POLY_DEGREE})")]
    UnsupportedDegree(usize),
    #[error("singular edge mass matrix")]
    SingularMass,
}

pub type MultiIndex = [u8; 3];

/// Barycentric multi-indices of total order `degree` in `dim + 1` variables.
///
/// Ordering: vertices, then edge nodes edge by edge, then interior nodes.
pub fn multi_indices(degree: usize, dim: usize) -> Vec<MultiIndex> {
    let l = degree as u8;
    let mut all = Vec::new();
    if dim == 1 {
        for b in 0..=l {
            all.push([l - b, b, 0]);
        }
        // endpoints first, interior edge nodes by parameter
        all.sort_by_key(|a| (a[0] != 0 && a[1] != 0, a[1]));
        return all;
    }
    for a in (0..=l).rev() {
        for b in (0..=(l - a)).rev() {
            all.push([a, b, l - a - b]);
        }
    }
    all.sort_by_key(|a| {
        let zeros = a.iter().filter(|&&x| x == 0).count();
        let class = match zeros {
            2 => 0,
            1 => 1,
            _ => 2,
        };
        let slot = if class == 0 {
            a.iter().position(|&x| x != 0).unwrap_or(0)
        } else {
            a.iter().position(|&x| x == 0).unwrap_or(3)
        };
        (class, slot, std::cmp::Reverse(a[(slot + 1) % 3]))
    });
    all
}

#[derive(Clone, Debug, PartialEq)]
pub struct LagrangeNode {
    pub multi_index: MultiIndex,
    pub location: Point,
}

/// Lagrange nodes of a triangle, in the order of [`multi_indices`].
pub fn lagrange_nodes_triangle(degree: usize, corners: &[Point; 3]) -> Vec<LagrangeNode> {
    multi_indices(degree, 2)
        .into_iter()
        .map(|a| LagrangeNode { multi_index: a, location: node_location(degree, &a, corners) })
        .collect()
}

/// Lagrange nodes of an edge from `p` (parameter 0) to `q`.
pub fn lagrange_nodes_edge(degree: usize, p: Point, q: Point) -> Vec<LagrangeNode> {
    multi_indices(degree, 1)
        .into_iter()
        .map(|a| LagrangeNode {
            multi_index: a,
            location: node_location(degree, &a, &[p, q, [0.0, 0.0]]),
        })
        .collect()
}

/// `(1/ℓ) Σ α_i a_i`, returning vertices exactly.
pub fn node_location(degree: usize, alpha: &MultiIndex, corners: &[Point; 3]) -> Point {
    if let Some(i) = alpha.iter().position(|&a| a as usize == degree) {
        return corners[i];
    }
    let l = degree as f64;
    let mut x = [0.0, 0.0];
    for (i, &a) in alpha.iter().enumerate() {
        if a > 0 {
            x[0] += a as f64 * corners[i][0];
            x[1] += a as f64 * corners[i][1];
        }
    }
    [x[0] / l, x[1] / l]
}

/// Nodal basis of `P_ℓ` in barycentric monomial form.
#[derive(Clone, Debug)]
pub struct ShapeBasis {
    pub degree: usize,
    pub dim: usize,
    pub nodes: Vec<MultiIndex>,
    monomials: Vec<MultiIndex>,
    /// `coeffs[(j, i)]` is the weight of monomial `j` in basis function `i`.
    coeffs: DMatrix<f64>,
}

fn monomial(alpha: &MultiIndex, lam: &[f64; 3]) -> f64 {
    (0..3).map(|k| lam[k].powi(alpha[k] as i32)).product()
}

fn monomial_derivative(alpha: &MultiIndex, lam: &[f64; 3], k: usize) -> f64 {
    if alpha[k] == 0 {
        return 0.0;
    }
    let mut v = alpha[k] as f64;
    for (i, &a) in alpha.iter().enumerate() {
        let e = if i == k { a as i32 - 1 } else { a as i32 };
        v *= lam[i].powi(e);
    }
    v
}

impl ShapeBasis {
    fn build(degree: usize, dim: usize) -> Self {
        let nodes = multi_indices(degree, dim);
        let monomials = nodes.clone();
        let n = nodes.len();
        let l = degree as f64;
        let vander = DMatrix::from_fn(n, n, |i, j| {
            let lam = nodes[i].map(|a| a as f64 / l);
            monomial(&monomials[j], &lam)
        });
        // Φ_i(node_k) = Σ_j c_{ji} V_{kj} = δ_ik  ⇒  C = V⁻¹.
        let coeffs = vander.try_inverse().expect("Lagrange Vandermonde matrix is invertible");
        ShapeBasis { degree, dim, nodes, monomials, coeffs }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Values of all basis functions at barycentric coordinates `lam`.
    pub fn values(&self, lam: &[f64; 3]) -> Vec<f64> {
        let m: Vec<f64> = self.monomials.iter().map(|a| monomial(a, lam)).collect();
        (0..self.len())
            .map(|i| (0..self.len()).map(|j| self.coeffs[(j, i)] * m[j]).sum())
            .collect()
    }

    /// Derivatives of all basis functions with respect to each `λ_k`.
    pub fn lambda_derivatives(&self, lam: &[f64; 3]) -> Vec<[f64; 3]> {
        let dm: Vec<[f64; 3]> = self
            .monomials
            .iter()
            .map(|a| [0, 1, 2].map(|k| monomial_derivative(a, lam, k)))
            .collect();
        (0..self.len())
            .map(|i| {
                let mut d = [0.0; 3];
                for (j, dmj) in dm.iter().enumerate() {
                    let c = self.coeffs[(j, i)];
                    for k in 0..3 {
                        d[k] += c * dmj[k];
                    }
                }
                d
            })
            .collect()
    }

    /// Physical gradients on an element.
    pub fn gradients(&self, geom: &ElementGeometry, lam: &[f64; 3]) -> Vec<[f64; 2]> {
        self.lambda_derivatives(lam).into_iter().map(|d| geom.gradient_from_lambda(&d)).collect()
    }
}

static TRIANGLE_BASES: [OnceLock<ShapeBasis>; MAX_POLY_DEGREE] =
    [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
static EDGE_BASES: [OnceLock<ShapeBasis>; MAX_POLY_DEGREE] =
    [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];

fn check_degree(degree: usize) -> Result<(), PolynomialError> {
    if (1..=MAX_POLY_DEGREE).contains(&degree) {
        Ok(())
    } else {
        Err(PolynomialError::UnsupportedDegree(degree))
    }
}

pub fn triangle_basis(degree: usize) -> Result<&'static ShapeBasis, PolynomialError> {
    check_degree(degree)?;
    Ok(TRIANGLE_BASES[degree - 1].get_or_init(|| ShapeBasis::build(degree, 2)))
}

pub fn edge_basis(degree: usize) -> Result<&'static ShapeBasis, PolynomialError> {
    check_degree(degree)?;
    Ok(EDGE_BASES[degree - 1].get_or_init(|| ShapeBasis::build(degree, 1)))
}

/// Affine data of a triangle: area and the constant barycentric gradients.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub corners: [Point; 3],
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(corners: [Point; 3]) -> Self {
        let [a, b, c] = corners;
        let area = signed_area(a, b, c);
        let inv2a = 1.0 / (2.0 * area);
        // ∇λ_i = rot(a_{i+1} − a_{i+2}) / (2|K|) with rot(x, y) = (y, −x).
        let g = |p: Point, q: Point| [(p[1] - q[1]) * inv2a, (q[0] - p[0]) * inv2a];
        ElementGeometry { corners, area: area.abs(), grad_lambda: [g(b, c), g(c, a), g(a, b)] }
    }

    pub fn gradient_from_lambda(&self, d: &[f64; 3]) -> [f64; 2] {
        let g = &self.grad_lambda;
        [
            d[0] * g[0][0] + d[1] * g[1][0] + d[2] * g[2][0],
            d[0] * g[0][1] + d[1] * g[1][1] + d[2] * g[2][1],
        ]
    }

    pub fn barycentric(&self, x: Point) -> [f64; 3] {
        let [a, b, c] = self.corners;
        let s = signed_area(a, b, c);
        [signed_area(x, b, c) / s, signed_area(a, x, c) / s, signed_area(a, b, x) / s]
    }

    pub fn diameter(&self) -> f64 {
        let [a, b, c] = self.corners;
        distance(a, b).max(distance(b, c)).max(distance(c, a))
    }
}

/// `L²(F)` representers of point evaluation at the edge Lagrange nodes.
#[derive(Clone, Debug)]
pub struct DualFaceBasis {
    pub degree: usize,
    pub length: f64,
    /// `node_values[(y, z)] = Ψ_z(y)` for edge nodes `y`, `z` in [`multi_indices`] order.
    pub node_values: DMatrix<f64>,
}

impl DualFaceBasis {
    /// `Ψ_z` at edge parameter `t ∈ [0, 1]`.
    pub fn eval(&self, z: usize, t: f64) -> f64 {
        let basis = edge_basis(self.degree).expect("degree validated at construction");
        let phi = basis.values(&[1.0 - t, t, 0.0]);
        phi.iter().enumerate().map(|(y, p)| p * self.node_values[(y, z)]).sum()
    }
}

static REFERENCE_DUALS: [OnceLock<DMatrix<f64>>; MAX_POLY_DEGREE] =
    [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];

/// Inverse of the edge mass matrix on the unit-length edge.
fn reference_dual(degree: usize) -> Result<&'static DMatrix<f64>, PolynomialError> {
    check_degree(degree)?;
    if let Some(m) = REFERENCE_DUALS[degree - 1].get() {
        return Ok(m);
    }
    let basis = edge_basis(degree)?;
    let rule = edge_rule(2 * degree);
    let n = basis.len();
    let mut mass = DMatrix::zeros(n, n);
    for (t, w) in rule.parameters() {
        let phi = basis.values(&[1.0 - t, t, 0.0]);
        for i in 0..n {
            for j in 0..n {
                mass[(i, j)] += w * phi[i] * phi[j];
            }
        }
    }
    let inv = mass.try_inverse().ok_or(PolynomialError::SingularMass)?;
    Ok(REFERENCE_DUALS[degree - 1].get_or_init(|| inv))
}

pub fn dual_face_basis(degree: usize, length: f64) -> Result<DualFaceBasis, PolynomialError> {
    if !(length > 0.0) {
        return Err(PolynomialError::SingularMass);
    }
    let inv = reference_dual(degree)?;
    Ok(DualFaceBasis { degree, length, node_values: inv / length })
}

/// Scott–Zhang functional `N_{z;F}(v) = ∫_F v Ψ_z^F` for the edge from `p` to
/// `q`, with `z` the local edge-node index.
pub fn scott_zhang_value(
    v: &dyn Fn(Point) -> f64,
    degree: usize,
    z: usize,
    p: Point,
    q: Point,
    rule: &EdgeRule,
) -> Result<f64, PolynomialError> {
    let inv = reference_dual(degree)?;
    let basis = edge_basis(degree)?;
    let mut acc = 0.0;
    for (t, w) in rule.parameters() {
        let phi = basis.values(&[1.0 - t, t, 0.0]);
        let psi: f64 = phi.iter().enumerate().map(|(y, f)| f * inv[(y, z)]).sum();
        let x = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
        acc += w * v(x) * psi;
    }
    // ∫_F v Ψ^F = |F| ∫_0^1 v Ψ̂ / |F|
    Ok(acc)
}

/// Barycentric coefficients sorted in decreasing order; the reference node is
/// `(λ*_1, λ*_2)` in the reference triangle `conv{0, e1, e2}`.
pub fn reference_node(alpha: &MultiIndex) -> MultiIndex {
    let mut s = *alpha;
    s.sort_unstable_by(|a, b| b.cmp(a));
    s
}

pub fn reference_node_point(degree: usize, alpha: &MultiIndex) -> Point {
    let s = reference_node(alpha);
    let l = degree as f64;
    [s[1] as f64 / l, s[2] as f64 / l]
}

/// Norms of the reference basis and dual functions for one sorted node class.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceNorms {
    pub node: MultiIndex,
    pub phi_l2: f64,
    pub grad_phi_l2: f64,
    /// Only for nodes on the reference edge `conv{0, e1}`.
    pub psi_l2: Option<f64>,
}

impl ReferenceNorms {
    /// `d_ẑ = ∥Ψ̂_ẑ∥ ∥Φ̂_ẑ∥`.
    pub fn d_hat(&self) -> Option<f64> {
        self.psi_l2.map(|p| p * self.phi_l2)
    }
}

static NORM_TABLES: [OnceLock<Vec<ReferenceNorms>>; MAX_POLY_DEGREE] =
    [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];

pub fn reference_norm_table(degree: usize) -> Result<&'static [ReferenceNorms], PolynomialError> {
    check_degree(degree)?;
    if let Some(t) = NORM_TABLES[degree - 1].get() {
        return Ok(t);
    }
    let basis = triangle_basis(degree)?;
    let ebasis = edge_basis(degree)?;
    let inv = reference_dual(degree)?;
    let geom = ElementGeometry::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
    let rule = triangle_rule(2 * degree).expect("degree within range");
    let erule = edge_rule(2 * degree);
    let mut table = Vec::new();
    for (i, alpha) in basis.nodes.iter().enumerate() {
        if reference_node(alpha) != *alpha {
            continue;
        }
        let (mut m, mut g) = (0.0, 0.0);
        for (lam, &w) in rule.points.iter().zip(&rule.weights) {
            let v = basis.values(lam)[i];
            let d = basis.gradients(&geom, lam)[i];
            m += w * v * v;
            g += w * (d[0] * d[0] + d[1] * d[1]);
        }
        let psi_l2 = (alpha[2] == 0).then(|| {
            let z = ebasis
                .nodes
                .iter()
                .position(|e| e[0] == alpha[0] && e[1] == alpha[1])
                .expect("edge node exists");
            let s: f64 = erule
                .parameters()
                .map(|(t, w)| {
                    let phi = ebasis.values(&[1.0 - t, t, 0.0]);
                    let psi: f64 = phi.iter().enumerate().map(|(y, f)| f * inv[(y, z)]).sum();
                    w * psi * psi
                })
                .sum();
            s.sqrt()
        });
        table.push(ReferenceNorms {
            node: *alpha,
            phi_l2: (m * geom.area).sqrt(),
            grad_phi_l2: (g * geom.area).sqrt(),
            psi_l2,
        });
    }
    Ok(NORM_TABLES[degree - 1].get_or_init(|| table))
}

pub fn reference_norms(degree: usize, alpha: &MultiIndex) -> Result<&'static ReferenceNorms, PolynomialError> {
    let key = reference_node(alpha);
    Ok(reference_norm_table(degree)?
        .iter()
        .find(|r| r.node == key)
        .expect("every sorted node class is tabulated"))
}

/// Mesh-level identity of a Lagrange node: its nonzero barycentric weights
/// keyed by global vertex id, in increasing vertex order. Elements sharing a
/// node produce equal keys regardless of their vertex enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeKey {
    parts: [(usize, u8); 3],
}

impl NodeKey {
    pub fn new(vertex_ids: [usize; 3], alpha: &MultiIndex) -> Self {
        let mut parts = [(usize::MAX, 0u8); 3];
        let mut n = 0;
        for i in 0..3 {
            if alpha[i] > 0 {
                parts[n] = (vertex_ids[i], alpha[i]);
                n += 1;
            }
        }
        parts[..n].sort_unstable();
        NodeKey { parts }
    }

    pub fn parts(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        self.parts.iter().copied().filter(|p| p.0 != usize::MAX)
    }

    /// 1 for vertex nodes, 2 for edge-interior nodes, 3 for element-interior nodes.
    pub fn support_len(&self) -> usize {
        self.parts().count()
    }

    pub fn vertex(&self) -> Option<usize> {
        (self.support_len() == 1).then_some(self.parts[0].0)
    }

    pub fn edge(&self) -> Option<crate::mesh::FaceKey> {
        (self.support_len() == 2).then(|| crate::mesh::FaceKey::new(self.parts[0].0, self.parts[1].0))
    }

    /// Weight of a vertex in this node, zero if absent.
    pub fn weight(&self, vertex: usize) -> u8 {
        self.parts().find(|p| p.0 == vertex).map_or(0, |p| p.1)
    }

    pub fn location(&self, degree: usize, vertices: &[Point]) -> Point {
        if let Some(v) = self.vertex() {
            return vertices[v];
        }
        let mut x = [0.0, 0.0];
        for (v, a) in self.parts() {
            x[0] += a as f64 * vertices[v][0];
            x[1] += a as f64 * vertices[v][1];
        }
        [x[0] / degree as f64, x[1] / degree as f64]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::triangle_rule;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_triangle(rng: &mut ChaCha8Rng) -> [Point; 3] {
        loop {
            let t: [Point; 3] = [0, 1, 2].map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]);
            let a = signed_area(t[0], t[1], t[2]);
            if a > 0.05 {
                return t;
            }
        }
    }

    #[test]
    fn node_keys_ignore_vertex_order() {
        let a = NodeKey::new([4, 9, 2], &[1, 2, 0]);
        let b = NodeKey::new([9, 4, 7], &[2, 1, 0]);
        assert_eq!(a, b);
        assert_eq!(a.edge(), Some(crate::mesh::FaceKey::new(4, 9)));
        let v = NodeKey::new([3, 1, 2], &[0, 0, 2]);
        assert_eq!(v.vertex(), Some(2));
        assert_eq!(NodeKey::new([0, 1, 2], &[1, 1, 1]).support_len(), 3);
    }

    #[test]
    fn node_counts() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let n1 = lagrange_nodes_triangle(1, &tri);
        assert_eq!(n1.iter().map(|n| n.location).collect::<Vec<_>>(), tri.to_vec());
        let n2 = lagrange_nodes_triangle(2, &tri);
        assert_eq!(n2.len(), 6);
        assert!(n2.iter().any(|n| n.location == [0.5, 0.5]));
        let n3 = multi_indices(3, 2);
        assert_eq!(n3.len(), 10);
        assert_eq!(n3.iter().filter(|a| a.iter().all(|&x| x >= 1)).count(), 1);
        for l in 1..=4 {
            assert_eq!(multi_indices(l, 2).len(), (l + 1) * (l + 2) / 2);
            assert_eq!(lagrange_nodes_edge(l, [0.0, 0.0], [1.0, 0.0]).len(), l + 1);
        }
    }

    #[test]
    fn nodal_property_and_partition_of_unity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for l in 1..=4 {
            let b = triangle_basis(l).unwrap();
            for (k, node) in b.nodes.iter().enumerate() {
                let lam = node.map(|a| a as f64 / l as f64);
                let v = b.values(&lam);
                for (i, vi) in v.iter().enumerate() {
                    let want = if i == k { 1.0 } else { 0.0 };
                    assert!((vi - want).abs() < 1e-12);
                }
            }
            let geom = ElementGeometry::new(random_triangle(&mut rng));
            for _ in 0..100 {
                let (a, c): (f64, f64) = (rng.gen(), rng.gen());
                let lam = if a + c <= 1.0 { [1.0 - a - c, a, c] } else { [a + c - 1.0, 1.0 - c, 1.0 - a] };
                let s: f64 = b.values(&lam).iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
                let g = b.gradients(&geom, &lam);
                let gs = g.iter().fold([0.0, 0.0], |acc, d| [acc[0] + d[0], acc[1] + d[1]]);
                assert!(gs[0].abs() < 1e-10 && gs[1].abs() < 1e-10);
            }
        }
    }

    #[test]
    fn quadratic_vertex_function_vanishes_at_midpoints() {
        let b = triangle_basis(2).unwrap();
        let v0 = b.nodes.iter().position(|a| *a == [2, 0, 0]).unwrap();
        for mid in [[0.5, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5]] {
            assert!(b.values(&mid)[v0].abs() < 1e-14);
        }
        let v = triangle_basis(1).unwrap().values(&[1.0, 0.0, 0.0]);
        assert_eq!(v[0], 1.0);
    }

    #[test]
    fn linear_dual_basis_values() {
        let d = dual_face_basis(1, 1.0).unwrap();
        assert!((d.node_values[(0, 0)] - 4.0).abs() < 1e-12);
        assert!((d.node_values[(1, 0)] + 2.0).abs() < 1e-12);
        let d3 = dual_face_basis(1, 3.0).unwrap();
        assert!((d3.node_values[(0, 0)] - 4.0 / 3.0).abs() < 1e-12);
        assert!((d3.node_values[(1, 0)] + 2.0 / 3.0).abs() < 1e-12);
        assert!((d.eval(0, 0.5) - 1.0).abs() < 1e-12);
        assert!(dual_face_basis(1, 0.0).is_err());
    }

    #[test]
    fn duality_holds_for_all_degrees() {
        for l in 1..=4 {
            let eb = edge_basis(l).unwrap();
            let d = dual_face_basis(l, 1.0).unwrap();
            let rule = edge_rule(2 * l);
            for y in 0..=l {
                for z in 0..=l {
                    let s: f64 = rule
                        .parameters()
                        .map(|(t, w)| w * eb.values(&[1.0 - t, t, 0.0])[y] * d.eval(z, t))
                        .sum();
                    let want = if y == z { 1.0 } else { 0.0 };
                    assert!((s - want).abs() < 1e-12, "l={l} y={y} z={z}: {s}");
                }
            }
        }
    }

    #[test]
    fn scott_zhang_examples() {
        let rule = edge_rule(8);
        let (p, q) = ([0.0, 0.0], [1.0, 0.0]);
        let one = scott_zhang_value(&|_| 1.0, 1, 0, p, q, &rule).unwrap();
        assert!((one - 1.0).abs() < 1e-13);
        let sq = scott_zhang_value(&|x| x[0] * x[0], 1, 0, p, q, &rule).unwrap();
        assert!((sq + 1.0 / 6.0).abs() < 1e-13);
        // Reproduction of P_ℓ traces at the nodes.
        for l in 1..=4 {
            let f = |x: Point| 1.0 + x[0] - 2.0 * x[1] + 0.5 * (x[0] - x[1]).powi(l as i32);
            let (a, b) = ([0.3, -0.1], [1.1, 0.7]);
            for (z, node) in lagrange_nodes_edge(l, a, b).iter().enumerate() {
                let n = scott_zhang_value(&f, l, z, a, b, &rule).unwrap();
                assert!((n - f(node.location)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reference_node_examples() {
        assert_eq!(reference_node_point(1, &[0, 1, 0]), [0.0, 0.0]);
        let c = reference_node_point(3, &[1, 1, 1]);
        assert!((c[0] - 1.0 / 3.0).abs() < 1e-15 && (c[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(reference_node_point(2, &[0, 1, 1]), [0.5, 0.0]);
    }

    #[test]
    fn reference_norms_linear() {
        let t = reference_norm_table(1).unwrap();
        assert_eq!(t.len(), 1);
        assert!((t[0].phi_l2.powi(2) - 1.0 / 12.0).abs() < 1e-14);
        assert!((t[0].psi_l2.unwrap().powi(2) - 4.0).abs() < 1e-12);
        // Φ̂ at the origin is 1 - x - y with gradient (-1, -1).
        assert!((t[0].grad_phi_l2.powi(2) - 1.0).abs() < 1e-14);
        for l in 2..=4 {
            let t = reference_norm_table(l).unwrap();
            assert_eq!(t.iter().filter(|r| r.psi_l2.is_none()).count(), usize::from(l >= 3));
        }
    }

    #[test]
    fn scaling_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for l in 1..=4 {
            let b = triangle_basis(l).unwrap();
            let rule = triangle_rule(2 * l).unwrap();
            for _ in 0..5 {
                let geom = ElementGeometry::new(random_triangle(&mut rng));
                for (i, alpha) in b.nodes.iter().enumerate() {
                    let m: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(lam, w)| w * b.values(lam)[i].powi(2))
                        .sum::<f64>()
                        * geom.area;
                    let want = 2f64.sqrt() * geom.area.sqrt() * reference_norms(l, alpha).unwrap().phi_l2;
                    assert!((m.sqrt() / want - 1.0).abs() < 1e-10);
                }
                let len: f64 = rng.gen_range(0.1..3.0);
                let d = dual_face_basis(l, len).unwrap();
                let erule = edge_rule(2 * l);
                for (z, alpha) in multi_indices(l, 1).iter().enumerate() {
                    let s: f64 = erule.parameters().map(|(t, w)| w * d.eval(z, t).powi(2)).sum::<f64>() * len;
                    let want = len.powf(-0.5) * reference_norms(l, alpha).unwrap().psi_l2.unwrap();
                    assert!((s.sqrt() / want - 1.0).abs() < 1e-10);
                }
            }
        }
    }
}
