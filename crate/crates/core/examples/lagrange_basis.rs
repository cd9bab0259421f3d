//! Lagrange shape functions: nodal interpolation property and partition of unity.

use gradfit::polynomial::{lagrange_nodes_triangle, triangle_basis, ElementGeometry};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corners = [[0.0, 0.0], [2.0, 0.5], [0.5, 1.5]];
    let geom = ElementGeometry::new(corners);
    for degree in 1..=4 {
        let basis = triangle_basis(degree)?;
        let nodes = lagrange_nodes_triangle(degree, &corners);
        let mut kronecker: f64 = 0.0;
        for (j, node) in nodes.iter().enumerate() {
            let vals = basis.values(&geom.barycentric(node.location));
            for (i, v) in vals.iter().enumerate() {
                kronecker = kronecker.max((v - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        let lam = [0.2, 0.3, 0.5];
        let sum: f64 = basis.values(&lam).iter().sum();
        let grad_sum = basis
            .gradients(&geom, &lam)
            .iter()
            .fold([0.0, 0.0], |acc, g| [acc[0] + g[0], acc[1] + g[1]]);
        println!(
            "degree {degree}: {} functions, max |Φ_i(z_j) − δ_ij| = {kronecker:.1e}, ΣΦ = {sum:.15}, |Σ∇Φ| = {:.1e}",
            basis.len(),
            grad_sum[0].hypot(grad_sum[1])
        );
    }
    Ok(())
}
