//! Local best approximation e(v,K) on single elements, and its decay under
//! bisection.

use gradfit::local_approx::{default_rule, epsilon, fit_on_triangle, local_best_fit};
use gradfit::mesh::builtin;
use gradfit::registry::lookup;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let x2 = lookup("x2")?.function;
    let reference = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let fit = fit_on_triangle(&x2, &reference, 1, &default_rule(1))?;
    println!("x² on the reference triangle, ℓ = 1: e = {:.12} (1/3 expected)", fit.e);
    println!("  orthogonality residual {:.1e}, mean residual {:.1e}", fit.orthogonality_residual, fit.mean_residual);

    let sine = lookup("sine")?.function;
    let mut mesh = builtin::unit_square();
    let mut k = 0;
    for step in 0..8 {
        let rows: Vec<String> = (1..=3)
            .map(|l| local_best_fit(&sine, &mesh, k, l, &default_rule(l)).map(|f| format!("ℓ={l}: {:.3e}", f.e)))
            .collect::<Result<_, _>>()?;
        println!("step {step}: area {:.3e}, {}", mesh.area(k), rows.join(", "));
        let eps = epsilon(&sine, &mesh, k, 1)?;
        let (a, b) = mesh.bisect(k)?;
        let sum = epsilon(&sine, &mesh, a, 1)? + epsilon(&sine, &mesh, b, 1)?;
        println!("  ε(K) = {eps:.4e} ≥ ε(K₁) + ε(K₂) = {sum:.4e}");
        k = a;
    }
    Ok(())
}
