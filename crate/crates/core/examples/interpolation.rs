//! Scott–Zhang type quasi-interpolation: reproduction of discrete functions
//! and comparison with the best approximation.

use gradfit::global_approx::{build_space, energy_error, interpolate, ritz_projection, BoundaryCondition};
use gradfit::local_approx::default_rule;
use gradfit::mesh::builtin;
use gradfit::registry::lookup;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut mesh = builtin::l_shape();
    mesh.refine_uniform(4)?;
    let target = lookup("lshape")?.function;
    for degree in 1..=4 {
        let space = build_space(&mesh, degree, BoundaryCondition::Neumann)?;
        let rule = default_rule(degree);

        let coeffs: Vec<f64> = space.nodal_values(|x| (3.0 * x[0]).sin() * x[1]);
        let discrete = space.as_target(&coeffs, "discrete");
        let back = interpolate(&discrete, &space, &rule)?;
        let repro = back.iter().zip(&coeffs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

        let pi = interpolate(&target, &space, &rule)?;
        let interp = energy_error(&target, &space, &pi, &rule);
        let best = ritz_projection(&target, &space, &rule, 1e-12)?.e;
        println!(
            "ℓ={degree}: {} dofs, reproduction {repro:.1e}, ∥∇(v−Πv)∥ = {interp:.4e}, E = {best:.4e}, ratio {:.3}",
            space.dof_count(),
            interp / best
        );
    }
    Ok(())
}
