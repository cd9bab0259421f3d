//! Exhaustive best error over all bisection forests with a bounded number of
//! extra elements, compared with the threshold algorithm.

use gradfit::experiments::{run_oracle, ExperimentConfig, MeshSource};
use gradfit::mesh::builtin;
use gradfit::registry::lookup;
use gradfit::tree::{sigma_prime_table, TreeOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let v = lookup("poly_bump2")?.function;
    let (table, _) = sigma_prime_table(&v, &builtin::unit_square(), 1, 10, &TreeOptions::default())?;
    for row in &table {
        println!("N = {:>2}: σ′ = {:.5e} with {} leaves", row.n, row.value, row.leaves.len());
    }
    let cfg = ExperimentConfig {
        function: "poly_bump".into(),
        degree: 1,
        mesh: Some(MeshSource::UnitSquare),
        ..Default::default()
    };
    println!("{}", serde_json::to_string_pretty(&run_oracle(&cfg)?)?);
    Ok(())
}
