//! Corner singularity on the L-shape: uniform against budget-driven meshes.

use gradfit::experiments::{run_tree, ExperimentConfig, MeshSource};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig {
        function: "lshape".into(),
        degree: 1,
        mesh: Some(MeshSource::LShape),
        budgets: vec![5000],
        ..Default::default()
    };
    let report = run_tree(&cfg)?;
    print!("{}", report.to_csv());
    if let Some(s) = report.slope {
        println!("# slope of E against #M: {s:.4} (uniform refinement gives about -1/3)");
    }
    Ok(())
}
