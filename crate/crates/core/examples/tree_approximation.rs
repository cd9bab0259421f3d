//! Adaptive tree approximation with the threshold and budget controls.

use gradfit::mesh::builtin;
use gradfit::registry::lookup;
use gradfit::tree::{tree_budget, tree_threshold, TreeOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let entry = lookup("poly_bump")?;
    let mesh0 = builtin::unit_square();
    let opts = TreeOptions::default();
    for t in [1e-2, 1e-3, 1e-4, 1e-5] {
        let run = tree_threshold(&entry.function, &mesh0, 1, t, &opts)?;
        println!(
            "threshold {t:.0e}: {} leaves, conforming mesh {} triangles, broken error {:.4e}",
            run.tree.leaf_count(),
            run.mesh.active_count(),
            run.tree.broken_error()
        );
    }
    for n in [50, 200, 800] {
        let run = tree_budget(&entry.function, &mesh0, 2, n, &opts)?;
        println!("budget {n}: {} triangles after {} greedy steps", run.mesh.active_count(), run.log.len());
    }
    let run = tree_threshold(&entry.function, &mesh0, 1, 1e-3, &opts)?;
    println!("first log records:");
    for line in run.log_jsonl().lines().take(3) {
        println!("  {line}");
    }
    Ok(())
}
