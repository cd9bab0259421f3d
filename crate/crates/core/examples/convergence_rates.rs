//! Orders of convergence under uniform refinement for degrees 1 to 3.

use gradfit::experiments::{run_rates, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for degree in 1..=3 {
        let cfg = ExperimentConfig { function: "sine".into(), degree, levels: (1..=5).collect(), ..Default::default() };
        let table = run_rates(&cfg)?;
        println!("# degree {degree}");
        print!("{}", table.to_csv());
        if let Some(eoc) = table.final_eoc {
            println!("# order over the last three levels {eoc:.4}");
        }
    }
    Ok(())
}
