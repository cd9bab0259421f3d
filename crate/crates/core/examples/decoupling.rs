//! Global best error against the sum of independent local errors.

use gradfit::experiments::{decoupling_csv, run_decoupling, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (function, degree) in [("sine", 1), ("sine", 2), ("atan_layer", 1)] {
        let cfg = ExperimentConfig { function: function.into(), degree, levels: (1..=4).collect(), ..Default::default() };
        println!("# {function}, degree {degree}");
        print!("{}", decoupling_csv(&run_decoupling(&cfg)?));
    }
    Ok(())
}
