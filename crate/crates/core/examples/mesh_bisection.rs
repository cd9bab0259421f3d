//! Newest-vertex bisection: a single bisection leaves a hanging vertex,
//! completion removes it.

use gradfit::mesh::builtin;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut mesh = builtin::unit_square();
    println!("initial: {} triangles, conforming {}", mesh.active_count(), mesh.is_conforming());

    let (a, b) = mesh.bisect(0)?;
    println!("bisected 0 into {a} and {b}: conforming {}", mesh.is_conforming());
    let (c, _) = mesh.bisect(a)?;
    mesh.bisect(c)?;
    println!("after three bisections: {} triangles, conforming {}", mesh.active_count(), mesh.is_conforming());

    let added = mesh.complete()?;
    println!("completion added {added} triangles: {} total, conforming {}", mesh.active_count(), mesh.is_conforming());

    let cp = mesh.checkpoint();
    let id = mesh.active_ids()[0];
    let grown = mesh.refine_conforming(id)?;
    println!("conforming refinement of {id} added {grown}; rolling back");
    mesh.rollback(cp);
    println!("back to {} triangles", mesh.active_count());

    for levels in [2, 4, 6] {
        let mut m = builtin::unit_square();
        m.refine_uniform(levels)?;
        println!(
            "uniform {levels}: {} triangles, h = {:.4}, shape coefficient {:.3}",
            m.active_count(),
            m.max_diameter(),
            m.max_shape_coefficient()
        );
    }
    Ok(())
}
