//! Triangle rules integrate monomials exactly up to their degree; graded
//! subdivision handles a point singularity.

use gradfit::quadrature::{gauss_legendre, integrate_triangle, triangle_rule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    // ∫ x^a y^b over the reference triangle is a! b! / (a + b + 2)!
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    for degree in [2, 6, 10, 14] {
        let rule = triangle_rule(degree)?;
        let mut worst: f64 = 0.0;
        for a in 0..=degree as u32 {
            for b in 0..=(degree as u32 - a) {
                let f = |x: [f64; 2]| x[0].powi(a as i32) * x[1].powi(b as i32);
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                worst = worst.max((integrate_triangle(&f, &tri, &rule, None)? - exact).abs());
            }
        }
        println!("degree {degree:>2}: {} points, max monomial error {worst:.2e}", rule.points.len());
    }

    // ∫ r^{-1/2} = (2/3) ∫_0^{π/2} R(φ)^{3/2} dφ with R(φ) = 1/(cos φ + sin φ)
    let (t, w) = gauss_legendre(40);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let exact: f64 = t
        .iter()
        .zip(&w)
        .map(|(t, w)| {
            let phi = half_pi * t;
            half_pi * w * (2.0 / 3.0) * (phi.cos() + phi.sin()).powf(-1.5)
        })
        .sum();
    let f = |x: [f64; 2]| (x[0] * x[0] + x[1] * x[1]).powf(-0.25);
    let rule = triangle_rule(8)?;
    let plain = integrate_triangle(&f, &tri, &rule, None)?;
    let graded = integrate_triangle(&f, &tri, &rule, Some([0.0, 0.0]))?;
    println!("r^(-1/2): exact {exact:.12}, plain error {:.2e}, graded error {:.2e}", plain - exact, graded - exact);
    Ok(())
}
