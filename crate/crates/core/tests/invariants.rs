//! Randomized invariants of meshes, quadrature, local fits and trees.

use gradfit::local_approx::{default_rule, epsilon, fit_on_triangle, TargetFunction};
use gradfit::mesh::builtin;
use gradfit::quadrature::{gauss_legendre, integrate_triangle, triangle_rule};
use gradfit::registry::lookup;
use gradfit::tree::{child_eta, tree_threshold, TreeOptions};
use proptest::prelude::*;

fn triangle() -> impl Strategy<Value = [[f64; 2]; 3]> {
    prop::array::uniform3(prop::array::uniform2(-2.0..2.0f64)).prop_filter("non-degenerate", |t| {
        let a = (t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1]);
        let l = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]);
        let h = l(t[0], t[1]).max(l(t[1], t[2])).max(l(t[0], t[2]));
        a.abs() > 0.05 * h * h
    })
}

/// Collapsed Gauss product rule on the triangle, exact for degree < 2n − 1.
fn duffy(f: &dyn Fn([f64; 2]) -> f64, t: &[[f64; 2]; 3], n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let det = ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1])).abs();
    let mut s = 0.0;
    for (u, wu) in x.iter().zip(&w) {
        for (v, wv) in x.iter().zip(&w) {
            let (a, b) = (*u, (1.0 - u) * v);
            let p = [
                t[0][0] + a * (t[1][0] - t[0][0]) + b * (t[2][0] - t[0][0]),
                t[0][1] + a * (t[1][1] - t[0][1]) + b * (t[2][1] - t[0][1]),
            ];
            s += wu * wv * (1.0 - u) * f(p);
        }
    }
    s * det
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rules_are_exact_to_their_degree(t in triangle(), degree in 1usize..=12, c in prop::collection::vec(-1.0..1.0f64, 91)) {
        let f = |x: [f64; 2]| {
            let mut s = 0.0;
            let mut idx = 0;
            for a in 0..=degree {
                for b in 0..=(degree - a) {
                    s += c[idx] * x[0].powi(a as i32) * x[1].powi(b as i32);
                    idx += 1;
                }
            }
            s
        };
        let rule = triangle_rule(degree).unwrap();
        let q = integrate_triangle(&f, &t, &rule, None).unwrap();
        let exact = duffy(&f, &t, degree + 2);
        let scale = duffy(&|x| f(x).abs(), &t, 20).max(1.0);
        prop_assert!((q - exact).abs() <= 1e-11 * scale, "{} vs {}", q, exact);
    }

    #[test]
    fn bisection_preserves_area_and_completion_conforms(choices in prop::collection::vec(0usize..1000, 1..60)) {
        let mut mesh = builtin::l_shape();
        let area = mesh.total_area();
        let shape0 = {
            let mut m = builtin::l_shape();
            m.refine_uniform(8).unwrap();
            m.max_shape_coefficient()
        };
        for c in choices {
            let ids = mesh.active_ids();
            mesh.bisect(ids[c % ids.len()]).unwrap();
        }
        prop_assert!((mesh.total_area() - area).abs() < 1e-12);
        let done = mesh.completed().unwrap();
        prop_assert!(done.is_conforming());
        prop_assert!(done.active_count() >= mesh.active_count());
        prop_assert!(done.max_shape_coefficient() <= shape0 * (1.0 + 1e-9));
    }

    #[test]
    fn affine_targets_have_zero_local_error(t in triangle(), a in -3.0..3.0f64, b in -3.0..3.0f64, degree in 1usize..=4) {
        let v = TargetFunction::new("affine", move |x: [f64; 2]| a * x[0] + b * x[1] + 0.5, move |_| [a, b]);
        let fit = fit_on_triangle(&v, &t, degree, &default_rule(degree)).unwrap();
        prop_assert!(fit.e <= 1e-12 * (a.hypot(b) + 1.0));
    }

    #[test]
    fn local_error_decreases_with_degree(t in triangle(), name in prop::sample::select(vec!["sine", "atan_layer", "poly_bump"])) {
        let v = lookup(name).unwrap().function;
        // one point set for all degrees, so the nested minimizations compare exactly
        let rule = triangle_rule(12).unwrap();
        let grad = integrate_triangle(&|x| { let g = v.gradient(x); g[0] * g[0] + g[1] * g[1] }, &t, &rule, None)
            .unwrap()
            .sqrt();
        let floor = 1e-12 * grad;
        let mut last = f64::INFINITY;
        for degree in 1..=4 {
            let e = fit_on_triangle(&v, &t, degree, &rule).unwrap().e;
            prop_assert!(e <= last * (1.0 + 1e-10) + floor);
            last = e;
        }
    }

    #[test]
    fn child_eta_is_harmonic_and_bounded(eps in 0.0..10.0f64, parent in 0.0..10.0f64) {
        let eta = child_eta(eps, parent);
        prop_assert!(eta >= 0.0);
        prop_assert!(eta <= eps.min(parent) + 1e-15);
        if eps > 0.0 && parent > 0.0 {
            prop_assert!((1.0 / eta - (1.0 / eps + 1.0 / parent)).abs() <= 1e-9 * (1.0 / eta));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn threshold_leaves_cover_domain(exp in 1.0..3.5f64, degree in 1usize..=2) {
        let entry = lookup("poly_bump2").unwrap();
        let mesh0 = builtin::unit_square();
        let t = 10f64.powf(-exp);
        let run = tree_threshold(&entry.function, &mesh0, degree, t, &TreeOptions::default()).unwrap();
        let leaves = run.tree.leaf_elements();
        let area: f64 = leaves.iter().map(|&k| run.forest.area(k)).sum();
        prop_assert!((area - 1.0).abs() < 1e-12);
        prop_assert!(run.mesh.is_conforming());
        prop_assert!(run.mesh.active_count() >= leaves.len());
        prop_assert!(run.tree.recursion_defect() < 1e-12);
        // every leaf error sits below the parent's ε, and the completed mesh is no worse
        let on_mesh: f64 = run.mesh.active_ids().iter().map(|&k| epsilon(&entry.function, &run.mesh, k, degree).unwrap()).sum();
        prop_assert!(on_mesh <= run.tree.broken_error().powi(2) * (1.0 + 1e-9));
    }
}
