//! Mesh completion against a geometric brute-force check: no vertex of any
//! active triangle may lie inside an edge of another.

use gradfit::mesh::{builtin, Mesh, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn inside_edge(p: Point, a: Point, b: Point) -> bool {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let cross = (p[0] - a[0]) * dy - (p[1] - a[1]) * dx;
    let t = ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2;
    cross.abs() <= 1e-12 * len2 && t > 1e-9 && t < 1.0 - 1e-9
}

fn geometrically_conforming(mesh: &Mesh) -> bool {
    let tris: Vec<[Point; 3]> = mesh.active_ids().iter().map(|&k| mesh.corners(k)).collect();
    let points: Vec<Point> = tris.iter().flatten().copied().collect();
    tris.iter().all(|t| (0..3).all(|i| points.iter().all(|&p| !inside_edge(p, t[i], t[(i + 1) % 3]))))
}

fn centroid(t: &[Point; 3]) -> Point {
    [(t[0][0] + t[1][0] + t[2][0]) / 3.0, (t[0][1] + t[1][1] + t[2][1]) / 3.0]
}

fn contains(t: &[Point; 3], p: Point) -> bool {
    let s = |a: Point, b: Point, c: Point| (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let d = s(t[0], t[1], t[2]);
    [s(p, t[1], t[2]), s(t[0], p, t[2]), s(t[0], t[1], p)].iter().all(|x| x / d >= -1e-12)
}

fn random_bisections(mesh: &mut Mesh, n: usize, rng: &mut ChaCha8Rng) {
    for _ in 0..n {
        let ids = mesh.active_ids();
        mesh.bisect(ids[rng.gen_range(0..ids.len())]).unwrap();
    }
}

#[test]
fn completion_matches_geometric_conformity() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mesh = if seed % 2 == 0 { builtin::unit_square() } else { builtin::l_shape() };
        random_bisections(&mut mesh, 5 + seed as usize * 3, &mut rng);
        assert_eq!(mesh.is_conforming(), geometrically_conforming(&mesh), "seed {seed}");

        let done = mesh.completed().unwrap();
        assert!(geometrically_conforming(&done), "seed {seed}");
        assert!(done.is_conforming());
        assert!((done.total_area() - mesh.total_area()).abs() < 1e-12);

        // a refinement: every completed triangle sits inside one active triangle
        let before: Vec<[Point; 3]> = mesh.active_ids().iter().map(|&k| mesh.corners(k)).collect();
        for k in done.active_ids() {
            let t = done.corners(k);
            let c = centroid(&t);
            let owners: Vec<_> = before.iter().filter(|b| contains(b, c)).collect();
            assert_eq!(owners.len(), 1, "seed {seed}, element {k}");
            assert!(t.iter().all(|&p| contains(owners[0], p)));
        }
    }
}

#[test]
fn completion_is_idempotent_and_identity_on_conforming() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut mesh = builtin::unit_square();
    random_bisections(&mut mesh, 40, &mut rng);
    let once = mesh.completed().unwrap();
    let twice = once.completed().unwrap();
    assert_eq!(once.active_ids(), twice.active_ids());
    assert_eq!(once.vertices().len(), twice.vertices().len());
}

#[test]
fn single_bisection_of_interior_edge_needs_the_neighbour() {
    let mut mesh = builtin::unit_square();
    mesh.bisect(0).unwrap();
    assert!(!geometrically_conforming(&mesh));
    let done = mesh.completed().unwrap();
    assert_eq!(done.active_count(), 4);
}
