//! Conforming triangular meshes refined by newest-vertex bisection.
//!
//! Every element stores its vertices so that the refinement edge is
//! `(vertex_ids[0], vertex_ids[1])` and `vertex_ids[2]` is the newest vertex.
//! Bisected elements stay in the element list as inactive forest nodes, so an
//! element id is stable for the whole lifetime of a [`Mesh`].

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

pub type Point = [f64; 2];

/// Relative tolerance for geometric predicates, scaled by the local size.
const GEOM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("degenerate triangle {0} (zero area)")]
    Degenerate(usize),
    #[error("non-conforming input: vertex {vertex} lies inside an edge of triangle {element}")]
    NonConforming { element: usize, vertex: usize },
    #[error("triangle {element} references invalid vertex {vertex}")]
    InvalidVertex { element: usize, vertex: usize },
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    OverSharedEdge(usize, usize),
    #[error("element {0} is not active")]
    InactiveElement(usize),
    #[error("element {0} does not exist")]
    UnknownElement(usize),
    #[error("completion exceeded {0} bisections; the initial refinement edges are not admissible")]
    CompletionCap(usize),
    #[error("point ({0}, {1}) is outside the mesh")]
    PointOutside(f64, f64),
    #[error("mesh file: {0}")]
    Parse(String),
}

/// Order-independent key of an edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FaceKey(usize, usize);

impl FaceKey {
    pub fn new(a: usize, b: usize) -> Self {
        if a <= b {
            FaceKey(a, b)
        } else {
            FaceKey(b, a)
        }
    }

    pub fn vertices(self) -> (usize, usize) {
        (self.0, self.1)
    }

    pub fn contains(self, v: usize) -> bool {
        self.0 == v || self.1 == v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub vertex_ids: [usize; 3],
    pub generation: u32,
    pub active: bool,
    pub parent: Option<usize>,
    pub children: Option<[usize; 2]>,
}

impl Element {
    /// Edge key of local edge `i`, the edge opposite local vertex `i`.
    pub fn edge(&self, i: usize) -> FaceKey {
        let v = self.vertex_ids;
        FaceKey::new(v[(i + 1) % 3], v[(i + 2) % 3])
    }

    pub fn edges(&self) -> [FaceKey; 3] {
        [self.edge(0), self.edge(1), self.edge(2)]
    }

    pub fn refinement_edge(&self) -> FaceKey {
        self.edge(2)
    }

    pub fn has_vertex(&self, v: usize) -> bool {
        self.vertex_ids.contains(&v)
    }
}

/// Active elements on either side of an edge.
#[derive(Clone, Copy, Debug, Default)]
struct EdgeSlot([Option<usize>; 2]);

impl EdgeSlot {
    fn insert(&mut self, e: usize) {
        if self.0[0].is_none() {
            self.0[0] = Some(e);
        } else {
            debug_assert!(self.0[1].is_none(), "edge shared by more than two elements");
            self.0[1] = Some(e);
        }
    }

    fn remove(&mut self, e: usize) {
        for s in &mut self.0 {
            if *s == Some(e) {
                *s = None;
            }
        }
        if self.0[0].is_none() {
            self.0.swap(0, 1);
        }
    }

    fn other(&self, e: usize) -> Option<usize> {
        self.0.iter().flatten().copied().find(|&x| x != e)
    }

    fn is_empty(&self) -> bool {
        self.0[0].is_none() && self.0[1].is_none()
    }

    fn count(&self) -> usize {
        self.0.iter().flatten().count()
    }
}

/// Marker for [`Mesh::rollback`].
#[derive(Clone, Copy, Debug)]
pub struct Checkpoint {
    vertices: usize,
    elements: usize,
    midpoint_log: usize,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    elements: Vec<Element>,
    initial_count: usize,
    active_count: usize,
    midpoints: HashMap<FaceKey, usize>,
    midpoint_log: Vec<FaceKey>,
    edges: HashMap<FaceKey, EdgeSlot>,
}

pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

impl Mesh {
    /// Builds a mesh from coordinates and vertex triples, assigning refinement
    /// edges by the longest-edge rule (ties go to the smallest opposite vertex id).
    pub fn from_arrays(coords: &[Point], triangles: &[[usize; 3]]) -> Result<Self, MeshError> {
        Self::build(coords, triangles, None)
    }

    /// Like [`Mesh::from_arrays`] but with explicit refinement edges; `opposite[i]`
    /// is the local index of the vertex opposite the refinement edge of triangle `i`.
    pub fn from_arrays_with_refinement(
        coords: &[Point],
        triangles: &[[usize; 3]],
        opposite: &[usize],
    ) -> Result<Self, MeshError> {
        Self::build(coords, triangles, Some(opposite))
    }

    fn build(
        coords: &[Point],
        triangles: &[[usize; 3]],
        opposite: Option<&[usize]>,
    ) -> Result<Self, MeshError> {
        let mut elements = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= coords.len() {
                    return Err(MeshError::InvalidVertex { element: t, vertex: v });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::Degenerate(t));
            }
            let p = tri.map(|v| coords[v]);
            let area = signed_area(p[0], p[1], p[2]);
            let h = longest_edge(p);
            if area.abs() <= GEOM_TOL * h * h {
                return Err(MeshError::Degenerate(t));
            }
            let r = match opposite {
                Some(r) => {
                    let r = *r.get(t).ok_or_else(|| {
                        MeshError::Parse(format!("missing refinement index for triangle {t}"))
                    })?;
                    if r > 2 {
                        return Err(MeshError::Parse(format!("refinement index {r} out of range")));
                    }
                    r
                }
                None => longest_edge_opposite(tri, p),
            };
            let mut ids = [tri[(r + 1) % 3], tri[(r + 2) % 3], tri[r]];
            if area < 0.0 {
                ids.swap(0, 1);
            }
            elements.push(Element {
                vertex_ids: ids,
                generation: 0,
                active: true,
                parent: None,
                children: None,
            });
        }

        let mut mesh = Mesh {
            vertices: coords.to_vec(),
            initial_count: elements.len(),
            active_count: elements.len(),
            elements,
            midpoints: HashMap::new(),
            midpoint_log: Vec::new(),
            edges: HashMap::new(),
        };
        for e in 0..mesh.elements.len() {
            for key in mesh.elements[e].edges() {
                let slot = mesh.edges.entry(key).or_default();
                if slot.count() == 2 {
                    let (a, b) = key.vertices();
                    return Err(MeshError::OverSharedEdge(a, b));
                }
                slot.insert(e);
            }
        }
        mesh.check_vertex_conformity()?;
        Ok(mesh)
    }

    /// Detects vertices lying strictly inside an element edge, using a bucket grid.
    fn check_vertex_conformity(&self) -> Result<(), MeshError> {
        let used: BTreeSet<usize> = self.elements.iter().flat_map(|e| e.vertex_ids).collect();
        if used.is_empty() {
            return Ok(());
        }
        let (lo, hi) = bounding_box(used.iter().map(|&v| self.vertices[v]));
        let n = ((used.len() as f64).sqrt().ceil() as usize).max(1);
        let cell = [
            ((hi[0] - lo[0]) / n as f64).max(f64::MIN_POSITIVE),
            ((hi[1] - lo[1]) / n as f64).max(f64::MIN_POSITIVE),
        ];
        let index = |x: f64, d: usize| -> usize {
            (((x - lo[d]) / cell[d]).floor().max(0.0) as usize).min(n - 1)
        };
        let mut grid: Vec<Vec<usize>> = vec![Vec::new(); n * n];
        for &v in &used {
            let p = self.vertices[v];
            grid[index(p[0], 0) * n + index(p[1], 1)].push(v);
        }
        for (e, el) in self.elements.iter().enumerate() {
            for key in el.edges() {
                let (a, b) = key.vertices();
                let (pa, pb) = (self.vertices[a], self.vertices[b]);
                let len = distance(pa, pb);
                let (i0, i1) = (index(pa[0].min(pb[0]), 0), index(pa[0].max(pb[0]), 0));
                let (j0, j1) = (index(pa[1].min(pb[1]), 1), index(pa[1].max(pb[1]), 1));
                for i in i0..=i1 {
                    for j in j0..=j1 {
                        for &w in &grid[i * n + j] {
                            if w != a && w != b && strictly_inside(pa, pb, self.vertices[w], len) {
                                return Err(MeshError::NonConforming { element: e, vertex: w });
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn element(&self, id: usize) -> &Element {
        &self.elements[id]
    }

    /// Number of elements of the initial mesh, `#M₀`.
    pub fn initial_count(&self) -> usize {
        self.initial_count
    }

    pub fn active_count(&self) -> usize {
        self.active_count
    }

    pub fn active_ids(&self) -> Vec<usize> {
        self.elements
            .iter()
            .enumerate()
            .filter(|(_, e)| e.active)
            .map(|(i, _)| i)
            .collect()
    }

    /// Vertex coordinates of an element in its stored order.
    pub fn corners(&self, id: usize) -> [Point; 3] {
        self.elements[id].vertex_ids.map(|v| self.vertices[v])
    }

    pub fn area(&self, id: usize) -> f64 {
        let [a, b, c] = self.corners(id);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        self.active_ids().iter().map(|&k| self.area(k)).sum()
    }

    /// Bisects an active element at the midpoint of its refinement edge.
    ///
    /// The mesh may be non-conforming afterwards.
    pub fn bisect(&mut self, id: usize) -> Result<(usize, usize), MeshError> {
        let el = self.elements.get(id).ok_or(MeshError::UnknownElement(id))?;
        if !el.active {
            return Err(MeshError::InactiveElement(id));
        }
        let [a, b, c] = el.vertex_ids;
        let generation = el.generation + 1;
        let key = FaceKey::new(a, b);
        let m = match self.midpoints.get(&key) {
            Some(&m) => m,
            None => {
                let (pa, pb) = (self.vertices[key.0], self.vertices[key.1]);
                self.vertices.push(midpoint(pa, pb));
                let m = self.vertices.len() - 1;
                self.midpoints.insert(key, m);
                self.midpoint_log.push(key);
                m
            }
        };
        let c1 = self.elements.len();
        let c2 = c1 + 1;
        for verts in [[c, a, m], [b, c, m]] {
            self.elements.push(Element {
                vertex_ids: verts,
                generation,
                active: true,
                parent: Some(id),
                children: None,
            });
        }
        self.unlink(id);
        self.elements[id].active = false;
        self.elements[id].children = Some([c1, c2]);
        self.link(c1);
        self.link(c2);
        self.active_count += 1;
        Ok((c1, c2))
    }

    /// Children of `id`, bisecting it first if it is still a leaf.
    pub fn children_or_bisect(&mut self, id: usize) -> Result<[usize; 2], MeshError> {
        match self.elements.get(id).ok_or(MeshError::UnknownElement(id))?.children {
            Some(ch) => Ok(ch),
            None => self.bisect(id).map(|(a, b)| [a, b]),
        }
    }

    fn link(&mut self, e: usize) {
        for key in self.elements[e].edges() {
            self.edges.entry(key).or_default().insert(e);
        }
    }

    fn unlink(&mut self, e: usize) {
        for key in self.elements[e].edges() {
            if let Some(slot) = self.edges.get_mut(&key) {
                slot.remove(e);
                if slot.is_empty() {
                    self.edges.remove(&key);
                }
            }
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            vertices: self.vertices.len(),
            elements: self.elements.len(),
            midpoint_log: self.midpoint_log.len(),
        }
    }

    /// Undoes every bisection performed since `cp`.
    pub fn rollback(&mut self, cp: Checkpoint) {
        while self.elements.len() > cp.elements {
            let c2 = self.elements.len() - 1;
            let c1 = c2 - 1;
            let parent = self.elements[c2].parent.expect("bisection child without parent");
            debug_assert!(self.elements[c1].active && self.elements[c2].active);
            self.unlink(c1);
            self.unlink(c2);
            self.elements.truncate(c1);
            let p = &mut self.elements[parent];
            p.active = true;
            p.children = None;
            self.link(parent);
            self.active_count -= 1;
        }
        for key in self.midpoint_log.drain(cp.midpoint_log..) {
            self.midpoints.remove(&key);
        }
        self.vertices.truncate(cp.vertices);
    }

    /// Whether an active element carries a hanging vertex on one of its edges.
    pub fn has_hanging_vertex(&self, id: usize) -> bool {
        self.elements[id].edges().iter().any(|k| self.midpoints.contains_key(k))
    }

    pub fn is_conforming(&self) -> bool {
        self.elements
            .iter()
            .enumerate()
            .all(|(i, e)| !e.active || !self.has_hanging_vertex(i))
    }

    /// Refines in place to the smallest conforming refinement; returns the number
    /// of bisections performed.
    pub fn complete(&mut self) -> Result<usize, MeshError> {
        let seeds = self.active_ids();
        self.close_from(seeds)
    }

    /// Completed copy of the mesh.
    pub fn completed(&self) -> Result<Mesh, MeshError> {
        let mut m = self.clone();
        m.complete()?;
        Ok(m)
    }

    /// Hanging-vertex closure restricted to the given seed elements and
    /// everything their bisection touches.
    pub fn close_from(&mut self, seeds: Vec<usize>) -> Result<usize, MeshError> {
        let cap = 64 * (self.active_count + self.initial_count) + 1024;
        let mut queue = seeds;
        let mut count = 0;
        while let Some(k) = queue.pop() {
            if !self.elements[k].active || !self.has_hanging_vertex(k) {
                continue;
            }
            if count >= cap {
                return Err(MeshError::CompletionCap(cap));
            }
            let refinement = self.elements[k].refinement_edge();
            let (c1, c2) = self.bisect(k)?;
            count += 1;
            queue.push(c1);
            queue.push(c2);
            if let Some(n) = self.edges.get(&refinement).and_then(|s| s.other(usize::MAX)) {
                queue.push(n);
            }
        }
        Ok(count)
    }

    /// Bisects an element of a conforming mesh and restores conformity.
    pub fn refine_conforming(&mut self, id: usize) -> Result<usize, MeshError> {
        let refinement = self.elements.get(id).ok_or(MeshError::UnknownElement(id))?.refinement_edge();
        let (c1, c2) = self.bisect(id)?;
        let mut seeds = vec![c1, c2];
        if let Some(slot) = self.edges.get(&refinement) {
            seeds.extend(slot.0.iter().flatten());
        }
        Ok(1 + self.close_from(seeds)?)
    }

    /// Bisects every active element `levels` times, completing after each round.
    pub fn refine_uniform(&mut self, levels: usize) -> Result<(), MeshError> {
        for _ in 0..levels {
            for id in self.active_ids() {
                self.bisect(id)?;
            }
            self.complete()?;
        }
        Ok(())
    }

    /// Active neighbor across an edge of an active element.
    pub fn neighbor(&self, id: usize, edge: FaceKey) -> Option<usize> {
        self.edges.get(&edge).and_then(|s| s.other(id))
    }

    /// Edges of the active mesh carried by exactly one element.
    pub fn is_boundary_edge(&self, edge: FaceKey) -> bool {
        self.edges.get(&edge).is_some_and(|s| s.count() == 1)
    }

    /// Active elements around every vertex, in increasing element id.
    pub fn vertex_stars(&self) -> Vec<Vec<usize>> {
        let mut stars = vec![Vec::new(); self.vertices.len()];
        for (i, e) in self.elements.iter().enumerate() {
            if e.active {
                for v in e.vertex_ids {
                    stars[v].push(i);
                }
            }
        }
        stars
    }

    /// All active elements whose closure contains `z`.
    pub fn star(&self, z: Point) -> Result<Vec<usize>, MeshError> {
        let found: Vec<usize> = self
            .active_ids()
            .into_iter()
            .filter(|&k| self.contains_point(k, z))
            .collect();
        if found.is_empty() {
            Err(MeshError::PointOutside(z[0], z[1]))
        } else {
            Ok(found)
        }
    }

    /// Active elements sharing at least a vertex with `id` (conforming meshes).
    pub fn patch(&self, id: usize) -> Result<Vec<usize>, MeshError> {
        let el = self.elements.get(id).ok_or(MeshError::UnknownElement(id))?;
        if !el.active {
            return Err(MeshError::InactiveElement(id));
        }
        let verts = el.vertex_ids;
        Ok(self
            .elements
            .iter()
            .enumerate()
            .filter(|(_, e)| e.active && e.vertex_ids.iter().any(|v| verts.contains(v)))
            .map(|(i, _)| i)
            .collect())
    }

    /// Closed-element point test with tolerance relative to the element size.
    pub fn contains_point(&self, id: usize, z: Point) -> bool {
        let lam = self.barycentric(id, z);
        lam.iter().all(|&l| l >= -GEOM_TOL * 10.0)
    }

    pub fn barycentric(&self, id: usize, z: Point) -> [f64; 3] {
        let [a, b, c] = self.corners(id);
        let area = signed_area(a, b, c);
        [
            signed_area(z, b, c) / area,
            signed_area(a, z, c) / area,
            signed_area(a, b, z) / area,
        ]
    }

    /// Whether the elements around `z` are connected through full edges containing `z`.
    pub fn is_star_face_connected(&self, z: Point) -> Result<bool, MeshError> {
        let star = self.star(z)?;
        Ok(self.face_connected(&star, z))
    }

    /// Face connectivity of a given star of `z`.
    pub fn face_connected(&self, star: &[usize], z: Point) -> bool {
        if star.len() <= 1 {
            return true;
        }
        let shared_edge_through_z = |p: usize, q: usize| {
            let ep = self.elements[p].edges();
            let eq = self.elements[q].edges();
            ep.iter().any(|k| eq.contains(k) && self.edge_contains_point(*k, z))
        };
        let mut seen = vec![false; star.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..star.len() {
                if !seen[j] && shared_edge_through_z(star[i], star[j]) {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// Closed-segment point test.
    pub fn edge_contains_point(&self, edge: FaceKey, z: Point) -> bool {
        let (a, b) = edge.vertices();
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let len = distance(pa, pb);
        let tol = GEOM_TOL * len.max(1e-300) * 10.0;
        if distance(pa, z) <= tol || distance(pb, z) <= tol {
            return true;
        }
        strictly_inside(pa, pb, z, len)
    }

    /// Diameter, incircle diameter and their ratio.
    pub fn shape_metrics(&self, id: usize) -> (f64, f64, f64) {
        let p = self.corners(id);
        let h = longest_edge(p);
        let perimeter = distance(p[0], p[1]) + distance(p[1], p[2]) + distance(p[2], p[0]);
        let rho = 4.0 * signed_area(p[0], p[1], p[2]).abs() / perimeter;
        (h, rho, h / rho)
    }

    pub fn max_shape_coefficient(&self) -> f64 {
        self.active_ids()
            .iter()
            .map(|&k| self.shape_metrics(k).2)
            .fold(0.0, f64::max)
    }

    pub fn max_diameter(&self) -> f64 {
        self.active_ids()
            .iter()
            .map(|&k| self.shape_metrics(k).0)
            .fold(0.0, f64::max)
    }

    /// Mesh text format, active elements only, 17 significant digits.
    pub fn to_text(&self) -> String {
        let active = self.active_ids();
        let mut out = String::from("gradfit-mesh v1 dim=2\n");
        let _ = writeln!(out, "vertices {}", self.vertices.len());
        for p in &self.vertices {
            let _ = writeln!(out, "{:.16e} {:.16e}", p[0], p[1]);
        }
        let _ = writeln!(out, "elements {}", active.len());
        for k in active {
            let [i, j, l] = self.elements[k].vertex_ids;
            let _ = writeln!(out, "{i} {j} {l} 2");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Mesh, MeshError> {
        let parse_err = |m: &str| MeshError::Parse(m.to_string());
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some("gradfit-mesh v1 dim=2") {
            return Err(parse_err("bad header"));
        }
        let count = |line: Option<&str>, tag: &str| -> Result<usize, MeshError> {
            let line = line.ok_or_else(|| parse_err("unexpected end of file"))?;
            let rest = line
                .strip_prefix(tag)
                .ok_or_else(|| MeshError::Parse(format!("expected '{tag}'")))?;
            rest.trim().parse().map_err(|_| MeshError::Parse(format!("bad count in '{line}'")))
        };
        let nv = count(lines.next(), "vertices")?;
        let mut coords = Vec::with_capacity(nv);
        for _ in 0..nv {
            let line = lines.next().ok_or_else(|| parse_err("missing vertex line"))?;
            let xs: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| MeshError::Parse(format!("bad vertex '{line}'")))?;
            if xs.len() != 2 {
                return Err(MeshError::Parse(format!("bad vertex '{line}'")));
            }
            coords.push([xs[0], xs[1]]);
        }
        let ne = count(lines.next(), "elements")?;
        let mut tris = Vec::with_capacity(ne);
        let mut opposite = Vec::with_capacity(ne);
        for _ in 0..ne {
            let line = lines.next().ok_or_else(|| parse_err("missing element line"))?;
            let ids: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|_| MeshError::Parse(format!("bad element '{line}'")))?;
            if ids.len() != 4 {
                return Err(MeshError::Parse(format!("bad element '{line}'")));
            }
            tris.push([ids[0], ids[1], ids[2]]);
            opposite.push(ids[3]);
        }
        Mesh::from_arrays_with_refinement(&coords, &tris, &opposite)
    }
}

fn longest_edge(p: [Point; 3]) -> f64 {
    distance(p[0], p[1]).max(distance(p[1], p[2])).max(distance(p[2], p[0]))
}

/// Local index of the vertex opposite the refinement edge chosen by the
/// longest-edge rule.
fn longest_edge_opposite(tri: &[usize; 3], p: [Point; 3]) -> usize {
    let len = |i: usize| distance(p[(i + 1) % 3], p[(i + 2) % 3]);
    let h = longest_edge(p);
    (0..3)
        .filter(|&i| len(i) >= h * (1.0 - GEOM_TOL))
        .min_by_key(|&i| tri[i])
        .expect("a longest edge exists")
}

fn strictly_inside(pa: Point, pb: Point, w: Point, len: f64) -> bool {
    let d = [pb[0] - pa[0], pb[1] - pa[1]];
    let r = [w[0] - pa[0], w[1] - pa[1]];
    let cross = d[0] * r[1] - d[1] * r[0];
    if cross.abs() > GEOM_TOL * len * len * 10.0 {
        return false;
    }
    let t = (d[0] * r[0] + d[1] * r[1]) / (len * len);
    t > GEOM_TOL * 10.0 && t < 1.0 - GEOM_TOL * 10.0
}

fn bounding_box(points: impl Iterator<Item = Point>) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    (lo, hi)
}

/// Built-in initial meshes.
pub mod builtin {
    use super::{Mesh, Point};

    /// Unit square split along the diagonal from (0,0) to (1,1).
    pub fn unit_square() -> Mesh {
        let coords: [Point; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        Mesh::from_arrays(&coords, &[[0, 1, 2], [0, 2, 3]]).expect("valid unit square")
    }

    /// Uniform unit-square mesh with `2^(level+1)` triangles.
    pub fn unit_square_level(level: usize) -> Mesh {
        let mut m = unit_square();
        m.refine_uniform(level).expect("unit square is admissible");
        m
    }

    /// `(-1,1)^2 \ [0,1)x(-1,0]` as six triangles whose refinement edges all
    /// contain the reentrant corner.
    pub fn l_shape() -> Mesh {
        let coords: [Point; 8] = [
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
            [-1.0, 1.0],
            [-1.0, 0.0],
            [-1.0, -1.0],
            [0.0, -1.0],
        ];
        let tris = [[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 5], [0, 5, 6], [0, 6, 7]];
        Mesh::from_arrays(&coords, &tris).expect("valid L-shape")
    }

    pub fn reference_triangle() -> Mesh {
        let coords: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        Mesh::from_arrays(&coords, &[[0, 1, 2]]).expect("valid reference triangle")
    }
}
