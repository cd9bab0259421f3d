//! Named target functions with their reference energies and seminorms.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::global_approx::BoundaryCondition;
use crate::local_approx::{element_points, LocalError, TargetFunction};
use crate::mesh::{builtin, Mesh, Point};
use crate::quadrature::triangle_rule;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistryError {
    #[error("unknown function '{name}' (known: {known})")]
    UnknownFunction { name: String, known: String },
    #[error(transparent)]
    Gradient(#[from] LocalError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    UnitSquare,
    LShape,
}

impl Domain {
    pub fn initial_mesh(self) -> Mesh {
        match self {
            Domain::UnitSquare => builtin::unit_square(),
            Domain::LShape => builtin::l_shape(),
        }
    }
}

/// A registered target.
#[derive(Clone, Debug)]
pub struct RegistryEntry {
    pub name: &'static str,
    pub function: TargetFunction,
    pub domain: Domain,
    /// `(s, |v|²_{s,2;Ω})` where known; order 1 is the energy.
    pub seminorms: Vec<(usize, f64)>,
    pub dirichlet0: bool,
    pub neumann: bool,
    /// Reference values come from quadrature rather than closed forms.
    pub numerical_reference: bool,
}

impl RegistryEntry {
    pub fn supports(&self, bc: BoundaryCondition) -> bool {
        match bc {
            BoundaryCondition::Dirichlet0 => self.dirichlet0,
            BoundaryCondition::Neumann => self.neumann,
        }
    }

    pub fn default_bc(&self) -> BoundaryCondition {
        if self.dirichlet0 {
            BoundaryCondition::Dirichlet0
        } else {
            BoundaryCondition::Neumann
        }
    }

    pub fn seminorm_sq(&self, s: usize) -> Option<f64> {
        self.seminorms.iter().find(|(o, _)| *o == s).map(|(_, v)| *v)
    }
}

const NAMES: [&str; 11] = [
    "sine", "poly_0", "poly_1", "poly_2", "poly_3", "poly_4", "x2", "lshape", "atan_layer", "poly_bump",
    "poly_bump2",
];

pub fn names() -> &'static [&'static str] {
    &NAMES
}

/// All entries, each gradient-checked.
pub fn registry() -> Result<Vec<RegistryEntry>, RegistryError> {
    NAMES.iter().map(|n| lookup(n)).collect()
}

pub fn lookup(name: &str) -> Result<RegistryEntry, RegistryError> {
    let entry = match name {
        "sine" => sine(),
        "x2" => polynomial_entry("x2", Poly2::new(vec![((2, 0), 1.0)])),
        "lshape" => lshape(),
        "atan_layer" => atan_layer(),
        "poly_bump" => poly_bump("poly_bump", Poly2::new(vec![((2, 0), 1.0)]), [0.3, 0.6], 20.0),
        "poly_bump2" => poly_bump(
            "poly_bump2",
            Poly2::new(vec![((1, 1), 1.0), ((0, 1), -0.5)]),
            [0.75, 0.25],
            40.0,
        ),
        _ => match name.strip_prefix("poly_").and_then(|k| k.parse::<u32>().ok()) {
            Some(k) if k <= 4 => polynomial_entry(NAMES[1 + k as usize], poly_member(k)),
            _ => {
                return Err(RegistryError::UnknownFunction { name: name.to_string(), known: NAMES.join(", ") })
            }
        },
    };
    let mut mesh = entry.domain.initial_mesh();
    mesh.refine_uniform(4).expect("builtin meshes refine");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    entry.function.check_gradient(&mesh, 64, &mut rng)?;
    Ok(entry)
}

/// Bivariate polynomial `Σ c x^a y^b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly2 {
    terms: Vec<((u32, u32), f64)>,
}

impl Poly2 {
    pub fn new(terms: Vec<((u32, u32), f64)>) -> Self {
        Poly2 { terms: terms.into_iter().filter(|t| t.1 != 0.0).collect() }
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|((a, b), _)| a + b).max().unwrap_or(0)
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.terms.iter().map(|&((a, b), c)| c * x[0].powi(a as i32) * x[1].powi(b as i32)).sum()
    }

    /// `∂^(i,j)`.
    pub fn derivative(&self, i: u32, j: u32) -> Poly2 {
        let falling = |n: u32, k: u32| (0..k).map(|m| (n - m) as f64).product::<f64>();
        Poly2::new(
            self.terms
                .iter()
                .filter(|((a, b), _)| *a >= i && *b >= j)
                .map(|&((a, b), c)| ((a - i, b - j), c * falling(a, i) * falling(b, j)))
                .collect(),
        )
    }

    pub fn mul(&self, other: &Poly2) -> Poly2 {
        let mut terms = Vec::new();
        for &((a, b), c) in &self.terms {
            for &((p, q), d) in &other.terms {
                terms.push(((a + p, b + q), c * d));
            }
        }
        Poly2::new(terms)
    }

    /// `∫_{[0,1]²}`, exact.
    pub fn integral_unit_square(&self) -> f64 {
        self.terms.iter().map(|&((a, b), c)| c / ((a + 1) as f64 * (b + 1) as f64)).sum()
    }

    /// `Σ_{|α|=s} ∥∂^α p∥²` over the unit square.
    pub fn seminorm_sq_unit_square(&self, s: u32) -> f64 {
        (0..=s)
            .map(|j| {
                let d = self.derivative(s - j, j);
                d.mul(&d).integral_unit_square()
            })
            .sum()
    }
}

fn polynomial_target(name: &str, p: Poly2) -> TargetFunction {
    let gx = p.derivative(1, 0);
    let gy = p.derivative(0, 1);
    let max_order = p.degree() as usize + 2;
    let pv = p.clone();
    let pd = p;
    TargetFunction::new(name, move |x| pv.eval(x), move |x| [gx.eval(x), gy.eval(x)]).with_derivatives(
        max_order,
        move |x, s| (0..=s as u32).map(|j| pd.derivative(s as u32 - j, j).eval(x)).collect(),
    )
}

/// Fixed element of `P_k` using every monomial of degree `≤ k` (a constant for `k = 0`).
pub fn poly_member(k: u32) -> Poly2 {
    let mut terms = Vec::new();
    for a in 0..=k {
        for b in 0..=(k - a) {
            let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
            terms.push(((a, b), sign / (1 + a + 2 * b) as f64));
        }
    }
    Poly2::new(terms)
}

fn polynomial_entry(name: &'static str, p: Poly2) -> RegistryEntry {
    let seminorms = (1..=p.degree() + 2).map(|s| (s as usize, p.seminorm_sq_unit_square(s))).collect::<Vec<_>>();
    let energy = seminorms[0].1;
    RegistryEntry {
        name,
        function: polynomial_target(name, p).with_exact_energy(energy),
        domain: Domain::UnitSquare,
        seminorms,
        dirichlet0: false,
        neumann: true,
        numerical_reference: false,
    }
}

/// Closed-form seminorms are tabulated up to this order.
const SINE_ORDERS: usize = 8;

fn sine() -> RegistryEntry {
    let f = TargetFunction::new(
        "sine",
        |x| (PI * x[0]).sin() * (PI * x[1]).sin(),
        |x| [PI * (PI * x[0]).cos() * (PI * x[1]).sin(), PI * (PI * x[0]).sin() * (PI * x[1]).cos()],
    )
    .with_derivatives(SINE_ORDERS, |x, s| {
        // ∂^(a,b) = π^(a+b) sin(πx + aπ/2) sin(πy + bπ/2)
        (0..=s)
            .map(|b| {
                let a = s - b;
                PI.powi(s as i32)
                    * (PI * x[0] + a as f64 * PI / 2.0).sin()
                    * (PI * x[1] + b as f64 * PI / 2.0).sin()
            })
            .collect()
    })
    .with_exact_energy(PI * PI / 2.0)
    .vanishing_on_boundary();
    let seminorms = (1..=SINE_ORDERS).map(|s| (s, (s + 1) as f64 * PI.powi(2 * s as i32) / 4.0)).collect();
    RegistryEntry {
        name: "sine",
        function: f,
        domain: Domain::UnitSquare,
        seminorms,
        dirichlet0: true,
        neumann: true,
        numerical_reference: false,
    }
}

/// Polar angle in `[0, 2π)`.
fn angle(x: Point) -> f64 {
    let t = x[1].atan2(x[0]);
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

fn lshape() -> RegistryEntry {
    let f = TargetFunction::new(
        "lshape",
        |x| {
            let r = x[0].hypot(x[1]);
            r.powf(2.0 / 3.0) * (2.0 * angle(x) / 3.0).sin()
        },
        |x| {
            let r = x[0].hypot(x[1]);
            if r == 0.0 {
                return [0.0, 0.0];
            }
            let t = angle(x) / 3.0;
            let s = 2.0 / 3.0 * r.powf(-1.0 / 3.0);
            [-s * t.sin(), s * t.cos()]
        },
    )
    .with_singular_points(vec![[0.0, 0.0]])
    .with_exact_energy(lshape_energy());
    RegistryEntry {
        name: "lshape",
        function: f,
        domain: Domain::LShape,
        seminorms: vec![(1, lshape_energy())],
        dirichlet0: false,
        neumann: true,
        numerical_reference: true,
    }
}

/// `∥∇v∥² = 2 ∫_0^{π/4} sec^{4/3} φ dφ` (six wedges reaching the square's boundary).
fn lshape_energy() -> f64 {
    let (x, w) = crate::quadrature::gauss_legendre(40);
    2.0 * x.iter().zip(&w).map(|(t, w)| w * (PI / 4.0) * (t * PI / 4.0).cos().powf(-4.0 / 3.0)).sum::<f64>()
}

const LAYER: f64 = 100.0;
const LAYER_ORDERS: usize = 6;

fn atan_layer() -> RegistryEntry {
    let f = TargetFunction::new(
        "atan_layer",
        |x| (LAYER * (x[0] + x[1] - 1.0)).atan(),
        |x| {
            let u = LAYER * (x[0] + x[1] - 1.0);
            let g = LAYER / (1.0 + u * u);
            [g, g]
        },
    )
    .with_derivatives(LAYER_ORDERS, |x, s| {
        let u = LAYER * (x[0] + x[1] - 1.0);
        let d = if s == 0 {
            u.atan()
        } else {
            // d^n/du^n (1+u²)^{-1} = (−1)^n n! sin((n+1) acot u) / (1+u²)^{(n+1)/2}
            let n = s - 1;
            let fact: f64 = (1..=n).map(|k| k as f64).product();
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let acot = 1f64.atan2(u);
            LAYER.powi(s as i32) * sign * fact * ((n + 1) as f64 * acot).sin()
                / (1.0 + u * u).powf((n + 1) as f64 / 2.0)
        };
        vec![d; s + 1]
    });
    // ∥∇v∥² = 4a ∫_0^a (1 − u/a)/(1+u²)² du
    let a = LAYER;
    let first = a / (2.0 * (1.0 + a * a)) + a.atan() / 2.0;
    let second = 0.5 - 1.0 / (2.0 * (1.0 + a * a));
    let energy = 4.0 * a * (first - second / a);
    RegistryEntry {
        name: "atan_layer",
        function: f.with_exact_energy(energy),
        domain: Domain::UnitSquare,
        seminorms: vec![(1, energy)],
        dirichlet0: false,
        neumann: true,
        numerical_reference: false,
    }
}

/// Physicists' Hermite polynomial `H_n(u)`.
fn hermite(n: usize, u: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * u);
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let h2 = 2.0 * u * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// `∂^n exp(−k(x−c)²)` in one variable.
fn gaussian_derivative(n: usize, k: f64, t: f64) -> f64 {
    let sk = k.sqrt();
    (-sk).powi(n as i32) * hermite(n, sk * t) * (-k * t * t).exp()
}

const BUMP_ORDERS: usize = 6;

fn poly_bump(name: &'static str, p: Poly2, c: Point, k: f64) -> RegistryEntry {
    let value = {
        let p = p.clone();
        move |x: Point| p.eval(x) + (-k * ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2))).exp()
    };
    let (gx, gy) = (p.derivative(1, 0), p.derivative(0, 1));
    let gradient = move |x: Point| {
        let e = (-k * ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2))).exp();
        [gx.eval(x) - 2.0 * k * (x[0] - c[0]) * e, gy.eval(x) - 2.0 * k * (x[1] - c[1]) * e]
    };
    let pd = p;
    let f = TargetFunction::new(name, value, gradient).with_derivatives(BUMP_ORDERS, move |x, s| {
        (0..=s)
            .map(|j| {
                let i = s - j;
                pd.derivative(i as u32, j as u32).eval(x)
                    + gaussian_derivative(i, k, x[0] - c[0]) * gaussian_derivative(j, k, x[1] - c[1])
            })
            .collect()
    });
    let seminorms = numerical_seminorms(&f, &[1, 2, 3]);
    RegistryEntry {
        name,
        function: f.with_exact_energy(seminorms[0].1),
        domain: Domain::UnitSquare,
        seminorms,
        dirichlet0: false,
        neumann: true,
        numerical_reference: true,
    }
}

/// High-order quadrature on a fixed fine unit-square mesh.
fn numerical_seminorms(f: &TargetFunction, orders: &[usize]) -> Vec<(usize, f64)> {
    let mesh = builtin::unit_square_level(8);
    let rule = triangle_rule(20).expect("tabulated");
    let points: Vec<(Point, f64)> =
        mesh.active_ids().into_iter().flat_map(|k| element_points(f, &mesh.corners(k), &rule)).collect();
    orders
        .iter()
        .map(|&s| {
            let total = points
                .iter()
                .map(|&(x, w)| w * f.derivatives(x, s).expect("order provided").iter().map(|d| d * d).sum::<f64>())
                .sum();
            (s, total)
        })
        .collect()
}
