//! Model elliptic problems with exact solutions.
//!
//! Operators are in non-divergence form
//! `Lu = Σ a_ij u_{x_i x_j} + Σ b_i u_{x_i} + c u`, and boundary data are derived
//! from the exact solution: `g = u` on Dirichlet faces and
//! `h = ∂u/∂n + β u` on Neumann/Robin faces.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::SVector;
use num_dual::{hessian, Dual2SVec64, DualNum};

use crate::mesh::{split_box, Brick, Domain, Frame};
use crate::{Error, Result};

/// Second-order dual number in three variables.
pub type D2 = Dual2SVec64<3>;

/// Exact solution written over Cartesian dual coordinates. The second argument
/// is an azimuth hint selecting the branch of θ for multivalued expressions.
pub type ExactFn = Arc<dyn Fn(&[D2; 3], f64) -> D2 + Send + Sync>;

pub type CoeffFn = Arc<dyn Fn([f64; 3]) -> Coefficients + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    /// Symmetric second-order coefficients.
    pub a: [[f64; 3]; 3],
    pub b: [f64; 3],
    pub c: f64,
}

impl Coefficients {
    /// `-Δu + c u`.
    pub fn laplace(c: f64) -> Self {
        Coefficients { a: [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]], b: [0.0; 3], c }
    }

    pub fn apply(&self, jet: &Jet) -> f64 {
        let mut s = self.c * jet.u;
        for i in 0..3 {
            s += self.b[i] * jet.grad[i];
            for j in 0..3 {
                s += self.a[i][j] * jet.hess[i][j];
            }
        }
        s
    }

    pub fn is_symmetric(&self) -> bool {
        (0..3).all(|i| (0..3).all(|j| self.a[i][j] == self.a[j][i]))
    }
}

/// Value, gradient and Hessian of a function at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub u: f64,
    pub grad: [f64; 3],
    pub hess: [[f64; 3]; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryKind {
    Dirichlet,
    /// `∂u/∂n + β u = h`; β = 0 is a Neumann condition.
    Robin {
        beta: f64,
    },
}

impl BoundaryKind {
    pub const NEUMANN: BoundaryKind = BoundaryKind::Robin { beta: 0.0 };
}

/// Where a problem lives: a union of boxes meshed uniformly, or a singular neighborhood.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// Boxes split into bricks of size close to `h`.
    Boxes {
        boxes: Vec<Brick>,
        h: f64,
    },
    Singular(Domain),
}

impl Geometry {
    pub fn frame(&self) -> Frame {
        match self {
            Geometry::Boxes { .. } => Frame::Regular,
            Geometry::Singular(Domain::Vertex { .. }) => Frame::Vertex,
            Geometry::Singular(Domain::Edge { .. }) => Frame::Edge,
            Geometry::Singular(Domain::VertexEdge { .. }) => Frame::VertexEdge,
            Geometry::Singular(Domain::Bricks(_)) => Frame::Regular,
        }
    }

    /// Mesh domain for the given brick size (ignored for singular neighborhoods).
    pub fn domain(&self, h: Option<f64>) -> Result<Domain> {
        match self {
            Geometry::Boxes { boxes, h: h0 } => {
                let h = h.unwrap_or(*h0);
                if !(h > 0.0) {
                    return Err(Error::InvalidArgument(format!("mesh size must be positive, got {h}")));
                }
                let mut bricks = Vec::new();
                for b in boxes {
                    let n = [0, 1, 2].map(|d| (((b.hi[d] - b.lo[d]) / h).round() as usize).max(1));
                    bricks.extend(split_box(b.lo, b.hi, n));
                }
                Ok(Domain::Bricks(bricks))
            }
            Geometry::Singular(d) => Ok(d.clone()),
        }
    }
}

#[derive(Clone)]
pub struct EllipticProblem {
    pub name: String,
    pub coeffs: CoeffFn,
    /// True when the coefficients do not depend on x.
    pub constant_coefficients: bool,
    pub exact: Option<ExactFn>,
    /// Boundary condition for each face label `2 * axis + side` of the frame.
    pub bc: [BoundaryKind; 6],
    pub geometry: Geometry,
}

impl std::fmt::Debug for EllipticProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EllipticProblem")
            .field("name", &self.name)
            .field("bc", &self.bc)
            .field("geometry", &self.geometry)
            .finish_non_exhaustive()
    }
}

impl EllipticProblem {
    pub fn frame(&self) -> Frame {
        self.geometry.frame()
    }

    /// Replaces the exact solution; all data follow from it.
    pub fn with_solution(mut self, exact: ExactFn) -> Self {
        self.exact = Some(exact);
        self
    }

    fn exact_fn(&self) -> Result<&ExactFn> {
        self.exact.as_ref().ok_or_else(|| Error::MissingData(format!("problem '{}' has no exact solution", self.name)))
    }

    pub fn jet(&self, x: [f64; 3], theta_hint: f64) -> Result<Jet> {
        Ok(eval_jet(self.exact_fn()?, x, theta_hint))
    }

    pub fn rhs(&self, x: [f64; 3], theta_hint: f64) -> Result<f64> {
        let jet = self.jet(x, theta_hint)?;
        Ok((self.coeffs)(x).apply(&jet))
    }

    pub fn dirichlet(&self, x: [f64; 3], theta_hint: f64) -> Result<f64> {
        Ok(self.jet(x, theta_hint)?.u)
    }

    /// `∂u/∂n + β u` with the unit outward normal `n`.
    pub fn neumann(&self, label: u8, x: [f64; 3], n: [f64; 3], theta_hint: f64) -> Result<f64> {
        let beta = match self.bc[label as usize] {
            BoundaryKind::Robin { beta } => beta,
            BoundaryKind::Dirichlet => {
                return Err(Error::MissingData(format!("label {label} is not a Neumann face")));
            }
        };
        let jet = self.jet(x, theta_hint)?;
        Ok(n[0] * jet.grad[0] + n[1] * jet.grad[1] + n[2] * jet.grad[2] + beta * jet.u)
    }
}

pub fn eval_jet(f: &ExactFn, x: [f64; 3], theta_hint: f64) -> Jet {
    let (u, g, h) = hessian(|p: SVector<D2, 3>| f(&[p[0], p[1], p[2]], theta_hint), &SVector::from(x));
    Jet { u, grad: [g[0], g[1], g[2]], hess: [0, 1, 2].map(|i| [0, 1, 2].map(|j| h[(i, j)])) }
}

/// Azimuth of (x, y) on the branch closest to `hint`, differentiable everywhere
/// off the axis. The rotation by the base angle keeps the inner arctangent away
/// from its poles.
pub fn azimuth(x: D2, y: D2, hint: f64) -> D2 {
    let mut t0 = y.re.atan2(x.re);
    t0 += 2.0 * PI * ((hint - t0) / (2.0 * PI)).round();
    let (s0, c0) = t0.sin_cos();
    let num = y * c0 - x * s0;
    let den = x * c0 + y * s0;
    (num / den).atan() + t0
}

fn radius(p: &[D2; 3]) -> D2 {
    (p[0] * p[0] + p[1] * p[1]).sqrt()
}

fn spherical_radius(p: &[D2; 3]) -> D2 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

/// Tensor polynomial Σ c_{ijk} x^i y^j z^k from (exponents, coefficient) pairs.
pub fn tensor_polynomial(terms: Vec<([u32; 3], f64)>) -> ExactFn {
    Arc::new(move |p, _| {
        let mut s = p[0] * 0.0;
        for (e, c) in &terms {
            s += p[0].powi(e[0] as i32) * p[1].powi(e[1] as i32) * p[2].powi(e[2] as i32) * *c;
        }
        s
    })
}

pub const CATALOG: [&str; 12] = [
    "laplace-dirichlet-cube",
    "poisson-homogeneous",
    "poisson-mixed",
    "helmholtz-mixed",
    "varcoef-robin",
    "varcoef-Lshape",
    "nonselfadjoint-mixed",
    "vertex-dirichlet",
    "vertex-mixed",
    "edge-dirichlet",
    "edge-crack-mixed",
    "vertexedge-dirichlet",
];

fn cube(lo: f64, hi: f64) -> Brick {
    Brick { lo: [lo; 3], hi: [hi; 3] }
}

fn constant(c: Coefficients) -> CoeffFn {
    Arc::new(move |_| c)
}

use BoundaryKind::Dirichlet as D;
const N: BoundaryKind = BoundaryKind::NEUMANN;

pub fn catalog(name: &str) -> Result<EllipticProblem> {
    let named = |coeffs: CoeffFn, constant_coefficients: bool, exact: ExactFn, bc, geometry| EllipticProblem {
        name: name.to_string(),
        coeffs,
        constant_coefficients,
        exact: Some(exact),
        bc,
        geometry,
    };
    let all_d = [D; 6];
    // Dirichlet on x = ±1 and y = -1, Neumann on y = 1 and z = ±1.
    let mixed = [D, D, D, N, N, N];
    let p = match name {
        "laplace-dirichlet-cube" => {
            let s2 = 2f64.sqrt() * PI;
            let k = 1.0 / (PI * PI * s2.sinh());
            named(
                constant(Coefficients::laplace(0.0)),
                true,
                Arc::new(move |p, _| (p[0] * PI).sin() * (p[1] * PI).sin() * (p[2] * s2).sinh() * k),
                all_d,
                Geometry::Boxes { boxes: vec![cube(0.0, 1.0)], h: 0.5 },
            )
        }
        "poisson-homogeneous" => named(
            constant(Coefficients::laplace(0.0)),
            true,
            Arc::new(|p, _| (p[0] * PI).sin() * (p[1] * PI).sin() * (p[2] * PI).sin()),
            all_d,
            Geometry::Boxes { boxes: vec![cube(-1.0, 1.0)], h: 1.0 },
        ),
        "poisson-mixed" => named(
            constant(Coefficients::laplace(0.0)),
            true,
            Arc::new(|p, _| {
                (p[0] * (PI / 2.0)).sin() * ((p[1] * (PI / 2.0)).cos() - (p[2] * (PI / 2.0)).sin()) * (2.0 / (PI * PI))
            }),
            mixed,
            Geometry::Boxes { boxes: vec![cube(-1.0, 1.0)], h: 1.0 },
        ),
        "helmholtz-mixed" => named(
            constant(Coefficients::laplace(1.0)),
            true,
            Arc::new(|p, _| p[0].exp() * p[1].cos() * p[2].sin()),
            mixed,
            Geometry::Boxes { boxes: vec![cube(-1.0, 1.0)], h: 1.0 },
        ),
        "varcoef-robin" => named(
            Arc::new(|x: [f64; 3]| {
                let a = -(1.0 + 0.01 * x[1] * x[0].sin());
                let b = -(2.5 + 0.02 * (x[0] * x[0] + x[2]).cos());
                let c = -(3.0 + 0.03 * x[1] * x[2].exp());
                let d = 0.15 * (2.0 * PI * (x[1] + x[2])).sin();
                Coefficients { a: [[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]], b: [0.0; 3], c: d }
            }),
            false,
            Arc::new(|p, _| ((p[0] + p[1]) * PI).cos() * p[2].exp()),
            [BoundaryKind::Robin { beta: 1.0 }; 6],
            Geometry::Boxes { boxes: vec![cube(-1.0, 1.0)], h: 2.0 / 3.0 },
        ),
        "varcoef-Lshape" => named(
            Arc::new(|x: [f64; 3]| {
                let a = -(0.5 + 0.01 * x[1] * x[0].sin());
                let b = -(1.5 + 0.02 * (x[0] * x[0] + x[2]).cos());
                let c = -(2.0 + 0.03 * x[1] * x[2].exp());
                let d = 0.25 * (2.0 * PI * (x[1] + x[2])).sin();
                let e = 0.25 * (2.0 * PI * (x[2] + x[0])).sin();
                let h = 0.25 * (2.0 * PI * (x[0] + x[1])).sin();
                let l = 2.5 - 0.025 * (PI * (x[0] + x[1] + x[2]) / 2.0).exp();
                Coefficients { a: [[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]], b: [d, e, h], c: l }
            }),
            false,
            Arc::new(|p, _| ((p[0] + p[1] + p[2]) * (PI / 2.0)).sin() * (p[2] * (PI / 2.0)).exp()),
            all_d,
            Geometry::Boxes {
                boxes: vec![
                    cube(0.0, 1.0),
                    Brick { lo: [1.0, 0.0, 0.0], hi: [2.0, 1.0, 1.0] },
                    Brick { lo: [0.0, 1.0, 0.0], hi: [1.0, 2.0, 1.0] },
                ],
                h: 0.5,
            },
        ),
        "nonselfadjoint-mixed" => named(
            Arc::new(|x: [f64; 3]| {
                let a = -(0.5 + 0.05 * (x[0] * x[1] * x[2]).exp());
                let b = -(1.0 + 0.015 * (x[0] + x[1]).cos());
                let c = -(2.5 + 0.02 * (x[1] + x[2]).exp());
                // d multiplies u_xy + u_yz + u_zx; each mixed pair appears twice in Σ a_ij u_ij.
                let d = -0.001 * (PI * (x[0] + x[1] + x[2])).sin() / 2.0;
                let e = 4.05 + 0.045 * (PI * (x[0] + x[1] + x[2]) / 2.0).cos();
                Coefficients { a: [[a, d, d], [d, b, d], [d, d, c]], b: [0.0; 3], c: e }
            }),
            false,
            Arc::new(|p, _| ((p[0] * PI).sin() + (p[1] * (PI / 2.0)).sin()) * (p[2] * PI).cos()),
            mixed,
            Geometry::Boxes { boxes: vec![cube(-1.0, 1.0)], h: 2.0 / 3.0 },
        ),
        "vertex-dirichlet" => named(
            constant(Coefficients::laplace(0.0)),
            true,
            // ρ^{1/2} sin(φ/2) = sqrt((ρ - z) / 2)
            Arc::new(|p, _| ((spherical_radius(p) - p[2]) * 0.5).sqrt()),
            all_d,
            Geometry::Singular(vertex_domain()),
        ),
        "vertex-mixed" => named(
            constant(Coefficients::laplace(0.0)),
            true,
            // ρ^{0.1} (1 - ρ) sin 2φ with sin 2φ = 2 r z / ρ²
            Arc::new(|p, _| {
                let rho = spherical_radius(p);
                rho.powf(0.1) * (-rho + 1.0) * radius(p) * p[2] * 2.0 / (rho * rho)
            }),
            [D, D, D, D, D, N],
            Geometry::Singular(vertex_domain()),
        ),
        "edge-dirichlet" => named(
            constant(Coefficients::laplace(0.0)),
            true,
            Arc::new(|p, hint| radius(p).powf(1.0 / 3.0) * (azimuth(p[0], p[1], hint) / 3.0).sin() * p[2]),
            all_d,
            Geometry::Singular(Domain::Edge {
                z_radius: 1.0,
                theta: (0.0, PI / 2.0),
                x3: (0.0, 1.0),
                theta_panels: 1,
                axial_panels: 1,
            }),
        ),
        "edge-crack-mixed" => named(
            constant(Coefficients::laplace(0.0)),
            true,
            Arc::new(|p, hint| radius(p).sqrt() * (azimuth(p[0], p[1], hint) / 2.0).sin()),
            // Dirichlet on the crack faces θ = 0, 2π; Neumann on r = 1 and x₃ = 0, 1.
            [N, N, D, D, N, N],
            Geometry::Singular(Domain::Edge {
                z_radius: 1.0,
                theta: (0.0, 2.0 * PI),
                x3: (0.0, 1.0),
                theta_panels: 1,
                axial_panels: 1,
            }),
        ),
        "vertexedge-dirichlet" => named(
            constant(Coefficients::laplace(0.0)),
            true,
            // ρ^{3/4} (sin φ)^{1/2} sin(θ/2) = ρ^{1/4} r^{1/2} sin(θ/2)
            Arc::new(|p, hint| {
                spherical_radius(p).powf(0.25) * radius(p).sqrt() * (azimuth(p[0], p[1], hint) / 2.0).sin()
            }),
            all_d,
            Geometry::Singular(Domain::VertexEdge {
                rho_v: 1.0,
                phi_v: PI / 6.0,
                theta: (0.0, 1.5 * PI),
                theta_panels: 1,
            }),
        ),
        other => return Err(Error::UnknownProblem(other.to_string())),
    };
    Ok(p)
}

fn vertex_domain() -> Domain {
    Domain::Vertex { rho_v: 1.0, phi: (PI / 6.0, PI / 3.0), theta: (0.0, 1.5 * PI), theta_panels: 1 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn azimuth_is_smooth_across_the_y_axis() {
        let f: ExactFn = Arc::new(|p, hint| azimuth(p[0], p[1], hint));
        let j = eval_jet(&f, [0.0, 2.0, 0.0], PI / 2.0);
        assert!((j.u - PI / 2.0).abs() < 1e-15);
        // ∇θ = (-y, x) / r²
        assert!((j.grad[0] + 0.5).abs() < 1e-15 && j.grad[1].abs() < 1e-15);
        let j = eval_jet(&f, [1.0, -1e-300, 0.0], 2.0 * PI);
        assert!((j.u - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn laplace_jet_of_quadratic() {
        let p = tensor_polynomial(vec![([2, 0, 0], 1.0), ([0, 1, 1], 3.0)]);
        let j = eval_jet(&p, [1.0, 2.0, 3.0], 0.0);
        assert_eq!(j.u, 1.0 + 18.0);
        assert_eq!(j.grad, [2.0, 9.0, 6.0]);
        assert_eq!(Coefficients::laplace(0.0).apply(&j), -2.0);
    }
}
