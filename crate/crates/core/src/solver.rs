//! Preconditioned conjugate gradients on the normal equations and broken-H¹
//! error measurement.

use std::time::Instant;

use crate::basis::{gll_rule, interpolation_matrix, Basis1D};
use crate::dense::{axpy, dot};
use crate::functional::Discretization;
use crate::mesh::{det3, element_map, frame_geometry, inv3, ElementKind, Frame};
use crate::precond::SeparablePrecond;
use crate::problems::EllipticProblem;
use crate::tensor::apply3;
use crate::{Error, Result};

/// An affine system `r(u) = X u − b` with `X` symmetric positive semi-definite.
pub trait LinearSystem {
    fn dim(&self) -> usize;
    /// `X u − b`.
    fn residual(&self, u: &[f64]) -> Result<Vec<f64>>;
    /// `X p`.
    fn apply(&self, p: &[f64]) -> Result<Vec<f64>>;
}

impl LinearSystem for Discretization {
    fn dim(&self) -> usize {
        self.n_unknowns()
    }

    fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.normal_residual(u)
    }

    fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.apply_normal(p)
    }
}

/// A symmetric positive definite preconditioner `z = P r`.
pub trait Preconditioner {
    fn precondition(&self, r: &[f64]) -> Result<Vec<f64>>;
}

impl Preconditioner for SeparablePrecond {
    fn precondition(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.apply(r)
    }
}

/// The identity preconditioner.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Preconditioner for Identity {
    fn precondition(&self, r: &[f64]) -> Result<Vec<f64>> {
        Ok(r.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcgOptions {
    /// Stop once `‖r‖_P / ‖r₀‖_P` falls to this value.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PcgOptions {
    fn default() -> Self {
        PcgOptions { tol: 1e-8, max_iter: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `sqrt(⟨r_k, P r_k⟩)` for every iterate, starting with the initial guess.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub functional_final: f64,
    /// Relative broken-H¹ error in percent, when an exact solution is known.
    pub rel_error_h1: Option<f64>,
    pub dof: usize,
    pub wall_time: f64,
}

/// Result of a plain PCG run.
#[derive(Debug, Clone)]
pub struct PcgOutcome {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub converged: bool,
}

fn finite(v: &[f64], what: &str, iteration: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Breakdown { iteration, reason: format!("non-finite {what}") })
    }
}

/// Preconditioned conjugate gradients from `u0`.
pub fn pcg(sys: &dyn LinearSystem, pre: &dyn Preconditioner, u0: &[f64], opts: &PcgOptions) -> Result<PcgOutcome> {
    let n = sys.dim();
    if u0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: u0.len() });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let mut u = u0.to_vec();
    // r holds the negative gradient b − X u.
    let mut r: Vec<f64> = sys.residual(&u)?.into_iter().map(|v| -v).collect();
    finite(&r, "residual", 0)?;
    let mut z = pre.precondition(&r)?;
    let mut rz = dot(&r, &z);
    if rz < 0.0 {
        return Err(Error::Breakdown { iteration: 0, reason: "preconditioner is not positive".into() });
    }
    let r0 = rz.sqrt();
    let mut history = vec![r0];
    if r0 == 0.0 {
        return Ok(PcgOutcome { u, iterations: 0, history, converged: true });
    }
    let mut p = z.clone();
    for it in 1..=opts.max_iter {
        let xp = sys.apply(&p)?;
        finite(&xp, "operator image", it)?;
        let pxp = dot(&p, &xp);
        if !(pxp > 0.0) {
            return Err(Error::Breakdown { iteration: it, reason: format!("non-positive curvature {pxp:e}") });
        }
        let alpha = rz / pxp;
        axpy(alpha, &p, &mut u);
        axpy(-alpha, &xp, &mut r);
        z = pre.precondition(&r)?;
        let rz_new = dot(&r, &z);
        if !rz_new.is_finite() {
            return Err(Error::Breakdown { iteration: it, reason: "non-finite residual norm".into() });
        }
        let norm = rz_new.max(0.0).sqrt();
        history.push(norm);
        if norm <= opts.tol * r0 {
            return Ok(PcgOutcome { u, iterations: it, history, converged: true });
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Ok(PcgOutcome { u, iterations: opts.max_iter, history, converged: false })
}

/// Builds the preconditioner, runs PCG from zero and reports the functional
/// and (when the problem has an exact solution) the relative H¹ error.
pub fn pcg_solve(
    problem: &EllipticProblem,
    disc: &Discretization,
    opts: &PcgOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let pre = SeparablePrecond::new(disc)?;
    let out = pcg(disc, &pre, &vec![0.0; disc.n_unknowns()], opts)?;
    let functional_final = disc.functional_value(&out.u)?.total;
    let rel_error_h1 = match problem.exact {
        Some(_) => Some(h1_relative_error(problem, disc, &out.u)?),
        None => None,
    };
    let report = SolveReport {
        iterations: out.iterations,
        residual_history: out.history,
        converged: out.converged,
        functional_final,
        rel_error_h1,
        dof: disc.mesh.dof_bookkeeping(),
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((out.u, report))
}

/// `100 · ‖u − u_ex‖_{H¹} / ‖u_ex‖_{H¹}` summed over the finite standard
/// elements, with Cartesian gradients through the frame map.
pub fn h1_relative_error(problem: &EllipticProblem, disc: &Discretization, u: &[f64]) -> Result<f64> {
    let parts = h1_error_by_element(problem, disc, u)?;
    let err: f64 = parts.iter().map(|p| p.1).sum();
    let norm: f64 = parts.iter().map(|p| p.2).sum();
    if !(norm > 0.0) {
        return Err(Error::MissingData("exact solution has zero H¹ norm on the mesh".into()));
    }
    Ok(100.0 * (err / norm).sqrt())
}

/// Per finite standard element: `(element, ‖u − u_ex‖², ‖u_ex‖²)` in H¹.
pub fn h1_error_by_element(
    problem: &EllipticProblem,
    disc: &Discretization,
    u: &[f64],
) -> Result<Vec<(usize, f64, f64)>> {
    if problem.exact.is_none() {
        return Err(Error::MissingData(format!("problem '{}' has no exact solution", problem.name)));
    }
    let mesh = &disc.mesh;
    if u.len() != mesh.n_unknowns {
        return Err(Error::DimensionMismatch { expected: mesh.n_unknowns, got: u.len() });
    }
    let mut out = Vec::new();
    for e in mesh.elements.iter().filter(|e| e.kind == ElementKind::Standard && e.is_finite()) {
        let map = element_map(e)?;
        let blk = &mesh.blocks[e.block];
        let coarse = e.degrees.map(Basis1D::new);
        let rules = [0, 1, 2].map(|d| gll_rule(2 * e.degrees[d] + 4)).map(|r| r.expect("order is positive"));
        let interp = [0, 1, 2].map(|d| interpolation_matrix(&coarse[d].nodes, &rules[d].nodes));
        let dinterp = [0, 1, 2].map(|d| interp[d].matmul(&coarse[d].diff));
        let dims = e.degrees.map(|d| d + 1);
        let ub = &u[blk.offset..blk.offset + blk.len];
        let vals = apply3([&interp[0], &interp[1], &interp[2]], ub, dims).0;
        let grads = [
            apply3([&dinterp[0], &interp[1], &interp[2]], ub, dims).0,
            apply3([&interp[0], &dinterp[1], &interp[2]], ub, dims).0,
            apply3([&interp[0], &interp[1], &dinterp[2]], ub, dims).0,
        ];
        let fd = rules.clone().map(|r| r.nodes.len());
        let half_vol: f64 = map.half.iter().product();
        let (mut err, mut norm) = (0.0, 0.0);
        for k in 0..fd[2] {
            for j in 0..fd[1] {
                for i in 0..fd[0] {
                    let p = i + fd[0] * (j + fd[1] * k);
                    let lam = [rules[0].nodes[i], rules[1].nodes[j], rules[2].nodes[k]];
                    let q = map.frame_point(lam);
                    let g = frame_geometry(e.frame, q);
                    let kinv = inv3(&g.jac);
                    let hint = if e.frame == Frame::Regular { 0.0 } else { q[1] };
                    let jet = problem.jet(g.x, hint)?;
                    let w =
                        rules[0].weights[i] * rules[1].weights[j] * rules[2].weights[k] * half_vol * det3(&g.jac).abs();
                    let dq = [0, 1, 2].map(|a| grads[a][p] / map.half[a]);
                    let mut e2 = (vals[p] - jet.u).powi(2);
                    let mut n2 = jet.u * jet.u;
                    for kk in 0..3 {
                        let gx: f64 = (0..3).map(|a| dq[a] * kinv[a][kk]).sum();
                        e2 += (gx - jet.grad[kk]).powi(2);
                        n2 += jet.grad[kk].powi(2);
                    }
                    err += w * e2;
                    norm += w * n2;
                }
            }
        }
        out.push((e.id, err, norm));
    }
    Ok(out)
}
