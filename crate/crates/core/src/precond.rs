//! Block-diagonal separable preconditioner and condition-number studies.
//!
//! Every storage block is preconditioned by the inverse of a tensor-product
//! quadratic form `C = G₀⊗F⊗F + F⊗G₁⊗F + F⊗F⊗G₂ + F⊗F⊗F` on the master cube.
//! The 1D pencils `(G_a, F)` are diagonalized once per degree, so `C⁻¹` is three
//! 1D contractions, a diagonal divide and three more contractions.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::basis::{legendre_derivative_coeffs, legendre_values, Basis1D};
use crate::dense::{dot, Mat};
use crate::functional::Discretization;
use crate::mesh::{BlockKind, Frame};
use crate::tensor::apply3;
use crate::{Error, Result};

/// Exact 1D forms in the Legendre coefficient basis.
#[derive(Debug, Clone)]
pub struct QuadForm1D {
    pub order: usize,
    /// `∫ v'^2`.
    pub e1: Mat,
    /// `∫ v''^2`.
    pub e2: Mat,
    /// `E = E₁ + E₂`.
    pub e: Mat,
    /// `∫ v^2`, diagonal with entries `2/(2i+1)`.
    pub f: Mat,
}

fn legendre_gram(coeffs: &[Vec<f64>]) -> Mat {
    let n = coeffs.len();
    Mat::from_fn(n, n, |i, j| {
        coeffs[i].iter().zip(&coeffs[j]).enumerate().map(|(k, (a, b))| a * b * 2.0 / (2 * k + 1) as f64).sum()
    })
}

/// Stiffness and mass forms of degree-`order` polynomials, integrated exactly.
pub fn quad_forms_1d(order: usize) -> QuadForm1D {
    let n = order + 1;
    let unit = |i: usize| (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
    let d1: Vec<Vec<f64>> = (0..n).map(|i| legendre_derivative_coeffs(&unit(i))).collect();
    let d2: Vec<Vec<f64>> = d1.iter().map(|c| legendre_derivative_coeffs(c)).collect();
    let e1 = legendre_gram(&d1);
    let e2 = legendre_gram(&d2);
    let e = Mat::from_fn(n, n, |i, j| e1[(i, j)] + e2[(i, j)]);
    let f = Mat::diag(&(0..n).map(|i| 2.0 / (2 * i + 1) as f64).collect::<Vec<_>>());
    QuadForm1D { order, e1, e2, e, f }
}

/// The pair `(G, H) = (η⁴E₂ + η²E₁, F)` for a direction whose derivatives carry
/// the weight `η`.
pub fn quad_forms_1d_aniso(order: usize, eta: f64) -> Result<(Mat, Mat)> {
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!("anisotropy factor must be positive, got {eta}")));
    }
    let q = quad_forms_1d(order);
    let (e4, e2) = (eta.powi(4), eta * eta);
    let n = order + 1;
    Ok((Mat::from_fn(n, n, |i, j| e4 * q.e2[(i, j)] + e2 * q.e1[(i, j)]), q.f))
}

/// Generalized eigenpairs `(A − μ M) b = 0` normalized by `bᵀ M b = 1`.
#[derive(Debug, Clone)]
pub struct EigBasis1D {
    /// Ascending eigenvalues.
    pub mu: Vec<f64>,
    /// Column `i` is the eigenvector `b_i`.
    pub vectors: Mat,
}

/// Solves the symmetric-definite pencil `(a, m)` through a Cholesky reduction.
pub fn gen_eig(a: &Mat, m: &Mat) -> Result<EigBasis1D> {
    let n = a.rows;
    if a.cols != n || m.rows != n || m.cols != n {
        return Err(Error::DimensionMismatch { expected: n, got: m.rows });
    }
    let chol = nalgebra::Cholesky::new(m.to_nalgebra())
        .ok_or_else(|| Error::InvalidArgument("mass form is not positive definite".into()))?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or_else(|| Error::InvalidArgument("singular mass form".into()))?;
    let red = &linv * a.to_nalgebra() * linv.transpose();
    let red = (&red + red.transpose()) * 0.5;
    let eig = SymmetricEigen::new(red);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let back = linv.transpose() * &eig.eigenvectors;
    let mut vectors = Mat::zeros(n, n);
    let mut mu = Vec::with_capacity(n);
    for (c, &k) in order.iter().enumerate() {
        mu.push(eig.eigenvalues[k]);
        let col: Vec<f64> = (0..n).map(|r| back[(r, k)]).collect();
        let sign = col.iter().find(|v| v.abs() > 1e-12).map_or(1.0, |v| v.signum());
        for (r, v) in col.into_iter().enumerate() {
            vectors[(r, c)] = sign * v;
        }
    }
    Ok(EigBasis1D { mu, vectors })
}

/// Nodal diagonalization of one direction: `phi` maps eigen-coordinates to
/// nodal values on the GLL grid of the degree.
#[derive(Debug, Clone)]
struct Axis1D {
    mu: Vec<f64>,
    phi: Mat,
    phi_t: Mat,
    phi_inv: Mat,
}

fn axis_basis(degree: usize, eta: Option<f64>) -> Result<Axis1D> {
    let (a, m) = match eta {
        Some(eta) => quad_forms_1d_aniso(degree, eta)?,
        None => {
            let q = quad_forms_1d(degree);
            (q.e, q.f)
        }
    };
    let eb = gen_eig(&a, &m)?;
    let nodes = Basis1D::new(degree).nodes;
    let v = Mat::from_fn(degree + 1, degree + 1, |i, k| legendre_values(degree, nodes[i])[k]);
    let phi = v.matmul(&eb.vectors);
    let phi_inv = phi
        .to_nalgebra()
        .try_inverse()
        .map(|m| Mat::from_nalgebra(&m))
        .ok_or_else(|| Error::InvalidArgument(format!("singular eigenbasis at degree {degree}")))?;
    Ok(Axis1D { mu: eb.mu, phi_t: phi.transpose(), phi, phi_inv })
}

#[derive(Debug, Clone)]
enum BlockPrecond {
    Separable { axes: [Axis1D; 3], inv_sigma: Vec<f64>, dims: [usize; 3] },
    Scalar(f64),
}

/// Degree and anisotropy of each direction of a block.
fn block_axes(disc: &Discretization, b: usize) -> ([usize; 3], [Option<f64>; 3]) {
    let blk = &disc.mesh.blocks[b];
    let e = &disc.mesh.elements[blk.owner];
    let degrees = match blk.kind {
        BlockKind::Tensor(d) => d,
        BlockKind::Radial1D(w) => [0, 0, w],
        BlockKind::Constant => [0, 0, 0],
    };
    let eta = match e.frame {
        Frame::Edge if e.hi[0].is_finite() => Some(e.hi[0].exp()),
        Frame::VertexEdge if e.hi[0].is_finite() => Some(e.hi[0].exp().atan().sin()),
        _ => None,
    };
    (degrees, [None, None, eta])
}

fn eta_key(eta: Option<f64>) -> Option<u64> {
    eta.map(f64::to_bits)
}

/// Deterministic probe vector for the block scale.
fn probe(n: usize) -> Vec<f64> {
    (0..n).map(|i| (1.3 * i as f64 + 0.7).sin() + 0.5).collect()
}

/// Separable block-diagonal preconditioner, scaled per block so that each
/// block's form matches the functional on a probe vector.
#[derive(Debug, Clone)]
pub struct SeparablePrecond {
    blocks: Vec<(usize, usize, BlockPrecond)>,
    n: usize,
}

impl BlockPrecond {
    /// `C⁻¹ r` for separable blocks, `r / x` for scalar blocks.
    fn solve(&self, r: &[f64]) -> Vec<f64> {
        match self {
            BlockPrecond::Scalar(x) => r.iter().map(|v| v / x).collect(),
            BlockPrecond::Separable { axes, inv_sigma, dims } => {
                let (mut y, _) = apply3([&axes[0].phi_t, &axes[1].phi_t, &axes[2].phi_t], r, *dims);
                y.iter_mut().zip(inv_sigma).for_each(|(a, s)| *a *= s);
                apply3([&axes[0].phi, &axes[1].phi, &axes[2].phi], &y, *dims).0
            }
        }
    }

    /// `vᵀ C v = Σ σ c²` with eigen-coordinates `c = Φ⁻¹ v`.
    fn form(&self, v: &[f64]) -> f64 {
        match self {
            BlockPrecond::Scalar(x) => x * dot(v, v),
            BlockPrecond::Separable { axes, inv_sigma, dims } => {
                let (c, _) = apply3([&axes[0].phi_inv, &axes[1].phi_inv, &axes[2].phi_inv], v, *dims);
                c.iter().zip(inv_sigma).map(|(c, s)| c * c / s).sum()
            }
        }
    }
}

impl SeparablePrecond {
    pub fn new(disc: &Discretization) -> Result<Self> {
        let mesh = &disc.mesh;
        let mut cache: HashMap<(usize, Option<u64>), Axis1D> = HashMap::new();
        let mut raw = Vec::with_capacity(mesh.blocks.len());
        for b in 0..mesh.blocks.len() {
            let blk = mesh.blocks[b];
            if blk.kind == BlockKind::Constant {
                raw.push(None);
                continue;
            }
            let (deg, eta) = block_axes(disc, b);
            let mut axes = Vec::with_capacity(3);
            for a in 0..3 {
                let key = (deg[a], eta_key(eta[a]));
                if !cache.contains_key(&key) {
                    cache.insert(key, axis_basis(deg[a], eta[a])?);
                }
                axes.push(cache[&key].clone());
            }
            let axes: [Axis1D; 3] = axes.try_into().expect("three axes");
            let dims = deg.map(|d| d + 1);
            let mut inv_sigma = Vec::with_capacity(blk.len);
            for k in 0..dims[2] {
                for j in 0..dims[1] {
                    for i in 0..dims[0] {
                        inv_sigma.push(1.0 / (axes[0].mu[i] + axes[1].mu[j] + axes[2].mu[k] + 1.0));
                    }
                }
            }
            raw.push(Some(BlockPrecond::Separable { axes, inv_sigma, dims }));
        }
        let blocks: Vec<(usize, usize, BlockPrecond)> = raw
            .into_par_iter()
            .enumerate()
            .map(|(b, p)| {
                let blk = mesh.blocks[b];
                let p = match p {
                    None => BlockPrecond::Scalar(disc.block_quadratic(b, &[1.0])),
                    Some(BlockPrecond::Separable { axes, inv_sigma, dims }) => {
                        let v = probe(blk.len);
                        let base = BlockPrecond::Separable { axes, inv_sigma, dims };
                        let alpha = disc.block_quadratic(b, &v) / base.form(&v);
                        match base {
                            BlockPrecond::Separable { axes, inv_sigma, dims } => BlockPrecond::Separable {
                                axes,
                                inv_sigma: inv_sigma.into_iter().map(|s| s / alpha).collect(),
                                dims,
                            },
                            s => s,
                        }
                    }
                    Some(s) => s,
                };
                (blk.offset, blk.len, p)
            })
            .collect();
        for (off, _, p) in &blocks {
            if let BlockPrecond::Scalar(x) = p {
                if !(*x > 0.0 && x.is_finite()) {
                    return Err(Error::InvalidArgument(format!("constant block at offset {off} has no coupling")));
                }
            }
        }
        Ok(SeparablePrecond { blocks, n: mesh.n_unknowns })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `P r`, the block-wise inverse of the separable forms.
    pub fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: r.len() });
        }
        let parts: Vec<Vec<f64>> = self.blocks.par_iter().map(|(off, len, p)| p.solve(&r[*off..*off + *len])).collect();
        let mut out = vec![0.0; self.n];
        for ((off, len, _), z) in self.blocks.iter().zip(parts) {
            out[*off..*off + *len].copy_from_slice(&z);
        }
        Ok(out)
    }
}

/// 1D forms on the degree-`w` GLL grid with `w + 1`-point quadrature:
/// `(M, K₁, K₂)` with `M = diag(w)`, `K₁ = DᵀWD`, `K₂ = (D²)ᵀWD²`.
pub fn gll_forms_1d(w: usize) -> (Mat, Mat, Mat) {
    let b = Basis1D::new(w);
    let wm = Mat::diag(&b.weights);
    let d2 = b.diff.matmul(&b.diff);
    let k1 = b.diff.transpose().matmul(&wm).matmul(&b.diff);
    let k2 = d2.transpose().matmul(&wm).matmul(&d2);
    (wm, k1, k2)
}

/// Largest eigenvalue of a symmetric operator by Lanczos with full
/// reorthogonalization, started from `start`.
pub fn lanczos_max(n: usize, apply: impl Fn(&[f64]) -> Vec<f64>, start: &[f64], tol: f64) -> f64 {
    let mut q: Vec<Vec<f64>> = Vec::new();
    let nrm = dot(start, start).sqrt();
    q.push(start.iter().map(|v| v / nrm).collect());
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut prev = f64::NAN;
    for k in 0..n {
        let mut w = apply(&q[k]);
        let a = dot(&w, &q[k]);
        alpha.push(a);
        for _ in 0..2 {
            for qj in &q {
                let c = dot(&w, qj);
                crate::dense::axpy(-c, qj, &mut w);
            }
        }
        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let top = SymmetricEigen::new(t).eigenvalues.iter().copied().fold(f64::MIN, f64::max);
        let b = dot(&w, &w).sqrt();
        if (top - prev).abs() <= tol * top.abs() || b <= 1e-14 * top.abs() {
            return top;
        }
        prev = top;
        beta.push(b);
        q.push(w.into_iter().map(|v| v / b).collect());
    }
    prev
}

/// Condition number of the separable form `C` used as a preconditioner for the
/// full `H²` form `B` on the master cube, with forms of degree `w` evaluated by
/// `w + 1`-point GLL quadrature.
pub fn condition_number_study(w: usize) -> Result<f64> {
    if !(1..=32).contains(&w) {
        return Err(Error::OutOfRange(format!("degree {w} outside 1..=32")));
    }
    let (m, k1, k2) = gll_forms_1d(w);
    let e = Mat::from_fn(w + 1, w + 1, |i, j| k1[(i, j)] + k2[(i, j)]);
    let eb = gen_eig(&e, &m)?;
    let p = eb.vectors.transpose().matmul(&k1).matmul(&eb.vectors);
    let id = Mat::identity(w + 1);
    let n1 = w + 1;
    let dims = [n1; 3];
    let mu = &eb.mu;
    let mut dsq = Vec::with_capacity(n1 * n1 * n1);
    for k in 0..n1 {
        for j in 0..n1 {
            for i in 0..n1 {
                dsq.push(1.0 / (mu[i] + mu[j] + mu[k] + 1.0).sqrt());
            }
        }
    }
    // Coupling terms K₁⊗K₁⊗M etc. become P⊗P⊗I in the eigenbasis, where
    // the pencil (E, M) is diagonal; λ_min = 1 is attained on constants.
    let apply = |x: &[f64]| -> Vec<f64> {
        let y: Vec<f64> = x.iter().zip(&dsq).map(|(a, s)| a * s).collect();
        let (mut z, _) = apply3([&p, &p, &id], &y, dims);
        let (z2, _) = apply3([&p, &id, &p], &y, dims);
        let (z3, _) = apply3([&id, &p, &p], &y, dims);
        for i in 0..z.len() {
            z[i] = x[i] + dsq[i] * (z[i] + z2[i] + z3[i]);
        }
        z
    };
    let start: Vec<f64> = (0..n1 * n1 * n1).map(|i| 1.0 + (0.37 * i as f64).sin()).collect();
    Ok(lanczos_max(n1 * n1 * n1, apply, &start, 1e-14))
}
