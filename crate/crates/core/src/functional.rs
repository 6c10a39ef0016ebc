//! The least-squares functional and its normal-equation residual.
//!
//! The functional is a sum of terms `‖A_t U − b_t‖²_{M_t}`: squared PDE
//! residuals at the fine GLL points of every finite element, and jump or
//! boundary residuals on a fine grid over every finite face, each measured in a
//! diagonal or face form `M_t`. The residual of the normal equations is
//! `r(U) = Σ_t A_tᵀ M_t (A_t U − b_t)`, computed element by element without
//! forming any global matrix.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::basis::{interpolation_matrix, Basis1D, TensorRestriction};
use crate::dense::Mat;
use crate::mesh::{det3, element_map, frame_geometry, inv3, ElementKind, FaceLink, Frame, Mesh};
use crate::norms::{face_norm_form, face_weights, frame_l2_form, FaceGrid, FaceWeights, SideTrace, H_HALF, L2};
use crate::problems::{BoundaryKind, EllipticProblem};
use crate::tensor::{apply3, len3, tangential_axes};
use crate::{Error, Result};

/// Kind of functional term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermKind {
    Pde = 0,
    Jump = 1,
    Dirichlet = 2,
    Neumann = 3,
}

pub const TERM_KINDS: [TermKind; 4] = [TermKind::Pde, TermKind::Jump, TermKind::Dirichlet, TermKind::Neumann];

fn frame_index(f: Frame) -> usize {
    match f {
        Frame::Regular => 0,
        Frame::Vertex => 1,
        Frame::VertexEdge => 2,
        Frame::Edge => 3,
    }
}

pub const FRAMES: [Frame; 4] = [Frame::Regular, Frame::Vertex, Frame::VertexEdge, Frame::Edge];

/// Functional value with its breakdown by region and term kind.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FunctionalValue {
    pub total: f64,
    /// Indexed `[region][kind]` with regions ordered regular, vertex,
    /// vertex-edge, edge and kinds ordered as [`TermKind`].
    pub parts: [[f64; 4]; 4],
}

impl FunctionalValue {
    pub fn part(&self, frame: Frame, kind: TermKind) -> f64 {
        self.parts[frame_index(frame)][kind as usize]
    }

    fn add(&mut self, frame: Frame, kind: TermKind, v: f64) {
        self.parts[frame_index(frame)][kind as usize] += v;
        self.total += v;
    }
}

/// Derivative orders of the ten terms of the pulled-back operator.
const ORDERS: [[usize; 3]; 10] =
    [[2, 0, 0], [0, 2, 0], [0, 0, 2], [1, 1, 0], [1, 0, 1], [0, 1, 1], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, 0]];

/// Coefficients of the operator in master-cube variables at the fine GLL points:
/// `Lu = Σ_t coef[t] · ∂^{ORDERS[t]} u`.
#[derive(Debug, Clone)]
pub struct MappedOperator {
    pub fine_dims: [usize; 3],
    pub coef: [Vec<f64>; 10],
}

struct VolumeTerm {
    elem: usize,
    block: usize,
    frame: Frame,
    coarse_dims: [usize; 3],
    /// `interp · D^o` per axis and derivative order o.
    ops: [[Mat; 3]; 3],
    /// `(D^o)ᵀ` per axis and order on the coarse grid.
    dpow_t: [[Mat; 3]; 3],
    restrict: TensorRestriction,
    op: MappedOperator,
    active: Vec<usize>,
    weight: Vec<f64>,
    rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Coef {
    Const(f64),
    Field(Vec<f64>),
}

impl Coef {
    fn at(&self, p: usize) -> f64 {
        match self {
            Coef::Const(c) => *c,
            Coef::Field(v) => v[p],
        }
    }
}

#[derive(Debug, Clone)]
struct Component {
    /// (side, λ-derivative axis, coefficient)
    terms: Vec<(usize, Option<usize>, Coef)>,
    data: Vec<f64>,
    form: [f64; 3],
}

struct FaceTerm {
    frame: Frame,
    kind: TermKind,
    grid: Arc<FaceGrid>,
    sides: Vec<(SideTrace, usize)>,
    comps: Vec<Component>,
}

enum Term {
    Volume(Box<VolumeTerm>),
    Face(Box<FaceTerm>),
}

impl Term {
    fn blocks(&self) -> Vec<usize> {
        match self {
            Term::Volume(v) => vec![v.block],
            Term::Face(f) => f.sides.iter().map(|s| s.1).collect(),
        }
    }
}

/// A problem discretized on a mesh: every functional term precomputed.
pub struct Discretization {
    pub mesh: Mesh,
    terms: Vec<Term>,
    block_terms: Vec<Vec<usize>>,
}

impl std::fmt::Debug for Discretization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Discretization")
            .field("elements", &self.mesh.elements.len())
            .field("unknowns", &self.mesh.n_unknowns)
            .field("terms", &self.terms.len())
            .finish()
    }
}

/// Pointwise weight `ω` with `∫ ω |Lu − f|² dx` the PDE term of each region.
fn residual_weight(frame: Frame, x: [f64; 3]) -> f64 {
    match frame {
        Frame::Regular => 1.0,
        Frame::Vertex => x[0] * x[0] + x[1] * x[1] + x[2] * x[2],
        Frame::Edge | Frame::VertexEdge => x[0] * x[0] + x[1] * x[1],
    }
}

/// Extra factor on faces shared with a corner element. The corner carries a
/// reduced representation (a constant, or a polynomial along the edge only),
/// so its mismatch with the neighbouring trace does not vanish under
/// refinement. Vertex faces are scaled by the squared distance from the
/// vertex. Edge faces get a single power of the distance from the edge: the
/// squared weight frees the singular companion mode `r^(-1/2)` on
/// Neumann-bounded wedges.
fn corner_interface_weight(frame: Frame, w: &FaceWeights) -> f64 {
    match frame {
        Frame::Regular | Frame::VertexEdge => 1.0,
        Frame::Vertex => w.r * w.r,
        Frame::Edge => w.g,
    }
}

fn theta_hint(frame: Frame, q: [f64; 3]) -> f64 {
    if frame == Frame::Regular {
        0.0
    } else {
        q[1]
    }
}

/// Operator coefficients of `problem` pulled back to the master cube of a finite
/// standard element, at the order-2W GLL points, together with the quadrature
/// weights (including the region weight) and right-hand side samples.
pub fn mapped_operator(
    problem: &EllipticProblem,
    mesh: &Mesh,
    elem: usize,
) -> Result<(MappedOperator, Vec<f64>, Vec<f64>)> {
    let e = &mesh.elements[elem];
    if e.kind != ElementKind::Standard {
        return Err(Error::InvalidArgument(format!("element {elem} carries no PDE term")));
    }
    let map = element_map(e)?;
    let fine = e.degrees.map(|d| Basis1D::new(2 * d));
    let fdims = fine.clone().map(|b| b.len());
    let n = len3(fdims);
    let mut coef: [Vec<f64>; 10] = Default::default();
    for c in coef.iter_mut() {
        c.resize(n, 0.0);
    }
    let mut weight = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let s = [0, 1, 2].map(|d| 1.0 / map.half[d]);
    let half_vol: f64 = map.half.iter().product();
    for k in 0..fdims[2] {
        for j in 0..fdims[1] {
            for i in 0..fdims[0] {
                let p = i + fdims[0] * (j + fdims[1] * k);
                let lam = [fine[0].nodes[i], fine[1].nodes[j], fine[2].nodes[k]];
                let q = map.frame_point(lam);
                let g = frame_geometry(e.frame, q);
                let kinv = inv3(&g.jac);
                let cf = (problem.coeffs)(g.x);
                let mut at = [[0.0; 3]; 3];
                for a in 0..3 {
                    for b in 0..3 {
                        let mut v = 0.0;
                        for kk in 0..3 {
                            for l in 0..3 {
                                v += kinv[a][kk] * cf.a[kk][l] * kinv[b][l];
                            }
                        }
                        at[a][b] = v;
                    }
                }
                let t: [f64; 3] = [0, 1, 2].map(|m| {
                    let mut v = 0.0;
                    for a in 0..3 {
                        for b in 0..3 {
                            v += at[a][b] * g.hess[m][a][b];
                        }
                    }
                    v
                });
                let beta: [f64; 3] = [0, 1, 2].map(|a| (0..3).map(|kk| kinv[a][kk] * (cf.b[kk] - t[kk])).sum());
                coef[0][p] = at[0][0] * s[0] * s[0];
                coef[1][p] = at[1][1] * s[1] * s[1];
                coef[2][p] = at[2][2] * s[2] * s[2];
                coef[3][p] = 2.0 * at[0][1] * s[0] * s[1];
                coef[4][p] = 2.0 * at[0][2] * s[0] * s[2];
                coef[5][p] = 2.0 * at[1][2] * s[1] * s[2];
                coef[6][p] = beta[0] * s[0];
                coef[7][p] = beta[1] * s[1];
                coef[8][p] = beta[2] * s[2];
                coef[9][p] = cf.c;
                let w = fine[0].weights[i] * fine[1].weights[j] * fine[2].weights[k];
                weight[p] = w * half_vol * det3(&g.jac).abs() * residual_weight(e.frame, g.x);
                rhs[p] = problem.rhs(g.x, theta_hint(e.frame, q))?;
            }
        }
    }
    Ok((MappedOperator { fine_dims: fdims, coef }, weight, rhs))
}

fn volume_term(problem: &EllipticProblem, mesh: &Mesh, elem: usize) -> Result<VolumeTerm> {
    let e = &mesh.elements[elem];
    let (op, weight, rhs) = mapped_operator(problem, mesh, elem)?;
    let coarse = e.degrees.map(Basis1D::new);
    let fine = e.degrees.map(|d| Basis1D::new(2 * d));
    let mk = |d: usize| -> ([Mat; 3], [Mat; 3]) {
        let g = interpolation_matrix(&coarse[d].nodes, &fine[d].nodes);
        let d1 = coarse[d].diff.clone();
        let d2 = d1.matmul(&d1);
        let id = Mat::identity(coarse[d].len());
        ([g.clone(), g.matmul(&d1), g.matmul(&d2)], [id, d1.transpose(), d2.transpose()])
    };
    let (o0, t0) = mk(0);
    let (o1, t1) = mk(1);
    let (o2, t2) = mk(2);
    let active = (0..10).filter(|&t| op.coef[t].iter().any(|c| *c != 0.0)).collect();
    Ok(VolumeTerm {
        elem,
        block: e.block,
        frame: e.frame,
        coarse_dims: e.degrees.map(|d| d + 1),
        ops: [o0, o1, o2],
        dpow_t: [t0, t1, t2],
        restrict: TensorRestriction::new(e.degrees, e.degrees.map(|d| 2 * d))?,
        op,
        active,
        weight,
        rhs,
    })
}

impl VolumeTerm {
    fn residual(&self, u: &[f64], with_data: bool) -> Vec<f64> {
        let n = len3(self.op.fine_dims);
        let mut z = if with_data { self.rhs.iter().map(|v| -v).collect() } else { vec![0.0; n] };
        for &t in &self.active {
            let o = ORDERS[t];
            let (y, _) = apply3([&self.ops[0][o[0]], &self.ops[1][o[1]], &self.ops[2][o[2]]], u, self.coarse_dims);
            for ((zp, yp), c) in z.iter_mut().zip(&y).zip(&self.op.coef[t]) {
                *zp += c * yp;
            }
        }
        z
    }

    /// Value and (optionally) the adjoint contribution to the block.
    fn eval(&self, u: &[f64], with_data: bool, grad: bool) -> (f64, Option<Vec<f64>>) {
        let z = self.residual(u, with_data);
        let s: Vec<f64> = z.iter().zip(&self.weight).map(|(a, w)| a * w).collect();
        let value: f64 = s.iter().zip(&z).map(|(a, b)| a * b).sum();
        if !grad {
            return (value, None);
        }
        let mut out = vec![0.0; len3(self.coarse_dims)];
        for &t in &self.active {
            let o = ORDERS[t];
            let y: Vec<f64> = s.iter().zip(&self.op.coef[t]).map(|(a, c)| a * c).collect();
            let coarse = self.restrict.apply(&y).expect("fine grid layout");
            let (back, _) = apply3(
                [&self.dpow_t[0][o[0]], &self.dpow_t[1][o[1]], &self.dpow_t[2][o[2]]],
                &coarse,
                self.coarse_dims,
            );
            out.iter_mut().zip(&back).for_each(|(a, b)| *a += b);
        }
        (value, Some(out))
    }
}

impl FaceTerm {
    fn residuals(&self, blocks: &[&[f64]], with_data: bool) -> Vec<Vec<f64>> {
        let n = self.grid.len();
        let mut cache: HashMap<(usize, Option<usize>), Vec<f64>> = HashMap::new();
        self.comps
            .iter()
            .map(|c| {
                let mut r = if with_data { c.data.iter().map(|v| -v).collect() } else { vec![0.0; n] };
                for (side, d, coef) in &c.terms {
                    let tr = cache.entry((*side, *d)).or_insert_with(|| self.sides[*side].0.trace(blocks[*side], *d));
                    for (p, rp) in r.iter_mut().enumerate() {
                        *rp += coef.at(p) * tr[p];
                    }
                }
                r
            })
            .collect()
    }

    fn eval(&self, blocks: &[&[f64]], with_data: bool, grad: bool) -> (f64, Option<Vec<Vec<f64>>>) {
        let rs = self.residuals(blocks, with_data);
        let mut value = 0.0;
        let mut out: Option<Vec<Vec<f64>>> = grad.then(|| blocks.iter().map(|b| vec![0.0; b.len()]).collect());
        for (c, r) in self.comps.iter().zip(&rs) {
            let s = self.grid.apply_form(c.form, r);
            value += s.iter().zip(r).map(|(a, b)| a * b).sum::<f64>();
            if let Some(out) = out.as_mut() {
                for (side, d, coef) in &c.terms {
                    let y: Vec<f64> = s.iter().enumerate().map(|(p, v)| v * coef.at(p)).collect();
                    self.sides[*side].0.trace_adjoint(&y, *d, &mut out[*side]);
                }
            }
        }
        (value, out)
    }
}

struct FaceBuilder<'a> {
    problem: &'a EllipticProblem,
    mesh: &'a Mesh,
    grids: HashMap<[usize; 2], Arc<FaceGrid>>,
}

impl FaceBuilder<'_> {
    fn grid(&mut self, orders: [usize; 2]) -> Result<Arc<FaceGrid>> {
        if let Some(g) = self.grids.get(&orders) {
            return Ok(g.clone());
        }
        let g = Arc::new(FaceGrid::new(orders)?);
        self.grids.insert(orders, g.clone());
        Ok(g)
    }

    /// Frame coordinates of the face grid points of element `e`, face `f`.
    fn face_points(&self, elem: usize, face: usize, grid: &FaceGrid) -> Vec<[f64; 3]> {
        let e = &self.mesh.elements[elem];
        let axis = face / 2;
        let [t1, t2] = tangential_axes(axis);
        let pos = if face % 2 == 0 { e.lo[axis] } else { e.hi[axis] };
        let mut pts = Vec::with_capacity(grid.len());
        for &b in &grid.rules[1].nodes {
            for &a in &grid.rules[0].nodes {
                let mut q = [0.0; 3];
                q[axis] = pos;
                q[t1] = e.lo[t1] + 0.5 * (a + 1.0) * e.extent(t1);
                q[t2] = e.lo[t2] + 0.5 * (b + 1.0) * e.extent(t2);
                pts.push(q);
            }
        }
        pts
    }

    fn orders(&self, elems: &[usize], axis: usize) -> [usize; 2] {
        tangential_axes(axis).map(|t| {
            let d = elems.iter().map(|&e| self.mesh.elements[e].degrees[t]).max().unwrap_or(1);
            2 * d.max(1)
        })
    }

    fn jump(&mut self, ea: usize, fa: usize, eb: usize, fb: usize) -> Result<FaceTerm> {
        let (a, b) = (&self.mesh.elements[ea], &self.mesh.elements[eb]);
        if a.frame != b.frame {
            return Err(Error::InvalidMesh(format!("elements {ea} and {eb} lie in different frames")));
        }
        let axis = fa / 2;
        let grid = self.grid(self.orders(&[ea, eb], axis))?;
        let sa = SideTrace::new(a, fa, &grid);
        let sb = SideTrace::new(b, fb, &grid);
        let t = tangential_axes(axis);
        let ext = t.map(|d| a.extent(d));
        let w = face_weights(a, fa);
        let norm = face_norm_form(a.frame, axis, &w, ext);
        let (l2, dw) = match a.frame {
            Frame::Regular => (L2, [1.0; 3]),
            Frame::Vertex => (L2.map(|c| c * w.r), [1.0; 3]),
            Frame::Edge => (frame_l2_form(ext).map(|c| c * w.h), [1.0, 1.0, w.g * w.g]),
            Frame::VertexEdge => (frame_l2_form(ext).map(|c| c * w.f * w.h), [1.0, 1.0, w.e * w.e]),
        };
        let n = grid.len();
        let mut comps = vec![Component {
            terms: vec![(0, None, Coef::Const(1.0)), (1, None, Coef::Const(-1.0))],
            data: vec![0.0; n],
            form: l2,
        }];
        for d in 0..3 {
            comps.push(Component {
                terms: vec![(0, Some(d), Coef::Const(sa.scale[d])), (1, Some(d), Coef::Const(-sb.scale[d]))],
                data: vec![0.0; n],
                form: norm.map(|c| c * dw[d]),
            });
        }
        if a.kind != ElementKind::Standard || b.kind != ElementKind::Standard {
            let f = corner_interface_weight(a.frame, &w);
            for c in comps.iter_mut() {
                c.form = c.form.map(|v| v * f);
            }
        }
        let (ba, bb) = (a.block, b.block);
        Ok(FaceTerm { frame: a.frame, kind: TermKind::Jump, grid, sides: vec![(sa, ba), (sb, bb)], comps })
    }

    fn boundary(&mut self, elem: usize, face: usize, label: u8) -> Result<FaceTerm> {
        let e = &self.mesh.elements[elem];
        if e.kind != ElementKind::Standard {
            return Err(Error::InvalidMesh(format!("corner element {elem} has a finite boundary face")));
        }
        let axis = face / 2;
        let grid = self.grid(self.orders(&[elem], axis))?;
        let side = SideTrace::new(e, face, &grid);
        let t = tangential_axes(axis);
        let ext = t.map(|d| e.extent(d));
        let w = face_weights(e, face);
        let norm = face_norm_form(e.frame, axis, &w, ext);
        let pts = self.face_points(elem, face, &grid);
        let bc = *self
            .problem
            .bc
            .get(label as usize)
            .ok_or_else(|| Error::MissingData(format!("no boundary condition for label {label}")))?;
        let frame = e.frame;
        let mut comps = Vec::new();
        let kind = match bc {
            BoundaryKind::Dirichlet => {
                let g: Vec<f64> = pts
                    .iter()
                    .map(|q| self.problem.dirichlet(frame_geometry(frame, *q).x, theta_hint(frame, *q)))
                    .collect::<Result<_>>()?;
                let l2 = match frame {
                    Frame::Regular => L2,
                    Frame::Vertex => L2.map(|c| c * w.r),
                    Frame::Edge => frame_l2_form(ext),
                    Frame::VertexEdge => frame_l2_form(ext).map(|c| c * w.f),
                };
                comps.push(Component { terms: vec![(0, None, Coef::Const(1.0))], data: g.clone(), form: l2 });
                for (s, &d) in t.iter().enumerate() {
                    // λ-derivatives on regular and vertex faces, frame derivatives otherwise
                    let (scale, wt) = match frame {
                        Frame::Regular | Frame::Vertex => (1.0, 1.0),
                        Frame::Edge => (side.scale[d], if d == 2 { w.g * w.g } else { 1.0 }),
                        Frame::VertexEdge => (side.scale[d], if d == 2 { w.e * w.e } else { 1.0 }),
                    };
                    let dg: Vec<f64> = grid.derivative(s, &g).into_iter().map(|v| v * scale).collect();
                    let form = match frame {
                        Frame::Regular => H_HALF,
                        Frame::Vertex => H_HALF.map(|c| c * w.r),
                        _ => norm.map(|c| c * wt),
                    };
                    comps.push(Component { terms: vec![(0, Some(d), Coef::Const(scale))], data: dg, form });
                }
                TermKind::Dirichlet
            }
            BoundaryKind::Robin { beta } => {
                let sign = if face % 2 == 1 { 1.0 } else { -1.0 };
                let mut coefs = [vec![0.0; pts.len()], vec![0.0; pts.len()], vec![0.0; pts.len()]];
                let mut cval = vec![0.0; pts.len()];
                let mut data = vec![0.0; pts.len()];
                for (p, q) in pts.iter().enumerate() {
                    let g = frame_geometry(frame, *q);
                    let k = inv3(&g.jac);
                    let ka = k[axis];
                    let ka_norm = (ka[0] * ka[0] + ka[1] * ka[1] + ka[2] * ka[2]).sqrt();
                    let nrm = ka.map(|v| sign * v / ka_norm);
                    let c = match frame {
                        Frame::Regular => 1.0,
                        _ => {
                            let x1 = [g.jac[0][t[0]], g.jac[1][t[0]], g.jac[2][t[0]]];
                            let x2 = [g.jac[0][t[1]], g.jac[1][t[1]], g.jac[2][t[1]]];
                            let cr = [
                                x1[1] * x2[2] - x1[2] * x2[1],
                                x1[2] * x2[0] - x1[0] * x2[2],
                                x1[0] * x2[1] - x1[1] * x2[0],
                            ];
                            let area = (cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2]).sqrt();
                            let r = g.x[0].hypot(g.x[1]);
                            match frame {
                                Frame::Vertex => area / r,
                                Frame::Edge => area,
                                _ => area / g.x[2],
                            }
                        }
                    };
                    for b in 0..3 {
                        let kb = k[b];
                        coefs[b][p] = c * (nrm[0] * kb[0] + nrm[1] * kb[1] + nrm[2] * kb[2]) * side.scale[b];
                    }
                    cval[p] = c * beta;
                    data[p] = c * self.problem.neumann(label, g.x, nrm, theta_hint(frame, *q))?;
                }
                let mut terms: Vec<(usize, Option<usize>, Coef)> = Vec::new();
                for (b, cb) in coefs.into_iter().enumerate() {
                    if cb.iter().any(|v| *v != 0.0) {
                        terms.push((0, Some(b), Coef::Field(cb)));
                    }
                }
                if beta != 0.0 {
                    terms.push((0, None, Coef::Field(cval)));
                }
                let form = match frame {
                    Frame::Regular => H_HALF,
                    _ => norm,
                };
                comps.push(Component { terms, data, form });
                TermKind::Neumann
            }
        };
        Ok(FaceTerm { frame, kind, grid, sides: vec![(side, e.block)], comps })
    }
}

impl Discretization {
    pub fn new(problem: &EllipticProblem, mesh: Mesh) -> Result<Self> {
        mesh.check_adjacency()?;
        let vol_ids: Vec<usize> =
            mesh.elements.iter().filter(|e| e.kind == ElementKind::Standard && e.is_finite()).map(|e| e.id).collect();
        let volumes: Vec<Result<VolumeTerm>> = vol_ids.par_iter().map(|&i| volume_term(problem, &mesh, i)).collect();
        let mut terms: Vec<Term> = Vec::new();
        for v in volumes {
            terms.push(Term::Volume(Box::new(v?)));
        }
        let mut fb = FaceBuilder { problem, mesh: &mesh, grids: HashMap::new() };
        for e in &mesh.elements {
            for f in 0..6 {
                if !e.face_is_finite(f) {
                    continue;
                }
                match e.faces[f] {
                    FaceLink::Interior { elem, face } => {
                        if (e.id, f) < (elem, face) {
                            terms.push(Term::Face(Box::new(fb.jump(e.id, f, elem, face)?)));
                        }
                    }
                    FaceLink::Boundary(label) => terms.push(Term::Face(Box::new(fb.boundary(e.id, f, label)?))),
                    FaceLink::Truncated => {}
                }
            }
        }
        let mut block_terms = vec![Vec::new(); mesh.blocks.len()];
        for (i, t) in terms.iter().enumerate() {
            for b in t.blocks() {
                if !block_terms[b].contains(&i) {
                    block_terms[b].push(i);
                }
            }
        }
        Ok(Discretization { mesh, terms, block_terms })
    }

    pub fn n_unknowns(&self) -> usize {
        self.mesh.n_unknowns
    }

    fn block<'a>(&self, u: &'a [f64], b: usize) -> &'a [f64] {
        let blk = &self.mesh.blocks[b];
        &u[blk.offset..blk.offset + blk.len]
    }

    fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.mesh.n_unknowns {
            return Err(Error::DimensionMismatch { expected: self.mesh.n_unknowns, got: u.len() });
        }
        Ok(())
    }

    fn eval_term(&self, t: &Term, u: &[f64], with_data: bool, grad: bool) -> (f64, Vec<(usize, Vec<f64>)>) {
        match t {
            Term::Volume(v) => {
                let (val, g) = v.eval(self.block(u, v.block), with_data, grad);
                (val, g.map(|g| vec![(v.block, g)]).unwrap_or_default())
            }
            Term::Face(f) => {
                let blocks: Vec<&[f64]> = f.sides.iter().map(|s| self.block(u, s.1)).collect();
                let (val, g) = f.eval(&blocks, with_data, grad);
                let g = g.map(|g| g.into_iter().zip(&f.sides).map(|(gi, s)| (s.1, gi)).collect()).unwrap_or_default();
                (val, g)
            }
        }
    }

    fn term_tag(t: &Term) -> (Frame, TermKind) {
        match t {
            Term::Volume(v) => (v.frame, TermKind::Pde),
            Term::Face(f) => (f.frame, f.kind),
        }
    }

    /// Evaluates the functional and, when `grad` is set, `Σ A_tᵀ M_t (A_t U − b_t)`.
    fn evaluate(&self, u: &[f64], with_data: bool, grad: bool) -> (FunctionalValue, Vec<f64>) {
        let results: Vec<(f64, Vec<(usize, Vec<f64>)>)> =
            self.terms.par_iter().map(|t| self.eval_term(t, u, with_data, grad)).collect();
        let mut fv = FunctionalValue::default();
        let mut r = if grad { vec![0.0; u.len()] } else { Vec::new() };
        for (t, (val, contrib)) in self.terms.iter().zip(results) {
            let (frame, kind) = Self::term_tag(t);
            fv.add(frame, kind, val);
            for (b, g) in contrib {
                let off = self.mesh.blocks[b].offset;
                for (i, v) in g.into_iter().enumerate() {
                    r[off + i] += v;
                }
            }
        }
        (fv, r)
    }

    /// The functional `R(U)` with its breakdown.
    pub fn functional_value(&self, u: &[f64]) -> Result<FunctionalValue> {
        self.check(u)?;
        Ok(self.evaluate(u, true, false).0)
    }

    /// The homogeneous quadratic form (all data set to zero).
    pub fn quadratic_form(&self, u: &[f64]) -> Result<f64> {
        self.check(u)?;
        Ok(self.evaluate(u, false, false).0.total)
    }

    /// Normal-equation residual `X U − Y G`, half the gradient of the functional.
    pub fn normal_residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check(u)?;
        Ok(self.evaluate(u, true, true).1)
    }

    /// `X p`, the residual of the homogeneous problem.
    pub fn apply_normal(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check(p)?;
        Ok(self.evaluate(p, false, true).1)
    }

    /// Functional value and residual together.
    pub fn value_and_residual(&self, u: &[f64]) -> Result<(FunctionalValue, Vec<f64>)> {
        self.check(u)?;
        Ok(self.evaluate(u, true, true))
    }

    /// `vᵀ X v` for `v` supported on one block, using only the terms touching it.
    pub fn block_quadratic(&self, block: usize, v: &[f64]) -> f64 {
        let mut u = vec![0.0; self.mesh.n_unknowns];
        let blk = &self.mesh.blocks[block];
        u[blk.offset..blk.offset + blk.len].copy_from_slice(v);
        self.block_terms[block].iter().map(|&t| self.eval_term(&self.terms[t], &u, false, false).0).sum()
    }

    /// Concatenated residual samples `A U − b` of all terms, in term order.
    pub fn residual_samples(&self, u: &[f64], with_data: bool) -> Result<Vec<f64>> {
        self.check(u)?;
        let mut out = Vec::new();
        for t in &self.terms {
            match t {
                Term::Volume(v) => out.extend(v.residual(self.block(u, v.block), with_data)),
                Term::Face(f) => {
                    let blocks: Vec<&[f64]> = f.sides.iter().map(|s| self.block(u, s.1)).collect();
                    for r in f.residuals(&blocks, with_data) {
                        out.extend(r);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Applies the block-diagonal weight `M` to a sample vector laid out as in
    /// [`Discretization::residual_samples`].
    pub fn apply_sample_weights(&self, r: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(r.len());
        let mut off = 0;
        for t in &self.terms {
            match t {
                Term::Volume(v) => {
                    let n = v.weight.len();
                    out.extend(r[off..off + n].iter().zip(&v.weight).map(|(a, w)| a * w));
                    off += n;
                }
                Term::Face(f) => {
                    let n = f.grid.len();
                    for c in &f.comps {
                        out.extend(f.grid.apply_form(c.form, &r[off..off + n]));
                        off += n;
                    }
                }
            }
        }
        out
    }

    /// Element whose volume term is `i`-th (test support).
    pub fn volume_elements(&self) -> Vec<usize> {
        self.terms
            .iter()
            .filter_map(|t| match t {
                Term::Volume(v) => Some(v.elem),
                _ => None,
            })
            .collect()
    }
}

/// Explicit normal matrix `X = Aᵀ M A` and right-hand side `Y G = Aᵀ M b`,
/// assembled column by column from the forward sample map (test oracle).
pub fn dense_normal_assembly(disc: &Discretization, limit: usize) -> Result<(Mat, Vec<f64>)> {
    let n = disc.n_unknowns();
    if n > limit {
        return Err(Error::TooLarge { dof: n, limit });
    }
    let zero = vec![0.0; n];
    let b: Vec<f64> = disc.residual_samples(&zero, true)?.into_iter().map(|v| -v).collect();
    let m = b.len();
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            disc.residual_samples(&e, false).expect("layout")
        })
        .collect();
    let a = nalgebra::DMatrix::from_fn(m, n, |i, j| cols[j][i]);
    let wa_cols: Vec<Vec<f64>> = cols.par_iter().map(|c| disc.apply_sample_weights(c)).collect();
    let wa = nalgebra::DMatrix::from_fn(m, n, |i, j| wa_cols[j][i]);
    let x = a.transpose() * &wa;
    let wb = nalgebra::DVector::from_vec(disc.apply_sample_weights(&b));
    let yg = a.transpose() * wb;
    Ok((Mat::from_nalgebra(&x), yg.iter().copied().collect()))
}

/// Builds the default mesh of `problem` with `layers` geometric layers (ignored
/// for box domains) and degree cap `degree`, then discretizes it.
pub fn discretize(problem: &EllipticProblem, layers: usize, degree: usize) -> Result<Discretization> {
    let spec = crate::mesh::MeshSpec::new(problem.geometry.domain(None)?, layers, degree);
    Discretization::new(problem, crate::mesh::build_mesh(&spec)?)
}

/// Frame coordinate used for a degree-0 direction of an unbounded element.
fn deep_point(lo: f64, hi: f64) -> f64 {
    const DEPTH: f64 = 40.0;
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (false, true) => hi - DEPTH,
        (true, false) => lo + DEPTH,
        (false, false) => 0.0,
    }
}

/// Nodal interpolant of `f`, given in frame coordinates, on every block.
pub fn interpolate_frame(mesh: &Mesh, mut f: impl FnMut([f64; 3]) -> f64) -> Vec<f64> {
    let mut u = vec![0.0; mesh.n_unknowns];
    for blk in &mesh.blocks {
        let e = &mesh.elements[blk.owner];
        let bases = e.degrees.map(Basis1D::new);
        let coord = |d: usize, l: f64| -> f64 {
            if e.lo[d].is_finite() && e.hi[d].is_finite() {
                0.5 * (e.lo[d] + e.hi[d]) + 0.5 * (e.hi[d] - e.lo[d]) * l
            } else {
                deep_point(e.lo[d], e.hi[d])
            }
        };
        let dims = e.degrees.map(|d| d + 1);
        let mut p = blk.offset;
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let q = [coord(0, bases[0].nodes[i]), coord(1, bases[1].nodes[j]), coord(2, bases[2].nodes[k])];
                    u[p] = f(q);
                    p += 1;
                }
            }
        }
    }
    u
}

/// Nodal interpolant of the exact solution of `problem`.
pub fn interpolate_exact(problem: &EllipticProblem, mesh: &Mesh) -> Result<Vec<f64>> {
    let frame = problem.frame();
    let mut err = None;
    let u = interpolate_frame(mesh, |q| {
        let x = frame_geometry(frame, q).x;
        match problem.dirichlet(x, theta_hint(frame, q)) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(u),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, build_regular_mesh, MeshSpec};
    use crate::problems::{catalog, tensor_polynomial};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn regular(name: &str, h: f64, degree: usize) -> Discretization {
        let p = catalog(name).unwrap();
        let crate::mesh::Domain::Bricks(b) = p.geometry.domain(Some(h)).unwrap() else { unreachable!() };
        Discretization::new(&p, build_regular_mesh(&b, degree).unwrap()).unwrap()
    }

    fn singular(name: &str, layers: usize, degree: usize) -> Discretization {
        let p = catalog(name).unwrap();
        let spec = MeshSpec::new(p.geometry.domain(None).unwrap(), layers, degree);
        Discretization::new(&p, build_mesh(&spec).unwrap()).unwrap()
    }

    #[test]
    fn interpolated_polynomial_has_zero_functional() {
        let poly = tensor_polynomial(vec![([2, 0, 0], 1.0), ([0, 1, 1], -0.5), ([1, 1, 1], 0.25), ([0, 0, 0], 2.0)]);
        for name in ["poisson-mixed", "helmholtz-mixed"] {
            let p = catalog(name).unwrap().with_solution(poly.clone());
            let crate::mesh::Domain::Bricks(b) = p.geometry.domain(Some(1.0)).unwrap() else { unreachable!() };
            let d = Discretization::new(&p, build_regular_mesh(&b, 3).unwrap()).unwrap();
            let u = interpolate_exact(&p, &d.mesh).unwrap();
            let v = d.functional_value(&u).unwrap();
            assert!(v.total.abs() < 1e-20, "{name}: {v:?}");
            let zero = d.functional_value(&vec![0.0; u.len()]).unwrap();
            assert!(zero.total > 1.0);
        }
    }

    #[test]
    fn breakdown_sums_to_total() {
        let d = regular("poisson-mixed", 1.0, 2);
        let v = d.functional_value(&random_vec(d.n_unknowns(), 1)).unwrap();
        let s: f64 = v.parts.iter().flatten().sum();
        assert!((s - v.total).abs() <= 1e-12 * v.total);
        for k in TERM_KINDS {
            assert!(v.part(Frame::Regular, k) > 0.0, "{k:?}");
        }
        assert_eq!(v.part(Frame::Vertex, TermKind::Pde), 0.0);
    }

    fn check_gradient(d: &Discretization, seed: u64) {
        let n = d.n_unknowns();
        let u = random_vec(n, seed);
        let v = random_vec(n, seed + 100);
        let r = d.normal_residual(&u).unwrap();
        let eps = 1e-5;
        let up: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
        let um: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - eps * b).collect();
        let fd = (d.functional_value(&up).unwrap().total - d.functional_value(&um).unwrap().total) / (2.0 * eps);
        let an = 2.0 * crate::dense::dot(&r, &v);
        assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-12), "fd {fd} analytic {an}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        check_gradient(&regular("poisson-mixed", 1.0, 2), 3);
        check_gradient(&regular("varcoef-robin", 1.0, 2), 4);
        check_gradient(&regular("nonselfadjoint-mixed", 1.0, 2), 5);
        check_gradient(&singular("vertex-mixed", 2, 2), 6);
        check_gradient(&singular("edge-crack-mixed", 2, 2), 7);
        check_gradient(&singular("vertexedge-dirichlet", 2, 2), 8);
    }

    #[test]
    fn residual_is_affine() {
        let d = singular("edge-dirichlet", 2, 2);
        let n = d.n_unknowns();
        let (u, w) = (random_vec(n, 9), random_vec(n, 10));
        let r0 = d.normal_residual(&vec![0.0; n]).unwrap();
        let ru = d.normal_residual(&u).unwrap();
        let xu = d.apply_normal(&u).unwrap();
        for i in 0..n {
            assert!((ru[i] - r0[i] - xu[i]).abs() < 1e-9 * (1.0 + xu[i].abs()));
        }
        // symmetry of X
        let xw = d.apply_normal(&w).unwrap();
        let a = crate::dense::dot(&w, &xu);
        let b = crate::dense::dot(&u, &xw);
        assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
        assert!((d.quadratic_form(&u).unwrap() - crate::dense::dot(&u, &xu)).abs() < 1e-9 * a.abs().max(1.0));
    }

    fn check_dense(d: &Discretization) {
        let (x, yg) = dense_normal_assembly(d, 5000).unwrap();
        let u = random_vec(d.n_unknowns(), 11);
        let r = d.normal_residual(&u).unwrap();
        let xu = x.mul_vec(&u);
        let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..u.len() {
            assert!((xu[i] - yg[i] - r[i]).abs() <= 1e-10 * scale, "row {i}: {} vs {}", xu[i] - yg[i], r[i]);
        }
    }

    #[test]
    fn matrix_free_residual_matches_dense_oracle() {
        check_dense(&regular("poisson-mixed", 2.0, 3));
        check_dense(&regular("varcoef-robin", 1.0, 2));
        check_dense(&singular("edge-crack-mixed", 3, 2));
        check_dense(&singular("vertex-mixed", 2, 2));
    }

    #[test]
    fn dense_assembly_respects_limit() {
        let d = regular("poisson-mixed", 1.0, 2);
        assert!(matches!(dense_normal_assembly(&d, 10), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn block_quadratic_matches_global_form() {
        let d = singular("vertexedge-dirichlet", 2, 2);
        for b in 0..d.mesh.blocks.len() {
            let blk = d.mesh.blocks[b];
            let v = random_vec(blk.len, b as u64);
            let mut u = vec![0.0; d.n_unknowns()];
            u[blk.offset..blk.offset + blk.len].copy_from_slice(&v);
            let g = d.quadratic_form(&u).unwrap();
            assert!((d.block_quadratic(b, &v) - g).abs() <= 1e-12 * g.abs().max(1e-300), "block {b}");
        }
    }
}
