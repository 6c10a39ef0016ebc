//! Discrete fractional Sobolev norms on element faces.
//!
//! Face functions are sampled on a tensor GLL grid over the master square,
//! first tangential index fastest. Every face form used by the functional is a
//! combination `c0·M + c1·K1 + c2·K2` of the L² form `M = w ⊗ w` and the two
//! directional H^{1/2} difference forms `K1 = S ⊗ diag(w)`, `K2 = diag(w) ⊗ S`,
//! where `S` is the 1D form of [`half_difference_form`].

use crate::basis::{diff_matrix, gll_rule, interpolation_matrix, Basis1D, GllRule};
use crate::dense::{dot, Mat};
use crate::mesh::{Element, Frame};
use crate::tensor::{add_face, apply2, apply_axis, slice_face, tangential_axes};
use crate::{Error, Result};

/// 1D divided-difference form:
/// `Σ_{i≠i'} w_i w_i' ((l_i − l_i')/(ξ_i − ξ_i'))² + Σ_i w_i² (l'(ξ_i))²`,
/// the derivative in the diagonal term taken with the differentiation matrix.
pub fn half_difference_form(rule: &GllRule) -> Mat {
    let n = rule.nodes.len();
    let (x, w) = (&rule.nodes, &rule.weights);
    let d = diff_matrix(rule).entries;
    let mut s = Mat::zeros(n, n);
    for i in 0..n {
        for ip in 0..n {
            if ip == i {
                continue;
            }
            let c = w[i] * w[ip] / (x[i] - x[ip]).powi(2);
            s[(i, i)] += c;
            s[(ip, ip)] += c;
            s[(i, ip)] -= c;
            s[(ip, i)] -= c;
        }
    }
    for i in 0..n {
        let c = w[i] * w[i];
        for a in 0..n {
            for b in 0..n {
                s[(a, b)] += c * d[(i, a)] * d[(i, b)];
            }
        }
    }
    s
}

/// Tensor face grid with its 1D forms.
#[derive(Debug, Clone)]
pub struct FaceGrid {
    pub rules: [GllRule; 2],
    pub diff: [Mat; 2],
    pub half: [Mat; 2],
}

impl FaceGrid {
    pub fn new(orders: [usize; 2]) -> Result<Self> {
        let r0 = gll_rule(orders[0])?;
        let r1 = gll_rule(orders[1])?;
        Ok(FaceGrid {
            diff: [diff_matrix(&r0).entries, diff_matrix(&r1).entries],
            half: [half_difference_form(&r0), half_difference_form(&r1)],
            rules: [r0, r1],
        })
    }

    pub fn dims(&self) -> [usize; 2] {
        [self.rules[0].nodes.len(), self.rules[1].nodes.len()]
    }

    pub fn len(&self) -> usize {
        let d = self.dims();
        d[0] * d[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(c0·M + c1·K1 + c2·K2) x`.
    pub fn apply_form(&self, c: [f64; 3], x: &[f64]) -> Vec<f64> {
        let dims = self.dims();
        let (w0, w1) = (&self.rules[0].weights, &self.rules[1].weights);
        let mut out = vec![0.0; x.len()];
        if c[0] != 0.0 {
            for b in 0..dims[1] {
                for a in 0..dims[0] {
                    out[a + dims[0] * b] += c[0] * w0[a] * w1[b] * x[a + dims[0] * b];
                }
            }
        }
        if c[1] != 0.0 {
            let y = apply2(&self.half[0], &Mat::diag(w1), x, dims);
            out.iter_mut().zip(&y).for_each(|(o, v)| *o += c[1] * v);
        }
        if c[2] != 0.0 {
            let y = apply2(&Mat::diag(w0), &self.half[1], x, dims);
            out.iter_mut().zip(&y).for_each(|(o, v)| *o += c[2] * v);
        }
        out
    }

    pub fn quad(&self, c: [f64; 3], x: &[f64]) -> f64 {
        dot(x, &self.apply_form(c, x))
    }

    /// Spectral derivative along tangential direction `t` (0 or 1) in master units.
    pub fn derivative(&self, t: usize, x: &[f64]) -> Vec<f64> {
        let dims = self.dims();
        let id = |n: usize| Mat::identity(n);
        if t == 0 {
            apply2(&self.diff[0], &id(dims[1]), x, dims)
        } else {
            apply2(&id(dims[0]), &self.diff[1], x, dims)
        }
    }
}

/// Form coefficients of the master-square H^{1/2} norm.
pub const H_HALF: [f64; 3] = [1.0, 1.0, 1.0];
/// Form coefficients of the master-square L² norm.
pub const L2: [f64; 3] = [1.0, 0.0, 0.0];

/// Dense matrix of the master-square H^{1/2} form on an isotropic grid.
pub fn h_half_form(rule: &GllRule) -> Mat {
    let n = rule.nodes.len();
    let grid = FaceGrid::new([rule.order, rule.order]).expect("valid rule");
    let mut h = Mat::zeros(n * n, n * n);
    for col in 0..n * n {
        let mut e = vec![0.0; n * n];
        e[col] = 1.0;
        for (row, v) in grid.apply_form(H_HALF, &e).into_iter().enumerate() {
            h[(row, col)] = v;
        }
    }
    h
}

/// `‖u‖²_0 + ‖∂u/∂λ1‖²_{1/2} + ‖∂u/∂λ2‖²_{1/2}` on the master square.
pub fn h_three_half_norm_sq(grid: &FaceGrid, u: &[f64], du1: &[f64], du2: &[f64]) -> f64 {
    grid.quad(L2, u) + grid.quad(H_HALF, du1) + grid.quad(H_HALF, du2)
}

/// Frame-specific face weights, each the supremum over the closed face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceWeights {
    /// sup e^χ on a vertex face.
    pub r: f64,
    /// sup sin φ on a vertex-edge face.
    pub e: f64,
    /// sup e^ζ on a vertex-edge face.
    pub f: f64,
    /// sup e^τ on an edge face.
    pub g: f64,
    /// Companion factor of the L² jump term: G on x₃-normal edge faces, E on
    /// ζ-normal vertex-edge faces, 1 otherwise.
    pub h: f64,
}

impl FaceWeights {
    pub const ONE: FaceWeights = FaceWeights { r: 1.0, e: 1.0, f: 1.0, g: 1.0, h: 1.0 };
}

/// Weights of the face of `e` normal to `axis`. The face box is the element box
/// collapsed in the normal direction, so the suprema only use the element bounds.
pub fn face_weights(e: &Element, face: usize) -> FaceWeights {
    let axis = face / 2;
    let pos = if face % 2 == 0 { e.lo[axis] } else { e.hi[axis] };
    let top = |d: usize| if d == axis { pos } else { e.hi[d] };
    let mut w = FaceWeights::ONE;
    match e.frame {
        Frame::Regular => {}
        Frame::Vertex => w.r = top(2).exp(),
        Frame::Edge => {
            w.g = top(0).exp();
            if axis == 2 {
                w.h = w.g;
            }
        }
        Frame::VertexEdge => {
            w.e = top(0).exp().atan().sin();
            w.f = top(2).exp();
            if axis == 2 {
                w.h = w.e;
            }
        }
    }
    w
}

/// Form coefficients of the `|||·|||` norm of a face normal to `axis` whose
/// tangential frame extents are `ext`. Regular and vertex faces use the
/// master-square H^{1/2} norm (vertex faces scaled by R); edge and vertex-edge
/// faces use the anisotropic frame norms.
pub fn face_norm_form(frame: Frame, axis: usize, w: &FaceWeights, ext: [f64; 2]) -> [f64; 3] {
    let [h1, h2] = ext;
    let frame_form = |l: f64, d1: f64, d2: f64| [l * h1 * h2 / 4.0, d1 * h2 / 2.0, d2 * h1 / 2.0];
    match frame {
        Frame::Regular => H_HALF,
        Frame::Vertex => H_HALF.map(|c| c * w.r),
        Frame::Edge => {
            if axis == 2 {
                frame_form(w.g, w.g, w.g)
            } else {
                // the second tangential axis is x₃
                frame_form(1.0, 1.0, w.g)
            }
        }
        Frame::VertexEdge => {
            if axis == 2 {
                frame_form(w.e * w.f, w.e * w.f, w.e * w.f)
            } else {
                // the second tangential axis is ζ
                frame_form(w.f, w.f, w.f * w.e)
            }
        }
    }
}

/// L² form coefficients in frame units for a face with tangential extents `ext`.
pub fn frame_l2_form(ext: [f64; 2]) -> [f64; 3] {
    [ext[0] * ext[1] / 4.0, 0.0, 0.0]
}

/// The weighted `|||u|||²` of face samples, rejecting faces of infinite measure.
pub fn weighted_face_norm(
    frame: Frame,
    axis: usize,
    weights: &FaceWeights,
    ext: [f64; 2],
    grid: &FaceGrid,
    values: &[f64],
) -> Result<f64> {
    if !ext.iter().all(|h| h.is_finite()) {
        return Err(Error::OutOfRange("face of infinite measure is excluded from the functional".into()));
    }
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
    }
    Ok(grid.quad(face_norm_form(frame, axis, weights, ext), values))
}

/// Trace operator from one element's nodal block to a face grid.
#[derive(Debug, Clone)]
pub struct SideTrace {
    pub elem: usize,
    pub face: usize,
    pub axis: usize,
    /// Extents of the element's block (degree + 1 per direction).
    pub dims: [usize; 3],
    pos: usize,
    /// Interpolation from the element's tangential nodes to the face nodes.
    interp: [Mat; 2],
    /// Interpolation of the tangential derivative.
    interp_diff: [Mat; 2],
    normal_diff: Mat,
    /// d/dq = scale · d/dλ per direction (0 along infinite directions).
    pub scale: [f64; 3],
}

impl SideTrace {
    pub fn new(e: &Element, face: usize, grid: &FaceGrid) -> Self {
        let axis = face / 2;
        let t = tangential_axes(axis);
        let bases: Vec<Basis1D> = e.degrees.iter().map(|&d| Basis1D::new(d)).collect();
        let interp = [0, 1].map(|s| interpolation_matrix(&bases[t[s]].nodes, &grid.rules[s].nodes));
        let interp_diff = [0, 1].map(|s| interp[s].matmul(&bases[t[s]].diff));
        let pos = if face % 2 == 0 { 0 } else { e.degrees[axis] };
        SideTrace {
            elem: e.id,
            face,
            axis,
            dims: e.degrees.map(|d| d + 1),
            pos,
            interp,
            interp_diff,
            normal_diff: bases[axis].diff.clone(),
            scale: [0, 1, 2].map(|d| {
                let h = e.extent(d);
                if h.is_finite() && e.degrees[d] > 0 {
                    2.0 / h
                } else {
                    0.0
                }
            }),
        }
    }

    fn tangential_mats(&self, deriv: Option<usize>) -> (&Mat, &Mat) {
        let t = tangential_axes(self.axis);
        let m0 = if deriv == Some(t[0]) { &self.interp_diff[0] } else { &self.interp[0] };
        let m1 = if deriv == Some(t[1]) { &self.interp_diff[1] } else { &self.interp[1] };
        (m0, m1)
    }

    /// Face samples of `u` (`deriv = None`) or of `∂u/∂λ_a` (`deriv = Some(a)`).
    pub fn trace(&self, u: &[f64], deriv: Option<usize>) -> Vec<f64> {
        let t = tangential_axes(self.axis);
        let face = if deriv == Some(self.axis) {
            let (du, _) = apply_axis(&self.normal_diff, u, self.dims, self.axis);
            slice_face(&du, self.dims, self.axis, self.pos)
        } else {
            slice_face(u, self.dims, self.axis, self.pos)
        };
        let (m0, m1) = self.tangential_mats(deriv);
        apply2(m0, m1, &face, [self.dims[t[0]], self.dims[t[1]]])
    }

    /// Adds the adjoint of [`SideTrace::trace`] applied to `y` into `out`.
    pub fn trace_adjoint(&self, y: &[f64], deriv: Option<usize>, out: &mut [f64]) {
        let (m0, m1) = self.tangential_mats(deriv);
        let face = crate::tensor::apply2_t(m0, m1, y);
        if deriv == Some(self.axis) {
            let mut tmp = vec![0.0; out.len()];
            add_face(&mut tmp, self.dims, self.axis, self.pos, &face);
            let (back, _) = apply_axis(&self.normal_diff.transpose(), &tmp, self.dims, self.axis);
            out.iter_mut().zip(&back).for_each(|(o, v)| *o += v);
        } else {
            add_face(out, self.dims, self.axis, self.pos, &face);
        }
    }
}

/// Jump samples `[u]` and `[∂u/∂q_a]` (frame derivatives) across a shared face,
/// side A minus side B.
pub fn jump_face_values(a: &SideTrace, ua: &[f64], b: &SideTrace, ub: &[f64]) -> Result<[Vec<f64>; 4]> {
    if a.axis != b.axis {
        return Err(Error::InvalidMesh("jump across faces with different normals".into()));
    }
    let diff = |d: Option<usize>| -> Vec<f64> {
        let (sa, sb) = match d {
            None => (1.0, 1.0),
            Some(k) => (a.scale[k], b.scale[k]),
        };
        let ta = a.trace(ua, d);
        let tb = b.trace(ub, d);
        ta.iter().zip(&tb).map(|(x, y)| sa * x - sb * y).collect()
    };
    Ok([diff(None), diff(Some(0)), diff(Some(1)), diff(Some(2))])
}
