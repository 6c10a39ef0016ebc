//! Coordinate frames, element catalog, and mesh builders for the regular region
//! and the geometrically graded vertex, edge and vertex-edge neighborhoods.

use std::f64::consts::PI;
use std::io::Write;

use num_dual::{hessian, DualNum};

use crate::error::{Error, Result};

/// Coordinate system in which an element is an axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    /// Cartesian coordinates.
    Regular,
    /// (φ, θ, χ = ln ρ) about a vertex at the origin, polar axis x₃.
    Vertex,
    /// (τ = ln r, θ, x₃) about an edge along the x₃ axis.
    Edge,
    /// (ψ = ln tan φ, θ, ζ = ln x₃) where a vertex and an edge meet.
    VertexEdge,
}

impl Frame {
    pub fn name(self) -> &'static str {
        match self {
            Frame::Regular => "regular",
            Frame::Vertex => "vertex",
            Frame::Edge => "edge",
            Frame::VertexEdge => "vertex-edge",
        }
    }
}

/// Maps frame coordinates to Cartesian coordinates for any dual-number type.
pub fn frame_map<D: DualNum<Primitive = f64> + Copy>(frame: Frame, q: [D; 3]) -> [D; 3] {
    match frame {
        Frame::Regular => q,
        Frame::Vertex => {
            let rho = q[2].exp();
            let s = q[0].sin();
            [rho * s * q[1].cos(), rho * s * q[1].sin(), rho * q[0].cos()]
        }
        Frame::Edge => {
            let r = q[0].exp();
            [r * q[1].cos(), r * q[1].sin(), q[2]]
        }
        Frame::VertexEdge => {
            let x3 = q[2].exp();
            let r = (q[0] + q[2]).exp();
            [r * q[1].cos(), r * q[1].sin(), x3]
        }
    }
}

/// Cartesian position, Jacobian `jac[k][a] = ∂x_k/∂q_a` and second derivatives
/// `hess[k][a][b] = ∂²x_k/∂q_a∂q_b` of a frame map at a point.
#[derive(Debug, Clone, Copy)]
pub struct FrameGeometry {
    pub x: [f64; 3],
    pub jac: [[f64; 3]; 3],
    pub hess: [[[f64; 3]; 3]; 3],
}

pub fn frame_geometry(frame: Frame, q: [f64; 3]) -> FrameGeometry {
    if frame == Frame::Regular {
        return FrameGeometry {
            x: q,
            jac: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            hess: [[[0.0; 3]; 3]; 3],
        };
    }
    let mut g = FrameGeometry { x: [0.0; 3], jac: [[0.0; 3]; 3], hess: [[[0.0; 3]; 3]; 3] };
    let qv = nalgebra::SVector::<f64, 3>::from(q);
    for k in 0..3 {
        let (v, grad, h) = hessian(|p| frame_map(frame, [p[0], p[1], p[2]])[k], &qv);
        g.x[k] = v;
        for a in 0..3 {
            g.jac[k][a] = grad[a];
            for b in 0..3 {
                g.hess[k][a][b] = h[(a, b)];
            }
        }
    }
    g
}

/// Frame coordinates to Cartesian coordinates.
pub fn frame_to_cartesian(frame: Frame, q: [f64; 3]) -> Result<[f64; 3]> {
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::OutOfRange(format!("non-finite frame coordinates {q:?}")));
    }
    if frame == Frame::Vertex && !(q[0] > 0.0 && q[0] < PI) {
        return Err(Error::OutOfRange(format!("polar angle {} outside (0, π)", q[0])));
    }
    Ok(frame_map(frame, q))
}

/// Cartesian coordinates to frame coordinates; the azimuth is returned in [0, 2π).
pub fn cartesian_to_frame(frame: Frame, x: [f64; 3]) -> Result<[f64; 3]> {
    let r = x[0].hypot(x[1]);
    let theta = {
        let t = x[1].atan2(x[0]);
        if t < 0.0 {
            t + 2.0 * PI
        } else {
            t
        }
    };
    match frame {
        Frame::Regular => Ok(x),
        Frame::Vertex => {
            let rho = (r * r + x[2] * x[2]).sqrt();
            if rho == 0.0 || r == 0.0 {
                return Err(Error::OutOfRange("point on the polar axis or at the vertex".into()));
            }
            Ok([(x[2] / rho).acos(), theta, rho.ln()])
        }
        Frame::Edge => {
            if r == 0.0 {
                return Err(Error::OutOfRange("r = 0 has no finite log-radius".into()));
            }
            Ok([r.ln(), theta, x[2]])
        }
        Frame::VertexEdge => {
            if r == 0.0 || x[2] <= 0.0 {
                return Err(Error::OutOfRange("vertex-edge frame needs r > 0 and x3 > 0".into()));
            }
            Ok([(r / x[2]).ln(), theta, x[2].ln()])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Standard,
    /// Single constant shared by all corner elements of a vertex.
    CornerConstant,
    /// Polynomial in the third frame coordinate only.
    CornerRadial1D,
}

/// What lies across one face of an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceLink {
    Interior {
        elem: usize,
        face: usize,
    },
    /// Domain boundary; the label is `2 * axis + side` of the outward normal in
    /// the element's frame.
    Boundary(u8),
    /// Face of infinite measure in frame coordinates; excluded from the functional.
    Truncated,
}

#[derive(Debug, Clone)]
pub struct Element {
    pub id: usize,
    pub frame: Frame,
    pub kind: ElementKind,
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub degrees: [usize; 3],
    /// Indexed by `2 * axis + side` (side 0 is the low face).
    pub faces: [FaceLink; 6],
    pub block: usize,
}

impl Element {
    pub fn is_finite(&self) -> bool {
        self.lo.iter().chain(&self.hi).all(|v| v.is_finite())
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    /// A face is finite when its tangential extents and its position are finite.
    pub fn face_is_finite(&self, face: usize) -> bool {
        let axis = face / 2;
        let pos = if face % 2 == 0 { self.lo[axis] } else { self.hi[axis] };
        pos.is_finite()
            && crate::tensor::tangential_axes(axis).iter().all(|&t| self.lo[t].is_finite() && self.hi[t].is_finite())
    }
}

/// Affine map from the master cube to a finite element box in frame coordinates.
#[derive(Debug, Clone, Copy)]
pub struct ElementMap {
    pub frame: Frame,
    pub center: [f64; 3],
    pub half: [f64; 3],
}

impl ElementMap {
    pub fn frame_point(&self, lambda: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|d| self.center[d] + self.half[d] * lambda[d])
    }

    pub fn cartesian(&self, lambda: [f64; 3]) -> [f64; 3] {
        frame_map(self.frame, self.frame_point(lambda))
    }

    /// Cartesian volume factor dx / dλ.
    pub fn jacobian(&self, lambda: [f64; 3]) -> f64 {
        let g = frame_geometry(self.frame, self.frame_point(lambda));
        det3(&g.jac) * self.half.iter().product::<f64>()
    }
}

pub fn element_map(e: &Element) -> Result<ElementMap> {
    if !e.is_finite() {
        return Err(Error::SemiInfinite(e.id));
    }
    Ok(ElementMap {
        frame: e.frame,
        center: [0, 1, 2].map(|d| 0.5 * (e.lo[d] + e.hi[d])),
        half: [0, 1, 2].map(|d| 0.5 * (e.hi[d] - e.lo[d])),
    })
}

pub fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn inv3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let d = det3(m);
    let c = |i: usize, j: usize| {
        let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
        let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
        m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
    };
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            inv[j][i] = c(i, j) / d;
        }
    }
    inv
}

/// Storage block of unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// Nodal values on a tensor GLL grid of the given degrees.
    Tensor([usize; 3]),
    /// Nodal values of a polynomial in the third frame coordinate.
    Radial1D(usize),
    /// A single shared constant.
    Constant,
}

#[derive(Debug, Clone, Copy)]
pub struct DofBlock {
    pub kind: BlockKind,
    pub offset: usize,
    pub len: usize,
    /// Element whose box defines the block's λ-coordinates (and preconditioner scale).
    pub owner: usize,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub elements: Vec<Element>,
    pub blocks: Vec<DofBlock>,
    pub n_unknowns: usize,
}

impl Mesh {
    /// Degree-of-freedom count in the bookkeeping used by the convergence tables:
    /// W1·W2·W3 per standard element, W per one-dimensional corner block, one per
    /// shared constant.
    pub fn dof_bookkeeping(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| match b.kind {
                BlockKind::Tensor(d) => d[0] * d[1] * d[2],
                BlockKind::Radial1D(w) => w,
                BlockKind::Constant => 1,
            })
            .sum()
    }

    pub fn count_kind(&self, kind: ElementKind) -> usize {
        self.elements.iter().filter(|e| e.kind == kind).count()
    }

    /// Verifies symmetric adjacency and that every face is accounted for.
    pub fn check_adjacency(&self) -> Result<()> {
        for e in &self.elements {
            for (f, link) in e.faces.iter().enumerate() {
                if let FaceLink::Interior { elem, face } = *link {
                    let back = self
                        .elements
                        .get(elem)
                        .ok_or_else(|| Error::InvalidMesh(format!("element {} face {f} names missing {elem}", e.id)))?
                        .faces[face];
                    if back != (FaceLink::Interior { elem: e.id, face: f }) {
                        return Err(Error::InvalidMesh(format!(
                            "asymmetric adjacency between {} face {f} and {elem} face {face}",
                            e.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Writes the element table as CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "id", "frame", "kind", "lo0", "hi0", "lo1", "hi1", "lo2", "hi2", "deg0", "deg1", "deg2", "block", "face0",
            "face1", "face2", "face3", "face4", "face5",
        ])?;
        for e in &self.elements {
            let mut rec = vec![e.id.to_string(), e.frame.name().to_string(), format!("{:?}", e.kind)];
            for d in 0..3 {
                rec.push(format!("{:.17e}", e.lo[d]));
                rec.push(format!("{:.17e}", e.hi[d]));
            }
            rec.extend(e.degrees.iter().map(|d| d.to_string()));
            rec.push(e.block.to_string());
            for link in &e.faces {
                rec.push(match link {
                    FaceLink::Interior { elem, face } => format!("{elem}:{face}"),
                    FaceLink::Boundary(l) => format!("boundary{l}"),
                    FaceLink::Truncated => "truncated".into(),
                });
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Axis-aligned box in Cartesian coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Brick {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

/// Mesh geometry and refinement parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshSpec {
    /// Number of geometric layers N.
    pub layers: usize,
    pub mu_v: f64,
    pub mu_e: f64,
    /// Degree factors for the layer degrees clamp(floor(μ·i), 1, W).
    pub mu1: f64,
    pub mu2: f64,
    /// Degree cap W.
    pub degree: usize,
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Bricks(Vec<Brick>),
    /// Spherical sector ρ < ρ_v with (φ, θ) in a rectangle.
    Vertex {
        rho_v: f64,
        phi: (f64, f64),
        theta: (f64, f64),
        theta_panels: usize,
    },
    /// Cylindrical sector r < z_radius with θ and x₃ ranges.
    Edge {
        z_radius: f64,
        theta: (f64, f64),
        x3: (f64, f64),
        theta_panels: usize,
        axial_panels: usize,
    },
    /// Truncated cone φ < φ_v, 0 < x₃ < ρ_v cos φ_v.
    VertexEdge {
        rho_v: f64,
        phi_v: f64,
        theta: (f64, f64),
        theta_panels: usize,
    },
}

impl MeshSpec {
    pub fn new(domain: Domain, layers: usize, degree: usize) -> Self {
        MeshSpec { layers, mu_v: 0.15, mu_e: 0.15, mu1: 1.0, mu2: 1.0, degree, domain }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.mu_v > 0.0 && self.mu_v < 1.0 && self.mu_e > 0.0 && self.mu_e < 1.0) {
            return bad("geometric ratios must lie in (0, 1)");
        }
        if self.layers == 0 || self.degree == 0 {
            return bad("layers and degree must be at least 1");
        }
        if !(self.mu1 > 0.0 && self.mu2 > 0.0) {
            return bad("degree factors must be positive");
        }
        Ok(())
    }
}

/// Layer degree clamp(floor(μ·i), 1, W).
pub fn layer_degree(mu: f64, i: usize, cap: usize) -> usize {
    ((mu * i as f64).floor() as usize).clamp(1, cap)
}

pub fn build_mesh(spec: &MeshSpec) -> Result<Mesh> {
    spec.validate()?;
    match &spec.domain {
        Domain::Bricks(b) => build_regular_mesh(b, spec.degree),
        Domain::Vertex { .. } => build_vertex_mesh(spec),
        Domain::Edge { .. } => build_edge_mesh(spec),
        Domain::VertexEdge { .. } => build_vertex_edge_mesh(spec),
    }
}

/// Splits a box into `n` equal bricks per direction.
pub fn split_box(lo: [f64; 3], hi: [f64; 3], n: [usize; 3]) -> Vec<Brick> {
    let mut out = Vec::new();
    let at = |d: usize, i: usize| lo[d] + (hi[d] - lo[d]) * i as f64 / n[d] as f64;
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                out.push(Brick { lo: [at(0, i), at(1, j), at(2, k)], hi: [at(0, i + 1), at(1, j + 1), at(2, k + 1)] });
            }
        }
    }
    out
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

/// Regular-frame standard elements on a face-conforming brick list.
pub fn build_regular_mesh(bricks: &[Brick], degree: usize) -> Result<Mesh> {
    if degree == 0 {
        return Err(Error::InvalidArgument("degree must be at least 1".into()));
    }
    let mut elements: Vec<Element> = bricks
        .iter()
        .enumerate()
        .map(|(id, b)| Element {
            id,
            frame: Frame::Regular,
            kind: ElementKind::Standard,
            lo: b.lo,
            hi: b.hi,
            degrees: [degree; 3],
            faces: [0, 1, 2, 3, 4, 5].map(|f| FaceLink::Boundary(f as u8)),
            block: id,
        })
        .collect();
    for b in bricks {
        if (0..3).any(|d| b.hi[d] <= b.lo[d]) {
            return Err(Error::InvalidMesh(format!("degenerate brick {b:?}")));
        }
    }
    let overlap = |a0: f64, a1: f64, b0: f64, b1: f64| a1.min(b1) - a0.max(b0);
    for a in 0..bricks.len() {
        for b in a + 1..bricks.len() {
            let (ba, bb) = (&bricks[a], &bricks[b]);
            let ov: Vec<f64> = (0..3).map(|d| overlap(ba.lo[d], ba.hi[d], bb.lo[d], bb.hi[d])).collect();
            let tol = 1e-12;
            if ov.iter().all(|&o| o > tol) {
                return Err(Error::InvalidMesh(format!("bricks {a} and {b} overlap")));
            }
            for axis in 0..3 {
                let [t1, t2] = crate::tensor::tangential_axes(axis);
                if ov[t1] <= tol || ov[t2] <= tol {
                    continue;
                }
                let (fa, fb) = if close(ba.hi[axis], bb.lo[axis]) {
                    (2 * axis + 1, 2 * axis)
                } else if close(ba.lo[axis], bb.hi[axis]) {
                    (2 * axis, 2 * axis + 1)
                } else {
                    continue;
                };
                let same = [t1, t2].iter().all(|&t| close(ba.lo[t], bb.lo[t]) && close(ba.hi[t], bb.hi[t]));
                if !same {
                    return Err(Error::InvalidMesh(format!("non-conforming interface between bricks {a} and {b}")));
                }
                elements[a].faces[fa] = FaceLink::Interior { elem: b, face: fb };
                elements[b].faces[fb] = FaceLink::Interior { elem: a, face: fa };
            }
        }
    }
    let mut mesh = Mesh { elements, blocks: Vec::new(), n_unknowns: 0 };
    assign_blocks(&mut mesh, |_| None);
    Ok(mesh)
}

/// Assigns storage blocks. `shared(e)` returns a sharing key for corner elements:
/// elements with the same key share one block.
fn assign_blocks(mesh: &mut Mesh, shared: impl Fn(&Element) -> Option<(u8, usize)>) {
    let mut keys: Vec<((u8, usize), usize)> = Vec::new();
    let mut offset = 0;
    for e in mesh.elements.iter_mut() {
        let key = shared(e);
        if let Some(k) = key {
            if let Some(&(_, b)) = keys.iter().find(|(kk, _)| *kk == k) {
                e.block = b;
                continue;
            }
        }
        let kind = match e.kind {
            ElementKind::Standard => BlockKind::Tensor(e.degrees),
            ElementKind::CornerRadial1D => BlockKind::Radial1D(e.degrees[2]),
            ElementKind::CornerConstant => BlockKind::Constant,
        };
        let len = match kind {
            BlockKind::Tensor(d) => (d[0] + 1) * (d[1] + 1) * (d[2] + 1),
            BlockKind::Radial1D(w) => w + 1,
            BlockKind::Constant => 1,
        };
        let b = mesh.blocks.len();
        mesh.blocks.push(DofBlock { kind, offset, len, owner: e.id });
        offset += len;
        e.block = b;
        if let Some(k) = key {
            keys.push((k, b));
        }
    }
    mesh.n_unknowns = offset;
}

/// Tensor grid of frame boxes with grid adjacency. `cell` gives kind and degrees
/// for cell (i, j, k).
fn grid_mesh(
    frame: Frame,
    breaks: [&[f64]; 3],
    cell: impl Fn(usize, usize, usize) -> (ElementKind, [usize; 3]),
) -> Vec<Element> {
    let n = [breaks[0].len() - 1, breaks[1].len() - 1, breaks[2].len() - 1];
    let id = |i: usize, j: usize, k: usize| i + n[0] * (j + n[1] * k);
    let mut out = Vec::new();
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                let (kind, degrees) = cell(i, j, k);
                let idx = [i, j, k];
                let lo = [breaks[0][i], breaks[1][j], breaks[2][k]];
                let hi = [breaks[0][i + 1], breaks[1][j + 1], breaks[2][k + 1]];
                let mut faces = [FaceLink::Truncated; 6];
                for axis in 0..3 {
                    for side in 0..2 {
                        let f = 2 * axis + side;
                        let mut nb = idx;
                        let inside = if side == 0 {
                            if idx[axis] == 0 {
                                false
                            } else {
                                nb[axis] -= 1;
                                true
                            }
                        } else if idx[axis] + 1 == n[axis] {
                            false
                        } else {
                            nb[axis] += 1;
                            true
                        };
                        faces[f] = if inside {
                            FaceLink::Interior { elem: id(nb[0], nb[1], nb[2]), face: 2 * axis + 1 - side }
                        } else {
                            FaceLink::Boundary(f as u8)
                        };
                    }
                }
                out.push(Element { id: id(i, j, k), frame, kind, lo, hi, degrees, faces, block: 0 });
            }
        }
    }
    for e in out.iter_mut() {
        for f in 0..6 {
            if !e.face_is_finite(f) {
                e.faces[f] = FaceLink::Truncated;
            }
        }
    }
    out
}

fn uniform_breaks(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

/// Geometric radial breakpoints `scale · μ^{N+1-j}` for j = 1..N+1.
pub fn geometric_breaks(scale: f64, mu: f64, layers: usize) -> Vec<f64> {
    (1..=layers + 1).map(|j| scale * mu.powi((layers + 1 - j) as i32)).collect()
}

pub fn build_vertex_mesh(spec: &MeshSpec) -> Result<Mesh> {
    let Domain::Vertex { rho_v, phi, theta, theta_panels } = spec.domain else {
        return Err(Error::InvalidArgument("vertex mesh needs a vertex domain".into()));
    };
    if !(phi.0 > 0.0 && phi.1 < PI && phi.0 < phi.1 && theta.0 < theta.1 && rho_v > 0.0 && theta_panels >= 1) {
        return Err(Error::InvalidArgument("invalid vertex neighborhood".into()));
    }
    let n = spec.layers;
    let mut chi = vec![f64::NEG_INFINITY];
    chi.extend(geometric_breaks(rho_v, spec.mu_v, n).iter().map(|r| r.ln()));
    let phis = [phi.0, phi.1];
    let thetas = uniform_breaks(theta.0, theta.1, theta_panels);
    let w = spec.degree;
    let mu1 = spec.mu1;
    let elements = grid_mesh(Frame::Vertex, [&phis, &thetas, &chi], |_, _, k| {
        if k == 0 {
            (ElementKind::CornerConstant, [0, 0, 0])
        } else {
            let d = layer_degree(mu1, k, w);
            (ElementKind::Standard, [d; 3])
        }
    });
    let mut mesh = Mesh { elements, blocks: Vec::new(), n_unknowns: 0 };
    assign_blocks(&mut mesh, |e| (e.kind == ElementKind::CornerConstant).then_some((0, 0)));
    Ok(mesh)
}

pub fn build_edge_mesh(spec: &MeshSpec) -> Result<Mesh> {
    let Domain::Edge { z_radius, theta, x3, theta_panels, axial_panels } = spec.domain else {
        return Err(Error::InvalidArgument("edge mesh needs an edge domain".into()));
    };
    if !(z_radius > 0.0 && theta.0 < theta.1 && x3.0 < x3.1 && theta_panels >= 1 && axial_panels >= 1) {
        return Err(Error::InvalidArgument("invalid edge neighborhood".into()));
    }
    let n = spec.layers;
    let mut tau = vec![f64::NEG_INFINITY];
    tau.extend(geometric_breaks(z_radius, spec.mu_e, n).iter().map(|r| r.ln()));
    let thetas = uniform_breaks(theta.0, theta.1, theta_panels);
    let zs = uniform_breaks(x3.0, x3.1, axial_panels);
    let w = spec.degree;
    let mu1 = spec.mu1;
    let elements = grid_mesh(Frame::Edge, [&tau, &thetas, &zs], |i, _, _| {
        if i == 0 {
            (ElementKind::CornerRadial1D, [0, 0, w])
        } else {
            let d = layer_degree(mu1, i, w);
            (ElementKind::Standard, [d, d, w])
        }
    });
    let mut mesh = Mesh { elements, blocks: Vec::new(), n_unknowns: 0 };
    // Corner strips of one axial panel share their polynomial across θ panels.
    let nt = theta_panels;
    let per_axial = (n + 1) * nt;
    assign_blocks(&mut mesh, |e| (e.kind == ElementKind::CornerRadial1D).then_some((1, e.id / per_axial)));
    Ok(mesh)
}

pub fn build_vertex_edge_mesh(spec: &MeshSpec) -> Result<Mesh> {
    let Domain::VertexEdge { rho_v, phi_v, theta, theta_panels } = spec.domain else {
        return Err(Error::InvalidArgument("vertex-edge mesh needs a vertex-edge domain".into()));
    };
    if !(rho_v > 0.0 && phi_v > 0.0 && phi_v < PI / 2.0 && theta.0 < theta.1 && theta_panels >= 1) {
        return Err(Error::InvalidArgument("invalid vertex-edge neighborhood".into()));
    }
    let n = spec.layers;
    let mut psi = vec![f64::NEG_INFINITY];
    psi.extend(geometric_breaks(phi_v.tan(), spec.mu_e, n).iter().map(|t| t.ln()));
    let mut zeta = vec![f64::NEG_INFINITY];
    zeta.extend(geometric_breaks(rho_v * phi_v.cos(), spec.mu_v, n).iter().map(|z| z.ln()));
    let thetas = uniform_breaks(theta.0, theta.1, theta_panels);
    let w = spec.degree;
    let (mu1, mu2) = (spec.mu1, spec.mu2);
    let elements = grid_mesh(Frame::VertexEdge, [&psi, &thetas, &zeta], |i, _, k| {
        if k == 0 {
            (ElementKind::CornerConstant, [0, 0, 0])
        } else if i == 0 {
            (ElementKind::CornerRadial1D, [0, 0, layer_degree(mu2, k, w)])
        } else {
            let d = layer_degree(mu1, i, w);
            (ElementKind::Standard, [d, d, layer_degree(mu2, k, w)])
        }
    });
    let mut mesh = Mesh { elements, blocks: Vec::new(), n_unknowns: 0 };
    let per_layer = (n + 1) * theta_panels;
    assign_blocks(&mut mesh, |e| match e.kind {
        ElementKind::CornerConstant => Some((0, 0)),
        ElementKind::CornerRadial1D => Some((1, e.id / per_layer)),
        ElementKind::Standard => None,
    });
    Ok(mesh)
}
