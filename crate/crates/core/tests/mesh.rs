use std::f64::consts::PI;

use hpsem::basis::gll_rule;
use hpsem::mesh::*;
use hpsem::problems::catalog;
use proptest::prelude::*;

fn vertex_domain() -> Domain {
    Domain::Vertex { rho_v: 1.0, phi: (PI / 6.0, PI / 3.0), theta: (0.0, 1.5 * PI), theta_panels: 1 }
}

fn edge_domain(theta_panels: usize, axial_panels: usize) -> Domain {
    Domain::Edge { z_radius: 1.0, theta: (0.0, PI / 2.0), x3: (0.0, 1.0), theta_panels, axial_panels }
}

fn ve_domain(theta_panels: usize) -> Domain {
    Domain::VertexEdge { rho_v: 1.0, phi_v: PI / 6.0, theta: (0.0, 1.5 * PI), theta_panels }
}

fn uniform(domain: Domain, layers: usize, degree: usize) -> MeshSpec {
    let mut s = MeshSpec::new(domain, layers, degree);
    s.mu1 = 100.0;
    s.mu2 = 100.0;
    s
}

fn face_counts(m: &Mesh) -> (usize, usize, usize) {
    let (mut interior, mut boundary, mut truncated) = (0, 0, 0);
    for e in &m.elements {
        for f in &e.faces {
            match f {
                FaceLink::Interior { .. } => interior += 1,
                FaceLink::Boundary(_) => boundary += 1,
                FaceLink::Truncated => truncated += 1,
            }
        }
    }
    (interior / 2, boundary, truncated)
}

/// Integral of the element Jacobian over the master cube by tensor GLL quadrature.
fn quadrature_volume(e: &Element) -> f64 {
    let r = gll_rule(12).unwrap();
    let map = element_map(e).unwrap();
    let mut v = 0.0;
    for (a, wa) in r.nodes.iter().zip(&r.weights) {
        for (b, wb) in r.nodes.iter().zip(&r.weights) {
            for (c, wc) in r.nodes.iter().zip(&r.weights) {
                v += wa * wb * wc * map.jacobian([*a, *b, *c]);
            }
        }
    }
    v
}

#[test]
fn cube_split_counts_faces() {
    let m = build_regular_mesh(&split_box([-1.0; 3], [1.0; 3], [2, 2, 2]), 2).unwrap();
    assert_eq!(m.elements.len(), 8);
    assert_eq!(face_counts(&m), (12, 24, 0));
    m.check_adjacency().unwrap();
    assert_eq!(m.dof_bookkeeping(), 64);
    let m = build_regular_mesh(&split_box([-1.0; 3], [1.0; 3], [1, 1, 1]), 4).unwrap();
    assert_eq!(m.n_unknowns, 125);
}

#[test]
fn catalog_box_meshes() {
    let p = catalog("laplace-dirichlet-cube").unwrap();
    let m = build_mesh(&MeshSpec::new(p.geometry.domain(Some(0.5)).unwrap(), 1, 2)).unwrap();
    assert_eq!(m.elements.len(), 8);
    let p = catalog("poisson-homogeneous").unwrap();
    let m = build_mesh(&MeshSpec::new(p.geometry.domain(None).unwrap(), 1, 2)).unwrap();
    assert_eq!(m.dof_bookkeeping(), 64);
    let p = catalog("varcoef-Lshape").unwrap();
    let m = build_mesh(&MeshSpec::new(p.geometry.domain(None).unwrap(), 1, 2)).unwrap();
    assert_eq!(m.elements.len(), 24);
    m.check_adjacency().unwrap();
}

#[test]
fn edge_mesh_layout_and_breakpoints() {
    let m = build_mesh(&MeshSpec::new(edge_domain(1, 1), 3, 4)).unwrap();
    assert_eq!(m.count_kind(ElementKind::Standard), 3);
    assert_eq!(m.count_kind(ElementKind::CornerRadial1D), 1);
    let mut r: Vec<f64> = m.elements.iter().map(|e| e.hi[0].exp()).collect();
    r.sort_by(f64::total_cmp);
    for (a, b) in r.iter().zip([0.003375, 0.0225, 0.15, 1.0]) {
        assert!((a - b).abs() < 1e-14, "{r:?}");
    }
    let finite: Vec<&Element> = m.elements.iter().filter(|e| e.is_finite()).collect();
    for e in &finite {
        assert!((e.extent(0) + 0.15f64.ln()).abs() < 1e-12);
    }
}

#[test]
fn vertex_mesh_layout() {
    let m = build_mesh(&MeshSpec::new(vertex_domain(), 2, 3)).unwrap();
    assert_eq!(m.count_kind(ElementKind::Standard), 2);
    assert_eq!(m.count_kind(ElementKind::CornerConstant), 1);
    m.check_adjacency().unwrap();
    // uniform degree W on N = W - 1 layers
    let dofs: Vec<usize> =
        (2..=6).map(|w| build_mesh(&uniform(vertex_domain(), w - 1, w)).unwrap().dof_bookkeeping()).collect();
    assert_eq!(dofs, vec![9, 55, 193, 501, 1081]);
}

#[test]
fn vertex_edge_mesh_layout() {
    let m = build_mesh(&MeshSpec::new(ve_domain(1), 2, 3)).unwrap();
    assert_eq!(m.elements.len(), 9);
    assert_eq!(m.count_kind(ElementKind::CornerConstant), 3);
    assert_eq!(m.count_kind(ElementKind::CornerRadial1D), 2);
    assert_eq!(m.count_kind(ElementKind::Standard), 4);
    m.check_adjacency().unwrap();
    let m = build_mesh(&MeshSpec::new(ve_domain(1), 1, 2)).unwrap();
    let mut psi: Vec<f64> = m.elements.iter().map(|e| e.hi[0]).collect();
    psi.sort_by(f64::total_cmp);
    psi.dedup();
    let t = (PI / 6.0).tan();
    assert!((psi[0] - (0.15 * t).ln()).abs() < 1e-14);
    assert!((psi[1] - t.ln()).abs() < 1e-14);
}

#[test]
fn every_catalog_mesh_is_consistent() {
    for name in hpsem::problems::CATALOG {
        let p = catalog(name).unwrap();
        let m = build_mesh(&MeshSpec::new(p.geometry.domain(None).unwrap(), 3, 3)).unwrap();
        m.check_adjacency().unwrap();
        for e in &m.elements {
            for (f, link) in e.faces.iter().enumerate() {
                if !e.face_is_finite(f) {
                    // only faces of infinite measure may be truncated, and they must be
                    assert!(matches!(link, FaceLink::Truncated | FaceLink::Interior { .. }), "{name} {} {f}", e.id);
                }
            }
        }
        let total: usize = m.blocks.iter().map(|b| b.len).sum();
        assert_eq!(total, m.n_unknowns, "{name}");
    }
}

#[test]
fn frame_examples() {
    let x = frame_to_cartesian(Frame::VertexEdge, [0.0, 0.0, 0.0]).unwrap();
    let rho = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    assert!((rho - 2f64.sqrt()).abs() < 1e-14);
    assert!((x[0].atan2(x[2]) - PI / 4.0).abs() < 1e-14);
}

#[test]
fn element_volumes_match_closed_forms() {
    let m = build_regular_mesh(&split_box([0.0; 3], [1.0; 3], [2, 2, 2]), 1).unwrap();
    let map = element_map(&m.elements[0]).unwrap();
    assert!((map.jacobian([0.3, -0.2, 0.9]) - 0.25f64.powi(3)).abs() < 1e-15);

    let m = build_mesh(&MeshSpec::new(edge_domain(2, 1), 2, 2)).unwrap();
    for e in m.elements.iter().filter(|e| e.is_finite()) {
        let (r1, r2) = (e.lo[0].exp(), e.hi[0].exp());
        let want = 0.5 * (r2 * r2 - r1 * r1) * e.extent(1) * e.extent(2);
        assert!((quadrature_volume(e) - want).abs() < 1e-10 * want);
    }
    let m = build_mesh(&MeshSpec::new(vertex_domain(), 2, 2)).unwrap();
    for e in m.elements.iter().filter(|e| e.is_finite()) {
        let (p1, p2) = (e.lo[0], e.hi[0]);
        let (r1, r2) = (e.lo[2].exp(), e.hi[2].exp());
        let want = (r2.powi(3) - r1.powi(3)) / 3.0 * (p1.cos() - p2.cos()) * e.extent(1);
        assert!((quadrature_volume(e) - want).abs() < 1e-10 * want);
    }
    let m = build_mesh(&MeshSpec::new(ve_domain(1), 2, 2)).unwrap();
    for e in m.elements.iter().filter(|e| e.is_finite()) {
        let (t1, t2) = (e.lo[0].exp(), e.hi[0].exp());
        let (z1, z2) = (e.lo[2].exp(), e.hi[2].exp());
        let want = 0.5 * (t2 * t2 - t1 * t1) * (z2.powi(3) - z1.powi(3)) / 3.0 * e.extent(1);
        assert!((quadrature_volume(e) - want).abs() < 1e-10 * want);
    }
}

#[test]
fn semi_infinite_elements_have_no_map() {
    let m = build_mesh(&MeshSpec::new(edge_domain(1, 1), 2, 2)).unwrap();
    let corner = m.elements.iter().find(|e| !e.is_finite()).unwrap();
    assert!(element_map(corner).is_err());
}

#[test]
fn csv_export_has_one_row_per_element() {
    let m = build_mesh(&MeshSpec::new(ve_domain(2), 2, 2)).unwrap();
    let mut buf = Vec::new();
    m.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), m.elements.len() + 1);
    assert!(text.starts_with("id,frame,kind"));
}

#[test]
fn invalid_specs_are_rejected() {
    let mut s = MeshSpec::new(vertex_domain(), 2, 2);
    s.mu_v = 1.5;
    assert!(build_mesh(&s).is_err());
    assert!(build_mesh(&MeshSpec::new(vertex_domain(), 0, 2)).is_err());
    let bad = Domain::Vertex { rho_v: 1.0, phi: (0.0, 1.0), theta: (0.0, 1.0), theta_panels: 1 };
    assert!(build_mesh(&MeshSpec::new(bad, 2, 2)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn geometric_grading(mu in 0.05f64..0.9, layers in 1usize..8) {
        let b = geometric_breaks(1.0, mu, layers);
        prop_assert_eq!(b.len(), layers + 1);
        prop_assert!((b[layers] - 1.0).abs() < 1e-15);
        for j in 1..layers {
            let ratio = (b[j] - b[j - 1]) / (b[j + 1] - b[j]);
            prop_assert!((ratio - mu).abs() < 1e-12);
        }
    }

    #[test]
    fn element_counts(layers in 1usize..6, degree in 1usize..5, it in 1usize..4, ia in 1usize..3) {
        let v = Domain::Vertex { rho_v: 1.0, phi: (0.3, 1.2), theta: (0.0, 2.0), theta_panels: it };
        let m = build_mesh(&MeshSpec::new(v, layers, degree)).unwrap();
        prop_assert_eq!(m.elements.len(), it * (layers + 1));
        m.check_adjacency().unwrap();
        let m = build_mesh(&MeshSpec::new(edge_domain(it, ia), layers, degree)).unwrap();
        prop_assert_eq!(m.elements.len(), it * ia * (layers + 1));
        m.check_adjacency().unwrap();
        let m = build_mesh(&MeshSpec::new(ve_domain(it), layers, degree)).unwrap();
        prop_assert_eq!(m.elements.len(), it * (layers + 1) * (layers + 1));
        m.check_adjacency().unwrap();
    }

    #[test]
    fn degrees_grow_outward(layers in 1usize..8, cap in 1usize..8, mu in 0.3f64..3.0) {
        let mut s = MeshSpec::new(vertex_domain(), layers, cap);
        s.mu1 = mu;
        let m = build_mesh(&s).unwrap();
        let mut layer_deg: Vec<(f64, usize)> =
            m.elements.iter().filter(|e| e.kind == ElementKind::Standard).map(|e| (e.lo[2], e.degrees[0])).collect();
        layer_deg.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in layer_deg.windows(2) {
            prop_assert!(w[0].1 <= w[1].1);
        }
        for (i, (_, d)) in layer_deg.iter().enumerate() {
            prop_assert_eq!(*d, layer_degree(mu, i + 1, cap));
            prop_assert!(*d >= 1 && *d <= cap);
        }
    }

    #[test]
    fn frame_maps_round_trip(a in 0.1f64..1.4, th in 0.0f64..6.0, c in -5.0f64..1.0) {
        for (f, q) in [(Frame::Vertex, [a, th, c]), (Frame::Edge, [c, th, a]), (Frame::VertexEdge, [c, th, c * 0.5])] {
            let x = frame_to_cartesian(f, q).unwrap();
            let back = cartesian_to_frame(f, x).unwrap();
            prop_assert!((back[0] - q[0]).abs() < 1e-10);
            prop_assert!((back[2] - q[2]).abs() < 1e-10);
            // θ is defined up to a full turn
            let dth = (back[1] - q[1]).rem_euclid(2.0 * PI);
            prop_assert!(dth.min(2.0 * PI - dth) < 1e-10);
        }
    }
}
