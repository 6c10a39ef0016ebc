use std::f64::consts::PI;

use hpsem::problems::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Closed = fn([f64; 3], f64) -> f64;

fn theta_of(x: [f64; 3], hint: f64) -> f64 {
    let t = x[1].atan2(x[0]);
    t + 2.0 * PI * ((hint - t) / (2.0 * PI)).round()
}

fn rr(x: [f64; 3]) -> f64 {
    x[0].hypot(x[1])
}

fn rho(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// The exact solutions written out independently of the catalog.
fn closed_form(name: &str) -> Closed {
    match name {
        "laplace-dirichlet-cube" => |x, _| {
            let s = 2f64.sqrt() * PI;
            (PI * x[0]).sin() * (PI * x[1]).sin() * (s * x[2]).sinh() / (PI * PI * s.sinh())
        },
        "poisson-homogeneous" => |x, _| (PI * x[0]).sin() * (PI * x[1]).sin() * (PI * x[2]).sin(),
        "poisson-mixed" => {
            |x, _| 2.0 / (PI * PI) * (PI * x[0] / 2.0).sin() * ((PI * x[1] / 2.0).cos() - (PI * x[2] / 2.0).sin())
        }
        "helmholtz-mixed" => |x, _| x[0].exp() * x[1].cos() * x[2].sin(),
        "varcoef-robin" => |x, _| (PI * (x[0] + x[1])).cos() * x[2].exp(),
        "varcoef-Lshape" => |x, _| (PI * (x[0] + x[1] + x[2]) / 2.0).sin() * (PI * x[2] / 2.0).exp(),
        "nonselfadjoint-mixed" => |x, _| ((PI * x[0]).sin() + (PI * x[1] / 2.0).sin()) * (PI * x[2]).cos(),
        "vertex-dirichlet" => |x, _| {
            let phi = (rr(x)).atan2(x[2]);
            rho(x).sqrt() * (phi / 2.0).sin()
        },
        "vertex-mixed" => |x, _| {
            let phi = (rr(x)).atan2(x[2]);
            rho(x).powf(0.1) * (1.0 - rho(x)) * (2.0 * phi).sin()
        },
        "edge-dirichlet" => |x, h| rr(x).powf(1.0 / 3.0) * (theta_of(x, h) / 3.0).sin() * x[2],
        "edge-crack-mixed" => |x, h| rr(x).sqrt() * (theta_of(x, h) / 2.0).sin(),
        "vertexedge-dirichlet" => |x, h| {
            let phi = (rr(x)).atan2(x[2]);
            rho(x).powf(0.75) * phi.sin().sqrt() * (theta_of(x, h) / 2.0).sin()
        },
        other => panic!("no closed form for {other}"),
    }
}

fn spherical(r: f64, phi: f64, th: f64) -> [f64; 3] {
    [r * phi.sin() * th.cos(), r * phi.sin() * th.sin(), r * phi.cos()]
}

/// Random interior point (and θ hint) kept away from singular sets.
fn sample(name: &str, rng: &mut ChaCha8Rng) -> ([f64; 3], f64) {
    let u = |rng: &mut ChaCha8Rng, a: f64, b: f64| rng.gen_range(a..b);
    match name {
        "laplace-dirichlet-cube" => ([u(rng, 0.0, 1.0), u(rng, 0.0, 1.0), u(rng, 0.0, 1.0)], 0.0),
        "varcoef-Lshape" => loop {
            let x = [u(rng, 0.0, 2.0), u(rng, 0.0, 2.0), u(rng, 0.0, 1.0)];
            if x[0] < 1.0 || x[1] < 1.0 {
                break (x, 0.0);
            }
        },
        "vertex-dirichlet" | "vertex-mixed" => {
            let th = u(rng, 0.0, 1.5 * PI);
            (spherical(u(rng, 0.1, 1.0), u(rng, PI / 6.0, PI / 3.0), th), th)
        }
        "edge-dirichlet" => {
            let th = u(rng, 0.0, PI / 2.0);
            let r = u(rng, 0.1, 1.0);
            ([r * th.cos(), r * th.sin(), u(rng, 0.0, 1.0)], th)
        }
        "edge-crack-mixed" => {
            let th = u(rng, 0.05, 2.0 * PI - 0.05);
            let r = u(rng, 0.1, 1.0);
            ([r * th.cos(), r * th.sin(), u(rng, 0.0, 1.0)], th)
        }
        "vertexedge-dirichlet" => {
            let th = u(rng, 0.0, 1.5 * PI);
            (spherical(u(rng, 0.2, 1.0), u(rng, 0.1, PI / 6.0), th), th)
        }
        _ => ([u(rng, -1.0, 1.0), u(rng, -1.0, 1.0), u(rng, -1.0, 1.0)], 0.0),
    }
}

/// Central-difference gradient and Hessian.
fn fd_jet(f: Closed, x: [f64; 3], hint: f64, h: f64) -> ([f64; 3], [[f64; 3]; 3]) {
    let at = |d: [f64; 3]| f([x[0] + d[0], x[1] + d[1], x[2] + d[2]], hint);
    let e = |i: usize, s: f64| {
        let mut d = [0.0; 3];
        d[i] = s;
        d
    };
    let add = |a: [f64; 3], b: [f64; 3]| [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
    let mut g = [0.0; 3];
    let mut hs = [[0.0; 3]; 3];
    let f0 = at([0.0; 3]);
    for i in 0..3 {
        g[i] = (at(e(i, h)) - at(e(i, -h))) / (2.0 * h);
        hs[i][i] = (at(e(i, h)) - 2.0 * f0 + at(e(i, -h))) / (h * h);
        for j in 0..i {
            let v = (at(add(e(i, h), e(j, h))) - at(add(e(i, h), e(j, -h))) - at(add(e(i, -h), e(j, h)))
                + at(add(e(i, -h), e(j, -h))))
                / (4.0 * h * h);
            hs[i][j] = v;
            hs[j][i] = v;
        }
    }
    (g, hs)
}

#[test]
fn catalog_lists_every_problem() {
    assert_eq!(CATALOG.len(), 12);
    for name in CATALOG {
        let p = catalog(name).unwrap();
        assert_eq!(p.name, name);
        assert!(p.exact.is_some());
    }
    assert!(matches!(catalog("no-such-problem"), Err(hpsem::Error::UnknownProblem(_))));
}

#[test]
fn exact_solutions_match_closed_forms_and_satisfy_the_pde() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for name in CATALOG {
        let p = catalog(name).unwrap();
        let f = closed_form(name);
        for _ in 0..100 {
            let (x, hint) = sample(name, &mut rng);
            let jet = p.jet(x, hint).unwrap();
            let u = f(x, hint);
            assert!((jet.u - u).abs() < 1e-12 * (1.0 + u.abs()), "{name} at {x:?}: {} vs {u}", jet.u);
            let (_, hs) = fd_jet(f, x, hint, 1e-4);
            let (g, _) = fd_jet(f, x, hint, 1e-6);
            let scale = 1.0 + g.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for d in 0..3 {
                assert!((jet.grad[d] - g[d]).abs() < 1e-6 * scale, "{name} grad {d}");
            }
            // residual of the PDE with the finite-difference jet
            let c = (p.coeffs)(x);
            let fd = Jet { u, grad: g, hess: hs };
            let hscale = 1.0 + hs.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
            let rhs = p.rhs(x, hint).unwrap();
            assert!((c.apply(&fd) - rhs).abs() < 1e-4 * hscale, "{name} residual at {x:?}");
        }
    }
}

#[test]
fn closed_form_right_hand_sides() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let p = catalog("poisson-homogeneous").unwrap();
        let u = closed_form("poisson-homogeneous")(x, 0.0);
        assert!((p.rhs(x, 0.0).unwrap() - 3.0 * PI * PI * u).abs() < 1e-11);
        let p = catalog("helmholtz-mixed").unwrap();
        let u = closed_form("helmholtz-mixed")(x, 0.0);
        assert!((p.rhs(x, 0.0).unwrap() - 2.0 * u).abs() < 1e-12);
        let p = catalog("poisson-mixed").unwrap();
        let u = closed_form("poisson-mixed")(x, 0.0);
        // each term varies in two directions with wavenumber π/2
        let want = PI * PI / 2.0 * u;
        assert!((p.rhs(x, 0.0).unwrap() - want).abs() < 1e-12);
    }
    for name in ["laplace-dirichlet-cube", "edge-dirichlet", "edge-crack-mixed"] {
        let p = catalog(name).unwrap();
        for _ in 0..50 {
            let (x, h) = sample(name, &mut rng);
            assert!(p.rhs(x, h).unwrap().abs() < 1e-9, "{name} is harmonic");
        }
    }
    // −Δ(ρ^{1/2} sin(φ/2)) = −ρ^{-3/2} (sin(φ/2) + cot φ cos(φ/2)) / 2
    let p = catalog("vertex-dirichlet").unwrap();
    for _ in 0..50 {
        let (x, h) = sample("vertex-dirichlet", &mut rng);
        let phi = rr(x).atan2(x[2]);
        let want = -rho(x).powf(-1.5) * 0.5 * ((phi / 2.0).sin() + (phi / 2.0).cos() / phi.tan());
        let got = p.rhs(x, h).unwrap();
        assert!((got - want).abs() < 1e-11 * (1.0 + want.abs()), "{got} vs {want}");
    }
}

#[test]
fn boundary_data() {
    let p = catalog("edge-crack-mixed").unwrap();
    // label 1 is the outer cylinder r = 1 (upper τ face); ∂u/∂r = ½ sin(θ/2) there
    for th in [0.3f64, 2.0, 4.5, 6.0] {
        let x = [th.cos(), th.sin(), 0.4];
        let n = [th.cos(), th.sin(), 0.0];
        let g = p.neumann(1, x, n, th).unwrap();
        assert!((g - 0.5 * (th / 2.0).sin()).abs() < 1e-13);
    }
    assert!(p.neumann(2, [1.0, 0.0, 0.5], [0.0, -1.0, 0.0], 0.0).is_err());
    let p = catalog("varcoef-robin").unwrap();
    let x = [1.0, 0.2, -0.3];
    let j = p.jet(x, 0.0).unwrap();
    assert!((p.neumann(1, x, [1.0, 0.0, 0.0], 0.0).unwrap() - (j.grad[0] + j.u)).abs() < 1e-14);
    let p = catalog("edge-dirichlet").unwrap();
    // u vanishes on θ = 0 and on x₃ = 0
    assert!(p.dirichlet([0.5, 0.0, 0.7], 0.0).unwrap().abs() < 1e-15);
    assert!(p.dirichlet([0.3, 0.4, 0.0], 0.9).unwrap().abs() < 1e-15);
}

#[test]
fn principal_parts_are_definite_and_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for name in CATALOG {
        let p = catalog(name).unwrap();
        for _ in 0..100 {
            let (x, _) = sample(name, &mut rng);
            let c = (p.coeffs)(x);
            assert!(c.is_symmetric(), "{name}");
            let m = nalgebra::Matrix3::from_fn(|i, j| -c.a[i][j]);
            let eig = m.symmetric_eigen();
            assert!(eig.eigenvalues.iter().all(|&l| l > 0.1), "{name}: {:?}", eig.eigenvalues);
        }
    }
}

#[test]
fn polynomial_replacement_keeps_the_operator() {
    let q = tensor_polynomial(vec![([1, 2, 0], 2.0), ([0, 0, 3], -1.0)]);
    let p = catalog("helmholtz-mixed").unwrap().with_solution(q);
    let x = [0.5, -0.25, 2.0];
    // −Δ(2xy² − z³) + (2xy² − z³) = −(4x − 6z) + 2xy² − z³
    let want = -(4.0 * 0.5 - 12.0) + 2.0 * 0.5 * 0.0625 - 8.0;
    assert!((p.rhs(x, 0.0).unwrap() - want).abs() < 1e-13);
}
