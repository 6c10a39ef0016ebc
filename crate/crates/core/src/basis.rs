//! Legendre polynomials, Gauss-Lobatto-Legendre rules, spectral differentiation,
//! discrete Legendre transforms and the coarse/fine grid transfer operators.

use crate::dense::Mat;
use crate::error::{Error, Result};
use crate::tensor::{apply3, apply_axis, len3, scale_separable};

/// Values `L_0(x), ..., L_n(x)` of the Legendre polynomials normalized by `L_m(1) = 1`.
pub fn legendre_values(n: usize, x: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(n + 1);
    v.push(1.0);
    if n >= 1 {
        v.push(x);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * v[k] - kf * v[k - 1]) / (kf + 1.0);
        v.push(next);
    }
    v
}

/// Returns `(L_n(x), L_n'(x))`.
pub fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let v = legendre_values(n, x);
    // L'_{k+1} = L'_{k-1} + (2k+1) L_k
    let mut d = vec![0.0; n + 1];
    for k in 1..=n {
        let prev = if k >= 2 { d[k - 2] } else { 0.0 };
        d[k] = prev + (2.0 * (k as f64) - 1.0) * v[k - 1];
    }
    (v[n], d[n])
}

/// Coefficients of the derivative of a Legendre expansion.
pub fn legendre_derivative_coeffs(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut d = vec![0.0; n];
    if n < 2 {
        return d;
    }
    // Backward recurrence: d_{k-1} = (2k-1) (c_k + d_{k+1} / (2k+3)).
    for k in (1..n).rev() {
        let above = if k + 1 < n { d[k + 1] / (2.0 * k as f64 + 3.0) } else { 0.0 };
        d[k - 1] = (2.0 * k as f64 - 1.0) * (c[k] + above);
    }
    d
}

/// Gauss-Lobatto-Legendre quadrature rule of order `n` (n + 1 nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct GllRule {
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Builds the GLL rule of order `n`: nodes are the roots of (1 - x²) L_n'(x).
pub fn gll_rule(n: usize) -> Result<GllRule> {
    if n == 0 {
        return Err(Error::InvalidArgument("GLL rule needs order n >= 1".into()));
    }
    let nf = n as f64;
    let mut nodes = vec![0.0; n + 1];
    nodes[0] = -1.0;
    nodes[n] = 1.0;
    for (i, node) in nodes.iter_mut().enumerate().take(n).skip(1) {
        let mut x = -(std::f64::consts::PI * i as f64 / nf).cos();
        for _ in 0..100 {
            let (l, dl) = legendre_and_derivative(n, x);
            // d/dx [(1 - x²) L_n'] = -n(n+1) L_n
            let step = (1.0 - x * x) * dl / (-nf * (nf + 1.0) * l);
            x -= step;
            if step.abs() < 1e-14 {
                break;
            }
        }
        *node = x;
    }
    for i in 0..=n / 2 {
        let s = 0.5 * (nodes[n - i] - nodes[i]);
        nodes[i] = -s;
        nodes[n - i] = s;
    }
    if n % 2 == 0 {
        nodes[n / 2] = 0.0;
    }
    let weights = nodes
        .iter()
        .map(|&x| {
            let (l, _) = legendre_and_derivative(n, x);
            2.0 / (nf * (nf + 1.0) * l * l)
        })
        .collect();
    Ok(GllRule { order: n, nodes, weights })
}

impl GllRule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

/// Spectral differentiation matrix on the nodes of a GLL rule.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffMatrix {
    pub order: usize,
    pub entries: Mat,
}

pub fn diff_matrix(rule: &GllRule) -> DiffMatrix {
    let n = rule.order;
    let ln: Vec<f64> = rule.nodes.iter().map(|&x| legendre_and_derivative(n, x).0).collect();
    let mut d = Mat::zeros(n + 1, n + 1);
    for i in 0..=n {
        let mut row_sum = 0.0;
        for j in 0..=n {
            if i != j {
                let v = ln[i] / (ln[j] * (rule.nodes[i] - rule.nodes[j]));
                d[(i, j)] = v;
                row_sum += v;
            }
        }
        d[(i, i)] = -row_sum;
    }
    DiffMatrix { order: n, entries: d }
}

impl DiffMatrix {
    pub fn apply(&self, nodal: &[f64]) -> Vec<f64> {
        self.entries.mul_vec(nodal)
    }
}

/// Discrete Legendre transform on a GLL grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreTransform {
    pub order: usize,
    /// Normalizing factors γ_m = Σ_i w_i L_m(ξ_i)².
    pub gamma: Vec<f64>,
    /// `vandermonde[(i, m)] = L_m(ξ_i)`.
    pub vandermonde: Mat,
    pub weights: Vec<f64>,
}

impl LegendreTransform {
    pub fn new(rule: &GllRule) -> Self {
        let n = rule.order;
        let gamma = (0..=n).map(|m| if m < n { 1.0 / (m as f64 + 0.5) } else { 2.0 / n as f64 }).collect();
        let mut v = Mat::zeros(n + 1, n + 1);
        for (i, &x) in rule.nodes.iter().enumerate() {
            for (m, lv) in legendre_values(n, x).into_iter().enumerate() {
                v[(i, m)] = lv;
            }
        }
        LegendreTransform { order: n, gamma, vandermonde: v, weights: rule.weights.clone() }
    }

    /// Matrix of the forward transform: modal = F · nodal.
    pub fn forward_matrix(&self) -> Mat {
        let n = self.order;
        Mat::from_fn(n + 1, n + 1, |m, i| self.weights[i] * self.vandermonde[(i, m)] / self.gamma[m])
    }
}

/// modal[m] = γ_m⁻¹ Σ_i w_i nodal[i] L_m(ξ_i).
pub fn legendre_forward(rule: &GllRule, nodal: &[f64]) -> Result<Vec<f64>> {
    check_len(rule.order + 1, nodal.len())?;
    let t = LegendreTransform::new(rule);
    Ok(t.forward_matrix().mul_vec(nodal))
}

/// nodal[i] = Σ_m modal[m] L_m(ξ_i).
pub fn legendre_inverse(rule: &GllRule, modal: &[f64]) -> Result<Vec<f64>> {
    check_len(rule.order + 1, modal.len())?;
    let t = LegendreTransform::new(rule);
    Ok(t.vandermonde.mul_vec(modal))
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Barycentric Lagrange interpolation matrix from `nodes` to `points`.
pub fn interpolation_matrix(nodes: &[f64], points: &[f64]) -> Mat {
    let n = nodes.len();
    if n == 1 {
        return Mat::from_fn(points.len(), 1, |_, _| 1.0);
    }
    let bary: Vec<f64> = (0..n)
        .map(|j| {
            let p: f64 = (0..n).filter(|&k| k != j).map(|k| nodes[j] - nodes[k]).product();
            1.0 / p
        })
        .collect();
    let mut m = Mat::zeros(points.len(), n);
    for (r, &y) in points.iter().enumerate() {
        if let Some(j) = nodes.iter().position(|&x| (x - y).abs() < 1e-15) {
            m[(r, j)] = 1.0;
            continue;
        }
        let terms: Vec<f64> = (0..n).map(|j| bary[j] / (y - nodes[j])).collect();
        let s: f64 = terms.iter().sum();
        for j in 0..n {
            m[(r, j)] = terms[j] / s;
        }
    }
    m
}

/// One-direction polynomial space: nodes and operators for degree `d`.
/// Degree 0 is a single constant mode with its node at the interval center.
#[derive(Debug, Clone)]
pub struct Basis1D {
    pub degree: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub diff: Mat,
}

impl Basis1D {
    pub fn new(degree: usize) -> Self {
        if degree == 0 {
            return Basis1D { degree, nodes: vec![0.0], weights: vec![2.0], diff: Mat::zeros(1, 1) };
        }
        let rule = gll_rule(degree).expect("degree >= 1");
        let diff = diff_matrix(&rule).entries;
        Basis1D { degree, nodes: rule.nodes, weights: rule.weights, diff }
    }

    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// 1D factor of the fine-to-coarse transpose prolongation, carried out with the
/// transform steps: divide by fine weights, forward transform scaled by γ on the
/// fine grid, truncate and divide by coarse γ, inverse transform on the coarse
/// grid, multiply by coarse weights.
#[derive(Debug, Clone)]
pub struct Restriction1D {
    pub coarse: usize,
    pub fine: usize,
    fine_weights: Vec<f64>,
    fine_gamma: Vec<f64>,
    fine_forward: Mat,
    coarse_gamma: Vec<f64>,
    coarse_inverse: Mat,
    coarse_weights: Vec<f64>,
}

impl Restriction1D {
    pub fn new(coarse: usize, fine: usize) -> Result<Self> {
        if fine < coarse || coarse == 0 {
            return Err(Error::InvalidArgument(format!("restriction needs 1 <= coarse ({coarse}) <= fine ({fine})")));
        }
        let fr = gll_rule(fine)?;
        let cr = gll_rule(coarse)?;
        let ft = LegendreTransform::new(&fr);
        let ct = LegendreTransform::new(&cr);
        // Forward transform truncated to the coarse modes.
        let full = ft.forward_matrix();
        let fine_forward = Mat::from_fn(coarse + 1, fine + 1, |m, i| full[(m, i)]);
        Ok(Restriction1D {
            coarse,
            fine,
            fine_weights: fr.weights,
            fine_gamma: ft.gamma,
            fine_forward,
            coarse_gamma: ct.gamma,
            coarse_inverse: ct.vandermonde,
            coarse_weights: cr.weights,
        })
    }

    /// The composite (coarse+1) × (fine+1) matrix of this transfer.
    pub fn matrix(&self) -> Mat {
        let mut cols = Mat::zeros(self.coarse + 1, self.fine + 1);
        for a in 0..=self.fine {
            let mut e = vec![0.0; self.fine + 1];
            e[a] = 1.0;
            let y = self.apply(&e);
            for (i, v) in y.into_iter().enumerate() {
                cols[(i, a)] = v;
            }
        }
        cols
    }

    fn apply(&self, fine: &[f64]) -> Vec<f64> {
        let scaled: Vec<f64> = fine.iter().zip(&self.fine_weights).map(|(v, w)| v / w).collect();
        let modal = self.fine_forward.mul_vec(&scaled);
        let trunc: Vec<f64> = (0..=self.coarse).map(|m| modal[m] * self.fine_gamma[m] / self.coarse_gamma[m]).collect();
        let nodal = self.coarse_inverse.mul_vec(&trunc);
        nodal.iter().zip(&self.coarse_weights).map(|(v, w)| v * w).collect()
    }
}

/// Transpose prolongation `(G)ᵀ O` from a fine tensor GLL grid to a coarse one,
/// with the 1D transforms built once and reused.
#[derive(Debug, Clone)]
pub struct TensorRestriction {
    rs: [Restriction1D; 3],
    inv_w: [Vec<f64>; 3],
    ratio: [Vec<f64>; 3],
}

impl TensorRestriction {
    pub fn new(coarse: [usize; 3], fine: [usize; 3]) -> Result<Self> {
        let rs = [
            Restriction1D::new(coarse[0], fine[0])?,
            Restriction1D::new(coarse[1], fine[1])?,
            Restriction1D::new(coarse[2], fine[2])?,
        ];
        let inv_w = [0, 1, 2].map(|d| rs[d].fine_weights.iter().map(|w| 1.0 / w).collect());
        let ratio =
            [0, 1, 2].map(|d| (0..=rs[d].coarse).map(|m| rs[d].fine_gamma[m] / rs[d].coarse_gamma[m]).collect());
        Ok(TensorRestriction { rs, inv_w, ratio })
    }

    pub fn fine_dims(&self) -> [usize; 3] {
        [0, 1, 2].map(|d| self.rs[d].fine + 1)
    }

    /// Applies the five steps as full 3D passes.
    pub fn apply(&self, fine_values: &[f64]) -> Result<Vec<f64>> {
        let fdims = self.fine_dims();
        check_len(len3(fdims), fine_values.len())?;
        let rs = &self.rs;
        // Step 1: divide by the fine tensor weights.
        let mut o = fine_values.to_vec();
        scale_separable(&mut o, fdims, [&self.inv_w[0], &self.inv_w[1], &self.inv_w[2]]);
        // Step 2: forward transform, keeping the coarse modes, with fine γ scaling.
        let (mut modal, mdims) = apply3([&rs[0].fine_forward, &rs[1].fine_forward, &rs[2].fine_forward], &o, fdims);
        // Step 3: divide by coarse γ.
        scale_separable(&mut modal, mdims, [&self.ratio[0], &self.ratio[1], &self.ratio[2]]);
        // Step 4: inverse transform on the coarse grid.
        let (mut nodal, cdims) =
            apply3([&rs[0].coarse_inverse, &rs[1].coarse_inverse, &rs[2].coarse_inverse], &modal, mdims);
        // Step 5: multiply by the coarse weights.
        scale_separable(&mut nodal, cdims, [&rs[0].coarse_weights, &rs[1].coarse_weights, &rs[2].coarse_weights]);
        Ok(nodal)
    }
}

/// Transpose prolongation `(G)ᵀ O` for a tensor grid with per-direction coarse
/// orders `coarse` and fine orders `fine`.
pub fn restrict_fine_to_coarse_aniso(fine_values: &[f64], coarse: [usize; 3], fine: [usize; 3]) -> Result<Vec<f64>> {
    TensorRestriction::new(coarse, fine)?.apply(fine_values)
}

/// Isotropic transpose prolongation from the order-2N grid to the order-N grid.
pub fn restrict_fine_to_coarse(fine_values: &[f64], n: usize) -> Result<Vec<f64>> {
    restrict_fine_to_coarse_aniso(fine_values, [n; 3], [2 * n; 3])
}

/// Interpolates coarse nodal values (orders `coarse`) onto the GLL grid of orders `fine`.
pub fn prolong_coarse_to_fine_aniso(coarse_values: &[f64], coarse: [usize; 3], fine: [usize; 3]) -> Result<Vec<f64>> {
    let cdims = [coarse[0] + 1, coarse[1] + 1, coarse[2] + 1];
    check_len(len3(cdims), coarse_values.len())?;
    let mats: Vec<Mat> = (0..3)
        .map(|d| {
            let c = gll_rule(coarse[d])?;
            let f = gll_rule(fine[d])?;
            Ok(interpolation_matrix(&c.nodes, &f.nodes))
        })
        .collect::<Result<_>>()?;
    Ok(apply3([&mats[0], &mats[1], &mats[2]], coarse_values, cdims).0)
}

/// Interpolates from the order-N grid to the order-2N grid.
pub fn prolong_coarse_to_fine(coarse_values: &[f64], n: usize) -> Result<Vec<f64>> {
    prolong_coarse_to_fine_aniso(coarse_values, [n; 3], [2 * n; 3])
}

/// Applies a 1D matrix along one axis of a coarse tensor (re-exported convenience).
pub fn apply_along(m: &Mat, x: &[f64], dims: [usize; 3], axis: usize) -> Vec<f64> {
    apply_axis(m, x, dims, axis).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_zero_rule_is_rejected() {
        assert!(gll_rule(0).is_err());
    }

    #[test]
    fn small_rules_match_closed_forms() {
        let r1 = gll_rule(1).unwrap();
        assert_eq!(r1.nodes, vec![-1.0, 1.0]);
        assert!((r1.weights[0] - 1.0).abs() < 1e-15 && (r1.weights[1] - 1.0).abs() < 1e-15);
        let r2 = gll_rule(2).unwrap();
        assert!(r2.nodes[1].abs() < 1e-15);
        for (w, e) in r2.weights.iter().zip([1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0]) {
            assert!((w - e).abs() < 1e-14);
        }
        let r4 = gll_rule(4).unwrap();
        assert!((r4.integrate(|x| x.powi(6)) - 2.0 / 7.0).abs() < 1e-13);
    }

    #[test]
    fn derivative_coefficients_of_legendre_series() {
        // d/dx L_3 = 5 L_2 + L_0
        let d = legendre_derivative_coeffs(&[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(d, vec![1.0, 0.0, 5.0, 0.0]);
    }

    #[test]
    fn transform_of_quadratic_plus_linear() {
        let r = gll_rule(3).unwrap();
        let nodal: Vec<f64> = r.nodes.iter().map(|x| x + x * x).collect();
        let modal = legendre_forward(&r, &nodal).unwrap();
        for (m, e) in modal.iter().zip([1.0 / 3.0, 1.0, 2.0 / 3.0, 0.0]) {
            assert!((m - e).abs() < 1e-13, "{modal:?}");
        }
    }
}
