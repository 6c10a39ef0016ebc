//! Tensor-product contractions on lexicographically ordered 3D arrays.
//!
//! A 3D array with extents `dims = [n0, n1, n2]` stores entry `(i, j, k)` at
//! `i + n0 * (j + n1 * k)`, so the first index runs fastest.

use crate::dense::Mat;

#[inline]
pub fn index3(dims: [usize; 3], i: usize, j: usize, k: usize) -> usize {
    i + dims[0] * (j + dims[1] * k)
}

pub fn len3(dims: [usize; 3]) -> usize {
    dims[0] * dims[1] * dims[2]
}

/// Applies `m` along `axis`: out[.., r, ..] = sum_c m[r, c] x[.., c, ..].
pub fn apply_axis(m: &Mat, x: &[f64], dims: [usize; 3], axis: usize) -> (Vec<f64>, [usize; 3]) {
    assert_eq!(m.cols, dims[axis], "operator width does not match axis extent");
    assert_eq!(x.len(), len3(dims));
    let mut od = dims;
    od[axis] = m.rows;
    let mut out = vec![0.0; len3(od)];
    match axis {
        0 => {
            for jk in 0..dims[1] * dims[2] {
                let src = &x[jk * dims[0]..(jk + 1) * dims[0]];
                let dst = &mut out[jk * od[0]..(jk + 1) * od[0]];
                for (r, d) in dst.iter_mut().enumerate() {
                    *d = m.row(r).iter().zip(src).map(|(a, b)| a * b).sum();
                }
            }
        }
        1 => {
            for k in 0..dims[2] {
                for r in 0..m.rows {
                    let row = m.row(r);
                    let dst0 = index3(od, 0, r, k);
                    for (c, a) in row.iter().enumerate() {
                        if *a == 0.0 {
                            continue;
                        }
                        let src0 = index3(dims, 0, c, k);
                        for i in 0..dims[0] {
                            out[dst0 + i] += a * x[src0 + i];
                        }
                    }
                }
            }
        }
        2 => {
            let plane = dims[0] * dims[1];
            for r in 0..m.rows {
                let row = m.row(r);
                let dst = &mut out[r * plane..(r + 1) * plane];
                for (c, a) in row.iter().enumerate() {
                    if *a == 0.0 {
                        continue;
                    }
                    let src = &x[c * plane..(c + 1) * plane];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += a * s;
                    }
                }
            }
        }
        _ => panic!("axis out of range"),
    }
    (out, od)
}

/// Applies `ms[0] ⊗ ms[1] ⊗ ms[2]` (one matrix per axis).
pub fn apply3(ms: [&Mat; 3], x: &[f64], dims: [usize; 3]) -> (Vec<f64>, [usize; 3]) {
    let (a, d) = apply_axis(ms[0], x, dims, 0);
    let (b, d) = apply_axis(ms[1], &a, d, 1);
    apply_axis(ms[2], &b, d, 2)
}

/// Multiplies pointwise by `w0[i] * w1[j] * w2[k]`.
pub fn scale_separable(x: &mut [f64], dims: [usize; 3], w: [&[f64]; 3]) {
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            let s = w[1][j] * w[2][k];
            let base = index3(dims, 0, j, k);
            for i in 0..dims[0] {
                x[base + i] *= s * w[0][i];
            }
        }
    }
}

/// Tangential axes of a face normal to `axis`, in increasing order.
pub fn tangential_axes(axis: usize) -> [usize; 2] {
    match axis {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    }
}

/// Extracts the slice at position `pos` of `axis` as a 2D array ordered
/// (first tangential axis fastest).
pub fn slice_face(x: &[f64], dims: [usize; 3], axis: usize, pos: usize) -> Vec<f64> {
    let [t1, t2] = tangential_axes(axis);
    let mut out = Vec::with_capacity(dims[t1] * dims[t2]);
    for b in 0..dims[t2] {
        for a in 0..dims[t1] {
            let mut idx = [0usize; 3];
            idx[axis] = pos;
            idx[t1] = a;
            idx[t2] = b;
            out.push(x[index3(dims, idx[0], idx[1], idx[2])]);
        }
    }
    out
}

/// Adjoint of [`slice_face`]: adds face values into the slice at `pos`.
pub fn add_face(x: &mut [f64], dims: [usize; 3], axis: usize, pos: usize, face: &[f64]) {
    let [t1, t2] = tangential_axes(axis);
    let mut n = 0;
    for b in 0..dims[t2] {
        for a in 0..dims[t1] {
            let mut idx = [0usize; 3];
            idx[axis] = pos;
            idx[t1] = a;
            idx[t2] = b;
            x[index3(dims, idx[0], idx[1], idx[2])] += face[n];
            n += 1;
        }
    }
}

/// Applies `m0 ⊗ m1` to a 2D array with extents `dims` (first index fastest).
pub fn apply2(m0: &Mat, m1: &Mat, x: &[f64], dims: [usize; 2]) -> Vec<f64> {
    let (y, _) = apply3([m0, m1, &Mat::identity(1)], x, [dims[0], dims[1], 1]);
    y
}

/// Applies `m0ᵀ ⊗ m1ᵀ` to a 2D array whose extents are `[m0.rows, m1.rows]`.
pub fn apply2_t(m0: &Mat, m1: &Mat, y: &[f64]) -> Vec<f64> {
    apply2(&m0.transpose(), &m1.transpose(), y, [m0.rows, m1.rows])
}
