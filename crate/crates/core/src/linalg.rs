//! Small dense helpers for n <= 3 built on nalgebra.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::Point;

pub type Mat = [[f64; 3]; 3];

pub fn identity() -> Mat {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

pub fn dot(n: usize, a: &Point, b: &Point) -> f64 {
    (0..n).map(|i| a[i] * b[i]).sum()
}

pub fn norm(n: usize, a: &Point) -> f64 {
    dot(n, a, a).sqrt()
}

pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(s: f64, a: &Point) -> Point {
    [s * a[0], s * a[1], s * a[2]]
}

pub fn axpy(s: f64, a: &Point, b: &Point) -> Point {
    [s * a[0] + b[0], s * a[1] + b[1], s * a[2] + b[2]]
}

pub fn mat_vec(n: usize, m: &Mat, v: &Point) -> Point {
    let mut out = [0.0; 3];
    for i in 0..n {
        out[i] = (0..n).map(|j| m[i][j] * v[j]).sum();
    }
    out
}

pub fn mat_t_vec(n: usize, m: &Mat, v: &Point) -> Point {
    let mut out = [0.0; 3];
    for i in 0..n {
        out[i] = (0..n).map(|j| m[j][i] * v[j]).sum();
    }
    out
}

pub fn mat_mul(n: usize, a: &Mat, b: &Mat) -> Mat {
    let mut out = [[0.0; 3]; 3];
    for i in 0..n {
        for j in 0..n {
            out[i][j] = (0..n).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn transpose(m: &Mat) -> Mat {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[j][i];
        }
    }
    out
}

fn padded(n: usize, m: &Mat) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| if i < n && j < n { m[i][j] } else if i == j { 1.0 } else { 0.0 })
}

/// Solves `m x = b` in the leading `n` coordinates.
pub fn solve(n: usize, m: &Mat, b: &Point) -> Option<Point> {
    let a = padded(n, m);
    let rhs = Vector3::new(b[0], if n > 1 { b[1] } else { 0.0 }, if n > 2 { b[2] } else { 0.0 });
    let x = a.lu().solve(&rhs)?;
    let mut out = [0.0; 3];
    for i in 0..n {
        out[i] = x[i];
    }
    Some(out)
}

pub fn inverse(n: usize, m: &Mat) -> Option<Mat> {
    let inv = padded(n, m).try_inverse()?;
    let mut out = [[0.0; 3]; 3];
    for i in 0..n {
        for j in 0..n {
            out[i][j] = inv[(i, j)];
        }
    }
    Some(out)
}

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
pub fn sym_norm(n: usize, m: &Mat) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if n == 1 {
        return m[0][0].abs();
    }
    let mut a = padded(n, m);
    for i in n..3 {
        a[(i, i)] = 0.0;
    }
    let eig = SymmetricEigen::new(a);
    eig.eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn frobenius(n: usize, m: &Mat) -> f64 {
    let mut s = 0.0;
    for row in m.iter().take(n) {
        for v in row.iter().take(n) {
            s += v * v;
        }
    }
    s.sqrt()
}

/// Orthonormal frame whose last column is `e` (unit vector in the first n slots).
pub fn frame_with_last(n: usize, e: &Point) -> Mat {
    let mut cols: Vec<Point> = Vec::with_capacity(n);
    let mut candidates: Vec<Point> = (0..n)
        .map(|i| {
            let mut v = [0.0; 3];
            v[i] = 1.0;
            v
        })
        .collect();
    candidates.sort_by(|a, b| {
        let da = dot(n, a, e).abs();
        let db = dot(n, b, e).abs();
        da.partial_cmp(&db).unwrap()
    });
    for c in candidates.into_iter() {
        if cols.len() == n - 1 {
            break;
        }
        let mut v = axpy(-dot(n, &c, e), e, &c);
        for q in &cols {
            v = axpy(-dot(n, &v, q), q, &v);
        }
        let len = norm(n, &v);
        if len > 1e-8 {
            cols.push(scale(1.0 / len, &v));
        }
    }
    cols.push(*e);
    if n == 3 {
        // keep the frame right-handed
        let (a, b) = (cols[0], cols[1]);
        let cross = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
        if dot(3, &cross, e) < 0.0 {
            cols.swap(0, 1);
        }
    } else if n == 2 {
        let a = cols[0];
        if a[0] * e[1] - a[1] * e[0] < 0.0 {
            cols[0] = scale(-1.0, &a);
        }
    }
    let mut m = identity();
    for (j, c) in cols.iter().enumerate() {
        for i in 0..3 {
            m[i][j] = if i < n { c[i] } else if i == j { 1.0 } else { 0.0 };
        }
    }
    m
}

/// `v / |v|`, or zero for the zero vector.
pub fn normalize_or_zero(n: usize, v: &Point) -> Point {
    let l = norm(n, v);
    if l > 0.0 {
        scale(1.0 / l, v)
    } else {
        [0.0; 3]
    }
}
