//! Fixed-size vectors for d ≤ 3. Unused trailing components are zero.

pub const MAX_DIM: usize = 3;

pub type Point = [f64; MAX_DIM];
pub type Mat = [[f64; MAX_DIM]; MAX_DIM];

pub const ZERO: Point = [0.0; MAX_DIM];
pub const ZERO_MAT: Mat = [[0.0; MAX_DIM]; MAX_DIM];

#[inline]
pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: &Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// `a + s b`
#[inline]
pub fn axpy(a: &Point, s: f64, b: &Point) -> Point {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

pub fn unit(a: &Point) -> Option<Point> {
    let n = norm(a);
    (n > 0.0 && n.is_finite()).then(|| scale(a, 1.0 / n))
}

/// Pads a slice of up to three coordinates with zeros.
pub fn point_from(coords: &[f64]) -> Point {
    let mut p = ZERO;
    for (dst, src) in p.iter_mut().zip(coords) {
        *dst = *src;
    }
    p
}

/// `v^T M v` restricted to the leading `dim` components.
pub fn quad_form(m: &Mat, v: &Point, dim: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            acc += v[i] * m[i][j] * v[j];
        }
    }
    acc
}

/// Frobenius norm over the leading `dim × dim` block.
pub fn frobenius(m: &Mat, dim: usize) -> f64 {
    let mut acc = 0.0;
    for row in m.iter().take(dim) {
        for v in row.iter().take(dim) {
            acc += v * v;
        }
    }
    acc.sqrt()
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn sym2_eigenvalues(a: f64, b: f64, d: f64) -> [f64; 2] {
    let mean = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let r = half_diff.hypot(b);
    [mean - r, mean + r]
}

/// Orthonormal basis of the complement of the unit vector `n` in ℝ^dim.
pub fn tangent_basis(n: &Point, dim: usize) -> Vec<Point> {
    let mut basis: Vec<Point> = Vec::with_capacity(dim.saturating_sub(1));
    // Gram-Schmidt over the coordinate axes, skipping the one most aligned with n.
    let skip = (0..dim)
        .max_by(|&i, &j| n[i].abs().total_cmp(&n[j].abs()))
        .unwrap_or(0);
    for axis in (0..dim).filter(|&i| i != skip) {
        let mut v = ZERO;
        v[axis] = 1.0;
        v = axpy(&v, -dot(&v, n), n);
        for b in &basis {
            v = axpy(&v, -dot(&v, b), b);
        }
        if let Some(u) = unit(&v) {
            basis.push(u);
        }
    }
    basis
}
