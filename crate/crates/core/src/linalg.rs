//! Fixed-size vector and matrix helpers on plain arrays.
//!
//! Matrices are row-major: `m[row][col]`.

use num_complex::Complex;

use crate::scalar::Real;

pub type Vec2<T> = [T; 2];
pub type Vec3<T> = [T; 3];
pub type Mat2<T> = [[T; 2]; 2];
pub type Mat3<T> = [[T; 3]; 3];

#[inline]
pub fn zeros<T: Real, const N: usize>() -> [T; N] {
    [T::zero(); N]
}

#[inline]
pub fn identity<T: Real, const N: usize>() -> [[T; N]; N] {
    let mut m = [[T::zero(); N]; N];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

#[inline]
pub fn dot<T: Real, const N: usize>(a: &[T; N], b: &[T; N]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn add<T: Real, const N: usize>(a: &[T; N], b: &[T; N]) -> [T; N] {
    std::array::from_fn(|i| a[i] + b[i])
}

#[inline]
pub fn sub<T: Real, const N: usize>(a: &[T; N], b: &[T; N]) -> [T; N] {
    std::array::from_fn(|i| a[i] - b[i])
}

#[inline]
pub fn scale<T: Real, const N: usize>(s: T, a: &[T; N]) -> [T; N] {
    std::array::from_fn(|i| s * a[i])
}

/// `a + s * b`
#[inline]
pub fn axpy<T: Real, const N: usize>(a: &[T; N], s: T, b: &[T; N]) -> [T; N] {
    std::array::from_fn(|i| a[i] + s * b[i])
}

#[inline]
pub fn norm<T: Real, const N: usize>(a: &[T; N]) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn norm_inf<T: Real, const N: usize>(a: &[T; N]) -> T {
    a.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

#[inline]
pub fn cross<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Determinant of the matrix whose columns are `u`, `v`, `w`.
#[inline]
pub fn det_columns<T: Real>(u: &Vec3<T>, v: &Vec3<T>, w: &Vec3<T>) -> T {
    dot(u, &cross(v, w))
}

#[inline]
pub fn det2<T: Real>(m: &Mat2<T>) -> T {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

#[inline]
pub fn det3<T: Real>(m: &Mat3<T>) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

#[inline]
pub fn trace<T: Real, const N: usize>(m: &[[T; N]; N]) -> T {
    (0..N).fold(T::zero(), |acc, i| acc + m[i][i])
}

pub fn mat_vec<T: Real, const R: usize, const C: usize>(m: &[[T; C]; R], v: &[T; C]) -> [T; R] {
    std::array::from_fn(|i| dot(&m[i], v))
}

/// `vᵀ m`
pub fn vec_mat<T: Real, const R: usize, const C: usize>(v: &[T; R], m: &[[T; C]; R]) -> [T; C] {
    std::array::from_fn(|j| (0..R).fold(T::zero(), |acc, i| acc + v[i] * m[i][j]))
}

pub fn mat_mul<T: Real, const A: usize, const B: usize, const C: usize>(
    a: &[[T; B]; A],
    b: &[[T; C]; B],
) -> [[T; C]; A] {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| (0..B).fold(T::zero(), |acc, k| acc + a[i][k] * b[k][j]))
    })
}

pub fn transpose<T: Real, const R: usize, const C: usize>(m: &[[T; C]; R]) -> [[T; R]; C] {
    std::array::from_fn(|j| std::array::from_fn(|i| m[i][j]))
}

pub fn column<T: Real, const R: usize, const C: usize>(m: &[[T; C]; R], j: usize) -> [T; R] {
    std::array::from_fn(|i| m[i][j])
}

pub fn from_columns3<T: Real>(c0: &Vec3<T>, c1: &Vec3<T>, c2: &Vec3<T>) -> Mat3<T> {
    std::array::from_fn(|i| [c0[i], c1[i], c2[i]])
}

pub fn mat_sub<T: Real, const R: usize, const C: usize>(
    a: &[[T; C]; R],
    b: &[[T; C]; R],
) -> [[T; C]; R] {
    std::array::from_fn(|i| sub(&a[i], &b[i]))
}

pub fn mat_norm_inf<T: Real, const R: usize, const C: usize>(m: &[[T; C]; R]) -> T {
    m.iter().fold(T::zero(), |acc, row| acc.max(norm_inf(row)))
}

pub fn inv2<T: Real>(m: &Mat2<T>) -> Option<Mat2<T>> {
    let d = det2(m);
    if d == T::zero() || !d.is_finite() {
        return None;
    }
    Some([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]])
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve<T: Real, const N: usize>(a: &[[T; N]; N], b: &[T; N]) -> Option<[T; N]> {
    let mut m = *a;
    let mut rhs = *b;
    for col in 0..N {
        let pivot = (col..N).max_by(|&i, &j| {
            m[i][col]
                .abs()
                .partial_cmp(&m[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[pivot][col] == T::zero() || !m[pivot][col].is_finite() {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..N {
            let f = m[row][col] / m[col][col];
            for k in col..N {
                m[row][k] = m[row][k] - f * m[col][k];
            }
            rhs[row] = rhs[row] - f * rhs[col];
        }
    }
    let mut x = [T::zero(); N];
    for row in (0..N).rev() {
        let tail = (row + 1..N).fold(T::zero(), |acc, k| acc + m[row][k] * x[k]);
        x[row] = (rhs[row] - tail) / m[row][row];
    }
    Some(x)
}

/// Determinant by elimination; used for the 4×4 symplectic matrices.
pub fn det<T: Real, const N: usize>(a: &[[T; N]; N]) -> T {
    let mut m = *a;
    let mut d = T::one();
    for col in 0..N {
        let pivot = (col..N)
            .max_by(|&i, &j| {
                m[i][col]
                    .abs()
                    .partial_cmp(&m[j][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(col);
        if m[pivot][col] == T::zero() {
            return T::zero();
        }
        if pivot != col {
            m.swap(col, pivot);
            d = -d;
        }
        d = d * m[col][col];
        for row in col + 1..N {
            let f = m[row][col] / m[col][col];
            for k in col..N {
                m[row][k] = m[row][k] - f * m[col][k];
            }
        }
    }
    d
}

/// Eigenvalues of a real 2×2 matrix, larger real part (or positive imaginary part) first.
pub fn eig2<T: Real>(m: &Mat2<T>) -> [Complex<T>; 2] {
    let half_tr = (m[0][0] + m[1][1]) * T::lit(0.5);
    let d = det2(m);
    let disc = half_tr * half_tr - d;
    if disc >= T::zero() {
        let s = disc.sqrt();
        // avoid cancellation in the smaller root
        let big = if half_tr >= T::zero() { half_tr + s } else { half_tr - s };
        let small = if big != T::zero() { d / big } else { half_tr - s };
        let (a, b) = if big >= small { (big, small) } else { (small, big) };
        [Complex::new(a, T::zero()), Complex::new(b, T::zero())]
    } else {
        let s = (-disc).sqrt();
        [Complex::new(half_tr, s), Complex::new(half_tr, -s)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn determinants_agree() {
        let m: Mat3<f64> = [[2.0, -1.0, 0.5], [0.3, 4.0, 1.0], [-2.0, 0.0, 1.5]];
        assert!((det3(&m) - det(&m)).abs() < 1e-12);
        let c = det_columns(&column(&m, 0), &column(&m, 1), &column(&m, 2));
        assert!((c - det3(&m)).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_of_rotation_and_shear() {
        let (s, c) = (0.3f64).sin_cos();
        let ev = eig2(&[[c, -s], [s, c]]);
        assert!((ev[0].re - c).abs() < 1e-15 && (ev[0].im - s).abs() < 1e-15);
        let ev = eig2(&[[2.0f64, 1.0], [0.0, 0.5]]);
        assert!((ev[0].re - 2.0).abs() < 1e-15 && (ev[1].re - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn solve_inverts_mat_vec(vals in prop::array::uniform16(-3.0f64..3.0), x in prop::array::uniform4(-2.0f64..2.0)) {
            let mut a = [[0.0; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    a[i][j] = vals[4 * i + j] + if i == j { 8.0 } else { 0.0 };
                }
            }
            let b = mat_vec(&a, &x);
            let y = solve(&a, &b).unwrap();
            for i in 0..4 {
                prop_assert!((y[i] - x[i]).abs() < 1e-10);
            }
        }
    }
}
