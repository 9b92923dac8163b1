//! Pointwise multilinear algebra: the volume 3-form, the interior product
//! 2-form `ω_X = ι_X Ω`, and pullbacks of 2-forms under linear maps.
//!
//! Two-forms are stored as full skew matrices `W` with `ω(ξ, η) = ξᵀ W η`, in
//! any dimension `N`; the same type serves the 3-D flow and the 4-D
//! suspension model.

use crate::fields::{VectorField, VolumeForm};
use crate::linalg::{det_columns, dot, mat_mul, mat_vec, transpose, Vec3};
use crate::scalar::Real;

/// A 2-form at a point, `ω(ξ, η) = ξᵀ W η` with `W = −Wᵀ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoForm<T, const N: usize> {
    base: [T; N],
    w: [[T; N]; N],
}

impl<T: Real, const N: usize> TwoForm<T, N> {
    /// Builds the form from the skew part of `m`, i.e. `(m − mᵀ)/2`.
    pub fn from_matrix(base: [T; N], m: [[T; N]; N]) -> Self {
        let half = T::lit(0.5);
        let w = std::array::from_fn(|i| std::array::from_fn(|j| (m[i][j] - m[j][i]) * half));
        Self { base, w }
    }

    pub fn base(&self) -> &[T; N] {
        &self.base
    }

    pub fn matrix(&self) -> &[[T; N]; N] {
        &self.w
    }

    pub fn eval(&self, xi: &[T; N], eta: &[T; N]) -> T {
        dot(xi, &mat_vec(&self.w, eta))
    }

    /// Interior product `ι_v ω`, as a covector.
    pub fn contract(&self, v: &[T; N]) -> [T; N] {
        crate::linalg::vec_mat(v, &self.w)
    }

    /// Sum of two forms at the same base point.
    pub fn add(&self, other: &Self) -> Self {
        let w = std::array::from_fn(|i| std::array::from_fn(|j| self.w[i][j] + other.w[i][j]));
        Self { base: self.base, w }
    }

    pub fn scaled(&self, s: T) -> Self {
        let w = std::array::from_fn(|i| std::array::from_fn(|j| s * self.w[i][j]));
        Self { base: self.base, w }
    }
}

/// `ω_X` at `x`: `(ξ, η) ↦ ρ(x) det[X(x) ξ η]`.
pub fn omega_x<T: Real>(
    volume: &dyn VolumeForm<T>,
    field: &dyn VectorField<T>,
    x: &Vec3<T>,
) -> TwoForm<T, 3> {
    interior_product(volume.density(x), &field.eval(x), x)
}

/// `ι_v (ρ dx∧dy∧dz)` at `x`.
pub fn interior_product<T: Real>(density: T, v: &Vec3<T>, x: &Vec3<T>) -> TwoForm<T, 3> {
    let o = T::zero();
    let [a, b, c] = [density * v[0], density * v[1], density * v[2]];
    // W_ij = ρ det[v, e_i, e_j]
    TwoForm { base: *x, w: [[o, c, -b], [-c, o, a], [b, -a, o]] }
}

/// Pullback `(L*ω)(ξ, η) = ω(Lξ, Lη)` based at `y`, for `L: ℝᴹ → ℝᴺ`.
pub fn pullback<T: Real, const N: usize, const M: usize>(
    omega: &TwoForm<T, N>,
    l: &[[T; M]; N],
    y: [T; M],
) -> TwoForm<T, M> {
    let m = mat_mul(&transpose(l), &mat_mul(&omega.w, l));
    TwoForm::from_matrix(y, m)
}

/// `Ω(u, v, w) = ρ(x) det[u v w]`.
pub fn volume_eval<T: Real>(
    volume: &dyn VolumeForm<T>,
    x: &Vec3<T>,
    u: &Vec3<T>,
    v: &Vec3<T>,
    w: &Vec3<T>,
) -> T {
    volume.density(x) * det_columns(u, v, w)
}
