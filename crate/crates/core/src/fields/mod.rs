//! Vector fields, scalar integrals and volume forms on ℝ³ and T³.
//!
//! Fields on the torus accept lifted (unwrapped) points and reduce them to the
//! fundamental box before evaluating, so trajectories can carry their lifts.

mod catalog;

pub use catalog::{
    catalog, Abc, CatalogEntry, CatalogParams, ConjugatedDensity, ConjugatedTorus, ShearTorus,
    CATALOG_NAMES,
};

use crate::linalg::{add, cross, dot, mat_vec, trace, Mat3, Vec3};
use crate::scalar::{wrap_positive, Real};

/// Where a field lives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain<T> {
    Euclidean,
    /// Periods `(Lx, Ly, Lz)`.
    Torus([T; 3]),
}

impl<T: Real> Domain<T> {
    /// Standard torus with all periods equal to `2π`.
    pub fn standard_torus() -> Self {
        Domain::Torus([T::two_pi(); 3])
    }

    /// Reduces a lifted point to the fundamental box.
    pub fn wrap(&self, x: &Vec3<T>) -> Vec3<T> {
        match self {
            Domain::Euclidean => *x,
            Domain::Torus(p) => std::array::from_fn(|i| wrap_positive(x[i], p[i])),
        }
    }

    pub fn periods(&self) -> Option<[T; 3]> {
        match self {
            Domain::Euclidean => None,
            Domain::Torus(p) => Some(*p),
        }
    }
}

/// A smooth vector field with an analytic Jacobian.
pub trait VectorField<T: Real>: Send + Sync {
    fn name(&self) -> &str;

    fn domain(&self) -> Domain<T> {
        Domain::Euclidean
    }

    fn eval(&self, x: &Vec3<T>) -> Vec3<T>;

    /// `J[i][j] = ∂X_i/∂x_j`
    fn jacobian(&self, x: &Vec3<T>) -> Mat3<T>;
}

/// Volume form `ρ(x) dx∧dy∧dz` with positive density.
pub trait VolumeForm<T: Real>: Send + Sync {
    fn density(&self, x: &Vec3<T>) -> T;
    fn density_gradient(&self, x: &Vec3<T>) -> Vec3<T>;
}

/// A scalar function intended as a first integral of some field.
pub trait ScalarIntegral<T: Real>: Send + Sync {
    fn name(&self) -> &str;
    fn eval(&self, x: &Vec3<T>) -> T;
    fn gradient(&self, x: &Vec3<T>) -> Vec3<T>;
    fn hessian(&self, x: &Vec3<T>) -> Mat3<T>;
}

/// Constant density volume form; `UniformVolume(1)` is the standard volume.
#[derive(Debug, Clone, Copy)]
pub struct UniformVolume<T>(pub T);

impl<T: Real> Default for UniformVolume<T> {
    fn default() -> Self {
        UniformVolume(T::one())
    }
}

impl<T: Real> VolumeForm<T> for UniformVolume<T> {
    fn density(&self, _x: &Vec3<T>) -> T {
        self.0
    }
    fn density_gradient(&self, _x: &Vec3<T>) -> Vec3<T> {
        [T::zero(); 3]
    }
}

/// Divergence of `field` with respect to `volume`: the coefficient in `L_X Ω = (div X) Ω`.
pub fn divergence<T: Real>(
    field: &dyn VectorField<T>,
    volume: &dyn VolumeForm<T>,
    x: &Vec3<T>,
) -> T {
    let v = field.eval(x);
    trace(&field.jacobian(x)) + dot(&volume.density_gradient(x), &v) / volume.density(x)
}

/// `dF(X)` at `x`; vanishes identically when `F` is an integral of `X`.
pub fn integral_defect<T: Real>(
    field: &dyn VectorField<T>,
    integral: &dyn ScalarIntegral<T>,
    x: &Vec3<T>,
) -> T {
    dot(&integral.gradient(x), &field.eval(x))
}

/// Central-difference Jacobian, used to audit analytic Jacobians.
pub fn finite_difference_jacobian<T: Real>(
    field: &dyn VectorField<T>,
    x: &Vec3<T>,
    h: T,
) -> Mat3<T> {
    let mut j = [[T::zero(); 3]; 3];
    for col in 0..3 {
        let mut xp = *x;
        let mut xm = *x;
        xp[col] = xp[col] + h;
        xm[col] = xm[col] - h;
        let fp = field.eval(&xp);
        let fm = field.eval(&xm);
        for row in 0..3 {
            j[row][col] = (fp[row] - fm[row]) / (h + h);
        }
    }
    j
}

/// Constant field `X ≡ c`.
#[derive(Debug, Clone)]
pub struct ConstantField<T> {
    pub value: Vec3<T>,
    pub domain: Domain<T>,
}

impl<T: Real> ConstantField<T> {
    pub fn new(value: Vec3<T>, domain: Domain<T>) -> Self {
        Self { value, domain }
    }
}

impl<T: Real> VectorField<T> for ConstantField<T> {
    fn name(&self) -> &str {
        "constant"
    }
    fn domain(&self) -> Domain<T> {
        self.domain
    }
    fn eval(&self, _x: &Vec3<T>) -> Vec3<T> {
        self.value
    }
    fn jacobian(&self, _x: &Vec3<T>) -> Mat3<T> {
        [[T::zero(); 3]; 3]
    }
}

/// Linear field `X(x) = A x` on ℝ³.
#[derive(Debug, Clone)]
pub struct LinearField<T> {
    pub matrix: Mat3<T>,
    name: String,
}

impl<T: Real> LinearField<T> {
    pub fn new(matrix: Mat3<T>) -> Self {
        Self { matrix, name: "linear".into() }
    }

    pub(crate) fn named(matrix: Mat3<T>, name: &str) -> Self {
        Self { matrix, name: name.into() }
    }
}

impl<T: Real> VectorField<T> for LinearField<T> {
    fn name(&self) -> &str {
        &self.name
    }
    fn eval(&self, x: &Vec3<T>) -> Vec3<T> {
        mat_vec(&self.matrix, x)
    }
    fn jacobian(&self, _x: &Vec3<T>) -> Mat3<T> {
        self.matrix
    }
}

type PointFn<T, R> = Box<dyn Fn(&Vec3<T>) -> R + Send + Sync>;

/// Field assembled from closures; for experiments and tests.
pub struct ClosureField<T: Real> {
    name: String,
    domain: Domain<T>,
    eval: PointFn<T, Vec3<T>>,
    jacobian: PointFn<T, Mat3<T>>,
}

impl<T: Real> ClosureField<T> {
    pub fn new(
        name: &str,
        domain: Domain<T>,
        eval: impl Fn(&Vec3<T>) -> Vec3<T> + Send + Sync + 'static,
        jacobian: impl Fn(&Vec3<T>) -> Mat3<T> + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), domain, eval: Box::new(eval), jacobian: Box::new(jacobian) }
    }
}

impl<T: Real> VectorField<T> for ClosureField<T> {
    fn name(&self) -> &str {
        &self.name
    }
    fn domain(&self) -> Domain<T> {
        self.domain
    }
    fn eval(&self, x: &Vec3<T>) -> Vec3<T> {
        (self.eval)(&self.domain.wrap(x))
    }
    fn jacobian(&self, x: &Vec3<T>) -> Mat3<T> {
        (self.jacobian)(&self.domain.wrap(x))
    }
}

/// `F(x) = xᵀ Q x + b·x` with symmetric `Q`.
#[derive(Debug, Clone)]
pub struct Quadratic<T> {
    pub q: Mat3<T>,
    pub b: Vec3<T>,
    name: String,
}

impl<T: Real> Quadratic<T> {
    pub fn new(q: Mat3<T>, b: Vec3<T>) -> Self {
        let sym = std::array::from_fn(|i| {
            std::array::from_fn(|j| (q[i][j] + q[j][i]) * T::lit(0.5))
        });
        Self { q: sym, b, name: "quadratic".into() }
    }

    pub fn diagonal(d: Vec3<T>) -> Self {
        let mut q = [[T::zero(); 3]; 3];
        for i in 0..3 {
            q[i][i] = d[i];
        }
        Self::new(q, [T::zero(); 3])
    }

    pub fn linear(b: Vec3<T>) -> Self {
        Self::new([[T::zero(); 3]; 3], b)
    }

    /// `|x|²`
    pub fn sphere() -> Self {
        Self::diagonal([T::one(); 3]).with_name("sphere")
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }
}

impl<T: Real> ScalarIntegral<T> for Quadratic<T> {
    fn name(&self) -> &str {
        &self.name
    }
    fn eval(&self, x: &Vec3<T>) -> T {
        dot(x, &mat_vec(&self.q, x)) + dot(&self.b, x)
    }
    fn gradient(&self, x: &Vec3<T>) -> Vec3<T> {
        let qx = mat_vec(&self.q, x);
        add(&[qx[0] + qx[0], qx[1] + qx[1], qx[2] + qx[2]], &self.b)
    }
    fn hessian(&self, _x: &Vec3<T>) -> Mat3<T> {
        std::array::from_fn(|i| std::array::from_fn(|j| self.q[i][j] + self.q[i][j]))
    }
}

/// `F(x) = sin(x_axis)`; periodic, so usable on T³.
#[derive(Debug, Clone, Copy)]
pub struct SinCoordinate {
    pub axis: usize,
}

impl<T: Real> ScalarIntegral<T> for SinCoordinate {
    fn name(&self) -> &str {
        match self.axis {
            0 => "sin_x",
            1 => "sin_y",
            _ => "sin_z",
        }
    }
    fn eval(&self, x: &Vec3<T>) -> T {
        x[self.axis].sin()
    }
    fn gradient(&self, x: &Vec3<T>) -> Vec3<T> {
        let mut g = [T::zero(); 3];
        g[self.axis] = x[self.axis].cos();
        g
    }
    fn hessian(&self, x: &Vec3<T>) -> Mat3<T> {
        let mut h = [[T::zero(); 3]; 3];
        h[self.axis][self.axis] = -x[self.axis].sin();
        h
    }
}

/// `X = ∇F × ∇G`; divergence-free with both `F` and `G` as integrals.
pub struct CrossGradient<T: Real> {
    pub f: Box<dyn ScalarIntegral<T>>,
    pub g: Box<dyn ScalarIntegral<T>>,
}

impl<T: Real> VectorField<T> for CrossGradient<T> {
    fn name(&self) -> &str {
        "cross_gradient"
    }
    fn eval(&self, x: &Vec3<T>) -> Vec3<T> {
        cross(&self.f.gradient(x), &self.g.gradient(x))
    }
    fn jacobian(&self, x: &Vec3<T>) -> Mat3<T> {
        let (gf, gg) = (self.f.gradient(x), self.g.gradient(x));
        let (hf, hg) = (self.f.hessian(x), self.g.hessian(x));
        let mut j = [[T::zero(); 3]; 3];
        for col in 0..3 {
            let dgf = [hf[0][col], hf[1][col], hf[2][col]];
            let dgg = [hg[0][col], hg[1][col], hg[2][col]];
            let d = add(&cross(&dgf, &gg), &cross(&gf, &dgg));
            for row in 0..3 {
                j[row][col] = d[row];
            }
        }
        j
    }
}

/// Halton points in `[0,1)³` (bases 2, 3, 5); quasi-random sampling for sweeps.
pub fn halton3(index: usize) -> [f64; 3] {
    fn radical_inverse(mut i: usize, base: usize) -> f64 {
        let mut f = 1.0;
        let mut r = 0.0;
        while i > 0 {
            f /= base as f64;
            r += f * (i % base) as f64;
            i /= base;
        }
        r
    }
    [radical_inverse(index + 1, 2), radical_inverse(index + 1, 3), radical_inverse(index + 1, 5)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mat_norm_inf;

    fn sphere_cross_z() -> CrossGradient<f64> {
        CrossGradient {
            f: Box::new(Quadratic::sphere()),
            g: Box::new(Quadratic::linear([0.0, 0.0, 1.0])),
        }
    }

    #[test]
    fn divergence_of_identity_field_is_three() {
        let f = LinearField::new(crate::linalg::identity::<f64, 3>());
        let d = divergence(&f, &UniformVolume(1.0), &[0.3, -1.0, 2.0]);
        assert_eq!(d, 3.0);
    }

    #[test]
    fn divergence_of_x_squared() {
        let f = ClosureField::new(
            "x2",
            Domain::Euclidean,
            |x: &Vec3<f64>| [x[0] * x[0], 0.0, 0.0],
            |x: &Vec3<f64>| [[2.0 * x[0], 0.0, 0.0], [0.0; 3], [0.0; 3]],
        );
        assert_eq!(divergence(&f, &UniformVolume(1.0), &[1.0, 2.0, 3.0]), 2.0);
    }

    #[test]
    fn weighted_divergence_uses_density_gradient() {
        struct Exp;
        impl VolumeForm<f64> for Exp {
            fn density(&self, x: &Vec3<f64>) -> f64 {
                x[0].exp()
            }
            fn density_gradient(&self, x: &Vec3<f64>) -> Vec3<f64> {
                [x[0].exp(), 0.0, 0.0]
            }
        }
        // X = (1, 0, 0): trace 0, ∇ρ·X/ρ = 1
        let f = ConstantField::new([1.0, 0.0, 0.0], Domain::Euclidean);
        assert!((divergence(&f, &Exp, &[0.7, 0.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn integral_defect_examples() {
        let x = [0.4, -0.2, 1.3];
        assert!(integral_defect(&sphere_cross_z(), &Quadratic::sphere(), &x).abs() < 1e-15);
        // X = ∇(x²+y²) × ∇z
        let cg = CrossGradient {
            f: Box::new(Quadratic::diagonal([1.0, 1.0, 0.0])),
            g: Box::new(Quadratic::linear([0.0, 0.0, 1.0])),
        };
        assert!(integral_defect(&cg, &Quadratic::diagonal([1.0, 1.0, 0.0]), &x).abs() < 1e-15);
        let c = ConstantField::new([1.0, 0.0, 0.0], Domain::Euclidean);
        assert_eq!(integral_defect(&c, &Quadratic::linear([1.0, 0.0, 0.0]), &x), 1.0);
    }

    #[test]
    fn cross_gradient_jacobian_matches_differences() {
        let f = CrossGradient {
            f: Box::new(Quadratic::new(
                [[1.0, 0.2, 0.0], [0.2, 2.0, -0.3], [0.0, -0.3, 0.5]],
                [0.1, 0.0, -0.4],
            )),
            g: Box::new(SinCoordinate { axis: 1 }),
        };
        let x = [0.3, 0.8, -0.6];
        let err = mat_norm_inf(&crate::linalg::mat_sub(
            &f.jacobian(&x),
            &finite_difference_jacobian(&f, &x, 1e-5),
        ));
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn torus_wrap_is_idempotent() {
        let d = Domain::<f64>::standard_torus();
        let w = d.wrap(&[-1.0, 7.0, 13.0]);
        assert_eq!(d.wrap(&w), w);
        assert!(w.iter().all(|v| *v >= 0.0 && *v < std::f64::consts::TAU));
    }

    #[test]
    fn halton_points_fill_unit_cube() {
        let pts: Vec<_> = (0..64).map(halton3).collect();
        assert!(pts.iter().flatten().all(|v| (0.0..1.0).contains(v)));
        assert_eq!(pts[0], [0.5, 1.0 / 3.0, 0.2]);
    }

    #[test]
    fn single_precision_divergence() {
        let f = sphere_cross_z();
        let _ = &f;
        let g: CrossGradient<f32> = CrossGradient {
            f: Box::new(Quadratic::sphere()),
            g: Box::new(Quadratic::linear([0.0, 0.0, 1.0])),
        };
        assert!(divergence(&g, &UniformVolume(1.0f32), &[0.5, 0.25, 1.0]).abs() < 1e-6);
    }
}
