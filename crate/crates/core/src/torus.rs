//! Flows on invariant 2-tori in angle coordinates: `φ̇ = A`, `ψ̇ = B` with an
//! invariant density `a`, the measure equation `∂φ(aA) + ∂ψ(aB) = 0`, and
//! rotation numbers by quadrature and by orbit averaging.
//!
//! `λ₁ = ∫ A a dφ∧dψ` and `λ₂ = ∫ B a dφ∧dψ` are left unnormalized; only the
//! ratio `λ = λ₁/λ₂` is meaningful across estimators.

use std::ops::ControlFlow;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{CatalogEntry, ConjugatedTorus, ScalarIntegral, VectorField, VolumeForm};
use crate::flow::rk::{integrate, Autonomous, Outcome};
use crate::flow::IntegratorConfig;
use crate::level_measure::{normal_field, Metric};
use crate::linalg::{det_columns, dot, Vec3};
use crate::scalar::Real;

/// Angle coordinates `(φ, ψ)` on the levels of an integral.
pub trait AngleChart<T: Real>: Send + Sync {
    fn embed(&self, c: T, angles: [T; 2]) -> Result<Vec3<T>>;
    /// `(∂x/∂φ, ∂x/∂ψ)`
    fn tangents(&self, c: T, angles: [T; 2]) -> Result<[Vec3<T>; 2]>;
}

/// Chart `(φ, ψ) ↦ (φ, ψ, z(c))` on a level of an integral depending only on `z`.
///
/// For `F = sin z` the level `{sin z = c}` has two components in T³; the chart
/// covers the one with `z = asin c ∈ (−π/2, π/2)`.
#[derive(Debug, Clone, Copy)]
pub struct FlatAngleChart {
    axis: usize,
}

impl FlatAngleChart {
    pub fn sin_z() -> Self {
        Self { axis: 2 }
    }

    fn level_coordinate<T: Real>(&self, c: T) -> Result<T> {
        if c.abs() >= T::one() {
            return Err(if c.abs() == T::one() {
                Error::SingularGradient(0.0)
            } else {
                Error::InvalidParameter(format!("level {} is empty", c.as_f64()))
            });
        }
        Ok(c.asin())
    }

    fn others(&self) -> [usize; 2] {
        match self.axis {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        }
    }
}

impl<T: Real> AngleChart<T> for FlatAngleChart {
    fn embed(&self, c: T, angles: [T; 2]) -> Result<Vec3<T>> {
        let mut x = [T::zero(); 3];
        let [a, b] = self.others();
        x[self.axis] = self.level_coordinate(c)?;
        x[a] = angles[0];
        x[b] = angles[1];
        Ok(x)
    }

    fn tangents(&self, c: T, _angles: [T; 2]) -> Result<[Vec3<T>; 2]> {
        self.level_coordinate(c)?;
        let [a, b] = self.others();
        let mut t = [[T::zero(); 3]; 2];
        t[0][a] = T::one();
        t[1][b] = T::one();
        Ok(t)
    }
}

/// `φ̇ = A(φ, ψ)`, `ψ̇ = B(φ, ψ)` with invariant density `a`, all 2π-periodic.
pub trait TorusFlow<T: Real>: Send + Sync {
    /// `(A, B)`
    fn velocity(&self, phi: T, psi: T) -> [T; 2];
    fn density(&self, phi: T, psi: T) -> T;
}

impl<T: Real> TorusFlow<T> for ConjugatedTorus<T> {
    fn velocity(&self, phi: T, psi: T) -> [T; 2] {
        ConjugatedTorus::velocity(self, phi, psi)
    }
    fn density(&self, phi: T, psi: T) -> T {
        ConjugatedTorus::density(self, phi, psi)
    }
}

/// Constant velocities with uniform density.
#[derive(Debug, Clone, Copy)]
pub struct LinearTorusFlow<T> {
    pub a: T,
    pub b: T,
}

impl<T: Real> TorusFlow<T> for LinearTorusFlow<T> {
    fn velocity(&self, _phi: T, _psi: T) -> [T; 2] {
        [self.a, self.b]
    }
    fn density(&self, _phi: T, _psi: T) -> T {
        T::one()
    }
}

type VelocityFn<T> = Arc<dyn Fn(T, T) -> [T; 2] + Send + Sync>;
type DensityFn<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

/// Torus flow given by closures.
#[derive(Clone)]
pub struct FnTorusFlow<T> {
    velocity: VelocityFn<T>,
    density: DensityFn<T>,
}

impl<T: Real> FnTorusFlow<T> {
    pub fn new(
        velocity: impl Fn(T, T) -> [T; 2] + Send + Sync + 'static,
        density: impl Fn(T, T) -> T + Send + Sync + 'static,
    ) -> Self {
        Self { velocity: Arc::new(velocity), density: Arc::new(density) }
    }
}

impl<T: Real> TorusFlow<T> for FnTorusFlow<T> {
    fn velocity(&self, phi: T, psi: T) -> [T; 2] {
        (self.velocity)(phi, psi)
    }
    fn density(&self, phi: T, psi: T) -> T {
        (self.density)(phi, psi)
    }
}

/// Restriction of a 3-D field to a level torus, read through an angle chart.
/// `a` is the chart coefficient of `ω_n`.
#[derive(Clone)]
pub struct LevelTorusFlow<T: Real> {
    field: Arc<dyn VectorField<T>>,
    volume: Arc<dyn VolumeForm<T>>,
    integral: Arc<dyn ScalarIntegral<T>>,
    chart: Arc<dyn AngleChart<T>>,
    pub c: T,
}

impl<T: Real> LevelTorusFlow<T> {
    fn frame(&self, phi: T, psi: T) -> (Vec3<T>, [Vec3<T>; 2]) {
        let x = self.chart.embed(self.c, [phi, psi]).expect("level validated at construction");
        let t = self.chart.tangents(self.c, [phi, psi]).expect("level validated at construction");
        (x, t)
    }

    /// Largest component of `X` normal to the chart tangents over an `n × n` grid.
    pub fn tangency_defect(&self, n: usize) -> T {
        grid(n)
            .map(|(p, q)| {
                let (x, [tp, tq]) = self.frame(p, q);
                let v = self.field.eval(&x);
                let [a, b] = components(&tp, &tq, &v);
                let r: Vec3<T> = std::array::from_fn(|i| v[i] - a * tp[i] - b * tq[i]);
                r.iter().fold(T::zero(), |m, c| m.max(c.abs()))
            })
            .fold(T::zero(), T::max)
    }
}

fn components<T: Real>(tp: &Vec3<T>, tq: &Vec3<T>, v: &Vec3<T>) -> [T; 2] {
    let (g11, g12, g22) = (dot(tp, tp), dot(tp, tq), dot(tq, tq));
    let (r1, r2) = (dot(tp, v), dot(tq, v));
    let det = g11 * g22 - g12 * g12;
    [(g22 * r1 - g12 * r2) / det, (g11 * r2 - g12 * r1) / det]
}

impl<T: Real> TorusFlow<T> for LevelTorusFlow<T> {
    fn velocity(&self, phi: T, psi: T) -> [T; 2] {
        let (x, [tp, tq]) = self.frame(phi, psi);
        components(&tp, &tq, &self.field.eval(&x))
    }
    fn density(&self, phi: T, psi: T) -> T {
        let (x, [tp, tq]) = self.frame(phi, psi);
        let n = normal_field(self.integral.as_ref(), &Metric::Euclidean, &x)
            .expect("level validated at construction");
        self.volume.density(&x) * det_columns(&n, &tp, &tq)
    }
}

/// Angle-coordinate flow on the level `F = c` of a catalog entry.
pub fn torus_from_level<T: Real>(entry: &CatalogEntry<T>, c: T) -> Result<LevelTorusFlow<T>> {
    let (chart, integral) = match (&entry.angle_chart, entry.integral()) {
        (Some(ch), Some(f)) => (ch.clone(), f.clone()),
        _ => return Err(Error::NoChartAvailable(entry.name.clone())),
    };
    let x = chart.embed(c, [T::zero(); 2])?;
    normal_field(integral.as_ref(), &Metric::Euclidean, &x)?;
    Ok(LevelTorusFlow { field: entry.field.clone(), volume: entry.volume.clone(), integral, chart, c })
}

fn grid<T: Real>(n: usize) -> impl Iterator<Item = (T, T)> {
    let h = T::two_pi() / T::lit(n as f64);
    (0..n).flat_map(move |i| (0..n).map(move |j| (h * T::lit(i as f64), h * T::lit(j as f64))))
}

/// Fourier differentiation matrix on `n` equispaced points of `[0, 2π)`.
fn spectral_matrix<T: Real>(n: usize) -> Vec<Vec<T>> {
    let h = T::two_pi() / T::lit(n as f64);
    let half = T::lit(0.5);
    (0..n)
        .map(|j| {
            (0..n)
                .map(|k| {
                    if j == k {
                        return T::zero();
                    }
                    let d = j as i64 - k as i64;
                    let sign = if d.rem_euclid(2) == 0 { T::one() } else { -T::one() };
                    let arg = T::lit(d as f64) * h * half;
                    let kernel = if n.is_multiple_of(2) { arg.tan().recip() } else { arg.sin().recip() };
                    half * sign * kernel
                })
                .collect()
        })
        .collect()
}

/// `max |∂φ(aA) + ∂ψ(aB)|` on an `n × n` grid with trigonometric differentiation.
pub fn measure_pde_residual<T: Real>(tf: &dyn TorusFlow<T>, n: usize) -> Result<T> {
    if n < 8 {
        return Err(Error::InvalidGrid(format!("need at least 8 points per direction, got {n}")));
    }
    let d = spectral_matrix::<T>(n);
    let h = T::two_pi() / T::lit(n as f64);
    let mut fa = vec![vec![T::zero(); n]; n];
    let mut fb = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let (p, q) = (h * T::lit(i as f64), h * T::lit(j as f64));
            let [a, b] = tf.velocity(p, q);
            let rho = tf.density(p, q);
            fa[i][j] = rho * a;
            fb[i][j] = rho * b;
        }
    }
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            let dphi: T = (0..n).map(|k| d[i][k] * fa[k][j]).sum();
            let dpsi: T = (0..n).map(|k| d[j][k] * fb[i][k]).sum();
            worst = worst.max((dphi + dpsi).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationMethod {
    Quadrature,
    Birkhoff,
}

/// Rotation number as the projective pair `(λ₁ : λ₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationEstimate<T> {
    pub lambda1: T,
    pub lambda2: T,
    /// `λ₁/λ₂`, or `None` when `|λ₂| < 1e-12`.
    pub ratio: Option<T>,
    pub method: RotationMethod,
    /// Estimated error of the ratio (of `λ₁` when the ratio is undefined).
    pub error_bound: T,
    pub pde_residual: Option<T>,
}

impl<T: Real> RotationEstimate<T> {
    fn new(lambda1: T, lambda2: T, method: RotationMethod) -> Self {
        let ratio = (lambda2.abs() >= T::lit(1e-12)).then(|| lambda1 / lambda2);
        Self { lambda1, lambda2, ratio, method, error_bound: T::zero(), pde_residual: None }
    }

    /// `λ₂ = 0`: the ratio is infinite.
    pub fn zero_denominator(&self) -> bool {
        self.ratio.is_none()
    }
}

fn trapezoid<T: Real>(tf: &dyn TorusFlow<T>, n: usize) -> (T, T) {
    let h = T::two_pi() / T::lit(n as f64);
    let w = h * h;
    grid::<T>(n).fold((T::zero(), T::zero()), |(l1, l2), (p, q)| {
        let [a, b] = tf.velocity(p, q);
        let rho = tf.density(p, q);
        (l1 + w * a * rho, l2 + w * b * rho)
    })
}

/// Tensor-product trapezoid rule on an `n × n` grid. The error bound is the
/// change of the ratio against the grid of half size.
pub fn rotation_quadrature<T: Real>(tf: &dyn TorusFlow<T>, n: usize) -> Result<RotationEstimate<T>> {
    let pde = measure_pde_residual(tf, n)?;
    if pde > T::lit(1e-6) {
        log::warn!("measure equation residual {:e} on {n}x{n} grid; rotation estimate unreliable", pde.as_f64());
    }
    let (l1, l2) = trapezoid(tf, n);
    let mut est = RotationEstimate::new(l1, l2, RotationMethod::Quadrature);
    est.pde_residual = Some(pde);
    let (c1, c2) = trapezoid(tf, (n / 2).max(4));
    let coarse = RotationEstimate::<T>::new(c1, c2, RotationMethod::Quadrature);
    est.error_bound = match (est.ratio, coarse.ratio) {
        (Some(a), Some(b)) => (a - b).abs(),
        _ => (l1 - c1).abs(),
    };
    Ok(est)
}

struct Angles<'a, T: Real> {
    tf: &'a dyn TorusFlow<T>,
}

impl<T: Real> Autonomous<T, 2> for Angles<'_, T> {
    fn rhs(&self, y: &[T; 2]) -> [T; 2] {
        let two_pi = T::two_pi();
        self.tf.velocity(
            crate::scalar::wrap_positive(y[0], two_pi),
            crate::scalar::wrap_positive(y[1], two_pi),
        )
    }
}

/// Time averages of the angular velocities along one orbit:
/// `λᵢ = (lifted displacement)/T_total`. Each `λᵢ` is reported with the bound
/// `2π/T_total`, propagated to the ratio.
pub fn rotation_birkhoff<T: Real>(
    tf: &dyn TorusFlow<T>,
    x0: [T; 2],
    t_total: T,
    cfg: &IntegratorConfig<T>,
) -> Result<RotationEstimate<T>> {
    if !(t_total > T::zero()) || !t_total.is_finite() {
        return Err(Error::InvalidParameter("averaging time must be positive".into()));
    }
    cfg.validate()?;
    let y = match integrate(&Angles { tf }, x0, t_total, cfg, |_| ControlFlow::<()>::Continue(()))? {
        Outcome::Finished { y, .. } => y,
        Outcome::Stopped { .. } => unreachable!("continue-only callback"),
    };
    let l1 = (y[0] - x0[0]) / t_total;
    let l2 = (y[1] - x0[1]) / t_total;
    let mut est = RotationEstimate::new(l1, l2, RotationMethod::Birkhoff);
    let e = T::two_pi() / t_total;
    est.error_bound = match est.ratio {
        Some(r) if l1 != T::zero() => r.abs() * (e / l1.abs() + e / l2.abs()),
        Some(_) => e / l2.abs(),
        None => e,
    };
    Ok(est)
}

/// Partial quotients `[a₀; a₁, a₂, …]` of `x`, at most `depth` of them.
/// Expansion stops early when the remainder is within roundoff of an integer.
pub fn continued_fraction<T: Real>(x: T, depth: usize) -> Vec<i64> {
    let mut out = Vec::with_capacity(depth);
    let mut v = x;
    for _ in 0..depth {
        if !v.is_finite() {
            break;
        }
        let a = v.floor();
        out.push(a.to_i64().unwrap_or(i64::MAX));
        let frac = v - a;
        if frac.abs() < T::lit(1e-9) {
            break;
        }
        v = frac.recip();
    }
    out
}
