//! Return maps on cross-sections, their differentials, symplecticity
//! certificates and periodic orbits with multiplier classification.
//!
//! The differential of the return map is obtained from the monodromy: for a
//! chart vector `ξ` at `x`, `DP ξ = M(T) ξ + X(P x) dT(ξ)` with
//! `dT(ξ) = −dS(M ξ) / dS(X(P x))`, which is the projection of `M ξ` onto the
//! section along the flow direction.

use std::sync::Arc;

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{CatalogEntry, VectorField, VolumeForm};
use crate::flow::{
    cross_section_event, AngleLevel, Direction, IntegratorConfig, Plane, Surface,
    TANGENCY_THRESHOLD,
};
use crate::linalg::{
    axpy, cross, det2, det_columns, dot, eig2, identity, inv2, mat_mul, mat_sub, mat_vec, norm,
    norm_inf, scale, sub, Mat2, Mat3, Vec2, Vec3,
};
use crate::scalar::{wrap_centered, Real};

/// A flow together with its invariant volume and, for quotient spaces, the
/// identification applied to lifted return points.
pub trait Dynamics<T: Real>: Send + Sync {
    fn field(&self) -> &dyn VectorField<T>;
    fn volume(&self) -> &dyn VolumeForm<T>;

    /// Deck transformation or gluing map applied to a lifted return point,
    /// with its differential. `None` keeps the lifted point.
    fn identify(&self, _x: &Vec3<T>) -> Option<(Vec3<T>, Mat3<T>)> {
        None
    }
}

/// Plain `(X, Ω)` pair.
#[derive(Clone)]
pub struct System<T: Real> {
    pub field: Arc<dyn VectorField<T>>,
    pub volume: Arc<dyn VolumeForm<T>>,
}

impl<T: Real> System<T> {
    pub fn new(field: Arc<dyn VectorField<T>>, volume: Arc<dyn VolumeForm<T>>) -> Self {
        Self { field, volume }
    }

    pub fn from_entry(entry: &CatalogEntry<T>) -> Self {
        Self { field: entry.field.clone(), volume: entry.volume.clone() }
    }
}

impl<T: Real> Dynamics<T> for System<T> {
    fn field(&self) -> &dyn VectorField<T> {
        self.field.as_ref()
    }
    fn volume(&self) -> &dyn VolumeForm<T> {
        self.volume.as_ref()
    }
}

/// Two-dimensional coordinates on a section.
pub trait SectionChart<T: Real>: Send + Sync {
    fn embed(&self, u: &Vec2<T>) -> Vec3<T>;
    fn coords(&self, x: &Vec3<T>) -> Vec2<T>;
    /// Tangent basis `(∂x/∂u₁, ∂x/∂u₂)` at a section point.
    fn basis(&self, x: &Vec3<T>) -> [Vec3<T>; 2];
    fn periods(&self) -> [Option<T>; 2] {
        [None, None]
    }
}

/// Chart on `{x_axis = offset}` given by the remaining coordinates in increasing order.
#[derive(Debug, Clone, Copy)]
pub struct CoordinateChart<T> {
    pub axis: usize,
    pub offset: T,
    pub periods: [Option<T>; 2],
}

impl<T> CoordinateChart<T> {
    fn others(&self) -> [usize; 2] {
        match self.axis {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        }
    }
}

impl<T: Real> SectionChart<T> for CoordinateChart<T> {
    fn embed(&self, u: &Vec2<T>) -> Vec3<T> {
        let mut x = [T::zero(); 3];
        let [a, b] = self.others();
        x[self.axis] = self.offset;
        x[a] = u[0];
        x[b] = u[1];
        x
    }
    fn coords(&self, x: &Vec3<T>) -> Vec2<T> {
        let [a, b] = self.others();
        [x[a], x[b]]
    }
    fn basis(&self, _x: &Vec3<T>) -> [Vec3<T>; 2] {
        let [a, b] = self.others();
        let mut e1 = [T::zero(); 3];
        let mut e2 = [T::zero(); 3];
        e1[a] = T::one();
        e2[b] = T::one();
        [e1, e2]
    }
    fn periods(&self) -> [Option<T>; 2] {
        self.periods
    }
}

/// Orthonormal chart on an affine plane.
#[derive(Debug, Clone, Copy)]
pub struct PlaneChart<T> {
    pub origin: Vec3<T>,
    pub e1: Vec3<T>,
    pub e2: Vec3<T>,
}

impl<T: Real> PlaneChart<T> {
    /// Builds an orthonormal frame of the plane through `origin` with normal `normal`.
    pub fn new(origin: Vec3<T>, normal: Vec3<T>) -> Self {
        let n = scale(norm(&normal).recip(), &normal);
        // pick the coordinate axis least aligned with the normal
        let k = (0..3)
            .min_by(|&i, &j| n[i].abs().partial_cmp(&n[j].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap_or(0);
        let mut e = [T::zero(); 3];
        e[k] = T::one();
        let e1 = sub(&e, &scale(dot(&e, &n), &n));
        let e1 = scale(norm(&e1).recip(), &e1);
        let e2 = cross(&n, &e1);
        Self { origin, e1, e2 }
    }
}

impl<T: Real> SectionChart<T> for PlaneChart<T> {
    fn embed(&self, u: &Vec2<T>) -> Vec3<T> {
        axpy(&axpy(&self.origin, u[0], &self.e1), u[1], &self.e2)
    }
    fn coords(&self, x: &Vec3<T>) -> Vec2<T> {
        let d = sub(x, &self.origin);
        [dot(&d, &self.e1), dot(&d, &self.e2)]
    }
    fn basis(&self, _x: &Vec3<T>) -> [Vec3<T>; 2] {
        [self.e1, self.e2]
    }
}

pub type Subdomain<T> = Arc<dyn Fn(&Vec2<T>) -> bool + Send + Sync>;

/// Cross-section `{S = 0}` with a chart, an accepted crossing direction and an
/// optional subdomain `N₁` on which returns are attempted.
#[derive(Clone)]
pub struct Section<T: Real> {
    surface: Arc<dyn Surface<T>>,
    chart: Arc<dyn SectionChart<T>>,
    pub direction: Direction,
    subdomain: Option<Subdomain<T>>,
    pub max_return_time: T,
}

impl<T: Real> Section<T> {
    pub fn new(
        surface: Arc<dyn Surface<T>>,
        chart: Arc<dyn SectionChart<T>>,
        direction: Direction,
    ) -> Self {
        Self { surface, chart, direction, subdomain: None, max_return_time: T::lit(100.0) }
    }

    /// `{x_axis = offset}`; with `period`, the level is taken modulo the period
    /// (a coordinate-angle section on a torus).
    pub fn coordinate(
        axis: usize,
        offset: T,
        period: Option<T>,
        chart_periods: [Option<T>; 2],
        direction: Direction,
    ) -> Self {
        let surface: Arc<dyn Surface<T>> = match period {
            Some(p) => Arc::new(AngleLevel { axis, offset, period: p }),
            None => {
                let mut normal = [T::zero(); 3];
                normal[axis] = T::one();
                Arc::new(Plane { normal, offset })
            }
        };
        let chart = Arc::new(CoordinateChart { axis, offset, periods: chart_periods });
        Self::new(surface, chart, direction)
    }

    /// Coordinate-angle section on the standard torus T³.
    pub fn torus_angle(axis: usize, offset: T, direction: Direction) -> Self {
        let p = Some(T::two_pi());
        Self::coordinate(axis, offset, p, [p, p], direction)
    }

    /// Affine plane through `origin` with normal `normal`.
    pub fn plane(origin: Vec3<T>, normal: Vec3<T>, direction: Direction) -> Self {
        let offset = dot(&normal, &origin);
        Self::new(Arc::new(Plane { normal, offset }), Arc::new(PlaneChart::new(origin, normal)), direction)
    }

    pub fn with_subdomain(mut self, f: impl Fn(&Vec2<T>) -> bool + Send + Sync + 'static) -> Self {
        self.subdomain = Some(Arc::new(f));
        self
    }

    pub fn with_max_return_time(mut self, t: T) -> Self {
        self.max_return_time = t;
        self
    }

    pub fn surface(&self) -> &dyn Surface<T> {
        self.surface.as_ref()
    }

    pub fn value(&self, x: &Vec3<T>) -> T {
        self.surface.value(x)
    }

    pub fn embed(&self, u: &Vec2<T>) -> Vec3<T> {
        self.chart.embed(u)
    }

    pub fn coords(&self, x: &Vec3<T>) -> Vec2<T> {
        self.chart.coords(x)
    }

    pub fn basis(&self, x: &Vec3<T>) -> [Vec3<T>; 2] {
        self.chart.basis(x)
    }

    pub fn contains(&self, u: &Vec2<T>) -> bool {
        self.subdomain.as_ref().is_none_or(|f| f(u))
    }

    /// `a − b` in chart coordinates, reduced modulo the chart periods.
    pub fn chart_difference(&self, a: &Vec2<T>, b: &Vec2<T>) -> Vec2<T> {
        let p = self.chart.periods();
        std::array::from_fn(|i| match p[i] {
            Some(per) => wrap_centered(a[i] - b[i], per),
            None => a[i] - b[i],
        })
    }

    /// Coefficient `w(x) = ω_X(u₁, u₂)` of the restricted 2-form in the chart.
    pub fn form_coefficient(&self, sys: &dyn Dynamics<T>, x: &Vec3<T>) -> T {
        let [u1, u2] = self.basis(x);
        sys.volume().density(x) * det_columns(&sys.field().eval(x), &u1, &u2)
    }
}

/// Relative residuals are divided by `max(|ω(ξ, η)|, EPS_FLOOR)`.
pub const EPS_FLOOR: f64 = 1e-14;
/// Start points must satisfy `|S(x)| ≤` this.
pub const ON_SECTION_TOL: f64 = 1e-10;

/// First return of a section point and its linearization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnData<T> {
    pub x: Vec3<T>,
    pub px: Vec3<T>,
    pub x_chart: Vec2<T>,
    pub px_chart: Vec2<T>,
    /// Return time `T(x)`.
    pub time: T,
    /// `DP` in chart coordinates: column `i` is the image of `uᵢ`.
    pub dp: Mat2<T>,
    /// `dT(uᵢ)`
    pub dt: Vec2<T>,
    /// Monodromy `Df^T`, expressed in the identified frame.
    pub monodromy: Mat3<T>,
    /// `DP uᵢ` as 3-vectors at `Px`.
    pub dp_lift: [Vec3<T>; 2],
    /// Chart basis at `x`.
    pub basis: [Vec3<T>; 2],
    /// `X(Px)` in the identified frame.
    pub field_at_px: Vec3<T>,
    pub steps: usize,
}

impl<T: Real> ReturnData<T> {
    /// `max ‖DP uᵢ − (M uᵢ + X(Px) dT(uᵢ))‖∞`
    pub fn reconstruction_defect(&self) -> T {
        (0..2).fold(T::zero(), |m, i| {
            let rebuilt = axpy(&mat_vec(&self.monodromy, &self.basis[i]), self.dt[i], &self.field_at_px);
            m.max(norm_inf(&sub(&self.dp_lift[i], &rebuilt)))
        })
    }

    /// `|w(Px) det DP − w(x)| / |w(x)|` with `w` the chart coefficient of `ω_X`.
    pub fn det_defect(&self, sys: &dyn Dynamics<T>, section: &Section<T>) -> T {
        let wx = section.form_coefficient(sys, &self.x);
        let wp = section.form_coefficient(sys, &self.px);
        (wp * det2(&self.dp) - wx).abs() / wx.abs().max(T::lit(EPS_FLOOR))
    }
}

fn check_start<T: Real>(sys: &dyn Dynamics<T>, section: &Section<T>, x: &Vec3<T>) -> Result<()> {
    let s = section.value(x);
    if s.abs() > T::lit(ON_SECTION_TOL) {
        return Err(Error::OffSection(s.abs().as_f64()));
    }
    if !section.contains(&section.coords(x)) {
        return Err(Error::OutsideSubdomain);
    }
    let g = section.surface().gradient(x);
    let v = sys.field().eval(x);
    let scale = norm(&g) * norm(&v);
    let cosine = if scale > T::zero() { dot(&g, &v) / scale } else { T::zero() };
    if cosine.abs() < T::lit(TANGENCY_THRESHOLD) {
        return Err(Error::TangentialCrossing { t: 0.0, cosine: cosine.abs().as_f64() });
    }
    Ok(())
}

/// Coefficients of `v` in the (not necessarily orthonormal) basis `b`.
fn chart_components<T: Real>(b: &[Vec3<T>; 2], v: &Vec3<T>) -> Vec2<T> {
    let gram = [[dot(&b[0], &b[0]), dot(&b[0], &b[1])], [dot(&b[1], &b[0]), dot(&b[1], &b[1])]];
    let rhs = [dot(&b[0], v), dot(&b[1], v)];
    match inv2(&gram) {
        Some(g) => mat_vec(&g, &rhs),
        None => [T::nan(), T::nan()],
    }
}

/// First return of `x ∈ N₁` to the section.
pub fn return_map<T: Real>(
    sys: &dyn Dynamics<T>,
    section: &Section<T>,
    x: &Vec3<T>,
    cfg: &IntegratorConfig<T>,
) -> Result<ReturnData<T>> {
    check_start(sys, section, x)?;
    let hit = cross_section_event(
        sys.field(),
        x,
        section.surface(),
        section.direction,
        cfg,
        section.max_return_time,
    )?;
    let field = sys.field();
    let pre = hit.point;
    let mut xp = field.eval(&pre);
    let grad = section.surface().gradient(&pre);
    let rate = dot(&grad, &xp);
    let basis = section.basis(x);
    let mut dt = [T::zero(); 2];
    let mut lift = [[T::zero(); 3]; 2];
    for i in 0..2 {
        let w = mat_vec(&hit.monodromy, &basis[i]);
        dt[i] = -dot(&grad, &w) / rate;
        lift[i] = axpy(&w, dt[i], &xp);
    }
    let mut monodromy = hit.monodromy;
    let mut px = pre;
    if let Some((glued, dg)) = sys.identify(&pre) {
        px = glued;
        monodromy = mat_mul(&dg, &monodromy);
        xp = mat_vec(&dg, &xp);
        lift = [mat_vec(&dg, &lift[0]), mat_vec(&dg, &lift[1])];
    }
    let target = section.basis(&px);
    let c0 = chart_components(&target, &lift[0]);
    let c1 = chart_components(&target, &lift[1]);
    Ok(ReturnData {
        x: *x,
        px,
        x_chart: section.coords(x),
        px_chart: section.coords(&px),
        time: hit.time,
        dp: [[c0[0], c1[0]], [c0[1], c1[1]]],
        dt,
        monodromy,
        dp_lift: lift,
        basis,
        field_at_px: xp,
        steps: hit.steps,
    })
}

/// `|ω_{Px}(DP ξ, DP η) − ω_x(ξ, η)| / max(|ω_x(ξ, η)|, ε)` for the chart basis `(ξ, η)`.
pub fn symplecticity_residual<T: Real>(
    sys: &dyn Dynamics<T>,
    section: &Section<T>,
    x: &Vec3<T>,
    cfg: &IntegratorConfig<T>,
) -> Result<T> {
    let rd = return_map(sys, section, x, cfg)?;
    Ok(symplecticity_of(sys, &rd))
}

/// Symplecticity residual of already computed return data.
pub fn symplecticity_of<T: Real>(sys: &dyn Dynamics<T>, rd: &ReturnData<T>) -> T {
    let vol = sys.volume();
    let field = sys.field();
    let before = vol.density(&rd.x) * det_columns(&field.eval(&rd.x), &rd.basis[0], &rd.basis[1]);
    let after =
        vol.density(&rd.px) * det_columns(&field.eval(&rd.px), &rd.dp_lift[0], &rd.dp_lift[1]);
    (after - before).abs() / before.abs().max(T::lit(EPS_FLOOR))
}

/// Iterated return `Pⁿ` in chart coordinates with its chart differential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IteratedReturn<T> {
    pub start: Vec3<T>,
    pub end: Vec3<T>,
    pub end_chart: Vec2<T>,
    pub dp: Mat2<T>,
    pub time: T,
}

pub fn iterate_return<T: Real>(
    sys: &dyn Dynamics<T>,
    section: &Section<T>,
    u: &Vec2<T>,
    n: usize,
    cfg: &IntegratorConfig<T>,
) -> Result<IteratedReturn<T>> {
    let start = section.embed(u);
    let mut x = start;
    let mut dp = identity::<T, 2>();
    let mut time = T::zero();
    for _ in 0..n {
        let rd = return_map(sys, section, &x, cfg)?;
        dp = mat_mul(&rd.dp, &dp);
        time = time + rd.time;
        x = rd.px;
    }
    Ok(IteratedReturn { start, end: x, end_chart: section.coords(&x), dp, time })
}

/// Type of a periodic orbit read off from its multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitClass {
    /// Complex conjugate pair on the unit circle.
    Elliptic,
    /// Real pair `μ, μ⁻¹ > 0`.
    SaddleOrientable,
    /// Real pair `μ, μ⁻¹ < 0`.
    SaddleNonorientable,
    /// A multiplier within `1e-6` of `±1`.
    Parabolic,
}

impl OrbitClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            OrbitClass::Elliptic => "elliptic",
            OrbitClass::SaddleOrientable => "saddle_orientable",
            OrbitClass::SaddleNonorientable => "saddle_nonorientable",
            OrbitClass::Parabolic => "parabolic",
        }
    }
}

pub const PARABOLIC_TOL: f64 = 1e-6;

/// Multipliers of a linearized return map and the resulting class.
pub fn classify<T: Real>(dp: &Mat2<T>) -> ([Complex<T>; 2], OrbitClass) {
    let mu = eig2(dp);
    let tol = T::lit(PARABOLIC_TOL);
    let one = Complex::new(T::one(), T::zero());
    let near_unit = mu.iter().any(|m| (*m - one).norm() < tol || (*m + one).norm() < tol);
    let class = if near_unit {
        OrbitClass::Parabolic
    } else if mu[0].im != T::zero() {
        OrbitClass::Elliptic
    } else if mu[0].re > T::zero() {
        OrbitClass::SaddleOrientable
    } else {
        OrbitClass::SaddleNonorientable
    };
    (mu, class)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicOrbit<T> {
    pub chart_point: Vec2<T>,
    pub point: Vec3<T>,
    /// Total flow time of the `n` returns.
    pub period: T,
    pub iterates: usize,
    pub dp: Mat2<T>,
    pub multipliers: [Complex<T>; 2],
    pub class: OrbitClass,
    pub newton_iterations: usize,
    /// `‖Pⁿ(x*) − x*‖∞` in the chart.
    pub residual: T,
}

impl<T: Real> PeriodicOrbit<T> {
    /// `|μ₁ μ₂ − 1|`
    pub fn multiplier_product_defect(&self) -> T {
        (self.multipliers[0] * self.multipliers[1] - Complex::new(T::one(), T::zero())).norm()
    }
}

pub const NEWTON_MAX_ITER: usize = 50;
pub const PERIODIC_TOL: f64 = 1e-10;

/// Newton iteration on `Pⁿ(u) − u` in section coordinates.
pub fn find_periodic_orbit<T: Real>(
    sys: &dyn Dynamics<T>,
    section: &Section<T>,
    guess: &Vec2<T>,
    n: usize,
    cfg: &IntegratorConfig<T>,
) -> Result<PeriodicOrbit<T>> {
    if n == 0 {
        return Err(Error::InvalidParameter("iterate count must be positive".into()));
    }
    let mut u = *guess;
    let mut residual = T::infinity();
    for it in 0..=NEWTON_MAX_ITER {
        let ir = iterate_return(sys, section, &u, n, cfg)?;
        let g = section.chart_difference(&ir.end_chart, &u);
        let jac = mat_sub(&ir.dp, &identity());
        let scale = T::one() + crate::linalg::mat_norm_inf(&ir.dp).powi(2);
        let d = det2(&jac);
        if d.abs() <= T::lit(1e-14) * scale {
            return Err(Error::SingularJacobian(d.as_f64()));
        }
        residual = norm_inf(&g);
        if residual < T::lit(PERIODIC_TOL) {
            let (multipliers, class) = classify(&ir.dp);
            return Ok(PeriodicOrbit {
                chart_point: u,
                point: ir.start,
                period: ir.time,
                iterates: n,
                dp: ir.dp,
                multipliers,
                class,
                newton_iterations: it,
                residual,
            });
        }
        if it == NEWTON_MAX_ITER {
            break;
        }
        let inv = inv2(&jac).ok_or(Error::SingularJacobian(d.as_f64()))?;
        let delta = mat_vec(&inv, &g);
        u = sub(&u, &delta);
        if !u.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    Err(Error::NewtonDiverged { iterations: NEWTON_MAX_ITER, residual: residual.as_f64() })
}

/// One row of a certification sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditRow<T> {
    pub x: Vec3<T>,
    pub time: T,
    pub residual: T,
    pub det_defect: T,
}

/// Return data and residuals for one section point.
pub fn audit_point<T: Real>(
    sys: &dyn Dynamics<T>,
    section: &Section<T>,
    x: &Vec3<T>,
    cfg: &IntegratorConfig<T>,
) -> Result<AuditRow<T>> {
    let rd = return_map(sys, section, x, cfg)?;
    Ok(AuditRow {
        x: *x,
        time: rd.time,
        residual: symplecticity_of(sys, &rd),
        det_defect: rd.det_defect(sys, section),
    })
}
