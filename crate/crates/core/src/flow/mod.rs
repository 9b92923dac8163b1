//! Time integration of `ẋ = X(x)` together with the variational equation
//! `Ṁ = DX(x(t)) M`, `M(0) = I`, and localization of section crossings.
//!
//! The base point and the monodromy are advanced as one 12-dimensional state
//! with a shared step sequence and shared error control.

pub(crate) mod rk;

use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::fields::{VectorField, VolumeForm};
use crate::linalg::{det3, dot, identity, mat_mul, mat_vec, norm, norm_inf, sub, Mat3, Vec3};
use crate::scalar::{wrap_centered, Real};
use rk::{integrate, single_step, Autonomous, Outcome, Step};

/// Integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Classical RK4 with step `max_step`.
    Rk4Fixed,
    /// Dormand–Prince 5(4) with embedded error control.
    Rk45Adaptive,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Rk4Fixed => "rk4_fixed",
            Method::Rk45Adaptive => "rk45_adaptive",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4_fixed" => Ok(Method::Rk4Fixed),
            "rk45_adaptive" => Ok(Method::Rk45Adaptive),
            other => Err(Error::InvalidParameter(format!("unknown integrator method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig<T> {
    pub method: Method,
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_step: T,
    pub max_steps: usize,
}

impl<T: Real> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self {
            method: Method::Rk45Adaptive,
            abs_tol: T::lit(1e-12),
            rel_tol: T::lit(1e-12),
            max_step: T::lit(0.25),
            max_steps: 5_000_000,
        }
    }
}

impl<T: Real> IntegratorConfig<T> {
    /// Adaptive integration with `abs_tol = rel_tol = tol`.
    pub fn with_tol(tol: T) -> Self {
        Self { abs_tol: tol, rel_tol: tol, ..Self::default() }
    }

    /// Fixed-step RK4.
    pub fn rk4(step: T) -> Self {
        Self { method: Method::Rk4Fixed, max_step: step, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        if !positive(self.abs_tol) || !positive(self.rel_tol) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if !positive(self.max_step) {
            return Err(Error::InvalidParameter("max_step must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter("max_steps must be positive".into()));
        }
        Ok(())
    }

    /// Representative tolerance reported with results.
    pub fn tolerance(&self) -> T {
        self.abs_tol.max(self.rel_tol)
    }
}

/// Endpoint of the flow and its linearization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowResult<T> {
    pub time: T,
    /// `f^t(x₀)`, unwrapped.
    pub point: Vec3<T>,
    /// `Df^t(x₀)`
    pub monodromy: Mat3<T>,
    pub steps: usize,
    pub tolerance: T,
}

impl<T: Real> FlowResult<T> {
    /// `|det M · ρ(x(t)) / ρ(x₀) − 1|`; zero for exact volume-preserving flows.
    pub fn volume_defect(&self, volume: &dyn VolumeForm<T>, x0: &Vec3<T>) -> T {
        (det3(&self.monodromy) * volume.density(&self.point) / volume.density(x0) - T::one()).abs()
    }
}

pub(crate) struct Variational<'a, T: Real> {
    pub field: &'a dyn VectorField<T>,
}

pub(crate) fn pack<T: Real>(x: &Vec3<T>, m: &Mat3<T>) -> [T; 12] {
    let mut y = [T::zero(); 12];
    y[..3].copy_from_slice(x);
    for i in 0..3 {
        y[3 + 3 * i..6 + 3 * i].copy_from_slice(&m[i]);
    }
    y
}

pub(crate) fn unpack<T: Real>(y: &[T; 12]) -> (Vec3<T>, Mat3<T>) {
    let x = [y[0], y[1], y[2]];
    let m = std::array::from_fn(|i| [y[3 + 3 * i], y[4 + 3 * i], y[5 + 3 * i]]);
    (x, m)
}

impl<T: Real> Autonomous<T, 12> for Variational<'_, T> {
    fn rhs(&self, y: &[T; 12]) -> [T; 12] {
        let (x, m) = unpack(y);
        let v = self.field.eval(&x);
        let dm = mat_mul(&self.field.jacobian(&x), &m);
        pack(&v, &dm)
    }
}

/// Flows `x₀` for time `t` (negative `t` integrates backwards).
pub fn advance<T: Real>(
    field: &dyn VectorField<T>,
    x0: &Vec3<T>,
    t: T,
    cfg: &IntegratorConfig<T>,
) -> Result<FlowResult<T>> {
    cfg.validate()?;
    if !t.is_finite() {
        return Err(Error::InvalidParameter("flow time must be finite".into()));
    }
    let sys = Variational { field };
    let y0 = pack(x0, &identity());
    match integrate(&sys, y0, t, cfg, |_| ControlFlow::<()>::Continue(()))? {
        Outcome::Finished { y, steps } => {
            let (point, monodromy) = unpack(&y);
            Ok(FlowResult { time: t, point, monodromy, steps, tolerance: cfg.tolerance() })
        }
        Outcome::Stopped { .. } => unreachable!("continue-only callback"),
    }
}

/// `‖Df^t(X(x₀)) − X(f^t(x₀))‖∞`; zero for the exact flow.
pub fn flow_identity_residual<T: Real>(
    field: &dyn VectorField<T>,
    x0: &Vec3<T>,
    t: T,
    cfg: &IntegratorConfig<T>,
) -> Result<T> {
    let r = advance(field, x0, t, cfg)?;
    let pushed = mat_vec(&r.monodromy, &field.eval(x0));
    Ok(norm_inf(&sub(&pushed, &field.eval(&r.point))))
}

/// Implicit surface `{S = 0}` in lifted coordinates.
pub trait Surface<T: Real>: Send + Sync {
    fn value(&self, x: &Vec3<T>) -> T;
    fn gradient(&self, x: &Vec3<T>) -> Vec3<T>;
    /// For periodic surfaces: the size of the jump in `S` where it wraps.
    /// Sign changes across such a jump are not crossings.
    fn wrap_jump(&self) -> Option<T> {
        None
    }
}

/// `S(x) = n·x − offset`
#[derive(Debug, Clone, Copy)]
pub struct Plane<T> {
    pub normal: Vec3<T>,
    pub offset: T,
}

impl<T: Real> Surface<T> for Plane<T> {
    fn value(&self, x: &Vec3<T>) -> T {
        dot(&self.normal, x) - self.offset
    }
    fn gradient(&self, _x: &Vec3<T>) -> Vec3<T> {
        self.normal
    }
}

/// Angular coordinate level `x_axis ≡ offset (mod period)`, with
/// `S = x_axis − offset` reduced to `[−period/2, period/2)`.
#[derive(Debug, Clone, Copy)]
pub struct AngleLevel<T> {
    pub axis: usize,
    pub offset: T,
    pub period: T,
}

impl<T: Real> Surface<T> for AngleLevel<T> {
    fn value(&self, x: &Vec3<T>) -> T {
        wrap_centered(x[self.axis] - self.offset, self.period)
    }
    fn gradient(&self, _x: &Vec3<T>) -> Vec3<T> {
        let mut g = [T::zero(); 3];
        g[self.axis] = T::one();
        g
    }
    fn wrap_jump(&self) -> Option<T> {
        Some(self.period * T::lit(0.5))
    }
}

/// Accepted crossing direction, by the sign of `∇S·X` at the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Positive,
    Negative,
    Either,
}

impl Direction {
    fn accepts<T: Real>(&self, rate: T) -> bool {
        match self {
            Direction::Positive => rate > T::zero(),
            Direction::Negative => rate < T::zero(),
            Direction::Either => true,
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" | "+" => Ok(Direction::Positive),
            "negative" | "-" => Ok(Direction::Negative),
            "either" | "any" => Ok(Direction::Either),
            other => Err(Error::InvalidParameter(format!("unknown direction `{other}`"))),
        }
    }
}

/// First crossing of a surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing<T> {
    pub time: T,
    pub point: Vec3<T>,
    pub monodromy: Mat3<T>,
    pub steps: usize,
}

/// Below this `|∇S·X| / (‖∇S‖‖X‖)` a crossing is declared tangential.
pub const TANGENCY_THRESHOLD: f64 = 1e-8;
const NEWTON_LIMIT: usize = 25;

fn transversality<T: Real>(field: &dyn VectorField<T>, surface: &dyn Surface<T>, x: &Vec3<T>) -> (T, T) {
    let g = surface.gradient(x);
    let v = field.eval(x);
    let rate = dot(&g, &v);
    let scale = norm(&g) * norm(&v);
    let cosine = if scale > T::zero() { rate / scale } else { T::zero() };
    (rate, cosine)
}

/// First time `t* ∈ (0, t_max]` where the orbit of `x₀` crosses `{S = 0}` in the
/// requested direction. The root is refined with Newton's method on the
/// integrator's own step map, so `|S(x*)|` is at roundoff level.
pub fn cross_section_event<T: Real>(
    field: &dyn VectorField<T>,
    x0: &Vec3<T>,
    surface: &dyn Surface<T>,
    direction: Direction,
    cfg: &IntegratorConfig<T>,
    t_max: T,
) -> Result<Crossing<T>> {
    cfg.validate()?;
    let on_surface_tol = T::lit(1e-12);
    if surface.value(x0).abs() <= on_surface_tol {
        let (_, cosine) = transversality(field, surface, x0);
        if cosine.abs() < T::lit(TANGENCY_THRESHOLD) {
            return Err(Error::TangentialCrossing { t: 0.0, cosine: cosine.abs().as_f64() });
        }
    }
    let sys = Variational { field };
    let y0 = pack(x0, &identity());
    let jump = surface.wrap_jump();
    let outcome = integrate(&sys, y0, t_max, cfg, |step: &Step<T, 12>| {
        let xa = [step.y0[0], step.y0[1], step.y0[2]];
        let xb = [step.y1[0], step.y1[1], step.y1[2]];
        let sa = surface.value(&xa);
        let sb = surface.value(&xb);
        if let Some(j) = jump {
            if (sb - sa).abs() > j {
                return ControlFlow::Continue(());
            }
        }
        let changes = (sa < T::zero() && sb >= T::zero()) || (sa > T::zero() && sb <= T::zero());
        if !changes {
            return ControlFlow::Continue(());
        }
        let (theta, y) = locate(&sys, cfg, step, surface, sa);
        let (x, m) = unpack(&y);
        let (rate, cosine) = transversality(field, surface, &x);
        let t = step.t0 + theta * step.h();
        if cosine.abs() < T::lit(TANGENCY_THRESHOLD) {
            return ControlFlow::Break(Err(Error::TangentialCrossing {
                t: t.as_f64(),
                cosine: cosine.abs().as_f64(),
            }));
        }
        if !direction.accepts(rate) {
            return ControlFlow::Continue(());
        }
        ControlFlow::Break(Ok((t, x, m)))
    });
    match outcome {
        Ok(Outcome::Stopped { value, steps }) => {
            let (time, point, monodromy) = value?;
            Ok(Crossing { time, point, monodromy, steps })
        }
        Ok(Outcome::Finished { .. }) | Err(Error::StepLimitExceeded { .. }) => {
            Err(Error::NoCrossing { t_max: t_max.as_f64() })
        }
        Err(e) => Err(e),
    }
}

/// Root of `S` inside an accepted step: Hermite guess, Newton on the partial
/// step map, bisection fallback. Returns `θ ∈ [0, 1]` and the state there.
fn locate<T: Real>(
    sys: &Variational<'_, T>,
    cfg: &IntegratorConfig<T>,
    step: &Step<T, 12>,
    surface: &dyn Surface<T>,
    sa: T,
) -> (T, [T; 12]) {
    let h = step.h();
    let state_at = |theta: T| {
        if theta == T::zero() {
            step.y0
        } else {
            single_step(sys, cfg.method, &step.y0, &step.f0, theta * h)
        }
    };
    let s_of = |y: &[T; 12]| surface.value(&[y[0], y[1], y[2]]);
    let same_side = |s: T| (s < T::zero()) == (sa < T::zero()) && s != T::zero();

    // regula falsi (Illinois) on the dense output for a starting guess
    let (mut lo, mut hi) = (T::zero(), T::one());
    let (mut slo, mut shi) = (sa, s_of(&step.y1));
    let mut side = 0i8;
    let mut theta = T::lit(0.5);
    for _ in 0..40 {
        if shi == slo {
            break;
        }
        theta = (lo * shi - hi * slo) / (shi - slo);
        let st = s_of(&step.hermite(theta));
        if st == T::zero() || (hi - lo) < T::epsilon() {
            break;
        }
        if same_side(st) {
            lo = theta;
            slo = st;
            if side == -1 {
                shi = shi * T::lit(0.5);
            }
            side = -1;
        } else {
            hi = theta;
            shi = st;
            if side == 1 {
                slo = slo * T::lit(0.5);
            }
            side = 1;
        }
    }

    // Newton on the step map
    let (mut lo, mut hi) = (T::zero(), T::one());
    for _ in 0..NEWTON_LIMIT {
        let y = state_at(theta);
        let x = [y[0], y[1], y[2]];
        let s = surface.value(&x);
        if s == T::zero() {
            return (theta, y);
        }
        if same_side(s) {
            lo = theta;
        } else {
            hi = theta;
        }
        let ds = h * dot(&surface.gradient(&x), &sys.field.eval(&x));
        if ds == T::zero() || !ds.is_finite() {
            break;
        }
        let next = theta - s / ds;
        if !(next >= lo && next <= hi) {
            break;
        }
        let delta = (next - theta).abs();
        theta = next;
        if delta <= T::lit(4.0) * T::epsilon() {
            return (theta, state_at(theta));
        }
    }

    // bisection fallback on the bracket
    let mut best = (hi, state_at(hi));
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        let y = state_at(mid);
        let s = s_of(&y);
        best = (mid, y);
        if s == T::zero() || hi - lo <= T::lit(2.0) * T::epsilon() {
            break;
        }
        if same_side(s) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best
}
