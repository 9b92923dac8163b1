//! Explicit Runge–Kutta steppers on fixed-size states.

use std::ops::ControlFlow;

use super::{IntegratorConfig, Method};
use crate::error::{Error, Result};
use crate::linalg::axpy;
use crate::scalar::Real;

/// Autonomous ODE `y' = f(y)` on `ℝᴰ`.
pub(crate) trait Autonomous<T: Real, const D: usize> {
    fn rhs(&self, y: &[T; D]) -> [T; D];
}

/// One accepted step, with derivatives at both ends for Hermite interpolation.
pub(crate) struct Step<T, const D: usize> {
    pub t0: T,
    pub y0: [T; D],
    pub f0: [T; D],
    pub t1: T,
    pub y1: [T; D],
    pub f1: [T; D],
}

impl<T: Real, const D: usize> Step<T, D> {
    pub fn h(&self) -> T {
        self.t1 - self.t0
    }

    /// Cubic Hermite interpolant at `θ ∈ [0, 1]`.
    pub fn hermite(&self, theta: T) -> [T; D] {
        let one = T::one();
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let t2 = theta * theta;
        let t3 = t2 * theta;
        let h00 = two * t3 - three * t2 + one;
        let h10 = t3 - two * t2 + theta;
        let h01 = -two * t3 + three * t2;
        let h11 = t3 - t2;
        let h = self.h();
        std::array::from_fn(|i| {
            h00 * self.y0[i] + h10 * h * self.f0[i] + h01 * self.y1[i] + h11 * h * self.f1[i]
        })
    }
}

pub(crate) enum Outcome<T, const D: usize, B> {
    Finished { y: [T; D], steps: usize },
    Stopped { value: B, steps: usize },
}

// Dormand–Prince 5(4) tableau
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Dormand–Prince trial step. Returns the fifth-order solution, the embedded
/// error estimate and the derivative at the new point (FSAL).
pub(crate) fn dopri_step<T: Real, const D: usize>(
    sys: &impl Autonomous<T, D>,
    y: &[T; D],
    f0: &[T; D],
    h: T,
) -> ([T; D], [T; D], [T; D]) {
    let mut k = [[T::zero(); D]; 7];
    k[0] = *f0;
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                ys = axpy(&ys, h * T::lit(a), kj);
            }
        }
        if s == 6 {
            // stage 7 is evaluated at the fifth-order solution
            k[6] = sys.rhs(&ys);
            let err = std::array::from_fn(|i| {
                h * (0..7).fold(T::zero(), |acc, j| acc + T::lit(E[j]) * k[j][i])
            });
            return (ys, err, k[6]);
        }
        k[s] = sys.rhs(&ys);
    }
    unreachable!()
}

pub(crate) fn rk4_step<T: Real, const D: usize>(
    sys: &impl Autonomous<T, D>,
    y: &[T; D],
    f0: &[T; D],
    h: T,
) -> [T; D] {
    let half = h * T::lit(0.5);
    let k1 = *f0;
    let k2 = sys.rhs(&axpy(y, half, &k1));
    let k3 = sys.rhs(&axpy(y, half, &k2));
    let k4 = sys.rhs(&axpy(y, h, &k3));
    let sixth = h / T::lit(6.0);
    std::array::from_fn(|i| {
        y[i] + sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i])
    })
}

/// Solution after a single step of size `h` from `y` with the configured method.
pub(crate) fn single_step<T: Real, const D: usize>(
    sys: &impl Autonomous<T, D>,
    method: Method,
    y: &[T; D],
    f0: &[T; D],
    h: T,
) -> [T; D] {
    match method {
        Method::Rk4Fixed => rk4_step(sys, y, f0, h),
        Method::Rk45Adaptive => dopri_step(sys, y, f0, h).0,
    }
}

fn error_norm<T: Real, const D: usize>(
    err: &[T; D],
    y0: &[T; D],
    y1: &[T; D],
    cfg: &IntegratorConfig<T>,
) -> T {
    (0..D).fold(T::zero(), |m, i| {
        let sc = cfg.abs_tol + cfg.rel_tol * y0[i].abs().max(y1[i].abs());
        m.max(err[i].abs() / sc)
    })
}

fn initial_step<T: Real, const D: usize>(
    sys: &impl Autonomous<T, D>,
    y0: &[T; D],
    f0: &[T; D],
    cfg: &IntegratorConfig<T>,
) -> T {
    let rms = |v: &[T; D]| {
        let s = (0..D).fold(T::zero(), |acc, i| {
            let sc = cfg.abs_tol + cfg.rel_tol * y0[i].abs();
            acc + (v[i] / sc).powi(2)
        });
        (s / T::lit(D as f64)).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let tiny = T::lit(1e-5);
    let h0 = if d0 < tiny || d1 < tiny { T::lit(1e-6) } else { T::lit(0.01) * d0 / d1 };
    let h0 = h0.min(cfg.max_step);
    let y1 = axpy(y0, h0, f0);
    let f1 = sys.rhs(&y1);
    let d2 = rms(&std::array::from_fn(|i| f1[i] - f0[i])) / h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= T::lit(1e-15) {
        (h0 * T::lit(1e-3)).max(T::lit(1e-6))
    } else {
        (T::lit(0.01) / dmax).powf(T::lit(0.2))
    };
    (T::lit(100.0) * h0).min(h1).min(cfg.max_step)
}

/// Integrates from `t = 0` to `t_end`, calling `on_step` after every accepted step.
pub(crate) fn integrate<T, const D: usize, B>(
    sys: &impl Autonomous<T, D>,
    y0: [T; D],
    t_end: T,
    cfg: &IntegratorConfig<T>,
    mut on_step: impl FnMut(&Step<T, D>) -> ControlFlow<B>,
) -> Result<Outcome<T, D, B>>
where
    T: Real,
{
    if t_end == T::zero() {
        return Ok(Outcome::Finished { y: y0, steps: 0 });
    }
    let dir = t_end.signum();
    let mut t = T::zero();
    let mut y = y0;
    let mut f = sys.rhs(&y);
    let mut h = match cfg.method {
        Method::Rk4Fixed => cfg.max_step,
        Method::Rk45Adaptive => initial_step(sys, &y, &f, cfg),
    };
    let mut accepted = 0usize;
    let mut attempts = 0usize;
    loop {
        if attempts >= cfg.max_steps {
            return Err(Error::StepLimitExceeded { max_steps: cfg.max_steps, t: t.as_f64() });
        }
        attempts += 1;
        let remaining = (t_end - t).abs();
        let last = h >= remaining * (T::one() - T::lit(4.0) * T::epsilon());
        let step = if last { remaining } else { h };
        let hs = dir * step;
        let (y1, f1, accept, factor) = match cfg.method {
            Method::Rk4Fixed => {
                let y1 = rk4_step(sys, &y, &f, hs);
                let f1 = sys.rhs(&y1);
                (y1, f1, true, T::one())
            }
            Method::Rk45Adaptive => {
                let (y1, err, f1) = dopri_step(sys, &y, &f, hs);
                let en = error_norm(&err, &y, &y1, cfg);
                let fac = if en == T::zero() {
                    T::lit(5.0)
                } else {
                    (T::lit(0.9) * en.powf(T::lit(-0.2))).max(T::lit(0.2)).min(T::lit(5.0))
                };
                (y1, f1, en <= T::one() && en.is_finite(), fac)
            }
        };
        if !accept {
            h = step * factor.min(T::one());
            if !h.is_finite() || h <= T::lit(16.0) * T::epsilon() * t.abs().max(T::one()) {
                return Err(Error::StepUnderflow { t: t.as_f64(), h: h.as_f64() });
            }
            continue;
        }
        let t1 = if last { t_end } else { t + hs };
        accepted += 1;
        let record = Step { t0: t, y0: y, f0: f, t1, y1, f1 };
        if let ControlFlow::Break(value) = on_step(&record) {
            return Ok(Outcome::Stopped { value, steps: accepted });
        }
        t = t1;
        y = y1;
        f = f1;
        if last {
            return Ok(Outcome::Finished { y, steps: accepted });
        }
        if cfg.method == Method::Rk45Adaptive {
            h = (step * factor).min(cfg.max_step);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;
    impl Autonomous<f64, 1> for Decay {
        fn rhs(&self, y: &[f64; 1]) -> [f64; 1] {
            [-y[0]]
        }
    }

    struct Oscillator;
    impl Autonomous<f64, 2> for Oscillator {
        fn rhs(&self, y: &[f64; 2]) -> [f64; 2] {
            [y[1], -y[0]]
        }
    }

    fn finish<const D: usize>(o: Outcome<f64, D, ()>) -> [f64; D] {
        match o {
            Outcome::Finished { y, .. } => y,
            Outcome::Stopped { .. } => panic!("stopped"),
        }
    }

    #[test]
    fn dopri_reaches_tolerance_on_decay() {
        let cfg = IntegratorConfig::<f64>::default();
        let y = finish(integrate(&Decay, [1.0], 3.0, &cfg, |_| ControlFlow::Continue(())).unwrap());
        assert!((y[0] - (-3.0f64).exp()).abs() < 1e-12);
        let y = finish(integrate(&Decay, [1.0], -2.0, &cfg, |_| ControlFlow::Continue(())).unwrap());
        assert!((y[0] - 2.0f64.exp()).abs() < 1e-11);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let errs: Vec<f64> = [0.1, 0.05]
            .iter()
            .map(|&h| {
                let cfg = IntegratorConfig::rk4(h);
                let y = finish(
                    integrate(&Oscillator, [1.0, 0.0], 2.0, &cfg, |_| ControlFlow::Continue(()))
                        .unwrap(),
                );
                (y[0] - 2.0f64.cos()).abs()
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 3.8 && order < 4.3, "{order}");
    }

    #[test]
    fn hermite_interpolant_is_third_order_accurate() {
        let h = 0.1f64;
        let y0 = [1.0, 0.0];
        let y1 = [h.cos(), -h.sin()];
        let s = Step { t0: 0.0, y0, f0: Oscillator.rhs(&y0), t1: h, y1, f1: Oscillator.rhs(&y1) };
        let mid = s.hermite(0.5);
        assert!((mid[0] - (0.05f64).cos()).abs() < 1e-6);
    }

    #[test]
    fn step_limit_is_reported() {
        let cfg = IntegratorConfig { max_steps: 3, ..IntegratorConfig::default() };
        let r = integrate(&Oscillator, [1.0, 0.0], 100.0, &cfg, |_| ControlFlow::<()>::Continue(()));
        assert!(matches!(r, Err(Error::StepLimitExceeded { .. })));
    }
}
