//! Level surfaces `Σ = {F = c}` of a first integral, the normal field `n`
//! normalized by `dF(n) = 1`, and the area form `ω_n = (ι_n Ω)|_Σ`, which the
//! flow of any field tangent to the levels preserves.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{ScalarIntegral, VectorField, VolumeForm};
use crate::flow::{advance, IntegratorConfig};
use crate::linalg::{axpy, det_columns, dot, mat_vec, norm, scale, sub, Vec3};
use crate::scalar::Real;

/// Gradients with norm at most this are treated as critical.
pub const SINGULAR_GRADIENT_TOL: f64 = 1e-10;
/// Points and tangent vectors are accepted up to this defect.
pub const LEVEL_TOL: f64 = 1e-10;

pub type DiagonalMetricFn<T> = Arc<dyn Fn(&Vec3<T>) -> Vec3<T> + Send + Sync>;

/// Riemannian metric used to raise `dF`.
#[derive(Clone, Default)]
pub enum Metric<T> {
    #[default]
    Euclidean,
    /// Pointwise diagonal entries of `g`, all positive.
    Diagonal(DiagonalMetricFn<T>),
}

impl<T: Real> Metric<T> {
    pub fn constant_diagonal(d: Vec3<T>) -> Self {
        Metric::Diagonal(Arc::new(move |_| d))
    }

    /// `g⁻¹ v`
    pub fn raise(&self, x: &Vec3<T>, v: &Vec3<T>) -> Vec3<T> {
        match self {
            Metric::Euclidean => *v,
            Metric::Diagonal(g) => {
                let d = g(x);
                [v[0] / d[0], v[1] / d[1], v[2] / d[2]]
            }
        }
    }
}

/// `n = ∇_g F / g(∇_g F, ∇_g F)` with `∇_g F = g⁻¹ dF`, so that `dF(n) = 1`.
pub fn normal_field<T: Real>(
    integral: &dyn ScalarIntegral<T>,
    metric: &Metric<T>,
    x: &Vec3<T>,
) -> Result<Vec3<T>> {
    let df = integral.gradient(x);
    let gn = norm(&df);
    if !(gn > T::lit(SINGULAR_GRADIENT_TOL)) {
        return Err(Error::SingularGradient(gn.as_f64()));
    }
    let raised = metric.raise(x, &df);
    // g(∇_g F, ∇_g F) = dF(∇_g F)
    Ok(scale(dot(&df, &raised).recip(), &raised))
}

/// `Σ = {F = c}` with the metric used for the normal.
#[derive(Clone)]
pub struct LevelSurface<T: Real> {
    integral: Arc<dyn ScalarIntegral<T>>,
    pub c: T,
    pub metric: Metric<T>,
}

impl<T: Real> LevelSurface<T> {
    pub fn new(integral: Arc<dyn ScalarIntegral<T>>, c: T) -> Self {
        Self { integral, c, metric: Metric::Euclidean }
    }

    pub fn with_metric(mut self, metric: Metric<T>) -> Self {
        self.metric = metric;
        self
    }

    pub fn integral(&self) -> &dyn ScalarIntegral<T> {
        self.integral.as_ref()
    }

    pub fn defect(&self, x: &Vec3<T>) -> T {
        self.integral.eval(x) - self.c
    }

    pub fn normal(&self, x: &Vec3<T>) -> Result<Vec3<T>> {
        normal_field(self.integral.as_ref(), &self.metric, x)
    }

    /// Moves `x` onto `Σ` by Newton steps along `∇F`.
    pub fn project(&self, x: &Vec3<T>) -> Result<Vec3<T>> {
        let mut p = *x;
        for _ in 0..60 {
            let r = self.defect(&p);
            if r.abs() <= T::lit(1e-14) * (T::one() + self.c.abs()) {
                return Ok(p);
            }
            let g = self.integral.gradient(&p);
            let gg = dot(&g, &g);
            if !(gg.sqrt() > T::lit(SINGULAR_GRADIENT_TOL)) {
                return Err(Error::SingularGradient(gg.sqrt().as_f64()));
            }
            p = axpy(&p, -r / gg, &g);
        }
        let r = self.defect(&p);
        if r.abs() < T::lit(LEVEL_TOL) {
            Ok(p)
        } else {
            Err(Error::OffLevel(r.abs().as_f64()))
        }
    }

    /// Orthonormal basis of `ker dF` built from the two longest projections of
    /// the coordinate vectors.
    pub fn tangent_basis(&self, x: &Vec3<T>) -> Result<[Vec3<T>; 2]> {
        let g = self.integral.gradient(x);
        let gn = norm(&g);
        if !(gn > T::lit(SINGULAR_GRADIENT_TOL)) {
            return Err(Error::SingularGradient(gn.as_f64()));
        }
        let unit = scale(gn.recip(), &g);
        let mut proj: Vec<Vec3<T>> = (0..3)
            .map(|i| {
                let mut e = [T::zero(); 3];
                e[i] = T::one();
                sub(&e, &scale(unit[i], &unit))
            })
            .collect();
        // stable sort keeps the lower index on ties
        proj.sort_by(|a, b| norm(b).partial_cmp(&norm(a)).unwrap_or(std::cmp::Ordering::Equal));
        let t1 = scale(norm(&proj[0]).recip(), &proj[0]);
        let mut t2 = [T::zero(); 3];
        for cand in &proj[1..] {
            let w = sub(cand, &scale(dot(cand, &t1), &t1));
            if norm(&w) > T::lit(1e-8) {
                t2 = scale(norm(&w).recip(), &w);
                break;
            }
        }
        Ok([t1, t2])
    }

    fn check_on_level(&self, x: &Vec3<T>) -> Result<()> {
        let r = self.defect(x).abs();
        if r >= T::lit(LEVEL_TOL) {
            return Err(Error::OffLevel(r.as_f64()));
        }
        Ok(())
    }

    fn check_tangent(&self, x: &Vec3<T>, v: &Vec3<T>) -> Result<()> {
        let d = dot(&self.integral.gradient(x), v).abs();
        if d >= T::lit(LEVEL_TOL) {
            return Err(Error::NonTangent(d.as_f64()));
        }
        Ok(())
    }
}

/// `ω_n(ξ, η) = Ω(n(x), ξ, η)` for `x ∈ Σ` and tangent `ξ, η`.
pub fn omega_n_eval<T: Real>(
    level: &LevelSurface<T>,
    volume: &dyn VolumeForm<T>,
    x: &Vec3<T>,
    xi: &Vec3<T>,
    eta: &Vec3<T>,
) -> Result<T> {
    level.check_on_level(x)?;
    level.check_tangent(x, xi)?;
    level.check_tangent(x, eta)?;
    omega_n_raw(level, volume, x, xi, eta)
}

fn omega_n_raw<T: Real>(
    level: &LevelSurface<T>,
    volume: &dyn VolumeForm<T>,
    x: &Vec3<T>,
    xi: &Vec3<T>,
    eta: &Vec3<T>,
) -> Result<T> {
    let n = level.normal(x)?;
    Ok(volume.density(x) * det_columns(&n, xi, eta))
}

/// Relative change of `ω_n` on the chart tangent pair at `x` after flowing for time `t`:
/// `|ω_n(f^t x)(Mξ, Mη) − ω_n(x)(ξ, η)| / |ω_n(x)(ξ, η)|`.
pub fn invariance_residual<T: Real>(
    level: &LevelSurface<T>,
    field: &dyn VectorField<T>,
    volume: &dyn VolumeForm<T>,
    x: &Vec3<T>,
    t: T,
    cfg: &IntegratorConfig<T>,
) -> Result<T> {
    level.check_on_level(x)?;
    let v = field.eval(x);
    let g = level.integral.gradient(x);
    let scale_gv = norm(&g) * norm(&v);
    let tangency = dot(&g, &v).abs();
    if tangency > T::lit(LEVEL_TOL) * scale_gv.max(T::one()) {
        return Err(Error::NonTangent(tangency.as_f64()));
    }
    let [xi, eta] = level.tangent_basis(x)?;
    let before = omega_n_raw(level, volume, x, &xi, &eta)?;
    if t == T::zero() {
        return Ok(T::zero());
    }
    let r = advance(field, x, t, cfg)?;
    let after = omega_n_raw(
        level,
        volume,
        &r.point,
        &mat_vec(&r.monodromy, &xi),
        &mat_vec(&r.monodromy, &eta),
    )?;
    Ok((after - before).abs() / before.abs().max(T::lit(1e-14)))
}

/// `|dF([X, n])|` with `[X, n] = Dn·X − DX·n`; `Dn` by central differences.
pub fn commutator_defect<T: Real>(
    level: &LevelSurface<T>,
    field: &dyn VectorField<T>,
    x: &Vec3<T>,
) -> Result<T> {
    let h = T::lit(1e-5);
    let v = field.eval(x);
    let n = level.normal(x)?;
    let mut dn_v = [T::zero(); 3];
    for j in 0..3 {
        let mut xp = *x;
        let mut xm = *x;
        xp[j] = xp[j] + h;
        xm[j] = xm[j] - h;
        let d = sub(&level.normal(&xp)?, &level.normal(&xm)?);
        dn_v = axpy(&dn_v, v[j] / (h + h), &d);
    }
    let bracket = sub(&dn_v, &mat_vec(&field.jacobian(x), &n));
    Ok(dot(&level.integral.gradient(x), &bracket).abs())
}

/// `|dF(n) − 1|`
pub fn pairing_defect<T: Real>(level: &LevelSurface<T>, x: &Vec3<T>) -> Result<T> {
    let n = level.normal(x)?;
    Ok((dot(&level.integral.gradient(x), &n) - T::one()).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelInfo {
    pub integral: String,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcludedPoint {
    pub point: [f64; 3],
    pub reason: String,
}

/// Aggregate of invariance residuals over a sample set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiouvilleReport {
    pub level: LevelInfo,
    pub n_samples: usize,
    pub max_residual: Option<f64>,
    pub mean_residual: Option<f64>,
    pub excluded_points: Vec<ExcludedPoint>,
}

/// Runs [`invariance_residual`] on `(point, time)` samples. Points where the
/// gradient vanishes or the flow fails are listed as excluded.
pub fn liouville_check<T: Real>(
    level: &LevelSurface<T>,
    field: &dyn VectorField<T>,
    volume: &dyn VolumeForm<T>,
    samples: &[(Vec3<T>, T)],
    cfg: &IntegratorConfig<T>,
) -> LiouvilleReport {
    let mut residuals = Vec::with_capacity(samples.len());
    let mut excluded = Vec::new();
    for (x, t) in samples {
        match invariance_residual(level, field, volume, x, *t, cfg) {
            Ok(r) => residuals.push(r.as_f64()),
            Err(e) => excluded.push(ExcludedPoint {
                point: x.map(|v| v.as_f64()),
                reason: e.to_string(),
            }),
        }
    }
    summarize(level, samples.len(), &residuals, excluded)
}

pub(crate) fn summarize<T: Real>(
    level: &LevelSurface<T>,
    n_samples: usize,
    residuals: &[f64],
    excluded_points: Vec<ExcludedPoint>,
) -> LiouvilleReport {
    let max_residual = residuals.iter().copied().reduce(f64::max);
    let mean_residual =
        (!residuals.is_empty()).then(|| residuals.iter().sum::<f64>() / residuals.len() as f64);
    LiouvilleReport {
        level: LevelInfo { integral: level.integral.name().to_string(), c: level.c.as_f64() },
        n_samples,
        max_residual,
        mean_residual,
        excluded_points,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{catalog, CatalogParams, Quadratic, SinCoordinate, UniformVolume};

    fn z_level() -> LevelSurface<f64> {
        LevelSurface::new(Arc::new(Quadratic::linear([0.0, 0.0, 1.0])), 0.0)
    }

    fn sphere() -> LevelSurface<f64> {
        LevelSurface::new(Arc::new(Quadratic::sphere()), 1.0)
    }

    #[test]
    fn normal_examples() {
        let n = z_level().normal(&[0.3, 0.2, 0.0]).unwrap();
        assert_eq!(n, [0.0, 0.0, 1.0]);
        let n = sphere().normal(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(n, [0.5, 0.0, 0.0]);
        let g = z_level().with_metric(Metric::constant_diagonal([1.0, 1.0, 4.0]));
        let n = g.normal(&[0.0; 3]).unwrap();
        assert!((n[2] - 1.0).abs() < 1e-15 && n[0] == 0.0 && n[1] == 0.0);
        assert!(matches!(sphere().normal(&[0.0; 3]), Err(Error::SingularGradient(_))));
    }

    #[test]
    fn omega_n_examples() {
        let vol = UniformVolume(1.0);
        let e1 = [1.0, 0.0, 0.0];
        let e2 = [0.0, 1.0, 0.0];
        let lvl = z_level();
        assert_eq!(omega_n_eval(&lvl, &vol, &[0.4, 0.1, 0.0], &e1, &e2).unwrap(), 1.0);
        assert_eq!(omega_n_eval(&lvl, &vol, &[0.4, 0.1, 0.0], &e1, &e1).unwrap(), 0.0);
        // n = (0, 0, 1/2) at the north pole, det[n e1 e2] = 1/2
        let w = omega_n_eval(&sphere(), &vol, &[0.0, 0.0, 1.0], &e1, &e2).unwrap();
        assert!((w - 0.5).abs() < 1e-15);
        assert!(matches!(
            omega_n_eval(&lvl, &vol, &[0.0, 0.0, 0.1], &e1, &e2),
            Err(Error::OffLevel(_))
        ));
        assert!(matches!(
            omega_n_eval(&lvl, &vol, &[0.0; 3], &[0.0, 0.0, 1.0], &e2),
            Err(Error::NonTangent(_))
        ));
    }

    #[test]
    fn tangent_basis_is_orthonormal_and_tangent() {
        let lvl = sphere();
        for x in [[0.6, 0.0, 0.8], [0.0, 1.0, 0.0], [0.48, 0.6, 0.64]] {
            let [a, b] = lvl.tangent_basis(&x).unwrap();
            assert!((norm(&a) - 1.0).abs() < 1e-14 && (norm(&b) - 1.0).abs() < 1e-14);
            assert!(dot(&a, &b).abs() < 1e-14);
            let g = lvl.integral().gradient(&x);
            assert!(dot(&g, &a).abs() < 1e-14 && dot(&g, &b).abs() < 1e-14);
        }
    }

    #[test]
    fn pairing_holds_for_spd_metric() {
        let lvl = sphere()
            .with_metric(Metric::Diagonal(Arc::new(|x: &Vec3<f64>| [1.0 + x[0] * x[0], 2.0, 0.5])));
        for x in [[0.6, 0.0, 0.8], [0.48, 0.6, 0.64]] {
            assert!(pairing_defect(&lvl, &x).unwrap() < 1e-12);
        }
    }

    #[test]
    fn projection_lands_on_level() {
        let lvl = sphere();
        let p = lvl.project(&[0.3, -0.2, 1.7]).unwrap();
        assert!(lvl.defect(&p).abs() < 1e-14);
        let s = LevelSurface::new(Arc::new(SinCoordinate { axis: 2 }), 0.3);
        let p = s.project(&[1.0, 2.0, 0.1]).unwrap();
        assert!((p[2] - 0.3f64.asin()).abs() < 1e-14);
    }

    #[test]
    fn invariance_on_shear_and_sphere() {
        let cfg = IntegratorConfig::default();
        let e = catalog::<f64>("shear_torus", &CatalogParams::new()).unwrap();
        let lvl = LevelSurface::new(e.integrals[0].clone(), 0.3);
        let x = lvl.project(&[0.2, 1.1, 0.3]).unwrap();
        assert_eq!(invariance_residual(&lvl, e.field.as_ref(), e.volume.as_ref(), &x, 0.0, &cfg).unwrap(), 0.0);
        let r = invariance_residual(&lvl, e.field.as_ref(), e.volume.as_ref(), &x, 7.0, &cfg).unwrap();
        assert!(r < 1e-8, "{r}");

        let e = catalog::<f64>("cross_gradient", &CatalogParams::new()).unwrap();
        let lvl = LevelSurface::new(e.integrals[0].clone(), 1.0);
        let x = lvl.project(&[0.5, 0.5, 0.5]).unwrap();
        let r = invariance_residual(&lvl, e.field.as_ref(), e.volume.as_ref(), &x, 3.0, &cfg).unwrap();
        assert!(r < 1e-8, "{r}");
        assert!(commutator_defect(&lvl, e.field.as_ref(), &x).unwrap() < 1e-6);
    }

    #[test]
    fn transversal_field_is_rejected() {
        let e = catalog::<f64>("abc", &CatalogParams::new()).unwrap();
        let lvl = LevelSurface::new(Arc::new(SinCoordinate { axis: 2 }), 0.0);
        let r = invariance_residual(&lvl, e.field.as_ref(), e.volume.as_ref(), &[0.0; 3], 1.0, &IntegratorConfig::default());
        assert!(matches!(r, Err(Error::NonTangent(_))));
    }

    #[test]
    fn liouville_report_edge_cases() {
        let e = catalog::<f64>("cross_gradient", &CatalogParams::new()).unwrap();
        let cfg = IntegratorConfig::default();
        let lvl = LevelSurface::new(e.integrals[0].clone(), 0.0);
        let empty = liouville_check(&lvl, e.field.as_ref(), e.volume.as_ref(), &[], &cfg);
        assert_eq!(empty.n_samples, 0);
        assert_eq!(empty.max_residual, None);
        assert!(empty.excluded_points.is_empty());
        // the level F = 0 collapses to the critical point at the origin
        let rep = liouville_check(&lvl, e.field.as_ref(), e.volume.as_ref(), &[([0.0; 3], 1.0)], &cfg);
        assert_eq!(rep.excluded_points.len(), 1);
        assert!(rep.excluded_points[0].reason.contains("gradient"));
        let json = serde_json::to_value(&rep).unwrap();
        assert!(json["max_residual"].is_null());
    }
}
