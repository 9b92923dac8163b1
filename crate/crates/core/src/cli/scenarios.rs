use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{Config, FieldSpec, Kind, SectionSpec};
use super::output::{Artifact, Cell, Table};
use super::CliError;
use crate::error::Error;
use crate::fields::{catalog, CatalogEntry, Domain};
use crate::flow::IntegratorConfig;
use crate::level_measure::{
    commutator_defect, invariance_residual, pairing_defect, summarize, ExcludedPoint, LevelSurface,
    Metric,
};
use crate::linalg::{norm, Vec2, Vec3};
use crate::poincare::{audit_point, find_periodic_orbit, CoordinateChart, Dynamics, Section, SectionChart, System};
use crate::suspension::{surface_map, CertifyGrid, Roof, SuspensionModel};
use crate::torus::{rotation_quadrature, torus_from_level};

/// Result of a scenario before anything is written.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    /// Residuals at or above their threshold.
    pub failures: Vec<String>,
    /// Computations that failed outright.
    pub numerical: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if !self.numerical.is_empty() {
            3
        } else if !self.failures.is_empty() {
            1
        } else {
            0
        }
    }
}

/// Runs the configured scenario on the current rayon pool.
pub fn execute(cfg: &Config) -> Result<Outcome, CliError> {
    let integ = cfg.integrator.build()?;
    match cfg.run.kind {
        Kind::PoincareAudit => poincare_audit(cfg, &integ),
        Kind::LevelMeasureAudit => level_measure_audit(cfg, &integ),
        Kind::RotationProfile => rotation_profile(cfg),
        Kind::SuspensionCertify => suspension_certify(cfg, &integ),
        Kind::OrbitClassify => orbit_classify(cfg, &integ),
    }
}

fn config_error(e: Error) -> CliError {
    CliError::Config(e.to_string())
}

fn resolve_field(spec: &FieldSpec) -> Result<CatalogEntry<f64>, CliError> {
    catalog(&spec.name, &spec.params).map_err(config_error)
}

/// Retries integrator exhaustion with a larger step budget.
fn with_retry<R>(
    cfg: &IntegratorConfig<f64>,
    op: impl Fn(&IntegratorConfig<f64>) -> crate::Result<R>,
) -> crate::Result<R> {
    let mut c = *cfg;
    let mut last = None;
    for _ in 0..3 {
        match op(&c) {
            Err(e @ (Error::StepLimitExceeded { .. } | Error::StepUnderflow { .. })) => {
                c.max_steps = c.max_steps.saturating_mul(4);
                last = Some(e);
            }
            other => return other,
        }
    }
    Err(last.expect("loop ran"))
}

fn build_section(
    spec: &SectionSpec,
    field: Arc<dyn crate::fields::VectorField<f64>>,
) -> Result<(Section<f64>, CoordinateChart<f64>), CliError> {
    if spec.axis > 2 {
        return Err(CliError::Config(format!("section.axis must be 0, 1 or 2 (got {})", spec.axis)));
    }
    let periodic = spec.periodic.unwrap_or(matches!(field.domain(), Domain::Torus(_)));
    let period = periodic.then_some(TAU);
    let chart = CoordinateChart { axis: spec.axis, offset: spec.offset, periods: [period, period] };
    let mut section = Section::coordinate(spec.axis, spec.offset, period, [period, period], spec.direction()?)
        .with_max_return_time(spec.max_return_time);
    if let Some(mc) = spec.min_cosine {
        let axis = spec.axis;
        section = section.with_subdomain(move |u: &Vec2<f64>| {
            let v = field.eval(&chart.embed(u));
            v[axis] >= mc * norm(&v)
        });
    }
    Ok((section, chart))
}

fn poincare_audit(cfg: &Config, integ: &IntegratorConfig<f64>) -> Result<Outcome, CliError> {
    let entry = resolve_field(cfg.field.as_ref().expect("checked"))?;
    let spec = cfg.section.as_ref().expect("checked");
    let sampling = cfg.sampling.as_ref().expect("filled");
    let (section, chart) = build_section(spec, entry.field.clone())?;
    let sys = System::from_entry(&entry);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let mut points: Vec<Vec3<f64>> = Vec::with_capacity(sampling.count);
    let budget = sampling.count.saturating_mul(1000).max(1000);
    let mut draws = 0usize;
    while points.len() < sampling.count {
        if draws >= budget {
            return Err(CliError::Config("section subdomain is too small to sample".into()));
        }
        draws += 1;
        let u: Vec2<f64> = std::array::from_fn(|i| rng.gen_range(spec.lo[i]..=spec.hi[i]));
        if section.contains(&u) {
            points.push(chart.embed(&u));
        }
    }

    let results: Vec<_> = points
        .par_iter()
        .map(|x| with_retry(integ, |c| audit_point(&sys, &section, x, c)))
        .collect();

    let mut table = Table::new(vec!["x", "y", "z", "T", "residual", "det_defect"]);
    let mut out = Outcome::default();
    let mut skipped = 0usize;
    let thr = cfg.run.threshold;
    for (x, r) in points.iter().zip(results) {
        match r {
            Ok(row) => {
                if !(row.residual < thr) || !(row.det_defect < thr) {
                    out.failures.push(format!(
                        "symplecticity at ({:e}, {:e}, {:e}): residual {:e}, det defect {:e}",
                        x[0], x[1], x[2], row.residual, row.det_defect
                    ));
                }
                table.push(vec![
                    x[0].into(),
                    x[1].into(),
                    x[2].into(),
                    row.time.into(),
                    row.residual.into(),
                    row.det_defect.into(),
                ]);
            }
            Err(Error::NoCrossing { .. }) => skipped += 1,
            Err(e) => out.numerical.push(format!("return map at ({:e}, {:e}, {:e}): {e}", x[0], x[1], x[2])),
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} sample points did not return within the time budget");
    }
    out.artifacts.push(Artifact::Csv { name: "poincare_audit.csv".into(), table });
    Ok(out)
}

fn level_measure_audit(cfg: &Config, integ: &IntegratorConfig<f64>) -> Result<Outcome, CliError> {
    let entry = resolve_field(cfg.field.as_ref().expect("checked"))?;
    let lspec = cfg.level.as_ref().expect("checked");
    let sampling = cfg.sampling.as_ref().expect("filled");
    let integral = entry.integrals.get(lspec.integral).cloned().ok_or_else(|| {
        CliError::Config(format!("`{}` has no integral with index {}", entry.name, lspec.integral))
    })?;
    let mut level = LevelSurface::new(integral, lspec.c);
    if let Some(d) = lspec.metric {
        if d.iter().any(|v| !(*v > 0.0)) {
            return Err(CliError::Config("level.metric entries must be positive".into()));
        }
        level = level.with_metric(Metric::constant_diagonal(d));
    }
    let torus = matches!(entry.field.domain(), Domain::Torus(_));
    let lo = sampling.lo.unwrap_or(if torus { [0.0; 3] } else { [-1.5; 3] });
    let hi = sampling.hi.unwrap_or(if torus { [TAU; 3] } else { [1.5; 3] });
    if !(sampling.t_max > 0.0) {
        return Err(CliError::Config("sampling.t_max must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let draws: Vec<(Vec3<f64>, f64)> = (0..sampling.count)
        .map(|_| {
            let x: Vec3<f64> = std::array::from_fn(|i| rng.gen_range(lo[i]..=hi[i]));
            let t = sampling.t_max * (1.0 - rng.gen::<f64>());
            (x, t)
        })
        .collect();

    struct Row {
        x: Vec3<f64>,
        t: f64,
        residual: f64,
        pairing: f64,
        commutator: f64,
    }
    let field = entry.field.as_ref();
    let volume = entry.volume.as_ref();
    let results: Vec<Result<Row, (Vec3<f64>, Error)>> = draws
        .par_iter()
        .map(|(start, t)| {
            let x = level.project(start).map_err(|e| (*start, e))?;
            let residual = with_retry(integ, |c| invariance_residual(&level, field, volume, &x, *t, c))
                .map_err(|e| (x, e))?;
            let pairing = pairing_defect(&level, &x).map_err(|e| (x, e))?;
            let commutator = commutator_defect(&level, field, &x).map_err(|e| (x, e))?;
            Ok(Row { x, t: *t, residual, pairing, commutator })
        })
        .collect();

    let mut out = Outcome::default();
    let mut table = Table::new(vec!["x", "y", "z", "t", "residual", "pairing_defect", "commutator_defect"]);
    let mut residuals = Vec::new();
    let mut excluded = Vec::new();
    let thr = cfg.run.threshold;
    for r in results {
        match r {
            Ok(row) => {
                let at = format!("({:e}, {:e}, {:e})", row.x[0], row.x[1], row.x[2]);
                if !(row.residual < thr) {
                    out.failures.push(format!("invariance at {at}: {:e}", row.residual));
                }
                if !(row.pairing < thr) {
                    out.failures.push(format!("dF(n) - 1 at {at}: {:e}", row.pairing));
                }
                if !(row.commutator < lspec.commutator_threshold) {
                    out.failures.push(format!("dF([X,n]) at {at}: {:e}", row.commutator));
                }
                residuals.push(row.residual);
                table.push(vec![
                    row.x[0].into(),
                    row.x[1].into(),
                    row.x[2].into(),
                    row.t.into(),
                    row.residual.into(),
                    row.pairing.into(),
                    row.commutator.into(),
                ]);
            }
            Err((x, e @ (Error::SingularGradient(_) | Error::OffLevel(_) | Error::NonTangent(_)))) => {
                excluded.push(ExcludedPoint { point: x, reason: e.to_string() })
            }
            Err((x, e)) => out.numerical.push(format!("flow at ({:e}, {:e}, {:e}): {e}", x[0], x[1], x[2])),
        }
    }
    let report = summarize(&level, sampling.count, &residuals, excluded);
    out.artifacts.push(Artifact::Csv { name: "level_measure_audit.csv".into(), table });
    out.artifacts.push(Artifact::Json {
        name: "liouville_report.json".into(),
        value: serde_json::to_value(&report).map_err(|e| CliError::Io(e.to_string()))?,
    });
    Ok(out)
}

fn rotation_profile(cfg: &Config) -> Result<Outcome, CliError> {
    let entry = resolve_field(cfg.field.as_ref().expect("checked"))?;
    let p = cfg.profile.as_ref().expect("filled");
    if p.levels == 0 {
        return Err(CliError::Config("profile.levels must be positive".into()));
    }
    if p.grid < 8 {
        return Err(CliError::Config("profile.grid must be at least 8".into()));
    }
    let levels: Vec<f64> = (0..p.levels)
        .map(|i| if p.levels == 1 { p.c_min } else { p.c_min + (p.c_max - p.c_min) * i as f64 / (p.levels - 1) as f64 })
        .collect();
    torus_from_level(&entry, levels[0]).map_err(config_error)?;
    let results: Vec<_> = levels
        .par_iter()
        .map(|&c| torus_from_level(&entry, c).and_then(|tf| rotation_quadrature(&tf, p.grid)))
        .collect();
    let mut out = Outcome::default();
    let mut table = Table::new(vec!["c", "lambda1", "lambda2", "lambda", "pde_residual"]);
    for (c, r) in levels.iter().zip(results) {
        match r {
            Ok(est) => {
                let pde = est.pde_residual.unwrap_or(f64::NAN);
                if !(pde < cfg.run.threshold) {
                    out.failures.push(format!("measure equation at c = {c:e}: {pde:e}"));
                }
                let ratio = est.ratio.map(Cell::Num).unwrap_or_else(|| Cell::Text("inf".into()));
                table.push(vec![(*c).into(), est.lambda1.into(), est.lambda2.into(), ratio, pde.into()]);
            }
            Err(e) => out.numerical.push(format!("level c = {c:e}: {e}")),
        }
    }
    out.artifacts.push(Artifact::Csv { name: "rotation_profile.csv".into(), table });
    Ok(out)
}

fn suspension_certify(cfg: &Config, integ: &IntegratorConfig<f64>) -> Result<Outcome, CliError> {
    let m = cfg.map.as_ref().expect("filled");
    let s = cfg.suspension.as_ref().expect("filled");
    let base = surface_map(&m.name, m.k).map_err(config_error)?;
    let models: Vec<SuspensionModel<f64>> = s
        .epsilon
        .iter()
        .map(|&eps| SuspensionModel::build(base.clone(), eps, Roof::Constant(s.roof)).map_err(config_error))
        .collect::<Result<_, _>>()?;
    let grid = CertifyGrid { n: s.grid, s_values: s.s_values.clone(), return_points: s.return_points, flow_time: s.flow_time };
    let certs: Vec<_> = models.par_iter().map(|model| model.certify(&grid, integ)).collect();

    let mut out = Outcome::default();
    let mut table = Table::new(vec!["epsilon", "residual", "value"]);
    let mut json = Vec::new();
    for (eps, cert) in s.epsilon.iter().zip(certs) {
        match cert {
            Ok(cert) => {
                for (name, value) in cert.failures(cfg.run.threshold) {
                    out.failures.push(format!("epsilon = {eps:e}: {name} = {value:e}"));
                }
                for (name, value) in cert.residuals.entries() {
                    table.push(vec![(*eps).into(), name.into(), value.into()]);
                }
                table.push(vec![(*eps).into(), "min_det_lambda".into(), cert.residuals.min_det_lambda.into()]);
                json.push(serde_json::to_value(&cert).map_err(|e| CliError::Io(e.to_string()))?);
            }
            Err(e) => out.numerical.push(format!("epsilon = {eps:e}: {e}")),
        }
    }
    out.artifacts.push(Artifact::Csv { name: "suspension_certificate.csv".into(), table });
    out.artifacts.push(Artifact::Json { name: "suspension_certificate.json".into(), value: json.into() });
    Ok(out)
}

fn orbit_classify(cfg: &Config, integ: &IntegratorConfig<f64>) -> Result<Outcome, CliError> {
    let o = cfg.orbits.as_ref().expect("checked");
    if o.iterates == 0 {
        return Err(CliError::Config("orbits.iterates must be positive".into()));
    }
    let (dynamics, section): (Box<dyn Dynamics<f64>>, Section<f64>) = match &cfg.map {
        Some(m) => {
            let base = surface_map(&m.name, m.k).map_err(config_error)?;
            let model = SuspensionModel::build(base, 1.0, Roof::Constant(1.0)).map_err(config_error)?;
            let level = model.restrict_to_level(o.s0);
            let section = level.section();
            (Box::new(level), section)
        }
        None => {
            let entry = resolve_field(cfg.field.as_ref().expect("checked"))?;
            let (section, _) = build_section(cfg.section.as_ref().expect("checked"), entry.field.clone())?;
            (Box::new(System::from_entry(&entry)), section)
        }
    };
    let results: Vec<_> = o
        .guesses
        .par_iter()
        .map(|g| with_retry(integ, |c| find_periodic_orbit(dynamics.as_ref(), &section, g, o.iterates, c)))
        .collect();
    let mut out = Outcome::default();
    let mut table = Table::new(vec![
        "guess_u1", "guess_u2", "u1", "u2", "iterates", "period", "mu1_re", "mu1_im", "mu2_re", "mu2_im",
        "class", "product_defect", "newton_residual",
    ]);
    for (g, r) in o.guesses.iter().zip(results) {
        match r {
            Ok(orbit) => {
                let defect = orbit.multiplier_product_defect();
                if !(defect < cfg.run.threshold) {
                    out.failures.push(format!("multiplier product at ({:e}, {:e}): {defect:e}", g[0], g[1]));
                }
                let [m1, m2] = orbit.multipliers;
                table.push(vec![
                    g[0].into(),
                    g[1].into(),
                    orbit.chart_point[0].into(),
                    orbit.chart_point[1].into(),
                    orbit.iterates.into(),
                    orbit.period.into(),
                    m1.re.into(),
                    m1.im.into(),
                    m2.re.into(),
                    m2.im.into(),
                    orbit.class.as_str().into(),
                    defect.into(),
                    orbit.residual.into(),
                ]);
            }
            Err(e) => out.numerical.push(format!("orbit from ({:e}, {:e}): {e}", g[0], g[1])),
        }
    }
    out.artifacts.push(Artifact::Csv { name: "orbit_classify.csv".into(), table });
    Ok(out)
}
