//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line and
//! then asserts, so `cargo test --test acceptance -- --nocapture` doubles as a
//! report.

#![allow(clippy::needless_range_loop)]

use std::f64::consts::{PI, SQRT_2, TAU};
use std::time::{Duration, Instant};

use divfree::cli::{execute, Artifact, Cell, Config};
use divfree::fields::{catalog, CatalogParams, Domain, VolumeForm};
use divfree::flow::{advance, flow_identity_residual, Direction, IntegratorConfig};
use divfree::level_measure::{commutator_defect, omega_n_eval, pairing_defect, LevelSurface};
use divfree::poincare::{audit_point, find_periodic_orbit, return_map, OrbitClass, Section, System};
use divfree::suspension::{surface_map, CertifyGrid, Roof, SuspensionModel};
use divfree::torus::{measure_pde_residual, rotation_birkhoff, rotation_quadrature, torus_from_level};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, ok: bool, elapsed: Duration, budget_s: u64, detail: &str) {
    let ok = ok && elapsed.as_secs_f64() < budget_s as f64;
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("criterion {n}: {verdict} ({:.2} s of {budget_s} s) {detail}", elapsed.as_secs_f64());
    assert!(ok, "criterion {n} failed: {detail}");
}

fn params(pairs: &[(&str, f64)]) -> CatalogParams {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn abc_system() -> System<f64> {
    System::from_entry(&catalog("abc", &params(&[("a", 1.0), ("b", 1.0), ("c", 1.0)])).unwrap())
}

fn abc_local_section() -> Section<f64> {
    // on z = π/2 the ABC field has X_z = sin x + cos y; keep points where the
    // crossing is comfortably transverse
    Section::coordinate(2, PI / 2.0, Some(TAU), [Some(TAU), Some(TAU)], Direction::Positive)
        .with_subdomain(|u| {
            let v = [1.0 + u[1].cos(), u[0].cos(), u[0].sin() + u[1].cos()];
            v[2] >= 0.1 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
        })
        .with_max_return_time(30.0)
}

fn abc_max_residual(points: &[[f64; 3]], tol: f64) -> (f64, usize) {
    let sys = abc_system();
    let sec = abc_local_section();
    let cfg = IntegratorConfig::with_tol(tol);
    points.iter().fold((0.0f64, 0), |(m, n), x| match audit_point(&sys, &sec, x, &cfg) {
        Ok(row) => (m.max(row.residual).max(row.det_defect), n + 1),
        Err(_) => (m, n),
    })
}

#[test]
fn criterion_1_return_maps_are_symplectic() {
    let start = Instant::now();
    // shear torus: P(y, z) = (y + 2π B(z)/A(z), z), T = 2π/A(z)
    let (a0, a1, b0, b1) = (2.0, 1.0, 1.0, 0.5);
    let entry = catalog("shear_torus", &params(&[("a0", a0), ("a1", a1), ("b0", b0), ("b1", b1)])).unwrap();
    let sys = System::from_entry(&entry);
    let sec = Section::coordinate(0, 0.0, Some(TAU), [Some(TAU), Some(TAU)], Direction::Positive);
    let cfg = IntegratorConfig::with_tol(1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut shear_res = 0.0f64;
    let mut oracle_gap = 0.0f64;
    for _ in 0..200 {
        let x = [0.0, rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)];
        let row = audit_point(&sys, &sec, &x, &cfg).unwrap();
        shear_res = shear_res.max(row.residual).max(row.det_defect);
        let rd = return_map(&sys, &sec, &x, &cfg).unwrap();
        let z = x[2];
        let (a, b) = (a0 + a1 * z.cos(), b0 + b1 * z.cos());
        let ratio_dz = (-b1 * z.sin() * a + a1 * z.sin() * b) / (a * a);
        let expect = [[1.0, TAU * ratio_dz], [0.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                oracle_gap = oracle_gap.max((rd.dp[i][j] - expect[i][j]).abs());
            }
        }
        oracle_gap = oracle_gap.max((rd.time - TAU / a).abs());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let sec = abc_local_section();
    let mut points = Vec::new();
    while points.len() < 40 {
        let u = [rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)];
        if sec.contains(&u) {
            points.push(sec.embed(&u));
        }
    }
    let (abc12, n12) = abc_max_residual(&points, 1e-12);
    let (abc13, n13) = abc_max_residual(&points, 1e-13);
    let ok = shear_res < 1e-9 && oracle_gap < 1e-9 && n12 >= 20 && n12 == n13 && abc12 < 1e-6 && abc13 < abc12;
    report(
        1,
        ok,
        start.elapsed(),
        60,
        &format!(
            "shear max {shear_res:.2e}, oracle gap {oracle_gap:.2e}; abc max {abc12:.2e} at tol 1e-12, {abc13:.2e} at 1e-13 over {n12} returns"
        ),
    );
}

#[test]
fn criterion_2_volume_and_flow_identity() {
    let start = Instant::now();
    let names = ["abc", "shear_torus", "conjugated_torus", "cross_gradient", "linear_trace_free"];
    let cfg = IntegratorConfig::with_tol(1e-12);
    let mut worst = (0.0f64, 0.0f64);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for name in names {
        let entry = catalog::<f64>(name, &CatalogParams::new()).unwrap();
        let (lo, hi) = match entry.field.domain() {
            Domain::Torus(_) => (0.0, TAU),
            _ => (-1.0, 1.0),
        };
        for _ in 0..100 {
            let x: [f64; 3] = std::array::from_fn(|_| rng.gen_range(lo..hi));
            let t = rng.gen_range(0.0..=10.0);
            let r = advance(entry.field.as_ref(), &x, t, &cfg).unwrap();
            worst.0 = worst.0.max(r.volume_defect(entry.volume.as_ref(), &x));
            worst.1 = worst.1.max(flow_identity_residual(entry.field.as_ref(), &x, t, &cfg).unwrap());
        }
    }
    report(
        2,
        worst.0 < 1e-8 && worst.1 < 1e-8,
        start.elapsed(),
        30,
        &format!("max |det M - 1| {:.2e}, max flow-identity residual {:.2e}", worst.0, worst.1),
    );
}

/// Relative change of `ω_n` on a random tangent pair, recomputed from the flow.
fn random_pair_residual(
    level: &LevelSurface<f64>,
    entry: &divfree::CatalogEntry,
    x: &[f64; 3],
    t: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let [e1, e2] = level.tangent_basis(x).unwrap();
    let mut pick = || {
        let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        [a * e1[0] + b * e2[0], a * e1[1] + b * e2[1], a * e1[2] + b * e2[2]]
    };
    let (xi, eta) = (pick(), pick());
    let volume: &dyn VolumeForm<f64> = entry.volume.as_ref();
    let before = omega_n_eval(level, volume, x, &xi, &eta).unwrap();
    let r = advance(entry.field.as_ref(), x, t, &IntegratorConfig::with_tol(1e-12)).unwrap();
    let push = |v: &[f64; 3]| -> [f64; 3] {
        std::array::from_fn(|i| (0..3).map(|j| r.monodromy[i][j] * v[j]).sum())
    };
    let y = level.project(&r.point).unwrap();
    let after = omega_n_eval(level, volume, &y, &push(&xi), &push(&eta)).unwrap();
    (after - before).abs() / before.abs()
}

#[test]
fn criterion_3_level_area_form_is_invariant() {
    let start = Instant::now();
    let cases: Vec<(&str, usize, f64)> = vec![("shear_torus", 0, 0.3), ("cross_gradient", 0, 1.0), ("cross_gradient", 1, 0.4)];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut inv, mut pair, mut comm) = (0.0f64, 0.0f64, 0.0f64);
    for (name, k, c) in cases {
        let entry = catalog::<f64>(name, &CatalogParams::new()).unwrap();
        let level = LevelSurface::new(entry.integrals[k].clone(), c);
        let torus = matches!(entry.field.domain(), Domain::Torus(_));
        let mut done = 0;
        while done < 100 {
            let raw: [f64; 3] = std::array::from_fn(|_| if torus { rng.gen_range(0.0..TAU) } else { rng.gen_range(-1.5..1.5) });
            let Ok(x) = level.project(&raw) else { continue };
            if level.tangent_basis(&x).is_err() {
                continue;
            }
            let t = rng.gen_range(0.0..=7.0);
            inv = inv.max(random_pair_residual(&level, &entry, &x, t, &mut rng));
            pair = pair.max(pairing_defect(&level, &x).unwrap());
            comm = comm.max(commutator_defect(&level, entry.field.as_ref(), &x).unwrap());
            done += 1;
        }
    }
    report(
        3,
        inv < 1e-8 && pair < 1e-12 && comm < 1e-6,
        start.elapsed(),
        60,
        &format!("max invariance {inv:.2e}, max |dF(n) - 1| {pair:.2e}, max |dF([X,n])| {comm:.2e}"),
    );
}

#[test]
fn criterion_4_rotation_numbers() {
    let start = Instant::now();
    let (omega1, omega2, delta, kappa) = (1.0, SQRT_2, 0.5, 0.3);
    let entry = catalog::<f64>(
        "conjugated_torus",
        &params(&[("omega1", omega1), ("omega2", omega2), ("delta", delta), ("kappa", kappa)]),
    )
    .unwrap();
    let tf = torus_from_level(&entry, 0.2).unwrap();
    let est = rotation_quadrature(&tf, 64).unwrap();
    let quad_err = (est.ratio.unwrap() - 1.0 / SQRT_2).abs();
    let pde = measure_pde_residual(&tf, 64).unwrap();

    // displacement of the lifted first angle differs from ω₁T by at most 2(κ+δ)
    let envelope = 2.0 * (kappa + delta) / omega2;
    let cfg = IntegratorConfig::with_tol(1e-12);
    let mut scaled = Vec::new();
    let mut t = 100.0;
    while t <= 3200.0 {
        let b = rotation_birkhoff(&tf, [0.3, 1.1], t, &cfg).unwrap();
        scaled.push(t * (b.ratio.unwrap() - 1.0 / SQRT_2).abs());
        t *= 2.0;
    }
    let worst_scaled = scaled.iter().cloned().fold(0.0, f64::max);
    report(
        4,
        quad_err < 1e-10 && pde < 1e-10 && worst_scaled <= envelope,
        start.elapsed(),
        30,
        &format!(
            "quadrature error {quad_err:.2e}, measure residual {pde:.2e}, max T*|birkhoff error| {worst_scaled:.3} <= {envelope:.3}"
        ),
    );
}

#[test]
fn criterion_5_suspension_certificate() {
    let start = Instant::now();
    let cfg = IntegratorConfig::with_tol(1e-12);
    let mut lines = Vec::new();
    let mut ok = true;
    for k in [0.5, 1.2] {
        for eps in [0.5, 1.0, 2.0] {
            let model = SuspensionModel::build(surface_map("standard", k).unwrap(), eps, Roof::Constant(1.0)).unwrap();
            let c = model.certify(&CertifyGrid::default(), &cfg).unwrap().residuals;
            let pass = c.closedness < 1e-8
                && c.loop_period < 1e-10
                && c.min_det_lambda > 0.0
                && c.hamilton < 1e-8
                && c.r_spread < 1e-10
                && c.return_map < 1e-10;
            ok &= pass;
            lines.push(format!(
                "K={k} eps={eps}: closed {:.1e} loops {:.1e} det {:.2} ham {:.1e} spread {:.1e} return {:.1e}",
                c.closedness, c.loop_period, c.min_det_lambda, c.hamilton, c.r_spread, c.return_map
            ));
        }
    }
    report(5, ok, start.elapsed(), 120, &lines.join("; "));
}

fn eigen_oracle(m: [[f64; 2]; 2]) -> [Complex64; 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = Complex64::new(tr * tr / 4.0 - det, 0.0).sqrt();
    [tr / 2.0 + disc, tr / 2.0 - disc]
}

fn same_pair(a: [Complex64; 2], b: [Complex64; 2]) -> f64 {
    let direct = (a[0] - b[0]).norm().max((a[1] - b[1]).norm());
    let swapped = (a[0] - b[1]).norm().max((a[1] - b[0]).norm());
    direct.min(swapped)
}

#[test]
fn criterion_6_fixed_point_classification() {
    let start = Instant::now();
    let k = 0.5;
    let model = SuspensionModel::build(surface_map("standard", k).unwrap(), 1.0, Roof::Constant(1.0)).unwrap();
    let level = model.restrict_to_level(0.0);
    let sec = level.section();
    let cfg = IntegratorConfig::with_tol(1e-12);
    let mut ok = true;
    let mut detail = Vec::new();
    for (guess, fixed, want) in [
        ([0.05, 0.02], [0.0, 0.0], OrbitClass::Elliptic),
        ([3.1, -0.03], [PI, 0.0], OrbitClass::SaddleOrientable),
    ] {
        let orbit = find_periodic_orbit(&level, &sec, &guess, 1, &cfg).unwrap();
        let c = fixed[0].cos();
        let oracle = eigen_oracle([[1.0 - k * c, 1.0], [-k * c, 1.0]]);
        let gap = same_pair(orbit.multipliers, oracle);
        let loc = (orbit.chart_point[0] - fixed[0]).abs().max((orbit.chart_point[1] - fixed[1]).abs());
        let product = orbit.multiplier_product_defect();
        ok &= orbit.class == want && product < 1e-8 && gap < 1e-8 && loc < 1e-8;
        detail.push(format!("{:?} -> {} (multiplier gap {gap:.1e}, product {product:.1e})", fixed, orbit.class.as_str()));
    }
    report(6, ok, start.elapsed(), 10, &detail.join("; "));
}

const DETERMINISM_CONFIGS: [&str; 5] = [
    "[run]\nkind = \"poincare_audit\"\nseed = 9\n[field]\nname = \"shear_torus\"\n[section]\naxis = 0\noffset = 0.0\n[sampling]\ncount = 50\n",
    "[run]\nkind = \"level_measure_audit\"\nseed = 9\n[field]\nname = \"cross_gradient\"\n[level]\nc = 1.0\n[sampling]\ncount = 40\n",
    "[run]\nkind = \"rotation_profile\"\n[field]\nname = \"conjugated_torus\"\n[profile]\nlevels = 9\n",
    "[run]\nkind = \"suspension_certify\"\n[map]\nK = 1.2\n[suspension]\nepsilon = [1.0]\ngrid = 4\nreturn_points = 10\n",
    "[run]\nkind = \"orbit_classify\"\n[map]\nK = 0.5\n[orbits]\nguesses = [[0.1, 0.0], [3.0, 0.1]]\n",
];

fn bodies(text: &str, threads: usize) -> Vec<Vec<Vec<Cell>>> {
    let cfg = Config::parse(text).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let out = pool.install(|| execute(&cfg)).unwrap();
    out.artifacts
        .into_iter()
        .filter_map(|a| match a {
            Artifact::Csv { table, .. } => Some(table.rows),
            Artifact::Json { .. } => None,
        })
        .collect()
}

#[test]
fn criterion_7_determinism() {
    let start = Instant::now();
    let mut ok = true;
    for text in DETERMINISM_CONFIGS {
        let a = bodies(text, 1);
        ok &= !a.is_empty() && a.iter().all(|rows| !rows.is_empty());
        ok &= a == bodies(text, 1) && a == bodies(text, 4);
    }
    report(7, ok, start.elapsed(), 120, "five scenarios, repeated runs on 1 and 4 threads");
}
