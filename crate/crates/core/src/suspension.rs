//! Suspension of an area-preserving surface map and its thickening to a 4-D
//! Hamiltonian model, realized in one chart.
//!
//! Chart coordinates are `(x₁, x₂, r, s)` with the identification
//! `(x, r, s) ~ (P(x), r − 1, s)`. The field is `X̃ = ∂r`, the symplectic form
//! is `Λ = ω̃ + ε⁻¹ dr∧ds` where `ω̃` pulls back `ω_X = ι_X Ω` from the 3-D
//! suspension, and the Hamiltonian `H` is obtained by integrating `ι_X̃ Λ`
//! along paths from the base point `(0, 0, 0, 0)`. In this chart `H = s/ε`,
//! so the certificate checks that the construction is consistent rather than
//! re-deriving existence of `H`.

use std::ops::ControlFlow;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{halton3, Domain, VectorField, VolumeForm};
use crate::flow::rk::{integrate, Autonomous, Outcome};
use crate::flow::{Direction, IntegratorConfig};
use crate::forms::{interior_product, pullback, TwoForm};
use crate::linalg::{det, det2, inv2, mat_mul, norm_inf, solve, sub, transpose, Mat2, Mat3, Vec2, Vec3};
use crate::poincare::{return_map, symplecticity_of, Dynamics, Section};
use crate::scalar::{wrap_centered, Real};

/// Chart point `(x₁, x₂, r, s)`.
pub type ChartPoint<T> = [T; 4];

/// Area-preserving map of a surface `N` with `ω = w(x) dx₁∧dx₂`.
pub trait SurfaceMap<T: Real>: Send + Sync {
    fn name(&self) -> &str;
    fn apply(&self, x: &Vec2<T>) -> Vec2<T>;
    fn jacobian(&self, x: &Vec2<T>) -> Mat2<T>;
    fn inverse(&self, x: &Vec2<T>) -> Vec2<T>;
    /// `w(x)`
    fn density(&self, _x: &Vec2<T>) -> T {
        T::one()
    }
    /// Periods of the chart coordinates (`None` for a planar direction).
    fn periods(&self) -> [Option<T>; 2] {
        [Some(T::two_pi()); 2]
    }
    /// Map parameter, if any.
    fn parameter(&self) -> Option<T> {
        None
    }
}

/// Chirikov standard map on T²: `p' = p − K sin x`, `x' = x + p'`.
#[derive(Debug, Clone, Copy)]
pub struct StandardMap<T> {
    pub k: T,
}

impl<T: Real> SurfaceMap<T> for StandardMap<T> {
    fn name(&self) -> &str {
        "standard"
    }
    fn apply(&self, x: &Vec2<T>) -> Vec2<T> {
        let p = x[1] - self.k * x[0].sin();
        [x[0] + p, p]
    }
    fn jacobian(&self, x: &Vec2<T>) -> Mat2<T> {
        let kc = self.k * x[0].cos();
        [[T::one() - kc, T::one()], [-kc, T::one()]]
    }
    fn inverse(&self, x: &Vec2<T>) -> Vec2<T> {
        let q = x[0] - x[1];
        [q, x[1] + self.k * q.sin()]
    }
    fn parameter(&self) -> Option<T> {
        Some(self.k)
    }
}

/// Identity map of T².
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityMap;

impl<T: Real> SurfaceMap<T> for IdentityMap {
    fn name(&self) -> &str {
        "identity"
    }
    fn apply(&self, x: &Vec2<T>) -> Vec2<T> {
        *x
    }
    fn jacobian(&self, _x: &Vec2<T>) -> Mat2<T> {
        crate::linalg::identity()
    }
    fn inverse(&self, x: &Vec2<T>) -> Vec2<T> {
        *x
    }
}

/// Looks up a surface map by name; `k` is the standard-map parameter.
pub fn surface_map<T: Real>(name: &str, k: T) -> Result<Arc<dyn SurfaceMap<T>>> {
    match name {
        "standard" => Ok(Arc::new(StandardMap { k })),
        "identity" => Ok(Arc::new(IdentityMap)),
        other => Err(Error::UnknownName(other.into())),
    }
}

type RoofFn<T> = Arc<dyn Fn(&Vec2<T>) -> T + Send + Sync>;
type RoofGradFn<T> = Arc<dyn Fn(&Vec2<T>) -> Vec2<T> + Send + Sync>;

/// Return time of the 3-D suspension flow as a function of the base point.
#[derive(Clone)]
pub enum Roof<T> {
    Constant(T),
    Function { value: RoofFn<T>, gradient: RoofGradFn<T> },
}

impl<T: Real> Roof<T> {
    pub fn value(&self, x: &Vec2<T>) -> T {
        match self {
            Roof::Constant(c) => *c,
            Roof::Function { value, .. } => value(x),
        }
    }
    pub fn gradient(&self, x: &Vec2<T>) -> Vec2<T> {
        match self {
            Roof::Constant(_) => [T::zero(); 2],
            Roof::Function { gradient, .. } => gradient(x),
        }
    }
}

/// Piecewise-linear path in the chart. Consecutive pieces, and the end of the
/// last piece and the start of the first, must be equivalent under the gluing.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartLoop<T> {
    pub pieces: Vec<Vec<ChartPoint<T>>>,
}

impl<T: Real> ChartLoop<T> {
    pub fn polyline(points: Vec<ChartPoint<T>>) -> Self {
        Self { pieces: vec![points] }
    }
}

/// Junctions closer than this (after gluing) are accepted.
pub const CLOSURE_TOL: f64 = 1e-10;
const SAMPLE_GRID: usize = 16;

/// The 4-D chart model `(M̃, Λ, X̃, H)`.
#[derive(Clone)]
pub struct SuspensionModel<T: Real> {
    base: Arc<dyn SurfaceMap<T>>,
    epsilon: T,
    roof: Roof<T>,
}

impl<T: Real> SuspensionModel<T> {
    /// Checks `ε ≠ 0`, positivity of the roof and `w(Px) det DP = w(x)` on a 16×16 grid.
    pub fn build(base: Arc<dyn SurfaceMap<T>>, epsilon: T, roof: Roof<T>) -> Result<Self> {
        if epsilon == T::zero() || !epsilon.is_finite() {
            return Err(Error::ZeroEpsilon);
        }
        let model = Self { base, epsilon, roof };
        let mut worst = T::zero();
        for x in model.base_grid(SAMPLE_GRID) {
            let r = model.roof.value(&x);
            if !(r > T::zero()) {
                return Err(Error::NonPositiveRoof(r.as_f64()));
            }
            worst = worst.max(model.base_symplectic_defect(&x));
        }
        if worst > T::lit(1e-8) {
            return Err(Error::NonSymplecticBase(worst.as_f64()));
        }
        Ok(model)
    }

    pub fn base(&self) -> &dyn SurfaceMap<T> {
        self.base.as_ref()
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn roof(&self) -> &Roof<T> {
        &self.roof
    }

    fn base_symplectic_defect(&self, x: &Vec2<T>) -> T {
        let w = self.base.density(x);
        (self.base.density(&self.base.apply(x)) * det2(&self.base.jacobian(x)) - w).abs()
    }

    fn base_grid(&self, n: usize) -> impl Iterator<Item = Vec2<T>> + '_ {
        let span = |i: usize| self.base.periods()[i].unwrap_or(T::two_pi());
        let (h1, h2) = (span(0) / T::lit(n as f64), span(1) / T::lit(n as f64));
        (0..n).flat_map(move |i| (0..n).map(move |j| [h1 * T::lit(i as f64), h2 * T::lit(j as f64)]))
    }

    /// `X̃ = ∂r`
    pub fn x_tilde(&self, _p: &ChartPoint<T>) -> ChartPoint<T> {
        [T::zero(), T::zero(), T::one(), T::zero()]
    }

    /// `ω̃`: pullback of `ω_X = ι_{∂r}(w dx₁∧dx₂∧dr)` under the projection
    /// `(x, r, s) ↦ (x, r)`.
    pub fn omega_tilde(&self, p: &ChartPoint<T>) -> TwoForm<T, 4> {
        let (o, l) = (T::zero(), T::one());
        let w = self.base.density(&[p[0], p[1]]);
        let omega = interior_product(w, &[o, o, l], &[p[0], p[1], p[2]]);
        let proj = [[l, o, o, o], [o, l, o, o], [o, o, l, o]];
        pullback(&omega, &proj, *p)
    }

    /// `Λ = ω̃ + ε⁻¹ dr∧ds`
    pub fn lambda(&self, p: &ChartPoint<T>) -> TwoForm<T, 4> {
        let mut rs = [[T::zero(); 4]; 4];
        rs[2][3] = self.epsilon.recip();
        rs[3][2] = -self.epsilon.recip();
        self.omega_tilde(p).add(&TwoForm::from_matrix(*p, rs))
    }

    /// `ι_X̃ Λ` as a covector in the chart.
    pub fn i_x_lambda(&self, p: &ChartPoint<T>) -> ChartPoint<T> {
        self.lambda(p).contract(&self.x_tilde(p))
    }

    /// Applies the deck action `n` times: `(Pⁿ x, r − n, s)`.
    pub fn glue(&self, p: &ChartPoint<T>, n: i32) -> ChartPoint<T> {
        let mut x = [p[0], p[1]];
        for _ in 0..n.unsigned_abs() {
            x = if n > 0 { self.base.apply(&x) } else { self.base.inverse(&x) };
        }
        [x[0], x[1], p[2] - T::lit(n as f64), p[3]]
    }

    /// Differential of [`SuspensionModel::glue`] at `p`.
    pub fn glue_jacobian(&self, p: &ChartPoint<T>, n: i32) -> [[T; 4]; 4] {
        let mut x = [p[0], p[1]];
        let mut d = crate::linalg::identity::<T, 2>();
        for _ in 0..n.unsigned_abs() {
            if n > 0 {
                d = mat_mul(&self.base.jacobian(&x), &d);
                x = self.base.apply(&x);
            } else {
                let prev = self.base.inverse(&x);
                let inv = inv2(&self.base.jacobian(&prev)).unwrap_or([[T::nan(); 2]; 2]);
                d = mat_mul(&inv, &d);
                x = prev;
            }
        }
        let mut g = crate::linalg::identity::<T, 4>();
        for i in 0..2 {
            for j in 0..2 {
                g[i][j] = d[i][j];
            }
        }
        g
    }

    /// Distance between `a` and `b` up to the deck action (`n ∈ {−1, 0, 1}`)
    /// and the periods of `N`.
    pub fn gluing_gap(&self, a: &ChartPoint<T>, b: &ChartPoint<T>) -> T {
        let periods = self.base.periods();
        (-1..=1)
            .map(|n| {
                let g = self.glue(a, n);
                (0..4).fold(T::zero(), |m, i| {
                    let d = g[i] - b[i];
                    let d = match (i, periods.get(i).copied().flatten()) {
                        (0 | 1, Some(per)) => wrap_centered(d, per),
                        _ => d,
                    };
                    m.max(d.abs())
                })
            })
            .fold(T::infinity(), T::min)
    }

    /// `∫ ι_X̃ Λ` along the straight segment from `a` to `b`.
    pub fn line_integral(&self, a: &ChartPoint<T>, b: &ChartPoint<T>) -> T {
        let d = sub(b, a);
        let f = |t: T| {
            let p: ChartPoint<T> = std::array::from_fn(|i| a[i] + t * d[i]);
            crate::linalg::dot(&self.i_x_lambda(&p), &d)
        };
        adaptive_simpson(&f, T::zero(), T::one(), T::lit(1e-14))
    }

    /// `∮ ι_X̃ Λ` over a loop closed under the gluing.
    pub fn period_integral(&self, path: &ChartLoop<T>) -> Result<T> {
        let pieces: Vec<&Vec<ChartPoint<T>>> = path.pieces.iter().filter(|p| !p.is_empty()).collect();
        if pieces.is_empty() {
            return Err(Error::OpenPath(f64::INFINITY));
        }
        for (k, piece) in pieces.iter().enumerate() {
            let next = pieces[(k + 1) % pieces.len()];
            let gap = self.gluing_gap(piece.last().expect("nonempty"), &next[0]);
            if !(gap < T::lit(CLOSURE_TOL)) {
                return Err(Error::OpenPath(gap.as_f64()));
            }
        }
        Ok(pieces
            .iter()
            .flat_map(|piece| piece.windows(2))
            .map(|w| self.line_integral(&w[0], &w[1]))
            .fold(T::zero(), |acc, v| acc + v))
    }

    /// `H(p) = ∫_γ ι_X̃ Λ` with `γ` running from `(0, 0, 0, 0)` along `s` to
    /// `(0, 0, 0, s)` and then straight to `p` inside the slice `{s = const}`.
    pub fn hamiltonian(&self, p: &ChartPoint<T>) -> T {
        let o = T::zero();
        let origin = [o; 4];
        let lift = [o, o, o, p[3]];
        self.line_integral(&origin, &lift) + self.line_integral(&lift, p)
    }

    /// Central-difference gradient of `H`.
    fn hamiltonian_gradient(&self, p: &ChartPoint<T>, h: T) -> ChartPoint<T> {
        std::array::from_fn(|i| {
            let mut a = *p;
            let mut b = *p;
            a[i] = a[i] + h;
            b[i] = b[i] - h;
            (self.hamiltonian(&a) - self.hamiltonian(&b)) / (h + h)
        })
    }

    /// Largest component of the finite-difference exterior derivative of `ι_X̃ Λ`.
    fn closedness(&self, p: &ChartPoint<T>, h: T) -> T {
        let partial: [ChartPoint<T>; 4] = std::array::from_fn(|i| {
            let mut a = *p;
            let mut b = *p;
            a[i] = a[i] + h;
            b[i] = b[i] - h;
            let (fa, fb) = (self.i_x_lambda(&a), self.i_x_lambda(&b));
            std::array::from_fn(|j| (fa[j] - fb[j]) / (h + h))
        });
        let mut worst = T::zero();
        for i in 0..4 {
            for j in i + 1..4 {
                worst = worst.max((partial[i][j] - partial[j][i]).abs());
            }
        }
        worst
    }

    /// Flows `p` by `X̃` for time `t` together with the linearization, then
    /// brings `r` back to `[0, 1)` through the gluing.
    pub fn flow(&self, p: &ChartPoint<T>, t: T, cfg: &IntegratorConfig<T>) -> Result<(ChartPoint<T>, [[T; 4]; 4])> {
        let mut y0 = [T::zero(); 20];
        y0[..4].copy_from_slice(p);
        for i in 0..4 {
            y0[4 + 5 * i] = T::one();
        }
        let y = match integrate(&ModelFlow { model: self }, y0, t, cfg, |_| ControlFlow::<()>::Continue(()))? {
            Outcome::Finished { y, .. } => y,
            Outcome::Stopped { .. } => unreachable!("continue-only callback"),
        };
        let q: ChartPoint<T> = [y[0], y[1], y[2], y[3]];
        let m: [[T; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| y[4 + 4 * i + j]));
        let n = q[2].floor().to_i32().unwrap_or(0);
        let dg = self.glue_jacobian(&q, n);
        Ok((self.glue(&q, n), mat_mul(&dg, &m)))
    }

    /// The 3-D suspension flow on the level `M_{s₀} = {s = s₀}`.
    pub fn restrict_to_level(&self, s0: T) -> LevelFlow<T> {
        LevelFlow {
            field: SuspensionField { roof: self.roof.clone() },
            volume: SuspensionVolume { base: self.base.clone(), roof: self.roof.clone() },
            model: self.clone(),
            s0,
        }
    }

    /// Runs every check on the sample grid.
    pub fn certify(&self, grid: &CertifyGrid<T>, cfg: &IntegratorConfig<T>) -> Result<SuspensionCertificate> {
        if grid.n == 0 || grid.s_values.is_empty() {
            return Err(Error::InvalidGrid("certificate grid must be nonempty".into()));
        }
        let h = T::lit(1e-5);
        let n = grid.n;
        let inv_eps = self.epsilon.recip();
        let mut res = CertificateResiduals { min_det_lambda: f64::INFINITY, ..Default::default() };
        let e_r = [T::zero(), T::zero(), T::one(), T::zero()];
        let base_points: Vec<Vec2<T>> = self.base_grid(n).collect();
        for x in &base_points {
            res.base_symplecticity = res.base_symplecticity.max(self.base_symplectic_defect(x).as_f64());
            for &s in &grid.s_values {
                let h0 = self.hamiltonian(&[x[0], x[1], T::zero(), s]);
                for k in 0..n {
                    let r = T::lit(k as f64) / T::lit(n as f64);
                    let p = [x[0], x[1], r, s];
                    let alpha = self.i_x_lambda(&p);
                    let dh = self.hamiltonian_gradient(&p, h);
                    res.dh_residual = res.dh_residual.max(norm_inf(&sub(&dh, &alpha)).as_f64());
                    res.closedness = res.closedness.max(self.closedness(&p, h).as_f64());

                    let lam = self.lambda(&p);
                    let d = det(lam.matrix());
                    let w = self.base.density(x);
                    res.min_det_lambda = res.min_det_lambda.min(d.as_f64());
                    res.det_lambda_defect =
                        res.det_lambda_defect.max((d - w * w * inv_eps * inv_eps).abs().as_f64());

                    // ι_v Λ = dH  ⇔  Λᵀ v = dH
                    let v = solve(&transpose(lam.matrix()), &dh).unwrap_or([T::nan(); 4]);
                    res.hamilton = res.hamilton.max(norm_inf(&sub(&v, &e_r)).as_f64());

                    let hp = self.hamiltonian(&p);
                    res.r_spread = res.r_spread.max((hp - h0).abs().as_f64());
                    res.hamiltonian_closed_form =
                        res.hamiltonian_closed_form.max((hp - s * inv_eps).abs().as_f64());

                    // quantities agree at p and at its image under the deck action
                    let gp = self.glue(&p, 1);
                    let dg = self.glue_jacobian(&p, 1);
                    let pulled = mat_mul(&transpose(&dg), &mat_mul(self.lambda(&gp).matrix(), &dg));
                    let alpha_g = crate::linalg::vec_mat(&self.i_x_lambda(&gp), &dg);
                    let mut gl = (self.hamiltonian(&gp) - hp).abs().max(norm_inf(&sub(&alpha_g, &alpha)));
                    gl = gl.max(crate::linalg::mat_norm_inf(&crate::linalg::mat_sub(&pulled, lam.matrix())));
                    res.gluing = res.gluing.max(gl.as_f64());

                    if k == 0 {
                        for lp in self.generating_loops(&p) {
                            res.loop_period = res.loop_period.max(self.period_integral(&lp)?.abs().as_f64());
                        }
                    }

                    let (q, m) = self.flow(&p, grid.flow_time, cfg)?;
                    res.level_invariance = res.level_invariance.max((q[3] - s).abs().as_f64());
                    let moved = mat_mul(&transpose(&m), &mat_mul(self.lambda(&q).matrix(), &m));
                    let diff = crate::linalg::mat_sub(&moved, lam.matrix());
                    res.lie_full = res.lie_full.max(crate::linalg::mat_norm_inf(&diff).as_f64());
                    let block = diff[2][2].abs().max(diff[2][3].abs()).max(diff[3][2].abs()).max(diff[3][3].abs());
                    res.lie_rs_block = res.lie_rs_block.max(block.as_f64());
                }
            }
        }

        // return map of the suspension flow on M₀
        let level = self.restrict_to_level(T::zero());
        let section = level.section();
        let spans = self.base.periods().map(|p| p.unwrap_or(T::two_pi()));
        for i in 0..grid.return_points {
            let hp = halton3(i);
            let x = [T::lit(hp[0]) * spans[0], T::lit(hp[1]) * spans[1]];
            let rd = return_map(&level, &section, &[x[0], x[1], T::zero()], cfg)?;
            let expect = self.base.apply(&x);
            let d = section.chart_difference(&rd.px_chart, &expect);
            res.return_map = res.return_map.max(d[0].abs().max(d[1].abs()).as_f64());
            res.return_symplecticity = res.return_symplecticity.max(symplecticity_of(&level, &rd).as_f64());
        }

        Ok(SuspensionCertificate {
            base_map: self.base.name().to_string(),
            k: self.base.parameter().map(|k| k.as_f64()),
            epsilon: self.epsilon.as_f64(),
            residuals: res,
            grid: GridInfo {
                n,
                s_values: grid.s_values.iter().map(|s| s.as_f64()).collect(),
                return_points: grid.return_points,
                flow_time: grid.flow_time.as_f64(),
            },
        })
    }

    /// The two fiber cycles of T², the suspension cycle through `p`, and a
    /// fiber cycle displaced in `s`.
    pub fn generating_loops(&self, p: &ChartPoint<T>) -> Vec<ChartLoop<T>> {
        let [x1, x2, r, s] = *p;
        let tp = T::two_pi();
        let half = T::lit(0.5);
        let px = self.base.apply(&[x1, x2]);
        vec![
            ChartLoop::polyline(vec![*p, [x1 + tp, x2, r, s]]),
            ChartLoop::polyline(vec![*p, [x1, x2 + tp, r, s]]),
            ChartLoop {
                pieces: vec![
                    vec![*p, [x1, x2, r + T::one(), s]],
                    vec![[px[0], px[1], r, s], *p],
                ],
            },
            ChartLoop::polyline(vec![
                *p,
                [x1, x2, r, s + half],
                [x1 + tp, x2, r, s + half],
                [x1 + tp, x2, r, s],
            ]),
        ]
    }
}

struct ModelFlow<'a, T: Real> {
    model: &'a SuspensionModel<T>,
}

impl<T: Real> Autonomous<T, 20> for ModelFlow<'_, T> {
    fn rhs(&self, y: &[T; 20]) -> [T; 20] {
        // X̃ is constant in the chart, so the variational part has zero derivative
        let v = self.model.x_tilde(&[y[0], y[1], y[2], y[3]]);
        let mut out = [T::zero(); 20];
        out[..4].copy_from_slice(&v);
        out
    }
}

fn adaptive_simpson<T: Real>(f: &impl Fn(T) -> T, a: T, b: T, tol: T) -> T {
    #[allow(clippy::too_many_arguments)]
    fn rec<T: Real>(f: &impl Fn(T) -> T, a: T, b: T, fa: T, fm: T, fb: T, whole: T, tol: T, depth: u32) -> T {
        let half = T::lit(0.5);
        let m = (a + b) * half;
        let (lm, rm) = ((a + m) * half, (m + b) * half);
        let (flm, frm) = (f(lm), f(rm));
        let sixth = T::lit(1.0 / 6.0);
        let left = (m - a) * sixth * (fa + T::lit(4.0) * flm + fm);
        let right = (b - m) * sixth * (fm + T::lit(4.0) * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= T::lit(15.0) * tol {
            return left + right + delta / T::lit(15.0);
        }
        rec(f, a, m, fa, flm, fm, left, tol * half, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, tol * half, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let fm = f((a + b) * T::lit(0.5));
    let whole = (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Grid for [`SuspensionModel::certify`]: `n` points in each of `x₁`, `x₂`, `r`
/// for every listed `s`, plus `return_points` base points for the return-map check.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifyGrid<T> {
    pub n: usize,
    pub s_values: Vec<T>,
    pub return_points: usize,
    /// Flow time for the transport of `Λ` along `X̃`.
    pub flow_time: T,
}

impl<T: Real> Default for CertifyGrid<T> {
    fn default() -> Self {
        Self {
            n: 16,
            s_values: vec![T::lit(-1.0), T::zero(), T::lit(0.7)],
            return_points: 100,
            flow_time: T::lit(2.5),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CertificateResiduals {
    /// `max ‖dH − ι_X̃Λ‖∞`, `dH` by central differences.
    pub dh_residual: f64,
    /// `max |d(ι_X̃Λ)|` over the six chart components.
    pub closedness: f64,
    /// `max |∮ ι_X̃Λ|` over the generating loops.
    pub loop_period: f64,
    pub min_det_lambda: f64,
    /// `max |det Λ − w²/ε²|`
    pub det_lambda_defect: f64,
    /// `max ‖Λᵀ⁻¹ dH − X̃‖∞`
    pub hamilton: f64,
    /// `max |H(x, r, s) − H(x, 0, s)|`
    pub r_spread: f64,
    /// `max |H − s/ε|`
    pub hamiltonian_closed_form: f64,
    /// `max |s(t) − s(0)|` along the flow of `X̃`.
    pub level_invariance: f64,
    /// Change of the `(r, s)` block of `Λ` under transport by the flow.
    pub lie_rs_block: f64,
    /// Change of the whole `Λ` under transport by the flow.
    pub lie_full: f64,
    pub gluing: f64,
    /// `max ‖P_flow(x) − P(x)‖∞` on the section `{r = 0}` of `M₀`.
    pub return_map: f64,
    pub return_symplecticity: f64,
    pub base_symplecticity: f64,
}

impl CertificateResiduals {
    /// Residuals that should vanish, by name.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("dh_residual", self.dh_residual),
            ("closedness", self.closedness),
            ("loop_period", self.loop_period),
            ("det_lambda_defect", self.det_lambda_defect),
            ("hamilton", self.hamilton),
            ("r_spread", self.r_spread),
            ("hamiltonian_closed_form", self.hamiltonian_closed_form),
            ("level_invariance", self.level_invariance),
            ("lie_rs_block", self.lie_rs_block),
            ("lie_full", self.lie_full),
            ("gluing", self.gluing),
            ("return_map", self.return_map),
            ("return_symplecticity", self.return_symplecticity),
            ("base_symplecticity", self.base_symplecticity),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridInfo {
    pub n: usize,
    pub s_values: Vec<f64>,
    pub return_points: usize,
    pub flow_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuspensionCertificate {
    pub base_map: String,
    #[serde(rename = "K")]
    pub k: Option<f64>,
    pub epsilon: f64,
    pub residuals: CertificateResiduals,
    pub grid: GridInfo,
}

impl SuspensionCertificate {
    /// Names and values of residuals at or above `threshold`, plus a
    /// nonpositive `det Λ`.
    pub fn failures(&self, threshold: f64) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .residuals
            .entries()
            .into_iter()
            .filter(|(_, v)| !(*v < threshold))
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        if !(self.residuals.min_det_lambda > 0.0) {
            out.push(("min_det_lambda".into(), self.residuals.min_det_lambda));
        }
        out
    }
}

/// `(0, 0, 1/roof(x))` on `(x₁, x₂, r)`.
#[derive(Clone)]
pub struct SuspensionField<T> {
    roof: Roof<T>,
}

impl<T: Real> VectorField<T> for SuspensionField<T> {
    fn name(&self) -> &str {
        "suspension"
    }
    fn domain(&self) -> Domain<T> {
        Domain::Euclidean
    }
    fn eval(&self, x: &Vec3<T>) -> Vec3<T> {
        [T::zero(), T::zero(), self.roof.value(&[x[0], x[1]]).recip()]
    }
    fn jacobian(&self, x: &Vec3<T>) -> Mat3<T> {
        let b = [x[0], x[1]];
        let r = self.roof.value(&b);
        let g = self.roof.gradient(&b);
        let o = T::zero();
        [[o, o, o], [o, o, o], [-g[0] / (r * r), -g[1] / (r * r), o]]
    }
}

/// `w(x)·roof(x) dx₁∧dx₂∧dr`, so that `ι_X Ω = w dx₁∧dx₂`.
#[derive(Clone)]
pub struct SuspensionVolume<T: Real> {
    base: Arc<dyn SurfaceMap<T>>,
    roof: Roof<T>,
}

impl<T: Real> VolumeForm<T> for SuspensionVolume<T> {
    fn density(&self, x: &Vec3<T>) -> T {
        let b = [x[0], x[1]];
        self.base.density(&b) * self.roof.value(&b)
    }
    fn density_gradient(&self, x: &Vec3<T>) -> Vec3<T> {
        let b = [x[0], x[1]];
        let h = T::lit(1e-6);
        let g = self.roof.gradient(&b);
        let w = self.base.density(&b);
        let r = self.roof.value(&b);
        let dw: Vec2<T> = std::array::from_fn(|i| {
            let mut a = b;
            let mut c = b;
            a[i] = a[i] + h;
            c[i] = c[i] - h;
            (self.base.density(&a) - self.base.density(&c)) / (h + h)
        });
        [dw[0] * r + w * g[0], dw[1] * r + w * g[1], T::zero()]
    }
}

/// The suspension 3-flow on `M_{s₀}`, with the gluing as identification.
#[derive(Clone)]
pub struct LevelFlow<T: Real> {
    field: SuspensionField<T>,
    volume: SuspensionVolume<T>,
    model: SuspensionModel<T>,
    pub s0: T,
}

impl<T: Real> LevelFlow<T> {
    /// The fiber section `{r = 0}` with chart `(x₁, x₂)`.
    pub fn section(&self) -> Section<T> {
        let base = self.model.base();
        let sup_roof = self
            .model
            .base_grid(SAMPLE_GRID)
            .map(|x| self.model.roof.value(&x))
            .fold(T::zero(), T::max);
        Section::coordinate(2, T::zero(), Some(T::one()), base.periods(), Direction::Positive)
            .with_max_return_time(T::lit(4.0) * sup_roof + T::one())
    }
}

impl<T: Real> Dynamics<T> for LevelFlow<T> {
    fn field(&self) -> &dyn VectorField<T> {
        &self.field
    }
    fn volume(&self) -> &dyn VolumeForm<T> {
        &self.volume
    }
    fn identify(&self, x: &Vec3<T>) -> Option<(Vec3<T>, Mat3<T>)> {
        let half = T::lit(0.5);
        let n = if x[2] >= half {
            1
        } else if x[2] < -half {
            -1
        } else {
            return None;
        };
        let p = [x[0], x[1], x[2], self.s0];
        let g = self.model.glue(&p, n);
        let d = self.model.glue_jacobian(&p, n);
        let o = T::zero();
        Some((
            [g[0], g[1], g[2]],
            [[d[0][0], d[0][1], o], [d[1][0], d[1][1], o], [o, o, T::one()]],
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poincare::iterate_return;
    use std::f64::consts::{PI, TAU};

    fn model(k: f64, eps: f64) -> SuspensionModel<f64> {
        SuspensionModel::build(Arc::new(StandardMap { k }), eps, Roof::Constant(1.0)).unwrap()
    }

    #[test]
    fn standard_map_is_symplectic_and_invertible() {
        let m = StandardMap { k: 1.2 };
        for x in [[0.3, -1.0], [2.0, 4.0], [PI, 0.0]] {
            assert!((det2(&m.jacobian(&x)) - 1.0).abs() < 1e-14);
            let back = m.inverse(&m.apply(&x));
            assert!((back[0] - x[0]).abs() < 1e-13 && (back[1] - x[1]).abs() < 1e-13);
        }
    }

    #[test]
    fn build_preconditions() {
        assert!(matches!(
            SuspensionModel::build(Arc::new(StandardMap { k: 0.5 }), 0.0, Roof::Constant(1.0)),
            Err(Error::ZeroEpsilon)
        ));
        assert!(matches!(
            SuspensionModel::build(Arc::new(IdentityMap), 1.0, Roof::Constant(-1.0)),
            Err(Error::NonPositiveRoof(_))
        ));
        struct Squeeze;
        impl SurfaceMap<f64> for Squeeze {
            fn name(&self) -> &str {
                "squeeze"
            }
            fn apply(&self, x: &Vec2<f64>) -> Vec2<f64> {
                [2.0 * x[0], x[1]]
            }
            fn jacobian(&self, _x: &Vec2<f64>) -> Mat2<f64> {
                [[2.0, 0.0], [0.0, 1.0]]
            }
            fn inverse(&self, x: &Vec2<f64>) -> Vec2<f64> {
                [0.5 * x[0], x[1]]
            }
        }
        assert!(matches!(
            SuspensionModel::build(Arc::new(Squeeze), 1.0, Roof::Constant(1.0)),
            Err(Error::NonSymplecticBase(_))
        ));
    }

    #[test]
    fn i_x_lambda_examples() {
        let p = [0.3, 1.0, 0.2, -0.4];
        assert_eq!(model(0.5, 1.0).i_x_lambda(&p), [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(model(0.5, 2.0).i_x_lambda(&p), [0.0, 0.0, 0.0, 0.5]);
        let m = model(0.5, 1.0);
        assert_eq!(crate::linalg::dot(&m.i_x_lambda(&p), &m.x_tilde(&p)), 0.0);
        let lam = m.lambda(&p);
        assert_eq!(lam.matrix()[0][1], 1.0);
        assert_eq!(lam.matrix()[2][3], 1.0);
    }

    #[test]
    fn period_integrals() {
        let m = model(0.5, 1.0);
        let p = [0.7, 0.2, 0.0, 0.3];
        for lp in m.generating_loops(&p) {
            assert!(m.period_integral(&lp).unwrap().abs() < 1e-10);
        }
        let open = ChartLoop::polyline(vec![p, [0.7, 0.2, 0.0, 1.3]]);
        assert!(matches!(m.period_integral(&open), Err(Error::OpenPath(_))));
    }

    #[test]
    fn hamiltonian_values() {
        let m = model(0.5, 1.0);
        assert!(m.hamiltonian(&[1.0, 2.0, 0.4, 0.0]).abs() < 1e-15);
        assert!((m.hamiltonian(&[1.0, 2.0, 0.4, 0.7]) - 0.7).abs() < 1e-10);
        let a = m.hamiltonian(&[1.0, 2.0, 5.3, 0.7]);
        let b = m.hamiltonian(&[1.0, 2.0, 0.0, 0.7]);
        assert!((a - b).abs() < 1e-10);
        assert!((model(0.5, 2.0).hamiltonian(&[0.0, 0.0, 0.0, 1.0]) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn gluing_roundtrip() {
        let m = model(1.2, 1.0);
        let p = [0.4, -0.3, 0.6, 0.1];
        let q = m.glue(&m.glue(&p, 1), -1);
        assert!(norm_inf(&sub(&p, &q)) < 1e-14);
        assert!(m.gluing_gap(&p, &m.glue(&p, 1)) < 1e-15);
        assert!(m.gluing_gap(&p, &[0.4 + TAU, -0.3, 0.6, 0.1]) < 1e-14);
    }

    #[test]
    fn small_certificate() {
        let m = model(0.5, 1.0);
        let grid = CertifyGrid { n: 4, s_values: vec![0.0, 0.7], return_points: 10, flow_time: 2.5 };
        let cert = m.certify(&grid, &IntegratorConfig::default()).unwrap();
        assert!(cert.failures(1e-8).is_empty(), "{:?}", cert.failures(1e-8));
        assert!(cert.residuals.return_map < 1e-10);
        assert!(cert.residuals.lie_rs_block < 1e-12);
        let json = serde_json::to_value(&cert).unwrap();
        assert_eq!(json["K"], 0.5);
    }

    #[test]
    fn restricted_flow_returns_reproduce_the_map() {
        let m = model(1.2, 1.0);
        let cfg = IntegratorConfig::default();
        for s0 in [0.0, 0.8] {
            let lvl = m.restrict_to_level(s0);
            let sec = lvl.section();
            let u = [0.9, 2.1];
            let ir = iterate_return(&lvl, &sec, &u, 2, &cfg).unwrap();
            let p = StandardMap { k: 1.2 };
            let expect = p.apply(&p.apply(&u));
            let d = sec.chart_difference(&ir.end_chart, &expect);
            assert!(d[0].abs() < 1e-10 && d[1].abs() < 1e-10);
            assert!((ir.time - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_base_returns_identity() {
        let m = SuspensionModel::<f64>::build(Arc::new(IdentityMap), 1.0, Roof::Constant(1.0)).unwrap();
        let lvl = m.restrict_to_level(0.0);
        let sec = lvl.section();
        let rd = return_map(&lvl, &sec, &[1.0f64, 2.0, 0.0], &IntegratorConfig::default()).unwrap();
        assert!(sec.chart_difference(&rd.px_chart, &[1.0, 2.0]).iter().all(|d| d.abs() < 1e-14));
        assert!((rd.dp[0][0] - 1.0).abs() < 1e-14 && rd.dp[0][1].abs() < 1e-14);
    }

    #[test]
    fn variable_roof_rescales_return_time() {
        let roof = Roof::Function {
            value: Arc::new(|x: &Vec2<f64>| 1.5 + 0.5 * x[0].sin()),
            gradient: Arc::new(|x: &Vec2<f64>| [0.5 * x[0].cos(), 0.0]),
        };
        let m = SuspensionModel::build(Arc::new(StandardMap { k: 0.5 }), 1.0, roof).unwrap();
        let lvl = m.restrict_to_level(0.0);
        let sec = lvl.section();
        let x = [0.8, 0.1];
        let rd = return_map(&lvl, &sec, &[x[0], x[1], 0.0], &IntegratorConfig::default()).unwrap();
        assert!((rd.time - (1.5 + 0.5 * 0.8f64.sin())).abs() < 1e-11);
        let expect = StandardMap { k: 0.5 }.apply(&x);
        assert!(sec.chart_difference(&rd.px_chart, &expect).iter().all(|d| d.abs() < 1e-10));
        assert!(symplecticity_of(&lvl, &rd) < 1e-9);
    }
}
