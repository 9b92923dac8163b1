//! Named analytic fields with known ground truth.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{
    CrossGradient, Domain, LinearField, Quadratic, ScalarIntegral, SinCoordinate, UniformVolume,
    VectorField, VolumeForm,
};
use crate::error::{Error, Result};
use crate::linalg::{trace, Mat3, Vec3};
use crate::scalar::Real;
use crate::torus::{AngleChart, FlatAngleChart};

pub const CATALOG_NAMES: [&str; 5] =
    ["abc", "shear_torus", "conjugated_torus", "cross_gradient", "linear_trace_free"];

/// Catalog parameters by name. Unknown keys are rejected.
pub type CatalogParams = BTreeMap<String, f64>;

/// A resolved catalog entry.
pub struct CatalogEntry<T: Real> {
    pub name: String,
    pub field: Arc<dyn VectorField<T>>,
    pub volume: Arc<dyn VolumeForm<T>>,
    /// Registered first integrals, primary one first.
    pub integrals: Vec<Arc<dyn ScalarIntegral<T>>>,
    /// Angle coordinates on the levels of the primary integral, when known.
    pub angle_chart: Option<Arc<dyn AngleChart<T>>>,
}

impl<T: Real> CatalogEntry<T> {
    pub fn integral(&self) -> Option<&Arc<dyn ScalarIntegral<T>>> {
        self.integrals.first()
    }
}

impl<T: Real> std::fmt::Debug for CatalogEntry<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CatalogEntry")
            .field("name", &self.name)
            .field("integrals", &self.integrals.iter().map(|i| i.name()).collect::<Vec<_>>())
            .field("angle_chart", &self.angle_chart.is_some())
            .finish()
    }
}

struct Params<'a> {
    entry: &'a str,
    given: &'a CatalogParams,
}

impl Params<'_> {
    fn check(&self, allowed: &[&str]) -> Result<()> {
        match self.given.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => {
                Err(Error::UnknownParameter { entry: self.entry.into(), param: k.clone() })
            }
            None => Ok(()),
        }
    }

    fn get<T: Real>(&self, key: &str, default: f64) -> T {
        T::lit(self.given.get(key).copied().unwrap_or(default))
    }
}

/// Resolves a catalog entry by name.
///
/// | name | parameters (defaults) |
/// |---|---|
/// | `abc` | `a`, `b`, `c` (1, 1, 1) |
/// | `shear_torus` | `a0`, `a1`, `b0`, `b1` (2, 1, 1, 0): `A(z)=a0+a1 cos z`, `B(z)=b0+b1 cos z` |
/// | `conjugated_torus` | `omega1`, `omega2`, `delta`, `kappa` (1, √2, 0.5, 0) |
/// | `cross_gradient` | `fx`, `fy`, `fz` (1, 1, 1), `gx`, `gy`, `gz` (0, 0, 1) |
/// | `linear_trace_free` | `a11` … `a33` |
pub fn catalog<T: Real>(name: &str, params: &CatalogParams) -> Result<CatalogEntry<T>> {
    let p = Params { entry: name, given: params };
    let sin_z: Arc<dyn ScalarIntegral<T>> = Arc::new(SinCoordinate { axis: 2 });
    let entry = match name {
        "abc" => {
            p.check(&["a", "b", "c"])?;
            CatalogEntry {
                name: name.into(),
                field: Arc::new(Abc { a: p.get("a", 1.0), b: p.get("b", 1.0), c: p.get("c", 1.0) }),
                volume: Arc::new(UniformVolume(T::one())),
                integrals: vec![],
                angle_chart: None,
            }
        }
        "shear_torus" => {
            p.check(&["a0", "a1", "b0", "b1"])?;
            let f = ShearTorus {
                a0: p.get("a0", 2.0),
                a1: p.get("a1", 1.0),
                b0: p.get("b0", 1.0),
                b1: p.get("b1", 0.0),
            };
            CatalogEntry {
                name: name.into(),
                field: Arc::new(f),
                volume: Arc::new(UniformVolume(T::one())),
                integrals: vec![sin_z],
                angle_chart: Some(Arc::new(FlatAngleChart::sin_z())),
            }
        }
        "conjugated_torus" => {
            p.check(&["omega1", "omega2", "delta", "kappa"])?;
            let f = ConjugatedTorus::new(
                p.get("omega1", 1.0),
                p.get("omega2", std::f64::consts::SQRT_2),
                p.get("delta", 0.5),
                p.get("kappa", 0.0),
            )?;
            CatalogEntry {
                name: name.into(),
                volume: Arc::new(ConjugatedDensity(f)),
                field: Arc::new(f),
                integrals: vec![sin_z],
                angle_chart: Some(Arc::new(FlatAngleChart::sin_z())),
            }
        }
        "cross_gradient" => {
            p.check(&["fx", "fy", "fz", "gx", "gy", "gz"])?;
            let fdiag = [p.get("fx", 1.0), p.get("fy", 1.0), p.get("fz", 1.0)];
            let glin = [p.get("gx", 0.0), p.get("gy", 0.0), p.get("gz", 1.0)];
            let f = Quadratic::diagonal(fdiag).with_name("quadratic_f");
            let g = Quadratic::linear(glin).with_name("linear_g");
            CatalogEntry {
                name: name.into(),
                field: Arc::new(CrossGradient { f: Box::new(f.clone()), g: Box::new(g.clone()) }),
                volume: Arc::new(UniformVolume(T::one())),
                integrals: vec![Arc::new(f), Arc::new(g)],
                angle_chart: None,
            }
        }
        "linear_trace_free" => {
            const KEYS: [&str; 9] = ["a11", "a12", "a13", "a21", "a22", "a23", "a31", "a32", "a33"];
            const DEFAULT: [f64; 9] = [0.1, 1.0, 0.0, -1.0, 0.0, 0.2, 0.0, -0.2, -0.1];
            p.check(&KEYS)?;
            let m: Mat3<T> = std::array::from_fn(|i| {
                std::array::from_fn(|j| p.get(KEYS[3 * i + j], DEFAULT[3 * i + j]))
            });
            let tr = trace(&m);
            if tr.abs() > T::lit(1e-12) {
                return Err(Error::InvalidParameter(format!(
                    "linear_trace_free requires a zero trace (got {})",
                    tr.as_f64()
                )));
            }
            CatalogEntry {
                name: name.into(),
                field: Arc::new(LinearField::named(m, name)),
                volume: Arc::new(UniformVolume(T::one())),
                integrals: vec![],
                angle_chart: None,
            }
        }
        other => return Err(Error::UnknownName(other.into())),
    };
    Ok(entry)
}

/// Arnold–Beltrami–Childress field on the standard torus.
#[derive(Debug, Clone, Copy)]
pub struct Abc<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Real> VectorField<T> for Abc<T> {
    fn name(&self) -> &str {
        "abc"
    }
    fn domain(&self) -> Domain<T> {
        Domain::standard_torus()
    }
    fn eval(&self, x: &Vec3<T>) -> Vec3<T> {
        let [x, y, z] = self.domain().wrap(x);
        [
            self.a * z.sin() + self.c * y.cos(),
            self.b * x.sin() + self.a * z.cos(),
            self.c * y.sin() + self.b * x.cos(),
        ]
    }
    fn jacobian(&self, x: &Vec3<T>) -> Mat3<T> {
        let [x, y, z] = self.domain().wrap(x);
        let o = T::zero();
        [
            [o, -self.c * y.sin(), self.a * z.cos()],
            [self.b * x.cos(), o, -self.a * z.sin()],
            [-self.b * x.sin(), self.c * y.cos(), o],
        ]
    }
}

/// Shear flow `(A(z), B(z), 0)` on T³ with `A = a0 + a1 cos z`, `B = b0 + b1 cos z`.
/// `sin z` is an integral; the levels are invariant 2-tori.
#[derive(Debug, Clone, Copy)]
pub struct ShearTorus<T> {
    pub a0: T,
    pub a1: T,
    pub b0: T,
    pub b1: T,
}

impl<T: Real> ShearTorus<T> {
    pub fn a(&self, z: T) -> T {
        self.a0 + self.a1 * z.cos()
    }
    pub fn b(&self, z: T) -> T {
        self.b0 + self.b1 * z.cos()
    }
}

impl<T: Real> VectorField<T> for ShearTorus<T> {
    fn name(&self) -> &str {
        "shear_torus"
    }
    fn domain(&self) -> Domain<T> {
        Domain::standard_torus()
    }
    fn eval(&self, x: &Vec3<T>) -> Vec3<T> {
        let z = self.domain().wrap(x)[2];
        [self.a(z), self.b(z), T::zero()]
    }
    fn jacobian(&self, x: &Vec3<T>) -> Mat3<T> {
        let z = self.domain().wrap(x)[2];
        let o = T::zero();
        [[o, o, -self.a1 * z.sin()], [o, o, -self.b1 * z.sin()], [o, o, o]]
    }
}

/// Constant flow `(ω₁, ω₂)` on T² pushed forward by the diffeomorphism
/// `(φ, ψ) ↦ (φ + κ sin φ + δ sin ψ, ψ)`, extended trivially in `z`.
///
/// In the new coordinates `(u, v)` with `φ = k⁻¹(u − δ sin v)`, `k(φ) = φ + κ sin φ`:
/// `A = k'(φ) ω₁ + δ ω₂ cos v`, `B = ω₂`, invariant density `a = 1 / k'(φ)`.
/// The rotation number is `ω₁/ω₂` for every `δ`, `κ`.
#[derive(Debug, Clone, Copy)]
pub struct ConjugatedTorus<T> {
    pub omega1: T,
    pub omega2: T,
    pub delta: T,
    pub kappa: T,
}

impl<T: Real> ConjugatedTorus<T> {
    pub fn new(omega1: T, omega2: T, delta: T, kappa: T) -> Result<Self> {
        if kappa.abs() >= T::one() {
            return Err(Error::InvalidParameter(format!(
                "conjugated_torus requires |kappa| < 1 (got {})",
                kappa.as_f64()
            )));
        }
        Ok(Self { omega1, omega2, delta, kappa })
    }

    /// Solves `φ + κ sin φ = w`.
    fn inverse_stretch(&self, w: T) -> T {
        let mut phi = w;
        for _ in 0..60 {
            let step = (phi + self.kappa * phi.sin() - w) / (T::one() + self.kappa * phi.cos());
            phi = phi - step;
            if step.abs() <= T::epsilon() * (T::one() + w.abs()) {
                break;
            }
        }
        phi
    }

    /// Original angle φ and `k'(φ)` at chart point `(u, v)`.
    fn unpack(&self, u: T, v: T) -> (T, T) {
        let phi = self.inverse_stretch(u - self.delta * v.sin());
        (phi, T::one() + self.kappa * phi.cos())
    }

    pub fn velocity(&self, u: T, v: T) -> [T; 2] {
        let (_, kp) = self.unpack(u, v);
        [kp * self.omega1 + self.delta * self.omega2 * v.cos(), self.omega2]
    }

    /// `[[∂A/∂u, ∂A/∂v], [∂B/∂u, ∂B/∂v]]`
    pub fn velocity_jacobian(&self, u: T, v: T) -> [[T; 2]; 2] {
        let (phi, kp) = self.unpack(u, v);
        let phi_u = kp.recip();
        let phi_v = -self.delta * v.cos() / kp;
        let ks = self.kappa * phi.sin() * self.omega1;
        [[-ks * phi_u, -ks * phi_v - self.delta * self.omega2 * v.sin()], [T::zero(), T::zero()]]
    }

    pub fn density(&self, u: T, v: T) -> T {
        self.unpack(u, v).1.recip()
    }

    pub fn density_gradient(&self, u: T, v: T) -> [T; 2] {
        let (phi, kp) = self.unpack(u, v);
        let common = self.kappa * phi.sin() / (kp * kp);
        [common / kp, -common * self.delta * v.cos() / kp]
    }

    /// `ω₁ / ω₂`
    pub fn rotation_number(&self) -> T {
        self.omega1 / self.omega2
    }
}

impl<T: Real> VectorField<T> for ConjugatedTorus<T> {
    fn name(&self) -> &str {
        "conjugated_torus"
    }
    fn domain(&self) -> Domain<T> {
        Domain::standard_torus()
    }
    fn eval(&self, x: &Vec3<T>) -> Vec3<T> {
        let w = self.domain().wrap(x);
        let [a, b] = self.velocity(w[0], w[1]);
        [a, b, T::zero()]
    }
    fn jacobian(&self, x: &Vec3<T>) -> Mat3<T> {
        let w = self.domain().wrap(x);
        let j = self.velocity_jacobian(w[0], w[1]);
        let o = T::zero();
        [[j[0][0], j[0][1], o], [j[1][0], j[1][1], o], [o, o, o]]
    }
}

/// Invariant volume `a(x, y) dx∧dy∧dz` of [`ConjugatedTorus`].
#[derive(Debug, Clone, Copy)]
pub struct ConjugatedDensity<T>(pub ConjugatedTorus<T>);

impl<T: Real> VolumeForm<T> for ConjugatedDensity<T> {
    fn density(&self, x: &Vec3<T>) -> T {
        let w = Domain::<T>::standard_torus().wrap(x);
        self.0.density(w[0], w[1])
    }
    fn density_gradient(&self, x: &Vec3<T>) -> Vec3<T> {
        let w = Domain::<T>::standard_torus().wrap(x);
        let g = self.0.density_gradient(w[0], w[1]);
        [g[0], g[1], T::zero()]
    }
}
