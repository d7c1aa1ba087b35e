//! Closed planar boundary curves.
//!
//! Curves are given analytically through a 2π-periodic map with closed-form
//! first and second derivatives. [`Curve`] normalizes the orientation to
//! counterclockwise at construction, so the outward normal is always
//! `(y', -x') / |γ'|`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use nalgebra::Vector2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NpError, Result};

const MIN_SPEED: f64 = 1e-14;

/// Analytic 2π-periodic parameterization of a closed curve.
pub trait Parametrization: Send + Sync + fmt::Debug {
    fn point(&self, t: f64) -> Vector2<f64>;
    fn d1(&self, t: f64) -> Vector2<f64>;
    fn d2(&self, t: f64) -> Vector2<f64>;
    /// Human-readable descriptor, e.g. `ellipse(R=1,rho0=0.69)`.
    fn describe(&self) -> String;
}

/// A regular, counterclockwise closed curve.
#[derive(Clone)]
pub struct Curve {
    param: Arc<dyn Parametrization>,
    reversed: bool,
}

impl fmt::Debug for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Curve")
            .field("param", &self.param)
            .field("reversed", &self.reversed)
            .finish()
    }
}

impl Curve {
    /// Wraps a parameterization, checking regularity on a sample of
    /// parameters and flipping the direction if the enclosed area is negative.
    pub fn new<P: Parametrization + 'static>(param: P) -> Result<Self> {
        Self::from_arc(Arc::new(param))
    }

    pub fn from_arc(param: Arc<dyn Parametrization>) -> Result<Self> {
        let mut curve = Curve {
            param,
            reversed: false,
        };
        let samples = 512;
        for k in 0..samples {
            let t = TAU * k as f64 / samples as f64;
            let speed = curve.param.d1(t).norm();
            if !(speed > MIN_SPEED) {
                return Err(NpError::DegenerateParameterization { t, speed });
            }
        }
        let area = curve.signed_area_with(samples);
        if !(area.abs() > 0.0) {
            return Err(NpError::InvalidShape("curve encloses no area".into()));
        }
        if area < 0.0 {
            curve.reversed = true;
        }
        Ok(curve)
    }

    pub fn describe(&self) -> String {
        self.param.describe()
    }

    pub fn position(&self, t: f64) -> Vector2<f64> {
        if self.reversed {
            self.param.point(-t)
        } else {
            self.param.point(t)
        }
    }

    pub fn derivative(&self, t: f64) -> Vector2<f64> {
        if self.reversed {
            -self.param.d1(-t)
        } else {
            self.param.d1(t)
        }
    }

    pub fn second_derivative(&self, t: f64) -> Vector2<f64> {
        if self.reversed {
            self.param.d2(-t)
        } else {
            self.param.d2(t)
        }
    }

    pub fn speed(&self, t: f64) -> f64 {
        self.derivative(t).norm()
    }

    /// Signed curvature `(x'y'' - y'x'') / |γ'|³`.
    pub fn curvature(&self, t: f64) -> Result<f64> {
        let d1 = self.derivative(t);
        let d2 = self.second_derivative(t);
        let speed = d1.norm();
        if speed < MIN_SPEED {
            return Err(NpError::DegenerateParameterization { t, speed });
        }
        Ok((d1.x * d2.y - d1.y * d2.x) / speed.powi(3))
    }

    pub fn outward_normal(&self, t: f64) -> Result<Vector2<f64>> {
        let d1 = self.derivative(t);
        let speed = d1.norm();
        if speed < MIN_SPEED {
            return Err(NpError::DegenerateParameterization { t, speed });
        }
        Ok(Vector2::new(d1.y, -d1.x) / speed)
    }

    /// Enclosed area by the periodic trapezoid rule (positive after normalization).
    pub fn signed_area(&self) -> f64 {
        self.signed_area_with(512)
    }

    fn signed_area_with(&self, samples: usize) -> f64 {
        let h = TAU / samples as f64;
        (0..samples)
            .map(|k| {
                let t = h * k as f64;
                let p = self.position(t);
                let d = self.derivative(t);
                0.5 * (p.x * d.y - p.y * d.x)
            })
            .sum::<f64>()
            * h
    }

    /// Same curve rigidly rotated about the origin and then translated.
    pub fn transformed(&self, angle: f64, shift: Vector2<f64>) -> Result<Curve> {
        Curve::new(RigidMotion {
            inner: self.clone(),
            cos: angle.cos(),
            sin: angle.sin(),
            angle,
            shift,
        })
    }
}

#[derive(Debug)]
struct RigidMotion {
    inner: Curve,
    cos: f64,
    sin: f64,
    angle: f64,
    shift: Vector2<f64>,
}

impl RigidMotion {
    fn rotate(&self, v: Vector2<f64>) -> Vector2<f64> {
        Vector2::new(self.cos * v.x - self.sin * v.y, self.sin * v.x + self.cos * v.y)
    }
}

impl Parametrization for RigidMotion {
    fn point(&self, t: f64) -> Vector2<f64> {
        self.rotate(self.inner.position(t)) + self.shift
    }
    fn d1(&self, t: f64) -> Vector2<f64> {
        self.rotate(self.inner.derivative(t))
    }
    fn d2(&self, t: f64) -> Vector2<f64> {
        self.rotate(self.inner.second_derivative(t))
    }
    fn describe(&self) -> String {
        format!(
            "rigid(angle={},shift=({},{}),{})",
            self.angle,
            self.shift.x,
            self.shift.y,
            self.inner.describe()
        )
    }
}

/// Ellipse `ρ = ρ₀` in elliptic coordinates with focal scale `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseShape {
    pub r: f64,
    pub rho0: f64,
}

impl EllipseShape {
    pub fn new(r: f64, rho0: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(NpError::InvalidShape(format!("focal scale R = {r} must be positive")));
        }
        if !(rho0 > 0.0 && rho0.is_finite()) {
            return Err(NpError::InvalidShape(format!(
                "elliptic radius rho0 = {rho0} must be positive"
            )));
        }
        Ok(EllipseShape { r, rho0 })
    }

    /// Semi-axes `(R cosh ρ₀, R sinh ρ₀)`.
    pub fn semi_axes(&self) -> (f64, f64) {
        (self.r * self.rho0.cosh(), self.r * self.rho0.sinh())
    }

    /// Scale factor `Ξ(ρ, ω) = R √(sinh²ρ + sin²ω)`; on the boundary it is the
    /// arclength speed of the parameterization `t = ω`.
    pub fn xi(&self, rho: f64, omega: f64) -> f64 {
        self.r * (rho.sinh().powi(2) + omega.sin().powi(2)).sqrt()
    }

    pub fn point(&self, p: EllipticPoint) -> Vector2<f64> {
        p.to_cartesian(self.r)
    }
}

#[derive(Debug, Clone, Copy)]
struct EllipseParam {
    shape: EllipseShape,
    a: f64,
    b: f64,
}

impl Parametrization for EllipseParam {
    fn point(&self, t: f64) -> Vector2<f64> {
        Vector2::new(self.a * t.cos(), self.b * t.sin())
    }
    fn d1(&self, t: f64) -> Vector2<f64> {
        Vector2::new(-self.a * t.sin(), self.b * t.cos())
    }
    fn d2(&self, t: f64) -> Vector2<f64> {
        Vector2::new(-self.a * t.cos(), -self.b * t.sin())
    }
    fn describe(&self) -> String {
        format!("ellipse(R={},rho0={})", self.shape.r, self.shape.rho0)
    }
}

/// `t ↦ (R cos t cosh ρ₀, R sin t sinh ρ₀)`; the parameter is the elliptic angle ω.
pub fn ellipse_curve(shape: EllipseShape) -> Result<Curve> {
    let shape = EllipseShape::new(shape.r, shape.rho0)?;
    let (a, b) = shape.semi_axes();
    Curve::new(EllipseParam { shape, a, b })
}

#[derive(Debug, Clone, Copy)]
struct CircleParam {
    radius: f64,
}

impl Parametrization for CircleParam {
    fn point(&self, t: f64) -> Vector2<f64> {
        self.radius * Vector2::new(t.cos(), t.sin())
    }
    fn d1(&self, t: f64) -> Vector2<f64> {
        self.radius * Vector2::new(-t.sin(), t.cos())
    }
    fn d2(&self, t: f64) -> Vector2<f64> {
        -self.radius * Vector2::new(t.cos(), t.sin())
    }
    fn describe(&self) -> String {
        format!("disk(r={})", self.radius)
    }
}

/// Circle of the given radius centred at the origin.
pub fn circle(radius: f64) -> Result<Curve> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(NpError::InvalidShape(format!("radius {radius} must be positive")));
    }
    Curve::new(CircleParam { radius })
}

/// Polar curve `r(t) = r₀ (1 + ε cos(k t))`, a smooth non-elliptic test domain.
#[derive(Debug, Clone, Copy)]
struct StarParam {
    radius: f64,
    amplitude: f64,
    lobes: u32,
}

impl Parametrization for StarParam {
    fn point(&self, t: f64) -> Vector2<f64> {
        let k = self.lobes as f64;
        let r = self.radius * (1.0 + self.amplitude * (k * t).cos());
        Vector2::new(r * t.cos(), r * t.sin())
    }
    fn d1(&self, t: f64) -> Vector2<f64> {
        let k = self.lobes as f64;
        let r = self.radius * (1.0 + self.amplitude * (k * t).cos());
        let dr = -self.radius * self.amplitude * k * (k * t).sin();
        Vector2::new(dr * t.cos() - r * t.sin(), dr * t.sin() + r * t.cos())
    }
    fn d2(&self, t: f64) -> Vector2<f64> {
        let k = self.lobes as f64;
        let r = self.radius * (1.0 + self.amplitude * (k * t).cos());
        let dr = -self.radius * self.amplitude * k * (k * t).sin();
        let ddr = -self.radius * self.amplitude * k * k * (k * t).cos();
        Vector2::new(
            ddr * t.cos() - 2.0 * dr * t.sin() - r * t.cos(),
            ddr * t.sin() + 2.0 * dr * t.cos() - r * t.sin(),
        )
    }
    fn describe(&self) -> String {
        format!(
            "star(r={},eps={},k={})",
            self.radius, self.amplitude, self.lobes
        )
    }
}

pub fn star_curve(radius: f64, amplitude: f64, lobes: u32) -> Result<Curve> {
    if !(radius > 0.0) || !(0.0..1.0).contains(&amplitude.abs()) || lobes == 0 {
        return Err(NpError::InvalidShape(format!(
            "star needs r > 0, |eps| < 1, k >= 1 (got r={radius}, eps={amplitude}, k={lobes})"
        )));
    }
    Curve::new(StarParam {
        radius,
        amplitude,
        lobes,
    })
}

/// Elliptic coordinates `(ρ, ω)` relative to a focal scale `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticPoint {
    pub rho: f64,
    pub omega: f64,
}

impl EllipticPoint {
    pub fn new(rho: f64, omega: f64) -> Self {
        EllipticPoint { rho, omega }
    }

    /// `x₁ = R cos ω cosh ρ, x₂ = R sin ω sinh ρ`.
    pub fn to_cartesian(&self, r: f64) -> Vector2<f64> {
        Vector2::new(
            r * self.omega.cos() * self.rho.cosh(),
            r * self.omega.sin() * self.rho.sinh(),
        )
    }
}

/// Inverse of the elliptic coordinate map via `ρ + iω = arccosh((x₁ + i x₂)/R)`.
pub fn to_elliptic(x: Vector2<f64>, r: f64) -> Result<EllipticPoint> {
    if !(r > 0.0) {
        return Err(NpError::InvalidShape(format!("focal scale R = {r} must be positive")));
    }
    if x.y == 0.0 && x.x.abs() <= r {
        return Err(NpError::DegenerateCoordinates { x: x.x, y: x.y });
    }
    let w = Complex64::new(x.x / r, x.y / r);
    let mut zeta = w.acosh();
    if zeta.re < 0.0 {
        zeta = -zeta;
    }
    let mut omega = zeta.im.rem_euclid(TAU);
    if omega >= TAU {
        omega -= TAU;
    }
    // On the major axis the sign of a zero imaginary part can leave ω at 2π - 0.
    if x.y == 0.0 {
        omega = if x.x > 0.0 { 0.0 } else { PI };
    }
    Ok(EllipticPoint {
        rho: zeta.re,
        omega,
    })
}
