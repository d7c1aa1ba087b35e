//! Closed-form NP spectral data on the ellipse `ρ = ρ₀` in elliptic coordinates.
//!
//! The cosine family `Ξ⁻¹ cos nω` has eigenvalue `λ_n = ½e^{−2nρ₀}` and the sine
//! family `Ξ⁻¹ sin nω` has `−λ_n`. All exponential prefactors are combined
//! before evaluation so that large `n` neither overflows nor underflows early.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::Serialize;

use crate::assembly::OffGrid;
use crate::error::{NpError, Result};
use crate::geometry::{EllipseShape, EllipticPoint};
use crate::resonance::{LambdaMode, ResonanceModel};

pub fn eigenvalue_n(rho0: f64, n: usize) -> f64 {
    0.5 * (-2.0 * n as f64 * rho0).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Parity {
    Cosine,
    Sine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseMode {
    pub n: usize,
    pub parity: Parity,
    pub shape: EllipseShape,
}

impl EllipseMode {
    pub fn new(n: usize, parity: Parity, shape: EllipseShape) -> Self {
        assert!(n >= 1, "ellipse modes start at n = 1");
        EllipseMode { n, parity, shape }
    }

    /// Signed eigenvalue of `K*` on this mode.
    pub fn eigenvalue(&self) -> f64 {
        let l = eigenvalue_n(self.shape.rho0, self.n);
        match self.parity {
            Parity::Cosine => l,
            Parity::Sine => -l,
        }
    }

    fn trig(&self, omega: f64) -> f64 {
        let t = self.n as f64 * omega;
        match self.parity {
            Parity::Cosine => t.cos(),
            Parity::Sine => t.sin(),
        }
    }

    /// `1 ± e^{−2nρ₀}`, from `cosh` or `sinh` of `nρ₀`.
    fn hyper_factor(&self) -> f64 {
        let e = (-2.0 * self.n as f64 * self.shape.rho0).exp();
        match self.parity {
            Parity::Cosine => 1.0 + e,
            Parity::Sine => 1.0 - e,
        }
    }

    /// Exterior prefactor: `S[ψ](ρ, ω) = −exterior_scale(ρ)·trig(nω)` for `ρ ≥ ρ₀`.
    fn exterior_scale(&self, rho: f64) -> f64 {
        let n = self.n as f64;
        (n * (self.shape.rho0 - rho)).exp() * (self.hyper_factor() / (2.0 * n * PI)).sqrt()
    }
}

/// `S[ψ_n](x)` for the `H*`-normalized mode.
pub fn single_layer_mode(mode: &EllipseMode, p: EllipticPoint) -> f64 {
    let n = mode.n as f64;
    let rho0 = mode.shape.rho0;
    if p.rho >= rho0 {
        -mode.exterior_scale(p.rho) * mode.trig(p.omega)
    } else {
        let inner = (-2.0 * n * p.rho).exp();
        let radial = match mode.parity {
            Parity::Cosine => 1.0 + inner,
            Parity::Sine => 1.0 - inner,
        };
        -(n * (p.rho - rho0)).exp() * (2.0 / (n * PI * mode.hyper_factor())).sqrt() * 0.5 * radial * mode.trig(p.omega)
    }
}

fn rotation(angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, -s, s, c)
}

fn b_vector(p: EllipticPoint) -> Vector2<f64> {
    Vector2::new(p.omega.cos() * p.rho.sinh(), p.omega.sin() * p.rho.cosh())
}

/// `a·∇(e^{−nρ} cos nω)` or `a·∇(e^{−nρ} sin nω)` scaled by `e^{nρ}`, i.e.
/// `(−Rn/Ξ²) a·U(nω)b` with `U(nω − π/2)` for the sine family.
fn unscaled_gradient(n: usize, parity: Parity, r: f64, p: EllipticPoint, a: Vector2<f64>) -> f64 {
    let nf = n as f64;
    let xi_sq = p.rho.sinh().powi(2) + p.omega.sin().powi(2);
    let angle = match parity {
        Parity::Cosine => nf * p.omega,
        Parity::Sine => nf * p.omega - PI / 2.0,
    };
    -nf / (r * xi_sq) * a.dot(&(rotation(angle) * b_vector(p)))
}

/// `a·∇S[ψ_n](z)` for `ρ_z > ρ₀`.
pub fn grad_exterior_mode(mode: &EllipseMode, z: EllipticPoint, a: Vector2<f64>) -> f64 {
    -mode.exterior_scale(z.rho) * unscaled_gradient(mode.n, mode.parity, mode.shape.r, z, a)
}

fn check_exterior(shape: &EllipseShape, z: EllipticPoint) -> Result<()> {
    if !(z.rho > shape.rho0) {
        return Err(NpError::SourceInside {
            rho_z: z.rho,
            rho0: shape.rho0,
        });
    }
    Ok(())
}

/// `α_n = (½ − λ)·a·∇S[ψ_n](z)` for one mode.
pub fn alpha_mode(mode: &EllipseMode, z: EllipticPoint, a: Vector2<f64>) -> f64 {
    (0.5 - mode.eigenvalue()) * grad_exterior_mode(mode, z, a)
}

/// `|α_nᶜ|² + |α_nˢ|²`.
pub fn pair_alpha_sq(n: usize, z: EllipticPoint, a: Vector2<f64>, shape: EllipseShape) -> Result<f64> {
    check_exterior(&shape, z)?;
    let c = alpha_mode(&EllipseMode::new(n, Parity::Cosine, shape), z, a);
    let s = alpha_mode(&EllipseMode::new(n, Parity::Sine, shape), z, a);
    Ok(c * c + s * s)
}

/// `⌊−ln(2δ)/(2ρ₀)⌋`, the index where `λ_n` drops below `δ`; 0 once `δ ≥ ½`.
#[allow(non_snake_case)]
pub fn cutoff_N(delta: f64, rho0: f64) -> usize {
    if delta >= 0.5 {
        return 0;
    }
    (-(2.0 * delta).ln() / (2.0 * rho0)).floor() as usize
}

pub fn default_n_max(delta_min: f64, rho0: f64) -> usize {
    200.max(4 * cutoff_N(delta_min, rho0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RateCase {
    /// `ρ₀ < ρ_z < 3ρ₀`
    Anomalous,
    /// `ρ_z = 3ρ₀`
    Critical,
    /// `ρ_z > 3ρ₀`
    Bounded,
}

/// Predicted `(p, q)` in `‖∇u_δ‖² ∼ δᵖ |log δ|^q`.
pub fn predicted_rate(rho0: f64, rho_z: f64) -> Result<(RateCase, f64, f64)> {
    if !(rho_z > rho0) {
        return Err(NpError::SourceInside { rho_z, rho0 });
    }
    let ratio = rho_z / rho0;
    Ok(if (ratio - 3.0).abs() <= 1e-12 * 3.0 {
        (RateCase::Critical, 0.0, 2.0)
    } else if ratio < 3.0 {
        (RateCase::Anomalous, -3.0 + ratio, 1.0)
    } else {
        (RateCase::Bounded, 0.0, 0.0)
    })
}

/// A truncated series with an estimate of the neglected tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

/// Geometric extrapolation from the last two terms; infinite when they do not decay.
fn geometric_tail(prev: f64, last: f64) -> f64 {
    if last == 0.0 {
        return 0.0;
    }
    let q = last / prev;
    if prev > 0.0 && q < 1.0 {
        last * q / (1.0 - q)
    } else {
        f64::INFINITY
    }
}

/// `‖∇(u_δ − F_z)‖²` for `λ = iδ`:
/// `Σ_n [(½ − λ_n)|α_nᶜ|² + (½ + λ_n)|α_nˢ|²] / (δ² + λ_n²)`.
pub fn resonance_norm_series(
    shape: EllipseShape,
    z: EllipticPoint,
    a: Vector2<f64>,
    delta: f64,
    n_max: usize,
) -> Result<SeriesValue> {
    check_exterior(&shape, z)?;
    let required = 2 * cutoff_N(delta, shape.rho0);
    if n_max < required.max(2) {
        return Err(NpError::InsufficientTruncation { n_max, required });
    }
    let mut total = 0.0;
    let (mut prev, mut last) = (0.0, 0.0);
    for n in 1..=n_max {
        let mut term = 0.0;
        for parity in [Parity::Cosine, Parity::Sine] {
            let mode = EllipseMode::new(n, parity, shape);
            let l = mode.eigenvalue();
            let alpha = alpha_mode(&mode, z, a);
            term += (0.5 - l) * alpha * alpha / (delta * delta + l * l);
        }
        total += term;
        prev = last;
        last = term;
    }
    Ok(SeriesValue {
        value: total,
        tail_bound: geometric_tail(prev, last),
        terms: n_max,
    })
}

/// `Σ_{n ≥ 1} e^{−ns} = 1/(e^s − 1)` with `s = ρ_x + ρ_z − 4ρ₀`.
pub fn exterior_bound(rho_x: f64, rho_z: f64, rho0: f64) -> Result<f64> {
    let s = rho_x + rho_z - 4.0 * rho0;
    if !(s > 0.0) {
        return Err(NpError::BoundInapplicable { s });
    }
    Ok(1.0 / s.exp_m1())
}

/// `K` with `|u_δ(x) − F_z(x)| ≤ K Σ e^{−ns}` for every `δ` when `λ = iδ`.
///
/// Each mode pair contributes at most `(½ + λ_n)(1 + e^{−2nρ₀}) M/π · e^{−ns}`
/// with `M = |a||b(ρ_z, ω_z)| / (R(sinh²ρ_z + sin²ω_z))`; the `n = 1` factor dominates.
pub fn exterior_envelope_constant(shape: EllipseShape, z: EllipticPoint, a: Vector2<f64>) -> f64 {
    let m = a.norm() * b_vector(z).norm() / (shape.r * (z.rho.sinh().powi(2) + z.omega.sin().powi(2)));
    let e = (-2.0 * shape.rho0).exp();
    0.5 * (1.0 + e) * (1.0 + e) * m / PI
}

/// `u_δ(x) − F_z(x)` from the mode series.
pub fn exterior_series(
    shape: EllipseShape,
    z: EllipticPoint,
    a: Vector2<f64>,
    x: EllipticPoint,
    delta: f64,
    mode: LambdaMode,
    n_max: usize,
) -> Result<Complex64> {
    let model = EllipseModalModel::new(shape, z, a, n_max)?;
    let c = model.coefficients(mode.lambda(delta))?;
    Ok(model.exterior_field(&c, &x)?.value)
}

/// Mode interleaving is `n = 1` cosine, `n = 1` sine, `n = 2` cosine, and so on.
#[derive(Debug, Clone)]
pub struct EllipseModalModel {
    shape: EllipseShape,
    z: EllipticPoint,
    a: Vector2<f64>,
    modes: Vec<EllipseMode>,
    eigenvalues: Vec<f64>,
    alpha: Vec<f64>,
}

impl EllipseModalModel {
    pub fn new(shape: EllipseShape, z: EllipticPoint, a: Vector2<f64>, n_max: usize) -> Result<Self> {
        check_exterior(&shape, z)?;
        let modes: Vec<EllipseMode> = (1..=n_max)
            .flat_map(|n| [Parity::Cosine, Parity::Sine].map(|p| EllipseMode::new(n, p, shape)))
            .collect();
        let eigenvalues = modes.iter().map(EllipseMode::eigenvalue).collect();
        let alpha = modes.iter().map(|m| alpha_mode(m, z, a)).collect();
        Ok(EllipseModalModel {
            shape,
            z,
            a,
            modes,
            eigenvalues,
            alpha,
        })
    }

    pub fn shape(&self) -> EllipseShape {
        self.shape
    }

    pub fn source(&self) -> (EllipticPoint, Vector2<f64>) {
        (self.z, self.a)
    }

    pub fn modes(&self) -> &[EllipseMode] {
        &self.modes
    }
}

impl ResonanceModel for EllipseModalModel {
    type Point = EllipticPoint;

    fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    fn mode_potentials(&self, x: &EllipticPoint) -> Result<OffGrid<Vec<f64>>> {
        Ok(OffGrid {
            value: self.modes.iter().map(|m| single_layer_mode(m, *x)).collect(),
            near_boundary: false,
        })
    }
}
