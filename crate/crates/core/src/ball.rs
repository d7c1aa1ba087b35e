//! Unit ball in three dimensions: `K*` acts on degree-`n` spherical harmonics
//! by `1/(2(2n+1))`.

use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::Serialize;

use crate::assembly::OffGrid;
use crate::ellipse::SeriesValue;
use crate::error::{NpError, Result};
use crate::resonance::ResonanceModel;

pub fn ball_eigenvalue(n: usize) -> f64 {
    assert!(n >= 1, "ball modes start at n = 1");
    1.0 / (2.0 * (2 * n + 1) as f64)
}

/// A spherical-harmonic value together with whether the direction had to be rescaled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicValue {
    pub value: f64,
    pub renormalized: bool,
}

fn unit(direction: Vector3<f64>) -> (Vector3<f64>, bool) {
    let norm = direction.norm();
    if (norm - 1.0).abs() <= 1e-12 {
        (direction, false)
    } else {
        (direction / norm, true)
    }
}

/// Fully normalized associated Legendre values `P̃_l^m(cos θ)` for `l = m..=n`,
/// scaled so that `∫ |P̃_l^m e^{imφ}|² dΩ = 1`.
fn normalized_legendre(n: usize, m: usize, x: f64, sin_theta: f64) -> Vec<f64> {
    let mut pmm = 1.0 / (4.0 * PI).sqrt();
    for k in 1..=m {
        pmm *= ((2 * k + 1) as f64 / (2 * k) as f64).sqrt() * sin_theta;
    }
    let mut out = vec![pmm];
    if n == m {
        return out;
    }
    out.push((2.0 * m as f64 + 3.0).sqrt() * x * pmm);
    for l in (m + 2)..=n {
        let lf = l as f64;
        let mf = m as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
        let k = out.len();
        out.push(a * (x * out[k - 1] - b * out[k - 2]));
    }
    out
}

/// Real orthonormal spherical harmonic: `√2 P̃ cos mφ` for `m > 0`,
/// `√2 P̃ sin |m|φ` for `m < 0`, `P̃` for `m = 0`.
pub fn spherical_harmonic(n: usize, m: i64, direction: Vector3<f64>) -> HarmonicValue {
    assert!(m.unsigned_abs() as usize <= n, "order must satisfy |m| <= n");
    let (d, renormalized) = unit(direction);
    HarmonicValue {
        value: real_harmonic(n, m, d),
        renormalized,
    }
}

fn real_harmonic(n: usize, m: i64, d: Vector3<f64>) -> f64 {
    let ma = m.unsigned_abs() as usize;
    let x = d.z.clamp(-1.0, 1.0);
    let sin_theta = d.x.hypot(d.y);
    let p = *normalized_legendre(n, ma, x, sin_theta).last().unwrap();
    if m == 0 {
        return p;
    }
    let phi = d.y.atan2(d.x);
    let angular = if m > 0 {
        (ma as f64 * phi).cos()
    } else {
        (ma as f64 * phi).sin()
    };
    std::f64::consts::SQRT_2 * p * angular
}

/// All `2n + 1` real harmonics of degree `n`, ordered `m = −n..=n`.
pub fn harmonics_of_degree(n: usize, direction: Vector3<f64>) -> Vec<f64> {
    let (d, _) = unit(direction);
    (-(n as i64)..=n as i64).map(|m| real_harmonic(n, m, d)).collect()
}

/// `Σ_m |Y_n^m(ẑ)|²`.
pub fn unsold_check(n: usize, direction: Vector3<f64>) -> f64 {
    harmonics_of_degree(n, direction).iter().map(|y| y * y).sum()
}

/// `S[Y_n^m](x)`: `−rⁿY/(2n+1)` inside, `−r^{−(n+1)}Y/(2n+1)` outside.
pub fn single_layer_ynm(n: usize, m: i64, x: Vector3<f64>) -> f64 {
    let r = x.norm();
    let radial = if r < 1.0 {
        r.powi(n as i32)
    } else {
        r.powi(-(n as i32 + 1))
    };
    if radial == 0.0 {
        return 0.0;
    }
    -radial * real_harmonic(n, m, x / r) / (2 * n + 1) as f64
}

/// Which normalization of the degree-`n` eigenfunctions to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallConvention {
    /// `ψ = √(2n+1) Y`, the unit vector of `−∫ S[ψ]ψ dσ`.
    #[default]
    Validated,
    /// `ψ = Y/√(2n+1)`, giving Green coefficients `1/(2n+1)³`.
    InverseSqrt,
}

/// `‖Y_n^m‖²_{H*} = −∫ S[Y]·Y dσ = 1/(2n+1)`, read off the boundary value of the single layer.
pub fn hstar_norm_sq_of_harmonic(n: usize) -> f64 {
    // on r = 1, S[Y] = c·Y and ∫ Y² dσ = 1, so the norm is −c
    let pole = Vector3::z();
    -single_layer_ynm(n, 0, pole) / real_harmonic(n, 0, pole)
}

/// Constant `κ` with `ψ_n^m = κ Y_n^m`.
pub fn hstar_normalized_mode(n: usize, convention: BallConvention) -> f64 {
    match convention {
        BallConvention::Validated => 1.0 / hstar_norm_sq_of_harmonic(n).sqrt(),
        BallConvention::InverseSqrt => 1.0 / ((2 * n + 1) as f64).sqrt(),
    }
}

fn check_source(r0: f64) -> Result<()> {
    if !(r0 > 1.0) {
        return Err(NpError::InvalidSource(format!("source radius {r0} must exceed 1")));
    }
    Ok(())
}

/// `a·∇S[ψ_n^0](z)` for `z = r₀ẑ`, `a = a_z ẑ`: `(n+1) r₀^{−(n+2)} a_z / √(4π)`.
pub fn axisymmetric_gradient(n: usize, r0: f64, a_z: f64) -> f64 {
    (n as f64 + 1.0) * r0.powi(-(n as i32 + 2)) * a_z / (4.0 * PI).sqrt()
}

/// Axisymmetric dipole on the polar axis; only the `m = 0` modes are excited.
#[derive(Debug, Clone)]
pub struct BallAxisymmetricModel {
    r0: f64,
    a_z: f64,
    eigenvalues: Vec<f64>,
    alpha: Vec<f64>,
}

impl BallAxisymmetricModel {
    pub fn new(r0: f64, a_z: f64, n_max: usize) -> Result<Self> {
        check_source(r0)?;
        let eigenvalues: Vec<f64> = (1..=n_max).map(ball_eigenvalue).collect();
        let alpha = (1..=n_max)
            .zip(&eigenvalues)
            .map(|(n, l)| (0.5 - l) * axisymmetric_gradient(n, r0, a_z))
            .collect();
        Ok(BallAxisymmetricModel {
            r0,
            a_z,
            eigenvalues,
            alpha,
        })
    }

    pub fn source(&self) -> (f64, f64) {
        (self.r0, self.a_z)
    }
}

impl ResonanceModel for BallAxisymmetricModel {
    type Point = Vector3<f64>;

    fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    fn mode_potentials(&self, x: &Vector3<f64>) -> Result<OffGrid<Vec<f64>>> {
        Ok(OffGrid {
            value: (1..=self.eigenvalues.len())
                .map(|n| hstar_normalized_mode(n, BallConvention::Validated) * single_layer_ynm(n, 0, *x))
                .collect(),
            near_boundary: false,
        })
    }
}

fn series(terms: impl Iterator<Item = f64>) -> SeriesValue {
    let (mut total, mut prev, mut last, mut count) = (0.0, 0.0, 0.0, 0);
    for t in terms {
        total += t;
        prev = last;
        last = t;
        count += 1;
    }
    let q = if prev > 0.0 { last / prev } else { 1.0 };
    let tail_bound = if last == 0.0 {
        0.0
    } else if q < 1.0 {
        last * q / (1.0 - q)
    } else {
        f64::INFINITY
    };
    SeriesValue {
        value: total,
        tail_bound,
        terms: count,
    }
}

/// Exact `‖∇(u_δ − F_z)‖²` for the axisymmetric dipole with `λ = iδ`.
pub fn ball_resonance_series(r0: f64, a_z: f64, delta: f64, n_max: usize) -> Result<SeriesValue> {
    let model = BallAxisymmetricModel::new(r0, a_z, n_max)?;
    let c = model.coefficients(Complex64::new(0.0, delta))?;
    Ok(series(
        model
            .eigenvalues()
            .iter()
            .zip(&c)
            .map(|(l, c)| (0.5 - l) * c.norm_sqr()),
    ))
}

/// `Σ n³ r₀^{−2(n+2)} / (δ² + λ_n²)`.
pub fn ball_bound_series(r0: f64, delta: f64, n_max: usize) -> Result<SeriesValue> {
    check_source(r0)?;
    Ok(series((1..=n_max).map(|n| {
        let l = ball_eigenvalue(n);
        (n as f64).powi(3) * r0.powi(-2 * (n as i32 + 2)) / (delta * delta + l * l)
    })))
}
