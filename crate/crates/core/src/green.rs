//! Eigenfunction expansion of the fundamental solution,
//! `Γ(x − z) = −Σ_j S[ψ_j](z) S[ψ_j](x) + S[φ₀](z)` for `x ∈ Ω̄`, `z ∉ Ω̄`.

use std::f64::consts::{PI, TAU};

use nalgebra::{Vector2, Vector3};
use serde::Serialize;

use crate::assembly::single_layer_offgrid;
use crate::ball::{harmonics_of_degree, BallConvention};
use crate::ellipse::SeriesValue;
use crate::error::{NpError, Result};
use crate::geometry::EllipticPoint;
use crate::numfmt::{serialize_f64_17, serialize_scalar_17};
use crate::symmetrization::Spectrum;

/// `(1/2π) ln|x − z|` in the plane, `−1/(4π|x − z|)` in space.
pub fn gamma_direct(x: &[f64], z: &[f64]) -> Result<f64> {
    if x.len() != z.len() || !(x.len() == 2 || x.len() == 3) {
        return Err(NpError::Domain(format!(
            "points must share dimension 2 or 3 (got {} and {})",
            x.len(),
            z.len()
        )));
    }
    let r = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(NpError::Singularity);
    }
    Ok(if x.len() == 2 {
        r.ln() / TAU
    } else {
        -1.0 / (4.0 * PI * r)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbePoint {
    /// A quadrature node; `S[ψ_j]` is read from the assembled traces.
    Node(usize),
    /// A point inside Ω, evaluated by off-grid quadrature.
    Point(Vector2<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericExpansion {
    pub value: f64,
    pub constant: f64,
    pub near_boundary: bool,
}

/// Truncated expansion over the first `n_max` retained modes.
pub fn expand_numeric(spectrum: &Spectrum, x: ProbePoint, z: Vector2<f64>, n_max: usize) -> Result<NumericExpansion> {
    let grid = spectrum.grid();
    if n_max > spectrum.len() {
        return Err(NpError::InsufficientTruncation {
            n_max: spectrum.len(),
            required: n_max,
        });
    }
    if grid.contains(z) {
        return Err(NpError::InvalidSource("expansion point z must lie outside the domain".into()));
    }
    let constant = single_layer_offgrid(grid, spectrum.phi0(), z);
    let mut near = constant.near_boundary;
    let mut sum = 0.0;
    for j in 0..n_max {
        let psi = spectrum.psi().column(j).into_owned();
        let at_z = single_layer_offgrid(grid, &psi, z);
        let at_x = match x {
            ProbePoint::Node(i) => {
                if i >= grid.len() {
                    return Err(NpError::Domain(format!("node {i} out of range")));
                }
                spectrum.traces()[(i, j)]
            }
            ProbePoint::Point(p) => {
                let v = single_layer_offgrid(grid, &psi, p);
                near |= v.near_boundary;
                v.value
            }
        };
        sum += at_z.value * at_x;
    }
    Ok(NumericExpansion {
        value: constant.value - sum,
        constant: constant.value,
        near_boundary: near,
    })
}

fn series_from_terms(terms: &[f64], base: f64) -> SeriesValue {
    let n = terms.len();
    let value = base + terms.iter().sum::<f64>();
    let tail_bound = if n >= 2 && terms[n - 2] != 0.0 {
        let q = (terms[n - 1] / terms[n - 2]).abs();
        if q < 1.0 {
            terms[n - 1].abs() * q / (1.0 - q)
        } else {
            f64::INFINITY
        }
    } else {
        0.0
    };
    SeriesValue {
        value,
        tail_bound,
        terms: n,
    }
}

/// `−Σ (1/nπ)(cosh nρ cos nω + sinh nρ sin nω·…)·e^{−nρ_z} + (1/2π)(ρ_z + ln(R/2))`,
/// with the angular arguments `ω`, `ω_z`.
pub fn expand_ellipse_closed(x: EllipticPoint, z: EllipticPoint, r: f64, rho0: f64, n_max: usize) -> Result<SeriesValue> {
    if !(x.rho <= rho0 && rho0 < z.rho) {
        return Err(NpError::Domain(format!(
            "need rho <= rho0 < rho_z (got {}, {rho0}, {})",
            x.rho, z.rho
        )));
    }
    let terms: Vec<f64> = (1..=n_max)
        .map(|n| {
            let nf = n as f64;
            let decay = (nf * (x.rho - z.rho)).exp();
            let e = (-2.0 * nf * x.rho).exp();
            let ch = 0.5 * (1.0 + e) * decay;
            let sh = 0.5 * (1.0 - e) * decay;
            -(ch * (nf * x.omega).cos() * (nf * z.omega).cos() + sh * (nf * x.omega).sin() * (nf * z.omega).sin())
                / (nf * PI)
        })
        .collect();
    Ok(series_from_terms(&terms, (z.rho + (r / 2.0).ln()) / TAU))
}

/// `−Σ_n c_n rⁿ r_z^{−n−1} Σ_m Y_n^m(x̂)Y_n^m(ẑ) − 1/(4π r_z)` with
/// `c_n = 1/(2n+1)`, or `1/(2n+1)³` under [`BallConvention::InverseSqrt`].
pub fn expand_ball_closed(x: Vector3<f64>, z: Vector3<f64>, n_max: usize, convention: BallConvention) -> Result<SeriesValue> {
    let (r, rz) = (x.norm(), z.norm());
    if !(r <= 1.0 && rz > 1.0) {
        return Err(NpError::Domain(format!("need |x| <= 1 < |z| (got {r}, {rz})")));
    }
    let terms: Vec<f64> = (1..=n_max)
        .map(|n| {
            if r == 0.0 {
                return 0.0;
            }
            let k = (2 * n + 1) as f64;
            let coeff = match convention {
                BallConvention::Validated => 1.0 / k,
                BallConvention::InverseSqrt => 1.0 / (k * k * k),
            };
            let addition: f64 = harmonics_of_degree(n, x)
                .iter()
                .zip(harmonics_of_degree(n, z))
                .map(|(a, b)| a * b)
                .sum();
            -coeff * r.powi(n as i32) * rz.powi(-(n as i32) - 1) * addition
        })
        .collect();
    Ok(series_from_terms(&terms, -1.0 / (4.0 * PI * rz)))
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionReport {
    pub n_max: usize,
    #[serde(serialize_with = "serialize_scalar_17")]
    pub max_abs_error: f64,
    #[serde(serialize_with = "serialize_f64_17")]
    pub mode_magnitudes: Vec<f64>,
    #[serde(serialize_with = "serialize_scalar_17")]
    pub constant_term: f64,
    pub probes: usize,
    pub near_boundary: bool,
}

/// Compares [`expand_numeric`] with [`gamma_direct`] over a probe set.
pub fn expansion_report(spectrum: &Spectrum, probes: &[ProbePoint], z: Vector2<f64>, n_max: usize) -> Result<ExpansionReport> {
    let grid = spectrum.grid();
    let mut worst: f64 = 0.0;
    let mut constant = 0.0;
    let mut near = false;
    for &p in probes {
        let e = expand_numeric(spectrum, p, z, n_max)?;
        let x = match p {
            ProbePoint::Node(i) => grid.positions()[i],
            ProbePoint::Point(v) => v,
        };
        let direct = gamma_direct(x.as_slice(), z.as_slice())?;
        worst = worst.max((e.value - direct).abs());
        constant = e.constant;
        near |= e.near_boundary;
    }
    let mode_magnitudes = (0..n_max)
        .map(|j| single_layer_offgrid(grid, &spectrum.psi().column(j).into_owned(), z).value.abs())
        .collect();
    Ok(ExpansionReport {
        n_max,
        max_abs_error: worst,
        mode_magnitudes,
        constant_term: constant,
        probes: probes.len(),
        near_boundary: near,
    })
}
