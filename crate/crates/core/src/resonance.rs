//! Dipole-driven transmission problem in spectral form.
//!
//! With `∂_ν F_z = Σ α_j ψ_j` the density solving `(λI − K*)φ = ∂_ν F_z` has
//! coefficients `c_j = α_j / (λ − λ_j)`, and `u − F_z = S[φ]`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{gradient_single_layer_offgrid, single_layer_offgrid, BoundaryGrid, NpSystem, OffGrid};
use crate::error::{NpError, Result};
use crate::numfmt::{fmt17, serialize_scalar_17};
use crate::symmetrization::{gradient_form, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct MaterialParams {
    pub eps_c: f64,
    pub eps_m: f64,
    pub delta: f64,
}

impl MaterialParams {
    pub fn new(eps_c: f64, eps_m: f64, delta: f64) -> Result<Self> {
        if !(eps_c < 0.0 && eps_m > 0.0 && delta > 0.0) {
            return Err(NpError::Domain(format!(
                "material needs eps_c < 0 < eps_m and delta > 0 (got {eps_c}, {eps_m}, {delta})"
            )));
        }
        Ok(MaterialParams { eps_c, eps_m, delta })
    }
}

/// `(ε_c + ε_m + iδ) / (2(ε_c − ε_m) + 2iδ)`.
pub fn plasmonic_lambda(mat: &MaterialParams) -> Complex64 {
    exact_lambda(mat.eps_c, mat.eps_m, mat.delta)
}

fn exact_lambda(eps_c: f64, eps_m: f64, delta: f64) -> Complex64 {
    Complex64::new(eps_c + eps_m, delta) / Complex64::new(2.0 * (eps_c - eps_m), 2.0 * delta)
}

/// How `λ(δ)` is produced inside a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LambdaMode {
    Exact { eps_c: f64, eps_m: f64 },
    /// `λ = iδ`.
    Simplified,
    /// `λ = λ₀ + iδ`, used to sit exactly on an eigenvalue.
    Tuned { lambda0: f64 },
}

impl LambdaMode {
    pub fn lambda(&self, delta: f64) -> Complex64 {
        match *self {
            LambdaMode::Exact { eps_c, eps_m } => exact_lambda(eps_c, eps_m, delta),
            LambdaMode::Simplified => Complex64::new(0.0, delta),
            LambdaMode::Tuned { lambda0 } => Complex64::new(lambda0, delta),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            LambdaMode::Exact { eps_c, eps_m } => format!("exact(eps_c={eps_c},eps_m={eps_m})"),
            LambdaMode::Simplified => "simplified(i*delta)".to_string(),
            LambdaMode::Tuned { lambda0 } => format!("tuned({lambda0}+i*delta)"),
        }
    }
}

/// Point dipole `F_z(x) = −a·∇Γ(x − z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleSource<V> {
    pub z: V,
    pub a: V,
}

pub type DipoleSource2 = DipoleSource<Vector2<f64>>;
pub type DipoleSource3 = DipoleSource<Vector3<f64>>;

impl DipoleSource2 {
    pub fn new(z: Vector2<f64>, a: Vector2<f64>) -> Result<Self> {
        if !(a.norm() > 0.0) {
            return Err(NpError::InvalidSource("dipole moment must be nonzero".into()));
        }
        Ok(DipoleSource { z, a })
    }

    pub fn potential(&self, x: Vector2<f64>) -> f64 {
        let d = x - self.z;
        -self.a.dot(&d) / (TAU * d.norm_squared())
    }

    pub fn gradient(&self, x: Vector2<f64>) -> Vector2<f64> {
        let d = x - self.z;
        let r2 = d.norm_squared();
        -(self.a / r2 - d * (2.0 * self.a.dot(&d) / (r2 * r2))) / TAU
    }

    fn check_exterior(&self, grid: &BoundaryGrid) -> Result<()> {
        if grid.contains(self.z) {
            return Err(NpError::InvalidSource(format!(
                "source ({}, {}) lies inside the domain",
                self.z.x, self.z.y
            )));
        }
        if grid.node_distance(self.z) <= 1e-12 * grid.perimeter() {
            return Err(NpError::InvalidSource(format!(
                "source ({}, {}) lies on the boundary",
                self.z.x, self.z.y
            )));
        }
        Ok(())
    }
}

/// Nodal values of `∂_ν F_z`.
pub fn dipole_trace(source: &DipoleSource2, grid: &BoundaryGrid) -> Result<DVector<f64>> {
    source.check_exterior(grid)?;
    Ok(DVector::from_iterator(
        grid.len(),
        grid.positions()
            .iter()
            .zip(grid.normals())
            .map(|(x, nu)| nu.dot(&source.gradient(*x))),
    ))
}

const ALPHA_CONSISTENCY: f64 = 1e-6;

/// `α_j = (½ − λ_j) a·∇S[ψ_j](z)`, checked against `⟨∂_ν F_z, ψ_j⟩_{H*}`.
pub fn alpha_coefficients(spectrum: &Spectrum, source: &DipoleSource2) -> Result<Vec<f64>> {
    let grid = spectrum.grid();
    let trace = dipole_trace(source, grid)?;
    let defining = spectrum.hstar_coefficients(&trace);
    let closed: Vec<f64> = (0..spectrum.len())
        .map(|j| {
            let psi = spectrum.psi().column(j).into_owned();
            let grad = gradient_single_layer_offgrid(grid, &psi, source.z).value;
            (0.5 - spectrum.eigenvalues()[j]) * source.a.dot(&grad)
        })
        .collect();
    let scale = defining.amax().max(1e-300);
    let mismatch = closed
        .iter()
        .zip(defining.iter())
        .map(|(c, d)| (c - d).abs())
        .fold(0.0, f64::max)
        / scale;
    if mismatch > ALPHA_CONSISTENCY {
        return Err(NpError::Consistency {
            what: "alpha coefficients".into(),
            mismatch,
            threshold: ALPHA_CONSISTENCY,
        });
    }
    Ok(closed)
}

/// `c_j = α_j / (λ − λ_j)`.
pub fn solve_density(eigenvalues: &[f64], alpha: &[f64], lambda: Complex64) -> Result<Vec<Complex64>> {
    eigenvalues
        .iter()
        .zip(alpha)
        .enumerate()
        .map(|(index, (&l, &a))| {
            let gap = lambda - l;
            if gap == Complex64::new(0.0, 0.0) {
                Err(NpError::SingularResolvent { index })
            } else {
                Ok(a / gap)
            }
        })
        .collect()
}

/// `‖∇(u_δ − F_z)‖²_{L²(Ω)} = Σ (½ − λ_j)|c_j|²`.
pub fn interior_gradient_norm(eigenvalues: &[f64], coeffs: &[Complex64]) -> f64 {
    gradient_form(eigenvalues, coeffs)
}

/// `‖∇u_δ‖²_{L²(Ω)}` from boundary integrals: `∮ F ∂_ν F`, the modal interior
/// term and `2 Re ∮ F conj((−½ + K*)φ)`.
pub fn full_gradient_norm(sys: &NpSystem, spectrum: &Spectrum, source: &DipoleSource2, coeffs: &[Complex64]) -> Result<f64> {
    let grid = sys.grid();
    let dtrace = dipole_trace(source, grid)?;
    let f: Vec<f64> = grid.positions().iter().map(|x| source.potential(*x)).collect();
    let w = grid.weights();
    let dipole: f64 = (0..grid.len()).map(|i| w[i] * f[i] * dtrace[i]).sum();
    let density = spectrum.synthesize(coeffs);
    Ok(dipole + interior_gradient_norm(spectrum.eigenvalues(), coeffs) + cross_term(sys.kstar(), w, &f, &density))
}

fn cross_term(kstar: &DMatrix<f64>, w: &[f64], f: &[f64], density: &[Complex64]) -> f64 {
    let n = w.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut normal = -0.5 * density[i];
        for j in 0..n {
            normal += kstar[(i, j)] * density[j];
        }
        total += w[i] * f[i] * normal.re;
    }
    2.0 * total
}

/// `u_δ(x) − F_z(x) = Σ c_j S[ψ_j](x)`.
pub fn exterior_field(spectrum: &Spectrum, coeffs: &[Complex64], x: Vector2<f64>) -> OffGrid<Complex64> {
    let potentials = numeric_mode_potentials(spectrum, x);
    OffGrid {
        value: coeffs.iter().zip(&potentials.value).map(|(c, s)| c * s).sum(),
        near_boundary: potentials.near_boundary,
    }
}

fn numeric_mode_potentials(spectrum: &Spectrum, x: Vector2<f64>) -> OffGrid<Vec<f64>> {
    let grid = spectrum.grid();
    let mut near = false;
    let value = (0..spectrum.len())
        .map(|j| {
            let r = single_layer_offgrid(grid, &spectrum.psi().column(j).into_owned(), x);
            near |= r.near_boundary;
            r.value
        })
        .collect();
    OffGrid {
        value,
        near_boundary: near,
    }
}

/// Spectral data of one source configuration: eigenvalues, the source
/// coefficients `α_j`, and single layer potentials of the modes.
pub trait ResonanceModel: Sync {
    type Point: Sync;

    fn eigenvalues(&self) -> &[f64];

    fn alpha(&self) -> &[f64];

    /// `S[ψ_j](x)` for every mode.
    fn mode_potentials(&self, x: &Self::Point) -> Result<OffGrid<Vec<f64>>>;

    /// `‖∇u_δ‖²` from the coefficients. The default is the modal identity
    /// `Σ (½ − λ_j)|c_j − α_j/(½ − λ_j)|²`.
    fn full_gradient_norm(&self, coeffs: &[Complex64]) -> Result<f64> {
        Ok(self
            .eigenvalues()
            .iter()
            .zip(self.alpha())
            .zip(coeffs)
            .map(|((&l, &a), c)| (0.5 - l) * (c - a / (0.5 - l)).norm_sqr())
            .sum())
    }

    fn coefficients(&self, lambda: Complex64) -> Result<Vec<Complex64>> {
        solve_density(self.eigenvalues(), self.alpha(), lambda)
    }

    fn interior_gradient_norm(&self, lambda: Complex64) -> Result<f64> {
        Ok(interior_gradient_norm(self.eigenvalues(), &self.coefficients(lambda)?))
    }

    fn exterior_field(&self, coeffs: &[Complex64], x: &Self::Point) -> Result<OffGrid<Complex64>> {
        let p = self.mode_potentials(x)?;
        Ok(OffGrid {
            value: coeffs.iter().zip(&p.value).map(|(c, s)| c * s).sum(),
            near_boundary: p.near_boundary,
        })
    }
}

/// The Nyström pipeline for one dipole.
#[derive(Debug, Clone)]
pub struct NumericModel<'a> {
    sys: &'a NpSystem,
    spectrum: &'a Spectrum,
    source: DipoleSource2,
    alpha: Vec<f64>,
}

impl<'a> NumericModel<'a> {
    pub fn new(sys: &'a NpSystem, spectrum: &'a Spectrum, source: DipoleSource2) -> Result<Self> {
        let alpha = alpha_coefficients(spectrum, &source)?;
        Ok(NumericModel {
            sys,
            spectrum,
            source,
            alpha,
        })
    }

    pub fn source(&self) -> &DipoleSource2 {
        &self.source
    }
}

impl ResonanceModel for NumericModel<'_> {
    type Point = Vector2<f64>;

    fn eigenvalues(&self) -> &[f64] {
        self.spectrum.eigenvalues()
    }

    fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    fn mode_potentials(&self, x: &Vector2<f64>) -> Result<OffGrid<Vec<f64>>> {
        Ok(numeric_mode_potentials(self.spectrum, *x))
    }

    fn full_gradient_norm(&self, coeffs: &[Complex64]) -> Result<f64> {
        full_gradient_norm(self.sys, self.spectrum, &self.source, coeffs)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    #[serde(serialize_with = "serialize_scalar_17")]
    pub delta: f64,
    #[serde(skip)]
    pub lambda: Complex64,
    #[serde(serialize_with = "serialize_scalar_17")]
    pub grad_norm_sq: f64,
    #[serde(serialize_with = "serialize_scalar_17")]
    pub full_grad_norm_sq: f64,
    #[serde(serialize_with = "serialize_scalar_17")]
    pub energy: f64,
    #[serde(skip)]
    pub exterior: Vec<f64>,
    pub near_boundary: bool,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub lambda_mode: LambdaMode,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn deltas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.delta).collect()
    }

    pub fn grad_norms(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.grad_norm_sq).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.energy).collect()
    }

    /// CSV with a header row, 17-digit floats and LF line endings.
    pub fn to_csv(&self) -> String {
        let k = self.rows.first().map_or(0, |r| r.exterior.len());
        let mut out = String::from("delta,lambda_re,lambda_im,grad_norm_sq,full_grad_norm_sq,energy");
        for i in 1..=k {
            out.push_str(&format!(",ext_sample_{i}"));
        }
        out.push('\n');
        for r in &self.rows {
            let mut fields = vec![
                fmt17(r.delta),
                fmt17(r.lambda.re),
                fmt17(r.lambda.im),
                fmt17(r.grad_norm_sq),
                fmt17(r.full_grad_norm_sq),
                fmt17(r.energy),
            ];
            fields.extend(r.exterior.iter().map(|&v| fmt17(v)));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

/// Log-spaced grid from `start` down to `stop` inclusive.
pub fn log_delta_grid(start: f64, stop: f64, points: usize) -> Result<Vec<f64>> {
    if !(start > 0.0 && stop > 0.0 && start > stop) || points < 2 {
        return Err(NpError::Domain(format!(
            "delta grid needs start > stop > 0 and at least two points (got {start}:{stop}:{points})"
        )));
    }
    let (a, b) = (start.log10(), stop.log10());
    Ok((0..points)
        .map(|i| {
            if i == points - 1 {
                stop
            } else {
                10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64)
            }
        })
        .collect())
}

pub fn delta_sweep<M: ResonanceModel>(
    model: &M,
    mode: LambdaMode,
    deltas: &[f64],
    samples: &[M::Point],
) -> Result<SweepResult> {
    if deltas.iter().any(|&d| !(d > 0.0)) || deltas.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(NpError::Domain("delta grid must be positive and strictly decreasing".into()));
    }
    let potentials = samples
        .iter()
        .map(|x| model.mode_potentials(x))
        .collect::<Result<Vec<_>>>()?;
    let near = potentials.iter().any(|p| p.near_boundary);
    let rows = deltas
        .par_iter()
        .map(|&delta| {
            let lambda = mode.lambda(delta);
            let c = model.coefficients(lambda)?;
            let grad_norm_sq = interior_gradient_norm(model.eigenvalues(), &c);
            let full_grad_norm_sq = model.full_gradient_norm(&c)?;
            let exterior = potentials
                .iter()
                .map(|p| c.iter().zip(&p.value).map(|(c, s)| c * s).sum::<Complex64>().norm())
                .collect();
            Ok(SweepRow {
                delta,
                lambda,
                grad_norm_sq,
                full_grad_norm_sq,
                energy: delta * full_grad_norm_sq,
                exterior,
                near_boundary: near,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        lambda_mode: mode,
        rows,
    })
}

/// Rows dropped from each end of the δ grid before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitWindow {
    pub trim_large: usize,
    pub trim_small: usize,
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow {
            trim_large: 2,
            trim_small: 2,
        }
    }
}

/// `log y = p log δ + q log|log δ| + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    #[serde(serialize_with = "serialize_scalar_17")]
    pub exponent: f64,
    #[serde(serialize_with = "serialize_scalar_17")]
    pub log_coefficient: f64,
    #[serde(serialize_with = "serialize_scalar_17")]
    pub intercept: f64,
    #[serde(serialize_with = "serialize_scalar_17")]
    pub residual: f64,
    pub rows_used: usize,
}

pub fn fit_blowup_rate(sweep: &SweepResult, with_log_correction: bool, window: FitWindow) -> Result<ScalingFit> {
    fit_power_law(&sweep.deltas(), &sweep.grad_norms(), with_log_correction, window)
}

pub fn fit_power_law(deltas: &[f64], values: &[f64], with_log_correction: bool, window: FitWindow) -> Result<ScalingFit> {
    if deltas.len() != values.len() {
        return Err(NpError::Fit("delta and value columns differ in length".into()));
    }
    let mut idx: Vec<usize> = (0..deltas.len()).collect();
    idx.sort_by(|&i, &j| deltas[j].total_cmp(&deltas[i]));
    if idx.len() < window.trim_large + window.trim_small + 5 {
        return Err(NpError::Fit(format!(
            "{} rows leave fewer than 5 after trimming {}+{}",
            idx.len(),
            window.trim_large,
            window.trim_small
        )));
    }
    let used = &idx[window.trim_large..idx.len() - window.trim_small];
    if used.iter().any(|&i| !(deltas[i] > 0.0 && deltas[i] < 1.0 && values[i] > 0.0)) {
        return Err(NpError::Fit("fit needs 0 < delta < 1 and positive values".into()));
    }
    let cols = if with_log_correction { 3 } else { 2 };
    let m = used.len();
    let design = DMatrix::from_fn(m, cols, |r, c| {
        let d = deltas[used[r]];
        match (c, with_log_correction) {
            (0, _) => d.ln(),
            (1, true) => d.ln().abs().ln(),
            _ => 1.0,
        }
    });
    let rhs = DVector::from_iterator(m, used.iter().map(|&i| values[i].ln()));
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(NpError::Fit("degenerate design matrix".into()));
    }
    let beta = svd
        .solve(&rhs, 0.0)
        .map_err(|e| NpError::Fit(e.to_string()))?;
    let residual = (&design * &beta - &rhs).norm();
    let (exponent, log_coefficient, intercept) = if with_log_correction {
        (beta[0], beta[1], beta[2])
    } else {
        (beta[0], 0.0, beta[1])
    };
    Ok(ScalingFit {
        exponent,
        log_coefficient,
        intercept,
        residual,
        rows_used: m,
    })
}
