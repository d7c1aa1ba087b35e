//! Symmetrization of `K*` in the `H*` inner product.
//!
//! `φ₀` spans the eigenvalue-½ direction. The modified single layer
//! `S̃ = S + (𝟙 − S[φ₀]) ⊗ ⟨·, 1⟩` equals `S` on mean-zero densities and sends
//! `φ₀` to the constant trace. The metric built from it makes the discrete
//! `K*` self-adjoint, and a Cholesky whitening turns the spectral problem into
//! a dense symmetric one.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::assembly::{BoundaryGrid, NpSystem};
use crate::error::{NpError, Result};
use crate::numfmt::serialize_f64_17;

const PHI0_SHIFT: f64 = 0.5 + 1e-10;
const PHI0_TOLERANCE: f64 = 1e-3;
const ASYMMETRY_THRESHOLD: f64 = 1e-8;

/// The eigenvalue-½ density normalized to unit mass.
#[derive(Debug, Clone)]
pub struct Phi0 {
    pub density: DVector<f64>,
    pub eigenvalue: f64,
}

pub fn compute_phi0(sys: &NpSystem) -> Result<Phi0> {
    let n = sys.len();
    let shifted = sys.kstar() - DMatrix::identity(n, n) * PHI0_SHIFT;
    let lu = shifted.lu();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    for _ in 0..3 {
        let next = lu
            .solve(&v)
            .ok_or_else(|| NpError::DiscretizationFailure("K* - I/2 is singular to working precision".into()))?;
        let norm = next.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(NpError::DiscretizationFailure("inverse iteration diverged".into()));
        }
        v = next / norm;
    }
    let eigenvalue = v.dot(&(sys.kstar() * &v));
    if (eigenvalue - 0.5).abs() > PHI0_TOLERANCE {
        return Err(NpError::DiscretizationFailure(format!(
            "eigenvalue nearest 1/2 is {eigenvalue}"
        )));
    }
    let mass: f64 = sys.grid().weights().iter().zip(v.iter()).map(|(w, p)| w * p).sum();
    if mass.abs() < 1e-300 {
        return Err(NpError::DiscretizationFailure("phi0 has zero mass".into()));
    }
    // dividing by the signed mass also makes the mean positive
    Ok(Phi0 {
        density: v / mass,
        eigenvalue,
    })
}

/// Constant value of `S[φ₀]` inside Ω, read off as the weighted mean of the trace.
pub fn s_phi0_interior(sys: &NpSystem, phi0: &DVector<f64>) -> f64 {
    let trace = sys.slayer() * phi0;
    let grid = sys.grid();
    grid.pairing(&trace, &DVector::from_element(grid.len(), 1.0)) / grid.perimeter()
}

pub fn build_stilde(sys: &NpSystem, phi0: &DVector<f64>) -> DMatrix<f64> {
    let n = sys.len();
    let defect = DVector::from_element(n, 1.0) - sys.slayer() * phi0;
    let mass = DVector::from_column_slice(sys.grid().weights());
    sys.slayer() + defect * mass.transpose()
}

/// Gram matrix of the `H*` inner product on nodal densities with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct HStarMetric {
    gram: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl HStarMetric {
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn inner(&self, f: &DVector<f64>, g: &DVector<f64>) -> f64 {
        f.dot(&(&self.gram * g))
    }
}

/// Builds `G` with `φᵀGψ = −⟨φ, S̃ψ⟩` on mean-zero densities and `φ₀ᵀGφ₀ = 1`.
///
/// The raw form `−⟨φ₀, S̃φ₀⟩ = −1` has the wrong sign on the `φ₀` direction,
/// so the mass term is reflected: `G = −W S̃ + 2 w wᵀ`. Mean-zero densities
/// see no change.
pub fn hstar_gram(sys: &NpSystem, stilde: &DMatrix<f64>) -> Result<HStarMetric> {
    let w = sys.grid().weights();
    let n = sys.len();
    let mut gram = DMatrix::from_fn(n, n, |i, j| -w[i] * stilde[(i, j)] + 2.0 * w[i] * w[j]);
    let sym = (&gram + gram.transpose()) * 0.5;
    gram = sym;
    let chol = Cholesky::new(gram.clone()).ok_or(NpError::MetricIndefinite)?;
    if chol.l().diagonal().iter().any(|&d| !(d > 0.0)) {
        return Err(NpError::MetricIndefinite);
    }
    Ok(HStarMetric { gram, chol })
}

/// `‖AᵀG − GA‖ / ‖GA‖`, the discrete self-adjointness defect.
pub fn self_adjointness_residual(sys: &NpSystem, metric: &HStarMetric) -> f64 {
    let ga = metric.gram() * sys.kstar();
    let atg = sys.kstar().transpose() * metric.gram();
    (atg - &ga).norm() / ga.norm()
}

/// Retained eigenpairs of `K*` in the `H*` metric.
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: BoundaryGrid,
    eigenvalues: Vec<f64>,
    psi: DMatrix<f64>,
    traces: DMatrix<f64>,
    phi0: DVector<f64>,
    phi0_eigenvalue: f64,
    s_phi0_interior: f64,
}

pub const fn default_keep(n: usize) -> usize {
    let q = n / 4;
    if q < 64 {
        q
    } else {
        64
    }
}

pub fn symmetrized_spectrum(sys: &NpSystem, phi0: &Phi0, metric: &HStarMetric, keep: usize) -> Result<Spectrum> {
    let n = sys.len();
    if keep > n - 1 {
        return Err(NpError::InvalidResolution(format!(
            "cannot keep {keep} eigenpairs from {n} nodes"
        )));
    }
    let l = metric.factor();
    let a = sys.kstar();
    // B = Lᵀ A L⁻ᵀ, through Xᵀ = L⁻¹ Aᵀ
    let xt = l
        .solve_lower_triangular(&a.transpose())
        .ok_or(NpError::MetricIndefinite)?;
    let b = l.transpose() * xt.transpose();
    let residual = (&b - b.transpose()).norm() / b.norm();
    if !(residual < ASYMMETRY_THRESHOLD) {
        return Err(NpError::SymmetrizationFailure {
            residual,
            threshold: ASYMMETRY_THRESHOLD,
        });
    }
    let b = (&b + b.transpose()) * 0.5;
    let eig = SymmetricEigen::new(b);

    let half = (0..n)
        .min_by(|&i, &j| {
            (eig.eigenvalues[i] - 0.5)
                .abs()
                .total_cmp(&(eig.eigenvalues[j] - 0.5).abs())
        })
        .expect("non-empty spectrum");
    let mut order: Vec<usize> = (0..n).filter(|&i| i != half).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].abs().total_cmp(&eig.eigenvalues[i].abs()));
    // ±λ pairs share |λ| only up to rounding; put the positive member first
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len()
            && same_cluster(eig.eigenvalues[order[end - 1]].abs(), eig.eigenvalues[order[end]].abs())
        {
            end += 1;
        }
        order[start..end].sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        start = end;
    }
    order.truncate(keep);

    let lt = l.transpose();
    let mut eigenvalues = Vec::with_capacity(keep);
    let mut psi = DMatrix::zeros(n, keep);
    for (col, &idx) in order.iter().enumerate() {
        eigenvalues.push(eig.eigenvalues[idx]);
        let v = eig.eigenvectors.column(idx).into_owned();
        let p = lt.solve_upper_triangular(&v).ok_or(NpError::MetricIndefinite)?;
        psi.set_column(col, &p);
    }
    let mut traces = sys.slayer() * &psi;

    fix_degenerate_pairs(&eigenvalues, &mut psi, &mut traces);
    fix_signs(&mut psi, &mut traces);

    Ok(Spectrum {
        grid: sys.grid().clone(),
        eigenvalues,
        psi,
        traces,
        phi0: phi0.density.clone(),
        phi0_eigenvalue: phi0.eigenvalue,
        s_phi0_interior: s_phi0_interior(sys, &phi0.density),
    })
}

fn same_cluster(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()) + 1e-14
}

/// Rotates each exactly-two-member eigenvalue cluster so the first vector
/// carries the whole trace at node 0 and the second vanishes there.
fn fix_degenerate_pairs(eigenvalues: &[f64], psi: &mut DMatrix<f64>, traces: &mut DMatrix<f64>) {
    let m = eigenvalues.len();
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m && same_cluster(eigenvalues[end - 1], eigenvalues[end]) {
            end += 1;
        }
        if end - start == 2 {
            let (i, j) = (start, start + 1);
            let (ti, tj) = (traces[(0, i)], traces[(0, j)]);
            let r = ti.hypot(tj);
            let scale = traces.column(i).amax().max(traces.column(j).amax());
            if r > 1e-12 * scale {
                let (c, s) = (ti / r, tj / r);
                for mat in [&mut *psi, &mut *traces] {
                    let a = mat.column(i).into_owned();
                    let b = mat.column(j).into_owned();
                    mat.set_column(i, &(&a * c + &b * s));
                    mat.set_column(j, &(&b * c - &a * s));
                }
            }
        }
        start = end;
    }
}

fn fix_signs(psi: &mut DMatrix<f64>, traces: &mut DMatrix<f64>) {
    for k in 0..psi.ncols() {
        let col = psi.column(k);
        let cutoff = 1e-8 * col.amax();
        if let Some(first) = col.iter().copied().find(|v| v.abs() > cutoff) {
            if first < 0.0 {
                psi.column_mut(k).neg_mut();
                traces.column_mut(k).neg_mut();
            }
        }
    }
}

impl Spectrum {
    /// Assembles the complete spectral pipeline with the default number of modes.
    pub fn compute(sys: &NpSystem) -> Result<Spectrum> {
        Self::compute_with_keep(sys, default_keep(sys.len()))
    }

    pub fn compute_with_keep(sys: &NpSystem, keep: usize) -> Result<Spectrum> {
        let phi0 = compute_phi0(sys)?;
        let stilde = build_stilde(sys, &phi0.density);
        let metric = hstar_gram(sys, &stilde)?;
        symmetrized_spectrum(sys, &phi0, &metric, keep)
    }

    pub fn grid(&self) -> &BoundaryGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigendensities as columns, `H*`-normalized.
    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    /// Boundary traces `S[ψ_j]` as columns.
    pub fn traces(&self) -> &DMatrix<f64> {
        &self.traces
    }

    pub fn phi0(&self) -> &DVector<f64> {
        &self.phi0
    }

    pub fn phi0_eigenvalue(&self) -> f64 {
        self.phi0_eigenvalue
    }

    pub fn s_phi0_interior(&self) -> f64 {
        self.s_phi0_interior
    }

    /// `⟨f, ψ_j⟩_{H*}` for every retained `j`. Only the mean-zero part of `f`
    /// contributes, and there the form is `−⟨f, S[ψ_j]⟩`.
    pub fn hstar_coefficients(&self, f: &DVector<f64>) -> DVector<f64> {
        let w = self.grid.weights();
        DVector::from_fn(self.len(), |j, _| {
            -(0..f.len()).map(|i| w[i] * f[i] * self.traces[(i, j)]).sum::<f64>()
        })
    }

    /// Nodal density `Σ c_j ψ_j`.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.len();
        (0..n)
            .map(|i| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * self.psi[(i, j)])
                    .sum()
            })
            .collect()
    }

    /// SHA-256 hex digest over the little-endian bytes of the traces, column by column.
    pub fn traces_checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for v in self.traces.iter() {
            hasher.update(v.to_le_bytes());
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn export(&self, shape: &str) -> SpectrumExport {
        SpectrumExport {
            n: self.grid.len(),
            shape: shape.to_string(),
            eigenvalues: self.eigenvalues.clone(),
            traces_checksum: self.traces_checksum(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumExport {
    #[serde(rename = "N")]
    pub n: usize,
    pub shape: String,
    #[serde(serialize_with = "serialize_f64_17")]
    pub eigenvalues: Vec<f64>,
    pub traces_checksum: String,
}

/// `Σ (½ − λ_j)|c_j|²`, the interior Dirichlet energy of `S[Σ c_j ψ_j]`.
pub fn gradient_form(eigenvalues: &[f64], coeffs: &[Complex64]) -> f64 {
    eigenvalues
        .iter()
        .zip(coeffs)
        .map(|(l, c)| (0.5 - l) * c.norm_sqr())
        .sum()
}

/// Largest deviation of `⟨ψ_i, ψ_j⟩_G` from the identity over the retained basis.
pub fn orthonormality_defect(spectrum: &Spectrum, metric: &HStarMetric) -> f64 {
    let gram = spectrum.psi().transpose() * metric.gram() * spectrum.psi();
    let m = gram.nrows();
    (&gram - DMatrix::identity(m, m)).amax()
}

/// Largest deviation of `‖S̃ψ_j‖_H` from 1, with `⟨f, g⟩_H = −⟨f, S̃⁻¹g⟩`.
pub fn stilde_unitarity_defect(sys: &NpSystem, stilde: &DMatrix<f64>, spectrum: &Spectrum) -> Result<f64> {
    let lu = stilde.clone().lu();
    let w = sys.grid().weights();
    let mut worst: f64 = 0.0;
    for j in 0..spectrum.len() {
        let f = stilde * spectrum.psi().column(j);
        let back = lu
            .solve(&f)
            .ok_or_else(|| NpError::DiscretizationFailure("modified single layer is singular".into()))?;
        let norm_sq: f64 = -(0..f.len()).map(|i| w[i] * f[i] * back[i]).sum::<f64>();
        worst = worst.max((norm_sq.sqrt() - 1.0).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::build_grid;
    use crate::geometry::{circle, ellipse_curve, EllipseShape};
    use std::f64::consts::{LN_2, PI};

    fn system(curve: crate::geometry::Curve, n: usize) -> NpSystem {
        NpSystem::assemble(build_grid(&curve, n).unwrap()).unwrap()
    }

    fn ellipse_system(n: usize) -> NpSystem {
        system(ellipse_curve(EllipseShape::new(1.0, LN_2).unwrap()).unwrap(), n)
    }

    #[test]
    fn circle_phi0_is_uniform() {
        let sys = system(circle(1.0).unwrap(), 64);
        let phi0 = compute_phi0(&sys).unwrap();
        assert!((phi0.eigenvalue - 0.5).abs() < 1e-12);
        for v in phi0.density.iter() {
            assert!((v - 1.0 / (2.0 * PI)).abs() < 1e-12);
        }
    }

    #[test]
    fn ellipse_phi0_matches_closed_form() {
        let sys = ellipse_system(128);
        let phi0 = compute_phi0(&sys).unwrap();
        let g = sys.grid();
        assert!((phi0.density[0] - 1.0 / (2.0 * PI * 0.75)).abs() < 1e-10);
        assert!((phi0.density[32] - 1.0 / (2.0 * PI * 1.25)).abs() < 1e-10);
        for (i, v) in phi0.density.iter().enumerate() {
            assert!((v - 1.0 / (2.0 * PI * g.speeds()[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn stilde_defining_properties() {
        let sys = ellipse_system(128);
        let phi0 = compute_phi0(&sys).unwrap();
        let st = build_stilde(&sys, &phi0.density);
        let one = &st * &phi0.density;
        assert!(one.iter().all(|v| (v - 1.0).abs() < 1e-10));

        let g = sys.grid();
        let f = DVector::from_fn(128, |i, _| (2.0 * g.params()[i]).sin() / g.speeds()[i]);
        assert!(g.pairing(&f, &DVector::from_element(128, 1.0)).abs() < 1e-14);
        let diff = &st * &f - sys.slayer() * &f;
        assert!(diff.amax() < 1e-14);
        assert!(s_phi0_interior(&sys, &phi0.density).abs() < 1e-10);
    }

    #[test]
    fn circle_cosine_hstar_norm() {
        let sys = system(circle(1.0).unwrap(), 64);
        let phi0 = compute_phi0(&sys).unwrap();
        let metric = hstar_gram(&sys, &build_stilde(&sys, &phi0.density)).unwrap();
        let c = DVector::from_fn(64, |i, _| sys.grid().params()[i].cos());
        assert!((metric.inner(&c, &c) - PI / 2.0).abs() < 1e-10);
        assert!((metric.inner(&phi0.density, &phi0.density) - 1.0).abs() < 1e-12);
        assert!(metric.inner(&phi0.density, &c).abs() < 1e-12);
    }

    #[test]
    fn ellipse_spectrum_pairs() {
        let sys = ellipse_system(256);
        let spec = Spectrum::compute_with_keep(&sys, 8).unwrap();
        // cosine modes carry +λ_n, sine modes −λ_n
        let expected = [0.125, -0.125, 0.03125, -0.03125, 0.0078125, -0.0078125, 0.001953125, -0.001953125];
        for (l, e) in spec.eigenvalues().iter().zip(expected) {
            assert!((l - e).abs() < 1e-8, "{l} vs {e}");
        }
        // the cosine mode has a nonzero trace on the symmetry axis, the sine mode none
        assert!(spec.traces()[(0, 0)].abs() > 0.1);
        assert!(spec.traces()[(0, 1)].abs() < 1e-10);
    }

    #[test]
    fn disk_spectrum_vanishes() {
        let sys = system(circle(1.0).unwrap(), 128);
        let spec = Spectrum::compute(&sys).unwrap();
        assert!(spec.eigenvalues().iter().all(|l| l.abs() < 1e-10));
    }

    #[test]
    fn keep_is_bounded() {
        let sys = system(circle(1.0).unwrap(), 16);
        assert!(matches!(
            Spectrum::compute_with_keep(&sys, 16),
            Err(NpError::InvalidResolution(_))
        ));
        assert_eq!(Spectrum::compute_with_keep(&sys, 15).unwrap().len(), 15);
    }

    #[test]
    fn gradient_form_values() {
        assert_eq!(gradient_form(&[0.125], &[Complex64::new(0.0, 0.0)]), 0.0);
        assert!((gradient_form(&[0.125, 0.1], &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]) - 0.375).abs() < 1e-15);
        let v = gradient_form(&[0.0], &[Complex64::new(0.0, 2.0)]);
        assert!((v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn checksum_is_hex_sha256() {
        let sys = ellipse_system(32);
        let spec = Spectrum::compute(&sys).unwrap();
        let sum = spec.traces_checksum();
        assert_eq!(sum.len(), 64);
        assert_eq!(sum, Spectrum::compute(&sys).unwrap().traces_checksum());
    }
}
