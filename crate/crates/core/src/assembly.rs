//! Nyström discretization of the adjoint Neumann–Poincaré operator `K*` and
//! the single layer operator `S` on a smooth closed curve.
//!
//! Both matrices act on nodal density values (the quadrature weights are
//! folded in), so `kstar * φ` gives nodal values of `K*[φ]` and
//! `slayer * φ` gives the boundary trace of `S[φ]`.
//!
//! The logarithmic kernel of `S` is split as
//! `ln|γ(t) − γ(s)| = ln|2 sin((t−s)/2)| + H(t, s)` with `H` smooth; the first
//! part is integrated with the trigonometric product weights for
//! `ln(4 sin²((t−s)/2))` and the remainder with the trapezoid rule. Both parts
//! converge super-algebraically for analytic curves.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, Vector2};
use rayon::prelude::*;

use crate::error::{NpError, Result};
use crate::geometry::Curve;

/// Quadrature nodes `t_i = 2πi/N` on a curve together with the geometric data
/// every kernel needs.
#[derive(Debug, Clone)]
pub struct BoundaryGrid {
    curve: Curve,
    params: Vec<f64>,
    positions: Vec<Vector2<f64>>,
    normals: Vec<Vector2<f64>>,
    speeds: Vec<f64>,
    weights: Vec<f64>,
    curvatures: Vec<f64>,
}

pub fn build_grid(curve: &Curve, n: usize) -> Result<BoundaryGrid> {
    if n < 16 || n % 2 != 0 {
        return Err(NpError::InvalidResolution(format!(
            "node count must be even and at least 16 (got {n})"
        )));
    }
    let h = TAU / n as f64;
    let params: Vec<f64> = (0..n).map(|i| h * i as f64).collect();
    let positions = params.iter().map(|&t| curve.position(t)).collect();
    let speeds: Vec<f64> = params.iter().map(|&t| curve.speed(t)).collect();
    let normals = params
        .iter()
        .map(|&t| curve.outward_normal(t))
        .collect::<Result<Vec<_>>>()?;
    let curvatures = params
        .iter()
        .map(|&t| curve.curvature(t))
        .collect::<Result<Vec<_>>>()?;
    let weights = speeds.iter().map(|s| h * s).collect();
    Ok(BoundaryGrid {
        curve: curve.clone(),
        params,
        positions,
        normals,
        speeds,
        weights,
        curvatures,
    })
}

impl BoundaryGrid {
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn positions(&self) -> &[Vector2<f64>] {
        &self.positions
    }

    pub fn normals(&self) -> &[Vector2<f64>] {
        &self.normals
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    /// Arclength weights `2π |γ'(t_i)| / N`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn curvatures(&self) -> &[f64] {
        &self.curvatures
    }

    pub fn perimeter(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `⟨f, g⟩ = Σ w_i f_i g_i`, the discrete `L²(∂Ω)` pairing.
    pub fn pairing(&self, f: &DVector<f64>, g: &DVector<f64>) -> f64 {
        self.weights
            .iter()
            .zip(f.iter().zip(g.iter()))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    /// Largest distance between consecutive nodes.
    pub fn max_spacing(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| (self.positions[(i + 1) % n] - self.positions[i]).norm())
            .fold(0.0, f64::max)
    }

    /// Distance from `x` to the nearest node.
    pub fn node_distance(&self, x: Vector2<f64>) -> f64 {
        self.positions
            .iter()
            .map(|p| (p - x).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Points closer than three node spacings lose the spectral accuracy of
    /// the plain trapezoid rule.
    pub fn near_boundary(&self, x: Vector2<f64>) -> bool {
        self.node_distance(x) < 3.0 * self.max_spacing()
    }

    /// Winding number of the nodal polygon around `x`.
    pub fn winding_number(&self, x: Vector2<f64>) -> f64 {
        let n = self.len();
        let mut total = 0.0;
        for i in 0..n {
            let a = self.positions[i] - x;
            let b = self.positions[(i + 1) % n] - x;
            total += (a.x * b.y - a.y * b.x).atan2(a.dot(&b));
        }
        total / TAU
    }

    pub fn contains(&self, x: Vector2<f64>) -> bool {
        self.winding_number(x) > 0.5
    }

    fn check_distinct(&self) -> Result<()> {
        let n = self.len();
        let scale = self.perimeter();
        for i in 0..n {
            for j in (i + 1)..n {
                if (self.positions[i] - self.positions[j]).norm() <= 1e-14 * scale {
                    return Err(NpError::GridDegeneracy { i, j });
                }
            }
        }
        Ok(())
    }
}

/// Dense `K*` with kernel `⟨x − y, ν_x⟩ / (2π|x − y|²)`, weights folded in.
/// The diagonal carries the smooth limit `κ(x)/(4π)`.
pub fn assemble_kstar(grid: &BoundaryGrid) -> Result<DMatrix<f64>> {
    grid.check_distinct()?;
    let n = grid.len();
    let x = grid.positions();
    let nu = grid.normals();
    let w = grid.weights();
    let kappa = grid.curvatures();
    let mut data = vec![0.0; n * n];
    data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = if i == j {
                kappa[i] / (4.0 * PI) * w[i]
            } else {
                let d = x[i] - x[j];
                d.dot(&nu[i]) / (TAU * d.norm_squared()) * w[j]
            };
        }
    });
    Ok(DMatrix::from_row_slice(n, n, &data))
}

/// Trigonometric product weights `R_k` for `∫₀^{2π} ln(4 sin²((t_i − s)/2)) f(s) ds
/// ≈ Σ_j R_{|i−j|} f(t_j)` on `N = 2m` equispaced nodes.
fn log_weights(n: usize) -> Vec<f64> {
    let m = n / 2;
    let mf = m as f64;
    let cos_table: Vec<f64> = (0..n).map(|l| (PI * l as f64 / mf).cos()).collect();
    let mut r = vec![0.0; n];
    for k in 0..=m {
        let mut acc = 0.0;
        for p in 1..m {
            acc += cos_table[(p * k) % n] / p as f64;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        r[k] = -TAU / mf * acc - PI / (mf * mf) * sign;
    }
    for k in (m + 1)..n {
        r[k] = r[n - k];
    }
    r
}

/// Dense single layer matrix `(1/2π) ∫ ln|x_i − y| φ(y) dσ(y)` with weights folded in.
pub fn assemble_single_layer(grid: &BoundaryGrid) -> Result<DMatrix<f64>> {
    let n = grid.len();
    if n % 2 != 0 {
        return Err(NpError::InvalidResolution(format!("node count {n} must be even")));
    }
    grid.check_distinct()?;
    let x = grid.positions();
    let s = grid.speeds();
    let r = log_weights(n);
    let trap = TAU / n as f64;
    let sin_table: Vec<f64> = (0..n)
        .map(|k| {
            let k = k.min(n - k);
            (PI * k as f64 / n as f64).sin().powi(2)
        })
        .collect();
    let mut data = vec![0.0; n * n];
    data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, entry) in row.iter_mut().enumerate() {
            let k = (i + n - j) % n;
            let smooth = if i == j {
                s[i].ln()
            } else {
                0.5 * ((x[i] - x[j]).norm_squared() / (4.0 * sin_table[k])).ln()
            };
            *entry = (0.5 * r[k] + trap * smooth) * s[j] / TAU;
        }
    });
    Ok(DMatrix::from_row_slice(n, n, &data))
}

/// Grid plus assembled `K*` and `S`.
#[derive(Debug, Clone)]
pub struct NpSystem {
    grid: BoundaryGrid,
    kstar: DMatrix<f64>,
    slayer: DMatrix<f64>,
}

impl NpSystem {
    pub fn assemble(grid: BoundaryGrid) -> Result<Self> {
        let kstar = assemble_kstar(&grid)?;
        let slayer = assemble_single_layer(&grid)?;
        Ok(NpSystem {
            grid,
            kstar,
            slayer,
        })
    }

    /// Reassembles a system from previously dumped matrices.
    pub fn from_parts(grid: BoundaryGrid, kstar: DMatrix<f64>, slayer: DMatrix<f64>) -> Result<Self> {
        let n = grid.len();
        if kstar.shape() != (n, n) || slayer.shape() != (n, n) {
            return Err(NpError::InvalidResolution(format!(
                "matrix shapes {:?}/{:?} do not match grid size {n}",
                kstar.shape(),
                slayer.shape()
            )));
        }
        Ok(NpSystem {
            grid,
            kstar,
            slayer,
        })
    }

    pub fn grid(&self) -> &BoundaryGrid {
        &self.grid
    }

    pub fn kstar(&self) -> &DMatrix<f64> {
        &self.kstar
    }

    pub fn slayer(&self) -> &DMatrix<f64> {
        &self.slayer
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Discrete `K` acting on nodal traces: `W⁻¹ K*ᵀ W`.
    pub fn k_matrix(&self) -> DMatrix<f64> {
        let w = self.grid.weights();
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| self.kstar[(j, i)] * w[j] / w[i])
    }

    /// `‖S K* − K S‖ / ‖S‖` (Frobenius).
    pub fn calderon_residual(&self) -> f64 {
        let lhs = &self.slayer * &self.kstar;
        let rhs = self.k_matrix() * &self.slayer;
        (lhs - rhs).norm() / self.slayer.norm()
    }
}

/// Value returned by an off-grid evaluation, flagged when `x` sits inside the
/// band where the trapezoid rule loses accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffGrid<T> {
    pub value: T,
    pub near_boundary: bool,
}

/// `S[φ](x)` for `x` off the boundary by the trapezoid rule.
pub fn single_layer_offgrid(grid: &BoundaryGrid, density: &DVector<f64>, x: Vector2<f64>) -> OffGrid<f64> {
    let value = grid
        .positions()
        .iter()
        .zip(grid.weights())
        .zip(density.iter())
        .map(|((y, w), phi)| (x - y).norm().ln() * phi * w)
        .sum::<f64>()
        / TAU;
    OffGrid {
        value,
        near_boundary: grid.near_boundary(x),
    }
}

/// `∇ₓ S[φ](x)` for `x` off the boundary.
pub fn gradient_single_layer_offgrid(
    grid: &BoundaryGrid,
    density: &DVector<f64>,
    x: Vector2<f64>,
) -> OffGrid<Vector2<f64>> {
    let mut g = Vector2::zeros();
    for ((y, w), phi) in grid.positions().iter().zip(grid.weights()).zip(density.iter()) {
        let d = x - y;
        g += d * (phi * w / d.norm_squared());
    }
    OffGrid {
        value: g / TAU,
        near_boundary: grid.near_boundary(x),
    }
}
