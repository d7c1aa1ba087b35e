use std::f64::consts::{LN_2, PI};

use nalgebra::DVector;
use np_core::assembly::{build_grid, BoundaryGrid, NpSystem};
use np_core::geometry::{circle, ellipse_curve, star_curve, Curve, EllipseShape};
use np_core::symmetrization::{
    build_stilde, compute_phi0, gradient_form, hstar_gram, orthonormality_defect, self_adjointness_residual,
    stilde_unitarity_defect, symmetrized_spectrum, Spectrum,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn ellipse() -> Curve {
    ellipse_curve(EllipseShape::new(1.0, LN_2).unwrap()).unwrap()
}

fn system(curve: &Curve, n: usize) -> NpSystem {
    NpSystem::assemble(build_grid(curve, n).unwrap()).unwrap()
}

fn perimeter_oracle(curve: &Curve, n: usize) -> f64 {
    let m = 8 * n;
    (0..m)
        .map(|i| curve.speed(2.0 * PI * i as f64 / m as f64))
        .sum::<f64>()
        * 2.0
        * PI
        / m as f64
}

#[test]
fn ellipse_perimeter_against_refined_quadrature() {
    let c = ellipse();
    let g = build_grid(&c, 128).unwrap();
    assert!((g.perimeter() - perimeter_oracle(&c, 128)).abs() < 1e-12);
}

#[test]
fn analytic_ellipse_eigenvalues_at_256() {
    let sys = system(&ellipse(), 256);
    let spec = Spectrum::compute_with_keep(&sys, 16).unwrap();
    for n in 1..=8 {
        let exact = 0.5 * 4f64.powi(-(n as i32));
        let (c, s) = (spec.eigenvalues()[2 * n - 2], spec.eigenvalues()[2 * n - 1]);
        assert!((c - exact).abs() < 1e-8, "n={n}: {c}");
        assert!((s + exact).abs() < 1e-8, "n={n}: {s}");
    }
}

#[test]
fn eigenvalue_error_drops_fast_under_refinement() {
    let exact = 0.125;
    let err = |n: usize| {
        let spec = Spectrum::compute_with_keep(&system(&ellipse(), n), 4).unwrap();
        (spec.eigenvalues()[0] - exact).abs()
    };
    let (e16, e32) = (err(16), err(32));
    assert!(e16 > 100.0 * e32.max(1e-16), "{e16} {e32}");
}

#[test]
fn residuals_on_analytic_curves() {
    for curve in [ellipse(), star_curve(1.0, 0.2, 5).unwrap()] {
        let sys = system(&curve, 256);
        assert!(sys.calderon_residual() < 1e-8, "{}", sys.calderon_residual());
        let phi0 = compute_phi0(&sys).unwrap();
        let stilde = build_stilde(&sys, &phi0.density);
        let metric = hstar_gram(&sys, &stilde).unwrap();
        assert!(self_adjointness_residual(&sys, &metric) < 1e-8);
        let spec = symmetrized_spectrum(&sys, &phi0, &metric, 64).unwrap();
        assert!(orthonormality_defect(&spec, &metric) < 1e-10);
        assert!(stilde_unitarity_defect(&sys, &stilde, &spec).unwrap() < 1e-8);
        assert!(spec.eigenvalues().iter().all(|l| l.abs() < 0.5));
        let sym = (metric.gram() - metric.gram().transpose()).amax();
        assert!(sym < 1e-13);
    }
}

#[test]
fn gram_smallest_eigenvalue_is_positive() {
    let sys = system(&ellipse(), 256);
    let phi0 = compute_phi0(&sys).unwrap();
    let metric = hstar_gram(&sys, &build_stilde(&sys, &phi0.density)).unwrap();
    let eig = nalgebra::SymmetricEigen::new(metric.gram().clone());
    assert!(eig.eigenvalues.min() > 0.0);
}

#[test]
fn phi0_on_the_ellipse() {
    let sys = system(&ellipse(), 256);
    let phi0 = compute_phi0(&sys).unwrap();
    assert!((phi0.eigenvalue - 0.5).abs() < 1e-10);
    let g = sys.grid();
    for (i, v) in phi0.density.iter().enumerate() {
        assert!((v - 1.0 / (2.0 * PI * g.speeds()[i])).abs() < 1e-8);
    }
    let spec = Spectrum::compute(&sys).unwrap();
    assert!(spec.s_phi0_interior().abs() < 1e-8);
}

#[test]
fn phi0_interior_constant_tracks_focal_scale() {
    // (1/2π)(ρ₀ + ln R − ln 2)
    for (r, rho0) in [(2.0, 0.5), (0.7, 1.1)] {
        let sys = system(&ellipse_curve(EllipseShape::new(r, rho0).unwrap()).unwrap(), 256);
        let spec = Spectrum::compute(&sys).unwrap();
        let exact = (rho0 + f64::ln(r) - LN_2) / (2.0 * PI);
        assert!((spec.s_phi0_interior() - exact).abs() < 1e-8, "{r} {rho0}");
    }
}

#[test]
fn hstar_coefficients_are_mean_zero_projections() {
    let sys = system(&ellipse(), 128);
    let spec = Spectrum::compute(&sys).unwrap();
    let g = sys.grid();
    let f = DVector::from_fn(128, |i, _| g.params()[i].cos() / g.speeds()[i]);
    let c = spec.hstar_coefficients(&f);
    // ‖φ₁ᶜ‖²_{H*} = π cosh ρ₀ / e^{ρ₀}
    let norm_sq = PI * LN_2.cosh() / 2.0;
    assert!((c[0] * c[0] - norm_sq).abs() < 1e-10);
    assert!(c.iter().skip(1).all(|v| v.abs() < 1e-10));
}

/// Interior field of `S[cos t]` on the unit circle is `−(r/2) cos θ`; integrate
/// `|∇|²` over the disk with a Gauss–Legendre × trapezoid tensor rule.
fn circle_cosine_energy_oracle() -> f64 {
    let nodes = np_core_test_gauss(12);
    let m = 64;
    let mut total = 0.0;
    for (x, w) in nodes {
        let r = 0.5 * (x + 1.0);
        for k in 0..m {
            let th = 2.0 * PI * k as f64 / m as f64;
            let dr = -0.5 * th.cos();
            let dth = 0.5 * th.sin();
            total += (dr * dr + dth * dth) * r * 0.5 * w * 2.0 * PI / m as f64;
        }
    }
    total
}

fn np_core_test_gauss(n: usize) -> Vec<(f64, f64)> {
    np_core::quadrature::gauss_legendre(n)
}

#[test]
fn circle_gradient_form_matches_volume_quadrature() {
    let sys = system(&circle(1.0).unwrap(), 64);
    let spec = Spectrum::compute_with_keep(&sys, 63).unwrap();
    let g: &BoundaryGrid = sys.grid();
    let f = DVector::from_fn(64, |i, _| g.params()[i].cos());
    let c: Vec<Complex64> = spec.hstar_coefficients(&f).iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let value = gradient_form(spec.eigenvalues(), &c);
    assert!((value - circle_cosine_energy_oracle()).abs() < 1e-6);
}

#[test]
fn spectrum_export_is_reproducible() {
    let sys = system(&ellipse(), 64);
    let a = serde_json::to_string(&Spectrum::compute(&sys).unwrap().export("ellipse")).unwrap();
    let b = serde_json::to_string(&Spectrum::compute(&system(&ellipse(), 64)).unwrap().export("ellipse")).unwrap();
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["N"], 64);
    assert_eq!(v["eigenvalues"].as_array().unwrap().len(), 16);
    assert!((v["eigenvalues"][0].as_f64().unwrap() - 0.125).abs() < 1e-6);
}

#[test]
fn assembly_is_schedule_independent() {
    let c = ellipse();
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = serial.install(|| system(&c, 128));
    let b = wide.install(|| system(&c, 128));
    assert!(a.kstar().iter().zip(b.kstar().iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert!(a.slayer().iter().zip(b.slayer().iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn under_resolved_star_fails_the_symmetry_check() {
    let sys = system(&star_curve(0.5, 0.22, 5).unwrap(), 128);
    assert!(matches!(Spectrum::compute(&sys), Err(np_core::NpError::SymmetrizationFailure { .. })));
    assert!(Spectrum::compute(&system(&star_curve(0.5, 0.22, 5).unwrap(), 384)).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn star_spectra_stay_inside_the_half_interval(amp in 0.0f64..0.15, lobes in 2u32..6, radius in 0.5f64..2.0) {
        let sys = system(&star_curve(radius, amp, lobes).unwrap(), 256);
        let spec = Spectrum::compute(&sys).unwrap();
        prop_assert!(spec.eigenvalues().iter().all(|l| l.abs() < 0.5));
        prop_assert!((spec.phi0_eigenvalue() - 0.5).abs() < 1e-8);
        let mass: f64 = spec.phi0().iter().zip(sys.grid().weights()).map(|(p, w)| p * w).sum();
        prop_assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectrum_is_invariant_under_dilation(scale in 0.3f64..3.0) {
        let base = Spectrum::compute_with_keep(&system(&ellipse(), 64), 8).unwrap();
        let big = Spectrum::compute_with_keep(
            &system(&ellipse_curve(EllipseShape::new(scale, LN_2).unwrap()).unwrap(), 64),
            8,
        )
        .unwrap();
        for (a, b) in base.eigenvalues().iter().zip(big.eigenvalues()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
