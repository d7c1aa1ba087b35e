use std::f64::consts::{LN_2, PI, TAU};

use nalgebra::{Vector2, Vector3};
use np_core::assembly::{build_grid, NpSystem};
use np_core::ball::BallConvention;
use np_core::geometry::{ellipse_curve, EllipseShape, EllipticPoint};
use np_core::green::{
    expand_ball_closed, expand_ellipse_closed, expand_numeric, expansion_report, gamma_direct, ProbePoint,
};
use np_core::symmetrization::Spectrum;
use np_core::NpError;
use proptest::prelude::*;

fn spectrum_for(shape: EllipseShape, angle: f64, n: usize) -> Spectrum {
    let curve = ellipse_curve(shape).unwrap().transformed(angle, Vector2::zeros()).unwrap();
    Spectrum::compute(&NpSystem::assemble(build_grid(&curve, n).unwrap()).unwrap()).unwrap()
}

fn unit_vector(cos_theta: f64, phi: f64) -> Vector3<f64> {
    let s = (1.0 - cos_theta * cos_theta).sqrt();
    Vector3::new(s * phi.cos(), s * phi.sin(), cos_theta)
}

#[test]
fn numeric_constant_term_is_the_exterior_equilibrium_potential() {
    // outside, S[φ₀] = (1/2π)(ρ + ln(R/2))
    for (r, rho0) in [(1.0, LN_2), (2.0, 0.5)] {
        let spec = spectrum_for(EllipseShape::new(r, rho0).unwrap(), 0.0, 256);
        for (rho_z, omega_z) in [(2.0 * rho0, 0.7), (3.0 * rho0, 2.0)] {
            let z = EllipticPoint::new(rho_z, omega_z).to_cartesian(r);
            let e = expand_numeric(&spec, ProbePoint::Node(0), z, 10).unwrap();
            assert!((e.constant - (rho_z + (r / 2.0).ln()) / TAU).abs() < 1e-10);
        }
    }
}

#[test]
fn numeric_expansion_is_rotation_invariant() {
    let shape = EllipseShape::new(1.0, LN_2).unwrap();
    let angle: f64 = 0.9;
    let (c, s) = (angle.cos(), angle.sin());
    let rotate = |v: Vector2<f64>| Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y);
    let (plain, turned) = (spectrum_for(shape, 0.0, 256), spectrum_for(shape, angle, 256));
    let z = EllipticPoint::new(2.0 * LN_2, 0.7).to_cartesian(1.0);
    for x in [Vector2::new(0.1, 0.2), Vector2::new(-0.6, 0.3)] {
        let a = expand_numeric(&plain, ProbePoint::Point(x), z, 40).unwrap().value;
        let b = expand_numeric(&turned, ProbePoint::Point(rotate(x)), rotate(z), 40).unwrap().value;
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn mode_contributions_localize() {
    let spec = spectrum_for(EllipseShape::new(1.0, LN_2).unwrap(), 0.0, 256);
    let z = EllipticPoint::new(2.0 * LN_2, 0.7).to_cartesian(1.0);
    let report = expansion_report(&spec, &[ProbePoint::Node(0)], z, 40).unwrap();
    let pairs: Vec<f64> = report.mode_magnitudes.chunks(2).map(|p| p[0].hypot(p[1])).collect();
    assert!(pairs.windows(2).all(|w| w[1] < w[0]));
    // |S[ψ_n](z)| ∝ n^{−1/2} e^{−n(ρ_z − ρ₀)}
    let rate = pairs[10] / pairs[9] * (11.0f64 / 10.0).sqrt();
    assert!((rate - 0.5).abs() < 1e-3);
    assert!(!report.near_boundary);
}

#[test]
fn truncation_and_placement_errors() {
    let spec = spectrum_for(EllipseShape::new(1.0, LN_2).unwrap(), 0.0, 64);
    let z = Vector2::new(3.0, 0.0);
    assert!(matches!(
        expand_numeric(&spec, ProbePoint::Node(0), z, spec.len() + 1),
        Err(NpError::InsufficientTruncation { .. })
    ));
    assert!(matches!(
        expand_numeric(&spec, ProbePoint::Node(0), Vector2::new(0.1, 0.0), 4),
        Err(NpError::InvalidSource(_))
    ));
    assert!(expand_numeric(&spec, ProbePoint::Node(64), z, 4).is_err());
}

#[test]
fn inverse_sqrt_ball_coefficients_miss_the_direct_kernel() {
    let x = Vector3::new(0.0, 0.3, 0.6);
    let z = Vector3::new(0.0, 0.0, 2.0);
    let direct = gamma_direct(x.as_slice(), z.as_slice()).unwrap();
    let good = expand_ball_closed(x, z, 60, BallConvention::Validated).unwrap().value;
    let inverse = expand_ball_closed(x, z, 60, BallConvention::InverseSqrt).unwrap().value;
    assert!((good - direct).abs() < 1e-12);
    assert!((inverse - direct).abs() > 1e-3);
}

proptest! {
    #[test]
    fn closed_ellipse_expansion_matches_direct(
        rho in 0.0f64..LN_2, omega in 0.0f64..TAU, ratio in 2.0f64..4.0, omega_z in 0.0f64..TAU,
    ) {
        let (x, z) = (EllipticPoint::new(rho, omega), EllipticPoint::new(ratio * LN_2, omega_z));
        let v = expand_ellipse_closed(x, z, 1.0, LN_2, 80).unwrap();
        let d = gamma_direct(x.to_cartesian(1.0).as_slice(), z.to_cartesian(1.0).as_slice()).unwrap();
        prop_assert!((v.value - d).abs() < 1e-12);
    }

    #[test]
    fn closed_ball_expansion_matches_direct(
        r in 0.0f64..=1.0, ct in -1.0f64..1.0, phi in 0.0f64..TAU,
        rz in 2.0f64..3.0, ctz in -1.0f64..1.0, phiz in 0.0f64..TAU,
    ) {
        let (x, z) = (unit_vector(ct, phi) * r, unit_vector(ctz, phiz) * rz);
        let v = expand_ball_closed(x, z, 60, BallConvention::Validated).unwrap();
        let d = gamma_direct(x.as_slice(), z.as_slice()).unwrap();
        prop_assert!((v.value - d).abs() < 1e-12);
        prop_assert!(d < 0.0 && d > -1.0 / (4.0 * PI));
    }
}
