use std::f64::consts::{LN_2, PI, TAU};
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{Vector2, Vector3};
use np_core::assembly::{build_grid, NpSystem};
use np_core::ball::{ball_bound_series, ball_resonance_series, unsold_check, BallConvention};
use np_core::ellipse::{
    default_n_max, exterior_bound, exterior_envelope_constant, pair_alpha_sq, predicted_rate, EllipseModalModel,
};
use np_core::geometry::{circle, ellipse_curve, EllipseShape, EllipticPoint};
use np_core::green::{expand_ball_closed, expand_ellipse_closed, expansion_report, gamma_direct, ProbePoint};
use np_core::resonance::{
    delta_sweep, fit_blowup_rate, log_delta_grid, DipoleSource2, FitWindow, LambdaMode, NumericModel, ResonanceModel,
    SweepResult,
};
use np_core::symmetrization::{
    build_stilde, compute_phi0, hstar_gram, orthonormality_defect, self_adjointness_residual, Spectrum,
};
use np_core_acceptance::{Check, Outcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RHO0: f64 = LN_2;
const OMEGA_Z: f64 = 0.7;

fn shape() -> EllipseShape {
    EllipseShape::new(1.0, RHO0).unwrap()
}

fn moment() -> Vector2<f64> {
    Vector2::new(0.6, -0.8)
}

fn ellipse_system(n: usize) -> NpSystem {
    NpSystem::assemble(build_grid(&ellipse_curve(shape()).unwrap(), n).unwrap()).unwrap()
}

fn source_at(ratio: f64) -> EllipticPoint {
    EllipticPoint::new(ratio * RHO0, OMEGA_Z)
}

fn analytic_model(ratio: f64, delta_min: f64) -> EllipseModalModel {
    EllipseModalModel::new(shape(), source_at(ratio), moment(), default_n_max(delta_min, RHO0)).unwrap()
}

fn standard_sweep(ratio: f64) -> (SweepResult, f64) {
    let deltas = log_delta_grid(1e-3, 1e-9, 13).unwrap();
    let t = Instant::now();
    let model = analytic_model(ratio, 1e-9);
    let sweep = delta_sweep(&model, LambdaMode::Simplified, &deltas, &[]).unwrap();
    (sweep, t.elapsed().as_secs_f64())
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    (max - min) / min
}

fn c01() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let (spec, secs) = pool.install(|| {
        let t = Instant::now();
        let spec = Spectrum::compute(&ellipse_system(256)).unwrap();
        (spec, t.elapsed().as_secs_f64())
    });
    // cosine family at +λ_n, sine family at −λ_n
    let err = (0..8)
        .map(|k| {
            let n = k / 2 + 1;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            (spec.eigenvalues()[k] - sign * 0.5 * 4f64.powi(-(n as i32))).abs()
        })
        .fold(0.0, f64::max);
    Outcome::new(
        1,
        "eigenvalue exactness",
        vec![
            Check::below("max |λ_k ∓ 1/(2·4ⁿ)| over k < 8", err, 1e-8),
            Check::below("single-thread runtime [s]", secs, 10.0),
        ],
    )
}

fn c02() -> Outcome {
    let sys = NpSystem::assemble(build_grid(&circle(1.0).unwrap(), 128).unwrap()).unwrap();
    let spec = Spectrum::compute(&sys).unwrap();
    let worst = spec.eigenvalues().iter().map(|l| l.abs()).fold(0.0, f64::max);
    Outcome::new(2, "disk degeneracy", vec![Check::below("max |λ|", worst, 1e-10)])
}

fn c03() -> Outcome {
    let sys = ellipse_system(256);
    let phi0 = compute_phi0(&sys).unwrap();
    let metric = hstar_gram(&sys, &build_stilde(&sys, &phi0.density)).unwrap();
    let spec = Spectrum::compute(&sys).unwrap();
    Outcome::new(
        3,
        "Calderón and self-adjointness residuals",
        vec![
            Check::below("‖AᵀG − GA‖/‖GA‖", self_adjointness_residual(&sys, &metric), 1e-8),
            Check::below("G-orthonormality defect", orthonormality_defect(&spec, &metric), 1e-10),
        ],
    )
}

fn c04() -> Outcome {
    let sys = ellipse_system(256);
    let phi0 = compute_phi0(&sys).unwrap();
    let g = sys.grid();
    let s = shape();
    let nodal = phi0
        .density
        .iter()
        .zip(g.params())
        .map(|(v, &t)| (v - 1.0 / (TAU * s.xi(s.rho0, t))).abs())
        .fold(0.0, f64::max);
    let spec = Spectrum::compute(&sys).unwrap();
    let constant = (s.rho0 + s.r.ln() - LN_2) / TAU;
    Outcome::new(
        4,
        "φ₀ recovery",
        vec![
            Check::below("max nodal |φ₀ − 1/(2πΞ)|", nodal, 1e-8),
            Check::below("|eigenvalue − ½|", (phi0.eigenvalue - 0.5).abs(), 1e-10),
            Check::below("|S[φ₀] − (ρ₀ + ln R − ln 2)/2π|", (spec.s_phi0_interior() - constant).abs(), 1e-8),
        ],
    )
}

fn c05() -> Outcome {
    let sys = ellipse_system(256);
    let spec = Spectrum::compute(&sys).unwrap();
    let z = source_at(2.0);
    let mut probes: Vec<ProbePoint> = (0..10).map(|k| ProbePoint::Node(k * 25)).collect();
    probes.extend((0..10).map(|k| ProbePoint::Point(EllipticPoint::new(RHO0 / 2.0, 0.6 * k as f64).to_cartesian(1.0))));
    let numeric = expansion_report(&spec, &probes, z.to_cartesian(1.0), 40).unwrap();

    let mut ellipse_err: f64 = 0.0;
    for (rho, omega) in [(0.0, 0.3), (0.2, 1.0), (RHO0 / 2.0, 2.5), (RHO0, 0.0), (RHO0, 4.0)] {
        for omega_z in [0.0, OMEGA_Z, 3.0] {
            let (x, zp) = (EllipticPoint::new(rho, omega), EllipticPoint::new(2.0 * RHO0, omega_z));
            let v = expand_ellipse_closed(x, zp, 1.0, RHO0, 80).unwrap().value;
            let d = gamma_direct(x.to_cartesian(1.0).as_slice(), zp.to_cartesian(1.0).as_slice()).unwrap();
            ellipse_err = ellipse_err.max((v - d).abs());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ball_err: f64 = 0.0;
    for _ in 0..20 {
        let (x, z) = (random_direction(&mut rng), random_direction(&mut rng) * 2.0);
        for r in [0.5, 1.0] {
            let v = expand_ball_closed(x * r, z, 60, BallConvention::Validated).unwrap().value;
            let d = gamma_direct((x * r).as_slice(), z.as_slice()).unwrap();
            ball_err = ball_err.max((v - d).abs());
        }
    }
    Outcome::new(
        5,
        "Green expansion",
        vec![
            Check::below("numeric, 20 probes, N_max = 40: max |err|", numeric.max_abs_error, 1e-8),
            Check::below("closed ellipse, N_max = 80: max |err|", ellipse_err, 1e-12),
            Check::below("closed ball, N_max = 60: max |err|", ball_err, 1e-12),
        ],
    )
}

fn random_direction(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..TAU);
    let s = (1.0 - z * z).sqrt();
    Vector3::new(s * phi.cos(), s * phi.sin(), z)
}

fn c06() -> Outcome {
    let mut checks = Vec::new();
    let mut slowest: f64 = 0.0;
    for (ratio, center_p, width_p) in [(1.5, -1.5, 0.15), (2.0, -1.0, 0.15), (3.0, 0.0, 0.1)] {
        let (sweep, secs) = standard_sweep(ratio);
        slowest = slowest.max(secs);
        let fit = fit_blowup_rate(&sweep, true, FitWindow::default()).unwrap();
        let (_, p_pred, _) = predicted_rate(RHO0, ratio * RHO0).unwrap();
        assert_eq!(p_pred, center_p);
        checks.push(Check::within(format!("p at {ratio}ρ₀"), fit.exponent, center_p, width_p));
        if ratio == 2.0 {
            checks.push(Check::within("q at 2ρ₀", fit.log_coefficient, 1.0, 0.3));
        }
        if ratio == 3.0 {
            checks.push(Check::within("q at 3ρ₀", fit.log_coefficient, 2.0, 0.3));
        }
    }
    let (sweep, secs) = standard_sweep(4.0);
    slowest = slowest.max(secs);
    checks.push(Check::below("(max − min)/min at 4ρ₀", spread(&sweep.grad_norms()), 0.05));
    checks.push(Check::below("slowest sweep [s]", slowest, 5.0));
    Outcome::new(6, "blow-up scaling fits", checks)
}

fn c07() -> Outcome {
    let model = analytic_model(2.0, 1e-8);
    let deltas = log_delta_grid(1e-6, 1e-8, 9).unwrap();
    let sweep = delta_sweep(&model, LambdaMode::Tuned { lambda0: 0.125 }, &deltas, &[]).unwrap();
    let scaled: Vec<f64> = sweep.rows.iter().map(|r| r.delta * r.delta * r.grad_norm_sq).collect();
    Outcome::new(7, "eigenvalue resonance", vec![Check::below("(max − min)/min of δ²‖∇(u−F)‖²", spread(&scaled), 0.01)])
}

fn c08() -> Outcome {
    let model = analytic_model(2.0, 1e-9);
    let sweep = delta_sweep(&model, LambdaMode::Simplified, &[1e-3, 1e-9], &[]).unwrap();
    let scaled: Vec<f64> = sweep.rows.iter().map(|r| r.delta * r.delta * r.grad_norm_sq).collect();
    Outcome::new(8, "vanishing δ² blow-up", vec![Check::below("ratio δ=1e−9 over δ=1e−3", scaled[1] / scaled[0], 0.01)])
}

fn c09() -> Outcome {
    let monotone = |ratio: f64, increasing: bool| {
        let (sweep, _) = standard_sweep(ratio);
        let e: Vec<f64> = sweep.rows.iter().filter(|r| r.delta <= 1e-5 * (1.0 + 1e-12)).map(|r| r.energy).collect();
        e.len() == 9 && e.windows(2).all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
    };
    Outcome::new(
        9,
        "critical energy radius",
        vec![
            Check::holds("E_δ increasing as δ ↓ at 1.5ρ₀", monotone(1.5, true)),
            Check::holds("E_δ decreasing as δ ↓ at 2.5ρ₀", monotone(2.5, false)),
        ],
    )
}

fn c10() -> Outcome {
    let z = source_at(2.0);
    let x = EllipticPoint::new(2.5 * RHO0, OMEGA_Z);
    let model = analytic_model(2.0, 1e-12);
    let deltas = log_delta_grid(1e-2, 1e-12, 21).unwrap();
    let sweep = delta_sweep(&model, LambdaMode::Simplified, &deltas, &[x]).unwrap();
    let small: Vec<f64> = sweep.rows.iter().filter(|r| r.delta <= 1e-4 * (1.0 + 1e-12)).map(|r| r.exterior[0]).collect();
    let ratio = small.iter().copied().fold(0.0, f64::max) / small.iter().copied().fold(f64::INFINITY, f64::min);
    let envelope = exterior_envelope_constant(shape(), z, moment()) * exterior_bound(x.rho, z.rho, RHO0).unwrap();
    let peak = sweep.rows.iter().map(|r| r.exterior[0]).fold(0.0, f64::max);
    Outcome::new(
        10,
        "exterior boundedness",
        vec![
            Check::at_most("sup/inf of |u − F| for δ <= 1e−4", ratio, 1.05),
            Check::at_most("max |u − F| / (K Σ e^{−ns})", peak / envelope, 1.0),
        ],
    )
}

fn c11() -> Outcome {
    let fine = ball_resonance_series(2.0, 1.0, 1e-12, 200).unwrap().value;
    let coarse = ball_resonance_series(2.0, 1.0, 1e-6, 200).unwrap().value;
    let mut cauchy: f64 = 0.0;
    for delta in [1e-6, 1e-12] {
        let s40 = ball_bound_series(2.0, delta, 40).unwrap().value;
        for m in 41..=80 {
            cauchy = cauchy.max((ball_bound_series(2.0, delta, m).unwrap().value - s40).abs());
        }
    }
    Outcome::new(
        11,
        "ball non-resonance",
        vec![
            Check::below("|value(1e−12)/value(1e−6) − 1|", (fine / coarse - 1.0).abs(), 0.01),
            Check::below("max_{m ≤ 80} |S_m − S_40| of bound series", cauchy, 1e-12),
        ],
    )
}

fn c12() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let dirs: Vec<Vector3<f64>> = (0..100).map(|_| random_direction(&mut rng)).collect();
    let worst = (0..=10)
        .flat_map(|n| dirs.iter().map(move |&d| (unsold_check(n, d) - (2 * n + 1) as f64 / (4.0 * PI)).abs()))
        .fold(0.0, f64::max);
    Outcome::new(12, "Unsöld identity", vec![Check::below("max |Σ_m |Y|² − (2n+1)/4π|", worst, 1e-12)])
}

fn c13() -> Outcome {
    let sys = ellipse_system(256);
    let spec = Spectrum::compute(&sys).unwrap();
    let z = source_at(2.0);
    let model = NumericModel::new(&sys, &spec, DipoleSource2::new(z.to_cartesian(1.0), moment()).unwrap()).unwrap();
    let a = model.alpha();
    let worst = (1..=6)
        .map(|n| {
            let numeric = a[2 * n - 2].powi(2) + a[2 * n - 1].powi(2);
            let exact = pair_alpha_sq(n, z, moment(), shape()).unwrap();
            (numeric - exact).abs() / exact
        })
        .fold(0.0, f64::max);
    Outcome::new(13, "cross-pipeline consistency", vec![Check::below("max relative pair-sum error, n <= 6", worst, 1e-7)])
}

fn main() -> ExitCode {
    let criteria: [fn() -> Outcome; 13] = [c01, c02, c03, c04, c05, c06, c07, c08, c09, c10, c11, c12, c13];
    let mut failed = 0;
    for c in criteria {
        let outcome = c();
        println!("{outcome}");
        if !outcome.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
