//! The four subcommands. Each writes its artifacts under the configured
//! prefix and reports checks that miss their thresholds as a validation error.

use std::f64::consts::{PI, TAU};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};

use nalgebra::{Vector2, Vector3};
use np_core::assembly::{build_grid, NpSystem};
use np_core::ball::{ball_eigenvalue, harmonics_of_degree, unsold_check, BallAxisymmetricModel, BallConvention};
use np_core::ellipse::{
    default_n_max, grad_exterior_mode, pair_alpha_sq, predicted_rate, EllipseModalModel, EllipseMode, Parity, RateCase,
};
use np_core::geometry::{to_elliptic, EllipseShape, EllipticPoint};
use np_core::green::{expand_ball_closed, expand_ellipse_closed, expansion_report, gamma_direct, ExpansionReport, ProbePoint};
use np_core::matrix_io::{read_matrix, write_matrix, MatrixId};
use np_core::numfmt::{fmt17, serialize_f64_17, serialize_scalar_17};
use np_core::quadrature::gauss_legendre;
use np_core::resonance::{
    delta_sweep, fit_blowup_rate, DipoleSource2, FitWindow, LambdaMode, NumericModel, ResonanceModel, ScalingFit,
    SweepResult,
};
use np_core::symmetrization::{
    build_stilde, default_keep, hstar_gram, orthonormality_defect, self_adjointness_residual, stilde_unitarity_defect,
    Spectrum, SpectrumExport,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Pipeline, RunConfig, ShapeSpec, SourceSpec};
use crate::error::CliError;

const GREEN_NUMERIC_TOL: f64 = 1e-8;
const GREEN_CLOSED_TOL: f64 = 1e-12;
const CLUSTER_TOL: f64 = 1e-10;

fn write_file(path: &str, contents: &str) -> Result<(), CliError> {
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| CliError::io(path, e))?;
    eprintln!("wrote {path}");
    Ok(())
}

fn write_json<T: Serialize>(path: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(format!("serialize: {e}")))?;
    text.push('\n');
    write_file(path, &text)
}

fn focal_scale(cfg: &RunConfig) -> f64 {
    cfg.shape.ellipse().map_or(1.0, |s| s.r)
}

/// Elliptic coordinates use the ellipse's focal scale, or `R = 1` for other planar shapes.
fn planar_source(cfg: &RunConfig) -> Result<DipoleSource2, CliError> {
    match cfg.source {
        SourceSpec::Elliptic { rho_z, omega_z, a } => Ok(DipoleSource2::new(
            EllipticPoint::new(rho_z, omega_z).to_cartesian(focal_scale(cfg)),
            Vector2::from(a),
        )?),
        SourceSpec::Cartesian { z, a } => Ok(DipoleSource2::new(Vector2::from(z), Vector2::from(a))?),
        SourceSpec::Axial { .. } => Err(CliError::Config("an axial source needs the ball".into())),
    }
}

fn elliptic_source(cfg: &RunConfig, shape: EllipseShape) -> Result<(EllipticPoint, Vector2<f64>), CliError> {
    match cfg.source {
        SourceSpec::Elliptic { rho_z, omega_z, a } => Ok((EllipticPoint::new(rho_z, omega_z), Vector2::from(a))),
        SourceSpec::Cartesian { z, a } => Ok((to_elliptic(Vector2::from(z), shape.r)?, Vector2::from(a))),
        SourceSpec::Axial { .. } => Err(CliError::Config("an axial source needs the ball".into())),
    }
}

fn axial_source(cfg: &RunConfig) -> Result<(f64, f64), CliError> {
    match cfg.source {
        SourceSpec::Axial { r0, a_z } => Ok((r0, a_z)),
        _ => Err(CliError::Config("the ball needs an axial source".into())),
    }
}

fn cache_paths(cfg: &RunConfig, describe: &str) -> (String, String) {
    let digest = Sha256::digest(format!("{describe}|N={}", cfg.nodes).as_bytes());
    let key: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    (
        format!("{}.cache-{key}.kstar.npsy", cfg.out),
        format!("{}.cache-{key}.slayer.npsy", cfg.out),
    )
}

fn load_matrix(path: &str, id: MatrixId, n: usize) -> Result<nalgebra::DMatrix<f64>, CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let (found, m) = read_matrix(&mut BufReader::new(f)).map_err(|e| CliError::io(path, e))?;
    if found != id || m.nrows() != n {
        return Err(CliError::io(
            path,
            std::io::Error::new(std::io::ErrorKind::InvalidData, "cached matrix does not match the grid"),
        ));
    }
    Ok(m)
}

fn store_matrix(path: &str, id: MatrixId, m: &nalgebra::DMatrix<f64>) -> Result<(), CliError> {
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_matrix(&mut w, id, m).map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

fn planar_system(cfg: &RunConfig) -> Result<NpSystem, CliError> {
    let curve = cfg.shape.curve()?;
    let grid = build_grid(&curve, cfg.nodes)?;
    if !cfg.cache {
        return Ok(NpSystem::assemble(grid)?);
    }
    let (kpath, spath) = cache_paths(cfg, &curve.describe());
    if std::path::Path::new(&kpath).exists() && std::path::Path::new(&spath).exists() {
        let k = load_matrix(&kpath, MatrixId::Kstar, cfg.nodes)?;
        let s = load_matrix(&spath, MatrixId::Slayer, cfg.nodes)?;
        eprintln!("loaded cached matrices {kpath}, {spath}");
        return Ok(NpSystem::from_parts(grid, k, s)?);
    }
    let sys = NpSystem::assemble(grid)?;
    store_matrix(&kpath, MatrixId::Kstar, sys.kstar())?;
    store_matrix(&spath, MatrixId::Slayer, sys.slayer())?;
    Ok(sys)
}

fn planar_spectrum(cfg: &RunConfig, sys: &NpSystem) -> Result<Spectrum, CliError> {
    Ok(Spectrum::compute_with_keep(sys, cfg.keep.unwrap_or(default_keep(cfg.nodes)))?)
}

/// Full spectrum and a cut that never splits a cluster of tied |λ|.
fn green_spectrum(cfg: &RunConfig, sys: &NpSystem) -> Result<(Spectrum, usize), CliError> {
    let spec = Spectrum::compute_with_keep(sys, sys.len() - 1)?;
    let ev = spec.eigenvalues();
    let mut m = cfg.n_max.min(ev.len());
    while m > 0 && m < ev.len() && (ev[m].abs() - ev[m - 1].abs()).abs() < CLUSTER_TOL {
        m += 1;
    }
    Ok((spec, m))
}

fn eigenvalue_csv(values: &[f64]) -> String {
    let mut out = String::from("j,lambda\n");
    for (j, l) in values.iter().enumerate() {
        out.push_str(&format!("{},{}\n", j + 1, fmt17(*l)));
    }
    out
}

#[derive(Serialize)]
struct PlanarSpectrumOutput<'a> {
    command: &'static str,
    config: &'a RunConfig,
    spectrum: SpectrumExport,
    #[serde(serialize_with = "serialize_scalar_17")]
    phi0_eigenvalue: f64,
    #[serde(serialize_with = "serialize_scalar_17")]
    s_phi0_interior: f64,
}

#[derive(Serialize)]
struct BallSpectrumOutput<'a> {
    command: &'static str,
    config: &'a RunConfig,
    shape: &'static str,
    degrees: Vec<usize>,
    multiplicities: Vec<usize>,
    #[serde(serialize_with = "serialize_f64_17")]
    eigenvalues: Vec<f64>,
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<(), CliError> {
    let json_path = format!("{}.spectrum.json", cfg.out);
    let values = if cfg.shape == ShapeSpec::Ball {
        let degrees: Vec<usize> = (1..=cfg.keep.unwrap_or(16)).collect();
        let eigenvalues: Vec<f64> = degrees.iter().map(|&n| ball_eigenvalue(n)).collect();
        write_json(
            &json_path,
            &BallSpectrumOutput {
                command: "spectrum",
                config: cfg,
                shape: "ball",
                multiplicities: degrees.iter().map(|n| 2 * n + 1).collect(),
                degrees,
                eigenvalues: eigenvalues.clone(),
            },
        )?;
        eigenvalues
    } else {
        let sys = planar_system(cfg)?;
        let spec = planar_spectrum(cfg, &sys)?;
        write_json(
            &json_path,
            &PlanarSpectrumOutput {
                command: "spectrum",
                config: cfg,
                spectrum: spec.export(&sys.grid().curve().describe()),
                phi0_eigenvalue: spec.phi0_eigenvalue(),
                s_phi0_interior: spec.s_phi0_interior(),
            },
        )?;
        spec.eigenvalues().to_vec()
    };
    write_file(&format!("{}.spectrum.csv", cfg.out), &eigenvalue_csv(&values))
}

#[derive(Serialize)]
struct Prediction {
    case: RateCase,
    #[serde(serialize_with = "serialize_scalar_17")]
    p: f64,
    #[serde(serialize_with = "serialize_scalar_17")]
    q: f64,
    #[serde(serialize_with = "serialize_scalar_17")]
    rho_ratio: f64,
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    command: &'static str,
    config: &'a RunConfig,
    model: &'static str,
    lambda_mode: String,
    modes: usize,
    rows: usize,
    fit_with_log: Option<ScalingFit>,
    fit_without_log: Option<ScalingFit>,
    fit_error: Option<String>,
    predicted: Option<Prediction>,
}

fn samples_of(cfg: &RunConfig, dim: usize) -> Result<Vec<Vec<f64>>, CliError> {
    if let Some(bad) = cfg.exterior_samples.iter().find(|p| p.len() != dim) {
        return Err(CliError::Config(format!("exterior sample {bad:?} must have {dim} coordinates")));
    }
    Ok(cfg.exterior_samples.clone())
}

fn sweep_with<M: ResonanceModel>(
    cfg: &RunConfig,
    model: &M,
    samples: &[M::Point],
) -> Result<SweepResult, CliError> {
    Ok(delta_sweep(model, cfg.material, &cfg.delta_grid.values()?, samples)?)
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let (sweep, model_name, modes, ratio) = match (&cfg.shape, cfg.pipeline) {
        (ShapeSpec::Ball, _) => {
            let (r0, a_z) = axial_source(cfg)?;
            let model = BallAxisymmetricModel::new(r0, a_z, cfg.series_terms.unwrap_or(200))?;
            let samples: Vec<Vector3<f64>> = samples_of(cfg, 3)?.iter().map(|p| Vector3::new(p[0], p[1], p[2])).collect();
            (sweep_with(cfg, &model, &samples)?, "ball-axisymmetric", model.eigenvalues().len(), None)
        }
        (ShapeSpec::Ellipse { .. }, Pipeline::Analytic) => {
            let shape = cfg.shape.ellipse().expect("validated ellipse");
            let (z, a) = elliptic_source(cfg, shape)?;
            let n_max = cfg.series_terms.unwrap_or(default_n_max(cfg.delta_grid.stop, shape.rho0));
            let model = EllipseModalModel::new(shape, z, a, n_max)?;
            let samples = samples_of(cfg, 2)?
                .iter()
                .map(|p| to_elliptic(Vector2::new(p[0], p[1]), shape.r))
                .collect::<Result<Vec<_>, _>>()?;
            (sweep_with(cfg, &model, &samples)?, "ellipse-analytic", model.eigenvalues().len(), Some(z.rho / shape.rho0))
        }
        _ => {
            let sys = planar_system(cfg)?;
            let spec = planar_spectrum(cfg, &sys)?;
            let model = NumericModel::new(&sys, &spec, planar_source(cfg)?)?;
            let samples: Vec<Vector2<f64>> = samples_of(cfg, 2)?.iter().map(|p| Vector2::new(p[0], p[1])).collect();
            let ratio = match cfg.shape.ellipse() {
                Some(shape) => Some(to_elliptic(model.source().z, shape.r)?.rho / shape.rho0),
                None => None,
            };
            (sweep_with(cfg, &model, &samples)?, "nystrom", spec.len(), ratio)
        }
    };
    let (fit_with_log, fit_without_log, fit_error) = match (
        fit_blowup_rate(&sweep, true, FitWindow::default()),
        fit_blowup_rate(&sweep, false, FitWindow::default()),
    ) {
        (Ok(a), Ok(b)) => (Some(a), Some(b), None),
        (Err(e), _) | (_, Err(e)) => (None, None, Some(e.to_string())),
    };
    let predicted = match (ratio, cfg.material) {
        (Some(ratio), LambdaMode::Simplified) => {
            let rho0 = cfg.shape.ellipse().expect("ratio implies ellipse").rho0;
            let (case, p, q) = predicted_rate(rho0, ratio * rho0)?;
            Some(Prediction {
                case,
                p,
                q,
                rho_ratio: ratio,
            })
        }
        _ => None,
    };
    write_file(&format!("{}.sweep.csv", cfg.out), &sweep.to_csv())?;
    write_json(
        &format!("{}.fit.json", cfg.out),
        &SweepOutput {
            command: "sweep",
            config: cfg,
            model: model_name,
            lambda_mode: cfg.material.label(),
            modes,
            rows: sweep.rows.len(),
            fit_with_log,
            fit_without_log,
            fit_error,
            predicted,
        },
    )
}

#[derive(Serialize)]
struct ClosedReport {
    kind: &'static str,
    terms: usize,
    probes: usize,
    #[serde(serialize_with = "serialize_scalar_17")]
    max_abs_error: f64,
}

#[derive(Serialize)]
struct GreenOutput<'a> {
    command: &'static str,
    config: &'a RunConfig,
    numeric: Option<ExpansionReport>,
    closed: Option<ClosedReport>,
    #[serde(serialize_with = "serialize_scalar_17")]
    numeric_threshold: f64,
    #[serde(serialize_with = "serialize_scalar_17")]
    closed_threshold: f64,
    pass: bool,
}

/// Ten boundary nodes and ten interior points, halfway to the boundary
/// (in `ρ` for the ellipse, radially otherwise).
fn planar_probes(cfg: &RunConfig, sys: &NpSystem) -> Vec<ProbePoint> {
    let g = sys.grid();
    let mut probes: Vec<ProbePoint> = (0..10).map(|k| ProbePoint::Node(k * g.len() / 10)).collect();
    match cfg.shape.ellipse() {
        Some(s) => probes.extend(
            (0..10).map(|k| ProbePoint::Point(EllipticPoint::new(s.rho0 / 2.0, TAU * k as f64 / 10.0).to_cartesian(s.r))),
        ),
        None => probes.extend((0..10).map(|k| ProbePoint::Point(g.positions()[k * g.len() / 10 + g.len() / 20] * 0.5))),
    }
    probes
}

fn closed_ellipse_error(shape: EllipseShape, z: EllipticPoint, terms: usize) -> Result<f64, CliError> {
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let rho = if k % 2 == 0 { shape.rho0 } else { shape.rho0 / 2.0 };
        let x = EllipticPoint::new(rho, TAU * k as f64 / 20.0);
        let v = expand_ellipse_closed(x, z, shape.r, shape.rho0, terms)?.value;
        let d = gamma_direct(x.to_cartesian(shape.r).as_slice(), z.to_cartesian(shape.r).as_slice())?;
        worst = worst.max((v - d).abs());
    }
    Ok(worst)
}

/// Points on a Fibonacci lattice of the unit sphere.
fn sphere_points(count: usize) -> Vec<Vector3<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / count as f64;
            let s = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vector3::new(s * phi.cos(), s * phi.sin(), z)
        })
        .collect()
}

fn closed_ball_error(r0: f64, terms: usize) -> Result<f64, CliError> {
    let z = Vector3::new(0.0, 0.0, r0);
    let mut worst: f64 = 0.0;
    for (i, d) in sphere_points(10).into_iter().enumerate() {
        let x = d * if i % 2 == 0 { 1.0 } else { 0.5 };
        let v = expand_ball_closed(x, z, terms, BallConvention::Validated)?.value;
        worst = worst.max((v - gamma_direct(x.as_slice(), z.as_slice())?).abs());
    }
    Ok(worst)
}

pub fn cmd_green_check(cfg: &RunConfig) -> Result<(), CliError> {
    let (numeric, closed) = if cfg.shape == ShapeSpec::Ball {
        let (r0, _) = axial_source(cfg)?;
        let terms = cfg.series_terms.unwrap_or(60);
        let err = closed_ball_error(r0, terms)?;
        (None, Some(ClosedReport { kind: "ball", terms, probes: 10, max_abs_error: err }))
    } else {
        let sys = planar_system(cfg)?;
        let (spec, modes) = green_spectrum(cfg, &sys)?;
        let source = planar_source(cfg)?;
        let report = expansion_report(&spec, &planar_probes(cfg, &sys), source.z, modes)?;
        let closed = match cfg.shape.ellipse() {
            Some(shape) => {
                let terms = cfg.series_terms.unwrap_or(80);
                let z = to_elliptic(source.z, shape.r)?;
                Some(ClosedReport {
                    kind: "ellipse",
                    terms,
                    probes: 20,
                    max_abs_error: closed_ellipse_error(shape, z, terms)?,
                })
            }
            None => None,
        };
        (Some(report), closed)
    };
    let mut failures = Vec::new();
    if let Some(r) = &numeric {
        if !(r.max_abs_error < GREEN_NUMERIC_TOL) {
            failures.push(format!("numeric expansion error {:e} >= {GREEN_NUMERIC_TOL:e}", r.max_abs_error));
        }
    }
    if let Some(r) = &closed {
        if !(r.max_abs_error < GREEN_CLOSED_TOL) {
            failures.push(format!("closed {} expansion error {:e} >= {GREEN_CLOSED_TOL:e}", r.kind, r.max_abs_error));
        }
    }
    write_json(
        &format!("{}.green.json", cfg.out),
        &GreenOutput {
            command: "green-check",
            config: cfg,
            numeric,
            closed,
            numeric_threshold: GREEN_NUMERIC_TOL,
            closed_threshold: GREEN_CLOSED_TOL,
            pass: failures.is_empty(),
        },
    )?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(failures))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    #[serde(serialize_with = "serialize_scalar_17")]
    pub measured: f64,
    #[serde(serialize_with = "serialize_scalar_17")]
    pub threshold: f64,
    pub pass: bool,
}

fn check(name: &'static str, measured: f64, threshold: f64) -> CheckResult {
    CheckResult {
        name,
        measured,
        threshold,
        pass: measured < threshold,
    }
}

#[derive(Serialize)]
struct ValidateOutput<'a> {
    command: &'static str,
    config: &'a RunConfig,
    checks: Vec<CheckResult>,
    all_pass: bool,
}

fn unsold_defect() -> f64 {
    sphere_points(100)
        .into_iter()
        .flat_map(|d| (0..=10).map(move |n| (unsold_check(n, d) - (2 * n + 1) as f64 / (4.0 * PI)).abs()))
        .fold(0.0, f64::max)
}

fn harmonic_orthonormality_defect() -> f64 {
    let (rule, azimuth) = (gauss_legendre(16), 32);
    let size = 49;
    let mut gram = vec![0.0; size * size];
    for &(x, w) in &rule {
        for k in 0..azimuth {
            let phi = TAU * k as f64 / azimuth as f64;
            let s = (1.0 - x * x).sqrt();
            let d = Vector3::new(s * phi.cos(), s * phi.sin(), x);
            let y: Vec<f64> = (0..=6).flat_map(|n| harmonics_of_degree(n, d)).collect();
            for i in 0..size {
                for j in 0..size {
                    gram[i * size + j] += w * TAU / azimuth as f64 * y[i] * y[j];
                }
            }
        }
    }
    (0..size * size)
        .map(|k| (gram[k] - if k / size == k % size { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max)
}

/// Relative defect of `|a·∇(e^{−nρ}cos nω)|² + |a·∇(e^{−nρ}sin nω)|² = n²e^{−2nρ}|a|²|b|²/(R²(sinh²ρ + sin²ω)²)`.
fn gradient_pair_defect(shape: EllipseShape) -> f64 {
    let a = Vector2::new(0.6, -0.8);
    let mut worst: f64 = 0.0;
    for (rho, omega) in [(1.0f64, 0.3), (1.7, 2.1), (2.5, 4.4)] {
        let z = EllipticPoint::new(rho.max(1.01 * shape.rho0), omega);
        for n in 1..=12 {
            let nf = n as f64;
            let plain = |parity: Parity, sign: f64| {
                let scale = (nf * shape.rho0).exp() * ((1.0 + sign * (-2.0 * nf * shape.rho0).exp()) / (2.0 * nf * PI)).sqrt();
                grad_exterior_mode(&EllipseMode::new(n, parity, shape), z, a) / scale
            };
            let lhs = plain(Parity::Cosine, 1.0).powi(2) + plain(Parity::Sine, -1.0).powi(2);
            let b_sq = (z.omega.cos() * z.rho.sinh()).powi(2) + (z.omega.sin() * z.rho.cosh()).powi(2);
            let xi_sq = z.rho.sinh().powi(2) + z.omega.sin().powi(2);
            let rhs = nf * nf * (-2.0 * nf * z.rho).exp() * a.norm_squared() * b_sq / (shape.r * shape.r * xi_sq * xi_sq);
            worst = worst.max((lhs - rhs).abs() / rhs);
        }
    }
    worst
}

fn planar_checks(cfg: &RunConfig) -> Result<Vec<CheckResult>, CliError> {
    let sys = planar_system(cfg)?;
    let spec = planar_spectrum(cfg, &sys)?;
    let phi0 = np_core::symmetrization::compute_phi0(&sys)?;
    let stilde = build_stilde(&sys, &phi0.density);
    let metric = hstar_gram(&sys, &stilde)?;
    let source = planar_source(cfg)?;
    let (full, modes) = green_spectrum(cfg, &sys)?;
    let green = expansion_report(&full, &planar_probes(cfg, &sys), source.z, modes)?;
    let mut checks = vec![
        check("calderon_residual", sys.calderon_residual(), 1e-8),
        check("self_adjointness_residual", self_adjointness_residual(&sys, &metric), 1e-8),
        check("orthonormality_defect", orthonormality_defect(&spec, &metric), 1e-10),
        check("stilde_unitarity_defect", stilde_unitarity_defect(&sys, &stilde, &spec)?, 1e-8),
        check("phi0_eigenvalue", (spec.phi0_eigenvalue() - 0.5).abs(), 1e-10),
        check("green_expansion", green.max_abs_error, GREEN_NUMERIC_TOL),
    ];
    match cfg.shape {
        ShapeSpec::Ellipse { .. } => {
            let shape = cfg.shape.ellipse().expect("validated ellipse");
            let count = spec.len().min(8);
            let eig = (0..count)
                .map(|k| {
                    let mode = EllipseMode::new(k / 2 + 1, if k % 2 == 0 { Parity::Cosine } else { Parity::Sine }, shape);
                    (spec.eigenvalues()[k] - mode.eigenvalue()).abs()
                })
                .fold(0.0, f64::max);
            let g = sys.grid();
            let phi0_err = spec
                .phi0()
                .iter()
                .zip(g.params())
                .map(|(v, &t)| (v - 1.0 / (TAU * shape.xi(shape.rho0, t))).abs())
                .fold(0.0, f64::max);
            let constant = (shape.rho0 + shape.r.ln() - 2f64.ln()) / TAU;
            let model = NumericModel::new(&sys, &spec, source)?;
            let (z, a) = elliptic_source(cfg, shape)?;
            let pairs = (1..=(spec.len() / 2).min(6))
                .map(|n| {
                    let numeric = model.alpha()[2 * n - 2].powi(2) + model.alpha()[2 * n - 1].powi(2);
                    pair_alpha_sq(n, z, a, shape).map(|exact| (numeric - exact).abs() / exact)
                })
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .fold(0.0, f64::max);
            checks.push(check("ellipse_eigenvalues", eig, 1e-8));
            checks.push(check("phi0_closed_form", phi0_err, 1e-8));
            checks.push(check("phi0_interior_constant", (spec.s_phi0_interior() - constant).abs(), 1e-8));
            checks.push(check("alpha_pair_sums", pairs, 1e-7));
            checks.push(check("gradient_pair_identity", gradient_pair_defect(shape), 1e-12));
        }
        ShapeSpec::Disk { .. } => {
            let worst = spec.eigenvalues().iter().map(|l| l.abs()).fold(0.0, f64::max);
            checks.push(check("disk_kstar_vanishes", worst, 1e-10));
        }
        _ => {}
    }
    checks.push(check("unsold_identity", unsold_defect(), 1e-12));
    Ok(checks)
}

fn ball_checks(cfg: &RunConfig) -> Result<Vec<CheckResult>, CliError> {
    let (r0, _) = axial_source(cfg)?;
    Ok(vec![
        check("unsold_identity", unsold_defect(), 1e-12),
        check("harmonic_orthonormality", harmonic_orthonormality_defect(), 1e-12),
        check("ball_green_closed", closed_ball_error(r0, cfg.series_terms.unwrap_or(60))?, GREEN_CLOSED_TOL),
    ])
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<(), CliError> {
    let checks = if cfg.shape == ShapeSpec::Ball {
        ball_checks(cfg)?
    } else {
        planar_checks(cfg)?
    };
    let failures: Vec<String> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{}: measured {:e} vs threshold {:e}", c.name, c.measured, c.threshold))
        .collect();
    write_json(
        &format!("{}.validate.json", cfg.out),
        &ValidateOutput {
            command: "validate",
            config: cfg,
            all_pass: failures.is_empty(),
            checks,
        },
    )?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(failures))
    }
}
