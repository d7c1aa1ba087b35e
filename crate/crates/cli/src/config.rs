//! Run configuration: a single JSON document, optionally overridden by flags.

use std::f64::consts::LN_2;
use std::str::FromStr;

use np_core::geometry::{circle, ellipse_curve, star_curve, Curve, EllipseShape};
use np_core::resonance::{log_delta_grid, LambdaMode};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Ellipse {
        #[serde(rename = "R")]
        r: f64,
        rho0: f64,
    },
    Disk {
        r: f64,
    },
    /// The unit ball, handled analytically.
    Ball,
    Star {
        radius: f64,
        amplitude: f64,
        lobes: u32,
    },
}

impl ShapeSpec {
    pub fn default_for(kind: &str) -> Result<Self, CliError> {
        Ok(match kind {
            "ellipse" => ShapeSpec::Ellipse { r: 1.0, rho0: LN_2 },
            "disk" => ShapeSpec::Disk { r: 1.0 },
            "ball" => ShapeSpec::Ball,
            "star" => ShapeSpec::Star {
                radius: 1.0,
                amplitude: 0.1,
                lobes: 3,
            },
            other => return Err(CliError::Config(format!("unknown shape '{other}' (ellipse, disk, ball, star)"))),
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ShapeSpec::Ellipse { .. } => "ellipse",
            ShapeSpec::Disk { .. } => "disk",
            ShapeSpec::Ball => "ball",
            ShapeSpec::Star { .. } => "star",
        }
    }

    pub fn ellipse(&self) -> Option<EllipseShape> {
        match *self {
            ShapeSpec::Ellipse { r, rho0 } => EllipseShape::new(r, rho0).ok(),
            _ => None,
        }
    }

    /// Boundary curve of a planar shape.
    pub fn curve(&self) -> Result<Curve, CliError> {
        Ok(match *self {
            ShapeSpec::Ellipse { r, rho0 } => ellipse_curve(EllipseShape::new(r, rho0)?)?,
            ShapeSpec::Disk { r } => circle(r)?,
            ShapeSpec::Star {
                radius,
                amplitude,
                lobes,
            } => star_curve(radius, amplitude, lobes)?,
            ShapeSpec::Ball => return Err(CliError::Config("the ball has no planar boundary curve".into())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "frame", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Elliptic { rho_z: f64, omega_z: f64, a: [f64; 2] },
    Cartesian { z: [f64; 2], a: [f64; 2] },
    /// Dipole `a_z ẑ` at `r₀ ẑ` outside the unit ball.
    Axial { r0: f64, a_z: f64 },
}

fn parse_numbers(text: &str, count: usize, what: &str) -> Result<Vec<f64>, CliError> {
    let values = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Config(format!("{what}: {e}")))?;
    if values.len() != count {
        return Err(CliError::Config(format!("{what}: expected {count} comma-separated numbers")));
    }
    Ok(values)
}

impl FromStr for SourceSpec {
    type Err = CliError;

    /// `elliptic:RHO_Z,OMEGA_Z,AX,AY`, `cartesian:X,Y,AX,AY` or `axial:R0,AZ`.
    fn from_str(s: &str) -> Result<Self, CliError> {
        let (frame, rest) = s
            .split_once(':')
            .ok_or_else(|| CliError::Config(format!("source '{s}' needs a frame prefix")))?;
        Ok(match frame {
            "elliptic" => {
                let v = parse_numbers(rest, 4, "elliptic source")?;
                SourceSpec::Elliptic {
                    rho_z: v[0],
                    omega_z: v[1],
                    a: [v[2], v[3]],
                }
            }
            "cartesian" => {
                let v = parse_numbers(rest, 4, "cartesian source")?;
                SourceSpec::Cartesian {
                    z: [v[0], v[1]],
                    a: [v[2], v[3]],
                }
            }
            "axial" => {
                let v = parse_numbers(rest, 2, "axial source")?;
                SourceSpec::Axial { r0: v[0], a_z: v[1] }
            }
            other => return Err(CliError::Config(format!("unknown source frame '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl DeltaGrid {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        Ok(log_delta_grid(self.start, self.stop, self.points)?)
    }
}

impl FromStr for DeltaGrid {
    type Err = CliError;

    /// `start:stop:points`.
    fn from_str(s: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || CliError::Config(format!("delta grid '{s}' must read start:stop:points"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let grid = DeltaGrid {
            start: parts[0].trim().parse().map_err(|_| bad())?,
            stop: parts[1].trim().parse().map_err(|_| bad())?,
            points: parts[2].trim().parse().map_err(|_| bad())?,
        };
        grid.values()?;
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    /// Closed-form modes where available (ellipse, ball).
    Analytic,
    /// Nyström discretization.
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub shape: ShapeSpec,
    /// Quadrature nodes on the boundary.
    pub nodes: usize,
    /// Retained eigenpairs; `null` keeps `min(N/4, 64)`.
    pub keep: Option<usize>,
    /// Modes in the numeric Green expansion.
    pub n_max: usize,
    /// Terms in closed-form series; `null` picks a per-shape default.
    pub series_terms: Option<usize>,
    pub source: SourceSpec,
    pub material: LambdaMode,
    pub delta_grid: DeltaGrid,
    pub pipeline: Pipeline,
    /// Points where `|u_δ − F_z|` is sampled during a sweep.
    pub exterior_samples: Vec<Vec<f64>>,
    /// Output path prefix.
    pub out: String,
    /// Reuse assembled matrices stored next to the outputs.
    pub cache: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            shape: ShapeSpec::Ellipse { r: 1.0, rho0: LN_2 },
            nodes: 256,
            keep: None,
            n_max: 40,
            series_terms: None,
            source: SourceSpec::Elliptic {
                rho_z: 2.0 * LN_2,
                omega_z: 0.7,
                a: [0.6, -0.8],
            },
            material: LambdaMode::Simplified,
            delta_grid: DeltaGrid {
                start: 1e-3,
                stop: 1e-9,
                points: 13,
            },
            pipeline: Pipeline::Analytic,
            exterior_samples: Vec::new(),
            out: "np-out".into(),
            cache: false,
        }
    }
}

/// Flag values that replace fields of the file configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub shape: Option<String>,
    pub r: Option<f64>,
    pub rho0: Option<f64>,
    pub nodes: Option<usize>,
    pub keep: Option<usize>,
    pub n_max: Option<usize>,
    pub series_terms: Option<usize>,
    pub delta_grid: Option<DeltaGrid>,
    pub source: Option<SourceSpec>,
    pub material: Option<(f64, f64)>,
    pub simplified_lambda: bool,
    pub tuned_lambda: Option<f64>,
    pub pipeline: Option<Pipeline>,
    pub out: Option<String>,
    pub cache: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(kind) = &o.shape {
            if kind != self.shape.kind() {
                self.shape = ShapeSpec::default_for(kind)?;
                let axial = matches!(self.source, SourceSpec::Axial { .. });
                if (self.shape == ShapeSpec::Ball) != axial {
                    self.source = if axial {
                        RunConfig::default().source
                    } else {
                        SourceSpec::Axial { r0: 2.0, a_z: 1.0 }
                    };
                }
            }
        }
        if let Some(v) = o.r {
            match &mut self.shape {
                ShapeSpec::Ellipse { r, .. } | ShapeSpec::Disk { r } => *r = v,
                ShapeSpec::Star { radius, .. } => *radius = v,
                ShapeSpec::Ball => return Err(CliError::Config("--R does not apply to the unit ball".into())),
            }
        }
        if let Some(v) = o.rho0 {
            match &mut self.shape {
                ShapeSpec::Ellipse { rho0, .. } => *rho0 = v,
                _ => return Err(CliError::Config("--rho0 applies to ellipses only".into())),
            }
        }
        if let Some(v) = o.nodes {
            self.nodes = v;
        }
        if o.keep.is_some() {
            self.keep = o.keep;
        }
        if let Some(v) = o.n_max {
            self.n_max = v;
        }
        if o.series_terms.is_some() {
            self.series_terms = o.series_terms;
        }
        if let Some(g) = o.delta_grid {
            self.delta_grid = g;
        }
        if let Some(s) = &o.source {
            self.source = s.clone();
        }
        if let Some((eps_c, eps_m)) = o.material {
            self.material = LambdaMode::Exact { eps_c, eps_m };
        }
        if o.simplified_lambda {
            self.material = LambdaMode::Simplified;
        }
        if let Some(lambda0) = o.tuned_lambda {
            self.material = LambdaMode::Tuned { lambda0 };
        }
        if let Some(p) = o.pipeline {
            self.pipeline = p;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if o.cache {
            self.cache = true;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.delta_grid.values()?;
        if let ShapeSpec::Ellipse { r, rho0 } = self.shape {
            EllipseShape::new(r, rho0)?;
        }
        if let LambdaMode::Exact { eps_c, eps_m } = self.material {
            if !(eps_c < 0.0 && eps_m > 0.0) {
                return Err(CliError::Config(format!("material needs eps_c < 0 < eps_m (got {eps_c}, {eps_m})")));
            }
        }
        Ok(())
    }
}
