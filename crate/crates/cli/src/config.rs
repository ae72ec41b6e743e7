//! TOML run configuration. Every dimensional key carries its unit.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use robin_ns::grid::{AxisKind, BoundaryFace, BoxGrid};
use robin_ns::robin_stokes::{wall_frame_matrix, BetaSchedule, Interpolation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    pub solver: SolverConfig,
    pub initial: InitialCondition,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lengths_m: [f64; 3],
    pub cells: [usize; 3],
    pub kinds: [AxisKind; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Empty means `[0, τ]`.
    #[serde(default)]
    pub breakpoints_s: Vec<f64>,
    #[serde(default = "constant")]
    pub interpolation: Interpolation,
    /// α in the Hölder condition.
    #[serde(default = "one")]
    pub holder_exponent: f64,
    /// Mᵢ per segment; tightest values when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder_constants: Option<Vec<f64>>,
    /// M; tightest value when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_per_m: Option<f64>,
    /// Walls without an entry have β = 0.
    #[serde(default)]
    pub walls: Vec<WallBeta>,
}

fn constant() -> Interpolation {
    Interpolation::Constant
}

fn one() -> f64 {
    1.0
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            breakpoints_s: Vec::new(),
            interpolation: Interpolation::Constant,
            holder_exponent: 1.0,
            holder_constants: None,
            bound_per_m: None,
            walls: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallBeta {
    /// `"all"` or a wall label such as `"-z"`.
    pub wall: String,
    /// One entry per segment.
    pub segments: Vec<SegmentBeta>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentBeta {
    #[serde(flatten)]
    pub start: BetaValue,
    /// Value at the segment end for linear interpolation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<BetaValue>,
}

/// One β matrix, in the frame of the wall unless given in full.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum BetaValue {
    /// β = b·I.
    Scalar { scalar_per_m: f64 },
    /// Diagonal tangential block and normal eigenvalue.
    Diagonal { diagonal_per_m: [f64; 2], normal_per_m: f64 },
    /// Full tangential block (rows) and normal eigenvalue.
    Tangential { tangential_per_m: [[f64; 2]; 2], normal_per_m: f64 },
    /// Global-frame 3×3 matrix (rows).
    Matrix { matrix_per_m: [[f64; 3]; 3] },
}

impl BetaValue {
    fn matrix(&self, face: &BoundaryFace) -> Matrix3<f64> {
        match self {
            Self::Scalar { scalar_per_m } => Matrix3::identity() * *scalar_per_m,
            Self::Diagonal { diagonal_per_m: d, normal_per_m } => {
                wall_frame_matrix(face.wall, Matrix2::new(d[0], 0.0, 0.0, d[1]), *normal_per_m)
            }
            Self::Tangential { tangential_per_m: t, normal_per_m } => {
                wall_frame_matrix(face.wall, Matrix2::new(t[0][0], t[0][1], t[1][0], t[1][1]), *normal_per_m)
            }
            Self::Matrix { matrix_per_m: m } => Matrix3::from_fn(|i, j| m[i][j]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tau_s: f64,
    pub dt_s: f64,
    #[serde(default = "default_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_iter")]
    pub picard_max_iter: usize,
    #[serde(default)]
    pub ensemble_seed: u64,
    #[serde(default = "default_members")]
    pub ensemble_members: usize,
    /// Estimate the Picard constants before the run.
    #[serde(default)]
    pub estimate_constants: bool,
}

fn default_tol() -> f64 {
    1e-8
}
fn default_iter() -> usize {
    30
}
fn default_members() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    Zero,
    TaylorGreen { amplitude_m_per_s: f64 },
    RandomSmooth { amplitude_m_per_s: f64, seed: u64 },
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Field snapshot every this many steps; 0 writes only the endpoints.
    pub snapshot_every_steps: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            snapshot_every_steps: 0,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("malformed configuration")?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Hex sha256 of the canonical serialization, output directory left
    /// out so that the same experiment hashes the same wherever it is written.
    pub fn sha256(&self) -> String {
        let mut c = self.clone();
        c.output.directory = PathBuf::new();
        hex_digest(c.to_toml().as_bytes())
    }

    fn check(&self) -> Result<()> {
        let s = &self.solver;
        if !(s.tau_s > 0.0 && s.dt_s > 0.0 && s.dt_s <= s.tau_s) {
            bail!("need 0 < dt_s ≤ tau_s, got dt_s = {}, tau_s = {}", s.dt_s, s.tau_s);
        }
        let b = self.breakpoints();
        if b.last() != Some(&s.tau_s) {
            bail!("breakpoints must end at tau_s = {}", s.tau_s);
        }
        for w in &self.schedule.walls {
            if w.wall != "all" && !self.grid()?.walls().iter().any(|x| x.label() == w.wall) {
                bail!("schedule names wall {:?}, which this grid does not have", w.wall);
            }
            if w.segments.len() + 1 != b.len() {
                bail!("wall {:?} gives {} segments for {} breakpoints", w.wall, w.segments.len(), b.len());
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<BoxGrid> {
        let g = &self.grid;
        Ok(BoxGrid::new(g.lengths_m, g.cells, g.kinds)?)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        if self.schedule.breakpoints_s.is_empty() {
            vec![0.0, self.solver.tau_s]
        } else {
            self.schedule.breakpoints_s.clone()
        }
    }

    /// The schedule before validation.
    pub fn schedule(&self, grid: &BoxGrid) -> Result<BetaSchedule> {
        let sc = &self.schedule;
        let spec = |face: &BoundaryFace| {
            let label = face.wall.label();
            sc.walls.iter().rev().find(|w| w.wall == label || w.wall == "all")
        };
        let mut s = BetaSchedule::from_fn(grid, &self.breakpoints(), sc.interpolation, |i, at_end, face| {
            match spec(face) {
                None => Matrix3::zeros(),
                Some(w) => {
                    let seg = &w.segments[i];
                    let v = if at_end { seg.end.as_ref().unwrap_or(&seg.start) } else { &seg.start };
                    v.matrix(face)
                }
            }
        })?;
        s.holder_exponent = sc.holder_exponent;
        if let Some(m) = sc.bound_per_m {
            s.bound = m;
        }
        if let Some(c) = &sc.holder_constants {
            if c.len() != s.segments.len() {
                bail!("{} Hölder constants for {} segments", c.len(), s.segments.len());
            }
            for (seg, &m) in s.segments.iter_mut().zip(c) {
                seg.holder_constant = m;
            }
        }
        Ok(s)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
