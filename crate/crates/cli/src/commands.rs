use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use robin_ns::calculus;
use robin_ns::evolution::{self, EnsembleSpec, Forcing, Trajectory};
use robin_ns::fields::GridVector;
use robin_ns::grid::BoxGrid;
use robin_ns::hodge::Projector;
use robin_ns::navier_stokes::{self, Constants, PicardOptions, PicardReport};
use robin_ns::presets;
use robin_ns::robin_stokes::{RobinStokes, ValidatedSchedule};
use robin_ns::FaceField;

use crate::config::{hex_digest, InitialCondition, RunConfig};
use crate::fieldio::{sha_bytes, version_string, FieldFile};

/// Command-line overrides shared by the run-like commands.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(o) = &self.out {
            cfg.output.directory = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.solver.ensemble_seed = s;
        }
    }
}

fn provenance(cfg: &RunConfig) -> String {
    format!("# config_sha256={}, version={}\n", cfg.sha256(), version_string())
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    let d = &cfg.output.directory;
    std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    Ok(d)
}

pub fn validated_schedule(cfg: &RunConfig, grid: &BoxGrid) -> Result<ValidatedSchedule> {
    Ok(cfg.schedule(grid)?.validate(grid)?)
}

pub fn problem(cfg: &RunConfig) -> Result<RobinStokes> {
    let g = cfg.grid()?;
    let s = validated_schedule(cfg, &g)?;
    Ok(RobinStokes::new(&g, s)?)
}

pub fn initial_field(cfg: &RunConfig, pb: &RobinStokes) -> Result<FaceField> {
    let g = pb.grid();
    Ok(match &cfg.initial {
        InitialCondition::Zero => FaceField::zeros(g),
        InitialCondition::TaylorGreen { amplitude_m_per_s } => presets::taylor_green(g, *amplitude_m_per_s),
        InitialCondition::RandomSmooth { amplitude_m_per_s, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            presets::random_smooth(g, pb.projector(), &mut rng, 2).scaled(*amplitude_m_per_s)
        }
        InitialCondition::File { path } => {
            let f = FieldFile::read(path)?;
            ensure!(f.grid == *g, "{} was written for a different grid", path.display());
            f.to_face_field()?
        }
    })
}

/// Constants artifact; the derived δ and ε are recomputed on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsArtifact {
    pub c_mr: f64,
    pub c1: f64,
    pub c2: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub members: usize,
    pub cells: [usize; 3],
    pub lengths_m: [f64; 3],
    pub tau_s: f64,
    pub dt_s: f64,
}

impl ConstantsArtifact {
    fn new(c: &Constants, cfg: &RunConfig) -> Self {
        Self {
            c_mr: c.c_mr,
            c1: c.c1,
            c2: c.c2,
            delta: c.delta,
            epsilon: c.epsilon,
            seed: c.seed,
            members: cfg.solver.ensemble_members,
            cells: cfg.grid.cells,
            lengths_m: cfg.grid.lengths_m,
            tau_s: cfg.solver.tau_s,
            dt_s: cfg.solver.dt_s,
        }
    }

    pub fn constants(&self) -> Constants {
        Constants::from_parts(self.c_mr, self.c1, self.c2, self.seed)
    }

    fn render(&self, cfg: &RunConfig) -> String {
        provenance(cfg) + &toml::to_string(self).expect("artifact serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("malformed constants file {}", path.display()))
    }
}

fn compute_constants(cfg: &RunConfig, pb: &RobinStokes) -> Result<Constants> {
    let ensemble = EnsembleSpec {
        members: cfg.solver.ensemble_members,
        seed: cfg.solver.ensemble_seed,
        ..Default::default()
    };
    Ok(navier_stokes::estimate_constants(pb, cfg.solver.tau_s, cfg.solver.dt_s, &ensemble, None)?)
}

/// Estimate the constants and write `constants.toml`; returns its path.
pub fn cmd_estimate_constants(cfg: &RunConfig) -> Result<PathBuf> {
    let pb = problem(cfg)?;
    let c = compute_constants(cfg, &pb)?;
    let path = out_dir(cfg)?.join("constants.toml");
    std::fs::write(&path, ConstantsArtifact::new(&c, cfg).render(cfg))?;
    Ok(path)
}

pub fn cmd_validate_schedule(cfg: &RunConfig) -> Result<String> {
    let g = cfg.grid()?;
    let s = validated_schedule(cfg, &g)?;
    let mut out = String::new();
    writeln!(out, "schedule valid on {} boundary faces", g.boundary_faces().len())?;
    writeln!(out, "breakpoints_s = {:?}", s.breakpoints())?;
    writeln!(out, "bound_per_m = {} (observed {})", s.bound(), s.observed_max())?;
    writeln!(out, "holder_exponent = {}", s.holder_exponent())?;
    writeln!(out, "holder_constants = {:?}", s.holder_constants())?;
    Ok(out)
}

/// Per-state diagnostics CSV.
pub fn diagnostics_csv(cfg: &RunConfig, pb: &RobinStokes, traj: &Trajectory) -> Result<String> {
    let g = pb.grid();
    let mut out = provenance(cfg);
    out.push_str("time_s,norm_h,norm_v,form_beta,boundary_residual,div_max\n");
    for (u, (&t, &tp)) in traj.states.iter().zip(traj.times().iter().zip(&traj.grid.points)) {
        let op = pb.operator(tp);
        let residual = if g.has_wall() { op.boundary_residual(u)? } else { 0.0 };
        writeln!(
            out,
            "{t:.9e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            u.norm(),
            calculus::v_norm(g, u)?,
            op.form_unchecked(u, u)?,
            residual,
            calculus::div(g, u)?.max_abs()
        )?;
    }
    Ok(out)
}

pub fn summary_text(cfg: &RunConfig, r: &PicardReport) -> String {
    let mut s = provenance(cfg);
    let list = |v: &[f64]| v.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(", ");
    let _ = writeln!(s, "converged = {}", r.converged);
    let _ = writeln!(s, "contractive = {}", r.contractive);
    let _ = writeln!(s, "iterations = {}", r.increments.len());
    let _ = writeln!(s, "increments = [{}]", list(&r.increments));
    let _ = writeln!(s, "contraction_factors = [{}]", list(&r.contraction_factors));
    let _ = writeln!(s, "linear_norm_e = {:.6e}", r.linear_norm);
    let _ = writeln!(s, "initial_norm_v = {:.6e}", r.initial_v);
    let _ = writeln!(s, "above_threshold = {}", r.above_threshold);
    let _ = writeln!(s, "fixed_point_residual = {:.6e}", r.fixed_point_residual);
    let _ = writeln!(s, "rns_residual = {:.6e}", r.rns_residual);
    if let Some(c) = &r.constants {
        let _ = writeln!(
            s,
            "constants = {{ c_mr = {:.6e}, c1 = {:.6e}, c2 = {:.6e}, delta = {:.6e}, epsilon = {:.6e}, seed = {} }}",
            c.c_mr, c.c1, c.c2, c.delta, c.epsilon, c.seed
        );
    }
    s
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: PicardReport,
    pub directory: PathBuf,
}

/// Full run: validation, optional constants, Picard, artifacts.
/// A diverging iteration leaves its summary behind and returns the error.
pub fn cmd_run(cfg: &RunConfig, cache_constants: Option<&Path>) -> Result<RunOutcome> {
    let pb = problem(cfg)?;
    let dir = out_dir(cfg)?.to_path_buf();
    let constants = match cache_constants {
        Some(p) if p.exists() => Some(ConstantsArtifact::load(p)?.constants()),
        Some(p) => {
            let c = compute_constants(cfg, &pb)?;
            std::fs::write(p, ConstantsArtifact::new(&c, cfg).render(cfg))?;
            Some(c)
        }
        None if cfg.solver.estimate_constants => Some(compute_constants(cfg, &pb)?),
        None => None,
    };
    let u0 = initial_field(cfg, &pb)?;
    let opts = PicardOptions {
        tol: cfg.solver.picard_tol,
        max_iter: cfg.solver.picard_max_iter,
        constants,
    };
    let sol = match navier_stokes::picard_solve(&pb, &u0, cfg.solver.tau_s, cfg.solver.dt_s, &opts) {
        Ok(s) => s,
        Err(robin_ns::Error::PicardDivergence(report)) => {
            std::fs::write(dir.join("summary.txt"), summary_text(cfg, &report))?;
            return Err(robin_ns::Error::PicardDivergence(report).into());
        }
        Err(e) => return Err(e.into()),
    };
    let sha = sha_bytes(&cfg.sha256());
    let g = pb.grid();
    let traj = &sol.trajectory;
    let last = traj.states.len() - 1;
    let every = cfg.output.snapshot_every_steps;
    for (n, u) in traj.states.iter().enumerate() {
        if n == 0 || n == last || (every > 0 && n % every == 0) {
            let t = traj.times()[n];
            FieldFile::faces(g, u, t, sha).write(&dir.join(format!("u_{n:06}.mfield")))?;
            FieldFile::cells(g, &sol.pressure.pi[n], t, sha).write(&dir.join(format!("pi_{n:06}.mfield")))?;
        }
    }
    std::fs::write(dir.join("diagnostics.csv"), diagnostics_csv(cfg, &pb, traj)?)?;
    std::fs::write(dir.join("summary.txt"), summary_text(cfg, &sol.report))?;
    Ok(RunOutcome {
        report: sol.report,
        directory: dir,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub study: &'static str,
    pub level: usize,
    pub cells: [usize; 3],
    pub dt_s: f64,
    pub error: f64,
    pub order: Option<f64>,
}

fn check_taylor_green(cfg: &RunConfig, pb: &RobinStokes) -> Result<f64> {
    let InitialCondition::TaylorGreen { amplitude_m_per_s } = cfg.initial else {
        bail!("convergence needs an initial condition with a known solution (preset \"taylor-green\")");
    };
    ensure!(pb.schedule().is_zero(), "the Taylor-Green solution is known only for β = 0");
    let g = pb.grid();
    for a in 0..2 {
        let want = if g.is_wall(a) { PI } else { 2.0 * PI };
        ensure!(
            (g.lengths()[a] - want).abs() < 1e-12,
            "Taylor-Green needs length {want} along axis {a}, found {}",
            g.lengths()[a]
        );
    }
    Ok(amplitude_m_per_s)
}

fn relative_sup(traj: &Trajectory, exact: impl Fn(f64) -> FaceField) -> f64 {
    let (mut err, mut scale) = (0.0_f64, 0.0_f64);
    for (u, &t) in traj.states.iter().zip(traj.times()) {
        let e = exact(t);
        err = err.max(u.sub(&e).norm());
        scale = scale.max(e.norm());
    }
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

fn with_orders(mut rows: Vec<ConvergenceRow>) -> Vec<ConvergenceRow> {
    for i in 1..rows.len() {
        let ratio = rows[i - 1].error / rows[i].error;
        let refine = if rows[i].study == "spatial" {
            rows[i].cells[0] as f64 / rows[i - 1].cells[0] as f64
        } else {
            rows[i - 1].dt_s / rows[i].dt_s
        };
        rows[i].order = Some(ratio.ln() / refine.ln());
    }
    rows
}

/// Spatial study: cells ×2 in the Taylor–Green plane and dt ÷4 per level,
/// nonlinear solve against the exact flow. Temporal study: fixed grid,
/// dt ÷2 per level, linear solve against the exact semi-discrete decay.
pub fn convergence_rows(cfg: &RunConfig, levels: usize) -> Result<Vec<ConvergenceRow>> {
    ensure!(levels >= 1, "need at least one level");
    let base = problem(cfg)?;
    let amplitude = check_taylor_green(cfg, &base)?;
    let tau = cfg.solver.tau_s;
    let spatial: Vec<ConvergenceRow> = (0..levels)
        .into_par_iter()
        .map(|l| {
            let mut c = cfg.clone();
            c.grid.cells[0] <<= l;
            c.grid.cells[1] <<= l;
            c.solver.dt_s = cfg.solver.dt_s / 4f64.powi(l as i32);
            let pb = problem(&c)?;
            let g = pb.grid().clone();
            let u0 = presets::taylor_green(&g, amplitude);
            let opts = PicardOptions {
                tol: c.solver.picard_tol,
                max_iter: c.solver.picard_max_iter,
                constants: None,
            };
            let sol = navier_stokes::picard_solve(&pb, &u0, tau, c.solver.dt_s, &opts)?;
            let error = relative_sup(&sol.trajectory, |t| u0.scaled((-2.0 * t).exp()));
            Ok(ConvergenceRow {
                study: "spatial",
                level: l,
                cells: c.grid.cells,
                dt_s: c.solver.dt_s,
                error,
                order: None,
            })
        })
        .collect::<Result<_>>()?;
    let g = base.grid();
    let u0 = presets::taylor_green(g, amplitude);
    let lambda = presets::taylor_green_eigenvalue(g);
    let temporal: Vec<ConvergenceRow> = (0..levels)
        .into_par_iter()
        .map(|l| {
            let dt = cfg.solver.dt_s / 2f64.powi(l as i32);
            let traj = evolution::solve_linear(&base, &u0, &Forcing::Zero, tau, dt)?;
            let error = relative_sup(&traj, |t| u0.scaled((-lambda * t).exp()));
            Ok(ConvergenceRow {
                study: "temporal",
                level: l,
                cells: cfg.grid.cells,
                dt_s: dt,
                error,
                order: None,
            })
        })
        .collect::<Result<_>>()?;
    let mut rows = with_orders(spatial);
    rows.extend(with_orders(temporal));
    Ok(rows)
}

/// Writes `convergence.csv`; returns its path and the rows.
pub fn cmd_convergence(cfg: &RunConfig, levels: usize) -> Result<(PathBuf, Vec<ConvergenceRow>)> {
    let rows = convergence_rows(cfg, levels)?;
    let mut out = provenance(cfg);
    out.push_str("study,level,nx,ny,nz,dt_s,error,order\n");
    for r in &rows {
        let order = r.order.map(|o| format!("{o:.6}")).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{:.9e},{:.16e},{order}",
            r.study, r.level, r.cells[0], r.cells[1], r.cells[2], r.dt_s, r.error
        )?;
    }
    let path = out_dir(cfg)?.join("convergence.csv");
    std::fs::write(&path, out)?;
    Ok((path, rows))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecomposeReport {
    /// ⟨Pu, grad p⟩
    pub inner_product: f64,
    /// ‖u − Pu − grad p‖
    pub recomposition_error: f64,
    pub norm_u: f64,
}

/// Split a face field into `Pu` and `grad p`; writes `pu.mfield`,
/// `grad_p.mfield` and `decompose.txt` to `out`.
pub fn cmd_decompose(input: &Path, out: &Path) -> Result<DecomposeReport> {
    let bytes = std::fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    let file = FieldFile::from_bytes(&bytes).with_context(|| format!("in {}", input.display()))?;
    let g = file.grid.clone();
    let u = file.to_face_field()?;
    let flux = u.wall_normal_max(&g);
    ensure!(flux == 0.0, "input has normal velocity {flux:.3e} on a wall; only tangent fields decompose");
    let proj = Projector::new(&g).project(&u)?;
    let gp = calculus::grad(&g, &proj.potential)?;
    let report = DecomposeReport {
        inner_product: proj.field.dot(&gp),
        recomposition_error: u.sub(&proj.field).sub(&gp).norm(),
        norm_u: u.norm(),
    };
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let digest = hex_digest(&bytes);
    let sha = sha_bytes(&digest);
    FieldFile::faces(&g, &proj.field, file.time, sha).write(&out.join("pu.mfield"))?;
    FieldFile::faces(&g, &gp, file.time, sha).write(&out.join("grad_p.mfield"))?;
    let text = format!(
        "# input_sha256={digest}, version={}\ninner_product = {:.6e}\nrecomposition_error = {:.6e}\nnorm_u = {:.6e}\n",
        version_string(),
        report.inner_product,
        report.recomposition_error,
        report.norm_u
    );
    std::fs::write(out.join("decompose.txt"), text)?;
    Ok(report)
}
