//! The nonlinear layer: `B(u, v)`, the global-in-time Picard iteration
//! `v ↦ a + B(v, v)`, its constants and the pressure.
//!
//! Sign conventions for the potentials returned by projections:
//!
//! ```text
//!   P N   = N − grad p        (N = ½(u×curl v + v×curl u) on faces)
//!   A_β u = K u + grad q      (K the unprojected Galerkin operator)
//! ```
//!
//! so that a trajectory of `∂ₜu + A_β u = P N` satisfies
//! `∂ₜu + K u + grad π − N = 0` with `π = p + q`. The kinematic pressure of
//! the original variables is `π − ½|u|²`.

use rayon::prelude::*;

use crate::calculus::{self, time, CurlClosure};
use crate::error::{Error, Result};
use crate::evolution::{self, EnsembleSpec, Forcing, TimeGrid, Trajectory};
use crate::fields::{for_each_index, CellField, EdgeField, FaceField, GridVector};
use crate::robin_stokes::{RobinStokes, RobinStokesOperator};

/// Vorticity on edges with the Robin value `ω_tan = (β Tr u)×ν` on wall
/// edges (the natural closure leaves them zero).
pub fn robin_vorticity(op: &RobinStokesOperator<'_>, u: &FaceField) -> Result<EdgeField> {
    let g = op.grid();
    let mut w = calculus::curl_fe(g, u, CurlClosure::Natural)?;
    if op.is_zero_beta() {
        return Ok(w);
    }
    let n = g.cells();
    let upper = |a: usize, c: usize| if g.is_wall(a) { c + 1 } else { (c + 1) % n[a] };
    let mut sum = EdgeField::zeros(g);
    let mut count = EdgeField::zeros(g);
    let flux = op.boundary_flux(u);
    for (f, gv) in g.boundary_faces().iter().zip(&flux) {
        let axis = f.wall.axis;
        let t = f.wall.tangential_axes();
        let mut force = [0.0; 3];
        force[t[0]] = gv[0];
        force[t[1]] = gv[1];
        let nu = f.wall.normal();
        let omega = [
            force[1] * nu[2] - force[2] * nu[1],
            force[2] * nu[0] - force[0] * nu[2],
            force[0] * nu[1] - force[1] * nu[0],
        ];
        let mut base = [0; 3];
        base[t[0]] = f.tangential_index[0];
        base[t[1]] = f.tangential_index[1];
        base[axis] = if f.wall.upper { n[axis] } else { 0 };
        for (slot, d) in t.into_iter().enumerate() {
            let e = t[1 - slot];
            for node in [base[e], upper(e, base[e])] {
                let mut p = base;
                p[e] = node;
                sum.set(d, p, sum.get(d, p) + omega[d]);
                count.set(d, p, count.get(d, p) + 1.0);
            }
        }
    }
    for d in 0..3 {
        let (s, c) = (sum.comp(d).to_vec(), count.comp(d).to_vec());
        for ((wv, sv), cv) in w.comp_mut(d).iter_mut().zip(s).zip(c) {
            if cv > 0.0 {
                *wv = sv / cv;
            }
        }
    }
    Ok(w)
}

/// Nonlinear term before and after projection.
#[derive(Clone, Debug)]
pub struct NonlinearTerm {
    /// `½(u×curl v + v×curl u)` averaged back to faces (wall-normal faces
    /// zeroed).
    pub raw: FaceField,
    /// `P raw`
    pub projected: FaceField,
    /// `p` with `P raw = raw − grad p`.
    pub potential: CellField,
}

/// Cross products are formed at cell centres and returned to faces by the
/// transpose of the averaging, so `⟨N(u, u), u⟩` vanishes up to the
/// projection tolerance.
pub fn nonlinear_term(op: &RobinStokesOperator<'_>, u: &FaceField, v: &FaceField) -> Result<NonlinearTerm> {
    let g = op.grid();
    let uc = calculus::faces_to_cells(g, u);
    let vc = calculus::faces_to_cells(g, v);
    let wu = calculus::edges_to_cells(g, &robin_vorticity(op, u)?);
    let wv = calculus::edges_to_cells(g, &robin_vorticity(op, v)?);
    let mut c = [CellField::zeros(g), CellField::zeros(g), CellField::zeros(g)];
    let len = uc[0].data().len();
    let mut out = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    for i in 0..len {
        let a = [uc[0].data()[i], uc[1].data()[i], uc[2].data()[i]];
        let b = [vc[0].data()[i], vc[1].data()[i], vc[2].data()[i]];
        let wa = [wu[0].data()[i], wu[1].data()[i], wu[2].data()[i]];
        let wb = [wv[0].data()[i], wv[1].data()[i], wv[2].data()[i]];
        for d in 0..3 {
            let (x, y) = ((d + 1) % 3, (d + 2) % 3);
            let ab = a[x] * wb[y] - a[y] * wb[x];
            let ba = b[x] * wa[y] - b[y] * wa[x];
            out[d][i] = 0.5 * (ab + ba);
        }
    }
    for d in 0..3 {
        c[d].data_mut().copy_from_slice(&out[d]);
    }
    let mut raw = calculus::cells_to_faces(g, &c);
    raw.enforce_tangent(g);
    let pr = op.projector().project(&raw)?;
    Ok(NonlinearTerm {
        raw,
        projected: pr.field,
        potential: pr.potential,
    })
}

/// `½P(u×curl v + v×curl u)`.
pub fn nonlinear_rhs(op: &RobinStokesOperator<'_>, u: &FaceField, v: &FaceField) -> Result<FaceField> {
    Ok(nonlinear_term(op, u, v)?.projected)
}

fn check_grid(u: &Trajectory, grid: &TimeGrid) -> Result<()> {
    if u.grid.times != grid.times || u.states.len() != grid.times.len() {
        return Err(Error::ShapeMismatch("trajectories live on different time grids"));
    }
    Ok(())
}

/// `B(u, v)`: the solution `w` of `∂ₜw + A_β w = ½P(u×curl v + v×curl u)`,
/// `w(0) = 0`, together with the nonlinear terms at every node.
pub fn bilinear_solve_with_terms(problem: &RobinStokes, u: &Trajectory, v: &Trajectory) -> Result<(Trajectory, Vec<NonlinearTerm>)> {
    check_grid(v, &u.grid)?;
    let tg = u.grid.clone();
    let terms: Vec<NonlinearTerm> = (0..tg.times.len())
        .into_par_iter()
        .map(|n| nonlinear_term(&problem.operator(tg.points[n]), &u.states[n], &v.states[n]))
        .collect::<Result<_>>()?;
    let forcing = Forcing::Sampled(terms.iter().map(|t| t.projected.clone()).collect());
    let w = evolution::solve_on(problem, &FaceField::zeros(problem.grid()), &forcing, tg)?;
    Ok((w, terms))
}

pub fn bilinear_solve(problem: &RobinStokes, u: &Trajectory, v: &Trajectory) -> Result<Trajectory> {
    Ok(bilinear_solve_with_terms(problem, u, v)?.0)
}

/// Empirical constants of the Picard argument.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constants {
    pub c_mr: f64,
    /// max ‖curl u‖_{L²(0,τ,L³)} / ‖u‖_E
    pub c1: f64,
    /// max ‖u‖_{L∞(0,τ,L⁶)} / ‖u‖_E
    pub c2: f64,
    /// Radius `0.9 / (4 C_MR C₁ C₂)`.
    pub delta: f64,
    /// Smallness threshold `δ / C_MR` for ‖u₀‖_V.
    pub epsilon: f64,
    pub seed: u64,
}

/// Safety factor in the choice of δ.
pub const DELTA_SAFETY: f64 = 0.9;

impl Constants {
    pub fn from_parts(c_mr: f64, c1: f64, c2: f64, seed: u64) -> Self {
        let delta = DELTA_SAFETY / (4.0 * c_mr * c1 * c2);
        Self {
            c_mr,
            c1,
            c2,
            delta,
            epsilon: delta / c_mr,
            seed,
        }
    }
}

/// `C₁`, `C₂` as the largest ratios over the ensemble's linear
/// trajectories; `C_MR` from [`evolution::estimate_cmr`] unless given.
pub fn estimate_constants(problem: &RobinStokes, tau: f64, dt: f64, ensemble: &EnsembleSpec, c_mr: Option<f64>) -> Result<Constants> {
    let c_mr = match c_mr {
        Some(c) => c,
        None => evolution::estimate_cmr(problem, ensemble, tau, dt)?.value,
    };
    let ratios: Vec<(f64, f64)> = (0..ensemble.members)
        .into_par_iter()
        .map(|k| {
            let (u0, f) = ensemble.member(problem, k);
            let traj = evolution::solve_linear(problem, &u0, &f, tau, dt)?;
            let e = evolution::e_norm(problem, &traj)?;
            let (curl3, sup6) = evolution::embedding_norms(problem.grid(), &traj)?;
            Ok(if e > 0.0 { (curl3 / e, sup6 / e) } else { (0.0, 0.0) })
        })
        .collect::<Result<_>>()?;
    let c1 = ratios.iter().map(|r| r.0).fold(0.0, f64::max);
    let c2 = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(Constants::from_parts(c_mr, c1, c2, ensemble.seed))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PicardReport {
    pub constants: Option<Constants>,
    /// ‖u₀‖_V
    pub initial_v: f64,
    /// Whether ‖u₀‖_V exceeded ε (only known with constants).
    pub above_threshold: bool,
    /// ‖a‖_E of the linear part.
    pub linear_norm: f64,
    /// ‖v_{k+1} − v_k‖_E per iteration.
    pub increments: Vec<f64>,
    /// Ratios of consecutive increments.
    pub contraction_factors: Vec<f64>,
    pub contractive: bool,
    pub converged: bool,
    /// ‖u − a − B(u, u)‖_E
    pub fixed_point_residual: f64,
    /// ‖∂ₜu + K u + grad π − N‖_{L²(0,τ,L²)} at step midpoints.
    pub rns_residual: f64,
}

/// Pressures of a trajectory, one per time node.
#[derive(Clone, Debug)]
pub struct PressureSeries {
    /// `π = p + q`, zero mean.
    pub pi: Vec<CellField>,
    pub p: Vec<CellField>,
    pub q: Vec<CellField>,
}

#[derive(Clone, Debug)]
pub struct PicardSolution {
    pub trajectory: Trajectory,
    /// The linear part `a` (`∂ₜa + A_β a = 0`, `a(0) = u₀`).
    pub linear: Trajectory,
    pub pressure: PressureSeries,
    pub report: PicardReport,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PicardOptions {
    /// Stop when ‖v_{k+1} − v_k‖_E ≤ tol·‖a‖_E.
    pub tol: f64,
    pub max_iter: usize,
    pub constants: Option<Constants>,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 30,
            constants: None,
        }
    }
}

fn combine(a: &Trajectory, w: &Trajectory) -> Trajectory {
    let mut out = a.clone();
    for (s, x) in out.states.iter_mut().zip(&w.states) {
        s.axpy(1.0, x);
    }
    out.telemetry = w.telemetry.clone();
    out
}

fn difference(problem: &RobinStokes, a: &Trajectory, b: &Trajectory) -> Result<f64> {
    let diff: Vec<FaceField> = a.states.iter().zip(&b.states).map(|(x, y)| x.sub(y)).collect();
    evolution::e_norm_of(problem, &a.grid, &diff)
}

/// Global-in-time Picard iteration `v₀ = a`, `v_{k+1} = a + B(v_k, v_k)`.
pub fn picard_solve(problem: &RobinStokes, u0: &FaceField, tau: f64, dt: f64, opts: &PicardOptions) -> Result<PicardSolution> {
    let g = problem.grid();
    let a = evolution::solve_linear(problem, u0, &Forcing::Zero, tau, dt)?;
    let linear_norm = evolution::e_norm(problem, &a)?;
    let initial_v = calculus::v_norm(g, u0)?;
    let above_threshold = opts.constants.is_some_and(|c| initial_v > c.epsilon);
    if above_threshold {
        log::warn!(
            "‖u₀‖_V = {initial_v:.3e} exceeds the smallness threshold ε = {:.3e}",
            opts.constants.map_or(f64::NAN, |c| c.epsilon)
        );
    }
    let mut report = PicardReport {
        constants: opts.constants,
        initial_v,
        above_threshold,
        linear_norm,
        increments: Vec::new(),
        contraction_factors: Vec::new(),
        contractive: true,
        converged: false,
        fixed_point_residual: f64::NAN,
        rns_residual: f64::NAN,
    };
    let mut v = a.clone();
    let mut growth = 0;
    for _ in 0..opts.max_iter.max(1) {
        let next = combine(&a, &bilinear_solve(problem, &v, &v)?);
        let inc = difference(problem, &next, &v)?;
        if let Some(&prev) = report.increments.last() {
            let factor = if prev > 0.0 { inc / prev } else { 0.0 };
            report.contraction_factors.push(factor);
            growth = if inc > prev { growth + 1 } else { 0 };
        }
        report.increments.push(inc);
        log::debug!("Picard iteration {}: increment {inc:.3e}", report.increments.len());
        v = next;
        if inc <= opts.tol * linear_norm {
            report.converged = true;
            break;
        }
        if growth >= 3 {
            report.contractive = false;
            return Err(Error::PicardDivergence(Box::new(report)));
        }
    }
    report.contractive = report.contraction_factors.iter().all(|&f| f < 1.0);

    let (w, terms) = bilinear_solve_with_terms(problem, &v, &v)?;
    let fixed = combine(&a, &w);
    report.fixed_point_residual = difference(problem, &v, &fixed)?;
    let pressure = pressure_from_terms(problem, &v, &terms)?;
    report.rns_residual = rns_residual_with(problem, &v, &pressure, &terms)?;
    let mut trajectory = v;
    trajectory.pressures = Some(pressure.pi.clone());
    Ok(PicardSolution {
        trajectory,
        linear: a,
        pressure,
        report,
    })
}

fn pressure_from_terms(problem: &RobinStokes, traj: &Trajectory, terms: &[NonlinearTerm]) -> Result<PressureSeries> {
    let q: Vec<CellField> = traj
        .states
        .par_iter()
        .zip(&traj.grid.points)
        .map(|(u, &tp)| Ok(problem.operator(tp).apply_with_potential(u)?.1.scaled(-1.0)))
        .collect::<Result<_>>()?;
    let p: Vec<CellField> = terms.iter().map(|t| t.potential.clone()).collect();
    let pi = p
        .iter()
        .zip(&q)
        .map(|(a, b)| {
            let mut s = a.add(b);
            s.remove_mean();
            s
        })
        .collect();
    Ok(PressureSeries { pi, p, q })
}

/// Pressure `π = p + q` of a trajectory (see the module notes for signs).
pub fn pressure_recover(problem: &RobinStokes, traj: &Trajectory) -> Result<PressureSeries> {
    let terms: Vec<NonlinearTerm> = (0..traj.states.len())
        .into_par_iter()
        .map(|n| {
            let u = &traj.states[n];
            nonlinear_term(&problem.operator(traj.grid.points[n]), u, u)
        })
        .collect::<Result<_>>()?;
    pressure_from_terms(problem, traj, &terms)
}

/// Kinematic pressure `π − ½|u|²` at cell centres, zero mean.
pub fn bernoulli_pressure(grid: &crate::BoxGrid, pi: &[CellField], traj: &Trajectory) -> Result<Vec<CellField>> {
    if pi.len() != traj.states.len() {
        return Err(Error::ShapeMismatch("one pressure per state expected"));
    }
    pi.iter()
        .zip(&traj.states)
        .map(|(p, u)| {
            p.check(grid)?;
            let c = calculus::faces_to_cells(grid, u);
            let mut out = p.clone();
            for_each_index(grid.cell_dims(), |_, n| {
                let e = 0.5 * (c[0].data()[n].powi(2) + c[1].data()[n].powi(2) + c[2].data()[n].powi(2));
                out.data_mut()[n] -= e;
            });
            out.remove_mean();
            Ok(out)
        })
        .collect()
}

/// ‖∂ₜu + K u + grad π − N‖_{L²(0,τ,L²)}, with the spatial terms averaged
/// over the two ends of each step (the backward-Euler update satisfies the
/// right-end version exactly) and wall-normal faces excluded.
pub fn rns_residual(problem: &RobinStokes, traj: &Trajectory, pressure: &PressureSeries) -> Result<f64> {
    let terms: Vec<NonlinearTerm> = (0..traj.states.len())
        .into_par_iter()
        .map(|n| {
            let u = &traj.states[n];
            nonlinear_term(&problem.operator(traj.grid.points[n]), u, u)
        })
        .collect::<Result<_>>()?;
    rns_residual_with(problem, traj, pressure, &terms)
}

fn rns_residual_with(problem: &RobinStokes, traj: &Trajectory, pressure: &PressureSeries, terms: &[NonlinearTerm]) -> Result<f64> {
    let g = problem.grid();
    let n = traj.states.len();
    if pressure.pi.len() != n || terms.len() != n {
        return Err(Error::ShapeMismatch("one pressure per state expected"));
    }
    // spatial part K u + grad π − N at every node
    let spatial: Vec<FaceField> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut s = problem.operator(traj.grid.points[k]).apply_raw(&traj.states[k])?;
            s.axpy(1.0, &calculus::grad(g, &pressure.pi[k])?);
            s.axpy(-1.0, &terms[k].raw);
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    for k in 0..n - 1 {
        let dt = traj.times()[k + 1] - traj.times()[k];
        let mut r = traj.states[k + 1].sub(&traj.states[k]).scaled(1.0 / dt);
        r.axpy(0.5, &spatial[k]);
        r.axpy(0.5, &spatial[k + 1]);
        r.enforce_tangent(g);
        total += dt * r.dot(&r);
    }
    Ok(total.sqrt())
}

/// Terms of the final estimate `‖u‖_{H¹H} + ‖Δ_h u‖_{L²L²} + ‖grad π‖_{L²L²} ≤ C‖u₀‖_V`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FinalEstimate {
    pub h1: f64,
    pub laplacian_l2: f64,
    pub pressure_gradient_l2: f64,
    pub initial_v: f64,
    pub ratio: Option<f64>,
}

pub fn final_estimate(problem: &RobinStokes, traj: &Trajectory, pressure: &PressureSeries) -> Result<FinalEstimate> {
    let g = problem.grid();
    let lap: Vec<f64> = traj
        .states
        .par_iter()
        .zip(&traj.grid.points)
        .map(|(u, &tp)| Ok(problem.operator(tp).apply_raw(u)?.norm()))
        .collect::<Result<_>>()?;
    let gp: Vec<f64> = pressure
        .pi
        .iter()
        .map(|p| Ok(calculus::grad(g, p)?.norm()))
        .collect::<Result<_>>()?;
    let h1 = time::h1(traj.times(), &traj.states);
    let laplacian_l2 = time::l2(traj.times(), &lap);
    let pressure_gradient_l2 = time::l2(traj.times(), &gp);
    let initial_v = calculus::v_norm(g, &traj.states[0])?;
    Ok(FinalEstimate {
        h1,
        laplacian_l2,
        pressure_gradient_l2,
        initial_v,
        ratio: (initial_v > 0.0).then(|| (h1 + laplacian_l2 + pressure_gradient_l2) / initial_v),
    })
}
