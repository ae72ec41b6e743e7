//! Backward-Euler solution of `∂ₜu + A_{β(t)}u = f` and the
//! maximal-regularity diagnostics built on it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::calculus::{self, time, CurlClosure};
use crate::error::{Error, Result};
use crate::fields::{CellField, FaceField, GridVector};
use crate::grid::BoxGrid;
use crate::presets;
use crate::robin_stokes::{RobinStokes, TimePoint};

/// Time grid `0 = s₀ < … < s_N = τ` containing every breakpoint of the
/// schedule. `points[n]` selects the schedule values used at `sₙ`: the
/// left limit for `n ≥ 1` (the step ending there), the right limit at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    pub times: Vec<f64>,
    pub points: Vec<TimePoint>,
}

impl TimeGrid {
    /// Uniform steps of size `dt` on every segment of `[0, τ]`.
    pub fn new(problem: &RobinStokes, tau: f64, dt: f64) -> Result<Self> {
        let sched = problem.schedule();
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        if !(tau > 0.0 && tau <= sched.tau() * (1.0 + 1e-12)) {
            return Err(Error::InvalidArgument(format!(
                "final time {tau} outside the schedule horizon (0, {}]",
                sched.tau()
            )));
        }
        let mut times = vec![0.0];
        let mut points = vec![sched.at(0.0)];
        for i in 0..sched.segment_count() {
            let (start, end) = sched.segment_bounds(i);
            if start >= tau * (1.0 - 1e-12) {
                break;
            }
            let end = end.min(tau);
            let len = end - start;
            let m = (len / dt).round();
            if m < 1.0 || (m * dt - len).abs() > 1e-9 * len.max(dt) {
                return Err(Error::MisalignedStep { dt, start, end });
            }
            let m = m as usize;
            for k in 1..=m {
                let t = if k == m { end } else { start + len * k as f64 / m as f64 };
                times.push(t);
                points.push(TimePoint { segment: i, t });
            }
        }
        Ok(Self { times, points })
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn tau(&self) -> f64 {
        *self.times.last().expect("nonempty time grid")
    }
}

/// Body force, evaluated on the nodes of a [`TimeGrid`].
#[derive(Clone, Debug, PartialEq)]
pub enum Forcing {
    Zero,
    /// One field per time-grid node.
    Sampled(Vec<FaceField>),
    /// `Σ_j cos(ω_j t + φ_j) F_j(x)`.
    Separable(Vec<ForcingMode>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForcingMode {
    pub field: FaceField,
    pub frequency: f64,
    pub phase: f64,
}

impl Forcing {
    /// `f(sₙ)`, or `None` when it vanishes.
    pub fn at(&self, n: usize, t: f64) -> Option<FaceField> {
        match self {
            Self::Zero => None,
            Self::Sampled(v) => Some(v[n].clone()),
            Self::Separable(modes) => {
                let mut it = modes.iter();
                let first = it.next()?;
                let mut f = first.field.scaled((first.frequency * t + first.phase).cos());
                for m in it {
                    f.axpy((m.frequency * t + m.phase).cos(), &m.field);
                }
                Some(f)
            }
        }
    }

    /// ‖f‖_{L²(0,τ,H)} on the time grid.
    pub fn l2_norm(&self, grid: &TimeGrid) -> f64 {
        let norms: Vec<f64> = grid
            .times
            .iter()
            .enumerate()
            .map(|(n, &t)| self.at(n, t).map_or(0.0, |f| f.norm()))
            .collect();
        time::l2(&grid.times, &norms)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepTelemetry {
    pub iterations: usize,
    pub relative_residual: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<FaceField>,
    pub pressures: Option<Vec<CellField>>,
    /// One entry per step (`states.len() − 1`).
    pub telemetry: Vec<StepTelemetry>,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.grid.times
    }

    pub fn last(&self) -> &FaceField {
        self.states.last().expect("nonempty trajectory")
    }
}

/// Backward Euler: `uⁿ⁺¹ = (I + Δt A_β(sₙ₊₁))⁻¹ P(uⁿ + Δt fⁿ⁺¹)`.
pub fn solve_linear(problem: &RobinStokes, u0: &FaceField, forcing: &Forcing, tau: f64, dt: f64) -> Result<Trajectory> {
    let tg = TimeGrid::new(problem, tau, dt)?;
    solve_on(problem, u0, forcing, tg)
}

/// [`solve_linear`] on a prescribed time grid.
pub fn solve_on(problem: &RobinStokes, u0: &FaceField, forcing: &Forcing, tg: TimeGrid) -> Result<Trajectory> {
    problem.at(0.0).check_admissible(u0)?;
    if let Forcing::Sampled(v) = forcing {
        if v.len() != tg.times.len() {
            return Err(Error::ShapeMismatch("one forcing sample per time-grid node expected"));
        }
    }
    let mut states = Vec::with_capacity(tg.times.len());
    let mut telemetry = Vec::with_capacity(tg.steps());
    let mut u = u0.clone();
    u.enforce_tangent(problem.grid());
    states.push(u.clone());
    for n in 0..tg.steps() {
        let dt = tg.times[n + 1] - tg.times[n];
        let f = forcing.at(n + 1, tg.times[n + 1]);
        let (next, rep) = problem.operator(tg.points[n + 1]).semigroup_step(dt, f.as_ref(), &u)?;
        telemetry.push(StepTelemetry {
            iterations: rep.iterations,
            relative_residual: rep.relative_residual,
        });
        u = next;
        states.push(u.clone());
    }
    Ok(Trajectory {
        grid: tg,
        states,
        pressures: None,
        telemetry,
    })
}

/// `‖A_{β(sₙ)}u(sₙ)‖_H` at every node.
pub fn operator_norms(problem: &RobinStokes, grid: &TimeGrid, states: &[FaceField]) -> Result<Vec<f64>> {
    states
        .par_iter()
        .zip(&grid.points)
        .map(|(u, &tp)| Ok(problem.operator(tp).apply_unchecked(u)?.norm()))
        .collect()
}

/// `‖u‖_E = ‖u‖_{H¹(0,τ,H)} + ‖A u‖_{L²(0,τ,H)} + ‖u(0)‖_V`.
pub fn e_norm(problem: &RobinStokes, traj: &Trajectory) -> Result<f64> {
    e_norm_of(problem, &traj.grid, &traj.states)
}

/// [`e_norm`] of a sequence of states on `grid`.
pub fn e_norm_of(problem: &RobinStokes, grid: &TimeGrid, states: &[FaceField]) -> Result<f64> {
    if states.len() != grid.times.len() {
        return Err(Error::ShapeMismatch("one state per time-grid node expected"));
    }
    let a = time::l2(&grid.times, &operator_norms(problem, grid, states)?);
    Ok(time::h1(&grid.times, states) + a + calculus::v_norm(problem.grid(), &states[0])?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxRegReport {
    /// ‖u‖_{H¹(0,τ,H)}
    pub h1: f64,
    /// ‖A_{β(·)}u(·)‖_{L²(0,τ,H)}
    pub operator_l2: f64,
    /// ‖f‖_{L²(0,τ,H)}
    pub forcing_l2: f64,
    /// ‖u₀‖_V
    pub initial_v: f64,
    /// `(h1 + operator_l2) / (forcing_l2 + initial_v)`; `None` for zero data.
    pub ratio: Option<f64>,
    /// ‖u‖_{L∞(0,τ,V)}
    pub linf_v: f64,
    /// Continuity constant: max `a_β(u,u)/‖u‖²_V` over the states.
    pub continuity: f64,
    /// Coercivity `δ_c` in `a_β(u,u) + μ‖u‖² ≥ δ_c‖u‖²_V`.
    pub coercivity: f64,
    pub shift: f64,
    /// min `(a_β(u,u) + μ‖u‖²)/‖u‖²_V` over the states.
    pub coercivity_observed: f64,
}

pub fn max_reg_report(problem: &RobinStokes, traj: &Trajectory, forcing: &Forcing) -> Result<MaxRegReport> {
    let g = problem.grid();
    let h1 = time::h1(traj.times(), &traj.states);
    let operator_l2 = time::l2(traj.times(), &operator_norms(problem, &traj.grid, &traj.states)?);
    let forcing_l2 = forcing.l2_norm(&traj.grid);
    let initial_v = calculus::v_norm(g, &traj.states[0])?;
    let denom = forcing_l2 + initial_v;
    let mut linf_v = 0.0_f64;
    let mut continuity = 0.0_f64;
    let mut coercivity_observed = f64::INFINITY;
    let shift = 1.0;
    for (u, &tp) in traj.states.iter().zip(&traj.grid.points) {
        let v = calculus::v_norm(g, u)?;
        linf_v = linf_v.max(v);
        if v > 0.0 {
            let a = problem.operator(tp).form_unchecked(u, u)?;
            continuity = continuity.max(a / (v * v));
            coercivity_observed = coercivity_observed.min((a + shift * u.dot(u)) / (v * v));
        }
    }
    Ok(MaxRegReport {
        h1,
        operator_l2,
        forcing_l2,
        initial_v,
        ratio: (denom > 0.0).then(|| (h1 + operator_l2) / denom),
        linf_v,
        continuity,
        coercivity: 0.5,
        shift,
        coercivity_observed: if coercivity_observed.is_finite() { coercivity_observed } else { 0.0 },
    })
}

/// Closed-form ratio for `u = e^{−λt}u₀` with `A u₀ = λu₀`, `‖u₀‖_V` from
/// `‖curl u₀‖² = λ‖u₀‖²` and no forcing.
pub fn eigenfunction_ratio(lambda: f64, tau: f64) -> f64 {
    let s = (1.0 - (-2.0 * lambda * tau).exp()) / (2.0 * lambda);
    (((1.0 + lambda * lambda) * s).sqrt() + lambda * s.sqrt()) / (1.0 + lambda.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinfVReport {
    /// max over steps of ‖u(sₙ)‖_V
    pub max: f64,
    pub argmax_time: f64,
    /// `max / (‖u(0)‖²_V + ‖f‖²)^{1/2}`; `None` for zero data.
    pub ratio: Option<f64>,
}

pub fn linf_v_report(grid: &BoxGrid, traj: &Trajectory, forcing_l2: f64) -> Result<LinfVReport> {
    let mut max = 0.0_f64;
    let mut argmax_time = 0.0;
    for (u, &t) in traj.states.iter().zip(traj.times()) {
        let v = calculus::v_norm(grid, u)?;
        if v > max {
            max = v;
            argmax_time = t;
        }
    }
    let v0 = calculus::v_norm(grid, &traj.states[0])?;
    let denom = (v0 * v0 + forcing_l2 * forcing_l2).sqrt();
    Ok(LinfVReport {
        max,
        argmax_time,
        ratio: (denom > 0.0).then(|| max / denom),
    })
}

/// Largest relative H-norm gap between the trajectory and its Duhamel
/// reconstruction
///
/// ```text
///   u(t) = e^{−tA(t)}u₀ + ∫₀ᵗ e^{−(t−s)A(t)} [(A(t) − A(s))u(s) + f(s)] ds
/// ```
///
/// at `n_check` evenly spread nodes. `e^{−sA(t)}` is replaced by powers of
/// the frozen backward-Euler resolvent and both integrals by the
/// trapezoidal rule on the trajectory's time grid, each subinterval using
/// the operator of its own schedule segment at both ends.
pub fn duhamel_residual(problem: &RobinStokes, traj: &Trajectory, forcing: &Forcing, n_check: usize) -> Result<f64> {
    let n = traj.grid.steps();
    if n == 0 || n_check == 0 {
        return Ok(0.0);
    }
    let checks: Vec<usize> = (1..=n_check.min(n)).map(|k| (k * n).div_ceil(n_check.min(n))).collect();
    let results: Vec<Result<f64>> = checks
        .par_iter()
        .map(|&m| duhamel_at(problem, traj, forcing, m))
        .collect();
    results.into_iter().try_fold(0.0_f64, |acc, r| Ok(acc.max(r?)))
}

fn duhamel_at(problem: &RobinStokes, traj: &Trajectory, forcing: &Forcing, m: usize) -> Result<f64> {
    let tg = &traj.grid;
    let frozen = problem.operator(tg.points[m]);
    let a_frozen: Vec<FaceField> = (0..=m)
        .map(|j| frozen.apply_unchecked(&traj.states[j]))
        .collect::<Result<_>>()?;
    // integrand at node j evaluated with the operator of `segment`
    let integrand = |j: usize, segment: usize| -> Result<FaceField> {
        let tp = TimePoint { segment, t: tg.times[j] };
        let mut g = a_frozen[j].sub(&problem.operator(tp).apply_unchecked(&traj.states[j])?);
        if let Some(f) = forcing.at(j, tg.times[j]) {
            g.axpy(1.0, &problem.projector().apply(&f)?);
        }
        Ok(g)
    };
    let mut acc = traj.states[0].clone();
    let dt0 = tg.times[1] - tg.times[0];
    acc.axpy(0.5 * dt0, &integrand(0, tg.points[1].segment)?);
    for k in 0..m {
        let dt = tg.times[k + 1] - tg.times[k];
        let (next, _) = frozen.semigroup_step(dt, None, &acc)?;
        acc = next;
        acc.axpy(0.5 * dt, &integrand(k + 1, tg.points[k + 1].segment)?);
        if k + 1 < m {
            let dt_next = tg.times[k + 2] - tg.times[k + 1];
            acc.axpy(0.5 * dt_next, &integrand(k + 1, tg.points[k + 2].segment)?);
        }
    }
    let u = &traj.states[m];
    let norm = u.norm();
    let diff = acc.sub(u).norm();
    Ok(if norm > 0.0 { diff / norm } else { diff })
}

/// Seeded random smooth data for ensemble studies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleSpec {
    pub members: usize,
    pub seed: u64,
    /// H-norm of `u₀`.
    pub initial_amplitude: f64,
    /// H-norm of each spatial forcing mode.
    pub forcing_amplitude: f64,
    pub forcing_modes: usize,
    pub max_wavenumber: usize,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            members: 10,
            seed: 0,
            initial_amplitude: 1.0,
            forcing_amplitude: 1.0,
            forcing_modes: 2,
            max_wavenumber: 2,
        }
    }
}

impl EnsembleSpec {
    /// `(u₀, f)` of member `k`; independent of the grid resolution up to
    /// sampling.
    pub fn member(&self, problem: &RobinStokes, k: usize) -> (FaceField, Forcing) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k as u64);
        let g = problem.grid();
        let p = problem.projector();
        let u0 = presets::random_smooth(g, p, &mut rng, self.max_wavenumber).scaled(self.initial_amplitude);
        let modes: Vec<ForcingMode> = (0..self.forcing_modes)
            .map(|_| ForcingMode {
                field: presets::random_smooth(g, p, &mut rng, self.max_wavenumber).scaled(self.forcing_amplitude),
                frequency: rng.gen_range(0.0..2.0 * std::f64::consts::PI),
                phase: rng.gen_range(0.0..2.0 * std::f64::consts::PI),
            })
            .collect();
        let forcing = if modes.is_empty() || self.forcing_amplitude == 0.0 {
            Forcing::Zero
        } else {
            Forcing::Separable(modes)
        };
        (u0, forcing)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CmrEstimate {
    /// Largest ratio over the ensemble.
    pub value: f64,
    /// Ratio per member, in member order.
    pub ratios: Vec<f64>,
    pub seed: u64,
}

/// Empirical `C_MR`: the largest maximal-regularity ratio over a seeded
/// ensemble of random smooth `(f, u₀)`. Members run in parallel.
pub fn estimate_cmr(problem: &RobinStokes, ensemble: &EnsembleSpec, tau: f64, dt: f64) -> Result<CmrEstimate> {
    let ratios: Vec<Result<f64>> = (0..ensemble.members)
        .into_par_iter()
        .map(|k| {
            let (u0, f) = ensemble.member(problem, k);
            let traj = solve_linear(problem, &u0, &f, tau, dt)?;
            Ok(max_reg_report(problem, &traj, &f)?.ratio.unwrap_or(0.0))
        })
        .collect();
    let ratios: Vec<f64> = ratios.into_iter().collect::<Result<_>>()?;
    Ok(CmrEstimate {
        value: ratios.iter().cloned().fold(0.0, f64::max),
        ratios,
        seed: ensemble.seed,
    })
}

/// `‖curl u‖_{L²(0,τ,L³)}` and `‖u‖_{L∞(0,τ,L⁶)}` of a trajectory.
pub fn embedding_norms(grid: &BoxGrid, traj: &Trajectory) -> Result<(f64, f64)> {
    let mut curl3 = Vec::with_capacity(traj.states.len());
    let mut sup6 = 0.0_f64;
    for u in &traj.states {
        let c = calculus::curl_fe(grid, u, CurlClosure::Natural)?;
        curl3.push(calculus::lp_norm_edges(grid, &c, calculus::Exponent::Three)?);
        sup6 = sup6.max(calculus::lp_norm(grid, u, calculus::Exponent::Six)?);
    }
    Ok((time::l2(traj.times(), &curl3), sup6))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::AxisKind::*;
    use crate::robin_stokes::BetaSchedule;
    use std::f64::consts::PI;

    fn tg_problem(n: usize) -> (RobinStokes, FaceField) {
        let g = BoxGrid::new([PI, PI, 1.0], [n, n, 1], [Wall, Wall, Periodic]).unwrap();
        let s = BetaSchedule::zero(&g, 1.0).unwrap().validate(&g).unwrap();
        let u = presets::taylor_green(&g, 1.0);
        (RobinStokes::new(&g, s).unwrap(), u)
    }

    fn channel(beta: &[f64], breaks: &[f64]) -> RobinStokes {
        let g = BoxGrid::new([1.0, 1.0, 1.0], [4, 4, 8], [Periodic, Periodic, Wall]).unwrap();
        let s = BetaSchedule::piecewise_scalar(&g, breaks, beta).unwrap().validate(&g).unwrap();
        RobinStokes::new(&g, s).unwrap()
    }

    #[test]
    fn time_grid_hits_breakpoints() {
        let pb = channel(&[1.0, 2.0, 0.5], &[0.0, 0.3, 0.5, 1.0]);
        let tg = TimeGrid::new(&pb, 1.0, 0.1).unwrap();
        assert_eq!(tg.steps(), 10);
        for b in [0.3, 0.5, 1.0] {
            assert!(tg.times.contains(&b));
        }
        let k = tg.times.iter().position(|&t| t == 0.3).unwrap();
        assert_eq!(tg.points[k].segment, 0);
        assert_eq!(tg.points[k + 1].segment, 1);
        assert!(matches!(TimeGrid::new(&pb, 1.0, 0.07), Err(Error::MisalignedStep { .. })));
        assert_eq!(TimeGrid::new(&pb, 0.4, 0.1).unwrap().tau(), 0.4);
        assert!(TimeGrid::new(&pb, 2.0, 0.1).is_err());
    }

    #[test]
    fn zero_data_stays_zero() {
        let pb = channel(&[1.0], &[0.0, 1.0]);
        let u0 = FaceField::zeros(pb.grid());
        let traj = solve_linear(&pb, &u0, &Forcing::Zero, 1.0, 0.1).unwrap();
        assert!(traj.states.iter().all(|u| u.max_abs() == 0.0));
        let rep = max_reg_report(&pb, &traj, &Forcing::Zero).unwrap();
        assert_eq!(rep.ratio, None);
        assert_eq!(linf_v_report(pb.grid(), &traj, 0.0).unwrap().max, 0.0);
        assert_eq!(duhamel_residual(&pb, &traj, &Forcing::Zero, 3).unwrap(), 0.0);
    }

    #[test]
    fn inadmissible_initial_data_is_rejected() {
        let pb = channel(&[1.0], &[0.0, 1.0]);
        let u0 = FaceField::from_fn(pb.grid(), |_, x| x[2]);
        assert!(solve_linear(&pb, &u0, &Forcing::Zero, 1.0, 0.1).is_err());
    }

    #[test]
    fn eigenfunction_decays_like_the_scalar_scheme() {
        let (pb, u0) = tg_problem(16);
        let lam = presets::taylor_green_eigenvalue(pb.grid());
        let dt = 0.05;
        let traj = solve_linear(&pb, &u0, &Forcing::Zero, 0.5, dt).unwrap();
        let expect = (1.0 + lam * dt).powi(-10) * u0.norm();
        assert!((traj.last().norm() - expect).abs() < 1e-9 * expect);
        let lv = linf_v_report(pb.grid(), &traj, 0.0).unwrap();
        assert_eq!(lv.argmax_time, 0.0);
    }

    #[test]
    fn energy_identity_holds_per_step() {
        let pb = channel(&[0.5, 2.0], &[0.0, 0.5, 1.0]);
        let spec = EnsembleSpec { members: 1, seed: 9, ..Default::default() };
        let (u0, f) = spec.member(&pb, 0);
        let traj = solve_linear(&pb, &u0, &f, 1.0, 0.05).unwrap();
        for n in 0..traj.grid.steps() {
            let (u, w) = (&traj.states[n], &traj.states[n + 1]);
            let dt = traj.times()[n + 1] - traj.times()[n];
            let a = pb.operator(traj.grid.points[n + 1]).form_unchecked(w, w).unwrap();
            let fp = pb.projector().apply(&f.at(n + 1, traj.times()[n + 1]).unwrap()).unwrap();
            let lhs = w.dot(w) - u.dot(u) + w.sub(u).dot(&w.sub(u)) + 2.0 * dt * a;
            let rhs = 2.0 * dt * fp.dot(w);
            assert!((lhs - rhs).abs() <= 1e-9 * w.dot(w).max(u.dot(u)), "step {n}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn unforced_norm_is_nonincreasing() {
        let pb = channel(&[0.0, 3.0], &[0.0, 0.5, 1.0]);
        let spec = EnsembleSpec { members: 1, seed: 2, forcing_modes: 0, ..Default::default() };
        let (u0, f) = spec.member(&pb, 0);
        for dt in [0.5, 0.1] {
            let traj = solve_linear(&pb, &u0, &f, 1.0, dt).unwrap();
            for w in traj.states.windows(2) {
                assert!(w[1].norm() <= w[0].norm());
            }
        }
    }

    #[test]
    fn splitting_a_segment_changes_nothing() {
        let one = channel(&[1.5], &[0.0, 1.0]);
        let two = channel(&[1.5, 1.5], &[0.0, 0.4, 1.0]);
        let spec = EnsembleSpec { members: 1, seed: 4, ..Default::default() };
        let (u0, f) = spec.member(&one, 0);
        let a = solve_linear(&one, &u0, &f, 1.0, 0.1).unwrap();
        let b = solve_linear(&two, &u0, &f, 1.0, 0.1).unwrap();
        assert!(a.last().sub(b.last()).norm() < 1e-9 * a.last().norm());
    }

    #[test]
    fn max_reg_ratio_of_eigenfunction_matches_closed_form() {
        let (pb, u0) = tg_problem(32);
        let lam = presets::taylor_green_eigenvalue(pb.grid());
        let traj = solve_linear(&pb, &u0, &Forcing::Zero, 0.5, 0.002).unwrap();
        let rep = max_reg_report(&pb, &traj, &Forcing::Zero).unwrap();
        let exact = eigenfunction_ratio(lam, 0.5);
        assert!((rep.ratio.unwrap() / exact - 1.0).abs() < 0.05);
        assert!((rep.continuity - lam / (1.0 + lam.sqrt()).powi(2)).abs() < 1e-8);
        assert!(rep.coercivity_observed >= rep.coercivity);
    }

    #[test]
    fn duhamel_residual_vanishes_for_frozen_unforced_problem() {
        let pb = channel(&[1.0], &[0.0, 1.0]);
        let spec = EnsembleSpec { members: 1, seed: 1, forcing_modes: 0, ..Default::default() };
        let (u0, f) = spec.member(&pb, 0);
        let traj = solve_linear(&pb, &u0, &f, 1.0, 0.1).unwrap();
        assert!(duhamel_residual(&pb, &traj, &f, 4).unwrap() < 1e-9);
    }

    #[test]
    fn cmr_estimate_is_deterministic_and_dominates_members() {
        let pb = channel(&[1.0], &[0.0, 1.0]);
        let spec = EnsembleSpec { members: 3, seed: 17, ..Default::default() };
        let a = estimate_cmr(&pb, &spec, 0.5, 0.1).unwrap();
        let b = estimate_cmr(&pb, &spec, 0.5, 0.1).unwrap();
        assert_eq!(a, b);
        assert!(a.ratios.iter().all(|&r| r <= a.value && r > 0.0));
    }
}
