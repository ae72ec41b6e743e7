//! The friction schedule `β(t, x)` and the Robin-Stokes operator.
//!
//! `A_β` is the operator of the form
//!
//! ```text
//!   a_β(u, v) = ⟨curl u, curl v⟩ + Σ_faces |f| (β Tr u)·(Tr v)
//! ```
//!
//! on divergence-free fields with `ν·u = 0`, whose strong form is
//! `A_β u = P(curl curl u)` with `ν×curl u = βu` on the walls.
//!
//! The discrete trace in the form is the tangential velocity of the first
//! cell layer averaged to the face centre, and β enters through the
//! ghost-cell Robin closure `β_h = β(I + hβ/2)⁻¹`. This keeps the form
//! symmetric and nonnegative while making the boundary flux second-order
//! accurate. The extrapolated trace of [`calculus::trace`] is used only by
//! diagnostics.

use std::fmt;

use nalgebra::{Matrix2, Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calculus::{self, CurlClosure, Exponent};
use crate::error::{Error, Result};
use crate::fields::{FaceField, GridVector};
use crate::grid::{BoundaryFace, BoxGrid, Wall};
use crate::hodge::Projector;
use crate::linalg::{conjugate_gradient, CgOptions, CgReport};

/// Relative tolerance of the implicit step solve.
pub const STEP_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Constant,
    Linear,
}

/// One time segment `[start, end]` of a schedule. Matrices are given per
/// boundary face in the global frame, in the order of
/// [`BoxGrid::boundary_faces`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleSegment {
    pub start: f64,
    pub end: f64,
    pub interpolation: Interpolation,
    /// Hölder constant `Mᵢ` of this segment.
    pub holder_constant: f64,
    pub at_start: Vec<Matrix3<f64>>,
    /// Ignored for [`Interpolation::Constant`].
    pub at_end: Vec<Matrix3<f64>>,
}

impl ScheduleSegment {
    fn sample(&self, t: f64) -> Vec<Matrix3<f64>> {
        match self.interpolation {
            Interpolation::Constant => self.at_start.clone(),
            Interpolation::Linear => {
                let th = (t - self.start) / (self.end - self.start);
                self.at_start
                    .iter()
                    .zip(&self.at_end)
                    .map(|(a, b)| a * (1.0 - th) + b * th)
                    .collect()
            }
        }
    }
}

/// Piecewise-in-time boundary matrix β, before validation.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaSchedule {
    pub segments: Vec<ScheduleSegment>,
    /// Hölder exponent α ∈ (1/2, 1].
    pub holder_exponent: f64,
    /// Global bound `M` on the eigenvalues.
    pub bound: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Condition {
    /// `0 ≤ βξ·ξ ≤ M|ξ|²`
    Tes1,
    /// symmetry
    Tes2,
    /// `βν = λν`
    Tes3,
    Holder,
    /// Breakpoints, exponent or face count.
    Structure,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Tes1 => "TES1",
            Self::Tes2 => "TES2",
            Self::Tes3 => "TES3",
            Self::Holder => "Hölder",
            Self::Structure => "structure",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("{condition} violated{}{}: {detail}",
    .face.as_ref().map(|f| format!(" on face {f}")).unwrap_or_default(),
    .time.map(|t| format!(" at t = {t}")).unwrap_or_default())]
pub struct ScheduleViolation {
    pub condition: Condition,
    /// Wall label and tangential index of the offending face.
    pub face: Option<String>,
    pub time: Option<f64>,
    pub detail: String,
}

fn face_label(f: &BoundaryFace) -> String {
    format!("{}[{},{}]", f.wall.label(), f.tangential_index[0], f.tangential_index[1])
}

/// Global-frame matrix with tangential block `block` (along
/// `wall.tangential_axes()`) and normal eigenvalue `lambda`.
pub fn wall_frame_matrix(wall: Wall, block: Matrix2<f64>, lambda: f64) -> Matrix3<f64> {
    let t = wall.tangential_axes();
    let mut m = Matrix3::zeros();
    for a in 0..2 {
        for b in 0..2 {
            m[(t[a], t[b])] = block[(a, b)];
        }
    }
    m[(wall.axis, wall.axis)] = lambda;
    m
}

fn spectral_norm(m: &Matrix3<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(s).eigenvalues.iter().fold(0.0, |a: f64, e| a.max(e.abs()))
}

impl BetaSchedule {
    /// A schedule whose matrices come from `f(segment, at_end, face)`, with
    /// α = 1 and the tightest constants `Mᵢ`, `M` for the sampled values.
    pub fn from_fn(
        grid: &BoxGrid,
        breakpoints: &[f64],
        interpolation: Interpolation,
        f: impl Fn(usize, bool, &BoundaryFace) -> Matrix3<f64>,
    ) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidArgument("a schedule needs at least two breakpoints".into()));
        }
        let faces = grid.boundary_faces();
        let mut bound = 0.0_f64;
        let mut segments = Vec::with_capacity(breakpoints.len() - 1);
        for (i, w) in breakpoints.windows(2).enumerate() {
            let at_start: Vec<_> = faces.iter().map(|fc| f(i, false, fc)).collect();
            let at_end: Vec<_> = match interpolation {
                Interpolation::Constant => at_start.clone(),
                Interpolation::Linear => faces.iter().map(|fc| f(i, true, fc)).collect(),
            };
            let mut holder: f64 = 0.0;
            for (a, b) in at_start.iter().zip(&at_end) {
                holder = holder.max(spectral_norm(&(b - a)) / (w[1] - w[0]));
                for m in [a, b] {
                    let e = SymmetricEigen::new((m + m.transpose()) * 0.5).eigenvalues;
                    bound = bound.max(e.max());
                }
            }
            segments.push(ScheduleSegment {
                start: w[0],
                end: w[1],
                interpolation,
                holder_constant: holder,
                at_start,
                at_end,
            });
        }
        Ok(Self {
            segments,
            holder_exponent: 1.0,
            bound,
        })
    }

    /// β ≡ 0 on `[0, τ]`.
    pub fn zero(grid: &BoxGrid, tau: f64) -> Result<Self> {
        Self::scalar(grid, tau, 0.0)
    }

    /// β = b·I (λ = b) on `[0, τ]`.
    pub fn scalar(grid: &BoxGrid, tau: f64, b: f64) -> Result<Self> {
        Self::from_fn(grid, &[0.0, tau], Interpolation::Constant, |_, _, _| Matrix3::identity() * b)
    }

    /// Piecewise-constant scalar β: `values[i]` on `[breakpoints[i], breakpoints[i+1]]`.
    pub fn piecewise_scalar(grid: &BoxGrid, breakpoints: &[f64], values: &[f64]) -> Result<Self> {
        if values.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidArgument("one value per segment expected".into()));
        }
        Self::from_fn(grid, breakpoints, Interpolation::Constant, |i, _, _| Matrix3::identity() * values[i])
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.segments.iter().map(|s| s.start).collect();
        b.extend(self.segments.last().map(|s| s.end));
        b
    }

    /// Check (TES1)–(TES3) and the Hölder bound at the start, midpoint and
    /// end of every segment on every boundary face.
    pub fn validate(&self, grid: &BoxGrid) -> std::result::Result<ValidatedSchedule, ScheduleViolation> {
        let structure = |detail: String| ScheduleViolation {
            condition: Condition::Structure,
            face: None,
            time: None,
            detail,
        };
        let alpha = self.holder_exponent;
        if !(alpha > 0.5 && alpha <= 1.0) {
            return Err(ScheduleViolation {
                condition: Condition::Holder,
                face: None,
                time: None,
                detail: format!("exponent {alpha} outside (1/2, 1]"),
            });
        }
        if !(self.bound.is_finite() && self.bound >= 0.0) {
            return Err(structure(format!("bound M = {} must be finite and nonnegative", self.bound)));
        }
        if self.segments.is_empty() || self.segments[0].start != 0.0 {
            return Err(structure("the first segment must start at t = 0".into()));
        }
        let faces = grid.boundary_faces();
        for (i, seg) in self.segments.iter().enumerate() {
            if !(seg.end > seg.start) {
                return Err(structure(format!("segment {i} is empty")));
            }
            if i > 0 && seg.start != self.segments[i - 1].end {
                return Err(structure(format!("segment {i} does not start where segment {} ends", i - 1)));
            }
            let needs_end = seg.interpolation == Interpolation::Linear;
            if seg.at_start.len() != faces.len() || (needs_end && seg.at_end.len() != faces.len()) {
                return Err(structure(format!(
                    "segment {i} has {} matrices for {} boundary faces",
                    seg.at_start.len(),
                    faces.len()
                )));
            }
        }

        let tol = 1e-12 * self.bound.max(1.0);
        let mut observed_max = 0.0_f64;
        let mut segments = Vec::with_capacity(self.segments.len());
        for seg in &self.segments {
            let times = [seg.start, 0.5 * (seg.start + seg.end), seg.end];
            let samples: Vec<Vec<Matrix3<f64>>> = times.iter().map(|&t| seg.sample(t)).collect();
            for (k, face) in faces.iter().enumerate() {
                let violation = |condition, t: f64, detail: String| ScheduleViolation {
                    condition,
                    face: Some(face_label(face)),
                    time: Some(t),
                    detail,
                };
                for (s, &t) in samples.iter().zip(&times) {
                    let m = &s[k];
                    let scale = m.amax().max(1.0);
                    let asym = (m - m.transpose()).amax();
                    if asym > 1e-14 * scale {
                        return Err(violation(Condition::Tes2, t, format!("asymmetry {asym:.3e}")));
                    }
                    let n = face.wall.axis;
                    let coupling = (0..3).filter(|&j| j != n).map(|j| m[(n, j)].abs().max(m[(j, n)].abs())).fold(0.0, f64::max);
                    if coupling > 1e-14 * scale {
                        return Err(violation(
                            Condition::Tes3,
                            t,
                            format!("normal/tangential coupling {coupling:.3e}"),
                        ));
                    }
                    let e = SymmetricEigen::new(*m).eigenvalues;
                    let (lo, hi) = (e.min(), e.max());
                    if lo < -tol || hi > self.bound + tol {
                        return Err(violation(
                            Condition::Tes1,
                            t,
                            format!("eigenvalues [{lo:.6}, {hi:.6}] outside [0, {}]", self.bound),
                        ));
                    }
                    observed_max = observed_max.max(hi);
                }
                for (a, b) in [(0, 1), (1, 2), (0, 2)] {
                    let dt = times[b] - times[a];
                    let diff = spectral_norm(&(samples[b][k] - samples[a][k]));
                    let allowed = seg.holder_constant * dt.powf(alpha);
                    if diff > allowed * (1.0 + 1e-12) + 1e-14 {
                        return Err(violation(
                            Condition::Holder,
                            times[b],
                            format!("‖β(t)−β(s)‖ = {diff:.6} exceeds Mᵢ|t−s|^α = {allowed:.6}"),
                        ));
                    }
                }
            }
            let frame = |ms: &[Matrix3<f64>]| -> (Vec<Matrix2<f64>>, Vec<f64>) {
                faces
                    .iter()
                    .zip(ms)
                    .map(|(f, m)| {
                        let t = f.wall.tangential_axes();
                        let block = Matrix2::from_fn(|a, b| m[(t[a], t[b])]);
                        (block, m[(f.wall.axis, f.wall.axis)])
                    })
                    .unzip()
            };
            let (start_block, start_lambda) = frame(&seg.at_start);
            let (end_block, end_lambda) = if seg.interpolation == Interpolation::Linear {
                frame(&seg.at_end)
            } else {
                (start_block.clone(), start_lambda.clone())
            };
            segments.push(FrameSegment {
                start: seg.start,
                end: seg.end,
                interpolation: seg.interpolation,
                block: [start_block, end_block],
                lambda: [start_lambda, end_lambda],
            });
        }
        let zero = segments
            .iter()
            .all(|s| s.block.iter().all(|v| v.iter().all(|m| m.amax() == 0.0)));
        Ok(ValidatedSchedule {
            segments,
            holder_exponent: alpha,
            holder_constants: self.segments.iter().map(|s| s.holder_constant).collect(),
            bound: self.bound,
            observed_max,
            faces: faces.len(),
            zero,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
struct FrameSegment {
    start: f64,
    end: f64,
    interpolation: Interpolation,
    block: [Vec<Matrix2<f64>>; 2],
    lambda: [Vec<f64>; 2],
}

/// A time in the schedule together with the segment whose values apply.
/// At a breakpoint the two adjacent segments give the left and right limits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimePoint {
    pub segment: usize,
    pub t: f64,
}

/// A schedule that passed validation, stored in the wall frame: a
/// tangential 2×2 block and the normal eigenvalue λ per face.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidatedSchedule {
    segments: Vec<FrameSegment>,
    holder_exponent: f64,
    holder_constants: Vec<f64>,
    bound: f64,
    observed_max: f64,
    faces: usize,
    zero: bool,
}

impl ValidatedSchedule {
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.segments.iter().map(|s| s.start).collect();
        b.push(self.tau());
        b
    }

    pub fn tau(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end)
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Largest eigenvalue met while validating.
    pub fn observed_max(&self) -> f64 {
        self.observed_max
    }

    pub fn holder_exponent(&self) -> f64 {
        self.holder_exponent
    }

    pub fn holder_constants(&self) -> &[f64] {
        &self.holder_constants
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    pub fn segment_bounds(&self, i: usize) -> (f64, f64) {
        (self.segments[i].start, self.segments[i].end)
    }

    /// Right-continuous lookup: the segment with `start ≤ t < end` (the last
    /// segment includes τ).
    pub fn at(&self, t: f64) -> TimePoint {
        let n = self.segments.len();
        let segment = self.segments.iter().position(|s| t < s.end).unwrap_or(n - 1);
        TimePoint { segment, t }
    }

    /// Left-continuous lookup: the segment with `start < t ≤ end`. A
    /// backward-Euler step ending at `t` uses these values.
    pub fn left_limit(&self, t: f64) -> TimePoint {
        let n = self.segments.len();
        let segment = self.segments.iter().position(|s| t <= s.end).unwrap_or(n - 1);
        TimePoint { segment, t }
    }

    /// Tangential blocks and normal eigenvalues per face at `tp`.
    pub fn sample(&self, tp: TimePoint) -> (Vec<Matrix2<f64>>, Vec<f64>) {
        let s = &self.segments[tp.segment];
        match s.interpolation {
            Interpolation::Constant => (s.block[0].clone(), s.lambda[0].clone()),
            Interpolation::Linear => {
                let th = ((tp.t - s.start) / (s.end - s.start)).clamp(0.0, 1.0);
                let b = s.block[0].iter().zip(&s.block[1]).map(|(a, b)| a * (1.0 - th) + b * th).collect();
                let l = s.lambda[0].iter().zip(&s.lambda[1]).map(|(a, b)| a * (1.0 - th) + b * th).collect();
                (b, l)
            }
        }
    }
}

/// The grid, the Leray projector and a validated schedule: everything
/// needed to evaluate `A_β(t)`.
#[derive(Clone, Debug)]
pub struct RobinStokes {
    grid: BoxGrid,
    projector: Projector,
    schedule: ValidatedSchedule,
}

impl RobinStokes {
    pub fn new(grid: &BoxGrid, schedule: ValidatedSchedule) -> Result<Self> {
        Self::with_projector(Projector::new(grid), schedule)
    }

    pub fn with_projector(projector: Projector, schedule: ValidatedSchedule) -> Result<Self> {
        let grid = projector.grid().clone();
        if schedule.faces != grid.boundary_faces().len() {
            return Err(Error::ShapeMismatch("schedule was validated for another grid"));
        }
        Ok(Self {
            grid,
            projector,
            schedule,
        })
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn projector(&self) -> &Projector {
        &self.projector
    }

    pub fn schedule(&self) -> &ValidatedSchedule {
        &self.schedule
    }

    /// Operator at time `t` (right-continuous in `t`).
    pub fn at(&self, t: f64) -> RobinStokesOperator<'_> {
        self.operator(self.schedule.at(t))
    }

    pub fn operator(&self, tp: TimePoint) -> RobinStokesOperator<'_> {
        let (beta, _) = self.schedule.sample(tp);
        let h = self.grid.spacing();
        let faces = self.grid.boundary_faces();
        let beta_eff = faces
            .iter()
            .zip(&beta)
            .map(|(f, b)| {
                let half = 0.5 * h[f.wall.axis];
                let m = Matrix2::identity() + b * half;
                let inv = m.try_inverse().expect("I + hβ/2 is positive definite");
                let e = b * inv;
                (e + e.transpose()) * 0.5
            })
            .collect();
        let zero = beta.iter().all(|b| b.amax() == 0.0);
        RobinStokesOperator {
            problem: self,
            time: tp,
            beta,
            beta_eff,
            zero,
        }
    }
}

/// `A_β` frozen at one time point.
#[derive(Clone, Debug)]
pub struct RobinStokesOperator<'a> {
    problem: &'a RobinStokes,
    time: TimePoint,
    beta: Vec<Matrix2<f64>>,
    beta_eff: Vec<Matrix2<f64>>,
    zero: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurlL3Diagnostic {
    /// ‖curl u‖_{L³}
    pub curl_l3: f64,
    /// ‖A_β u‖_H
    pub operator_norm: f64,
    /// (‖β‖∞ + 1)‖u‖_V
    pub v_term: f64,
    /// `curl_l3 / (operator_norm + v_term)`; `None` for the zero field.
    pub ratio: Option<f64>,
}

impl<'a> RobinStokesOperator<'a> {
    pub fn grid(&self) -> &'a BoxGrid {
        &self.problem.grid
    }

    pub fn time(&self) -> TimePoint {
        self.time
    }

    pub fn projector(&self) -> &'a Projector {
        &self.problem.projector
    }

    pub fn is_zero_beta(&self) -> bool {
        self.zero
    }

    /// Tangential β blocks per boundary face.
    pub fn beta(&self) -> &[Matrix2<f64>] {
        &self.beta
    }

    /// max over faces of the spectral norm of β.
    pub fn beta_sup(&self) -> f64 {
        self.beta
            .iter()
            .map(|b| SymmetricEigen::new(*b).eigenvalues.amax())
            .fold(0.0, f64::max)
    }

    /// Reject fields that are not divergence free or not tangent to the walls.
    pub fn check_admissible(&self, u: &FaceField) -> Result<()> {
        let g = self.grid();
        u.check(g)?;
        let scale = u.max_abs();
        if u.wall_normal_max(g) > 1e-12 * scale {
            return Err(Error::Inadmissible("ν·u ≠ 0 on a wall".into()));
        }
        let hmin = g.spacing().iter().cloned().fold(f64::INFINITY, f64::min);
        let d = calculus::div(g, u)?.max_abs();
        if d > 1e-8 * scale / hmin {
            return Err(Error::Inadmissible(format!("max |div u| = {d:.3e}")));
        }
        Ok(())
    }

    /// `β_h Tr u` per boundary face.
    pub(crate) fn boundary_flux(&self, u: &FaceField) -> Vec<[f64; 2]> {
        calculus::near_wall_tangential(self.grid(), u, 0)
            .iter()
            .zip(&self.beta_eff)
            .map(|(t, b)| {
                let v = b * nalgebra::Vector2::new(t[0], t[1]);
                [v[0], v[1]]
            })
            .collect()
    }

    /// `a_β(u, v)` without admissibility checks.
    pub fn form_unchecked(&self, u: &FaceField, v: &FaceField) -> Result<f64> {
        let g = self.grid();
        let cu = calculus::curl_fe(g, u, CurlClosure::Natural)?;
        let cv = calculus::curl_fe(g, v, CurlClosure::Natural)?;
        let mut s = cu.dot(&cv);
        if !self.zero {
            let tv = calculus::near_wall_tangential(g, v, 0);
            for ((f, bu), tv) in g.boundary_faces().iter().zip(self.boundary_flux(u)).zip(tv) {
                s += f.weight * (bu[0] * tv[0] + bu[1] * tv[1]);
            }
        }
        Ok(s)
    }

    pub fn form_value(&self, u: &FaceField, v: &FaceField) -> Result<f64> {
        self.check_admissible(u)?;
        self.check_admissible(v)?;
        self.form_unchecked(u, v)
    }

    /// The unprojected Galerkin operator `K` with `⟨Ku, v⟩ = a_β(u, v)`:
    /// `curl_ef curl_fe u` plus the lifted boundary term.
    pub fn apply_raw(&self, u: &FaceField) -> Result<FaceField> {
        let g = self.grid();
        let mut out = calculus::curl_ef(g, &calculus::curl_fe(g, u, CurlClosure::Natural)?)?;
        if !self.zero {
            out.axpy(1.0, &calculus::spread_near_wall(g, &self.boundary_flux(u)));
        }
        Ok(out)
    }

    /// `A_β u = P K u`, skipping the projection when β = 0 (then `Ku` is
    /// already divergence free and tangent).
    pub fn apply_unchecked(&self, u: &FaceField) -> Result<FaceField> {
        let k = self.apply_raw(u)?;
        if self.zero {
            Ok(k)
        } else {
            self.problem.projector.apply(&k)
        }
    }

    pub fn apply(&self, u: &FaceField) -> Result<FaceField> {
        self.check_admissible(u)?;
        self.apply_unchecked(u)
    }

    /// `A_β u` together with the potential `q` of `K u = A_β u + grad q`.
    pub fn apply_with_potential(&self, u: &FaceField) -> Result<(FaceField, crate::fields::CellField)> {
        let pr = self.problem.projector.project(&self.apply_raw(u)?)?;
        Ok((pr.field, pr.potential))
    }

    /// max over wall faces of `|ν×curl u − β Tr u|`, with `ν×curl u` taken
    /// as the one-sided second-order inward derivative of the tangential
    /// velocity.
    pub fn boundary_residual(&self, u: &FaceField) -> Result<f64> {
        let g = self.grid();
        u.check(g)?;
        if !g.has_wall() {
            return Err(Error::NoBoundary);
        }
        let h = g.spacing();
        let rows = [0, 1, 2].map(|r| calculus::near_wall_tangential(g, u, r));
        let tr = calculus::trace(g, u)?;
        let mut worst = 0.0_f64;
        for (k, f) in g.boundary_faces().iter().enumerate() {
            let hn = h[f.wall.axis];
            let b = self.beta[k] * nalgebra::Vector2::from(tr[k].tangential);
            let mut r2 = 0.0;
            for c in 0..2 {
                let dn = (-2.0 * rows[0][k][c] + 3.0 * rows[1][k][c] - rows[2][k][c]) / hn;
                r2 += (dn - b[c]).powi(2);
            }
            worst = worst.max(r2.sqrt());
        }
        Ok(worst)
    }

    /// One backward-Euler step: solve `(I + dt·A_β) u = P(u_prev + dt·rhs)`
    /// by conjugate gradients on the divergence-free subspace.
    pub fn semigroup_step(&self, dt: f64, rhs: Option<&FaceField>, u_prev: &FaceField) -> Result<(FaceField, CgReport)> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let g = self.grid();
        u_prev.check(g)?;
        let mut b = u_prev.clone();
        if let Some(f) = rhs {
            f.check(g)?;
            b.axpy(dt, f);
        }
        let b = self.problem.projector.apply(&b)?;
        let opts = CgOptions {
            rel_tol: STEP_TOL,
            max_iter: 10 * b.len(),
        };
        let apply = |v: &FaceField| -> Result<FaceField> {
            let mut out = self.apply_unchecked(v)?;
            out.scale(dt);
            out.axpy(1.0, v);
            Ok(out)
        };
        conjugate_gradient("Robin-Stokes step", apply, |r: &FaceField| r.clone(), &b, Some(b.clone()), &opts)
    }

    pub fn curl_l3_diagnostic(&self, u: &FaceField) -> Result<CurlL3Diagnostic> {
        let g = self.grid();
        let curl_l3 = calculus::lp_norm_edges(g, &calculus::curl_fe(g, u, CurlClosure::Natural)?, Exponent::Three)?;
        let operator_norm = self.apply_unchecked(u)?.norm();
        let v_term = (self.beta_sup() + 1.0) * calculus::v_norm(g, u)?;
        let denom = operator_norm + v_term;
        Ok(CurlL3Diagnostic {
            curl_l3,
            operator_norm,
            v_term,
            ratio: (denom > 0.0).then(|| curl_l3 / denom),
        })
    }
}
