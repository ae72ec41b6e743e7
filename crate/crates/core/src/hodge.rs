//! Leray projection and the Hodge Laplacians.
//!
//! `L²` velocity fields split orthogonally into `H` (divergence free,
//! `ν·u = 0`) and gradients `G`. [`Projector::project`] computes
//! `Pu = u − grad p` with `div grad p = div u` under the Neumann closure of
//! [`calculus::grad`].
//!
//! The Hodge Laplacians come from the forms `⟨div u, div v⟩ + ⟨curl u, curl v⟩`:
//! [`B0`] on face fields with `ν·u = 0` (tangential vorticity natural),
//! [`B1`] on edge fields with `ν×ω = 0` (wall-node divergence natural). With
//! these closures `curl_fe ∘ B₀ = B₁ ∘ curl_fe` holds exactly, so the two
//! resolvents commute with the discrete curl up to solver tolerance.

use std::f64::consts::PI;

use crate::calculus::{self, CurlClosure};
use crate::error::{Error, Result};
use crate::fields::{for_each_index, CellField, EdgeField, FaceField, GridVector};
use crate::grid::BoxGrid;
use crate::linalg::{conjugate_gradient, CgOptions};

/// Relative tolerance of the resolvent solves.
pub const RESOLVENT_TOL: f64 = 1e-11;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PoissonSolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    /// Mean removed from the right-hand side before solving.
    pub mean_shift: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PoissonMethod {
    /// Direct solve in the eigenbasis of the separable Laplacian.
    Spectral,
    /// Jacobi-preconditioned conjugate gradients on the zero-mean subspace.
    ConjugateGradient(CgOptions),
}

/// Orthonormal eigenbasis of the 1D cell-centred Laplacian along one axis.
#[derive(Clone, Debug)]
struct AxisBasis {
    n: usize,
    /// `q[i * n + m]`: mode `m` at cell `i`.
    q: Vec<f64>,
    /// Eigenvalues of `−∂²` (nonnegative).
    eig: Vec<f64>,
}

impl AxisBasis {
    fn new(n: usize, h: f64, wall: bool) -> Self {
        let mut q = vec![0.0; n * n];
        let mut eig = vec![0.0; n];
        let nf = n as f64;
        if wall {
            for m in 0..n {
                let c = if m == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                for i in 0..n {
                    q[i * n + m] = c * (PI * m as f64 * (i as f64 + 0.5) / nf).cos();
                }
                eig[m] = (2.0 * (PI * m as f64 / (2.0 * nf)).sin() / h).powi(2);
            }
        } else {
            // real Fourier modes: 1, cos/sin pairs, and (−1)^i for even n
            let mut m = 0;
            let mut push = |k: usize, f: &dyn Fn(usize) -> f64, q: &mut Vec<f64>, m: &mut usize| {
                for i in 0..n {
                    q[i * n + *m] = f(i);
                }
                eig[*m] = (2.0 * (PI * k as f64 / nf).sin() / h).powi(2);
                *m += 1;
            };
            push(0, &|_| (1.0 / nf).sqrt(), &mut q, &mut m);
            for k in 1..n.div_ceil(2) {
                let w = 2.0 * PI * k as f64 / nf;
                let c = (2.0 / nf).sqrt();
                push(k, &|i| c * (w * i as f64).cos(), &mut q, &mut m);
                push(k, &|i| c * (w * i as f64).sin(), &mut q, &mut m);
            }
            if n % 2 == 0 && n > 1 {
                push(n / 2, &|i| if i % 2 == 0 { 1.0 } else { -1.0 } / nf.sqrt(), &mut q, &mut m);
            }
        }
        Self { n, q, eig }
    }

    /// Apply `Qᵀ` (forward) or `Q` along `axis` of a flat array.
    fn transform(&self, data: &mut [f64], dims: [usize; 3], axis: usize, forward: bool) {
        let n = self.n;
        if n == 1 {
            return;
        }
        let stride = match axis {
            0 => 1,
            1 => dims[0],
            _ => dims[0] * dims[1],
        };
        let mut line = vec![0.0; n];
        let mut out = vec![0.0; n];
        let mut base_dims = dims;
        base_dims[axis] = 1;
        for_each_index(base_dims, |p, _| {
            let base = p[0] + dims[0] * (p[1] + dims[1] * p[2]);
            for i in 0..n {
                line[i] = data[base + i * stride];
            }
            if forward {
                out.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..n {
                    let li = line[i];
                    let row = &self.q[i * n..(i + 1) * n];
                    for (o, qm) in out.iter_mut().zip(row) {
                        *o += qm * li;
                    }
                }
            } else {
                for i in 0..n {
                    let row = &self.q[i * n..(i + 1) * n];
                    out[i] = row.iter().zip(&line).map(|(a, b)| a * b).sum();
                }
            }
            for i in 0..n {
                data[base + i * stride] = out[i];
            }
        });
    }
}

#[derive(Clone, Debug)]
struct SpectralPoisson {
    dims: [usize; 3],
    axes: [AxisBasis; 3],
}

impl SpectralPoisson {
    fn new(grid: &BoxGrid) -> Self {
        let n = grid.cells();
        let h = grid.spacing();
        Self {
            dims: n,
            axes: [0, 1, 2].map(|a| AxisBasis::new(n[a], h[a], grid.is_wall(a))),
        }
    }

    /// Zero-mean solution of `−Δ_h p = r`.
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut data = rhs.to_vec();
        for a in 0..3 {
            self.axes[a].transform(&mut data, self.dims, a, true);
        }
        for_each_index(self.dims, |p, n| {
            let e = self.axes[0].eig[p[0]] + self.axes[1].eig[p[1]] + self.axes[2].eig[p[2]];
            data[n] = if p == [0, 0, 0] { 0.0 } else { data[n] / e };
        });
        for a in 0..3 {
            self.axes[a].transform(&mut data, self.dims, a, false);
        }
        data
    }
}

/// Result of a Leray projection.
#[derive(Clone, Debug)]
pub struct Projection {
    /// `Pu`: divergence free with `ν·Pu = 0`.
    pub field: FaceField,
    /// Zero-mean potential with `u = Pu + grad p` (away from wall faces).
    pub potential: CellField,
    pub report: PoissonSolveReport,
}

/// Leray projector for a fixed grid; immutable and shareable across threads.
#[derive(Clone, Debug)]
pub struct Projector {
    grid: BoxGrid,
    method: PoissonMethod,
    spectral: Option<SpectralPoisson>,
}

impl Projector {
    pub fn new(grid: &BoxGrid) -> Self {
        Self::with_method(grid, PoissonMethod::Spectral)
    }

    pub fn with_method(grid: &BoxGrid, method: PoissonMethod) -> Self {
        let spectral = matches!(method, PoissonMethod::Spectral).then(|| SpectralPoisson::new(grid));
        Self {
            grid: grid.clone(),
            method,
            spectral,
        }
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    /// Zero-mean `p` with `div grad p = rhs − mean(rhs)`.
    pub fn solve_poisson(&self, rhs: &CellField) -> Result<(CellField, PoissonSolveReport)> {
        let g = &self.grid;
        rhs.check(g)?;
        let mut r = rhs.clone();
        let mean_shift = r.remove_mean();
        let r_norm = r.norm();
        let mut report = PoissonSolveReport {
            mean_shift,
            ..Default::default()
        };
        if r_norm == 0.0 {
            return Ok((CellField::zeros(g), report));
        }
        // solve −Δp = −r (positive semidefinite form)
        r.scale(-1.0);
        let p = match (&self.method, &self.spectral) {
            (PoissonMethod::Spectral, Some(sp)) => CellField::from_values(g, &sp.solve(r.data()))?,
            (PoissonMethod::ConjugateGradient(opts), _) => {
                let diag = neumann_diagonal(g);
                let apply = |p: &CellField| -> Result<CellField> {
                    Ok(calculus::div(g, &calculus::grad(g, p)?)?.scaled(-1.0))
                };
                let precondition = |res: &CellField| {
                    let mut z = res.clone();
                    for (v, d) in z.data_mut().iter_mut().zip(&diag) {
                        *v /= d;
                    }
                    z.remove_mean();
                    z
                };
                let (mut p, rep) = conjugate_gradient("Poisson CG", apply, precondition, &r, None, opts)?;
                p.remove_mean();
                report.iterations = rep.iterations;
                p
            }
            _ => unreachable!("spectral basis is built with the projector"),
        };
        let lap = calculus::div(g, &calculus::grad(g, &p)?)?;
        report.relative_residual = lap.add(&r).norm() / r_norm;
        Ok((p, report))
    }

    pub fn project(&self, u: &FaceField) -> Result<Projection> {
        let g = &self.grid;
        u.check(g)?;
        let mut field = u.clone();
        field.enforce_tangent(g);
        let (potential, report) = self.solve_poisson(&calculus::div(g, &field)?)?;
        field.axpy(-1.0, &calculus::grad(g, &potential)?);
        Ok(Projection {
            field,
            potential,
            report,
        })
    }

    /// `Pu` only.
    pub fn apply(&self, u: &FaceField) -> Result<FaceField> {
        Ok(self.project(u)?.field)
    }
}

fn neumann_diagonal(grid: &BoxGrid) -> Vec<f64> {
    let h = grid.spacing();
    let n = grid.cells();
    let mut diag = vec![0.0; n.iter().product()];
    for_each_index(n, |p, idx| {
        let mut s = 0.0;
        for a in 0..3 {
            let links = if grid.is_wall(a) {
                (p[a] > 0) as usize + (p[a] + 1 < n[a]) as usize
            } else if n[a] > 1 {
                2
            } else {
                0
            };
            s += links as f64 / (h[a] * h[a]);
        }
        diag[idx] = if s > 0.0 { s } else { 1.0 };
    });
    diag
}

/// A Hodge Laplacian with its admissible field type.
pub trait HodgeLaplacian {
    type Field: GridVector;
    const NAME: &'static str;

    /// Check the essential boundary condition.
    fn admissible(grid: &BoxGrid, u: &Self::Field) -> Result<()>;

    /// Galerkin operator of `⟨div u, div v⟩ + ⟨curl u, curl v⟩`.
    fn apply(grid: &BoxGrid, u: &Self::Field) -> Result<Self::Field>;
}

/// Absolute boundary conditions on face fields (`ν·u = 0`).
pub struct B0;

/// Relative boundary conditions on edge fields (`ν×ω = 0`).
pub struct B1;

fn essential_violation(boundary: f64, scale: f64) -> bool {
    boundary > 1e-13 * scale.max(f64::MIN_POSITIVE)
}

impl HodgeLaplacian for B0 {
    type Field = FaceField;
    const NAME: &'static str = "B0 resolvent";

    fn admissible(grid: &BoxGrid, u: &FaceField) -> Result<()> {
        u.check(grid)?;
        if essential_violation(u.wall_normal_max(grid), u.max_abs()) {
            return Err(Error::Inadmissible("B0 requires ν·u = 0 on walls".into()));
        }
        Ok(())
    }

    fn apply(grid: &BoxGrid, u: &FaceField) -> Result<FaceField> {
        Self::admissible(grid, u)?;
        let w = calculus::curl_fe(grid, u, CurlClosure::Natural)?;
        let mut out = calculus::curl_ef(grid, &w)?;
        out.axpy(-1.0, &calculus::grad(grid, &calculus::div(grid, u)?)?);
        Ok(out)
    }
}

impl HodgeLaplacian for B1 {
    type Field = EdgeField;
    const NAME: &'static str = "B1 resolvent";

    fn admissible(grid: &BoxGrid, w: &EdgeField) -> Result<()> {
        w.check(grid)?;
        if essential_violation(w.wall_tangential_max(grid), w.max_abs()) {
            return Err(Error::Inadmissible("B1 requires ν×ω = 0 on walls".into()));
        }
        Ok(())
    }

    fn apply(grid: &BoxGrid, w: &EdgeField) -> Result<EdgeField> {
        Self::admissible(grid, w)?;
        let c = calculus::curl_ef(grid, w)?;
        let mut out = calculus::curl_fe(grid, &c, CurlClosure::Natural)?;
        out.axpy(-1.0, &calculus::node_grad(grid, &calculus::node_div(grid, w)?)?);
        Ok(out)
    }
}

/// Solve `(I + εB) w = u`.
pub fn resolvent<B: HodgeLaplacian>(grid: &BoxGrid, eps: f64, u: &B::Field) -> Result<B::Field> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("resolvent parameter must be positive, got {eps}")));
    }
    B::admissible(grid, u)?;
    if eps == 0.0 {
        return Ok(u.clone());
    }
    let opts = CgOptions {
        rel_tol: RESOLVENT_TOL,
        max_iter: 10 * u.zeroed().norm().max(1.0) as usize + 20_000,
    };
    let apply = |v: &B::Field| -> Result<B::Field> {
        let mut out = B::apply(grid, v)?;
        out.scale(eps);
        out.axpy(1.0, v);
        Ok(out)
    };
    let (w, _) = conjugate_gradient(B::NAME, apply, |r: &B::Field| r.clone(), u, None, &opts)?;
    Ok(w)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommutatorResidual {
    pub value: f64,
    /// False when ‖curl u‖ vanishes and `value` is an absolute residual.
    pub relative: bool,
}

/// ‖curl (1+εB₀)⁻¹u − (1+εB₁)⁻¹ curl u‖ / ‖curl u‖.
pub fn commutator_residual(grid: &BoxGrid, u: &FaceField, eps: f64) -> Result<CommutatorResidual> {
    B0::admissible(grid, u)?;
    let cu = calculus::curl_fe(grid, u, CurlClosure::Natural)?;
    let lhs = calculus::curl_fe(grid, &resolvent::<B0>(grid, eps, u)?, CurlClosure::Natural)?;
    let rhs = resolvent::<B1>(grid, eps, &cu)?;
    let diff = lhs.sub(&rhs).norm();
    let scale = cu.norm();
    if scale > 1e-14 * u.norm() && scale > 0.0 {
        Ok(CommutatorResidual {
            value: diff / scale,
            relative: true,
        })
    } else {
        Ok(CommutatorResidual {
            value: diff,
            relative: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::AxisKind::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grids() -> Vec<BoxGrid> {
        vec![
            BoxGrid::new([1.0, 1.3, 0.7], [6, 5, 7], [Wall, Periodic, Wall]).unwrap(),
            BoxGrid::cube(1.0, 6, Wall).unwrap(),
            BoxGrid::cube(2.0, 4, Periodic).unwrap(),
            BoxGrid::new([1.0; 3], [8, 8, 1], [Wall, Wall, Periodic]).unwrap(),
            BoxGrid::new([1.0; 3], [5, 2, 4], [Wall, Periodic, Wall]).unwrap(),
        ]
    }

    fn random_face(g: &BoxGrid, rng: &mut ChaCha8Rng) -> FaceField {
        FaceField::from_fn(g, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn spectral_basis_diagonalises_the_1d_laplacian() {
        for (n, wall) in [(7, true), (6, false), (5, false), (1, false), (2, false)] {
            let h = 0.3;
            let b = AxisBasis::new(n, h, wall);
            // orthonormal
            for m in 0..n {
                for l in 0..n {
                    let s: f64 = (0..n).map(|i| b.q[i * n + m] * b.q[i * n + l]).sum();
                    assert!((s - (m == l) as u8 as f64).abs() < 1e-12);
                }
            }
            // eigenpairs of −Δ_h with the matching closure
            for m in 0..n {
                for i in 0..n {
                    let v = |j: isize| -> Option<f64> {
                        if wall && (j < 0 || j >= n as isize) {
                            None
                        } else {
                            Some(b.q[(j.rem_euclid(n as isize) as usize) * n + m])
                        }
                    };
                    let c = b.q[i * n + m];
                    let mut lap = 0.0;
                    for nb in [i as isize - 1, i as isize + 1] {
                        if let Some(x) = v(nb) {
                            lap += (c - x) / (h * h);
                        }
                    }
                    assert!((lap - b.eig[m] * c).abs() < 1e-10, "n={n} m={m}");
                }
            }
        }
    }

    #[test]
    fn spectral_and_cg_projections_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for g in grids() {
            let u = random_face(&g, &mut rng);
            let a = Projector::new(&g).project(&u).unwrap();
            let cg = Projector::with_method(&g, PoissonMethod::ConjugateGradient(CgOptions { rel_tol: 1e-12, max_iter: 5000 }));
            let b = cg.project(&u).unwrap();
            assert!(a.field.sub(&b.field).max_abs() < 1e-9);
            assert!(a.report.relative_residual < 1e-11);
            assert!(b.report.relative_residual < 1e-11);
        }
    }

    #[test]
    fn projection_is_divergence_free_and_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for g in grids() {
            let u = random_face(&g, &mut rng);
            let pu = Projector::new(&g).apply(&u).unwrap();
            assert!(calculus::div(&g, &pu).unwrap().max_abs() < 1e-10);
            assert_eq!(pu.wall_normal_max(&g), 0.0);
        }
    }

    #[test]
    fn projection_fixes_h_and_kills_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for g in grids() {
            let proj = Projector::new(&g);
            let v = proj.apply(&random_face(&g, &mut rng)).unwrap();
            let again = proj.project(&v).unwrap();
            assert!(again.field.sub(&v).max_abs() < 1e-10);
            assert!(again.potential.max_abs() < 1e-10);
            let mut q = CellField::from_fn(&g, |_| rng.gen_range(-1.0..1.0));
            q.remove_mean();
            let gq = calculus::grad(&g, &q).unwrap();
            assert!(proj.apply(&gq).unwrap().max_abs() < 1e-10);
        }
    }

    #[test]
    fn projection_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let g = &grids()[0];
        let proj = Projector::new(g);
        for _ in 0..20 {
            let u = random_face(g, &mut rng);
            let v = random_face(g, &mut rng);
            let a = u.dot(&proj.apply(&v).unwrap());
            let b = proj.apply(&u).unwrap().dot(&v);
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn poisson_reports_mean_shift() {
        let g = BoxGrid::cube(1.0, 4, Wall).unwrap();
        let rhs = CellField::from_fn(&g, |_| 2.0);
        let (p, rep) = Projector::new(&g).solve_poisson(&rhs).unwrap();
        assert!((rep.mean_shift - 2.0).abs() < 1e-14);
        assert_eq!(p.max_abs(), 0.0);
    }

    fn random_tangent(g: &BoxGrid, rng: &mut ChaCha8Rng) -> FaceField {
        let mut u = random_face(g, rng);
        u.enforce_tangent(g);
        u
    }

    fn random_masked_edges(g: &BoxGrid, rng: &mut ChaCha8Rng) -> EdgeField {
        let mut w = EdgeField::from_fn(g, |_, _| rng.gen_range(-1.0..1.0));
        w.mask_walls(g);
        w
    }

    #[test]
    fn hodge_laplacians_are_symmetric_positive_semidefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for g in grids() {
            for _ in 0..5 {
                let (u, v) = (random_tangent(&g, &mut rng), random_tangent(&g, &mut rng));
                let a = B0::apply(&g, &u).unwrap().dot(&v);
                let b = u.dot(&B0::apply(&g, &v).unwrap());
                assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
                assert!(B0::apply(&g, &u).unwrap().dot(&u) >= -1e-12 * u.dot(&u));

                let (w, z) = (random_masked_edges(&g, &mut rng), random_masked_edges(&g, &mut rng));
                let a = B1::apply(&g, &w).unwrap().dot(&z);
                let b = w.dot(&B1::apply(&g, &z).unwrap());
                assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
                assert!(B1::apply(&g, &w).unwrap().dot(&w) >= -1e-12 * w.dot(&w));
            }
        }
    }

    #[test]
    fn hodge_laplacians_reject_inadmissible_fields() {
        let g = BoxGrid::cube(1.0, 4, Wall).unwrap();
        let u = FaceField::from_fn(&g, |_, _| 1.0);
        assert!(matches!(B0::apply(&g, &u), Err(Error::Inadmissible(_))));
        let w = EdgeField::from_fn(&g, |_, _| 1.0);
        assert!(matches!(B1::apply(&g, &w), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn constants_are_harmonic_on_periodic_grid() {
        let g = BoxGrid::cube(1.0, 4, Periodic).unwrap();
        let u = FaceField::from_vector_fn(&g, |_| [1.0, 2.0, -0.5]);
        assert!(B0::apply(&g, &u).unwrap().max_abs() < 1e-12);
        // and hence fixed points of every resolvent
        assert!(resolvent::<B0>(&g, 0.7, &u).unwrap().sub(&u).max_abs() < 1e-10);
    }

    fn tg(n: usize) -> (BoxGrid, FaceField) {
        let g = BoxGrid::new([PI, PI, 1.0], [n, n, 1], [Wall, Wall, Periodic]).unwrap();
        let u = FaceField::from_vector_fn(&g, |x| [x[0].sin() * x[1].cos(), -x[0].cos() * x[1].sin(), 0.0]);
        (g, u)
    }

    #[test]
    fn taylor_green_is_an_eigenfield_of_b0() {
        let err = |n: usize| {
            let (g, u) = tg(n);
            B0::apply(&g, &u).unwrap().sub(&u.scaled(2.0)).max_abs()
        };
        let (e16, e32) = (err(16), err(32));
        assert!(e32 < 5e-3);
        assert!((e16 / e32).log2() > 1.9);
    }

    #[test]
    fn resolvent_of_eigenfield() {
        let (g, u) = tg(16);
        let h = PI / 16.0;
        // discrete eigenvalue of the MAC curl-curl for Taylor–Green
        let lambda = 2.0 * ((h / 2.0).sin() / (h / 2.0)).powi(2);
        for eps in [0.1, 1.0] {
            let w = resolvent::<B0>(&g, eps, &u).unwrap();
            assert!(w.sub(&u.scaled(1.0 / (1.0 + eps * lambda))).norm() < 1e-9 * u.norm());
        }
    }

    #[test]
    fn resolvent_contracts_and_maps_zero_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let g = &grids()[0];
        assert_eq!(resolvent::<B0>(g, 0.3, &FaceField::zeros(g)).unwrap().max_abs(), 0.0);
        for _ in 0..5 {
            let u = random_tangent(g, &mut rng);
            assert!(resolvent::<B0>(g, 0.3, &u).unwrap().norm() <= u.norm());
            let w = random_masked_edges(g, &mut rng);
            assert!(resolvent::<B1>(g, 0.3, &w).unwrap().norm() <= w.norm());
        }
        assert!(resolvent::<B0>(g, -1.0, &FaceField::zeros(g)).is_err());
    }

    #[test]
    fn commutator_holds_to_solver_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for g in grids() {
            let u = random_tangent(&g, &mut rng);
            for eps in [0.1, 0.01] {
                let r = commutator_residual(&g, &u, eps).unwrap();
                assert!(r.relative);
                assert!(r.value < 1e-9, "{r:?}");
            }
            let r = commutator_residual(&g, &u, 0.0).unwrap();
            assert!(r.value <= 2.0 * RESOLVENT_TOL);
        }
    }

    #[test]
    fn commutator_of_curl_free_field_is_absolute() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let g = &grids()[1];
        let p = CellField::from_fn(g, |_| rng.gen_range(-1.0..1.0));
        let u = calculus::grad(g, &p).unwrap();
        let r = commutator_residual(g, &u, 0.1).unwrap();
        assert!(!r.relative);
        assert!(r.value < 1e-9);
    }
}
