//! Initial data and forcing: Taylor–Green fields and seeded random smooth
//! divergence-free fields.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::calculus;
use crate::fields::{CellField, EdgeField, FaceField, GridVector};
use crate::grid::BoxGrid;
use crate::hodge::Projector;

/// `A(sin x cos y, −cos x sin y, 0)`; divergence free on the MAC grid and
/// tangent to the walls of `[0, π]²`.
pub fn taylor_green(grid: &BoxGrid, amplitude: f64) -> FaceField {
    let mut u = FaceField::from_vector_fn(grid, |x| {
        [
            amplitude * x[0].sin() * x[1].cos(),
            -amplitude * x[0].cos() * x[1].sin(),
            0.0,
        ]
    });
    u.enforce_tangent(grid);
    u
}

/// Eigenvalue of the discrete curl-curl for [`taylor_green`]; tends to 2.
pub fn taylor_green_eigenvalue(grid: &BoxGrid) -> f64 {
    let h = grid.spacing();
    (0..2).map(|a| (2.0 * (0.5 * h[a]).sin() / h[a]).powi(2)).sum()
}

/// Zero-mean kinematic pressure of the Taylor–Green flow with velocity
/// `e^{−2t}·taylor_green(A)`: `A²e^{−4t}(cos 2x + cos 2y)/4`.
pub fn taylor_green_pressure(grid: &BoxGrid, amplitude: f64, t: f64) -> CellField {
    let s = 0.25 * amplitude * amplitude * (-4.0 * t).exp();
    let mut p = CellField::from_fn(grid, |x| s * ((2.0 * x[0]).cos() + (2.0 * x[1]).cos()));
    p.remove_mean();
    p
}

/// Zero-mean Bernoulli pressure `π = p + ½|u|²` of the same flow.
pub fn taylor_green_bernoulli(grid: &BoxGrid, amplitude: f64, t: f64) -> CellField {
    let s = 0.25 * amplitude * amplitude * (-4.0 * t).exp();
    let mut p = CellField::from_fn(grid, |x| {
        let (c2x, c2y) = ((2.0 * x[0]).cos(), (2.0 * x[1]).cos());
        s * (c2x + c2y + 1.0 - c2x * c2y)
    });
    p.remove_mean();
    p
}

/// Projection of i.i.d. uniform face values: admissible but rough.
pub fn random_admissible(grid: &BoxGrid, rng: &mut ChaCha8Rng) -> FaceField {
    let u = FaceField::from_fn(grid, |_, _| rng.gen_range(-1.0..1.0));
    Projector::new(grid).apply(&u).expect("projection of a matching field")
}

/// One separable term `c·Π_a φ_a(x_a)` of a smooth edge potential.
struct Term {
    coeff: f64,
    factors: [(usize, bool); 3],
}

fn basis(grid: &BoxGrid, axis: usize, comp: usize, k: usize, sine: bool, x: f64) -> f64 {
    let l = grid.lengths()[axis];
    if grid.is_wall(axis) {
        let w = k as f64 * PI * x / l;
        // edges of other components touch the walls normal to `axis`
        if axis == comp {
            w.cos()
        } else {
            w.sin()
        }
    } else {
        let w = 2.0 * PI * k as f64 * x / l;
        if sine {
            w.sin()
        } else {
            w.cos()
        }
    }
}

/// Smooth divergence-free field with unit H-norm: the curl of a random
/// low-wavenumber edge potential (wavenumbers up to `max_mode`), projected.
pub fn random_smooth(grid: &BoxGrid, projector: &Projector, rng: &mut ChaCha8Rng, max_mode: usize) -> FaceField {
    let n = grid.cells();
    let terms: Vec<Vec<Term>> = (0..3)
        .map(|comp| {
            (0..6)
                .map(|_| {
                    let factors = [0, 1, 2].map(|a| {
                        let top = if n[a] == 1 { 0 } else { max_mode };
                        let lowest = (grid.is_wall(a) && a != comp) as usize;
                        let k = rng.gen_range(lowest.min(top)..=top);
                        (k, rng.gen_bool(0.5))
                    });
                    let k2: usize = factors.iter().map(|f| f.0 * f.0).sum();
                    Term {
                        coeff: rng.gen_range(-1.0..1.0) / (1.0 + k2 as f64),
                        factors,
                    }
                })
                .collect()
        })
        .collect();
    let mut psi = EdgeField::from_fn(grid, |d, x| {
        terms[d]
            .iter()
            .map(|t| t.coeff * (0..3).map(|a| basis(grid, a, d, t.factors[a].0, t.factors[a].1, x[a])).product::<f64>())
            .sum()
    });
    psi.mask_walls(grid);
    let u = calculus::curl_ef(grid, &psi).expect("matching field");
    let mut u = projector.apply(&u).expect("matching field");
    let norm = u.norm();
    if norm > 0.0 {
        u.scale(1.0 / norm);
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::AxisKind::*;
    use rand::SeedableRng;

    #[test]
    fn taylor_green_is_discretely_divergence_free_and_tangent() {
        let g = BoxGrid::new([PI, PI, 1.0], [16, 16, 1], [Wall, Wall, Periodic]).unwrap();
        let u = taylor_green(&g, 2.0);
        assert!(calculus::div(&g, &u).unwrap().max_abs() < 1e-13);
        assert_eq!(u.wall_normal_max(&g), 0.0);
        assert!((taylor_green_eigenvalue(&g) - 2.0).abs() < 0.01);
    }

    #[test]
    fn pressures_have_zero_mean() {
        let g = BoxGrid::new([PI, PI, 1.0], [16, 16, 1], [Wall, Wall, Periodic]).unwrap();
        assert!(taylor_green_pressure(&g, 1.0, 0.3).mean().abs() < 1e-15);
        assert!(taylor_green_bernoulli(&g, 1.0, 0.3).mean().abs() < 1e-15);
    }

    #[test]
    fn random_smooth_fields_are_admissible_and_seeded() {
        for g in [
            BoxGrid::new([1.0, 2.0, 1.0], [8, 6, 5], [Wall, Periodic, Wall]).unwrap(),
            BoxGrid::cube(1.0, 6, Periodic).unwrap(),
            BoxGrid::new([PI, PI, 1.0], [8, 8, 1], [Wall, Wall, Periodic]).unwrap(),
        ] {
            let p = Projector::new(&g);
            let a = random_smooth(&g, &p, &mut ChaCha8Rng::seed_from_u64(3), 2);
            let b = random_smooth(&g, &p, &mut ChaCha8Rng::seed_from_u64(3), 2);
            assert_eq!(a, b);
            assert!((a.norm() - 1.0).abs() < 1e-12);
            assert!(calculus::div(&g, &a).unwrap().max_abs() < 1e-10);
            assert_eq!(a.wall_normal_max(&g), 0.0);
        }
    }

    #[test]
    fn random_smooth_fields_resolve_under_refinement() {
        // the same seed gives the same continuum field at every resolution
        let field = |n: usize| {
            let g = BoxGrid::new([1.0; 3], [n, n, n], [Wall, Periodic, Wall]).unwrap();
            let p = Projector::new(&g);
            let u = random_smooth(&g, &p, &mut ChaCha8Rng::seed_from_u64(5), 2);
            (calculus::v_norm(&g, &u).unwrap(), u.norm())
        };
        let (v8, _) = field(8);
        let (v16, _) = field(16);
        assert!((v8 / v16 - 1.0).abs() < 0.1);
    }
}
