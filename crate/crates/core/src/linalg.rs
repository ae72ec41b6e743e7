//! Preconditioned conjugate gradients over grid fields.

use crate::error::{Error, Result};
use crate::fields::GridVector;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOptions {
    /// Stop once ‖r‖ ≤ rel_tol·‖b‖.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solve `A x = b` for a symmetric positive (semi)definite `A`.
///
/// `precondition` must be symmetric positive definite on the subspace the
/// iteration lives in; for singular `A` it is also responsible for keeping
/// the search directions inside the range (e.g. removing the mean).
pub fn conjugate_gradient<V: GridVector>(
    solver: &'static str,
    mut apply: impl FnMut(&V) -> Result<V>,
    mut precondition: impl FnMut(&V) -> V,
    b: &V,
    x0: Option<V>,
    opts: &CgOptions,
) -> Result<(V, CgReport)> {
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return Ok((b.zeroed(), CgReport::default()));
    }
    let (mut x, mut r) = match x0 {
        Some(x) => {
            let mut r = b.clone();
            r.axpy(-1.0, &apply(&x)?);
            (x, r)
        }
        None => (b.zeroed(), b.clone()),
    };
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut res = r.norm() / b_norm;
    let mut it = 0;
    while res > opts.rel_tol {
        if it >= opts.max_iter {
            return Err(Error::NotConverged {
                solver,
                iterations: it,
                residual: res,
            });
        }
        let ap = apply(&p)?;
        let pap = p.dot(&ap);
        if pap <= 0.0 || !pap.is_finite() {
            // breakdown: the residual is numerically in the null space
            break;
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        z = precondition(&r);
        let rz_next = r.dot(&z);
        let beta = rz_next / rz;
        rz = rz_next;
        p.scale(beta);
        p.axpy(1.0, &z);
        it += 1;
        res = r.norm() / b_norm;
    }
    Ok((
        x,
        CgReport {
            iterations: it,
            relative_residual: res,
        },
    ))
}
