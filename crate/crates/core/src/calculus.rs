//! Mimetic difference operators, boundary traces and discrete norms.
//!
//! The operators form a discrete de Rham sequence on the MAC layout:
//!
//! ```text
//!   cells --grad--> faces --curl_fe--> edges --curl_ef--> faces --div--> cells
//! ```
//!
//! so that `div ∘ curl_ef = 0` everywhere and `curl_fe ∘ grad = 0` on every
//! interior edge, exactly. With respect to the volume-weighted inner
//! products, `grad = −divᵀ` on fields with `ν·u = 0` and `curl_ef` is the
//! transpose of `curl_fe` (see [`CurlClosure`]).

use crate::error::{Error, Result};
use crate::fields::{edge_on_wall, for_each_index, CellField, EdgeField, FaceField, GridVector, NodeField};
use crate::grid::BoxGrid;

/// How `curl_fe` treats edges lying in a wall, where one of the two
/// tangential-velocity neighbours is missing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurlClosure {
    /// Wall edges carry zero vorticity. This is the closure of the
    /// curl-curl form: the tangential vorticity on the wall is a boundary
    /// condition, not an unknown.
    Natural,
    /// The missing neighbour is a ghost value of zero. With this closure
    /// `⟨curl_fe u, ω⟩ = ⟨u, curl_ef ω⟩` holds for every ω.
    ZeroGhost,
}

#[inline]
fn upper_node(grid: &BoxGrid, a: usize, c: usize) -> usize {
    if grid.is_wall(a) {
        c + 1
    } else {
        (c + 1) % grid.cells()[a]
    }
}

#[inline]
fn lower_cell(grid: &BoxGrid, a: usize, m: usize) -> Option<usize> {
    if m > 0 {
        Some(m - 1)
    } else if grid.is_wall(a) {
        None
    } else {
        Some(grid.cells()[a] - 1)
    }
}

#[inline]
fn upper_cell(grid: &BoxGrid, a: usize, m: usize) -> Option<usize> {
    if m < grid.cells()[a] {
        Some(m)
    } else {
        None
    }
}

#[inline]
fn with(p: [usize; 3], a: usize, v: usize) -> [usize; 3] {
    let mut q = p;
    q[a] = v;
    q
}

pub fn div(grid: &BoxGrid, u: &FaceField) -> Result<CellField> {
    u.check(grid)?;
    let h = grid.spacing();
    let mut out = CellField::zeros(grid);
    let dims = grid.cell_dims();
    let data = out.data_mut();
    for_each_index(dims, |p, n| {
        let mut s = 0.0;
        for d in 0..3 {
            let up = with(p, d, upper_node(grid, d, p[d]));
            s += (u.get(d, up) - u.get(d, p)) / h[d];
        }
        data[n] = s;
    });
    Ok(out)
}

/// Cell-to-face gradient; wall-normal entries are zero (Neumann closure).
pub fn grad(grid: &BoxGrid, p: &CellField) -> Result<FaceField> {
    p.check(grid)?;
    let h = grid.spacing();
    let mut out = FaceField::zeros(grid);
    for d in 0..3 {
        let dims = grid.face_dims(d);
        let data = out.comp_mut(d);
        for_each_index(dims, |q, n| {
            if let (Some(lo), Some(hi)) = (lower_cell(grid, d, q[d]), upper_cell(grid, d, q[d])) {
                data[n] = (p.get(with(q, d, hi)) - p.get(with(q, d, lo))) / h[d];
            }
        });
    }
    Ok(out)
}

/// Face-to-edge curl.
pub fn curl_fe(grid: &BoxGrid, u: &FaceField, closure: CurlClosure) -> Result<EdgeField> {
    u.check(grid)?;
    let h = grid.spacing();
    let mut out = EdgeField::zeros(grid);
    for d in 0..3 {
        let (a, b) = ((d + 1) % 3, (d + 2) % 3);
        let dims = grid.edge_dims(d);
        let data = out.comp_mut(d);
        for_each_index(dims, |e, n| {
            if closure == CurlClosure::Natural && edge_on_wall(grid, d, e) {
                return;
            }
            let diff = |comp: usize, axis: usize| {
                let hi = upper_cell(grid, axis, e[axis]).map_or(0.0, |c| u.get(comp, with(e, axis, c)));
                let lo = lower_cell(grid, axis, e[axis]).map_or(0.0, |c| u.get(comp, with(e, axis, c)));
                (hi - lo) / h[axis]
            };
            data[n] = diff(b, a) - diff(a, b);
        });
    }
    Ok(out)
}

/// Edge-to-face curl.
pub fn curl_ef(grid: &BoxGrid, w: &EdgeField) -> Result<FaceField> {
    w.check(grid)?;
    let h = grid.spacing();
    let mut out = FaceField::zeros(grid);
    for d in 0..3 {
        let (a, b) = ((d + 1) % 3, (d + 2) % 3);
        let dims = grid.face_dims(d);
        let data = out.comp_mut(d);
        for_each_index(dims, |f, n| {
            let da = (w.get(b, with(f, a, upper_node(grid, a, f[a]))) - w.get(b, f)) / h[a];
            let db = (w.get(a, with(f, b, upper_node(grid, b, f[b]))) - w.get(a, f)) / h[b];
            data[n] = da - db;
        });
    }
    Ok(out)
}

/// Edge-to-node divergence on interior nodes; wall nodes carry zero.
pub fn node_div(grid: &BoxGrid, w: &EdgeField) -> Result<NodeField> {
    w.check(grid)?;
    let h = grid.spacing();
    let mut out = NodeField::zeros(grid);
    let dims = grid.node_dims();
    let data = out.data_mut();
    for_each_index(dims, |p, n| {
        if (0..3).any(|a| grid.node_on_wall(a, p[a])) {
            return;
        }
        let mut s = 0.0;
        for d in 0..3 {
            let hi = upper_cell(grid, d, p[d]).expect("interior node");
            let lo = lower_cell(grid, d, p[d]).expect("interior node");
            s += (w.get(d, with(p, d, hi)) - w.get(d, with(p, d, lo))) / h[d];
        }
        data[n] = s;
    });
    Ok(out)
}

/// Node-to-edge gradient of a field vanishing on wall nodes; wall edges
/// are masked. Equals `−node_divᵀ` on masked edge fields.
pub fn node_grad(grid: &BoxGrid, phi: &NodeField) -> Result<EdgeField> {
    phi.check(grid)?;
    let h = grid.spacing();
    let mut out = EdgeField::zeros(grid);
    let value = |p: [usize; 3]| {
        if (0..3).any(|a| grid.node_on_wall(a, p[a])) {
            0.0
        } else {
            phi.get(p)
        }
    };
    for d in 0..3 {
        let dims = grid.edge_dims(d);
        let data = out.comp_mut(d);
        for_each_index(dims, |e, n| {
            if edge_on_wall(grid, d, e) {
                return;
            }
            let hi = value(with(e, d, upper_node(grid, d, e[d])));
            data[n] = (hi - value(e)) / h[d];
        });
    }
    Ok(out)
}

/// Average each velocity component to cell centres.
pub fn faces_to_cells(grid: &BoxGrid, u: &FaceField) -> [CellField; 3] {
    [0, 1, 2].map(|d| {
        let mut c = CellField::zeros(grid);
        let data = c.data_mut();
        for_each_index(grid.cell_dims(), |p, n| {
            data[n] = 0.5 * (u.get(d, p) + u.get(d, with(p, d, upper_node(grid, d, p[d]))));
        });
        c
    })
}

/// Transpose of [`faces_to_cells`]: every face receives half of each
/// adjacent cell value.
pub fn cells_to_faces(grid: &BoxGrid, c: &[CellField; 3]) -> FaceField {
    let mut u = FaceField::zeros(grid);
    for d in 0..3 {
        let data = u.comp_mut(d);
        for_each_index(grid.face_dims(d), |q, n| {
            let lo = lower_cell(grid, d, q[d]).map_or(0.0, |m| c[d].get(with(q, d, m)));
            let hi = upper_cell(grid, d, q[d]).map_or(0.0, |m| c[d].get(with(q, d, m)));
            data[n] = 0.5 * (lo + hi);
        });
    }
    u
}

/// Average each vorticity component (four edges) to cell centres.
pub fn edges_to_cells(grid: &BoxGrid, w: &EdgeField) -> [CellField; 3] {
    [0, 1, 2].map(|d| {
        let (a, b) = ((d + 1) % 3, (d + 2) % 3);
        let mut c = CellField::zeros(grid);
        let data = c.data_mut();
        for_each_index(grid.cell_dims(), |p, n| {
            let pa = upper_node(grid, a, p[a]);
            let pb = upper_node(grid, b, p[b]);
            let s = w.get(d, p)
                + w.get(d, with(p, a, pa))
                + w.get(d, with(p, b, pb))
                + w.get(d, with(with(p, a, pa), b, pb));
            data[n] = 0.25 * s;
        });
        c
    })
}

/// Tangential velocity of the `row`-th cell layer next to each boundary
/// face, averaged to the face centre. Components follow
/// `wall.tangential_axes()`.
pub fn near_wall_tangential(grid: &BoxGrid, u: &FaceField, row: usize) -> Vec<[f64; 2]> {
    grid.boundary_faces()
        .iter()
        .map(|f| {
            let axis = f.wall.axis;
            let mut c = f.cell(grid);
            c[axis] = if f.wall.upper {
                grid.cells()[axis] - 1 - row
            } else {
                row
            };
            f.wall.tangential_axes().map(|t| {
                0.5 * (u.get(t, c) + u.get(t, with(c, t, upper_node(grid, t, c[t]))))
            })
        })
        .collect()
}

/// Transpose of [`near_wall_tangential`] (row 0) with respect to the
/// surface quadrature on the boundary and the volume inner product on
/// faces: `⟨spread(g), v⟩ = Σ_f |f| g_f · T v`.
pub fn spread_near_wall(grid: &BoxGrid, g: &[[f64; 2]]) -> FaceField {
    let mut out = FaceField::zeros(grid);
    let vol = grid.cell_volume();
    for (f, gv) in grid.boundary_faces().iter().zip(g) {
        let c = f.cell(grid);
        let s = 0.5 * f.weight / vol;
        for (slot, t) in f.wall.tangential_axes().into_iter().enumerate() {
            let hi = with(c, t, upper_node(grid, t, c[t]));
            out.set(t, c, out.get(t, c) + s * gv[slot]);
            out.set(t, hi, out.get(t, hi) + s * gv[slot]);
        }
    }
    out
}

/// Boundary trace at one wall face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceValue {
    /// Components along `wall.tangential_axes()`.
    pub tangential: [f64; 2],
    /// ν·u on the wall.
    pub normal: f64,
}

/// Second-order trace: linear extrapolation of the two nearest cell
/// layers for the tangential part, the stored wall value for the normal
/// part.
pub fn trace(grid: &BoxGrid, u: &FaceField) -> Result<Vec<TraceValue>> {
    u.check(grid)?;
    let r0 = near_wall_tangential(grid, u, 0);
    let r1 = near_wall_tangential(grid, u, 1);
    Ok(grid
        .boundary_faces()
        .iter()
        .zip(r0.iter().zip(&r1))
        .map(|(f, (a, b))| {
            let mut w = f.cell(grid);
            if f.wall.upper {
                w[f.wall.axis] = grid.cells()[f.wall.axis];
            }
            TraceValue {
                tangential: [1.5 * a[0] - 0.5 * b[0], 1.5 * a[1] - 0.5 * b[1]],
                normal: f.wall.sign() * u.get(f.wall.axis, w),
            }
        })
        .collect())
}

/// ‖Tr u‖ in L²(∂Ω).
pub fn trace_norm(grid: &BoxGrid, u: &FaceField) -> Result<f64> {
    let tr = trace(grid, u)?;
    let s: f64 = grid
        .boundary_faces()
        .iter()
        .zip(&tr)
        .map(|(f, t)| f.weight * (t.tangential[0].powi(2) + t.tangential[1].powi(2) + t.normal.powi(2)))
        .sum();
    Ok(s.sqrt())
}

/// Exponent of a discrete Lᵖ norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Two,
    Three,
    Six,
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        match p {
            p if p == 2.0 => Ok(Self::Two),
            p if p == 3.0 => Ok(Self::Three),
            p if p == 6.0 => Ok(Self::Six),
            p if p.is_infinite() && p > 0.0 => Ok(Self::Infinity),
            _ => Err(Error::UnsupportedNorm(p)),
        }
    }

    fn value(self) -> f64 {
        match self {
            Self::Two => 2.0,
            Self::Three => 3.0,
            Self::Six => 6.0,
            Self::Infinity => f64::INFINITY,
        }
    }
}

fn lp_of_cells(c: &[CellField; 3], p: Exponent) -> f64 {
    let mags = (0..c[0].data().len())
        .map(|n| (c[0].data()[n].powi(2) + c[1].data()[n].powi(2) + c[2].data()[n].powi(2)).sqrt());
    match p {
        Exponent::Infinity => mags.fold(0.0, f64::max),
        _ => {
            let q = p.value();
            (mags.map(|m| m.powf(q)).sum::<f64>() * c[0].weight()).powf(1.0 / q)
        }
    }
}

/// Lᵖ norm of a velocity field after averaging to cell centres.
pub fn lp_norm(grid: &BoxGrid, u: &FaceField, p: Exponent) -> Result<f64> {
    u.check(grid)?;
    Ok(lp_of_cells(&faces_to_cells(grid, u), p))
}

/// Lᵖ norm of an edge field after averaging to cell centres.
pub fn lp_norm_edges(grid: &BoxGrid, w: &EdgeField, p: Exponent) -> Result<f64> {
    w.check(grid)?;
    Ok(lp_of_cells(&edges_to_cells(grid, w), p))
}

/// ‖u‖_H: the volume-weighted ℓ² norm.
pub fn h_norm(u: &FaceField) -> f64 {
    u.norm()
}

/// ‖u‖_V = ‖u‖_H + ‖curl u‖_H.
pub fn v_norm(grid: &BoxGrid, u: &FaceField) -> Result<f64> {
    Ok(u.norm() + curl_fe(grid, u, CurlClosure::Natural)?.norm())
}

/// ‖u‖_W = ‖u‖ + ‖div u‖ + ‖curl u‖.
pub fn w_norm(grid: &BoxGrid, u: &FaceField) -> Result<f64> {
    Ok(v_norm(grid, u)? + div(grid, u)?.norm())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceInequalityReport {
    pub trace_norm: f64,
    pub w_norm: f64,
    /// `trace_norm / w_norm`; `None` for the zero field.
    pub ratio: Option<f64>,
}

/// Empirical constant in ‖Tr u‖_{L²(∂Ω)} ≤ C‖u‖_W. Diagnostic only.
pub fn trace_inequality_report(grid: &BoxGrid, u: &FaceField) -> Result<TraceInequalityReport> {
    if !grid.has_wall() {
        return Err(Error::NoBoundary);
    }
    let trace_norm = trace_norm(grid, u)?;
    let w_norm = w_norm(grid, u)?;
    let ratio = (w_norm > 0.0).then(|| trace_norm / w_norm);
    Ok(TraceInequalityReport {
        trace_norm,
        w_norm,
        ratio,
    })
}

/// Time-space quadratures over a sampled trajectory `0 = s₀ < … < s_N`.
pub mod time {
    use crate::fields::{FaceField, GridVector};

    /// ‖g‖_{L²(0,τ)} of samples `gₙ = g(sₙ)` by the trapezoidal rule.
    pub fn l2(times: &[f64], g: &[f64]) -> f64 {
        times
            .windows(2)
            .zip(g.windows(2))
            .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] * v[0] + v[1] * v[1]))
            .sum::<f64>()
            .sqrt()
    }

    /// ‖∂ₜu‖_{L²(0,τ,H)} with first-order backward differences.
    pub fn derivative_l2(times: &[f64], states: &[FaceField]) -> f64 {
        times
            .windows(2)
            .zip(states.windows(2))
            .map(|(t, u)| {
                let dt = t[1] - t[0];
                u[1].sub(&u[0]).dot(&u[1].sub(&u[0])) / dt
            })
            .sum::<f64>()
            .sqrt()
    }

    /// ‖u‖_{H¹(0,τ,H)} = (‖u‖²_{L²H} + ‖∂ₜu‖²_{L²H})^{1/2}.
    pub fn h1(times: &[f64], states: &[FaceField]) -> f64 {
        let norms: Vec<f64> = states.iter().map(|u| u.norm()).collect();
        let a = l2(times, &norms);
        let b = derivative_l2(times, states);
        (a * a + b * b).sqrt()
    }

    pub fn linf(g: &[f64]) -> f64 {
        g.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
