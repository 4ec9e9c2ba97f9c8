//! Finite action sets and the nearest-neighbor quantizer.
//!
//! An action set `𝒰 = {0, u_1, ..., u_p} ⊂ R^m` is usable when the origin
//! lies strictly inside the convex hull of the nonzero actions. Then the
//! Voronoi cell of the zero action,
//!
//! ```text
//! V(0) = { x : ⟨u, x⟩ ≤ ½‖u‖²  for every nonzero u }
//! ```
//!
//! is a bounded polytope and `δ = max_{x ∈ V(0)} ‖x‖` is finite. Any input
//! `η` with `‖η‖ > δ` is mapped to a nonzero action strictly closer to `η`
//! than the origin is.
//!
//! The quantizer ranks actions by `½‖v‖² − ⟨v, η⟩`, which equals
//! `½‖v − η‖² − ½‖η‖²` and therefore orders actions exactly as the distance
//! to `η` does. The zero action always scores exactly `0`, so membership of
//! `u` in the argmin certifies `⟨u, η⟩ ≥ ½‖u‖²` in the same floating-point
//! operations that made the selection.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecops::{dot, half_sq_norm, norm};

/// Radius of the ball around the origin that must fit inside the convex
/// hull of the nonzero actions.
pub const INTERIOR_MARGIN: f64 = 1e-9;

/// Provenance of a set built by [`ActionSet::triangle`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleMeta {
    pub scale: f64,
    pub theta: f64,
}

/// One agent's finite action set. The zero action is stored first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ActionSetRepr", into = "ActionSetRepr")]
pub struct ActionSet {
    dim: usize,
    /// Row-major `(p + 1) x dim`.
    points: Vec<f64>,
    half_sq_norms: Vec<f64>,
    delta: f64,
    meta: Option<TriangleMeta>,
}

#[derive(Serialize, Deserialize)]
struct ActionSetRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
}

impl TryFrom<ActionSetRepr> for ActionSet {
    type Error = Error;

    fn try_from(repr: ActionSetRepr) -> Result<Self> {
        let set = match (repr.points, repr.scale) {
            (None, Some(scale)) => ActionSet::triangle(scale, repr.theta.unwrap_or(0.0))?,
            (Some(points), scale) => {
                let mut set = ActionSet::new(&points)?;
                if let Some(scale) = scale {
                    set.meta = Some(TriangleMeta {
                        scale,
                        theta: repr.theta.unwrap_or(0.0),
                    });
                }
                set
            }
            (None, None) => {
                return Err(Error::InvalidActionSet(
                    "expected `points` or `scale`".into(),
                ))
            }
        };
        if let Some(delta) = repr.delta {
            if (delta - set.delta).abs() > 1e-9 * set.delta.max(1.0) {
                return Err(Error::InvalidActionSet(format!(
                    "stated delta {delta} disagrees with computed {}",
                    set.delta
                )));
            }
        }
        Ok(set)
    }
}

impl From<ActionSet> for ActionSetRepr {
    fn from(set: ActionSet) -> Self {
        ActionSetRepr {
            points: Some(set.iter().map(<[f64]>::to_vec).collect()),
            delta: Some(set.delta),
            scale: set.meta.map(|m| m.scale),
            theta: set.meta.map(|m| m.theta),
        }
    }
}

impl ActionSet {
    /// Builds a set from explicit points. The zero vector must be present
    /// (it is moved to the front), points must be distinct and the origin
    /// must be interior to the hull of the rest.
    pub fn new(points: &[Vec<f64>]) -> Result<Self> {
        let dim = common_dim(points)?;
        let zero_at = points
            .iter()
            .position(|p| p.iter().all(|&c| c == 0.0))
            .ok_or_else(|| Error::InvalidActionSet("zero action missing".into()))?;
        for (a, pa) in points.iter().enumerate() {
            if pa.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidActionSet("non-finite coordinate".into()));
            }
            if points[a + 1..].iter().any(|pb| pb == pa) {
                return Err(Error::InvalidActionSet("duplicate action".into()));
            }
        }

        let mut flat = Vec::with_capacity(points.len() * dim);
        flat.extend_from_slice(&points[zero_at]);
        for (idx, p) in points.iter().enumerate() {
            if idx != zero_at {
                flat.extend_from_slice(p);
            }
        }
        let ordered: Vec<Vec<f64>> = flat.chunks(dim).map(<[f64]>::to_vec).collect();
        let delta = voronoi_zero_bound(&ordered)?;
        Ok(Self::from_parts(dim, flat, delta, None))
    }

    /// Zero plus the three vertices `r·R(θ)·(sin(2πk/3), cos(2πk/3))`,
    /// `k = 0, 1, 2`, of an equilateral triangle of circumradius `r`.
    pub fn triangle(scale: f64, theta: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidScale(scale));
        }
        let (sin_t, cos_t) = theta.sin_cos();
        // (sin, cos) of 0, 2π/3, 4π/3; the last two mirror each other exactly
        let half_sqrt3 = 0.5 * 3f64.sqrt();
        let base = [(0.0, 1.0), (half_sqrt3, -0.5), (-half_sqrt3, -0.5)];
        let mut flat = vec![0.0, 0.0];
        for (sx, cx) in base {
            flat.push(scale * (cos_t * sx - sin_t * cx));
            flat.push(scale * (sin_t * sx + cos_t * cx));
        }
        let ordered: Vec<Vec<f64>> = flat.chunks(2).map(<[f64]>::to_vec).collect();
        let delta = voronoi_zero_bound(&ordered)?;
        Ok(Self::from_parts(
            2,
            flat,
            delta,
            Some(TriangleMeta { scale, theta }),
        ))
    }

    fn from_parts(dim: usize, points: Vec<f64>, delta: f64, meta: Option<TriangleMeta>) -> Self {
        let half_sq_norms = points.chunks(dim).map(half_sq_norm).collect();
        ActionSet {
            dim,
            points,
            half_sq_norms,
            delta,
            meta,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of actions including zero.
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, idx: usize) -> &[f64] {
        &self.points[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.points.chunks(self.dim)
    }

    pub fn to_points(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    /// Cached Voronoi-zero bound `δ`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn meta(&self) -> Option<TriangleMeta> {
        self.meta
    }

    /// Quantizer score of action `idx` for input `eta`.
    #[inline]
    fn score(&self, idx: usize, eta: &[f64]) -> f64 {
        self.half_sq_norms[idx] - dot(self.point(idx), eta)
    }

    /// Indices of every action at minimal distance from `eta`, ascending.
    pub fn nearest_indices(&self, eta: &[f64]) -> Vec<usize> {
        debug_assert_eq!(eta.len(), self.dim);
        let mut best = f64::INFINITY;
        let mut out = Vec::with_capacity(2);
        for idx in 0..self.len() {
            let s = self.score(idx, eta);
            if s < best {
                best = s;
                out.clear();
                out.push(idx);
            } else if s == best {
                out.push(idx);
            }
        }
        out
    }

    /// The full argmin set `φ(η)`; ties are all returned.
    pub fn nearest(&self, eta: &[f64]) -> Vec<&[f64]> {
        self.nearest_indices(eta)
            .into_iter()
            .map(|idx| self.point(idx))
            .collect()
    }

    /// Lowest-index element of the argmin set.
    #[inline]
    pub fn nearest_select_index(&self, eta: &[f64]) -> usize {
        debug_assert_eq!(eta.len(), self.dim);
        // zero scores exactly 0 and wins ties
        let mut best = 0.0;
        let mut best_idx = 0;
        for idx in 1..self.len() {
            let s = self.score(idx, eta);
            if s < best {
                best = s;
                best_idx = idx;
            }
        }
        best_idx
    }

    pub fn nearest_select(&self, eta: &[f64]) -> &[f64] {
        self.point(self.nearest_select_index(eta))
    }
}

fn common_dim(points: &[Vec<f64>]) -> Result<usize> {
    let dim = points
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidActionSet("no points".into()))?;
    if dim == 0 {
        return Err(Error::InvalidActionSet("zero-dimensional points".into()));
    }
    for p in points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.len(),
            });
        }
    }
    Ok(dim)
}

/// Whether the origin lies in the interior of the convex hull of the
/// nonzero points, with a ball of radius [`INTERIOR_MARGIN`] to spare.
///
/// Enumerates supporting hyperplanes through `m`-subsets of the nonzero
/// points; every facet of a full-dimensional hull arises this way. The
/// origin is interior iff the hull is full-dimensional and every facet
/// keeps it at distance at least the margin on the inner side.
pub fn satisfies_a1(points: &[Vec<f64>]) -> Result<bool> {
    let dim = common_dim(points)?;
    let nonzero: Vec<&[f64]> = points
        .iter()
        .filter(|p| p.iter().any(|&c| c != 0.0))
        .map(Vec::as_slice)
        .collect();
    if nonzero.len() <= dim {
        return Ok(false);
    }
    let spread = DMatrix::from_fn(nonzero.len(), dim, |r, c| nonzero[r][c]);
    let scale = nonzero.iter().map(|p| norm(p)).fold(0.0, f64::max);
    if spread.rank(1e-12 * scale) < dim {
        return Ok(false);
    }

    let tol = 1e-12 * scale;
    let mut subset: Vec<usize> = (0..dim).collect();
    let mut found_facet = false;
    loop {
        if let Some(normal) = hyperplane_normal(&nonzero, &subset, dim) {
            let offset = dot(&normal, nonzero[subset[0]]);
            let (mut above, mut below) = (false, false);
            for p in &nonzero {
                let side = dot(&normal, p) - offset;
                above |= side > tol;
                below |= side < -tol;
            }
            // the origin must sit on the side holding the other points
            let inner_distance = match (above, below) {
                (false, true) => Some(offset),
                (true, false) => Some(-offset),
                _ => None,
            };
            if let Some(distance) = inner_distance {
                found_facet = true;
                if distance < INTERIOR_MARGIN {
                    return Ok(false);
                }
            }
        }
        if !next_combination(&mut subset, nonzero.len()) {
            break;
        }
    }
    Ok(found_facet)
}

/// Unit normal of the affine hull of the chosen points, or `None` when
/// they are affinely dependent.
fn hyperplane_normal(points: &[&[f64]], subset: &[usize], dim: usize) -> Option<Vec<f64>> {
    if dim == 1 {
        return Some(vec![1.0]);
    }
    let base = points[subset[0]];
    if dim == 2 {
        let other = points[subset[1]];
        let (dx, dy) = (other[0] - base[0], other[1] - base[1]);
        let len = dx.hypot(dy);
        return (len > 0.0).then(|| vec![-dy / len, dx / len]);
    }
    // rows are edge vectors; pad to square so the SVD exposes the null space
    let diffs = DMatrix::from_fn(dim, dim, |r, c| {
        if r + 1 < dim {
            points[subset[r + 1]][c] - base[c]
        } else {
            0.0
        }
    });
    let scale = diffs.norm().max(f64::MIN_POSITIVE);
    let svd = diffs.svd(false, true);
    let v_t = svd.v_t?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    if svd.singular_values[order[dim - 2]] <= 1e-12 * scale {
        return None;
    }
    Some(v_t.row(order[dim - 1]).iter().copied().collect())
}

fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    for pos in (0..k).rev() {
        if subset[pos] < n - k + pos {
            subset[pos] += 1;
            for later in pos + 1..k {
                subset[later] = subset[later - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Smallest `δ` with `V(0) ⊆ B_δ`.
///
/// Exact for `m = 2` by enumerating feasible pairwise intersections of
/// the bisector half-planes; `m = 1` is closed-form and higher dimensions
/// fall back to [`bound_oracle`] at a coarse resolution.
pub fn voronoi_zero_bound(points: &[Vec<f64>]) -> Result<f64> {
    if !satisfies_a1(points)? {
        return Err(Error::UnboundedCell);
    }
    let dim = points[0].len();
    let nonzero: Vec<&[f64]> = points
        .iter()
        .filter(|p| p.iter().any(|&c| c != 0.0))
        .map(Vec::as_slice)
        .collect();
    match dim {
        1 => {
            let pos = nonzero
                .iter()
                .map(|p| p[0])
                .filter(|&v| v > 0.0)
                .fold(f64::INFINITY, f64::min);
            let neg = nonzero
                .iter()
                .map(|p| -p[0])
                .filter(|&v| v > 0.0)
                .fold(f64::INFINITY, f64::min);
            Ok(0.5 * pos.max(neg))
        }
        2 => planar_cell_radius(&nonzero),
        _ => {
            let reach = nonzero.iter().map(|p| norm(p)).fold(0.0, f64::max);
            let per_axis = (2.0e7f64).powf(1.0 / dim as f64).floor().max(8.0);
            Ok(bound_oracle(points, 4.0 * reach / per_axis))
        }
    }
}

fn planar_cell_radius(nonzero: &[&[f64]]) -> Result<f64> {
    let halfplanes: Vec<([f64; 2], f64)> = nonzero
        .iter()
        .map(|u| ([u[0], u[1]], half_sq_norm(u)))
        .collect();
    let mut best: Option<f64> = None;
    for (a, &(n1, c1)) in halfplanes.iter().enumerate() {
        for &(n2, c2) in &halfplanes[a + 1..] {
            let det = n1[0] * n2[1] - n1[1] * n2[0];
            if det.abs() <= 1e-14 * (n1[0].hypot(n1[1]) * n2[0].hypot(n2[1])) {
                continue;
            }
            let x = [
                (c1 * n2[1] - c2 * n1[1]) / det,
                (n1[0] * c2 - n2[0] * c1) / det,
            ];
            let r = x[0].hypot(x[1]);
            let feasible = halfplanes
                .iter()
                .all(|&(n, c)| n[0] * x[0] + n[1] * x[1] <= c + 1e-10 * (c + n[0].hypot(n[1]) * r));
            if feasible {
                best = Some(best.map_or(r, |b: f64| b.max(r)));
            }
        }
    }
    best.ok_or(Error::UnboundedCell)
}

/// Brute-force estimate of `δ`: the largest norm among grid points of
/// spacing `resolution` (box `[-2R, 2R]^m`, `R` the largest action norm)
/// whose selected nearest action is zero. Within one grid diagonal of the
/// exact value when (A1) holds.
pub fn bound_oracle(points: &[Vec<f64>], resolution: f64) -> f64 {
    assert!(resolution > 0.0, "grid resolution must be positive");
    let dim = points[0].len();
    let nonzero: Vec<(&[f64], f64)> = points
        .iter()
        .filter(|p| p.iter().any(|&c| c != 0.0))
        .map(|p| (p.as_slice(), half_sq_norm(p)))
        .collect();
    let reach = 2.0 * nonzero.iter().map(|(p, _)| norm(p)).fold(0.0, f64::max);
    let steps = (2.0 * reach / resolution).ceil() as usize;
    let coord = |i: usize| -reach + i as f64 * resolution;

    let mut best_sq = 0.0f64;
    let mut index = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    loop {
        for (xi, &ii) in x.iter_mut().zip(&index) {
            *xi = coord(ii);
        }
        let sq = x.iter().map(|v| v * v).sum::<f64>();
        if sq > best_sq && nonzero.iter().all(|(u, h)| h - dot(u, &x) >= 0.0) {
            best_sq = sq;
        }
        // odometer over the grid
        let mut axis = 0;
        loop {
            if axis == dim {
                return best_sq.sqrt();
            }
            index[axis] += 1;
            if index[axis] <= steps {
                break;
            }
            index[axis] = 0;
            axis += 1;
        }
    }
}
