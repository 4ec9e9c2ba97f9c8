//! Consensus and distance-based formation control fields, their quantized
//! versions, and the practical-stability radii they converge to.
//!
//! Stacked vectors store one `m`-block per agent (`x`, `u`) or per edge
//! (`z`). Kronecker-structured operators such as `(Bᵀ ⊗ I_m)` are applied
//! edge by edge and never materialized.

use serde::{Deserialize, Serialize};

use crate::actions::ActionSet;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::vecops::norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    AgentMajor,
    EdgeMajor,
}

/// Vector in `R^{Nm}` (agent-major) or `R^{Mm}` (edge-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StackedRepr", into = "StackedRepr")]
pub struct StackedVector {
    data: Vec<f64>,
    dim: usize,
    layout: Layout,
}

#[derive(Serialize, Deserialize)]
struct StackedRepr {
    dim: usize,
    layout: Layout,
    data: Vec<f64>,
}

impl TryFrom<StackedRepr> for StackedVector {
    type Error = Error;

    fn try_from(r: StackedRepr) -> Result<Self> {
        StackedVector::new(r.data, r.dim, r.layout)
    }
}

impl From<StackedVector> for StackedRepr {
    fn from(v: StackedVector) -> Self {
        StackedRepr {
            dim: v.dim,
            layout: v.layout,
            data: v.data,
        }
    }
}

impl StackedVector {
    pub fn new(data: Vec<f64>, dim: usize, layout: Layout) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim * (data.len() / dim.max(1) + 1),
                found: data.len(),
            });
        }
        Ok(StackedVector { data, dim, layout })
    }

    pub fn agents(data: Vec<f64>, dim: usize) -> Result<Self> {
        Self::new(data, dim, Layout::AgentMajor)
    }

    /// Agent-major stack from per-agent blocks.
    pub fn from_blocks(blocks: &[Vec<f64>]) -> Result<Self> {
        let dim = blocks.first().map_or(0, Vec::len);
        if let Some(bad) = blocks.iter().find(|b| b.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        Self::agents(blocks.concat(), dim)
    }

    pub fn zeros(blocks: usize, dim: usize, layout: Layout) -> Self {
        StackedVector {
            data: vec![0.0; blocks * dim],
            dim,
            layout,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn n_blocks(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn block(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    fn expect(&self, layout: Layout, blocks: usize, dim: usize) -> Result<()> {
        if self.layout != layout || self.dim != dim || self.n_blocks() != blocks {
            return Err(Error::DimensionMismatch {
                expected: blocks * dim,
                found: self.data.len(),
            });
        }
        Ok(())
    }
}

/// Desired inter-agent distances, one per edge in graph edge order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FormationSpec {
    distances: Vec<f64>,
}

impl TryFrom<Vec<f64>> for FormationSpec {
    type Error = Error;

    fn try_from(distances: Vec<f64>) -> Result<Self> {
        FormationSpec::new(distances)
    }
}

impl From<FormationSpec> for Vec<f64> {
    fn from(spec: FormationSpec) -> Self {
        spec.distances
    }
}

impl FormationSpec {
    pub fn new(distances: Vec<f64>) -> Result<Self> {
        if distances.is_empty() {
            return Err(Error::InvalidConfig(
                "formation needs at least one distance".into(),
            ));
        }
        if let Some(bad) = distances.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidConfig(format!(
                "desired distance {bad} is not positive"
            )));
        }
        Ok(FormationSpec { distances })
    }

    /// Chord lengths between agents placed equidistantly, in index order,
    /// on a circle of the given radius.
    pub fn regular_polygon(g: &Graph, radius: f64) -> Result<Self> {
        let n = g.n_agents() as f64;
        let distances = g
            .edges()
            .iter()
            .map(|&(i, j)| {
                let gap = i.abs_diff(j) as f64;
                2.0 * radius * (std::f64::consts::PI * gap / n).sin()
            })
            .collect();
        Self::new(distances)
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }
}

/// `z = (Bᵀ ⊗ I_m) x`: for edge `k = (i, j)`, `z_k = x_i − x_j`.
pub fn relative_positions(g: &Graph, x: &StackedVector) -> Result<StackedVector> {
    x.expect(Layout::AgentMajor, g.n_agents(), x.dim())?;
    let mut z = StackedVector::zeros(g.n_edges(), x.dim(), Layout::EdgeMajor);
    relative_positions_into(g, x.as_slice(), x.dim(), z.as_mut_slice());
    Ok(z)
}

pub(crate) fn relative_positions_into(g: &Graph, x: &[f64], dim: usize, z: &mut [f64]) {
    for (k, &(i, j)) in g.edges().iter().enumerate() {
        for c in 0..dim {
            z[k * dim + c] = x[i * dim + c] - x[j * dim + c];
        }
    }
}

/// `−(B ⊗ I_m) w` for an edge-major `w`, accumulated into agent blocks.
pub(crate) fn neg_incidence_apply(g: &Graph, w: &[f64], dim: usize, out: &mut [f64]) {
    out.fill(0.0);
    for (k, &(i, j)) in g.edges().iter().enumerate() {
        for c in 0..dim {
            let v = w[k * dim + c];
            out[i * dim + c] -= v;
            out[j * dim + c] += v;
        }
    }
}

/// `u = −(L ⊗ I_m) x`; agent `i` receives `−Σ_{j ∈ N(i)} (x_i − x_j)`.
pub fn consensus_field(g: &Graph, x: &StackedVector) -> Result<StackedVector> {
    let z = relative_positions(g, x)?;
    let mut out = StackedVector::zeros(g.n_agents(), x.dim(), Layout::AgentMajor);
    neg_incidence_apply(g, z.as_slice(), x.dim(), out.as_mut_slice());
    Ok(out)
}

/// `e_k = ‖z_k‖² − d_k²`.
pub fn formation_error(z: &StackedVector, spec: &FormationSpec) -> Result<Vec<f64>> {
    if z.layout() != Layout::EdgeMajor || z.n_blocks() != spec.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.len(),
            found: z.n_blocks(),
        });
    }
    Ok(formation_error_slice(
        z.as_slice(),
        z.dim(),
        spec.distances(),
    ))
}

pub(crate) fn formation_error_slice(z: &[f64], dim: usize, distances: &[f64]) -> Vec<f64> {
    z.chunks(dim)
        .zip(distances)
        .map(|(zk, d)| crate::vecops::sq_norm(zk) - d * d)
        .collect()
}

/// `u = −(B ⊗ I_m) D_z e`, with `D_z e` formed edgewise as `z_k e_k`.
pub fn formation_field(g: &Graph, z: &StackedVector, e: &[f64]) -> Result<StackedVector> {
    z.expect(Layout::EdgeMajor, g.n_edges(), z.dim())?;
    if e.len() != g.n_edges() {
        return Err(Error::DimensionMismatch {
            expected: g.n_edges(),
            found: e.len(),
        });
    }
    let mut out = StackedVector::zeros(g.n_agents(), z.dim(), Layout::AgentMajor);
    formation_field_into(g, z.as_slice(), e, z.dim(), out.as_mut_slice());
    Ok(out)
}

pub(crate) fn formation_field_into(g: &Graph, z: &[f64], e: &[f64], dim: usize, out: &mut [f64]) {
    out.fill(0.0);
    for (k, &(i, j)) in g.edges().iter().enumerate() {
        for c in 0..dim {
            let v = z[k * dim + c] * e[k];
            out[i * dim + c] -= v;
            out[j * dim + c] += v;
        }
    }
}

fn check_sets(sets: &[ActionSet], agents: usize, dim: usize) -> Result<()> {
    if sets.len() != agents {
        return Err(Error::AgentSetMismatch {
            expected: agents,
            found: sets.len(),
        });
    }
    if let Some(bad) = sets.iter().find(|s| s.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.dim(),
        });
    }
    Ok(())
}

/// Applies each agent's nearest-action selector to its block of `field`.
pub fn quantize_field(field: &StackedVector, sets: &[ActionSet]) -> Result<StackedVector> {
    if field.layout() != Layout::AgentMajor {
        return Err(Error::DimensionMismatch {
            expected: field.n_blocks(),
            found: 0,
        });
    }
    check_sets(sets, field.n_blocks(), field.dim())?;
    let mut out = StackedVector::zeros(field.n_blocks(), field.dim(), Layout::AgentMajor);
    quantize_into(field.as_slice(), sets, field.dim(), out.as_mut_slice());
    Ok(out)
}

/// Returns whether any agent selected a nonzero action.
pub(crate) fn quantize_into(
    field: &[f64],
    sets: &[ActionSet],
    dim: usize,
    out: &mut [f64],
) -> bool {
    let mut moving = false;
    for (agent, set) in sets.iter().enumerate() {
        let eta = &field[agent * dim..(agent + 1) * dim];
        let idx = set.nearest_select_index(eta);
        out[agent * dim..(agent + 1) * dim].copy_from_slice(set.point(idx));
        moving |= idx != 0;
    }
    moving
}

pub(crate) fn validate_sets(sets: &[ActionSet], agents: usize, dim: usize) -> Result<()> {
    check_sets(sets, agents, dim)
}

/// Consensus radius `δ = Σ δ_i`.
pub fn consensus_bound(sets: &[ActionSet]) -> f64 {
    sets.iter().map(ActionSet::delta).sum()
}

/// Constants of the formation error radius `‖e‖ ≤ δ / c₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormationBound {
    pub delta: f64,
    /// `min_k d_k²`; initial errors must satisfy `‖e(0)‖ < c1`.
    pub c1: f64,
    /// `sqrt(Σ_k (d_k² − c1))`.
    pub c2: f64,
    pub bound: f64,
}

/// Formation radius from the summed Voronoi bounds and the desired
/// distances. Fails with [`Error::DegenerateBound`] when every `d_k` is
/// equal, since `c2` then vanishes.
pub fn formation_bound(sets: &[ActionSet], spec: &FormationSpec) -> Result<FormationBound> {
    formation_bound_from_delta(consensus_bound(sets), spec)
}

pub fn formation_bound_from_delta(delta: f64, spec: &FormationSpec) -> Result<FormationBound> {
    let squares: Vec<f64> = spec.distances().iter().map(|d| d * d).collect();
    let c1 = squares.iter().copied().fold(f64::INFINITY, f64::min);
    let c2_sq: f64 = squares.iter().map(|s| s - c1).sum();
    // distances that agree up to rounding count as equal
    if c2_sq <= 1e-12 * c1 * squares.len() as f64 {
        return Err(Error::DegenerateBound { delta, c1 });
    }
    let c2 = c2_sq.sqrt();
    Ok(FormationBound {
        delta,
        c1,
        c2,
        bound: delta / c2,
    })
}

/// `1 / sqrt(λ₂)`: the certified constant in
/// `z ∈ Im(Bᵀ ⊗ I_m) ⇒ ‖z‖ ≤ ‖(B ⊗ I_m) z‖ / sqrt(λ₂)`.
pub fn spectral_ratio(g: &Graph) -> f64 {
    1.0 / g.algebraic_connectivity().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphKind;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    const S3: f64 = 0.866_025_403_784_438_6;

    fn edge() -> Graph {
        Graph::from_edges(2, &[(1, 2)]).unwrap()
    }

    fn path() -> Graph {
        Graph::from_edges(3, &[(1, 2), (2, 3)]).unwrap()
    }

    fn agents(blocks: &[[f64; 2]]) -> StackedVector {
        StackedVector::from_blocks(&blocks.iter().map(|b| b.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn relative_position_examples() {
        let z = relative_positions(&edge(), &agents(&[[0.0, 0.0], [10.0, 0.0]])).unwrap();
        assert_eq!(z.as_slice(), &[-10.0, 0.0]);
        assert_eq!(z.layout(), Layout::EdgeMajor);

        let same = relative_positions(&path(), &agents(&[[2.0, 3.0]; 3])).unwrap();
        assert!(same.as_slice().iter().all(|&v| v == 0.0));

        let z =
            relative_positions(&path(), &agents(&[[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]])).unwrap();
        assert_eq!(z.as_slice(), &[-1.0, 0.0, -2.0, 0.0]);

        let short = agents(&[[0.0, 0.0], [1.0, 0.0]]);
        assert!(matches!(
            relative_positions(&path(), &short),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn consensus_field_examples() {
        let u = consensus_field(&edge(), &agents(&[[0.0, 0.0], [10.0, 0.0]])).unwrap();
        assert_eq!(u.as_slice(), &[10.0, 0.0, -10.0, 0.0]);
        let u = consensus_field(&path(), &agents(&[[1.5, -2.0]; 3])).unwrap();
        assert!(u.as_slice().iter().all(|&v| v == 0.0));
        let u = consensus_field(&path(), &agents(&[[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]])).unwrap();
        assert_eq!(u.as_slice(), &[1.0, 0.0, 1.0, 0.0, -2.0, 0.0]);
    }

    #[test]
    fn formation_error_examples() {
        let one = |v: [f64; 2]| StackedVector::new(v.to_vec(), 2, Layout::EdgeMajor).unwrap();
        let spec = |d: &[f64]| FormationSpec::new(d.to_vec()).unwrap();
        assert_eq!(
            formation_error(&one([3.0, 4.0]), &spec(&[5.0])).unwrap(),
            vec![0.0]
        );
        assert_eq!(
            formation_error(&one([1.0, 0.0]), &spec(&[2.0])).unwrap(),
            vec![-3.0]
        );
        let two = StackedVector::new(vec![2.0, 0.0, 0.0, 1.0], 2, Layout::EdgeMajor).unwrap();
        assert_eq!(
            formation_error(&two, &spec(&[1.0, 1.0])).unwrap(),
            vec![3.0, 0.0]
        );
        assert!(formation_error(&two, &spec(&[1.0])).is_err());
    }

    #[test]
    fn formation_field_examples() {
        let g = edge();
        let spec = FormationSpec::new(vec![1.0]).unwrap();

        let z = relative_positions(&g, &agents(&[[0.0, 0.0], [2.0, 0.0]])).unwrap();
        let e = formation_error(&z, &spec).unwrap();
        assert_eq!(e, vec![3.0]);
        assert_eq!(
            formation_field(&g, &z, &e).unwrap().as_slice(),
            &[6.0, 0.0, -6.0, 0.0]
        );

        let z = relative_positions(&g, &agents(&[[0.0, 0.0], [0.5, 0.0]])).unwrap();
        let e = formation_error(&z, &spec).unwrap();
        assert_eq!(e, vec![-0.75]);
        assert_eq!(
            formation_field(&g, &z, &e).unwrap().as_slice(),
            &[-0.375, 0.0, 0.375, 0.0]
        );

        let u = formation_field(&g, &z, &[0.0]).unwrap();
        assert!(u.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn quantize_examples() {
        let sets = vec![ActionSet::triangle(1.0, 0.0).unwrap(); 2];
        let u = quantize_field(&agents(&[[6.0, 0.0], [-6.0, 0.0]]), &sets).unwrap();
        assert_close(u.as_slice(), &[S3, -0.5, -S3, -0.5], 1e-15);

        let u = quantize_field(&agents(&[[0.0, 0.0], [0.0, 0.0]]), &sets).unwrap();
        assert!(u.as_slice().iter().all(|&v| v == 0.0));

        let u = quantize_field(&agents(&[[0.1, 0.0], [-0.1, 0.0]]), &sets).unwrap();
        assert!(u.as_slice().iter().all(|&v| v == 0.0));

        assert_eq!(
            quantize_field(&agents(&[[0.0, 0.0]; 3]), &sets),
            Err(Error::AgentSetMismatch {
                expected: 3,
                found: 2
            })
        );
    }

    #[test]
    fn consensus_bound_examples() {
        let sets: Vec<ActionSet> = [0.3, 0.3, 0.4]
            .iter()
            .map(|&r| ActionSet::triangle(r, 0.0).unwrap())
            .collect();
        assert!((consensus_bound(&sets) - 1.0).abs() < 1e-12);
        assert!((consensus_bound(&sets[..1]) - 0.3).abs() < 1e-12);
        let half = ActionSet::triangle(0.5, 1.0).unwrap();
        assert!((consensus_bound(&[half]) - 0.5).abs() < 1e-12);
        let units = vec![ActionSet::triangle(1.0, 0.0).unwrap(); 3];
        assert!((consensus_bound(&units) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn formation_bound_examples() {
        let spec = FormationSpec::new(vec![SQRT_2, SQRT_2, SQRT_2, SQRT_2, 2.0]).unwrap();
        let b = formation_bound_from_delta(1.0, &spec).unwrap();
        assert!((b.c1 - 2.0).abs() < 1e-12);
        assert!((b.c2 - SQRT_2).abs() < 1e-12);
        assert!((b.bound - FRAC_1_SQRT_2).abs() < 1e-12);

        let fan = Graph::generate(GraphKind::TriangulatedPolygon, 4).unwrap();
        let chords = FormationSpec::regular_polygon(&fan, 1.0).unwrap();
        let b2 = formation_bound_from_delta(1.0, &chords).unwrap();
        assert!((b2.bound - FRAC_1_SQRT_2).abs() < 1e-12);

        let uniform = FormationSpec::new(vec![1.3; 3]).unwrap();
        assert!(matches!(
            formation_bound_from_delta(1.0, &uniform),
            Err(Error::DegenerateBound { .. })
        ));
        let sets = vec![ActionSet::triangle(0.2, 0.0).unwrap(); 2];
        match formation_bound(&sets, &FormationSpec::new(vec![1.0]).unwrap()) {
            Err(Error::DegenerateBound { delta, c1 }) => {
                assert!((delta - 0.4).abs() < 1e-12);
                assert_eq!(c1, 1.0);
            }
            other => panic!("expected DegenerateBound, got {other:?}"),
        }
    }

    #[test]
    fn spectral_ratio_examples() {
        let k3 = Graph::generate(GraphKind::Complete, 3).unwrap();
        assert!((spectral_ratio(&k3) - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!((spectral_ratio(&edge()) - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((spectral_ratio(&path()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn regular_polygon_chords() {
        let fan = Graph::generate(GraphKind::TriangulatedPolygon, 4).unwrap();
        let spec = FormationSpec::regular_polygon(&fan, 1.0).unwrap();
        let expected = [SQRT_2, SQRT_2, SQRT_2, SQRT_2, 2.0];
        assert_close(spec.distances(), &expected, 1e-12);
        assert!(FormationSpec::new(vec![1.0, 0.0]).is_err());
    }

    /// Dense `−(B ⊗ I_m) D_z e` with the Kronecker product and `D_z`
    /// written out entry by entry.
    fn dense_formation_field(g: &Graph, z: &[f64], e: &[f64], m: usize) -> Vec<f64> {
        let (n, edges) = (g.n_agents(), g.n_edges());
        let mut kron = vec![vec![0.0; edges * m]; n * m];
        for i in 0..n {
            for k in 0..edges {
                for c in 0..m {
                    kron[i * m + c][k * m + c] = f64::from(g.incidence_entry(i, k));
                }
            }
        }
        let mut dz = vec![vec![0.0; edges]; edges * m];
        for k in 0..edges {
            for c in 0..m {
                dz[k * m + c][k] = z[k * m + c];
            }
        }
        let dze: Vec<f64> = dz
            .iter()
            .map(|row| row.iter().zip(e).map(|(a, b)| a * b).sum())
            .collect();
        kron.iter()
            .map(|row| -row.iter().zip(&dze).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (3usize..=7, 0usize..3).prop_map(|(n, kind)| {
            let kind = [
                GraphKind::Ring,
                GraphKind::Complete,
                GraphKind::TriangulatedPolygon,
            ][kind];
            Graph::generate(kind, n).unwrap()
        })
    }

    proptest! {
        #[test]
        fn formation_field_matches_dense_kronecker(
            g in arb_graph(),
            raw in proptest::collection::vec(-3.0f64..3.0, 14),
            d in 0.2f64..2.0,
        ) {
            let n = g.n_agents();
            let x = StackedVector::agents(raw[..2 * n].to_vec(), 2).unwrap();
            let z = relative_positions(&g, &x).unwrap();
            let spec = FormationSpec::new(vec![d; g.n_edges()]).unwrap();
            let e = formation_error(&z, &spec).unwrap();
            let fast = formation_field(&g, &z, &e).unwrap();
            let dense = dense_formation_field(&g, z.as_slice(), &e, 2);
            for (a, b) in fast.as_slice().iter().zip(&dense) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn laplacian_quadratic_form(
            g in arb_graph(),
            raw in proptest::collection::vec(-5.0f64..5.0, 14),
        ) {
            let n = g.n_agents();
            let x = StackedVector::agents(raw[..2 * n].to_vec(), 2).unwrap();
            let z = relative_positions(&g, &x).unwrap();
            let l = g.laplacian();
            let mut quad = 0.0;
            for c in 0..2 {
                for i in 0..n {
                    for j in 0..n {
                        quad += x.block(i)[c] * l[(i, j)] as f64 * x.block(j)[c];
                    }
                }
            }
            let lhs = z.norm().powi(2);
            prop_assert!((lhs - quad).abs() <= 1e-12 * lhs.max(1.0));
        }

        #[test]
        fn quantized_controls_descend(
            g in arb_graph(),
            raw in proptest::collection::vec(-5.0f64..5.0, 14),
            scales in proptest::collection::vec(0.05f64..1.0, 7),
            thetas in proptest::collection::vec(0.0f64..std::f64::consts::TAU, 7),
        ) {
            let n = g.n_agents();
            let x = StackedVector::agents(raw[..2 * n].to_vec(), 2).unwrap();
            let sets: Vec<ActionSet> = (0..n)
                .map(|i| ActionSet::triangle(scales[i], thetas[i]).unwrap())
                .collect();
            let eta = consensus_field(&g, &x).unwrap();
            let u = quantize_field(&eta, &sets).unwrap();
            for (ui, ei) in u.blocks().zip(eta.blocks()) {
                if ui.iter().any(|&v| v != 0.0) {
                    prop_assert!(crate::vecops::dot(ui, ei) >= crate::vecops::half_sq_norm(ui));
                }
            }
        }

        #[test]
        fn formation_error_vanishes_on_target(
            lengths in proptest::collection::vec(0.1f64..3.0, 1..6),
            angles in proptest::collection::vec(0.0f64..std::f64::consts::TAU, 6),
        ) {
            let z: Vec<f64> = lengths
                .iter()
                .zip(&angles)
                .flat_map(|(l, a)| [l * a.cos(), l * a.sin()])
                .collect();
            let z = StackedVector::new(z, 2, Layout::EdgeMajor).unwrap();
            let spec = FormationSpec::new(lengths.clone()).unwrap();
            for e in formation_error(&z, &spec).unwrap() {
                prop_assert!(e.abs() <= 1e-12 * 9.0);
            }
        }
    }
}
