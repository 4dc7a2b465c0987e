//! Connecting and separating families as separation oracles.
//!
//! A connecting family `Gamma(E, F)` is the set of 8-connected grid paths from
//! the closed side `E` to the closed side `F`. A separating family
//! `Sigma(E, F)` is represented by its dual paths: every boundary that cuts
//! `E` from `F` inside the quadrilateral contains a simple path joining the two
//! transverse sides, and its `H^1` measure dominates the measure of that path,
//! so admissibility against dual paths is the binding condition.

use alloc::vec::Vec;

use crate::geometry::{MetricGrid, Side};
use crate::modulus::{ConstraintOracle, Separation};
use crate::search::{dijkstra, ShortestPaths};
use crate::{Error, Result};

/// Quadrature rule for `integral rho ds` along a grid path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntegrationRule {
    /// `rho(x) * |y - x|` per step, weight at `x`.
    LeftEndpoint,
    /// `(rho(x) w(x) + rho(y) w(y)) / 2 * |y - x|` per step.
    Trapezoid,
}

impl IntegrationRule {
    /// The contribution of the step `a -> b` to the line integral of `rho`.
    #[inline]
    pub fn step_integral(self, grid: &MetricGrid, rho: &[f64], a: usize, b: usize) -> f64 {
        match self {
            IntegrationRule::LeftEndpoint => rho[a] * grid.step_length(a, b),
            IntegrationRule::Trapezoid => {
                0.5 * (rho[a] * grid.weight(a) + rho[b] * grid.weight(b)) * grid.distance(a, b)
            }
        }
    }

    #[inline]
    pub fn step_length(self, grid: &MetricGrid, a: usize, b: usize) -> f64 {
        match self {
            IntegrationRule::LeftEndpoint => grid.step_length(a, b),
            IntegrationRule::Trapezoid => grid.symmetric_step_length(a, b),
        }
    }
}

/// An 8-connected path of grid nodes with its per-step lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCurve {
    pub nodes: Vec<usize>,
    pub lengths: Vec<f64>,
    pub total_length: f64,
    pub simple: bool,
    pub rule: IntegrationRule,
}

impl DiscreteCurve {
    pub fn new(grid: &MetricGrid, nodes: Vec<usize>, rule: IntegrationRule) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Domain("a curve needs at least one node".into()));
        }
        for &v in &nodes {
            if v >= grid.node_count() {
                return Err(Error::IndexOutOfRange {
                    index: v,
                    len: grid.node_count(),
                });
            }
        }
        for w in nodes.windows(2) {
            if !grid.are_adjacent(w[0], w[1]) {
                return Err(Error::NotAdjacent {
                    from: w[0],
                    to: w[1],
                });
            }
        }
        let lengths: Vec<f64> = nodes
            .windows(2)
            .map(|w| rule.step_length(grid, w[0], w[1]))
            .collect();
        Ok(Self::from_parts(nodes, lengths, rule))
    }

    fn from_parts(nodes: Vec<usize>, lengths: Vec<f64>, rule: IntegrationRule) -> Self {
        let total_length = lengths.iter().sum();
        let simple = is_simple(&nodes);
        DiscreteCurve {
            nodes,
            lengths,
            total_length,
            simple,
            rule,
        }
    }

    pub fn start(&self) -> usize {
        self.nodes[0]
    }

    pub fn end(&self) -> usize {
        self.nodes[self.nodes.len() - 1]
    }

    /// Line integral of `rho` along the curve under its rule.
    pub fn integrate(&self, grid: &MetricGrid, rho: &[f64]) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| self.rule.step_integral(grid, rho, w[0], w[1]))
            .sum()
    }

    /// The curve as a linear constraint `sum_v weight_v rho_v`: each node
    /// carries its share of the adjacent step lengths under the curve's rule.
    pub fn to_constraint(&self, grid: &MetricGrid) -> MeasureConstraint {
        let mut pairs: Vec<(usize, f64)> = Vec::with_capacity(self.nodes.len());
        for w in self.nodes.windows(2) {
            let (a, b) = (w[0], w[1]);
            match self.rule {
                IntegrationRule::LeftEndpoint => pairs.push((a, grid.step_length(a, b))),
                IntegrationRule::Trapezoid => {
                    let half = 0.5 * grid.distance(a, b);
                    pairs.push((a, half * grid.weight(a)));
                    pairs.push((b, half * grid.weight(b)));
                }
            }
        }
        MeasureConstraint::from_pairs(pairs)
    }
}

fn is_simple(nodes: &[usize]) -> bool {
    let mut sorted = nodes.to_vec();
    sorted.sort_unstable();
    sorted.windows(2).all(|w| w[0] != w[1])
}

/// Removes loops in visiting order: on revisiting a node the path is cut back
/// to that node's first occurrence. The result is simple, keeps both
/// endpoints, and uses a subsequence of the original steps.
pub fn loop_erase(curve: &DiscreteCurve) -> DiscreteCurve {
    let mut nodes: Vec<usize> = Vec::with_capacity(curve.nodes.len());
    let mut lengths: Vec<f64> = Vec::with_capacity(curve.lengths.len());
    for (k, &v) in curve.nodes.iter().enumerate() {
        if let Some(pos) = nodes.iter().position(|&u| u == v) {
            nodes.truncate(pos + 1);
            lengths.truncate(pos);
        } else {
            if k > 0 {
                lengths.push(curve.lengths[k - 1]);
            }
            nodes.push(v);
        }
    }
    DiscreteCurve::from_parts(nodes, lengths, curve.rule)
}

/// A finite measure on grid nodes, `sigma = sum_v weight_v delta_v`.
///
/// Built from a simple curve, the weights are the per-node length shares and
/// `total` is the curve's `H^1` length. The empty measure stands for a
/// separating boundary of zero length.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureConstraint {
    pub support: Vec<usize>,
    pub weights: Vec<f64>,
    pub total: f64,
}

impl MeasureConstraint {
    /// Merges repeated nodes and drops zero weights; nodes come out sorted.
    pub fn from_pairs(mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|&(v, _)| v);
        let mut support: Vec<usize> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (v, w) in pairs {
            if support.last() == Some(&v) {
                *weights.last_mut().unwrap() += w;
            } else {
                support.push(v);
                weights.push(w);
            }
        }
        let (support, weights): (Vec<usize>, Vec<f64>) = support
            .into_iter()
            .zip(weights)
            .filter(|&(_, w)| w > 0.0)
            .unzip();
        let total = weights.iter().sum();
        MeasureConstraint {
            support,
            weights,
            total,
        }
    }

    pub fn null() -> Self {
        MeasureConstraint {
            support: Vec::new(),
            weights: Vec::new(),
            total: 0.0,
        }
    }

    pub fn is_null(&self) -> bool {
        self.total <= 0.0
    }

    #[inline]
    pub fn integrate(&self, rho: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.weights)
            .map(|(&v, &w)| w * rho[v])
            .sum()
    }

    /// Adds `extra[v] >= 0` to the weight of every supported node.
    pub fn enlarged(&self, extra: &[f64]) -> Self {
        let pairs = self
            .support
            .iter()
            .zip(&self.weights)
            .map(|(&v, &w)| (v, w + extra[v].max(0.0)))
            .collect();
        Self::from_pairs(pairs)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        MeasureConstraint {
            support: self.support.clone(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
            total: self.total * factor,
        }
    }
}

pub(crate) fn check_density(rho: &[f64], len: usize) -> Result<()> {
    if rho.len() != len {
        return Err(Error::SizeMismatch {
            expected: len,
            found: rho.len(),
        });
    }
    match rho.iter().position(|&r| !(r >= 0.0 && r.is_finite())) {
        Some(index) => Err(Error::InvalidDensity {
            index,
            value: rho[index],
        }),
        None => Ok(()),
    }
}

/// Result of a minimum line-integral search.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSearch {
    pub value: f64,
    pub curve: DiscreteCurve,
}

/// Result of a most-violated separating-boundary search.
#[derive(Debug, Clone, PartialEq)]
pub struct CutSearch {
    pub mass: f64,
    pub constraint: MeasureConstraint,
    /// The dual path realizing the cut; `None` for the empty boundary.
    pub dual_path: Option<DiscreteCurve>,
}

/// Curves joining two sides of the grid.
#[derive(Debug, Clone)]
pub struct ConnectingFamily<'g> {
    grid: &'g MetricGrid,
    source: Side,
    sink: Side,
    rule: IntegrationRule,
    source_nodes: Vec<usize>,
    sink_mask: Vec<bool>,
}

impl<'g> ConnectingFamily<'g> {
    pub fn new(grid: &'g MetricGrid, source: Side, sink: Side, rule: IntegrationRule) -> Result<Self> {
        let source_nodes = grid.closed_side(source);
        if source_nodes.is_empty() {
            return Err(Error::EmptySide(source.name()));
        }
        let sink_mask = grid.closed_side_mask(sink)?;
        if source_nodes.iter().any(|&v| sink_mask[v]) {
            return Err(Error::Domain(alloc::format!(
                "sides {} and {} share nodes",
                source.name(),
                sink.name()
            )));
        }
        Ok(ConnectingFamily {
            grid,
            source,
            sink,
            rule,
            source_nodes,
            sink_mask,
        })
    }

    /// `Gamma(side, opposite side)` with the trapezoid rule.
    pub fn crossing(grid: &'g MetricGrid, source: Side) -> Result<Self> {
        Self::new(grid, source, source.opposite(), IntegrationRule::Trapezoid)
    }

    pub fn grid(&self) -> &'g MetricGrid {
        self.grid
    }

    pub fn source(&self) -> Side {
        self.source
    }

    pub fn sink(&self) -> Side {
        self.sink
    }

    pub fn rule(&self) -> IntegrationRule {
        self.rule
    }

    pub fn source_nodes(&self) -> &[usize] {
        &self.source_nodes
    }

    pub fn sink_nodes(&self) -> Vec<usize> {
        (0..self.grid.node_count()).filter(|&v| self.sink_mask[v]).collect()
    }

    /// Minimum of `integral rho ds` over paths from source to sink, with one
    /// minimizing path. `None` when no path exists.
    pub fn shortest_admissible_curve(&self, rho: &[f64]) -> Result<Option<CurveSearch>> {
        check_density(rho, self.grid.node_count())?;
        Ok(self.forward_search(rho, None))
    }

    /// The minimizing path restricted to nodes with `allowed[v]`.
    pub(crate) fn forward_search(&self, rho: &[f64], allowed: Option<&[bool]>) -> Option<CurveSearch> {
        let grid = self.grid;
        let rule = self.rule;
        let sources: Vec<usize> = match allowed {
            Some(mask) => self.source_nodes.iter().copied().filter(|&v| mask[v]).collect(),
            None => self.source_nodes.clone(),
        };
        let sp = dijkstra(
            grid.node_count(),
            &sources,
            |u, out| {
                grid.for_each_neighbor(u, |w| {
                    if allowed.is_none_or(|m| m[w]) {
                        out.push(w)
                    }
                })
            },
            |u, w| rule.step_integral(grid, rho, u, w),
            Some(&self.sink_mask),
        );
        let end = sp.reached?;
        let curve = self.curve_from_nodes(sp.path_to(end));
        let value = curve.integrate(grid, rho);
        Some(CurveSearch { value, curve })
    }

    /// `d(E, F)`: the length of the shortest path under the family's rule.
    pub fn distance(&self) -> Option<f64> {
        let ones = alloc::vec![1.0; self.grid.node_count()];
        self.forward_search(&ones, None).map(|s| s.value)
    }

    fn curve_from_nodes(&self, nodes: Vec<usize>) -> DiscreteCurve {
        let lengths = nodes
            .windows(2)
            .map(|w| self.rule.step_length(self.grid, w[0], w[1]))
            .collect();
        DiscreteCurve::from_parts(nodes, lengths, self.rule)
    }

    /// Shortest paths from every source node, searched backwards from the sink.
    fn backward_search(&self, rho: &[f64]) -> ShortestPaths {
        let grid = self.grid;
        let rule = self.rule;
        let sinks = self.sink_nodes();
        dijkstra(
            grid.node_count(),
            &sinks,
            |u, out| grid.for_each_neighbor(u, |w| out.push(w)),
            // Relaxing u -> w backwards prices the forward step w -> u.
            |u, w| rule.step_integral(grid, rho, w, u),
            None,
        )
    }

    fn per_source_cuts(&self, rho: &[f64], max_cuts: usize) -> Separation {
        let sp = self.backward_search(rho);
        let mut starts: Vec<usize> = self
            .source_nodes
            .iter()
            .copied()
            .filter(|&s| sp.dist[s].is_finite())
            .collect();
        if starts.is_empty() {
            return Separation::NoMembers;
        }
        starts.sort_by(|&a, &b| sp.dist[a].total_cmp(&sp.dist[b]).then(a.cmp(&b)));
        starts.truncate(max_cuts.max(1));
        let cuts = starts
            .into_iter()
            .map(|s| {
                let mut nodes = sp.path_to(s);
                nodes.reverse();
                let constraint = self.curve_from_nodes(nodes).to_constraint(self.grid);
                (constraint.integrate(rho), constraint)
            })
            .collect();
        Separation::Cuts(cuts)
    }
}

impl ConstraintOracle for ConnectingFamily<'_> {
    fn node_count(&self) -> usize {
        self.grid.node_count()
    }

    fn separate(&self, rho: &[f64], max_cuts: usize) -> Result<Separation> {
        check_density(rho, self.grid.node_count())?;
        Ok(self.per_source_cuts(rho, max_cuts))
    }
}

/// Boundaries separating `E` from the opposite side `F`, represented by dual
/// paths between the two transverse sides.
#[derive(Debug, Clone)]
pub struct SeparatingFamily<'g> {
    grid: &'g MetricGrid,
    separated: (Side, Side),
    dual: ConnectingFamily<'g>,
    separable: bool,
}

impl<'g> SeparatingFamily<'g> {
    pub fn new(grid: &'g MetricGrid, e: Side) -> Result<Self> {
        let f = e.opposite();
        let (b, d) = e.transverse();
        let dual = ConnectingFamily::new(grid, b, d, IntegrationRule::Trapezoid)?;
        let separable = grid.connects(&grid.closed_side(e), &grid.closed_side(f));
        Ok(SeparatingFamily {
            grid,
            separated: (e, f),
            dual,
            separable,
        })
    }

    pub fn grid(&self) -> &'g MetricGrid {
        self.grid
    }

    pub fn separated(&self) -> (Side, Side) {
        self.separated
    }

    pub fn dual_sides(&self) -> (Side, Side) {
        (self.dual.source(), self.dual.sink())
    }

    /// Whether `E` and `F` lie in one component. When they do not, the empty
    /// boundary separates them and the family contains the zero measure.
    pub fn separable(&self) -> bool {
        self.separable
    }

    pub fn dual_family(&self) -> &ConnectingFamily<'g> {
        &self.dual
    }

    /// The separating boundary of least `rho`-mass.
    pub fn most_violated_cut(&self, rho: &[f64]) -> Result<CutSearch> {
        check_density(rho, self.grid.node_count())?;
        if !self.separable {
            return Ok(CutSearch {
                mass: 0.0,
                constraint: MeasureConstraint::null(),
                dual_path: None,
            });
        }
        match self.dual.forward_search(rho, None) {
            Some(found) => Ok(self.cut_from_curve(found.curve, rho)),
            None => Err(Error::Domain(alloc::format!(
                "sides {} and {} are not connected",
                self.dual.source().name(),
                self.dual.sink().name()
            ))),
        }
    }

    /// The cheapest dual path using only nodes with `allowed[v]`.
    pub fn cheapest_cut_within(&self, rho: &[f64], allowed: &[bool]) -> Result<Option<CutSearch>> {
        check_density(rho, self.grid.node_count())?;
        Ok(self
            .dual
            .forward_search(rho, Some(allowed))
            .map(|found| self.cut_from_curve(found.curve, rho)))
    }

    fn cut_from_curve(&self, curve: DiscreteCurve, rho: &[f64]) -> CutSearch {
        let curve = loop_erase(&curve);
        let constraint = curve.to_constraint(self.grid);
        CutSearch {
            mass: constraint.integrate(rho),
            constraint,
            dual_path: Some(curve),
        }
    }
}

impl ConstraintOracle for SeparatingFamily<'_> {
    fn node_count(&self) -> usize {
        self.grid.node_count()
    }

    fn separate(&self, rho: &[f64], max_cuts: usize) -> Result<Separation> {
        check_density(rho, self.grid.node_count())?;
        if !self.separable {
            return Ok(Separation::Cuts(alloc::vec![(0.0, MeasureConstraint::null())]));
        }
        match self.dual.per_source_cuts(rho, max_cuts) {
            Separation::NoMembers => Err(Error::Domain(alloc::format!(
                "sides {} and {} are not connected",
                self.dual.source().name(),
                self.dual.sink().name()
            ))),
            cuts => Ok(cuts),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Norm, WeightField};
    use std::vec;

    #[test]
    fn constant_density_linf_row() {
        for n in [4usize, 9, 16] {
            let g = MetricGrid::unit_square(n, Norm::LInf).unwrap();
            let fam = ConnectingFamily::crossing(&g, Side::A).unwrap();
            let rho = vec![1.0; g.node_count()];
            let found = fam.shortest_admissible_curve(&rho).unwrap().unwrap();
            assert!((found.value - (1.0 - 1.0 / n as f64)).abs() < 1e-12);
            assert!(found.curve.simple);
        }
    }

    #[test]
    fn canonical_density_is_exactly_admissible() {
        let g = MetricGrid::new(12, 2.0, 1.0, Norm::L2).unwrap();
        let fam = ConnectingFamily::crossing(&g, Side::A).unwrap();
        let d = fam.distance().unwrap();
        let rho = vec![1.0 / d; g.node_count()];
        let found = fam.shortest_admissible_curve(&rho).unwrap().unwrap();
        assert!((found.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_density_gives_fewest_hops() {
        let g = MetricGrid::unit_square(6, Norm::L2).unwrap();
        let fam = ConnectingFamily::crossing(&g, Side::A).unwrap();
        let found = fam.shortest_admissible_curve(&vec![0.0; 36]).unwrap().unwrap();
        assert_eq!(found.value, 0.0);
        assert_eq!(found.curve.nodes.len(), 6);
    }

    #[test]
    fn center_mass_is_avoided() {
        let g = MetricGrid::unit_square(3, Norm::L2).unwrap();
        let fam = ConnectingFamily::crossing(&g, Side::A).unwrap();
        let mut rho = vec![0.0; 9];
        rho[4] = 10.0;
        let found = fam.shortest_admissible_curve(&rho).unwrap().unwrap();
        assert_eq!(found.value, 0.0);
        assert!(!found.curve.nodes.contains(&4));
    }

    #[test]
    fn middle_column_cut() {
        let g = MetricGrid::unit_square(3, Norm::L2).unwrap();
        let sep = SeparatingFamily::new(&g, Side::A).unwrap();
        let mut rho = vec![1.0; 9];
        for j in 0..3 {
            rho[g.node(1, j)] = 0.0;
        }
        let cut = sep.most_violated_cut(&rho).unwrap();
        assert_eq!(cut.mass, 0.0);
        let path = cut.dual_path.unwrap();
        assert!(path.nodes.iter().all(|&v| g.coords(v).0 == 1));
    }

    #[test]
    fn cut_lengths() {
        let g = MetricGrid::unit_square(16, Norm::LInf).unwrap();
        let sep = SeparatingFamily::new(&g, Side::A).unwrap();
        let cut = sep.most_violated_cut(&vec![1.0; 256]).unwrap();
        assert!((cut.mass - 15.0 / 16.0).abs() < 1e-12);
        assert!((cut.constraint.total - cut.mass).abs() < 1e-12);

        let g = MetricGrid::new(16, 2.0, 1.0, Norm::L2).unwrap();
        let sep = SeparatingFamily::new(&g, Side::A).unwrap();
        let cut = sep.most_violated_cut(&vec![1.0; 256]).unwrap();
        assert!((cut.mass - 15.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn slit_yields_empty_boundary() {
        let g = MetricGrid::unit_square(8, Norm::L2)
            .unwrap()
            .with_weight(WeightField::Slit)
            .unwrap();
        let sep = SeparatingFamily::new(&g, Side::A).unwrap();
        assert!(!sep.separable());
        let cut = sep.most_violated_cut(&vec![1.0; 64]).unwrap();
        assert!(cut.constraint.is_null());
        let fam = ConnectingFamily::crossing(&g, Side::A).unwrap();
        assert!(fam.shortest_admissible_curve(&vec![1.0; 64]).unwrap().is_none());
    }

    #[test]
    fn loop_erase_removes_loop() {
        let g = MetricGrid::unit_square(4, Norm::L2).unwrap();
        let simple = DiscreteCurve::new(&g, vec![0, 1, 2, 3], IntegrationRule::Trapezoid).unwrap();
        assert_eq!(loop_erase(&simple), simple);
        let looped =
            DiscreteCurve::new(&g, vec![0, 1, 5, 4, 1, 2, 3], IntegrationRule::Trapezoid).unwrap();
        assert!(!looped.simple);
        let erased = loop_erase(&looped);
        assert_eq!(erased.nodes, vec![0, 1, 2, 3]);
        assert!(erased.simple);
        assert!(erased.total_length < looped.total_length);
    }

    #[test]
    fn curve_constraint_matches_integral() {
        let g = MetricGrid::unit_square(5, Norm::L2)
            .unwrap()
            .with_weight(WeightField::Bump { amplitude: 0.7 })
            .unwrap();
        let rho: Vec<f64> = (0..25).map(|v| (v % 7) as f64 * 0.3).collect();
        for rule in [IntegrationRule::Trapezoid, IntegrationRule::LeftEndpoint] {
            let c = DiscreteCurve::new(&g, vec![0, 6, 7, 13, 19, 24], rule).unwrap();
            let con = c.to_constraint(&g);
            assert!((con.integrate(&rho) - c.integrate(&g, &rho)).abs() < 1e-12);
            assert!((con.total - c.total_length).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let g = MetricGrid::unit_square(4, Norm::L2).unwrap();
        assert!(DiscreteCurve::new(&g, vec![0, 2], IntegrationRule::Trapezoid).is_err());
        assert!(ConnectingFamily::new(&g, Side::A, Side::B, IntegrationRule::Trapezoid).is_err());
        let fam = ConnectingFamily::crossing(&g, Side::A).unwrap();
        let mut rho = vec![1.0; 16];
        rho[3] = -1.0;
        assert!(fam.shortest_admissible_curve(&rho).is_err());
        assert!(fam.shortest_admissible_curve(&[1.0; 3]).is_err());
    }
}
