//! Potentials built from upper gradients, and the coarea and Eilenberg checks.
//!
//! The chain potential integrates `g` along chains whose steps are at most
//! `step_radius` long, using the left endpoint of every step:
//!
//! ```text
//! F(x) = inf over chains E = p_0, ..., p_k = x of sum_j g(p_j) d(p_j, p_{j+1})
//! u    = min(F, 1)
//! ```

use alloc::vec::Vec;

use crate::families::{check_density, IntegrationRule, MeasureConstraint, SeparatingFamily};
use crate::geometry::{Displacement, MetricGrid, Side};
use crate::math;
use crate::search::dijkstra;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ChainPotential<'g> {
    grid: &'g MetricGrid,
    /// Upper gradient after flooring.
    pub g: Vec<f64>,
    pub step_radius: f64,
    /// `F`; `f64::INFINITY` marks nodes no chain reaches.
    pub f: Vec<f64>,
    /// `min(F, 1)`.
    pub u: Vec<f64>,
    pub source: Side,
    pub sink: Side,
}

impl<'g> ChainPotential<'g> {
    pub fn grid(&self) -> &'g MetricGrid {
        self.grid
    }

    /// `a = inf_F u` over the active nodes of the sink side.
    pub fn sink_infimum(&self) -> f64 {
        self.grid
            .closed_side(self.sink)
            .into_iter()
            .map(|v| self.u[v])
            .fold(f64::INFINITY, f64::min)
    }

    /// Rescales by `a = inf_F u` so that `u = 1` on the sink side: `F / a`,
    /// `min(F / a, 1)` and `g / a`. `None` when `a` is zero.
    pub fn normalized(&self) -> Option<ChainPotential<'g>> {
        let a = self.sink_infimum();
        if !(a > 0.0 && a.is_finite()) {
            return None;
        }
        let f: Vec<f64> = self.f.iter().map(|x| x / a).collect();
        Some(ChainPotential {
            grid: self.grid,
            g: self.g.iter().map(|x| x / a).collect(),
            step_radius: self.step_radius,
            u: f.iter().map(|&x| x.min(1.0)).collect(),
            f,
            source: self.source,
            sink: self.sink,
        })
    }
}

/// Step radius used when none is configured: three grid spacings.
pub fn default_step_radius(grid: &MetricGrid) -> f64 {
    3.0 * grid.spacing()
}

/// Chain potential from the closed side `source` with steps up to `step_radius`
/// (unweighted norm distance between node centers); `g` is floored at
/// `epsilon_floor`.
pub fn chain_potential<'g>(
    grid: &'g MetricGrid,
    g: &[f64],
    source: Side,
    step_radius: f64,
    epsilon_floor: f64,
) -> Result<ChainPotential<'g>> {
    check_density(g, grid.node_count())?;
    if !(epsilon_floor > 0.0 && epsilon_floor.is_finite()) {
        return Err(Error::Domain(alloc::format!(
            "epsilon_floor must be positive, got {epsilon_floor}"
        )));
    }
    let spacing = grid.spacing();
    if !(step_radius >= spacing) || !step_radius.is_finite() {
        return Err(Error::RadiusBelowSpacing {
            radius: step_radius,
            spacing,
        });
    }
    let sources = grid.closed_side(source);
    if sources.is_empty() {
        return Err(Error::EmptySide(source.name()));
    }
    let g: Vec<f64> = g.iter().map(|&x| x.max(epsilon_floor)).collect();
    let offsets = grid.radius_offsets(step_radius);
    let n = grid.n() as i64;
    let sp = dijkstra(
        grid.node_count(),
        &sources,
        |v, out| {
            let (i, j) = grid.coords(v);
            for &(di, dj) in &offsets {
                let (a, b) = (i as i64 + di, j as i64 + dj);
                if a >= 0 && a < n && b >= 0 && b < n {
                    let w = (b * n + a) as usize;
                    if grid.is_active(w) {
                        out.push(w);
                    }
                }
            }
        },
        |x, y| g[x] * grid.step_length(x, y),
        None,
    );
    let f = sp.dist;
    let u = f.iter().map(|&x| x.min(1.0)).collect();
    Ok(ChainPotential {
        grid,
        g,
        step_radius,
        f,
        u,
        source,
        sink: source.opposite(),
    })
}

/// `min(inf_gamma integral g ds, 1)` over grid paths from the closed side
/// `source`, with the trapezoid rule. Unreachable nodes get 1.
pub fn capacity_potential(grid: &MetricGrid, g: &[f64], source: Side) -> Result<Vec<f64>> {
    check_density(g, grid.node_count())?;
    let sources = grid.closed_side(source);
    if sources.is_empty() {
        return Err(Error::EmptySide(source.name()));
    }
    let sp = dijkstra(
        grid.node_count(),
        &sources,
        |v, out| grid.for_each_neighbor(v, |w| out.push(w)),
        |x, y| IntegrationRule::Trapezoid.step_integral(grid, g, x, y),
        None,
    );
    Ok(sp.dist.into_iter().map(|d| d.min(1.0)).collect())
}

/// The interface of `{u < t}` and `{u >= t}` with a dual path through it.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetSlice {
    pub t: f64,
    /// Nodes of `{u >= t}` with an 8-neighbor in `{u < t}`.
    pub boundary_nodes: Vec<usize>,
    /// `H^1` measure of the dual path; zero for flagged slices.
    pub h1_measure: f64,
    /// The dual path as a measure; null for flagged slices.
    pub constraint: MeasureConstraint,
    /// The sublevel or the superlevel set is empty.
    pub empty: bool,
    /// The interface contains a path between the two transverse sides.
    pub spans: bool,
}

pub fn level_set_boundary(pot: &ChainPotential<'_>, t: f64) -> Result<LevelSetSlice> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain(alloc::format!("level must lie in (0, 1), got {t}")));
    }
    let grid = pot.grid;
    let nodes = grid.node_count();
    let below = |v: usize| pot.u[v] < t;
    let active = (0..nodes).filter(|&v| grid.is_active(v));
    let (mut any_below, mut any_above) = (false, false);
    for v in active {
        if below(v) {
            any_below = true;
        } else {
            any_above = true;
        }
    }
    let flagged = |boundary_nodes, empty| LevelSetSlice {
        t,
        boundary_nodes,
        h1_measure: 0.0,
        constraint: MeasureConstraint::null(),
        empty,
        spans: false,
    };
    if !(any_below && any_above) {
        return Ok(flagged(Vec::new(), true));
    }
    let mut mask = alloc::vec![false; nodes];
    let mut boundary_nodes = Vec::new();
    for v in 0..nodes {
        if !grid.is_active(v) || below(v) {
            continue;
        }
        let mut touches = false;
        grid.for_each_neighbor(v, |w| touches |= below(w));
        if touches {
            mask[v] = true;
            boundary_nodes.push(v);
        }
    }
    let ones = alloc::vec![1.0; nodes];
    let family = SeparatingFamily::new(grid, pot.source)?;
    match family.cheapest_cut_within(&ones, &mask)? {
        Some(cut) => Ok(LevelSetSlice {
            t,
            boundary_nodes,
            h1_measure: cut.mass,
            constraint: cut.constraint,
            empty: false,
            spans: true,
        }),
        None => Ok(flagged(boundary_nodes, false)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoareaCheck {
    /// Midpoint quadrature of `t -> integral over the slice of rho dH^1`.
    pub lhs: f64,
    /// `(4 / pi) * sum_v rho_v g_v m_v`.
    pub rhs: f64,
    /// `lhs / rhs`, or 0 when `rhs = 0`.
    pub ratio: f64,
    /// Levels whose slice was flagged and contributed zero.
    pub flagged_levels: usize,
}

pub fn coarea_check(pot: &ChainPotential<'_>, rho: &[f64], num_levels: usize) -> Result<CoareaCheck> {
    let grid = pot.grid;
    check_density(rho, grid.node_count())?;
    if num_levels < 16 {
        return Err(Error::Domain(alloc::format!(
            "at least 16 levels are needed, got {num_levels}"
        )));
    }
    let mut lhs = 0.0;
    let mut flagged_levels = 0;
    for k in 0..num_levels {
        let t = (k as f64 + 0.5) / num_levels as f64;
        let slice = level_set_boundary(pot, t)?;
        if slice.spans {
            lhs += slice.constraint.integrate(rho);
        } else {
            flagged_levels += 1;
        }
    }
    lhs /= num_levels as f64;
    let measures = grid.measures();
    let weighted: f64 = rho
        .iter()
        .zip(&pot.g)
        .zip(&measures)
        .map(|((&r, &g), &m)| r * g * m)
        .sum();
    let rhs = grid.constants().coarea_const * weighted;
    Ok(CoareaCheck {
        lhs,
        rhs,
        ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 },
        flagged_levels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EilenbergCheck {
    /// Level-binned `integral H^1(u^-1(t) within the mask) dt`.
    pub lhs: f64,
    /// `(4 / pi) * LIP[u](mask) * H^2(mask)`.
    pub rhs: f64,
    pub ratio: f64,
    /// Largest difference quotient over 8-adjacent pairs inside the mask.
    pub lip: f64,
}

/// Eilenberg's inequality for the piecewise-linear interpolant of `u` on the
/// triangulation whose cells are split along the `(1, 1)` diagonal.
///
/// Only triangles with all three vertices in `mask` contribute; `levels`
/// midpoint levels span `[min u, max u]` over the mask.
pub fn eilenberg_check(grid: &MetricGrid, u: &[f64], mask: &[bool], levels: usize) -> Result<EilenbergCheck> {
    let count = grid.node_count();
    if u.len() != count {
        return Err(Error::SizeMismatch {
            expected: count,
            found: u.len(),
        });
    }
    if mask.len() != count {
        return Err(Error::SizeMismatch {
            expected: count,
            found: mask.len(),
        });
    }
    if let Some(index) = u.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidDensity { index, value: u[index] });
    }
    if levels == 0 {
        return Err(Error::Domain("at least one level is needed".into()));
    }
    let inside = |v: usize| mask[v] && grid.is_active(v);

    let mut lip = 0.0_f64;
    let mut area = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in (0..count).filter(|&v| inside(v)) {
        area += grid.cell_measure(v)?;
        lo = lo.min(u[v]);
        hi = hi.max(u[v]);
        grid.for_each_neighbor(v, |w| {
            if w > v && inside(w) {
                lip = lip.max(math::abs(u[v] - u[w]) / grid.symmetric_step_length(v, w));
            }
        });
    }
    let rhs = grid.constants().coarea_const * lip * area;
    let result = |lhs: f64| EilenbergCheck {
        lhs,
        rhs,
        ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 },
        lip,
    };
    if !(hi > lo) {
        return Ok(result(0.0));
    }

    let n = grid.n();
    let dt = (hi - lo) / levels as f64;
    let mut lhs = 0.0;
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let c00 = grid.node(i, j);
            let c10 = grid.node(i + 1, j);
            let c01 = grid.node(i, j + 1);
            let c11 = grid.node(i + 1, j + 1);
            for tri in [[c00, c10, c11], [c00, c11, c01]] {
                if tri.iter().all(|&v| inside(v)) {
                    lhs += triangle_level_integral(grid, tri, u, lo, dt, levels);
                }
            }
        }
    }
    Ok(result(lhs))
}

/// `sum_k dt * H^1({u = t_k} within the triangle)` for the linear interpolant.
fn triangle_level_integral(grid: &MetricGrid, tri: [usize; 3], u: &[f64], lo: f64, dt: f64, levels: usize) -> f64 {
    let pos = tri.map(|v| grid.position(v));
    let val = tri.map(|v| u[v]);
    let tmin = val.iter().copied().fold(f64::INFINITY, f64::min);
    let tmax = val.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(tmax > tmin) {
        return 0.0;
    }
    let weight = (grid.weight(tri[0]) + grid.weight(tri[1]) + grid.weight(tri[2])) / 3.0;
    let first = math::ceil((tmin - lo) / dt - 0.5).max(0.0) as usize;
    let mut total = 0.0;
    for k in first..levels {
        let t = lo + (k as f64 + 0.5) * dt;
        if t > tmax {
            break;
        }
        if t < tmin {
            continue;
        }
        let mut pts = [(0.0, 0.0); 2];
        let mut found = 0;
        for e in 0..3 {
            let (a, b) = (e, (e + 1) % 3);
            let (ua, ub) = (val[a], val[b]);
            // Half-open crossing test so a vertex at level t counts once.
            let crosses = (ua <= t && t < ub) || (ub <= t && t < ua);
            if crosses && found < 2 {
                let s = (t - ua) / (ub - ua);
                pts[found] = (
                    pos[a].0 + s * (pos[b].0 - pos[a].0),
                    pos[a].1 + s * (pos[b].1 - pos[a].1),
                );
                found += 1;
            }
        }
        if found == 2 {
            let d = Displacement::new(pts[1].0 - pts[0].0, pts[1].1 - pts[0].1);
            total += grid.norm().length(d) * weight * dt;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Norm;
    use std::vec;

    #[test]
    fn constant_gradient_on_line_telescopes() {
        // Rows are independent 1D chains under g = 2 with radius = spacing.
        let grid = MetricGrid::unit_square(8, Norm::LInf).unwrap();
        let pot = chain_potential(&grid, &[2.0; 64], Side::A, grid.spacing(), 1e-9).unwrap();
        let h = 1.0 / 8.0;
        for j in 0..8 {
            for i in 0..8 {
                let f = pot.f[grid.node(i, j)];
                assert!((f - 2.0 * i as f64 * h).abs() < 1e-12, "{f}");
            }
        }
        assert_eq!(pot.u[grid.node(7, 3)], 1.0);
    }

    #[test]
    fn unit_gradient_gives_distance_from_left() {
        let grid = MetricGrid::unit_square(16, Norm::LInf).unwrap();
        let pot = chain_potential(&grid, &[1.0; 256], Side::A, default_step_radius(&grid), 1e-9).unwrap();
        for v in 0..256 {
            let (i, _) = grid.coords(v);
            assert!((pot.u[v] - i as f64 / 16.0).abs() < 1e-12);
        }
        let normalized = pot.normalized().unwrap();
        assert!((normalized.sink_infimum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn radius_below_spacing_is_rejected() {
        let grid = MetricGrid::unit_square(4, Norm::L2).unwrap();
        let err = chain_potential(&grid, &[1.0; 16], Side::A, 0.2, 1e-9).unwrap_err();
        assert!(matches!(err, Error::RadiusBelowSpacing { .. }));
    }

    #[test]
    fn capacity_potential_examples() {
        let grid = MetricGrid::unit_square(8, Norm::L2).unwrap();
        assert_eq!(capacity_potential(&grid, &[0.0; 64], Side::A).unwrap(), vec![0.0; 64]);
        // d(A, C) = 7/8 for centers, so g = 8/7 reaches 1 on C.
        let u = capacity_potential(&grid, &[8.0 / 7.0; 64], Side::A).unwrap();
        for v in grid.closed_side(Side::C) {
            assert!((u[v] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn vertical_level_line() {
        let grid = MetricGrid::unit_square(16, Norm::LInf).unwrap();
        let pot = chain_potential(&grid, &[1.0; 256], Side::A, default_step_radius(&grid), 1e-9).unwrap();
        let slice = level_set_boundary(&pot, 0.5).unwrap();
        assert!(slice.spans);
        assert!(slice.boundary_nodes.iter().all(|&v| grid.coords(v).0 == 8));
        assert!((slice.h1_measure - 15.0 / 16.0).abs() < 1e-12);
        // Below the first positive value the sublevel set is the source column.
        let low = level_set_boundary(&pot, 0.01).unwrap();
        assert!(low.spans && low.boundary_nodes.iter().all(|&v| grid.coords(v).0 == 1));
        let high = level_set_boundary(&pot, 0.99).unwrap();
        assert!(high.empty && high.h1_measure == 0.0);
    }

    #[test]
    fn coarea_zero_density() {
        let grid = MetricGrid::unit_square(8, Norm::L2).unwrap();
        let pot = chain_potential(&grid, &[1.0; 64], Side::A, default_step_radius(&grid), 1e-9).unwrap();
        let c = coarea_check(&pot, &[0.0; 64], 16).unwrap();
        assert_eq!((c.lhs, c.rhs, c.ratio), (0.0, 0.0, 0.0));
        assert!(coarea_check(&pot, &[0.0; 64], 8).is_err());
    }

    #[test]
    fn eilenberg_examples() {
        let n = 32;
        let grid = MetricGrid::unit_square(n, Norm::L2).unwrap();
        let mask = vec![true; n * n];
        let u: Vec<f64> = (0..n * n).map(|v| 2.0 * grid.position(v).0).collect();
        let e = eilenberg_check(&grid, &u, &mask, 64).unwrap();
        let inner = 1.0 - 1.0 / n as f64;
        // Level lines of length `inner` over a t-range of length 2 * inner.
        assert!((e.lhs - 2.0 * inner * inner).abs() < 1e-9, "{}", e.lhs);
        assert!((e.lip - 2.0).abs() < 1e-12);
        assert!((e.rhs - 8.0 / core::f64::consts::PI).abs() < 1e-12);
        let flat = eilenberg_check(&grid, &[3.0; 1024], &mask, 64).unwrap();
        assert_eq!((flat.lhs, flat.ratio), (0.0, 0.0));
    }
}
