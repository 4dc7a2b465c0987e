//! Weighted planar grids and Hausdorff-measure normalization.
//!
//! A [`MetricGrid`] discretizes the rectangle `[0, width] x [0, height]` into
//! `n x n` cells whose centers are the nodes. Lengths use the grid's [`Norm`]
//! scaled by a per-node conformal weight; areas are `H^2`, which for a norm
//! is a constant multiple of Lebesgue measure (see [`hausdorff_density_2d`]).

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::math;
use crate::{Error, Result};

/// Planar norm used for step lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Norm {
    /// `|dx| + |dy|`
    L1,
    /// `sqrt(dx^2 + dy^2)`
    L2,
    /// `max(|dx|, |dy|)`
    LInf,
}

impl Norm {
    pub const ALL: [Norm; 3] = [Norm::L1, Norm::L2, Norm::LInf];

    #[inline]
    pub fn length(self, d: Displacement) -> f64 {
        let (x, y) = (math::abs(d.dx), math::abs(d.dy));
        match self {
            Norm::L1 => x + y,
            Norm::L2 => math::sqrt(x * x + y * y),
            Norm::LInf => {
                if x > y {
                    x
                } else {
                    y
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Norm::L1 => "l1",
            Norm::L2 => "l2",
            Norm::LInf => "linf",
        }
    }

    pub fn parse(s: &str) -> Option<Norm> {
        match s {
            "l1" | "L1" => Some(Norm::L1),
            "l2" | "L2" => Some(Norm::L2),
            "linf" | "LINF" | "Linf" | "l_inf" => Some(Norm::LInf),
            _ => None,
        }
    }
}

/// Coordinate difference between two points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Displacement {
    pub dx: f64,
    pub dy: f64,
}

impl Displacement {
    pub const fn new(dx: f64, dy: f64) -> Self {
        Displacement { dx, dy }
    }
}

/// Volume of the Euclidean unit ball in dimension `k`, `pi^(k/2) / Gamma(k/2 + 1)`.
pub fn v_coeff(k: f64) -> Result<f64> {
    if !(k >= 1.0) || !k.is_finite() {
        return Err(Error::Domain(alloc::format!(
            "v_k needs k >= 1, got {k}"
        )));
    }
    Ok(math::powf(PI, k / 2.0) / math::tgamma(k / 2.0 + 1.0))
}

/// The constant `c` with `H^2 = c * Lebesgue` for the given norm.
///
/// `c = (v_2 / 4) / area(B(1/2))`, the ratio of the normalization factor to the
/// largest Lebesgue area of a set of unit diameter (which is the ball of radius
/// one half). The `l1` value is checked against a numerical isodiametric search
/// in the tests.
pub fn hausdorff_density_2d(norm: Norm) -> f64 {
    match norm {
        Norm::L2 => 1.0,
        Norm::LInf => PI / 4.0,
        Norm::L1 => PI / 2.0,
    }
}

/// `weight * |d|_norm`; the weight is the conformal factor at the step's source.
#[inline]
pub fn step_length(norm: Norm, d: Displacement, weight_at_source: f64) -> f64 {
    weight_at_source * norm.length(d)
}

/// Normalization constants of the Hausdorff measures in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HausdorffConstants {
    pub v1: f64,
    pub v2: f64,
    /// `H^2 = density2d * Lebesgue`.
    pub density2d: f64,
    /// `2 v_1 / v_2`, the constant of the coarea and Eilenberg inequalities.
    pub coarea_const: f64,
}

impl HausdorffConstants {
    pub fn for_norm(norm: Norm) -> Self {
        // v_1 = 2 and v_2 = pi; the Gamma route is kept as a cross-check in tests.
        let v1 = 2.0;
        let v2 = PI;
        HausdorffConstants {
            v1,
            v2,
            density2d: hausdorff_density_2d(norm),
            coarea_const: 2.0 * v1 / v2,
        }
    }

    /// `v_2 / (2 v_1)`, the sharp lower bound of the reciprocity product.
    pub fn reciprocity_bound(&self) -> f64 {
        1.0 / self.coarea_const
    }
}

/// Sides of the quadrilateral in cyclic order: left, bottom, right, top.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    A,
    B,
    C,
    D,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::A, Side::B, Side::C, Side::D];

    pub fn opposite(self) -> Side {
        match self {
            Side::A => Side::C,
            Side::B => Side::D,
            Side::C => Side::A,
            Side::D => Side::B,
        }
    }

    /// The pair of sides adjacent to `self` (and to its opposite), in cyclic order.
    pub fn transverse(self) -> (Side, Side) {
        match self {
            Side::A | Side::C => (Side::B, Side::D),
            Side::B | Side::D => (Side::C, Side::A),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::A => "A",
            Side::B => "B",
            Side::C => "C",
            Side::D => "D",
        }
    }

    pub fn parse(s: &str) -> Option<Side> {
        match s {
            "A" | "a" | "left" => Some(Side::A),
            "B" | "b" | "bottom" => Some(Side::B),
            "C" | "c" | "right" => Some(Side::C),
            "D" | "d" | "top" => Some(Side::D),
            _ => None,
        }
    }
}

/// Conformal weight presets. A zero weight removes the node from the space.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightField {
    Constant(f64),
    /// Removes the middle node column, splitting the square into two components.
    Slit,
    /// `1 + amplitude * exp(-|x - center|^2 / (2 s^2))` with `s = min(width, height) / 5`.
    Bump { amplitude: f64 },
    Values(Vec<f64>),
}

const NEIGHBOR_OFFSETS: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// A weighted `n x n` lattice of cell centers over `[0, width] x [0, height]`.
///
/// Node `v = j * n + i` is the center of cell `(i, j)`, with `i` the column
/// (x direction) and `j` the row (y direction).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGrid {
    n: usize,
    width: f64,
    height: f64,
    norm: Norm,
    weight: Vec<f64>,
    constants: HausdorffConstants,
}

impl MetricGrid {
    pub fn new(n: usize, width: f64, height: f64, norm: Norm) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(alloc::format!(
                "a grid needs at least 2 cells per side, got {n}"
            )));
        }
        if !(width > 0.0 && width.is_finite() && height > 0.0 && height.is_finite()) {
            return Err(Error::Domain(alloc::format!(
                "grid extent must be positive, got {width} x {height}"
            )));
        }
        Ok(MetricGrid {
            n,
            width,
            height,
            norm,
            weight: alloc::vec![1.0; n * n],
            constants: HausdorffConstants::for_norm(norm),
        })
    }

    pub fn unit_square(n: usize, norm: Norm) -> Result<Self> {
        Self::new(n, 1.0, 1.0, norm)
    }

    pub fn with_weight(mut self, field: WeightField) -> Result<Self> {
        let n = self.n;
        let weight = match field {
            WeightField::Constant(c) => alloc::vec![c; n * n],
            WeightField::Slit => {
                if n < 3 {
                    return Err(Error::Domain("a slit needs at least 3 columns".into()));
                }
                let col = n / 2;
                (0..n * n)
                    .map(|v| if v % n == col { 0.0 } else { 1.0 })
                    .collect()
            }
            WeightField::Bump { amplitude } => {
                let s = if self.width < self.height {
                    self.width
                } else {
                    self.height
                } / 5.0;
                let (cx, cy) = (self.width / 2.0, self.height / 2.0);
                (0..n * n)
                    .map(|v| {
                        let (x, y) = self.position(v);
                        let r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                        1.0 + amplitude * libm::exp(-r2 / (2.0 * s * s))
                    })
                    .collect()
            }
            WeightField::Values(values) => values,
        };
        if weight.len() != n * n {
            return Err(Error::SizeMismatch {
                expected: n * n,
                found: weight.len(),
            });
        }
        if let Some((v, &w)) = weight
            .iter()
            .enumerate()
            .find(|(_, w)| !(**w >= 0.0 && w.is_finite()))
        {
            return Err(Error::Domain(alloc::format!(
                "weight at node {v} must be a nonnegative real, got {w}"
            )));
        }
        self.weight = weight;
        Ok(self)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.n * self.n
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    #[inline]
    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn constants(&self) -> &HausdorffConstants {
        &self.constants
    }

    /// Cell sizes `(width / n, height / n)`.
    #[inline]
    pub fn cell_size(&self) -> (f64, f64) {
        (self.width / self.n as f64, self.height / self.n as f64)
    }

    /// Norm length of the longer axis step; chains need a radius at least this large.
    pub fn spacing(&self) -> f64 {
        let (hx, hy) = self.cell_size();
        let lx = self.norm.length(Displacement::new(hx, 0.0));
        let ly = self.norm.length(Displacement::new(0.0, hy));
        if lx > ly {
            lx
        } else {
            ly
        }
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn coords(&self, v: usize) -> (usize, usize) {
        (v % self.n, v / self.n)
    }

    /// Cell center of node `v`.
    pub fn position(&self, v: usize) -> (f64, f64) {
        let (i, j) = self.coords(v);
        let (hx, hy) = self.cell_size();
        ((i as f64 + 0.5) * hx, (j as f64 + 0.5) * hy)
    }

    #[inline]
    pub fn weight(&self, v: usize) -> f64 {
        self.weight[v]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    #[inline]
    pub fn is_active(&self, v: usize) -> bool {
        self.weight[v] > 0.0
    }

    #[inline]
    pub fn displacement(&self, from: usize, to: usize) -> Displacement {
        let (i0, j0) = self.coords(from);
        let (i1, j1) = self.coords(to);
        let (hx, hy) = self.cell_size();
        Displacement::new(
            (i1 as f64 - i0 as f64) * hx,
            (j1 as f64 - j0 as f64) * hy,
        )
    }

    /// Unweighted norm distance between node centers.
    #[inline]
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.norm.length(self.displacement(a, b))
    }

    /// Weighted length of the step `from -> to`, weight taken at `from`.
    #[inline]
    pub fn step_length(&self, from: usize, to: usize) -> f64 {
        step_length(self.norm, self.displacement(from, to), self.weight[from])
    }

    /// Weighted length of the step with the weight averaged over both ends.
    #[inline]
    pub fn symmetric_step_length(&self, a: usize, b: usize) -> f64 {
        0.5 * (self.weight[a] + self.weight[b]) * self.distance(a, b)
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        let (i0, j0) = self.coords(a);
        let (i1, j1) = self.coords(b);
        a != b && i0.abs_diff(i1) <= 1 && j0.abs_diff(j1) <= 1
    }

    /// Calls `f` for every active 8-neighbor of `v`, in increasing node order.
    #[inline]
    pub fn for_each_neighbor(&self, v: usize, mut f: impl FnMut(usize)) {
        let n = self.n as i64;
        let (i, j) = self.coords(v);
        for (di, dj) in NEIGHBOR_OFFSETS {
            let (a, b) = (i as i64 + di, j as i64 + dj);
            if a >= 0 && a < n && b >= 0 && b < n {
                let w = (b * n + a) as usize;
                if self.weight[w] > 0.0 {
                    f(w);
                }
            }
        }
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(8);
        self.for_each_neighbor(v, |w| out.push(w));
        out
    }

    /// Offsets `(di, dj)` with `0 < |(di hx, dj hy)|_norm <= radius`.
    pub(crate) fn radius_offsets(&self, radius: f64) -> Vec<(i64, i64)> {
        let (hx, hy) = self.cell_size();
        let reach_x = math::ceil(radius / hx) as i64 + 1;
        let reach_y = math::ceil(radius / hy) as i64 + 1;
        let slack = radius * 1e-12;
        let mut out = Vec::new();
        for dj in -reach_y..=reach_y {
            for di in -reach_x..=reach_x {
                if di == 0 && dj == 0 {
                    continue;
                }
                let d = Displacement::new(di as f64 * hx, dj as f64 * hy);
                if self.norm.length(d) <= radius + slack {
                    out.push((di, dj));
                }
            }
        }
        out
    }

    /// The label of a boundary node, or `None` for interior nodes.
    ///
    /// Labels partition the boundary: each corner goes to the side that starts
    /// at it when the boundary is traversed A (left, downwards), B (bottom),
    /// C (right, upwards), D (top).
    pub fn side_label(&self, v: usize) -> Option<Side> {
        let last = self.n - 1;
        let (i, j) = self.coords(v);
        if i == 0 && j >= 1 {
            Some(Side::A)
        } else if j == 0 && i < last {
            Some(Side::B)
        } else if i == last && j < last {
            Some(Side::C)
        } else if j == last && i >= 1 {
            Some(Side::D)
        } else {
            None
        }
    }

    /// Nodes carrying `side` as their label (pairwise disjoint across sides).
    pub fn side_nodes(&self, side: Side) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&v| self.side_label(v) == Some(side))
            .collect()
    }

    /// Active nodes of the full boundary row or column of `side`, corners included.
    pub fn closed_side(&self, side: Side) -> Vec<usize> {
        let last = self.n - 1;
        let nodes: Vec<usize> = match side {
            Side::A => (0..self.n).map(|j| self.node(0, j)).collect(),
            Side::B => (0..self.n).map(|i| self.node(i, 0)).collect(),
            Side::C => (0..self.n).map(|j| self.node(last, j)).collect(),
            Side::D => (0..self.n).map(|i| self.node(i, last)).collect(),
        };
        nodes.into_iter().filter(|&v| self.is_active(v)).collect()
    }

    pub(crate) fn closed_side_mask(&self, side: Side) -> Result<Vec<bool>> {
        let nodes = self.closed_side(side);
        if nodes.is_empty() {
            return Err(Error::EmptySide(side.name()));
        }
        let mut mask = alloc::vec![false; self.node_count()];
        for v in nodes {
            mask[v] = true;
        }
        Ok(mask)
    }

    /// `H^2` measure of cell `v`: `density2d * weight^2 * hx * hy`.
    pub fn cell_measure(&self, v: usize) -> Result<f64> {
        if v >= self.node_count() {
            return Err(Error::IndexOutOfRange {
                index: v,
                len: self.node_count(),
            });
        }
        Ok(self.cell_measure_unchecked(v))
    }

    #[inline]
    fn cell_measure_unchecked(&self, v: usize) -> f64 {
        let (hx, hy) = self.cell_size();
        let w = self.weight[v];
        self.constants.density2d * w * w * hx * hy
    }

    pub fn measures(&self) -> Vec<f64> {
        (0..self.node_count())
            .map(|v| self.cell_measure_unchecked(v))
            .collect()
    }

    pub fn total_measure(&self) -> f64 {
        self.measures().iter().sum()
    }

    /// Whether some grid path joins the two node sets through active nodes.
    pub fn connects(&self, from: &[usize], to: &[usize]) -> bool {
        let mut target = alloc::vec![false; self.node_count()];
        for &v in to {
            target[v] = true;
        }
        let mut seen = alloc::vec![false; self.node_count()];
        let mut stack: Vec<usize> = from.iter().copied().filter(|&v| self.is_active(v)).collect();
        for &v in &stack {
            seen[v] = true;
        }
        while let Some(v) = stack.pop() {
            if target[v] {
                return true;
            }
            self.for_each_neighbor(v, |w| {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            });
        }
        false
    }
}
