//! `Mod_p` of a constraint family by constraint generation.
//!
//! The primal problem is
//!
//! ```text
//! minimize    sum_v m_v rho_v^p
//! subject to  sum_v w_v rho_v >= 1   for every member (w) of the family
//!             rho >= 0
//! ```
//!
//! The family is only available through a [`ConstraintOracle`] that returns
//! the members of least `rho`-mass. The solver works with probability weights
//! `mu` on an active set of members and their expected load
//! `eta = sum_k mu_k w_k`. Hoelder's inequality turns any `mu` into a bound:
//!
//! ```text
//! F(eta)   = sum_v m_v^(1 - q) eta_v^q
//! rho(eta) = (eta / m)^(q - 1)
//! F^(1 - p)  <=  Mod_p  <=  F / (min_member w . rho(eta))^p
//! ```
//!
//! The lower bound is the Lagrangian dual value at `lambda = p F^(1 - p) mu`,
//! and the upper bound comes from rescaling `rho(eta)` until it is admissible.
//! The two meet exactly when `mu` minimizes `F`, which is a convex problem on
//! the simplex. Each outer iteration asks the oracle for the most violated
//! member at `rho(eta)`, takes an exactly line-searched step towards it, and
//! then runs a projected gradient method over the active weights
//! (Barzilai-Borwein steps with nonmonotone Armijo backtracking).
//!
//! Internally measures are divided by their total and constraint weights by
//! the family's distance `d(E, F)` (the oracle minimum at `rho = 1`), so the
//! canonical density `rho = 1 / d(E, F)` becomes the all-ones vector and
//! power-of-two rescalings of the input are exact.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::families::{check_density, ConnectingFamily, MeasureConstraint, SeparatingFamily};
use crate::geometry::{MetricGrid, Side};
use crate::math;
use crate::{Error, Result};

/// A nonnegative finite density per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct Density(Vec<f64>);

impl Density {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_density(&values, values.len())?;
        Ok(Density(values))
    }

    pub fn constant(len: usize, value: f64) -> Result<Self> {
        Self::new(alloc::vec![value; len])
    }

    pub fn zeros(len: usize) -> Self {
        Density(alloc::vec![0.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `sum_v m_v rho_v^p`.
    pub fn energy(&self, measures: &[f64], p: f64) -> f64 {
        self.0
            .iter()
            .zip(measures)
            .map(|(&r, &m)| m * math::pow_nonneg(r, p))
            .sum()
    }

    /// `(sum_v m_v |rho_v - other_v|^p)^(1/p)`.
    pub fn lp_distance(&self, other: &Density, measures: &[f64], p: f64) -> f64 {
        let sum: f64 = self
            .0
            .iter()
            .zip(&other.0)
            .zip(measures)
            .map(|((&a, &b), &m)| m * math::pow_nonneg(math::abs(a - b), p))
            .sum();
        math::powf(sum, 1.0 / p)
    }

    /// Pointwise `max(rho, floor)`.
    pub fn floored(&self, floor: f64) -> Density {
        Density(self.0.iter().map(|&r| r.max(floor)).collect())
    }
}

impl AsRef<[f64]> for Density {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Outcome of one oracle query.
#[derive(Debug, Clone, PartialEq)]
pub enum Separation {
    /// The family has no members, so `rho = 0` is admissible.
    NoMembers,
    /// Members as `(rho-mass, constraint)`, the least massive first.
    Cuts(Vec<(f64, MeasureConstraint)>),
}

/// A family of measures queried through its least massive members.
pub trait ConstraintOracle {
    fn node_count(&self) -> usize;

    /// Returns up to `max_cuts` members of small `rho`-mass; the first one
    /// must attain the minimum over the whole family.
    fn separate(&self, rho: &[f64], max_cuts: usize) -> Result<Separation>;
}

/// A family given by an explicit list of constraints.
#[derive(Debug, Clone)]
pub struct ExplicitFamily {
    node_count: usize,
    members: Vec<MeasureConstraint>,
}

impl ExplicitFamily {
    pub fn new(node_count: usize, members: Vec<MeasureConstraint>) -> Result<Self> {
        for m in &members {
            if let Some(&v) = m.support.iter().find(|&&v| v >= node_count) {
                return Err(Error::IndexOutOfRange {
                    index: v,
                    len: node_count,
                });
            }
        }
        Ok(ExplicitFamily {
            node_count,
            members,
        })
    }

    pub fn members(&self) -> &[MeasureConstraint] {
        &self.members
    }
}

impl ConstraintOracle for ExplicitFamily {
    fn node_count(&self) -> usize {
        self.node_count
    }

    fn separate(&self, rho: &[f64], max_cuts: usize) -> Result<Separation> {
        check_density(rho, self.node_count)?;
        if self.members.is_empty() {
            return Ok(Separation::NoMembers);
        }
        let mut scored: Vec<(f64, usize)> = self
            .members
            .iter()
            .enumerate()
            .map(|(k, m)| (m.integrate(rho), k))
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        scored.truncate(max_cuts.max(1));
        Ok(Separation::Cuts(
            scored
                .into_iter()
                .map(|(value, k)| (value, self.members[k].clone()))
                .collect(),
        ))
    }
}

/// Backtracking parameters of the inner projected-gradient solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRule {
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    /// Step shrink factor on a failed test.
    pub shrink: f64,
    /// Number of past objective values in the nonmonotone reference.
    pub memory: usize,
    pub step_min: f64,
    pub step_max: f64,
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule {
            armijo: 1e-4,
            shrink: 0.5,
            memory: 10,
            step_min: 1e-12,
            step_max: 1e12,
        }
    }
}

/// Starting density of the outer loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialDensity {
    /// `rho = 1 / d(E, F)`.
    Canonical,
    Zero,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub p: f64,
    pub tol_admissibility: f64,
    /// Target for `(upper - lower) / lower`.
    pub tol_gap: f64,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub step: StepRule,
    /// Oracle minima at or below this value are not rescaled into an upper
    /// bound; chain potentials floor their gradient here.
    pub epsilon_floor: f64,
    pub init: InitialDensity,
    /// Members requested from the oracle per outer iteration. Besides the
    /// lightest one, those far below the current average load are kept too.
    pub max_cuts_per_round: usize,
    /// Drop active members whose multiplier stayed zero this many rounds.
    pub prune_after: usize,
}

impl SolverConfig {
    /// Smallest accepted exponent; the dual exponent blows up as `p -> 1`.
    pub const MIN_P: f64 = 1.05;

    pub fn new(p: f64) -> Self {
        SolverConfig {
            p,
            tol_admissibility: 1e-4,
            tol_gap: 1e-3,
            max_outer_iters: 500,
            max_inner_iters: 2000,
            step: StepRule::default(),
            epsilon_floor: 1e-9,
            init: InitialDensity::Canonical,
            max_cuts_per_round: 1,
            prune_after: 20,
        }
    }

    /// The dual exponent `p / (p - 1)`.
    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn with_p(&self, p: f64) -> Self {
        SolverConfig { p, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p >= Self::MIN_P) {
            return Err(Error::Domain(alloc::format!(
                "p must lie in [{}, inf), got {}",
                Self::MIN_P,
                self.p
            )));
        }
        let positive = [
            ("tol_admissibility", self.tol_admissibility),
            ("tol_gap", self.tol_gap),
            ("epsilon_floor", self.epsilon_floor),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Domain(alloc::format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 {
            return Err(Error::Domain("iteration limits must be positive".into()));
        }
        let s = &self.step;
        if !(s.armijo > 0.0 && s.armijo < 1.0 && s.shrink > 0.0 && s.shrink < 1.0)
            || s.memory == 0
            || !(s.step_min > 0.0 && s.step_min <= s.step_max)
        {
            return Err(Error::Domain("invalid step rule".into()));
        }
        if let InitialDensity::Constant(c) = self.init {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::Domain(alloc::format!(
                    "initial density must be nonnegative, got {c}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Converged,
    /// `max_outer_iters` reached before the gap target.
    IterationLimit,
    /// No new members and the inner tolerance cannot be tightened further.
    Stalled,
    /// The family contains a member of zero mass: no density is admissible.
    Unbounded,
    /// The family is empty and the modulus is zero.
    EmptyFamily,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::IterationLimit => "iteration_limit",
            SolveStatus::Stalled => "stalled",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::EmptyFamily => "empty_family",
        }
    }

    /// Whether the reported value is exact up to the configured tolerances.
    pub fn is_certified(self) -> bool {
        matches!(
            self,
            SolveStatus::Converged | SolveStatus::Unbounded | SolveStatus::EmptyFamily
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveConstraint {
    pub constraint: MeasureConstraint,
    /// Lagrange multiplier in the original units of the problem.
    pub multiplier: f64,
}

/// Bounds after one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub outer: usize,
    /// Dual value at the current multipliers.
    pub lower_bound: f64,
    /// Best admissible value found so far.
    pub upper_bound: f64,
    /// `min_member (w . rho(lambda)) - 1`.
    pub slack: f64,
    pub active: usize,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulusResult {
    pub p: f64,
    /// `sum_v m_v rho*_v^p` for the admissible `rho*`.
    pub value: f64,
    pub rho_star: Density,
    pub active: Vec<ActiveConstraint>,
    pub lower_bound: f64,
    /// `min_member (w . rho*) - 1`.
    pub violation: f64,
    pub status: SolveStatus,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub history: Vec<IterationRecord>,
}

impl ModulusResult {
    /// `(value - lower_bound) / max(lower_bound, tiny)`.
    pub fn relative_gap(&self) -> f64 {
        match self.status {
            SolveStatus::Unbounded | SolveStatus::EmptyFamily => 0.0,
            _ => (self.value - self.lower_bound) / self.lower_bound.max(f64::MIN_POSITIVE),
        }
    }

    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    fn trivial(p: f64, n: usize, status: SolveStatus) -> Self {
        let value = match status {
            SolveStatus::Unbounded => f64::INFINITY,
            _ => 0.0,
        };
        ModulusResult {
            p,
            value,
            rho_star: Density::zeros(n),
            active: Vec::new(),
            lower_bound: value,
            violation: match status {
                SolveStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            status,
            outer_iterations: 0,
            inner_iterations: 0,
            history: Vec::new(),
        }
    }
}

/// Closed-form dual value `inf_{rho >= 0} sum m rho^p - sum lambda (w . rho - 1)`.
///
/// Returns `-inf` when some multiplier charges a node of zero measure.
pub fn lagrangian_lower_bound(active: &[ActiveConstraint], p: f64, measures: &[f64]) -> f64 {
    let mut s = alloc::vec![0.0; measures.len()];
    let mut total = 0.0;
    for a in active {
        let lambda = a.multiplier.max(0.0);
        total += lambda;
        for (&v, &w) in a.constraint.support.iter().zip(&a.constraint.weights) {
            s[v] += lambda * w;
        }
    }
    let mut penalty = 0.0;
    for (&sv, &m) in s.iter().zip(measures) {
        if sv <= 0.0 {
            continue;
        }
        if m <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let rho = math::pow_nonneg(sv / (p * m), 1.0 / (p - 1.0));
        penalty += sv * rho;
    }
    total - (p - 1.0) / p * penalty
}

struct Member {
    constraint: MeasureConstraint,
    support: Vec<u32>,
    coef: Vec<f64>,
    idle_rounds: usize,
}

fn member_key(c: &MeasureConstraint) -> Vec<u64> {
    c.support
        .iter()
        .map(|&v| v as u64)
        .chain(c.weights.iter().map(|w| w.to_bits()))
        .collect()
}

/// The problem restricted to the active members, in normalized units.
struct Restricted {
    q: f64,
    /// `m_v^(1 - q)`; infinite where `m_v = 0`.
    cost: Vec<f64>,
    /// `m_v^(-1)`.
    inv_measure: Vec<f64>,
    members: Vec<Member>,
    keys: BTreeSet<Vec<u64>>,
    mu: Vec<f64>,
    eta: Vec<f64>,
    /// `rho(eta)`.
    rho: Vec<f64>,
}

impl Restricted {
    fn new(p: f64, measures: &[f64]) -> Self {
        let q = p / (p - 1.0);
        let n = measures.len();
        Restricted {
            q,
            cost: measures
                .iter()
                .map(|&m| if m > 0.0 { math::powf(m, 1.0 - q) } else { f64::INFINITY })
                .collect(),
            inv_measure: measures
                .iter()
                .map(|&m| if m > 0.0 { 1.0 / m } else { f64::INFINITY })
                .collect(),
            members: Vec::new(),
            keys: BTreeSet::new(),
            mu: Vec::new(),
            eta: alloc::vec![0.0; n],
            rho: alloc::vec![0.0; n],
        }
    }

    /// Index of `constraint` among the members, adding it with weight zero.
    fn insert(&mut self, constraint: MeasureConstraint, length_scale: f64) -> Result<usize> {
        let key = member_key(&constraint);
        if self.keys.contains(&key) {
            let k = self
                .members
                .iter()
                .position(|m| member_key(&m.constraint) == key)
                .unwrap_or(0);
            return Ok(k);
        }
        if let Some(&v) = constraint.support.iter().find(|&&v| self.cost[v].is_infinite()) {
            return Err(Error::Domain(alloc::format!(
                "a member charges node {v}, which has zero measure"
            )));
        }
        self.keys.insert(key);
        let support = constraint.support.iter().map(|&v| v as u32).collect();
        let coef = constraint.weights.iter().map(|w| w / length_scale).collect();
        self.members.push(Member {
            constraint,
            support,
            coef,
            idle_rounds: 0,
        });
        self.mu.push(0.0);
        Ok(self.members.len() - 1)
    }

    fn load(&self, mu: &[f64], eta: &mut [f64]) {
        eta.iter_mut().for_each(|x| *x = 0.0);
        for (m, &weight) in self.members.iter().zip(mu) {
            if weight > 0.0 {
                for (&v, &a) in m.support.iter().zip(&m.coef) {
                    eta[v as usize] += weight * a;
                }
            }
        }
    }

    fn energy(&self, eta: &[f64]) -> f64 {
        eta.iter()
            .zip(&self.cost)
            .filter(|(&e, _)| e > 0.0)
            .map(|(&e, &c)| c * math::pow_nonneg(e, self.q))
            .sum()
    }

    /// Recomputes `eta` and `rho` from `mu`; returns `F`.
    fn refresh(&mut self) -> f64 {
        let mut eta = core::mem::take(&mut self.eta);
        self.load(&self.mu, &mut eta);
        self.eta = eta;
        self.update_rho();
        self.energy(&self.eta)
    }

    fn update_rho(&mut self) {
        let e = self.q - 1.0;
        for ((r, &x), &inv) in self.rho.iter_mut().zip(&self.eta).zip(&self.inv_measure) {
            *r = if x > 0.0 { math::pow_nonneg(x * inv, e) } else { 0.0 };
        }
    }

    /// `w_k . rho` for every member.
    fn masses(&self, rho: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.members.iter().map(|m| {
            m.support
                .iter()
                .zip(&m.coef)
                .map(|(&v, &a)| a * rho[v as usize])
                .sum::<f64>()
        }));
    }

    /// Minimizes `F((1 - t) eta + t w_k)` over `t` in `[0, 1]` and moves there.
    fn step_towards(&mut self, k: usize) -> f64 {
        let mut target = alloc::vec![0.0; self.eta.len()];
        for (&v, &a) in self.members[k].support.iter().zip(&self.members[k].coef) {
            target[v as usize] += a;
        }
        let slope = |t: f64| -> f64 {
            self.eta
                .iter()
                .zip(&target)
                .zip(&self.cost)
                .map(|((&e, &a), &c)| {
                    let x = e + t * (a - e);
                    if x > 0.0 {
                        c * math::pow_nonneg(x, self.q - 1.0) * (a - e)
                    } else {
                        0.0
                    }
                })
                .sum()
        };
        let t = if slope(1.0) <= 0.0 {
            1.0
        } else if slope(0.0) >= 0.0 {
            0.0
        } else {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if slope(mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        };
        if t > 0.0 {
            for (i, w) in self.mu.iter_mut().enumerate() {
                *w *= 1.0 - t;
                if i == k {
                    *w += t;
                }
            }
            for (e, &a) in self.eta.iter_mut().zip(&target) {
                *e += t * (a - *e);
            }
            self.update_rho();
        }
        t
    }

    /// Projected gradient on the simplex over the active weights. Stops when
    /// every weighted member's mass is within `tol * F` of the lightest one.
    /// Returns the iterations used.
    fn polish(&mut self, tol: f64, max_iters: usize, rule: &StepRule) -> usize {
        let k = self.members.len();
        if k < 2 {
            return 0;
        }
        let mut f = self.refresh();
        let mut grad = Vec::with_capacity(k);
        self.masses(&self.rho, &mut grad);
        let mut history: Vec<f64> = alloc::vec![f];
        let mut trial = alloc::vec![0.0; k];
        let mut dir = alloc::vec![0.0; k];
        let mut trial_eta = alloc::vec![0.0; self.eta.len()];
        let mut step = 1.0 / f.max(f64::MIN_POSITIVE);
        let mut iters = 0;
        let start = (self.mu.clone(), f);
        while iters < max_iters {
            let lightest = grad.iter().copied().fold(f64::INFINITY, f64::min);
            let heaviest = grad
                .iter()
                .zip(&self.mu)
                .filter(|(_, &w)| w > 0.0)
                .map(|(&g, _)| g)
                .fold(f64::NEG_INFINITY, f64::max);
            if heaviest - lightest <= tol * f {
                break;
            }
            iters += 1;
            // grad F = q * masses; the factor q is folded into the step.
            for i in 0..k {
                trial[i] = self.mu[i] - step * grad[i];
            }
            project_simplex(&mut trial);
            let mut slope = 0.0;
            for i in 0..k {
                dir[i] = trial[i] - self.mu[i];
                slope += self.q * grad[i] * dir[i];
            }
            if !(slope < 0.0) {
                step = (step * 10.0).min(rule.step_max);
                if step >= rule.step_max {
                    break;
                }
                continue;
            }
            let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut t = 1.0;
            let mut accepted = None;
            while t > 1e-20 {
                for i in 0..k {
                    trial[i] = (self.mu[i] + t * dir[i]).max(0.0);
                }
                self.load(&trial, &mut trial_eta);
                let value = self.energy(&trial_eta);
                if value <= reference + rule.armijo * t * slope {
                    accepted = Some(value);
                    break;
                }
                t *= rule.shrink;
            }
            let Some(value) = accepted else { break };
            core::mem::swap(&mut self.mu, &mut trial);
            core::mem::swap(&mut self.eta, &mut trial_eta);
            self.update_rho();
            f = value;
            let old = core::mem::take(&mut grad);
            self.masses(&self.rho, &mut grad);
            let mut ss = 0.0;
            let mut sy = 0.0;
            for i in 0..k {
                let ds = self.mu[i] - trial[i];
                ss += ds * ds;
                sy += ds * (grad[i] - old[i]);
            }
            step = if sy > 0.0 {
                (ss / sy).clamp(rule.step_min, rule.step_max)
            } else {
                rule.step_max
            };
            if history.len() == rule.memory {
                history.remove(0);
            }
            history.push(f);
        }
        // The nonmonotone search may end above its start.
        if f > start.1 {
            self.mu = start.0;
            self.refresh();
        }
        iters
    }

    fn prune(&mut self, after: usize) {
        for (m, &w) in self.members.iter_mut().zip(&self.mu) {
            if w > 0.0 {
                m.idle_rounds = 0;
            } else {
                m.idle_rounds += 1;
            }
        }
        if self.members.iter().all(|m| m.idle_rounds < after) {
            return;
        }
        let members = core::mem::take(&mut self.members);
        let mu = core::mem::take(&mut self.mu);
        for (m, w) in members.into_iter().zip(mu) {
            if m.idle_rounds >= after {
                self.keys.remove(&member_key(&m.constraint));
            } else {
                self.members.push(m);
                self.mu.push(w);
            }
        }
    }
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(x: &mut [f64]) {
    let mut sorted: Vec<f64> = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if v - candidate > 0.0 {
            theta = candidate;
        }
    }
    for v in x.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
}

/// Computes `Mod_p` of the family behind `oracle` with node measures `measures`.
///
/// An empty family gives modulus zero with an empty certificate; a family
/// with a zero-mass member gives [`SolveStatus::Unbounded`]. Failing to reach
/// the gap target is reported through the status, not as an error.
pub fn solve_modulus<O: ConstraintOracle + ?Sized>(
    oracle: &O,
    measures: &[f64],
    cfg: &SolverConfig,
) -> Result<ModulusResult> {
    cfg.validate()?;
    let n = oracle.node_count();
    if measures.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            found: measures.len(),
        });
    }
    if let Some(index) = measures.iter().position(|&m| !(m >= 0.0 && m.is_finite())) {
        return Err(Error::Domain(alloc::format!(
            "measure at node {index} must be a nonnegative real"
        )));
    }
    let p = cfg.p;
    let total_measure: f64 = measures.iter().sum();
    if !(total_measure > 0.0) {
        return Err(Error::Domain("total measure must be positive".into()));
    }

    let ones = alloc::vec![1.0; n];
    let length_scale = match oracle.separate(&ones, 1)? {
        Separation::NoMembers => return Ok(ModulusResult::trivial(p, n, SolveStatus::EmptyFamily)),
        Separation::Cuts(cuts) => {
            if cuts.iter().any(|(_, c)| c.is_null()) {
                return Ok(ModulusResult::trivial(p, n, SolveStatus::Unbounded));
            }
            min_cut(&cuts)
        }
    };
    if !(length_scale > 0.0) {
        return Ok(ModulusResult::trivial(p, n, SolveStatus::Unbounded));
    }
    // value_original = scale * value_normalized
    let scale = total_measure / math::powf(length_scale, p);
    let normalized: Vec<f64> = measures.iter().map(|m| m / total_measure).collect();
    let mut state = Restricted::new(p, &normalized);

    // The starting density only picks the first member and a first upper bound.
    let start: Vec<f64> = match cfg.init {
        InitialDensity::Canonical => ones,
        InitialDensity::Zero => alloc::vec![0.0; n],
        InitialDensity::Constant(c) => alloc::vec![c * length_scale; n],
    };
    let mut best_upper = f64::INFINITY;
    let mut best_rho: Option<Vec<f64>> = None;
    let mut rho = alloc::vec![0.0; n];
    let mut consider = |density: &[f64], energy: f64, lightest: f64, best_upper: &mut f64| {
        if lightest > cfg.epsilon_floor {
            let upper = energy / math::powf(lightest, p);
            if upper < *best_upper {
                *best_upper = upper;
                best_rho = Some(density.iter().map(|r| r / lightest).collect());
            }
        }
    };

    for (r, &s) in rho.iter_mut().zip(&start) {
        *r = s / length_scale;
    }
    let mut first = match oracle.separate(&rho, 1)? {
        Separation::Cuts(cuts) if !cuts.is_empty() => cuts,
        _ => return Err(Error::Domain("oracle returned no member".into())),
    };
    let start_energy: f64 = start
        .iter()
        .zip(&normalized)
        .map(|(&x, &m)| m * math::pow_nonneg(x, p))
        .sum();
    consider(&start, start_energy, min_cut(&first), &mut best_upper);
    let k = state.insert(first.swap_remove(0).1, length_scale)?;
    state.mu[k] = 1.0;
    let mut energy = state.refresh();

    let mut history = Vec::new();
    let mut inner_total = 0;
    let mut inner_tol = 0.1 * cfg.tol_gap / p;
    let mut status = SolveStatus::IterationLimit;
    let mut outer = 0;
    while outer < cfg.max_outer_iters {
        outer += 1;
        for (r, &s) in rho.iter_mut().zip(&state.rho) {
            *r = s / length_scale;
        }
        let cuts = match oracle.separate(&rho, cfg.max_cuts_per_round)? {
            Separation::Cuts(cuts) if !cuts.is_empty() => cuts,
            _ => return Err(Error::Domain("oracle lost all members mid-solve".into())),
        };
        if cuts.iter().any(|(_, c)| c.is_null()) {
            return Ok(ModulusResult::trivial(p, n, SolveStatus::Unbounded));
        }
        let lightest = min_cut(&cuts);
        let snapshot = state.rho.clone();
        consider(&snapshot, energy, lightest, &mut best_upper);
        let lower = math::powf(energy, 1.0 - p);
        history.push(IterationRecord {
            outer,
            lower_bound: lower * scale,
            upper_bound: best_upper * scale,
            slack: lightest / energy - 1.0,
            active: state.members.len(),
            inner_iterations: 0,
        });
        if best_upper / lower - 1.0 <= cfg.tol_gap {
            status = SolveStatus::Converged;
            break;
        }

        // Members well below the current average improve the load.
        let threshold = 0.5 * (lightest + energy);
        let mut best = None;
        let mut added = 0;
        for (value, constraint) in cuts {
            if value < threshold || (best.is_none() && value < energy) {
                let before = state.members.len();
                let k = state.insert(constraint, length_scale)?;
                added += state.members.len() - before;
                best.get_or_insert(k);
            }
        }
        let moved = match best {
            Some(k) => state.step_towards(k),
            None => 0.0,
        };
        let iters = state.polish(inner_tol, cfg.max_inner_iters, &cfg.step);
        inner_total += iters;
        if let Some(rec) = history.last_mut() {
            rec.inner_iterations = iters;
        }
        let previous = energy;
        energy = state.energy(&state.eta);
        if added == 0 && !(moved > 0.0 && energy < previous) {
            if inner_tol > 1e-13 {
                inner_tol *= 0.1;
            } else {
                status = SolveStatus::Stalled;
                break;
            }
        }
        state.prune(cfg.prune_after);
    }

    let lower = math::powf(energy, 1.0 - p);
    let rho_star: Vec<f64> = best_rho
        .map(|r| r.iter().map(|x| x / length_scale).collect())
        .unwrap_or_else(|| alloc::vec![0.0; n]);
    let violation = match oracle.separate(&rho_star, 1)? {
        Separation::Cuts(c) => min_cut(&c) - 1.0,
        Separation::NoMembers => f64::INFINITY,
    };
    let multiplier = p * lower * scale;
    let active = state
        .members
        .into_iter()
        .zip(&state.mu)
        .filter(|(_, &w)| w > 0.0)
        .map(|(m, &w)| ActiveConstraint {
            constraint: m.constraint,
            multiplier: multiplier * w,
        })
        .collect();
    Ok(ModulusResult {
        p,
        value: best_upper * scale,
        rho_star: Density(rho_star),
        active,
        lower_bound: lower * scale,
        violation,
        status,
        outer_iterations: outer,
        inner_iterations: inner_total,
        history,
    })
}

fn min_cut(cuts: &[(f64, MeasureConstraint)]) -> f64 {
    cuts.iter().map(|c| c.0).fold(f64::INFINITY, f64::min)
}

/// Reciprocity check for the quadrilateral: `Mod_p Gamma(A, C)` against
/// `Mod_q Sigma(A, C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReciprocityReport {
    pub p: f64,
    pub q: f64,
    pub mod_p_gamma: ModulusResult,
    pub mod_q_sigma: ModulusResult,
    /// `Mod_p^(1/p) * Mod_q^(1/q)`; `None` in the degenerate case.
    pub product: Option<f64>,
    /// `v_2 / (2 v_1) = pi / 4`.
    pub bound: f64,
    /// `bound * (1 - tol_reciprocity)`.
    pub threshold: f64,
    /// `Mod_p Gamma = 0` together with `Mod_q Sigma = inf`.
    pub degenerate: bool,
    pub passed: bool,
    /// Both solves reached their certified status.
    pub certified: bool,
}

pub fn verify_reciprocity(
    grid: &MetricGrid,
    p: f64,
    cfg: &SolverConfig,
    tol_reciprocity: f64,
) -> Result<ReciprocityReport> {
    let cfg_p = cfg.with_p(p);
    cfg_p.validate()?;
    let q = cfg_p.q();
    let cfg_q = cfg.with_p(q);
    let measures = grid.measures();
    let gamma = ConnectingFamily::crossing(grid, Side::A)?;
    let sigma = SeparatingFamily::new(grid, Side::A)?;
    let mod_p_gamma = solve_modulus(&gamma, &measures, &cfg_p)?;
    let mod_q_sigma = solve_modulus(&sigma, &measures, &cfg_q)?;
    let bound = grid.constants().reciprocity_bound();
    let threshold = bound * (1.0 - tol_reciprocity);
    let degenerate = mod_p_gamma.status == SolveStatus::EmptyFamily;
    let (product, passed) = if degenerate {
        (None, mod_q_sigma.status == SolveStatus::Unbounded)
    } else {
        let product = math::powf(mod_p_gamma.value, 1.0 / p) * math::powf(mod_q_sigma.value, 1.0 / q);
        (Some(product), product >= threshold)
    };
    let certified = mod_p_gamma.status.is_certified() && mod_q_sigma.status.is_certified();
    Ok(ReciprocityReport {
        p,
        q,
        mod_p_gamma,
        mod_q_sigma,
        product,
        bound,
        threshold,
        degenerate,
        passed,
        certified,
    })
}
