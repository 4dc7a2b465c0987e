//! Exhaustive-enumeration oracles on tiny grids.
//!
//! Everything geometric is recomputed here from node coordinates so the
//! library's step lengths, sides and neighborhoods are checked, not reused.

use modrecip_core::{
    capacity_potential, chain_potential, solve_modulus, ConnectingFamily, DiscreteCurve, ExplicitFamily,
    IntegrationRule, MetricGrid, Norm, SeparatingFamily, Side, SolverConfig, WeightField,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: u64 = 100;

struct Tiny {
    n: usize,
    width: f64,
    height: f64,
    norm: Norm,
    weight: Vec<f64>,
}

impl Tiny {
    fn grid(&self) -> MetricGrid {
        MetricGrid::new(self.n, self.width, self.height, self.norm)
            .unwrap()
            .with_weight(WeightField::Values(self.weight.clone()))
            .unwrap()
    }

    fn coords(&self, v: usize) -> (usize, usize) {
        (v % self.n, v / self.n)
    }

    fn dist(&self, a: usize, b: usize) -> f64 {
        let (i0, j0) = self.coords(a);
        let (i1, j1) = self.coords(b);
        let dx = (i1 as f64 - i0 as f64) * self.width / self.n as f64;
        let dy = (j1 as f64 - j0 as f64) * self.height / self.n as f64;
        match self.norm {
            Norm::L1 => dx.abs() + dy.abs(),
            Norm::L2 => (dx * dx + dy * dy).sqrt(),
            Norm::LInf => dx.abs().max(dy.abs()),
        }
    }

    /// Pairs within `radius` (8-neighborhood when `None`).
    fn adjacency(&self, radius: Option<f64>) -> Vec<Vec<usize>> {
        let count = self.n * self.n;
        (0..count)
            .map(|a| {
                (0..count)
                    .filter(|&b| {
                        let (i0, j0) = self.coords(a);
                        let (i1, j1) = self.coords(b);
                        let close = match radius {
                            None => i0.abs_diff(i1) <= 1 && j0.abs_diff(j1) <= 1,
                            Some(r) => self.dist(a, b) <= r * (1.0 + 1e-12),
                        };
                        a != b && close
                    })
                    .collect()
            })
            .collect()
    }

    fn side(&self, side: Side) -> Vec<usize> {
        let last = self.n - 1;
        (0..self.n * self.n)
            .filter(|&v| {
                let (i, j) = self.coords(v);
                match side {
                    Side::A => i == 0,
                    Side::B => j == 0,
                    Side::C => i == last,
                    Side::D => j == last,
                }
            })
            .collect()
    }

    fn trapezoid(&self, rho: &[f64], a: usize, b: usize) -> f64 {
        0.5 * (rho[a] * self.weight[a] + rho[b] * self.weight[b]) * self.dist(a, b)
    }
}

/// Least cost over simple paths from `sources` to `targets`, by depth-first
/// enumeration. Branches whose cost already reaches the best complete path are
/// cut, which is exact because costs are nonnegative.
fn brute_force_min(
    adj: &[Vec<usize>],
    sources: &[usize],
    targets: &[usize],
    cost: &dyn Fn(usize, usize) -> f64,
) -> f64 {
    fn dfs(
        v: usize,
        acc: f64,
        adj: &[Vec<usize>],
        is_target: &[bool],
        on_path: &mut Vec<bool>,
        cost: &dyn Fn(usize, usize) -> f64,
        best: &mut f64,
    ) {
        if acc >= *best {
            return;
        }
        if is_target[v] {
            *best = acc;
            return;
        }
        for &w in &adj[v] {
            if !on_path[w] {
                on_path[w] = true;
                dfs(w, acc + cost(v, w), adj, is_target, on_path, cost, best);
                on_path[w] = false;
            }
        }
    }
    let mut is_target = vec![false; adj.len()];
    for &t in targets {
        is_target[t] = true;
    }
    let mut best = f64::INFINITY;
    for &s in sources {
        let mut on_path = vec![false; adj.len()];
        on_path[s] = true;
        dfs(s, 0.0, adj, &is_target, &mut on_path, cost, &mut best);
    }
    best
}

fn tiny_cases() -> Vec<(usize, f64, f64)> {
    vec![(2, 1.0, 1.0), (3, 1.0, 1.0), (4, 1.0, 1.0), (3, 2.0, 1.0), (4, 1.0, 3.0)]
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(lo..hi)).collect()
}

fn assert_close(found: f64, expected: f64, what: &str) {
    assert!(
        (found - expected).abs() <= 1e-9 * expected.abs().max(1.0),
        "{what}: {found} vs brute force {expected}"
    );
}

#[test]
pub fn shortest_admissible_curve_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (n, width, height) in tiny_cases() {
        for norm in Norm::ALL {
            for _ in 0..SEEDS {
                let t = Tiny {
                    n,
                    width,
                    height,
                    norm,
                    weight: random_vec(&mut rng, n * n, 0.5, 2.0),
                };
                let grid = t.grid();
                let rho = random_vec(&mut rng, n * n, 0.0, 3.0);
                let family = ConnectingFamily::crossing(&grid, Side::A).unwrap();
                let found = family.shortest_admissible_curve(&rho).unwrap().unwrap();
                let expected = brute_force_min(&t.adjacency(None), &t.side(Side::A), &t.side(Side::C), &|a, b| {
                    t.trapezoid(&rho, a, b)
                });
                assert_close(found.value, expected, "shortest curve");
                assert_close(found.curve.integrate(&grid, &rho), expected, "curve integral");
            }
        }
    }
}

#[test]
pub fn most_violated_cut_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (n, width, height) in tiny_cases() {
        for norm in Norm::ALL {
            for _ in 0..SEEDS {
                let t = Tiny {
                    n,
                    width,
                    height,
                    norm,
                    weight: random_vec(&mut rng, n * n, 0.5, 2.0),
                };
                let grid = t.grid();
                let rho = random_vec(&mut rng, n * n, 0.0, 3.0);
                let family = SeparatingFamily::new(&grid, Side::A).unwrap();
                let cut = family.most_violated_cut(&rho).unwrap();
                // Boundaries between A and C are crossed by paths from B to D.
                let expected = brute_force_min(&t.adjacency(None), &t.side(Side::B), &t.side(Side::D), &|a, b| {
                    t.trapezoid(&rho, a, b)
                });
                assert_close(cut.mass, expected, "cut mass");
                assert_close(cut.constraint.integrate(&rho), expected, "cut constraint");
            }
        }
    }
}

#[test]
pub fn capacity_potential_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for (n, width, height) in tiny_cases() {
        for norm in Norm::ALL {
            for _ in 0..SEEDS {
                let t = Tiny {
                    n,
                    width,
                    height,
                    norm,
                    weight: random_vec(&mut rng, n * n, 0.5, 2.0),
                };
                let grid = t.grid();
                let g = random_vec(&mut rng, n * n, 0.0, 1.5);
                let u = capacity_potential(&grid, &g, Side::A).unwrap();
                let adj = t.adjacency(None);
                let sources = t.side(Side::A);
                for v in 0..n * n {
                    let expected = brute_force_min(&adj, &sources, &[v], &|a, b| t.trapezoid(&g, a, b)).min(1.0);
                    assert_close(u[v], expected, "capacity potential");
                }
            }
        }
    }
}

#[test]
pub fn chain_potential_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for (n, width, height) in tiny_cases() {
        for norm in Norm::ALL {
            for k in 0..SEEDS {
                let t = Tiny {
                    n,
                    width,
                    height,
                    norm,
                    weight: random_vec(&mut rng, n * n, 0.5, 2.0),
                };
                let grid = t.grid();
                // Indicator-weighted gradient: a random set of cheap nodes.
                let g: Vec<f64> = (0..n * n)
                    .map(|_| if rng.gen_bool(0.5) { 0.1 } else { rng.gen_range(0.5..2.0) })
                    .collect();
                let spacing = grid.spacing();
                let radius = if k % 2 == 0 { spacing } else { 1.6 * spacing };
                let pot = chain_potential(&grid, &g, Side::A, radius, 1e-9).unwrap();
                let adj = t.adjacency(Some(radius));
                let sources = t.side(Side::A);
                for v in 0..n * n {
                    let f = brute_force_min(&adj, &sources, &[v], &|a, b| g[a] * t.weight[a] * t.dist(a, b));
                    assert_close(pot.f[v], f, "chain potential F");
                    assert_close(pot.u[v], f.min(1.0), "chain potential u");
                }
            }
        }
    }
}

#[test]
pub fn single_constraint_quadratic_program() {
    // 2x2 Euclidean unit square, one member: the step between the two bottom
    // nodes with trapezoid shares w = (1/4, 1/4) and cell measures m = 1/4.
    // Minimizing sum m rho^2 subject to w . rho >= 1 gives rho = w / (m t)
    // with t = sum w^2 / m = 1/2, value 1 / t = 2 and multiplier 2 / t = 4.
    let grid = MetricGrid::unit_square(2, Norm::L2).unwrap();
    let curve = DiscreteCurve::new(&grid, vec![0, 1], IntegrationRule::Trapezoid).unwrap();
    let constraint = curve.to_constraint(&grid);
    assert_eq!(constraint.support, vec![0, 1]);
    assert_close(constraint.weights[0], 0.25, "share");
    let family = ExplicitFamily::new(4, vec![constraint]).unwrap();
    let mut cfg = SolverConfig::new(2.0);
    cfg.tol_gap = 1e-9;
    let res = solve_modulus(&family, &grid.measures(), &cfg).unwrap();
    assert!((res.value - 2.0).abs() < 1e-6, "{}", res.value);
    assert!((res.lower_bound - 2.0).abs() < 1e-6);
    for v in [0, 1] {
        assert!((res.rho_star.values()[v] - 2.0).abs() < 1e-6);
    }
    assert_eq!(res.rho_star.values()[2], 0.0);
    assert_eq!(res.active.len(), 1);
    assert!((res.active[0].multiplier - 4.0).abs() < 1e-6);
}
