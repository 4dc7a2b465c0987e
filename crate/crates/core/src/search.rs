// Multi-source Dijkstra with deterministic (distance, hops, node) ordering.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

pub(crate) const NONE: u32 = u32::MAX;

pub(crate) struct ShortestPaths {
    pub dist: Vec<f64>,
    pub hops: Vec<u32>,
    /// Predecessor on the search tree (the next hop toward the sources).
    pub pred: Vec<u32>,
    /// First node of the stop set settled, when one was given.
    pub reached: Option<usize>,
}

impl ShortestPaths {
    /// Nodes from the search root to `v`, root first.
    pub fn path_to(&self, v: usize) -> Vec<usize> {
        let mut path = Vec::with_capacity(self.hops[v] as usize + 1);
        let mut cur = v;
        path.push(cur);
        while self.pred[cur] != NONE {
            cur = self.pred[cur] as usize;
            path.push(cur);
        }
        path.reverse();
        path
    }
}

#[derive(Clone, Copy)]
struct Entry {
    dist: f64,
    hops: u32,
    node: u32,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Reversed so the max-heap pops the lexicographically smallest entry.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then(other.hops.cmp(&self.hops))
            .then(other.node.cmp(&self.node))
    }
}

/// Runs Dijkstra from `sources` over nodes for which `neighbors` reports edges.
///
/// `cost(u, w)` is the weight of relaxing the edge from settled `u` to `w`
/// and must be nonnegative. With `stop` given, the search ends as soon as a
/// node of the stop set is settled.
pub(crate) fn dijkstra<N, C>(
    count: usize,
    sources: &[usize],
    mut neighbors: N,
    cost: C,
    stop: Option<&[bool]>,
) -> ShortestPaths
where
    N: FnMut(usize, &mut Vec<usize>),
    C: Fn(usize, usize) -> f64,
{
    let mut dist = alloc::vec![f64::INFINITY; count];
    let mut hops = alloc::vec![u32::MAX; count];
    let mut pred = alloc::vec![NONE; count];
    let mut done = alloc::vec![false; count];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        if dist[s] > 0.0 || hops[s] > 0 {
            dist[s] = 0.0;
            hops[s] = 0;
            heap.push(Entry {
                dist: 0.0,
                hops: 0,
                node: s as u32,
            });
        }
    }
    let mut buf = Vec::with_capacity(32);
    let mut reached = None;
    while let Some(Entry { dist: d, hops: h, node }) = heap.pop() {
        let u = node as usize;
        if done[u] || d != dist[u] || h != hops[u] {
            continue;
        }
        done[u] = true;
        if let Some(mask) = stop {
            if mask[u] {
                reached = Some(u);
                break;
            }
        }
        buf.clear();
        neighbors(u, &mut buf);
        for &w in &buf {
            if done[w] {
                continue;
            }
            let nd = d + cost(u, w);
            let nh = h + 1;
            if nd < dist[w] || (nd == dist[w] && nh < hops[w]) {
                dist[w] = nd;
                hops[w] = nh;
                pred[w] = u as u32;
                heap.push(Entry {
                    dist: nd,
                    hops: nh,
                    node: w as u32,
                });
            }
        }
    }
    ShortestPaths {
        dist,
        hops,
        pred,
        reached,
    }
}
