//! Graph families, random instances and random configurations.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bfs::BfsVars;
use crate::compose::{Color, LoopState, Mode};
use crate::graph::{Graph, GraphError, ProcessId};
use crate::kgrouping::{GState, GroupVars, Slot};
use crate::runtime::Configuration;

fn numbered(n: u32, edges: &[(u32, u32)]) -> Result<Graph, GraphError> {
    let ids: Vec<u32> = (1..=n).collect();
    Graph::from_edges(&ids, edges)
}

/// `1 - 2 - ... - n`
pub fn path(n: u32) -> Result<Graph, GraphError> {
    let edges: Vec<(u32, u32)> = (1..n).map(|i| (i, i + 1)).collect();
    numbered(n, &edges)
}

/// `1 - 2 - ... - n - 1`, for `n >= 3`.
pub fn cycle(n: u32) -> Result<Graph, GraphError> {
    if n < 3 {
        return Err(GraphError::TooSmall(n as usize));
    }
    let edges: Vec<(u32, u32)> = (1..=n).map(|i| (i, i % n + 1)).collect();
    numbered(n, &edges)
}

/// Row-major `r x c` grid with `r * c = n` and `r` the largest divisor of
/// `n` not above its square root.
pub fn grid(n: u32) -> Result<Graph, GraphError> {
    let r = (1..=n).take_while(|r| r * r <= n).filter(|r| n.is_multiple_of(*r)).last().unwrap_or(1);
    let c = n / r;
    let id = |i: u32, j: u32| i * c + j + 1;
    let mut edges = Vec::new();
    for i in 0..r {
        for j in 0..c {
            if j + 1 < c {
                edges.push((id(i, j), id(i, j + 1)));
            }
            if i + 1 < r {
                edges.push((id(i, j), id(i + 1, j)));
            }
        }
    }
    numbered(n, &edges)
}

/// Erdős–Rényi `G(n, p)` with `p = 2 ln n / n`, redrawn until connected.
pub fn random_gnp<R: Rng>(n: u32, rng: &mut R) -> Result<Graph, GraphError> {
    let p = (2.0 * (n as f64).ln() / n as f64).clamp(0.0, 1.0);
    loop {
        let mut edges = Vec::new();
        for a in 1..=n {
            for b in a + 1..=n {
                if rng.gen_bool(p) {
                    edges.push((a, b));
                }
            }
        }
        match numbered(n, &edges) {
            Err(GraphError::Disconnected) => continue,
            other => return other,
        }
    }
}

/// Random connected graph: `n` distinct ids drawn from `1..=4n`, a random
/// spanning tree, and every other pair joined with probability `extra`.
pub fn random_connected<R: Rng>(n: u32, extra: f64, rng: &mut R) -> Result<Graph, GraphError> {
    let mut pool: Vec<u32> = (1..=4 * n).collect();
    pool.shuffle(rng);
    let ids: Vec<u32> = pool[..n as usize].to_vec();
    let mut edges = BTreeSet::new();
    for i in 1..n as usize {
        let j = rng.gen_range(0..i);
        edges.insert((ids[i].min(ids[j]), ids[i].max(ids[j])));
    }
    for i in 0..n as usize {
        for j in i + 1..n as usize {
            let e = (ids[i].min(ids[j]), ids[i].max(ids[j]));
            if !edges.contains(&e) && rng.gen_bool(extra) {
                edges.insert(e);
            }
        }
    }
    let edges: Vec<(u32, u32)> = edges.into_iter().collect();
    Graph::from_edges(&ids, &edges)
}

/// Every connected graph on `n` labeled vertices `1..=n`, one per
/// isomorphism class.
pub fn connected_graphs(n: u32) -> Vec<Vec<(u32, u32)>> {
    assert!(n <= 8, "enumeration is exponential");
    // adjacency as one bitmask row per vertex
    let mut layer: BTreeSet<Vec<u8>> = BTreeSet::from([vec![0u8]]);
    for m in 2..=n as usize {
        let mut next = BTreeSet::new();
        for g in &layer {
            // a connected graph minus a non-cut vertex stays connected, so
            // attaching a new vertex to every nonempty subset reaches them all
            for subset in 1u16..(1 << (m - 1)) {
                let mut h: Vec<u8> = g.clone();
                h.push(0);
                for (i, row) in h.iter_mut().enumerate().take(m - 1) {
                    if subset >> i & 1 == 1 {
                        *row |= 1 << (m - 1);
                    }
                }
                for i in 0..m - 1 {
                    if subset >> i & 1 == 1 {
                        h[m - 1] |= 1 << i;
                    }
                }
                next.insert(canonical(&h));
            }
        }
        layer = next;
    }
    layer
        .into_iter()
        .map(|g| {
            let mut edges = Vec::new();
            for (i, row) in g.iter().enumerate() {
                for j in i + 1..g.len() {
                    if row >> j & 1 == 1 {
                        edges.push((i as u32 + 1, j as u32 + 1));
                    }
                }
            }
            edges
        })
        .collect()
}

/// Smallest relabeling among those that list vertices by ascending degree.
fn canonical(g: &[u8]) -> Vec<u8> {
    let n = g.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| g[v].count_ones());
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for &v in &order {
        match blocks.last_mut() {
            Some(b) if g[b[0]].count_ones() == g[v].count_ones() => b.push(v),
            _ => blocks.push(vec![v]),
        }
    }
    let mut best: Option<Vec<u8>> = None;
    let mut perm = Vec::with_capacity(n);
    search(g, &blocks, 0, &mut perm, &mut best);
    best.expect("at least one relabeling")
}

fn search(g: &[u8], blocks: &[Vec<usize>], b: usize, perm: &mut Vec<usize>, best: &mut Option<Vec<u8>>) {
    if b == blocks.len() {
        // perm[new] = old
        let n = g.len();
        let mut pos = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            pos[old] = new;
        }
        let h: Vec<u8> = (0..n)
            .map(|new| {
                let old = perm[new];
                (0..n).filter(|&o| g[old] >> o & 1 == 1).fold(0u8, |acc, o| acc | 1 << pos[o])
            })
            .collect();
        if best.as_ref().is_none_or(|cur| h < *cur) {
            *best = Some(h);
        }
        return;
    }
    let mut block = blocks[b].clone();
    permute(&mut block, 0, &mut |p| {
        let len = perm.len();
        perm.extend_from_slice(p);
        search(g, blocks, b + 1, perm, best);
        perm.truncate(len);
    });
}

fn permute(xs: &mut [usize], i: usize, f: &mut dyn FnMut(&[usize])) {
    if i == xs.len() {
        f(xs);
        return;
    }
    for j in i..xs.len() {
        xs.swap(i, j);
        permute(xs, i + 1, f);
        xs.swap(i, j);
    }
}

/// Ids that match no process, for seeding adversarial configurations.
pub fn false_ids(graph: &Graph, count: usize) -> Vec<ProcessId> {
    let max = graph.ids().last().map_or(0, |v| v.0);
    let mut out: Vec<ProcessId> = (1..=count as u32).map(|i| ProcessId(max + i)).collect();
    if !graph.contains(ProcessId(0)) && count > 0 {
        out[0] = ProcessId(0);
    }
    out
}

fn pick_id<R: Rng>(rng: &mut R, ids: &[ProcessId]) -> ProcessId {
    ids[rng.gen_range(0..ids.len())]
}

fn maybe<T, R: Rng>(rng: &mut R, f: impl FnOnce(&mut R) -> T) -> Option<T> {
    if rng.gen_bool(0.5) {
        Some(f(rng))
    } else {
        None
    }
}

fn random_slot<R: Rng>(rng: &mut R, ids: &[ProcessId], k: u32) -> Slot {
    let d = |rng: &mut R| maybe(rng, |r| r.gen_range(0..=2 * k));
    let id = |rng: &mut R| maybe(rng, |r| pick_id(r, ids));
    Slot {
        dist: d(rng),
        group_d: d(rng),
        merge_d: d(rng),
        stamp_d: d(rng),
        border: id(rng),
        far: id(rng),
        target: id(rng),
        stamp1: id(rng),
        stamp2: id(rng),
        groups: id(rng),
        merging: rng.gen(),
        stamp_on: rng.gen(),
        prior: rng.gen(),
        in_groups: id(rng),
        in_group_d: d(rng),
        in_stamp_on: rng.gen(),
        in_prior: rng.gen(),
        in_stamp1: id(rng),
        in_stamp2: id(rng),
        in_stamp_d: d(rng),
    }
}

/// Uniformly random values in every variable's range. Ids are drawn from the
/// real ids plus `fake`, so domains and arrays can name absent processes.
pub fn random_config<R: Rng>(graph: &Graph, k: u32, fake: &[ProcessId], rng: &mut R) -> Configuration<GState> {
    let mut ids: Vec<ProcessId> = graph.ids().to_vec();
    ids.extend_from_slice(fake);
    let n = graph.len() as u32;
    Configuration::from_fn(graph, |v| {
        let neighbors: Vec<ProcessId> = graph.neighbors(v).expect("vertex").into_iter().collect();
        let parent = match rng.gen_range(0..3) {
            0 => None,
            1 => Some(pick_id(rng, &neighbors)),
            _ => Some(pick_id(rng, &ids)),
        };
        let bfs = BfsVars {
            root: pick_id(rng, &ids),
            lvl: rng.gen_range(0..=n + 1),
            parent,
        };
        let domain_size = rng.gen_range(0..=ids.len());
        let mut keys = ids.clone();
        keys.shuffle(rng);
        let slots: BTreeMap<ProcessId, Slot> = keys[..domain_size]
            .iter()
            .map(|&u| (u, random_slot(rng, &ids, k)))
            .collect();
        LoopState {
            bfs,
            cl: Color::new(rng.gen_range(0..5)).expect("in range"),
            mode: if rng.gen() { Mode::A } else { Mode::P },
            rst: rng.gen(),
            base: GroupVars {
                height: rng.gen_range(0..=k / 2),
                init_group: pick_id(rng, &ids),
                group: pick_id(rng, &ids),
                in_group: pick_id(rng, &ids),
                slots,
            },
        }
    })
}
