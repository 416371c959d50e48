//! Immutable network topology and exact hop metrics.
//!
//! Processes are addressed two ways: by their [`ProcessId`] (what algorithms
//! see) and by a dense index into the sorted id list (what the engine uses to
//! store configurations). The two are interchangeable through [`Graph::index_of`]
//! and [`Graph::id_at`].

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Unique process identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct ProcessId(pub u32);

// JSON object keys arrive as strings once they pass through a flattened
// struct, so numeric strings are accepted as well.
impl<'de> Deserialize<'de> for ProcessId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct Visitor;

        impl serde::de::Visitor<'_> for Visitor {
            type Value = ProcessId;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a process id")
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<ProcessId, E> {
                u32::try_from(v).map(ProcessId).map_err(E::custom)
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<ProcessId, E> {
                u32::try_from(v).map(ProcessId).map_err(E::custom)
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<ProcessId, E> {
                v.parse().map(ProcessId).map_err(E::custom)
            }
        }

        d.deserialize_any(Visitor)
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for ProcessId {
    fn from(v: u32) -> Self {
        ProcessId(v)
    }
}

/// A hop count, or `Infinite` when no path exists.
///
/// Kept apart from the algorithms' null value: an unreachable pair is a
/// verdict about the topology, not an undefined variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "Option<u32>", into = "Option<u32>")]
pub enum Hops {
    Finite(u32),
    Infinite,
}

impl Hops {
    pub fn finite(self) -> Option<u32> {
        match self {
            Hops::Finite(d) => Some(d),
            Hops::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Hops::Finite(_))
    }
}

impl From<Option<u32>> for Hops {
    fn from(d: Option<u32>) -> Self {
        d.map_or(Hops::Infinite, Hops::Finite)
    }
}

impl From<Hops> for Option<u32> {
    fn from(h: Hops) -> Self {
        h.finite()
    }
}

impl fmt::Display for Hops {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hops::Finite(d) => write!(f, "{d}"),
            Hops::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown process {0}")]
    UnknownVertex(ProcessId),
    #[error("duplicate process id {0}")]
    DuplicateVertex(ProcessId),
    #[error("self-loop on {0}")]
    SelfLoop(ProcessId),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(ProcessId, ProcessId),
    #[error("edge endpoint {0} is not a vertex")]
    DanglingEdge(ProcessId),
    #[error("graph needs at least 2 processes, got {0}")]
    TooSmall(usize),
    #[error("graph is not connected")]
    Disconnected,
    #[error("empty vertex set")]
    EmptySet,
    #[error("malformed graph file: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Connected, simple, undirected graph. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    ids: Vec<ProcessId>,
    index: BTreeMap<ProcessId, usize>,
    adj: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    vertices: Vec<u32>,
    edges: Vec<[u32; 2]>,
}

impl Graph {
    /// Builds and validates a graph. Vertices and edges may come in any order.
    pub fn new(
        vertices: impl IntoIterator<Item = ProcessId>,
        edges: impl IntoIterator<Item = (ProcessId, ProcessId)>,
    ) -> Result<Self, GraphError> {
        let mut ids: Vec<ProcessId> = Vec::new();
        let mut seen = BTreeSet::new();
        for v in vertices {
            if !seen.insert(v) {
                return Err(GraphError::DuplicateVertex(v));
            }
            ids.push(v);
        }
        ids.sort();
        if ids.len() < 2 {
            return Err(GraphError::TooSmall(ids.len()));
        }
        let index: BTreeMap<ProcessId, usize> =
            ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut adj = vec![Vec::new(); ids.len()];
        let mut edge_set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            let ia = *index.get(&a).ok_or(GraphError::DanglingEdge(a))?;
            let ib = *index.get(&b).ok_or(GraphError::DanglingEdge(b))?;
            let key = (a.min(b), a.max(b));
            if !edge_set.insert(key) {
                return Err(GraphError::DuplicateEdge(key.0, key.1));
            }
            adj[ia].push(ib);
            adj[ib].push(ia);
        }
        // indices follow id order, so sorting indices sorts by id
        for list in &mut adj {
            list.sort_unstable();
        }
        let g = Graph { ids, index, adj };
        if !g.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(g)
    }

    /// Convenience constructor from raw integers.
    pub fn from_edges(vertices: &[u32], edges: &[(u32, u32)]) -> Result<Self, GraphError> {
        Graph::new(
            vertices.iter().map(|&v| ProcessId(v)),
            edges.iter().map(|&(a, b)| (ProcessId(a), ProcessId(b))),
        )
    }

    /// Parses the JSON form `{"vertices":[..], "edges":[[u,v],..]}`.
    pub fn from_json_str(text: &str) -> Result<Self, GraphError> {
        let file: GraphFile =
            serde_json::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))?;
        let edges: Vec<(u32, u32)> = file.edges.iter().map(|e| (e[0], e[1])).collect();
        Graph::from_edges(&file.vertices, &edges)
    }

    /// Parses the edge-list form: one `u v` pair per line, vertex set inferred.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn from_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut vertices = BTreeSet::new();
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(GraphError::Parse(format!(
                    "line {}: expected `u v`, got {line:?}",
                    lineno + 1
                )));
            }
            let parse = |s: &str| {
                s.parse::<u32>()
                    .map_err(|e| GraphError::Parse(format!("line {}: {e}", lineno + 1)))
            };
            let (a, b) = (parse(parts[0])?, parse(parts[1])?);
            vertices.insert(a);
            vertices.insert(b);
            edges.push((a, b));
        }
        let vertices: Vec<u32> = vertices.into_iter().collect();
        Graph::from_edges(&vertices, &edges)
    }

    /// Loads a graph file; `.json` files use the JSON form, anything else the
    /// edge-list form.
    pub fn load(path: &Path) -> Result<Self, GraphError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GraphError::Io(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            Graph::from_json_str(&text)
        } else {
            Graph::from_edge_list(&text)
        }
    }

    pub fn to_json(&self) -> String {
        let file = GraphFile {
            vertices: self.ids.iter().map(|v| v.0).collect(),
            edges: self.edges().map(|(a, b)| [a.0, b.0]).collect(),
        };
        serde_json::to_string(&file).expect("graph serializes")
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Process ids in ascending order.
    pub fn ids(&self) -> &[ProcessId] {
        &self.ids
    }

    pub fn contains(&self, v: ProcessId) -> bool {
        self.index.contains_key(&v)
    }

    pub fn index_of(&self, v: ProcessId) -> Option<usize> {
        self.index.get(&v).copied()
    }

    pub fn id_at(&self, i: usize) -> ProcessId {
        self.ids[i]
    }

    /// Neighbor indices of the process at index `i`, ascending by id.
    pub fn adj(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    /// Each undirected edge once, as `(smaller, larger)`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (ProcessId, ProcessId)> + '_ {
        self.adj.iter().enumerate().flat_map(move |(i, list)| {
            list.iter()
                .filter(move |&&j| j > i)
                .map(move |&j| (self.ids[i], self.ids[j]))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, a: ProcessId, b: ProcessId) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.adj[i].binary_search(&j).is_ok(),
            _ => false,
        }
    }

    fn require(&self, v: ProcessId) -> Result<usize, GraphError> {
        self.index_of(v).ok_or(GraphError::UnknownVertex(v))
    }

    pub fn neighbors(&self, v: ProcessId) -> Result<BTreeSet<ProcessId>, GraphError> {
        let i = self.require(v)?;
        Ok(self.adj[i].iter().map(|&j| self.ids[j]).collect())
    }

    /// BFS from index `src` restricted to indices where `allowed` holds.
    /// Unreached entries are `None`.
    fn bfs_from(&self, src: usize, allowed: impl Fn(usize) -> bool) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.len()];
        if !allowed(src) {
            return dist;
        }
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(x) = queue.pop_front() {
            let dx = dist[x].unwrap();
            for &y in &self.adj[x] {
                if dist[y].is_none() && allowed(y) {
                    dist[y] = Some(dx + 1);
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    fn is_connected(&self) -> bool {
        self.bfs_from(0, |_| true).iter().all(Option::is_some)
    }

    /// Hop distances from `v` to every process, indexed like [`Graph::ids`].
    pub fn distances_from(&self, v: ProcessId) -> Result<Vec<u32>, GraphError> {
        let i = self.require(v)?;
        Ok(self
            .bfs_from(i, |_| true)
            .into_iter()
            .map(|d| d.expect("graph is connected"))
            .collect())
    }

    pub fn dist(&self, u: ProcessId, v: ProcessId) -> Result<Hops, GraphError> {
        let iu = self.require(u)?;
        let iv = self.require(v)?;
        Ok(match self.bfs_from(iu, |_| true)[iv] {
            Some(d) => Hops::Finite(d),
            None => Hops::Infinite,
        })
    }

    /// Distance between `u` and `v` inside the subgraph induced by `set`.
    pub fn induced_dist(
        &self,
        set: &BTreeSet<ProcessId>,
        u: ProcessId,
        v: ProcessId,
    ) -> Result<Hops, GraphError> {
        let mask = self.mask(set)?;
        let iu = self.require(u)?;
        let iv = self.require(v)?;
        Ok(match self.bfs_from(iu, |x| mask[x])[iv] {
            Some(d) => Hops::Finite(d),
            None => Hops::Infinite,
        })
    }

    fn mask(&self, set: &BTreeSet<ProcessId>) -> Result<Vec<bool>, GraphError> {
        let mut mask = vec![false; self.len()];
        for &v in set {
            mask[self.require(v)?] = true;
        }
        Ok(mask)
    }

    /// Diameter of the subgraph induced by `set`; `Infinite` when it is
    /// disconnected.
    pub fn induced_diameter(&self, set: &BTreeSet<ProcessId>) -> Result<Hops, GraphError> {
        if set.is_empty() {
            return Err(GraphError::EmptySet);
        }
        let mask = self.mask(set)?;
        let members: Vec<usize> = (0..self.len()).filter(|&i| mask[i]).collect();
        let mut diameter = 0;
        for &s in &members {
            let dist = self.bfs_from(s, |x| mask[x]);
            for &t in &members {
                match dist[t] {
                    Some(d) => diameter = diameter.max(d),
                    None => return Ok(Hops::Infinite),
                }
            }
        }
        Ok(Hops::Finite(diameter))
    }

    /// Diameter of the whole graph.
    pub fn diameter(&self) -> u32 {
        (0..self.len())
            .map(|s| {
                self.bfs_from(s, |_| true)
                    .into_iter()
                    .map(|d| d.unwrap())
                    .max()
                    .unwrap()
            })
            .max()
            .unwrap_or(0)
    }

    /// The ball of radius `radius` around `v`, including `v`.
    pub fn k_neighborhood(
        &self,
        v: ProcessId,
        radius: u32,
    ) -> Result<BTreeSet<ProcessId>, GraphError> {
        let i = self.require(v)?;
        Ok(self
            .bfs_from(i, |_| true)
            .into_iter()
            .enumerate()
            .filter(|(_, d)| d.is_some_and(|d| d <= radius))
            .map(|(j, _)| self.ids[j])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: u32) -> Graph {
        let v: Vec<u32> = (1..=n).collect();
        let e: Vec<(u32, u32)> = (1..n).map(|i| (i, i + 1)).collect();
        Graph::from_edges(&v, &e).unwrap()
    }

    fn cycle(n: u32) -> Graph {
        let v: Vec<u32> = (1..=n).collect();
        let mut e: Vec<(u32, u32)> = (1..n).map(|i| (i, i + 1)).collect();
        e.push((n, 1));
        Graph::from_edges(&v, &e).unwrap()
    }

    fn set(ids: &[u32]) -> BTreeSet<ProcessId> {
        ids.iter().map(|&i| ProcessId(i)).collect()
    }

    #[test]
    fn neighbors_on_small_graphs() {
        assert_eq!(path(3).neighbors(ProcessId(2)).unwrap(), set(&[1, 3]));
        assert_eq!(path(3).neighbors(ProcessId(1)).unwrap(), set(&[2]));
        assert_eq!(cycle(4).neighbors(ProcessId(1)).unwrap(), set(&[2, 4]));
        assert_eq!(
            path(3).neighbors(ProcessId(9)),
            Err(GraphError::UnknownVertex(ProcessId(9)))
        );
    }

    #[test]
    fn distances() {
        let p4 = path(4);
        assert_eq!(p4.dist(ProcessId(1), ProcessId(4)).unwrap(), Hops::Finite(3));
        assert_eq!(p4.dist(ProcessId(2), ProcessId(2)).unwrap(), Hops::Finite(0));
        assert_eq!(cycle(6).dist(ProcessId(1), ProcessId(4)).unwrap(), Hops::Finite(3));
        assert!(p4.dist(ProcessId(0), ProcessId(1)).is_err());
    }

    #[test]
    fn induced_diameters() {
        let p5 = path(5);
        assert_eq!(p5.induced_diameter(&set(&[2, 3, 4])).unwrap(), Hops::Finite(2));
        assert_eq!(path(3).induced_diameter(&set(&[1, 3])).unwrap(), Hops::Infinite);
        assert_eq!(
            cycle(6).induced_diameter(&set(&[1, 2, 3, 4, 5, 6])).unwrap(),
            Hops::Finite(3)
        );
        assert_eq!(p5.induced_diameter(&set(&[])), Err(GraphError::EmptySet));
        assert_eq!(p5.induced_diameter(&set(&[4])).unwrap(), Hops::Finite(0));
    }

    #[test]
    fn neighborhoods() {
        let p4 = path(4);
        assert_eq!(p4.k_neighborhood(ProcessId(3), 0).unwrap(), set(&[3]));
        assert_eq!(p4.k_neighborhood(ProcessId(1), 2).unwrap(), set(&[1, 2, 3]));
        assert_eq!(
            cycle(6).k_neighborhood(ProcessId(1), 2).unwrap(),
            set(&[1, 2, 3, 5, 6])
        );
    }

    #[test]
    fn validation() {
        assert_eq!(
            Graph::from_edges(&[1, 2, 3], &[(1, 2)]),
            Err(GraphError::Disconnected)
        );
        assert_eq!(
            Graph::from_edges(&[1, 1], &[(1, 1)]),
            Err(GraphError::DuplicateVertex(ProcessId(1)))
        );
        assert_eq!(
            Graph::from_edges(&[1, 2], &[(1, 1)]),
            Err(GraphError::SelfLoop(ProcessId(1)))
        );
        assert_eq!(
            Graph::from_edges(&[1, 2], &[(1, 2), (2, 1)]),
            Err(GraphError::DuplicateEdge(ProcessId(1), ProcessId(2)))
        );
        assert_eq!(Graph::from_edges(&[1], &[]), Err(GraphError::TooSmall(1)));
        assert_eq!(
            Graph::from_edges(&[1, 2], &[(1, 3)]),
            Err(GraphError::DanglingEdge(ProcessId(3)))
        );
    }

    #[test]
    fn file_formats() {
        let g = Graph::from_json_str(r#"{"vertices":[3,1,2],"edges":[[1,2],[2,3]]}"#).unwrap();
        assert_eq!(g, path(3));
        assert_eq!(Graph::from_json_str(&g.to_json()).unwrap(), g);
        let h = Graph::from_edge_list("# path\n1 2\n\n2 3\n").unwrap();
        assert_eq!(h, g);
        assert!(matches!(Graph::from_edge_list("1 2 3"), Err(GraphError::Parse(_))));
        assert_eq!(Graph::from_edge_list("1 2\n3 4"), Err(GraphError::Disconnected));
    }
}
