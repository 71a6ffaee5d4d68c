//! Undirected simple contact graphs.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dist::DegreeDistribution;
use crate::error::{param, Error, Result};

pub const MAX_PARITY_RESAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeType {
    Close,
    Normal,
    Untyped,
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeType::Close => "close",
            EdgeType::Normal => "normal",
            EdgeType::Untyped => "untyped",
        })
    }
}

/// Simple undirected graph on nodes `0..n`.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted lexicographically;
/// an edge's position in that list is its id.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactGraph {
    adj: Vec<Vec<usize>>,
    adj_edge: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    types: Vec<EdgeType>,
}

/// Counts of input edges discarded while building a simple graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Dropped {
    pub duplicates: usize,
    pub self_loops: usize,
}

impl ContactGraph {
    /// Builds a simple graph, discarding self-loops and repeated edges.
    pub fn from_edges(n: usize, input: impl IntoIterator<Item = (usize, usize)>) -> Result<(Self, Dropped)> {
        let mut dropped = Dropped::default();
        let mut edges = Vec::new();
        for (u, v) in input {
            if u >= n || v >= n {
                return Err(param(format!("edge ({u}, {v}) references a node outside 0..{n}")));
            }
            if u == v {
                dropped.self_loops += 1;
            } else {
                edges.push((u.min(v), u.max(v)));
            }
        }
        let before = edges.len();
        edges.sort_unstable();
        edges.dedup();
        dropped.duplicates = before - edges.len();

        let mut adj = vec![Vec::new(); n];
        let mut adj_edge = vec![Vec::new(); n];
        for (id, &(u, v)) in edges.iter().enumerate() {
            adj[u].push(v);
            adj_edge[u].push(id);
            adj[v].push(u);
            adj_edge[v].push(id);
        }
        for (nb, ids) in adj.iter_mut().zip(adj_edge.iter_mut()) {
            let mut pairs: Vec<_> = nb.iter().copied().zip(ids.iter().copied()).collect();
            pairs.sort_unstable();
            (*nb, *ids) = pairs.into_iter().unzip();
        }
        let types = vec![EdgeType::Untyped; edges.len()];
        Ok((
            Self {
                adj,
                adj_edge,
                edges,
                types,
            },
            dropped,
        ))
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adj[u].len()
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adj[u]
    }

    /// Edge ids parallel to [`neighbors`](Self::neighbors).
    pub fn incident_edges(&self, u: usize) -> &[usize] {
        &self.adj_edge[u]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_type(&self, id: usize) -> EdgeType {
        self.types[id]
    }

    pub fn edge_types(&self) -> &[EdgeType] {
        &self.types
    }

    pub fn edge_id(&self, u: usize, v: usize) -> Option<usize> {
        if u >= self.n() || v >= self.n() {
            return None;
        }
        self.adj[u].binary_search(&v).ok().map(|i| self.adj_edge[u][i])
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edge_id(u, v).is_some()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }
}

/// Result of reading an edge-list file.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: ContactGraph,
    pub dropped: Dropped,
    /// Original label of each node, indexed by its new id.
    pub labels: Vec<i64>,
}

pub fn load_edge_list(path: &Path) -> Result<ContactGraph> {
    Ok(load_edge_list_with_labels(path)?.graph)
}

pub fn load_edge_list_with_labels(path: &Path) -> Result<LoadedGraph> {
    let text = fs::read_to_string(path)?;
    let mut ids: HashMap<i64, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut raw = Vec::new();
    let mut intern = |label: i64| {
        *ids.entry(label).or_insert_with(|| {
            labels.push(label);
            labels.len() - 1
        })
    };
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let mut fields = line.split_whitespace();
        let mut next = || -> Result<i64> {
            let tok = fields
                .next()
                .ok_or_else(|| parse_err(format!("expected two node ids, got {line:?}")))?;
            tok.parse::<i64>()
                .map_err(|e| parse_err(format!("bad node id {tok:?}: {e}")))
        };
        let (a, b) = (next()?, next()?);
        raw.push((intern(a), intern(b)));
    }
    if raw.is_empty() {
        return Err(Error::EmptyInput(path.to_path_buf()));
    }
    let (graph, dropped) = ContactGraph::from_edges(labels.len(), raw)?;
    if dropped.duplicates > 0 || dropped.self_loops > 0 {
        warn!(
            "{}: dropped {} duplicate edge(s) and {} self-loop(s)",
            path.display(),
            dropped.duplicates,
            dropped.self_loops
        );
    }
    Ok(LoadedGraph { graph, dropped, labels })
}

/// Writes `new_id original_label` lines.
pub fn write_id_map(path: &Path, labels: &[i64]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "# node_id original_label")?;
    for (i, l) in labels.iter().enumerate() {
        writeln!(out, "{i} {l}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_edge_list(path: &Path, g: &ContactGraph) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "# n={} m={}", g.n(), g.m())?;
    for (u, v) in g.edges() {
        writeln!(out, "{u} {v}")?;
    }
    out.flush()?;
    Ok(())
}

fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// `|N(u) ∩ N(v)| / |N(u) ∪ N(v) \ {u, v}|`, with `0/0 = 0`.
pub fn neighborhood_overlap(g: &ContactGraph, u: usize, v: usize) -> Result<f64> {
    if !g.has_edge(u, v) {
        return Err(param(format!("({u}, {v}) is not an edge")));
    }
    let common = sorted_intersection_len(g.neighbors(u), g.neighbors(v));
    // the union contains u and v themselves since they are adjacent
    let union = g.degree(u) + g.degree(v) - common - 2;
    Ok(if union == 0 { 0.0 } else { common as f64 / union as f64 })
}

/// Tags each edge close when its overlap is at least `h_overlap`, normal otherwise.
pub fn classify_edges(g: &ContactGraph, h_overlap: f64) -> Result<ContactGraph> {
    if !(0.0..=1.0).contains(&h_overlap) {
        return Err(param(format!("h_overlap = {h_overlap} must lie in [0, 1]")));
    }
    let mut out = g.clone();
    for (id, &(u, v)) in g.edges.iter().enumerate() {
        out.types[id] = if neighborhood_overlap(g, u, v)? >= h_overlap {
            EdgeType::Close
        } else {
            EdgeType::Normal
        };
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkStats {
    pub n: usize,
    pub m: usize,
    pub k0: f64,
    /// Degree assortativity; NaN when the degree variance over edges is zero.
    pub rho: f64,
    /// Global transitivity.
    pub c: f64,
    /// Mean of local clustering coefficients, nodes of degree below 2 contributing 0.
    pub c_local: f64,
}

pub fn graph_stats(g: &ContactGraph) -> NetworkStats {
    let n = g.n();
    let m = g.m();
    let mut closed = 0usize;
    let mut triples = 0usize;
    let mut local_sum = 0.0;
    for u in 0..n {
        let nb = g.neighbors(u);
        let d = nb.len();
        if d < 2 {
            continue;
        }
        let t: usize = nb.iter().map(|&v| sorted_intersection_len(nb, g.neighbors(v))).sum::<usize>() / 2;
        let pairs = d * (d - 1) / 2;
        closed += t;
        triples += pairs;
        local_sum += t as f64 / pairs as f64;
    }
    let c = if triples == 0 { 0.0 } else { closed as f64 / triples as f64 };
    let c_local = if n == 0 { 0.0 } else { local_sum / n as f64 };

    let deg = g.degrees();
    let rho = if m == 0 {
        f64::NAN
    } else {
        // both orientations: the x and y marginals coincide
        let count = 2.0 * m as f64;
        let (mut sx, mut sxx, mut sxy) = (0.0, 0.0, 0.0);
        for &(u, v) in g.edges() {
            let (a, b) = (deg[u] as f64, deg[v] as f64);
            sx += a + b;
            sxx += a * a + b * b;
            sxy += 2.0 * a * b;
        }
        let mean = sx / count;
        let var = sxx / count - mean * mean;
        let cov = sxy / count - mean * mean;
        if var <= 1e-12 * mean * mean {
            f64::NAN
        } else {
            (cov / var).clamp(-1.0, 1.0)
        }
    };
    NetworkStats {
        n,
        m,
        k0: if n == 0 { 0.0 } else { 2.0 * m as f64 / n as f64 },
        rho,
        c,
        c_local,
    }
}

/// Samples a configuration-model graph with i.i.d. degrees drawn from `deg`.
pub fn configuration_model(deg: &DegreeDistribution, n: usize, seed: u64) -> Result<ContactGraph> {
    if n < 2 {
        return Err(param(format!("n = {n} must be at least 2")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = WeightedIndex::new(deg.pmf()).map_err(|e| Error::Generation(e.to_string()))?;
    let mut degrees: Vec<usize> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
    let mut total: usize = degrees.iter().sum();
    let mut attempts = 0;
    while total % 2 == 1 {
        if attempts == MAX_PARITY_RESAMPLES {
            return Err(Error::Generation(format!(
                "stub total stayed odd after {MAX_PARITY_RESAMPLES} resamples of the last degree"
            )));
        }
        total -= degrees[n - 1];
        degrees[n - 1] = sampler.sample(&mut rng);
        total += degrees[n - 1];
        attempts += 1;
    }
    let mut stubs: Vec<usize> = degrees
        .iter()
        .enumerate()
        .flat_map(|(u, &d)| std::iter::repeat_n(u, d))
        .collect();
    stubs.shuffle(&mut rng);
    let pairs = stubs.chunks_exact(2).map(|p| (p[0], p[1]));
    let (g, dropped) = ContactGraph::from_edges(n, pairs)?;
    log::debug!(
        "configuration model: erased {} self-loop(s) and {} multi-edge(s)",
        dropped.self_loops,
        dropped.duplicates
    );
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{make_poisson, DistKind};

    fn graph(n: usize, e: &[(usize, usize)]) -> ContactGraph {
        ContactGraph::from_edges(n, e.iter().copied()).unwrap().0
    }

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_path_graph() {
        let f = file("0 1\n1 2");
        let g = load_edge_list(f.path()).unwrap();
        assert_eq!((g.n(), g.m()), (3, 2));
    }

    #[test]
    fn load_drops_duplicates_and_loops() {
        let f = file("# comment\n% other\n0 1\n1 0\n2 2\n");
        let l = load_edge_list_with_labels(f.path()).unwrap();
        assert_eq!((l.graph.n(), l.graph.m()), (3, 1));
        assert_eq!(l.dropped, Dropped { duplicates: 1, self_loops: 1 });
    }

    #[test]
    fn load_remaps_in_first_appearance_order() {
        let f = file("10 7\n7 3\n");
        let l = load_edge_list_with_labels(f.path()).unwrap();
        assert_eq!(l.labels, vec![10, 7, 3]);
        assert!(l.graph.has_edge(0, 1) && l.graph.has_edge(1, 2));
        let out = tempfile::NamedTempFile::new().unwrap();
        write_id_map(out.path(), &l.labels).unwrap();
        let text = fs::read_to_string(out.path()).unwrap();
        assert!(text.contains("2 3\n"));
    }

    #[test]
    fn load_errors() {
        let f = file("0 1\n1 x\n");
        match load_edge_list(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            r => panic!("{r:?}"),
        }
        let f = file("0 1\n5\n");
        assert!(matches!(load_edge_list(f.path()), Err(Error::Parse { line: 2, .. })));
        let f = file("# nothing\n\n");
        assert!(matches!(load_edge_list(f.path()), Err(Error::EmptyInput(_))));
        assert!(matches!(load_edge_list(Path::new("/nonexistent/edges.txt")), Err(Error::Io(_))));
    }

    #[test]
    fn edge_list_roundtrip() {
        let g = graph(5, &[(0, 1), (1, 2), (3, 4), (0, 4)]);
        let out = tempfile::NamedTempFile::new().unwrap();
        write_edge_list(out.path(), &g).unwrap();
        let h = load_edge_list(out.path()).unwrap();
        assert_eq!(h.m(), 4);
        assert_eq!(graph_stats(&h).k0, graph_stats(&g).k0);
    }

    #[test]
    fn overlap_cases() {
        let tri = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(neighborhood_overlap(&tri, 0, 1).unwrap(), 1.0);
        let path = graph(3, &[(0, 1), (1, 2)]);
        assert_eq!(neighborhood_overlap(&path, 0, 1).unwrap(), 0.0);
        let single = graph(2, &[(0, 1)]);
        assert_eq!(neighborhood_overlap(&single, 0, 1).unwrap(), 0.0);
        assert!(neighborhood_overlap(&path, 0, 2).is_err());
        // K4 minus an edge: (0,1) shares {2,3}
        let g = graph(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]);
        assert_eq!(neighborhood_overlap(&g, 0, 1).unwrap(), 1.0);
        assert_eq!(neighborhood_overlap(&g, 0, 2).unwrap(), 1.0 / 2.0);
    }

    #[test]
    fn classification_cases() {
        let path = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        let all_close = classify_edges(&path, 0.0).unwrap();
        assert!(all_close.edge_types().iter().all(|&t| t == EdgeType::Close));
        let normal = classify_edges(&path, 1.0).unwrap();
        assert!(normal.edge_types().iter().all(|&t| t == EdgeType::Normal));
        let tri = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        let c = classify_edges(&tri, 0.75).unwrap();
        assert!(c.edge_types().iter().all(|&t| t == EdgeType::Close));
        assert!(classify_edges(&tri, 1.5).is_err());
        assert!(path.edge_types().iter().all(|&t| t == EdgeType::Untyped));
    }

    #[test]
    fn stats_small_graphs() {
        let tri = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        let s = graph_stats(&tri);
        assert_eq!((s.c, s.k0, s.c_local), (1.0, 2.0, 1.0));
        assert!(s.rho.is_nan());
        let star = graph(4, &[(0, 1), (0, 2), (0, 3)]);
        let s = graph_stats(&star);
        assert_eq!((s.c, s.k0), (0.0, 1.5));
        assert!((s.rho + 1.0).abs() < 1e-12);
        let empty = graph(3, &[]);
        let s = graph_stats(&empty);
        assert_eq!((s.m, s.k0, s.c), (0, 0.0, 0.0));
        assert!(s.rho.is_nan());
    }

    #[test]
    fn configuration_model_point_masses() {
        let zero = DegreeDistribution::from_weights(vec![1.0, 0.0], DistKind::Degree, "delta0").unwrap();
        let g = configuration_model(&zero, 10, 1).unwrap();
        assert_eq!((g.n(), g.m()), (10, 0));
        let one = DegreeDistribution::from_weights(vec![0.0, 1.0], DistKind::Degree, "delta1").unwrap();
        let g = configuration_model(&one, 10, 1).unwrap();
        assert_eq!(g.m(), 5);
        assert!(g.degrees().iter().all(|&d| d == 1));
        assert!(matches!(configuration_model(&one, 11, 1), Err(Error::Generation(_))));
        assert!(configuration_model(&one, 1, 1).is_err());
    }

    #[test]
    fn configuration_model_is_deterministic() {
        let d = make_poisson(5.0, 60).unwrap();
        let a = configuration_model(&d, 500, 42).unwrap();
        let b = configuration_model(&d, 500, 42).unwrap();
        let c = configuration_model(&d, 500, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn adjacency_sorted_with_edge_ids() {
        let g = graph(5, &[(3, 0), (0, 1), (4, 0), (2, 0)]);
        assert_eq!(g.neighbors(0), &[1, 2, 3, 4]);
        for (&v, &id) in g.neighbors(0).iter().zip(g.incident_edges(0)) {
            assert_eq!(g.edges()[id], (0, v));
        }
        assert_eq!(g.edge_id(3, 0), g.edge_id(0, 3));
        assert_eq!(g.edge_id(1, 2), None);
    }
}
