//! Acyclic directed mixed graphs (ADMGs).
//!
//! An ADMG carries directed edges (`a -> b`, direct effects) and bidirected
//! edges (`a <-> b`, latent confounding). The directed part must be acyclic.
//! After validation every vertex is addressed by its position in a
//! topological order; names are only kept for I/O.
//!
//! The Markov pillow of a vertex `v` is `dis(v) ∪ pa(dis(v)) \ {v}`, computed
//! in the subgraph of vertices that precede `v`. It depends on the chosen
//! topological order, so every derived table is a function of the graph and
//! its [`TopoIndexing`].

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdmgError {
    #[error("directed cycle through vertex `{0}`")]
    CyclicGraph(String),
    #[error("edge references undeclared vertex `{0}`")]
    UnknownVertex(String),
    #[error("self-loop on vertex `{0}`")]
    SelfLoop(String),
    #[error("vertex `{0}` declared twice")]
    DuplicateVertex(String),
}

/// Graph file parse failure with a 1-based line number.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self { line, message: message.into() }
    }
}

/// A vertex-labeled mixed graph. Edge endpoints are indices into `vertices`
/// (declaration order).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Admg {
    vertices: Vec<String>,
    directed: BTreeSet<(usize, usize)>,
    bidirected: BTreeSet<(usize, usize)>,
}

impl Admg {
    pub fn new<S: Into<String>>(vertices: impl IntoIterator<Item = S>) -> Result<Self, AdmgError> {
        let vertices: Vec<String> = vertices.into_iter().map(Into::into).collect();
        let mut seen = BTreeSet::new();
        for v in &vertices {
            if !seen.insert(v.as_str()) {
                return Err(AdmgError::DuplicateVertex(v.clone()));
            }
        }
        Ok(Self { vertices, ..Default::default() })
    }

    /// Edgeless graph over `d` vertices named `1..=d`.
    pub fn with_numbered_vertices(d: usize) -> Self {
        Self {
            vertices: (1..=d).map(|i| i.to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex_id(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == name)
    }

    fn resolve(&self, name: &str) -> Result<usize, AdmgError> {
        self.vertex_id(name).ok_or_else(|| AdmgError::UnknownVertex(name.to_string()))
    }

    pub fn add_directed(&mut self, from: &str, to: &str) -> Result<(), AdmgError> {
        let (a, b) = (self.resolve(from)?, self.resolve(to)?);
        self.add_directed_ids(a, b)
    }

    pub fn add_bidirected(&mut self, a: &str, b: &str) -> Result<(), AdmgError> {
        let (a, b) = (self.resolve(a)?, self.resolve(b)?);
        self.add_bidirected_ids(a, b)
    }

    pub fn add_directed_ids(&mut self, from: usize, to: usize) -> Result<(), AdmgError> {
        self.check_ids(from, to)?;
        self.directed.insert((from, to));
        Ok(())
    }

    /// Bidirected edges are stored as `(min, max)`.
    pub fn add_bidirected_ids(&mut self, a: usize, b: usize) -> Result<(), AdmgError> {
        self.check_ids(a, b)?;
        self.bidirected.insert((a.min(b), a.max(b)));
        Ok(())
    }

    fn check_ids(&self, a: usize, b: usize) -> Result<(), AdmgError> {
        for id in [a, b] {
            if id >= self.vertices.len() {
                return Err(AdmgError::UnknownVertex(format!("#{id}")));
            }
        }
        if a == b {
            return Err(AdmgError::SelfLoop(self.vertices[a].clone()));
        }
        Ok(())
    }

    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.directed.iter().copied()
    }

    pub fn bidirected_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bidirected.iter().copied()
    }

    /// Topological indexing. Vertices are placed in declaration order, with
    /// any not-yet-placed ancestors hoisted in front of a vertex (depth-first
    /// over parents, again in declaration order). Deterministic.
    pub fn validate(&self) -> Result<TopoIndexing, AdmgError> {
        let d = self.vertices.len();
        let mut parents = vec![Vec::new(); d];
        for &(a, b) in &self.directed {
            parents[b].push(a);
        }
        for p in &mut parents {
            p.sort_unstable();
        }

        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let mut mark = vec![Mark::New; d];
        let mut order = Vec::with_capacity(d);
        // Explicit stack of (vertex, next parent slot) to avoid recursion depth limits.
        for root in 0..d {
            if mark[root] != Mark::New {
                continue;
            }
            let mut stack = vec![(root, 0usize)];
            mark[root] = Mark::Active;
            while let Some(&mut (v, ref mut next)) = stack.last_mut() {
                if let Some(&p) = parents[v].get(*next) {
                    *next += 1;
                    match mark[p] {
                        Mark::New => {
                            mark[p] = Mark::Active;
                            stack.push((p, 0));
                        }
                        Mark::Active => return Err(AdmgError::CyclicGraph(self.vertices[p].clone())),
                        Mark::Done => {}
                    }
                } else {
                    mark[v] = Mark::Done;
                    order.push(v);
                    stack.pop();
                }
            }
        }
        Ok(TopoIndexing::from_order(order))
    }

    /// Directed parents of every vertex, in topological positions.
    pub fn parents_by_position(&self, topo: &TopoIndexing) -> Vec<BTreeSet<usize>> {
        let mut out = vec![BTreeSet::new(); self.len()];
        for &(a, b) in &self.directed {
            out[topo.position(b)].insert(topo.position(a));
        }
        out
    }

    fn spouses_by_position(&self, topo: &TopoIndexing) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.len()];
        for &(a, b) in &self.bidirected {
            let (pa, pb) = (topo.position(a), topo.position(b));
            out[pa].push(pb);
            out[pb].push(pa);
        }
        out
    }

    /// District of the vertex at position `v` in the subgraph of positions `<= v`.
    pub fn district(&self, topo: &TopoIndexing, v: usize) -> BTreeSet<usize> {
        district_in_prefix(&self.spouses_by_position(topo), v)
    }

    pub fn markov_pillow(&self, topo: &TopoIndexing) -> MarkovPillowTable {
        let spouses = self.spouses_by_position(topo);
        let parents = self.parents_by_position(topo);
        let pillows = (0..self.len())
            .map(|v| {
                let dis = district_in_prefix(&spouses, v);
                let mut mp: BTreeSet<usize> = dis.iter().flat_map(|&u| parents[u].iter().copied()).collect();
                mp.extend(dis.iter().copied());
                mp.remove(&v);
                mp.into_iter().collect()
            })
            .collect();
        MarkovPillowTable { pillows }
    }

    /// Complete graph whose edges are all bidirected: the factorization
    /// degenerates to the chain rule.
    pub fn is_uninformative(&self) -> bool {
        let d = self.len();
        self.directed.is_empty() && self.bidirected.len() == d * d.saturating_sub(1) / 2
    }

    /// Parses the line-oriented graph format:
    ///
    /// ```text
    /// vertices: Y, X1, X2
    /// Y -> X1      # directed
    /// Y -> X2
    /// X1 <-> X2    # bidirected
    /// discrete: Y  # optional metadata
    /// ```
    pub fn parse(text: &str) -> Result<GraphFile, ParseError> {
        let mut graph: Option<Admg> = None;
        let mut discrete = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("vertices:") {
                if graph.is_some() {
                    return Err(ParseError::new(line_no, "duplicate `vertices:` header"));
                }
                let names = split_names(rest);
                if names.is_empty() {
                    return Err(ParseError::new(line_no, "empty vertex list"));
                }
                graph = Some(Admg::new(names).map_err(|e| ParseError::new(line_no, e.to_string()))?);
                continue;
            }
            let g = graph
                .as_mut()
                .ok_or_else(|| ParseError::new(line_no, "expected `vertices:` header before edges"))?;
            if let Some(rest) = line.strip_prefix("discrete:") {
                for name in split_names(rest) {
                    if g.vertex_id(&name).is_none() {
                        return Err(ParseError::new(line_no, format!("unknown vertex `{name}`")));
                    }
                    discrete.push(name);
                }
                continue;
            }
            let edge = parse_edge(line).ok_or_else(|| ParseError::new(line_no, format!("malformed edge `{line}`")))?;
            let result = match edge {
                EdgeLine::Directed(a, b) => g.add_directed(a, b),
                EdgeLine::Bidirected(a, b) => g.add_bidirected(a, b),
            };
            result.map_err(|e| ParseError::new(line_no, e.to_string()))?;
        }
        let graph = graph.ok_or_else(|| ParseError::new(1, "missing `vertices:` header"))?;
        Ok(GraphFile { graph, discrete })
    }
}

impl fmt::Display for Admg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "vertices: {}", self.vertices.join(", "))?;
        for &(a, b) in &self.directed {
            writeln!(f, "{} -> {}", self.vertices[a], self.vertices[b])?;
        }
        for &(a, b) in &self.bidirected {
            writeln!(f, "{} <-> {}", self.vertices[a], self.vertices[b])?;
        }
        Ok(())
    }
}

/// Parsed graph file: the graph plus optional `discrete:` metadata.
#[derive(Debug, Clone)]
pub struct GraphFile {
    pub graph: Admg,
    pub discrete: Vec<String>,
}

pub(crate) enum EdgeLine<'a> {
    Directed(&'a str, &'a str),
    Bidirected(&'a str, &'a str),
}

pub(crate) fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("")
}

pub(crate) fn split_names(list: &str) -> Vec<String> {
    list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn is_name(s: &str) -> bool {
    !s.is_empty() && !s.contains(char::is_whitespace) && !s.contains(['<', '>', '-', '=', ',', ':'])
}

pub(crate) fn parse_edge(line: &str) -> Option<EdgeLine<'_>> {
    // `<->` must be tried first: it contains `->`.
    if let Some((a, b)) = line.split_once("<->") {
        let (a, b) = (a.trim(), b.trim());
        return (is_name(a) && is_name(b)).then_some(EdgeLine::Bidirected(a, b));
    }
    if let Some((a, b)) = line.split_once("->") {
        let (a, b) = (a.trim(), b.trim());
        return (is_name(a) && is_name(b)).then_some(EdgeLine::Directed(a, b));
    }
    None
}

fn district_in_prefix(spouses: &[Vec<usize>], v: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([v]);
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        for &w in &spouses[u] {
            if w <= v && seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen
}

/// Bijection between declaration ids and topological positions `0..D`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopoIndexing {
    order: Vec<usize>,
    position: Vec<usize>,
}

impl TopoIndexing {
    fn from_order(order: Vec<usize>) -> Self {
        let mut position = vec![0; order.len()];
        for (pos, &v) in order.iter().enumerate() {
            position[v] = pos;
        }
        Self { order, position }
    }

    /// Declaration ids listed in topological order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn position(&self, vertex: usize) -> usize {
        self.position[vertex]
    }

    pub fn vertex_at(&self, position: usize) -> usize {
        self.order[position]
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// `pillows[j]` holds the sorted Markov pillow of position `j`; every entry is `< j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkovPillowTable {
    pillows: Vec<Vec<usize>>,
}

impl MarkovPillowTable {
    pub fn get(&self, position: usize) -> &[usize] {
        &self.pillows[position]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.pillows.iter().map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.pillows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pillows.is_empty()
    }
}

/// Maps vertex names onto column indices of some table.
pub fn name_index<'a>(names: impl IntoIterator<Item = &'a String>) -> HashMap<&'a str, usize> {
    names.into_iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn graph(d: usize, directed: &[(usize, usize)], bidirected: &[(usize, usize)]) -> Admg {
        // 1-based ids as in the examples
        let mut g = Admg::with_numbered_vertices(d);
        for &(a, b) in directed {
            g.add_directed_ids(a - 1, b - 1).unwrap();
        }
        for &(a, b) in bidirected {
            g.add_bidirected_ids(a - 1, b - 1).unwrap();
        }
        g
    }

    fn set(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    #[test]
    fn chain_is_already_ordered() {
        let g = graph(3, &[(1, 2), (2, 3)], &[]);
        assert_eq!(g.validate().unwrap().order(), &[0, 1, 2]);
    }

    #[test]
    fn ancestors_are_hoisted_in_front() {
        let g = graph(3, &[(3, 1)], &[]);
        assert_eq!(g.validate().unwrap().order(), &[2, 0, 1]);
    }

    #[test]
    fn two_cycle_is_rejected() {
        let g = graph(2, &[(1, 2), (2, 1)], &[]);
        assert!(matches!(g.validate(), Err(AdmgError::CyclicGraph(_))));
    }

    #[test]
    fn self_loops_and_unknown_vertices_are_rejected() {
        let mut g = Admg::with_numbered_vertices(2);
        assert_eq!(g.add_directed("1", "1"), Err(AdmgError::SelfLoop("1".into())));
        assert_eq!(g.add_bidirected("1", "9"), Err(AdmgError::UnknownVertex("9".into())));
    }

    #[test]
    fn districts() {
        let g = graph(4, &[], &[]);
        let t = g.validate().unwrap();
        assert_eq!(g.district(&t, 2), set(&[2]));

        let g = graph(3, &[], &[(2, 3)]);
        let t = g.validate().unwrap();
        assert_eq!(g.district(&t, 2), set(&[1, 2]));

        let g = graph(4, &[], &[(1, 2), (2, 4)]);
        let t = g.validate().unwrap();
        assert_eq!(g.district(&t, 3), set(&[0, 1, 3]));
        // restricted to the prefix: position 1 cannot see position 3
        assert_eq!(g.district(&t, 1), set(&[0, 1]));
    }

    #[test]
    fn markov_pillows() {
        let g = graph(3, &[(1, 2), (2, 3)], &[]);
        let mp = g.markov_pillow(&g.validate().unwrap());
        assert_eq!(mp.get(0), &[] as &[usize]);
        assert_eq!(mp.get(1), &[0]);
        assert_eq!(mp.get(2), &[1]);

        let g = graph(4, &[], &[]);
        let mp = g.markov_pillow(&g.validate().unwrap());
        assert!(mp.iter().all(<[usize]>::is_empty));

        let g = graph(3, &[(1, 2)], &[(2, 3)]);
        let mp = g.markov_pillow(&g.validate().unwrap());
        assert_eq!(mp.get(2), &[0, 1]);
    }

    #[test]
    fn uninformative_graphs() {
        let g = graph(3, &[], &[(1, 2), (1, 3), (2, 3)]);
        assert!(g.is_uninformative());
        let mp = g.markov_pillow(&g.validate().unwrap());
        assert_eq!(mp.get(2), &[0, 1]);
        assert!(!graph(3, &[(1, 2), (2, 3)], &[]).is_uninformative());
        assert!(graph(1, &[], &[]).is_uninformative());
    }

    #[test]
    fn parses_graph_text() {
        let text = "# fig 1\nvertices: Y, X1, X2\n\nY -> X1\nY  ->  X2 # comment\nX1 <-> X2\ndiscrete: Y\n";
        let file = Admg::parse(text).unwrap();
        assert_eq!(file.graph.vertices(), &["Y", "X1", "X2"]);
        assert_eq!(file.graph.directed_edges().count(), 2);
        assert_eq!(file.graph.bidirected_edges().collect::<Vec<_>>(), vec![(1, 2)]);
        assert_eq!(file.discrete, vec!["Y".to_string()]);
        let again = Admg::parse(&file.graph.to_string()).unwrap();
        assert_eq!(again.graph, file.graph);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = Admg::parse("vertices: a, b\na -> b\na => b\n").unwrap_err();
        assert_eq!(err.line, 3);
        let err = Admg::parse("vertices: a, b\n\na -> c\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("`c`"));
        let err = Admg::parse("a -> b\n").unwrap_err();
        assert_eq!(err.line, 1);
        let err = Admg::parse("vertices: a, a\n").unwrap_err();
        assert_eq!(err.line, 1);
    }

    /// Random ADMG whose directed part respects a hidden random order.
    pub(crate) fn arb_admg(max_d: usize) -> impl Strategy<Value = Admg> {
        (1..=max_d)
            .prop_flat_map(|d| {
                let pairs = d * (d - 1) / 2;
                (
                    Just(d),
                    Just(()).prop_perturb(move |_, mut rng| {
                        let mut perm: Vec<usize> = (0..d).collect();
                        for i in (1..d).rev() {
                            perm.swap(i, rng.random_range(0..=i));
                        }
                        perm
                    }),
                    proptest::collection::vec(0u8..4, pairs),
                )
            })
            .prop_map(|(d, perm, kinds)| {
                let mut g = Admg::with_numbered_vertices(d);
                let mut k = 0;
                for i in 0..d {
                    for j in i + 1..d {
                        let (a, b) = (perm[i], perm[j]);
                        match kinds[k] {
                            1 => g.add_directed_ids(a, b).unwrap(),
                            2 => g.add_bidirected_ids(a, b).unwrap(),
                            3 => {
                                g.add_directed_ids(a, b).unwrap();
                                g.add_bidirected_ids(a, b).unwrap();
                            }
                            _ => {}
                        }
                        k += 1;
                    }
                }
                g
            })
    }

    proptest! {
        #[test]
        fn pillows_precede_their_vertex(g in arb_admg(7)) {
            let topo = g.validate().unwrap();
            for (a, b) in g.directed_edges() {
                prop_assert!(topo.position(a) < topo.position(b));
            }
            let mp = g.markov_pillow(&topo);
            for (j, pillow) in mp.iter().enumerate() {
                prop_assert!(pillow.iter().all(|&p| p < j));
                prop_assert!(pillow.windows(2).all(|w| w[0] < w[1]));
            }
        }

        #[test]
        fn validation_is_deterministic(g in arb_admg(7)) {
            prop_assert_eq!(g.validate().unwrap(), g.clone().validate().unwrap());
        }

        #[test]
        fn district_contains_v_and_grows_with_bidirected_edges(g in arb_admg(6), extra in (0usize..6, 0usize..6)) {
            let topo = g.validate().unwrap();
            let d = g.len();
            let (a, b) = (extra.0 % d, extra.1 % d);
            for v in 0..d {
                let before = g.district(&topo, v);
                prop_assert!(before.contains(&v));
                let (pa, pb) = (topo.position(a), topo.position(b));
                if a != b && pa <= v && pb <= v {
                    let mut h = g.clone();
                    h.add_bidirected_ids(a, b).unwrap();
                    let topo_h = h.validate().unwrap();
                    prop_assert_eq!(&topo_h, &topo);
                    prop_assert!(before.is_subset(&h.district(&topo_h, v)));
                }
            }
        }
    }
}
