//! Graphs, orientations and the combinatorial operations the rest of the
//! toolkit is built on.
//!
//! Vertices are numbered 1..=n in the public interface. Undirected edges are
//! kept in canonical order: each pair stored as (min, max), the list sorted
//! lexicographically. An [`Orientation`] assigns one direction to every edge
//! of an undirected graph, indexed against that canonical order.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Default vertex bound for chromatic polynomial evaluation.
pub const CHROMATIC_VERTEX_BOUND: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("vertex count must be at least 1")]
    Empty,
    #[error("edge ({i}, {j}) is invalid for a graph on vertices 1..={n}")]
    InvalidEdge { i: usize, j: usize, n: usize },
    #[error("graph is not connected")]
    NotConnected,
    #[error("size {actual} exceeds the configured bound {limit}")]
    TooLarge { actual: usize, limit: usize },
    #[error("integer overflow while evaluating the chromatic polynomial")]
    Overflow,
    #[error("orientation must assign a direction to each of the {edges} edges, got {got}")]
    DirectionCount { edges: usize, got: usize },
}

/// Simple undirected graph on vertices 1..=n.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct UndirectedGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<GraphJson> for UndirectedGraph {
    type Error = GraphError;
    fn try_from(j: GraphJson) -> Result<Self, GraphError> {
        UndirectedGraph::new(j.n, &j.edges)
    }
}

impl From<UndirectedGraph> for GraphJson {
    fn from(g: UndirectedGraph) -> Self {
        GraphJson { n: g.n, edges: g.edges }
    }
}

impl UndirectedGraph {
    /// Build a graph from 1-based endpoint pairs. Pairs are normalised to
    /// (min, max), sorted and deduplicated; self-loops are rejected.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut canon = Vec::with_capacity(edges.len());
        for &(i, j) in edges {
            if i == j || i == 0 || j == 0 || i > n || j > n {
                return Err(GraphError::InvalidEdge { i, j, n });
            }
            canon.push((i.min(j), i.max(j)));
        }
        canon.sort_unstable();
        canon.dedup();
        Ok(Self { n, edges: canon })
    }

    /// Complete graph K_n.
    pub fn complete(n: usize) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        for i in 1..=n {
            for j in (i + 1)..=n {
                edges.push((i, j));
            }
        }
        Self::new(n, &edges)
    }

    /// Cycle graph C_n (requires n >= 3).
    pub fn cycle(n: usize) -> Result<Self, GraphError> {
        if n < 3 {
            return Err(GraphError::InvalidEdge { i: n, j: 1, n });
        }
        let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (i, i + 1)).collect();
        edges.push((n, 1));
        Self::new(n, &edges)
    }

    /// Path graph on n vertices.
    pub fn path(n: usize) -> Result<Self, GraphError> {
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (i, i + 1)).collect();
        Self::new(n, &edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges in canonical (min, max) lexicographic order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn contains_edge(&self, i: usize, j: usize) -> bool {
        let e = (i.min(j), i.max(j));
        self.edges.binary_search(&e).is_ok()
    }

    /// Position of the edge in canonical order, if present.
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let e = (i.min(j), i.max(j));
        self.edges.binary_search(&e).ok()
    }

    /// 0-based adjacency lists, ascending.
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i - 1].push(j - 1);
            adj[j - 1].push(i - 1);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    /// 1-based neighbours of `v`, ascending.
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for &(i, j) in &self.edges {
            if i == v {
                out.push(j);
            } else if j == v {
                out.push(i);
            }
        }
        out.sort_unstable();
        out
    }
}

/// Simple directed graph on vertices 1..=n (no self-loops, arcs deduplicated).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    arcs: Vec<(usize, usize)>,
}

impl DirectedGraph {
    pub fn new(n: usize, arcs: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut list = Vec::with_capacity(arcs.len());
        for &(i, j) in arcs {
            if i == j || i == 0 || j == 0 || i > n || j > n {
                return Err(GraphError::InvalidEdge { i, j, n });
            }
            list.push((i, j));
        }
        list.sort_unstable();
        list.dedup();
        Ok(Self { n, arcs: list })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    fn out_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.arcs {
            adj[i - 1].push(j - 1);
        }
        adj
    }
}

/// One direction per edge of an undirected graph. Bit k refers to edge k in
/// canonical order; `false` orients it from the smaller to the larger vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Orientation {
    graph: UndirectedGraph,
    directions: Vec<bool>,
}

impl Orientation {
    pub fn new(graph: UndirectedGraph, directions: Vec<bool>) -> Result<Self, GraphError> {
        if directions.len() != graph.edge_count() {
            return Err(GraphError::DirectionCount {
                edges: graph.edge_count(),
                got: directions.len(),
            });
        }
        Ok(Self { graph, directions })
    }

    /// Orientation encoded by the low bits of `mask` (bit k set reverses
    /// edge k).
    pub fn from_bitmask(graph: UndirectedGraph, mask: u64) -> Result<Self, GraphError> {
        let m = graph.edge_count();
        if m > 63 {
            return Err(GraphError::TooLarge { actual: m, limit: 63 });
        }
        let directions = (0..m).map(|k| mask >> k & 1 == 1).collect();
        Self::new(graph, directions)
    }

    pub fn graph(&self) -> &UndirectedGraph {
        &self.graph
    }

    pub fn directions(&self) -> &[bool] {
        &self.directions
    }

    pub fn bitmask(&self) -> u64 {
        self.directions
            .iter()
            .enumerate()
            .fold(0u64, |acc, (k, &d)| acc | (d as u64) << k)
    }

    /// Arcs as (tail, head) pairs, in canonical edge order.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        self.graph
            .edges
            .iter()
            .zip(&self.directions)
            .map(|(&(i, j), &rev)| if rev { (j, i) } else { (i, j) })
            .collect()
    }

    /// In-degree and out-degree of `v`.
    pub fn degrees(&self, v: usize) -> (usize, usize) {
        let mut indeg = 0;
        let mut outdeg = 0;
        for (tail, head) in self.arcs() {
            if tail == v {
                outdeg += 1;
            } else if head == v {
                indeg += 1;
            }
        }
        (indeg, outdeg)
    }

    pub fn reverse_edge(&mut self, edge_index: usize) {
        self.directions[edge_index] = !self.directions[edge_index];
    }
}

/// Connected components as a partition of 1..=n; blocks are ascending and
/// ordered by their smallest member.
pub fn connected_components(g: &UndirectedGraph) -> Vec<Vec<usize>> {
    let adj = g.adjacency();
    let mut seen = vec![false; g.n];
    let mut blocks = Vec::new();
    for start in 0..g.n {
        if seen[start] {
            continue;
        }
        let mut block = Vec::new();
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            block.push(v + 1);
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        block.sort_unstable();
        blocks.push(block);
    }
    blocks
}

/// BFS spanning tree rooted at vertex 1, as canonical edge pairs.
pub fn spanning_tree(g: &UndirectedGraph) -> Result<Vec<(usize, usize)>, GraphError> {
    let adj = g.adjacency();
    let mut seen = vec![false; g.n];
    let mut tree = Vec::new();
    let mut queue = std::collections::VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                tree.push((v.min(w) + 1, v.max(w) + 1));
                queue.push_back(w);
            }
        }
    }
    if seen.iter().any(|&s| !s) {
        return Err(GraphError::NotConnected);
    }
    tree.sort_unstable();
    Ok(tree)
}

/// Strongly connected components by Tarjan's algorithm; blocks ascending,
/// ordered by smallest member.
pub fn strongly_connected_components(d: &DirectedGraph) -> Vec<Vec<usize>> {
    struct State {
        index: Vec<Option<usize>>,
        lowlink: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        comps: Vec<Vec<usize>>,
    }

    fn strongconnect(v: usize, adj: &[Vec<usize>], st: &mut State) {
        st.index[v] = Some(st.next);
        st.lowlink[v] = st.next;
        st.next += 1;
        st.stack.push(v);
        st.on_stack[v] = true;
        for &w in &adj[v] {
            match st.index[w] {
                None => {
                    strongconnect(w, adj, st);
                    st.lowlink[v] = st.lowlink[v].min(st.lowlink[w]);
                }
                Some(wi) if st.on_stack[w] => {
                    st.lowlink[v] = st.lowlink[v].min(wi);
                }
                _ => {}
            }
        }
        if st.lowlink[v] == st.index[v].unwrap() {
            let mut comp = Vec::new();
            loop {
                let w = st.stack.pop().unwrap();
                st.on_stack[w] = false;
                comp.push(w + 1);
                if w == v {
                    break;
                }
            }
            comp.sort_unstable();
            st.comps.push(comp);
        }
    }

    let adj = d.out_adjacency();
    let mut st = State {
        index: vec![None; d.n],
        lowlink: vec![0; d.n],
        on_stack: vec![false; d.n],
        stack: Vec::new(),
        next: 0,
        comps: Vec::new(),
    };
    for v in 0..d.n {
        if st.index[v].is_none() {
            strongconnect(v, &adj, &mut st);
        }
    }
    st.comps.sort_by_key(|c| c[0]);
    st.comps
}

/// Strongly connected components with no incoming arcs from outside
/// (the sources of the condensation).
pub fn independent_sccs(d: &DirectedGraph) -> Vec<Vec<usize>> {
    let comps = strongly_connected_components(d);
    let mut comp_of = vec![0usize; d.n];
    for (ci, comp) in comps.iter().enumerate() {
        for &v in comp {
            comp_of[v - 1] = ci;
        }
    }
    let mut has_incoming = vec![false; comps.len()];
    for &(i, j) in &d.arcs {
        if comp_of[i - 1] != comp_of[j - 1] {
            has_incoming[comp_of[j - 1]] = true;
        }
    }
    comps
        .into_iter()
        .enumerate()
        .filter_map(|(ci, c)| (!has_incoming[ci]).then_some(c))
        .collect()
}

/// Whether the oriented graph has no directed cycle (Kahn's algorithm).
pub fn is_acyclic(o: &Orientation) -> bool {
    let n = o.graph.n;
    let mut indeg = vec![0usize; n];
    let mut adj = vec![Vec::new(); n];
    for (tail, head) in o.arcs() {
        indeg[head - 1] += 1;
        adj[tail - 1].push(head - 1);
    }
    let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut removed = 0;
    while let Some(v) = queue.pop() {
        removed += 1;
        for &w in &adj[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                queue.push(w);
            }
        }
    }
    removed == n
}

/// Evaluate the chromatic polynomial at integer `x`, with the default vertex
/// bound of [`CHROMATIC_VERTEX_BOUND`].
pub fn chromatic_polynomial_at(g: &UndirectedGraph, x: i64) -> Result<i128, GraphError> {
    chromatic_polynomial_at_bounded(g, x, CHROMATIC_VERTEX_BOUND)
}

/// Evaluate the chromatic polynomial at integer `x` by deletion and
/// contraction (parallel edges produced by a contraction collapse), with
/// memoisation on a normalised encoding of each minor.
pub fn chromatic_polynomial_at_bounded(
    g: &UndirectedGraph,
    x: i64,
    bound: usize,
) -> Result<i128, GraphError> {
    if g.n > bound {
        return Err(GraphError::TooLarge { actual: g.n, limit: bound });
    }
    let edges: Vec<(u8, u8)> = g
        .edges
        .iter()
        .map(|&(i, j)| ((i - 1) as u8, (j - 1) as u8))
        .collect();
    let mut memo: HashMap<(u8, Vec<(u8, u8)>), i128> = HashMap::new();
    chi(g.n as u8, &edges, x as i128, &mut memo)
}

fn checked_pow(base: i128, exp: u32) -> Result<i128, GraphError> {
    base.checked_pow(exp).ok_or(GraphError::Overflow)
}

fn chi(
    n: u8,
    edges: &[(u8, u8)],
    x: i128,
    memo: &mut HashMap<(u8, Vec<(u8, u8)>), i128>,
) -> Result<i128, GraphError> {
    if edges.is_empty() {
        return checked_pow(x, n as u32);
    }

    // Vertices not touching any edge contribute a factor of x each.
    let mut touched = vec![false; n as usize];
    for &(a, b) in edges {
        touched[a as usize] = true;
        touched[b as usize] = true;
    }
    let isolated = touched.iter().filter(|&&t| !t).count() as u32;
    if isolated > 0 {
        let relabel = compact_relabel(n, edges);
        let inner = chi(relabel.0, &relabel.1, x, memo)?;
        return checked_pow(x, isolated)?.checked_mul(inner).ok_or(GraphError::Overflow);
    }

    let key = (n, edges.to_vec());
    if let Some(&v) = memo.get(&key) {
        return Ok(v);
    }

    let m = edges.len();
    let mut degree = vec![0usize; n as usize];
    for &(a, b) in edges {
        degree[a as usize] += 1;
        degree[b as usize] += 1;
    }
    let nn = n as usize;

    let value = if m == nn - 1 && is_connected_local(n, edges) {
        // Tree: x (x−1)^(n−1).
        x.checked_mul(checked_pow(x - 1, (nn - 1) as u32)?)
            .ok_or(GraphError::Overflow)?
    } else if m == nn && degree.iter().all(|&d| d == 2) && is_connected_local(n, edges) {
        // Cycle: (x−1)^n + (−1)^n (x−1).
        let sign = if nn % 2 == 0 { 1 } else { -1 };
        checked_pow(x - 1, nn as u32)?
            .checked_add(sign * (x - 1))
            .ok_or(GraphError::Overflow)?
    } else {
        // Deletion–contraction on the last edge. The deleted list keeps the
        // original vertex count: dropping an endpoint that just became
        // isolated would lose its factor of x, which the isolated-vertex
        // handler above accounts for instead.
        let e = edges[m - 1];
        let deleted: Vec<(u8, u8)> = edges[..m - 1].to_vec();
        let del = chi(n, &deleted, x, memo)?;
        let contracted = contract(n, &deleted, e);
        let con = chi(contracted.0, &contracted.1, x, memo)?;
        del.checked_sub(con).ok_or(GraphError::Overflow)?
    };

    memo.insert(key, value);
    Ok(value)
}

/// Merge the endpoints of `e` in the remaining edge list, collapsing the
/// parallel edges this creates. Only `gone` leaves the vertex set: the
/// merged vertex may well end up isolated (when `e` was its component's
/// last edge) and still owes a factor of x, which the caller's
/// isolated-vertex handling collects.
fn contract(n: u8, edges: &[(u8, u8)], e: (u8, u8)) -> (u8, Vec<(u8, u8)>) {
    let (keep, gone) = e;
    let mut mapped: Vec<(u8, u8)> = edges
        .iter()
        .map(|&(a, b)| {
            let a = if a == gone { keep } else { a };
            let b = if b == gone { keep } else { b };
            let a = if a > gone { a - 1 } else { a };
            let b = if b > gone { b - 1 } else { b };
            (a.min(b), a.max(b))
        })
        .collect();
    mapped.sort_unstable();
    mapped.dedup();
    (n - 1, mapped)
}

/// Relabel so that exactly the vertices appearing in `edges` get ids
/// 0..k in order of first appearance; isolated vertices are dropped.
fn compact_relabel(n: u8, edges: &[(u8, u8)]) -> (u8, Vec<(u8, u8)>) {
    let mut map = vec![u8::MAX; n as usize];
    let mut next = 0u8;
    let mut out = Vec::with_capacity(edges.len());
    for &(a, b) in edges {
        for v in [a, b] {
            if map[v as usize] == u8::MAX {
                map[v as usize] = next;
                next += 1;
            }
        }
        let (x, y) = (map[a as usize], map[b as usize]);
        out.push((x.min(y), x.max(y)));
    }
    out.sort_unstable();
    out.dedup();
    (next, out)
}

fn is_connected_local(n: u8, edges: &[(u8, u8)]) -> bool {
    let nn = n as usize;
    if nn == 0 {
        return true;
    }
    let mut adj = vec![Vec::new(); nn];
    for &(a, b) in edges {
        adj[a as usize].push(b as usize);
        adj[b as usize].push(a as usize);
    }
    let mut seen = vec![false; nn];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 0;
    while let Some(v) = stack.pop() {
        count += 1;
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    count == nn
}
