//! Synthesis of coupling gains that make a prescribed phase formation an
//! attracting limit cycle.
//!
//! A problem fixes a connected interaction graph, intrinsic frequencies ωᵢ
//! and a target offset Δᵢⱼ = θⱼ* − θᵢ* for every edge. The design picks a
//! common locked rate ω̄, splits the edges into attractive and repulsive
//! couplings, and assigns each directed link (i listening to j) a positive
//! gain so that at the formation every agent moves at exactly ω̄:
//!
//!   ωᵢ + Σⱼ cᵢⱼ f(Δᵢⱼ) = ω̄.
//!
//! Gains on links whose prototype value has the right sign come from a
//! least-squares formula (minimum Σ c² for the agent); every remaining link,
//! including the reverse of each used pair, gets a small ε so that all
//! couplings stay bidirectional and the invariance barriers hold.

use crate::coupling::{self, CouplingError, CouplingKind};
use crate::graph::{
    connected_components, independent_sccs, spanning_tree, DirectedGraph, GraphError,
    UndirectedGraph,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::f64::consts::PI;

/// Offsets closer than this to a prototype singularity are rejected.
pub const DELTA_GUARD: f64 = 1e-9;
/// Tolerance for offsets to close up around every cycle of the graph.
pub const CYCLE_CLOSURE_TOL: f64 = 1e-9;
/// Default gain for links that only exist to keep pairs bidirectional.
pub const DEFAULT_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ShapingError {
    #[error("{0}")]
    Graph(#[from] GraphError),
    #[error("{0}")]
    Coupling(#[from] CouplingError),
    #[error("expected {expected} frequencies, got {got}")]
    OmegaLength { expected: usize, got: usize },
    #[error("non-finite value in problem data")]
    NonFinite,
    #[error("edge ({i}, {j}) appears more than once")]
    DuplicateEdge { i: usize, j: usize },
    #[error("offset {delta} on edge ({i}, {j}) sits on a coupling singularity")]
    DegenerateDelta { i: usize, j: usize, delta: f64 },
    #[error("offsets around a cycle through edge ({i}, {j}) fail to close up (gap {gap})")]
    InconsistentOffsets { i: usize, j: usize, gap: f64 },
    #[error("locked rate equals the intrinsic frequency of agent {agent}")]
    DegenerateSign { agent: usize },
    #[error("locked rate {omega_bar} leaves every agent on the same side; no edge can cross")]
    OmegaBarOutsideRange { omega_bar: f64 },
    #[error("agent {agent} has no link whose coupling can push it toward the locked rate")]
    InfeasibleFrequency { agent: usize },
    #[error("agent {agent} keeps no usable link under the requested support")]
    EmptyPositiveSet { agent: usize },
    #[error("compensating agent {agent} would need a nonpositive gain scale")]
    CompensationFailed { agent: usize },
    #[error("epsilon must be positive and finite, got {epsilon}")]
    InvalidEpsilon { epsilon: f64 },
    #[error("link ({i}, {j}) is not an edge of the interaction graph")]
    ArcNotInGraph { i: usize, j: usize },
    #[error("problem and solution do not belong together: {reason}")]
    Inconsistent { reason: String },
    #[error("operation needs an attractive-only problem")]
    WrongMode,
}

/// Which prototype couplings edges may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Edges may be attractive or repulsive; offsets of 0 and π are both
    /// degenerate (zero force or barrier on both prototypes).
    Mixed,
    /// Every edge is attractive; only the offset π (the barrier) is banned.
    AttractiveOnly,
}

fn wrap_signed(x: f64) -> f64 {
    coupling::wrap_to_branch(x, CouplingKind::Attractive)
}

fn wrap_positive(x: f64) -> f64 {
    coupling::wrap_to_branch(x, CouplingKind::Repulsive)
}

/// A formation-shaping problem: graph, frequencies and target offsets.
///
/// Offsets are stored once per edge under the (min, max) key, as
/// Δᵢⱼ = θⱼ* − θᵢ* wrapped to (−π, π]. Construction checks that the graph
/// is connected, that no offset sits on a singularity of the mode's
/// prototypes, and that the offsets are consistent, meaning they come from
/// actual phase positions (they close up around every cycle).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemJson", into = "ProblemJson")]
pub struct Problem {
    graph: UndirectedGraph,
    omega: Vec<f64>,
    delta: BTreeMap<(usize, usize), f64>,
    mode: Mode,
    omega_bar: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct EdgeJson {
    i: usize,
    j: usize,
    delta: f64,
}

#[derive(Serialize, Deserialize)]
struct ProblemJson {
    n: usize,
    omega: Vec<f64>,
    edges: Vec<EdgeJson>,
    mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega_bar: Option<f64>,
}

impl TryFrom<ProblemJson> for Problem {
    type Error = ShapingError;
    fn try_from(j: ProblemJson) -> Result<Self, ShapingError> {
        let edges: Vec<(usize, usize, f64)> =
            j.edges.iter().map(|e| (e.i, e.j, e.delta)).collect();
        Problem::new(j.n, j.omega, &edges, j.mode, j.omega_bar)
    }
}

impl From<Problem> for ProblemJson {
    fn from(p: Problem) -> Self {
        ProblemJson {
            n: p.graph.vertex_count(),
            omega: p.omega,
            edges: p
                .delta
                .iter()
                .map(|(&(i, j), &delta)| EdgeJson { i, j, delta })
                .collect(),
            mode: p.mode,
            omega_bar: p.omega_bar,
        }
    }
}

impl Problem {
    /// Each entry of `edges` is (i, j, Δ) with Δ the desired value of
    /// θⱼ − θᵢ; order of endpoints is free.
    pub fn new(
        n: usize,
        omega: Vec<f64>,
        edges: &[(usize, usize, f64)],
        mode: Mode,
        omega_bar: Option<f64>,
    ) -> Result<Self, ShapingError> {
        if omega.len() != n {
            return Err(ShapingError::OmegaLength { expected: n, got: omega.len() });
        }
        if omega.iter().any(|w| !w.is_finite())
            || omega_bar.is_some_and(|w| !w.is_finite())
            || edges.iter().any(|&(_, _, d)| !d.is_finite())
        {
            return Err(ShapingError::NonFinite);
        }

        let pairs: Vec<(usize, usize)> = edges.iter().map(|&(i, j, _)| (i, j)).collect();
        let graph = UndirectedGraph::new(n, &pairs)?;

        let mut delta = BTreeMap::new();
        for &(i, j, d) in edges {
            let (key, signed) = if i < j { ((i, j), d) } else { ((j, i), -d) };
            let wrapped = wrap_signed(signed);
            if delta.insert(key, wrapped).is_some() {
                return Err(ShapingError::DuplicateEdge { i, j });
            }
            let near_zero = wrapped.abs() <= DELTA_GUARD;
            let near_pi = (wrapped.abs() - PI).abs() <= DELTA_GUARD;
            let degenerate = match mode {
                Mode::Mixed => near_zero || near_pi,
                Mode::AttractiveOnly => near_pi,
            };
            if degenerate {
                return Err(ShapingError::DegenerateDelta { i, j, delta: d });
            }
        }

        let p = Self { graph, omega, delta, mode, omega_bar };
        p.check_cycle_closure()?;
        Ok(p)
    }

    /// Phases (with θ₁ = 0) that realise every offset; exists because the
    /// offsets close up.
    pub fn target_phases(&self) -> Vec<f64> {
        let n = self.graph.vertex_count();
        let mut phi = vec![f64::NAN; n];
        phi[0] = 0.0;
        let mut queue = VecDeque::from([1usize]);
        while let Some(v) = queue.pop_front() {
            for w in self.graph.neighbors(v) {
                if phi[w - 1].is_nan() {
                    phi[w - 1] = phi[v - 1] + self.delta(v, w).unwrap();
                    queue.push_back(w);
                }
            }
        }
        phi
    }

    fn check_cycle_closure(&self) -> Result<(), ShapingError> {
        let tree: BTreeSet<(usize, usize)> = spanning_tree(&self.graph)?.into_iter().collect();
        let phi = self.target_phases();
        for (&(i, j), &d) in &self.delta {
            if tree.contains(&(i, j)) {
                continue;
            }
            let gap = wrap_signed(phi[j - 1] - phi[i - 1] - d).abs();
            if gap > CYCLE_CLOSURE_TOL {
                return Err(ShapingError::InconsistentOffsets { i, j, gap });
            }
        }
        Ok(())
    }

    pub fn agent_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn graph(&self) -> &UndirectedGraph {
        &self.graph
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Locked rate carried by the problem file, if any.
    pub fn omega_bar_hint(&self) -> Option<f64> {
        self.omega_bar
    }

    /// Signed offset θⱼ* − θᵢ* in (−π, π] for an edge, in either endpoint
    /// order.
    pub fn delta(&self, i: usize, j: usize) -> Option<f64> {
        if i < j {
            self.delta.get(&(i, j)).copied()
        } else {
            self.delta.get(&(j, i)).map(|&d| wrap_signed(-d))
        }
    }
}

/// Split of the edge set into attractive and repulsive couplings, keys in
/// canonical (min, max) form.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EdgePartition {
    pub attractive: BTreeSet<(usize, usize)>,
    pub repulsive: BTreeSet<(usize, usize)>,
}

impl EdgePartition {
    pub fn kind_of(&self, i: usize, j: usize) -> Option<CouplingKind> {
        let key = (i.min(j), i.max(j));
        if self.attractive.contains(&key) {
            Some(CouplingKind::Attractive)
        } else if self.repulsive.contains(&key) {
            Some(CouplingKind::Repulsive)
        } else {
            None
        }
    }
}

/// Outcome of the locked-rate feasibility scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvabilityResult {
    pub feasible: bool,
    /// Open intervals of admissible ω̄, ascending.
    pub omega_bar_intervals: Vec<(f64, f64)>,
}

/// Prototype value a link (i listening to j) would have at the formation.
fn link_value(p: &Problem, kind: CouplingKind, i: usize, j: usize) -> Result<f64, ShapingError> {
    let d = p.delta(i, j).ok_or(ShapingError::ArcNotInGraph { i, j })?;
    let v = match kind {
        CouplingKind::Attractive => coupling::eval_attractive(d)?,
        CouplingKind::Repulsive => coupling::eval_repulsive(d)?,
    };
    Ok(v)
}

/// Scan which locked rates admit a design. Candidates are the open
/// intervals between consecutive distinct intrinsic frequencies; in
/// attractive-only mode an interval survives only if its midpoint leaves
/// every agent at least one link of the right sign.
pub fn check_solvability(p: &Problem) -> Result<SolvabilityResult, ShapingError> {
    let mut vals = p.omega.to_vec();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals.dedup();
    let mut intervals: Vec<(f64, f64)> = vals.windows(2).map(|w| (w[0], w[1])).collect();

    if p.mode == Mode::AttractiveOnly {
        let mut kept = Vec::new();
        for iv in intervals {
            let mid = 0.5 * (iv.0 + iv.1);
            let mut ok = true;
            'agents: for i in 1..=p.agent_count() {
                let need = mid - p.omega[i - 1];
                for j in p.graph.neighbors(i) {
                    let v = link_value(p, CouplingKind::Attractive, i, j)?;
                    if v * need > 0.0 {
                        continue 'agents;
                    }
                }
                ok = false;
                break;
            }
            if ok {
                kept.push(iv);
            }
        }
        intervals = kept;
    }

    Ok(SolvabilityResult { feasible: !intervals.is_empty(), omega_bar_intervals: intervals })
}

/// Midpoint of the widest admissible interval (first on ties).
pub fn select_omega_bar(sol: &SolvabilityResult) -> Option<f64> {
    sol.omega_bar_intervals
        .iter()
        .max_by(|a, b| {
            let wa = a.1 - a.0;
            let wb = b.1 - b.0;
            wa.partial_cmp(&wb).unwrap().then(std::cmp::Ordering::Greater)
        })
        .map(|iv| 0.5 * (iv.0 + iv.1))
}

fn check_not_degenerate(p: &Problem, omega_bar: f64) -> Result<(), ShapingError> {
    if !omega_bar.is_finite() {
        return Err(ShapingError::NonFinite);
    }
    for (idx, &w) in p.omega.iter().enumerate() {
        if w == omega_bar {
            return Err(ShapingError::DegenerateSign { agent: idx + 1 });
        }
    }
    Ok(())
}

/// Assign a coupling kind to every edge so that each agent ends up with at
/// least one link pushing it toward ω̄.
///
/// In mixed mode: an edge between a slow agent (ωᵢ < ω̄) and a fast one gets
/// the kind that serves both at once; from there kinds spread outward, each
/// still-unserved agent (smallest id first) classifying the edge to its
/// lowest already-served neighbour. Edges left over after everyone is
/// served get the kind matching the sign of their offset, which keeps the
/// result deterministic.
pub fn classify_edges(p: &Problem, omega_bar: f64) -> Result<EdgePartition, ShapingError> {
    check_not_degenerate(p, omega_bar)?;
    let n = p.agent_count();

    if p.mode == Mode::AttractiveOnly {
        let part = EdgePartition {
            attractive: p.graph.edges().iter().copied().collect(),
            repulsive: BTreeSet::new(),
        };
        // The all-attractive split is forced; it just may not serve everyone.
        for i in 1..=n {
            let need = omega_bar - p.omega[i - 1];
            let served = p
                .graph
                .neighbors(i)
                .into_iter()
                .map(|j| link_value(p, CouplingKind::Attractive, i, j).map(|v| v * need > 0.0))
                .collect::<Result<Vec<bool>, _>>()?
                .into_iter()
                .any(|b| b);
            if !served {
                return Err(ShapingError::InfeasibleFrequency { agent: i });
            }
        }
        return Ok(part);
    }

    let slow: BTreeSet<usize> = (1..=n).filter(|&i| p.omega[i - 1] < omega_bar).collect();
    if slow.is_empty() || slow.len() == n {
        return Err(ShapingError::OmegaBarOutsideRange { omega_bar });
    }

    let mut part = EdgePartition::default();
    let mut served = vec![false; n];

    // Edges crossing the slow/fast divide: pick the kind whose force at the
    // formation speeds the slow endpoint up; the same link then slows the
    // fast endpoint down, serving both.
    for &(a, b) in p.graph.edges() {
        if slow.contains(&a) == slow.contains(&b) {
            continue;
        }
        let (s, l) = if slow.contains(&a) { (a, b) } else { (b, a) };
        let d = wrap_positive(p.delta(s, l).unwrap());
        if d < PI {
            part.attractive.insert((a.min(b), a.max(b)));
        } else {
            part.repulsive.insert((a.min(b), a.max(b)));
        }
        served[s - 1] = true;
        served[l - 1] = true;
    }

    while served.iter().any(|&s| !s) {
        // Frontier for this layer: unserved agents with a served neighbour,
        // against the snapshot taken before the layer ran.
        let snapshot = served.clone();
        let mut progressed = false;
        for y in 1..=n {
            if snapshot[y - 1] {
                continue;
            }
            let Some(x) = p
                .graph
                .neighbors(y)
                .into_iter()
                .find(|&x| snapshot[x - 1])
            else {
                continue;
            };
            let d = wrap_positive(p.delta(y, x).unwrap());
            let attractive = if slow.contains(&y) { d < PI } else { d > PI };
            let key = (x.min(y), x.max(y));
            if attractive {
                part.attractive.insert(key);
            } else {
                part.repulsive.insert(key);
            }
            served[y - 1] = true;
            progressed = true;
        }
        // The graph is connected, so each layer serves someone.
        debug_assert!(progressed);
        if !progressed {
            break;
        }
    }

    for &(a, b) in p.graph.edges() {
        if part.kind_of(a, b).is_some() {
            continue;
        }
        if wrap_positive(p.delta(a, b).unwrap()) < PI {
            part.attractive.insert((a, b));
        } else {
            part.repulsive.insert((a, b));
        }
    }

    Ok(part)
}

/// For each agent, its neighbours split by whether the link's prototype
/// value at the formation has the sign the agent needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignSets {
    positive: Vec<BTreeSet<usize>>,
    negative: Vec<BTreeSet<usize>>,
}

impl SignSets {
    pub fn positive(&self, agent: usize) -> &BTreeSet<usize> {
        &self.positive[agent - 1]
    }

    pub fn negative(&self, agent: usize) -> &BTreeSet<usize> {
        &self.negative[agent - 1]
    }
}

pub fn sign_sets(
    p: &Problem,
    omega_bar: f64,
    partition: &EdgePartition,
) -> Result<SignSets, ShapingError> {
    check_not_degenerate(p, omega_bar)?;
    let n = p.agent_count();
    let mut positive = vec![BTreeSet::new(); n];
    let mut negative = vec![BTreeSet::new(); n];
    for i in 1..=n {
        let need = omega_bar - p.omega[i - 1];
        for j in p.graph.neighbors(i) {
            let kind = partition
                .kind_of(i, j)
                .ok_or(ShapingError::ArcNotInGraph { i, j })?;
            let v = link_value(p, kind, i, j)?;
            if v * need > 0.0 {
                positive[i - 1].insert(j);
            } else {
                negative[i - 1].insert(j);
            }
        }
    }
    Ok(SignSets { positive, negative })
}

/// A full gain assignment. `alpha` holds attractive links, `beta` repulsive
/// ones, each keyed by (listener, source).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SolutionJson", into = "SolutionJson")]
pub struct CouplingSolution {
    pub omega_bar: f64,
    pub epsilon: f64,
    pub alpha: BTreeMap<(usize, usize), f64>,
    pub beta: BTreeMap<(usize, usize), f64>,
}

#[derive(Serialize, Deserialize)]
struct ArcJson {
    i: usize,
    j: usize,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct SolutionJson {
    omega_bar: f64,
    epsilon: f64,
    alpha: Vec<ArcJson>,
    beta: Vec<ArcJson>,
}

impl TryFrom<SolutionJson> for CouplingSolution {
    type Error = ShapingError;
    fn try_from(j: SolutionJson) -> Result<Self, ShapingError> {
        let mut alpha = BTreeMap::new();
        let mut beta = BTreeMap::new();
        for (list, map) in [(&j.alpha, &mut alpha), (&j.beta, &mut beta)] {
            for a in list {
                if !a.value.is_finite() || a.value <= 0.0 {
                    return Err(ShapingError::Inconsistent {
                        reason: format!("gain on link ({}, {}) must be positive", a.i, a.j),
                    });
                }
                if map.insert((a.i, a.j), a.value).is_some() {
                    return Err(ShapingError::DuplicateEdge { i: a.i, j: a.j });
                }
            }
        }
        for key in alpha.keys() {
            if beta.contains_key(key) {
                return Err(ShapingError::Inconsistent {
                    reason: format!("link ({}, {}) is both attractive and repulsive", key.0, key.1),
                });
            }
        }
        if !j.omega_bar.is_finite() || !j.epsilon.is_finite() || j.epsilon <= 0.0 {
            return Err(ShapingError::Inconsistent {
                reason: "omega_bar must be finite and epsilon positive".into(),
            });
        }
        Ok(CouplingSolution { omega_bar: j.omega_bar, epsilon: j.epsilon, alpha, beta })
    }
}

impl From<CouplingSolution> for SolutionJson {
    fn from(s: CouplingSolution) -> Self {
        let pack = |m: &BTreeMap<(usize, usize), f64>| {
            m.iter()
                .map(|(&(i, j), &value)| ArcJson { i, j, value })
                .collect()
        };
        SolutionJson {
            omega_bar: s.omega_bar,
            epsilon: s.epsilon,
            alpha: pack(&s.alpha),
            beta: pack(&s.beta),
        }
    }
}

impl CouplingSolution {
    /// Kind and gain of a directed link, if present.
    pub fn coefficient(&self, i: usize, j: usize) -> Option<(CouplingKind, f64)> {
        if let Some(&c) = self.alpha.get(&(i, j)) {
            Some((CouplingKind::Attractive, c))
        } else {
            self.beta.get(&(i, j)).map(|&c| (CouplingKind::Repulsive, c))
        }
    }

    /// Rebuild the edge split implied by which map each link sits in.
    pub fn partition(&self) -> EdgePartition {
        let mut part = EdgePartition::default();
        for &(i, j) in self.alpha.keys() {
            part.attractive.insert((i.min(j), i.max(j)));
        }
        for &(i, j) in self.beta.keys() {
            part.repulsive.insert((i.min(j), i.max(j)));
        }
        part
    }

    /// Check the solution can drive this problem: every link lies on a
    /// graph edge, no edge is claimed by both kinds, and attractive-only
    /// problems carry no repulsive link. Directed solutions (a link with no
    /// reverse) pass: they are legitimate simulation subjects, just without
    /// the barrier guarantees. Use [`is_bidirectional`](Self::is_bidirectional)
    /// to tell the cases apart.
    pub fn validate_against(&self, p: &Problem) -> Result<(), ShapingError> {
        if p.mode == Mode::AttractiveOnly && !self.beta.is_empty() {
            return Err(ShapingError::Inconsistent {
                reason: "repulsive links on an attractive-only problem".into(),
            });
        }
        let part = self.partition();
        if !part.attractive.is_disjoint(&part.repulsive) {
            return Err(ShapingError::Inconsistent {
                reason: "an edge carries both coupling kinds".into(),
            });
        }
        for &(i, j) in self.alpha.keys().chain(self.beta.keys()) {
            if !p.graph.contains_edge(i, j) {
                return Err(ShapingError::ArcNotInGraph { i, j });
            }
        }
        Ok(())
    }

    /// Whether every link has a reverse link. Only bidirectional solutions
    /// keep their barriers forward invariant.
    pub fn is_bidirectional(&self) -> bool {
        self.alpha
            .keys()
            .chain(self.beta.keys())
            .all(|&(i, j)| self.coefficient(j, i).is_some())
    }
}

/// Minimum-energy gains: for every agent the links whose prototype sign
/// matches its need split the required rate correction in proportion to
/// their values (the least-squares optimum); all other links get ε.
///
/// `support`, when given, restricts which directed links may carry formula
/// gains; reverses missing from it are added at ε so pairs stay
/// bidirectional. Agents whose frequency already equals ω̄ need no
/// correction and get ε on all their links.
///
/// With `compensate` the formula gains of each agent are rescaled so the
/// ε links' contribution cancels and the residual at the formation is
/// exactly zero. Agents at ω̄ are left alone: their ε links are the whole
/// assignment.
pub fn min_energy_coefficients(
    p: &Problem,
    omega_bar: f64,
    partition: &EdgePartition,
    support: Option<&BTreeSet<(usize, usize)>>,
    epsilon: f64,
    compensate: bool,
) -> Result<CouplingSolution, ShapingError> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(ShapingError::InvalidEpsilon { epsilon });
    }
    if !omega_bar.is_finite() {
        return Err(ShapingError::NonFinite);
    }

    let mut arcs: BTreeSet<(usize, usize)> = match support {
        Some(s) => {
            for &(i, j) in s {
                if !p.graph.contains_edge(i, j) {
                    return Err(ShapingError::ArcNotInGraph { i, j });
                }
            }
            s.clone()
        }
        None => p
            .graph
            .edges()
            .iter()
            .flat_map(|&(i, j)| [(i, j), (j, i)])
            .collect(),
    };
    let formula_candidates = arcs.clone();
    for &(i, j) in &formula_candidates {
        arcs.insert((j, i));
    }

    let kind_and_value = |i: usize, j: usize| -> Result<(CouplingKind, f64), ShapingError> {
        let kind = partition
            .kind_of(i, j)
            .ok_or(ShapingError::ArcNotInGraph { i, j })?;
        Ok((kind, link_value(p, kind, i, j)?))
    };

    let mut alpha = BTreeMap::new();
    let mut beta = BTreeMap::new();
    let mut put = |kind: CouplingKind, arc: (usize, usize), c: f64| match kind {
        CouplingKind::Attractive => {
            alpha.insert(arc, c);
        }
        CouplingKind::Repulsive => {
            beta.insert(arc, c);
        }
    };

    for i in 1..=p.agent_count() {
        let need = omega_bar - p.omega[i - 1];
        let my_arcs: Vec<(usize, usize)> =
            arcs.range((i, 0)..(i + 1, 0)).copied().collect();
        if my_arcs.is_empty() {
            continue;
        }

        if need == 0.0 {
            for arc in my_arcs {
                let (kind, _) = kind_and_value(arc.0, arc.1)?;
                put(kind, arc, epsilon);
            }
            continue;
        }

        let mut formula = Vec::new();
        let mut rest = Vec::new();
        for arc in my_arcs {
            let (kind, v) = kind_and_value(arc.0, arc.1)?;
            if formula_candidates.contains(&arc) && v * need > 0.0 {
                formula.push((arc, kind, v));
            } else {
                rest.push((arc, kind, v));
            }
        }
        if formula.is_empty() {
            return Err(ShapingError::EmptyPositiveSet { agent: i });
        }

        let denom: f64 = formula.iter().map(|&(_, _, v)| v * v).sum();
        let scale = if compensate {
            let spill: f64 = rest.iter().map(|&(_, _, v)| epsilon * v).sum();
            let s = (need - spill) / need;
            if s <= 0.0 {
                return Err(ShapingError::CompensationFailed { agent: i });
            }
            s
        } else {
            1.0
        };

        for (arc, kind, v) in formula {
            put(kind, arc, scale * need.abs() * v.abs() / denom);
        }
        for (arc, kind, _) in rest {
            put(kind, arc, epsilon);
        }
    }

    Ok(CouplingSolution { omega_bar, epsilon, alpha, beta })
}

/// Per-agent deviation of the formation's instantaneous rate from ω̄:
/// rᵢ = ωᵢ + Σⱼ cᵢⱼ f(Δᵢⱼ) − ω̄.
pub fn verify_limit_cycle(p: &Problem, sol: &CouplingSolution) -> Result<Vec<f64>, ShapingError> {
    let mut residuals = Vec::with_capacity(p.agent_count());
    for i in 1..=p.agent_count() {
        let mut rate = p.omega[i - 1];
        for (&(a, j), &c) in sol.alpha.range((i, 0)..(i + 1, 0)) {
            debug_assert_eq!(a, i);
            rate += c * link_value(p, CouplingKind::Attractive, i, j)?;
        }
        for (&(a, j), &c) in sol.beta.range((i, 0)..(i + 1, 0)) {
            debug_assert_eq!(a, i);
            rate += c * link_value(p, CouplingKind::Repulsive, i, j)?;
        }
        residuals.push(rate - sol.omega_bar);
    }
    Ok(residuals)
}

/// Fewest coupling pairs in mixed mode: any spanning tree works, because
/// each tree edge can be given the kind serving the agent it reaches.
pub fn min_edge_subgraph_mixed(
    p: &Problem,
    omega_bar: f64,
) -> Result<Vec<(usize, usize)>, ShapingError> {
    if p.mode != Mode::Mixed {
        return Err(ShapingError::WrongMode);
    }
    check_not_degenerate(p, omega_bar)?;
    let n = p.agent_count();
    let slow = p.omega.iter().filter(|&&w| w < omega_bar).count();
    if slow == 0 || slow == n {
        return Err(ShapingError::OmegaBarOutsideRange { omega_bar });
    }
    Ok(spanning_tree(p.graph())?)
}

/// The smallest attractive-only design and the counting certificate behind
/// it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinimalAttractiveDesign {
    /// Directed links (listener, source) of the design.
    pub links: Vec<(usize, usize)>,
    /// Predicted link count: N + (components − 1) + Σ (sources − 1).
    pub count: usize,
    /// Weakly connected components of the full right-sign digraph.
    pub components: usize,
    /// Per component, its number of source strongly connected components.
    pub sources_per_component: Vec<usize>,
}

/// Build the smallest attractive-only link set.
///
/// Start from the digraph of all right-sign links. Its weak components and
/// their source strongly connected components fix the count: one link per
/// agent, one feedback link into every source component beyond a root, and
/// one bridge per extra weak component. Each agent takes its lowest
/// right-sign neighbour; feedback links run from the lowest eligible
/// outside neighbour (such a link can never itself be right-sign, so the
/// total is exact); bridges follow the lowest graph edges that join
/// components.
pub fn min_edge_subgraph_attractive(
    p: &Problem,
    omega_bar: f64,
) -> Result<MinimalAttractiveDesign, ShapingError> {
    if p.mode != Mode::AttractiveOnly {
        return Err(ShapingError::WrongMode);
    }
    let partition = classify_edges(p, omega_bar)?;
    let sets = sign_sets(p, omega_bar, &partition)?;
    let n = p.agent_count();

    let mut positive_arcs = Vec::new();
    for i in 1..=n {
        for &j in sets.positive(i) {
            positive_arcs.push((i, j));
        }
    }
    let digraph = DirectedGraph::new(n, &positive_arcs)?;
    let underlying = UndirectedGraph::new(n, &positive_arcs)?;
    let comps = connected_components(&underlying);
    let mut comp_of = vec![0usize; n];
    for (ci, comp) in comps.iter().enumerate() {
        for &v in comp {
            comp_of[v - 1] = ci;
        }
    }

    let sources = independent_sccs(&digraph);
    let mut sources_per_component = vec![0usize; comps.len()];
    for s in &sources {
        sources_per_component[comp_of[s[0] - 1]] += 1;
    }

    let mut links: BTreeSet<(usize, usize)> = BTreeSet::new();
    for i in 1..=n {
        let j = *sets
            .positive(i)
            .first()
            .ok_or(ShapingError::InfeasibleFrequency { agent: i })?;
        links.insert((i, j));
    }

    // One feedback link into each source component except a root per weak
    // component (the source containing the component's lowest vertex among
    // sources). No right-sign link enters a source component, so feedback
    // links never collide with the per-agent ones.
    for ci in 0..comps.len() {
        let mine: Vec<&Vec<usize>> = sources
            .iter()
            .filter(|s| comp_of[s[0] - 1] == ci)
            .collect();
        let root_min = mine.iter().map(|s| s[0]).min().unwrap();
        for s in mine {
            if s[0] == root_min {
                continue;
            }
            let inside: BTreeSet<usize> = s.iter().copied().collect();
            let feedback = s
                .iter()
                .find_map(|&v| {
                    p.graph
                        .neighbors(v)
                        .into_iter()
                        .find(|x| !inside.contains(x) && comp_of[x - 1] == ci)
                        .map(|x| (x, v))
                })
                .expect("a proper source component has an outside neighbour");
            links.insert(feedback);
        }
    }

    // Bridges: lowest graph edges that merge the weak components.
    let mut merged: Vec<usize> = (0..comps.len()).collect();
    fn find(merged: &mut Vec<usize>, x: usize) -> usize {
        if merged[x] != x {
            merged[x] = find(merged, merged[x]);
        }
        merged[x]
    }
    for &(a, b) in p.graph.edges() {
        let (ra, rb) = (find(&mut merged, comp_of[a - 1]), find(&mut merged, comp_of[b - 1]));
        if ra != rb {
            merged[rb] = ra;
            links.insert((a, b));
        }
    }

    let count = n
        + comps.len().saturating_sub(1)
        + sources_per_component.iter().map(|&k| k - 1).sum::<usize>();
    debug_assert_eq!(links.len(), count);

    Ok(MinimalAttractiveDesign {
        links: links.into_iter().collect(),
        count,
        components: comps.len(),
        sources_per_component,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced() -> Problem {
        let k = 2.0 * PI / 7.0;
        Problem::new(
            7,
            vec![-0.6, -0.4, -0.2, 0.0, 0.2, 0.4, 0.6],
            &[
                (1, 3, 2.0 * k),
                (2, 3, k),
                (3, 4, k),
                (4, 5, k),
                (3, 6, 3.0 * k),
                (6, 7, k),
            ],
            Mode::AttractiveOnly,
            Some(0.1),
        )
        .unwrap()
    }

    fn clustered() -> Problem {
        Problem::new(
            7,
            vec![-0.6, -0.4, -0.2, 0.0, 0.2, 0.4, 0.6],
            &[
                (1, 3, 1.4),
                (2, 3, 1.3),
                (3, 4, 0.2),
                (4, 5, 0.2),
                (3, 6, 1.7),
                (6, 7, 0.1),
            ],
            Mode::AttractiveOnly,
            Some(0.1),
        )
        .unwrap()
    }

    #[test]
    fn problem_validation_catches_bad_input() {
        let err = Problem::new(3, vec![0.0, 1.0], &[(1, 2, 0.5), (2, 3, 0.5)], Mode::Mixed, None);
        assert!(matches!(err, Err(ShapingError::OmegaLength { expected: 3, got: 2 })));

        let err = Problem::new(2, vec![0.0, 1.0], &[(1, 2, PI)], Mode::AttractiveOnly, None);
        assert!(matches!(err, Err(ShapingError::DegenerateDelta { .. })));

        // zero offset is fine for attractive-only but degenerate in mixed
        assert!(Problem::new(2, vec![0.0, 1.0], &[(1, 2, 0.0)], Mode::AttractiveOnly, None).is_ok());
        let err = Problem::new(2, vec![0.0, 1.0], &[(1, 2, 0.0)], Mode::Mixed, None);
        assert!(matches!(err, Err(ShapingError::DegenerateDelta { .. })));

        let err = Problem::new(
            4,
            vec![0.0; 4],
            &[(1, 2, 0.5), (3, 4, 0.5)],
            Mode::AttractiveOnly,
            None,
        );
        assert!(matches!(err, Err(ShapingError::Graph(GraphError::NotConnected))));

        let err = Problem::new(
            3,
            vec![0.0; 3],
            &[(1, 2, 0.5), (2, 3, 0.5), (1, 3, 0.9)],
            Mode::AttractiveOnly,
            None,
        );
        assert!(matches!(err, Err(ShapingError::InconsistentOffsets { .. })));

        assert!(Problem::new(
            3,
            vec![0.0; 3],
            &[(1, 2, 0.5), (2, 3, 0.5), (1, 3, 1.0)],
            Mode::AttractiveOnly,
            None,
        )
        .is_ok());
    }

    #[test]
    fn offsets_are_stored_antisymmetrically() {
        let p = Problem::new(2, vec![0.0, 1.0], &[(2, 1, 0.7)], Mode::AttractiveOnly, None).unwrap();
        assert!((p.delta(2, 1).unwrap() - 0.7).abs() < 1e-15);
        assert!((p.delta(1, 2).unwrap() + 0.7).abs() < 1e-15);
        assert_eq!(p.delta(1, 3), None);
    }

    #[test]
    fn target_phases_reproduce_the_offsets() {
        let p = clustered();
        let phi = p.target_phases();
        let want = [0.0, 0.1, 1.4, 1.6, 1.8, 3.1, 3.2];
        for (got, want) in phi.iter().zip(want) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn solvability_intervals_sit_between_distinct_frequencies() {
        // mixed mode keeps every gap between consecutive distinct values
        let p = Problem::new(
            4,
            vec![0.3, -0.1, 0.3, 0.8],
            &[(1, 2, 0.5), (2, 3, 0.5), (3, 4, 0.5)],
            Mode::Mixed,
            None,
        )
        .unwrap();
        let sol = check_solvability(&p).unwrap();
        assert!(sol.feasible);
        assert_eq!(sol.omega_bar_intervals, vec![(-0.1, 0.3), (0.3, 0.8)]);

        let flat = Problem::new(2, vec![1.0, 1.0], &[(1, 2, 0.5)], Mode::Mixed, None).unwrap();
        let sol = check_solvability(&flat).unwrap();
        assert!(!sol.feasible);
        assert!(sol.omega_bar_intervals.is_empty());
    }

    #[test]
    fn attractive_only_solvability_drops_unservable_intervals() {
        // On the balanced tree the leaf agents prune the extremes: agent 2
        // can only speed up (its one link has a positive value), agents 5
        // and 6 can only slow down below 0.2 and 0.4. Three of the six
        // gaps survive.
        let p = balanced();
        let sol = check_solvability(&p).unwrap();
        assert!(sol.feasible);
        let expect = vec![(-0.4, -0.2), (-0.2, 0.0), (0.0, 0.2)];
        for (got, want) in sol.omega_bar_intervals.iter().zip(&expect) {
            assert!((got.0 - want.0).abs() < 1e-12 && (got.1 - want.1).abs() < 1e-12);
        }
        assert_eq!(sol.omega_bar_intervals.len(), 3);

        // chain whose lowest agent can only be slowed down: nothing works
        let q = Problem::new(
            3,
            vec![0.0, 1.0, 0.5],
            &[(1, 2, -0.4), (2, 3, 0.4)],
            Mode::AttractiveOnly,
            None,
        )
        .unwrap();
        let sol = check_solvability(&q).unwrap();
        assert!(!sol.feasible);
    }

    #[test]
    fn widest_interval_wins() {
        let sol = SolvabilityResult {
            feasible: true,
            omega_bar_intervals: vec![(0.0, 1.0), (1.0, 3.0), (3.0, 5.0)],
        };
        assert_eq!(select_omega_bar(&sol), Some(2.0));
        assert_eq!(select_omega_bar(&SolvabilityResult { feasible: false, omega_bar_intervals: vec![] }), None);
    }

    #[test]
    fn balanced_tree_classifies_all_attractive() {
        let p = balanced();
        let part = classify_edges(&p, 0.1).unwrap();
        assert_eq!(part.attractive.len(), 6);
        assert!(part.repulsive.is_empty());
    }

    #[test]
    fn cross_edge_kind_follows_the_offset() {
        // slow agent 1, fast agent 2, offset past π seen from the slow end
        let p = Problem::new(2, vec![0.0, 1.0], &[(1, 2, -2.0)], Mode::Mixed, None).unwrap();
        let part = classify_edges(&p, 0.5).unwrap();
        assert!(part.repulsive.contains(&(1, 2)));

        let p = Problem::new(2, vec![0.0, 1.0], &[(1, 2, 2.0)], Mode::Mixed, None).unwrap();
        let part = classify_edges(&p, 0.5).unwrap();
        assert!(part.attractive.contains(&(1, 2)));
    }

    #[test]
    fn classification_spreads_outward_from_cross_edges() {
        // path 1-2-3-4; with ω̄ = 0.5 only agent 2 is fast, so edges (1,2)
        // and (2,3) cross; agent 4 is then served through agent 3.
        let p = Problem::new(
            4,
            vec![0.0, 1.0, 0.4, 0.45],
            &[(1, 2, 0.5), (2, 3, 0.5), (3, 4, 1.0)],
            Mode::Mixed,
            None,
        )
        .unwrap();
        let part = classify_edges(&p, 0.5).unwrap();
        // slow agent 4 sees Δ₄₃ = −1.0, i.e. 2π−1 on the positive branch:
        // repulsive is the serving kind
        assert!(part.repulsive.contains(&(3, 4)));
        // crossing (1,2): slow side 1 sees +0.5, attractive serves both;
        // crossing (2,3): slow side 3 sees −0.5, so repulsive does
        assert!(part.attractive.contains(&(1, 2)));
        assert!(part.repulsive.contains(&(2, 3)));

        let q = Problem::new(
            4,
            vec![0.0, 1.0, 0.4, 0.45],
            &[(1, 2, 0.5), (2, 3, 0.5), (3, 4, -1.0)],
            Mode::Mixed,
            None,
        )
        .unwrap();
        let part = classify_edges(&q, 0.5).unwrap();
        assert!(part.attractive.contains(&(3, 4)));
    }

    #[test]
    fn classification_needs_a_crossing() {
        let p = Problem::new(2, vec![0.0, 1.0], &[(1, 2, 0.5)], Mode::Mixed, None).unwrap();
        assert!(matches!(
            classify_edges(&p, 2.0),
            Err(ShapingError::OmegaBarOutsideRange { .. })
        ));
        assert!(matches!(
            classify_edges(&p, 1.0),
            Err(ShapingError::DegenerateSign { agent: 2 })
        ));
    }

    #[test]
    fn balanced_sign_sets_are_the_known_ones() {
        let p = balanced();
        let part = classify_edges(&p, 0.1).unwrap();
        let sets = sign_sets(&p, 0.1, &part).unwrap();
        let expect: [&[usize]; 7] = [&[3], &[3], &[4, 6], &[5], &[4], &[3], &[6]];
        for i in 1..=7 {
            let got: Vec<usize> = sets.positive(i).iter().copied().collect();
            assert_eq!(got, expect[i - 1], "agent {i}");
        }
        assert_eq!(
            sets.negative(3).iter().copied().collect::<Vec<_>>(),
            vec![1, 2]
        );
    }

    #[test]
    fn full_support_gains_cancel_exactly_under_compensation() {
        for p in [balanced(), clustered()] {
            let part = classify_edges(&p, 0.1).unwrap();
            let sol = min_energy_coefficients(&p, 0.1, &part, None, 0.01, true).unwrap();
            let residuals = verify_limit_cycle(&p, &sol).unwrap();
            for (i, r) in residuals.iter().enumerate() {
                assert!(r.abs() < 1e-12, "agent {} residual {}", i + 1, r);
            }
            assert!(sol.alpha.values().all(|&c| c > 0.0));
        }
    }

    #[test]
    fn restricted_support_reproduces_single_link_gains() {
        let p = balanced();
        let part = classify_edges(&p, 0.1).unwrap();
        let support: BTreeSet<(usize, usize)> = [
            (1, 3), (2, 3), (3, 4), (4, 5), (5, 4), (6, 3), (7, 6), (3, 2), (6, 7),
        ]
        .into_iter()
        .collect();
        let sol = min_energy_coefficients(&p, 0.1, &part, Some(&support), 0.01, false).unwrap();
        assert_eq!(sol.alpha.len(), 12);
        assert!(sol.beta.is_empty());

        // single right-sign link: gain is |ω̄ − ωᵢ| / |f(Δ)|
        let k = PI / 7.0;
        assert!((sol.alpha[&(1, 3)] - 0.7 / (2.0 * k).tan()).abs() < 1e-12);
        assert!((sol.alpha[&(3, 4)] - 0.3 / k.tan()).abs() < 1e-12);
        assert!((sol.alpha[&(6, 3)] - 0.3 / (3.0 * k).tan()).abs() < 1e-12);
        // reverse-closure and wrong-sign links sit at ε
        for arc in [(3, 1), (3, 2), (3, 6), (4, 3), (6, 7)] {
            assert_eq!(sol.alpha[&arc], 0.01, "{arc:?}");
        }

        let residuals = verify_limit_cycle(&p, &sol).unwrap();
        assert!((residuals[2].abs() - 0.026457).abs() < 1e-5);
        assert!((residuals[3].abs() - 0.004816).abs() < 1e-5);
        assert!(residuals[0].abs() < 1e-12);
        assert!(residuals[6].abs() < 1e-12);
    }

    #[test]
    fn agents_already_at_the_locked_rate_get_epsilon_links() {
        // unequal offsets so agent 2's two ε links do not cancel
        let p = Problem::new(
            3,
            vec![0.0, 0.5, 1.0],
            &[(1, 2, 0.8), (2, 3, 0.6)],
            Mode::AttractiveOnly,
            None,
        )
        .unwrap();
        let part = EdgePartition {
            attractive: p.graph().edges().iter().copied().collect(),
            repulsive: BTreeSet::new(),
        };
        let sol = min_energy_coefficients(&p, 0.5, &part, None, 0.01, false).unwrap();
        assert_eq!(sol.alpha[&(2, 1)], 0.01);
        assert_eq!(sol.alpha[&(2, 3)], 0.01);
        // the others still solve exactly
        let residuals = verify_limit_cycle(&p, &sol).unwrap();
        assert!(residuals[0].abs() < 1e-12);
        assert!(residuals[2].abs() < 1e-12);
        assert!(residuals[1].abs() > 0.0);
    }

    #[test]
    fn compensation_failure_is_reported() {
        // Under the restricted support, agent 3's closure link toward 6 has
        // a large value of the sign agent 3 itself needs (f(6π/7) ≈ 4.38
        // against a correction of 0.3). Once ε · 4.38 exceeds what the
        // remaining spill gives back, no positive rescale can absorb it:
        // the crossover is at ε ≈ 0.113.
        let p = balanced();
        let part = classify_edges(&p, 0.1).unwrap();
        let support: BTreeSet<(usize, usize)> = [
            (1, 3), (2, 3), (3, 4), (4, 5), (5, 4), (6, 3), (7, 6), (3, 2), (6, 7),
        ]
        .into_iter()
        .collect();
        let err = min_energy_coefficients(&p, 0.1, &part, Some(&support), 0.15, true);
        assert!(matches!(err, Err(ShapingError::CompensationFailed { agent: 3 })));

        let sol = min_energy_coefficients(&p, 0.1, &part, Some(&support), 0.1, true).unwrap();
        let residuals = verify_limit_cycle(&p, &sol).unwrap();
        assert!(residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn mixed_minimum_is_a_spanning_tree() {
        let p = Problem::new(
            3,
            vec![0.0, 1.0, 2.0],
            &[(1, 2, 0.5), (2, 3, 0.5), (1, 3, 1.0)],
            Mode::Mixed,
            None,
        )
        .unwrap();
        let tree = min_edge_subgraph_mixed(&p, 0.5).unwrap();
        assert_eq!(tree.len(), 2);
        assert!(matches!(
            min_edge_subgraph_mixed(&p, 5.0),
            Err(ShapingError::OmegaBarOutsideRange { .. })
        ));
    }

    #[test]
    fn balanced_minimal_attractive_design_is_pinned() {
        let p = balanced();
        let design = min_edge_subgraph_attractive(&p, 0.1).unwrap();
        assert_eq!(design.count, 9);
        assert_eq!(design.components, 1);
        assert_eq!(design.sources_per_component, vec![3]);
        let expect: Vec<(usize, usize)> = vec![
            (1, 3), (2, 3), (3, 2), (3, 4), (4, 5), (5, 4), (6, 3), (6, 7), (7, 6),
        ];
        assert_eq!(design.links, expect);
    }

    #[test]
    fn solution_json_round_trips_and_validates() {
        let p = balanced();
        let part = classify_edges(&p, 0.1).unwrap();
        let sol = min_energy_coefficients(&p, 0.1, &part, None, 0.01, false).unwrap();
        sol.validate_against(&p).unwrap();

        let s = serde_json::to_string(&sol).unwrap();
        let back: CouplingSolution = serde_json::from_str(&s).unwrap();
        assert_eq!(sol, back);

        let bad = r#"{"omega_bar":0.1,"epsilon":0.01,"alpha":[{"i":1,"j":2,"value":-1.0}],"beta":[]}"#;
        assert!(serde_json::from_str::<CouplingSolution>(bad).is_err());
    }

    #[test]
    fn problem_json_round_trips() {
        let p = balanced();
        let s = serde_json::to_string(&p).unwrap();
        let back: Problem = serde_json::from_str(&s).unwrap();
        assert_eq!(p, back);
        assert_eq!(back.omega_bar_hint(), Some(0.1));
    }
}
