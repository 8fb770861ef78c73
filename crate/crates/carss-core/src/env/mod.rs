//! The cooperative two-phase game: K agents grow disjoint subpaths for T'
//! steps, then the subpaths and leftover isolated vertices are merged into a
//! single cycle by adding K+|I| edges.

mod merge;
pub mod trace;

pub use merge::{MergeAction, MergeGraph, MergeTracker};

use crate::assignment::{assign_heuristic, candidate_lists, Assignment};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::tour::Tour;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Which end of an agent's subpath a new vertex attaches to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Front,
    Rear,
}

/// One agent's action in the generation phase: attach `vertex` to the
/// chosen end of the agent's subpath.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenAction {
    pub agent: usize,
    pub vertex: usize,
    pub side: Side,
}

/// Game phase. Generation runs for T' joint steps; merging adds K+|I|
/// edges; terminal states hold a Hamiltonian cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Generation,
    Merging,
    Terminal,
}

impl Phase {
    fn name(self) -> &'static str {
        match self {
            Phase::Generation => "generation",
            Phase::Merging => "merging",
            Phase::Terminal => "terminal",
        }
    }
}

/// Number of generation extension steps: `n/K - 2` when K divides n,
/// `floor(n/K) - 1` otherwise. The divisible case stops one step early so
/// at least one isolated vertex always remains for the merge phase.
pub fn t_prime(n: usize, k: usize) -> Result<usize> {
    if k < 2 || 2 * k > n {
        return Err(Error::InvalidAgentCount { k, n });
    }
    Ok(if n.is_multiple_of(k) { n / k - 2 } else { n / k - 1 })
}

/// An agent's subpath with O(1) access to both ends.
#[derive(Debug, Clone)]
pub struct AgentPath {
    verts: VecDeque<usize>,
}

impl AgentPath {
    fn new(start: usize) -> Self {
        let mut verts = VecDeque::new();
        verts.push_back(start);
        Self { verts }
    }

    pub fn front(&self) -> usize {
        *self.verts.front().unwrap()
    }

    pub fn rear(&self) -> usize {
        *self.verts.back().unwrap()
    }

    pub fn len(&self) -> usize {
        self.verts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verts.is_empty() // never true: a path always holds its start
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.verts.iter().copied()
    }

    fn attach(&mut self, vertex: usize, side: Side) {
        match side {
            Side::Front => self.verts.push_front(vertex),
            Side::Rear => self.verts.push_back(vertex),
        }
    }
}

/// Full game state shared by all agents.
#[derive(Debug, Clone)]
pub struct GameState<'a> {
    inst: &'a Instance,
    k: usize,
    t_prime: usize,
    t: usize,
    phase: Phase,
    paths: Vec<AgentPath>,
    visited: Vec<bool>,
    isolated: Vec<usize>,
    merge_edges: Vec<(usize, usize)>,
}

impl<'a> GameState<'a> {
    /// Initialize with one single-vertex path per agent. Start selection
    /// happens here, outside the step counter, so `t` counts only the T'
    /// joint extension steps. When T' = 0 the state opens directly in the
    /// merging phase.
    pub fn init(inst: &'a Instance, k: usize, starts: &[usize]) -> Result<Self> {
        let n = inst.n();
        let tp = t_prime(n, k)?;
        if starts.len() != k {
            return Err(Error::InvalidStart {
                reason: format!("{} starts for {k} agents", starts.len()),
            });
        }
        let mut visited = vec![false; n];
        for &s in starts {
            if s >= n {
                return Err(Error::InvalidStart {
                    reason: format!("vertex {s} out of range"),
                });
            }
            if visited[s] {
                return Err(Error::InvalidStart {
                    reason: format!("vertex {s} appears twice"),
                });
            }
            visited[s] = true;
        }
        let mut state = Self {
            inst,
            k,
            t_prime: tp,
            t: 0,
            phase: Phase::Generation,
            paths: starts.iter().map(|&s| AgentPath::new(s)).collect(),
            visited,
            isolated: Vec::new(),
            merge_edges: Vec::new(),
        };
        if tp == 0 {
            state.enter_merging();
        }
        Ok(state)
    }

    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    pub fn agents(&self) -> usize {
        self.k
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn t_prime(&self) -> usize {
        self.t_prime
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn paths(&self) -> &[AgentPath] {
        &self.paths
    }

    pub fn visited(&self) -> &[bool] {
        &self.visited
    }

    pub fn visited_count(&self) -> usize {
        self.visited.iter().filter(|&&v| v).count()
    }

    pub fn unvisited(&self) -> Vec<usize> {
        (0..self.inst.n()).filter(|&i| !self.visited[i]).collect()
    }

    /// Isolated vertices, populated at the generation/merging switch.
    pub fn isolated(&self) -> &[usize] {
        &self.isolated
    }

    /// Merge edges added so far, as original-vertex pairs.
    pub fn merge_edges(&self) -> &[(usize, usize)] {
        &self.merge_edges
    }

    /// Per-agent (front, rear) endpoint pairs.
    pub fn endpoints(&self) -> Vec<(usize, usize)> {
        self.paths.iter().map(|p| (p.front(), p.rear())).collect()
    }

    /// Per-agent action cap, `ceil(n/K)`.
    pub fn action_cap(&self) -> usize {
        self.inst.n().div_ceil(self.k)
    }

    /// Solve the assignment subproblem for the current state.
    pub fn assignment(&self) -> Result<Assignment> {
        self.expect_phase(Phase::Generation)?;
        assign_heuristic(self.inst, &self.endpoints(), &self.visited)
    }

    fn expect_phase(&self, expected: Phase) -> Result<()> {
        if self.phase != expected {
            return Err(Error::WrongPhase {
                expected: expected.name(),
                actual: self.phase.name(),
            });
        }
        Ok(())
    }

    /// The side of the agent's subpath nearer to `vertex` (ties pick the
    /// front).
    pub fn nearer_side(&self, agent: usize, vertex: usize) -> Side {
        let (f, r) = (self.paths[agent].front(), self.paths[agent].rear());
        if self.inst.dist(vertex, f) <= self.inst.dist(vertex, r) {
            Side::Front
        } else {
            Side::Rear
        }
    }

    /// Per-agent feasible generation actions: the agent's capped candidate
    /// list, each vertex paired with its nearer endpoint side. Lists of
    /// distinct agents are disjoint because the assignment partitions the
    /// unvisited vertices.
    pub fn feasible_gen_actions(
        &self,
        assignment: &Assignment,
        cap: usize,
    ) -> Result<Vec<Vec<GenAction>>> {
        self.expect_phase(Phase::Generation)?;
        let lists = candidate_lists(assignment, cap);
        let mut out = Vec::with_capacity(self.k);
        for (agent, list) in lists.into_iter().enumerate() {
            if list.is_empty() {
                return Err(Error::Infeasible(format!(
                    "agent {agent} has no candidate vertices"
                )));
            }
            out.push(
                list.into_iter()
                    .map(|vertex| GenAction {
                        agent,
                        vertex,
                        side: self.nearer_side(agent, vertex),
                    })
                    .collect(),
            );
        }
        Ok(out)
    }

    /// Apply one joint generation step: every agent extends its subpath by
    /// one vertex. Flips to the merging phase after T' steps.
    pub fn step_generation(&mut self, actions: &[GenAction]) -> Result<()> {
        self.expect_phase(Phase::Generation)?;
        if actions.len() != self.k {
            return Err(Error::InvalidAction(format!(
                "{} actions for {} agents",
                actions.len(),
                self.k
            )));
        }
        let n = self.inst.n();
        let mut claimed = vec![false; n];
        for (slot, a) in actions.iter().enumerate() {
            if a.agent != slot {
                return Err(Error::InvalidAction(format!(
                    "action for agent {} in slot {slot}",
                    a.agent
                )));
            }
            if a.vertex >= n {
                return Err(Error::InvalidAction(format!(
                    "vertex {} out of range",
                    a.vertex
                )));
            }
            if self.visited[a.vertex] {
                return Err(Error::InvalidAction(format!(
                    "vertex {} already visited",
                    a.vertex
                )));
            }
            if claimed[a.vertex] {
                return Err(Error::JointActionConflict { vertex: a.vertex });
            }
            claimed[a.vertex] = true;
        }
        for a in actions {
            self.visited[a.vertex] = true;
            self.paths[a.agent].attach(a.vertex, a.side);
        }
        self.t += 1;
        if self.t == self.t_prime {
            self.enter_merging();
        }
        Ok(())
    }

    fn enter_merging(&mut self) {
        self.isolated = self.unvisited();
        debug_assert!(!self.isolated.is_empty() && self.isolated.len() <= self.k);
        self.phase = Phase::Merging;
    }

    /// Build the endpoint graph at the phase switch. Isolated vertices are
    /// listed in ascending original index.
    pub fn build_merge_graph(&self) -> Result<MergeGraph> {
        self.expect_phase(Phase::Merging)?;
        let fronts: Vec<usize> = self.paths.iter().map(|p| p.front()).collect();
        let rears: Vec<usize> = self.paths.iter().map(|p| p.rear()).collect();
        Ok(MergeGraph::new(&fronts, &rears, &self.isolated))
    }

    /// Apply one chosen merge edge.
    pub fn step_merging(
        &mut self,
        g: &MergeGraph,
        tracker: &mut MergeTracker,
        action: MergeAction,
    ) -> Result<()> {
        self.expect_phase(Phase::Merging)?;
        tracker.apply(g, action)?;
        self.merge_edges.push((g.orig(action.p), g.orig(action.q)));
        Ok(())
    }

    /// Add the forced closing edge and enter the terminal phase.
    pub fn close_tour(
        &mut self,
        g: &MergeGraph,
        tracker: &mut MergeTracker,
    ) -> Result<MergeAction> {
        self.expect_phase(Phase::Merging)?;
        let action = tracker.close(g)?;
        self.merge_edges.push((g.orig(action.p), g.orig(action.q)));
        self.phase = Phase::Terminal;
        Ok(action)
    }

    /// Assemble the Hamiltonian cycle from subpath edges plus merge edges.
    pub fn extract_tour(&self) -> Result<Tour> {
        if self.phase != Phase::Terminal {
            return Err(Error::NotTerminal);
        }
        let n = self.inst.n();
        let mut adj: Vec<Vec<usize>> = vec![Vec::with_capacity(2); n];
        let mut add = |a: usize, b: usize| {
            adj[a].push(b);
            adj[b].push(a);
        };
        for path in &self.paths {
            let verts: Vec<usize> = path.iter().collect();
            for w in verts.windows(2) {
                add(w[0], w[1]);
            }
        }
        for &(a, b) in &self.merge_edges {
            add(a, b);
        }
        if adj.iter().any(|l| l.len() != 2) {
            return Err(Error::InvalidTour {
                reason: "terminal state is not 2-regular".into(),
            });
        }
        let mut order = Vec::with_capacity(n);
        let mut prev = usize::MAX;
        let mut cur = 0usize;
        for _ in 0..n {
            order.push(cur);
            let next = if adj[cur][0] != prev {
                adj[cur][0]
            } else {
                adj[cur][1]
            };
            prev = cur;
            cur = next;
        }
        if cur != 0 {
            return Err(Error::InvalidTour {
                reason: "edges do not close a single cycle".into(),
            });
        }
        Tour::new(self.inst, order)
    }

    /// Reward of the terminal transition: the negated cycle length. All
    /// non-terminal rewards are zero.
    pub fn terminal_reward(&self) -> Result<f64> {
        Ok(-self.extract_tour()?.length())
    }
}
