//! The reduced endpoint graph for the merging phase and the bookkeeping
//! that tracks fused subpaths while edges are added.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// An edge choice in the merging phase. `p` is forced (the free end of the
/// chain under construction), `q` is the selected endpoint. Both are indices
/// into the merge graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeAction {
    pub p: usize,
    pub q: usize,
}

/// Graph over the `2(K+|I|)` subpath endpoints.
///
/// Index layout: `[f^1..f^K, If_1..If_|I|, r^1..r^K, Ir_1..Ir_|I|]`, so the
/// opposite end of any endpoint's subpath sits `K+|I|` positions away.
/// Same-subpath (partner) edges are the forbidden set. For isolated vertices
/// both endpoint slots map to the same original vertex.
#[derive(Debug, Clone)]
pub struct MergeGraph {
    half: usize,
    endpoint_orig: Vec<usize>,
}

impl MergeGraph {
    pub(crate) fn new(fronts: &[usize], rears: &[usize], isolated: &[usize]) -> Self {
        debug_assert_eq!(fronts.len(), rears.len());
        let half = fronts.len() + isolated.len();
        let mut endpoint_orig = Vec::with_capacity(2 * half);
        endpoint_orig.extend_from_slice(fronts);
        endpoint_orig.extend_from_slice(isolated);
        endpoint_orig.extend_from_slice(rears);
        endpoint_orig.extend_from_slice(isolated);
        Self {
            half,
            endpoint_orig,
        }
    }

    /// Number of endpoints, `2(K+|I|)`.
    pub fn size(&self) -> usize {
        2 * self.half
    }

    /// `K + |I|`: the number of subpaths to connect, counting isolated
    /// vertices as length-0 subpaths.
    pub fn half(&self) -> usize {
        self.half
    }

    /// The opposite end of the same original subpath.
    pub fn partner(&self, i: usize) -> usize {
        if i < self.half {
            i + self.half
        } else {
            i - self.half
        }
    }

    /// Original-graph vertex behind endpoint `i`.
    pub fn orig(&self, i: usize) -> usize {
        self.endpoint_orig[i]
    }

    /// Same-subpath edges are excluded from the merge graph.
    pub fn forbidden(&self, i: usize, j: usize) -> bool {
        self.partner(i) == j
    }
}

/// Union-find over endpoints with per-component end pointers, so "the other
/// end of the merged subpath" is answered in near-constant time as
/// subpaths fuse.
#[derive(Debug, Clone)]
pub struct MergeTracker {
    parent: Vec<usize>,
    rank: Vec<u8>,
    ends: Vec<[usize; 2]>,
    consumed: Vec<bool>,
    q_start: usize,
    q_prev: usize,
    edges_done: usize,
}

impl MergeTracker {
    /// Start a merge rollout from endpoint `q_start`.
    pub fn new(g: &MergeGraph, q_start: usize) -> Result<Self> {
        let size = g.size();
        if q_start >= size {
            return Err(Error::InvalidAction(format!(
                "merge start {q_start} out of range for {size} endpoints"
            )));
        }
        let mut t = Self {
            parent: (0..size).collect(),
            rank: vec![0; size],
            ends: (0..size).map(|i| [i, g.partner(i)]).collect(),
            consumed: vec![false; size],
            q_start,
            q_prev: q_start,
            edges_done: 0,
        };
        // Each original subpath starts as one component with its two ends.
        for i in 0..g.half() {
            t.union(i, g.partner(i));
        }
        t.consumed[q_start] = true;
        Ok(t)
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        let (hi, lo) = if self.rank[ra] >= self.rank[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[lo] = hi;
        if self.rank[hi] == self.rank[lo] {
            self.rank[hi] += 1;
        }
        hi
    }

    pub fn q_start(&self) -> usize {
        self.q_start
    }

    pub fn q_prev(&self) -> usize {
        self.q_prev
    }

    pub fn is_consumed(&self, i: usize) -> bool {
        self.consumed[i]
    }

    pub fn edges_done(&self) -> usize {
        self.edges_done
    }

    /// True once only the forced closing edge remains.
    pub fn is_final(&self, g: &MergeGraph) -> bool {
        self.edges_done == g.half() - 1
    }

    /// The free end of the chain containing `q_prev`: the component's one
    /// unconsumed end pointer.
    pub fn expected_p(&mut self) -> usize {
        let root = self.find(self.q_prev);
        let [a, b] = self.ends[root];
        if !self.consumed[a] {
            debug_assert!(self.consumed[b] || a == b);
            a
        } else {
            b
        }
    }

    /// All feasible actions at the current step: `(p, q)` for every
    /// endpoint `q` that is unconsumed and outside `p`'s merged subpath.
    pub fn feasible_actions(&mut self, g: &MergeGraph) -> Vec<MergeAction> {
        let p = self.expected_p();
        let p_root = self.find(p);
        (0..g.size())
            .filter(|&q| !self.consumed[q] && self.find(q) != p_root)
            .map(|q| MergeAction { p, q })
            .collect()
    }

    /// Apply a non-final merge edge.
    pub fn apply(&mut self, g: &MergeGraph, action: MergeAction) -> Result<()> {
        if self.is_final(g) {
            return Err(Error::InvalidAction(
                "only the forced closing edge remains".into(),
            ));
        }
        let p = self.expected_p();
        if action.p != p {
            return Err(Error::InvalidAction(format!(
                "expected p={p}, action has p={}",
                action.p
            )));
        }
        let q = action.q;
        if q >= g.size() || self.consumed[q] || self.find(q) == self.find(p) {
            return Err(Error::InvalidAction(format!("endpoint {q} not feasible")));
        }
        let other_p = self.other_end(p);
        let other_q = self.other_end(q);
        self.consumed[p] = true;
        self.consumed[q] = true;
        let root = self.union(p, q);
        self.ends[root] = [other_p, other_q];
        self.q_prev = q;
        self.edges_done += 1;
        Ok(())
    }

    /// The forced closing edge `(p, q_start)` once all subpaths form one
    /// chain. Returns the action for the caller to record.
    pub fn close(&mut self, g: &MergeGraph) -> Result<MergeAction> {
        if !self.is_final(g) {
            return Err(Error::InvalidAction(format!(
                "{} of {} merge edges placed, cannot close yet",
                self.edges_done,
                g.half()
            )));
        }
        let p = self.expected_p();
        self.consumed[p] = true;
        self.edges_done += 1;
        Ok(MergeAction {
            p,
            q: self.q_start,
        })
    }

    fn other_end(&mut self, i: usize) -> usize {
        let root = self.find(i);
        let [a, b] = self.ends[root];
        if a == i {
            b
        } else {
            a
        }
    }
}
