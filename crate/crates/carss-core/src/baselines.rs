//! Classical reference solvers: insertion constructions, 2-opt local
//! search, nearest neighbor, and exact Held-Karp / brute-force oracles.

use crate::error::{Error, Result};
use crate::instance::{Instance, Seed};
use crate::tour::{cycle_length, Tour};
use rand::Rng;
use std::time::{Duration, Instant};

/// City-selection rule for the insertion construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertionRule {
    Nearest,
    Farthest,
    Random,
}

impl InsertionRule {
    pub fn tag(self) -> &'static str {
        match self {
            InsertionRule::Nearest => "ni",
            InsertionRule::Farthest => "fi",
            InsertionRule::Random => "ri",
        }
    }
}

/// A solved instance with provenance.
#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub tour: Tour,
    pub algorithm: String,
    pub wall: Duration,
}

impl BaselineResult {
    /// Time a solver invocation and tag its output.
    pub fn run(algorithm: impl Into<String>, f: impl FnOnce() -> Result<Tour>) -> Result<Self> {
        let start = Instant::now();
        let tour = f()?;
        Ok(Self {
            tour,
            algorithm: algorithm.into(),
            wall: start.elapsed(),
        })
    }
}

/// Extreme pair used to seed the deterministic insertion variants: the two
/// mutually farthest points for farthest insertion, the two mutually
/// nearest for nearest insertion. Ties pick the smallest index pair.
fn extreme_pair(inst: &Instance, farthest: bool) -> (usize, usize) {
    let n = inst.n();
    let mut best = (0usize, 1usize);
    let mut best_d = inst.dist(0, 1);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = inst.dist(i, j);
            if (farthest && d > best_d) || (!farthest && d < best_d) {
                best = (i, j);
                best_d = d;
            }
        }
    }
    best
}

/// Standard insertion construction: seed a two-city subtour, repeatedly
/// select the rule's next city, and insert it at the position that
/// increases the tour length least.
pub fn insertion(inst: &Instance, rule: InsertionRule, seed: Seed) -> Result<Tour> {
    let n = inst.n();
    if n < 3 {
        return Err(Error::InvalidSize { n, min: 3 });
    }
    let mut rng = seed.rng();
    let (a, b) = match rule {
        InsertionRule::Farthest => extreme_pair(inst, true),
        InsertionRule::Nearest => extreme_pair(inst, false),
        InsertionRule::Random => {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            (a, b)
        }
    };
    let mut tour = vec![a, b];
    let mut in_tour = vec![false; n];
    in_tour[a] = true;
    in_tour[b] = true;
    // nearest-tour-vertex distance per unvisited city, updated incrementally
    let mut near: Vec<f64> = (0..n)
        .map(|i| inst.dist(i, a).min(inst.dist(i, b)))
        .collect();

    for _ in 2..n {
        let next = match rule {
            InsertionRule::Nearest => select_by(&in_tour, &near, |d, best| d < best),
            InsertionRule::Farthest => select_by(&in_tour, &near, |d, best| d > best),
            InsertionRule::Random => {
                let remaining: Vec<usize> =
                    (0..n).filter(|&i| !in_tour[i]).collect();
                remaining[rng.random_range(0..remaining.len())]
            }
        };
        // cheapest insertion position
        let mut best_pos = 0;
        let mut best_delta = f64::INFINITY;
        for pos in 0..tour.len() {
            let u = tour[pos];
            let v = tour[(pos + 1) % tour.len()];
            let delta = inst.dist(u, next) + inst.dist(next, v) - inst.dist(u, v);
            if delta < best_delta {
                best_delta = delta;
                best_pos = pos;
            }
        }
        tour.insert(best_pos + 1, next);
        in_tour[next] = true;
        for i in 0..n {
            if !in_tour[i] {
                near[i] = near[i].min(inst.dist(i, next));
            }
        }
    }
    Tour::new(inst, tour)
}

fn select_by(in_tour: &[bool], near: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = usize::MAX;
    let mut best_d = f64::NAN;
    for (i, &d) in near.iter().enumerate() {
        if in_tour[i] {
            continue;
        }
        if best == usize::MAX || better(d, best_d) {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Greedy nearest-neighbor tour from a start vertex (ties pick the smallest
/// index). Used as the documented 2-opt initialization.
pub fn nearest_neighbor(inst: &Instance, start: usize) -> Result<Tour> {
    let n = inst.n();
    if start >= n {
        return Err(Error::InvalidAction(format!("start {start} out of range")));
    }
    let mut order = Vec::with_capacity(n);
    let mut used = vec![false; n];
    let mut cur = start;
    used[cur] = true;
    order.push(cur);
    for _ in 1..n {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for (i, &taken) in used.iter().enumerate() {
            if !taken && inst.dist(cur, i) < best_d {
                best = i;
                best_d = inst.dist(cur, i);
            }
        }
        used[best] = true;
        order.push(best);
        cur = best;
    }
    Tour::new(inst, order)
}

/// First-improvement 2-opt with a fixed scan order (i ascending, j
/// ascending, restart after every accepted exchange) until local optimality
/// or the accepted-move budget runs out. Never increases the length.
pub fn two_opt(inst: &Instance, initial: &Tour, budget: Option<u64>) -> Result<Tour> {
    let n = inst.n();
    let mut order = initial.order().to_vec();
    let mut moves = 0u64;
    'outer: loop {
        if let Some(b) = budget {
            if moves >= b {
                break;
            }
        }
        for i in 0..(n - 1) {
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue; // both edges share vertex order[0]
                }
                let (a, b) = (order[i], order[i + 1]);
                let (c, d) = (order[j], order[(j + 1) % n]);
                let delta =
                    inst.dist(a, c) + inst.dist(b, d) - inst.dist(a, b) - inst.dist(c, d);
                if delta < -1e-12 {
                    order[(i + 1)..=j].reverse();
                    moves += 1;
                    continue 'outer;
                }
            }
        }
        break;
    }
    let tour = Tour::new(inst, order)?;
    debug_assert!(tour.length() <= initial.length() + 1e-9);
    Ok(tour)
}

/// Size cap for Held-Karp (the 2^n * n table stops being desk-sized).
pub const HELD_KARP_MAX: usize = 18;
/// Size cap for the brute-force oracle.
pub const BRUTE_FORCE_MAX: usize = 10;

/// Exact dynamic program over vertex subsets (Held-Karp), n <= 18. The
/// inner loop uses the cached distance matrix.
pub fn held_karp(inst: &Instance) -> Result<Tour> {
    let n = inst.n();
    if n > HELD_KARP_MAX {
        return Err(Error::TooLarge(format!(
            "held-karp limited to n <= {HELD_KARP_MAX}, got {n}"
        )));
    }
    let d = inst.distance_matrix()?;
    // Vertex 0 is the fixed anchor; masks range over vertices 1..n.
    let m = n - 1;
    let full = 1usize << m;
    let mut dp = vec![f64::INFINITY; full * m];
    let mut parent = vec![u8::MAX; full * m];
    for j in 0..m {
        dp[(1 << j) * m + j] = d.dist(0, j + 1);
    }
    for mask in 1..full {
        for j in 0..m {
            if mask & (1 << j) == 0 {
                continue;
            }
            let cur = dp[mask * m + j];
            if !cur.is_finite() {
                continue;
            }
            for k in 0..m {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let next_mask = mask | (1 << k);
                let cand = cur + d.dist(j + 1, k + 1);
                if cand < dp[next_mask * m + k] {
                    dp[next_mask * m + k] = cand;
                    parent[next_mask * m + k] = j as u8;
                }
            }
        }
    }
    let last_mask = full - 1;
    let (mut best_j, mut best) = (0usize, f64::INFINITY);
    for j in 0..m {
        let cand = dp[last_mask * m + j] + d.dist(j + 1, 0);
        if cand < best {
            best = cand;
            best_j = j;
        }
    }
    let mut order = vec![0usize; n];
    let mut mask = last_mask;
    let mut j = best_j;
    for pos in (1..n).rev() {
        order[pos] = j + 1;
        let pj = parent[mask * m + j];
        mask &= !(1 << j);
        if pj == u8::MAX {
            break;
        }
        j = pj as usize;
    }
    Tour::new(inst, order)
}

/// Exhaustive search over all tours through vertex 0, n <= 10.
pub fn brute_force(inst: &Instance) -> Result<Tour> {
    let n = inst.n();
    if n > BRUTE_FORCE_MAX {
        return Err(Error::TooLarge(format!(
            "brute force limited to n <= {BRUTE_FORCE_MAX}, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut best_order = order.clone();
    let mut best = cycle_length(inst, &order);
    // Heap's algorithm over positions 1..n keeps vertex 0 fixed.
    let mut c = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if c[i] < i - 1 {
            if (i - 1) % 2 == 0 {
                order.swap(1, i);
            } else {
                order.swap(c[i] + 1, i);
            }
            let len = cycle_length(inst, &order);
            if len < best {
                best = len;
                best_order = order.clone();
            }
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Tour::new(inst, best_order)
}
