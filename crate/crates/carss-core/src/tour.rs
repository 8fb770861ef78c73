//! Tours (closed Hamiltonian cycles) and their objective value.

use crate::error::{Error, Result};
use crate::instance::Instance;
use serde::{Deserialize, Serialize};

/// A closed tour: a permutation of `{0..n-1}` plus its cycle length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tour {
    order: Vec<usize>,
    length: f64,
}

impl Tour {
    /// Validate the permutation and compute the cycle length.
    pub fn new(inst: &Instance, order: Vec<usize>) -> Result<Self> {
        let length = tour_length(inst, &order)?;
        Ok(Self { order, length })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn length(&self) -> f64 {
        self.length
    }
}

fn check_permutation(n: usize, order: &[usize]) -> Result<()> {
    if order.len() != n {
        return Err(Error::InvalidTour {
            reason: format!("tour has {} vertices, instance has {n}", order.len()),
        });
    }
    let mut seen = vec![false; n];
    for &v in order {
        if v >= n {
            return Err(Error::InvalidTour {
                reason: format!("vertex {v} out of range"),
            });
        }
        if seen[v] {
            return Err(Error::InvalidTour {
                reason: format!("vertex {v} repeated"),
            });
        }
        seen[v] = true;
    }
    Ok(())
}

/// Closed-cycle length of `order` under the Euclidean metric, including the
/// edge back from the last vertex to the first.
pub fn tour_length(inst: &Instance, order: &[usize]) -> Result<f64> {
    check_permutation(inst.n(), order)?;
    Ok(cycle_length(inst, order))
}

/// Cycle length without permutation validation (callers that already hold a
/// checked `Tour` use this for recomputation).
pub fn cycle_length(inst: &Instance, order: &[usize]) -> f64 {
    let n = order.len();
    let mut total = 0.0;
    for i in 0..n {
        total += inst.dist(order[i], order[(i + 1) % n]);
    }
    total
}
