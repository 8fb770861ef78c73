//! Euclidean TSP instances on the unit square, seeded generation, and the
//! optimization-gap metric.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A 2-D point.
pub type Point = [f64; 2];

/// Euclidean distance between two points.
///
/// Callers must pass finite coordinates; [`Instance`] construction enforces
/// this at the boundary, so interior code can use the unchecked fast path.
#[inline]
pub fn distance(a: Point, b: Point) -> f64 {
    debug_assert!(a.iter().chain(b.iter()).all(|c| c.is_finite()));
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Euclidean distance with finiteness validation.
pub fn checked_distance(a: Point, b: Point) -> Result<f64> {
    if a.iter().chain(b.iter()).any(|c| !c.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    Ok(distance(a, b))
}

/// Optimization gap in percent: `(obj / bks - 1) * 100`.
pub fn gap(obj: f64, bks: f64) -> Result<f64> {
    if bks.is_nan() || bks <= 0.0 {
        return Err(Error::InvalidBaseline { bks });
    }
    Ok((obj / bks - 1.0) * 100.0)
}

/// A 64-bit seed with a documented splitting rule.
///
/// Child seeds are derived with two rounds of SplitMix64 so that independent
/// workers (one per instance, batch, or rollout) get decorrelated streams
/// while the whole pipeline stays reproducible from a single root seed:
/// `child = splitmix64(parent ^ splitmix64(tag))`, folding tags left to right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Seed {
    /// Derive an independent child seed from a list of tags.
    pub fn derive(self, tags: &[u64]) -> Seed {
        let mut v = self.0;
        for &t in tags {
            v = splitmix64(v ^ splitmix64(t));
        }
        Seed(v)
    }

    /// A deterministic RNG for this seed. ChaCha8 keeps the stream identical
    /// across platforms and library versions.
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// Minimum vertex count: the game needs K >= 2 agents with K <= n/2.
pub const MIN_VERTICES: usize = 4;

/// Largest n for which a cached distance matrix may be built.
pub const MATRIX_CAP: usize = 2000;

/// A TSP instance: n points with 2-D coordinates under the Euclidean metric.
///
/// Immutable after construction and safe to share across workers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    id: String,
    coords: Vec<Point>,
    unit_square: bool,
}

impl Instance {
    /// Build an instance, validating finiteness and the minimum size.
    /// `unit_square` is recorded so loaded instances outside `[0,1]^2` are
    /// distinguishable from generated ones.
    pub fn new(id: impl Into<String>, coords: Vec<Point>) -> Result<Self> {
        let n = coords.len();
        if n < MIN_VERTICES {
            return Err(Error::InvalidSize {
                n,
                min: MIN_VERTICES,
            });
        }
        if coords.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        let unit_square = coords
            .iter()
            .flatten()
            .all(|&c| (0.0..=1.0).contains(&c));
        Ok(Self {
            id: id.into(),
            coords,
            unit_square,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> Point {
        self.coords[i]
    }

    /// Whether every coordinate lies in `[0,1]`.
    pub fn in_unit_square(&self) -> bool {
        self.unit_square
    }

    /// On-demand distance between vertices `i` and `j`.
    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        distance(self.coords[i], self.coords[j])
    }

    /// Cached n x n distance matrix for repeated lookups. Refused above
    /// [`MATRIX_CAP`] so the default path never allocates O(n^2).
    pub fn distance_matrix(&self) -> Result<DistanceMatrix> {
        let n = self.n();
        if n > MATRIX_CAP {
            return Err(Error::TooLarge(format!(
                "distance matrix for n={n} exceeds cap {MATRIX_CAP}"
            )));
        }
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.dist(i, j);
                d[i * n + j] = w;
                d[j * n + i] = w;
            }
        }
        Ok(DistanceMatrix { n, d })
    }
}

/// Dense symmetric distance matrix (optional cached mode).
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Generate `count` instances of size `n` with coordinates i.i.d. uniform on
/// the unit square. Instance `i` draws from the child seed `derive([i])`, so
/// streams are identical whether instances are generated serially or by
/// parallel workers.
pub fn generate_instances(n: usize, count: usize, seed: Seed) -> Result<Vec<Instance>> {
    if n < MIN_VERTICES {
        return Err(Error::InvalidSize {
            n,
            min: MIN_VERTICES,
        });
    }
    if count == 0 {
        return Err(Error::InvalidSize { n: 0, min: 1 });
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = seed.derive(&[i as u64]).rng();
        let coords: Vec<Point> = (0..n)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        out.push(Instance::new(format!("u{n}-s{}-{i}", seed.0), coords)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_345() {
        assert_eq!(distance([0.0, 0.0], [3.0, 4.0]), 5.0);
    }

    #[test]
    fn distance_identity() {
        assert_eq!(distance([0.5, 0.5], [0.5, 0.5]), 0.0);
    }

    #[test]
    fn distance_sqrt2() {
        assert!((distance([0.0, 0.0], [1.0, 1.0]) - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn distance_rejects_non_finite() {
        assert!(matches!(
            checked_distance([f64::NAN, 0.0], [0.0, 0.0]),
            Err(Error::NonFiniteInput)
        ));
        assert!(matches!(
            checked_distance([0.0, 0.0], [f64::INFINITY, 0.0]),
            Err(Error::NonFiniteInput)
        ));
    }

    #[test]
    fn gap_examples() {
        assert_eq!(gap(10.71, 10.71).unwrap(), 0.0);
        assert!((gap(1.1, 1.0).unwrap() - 10.0).abs() < 1e-9);
        // Table prints 22.20% from unrounded values; rounded inputs give 22.09.
        assert!((gap(9.45, 7.74).unwrap() - 22.093023255813954).abs() < 1e-9);
        assert!(matches!(gap(1.0, 0.0), Err(Error::InvalidBaseline { .. })));
        assert!(matches!(gap(1.0, -2.0), Err(Error::InvalidBaseline { .. })));
    }

    #[test]
    fn generate_respects_bounds_and_count() {
        let insts = generate_instances(100, 100, Seed(7)).unwrap();
        assert_eq!(insts.len(), 100);
        for inst in &insts {
            assert_eq!(inst.n(), 100);
            assert!(inst.in_unit_square());
            assert!(inst
                .coords()
                .iter()
                .flatten()
                .all(|&c| (0.0..=1.0).contains(&c)));
        }
    }

    #[test]
    fn generate_minimum_size() {
        let insts = generate_instances(4, 1, Seed(0)).unwrap();
        assert_eq!(insts.len(), 1);
        assert_eq!(insts[0].n(), 4);
        assert!(matches!(
            generate_instances(3, 1, Seed(0)),
            Err(Error::InvalidSize { .. })
        ));
    }

    #[test]
    fn generate_is_deterministic() {
        let a = generate_instances(16, 5, Seed(42)).unwrap();
        let b = generate_instances(16, 5, Seed(42)).unwrap();
        assert_eq!(a, b);
        let c = generate_instances(16, 5, Seed(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn seed_derivation_is_order_sensitive() {
        let s = Seed(9);
        assert_ne!(s.derive(&[1, 2]), s.derive(&[2, 1]));
        assert_eq!(s.derive(&[1, 2]), s.derive(&[1]).derive(&[2]));
    }

    #[test]
    fn matrix_agrees_with_on_demand() {
        let inst = &generate_instances(20, 1, Seed(3)).unwrap()[0];
        let m = inst.distance_matrix().unwrap();
        for i in 0..20 {
            for j in 0..20 {
                assert_eq!(m.dist(i, j), inst.dist(i, j));
            }
        }
    }
}
