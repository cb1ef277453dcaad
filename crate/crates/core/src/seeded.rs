//! Deterministic multiscale interval system.
//!
//! Level `k = 1..=ceil(log2 n)` uses the scale `r_k = n 2^{-k}` and the
//! intervals `(floor((i-1) r_k), ceil((i+1) r_k)]` for `i = 1..2^k - 1`.
//! Bounds are computed in exact integer arithmetic.

use std::collections::HashSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeededInterval {
    /// Left bound, exclusive.
    pub a: usize,
    /// Right bound, inclusive.
    pub b: usize,
    /// Coarsest scale index that produced this interval.
    pub level: u32,
}

impl SeededInterval {
    #[inline]
    pub fn len(&self) -> usize {
        self.b - self.a
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.b == self.a
    }

    /// Whether `t` lies in `(a, b]`.
    #[inline]
    pub fn contains(&self, t: usize) -> bool {
        self.a < t && t <= self.b
    }
}

/// Deduplicated seeded intervals, sorted by length and then left bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalSet {
    n: usize,
    intervals: Vec<SeededInterval>,
}

impl IntervalSet {
    pub fn generate(n: usize) -> Self {
        let levels = ceil_log2(n);
        let mut seen = HashSet::new();
        let mut intervals = Vec::new();
        for k in 1..=levels {
            let denom = 1usize << k;
            for i in 1..denom {
                let a = ((i - 1) * n) >> k;
                let b = ((i + 1) * n).div_ceil(denom).min(n);
                if seen.insert((a, b)) {
                    intervals.push(SeededInterval { a, b, level: k });
                }
            }
        }
        intervals.sort_by_key(|iv| (iv.len(), iv.a));
        Self { n, intervals }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SeededInterval> {
        self.intervals.iter()
    }

    pub fn as_slice(&self) -> &[SeededInterval] {
        &self.intervals
    }
}

impl<'a> IntoIterator for &'a IntervalSet {
    type Item = &'a SeededInterval;
    type IntoIter = std::slice::Iter<'a, SeededInterval>;

    fn into_iter(self) -> Self::IntoIter {
        self.iter()
    }
}

/// Shorthand for [`IntervalSet::generate`].
pub fn generate(n: usize) -> IntervalSet {
    IntervalSet::generate(n)
}

fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}
