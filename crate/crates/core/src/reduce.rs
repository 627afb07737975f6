//! Order-fixed reductions and parallel maps.
//!
//! Every reduction goes through [`pairwise`], whose association tree depends
//! only on the slice length, so results are bit-identical for any number of
//! worker threads.

use rayon::prelude::*;
use std::ops::Add;

const LEAF: usize = 16;

pub fn pairwise<T: Copy + Default + Add<Output = T>>(xs: &[T]) -> T {
    if xs.len() <= LEAF {
        let mut acc = T::default();
        for &x in xs {
            acc = acc + x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise(&xs[..mid]) + pairwise(&xs[mid..])
}

/// Ordered parallel map over `0..n`.
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Parallel map followed by a pairwise reduction.
pub fn par_sum<T, F>(n: usize, f: F) -> T
where
    T: Send + Copy + Default + Add<Output = T>,
    F: Fn(usize) -> T + Sync + Send,
{
    pairwise(&par_map(n, f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_is_exact_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise(&xs), 499500.0);
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let f = |i: usize| ((i as f64) * 0.37).sin() / (1.0 + i as f64);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| par_sum(10_000, f));
        let b = four.install(|| par_sum(10_000, f));
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
