//! Reproducible reductions.
//!
//! Sums split at fixed midpoints regardless of thread count, so parallel and
//! sequential runs round identically.

const LEAF: usize = 64;
const PAR_CUTOFF: usize = 1 << 14;

/// Pairwise sum of `f(i)` for `i` in `0..n`.
pub fn pairwise_sum_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    fn rec<F: Fn(usize) -> f64 + Sync>(lo: usize, hi: usize, f: &F) -> f64 {
        let len = hi - lo;
        if len <= LEAF {
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            return acc;
        }
        let mid = lo + len / 2;
        if len >= PAR_CUTOFF {
            let (a, b) = rayon::join(|| rec(lo, mid, f), || rec(mid, hi, f));
            a + b
        } else {
            rec(lo, mid, f) + rec(mid, hi, f)
        }
    }
    if n == 0 {
        return 0.0;
    }
    rec(0, n, &f)
}

pub fn pairwise_sum(xs: &[f64]) -> f64 {
    pairwise_sum_by(xs.len(), |i| xs[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_integers() {
        let xs: Vec<f64> = (1..=100_000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 100_000.0 * 100_001.0 / 2.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn independent_of_thread_pool() {
        let xs: Vec<f64> = (0..70_001).map(|i| ((i as f64) * 0.37).sin() * 1e-3).collect();
        let a = pairwise_sum(&xs);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| pairwise_sum(&xs));
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
