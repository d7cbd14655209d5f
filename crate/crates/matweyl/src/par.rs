//! Data-parallel mapping helpers.
//!
//! Sweeps over spectral points, batch matrix-equation solves, and model
//! batches are embarrassingly parallel: every item is a pure function of
//! immutable inputs. With the `parallel` feature (default) they run on the
//! rayon pool (`RAYON_NUM_THREADS` controls the width); without it the same
//! call is a plain sequential map, which the benchmarks use as the baseline.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map over a slice, in parallel when the `parallel` feature is enabled.
pub fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Always-sequential map with the same signature as [`par_map`].
pub fn seq_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_and_seq_agree() {
        let xs: Vec<u64> = (0..257).collect();
        let a = par_map(&xs, |x| x * x + 1);
        let b = seq_map(&xs, |x| x * x + 1);
        assert_eq!(a, b);
    }
}
