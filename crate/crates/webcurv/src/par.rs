//! Data-parallel evaluation over independent points.
//!
//! All numerical kernels in this crate are pure, so grids and sample batches
//! can fan out across threads.  With the `parallel` feature (on by default)
//! the map runs on the rayon global pool; without it the same API runs
//! sequentially.  Either way results come back ordered by input index, so
//! reports are deterministic regardless of schedule.

/// Limit the rayon global pool to `jobs` threads.  Call at most once, before
/// any parallel work; later calls (or calls after the pool started) are
/// ignored.  A no-op without the `parallel` feature.
pub fn configure_jobs(jobs: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = jobs;
}

/// Map `f` over `items`, in parallel when the `parallel` feature is enabled.
/// The output order always matches the input order.
pub fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(&f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(&f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let items: Vec<u64> = (0..1000).collect();
        let out = par_map(&items, |&x| x * x);
        for (i, v) in out.iter().enumerate() {
            assert_eq!(*v, (i as u64) * (i as u64));
        }
    }

    #[test]
    fn matches_sequential_float_results_exactly() {
        let items: Vec<f64> = (0..257).map(|i| 0.013 * i as f64).collect();
        let f = |x: &f64| (x.sin().powi(2) + x.exp()).ln();
        let par = par_map(&items, f);
        let seq: Vec<f64> = items.iter().map(f).collect();
        assert_eq!(par, seq);
    }
}
