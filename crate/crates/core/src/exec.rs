//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper returns results in input order, so the output of a parallel
//! run is bit-identical to the sequential one. Without the `parallel` feature
//! [`Execution::Parallel`] silently runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How the data-parallel inner loops are scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be spread over the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Sizes the global worker pool. Only the first call has an effect; later
/// calls (or builds without the `parallel` feature) return `false`.
pub fn configure_threads(jobs: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        false
    }
}

pub(crate) fn map_slice<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Order-preserving map over `0..n` where each worker owns one scratch value built by `init`.
pub(crate) fn map_range_init<S, R, I, F>(exec: Execution, n: usize, init: I, f: F) -> Vec<R>
where
    R: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map_init(&init, |s, i| f(s, i)).collect();
    }
    let _ = exec;
    let mut scratch = init();
    (0..n).map(|i| f(&mut scratch, i)).collect()
}

/// Smallest index in `0..n` satisfying `pred`.
pub(crate) fn find_first_index<F>(exec: Execution, n: u64, pred: F) -> Option<u64>
where
    F: Fn(u64) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().find_first(|&i| pred(i));
    }
    let _ = exec;
    (0..n).find(|&i| pred(i))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_on_order() {
        let items: Vec<u64> = (0..1000).collect();
        let a = map_slice(Execution::Sequential, &items, |x| x * 3);
        let b = map_slice(Execution::Parallel, &items, |x| x * 3);
        assert_eq!(a, b);
        let c = map_range_init(Execution::Parallel, 100, Vec::<usize>::new, |s, i| {
            s.push(i);
            i * 2
        });
        assert_eq!(c, (0..100).map(|i| i * 2).collect::<Vec<_>>());
    }

    #[test]
    fn find_first_returns_lowest_index() {
        for exec in [Execution::Sequential, Execution::Parallel] {
            assert_eq!(find_first_index(exec, 10_000, |i| i % 977 == 976), Some(976));
            assert_eq!(find_first_index(exec, 10, |_| false), None);
        }
    }
}
