//! Bounded parallel map whose output order matches input order.

use rayon::prelude::*;
use rayon::ThreadPoolBuilder;

/// Applies `f` to every item with at most `max_in_flight` concurrent calls.
/// Results come back in input order whatever order the calls finish in.
pub fn ordered_map<T, R, F>(items: &[T], max_in_flight: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let threads = max_in_flight.max(1);
    if threads == 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    match ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(e) => {
            tracing::warn!("thread pool unavailable ({e}); running sequentially");
            items.iter().map(f).collect()
        }
    }
}
