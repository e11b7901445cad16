//! Deterministic fork-join over utterances.
//!
//! Results are collected in input order and reduced on the caller's thread,
//! so the outcome is bit-identical for any worker count.

/// Map `f` over `items`, using up to `jobs` worker threads. Output order
/// matches input order regardless of scheduling.
pub fn parallel_map<T, U, F>(items: &[T], jobs: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs == 1 || items.len() < 2 {
        return items.iter().map(&f).collect();
    }

    let chunk = items.len().div_ceil(jobs);
    let mut chunks: Vec<Vec<U>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| scope.spawn(|| part.iter().map(&f).collect::<Vec<U>>()))
            .collect();
        for h in handles {
            chunks.push(h.join().expect("worker panicked"));
        }
    });
    chunks.into_iter().flatten().collect()
}
