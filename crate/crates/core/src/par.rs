//! Deterministic chunked Monte Carlo over scoped worker threads.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

/// Rounds handled by one chunk; every chunk owns an independent RNG stream.
pub const CHUNK: u64 = 1 << 15;

/// Runs `f(chunk_index, chunk_len)` over `total` items split into fixed chunks and
/// returns the per-chunk results in chunk order, whatever the worker count.
pub fn run_chunked<T, F>(total: u64, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64) -> T + Sync,
{
    let chunks = total.div_ceil(CHUNK);
    let len = |i: u64| (total - i * CHUNK).min(CHUNK);
    let workers = workers.max(1).min(chunks.max(1) as usize);
    if workers == 1 {
        return (0..chunks).map(|i| f(i, len(i))).collect();
    }
    let next = AtomicU64::new(0);
    let out: Mutex<Vec<(u64, T)>> = Mutex::new(Vec::with_capacity(chunks as usize));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= chunks {
                    break;
                }
                let r = f(i, len(i));
                out.lock().expect("worker panicked").push((i, r));
            });
        }
    });
    let mut v = out.into_inner().expect("worker panicked");
    v.sort_by_key(|(i, _)| *i);
    v.into_iter().map(|(_, r)| r).collect()
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
