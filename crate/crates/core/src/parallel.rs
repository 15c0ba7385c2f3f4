//! Deterministic fork-join helpers built on scoped threads.
//!
//! Work is split into fixed-size chunks assigned by index, and results are
//! always combined in chunk order, so the output (including floating-point
//! reduction order) does not depend on the number of workers or on
//! scheduling. `jobs = 1` runs inline on the caller's thread.

/// Number of items each chunk carries. Fixed so that reduction bracketing is
/// independent of the worker count.
pub const CHUNK: usize = 8;

/// Map `f` over `0..n` in parallel, returning results in index order.
pub fn par_map_indexed<R, F>(jobs: usize, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync,
{
    if n == 0 {
        return Vec::new();
    }
    if jobs <= 1 || n == 1 {
        return (0..n).map(f).collect();
    }
    let n_chunks = n.div_ceil(CHUNK);
    let workers = jobs.min(n_chunks);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = Vec::with_capacity(n);
    slots.resize_with(n, || None);
    let slots_ptr = SendPtr(slots.as_mut_ptr());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let next = &next;
            let f = &f;
            scope.spawn(move || loop {
                let c = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if c >= n_chunks {
                    break;
                }
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(n);
                for i in lo..hi {
                    let r = f(i);
                    // Each index is written exactly once by exactly one worker.
                    unsafe { slots_ptr.write(i, Some(r)) };
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("all slots filled")).collect()
}

/// Parallel map followed by an in-order fold, for gradient-style accumulation.
///
/// `f` produces one partial per chunk (accumulated sequentially inside the
/// chunk); partials are folded left-to-right in chunk order.
pub fn par_chunk_fold<A, F, G>(jobs: usize, n: usize, chunk_eval: F, mut fold: G, init: A) -> A
where
    A: Send,
    F: Fn(std::ops::Range<usize>) -> A + Sync,
    G: FnMut(A, A) -> A,
{
    if n == 0 {
        return init;
    }
    let n_chunks = n.div_ceil(CHUNK);
    let partials: Vec<A> = if jobs <= 1 || n_chunks == 1 {
        (0..n_chunks)
            .map(|c| chunk_eval(c * CHUNK..((c + 1) * CHUNK).min(n)))
            .collect()
    } else {
        par_map_indexed(jobs, n_chunks, |c| chunk_eval(c * CHUNK..((c + 1) * CHUNK).min(n)))
    };
    let mut acc = init;
    for p in partials {
        acc = fold(acc, p);
    }
    acc
}

struct SendPtr<T>(*mut T);
unsafe impl<T> Send for SendPtr<T> {}
unsafe impl<T> Sync for SendPtr<T> {}

impl<T> Clone for SendPtr<T> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<T> Copy for SendPtr<T> {}

impl<T> SendPtr<T> {
    /// Write to `offset`; caller guarantees exclusive access to that slot.
    unsafe fn write(&self, offset: usize, value: T) {
        self.0.add(offset).write(value);
    }
}
