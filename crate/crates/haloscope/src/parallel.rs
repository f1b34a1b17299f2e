//! Deterministic fan-out/fan-in over OS threads.
//!
//! `ordered_map_reduce` applies `map` to each item on a pool of workers and
//! folds the results **in item order**, so the fold sees exactly the same
//! sequence regardless of worker count. With pure `map` and `fold` the
//! output is therefore bit-identical for any `workers ≥ 1`, which the test
//! suite relies on for reproducibility checks.

use std::collections::BTreeMap;
use std::num::NonZeroUsize;
use std::sync::mpsc;
use std::sync::Mutex;

/// Worker count to use by default: the machine's available parallelism.
pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(NonZeroUsize::get)
        .unwrap_or(1)
}

/// Map every item through `map` (possibly on `workers` threads) and fold the
/// outputs in input order. `workers <= 1` runs everything on the caller's
/// thread. Results are reordered before folding, so `fold` observes index
/// order 0, 1, 2, … exactly.
pub fn ordered_map_reduce<I, T, R, A, M, F>(
    items: I,
    workers: usize,
    map: M,
    init: A,
    mut fold: F,
) -> A
where
    I: IntoIterator<Item = T>,
    I::IntoIter: Send,
    T: Send,
    R: Send,
    M: Fn(T) -> R + Sync,
    F: FnMut(A, R) -> A,
{
    if workers <= 1 {
        let mut acc = init;
        for item in items {
            acc = fold(acc, map(item));
        }
        return acc;
    }

    let source = Mutex::new((0u64, items.into_iter()));
    let (tx, rx) = mpsc::sync_channel::<(u64, R)>(workers);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let source = &source;
            let map = &map;
            scope.spawn(move || loop {
                let (index, item) = {
                    let mut guard = source.lock().unwrap();
                    let index = guard.0;
                    match guard.1.next() {
                        Some(item) => {
                            guard.0 += 1;
                            (index, item)
                        }
                        None => return,
                    }
                };
                if tx.send((index, map(item))).is_err() {
                    return;
                }
            });
        }
        drop(tx);

        let mut acc = init;
        let mut next = 0u64;
        let mut pending: BTreeMap<u64, R> = BTreeMap::new();
        for (index, result) in rx {
            pending.insert(index, result);
            while let Some(result) = pending.remove(&next) {
                acc = fold(acc, result);
                next += 1;
            }
        }
        debug_assert!(pending.is_empty());
        acc
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serial_and_parallel_agree_bitwise() {
        let items: Vec<u64> = (0..500).collect();
        let map = |x: u64| (x as f64 + 0.25).sqrt();
        let run = |workers| {
            ordered_map_reduce(items.clone(), workers, map, Vec::new(), |mut acc, r| {
                acc.push(r);
                acc
            })
        };
        let serial = run(1);
        for workers in [2, 3, 4, 8] {
            let parallel = run(workers);
            assert_eq!(serial.len(), parallel.len());
            for (a, b) in serial.iter().zip(&parallel) {
                assert_eq!(a.to_bits(), b.to_bits(), "workers = {workers}");
            }
        }
    }

    #[test]
    fn fold_sees_items_in_order() {
        let order = ordered_map_reduce(
            0..1000u64,
            4,
            |x| x,
            Vec::new(),
            |mut acc, r| {
                acc.push(r);
                acc
            },
        );
        assert_eq!(order, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn empty_input_returns_init() {
        let acc = ordered_map_reduce(std::iter::empty::<u64>(), 4, |x| x, 42u64, |a, b| a + b);
        assert_eq!(acc, 42);
    }

    #[test]
    fn single_item_any_worker_count() {
        for workers in [1, 2, 16] {
            let acc =
                ordered_map_reduce(std::iter::once(7u64), workers, |x| x * 2, 0u64, |a, b| a + b);
            assert_eq!(acc, 14);
        }
    }

    #[test]
    fn default_workers_positive() {
        assert!(default_workers() >= 1);
    }
}
