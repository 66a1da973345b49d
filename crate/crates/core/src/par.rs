//! Data-parallel loop helpers.
//!
//! Every hot loop in the crate goes through these functions. With the
//! `parallel` feature they dispatch to rayon; without it they run the same
//! closures sequentially. Floating-point reductions are always evaluated as a
//! fixed sequence of chunk partials summed left to right, so results do not
//! depend on the feature flag or on the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Name of the active backend, used to label benchmarks and manifests.
pub const MODE: &str = if cfg!(feature = "parallel") {
    "rayon"
} else {
    "sequential"
};

const REDUCE_CHUNK: usize = 4096;
const ELEMENT_CHUNK: usize = 2048;

pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
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

/// Calls `f(global_index, &mut item)` for every element.
pub fn for_each_indexed<T, F>(data: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    let body = |(c, chunk): (usize, &mut [T])| {
        let base = c * ELEMENT_CHUNK;
        for (i, v) in chunk.iter_mut().enumerate() {
            f(base + i, v);
        }
    };
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(ELEMENT_CHUNK).enumerate().for_each(body);
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(ELEMENT_CHUNK).enumerate().for_each(body);
    }
}

/// Calls `f(chunk_index, chunk)` on consecutive chunks of `chunk` elements.
pub fn for_each_chunk<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

pub fn for_each_owned<T, F>(items: Vec<T>, f: F)
where
    T: Send,
    F: Fn(T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().for_each(f);
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().for_each(f);
    }
}

/// Deterministic sum of `f(i)` for `i in 0..n`.
pub fn sum_range<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(REDUCE_CHUNK);
    let partials = map_range(chunks, |c| {
        let lo = c * REDUCE_CHUNK;
        let hi = (lo + REDUCE_CHUNK).min(n);
        let mut acc = 0.0;
        for i in lo..hi {
            acc += f(i);
        }
        acc
    });
    partials.iter().sum()
}

/// Maximum of `f(i)`; `-inf` for an empty range. NaN inputs propagate.
pub fn max_range<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(REDUCE_CHUNK);
    let partials = map_range(chunks, |c| {
        let lo = c * REDUCE_CHUNK;
        let hi = (lo + REDUCE_CHUNK).min(n);
        let mut acc = f64::NEG_INFINITY;
        for i in lo..hi {
            acc = nan_max(acc, f(i));
        }
        acc
    });
    partials.into_iter().fold(f64::NEG_INFINITY, nan_max)
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_is_chunk_order_independent_of_backend() {
        let n = 3 * REDUCE_CHUNK + 17;
        let f = |i: usize| ((i as f64) * 0.37).sin() * 1e-3 + 1.0 / (1.0 + i as f64);
        let got = sum_range(n, f);
        let mut expected = 0.0;
        for c in 0..n.div_ceil(REDUCE_CHUNK) {
            let mut acc = 0.0;
            for i in c * REDUCE_CHUNK..((c + 1) * REDUCE_CHUNK).min(n) {
                acc += f(i);
            }
            expected += acc;
        }
        assert_eq!(got.to_bits(), expected.to_bits());
    }

    #[test]
    fn max_propagates_nan() {
        assert!(max_range(10, |i| if i == 7 { f64::NAN } else { i as f64 }).is_nan());
        assert_eq!(max_range(10, |i| i as f64), 9.0);
        assert_eq!(max_range(0, |i| i as f64), f64::NEG_INFINITY);
    }

    #[test]
    fn indexed_visits_every_element_once() {
        let mut v = vec![0usize; 5000];
        for_each_indexed(&mut v, |i, x| *x += i);
        assert!(v.iter().enumerate().all(|(i, &x)| x == i));
    }
}
