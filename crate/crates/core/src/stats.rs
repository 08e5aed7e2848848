//! Order statistics with linear interpolation between order statistics
//! (the "type 7" definition).

use crate::real::Real;

/// Quantile at probability `p` in `[0, 1]`. Returns `None` for empty input.
pub fn quantile<T: Real>(values: &[T], p: f64) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("quantile of NaN"));
    Some(quantile_sorted(&sorted, p))
}

/// Quantile of already sorted values.
pub fn quantile_sorted<T: Real>(sorted: &[T], p: f64) -> T {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = T::lit(h - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn median<T: Real>(values: &[T]) -> Option<T> {
    quantile(values, 0.5)
}

pub fn mean<T: Real>(values: &[T]) -> T {
    values.iter().copied().sum::<T>() / T::from_usize_lossy(values.len())
}

/// Sample standard deviation with the `n - 1` divisor.
pub fn sample_sd<T: Real>(values: &[T]) -> T {
    let m = mean(values);
    let ss: T = values.iter().map(|&v| (v - m) * (v - m)).sum();
    (ss / T::from_usize_lossy(values.len() - 1)).sqrt()
}
