//! Small floating-point helpers shared by every stage.
//!
//! Summation order is fixed so that results do not depend on how work was
//! split across threads.

/// Pairwise (cascade) summation in a fixed order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Arithmetic mean computed about the first value.
///
/// Shifting by a pivot keeps the result exact when every value is equal,
/// which plain `sum / n` does not.
pub fn shifted_mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut iter = values.into_iter();
    let pivot = iter.next()?;
    let mut n = 1usize;
    let mut acc = 0.0;
    for v in iter {
        acc += v - pivot;
        n += 1;
    }
    Some(pivot + acc / n as f64)
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
