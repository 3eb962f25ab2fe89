//! Small dense-vector helpers used throughout the crate.
//!
//! Inner products stay in `f32` so that every scoring path (index search,
//! brute force) produces bit-identical values for the same operands.
//! Distances and norms accumulate in `f64` because they feed statistics.

/// Inner product of two equal-length slices.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f32;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Euclidean norm, accumulated in f64.
#[inline]
pub fn l2_norm(v: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for &x in v {
        let x = x as f64;
        acc += x * x;
    }
    acc.sqrt()
}

/// Squared Euclidean distance, accumulated in f64.
#[inline]
pub fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f64;
    for i in 0..a.len() {
        let d = a[i] as f64 - b[i] as f64;
        acc += d * d;
    }
    acc
}

/// Euclidean distance.
#[inline]
pub fn distance(a: &[f32], b: &[f32]) -> f64 {
    squared_distance(a, b).sqrt()
}
