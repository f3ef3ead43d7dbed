//! Phase wrapping and circular helpers.

use std::f64::consts::{PI, TAU};

/// Wraps an angle into (−π, π].
pub fn wrap(x: f64) -> f64 {
    // `+ 0.0` turns a negative zero into a positive one
    if x > -PI && x <= PI {
        return x + 0.0;
    }
    let y = x.rem_euclid(TAU) + 0.0;
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// Reduces an angle into [0, 2π).
pub fn mod_two_pi(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if y >= TAU {
        0.0
    } else {
        y
    }
}

/// Signed circular distance `a - b` wrapped into (−π, π].
pub fn circular_diff(a: f64, b: f64) -> f64 {
    wrap(a - b)
}

/// Continuous-phase tracker: feeds wrapped angles and returns the unwrapped sequence,
/// assuming consecutive samples differ by less than π.
#[derive(Debug, Clone, Default)]
pub struct Unwrapper {
    last: Option<f64>,
    unwrapped: f64,
}

impl Unwrapper {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts tracking from an already-unwrapped value.
    pub fn starting_at(value: f64) -> Self {
        Self {
            last: Some(wrap(value)),
            unwrapped: value,
        }
    }

    pub fn push(&mut self, wrapped: f64) -> f64 {
        match self.last {
            None => {
                self.unwrapped = wrapped;
            }
            Some(prev) => {
                self.unwrapped += wrap(wrapped - prev);
            }
        }
        self.last = Some(wrapped);
        self.unwrapped
    }
}

/// Circular mean and circular standard deviation of a set of angles.
pub fn circular_mean_std(angles: &[f64]) -> (f64, f64) {
    let n = angles.len() as f64;
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    let r = ((s / n).powi(2) + (c / n).powi(2)).sqrt();
    let mean = s.atan2(c);
    let std = (-2.0 * r.min(1.0).ln()).max(0.0).sqrt();
    (mean, std)
}
