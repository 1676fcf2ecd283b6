//! Simulated clock values.

use std::fmt;
use std::ops::{Add, Sub};

/// Simulated time in milliseconds since the start of a run.
///
/// 32 bits cover about 49 days of simulated time, which is far beyond any
/// experiment here, and keep the per-entry table footprint small.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u32);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_millis(ms: u32) -> Self {
        SimTime(ms)
    }

    pub const fn from_secs(s: u32) -> Self {
        SimTime(s * 1000)
    }

    pub const fn millis(self) -> u32 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        f64::from(self.0) / 1000.0
    }
}

impl Add<u32> for SimTime {
    type Output = SimTime;

    fn add(self, ms: u32) -> SimTime {
        SimTime(self.0 + ms)
    }
}

impl Sub for SimTime {
    type Output = u32;

    fn sub(self, rhs: SimTime) -> u32 {
        self.0 - rhs.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}s", self.as_secs_f64())
    }
}
