//! Integer simulation clock.
//!
//! One tick is 2^-30 s (about 0.93 ns). Converting ticks to seconds is then a
//! multiplication by a power of two and therefore exact, so differences of
//! timestamps are bit-identical no matter what constant offset they carry.

pub const TICKS_PER_SECOND: u64 = 1 << 30;
const SECONDS_PER_TICK: f64 = 1.0 / TICKS_PER_SECOND as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    /// Rounds to the nearest tick. Negative inputs clamp to zero.
    pub fn from_secs(s: f64) -> SimTime {
        SimTime((s.max(0.0) * TICKS_PER_SECOND as f64).round() as u64)
    }

    /// Rounds up, so a duration never comes out shorter than requested.
    pub fn from_secs_ceil(s: f64) -> SimTime {
        SimTime((s.max(0.0) * TICKS_PER_SECOND as f64).ceil() as u64)
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 * SECONDS_PER_TICK
    }

    pub fn ticks(self) -> u64 {
        self.0
    }
}

impl std::ops::Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl std::ops::Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

/// Signed tick difference to seconds, exact.
pub fn ticks_to_secs(ticks: i64) -> f64 {
    ticks as f64 * SECONDS_PER_TICK
}
