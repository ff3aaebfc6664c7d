//! Time sources. Every timestamp, duration and budget check in a solve goes
//! through a [`Clock`], so a [`TickClock`] makes replays byte-identical.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use chrono::{DateTime, TimeZone, Utc};

pub trait Clock: Send + Sync {
    /// Wall-clock timestamp for records.
    fn now(&self) -> DateTime<Utc>;

    /// Monotonic seconds since an arbitrary origin, for durations and budgets.
    fn seconds(&self) -> f64;
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }

    fn seconds(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}

/// Deterministic clock that advances by a fixed tick on every reading.
#[derive(Debug)]
pub struct TickClock {
    start: DateTime<Utc>,
    tick_millis: u64,
    ticks: AtomicU64,
}

impl TickClock {
    pub fn new(tick_millis: u64) -> Self {
        Self {
            start: Utc
                .with_ymd_and_hms(2025, 1, 1, 0, 0, 0)
                .single()
                .expect("valid date"),
            tick_millis,
            ticks: AtomicU64::new(0),
        }
    }

    fn advance(&self) -> u64 {
        self.ticks.fetch_add(1, Ordering::SeqCst) * self.tick_millis
    }
}

impl Default for TickClock {
    fn default() -> Self {
        Self::new(1)
    }
}

impl Clock for TickClock {
    fn now(&self) -> DateTime<Utc> {
        self.start + chrono::Duration::milliseconds(self.advance() as i64)
    }

    fn seconds(&self) -> f64 {
        self.advance() as f64 / 1000.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_clock_is_reproducible() {
        let read = || {
            let c = TickClock::new(5);
            (c.now(), c.seconds(), c.now())
        };
        assert_eq!(read(), read());
        let c = TickClock::new(5);
        assert!(c.seconds() < c.seconds());
    }
}
