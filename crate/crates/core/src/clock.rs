//! Measurement clock.
//!
//! All measurement timestamps come from one process-wide monotonic clock;
//! wall-clock time appears only as a single anchor per run so reports can
//! print human-readable labels without exposing measurements to NTP steps.

use chrono::{DateTime, Duration, Utc};
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use std::time::Instant;

static ANCHOR: Lazy<Instant> = Lazy::new(Instant::now);

/// Nanoseconds on the process-wide monotonic clock.
pub fn mono_now_ns() -> u64 {
    ANCHOR.elapsed().as_nanos() as u64
}

/// One wall-clock reading paired with one monotonic reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallClockAnchor {
    pub wall: DateTime<Utc>,
    pub mono_ns: u64,
}

impl WallClockAnchor {
    pub fn capture() -> Self {
        WallClockAnchor {
            wall: Utc::now(),
            mono_ns: mono_now_ns(),
        }
    }

    /// Wall-clock label for a monotonic timestamp, derived from the anchor.
    pub fn wall_at(&self, mono_ns: u64) -> DateTime<Utc> {
        let delta_ns = mono_ns as i64 - self.mono_ns as i64;
        self.wall + Duration::nanoseconds(delta_ns)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotonic_never_goes_backwards() {
        let a = mono_now_ns();
        let b = mono_now_ns();
        assert!(b >= a);
    }

    #[test]
    fn anchor_labels_offsets() {
        let anchor = WallClockAnchor {
            wall: "2024-10-14T11:00:00Z".parse().unwrap(),
            mono_ns: 1_000_000_000,
        };
        let later = anchor.wall_at(3_000_000_000);
        assert_eq!(later, "2024-10-14T11:00:02Z".parse::<DateTime<Utc>>().unwrap());
        let earlier = anchor.wall_at(0);
        assert_eq!(earlier, "2024-10-14T10:59:59Z".parse::<DateTime<Utc>>().unwrap());
    }
}
