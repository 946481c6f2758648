//! Integer currency.
//!
//! All accounting happens in micro-cents so that costs summed over tens of
//! thousands of slots are exact and platform independent. One cent is
//! `1_000_000` micro-cents and one dollar is `100_000_000`.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul};

use serde::{Deserialize, Serialize};

pub const MICROS_PER_CENT: u64 = 1_000_000;
pub const MICROS_PER_DOLLAR: u64 = 100 * MICROS_PER_CENT;

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct MicroCents(pub u64);

impl MicroCents {
    pub const ZERO: MicroCents = MicroCents(0);

    /// Rounds to the nearest micro-cent.
    pub fn from_cents(cents: f64) -> Self {
        MicroCents((cents * MICROS_PER_CENT as f64).round() as u64)
    }

    pub fn as_cents(self) -> f64 {
        self.0 as f64 / MICROS_PER_CENT as f64
    }

    pub fn as_dollars(self) -> f64 {
        self.0 as f64 / MICROS_PER_DOLLAR as f64
    }

    pub fn checked_sub(self, rhs: MicroCents) -> Option<MicroCents> {
        self.0.checked_sub(rhs.0).map(MicroCents)
    }
}

impl Add for MicroCents {
    type Output = MicroCents;
    fn add(self, rhs: MicroCents) -> MicroCents {
        MicroCents(self.0 + rhs.0)
    }
}

impl AddAssign for MicroCents {
    fn add_assign(&mut self, rhs: MicroCents) {
        self.0 += rhs.0;
    }
}

impl Mul<u64> for MicroCents {
    type Output = MicroCents;
    fn mul(self, rhs: u64) -> MicroCents {
        MicroCents(self.0 * rhs)
    }
}

impl Sum for MicroCents {
    fn sum<I: Iterator<Item = MicroCents>>(iter: I) -> MicroCents {
        MicroCents(iter.map(|m| m.0).sum())
    }
}

impl fmt::Display for MicroCents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{:06}c",
            self.0 / MICROS_PER_CENT,
            self.0 % MICROS_PER_CENT
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        assert_eq!(MicroCents::from_cents(0.55), MicroCents(550_000));
        assert_eq!(MicroCents(250_000_000).as_dollars(), 2.5);
        assert_eq!(MicroCents(1_500_000).to_string(), "1.500000c");
    }
}
