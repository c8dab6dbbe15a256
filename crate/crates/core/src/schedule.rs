//! Tolerance schedules and the acceptance-band partition they induce.
//!
//! A schedule `eps_1 > eps_2 > ... > eps_T > 0` splits `[0, eps_1)` into the
//! half-open bands `[eps_{k+1}, eps_k)`, with `eps_{T+1} = 0`. Strata are
//! numbered `1..=T` from the outermost band inwards, so a larger index means
//! a simulation closer to the observed data.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ThresholdSchedule {
    eps: Vec<f64>,
}

/// Where a simulated distance falls relative to a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    /// Inside band `k`, i.e. `eps_{k+1} <= d < eps_k`.
    Stratum(usize),
    /// At or beyond `eps_1`, or not a finite distance at all.
    Outside,
}

impl Band {
    pub fn stratum(self) -> Option<usize> {
        match self {
            Band::Stratum(k) => Some(k),
            Band::Outside => None,
        }
    }

    /// Row used when tallying predictive frequencies. Anything outside the
    /// partition is lumped with the outermost band.
    pub fn landing_row(self) -> usize {
        self.stratum().unwrap_or(1)
    }
}

impl ThresholdSchedule {
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Schedule("schedule must not be empty".into()));
        }
        for (i, &e) in raw.iter().enumerate() {
            if e.is_nan() {
                return Err(Error::Schedule(format!("threshold {} is NaN", i + 1)));
            }
            if e <= 0.0 {
                return Err(Error::Schedule(format!(
                    "threshold {} is {e}, thresholds must be positive",
                    i + 1
                )));
            }
            if e.is_infinite() && i > 0 {
                return Err(Error::Schedule(format!(
                    "only the first threshold may be infinite, found infinity at position {}",
                    i + 1
                )));
            }
        }
        if let Some(w) = raw.windows(2).position(|w| w[0] <= w[1]) {
            return Err(Error::Schedule(format!(
                "thresholds must be strictly decreasing, but {} is followed by {}",
                raw[w],
                raw[w + 1]
            )));
        }
        Ok(Self { eps: raw })
    }

    /// Number of thresholds `T`.
    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.eps
    }

    /// `eps_k` for `k` in `1..=T+1`; `eps_{T+1}` is zero.
    pub fn eps(&self, k: usize) -> f64 {
        assert!(
            k >= 1 && k <= self.eps.len() + 1,
            "threshold index {k} out of range"
        );
        if k == self.eps.len() + 1 {
            0.0
        } else {
            self.eps[k - 1]
        }
    }

    /// The band holding `distance`. Bands are lower-inclusive and
    /// upper-exclusive; negative and non-finite distances are `Outside`.
    pub fn stratum_of(&self, distance: f64) -> Band {
        if !distance.is_finite() || distance < 0.0 || distance >= self.eps[0] {
            return Band::Outside;
        }
        // Number of thresholds strictly above the distance; eps is decreasing.
        let k = self.eps.partition_point(|&e| e > distance);
        Band::Stratum(k)
    }

    /// Strata a surviving particle of iteration `t` may occupy.
    pub fn active_strata(&self, t: usize) -> Result<RangeInclusive<usize>> {
        let strata = self.eps.len();
        if t == 0 || t > strata {
            return Err(Error::IterationOutOfRange {
                index: t,
                iterations: strata,
            });
        }
        Ok(t..=strata)
    }
}

impl TryFrom<Vec<f64>> for ThresholdSchedule {
    type Error = Error;

    fn try_from(raw: Vec<f64>) -> Result<Self> {
        Self::new(raw)
    }
}

impl From<ThresholdSchedule> for Vec<f64> {
    fn from(s: ThresholdSchedule) -> Self {
        s.eps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example() -> ThresholdSchedule {
        ThresholdSchedule::new(vec![f64::INFINITY, 4.0, 3.0, 2.0, 1.0]).unwrap()
    }

    #[test]
    fn accepts_valid_schedules() {
        assert_eq!(example().len(), 5);
        assert_eq!(ThresholdSchedule::new(vec![5.0]).unwrap().len(), 1);
    }

    #[test]
    fn rejects_invalid_schedules() {
        assert!(ThresholdSchedule::new(vec![]).is_err());
        assert!(ThresholdSchedule::new(vec![f64::INFINITY, 1.0, 2.0]).is_err());
        assert!(ThresholdSchedule::new(vec![3.0, 3.0]).is_err());
        assert!(ThresholdSchedule::new(vec![3.0, 0.0]).is_err());
        assert!(ThresholdSchedule::new(vec![3.0, -1.0]).is_err());
        assert!(ThresholdSchedule::new(vec![f64::NAN]).is_err());
        assert!(ThresholdSchedule::new(vec![f64::INFINITY, f64::INFINITY]).is_err());
    }

    #[test]
    fn implicit_outer_and_inner_thresholds() {
        let s = example();
        assert_eq!(s.eps(1), f64::INFINITY);
        assert_eq!(s.eps(5), 1.0);
        assert_eq!(s.eps(6), 0.0);
    }

    #[test]
    fn band_lookup() {
        let s = example();
        assert_eq!(s.stratum_of(0.5), Band::Stratum(5));
        assert_eq!(s.stratum_of(0.0), Band::Stratum(5));
        assert_eq!(s.stratum_of(1.0), Band::Stratum(4));
        assert_eq!(s.stratum_of(3.999), Band::Stratum(2));
        assert_eq!(s.stratum_of(4.0), Band::Stratum(1));
        assert_eq!(s.stratum_of(7.3), Band::Stratum(1));
        assert_eq!(s.stratum_of(f64::INFINITY), Band::Outside);
        assert_eq!(s.stratum_of(f64::NAN), Band::Outside);
        assert_eq!(Band::Outside.landing_row(), 1);
    }

    #[test]
    fn finite_outer_threshold_leaves_an_outside_region() {
        let s = ThresholdSchedule::new(vec![5.0, 2.0]).unwrap();
        assert_eq!(s.stratum_of(5.0), Band::Outside);
        assert_eq!(s.stratum_of(4.0), Band::Stratum(1));
        assert_eq!(s.stratum_of(1.0), Band::Stratum(2));
    }

    #[test]
    fn active_strata_ranges() {
        let s = example();
        assert_eq!(s.active_strata(1).unwrap(), 1..=5);
        assert_eq!(s.active_strata(3).unwrap(), 3..=5);
        assert_eq!(s.active_strata(5).unwrap(), 5..=5);
        assert!(s.active_strata(0).is_err());
        assert!(s.active_strata(6).is_err());
    }

    #[test]
    fn serde_round_trip_validates() {
        let s: ThresholdSchedule = serde_json::from_str("[10.0, 5.0, 1.0]").unwrap();
        assert_eq!(s.len(), 3);
        assert!(serde_json::from_str::<ThresholdSchedule>("[1.0, 5.0]").is_err());
    }

    fn schedule_strategy() -> impl Strategy<Value = ThresholdSchedule> {
        (
            any::<bool>(),
            prop::collection::btree_set(1u32..10_000, 1..10),
        )
            .prop_map(|(inf, set)| {
                let mut eps: Vec<f64> = set.into_iter().rev().map(|v| v as f64 / 100.0).collect();
                if inf {
                    eps.insert(0, f64::INFINITY);
                }
                ThresholdSchedule::new(eps).unwrap()
            })
    }

    proptest! {
        #[test]
        fn bands_tile_the_outer_region(s in schedule_strategy(), d in 0.0f64..200.0) {
            match s.stratum_of(d) {
                Band::Stratum(k) => {
                    prop_assert!(s.eps(k + 1) <= d && d < s.eps(k));
                    let hits = (1..=s.len()).filter(|&j| s.eps(j + 1) <= d && d < s.eps(j)).count();
                    prop_assert_eq!(hits, 1);
                }
                Band::Outside => prop_assert!(d >= s.eps(1)),
            }
        }
    }
}
