//! Rate controllers and termination policies, turned into a precomputed
//! list of send instants relative to the round start.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Transactions per second held in thousandths. Canonical documents carry no
/// floats, so configs write rates as decimal strings such as `"143.7"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tps(u64);

impl Tps {
    pub fn from_milli(milli: u64) -> Tps {
        Tps(milli)
    }

    pub fn whole(tps: u64) -> Tps {
        Tps(tps * 1000)
    }

    pub fn milli(self) -> u64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }
}

impl fmt::Display for Tps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (int, frac) = (self.0 / 1000, self.0 % 1000);
        if frac == 0 {
            return write!(f, "{int}");
        }
        let digits = format!("{frac:03}");
        write!(f, "{int}.{}", digits.trim_end_matches('0'))
    }
}

impl FromStr for Tps {
    type Err = String;

    fn from_str(s: &str) -> Result<Tps, String> {
        let bad = || format!("invalid rate {s:?}: expected a decimal with at most 3 fractional digits");
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() || frac.len() > 3 || !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let int: u64 = int.parse().map_err(|_| bad())?;
        let frac: u64 = if frac.is_empty() { 0 } else { format!("{frac:0<3}").parse().map_err(|_| bad())? };
        int.checked_mul(1000).and_then(|v| v.checked_add(frac)).map(Tps).ok_or_else(bad)
    }
}

impl Serialize for Tps {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Tps {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Tps, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rate {
    FixedRate { tps: Tps },
    LinearRate { start_tps: Tps, end_tps: Tps },
}

impl Rate {
    pub fn name(&self) -> &'static str {
        match self {
            Rate::FixedRate { .. } => "FixedRate",
            Rate::LinearRate { .. } => "LinearRate",
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = match self {
            Rate::FixedRate { tps } => tps.0 > 0,
            Rate::LinearRate { start_tps, end_tps } => start_tps.0 > 0 && end_tps.0 > 0,
        };
        if ok {
            Ok(())
        } else {
            Err("rates must be positive".into())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    TxNumber { count: u64 },
    TxDuration { seconds: u64 },
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Termination::TxNumber { .. } => "TxNumber",
            Termination::TxDuration { .. } => "TxDuration",
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            Termination::TxNumber { count: 0 } => Err("tx count must be positive".into()),
            Termination::TxDuration { seconds: 0 } => Err("duration must be positive".into()),
            _ => Ok(()),
        }
    }
}

/// Send instants for a round.
///
/// A fixed rate `r` sends at `k / r`. A linear rate ramps from `a` to `b`
/// over a horizon `H`, so `N(t) = a·t + (b−a)·t²/(2H)` sends have been issued
/// by `t`, and send `k` goes out at the root of `N(t) = k`. For a tx count the
/// horizon is the time at which `N` reaches the count; for a duration it is
/// the duration itself and every `k < N(H)` is sent.
pub fn next_send_offsets(rate: Rate, termination: Termination) -> Vec<Duration> {
    let (a, b) = match rate {
        Rate::FixedRate { tps } => (tps.as_f64(), tps.as_f64()),
        Rate::LinearRate { start_tps, end_tps } => (start_tps.as_f64(), end_tps.as_f64()),
    };
    let (count, horizon) = match termination {
        Termination::TxNumber { count } => (count, 2.0 * count as f64 / (a + b)),
        Termination::TxDuration { seconds } => {
            // Integers k with k < N(H) = (a+b)·H/2, in thousandths to stay exact.
            let (am, bm) = match rate {
                Rate::FixedRate { tps } => (tps.0, tps.0),
                Rate::LinearRate { start_tps, end_tps } => (start_tps.0, end_tps.0),
            };
            let total_milli = (am + bm) as u128 * seconds as u128;
            (total_milli.div_ceil(2000) as u64, seconds as f64)
        }
    };
    (0..count).map(|k| Duration::from_secs_f64(instant(a, b, horizon, k as f64))).collect()
}

/// Root of `a·t + (b−a)·t²/(2H) = k`, written so that `a == b` needs no
/// special case.
fn instant(a: f64, b: f64, horizon: f64, k: f64) -> f64 {
    if k == 0.0 {
        return 0.0;
    }
    2.0 * k / (a + (a * a + 2.0 * (b - a) * k / horizon).sqrt())
}
