use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

/// Unit in which information quantities are reported. Computation is always
/// in nats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    #[default]
    Nats,
    Bits,
}

impl Unit {
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            Unit::Nats => nats,
            Unit::Bits => nats / LN_2,
        }
    }

    pub fn to_nats(self, value: f64) -> f64 {
        match self {
            Unit::Nats => value,
            Unit::Bits => value * LN_2,
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::Nats => "nats",
            Unit::Bits => "bits",
        })
    }
}

impl FromStr for Unit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nats" => Ok(Unit::Nats),
            "bits" => Ok(Unit::Bits),
            other => Err(format!("unknown unit `{other}` (expected nats or bits)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_bit_is_ln2_nats() {
        assert_eq!(Unit::Bits.from_nats(LN_2), 1.0);
        assert_eq!("bits".parse::<Unit>(), Ok(Unit::Bits));
        assert!("dits".parse::<Unit>().is_err());
    }

    proptest! {
        #[test]
        fn bits_round_trip(nats in 1e-12f64..1e6) {
            let back = Unit::Bits.to_nats(Unit::Bits.from_nats(nats));
            prop_assert!(((back - nats) / nats).abs() <= 1e-15);
        }
    }
}
