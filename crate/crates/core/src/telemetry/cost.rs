//! Exact token cost arithmetic in fixed point.
//!
//! Prices are stored in micro-units per one million tokens and costs in
//! micro-units, so the per-record formula never touches binary floating
//! point. Both serialize as plain JSON numbers.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

const MICROS: u128 = 1_000_000;

/// Price per one million tokens, at most 6 decimal places.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Hash)]
pub struct Price {
    micros: u64,
}

impl Price {
    pub const fn from_micros(micros: u64) -> Self {
        Self { micros }
    }

    pub fn micros(self) -> u64 {
        self.micros
    }

    /// Parses a non-negative decimal with up to 6 fractional digits.
    pub fn from_f64(value: f64) -> Result<Self, String> {
        if !value.is_finite() || value < 0.0 {
            return Err(format!("price must be a non-negative number, got {value}"));
        }
        let scaled = value * 1e6;
        if scaled > u64::MAX as f64 / 2.0 {
            return Err(format!("price {value} is too large"));
        }
        let micros = scaled.round();
        if (scaled - micros).abs() > 1e-6 * scaled.max(1.0) {
            return Err(format!("price {value} has more than 6 decimal places"));
        }
        Ok(Self { micros: micros as u64 })
    }

    pub fn as_f64(self) -> f64 {
        self.micros as f64 / 1e6
    }
}

impl Serialize for Price {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Price {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Price::from_f64(f64::deserialize(deserializer)?).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Pricing {
    #[serde(rename = "prompt_price_per_1m")]
    pub prompt_per_million: Price,
    #[serde(rename = "completion_price_per_1m")]
    pub completion_per_million: Price,
}

impl Pricing {
    pub fn new(prompt_per_million: Price, completion_per_million: Price) -> Self {
        Self {
            prompt_per_million,
            completion_per_million,
        }
    }
}

/// Cost in currency units with 6 decimal places.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Hash)]
pub struct Cost {
    micros: u64,
}

impl Cost {
    pub const ZERO: Cost = Cost { micros: 0 };

    pub const fn from_micros(micros: u64) -> Self {
        Self { micros }
    }

    pub fn micros(self) -> u64 {
        self.micros
    }

    pub fn as_f64(self) -> f64 {
        self.micros as f64 / 1e6
    }
}

impl fmt::Debug for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cost({self})")
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}", self.micros / 1_000_000, self.micros % 1_000_000)
    }
}

impl Serialize for Cost {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Cost {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = f64::deserialize(deserializer)?;
        if !value.is_finite() || value < 0.0 {
            return Err(serde::de::Error::custom("cost must be non-negative"));
        }
        Ok(Cost {
            micros: (value * 1e6).round() as u64,
        })
    }
}

/// `prompt_tokens * prompt_price / 1e6 + completion_tokens * completion_price / 1e6`,
/// rounded half-to-even to 6 decimal places.
pub fn compute_cost(prompt_tokens: u64, completion_tokens: u64, pricing: &Pricing) -> Cost {
    // Units of 1e-12: tokens * (price micro-units) / 1e6 tokens-per-price.
    let exact = u128::from(prompt_tokens) * u128::from(pricing.prompt_per_million.micros)
        + u128::from(completion_tokens) * u128::from(pricing.completion_per_million.micros);
    let quotient = exact / MICROS;
    let remainder = exact % MICROS;
    let half = MICROS / 2;
    let rounded = if remainder > half || (remainder == half && quotient % 2 == 1) {
        quotient + 1
    } else {
        quotient
    };
    Cost {
        micros: u64::try_from(rounded).unwrap_or(u64::MAX),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pricing(p: f64, c: f64) -> Pricing {
        Pricing::new(Price::from_f64(p).unwrap(), Price::from_f64(c).unwrap())
    }

    #[test]
    fn zero_tokens_cost_nothing() {
        assert_eq!(compute_cost(0, 0, &pricing(2.5, 10.0)), Cost::ZERO);
    }

    #[test]
    fn hand_examples() {
        assert_eq!(compute_cost(1000, 500, &pricing(2.5, 10.0)).to_string(), "0.007500");
        assert_eq!(compute_cost(333, 333, &pricing(3.0, 3.0)).to_string(), "0.001998");
    }

    #[test]
    fn half_even_rounding() {
        // 1 token at 0.5/1M = 0.0000005 -> ties to even (0)
        assert_eq!(compute_cost(1, 0, &pricing(0.5, 0.0)).micros(), 0);
        // 3 tokens at 0.5/1M = 0.0000015 -> ties to even (2 micros)
        assert_eq!(compute_cost(3, 0, &pricing(0.5, 0.0)).micros(), 2);
        // 0.0000016 -> 2 micros
        assert_eq!(compute_cost(1, 0, &pricing(1.6, 0.0)).micros(), 2);
    }

    #[test]
    fn price_parsing() {
        assert_eq!(Price::from_f64(2.5).unwrap().micros(), 2_500_000);
        assert_eq!(Price::from_f64(0.000001).unwrap().micros(), 1);
        assert!(Price::from_f64(-1.0).is_err());
        assert!(Price::from_f64(0.0000001).is_err());
        assert!(Price::from_f64(f64::NAN).is_err());
    }

    #[test]
    fn cost_json_round_trip() {
        let cost = compute_cost(1000, 500, &pricing(2.5, 10.0));
        let json = serde_json::to_string(&cost).unwrap();
        assert_eq!(json, "0.0075");
        assert_eq!(serde_json::from_str::<Cost>(&json).unwrap(), cost);
        let big = Cost::from_micros(123_456_789_012);
        assert_eq!(
            serde_json::from_str::<Cost>(&serde_json::to_string(&big).unwrap()).unwrap(),
            big
        );
    }
}
