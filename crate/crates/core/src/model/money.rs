use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// ISO-4217 style three-letter currency code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Currency([u8; 3]);

impl Currency {
    pub const GBP: Currency = Currency(*b"GBP");

    pub fn as_str(&self) -> &str {
        // constructed only from ASCII uppercase letters
        std::str::from_utf8(&self.0).unwrap_or("???")
    }
}

impl Default for Currency {
    fn default() -> Self {
        Currency::GBP
    }
}

impl FromStr for Currency {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bytes = s.as_bytes();
        if bytes.len() != 3 || !bytes.iter().all(|b| b.is_ascii_alphabetic()) {
            return Err(ModelError::InvalidCurrency(s.to_string()));
        }
        let mut code = [0u8; 3];
        for (dst, src) in code.iter_mut().zip(bytes) {
            *dst = src.to_ascii_uppercase();
        }
        Ok(Currency(code))
    }
}

impl TryFrom<String> for Currency {
    type Error = ModelError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Currency> for String {
    fn from(c: Currency) -> Self {
        c.as_str().to_string()
    }
}

impl fmt::Display for Currency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An exact amount of money in minor units (pence for GBP).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Money {
    pub minor_units: i64,
    #[serde(default)]
    pub currency: Currency,
}

impl Money {
    pub const fn new(minor_units: i64, currency: Currency) -> Self {
        Money { minor_units, currency }
    }

    pub const fn gbp(pence: i64) -> Self {
        Money::new(pence, Currency::GBP)
    }

    pub const fn zero(currency: Currency) -> Self {
        Money::new(0, currency)
    }

    pub fn is_zero(&self) -> bool {
        self.minor_units == 0
    }

    pub fn checked_add(self, other: Money) -> Result<Money, ModelError> {
        self.same_currency(&other)?;
        self.minor_units
            .checked_add(other.minor_units)
            .map(|m| Money::new(m, self.currency))
            .ok_or(ModelError::MoneyOverflow)
    }

    pub fn checked_sub(self, other: Money) -> Result<Money, ModelError> {
        self.same_currency(&other)?;
        self.minor_units
            .checked_sub(other.minor_units)
            .map(|m| Money::new(m, self.currency))
            .ok_or(ModelError::MoneyOverflow)
    }

    /// Sum of amounts; an empty input sums to zero in `currency`.
    pub fn sum<'a, I>(currency: Currency, items: I) -> Result<Money, ModelError>
    where
        I: IntoIterator<Item = &'a Money>,
    {
        items
            .into_iter()
            .try_fold(Money::zero(currency), |acc, m| acc.checked_add(*m))
    }

    /// Major units as a float, for reporting only.
    pub fn as_major_f64(&self) -> f64 {
        self.minor_units as f64 / 100.0
    }

    /// Parses a decimal major-unit string such as `"12.34"` or `"-0.5"`.
    ///
    /// At most two fraction digits are accepted; anything finer is rejected
    /// rather than rounded.
    pub fn parse_major(s: &str, currency: Currency) -> Result<Money, ModelError> {
        let raw = s.trim();
        let bad = || ModelError::InvalidMoney(s.to_string());
        let raw = raw.strip_prefix('£').unwrap_or(raw);
        let (negative, body) = match raw.as_bytes().first() {
            Some(b'-') => (true, &raw[1..]),
            Some(b'+') => (false, &raw[1..]),
            _ => (false, raw),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        if frac_part.len() > 2 || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        if body.ends_with('.') {
            return Err(bad());
        }
        let major: i64 = int_part.parse().map_err(|_| bad())?;
        let mut minor: i64 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().map_err(|_| bad())?
        };
        if frac_part.len() == 1 {
            minor *= 10;
        }
        let total = major
            .checked_mul(100)
            .and_then(|v| v.checked_add(minor))
            .ok_or_else(bad)?;
        Ok(Money::new(if negative { -total } else { total }, currency))
    }

    /// Formats as a major-unit decimal with exactly two fraction digits.
    pub fn format_major(&self) -> String {
        let sign = if self.minor_units < 0 { "-" } else { "" };
        let abs = self.minor_units.unsigned_abs();
        format!("{sign}{}.{:02}", abs / 100, abs % 100)
    }

    fn same_currency(&self, other: &Money) -> Result<(), ModelError> {
        if self.currency != other.currency {
            return Err(ModelError::CurrencyMismatch {
                left: self.currency,
                right: other.currency,
            });
        }
        Ok(())
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.format_major(), self.currency)
    }
}

impl std::ops::Neg for Money {
    type Output = Money;

    fn neg(self) -> Money {
        Money::new(-self.minor_units, self.currency)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_pounds_exactly() {
        assert_eq!(Money::parse_major("12.34", Currency::GBP).unwrap(), Money::gbp(1234));
        assert_eq!(Money::parse_major("-0.05", Currency::GBP).unwrap(), Money::gbp(-5));
        assert_eq!(Money::parse_major("7", Currency::GBP).unwrap(), Money::gbp(700));
        assert_eq!(Money::parse_major("7.5", Currency::GBP).unwrap(), Money::gbp(750));
        assert_eq!(Money::parse_major("£3.00", Currency::GBP).unwrap(), Money::gbp(300));
    }

    #[test]
    fn rejects_excess_precision_and_garbage() {
        for bad in ["12.345", "abc", "", "-", "1.2.3", ".5", "5.", "1e3", "--1"] {
            assert!(Money::parse_major(bad, Currency::GBP).is_err(), "{bad}");
        }
    }

    #[test]
    fn format_roundtrips() {
        for p in [0, 1, -1, 99, 100, -12345, 64_00] {
            let m = Money::gbp(p);
            assert_eq!(Money::parse_major(&m.format_major(), Currency::GBP).unwrap(), m);
        }
        assert_eq!(Money::gbp(-5).format_major(), "-0.05");
    }

    #[test]
    fn mismatched_currency_rejected() {
        let eur = Money::new(100, "EUR".parse().unwrap());
        assert!(matches!(
            Money::gbp(1).checked_add(eur),
            Err(ModelError::CurrencyMismatch { .. })
        ));
    }

    #[test]
    fn currency_code_validation() {
        assert_eq!("gbp".parse::<Currency>().unwrap(), Currency::GBP);
        assert!("GB".parse::<Currency>().is_err());
        assert!("G1P".parse::<Currency>().is_err());
    }

    proptest! {
        #[test]
        fn sum_is_permutation_invariant(mut v in proptest::collection::vec(-1_000_000i64..1_000_000, 0..40), seed in any::<u64>()) {
            let a: Vec<Money> = v.iter().map(|&p| Money::gbp(p)).collect();
            let s1 = Money::sum(Currency::GBP, &a).unwrap();
            // deterministic shuffle
            let n = v.len();
            let mut x = seed | 1;
            for i in (1..n).rev() {
                x ^= x << 13; x ^= x >> 7; x ^= x << 17;
                v.swap(i, (x % (i as u64 + 1)) as usize);
            }
            let b: Vec<Money> = v.iter().map(|&p| Money::gbp(p)).collect();
            prop_assert_eq!(s1, Money::sum(Currency::GBP, &b).unwrap());
        }
    }
}
