//! Float formatting shared by every CSV writer.

/// Formats with 17 significant digits so values survive a text round trip.
pub fn f64_17(x: f64) -> String {
    if x == 0.0 {
        // avoid "-0.0000000000000000e0"
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.495_190_528_383_29, 1e300] {
            assert_eq!(f64_17(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(f64_17(-0.0), f64_17(0.0));
    }
}

/// Serde adapter writing non-finite floats as `null` and reading `null` back
/// as NaN, since JSON has no NaN.
pub mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}
