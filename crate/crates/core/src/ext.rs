//! Extended-real helpers.
//!
//! Values live in plain `f64` with `±INFINITY` for the extended points; the
//! only excluded value is NaN. Arithmetic that could produce NaN (`∞ − ∞`)
//! is funneled through [`ext_sub`], which reports it instead.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// `true` for `-∞`, finite reals and `+∞`.
pub fn is_ext(v: f64) -> bool {
    !v.is_nan()
}

/// `a − b`, or `None` when both are the same infinity.
pub fn ext_sub(a: f64, b: f64) -> Option<f64> {
    let d = a - b;
    if d.is_nan() {
        None
    } else {
        Some(d)
    }
}

/// `a + b`, or `None` when the infinities have opposite signs.
pub fn ext_add(a: f64, b: f64) -> Option<f64> {
    let s = a + b;
    if s.is_nan() {
        None
    } else {
        Some(s)
    }
}

pub fn fmt_ext(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v}")
    }
}

/// Serde adapter writing infinities as the `"+inf"` / `"-inf"` sentinels.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Ext(pub f64);

impl Serialize for Ext {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("+inf")
        } else if self.0 == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Ext {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Ext(v)),
            Raw::Str(s) => match s.as_str() {
                "+inf" | "inf" => Ok(Ext(f64::INFINITY)),
                "-inf" => Ok(Ext(f64::NEG_INFINITY)),
                other => Err(serde::de::Error::custom(format!(
                    "expected a number, \"+inf\" or \"-inf\", got {other:?}"
                ))),
            },
        }
    }
}

/// `#[serde(with = "ext::vec")]` for `Vec<f64>` holding extended reals.
pub mod vec {
    use super::Ext;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let wrapped: Vec<Ext> = v.iter().copied().map(Ext).collect();
        wrapped.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Ext>::deserialize(d)?
            .into_iter()
            .map(|e| e.0)
            .collect())
    }
}

/// `#[serde(with = "ext::scalar")]` for a single extended real.
pub mod scalar {
    use super::Ext;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        Ext(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Ext::deserialize(d)?.0)
    }
}

/// `#[serde(with = "ext::matrix")]` for row-major tables of extended reals.
pub mod matrix {
    use super::Ext;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let wrapped: Vec<Vec<Ext>> = m
            .iter()
            .map(|row| row.iter().copied().map(Ext).collect())
            .collect();
        wrapped.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        Ok(Vec::<Vec<Ext>>::deserialize(d)?
            .into_iter()
            .map(|row| row.into_iter().map(|e| e.0).collect())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinite_differences() {
        assert_eq!(ext_sub(f64::INFINITY, f64::INFINITY), None);
        assert_eq!(ext_sub(f64::INFINITY, 3.0), Some(f64::INFINITY));
        assert_eq!(ext_sub(1.0, f64::NEG_INFINITY), Some(f64::INFINITY));
        assert_eq!(ext_add(f64::INFINITY, f64::NEG_INFINITY), None);
    }

    #[test]
    fn sentinels_round_trip() {
        let v = [f64::NEG_INFINITY, 0.5, f64::INFINITY];
        let wrapped: Vec<Ext> = v.iter().copied().map(Ext).collect();
        let json = serde_json::to_string(&wrapped).unwrap();
        assert_eq!(json, r#"["-inf",0.5,"+inf"]"#);
        let back: Vec<Ext> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, wrapped);
    }
}
