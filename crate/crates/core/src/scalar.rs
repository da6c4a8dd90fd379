//! Scalar field policy. All arithmetic is done in binary64 complex numbers.

pub use num_complex::Complex64 as Cx;

#[inline]
pub fn cx(re: f64, im: f64) -> Cx {
    Cx::new(re, im)
}

#[inline]
pub fn real(re: f64) -> Cx {
    Cx::new(re, 0.0)
}

pub fn is_finite(z: Cx) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Human-readable `a+bi` rendering used by the CLI tables.
pub fn fmt_cx(z: Cx) -> String {
    let clean = |x: f64| if x.abs() < 5e-13 { 0.0 } else { x };
    let num = |x: f64| {
        let s = format!("{x:.10}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" {
            "0".to_string()
        } else {
            s.to_string()
        }
    };
    let imag = |x: f64| {
        if num(x) == "1" {
            "i".to_string()
        } else {
            format!("{}i", num(x))
        }
    };
    let (re, im) = (clean(z.re), clean(z.im));
    if im == 0.0 {
        num(re)
    } else if re == 0.0 {
        if im < 0.0 {
            format!("-{}", imag(-im))
        } else {
            imag(im)
        }
    } else if im < 0.0 {
        format!("{}-{}", num(re), imag(-im))
    } else {
        format!("{}+{}", num(re), imag(im))
    }
}

/// Serde adapter: complex numbers travel as `[re, im]`; each component may be
/// a JSON number or a decimal string.
pub mod serde_cx {
    use super::Cx;
    use serde::de::{self, Deserializer};
    use serde::ser::{SerializeTuple, Serializer};
    use serde::Deserialize;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Num {
        F(f64),
        S(String),
    }

    impl Num {
        fn value<E: de::Error>(self) -> Result<f64, E> {
            match self {
                Num::F(x) => Ok(x),
                Num::S(s) => s
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| E::custom(format!("invalid decimal string {s:?}"))),
            }
        }
    }

    pub fn serialize<S: Serializer>(z: &Cx, s: S) -> Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(2)?;
        t.serialize_element(&z.re)?;
        t.serialize_element(&z.im)?;
        t.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Cx, D::Error> {
        let (re, im) = <(Num, Num)>::deserialize(d)?;
        Ok(Cx::new(re.value()?, im.value()?))
    }

    /// Real numbers with the same number-or-string leniency.
    pub mod real {
        use super::Num;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
            s.serialize_f64(*x)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
            Num::deserialize(d)?.value()
        }
    }

    pub mod vec {
        use super::Cx;
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        #[derive(Serialize, Deserialize)]
        struct W(#[serde(with = "super")] Cx);

        pub fn serialize<S: Serializer>(v: &[Cx], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|z| W(*z)))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Cx>, D::Error> {
            Ok(Vec::<W>::deserialize(d)?.into_iter().map(|w| w.0).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_compactly() {
        assert_eq!(fmt_cx(cx(4.0, 1.0)), "4+i");
        assert_eq!(fmt_cx(cx(31.0, -1.0)), "31-i");
        assert_eq!(fmt_cx(cx(0.0, -2.5)), "-2.5i");
        assert_eq!(fmt_cx(cx(-1e-14, 0.0)), "0");
        assert_eq!(fmt_cx(cx(0.1234567890123, 0.0)), "0.123456789");
    }
}
