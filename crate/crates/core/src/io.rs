//! Operator files: JSON with complex numbers as `[re, im]` pairs.
//!
//! ```json
//! {
//!   "schema_version": "1",
//!   "operator": {
//!     "ambient": "infinite",
//!     "cutoff": 1,
//!     "block": [[[0, 0]]],
//!     "rank_one": [
//!       {"left": {"finite": {"1": [1, 0]}, "tails": []},
//!        "right": {"finite": {}, "tails": [{"kind": "power", "coeff": [1, 0], "exponent": 2, "start": 2}]}}
//!     ]
//!   }
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::operator::{Ambient, RankOne, StructuredOperator};
use crate::scalar::{serde_cx, Cx};
use crate::sequence::{TailKind, TailSequence};
use crate::vector::HVector;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct C(#[serde(with = "serde_cx")] Cx);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum TailJson {
    Power {
        coeff: C,
        #[serde(with = "serde_cx::real")]
        exponent: f64,
        #[serde(deserialize_with = "positive_index")]
        start: usize,
    },
    Geometric {
        coeff: C,
        ratio: C,
        #[serde(deserialize_with = "positive_index")]
        start: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VectorJson {
    #[serde(default, deserialize_with = "finite_entries")]
    finite: BTreeMap<usize, C>,
    #[serde(default)]
    tails: Vec<TailJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermJson {
    left: VectorJson,
    right: VectorJson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct AmbientJson(Ambient);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorJson {
    ambient: AmbientJson,
    cutoff: usize,
    block: Vec<Vec<C>>,
    #[serde(default)]
    rank_one: Vec<TermJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorFile {
    #[serde(deserialize_with = "schema_version")]
    schema_version: String,
    operator: OperatorJson,
}

fn positive_index<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
    let j = usize::deserialize(d)?;
    if j == 0 {
        return Err(de::Error::custom("basis indices start at 1"));
    }
    Ok(j)
}

fn finite_entries<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<usize, C>, D::Error> {
    let m = BTreeMap::<usize, C>::deserialize(d)?;
    if m.contains_key(&0) {
        return Err(de::Error::custom("basis indices start at 1"));
    }
    Ok(m)
}

fn schema_version<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    let v = String::deserialize(d)?;
    if v != SCHEMA_VERSION {
        return Err(de::Error::custom(format!(
            "unsupported schema_version {v:?}, expected {SCHEMA_VERSION:?}"
        )));
    }
    Ok(v)
}

impl Serialize for AmbientJson {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Ambient::Infinite => s.serialize_str("infinite"),
            Ambient::Finite(n) => {
                let mut m = BTreeMap::new();
                m.insert("finite", n);
                m.serialize(s)
            }
        }
    }
}

impl<'de> Deserialize<'de> for AmbientJson {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            Finite { finite: usize },
        }
        match Raw::deserialize(d)? {
            Raw::Name(s) if s == "infinite" => Ok(AmbientJson(Ambient::Infinite)),
            Raw::Name(s) => Err(de::Error::custom(format!(
                "ambient must be \"infinite\" or {{\"finite\": n}}, got {s:?}"
            ))),
            Raw::Finite { finite } => Ok(AmbientJson(Ambient::Finite(finite))),
        }
    }
}

impl From<&TailSequence> for TailJson {
    fn from(t: &TailSequence) -> Self {
        match t.kind {
            TailKind::Power { coeff, exponent } => TailJson::Power {
                coeff: C(coeff),
                exponent,
                start: t.start,
            },
            TailKind::Geometric { coeff, ratio } => TailJson::Geometric {
                coeff: C(coeff),
                ratio: C(ratio),
                start: t.start,
            },
        }
    }
}

impl From<&TailJson> for TailSequence {
    fn from(t: &TailJson) -> Self {
        match *t {
            TailJson::Power {
                coeff,
                exponent,
                start,
            } => TailSequence::power(coeff.0, exponent, start),
            TailJson::Geometric {
                coeff,
                ratio,
                start,
            } => TailSequence::geometric(coeff.0, ratio.0, start),
        }
    }
}

impl From<&HVector> for VectorJson {
    fn from(v: &HVector) -> Self {
        VectorJson {
            finite: v.finite().iter().map(|(j, c)| (*j, C(*c))).collect(),
            tails: v.tails().iter().map(TailJson::from).collect(),
        }
    }
}

impl From<&VectorJson> for HVector {
    fn from(v: &VectorJson) -> Self {
        v.tails.iter().fold(
            HVector::from_finite(v.finite.iter().map(|(j, c)| (*j, c.0))),
            |acc, t| acc.with_tail(TailSequence::from(t)),
        )
    }
}

impl From<&StructuredOperator> for OperatorJson {
    fn from(op: &StructuredOperator) -> Self {
        let b = op.block();
        OperatorJson {
            ambient: AmbientJson(op.ambient()),
            cutoff: op.cutoff(),
            block: (0..b.nrows())
                .map(|i| (0..b.ncols()).map(|j| C(b[(i, j)])).collect())
                .collect(),
            rank_one: op
                .terms()
                .iter()
                .map(|t| TermJson {
                    left: VectorJson::from(&t.left),
                    right: VectorJson::from(&t.right),
                })
                .collect(),
        }
    }
}

impl OperatorJson {
    fn build(&self) -> Result<StructuredOperator> {
        let n = self.cutoff;
        if self.block.len() != n || self.block.iter().any(|r| r.len() != n) {
            return Err(crate::error::OpValidationError::MalformedBlock(format!(
                "block must be {n}x{n} to match the cutoff"
            ))
            .into());
        }
        let block = CMat::from_fn(n, n, |i, j| self.block[i][j].0);
        let terms = self
            .rank_one
            .iter()
            .map(|t| RankOne::new(HVector::from(&t.left), HVector::from(&t.right)))
            .collect();
        Ok(StructuredOperator::new(self.ambient.0, n, block, terms)?)
    }
}

fn json_error(e: serde_json::Error) -> Error {
    match e.classify() {
        serde_json::error::Category::Io => Error::Io(e.into()),
        _ => Error::MalformedFile {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        },
    }
}

/// Parses and validates an operator file.
pub fn parse_str(text: &str) -> Result<StructuredOperator> {
    let file: OperatorFile = serde_json::from_str(text).map_err(json_error)?;
    file.operator.build()
}

pub fn parse(path: impl AsRef<Path>) -> Result<StructuredOperator> {
    parse_str(&std::fs::read_to_string(path)?)
}

/// Canonical text: fixed key order, finite supports sorted by index, tails in
/// stored order, trailing newline.
pub fn to_json_string(op: &StructuredOperator) -> String {
    let file = OperatorFile {
        schema_version: SCHEMA_VERSION.to_string(),
        operator: OperatorJson::from(op),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("operator serialises");
    s.push('\n');
    s
}

pub fn serialize(op: &StructuredOperator, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_json_string(op))?;
    Ok(())
}

/// Hex SHA-256 of the canonical serialisation, first 16 characters.
pub fn fingerprint(op: &StructuredOperator) -> String {
    let digest = Sha256::digest(to_json_string(op).as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::{OpValidationError, TermSide};
    use crate::operator::action_distance;
    use crate::worked_example;

    const WORKED: &str = r#"{
      "schema_version": "1",
      "operator": {
        "ambient": "infinite",
        "cutoff": 4,
        "block": [
          [[1, 1], [2, 0], [1, 0], [0, 0]],
          [[1, 0], [0, 0], [-2, 0], [0, 0]],
          [[0, 0], [5, -3], [3, 0], [0, 0]],
          [[1, 0], [0, 0], ["-2", "0"], [0, 0]]
        ],
        "rank_one": [
          {"left": {"finite": {"4": [1, 0]}},
           "right": {"tails": [{"kind": "power", "coeff": [1, 0], "exponent": "2", "start": 5}]}}
        ]
      }
    }"#;

    #[test]
    fn parses_worked_example() {
        let op = parse_str(WORKED).unwrap();
        assert!(action_distance(&op, &worked_example(), 1e-12).unwrap() < 1e-15);
    }

    #[test]
    fn canonical_round_trip() {
        let op = parse_str(WORKED).unwrap();
        let text = to_json_string(&op);
        let again = parse_str(&text).unwrap();
        assert_eq!(again, op);
        assert_eq!(to_json_string(&again), text);
        assert_eq!(fingerprint(&again), fingerprint(&op));
    }

    #[test]
    fn rejects_unbounded_tail() {
        let text = r#"{"schema_version": "1", "operator": {"ambient": "infinite", "cutoff": 1,
            "block": [[[0, 0]]],
            "rank_one": [{"left": {"finite": {"1": [1, 0]}},
                          "right": {"tails": [{"kind": "power", "coeff": [1, 0], "exponent": -1, "start": 2}]}}]}}"#;
        match parse_str(text) {
            Err(Error::Validation(OpValidationError::UnboundedTail {
                term: 0,
                side: TermSide::Right,
            })) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_files_report_positions() {
        let bad = "{\n  \"schema_version\": \"2\",\n  \"operator\": {}\n}";
        match parse_str(bad) {
            Err(Error::MalformedFile { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_str("{"), Err(Error::MalformedFile { .. })));
        let zero_key = WORKED.replace("\"4\": [1, 0]", "\"0\": [1, 0]");
        assert!(matches!(
            parse_str(&zero_key),
            Err(Error::MalformedFile { .. })
        ));
        let short = WORKED.replace("\"cutoff\": 4", "\"cutoff\": 3");
        assert!(matches!(
            parse_str(&short),
            Err(Error::Validation(OpValidationError::MalformedBlock(_)))
        ));
    }

    #[test]
    fn finite_ambient_round_trip() {
        let op = StructuredOperator::from_block(Ambient::Finite(2), CMat::identity(2, 2)).unwrap();
        let text = to_json_string(&op);
        assert!(text.contains("\"finite\": 2"));
        assert_eq!(parse_str(&text).unwrap(), op);
    }
}
