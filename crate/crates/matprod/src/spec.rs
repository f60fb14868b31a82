//! JSON system files: a labelled matrix alphabet plus a sequence rule.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::bernoulli::{random_omega, SoficSystem, D as BERNOULLI_D};
use crate::error::{Error, Result};
use crate::linalg::{ExactMat, FloatMat, Mat, Rational, Scalar};

pub const BERNOULLI_GENERATOR: &str = "bernoulli-beta3";

/// Parses `p/q` or `p` (optional sign, surrounding whitespace allowed).
pub fn parse_rational(s: &str) -> Result<Rational> {
    let bad = |msg: &str| Error::Parse { at: format!("{s:?}"), msg: msg.into() };
    let t = s.trim();
    let (p, q) = match t.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (t, "1"),
    };
    let int = |x: &str| -> Result<num_bigint::BigInt> {
        let digits = x.strip_prefix(['+', '-']).unwrap_or(x);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad("expected an integer or p/q"));
        }
        x.parse().map_err(|_| bad("expected an integer or p/q"))
    };
    let (p, q) = (int(p)?, int(q)?);
    if q.is_zero() {
        return Err(bad("zero denominator"));
    }
    Ok(Rational::new(p, q))
}

/// `p/q` in lowest terms with positive denominator, or `p` when `q = 1`.
pub fn format_rational(r: &Rational) -> String {
    if r.denom() == &1.into() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// A matrix or vector entry: an exact rational (written as a string) or a float.
#[derive(Debug, Clone, PartialEq)]
pub enum Num {
    Exact(Rational),
    Float(f64),
}

impl Num {
    pub fn to_f64(&self) -> f64 {
        match self {
            Num::Exact(r) => r.to_f64(),
            Num::Float(x) => *x,
        }
    }

    fn is_negative(&self) -> bool {
        match self {
            Num::Exact(r) => r.is_negative(),
            Num::Float(x) => *x < 0.0,
        }
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Num::Exact(r) => s.serialize_str(&format_rational(r)),
            Num::Float(x) => s.serialize_f64(*x),
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a \"p/q\" string or a number")
            }
            fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<Num, E> {
                parse_rational(s).map(Num::Exact).map_err(|e| E::custom(e.to_string()))
            }
            fn visit_f64<E: de::Error>(self, x: f64) -> std::result::Result<Num, E> {
                Ok(Num::Float(x))
            }
            fn visit_i64<E: de::Error>(self, x: i64) -> std::result::Result<Num, E> {
                Ok(Num::Float(x as f64))
            }
            fn visit_u64<E: de::Error>(self, x: u64) -> std::result::Result<Num, E> {
                Ok(Num::Float(x as f64))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    /// `labels`: iid uniform labels from the alphabet.
    pub ensemble: String,
    pub seed: u64,
}

/// Exactly one of `word`, `periodic`, `generator`, `random` is set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub d: usize,
    #[serde(default)]
    pub matrices: BTreeMap<String, Vec<Vec<Num>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_vectors: Option<BTreeMap<String, Vec<Num>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column_vector: Option<Vec<Num>>,
    /// Each matrix is divided by its scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<BTreeMap<String, Num>>,
    pub sequence: SequenceSpec,
}

/// How the factor sequence is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum SequenceRule {
    Word(Vec<String>),
    Periodic(Vec<String>),
    Bernoulli { seed: u64 },
    RandomLabels { seed: u64 },
}

/// A validated spec.
#[derive(Debug, Clone)]
pub struct System {
    pub spec: SystemSpec,
    pub d: usize,
    /// All entries were exact rationals.
    pub exact: bool,
    pub labels: Vec<String>,
    pub exact_mats: Option<BTreeMap<String, ExactMat>>,
    pub float_mats: BTreeMap<String, FloatMat>,
    pub rule: SequenceRule,
}

fn invalid(field: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Parse { at: field.into(), msg: msg.into() }
}

/// Labels in a word: whitespace-separated if the word has whitespace, else one per character.
pub fn split_labels(w: &str) -> Vec<String> {
    if w.contains(char::is_whitespace) {
        w.split_whitespace().map(str::to_string).collect()
    } else {
        w.chars().map(|c| c.to_string()).collect()
    }
}

impl SystemSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse { at: format!("line {} column {}", e.line(), e.column()), msg: e.to_string() })
    }

    /// Canonical form: sorted keys, two-space indentation, rationals in lowest terms.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("spec serializes");
        s.push('\n');
        s
    }

    /// The Bernoulli system as a matrix alphabet `0, 1, 2` with `M_a = M*_a / scale_a`.
    pub fn bernoulli(seed: u64) -> Self {
        let sys = SoficSystem::new();
        let ex = |m: &ExactMat| m.rows().into_iter().map(|r| r.into_iter().map(Num::Exact).collect()).collect();
        let labels = ["0", "1", "2"];
        SystemSpec {
            d: BERNOULLI_D,
            matrices: labels.iter().zip(&sys.m).map(|(l, m)| (l.to_string(), ex(m))).collect(),
            row_vectors: Some(labels.iter().zip(&sys.r).map(|(l, r)| (l.to_string(), r.iter().cloned().map(Num::Exact).collect())).collect()),
            column_vector: Some(sys.c.iter().cloned().map(Num::Exact).collect()),
            scales: None,
            sequence: SequenceSpec { generator: Some(BERNOULLI_GENERATOR.into()), seed: Some(seed), ..Default::default() },
        }
    }

    pub fn validate(&self) -> Result<System> {
        let d = self.d;
        if d == 0 || d > 64 {
            return Err(invalid("d", format!("dimension {d} outside 1..=64")));
        }
        let seq = &self.sequence;
        let set = [seq.word.is_some(), seq.periodic.is_some(), seq.generator.is_some(), seq.random.is_some()];
        if set.iter().filter(|&&b| b).count() != 1 {
            return Err(invalid("sequence", "exactly one of word, periodic, generator, random is required"));
        }
        if seq.seed.is_some() && seq.generator.is_none() {
            return Err(invalid("sequence.seed", "seed belongs to a generator"));
        }
        let mut spec = self.clone();
        let rule = if let Some(g) = &seq.generator {
            if g != BERNOULLI_GENERATOR {
                return Err(invalid("sequence.generator", format!("unknown generator {g:?}")));
            }
            if d != BERNOULLI_D {
                return Err(invalid("d", format!("{BERNOULLI_GENERATOR} needs d = {BERNOULLI_D}, got {d}")));
            }
            if spec.matrices.is_empty() {
                spec.matrices = SystemSpec::bernoulli(0).matrices;
            }
            SequenceRule::Bernoulli { seed: seq.seed.unwrap_or(0) }
        } else if let Some(w) = &seq.word {
            SequenceRule::Word(split_labels(w))
        } else if let Some(w) = &seq.periodic {
            let l = split_labels(w);
            if l.is_empty() {
                return Err(invalid("sequence.periodic", "empty period"));
            }
            SequenceRule::Periodic(l)
        } else {
            let r = seq.random.as_ref().unwrap();
            if r.ensemble != "labels" {
                return Err(invalid("sequence.random.ensemble", format!("unknown ensemble {:?}", r.ensemble)));
            }
            SequenceRule::RandomLabels { seed: r.seed }
        };
        if spec.matrices.is_empty() {
            return Err(invalid("matrices", "no matrices"));
        }

        let mut exact = true;
        let mut exact_mats = BTreeMap::new();
        let mut float_mats = BTreeMap::new();
        for (label, rows) in &spec.matrices {
            let at = |i: usize, j: Option<usize>| match j {
                Some(j) => format!("matrices.{label}[{i}][{j}]"),
                None => format!("matrices.{label}[{i}]"),
            };
            if rows.len() != d {
                return Err(invalid(format!("matrices.{label}"), format!("{} rows, expected d = {d}", rows.len())));
            }
            for (i, row) in rows.iter().enumerate() {
                if row.len() != d {
                    return Err(invalid(at(i, None), format!("{} entries, expected d = {d}", row.len())));
                }
                for (j, x) in row.iter().enumerate() {
                    if x.is_negative() || !x.to_f64().is_finite() {
                        return Err(invalid(at(i, Some(j)), "entries must be finite and nonnegative"));
                    }
                    exact &= matches!(x, Num::Exact(_));
                }
            }
            let scale = match spec.scales.as_ref().and_then(|s| s.get(label)) {
                Some(s) if s.to_f64() > 0.0 => Some(s.clone()),
                Some(_) => return Err(invalid(format!("scales.{label}"), "scale must be positive")),
                None => None,
            };
            exact &= !matches!(scale, Some(Num::Float(_)));
            let f = FloatMat::from_rows(rows.iter().map(|r| r.iter().map(Num::to_f64).collect()).collect())?;
            float_mats.insert(label.clone(), match &scale {
                Some(s) => f.scale(&(1.0 / s.to_f64())),
                None => f,
            });
            if exact {
                let rows = rows.iter().map(|r| r.iter().map(|x| if let Num::Exact(q) = x { q.clone() } else { unreachable!() }).collect()).collect();
                let m = Mat::from_rows(rows)?;
                exact_mats.insert(label.clone(), match &scale {
                    Some(Num::Exact(s)) => m.scale(&(Rational::from_integer(1.into()) / s)),
                    _ => m,
                });
            }
        }
        if let Some(scales) = &spec.scales {
            if let Some(l) = scales.keys().find(|l| !spec.matrices.contains_key(*l)) {
                return Err(invalid(format!("scales.{l}"), "no such matrix"));
            }
        }
        if let Some(rv) = &spec.row_vectors {
            for (l, v) in rv {
                if v.len() != d {
                    return Err(invalid(format!("row_vectors.{l}"), format!("length {}, expected d = {d}", v.len())));
                }
            }
        }
        if let Some(c) = &spec.column_vector {
            if c.len() != d {
                return Err(invalid("column_vector", format!("length {}, expected d = {d}", c.len())));
            }
            if c.iter().any(Num::is_negative) {
                return Err(invalid("column_vector", "entries must be nonnegative"));
            }
        }
        let labels: Vec<String> = spec.matrices.keys().cloned().collect();
        let used: &[String] = match &rule {
            SequenceRule::Word(l) | SequenceRule::Periodic(l) => l,
            _ => &[],
        };
        if let Some(l) = used.iter().find(|l| !spec.matrices.contains_key(*l)) {
            return Err(invalid("sequence", format!("label {l:?} has no matrix")));
        }
        if matches!(rule, SequenceRule::Bernoulli { .. }) {
            if let Some(l) = ["0", "1", "2"].iter().find(|l| !spec.matrices.contains_key(**l)) {
                return Err(invalid("matrices", format!("{BERNOULLI_GENERATOR} needs label {l:?}")));
            }
        }
        Ok(System { spec, d, exact, labels, exact_mats: exact.then_some(exact_mats), float_mats, rule })
    }
}

impl System {
    /// Labels of `A_1..A_horizon`; a finite word caps the horizon at its length.
    pub fn labels_up_to(&self, horizon: usize) -> Vec<String> {
        match &self.rule {
            SequenceRule::Word(w) => w.iter().take(horizon).cloned().collect(),
            SequenceRule::Periodic(p) => p.iter().cycle().take(horizon).cloned().collect(),
            SequenceRule::Bernoulli { seed } => random_omega(*seed, horizon).iter().map(|a| a.to_string()).collect(),
            SequenceRule::RandomLabels { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..horizon).map(|_| self.labels[rng.gen_range(0..self.labels.len())].clone()).collect()
            }
        }
    }

    pub fn float_sequence(&self, horizon: usize) -> Vec<FloatMat> {
        self.labels_up_to(horizon).iter().map(|l| self.float_mats[l].clone()).collect()
    }

    pub fn exact_sequence(&self, horizon: usize) -> Option<Vec<ExactMat>> {
        let m = self.exact_mats.as_ref()?;
        Some(self.labels_up_to(horizon).iter().map(|l| m[l].clone()).collect())
    }

    /// The Bernoulli symbols, when the sequence comes from that generator.
    pub fn bernoulli_omega(&self, len: usize) -> Option<Vec<u8>> {
        match self.rule {
            SequenceRule::Bernoulli { seed } => Some(random_omega(seed, len)),
            _ => None,
        }
    }
}

/// Parse and validate in one step.
pub fn load_spec(json: &str) -> Result<System> {
    SystemSpec::from_json(json)?.validate()
}
