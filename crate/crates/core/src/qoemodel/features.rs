use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ModelError;
use crate::rating::{Rating, Sample};

/// A raw rating usable as a feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Basic {
    Qos,
    Int,
    Qor,
}

impl Basic {
    fn value(self, qos: Rating, interest: Rating, qor: Rating) -> f64 {
        match self {
            Basic::Qos => qos.as_f64(),
            Basic::Int => interest.as_f64(),
            Basic::Qor => qor.as_f64(),
        }
    }
}

impl fmt::Display for Basic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basic::Qos => "QoS",
            Basic::Int => "Int",
            Basic::Qor => "QoR",
        })
    }
}

impl FromStr for Basic {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "qos" => Ok(Basic::Qos),
            "int" | "interest" => Ok(Basic::Int),
            "qor" => Ok(Basic::Qor),
            other => Err(ModelError::InvalidSpec(format!("unknown rating `{other}`"))),
        }
    }
}

/// A raw rating or a meta-feature over a pair of ratings.
///
/// Symmetric pairs are stored in canonical order so that `min{Int,QoS}` and
/// `min{QoS,Int}` are the same feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Feature {
    Basic(Basic),
    Min(Basic, Basic),
    Max(Basic, Basic),
    Product(Basic, Basic),
    /// First over second. Never part of the presets.
    Ratio(Basic, Basic),
}

fn ordered(a: Basic, b: Basic) -> (Basic, Basic) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Feature {
    pub fn min(a: Basic, b: Basic) -> Self {
        let (a, b) = ordered(a, b);
        Feature::Min(a, b)
    }

    pub fn max(a: Basic, b: Basic) -> Self {
        let (a, b) = ordered(a, b);
        Feature::Max(a, b)
    }

    pub fn product(a: Basic, b: Basic) -> Self {
        let (a, b) = ordered(a, b);
        Feature::Product(a, b)
    }

    pub fn value(&self, qos: Rating, interest: Rating, qor: Rating) -> f64 {
        let v = |b: &Basic| b.value(qos, interest, qor);
        match self {
            Feature::Basic(b) => v(b),
            Feature::Min(a, b) => v(a).min(v(b)),
            Feature::Max(a, b) => v(a).max(v(b)),
            Feature::Product(a, b) => v(a) * v(b),
            Feature::Ratio(a, b) => v(a) / v(b),
        }
    }

    fn pair(&self) -> Option<(Basic, Basic)> {
        match *self {
            Feature::Basic(_) => None,
            Feature::Min(a, b) | Feature::Max(a, b) | Feature::Product(a, b) | Feature::Ratio(a, b) => Some((a, b)),
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Feature::Basic(b) => write!(f, "{b}"),
            Feature::Min(a, b) => write!(f, "min{{{a},{b}}}"),
            Feature::Max(a, b) => write!(f, "max{{{a},{b}}}"),
            Feature::Product(a, b) => write!(f, "{a}*{b}"),
            Feature::Ratio(a, b) => write!(f, "{a}/{b}"),
        }
    }
}

impl FromStr for Feature {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || ModelError::InvalidSpec(format!("cannot parse feature `{s}`"));
        let pair = |inner: &str, sep: char| -> Result<(Basic, Basic), ModelError> {
            let (a, b) = inner.split_once(sep).ok_or_else(bad)?;
            Ok((a.parse()?, b.parse()?))
        };
        let lower = s.to_ascii_lowercase();
        for (prefix, make) in [("min{", Feature::min as fn(Basic, Basic) -> Feature), ("max{", Feature::max)] {
            if let Some(rest) = lower.strip_prefix(prefix) {
                let inner = rest.strip_suffix('}').ok_or_else(bad)?;
                let (a, b) = pair(inner, ',')?;
                return Ok(make(a, b));
            }
        }
        if s.contains('*') {
            let (a, b) = pair(s, '*')?;
            return Ok(Feature::product(a, b));
        }
        if s.contains('/') {
            let (a, b) = pair(s, '/')?;
            return Ok(Feature::Ratio(a, b));
        }
        Ok(Feature::Basic(s.parse()?))
    }
}

impl Serialize for Feature {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Feature {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ordered, duplicate-free list of features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct FeatureSpec(Vec<Feature>);

impl FeatureSpec {
    pub fn new(features: Vec<Feature>) -> Result<Self, ModelError> {
        if features.is_empty() {
            return Err(ModelError::InvalidSpec("feature spec is empty".into()));
        }
        for (i, f) in features.iter().enumerate() {
            if features[..i].contains(f) {
                return Err(ModelError::InvalidSpec(format!("duplicate feature {f}")));
            }
            if matches!(f.pair(), Some((a, b)) if a == b) {
                return Err(ModelError::InvalidSpec(format!("{f} combines a rating with itself")));
            }
        }
        Ok(Self(features))
    }

    /// QoS and Int.
    pub fn qos_int() -> Self {
        Self(vec![Feature::Basic(Basic::Qos), Feature::Basic(Basic::Int)])
    }

    /// QoS, Int and min{QoS,Int}.
    pub fn selected() -> Self {
        let mut v = Self::qos_int().0;
        v.push(Feature::min(Basic::Qos, Basic::Int));
        Self(v)
    }

    /// QoS, Int and QoR.
    pub fn basic_three() -> Self {
        Self(vec![Feature::Basic(Basic::Qos), Feature::Basic(Basic::Int), Feature::Basic(Basic::Qor)])
    }

    /// The three ratings plus min and max over each pair of them.
    pub fn full_nine() -> Self {
        let pairs = [(Basic::Qos, Basic::Int), (Basic::Qos, Basic::Qor), (Basic::Qor, Basic::Int)];
        let mut v = Self::basic_three().0;
        v.extend(pairs.iter().map(|&(a, b)| Feature::min(a, b)));
        v.extend(pairs.iter().map(|&(a, b)| Feature::max(a, b)));
        Self(v)
    }

    pub fn features(&self) -> &[Feature] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.0.iter().map(ToString::to_string).collect()
    }

    /// Feature row for one triple of ratings.
    pub fn row(&self, qos: Rating, interest: Rating, qor: Rating) -> Vec<f64> {
        self.0.iter().map(|f| f.value(qos, interest, qor)).collect()
    }

    /// Keeps the listed features in this spec's order.
    pub fn subset(&self, keep: &[Feature]) -> Result<Self, ModelError> {
        Self::new(self.0.iter().filter(|f| keep.contains(f)).copied().collect())
    }
}

impl FromStr for FeatureSpec {
    type Err = ModelError;

    /// A preset name (`qos_int`, `selected`, `basic`, `full`) or a
    /// `;`-separated list of features.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "qos_int" => Ok(Self::qos_int()),
            "selected" => Ok(Self::selected()),
            "basic" => Ok(Self::basic_three()),
            "full" => Ok(Self::full_nine()),
            list => Self::new(list.split(';').map(str::parse).collect::<Result<_, _>>()?),
        }
    }
}

impl<'de> Deserialize<'de> for FeatureSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Named(String),
            List(Vec<Feature>),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Named(s) => s.parse(),
            Repr::List(v) => FeatureSpec::new(v),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Feature rows with their QoE labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Rating>,
    pub feature_names: Vec<String>,
}

impl DesignMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }
}

pub fn build_design(samples: &[Sample], spec: &FeatureSpec) -> DesignMatrix {
    DesignMatrix {
        rows: samples.iter().map(|s| spec.row(s.qos, s.interest, s.qor)).collect(),
        labels: samples.iter().map(|s| s.qoe).collect(),
        feature_names: spec.names(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierMode {
    /// QoE must lie between QoS and Int.
    #[default]
    QosInt,
    /// QoE must lie between the lowest and highest of QoS, Int and QoR.
    QosIntQor,
}

/// Drops samples whose QoE lies outside the envelope of the other ratings.
pub fn filter_outliers(samples: &[Sample], mode: OutlierMode) -> Vec<Sample> {
    samples
        .iter()
        .filter(|s| {
            let (mut lo, mut hi) = (s.qos.min(s.interest), s.qos.max(s.interest));
            if mode == OutlierMode::QosIntQor {
                lo = lo.min(s.qor);
                hi = hi.max(s.qor);
            }
            (lo..=hi).contains(&s.qoe)
        })
        .copied()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(qos: u8, interest: u8, qor: u8, qoe: u8) -> Sample {
        Sample::from_raw(interest, qos, qor, qoe).unwrap()
    }

    #[test]
    fn feature_names_round_trip() {
        for f in FeatureSpec::full_nine().features() {
            assert_eq!(f.to_string().parse::<Feature>().unwrap(), *f);
        }
        assert_eq!("min{Int,QoS}".parse::<Feature>().unwrap(), Feature::min(Basic::Qos, Basic::Int));
        assert_eq!("Int*QoS".parse::<Feature>().unwrap().to_string(), "QoS*Int");
        assert_eq!("QoR/Int".parse::<Feature>().unwrap().to_string(), "QoR/Int");
        assert!("min{QoS}".parse::<Feature>().is_err());
        assert!("speed".parse::<Feature>().is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(FeatureSpec::new(vec![]).is_err());
        let q = Feature::Basic(Basic::Qos);
        assert!(FeatureSpec::new(vec![q, q]).is_err());
        assert!(FeatureSpec::new(vec![Feature::min(Basic::Qos, Basic::Qos)]).is_err());
        assert_eq!(FeatureSpec::full_nine().len(), 9);
        assert_eq!("selected".parse::<FeatureSpec>().unwrap(), FeatureSpec::selected());
        assert_eq!("QoS;Int;min{QoS,Int}".parse::<FeatureSpec>().unwrap(), FeatureSpec::selected());
        let from_json: FeatureSpec = serde_json::from_str(r#"["QoS","Int","min{QoS,Int}"]"#).unwrap();
        assert_eq!(from_json, FeatureSpec::selected());
        let from_name: FeatureSpec = serde_json::from_str(r#""full""#).unwrap();
        assert_eq!(from_name, FeatureSpec::full_nine());
    }

    #[test]
    fn design_rows() {
        let d = build_design(&[s(4, 2, 3, 3)], &FeatureSpec::selected());
        assert_eq!(d.rows, vec![vec![4.0, 2.0, 2.0]]);
        assert_eq!(d.feature_names, vec!["QoS", "Int", "min{QoS,Int}"]);
        let d = build_design(&[s(4, 2, 3, 3)], &FeatureSpec::basic_three());
        assert_eq!(d.rows, vec![vec![4.0, 2.0, 3.0]]);
    }

    #[test]
    fn outlier_rule() {
        let data = [s(2, 2, 3, 4), s(2, 5, 3, 3), s(5, 5, 5, 5), s(3, 4, 1, 1)];
        let kept = filter_outliers(&data, OutlierMode::QosInt);
        assert_eq!(kept, vec![data[1], data[2]]);
        let kept = filter_outliers(&data, OutlierMode::QosIntQor);
        assert_eq!(kept, vec![data[1], data[2], data[3]]);
    }
}
