//! Rules, firing semantics and the volume-impurity (VI) index.
//!
//! A rule is a conjunction of univariate conditions plus a predicted label.
//! A `Below` condition fires when `x_p + margin_p <= b` (the left branch of
//! a split), an `AtOrAbove` condition when `x_p >= b` (the right branch).
//!
//! For the samples a rule fires on, with `N` fired and `L` of them
//! misclassified, the VI index is `N - w * L`.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureKind, Scale};
use crate::error::{Error, Result};
use crate::topology::Branch;

/// Misclassification weight `w >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Weight(f64);

impl Weight {
    pub fn new(w: f64) -> Result<Self> {
        if w.is_finite() && w >= 1.0 {
            Ok(Weight(w))
        } else {
            Err(Error::Config(format!(
                "weight {w} must be a finite number >= 1"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `N - w * L`.
    pub fn vi(self, fired: usize, misclassified: usize) -> f64 {
        fired as f64 - self.0 * misclassified as f64
    }
}

impl Default for Weight {
    fn default() -> Self {
        Weight(10.0)
    }
}

impl TryFrom<f64> for Weight {
    type Error = Error;
    fn try_from(w: f64) -> Result<Self> {
        Weight::new(w)
    }
}

impl From<Weight> for f64 {
    fn from(w: Weight) -> f64 {
        w.0
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    Below,
    AtOrAbove,
}

impl From<Branch> for Comparator {
    fn from(b: Branch) -> Self {
        match b {
            Branch::Left => Comparator::Below,
            Branch::Right => Comparator::AtOrAbove,
        }
    }
}

impl From<Comparator> for Branch {
    fn from(c: Comparator) -> Self {
        match c {
            Comparator::Below => Branch::Left,
            Comparator::AtOrAbove => Branch::Right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: usize,
    pub comparator: Comparator,
    /// Threshold in normalized units.
    pub threshold: f64,
    /// Left-branch margin of the feature, in normalized units.
    pub margin: f64,
}

impl Condition {
    pub fn holds(&self, x: f64) -> bool {
        match self.comparator {
            Comparator::Below => x + self.margin <= self.threshold,
            Comparator::AtOrAbove => x >= self.threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Exact,
    Bsccart,
    Rscrules,
    External,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Provenance::Exact => "exact",
            Provenance::Bsccart => "bsccart",
            Provenance::Rscrules => "rscrules",
            Provenance::External => "external",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    /// Predicted label; `None` means "majority of the fired samples".
    pub label: Option<usize>,
    /// Tree leaf the rule was read from, when it came from a tree.
    pub leaf: Option<usize>,
    pub provenance: Provenance,
    /// False for a leaf that the structure routes no sample to; such a rule
    /// never fires.
    pub reachable: bool,
}

impl Rule {
    pub fn new(conditions: Vec<Condition>, label: Option<usize>, provenance: Provenance) -> Self {
        Rule {
            conditions,
            label,
            leaf: None,
            provenance,
            reachable: true,
        }
    }

    pub fn fires(&self, sample: &[f64]) -> bool {
        self.reachable && self.conditions.iter().all(|c| c.holds(sample[c.feature]))
    }

    pub fn fires_at(&self, ds: &Dataset, i: usize) -> bool {
        self.reachable
            && self
                .conditions
                .iter()
                .all(|c| c.holds(ds.value(i, c.feature)))
    }

    /// Indices of the samples of `ds` the rule fires on.
    pub fn covered(&self, ds: &Dataset) -> Vec<usize> {
        (0..ds.n_samples())
            .filter(|&i| self.fires_at(ds, i))
            .collect()
    }

    /// Human-readable form with thresholds in original units.
    pub fn describe(&self, ds: &Dataset) -> String {
        let label = self
            .label
            .map(|k| {
                ds.label_names()
                    .get(k)
                    .cloned()
                    .unwrap_or_else(|| format!("#{k}"))
            })
            .unwrap_or_else(|| "<majority>".into());
        let conds: Vec<String> = self
            .conditions
            .iter()
            .map(|c| describe_condition(c, ds))
            .collect();
        let body = if !self.reachable {
            "<unreachable leaf>".to_string()
        } else if conds.is_empty() {
            "TRUE".to_string()
        } else {
            conds.join(" AND ")
        };
        format!("IF {body} THEN {label}")
    }
}

fn describe_condition(c: &Condition, ds: &Dataset) -> String {
    let meta = ds.feature(c.feature);
    match &meta.kind {
        FeatureKind::OneHot { column, category } if c.threshold > 0.0 && c.threshold <= 1.0 => {
            match c.comparator {
                Comparator::Below => format!("{column} != {category}"),
                Comparator::AtOrAbove => format!("{column} == {category}"),
            }
        }
        _ => {
            let op = match c.comparator {
                Comparator::Below => "<",
                Comparator::AtOrAbove => ">=",
            };
            format!(
                "{} {op} {}",
                meta.name,
                round_sig(meta.scale.denormalize(c.threshold))
            )
        }
    }
}

fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let digits = 6 - x.abs().log10().ceil() as i32;
    let f = 10f64.powi(digits);
    (x * f).round() / f
}

pub fn fire(rule: &Rule, sample: &[f64]) -> bool {
    rule.fires(sample)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViValue {
    /// Majority label (smallest index on ties).
    pub label: usize,
    pub misclassified: usize,
    pub vi: f64,
}

/// Majority label, misclassification count and VI for per-label counts.
pub fn vi_index(counts: &[usize], w: Weight) -> ViValue {
    let n: usize = counts.iter().sum();
    let (label, majority) = majority(counts);
    let misclassified = n - majority;
    ViValue {
        label,
        misclassified,
        vi: w.vi(n, misclassified),
    }
}

/// `(argmax, max)` with ties going to the smallest index; `(0, 0)` when empty.
pub fn majority(counts: &[usize]) -> (usize, usize) {
    counts.iter().enumerate().fold(
        (0, 0),
        |(bk, bc), (k, &c)| if c > bc { (k, c) } else { (bk, bc) },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleStats {
    pub total: usize,
    pub fired: usize,
    pub label_counts: Vec<usize>,
    pub label: usize,
    pub correct: usize,
    pub misclassified: usize,
    pub vi: f64,
    /// `correct / fired`; 1 by convention when nothing fired.
    pub precision: f64,
    pub coverage: f64,
    pub zero_fired: bool,
}

impl RuleStats {
    pub fn from_counts(
        label_counts: Vec<usize>,
        fixed_label: Option<usize>,
        total: usize,
        w: Weight,
    ) -> Self {
        let fired: usize = label_counts.iter().sum();
        let label = fixed_label.unwrap_or_else(|| majority(&label_counts).0);
        let correct = label_counts.get(label).copied().unwrap_or(0);
        let misclassified = fired - correct;
        RuleStats {
            total,
            fired,
            label,
            correct,
            misclassified,
            vi: w.vi(fired, misclassified),
            precision: if fired == 0 {
                1.0
            } else {
                correct as f64 / fired as f64
            },
            coverage: if total == 0 {
                0.0
            } else {
                fired as f64 / total as f64
            },
            zero_fired: fired == 0,
            label_counts,
        }
    }
}

/// Fires `rule` over `ds`. With a fixed label, misclassification counts
/// disagreements with it; otherwise the majority of the fired samples is
/// used.
pub fn evaluate(rule: &Rule, ds: &Dataset, w: Weight) -> RuleStats {
    let mut counts = vec![0usize; ds.n_labels().max(rule.label.map_or(0, |k| k + 1))];
    for i in 0..ds.n_samples() {
        if rule.fires_at(ds, i) {
            counts[ds.labels()[i]] += 1;
        }
    }
    RuleStats::from_counts(counts, rule.label, ds.n_samples(), w)
}

pub const RULE_FILE_VERSION: u32 = 1;

/// Serialized rule: conditions reference features by name and carry the
/// scale they were learned under, so the rule can be applied to data that
/// was normalized differently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleFile {
    pub version: u32,
    pub provenance: Provenance,
    pub leaf: Option<usize>,
    pub reachable: bool,
    pub label: Option<String>,
    pub text: String,
    pub conditions: Vec<ConditionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<RuleStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub feature: String,
    pub column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    pub comparator: Comparator,
    /// Threshold in original units.
    pub original_threshold: f64,
    pub threshold: f64,
    pub margin: f64,
    pub scale: Scale,
}

impl RuleFile {
    pub fn from_rule(rule: &Rule, ds: &Dataset, stats: Option<&RuleStats>) -> Self {
        let conditions = rule
            .conditions
            .iter()
            .map(|c| {
                let meta = ds.feature(c.feature);
                let category = match &meta.kind {
                    FeatureKind::OneHot { category, .. } => Some(category.clone()),
                    FeatureKind::Numerical { .. } => None,
                };
                ConditionRecord {
                    feature: meta.name.clone(),
                    column: meta.kind.column().to_string(),
                    category,
                    comparator: c.comparator,
                    original_threshold: meta.scale.denormalize(c.threshold),
                    threshold: c.threshold,
                    margin: c.margin,
                    scale: meta.scale,
                }
            })
            .collect();
        RuleFile {
            version: RULE_FILE_VERSION,
            provenance: rule.provenance,
            leaf: rule.leaf,
            reachable: rule.reachable,
            label: rule.label.map(|k| ds.label_names()[k].clone()),
            text: rule.describe(ds),
            conditions,
            stats: stats.cloned(),
        }
    }

    /// Resolves feature and label names against `ds`. Returns the rule and a
    /// copy of `ds` whose referenced features use the rule's scales.
    pub fn bind(&self, ds: &Dataset) -> Result<(Rule, Dataset)> {
        let mut scales = Vec::new();
        let mut conditions = Vec::new();
        for c in &self.conditions {
            let p = ds
                .feature_index(&c.feature)
                .ok_or_else(|| Error::UnknownFeature(c.feature.clone()))?;
            scales.push((p, c.scale));
            conditions.push(Condition {
                feature: p,
                comparator: c.comparator,
                threshold: c.threshold,
                margin: c.margin,
            });
        }
        let mut view = ds.with_scales(&scales);
        let label = self.label.as_deref().map(|name| view.ensure_label(name));
        let rule = Rule {
            conditions,
            label,
            leaf: self.leaf,
            provenance: self.provenance,
            reachable: self.reachable,
        };
        Ok((rule, view))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rule files always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::table;
    use crate::dataset::{preprocess, PreprocessOptions};

    fn w(x: f64) -> Weight {
        Weight::new(x).unwrap()
    }

    fn cond(feature: usize, comparator: Comparator, threshold: f64, margin: f64) -> Condition {
        Condition {
            feature,
            comparator,
            threshold,
            margin,
        }
    }

    #[test]
    fn firing() {
        let above = Rule::new(
            vec![cond(0, Comparator::AtOrAbove, 0.5, 0.1)],
            None,
            Provenance::External,
        );
        assert!(fire(&above, &[0.7]));
        let below = Rule::new(
            vec![cond(0, Comparator::Below, 0.5, 0.1)],
            None,
            Provenance::External,
        );
        assert!(!fire(&below, &[0.45]));
        assert!(fire(&below, &[0.4]));
        let empty = Rule::new(vec![], None, Provenance::External);
        assert!(fire(&empty, &[0.3, 0.9]));
        let dead = Rule {
            reachable: false,
            ..empty
        };
        assert!(!fire(&dead, &[0.3]));
    }

    #[test]
    fn weight_bounds() {
        assert!(Weight::new(1.0).is_ok());
        assert!(Weight::new(0.5).is_err());
        assert!(Weight::new(f64::NAN).is_err());
    }

    #[test]
    fn vi_reference_values() {
        assert_eq!(
            vi_index(&[1, 45], w(8.0)),
            ViValue {
                label: 1,
                misclassified: 1,
                vi: 38.0
            }
        );
        assert_eq!(vi_index(&[0, 38], w(10.0)).vi, 38.0);
        assert_eq!(
            vi_index(&[6, 53], w(2.0)),
            ViValue {
                label: 1,
                misclassified: 6,
                vi: 47.0
            }
        );
        assert_eq!(vi_index(&[3, 3], w(2.0)).label, 0);
        assert_eq!(vi_index(&[0, 0], w(2.0)).vi, 0.0);
    }

    fn ds() -> Dataset {
        let t = table("a,c,y\n0,u,p\n1,v,p\n2,u,n\n3,u,p\n", "c:cat,y:target");
        preprocess(&t, &PreprocessOptions::default()).unwrap()
    }

    #[test]
    fn evaluate_counts() {
        let ds = ds();
        let none = Rule::new(
            vec![cond(0, Comparator::AtOrAbove, 2.0, 0.0)],
            None,
            Provenance::External,
        );
        let s = evaluate(&none, &ds, w(10.0));
        assert!(s.zero_fired);
        assert_eq!((s.coverage, s.vi, s.precision), (0.0, 0.0, 1.0));

        let eps = ds.feature(0).margin();
        // a < 1/6 normalized -> first sample only
        let one = Rule::new(
            vec![cond(0, Comparator::Below, 1.0 / 6.0, eps)],
            None,
            Provenance::External,
        );
        let s = evaluate(&one, &ds, w(10.0));
        assert_eq!((s.fired, s.precision, s.vi), (1, 1.0, 1.0));

        // fixed label disagreeing with the majority
        let n = ds.label_index("n").unwrap();
        let all = Rule::new(vec![], Some(n), Provenance::External);
        let s = evaluate(&all, &ds, w(2.0));
        assert_eq!((s.correct, s.misclassified, s.vi), (1, 3, -2.0));
        let s = evaluate(&Rule { label: None, ..all }, &ds, w(2.0));
        assert_eq!((s.correct, s.misclassified, s.vi), (3, 1, 2.0));
    }

    #[test]
    fn rule_file_binds_by_name() {
        let ds = ds();
        let p = ds.feature_index("c=u").unwrap();
        let rule = Rule::new(
            vec![cond(p, Comparator::AtOrAbove, 0.5, ds.feature(p).margin())],
            Some(ds.label_index("p").unwrap()),
            Provenance::Exact,
        );
        let file = RuleFile::from_rule(&rule, &ds, Some(&evaluate(&rule, &ds, w(10.0))));
        assert_eq!(file.text, "IF c == u THEN p");
        let back = RuleFile::from_json(&file.to_json()).unwrap();
        let (bound, view) = back.bind(&ds).unwrap();
        assert_eq!(bound, rule);
        assert_eq!(
            evaluate(&bound, &view, w(10.0)),
            evaluate(&rule, &ds, w(10.0))
        );

        let mut stale = back.clone();
        stale.conditions[0].feature = "gone".into();
        assert!(matches!(stale.bind(&ds), Err(Error::UnknownFeature(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn vi_identity(counts in prop::collection::vec(0usize..50, 1..5), wv in 1.0f64..20.0) {
                let v = vi_index(&counts, w(wv));
                let n: usize = counts.iter().sum();
                let m = *counts.iter().max().unwrap();
                prop_assert_eq!(v.vi, n as f64 - wv * (n - m) as f64);
                prop_assert_eq!(counts[v.label], m);
            }

            #[test]
            fn adding_samples_moves_vi(counts in prop::collection::vec(0usize..30, 2..4), wv in 1u32..12) {
                let wt = w(wv as f64);
                let before = vi_index(&counts, wt);
                let mut right = counts.clone();
                right[before.label] += 1;
                prop_assert_eq!(vi_index(&right, wt).vi, before.vi + 1.0);
                // a sample of a label that is not the unique majority
                let other = (before.label + 1) % counts.len();
                let mut wrong = counts.clone();
                wrong[other] += 1;
                let after = vi_index(&wrong, wt).vi;
                prop_assert!(after <= before.vi + 1.0);
                if counts[other] + 1 < counts[before.label] {
                    prop_assert_eq!(after, before.vi + 1.0 - wt.value());
                }
            }

            #[test]
            fn vi_non_increasing_in_w(counts in prop::collection::vec(0usize..30, 2..4), a in 1.0f64..10.0, b in 1.0f64..10.0) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let v_lo = vi_index(&counts, w(lo));
                let v_hi = vi_index(&counts, w(hi));
                prop_assert!(v_hi.vi <= v_lo.vi);
                if v_lo.misclassified > 0 && hi > lo {
                    prop_assert!(v_hi.vi < v_lo.vi);
                }
            }

            #[test]
            fn firing_ignores_condition_order(xs in prop::collection::vec(0.0f64..1.0, 3), ts in prop::collection::vec(0.0f64..1.0, 3)) {
                let conds: Vec<Condition> = (0..3)
                    .map(|p| cond(p, if p % 2 == 0 { Comparator::Below } else { Comparator::AtOrAbove }, ts[p], 0.01))
                    .collect();
                let fwd = Rule::new(conds.clone(), None, Provenance::External);
                let rev = Rule::new(conds.into_iter().rev().collect(), None, Provenance::External);
                prop_assert_eq!(fire(&fwd, &xs), fire(&rev, &xs));
            }
        }
    }
}
