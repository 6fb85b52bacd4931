use crate::dataset::{Dataset, FeatureGroup};
use crate::error::{Error, Result};
use crate::rules::{Comparator, Condition, Provenance, Rule};
use crate::topology::{
    apply_bsc, target_paths, BscFixings, NodeFixing, PathStep, StructureSpec, TargetPath, TreeShape,
};

/// Threshold of the split that sends every training sample right
/// (`x >= 0` holds for all normalized training values).
pub const PASS_RIGHT_THRESHOLD: f64 = 0.0;

/// Thresholds realizing every distinct left/right partition of a splittable
/// feature exactly once: midpoints between adjacent distinct values, or
/// `0.5` for a one-hot feature.
pub fn candidate_thresholds(ds: &Dataset, feature: usize) -> Result<Vec<f64>> {
    let meta = ds.feature(feature);
    if !meta.splittable() {
        return Err(Error::Unsplittable(feature));
    }
    if meta.kind.is_one_hot() {
        return Ok(vec![0.5]);
    }
    Ok(ds
        .distinct_values(feature)
        .windows(2)
        .map(|w| 0.5 * (w[0] + w[1]))
        .collect())
}

/// A dataset bound to a structure: BSC fixings, target paths and per-feature
/// candidate thresholds. Shared by the exact search, the heuristics and the
/// MIP builder.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub ds: &'a Dataset,
    pub spec: StructureSpec,
    pub fixings: BscFixings,
    pub paths: Vec<TargetPath>,
    thresholds: Vec<Vec<f64>>,
}

impl<'a> Problem<'a> {
    pub fn new(ds: &'a Dataset, spec: &StructureSpec, groups: &[FeatureGroup]) -> Result<Self> {
        if ds.n_samples() == 0 {
            return Err(Error::EmptyDataset);
        }
        let fixings = apply_bsc(spec, ds, groups)?;
        let thresholds = (0..ds.n_features())
            .map(|p| candidate_thresholds(ds, p).unwrap_or_default())
            .collect();
        Ok(Problem {
            ds,
            spec: spec.clone(),
            fixings,
            paths: target_paths(spec),
            thresholds,
        })
    }

    pub fn shape(&self) -> TreeShape {
        self.fixings.shape
    }

    pub fn node(&self, t: usize) -> &NodeFixing {
        self.fixings.node(t)
    }

    pub fn thresholds(&self, feature: usize) -> &[f64] {
        &self.thresholds[feature]
    }

    /// Thresholds a node may use on `feature`, ascending.
    pub fn node_thresholds(&self, node: &NodeFixing, feature: usize) -> Vec<f64> {
        match node.fixed_threshold {
            Some(b) => vec![b],
            None => self.thresholds[feature].clone(),
        }
    }

    /// Whether the node may route all of its samples right.
    pub fn allows_pass_right(&self, node: &NodeFixing) -> bool {
        node.split && node.fixed_threshold.is_none()
    }

    pub fn condition(&self, step: &PathStep, feature: usize, threshold: f64) -> Condition {
        Condition {
            feature,
            comparator: Comparator::from(step.branch),
            threshold,
            margin: self.ds.feature(feature).margin(),
        }
    }

    /// Rule for `path` with one `(feature, threshold)` per step. A
    /// structurally empty leaf takes no splits.
    pub fn path_rule(
        &self,
        path: &TargetPath,
        splits: &[(usize, f64)],
        label: usize,
        provenance: Provenance,
    ) -> Rule {
        debug_assert!(splits.len() == path.steps.len() || (!path.reachable && splits.is_empty()));
        let conditions = path
            .steps
            .iter()
            .zip(splits)
            .map(|(s, &(p, b))| self.condition(s, p, b))
            .collect();
        Rule {
            conditions,
            label: Some(label),
            leaf: Some(path.leaf),
            provenance,
            reachable: path.reachable,
        }
    }

    /// Checks that `rule` is a root-to-leaf path of a tree admissible under
    /// the structure and returns the path it follows.
    pub fn check_rule(&self, rule: &Rule) -> Result<&TargetPath> {
        let leaf = rule
            .leaf
            .ok_or_else(|| Error::RuleViolatesSpec("rule has no leaf".into()))?;
        let path = self
            .paths
            .iter()
            .find(|p| p.leaf == leaf)
            .ok_or_else(|| Error::RuleViolatesSpec(format!("leaf {leaf} is not a target")))?;
        if !path.reachable {
            return if rule.reachable && !rule.conditions.is_empty() {
                Err(Error::RuleViolatesSpec(format!(
                    "leaf {leaf} is structurally empty"
                )))
            } else {
                Ok(path)
            };
        }
        if rule.conditions.len() != path.steps.len() {
            return Err(Error::RuleViolatesSpec(format!(
                "leaf {leaf} needs {} conditions, rule has {}",
                path.steps.len(),
                rule.conditions.len()
            )));
        }
        for (step, c) in path.steps.iter().zip(&rule.conditions) {
            let node = self.node(step.node);
            if Comparator::from(step.branch) != c.comparator {
                return Err(Error::RuleViolatesSpec(format!(
                    "node {}: wrong direction",
                    step.node
                )));
            }
            if !node.allowed.contains(&c.feature) {
                return Err(Error::RuleViolatesSpec(format!(
                    "node {}: feature {} not in group {:?}",
                    step.node, c.feature, node.group
                )));
            }
            if let Some(b) = node.fixed_threshold {
                if c.threshold != b {
                    return Err(Error::RuleViolatesSpec(format!(
                        "node {}: threshold must be {b}",
                        step.node
                    )));
                }
            }
            if !(0.0..=1.0).contains(&c.threshold) {
                return Err(Error::RuleViolatesSpec(format!(
                    "node {}: threshold outside [0, 1]",
                    step.node
                )));
            }
        }
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::table;
    use crate::dataset::{derive_default_groups, preprocess, PreprocessOptions};

    #[test]
    fn midpoint_thresholds() {
        let t = table("a,b,c,y\n0,5,x,p\n1,5,y,n\n2,6,x,p\n", "c:cat,y:target");
        let ds = preprocess(&t, &PreprocessOptions::default()).unwrap();
        assert_eq!(candidate_thresholds(&ds, 0).unwrap(), vec![0.25, 0.75]);
        assert_eq!(candidate_thresholds(&ds, 1).unwrap(), vec![0.5]);
        assert_eq!(candidate_thresholds(&ds, 2).unwrap(), vec![0.5]);
        let constant = preprocess(
            &table("a,y\n1,p\n1,n\n", "y:target"),
            &PreprocessOptions::default(),
        )
        .unwrap();
        assert!(matches!(
            candidate_thresholds(&constant, 0),
            Err(Error::Unsplittable(0))
        ));
    }

    #[test]
    fn thresholds_partition_exactly() {
        let t = table("a,y\n0,p\n0.1,n\n0.3,p\n0.35,n\n1,p\n", "y:target");
        let ds = preprocess(&t, &PreprocessOptions::default()).unwrap();
        let m = ds.feature(0).margin();
        let th = candidate_thresholds(&ds, 0).unwrap();
        for (j, &b) in th.iter().enumerate() {
            let left = ds.column(0).iter().filter(|&&x| x + m <= b).count();
            let right = ds.column(0).iter().filter(|&&x| x >= b).count();
            assert_eq!((left, right), (j + 1, ds.n_samples() - j - 1));
        }
    }

    #[test]
    fn rule_admissibility() {
        let t = table("a,c,y\n0,x,p\n1,y,n\n2,x,p\n", "c:cat,y:target");
        let ds = preprocess(&t, &PreprocessOptions::default()).unwrap();
        let groups = derive_default_groups(&ds);
        let problem =
            Problem::new(&ds, &StructureSpec::from_chain("num").unwrap(), &groups).unwrap();
        let path = problem.paths[0].clone();
        let ok = problem.path_rule(&path, &[(0, 0.25)], 0, Provenance::External);
        assert!(problem.check_rule(&ok).is_ok());
        let wrong_group = problem.path_rule(&path, &[(1, 0.5)], 0, Provenance::External);
        assert!(problem.check_rule(&wrong_group).is_err());
        let mut flipped = ok.clone();
        flipped.conditions[0].comparator = Comparator::AtOrAbove;
        assert!(problem.check_rule(&flipped).is_err());
    }
}
