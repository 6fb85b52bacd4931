//! Fixed-depth binary tree arithmetic and branching structure constraints.
//!
//! Nodes are numbered breadth-first from the root (`1`); node `t` has
//! children `2t` (left) and `2t + 1` (right). For depth `D` the branch nodes
//! are `1..=2^D - 1` and the leaves `2^D..=2^(D+1) - 1`.
//!
//! A [`StructureSpec`] fixes, per branch node, whether it splits and which
//! feature group it draws from, and per leaf, whether it is a target whose
//! VI competes in the objective. Samples reaching a node that does not
//! split are routed to the rightmost leaf below it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureGroup, GroupKind};
use crate::error::{Error, Result};

/// Largest supported depth; keeps node indices and model sizes sane.
pub const MAX_DEPTH: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Left,
    Right,
}

impl Branch {
    pub fn of_child(child: usize) -> Branch {
        if child.is_multiple_of(2) {
            Branch::Left
        } else {
            Branch::Right
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeShape {
    depth: u32,
}

impl TreeShape {
    pub fn new(depth: u32) -> Result<Self> {
        if depth == 0 || depth > MAX_DEPTH {
            return Err(Error::Structure(format!(
                "depth {depth} outside 1..={MAX_DEPTH}"
            )));
        }
        Ok(TreeShape { depth })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// `T = 2^(D+1) - 1`.
    pub fn n_nodes(&self) -> usize {
        (1usize << (self.depth + 1)) - 1
    }

    pub fn n_branch(&self) -> usize {
        (1usize << self.depth) - 1
    }

    pub fn n_leaves(&self) -> usize {
        1usize << self.depth
    }

    pub fn branch_nodes(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.n_branch()
    }

    pub fn leaf_nodes(&self) -> std::ops::RangeInclusive<usize> {
        self.n_branch() + 1..=self.n_nodes()
    }

    pub fn is_branch(&self, t: usize) -> bool {
        t >= 1 && t <= self.n_branch()
    }

    pub fn is_leaf(&self, t: usize) -> bool {
        t > self.n_branch() && t <= self.n_nodes()
    }

    /// Depth of node `t` (root at 0).
    pub fn level(t: usize) -> u32 {
        usize::BITS - 1 - t.leading_zeros()
    }

    pub fn parent(&self, t: usize) -> Result<usize> {
        if t <= 1 || t > self.n_nodes() {
            return Err(Error::RootHasNoParent(t));
        }
        Ok(t / 2)
    }

    /// Root-to-`t` path as `(ancestor, branch taken)` pairs.
    pub fn path(&self, t: usize) -> Vec<(usize, Branch)> {
        let mut steps = Vec::with_capacity(Self::level(t) as usize);
        let mut child = t;
        while child > 1 {
            steps.push((child / 2, Branch::of_child(child)));
            child /= 2;
        }
        steps.reverse();
        steps
    }

    /// `(A_L(t), A_R(t))`, each in increasing node order.
    pub fn ancestors_lr(&self, t: usize) -> (Vec<usize>, Vec<usize>) {
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for (a, b) in self.path(t) {
            match b {
                Branch::Left => left.push(a),
                Branch::Right => right.push(a),
            }
        }
        (left, right)
    }

    /// Leaves of the subtree rooted at `t`, in increasing order.
    pub fn subtree_leaves(&self, t: usize) -> Vec<usize> {
        let shift = self.depth - Self::level(t);
        let first = t << shift;
        (first..first + (1 << shift)).collect()
    }

    pub fn rightmost_leaf(&self, t: usize) -> usize {
        let shift = self.depth - Self::level(t);
        ((t + 1) << shift) - 1
    }

    /// `E_L(t)`: all leaves below the left child of `t`.
    pub fn left_descendant_leaves(&self, t: usize) -> Vec<usize> {
        self.subtree_leaves(2 * t)
    }

    /// `E_R(t)`: the rightmost leaf below each child of `t`.
    pub fn rightmost_pair(&self, t: usize) -> [usize; 2] {
        [self.rightmost_leaf(2 * t), self.rightmost_leaf(2 * t + 1)]
    }
}

/// Branch split flags, group assignment and leaf target flags over a
/// [`TreeShape`]. Arrays are indexed by `t - 1` (branches) and
/// `t - 2^D` (leaves).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureSpec {
    shape: TreeShape,
    split: Vec<bool>,
    groups: Vec<Option<String>>,
    target: Vec<bool>,
}

impl StructureSpec {
    pub fn new(
        shape: TreeShape,
        split: Vec<bool>,
        groups: Vec<Option<String>>,
        target: Vec<bool>,
    ) -> Result<Self> {
        let spec = StructureSpec {
            shape,
            split,
            groups,
            target,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Depth-wise chain such as `cat-num`: every node at depth `d` uses the
    /// `d`-th group, all branches split and all leaves are targets.
    pub fn from_chain(chain: &str) -> Result<Self> {
        let names: Vec<&str> = chain.split('-').map(str::trim).collect();
        if names.iter().any(|n| n.is_empty()) {
            return Err(Error::Structure(format!("malformed chain {chain:?}")));
        }
        Self::from_chain_groups(&names)
    }

    pub fn from_chain_groups(names: &[&str]) -> Result<Self> {
        let shape = TreeShape::new(names.len() as u32)?;
        let groups = shape
            .branch_nodes()
            .map(|t| Some(names[TreeShape::level(t) as usize].to_string()))
            .collect();
        Self::new(
            shape,
            vec![true; shape.n_branch()],
            groups,
            vec![true; shape.n_leaves()],
        )
    }

    /// Explicit table form:
    ///
    /// ```text
    /// depth 2
    /// branch 1 split all
    /// branch 2 split num
    /// branch 3 none
    /// leaf 4 target
    /// leaf 7 target
    /// ```
    ///
    /// Every branch must be listed; unlisted leaves are not targets.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut depth = None;
        let mut branches: Vec<(usize, Option<String>)> = Vec::new();
        let mut leaves: Vec<(usize, bool)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::Structure(format!("line {}: cannot parse {line:?}", i + 1));
            let words: Vec<&str> = line.split_whitespace().collect();
            let node = || {
                words
                    .get(1)
                    .and_then(|w| w.parse::<usize>().ok())
                    .ok_or_else(bad)
            };
            match words.as_slice() {
                ["depth", d] => depth = Some(d.parse::<u32>().map_err(|_| bad())?),
                ["branch", _, "split", g] => branches.push((node()?, Some(g.to_string()))),
                ["branch", _, "none"] => branches.push((node()?, None)),
                ["leaf", _, "target"] => leaves.push((node()?, true)),
                ["leaf", _, "off"] => leaves.push((node()?, false)),
                _ => return Err(bad()),
            }
        }
        let shape =
            TreeShape::new(depth.ok_or_else(|| Error::Structure("missing `depth` line".into()))?)?;
        let mut split = vec![None; shape.n_branch()];
        let mut groups = vec![None; shape.n_branch()];
        for (t, g) in branches {
            if !shape.is_branch(t) {
                return Err(Error::Structure(format!("{t} is not a branch node")));
            }
            split[t - 1] = Some(g.is_some());
            groups[t - 1] = g;
        }
        let split = split
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| Error::Structure(format!("branch {} not listed", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        let mut target = vec![false; shape.n_leaves()];
        for (t, on) in leaves {
            if !shape.is_leaf(t) {
                return Err(Error::Structure(format!("{t} is not a leaf node")));
            }
            target[t - shape.n_leaves()] = on;
        }
        Self::new(shape, split, groups, target)
    }

    /// Table form when the text spans several lines or starts with a table
    /// keyword, chain form otherwise.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t.contains('\n') || t.starts_with("depth") {
            Self::parse_table(t)
        } else {
            Self::from_chain(t)
        }
    }

    fn validate(&self) -> Result<()> {
        let shape = self.shape;
        if self.split.len() != shape.n_branch() || self.groups.len() != shape.n_branch() {
            return Err(Error::Structure(
                "branch arrays do not match the tree shape".into(),
            ));
        }
        if self.target.len() != shape.n_leaves() {
            return Err(Error::Structure(
                "leaf array does not match the tree shape".into(),
            ));
        }
        for t in shape.branch_nodes() {
            if self.splits(t) && self.group(t).is_none() {
                return Err(Error::Structure(format!(
                    "branch {t} splits but has no group"
                )));
            }
            if t > 1 && self.splits(t) && !self.splits(t / 2) {
                return Err(Error::Structure(format!(
                    "branch {t} splits below non-splitting parent {}",
                    t / 2
                )));
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn splits(&self, t: usize) -> bool {
        self.split[t - 1]
    }

    pub fn group(&self, t: usize) -> Option<&str> {
        self.groups[t - 1].as_deref()
    }

    pub fn is_target(&self, t: usize) -> bool {
        self.target[t - self.shape.n_leaves()]
    }

    pub fn targets(&self) -> Vec<usize> {
        self.shape
            .leaf_nodes()
            .filter(|&t| self.is_target(t))
            .collect()
    }

    /// True when all splitting nodes at equal depth share one group.
    pub fn is_uniform(&self) -> bool {
        self.shape.branch_nodes().all(|t| {
            let level = TreeShape::level(t);
            self.shape
                .branch_nodes()
                .filter(|&s| TreeShape::level(s) == level && self.splits(s) && self.splits(t))
                .all(|s| self.group(s) == self.group(t))
        })
    }

    /// Chain form (`cat-num`) when the spec is one, the table with `; `
    /// separators otherwise.
    pub fn summary(&self) -> String {
        let chain = self.shape.branch_nodes().all(|t| self.splits(t))
            && self.shape.leaf_nodes().all(|t| self.is_target(t))
            && self.is_uniform();
        if chain {
            let names: Vec<&str> = (0..self.shape.depth)
                .map(|d| self.group(1 << d).expect("splitting nodes have groups"))
                .collect();
            names.join("-")
        } else {
            self.to_string().lines().collect::<Vec<_>>().join("; ")
        }
    }

    /// Group names used by splitting nodes, deduplicated in node order.
    pub fn group_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = Vec::new();
        for t in self.shape.branch_nodes().filter(|&t| self.splits(t)) {
            let g = self.group(t).expect("validated");
            if !names.contains(&g) {
                names.push(g);
            }
        }
        names
    }
}

impl fmt::Display for StructureSpec {
    /// Writes the table form accepted by [`StructureSpec::parse_table`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "depth {}", self.shape.depth)?;
        for t in self.shape.branch_nodes() {
            match self.group(t).filter(|_| self.splits(t)) {
                Some(g) => writeln!(f, "branch {t} split {g}")?,
                None => writeln!(f, "branch {t} none")?,
            }
        }
        for t in self.shape.leaf_nodes() {
            writeln!(
                f,
                "leaf {t} {}",
                if self.is_target(t) { "target" } else { "off" }
            )?;
        }
        Ok(())
    }
}

/// Per-branch-node variable fixings derived from a [`StructureSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFixing {
    pub node: usize,
    /// `d_t`.
    pub split: bool,
    pub group: Option<String>,
    /// Features whose `a_pt` may be 1: splittable members of the group.
    pub allowed: Vec<usize>,
    /// `b_t` fixed to 0.5 for categorical groups.
    pub fixed_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BscFixings {
    pub shape: TreeShape,
    pub nodes: Vec<NodeFixing>,
    /// `T_obj`.
    pub targets: Vec<usize>,
}

impl BscFixings {
    pub fn node(&self, t: usize) -> &NodeFixing {
        &self.nodes[t - 1]
    }
}

pub fn apply_bsc(
    spec: &StructureSpec,
    ds: &Dataset,
    groups: &[FeatureGroup],
) -> Result<BscFixings> {
    let shape = spec.shape();
    let mut nodes = Vec::with_capacity(shape.n_branch());
    for t in shape.branch_nodes() {
        let split = spec.splits(t);
        let group = spec.group(t).filter(|_| split);
        let (allowed, fixed_threshold) = match group {
            None => (Vec::new(), None),
            Some(name) => {
                let g = groups.iter().find(|g| g.name == name).ok_or_else(|| {
                    Error::Structure(format!("branch {t}: unknown feature group {name:?}"))
                })?;
                let allowed: Vec<usize> = g
                    .members
                    .iter()
                    .copied()
                    .filter(|&p| ds.feature(p).splittable())
                    .collect();
                if allowed.is_empty() {
                    return Err(Error::EmptyFeatureSet { node: t });
                }
                (allowed, (g.kind == GroupKind::Categorical).then_some(0.5))
            }
        };
        nodes.push(NodeFixing {
            node: t,
            split,
            group: group.map(str::to_string),
            allowed,
            fixed_threshold,
        });
    }
    let targets = spec.targets();
    if targets.is_empty() {
        return Err(Error::EmptyTargets);
    }
    Ok(BscFixings {
        shape,
        nodes,
        targets,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathStep {
    pub node: usize,
    pub branch: Branch,
    pub group: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetPath {
    pub leaf: usize,
    /// Conditions contributed by splitting ancestors, root first.
    pub steps: Vec<PathStep>,
    /// False when a non-splitting ancestor would have to be left through
    /// its left child; such a leaf never receives samples.
    pub reachable: bool,
}

pub fn target_paths(spec: &StructureSpec) -> Vec<TargetPath> {
    let shape = spec.shape();
    spec.targets()
        .into_iter()
        .map(|leaf| {
            let mut steps = Vec::new();
            let mut reachable = true;
            for (node, branch) in shape.path(leaf) {
                if spec.splits(node) {
                    steps.push(PathStep {
                        node,
                        branch,
                        group: spec.group(node).expect("validated").to_string(),
                    });
                } else if branch == Branch::Left {
                    reachable = false;
                }
            }
            TargetPath {
                leaf,
                steps,
                reachable,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::table;
    use crate::dataset::{derive_default_groups, preprocess, PreprocessOptions};

    fn d(depth: u32) -> TreeShape {
        TreeShape::new(depth).unwrap()
    }

    #[test]
    fn summary_prefers_chain_form() {
        assert_eq!(
            StructureSpec::from_chain("cat-num").unwrap().summary(),
            "cat-num"
        );
        let table = StructureSpec::parse("depth 1\nbranch 1 split num\nleaf 3 target").unwrap();
        assert_eq!(
            table.summary(),
            "depth 1; branch 1 split num; leaf 2 off; leaf 3 target"
        );
    }

    #[test]
    fn parents() {
        assert_eq!(d(2).parent(5).unwrap(), 2);
        assert_eq!(d(2).parent(7).unwrap(), 3);
        assert!(d(2).parent(1).is_err());
    }

    #[test]
    fn ancestors() {
        assert_eq!(d(2).ancestors_lr(4), (vec![1, 2], vec![]));
        assert_eq!(d(2).ancestors_lr(7), (vec![], vec![1, 3]));
        assert_eq!(d(2).ancestors_lr(5), (vec![1], vec![2]));
    }

    #[test]
    fn descendant_sets() {
        assert_eq!(d(2).left_descendant_leaves(1), vec![4, 5]);
        assert_eq!(d(2).left_descendant_leaves(2), vec![4]);
        assert_eq!(d(1).left_descendant_leaves(1), vec![2]);
        assert_eq!(d(2).rightmost_pair(1), [5, 7]);
        assert_eq!(d(2).rightmost_pair(3), [6, 7]);
        assert_eq!(d(1).rightmost_pair(1), [2, 3]);
    }

    #[test]
    fn shape_sizes() {
        let s = d(3);
        assert_eq!((s.n_nodes(), s.n_branch(), s.n_leaves()), (15, 7, 8));
        assert_eq!(
            s.leaf_nodes().collect::<Vec<_>>(),
            (8..=15).collect::<Vec<_>>()
        );
        assert!(TreeShape::new(0).is_err());
    }

    #[test]
    fn chain_expands_per_depth() {
        let spec = StructureSpec::from_chain("cat-num").unwrap();
        assert_eq!(spec.group(1), Some("cat"));
        assert_eq!(spec.group(2), Some("num"));
        assert_eq!(spec.group(3), Some("num"));
        assert_eq!(spec.targets(), vec![4, 5, 6, 7]);
        assert!(spec.is_uniform());
    }

    #[test]
    fn table_round_trip_and_validation() {
        let text = "depth 2\nbranch 1 split all\nbranch 2 split num\nbranch 3 none\nleaf 5 target\nleaf 7 target\n";
        let spec = StructureSpec::parse(text).unwrap();
        assert_eq!(StructureSpec::parse(&spec.to_string()).unwrap(), spec);
        assert_eq!(spec.targets(), vec![5, 7]);

        let broken = "depth 2\nbranch 1 none\nbranch 2 split all\nbranch 3 none\nleaf 4 target\n";
        assert!(StructureSpec::parse(broken).is_err());
        assert!(StructureSpec::parse("depth 2\nbranch 1 split all\n").is_err());
    }

    #[test]
    fn paths_skip_unsplit_ancestors() {
        let all = StructureSpec::from_chain("all-all").unwrap();
        let p7 = target_paths(&all)
            .into_iter()
            .find(|p| p.leaf == 7)
            .unwrap();
        assert_eq!(
            p7.steps,
            vec![
                PathStep {
                    node: 1,
                    branch: Branch::Right,
                    group: "all".into()
                },
                PathStep {
                    node: 3,
                    branch: Branch::Right,
                    group: "all".into()
                },
            ]
        );

        let partial = StructureSpec::new(
            d(2),
            vec![true, true, false],
            vec![Some("all".into()), Some("all".into()), None],
            vec![true; 4],
        )
        .unwrap();
        let paths = target_paths(&partial);
        assert!(!paths[2].reachable, "leaf 6 sits left of unsplit node 3");
        assert!(paths[3].reachable);
        assert_eq!(
            paths[3].steps,
            vec![PathStep {
                node: 1,
                branch: Branch::Right,
                group: "all".into()
            }]
        );
    }

    fn tiny() -> Dataset {
        let t = table("n,c,y\n1,a,p\n2,b,n\n3,a,p\n", "c:cat,y:target");
        preprocess(&t, &PreprocessOptions::default()).unwrap()
    }

    #[test]
    fn bsc_fixes_categorical_threshold() {
        let ds = tiny();
        let groups = derive_default_groups(&ds);
        let spec = StructureSpec::from_chain("cat").unwrap();
        let fx = apply_bsc(&spec, &ds, &groups).unwrap();
        assert!(fx.node(1).split);
        assert_eq!(fx.node(1).fixed_threshold, Some(0.5));
        assert_eq!(fx.node(1).allowed, vec![1, 2]);
        assert_eq!(fx.targets, vec![2, 3]);
        assert_eq!(apply_bsc(&spec, &ds, &groups).unwrap(), fx);
    }

    #[test]
    fn bsc_unsplit_nodes_and_errors() {
        let ds = tiny();
        let groups = derive_default_groups(&ds);
        let spec = StructureSpec::new(
            d(2),
            vec![true, false, false],
            vec![Some("num".into()), None, None],
            vec![true; 4],
        )
        .unwrap();
        let fx = apply_bsc(&spec, &ds, &groups).unwrap();
        assert!(!fx.node(2).split && !fx.node(3).split);
        assert!(fx.node(2).allowed.is_empty());

        let no_targets = StructureSpec::new(
            d(1),
            vec![true],
            vec![Some("all".into())],
            vec![false, false],
        )
        .unwrap();
        assert!(matches!(
            apply_bsc(&no_targets, &ds, &groups),
            Err(Error::EmptyTargets)
        ));
        let unknown = StructureSpec::from_chain("nope").unwrap();
        assert!(apply_bsc(&unknown, &ds, &groups).is_err());
    }

    #[test]
    fn bsc_rejects_group_without_splittable_features() {
        let t = table("n,c,y\n1,a,p\n2,a,n\n", "c:cat,y:target");
        let ds = preprocess(&t, &PreprocessOptions::default()).unwrap();
        let groups = derive_default_groups(&ds);
        let spec = StructureSpec::from_chain("cat").unwrap();
        assert!(matches!(
            apply_bsc(&spec, &ds, &groups),
            Err(Error::EmptyFeatureSet { node: 1 })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn leaf_ancestor_counts(depth in 1u32..8, pick in 0usize..1 << 8) {
                let s = d(depth);
                let leaf = s.n_branch() + 1 + pick % s.n_leaves();
                let (l, r) = s.ancestors_lr(leaf);
                prop_assert_eq!(l.len() + r.len(), depth as usize);
            }

            #[test]
            fn descendant_set_sizes(depth in 1u32..8, pick in 0usize..1 << 8) {
                let s = d(depth);
                let t = 1 + pick % s.n_branch();
                let er = s.rightmost_pair(t);
                prop_assert!(er[0] != er[1]);
                let below = depth - TreeShape::level(t) - 1;
                prop_assert_eq!(s.left_descendant_leaves(t).len(), 1usize << below);
            }
        }
    }
}
