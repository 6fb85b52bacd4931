//! Greedy learners that respect a structure: a CART-style tree grown with
//! Gini splits restricted to each node's feature group, and a beam search
//! over condition chains. Both return rules the exact search can use as an
//! incumbent.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::problem::{Problem, PASS_RIGHT_THRESHOLD};
use crate::rules::{majority, vi_index, Comparator, Condition, Provenance, Rule, Weight};
use crate::topology::{Branch, TreeShape};

pub const DEFAULT_BEAM_WIDTH: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicTree {
    pub shape: TreeShape,
    /// `(feature, threshold)` per branch node, `None` where the node does
    /// not split. Indexed by `t - 1`.
    pub splits: Vec<Option<(usize, f64)>>,
    /// Per-label counts per leaf, indexed by `t - 2^D`.
    pub leaf_counts: Vec<Vec<usize>>,
    /// Majority label per leaf (0 for empty leaves).
    pub leaf_labels: Vec<usize>,
}

impl HeuristicTree {
    pub fn split(&self, t: usize) -> Option<(usize, f64)> {
        self.splits[t - 1]
    }

    pub fn counts(&self, leaf: usize) -> &[usize] {
        &self.leaf_counts[leaf - self.shape.n_leaves()]
    }

    /// Indented text dump with thresholds in original units.
    pub fn dump(&self, ds: &Dataset) -> String {
        let mut s = String::new();
        self.dump_node(ds, 1, 0, &mut s);
        s
    }

    fn dump_node(&self, ds: &Dataset, t: usize, indent: usize, s: &mut String) {
        let pad = "  ".repeat(indent);
        if self.shape.is_leaf(t) {
            let _ = writeln!(
                s,
                "{pad}leaf {t}: {:?} -> {}",
                self.counts(t),
                self.leaf_labels[t - self.shape.n_leaves()]
            );
            return;
        }
        match self.split(t) {
            Some((p, b)) => {
                let f = ds.feature(p);
                let _ = writeln!(s, "{pad}node {t}: {} < {}", f.name, f.scale.denormalize(b));
            }
            None => {
                let _ = writeln!(s, "{pad}node {t}: no split");
            }
        }
        self.dump_node(ds, 2 * t, indent + 1, s);
        self.dump_node(ds, 2 * t + 1, indent + 1, s);
    }
}

fn gini_sum(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let sq: f64 = counts.iter().map(|&c| (c as f64 / n).powi(2)).sum();
    n * (1.0 - sq)
}

fn label_counts(ds: &Dataset, set: &[usize]) -> Vec<usize> {
    let mut counts = vec![0usize; ds.n_labels()];
    for &i in set {
        counts[ds.labels()[i]] += 1;
    }
    counts
}

fn partition(ds: &Dataset, set: &[usize], p: usize, b: f64) -> (Vec<usize>, Vec<usize>) {
    let m = ds.feature(p).margin();
    set.iter().partition(|&&i| ds.value(i, p) + m <= b)
}

/// Grows the tree top-down and returns it with the best target-leaf rule
/// (ties to the smallest leaf).
pub fn bsccart_fit(problem: &Problem<'_>, w: Weight) -> (HeuristicTree, Rule) {
    let ds = problem.ds;
    let shape = problem.shape();
    let mut splits = vec![None; shape.n_branch()];
    let mut leaf_counts = vec![Vec::new(); shape.n_leaves()];
    let mut stack = vec![(1usize, (0..ds.n_samples()).collect::<Vec<usize>>())];
    while let Some((t, set)) = stack.pop() {
        if shape.is_leaf(t) {
            leaf_counts[t - shape.n_leaves()] = label_counts(ds, &set);
            continue;
        }
        let node = problem.node(t);
        let (left, right) = if node.split {
            let (p, b) = best_gini_split(problem, t, &set);
            splits[t - 1] = Some((p, b));
            partition(ds, &set, p, b)
        } else {
            (Vec::new(), set)
        };
        stack.push((2 * t + 1, right));
        stack.push((2 * t, left));
    }
    let leaf_labels = leaf_counts.iter().map(|c| majority(c).0).collect();
    let tree = HeuristicTree {
        shape,
        splits,
        leaf_counts,
        leaf_labels,
    };

    let mut best: Option<(f64, Rule)> = None;
    for path in &problem.paths {
        let counts = tree.counts(path.leaf);
        let v = vi_index(counts, w);
        if best.as_ref().is_some_and(|(b, _)| v.vi <= *b) {
            continue;
        }
        let rule = if path.reachable {
            let steps: Vec<(usize, f64)> = path
                .steps
                .iter()
                .map(|s| tree.split(s.node).expect("splitting ancestor"))
                .collect();
            problem.path_rule(path, &steps, v.label, Provenance::Bsccart)
        } else {
            problem.path_rule(path, &[], v.label, Provenance::Bsccart)
        };
        best = Some((v.vi, rule));
    }
    (tree, best.expect("structure has target leaves").1)
}

/// Lowest weighted Gini over proper splits, ties to the smallest
/// `(feature, threshold)`. A pure set, or one no candidate separates, gets
/// a split that leaves it whole.
fn best_gini_split(problem: &Problem<'_>, t: usize, set: &[usize]) -> (usize, f64) {
    let ds = problem.ds;
    let node = problem.node(t);
    let total = label_counts(ds, set);
    let pure = total.iter().filter(|&&c| c > 0).count() <= 1;
    if !pure {
        let mut best: Option<(f64, usize, f64)> = None;
        for &p in &node.allowed {
            for b in problem.node_thresholds(node, p) {
                let (left, right) = partition(ds, set, p, b);
                if left.is_empty() || right.is_empty() {
                    continue;
                }
                let g = gini_sum(&label_counts(ds, &left)) + gini_sum(&label_counts(ds, &right));
                if best.is_none_or(|(bg, _, _)| g < bg - 1e-12) {
                    best = Some((g, p, b));
                }
            }
        }
        if let Some((_, p, b)) = best {
            return (p, b);
        }
    }
    match node.fixed_threshold {
        None => (node.allowed[0], PASS_RIGHT_THRESHOLD),
        Some(b) => {
            let whole = node.allowed.iter().copied().find(|&p| {
                let (left, right) = partition(ds, set, p, b);
                left.is_empty() || right.is_empty()
            });
            (whole.unwrap_or(node.allowed[0]), b)
        }
    }
}

#[derive(Clone)]
struct Candidate {
    conditions: Vec<Condition>,
    covered: Vec<usize>,
    vi: f64,
    label: usize,
}

/// Beam search over condition chains, one condition per level. The
/// structure must split every branch with one group per level. Chains that
/// can no longer reach a target leaf are dropped. The best chain seen at any
/// level is returned, completed to full length with conditions that keep its
/// coverage; when no such completion ends on a target the best full-length
/// chain is returned instead.
pub fn rscrules_fit(problem: &Problem<'_>, w: Weight, beam_width: usize) -> Result<Rule> {
    let ds = problem.ds;
    let shape = problem.shape();
    let spec = &problem.spec;
    if !spec.is_uniform() || shape.branch_nodes().any(|t| !spec.splits(t)) {
        return Err(Error::Structure(
            "beam search needs a chain: every branch splits, one group per level".into(),
        ));
    }
    if beam_width == 0 {
        return Err(Error::Config("beam width must be positive".into()));
    }
    let depth = shape.depth() as usize;
    // leftmost node of each level carries that level's group
    let level_node = |l: usize| problem.node(1 << l);

    let all: Vec<usize> = (0..ds.n_samples()).collect();
    let root = vi_index(&label_counts(ds, &all), w);
    let mut beam = vec![Candidate {
        conditions: Vec::new(),
        covered: all,
        vi: root.vi,
        label: root.label,
    }];
    let mut best_any: Option<Candidate> = None;
    for level in 0..depth {
        let node = level_node(level);
        let mut seen: HashSet<(usize, Vec<usize>)> = HashSet::new();
        let mut next: Vec<Candidate> = Vec::new();
        for cand in &beam {
            for &p in &node.allowed {
                let margin = ds.feature(p).margin();
                let mut thresholds = problem.node_thresholds(node, p);
                if problem.allows_pass_right(node) {
                    thresholds.insert(0, PASS_RIGHT_THRESHOLD);
                }
                for comparator in [Comparator::Below, Comparator::AtOrAbove] {
                    for &b in &thresholds {
                        let c = Condition {
                            feature: p,
                            comparator,
                            threshold: b,
                            margin,
                        };
                        let covered: Vec<usize> = cand
                            .covered
                            .iter()
                            .copied()
                            .filter(|&i| c.holds(ds.value(i, p)))
                            .collect();
                        let child = 2 * node_of(&cand.conditions)
                            + usize::from(comparator == Comparator::AtOrAbove);
                        if !seen.insert((child, covered.clone())) {
                            continue;
                        }
                        let v = vi_index(&label_counts(ds, &covered), w);
                        let mut conditions = cand.conditions.clone();
                        conditions.push(c);
                        next.push(Candidate {
                            conditions,
                            covered,
                            vi: v.vi,
                            label: v.label,
                        });
                    }
                }
            }
        }
        next.retain(|c| {
            shape
                .subtree_leaves(node_of(&c.conditions))
                .into_iter()
                .any(|l| spec.is_target(l))
        });
        // stable: ties keep generation order
        next.sort_by(|a, b| b.vi.total_cmp(&a.vi));
        next.truncate(beam_width);
        let completed = next
            .iter()
            .filter(|c| best_any.as_ref().is_none_or(|b| c.vi > b.vi))
            .find_map(|c| {
                complete(problem, c.clone(), depth)
                    .filter(|f| spec.is_target(node_of(&f.conditions)))
            });
        if completed.is_some() {
            best_any = completed;
        }
        beam = next;
    }

    let full = beam
        .into_iter()
        .next()
        .ok_or_else(|| Error::Structure("beam search found no chain".into()))?;
    let chosen = best_any.filter(|c| c.vi >= full.vi).unwrap_or(full);
    Ok(Rule {
        leaf: Some(node_of(&chosen.conditions)),
        conditions: chosen.conditions,
        label: Some(chosen.label),
        provenance: Provenance::Rscrules,
        reachable: true,
    })
}

/// Node reached by following `conditions` from the root.
fn node_of(conditions: &[Condition]) -> usize {
    conditions.iter().fold(1, |t, c| {
        2 * t + usize::from(c.comparator == Comparator::AtOrAbove)
    })
}

/// Pads `cand` to `depth` conditions without changing what it covers.
fn complete(problem: &Problem<'_>, mut cand: Candidate, depth: usize) -> Option<Candidate> {
    let ds = problem.ds;
    for level in cand.conditions.len()..depth {
        let node = problem.node(1 << level);
        let keeps = |c: &Condition| {
            cand.covered
                .iter()
                .all(|&i| c.holds(ds.value(i, c.feature)))
        };
        let pad = if problem.allows_pass_right(node) {
            let p = node.allowed[0];
            Some(Condition {
                feature: p,
                comparator: Comparator::from(Branch::Right),
                threshold: PASS_RIGHT_THRESHOLD,
                margin: ds.feature(p).margin(),
            })
        } else {
            let b = node.fixed_threshold.unwrap_or(PASS_RIGHT_THRESHOLD);
            node.allowed
                .iter()
                .flat_map(|&p| {
                    [Comparator::Below, Comparator::AtOrAbove].map(|comparator| Condition {
                        feature: p,
                        comparator,
                        threshold: b,
                        margin: ds.feature(p).margin(),
                    })
                })
                .find(|c| keeps(c))
        }?;
        debug_assert!(keeps(&pad));
        cand.conditions.push(pad);
    }
    Some(cand)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::table;
    use crate::dataset::{derive_default_groups, preprocess, PreprocessOptions};
    use crate::rules::evaluate;
    use crate::search::{solve, Budget};
    use crate::topology::StructureSpec;

    fn ds_of(csv: &str, schema: &str) -> Dataset {
        preprocess(&table(csv, schema), &PreprocessOptions::default()).unwrap()
    }

    fn problem<'a>(ds: &'a Dataset, spec: &str) -> Problem<'a> {
        Problem::new(
            ds,
            &StructureSpec::parse(spec).unwrap(),
            &derive_default_groups(ds),
        )
        .unwrap()
    }

    fn w(x: f64) -> Weight {
        Weight::new(x).unwrap()
    }

    #[test]
    fn halves_split_at_midpoint() {
        let ds = ds_of("x,y\n0.1,0\n0.2,0\n0.8,1\n0.9,1\n", "y:target");
        let pr = problem(&ds, "all");
        let (tree, rule) = bsccart_fit(&pr, w(10.0));
        let (p, b) = tree.split(1).unwrap();
        assert_eq!(p, 0);
        // normalized midpoint between 0.2 and 0.8
        assert!((b - 0.5).abs() < 1e-12);
        assert_eq!(evaluate(&rule, &ds, w(10.0)).vi, 2.0);
        assert_eq!(solve(&pr, w(10.0), &Budget::default()).i_max, Some(2.0));
    }

    #[test]
    fn pure_node_gets_pass_through_split() {
        let ds = ds_of("x,y\n0.1,1\n0.5,1\n0.9,1\n", "y:target");
        let pr = problem(&ds, "all");
        let (tree, rule) = bsccart_fit(&pr, w(10.0));
        assert_eq!(tree.split(1), Some((0, 0.0)));
        assert_eq!(tree.counts(2), &[0]);
        assert_eq!(tree.counts(3), &[3]);
        assert_eq!(rule.leaf, Some(3));
        assert_eq!(evaluate(&rule, &ds, w(10.0)).vi, 3.0);
    }

    #[test]
    fn nodes_partition_parent() {
        let ds = ds_of(
            "a,b,y\n1,5,p\n2,3,n\n3,1,p\n4,4,n\n5,2,p\n6,6,p\n",
            "y:target",
        );
        let pr = problem(&ds, "all-all");
        let (tree, rule) = bsccart_fit(&pr, w(2.0));
        let total: usize = tree.leaf_counts.iter().flatten().sum();
        assert_eq!(total, 6);
        assert!(pr.check_rule(&rule).is_ok());
        assert!(tree.dump(&ds).contains("leaf 4"));
    }

    #[test]
    fn respects_groups_and_unsplit_nodes() {
        let ds = ds_of("a,c,y\n1,u,p\n2,v,n\n3,u,p\n4,v,n\n", "c:cat,y:target");
        let pr = problem(
            &ds,
            "depth 2\nbranch 1 split cat\nbranch 2 none\nbranch 3 split num\nleaf 6 target\nleaf 7 target\nleaf 4 target\n",
        );
        let (tree, rule) = bsccart_fit(&pr, w(10.0));
        let (p, b) = tree.split(1).unwrap();
        assert!(ds.feature(p).kind.is_one_hot() && b == 0.5);
        assert_eq!(tree.split(2), None);
        assert!(!ds.feature(tree.split(3).unwrap().0).kind.is_one_hot());
        assert!(pr.check_rule(&rule).is_ok());
    }

    #[test]
    fn beam_depth_one_is_exhaustive() {
        let ds = ds_of(
            "a,b,y\n1,5,p\n2,3,n\n3,1,p\n4,4,n\n5,2,p\n6,6,p\n7,0,n\n",
            "y:target",
        );
        let pr = problem(&ds, "all");
        for wv in [1.0, 2.0, 10.0] {
            let rule = rscrules_fit(&pr, w(wv), usize::MAX).unwrap();
            let exact = solve(&pr, w(wv), &Budget::default()).i_max.unwrap();
            assert_eq!(evaluate(&rule, &ds, w(wv)).vi, exact);
            assert!(pr.check_rule(&rule).is_ok());
        }
    }

    #[test]
    fn beam_recovers_single_condition() {
        let rows: String = (0..20)
            .map(|i| format!("{i},{},{}\n", (i * 7) % 5, if i >= 12 { "p" } else { "n" }))
            .collect();
        let ds = ds_of(&format!("a,b,y\n{rows}"), "y:target");
        let pr = problem(&ds, "all-all");
        let rule = rscrules_fit(&pr, w(10.0), DEFAULT_BEAM_WIDTH).unwrap();
        let stats = evaluate(&rule, &ds, w(10.0));
        assert_eq!((stats.vi, stats.precision), (12.0, 1.0));
        assert_eq!(rule.conditions.len(), 2);
        assert!(pr.check_rule(&rule).is_ok());
    }

    #[test]
    fn beam_needs_chain() {
        let ds = ds_of("a,y\n1,p\n2,n\n", "y:target");
        let pr = problem(
            &ds,
            "depth 2\nbranch 1 split all\nbranch 2 none\nbranch 3 split all\nleaf 7 target\n",
        );
        assert!(rscrules_fit(&pr, w(10.0), 5).is_err());
    }

    #[test]
    fn beam_ends_on_a_target_leaf() {
        // the pure low side would win, but only the right leaf counts
        let ds = ds_of("x,y\n1,a\n2,a\n3,a\n4,b\n5,a\n6,b\n", "y:target");
        let pr = problem(&ds, "depth 1\nbranch 1 split all\nleaf 3 target");
        let rule = rscrules_fit(&pr, w(2.0), 5).unwrap();
        assert_eq!(rule.leaf, Some(3));
        assert!(pr.check_rule(&rule).is_ok());
        let exact = solve(&pr, w(2.0), &Budget::default()).i_max.unwrap();
        assert!(evaluate(&rule, &ds, w(2.0)).vi <= exact);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(60))]

            #[test]
            fn heuristics_never_beat_exact(
                rows in prop::collection::vec((0u8..6, 0u8..4, 0u8..3, 0u8..2), 3..25),
                chain in prop::sample::select(vec!["all", "all-all", "num-cat", "cat-num", "all-num"]),
                wv in prop::sample::select(vec![1.0, 2.0, 10.0]),
                beam in 1usize..6,
                target_bits in 1u32..16,
            ) {
                let csv: String = std::iter::once("a,b,c,y\n".to_string())
                    .chain(rows.iter().map(|(a, b, c, y)| format!("{a},{b},k{c},l{y}\n")))
                    .collect();
                let ds = ds_of(&csv, "c:cat,y:target");
                let chain_spec = StructureSpec::from_chain(chain).unwrap();
                let shape = chain_spec.shape();
                let targets: Vec<bool> = (0..shape.n_leaves()).map(|j| target_bits >> j & 1 == 1).collect();
                prop_assume!(targets.iter().any(|&t| t));
                let spec = StructureSpec::new(
                    shape,
                    vec![true; shape.n_branch()],
                    shape.branch_nodes().map(|t| chain_spec.group(t).map(str::to_string)).collect(),
                    targets,
                ).unwrap();
                let pr = Problem::new(&ds, &spec, &derive_default_groups(&ds));
                prop_assume!(pr.is_ok());
                let pr = pr.unwrap();
                let exact = solve(&pr, w(wv), &Budget::default()).i_max.unwrap();
                let (_, cart) = bsccart_fit(&pr, w(wv));
                prop_assert!(pr.check_rule(&cart).is_ok());
                prop_assert!(evaluate(&cart, &ds, w(wv)).vi <= exact);
                let beam_rule = rscrules_fit(&pr, w(wv), beam).unwrap();
                prop_assert!(pr.check_rule(&beam_rule).is_ok());
                prop_assert!(evaluate(&beam_rule, &ds, w(wv)).vi <= exact);
                let again = bsccart_fit(&pr, w(wv)).1;
                prop_assert_eq!(again, cart);
            }
        }
    }
}
