//! Exact maximization of the VI index over all trees admissible under a
//! structure.
//!
//! The objective only depends on the target leaf with the largest VI, and
//! the samples reaching a leaf depend only on the splits of its ancestors.
//! Splits at nodes off a leaf's root-to-leaf path never change that leaf's
//! sample set, and any split choice at them stays feasible. The optimum is
//! therefore the best value over target leaves of an independent
//! conjunction search along each leaf's path:
//!
//! * path positions are the splitting ancestors, root first; each position
//!   picks a feature from its node's allowed set and a threshold, with the
//!   direction fixed by the path;
//! * a node whose threshold is not fixed may also send every sample right
//!   (`b = 0`), which a tree uses to "switch off" a forced split;
//! * ancestors that do not split contribute no condition; a leaf left of
//!   such an ancestor never receives samples and scores 0.
//!
//! For a sample set `S`, every refinement `S' ⊆ S` satisfies
//! `VI(S') = |S'| - w L(S') <= M(S') <= max_k count_k(S)` when `w >= 1`,
//! so a partial path whose majority count cannot beat the incumbent is
//! pruned. The innermost position is evaluated with one sorted sweep per
//! feature.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::{Problem, PASS_RIGHT_THRESHOLD};
use crate::rules::{evaluate, majority, vi_index, Provenance, Rule, Weight};
use crate::topology::{Branch, PathStep, TargetPath};

pub const DEFAULT_TIME_LIMIT: Duration = Duration::from_secs(600);

#[derive(Debug, Clone)]
pub struct Budget {
    pub time_limit: Duration,
    /// Feasible rule whose VI seeds the incumbent.
    pub incumbent: Option<Rule>,
    /// Explore the children of each position in decreasing order of their
    /// majority count instead of lexicographic order.
    pub best_first: bool,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            time_limit: DEFAULT_TIME_LIMIT,
            incumbent: None,
            best_first: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    TimeLimit,
}

/// One incumbent improvement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Improvement {
    pub step: usize,
    pub vi: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct OptResult {
    pub rule: Option<Rule>,
    pub i_max: Option<f64>,
    pub upper_bound: f64,
    pub status: Status,
    pub elapsed: Duration,
    pub time_to_best: Duration,
    pub nodes: u64,
    pub trace: Vec<Improvement>,
}

impl OptResult {
    /// `step, VI, seconds` lines.
    pub fn trace_log(&self) -> String {
        self.trace
            .iter()
            .map(|s| format!("{}, {}, {:.3}\n", s.step, s.vi, s.seconds))
            .collect()
    }
}

const CLOCK_EVERY: u64 = 256;

struct Search<'p, 'a> {
    problem: &'p Problem<'a>,
    w: Weight,
    best_first: bool,
    best: f64,
    best_rule: Option<Rule>,
    stack: Vec<(usize, f64)>,
    start: Instant,
    deadline: Instant,
    time_to_best: Duration,
    nodes: u64,
    timed_out: bool,
    trace: Vec<Improvement>,
}

pub fn solve(problem: &Problem<'_>, w: Weight, budget: &Budget) -> OptResult {
    let start = Instant::now();
    let mut s = Search {
        problem,
        w,
        best_first: budget.best_first,
        best: f64::NEG_INFINITY,
        best_rule: None,
        stack: Vec::new(),
        start,
        deadline: start + budget.time_limit,
        time_to_best: Duration::ZERO,
        nodes: 0,
        timed_out: false,
        trace: Vec::new(),
    };
    if let Some(rule) = &budget.incumbent {
        let vi = evaluate(rule, problem.ds, w).vi;
        s.improve(vi, rule.clone());
    }

    let all: Vec<u32> = (0..problem.ds.n_samples() as u32).collect();
    let root_bound = majority(&problem.ds.label_counts()).1 as f64;
    let mut upper_bound = f64::NEG_INFINITY;
    for path in &problem.paths {
        if s.timed_out || Instant::now() >= s.deadline {
            s.timed_out = true;
            upper_bound = upper_bound.max(if path.reachable { root_bound } else { 0.0 });
            continue;
        }
        if !path.reachable {
            let rule = problem.path_rule(path, &[], 0, Provenance::Exact);
            s.offer(0.0, || rule);
        } else if path.steps.is_empty() {
            let v = vi_index(&problem.ds.label_counts(), w);
            s.offer(v.vi, || {
                problem.path_rule(path, &[], v.label, Provenance::Exact)
            });
        } else {
            s.descend(path, 0, &all);
            if s.timed_out {
                upper_bound = upper_bound.max(root_bound);
            }
        }
    }

    let status = if s.timed_out {
        Status::TimeLimit
    } else {
        Status::Optimal
    };
    let i_max = s.best_rule.as_ref().map(|_| s.best);
    OptResult {
        upper_bound: match status {
            Status::Optimal => s.best,
            Status::TimeLimit => upper_bound.max(s.best),
        },
        rule: s.best_rule,
        i_max,
        status,
        elapsed: start.elapsed(),
        time_to_best: s.time_to_best,
        nodes: s.nodes,
        trace: s.trace,
    }
}

impl Search<'_, '_> {
    fn improve(&mut self, vi: f64, rule: Rule) {
        self.best = vi;
        self.best_rule = Some(rule);
        self.time_to_best = self.start.elapsed();
        self.trace.push(Improvement {
            step: self.trace.len() + 1,
            vi,
            seconds: self.time_to_best.as_secs_f64(),
        });
    }

    fn offer(&mut self, vi: f64, rule: impl FnOnce() -> Rule) {
        if vi > self.best {
            self.improve(vi, rule());
        }
    }

    fn out_of_time(&mut self) -> bool {
        if !self.timed_out
            && self.nodes.is_multiple_of(CLOCK_EVERY)
            && Instant::now() >= self.deadline
        {
            self.timed_out = true;
        }
        self.timed_out
    }

    fn bound(&self, set: &[u32]) -> f64 {
        let labels = self.problem.ds.labels();
        let mut counts = vec![0usize; self.problem.ds.n_labels()];
        for &i in set {
            counts[labels[i as usize]] += 1;
        }
        majority(&counts).1 as f64
    }

    fn descend(&mut self, path: &TargetPath, pos: usize, set: &[u32]) {
        self.nodes += 1;
        if self.out_of_time() || self.bound(set) <= self.best {
            return;
        }
        let step = &path.steps[pos];
        if pos + 1 == path.steps.len() {
            self.sweep(path, step, set);
            return;
        }
        let mut children: Vec<(usize, f64, Vec<u32>)> = Vec::new();
        for_each_partition(self.problem, step, set, |p, b, left, right| {
            let side = match step.branch {
                Branch::Left => left,
                Branch::Right => right,
            };
            children.push((p, b, side.to_vec()));
        });
        if self.best_first {
            children.sort_by_cached_key(|c| std::cmp::Reverse(self.bound(&c.2) as u64));
        }
        for (p, b, child) in children {
            self.stack.push((p, b));
            self.descend(path, pos + 1, &child);
            self.stack.pop();
            if self.timed_out {
                return;
            }
        }
    }

    fn sweep(&mut self, path: &TargetPath, step: &PathStep, set: &[u32]) {
        let ds = self.problem.ds;
        let labels = ds.labels();
        let mut total = vec![0usize; ds.n_labels()];
        for &i in set {
            total[labels[i as usize]] += 1;
        }
        let mut left = vec![0usize; ds.n_labels()];
        let mut right = vec![0usize; ds.n_labels()];
        let mut found: Option<(f64, usize, f64, usize)> = None;
        let w = self.w;
        let best = self.best;
        for_each_partition_counts(self.problem, step, set, |p, b, left_set| {
            left.iter_mut().for_each(|c| *c = 0);
            for &i in left_set {
                left[labels[i as usize]] += 1;
            }
            let counts = match step.branch {
                Branch::Left => &left,
                Branch::Right => {
                    for k in 0..right.len() {
                        right[k] = total[k] - left[k];
                    }
                    &right
                }
            };
            let v = vi_index(counts, w);
            if v.vi > found.map_or(best, |f| f.0) {
                found = Some((v.vi, p, b, v.label));
            }
        });
        if let Some((vi, p, b, label)) = found {
            self.stack.push((p, b));
            let rule = self
                .problem
                .path_rule(path, &self.stack, label, Provenance::Exact);
            self.stack.pop();
            self.improve(vi, rule);
        }
    }
}

/// Calls `f(feature, threshold, left, right)` once per distinct partition of
/// `set` a node may induce, in lexicographic `(feature, threshold)` order.
/// A threshold that repeats the previous partition of the same feature is
/// skipped.
fn for_each_partition(
    problem: &Problem<'_>,
    step: &PathStep,
    set: &[u32],
    mut f: impl FnMut(usize, f64, &[u32], &[u32]),
) {
    walk_partitions(problem, step, set, |p, b, sorted, cut| {
        f(p, b, &sorted[..cut], &sorted[cut..])
    });
}

fn for_each_partition_counts(
    problem: &Problem<'_>,
    step: &PathStep,
    set: &[u32],
    mut f: impl FnMut(usize, f64, &[u32]),
) {
    walk_partitions(problem, step, set, |p, b, sorted, cut| {
        f(p, b, &sorted[..cut])
    });
}

fn walk_partitions(
    problem: &Problem<'_>,
    step: &PathStep,
    set: &[u32],
    mut f: impl FnMut(usize, f64, &[u32], usize),
) {
    let ds = problem.ds;
    let node = problem.node(step.node);
    let mut sorted: Vec<u32> = set.to_vec();
    for (rank, &p) in node.allowed.iter().enumerate() {
        let col = ds.column(p);
        let margin = ds.feature(p).margin();
        sorted.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
        let mut thresholds = Vec::new();
        if rank == 0 && problem.allows_pass_right(node) {
            thresholds.push(PASS_RIGHT_THRESHOLD);
        }
        thresholds.extend(problem.node_thresholds(node, p));
        let mut cut = 0usize;
        let mut last_cut = None;
        for b in thresholds {
            while cut < sorted.len() && col[sorted[cut] as usize] + margin <= b {
                cut += 1;
            }
            debug_assert!(
                sorted[cut..].iter().all(|&i| col[i as usize] >= b),
                "sample inside a split gap"
            );
            if last_cut == Some(cut) {
                continue;
            }
            last_cut = Some(cut);
            // `sorted` is left intact between calls for the same feature.
            f(p, b, &sorted, cut);
        }
    }
}

/// Exhaustive enumeration over target paths and the full product of
/// `(feature, threshold)` choices, with no pruning. Returns the maximum VI
/// and the first rule attaining it.
pub fn brute_force_oracle(problem: &Problem<'_>, w: Weight, cap: u128) -> Result<(f64, Rule)> {
    let options: Vec<Vec<Vec<(usize, f64)>>> = problem
        .paths
        .iter()
        .map(|path| {
            if !path.reachable {
                return Vec::new();
            }
            path.steps
                .iter()
                .map(|step| {
                    let node = problem.node(step.node);
                    let mut opts = Vec::new();
                    for &p in &node.allowed {
                        if problem.allows_pass_right(node) {
                            opts.push((p, PASS_RIGHT_THRESHOLD));
                        }
                        opts.extend(problem.node_thresholds(node, p).into_iter().map(|b| (p, b)));
                    }
                    opts
                })
                .collect()
        })
        .collect();
    let needed: u128 = options
        .iter()
        .map(|steps| steps.iter().map(|o| o.len() as u128).product::<u128>())
        .sum();
    if needed > cap {
        return Err(Error::OracleCap { needed, cap });
    }

    let ds = problem.ds;
    let mut best: Option<(f64, Rule)> = None;
    for (path, steps) in problem.paths.iter().zip(&options) {
        if !path.reachable {
            let rule = problem.path_rule(path, &[], 0, Provenance::Exact);
            if best.as_ref().is_none_or(|(v, _)| 0.0 > *v) {
                best = Some((0.0, rule));
            }
            continue;
        }
        let mut idx = vec![0usize; steps.len()];
        loop {
            let splits: Vec<(usize, f64)> = idx.iter().zip(steps).map(|(&j, o)| o[j]).collect();
            let rule = problem.path_rule(path, &splits, 0, Provenance::Exact);
            let mut counts = vec![0usize; ds.n_labels()];
            for i in 0..ds.n_samples() {
                if rule.fires_at(ds, i) {
                    counts[ds.labels()[i]] += 1;
                }
            }
            let v = vi_index(&counts, w);
            if best.as_ref().is_none_or(|(b, _)| v.vi > *b) {
                best = Some((
                    v.vi,
                    Rule {
                        label: Some(v.label),
                        ..rule
                    },
                ));
            }
            if !advance(&mut idx, steps) {
                break;
            }
        }
    }
    Ok(best.expect("at least one target path"))
}

/// Steps a mixed-radix counter; false once it wraps around.
fn advance(idx: &mut [usize], radix: &[Vec<(usize, f64)>]) -> bool {
    for d in (0..idx.len()).rev() {
        idx[d] += 1;
        if idx[d] < radix[d].len() {
            return true;
        }
        idx[d] = 0;
    }
    false
}
