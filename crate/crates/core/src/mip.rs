//! Mixed-integer model of the optimal-rule problem, written out for an
//! external solver.
//!
//! Variable and row names are stable (`a_p{p}_t{t}`, `z_i{i}_t{t}`,
//! `left_branch_i{i}_t{t}_s{s}`, ...) so that start vectors, priority files
//! and solutions can be matched across runs. Structure fixings are bounds,
//! never extra rows.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::rules::{majority, Comparator, Condition, Provenance, Rule, Weight};
use crate::topology::{Branch, TreeShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

impl VarKind {
    pub fn is_discrete(self) -> bool {
        self != VarKind::Continuous
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum VarFamily {
    A,
    B,
    D,
    Z,
    Active,
    Pred,
    Count,
    LabelCount,
    Loss,
    Q,
    IMax,
}

impl VarFamily {
    pub const ALL: [VarFamily; 11] = [
        VarFamily::A,
        VarFamily::B,
        VarFamily::D,
        VarFamily::Z,
        VarFamily::Active,
        VarFamily::Pred,
        VarFamily::Count,
        VarFamily::LabelCount,
        VarFamily::Loss,
        VarFamily::Q,
        VarFamily::IMax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VarFamily::A => "a",
            VarFamily::B => "b",
            VarFamily::D => "d",
            VarFamily::Z => "z",
            VarFamily::Active => "l",
            VarFamily::Pred => "c",
            VarFamily::Count => "N",
            VarFamily::LabelCount => "Nk",
            VarFamily::Loss => "L",
            VarFamily::Q => "q",
            VarFamily::IMax => "I_max",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Variable {
    pub name: String,
    pub family: VarFamily,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn lp(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

/// Row families in the order they are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum RowFamily {
    Split,
    Tree,
    LeftOff,
    RightOn,
    LeafOn,
    Count,
    Assign,
    LeftBranch,
    RightBranch,
    Prediction,
    LabelCount,
    LossGe,
    LossLe,
    ViGe,
    ViLe,
    OneMax,
    BDomain,
}

impl RowFamily {
    pub const ALL: [RowFamily; 17] = [
        RowFamily::Split,
        RowFamily::Tree,
        RowFamily::LeftOff,
        RowFamily::RightOn,
        RowFamily::LeafOn,
        RowFamily::Count,
        RowFamily::Assign,
        RowFamily::LeftBranch,
        RowFamily::RightBranch,
        RowFamily::Prediction,
        RowFamily::LabelCount,
        RowFamily::LossGe,
        RowFamily::LossLe,
        RowFamily::ViGe,
        RowFamily::ViLe,
        RowFamily::OneMax,
        RowFamily::BDomain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RowFamily::Split => "split",
            RowFamily::Tree => "tree",
            RowFamily::LeftOff => "left_off",
            RowFamily::RightOn => "right_on",
            RowFamily::LeafOn => "leaf_on",
            RowFamily::Count => "count",
            RowFamily::Assign => "assign",
            RowFamily::LeftBranch => "left_branch",
            RowFamily::RightBranch => "right_branch",
            RowFamily::Prediction => "prediction",
            RowFamily::LabelCount => "label_count",
            RowFamily::LossGe => "loss_ge",
            RowFamily::LossLe => "loss_le",
            RowFamily::ViGe => "vi_ge",
            RowFamily::ViLe => "vi_le",
            RowFamily::OneMax => "one_max",
            RowFamily::BDomain => "b_domain",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    pub name: String,
    pub family: RowFamily,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * values[j]).sum()
    }

    /// Amount by which `values` violates the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelMeta {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_labels: usize,
    pub depth: u32,
    pub w: f64,
    /// Per-feature left-branch margin; 0 for unsplittable features.
    pub epsilon: Vec<f64>,
    pub epsilon_max: f64,
    /// Routing constant `1 + epsilon_max`.
    pub routing_m: f64,
    /// Misclassification constant, one per label.
    pub loss_m_ge: Vec<f64>,
    pub loss_m_le: Vec<f64>,
    /// VI-selection constant.
    pub vi_m: f64,
    pub tightened: bool,
    pub targets: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildOptions {
    /// Replace the misclassification constant `|N|` by per-label values
    /// (`|N| - n_k` and `n_k`). Off by default.
    pub tighten: bool,
}

#[derive(Debug, Clone)]
pub struct MipModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Maximized.
    pub objective: Vec<(usize, f64)>,
    pub meta: ModelMeta,
    shape: TreeShape,
    index: HashMap<String, usize>,
}

pub fn a_name(p: usize, t: usize) -> String {
    format!("a_p{p}_t{t}")
}
pub fn b_name(t: usize) -> String {
    format!("b_t{t}")
}
pub fn d_name(t: usize) -> String {
    format!("d_t{t}")
}
pub fn z_name(i: usize, t: usize) -> String {
    format!("z_i{i}_t{t}")
}
pub fn l_name(t: usize) -> String {
    format!("l_t{t}")
}
pub fn c_name(k: usize, t: usize) -> String {
    format!("c_k{k}_t{t}")
}
pub fn n_name(t: usize) -> String {
    format!("N_t{t}")
}
pub fn nk_name(k: usize, t: usize) -> String {
    format!("Nk_k{k}_t{t}")
}
pub fn loss_name(t: usize) -> String {
    format!("L_t{t}")
}
pub fn q_name(t: usize) -> String {
    format!("q_t{t}")
}
pub const I_MAX: &str = "I_max";

struct Builder {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    index: HashMap<String, usize>,
}

impl Builder {
    fn var(&mut self, name: String, family: VarFamily, kind: VarKind, lower: f64, upper: f64) {
        self.index.insert(name.clone(), self.variables.len());
        self.variables.push(Variable {
            name,
            family,
            kind,
            lower,
            upper,
        });
    }

    fn binary(&mut self, name: String, family: VarFamily) {
        self.var(name, family, VarKind::Binary, 0.0, 1.0);
    }

    fn id(&self, name: &str) -> usize {
        self.index[name]
    }

    fn row(
        &mut self,
        name: String,
        family: RowFamily,
        terms: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        let terms = terms.into_iter().filter(|&(_, a)| a != 0.0).collect();
        self.constraints.push(Constraint {
            name,
            family,
            terms,
            sense,
            rhs,
        });
    }
}

/// Builds the model for `problem` with weight `w`.
pub fn build(problem: &Problem<'_>, w: Weight, opts: BuildOptions) -> MipModel {
    let ds = problem.ds;
    let shape = problem.shape();
    let n = ds.n_samples();
    let n_features = ds.n_features();
    let n_labels = ds.n_labels();
    let targets = problem.fixings.targets.clone();
    let w = w.value();

    let epsilon: Vec<f64> = ds.features().iter().map(|f| f.margin()).collect();
    let epsilon_max = epsilon.iter().copied().fold(0.0, f64::max);
    let routing_m = 1.0 + epsilon_max;
    let counts = ds.label_counts();
    let (loss_m_ge, loss_m_le): (Vec<f64>, Vec<f64>) = if opts.tighten {
        counts.iter().map(|&c| ((n - c) as f64, c as f64)).unzip()
    } else {
        (vec![n as f64; n_labels], vec![n as f64; n_labels])
    };
    let vi_m = w * n as f64;

    let mut m = Builder {
        variables: Vec::new(),
        constraints: Vec::new(),
        index: HashMap::new(),
    };

    for t in shape.branch_nodes() {
        let node = problem.node(t);
        for p in 0..n_features {
            let free = node.split && node.allowed.contains(&p);
            m.var(
                a_name(p, t),
                VarFamily::A,
                VarKind::Binary,
                0.0,
                if free { 1.0 } else { 0.0 },
            );
        }
    }
    for t in shape.branch_nodes() {
        let (lo, hi) = match problem.node(t).fixed_threshold {
            Some(b) => (b, b),
            None => (0.0, 1.0),
        };
        m.var(b_name(t), VarFamily::B, VarKind::Continuous, lo, hi);
    }
    for t in shape.branch_nodes() {
        let d = if problem.node(t).split { 1.0 } else { 0.0 };
        m.var(d_name(t), VarFamily::D, VarKind::Binary, d, d);
    }
    for t in shape.leaf_nodes() {
        for i in 0..n {
            m.binary(z_name(i, t), VarFamily::Z);
        }
    }
    for t in shape.leaf_nodes() {
        m.binary(l_name(t), VarFamily::Active);
    }
    for t in shape.leaf_nodes() {
        for k in 0..n_labels {
            m.binary(c_name(k, t), VarFamily::Pred);
        }
    }
    for t in shape.leaf_nodes() {
        m.var(
            n_name(t),
            VarFamily::Count,
            VarKind::Integer,
            0.0,
            f64::INFINITY,
        );
    }
    for t in shape.leaf_nodes() {
        for k in 0..n_labels {
            m.var(
                nk_name(k, t),
                VarFamily::LabelCount,
                VarKind::Integer,
                0.0,
                f64::INFINITY,
            );
        }
    }
    for &t in &targets {
        m.var(
            loss_name(t),
            VarFamily::Loss,
            VarKind::Integer,
            0.0,
            f64::INFINITY,
        );
    }
    for &t in &targets {
        m.binary(q_name(t), VarFamily::Q);
    }
    m.var(
        I_MAX.to_string(),
        VarFamily::IMax,
        VarKind::Continuous,
        f64::NEG_INFINITY,
        f64::INFINITY,
    );

    let a = |m: &Builder, p: usize, t: usize| m.id(&a_name(p, t));

    for t in shape.branch_nodes() {
        let mut terms: Vec<(usize, f64)> = (0..n_features).map(|p| (a(&m, p, t), 1.0)).collect();
        terms.push((m.id(&d_name(t)), -1.0));
        m.row(
            format!("split_t{t}"),
            RowFamily::Split,
            terms,
            Sense::Eq,
            0.0,
        );
    }
    for t in shape.branch_nodes().skip(1) {
        let terms = vec![(m.id(&d_name(t)), 1.0), (m.id(&d_name(t / 2)), -1.0)];
        m.row(format!("tree_t{t}"), RowFamily::Tree, terms, Sense::Le, 0.0);
    }
    for t in shape.branch_nodes() {
        for s in shape.left_descendant_leaves(t) {
            let terms = vec![(m.id(&l_name(s)), 1.0), (m.id(&d_name(t)), -1.0)];
            m.row(
                format!("left_off_t{t}_s{s}"),
                RowFamily::LeftOff,
                terms,
                Sense::Le,
                0.0,
            );
        }
    }
    for t in shape.branch_nodes() {
        for s in shape.rightmost_pair(t) {
            let terms = vec![(m.id(&l_name(s)), 1.0), (m.id(&d_name(t)), -1.0)];
            m.row(
                format!("right_on_t{t}_s{s}"),
                RowFamily::RightOn,
                terms,
                Sense::Ge,
                0.0,
            );
        }
    }
    for t in shape.leaf_nodes() {
        for i in 0..n {
            let terms = vec![(m.id(&z_name(i, t)), 1.0), (m.id(&l_name(t)), -1.0)];
            m.row(
                format!("leaf_on_i{i}_t{t}"),
                RowFamily::LeafOn,
                terms,
                Sense::Le,
                0.0,
            );
        }
    }
    for t in shape.leaf_nodes() {
        let mut terms = vec![(m.id(&n_name(t)), 1.0)];
        terms.extend((0..n).map(|i| (m.id(&z_name(i, t)), -1.0)));
        m.row(
            format!("count_t{t}"),
            RowFamily::Count,
            terms,
            Sense::Eq,
            0.0,
        );
    }
    for i in 0..n {
        let terms = shape
            .leaf_nodes()
            .map(|t| (m.id(&z_name(i, t)), 1.0))
            .collect();
        m.row(
            format!("assign_i{i}"),
            RowFamily::Assign,
            terms,
            Sense::Eq,
            1.0,
        );
    }
    for t in shape.leaf_nodes() {
        let (left, _) = shape.ancestors_lr(t);
        for &s in &left {
            for i in 0..n {
                let mut terms: Vec<(usize, f64)> = (0..n_features)
                    .map(|p| (a(&m, p, s), ds.value(i, p) + epsilon[p]))
                    .collect();
                terms.push((m.id(&b_name(s)), -1.0));
                terms.push((m.id(&z_name(i, t)), routing_m));
                m.row(
                    format!("left_branch_i{i}_t{t}_s{s}"),
                    RowFamily::LeftBranch,
                    terms,
                    Sense::Le,
                    routing_m,
                );
            }
        }
    }
    for t in shape.leaf_nodes() {
        let (_, right) = shape.ancestors_lr(t);
        for &s in &right {
            for i in 0..n {
                let mut terms: Vec<(usize, f64)> = (0..n_features)
                    .map(|p| (a(&m, p, s), ds.value(i, p)))
                    .collect();
                terms.push((m.id(&b_name(s)), -1.0));
                terms.push((m.id(&z_name(i, t)), -1.0));
                m.row(
                    format!("right_branch_i{i}_t{t}_s{s}"),
                    RowFamily::RightBranch,
                    terms,
                    Sense::Ge,
                    -1.0,
                );
            }
        }
    }
    for t in shape.leaf_nodes() {
        let mut terms: Vec<(usize, f64)> =
            (0..n_labels).map(|k| (m.id(&c_name(k, t)), 1.0)).collect();
        terms.push((m.id(&l_name(t)), -1.0));
        m.row(
            format!("prediction_t{t}"),
            RowFamily::Prediction,
            terms,
            Sense::Eq,
            0.0,
        );
    }
    let labels = ds.labels();
    for t in shape.leaf_nodes() {
        for k in 0..n_labels {
            let mut terms = vec![(m.id(&nk_name(k, t)), 1.0)];
            terms.extend(
                (0..n)
                    .filter(|&i| labels[i] == k)
                    .map(|i| (m.id(&z_name(i, t)), -1.0)),
            );
            m.row(
                format!("label_count_k{k}_t{t}"),
                RowFamily::LabelCount,
                terms,
                Sense::Eq,
                0.0,
            );
        }
    }
    for (family, sense) in [
        (RowFamily::LossGe, Sense::Ge),
        (RowFamily::LossLe, Sense::Le),
    ] {
        for &t in &targets {
            for k in 0..n_labels {
                let big = if family == RowFamily::LossGe {
                    loss_m_ge[k]
                } else {
                    loss_m_le[k]
                };
                let terms = vec![
                    (m.id(&loss_name(t)), 1.0),
                    (m.id(&n_name(t)), -1.0),
                    (m.id(&nk_name(k, t)), 1.0),
                    (m.id(&c_name(k, t)), -big),
                ];
                let rhs = if sense == Sense::Ge { -big } else { 0.0 };
                m.row(
                    format!("{}_k{k}_t{t}", family.name()),
                    family,
                    terms,
                    sense,
                    rhs,
                );
            }
        }
    }
    let i_max = m.id(I_MAX);
    for &t in &targets {
        let terms = vec![
            (i_max, 1.0),
            (m.id(&n_name(t)), -1.0),
            (m.id(&loss_name(t)), w),
        ];
        m.row(
            format!("vi_ge_t{t}"),
            RowFamily::ViGe,
            terms,
            Sense::Ge,
            0.0,
        );
    }
    for &t in &targets {
        let terms = vec![
            (i_max, 1.0),
            (m.id(&n_name(t)), -1.0),
            (m.id(&loss_name(t)), w),
            (m.id(&q_name(t)), vi_m),
        ];
        m.row(
            format!("vi_le_t{t}"),
            RowFamily::ViLe,
            terms,
            Sense::Le,
            vi_m,
        );
    }
    let terms = targets.iter().map(|&t| (m.id(&q_name(t)), 1.0)).collect();
    m.row("one_max".into(), RowFamily::OneMax, terms, Sense::Eq, 1.0);
    for t in shape.branch_nodes() {
        let terms = vec![(m.id(&b_name(t)), 1.0), (m.id(&d_name(t)), -1.0)];
        m.row(
            format!("b_domain_t{t}"),
            RowFamily::BDomain,
            terms,
            Sense::Le,
            0.0,
        );
    }

    MipModel {
        objective: vec![(i_max, 1.0)],
        variables: m.variables,
        constraints: m.constraints,
        meta: ModelMeta {
            n_samples: n,
            n_features,
            n_labels,
            depth: shape.depth(),
            w,
            epsilon,
            epsilon_max,
            routing_m,
            loss_m_ge,
            loss_m_le,
            vi_m,
            tightened: opts.tighten,
            targets,
        },
        shape,
        index: m.index,
    }
}

/// Variable and row counts per family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Census {
    pub variables: BTreeMap<&'static str, usize>,
    pub constraints: BTreeMap<&'static str, usize>,
}

impl Census {
    pub fn total_variables(&self) -> usize {
        self.variables.values().sum()
    }

    pub fn total_constraints(&self) -> usize {
        self.constraints.values().sum()
    }
}

/// Closed-form sizes for `|N|`, `|P|`, `|K|`, depth `D` and `|T_obj|`.
pub fn count_census(n: usize, p: usize, k: usize, depth: u32, n_targets: usize) -> Census {
    let leaves = 1usize << depth;
    let branch = leaves - 1;
    let half = leaves / 2;
    let d = depth as usize;
    let variables = [
        (VarFamily::A, p * branch),
        (VarFamily::B, branch),
        (VarFamily::D, branch),
        (VarFamily::Z, n * leaves),
        (VarFamily::Active, leaves),
        (VarFamily::Pred, k * leaves),
        (VarFamily::Count, leaves),
        (VarFamily::LabelCount, k * leaves),
        (VarFamily::Loss, n_targets),
        (VarFamily::Q, n_targets),
        (VarFamily::IMax, 1),
    ];
    let constraints = [
        (RowFamily::Split, branch),
        (RowFamily::Tree, branch - 1),
        (RowFamily::LeftOff, d * half),
        (RowFamily::RightOn, 2 * branch),
        (RowFamily::LeafOn, n * leaves),
        (RowFamily::Count, leaves),
        (RowFamily::Assign, n),
        (RowFamily::LeftBranch, n * d * half),
        (RowFamily::RightBranch, n * d * half),
        (RowFamily::Prediction, leaves),
        (RowFamily::LabelCount, k * leaves),
        (RowFamily::LossGe, k * n_targets),
        (RowFamily::LossLe, k * n_targets),
        (RowFamily::ViGe, n_targets),
        (RowFamily::ViLe, n_targets),
        (RowFamily::OneMax, 1),
        (RowFamily::BDomain, branch),
    ];
    Census {
        variables: variables.iter().map(|&(f, c)| (f.name(), c)).collect(),
        constraints: constraints.iter().map(|&(f, c)| (f.name(), c)).collect(),
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

impl MipModel {
    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Counts of what was actually built, in [`count_census`] form.
    pub fn census(&self) -> Census {
        let mut variables: BTreeMap<&'static str, usize> =
            VarFamily::ALL.iter().map(|f| (f.name(), 0)).collect();
        for v in &self.variables {
            *variables.get_mut(v.family.name()).expect("known family") += 1;
        }
        let mut constraints: BTreeMap<&'static str, usize> =
            RowFamily::ALL.iter().map(|f| (f.name(), 0)).collect();
        for c in &self.constraints {
            *constraints.get_mut(c.family.name()).expect("known family") += 1;
        }
        Census {
            variables,
            constraints,
        }
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, a)| a * values[j]).sum()
    }

    /// Every bound, integrality and row violation above `tol`, as text.
    pub fn violations(&self, values: &[f64], tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if values.len() != self.variables.len() {
            out.push(format!(
                "expected {} values, got {}",
                self.variables.len(),
                values.len()
            ));
            return out;
        }
        for (v, &x) in self.variables.iter().zip(values) {
            if x < v.lower - tol || x > v.upper + tol || x.is_nan() {
                out.push(format!(
                    "{} = {x} outside [{}, {}]",
                    v.name, v.lower, v.upper
                ));
            }
            if v.kind.is_discrete() && (x - x.round()).abs() > tol {
                out.push(format!("{} = {x} is not integral", v.name));
            }
        }
        for c in &self.constraints {
            let viol = c.violation(values);
            if viol > tol {
                out.push(format!("{}: violated by {viol}", c.name));
            }
        }
        out
    }

    /// Largest bound or row violation.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let bounds = self
            .variables
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0))
            .fold(0.0, f64::max);
        self.constraints
            .iter()
            .map(|c| c.violation(values))
            .fold(bounds, f64::max)
    }

    /// Orders a `name -> value` map like the variable table.
    pub fn assignment(&self, map: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
        self.variables
            .iter()
            .map(|v| {
                map.get(&v.name)
                    .copied()
                    .ok_or_else(|| Error::InvalidSolution(format!("no value for {}", v.name)))
            })
            .collect()
    }

    pub fn lp_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "\\ rule model: |N|={} |P|={} |K|={} D={} w={}",
            self.meta.n_samples,
            self.meta.n_features,
            self.meta.n_labels,
            self.meta.depth,
            self.meta.w
        );
        s.push_str("Maximize\n");
        s.push_str(" obj:");
        self.write_lp_terms(&mut s, &self.objective);
        s.push('\n');
        s.push_str("Subject To\n");
        for c in &self.constraints {
            let _ = write!(s, " {}:", c.name);
            if c.terms.is_empty() {
                let _ = write!(s, " 0 {}", self.variables[0].name);
            }
            self.write_lp_terms(&mut s, &c.terms);
            let _ = writeln!(s, " {} {}", c.sense.lp(), num(c.rhs));
        }
        s.push_str("Bounds\n");
        for v in &self.variables {
            if v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0 {
                continue;
            }
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (false, false) => {
                    let _ = writeln!(s, " {} free", v.name);
                }
                (true, false) => {
                    let _ = writeln!(s, " {} >= {}", v.name, num(v.lower));
                }
                (false, true) => {
                    let _ = writeln!(s, " -inf <= {} <= {}", v.name, num(v.upper));
                }
                (true, true) => {
                    let _ = writeln!(s, " {} <= {} <= {}", num(v.lower), v.name, num(v.upper));
                }
            }
        }
        let generals: Vec<&str> = self
            .variables
            .iter()
            .filter(|v| {
                v.kind == VarKind::Integer
                    || (v.kind == VarKind::Binary && (v.lower != 0.0 || v.upper != 1.0))
            })
            .map(|v| v.name.as_str())
            .collect();
        let binaries: Vec<&str> = self
            .variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0)
            .map(|v| v.name.as_str())
            .collect();
        for (head, names) in [("Generals", generals), ("Binaries", binaries)] {
            if names.is_empty() {
                continue;
            }
            let _ = writeln!(s, "{head}");
            for chunk in names.chunks(8) {
                let _ = writeln!(s, " {}", chunk.join(" "));
            }
        }
        s.push_str("End\n");
        s
    }

    fn write_lp_terms(&self, s: &mut String, terms: &[(usize, f64)]) {
        for (n, &(j, a)) in terms.iter().enumerate() {
            if n > 0 && n % 8 == 0 {
                s.push_str("\n   ");
            }
            let name = &self.variables[j].name;
            let sign = if a < 0.0 { '-' } else { '+' };
            let mag = a.abs();
            if n == 0 && sign == '+' {
                if mag == 1.0 {
                    let _ = write!(s, " {name}");
                } else {
                    let _ = write!(s, " {} {name}", num(mag));
                }
            } else if mag == 1.0 {
                let _ = write!(s, " {sign} {name}");
            } else {
                let _ = write!(s, " {sign} {} {name}", num(mag));
            }
        }
    }

    /// Free-format MPS with an `OBJSENSE` section.
    pub fn mps_string(&self) -> String {
        let mut s = String::new();
        s.push_str("NAME          RULEMODEL\n");
        s.push_str("OBJSENSE\n    MAX\n");
        s.push_str("ROWS\n");
        s.push_str(" N  obj\n");
        for c in &self.constraints {
            let tag = match c.sense {
                Sense::Le => 'L',
                Sense::Ge => 'G',
                Sense::Eq => 'E',
            };
            let _ = writeln!(s, " {tag}  {}", c.name);
        }

        let mut columns: Vec<Vec<(&str, f64)>> = vec![Vec::new(); self.variables.len()];
        for &(j, a) in &self.objective {
            columns[j].push(("obj", a));
        }
        for c in &self.constraints {
            for &(j, a) in &c.terms {
                columns[j].push((c.name.as_str(), a));
            }
        }
        s.push_str("COLUMNS\n");
        let mut in_int = false;
        let mut marker = 0;
        for (v, col) in self.variables.iter().zip(&columns) {
            let int = v.kind.is_discrete();
            if int != in_int {
                let kind = if int { "INTORG" } else { "INTEND" };
                let _ = writeln!(s, "    MARKER{marker:<6}  'MARKER'  '{kind}'");
                marker += usize::from(!int);
                in_int = int;
            }
            if col.is_empty() {
                let _ = writeln!(s, "    {:<16}  {:<24}  0", v.name, "obj");
            }
            for (row, a) in col {
                let _ = writeln!(s, "    {:<16}  {:<24}  {}", v.name, row, num(*a));
            }
        }
        if in_int {
            let _ = writeln!(s, "    MARKER{marker:<6}  'MARKER'  'INTEND'");
        }
        s.push_str("RHS\n");
        for c in &self.constraints {
            if c.rhs != 0.0 {
                let _ = writeln!(s, "    RHS       {:<24}  {}", c.name, num(c.rhs));
            }
        }
        s.push_str("BOUNDS\n");
        for v in &self.variables {
            let name = &v.name;
            if v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0 {
                let _ = writeln!(s, " BV BND       {name}");
            } else if v.lower == v.upper {
                let _ = writeln!(s, " FX BND       {name:<16}  {}", num(v.lower));
            } else if !v.lower.is_finite() && !v.upper.is_finite() {
                let _ = writeln!(s, " FR BND       {name}");
            } else {
                if v.lower != 0.0 {
                    let _ = writeln!(s, " LO BND       {name:<16}  {}", num(v.lower));
                }
                if v.upper.is_finite() {
                    let _ = writeln!(s, " UP BND       {name:<16}  {}", num(v.upper));
                } else {
                    let _ = writeln!(s, " PL BND       {name}");
                }
            }
        }
        s.push_str("ENDATA\n");
        s
    }

    /// `name priority` lines: topology variables (`a`, `d`) high, other
    /// discrete variables low, continuous variables omitted.
    pub fn priorities_string(&self) -> String {
        self.variables
            .iter()
            .filter(|v| v.kind.is_discrete())
            .map(|v| {
                let p = if matches!(v.family, VarFamily::A | VarFamily::D) {
                    10
                } else {
                    1
                };
                format!("{} {p}\n", v.name)
            })
            .collect()
    }

    /// `name value` lines in variable order.
    pub fn values_string(&self, values: &[f64]) -> String {
        self.variables
            .iter()
            .zip(values)
            .map(|(v, &x)| format!("{} {}\n", v.name, num(x)))
            .collect()
    }
}

pub fn emit_lp(model: &MipModel, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &model.lp_string())
}

pub fn emit_mps(model: &MipModel, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &model.mps_string())
}

pub fn emit_priorities(model: &MipModel, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &model.priorities_string())
}

/// Builds a feasible start vector from `rule` and writes it as
/// `name value` lines.
pub fn emit_warmstart(
    model: &MipModel,
    problem: &Problem<'_>,
    rule: &Rule,
    path: impl AsRef<Path>,
) -> Result<Vec<f64>> {
    let values = warm_start(model, problem, rule)?;
    write(path.as_ref(), &model.values_string(&values))?;
    Ok(values)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses `name value` lines (blank lines and `#` comments ignored).
pub fn parse_values(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::InvalidSolution(format!(
                "line {}: expected `name value`",
                n + 1
            )));
        };
        let value: f64 = value
            .parse()
            .map_err(|_| Error::InvalidSolution(format!("line {}: bad number {value:?}", n + 1)))?;
        out.insert(name.to_string(), value);
    }
    Ok(out)
}

/// Complete assignment realizing `rule` as a tree. Splits off the rule's
/// path use the first allowed feature with the pass-right threshold (or
/// the fixed threshold). Active leaves predict their majority label (the
/// rows admit no other), so `q = 1` goes to the rule's leaf unless another
/// target leaf of the completed tree scores strictly higher.
pub fn warm_start(model: &MipModel, problem: &Problem<'_>, rule: &Rule) -> Result<Vec<f64>> {
    let ds = problem.ds;
    let shape = model.shape;
    let path = problem.check_rule(rule)?;
    let w = model.meta.w;
    let eps = &model.meta.epsilon;

    let mut split: Vec<Option<(usize, f64)>> = shape
        .branch_nodes()
        .map(|t| {
            let node = problem.node(t);
            node.split
                .then(|| (node.allowed[0], node.fixed_threshold.unwrap_or(0.0)))
        })
        .collect();
    if path.reachable {
        for (step, c) in path.steps.iter().zip(&rule.conditions) {
            split[step.node - 1] = Some((c.feature, c.threshold));
        }
    }

    let n_leaves = shape.n_leaves();
    let first_leaf = n_leaves;
    let mut leaf_of = Vec::with_capacity(ds.n_samples());
    let mut counts = vec![vec![0usize; ds.n_labels()]; n_leaves];
    for i in 0..ds.n_samples() {
        let mut t = 1;
        while shape.is_branch(t) {
            t = match split[t - 1] {
                None => 2 * t + 1,
                Some((p, b)) => {
                    let x = ds.value(i, p);
                    if x + eps[p] <= b {
                        2 * t
                    } else if x >= b {
                        2 * t + 1
                    } else {
                        return Err(Error::InvalidSolution(format!(
                            "sample {i} falls between the branches of node {t}"
                        )));
                    }
                }
            };
        }
        leaf_of.push(t);
        counts[t - first_leaf][ds.labels()[i]] += 1;
    }

    let mut forced = vec![false; n_leaves];
    for t in shape.branch_nodes() {
        if split[t - 1].is_some() {
            for s in shape.rightmost_pair(t) {
                forced[s - first_leaf] = true;
            }
        }
    }
    let active: Vec<bool> = (0..n_leaves)
        .map(|j| forced[j] || counts[j].iter().sum::<usize>() > 0)
        .collect();

    let rule_leaf = path.leaf;
    let mut label: Vec<Option<usize>> = vec![None; n_leaves];
    for t in shape.leaf_nodes() {
        let j = t - first_leaf;
        if !active[j] {
            continue;
        }
        let (top, best) = majority(&counts[j]);
        label[j] = Some(match rule.label {
            Some(k) if t == rule_leaf && counts[j].get(k) == Some(&best) => k,
            _ => top,
        });
    }
    let vi_of = |t: usize| -> f64 {
        let j = t - first_leaf;
        let n: usize = counts[j].iter().sum();
        let correct = label[j].map_or(0, |k| counts[j][k]);
        n as f64 - w * (n - correct) as f64
    };
    let q_leaf = {
        let own = vi_of(rule_leaf);
        let mut best = (own, rule_leaf);
        for &t in &model.meta.targets {
            if vi_of(t) > best.0 {
                best = (vi_of(t), t);
            }
        }
        best.1
    };

    let mut values = vec![0.0; model.variables.len()];
    let mut set = |name: String, x: f64| {
        values[model.index[&name]] = x;
    };
    for t in shape.branch_nodes() {
        if let Some((p, b)) = split[t - 1] {
            set(a_name(p, t), 1.0);
            set(b_name(t), b);
            set(d_name(t), 1.0);
        }
    }
    for (i, &t) in leaf_of.iter().enumerate() {
        set(z_name(i, t), 1.0);
    }
    for t in shape.leaf_nodes() {
        let j = t - first_leaf;
        let n: usize = counts[j].iter().sum();
        set(l_name(t), f64::from(u8::from(active[j])));
        if let Some(k) = label[j] {
            set(c_name(k, t), 1.0);
        }
        set(n_name(t), n as f64);
        for (k, &c) in counts[j].iter().enumerate().take(ds.n_labels()) {
            set(nk_name(k, t), c as f64);
        }
        if model.meta.targets.contains(&t) {
            set(
                loss_name(t),
                (n - label[j].map_or(0, |k| counts[j][k])) as f64,
            );
        }
    }
    set(q_name(q_leaf), 1.0);
    set(I_MAX.to_string(), vi_of(q_leaf));

    let worst = model.max_violation(&values);
    if worst > 1e-9 {
        let detail = model
            .violations(&values, 1e-9)
            .into_iter()
            .take(3)
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::InvalidSolution(format!(
            "start vector infeasible: {detail}"
        )));
    }
    Ok(values)
}

const INTEGRALITY_TOL: f64 = 1e-6;

/// Reads the rule at the leaf with `q = 1` out of a solution. Returns the
/// rule and the solution's `I_max`.
pub fn solution_to_rule(
    model: &MipModel,
    assignment: &BTreeMap<String, f64>,
) -> Result<(Rule, f64)> {
    let values = model.assignment(assignment)?;
    for (v, &x) in model.variables.iter().zip(&values) {
        if v.kind.is_discrete() && (x - x.round()).abs() > INTEGRALITY_TOL {
            return Err(Error::InvalidSolution(format!(
                "{} = {x} is fractional",
                v.name
            )));
        }
    }
    let get = |name: String| values[model.index[&name]];
    let on = |name: String| get(name) > 0.5;

    let leaf = model
        .meta
        .targets
        .iter()
        .copied()
        .find(|&t| on(q_name(t)))
        .ok_or_else(|| Error::InvalidSolution("no target leaf has q = 1".into()))?;

    let mut conditions = Vec::new();
    let mut reachable = true;
    for (s, branch) in model.shape.path(leaf) {
        if !on(d_name(s)) {
            if branch == Branch::Left {
                reachable = false;
            }
            continue;
        }
        let p = (0..model.meta.n_features)
            .find(|&p| on(a_name(p, s)))
            .ok_or_else(|| Error::InvalidSolution(format!("node {s} splits on no feature")))?;
        conditions.push(Condition {
            feature: p,
            comparator: Comparator::from(branch),
            threshold: get(b_name(s)),
            margin: model.meta.epsilon[p],
        });
    }
    if !reachable {
        conditions.clear();
    }
    let label = (0..model.meta.n_labels).find(|&k| on(c_name(k, leaf)));
    let rule = Rule {
        conditions,
        label,
        leaf: Some(leaf),
        provenance: Provenance::External,
        reachable,
    };
    Ok((rule, get(I_MAX.to_string())))
}
