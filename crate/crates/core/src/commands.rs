//! Run configuration and the operations behind each CLI verb.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::Serialize;

use crate::dataset::{
    derive_default_groups, groups_from_importance, load_table, preprocess, train_test_split,
    Dataset, FeatureGroup, PreprocessOptions, Schema, TableOptions,
};
use crate::error::{Error, Result};
use crate::heuristics::{bsccart_fit, DEFAULT_BEAM_WIDTH};
use crate::mip::{self, BuildOptions, Census};
use crate::problem::Problem;
use crate::rules::{evaluate, Rule, RuleFile, RuleStats, Weight};
use crate::search::{self, solve, Budget, Improvement, OptResult, Status};
use crate::topology::StructureSpec;

pub const DEFAULT_DEPTH: u32 = 2;
pub const DEFAULT_RATIO: f64 = 0.8;
pub const DEFAULT_SPLITS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: PathBuf,
    pub schema: Option<PathBuf>,
    /// Overrides the schema's target column.
    pub target: Option<String>,
    /// Tree depth; taken from the structure when unset.
    pub depth: Option<u32>,
    pub weight: Weight,
    /// Chain such as `cat-num`, a structure table, or a path to a file
    /// holding either. Defaults to `all` at every level.
    pub structure: Option<String>,
    pub time_limit: Duration,
    pub seed: u64,
    pub splits: usize,
    pub ratio: f64,
    /// Fit on every row instead of the train side of a split.
    pub full: bool,
    /// Seed the exact search with the greedy tree's rule.
    pub warmstart: bool,
    /// Explore the most promising branches first.
    pub priorities: bool,
    /// Column ranking whose top entries replace the `num`/`cat` groups.
    pub importance: Option<PathBuf>,
    pub top_k: Option<usize>,
    pub beam_width: usize,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(data: impl Into<PathBuf>) -> Self {
        RunConfig {
            data: data.into(),
            schema: None,
            target: None,
            depth: None,
            weight: Weight::default(),
            structure: None,
            time_limit: search::DEFAULT_TIME_LIMIT,
            seed: 0,
            splits: DEFAULT_SPLITS,
            ratio: DEFAULT_RATIO,
            full: false,
            warmstart: true,
            priorities: true,
            importance: None,
            top_k: None,
            beam_width: DEFAULT_BEAM_WIDTH,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::Config(format!(
                "ratio {} must lie strictly between 0 and 1",
                self.ratio
            )));
        }
        if self.depth == Some(0) {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        if self.splits == 0 {
            return Err(Error::Config("at least one split is required".into()));
        }
        if self.beam_width == 0 {
            return Err(Error::Config("beam width must be positive".into()));
        }
        Ok(())
    }

    pub fn structure_spec(&self) -> Result<StructureSpec> {
        let spec = match &self.structure {
            None => {
                let depth = self.depth.unwrap_or(DEFAULT_DEPTH);
                StructureSpec::from_chain_groups(&vec!["all"; depth as usize])?
            }
            Some(s) if Path::new(s).is_file() => {
                let text = std::fs::read_to_string(s).map_err(|e| Error::io(s, e))?;
                StructureSpec::parse(&text)?
            }
            Some(s) => StructureSpec::parse(s)?,
        };
        if let Some(d) = self.depth {
            if d != spec.shape().depth() {
                return Err(Error::Config(format!(
                    "depth {d} does not match the structure's depth {}",
                    spec.shape().depth()
                )));
            }
        }
        Ok(spec)
    }

    pub fn load(&self) -> Result<Dataset> {
        let mut schema = match &self.schema {
            Some(path) => Schema::from_file(path)?,
            None => Schema::new(),
        };
        if let Some(t) = &self.target {
            schema.set_target(t);
        }
        let raw = load_table(&self.data, &schema, &TableOptions::default())?;
        preprocess(&raw, &PreprocessOptions::default())
    }

    /// Default groups, with `num`/`cat` replaced by the importance ranking
    /// when one is configured.
    pub fn groups(&self, ds: &Dataset) -> Result<Vec<FeatureGroup>> {
        let mut groups = derive_default_groups(ds);
        if let Some(path) = &self.importance {
            let top_k = self.top_k.unwrap_or(ds.sources().len());
            groups.retain(|g| g.name == "all");
            groups.extend(groups_from_importance(ds, path, top_k)?);
        }
        Ok(groups)
    }

    /// Train side and, unless fitting on everything, the held-out side.
    pub fn train_test(&self, ds: &Dataset) -> Result<(Dataset, Option<Dataset>)> {
        if self.full {
            return Ok((ds.clone(), None));
        }
        let (train, test) = train_test_split(ds, self.ratio, self.seed)?;
        Ok((train, Some(test)))
    }

    fn out_path(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::Config("an output path is required".into()))
    }
}

/// Exact search as configured: optional greedy incumbent and branch
/// ordering. Returns the search result and the incumbent's rule.
pub fn run_exact(
    problem: &Problem<'_>,
    w: Weight,
    config: &RunConfig,
) -> (OptResult, Option<Rule>) {
    let incumbent = config.warmstart.then(|| bsccart_fit(problem, w).1);
    let budget = Budget {
        time_limit: config.time_limit,
        incumbent: incumbent.clone(),
        best_first: config.priorities,
    };
    (solve(problem, w, &budget), incumbent)
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub status: Status,
    pub i_max: Option<f64>,
    pub upper_bound: f64,
    pub rule: Option<RuleFile>,
    pub train: Option<RuleStats>,
    pub test: Option<RuleStats>,
    pub warmstart_vi: Option<f64>,
    pub nodes: u64,
    pub elapsed_secs: f64,
    pub time_to_best_secs: f64,
    pub trace: Vec<Improvement>,
}

impl FitReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let status = match self.status {
            Status::Optimal => "optimal",
            Status::TimeLimit => "time limit",
        };
        let _ = writeln!(s, "status       {status}");
        match self.i_max {
            Some(v) => {
                let _ = writeln!(s, "I_max        {v}");
            }
            None => {
                let _ = writeln!(s, "I_max        none found");
            }
        }
        let _ = writeln!(s, "upper bound  {}", self.upper_bound);
        if let Some(v) = self.warmstart_vi {
            let _ = writeln!(s, "warmstart    {v}");
        }
        if let Some(rule) = &self.rule {
            let _ = writeln!(s, "rule         {}", rule.text);
        }
        for (name, stats) in [("train", &self.train), ("test", &self.test)] {
            if let Some(st) = stats {
                let _ = writeln!(s, "{name:<12} {}", stats_line(st));
            }
        }
        let _ = writeln!(s, "nodes        {}", self.nodes);
        let _ = writeln!(
            s,
            "time         {:.3}s (best at {:.3}s)",
            self.elapsed_secs, self.time_to_best_secs
        );
        s
    }

    pub fn trace_log(&self) -> String {
        self.trace
            .iter()
            .map(|t| format!("{}, {}, {:.3}\n", t.step, t.vi, t.seconds))
            .collect()
    }
}

pub fn stats_line(st: &RuleStats) -> String {
    format!(
        "precision {}/{} ({:.3})  coverage {}/{} ({:.3})  VI {}",
        st.correct, st.fired, st.precision, st.fired, st.total, st.coverage, st.vi
    )
}

/// Preprocess, split, search, evaluate. Writes the rule file and the
/// improvement trace (`<out>.trace`) when an output path is set.
pub fn cmd_fit(config: &RunConfig) -> Result<FitReport> {
    config.validate()?;
    let ds = config.load()?;
    let spec = config.structure_spec()?;
    let (train, test) = config.train_test(&ds)?;
    let report = fit_on(config, config.weight, &spec, &train, test.as_ref())?;
    if let Some(out) = &config.out {
        if let Some(rule) = &report.rule {
            rule.write(out)?;
        }
        let trace = out.with_extension("trace");
        std::fs::write(&trace, report.trace_log()).map_err(|e| Error::io(&trace, e))?;
    }
    Ok(report)
}

fn fit_on(
    config: &RunConfig,
    w: Weight,
    spec: &StructureSpec,
    train: &Dataset,
    test: Option<&Dataset>,
) -> Result<FitReport> {
    let groups = config.groups(train)?;
    let problem = Problem::new(train, spec, &groups)?;
    let (res, incumbent) = run_exact(&problem, w, config);
    let train_stats = res.rule.as_ref().map(|r| evaluate(r, train, w));
    let test_stats = match (&res.rule, test) {
        (Some(r), Some(t)) => Some(evaluate(r, t, w)),
        _ => None,
    };
    Ok(FitReport {
        status: res.status,
        i_max: res.i_max,
        upper_bound: res.upper_bound,
        rule: res
            .rule
            .as_ref()
            .map(|r| RuleFile::from_rule(r, train, train_stats.as_ref())),
        train: train_stats,
        test: test_stats,
        warmstart_vi: incumbent.map(|r| evaluate(&r, train, w).vi),
        nodes: res.nodes,
        elapsed_secs: res.elapsed.as_secs_f64(),
        time_to_best_secs: res.time_to_best.as_secs_f64(),
        trace: res.trace,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub rule: String,
    pub stats: RuleStats,
}

impl EvalReport {
    pub fn render(&self) -> String {
        format!("rule  {}\n{}\n", self.rule, stats_line(&self.stats))
    }
}

/// Applies a saved rule, with its own label, to every row of the data.
pub fn cmd_eval(config: &RunConfig, rule_file: impl AsRef<Path>) -> Result<EvalReport> {
    let file = RuleFile::read(rule_file)?;
    let ds = config.load()?;
    let (rule, view) = file.bind(&ds)?;
    let stats = evaluate(&rule, &view, config.weight);
    Ok(EvalReport {
        rule: rule.describe(&view),
        stats,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub w: f64,
    pub status: Status,
    pub i_max: Option<f64>,
    pub rule: Option<String>,
    pub train: Option<RuleStats>,
    pub test: Option<RuleStats>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>5}  {:>15}  {:>15}  {:>7}  {:>15}  {:>15}  {:>7}  {:>8}",
            "w", "train prec.", "train cov.", "VI", "test prec.", "test cov.", "VI", "time"
        );
        let cells = |st: &Option<RuleStats>| -> (String, String, String) {
            match st {
                Some(st) => (
                    format!("{}/{} {:.3}", st.correct, st.fired, st.precision),
                    format!("{}/{} {:.3}", st.fired, st.total, st.coverage),
                    format!("{}", st.vi),
                ),
                None => ("-".into(), "-".into(), "-".into()),
            }
        };
        for r in &self.rows {
            let (p, c, v) = cells(&r.train);
            let (tp, tc, tv) = cells(&r.test);
            let _ = writeln!(
                s,
                "{:>5}  {p:>15}  {c:>15}  {v:>7}  {tp:>15}  {tc:>15}  {tv:>7}  {:>7.3}s",
                r.w, r.seconds
            );
        }
        for r in &self.rows {
            if let Some(rule) = &r.rule {
                let _ = writeln!(s, "w={}: {rule}", r.w);
            }
        }
        s
    }
}

/// One fit per weight on the same split.
pub fn cmd_sweep(config: &RunConfig, weights: &[f64]) -> Result<SweepReport> {
    config.validate()?;
    if weights.is_empty() {
        return Err(Error::Config("no weights to sweep".into()));
    }
    let weights = weights
        .iter()
        .map(|&w| {
            Weight::new(w).map_err(|_| Error::Config(format!("weight {w} must be at least 1")))
        })
        .collect::<Result<Vec<_>>>()?;
    let ds = config.load()?;
    let spec = config.structure_spec()?;
    let (train, test) = config.train_test(&ds)?;
    let mut rows = Vec::new();
    for w in weights {
        let r = fit_on(config, w, &spec, &train, test.as_ref())?;
        rows.push(SweepRow {
            w: w.value(),
            status: r.status,
            i_max: r.i_max,
            rule: r.rule.map(|f| f.text),
            train: r.train,
            test: r.test,
            seconds: r.elapsed_secs,
        });
    }
    Ok(SweepReport { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EmitFormat {
    Lp,
    Mps,
}

impl FromStr for EmitFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lp" => Ok(EmitFormat::Lp),
            "mps" => Ok(EmitFormat::Mps),
            other => Err(Error::Config(format!(
                "unknown model format {other:?} (expected lp or mps)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EmitReport {
    pub model: PathBuf,
    pub warmstart: Option<PathBuf>,
    pub priorities: Option<PathBuf>,
    pub warmstart_vi: Option<f64>,
    pub census: Census,
}

impl EmitReport {
    pub fn render(&self) -> String {
        let mut s = format!(
            "model       {} ({} variables, {} rows)\n",
            self.model.display(),
            self.census.total_variables(),
            self.census.total_constraints()
        );
        if let Some(p) = &self.warmstart {
            let _ = writeln!(
                s,
                "warmstart   {} (I_max {})",
                p.display(),
                self.warmstart_vi.unwrap_or(f64::NAN)
            );
        }
        if let Some(p) = &self.priorities {
            let _ = writeln!(s, "priorities  {}", p.display());
        }
        s
    }
}

/// Writes the model to `out`, and optionally the greedy start vector
/// (`<out>.start`) and branching priorities (`<out>.ord`).
pub fn cmd_emit(
    config: &RunConfig,
    format: EmitFormat,
    with_warmstart: bool,
    with_priorities: bool,
) -> Result<EmitReport> {
    config.validate()?;
    let out = config.out_path()?.to_path_buf();
    let ds = config.load()?;
    let spec = config.structure_spec()?;
    let (train, _) = config.train_test(&ds)?;
    let groups = config.groups(&train)?;
    let problem = Problem::new(&train, &spec, &groups)?;
    let model = mip::build(&problem, config.weight, BuildOptions::default());
    match format {
        EmitFormat::Lp => mip::emit_lp(&model, &out)?,
        EmitFormat::Mps => mip::emit_mps(&model, &out)?,
    }
    let (mut warmstart, mut warmstart_vi, mut priorities) = (None, None, None);
    if with_warmstart {
        let (_, rule) = bsccart_fit(&problem, config.weight);
        let path = out.with_extension("start");
        let values = mip::emit_warmstart(&model, &problem, &rule, &path)?;
        warmstart_vi = Some(model.objective_value(&values));
        warmstart = Some(path);
    }
    if with_priorities {
        let path = out.with_extension("ord");
        mip::emit_priorities(&model, &path)?;
        priorities = Some(path);
    }
    Ok(EmitReport {
        model: out,
        warmstart,
        priorities,
        warmstart_vi,
        census: model.census(),
    })
}

/// Feature groups available to structures, one per line.
pub fn cmd_groups(config: &RunConfig) -> Result<String> {
    let ds = config.load()?;
    let groups = config.groups(&ds)?;
    let mut s = String::new();
    for g in &groups {
        let names: Vec<&str> = g
            .members
            .iter()
            .map(|&p| ds.feature(p).name.as_str())
            .collect();
        let _ = writeln!(
            s,
            "{} ({:?}, {}): {}",
            g.name,
            g.kind,
            g.len(),
            names.join(", ")
        );
    }
    let unsplittable: Vec<&str> = ds
        .unsplittable()
        .into_iter()
        .map(|p| ds.feature(p).name.as_str())
        .collect();
    if !unsplittable.is_empty() {
        let _ = writeln!(s, "constant (never split): {}", unsplittable.join(", "));
    }
    Ok(s)
}
