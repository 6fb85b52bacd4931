//! Multi-split benchmark of the exact search against the two heuristics.
//!
//! Every split shuffles with `seed + split`, fits each method on the train
//! side and scores its rule on both sides. Wall-clock measurements live in
//! [`BenchReport::wall_clock`] only, so the rest of the report is a pure
//! function of the data, configuration and seeds.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::commands::{run_exact, RunConfig};
use crate::dataset::{train_test_split, Dataset};
use crate::error::{Error, Result};
use crate::heuristics::{bsccart_fit, rscrules_fit};
use crate::problem::Problem;
use crate::rules::{evaluate, Rule, RuleStats};
use crate::search::Status;

pub const BENCH_REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Opdt,
    Bsccart,
    Rscrules,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Opdt, Method::Bsccart, Method::Rscrules];

    pub fn name(self) -> &'static str {
        match self {
            Method::Opdt => "opdt",
            Method::Bsccart => "bsccart",
            Method::Rscrules => "rscrules",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "opdt" | "exact" => Ok(Method::Opdt),
            "bsccart" | "cart" => Ok(Method::Bsccart),
            "rscrules" | "beam" => Ok(Method::Rscrules),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub coverage: f64,
    pub vi: f64,
    pub fired: usize,
    pub total: usize,
}

impl From<&RuleStats> for Metrics {
    fn from(s: &RuleStats) -> Self {
        Metrics {
            precision: s.precision,
            coverage: s.coverage,
            vi: s.vi,
            fired: s.fired,
            total: s.total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub split: usize,
    pub seed: u64,
    pub method: Method,
    /// `optimal`, `time_limit`, `heuristic` or `error`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub rule: Option<String>,
    pub train: Option<Metrics>,
    pub test: Option<Metrics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Summary {
    /// Mean and sample standard deviation (0 for a single value).
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary {
                mean: f64::NAN,
                std: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n == 1 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Summary { mean, std, n }
    }
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.3} (±{:.3})", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: Method,
    pub train_precision: Summary,
    pub train_coverage: Summary,
    pub train_vi: Summary,
    pub test_precision: Summary,
    pub test_coverage: Summary,
    pub test_vi: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub split: usize,
    pub method: Method,
    pub runtime_secs: f64,
    pub time_to_best_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WallClock {
    pub timings: Vec<Timing>,
    pub runtime: Vec<(Method, Summary)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub version: u32,
    pub data: String,
    pub structure: String,
    pub w: f64,
    pub ratio: f64,
    pub seed: u64,
    pub n_splits: usize,
    pub time_limit_secs: f64,
    pub warmstart: bool,
    pub priorities: bool,
    pub methods: Vec<Method>,
    pub cells: Vec<Cell>,
    pub aggregates: Vec<Aggregate>,
    pub wall_clock: WallClock,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    /// JSON with every wall-clock field cleared.
    pub fn to_json_masked(&self) -> String {
        BenchReport {
            wall_clock: WallClock::default(),
            ..self.clone()
        }
        .to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn recompute_aggregates(&self) -> Vec<Aggregate> {
        aggregate(&self.methods, &self.cells)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} splits of {} (structure {}, w = {})",
            self.n_splits, self.data, self.structure, self.w
        );
        let _ = writeln!(
            s,
            "{:<9}  {:>18}  {:>18}  {:>20}  {:>18}  {:>18}  {:>20}",
            "method",
            "train precision",
            "train coverage",
            "train VI",
            "test precision",
            "test coverage",
            "test VI"
        );
        for a in &self.aggregates {
            let _ = writeln!(
                s,
                "{:<9}  {:>18}  {:>18}  {:>20}  {:>18}  {:>18}  {:>20}",
                a.method.name(),
                a.train_precision.to_string(),
                a.train_coverage.to_string(),
                a.train_vi.to_string(),
                a.test_precision.to_string(),
                a.test_coverage.to_string(),
                a.test_vi.to_string()
            );
        }
        for (m, rt) in &self.wall_clock.runtime {
            let _ = writeln!(s, "{:<9}  runtime {rt} s", m.name());
        }
        for c in self.cells.iter().filter(|c| c.error.is_some()) {
            let _ = writeln!(
                s,
                "split {} {}: {}",
                c.split,
                c.method.name(),
                c.error.as_deref().unwrap_or_default()
            );
        }
        s
    }
}

fn aggregate(methods: &[Method], cells: &[Cell]) -> Vec<Aggregate> {
    methods
        .iter()
        .map(|&m| {
            let of = |pick: &dyn Fn(&Cell) -> Option<f64>| -> Summary {
                let v: Vec<f64> = cells
                    .iter()
                    .filter(|c| c.method == m)
                    .filter_map(pick)
                    .collect();
                Summary::of(&v)
            };
            Aggregate {
                method: m,
                train_precision: of(&|c| c.train.map(|x| x.precision)),
                train_coverage: of(&|c| c.train.map(|x| x.coverage)),
                train_vi: of(&|c| c.train.map(|x| x.vi)),
                test_precision: of(&|c| c.test.map(|x| x.precision)),
                test_coverage: of(&|c| c.test.map(|x| x.coverage)),
                test_vi: of(&|c| c.test.map(|x| x.vi)),
            }
        })
        .collect()
}

struct Outcome {
    rule: Rule,
    status: String,
    time_to_best: f64,
}

fn run_method(method: Method, config: &RunConfig, problem: &Problem<'_>) -> Result<Outcome> {
    let w = config.weight;
    let start = Instant::now();
    match method {
        Method::Opdt => {
            let (res, _) = run_exact(problem, w, config);
            let status = match res.status {
                Status::Optimal => "optimal",
                Status::TimeLimit => "time_limit",
            };
            let rule = res
                .rule
                .ok_or_else(|| Error::Config("no rule found within the time limit".into()))?;
            Ok(Outcome {
                rule,
                status: status.into(),
                time_to_best: res.time_to_best.as_secs_f64(),
            })
        }
        Method::Bsccart => {
            let (_, rule) = bsccart_fit(problem, w);
            Ok(Outcome {
                rule,
                status: "heuristic".into(),
                time_to_best: start.elapsed().as_secs_f64(),
            })
        }
        Method::Rscrules => {
            let rule = rscrules_fit(problem, w, config.beam_width)?;
            Ok(Outcome {
                rule,
                status: "heuristic".into(),
                time_to_best: start.elapsed().as_secs_f64(),
            })
        }
    }
}

/// Runs every method on `config.splits` seeded splits. A failing cell is
/// recorded and the run continues.
pub fn cmd_bench(config: &RunConfig, methods: &[Method]) -> Result<BenchReport> {
    config.validate()?;
    if methods.is_empty() {
        return Err(Error::Config("no methods to benchmark".into()));
    }
    let ds = config.load()?;
    let spec = config.structure_spec()?;
    let mut cells = Vec::new();
    let mut timings = Vec::new();
    for split in 0..config.splits {
        let seed = config.seed.wrapping_add(split as u64);
        let sides: Result<(Dataset, Dataset)> = train_test_split(&ds, config.ratio, seed);
        let prepared = sides.and_then(|(train, test)| {
            let groups = config.groups(&train)?;
            Ok((train, test, groups))
        });
        for &method in methods {
            let start = Instant::now();
            let outcome =
                prepared
                    .as_ref()
                    .map_err(|e| e.to_string())
                    .and_then(|(train, test, groups)| {
                        let problem =
                            Problem::new(train, &spec, groups).map_err(|e| e.to_string())?;
                        let out =
                            run_method(method, config, &problem).map_err(|e| e.to_string())?;
                        Ok((out, train, test))
                    });
            let runtime = start.elapsed().as_secs_f64();
            let cell = match outcome {
                Ok((out, train, test)) => {
                    timings.push(Timing {
                        split,
                        method,
                        runtime_secs: runtime,
                        time_to_best_secs: out.time_to_best,
                    });
                    Cell {
                        split,
                        seed,
                        method,
                        status: out.status,
                        error: None,
                        rule: Some(out.rule.describe(train)),
                        train: Some(Metrics::from(&evaluate(&out.rule, train, config.weight))),
                        test: Some(Metrics::from(&evaluate(&out.rule, test, config.weight))),
                    }
                }
                Err(e) => {
                    timings.push(Timing {
                        split,
                        method,
                        runtime_secs: runtime,
                        time_to_best_secs: runtime,
                    });
                    Cell {
                        split,
                        seed,
                        method,
                        status: "error".into(),
                        error: Some(e),
                        rule: None,
                        train: None,
                        test: None,
                    }
                }
            };
            cells.push(cell);
        }
    }
    let runtime = methods
        .iter()
        .map(|&m| {
            let v: Vec<f64> = timings
                .iter()
                .filter(|t| t.method == m)
                .map(|t| t.runtime_secs)
                .collect();
            (m, Summary::of(&v))
        })
        .collect();
    Ok(BenchReport {
        version: BENCH_REPORT_VERSION,
        data: config
            .data
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default(),
        structure: spec.summary(),
        w: config.weight.value(),
        ratio: config.ratio,
        seed: config.seed,
        n_splits: config.splits,
        time_limit_secs: config.time_limit.as_secs_f64(),
        warmstart: config.warmstart,
        priorities: config.priorities,
        methods: methods.to_vec(),
        aggregates: aggregate(methods, &cells),
        cells,
        wall_clock: WallClock { timings, runtime },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_single_value() {
        let s = Summary::of(&[3.5]);
        assert_eq!((s.mean, s.std, s.n), (3.5, 0.0, 1));
        let s = Summary::of(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn method_names() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("ripper".parse::<Method>().is_err());
    }
}
