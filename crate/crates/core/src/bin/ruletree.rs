use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{ArgAction, Args, Parser, Subcommand};
use ruletree::{bench, commands, EmitFormat, Method, RunConfig, Weight};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "ruletree",
    version,
    about = "Find the best single IF-THEN rule under a tree structure"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for the optimal rule on the train side of a split.
    Fit(Common),
    /// Score a saved rule on a dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Rule file written by `fit --out`.
        #[arg(long)]
        rule: PathBuf,
    },
    /// Fit once per weight on the same split.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "10,8,6,4,2")]
        weights: Vec<f64>,
    },
    /// Compare methods over seeded splits.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "opdt,bsccart,rscrules")]
        methods: Vec<String>,
    },
    /// Write the mixed-integer model and its sidecar files.
    Emit(Common),
    /// Print the feature groups a structure may reference.
    Groups(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    data: PathBuf,
    /// `name:kind` lines (kind is num, cat or target).
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long, default_value_t = 10.0)]
    weight: f64,
    /// Chain like `cat-num`, or a structure table file.
    #[arg(long)]
    structure: Option<String>,
    /// Seconds.
    #[arg(long, default_value_t = 600.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = commands::DEFAULT_SPLITS)]
    splits: usize,
    #[arg(long, default_value_t = commands::DEFAULT_RATIO)]
    ratio: f64,
    /// Use every row for fitting.
    #[arg(long)]
    full: bool,
    #[arg(long, default_value = "on", value_parser = switch, action = ArgAction::Set)]
    warmstart: bool,
    #[arg(long, default_value = "on", value_parser = switch, action = ArgAction::Set)]
    priorities: bool,
    /// Column ranking (`name score` lines) for the num/cat groups.
    #[arg(long)]
    importance: Option<PathBuf>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long, default_value_t = ruletree::heuristics::DEFAULT_BEAM_WIDTH)]
    beam_width: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `text` or `json` for reports; `lp` or `mps` for emit.
    #[arg(long)]
    format: Option<String>,
}

fn switch(s: &str) -> Result<bool, String> {
    match s {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected on or off, got {s:?}")),
    }
}

impl Common {
    fn config(&self) -> ruletree::Result<RunConfig> {
        let weight = Weight::new(self.weight).map_err(|_| {
            ruletree::Error::Config(format!("weight {} must be at least 1", self.weight))
        })?;
        if !(self.time_limit >= 0.0 && self.time_limit.is_finite()) {
            return Err(ruletree::Error::Config(
                "time limit must be a non-negative number of seconds".into(),
            ));
        }
        Ok(RunConfig {
            data: self.data.clone(),
            schema: self.schema.clone(),
            target: self.target.clone(),
            depth: self.depth,
            weight,
            structure: self.structure.clone(),
            time_limit: Duration::from_secs_f64(self.time_limit),
            seed: self.seed,
            splits: self.splits,
            ratio: self.ratio,
            full: self.full,
            warmstart: self.warmstart,
            priorities: self.priorities,
            importance: self.importance.clone(),
            top_k: self.top_k,
            beam_width: self.beam_width,
            out: self.out.clone(),
        })
    }

    fn json(&self) -> Result<bool, String> {
        match self.format.as_deref() {
            None | Some("text") => Ok(false),
            Some("json") => Ok(true),
            Some(other) => Err(format!(
                "unknown report format {other:?} (expected text or json)"
            )),
        }
    }
}

fn print<T: Serialize>(json: bool, value: &T, text: String) {
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(value).expect("reports serialize")
        );
    } else {
        print!("{text}");
    }
}

enum Failure {
    Usage(String),
    Run(ruletree::Error),
}

impl From<ruletree::Error> for Failure {
    fn from(e: ruletree::Error) -> Self {
        Failure::Run(e)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Fit(c) => {
            let json = c.json().map_err(Failure::Usage)?;
            let report = commands::cmd_fit(&c.config()?)?;
            print(json, &report, report.render());
        }
        Command::Eval { common, rule } => {
            let json = common.json().map_err(Failure::Usage)?;
            let report = commands::cmd_eval(&common.config()?, rule)?;
            print(json, &report, report.render());
        }
        Command::Sweep { common, weights } => {
            let json = common.json().map_err(Failure::Usage)?;
            let report = commands::cmd_sweep(&common.config()?, &weights)?;
            print(json, &report, report.render());
        }
        Command::Bench { common, methods } => {
            let json = common.json().map_err(Failure::Usage)?;
            let methods = methods
                .iter()
                .map(|m| m.parse::<Method>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Failure::Usage(e.to_string()))?;
            let config = common.config()?;
            let report = bench::cmd_bench(&config, &methods)?;
            if let Some(out) = &config.out {
                std::fs::write(out, report.to_json() + "\n")
                    .map_err(|e| ruletree::Error::io(out, e))?;
            }
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.render());
            }
        }
        Command::Emit(c) => {
            let format: EmitFormat = c
                .format
                .as_deref()
                .unwrap_or("lp")
                .parse()
                .map_err(|e: ruletree::Error| Failure::Usage(e.to_string()))?;
            let config = c.config()?;
            let report = commands::cmd_emit(&config, format, config.warmstart, config.priorities)?;
            print!("{}", report.render());
        }
        Command::Groups(c) => {
            print!("{}", commands::cmd_groups(&c.config()?)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
