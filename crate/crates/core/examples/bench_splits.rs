//! Exact search, greedy tree and beam search over five seeded splits.

use std::path::Path;

use ruletree::{cmd_bench, Method, RunConfig};

fn main() -> ruletree::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let mut config = RunConfig::new(data.join("clinic.csv"));
    config.schema = Some(data.join("clinic.schema"));
    config.structure = Some("all-all".into());
    config.splits = 5;
    config.seed = 100;
    let report = cmd_bench(&config, &Method::ALL)?;
    print!("{}", report.render());
    assert_eq!(report.recompute_aggregates(), report.aggregates);
    Ok(())
}
