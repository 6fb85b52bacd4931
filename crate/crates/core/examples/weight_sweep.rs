//! Trade precision for coverage by lowering the weight on a one-feature
//! table.

use std::path::Path;

use ruletree::{cmd_sweep, RunConfig};

fn main() -> ruletree::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let mut config = RunConfig::new(data.join("sensitivity.csv"));
    config.target = Some("label".into());
    config.depth = Some(1);
    config.full = true;
    let report = cmd_sweep(&config, &[10.0, 9.0, 8.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0])?;
    print!("{}", report.render());
    Ok(())
}
