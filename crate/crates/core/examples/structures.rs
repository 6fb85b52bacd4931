//! The same data under different structure constraints. Restricting a
//! level to one group can only lower the optimum.

use std::path::Path;

use ruletree::{cmd_fit, RunConfig};

fn main() -> ruletree::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let table = data.join("clinic.structure");
    let table = table.to_string_lossy().into_owned();
    for structure in [
        "all-all",
        "num-num",
        "cat-num",
        "num-cat",
        "cat-cat",
        table.as_str(),
    ] {
        let mut config = RunConfig::new(data.join("clinic.csv"));
        config.schema = Some(data.join("clinic.schema"));
        config.structure = Some(structure.to_string());
        config.full = true;
        let report = cmd_fit(&config)?;
        let name = if structure.contains('/') {
            "clinic.structure"
        } else {
            structure
        };
        let text = report.rule.map(|r| r.text).unwrap_or_default();
        println!(
            "{name:<17} I_max {:>4}  {text}",
            report.i_max.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
