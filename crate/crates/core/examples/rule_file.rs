//! Fit on the train side, save the rule, and apply the saved rule to the
//! whole table.

use std::path::Path;

use ruletree::{cmd_eval, cmd_fit, RunConfig};

fn main() -> ruletree::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let dir = std::env::temp_dir().join("ruletree-rule-file");
    std::fs::create_dir_all(&dir).map_err(|e| ruletree::Error::io(&dir, e))?;
    let out = dir.join("clinic.rule.json");

    let mut config = RunConfig::new(data.join("clinic.csv"));
    config.schema = Some(data.join("clinic.schema"));
    config.out = Some(out.clone());
    let fit = cmd_fit(&config)?;
    print!("{}", fit.render());

    let eval = cmd_eval(&config, &out)?;
    println!("on all rows:");
    print!("{}", eval.render());
    Ok(())
}
