//! Load a mixed table, one-hot its categorical columns and list the feature
//! groups a structure can name, then narrow `num`/`cat` with a ranking.

use std::path::Path;

use ruletree::{cmd_groups, RunConfig};

fn main() -> ruletree::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let mut config = RunConfig::new(data.join("clinic.csv"));
    config.schema = Some(data.join("clinic.schema"));

    let ds = config.load()?;
    println!(
        "{} rows kept, {} features, labels {:?}",
        ds.n_samples(),
        ds.n_features(),
        ds.label_names()
    );
    for f in ds.features() {
        println!("  {:<14} eps {:?}", f.name, f.epsilon);
    }

    print!("{}", cmd_groups(&config)?);

    config.importance = Some(data.join("clinic.importance"));
    config.top_k = Some(3);
    println!("top 3 by importance:");
    print!("{}", cmd_groups(&config)?);
    Ok(())
}
