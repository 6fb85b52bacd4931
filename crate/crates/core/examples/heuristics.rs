//! Greedy tree and beam search against the exact optimum on one split.

use std::path::Path;

use ruletree::dataset::train_test_split;
use ruletree::heuristics::DEFAULT_BEAM_WIDTH;
use ruletree::{bsccart_fit, evaluate, rscrules_fit, solve, Budget, Problem, RunConfig, Weight};

fn main() -> ruletree::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let mut config = RunConfig::new(data.join("clinic.csv"));
    config.schema = Some(data.join("clinic.schema"));
    config.structure = Some("cat-num".into());
    let ds = config.load()?;
    let (train, test) = train_test_split(&ds, 0.8, 4)?;
    let groups = config.groups(&train)?;
    let spec = config.structure_spec()?;
    let problem = Problem::new(&train, &spec, &groups)?;
    let w = Weight::new(6.0)?;

    let (tree, greedy) = bsccart_fit(&problem, w);
    println!("greedy tree:\n{}", tree.dump(&train));
    let beam = rscrules_fit(&problem, w, DEFAULT_BEAM_WIDTH)?;
    let exact = solve(&problem, w, &Budget::default())
        .rule
        .expect("feasible");

    for (name, rule) in [("greedy", &greedy), ("beam", &beam), ("exact", &exact)] {
        let tr = evaluate(rule, &train, w);
        let te = evaluate(rule, &test, w);
        println!(
            "{name:<7} train VI {:>6}  test VI {:>6}  {}",
            tr.vi,
            te.vi,
            rule.describe(&train)
        );
    }
    Ok(())
}
