//! Recover a planted conjunction `f1 >= 0.6 AND f2 < 0.3` with the exact
//! search on a depth-2 tree.

use ruletree::dataset::derive_default_groups;
use ruletree::synth::planted_conjunction;
use ruletree::{evaluate, solve, Budget, Problem, StructureSpec, Weight};

fn main() -> ruletree::Result<()> {
    let planted = planted_conjunction(200, 6, 0.7, 11);
    let ds = planted.dataset()?;
    let spec = StructureSpec::from_chain("all-all")?;
    let groups = derive_default_groups(&ds);
    let problem = Problem::new(&ds, &spec, &groups)?;
    let w = Weight::new(10.0)?;

    let res = solve(&problem, w, &Budget::default());
    let rule = res.rule.expect("a feasible rule always exists");
    let stats = evaluate(&rule, &ds, w);
    println!("status   {:?}", res.status);
    println!("rule     {}", rule.describe(&ds));
    println!(
        "fired    {} of {} ({} planted positives)",
        stats.fired, stats.total, planted.positives
    );
    println!(
        "I_max    {}  nodes {}  {:.3}s",
        res.i_max.unwrap_or(f64::NAN),
        res.nodes,
        res.elapsed.as_secs_f64()
    );
    Ok(())
}
