//! Compare the pruned search with exhaustive enumeration on a tiny table.

use ruletree::dataset::derive_default_groups;
use ruletree::search::brute_force_oracle;
use ruletree::synth::planted_conjunction;
use ruletree::{solve, Budget, Problem, StructureSpec, Weight};

fn main() -> ruletree::Result<()> {
    let ds = planted_conjunction(24, 3, 0.5, 5).dataset()?;
    let groups = derive_default_groups(&ds);
    for chain in ["all", "all-all"] {
        let spec = StructureSpec::from_chain(chain)?;
        let problem = Problem::new(&ds, &spec, &groups)?;
        for w in [1.0, 2.0, 10.0] {
            let w = Weight::new(w)?;
            let fast = solve(&problem, w, &Budget::default());
            let (slow, _) = brute_force_oracle(&problem, w, 1 << 32)?;
            println!(
                "{chain:<8} w={:<4} search {:>5}  oracle {:>5}  nodes {}",
                w.value(),
                fast.i_max.unwrap_or(f64::NAN),
                slow,
                fast.nodes
            );
        }
    }
    Ok(())
}
