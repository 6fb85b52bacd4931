//! Build the mixed-integer model for a small table, print its size, write
//! it as LP with a greedy start vector and branching priorities, and check
//! that the start vector satisfies every row.

use ruletree::dataset::derive_default_groups;
use ruletree::mip::{self, BuildOptions};
use ruletree::synth::planted_conjunction;
use ruletree::{bsccart_fit, Problem, StructureSpec, Weight};

fn main() -> ruletree::Result<()> {
    let ds = planted_conjunction(30, 3, 0.6, 2).dataset()?;
    let spec = StructureSpec::from_chain("all-all")?;
    let groups = derive_default_groups(&ds);
    let problem = Problem::new(&ds, &spec, &groups)?;
    let w = Weight::new(10.0)?;

    let model = mip::build(&problem, w, BuildOptions::default());
    let census = model.census();
    println!(
        "{} variables, {} rows",
        census.total_variables(),
        census.total_constraints()
    );
    for (family, n) in &census.constraints {
        println!("  {family:<13} {n}");
    }

    let (_, rule) = bsccart_fit(&problem, w);
    let start = mip::warm_start(&model, &problem, &rule)?;
    println!("start rule   {}", rule.describe(&ds));
    println!(
        "start I_max  {}  max violation {:e}",
        model.objective_value(&start),
        model.max_violation(&start)
    );

    let dir = std::env::temp_dir().join("ruletree-mip-export");
    std::fs::create_dir_all(&dir).map_err(|e| ruletree::Error::io(&dir, e))?;
    mip::emit_lp(&model, dir.join("model.lp"))?;
    mip::emit_warmstart(&model, &problem, &rule, dir.join("model.start"))?;
    mip::emit_priorities(&model, dir.join("model.ord"))?;
    println!(
        "wrote model.lp, model.start, model.ord to {}",
        dir.display()
    );
    print!(
        "{}",
        model
            .lp_string()
            .lines()
            .take(6)
            .collect::<Vec<_>>()
            .join("\n")
    );
    println!();
    Ok(())
}
