//! Partition refinement, and the pairs it declares equivalent are exactly
//! the pairs at distance zero.
//!
//! The chain has five states in three behavioural classes: two red states
//! split the same mass between an absorbing green state and a blue
//! two-cycle. Nudging the first red state's split by 0.1 breaks the red
//! class and gives the pair a positive distance.

use bisimdist::{bisim_classes, iterate, perturb, CtmcBuilder, Discount, LabelMetric, PairEdit};

fn model() -> (bisimdist::Ctmc, LabelMetric) {
    let mut b = CtmcBuilder::new();
    b.state("s1", "red", 3.0, &[("s3", 1.0 / 3.0), ("s4", 2.0 / 3.0)]);
    b.state("s2", "red", 3.0, &[("s3", 1.0 / 3.0), ("s4", 1.0 / 3.0), ("s5", 1.0 / 3.0)]);
    b.absorbing("s3", "green");
    b.state("s4", "blue", 5.0, &[("s5", 1.0)]);
    b.state("s5", "blue", 5.0, &[("s4", 1.0)]);
    (b.finish().unwrap(), LabelMetric::Discrete)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (m, metric) = model();
    let lambda = Discount::new(0.5)?;

    let classes = bisim_classes(&m, &metric);
    println!("equivalence classes:");
    for block in &classes.blocks {
        let ids: Vec<&str> = block.iter().map(|&s| m.state_id(s)).collect();
        println!("  {{{}}}", ids.join(", "));
    }

    let run = iterate(&m, &metric, lambda, 1e-12)?;
    println!();
    println!("distance zero iff same class:");
    for t in 0..m.len() {
        for s in 0..t {
            let d = run.distances.get(s, t);
            let same = classes.same_block(s, t);
            println!("  d({}, {}) = {:.4}   same class: {}", m.state_id(s), m.state_id(t), d, same);
        }
    }

    // Move a tenth of s1's mass from the blue cycle to the absorbing state.
    let edit = PairEdit { state: "s1".into(), gain: "s3".into(), lose: "s4".into(), epsilon: 0.1 };
    let edited = perturb(&m, &[edit])?;
    let classes2 = bisim_classes(&edited, &metric);
    let run2 = iterate(&edited, &metric, lambda, 1e-12)?;
    println!();
    println!("after shifting 0.1 of s1's mass from s4 to s3:");
    println!("  classes: {}", classes2.blocks.len());
    println!("  same class (s1, s2): {}", classes2.same_block(0, 1));
    println!("  d(s1, s2) = {:.6}", run2.distances.get(0, 1));
    Ok(())
}
