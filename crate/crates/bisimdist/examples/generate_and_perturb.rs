//! Random chains, serialization, and targeted perturbation.
//!
//! Draws a seeded chain, checks it validates, round-trips it through the
//! JSON format, then shifts probability mass on one state and measures how
//! far the edit moves a distance.

use bisimdist::{iterate, parse_model, perturb, serialize_model, validate, Discount, GenParams, PairEdit};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = GenParams { states: 6, out_degree: 2, labels: 2, seed: 42, ..Default::default() };
    let (m, metric) = bisimdist::random_ctmc(&p)?;

    let violations = validate(&m, &metric);
    println!("drew {} states (seed {}), {} violations", m.len(), p.seed, violations.len());
    for s in 0..m.len() {
        let succ: Vec<String> = m
            .successors(s)
            .iter()
            .map(|&(v, pr)| format!("{} {:.3}", m.state_id(v), pr))
            .collect();
        println!(
            "  {} [{}] rate {:>6.3}  -> {}",
            m.state_id(s),
            m.label(s),
            m.rate(s).unwrap_or(0.0),
            succ.join(", ")
        );
    }

    let json = serialize_model(&m, &metric);
    let (back, metric2) = parse_model(&json)?;
    let same = (0..m.len()).all(|s| m.successors(s) == back.successors(s));
    println!();
    println!("JSON round-trip: {} bytes, transitions identical: {same}", json.len());
    assert!(validate(&back, &metric2).is_empty());

    // Shift mass on s0 between its two successors and watch one distance.
    let lambda = Discount::new(0.5)?;
    let (gain, _) = m.successors(0)[0];
    let (lose, _) = m.successors(0)[1];
    let edit = PairEdit {
        state: m.state_id(0).into(),
        gain: m.state_id(gain).into(),
        lose: m.state_id(lose).into(),
        epsilon: 0.05,
    };
    let edited = perturb(&m, &[edit])?;
    let before = iterate(&m, &metric, lambda, 1e-10)?.distances;
    let after = iterate(&edited, &metric, lambda, 1e-10)?.distances;
    println!();
    println!(
        "moved 0.05 of {}'s mass from {} to {}",
        m.state_id(0),
        m.state_id(lose),
        m.state_id(gain)
    );
    println!("sup distance change over all pairs: {:.6}", before.sup_distance(&after));
    Ok(())
}
