//! A three-state chain whose distance has a closed form, solved three ways.
//!
//! State s loops forever; state t drifts toward a differently-labelled
//! absorbing-in-behaviour state u with probability 1-q per jump. When the
//! discount equals the drift parameter q the distance between s and t is
//! q/(1+q), which every solver in the crate must reproduce.

use bisimdist::{global_lp, iterate, on_the_fly, CtmcBuilder, Discount, LabelMetric, OtfOptions};

fn drift_model(q: f64) -> (bisimdist::Ctmc, LabelMetric) {
    let mut b = CtmcBuilder::new();
    b.state("s", "red", 1.0, &[("s", 1.0)]);
    b.state("t", "red", 1.0, &[("t", q), ("u", 1.0 - q)]);
    b.state("u", "blue", 1.0, &[("u", 1.0)]);
    (b.finish().unwrap(), LabelMetric::Discrete)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>6}  {:>14}  {:>14}  {:>14}  {:>14}  {:>9}", "lambda", "closed form", "iteration", "linear prog", "on the fly", "worst err");
    for q in [0.3, 0.5, 0.9] {
        let (m, metric) = drift_model(q);
        let lambda = Discount::new(q)?;
        let want = q / (1.0 + q);

        let it = iterate(&m, &metric, lambda, 1e-12)?;
        let lp = global_lp(&m, &metric, lambda)?;
        let otf = on_the_fly(&m, &metric, lambda, &[(0, 1)], &OtfOptions::default())?;

        let vi = it.distances.get(0, 1);
        let vl = lp.distances.get(0, 1);
        let vo = otf.values[&(0, 1)];
        let err = [vi, vl, vo].iter().map(|v| (v - want).abs()).fold(0.0f64, f64::max);
        println!("{q:>6.2}  {want:>14.12}  {vi:>14.12}  {vl:>14.12}  {vo:>14.12}  {err:>9.2e}");
    }
    Ok(())
}
