//! The three solvers agree on random chains.
//!
//! Draws a handful of seeded models, computes every pairwise distance by
//! fixed-point iteration, by the global linear program, and by the
//! demand-driven solver, and prints the sup-norm gaps between them.

use bisimdist::{global_lp, iterate, on_the_fly, Discount, GenParams, OtfOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lambda = Discount::new(0.5)?;
    let eps = 1e-10;

    println!("{:>4}  {:>3}  {:>12}  {:>12}  {:>12}", "seed", "n", "iter vs lp", "iter vs otf", "lp vs otf");
    let mut worst = 0.0f64;
    for seed in 1..=8u64 {
        let p = GenParams { states: 7, out_degree: 3, seed, ..Default::default() };
        let (m, metric) = bisimdist::random_ctmc(&p)?;
        let n = m.len();
        let queries: Vec<(usize, usize)> = (0..n).flat_map(|t| (0..t).map(move |s| (s, t))).collect();

        let it = iterate(&m, &metric, lambda, eps)?;
        let lp = global_lp(&m, &metric, lambda)?;
        let otf = on_the_fly(&m, &metric, lambda, &queries, &OtfOptions::default())?;

        let mut g_il = 0.0f64;
        let mut g_io = 0.0f64;
        let mut g_lo = 0.0f64;
        for &(s, t) in &queries {
            let vi = it.distances.get(s, t);
            let vl = lp.distances.get(s, t);
            let vo = otf.values[&(s, t)];
            g_il = g_il.max((vi - vl).abs());
            g_io = g_io.max((vi - vo).abs());
            g_lo = g_lo.max((vl - vo).abs());
        }
        worst = worst.max(g_il).max(g_io).max(g_lo);
        println!("{seed:>4}  {n:>3}  {g_il:>12.2e}  {g_io:>12.2e}  {g_lo:>12.2e}");
    }
    println!();
    println!("worst gap over all models: {worst:.2e}");
    Ok(())
}
