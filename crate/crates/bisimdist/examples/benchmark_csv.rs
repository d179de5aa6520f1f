//! A small benchmark run, emitted as CSV on stdout.
//!
//! Each row is one random instance: the demand-driven solver answers the
//! query, fixed-point iteration answers it independently, and `error` is
//! the sup gap between the two. Single-pair rows also report how many
//! pairs the solver visited out of those reachable from the query.

use std::io;

use bisimdist::{run_bench, write_csv, BenchConfig, QueryKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = BenchConfig {
        sizes: vec![8, 12],
        out_degrees: vec![2, 3],
        seeds: (0..3).collect(),
        lambda: 0.6,
        query: QueryKind::SinglePair,
        ..Default::default()
    };
    let records = run_bench(&cfg)?;
    write_csv(&mut io::stdout().lock(), &records)?;
    Ok(())
}
