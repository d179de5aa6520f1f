//! Benchmark harness comparing the demand-driven solver against plain
//! fixed-point iteration on randomly generated models.
//!
//! Each instance is generated from its seed, solved exactly by the
//! on-the-fly method under a wall clock, and then the iterative method
//! runs under the same time budget (at least one application). The error
//! column records how far iteration got in that time. One CSV row per
//! instance.

use std::io::{self, Write};
use std::time::Instant;

use crate::fixpoint::{iterate_from, Discount, DistanceMatrix, FixpointError};
use crate::model::{random_ctmc, GenParams, ModelError, SplitMix64};
use crate::onthefly::{on_the_fly, OtfError, OtfOptions};

pub const CSV_HEADER: &str =
    "n,out_degree,seed,query_kind,method,time_ms,tp_count,iterations,error,visited,reachable";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    /// Every unordered pair of distinct states.
    AllPairs,
    /// One pair drawn uniformly from the instance seed.
    SinglePair,
}

impl QueryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            QueryKind::AllPairs => "all_pairs",
            QueryKind::SinglePair => "single_pair",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub out_degrees: Vec<usize>,
    pub seeds: Vec<u64>,
    pub lambda: f64,
    pub query: QueryKind,
    pub labels: usize,
    pub absorbing: usize,
    pub rate_range: (f64, f64),
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![10],
            out_degrees: vec![3],
            seeds: (0..5).collect(),
            lambda: 0.5,
            query: QueryKind::AllPairs,
            labels: 2,
            absorbing: 0,
            rate_range: (1.0, 10.0),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("bad benchmark parameters: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fixpoint(#[from] FixpointError),
    #[error(transparent)]
    Otf(#[from] OtfError),
}

/// One benchmark row. Timing columns vary between runs; everything else
/// is reproducible from the seed.
#[derive(Debug, Clone)]
pub struct BenchRecord {
    pub n: usize,
    pub out_degree: usize,
    pub seed: u64,
    pub query_kind: QueryKind,
    pub time_ms: f64,
    pub tp_count: usize,
    pub iterations: usize,
    pub error: f64,
    pub visited: Option<usize>,
    pub reachable: Option<usize>,
}

impl BenchRecord {
    pub fn csv_row(&self) -> String {
        let opt = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},otf,{:.3},{},{},{},{},{}",
            self.n,
            self.out_degree,
            self.seed,
            self.query_kind.as_str(),
            self.time_ms,
            self.tp_count,
            self.iterations,
            self.error,
            opt(self.visited),
            opt(self.reachable),
        )
    }
}

fn run_instance(
    cfg: &BenchConfig,
    lambda: Discount,
    n: usize,
    out_degree: usize,
    seed: u64,
) -> Result<BenchRecord, BenchError> {
    if cfg.query == QueryKind::SinglePair && n < 2 {
        return Err(BenchError::BadConfig(format!(
            "single-pair queries need at least two states, got {n}"
        )));
    }
    let params = GenParams {
        states: n,
        out_degree,
        labels: cfg.labels,
        absorbing: cfg.absorbing,
        rate_range: cfg.rate_range,
        seed,
    };
    let (m, metric) = random_ctmc(&params)?;
    let queries: Vec<(usize, usize)> = match cfg.query {
        QueryKind::AllPairs => {
            let mut q = Vec::new();
            for t in 0..n {
                for s in 0..t {
                    q.push((s, t));
                }
            }
            q
        }
        QueryKind::SinglePair => {
            let mut rng = SplitMix64::new(seed.wrapping_mul(0x9E37_79B9).wrapping_add(1));
            let s = rng.below(n);
            let mut t = rng.below(n - 1);
            if t >= s {
                t += 1;
            }
            vec![(s.min(t), s.max(t))]
        }
    };

    let clock = Instant::now();
    let run = on_the_fly(&m, &metric, lambda, &queries, &OtfOptions::default())?;
    let budget = clock.elapsed();

    let clock = Instant::now();
    let mut d = DistanceMatrix::bottom(n);
    let mut iterations = 0usize;
    loop {
        d = iterate_from(&m, &metric, lambda, d, 1)?.distances;
        iterations += 1;
        if clock.elapsed() >= budget {
            break;
        }
    }

    let mut error = 0.0f64;
    for &(s, t) in &queries {
        error = error.max((run.values[&(s, t)] - d.get(s, t)).abs());
    }
    let (visited, reachable) = match cfg.query {
        QueryKind::AllPairs => (None, None),
        QueryKind::SinglePair => (Some(run.stats.visited), Some(run.stats.reachable)),
    };
    Ok(BenchRecord {
        n,
        out_degree,
        seed,
        query_kind: cfg.query,
        time_ms: budget.as_secs_f64() * 1e3,
        tp_count: run.stats.tp_solved,
        iterations,
        error,
        visited,
        reachable,
    })
}

/// Runs every (size, out-degree, seed) combination and returns one record
/// per instance, in configuration order.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRecord>, BenchError> {
    let lambda = Discount::new(cfg.lambda)?;
    let mut out = Vec::new();
    for &n in &cfg.sizes {
        for &od in &cfg.out_degrees {
            for &seed in &cfg.seeds {
                out.push(run_instance(cfg, lambda, n, od, seed)?);
            }
        }
    }
    Ok(out)
}

pub fn write_csv<W: Write>(w: &mut W, records: &[BenchRecord]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}
