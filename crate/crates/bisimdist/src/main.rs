//! Thin command-line front end over the library. Machine-readable output
//! goes to standard output, diagnostics to standard error. Exit codes:
//! 0 success, 1 usage error, 2 validation or input error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bisimdist::bench::{run_bench, write_csv, BenchConfig, QueryKind};
use bisimdist::bisim::bisim_classes;
use bisimdist::fixpoint::{iterate, Discount};
use bisimdist::global_lp::global_lp;
use bisimdist::model::{
    parse_model, perturb, random_ctmc, serialize_model, Ctmc, GenParams, LabelMetric, PairEdit,
};
use bisimdist::onthefly::{on_the_fly, OtfOptions, TraceEvent};

#[derive(Parser)]
#[command(name = "bisimdist", version, about = "Behavioural distances for labelled CTMCs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    /// Demand-driven exact solver
    Otf,
    /// Fixed-point iteration to --eps
    Iter,
    /// Whole-system linear program
    Lp,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum QueryArg {
    AllPairs,
    SinglePair,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a model file; exit 2 with a violation list if it is invalid
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Distances between state pairs
    Distance {
        #[arg(long)]
        model: PathBuf,
        /// Discount factor in (0,1)
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        /// Pairs by state id, "a:b[,c:d...]"
        #[arg(long, conflicts_with = "all")]
        pairs: Option<String>,
        /// Every unordered pair
        #[arg(long)]
        all: bool,
        #[arg(long, value_enum, default_value_t = MethodArg::Otf)]
        method: MethodArg,
        /// Iteration tolerance (iter method only)
        #[arg(long, default_value_t = 1e-7)]
        eps: f64,
        /// JSON file of distances taken as given: [{"a": id, "b": id, "d": number}]
        #[arg(long)]
        known: Option<PathBuf>,
        /// Print the solver's event trace to standard error (otf method)
        #[arg(long)]
        trace: bool,
    },
    /// Print the bisimilarity classes, one block per line
    Bisim {
        #[arg(long)]
        model: PathBuf,
    },
    /// Generate a random model
    Gen {
        #[arg(long, default_value_t = 8)]
        states: usize,
        #[arg(long, default_value_t = 3)]
        out_degree: usize,
        #[arg(long, default_value_t = 2)]
        labels: usize,
        #[arg(long, default_value_t = 0)]
        absorbing: usize,
        #[arg(long, default_value_t = 1.0)]
        rate_min: f64,
        #[arg(long, default_value_t = 10.0)]
        rate_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (standard output when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Move probability mass between two successors of a state
    Perturb {
        #[arg(long)]
        model: PathBuf,
        /// State whose distribution changes
        #[arg(long)]
        state: String,
        /// Successor gaining mass
        #[arg(long)]
        gain: String,
        /// Successor losing mass
        #[arg(long)]
        lose: String,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Benchmark the on-the-fly solver against iteration; emits CSV
    Bench {
        /// Comma-separated state counts
        #[arg(long, default_value = "10")]
        sizes: String,
        /// Comma-separated out-degrees
        #[arg(long, default_value = "3")]
        out_degrees: String,
        /// Seed range "lo..hi" or comma-separated list
        #[arg(long, default_value = "0..5")]
        seeds: String,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        #[arg(long, value_enum, default_value_t = QueryArg::AllPairs)]
        query: QueryArg,
        #[arg(long, default_value_t = 2)]
        labels: usize,
        #[arg(long, default_value_t = 0)]
        absorbing: usize,
        #[arg(long, default_value_t = 1.0)]
        rate_min: f64,
        #[arg(long, default_value_t = 10.0)]
        rate_max: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Run(String),
}

fn fail<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Run(e.to_string())
}

fn read_model(path: &Path) -> Result<(Ctmc, LabelMetric), Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
    parse_model(&text).map_err(fail)
}

fn write_out(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => {
            fs::write(p, text).map_err(|e| Failure::Run(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// 12 significant digits: plain decimals for ordinary magnitudes,
/// scientific only when decimals would eat the precision.
fn fmt12(v: f64) -> String {
    if v == 0.0 || v.abs() >= 1e-3 {
        format!("{v:.12}")
    } else {
        format!("{v:.11e}")
    }
}

fn parse_pair_list(m: &Ctmc, spec: &str) -> Result<Vec<(usize, usize)>, Failure> {
    let mut out = Vec::new();
    for chunk in spec.split(',') {
        let (a, b) = chunk
            .split_once(':')
            .ok_or_else(|| Failure::Usage(format!("bad pair {chunk:?}, want a:b")))?;
        let s = m.state_index(a.trim()).map_err(fail)?;
        let t = m.state_index(b.trim()).map_err(fail)?;
        out.push((s, t));
    }
    Ok(out)
}

fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for t in 0..n {
        for s in 0..t {
            out.push((s, t));
        }
    }
    out
}

#[derive(serde::Deserialize)]
struct KnownEntry {
    a: String,
    b: String,
    d: f64,
}

fn load_known(m: &Ctmc, path: &Path) -> Result<Vec<((usize, usize), f64)>, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
    let entries: Vec<KnownEntry> = serde_json::from_str(&text).map_err(fail)?;
    let mut out = Vec::new();
    for e in entries {
        let a = m.state_index(&e.a).map_err(fail)?;
        let b = m.state_index(&e.b).map_err(fail)?;
        out.push(((a, b), e.d));
    }
    Ok(out)
}

fn trace_line(m: &Ctmc, e: &TraceEvent) -> String {
    let pair = |p: (usize, usize)| format!("({},{})", m.state_id(p.0), m.state_id(p.1));
    match e {
        TraceEvent::Installed { pair: p } => format!("install {}", pair(*p)),
        TraceEvent::Evaluated { pair: p, value } => {
            format!("evaluate {} = {}", pair(*p), fmt12(*value))
        }
        TraceEvent::Replaced { pair: p, old_cost, new_cost } => {
            format!("replace {} cost {} -> {}", pair(*p), fmt12(*old_cost), fmt12(*new_cost))
        }
        TraceEvent::Promoted { pair: p, value } => {
            format!("settle {} = {}", pair(*p), fmt12(*value))
        }
    }
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>, Failure> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| Failure::Usage(format!("bad count {x:?}")))
        })
        .collect()
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, Failure> {
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: u64 = lo
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("bad seed bound {lo:?}")))?;
        let hi: u64 = hi
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("bad seed bound {hi:?}")))?;
        Ok((lo..hi).collect())
    } else {
        s.split(',')
            .map(|x| {
                x.trim()
                    .parse()
                    .map_err(|_| Failure::Usage(format!("bad seed {x:?}")))
            })
            .collect()
    }
}

fn cmd_distance(
    model: &Path,
    lambda: f64,
    pairs: Option<String>,
    all: bool,
    method: MethodArg,
    eps: f64,
    known: Option<PathBuf>,
    trace: bool,
) -> Result<(), Failure> {
    if method != MethodArg::Otf && (known.is_some() || trace) {
        return Err(Failure::Usage(
            "--known and --trace apply to the otf method only".into(),
        ));
    }
    let (m, metric) = read_model(model)?;
    let lambda = Discount::new(lambda).map_err(fail)?;
    let queries = if all {
        all_pairs(m.len())
    } else {
        let spec = pairs.ok_or_else(|| Failure::Usage("pass --pairs a:b[,c:d...] or --all".into()))?;
        parse_pair_list(&m, &spec)?
    };
    let print = |value: &dyn Fn(usize, usize) -> f64| {
        for &(s, t) in &queries {
            println!("{} {} {}", m.state_id(s), m.state_id(t), fmt12(value(s, t)));
        }
    };
    match method {
        MethodArg::Otf => {
            let mut opts = OtfOptions::default();
            if let Some(kpath) = &known {
                opts.known = load_known(&m, kpath)?;
            }
            let run = on_the_fly(&m, &metric, lambda, &queries, &opts).map_err(fail)?;
            if trace {
                for e in &run.trace {
                    eprintln!("{}", trace_line(&m, e));
                }
            }
            print(&|s, t| run.values[&(s.min(t), s.max(t))]);
        }
        MethodArg::Iter => {
            let run = iterate(&m, &metric, lambda, eps).map_err(fail)?;
            print(&|s, t| run.distances.get(s, t));
        }
        MethodArg::Lp => {
            let run = global_lp(&m, &metric, lambda).map_err(fail)?;
            print(&|s, t| run.distances.get(s, t));
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Validate { model } => {
            // parsing validates; surface the violation list on failure
            read_model(&model)?;
            println!("ok");
            Ok(())
        }
        Cmd::Distance { model, lambda, pairs, all, method, eps, known, trace } => {
            cmd_distance(&model, lambda, pairs, all, method, eps, known, trace)
        }
        Cmd::Bisim { model } => {
            let (m, metric) = read_model(&model)?;
            let p = bisim_classes(&m, &metric);
            for block in &p.blocks {
                let ids: Vec<&str> = block.iter().map(|&s| m.state_id(s)).collect();
                println!("{}", ids.join(" "));
            }
            Ok(())
        }
        Cmd::Gen { states, out_degree, labels, absorbing, rate_min, rate_max, seed, out } => {
            let params = GenParams {
                states,
                out_degree,
                labels,
                absorbing,
                rate_range: (rate_min, rate_max),
                seed,
            };
            let (m, metric) = random_ctmc(&params).map_err(fail)?;
            let mut text = serialize_model(&m, &metric);
            if !text.ends_with('\n') {
                text.push('\n');
            }
            write_out(&out, &text)
        }
        Cmd::Perturb { model, state, gain, lose, eps, out } => {
            let (m, metric) = read_model(&model)?;
            let edit = PairEdit { state, gain, lose, epsilon: eps };
            let edited = perturb(&m, &[edit]).map_err(fail)?;
            let mut text = serialize_model(&edited, &metric);
            if !text.ends_with('\n') {
                text.push('\n');
            }
            write_out(&out, &text)
        }
        Cmd::Bench {
            sizes,
            out_degrees,
            seeds,
            lambda,
            query,
            labels,
            absorbing,
            rate_min,
            rate_max,
            out,
        } => {
            let cfg = BenchConfig {
                sizes: parse_usize_list(&sizes)?,
                out_degrees: parse_usize_list(&out_degrees)?,
                seeds: parse_seeds(&seeds)?,
                lambda,
                query: match query {
                    QueryArg::AllPairs => QueryKind::AllPairs,
                    QueryArg::SinglePair => QueryKind::SinglePair,
                },
                labels,
                absorbing,
                rate_range: (rate_min, rate_max),
            };
            let records = run_bench(&cfg).map_err(fail)?;
            let mut buf = Vec::new();
            write_csv(&mut buf, &records).map_err(fail)?;
            write_out(&out, &String::from_utf8(buf).expect("CSV rows are UTF-8"))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
