//! Labelled continuous-time Markov chains and their JSON document format.
//!
//! A chain is a set of states, each either absorbing or carrying an exit
//! rate and a next-state distribution with finite support. States wear
//! labels, and a `LabelMetric` turns label pairs into ground distances in
//! [0,1].

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::tolerances;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("document syntax: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("invalid model:\n{}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("unknown state id {0:?}")]
    UnknownState(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("bad number {0:?}")]
    BadNumber(String),
    #[error("bad generator parameters: {0}")]
    BadGenParams(String),
    #[error("bad edit: {0}")]
    BadEdit(String),
}

fn format_violations(vs: &[Violation]) -> String {
    vs.iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// One violated model or metric invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyStateSet,
    DuplicateState(String),
    UnknownEndpoint { from: String, to: String },
    DuplicateTransition { from: String, to: String },
    AbsorbingWithTransitions(String),
    RatedWithoutTransitions(String),
    BadRate { state: String, rate: f64 },
    BadProbability { from: String, to: String, prob: f64 },
    BadDistributionSum { state: String, sum: f64 },
    LabelNotInMetric { state: String, label: String },
    MetricDiagonal { label: String, d: f64 },
    MetricConflict { a: String, b: String },
    MetricRange { a: String, b: String, d: f64 },
    MetricMissingPair { a: String, b: String },
    MetricZeroDistinct { a: String, b: String },
    MetricTriangle { a: String, b: String, c: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyStateSet => write!(f, "empty state set"),
            Violation::DuplicateState(id) => write!(f, "duplicate state id {id:?}"),
            Violation::UnknownEndpoint { from, to } => {
                write!(f, "transition {from:?} -> {to:?} references an unknown state")
            }
            Violation::DuplicateTransition { from, to } => {
                write!(f, "duplicate transition {from:?} -> {to:?}")
            }
            Violation::AbsorbingWithTransitions(id) => {
                write!(f, "absorbing state {id:?} has outgoing transitions")
            }
            Violation::RatedWithoutTransitions(id) => {
                write!(f, "state {id:?} has a rate but no transitions")
            }
            Violation::BadRate { state, rate } => {
                write!(f, "state {state:?} has non-positive or non-finite rate {rate}")
            }
            Violation::BadProbability { from, to, prob } => {
                write!(f, "transition {from:?} -> {to:?} has bad probability {prob}")
            }
            Violation::BadDistributionSum { state, sum } => {
                write!(f, "distribution of {state:?} sums to {sum}, not 1")
            }
            Violation::LabelNotInMetric { state, label } => {
                write!(f, "state {state:?} wears label {label:?} unknown to the metric")
            }
            Violation::MetricDiagonal { label, d } => {
                write!(f, "metric assigns d({label:?},{label:?}) = {d}, want 0")
            }
            Violation::MetricConflict { a, b } => {
                write!(f, "metric lists conflicting distances for ({a:?},{b:?})")
            }
            Violation::MetricRange { a, b, d } => {
                write!(f, "metric distance d({a:?},{b:?}) = {d} outside [0,1]")
            }
            Violation::MetricMissingPair { a, b } => {
                write!(f, "metric lacks a distance for ({a:?},{b:?})")
            }
            Violation::MetricZeroDistinct { a, b } => {
                write!(f, "metric gives distance 0 to distinct labels {a:?} and {b:?}")
            }
            Violation::MetricTriangle { a, b, c } => {
                write!(f, "metric violates the triangle inequality on ({a:?},{b:?},{c:?})")
            }
        }
    }
}

/// Ground distance on labels, either the discrete metric or an explicit
/// symmetric table.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelMetric {
    Discrete,
    Table(MetricTable),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    alphabet: Vec<String>,
    index: HashMap<String, usize>,
    dist: Vec<Option<f64>>,
}

impl MetricTable {
    /// Builds a table from symmetric entries. The alphabet is the set of
    /// labels mentioned. Structural defects (conflicts, diagonal entries,
    /// out-of-range distances) are reported by `validate`, not here.
    pub fn from_entries(entries: &[(String, String, f64)]) -> Self {
        let mut alphabet: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let intern = |l: &str, alphabet: &mut Vec<String>, index: &mut HashMap<String, usize>| {
            *index.entry(l.to_string()).or_insert_with(|| {
                alphabet.push(l.to_string());
                alphabet.len() - 1
            })
        };
        for (a, b, _) in entries {
            intern(a, &mut alphabet, &mut index);
            intern(b, &mut alphabet, &mut index);
        }
        let k = alphabet.len();
        let mut dist = vec![None; k * k];
        for i in 0..k {
            dist[i * k + i] = Some(0.0);
        }
        for (a, b, d) in entries {
            let (i, j) = (index[a], index[b]);
            dist[i * k + j] = Some(*d);
            dist[j * k + i] = Some(*d);
        }
        MetricTable { alphabet, index, dist }
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = *self.index.get(a)?;
        let j = *self.index.get(b)?;
        self.dist[i * self.alphabet.len() + j]
    }

    /// Raw entries for the upper triangle, used when serializing.
    fn entries(&self) -> Vec<(String, String, f64)> {
        let k = self.alphabet.len();
        let mut out = Vec::new();
        for i in 0..k {
            for j in (i + 1)..k {
                if let Some(d) = self.dist[i * k + j] {
                    out.push((self.alphabet[i].clone(), self.alphabet[j].clone(), d));
                }
            }
        }
        out
    }
}

impl LabelMetric {
    /// Distance between two labels. The discrete metric accepts any labels;
    /// a table rejects labels outside its alphabet.
    pub fn dist(&self, a: &str, b: &str) -> Result<f64, ModelError> {
        match self {
            LabelMetric::Discrete => Ok(if a == b { 0.0 } else { 1.0 }),
            LabelMetric::Table(t) => {
                if !t.index.contains_key(a) {
                    return Err(ModelError::UnknownLabel(a.to_string()));
                }
                if !t.index.contains_key(b) {
                    return Err(ModelError::UnknownLabel(b.to_string()));
                }
                t.get(a, b)
                    .ok_or_else(|| ModelError::UnknownLabel(format!("{a}/{b}")))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Dynamics {
    rate: f64,
    /// Successors sorted by state index, probabilities strictly positive.
    succ: Vec<(usize, f64)>,
}

/// A labelled CTMC over dense state indices. Document state ids map to
/// indices in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Ctmc {
    ids: Vec<String>,
    labels: Vec<String>,
    dynamics: Vec<Option<Dynamics>>,
    index: HashMap<String, usize>,
}

impl Ctmc {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn state_id(&self, s: usize) -> &str {
        &self.ids[s]
    }

    pub fn state_index(&self, id: &str) -> Result<usize, ModelError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| ModelError::UnknownState(id.to_string()))
    }

    pub fn label(&self, s: usize) -> &str {
        &self.labels[s]
    }

    pub fn is_absorbing(&self, s: usize) -> bool {
        self.dynamics[s].is_none()
    }

    /// Exit rate, `None` for absorbing states.
    pub fn rate(&self, s: usize) -> Option<f64> {
        self.dynamics[s].as_ref().map(|d| d.rate)
    }

    /// Next-state distribution support, empty for absorbing states.
    pub fn successors(&self, s: usize) -> &[(usize, f64)] {
        self.dynamics[s].as_ref().map_or(&[], |d| &d.succ)
    }

    /// Transition probability, zero when absent.
    pub fn prob(&self, s: usize, t: usize) -> f64 {
        self.successors(s)
            .iter()
            .find(|(u, _)| *u == t)
            .map_or(0.0, |(_, p)| *p)
    }
}

/// Incremental construction of a chain by state id.
#[derive(Debug, Default)]
pub struct CtmcBuilder {
    states: Vec<(String, String, Option<(f64, Vec<(String, f64)>)>)>,
}

impl CtmcBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn absorbing(&mut self, id: &str, label: &str) -> &mut Self {
        self.states.push((id.into(), label.into(), None));
        self
    }

    pub fn state(&mut self, id: &str, label: &str, rate: f64, succ: &[(&str, f64)]) -> &mut Self {
        let succ = succ.iter().map(|(t, p)| (t.to_string(), *p)).collect();
        self.states.push((id.into(), label.into(), Some((rate, succ))));
        self
    }

    /// Resolves ids and checks structural soundness. Numeric invariants are
    /// left to `validate`.
    pub fn finish(&self) -> Result<Ctmc, ModelError> {
        let mut violations = Vec::new();
        if self.states.is_empty() {
            violations.push(Violation::EmptyStateSet);
        }
        let mut index = HashMap::new();
        for (i, (id, _, _)) in self.states.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                violations.push(Violation::DuplicateState(id.clone()));
            }
        }
        if !violations.is_empty() {
            return Err(ModelError::Invalid(violations));
        }
        let mut dynamics = Vec::with_capacity(self.states.len());
        for (id, _, dyn_) in &self.states {
            match dyn_ {
                None => dynamics.push(None),
                Some((rate, succ)) => {
                    let mut resolved = BTreeMap::new();
                    for (t, p) in succ {
                        let ti = *index.get(t).ok_or_else(|| {
                            ModelError::Invalid(vec![Violation::UnknownEndpoint {
                                from: id.clone(),
                                to: t.clone(),
                            }])
                        })?;
                        if resolved.insert(ti, *p).is_some() {
                            return Err(ModelError::Invalid(vec![Violation::DuplicateTransition {
                                from: id.clone(),
                                to: t.clone(),
                            }]));
                        }
                    }
                    dynamics.push(Some(Dynamics {
                        rate: *rate,
                        succ: resolved.into_iter().collect(),
                    }));
                }
            }
        }
        Ok(Ctmc {
            ids: self.states.iter().map(|(id, _, _)| id.clone()).collect(),
            labels: self.states.iter().map(|(_, l, _)| l.clone()).collect(),
            dynamics,
            index,
        })
    }
}

/// Checks every numeric invariant of the chain and the metric. An empty
/// result means the model is valid.
pub fn validate(m: &Ctmc, metric: &LabelMetric) -> Vec<Violation> {
    let mut out = Vec::new();
    if m.is_empty() {
        out.push(Violation::EmptyStateSet);
    }
    for s in 0..m.len() {
        if let Some(d) = &m.dynamics[s] {
            if !d.rate.is_finite() || d.rate <= 0.0 {
                out.push(Violation::BadRate { state: m.ids[s].clone(), rate: d.rate });
            }
            if d.succ.is_empty() {
                out.push(Violation::RatedWithoutTransitions(m.ids[s].clone()));
            }
            let mut sum = 0.0;
            for &(t, p) in &d.succ {
                if !p.is_finite() || p <= 0.0 || p > 1.0 + tolerances::PROB_OVERSHOOT {
                    out.push(Violation::BadProbability {
                        from: m.ids[s].clone(),
                        to: m.ids[t].clone(),
                        prob: p,
                    });
                }
                sum += p;
            }
            if !d.succ.is_empty() && (sum - 1.0).abs() > tolerances::DIST_SUM {
                out.push(Violation::BadDistributionSum { state: m.ids[s].clone(), sum });
            }
        }
    }
    if let LabelMetric::Table(t) = metric {
        let k = t.alphabet.len();
        for s in 0..m.len() {
            if !t.index.contains_key(&m.labels[s]) {
                out.push(Violation::LabelNotInMetric {
                    state: m.ids[s].clone(),
                    label: m.labels[s].clone(),
                });
            }
        }
        for i in 0..k {
            for j in (i + 1)..k {
                match t.dist[i * k + j] {
                    None => out.push(Violation::MetricMissingPair {
                        a: t.alphabet[i].clone(),
                        b: t.alphabet[j].clone(),
                    }),
                    Some(d) => {
                        if !d.is_finite() || !(0.0..=1.0).contains(&d) {
                            out.push(Violation::MetricRange {
                                a: t.alphabet[i].clone(),
                                b: t.alphabet[j].clone(),
                                d,
                            });
                        } else if d == 0.0 {
                            out.push(Violation::MetricZeroDistinct {
                                a: t.alphabet[i].clone(),
                                b: t.alphabet[j].clone(),
                            });
                        }
                    }
                }
            }
        }
        // Triangle inequality over all ordered triples with distinct middle.
        for a in 0..k {
            for b in 0..k {
                for c in 0..k {
                    if a == b || b == c {
                        continue;
                    }
                    let (ab, bc, ac) = (t.dist[a * k + b], t.dist[b * k + c], t.dist[a * k + c]);
                    if let (Some(ab), Some(bc), Some(ac)) = (ab, bc, ac) {
                        if ac > ab + bc + tolerances::DIST_SUM {
                            out.push(Violation::MetricTriangle {
                                a: t.alphabet[a].clone(),
                                b: t.alphabet[b].clone(),
                                c: t.alphabet[c].clone(),
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Document format

/// A JSON number, or a string holding either a rational "p/q" or a decimal.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Scalar {
    Num(f64),
    Text(String),
}

impl Scalar {
    fn to_f64(&self) -> Result<f64, ModelError> {
        match self {
            Scalar::Num(x) => Ok(*x),
            Scalar::Text(s) => {
                if let Some((p, q)) = s.split_once('/') {
                    let p: i64 = p.trim().parse().map_err(|_| ModelError::BadNumber(s.clone()))?;
                    let q: i64 = q.trim().parse().map_err(|_| ModelError::BadNumber(s.clone()))?;
                    if q == 0 {
                        return Err(ModelError::BadNumber(s.clone()));
                    }
                    Ok(p as f64 / q as f64)
                } else {
                    s.trim().parse().map_err(|_| ModelError::BadNumber(s.clone()))
                }
            }
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DocState {
    id: String,
    label: String,
    #[serde(default)]
    rate: Option<Scalar>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DocTransition {
    from: String,
    to: String,
    prob: Scalar,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum DocMetric {
    Discrete,
    Table { entries: Vec<DocMetricEntry> },
}

#[derive(Debug, Serialize, Deserialize)]
struct DocMetricEntry {
    a: String,
    b: String,
    d: Scalar,
}

#[derive(Debug, Serialize, Deserialize)]
struct Document {
    states: Vec<DocState>,
    transitions: Vec<DocTransition>,
    label_metric: DocMetric,
}

/// Parses a JSON model document. Omitted transitions are probability zero;
/// a null or absent rate marks an absorbing state; numbers may be JSON
/// numbers, rational strings "p/q", or decimal strings.
pub fn parse_model(json: &str) -> Result<(Ctmc, LabelMetric), ModelError> {
    let doc: Document = serde_json::from_str(json)?;

    let mut violations = Vec::new();
    if doc.states.is_empty() {
        violations.push(Violation::EmptyStateSet);
    }
    let mut index: HashMap<String, usize> = HashMap::new();
    for (i, st) in doc.states.iter().enumerate() {
        if index.insert(st.id.clone(), i).is_some() {
            violations.push(Violation::DuplicateState(st.id.clone()));
        }
    }
    let n = doc.states.len();
    let mut succ: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for tr in &doc.transitions {
        let (fi, ti) = match (index.get(&tr.from), index.get(&tr.to)) {
            (Some(&f), Some(&t)) => (f, t),
            _ => {
                violations.push(Violation::UnknownEndpoint {
                    from: tr.from.clone(),
                    to: tr.to.clone(),
                });
                continue;
            }
        };
        let p = tr.prob.to_f64()?;
        if succ[fi].insert(ti, p).is_some() {
            violations.push(Violation::DuplicateTransition {
                from: tr.from.clone(),
                to: tr.to.clone(),
            });
        }
    }
    let mut dynamics = Vec::with_capacity(n);
    for (i, st) in doc.states.iter().enumerate() {
        let rate = st.rate.as_ref().map(|r| r.to_f64()).transpose()?;
        match rate {
            None => {
                if !succ[i].is_empty() {
                    violations.push(Violation::AbsorbingWithTransitions(st.id.clone()));
                }
                dynamics.push(None);
            }
            Some(rate) => dynamics.push(Some(Dynamics {
                rate,
                succ: succ[i].iter().map(|(&t, &p)| (t, p)).collect(),
            })),
        }
    }
    let metric = match &doc.label_metric {
        DocMetric::Discrete => LabelMetric::Discrete,
        DocMetric::Table { entries } => {
            let mut resolved = Vec::new();
            let mut seen: HashMap<(String, String), f64> = HashMap::new();
            for e in entries {
                let d = e.d.to_f64()?;
                if e.a == e.b {
                    if d != 0.0 {
                        violations.push(Violation::MetricDiagonal { label: e.a.clone(), d });
                    }
                    continue;
                }
                let key = if e.a <= e.b {
                    (e.a.clone(), e.b.clone())
                } else {
                    (e.b.clone(), e.a.clone())
                };
                if let Some(prev) = seen.insert(key, d) {
                    if prev != d {
                        violations.push(Violation::MetricConflict { a: e.a.clone(), b: e.b.clone() });
                    }
                }
                resolved.push((e.a.clone(), e.b.clone(), d));
            }
            LabelMetric::Table(MetricTable::from_entries(&resolved))
        }
    };
    if !violations.is_empty() {
        return Err(ModelError::Invalid(violations));
    }
    let m = Ctmc {
        ids: doc.states.iter().map(|s| s.id.clone()).collect(),
        labels: doc.states.iter().map(|s| s.label.clone()).collect(),
        dynamics,
        index,
    };
    let violations = validate(&m, &metric);
    if !violations.is_empty() {
        return Err(ModelError::Invalid(violations));
    }
    Ok((m, metric))
}

/// Renders a model back to the document format. Numbers are emitted as JSON
/// numbers with shortest round-trip precision, so `parse_model` recovers the
/// model bit for bit.
pub fn serialize_model(m: &Ctmc, metric: &LabelMetric) -> String {
    let states = (0..m.len())
        .map(|s| DocState {
            id: m.ids[s].clone(),
            label: m.labels[s].clone(),
            rate: m.rate(s).map(Scalar::Num),
        })
        .collect();
    let mut transitions = Vec::new();
    for s in 0..m.len() {
        for &(t, p) in m.successors(s) {
            transitions.push(DocTransition {
                from: m.ids[s].clone(),
                to: m.ids[t].clone(),
                prob: Scalar::Num(p),
            });
        }
    }
    let label_metric = match metric {
        LabelMetric::Discrete => DocMetric::Discrete,
        LabelMetric::Table(t) => DocMetric::Table {
            entries: t
                .entries()
                .into_iter()
                .map(|(a, b, d)| DocMetricEntry { a, b, d: Scalar::Num(d) })
                .collect(),
        },
    };
    let doc = Document { states, transitions, label_metric };
    serde_json::to_string_pretty(&doc).expect("document serialization cannot fail")
}

// ---------------------------------------------------------------------------
// Random generation

/// SplitMix64. The exact update is part of the generator contract so that
/// seeds produce identical models across implementations:
/// state += 0x9E3779B97F4A7C15, then z = state is mixed by
/// z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9,
/// z = (z ^ (z >> 27)) * 0x94D049BB133111EB, output z ^ (z >> 31).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0,1), 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in (0,1], 53 random bits.
    pub fn next_f64_pos(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in 0..n by the widening-multiply method.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

/// Parameters for `random_ctmc`.
#[derive(Debug, Clone)]
pub struct GenParams {
    pub states: usize,
    pub out_degree: usize,
    pub labels: usize,
    pub absorbing: usize,
    pub rate_range: (f64, f64),
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            states: 8,
            out_degree: 3,
            labels: 2,
            absorbing: 0,
            rate_range: (1.0, 10.0),
            seed: 0,
        }
    }
}

/// Draws a random chain, deterministically in the seed. State ids are
/// "s0".."s{n-1}"; the last `absorbing` states are absorbing; labels
/// "l0".."l{c-1}" carry the discrete metric.
///
/// Draw order (fixed, part of the contract): one label per state in index
/// order; then per non-absorbing state in index order: the rate, then
/// `out_degree` successors by partial Fisher-Yates over 0..n, then one
/// positive weight per successor, normalized into probabilities.
pub fn random_ctmc(p: &GenParams) -> Result<(Ctmc, LabelMetric), ModelError> {
    if p.states == 0 {
        return Err(ModelError::BadGenParams("need at least one state".into()));
    }
    if p.labels == 0 {
        return Err(ModelError::BadGenParams("need at least one label".into()));
    }
    if p.absorbing > p.states {
        return Err(ModelError::BadGenParams("more absorbing states than states".into()));
    }
    if p.absorbing < p.states && (p.out_degree == 0 || p.out_degree > p.states) {
        return Err(ModelError::BadGenParams(format!(
            "out-degree {} outside 1..={}",
            p.out_degree, p.states
        )));
    }
    let (lo, hi) = p.rate_range;
    if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi) {
        return Err(ModelError::BadGenParams(format!("bad rate range {lo}..{hi}")));
    }
    let mut rng = SplitMix64::new(p.seed);
    let n = p.states;
    let labels: Vec<String> = (0..n).map(|_| format!("l{}", rng.below(p.labels))).collect();
    let first_absorbing = n - p.absorbing;
    let mut dynamics = Vec::with_capacity(n);
    for s in 0..n {
        if s >= first_absorbing {
            dynamics.push(None);
            continue;
        }
        let rate = lo + rng.next_f64() * (hi - lo);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..p.out_degree {
            let j = i + rng.below(n - i);
            pool.swap(i, j);
        }
        let mut succ: Vec<usize> = pool[..p.out_degree].to_vec();
        succ.sort_unstable();
        let weights: Vec<f64> = succ.iter().map(|_| rng.next_f64_pos()).collect();
        let total: f64 = weights.iter().sum();
        dynamics.push(Some(Dynamics {
            rate,
            succ: succ.iter().zip(&weights).map(|(&t, &w)| (t, w / total)).collect(),
        }));
    }
    let ids: Vec<String> = (0..n).map(|s| format!("s{s}")).collect();
    let index = ids.iter().cloned().enumerate().map(|(i, id)| (id, i)).collect();
    Ok((Ctmc { ids, labels, dynamics, index }, LabelMetric::Discrete))
}

// ---------------------------------------------------------------------------
// Perturbation

/// One probability edit: move `epsilon` mass at `state` from `lose` to
/// `gain`.
#[derive(Debug, Clone)]
pub struct PairEdit {
    pub state: String,
    pub gain: String,
    pub lose: String,
    pub epsilon: f64,
}

/// Applies the edits in order, keeping every touched distribution a
/// distribution. Errors if an edit pushes a probability outside [0,1].
pub fn perturb(m: &Ctmc, edits: &[PairEdit]) -> Result<Ctmc, ModelError> {
    let mut out = m.clone();
    for e in edits {
        let s = out.state_index(&e.state)?;
        let gain = out.state_index(&e.gain)?;
        let lose = out.state_index(&e.lose)?;
        if gain == lose {
            return Err(ModelError::BadEdit(format!(
                "edit at {:?} names the same target twice",
                e.state
            )));
        }
        if !e.epsilon.is_finite() {
            return Err(ModelError::BadEdit(format!("non-finite epsilon at {:?}", e.state)));
        }
        let dyn_ = out.dynamics[s]
            .as_mut()
            .ok_or_else(|| ModelError::BadEdit(format!("state {:?} is absorbing", e.state)))?;
        let mut map: BTreeMap<usize, f64> = dyn_.succ.iter().copied().collect();
        let new_gain = map.get(&gain).copied().unwrap_or(0.0) + e.epsilon;
        let new_lose = map.get(&lose).copied().unwrap_or(0.0) - e.epsilon;
        for (t, v) in [(gain, new_gain), (lose, new_lose)] {
            if !(-tolerances::PROB_OVERSHOOT..=1.0 + tolerances::PROB_OVERSHOOT).contains(&v) {
                return Err(ModelError::BadEdit(format!(
                    "edit at {:?} drives probability of {:?} to {v}",
                    e.state,
                    out.ids[t]
                )));
            }
            if v.abs() <= tolerances::PROB_OVERSHOOT {
                map.remove(&t);
            } else {
                map.insert(t, v);
            }
        }
        dyn_.succ = map.into_iter().collect();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_json() -> &'static str {
        r#"{
            "states": [
                {"id": "a", "label": "red", "rate": 2},
                {"id": "b", "label": "blue", "rate": null}
            ],
            "transitions": [
                {"from": "a", "to": "a", "prob": "1/3"},
                {"from": "a", "to": "b", "prob": "2/3"}
            ],
            "label_metric": {"kind": "discrete"}
        }"#
    }

    #[test]
    fn parses_rationals_exactly() {
        let (m, _) = parse_model(two_state_json()).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.prob(0, 0), 1.0f64 / 3.0);
        assert_eq!(m.prob(0, 1), 2.0f64 / 3.0);
        assert!(m.is_absorbing(1));
        assert_eq!(m.rate(0), Some(2.0));
    }

    #[test]
    fn round_trips_through_the_document_format() {
        let (m, metric) = parse_model(two_state_json()).unwrap();
        let (m2, metric2) = parse_model(&serialize_model(&m, &metric)).unwrap();
        assert_eq!(m, m2);
        assert_eq!(metric, metric2);
    }

    #[test]
    fn rejects_bad_distribution_sum() {
        let bad = two_state_json().replace("2/3", "3/5");
        match parse_model(&bad) {
            Err(ModelError::Invalid(vs)) => {
                assert!(vs.iter().any(|v| matches!(v, Violation::BadDistributionSum { .. })));
            }
            other => panic!("expected invalid, got {other:?}"),
        }
    }

    #[test]
    fn rejects_empty_state_set() {
        let err = parse_model(
            r#"{"states": [], "transitions": [], "label_metric": {"kind": "discrete"}}"#,
        )
        .unwrap_err();
        match err {
            ModelError::Invalid(vs) => assert!(vs.contains(&Violation::EmptyStateSet)),
            other => panic!("expected invalid, got {other:?}"),
        }
    }

    #[test]
    fn rejects_transitions_from_absorbing_states() {
        let bad = r#"{
            "states": [{"id": "a", "label": "x"}, {"id": "b", "label": "x", "rate": 1}],
            "transitions": [
                {"from": "a", "to": "b", "prob": 1},
                {"from": "b", "to": "a", "prob": 1}
            ],
            "label_metric": {"kind": "discrete"}
        }"#;
        match parse_model(bad) {
            Err(ModelError::Invalid(vs)) => {
                assert!(vs.iter().any(|v| matches!(v, Violation::AbsorbingWithTransitions(_))));
            }
            other => panic!("expected invalid, got {other:?}"),
        }
    }

    #[test]
    fn validates_table_metrics() {
        let json = r#"{
            "states": [{"id": "a", "label": "red", "rate": 1}],
            "transitions": [{"from": "a", "to": "a", "prob": 1}],
            "label_metric": {"kind": "table", "entries": [
                {"a": "red", "b": "blue", "d": 0.5},
                {"a": "blue", "b": "green", "d": 0.1},
                {"a": "red", "b": "green", "d": 0.9}
            ]}
        }"#;
        match parse_model(json) {
            Err(ModelError::Invalid(vs)) => {
                assert!(vs.iter().any(|v| matches!(v, Violation::MetricTriangle { .. })));
            }
            other => panic!("expected triangle violation, got {other:?}"),
        }
    }

    #[test]
    fn strict_metric_required_on_labels() {
        let t = MetricTable::from_entries(&[("x".into(), "y".into(), 0.0)]);
        let mut b = CtmcBuilder::new();
        b.state("a", "x", 1.0, &[("a", 1.0)]);
        let m = b.finish().unwrap();
        let vs = validate(&m, &LabelMetric::Table(t));
        assert!(vs.iter().any(|v| matches!(v, Violation::MetricZeroDistinct { .. })));
    }

    #[test]
    fn generator_is_deterministic_and_valid() {
        let p = GenParams { states: 9, out_degree: 3, labels: 3, absorbing: 2, ..Default::default() };
        let (m1, metric) = random_ctmc(&p).unwrap();
        let (m2, _) = random_ctmc(&p).unwrap();
        assert_eq!(m1, m2);
        assert!(validate(&m1, &metric).is_empty());
        assert_eq!((0..m1.len()).filter(|&s| m1.is_absorbing(s)).count(), 2);
        for s in 0..m1.len() {
            if !m1.is_absorbing(s) {
                assert_eq!(m1.successors(s).len(), 3);
                let (lo, hi) = p.rate_range;
                let r = m1.rate(s).unwrap();
                assert!(r >= lo && r < hi);
            }
        }
    }

    #[test]
    fn seeds_differ() {
        let a = random_ctmc(&GenParams { seed: 1, ..Default::default() }).unwrap().0;
        let b = random_ctmc(&GenParams { seed: 2, ..Default::default() }).unwrap().0;
        assert_ne!(a, b);
    }

    #[test]
    fn perturb_moves_mass_and_preserves_sums() {
        let (m, metric) = parse_model(two_state_json()).unwrap();
        let edited = perturb(
            &m,
            &[PairEdit { state: "a".into(), gain: "b".into(), lose: "a".into(), epsilon: 0.1 }],
        )
        .unwrap();
        assert!((edited.prob(0, 0) - (1.0 / 3.0 - 0.1)).abs() < 1e-15);
        assert!((edited.prob(0, 1) - (2.0 / 3.0 + 0.1)).abs() < 1e-15);
        assert!(validate(&edited, &metric).is_empty());
    }

    #[test]
    fn perturb_rejects_overdraw() {
        let (m, _) = parse_model(two_state_json()).unwrap();
        let err = perturb(
            &m,
            &[PairEdit { state: "a".into(), gain: "b".into(), lose: "a".into(), epsilon: 0.5 }],
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::BadEdit(_)));
    }

    #[test]
    fn perturb_can_empty_a_support_entry() {
        let (m, _) = parse_model(two_state_json()).unwrap();
        let edited = perturb(
            &m,
            &[PairEdit {
                state: "a".into(),
                gain: "b".into(),
                lose: "a".into(),
                epsilon: 1.0 / 3.0,
            }],
        )
        .unwrap();
        assert_eq!(edited.successors(0), &[(1, 1.0)]);
    }
}
