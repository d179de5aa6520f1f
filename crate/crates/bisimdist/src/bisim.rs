//! Stochastic bisimilarity by partition refinement.
//!
//! Two states are bisimilar when they agree on absorption, label, exit
//! rate, and on the probability of jumping into every equivalence class.
//! The coarsest such partition is computed by splitting blocks on their
//! members' probability signatures until nothing splits, which takes at
//! most one round per state.

use crate::model::{Ctmc, LabelMetric, ModelError};
use crate::tolerances;

/// Disjoint state blocks covering the whole model, each sorted, ordered
/// by their smallest member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// Index of the block containing `s`, if `s` is covered.
    pub fn block_of(&self, s: usize) -> Option<usize> {
        self.blocks.iter().position(|b| b.binary_search(&s).is_ok())
    }

    pub fn same_block(&self, s: usize, t: usize) -> bool {
        match (self.block_of(s), self.block_of(t)) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// Groups the members of one block by rate, splitting where neighbours
/// in rate order differ by more than a relative tolerance.
fn split_by_rate(m: &Ctmc, members: &[usize]) -> Vec<Vec<usize>> {
    let mut by_rate: Vec<usize> = members.to_vec();
    by_rate.sort_by(|&a, &b| {
        m.rate(a)
            .unwrap_or(0.0)
            .partial_cmp(&m.rate(b).unwrap_or(0.0))
            .expect("rates are finite")
    });
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut prev: Option<f64> = None;
    for s in by_rate {
        let r = m.rate(s).unwrap_or(0.0);
        let fresh = match prev {
            None => true,
            Some(p) => (r - p).abs() > tolerances::RATE_EQ_REL * r.abs().max(p.abs()),
        };
        if fresh {
            out.push(Vec::new());
        }
        out.last_mut().expect("a block was just opened").push(s);
        prev = Some(r);
    }
    out
}

/// The coarsest stochastic bisimulation of the model. Labels are compared
/// for equality; the label metric plays no role here and is accepted only
/// so callers can pass the same inputs they hand the distance functions.
pub fn bisim_classes(m: &Ctmc, _metric: &LabelMetric) -> Partition {
    let n = m.len();
    if n == 0 {
        return Partition { blocks: Vec::new() };
    }

    // initial blocks: absorption and label exactly, rate within tolerance
    let mut groups: std::collections::BTreeMap<(bool, &str), Vec<usize>> =
        std::collections::BTreeMap::new();
    for s in 0..n {
        groups
            .entry((m.is_absorbing(s), m.label(s)))
            .or_default()
            .push(s);
    }
    let mut block_id = vec![0usize; n];
    let mut num_blocks = 0;
    for members in groups.values() {
        for part in split_by_rate(m, members) {
            for s in part {
                block_id[s] = num_blocks;
            }
            num_blocks += 1;
        }
    }

    // split on probability-into-block signatures until stable
    loop {
        let sigs: Vec<Vec<f64>> = (0..n)
            .map(|s| {
                let mut sig = vec![0.0; num_blocks];
                for &(u, p) in m.successors(s) {
                    sig[block_id[u]] += p;
                }
                sig
            })
            .collect();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_blocks];
        for s in 0..n {
            members[block_id[s]].push(s);
        }
        let mut next_id = vec![0usize; n];
        let mut count = 0;
        for block in &mut members {
            block.sort_by(|&a, &b| {
                sigs[a].partial_cmp(&sigs[b]).expect("signatures are finite")
            });
            let mut prev: Option<usize> = None;
            for &s in block.iter() {
                let split = match prev {
                    None => true,
                    Some(p) => sigs[s]
                        .iter()
                        .zip(&sigs[p])
                        .any(|(a, b)| (a - b).abs() > tolerances::BLOCK_PROB),
                };
                if split {
                    count += 1;
                }
                next_id[s] = count - 1;
                prev = Some(s);
            }
        }
        block_id = next_id;
        if count == num_blocks {
            break;
        }
        num_blocks = count;
    }

    let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); num_blocks];
    for s in 0..n {
        blocks[block_id[s]].push(s);
    }
    blocks.sort_by_key(|b| b[0]);
    Partition { blocks }
}

/// Whether `s` and `t` fall in the same bisimilarity class.
pub fn bisimilar(
    m: &Ctmc,
    metric: &LabelMetric,
    s: usize,
    t: usize,
) -> Result<bool, ModelError> {
    for x in [s, t] {
        if x >= m.len() {
            return Err(ModelError::UnknownState(format!("#{x}")));
        }
    }
    if s == t {
        return Ok(true);
    }
    Ok(bisim_classes(m, metric).same_block(s, t))
}
