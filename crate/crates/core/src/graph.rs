//! Perfect correlations as directed graphs on the measurement outcomes.
//!
//! A perfect correlation pairs every outcome `i` on A with exactly one outcome
//! `π(i)` on B. Drawing an edge `i → π(i)` gives a graph made of loops and
//! circles, i.e. the cycle decomposition of `π`. The cycle type
//! `[n₁, n₂, …, n_w]` (number of 1-cycles, 2-cycles, …) is independent of how
//! the basis vectors are labelled.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::assignment::max_weight_assignment;
use crate::error::{Error, Result};
use crate::qudit::JointDistribution;

/// Default perfection tolerance on off-map probability mass.
pub const DEFAULT_PERFECTION_TOLERANCE: f64 = 1e-9;
pub const MAX_ENUMERATION_DIM: usize = 12;

/// A bijection on `0..d`: outcome `i` on A pairs with outcome `map[i]` on B.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct OutcomePermutation {
    map: Vec<usize>,
}

impl OutcomePermutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let d = map.len();
        let mut seen = vec![false; d];
        for &j in &map {
            if j >= d || seen[j] {
                return Err(Error::NotBijection { dim: d, map });
            }
            seen[j] = true;
        }
        Ok(OutcomePermutation { map })
    }

    pub fn identity(d: usize) -> Self {
        OutcomePermutation { map: (0..d).collect() }
    }

    pub fn dim(&self) -> usize {
        self.map.len()
    }

    pub fn image(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// Disjoint cycles, each starting at its smallest element.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.dim()];
        let mut out = Vec::new();
        for start in 0..self.dim() {
            if seen[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut k = start;
            while !seen[k] {
                seen[k] = true;
                cycle.push(k);
                k = self.map[k];
            }
            out.push(cycle);
        }
        out
    }

    /// The same correlation seen after relabelling basis vectors: new label `k`
    /// refers to old vector `order[k]` on both sides.
    pub fn relabelled(&self, order: &[usize]) -> Result<Self> {
        let d = self.dim();
        let order = OutcomePermutation::new(order.to_vec())?;
        if order.dim() != d {
            return Err(Error::dims(d, order.dim()));
        }
        let mut inverse = vec![0; d];
        for (k, &old) in order.map.iter().enumerate() {
            inverse[old] = k;
        }
        Ok(OutcomePermutation {
            map: (0..d).map(|k| inverse[self.map[order.map[k]]]).collect(),
        })
    }

    /// Adjacency list `i -> map[i]`, one edge per line, 1-based labels.
    pub fn adjacency_list(&self) -> String {
        self.map
            .iter()
            .enumerate()
            .map(|(i, &j)| format!("{} -> {}\n", i + 1, j + 1))
            .collect()
    }
}

/// Cycle counts `[n₁, …, n_d]`, stored at full length `d`. Display and
/// serialization trim trailing zeros, giving the bracket form `[n₁,…,n_w]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CycleTypeSignature {
    counts: Vec<usize>,
}

impl CycleTypeSignature {
    /// `counts[k]` is the number of `(k+1)`-cycles. Must satisfy `Σ (k+1)·counts[k] = counts.len()`
    /// after padding; trailing zeros are optional.
    pub fn from_counts(mut counts: Vec<usize>, d: usize) -> Result<Self> {
        let total: usize = counts.iter().enumerate().map(|(k, n)| (k + 1) * n).sum();
        if total != d || counts.len() > d {
            return Err(Error::dims(format!("cycle lengths summing to {d}"), total));
        }
        counts.resize(d, 0);
        Ok(CycleTypeSignature { counts })
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    /// Full-length counts.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Counts up to the largest cycle length present.
    pub fn trimmed(&self) -> &[usize] {
        let w = self.counts.iter().rposition(|&n| n > 0).map_or(0, |k| k + 1);
        &self.counts[..w]
    }

    pub fn largest_cycle(&self) -> usize {
        self.trimmed().len()
    }

    /// All loops: both sides always agree.
    pub fn is_all_loops(&self) -> bool {
        self.counts.first().copied() == Some(self.dim())
    }

    pub fn parse(s: &str) -> Result<Self> {
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| Error::Format(format!("signature must look like [n1,n2,...], got {s:?}")))?;
        let counts = inner
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("bad signature {s:?}: {e}")))?;
        let d = counts.iter().enumerate().map(|(k, n)| (k + 1) * n).sum();
        Self::from_counts(counts, d)
    }
}

impl fmt::Display for CycleTypeSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.trimmed().iter().map(|n| n.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

impl Serialize for CycleTypeSignature {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

pub fn cycle_type(perm: &OutcomePermutation) -> CycleTypeSignature {
    let d = perm.dim();
    let mut counts = vec![0; d];
    for cycle in perm.cycles() {
        counts[cycle.len() - 1] += 1;
    }
    CycleTypeSignature { counts }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationStatus {
    /// Outcomes are paired one-to-one up to the tolerance.
    Perfect,
    /// Probability mass leaks off every one-to-one pairing.
    Imperfect,
    /// Some outcome essentially never occurs, so the pairing constraint is vacuous for it.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerfectCorrelationVerdict {
    pub perfect: bool,
    pub status: CorrelationStatus,
    /// Best one-to-one map, reported whatever the status.
    pub permutation: OutcomePermutation,
    /// Cycle type of `permutation`; meaningful as a correlation type only when `perfect`.
    pub signature: CycleTypeSignature,
    /// `1 − Σ_i P(i, π(i))` for the best map `π`.
    pub leakage: f64,
}

/// Finds the heaviest one-to-one outcome map and decides whether the
/// distribution is a perfect correlation.
pub fn classify(dist: &JointDistribution, tol: f64) -> Result<PerfectCorrelationVerdict> {
    let d = dist.local_dim();
    if !(tol > 0.0 && tol < 1.0 / d as f64) {
        return Err(Error::InvalidTolerance { tol, dim: d });
    }
    let (map, weight) = max_weight_assignment(dist.probs());
    let leakage = (1.0 - weight).max(0.0);
    let permutation = OutcomePermutation { map };
    let signature = cycle_type(&permutation);
    let degenerate = dist
        .marginal_a()
        .into_iter()
        .chain(dist.marginal_b())
        .any(|m| m < tol);
    let status = if leakage > tol {
        CorrelationStatus::Imperfect
    } else if degenerate {
        CorrelationStatus::Degenerate
    } else {
        CorrelationStatus::Perfect
    };
    Ok(PerfectCorrelationVerdict {
        perfect: status == CorrelationStatus::Perfect,
        status,
        permutation,
        signature,
        leakage,
    })
}

fn partitions_into(remaining: usize, max_part: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if remaining == 0 {
        out.push(current.clone());
        return;
    }
    for part in (1..=max_part.min(remaining)).rev() {
        current.push(part);
        partitions_into(remaining - part, part, current, out);
        current.pop();
    }
}

/// Every possible perfect-correlation type on `d` outcomes: one signature per
/// integer partition of `d`, ordered by descending counts (`[d]` first, the
/// single `d`-cycle last).
pub fn enumerate_signatures(d: usize) -> Result<Vec<CycleTypeSignature>> {
    if !(1..=MAX_ENUMERATION_DIM).contains(&d) {
        return Err(Error::OutOfRange {
            what: "d",
            value: d,
            min: 1,
            max: MAX_ENUMERATION_DIM,
        });
    }
    let mut parts = Vec::new();
    partitions_into(d, d, &mut Vec::new(), &mut parts);
    let mut sigs: Vec<CycleTypeSignature> = parts
        .into_iter()
        .map(|p| {
            let mut counts = vec![0; d];
            for len in p {
                counts[len - 1] += 1;
            }
            CycleTypeSignature { counts }
        })
        .collect();
    sigs.sort_by(|a, b| b.counts.cmp(&a.counts));
    Ok(sigs)
}
