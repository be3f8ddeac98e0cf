//! Joint differential privacy by choosing the broadcast message with the
//! exponential mechanism over a finite candidate space.
//!
//! A candidate's quality is the expected objective of the actions every agent
//! would decode from it. Changing one agent's data moves that expectation by
//! at most the declared sensitivity, so the selection is `epsilon`-DP and each
//! agent's own decode then makes the whole profile jointly private.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex::instance::MatchingInstance;
use crate::convex::program::FractionalAssignment;
use crate::convex::rec::RecProtocol;
use crate::convex::rec::{encode_multiples, RecPublic};
use crate::convex::welfare::{capped_welfare, expected_capped_welfare, independent_rounding, lp_opt};
use crate::error::{Error, Result};
use crate::message::Message;
use crate::protocol::{approximation_ratio, Protocol, ProtocolReport};
use crate::rng::{coordinator_rng, derive_seed, ProtocolRng};

/// Absolute slack allowed on log-probability ratios.
pub const DP_SLACK: f64 = 1e-9;
/// `n * k` up to which expected quality is computed exactly.
pub const EXACT_QUALITY_LIMIT: usize = 10_000;
pub const MONTE_CARLO_DRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateMessageSpace {
    messages: Vec<Message>,
    pub provenance: String,
}

impl CandidateMessageSpace {
    /// Keeps the first occurrence of each message, in order.
    pub fn new(messages: Vec<Message>, provenance: impl Into<String>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let messages: Vec<Message> = messages.into_iter().filter(|m| seen.insert(m.clone())).collect();
        if messages.is_empty() {
            return Err(Error::input("candidate message space is empty"));
        }
        Ok(CandidateMessageSpace {
            messages,
            provenance: provenance.into(),
        })
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// JSON array of hex strings (see [`Message::to_hex`]).
    pub fn to_json(&self) -> Result<String> {
        let hex: Vec<String> = self.messages.iter().map(Message::to_hex).collect();
        Ok(serde_json::to_string_pretty(&hex)?)
    }

    pub fn from_json(s: &str, provenance: impl Into<String>) -> Result<Self> {
        let hex: Vec<String> = serde_json::from_str(s)?;
        let messages = hex.iter().map(|h| Message::from_hex(h)).collect::<Result<Vec<_>>>()?;
        Self::new(messages, provenance)
    }
}

/// Price messages on a grid: coordinate `j` takes `levels[j]` evenly spaced
/// values from 0 to `max_price` (a single level means price 0), rounded to
/// the protocol's grid step.
pub fn price_grid_candidates(levels: &[usize], max_price: f64, step: f64) -> Result<CandidateMessageSpace> {
    if levels.is_empty() || levels.contains(&0) {
        return Err(Error::param("every coordinate needs at least one level"));
    }
    if !(max_price >= 0.0) || !(step > 0.0) {
        return Err(Error::param("max price must be >= 0 and step > 0"));
    }
    let per_coord: Vec<Vec<u128>> = levels
        .iter()
        .map(|&l| {
            (0..l)
                .map(|v| {
                    let price = if l == 1 { 0.0 } else { max_price * v as f64 / (l - 1) as f64 };
                    (price / step).round() as u128
                })
                .collect()
        })
        .collect();
    let mut messages = Vec::new();
    let mut idx = vec![0usize; levels.len()];
    loop {
        let multiples: Vec<u128> = idx.iter().zip(&per_coord).map(|(&i, vals)| vals[i]).collect();
        messages.push(encode_multiples(&multiples)?);
        let Some(pos) = (0..levels.len()).rev().find(|&p| idx[p] + 1 < levels[p]) else {
            break;
        };
        idx[pos] += 1;
        idx[pos + 1..].fill(0);
    }
    CandidateMessageSpace::new(messages, format!("price grid {levels:?} up to {max_price}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityTable {
    pub values: Vec<f64>,
    pub sensitivity: f64,
}

impl QualityTable {
    pub fn new(values: Vec<f64>, sensitivity: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::input("quality table is empty"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::input(format!("quality {v} is not finite")));
        }
        if !(sensitivity > 0.0 && sensitivity <= 1.0) {
            return Err(Error::param(format!("sensitivity must lie in (0, 1], got {sensitivity}")));
        }
        Ok(QualityTable { values, sensitivity })
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Exact selection distribution `p_r ~ exp(epsilon q_r / (2 Delta))`,
/// computed in log space after subtracting the maximum exponent.
pub fn selection_probabilities(q: &QualityTable, epsilon: f64) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::param(format!("epsilon must be > 0, got {epsilon}")));
    }
    let scale = epsilon / (2.0 * q.sensitivity);
    let top = q.max() * scale;
    let weights: Vec<f64> = q.values.iter().map(|v| (v * scale - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub probabilities: Vec<f64>,
}

/// Samples one candidate by inverse CDF.
pub fn exponential_mechanism(q: &QualityTable, epsilon: f64, rng: &mut ProtocolRng) -> Result<Selection> {
    let probabilities = selection_probabilities(q, epsilon)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let last = probabilities.len() - 1;
    let index = probabilities
        .iter()
        .position(|&p| {
            acc += p;
            u < acc
        })
        .unwrap_or(last);
    Ok(Selection { index, probabilities })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QualityEstimate {
    pub value: f64,
    /// Standard error when the value is a Monte Carlo mean.
    pub std_error: Option<f64>,
}

/// Expected objective of the profile decoded from a candidate message.
pub trait QualityOracle: Sync {
    fn quality(&self, msg: &Message) -> Result<QualityEstimate>;
    /// Declared sensitivity of the quality to one agent's data.
    fn sensitivity(&self) -> f64 {
        1.0
    }
}

/// Quality of a price message for many-to-one matching: expected capped
/// welfare after each player decodes its regularized row and rounds it.
pub struct MatchingQuality<'a> {
    pub instance: &'a MatchingInstance,
    pub protocol: &'a RecProtocol,
    /// Seed for the Monte Carlo draws used beyond the exact regime.
    pub mc_seed: u64,
}

impl MatchingQuality<'_> {
    fn public(&self) -> RecPublic {
        self.protocol.public(self.instance)
    }

    pub fn decoded_rows(&self, msg: &Message) -> Result<FractionalAssignment> {
        let public = self.public();
        let rows = (0..self.instance.n())
            .map(|i| {
                self.protocol
                    .decode_row(&public, self.instance.row(i), msg)
                    .map_err(|e| Error::Decode {
                        agent: i,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        FractionalAssignment::new(rows)
    }
}

impl QualityOracle for MatchingQuality<'_> {
    fn quality(&self, msg: &Message) -> Result<QualityEstimate> {
        let x = self.decoded_rows(msg)?;
        if self.instance.n() * self.instance.k() <= EXACT_QUALITY_LIMIT {
            return Ok(QualityEstimate {
                value: expected_capped_welfare(&x, self.instance),
                std_error: None,
            });
        }
        let draws = (0..MONTE_CARLO_DRAWS)
            .map(|d| {
                let actions = independent_rounding(&x, derive_seed(self.mc_seed, d as u64))?;
                Ok(capped_welfare(&actions, self.instance)?.welfare as f64)
            })
            .collect::<Result<Vec<f64>>>()?;
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        let se = (var / draws.len() as f64).sqrt();
        log::info!("Monte Carlo quality {mean:.4} (std error {se:.4})");
        Ok(QualityEstimate {
            value: mean,
            std_error: Some(se),
        })
    }
}

/// Quality of every candidate, evaluated in parallel.
pub fn quality_table<O: QualityOracle>(oracle: &O, candidates: &CandidateMessageSpace) -> Result<(QualityTable, Vec<QualityEstimate>)> {
    let estimates = candidates
        .messages()
        .par_iter()
        .map(|m| oracle.quality(m))
        .collect::<Result<Vec<_>>>()?;
    let table = QualityTable::new(estimates.iter().map(|e| e.value).collect(), oracle.sensitivity())?;
    Ok((table, estimates))
}

#[derive(Debug, Clone)]
pub struct PrivateSelection {
    pub message: Message,
    pub selection: Selection,
    pub table: QualityTable,
    pub estimates: Vec<QualityEstimate>,
}

/// Builds the quality table and selects a message on the coordinator stream
/// of `seed`.
pub fn pri_coor<O: QualityOracle>(
    oracle: &O,
    candidates: &CandidateMessageSpace,
    epsilon: f64,
    seed: u64,
) -> Result<PrivateSelection> {
    let (table, estimates) = quality_table(oracle, candidates)?;
    let selection = exponential_mechanism(&table, epsilon, &mut coordinator_rng(seed))?;
    Ok(PrivateSelection {
        message: candidates.messages()[selection.index].clone(),
        selection,
        table,
        estimates,
    })
}

#[derive(Debug, Clone)]
pub struct PrivateMatchingRun {
    pub selected: PrivateSelection,
    pub actions: Vec<Option<usize>>,
    pub report: ProtocolReport,
}

/// Private coordination for matching: select a price message, then every
/// player decodes and rounds on its own stream.
pub fn pri_coor_matching(
    inst: &MatchingInstance,
    protocol: &RecProtocol,
    candidates: &CandidateMessageSpace,
    epsilon: f64,
    seed: u64,
) -> Result<PrivateMatchingRun> {
    let start = Instant::now();
    let oracle = MatchingQuality {
        instance: inst,
        protocol,
        mc_seed: derive_seed(seed, 1 << 62),
    };
    let selected = pri_coor(&oracle, candidates, epsilon, seed)?;
    let actions = crate::protocol::decode_all(protocol, inst, &selected.message, seed)?;
    let objective = capped_welfare(&actions, inst)?.welfare as f64;
    let opt = Some(lp_opt(inst).value as f64);
    let report = ProtocolReport {
        protocol: "pri-coor".to_string(),
        n: inst.n(),
        k_or_m: inst.k(),
        seed,
        message_bits: selected.message.len(),
        objective,
        opt,
        ratio: approximation_ratio(objective, opt),
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok(PrivateMatchingRun {
        selected,
        actions,
        report,
    })
}

/// `max_r |log(p_r / q_r)|`; infinite if exactly one side is zero.
pub fn max_log_ratio(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| match (a > 0.0, b > 0.0) {
            (true, true) => (a.ln() - b.ln()).abs(),
            (false, false) => 0.0,
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpReport {
    pub max_log_ratio: f64,
    /// Largest quality change across a neighboring pair.
    pub empirical_sensitivity: f64,
    pub worst_pair: Option<(usize, usize)>,
    pub holds: bool,
}

/// Exact selection distributions on every declared neighboring pair of a
/// matching family. Each pair must differ in at most one player's row.
pub fn verify_dp(
    instances: &[MatchingInstance],
    neighbors: &[(usize, usize)],
    protocol: &RecProtocol,
    candidates: &CandidateMessageSpace,
    epsilon: f64,
) -> Result<DpReport> {
    for &(a, b) in neighbors {
        let (x, y) = (
            instances.get(a).ok_or_else(|| Error::input(format!("no instance {a}")))?,
            instances.get(b).ok_or_else(|| Error::input(format!("no instance {b}")))?,
        );
        match x.differing_players(y) {
            Some(d) if d <= 1 => {}
            _ => return Err(Error::input(format!("instances {a} and {b} are not neighbors"))),
        }
        if x.n() * x.k() > EXACT_QUALITY_LIMIT {
            return Err(Error::param("exact DP verification needs n * k <= 10^4"));
        }
    }
    let tables = instances
        .iter()
        .map(|inst| {
            let oracle = MatchingQuality {
                instance: inst,
                protocol,
                mc_seed: 0,
            };
            let (table, _) = quality_table(&oracle, candidates)?;
            let p = selection_probabilities(&table, epsilon)?;
            Ok((table, p))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = DpReport {
        max_log_ratio: 0.0,
        empirical_sensitivity: 0.0,
        worst_pair: None,
        holds: true,
    };
    for &(a, b) in neighbors {
        let ratio = max_log_ratio(&tables[a].1, &tables[b].1);
        let sens = tables[a]
            .0
            .values
            .iter()
            .zip(&tables[b].0.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        report.empirical_sensitivity = report.empirical_sensitivity.max(sens);
        if ratio > report.max_log_ratio || report.worst_pair.is_none() {
            report.max_log_ratio = report.max_log_ratio.max(ratio);
            report.worst_pair = Some((a, b));
        }
    }
    report.holds = report.max_log_ratio <= epsilon + DP_SLACK;
    Ok(report)
}

/// Probability mass on candidates whose quality is within `gap` of the best.
pub fn mass_within(table: &QualityTable, probabilities: &[f64], gap: f64) -> f64 {
    let floor = table.max() - gap;
    table
        .values
        .iter()
        .zip(probabilities)
        .filter(|(q, _)| **q >= floor)
        .map(|(_, p)| p)
        .sum()
}

/// `2 (log2 |R| + ln(1/beta)) / epsilon`.
pub fn utility_gap(candidates: usize, beta: f64, epsilon: f64) -> f64 {
    2.0 * ((candidates as f64).log2() + (1.0 / beta).ln()) / epsilon
}
