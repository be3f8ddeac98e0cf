//! MULTIPLE-INDEX instances and simple one-way baselines.
//!
//! Alice holds `t` disjoint `k`-sets with one marked element each; Bob holds
//! an index `j` and the set `S_j` and must name the marked element of `S_j`
//! after one message from Alice.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::message::{bit_width, Message};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MultipleIndexInstance {
    /// `t` disjoint sets over items `0..t*k`.
    pub sets: Vec<Vec<usize>>,
    pub marked: Vec<usize>,
    pub query: usize,
}

pub fn gen_multiple_index(t: usize, k: usize, seed: u64) -> Result<MultipleIndexInstance> {
    if t == 0 || k == 0 {
        return Err(Error::param("t and k must be at least 1"));
    }
    let mut rng = seeded(seed);
    let mut items: Vec<usize> = (0..t * k).collect();
    items.shuffle(&mut rng);
    let sets: Vec<Vec<usize>> = items.chunks(k).map(<[usize]>::to_vec).collect();
    let marked = sets.iter().map(|s| s[rng.random_range(0..k)]).collect();
    let query = rng.random_range(0..t);
    Ok(MultipleIndexInstance { sets, marked, query })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Baseline {
    /// Empty message; Bob guesses uniformly in `S_j`.
    RandomGuess,
    /// Position of every marked element, `ceil(log2 k)` bits each.
    FullBroadcast,
    /// Positions for as many leading sets as fit in the budget; Bob guesses
    /// for the rest.
    Prefix { bits: usize },
}

impl Baseline {
    fn field(k: usize) -> u32 {
        bit_width(k.saturating_sub(1) as u128)
    }

    pub fn encode(&self, inst: &MultipleIndexInstance) -> Result<Message> {
        let k = inst.sets[0].len();
        let w = Self::field(k);
        let covered = match *self {
            Baseline::RandomGuess => 0,
            Baseline::FullBroadcast => inst.sets.len(),
            Baseline::Prefix { bits } if w == 0 => inst.sets.len().min(bits),
            Baseline::Prefix { bits } => inst.sets.len().min(bits / w as usize),
        };
        let mut msg = Message::new();
        for (s, &u) in inst.sets.iter().zip(&inst.marked).take(covered) {
            let pos = s.iter().position(|&x| x == u).expect("marked element is in its set");
            msg.push_uint(pos as u128, w)?;
        }
        Ok(msg)
    }

    /// Bob's answer from the message, his query and his set.
    pub fn decode(&self, msg: &Message, query: usize, set: &[usize], rng: &mut impl Rng) -> Result<usize> {
        let w = Self::field(set.len());
        let covered = if w == 0 {
            usize::MAX
        } else {
            msg.len() / w as usize
        };
        if *self != Baseline::RandomGuess && query < covered {
            let mut r = msg.reader();
            for _ in 0..query {
                r.read_uint(w)?;
            }
            let pos = r.read_uint(w)? as usize;
            return set
                .get(pos)
                .copied()
                .ok_or_else(|| Error::message(format!("position {pos} outside a set of {}", set.len())));
        }
        Ok(set[rng.random_range(0..set.len())])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuccessRate {
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    pub std_error: f64,
    pub message_bits: usize,
}

/// Runs a baseline on `trials` fresh instances (seeds `seed..seed+trials`).
pub fn success_rate(baseline: Baseline, t: usize, k: usize, trials: usize, seed: u64) -> Result<SuccessRate> {
    let mut successes = 0;
    let mut bits = 0;
    let mut bob = seeded(seed ^ 0x9e37_79b9_7f4a_7c15);
    for s in 0..trials as u64 {
        let inst = gen_multiple_index(t, k, seed.wrapping_add(s))?;
        let msg = baseline.encode(&inst)?;
        bits = bits.max(msg.len());
        let answer = baseline.decode(&msg, inst.query, &inst.sets[inst.query], &mut bob)?;
        successes += usize::from(answer == inst.marked[inst.query]);
    }
    let rate = successes as f64 / trials.max(1) as f64;
    Ok(SuccessRate {
        trials,
        successes,
        rate,
        std_error: (rate * (1.0 - rate) / trials.max(1) as f64).sqrt(),
        message_bits: bits,
    })
}
