//! Approximate running counts of a {-1, 0, 1} stream, compressed into sparse
//! jump events.
//!
//! The encoder keeps a count `C` that only ever moves in jumps of `r`. A jump
//! happens (and is logged) at the first step where the true prefix sum has
//! drifted `r` away from `C`, so `|C(t) - prefix(t)| < r` holds after every
//! step. The decoder rebuilds `C` from the logged jumps alone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::message::{bit_width, BitReader, Message};

pub const EVENT_COUNT_BITS: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    fn sign(self) -> i64 {
        match self {
            Direction::Up => 1,
            Direction::Down => -1,
        }
    }
}

/// A jump of the maintained count at a 1-based stream step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CounterEvent {
    pub step: usize,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterTranscript {
    pub updates: Vec<CounterEvent>,
    pub refinement: u64,
    pub horizon: usize,
}

impl CounterTranscript {
    pub fn step_width(horizon: usize) -> u32 {
        bit_width(horizon as u128)
    }

    /// `32 + events * (ceil(log2(T+1)) + 1)`.
    pub fn encoded_bits(&self) -> usize {
        EVENT_COUNT_BITS as usize + self.updates.len() * (Self::step_width(self.horizon) as usize + 1)
    }

    pub fn encode_into(&self, msg: &mut Message) -> Result<()> {
        let width = Self::step_width(self.horizon);
        if self.updates.len() as u128 >= 1u128 << EVENT_COUNT_BITS {
            return Err(Error::message(format!("{} events overflow the count field", self.updates.len())));
        }
        msg.push_uint(self.updates.len() as u128, EVENT_COUNT_BITS)?;
        for e in &self.updates {
            msg.push_uint(e.step as u128, width)?;
            msg.push_bit(e.direction == Direction::Down);
        }
        Ok(())
    }

    pub fn to_message(&self) -> Result<Message> {
        let mut msg = Message::new();
        self.encode_into(&mut msg)?;
        Ok(msg)
    }

    /// Reads one transcript. `refinement` and `horizon` are public parameters
    /// and are not carried on the wire.
    pub fn decode_from(reader: &mut BitReader<'_>, refinement: u64, horizon: usize) -> Result<Self> {
        let width = Self::step_width(horizon);
        let count = reader.read_uint(EVENT_COUNT_BITS)? as usize;
        if count > horizon {
            return Err(Error::message(format!("{count} events exceed horizon {horizon}")));
        }
        let mut updates = Vec::with_capacity(count);
        for _ in 0..count {
            let step = reader.read_uint(width)? as usize;
            let direction = if reader.read_bit()? { Direction::Down } else { Direction::Up };
            updates.push(CounterEvent { step, direction });
        }
        let t = CounterTranscript {
            updates,
            refinement,
            horizon,
        };
        t.validate().map_err(|e| Error::message(e.to_string()))?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.refinement == 0 {
            return Err(Error::param("refinement r must be a positive integer"));
        }
        let mut prev = 0;
        for e in &self.updates {
            if e.step == 0 || e.step > self.horizon {
                return Err(Error::input(format!("event step {} outside 1..={}", e.step, self.horizon)));
            }
            if e.step <= prev {
                return Err(Error::input(format!("event steps not strictly increasing at {}", e.step)));
            }
            prev = e.step;
        }
        Ok(())
    }
}

/// Online form of the encoder. Feeding symbols one at a time yields the same
/// events and counts as [`approx_count`] on the whole stream.
#[derive(Debug, Clone)]
pub struct ApproxCounter {
    r: i64,
    horizon: usize,
    step: usize,
    prefix: i64,
    count: i64,
    updates: Vec<CounterEvent>,
}

impl ApproxCounter {
    pub fn new(r: u64, horizon: usize) -> Result<Self> {
        if r == 0 || r > i64::MAX as u64 {
            return Err(Error::param(format!("refinement r must be a positive integer, got {r}")));
        }
        Ok(ApproxCounter {
            r: r as i64,
            horizon,
            step: 0,
            prefix: 0,
            count: 0,
            updates: Vec::new(),
        })
    }

    pub fn push(&mut self, symbol: i8) -> Result<()> {
        if !(-1..=1).contains(&symbol) {
            return Err(Error::input(format!("stream symbol {symbol} outside {{-1, 0, 1}}")));
        }
        if self.step == self.horizon {
            return Err(Error::input(format!("stream longer than horizon {}", self.horizon)));
        }
        self.step += 1;
        self.prefix += i64::from(symbol);
        let direction = if self.prefix - self.count >= self.r {
            Direction::Up
        } else if self.count - self.prefix >= self.r {
            Direction::Down
        } else {
            return Ok(());
        };
        self.count += direction.sign() * self.r;
        self.updates.push(CounterEvent {
            step: self.step,
            direction,
        });
        Ok(())
    }

    /// Maintained approximate count after the latest step.
    pub fn count(&self) -> i64 {
        self.count
    }

    pub fn prefix(&self) -> i64 {
        self.prefix
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    pub fn finish(self) -> CounterTranscript {
        CounterTranscript {
            updates: self.updates,
            refinement: self.r as u64,
            horizon: self.horizon,
        }
    }
}

pub fn approx_count(stream: &[i8], r: u64, horizon: usize) -> Result<CounterTranscript> {
    let mut counter = ApproxCounter::new(r, horizon)?;
    for &s in stream {
        counter.push(s)?;
    }
    Ok(counter.finish())
}

/// Counts `C(1), ..., C(T)` reconstructed from the events.
pub fn extract_count(t: &CounterTranscript) -> Result<Vec<i64>> {
    t.validate()?;
    let r = t.refinement as i64;
    let mut counts = Vec::with_capacity(t.horizon);
    let mut events = t.updates.iter().peekable();
    let mut c = 0;
    for p in 1..=t.horizon {
        if let Some(e) = events.next_if(|e| e.step == p) {
            c += e.direction.sign() * r;
        }
        counts.push(c);
    }
    Ok(counts)
}
