//! Exact-length broadcast messages.
//!
//! A [`Message`] is a sequence of bits with no implicit padding; its length is
//! the coordination cost being measured. Integer fields are written least
//! significant bit first. Byte padding only appears when a message is
//! serialized (see [`Message::to_hex`]).

use std::fmt;

use bitvec::prelude::*;

use crate::error::{Error, Result};

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Message {
    bits: BitVec<u8, Lsb0>,
}

impl Message {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        Message {
            bits: bits.into_iter().collect(),
        }
    }

    /// Number of bits. This is the protocol's coordination cost.
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().by_vals()
    }

    pub fn push_bit(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    /// Appends `value` as a `width`-bit field, least significant bit first.
    pub fn push_uint(&mut self, value: u128, width: u32) -> Result<()> {
        if width > 128 {
            return Err(Error::message(format!("field width {width} exceeds 128 bits")));
        }
        if width < 128 && value >> width != 0 {
            return Err(Error::message(format!(
                "value {value} does not fit in {width} bits"
            )));
        }
        for b in 0..width {
            self.bits.push((value >> b) & 1 == 1);
        }
        Ok(())
    }

    pub fn extend(&mut self, other: &Message) {
        self.bits.extend_from_bitslice(&other.bits);
    }

    pub fn reader(&self) -> BitReader<'_> {
        BitReader { msg: self, pos: 0 }
    }

    /// Hex form used by candidate-space files. A single `1` bit is appended
    /// and the result zero-padded to a byte boundary, so the exact bit length
    /// survives the round trip.
    pub fn to_hex(&self) -> String {
        let mut bits = self.bits.clone();
        bits.push(true);
        bits.set_uninitialized(false);
        hex::encode(bits.as_raw_slice())
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let bytes = hex::decode(s.trim()).map_err(|e| Error::message(format!("bad hex: {e}")))?;
        let mut bits: BitVec<u8, Lsb0> = BitVec::from_vec(bytes);
        match bits.last_one() {
            Some(end) => {
                bits.truncate(end);
                Ok(Message { bits })
            }
            None => Err(Error::message("hex message lacks its terminator bit")),
        }
    }
}

impl fmt::Debug for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Message[{}](", self.len())?;
        for b in self.bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        f.write_str(")")
    }
}

/// Exact bit count of a message.
pub fn message_bits(m: &Message) -> usize {
    m.len()
}

/// Smallest width that can hold every value in `0..=max_value`, i.e.
/// ceil(log2(max_value + 1)).
pub fn bit_width(max_value: u128) -> u32 {
    128 - max_value.leading_zeros()
}

/// Sequential field reader over a [`Message`].
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    msg: &'a Message,
    pos: usize,
}

impl BitReader<'_> {
    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.msg.len() - self.pos
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        let bit = self
            .msg
            .bits
            .get(self.pos)
            .map(|b| *b)
            .ok_or_else(|| Error::message(format!("read past end at bit {}", self.pos)))?;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_uint(&mut self, width: u32) -> Result<u128> {
        if width > 128 {
            return Err(Error::message(format!("field width {width} exceeds 128 bits")));
        }
        if self.remaining() < width as usize {
            return Err(Error::message(format!(
                "need {width} bits at offset {}, only {} remain",
                self.pos,
                self.remaining()
            )));
        }
        let mut value = 0u128;
        for b in 0..width {
            if self.read_bit()? {
                value |= 1 << b;
            }
        }
        Ok(value)
    }

    /// Fails unless every bit has been consumed.
    pub fn finish(self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::message(format!(
                "{} trailing bits after payload",
                self.remaining()
            )));
        }
        Ok(())
    }
}
