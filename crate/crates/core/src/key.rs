//! Canonical byte keys for group elements.
//!
//! Every element serializes to a unique byte string for its backend; balls,
//! caches and all deterministic tie-breaks order elements by `(word norm,
//! key)` with keys compared lexicographically. Integers use minimal-length
//! big-endian two's complement, each field length-prefixed so concatenation
//! stays unambiguous.

use num_bigint::BigInt;

/// Appends one signed integer as `len:u8` + minimal two's-complement bytes.
pub fn push_i64(buf: &mut Vec<u8>, v: i64) {
    let bytes = v.to_be_bytes();
    let mut start = 0;
    while start < 7 {
        let b = bytes[start];
        let next = bytes[start + 1];
        let redundant = (b == 0x00 && next < 0x80) || (b == 0xFF && next >= 0x80);
        if redundant {
            start += 1;
        } else {
            break;
        }
    }
    buf.push((8 - start) as u8);
    buf.extend_from_slice(&bytes[start..]);
}

/// Appends one big integer in the same format as [`push_i64`].
pub fn push_bigint(buf: &mut Vec<u8>, v: &BigInt) {
    let bytes = v.to_signed_bytes_be();
    debug_assert!(bytes.len() <= 255, "element coordinate exceeds key width");
    buf.push(bytes.len() as u8);
    buf.extend_from_slice(&bytes);
}

/// Appends an unsigned count as 4 big-endian bytes (for variable-arity parts).
pub fn push_count(buf: &mut Vec<u8>, n: usize) {
    buf.extend_from_slice(&(n as u32).to_be_bytes());
}

pub struct KeyReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> KeyReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        KeyReader { bytes, pos: 0 }
    }

    pub fn read_i64(&mut self) -> Option<i64> {
        let big = self.read_bigint()?;
        i64::try_from(&big).ok()
    }

    pub fn read_bigint(&mut self) -> Option<BigInt> {
        let len = *self.bytes.get(self.pos)? as usize;
        self.pos += 1;
        if self.pos + len > self.bytes.len() || len == 0 {
            return None;
        }
        let out = BigInt::from_signed_bytes_be(&self.bytes[self.pos..self.pos + len]);
        self.pos += len;
        Some(out)
    }

    pub fn read_count(&mut self) -> Option<usize> {
        if self.pos + 4 > self.bytes.len() {
            return None;
        }
        let mut b = [0u8; 4];
        b.copy_from_slice(&self.bytes[self.pos..self.pos + 4]);
        self.pos += 4;
        Some(u32::from_be_bytes(b) as usize)
    }

    pub fn finished(&self) -> bool {
        self.pos == self.bytes.len()
    }
}
