//! MSB-first bit writer and reader over byte buffers.

#[derive(Clone, Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    /// Bits already used in the last byte, 0 when byte-aligned.
    fill: u8,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bit_len(&self) -> usize {
        if self.fill == 0 {
            self.bytes.len() * 8
        } else {
            (self.bytes.len() - 1) * 8 + self.fill as usize
        }
    }

    pub fn write_bit(&mut self, bit: bool) {
        if self.fill == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> self.fill;
        }
        self.fill = (self.fill + 1) % 8;
    }

    /// Writes the low `n` bits of `value`, most significant first.
    pub fn write_bits(&mut self, value: u64, n: u32) {
        debug_assert!(n <= 64);
        for i in (0..n).rev() {
            self.write_bit((value >> i) & 1 == 1);
        }
    }

    /// `q` one-bits followed by a zero.
    pub fn write_unary(&mut self, q: u64) {
        for _ in 0..q {
            self.write_bit(true);
        }
        self.write_bit(false);
    }

    /// Zero-pads to a byte boundary and returns the buffer.
    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

#[derive(Clone, Debug)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() * 8 - self.pos
    }

    pub fn read_bit(&mut self) -> Option<bool> {
        let byte = *self.bytes.get(self.pos / 8)?;
        let bit = byte & (0x80 >> (self.pos % 8)) != 0;
        self.pos += 1;
        Some(bit)
    }

    pub fn read_bits(&mut self, n: u32) -> Option<u64> {
        if (n as usize) > self.remaining() {
            return None;
        }
        let mut v = 0u64;
        for _ in 0..n {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Some(v)
    }

    /// Counts one-bits up to the terminating zero.
    pub fn read_unary(&mut self) -> Option<u64> {
        let mut q = 0;
        while self.read_bit()? {
            q += 1;
        }
        Some(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn msb_first_packing() {
        let mut w = BitWriter::new();
        w.write_bits(0b101, 3);
        w.write_unary(2);
        assert_eq!(w.bit_len(), 6);
        assert_eq!(w.into_bytes(), vec![0b1011_1000]);
    }

    #[test]
    fn read_back_across_bytes() {
        let mut w = BitWriter::new();
        w.write_bits(0x1ABC, 13);
        w.write_unary(9);
        w.write_bits(3, 2);
        let bytes = w.into_bytes();
        let mut r = BitReader::new(&bytes);
        assert_eq!(r.read_bits(13), Some(0x1ABC));
        assert_eq!(r.read_unary(), Some(9));
        assert_eq!(r.read_bits(2), Some(3));
    }

    #[test]
    fn reading_past_end_is_none() {
        let bytes = [0xFF];
        let mut r = BitReader::new(&bytes);
        assert_eq!(r.read_unary(), None);
        let mut r = BitReader::new(&bytes);
        assert_eq!(r.read_bits(9), None);
    }
}
