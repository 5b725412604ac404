//! Golomb coding of gap-transformed positions.
//!
//! Positions `p_0 < p_1 < ...` become gaps `g_0 = p_0 + 1`,
//! `g_i = p_i - p_{i-1}`, all `>= 1`. Each gap `n` is written as the unary
//! quotient `(n - 1) / M` followed by the remainder `(n - 1) % M` in
//! truncated binary.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use super::bits::{BitReader, BitWriter};
use crate::{Error, Result};

/// Golomb divisor `M >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GolombParam(u32);

impl GolombParam {
    pub fn new(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("golomb divisor must be >= 1".into()));
        }
        Ok(Self(m))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// Code length in bits of one gap `n >= 1`.
    pub fn code_len(self, gap: u64) -> u64 {
        let m = self.0 as u64;
        let v = gap - 1;
        v / m + 1 + truncated_binary_len(v % m, m) as u64
    }
}

/// Smallest `M` with `(1-k)^M · (2-k) <= 1`, the optimal divisor for gaps
/// distributed as `(1-k)^(n-1)·k`.
pub fn golomb_param_for(k: f64) -> Result<GolombParam> {
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::InvalidArgument(format!("density must be in (0, 1), got {k}")));
    }
    let q = 1.0 - k;
    // closed form, then settle on the exact boundary against rounding
    let mut m = ((-(2.0 - k).ln() / q.ln()).ceil().max(1.0)).min(u32::MAX as f64) as u32;
    while m > 1 && q.powf((m - 1) as f64) * (2.0 - k) <= 1.0 {
        m -= 1;
    }
    while q.powf(m as f64) * (2.0 - k) > 1.0 && m < u32::MAX {
        m += 1;
    }
    Ok(GolombParam(m))
}

/// Power-of-two divisor with the shortest expected code for density `k`.
pub fn rice_param_for(k: f64) -> Result<GolombParam> {
    let m = golomb_param_for(k)?.0;
    let lo = if m.is_power_of_two() { m } else { m.next_power_of_two() / 2 };
    let hi = m.next_power_of_two();
    let q = 1.0 - k;
    // E[len] for M = 2^b: 1 + b + q^M / (1 - q^M)
    let expected = |m: u32| {
        let qm = q.powf(m as f64);
        1.0 + m.trailing_zeros() as f64 + qm / (1.0 - qm)
    };
    Ok(GolombParam(if expected(lo) <= expected(hi) { lo } else { hi }))
}

/// Divisor for a tensor with `nnz` of `len` entries kept. Dense or empty
/// tensors use `M = 1`; the result is capped to fit the u16 header field.
pub fn param_for_density(nnz: usize, len: usize, rice: bool) -> GolombParam {
    if nnz == 0 || nnz >= len {
        return GolombParam(1);
    }
    let k = nnz as f64 / len as f64;
    let p = if rice { rice_param_for(k) } else { golomb_param_for(k) }.expect("0 < k < 1");
    if p.0 > u16::MAX as u32 {
        // largest power of two that fits keeps Rice mode valid
        GolombParam(if rice { 1 << 15 } else { u16::MAX as u32 })
    } else {
        p
    }
}

fn truncated_binary_len(r: u64, m: u64) -> u32 {
    if m == 1 {
        return 0;
    }
    let b = 64 - (m - 1).leading_zeros();
    let u = (1u64 << b) - m;
    if r < u {
        b - 1
    } else {
        b
    }
}

fn write_truncated_binary(w: &mut BitWriter, r: u64, m: u64) {
    if m == 1 {
        return;
    }
    let b = 64 - (m - 1).leading_zeros();
    let u = (1u64 << b) - m;
    if r < u {
        w.write_bits(r, b - 1);
    } else {
        w.write_bits(r + u, b);
    }
}

fn read_truncated_binary(r: &mut BitReader<'_>, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let b = 64 - (m - 1).leading_zeros();
    let u = (1u64 << b) - m;
    let head = r.read_bits(b - 1)?;
    if head < u {
        Some(head)
    } else {
        let v = (head << 1) | r.read_bit()? as u64;
        Some(v - u)
    }
}

/// Appends one gap code.
pub fn write_gap(w: &mut BitWriter, gap: u64, m: GolombParam) {
    debug_assert!(gap >= 1);
    let m = m.0 as u64;
    let v = gap - 1;
    w.write_unary(v / m);
    write_truncated_binary(w, v % m, m);
}

pub fn read_gap(r: &mut BitReader<'_>, m: GolombParam) -> Option<u64> {
    let m = m.0 as u64;
    let q = r.read_unary()?;
    let rem = read_truncated_binary(r, m)?;
    Some(q.checked_mul(m)?.checked_add(rem)? + 1)
}

/// Appends the gap codes of `positions` to `w`.
pub fn encode_gaps_into(w: &mut BitWriter, positions: &[u32], m: GolombParam) -> Result<()> {
    let mut prev: Option<u32> = None;
    for (i, &p) in positions.iter().enumerate() {
        let gap = match prev {
            None => p as u64 + 1,
            Some(q) if p > q => (p - q) as u64,
            Some(q) => {
                return Err(Error::ContractViolation(format!(
                    "positions must be strictly increasing: index {i} has {p} after {q}"
                )))
            }
        };
        write_gap(w, gap, m);
        prev = Some(p);
    }
    Ok(())
}

/// Gap-codes `positions` into a fresh bitstream.
pub fn encode_gaps(positions: &[u32], m: GolombParam) -> Result<BitWriter> {
    let mut w = BitWriter::new();
    encode_gaps_into(&mut w, positions, m)?;
    Ok(w)
}

/// Reads `count` gap codes and rebuilds absolute positions. `tensor` only
/// labels errors.
pub fn decode_gaps(
    r: &mut BitReader<'_>,
    count: usize,
    m: GolombParam,
    tensor: u16,
) -> Result<Vec<u32>> {
    let mut out = Vec::with_capacity(count.min(r.remaining()));
    let mut next: u64 = 0;
    for code_index in 0..count {
        let gap = read_gap(r, m).ok_or(Error::CorruptMessage {
            tensor,
            code_index,
            reason: "bitstream ends inside a gap code",
        })?;
        let pos = next + gap - 1;
        let pos = u32::try_from(pos).map_err(|_| Error::CorruptMessage {
            tensor,
            code_index,
            reason: "position overflows u32",
        })?;
        out.push(pos);
        next = pos as u64 + 1;
    }
    Ok(out)
}

/// Average code length per position when gaps follow a geometric
/// distribution with parameter `k`, measured by encoding `samples` draws.
pub fn measure_position_cost(k: f64, samples: usize, seed: u64) -> Result<f64> {
    let m = golomb_param_for(k)?;
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let geo = Geometric::new(k).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = BitWriter::new();
    for _ in 0..samples {
        // Geometric counts failures before the first success; gaps start at 1
        write_gap(&mut w, geo.sample(&mut rng) + 1, m);
    }
    Ok(w.bit_len() as f64 / samples as f64)
}
