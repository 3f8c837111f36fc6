//! From quadratures to bits.

use rand::Rng;

use crate::error::{Error, Result};
use crate::optics::QuadraturePair;

/// A string of key bits.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitString(pub Vec<bool>);

impl BitString {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Bits packed MSB-first, zero padded to a whole byte.
    pub fn to_packed(&self) -> Vec<u8> {
        self.0
            .chunks(8)
            .map(|chunk| {
                chunk
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (k, &b)| acc | (u8::from(b) << (7 - k)))
            })
            .collect()
    }

    pub fn from_packed(bytes: &[u8], len: usize) -> Result<Self> {
        if len > bytes.len() * 8 {
            return Err(Error::domain(format!(
                "{len} bits requested from {} bytes",
                bytes.len()
            )));
        }
        Ok(BitString(
            (0..len)
                .map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0)
                .collect(),
        ))
    }

    /// One `0`/`1` character per line.
    pub fn to_text_lines(&self) -> String {
        let mut s = String::with_capacity(2 * self.len());
        for &b in &self.0 {
            s.push(if b { '1' } else { '0' });
            s.push('\n');
        }
        s
    }
}

impl From<Vec<bool>> for BitString {
    fn from(bits: Vec<bool>) -> Self {
        BitString(bits)
    }
}

/// One party's aligned measurement record.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PartyRecord {
    /// Derotated heterodyne outcomes.
    pub quadratures: Vec<QuadraturePair>,
    pub amplitudes: Vec<f64>,
    pub bits: BitString,
}

impl PartyRecord {
    /// Computes amplitudes and median-sliced bits from `quadratures`.
    pub fn from_quadratures(quadratures: Vec<QuadraturePair>) -> Result<Self> {
        let amplitudes: Vec<f64> = quadratures.iter().map(|&q| amplitude(q)).collect();
        let bits = median_slice(&amplitudes)?;
        Ok(PartyRecord {
            quadratures,
            amplitudes,
            bits,
        })
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }
}

/// `z = sqrt(x^2 + p^2)`.
pub fn amplitude(q: QuadraturePair) -> f64 {
    q.x.hypot(q.p)
}

/// Lower-middle order statistic.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("median of an empty sequence"));
    }
    let mut scratch = values.to_vec();
    let k = (scratch.len() - 1) / 2;
    let (_, m, _) = scratch.select_nth_unstable_by(k, f64::total_cmp);
    Ok(*m)
}

/// Bit `i` is 1 iff `zs[i]` lies strictly above the median of `zs`.
pub fn median_slice(zs: &[f64]) -> Result<BitString> {
    if zs.len() < 2 {
        return Err(Error::domain(format!(
            "slicing needs at least 2 values, got {}",
            zs.len()
        )));
    }
    let m = median(zs)?;
    Ok(BitString(zs.iter().map(|&z| z > m).collect()))
}

pub fn bit_error_rate(a: &BitString, b: &BitString) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::domain(format!(
            "bit strings differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::domain("bit error rate of empty strings"));
    }
    let errors = a.0.iter().zip(&b.0).filter(|(x, y)| x != y).count();
    Ok(errors as f64 / a.len() as f64)
}

/// Public messages of one repetition-code distillation pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DistillationTranscript {
    pub block: usize,
    /// Alice's block XOR her repeated secret bit, one entry per full block.
    pub published: Vec<Vec<bool>>,
    /// Bob's accept/reject decision per block.
    pub accepted: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Distilled {
    pub a_kept: BitString,
    pub b_kept: BitString,
    pub kept_fraction: f64,
    pub transcript: DistillationTranscript,
}

/// Repetition-code advantage distillation.
///
/// For each full block Alice draws a fresh bit `r` and publishes her block
/// XOR `(r, .., r)`. Bob XORs the message with his own block; he accepts iff
/// the result is constant, and that constant is his estimate of `r`. A
/// trailing partial block is discarded.
pub fn advantage_distill<R: Rng + ?Sized>(
    a: &BitString,
    b: &BitString,
    block: usize,
    rng: &mut R,
) -> Result<Distilled> {
    if a.len() != b.len() {
        return Err(Error::domain(format!(
            "bit strings differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if block < 2 {
        return Err(Error::domain(format!(
            "block size must be >= 2, got {block}"
        )));
    }
    let blocks = a.len() / block;
    let mut a_kept = Vec::new();
    let mut b_kept = Vec::new();
    let mut published = Vec::with_capacity(blocks);
    let mut accepted = Vec::with_capacity(blocks);
    for (ab, bb) in a.0.chunks_exact(block).zip(b.0.chunks_exact(block)) {
        let r: bool = rng.random();
        let msg: Vec<bool> = ab.iter().map(|&x| x ^ r).collect();
        let first = msg[0] ^ bb[0];
        let ok = msg.iter().zip(bb).all(|(&m, &y)| (m ^ y) == first);
        if ok {
            a_kept.push(r);
            b_kept.push(first);
        }
        published.push(msg);
        accepted.push(ok);
    }
    let kept = a_kept.len();
    Ok(Distilled {
        a_kept: BitString(a_kept),
        b_kept: BitString(b_kept),
        kept_fraction: if blocks == 0 {
            0.0
        } else {
            kept as f64 / blocks as f64
        },
        transcript: DistillationTranscript {
            block,
            published,
            accepted,
        },
    })
}

/// An eavesdropper's guess of Alice's kept bits: on each block Bob accepted,
/// the majority of her own block XOR the public message (ties resolved by the
/// first bit).
pub fn eavesdropper_decode(
    e: &BitString,
    transcript: &DistillationTranscript,
) -> Result<BitString> {
    let block = transcript.block;
    if e.len() / block != transcript.published.len() {
        return Err(Error::domain(format!(
            "{} bits do not cover {} blocks of {block}",
            e.len(),
            transcript.published.len()
        )));
    }
    let mut out = Vec::new();
    for ((eb, msg), &ok) in
        e.0.chunks_exact(block)
            .zip(&transcript.published)
            .zip(&transcript.accepted)
    {
        if !ok {
            continue;
        }
        let ones = eb.iter().zip(msg).filter(|(&x, &m)| x ^ m).count();
        let guess = match (2 * ones).cmp(&block) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => eb[0] ^ msg[0],
        };
        out.push(guess);
    }
    Ok(BitString(out))
}
