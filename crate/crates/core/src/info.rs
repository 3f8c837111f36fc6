//! Plug-in estimators for correlation and information between parties.
//!
//! Entropies are maximum-likelihood (plug-in) estimates in bits with no bias
//! correction. Mutual informations are clamped at zero from below.

use serde::{Deserialize, Serialize};

use crate::distill::{bit_error_rate, BitString, PartyRecord};
use crate::error::{Error, Result};

/// Contingency table over 1 to 3 binary variables. Cell index packs the
/// variables MSB first: for `(A, B, E)`, cell `4a + 2b + e`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointCounts {
    vars: usize,
    counts: Vec<u64>,
}

impl JointCounts {
    pub fn new(vars: usize, counts: Vec<u64>) -> Result<Self> {
        if !(1..=3).contains(&vars) {
            return Err(Error::domain(format!(
                "tables cover 1 to 3 variables, got {vars}"
            )));
        }
        if counts.len() != 1 << vars {
            return Err(Error::domain(format!(
                "{vars} binary variables need {} cells, got {}",
                1 << vars,
                counts.len()
            )));
        }
        Ok(JointCounts { vars, counts })
    }

    /// Tallies aligned bit strings, one per variable.
    pub fn from_bits(strings: &[&BitString]) -> Result<Self> {
        let vars = strings.len();
        let mut counts = vec![0u64; 1 << vars.min(3)];
        if let Some(first) = strings.first() {
            if strings.iter().any(|s| s.len() != first.len()) {
                return Err(Error::domain("bit strings differ in length"));
            }
            for i in 0..first.len() {
                let cell = strings
                    .iter()
                    .fold(0usize, |acc, s| acc << 1 | usize::from(s.0[i]));
                counts[cell] += 1;
            }
        }
        Self::new(vars, counts)
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Table over the variables listed in `keep`, in that order.
    pub fn marginal(&self, keep: &[usize]) -> Result<JointCounts> {
        if keep.is_empty() || keep.iter().any(|&v| v >= self.vars) {
            return Err(Error::domain(format!(
                "invalid marginal {keep:?} of a {}-variable table",
                self.vars
            )));
        }
        let mut out = vec![0u64; 1 << keep.len()];
        for (cell, &c) in self.counts.iter().enumerate() {
            let idx = keep.iter().fold(0usize, |acc, &v| {
                acc << 1 | (cell >> (self.vars - 1 - v) & 1)
            });
            out[idx] += c;
        }
        JointCounts::new(keep.len(), out)
    }

    fn ensure_nonempty(&self) -> Result<()> {
        if self.total() == 0 {
            Err(Error::domain("empty contingency table"))
        } else {
            Ok(())
        }
    }
}

/// Joint Shannon entropy of the table, in bits.
pub fn entropy(counts: &JointCounts) -> Result<f64> {
    counts.ensure_nonempty()?;
    let total = counts.total() as f64;
    Ok(counts
        .counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum())
}

/// `I(X;Y) = H(X) + H(Y) - H(X,Y)` for a two-variable table.
pub fn mutual_information(counts: &JointCounts) -> Result<f64> {
    if counts.vars != 2 {
        return Err(Error::domain(format!(
            "expected a 2-variable table, got {}",
            counts.vars
        )));
    }
    counts.ensure_nonempty()?;
    let hx = entropy(&counts.marginal(&[0])?)?;
    let hy = entropy(&counts.marginal(&[1])?)?;
    Ok((hx + hy - entropy(counts)?).max(0.0))
}

/// `I(A;B|E) = H(A,E) + H(B,E) - H(E) - H(A,B,E)` for an `(A, B, E)` table.
pub fn conditional_mutual_information(counts: &JointCounts) -> Result<f64> {
    if counts.vars != 3 {
        return Err(Error::domain(format!(
            "expected a 3-variable table, got {}",
            counts.vars
        )));
    }
    counts.ensure_nonempty()?;
    let hae = entropy(&counts.marginal(&[0, 2])?)?;
    let hbe = entropy(&counts.marginal(&[1, 2])?)?;
    let he = entropy(&counts.marginal(&[2])?)?;
    Ok((hae + hbe - he - entropy(counts)?).max(0.0))
}

/// Sample Pearson correlation coefficient.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::domain(format!(
            "lengths differ: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::domain("correlation needs at least 2 samples"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "an input has zero variance".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Normalised intensity correlation `<I(t) I(t+lag)> / <I>^2` over the
/// overlapping range, with `<I>` the mean of the whole record.
pub fn g2(intensities: &[f64], lag: usize) -> Result<f64> {
    if intensities.len() <= lag {
        return Err(Error::domain(format!(
            "lag {lag} needs more than {} samples",
            intensities.len()
        )));
    }
    let mean = intensities.iter().sum::<f64>() / intensities.len() as f64;
    if mean <= 0.0 {
        return Err(Error::domain("mean intensity must be positive"));
    }
    let pairs = intensities.len() - lag;
    let cross: f64 = intensities
        .iter()
        .zip(&intensities[lag..])
        .map(|(a, b)| a * b)
        .sum();
    Ok(cross / pairs as f64 / (mean * mean))
}

/// Mutual information of a bivariate Gaussian with correlation `r`.
pub fn gaussian_mi_from_r(r: f64) -> Result<f64> {
    if r.is_nan() || r.abs() >= 1.0 {
        return Err(Error::domain(format!("|r| must be below 1, got {r}")));
    }
    Ok(-0.5 * (1.0 - r * r).log2())
}

/// Secrecy statistics of one scenario run. Field order is the JSON key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub r_ab: f64,
    pub r_be: f64,
    pub r_ae: f64,
    pub i_ab: f64,
    pub i_ae: f64,
    pub i_be: f64,
    pub i_ab_given_e: f64,
    /// Direct reconciliation margin `I(A;B) - I(A;E)`.
    pub delta_dr: f64,
    /// Reverse reconciliation margin `I(A;B) - I(B;E)`.
    pub delta_rr: f64,
    pub ber_ab: f64,
    pub n_bits: usize,
}

/// Assembles the report from aligned records of Alice, Bob and Eve.
pub fn build_report(a: &PartyRecord, b: &PartyRecord, e: &PartyRecord) -> Result<MetricsReport> {
    let n = a.bits.len();
    let lengths = [
        a.amplitudes.len(),
        b.amplitudes.len(),
        e.amplitudes.len(),
        b.bits.len(),
        e.bits.len(),
    ];
    if lengths.iter().any(|&l| l != n) {
        return Err(Error::domain(format!(
            "misaligned records: {n} bits vs {lengths:?}"
        )));
    }
    let joint = JointCounts::from_bits(&[&a.bits, &b.bits, &e.bits])?;
    let i_ab = mutual_information(&joint.marginal(&[0, 1])?)?;
    let i_ae = mutual_information(&joint.marginal(&[0, 2])?)?;
    let i_be = mutual_information(&joint.marginal(&[1, 2])?)?;
    Ok(MetricsReport {
        r_ab: pearson_r(&a.amplitudes, &b.amplitudes)?,
        r_be: pearson_r(&b.amplitudes, &e.amplitudes)?,
        r_ae: pearson_r(&a.amplitudes, &e.amplitudes)?,
        i_ab,
        i_ae,
        i_be,
        i_ab_given_e: conditional_mutual_information(&joint)?,
        delta_dr: i_ab - i_ae,
        delta_rr: i_ab - i_be,
        ber_ab: bit_error_rate(&a.bits, &b.bits)?,
        n_bits: n,
    })
}
