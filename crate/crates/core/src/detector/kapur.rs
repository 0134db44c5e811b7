use crate::error::{Error, Result};

pub const LEVELS: usize = 256;

/// 256-bin histogram of values in `[0, 255]`; bin `i` holds values in `[i, i + 1)`,
/// with 255 included in the last bin.
pub fn histogram(values: &[f64]) -> [u64; LEVELS] {
    let mut hist = [0u64; LEVELS];
    for &v in values {
        let bin = if v >= 0.0 {
            (v as usize).min(LEVELS - 1)
        } else {
            0
        };
        hist[bin] += 1;
    }
    hist
}

/// Shannon entropy (natural log) of the normalized counts `counts / total`.
fn class_entropy(counts: &[u64], total: u64) -> f64 {
    let total = total as f64;
    let mut h = 0.0;
    for &f in counts {
        if f > 0 {
            let q = f as f64 / total;
            h -= q * q.ln();
        }
    }
    h
}

/// Kapur's maximum-entropy threshold level.
///
/// Returns the level `s` in `1..=255` maximizing `H(A) + H(B)`, where `A` is the
/// distribution of bins below `s` and `B` of bins at or above `s`. Levels that
/// leave either class empty are not candidates. Ties resolve to the lowest level.
pub fn kapur_threshold(hist: &[u64; LEVELS]) -> Result<usize> {
    if hist.iter().filter(|&&f| f > 0).count() < 2 {
        return Err(Error::DegenerateHistogram);
    }
    let mut prefix = [0u64; LEVELS + 1];
    for (i, &f) in hist.iter().enumerate() {
        prefix[i + 1] = prefix[i] + f;
    }
    let total = prefix[LEVELS];
    let mut best: Option<(usize, f64)> = None;
    for s in 1..LEVELS {
        let below = prefix[s];
        let above = total - below;
        if below == 0 || above == 0 {
            continue;
        }
        let score = class_entropy(&hist[..s], below) + class_entropy(&hist[s..], above);
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((s, score));
        }
    }
    // Two occupied bins guarantee at least one level splitting them.
    Ok(best.expect("two occupied bins admit a split").0)
}
