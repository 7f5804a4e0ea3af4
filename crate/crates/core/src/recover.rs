//! Client-side post-processing: undoing the output mask, aggregating
//! counts, and comparing distributions.
//!
//! Outcomes are `u64` masks with bit `q` holding qubit `q`. As text they are
//! rendered most-significant qubit first, so qubit 0 is the rightmost
//! character.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitmap::OutputBitmap;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecoverError {
    #[error("{raw} raw shots but {rows} output-bitmap rows")]
    ShotCountMismatch { raw: usize, rows: usize },
    #[error("bitstring width {found} does not match {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("no shots")]
    NoShots,
    #[error("invalid bitstring `{0}`")]
    BadBitstring(String),
    #[error("width {0} exceeds 64 bits")]
    TooWide(usize),
    #[error("csv: {0}")]
    Csv(String),
}

pub fn format_bitstring(outcome: u64, width: usize) -> String {
    (0..width).rev().map(|q| if outcome >> q & 1 == 1 { '1' } else { '0' }).collect()
}

pub fn parse_bitstring(s: &str) -> Result<u64, RecoverError> {
    if s.len() > 64 {
        return Err(RecoverError::TooWide(s.len()));
    }
    s.chars().try_fold(0u64, |acc, ch| match ch {
        '0' => Ok(acc << 1),
        '1' => Ok(acc << 1 | 1),
        _ => Err(RecoverError::BadBitstring(s.to_string())),
    })
}

/// Probability distribution over fixed-width outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    width: usize,
    probs: BTreeMap<u64, f64>,
}

impl Distribution {
    pub fn new(width: usize) -> Self {
        Distribution { width, probs: BTreeMap::new() }
    }

    /// Builds from `(outcome, probability)` pairs, summing duplicates and
    /// dropping exact zeros.
    pub fn from_pairs(width: usize, pairs: impl IntoIterator<Item = (u64, f64)>) -> Self {
        let mut d = Distribution::new(width);
        for (k, p) in pairs {
            d.add(k, p);
        }
        d
    }

    pub fn add(&mut self, outcome: u64, p: f64) {
        if p != 0.0 {
            *self.probs.entry(outcome).or_insert(0.0) += p;
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, outcome: u64) -> f64 {
        self.probs.get(&outcome).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.probs.iter().map(|(&k, &p)| (k, p))
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn support_len(&self) -> usize {
        self.probs.len()
    }

    /// Relabels every outcome `x` as `x ^ mask`.
    pub fn xor_shift(&self, mask: u64) -> Distribution {
        Distribution::from_pairs(self.width, self.iter().map(|(k, p)| (k ^ mask, p)))
    }

    /// Mixes `other` in with weight `w`.
    pub fn accumulate(&mut self, other: &Distribution, w: f64) {
        for (k, p) in other.iter() {
            self.add(k, w * p);
        }
    }

    /// Bitstring-keyed view.
    pub fn to_strings(&self) -> BTreeMap<String, f64> {
        self.iter().map(|(k, p)| (format_bitstring(k, self.width), p)).collect()
    }
}

/// XORs each raw shot with its output-bitmap row.
pub fn recover_shots(raw: &[u64], output: &OutputBitmap) -> Result<Vec<u64>, RecoverError> {
    if raw.len() != output.shots() {
        return Err(RecoverError::ShotCountMismatch { raw: raw.len(), rows: output.shots() });
    }
    Ok(raw.iter().enumerate().map(|(i, &r)| r ^ output.row_mask(i)).collect())
}

/// String form of [`recover_shots`]; every bitstring must be as wide as the
/// output bitmap.
pub fn recover_bitstrings(raw: &[String], output: &OutputBitmap) -> Result<Vec<String>, RecoverError> {
    let width = output.n_qubits();
    let parsed = raw
        .iter()
        .map(|s| {
            if s.len() != width {
                return Err(RecoverError::WidthMismatch { expected: width, found: s.len() });
            }
            parse_bitstring(s)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(recover_shots(&parsed, output)?.into_iter().map(|x| format_bitstring(x, width)).collect())
}

pub fn counts_to_distribution(shots: &[u64], width: usize) -> Result<Distribution, RecoverError> {
    if shots.is_empty() {
        return Err(RecoverError::NoShots);
    }
    let w = 1.0 / shots.len() as f64;
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for &s in shots {
        *counts.entry(s).or_default() += 1;
    }
    Ok(Distribution::from_pairs(width, counts.into_iter().map(|(k, c)| (k, c as f64 * w))))
}

/// Half the L1 distance over the union of both supports.
pub fn variational_distance(p: &Distribution, q: &Distribution) -> Result<f64, RecoverError> {
    if p.width != q.width {
        return Err(RecoverError::WidthMismatch { expected: p.width, found: q.width });
    }
    let mut sum = 0.0;
    for (k, pk) in p.iter() {
        sum += (pk - q.get(k)).abs();
    }
    for (k, qk) in q.iter() {
        if !p.probs.contains_key(&k) {
            sum += qk;
        }
    }
    Ok(0.5 * sum)
}

/// One line of a VD report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VdRecord {
    pub benchmark: String,
    pub level: String,
    pub randomize_output: bool,
    pub epsilon: f64,
    pub vd: f64,
}

pub fn write_vd_csv(records: &[VdRecord], out: impl Write) -> Result<(), RecoverError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(|e| RecoverError::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| RecoverError::Csv(e.to_string()))
}

/// Writes `bitstring,count,probability` rows, most frequent first.
pub fn write_counts_csv(shots: &[u64], width: usize, out: impl Write) -> Result<(), RecoverError> {
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for &s in shots {
        *counts.entry(s).or_default() += 1;
    }
    let mut rows: Vec<(u64, usize)> = counts.into_iter().collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| RecoverError::Csv(e.to_string());
    w.write_record(["bitstring", "count", "probability"]).map_err(csv_err)?;
    for (k, c) in rows {
        let p = c as f64 / shots.len().max(1) as f64;
        w.write_record([format_bitstring(k, width), c.to_string(), p.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| RecoverError::Csv(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(width: usize, pairs: &[(&str, f64)]) -> Distribution {
        Distribution::from_pairs(width, pairs.iter().map(|(s, p)| (parse_bitstring(s).unwrap(), *p)))
    }

    #[test]
    fn bitstring_order_puts_qubit_zero_last() {
        assert_eq!(format_bitstring(0b001, 3), "001");
        assert_eq!(format_bitstring(0b110, 3), "110");
        assert_eq!(parse_bitstring("100").unwrap(), 4);
        assert!(parse_bitstring("10a").is_err());
    }

    #[test]
    fn xor_recovery() {
        let mut out = OutputBitmap::zeros(1, 3);
        out.set(0, 0, true);
        let raw = vec!["101".to_string()];
        assert_eq!(recover_bitstrings(&raw, &out).unwrap(), vec!["100"]);
        let zero = OutputBitmap::zeros(1, 3);
        assert_eq!(recover_bitstrings(&raw, &zero).unwrap(), raw);
        assert!(recover_shots(&[1, 2], &zero).is_err());
        assert!(recover_bitstrings(&["10".to_string()], &zero).is_err());
    }

    #[test]
    fn counts() {
        let shots: Vec<u64> = [0u64, 3].iter().flat_map(|&s| std::iter::repeat_n(s, 4096)).collect();
        assert_eq!(counts_to_distribution(&shots, 2).unwrap(), dist(2, &[("00", 0.5), ("11", 0.5)]));
        assert_eq!(counts_to_distribution(&[1], 2).unwrap(), dist(2, &[("01", 1.0)]));
        assert_eq!(counts_to_distribution(&[], 2), Err(RecoverError::NoShots));
    }

    #[test]
    fn vd_examples() {
        let bell = dist(2, &[("00", 0.5), ("11", 0.5)]);
        let uniform = dist(2, &[("00", 0.25), ("01", 0.25), ("10", 0.25), ("11", 0.25)]);
        assert_eq!(variational_distance(&bell, &bell).unwrap(), 0.0);
        assert!((variational_distance(&bell, &uniform).unwrap() - 0.5).abs() < 1e-15);
        let a = dist(2, &[("00", 1.0)]);
        let b = dist(2, &[("11", 1.0)]);
        assert_eq!(variational_distance(&a, &b).unwrap(), 1.0);
        assert!(variational_distance(&a, &dist(3, &[("000", 1.0)])).is_err());
    }

    #[test]
    fn vd_csv_has_expected_columns() {
        let mut buf = Vec::new();
        let r =
            VdRecord { benchmark: "bell".into(), level: "max".into(), randomize_output: true, epsilon: 1e-4, vd: 0.01 };
        write_vd_csv(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("benchmark,level,randomize_output,epsilon,vd\n"));
    }

    fn arb_dist() -> impl Strategy<Value = Distribution> {
        prop::collection::vec(0.0f64..1.0, 8).prop_map(|w| {
            let total: f64 = w.iter().sum::<f64>() + 1e-9;
            Distribution::from_pairs(3, w.iter().enumerate().map(|(k, x)| (k as u64, x / total)))
        })
    }

    proptest! {
        #[test]
        fn vd_is_a_metric(p in arb_dist(), q in arb_dist(), r in arb_dist()) {
            let d = |a: &Distribution, b: &Distribution| variational_distance(a, b).unwrap();
            prop_assert!((d(&p, &q) - d(&q, &p)).abs() < 1e-15);
            prop_assert_eq!(d(&p, &p), 0.0);
            prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&d(&p, &q)));
        }

        #[test]
        fn recovery_is_an_involution(rows in prop::collection::vec(0u64..16, 1..40), raw_seed in any::<u64>()) {
            let mut out = OutputBitmap::zeros(rows.len(), 4);
            for (i, &m) in rows.iter().enumerate() {
                out.set_row_mask(i, m);
            }
            let raw: Vec<u64> = (0..rows.len() as u64).map(|i| (raw_seed >> (i % 60)) & 15).collect();
            let once = recover_shots(&raw, &out).unwrap();
            prop_assert_eq!(recover_shots(&once, &out).unwrap(), raw);
        }

        #[test]
        fn sampled_distributions_sum_to_one(shots in prop::collection::vec(0u64..32, 1..200)) {
            let d = counts_to_distribution(&shots, 5).unwrap();
            prop_assert!((d.total() - 1.0).abs() < 1e-9);
        }
    }
}
