//! Summary statistics over the best generated sequences.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Record;
use crate::seq::{hamming, SeqError, Sequence};

use super::properties::{validity, PropertyError, Validity};

pub const TOP_N: usize = 100;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no records to summarise")]
    EmptyDataset,
    #[error(transparent)]
    Seq(#[from] SeqError),
    #[error(transparent)]
    Property(#[from] PropertyError),
}

/// An exact mean of integer distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub sum: u64,
    pub count: u64,
}

impl Ratio {
    /// `0` when there is nothing to average.
    pub fn value(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum as f64 / self.count as f64
        }
    }
}

/// Mean Hamming distance from each sequence to `x_start`.
pub fn novelty(top: &[Sequence], x_start: &Sequence) -> Result<Ratio, SeqError> {
    let mut sum = 0;
    for x in top {
        sum += hamming(x, x_start)? as u64;
    }
    Ok(Ratio {
        sum,
        count: top.len() as u64,
    })
}

/// Mean Hamming distance over unordered pairs.
pub fn diversity(top: &[Sequence]) -> Result<Ratio, SeqError> {
    let mut sum = 0;
    for (i, a) in top.iter().enumerate() {
        for b in &top[i + 1..] {
            sum += hamming(a, b)? as u64;
        }
    }
    let n = top.len() as u64;
    Ok(Ratio {
        sum,
        count: n * n.saturating_sub(1) / 2,
    })
}

/// Indices of the `n` fittest records, best first; ties keep record order.
pub fn top_records(records: &[&Record], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.sort_by(|&a, &b| records[b].fitness.total_cmp(&records[a].fitness));
    idx.truncate(n);
    idx
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub max_fitness: f64,
    pub mean_top100: f64,
    pub median_top100: f64,
    pub novelty: f64,
    pub diversity: f64,
    /// Records the top set was drawn from.
    pub pool_size: usize,
    pub top_count: usize,
    /// Fewer than 100 records were available.
    pub truncated: bool,
    /// Diversity of fewer than two sequences, reported as 0.
    pub diversity_degenerate: bool,
    pub validity: Option<Validity>,
}

/// Metrics of `pool` relative to `x_start`. Validity is computed when a
/// reference set is given.
pub fn metrics_report(
    pool: &[&Record],
    x_start: &Sequence,
    reference: Option<&[Sequence]>,
) -> Result<MetricsReport, MetricsError> {
    if pool.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    let top_idx = top_records(pool, TOP_N);
    let top: Vec<Sequence> = top_idx.iter().map(|&i| pool[i].sequence.clone()).collect();
    let ys: Vec<f64> = top_idx.iter().map(|&i| pool[i].fitness).collect();
    let validity = match reference {
        Some(r) if x_start.len() >= 2 => Some(validity(&top, r)?),
        _ => None,
    };
    Ok(MetricsReport {
        max_fitness: ys[0],
        mean_top100: ys.iter().sum::<f64>() / ys.len() as f64,
        median_top100: median(&ys),
        novelty: novelty(&top, x_start)?.value(),
        diversity: diversity(&top)?.value(),
        pool_size: pool.len(),
        top_count: top.len(),
        truncated: top.len() < TOP_N,
        diversity_degenerate: top.len() < 2,
        validity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::parse_sequence;

    fn s(x: &str) -> Sequence {
        parse_sequence(x).unwrap()
    }

    fn rec(x: &str, y: f64) -> Record {
        Record {
            sequence: s(x),
            fitness: y,
            round: 1,
        }
    }

    #[test]
    fn singleton_report() {
        let r = rec("ACDE", 2.5);
        let m = metrics_report(&[&r], &s("ACDE"), None).unwrap();
        assert_eq!((m.max_fitness, m.mean_top100, m.median_top100), (2.5, 2.5, 2.5));
        assert_eq!(m.novelty, 0.0);
        assert_eq!(m.diversity, 0.0);
        assert!(m.diversity_degenerate && m.truncated);
    }

    #[test]
    fn hand_computed_distances() {
        // a is 2 from x0, b is 3 from x0, a and b differ at 4 sites
        let x0 = s("AAAAAA");
        let (ra, rb) = (rec("CCAAAA", 1.0), rec("AWWWAA", 2.0));
        assert_eq!(hamming(&ra.sequence, &rb.sequence).unwrap(), 4);
        let m = metrics_report(&[&ra, &rb], &x0, None).unwrap();
        assert_eq!(m.novelty, 2.5);
        assert_eq!(m.diversity, 4.0);
        assert_eq!(m.max_fitness, 2.0);
        assert_eq!(m.median_top100, 1.5);
        assert!(!m.diversity_degenerate);
    }

    #[test]
    fn top_selection_matches_full_sort() {
        let records: Vec<Record> = (0..250)
            .map(|i| rec("ACDE", ((i * 7919) % 251) as f64))
            .collect();
        let refs: Vec<&Record> = records.iter().collect();
        let got: Vec<f64> = top_records(&refs, 100).iter().map(|&i| records[i].fitness).collect();
        let mut all: Vec<f64> = records.iter().map(|r| r.fitness).collect();
        all.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(got, all[..100]);
    }

    #[test]
    fn ties_keep_record_order() {
        let records = [rec("AAAA", 1.0), rec("CCCC", 1.0), rec("DDDD", 2.0)];
        let refs: Vec<&Record> = records.iter().collect();
        assert_eq!(top_records(&refs, 3), vec![2, 0, 1]);
    }

    #[test]
    fn empty_pool_is_an_error() {
        assert!(matches!(metrics_report(&[], &s("A"), None), Err(MetricsError::EmptyDataset)));
    }
}
