//! The growing labelled set of (sequence, fitness) pairs.

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seq::{parse_sequence, SeqError, Sequence};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("sequence length {got} does not match dataset length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Seq(#[from] SeqError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub sequence: Sequence,
    pub fitness: f64,
    /// 0 for the initial data, `n` for records added in round `n`.
    pub round: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<Record>", into = "Vec<Record>")]
pub struct Dataset {
    records: Vec<Record>,
    index: HashSet<Sequence>,
}

impl From<Vec<Record>> for Dataset {
    fn from(records: Vec<Record>) -> Self {
        let index = records.iter().map(|r| r.sequence.clone()).collect();
        Dataset { records, index }
    }
}

impl From<Dataset> for Vec<Record> {
    fn from(d: Dataset) -> Self {
        d.records
    }
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: Vec<Record>) -> Result<Self, DatasetError> {
        let mut d = Dataset::new();
        for r in records {
            d.push(r.sequence, r.fitness, r.round)?;
        }
        Ok(d)
    }

    pub fn push(
        &mut self,
        sequence: Sequence,
        fitness: f64,
        round: usize,
    ) -> Result<(), DatasetError> {
        if let Some(len) = self.sequence_len() {
            if sequence.len() != len {
                return Err(DatasetError::LengthMismatch {
                    expected: len,
                    got: sequence.len(),
                });
            }
        }
        self.index.insert(sequence.clone());
        self.records.push(Record {
            sequence,
            fitness,
            round,
        });
        Ok(())
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn sequence_len(&self) -> Option<usize> {
        self.records.first().map(|r| r.sequence.len())
    }

    pub fn contains(&self, x: &Sequence) -> bool {
        self.index.contains(x)
    }

    pub fn sequences(&self) -> impl Iterator<Item = &Sequence> {
        self.records.iter().map(|r| &r.sequence)
    }

    pub fn fitnesses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.fitness).collect()
    }

    /// Highest-fitness record; the earliest one wins ties.
    pub fn best(&self) -> Option<&Record> {
        self.records.iter().fold(None, |best: Option<&Record>, r| match best {
            Some(b) if b.fitness >= r.fitness => Some(b),
            _ => Some(r),
        })
    }

    /// Population variance of the fitness values.
    pub fn fitness_variance(&self) -> f64 {
        let n = self.records.len();
        if n == 0 {
            return 0.0;
        }
        let mean = self.records.iter().map(|r| r.fitness).sum::<f64>() / n as f64;
        self.records
            .iter()
            .map(|r| (r.fitness - mean).powi(2))
            .sum::<f64>()
            / n as f64
    }

    /// Records added in rounds `>= round`.
    pub fn since_round(&self, round: usize) -> Vec<&Record> {
        self.records.iter().filter(|r| r.round >= round).collect()
    }

    /// Writes `sequence,fitness,round`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), DatasetError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["sequence", "fitness", "round"])?;
        for r in &self.records {
            out.write_record([
                r.sequence.to_string(),
                format!("{}", r.fitness),
                r.round.to_string(),
            ])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads `sequence,fitness[,round]` with a header row.
    pub fn read_csv<R: Read>(r: R) -> Result<Self, DatasetError> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h.trim() == name);
        let (Some(si), Some(fi)) = (col("sequence"), col("fitness")) else {
            return Err(DatasetError::Parse {
                line: 1,
                message: "expected header with `sequence` and `fitness`".into(),
            });
        };
        let ri = col("round");
        let mut d = Dataset::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let line = i + 2;
            let parse_err = |message: String| DatasetError::Parse { line, message };
            let seq = parse_sequence(row.get(si).unwrap_or("").trim())?;
            let fitness: f64 = row
                .get(fi)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("fitness: {e}")))?;
            let round = match ri.and_then(|c| row.get(c)) {
                Some(v) => v.trim().parse().map_err(|e| parse_err(format!("round: {e}")))?,
                None => 0,
            };
            d.push(seq, fitness, round)?;
        }
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> Sequence {
        parse_sequence(x).unwrap()
    }

    #[test]
    fn best_prefers_earliest_on_ties() {
        let mut d = Dataset::new();
        d.push(s("AA"), 1.0, 0).unwrap();
        d.push(s("AC"), 2.0, 0).unwrap();
        d.push(s("CC"), 2.0, 1).unwrap();
        assert_eq!(d.best().unwrap().sequence, s("AC"));
        assert!(d.contains(&s("CC")));
        assert!(d.push(s("A"), 0.0, 1).is_err());
    }

    #[test]
    fn variance_is_population_variance() {
        let mut d = Dataset::new();
        for (x, y) in [("AA", 1.0), ("AC", 3.0)] {
            d.push(s(x), y, 0).unwrap();
        }
        assert_eq!(d.fitness_variance(), 1.0);
    }

    #[test]
    fn csv_round_trip() {
        let mut d = Dataset::new();
        d.push(s("ACD"), 0.5, 0).unwrap();
        d.push(s("ACE"), -1.25, 3).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.records(), d.records());
        assert!(back.contains(&s("ACE")));
    }
}
