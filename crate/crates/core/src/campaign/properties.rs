//! Five sequence-only physicochemical properties and the validity check
//! built on them.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seq::{Sequence, ALPHABET, ALPHABET_SIZE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropertyError {
    #[error("instability index needs at least 2 residues, got {0}")]
    LengthTooShort(usize),
    #[error("empty reference set")]
    EmptyReference,
}

/// Kyte & Doolittle (1982) hydropathy, alphabet order.
const KYTE_DOOLITTLE: [f64; ALPHABET_SIZE] = [
    1.8, 2.5, -3.5, -3.5, 2.8, -0.4, -3.2, 4.5, -3.9, 3.8, 1.9, -3.5, -1.6, -3.5, -4.5, -0.8, -0.7, 4.2,
    -0.9, -1.3,
];

/// Average free amino-acid masses in daltons, alphabet order.
const AVERAGE_MASS: [f64; ALPHABET_SIZE] = [
    89.0932, 121.1582, 133.1027, 147.1293, 165.1891, 75.0666, 155.1546, 131.1729, 146.1876, 131.1729,
    149.2113, 132.1179, 115.1305, 146.1445, 174.201, 105.0926, 119.1192, 117.1463, 204.2252, 181.1885,
];

const WATER_MASS: f64 = 18.01524;

/// Dipeptide instability weight values (Guruprasad et al. 1990). Row is the
/// first residue, column the second, both in alphabet order.
#[rustfmt::skip]
const DIWV: [[f64; ALPHABET_SIZE]; ALPHABET_SIZE] = [
    [1.0, 44.94, -7.49, 1.0, 1.0, 1.0, -7.49, 1.0, 1.0, 1.0, 1.0, 1.0, 20.26, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
    [1.0, 1.0, 20.26, 1.0, 1.0, 1.0, 33.6, 1.0, 1.0, 20.26, 33.6, 1.0, 20.26, -6.54, 1.0, 1.0, 33.6, -6.54, 24.68, 1.0],
    [1.0, 1.0, 1.0, 1.0, -6.54, 1.0, 1.0, 1.0, -7.49, 1.0, 1.0, 1.0, 1.0, 1.0, -6.54, 20.26, -14.03, 1.0, 1.0, 1.0],
    [1.0, 44.94, 20.26, 33.6, 1.0, 1.0, -6.54, 20.26, 1.0, 1.0, 1.0, 1.0, 20.26, 20.26, 1.0, 20.26, 1.0, 1.0, -14.03, 1.0],
    [1.0, 1.0, 13.34, 1.0, 1.0, 1.0, 1.0, 1.0, -14.03, 1.0, 1.0, 1.0, 20.26, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 33.601],
    [-7.49, 1.0, 1.0, -6.54, 1.0, 13.34, 1.0, -7.49, -7.49, 1.0, 1.0, -7.49, 1.0, 1.0, 1.0, 1.0, -7.49, 1.0, 13.34, -7.49],
    [1.0, 1.0, 1.0, 1.0, -9.37, -9.37, 1.0, 44.94, 24.68, 1.0, 1.0, 24.68, -1.88, 1.0, 1.0, 1.0, -6.54, 1.0, -1.88, 44.94],
    [1.0, 1.0, 1.0, 44.94, 1.0, 1.0, 13.34, 1.0, -7.49, 20.26, 1.0, 1.0, -1.88, 1.0, 1.0, 1.0, 1.0, -7.49, 1.0, 1.0],
    [1.0, 1.0, 1.0, 1.0, 1.0, -7.49, 1.0, -7.49, 1.0, -7.49, 33.6, 1.0, -6.54, 24.64, 33.6, 1.0, 1.0, -7.49, 1.0, 1.0],
    [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -7.49, 1.0, 1.0, 1.0, 20.26, 33.6, 20.26, 1.0, 1.0, 1.0, 24.68, 1.0],
    [13.34, 1.0, 1.0, 1.0, 1.0, 1.0, 58.28, 1.0, 1.0, 1.0, -1.88, 1.0, 44.94, -6.54, -6.54, 44.94, -1.88, 1.0, 1.0, 24.68],
    [1.0, -1.88, 1.0, 1.0, -14.03, -14.03, 1.0, 44.94, 24.68, 1.0, 1.0, 1.0, -1.88, -6.54, 1.0, 1.0, -7.49, 1.0, -9.37, 1.0],
    [20.26, -6.54, -6.54, 18.38, 20.26, 1.0, 1.0, 1.0, 1.0, 1.0, -6.54, 1.0, 20.26, 20.26, -6.54, 20.26, 1.0, 20.26, -1.88, 1.0],
    [1.0, -6.54, 20.26, 20.26, -6.54, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 20.26, 20.26, 1.0, 44.94, 1.0, -6.54, 1.0, -6.54],
    [1.0, 1.0, 1.0, 1.0, 1.0, -7.49, 20.26, 1.0, 1.0, 1.0, 1.0, 13.34, 20.26, 20.26, 58.28, 44.94, 1.0, 1.0, 58.28, -6.54],
    [1.0, 33.6, 1.0, 20.26, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 44.94, 20.26, 20.26, 20.26, 1.0, 1.0, 1.0, 1.0],
    [1.0, 1.0, 1.0, 20.26, 13.34, -7.49, 1.0, 1.0, 1.0, 1.0, 1.0, -14.03, 1.0, -6.54, 1.0, 1.0, 1.0, 1.0, -14.03, 1.0],
    [1.0, 1.0, -14.03, 1.0, 1.0, -7.49, 1.0, 1.0, -1.88, 1.0, 1.0, 1.0, 20.26, 1.0, 1.0, 1.0, -7.49, 1.0, 1.0, -6.54],
    [-14.03, 1.0, 1.0, 1.0, 1.0, -9.37, 24.68, 1.0, 1.0, 13.34, 24.68, 13.34, 1.0, 1.0, 1.0, 1.0, -14.03, -7.49, 1.0, 1.0],
    [24.68, 1.0, 24.68, -6.54, 1.0, -7.49, 13.34, 1.0, 1.0, 1.0, 44.94, 1.0, 13.34, 1.0, -15.91, 1.0, -7.49, 1.0, -9.37, 13.34],
];

/// Tolerance on the isoelectric point, in pH units. The bisection runs far
/// below this so the net charge at the returned pH is also near zero.
pub const PI_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Deserialize)]
pub struct PkaSet {
    pub source: String,
    pub positive: HashMap<String, f64>,
    pub negative: HashMap<String, f64>,
    pub n_term_overrides: HashMap<String, f64>,
    pub c_term_overrides: HashMap<String, f64>,
}

/// The bundled pKa table (`data/pka.json`).
pub fn pka_set() -> &'static PkaSet {
    static SET: OnceLock<PkaSet> = OnceLock::new();
    SET.get_or_init(|| {
        serde_json::from_str(include_str!("../../data/pka.json")).expect("bundled pKa table is valid")
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertyVector {
    /// Daltons.
    pub molecular_weight: f64,
    pub aromaticity: f64,
    pub isoelectric_point: f64,
    pub gravy: f64,
    pub instability_index: f64,
}

impl PropertyVector {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.molecular_weight,
            self.aromaticity,
            self.isoelectric_point,
            self.gravy,
            self.instability_index,
        ]
    }
}

pub const PROPERTY_NAMES: [&str; 5] = [
    "molecular_weight",
    "aromaticity",
    "isoelectric_point",
    "gravy",
    "instability_index",
];

pub fn molecular_weight(x: &Sequence) -> f64 {
    x.iter().map(|a| AVERAGE_MASS[a.index()] - WATER_MASS).sum::<f64>() + WATER_MASS
}

/// Fraction of F, W and Y.
pub fn aromaticity(x: &Sequence) -> f64 {
    let n = x.iter().filter(|a| matches!(a.to_char(), 'F' | 'W' | 'Y')).count();
    n as f64 / x.len() as f64
}

/// Mean Kyte–Doolittle hydropathy.
pub fn gravy(x: &Sequence) -> f64 {
    x.iter().map(|a| KYTE_DOOLITTLE[a.index()]).sum::<f64>() / x.len() as f64
}

pub fn instability_index(x: &Sequence) -> Result<f64, PropertyError> {
    let r = x.residues();
    if r.len() < 2 {
        return Err(PropertyError::LengthTooShort(r.len()));
    }
    let total: f64 = r.windows(2).map(|w| DIWV[w[0].index()][w[1].index()]).sum();
    Ok(10.0 / r.len() as f64 * total)
}

/// Net charge at `ph` under the bundled pKa set.
pub fn net_charge(x: &Sequence, ph: f64) -> f64 {
    let pka = pka_set();
    let first = x.residues()[0].to_char().to_string();
    let last = x.residues()[x.len() - 1].to_char().to_string();
    let pos = |pk: f64| 1.0 / (1.0 + 10f64.powf(ph - pk));
    let neg = |pk: f64| 1.0 / (1.0 + 10f64.powf(pk - ph));

    let n_term = pka.n_term_overrides.get(&first).copied().unwrap_or(pka.positive["n_term"]);
    let c_term = pka.c_term_overrides.get(&last).copied().unwrap_or(pka.negative["c_term"]);
    let mut charge = pos(n_term) - neg(c_term);
    let mut counts = [0usize; ALPHABET_SIZE];
    for a in x.iter() {
        counts[a.index()] += 1;
    }
    for (i, &n) in counts.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let key = (ALPHABET[i] as char).to_string();
        if let Some(&pk) = pka.positive.get(&key) {
            charge += n as f64 * pos(pk);
        }
        if let Some(&pk) = pka.negative.get(&key) {
            charge -= n as f64 * neg(pk);
        }
    }
    charge
}

/// Root of [`net_charge`] on `[0, 14]` by bisection.
pub fn isoelectric_point(x: &Sequence) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 14.0f64);
    // charge is strictly decreasing in pH
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if net_charge(x, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn physicochemical(x: &Sequence) -> Result<PropertyVector, PropertyError> {
    Ok(PropertyVector {
        molecular_weight: molecular_weight(x),
        aromaticity: aromaticity(x),
        isoelectric_point: isoelectric_point(x),
        gravy: gravy(x),
        instability_index: instability_index(x)?,
    })
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 100]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validity {
    /// Percentage in `[0, 100]`.
    pub percent: f64,
    pub valid: usize,
    pub total: usize,
    /// Per property, the `[0.5, 99.5]` percentile band of the reference.
    pub bands: Vec<(f64, f64)>,
    /// Fewer than 200 reference sequences: bands are rough.
    pub small_reference: bool,
    /// Nothing to score.
    pub empty: bool,
}

pub const MIN_REFERENCE: usize = 200;

/// Share of `candidates` whose five properties all fall inside the central
/// 99% band of `reference`.
pub fn validity(candidates: &[Sequence], reference: &[Sequence]) -> Result<Validity, PropertyError> {
    if reference.is_empty() {
        return Err(PropertyError::EmptyReference);
    }
    let small_reference = reference.len() < MIN_REFERENCE;
    if small_reference {
        log::warn!(
            "validity reference has {} sequences; percentile bands are unstable below {MIN_REFERENCE}",
            reference.len()
        );
    }
    let props = reference
        .iter()
        .map(|x| physicochemical(x).map(|p| p.as_array()))
        .collect::<Result<Vec<_>, _>>()?;
    let bands: Vec<(f64, f64)> = (0..5)
        .map(|j| {
            let mut col: Vec<f64> = props.iter().map(|p| p[j]).collect();
            col.sort_by(f64::total_cmp);
            (percentile(&col, 0.5), percentile(&col, 99.5))
        })
        .collect();
    let mut valid = 0;
    for x in candidates {
        let p = physicochemical(x)?.as_array();
        if p.iter().zip(&bands).all(|(v, (lo, hi))| lo <= v && v <= hi) {
            valid += 1;
        }
    }
    let total = candidates.len();
    Ok(Validity {
        percent: if total == 0 { 0.0 } else { 100.0 * valid as f64 / total as f64 },
        valid,
        total,
        bands,
        small_reference,
        empty: total == 0,
    })
}
