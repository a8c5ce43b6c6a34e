//! Residues, sequences, masks, charge classes and sampling orders.
//!
//! Positions are 0-based everywhere inside the crate. Anything that leaves the
//! process (JSON traces, CSV, the prior wire protocol) uses 1-based positions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// The fixed residue order used by every encoding in the crate.
pub const ALPHABET: &[u8; 20] = b"ACDEFGHIKLMNPQRSTVWY";

/// Number of canonical residues.
pub const ALPHABET_SIZE: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeqError {
    #[error("empty sequence")]
    EmptySequence,
    #[error("non-canonical residue {1:?} at position {0}")]
    NonCanonicalResidue(usize, char),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("position {position} out of range for length {len}")]
    PositionOutOfRange { position: usize, len: usize },
    #[error("sequence still has masked positions")]
    StillMasked,
}

/// One of the 20 canonical amino acids, stored as its index in [`ALPHABET`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AminoAcid(u8);

impl AminoAcid {
    pub const ALA: AminoAcid = AminoAcid(0);

    pub fn from_index(index: usize) -> Option<Self> {
        (index < ALPHABET_SIZE).then_some(AminoAcid(index as u8))
    }

    pub fn from_char(c: char) -> Option<Self> {
        let b = u8::try_from(c).ok()?;
        ALPHABET.iter().position(|&a| a == b).map(|i| AminoAcid(i as u8))
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn to_char(self) -> char {
        ALPHABET[self.index()] as char
    }

    pub fn charge_class(self) -> ChargeClass {
        charge_class(self)
    }

    /// All 20 residues in alphabet order.
    pub fn all() -> impl Iterator<Item = AminoAcid> {
        (0..ALPHABET_SIZE as u8).map(AminoAcid)
    }
}

impl fmt::Debug for AminoAcid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

impl fmt::Display for AminoAcid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

/// Three-way charge partition of the alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChargeClass {
    Positive,
    Negative,
    Neutral,
}

impl ChargeClass {
    /// Residues belonging to this class, in alphabet order.
    pub fn members(self) -> Vec<AminoAcid> {
        AminoAcid::all().filter(|a| a.charge_class() == self).collect()
    }

    pub fn contains(self, aa: AminoAcid) -> bool {
        aa.charge_class() == self
    }
}

/// R, K, H are positive; D, E negative; everything else neutral.
pub fn charge_class(aa: AminoAcid) -> ChargeClass {
    match aa.to_char() {
        'R' | 'K' | 'H' => ChargeClass::Positive,
        'D' | 'E' => ChargeClass::Negative,
        _ => ChargeClass::Neutral,
    }
}

/// A fully specified residue string.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sequence(Vec<AminoAcid>);

impl Sequence {
    pub fn new(residues: Vec<AminoAcid>) -> Result<Self, SeqError> {
        if residues.is_empty() {
            return Err(SeqError::EmptySequence);
        }
        Ok(Sequence(residues))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn residues(&self) -> &[AminoAcid] {
        &self.0
    }

    pub fn get(&self, position: usize) -> Option<AminoAcid> {
        self.0.get(position).copied()
    }

    pub fn set(&mut self, position: usize, aa: AminoAcid) -> Result<(), SeqError> {
        let len = self.len();
        let slot = self
            .0
            .get_mut(position)
            .ok_or(SeqError::PositionOutOfRange { position, len })?;
        *slot = aa;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = AminoAcid> + '_ {
        self.0.iter().copied()
    }

    /// Indices of the active one-hot features, one per position.
    pub fn feature_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .map(|(i, aa)| i * ALPHABET_SIZE + aa.index())
    }
}

impl FromStr for Sequence {
    type Err = SeqError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_sequence(s)
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for aa in &self.0 {
            write!(f, "{aa}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sequence({self})")
    }
}

impl Serialize for Sequence {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Sequence {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_sequence(&s).map_err(serde::de::Error::custom)
    }
}

/// Parses a one-letter residue string. Error positions are 1-based.
pub fn parse_sequence(text: &str) -> Result<Sequence, SeqError> {
    if text.is_empty() {
        return Err(SeqError::EmptySequence);
    }
    text.chars()
        .enumerate()
        .map(|(i, c)| AminoAcid::from_char(c).ok_or(SeqError::NonCanonicalResidue(i + 1, c)))
        .collect::<Result<Vec<_>, _>>()
        .map(Sequence)
}

pub fn hamming(a: &Sequence, b: &Sequence) -> Result<usize, SeqError> {
    if a.len() != b.len() {
        return Err(SeqError::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter().zip(b.iter()).filter(|(x, y)| x != y).count())
}

/// Flattened one-hot encoding of length `20 * L`.
pub fn encode_one_hot(x: &Sequence) -> Vec<f64> {
    let mut out = vec![0.0; x.len() * ALPHABET_SIZE];
    for idx in x.feature_indices() {
        out[idx] = 1.0;
    }
    out
}

/// A sequence in which some positions are hidden behind a mask token.
///
/// The mask set is always exactly the set of `None` slots.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MaskedSequence {
    slots: Vec<Option<AminoAcid>>,
}

impl MaskedSequence {
    pub fn unmasked(x: &Sequence) -> Self {
        MaskedSequence {
            slots: x.iter().map(Some).collect(),
        }
    }

    /// Masks `positions` of `x`. Duplicate positions are ignored.
    pub fn mask(x: &Sequence, positions: &[usize]) -> Result<Self, SeqError> {
        let mut out = Self::unmasked(x);
        for &p in positions {
            if p >= x.len() {
                return Err(SeqError::PositionOutOfRange {
                    position: p,
                    len: x.len(),
                });
            }
            out.slots[p] = None;
        }
        Ok(out)
    }

    pub fn from_slots(slots: Vec<Option<AminoAcid>>) -> Result<Self, SeqError> {
        if slots.is_empty() {
            return Err(SeqError::EmptySequence);
        }
        Ok(MaskedSequence { slots })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slots(&self) -> &[Option<AminoAcid>] {
        &self.slots
    }

    pub fn get(&self, position: usize) -> Option<AminoAcid> {
        self.slots.get(position).copied().flatten()
    }

    pub fn is_masked(&self, position: usize) -> bool {
        matches!(self.slots.get(position), Some(None))
    }

    /// Sorted masked positions.
    pub fn mask_set(&self) -> Vec<usize> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.is_none().then_some(i))
            .collect()
    }

    pub fn masked_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_none()).count()
    }

    pub fn fill(&mut self, position: usize, aa: AminoAcid) -> Result<(), SeqError> {
        let len = self.len();
        let slot = self
            .slots
            .get_mut(position)
            .ok_or(SeqError::PositionOutOfRange { position, len })?;
        *slot = Some(aa);
        Ok(())
    }

    /// Puts the mask back on `position`.
    pub fn clear(&mut self, position: usize) -> Result<(), SeqError> {
        let len = self.len();
        let slot = self
            .slots
            .get_mut(position)
            .ok_or(SeqError::PositionOutOfRange { position, len })?;
        *slot = None;
        Ok(())
    }

    pub fn to_sequence(&self) -> Result<Sequence, SeqError> {
        self.slots
            .iter()
            .map(|s| s.ok_or(SeqError::StillMasked))
            .collect::<Result<Vec<_>, _>>()
            .map(Sequence)
    }

    /// Token ids for the wire protocol: residue index, or -1 for a mask.
    pub fn tokens(&self) -> Vec<i32> {
        self.slots
            .iter()
            .map(|s| s.map_or(-1, |a| a.index() as i32))
            .collect()
    }
}

impl fmt::Display for MaskedSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.slots {
            match s {
                Some(a) => write!(f, "{a}")?,
                None => write!(f, "#")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for MaskedSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MaskedSequence({self})")
    }
}

/// Sampling order: unmasked positions first, then masked negatives,
/// positives and neutrals, each block ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    order: Vec<usize>,
    boundary: usize,
}

impl Permutation {
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Number of leading positions that were never masked.
    pub fn boundary(&self) -> usize {
        self.boundary
    }

    /// The masked positions in sampling order.
    pub fn masked_order(&self) -> &[usize] {
        &self.order[self.boundary..]
    }
}

pub fn build_permutation(
    masked: &MaskedSequence,
    wild_type: &Sequence,
) -> Result<Permutation, SeqError> {
    if masked.len() != wild_type.len() {
        return Err(SeqError::LengthMismatch {
            expected: wild_type.len(),
            got: masked.len(),
        });
    }
    let mut order: Vec<usize> = (0..masked.len()).filter(|&i| !masked.is_masked(i)).collect();
    let boundary = order.len();
    for class in [
        ChargeClass::Negative,
        ChargeClass::Positive,
        ChargeClass::Neutral,
    ] {
        order.extend(
            masked
                .mask_set()
                .into_iter()
                .filter(|&i| wild_type.residues()[i].charge_class() == class),
        );
    }
    Ok(Permutation { order, boundary })
}

/// Serde helper: positions stored 0-based in memory, written 1-based.
pub mod one_based {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[usize], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|p| p + 1).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<usize>, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        v.into_iter()
            .map(|p| {
                p.checked_sub(1)
                    .ok_or_else(|| serde::de::Error::custom("positions are 1-based"))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(s: &str) -> Sequence {
        parse_sequence(s).unwrap()
    }

    #[test]
    fn parse_examples() {
        let x = seq("ACD");
        assert_eq!(x.len(), 3);
        assert_eq!(x.residues()[2].to_char(), 'D');
        assert_eq!(
            parse_sequence("AXA"),
            Err(SeqError::NonCanonicalResidue(2, 'X'))
        );
        assert_eq!(parse_sequence(""), Err(SeqError::EmptySequence));
        for bad in ["B", "J", "O", "U", "Z", "-", "a"] {
            assert!(parse_sequence(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn alphabet_index_is_bijective() {
        for (i, &c) in ALPHABET.iter().enumerate() {
            let aa = AminoAcid::from_char(c as char).unwrap();
            assert_eq!(aa.index(), i);
            assert_eq!(AminoAcid::from_index(i), Some(aa));
        }
        assert_eq!(AminoAcid::from_index(20), None);
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming(&seq("AAAA"), &seq("AAAA")), Ok(0));
        assert_eq!(hamming(&seq("AAAA"), &seq("AACA")), Ok(1));
        assert_eq!(hamming(&seq("ACDE"), &seq("ECDA")), Ok(2));
        assert!(matches!(
            hamming(&seq("AA"), &seq("AAA")),
            Err(SeqError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn charge_classes() {
        let aa = |c| AminoAcid::from_char(c).unwrap();
        assert_eq!(charge_class(aa('R')), ChargeClass::Positive);
        assert_eq!(charge_class(aa('E')), ChargeClass::Negative);
        assert_eq!(charge_class(aa('G')), ChargeClass::Neutral);
        assert_eq!(ChargeClass::Positive.members().len(), 3);
        assert_eq!(ChargeClass::Negative.members().len(), 2);
        assert_eq!(ChargeClass::Neutral.members().len(), 15);
    }

    #[test]
    fn permutation_examples() {
        let wt = seq("AKADA");
        let p = build_permutation(&MaskedSequence::unmasked(&wt), &wt).unwrap();
        assert_eq!(p.order(), &[0, 1, 2, 3, 4]);
        assert_eq!(p.boundary(), 5);

        // 1-based I = {2,4}: K at 2 (positive), D at 4 (negative).
        let m = MaskedSequence::mask(&wt, &[1, 3]).unwrap();
        let p = build_permutation(&m, &wt).unwrap();
        assert_eq!(p.order(), &[0, 2, 4, 3, 1]);
        assert_eq!(p.boundary(), 3);

        let wt = seq("GSAA");
        let m = MaskedSequence::mask(&wt, &[0, 1]).unwrap();
        let p = build_permutation(&m, &wt).unwrap();
        assert_eq!(p.order(), &[2, 3, 0, 1]);
        assert_eq!(p.boundary(), 2);

        assert!(build_permutation(&m, &seq("GSA")).is_err());
    }

    #[test]
    fn one_hot_examples() {
        let v = encode_one_hot(&seq("A"));
        assert_eq!(v.len(), 20);
        assert_eq!(v[0], 1.0);
        assert_eq!(v.iter().sum::<f64>(), 1.0);
        assert_eq!(encode_one_hot(&seq("C"))[1], 1.0);
        let v = encode_one_hot(&seq("AC"));
        let ones: Vec<usize> = (0..v.len()).filter(|&i| v[i] == 1.0).collect();
        assert_eq!(ones, vec![0, 21]);
    }

    #[test]
    fn masked_sequence_tracks_mask_set() {
        let x = seq("ACDEF");
        let mut m = MaskedSequence::mask(&x, &[3, 1, 3]).unwrap();
        assert_eq!(m.mask_set(), vec![1, 3]);
        assert_eq!(m.tokens(), vec![0, -1, 2, -1, 4]);
        assert_eq!(m.to_sequence(), Err(SeqError::StillMasked));
        m.fill(1, AminoAcid::ALA).unwrap();
        m.fill(3, AminoAcid::ALA).unwrap();
        assert_eq!(m.to_sequence().unwrap(), seq("AADAF"));
        assert!(MaskedSequence::mask(&x, &[5]).is_err());
    }

    fn arb_seq(len: usize) -> impl Strategy<Value = Sequence> {
        proptest::collection::vec(0usize..20, len)
            .prop_map(|v| Sequence(v.into_iter().map(|i| AminoAcid(i as u8)).collect()))
    }

    proptest! {
        #[test]
        fn permutation_is_valid(wt in arb_seq(12), mask in proptest::collection::vec(any::<bool>(), 12)) {
            let positions: Vec<usize> = (0..12).filter(|&i| mask[i]).collect();
            let m = MaskedSequence::mask(&wt, &positions).unwrap();
            let p = build_permutation(&m, &wt).unwrap();
            let mut sorted = p.order().to_vec();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (0..12).collect::<Vec<_>>());
            prop_assert_eq!(p.boundary(), 12 - positions.len());
            let mut suffix = p.masked_order().to_vec();
            suffix.sort_unstable();
            prop_assert_eq!(suffix, positions);
            let ranks: Vec<u8> = p.masked_order().iter().map(|&i| match wt.residues()[i].charge_class() {
                ChargeClass::Negative => 0, ChargeClass::Positive => 1, ChargeClass::Neutral => 2,
            }).collect();
            prop_assert!(ranks.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn hamming_is_a_metric(a in arb_seq(8), b in arb_seq(8), c in arb_seq(8)) {
            let d = |x: &Sequence, y: &Sequence| hamming(x, y).unwrap();
            prop_assert_eq!(d(&a, &a), 0);
            prop_assert_eq!(d(&a, &b), d(&b, &a));
            prop_assert_eq!(d(&a, &b) == 0, a == b);
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
        }

        #[test]
        fn parse_render_round_trip(s in "[ACDEFGHIKLMNPQRSTVWY]{1,40}") {
            prop_assert_eq!(parse_sequence(&s).unwrap().to_string(), s);
        }
    }
}
