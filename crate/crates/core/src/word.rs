use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// A finite address `w = w_1 … w_m` over the cell alphabet `{0, …, d-1}`.
///
/// `w` names the cell `F_w K = F_{w_1} ∘ ⋯ ∘ F_{w_m}(K)` and, symbolically, the
/// cylinder of sequences starting with `w`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn new(symbols: Vec<usize>) -> Self {
        Word(symbols)
    }

    /// Constant word `s^m`.
    pub fn repeat(symbol: usize, len: usize) -> Self {
        Word(vec![symbol; len])
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut s = self.0.clone();
        s.extend_from_slice(&other.0);
        Word(s)
    }

    /// `s·w`
    pub fn prepend(&self, symbol: usize) -> Word {
        let mut s = Vec::with_capacity(self.0.len() + 1);
        s.push(symbol);
        s.extend_from_slice(&self.0);
        Word(s)
    }

    /// `w·s`
    pub fn append(&self, symbol: usize) -> Word {
        let mut s = self.0.clone();
        s.push(symbol);
        Word(s)
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n.min(self.0.len())].to_vec())
    }

    pub fn is_constant(&self) -> bool {
        self.0.windows(2).all(|p| p[0] == p[1])
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match self.0.iter().find(|&&s| s >= d) {
            Some(s) => Err(Error::domain(format!(
                "symbol {s} out of range for an alphabet of {d} cells"
            ))),
            None => Ok(()),
        }
    }

    /// Lexicographic rank among words of the same length (`w_1` most significant).
    pub fn rank(&self, d: usize) -> usize {
        self.0.iter().fold(0, |acc, &s| acc * d + s)
    }

    pub fn from_rank(mut rank: usize, len: usize, d: usize) -> Word {
        let mut s = vec![0; len];
        for slot in s.iter_mut().rev() {
            *slot = rank % d;
            rank /= d;
        }
        Word(s)
    }

    /// All `d^len` words of length `len` in lexicographic order.
    pub fn all(len: usize, d: usize) -> impl Iterator<Item = Word> {
        let count = d.pow(len as u32);
        (0..count).map(move |r| Word::from_rank(r, len, d))
    }

    /// Parses digit strings (`"012"`) when `d ≤ 10`, comma-separated integers otherwise.
    pub fn parse(s: &str, d: usize) -> Result<Word> {
        let s = s.trim();
        let symbols: Vec<usize> = if s.is_empty() {
            Vec::new()
        } else if d <= 10 && !s.contains(',') {
            s.chars()
                .map(|c| {
                    c.to_digit(10)
                        .map(|v| v as usize)
                        .ok_or_else(|| Error::domain(format!("invalid symbol `{c}` in word `{s}`")))
                })
                .collect::<Result<_>>()?
        } else {
            s.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::domain(format!("invalid symbol `{t}` in word `{s}`")))
                })
                .collect::<Result<_>>()?
        };
        let w = Word(symbols);
        w.validate(d)?;
        Ok(w)
    }

    /// Inverse of [`Word::parse`] for an alphabet of size `d`.
    pub fn format(&self, d: usize) -> String {
        if d <= 10 {
            self.0.iter().map(|s| char::from(b'0' + *s as u8)).collect()
        } else {
            self.0.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
        }
    }
}

impl From<Vec<usize>> for Word {
    fn from(v: Vec<usize>) -> Self {
        Word(v)
    }
}

impl From<&[usize]> for Word {
    fn from(v: &[usize]) -> Self {
        Word(v.to_vec())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "ε");
        }
        let wide = self.0.iter().any(|&s| s >= 10);
        let parts: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
        write!(f, "{}", parts.join(if wide { "," } else { "" }))
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_roundtrip_and_order() {
        let words: Vec<Word> = Word::all(3, 3).collect();
        assert_eq!(words.len(), 27);
        assert_eq!(words[0], Word::new(vec![0, 0, 0]));
        assert_eq!(words[5], Word::new(vec![0, 1, 2]));
        for (i, w) in words.iter().enumerate() {
            assert_eq!(w.rank(3), i);
        }
    }

    #[test]
    fn parse_digits_and_commas() {
        assert_eq!(Word::parse("012", 3).unwrap(), Word::new(vec![0, 1, 2]));
        assert_eq!(Word::parse("", 3).unwrap(), Word::empty());
        assert_eq!(Word::parse("3,14", 15).unwrap(), Word::new(vec![3, 14]));
        assert!(Word::parse("3", 3).is_err());
        assert!(Word::parse("0x", 3).is_err());
        assert_eq!(Word::new(vec![12, 0]).format(15), "12,0");
    }

    #[test]
    fn concatenation_identity() {
        let a = Word::new(vec![1, 2]);
        let b = Word::new(vec![0]);
        let c = Word::new(vec![2, 2]);
        assert_eq!(a.concat(&Word::empty()), a);
        assert_eq!(Word::empty().concat(&a), a);
        assert_eq!(a.concat(&b).concat(&c), a.concat(&b.concat(&c)));
        assert_eq!(b.prepend(1), Word::new(vec![1, 0]));
        assert!(Word::repeat(2, 4).is_constant());
        assert!(!a.is_constant());
    }
}
