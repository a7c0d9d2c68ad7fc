//! Operator sequences and their two text forms.
//!
//! A sequence is an ordered list of Grover steps, each either global scope
//! (diffusion over all `n` qubits) or local scope (diffusion over the low
//! `m` qubits). Steps are stored in application order: `steps[0]` acts on
//! the state first. Every step contains exactly one oracle query, so the
//! oracle budget of a sequence is its length.
//!
//! Two lossless text forms exist:
//!
//! * step strings over `{G, L}` in application order, e.g. `LLGL`;
//! * tuple form `S(n,m;k1,...,kq)`, the conventional run-length notation.
//!   Entry `k_j` is a run of local steps when `q - j` is even and of global
//!   steps when it is odd, and the runs apply right to left (`k_q` first).
//!   Hence `S(4,2;1,1,2)` is `LLGL` and `S(4,2;3,0)` is `GGG`: a trailing
//!   zero marks a sequence whose first applied step is global. Zeros
//!   anywhere else are rejected.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scope of one Grover step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Step {
    /// Oracle followed by diffusion over the whole database.
    Global,
    /// Oracle followed by diffusion inside each 2^m block.
    Local,
}

impl Step {
    pub fn letter(self) -> char {
        match self {
            Step::Global => 'G',
            Step::Local => 'L',
        }
    }
}

/// An interleaving of global and local Grover steps for a given `(n, m)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OperatorSequence {
    n: u32,
    m: u32,
    steps: Vec<Step>,
}

impl OperatorSequence {
    pub fn new(n: u32, m: u32, steps: Vec<Step>) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if m < 1 || m > n {
            return Err(Error::invalid(format!(
                "local scope m = {m} must satisfy 1 <= m <= n = {n}"
            )));
        }
        Ok(Self { n, m, steps })
    }

    /// Decode tuple entries `(k1, ..., kq)` into a step list.
    pub fn from_tuple(n: u32, m: u32, entries: &[u32]) -> Result<Self> {
        let q = entries.len();
        if q == 0 {
            return Err(Error::invalid("tuple form needs at least one entry"));
        }
        for (i, &k) in entries.iter().enumerate() {
            if k == 0 && i + 1 != q {
                return Err(Error::invalid(
                    "zero run-lengths are only allowed in the final tuple entry",
                ));
            }
        }
        let mut steps = Vec::with_capacity(entries.iter().sum::<u32>() as usize);
        for j in (1..=q).rev() {
            let tag = if (q - j) % 2 == 0 { Step::Local } else { Step::Global };
            steps.extend(std::iter::repeat(tag).take(entries[j - 1] as usize));
        }
        Self::new(n, m, steps)
    }

    /// Parse tuple form, e.g. `S(4,2;1,1,2)`.
    pub fn parse_tuple(text: &str) -> Result<Self> {
        let mut cur = Cursor::new(text);
        cur.expect_char('S')?;
        cur.expect_char('(')?;
        let n = cur.number("database exponent n")?;
        cur.expect_char(',')?;
        let m = cur.number("local scope m")?;
        cur.expect_char(';')?;
        let mut entries = vec![cur.number("run length")?];
        loop {
            cur.skip_ws();
            match cur.peek() {
                Some(',') => {
                    cur.bump();
                    entries.push(cur.number("run length")?);
                }
                Some(')') => {
                    cur.bump();
                    break;
                }
                _ => return Err(cur.unexpected("',' or ')'")),
            }
        }
        cur.expect_end()?;
        Self::from_tuple(n, m, &entries)
    }

    /// Parse a step string over `{G, L}` in application order. The empty
    /// string is the empty sequence.
    pub fn parse_steps(text: &str, n: u32, m: u32) -> Result<Self> {
        let mut steps = Vec::with_capacity(text.len());
        for (i, c) in text.char_indices() {
            match c {
                'G' => steps.push(Step::Global),
                'L' => steps.push(Step::Local),
                _ => return Err(Error::parse(i, format!("expected 'G' or 'L', found {c:?}"))),
            }
        }
        Self::new(n, m, steps)
    }

    /// Run-length entries `(k1, ..., kq)` of this sequence.
    pub fn tuple(&self) -> Vec<u32> {
        let mut runs: Vec<(Step, u32)> = Vec::new();
        for &s in &self.steps {
            match runs.last_mut() {
                Some((tag, count)) if *tag == s => *count += 1,
                _ => runs.push((s, 1)),
            }
        }
        let mut entries: Vec<u32> = runs.iter().rev().map(|&(_, c)| c).collect();
        if runs.first().map_or(true, |&(tag, _)| tag == Step::Global) {
            entries.push(0);
        }
        entries
    }

    /// Canonical tuple-form text, e.g. `S(4,2;1,1,2)`.
    pub fn tuple_form(&self) -> String {
        let entries: Vec<String> = self.tuple().iter().map(u32::to_string).collect();
        format!("S({},{};{})", self.n, self.m, entries.join(","))
    }

    /// Step-string text in application order, e.g. `LLGL`.
    pub fn step_string(&self) -> String {
        self.steps.iter().map(|s| s.letter()).collect()
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// Total oracle queries, one per step.
    pub fn oracle_count(&self) -> u32 {
        self.steps.len() as u32
    }

    pub fn local_count(&self) -> u32 {
        self.steps.iter().filter(|&&s| s == Step::Local).count() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl fmt::Display for OperatorSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tuple_form())
    }
}

impl FromStr for OperatorSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_tuple(s)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            bytes: text.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.bytes.get(self.pos).map(|&b| b as char)
    }

    fn bump(&mut self) {
        self.pos += 1;
    }

    fn expect_char(&mut self, want: char) -> Result<()> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c == want => {
                self.bump();
                Ok(())
            }
            _ => Err(self.unexpected(&format!("'{want}'"))),
        }
    }

    fn number<T: TryFrom<u64>>(&mut self, what: &str) -> Result<T> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::parse(start, format!("expected {what} (a number)")));
        }
        let digits = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        let value: u64 = digits
            .parse()
            .map_err(|_| Error::parse(start, format!("{what} out of range")))?;
        T::try_from(value).map_err(|_| Error::parse(start, format!("{what} out of range")))
    }

    fn expect_end(&mut self) -> Result<()> {
        self.skip_ws();
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }

    fn unexpected(&self, want: &str) -> Error {
        match self.peek() {
            Some(c) => Error::parse(self.pos, format!("expected {want}, found {c:?}")),
            None => Error::parse(self.pos, format!("expected {want}, found end of input")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(text: &str) -> OperatorSequence {
        OperatorSequence::parse_tuple(text).unwrap()
    }

    #[test]
    fn tuple_to_steps_matches_known_products() {
        // S(4,2;1,1,2) = G2 G4 G2^2 applied right to left.
        assert_eq!(seq("S(4,2;1,1,2)").step_string(), "LLGL");
        // Pure global run with the trailing-zero marker.
        assert_eq!(seq("S(4,2;3,0)").step_string(), "GGG");
        // Standard partial-search shape: globals, one local, final global.
        assert_eq!(seq("S(7,2;1,1,6,0)").step_string(), "GGGGGGLG");
        assert_eq!(seq("S(6,5;1,1,1,2,1)").step_string(), "LGGLGL");
    }

    #[test]
    fn steps_to_tuple_round_trip() {
        for text in [
            "S(4,2;1,1,2)",
            "S(4,2;3,0)",
            "S(4,2;0)",
            "S(9,6;1,1,2,1,2,7,4)",
            "S(8,5;2,1,3,1,2,1,2,1,0)",
            "S(5,2;4)",
            "S(6,2;1,1,0)",
        ] {
            let s = seq(text);
            assert_eq!(s.tuple_form(), text, "canonical print of {text}");
            assert_eq!(OperatorSequence::parse_tuple(&s.tuple_form()).unwrap(), s);
            let via_steps =
                OperatorSequence::parse_steps(&s.step_string(), s.n(), s.m()).unwrap();
            assert_eq!(via_steps, s);
        }
    }

    #[test]
    fn empty_sequence() {
        let s = seq("S(4,2;0)");
        assert!(s.is_empty());
        assert_eq!(s.oracle_count(), 0);
        assert_eq!(s.step_string(), "");
        assert_eq!(s.tuple(), vec![0]);
    }

    #[test]
    fn oracle_count_is_length() {
        assert_eq!(seq("S(9,6;1,1,2,1,2,7,4)").oracle_count(), 18);
        assert_eq!(seq("S(6,5;1,1,1,2,1)").local_count(), 3);
    }

    #[test]
    fn rejects_interior_and_leading_zeros() {
        assert!(OperatorSequence::parse_tuple("S(4,2;1,0,2)").is_err());
        assert!(OperatorSequence::parse_tuple("S(4,2;0,2)").is_err());
        assert!(OperatorSequence::parse_tuple("S(4,2;0,0)").is_err());
    }

    #[test]
    fn parse_errors_carry_positions() {
        match OperatorSequence::parse_tuple("S(4,2;1,x)") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 8),
            other => panic!("expected parse error, got {other:?}"),
        }
        match OperatorSequence::parse_steps("GLXG", 4, 2) {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_scopes() {
        assert!(OperatorSequence::parse_tuple("S(4,0;1)").is_err());
        assert!(OperatorSequence::parse_tuple("S(4,5;1)").is_err());
        // m = n is representable (local and global coincide in the full
        // simulator); the reduced model rejects it separately.
        assert!(OperatorSequence::parse_tuple("S(4,4;1)").is_ok());
    }
}
