//! Positions: finite sequences of positive naturals.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Position(pub Vec<u32>);

impl Position {
    pub fn root() -> Self {
        Position(Vec::new())
    }

    pub fn new(v: impl Into<Vec<u32>>) -> Self {
        let v = v.into();
        assert!(v.iter().all(|&i| i >= 1), "position indices start at 1");
        Position(v)
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, q: &Position) -> Position {
        let mut v = self.0.clone();
        v.extend_from_slice(&q.0);
        Position(v)
    }

    pub fn child(&self, i: u32) -> Position {
        let mut v = self.0.clone();
        v.push(i);
        Position(v)
    }

    pub fn is_prefix_of(&self, q: &Position) -> bool {
        q.0.starts_with(&self.0)
    }

    /// Neither position is a prefix of the other.
    pub fn is_disjoint(&self, q: &Position) -> bool {
        !self.is_prefix_of(q) && !q.is_prefix_of(self)
    }

    pub fn strip_prefix(&self, p: &Position) -> Option<Position> {
        self.0.strip_prefix(p.0.as_slice()).map(|s| Position(s.to_vec()))
    }

    pub fn head(&self) -> Option<u32> {
        self.0.first().copied()
    }

    pub fn tail(&self) -> Position {
        Position(self.0.iter().skip(1).copied().collect())
    }

    /// Length first, then left to right: the order in which context holes are
    /// numbered.
    pub fn cmp_shortlex(&self, q: &Position) -> Ordering {
        self.0.len().cmp(&q.0.len()).then_with(|| self.0.cmp(&q.0))
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "ε");
        }
        if self.0.iter().all(|&i| i < 10) {
            for i in &self.0 {
                write!(f, "{i}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
            write!(f, "{}", parts.join("."))
        }
    }
}

impl fmt::Debug for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Position {
    type Err = Error;

    /// Accepts `ε`, `e` or the empty string for the root, digit strings such
    /// as `121`, and dot-separated indices such as `1.12.3`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "ε" || s == "e" {
            return Ok(Position::root());
        }
        let bad = || Error::Parse { line: 1, col: 1, expected: format!("position, got `{s}`") };
        let v: Option<Vec<u32>> = if s.contains('.') {
            s.split('.').map(|x| x.parse::<u32>().ok().filter(|&i| i >= 1)).collect()
        } else {
            s.chars().map(|c| c.to_digit(10).filter(|&i| i >= 1)).collect()
        };
        v.map(Position).ok_or_else(bad)
    }
}
