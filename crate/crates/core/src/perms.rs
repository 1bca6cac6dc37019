//! AppArmor file permission letters.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// A single file permission letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Perm {
    /// `m`: memory map as executable
    Mmap,
    /// `r`
    Read,
    /// `w`
    Write,
    /// `k`: file locking
    Lock,
    /// `l`: hard link creation
    Link,
    /// `x`
    Exec,
}

impl Perm {
    /// Canonical output order.
    pub const ALL: [Perm; 6] = [
        Perm::Mmap,
        Perm::Read,
        Perm::Write,
        Perm::Lock,
        Perm::Link,
        Perm::Exec,
    ];

    pub fn letter(self) -> char {
        match self {
            Perm::Mmap => 'm',
            Perm::Read => 'r',
            Perm::Write => 'w',
            Perm::Lock => 'k',
            Perm::Link => 'l',
            Perm::Exec => 'x',
        }
    }

    pub fn from_letter(c: char) -> Option<Perm> {
        Some(match c {
            'm' => Perm::Mmap,
            'r' => Perm::Read,
            'w' => Perm::Write,
            'k' => Perm::Lock,
            'l' => Perm::Link,
            'x' => Perm::Exec,
            _ => return None,
        })
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid permission letter {0:?}")]
pub struct PermParseError(pub char);

/// Set of permission letters. Displays in the canonical order `mrwklx`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct PermSet(u8);

impl PermSet {
    pub const EMPTY: PermSet = PermSet(0);
    /// Every letter, the mask applied to denied shells.
    pub const ALL: PermSet = PermSet(0b11_1111);

    pub fn contains(self, p: Perm) -> bool {
        self.0 & p.bit() != 0
    }

    pub fn insert(&mut self, p: Perm) {
        self.0 |= p.bit();
    }

    pub fn with(mut self, p: Perm) -> PermSet {
        self.insert(p);
        self
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: PermSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn intersects(self, other: PermSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn union(self, other: PermSet) -> PermSet {
        PermSet(self.0 | other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = Perm> {
        Perm::ALL.into_iter().filter(move |p| self.contains(*p))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }
}

impl FromIterator<Perm> for PermSet {
    fn from_iter<I: IntoIterator<Item = Perm>>(iter: I) -> Self {
        let mut set = PermSet::EMPTY;
        for p in iter {
            set.insert(p);
        }
        set
    }
}

impl FromStr for PermSet {
    type Err = PermParseError;

    /// Accepts letters in any order; repeats collapse.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| Perm::from_letter(c).ok_or(PermParseError(c)))
            .collect()
    }
}

impl fmt::Display for PermSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.iter() {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PermSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PermSet({self})")
    }
}

impl serde::Serialize for PermSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for PermSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
