//! Built-in benchmark programs.

use sidesynth_core::constraint::StringDomain;
use sidesynth_core::symexec::{parse_program, Program, ProgramError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alphabet {
    Digits,
    Lower,
}

impl Alphabet {
    pub fn domain(self, len_high: usize, len_low: usize) -> StringDomain {
        match self {
            Alphabet::Digits => StringDomain::digits(len_high).with_lengths(len_high, len_low),
            Alphabet::Lower => StringDomain::lowercase(len_high, len_low),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BenchmarkEntry {
    pub id: &'static str,
    pub name: &'static str,
    pub source: &'static str,
    pub alphabet: Alphabet,
    pub len_high: usize,
    pub len_low: usize,
    /// Path and class counts reported for the original implementation of
    /// this benchmark, where known. Our transliterations need not match.
    pub reference_counts: Option<(usize, usize)>,
    /// Part of the standard comparison suite.
    pub in_suite: bool,
}

impl BenchmarkEntry {
    /// Parsed program at this entry's lengths.
    pub fn program(&self) -> Result<Program, ProgramError> {
        let p = parse_program(self.source)?;
        if (p.len_high, p.len_low) == (self.len_high, self.len_low) {
            Ok(p)
        } else {
            p.with_lengths(self.len_high, self.len_low)
        }
    }

    pub fn domain(&self) -> StringDomain {
        self.alphabet.domain(self.len_high, self.len_low)
    }
}

const PCI: &str = include_str!("../benchmarks/pci.prog");
const PCS: &str = include_str!("../benchmarks/pcs.prog");
const SE: &str = include_str!("../benchmarks/se.prog");
const SI: &str = include_str!("../benchmarks/si.prog");
const SCI: &str = include_str!("../benchmarks/sci.prog");
const IO: &str = include_str!("../benchmarks/io.prog");
const CO: &str = include_str!("../benchmarks/co.prog");
const ED: &str = include_str!("../benchmarks/ed.prog");

const fn entry(
    id: &'static str,
    name: &'static str,
    source: &'static str,
    len_high: usize,
    len_low: usize,
    reference_counts: Option<(usize, usize)>,
) -> BenchmarkEntry {
    BenchmarkEntry {
        id,
        name,
        source,
        alphabet: Alphabet::Lower,
        len_high,
        len_low,
        reference_counts,
        in_suite: true,
    }
}

pub const BENCHMARKS: [BenchmarkEntry; 10] = [
    entry("PCI", "passCheckInsec", PCI, 4, 4, Some((5, 5))),
    entry("PCS", "passCheckSec", PCS, 4, 4, Some((5, 1))),
    entry("SE", "stringEquals", SE, 4, 4, Some((9, 9))),
    entry("SI", "stringInequality", SI, 4, 4, Some((2, 2))),
    entry("SCI", "stringCharInequality", SCI, 4, 4, Some((80, 2))),
    entry("IO", "indexOf", IO, 8, 1, Some((9, 9))),
    entry("CO", "compress", CO, 4, 4, Some((5, 5))),
    entry("ED", "editDistance", ED, 4, 4, Some((2170, 22))),
    // Shorter edit distance for quick runs.
    BenchmarkEntry {
        in_suite: false,
        reference_counts: None,
        ..entry("ED3", "editDistance", ED, 3, 3, None)
    },
    // The early-exit check over PIN digits.
    BenchmarkEntry {
        alphabet: Alphabet::Digits,
        in_suite: false,
        reference_counts: None,
        ..entry("CHECKPIN", "checkPIN", PCI, 4, 4, None)
    },
];

/// Looks an entry up by id, ignoring case.
pub fn benchmark(id: &str) -> Option<&'static BenchmarkEntry> {
    BENCHMARKS.iter().find(|b| b.id.eq_ignore_ascii_case(id))
}

/// The eight entries of the standard comparison suite, in table order.
pub fn suite() -> impl Iterator<Item = &'static BenchmarkEntry> {
    BENCHMARKS.iter().filter(|b| b.in_suite)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_parses_at_its_lengths() {
        for b in &BENCHMARKS {
            let p = b.program().unwrap();
            assert_eq!((p.len_high, p.len_low), (b.len_high, b.len_low), "{}", b.id);
        }
        assert_eq!(suite().count(), 8);
        assert_eq!(benchmark("ed3").unwrap().len_high, 3);
        assert!(benchmark("nope").is_none());
    }
}
