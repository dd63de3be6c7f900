//! Static table of object-class / region pairs that cannot belong together.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

const DEFAULT_TABLE: &str = include_str!("../data/implausible.csv");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VetoTable {
    pairs: BTreeSet<(String, String)>,
}

impl Default for VetoTable {
    fn default() -> Self {
        VetoTable::parse(DEFAULT_TABLE).expect("shipped veto table parses")
    }
}

impl VetoTable {
    pub fn empty() -> Self {
        VetoTable {
            pairs: BTreeSet::new(),
        }
    }

    /// Parses `class,region` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = BTreeSet::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (class, region) = line.split_once(',').ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "veto table line {}: expected class,region",
                    lineno + 1
                ))
            })?;
            pairs.insert((normalize(class), normalize(region)));
        }
        Ok(VetoTable { pairs })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn is_implausible(&self, class: &str, region: &str) -> bool {
        self.pairs.contains(&(normalize(class), normalize(region)))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn normalize(s: &str) -> String {
    s.trim().to_lowercase()
}
