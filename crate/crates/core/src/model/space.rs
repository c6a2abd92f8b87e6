use serde::{Deserialize, Serialize};

use super::ModelError;

/// A finite labeled coordinate space `X_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordinateSpace {
    pub index: usize,
    symbols: Vec<String>,
}

impl CoordinateSpace {
    pub fn new(index: usize, symbols: Vec<String>) -> Result<Self, ModelError> {
        if index == 0 {
            return Err(ModelError::ZeroIndex);
        }
        if symbols.is_empty() {
            return Err(ModelError::EmptySpace { index });
        }
        for (a, s) in symbols.iter().enumerate() {
            if symbols[..a].contains(s) {
                return Err(ModelError::DuplicateSymbol {
                    index,
                    symbol: s.clone(),
                });
            }
        }
        Ok(CoordinateSpace { index, symbols })
    }

    /// The space `{"0", "1"}`.
    pub fn binary(index: usize) -> Self {
        CoordinateSpace {
            index,
            symbols: vec!["0".into(), "1".into()],
        }
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn arity(&self) -> usize {
        self.symbols.len()
    }

    pub fn label(&self, sym: usize) -> &str {
        &self.symbols[sym]
    }

    pub fn lookup(&self, label: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == label)
    }
}

/// `X = ×_i X_i`, given by an explicit head and a template repeated forever.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceFamily {
    head: Vec<CoordinateSpace>,
    tail: CoordinateSpace,
}

impl SpaceFamily {
    pub fn new(head: Vec<CoordinateSpace>, tail_symbols: Vec<String>) -> Result<Self, ModelError> {
        for (k, s) in head.iter().enumerate() {
            if s.index != k + 1 {
                return Err(ModelError::SpaceIndexMismatch {
                    expected: k + 1,
                    found: s.index,
                });
            }
        }
        let tail = CoordinateSpace::new(head.len() + 1, tail_symbols)?;
        Ok(SpaceFamily { head, tail })
    }

    /// Every coordinate is `{"0", "1"}`.
    pub fn binary() -> Self {
        SpaceFamily {
            head: Vec::new(),
            tail: CoordinateSpace::binary(1),
        }
    }

    pub fn head_len(&self) -> usize {
        self.head.len()
    }

    /// Resolve coordinate `i` (1-based). Tail indices reuse the template's symbols.
    pub fn space(&self, i: usize) -> &CoordinateSpace {
        assert!(i >= 1, "coordinates are 1-based");
        self.head.get(i - 1).unwrap_or(&self.tail)
    }

    pub fn arity(&self, i: usize) -> usize {
        self.space(i).arity()
    }

    pub fn tail_template(&self) -> &CoordinateSpace {
        &self.tail
    }
}
