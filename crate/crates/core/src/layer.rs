// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt;
use std::str::FromStr;

/// A layer chosen by keyword or explicit index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSelect {
    First,
    /// `⌊n_layers / 2⌋`
    Middle,
    Last,
    Index(usize),
}

impl LayerSelect {
    pub fn resolve(self, n_layers: usize) -> usize {
        match self {
            LayerSelect::First => 0,
            LayerSelect::Middle => n_layers / 2,
            LayerSelect::Last => n_layers.saturating_sub(1),
            LayerSelect::Index(i) => i,
        }
    }

    /// Parses a comma-separated list such as `first,middle,last` or `0,20,39`.
    pub fn parse_list(s: &str) -> Result<Vec<Self>, String> {
        s.split(',').map(|p| p.trim().parse()).collect()
    }
}

impl FromStr for LayerSelect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first" => Ok(LayerSelect::First),
            "middle" => Ok(LayerSelect::Middle),
            "last" => Ok(LayerSelect::Last),
            other => other
                .parse()
                .map(LayerSelect::Index)
                .map_err(|_| format!("expected first, middle, last or a layer index, got {other:?}")),
        }
    }
}

impl fmt::Display for LayerSelect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSelect::First => f.write_str("first"),
            LayerSelect::Middle => f.write_str("middle"),
            LayerSelect::Last => f.write_str("last"),
            LayerSelect::Index(i) => write!(f, "{i}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keywords() {
        assert_eq!(LayerSelect::Middle.resolve(40), 20);
        assert_eq!(LayerSelect::Middle.resolve(3), 1);
        assert_eq!(LayerSelect::Last.resolve(40), 39);
        assert_eq!(LayerSelect::First.resolve(40), 0);
        assert_eq!(
            LayerSelect::parse_list("first, middle,last,7").unwrap(),
            vec![LayerSelect::First, LayerSelect::Middle, LayerSelect::Last, LayerSelect::Index(7)]
        );
        assert!("mid".parse::<LayerSelect>().is_err());
    }
}
