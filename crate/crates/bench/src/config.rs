//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. List values are
//! comma-separated. Later assignments win, which is how command-line
//! overrides are layered on top of a file.

use std::fmt;
use std::str::FromStr;

use crate::error::{BenchError, Result};

/// Ordered `(key, value)` assignments.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: Vec<(String, String)>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| BenchError::Config {
                line: i + 1,
                detail: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(BenchError::Config {
                    line: i + 1,
                    detail: "empty key".into(),
                });
            }
            entries.push((key.to_string(), value.trim().to_string()));
        }
        Ok(Self { entries })
    }

    /// Parse a single `key=value` override.
    pub fn push_assignment(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| BenchError::BadValue {
                key: assignment.into(),
                detail: "expected key=value".into(),
            })?;
        self.set(key.trim(), value.trim());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    /// Effective assignments, last one per key, in first-seen key order.
    pub fn resolved(&self) -> Vec<(&str, &str)> {
        let mut out: Vec<(&str, &str)> = Vec::new();
        for (k, v) in &self.entries {
            match out.iter_mut().find(|(key, _)| key == k) {
                Some(slot) => slot.1 = v,
                None => out.push((k, v)),
            }
        }
        out
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.resolved() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

pub(crate) fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e: T::Err| BenchError::BadValue {
            key: key.into(),
            detail: format!("`{value}`: {e}"),
        })
}

pub(crate) fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    let items: Vec<T> = value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_value(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(BenchError::BadValue {
            key: key.into(),
            detail: "empty list".into(),
        });
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_blank_lines_and_overrides() {
        let mut cfg = Config::parse("# grid\nn = 1000, 2000\n\n  reps=3  \nn = 5\n").unwrap();
        cfg.push_assignment("reps = 7").unwrap();
        assert_eq!(cfg.resolved(), vec![("n", "5"), ("reps", "7")]);
        let round_trip = Config::parse(&cfg.to_string()).unwrap();
        assert_eq!(round_trip.resolved(), cfg.resolved());
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(matches!(
            Config::parse("n 1000"),
            Err(BenchError::Config { line: 1, .. })
        ));
        assert!(Config::parse("= 3").is_err());
        assert!(parse_list::<usize>("n", " , ").is_err());
        assert_eq!(parse_list::<usize>("n", "1, 2,3").unwrap(), vec![1, 2, 3]);
        assert!(parse_value::<f64>("c0", "abc").is_err());
    }
}
