//! Domain values stored in relation columns.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// A column value. Columns are homogeneous: mixing tags inside one column
/// is rejected at load time, so the cross-tag ordering below only decides
/// a canonical sort order and is never observable through query results.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Str(String),
}

impl Value {
    fn tag_rank(&self) -> u8 {
        match self {
            Value::Int(_) => 0,
            Value::Float(_) => 1,
            Value::Str(_) => 2,
        }
    }

    pub fn tag_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "string",
        }
    }

    pub fn same_tag(&self, other: &Value) -> bool {
        self.tag_rank() == other.tag_rank()
    }

    /// Numeric view used by θ-term evaluation and feature extraction.
    pub fn as_f64(&self) -> Result<f64> {
        match self {
            Value::Int(i) => Ok(*i as f64),
            Value::Float(f) => Ok(*f),
            Value::Str(s) => Err(Error::Data(format!(
                "string value {s:?} has no numeric reading"
            ))),
        }
    }

    /// Parse a CSV cell: integer first, then float, else string.
    pub fn parse_cell(cell: &str) -> Result<Value> {
        let t = cell.trim();
        if let Ok(i) = t.parse::<i64>() {
            return Ok(Value::Int(i));
        }
        if let Ok(f) = t.parse::<f64>() {
            if !f.is_finite() {
                return Err(Error::Data(format!("non-finite float {t:?}")));
            }
            return Ok(Value::Float(f));
        }
        Ok(Value::Str(t.to_string()))
    }
}

impl Eq for Value {}

impl Ord for Value {
    fn cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Float(a), Value::Float(b)) => a.total_cmp(b),
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            _ => self.tag_rank().cmp(&other.tag_rank()),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Value) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Str(s) => write!(f, "{s}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_prefers_int() {
        assert_eq!(Value::parse_cell("42").unwrap(), Value::Int(42));
        assert_eq!(Value::parse_cell("-3").unwrap(), Value::Int(-3));
        assert_eq!(Value::parse_cell("2.5").unwrap(), Value::Float(2.5));
        assert_eq!(
            Value::parse_cell("apple").unwrap(),
            Value::Str("apple".into())
        );
    }

    #[test]
    fn nan_rejected() {
        assert!(Value::parse_cell("NaN").is_err());
        assert!(Value::parse_cell("inf").is_err());
    }

    #[test]
    fn ordering_within_tag() {
        assert!(Value::Int(1) < Value::Int(2));
        assert!(Value::Float(-0.5) < Value::Float(0.5));
        assert!(Value::Str("a".into()) < Value::Str("b".into()));
    }
}
