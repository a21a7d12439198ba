//! Time-series instance type shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Test-station verdict attached to a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    /// Normal operation.
    Ok,
    /// Known error.
    Nok,
}

impl Label {
    pub fn from_flag(flag: u8) -> Result<Self> {
        match flag {
            0 => Ok(Label::Ok),
            1 => Ok(Label::Nok),
            other => Err(Error::Data(format!("label must be 0 or 1, got {other}"))),
        }
    }

    pub fn as_flag(self) -> u8 {
        match self {
            Label::Ok => 0,
            Label::Nok => 1,
        }
    }

    pub fn is_nok(self) -> bool {
        matches!(self, Label::Nok)
    }
}

/// Fixed-length univariate signal with an optional OK/NOK label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub id: String,
    pub values: Vec<f64>,
    pub label: Option<Label>,
}

impl TimeSeries {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Self {
        TimeSeries {
            id: id.into(),
            values,
            label: None,
        }
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = Some(label);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_nok(&self) -> bool {
        self.label.map(Label::is_nok).unwrap_or(false)
    }

    /// Mean of the raw values.
    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Checks that every series in a dataset has the same length and returns it.
pub fn common_length(dataset: &[TimeSeries]) -> Result<usize> {
    let first = dataset
        .first()
        .ok_or_else(|| Error::Data("dataset is empty".into()))?;
    let len = first.len();
    for s in dataset {
        if s.len() != len {
            return Err(Error::Data(format!(
                "inconsistent series lengths: `{}` has {} points, expected {}",
                s.id,
                s.len(),
                len
            )));
        }
    }
    Ok(len)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_flags_round_trip() {
        assert_eq!(Label::from_flag(0).unwrap(), Label::Ok);
        assert_eq!(Label::from_flag(1).unwrap(), Label::Nok);
        assert!(Label::from_flag(2).is_err());
        assert_eq!(Label::Nok.as_flag(), 1);
    }

    #[test]
    fn common_length_rejects_ragged_data() {
        let data = vec![
            TimeSeries::new("a", vec![1.0, 2.0]),
            TimeSeries::new("b", vec![1.0, 2.0, 3.0]),
        ];
        assert!(common_length(&data).is_err());
        assert!(common_length(&[]).is_err());
        assert_eq!(common_length(&data[..1]).unwrap(), 2);
    }
}
