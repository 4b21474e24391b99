use std::sync::Arc;

use rayon::prelude::*;

use super::{Schema, Violation, AMT_CLAIM, NB_CLAIM};
use crate::{Error, Result};

/// Row-major table of values laid out in schema order. A portfolio either
/// carries every schema variable or only the features.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    schema: Arc<Schema>,
    has_responses: bool,
    data: Vec<f64>,
    n_rows: usize,
    validated: bool,
}

impl Portfolio {
    /// Builds a portfolio and checks every row, failing with all violations.
    pub fn new(schema: Arc<Schema>, has_responses: bool, data: Vec<f64>) -> Result<Self> {
        let p = Self::new_raw(schema, has_responses, data)?;
        let violations = p.violations()?;
        if !violations.is_empty() {
            return Err(Error::Validation { violations });
        }
        Ok(Self {
            validated: true,
            ..p
        })
    }

    /// Builds a portfolio without validating its rows.
    pub fn new_raw(schema: Arc<Schema>, has_responses: bool, data: Vec<f64>) -> Result<Self> {
        let width = if has_responses {
            schema.len()
        } else {
            schema.n_features()
        };
        if width == 0 || data.len() % width != 0 {
            return Err(Error::Dimension {
                expected: width,
                found: data.len() % width.max(1),
            });
        }
        Ok(Self {
            n_rows: data.len() / width,
            schema,
            has_responses,
            data,
            validated: false,
        })
    }

    pub fn empty(schema: Arc<Schema>, has_responses: bool) -> Self {
        Self {
            schema,
            has_responses,
            data: Vec::new(),
            n_rows: 0,
            validated: true,
        }
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn has_responses(&self) -> bool {
        self.has_responses
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn width(&self) -> usize {
        if self.has_responses {
            self.schema.len()
        } else {
            self.schema.n_features()
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.width())
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.schema.require(name)?;
        if j >= self.width() {
            return Err(Error::InvalidArgument(format!(
                "portfolio has no `{name}` column"
            )));
        }
        Ok(self.rows().map(|r| r[j]).collect())
    }

    pub fn claim_counts(&self) -> Result<Vec<f64>> {
        self.column(NB_CLAIM)
    }

    pub fn claim_amounts(&self) -> Result<Vec<f64>> {
        self.column(AMT_CLAIM)
    }

    /// All `(row index, violation)` pairs, in row order.
    pub fn violations(&self) -> Result<Vec<(usize, Violation)>> {
        let per_row: Vec<Vec<Violation>> = self
            .data
            .par_chunks_exact(self.width())
            .map(|row| self.schema.validate_row(row))
            .collect::<Result<_>>()?;
        Ok(per_row
            .into_iter()
            .enumerate()
            .flat_map(|(i, v)| v.into_iter().map(move |x| (i, x)))
            .collect())
    }

    /// Drops the response columns.
    pub fn features_only(&self) -> Portfolio {
        if !self.has_responses {
            return self.clone();
        }
        let nf = self.schema.n_features();
        let data = self.rows().flat_map(|r| r[..nf].iter().copied()).collect();
        Portfolio {
            schema: self.schema.clone(),
            has_responses: false,
            data,
            n_rows: self.n_rows,
            validated: self.validated,
        }
    }

    /// Appends response columns to a features-only portfolio and validates
    /// the result.
    pub fn with_responses(&self, responses: &[Vec<f64>]) -> Result<Portfolio> {
        if self.has_responses {
            return Err(Error::InvalidArgument(
                "portfolio already has responses".into(),
            ));
        }
        let nr = self.schema.len() - self.schema.n_features();
        if responses.len() != self.n_rows {
            return Err(Error::Dimension {
                expected: self.n_rows,
                found: responses.len(),
            });
        }
        let mut data = Vec::with_capacity(self.n_rows * self.schema.len());
        for (row, resp) in self.rows().zip(responses) {
            if resp.len() != nr {
                return Err(Error::Dimension {
                    expected: nr,
                    found: resp.len(),
                });
            }
            data.extend_from_slice(row);
            data.extend_from_slice(resp);
        }
        Portfolio::new(self.schema.clone(), true, data)
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, indices: &[usize]) -> Portfolio {
        let data = indices
            .iter()
            .flat_map(|&i| self.row(i).iter().copied())
            .collect();
        Portfolio {
            schema: self.schema.clone(),
            has_responses: self.has_responses,
            data,
            n_rows: indices.len(),
            validated: self.validated,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::default_schema;
    use super::*;

    fn valid_row(schema: &Schema) -> Vec<f64> {
        let mut row: Vec<f64> = schema.variables().iter().map(|v| v.bounds.low).collect();
        for (_, m) in schema.group_indices() {
            row[*m.last().unwrap()] = 1.0;
        }
        row
    }

    #[test]
    fn construction_validates_rows() {
        let schema = Arc::new(default_schema());
        let mut data = valid_row(&schema);
        data.extend(valid_row(&schema));
        let p = Portfolio::new(schema.clone(), true, data.clone()).unwrap();
        assert_eq!(p.n_rows(), 2);
        assert!(p.is_validated());
        data[0] = 1.0; // Duration below 22
        let err = Portfolio::new(schema.clone(), true, data.clone()).unwrap_err();
        assert!(matches!(err, Error::Validation { ref violations } if violations.len() == 1));
        let raw = Portfolio::new_raw(schema, true, data).unwrap();
        assert!(!raw.is_validated());
    }

    #[test]
    fn features_and_responses_split_and_join() {
        let schema = Arc::new(default_schema());
        let p = Portfolio::new(schema, true, valid_row(&default_schema())).unwrap();
        let f = p.features_only();
        assert_eq!(f.width(), 50);
        let back = f.with_responses(&[vec![0.0, 0.0]]).unwrap();
        assert_eq!(back, p);
        assert!(f.with_responses(&[vec![1.0, 0.0]]).is_err());
    }
}
