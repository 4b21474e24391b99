//! Design-matrix encoding: binary categoricals become one 0/1 column,
//! multi-class categoricals a full one-hot block, numeric variables pass
//! through (optionally standardized with the sample standard deviation).

use std::fmt::Write as _;

use ndarray::Array2;

use super::{Portfolio, Schema, VariableKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ColumnEncoding {
    /// `encoded = (x - mean) / scale`; a zero scale encodes as 0.
    Numeric {
        variable: usize,
        column: usize,
        mean: f64,
        scale: f64,
    },
    Binary {
        variable: usize,
        column: usize,
    },
    OneHot {
        variable: usize,
        start: usize,
        width: usize,
    },
}

impl ColumnEncoding {
    pub fn variable(&self) -> usize {
        match *self {
            ColumnEncoding::Numeric { variable, .. }
            | ColumnEncoding::Binary { variable, .. }
            | ColumnEncoding::OneHot { variable, .. } => variable,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct EncodeOptions {
    pub standardize: bool,
    /// Feature names left out of the matrix.
    pub exclude: Vec<String>,
}

/// Column layout plus the per-column shift and scale needed to invert the
/// numeric part of an encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingCodec {
    features: Vec<String>,
    layout: Vec<ColumnEncoding>,
    width: usize,
    standardized: bool,
    excluded: Vec<String>,
}

/// A decoded row before any post-processing, one entry per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub values: Vec<RawValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Numeric(f64),
    /// Indicator value per category, in category order.
    Indicators(Vec<f64>),
    /// Excluded from the encoding.
    Missing,
}

/// Fits a codec on `p` (all features) and encodes it.
pub fn encode_design_matrix(
    p: &Portfolio,
    standardize: bool,
) -> Result<(Array2<f64>, EncodingCodec)> {
    let codec = EncodingCodec::fit(
        p,
        &EncodeOptions {
            standardize,
            exclude: Vec::new(),
        },
    )?;
    let m = codec.encode(p)?;
    Ok((m, codec))
}

fn mean_and_sample_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

impl EncodingCodec {
    pub fn fit(p: &Portfolio, options: &EncodeOptions) -> Result<Self> {
        let schema = p.schema();
        for name in &options.exclude {
            let j = schema.require(name)?;
            if j >= schema.n_features() {
                return Err(Error::InvalidArgument(format!(
                    "cannot exclude response `{name}`"
                )));
            }
        }
        let mut layout = Vec::new();
        let mut column = 0;
        for (j, spec) in schema.features().iter().enumerate() {
            if options.exclude.iter().any(|e| e == &spec.name) {
                continue;
            }
            match spec.kind {
                VariableKind::Categorical if spec.categories.len() == 2 => {
                    layout.push(ColumnEncoding::Binary {
                        variable: j,
                        column,
                    });
                    column += 1;
                }
                VariableKind::Categorical => {
                    let width = spec.categories.len();
                    layout.push(ColumnEncoding::OneHot {
                        variable: j,
                        start: column,
                        width,
                    });
                    column += width;
                }
                _ => {
                    let (mean, scale) = if options.standardize {
                        mean_and_sample_sd(&p.rows().map(|r| r[j]).collect::<Vec<_>>())
                    } else {
                        (0.0, 1.0)
                    };
                    layout.push(ColumnEncoding::Numeric {
                        variable: j,
                        column,
                        mean,
                        scale,
                    });
                    column += 1;
                }
            }
        }
        Ok(Self {
            features: schema.features().iter().map(|v| v.name.clone()).collect(),
            layout,
            width: column,
            standardized: options.standardize,
            excluded: options.exclude.clone(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn layout(&self) -> &[ColumnEncoding] {
        &self.layout
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn excluded(&self) -> &[String] {
        &self.excluded
    }

    /// Errors unless `schema` has exactly the features this codec was fit on.
    pub fn check_schema(&self, schema: &Schema) -> Result<()> {
        let names: Vec<&str> = schema.features().iter().map(|v| v.name.as_str()).collect();
        if names.len() != self.features.len()
            || names.iter().zip(&self.features).any(|(a, b)| a != b)
        {
            return Err(Error::EncoderMismatch(format!(
                "codec was fit on {} features, portfolio schema has {}",
                self.features.len(),
                names.len()
            )));
        }
        Ok(())
    }

    /// Name of every encoded column: the variable name for numeric and binary
    /// columns, `name=label` for each one-hot category.
    pub fn column_names(&self, schema: &Schema) -> Vec<String> {
        let mut names = vec![String::new(); self.width];
        for c in &self.layout {
            let spec = &schema.variables()[c.variable()];
            match *c {
                ColumnEncoding::Numeric { column, .. } => names[column] = spec.name.clone(),
                ColumnEncoding::Binary { column, .. } => {
                    names[column] = format!("{}={}", spec.name, spec.categories[1]);
                }
                ColumnEncoding::OneHot { start, width, .. } => {
                    for k in 0..width {
                        names[start + k] = format!("{}={}", spec.name, spec.categories[k]);
                    }
                }
            }
        }
        names
    }

    /// Encoded column index of each numeric feature, if present.
    pub fn numeric_column(&self, variable: usize) -> Option<usize> {
        self.layout.iter().find_map(|c| match *c {
            ColumnEncoding::Numeric {
                variable: v,
                column,
                ..
            } if v == variable => Some(column),
            _ => None,
        })
    }

    pub fn encode_row_into(&self, schema: &Schema, row: &[f64], out: &mut [f64]) -> Result<()> {
        for c in &self.layout {
            match *c {
                ColumnEncoding::Numeric {
                    variable,
                    column,
                    mean,
                    scale,
                } => {
                    out[column] = if scale > 0.0 {
                        (row[variable] - mean) / scale
                    } else {
                        0.0
                    };
                }
                ColumnEncoding::Binary { variable, column } => {
                    let x = row[variable];
                    if x != 0.0 && x != 1.0 {
                        return Err(unknown_category(schema, variable, x));
                    }
                    out[column] = x;
                }
                ColumnEncoding::OneHot {
                    variable,
                    start,
                    width,
                } => {
                    let x = row[variable];
                    if x < 0.0 || x.fract() != 0.0 || x as usize >= width {
                        return Err(unknown_category(schema, variable, x));
                    }
                    out[start..start + width].iter_mut().for_each(|v| *v = 0.0);
                    out[start + x as usize] = 1.0;
                }
            }
        }
        Ok(())
    }

    pub fn encode(&self, p: &Portfolio) -> Result<Array2<f64>> {
        self.check_schema(p.schema())?;
        let mut m = Array2::<f64>::zeros((p.n_rows(), self.width));
        for (i, row) in p.rows().enumerate() {
            let out = m.row_mut(i).into_slice().expect("standard layout");
            self.encode_row_into(p.schema(), row, out)?;
        }
        Ok(m)
    }

    /// Inverts the affine part of the encoding; categorical blocks come back
    /// as raw indicator values.
    pub fn decode_row(&self, encoded: &[f64]) -> Result<RawRecord> {
        if encoded.len() != self.width {
            return Err(Error::Dimension {
                expected: self.width,
                found: encoded.len(),
            });
        }
        let mut values = vec![RawValue::Missing; self.features.len()];
        for c in &self.layout {
            match *c {
                ColumnEncoding::Numeric {
                    variable,
                    column,
                    mean,
                    scale,
                } => values[variable] = RawValue::Numeric(mean + encoded[column] * scale),
                ColumnEncoding::Binary { variable, column } => {
                    let z = encoded[column];
                    values[variable] = RawValue::Indicators(vec![1.0 - z, z]);
                }
                ColumnEncoding::OneHot {
                    variable,
                    start,
                    width,
                } => {
                    values[variable] = RawValue::Indicators(encoded[start..start + width].to_vec());
                }
            }
        }
        Ok(RawRecord { values })
    }

    pub fn decode(&self, m: &Array2<f64>) -> Result<Vec<RawRecord>> {
        m.rows()
            .into_iter()
            .map(|r| self.decode_row(&r.to_vec()))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("codec v1\n");
        let _ = writeln!(out, "standardized {}", self.standardized);
        let _ = writeln!(out, "features {}", self.features.join(","));
        let _ = writeln!(out, "exclude {}", self.excluded.join(","));
        for c in &self.layout {
            let name = &self.features[c.variable()];
            let _ = match *c {
                ColumnEncoding::Numeric {
                    column,
                    mean,
                    scale,
                    ..
                } => {
                    writeln!(out, "numeric {name} {column} {mean:?} {scale:?}")
                }
                ColumnEncoding::Binary { column, .. } => writeln!(out, "binary {name} {column}"),
                ColumnEncoding::OneHot { start, width, .. } => {
                    writeln!(out, "onehot {name} {start} {width}")
                }
            };
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| {
            lines
                .next()
                .map(|(i, l)| (i + 1, l.trim()))
                .ok_or_else(|| Error::parse(0, format!("codec ends before {what}")))
        };
        let (line, header) = next("header")?;
        if header != "codec v1" {
            return Err(Error::parse(line, "expected `codec v1`"));
        }
        let field = |(line, l): (usize, &str), key: &str| -> Result<String> {
            l.strip_prefix(key)
                .map(|rest| rest.trim().to_string())
                .ok_or_else(|| Error::parse(line, format!("expected `{key}`")))
        };
        let standardized = field(next("standardized")?, "standardized")? == "true";
        let features: Vec<String> = field(next("features")?, "features")?
            .split(',')
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        let excluded: Vec<String> = field(next("exclude")?, "exclude")?
            .split(',')
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        let mut layout = Vec::new();
        let mut width = 0;
        for (i, l) in lines {
            let line = i + 1;
            let t: Vec<&str> = l.split_whitespace().collect();
            let var = |name: &str| {
                features
                    .iter()
                    .position(|f| f == name)
                    .ok_or_else(|| Error::parse(line, format!("unknown feature `{name}`")))
            };
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(line, format!("bad number `{s}`")))
            };
            let idx = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::parse(line, format!("bad index `{s}`")))
            };
            let c = match t.as_slice() {
                ["numeric", name, column, mean, scale] => ColumnEncoding::Numeric {
                    variable: var(name)?,
                    column: idx(column)?,
                    mean: num(mean)?,
                    scale: num(scale)?,
                },
                ["binary", name, column] => ColumnEncoding::Binary {
                    variable: var(name)?,
                    column: idx(column)?,
                },
                ["onehot", name, start, w] => ColumnEncoding::OneHot {
                    variable: var(name)?,
                    start: idx(start)?,
                    width: idx(w)?,
                },
                _ => return Err(Error::parse(line, format!("bad codec entry `{l}`"))),
            };
            width = width.max(match c {
                ColumnEncoding::Numeric { column, .. } | ColumnEncoding::Binary { column, .. } => {
                    column + 1
                }
                ColumnEncoding::OneHot { start, width, .. } => start + width,
            });
            layout.push(c);
        }
        Ok(Self {
            features,
            layout,
            width,
            standardized,
            excluded,
        })
    }
}

impl RawRecord {
    /// Exact inverse of encoding: numeric values as decoded, categories by
    /// maximal indicator (ties to the lowest index), excluded values `NaN`.
    pub fn resolve_exact(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| match v {
                RawValue::Numeric(x) => *x,
                RawValue::Indicators(ind) => argmax_lowest(ind) as f64,
                RawValue::Missing => f64::NAN,
            })
            .collect()
    }
}

/// Index of the maximum; ties resolve to the lowest index.
pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn unknown_category(schema: &Schema, variable: usize, value: f64) -> Error {
    Error::UnknownCategory {
        variable: schema.variables()[variable].name.clone(),
        label: value.to_string(),
    }
}
