//! Portfolio CSV files: one header row of schema names, categorical values
//! written as labels, reals in shortest round-trip form.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::schema::{Portfolio, Schema, VariableKind};
use crate::{Error, Result};

fn csv_error(path: Option<&Path>, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path.map(Path::to_path_buf).unwrap_or_default(), io),
        other => Error::parse(line, format!("{other:?}")),
    }
}

fn format_value(kind: VariableKind, categories: &[String], x: f64) -> String {
    match kind {
        VariableKind::Categorical => categories[x as usize].clone(),
        // `+ 0.0` turns a negative zero into zero.
        _ => format!("{}", x + 0.0),
    }
}

pub fn write_csv_to<W: Write>(p: &Portfolio, out: W) -> Result<()> {
    let schema = p.schema();
    let vars = &schema.variables()[..p.width()];
    let mut w = csv::Writer::from_writer(out);
    w.write_record(vars.iter().map(|v| v.name.as_str()))
        .map_err(|e| csv_error(None, e))?;
    let mut cells = Vec::with_capacity(vars.len());
    for row in p.rows() {
        cells.clear();
        for (v, &x) in vars.iter().zip(row) {
            if v.kind == VariableKind::Categorical && v.label(x).is_none() {
                return Err(Error::UnknownCategory {
                    variable: v.name.clone(),
                    label: x.to_string(),
                });
            }
            cells.push(format_value(v.kind, &v.categories, x));
        }
        w.write_record(&cells).map_err(|e| csv_error(None, e))?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_csv(p: &Portfolio, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(f);
    write_csv_to(p, &mut out)?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn portfolio_to_csv_string(p: &Portfolio) -> Result<String> {
    let mut buf = Vec::new();
    write_csv_to(p, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Column `k` of the file holds schema variable `order[k]`.
fn resolve_header(schema: &Schema, header: &[String]) -> Result<(bool, Vec<usize>)> {
    let names: Vec<&str> = schema.names().collect();
    let features = &names[..schema.n_features()];
    let has_responses =
        header.len() > features.len() || header.iter().any(|h| !features.contains(&h.as_str()));
    let expected: &[&str] = if has_responses { &names } else { features };
    let missing: Vec<String> = expected
        .iter()
        .filter(|n| !header.iter().any(|h| h == *n))
        .map(|n| n.to_string())
        .collect();
    let mut extra: Vec<String> = header
        .iter()
        .filter(|h| !expected.contains(&h.as_str()))
        .cloned()
        .collect();
    for (i, h) in header.iter().enumerate() {
        if header[..i].contains(h) && !extra.contains(h) {
            extra.push(h.clone());
        }
    }
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::HeaderMismatch { missing, extra });
    }
    let order = header
        .iter()
        .map(|h| schema.index_of(h).expect("checked"))
        .collect();
    Ok((has_responses, order))
}

/// Reads a portfolio without validating its rows. Columns may appear in any
/// order; compositions within the ingest tolerance of one are re-closed.
pub fn read_csv_unvalidated_from<R: Read>(schema: Arc<Schema>, input: R) -> Result<Portfolio> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header: Vec<String> = r
        .headers()
        .map_err(|e| csv_error(None, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let (has_responses, order) = resolve_header(&schema, &header)?;
    let width = order.len();
    let vars = schema.variables();
    let mut data = Vec::new();
    let mut row = vec![0.0; width];
    for record in r.records() {
        let record = record.map_err(|e| csv_error(None, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != width {
            return Err(Error::parse(
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        for (cell, &j) in record.iter().zip(&order) {
            let v = &vars[j];
            let cell = cell.trim();
            row[j] = if v.kind == VariableKind::Categorical {
                v.category_index(cell)
                    .ok_or_else(|| Error::UnknownCategory {
                        variable: v.name.clone(),
                        label: cell.to_string(),
                    })? as f64
            } else {
                cell.parse::<f64>().map_err(|_| {
                    Error::parse(
                        line,
                        format!("column `{}`: `{cell}` is not a number", v.name),
                    )
                })?
            };
        }
        schema.reclose(&mut row);
        data.extend_from_slice(&row);
    }
    if data.is_empty() {
        return Ok(Portfolio::empty(schema, has_responses));
    }
    Portfolio::new_raw(schema, has_responses, data)
}

/// Reads and validates a portfolio.
pub fn read_csv_from<R: Read>(schema: Arc<Schema>, input: R) -> Result<Portfolio> {
    let p = read_csv_unvalidated_from(schema.clone(), input)?;
    Portfolio::new(schema, p.has_responses(), p.data().to_vec())
}

pub fn read_csv(path: &Path, schema: Arc<Schema>) -> Result<Portfolio> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_from(schema, BufReader::new(f)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_csv_unvalidated(path: &Path, schema: Arc<Schema>) -> Result<Portfolio> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_unvalidated_from(schema, BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{default_schema, VariableSpec};

    fn tiny() -> Arc<Schema> {
        Arc::new(
            Schema::new(
                vec![
                    VariableSpec::numeric("Duration", VariableKind::Integer, 22.0, 366.0),
                    VariableSpec::categorical("Region", &["Rural", "Urban"]),
                    VariableSpec::numeric("x", VariableKind::Continuous, -10.0, 10.0),
                    VariableSpec::compositional("a", "g"),
                    VariableSpec::compositional("b", "g"),
                ],
                vec![],
            )
            .unwrap(),
        )
    }

    fn sample() -> Portfolio {
        let data = vec![
            366.0,
            1.0,
            0.1,
            0.25,
            0.75, //
            22.0,
            0.0,
            -3.3333333333333335,
            1.0,
            0.0, //
            100.0,
            1.0,
            1e-300,
            0.6,
            0.4,
        ];
        Portfolio::new(tiny(), false, data).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let p = sample();
        let text = portfolio_to_csv_string(&p).unwrap();
        assert!(text.starts_with("Duration,Region,x,a,b\n366,Urban,0.1,"));
        let back = read_csv_from(tiny(), text.as_bytes()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn missing_column_is_named() {
        let text = "Duration,Region,x,a\n366,Urban,0.1,1\n";
        match read_csv_from(tiny(), text.as_bytes()) {
            Err(Error::HeaderMismatch { missing, extra }) => {
                assert_eq!(missing, vec!["b"]);
                assert!(extra.is_empty());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn default_schema_header_with_one_column_absent() {
        let schema = Arc::new(default_schema());
        let names: Vec<&str> = schema.names().filter(|n| *n != "Credit.score").collect();
        let text = format!("{}\n", names.join(","));
        match read_csv_from(schema, text.as_bytes()) {
            Err(Error::HeaderMismatch { missing, .. }) => assert_eq!(missing, vec!["Credit.score"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_number_cites_line() {
        let text = "Duration,Region,x,a,b\n366,Urban,0.1,0.5,0.5\nabc,Urban,0.1,0.5,0.5\n";
        match read_csv_from(tiny(), text.as_bytes()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("Duration"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_label_is_rejected() {
        let text = "Duration,Region,x,a,b\n366,Suburb,0.1,0.5,0.5\n";
        assert!(matches!(
            read_csv_from(tiny(), text.as_bytes()),
            Err(Error::UnknownCategory { .. })
        ));
    }

    #[test]
    fn reordered_columns_and_small_drift_are_accepted() {
        let text = "b,a,x,Region,Duration\n0.5000004,0.5,0.1,Rural,30\n";
        let p = read_csv_from(tiny(), text.as_bytes()).unwrap();
        let row = p.row(0);
        assert_eq!(row[0], 30.0);
        assert!((row[3] + row[4] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_rows_fail_validation_unless_raw() {
        let text = "Duration,Region,x,a,b\n400,Urban,0.1,0.5,0.5\n";
        assert!(matches!(
            read_csv_from(tiny(), text.as_bytes()),
            Err(Error::Validation { .. })
        ));
        let raw = read_csv_unvalidated_from(tiny(), text.as_bytes()).unwrap();
        assert!(!raw.is_validated());
    }

    #[test]
    fn header_only_file_is_empty_portfolio() {
        let p = read_csv_from(tiny(), "Duration,Region,x,a,b\n".as_bytes()).unwrap();
        assert!(p.is_empty());
    }
}
