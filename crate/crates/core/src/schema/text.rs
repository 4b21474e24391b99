//! Key-value text form of a [`Schema`], one variable per line:
//!
//! ```text
//! var Duration kind=integer low=22 high=366
//! var Car.use kind=categorical categories=Private,Commute,Farmer,Commercial
//! var Pct.drive.mon kind=compositional low=0 high=1 group=weekday
//! var NB_Claim kind=integer low=0 high=3 role=response
//! rule less_than Years.noclaims Insured.age
//! rule zero_iff AMT_Claim NB_Claim
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;

use super::{Bounds, CrossRule, Role, Schema, VariableKind, VariableSpec};
use crate::{Error, Result};

impl Schema {
    pub fn to_text(&self) -> String {
        let mut out = String::from("# telesynth schema v1\n");
        for v in self.variables() {
            let _ = write!(out, "var {} kind={}", v.name, v.kind.as_str());
            if v.kind == VariableKind::Categorical {
                let _ = write!(out, " categories={}", v.categories.join(","));
            } else {
                let _ = write!(out, " low={:?} high={:?}", v.bounds.low, v.bounds.high);
            }
            if let Some(g) = &v.group {
                let _ = write!(out, " group={g}");
            }
            if v.role == Role::Response {
                out.push_str(" role=response");
            }
            out.push('\n');
        }
        for rule in self.cross_rules() {
            match rule {
                CrossRule::LessThan { lesser, greater } => {
                    let _ = writeln!(out, "rule less_than {lesser} {greater}");
                }
                CrossRule::ZeroIff { a, b } => {
                    let _ = writeln!(out, "rule zero_iff {a} {b}");
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut variables = Vec::new();
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tokens = line.split_whitespace();
            match tokens.next() {
                Some("var") => variables.push(parse_var(line_no, tokens)?),
                Some("rule") => {
                    let kind = tokens.next();
                    let a = tokens.next().map(str::to_string);
                    let b = tokens.next().map(str::to_string);
                    let (Some(a), Some(b)) = (a, b) else {
                        return Err(Error::parse(line_no, "rule needs two variable names"));
                    };
                    rules.push(match kind {
                        Some("less_than") => CrossRule::LessThan {
                            lesser: a,
                            greater: b,
                        },
                        Some("zero_iff") => CrossRule::ZeroIff { a, b },
                        other => {
                            return Err(Error::parse(line_no, format!("unknown rule {other:?}")))
                        }
                    });
                }
                Some(other) => return Err(Error::parse(line_no, format!("unexpected `{other}`"))),
                None => {}
            }
        }
        Schema::new(variables, rules)
    }
}

fn parse_var<'a>(line: usize, mut tokens: impl Iterator<Item = &'a str>) -> Result<VariableSpec> {
    let name = tokens
        .next()
        .ok_or_else(|| Error::parse(line, "missing variable name"))?;
    let mut kind = None;
    let mut low = None;
    let mut high = None;
    let mut categories = Vec::new();
    let mut group = None;
    let mut role = Role::Feature;
    for tok in tokens {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| Error::parse(line, format!("expected key=value, got `{tok}`")))?;
        let number = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::parse(line, format!("`{key}` is not a number: `{v}`")))
        };
        match key {
            "kind" => {
                kind = Some(
                    VariableKind::parse(value)
                        .ok_or_else(|| Error::parse(line, format!("unknown kind `{value}`")))?,
                )
            }
            "low" => low = Some(number(value)?),
            "high" => high = Some(number(value)?),
            "categories" => categories = value.split(',').map(str::to_string).collect(),
            "group" => group = Some(value.to_string()),
            "role" => {
                role = match value {
                    "response" => Role::Response,
                    "feature" => Role::Feature,
                    _ => return Err(Error::parse(line, format!("unknown role `{value}`"))),
                }
            }
            _ => return Err(Error::parse(line, format!("unknown key `{key}`"))),
        }
    }
    let kind = kind.ok_or_else(|| Error::parse(line, "missing kind"))?;
    let mut spec = if kind == VariableKind::Categorical {
        VariableSpec::categorical(name, &categories)
    } else {
        let (Some(low), Some(high)) = (low, high) else {
            return Err(Error::parse(line, "numeric variables need low and high"));
        };
        let mut s = VariableSpec::numeric(name, kind, low, high);
        s.categories = categories;
        s.bounds = Bounds::new(low, high);
        s
    };
    spec.group = group;
    spec.role = role;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::super::default_schema;
    use super::*;

    #[test]
    fn default_schema_text_round_trips() {
        let s = default_schema();
        let text = s.to_text();
        assert!(text.contains("var Duration kind=integer low=22.0 high=366.0"));
        assert!(text.contains("var AMT_Claim kind=continuous low=0.0 high=inf role=response"));
        assert_eq!(Schema::from_text(&text).unwrap(), s);
    }

    #[test]
    fn custom_schema_parses() {
        let text = "\
# two features and a response
var x kind=continuous low=0 high=10
var c kind=categorical categories=a,b,c
var p kind=compositional low=0 high=1 group=g
var q kind=compositional low=0 high=1 group=g
var y kind=integer low=0 high=3 role=response
rule less_than x y
";
        let s = Schema::from_text(text).unwrap();
        assert_eq!(s.n_features(), 4);
        assert_eq!(s.lookup("c").unwrap().categories.len(), 3);
        assert_eq!(s.comp_groups()["g"], vec!["p", "q"]);
    }

    #[test]
    fn bad_lines_report_line_numbers() {
        let err = Schema::from_text("var x kind=integer low=0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = Schema::from_text("\nvar x kind=wat low=0 high=1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
