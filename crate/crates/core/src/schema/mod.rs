//! Variable catalogue, row validation, portfolios and design-matrix encoding.
//!
//! Values are stored as `f64`. Categorical variables hold the index of their
//! label in [`VariableSpec::categories`].

mod encoding;
mod portfolio;
mod text;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

pub(crate) use encoding::argmax_lowest;
pub use encoding::{
    encode_design_matrix, ColumnEncoding, EncodeOptions, EncodingCodec, RawRecord, RawValue,
};
pub use portfolio::Portfolio;

use crate::{Error, Result};

/// Tolerance on compositional group sums for validated rows.
pub const COMPOSITION_TOLERANCE: f64 = 1e-9;
/// Largest compositional drift that ingest repairs by re-closing the group.
pub const INGEST_CLOSURE_TOLERANCE: f64 = 1e-6;

pub const NB_CLAIM: &str = "NB_Claim";
pub const AMT_CLAIM: &str = "AMT_Claim";
pub const DURATION: &str = "Duration";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VariableKind {
    Categorical,
    Integer,
    Continuous,
    Percentage,
    Compositional,
}

impl VariableKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VariableKind::Categorical => "categorical",
            VariableKind::Integer => "integer",
            VariableKind::Continuous => "continuous",
            VariableKind::Percentage => "percentage",
            VariableKind::Compositional => "compositional",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "categorical" => VariableKind::Categorical,
            "integer" => VariableKind::Integer,
            "continuous" => VariableKind::Continuous,
            "percentage" => VariableKind::Percentage,
            "compositional" => VariableKind::Compositional,
            _ => return None,
        })
    }

    pub fn is_numeric(self) -> bool {
        self != VariableKind::Categorical
    }
}

/// Whether a variable is a model input or one of the two responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Feature,
    Response,
}

/// Closed interval `[low, high]`; `high` may be `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub low: f64,
    pub high: f64,
}

impl Bounds {
    pub const fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.low && x <= self.high
    }

    pub fn clip(&self, x: f64) -> f64 {
        x.max(self.low).min(self.high)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VariableKind,
    pub bounds: Bounds,
    pub categories: Vec<String>,
    pub group: Option<String>,
    pub role: Role,
}

impl VariableSpec {
    pub fn numeric(name: &str, kind: VariableKind, low: f64, high: f64) -> Self {
        Self {
            name: name.to_string(),
            kind,
            bounds: Bounds::new(low, high),
            categories: Vec::new(),
            group: None,
            role: Role::Feature,
        }
    }

    pub fn categorical<S: AsRef<str>>(name: &str, categories: &[S]) -> Self {
        let categories: Vec<String> = categories.iter().map(|c| c.as_ref().to_string()).collect();
        Self {
            name: name.to_string(),
            kind: VariableKind::Categorical,
            bounds: Bounds::new(0.0, categories.len().saturating_sub(1) as f64),
            categories,
            group: None,
            role: Role::Feature,
        }
    }

    pub fn compositional(name: &str, group: &str) -> Self {
        Self {
            group: Some(group.to_string()),
            ..Self::numeric(name, VariableKind::Compositional, 0.0, 1.0)
        }
    }

    pub fn response(mut self) -> Self {
        self.role = Role::Response;
        self
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }

    /// Label for a stored categorical index.
    pub fn label(&self, value: f64) -> Option<&str> {
        if value < 0.0 || value.fract() != 0.0 {
            return None;
        }
        self.categories.get(value as usize).map(String::as_str)
    }
}

/// Pairwise constraint between two variables.
#[derive(Debug, Clone, PartialEq)]
pub enum CrossRule {
    /// `lesser < greater`.
    LessThan { lesser: String, greater: String },
    /// `a == 0` exactly when `b == 0`.
    ZeroIff { a: String, b: String },
}

impl CrossRule {
    fn describe(&self) -> String {
        match self {
            CrossRule::LessThan { lesser, greater } => format!("{lesser} < {greater}"),
            CrossRule::ZeroIff { a, b } => format!("{a} = 0 iff {b} = 0"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rule {
    NonFinite,
    OutOfBounds { low: f64, high: f64 },
    NotIntegral,
    UnknownCategory,
    Cross(String),
    CompositionSum { group: String, sum: f64 },
}

/// A single failed check on one row.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub variable: String,
    pub value: f64,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.rule {
            Rule::NonFinite => write!(f, "{} is not finite", self.variable),
            Rule::OutOfBounds { low, high } => {
                write!(
                    f,
                    "{}={} outside [{}, {}]",
                    self.variable, self.value, low, high
                )
            }
            Rule::NotIntegral => write!(f, "{}={} is not an integer", self.variable, self.value),
            Rule::UnknownCategory => write!(
                f,
                "{}={} is not a category index",
                self.variable, self.value
            ),
            Rule::Cross(rule) => write!(f, "{} violates cross rule {}", self.variable, rule),
            Rule::CompositionSum { group, sum } => {
                write!(f, "group {group} sums to {sum} (at {})", self.variable)
            }
        }
    }
}

/// Ordered variable catalogue. Features come first, responses last.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    variables: Vec<VariableSpec>,
    cross_rules: Vec<CrossRule>,
    comp_groups: BTreeMap<String, Vec<String>>,
    index: HashMap<String, usize>,
    n_features: usize,
}

impl Schema {
    pub fn new(variables: Vec<VariableSpec>, cross_rules: Vec<CrossRule>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, v) in variables.iter().enumerate() {
            if index.insert(v.name.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate variable `{}`",
                    v.name
                )));
            }
            if !(v.bounds.low <= v.bounds.high) {
                return Err(Error::InvalidArgument(format!(
                    "`{}` has low bound above high bound",
                    v.name
                )));
            }
            match v.kind {
                VariableKind::Categorical if v.categories.len() < 2 => {
                    return Err(Error::InvalidArgument(format!(
                        "`{}` needs at least two categories",
                        v.name
                    )));
                }
                VariableKind::Categorical => {}
                _ if !v.categories.is_empty() => {
                    return Err(Error::InvalidArgument(format!(
                        "numeric `{}` cannot carry categories",
                        v.name
                    )));
                }
                VariableKind::Compositional if v.group.is_none() => {
                    return Err(Error::InvalidArgument(format!(
                        "compositional `{}` needs a group",
                        v.name
                    )));
                }
                _ => {}
            }
            if v.group.is_some() && v.kind != VariableKind::Compositional {
                return Err(Error::InvalidArgument(format!(
                    "only compositional variables take a group (`{}`)",
                    v.name
                )));
            }
        }
        let n_features = variables
            .iter()
            .take_while(|v| v.role == Role::Feature)
            .count();
        if variables[n_features..]
            .iter()
            .any(|v| v.role == Role::Feature)
        {
            return Err(Error::InvalidArgument(
                "response variables must follow all features".into(),
            ));
        }
        let mut comp_groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for v in &variables {
            if let Some(g) = &v.group {
                if v.role == Role::Response {
                    return Err(Error::InvalidArgument(format!(
                        "response `{}` cannot be compositional",
                        v.name
                    )));
                }
                comp_groups
                    .entry(g.clone())
                    .or_default()
                    .push(v.name.clone());
            }
        }
        if let Some((g, _)) = comp_groups.iter().find(|(_, m)| m.len() < 2) {
            return Err(Error::InvalidArgument(format!(
                "compositional group `{g}` needs at least two members"
            )));
        }
        for rule in &cross_rules {
            let (a, b) = match rule {
                CrossRule::LessThan { lesser, greater } => (lesser, greater),
                CrossRule::ZeroIff { a, b } => (a, b),
            };
            for name in [a, b] {
                if !index.contains_key(name) {
                    return Err(Error::UnknownVariable(name.clone()));
                }
            }
        }
        Ok(Self {
            variables,
            cross_rules,
            comp_groups,
            index,
            n_features,
        })
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn features(&self) -> &[VariableSpec] {
        &self.variables[..self.n_features]
    }

    pub fn cross_rules(&self) -> &[CrossRule] {
        &self.cross_rules
    }

    /// Group id → member names, in schema order. The last member of each
    /// group is the one reconstructed by closure during generation.
    pub fn comp_groups(&self) -> &BTreeMap<String, Vec<String>> {
        &self.comp_groups
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn lookup(&self, name: &str) -> Option<&VariableSpec> {
        self.index_of(name).map(|i| &self.variables[i])
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.variables.iter().map(|v| v.name.as_str())
    }

    /// Indices of each group's members, keyed like [`Schema::comp_groups`].
    pub fn group_indices(&self) -> Vec<(String, Vec<usize>)> {
        self.comp_groups
            .iter()
            .map(|(g, members)| (g.clone(), members.iter().map(|m| self.index[m]).collect()))
            .collect()
    }

    /// Names of the closure members (last member of every group), in
    /// variable order.
    pub fn closure_members(&self) -> Vec<String> {
        let mut m: Vec<&String> = self.comp_groups.values().filter_map(|m| m.last()).collect();
        m.sort_by_key(|name| self.index[*name]);
        m.into_iter().cloned().collect()
    }

    /// Checks one row. The row holds either every variable or only the
    /// features; any other length is a structural error.
    pub fn validate_row(&self, row: &[f64]) -> Result<Vec<Violation>> {
        if row.len() != self.len() && row.len() != self.n_features {
            return Err(Error::MissingVariable {
                expected: self.len(),
                found: row.len(),
            });
        }
        let mut out = Vec::new();
        for (spec, &x) in self.variables.iter().zip(row) {
            let violation = |rule| Violation {
                variable: spec.name.clone(),
                value: x,
                rule,
            };
            if !x.is_finite() {
                out.push(violation(Rule::NonFinite));
                continue;
            }
            match spec.kind {
                VariableKind::Categorical => {
                    if spec.label(x).is_none() {
                        out.push(violation(Rule::UnknownCategory));
                    }
                }
                kind => {
                    if !spec.bounds.contains(x) {
                        out.push(violation(Rule::OutOfBounds {
                            low: spec.bounds.low,
                            high: spec.bounds.high,
                        }));
                    }
                    if kind == VariableKind::Integer && x.fract() != 0.0 {
                        out.push(violation(Rule::NotIntegral));
                    }
                }
            }
        }
        for rule in &self.cross_rules {
            let (a, b) = match rule {
                CrossRule::LessThan { lesser, greater } => {
                    (self.index[lesser], self.index[greater])
                }
                CrossRule::ZeroIff { a, b } => (self.index[a], self.index[b]),
            };
            if a >= row.len() || b >= row.len() {
                continue;
            }
            let ok = match rule {
                CrossRule::LessThan { .. } => row[a] < row[b],
                CrossRule::ZeroIff { .. } => (row[a] == 0.0) == (row[b] == 0.0),
            };
            if !ok {
                out.push(Violation {
                    variable: self.variables[a].name.clone(),
                    value: row[a],
                    rule: Rule::Cross(rule.describe()),
                });
            }
        }
        for (group, members) in self.group_indices() {
            let sum: f64 = members.iter().map(|&i| row[i]).sum();
            if !((sum - 1.0).abs() <= COMPOSITION_TOLERANCE) {
                out.push(Violation {
                    variable: self.variables[members[0]].name.clone(),
                    value: row[members[0]],
                    rule: Rule::CompositionSum { group, sum },
                });
            }
        }
        Ok(out)
    }

    /// Divides every compositional group by its sum when the sum is within
    /// [`INGEST_CLOSURE_TOLERANCE`] of one. Larger drifts are left for
    /// validation to report.
    pub fn reclose(&self, row: &mut [f64]) {
        for (_, members) in self.group_indices() {
            if members.iter().any(|&i| i >= row.len()) {
                continue;
            }
            let sum: f64 = members.iter().map(|&i| row[i]).sum();
            if sum > 0.0 && (sum - 1.0).abs() <= INGEST_CLOSURE_TOLERANCE {
                for &i in &members {
                    row[i] /= sum;
                }
            }
        }
    }
}

const WEEKDAYS: [&str; 7] = ["mon", "tue", "wed", "thr", "fri", "sat", "sun"];
const HARSH_THRESHOLDS: [&str; 6] = ["06", "08", "09", "11", "12", "14"];
const TURN_INTENSITIES: [&str; 5] = ["08", "09", "10", "11", "12"];

/// The 55 territory codes: `11..=17, 21..=27, ..., 71..=77, 81..=85, 91`.
pub fn territory_codes() -> Vec<String> {
    let mut codes = Vec::with_capacity(55);
    for tens in 1..=8 {
        let last = if tens == 8 { 5 } else { 7 };
        for units in 1..=last {
            codes.push(format!("{tens}{units}"));
        }
    }
    codes.push("91".to_string());
    codes
}

/// The 52-variable telematics catalogue: 11 traditional features, 39
/// telematics features and the two responses.
pub fn default_schema() -> Schema {
    use VariableKind::*;
    let mut v = vec![
        VariableSpec::numeric("Duration", Integer, 22.0, 366.0),
        VariableSpec::numeric("Insured.age", Integer, 16.0, 103.0),
        VariableSpec::categorical("Insured.sex", &["Male", "Female"]),
        VariableSpec::numeric("Car.age", Integer, -2.0, 20.0),
        VariableSpec::categorical("Marital", &["Married", "Single"]),
        VariableSpec::categorical("Car.use", &["Private", "Commute", "Farmer", "Commercial"]),
        VariableSpec::numeric("Credit.score", Integer, 300.0, 900.0),
        VariableSpec::categorical("Region", &["Rural", "Urban"]),
        VariableSpec::numeric("Annual.miles.drive", Continuous, 0.0, 100_000.0),
        VariableSpec::numeric("Years.noclaims", Integer, 0.0, 79.0),
        VariableSpec::categorical("Territory", &territory_codes()),
        VariableSpec::numeric("Annual.pct.driven", Percentage, 0.0, 1.1),
        VariableSpec::numeric("Total.miles.driven", Continuous, 0.0, 100_000.0),
    ];
    for day in WEEKDAYS {
        v.push(VariableSpec::compositional(
            &format!("Pct.drive.{day}"),
            "weekday",
        ));
    }
    for hrs in ["2hrs", "3hrs", "4hrs"] {
        v.push(VariableSpec::numeric(
            &format!("Pct.drive.{hrs}"),
            Percentage,
            0.0,
            1.0,
        ));
    }
    v.push(VariableSpec::compositional("Pct.drive.wkday", "week_part"));
    v.push(VariableSpec::compositional("Pct.drive.wkend", "week_part"));
    v.push(VariableSpec::numeric(
        "Pct.drive.rush.am",
        Percentage,
        0.0,
        1.0,
    ));
    v.push(VariableSpec::numeric(
        "Pct.drive.rush.pm",
        Percentage,
        0.0,
        1.0,
    ));
    v.push(VariableSpec::numeric("Avgdays.week", Continuous, 0.0, 7.0));
    for prefix in ["Accel", "Brake"] {
        for t in HARSH_THRESHOLDS {
            v.push(VariableSpec::numeric(
                &format!("{prefix}.{t}miles"),
                Integer,
                0.0,
                100_000.0,
            ));
        }
    }
    for side in ["Left", "Right"] {
        for t in TURN_INTENSITIES {
            v.push(VariableSpec::numeric(
                &format!("{side}.turn.intensity{t}"),
                Integer,
                0.0,
                100_000.0,
            ));
        }
    }
    v.push(VariableSpec::numeric(NB_CLAIM, Integer, 0.0, 3.0).response());
    v.push(VariableSpec::numeric(AMT_CLAIM, Continuous, 0.0, f64::INFINITY).response());
    let rules = vec![
        CrossRule::LessThan {
            lesser: "Years.noclaims".into(),
            greater: "Insured.age".into(),
        },
        CrossRule::ZeroIff {
            a: AMT_CLAIM.into(),
            b: NB_CLAIM.into(),
        },
    ];
    Schema::new(v, rules).expect("default schema is well formed")
}
