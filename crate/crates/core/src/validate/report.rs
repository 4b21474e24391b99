//! Side-by-side fidelity report for a source and a synthetic portfolio.

use std::fmt::Write as _;

use ndarray::Axis;

use super::glm::{fit_glm, predict_glm, Family, GlmFit};
use super::stats::{
    claim_mix, pure_premiums, qq_points, stats_by_count, CountSummary, SummaryStats,
};
use crate::schema::{EncodeOptions, EncodingCodec, Portfolio, DURATION};
use crate::{Error, Result};

/// Frequency and severity GLMs fitted on one portfolio, with the codec that
/// builds their design matrices.
#[derive(Debug, Clone)]
pub struct FidelityModels {
    pub codec: EncodingCodec,
    pub frequency: GlmFit<f64>,
    pub severity: GlmFit<f64>,
}

fn require_responses(p: &Portfolio) -> Result<()> {
    if !p.has_responses() {
        return Err(Error::InvalidArgument(
            "portfolio has no response columns".into(),
        ));
    }
    Ok(())
}

fn claimant_rows(counts: &[f64]) -> Vec<usize> {
    (0..counts.len()).filter(|&i| counts[i] > 0.0).collect()
}

impl FidelityModels {
    /// Poisson on `NB_Claim` with offset `log Duration`; gamma on
    /// `AMT_Claim / NB_Claim` over claimants with weights `NB_Claim`.
    pub fn fit(p: &Portfolio, codec: &EncodingCodec) -> Result<Self> {
        let frequency = fit_frequency(p, codec)?;
        let severity = fit_severity(p, codec)?;
        Ok(Self {
            codec: codec.clone(),
            frequency,
            severity,
        })
    }

    /// Expected claims per day of exposure.
    pub fn predict_rate(&self, p: &Portfolio) -> Result<Vec<f64>> {
        let x = self.codec.encode(p)?;
        predict_glm(&self.frequency, x.view(), None)
    }

    /// Expected average claim amount.
    pub fn predict_severity(&self, p: &Portfolio) -> Result<Vec<f64>> {
        let x = self.codec.encode(p)?;
        predict_glm(&self.severity, x.view(), None)
    }

    /// Expected claim count over the policy's duration times expected average
    /// severity.
    pub fn predict_pure_premium(&self, p: &Portfolio) -> Result<Vec<f64>> {
        let x = self.codec.encode(p)?;
        let offset = log_duration(p)?;
        let f = predict_glm(&self.frequency, x.view(), Some(&offset))?;
        let s = predict_glm(&self.severity, x.view(), None)?;
        pure_premiums(&f, &s)
    }
}

fn log_duration(p: &Portfolio) -> Result<Vec<f64>> {
    Ok(p.column(DURATION)?.iter().map(|d| d.ln()).collect())
}

pub fn fit_frequency(p: &Portfolio, codec: &EncodingCodec) -> Result<GlmFit<f64>> {
    require_responses(p)?;
    let x = codec.encode(p)?;
    let y = p.claim_counts()?;
    let offset = log_duration(p)?;
    fit_glm(Family::Poisson, x.view(), &y, Some(&offset), None)
}

pub fn fit_severity(p: &Portfolio, codec: &EncodingCodec) -> Result<GlmFit<f64>> {
    require_responses(p)?;
    let counts = p.claim_counts()?;
    let amounts = p.claim_amounts()?;
    let rows = claimant_rows(&counts);
    if rows.is_empty() {
        return Err(Error::NoClaimants);
    }
    let x = codec.encode(p)?.select(Axis(0), &rows);
    let y: Vec<f64> = rows.iter().map(|&i| amounts[i] / counts[i]).collect();
    let w: Vec<f64> = rows.iter().map(|&i| counts[i]).collect();
    fit_glm(Family::Gamma, x.view(), &y, None, Some(&w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    /// `NB_Claim / Duration` against the predicted daily rate, all policies.
    Frequency,
    /// `AMT_Claim / NB_Claim` against the predicted severity, claimants only.
    Severity,
}

impl CurveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveKind::Frequency => "frequency",
            CurveKind::Severity => "severity",
        }
    }
}

/// One equal-width bin of an observed-versus-predicted curve. Means are
/// `None` for an empty bin.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveBin {
    pub low: f64,
    pub high: f64,
    pub n: usize,
    pub observed_mean: Option<f64>,
    pub observed_sd: Option<f64>,
    pub predicted_mean: Option<f64>,
}

/// Bins `feature` into `bins` equal-width intervals over `range` (the
/// feature's own range when `None`; values outside fall in the edge bins) and
/// averages the observed and predicted responses in each.
pub fn observed_vs_predicted(
    p: &Portfolio,
    models: &FidelityModels,
    feature: &str,
    kind: CurveKind,
    bins: usize,
    range: Option<(f64, f64)>,
) -> Result<Vec<CurveBin>> {
    require_responses(p)?;
    if bins < 2 {
        return Err(Error::InvalidArgument(
            "observed-versus-predicted curves need at least 2 bins".into(),
        ));
    }
    let j = p.schema().require(feature)?;
    if j >= p.schema().n_features() {
        return Err(Error::InvalidArgument(format!(
            "`{feature}` is not a feature"
        )));
    }
    let values = p.column(feature)?;
    let counts = p.claim_counts()?;
    let (rows, observed, predicted): (Vec<usize>, Vec<f64>, Vec<f64>) = match kind {
        CurveKind::Frequency => {
            let durations = p.column(DURATION)?;
            let obs = counts.iter().zip(&durations).map(|(c, d)| c / d).collect();
            ((0..p.n_rows()).collect(), obs, models.predict_rate(p)?)
        }
        CurveKind::Severity => {
            let amounts = p.claim_amounts()?;
            let rows = claimant_rows(&counts);
            let obs = rows.iter().map(|&i| amounts[i] / counts[i]).collect();
            let sub = p.select(&rows);
            let pred = models.predict_severity(&sub)?;
            (rows, obs, pred)
        }
    };
    let (lo, hi) = match range {
        Some(r) => r,
        None => {
            let v = rows.iter().map(|&i| values[i]);
            let lo = v.clone().fold(f64::INFINITY, f64::min);
            let hi = v.fold(f64::NEG_INFINITY, f64::max);
            if lo.is_finite() {
                (lo, hi)
            } else {
                (0.0, 0.0)
            }
        }
    };
    let width = (hi - lo) / bins as f64;
    let mut groups: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); bins];
    for (k, &i) in rows.iter().enumerate() {
        let b = if width > 0.0 {
            (((values[i] - lo) / width).floor().max(0.0) as usize).min(bins - 1)
        } else {
            0
        };
        groups[b].0.push(observed[k]);
        groups[b].1.push(predicted[k]);
    }
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(b, (obs, pred))| {
            let n = obs.len();
            let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
            let observed_mean = mean(&obs);
            let observed_sd = observed_mean.map(|m| {
                if n < 2 {
                    0.0
                } else {
                    (obs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64).sqrt()
                }
            });
            CurveBin {
                low: lo + b as f64 * width,
                high: if b + 1 == bins {
                    hi
                } else {
                    lo + (b + 1) as f64 * width
                },
                n,
                observed_mean,
                observed_sd,
                predicted_mean: mean(&pred),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOptions {
    pub frequency_features: Vec<String>,
    pub severity_features: Vec<String>,
    pub bins: usize,
    pub qq_points: usize,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            frequency_features: ["Annual.pct.driven", "Credit.score", "Pct.drive.tue"]
                .map(String::from)
                .to_vec(),
            severity_features: ["Years.noclaims", "Total.miles.driven"]
                .map(String::from)
                .to_vec(),
            bins: 10,
            qq_points: 99,
        }
    }
}

/// Per-dataset sections of the report.
#[derive(Debug, Clone)]
pub struct DatasetReport {
    pub n_rows: usize,
    pub severity_table: Vec<CountSummary>,
    pub claim_mix: [f64; 4],
    /// Fitted models, or the error message when a fit failed.
    pub models: std::result::Result<FidelityModels, String>,
}

#[derive(Debug, Clone)]
pub struct Curve {
    pub feature: String,
    pub kind: CurveKind,
    pub real: std::result::Result<Vec<CurveBin>, String>,
    pub synthetic: std::result::Result<Vec<CurveBin>, String>,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub column_names: Vec<String>,
    pub real: DatasetReport,
    pub synthetic: DatasetReport,
    pub curves: Vec<Curve>,
    /// Real (x) against synthetic (y) predicted pure premium quantiles.
    pub pure_premium_qq: std::result::Result<Vec<(f64, f64)>, String>,
}

fn dataset_report(p: &Portfolio, codec: &EncodingCodec) -> Result<DatasetReport> {
    Ok(DatasetReport {
        n_rows: p.n_rows(),
        severity_table: stats_by_count(p)?,
        claim_mix: claim_mix(&p.claim_counts()?)?,
        models: FidelityModels::fit(p, codec).map_err(|e| e.to_string()),
    })
}

/// Codec shared by both datasets' GLMs: fitted on the source features,
/// standardized, with each composition's closing share left out.
pub fn comparison_codec(real: &Portfolio) -> Result<EncodingCodec> {
    EncodingCodec::fit(
        real,
        &EncodeOptions {
            standardize: true,
            exclude: real.schema().closure_members(),
        },
    )
}

pub fn compare(
    real: &Portfolio,
    synthetic: &Portfolio,
    options: &CompareOptions,
) -> Result<ComparisonReport> {
    for p in [real, synthetic] {
        require_responses(p)?;
        if !p.is_validated() {
            return Err(Error::InvalidArgument(
                "compare needs validated portfolios".into(),
            ));
        }
        if p.is_empty() {
            return Err(Error::Empty("portfolio".into()));
        }
    }
    let codec = comparison_codec(real)?;
    codec.check_schema(synthetic.schema())?;
    let (r, s) = rayon::join(
        || dataset_report(real, &codec),
        || dataset_report(synthetic, &codec),
    );
    let (r, s) = (r?, s?);

    let mut curves = Vec::new();
    let wanted = options
        .frequency_features
        .iter()
        .map(|f| (f, CurveKind::Frequency))
        .chain(
            options
                .severity_features
                .iter()
                .map(|f| (f, CurveKind::Severity)),
        );
    for (feature, kind) in wanted {
        let values = real.column(feature)?;
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let curve = |p: &Portfolio, d: &DatasetReport| match &d.models {
            Ok(m) => observed_vs_predicted(p, m, feature, kind, options.bins, Some((lo, hi)))
                .map_err(|e| e.to_string()),
            Err(e) => Err(e.clone()),
        };
        curves.push(Curve {
            feature: feature.clone(),
            kind,
            real: curve(real, &r),
            synthetic: curve(synthetic, &s),
        });
    }

    let pure_premium_qq = match (&r.models, &s.models) {
        (Ok(mr), Ok(ms)) => mr
            .predict_pure_premium(real)
            .and_then(|a| Ok((a, ms.predict_pure_premium(synthetic)?)))
            .and_then(|(a, b)| qq_points(&a, &b, options.qq_points))
            .map_err(|e| e.to_string()),
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };

    Ok(ComparisonReport {
        column_names: codec.column_names(real.schema()),
        real: r,
        synthetic: s,
        curves,
        pure_premium_qq,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

impl ComparisonReport {
    fn datasets(&self) -> [(&'static str, &DatasetReport); 2] {
        [("real", &self.real), ("synthetic", &self.synthetic)]
    }

    pub fn severity_csv(&self) -> String {
        let mut out = format!(
            "dataset,NB_Claim,n,{}\n",
            SummaryStats::<f64>::HEADER.join(",")
        );
        for (name, d) in self.datasets() {
            for row in &d.severity_table {
                let cells = match &row.stats {
                    Some(s) => s.to_array().map(|x| format!("{x:.6}")).join(","),
                    None => ["NA"; 7].join(","),
                };
                let _ = writeln!(out, "{name},{},{},{cells}", row.count, row.n);
            }
        }
        out
    }

    pub fn claim_mix_csv(&self) -> String {
        let mut out = String::from("dataset,NB_Claim,share\n");
        for (name, d) in self.datasets() {
            for (k, share) in d.claim_mix.iter().enumerate() {
                let _ = writeln!(out, "{name},{k},{share:.8}");
            }
        }
        out
    }

    /// Coefficients of both datasets' GLMs side by side.
    pub fn coefficients_csv(&self) -> String {
        let mut out = String::from("model,term,real,synthetic\n");
        let terms: Vec<&str> = std::iter::once("(Intercept)")
            .chain(self.column_names.iter().map(String::as_str))
            .collect();
        for (model, pick) in [
            (
                "frequency",
                (|m: &FidelityModels| &m.frequency) as fn(&FidelityModels) -> &GlmFit<f64>,
            ),
            ("severity", |m: &FidelityModels| &m.severity),
        ] {
            for (t, term) in terms.iter().enumerate() {
                let cell = |d: &DatasetReport| match &d.models {
                    Ok(m) => {
                        let fit = pick(m);
                        if fit.aliased[t] {
                            "aliased".to_string()
                        } else {
                            format!("{:.8}", fit.coefficients[t])
                        }
                    }
                    Err(_) => "NA".to_string(),
                };
                let _ = writeln!(
                    out,
                    "{model},{term},{},{}",
                    cell(&self.real),
                    cell(&self.synthetic)
                );
            }
        }
        out
    }

    pub fn curves_csv(&self) -> String {
        let mut out = String::from(
            "kind,feature,dataset,bin,low,high,n,observed_mean,observed_sd,predicted_mean\n",
        );
        for c in &self.curves {
            for (name, bins) in [("real", &c.real), ("synthetic", &c.synthetic)] {
                let Ok(bins) = bins else { continue };
                for (b, bin) in bins.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{},{},{name},{b},{:.6},{:.6},{},{},{},{}",
                        c.kind.as_str(),
                        c.feature,
                        bin.low,
                        bin.high,
                        bin.n,
                        opt(bin.observed_mean),
                        opt(bin.observed_sd),
                        opt(bin.predicted_mean)
                    );
                }
            }
        }
        out
    }

    pub fn qq_csv(&self) -> String {
        let mut out = String::from("real,synthetic\n");
        if let Ok(points) = &self.pure_premium_qq {
            for (x, y) in points {
                let _ = writeln!(out, "{x:.8},{y:.8}");
            }
        }
        out
    }

    /// Named CSV tables, in a fixed order.
    pub fn csv_bundle(&self) -> Vec<(&'static str, String)> {
        vec![
            ("severity_by_count.csv", self.severity_csv()),
            ("claim_mix.csv", self.claim_mix_csv()),
            ("glm_coefficients.csv", self.coefficients_csv()),
            ("observed_vs_predicted.csv", self.curves_csv()),
            ("pure_premium_qq.csv", self.qq_csv()),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("Fidelity report\n===============\n\n");
        let _ = writeln!(
            out,
            "rows: real {}, synthetic {}\n",
            self.real.n_rows, self.synthetic.n_rows
        );

        out.push_str("Claim-count mix\n");
        let _ = writeln!(
            out,
            "{:<10} {:>10} {:>10} {:>10} {:>10}",
            "dataset", "0", "1", "2", "3"
        );
        for (name, d) in self.datasets() {
            let m = d.claim_mix.map(|x| format!("{:.4}%", 100.0 * x));
            let _ = writeln!(
                out,
                "{name:<10} {:>10} {:>10} {:>10} {:>10}",
                m[0], m[1], m[2], m[3]
            );
        }

        for (name, d) in self.datasets() {
            let _ = writeln!(out, "\nAMT_Claim by NB_Claim ({name})");
            let _ = write!(out, "{:>8} {:>7}", "NB_Claim", "n");
            for h in SummaryStats::<f64>::HEADER {
                let _ = write!(out, " {h:>12}");
            }
            out.push('\n');
            for row in &d.severity_table {
                let _ = write!(out, "{:>8} {:>7}", row.count, row.n);
                match &row.stats {
                    Some(s) => {
                        for x in s.to_array() {
                            let _ = write!(out, " {x:>12.2}");
                        }
                    }
                    None => {
                        for _ in 0..7 {
                            let _ = write!(out, " {:>12}", "NA");
                        }
                    }
                }
                out.push('\n');
            }
        }

        out.push_str("\nGLM fits\n");
        for (name, d) in self.datasets() {
            match &d.models {
                Ok(m) => {
                    for fit in [&m.frequency, &m.severity] {
                        let _ = writeln!(
                            out,
                            "{name:<10} {:<8} converged {} after {} iterations, deviance {:.4}, dispersion {:.4}{}",
                            fit.family.as_str(),
                            fit.converged,
                            fit.iterations,
                            fit.deviance,
                            fit.dispersion,
                            if fit.warnings.is_empty() {
                                String::new()
                            } else {
                                format!(" ({})", fit.warnings.join("; "))
                            }
                        );
                    }
                }
                Err(e) => {
                    let _ = writeln!(out, "{name:<10} fit failed: {e}");
                }
            }
        }
        out.push_str("coefficient tables: glm_coefficients.csv\n");

        out.push_str("\nObserved vs predicted curves\n");
        for c in &self.curves {
            for (name, bins) in [("real", &c.real), ("synthetic", &c.synthetic)] {
                match bins {
                    Ok(bins) => {
                        let non_empty = bins.iter().filter(|b| b.n > 0).count();
                        let _ = writeln!(
                            out,
                            "{} {} {name}: {} bins, {non_empty} non-empty",
                            c.kind.as_str(),
                            c.feature,
                            bins.len()
                        );
                    }
                    Err(e) => {
                        let _ = writeln!(
                            out,
                            "{} {} {name}: unavailable ({e})",
                            c.kind.as_str(),
                            c.feature
                        );
                    }
                }
            }
        }

        out.push_str("\nPure premium QQ\n");
        match &self.pure_premium_qq {
            Ok(points) => {
                let _ = writeln!(out, "{} points", points.len());
                for &i in &[
                    0usize,
                    points.len() / 4,
                    points.len() / 2,
                    3 * points.len() / 4,
                    points.len() - 1,
                ] {
                    let (x, y) = points[i];
                    let _ = writeln!(out, "  real {x:>14.4}  synthetic {y:>14.4}");
                }
            }
            Err(e) => {
                let _ = writeln!(out, "unavailable ({e})");
            }
        }
        out
    }
}
