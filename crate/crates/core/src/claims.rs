//! Claim simulation: a cascade of three binary classifiers for the claim
//! count and a ReLU regressor for the aggregate claim amount.

use std::fmt::Write as _;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

use crate::hyperopt::{tune_hyperparameters, Hyperparameters, SearchSpace, TuneResult};
use crate::nn::{self, Activation, LossKind, Network, TrainSpec};
use crate::rng::{self, stream};
use crate::schema::{EncodingCodec, Portfolio};
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Highest simulated claim count.
pub const MAX_COUNT: u8 = 3;

/// Sub-simulation architectures for `1{Y ≥ 1}`, `1{Y ≥ 2 | Y ≥ 1}` and
/// `1{Y ≥ 3 | Y ≥ 2}`.
pub fn default_frequency_architectures() -> [Hyperparameters; 3] {
    let relu =
        |n_hidden_layers, nodes_first, nodes_rest, batch_size, learning_rate| Hyperparameters {
            n_hidden_layers,
            nodes_first,
            nodes_rest,
            activation: Activation::Relu,
            batch_size,
            learning_rate,
        };
    [
        relu(3, 353, 68, 85, 0.000667),
        relu(3, 473, 67, 18, 0.001019),
        relu(2, 60, 60, 16, 0.001922),
    ]
}

pub fn default_severity_architecture() -> Hyperparameters {
    Hyperparameters {
        n_hidden_layers: 6,
        nodes_first: 344,
        nodes_rest: 67,
        activation: Activation::Relu,
        batch_size: 3,
        learning_rate: 0.000526,
    }
}

/// How a cascade turns stage probabilities into a count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountMode {
    /// Stage `k` passes when `pₖ ≥ threshold`.
    Threshold,
    /// Stage `k` passes with probability `pₖ`.
    Bernoulli,
}

impl CountMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CountMode::Threshold => "threshold",
            CountMode::Bernoulli => "bernoulli",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "threshold" => Some(CountMode::Threshold),
            "bernoulli" => Some(CountMode::Bernoulli),
            _ => None,
        }
    }
}

/// Rows of one conditional dataset and their 0/1 labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StageData {
    pub rows: Vec<usize>,
    pub labels: Vec<f64>,
}

impl StageData {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1.0).count()
    }
}

/// `D₁`: every row, label `1{Y ≥ 1}`; `D₂`: rows with `Y ≥ 1`, label
/// `1{Y ≥ 2}`; `D₃`: rows with `Y ≥ 2`, label `1{Y ≥ 3}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeDatasets {
    pub stages: [StageData; 3],
}

pub fn build_cascade_datasets(real: &Portfolio) -> Result<CascadeDatasets> {
    cascade_datasets_from_counts(&real.claim_counts()?)
}

pub fn cascade_datasets_from_counts(counts: &[f64]) -> Result<CascadeDatasets> {
    let mut stages: [StageData; 3] = Default::default();
    for (i, &y) in counts.iter().enumerate() {
        for (k, stage) in stages.iter_mut().enumerate() {
            if y >= k as f64 {
                stage.rows.push(i);
                stage
                    .labels
                    .push(if y >= (k + 1) as f64 { 1.0 } else { 0.0 });
            }
        }
    }
    Ok(CascadeDatasets { stages })
}

/// Sequential gating: the count is the number of leading stages whose
/// probability reaches `threshold`.
pub fn gate(p: [f64; 3], threshold: f64) -> u8 {
    p.iter().take_while(|&&pk| pk >= threshold).count() as u8
}

#[derive(Debug, Clone, PartialEq)]
pub enum StageModel {
    Network(Network<f64>),
    /// Returns the same probability for every input; used for empty stages.
    Constant(f64),
}

impl StageModel {
    fn probabilities(&self, x: &Array2<f64>) -> Result<Array1<f64>> {
        match self {
            StageModel::Network(net) => net.forward_batch(x.view()),
            StageModel::Constant(p) => Ok(Array1::from_elem(x.nrows(), *p)),
        }
    }

    fn to_text(&self) -> String {
        match self {
            StageModel::Network(net) => net.to_text(),
            StageModel::Constant(p) => format!("constant {p:?}\n"),
        }
    }

    fn from_text(text: &str) -> Result<Self> {
        let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
        if let Some(p) = first.trim().strip_prefix("constant ") {
            let p = p
                .parse()
                .map_err(|_| Error::parse(1, format!("bad constant `{p}`")))?;
            return Ok(StageModel::Constant(p));
        }
        Network::from_text(text).map(StageModel::Network)
    }
}

fn split_sections(text: &str) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = Vec::new();
    for line in text.lines() {
        let t = line.trim();
        if t.starts_with('[') && t.ends_with(']') {
            out.push((t[1..t.len() - 1].to_string(), String::new()));
        } else if let Some((_, body)) = out.last_mut() {
            body.push_str(line);
            body.push('\n');
        }
    }
    out
}

fn section<'a>(sections: &'a [(String, String)], name: &str) -> Result<&'a str> {
    sections
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, b)| b.as_str())
        .ok_or_else(|| Error::parse(0, format!("model file has no [{name}] section")))
}

fn header_value<'a>(text: &'a str, key: &str) -> Result<&'a str> {
    text.lines()
        .find_map(|l| l.trim().strip_prefix(key).map(str::trim))
        .ok_or_else(|| Error::parse(0, format!("model file has no `{key}` line")))
}

fn arch_from_text(text: &str, prefix: &str, fallback: Hyperparameters) -> Result<Hyperparameters> {
    let kv = crate::dataio::parse_kv(text)?;
    let mut a = fallback;
    a.apply_kv(prefix, &kv)?;
    Ok(a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyCascade {
    pub stages: [StageModel; 3],
    pub archs: [Hyperparameters; 3],
    pub threshold: f64,
    pub codec: EncodingCodec,
}

impl FrequencyCascade {
    pub fn input_dim(&self) -> usize {
        self.codec.width()
    }

    /// Stage probabilities of every encoded row.
    pub fn probabilities(&self, x: &Array2<f64>) -> Result<Vec<[f64; 3]>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        let p: Vec<Array1<f64>> = self
            .stages
            .iter()
            .map(|s| s.probabilities(x))
            .collect::<Result<_>>()?;
        Ok((0..x.nrows())
            .map(|i| [p[0][i], p[1][i], p[2][i]])
            .collect())
    }

    /// Gated counts of every encoded row.
    pub fn predict_counts(&self, x: &Array2<f64>) -> Result<Vec<u8>> {
        Ok(self
            .probabilities(x)?
            .into_iter()
            .map(|p| gate(p, self.threshold))
            .collect())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("cascade v1\n");
        let _ = writeln!(out, "threshold {:?}", self.threshold);
        for (k, (stage, arch)) in self.stages.iter().zip(&self.archs).enumerate() {
            let _ = writeln!(out, "[arch{}]", k + 1);
            out.push_str(&arch.to_kv(&format!("freq{}", k + 1)));
            let _ = writeln!(out, "[stage{}]", k + 1);
            out.push_str(&stage.to_text());
        }
        out.push_str("[codec]\n");
        out.push_str(&self.codec.to_text());
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        if text.lines().next().map(str::trim) != Some("cascade v1") {
            return Err(Error::parse(1, "expected `cascade v1`"));
        }
        let threshold = header_value(text, "threshold ")?;
        let threshold: f64 = threshold
            .parse()
            .map_err(|_| Error::parse(2, format!("bad threshold `{threshold}`")))?;
        let sections = split_sections(text);
        let defaults = default_frequency_architectures();
        let mut stages = Vec::with_capacity(3);
        let mut archs = defaults;
        for k in 0..3 {
            archs[k] = arch_from_text(
                section(&sections, &format!("arch{}", k + 1))?,
                &format!("freq{}", k + 1),
                defaults[k],
            )?;
            stages.push(StageModel::from_text(section(
                &sections,
                &format!("stage{}", k + 1),
            )?)?);
        }
        let codec = EncodingCodec::from_text(section(&sections, "codec")?)?;
        let stages: [StageModel; 3] = stages.try_into().expect("three stages");
        for s in &stages {
            if let StageModel::Network(net) = s {
                if net.input_dim() != codec.width() {
                    return Err(Error::EncoderMismatch(format!(
                        "stage network expects {} inputs, codec has {} columns",
                        net.input_dim(),
                        codec.width()
                    )));
                }
            }
        }
        Ok(Self {
            stages,
            archs,
            threshold,
            codec,
        })
    }
}

/// Count for one encoded row under threshold gating.
pub fn predict_claim_count(c: &FrequencyCascade, x: &[f64]) -> Result<u8> {
    let m = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("one row");
    Ok(c.predict_counts(&m)?[0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub seed: u64,
    pub tune: bool,
    pub tune_budget: usize,
    pub tune_epochs: usize,
    pub validation_fraction: f64,
    pub search_space: SearchSpace,
}

impl TrainOptions {
    pub fn new(epochs: usize, seed: u64) -> Self {
        Self {
            epochs,
            seed,
            tune: false,
            tune_budget: 30,
            tune_epochs: 5,
            validation_fraction: 0.2,
            search_space: SearchSpace::network_default(),
        }
    }
}

/// What happened while fitting one network.
#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub name: String,
    pub n_rows: usize,
    pub n_positive: usize,
    pub arch: Hyperparameters,
    /// Mean training loss per epoch; empty for constant stubs.
    pub loss_history: Vec<f64>,
    pub tuning: Option<TuneResult>,
}

fn sub_matrix(x: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}

/// Fewest rows for which a train/validation split is attempted.
const MIN_TUNING_ROWS: usize = 10;

/// Tunes an architecture on a seeded train/validation split, scoring each
/// candidate by its validation loss after `tune_epochs`.
fn tune_architecture(
    x: &Array2<f64>,
    y: &Array1<f64>,
    loss: LossKind,
    output: Activation,
    opts: &TrainOptions,
    seed: u64,
) -> Result<(Hyperparameters, TuneResult)> {
    let n = x.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream_rng(seed, stream::TUNING));
    let n_val = ((n as f64 * opts.validation_fraction).round() as usize).clamp(1, n - 1);
    let (val, train) = order.split_at(n_val);
    let (xt, yt) = (x.select(Axis(0), train), y.select(Axis(0), train));
    let (xv, yv) = (x.select(Axis(0), val), y.select(Axis(0), val));
    let spec = TrainSpec {
        loss,
        epochs: opts.tune_epochs,
        seed,
    };
    tune_hyperparameters(&opts.search_space, opts.tune_budget, seed, |arch| {
        arch.validate()?;
        let (net, _) = nn::train(xt.view(), yt.view(), arch, output, &spec)?;
        let pred = net.forward_batch(xv.view())?;
        Ok(nn::batch_loss(
            loss,
            pred.as_slice().expect("contiguous"),
            yv.as_slice().expect("contiguous"),
        ))
    })
}

fn fit_network(
    name: &str,
    x: &Array2<f64>,
    y: &Array1<f64>,
    arch: Hyperparameters,
    loss: LossKind,
    output: Activation,
    opts: &TrainOptions,
    seed: u64,
) -> Result<(Network<f64>, StageReport)> {
    let (arch, tuning) = if opts.tune && x.nrows() >= MIN_TUNING_ROWS {
        let (a, t) = tune_architecture(x, y, loss, output, opts, seed)?;
        (a, Some(t))
    } else {
        (arch, None)
    };
    arch.validate()?;
    let spec = TrainSpec {
        loss,
        epochs: opts.epochs,
        seed,
    };
    let (net, loss_history) = nn::train(x.view(), y.view(), &arch, output, &spec)?;
    if !net.is_finite() {
        return Err(Error::Numeric(format!(
            "{name}: trained weights are not finite"
        )));
    }
    let report = StageReport {
        name: name.to_string(),
        n_rows: x.nrows(),
        n_positive: y.iter().filter(|&&v| v > 0.0).count(),
        arch,
        loss_history,
        tuning,
    };
    Ok((net, report))
}

/// Trains the three sub-simulations on the encoded features of `real`. A
/// stage with no rows, or whose rows are all negative, becomes a constant-0
/// classifier; a single-class first stage is an error.
pub fn train_frequency_cascade(
    real: &Portfolio,
    codec: &EncodingCodec,
    archs: &[Hyperparameters; 3],
    opts: &TrainOptions,
) -> Result<(FrequencyCascade, Vec<StageReport>)> {
    let data = build_cascade_datasets(real)?;
    let d1 = &data.stages[0];
    if d1.is_empty() {
        return Err(Error::Empty("source portfolio".into()));
    }
    let pos = d1.positives();
    if pos == 0 || pos == d1.len() {
        return Err(Error::SingleClass);
    }
    let x = codec.encode(&real.features_only())?;
    let base = rng::derive_seed(opts.seed, stream::FREQUENCY);
    let mut stages = Vec::with_capacity(3);
    let mut reports = Vec::with_capacity(3);
    let mut used = *archs;
    for (k, d) in data.stages.iter().enumerate() {
        let name = format!("sub-simulation {}", k + 1);
        if d.is_empty() || d.positives() == 0 {
            stages.push(StageModel::Constant(0.0));
            reports.push(StageReport {
                name,
                n_rows: d.len(),
                n_positive: 0,
                arch: archs[k],
                loss_history: Vec::new(),
                tuning: None,
            });
            continue;
        }
        let xk = sub_matrix(&x, &d.rows);
        let yk = Array1::from(d.labels.clone());
        let (net, report) = fit_network(
            &name,
            &xk,
            &yk,
            archs[k],
            LossKind::CrossEntropy,
            Activation::Sigmoid,
            opts,
            rng::derive_seed(base, k as u64),
        )?;
        used[k] = report.arch;
        stages.push(StageModel::Network(net));
        reports.push(report);
    }
    let stages: [StageModel; 3] = stages.try_into().expect("three stages");
    Ok((
        FrequencyCascade {
            stages,
            archs: used,
            threshold: DEFAULT_THRESHOLD,
            codec: codec.clone(),
        },
        reports,
    ))
}

/// Tunes each sub-simulation on its own conditional dataset. Stages with
/// fewer than ten rows, or a single class, keep `fallback`.
pub fn tune_frequency_architectures(
    real: &Portfolio,
    codec: &EncodingCodec,
    fallback: &[Hyperparameters; 3],
    opts: &TrainOptions,
) -> Result<[(Hyperparameters, Option<TuneResult>); 3]> {
    let data = build_cascade_datasets(real)?;
    let x = codec.encode(&real.features_only())?;
    let base = rng::derive_seed(opts.seed, stream::FREQUENCY);
    let mut out = fallback.map(|a| (a, None));
    for (k, d) in data.stages.iter().enumerate() {
        let pos = d.positives();
        if d.len() < MIN_TUNING_ROWS || pos == 0 || pos == d.len() {
            continue;
        }
        let xk = sub_matrix(&x, &d.rows);
        let yk = Array1::from(d.labels.clone());
        let (a, t) = tune_architecture(
            &xk,
            &yk,
            LossKind::CrossEntropy,
            Activation::Sigmoid,
            opts,
            rng::derive_seed(base, k as u64),
        )?;
        out[k] = (a, Some(t));
    }
    Ok(out)
}

/// Tunes the severity regressor on the claimants of `real`.
pub fn tune_severity_architecture(
    real: &Portfolio,
    codec: &EncodingCodec,
    fallback: &Hyperparameters,
    opts: &TrainOptions,
) -> Result<(Hyperparameters, Option<TuneResult>)> {
    let (x, y, _) = severity_training_data(real, codec)?;
    if x.nrows() < MIN_TUNING_ROWS {
        return Ok((*fallback, None));
    }
    let (a, t) = tune_architecture(
        &x,
        &y,
        LossKind::Mse,
        Activation::Relu,
        opts,
        rng::derive_seed(opts.seed, stream::SEVERITY),
    )?;
    Ok((a, Some(t)))
}

fn severity_training_data(
    real: &Portfolio,
    codec: &EncodingCodec,
) -> Result<(Array2<f64>, Array1<f64>, f64)> {
    let counts = real.claim_counts()?;
    let amounts = real.claim_amounts()?;
    let rows: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] > 0.0).collect();
    if rows.is_empty() {
        return Err(Error::NoClaimants);
    }
    let claimants = real.select(&rows);
    let claimant_counts: Vec<f64> = rows.iter().map(|&i| counts[i]).collect();
    let x = severity_inputs(codec, &claimants, &claimant_counts)?;
    let target: Vec<f64> = rows.iter().map(|&i| amounts[i]).collect();
    let mean = target.iter().sum::<f64>() / target.len() as f64;
    let target_scale = if mean > 0.0 { mean } else { 1.0 };
    let y = Array1::from(target.iter().map(|a| a / target_scale).collect::<Vec<_>>());
    Ok((x, y, target_scale))
}

/// Severity regressor: the network sees the encoded features plus the raw
/// claim count and predicts `AMT_Claim / target_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeverityModel {
    pub net: Network<f64>,
    pub arch: Hyperparameters,
    pub target_scale: f64,
    pub codec: EncodingCodec,
}

/// Encoded features with the claim count appended as the last column.
pub fn severity_inputs(
    codec: &EncodingCodec,
    features: &Portfolio,
    counts: &[f64],
) -> Result<Array2<f64>> {
    if counts.len() != features.n_rows() {
        return Err(Error::Dimension {
            expected: features.n_rows(),
            found: counts.len(),
        });
    }
    let x = codec.encode(&features.features_only())?;
    let mut out = Array2::zeros((x.nrows(), x.ncols() + 1));
    out.slice_mut(ndarray::s![.., ..x.ncols()]).assign(&x);
    out.column_mut(x.ncols())
        .assign(&Array1::from(counts.to_vec()));
    Ok(out)
}

impl SeverityModel {
    /// Predicted amounts (`≥ 0`) for severity input rows.
    pub fn predict(&self, inputs: &Array2<f64>) -> Result<Vec<f64>> {
        if inputs.ncols() != self.codec.width() + 1 {
            return Err(Error::Dimension {
                expected: self.codec.width() + 1,
                found: inputs.ncols(),
            });
        }
        Ok(self
            .net
            .forward_batch(inputs.view())?
            .iter()
            .map(|p| (p * self.target_scale).max(0.0))
            .collect())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("severity v1\n");
        let _ = writeln!(out, "target_scale {:?}", self.target_scale);
        out.push_str("[arch]\n");
        out.push_str(&self.arch.to_kv("severity"));
        out.push_str("[network]\n");
        out.push_str(&self.net.to_text());
        out.push_str("[codec]\n");
        out.push_str(&self.codec.to_text());
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        if text.lines().next().map(str::trim) != Some("severity v1") {
            return Err(Error::parse(1, "expected `severity v1`"));
        }
        let scale = header_value(text, "target_scale ")?;
        let target_scale: f64 = scale
            .parse()
            .map_err(|_| Error::parse(2, format!("bad target scale `{scale}`")))?;
        let sections = split_sections(text);
        let arch = arch_from_text(
            section(&sections, "arch")?,
            "severity",
            default_severity_architecture(),
        )?;
        let net = Network::from_text(section(&sections, "network")?)?;
        let codec = EncodingCodec::from_text(section(&sections, "codec")?)?;
        if net.input_dim() != codec.width() + 1 {
            return Err(Error::EncoderMismatch(format!(
                "severity network expects {} inputs, codec has {} columns plus the claim count",
                net.input_dim(),
                codec.width()
            )));
        }
        Ok(Self {
            net,
            arch,
            target_scale,
            codec,
        })
    }
}

/// Trains on claimants only, with MSE loss and a ReLU output.
pub fn train_severity(
    real: &Portfolio,
    codec: &EncodingCodec,
    arch: &Hyperparameters,
    opts: &TrainOptions,
) -> Result<(SeverityModel, StageReport)> {
    let (x, y, target_scale) = severity_training_data(real, codec)?;
    let (net, report) = fit_network(
        "severity",
        &x,
        &y,
        *arch,
        LossKind::Mse,
        Activation::Relu,
        opts,
        rng::derive_seed(opts.seed, stream::SEVERITY),
    )?;
    Ok((
        SeverityModel {
            net,
            arch: report.arch,
            target_scale,
            codec: codec.clone(),
        },
        report,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulateOptions {
    pub mode: CountMode,
    /// Seed for the Bernoulli mode.
    pub seed: u64,
    /// Smallest amount given to a row with a positive count.
    pub min_amount: f64,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            mode: CountMode::Threshold,
            seed: 0,
            min_amount: 0.01,
        }
    }
}

/// Appends simulated `NB_Claim` and `AMT_Claim` to a features-only
/// portfolio.
pub fn simulate_claims(
    cascade: &FrequencyCascade,
    severity: &SeverityModel,
    features: &Portfolio,
    opts: &SimulateOptions,
) -> Result<Portfolio> {
    if cascade.codec != severity.codec {
        return Err(Error::EncoderMismatch(
            "frequency and severity models were trained with different encoders".into(),
        ));
    }
    if !(opts.min_amount > 0.0) {
        return Err(Error::InvalidArgument("min_amount must be positive".into()));
    }
    let features = features.features_only();
    cascade.codec.check_schema(features.schema())?;
    let x = cascade.codec.encode(&features)?;
    let counts: Vec<f64> = match opts.mode {
        CountMode::Threshold => cascade
            .predict_counts(&x)?
            .into_iter()
            .map(f64::from)
            .collect(),
        CountMode::Bernoulli => {
            let base = rng::derive_seed(opts.seed, stream::SAMPLING);
            cascade
                .probabilities(&x)?
                .into_par_iter()
                .enumerate()
                .map(|(i, p)| {
                    let mut r = rng::stream_rng(base, i as u64);
                    p.iter().take_while(|&&pk| r.random::<f64>() < pk).count() as f64
                })
                .collect()
        }
    };
    let mut amounts = vec![0.0; counts.len()];
    let claimants: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] > 0.0).collect();
    if !claimants.is_empty() {
        let mut xs = x.select(Axis(0), &claimants);
        let mut with_count = Array2::zeros((xs.nrows(), xs.ncols() + 1));
        with_count
            .slice_mut(ndarray::s![.., ..xs.ncols()])
            .assign(&xs);
        for (r, &i) in claimants.iter().enumerate() {
            with_count[[r, xs.ncols()]] = counts[i];
        }
        xs = with_count;
        let pred = severity.predict(&xs)?;
        for (&i, p) in claimants.iter().zip(pred) {
            amounts[i] = p.max(opts.min_amount);
        }
    }
    let responses: Vec<Vec<f64>> = counts
        .iter()
        .zip(&amounts)
        .map(|(&c, &a)| vec![c, a])
        .collect();
    if features.is_empty() {
        return Ok(Portfolio::empty(features.schema().clone(), true));
    }
    features.with_responses(&responses)
}
