use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use telesynth::claims::{
    simulate_claims, train_frequency_cascade, train_severity, tune_frequency_architectures,
    tune_severity_architecture, FrequencyCascade, SeverityModel, SimulateOptions, StageReport,
    TrainOptions,
};
use telesynth::dataio::{
    bootstrap_ground_truth, parse_kv, portfolio_to_csv_string, read_csv, GroundTruthSpec, RunConfig,
};
use telesynth::hyperopt::SearchSpace;
use telesynth::schema::{default_schema, EncodingCodec, Portfolio};
use telesynth::synth::{generate_with_codec, smote_codec, SmoteConfig};
use telesynth::validate::compare;

use crate::artifacts::{read_text, write_atomic, Manifest};
use crate::CliError;

pub const REAL: &str = "real.csv";
pub const ENCODER: &str = "encoder.codec";
pub const FREQUENCY_MODEL: &str = "frequency.model";
pub const SEVERITY_MODEL: &str = "severity.model";
pub const TUNED: &str = "tuned.conf";
pub const SYNTHETIC_FEATURES: &str = "synthetic_features.csv";
pub const NEIGHBORS: &str = "neighbors.csv";
pub const SYNTHETIC: &str = "synthetic.csv";
pub const REPORT: &str = "report.txt";
pub const REPORT_DIR: &str = "report";

pub struct Context {
    pub cfg: RunConfig,
}

/// Files produced by one stage.
type Outputs = Vec<(PathBuf, Vec<u8>)>;

impl Context {
    fn out(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    fn real_path(&self) -> PathBuf {
        self.cfg.input.clone().unwrap_or_else(|| self.out(REAL))
    }

    fn train_options(&self, epochs: usize) -> TrainOptions {
        TrainOptions {
            epochs,
            seed: self.cfg.seed,
            tune: false,
            tune_budget: self.cfg.tuning_budget,
            tune_epochs: self.cfg.tune_epochs,
            validation_fraction: self.cfg.validation_fraction,
            search_space: SearchSpace::network_default(),
        }
    }

    fn finish(
        &self,
        command: &str,
        inputs: &[PathBuf],
        outputs: Outputs,
    ) -> Result<Outputs, CliError> {
        let mut manifest = Manifest::new(command);
        for p in inputs {
            manifest.input(p)?;
        }
        for (path, bytes) in &outputs {
            write_atomic(path, bytes)?;
            manifest.output(path, bytes);
        }
        manifest.write(&self.cfg.out_dir, &self.cfg)?;
        Ok(outputs)
    }
}

fn require(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Missing(format!(
            "{what} not found at {}",
            path.display()
        )))
    }
}

fn load_portfolio(path: &Path, what: &str) -> Result<Portfolio, CliError> {
    require(path, what)?;
    Ok(read_csv(path, Arc::new(default_schema()))?)
}

fn load_real(ctx: &Context) -> Result<Portfolio, CliError> {
    let p = load_portfolio(&ctx.real_path(), "source portfolio")?;
    if !p.has_responses() {
        return Err(CliError::Usage(format!(
            "{} has no NB_Claim/AMT_Claim columns",
            ctx.real_path().display()
        )));
    }
    Ok(p)
}

fn load_codec(ctx: &Context) -> Result<EncodingCodec, CliError> {
    let path = ctx.out(ENCODER);
    require(&path, "encoder artifact (run train-frequency first)")?;
    Ok(EncodingCodec::from_text(&read_text(&path)?)?)
}

fn csv(p: &Portfolio) -> Result<Vec<u8>, CliError> {
    Ok(portfolio_to_csv_string(p)?.into_bytes())
}

fn loss_csv(reports: &[StageReport]) -> Vec<u8> {
    let mut s = String::from("model,epoch,loss\n");
    for r in reports {
        for (e, l) in r.loss_history.iter().enumerate() {
            let _ = writeln!(s, "{},{},{:?}", r.name, e + 1, l);
        }
    }
    s.into_bytes()
}

/// Applies architecture keys from a tuned configuration file.
pub fn apply_archs(cfg: &mut RunConfig, path: &Path) -> Result<(), CliError> {
    require(path, "architecture file")?;
    let kv = parse_kv(&read_text(path)?)?;
    if let Some(k) = kv.keys().find(|k| {
        !["freq1.", "freq2.", "freq3.", "severity."]
            .iter()
            .any(|p| k.starts_with(p))
    }) {
        return Err(CliError::Usage(format!(
            "{}: `{k}` is not an architecture key",
            path.display()
        )));
    }
    cfg.apply(&kv)?;
    Ok(())
}

pub fn bootstrap(ctx: &Context) -> Result<Outputs, CliError> {
    let p = bootstrap_ground_truth(&GroundTruthSpec::default(), ctx.cfg.n_real, ctx.cfg.seed)?;
    ctx.finish("bootstrap", &[], vec![(ctx.out(REAL), csv(&p)?)])
}

pub fn tune(ctx: &Context) -> Result<Outputs, CliError> {
    let real = load_real(ctx)?;
    let codec = smote_codec(&real)?;
    let cfg = &ctx.cfg;
    let freq = tune_frequency_architectures(
        &real,
        &codec,
        &cfg.frequency_archs,
        &ctx.train_options(cfg.frequency_epochs),
    )?;
    let sev = tune_severity_architecture(
        &real,
        &codec,
        &cfg.severity_arch,
        &ctx.train_options(cfg.severity_epochs),
    )?;
    let space = SearchSpace::network_default();
    let mut conf = String::new();
    let mut outputs = Vec::new();
    for (k, (arch, trace)) in freq.iter().enumerate() {
        let prefix = format!("freq{}", k + 1);
        conf.push_str(&arch.to_kv(&prefix));
        if let Some(t) = trace {
            outputs.push((
                ctx.out(&format!("tune-{prefix}.csv")),
                t.trace_csv(&space).into_bytes(),
            ));
        }
    }
    conf.push_str(&sev.0.to_kv("severity"));
    if let Some(t) = &sev.1 {
        outputs.push((
            ctx.out("tune-severity.csv"),
            t.trace_csv(&space).into_bytes(),
        ));
    }
    outputs.insert(0, (ctx.out(TUNED), conf.into_bytes()));
    ctx.finish("tune", &[ctx.real_path()], outputs)
}

pub fn train_frequency(ctx: &Context) -> Result<Outputs, CliError> {
    let real = load_real(ctx)?;
    let codec = smote_codec(&real)?;
    let (mut cascade, reports) = train_frequency_cascade(
        &real,
        &codec,
        &ctx.cfg.frequency_archs,
        &ctx.train_options(ctx.cfg.frequency_epochs),
    )?;
    cascade.threshold = ctx.cfg.threshold;
    ctx.finish(
        "train-frequency",
        &[ctx.real_path()],
        vec![
            (ctx.out(ENCODER), codec.to_text().into_bytes()),
            (ctx.out(FREQUENCY_MODEL), cascade.to_text().into_bytes()),
            (ctx.out("frequency-loss.csv"), loss_csv(&reports)),
        ],
    )
}

pub fn train_severity_stage(ctx: &Context) -> Result<Outputs, CliError> {
    let real = load_real(ctx)?;
    let codec = load_codec(ctx)?;
    let (model, report) = train_severity(
        &real,
        &codec,
        &ctx.cfg.severity_arch,
        &ctx.train_options(ctx.cfg.severity_epochs),
    )?;
    ctx.finish(
        "train-severity",
        &[ctx.real_path(), ctx.out(ENCODER)],
        vec![
            (ctx.out(SEVERITY_MODEL), model.to_text().into_bytes()),
            (
                ctx.out("severity-loss.csv"),
                loss_csv(std::slice::from_ref(&report)),
            ),
        ],
    )
}

pub fn generate_features(ctx: &Context) -> Result<Outputs, CliError> {
    let codec = load_codec(ctx)?;
    let real = load_real(ctx)?;
    let smote = SmoteConfig {
        u_shape_alpha: ctx.cfg.u_shape_alpha,
        ..SmoteConfig::new(ctx.cfg.n_synthetic, ctx.cfg.seed)
    };
    let generated = generate_with_codec(&real, &codec, &smote)?;
    let mut outputs = vec![(ctx.out(SYNTHETIC_FEATURES), csv(&generated.portfolio)?)];
    if ctx.cfg.write_neighbors {
        outputs.push((ctx.out(NEIGHBORS), generated.neighbors_csv().into_bytes()));
    }
    ctx.finish(
        "generate-features",
        &[ctx.real_path(), ctx.out(ENCODER)],
        outputs,
    )
}

pub fn simulate(ctx: &Context) -> Result<Outputs, CliError> {
    let freq_path = ctx.out(FREQUENCY_MODEL);
    let sev_path = ctx.out(SEVERITY_MODEL);
    require(&freq_path, "frequency model (run train-frequency first)")?;
    require(&sev_path, "severity model (run train-severity first)")?;
    let features = load_portfolio(
        &ctx.out(SYNTHETIC_FEATURES),
        "synthetic features (run generate-features first)",
    )?;
    let mut cascade = FrequencyCascade::from_text(&read_text(&freq_path)?)?;
    cascade.threshold = ctx.cfg.threshold;
    let severity = SeverityModel::from_text(&read_text(&sev_path)?)?;
    let opts = SimulateOptions {
        mode: ctx.cfg.count_mode,
        seed: ctx.cfg.seed,
        min_amount: ctx.cfg.min_amount,
    };
    let synthetic = simulate_claims(&cascade, &severity, &features, &opts)?;
    ctx.finish(
        "simulate-claims",
        &[freq_path, sev_path, ctx.out(SYNTHETIC_FEATURES)],
        vec![(ctx.out(SYNTHETIC), csv(&synthetic)?)],
    )
}

pub fn compare_stage(ctx: &Context) -> Result<Outputs, CliError> {
    let real = load_real(ctx)?;
    let synthetic = load_portfolio(
        &ctx.out(SYNTHETIC),
        "synthetic portfolio (run simulate-claims first)",
    )?;
    let report = compare(&real, &synthetic, &ctx.cfg.compare_options())?;
    let mut outputs = vec![(ctx.out(REPORT), report.to_text().into_bytes())];
    for (name, body) in report.csv_bundle() {
        outputs.push((
            ctx.cfg.out_dir.join(REPORT_DIR).join(name),
            body.into_bytes(),
        ));
    }
    ctx.finish("compare", &[ctx.real_path(), ctx.out(SYNTHETIC)], outputs)
}

pub fn run_all(ctx: &mut Context) -> Result<Outputs, CliError> {
    let mut all = Vec::new();
    if ctx.cfg.input.is_none() {
        all.extend(bootstrap(ctx)?);
    }
    if ctx.cfg.tune {
        all.extend(tune(ctx)?);
        let tuned = ctx.out(TUNED);
        apply_archs(&mut ctx.cfg, &tuned)?;
    }
    all.extend(train_frequency(ctx)?);
    all.extend(train_severity_stage(ctx)?);
    all.extend(generate_features(ctx)?);
    all.extend(simulate(ctx)?);
    if ctx.cfg.compare {
        all.extend(compare_stage(ctx)?);
    }
    let mut manifest = Manifest::new("run-all");
    for (path, bytes) in &all {
        manifest.output(path, bytes);
    }
    manifest.write(&ctx.cfg.out_dir, &ctx.cfg)?;
    Ok(all)
}
