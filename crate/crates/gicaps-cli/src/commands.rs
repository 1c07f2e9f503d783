//! The five subcommands. Every command writes `run_config.json` plus its own
//! artifacts into the output directory; each artifact starts with a
//! reproducibility header carrying the resolved configuration and seed.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use gicaps::dataset::{self, Dataset};
use gicaps::evaluate::{self, EvalReport};
use gicaps::oversample;
use gicaps::seeding;

use crate::config::{ConfigError, RunConfig};

/// Runtime failure; maps to exit code 1.
#[derive(Debug)]
pub struct RunError(pub String);

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for RunError {}

impl From<gicaps::Error> for RunError {
    fn from(e: gicaps::Error) -> Self {
        RunError(e.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError(e.to_string())
    }
}

pub enum CommandError {
    Config(ConfigError),
    Run(RunError),
}

impl From<ConfigError> for CommandError {
    fn from(e: ConfigError) -> Self {
        CommandError::Config(e)
    }
}

impl From<RunError> for CommandError {
    fn from(e: RunError) -> Self {
        CommandError::Run(e)
    }
}

impl From<gicaps::Error> for CommandError {
    fn from(e: gicaps::Error) -> Self {
        CommandError::Run(RunError(e.to_string()))
    }
}

impl From<std::io::Error> for CommandError {
    fn from(e: std::io::Error) -> Self {
        CommandError::Run(RunError(e.to_string()))
    }
}

pub struct RunContext {
    pub cfg: RunConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl RunContext {
    pub fn new(cfg: RunConfig) -> Result<Self, ConfigError> {
        let seed = cfg.resolve_seed()?;
        let out = cfg.resolve_out()?;
        Ok(Self { cfg, seed, out })
    }

    fn prepare_out(&self) -> Result<(), RunError> {
        std::fs::create_dir_all(&self.out)?;
        let path = self.out.join("run_config.json");
        std::fs::write(path, format!("{}\n", self.cfg.echo_json()))?;
        Ok(())
    }

    fn header_comments(&self) -> Vec<String> {
        vec![
            format!("gicaps-config: {}", self.cfg.echo_json()),
            format!("seed: {}", self.seed),
        ]
    }

    /// Load the configured dataset: CSV when given, otherwise generated.
    fn load_dataset(&self) -> Result<Dataset, CommandError> {
        if let Some(csv) = &self.cfg.dataset.csv {
            let label = self.cfg.label_column()?;
            Ok(dataset::load_csv(csv, &label, self.cfg.dataset.has_header)?)
        } else {
            let specs = self.cfg.blob_specs()?;
            Ok(dataset::generate_gmm_data(
                &specs,
                seeding::derive(self.seed, "generate"),
            )?)
        }
    }

    fn write_jsonl<T: Serialize>(&self, path: &Path, records: &[T]) -> Result<(), RunError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            f,
            "{}",
            serde_json::json!({
                "schema": "gicaps-header/1",
                "config": serde_json::from_str::<serde_json::Value>(&self.cfg.echo_json())
                    .expect("config echo is json"),
                "seed": self.seed,
            })
        )?;
        for r in records {
            serde_json::to_writer(&mut f, r).map_err(std::io::Error::other)?;
            writeln!(f)?;
        }
        f.flush()?;
        Ok(())
    }

    fn write_text(&self, path: &Path, body: &str) -> Result<(), RunError> {
        let mut out = String::new();
        for line in self.header_comments() {
            writeln!(out, "# {line}").expect("string write");
        }
        out.push_str(body);
        std::fs::write(path, out)?;
        Ok(())
    }
}

fn class_count_table(before: &Dataset, after: &Dataset) -> String {
    let mut out = String::new();
    writeln!(out, "{:<12} {:>10} {:>10}", "class", "before", "after").expect("string write");
    for class in 0..before.n_classes() {
        writeln!(
            out,
            "{:<12} {:>10} {:>10}",
            before.label_names[class],
            before.class_size(class),
            after.class_size(class)
        )
        .expect("string write");
    }
    out
}

/// `generate`: sample the configured blobs and write the dataset.
pub fn cmd_generate(ctx: &RunContext) -> Result<(), CommandError> {
    let specs = ctx.cfg.blob_specs()?;
    ctx.prepare_out()?;
    let ds = dataset::generate_gmm_data(&specs, seeding::derive(ctx.seed, "generate"))?;
    dataset::write_csv(&ds, &ctx.out.join("dataset.csv"), &ctx.header_comments())?;
    ctx.write_text(
        &ctx.out.join("class_counts.txt"),
        &class_count_table(&ds, &ds),
    )?;
    Ok(())
}

/// `resample`: normalize, apply the configured method, and write the
/// balanced dataset plus audits and provenance.
pub fn cmd_resample(ctx: &RunContext) -> Result<(), CommandError> {
    let method = ctx
        .cfg
        .resample
        .as_ref()
        .ok_or_else(|| ConfigError("[resample] section with a method is required".into()))?
        .method
        .clone();
    let spec = ctx.cfg.method_spec(&method)?;
    ctx.prepare_out()?;

    let raw = ctx.load_dataset()?;
    let (normalized, _params) = dataset::normalize_minmax(&raw)?;
    let outcome = spec.apply(&normalized, seeding::derive(ctx.seed, "resample"))?;

    dataset::write_csv(
        &outcome.dataset,
        &ctx.out.join("resampled.csv"),
        &ctx.header_comments(),
    )?;
    ctx.write_text(
        &ctx.out.join("class_counts.txt"),
        &class_count_table(&normalized, &outcome.dataset),
    )?;
    if !outcome.provenance.is_empty() {
        ctx.write_jsonl(&ctx.out.join("provenance.jsonl"), &outcome.provenance)?;
    }
    if !outcome.audits.is_empty() {
        let mut merged = Vec::new();
        for (class, audit) in &outcome.audits {
            for rec in &audit.records {
                let mut value = serde_json::to_value(rec).map_err(std::io::Error::other)?;
                value
                    .as_object_mut()
                    .expect("record object")
                    .insert("class".into(), serde_json::json!(class));
                merged.push(value);
            }
        }
        ctx.write_jsonl(&ctx.out.join("undersample_audit.jsonl"), &merged)?;
    }
    if outcome.dropped > 0 {
        log::warn!("{} synthetic point(s) dropped", outcome.dropped);
    }
    Ok(())
}

/// `benchmark`: cross-validate every configured method; failures are
/// recorded and reported through the exit code.
pub fn cmd_benchmark(ctx: &RunContext) -> Result<(), CommandError> {
    let section = ctx
        .cfg
        .benchmark
        .clone()
        .ok_or_else(|| ConfigError("[benchmark] section is required".into()))?;
    // validate method names before any work
    for method in &section.methods {
        ctx.cfg.method_spec(method)?;
    }
    ctx.prepare_out()?;

    let ds = ctx.load_dataset()?;
    let name = ctx.cfg.dataset_name();
    let classifier = ctx.cfg.classifier_spec();

    let mut reports: Vec<EvalReport> = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    for method in &section.methods {
        let spec = ctx.cfg.method_spec(method)?;
        match evaluate::run_cv(&ds, &name, &spec, &classifier, section.folds, ctx.seed) {
            Ok(report) => reports.push(report),
            Err(e) => {
                let msg = format!("{method} on {name}: {e}");
                log::error!("{msg}");
                failures.push(msg);
            }
        }
    }

    ctx.write_jsonl(&ctx.out.join("report.jsonl"), &reports)?;
    ctx.write_text(&ctx.out.join("report.txt"), &evaluate::render_table(&reports))?;
    if !failures.is_empty() {
        ctx.write_text(&ctx.out.join("failures.txt"), &failures.join("\n"))?;
        return Err(CommandError::Run(RunError(format!(
            "{} of {} runs failed",
            failures.len(),
            section.methods.len()
        ))));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct MarginRecord {
    method: String,
    class_a: usize,
    class_b: usize,
    n_pca: usize,
    margin: f64,
}

/// `margin`: post-resampling nearest-neighbor margin between two classes in
/// PCA space, per method.
pub fn cmd_margin(ctx: &RunContext) -> Result<(), CommandError> {
    let section = ctx
        .cfg
        .margin
        .clone()
        .ok_or_else(|| ConfigError("[margin] section is required".into()))?;
    for method in &section.methods {
        ctx.cfg.method_spec(method)?;
    }
    ctx.prepare_out()?;

    let raw = ctx.load_dataset()?;
    let (normalized, _) = dataset::normalize_minmax(&raw)?;

    let mut records = Vec::new();
    let mut body = String::new();
    writeln!(body, "{:<12} {:>10}", "method", "margin").expect("string write");
    for method in &section.methods {
        let spec = ctx.cfg.method_spec(method)?;
        let outcome = spec.apply(&normalized, seeding::derive(ctx.seed, "resample"))?;
        let margin = evaluate::margin_ablation(
            &outcome.dataset,
            section.class_a,
            section.class_b,
            section.n_pca,
        )?;
        writeln!(body, "{:<12} {:>10.4}", method, margin).expect("string write");
        records.push(MarginRecord {
            method: method.clone(),
            class_a: section.class_a,
            class_b: section.class_b,
            n_pca: section.n_pca,
            margin,
        });
    }
    ctx.write_jsonl(&ctx.out.join("margins.jsonl"), &records)?;
    ctx.write_text(&ctx.out.join("margins.txt"), &body)?;
    Ok(())
}

/// `dump-points`: resample and dump every point (original + synthetic) with
/// its provenance columns, ready for plotting.
pub fn cmd_dump_points(ctx: &RunContext) -> Result<(), CommandError> {
    let method = ctx
        .cfg
        .resample
        .as_ref()
        .ok_or_else(|| ConfigError("[resample] section with a method is required".into()))?
        .method
        .clone();
    let spec = ctx.cfg.method_spec(&method)?;
    ctx.prepare_out()?;

    let raw = ctx.load_dataset()?;
    let (normalized, _) = dataset::normalize_minmax(&raw)?;
    let outcome = spec.apply(&normalized, seeding::derive(ctx.seed, "resample"))?;

    let n_original = outcome.dataset.n_rows() - outcome.provenance.len();
    let mut body = String::new();
    let feature_cols: Vec<String> = (0..outcome.dataset.n_features())
        .map(|j| format!("x{j}"))
        .collect();
    writeln!(body, "{},label,origin,m_index,v_index,param", feature_cols.join(","))
        .expect("string write");
    for i in 0..outcome.dataset.n_rows() {
        for v in outcome.dataset.row(i) {
            write!(body, "{v},").expect("string write");
        }
        let label = &outcome.dataset.label_names[outcome.dataset.labels[i]];
        if i < n_original {
            writeln!(body, "{label},original,,,").expect("string write");
        } else {
            let rec = &outcome.provenance[i - n_original];
            writeln!(
                body,
                "{label},synthetic,{},{},{}",
                rec.m_index, rec.v_index, rec.param
            )
            .expect("string write");
        }
    }
    ctx.write_text(&ctx.out.join("points.csv"), &body)?;
    if !outcome.provenance.is_empty() {
        oversample::write_provenance_jsonl(
            &outcome.provenance,
            &ctx.out.join("provenance.jsonl"),
        )?;
    }
    Ok(())
}
