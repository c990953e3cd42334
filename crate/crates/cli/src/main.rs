use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use confound_audit::audit::{self, emit_plot_data, AuditConfig, AuditReport, FigureId};
use confound_audit::dataset::write_table;
use confound_audit::error::{Error, ErrorClass, Result};
use confound_audit::features::{tsne, TsneConfig};
use confound_audit::matching::{balance_report, matched_case_control, random_case_control, MatchLevel, MatchSpec};
use confound_audit::models::{
    fit_predictor_set, labelled_rows, predictability_screen, regression_screen, FitOptions, PredictorSet, ScreenOptions,
};
use confound_audit::seed;
use confound_audit::stats::{prc_auc, roc_analysis, youden_point};
use confound_audit::synth::{generate, oracle_bayes_auc, ConfoundSpec, OracleTarget};
use serde_json::json;

#[derive(Parser)]
#[command(name = "confound-audit", version, about = "Audit image classifiers for confounding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a spec file.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also compute the Bayes-optimal AUCs (slow for large specs).
        #[arg(long)]
        oracle: bool,
    },
    /// Run the full audit described by a config file.
    Audit {
        #[arg(long)]
        config: PathBuf,
        /// Also write plot data for every figure under `<output_dir>/plots`.
        #[arg(long)]
        plots: bool,
    },
    /// Build one case-control cohort over the test partition.
    Match {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        level: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        caliper: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one predictor set on the training partition and score the test partition.
    Fit {
        #[arg(long)]
        config: PathBuf,
        /// Groups, e.g. `img,pt,hp`.
        #[arg(long)]
        predictors: String,
        /// Binary target; the outcome when omitted.
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predictability (binary) or regression (continuous) screen of covariates from image features.
    Screen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        kind: ScreenKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// ROC analysis of a score file against a label file.
    Roc {
        /// One score per line.
        #[arg(long)]
        scores: PathBuf,
        /// One 0/1 label per line.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 2000)]
        boot: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write plot data for a figure from a saved `report.json`.
    Report {
        #[arg(long)]
        input: PathBuf,
        /// Figure id (fig2a, fig2b, fig2c, fig3, fig4, figs5) or `all`.
        #[arg(long)]
        figure: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Image feature embeddings.
    Features {
        #[command(subcommand)]
        command: FeatureCommand,
    },
}

#[derive(Subcommand)]
enum FeatureCommand {
    /// PCA scores of every row, fitted on the training partition.
    Pca {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two-dimensional t-SNE embedding of the PCA scores.
    Tsne {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30.0)]
        perplexity: f64,
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
        /// Embed a seeded random subset of this many rows.
        #[arg(long)]
        sample: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScreenKind {
    Binary,
    Continuous,
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth {
            spec,
            out,
            seed,
            oracle,
        } => synth(&spec, &out, seed, oracle),
        Command::Audit { config, plots } => {
            let cfg = AuditConfig::from_file(&config)?;
            let report = audit::run_audit_to_dir(&cfg)?;
            if plots {
                let dir = cfg.output_dir.join("plots");
                for f in FigureId::ALL {
                    // Figures whose section is empty (e.g. no continuous covariates) are skipped.
                    match emit_plot_data(&report, f, &dir) {
                        Ok(_) => {}
                        Err(Error::InvalidArgument(m)) => log_skip(&m),
                        Err(e) => return Err(e),
                    }
                }
            }
            print_json(&json!({
                "output_dir": cfg.output_dir,
                "ladder": report.ladder.iter().map(|r| json!({
                    "cohort": r.label, "auc": r.auc, "ci_low": r.ci_low, "ci_high": r.ci_high,
                })).collect::<Vec<_>>(),
                "warnings": report.metadata.warnings,
            }))
        }
        Command::Match {
            config,
            level,
            seed,
            caliper,
            out,
        } => match_cmd(&config, &level, seed, caliper, &out),
        Command::Fit {
            config,
            predictors,
            target,
            out,
        } => fit_cmd(&config, &predictors, target.as_deref(), out.as_deref()),
        Command::Screen { config, kind, out } => screen_cmd(&config, kind, &out),
        Command::Roc {
            scores,
            labels,
            boot,
            seed,
        } => roc_cmd(&scores, &labels, boot, seed),
        Command::Report { input, figure, out } => {
            let text = fs::read_to_string(&input).map_err(|e| Error::io(&input, e))?;
            let report: AuditReport =
                serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", input.display())))?;
            let figures = if figure.eq_ignore_ascii_case("all") {
                FigureId::ALL.to_vec()
            } else {
                vec![figure.parse()?]
            };
            write_plots(&report, figures, &out)
        }
        Command::Features { command } => features_cmd(command),
    }
}

fn log_skip(msg: &str) {
    eprintln!("note: {msg}");
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    println!(
        "{}",
        serde_json::to_string_pretty(v).map_err(|e| Error::Data(e.to_string()))?
    );
    Ok(())
}

fn write_plots(report: &AuditReport, figures: Vec<FigureId>, out: &Path) -> Result<()> {
    for f in figures {
        for p in emit_plot_data(report, f, out)? {
            println!("{}", p.display());
        }
    }
    Ok(())
}

fn synth(spec_path: &Path, out: &Path, seed: Option<u64>, oracle: bool) -> Result<()> {
    let mut spec = ConfoundSpec::from_file(spec_path)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let (ds, truth) = generate(&spec)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_table(&ds, &out.join("data.csv"), b',')?;
    let schema_path = out.join("schema.toml");
    fs::write(&schema_path, ds.schema().to_toml_string()).map_err(|e| Error::io(&schema_path, e))?;
    let mut summary = json!({
        "seed": spec.seed,
        "rows": ds.n_rows(),
        "intercept": truth.intercept,
        "direction_labels": truth.direction_labels,
    });
    if oracle {
        summary["oracle_auc_full"] = json!(oracle_bayes_auc(&spec, OracleTarget::Full)?);
        summary["oracle_auc_matched"] = json!(oracle_bayes_auc(&spec, OracleTarget::Matched)?);
    }
    let truth_path = out.join("truth.json");
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Data(e.to_string()))?;
    fs::write(&truth_path, text).map_err(|e| Error::io(&truth_path, e))?;
    print_json(&summary)
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn match_cmd(config: &Path, level: &str, seed: Option<u64>, caliper: Option<f64>, out: &Path) -> Result<()> {
    let cfg = AuditConfig::from_file(config)?;
    let level: MatchLevel = level.parse()?;
    let seed = seed.unwrap_or_else(|| seed::derive(cfg.seed, &format!("match-{level}")));
    let prep = audit::prepare(&cfg)?;
    let test = &prep.partition.test_indices;
    let test_ds = prep.imputed.subset(test);
    let cohort = if level == MatchLevel::Random && caliper.is_none() {
        random_case_control(&test_ds, seed)?
    } else {
        let mut spec = MatchSpec::for_level(&test_ds, level, &cfg.demographics, seed)?;
        spec.caliper = caliper.or(cfg.caliper);
        matched_case_control(&test_ds, &spec)?
    };
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let ids = test_ds.row_ids();
    write_csv(
        &out.join("pairs.csv"),
        &["case_id", "control_id"],
        cohort.pairs.iter().map(|&(c, k)| vec![ids[c].clone(), ids[k].clone()]),
    )?;
    let bin_test = prep.binarized.subset(test);
    let balance = balance_report(&bin_test, &cohort, &prep.binary_covariates)?;
    let p = |r: &Option<confound_audit::stats::AssociationResult>| r.map_or(String::new(), |a| a.p_value.to_string());
    write_csv(
        &out.join("balance.csv"),
        &["covariate", "p_before", "p_after"],
        balance
            .rows
            .iter()
            .map(|r| vec![r.covariate.clone(), p(&r.before), p(&r.after)]),
    )?;
    print_json(&json!({
        "level": level.to_string(),
        "seed": seed,
        "pairs": cohort.pairs.len(),
        "unmatched_cases": cohort.unmatched_cases.len(),
        "caliper_exceeded": cohort.caliper_exceeded.len(),
        "zero_range": cohort.zero_range,
        "significant_before": balance.significant_before,
        "significant_after": balance.significant_after,
    }))
}

fn fit_cmd(config: &Path, predictors: &str, target: Option<&str>, out: Option<&Path>) -> Result<()> {
    let cfg = AuditConfig::from_file(config)?;
    let set: PredictorSet = predictors.parse()?;
    let prep = audit::prepare(&cfg)?;
    let outcome = prep.binarized.outcome_column().name().to_string();
    let target = target.unwrap_or(&outcome).to_string();
    if set.covariates(&prep.imputed).contains(&target) {
        return Err(Error::InvalidArgument(format!(
            "target `{target}` is one of the predictors"
        )));
    }
    let labels = prep.binarized.column(&target)?.flags()?;
    let label = audit::model_label(&set);
    let opts = FitOptions {
        seed: seed::derive(cfg.seed, &format!("fit-{label}")),
        ..FitOptions::default()
    };
    let part = &prep.partition;
    let fitted = fit_predictor_set(
        &prep.imputed,
        Some(&prep.scores),
        &set,
        &labels,
        &part.train_indices,
        &part.test_indices,
        &opts,
    )?;
    let (_, y) = labelled_rows(&labels, &fitted.test_rows);
    let roc = roc_analysis(
        &fitted.test_scores,
        &y,
        cfg.bootstrap,
        seed::derive(cfg.seed, &format!("roc-{label}")),
    )?;
    if let Some(out) = out {
        let ids = prep.imputed.row_ids();
        write_csv(
            out,
            &["row_id", "label", "score"],
            fitted
                .test_rows
                .iter()
                .zip(&fitted.test_scores)
                .zip(&y)
                .map(|((&r, s), &l)| vec![ids[r].clone(), (l as u8).to_string(), s.to_string()]),
        )?;
    }
    print_json(&json!({
        "predictors": set.to_string(),
        "target": target,
        "lambda": fitted.model.ridge_lambda,
        "intercept": fitted.model.intercept,
        "coefficients": fitted.model.columns.iter().zip(fitted.model.coefficients.iter())
            .map(|(c, b)| json!({"column": c, "value": b})).collect::<Vec<_>>(),
        "auc": roc.auc,
        "ci_low": roc.ci_low,
        "ci_high": roc.ci_high,
        "n_cases": roc.n_cases,
        "n_controls": roc.n_controls,
    }))
}

fn screen_cmd(config: &Path, kind: ScreenKind, out: &Path) -> Result<()> {
    let cfg = AuditConfig::from_file(config)?;
    let prep = audit::prepare(&cfg)?;
    let text = match kind {
        ScreenKind::Binary => {
            let mut targets = if cfg.screen_targets.is_empty() {
                prep.binary_covariates.clone()
            } else {
                cfg.screen_targets.clone()
            };
            if cfg.screen_targets.is_empty() {
                targets.push(prep.binarized.outcome_column().name().to_string());
            }
            let opts = ScreenOptions {
                replicates: cfg.bootstrap,
                seed: seed::derive(cfg.seed, "screen"),
                ..ScreenOptions::default()
            };
            let rows = predictability_screen(&prep.binarized, &prep.scores, &prep.partition, &targets, &opts)?;
            serde_json::to_string_pretty(&rows)
        }
        ScreenKind::Continuous => {
            let targets: Vec<String> = if cfg.regression_targets.is_empty() {
                prep.filtered
                    .columns()
                    .iter()
                    .filter(|c| c.spec.group.is_covariate() && c.spec.kind == confound_audit::dataset::Kind::Continuous)
                    .map(|c| c.spec.name.clone())
                    .collect()
            } else {
                cfg.regression_targets.clone()
            };
            let rows = regression_screen(&prep.filtered, &prep.scores, &prep.partition, &targets)?;
            serde_json::to_string_pretty(&rows)
        }
    }
    .map_err(|e| Error::Data(e.to_string()))?;
    fs::write(out, text).map_err(|e| Error::io(out, e))
}

fn read_column(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn roc_cmd(scores: &Path, labels: &Path, boot: usize, seed: u64) -> Result<()> {
    let s: Vec<f64> = read_column(scores)?
        .iter()
        .map(|v| {
            v.parse()
                .map_err(|_| Error::Data(format!("score `{v}` is not a number")))
        })
        .collect::<Result<_>>()?;
    let y: Vec<bool> = read_column(labels)?
        .iter()
        .map(|v| match v.as_str() {
            "0" | "false" => Ok(false),
            "1" | "true" => Ok(true),
            other => Err(Error::Data(format!("label `{other}` is not 0 or 1"))),
        })
        .collect::<Result<_>>()?;
    if boot < audit::MIN_REPLICATES {
        return Err(Error::Config(format!(
            "--boot must be at least {}",
            audit::MIN_REPLICATES
        )));
    }
    let roc = roc_analysis(&s, &y, boot, seed)?;
    let prc = prc_auc(&s, &y)?;
    let op = youden_point(&s, &y)?;
    print_json(&json!({
        "auc": roc.auc,
        "ci_low": roc.ci_low,
        "ci_high": roc.ci_high,
        "auprc": prc.auprc,
        "n_cases": roc.n_cases,
        "n_controls": roc.n_controls,
        "operating_point": op,
    }))
}

fn features_cmd(cmd: FeatureCommand) -> Result<()> {
    match cmd {
        FeatureCommand::Pca { config, out } => {
            let cfg = AuditConfig::from_file(&config)?;
            let prep = audit::prepare(&cfg)?;
            let ids = prep.imputed.row_ids();
            let k = prep.scores.ncols();
            let header: Vec<String> = std::iter::once("row_id".to_string())
                .chain((1..=k).map(|i| format!("PC{i}")))
                .collect();
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            write_csv(
                &out,
                &header,
                (0..prep.scores.nrows()).map(|r| {
                    std::iter::once(ids[r].clone())
                        .chain((0..k).map(|j| prep.scores[(r, j)].to_string()))
                        .collect()
                }),
            )
        }
        FeatureCommand::Tsne {
            config,
            out,
            perplexity,
            iterations,
            sample,
        } => {
            let cfg = AuditConfig::from_file(&config)?;
            let prep = audit::prepare(&cfg)?;
            let n = prep.scores.nrows();
            let mut rows: Vec<usize> = (0..n).collect();
            if let Some(m) = sample.filter(|&m| m < n) {
                use rand::seq::SliceRandom;
                rows.shuffle(&mut seed::rng(seed::derive(cfg.seed, "tsne-sample")));
                rows.truncate(m);
                rows.sort_unstable();
            }
            let x = nalgebra::DMatrix::from_fn(rows.len(), prep.scores.ncols(), |i, j| prep.scores[(rows[i], j)]);
            let tcfg = TsneConfig {
                perplexity,
                iterations,
                seed: seed::derive(cfg.seed, "tsne"),
                ..TsneConfig::default()
            };
            let result = tsne(&x, &tcfg)?;
            let ids = prep.imputed.row_ids();
            let y = prep.binarized.outcome();
            write_csv(
                &out,
                &["row_id", "outcome", "x", "y"],
                rows.iter().enumerate().map(|(i, &r)| {
                    vec![
                        ids[r].clone(),
                        y[r].map_or("NA".into(), |b| (b as u8).to_string()),
                        result.embedding[(i, 0)].to_string(),
                        result.embedding[(i, 1)].to_string(),
                    ]
                }),
            )?;
            print_json(&json!({"rows": rows.len(), "initial_kl": result.initial_kl, "final_kl": result.final_kl}))
        }
    }
}
