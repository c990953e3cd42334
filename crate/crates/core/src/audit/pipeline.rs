use std::collections::{BTreeMap, BTreeSet};

use log::{info, warn};
use nalgebra::DMatrix;
use rayon::prelude::*;

use super::config::AuditConfig;
use super::report::{
    sha256_file, AssociationRow, AuditReport, CharacteristicRow, ComparisonRow, CurveSet, PcaRow, PerformanceRow,
    RunMetadata,
};
use crate::dataset::{
    apply_filters, binarize, default_binarization_rules, impute, load_table, partition_by_patient, ColumnData, Dataset,
    Group, Kind, LoadOptions, Partition, Schema,
};
use crate::error::{Error, Result};
use crate::features::{fit_pca, PcaModel};
use crate::matching::{covariate_association, matched_case_control, random_case_control, MatchLevel, MatchSpec, ALPHA};
use crate::models::{
    ensemble_naive_bayes, fit_predictor_set, predictability_screen, regression_screen, FitOptions, FittedPredictor,
    PredictorSet, ScreenOptions,
};
use crate::seed;
use crate::serde_float;
use crate::stats::{auc_test_unpaired, delong_test, prc_auc, roc_analysis, youden_point};

pub const CROSS_SECTIONAL: &str = "cross-sectional";

/// Runs the full audit. On failure the error names the stage; use
/// [`run_audit_partial`] to keep the tables of the stages that finished.
pub fn run_audit(cfg: &AuditConfig) -> Result<AuditReport> {
    match run_audit_partial(cfg) {
        (report, None) => Ok(report),
        (_, Some(e)) => Err(e),
    }
}

/// Runs the audit and writes its outputs to `cfg.output_dir`. When a stage
/// fails, the finished tables are still written and the manifest is marked
/// incomplete.
pub fn run_audit_to_dir(cfg: &AuditConfig) -> Result<AuditReport> {
    let (report, err) = run_audit_partial(cfg);
    let written = report.write(&cfg.output_dir);
    match (err, written) {
        (Some(e), _) => Err(e),
        (None, Err(e)) => Err(e),
        (None, Ok(_)) => Ok(report),
    }
}

/// Runs the audit, returning whatever was computed and the failure, if any.
pub fn run_audit_partial(cfg: &AuditConfig) -> (AuditReport, Option<Error>) {
    let mut run = Run::new(cfg);
    let result = execute(cfg, &mut run);
    run.finish_stage();
    let mut report = run.report;
    let err = match result {
        Ok(()) => {
            report.metadata.complete = true;
            None
        }
        Err(e) => {
            let stage = run.stage.to_string();
            warn!("audit stage `{stage}` failed: {e}");
            report.metadata.failed_stage = Some(stage.clone());
            report.metadata.failure = Some(e.to_string());
            report.metadata.stages_completed.retain(|s| *s != stage);
            Some(Error::Stage {
                stage,
                source: Box::new(e),
            })
        }
    };
    (report, err)
}

struct Run {
    master: u64,
    stage: &'static str,
    report: AuditReport,
}

impl Run {
    fn new(cfg: &AuditConfig) -> Self {
        let metadata = RunMetadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: cfg.seed,
            stage_seeds: BTreeMap::new(),
            input_digests: BTreeMap::new(),
            bootstrap: cfg.bootstrap,
            train_ratio: cfg.train_ratio,
            pca_k: cfg.pca_k,
            n_rows: 0,
            n_train: 0,
            n_test: 0,
            stages_completed: Vec::new(),
            complete: false,
            failed_stage: None,
            failure: None,
            warnings: Vec::new(),
        };
        Self {
            master: cfg.seed,
            stage: "",
            report: AuditReport {
                metadata,
                characteristics: Vec::new(),
                pca: Vec::new(),
                screen_binary: Vec::new(),
                screen_continuous: Vec::new(),
                associations: Vec::new(),
                balance: Vec::new(),
                ladder: Vec::new(),
                predictors: Vec::new(),
                comparisons: Vec::new(),
                curves: Vec::new(),
            },
        }
    }

    fn finish_stage(&mut self) {
        if !self.stage.is_empty() {
            self.report.metadata.stages_completed.push(self.stage.to_string());
        }
    }

    fn begin(&mut self, stage: &'static str) {
        self.finish_stage();
        info!("audit stage: {stage}");
        self.stage = stage;
    }

    fn seed(&mut self, label: &str) -> u64 {
        let s = seed::derive(self.master, label);
        self.report.metadata.stage_seeds.insert(label.to_string(), s);
        s
    }

    fn warn(&mut self, msg: String) {
        warn!("{msg}");
        self.report.metadata.warnings.push(msg);
    }
}

/// Data views and image scores shared by every analysis stage.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// Filtered, not imputed.
    pub filtered: Dataset,
    /// Filtered and imputed; used for modelling and matching.
    pub imputed: Dataset,
    /// Filtered and binarized, not imputed; used for screens and tests.
    pub binarized: Dataset,
    /// PT and HP variables that are binary in `binarized`.
    pub binary_covariates: Vec<String>,
    pub partition: Partition,
    pub pca: PcaModel,
    /// PCA scores of every row.
    pub scores: DMatrix<f64>,
}

/// Runs the stages up to PCA: ingest, filter, impute, binarize, partition
/// and PCA on the training rows. Seeds match those of a full audit.
pub fn prepare(cfg: &AuditConfig) -> Result<Prepared> {
    let mut run = Run::new(cfg);
    prepare_with(cfg, &mut run).map_err(|e| Error::Stage {
        stage: run.stage.to_string(),
        source: Box::new(e),
    })
}

fn prepare_with(cfg: &AuditConfig, run: &mut Run) -> Result<Prepared> {
    run.begin("ingest");
    cfg.validate()?;
    let digests = &mut run.report.metadata.input_digests;
    digests.insert("data".into(), sha256_file(&cfg.data)?);
    digests.insert("schema".into(), sha256_file(&cfg.schema)?);
    if let Some(f) = &cfg.features {
        digests.insert("features".into(), sha256_file(f)?);
    }
    let schema = Schema::from_file(&cfg.schema)?;
    let options = LoadOptions {
        delimiter: cfg.delimiter_byte()?,
        features_path: cfg.features.clone(),
    };
    let loaded = load_table(&cfg.data, &schema, &options)?;
    if !loaded.warnings.is_empty() {
        run.warn(format!("{} unparseable cells set missing", loaded.warnings.len()));
    }
    let raw = loaded.dataset;
    run.report.metadata.n_rows = raw.n_rows();

    run.begin("filter");
    let (filtered, altered) = apply_filters(&raw, &cfg.filters)?;
    if altered > 0 {
        run.warn(format!("{altered} out-of-range cells set missing by filters"));
    }

    run.begin("impute");
    let imputed = impute(&filtered, &cfg.regression_impute)?;
    for w in imputed.warnings {
        run.warn(w);
    }
    let imputed = imputed.dataset;

    run.begin("binarize");
    let mut rules = Vec::new();
    for rule in default_binarization_rules(&filtered, &cfg.binarization) {
        match binarize(&filtered, std::slice::from_ref(&rule)) {
            Ok(_) => rules.push(rule),
            Err(Error::DegenerateVariable(v)) => run.warn(format!(
                "`{v}` is degenerate after binarization and is left out of binary analyses"
            )),
            Err(e) => return Err(e),
        }
    }
    let binarized = binarize(&filtered, &rules)?;
    let binary_covariates: Vec<String> = binarized
        .names_in(&[Group::Pt, Group::Hp])
        .into_iter()
        .filter(|n| binarized.column(n).is_ok_and(|c| c.spec.kind == Kind::Binary))
        .collect();

    run.begin("partition");
    let part_seed = run.seed("partition");
    let part = partition_by_patient(&filtered, cfg.train_ratio, part_seed)?;
    run.report.metadata.n_train = part.train_indices.len();
    run.report.metadata.n_test = part.test_indices.len();

    run.begin("pca");
    let features = filtered
        .features()
        .ok_or_else(|| Error::Data("the dataset has no image feature columns".into()))?;
    let train_x = rows_of(features, &part.train_indices);
    let pca = fit_pca(&train_x, cfg.pca_k)?;
    if pca.k() < cfg.pca_k {
        run.warn(format!("feature rank limits PCA to {} components", pca.k()));
    }
    let scores = pca.project(features)?;
    let mut cumulative = 0.0;
    for (i, &v) in pca.explained_variance.iter().enumerate() {
        let fraction = v / pca.total_variance;
        cumulative += fraction;
        run.report.pca.push(PcaRow {
            component: i + 1,
            explained_variance: v,
            explained_fraction: fraction,
            cumulative_fraction: cumulative,
        });
    }

    Ok(Prepared {
        filtered,
        imputed,
        binarized,
        binary_covariates,
        partition: part,
        pca,
        scores,
    })
}

fn execute(cfg: &AuditConfig, run: &mut Run) -> Result<()> {
    let Prepared {
        filtered,
        imputed,
        binarized,
        binary_covariates,
        partition: part,
        pca: _,
        scores,
    } = prepare_with(cfg, run)?;

    run.begin("screen");
    let targets = if cfg.screen_targets.is_empty() {
        let mut t = binary_covariates.clone();
        t.push(binarized.outcome_column().name().to_string());
        t
    } else {
        cfg.screen_targets.clone()
    };
    let screen_opts = ScreenOptions {
        replicates: cfg.bootstrap,
        seed: run.seed("screen"),
        ..ScreenOptions::default()
    };
    run.report.screen_binary = predictability_screen(&binarized, &scores, &part, &targets, &screen_opts)?;
    let regression_targets = if cfg.regression_targets.is_empty() {
        filtered
            .columns()
            .iter()
            .filter(|c| c.spec.group.is_covariate() && c.spec.kind == Kind::Continuous)
            .map(|c| c.spec.name.clone())
            .collect()
    } else {
        cfg.regression_targets.clone()
    };
    if !regression_targets.is_empty() {
        run.report.screen_continuous = regression_screen(&filtered, &scores, &part, &regression_targets)?;
    }

    run.begin("associations");
    let all_rows: Vec<usize> = (0..binarized.n_rows()).collect();
    for cov in &binary_covariates {
        let r = covariate_association(&binarized, &all_rows, cov)?;
        run.report.associations.push(AssociationRow::new("all", cov, r, ALPHA));
    }
    if let Some(device) = &cfg.device_variable {
        let strata = stratum_labels(&filtered, device)?;
        let levels: BTreeSet<&String> = strata.iter().flatten().collect();
        for level in levels {
            let rows: Vec<usize> = (0..strata.len())
                .filter(|&i| strata[i].as_ref() == Some(level))
                .collect();
            let stratum = format!("{device}={level}");
            for cov in binary_covariates.iter().filter(|c| *c != device) {
                let r = covariate_association(&binarized, &rows, cov)?;
                run.report
                    .associations
                    .push(AssociationRow::new(&stratum, cov, r, ALPHA));
            }
        }
    }

    run.begin("ladder");
    let labels = imputed.outcome();
    let img_set: PredictorSet = "img".parse()?;
    let img_opts = FitOptions {
        seed: run.seed("fit-img"),
        out_of_fold: true,
        ..FitOptions::default()
    };
    let img = fit_predictor_set(
        &imputed,
        Some(&scores),
        &img_set,
        &labels,
        &part.train_indices,
        &part.test_indices,
        &img_opts,
    )?;
    let mut score_of = vec![None; imputed.n_rows()];
    for (&r, &s) in img.test_rows.iter().zip(&img.test_scores) {
        score_of[r] = Some(s);
    }
    let cohorts = build_cohorts(cfg, run, &imputed, &part, &img.test_rows)?;
    let mut cross: Option<(Vec<f64>, Vec<bool>)> = None;
    for (label, rows, unmatched) in &cohorts {
        let s: Vec<f64> = rows.iter().map(|&r| score_of[r].expect("scored test row")).collect();
        let y: Vec<bool> = rows.iter().map(|&r| labels[r].expect("labelled row")).collect();
        let roc_seed = run.seed(&format!("roc-{label}"));
        let (mut row, curve) = evaluate(label, "ladder", &s, &y, cfg.bootstrap, roc_seed, None)?;
        let mut significant = 0;
        for cov in &binary_covariates {
            let r = covariate_association(&binarized, rows, cov)?;
            let a = AssociationRow::new(label, cov, r, ALPHA);
            significant += a.significant as usize;
            run.report.balance.push(a);
        }
        row.significant_covariates = Some(significant);
        row.unmatched_cases = Some(*unmatched);
        match &cross {
            None => cross = Some((s, y)),
            Some((cs, cy)) => {
                let test_seed = run.seed(&format!("ladder-test-{label}"));
                let cmp = auc_test_unpaired((&s, &y), (cs, cy), cfg.bootstrap, test_seed)?;
                row.p_vs_cross_sectional = Some(cmp.p_value);
            }
        }
        run.report
            .characteristics
            .extend(characteristics(&binarized, label, rows, &binary_covariates)?);
        run.report.ladder.push(row);
        run.report.curves.push(curve);
    }

    run.begin("predictors");
    let others: Vec<PredictorSet> = PredictorSet::standard().into_iter().filter(|s| *s != img_set).collect();
    let fit_seeds: Vec<u64> = others
        .iter()
        .map(|s| run.seed(&format!("fit-{}", model_label(s))))
        .collect();
    let fitted: Vec<FittedPredictor> = others
        .par_iter()
        .zip(&fit_seeds)
        .map(|(set, &seed)| {
            let opts = FitOptions {
                seed,
                out_of_fold: !set.has_img(),
                ..FitOptions::default()
            };
            fit_predictor_set(
                &imputed,
                Some(&scores),
                set,
                &labels,
                &part.train_indices,
                &part.test_indices,
                &opts,
            )
        })
        .collect::<Result<_>>()?;
    let mut models: Vec<(String, Vec<f64>, Option<f64>)> = vec![(
        model_label(&img_set),
        img.test_scores.clone(),
        Some(img.selection.lambda),
    )];
    for (set, f) in others.iter().zip(&fitted) {
        debug_assert_eq!(f.test_rows, img.test_rows);
        models.push((model_label(set), f.test_scores.clone(), Some(f.selection.lambda)));
    }
    let y_train: Vec<bool> = img
        .train_rows
        .iter()
        .map(|&r| labels[r].expect("labelled row"))
        .collect();
    let img_oof = img.train_oof.as_ref().expect("out-of-fold scores requested");
    for (cov_label, nb_label) in [("pt", "nb_imgPt"), ("ptHp", "nb_imgPtHp")] {
        let idx = others
            .iter()
            .position(|s| model_label(s) == cov_label)
            .expect("standard set");
        let cov = &fitted[idx];
        let cov_oof = cov.train_oof.as_ref().expect("out-of-fold scores requested");
        let s = ensemble_naive_bayes(img_oof, &img.test_scores, cov_oof, &cov.test_scores, &y_train)?;
        models.push((nb_label.to_string(), s, None));
    }
    let y_test: Vec<bool> = img
        .test_rows
        .iter()
        .map(|&r| labels[r].expect("labelled row"))
        .collect();
    for (label, s, lambda) in &models {
        let roc_seed = run.seed(&format!("roc-{label}"));
        let (row, curve) = evaluate(label, "predictors", s, &y_test, cfg.bootstrap, roc_seed, *lambda)?;
        run.report.predictors.push(row);
        run.report.curves.push(curve);
    }
    let by_label: BTreeMap<&str, &Vec<f64>> = models.iter().map(|(l, s, _)| (l.as_str(), s)).collect();
    for (a, b) in COMPARISONS {
        let cmp = delong_test(by_label[a], by_label[b], &y_test)?;
        run.report.comparisons.push(ComparisonRow {
            model_a: a.to_string(),
            model_b: b.to_string(),
            auc_a: cmp.auc_a,
            auc_b: cmp.auc_b,
            delta: cmp.delta,
            p_value: cmp.p_value,
            method: "delong_paired".into(),
        });
    }
    Ok(())
}

/// Paired model comparisons reported after the predictor-set stage.
const COMPARISONS: [(&str, &str); 10] = [
    ("pt", "img"),
    ("hp", "img"),
    ("imgPt", "img"),
    ("imgPtHp", "img"),
    ("imgPt", "pt"),
    ("imgPtHp", "ptHp"),
    ("nb_imgPt", "pt"),
    ("nb_imgPt", "imgPt"),
    ("nb_imgPtHp", "ptHp"),
    ("nb_imgPtHp", "imgPtHp"),
];

/// Short model label, e.g. `imgPtHp` for IMG+PT+HP.
pub fn model_label(set: &PredictorSet) -> String {
    let mut out = String::new();
    for (i, g) in set.groups().iter().enumerate() {
        let l = g.label().to_ascii_lowercase();
        if i == 0 {
            out.push_str(&l);
        } else {
            let mut c = l.chars();
            let first = c.next().expect("non-empty label").to_ascii_uppercase();
            out.push(first);
            out.extend(c);
        }
    }
    out
}

fn rows_of(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// The cross-sectional test cohort followed by each configured ladder
/// level. Rows are indices of the full dataset.
fn build_cohorts(
    cfg: &AuditConfig,
    run: &mut Run,
    imputed: &Dataset,
    part: &Partition,
    labelled_test: &[usize],
) -> Result<Vec<(String, Vec<usize>, usize)>> {
    let test = &part.test_indices;
    let test_ds = imputed.subset(test);
    let mut cohorts = vec![(CROSS_SECTIONAL.to_string(), labelled_test.to_vec(), 0)];
    for level in cfg.match_levels()? {
        let seed = run.seed(&format!("match-{level}"));
        let cohort = if level == MatchLevel::Random {
            random_case_control(&test_ds, seed)?
        } else {
            let mut spec = MatchSpec::for_level(&test_ds, level, &cfg.demographics, seed)?;
            spec.caliper = cfg.caliper;
            matched_case_control(&test_ds, &spec)?
        };
        if !cohort.zero_range.is_empty() {
            run.warn(format!(
                "{}: zero-range matching variables {}",
                level.cohort_label(),
                cohort.zero_range.join(", ")
            ));
        }
        if !cohort.caliper_exceeded.is_empty() {
            run.warn(format!(
                "{}: {} cases matched beyond the caliper",
                level.cohort_label(),
                cohort.caliper_exceeded.len()
            ));
        }
        let mut rows: Vec<usize> = cohort.rows().into_iter().map(|i| test[i]).collect();
        rows.sort_unstable();
        cohorts.push((level.cohort_label().to_string(), rows, cohort.unmatched_cases.len()));
    }
    Ok(cohorts)
}

fn evaluate(
    label: &str,
    panel: &str,
    scores: &[f64],
    labels: &[bool],
    replicates: usize,
    seed: u64,
    lambda: Option<f64>,
) -> Result<(PerformanceRow, CurveSet)> {
    let roc = roc_analysis(scores, labels, replicates, seed)?;
    let prc = prc_auc(scores, labels)?;
    let op = youden_point(scores, labels)?;
    let row = PerformanceRow::new(
        label,
        roc.n_cases,
        roc.n_controls,
        roc.auc,
        (roc.ci_low, roc.ci_high),
        prc.auprc,
        &op,
        lambda,
    );
    let curve = CurveSet {
        panel: panel.to_string(),
        label: label.to_string(),
        roc: roc.curve,
        prc: prc.curve,
    };
    Ok((row, curve))
}

/// Per-row stratum label of `variable`, or `None` where missing.
fn stratum_labels(ds: &Dataset, variable: &str) -> Result<Vec<Option<String>>> {
    Ok(match &ds.column(variable)?.data {
        ColumnData::Levels(v) => v.clone(),
        ColumnData::Numeric(v) => v.iter().map(|x| x.map(serde_float::format)).collect(),
    })
}

fn characteristics(
    binarized: &Dataset,
    cohort: &str,
    rows: &[usize],
    covariates: &[String],
) -> Result<Vec<CharacteristicRow>> {
    let outcome = binarized.outcome_column().name().to_string();
    std::iter::once(&outcome)
        .chain(covariates)
        .map(|v| {
            let flags = binarized.column(v)?.flags()?;
            let observed: Vec<bool> = rows.iter().filter_map(|&r| flags[r]).collect();
            let positive = observed.iter().filter(|&&f| f).count();
            Ok(CharacteristicRow {
                cohort: cohort.to_string(),
                variable: v.clone(),
                n_rows: rows.len(),
                n_observed: observed.len(),
                n_positive: positive,
                fraction: if observed.is_empty() {
                    f64::NAN
                } else {
                    positive as f64 / observed.len() as f64
                },
            })
        })
        .collect()
}
