#![allow(dead_code)]

pub mod oracles;

use std::path::{Path, PathBuf};

use confound_audit::audit::AuditConfig;
use confound_audit::dataset::{
    binarize, default_binarization_rules, impute, partition_by_patient, write_table, Dataset, Group,
};
use confound_audit::features::fit_pca;
use confound_audit::matching::{
    covariate_association, matched_case_control, random_case_control, MatchLevel, MatchSpec, ALPHA,
};
use confound_audit::models::{fit_predictor_set, FitOptions, PredictorGroup, PredictorSet};
use confound_audit::seed;
use confound_audit::stats::{roc_analysis, RocAnalysis};
use confound_audit::synth::{generate, ConfoundSpec, CovariateSpec};
use nalgebra::DMatrix;

/// A small confounded population with every covariate kind.
pub fn mixed_spec(seed: u64) -> ConfoundSpec {
    let mut spec = ConfoundSpec::new(900, 0.15, 12, seed);
    spec.rows_per_patient = (1, 3);
    spec.direct_signal = 0.8;
    spec.covariates = vec![
        CovariateSpec::continuous("age", Group::Pt, 70.0, 12.0, 0.8, 0.0),
        CovariateSpec::binary("gender", Group::Pt, 0.6, 0.3, 0.0),
        CovariateSpec::continuous("bmi", Group::Pt, 26.0, 4.0, 0.0, 0.0).with_missing(0.1),
        CovariateSpec::binary("fall", Group::Pt, 0.4, 1.0, 0.0),
        CovariateSpec::binary("inpatient", Group::Hp, 0.3, 1.5, 2.0),
        CovariateSpec::categorical("device", Group::Hp, &["d1", "d2", "d3"], 0.5, 2.5),
        CovariateSpec::binary("priority", Group::Hp, 0.3, 0.8, 0.0),
    ];
    spec
}

/// Writes data and schema for `spec` into `dir` and returns a config with
/// relative paths, as a user would write it.
pub fn write_inputs(dir: &Path, spec: &ConfoundSpec) -> PathBuf {
    let (ds, _) = generate(spec).unwrap();
    write_table(&ds, &dir.join("data.csv"), b',').unwrap();
    std::fs::write(dir.join("schema.toml"), ds.schema().to_toml_string()).unwrap();
    let cfg = "data = \"data.csv\"\nschema = \"schema.toml\"\noutput_dir = \"out\"\nseed = 11\nbootstrap = 200\n\
               pca_k = 8\ndevice_variable = \"device\"\nregression_impute = [\"bmi\"]\n\n\
               [[filters]]\nvariable = \"bmi\"\nmin = 10.0\nmax = 60.0\n";
    let p = dir.join("audit.toml");
    std::fs::write(&p, cfg).unwrap();
    p
}

pub fn config(dir: &Path, spec: &ConfoundSpec) -> AuditConfig {
    AuditConfig::from_file(&write_inputs(dir, spec)).unwrap()
}

/// Image-model scores on the labelled test rows, produced the way the audit
/// does it: patient split, PCA on train features, ridge logistic on the
/// component scores.
pub struct ImageScores {
    pub imputed: Dataset,
    pub binarized: Dataset,
    pub test: Vec<usize>,
    /// Indexed by dataset row; `None` outside the labelled test rows.
    pub score_of: Vec<Option<f64>>,
}

pub fn image_scores(ds: &Dataset, master: u64) -> ImageScores {
    let imputed = impute(ds, &[]).unwrap().dataset;
    let binarized = binarize(ds, &default_binarization_rules(ds, &[])).unwrap();
    let part = partition_by_patient(ds, 0.75, seed::derive(master, "partition")).unwrap();
    let x = ds.features().unwrap();
    let train = DMatrix::from_fn(part.train_indices.len(), x.ncols(), |i, j| {
        x[(part.train_indices[i], j)]
    });
    let pca = fit_pca(&train, 10.min(x.ncols())).unwrap();
    let scores = pca.project(x).unwrap();
    let opts = FitOptions {
        seed: seed::derive(master, "fit-img"),
        ..FitOptions::default()
    };
    let set = PredictorSet::new(&[PredictorGroup::Img]).unwrap();
    let fit = fit_predictor_set(
        &imputed,
        Some(&scores),
        &set,
        &imputed.outcome(),
        &part.train_indices,
        &part.test_indices,
        &opts,
    )
    .unwrap();
    let mut score_of = vec![None; ds.n_rows()];
    for (&r, &s) in fit.test_rows.iter().zip(&fit.test_scores) {
        score_of[r] = Some(s);
    }
    ImageScores {
        imputed,
        binarized,
        test: part.test_indices,
        score_of,
    }
}

pub struct Rung {
    pub label: String,
    pub roc: RocAnalysis,
    /// Binarized covariates associated with the outcome inside the cohort.
    pub significant: usize,
}

impl ImageScores {
    pub fn evaluate(&self, label: &str, rows: &[usize], master: u64, replicates: usize) -> Rung {
        let y = self.imputed.outcome();
        let s: Vec<f64> = rows.iter().map(|&r| self.score_of[r].unwrap()).collect();
        let y: Vec<bool> = rows.iter().map(|&r| y[r].unwrap()).collect();
        let roc = roc_analysis(&s, &y, replicates, seed::derive(master, &format!("roc-{label}"))).unwrap();
        let significant = self
            .binarized
            .names_in(&[Group::Pt, Group::Hp])
            .iter()
            .filter(|c| {
                covariate_association(&self.binarized, rows, c)
                    .unwrap()
                    .is_some_and(|r| r.p_value < ALPHA)
            })
            .count();
        Rung {
            label: label.to_string(),
            roc,
            significant,
        }
    }

    /// Cross-sectional test set, then one cohort per level built on the test rows.
    pub fn ladder(&self, master: u64, levels: &[MatchLevel], replicates: usize) -> Vec<Rung> {
        let labelled: Vec<usize> = self
            .test
            .iter()
            .copied()
            .filter(|&r| self.score_of[r].is_some())
            .collect();
        let mut out = vec![self.evaluate("cross-sectional", &labelled, master, replicates)];
        let test_ds = self.imputed.subset(&self.test);
        for &level in levels {
            let seed = seed::derive(master, &format!("match-{level}"));
            let cohort = if level == MatchLevel::Random {
                random_case_control(&test_ds, seed).unwrap()
            } else {
                let spec = MatchSpec::for_level(&test_ds, level, &["age".into(), "gender".into()], seed).unwrap();
                matched_case_control(&test_ds, &spec).unwrap()
            };
            let rows: Vec<usize> = cohort.rows().into_iter().map(|i| self.test[i]).collect();
            out.push(self.evaluate(level.cohort_label(), &rows, master, replicates));
        }
        out
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
