//! One test per acceptance criterion. Each prints a single PASS/FAIL line
//! with the measured values, then asserts.

mod common;

use std::time::{Duration, Instant};

use common::oracles::{
    average_linkage_two_clusters, covariance_eigenvalues, fisher_enumerated, hand_delong, normal, pairwise_auc,
    swept_average_precision, tied_instance,
};
use common::{image_scores, median, mixed_spec};
use confound_audit::audit::run_audit_to_dir;
use confound_audit::dataset::{impute, partition_by_patient, Group};
use confound_audit::features::{explained_fraction, fit_pca, tsne, TsneConfig};
use confound_audit::matching::MatchLevel;
use confound_audit::models::{
    ensemble_naive_bayes, fit_logistic, fit_predictor_set, labelled_rows, logistic_gradient, logistic_objective,
    FitOptions, PredictorGroup, PredictorSet,
};
use confound_audit::seed;
use confound_audit::stats::{
    auc, bootstrap_auc_ci, delong_components, delong_test, fisher_exact, prc_auc, OperatingPoint, Table2x2,
};
use confound_audit::synth::{generate, ConfoundSpec, CovariateSpec};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Collects failed checks of one criterion.
struct Criterion {
    id: u32,
    start: Instant,
    notes: Vec<String>,
    failures: Vec<String>,
}

impl Criterion {
    fn new(id: u32) -> Self {
        Self {
            id,
            start: Instant::now(),
            notes: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if ok {
            self.notes.push(what);
        } else {
            self.failures.push(what);
        }
    }

    fn finish(mut self, budget: Duration) {
        let elapsed = self.start.elapsed();
        self.check(
            elapsed < budget,
            format!("runtime {:.1}s < {}s", elapsed.as_secs_f64(), budget.as_secs()),
        );
        let pass = self.failures.is_empty();
        let detail = if pass {
            self.notes.join("; ")
        } else {
            self.failures.join("; ")
        };
        println!(
            "criterion {}: {} ({detail})",
            self.id,
            if pass { "PASS" } else { "FAIL" }
        );
        assert!(pass, "criterion {} failed: {detail}", self.id);
    }
}

#[test]
fn criterion_1_statistic_oracles() {
    let mut c = Criterion::new(1);
    let mut rng = seed::rng(1001);

    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=200);
        let (s, y) = tied_instance(&mut rng, n);
        worst = worst.max((auc(&s, &y).unwrap() - pairwise_auc(&s, &y)).abs());
    }
    c.check(worst <= 1e-12, format!("AUC vs pairwise max err {worst:.1e}"));

    let mut worst: f64 = 0.0;
    let mut tables = 0;
    while tables < 200 {
        let t = [0; 4].map(|_| rng.random_range(0..=40u64));
        let margins = [t[0] + t[1], t[2] + t[3], t[0] + t[2], t[1] + t[3]];
        if margins.contains(&0) || margins.iter().any(|&m| m > 60) {
            continue;
        }
        let p = fisher_exact(Table2x2::new(t[0], t[1], t[2], t[3])).unwrap().p_value;
        worst = worst.max((p - fisher_enumerated(t[0], t[1], t[2], t[3])).abs());
        tables += 1;
    }
    c.check(worst <= 1e-10, format!("Fisher vs enumeration max err {worst:.1e}"));

    let y = [true, true, true, true, true, false, false, false, false, false];
    let a = [0.9, 0.8, 0.55, 0.4, 0.7, 0.3, 0.6, 0.2, 0.55, 0.1];
    let b = [0.7, 0.9, 0.3, 0.6, 0.5, 0.4, 0.2, 0.8, 0.1, 0.35];
    let comp = delong_components(&a, &b, &y).unwrap();
    let hand = hand_delong(&a, &b, &y);
    let err = (0..4)
        .map(|k| (comp.covariance[k / 2][k % 2] - hand[k / 2][k % 2]).abs())
        .fold(0.0, f64::max);
    c.check(err <= 1e-10, format!("DeLong 5x5 max err {err:.1e}"));
    let same = delong_test(&a, &a, &y).unwrap();
    c.check(
        same.p_value == 1.0,
        format!("identical paired scores p = {}", same.p_value),
    );

    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=200);
        let (s, y) = tied_instance(&mut rng, n);
        worst = worst.max((prc_auc(&s, &y).unwrap().auprc - swept_average_precision(&s, &y)).abs());
    }
    c.check(worst <= 1e-12, format!("AUPRC vs sweep max err {worst:.1e}"));
    c.finish(Duration::from_secs(10));
}

#[test]
fn criterion_2_numerical_fitting() {
    let mut c = Criterion::new(2);
    let mut rng = seed::rng(1002);

    let x = DMatrix::from_fn(60, 4, |_, _| normal(&mut rng));
    let y: Vec<bool> = (0..60).map(|_| rng.random()).collect();
    let mut worst: f64 = 0.0;
    for lambda in [0.0, 0.3] {
        let theta = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
        let g = logistic_gradient(&x, &y, lambda, &theta);
        let h = 1e-5;
        for k in 0..5 {
            let (mut up, mut down) = (theta.clone(), theta.clone());
            up[k] += h;
            down[k] -= h;
            let fd = (logistic_objective(&x, &y, lambda, &up) - logistic_objective(&x, &y, lambda, &down)) / (2.0 * h);
            worst = worst.max((fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-3));
        }
    }
    c.check(
        worst < 1e-6,
        format!("gradient vs finite differences rel err {worst:.1e}"),
    );

    let n = 50_000;
    let planted = [0.5, 2.0, -1.0, 0.3];
    let x = DMatrix::from_fn(n, 3, |_, _| normal(&mut rng));
    let y: Vec<bool> = (0..n)
        .map(|i| {
            let z = planted[0] + (0..3).map(|j| planted[j + 1] * x[(i, j)]).sum::<f64>();
            rng.random::<f64>() < 1.0 / (1.0 + (-z).exp())
        })
        .collect();
    let m = fit_logistic(&x, &y, 1e-6).unwrap();
    let fitted = [m.intercept, m.coefficients[0], m.coefficients[1], m.coefficients[2]];
    let err = fitted
        .iter()
        .zip(&planted)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    c.check(err <= 0.05, format!("coefficient recovery max err {err:.3} at n = {n}"));

    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let x = DMatrix::from_fn(50, 20, |_, j| normal(&mut rng) * (1.0 + j as f64 / 4.0));
        let model = fit_pca(&x, 20).unwrap();
        let brute = covariance_eigenvalues(&x);
        for (k, ev) in model.explained_variance.iter().enumerate() {
            worst = worst.max((ev - brute[k]).abs() / brute[0]);
        }
    }
    c.check(
        worst <= 1e-8,
        format!("PCA eigenvalues vs brute force rel err {worst:.1e}"),
    );

    // Exact spectrum {4, 3, 2, 1}: orthogonal ±1 columns, scaled.
    let rows = 400;
    let sd = [4f64.sqrt(), 3f64.sqrt(), 2f64.sqrt(), 1.0];
    let x = DMatrix::from_fn(rows, 4, |i, j| {
        let sign = if (i >> j) & 1 == 0 { 1.0 } else { -1.0 };
        sign * sd[j] * ((rows - 1) as f64 / rows as f64).sqrt()
    });
    let model = fit_pca(&x, 2).unwrap();
    let fraction = explained_fraction(&model, model.total_variance);
    c.check(
        (fraction - 0.7).abs() <= 1e-6,
        format!("planted spectrum fraction {fraction:.9}"),
    );
    c.finish(Duration::from_secs(60));
}

fn leak_only(seed: u64) -> ConfoundSpec {
    let mut spec = ConfoundSpec::new(20_000, 0.1, 16, seed);
    spec.covariates = vec![CovariateSpec::binary("scanner", Group::Hp, 0.3, 2.0, 3.0)];
    spec
}

#[test]
fn criterion_3_confounding_signature() {
    let mut c = Criterion::new(3);
    let mut random = Vec::new();
    let mut matched = Vec::new();
    let mut covered = 0;
    for s in 0..20 {
        let (ds, _) = generate(&leak_only(3000 + s)).unwrap();
        let rungs = image_scores(&ds, s).ladder(s, &[MatchLevel::Random, MatchLevel::PtHp], 2000);
        random.push(rungs[1].roc.auc);
        let full = &rungs[2].roc;
        matched.push(full.auc);
        covered += usize::from(full.ci_low <= 0.5 && 0.5 <= full.ci_high);
    }
    let (r, m) = (median(random), median(matched));
    c.check(r > 0.70, format!("median random AUC {r:.3} > 0.70"));
    c.check(
        (0.45..=0.58).contains(&m),
        format!("median matched AUC {m:.3} in [0.45, 0.58]"),
    );
    c.check(covered >= 16, format!("matched CI covers 0.5 in {covered}/20"));
    c.finish(Duration::from_secs(300));
}

#[test]
fn criterion_4_robustness_signature() {
    let mut c = Criterion::new(4);
    let gaps: Vec<f64> = (0..20)
        .map(|s| {
            let mut spec = ConfoundSpec::new(10_000, 0.15, 12, 4000 + s);
            spec.direct_signal = 2.0;
            spec.covariates = vec![
                CovariateSpec::binary("fall", Group::Pt, 0.4, 1.0, 0.0),
                CovariateSpec::binary("priority", Group::Hp, 0.3, 1.0, 0.0),
            ];
            let (ds, _) = generate(&spec).unwrap();
            let rungs = image_scores(&ds, s).ladder(s, &[MatchLevel::Random, MatchLevel::PtHp], 100);
            (rungs[2].roc.auc - rungs[1].roc.auc).abs()
        })
        .collect();
    let gap = median(gaps);
    c.check(gap < 0.03, format!("median |matched - unmatched| {gap:.4} < 0.03"));
    c.finish(Duration::from_secs(300));
}

/// Image sees the direct signal and two of the covariates; the covariate
/// model sees all covariates.
fn overlapping(seed: u64) -> ConfoundSpec {
    let mut spec = ConfoundSpec::new(6000, 0.2, 16, seed);
    spec.direct_signal = 1.0;
    spec.covariates = vec![
        CovariateSpec::continuous("age", Group::Pt, 70.0, 10.0, 0.6, 0.0),
        CovariateSpec::binary("fall", Group::Pt, 0.4, 1.0, 0.0),
        CovariateSpec::binary("inpatient", Group::Hp, 0.3, 1.2, 1.5),
        CovariateSpec::categorical("device", Group::Hp, &["d1", "d2", "d3"], 0.6, 2.0),
        CovariateSpec::binary("priority", Group::Hp, 0.3, 0.8, 0.0),
    ];
    spec
}

#[test]
fn criterion_5_ensemble_ordering() {
    use PredictorGroup::*;
    let mut c = Criterion::new(5);
    let (mut cov, mut nb, mut direct) = (Vec::new(), Vec::new(), Vec::new());
    for s in 0..20 {
        let (ds, _) = generate(&overlapping(5000 + s)).unwrap();
        let imputed = impute(&ds, &[]).unwrap().dataset;
        let part = partition_by_patient(&ds, 0.75, seed::derive(s, "partition")).unwrap();
        let x = ds.features().unwrap();
        let train = DMatrix::from_fn(part.train_indices.len(), x.ncols(), |i, j| {
            x[(part.train_indices[i], j)]
        });
        let scores = fit_pca(&train, 10).unwrap().project(x).unwrap();
        let labels = imputed.outcome();
        let fit = |groups: &[PredictorGroup], label: &str| {
            let opts = FitOptions {
                seed: seed::derive(s, &format!("fit-{label}")),
                out_of_fold: true,
                ..FitOptions::default()
            };
            let set = PredictorSet::new(groups).unwrap();
            fit_predictor_set(
                &imputed,
                Some(&scores),
                &set,
                &labels,
                &part.train_indices,
                &part.test_indices,
                &opts,
            )
            .unwrap()
        };
        let img = fit(&[Img], "img");
        let pthp = fit(&[Pt, Hp], "ptHp");
        let all = fit(&[Img, Pt, Hp], "imgPtHp");
        let (_, y_train) = labelled_rows(&labels, &part.train_indices);
        let (_, y_test) = labelled_rows(&labels, &part.test_indices);
        let ens = ensemble_naive_bayes(
            img.train_oof.as_ref().unwrap(),
            &img.test_scores,
            pthp.train_oof.as_ref().unwrap(),
            &pthp.test_scores,
            &y_train,
        )
        .unwrap();
        cov.push(auc(&pthp.test_scores, &y_test).unwrap());
        nb.push(auc(&ens, &y_test).unwrap());
        direct.push(auc(&all.test_scores, &y_test).unwrap());
    }
    let (cv, e, d) = (median(cov), median(nb), median(direct));
    c.check(cv < e, format!("covariates {cv:.4} < NB ensemble {e:.4}"));
    c.check(
        e <= d + 0.005,
        format!("NB ensemble {e:.4} <= direct multimodal {d:.4} + 0.005"),
    );
    c.finish(Duration::from_secs(300));
}

#[test]
fn criterion_6_confusion_arithmetic() {
    let mut c = Criterion::new(6);
    let op = OperatingPoint::from_counts(0.5, 4283, 153, 54, 1480);
    for (name, got, want) in [
        ("sensitivity", op.sensitivity, 0.739),
        ("specificity", op.specificity, 0.743),
        ("ppv", op.ppv, 0.094),
        ("npv", op.npv, 0.987),
    ] {
        c.check((got - want).abs() <= 0.001, format!("{name} {got:.4} ~ {want}"));
    }
    c.finish(Duration::from_secs(1));
}

#[test]
fn criterion_7_calibration() {
    let mut c = Criterion::new(7);
    let mut rng = seed::rng(1007);
    let significant = (0..100)
        .filter(|_| {
            let pairs: Vec<(bool, bool)> = (0..300).map(|_| (rng.random_bool(0.3), rng.random_bool(0.2))).collect();
            fisher_exact(Table2x2::from_pairs(pairs)).unwrap().p_value < 0.05
        })
        .count();
    c.check(
        significant <= 14,
        format!("null Fisher significant in {significant}/100 (<= 10% + 4%)"),
    );

    let covered = (0..100u64)
        .filter(|&r| {
            let y: Vec<bool> = (0..400).map(|i| i < 200).collect();
            let s: Vec<f64> = (0..400).map(|_| normal(&mut rng)).collect();
            let (lo, hi) = bootstrap_auc_ci(&s, &y, 2000, r).unwrap();
            lo <= 0.5 && 0.5 <= hi
        })
        .count();
    c.check(covered >= 90, format!("null bootstrap CI covers 0.5 in {covered}/100"));
    c.finish(Duration::from_secs(60));
}

#[test]
fn criterion_8_determinism() {
    let mut c = Criterion::new(8);
    let dir = tempfile::tempdir().unwrap();
    let base = common::config(dir.path(), &mixed_spec(8));
    let run = |name: &str, threads: usize| {
        let mut cfg = base.clone();
        cfg.output_dir = dir.path().join(name);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_audit_to_dir(&cfg)).unwrap();
        cfg.output_dir
    };
    let outputs = [run("a", 4), run("b", 4), run("c", 1)];
    let mut files: Vec<_> = std::fs::read_dir(&outputs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|n| n.to_string_lossy().ends_with(".csv"))
        .collect();
    files.sort();
    c.check(files.len() >= 9, format!("{} CSV tables", files.len()));
    let mut differing = Vec::new();
    for f in &files {
        let reference = std::fs::read(outputs[0].join(f)).unwrap();
        for other in &outputs[1..] {
            if std::fs::read(other.join(f)).unwrap() != reference {
                differing.push(format!("{}", f.to_string_lossy()));
            }
        }
    }
    c.check(
        differing.is_empty(),
        format!("byte-identical across runs and 1/4 threads; differing {differing:?}"),
    );
    c.finish(Duration::from_secs(120));
}

#[test]
fn criterion_9_tsne() {
    let mut c = Criterion::new(9);
    let mut rng = seed::rng(1009);
    let n = 200;
    let truth: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let x = DMatrix::from_fn(n, 10, |i, _| normal(&mut rng) + 6.0 * truth[i] as f64);
    let cfg = TsneConfig {
        seed: 9,
        ..TsneConfig::default()
    };
    let r = tsne(&x, &cfg).unwrap();
    let found = average_linkage_two_clusters(&r.embedding);
    let same = (0..n).filter(|&i| found[i] == truth[i]).count();
    let agreement = same.max(n - same) as f64 / n as f64;
    c.check(agreement >= 0.95, format!("cluster agreement {agreement:.3}"));
    c.check(
        r.final_kl < r.initial_kl,
        format!("KL {:.3} -> {:.3}", r.initial_kl, r.final_kl),
    );
    let again = tsne(&x, &cfg).unwrap();
    c.check(again == r, "same seed gives identical embedding");
    c.finish(Duration::from_secs(60));
}
