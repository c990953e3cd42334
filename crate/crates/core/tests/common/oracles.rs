//! Brute-force reference implementations used to check the library.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Mean over all case-control pairs of 1(case > control) + ½·1(equal).
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1.0;
            total += if si > sj {
                1.0
            } else if si == sj {
                0.5
            } else {
                0.0
            };
        }
    }
    total / pairs
}

fn ln_factorial(n: u64) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Two-sided Fisher p by listing every table with the observed margins.
pub fn fisher_enumerated(a: u64, b: u64, c: u64, d: u64) -> f64 {
    let (r1, r2, c1) = (a + b, c + d, a + c);
    let n = r1 + r2;
    let prob = |x: u64| (ln_choose(r1, x) + ln_choose(r2, c1 - x) - ln_choose(n, c1)).exp();
    let lo = c1.saturating_sub(r2);
    let hi = c1.min(r1);
    let observed = prob(a);
    (lo..=hi)
        .map(prob)
        .filter(|&p| p <= observed * (1.0 + 1e-7))
        .sum::<f64>()
        .min(1.0)
}

/// Average precision from a full threshold sweep: for every distinct score,
/// predict positive at or above it and accumulate recall gain × precision.
pub fn swept_average_precision(scores: &[f64], labels: &[bool]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let n1 = labels.iter().filter(|&&l| l).count() as f64;
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for t in thresholds {
        let tp = scores.iter().zip(labels).filter(|(s, l)| **s >= t && **l).count() as f64;
        let pp = scores.iter().filter(|s| **s >= t).count() as f64;
        let recall = tp / n1;
        ap += (recall - prev_recall) * (tp / pp);
        prev_recall = recall;
    }
    ap
}

/// Scores on a coarse grid so ties are common, with at least one case and
/// one control.
pub fn tied_instance(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<bool>) {
    loop {
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        let scores: Vec<f64> = labels
            .iter()
            .map(|&l| (rng.random_range(0..12) as f64 + if l { 2.0 } else { 0.0 }) / 4.0)
            .collect();
        if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
            return (scores, labels);
        }
    }
}

/// Normal draws via Box-Muller, independent of the library's samplers.
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// DeLong components straight from the pairwise kernel.
pub fn hand_delong(a: &[f64], b: &[f64], y: &[bool]) -> [[f64; 2]; 2] {
    let psi = |x: f64, z: f64| {
        if x > z {
            1.0
        } else if x == z {
            0.5
        } else {
            0.0
        }
    };
    let cases: Vec<usize> = (0..y.len()).filter(|&i| y[i]).collect();
    let controls: Vec<usize> = (0..y.len()).filter(|&i| !y[i]).collect();
    let (m, n) = (cases.len() as f64, controls.len() as f64);
    let s = [a, b];
    let v10: Vec<[f64; 2]> = cases
        .iter()
        .map(|&i| [0, 1].map(|k| controls.iter().map(|&j| psi(s[k][i], s[k][j])).sum::<f64>() / n))
        .collect();
    let v01: Vec<[f64; 2]> = controls
        .iter()
        .map(|&j| [0, 1].map(|k| cases.iter().map(|&i| psi(s[k][i], s[k][j])).sum::<f64>() / m))
        .collect();
    let cov = |v: &[[f64; 2]], p: usize, q: usize| {
        let len = v.len() as f64;
        let mp = v.iter().map(|r| r[p]).sum::<f64>() / len;
        let mq = v.iter().map(|r| r[q]).sum::<f64>() / len;
        v.iter().map(|r| (r[p] - mp) * (r[q] - mq)).sum::<f64>() / (len - 1.0)
    };
    let mut out = [[0.0; 2]; 2];
    for p in 0..2 {
        for q in 0..2 {
            out[p][q] = cov(&v10, p, q) / m + cov(&v01, p, q) / n;
        }
    }
    out
}

/// Eigenvalues (descending) of the sample covariance, built entry by entry.
pub fn covariance_eigenvalues(x: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    let (n, d) = x.shape();
    let means: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64)
        .collect();
    let cov = nalgebra::DMatrix::from_fn(d, d, |p, q| {
        (0..n)
            .map(|i| (x[(i, p)] - means[p]) * (x[(i, q)] - means[q]))
            .sum::<f64>()
            / (n as f64 - 1.0)
    });
    let mut ev: Vec<f64> = cov.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Two clusters by average linkage (UPGMA), merging until two remain.
/// Returns a 0/1 label per row.
pub fn average_linkage_two_clusters(points: &nalgebra::DMatrix<f64>) -> Vec<usize> {
    let n = points.nrows();
    let mut d = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..n {
            d[a][b] = (points.row(a) - points.row(b)).norm();
        }
    }
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut alive: Vec<usize> = (0..n).collect();
    while alive.len() > 2 {
        let mut best = (f64::INFINITY, 0, 0);
        for (i, &a) in alive.iter().enumerate() {
            for &b in &alive[i + 1..] {
                if d[a][b] < best.0 {
                    best = (d[a][b], a, b);
                }
            }
        }
        let (_, a, b) = best;
        let (na, nb) = (members[a].len() as f64, members[b].len() as f64);
        for &c in &alive {
            if c != a && c != b {
                let merged = (na * d[a][c] + nb * d[b][c]) / (na + nb);
                d[a][c] = merged;
                d[c][a] = merged;
            }
        }
        let moved = std::mem::take(&mut members[b]);
        members[a].extend(moved);
        alive.retain(|&c| c != b);
    }
    let mut label = vec![0; n];
    for &i in &members[alive[1]] {
        label[i] = 1;
    }
    label
}
