use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack when comparing table probabilities against the observed one.
const RELATIVE_SLACK: f64 = 1e-7;

/// A 2×2 contingency table `[[a, b], [c, d]]`.
///
/// Throughout the crate rows are exposure (covariate = 1, covariate = 0) and
/// columns are status (case, control).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table2x2 {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl Table2x2 {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        Self { a, b, c, d }
    }

    /// Cross-tabulates a binary exposure against a binary status.
    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (bool, bool)>,
    {
        let mut t = Table2x2::new(0, 0, 0, 0);
        for (exposed, case) in pairs {
            match (exposed, case) {
                (true, true) => t.a += 1,
                (true, false) => t.b += 1,
                (false, true) => t.c += 1,
                (false, false) => t.d += 1,
            }
        }
        t
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    pub fn row_totals(&self) -> (u64, u64) {
        (self.a + self.b, self.c + self.d)
    }

    pub fn col_totals(&self) -> (u64, u64) {
        (self.a + self.c, self.b + self.d)
    }

    pub fn transpose(&self) -> Self {
        Table2x2::new(self.a, self.c, self.b, self.d)
    }

    pub fn swap_rows(&self) -> Self {
        Table2x2::new(self.c, self.d, self.a, self.b)
    }

    pub fn swap_cols(&self) -> Self {
        Table2x2::new(self.b, self.a, self.d, self.c)
    }

    /// Sample odds ratio `(a·d)/(b·c)`, adding 0.5 to every cell when any
    /// cell is zero.
    pub fn odds_ratio(&self) -> f64 {
        let cells = [self.a, self.b, self.c, self.d];
        let shift = if cells.contains(&0) { 0.5 } else { 0.0 };
        let [a, b, c, d] = cells.map(|v| v as f64 + shift);
        (a * d) / (b * c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociationResult {
    pub table: Table2x2,
    pub odds_ratio: f64,
    pub p_value: f64,
}

/// Two-sided Fisher exact test.
///
/// The p-value sums the hypergeometric probabilities of every table with the
/// observed margins whose probability does not exceed the observed table's
/// (with a relative slack of 1e-7). Probabilities are evaluated in log space.
pub fn fisher_exact(table: Table2x2) -> Result<AssociationResult> {
    let (r1, r2) = table.row_totals();
    let (c1, c2) = table.col_totals();
    if r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0 {
        return Err(Error::ZeroMargin);
    }
    let n = table.total();
    let log_fact = log_factorials(n as usize);
    let log_prob = |a: u64| -> f64 {
        let (b, c) = (r1 - a, c1 - a);
        let d = n + a - r1 - c1;
        log_fact[r1 as usize] + log_fact[r2 as usize] + log_fact[c1 as usize] + log_fact[c2 as usize]
            - log_fact[n as usize]
            - log_fact[a as usize]
            - log_fact[b as usize]
            - log_fact[c as usize]
            - log_fact[d as usize]
    };

    let lo = (r1 + c1).saturating_sub(n);
    let hi = r1.min(c1);
    let observed = log_prob(table.a);
    let cutoff = observed + RELATIVE_SLACK.ln_1p();
    let p: f64 = (lo..=hi).map(log_prob).filter(|&lp| lp <= cutoff).map(f64::exp).sum();

    Ok(AssociationResult {
        table,
        odds_ratio: table.odds_ratio(),
        p_value: p.min(1.0),
    })
}

fn log_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}
