//! Rank statistics: Spearman correlation with significance, multi-run
//! aggregation and a one-sided Mann-Whitney test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Below this many pairs, significance comes from the exact permutation
/// distribution instead of the t approximation.
const EXACT_BELOW: usize = 10;

/// Relative slack when comparing permuted correlations with the observed one.
const PERM_TOL: f64 = 1e-12;

/// One-based ranks, tied values sharing the mean of their positions.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        let mid = (i + j + 1) as f64 / 2.0;
        for &o in &order[i..j] {
            r[o] = mid;
        }
        i = j;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation of mid-ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "spearman needs at least 3 pairs, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite value in spearman input".into()));
    }
    pearson(&ranks(xs), &ranks(ys))
        .ok_or_else(|| Error::UndefinedCorrelation("one argument has constant ranks".into()))
}

/// Share of the `n!` rank permutations whose correlation with the identity
/// is at least `|rho|` in magnitude. Ties in the data are ignored.
fn exact_permutation_p(rho: f64, n: usize) -> f64 {
    let base: Vec<f64> = (1..=n).map(|v| v as f64).collect();
    let mut perm = base.clone();
    let target = rho.abs() * (1.0 - PERM_TOL);
    let mut hits = 0u64;
    let mut total = 0u64;
    // Heap's algorithm
    let mut c = vec![0usize; n];
    let mut visit = |p: &[f64]| {
        total += 1;
        if pearson(&base, p).is_some_and(|r| r.abs() >= target) {
            hits += 1;
        }
    };
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}

/// Two-sided p-value of a Spearman coefficient under the no-correlation null.
pub fn spearman_significance(rho: f64, n_pairs: usize) -> Result<f64> {
    if n_pairs < 4 {
        return Err(Error::InvalidParameter(format!(
            "significance needs at least 4 pairs, got {n_pairs}"
        )));
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("rho {rho} outside [-1, 1]")));
    }
    if rho.abs() == 1.0 {
        log::warn!("perfect rank correlation over {n_pairs} pairs; reporting p = 0");
        return Ok(0.0);
    }
    if n_pairs < EXACT_BELOW {
        return Ok(exact_permutation_p(rho, n_pairs));
    }
    let df = (n_pairs - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// `None` when the run's ranks were constant.
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    /// Mean of the defined per-run coefficients.
    pub rho: f64,
    /// Standard deviation of the defined per-run coefficients.
    pub rho_std: f64,
    /// Coefficient over all runs' pairs concatenated.
    pub pooled_rho: f64,
    /// Two-sided p-value over the concatenated pairs.
    pub p_value: f64,
    pub significant: bool,
    pub alpha: f64,
    pub n_pairs: usize,
    pub n_runs: usize,
    pub n_undefined: usize,
    pub runs: Vec<RunSummary>,
}

/// Paired observations from one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSample {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl RunSample {
    pub fn push(&mut self, x: f64, y: f64) {
        self.xs.push(x);
        self.ys.push(y);
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

fn summarize(run: &RunSample) -> Result<RunSummary> {
    let rho = match spearman(&run.xs, &run.ys) {
        Ok(r) => Some(r),
        Err(Error::UndefinedCorrelation(_)) => None,
        Err(e) => return Err(e),
    };
    let p_value = match rho {
        Some(r) if run.len() >= 4 => Some(spearman_significance(r, run.len())?),
        _ => None,
    };
    Ok(RunSummary {
        rho,
        p_value,
        n_pairs: run.len(),
    })
}

/// Headline coefficient is the mean over runs; significance is tested on the
/// pooled pairs.
pub fn aggregate_runs(runs: &[RunSample], alpha: f64) -> Result<CorrelationReport> {
    if runs.is_empty() {
        return Err(Error::InvalidParameter("no runs to aggregate".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside (0, 1)")));
    }
    let summaries = runs.iter().map(summarize).collect::<Result<Vec<_>>>()?;
    let defined: Vec<f64> = summaries.iter().filter_map(|s| s.rho).collect();
    if defined.is_empty() {
        return Err(Error::UndefinedCorrelation("every run has constant ranks".into()));
    }
    let k = defined.len() as f64;
    let rho = defined.iter().sum::<f64>() / k;
    let rho_std = if defined.len() > 1 {
        (defined.iter().map(|r| (r - rho).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    let pooled: Vec<&RunSample> = runs
        .iter()
        .zip(&summaries)
        .filter(|(_, s)| s.rho.is_some())
        .map(|(r, _)| r)
        .collect();
    let xs: Vec<f64> = pooled.iter().flat_map(|r| r.xs.iter().copied()).collect();
    let ys: Vec<f64> = pooled.iter().flat_map(|r| r.ys.iter().copied()).collect();
    let pooled_rho = spearman(&xs, &ys)?;
    let p_value = spearman_significance(pooled_rho, xs.len())?;
    Ok(CorrelationReport {
        rho,
        rho_std,
        pooled_rho,
        p_value,
        significant: p_value < alpha,
        alpha,
        n_pairs: xs.len(),
        n_runs: runs.len(),
        n_undefined: runs.len() - defined.len(),
        runs: summaries,
    })
}

/// One-sided Mann-Whitney U test of `a` tending to exceed `b`, normal
/// approximation with tie correction. Returns the U statistic of `a` and the
/// p-value.
pub fn mann_whitney_greater(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParameter("Mann-Whitney needs two nonempty samples".into()));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let r = ranks(&pooled);
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let n = n1 + n2;
    let u = r[..a.len()].iter().sum::<f64>() - n1 * (n1 + 1.0) / 2.0;
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)).max(1.0));
    if var <= 0.0 {
        return Ok((u, 1.0));
    }
    let z = (u - n1 * n2 / 2.0) / var.sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    Ok((u, std_normal.sf(z)))
}
