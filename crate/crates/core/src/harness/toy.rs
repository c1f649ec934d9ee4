use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::output::{csv_text, fmt_p, text_table, Artifacts};
use super::{derive_seed, fit_quantifier, unit_seed};
use crate::classifiers::k_nearest;
use crate::dataset::{make_toy_moons, normalize_minmax, Dataset};
use crate::error::Result;
use crate::stats::mann_whitney_greater;
use crate::uncertainty::{Strategy, UncertaintyEstimate};

/// Grid points closer than this to a training point belong to the data region.
const DATA_RADIUS: f64 = 0.05;
/// Neighbours used to judge the local class mix.
const MIX_K: usize = 15;
/// Minority share that marks the class-overlap band.
const OVERLAP_MIN_SHARE: f64 = 0.3;
/// Probe points this far outside the data's bounding box count as far away.
pub const PROBE_MARGIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    /// Outside the bounding box expanded by [`PROBE_MARGIN`].
    Far,
    /// Near data, with both classes well represented among the neighbours.
    Overlap,
    /// Near data, every neighbour from one class.
    Pure,
    /// Inside the bounding box, none of the above.
    Inside,
    Other,
}

impl Region {
    fn name(self) -> &'static str {
        match self {
            Region::Far => "far",
            Region::Overlap => "overlap",
            Region::Pure => "pure",
            Region::Inside => "inside",
            Region::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSummary {
    pub strategy: Strategy,
    pub mean_eu_far: f64,
    /// Over every grid point inside the bounding box.
    pub mean_eu_inside: f64,
    pub mean_au_overlap: f64,
    pub mean_au_pure: f64,
    /// One-sided Mann-Whitney p-value of AU(overlap) > AU(pure).
    pub au_p_value: f64,
    pub n_far: usize,
    pub n_inside: usize,
    pub n_overlap: usize,
    pub n_pure: usize,
}

#[derive(Debug, Clone)]
pub struct ToyOutcome {
    pub config_hash: String,
    pub data: Dataset<f64>,
    pub grid: Vec<[f64; 2]>,
    pub regions: Vec<Region>,
    pub summaries: Vec<std::result::Result<LandscapeSummary, String>>,
    pub artifacts: Artifacts,
}

fn bounding_box(data: &Dataset<f64>) -> ([f64; 2], [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for r in data.rows() {
        for j in 0..2 {
            lo[j] = lo[j].min(r[j]);
            hi[j] = hi[j].max(r[j]);
        }
    }
    (lo, hi)
}

/// Region of every grid point relative to a two-feature, two-class dataset.
pub fn classify_regions(data: &Dataset<f64>, grid: &[[f64; 2]]) -> Vec<Region> {
    let (lo, hi) = bounding_box(data);
    let k = MIX_K.min(data.len());
    grid.iter()
        .map(|p| {
            let outside_by = (0..2)
                .map(|j| (lo[j] - p[j]).max(p[j] - hi[j]))
                .fold(f64::NEG_INFINITY, f64::max);
            if outside_by >= PROBE_MARGIN {
                return Region::Far;
            }
            if outside_by > 0.0 {
                return Region::Other;
            }
            let nn = k_nearest(data, p, k);
            if nn[0].1.sqrt() > DATA_RADIUS {
                return Region::Inside;
            }
            let ones = nn.iter().filter(|(i, _)| data.label(*i) == 1).count() as f64 / k as f64;
            let minority = ones.min(1.0 - ones);
            if minority >= OVERLAP_MIN_SHARE {
                Region::Overlap
            } else if minority == 0.0 {
                Region::Pure
            } else {
                Region::Inside
            }
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn landscape_summary(regions: &[Region], est: &[UncertaintyEstimate<f64>]) -> Result<LandscapeSummary> {
    let pick = |want: &[Region], f: fn(&UncertaintyEstimate<f64>) -> f64| -> Vec<f64> {
        regions
            .iter()
            .zip(est)
            .filter(|(r, _)| want.contains(r))
            .map(|(_, e)| f(e))
            .collect()
    };
    let eu = |e: &UncertaintyEstimate<f64>| e.epistemic;
    let au = |e: &UncertaintyEstimate<f64>| e.aleatoric;
    let far = pick(&[Region::Far], eu);
    let inside = pick(&[Region::Inside, Region::Overlap, Region::Pure], eu);
    let overlap = pick(&[Region::Overlap], au);
    let pure = pick(&[Region::Pure], au);
    let (_, p) = mann_whitney_greater(&overlap, &pure)?;
    Ok(LandscapeSummary {
        strategy: est.first().map_or(Strategy::Belief, |e| e.strategy),
        mean_eu_far: mean(&far),
        mean_eu_inside: mean(&inside),
        mean_au_overlap: mean(&overlap),
        mean_au_pure: mean(&pure),
        au_p_value: p,
        n_far: far.len(),
        n_inside: inside.len(),
        n_overlap: overlap.len(),
        n_pure: pure.len(),
    })
}

/// AU/EU over a regular grid around a normalized two-moons dataset.
pub fn toy_landscape(cfg: &ExperimentConfig) -> Result<ToyOutcome> {
    cfg.validate()?;
    let hash = cfg.hash();
    let t = &cfg.toy;
    let seed = unit_seed(cfg.seed, 0, "toy-moons");
    let (data, _) = normalize_minmax(&make_toy_moons::<f64>(t.n_per_class, t.noise, derive_seed(seed, "data", 0))?);
    let res = t.resolution.max(2);
    let step = (1.0 + 2.0 * t.margin) / (res - 1) as f64;
    let mut grid = Vec::with_capacity(res * res);
    for i in 0..res {
        for j in 0..res {
            grid.push([-t.margin + step * j as f64, -t.margin + step * i as f64]);
        }
    }
    let regions = classify_regions(&data, &grid);
    let mut artifacts = Artifacts::default();
    artifacts.push(
        "raw/toy_moons.csv",
        csv_text(
            &["config_hash", "x0", "x1", "label"],
            data.rows()
                .zip(data.labels())
                .map(|(r, l)| vec![hash.clone(), r[0].to_string(), r[1].to_string(), l.to_string()]),
        ),
    );
    let mut summaries = Vec::new();
    for &s in &cfg.uncertainty.strategies {
        let summary = fit_quantifier(s, &data, cfg, seed).and_then(|q| {
            let est = grid
                .iter()
                .map(|p| q.estimate(p))
                .collect::<Result<Vec<_>>>()?;
            artifacts.push(
                format!("curves/toy_landscape_{}.csv", s.name().replace('-', "_")),
                csv_text(
                    &["config_hash", "x0", "x1", "au", "eu", "tu", "region"],
                    grid.iter().zip(&est).zip(&regions).map(|((p, e), r)| {
                        vec![
                            hash.clone(),
                            p[0].to_string(),
                            p[1].to_string(),
                            e.aleatoric.to_string(),
                            e.epistemic.to_string(),
                            e.total.to_string(),
                            r.name().to_string(),
                        ]
                    }),
                ),
            );
            landscape_summary(&regions, &est)
        });
        summaries.push(summary.map_err(|e| e.to_string()));
    }
    let header = [
        "config_hash",
        "strategy",
        "mean_eu_far",
        "mean_eu_inside",
        "eu_ratio",
        "mean_au_overlap",
        "mean_au_pure",
        "au_p_value",
        "n_far",
        "n_inside",
        "n_overlap",
        "n_pure",
        "status",
    ];
    let mut csv_rows = Vec::new();
    let mut txt_rows = Vec::new();
    for (s, sum) in cfg.uncertainty.strategies.iter().zip(&summaries) {
        match sum {
            Ok(m) => {
                let ratio = m.mean_eu_far / m.mean_eu_inside;
                csv_rows.push(vec![
                    hash.clone(),
                    s.name().to_string(),
                    m.mean_eu_far.to_string(),
                    m.mean_eu_inside.to_string(),
                    ratio.to_string(),
                    m.mean_au_overlap.to_string(),
                    m.mean_au_pure.to_string(),
                    m.au_p_value.to_string(),
                    m.n_far.to_string(),
                    m.n_inside.to_string(),
                    m.n_overlap.to_string(),
                    m.n_pure.to_string(),
                    "ok".to_string(),
                ]);
                txt_rows.push(vec![
                    s.name().to_string(),
                    format!("{:.4}", m.mean_eu_far),
                    format!("{:.4}", m.mean_eu_inside),
                    format!("{ratio:.2}"),
                    format!("{:.4}", m.mean_au_overlap),
                    format!("{:.4}", m.mean_au_pure),
                    fmt_p(m.au_p_value),
                ]);
            }
            Err(e) => {
                let mut r = vec![hash.clone(), s.name().to_string()];
                r.extend(std::iter::repeat_n(String::new(), 10));
                r.push(format!("error: {e}"));
                csv_rows.push(r);
                txt_rows.push(vec![s.name().to_string(), format!("error: {e}")]);
            }
        }
    }
    artifacts.push("tables/toy_landscape.csv", csv_text(&header, csv_rows));
    artifacts.push(
        "tables/toy_landscape.txt",
        text_table(
            &format!("# toy-landscape: EU far vs inside, AU overlap vs pure  [config {hash}]"),
            &["strategy", "eu_far", "eu_inside", "ratio", "au_overlap", "au_pure", "p(AU)"],
            &txt_rows,
        ),
    );
    Ok(ToyOutcome {
        config_hash: hash,
        data,
        grid,
        regions,
        summaries,
        artifacts,
    })
}
