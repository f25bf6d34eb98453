//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so every line is printed; exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use rfsom_core::dataset::{apply_normalization, fit_minmax, Dataset};
use rfsom_core::experiment::{
    run_experiment, train_fold_models, tree_sweep, visualize, ExperimentConfig, ExperimentReport, Method,
};
use rfsom_core::forest::{train_forest, ForestParams};
use rfsom_core::mds::{classical_mds, symmetric_eigen, DistanceMatrix};
use rfsom_core::rfsom::{find_bmu_rf, RfBmu};
use rfsom_core::som::{
    find_bmu_euclidean, learning_rate, neighbourhood_width, BmuFinder, SomGrid, SomHyperParams,
};

use common::{argmin, load, proximity_oracle, repo_root, rng, shared_leaves};

const SEEDS: [u64; 3] = [1, 2, 3];
const DATASETS: [&str; 6] = ["glass", "wine", "iris", "sonar", "ionosphere", "pima"];
/// Published RF mean accuracies.
const RF_REFERENCE: [(&str, f64); 6] = [
    ("glass", 77.96),
    ("wine", 98.85),
    ("iris", 95.33),
    ("sonar", 85.05),
    ("ionosphere", 93.44),
    ("pima", 76.14),
];
const RF_TOLERANCE: f64 = 5.0;
const SONAR_MARGIN: f64 = 5.0;
const PARITY_TOLERANCE: f64 = 3.0;
const MDS_TOLERANCE: f64 = 1e-6;
const EIGEN_TOLERANCE: f64 = 1e-8;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Configuration shipped in `configs/<name>.json`, with the acceptance seeds.
fn config(name: &str) -> ExperimentConfig {
    let path = repo_root().join("configs").join(format!("{name}.json"));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    let grid = doc["grid"].as_str().unwrap();
    let (p, q) = grid.split_once('x').unwrap();
    let mut cfg = ExperimentConfig::new(name, p.parse().unwrap(), q.parse().unwrap());
    cfg.trees = doc["trees"].as_u64().unwrap() as usize;
    cfg.folds = doc["folds"].as_u64().unwrap() as usize;
    cfg.seeds = SEEDS.to_vec();
    cfg
}

fn mean_of(report: &ExperimentReport, method: Method) -> f64 {
    report.method(method).unwrap().mean
}

fn c1(reports: &[(&str, ExperimentReport)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, reference) in RF_REFERENCE {
        let report = &reports.iter().find(|(n, _)| *n == name).unwrap().1;
        let rf = mean_of(report, Method::Rf);
        let ok = (rf - reference).abs() <= RF_TOLERANCE;
        pass &= ok;
        parts.push(format!("{name} {rf:.2} vs {reference:.2}{}", if ok { "" } else { " (!)" }));
    }
    outcome(pass, format!("RF within ±{RF_TOLERANCE} pp: {}", parts.join(", ")))
}

fn c2(reports: &[(&str, ExperimentReport)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["sonar", "glass"] {
        let report = &reports.iter().find(|(n, _)| *n == name).unwrap().1;
        let (som, rfsom) = (mean_of(report, Method::Som), mean_of(report, Method::Rfsom));
        let needed = if name == "sonar" { SONAR_MARGIN } else { 0.0 };
        let ok = rfsom > som && rfsom - som >= needed;
        pass &= ok;
        parts.push(format!("{name} RF-SOM {rfsom:.2} vs SOM {som:.2}"));
    }
    outcome(pass, format!("RF-SOM > SOM, Sonar margin ≥ {SONAR_MARGIN}: {}", parts.join(", ")))
}

fn c3(reports: &[(&str, ExperimentReport)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["wine", "iris"] {
        let report = &reports.iter().find(|(n, _)| *n == name).unwrap().1;
        let (som, rfsom) = (mean_of(report, Method::Som), mean_of(report, Method::Rfsom));
        pass &= (rfsom - som).abs() <= PARITY_TOLERANCE;
        parts.push(format!("{name} RF-SOM {rfsom:.2} vs SOM {som:.2}"));
    }
    outcome(pass, format!("|RF-SOM − SOM| ≤ {PARITY_TOLERANCE}: {}", parts.join(", ")))
}

fn c4() -> Outcome {
    let data = load("sonar");
    let sweep = tree_sweep(&data, &config("sonar"), &[10, 500]).unwrap();
    let (low, high) = (&sweep.points[0], &sweep.points[1]);
    let pass = high.rf.mean >= low.rf.mean && high.rfsom.mean >= low.rfsom.mean;
    outcome(
        pass,
        format!(
            "Sonar T=10 → T=500: RF {:.2} → {:.2}, RF-SOM {:.2} → {:.2}",
            low.rf.mean, high.rf.mean, low.rfsom.mean, high.rfsom.mean
        ),
    )
}

fn c5() -> Outcome {
    let mut failures = 0;
    for case in 0..100u64 {
        let mut r = rng(500 + case);
        let n = r.gen_range(2..=30);
        let m = r.gen_range(1..=5);
        let c = r.gen_range(2..=3).min(n);
        let t = r.gen_range(1..=20);
        let data = random_data_for(&mut r, n, m, c);
        let forest = train_forest(&data, &ForestParams::new(t, case)).unwrap();
        let rows: Vec<Vec<f64>> = data.rows().map(<[f64]>::to_vec).collect();
        let p = forest.proximity_matrix(data.rows()).unwrap();
        let oracle = proximity_oracle(&forest, &rows);
        let mut ok = p.values() == oracle.as_slice();
        for i in 0..n {
            ok &= p.get(i, i) == 1.0;
            for j in 0..n {
                let v = p.get(i, j);
                ok &= v == p.get(j, i);
                let k = v * t as f64;
                ok &= (k - k.round()).abs() < 1e-9 && (0.0..=1.0).contains(&v);
            }
        }
        failures += usize::from(!ok);
    }
    outcome(failures == 0, format!("proximity suite on 100 instances, {failures} failed"))
}

fn random_data_for(r: &mut rand_chacha::ChaCha8Rng, n: usize, m: usize, c: usize) -> Dataset<f64> {
    common::random_data(r, n, m, c)
}

fn random_grid(r: &mut rand_chacha::ChaCha8Rng, rows: usize, cols: usize, m: usize) -> SomGrid<f64> {
    let weights = (0..rows * cols * m).map(|_| (r.gen_range(0..20) as f64) / 4.0).collect();
    SomGrid::new(rows, cols, m, weights).unwrap()
}

fn c6() -> Outcome {
    let mut failures = 0;
    for case in 0..100u64 {
        let mut r = rng(600 + case);
        let n = r.gen_range(2..=30);
        let m = r.gen_range(1..=4);
        let t = r.gen_range(1..=20);
        let (rows, cols) = (r.gen_range(1..=4), r.gen_range(1..=4));
        let data = random_data_for(&mut r, n, m, 2.min(n));
        let forest = train_forest(&data, &ForestParams::new(t, case)).unwrap();
        let grid = random_grid(&mut r, rows, cols, m);
        let x: Vec<f64> = if case % 3 == 0 {
            grid.weight(r.gen_range(0..grid.neuron_count())).to_vec()
        } else {
            (0..m).map(|_| (r.gen_range(0..20) as f64) / 4.0).collect()
        };
        // H = W ∪ {x}, with x last.
        let mut h: Vec<Vec<f64>> = grid.neurons().map(<[f64]>::to_vec).collect();
        h.push(x.clone());
        let l = grid.neuron_count();
        let prox = proximity_oracle(&forest, &h);
        let dis: Vec<f64> = (0..l).map(|j| 1.0 - prox[l * (l + 1) + j]).collect();
        let library_matrix = forest.proximity_matrix(h.iter().map(Vec::as_slice)).unwrap();
        let row = forest.dissimilarity_row(&x, grid.neurons(), None).unwrap();
        let cache = forest.leaf_id_cache(grid.neurons()).unwrap();
        let cached_row = forest.dissimilarity_row(&x, grid.neurons(), Some(&cache)).unwrap();
        let ok = find_bmu_rf(&forest, &grid, &x).unwrap() == argmin(&dis)
            && library_matrix.values() == prox.as_slice()
            && row == dis
            && cached_row == dis
            && (0..l).all(|j| 1.0 - shared_leaves(&forest, &x, grid.weight(j)) as f64 / t as f64 == row[j]);
        failures += usize::from(!ok);
    }
    outcome(
        failures == 0,
        format!("find_bmu_rf and dissimilarity_row vs materialised matrix on 100 instances, {failures} failed"),
    )
}

fn c7() -> Outcome {
    let mut r = rng(7);
    let mut failures = 0;
    for q in 0..1000 {
        let m = r.gen_range(1..=6);
        let (rows, cols) = (r.gen_range(1..=6), r.gen_range(1..=6));
        // Coarse values so exact ties occur.
        let grid = random_grid(&mut r, rows, cols, m);
        let x: Vec<f64> = if q % 4 == 0 {
            grid.weight(r.gen_range(0..grid.neuron_count())).to_vec()
        } else {
            (0..m).map(|_| (r.gen_range(0..20) as f64) / 4.0).collect()
        };
        let d: Vec<f64> = grid
            .neurons()
            .map(|w| w.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect();
        failures += usize::from(find_bmu_euclidean(&grid, &x).unwrap() != argmin(&d));
    }
    outcome(failures == 0, format!("Euclidean BMU vs brute force on 1000 queries, {failures} failed"))
}

fn c8() -> Outcome {
    let mut worst_rel: f64 = 0.0;
    for case in 0..50 {
        let mut r = rng(800 + case);
        let n = r.gen_range(3..=40);
        let pts: Vec<[f64; 2]> = (0..n).map(|_| [r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0)]).collect();
        let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let values = (0..n * n).map(|k| dist(pts[k / n], pts[k % n])).collect();
        let e = classical_mds(&DistanceMatrix::new(n, values).unwrap()).unwrap();
        let scale = (0..n * n).map(|k| dist(pts[k / n], pts[k % n])).fold(0.0, f64::max);
        for i in 0..n {
            for j in 0..n {
                let err = (dist(e.coordinates[i], e.coordinates[j]) - dist(pts[i], pts[j])).abs();
                worst_rel = worst_rel.max(err / scale);
            }
        }
    }
    let mut worst_residual: f64 = 0.0;
    let mut worst_orth: f64 = 0.0;
    for case in 0..30 {
        let mut r = rng(900 + case);
        let n = r.gen_range(1..=25);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = r.gen_range(-3.0..3.0);
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let eig = symmetric_eigen(n, &a).unwrap();
        for k in 0..n {
            let v = eig.vector(k);
            for i in 0..n {
                let av: f64 = (0..n).map(|j| a[i * n + j] * v[j]).sum();
                worst_residual = worst_residual.max((av - eig.values[k] * v[i]).abs() / norm);
            }
            for k2 in 0..n {
                let dot: f64 = v.iter().zip(eig.vector(k2)).map(|(x, y)| x * y).sum();
                let target = if k == k2 { 1.0 } else { 0.0 };
                worst_orth = worst_orth.max((dot - target).abs());
            }
        }
    }
    let pass = worst_rel <= MDS_TOLERANCE && worst_residual <= EIGEN_TOLERANCE && worst_orth <= EIGEN_TOLERANCE;
    outcome(
        pass,
        format!(
            "MDS distance error {worst_rel:.1e} (≤ {MDS_TOLERANCE:.0e}), eigen residual {worst_residual:.1e}·‖A‖, orthonormality {worst_orth:.1e}"
        ),
    )
}

fn c9() -> Outcome {
    let p = SomHyperParams::default();
    let eta: Vec<f64> = (0..200).map(|e| learning_rate(&p, e)).collect();
    let alpha: Vec<f64> = (0..200).map(|e| neighbourhood_width(&p, e)).collect();
    let pass = eta.windows(2).all(|w| w[1] < w[0])
        && alpha.windows(2).all(|w| w[1] > w[0])
        && learning_rate(&p, 0) == 0.1
        && neighbourhood_width(&p, 200) == 0.1;
    outcome(
        pass,
        format!(
            "η(0) = {}, α(200) = {}, η(199) = {:.4e}, α(0) = {:.4}",
            learning_rate(&p, 0),
            neighbourhood_width(&p, 200),
            eta[199],
            alpha[0]
        ),
    )
}

fn c10() -> Outcome {
    let data = load("iris");
    let mut cfg = config("iris");
    cfg.seeds = vec![1, 2];
    let a = run_experiment(&data, &cfg).unwrap();
    let b = run_experiment(&data, &cfg).unwrap();
    let same_report = a.to_json().unwrap() == b.to_json().unwrap() && a.to_table() == b.to_table();
    let va = visualize(&data, &cfg).unwrap();
    let vb = visualize(&data, &cfg).unwrap();
    let same_svg = va.files("iris") == vb.files("iris");
    let sweep = |c: &ExperimentConfig| tree_sweep(&data, c, &[5, 20]).unwrap();
    let (sa, sb) = (sweep(&cfg), sweep(&cfg));
    let same_sweep = sa.to_json().unwrap() == sb.to_json().unwrap() && sa.to_svg().unwrap() == sb.to_svg().unwrap();
    outcome(
        same_report && same_svg && same_sweep,
        format!("repeated runs: report identical {same_report}, SVGs identical {same_svg}, sweep identical {same_sweep}"),
    )
}

fn c11() -> Outcome {
    let mut failures = 0;
    for case in 0..40u64 {
        let mut r = rng(1100 + case);
        let m = r.gen_range(1..=5);
        let data = random_data_for(&mut r, 25, m, 2);
        let t = r.gen_range(1..=30);
        let forest = train_forest(&data, &ForestParams::new(t, case)).unwrap();
        let (rows, cols) = (r.gen_range(1..=5), r.gen_range(1..=5));
        let grid = random_grid(&mut r, rows, cols, m);
        let finder = RfBmu::new(&forest);
        for x in data.rows().take(3) {
            finder.reset_traversals();
            finder.find_bmu(&grid, x).unwrap();
            failures += usize::from(finder.traversals() != (grid.neuron_count() + 1) * t);
        }
    }
    outcome(failures == 0, format!("(L+1)·T traversals per BMU search, {failures} of 120 searches off"))
}

fn count_class(svg: &str, tag: &str, class: &str) -> usize {
    let doc = roxmltree::Document::parse(svg).unwrap();
    doc.descendants()
        .filter(|n| n.has_tag_name(tag) && n.attribute("class") == Some(class))
        .count()
}

fn c12() -> Outcome {
    let data = load("pima");
    let mut cfg = config("pima");
    cfg.seeds = vec![1];
    let v = visualize(&data, &cfg).unwrap();
    let names: Vec<String> = v.files("pima").iter().map(|(n, _)| n.clone()).collect();
    let well_formed = v
        .files("pima")
        .iter()
        .all(|(_, body)| roxmltree::Document::parse(body).is_ok());
    let (l, m, n) = (cfg.grid_rows * cfg.grid_cols, data.n_attributes(), data.n_samples());
    let counts_ok = count_class(&v.som, "path", "wedge") == l * m
        && count_class(&v.rfsom, "path", "wedge") == l * m
        && count_class(&v.som, "rect", "frame") == l
        && count_class(&v.mds, "circle", "marker") == n
        && count_class(&v.rfmds, "circle", "marker") == n;

    // Wedge areas against min-max normalised weights of the same model.
    let norm = fit_minmax(&data);
    let normalized = apply_normalization(&data, &norm).unwrap();
    let models = train_fold_models(&normalized, norm, &cfg, cfg.seeds[0], &[Method::Som, Method::Rfsom]).unwrap();
    let mut worst: f64 = 0.0;
    for (svg, som) in [(&v.som, models.som.unwrap()), (&v.rfsom, models.rfsom.unwrap())] {
        let g = som.grid();
        let doc = roxmltree::Document::parse(svg).unwrap();
        let wedges: Vec<(usize, usize, f64)> = doc
            .descendants()
            .filter(|e| e.attribute("class") == Some("wedge"))
            .map(|e| {
                let get = |k: &str| e.attribute(k).unwrap();
                (get("data-neuron").parse().unwrap(), get("data-attr").parse().unwrap(), get("data-r").parse().unwrap())
            })
            .collect();
        let r_max = wedges.iter().map(|w| w.2).fold(0.0, f64::max);
        for j in 0..m {
            let col: Vec<f64> = g.neurons().map(|w| w[j]).collect();
            let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            for &(neuron, attr, r) in wedges.iter().filter(|w| w.1 == j) {
                let expected = if hi > lo { (g.weight(neuron)[attr] - lo) / (hi - lo) } else { 0.5 };
                worst = worst.max(((r / r_max).powi(2) - expected).abs());
            }
        }
    }
    let expected_names = ["pima_som.svg", "pima_rfsom.svg", "pima_mds.svg", "pima_rfmds.svg"];
    let names_ok = names == expected_names;
    let colors: BTreeSet<String> = roxmltree::Document::parse(&v.mds)
        .unwrap()
        .descendants()
        .filter(|e| e.attribute("class") == Some("marker"))
        .map(|e| e.attribute("fill").unwrap().to_string())
        .collect();
    let pass = well_formed && counts_ok && names_ok && worst <= 1e-6 && colors.len() == 2;
    outcome(
        pass,
        format!(
            "Pima SVGs: well-formed {well_formed}, counts {counts_ok} ({} wedges, {n} markers), names {names_ok}, area error {worst:.1e}, marker colors {}",
            l * m,
            colors.len()
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let cheap: [(usize, fn() -> Outcome); 8] = [
        (5, c5),
        (6, c6),
        (7, c7),
        (8, c8),
        (9, c9),
        (10, c10),
        (11, c11),
        (12, c12),
    ];
    for (k, f) in cheap {
        results.push((k, f()));
    }
    let reports: Vec<(&str, ExperimentReport)> = DATASETS
        .iter()
        .map(|&name| {
            let clock = Instant::now();
            let report = run_experiment(&load(name), &config(name)).unwrap();
            eprintln!("  {name}: {:.1} s", clock.elapsed().as_secs_f64());
            (name, report)
        })
        .collect();
    for (name, report) in &reports {
        let line: Vec<String> = report
            .methods
            .iter()
            .map(|s| format!("{} {:.2}±{:.2}", s.method.display_name(), s.mean, s.std))
            .collect();
        println!("  {name:<11} {}", line.join("  "));
    }
    results.push((1, c1(&reports)));
    results.push((2, c2(&reports)));
    results.push((3, c3(&reports)));
    results.push((4, c4()));
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (k, o) in &results {
        println!("C{k:<2} {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!(
        "{} of {} criteria passed in {:.0} s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
