//! Temporary experiment harness (deleted before release).

use gicaps::baselines::BaselineConfig;
use gicaps::dataset::{self, Dataset, GaussianBlobSpec};
use gicaps::evaluate::{self, ClassifierSpec, ResamplerSpec};
use gicaps::oversample::OversampleConfig;
use gicaps::seeding;
use gicaps::undersample::UndersampleConfig;
use ndarray::Array2;
use rand::Rng;

fn blob(mean: Vec<f64>, var: f64, count: usize, class_id: usize) -> GaussianBlobSpec {
    let d = mean.len();
    let covariance = (0..d)
        .map(|i| (0..d).map(|j| if i == j { var } else { 0.0 }).collect())
        .collect();
    GaussianBlobSpec { mean, covariance, count, class_id }
}

/// Two-lobe minority straddling a central majority, 5-D.
fn straddle_dataset(seed: u64, n_majority: usize, lobe: usize, maj_sigma: f64, lobe_sigma: f64, offset: f64) -> Dataset {
    let mut rng = seeding::rng(seeding::derive(seed, "straddle"));
    let dim = 4;
    let shared = 0.05; // same scale for every class off the lobe axis
    let n = n_majority + 2 * lobe;
    let mut features = Array2::zeros((n, dim));
    let mut labels = Vec::new();
    for i in 0..n_majority {
        features[(i, 0)] = 0.5 + maj_sigma * rng.sample::<f64, _>(rand_distr::StandardNormal);
        for j in 1..dim {
            features[(i, j)] = 0.5 + shared * rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        labels.push(0);
    }
    for i in 0..2 * lobe {
        let row = n_majority + i;
        let side = if i < lobe { -1.0 } else { 1.0 };
        features[(row, 0)] = 0.5 + side * offset + lobe_sigma * rng.sample::<f64, _>(rand_distr::StandardNormal);
        for j in 1..dim {
            features[(row, j)] = 0.5 + shared * rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        labels.push(1);
    }
    Dataset::new(features, labels).unwrap()
}

#[test]
#[ignore]
fn margin_experiment() {
    for (n_maj, lobe, maj_sigma, lobe_sigma, offset) in [
        (200usize, 4usize, 0.06, 0.03, 0.30),
        (300, 4, 0.06, 0.03, 0.30),
        (300, 4, 0.07, 0.03, 0.30),
        (400, 4, 0.06, 0.03, 0.30),
    ] {
        let mut wins = 0;
        let mut details = Vec::new();
        for seed in 0..10u64 {
            let raw = straddle_dataset(3000 + seed, n_maj, lobe, maj_sigma, lobe_sigma, offset);
            let (ds, _) = dataset::normalize_minmax(&raw).unwrap();
            let margin_of = |spec: &ResamplerSpec| -> f64 {
                let out = spec.apply(&ds, seed).unwrap();
                evaluate::margin_ablation(&out.dataset, 0, 1, 4).unwrap()
            };
            let g = margin_of(&ResamplerSpec::GicapsO { over: OversampleConfig::default() });
            let s = margin_of(&ResamplerSpec::Smote { baseline: BaselineConfig { smote_percent: 700, ..BaselineConfig::default() } });
            let a = margin_of(&ResamplerSpec::Adasyn { baseline: BaselineConfig::default() });
            if g > s && g > a { wins += 1; }
            details.push(format!("seed {seed}: g={g:.4} s={s:.4} a={a:.4}"));
        }
        println!("nmaj {n_maj} lobe {lobe} msig {maj_sigma} lsig {lobe_sigma} off {offset}: wins {wins}/10");
        for d in details { println!("  {d}"); }
    }
}

/// 3-class benchmark with ordinal adjacency: central majority (y=0), a
/// four-lobe ring class between (y=1), and an outer blob (y=2) beyond the
/// east lobe. Sizes 1802:18:180 keep the 100:10:1 ratio multiset.
fn benchmark_dataset(seed: u64) -> Dataset {
    let blobs = dataset::generate_gmm_data(
        &[
            blob(vec![0.50, 0.50, 0.50], 0.010, 1802, 0),
        ],
        seed,
    )
    .unwrap();
    let mut rng = seeding::rng(seeding::derive(seed, "lobes"));
    let lobes: [(f64, f64, usize); 4] = [(-0.42, 0.0, 5), (0.0, -0.42, 5), (0.42, 0.0, 4), (0.0, 0.42, 4)];
    let n1: usize = lobes.iter().map(|l| l.2).sum();
    let n2 = 180;
    let mut features = Array2::zeros((blobs.n_rows() + n1 + n2, 3));
    let mut labels = blobs.labels.clone();
    for i in 0..blobs.n_rows() {
        for j in 0..3 {
            features[(i, j)] = blobs.features[(i, j)];
        }
    }
    let mut row = blobs.n_rows();
    for &(dx, dy, count) in &lobes {
        for _ in 0..count {
            features[(row, 0)] = 0.5 + dx + 0.02 * rng.sample::<f64, _>(rand_distr::StandardNormal);
            features[(row, 1)] = 0.5 + dy + 0.02 * rng.sample::<f64, _>(rand_distr::StandardNormal);
            features[(row, 2)] = 0.5 + 0.08 * rng.sample::<f64, _>(rand_distr::StandardNormal);
            labels.push(1);
            row += 1;
        }
    }
    for _ in 0..n2 {
        features[(row, 0)] = 1.45 + 0.05 * rng.sample::<f64, _>(rand_distr::StandardNormal);
        features[(row, 1)] = 0.50 + 0.05 * rng.sample::<f64, _>(rand_distr::StandardNormal);
        features[(row, 2)] = 0.50 + 0.08 * rng.sample::<f64, _>(rand_distr::StandardNormal);
        labels.push(2);
        row += 1;
    }
    Dataset::new(features, labels).unwrap()
}

#[test]
#[ignore]
fn ordering_experiment() {
    let k: usize = std::env::var("GMR_K").ok().and_then(|v| v.parse().ok()).unwrap_or(6);
    let classifier = ClassifierSpec { gmr_k: Some(k), max_iter: 100, tol: 1e-5 };
    let n_d: usize = std::env::var("N_D").ok().and_then(|v| v.parse().ok()).unwrap_or(400);
    let kappa: usize = std::env::var("KAPPA").ok().and_then(|v| v.parse().ok()).unwrap_or(5);
    let rho: f64 = std::env::var("RHO").ok().and_then(|v| v.parse().ok()).unwrap_or(0.9);
    let gicaps = ResamplerSpec::Gicaps {
        under: UndersampleConfig::new(n_d).with_k(4),
        over: OversampleConfig { kappa_same: kappa, rho, ..OversampleConfig::default() },
    };
    let smote = ResamplerSpec::Smote { baseline: BaselineConfig::default() };
    let adasyn = ResamplerSpec::Adasyn { baseline: BaselineConfig::default() };
    for (mname, spec) in [("gicaps", &gicaps), ("smote", &smote), ("adasyn", &adasyn)] {
        let mut scores = Vec::new();
        for seed in 0..5u64 {
            let ds = benchmark_dataset(5000 + seed);
            let report = evaluate::run_cv(&ds, "sim", spec, &classifier, 10, seed).unwrap();
            scores.push(report.g_mean);
        }
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        println!(
            "{mname}: mean {mean:.2} ({})",
            scores.iter().map(|s| format!("{s:.1}")).collect::<Vec<_>>().join(", ")
        );
    }
}

#[test]
#[ignore]
fn margin_provenance_diagnostics() {
    let raw = straddle_dataset(3001, 200, 4, 0.06, 0.03, 0.30);
    let (ds, _) = dataset::normalize_minmax(&raw).unwrap();
    for (name, spec) in [
        ("gicaps-o", ResamplerSpec::GicapsO { over: OversampleConfig::default() }),
        ("smote", ResamplerSpec::Smote { baseline: BaselineConfig::default() }),
    ] {
        let out = spec.apply(&ds, 1).unwrap();
        let lobe_of = |row: usize| ds.features[(row, 0)] > 0.5;
        let mut cross = 0;
        let mut min_margin = f64::INFINITY;
        let mut cloud_hits = 0;
        for rec in &out.provenance {
            if lobe_of(rec.m_index) != lobe_of(rec.v_index) {
                cross += 1;
            }
            let to_majority = ds.class_index[0]
                .iter()
                .map(|&r| gicaps::geometry::distance(&rec.point, ds.row(r)))
                .fold(f64::INFINITY, f64::min);
            if to_majority < 0.03 {
                cloud_hits += 1;
            }
            min_margin = min_margin.min(to_majority);
        }
        println!(
            "{name}: {} synth, {cross} cross-lobe, {cloud_hits} within 0.03 of majority, min dist {min_margin:.4}",
            out.provenance.len()
        );
    }
}

#[test]
#[ignore]
fn ordering_confusion_diagnostics() {
    let classifier = ClassifierSpec { gmr_k: Some(10), max_iter: 100, tol: 1e-5 };
    let ds = benchmark_dataset(5002);
    for (name, spec) in [
        ("gicaps", ResamplerSpec::Gicaps {
            under: UndersampleConfig::new(2000).with_k(4),
            over: OversampleConfig::default(),
        }),
        ("smote", ResamplerSpec::Smote { baseline: BaselineConfig::default() }),
    ] {
        let report = evaluate::run_cv(&ds, "sim", &spec, &classifier, 10, 0).unwrap();
        println!("{name}: g={:.1} p={:.1} r={:.1}", report.g_mean, report.precision, report.recall);
        for (true_class, row) in report.confusion.iter().enumerate() {
            println!("  true {true_class}: {row:?}");
        }
    }
}

#[test]
#[ignore]
fn misclassification_autopsy() {
    let ds = benchmark_dataset(5000);
    let folds = dataset::stratified_kfold(&ds, 10, gicaps::seeding::derive(0, "folds")).unwrap();
    let (train_idx, test_idx) = &folds[0];
    let train = ds.subset(train_idx);
    let (train_norm, params) = dataset::normalize_minmax(&train).unwrap();
    let spec = ResamplerSpec::Gicaps { under: UndersampleConfig::new(1400).with_k(4), over: OversampleConfig::default() };
    let fold_seed = gicaps::seeding::derive_indexed(0, "fold", 0);
    let resampled = spec.apply(&train_norm, fold_seed).unwrap();
    let mut eval_rows: Vec<usize> = test_idx.clone();
    eval_rows.extend(resampled.rejected_rows.iter().map(|&l| train_idx[l]));
    let test = params.apply(&ds.subset(&eval_rows)).unwrap();
    let (model, _) = gicaps::gmr::fit(&resampled.dataset, 8, gicaps::seeding::derive_indexed(0, "fold-fit", 0), 100, 1e-5).unwrap();
    println!("train counts after resample: {:?}", resampled.dataset.class_counts());
    println!("component weights: {:?}", model.weights.iter().map(|w| (w * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    for (c, m) in model.means.iter().enumerate() {
        let v: Vec<f64> = m.iter().map(|x| (x * 100.0).round() / 100.0).collect();
        let dx: Vec<f64> = (0..3).map(|j| (model.covariances[c][(j, j)].sqrt() * 1000.0).round() / 1000.0).collect();
        println!("comp {c}: w={:.3} mean={v:?} sigma_x={dx:?}", model.weights[c]);
    }
    let mut wrong = 0;
    let mut by_true: std::collections::BTreeMap<(usize, usize), usize> = std::collections::BTreeMap::new();
    let mut examples = Vec::new();
    for i in 0..test.n_rows() {
        let pred = model.predict_class(test.row(i));
        if pred != test.labels[i] {
            *by_true.entry((test.labels[i], pred)).or_default() += 1;
        }
        if test.labels[i] == 0 && pred != 0 {
            wrong += 1;
            if examples.len() < 8 {
                let y = model.predict_value(test.row(i));
                examples.push(format!(
                    "x=({:.2},{:.2},{:.2}) yhat={y:.2} pred={pred}",
                    test.row(i)[0], test.row(i)[1], test.row(i)[2]
                ));
            }
        }
    }
    println!("majority test errors: {wrong}/{}", test.class_index[0].len());
    println!("error breakdown (true, pred) -> count: {by_true:?}");
    for e in examples { println!("  {e}"); }
}

#[test]
#[ignore]
fn undersample_spread_check() {
    let ds = benchmark_dataset(5000);
    let folds = dataset::stratified_kfold(&ds, 10, gicaps::seeding::derive(0, "folds")).unwrap();
    let (train_idx, _) = &folds[0];
    let train = ds.subset(train_idx);
    let (train_norm, _) = dataset::normalize_minmax(&train).unwrap();
    let points = train_norm.class_matrix(0);
    let std_of = |m: &ndarray::Array2<f64>| -> Vec<f64> {
        (0..m.ncols())
            .map(|j| {
                let col = m.column(j);
                let mean = col.mean().unwrap();
                (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / col.len() as f64)
                    .sqrt()
            })
            .collect()
    };
    println!("original majority std: {:?}", std_of(&points));
    let cfg = UndersampleConfig::new(400).with_k(4);
    let (retained, _) = gicaps::undersample::gicaps_undersample(&points, &cfg, gicaps::seeding::derive_indexed(0, "fold", 0)).unwrap();
    let mut kept = ndarray::Array2::zeros((retained.len(), points.ncols()));
    for (out, &r) in retained.iter().enumerate() {
        kept.row_mut(out).assign(&points.row(r));
    }
    println!("retained majority std: {:?}", std_of(&kept));
    let mean_orig: Vec<f64> = (0..3).map(|j| points.column(j).mean().unwrap()).collect();
    let mean_kept: Vec<f64> = (0..3).map(|j| kept.column(j).mean().unwrap()).collect();
    println!("means: orig {mean_orig:?} kept {mean_kept:?}");
}
