//! Acceptance suite: every criterion runs at its stated tolerance and prints
//! one PASS/FAIL line. Exits non-zero if any criterion fails.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use phonospace::aggregation::{pooled_for_kind, sample_split, SampleSet, SamplingConfig};
use phonospace::dataset::{Dataset, LabelFilter, LabelKind, MANIFEST_FILE};
use phonospace::geometry::{crv, crv_sweep, fit_subspace_rows, SubspaceSizes, ALL_PAIRS};
use phonospace::infostats::{adjusted_mi, expected_mi, magnitude_stats, ContingencyTable};
use phonospace::probing::{ci95_halfwidth, evaluate_probe, layer_sweep, train_probe, LinearProbe, ProbeConfig};
use phonospace::seed;
use phonospace::synthgen::{generate_planted, PlantedConfig};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gaussian(rng: &mut seed::StreamRng) -> f64 {
    StandardNormal.sample(rng)
}

// ---------------------------------------------------------------- criterion 1

fn ci_arithmetic() -> Outcome {
    let h = ci95_halfwidth(0.5, 10_000);
    check((h - 0.0098).abs() <= 0.0001, format!("half-width {h:.6} at n=10000, acc=0.5"))
}

// ---------------------------------------------------------------- criterion 2

fn orthogonal_crv() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for (sigma, floor) in [(0.0, None), (0.01, Some(0.99))] {
        let dir = tempfile::tempdir().unwrap();
        let config = PlantedConfig {
            dim: 64,
            noise_sigma: sigma,
            snr_profile: (0..13).map(|l| 0.5 + 0.1 * l as f64).collect(),
            ..PlantedConfig::default()
        };
        let truth = generate_planted(&config, dir.path()).unwrap();
        let o = truth.overlaps;
        ok &= o.phone_tone == 0.0 || o.phone_tone < 1e-28;
        let ds = Dataset::open(&dir.path().join(MANIFEST_FILE)).unwrap();
        let filter = LabelFilter::from_dataset(&ds).unwrap();
        let layers: Vec<u32> = (0..13).collect();
        let rows = crv_sweep(&ds, &filter, &layers, &ALL_PAIRS, &SubspaceSizes::default()).unwrap();
        let worst = rows.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
        let pass = match floor {
            None => rows.iter().all(|r| (r.value - 1.0).abs() <= 1e-9),
            Some(f) => rows.iter().all(|r| r.value >= f),
        };
        ok &= pass && rows.len() == 78;
        details.push(format!("sigma={sigma}: min CRV {worst:.12} over {} values", rows.len()));
    }
    check(ok, details.join("; "))
}

// ---------------------------------------------------------------- criterion 3

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix; returns
/// (eigenvalues, eigenvectors as columns).
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum().max(0.0) * 2.0 - 1.0;
                let t = t / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[i][i]).collect();
    let vectors = (0..n).map(|j| (0..n).map(|i| v[i][j]).collect()).collect();
    (values, vectors)
}

/// PCA through the Gram matrix of the centered rows.
fn naive_pca(rows: &[Vec<f64>], k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (n, d) = (rows.len(), rows[0].len());
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let m: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&mean).map(|(a, b)| a - b).collect()).collect();
    let gram: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| m[i].iter().zip(&m[j]).map(|(a, b)| a * b).sum()).collect())
        .collect();
    let (values, vectors) = jacobi_eigen(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let keep = k.min(n - 1).min(d);
    let mut lambdas = Vec::new();
    let mut dirs = Vec::new();
    for &i in order.iter().take(keep) {
        let mu = values[i];
        let u: Vec<f64> = (0..d).map(|c| (0..n).map(|r| m[r][c] * vectors[i][r]).sum::<f64>() / mu.sqrt()).collect();
        lambdas.push(mu / (n - 1) as f64);
        dirs.push(u);
    }
    (lambdas, dirs)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn naive_crv(x: &[Vec<f64>], y: &[Vec<f64>], k: usize) -> f64 {
    let (lx, ux) = naive_pca(x, k);
    let (_, uy) = naive_pca(y, k);
    let mut q: Vec<Vec<f64>> = Vec::new();
    for w in uy {
        let mut r = w.clone();
        for b in &q {
            let c = dot(&r, b);
            r.iter_mut().zip(b).for_each(|(a, bb)| *a -= c * bb);
        }
        let norm = dot(&r, &r).sqrt();
        if norm > 1e-10 {
            q.push(r.iter().map(|a| a / norm).collect());
        }
    }
    let mut residual = 0.0;
    for (lambda, u) in lx.iter().zip(&ux) {
        let mut r = u.clone();
        for b in &q {
            let c = dot(&r, b);
            r.iter_mut().zip(b).for_each(|(a, bb)| *a -= c * bb);
        }
        residual += lambda * dot(&r, &r);
    }
    residual / lx.iter().sum::<f64>()
}

fn crv_oracle_equivalence() -> Outcome {
    let mut rng = seed::rng(31);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.random_range(8..=128);
        let nx = rng.random_range(3..=40);
        let ny = rng.random_range(3..=40);
        let x: Vec<Vec<f64>> = (0..nx).map(|_| (0..d).map(|_| gaussian(&mut rng)).collect()).collect();
        let y: Vec<Vec<f64>> = (0..ny).map(|_| (0..d).map(|_| gaussian(&mut rng)).collect()).collect();
        let to_matrix = |rows: &[Vec<f64>]| DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        let sx = fit_subspace_rows(&to_matrix(&x), 35).unwrap();
        let sy = fit_subspace_rows(&to_matrix(&y), 35).unwrap();
        let fast = crv(&sx, &sy).unwrap();
        let slow = naive_crv(&x, &y, 35);
        worst = worst.max((fast - slow).abs());
    }
    check(worst <= 1e-12, format!("max |optimized - naive| = {worst:.3e} over 100 pairs"))
}

// ---------------------------------------------------------------- criterion 4

fn partitions(n: usize, max: usize) -> Vec<Vec<u64>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in (1..=n.min(max)).rev() {
        for mut rest in partitions(n - first, first) {
            rest.insert(0, first as u64);
            out.push(rest);
        }
    }
    out
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).unwrap();
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

fn plain_mi(u: &[usize], v: &[usize], rows: usize, cols: usize) -> f64 {
    let n = u.len() as f64;
    let mut t = vec![vec![0.0; cols]; rows];
    for (&a, &b) in u.iter().zip(v) {
        t[a][b] += 1.0;
    }
    let ra: Vec<f64> = t.iter().map(|r| r.iter().sum()).collect();
    let cb: Vec<f64> = (0..cols).map(|j| t.iter().map(|r| r[j]).sum()).collect();
    let mut mi = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            if t[i][j] > 0.0 {
                mi += t[i][j] / n * (n * t[i][j] / (ra[i] * cb[j])).ln();
            }
        }
    }
    mi
}

fn expand(margins: &[u64]) -> Vec<usize> {
    margins.iter().enumerate().flat_map(|(k, &m)| std::iter::repeat_n(k, m as usize)).collect()
}

fn ami_exactness() -> Outcome {
    let mut rng = seed::rng(44);
    let mut worst_self: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(2..=500);
        let k = rng.random_range(2..=12);
        let mut u: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        u[0] = 0;
        u[1] = 1;
        let r = adjusted_mi(&ContingencyTable::from_labelings(&u, &u).unwrap()).unwrap();
        worst_self = worst_self.max((r.ami - 1.0).abs());
    }

    let mut worst_emi: f64 = 0.0;
    let mut cases = 0;
    for n in 1..=8usize {
        let parts = partitions(n, n);
        for a in &parts {
            for b in &parts {
                let u = expand(a);
                let mut v = expand(b);
                let (mut sum, mut count) = (0.0, 0usize);
                loop {
                    sum += plain_mi(&u, &v, a.len(), b.len());
                    count += 1;
                    if !next_permutation(&mut v) {
                        break;
                    }
                }
                let exact = sum / count as f64;
                let emi = expected_mi(a, b, n as u64).unwrap();
                worst_emi = worst_emi.max((emi - exact).abs());
                cases += 1;
            }
        }
    }

    let mut total = 0.0;
    for s in 0..100u64 {
        let mut rng = seed::rng(seed::derive_seed(4000, &[s]));
        let u: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..5)).collect();
        let v: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..4)).collect();
        total += adjusted_mi(&ContingencyTable::from_labelings(&u, &v).unwrap()).unwrap().ami;
    }
    let mean = total / 100.0;
    check(
        worst_self <= 1e-9 && worst_emi <= 1e-9 && mean.abs() <= 0.02,
        format!(
            "max |AMI(U,U)-1| = {worst_self:.2e}; max |EMI - enumeration| = {worst_emi:.2e} over {cases} margin pairs; \
             mean independent AMI = {mean:.2e}"
        ),
    )
}

// ---------------------------------------------------------------- criterion 5

fn gradient_check(rng: &mut seed::StreamRng) -> f64 {
    let c = rng.random_range(2..=6);
    let d = rng.random_range(1..=8);
    let n = rng.random_range(1..=12);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| gaussian(rng)).collect()).collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
    let data = SampleSet::from_rows(&rows, &labels, c).unwrap();
    let w: Vec<f64> = (0..c * d).map(|_| gaussian(rng)).collect();
    let b: Vec<f64> = (0..c).map(|_| gaussian(rng)).collect();
    let probe = LinearProbe::from_parts(c, d, w.clone(), b.clone()).unwrap();
    let idx: Vec<usize> = (0..n).collect();
    let (_, grad) = probe.loss_and_gradient(&data, &idx);
    let analytic: Vec<f64> = grad.weights.iter().chain(&grad.bias).copied().collect();

    let h = 1e-5;
    let mut params: Vec<f64> = w.iter().chain(&b).copied().collect();
    let loss_at = |p: &[f64]| {
        let probe = LinearProbe::from_parts(c, d, p[..c * d].to_vec(), p[c * d..].to_vec()).unwrap();
        probe.loss(&data, &idx)
    };
    let mut numeric = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + h;
        let up = loss_at(&params);
        params[i] = orig - h;
        let down = loss_at(&params);
        params[i] = orig;
        numeric.push((up - down) / (2.0 * h));
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, f)| (a - f).powi(2)).sum::<f64>().sqrt();
    let scale = dot(&analytic, &analytic).sqrt().max(dot(&numeric, &numeric).sqrt()).max(1e-12);
    diff / scale
}

fn probe_correctness() -> Outcome {
    let mut rng = seed::rng(55);
    let worst = (0..100).map(|_| gradient_check(&mut rng)).fold(0.0, f64::max);

    let dir = tempfile::tempdir().unwrap();
    let config = PlantedConfig {
        dim: 64,
        layer_count: 1,
        snr_profile: vec![3.0],
        phones: 40,
        phone_rank: 39,
        tones: 0,
        speakers: 5,
        speaker_rank: 4,
        noise_sigma: 1.0,
        segments_per_cell: 175,
        frames_per_segment: 1,
        segments_per_utterance: 500,
        ..PlantedConfig::default()
    };
    generate_planted(&config, dir.path()).unwrap();
    let ds = Dataset::open(&dir.path().join(MANIFEST_FILE)).unwrap();
    let filter = LabelFilter::from_dataset(&ds).unwrap();
    let sampling = SamplingConfig::default();
    let probe = ProbeConfig::default();
    let sweep = layer_sweep(&ds, &filter, LabelKind::Phone, &[0], &sampling, &probe).unwrap();
    let separable = sweep[0].report.accuracy;

    let pooled = pooled_for_kind(&ds, &filter, 0, LabelKind::Phone).unwrap();
    let set = SampleSet::from_pooled(&pooled, &filter.phones).unwrap();
    let mut labels = set.labels().to_vec();
    seed::shuffle(&mut seed::rng(56), &mut labels);
    let shuffled = set.with_labels(labels).unwrap();
    let split = sample_split(shuffled.len(), &SamplingConfig { seed: 57, ..sampling }).unwrap();
    let (train, test) = (shuffled.subset(&split.train), shuffled.subset(&split.test));
    let trained = train_probe(&train, 40, &probe).unwrap();
    let chance = evaluate_probe(&trained.probe, &test).unwrap();
    let p = 1.0 / 40.0;
    let band = 2.576 * (p * (1.0 - p) / chance.n_test as f64).sqrt();

    check(
        worst <= 1e-5 && separable >= 0.98 && (chance.accuracy - p).abs() <= band,
        format!(
            "max gradient rel. error {worst:.2e}; separable 40-class accuracy {separable:.4}; \
             shuffled accuracy {:.4} (band {:.4}..{:.4})",
            chance.accuracy,
            p - band,
            p + band
        ),
    )
}

// ---------------------------------------------------------------- criterion 6

fn layerwise_shape() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let snr: Vec<f64> = (0..13).map(|l: i32| 0.35 - 0.0045 * ((l - 6) * (l - 6)) as f64).collect();
    let config = PlantedConfig {
        dim: 32,
        layer_count: 13,
        snr_profile: snr,
        phones: 20,
        phone_rank: 19,
        tones: 0,
        speakers: 6,
        speaker_rank: 5,
        noise_sigma: 1.0,
        segments_per_cell: 100,
        frames_per_segment: 2,
        segments_per_utterance: 200,
        ..PlantedConfig::default()
    };
    generate_planted(&config, dir.path()).unwrap();
    let ds = Dataset::open(&dir.path().join(MANIFEST_FILE)).unwrap();
    let filter = LabelFilter::from_dataset(&ds).unwrap();
    let sampling = SamplingConfig {
        train_size: 8_000,
        test_size: 4_000,
        seed: 6,
        ..SamplingConfig::default()
    };
    let layers: Vec<u32> = (0..13).collect();
    let rows = layer_sweep(&ds, &filter, LabelKind::Phone, &layers, &sampling, &ProbeConfig::default()).unwrap();
    let acc: Vec<f64> = rows.iter().map(|r| r.report.accuracy).collect();
    let best = acc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let argmax = acc.iter().position(|&a| a == best).unwrap();
    let last = acc.iter().rposition(|&a| a == best).unwrap();
    let curve: Vec<String> = acc.iter().map(|a| format!("{a:.3}")).collect();
    check(
        argmax > 0 && last < 12,
        format!("phone accuracy by layer [{}], argmax layer {argmax}", curve.join(" ")),
    )
}

// ---------------------------------------------------------------- criterion 7

fn magnitude_diagnostics() -> Outcome {
    let mut rng = seed::rng(77);
    let d = 48;
    let mut shell = Vec::new();
    for _ in 0..200 {
        let v: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
        shell.push(v.clone());
        shell.push(v.iter().map(|x| -x).collect());
    }
    let shell = DMatrix::from_fn(shell.len(), d, |i, j| shell[i][j]);
    let shell_ratio = magnitude_stats(&shell).unwrap().concentration();

    let offset: Vec<f64> = (0..d).map(|_| 5.0 * gaussian(&mut rng)).collect();
    let cloud = DMatrix::from_fn(400, d, |_, j| offset[j] + 0.3 * gaussian(&mut rng));
    let cloud_ratio = magnitude_stats(&cloud).unwrap().concentration();

    check(
        shell_ratio <= 0.01 && cloud_ratio >= 0.9,
        format!("shell mag_mean/mu_mag = {shell_ratio:.2e}; cloud ratio = {cloud_ratio:.4}"),
    )
}

// ---------------------------------------------------------------- criterion 8

fn cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_phonospace"))
        .args(args)
        .env("RUST_LOG", "error")
        .status()
        .unwrap()
        .success()
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let spec = root.path().join("spec.toml");
    fs::write(
        &spec,
        "dim = 32\nlayer_count = 4\nsnr_profile = [0.5, 1.0, 1.5, 1.0]\nnoise_sigma = 0.5\nsegments_per_cell = 4\n\
         [label_dependence]\nkind = \"target_mi\"\nnats = 0.2\n",
    )
    .unwrap();
    let ds = root.path().join("ds");
    let p = |x: &Path| x.to_str().unwrap().to_string();
    assert!(cli(&["synth", "--spec", &p(&spec), "--out", &p(&ds), "--seed", "8"]));
    let mut identical = Vec::new();
    let mut ok = true;
    for (cmd, extra) in [
        ("probe", vec!["--train-size", "800", "--test-size", "300"]),
        ("geometry", vec![]),
        ("ami", vec![]),
        ("magnitudes", vec![]),
    ] {
        let mut outputs = Vec::new();
        for (run, workers) in [(0, "4"), (1, "4"), (2, "1")] {
            let out = root.path().join(format!("{cmd}{run}"));
            let mut args = vec![cmd, p(&ds).leak() as &str, "--seed", "3", "--workers", workers, "--out"];
            let out_s = p(&out);
            args.push(&out_s);
            args.extend(extra.iter().copied());
            ok &= cli(&args);
            outputs.push(fs::read(out.join(format!("{cmd}.csv"))).unwrap_or_default());
        }
        let same = !outputs[0].is_empty() && outputs.iter().all(|o| *o == outputs[0]);
        ok &= same;
        identical.push(format!("{cmd}={}", if same { "identical" } else { "DIFFERENT" }));
    }
    check(ok, format!("three runs each (workers 4, 4, 1): {}", identical.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 CI arithmetic", ci_arithmetic),
        ("2 CRV orthogonal construction", orthogonal_crv),
        ("3 CRV oracle equivalence", crv_oracle_equivalence),
        ("4 AMI exactness", ami_exactness),
        ("5 probe correctness", probe_correctness),
        ("6 layerwise shape", layerwise_shape),
        ("7 magnitude diagnostics", magnitude_diagnostics),
        ("8 determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  criterion {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL  criterion {name} ({secs:.1}s): {detail}");
            }
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
