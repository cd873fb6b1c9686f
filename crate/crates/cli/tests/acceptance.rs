//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines always reach the terminal.
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test -p mpa-cli --test acceptance -- 5 7`.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use mpa_core::bounds::{capacity_cnn, capacity_fc, conv_unroll, frobenius, patch_norms, spectral_norm};
use mpa_core::experiment::lemmas::{LemmaInstance, LemmaVerdict, VerdictStatus};
use mpa_core::experiment::{p_value, pearson_r, run_suite, verify_lemma1, verify_lemma2, SuiteSpec};
use mpa_core::transfer::cross_entropy_loss;
use mpa_core::{
    compute_mpa, empirical_joint, fit_majority_predictor, mpa_hits, Activation, ConvGeometry, Layer, Matrix,
    PairedLabelDataset,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2} s", d.as_secs_f64())
}

fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

// ---------------------------------------------------------------------------
// 1. MPA against a brute-force count

/// Hits and per-source predictions by direct scanning of the raw pairs.
fn brute_force_mpa(pairs: &[(usize, usize)], m_s: usize, m_t: usize) -> (usize, Vec<usize>) {
    let count = |f: &dyn Fn(&(usize, usize)) -> bool| pairs.iter().filter(|p| f(p)).count();
    let mut global = 0;
    for t in 1..m_t {
        if count(&|p| p.1 == t) > count(&|p| p.1 == global) {
            global = t;
        }
    }
    let mut mapping = vec![global; m_s];
    for (s, slot) in mapping.iter_mut().enumerate() {
        if count(&|p| p.0 == s) == 0 {
            continue;
        }
        let mut best = 0;
        for t in 1..m_t {
            if count(&|p| p.0 == s && p.1 == t) > count(&|p| p.0 == s && p.1 == best) {
                best = t;
            }
        }
        *slot = best;
    }
    let hits = pairs.iter().filter(|&&(s, t)| mapping[s] == t).count();
    (hits, mapping)
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=200);
        let m_s = rng.random_range(1..=10);
        let m_t = rng.random_range(1..=10);
        let pairs: Vec<(usize, usize)> = (0..n)
            .map(|_| (rng.random_range(0..m_s), rng.random_range(0..m_t)))
            .collect();
        let data = PairedLabelDataset::new(pairs.clone(), m_s, m_t).unwrap();
        let (hits, mapping) = brute_force_mpa(&pairs, m_s, m_t);
        let ok = mpa_hits(&data) == hits
            && compute_mpa(&data) == hits as f64 / n as f64
            && fit_majority_predictor(&empirical_joint(&data)).mapping() == mapping.as_slice();
        mismatches += usize::from(!ok);
    }
    let elapsed = start.elapsed();
    verdict(
        mismatches == 0 && elapsed < Duration::from_secs(10),
        format!("1000 datasets, {mismatches} mismatches, {}", secs(elapsed)),
    )
}

// ---------------------------------------------------------------------------
// 2, 3. Empirical-risk inequalities over seeded instances

fn sweep(verify: fn(&LemmaInstance) -> mpa_core::Result<LemmaVerdict>) -> Verdict {
    let start = Instant::now();
    let results: Vec<mpa_core::Result<LemmaVerdict>> = (0..50u64)
        .into_par_iter()
        .map(|seed| verify(&LemmaInstance::random(seed)))
        .collect();
    let mut tally = BTreeMap::new();
    let mut errors = Vec::new();
    let mut points = 0;
    for (seed, r) in results.iter().enumerate() {
        match r {
            Ok(v) => {
                *tally.entry(format!("{:?}", v.status).to_lowercase()).or_insert(0) += 1;
                points += v.points.len();
            }
            Err(e) => errors.push(format!("seed {seed}: {e}")),
        }
    }
    let violated = results
        .iter()
        .filter(|r| r.as_ref().is_ok_and(|v| v.status == VerdictStatus::Violated))
        .count();
    let elapsed = start.elapsed();
    verdict(
        errors.is_empty() && violated == 0 && elapsed < Duration::from_secs(600),
        format!(
            "50 instances: {tally:?}, {points} margin points checked, {violated} violations, {} errors, {}",
            errors.len(),
            secs(elapsed)
        ),
    )
}

fn criterion_2() -> Verdict {
    sweep(verify_lemma1)
}

fn criterion_3() -> Verdict {
    sweep(verify_lemma2)
}

// ---------------------------------------------------------------------------
// 4. Backpropagation against central differences

fn random_conv_geometry(rng: &mut ChaCha8Rng, max_out: usize) -> (ConvGeometry, usize) {
    loop {
        let in_height = rng.random_range(1..=7);
        let in_width = rng.random_range(1..=7);
        let g = ConvGeometry {
            in_channels: rng.random_range(1..=3),
            in_height,
            in_width,
            kernel_height: rng.random_range(1..=in_height),
            kernel_width: rng.random_range(1..=in_width),
            stride: rng.random_range(1..=3),
        };
        let out_channels = rng.random_range(1..=4);
        if out_channels * g.positions() <= max_out {
            return (g, out_channels);
        }
    }
}

/// Random network of 1 to 3 layers, every width at most 8; the first layer is
/// sometimes a convolution.
fn random_small_layers(rng: &mut ChaCha8Rng) -> (Vec<Layer>, usize) {
    let depth = rng.random_range(1..=3);
    let mut layers = Vec::new();
    let mut dim;
    let input_dim;
    if depth > 1 && rng.random_bool(0.4) {
        let (g, oc) = loop {
            let (g, oc) = random_conv_geometry(rng, 8);
            if g.input_len() <= 8 {
                break (g, oc);
            }
        };
        input_dim = g.input_len();
        layers.push(Layer::conv(rand_matrix(rng, oc, g.patch_len()), g, Activation::Relu));
        dim = oc * g.positions();
    } else {
        input_dim = rng.random_range(1..=8);
        dim = input_dim;
    }
    while layers.len() < depth {
        let last = layers.len() + 1 == depth;
        let out = if last {
            rng.random_range(2..=8)
        } else {
            rng.random_range(1..=8)
        };
        let act = if last || rng.random_bool(0.2) {
            Activation::Identity
        } else {
            Activation::Relu
        };
        layers.push(Layer::dense(rand_matrix(rng, out, dim), act));
        dim = out;
    }
    (layers, input_dim)
}

/// Smallest |pre-activation| of any ReLU unit; finite differences are only
/// meaningful away from the kink.
fn min_relu_preactivation(layers: &[Layer], x: &Matrix) -> f64 {
    let mut h = x.clone();
    let mut smallest = f64::INFINITY;
    for l in layers {
        let pre = l.pre_activation(&h);
        if l.activation() == Activation::Relu {
            smallest = pre.iter().fold(smallest, |m, v| m.min(v.abs()));
        }
        h = pre.mapv(|v| l.activation().apply(v));
    }
    smallest
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-5;
    // entries whose magnitude is below this are compared absolutely
    let floor = 1e-7;
    let mut worst = 0.0f64;
    let mut entries = 0;
    let mut nets = 0;
    while nets < 100 {
        let (mut layers, input_dim) = random_small_layers(&mut rng);
        let classes = layers.last().unwrap().output_dim();
        let x = rand_matrix(&mut rng, 6, input_dim) * 2.0;
        let y: Vec<usize> = (0..6).map(|_| rng.random_range(0..classes)).collect();
        if min_relu_preactivation(&layers, &x) < 1e-3 {
            continue;
        }
        nets += 1;
        let analytic = mpa_core::transfer::cross_entropy_gradient(&layers, &x, &y)
            .unwrap()
            .grads;
        for li in 0..layers.len() {
            let shape = layers[li].weights().dim();
            for r in 0..shape.0 {
                for c in 0..shape.1 {
                    let w0 = layers[li].weights()[[r, c]];
                    layers[li].weights_mut()[[r, c]] = w0 + h;
                    let up = cross_entropy_loss(&layers, &x, &y).unwrap();
                    layers[li].weights_mut()[[r, c]] = w0 - h;
                    let down = cross_entropy_loss(&layers, &x, &y).unwrap();
                    layers[li].weights_mut()[[r, c]] = w0;
                    let fd = (up - down) / (2.0 * h);
                    let a = analytic[li][[r, c]];
                    let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(floor);
                    worst = worst.max(rel);
                    entries += 1;
                }
            }
        }
    }
    verdict(
        worst < 1e-4,
        format!("100 networks, {entries} entries, max relative error {worst:.2e}"),
    )
}

// ---------------------------------------------------------------------------
// 5. Spectral norm against a Jacobi eigensolver

/// Largest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
fn jacobi_max_eigenvalue(mut a: Matrix) -> f64 {
    let n = a.nrows();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[[i, i]]).fold(f64::NEG_INFINITY, f64::max)
}

fn oracle_spectral(a: &Matrix) -> f64 {
    jacobi_max_eigenvalue(a.t().dot(a)).max(0.0).sqrt()
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (r, c) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let a = rand_matrix(&mut rng, r, c);
        let expected = oracle_spectral(&a);
        let got = spectral_norm(&a).unwrap();
        worst = worst.max((got - expected).abs() / expected);
    }
    verdict(worst < 1e-6, format!("100 matrices, max relative error {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// 6. Fully connected capacity closed forms

fn criterion_6() -> Verdict {
    let a1 = Array2::eye(2);
    let a2 = ndarray::array![[3.0, 4.0], [0.0, 0.0]];
    let fixture = capacity_fc(&[&a1, &a2], &[&a1, &a2]).unwrap();
    let fixture_ok = (fixture - 10.0).abs() < 1e-9;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let depth = rng.random_range(2..=4);
        let mut dims: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..=8)).collect();
        dims[depth] = rng.random_range(2..=8);
        let mats: Vec<Matrix> = (0..depth)
            .map(|i| rand_matrix(&mut rng, dims[i + 1], dims[i]))
            .collect();
        let views: Vec<&Matrix> = mats.iter().collect();
        let got = capacity_fc(&views, &views).unwrap();
        let product: f64 = mats[..depth - 1].iter().map(|a| spectral_norm(a).unwrap()).product();
        let expected = depth as f64 * product * frobenius(&mats[depth - 1]);
        worst = worst.max((got - expected).abs() / expected.max(1.0));
    }
    verdict(
        fixture_ok && worst < 1e-9,
        format!("two-layer fixture = {fixture}, identity on 50 networks max relative error {worst:.2e}"),
    )
}

// ---------------------------------------------------------------------------
// 7. Convolution unrolling and the convolutional capacity at zero displacement

/// Direct convolution with the layout `x[(c·H + y)·W + x]`, filter columns in
/// `(c, ky, kx)` order and outputs at `o·positions + oy·out_width + ox`.
fn direct_conv(filters: &Matrix, g: &ConvGeometry, x: &Array1<f64>) -> Array1<f64> {
    let (oh, ow) = (g.out_height(), g.out_width());
    let mut out = Array1::zeros(filters.nrows() * oh * ow);
    for o in 0..filters.nrows() {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0;
                for c in 0..g.in_channels {
                    for ky in 0..g.kernel_height {
                        for kx in 0..g.kernel_width {
                            let col = (c * g.kernel_height + ky) * g.kernel_width + kx;
                            let yy = oy * g.stride + ky;
                            let xx = ox * g.stride + kx;
                            acc += filters[[o, col]] * x[(c * g.in_height + yy) * g.in_width + xx];
                        }
                    }
                }
                out[o * oh * ow + oy * ow + ox] = acc;
            }
        }
    }
    out
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (g, oc) = random_conv_geometry(&mut rng, usize::MAX);
        let filters = rand_matrix(&mut rng, oc, g.patch_len());
        let layer = Layer::conv(filters.clone(), g, Activation::Identity);
        let x = Array1::from_shape_simple_fn(g.input_len(), || rng.random_range(-1.0..1.0));
        let expected = direct_conv(&filters, &g, &x);
        let Layer::Conv(conv) = &layer else { unreachable!() };
        let unrolled = conv_unroll(conv).unwrap().matrix.dot(&x);
        let forward = layer
            .forward(&x.clone().insert_axis(ndarray::Axis(0)))
            .row(0)
            .to_owned();
        for (e, (u, f)) in expected.iter().zip(unrolled.iter().zip(forward.iter())) {
            worst = worst.max((e - u).abs()).max((e - f).abs());
        }
    }

    // G_A vanishes exactly at zero displacement and only there
    let mut zero_ok = true;
    let mut moved_ok = true;
    for _ in 0..20 {
        let (g, oc) = random_conv_geometry(&mut rng, 24);
        let layers = vec![
            Layer::conv(rand_matrix(&mut rng, oc, g.patch_len()), g, Activation::Relu),
            Layer::dense(rand_matrix(&mut rng, 3, oc * g.positions()), Activation::Identity),
        ];
        let x = rand_matrix(&mut rng, 10, g.input_len());
        let b = patch_norms(&layers, &x).unwrap();
        if b.contains(&0.0) {
            continue;
        }
        let same: Vec<&Matrix> = layers.iter().map(Layer::weights).collect();
        zero_ok &= capacity_cnn(&layers, &same, &b, 0.1).unwrap().value == 0.0;
        let mut shifted: Vec<Matrix> = same.iter().map(|m| (*m).clone()).collect();
        let li = rng.random_range(0..2);
        shifted[li][[0, 0]] += 0.5;
        let refs: Vec<&Matrix> = shifted.iter().collect();
        moved_ok &= capacity_cnn(&layers, &refs, &b, 0.1).unwrap().value > 0.0;
    }
    verdict(
        worst < 1e-9 && zero_ok && moved_ok,
        format!(
            "100 geometries, max abs error {worst:.2e}; G_A = 0 at A = M: {zero_ok}, > 0 after a shift: {moved_ok}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. Correlation experiment on the default suite

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let result = run_suite(&SuiteSpec::default());
    let elapsed = start.elapsed();
    match result {
        Ok(res) => {
            let rs: Vec<String> = res.runs.iter().map(|r| format!("{:.3}", r.r)).collect();
            verdict(
                res.median_r >= 0.6 && res.median_p_value < 0.05 && elapsed < Duration::from_secs(900),
                format!(
                    "median r = {:.4} (per seed [{}]), median p = {:.2e}, {}",
                    res.median_r,
                    rs.join(", "),
                    res.median_p_value,
                    secs(elapsed)
                ),
            )
        }
        Err(e) => verdict(false, format!("suite failed: {e}")),
    }
}

// ---------------------------------------------------------------------------
// 9. Statistics

fn direct_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// `Γ((ν+1)/2) / Γ(ν/2)` for integer `ν ≥ 1`, by the recurrence `Γ(z+1) = zΓ(z)`.
fn gamma_ratio(nu: usize) -> f64 {
    // ratio(ν) = Γ((ν+1)/2)/Γ(ν/2); ratio(1) = 1/√π, ratio(2) = √π/2, ratio(ν+2) = ratio(ν)·(ν+1)/ν
    let mut r = if nu % 2 == 1 {
        1.0 / std::f64::consts::PI.sqrt()
    } else {
        std::f64::consts::PI.sqrt() / 2.0
    };
    let mut k = if nu % 2 == 1 { 1 } else { 2 };
    while k < nu {
        r *= (k as f64 + 1.0) / k as f64;
        k += 2;
    }
    r
}

/// Two-tailed p from composite Simpson integration of the t density on `[0, |t|]`.
fn quadrature_p(r: f64, n: usize) -> f64 {
    let nu = n - 2;
    let t = (r * ((nu as f64) / (1.0 - r * r)).sqrt()).abs();
    let c = gamma_ratio(nu) / (nu as f64 * std::f64::consts::PI).sqrt();
    let f = |x: f64| c * (1.0 + x * x / nu as f64).powf(-(nu as f64 + 1.0) / 2.0);
    let steps = 200_000;
    let h = t / steps as f64;
    let mut s = f(0.0) + f(t);
    for i in 1..steps {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - 2.0 * s * h / 3.0
}

fn criterion_9() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_r = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(3..=50);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.7 * v + rng.random_range(-5.0..5.0)).collect();
        worst_r = worst_r.max((pearson_r(&x, &y).unwrap() - direct_pearson(&x, &y)).abs());
    }
    let fixture = pearson_r(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
    let fixture_ok = (fixture - 3.0 / (28.0f64 / 3.0).sqrt()).abs() < 1e-12 && (fixture - 0.9820).abs() < 5e-5;

    let mut worst_p = 0.0f64;
    for &(r, n) in &[
        (0.9, 10),
        (0.5, 10),
        (0.3, 25),
        (0.95, 5),
        (-0.6, 12),
        (0.1, 100),
        (0.99, 4),
    ] {
        worst_p = worst_p.max((p_value(r, n).unwrap() - quadrature_p(r, n)).abs());
    }

    let grid: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
    let in_r = grid
        .windows(2)
        .all(|w| p_value(w[1], 10).unwrap() < p_value(w[0], 10).unwrap());
    let in_n = (3..23)
        .collect::<Vec<usize>>()
        .windows(2)
        .all(|w| p_value(0.4, w[1]).unwrap() < p_value(0.4, w[0]).unwrap());
    let conventions = p_value(0.0, 7).unwrap() == 1.0 && p_value(1.0, 7).unwrap() == 0.0;
    verdict(
        worst_r < 1e-12 && fixture_ok && worst_p < 1e-8 && in_r && in_n && conventions,
        format!(
            "pearson max error {worst_r:.1e}, fixture {fixture:.6}; p-value vs quadrature max error {worst_p:.1e}; \
             decreasing in |r|: {in_r}, in n: {in_n}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 10. CLI determinism

fn mpa(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mpa"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("run mpa")
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.json" {
                out.insert(
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

fn criterion_10() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    std::fs::write(
        root.join("pairs.csv"),
        "source_label,target_label\n0,0\n0,0\n0,1\n1,1\n2,1\n",
    )
    .unwrap();
    std::fs::write(
        root.join("transfer.json"),
        r#"{"synthetic": {"seed": 2, "n_source": 400, "n_target": 400, "alpha": 0.8, "separation": 4.0},
            "train": {"epochs": 20}}"#,
    )
    .unwrap();
    std::fs::write(
        root.join("suite.json"),
        r#"{"n_train": 300, "n_heldout": 300, "seeds": [0, 1], "train": {"epochs": 5}}"#,
    )
    .unwrap();

    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("score", vec!["score", "pairs.csv"]),
        ("transfer", vec!["transfer", "transfer.json"]),
        (
            "dummy",
            vec![
                "score",
                "--dummy",
                "--model",
                "transfer_a/source_model.json",
                "--inputs",
                "transfer_a/target_inputs.csv",
                "labels.csv",
            ],
        ),
        ("bounds", vec!["bounds", "transfer_a"]),
        ("correlate", vec!["correlate", "suite.json", "--emit-tasks"]),
    ];
    let mut notes = Vec::new();
    let mut pass = true;
    for (name, args) in runs {
        if name == "dummy" {
            // target labels of the transfer run, as a single column
            let x = std::fs::read_to_string(root.join("transfer_a/target_inputs.csv")).unwrap();
            let labels: String = (0..x.lines().count()).map(|i| format!("{}\n", i % 2)).collect();
            std::fs::write(root.join("labels.csv"), labels).unwrap();
        }
        let mut same = true;
        for suffix in ["a", "b"] {
            let out = format!("{name}_{suffix}");
            let mut full = args.clone();
            full.extend(["--out-dir", &out]);
            let o = mpa(&full, root);
            if !o.status.success() {
                notes.push(format!(
                    "{name}: exit {:?}: {}",
                    o.status.code(),
                    String::from_utf8_lossy(&o.stderr).trim()
                ));
                same = false;
            }
        }
        let a = dir_contents(&root.join(format!("{name}_a")));
        same &= !a.is_empty() && a == dir_contents(&root.join(format!("{name}_b")));
        let replay = mpa(&["replay", &format!("{name}_a/manifest.json")], root);
        let replayed = replay.status.success();
        pass &= same && replayed;
        notes.push(format!("{name}: rerun identical {same}, replay {replayed}"));
    }
    verdict(pass, notes.join("; "))
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let filtered = std::env::args().skip(1).any(|a| !a.starts_with('-'));
    if filtered && selected.is_empty() && !std::env::args().any(|a| a.contains("acceptance")) {
        // a libtest-style name filter meant for other test targets
        return;
    }
    type Criterion = (usize, &'static str, fn() -> Verdict);
    let criteria: [Criterion; 10] = [
        (1, "MPA oracle equivalence", criterion_1),
        (2, "shared-input inequality sweep", criterion_2),
        (3, "different-input inequality sweep", criterion_3),
        (4, "gradient vs finite differences", criterion_4),
        (5, "spectral norm vs eigensolver", criterion_5),
        (6, "F_A closed forms", criterion_6),
        (7, "convolution unrolling and G_A", criterion_7),
        (8, "MPA / accuracy correlation", criterion_8),
        (9, "statistics", criterion_9),
        (10, "CLI determinism", criterion_10),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let v = run();
        println!(
            "[{}] {id:>2} {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
