//! Acceptance suite: one check per acceptance criterion, each printing a
//! PASS or FAIL line. Runs without the libtest harness so the lines are
//! always visible; the process fails if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use modgap::cone::{Activation, MlpSpec};
use modgap::gaploss::{clip_loss, clip_loss_grad_mats, clip_loss_mats, default_lambda_grid, landscape_sweep, temperature_gap_profile, PairedBatch};
use modgap::io::{read_embeddings, write_embeddings, EmbeddingFormat};
use modgap::numcore::{cap_fraction_for_cos, gaussian_matrix, log2_cap_fraction_for_cos, normalize};
use modgap::spheresim::{
    default_theta_grid, init_vs_opt_experiment, mismatched_batch, procrustes_align, sim_landscape, train_embeddings,
    InitKind, SimConfig, TrainConfig,
};
use modgap::theory::{
    lemma1_random_pairs, rates_non_decreasing, theorem1_experiment, variance_decomposition, Theorem1Config, Z_99,
};
use modgap::{EmbeddingSet, Mat, Rng};

const SEED: u64 = 42;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: String) -> Check {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_modgap")
}

fn run_bin(args: &[&str]) -> Result<String, String> {
    let out = Process::new(bin())
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "modgap {} exited with {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn sha256(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).expect("output file exists")))
}

/// Column `name` of a CSV file, parsed as f64.
fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let text = std::fs::read_to_string(path).expect("csv readable");
    let mut lines = text.lines();
    let idx = lines
        .next()
        .unwrap()
        .split(',')
        .position(|h| h == name)
        .expect("column present");
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

/// Spearman rank correlation with average ranks for ties.
fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(x: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
        let mut r = vec![0.0; x.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
                j += 1;
            }
            for k in i..=j {
                r[idx[k]] = (i + j) as f64 / 2.0;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn c1_sigmoid_cone(dir: &Path) -> Check {
    let out = dir.join("c1.csv");
    let start = Instant::now();
    run_bin(&[
        "mlp-curve", "--activation", "sigmoid", "--depth", "2", "--dim", "512", "--n", "1000", "--seed", "42",
        "--out", out.to_str().unwrap(),
    ])?;
    let secs = start.elapsed().as_secs_f64();
    let last = *csv_column(&out, "mean_cos").last().unwrap();
    ensure(
        last >= 0.98 && secs < 30.0,
        format!("final mean cos {last:.4} (need >= 0.98), {secs:.1} s (need < 30 s)"),
    )
}

fn c2_linear_cone(dir: &Path) -> Check {
    let out = dir.join("c2.csv");
    run_bin(&[
        "mlp-curve", "--activation", "none", "--depth", "6", "--dim", "512", "--n", "1000", "--out",
        out.to_str().unwrap(),
    ])?;
    let curve = csv_column(&out, "mean_cos");
    let worst = curve.iter().map(|c| (c - curve[0]).abs()).fold(0.0, f64::max);
    ensure(
        worst <= 0.05,
        format!("largest drift from layer 0 is {worst:.4} (need <= 0.05) over {} layers", curve.len()),
    )
}

fn c3_relu_trend(dir: &Path) -> Check {
    let out = dir.join("c3.csv");
    run_bin(&["mlp-curve", "--activation", "relu", "--depth", "6", "--dim", "512", "--n", "1000", "--out", out.to_str().unwrap()])?;
    let curve = csv_column(&out, "mean_cos");
    let layers: Vec<f64> = (0..curve.len()).map(|l| l as f64).collect();
    let rho = spearman(&layers, &curve);
    ensure(
        rho >= 0.9,
        format!("Spearman {rho:.4} (need >= 0.9); mean cos {:.3} -> {:.3}", curve[0], curve[curve.len() - 1]),
    )
}

fn c4_cap_geometry() -> Check {
    let circle = cap_fraction_for_cos(2, 0.56).map_err(|e| e.to_string())?;
    let log2 = log2_cap_fraction_for_cos(512, 0.56).map_err(|e| e.to_string())?;
    let d5 = cap_fraction_for_cos(5, 0.56).map_err(|e| e.to_string())?;
    // Monte Carlo: uniform directions via normalized Gaussians, hit if within
    // the half-angle of the pole
    let cos_limit = (0.56f64.acos() / 2.0).cos();
    let mut rng = Rng::new(0x5eed_cafe);
    let samples = 1_000_000;
    let mut hits = 0u64;
    let mut v = [0.0; 5];
    for _ in 0..samples {
        rng.fill_normal(&mut v, 1.0);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if v[0] / n >= cos_limit {
            hits += 1;
        }
    }
    let mc = hits as f64 / samples as f64;
    ensure(
        (circle - 0.1553).abs() <= 0.0005 && log2 < -512.0 && (d5 - mc).abs() <= 0.002,
        format!(
            "d=2 fraction {circle:.5} (0.1553 ± 0.0005), d=512 log2 {log2:.1} (< -512), d=5 {d5:.5} vs MC {mc:.5} (± 0.002)"
        ),
    )
}

fn c5_theorem1() -> Check {
    let start = Instant::now();
    let mut reports = Vec::new();
    for d_out in [4, 16, 64, 512] {
        let cfg = Theorem1Config::new(512, d_out, 0.5, 1.0, 1000, SEED).map_err(|e| e.to_string())?;
        reports.push(theorem1_experiment(&cfg).map_err(|e| e.to_string())?.trials);
    }
    let secs = start.elapsed().as_secs_f64();
    let rates: Vec<String> = reports.iter().map(|r| format!("{:.3}", r.rate)).collect();
    let top = reports[3].rate;
    ensure(
        top >= 0.95 && rates_non_decreasing(&reports) && reports[0].rate < top && secs < 60.0,
        format!("rates over d_out 4/16/64/512: {} (need last >= 0.95, non-decreasing), {secs:.1} s", rates.join(" ")),
    )
}

fn c6_lemma1() -> Check {
    let rows = lemma1_random_pairs(20, 16, 256, 10_000, Z_99, SEED).map_err(|e| e.to_string())?;
    let hold = rows.iter().filter(|r| r.check.holds).count();
    let matched = rows.iter().filter(|r| r.check.mid_matches_closed_form).count();
    ensure(
        hold == rows.len() && matched == rows.len(),
        format!("bounds hold on {hold}/20 pairs, middle term within its 99% CI of uᵀv+1 on {matched}/20"),
    )
}

fn c7_theorem2() -> Check {
    let deep = variance_decomposition(&MlpSpec::uniform(512, 4, Activation::Relu), 0, 50, 200, &Rng::new(SEED))
        .map_err(|e| e.to_string())?;
    let shallow = variance_decomposition(&MlpSpec::uniform(512, 1, Activation::Relu), 0, 50, 200, &Rng::new(SEED))
        .map_err(|e| e.to_string())?;
    let beta = deep.beta_est.expect("depth 4 has a beta estimate");
    ensure(
        deep.ratio >= beta - 0.05 && deep.ratio > shallow.ratio,
        format!(
            "depth 4 ratio {:.4} vs beta {beta:.4} (need ratio >= beta - 0.05); depth 1 ratio {:.4}",
            deep.ratio, shallow.ratio
        ),
    )
}

fn c8_contrastive_loss() -> Check {
    let unit = |rows: &[Vec<f64>]| Mat::from_rows(rows).unwrap();
    let mut rng = Rng::new(SEED);
    let one = rng.unit_vector(5);
    let other = rng.unit_vector(5);
    let l1 = clip_loss(&PairedBatch::from_mats(unit(&[one]), unit(&[other])).unwrap(), 0.3).unwrap();
    let same = vec![vec![0.0, 1.0, 0.0]; 4];
    let l4 = clip_loss(&PairedBatch::from_mats(unit(&same), unit(&same)).unwrap(), 1.0).unwrap();
    let e = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let l2 = clip_loss(&PairedBatch::from_mats(unit(&e), unit(&e)).unwrap(), 1.0).unwrap();
    let exact = l1.abs() <= 1e-9 && (l4 - 4f64.ln()).abs() <= 1e-9 && (l2 - (1.0 + (-1f64).exp()).ln()).abs() <= 1e-9;

    let mut worst: f64 = 0.0;
    for n in [2, 8] {
        for d in [4, 64] {
            for tau in [0.01, 1.0] {
                let x = random_unit_rows(n, d, &mut rng);
                let y = random_unit_rows(n, d, &mut rng);
                worst = worst.max(fd_relative_error(&x, &y, tau));
            }
        }
    }
    ensure(
        exact && worst <= 1e-5,
        format!(
            "N=1 loss {l1:.2e}, N=4 identical {l4:.12}, N=2 orthogonal {l2:.12}; worst gradient relative error {worst:.2e} (need <= 1e-5)"
        ),
    )
}

fn random_unit_rows(n: usize, d: usize, rng: &mut Rng) -> Mat {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| rng.unit_vector(d)).collect();
    Mat::from_rows(&rows).unwrap()
}

/// max |analytic - central difference| / max |analytic| over both inputs.
fn fd_relative_error(x: &Mat, y: &Mat, tau: f64) -> f64 {
    let h = 1e-5;
    let (gx, gy) = clip_loss_grad_mats(x, y, tau).unwrap();
    let mut max_diff: f64 = 0.0;
    let mut max_grad: f64 = 0.0;
    for (which, g) in [(0, &gx), (1, &gy)] {
        for k in 0..x.as_slice().len() {
            let bump = |delta: f64| {
                let (mut xp, mut yp) = (x.clone(), y.clone());
                let target = if which == 0 { &mut xp } else { &mut yp };
                target.as_mut_slice()[k] += delta;
                clip_loss_mats(&xp, &yp, tau).unwrap()
            };
            let fd = (bump(h) - bump(-h)) / (2.0 * h);
            max_diff = max_diff.max((fd - g.as_slice()[k]).abs());
            max_grad = max_grad.max(g.as_slice()[k].abs());
        }
    }
    if max_grad == 0.0 {
        max_diff
    } else {
        max_diff / max_grad
    }
}

fn c9_sphere_sim() -> Check {
    let start = Instant::now();
    let grid = default_theta_grid();
    let step = grid[1] - grid[0];
    let mut matched_argmins = Vec::new();
    for tau in [1.0, 0.1, 0.01] {
        let curve = sim_landscape(&SimConfig::default(), tau, &grid).map_err(|e| e.to_string())?;
        matched_argmins.push(curve.global_min().control);
    }
    let mism = sim_landscape(&SimConfig { mismatched: true, ..SimConfig::default() }, 0.01, &grid)
        .map_err(|e| e.to_string())?;
    let best = mism.global_min();
    let excess = mism.points.last().unwrap().loss - best.loss;
    let secs = start.elapsed().as_secs_f64();
    let matched_ok = matched_argmins.iter().all(|t| (t - grid[grid.len() - 1]).abs() <= step + 1e-12);
    let degs: Vec<String> = matched_argmins.iter().map(|t| format!("{:.0}", t.to_degrees())).collect();
    ensure(
        matched_ok && best.control < grid[grid.len() - 1] && excess > 0.0 && secs < 5.0,
        format!(
            "matched argmin deg {} (need 90 ± 1 step); mismatched tau=0.01 argmin {:.0} deg, loss(90) - min {excess:.4}; {secs:.2} s",
            degs.join("/"),
            best.control.to_degrees()
        ),
    )
}

fn c10_landscape() -> Check {
    let batch = mismatched_batch().map_err(|e| e.to_string())?;
    let grid = default_lambda_grid();
    let cold = landscape_sweep(&batch, 0.01, &grid).map_err(|e| e.to_string())?;
    let hot = landscape_sweep(&batch, 1.0, &grid).map_err(|e| e.to_string())?;
    let profile = temperature_gap_profile(&batch, &[0.01, 0.1, 1.0], &grid).map_err(|e| e.to_string())?;
    let gaps: Vec<String> = profile.iter().map(|p| format!("{:.4}", p.gap_at_argmin)).collect();
    let monotone = profile.windows(2).all(|w| w[1].gap_at_argmin <= w[0].gap_at_argmin);
    let cold_gap = cold.global_min().remaining_gap;
    let hot_ok = hot.points[hot.global_min_index].remaining_gap == hot.points[hot.min_gap_index()].remaining_gap;
    ensure(
        cold_gap > 0.1 && hot_ok && monotone,
        format!(
            "tau=0.01 minimum keeps gap {cold_gap:.4} (> 0.1); tau=1 minimum at gap {:.4} vs grid minimum {:.4}; gap at argmin over tau 0.01/0.1/1: {}",
            hot.global_min().remaining_gap,
            hot.points[hot.min_gap_index()].remaining_gap,
            gaps.join(" ")
        ),
    )
}

fn train_cfg(tau: f64, seed: u64, init: InitKind) -> TrainConfig {
    TrainConfig {
        n_pairs: 64,
        dim: 128,
        tau,
        steps: 500,
        learning_rate: 0.5,
        init,
        seed,
        batch_size: None,
    }
}

fn c11_training() -> Check {
    let mut margins = Vec::new();
    for r in 0..3u64 {
        let seed = Rng::new(SEED).child(r).next_u64();
        let hot = train_embeddings(&train_cfg(1.0, seed, InitKind::RandomCones { depth: 4 })).map_err(|e| e.to_string())?;
        let cold = train_embeddings(&train_cfg(0.01, seed, InitKind::RandomCones { depth: 4 })).map_err(|e| e.to_string())?;
        margins.push((hot.final_gap(), cold.final_gap()));
    }
    let ok = margins.iter().all(|(h, c)| c - h >= 0.1);
    let shown: Vec<String> = margins.iter().map(|(h, c)| format!("{h:.3} vs {c:.3}")).collect();
    ensure(ok, format!("final gap tau=1 vs tau=0.01 per seed: {} (need difference >= 0.1)", shown.join(", ")))
}

fn c12_init_vs_opt() -> Check {
    let r = init_vs_opt_experiment(&train_cfg(0.01, SEED, InitKind::RandomCones { depth: 4 }), 3)
        .map_err(|e| e.to_string())?;
    let (ra, am) = (&r.random_init, &r.amended_init);
    ensure(
        am.before.mean < 0.1 && ra.before.mean > 0.5 && am.after.mean > am.before.mean && am.after.mean < ra.after.mean,
        format!(
            "random init gap {:.4} -> {:.4}; amended {:.4} -> {:.4}",
            ra.before.mean, ra.after.mean, am.before.mean, am.after.mean
        ),
    )
}

fn random_rotation(d: usize, rng: &mut Rng) -> Mat {
    // QR of a Gaussian matrix by modified Gram-Schmidt
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(d);
    while q.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        for u in &q {
            let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
        }
        if let Ok(n) = normalize(&v) {
            q.push(n);
        }
    }
    Mat::from_rows(&q).unwrap()
}

fn c13_procrustes() -> Check {
    let mut rng = Rng::new(SEED);
    let mut worst_orth: f64 = 0.0;
    for i in 0..100 {
        let (n, d) = (10 + i % 40, 2 + i % 12);
        let x = gaussian_matrix(n, d, 1.0, &mut rng).unwrap();
        let y = gaussian_matrix(n, d, 1.0, &mut rng).unwrap();
        let w = procrustes_align(&x, &y).map_err(|e| e.to_string())?;
        worst_orth = worst_orth.max(w.orthogonality_error());
    }
    let x = gaussian_matrix(100, 8, 1.0, &mut rng).unwrap();
    let r = random_rotation(8, &mut rng);
    let y = x.matmul(&r.transpose()).unwrap();
    let map = procrustes_align(&x, &y).map_err(|e| e.to_string())?;
    let resid = x.sub(&map.apply(&y).unwrap()).unwrap().frobenius_norm();
    ensure(
        worst_orth <= 1e-8 && resid <= 1e-6,
        format!("worst ‖WᵀW - I‖ over 100 instances {worst_orth:.2e} (<= 1e-8); rotation recovery residual {resid:.2e} (<= 1e-6)"),
    )
}

fn c14_infrastructure(dir: &Path) -> Check {
    // file formats
    let mut rng = Rng::new(SEED);
    let rows: Vec<Vec<f64>> = (0..7).map(|_| (0..5).map(|_| rng.normal() as f32 as f64).collect()).collect();
    let set = EmbeddingSet::from_rows(&rows, "audio").unwrap();
    let mut formats_ok = true;
    for (ext, fmt) in [("csv", EmbeddingFormat::Csv), ("jsonl", EmbeddingFormat::Jsonl), ("bin", EmbeddingFormat::Bin)] {
        let path = dir.join(format!("roundtrip.{ext}"));
        write_embeddings(&set, &path, fmt).map_err(|e| e.to_string())?;
        let back = read_embeddings(&path).map_err(|e| e.to_string())?;
        let same_values = back
            .vectors()
            .as_slice()
            .iter()
            .zip(set.vectors().as_slice())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        formats_ok &= back.len() == 7 && back.dim() == 5 && back.modality() == "audio" && same_values;
    }

    // thread count must not change any output byte
    let runs: [(&str, &[&str]); 3] = [
        ("csv", &["mlp-curve", "--depth", "3", "--dim", "64", "--n", "300"]),
        ("csv", &["theorem1", "--d-in", "64", "--d-out", "4,64", "--trials", "200"]),
        ("json", &["variance-decomp", "--depth", "2", "--dim", "64", "--seeds", "12", "--n", "40"]),
    ];
    // every file a run writes except the manifest, which records timing
    let digest = |out: &Path| {
        let mut sums = vec![sha256(out)];
        let report = out.with_extension("json");
        if report != out {
            sums.push(sha256(&report));
        }
        sums
    };
    let mut threads_ok = true;
    let mut replay_ok = true;
    for (i, (ext, args)) in runs.iter().enumerate() {
        let mut sums = Vec::new();
        for threads in ["1", "4"] {
            let out = dir.join(format!("t{i}_{threads}.{ext}"));
            let mut full: Vec<&str> = args.to_vec();
            let out_s = out.to_str().unwrap().to_string();
            full.extend(["--threads", threads, "--out", &out_s]);
            run_bin(&full)?;
            sums.push(digest(&out));
        }
        threads_ok &= sums[0] == sums[1];

        // replay the single-threaded run into a fresh path
        let original = dir.join(format!("t{i}_1.{ext}"));
        let manifest = original.with_extension("manifest.json");
        let replay = dir.join(format!("replay{i}.{ext}"));
        run_bin(&["--manifest", manifest.to_str().unwrap(), "--out", replay.to_str().unwrap()])?;
        replay_ok &= digest(&replay) == sums[0];
    }
    ensure(
        formats_ok && threads_ok && replay_ok,
        format!("format roundtrips {formats_ok}, --threads 1 vs 4 identical {threads_ok}, manifest replay identical {replay_ok}"),
    )
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let d = dir.path().to_path_buf();
    let criteria: Vec<(&str, Box<dyn Fn(&PathBuf) -> Check>)> = vec![
        ("C1  cone effect, sigmoid", Box::new(|d| c1_sigmoid_cone(d))),
        ("C2  cone effect, linear", Box::new(|d| c2_linear_cone(d))),
        ("C3  cone effect, ReLU trend", Box::new(|d| c3_relu_trend(d))),
        ("C4  cap geometry", Box::new(|_| c4_cap_geometry())),
        ("C5  one-layer cosine increase", Box::new(|_| c5_theorem1())),
        ("C6  inner-product bounds", Box::new(|_| c6_lemma1())),
        ("C7  initialization variance share", Box::new(|_| c7_theorem2())),
        ("C8  contrastive loss exactness", Box::new(|_| c8_contrastive_loss())),
        ("C9  sphere simulation", Box::new(|_| c9_sphere_sim())),
        ("C10 landscape sweep", Box::new(|_| c10_landscape())),
        ("C11 training vs temperature", Box::new(|_| c11_training())),
        ("C12 initialization vs optimization", Box::new(|_| c12_init_vs_opt())),
        ("C13 Procrustes", Box::new(|_| c13_procrustes())),
        ("C14 infrastructure", Box::new(|d| c14_infrastructure(d))),
    ];
    let mut failed = 0;
    let total = Instant::now();
    for (name, check) in &criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| check(&d)))
            .unwrap_or_else(|_| Err("panicked".into()));
        let took = fmt_secs(start.elapsed());
        match result {
            Ok(detail) => println!("PASS {name}: {detail} [{took}]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{took}]");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {}",
        criteria.len() - failed,
        fmt_secs(total.elapsed())
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn fmt_secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}
