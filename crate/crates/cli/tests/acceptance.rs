//! Release gate: ten numbered checks covering the numeric core and the
//! binary. Each test prints one `criterion NN PASS` line (visible with
//! `--nocapture`) and enforces its own runtime budget where one applies.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use chansynth_core::cluster::{adjusted_rand_index, agglomerate, cut, to_distance, Linkage};
use chansynth_core::metrics::{
    extrapolate_max_channels, fit_line, normalized_loss, paired_win_rate,
    run_selection_experiment, ExperimentParams,
};
use chansynth_core::predictor::{grad_check, mlp_backward, mlp_forward, Activation, Mlp};
use chansynth_core::rng::seeded_rng;
use chansynth_core::ssim::{
    ssim_full, ssim_map, ssim_simplified, window_stats, SsimConstants, SsimExponents, WindowSpec,
    WindowStats,
};
use chansynth_core::stacks::{generate_synthetic, import_tiff, load_raw, save_raw};
use chansynth_core::{ChannelStack, SyntheticSpec};
use rand::Rng;

fn random_channel(rng: &mut chansynth_core::rng::SeededRng, pixels: usize) -> Vec<f64> {
    (0..pixels).map(|_| rng.random_range(0.0..1.0)).collect()
}

#[test]
fn criterion_01_windowed_self_similarity_and_symmetry() {
    let t0 = Instant::now();
    let (h, w) = (64usize, 64usize);
    let window = WindowSpec::default_gaussian();
    let constants = SsimConstants::<f64>::unit_range();
    let mut rng = seeded_rng(101);
    let channels: Vec<Vec<f64>> = (0..50).map(|_| random_channel(&mut rng, h * w)).collect();

    let mut worst_identity = 0.0f64;
    for x in &channels {
        let m = ssim_map(x, x, h, w, &window, &constants).unwrap().mean();
        worst_identity = worst_identity.max((m - 1.0).abs());
    }
    assert!(worst_identity <= 1e-9, "self-similarity off by {worst_identity:e}");

    // Swapping the operands must not change the score.
    let mut worst_symmetry = 0.0f64;
    for i in 0..channels.len() {
        for j in i + 1..channels.len() {
            let ab = ssim_map(&channels[i], &channels[j], h, w, &window, &constants)
                .unwrap()
                .mean();
            let ba = ssim_map(&channels[j], &channels[i], h, w, &window, &constants)
                .unwrap()
                .mean();
            worst_symmetry = worst_symmetry.max((ab - ba).abs());
        }
    }
    assert!(worst_symmetry <= 1e-12, "asymmetry {worst_symmetry:e}");

    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 5.0, "took {secs:.2} s, budget 5 s");
    println!(
        "criterion 01 PASS  self-similarity within {worst_identity:.2e}, \
         symmetry within {worst_symmetry:.2e}, {secs:.2} s"
    );
}

/// Every-window reference: gathers each window's pixels and computes
/// centred weighted statistics directly, with none of the separable
/// running-moment machinery the production path uses.
fn brute_force_windowed_mean(
    x: &[f64],
    y: &[f64],
    h: usize,
    w: usize,
    window: &WindowSpec,
    c: &SsimConstants<f64>,
) -> f64 {
    let size = window.size();
    let out_h = h - size + 1;
    let out_w = w - size + 1;
    let mut total = 0.0;
    for r in 0..out_h {
        for col in 0..out_w {
            let mut px = Vec::with_capacity(size * size);
            let mut py = Vec::with_capacity(size * size);
            for dy in 0..size {
                for dx in 0..size {
                    px.push(x[(r + dy) * w + (col + dx)]);
                    py.push(y[(r + dy) * w + (col + dx)]);
                }
            }
            let stats = window_stats(&px, &py, window).unwrap();
            total += ssim_simplified(&stats, c).clamp(-1.0, 1.0);
        }
    }
    total / (out_h * out_w) as f64
}

#[test]
fn criterion_02_windowed_mean_matches_brute_force_oracle() {
    let t0 = Instant::now();
    let (h, w) = (16usize, 16usize);
    let window = WindowSpec::default_gaussian();
    let constants = SsimConstants::<f64>::unit_range();
    let mut rng = seeded_rng(202);

    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x = random_channel(&mut rng, h * w);
        let y = random_channel(&mut rng, h * w);
        let fast = ssim_map(&x, &y, h, w, &window, &constants).unwrap().mean();
        let naive = brute_force_windowed_mean(&x, &y, h, w, &window, &constants);
        worst = worst.max((fast - naive).abs());
    }
    assert!(worst <= 1e-6, "oracle disagreement {worst:e}");

    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 5.0, "took {secs:.2} s, budget 5 s");
    println!("criterion 02 PASS  oracle agreement within {worst:.2e}, {secs:.2} s");
}

#[test]
fn criterion_03_unit_exponent_product_equals_two_factor_form() {
    let t0 = Instant::now();
    let constants = SsimConstants::<f64>::unit_range();
    let exponents = SsimExponents::new(1.0, 1.0, 1.0).unwrap();
    let mut rng = seeded_rng(303);

    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let var_x: f64 = rng.random_range(0.0..0.25);
        let var_y: f64 = rng.random_range(0.0..0.25);
        let bound = (var_x * var_y).sqrt();
        let stats = WindowStats {
            mean_x: rng.random_range(0.0..1.0),
            mean_y: rng.random_range(0.0..1.0),
            var_x,
            var_y,
            cov_xy: rng.random_range(-bound..=bound),
        };
        let full = ssim_full(&stats, &constants, &exponents).unwrap();
        let simplified = ssim_simplified(&stats, &constants);
        let diff = (full - simplified).abs() / simplified.abs().max(1.0);
        worst = worst.max(diff);
    }
    assert!(worst <= 1e-12, "forms disagree by {worst:e}");

    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 1.0, "took {secs:.2} s, budget 1 s");
    println!("criterion 03 PASS  forms agree within {worst:.2e} on 1000 tuples, {secs:.2} s");
}

#[test]
fn criterion_04_clustering_recovers_generator_templates() {
    let t0 = Instant::now();
    let window = WindowSpec::default_gaussian();
    let constants = SsimConstants::<f64>::unit_range();

    let mut recovered = 0usize;
    for seed in 0..20 {
        let spec = SyntheticSpec { seed, ..SyntheticSpec::default() };
        let (stack, labels) = generate_synthetic::<f64>(&spec).unwrap();
        let sim = chansynth_core::ssim::ssim_matrix(&stack, &window, &constants).unwrap();
        let dist = to_distance(&sim);
        let tree = agglomerate(&dist, Linkage::Average).unwrap();
        let assignment = cut(&tree, 4).unwrap();
        let ari = adjusted_rand_index(assignment.labels(), &labels).unwrap();
        if ari > 1.0 - 1e-9 {
            recovered += 1;
        }
    }
    assert!(recovered >= 18, "only {recovered}/20 seeds recovered the template partition");

    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 30.0, "took {secs:.2} s, budget 30 s");
    println!("criterion 04 PASS  template partition recovered in {recovered}/20 seeds, {secs:.2} s");
}

#[test]
fn criterion_05_cluster_selection_beats_random_selection() {
    let t0 = Instant::now();
    let (stack, _) = generate_synthetic::<f64>(&SyntheticSpec::default()).unwrap();
    let params = ExperimentParams::<f64>::default();

    // Budgeted single-threaded: run inside a one-worker pool.
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let table = pool.install(|| run_selection_experiment(&stack, &params)).unwrap();

    let cells = table.rows().len() / 2;
    let rate = paired_win_rate(&table);
    assert!(rate >= 0.8, "cluster selection won only {rate:.3} of {cells} paired cells");

    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 300.0, "took {secs:.2} s, budget 300 s");
    println!("criterion 05 PASS  cluster selection wins {rate:.3} of {cells} paired cells, {secs:.2} s");
}

#[test]
fn criterion_06_backpropagation_matches_central_differences() {
    let t0 = Instant::now();
    let mut rng = seeded_rng(606);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut nets = 0usize;

    // Score networks under both log-score terms an adversary optimizes.
    for flip in [false, true] {
        for _ in 0..6 {
            let sizes = [rng.random_range(2..=4), rng.random_range(2..=5), 1];
            let net: Mlp<f64> = Mlp::new(&sizes, Activation::Logistic, &mut rng).unwrap();
            let input: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
            let err = grad_check(&net, &input, h, |out| {
                let p = out[0];
                if flip {
                    ((1.0 - p).ln(), vec![-1.0 / (1.0 - p)])
                } else {
                    (p.ln(), vec![1.0 / p])
                }
            })
            .unwrap();
            worst = worst.max(err);
            nets += 1;
        }
    }

    // Mean absolute deviation against fixed targets, kept off the kink.
    let lambda = 10.0;
    for _ in 0..4 {
        let t = rng.random_range(2..=3);
        let sizes = [rng.random_range(2..=4), rng.random_range(2..=5), t];
        let net: Mlp<f64> = Mlp::new(&sizes, Activation::Identity, &mut rng).unwrap();
        let input: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (base, _) = mlp_forward(&net, &input).unwrap();
        let targets: Vec<f64> =
            base.iter().enumerate().map(|(i, &v)| v - 0.2 * (i as f64 + 1.0)).collect();
        let scale = lambda / t as f64;
        let err = grad_check(&net, &input, h, |out| {
            let mut val = 0.0;
            let mut grad = vec![0.0; out.len()];
            for i in 0..out.len() {
                let diff = out[i] - targets[i];
                val += scale * diff.abs();
                grad[i] = scale * diff.signum();
            }
            (val, grad)
        })
        .unwrap();
        worst = worst.max(err);
        nets += 1;
    }

    // Full generator objective: log score chained through a frozen
    // scorer plus the weighted deviation term.
    for _ in 0..4 {
        let feat_dim = rng.random_range(1..=3);
        let t = rng.random_range(2..=3);
        let g_sizes = [rng.random_range(2..=4), rng.random_range(2..=5), t];
        let d_sizes = [feat_dim + t, rng.random_range(2..=5), 1];
        let gen: Mlp<f64> = Mlp::new(&g_sizes, Activation::Identity, &mut rng).unwrap();
        let scorer: Mlp<f64> = Mlp::new(&d_sizes, Activation::Logistic, &mut rng).unwrap();
        let input: Vec<f64> = (0..g_sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let features: Vec<f64> = (0..feat_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (base, _) = mlp_forward(&gen, &input).unwrap();
        let targets: Vec<f64> =
            base.iter().enumerate().map(|(i, &v)| v + 0.2 * (i as f64 + 1.0)).collect();
        let scale = lambda / t as f64;
        let err = grad_check(&gen, &input, h, |out| {
            let mut joined = features.clone();
            joined.extend_from_slice(out);
            let (score, cache) = mlp_forward(&scorer, &joined).unwrap();
            let p = score[0];
            let through = mlp_backward(&scorer, &cache, &[-1.0 / (1.0 - p)]).unwrap();
            let mut val = (1.0 - p).ln();
            let mut grad = vec![0.0; out.len()];
            for i in 0..out.len() {
                let diff = out[i] - targets[i];
                val += scale * diff.abs();
                grad[i] = through.input[feat_dim + i] + scale * diff.signum();
            }
            (val, grad)
        })
        .unwrap();
        worst = worst.max(err);
        nets += 1;
    }

    assert_eq!(nets, 20);
    assert!(worst < 1e-4, "worst relative gradient error {worst:e}");

    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 10.0, "took {secs:.2} s, budget 10 s");
    println!("criterion 06 PASS  worst relative gradient error {worst:.2e} over 20 networks, {secs:.2} s");
}

#[test]
fn criterion_07_loss_normalization_arithmetic() {
    assert_eq!(normalized_loss(130.0, 2).unwrap(), 65.0);

    // Power-of-two factors scale through the division without rounding,
    // so homogeneity holds bit-for-bit.
    let mut rng = seeded_rng(707);
    for _ in 0..100 {
        let total = rng.random_range(0.0..1000.0);
        let n = rng.random_range(1..=40usize);
        let factor = 2.0f64.powi(rng.random_range(-6..=6));
        assert_eq!(
            normalized_loss(factor * total, n).unwrap(),
            factor * normalized_loss(total, n).unwrap(),
            "homogeneity failed for total {total}, n {n}, factor {factor}"
        );
    }
    println!("criterion 07 PASS  130/2 = 65 exactly; homogeneity exact on 100 random inputs");
}

#[test]
fn criterion_08_extrapolated_channel_budget() {
    let fit = fit_line(&[(0.0, 0.0), (1.0, 0.4706)]).unwrap();
    assert_eq!(fit.slope(), 0.4706);
    assert_eq!(fit.intercept(), 0.0);

    let bound = extrapolate_max_channels(&fit, 65.0).unwrap();
    assert_eq!(bound, 138);
    assert!((bound - 140).abs() <= 5, "bound {bound} strays from the published figure");
    println!("criterion 08 PASS  slope 0.4706 at threshold 65 bounds {bound} channels (reference 140 +/- 5)");
}

#[test]
fn criterion_09_stack_formats_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = seeded_rng(909);

    for case in 0..20 {
        let h = rng.random_range(3..=10usize);
        let w = rng.random_range(3..=10usize);
        let c = rng.random_range(1..=4usize);
        let names: Vec<String> = (0..c).map(|i| format!("ch{i:02}")).collect();
        let data: Vec<f32> = (0..h * w * c).map(|_| rng.random_range(-100.0..100.0f32)).collect();
        let stack = ChannelStack::new(h, w, names, data).unwrap();

        let p1 = dir.path().join(format!("s{case}.mcs1"));
        let p2 = dir.path().join(format!("s{case}b.mcs1"));
        save_raw(&stack, &p1).unwrap();
        let loaded = load_raw(&p1).unwrap();
        assert_eq!(loaded.height(), stack.height());
        assert_eq!(loaded.width(), stack.width());
        assert_eq!(loaded.channel_names(), stack.channel_names());
        let same_bits = loaded
            .data()
            .iter()
            .zip(stack.data())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same_bits, "case {case}: pixel bits changed across the round trip");
        save_raw(&loaded, &p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap(), "case {case}: files differ");
    }

    let gray8: Vec<u8> = (0..12u16).map(|i| ((i * 17 + 3) % 256) as u8).collect();
    let t8 = dir.path().join("g8.tif");
    fs::write(&t8, tiny_tiff(4, 3, 8, &[&gray8, &gray8.iter().map(|&v| v / 2).collect::<Vec<_>>()]))
        .unwrap();
    let s8 = import_tiff(&t8).unwrap();
    assert_eq!((s8.height(), s8.width(), s8.channel_count()), (3, 4, 2));
    for (i, &raw) in gray8.iter().enumerate() {
        assert_eq!(s8.channel(0)[i], raw as f32 / 255.0);
        assert_eq!(s8.channel(1)[i], (raw / 2) as f32 / 255.0);
    }

    let gray16: Vec<u16> = vec![0, 4096, 32768, 65535, 1, 40000];
    let bytes16: Vec<u8> = gray16.iter().flat_map(|v| v.to_le_bytes()).collect();
    let t16 = dir.path().join("g16.tif");
    fs::write(&t16, tiny_tiff(3, 2, 16, &[&bytes16])).unwrap();
    let s16 = import_tiff(&t16).unwrap();
    assert_eq!((s16.height(), s16.width(), s16.channel_count()), (2, 3, 1));
    for (i, &raw) in gray16.iter().enumerate() {
        assert_eq!(s16.channel(0)[i], raw as f32 / 65535.0);
    }

    println!("criterion 09 PASS  20 container round trips byte-identical; 8/16-bit imports scale exactly");
}

#[test]
fn criterion_10_seeded_reruns_are_byte_identical() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let ok = run_bin(dir.path(), &["synth", "--out", "input"]);
    assert!(ok.status.success(), "synth failed: {}", String::from_utf8_lossy(&ok.stderr));
    let stack = dir.path().join("input").join("stack.mcs1");
    let stack = stack.to_str().unwrap();

    for (cmd, extra) in [("analyze", &[][..]), ("experiment", &["--seeds", "0..8"][..])] {
        for (a, b, threads_a, threads_b) in [
            ("t1a", "t1b", "1", "1"),
            ("t4a", "t4b", "4", "4"),
            ("t1a", "t4a", "1", "4"),
        ] {
            for (out, threads) in [(a, threads_a), (b, threads_b)] {
                let out_dir = format!("{cmd}-{out}");
                if dir.path().join(&out_dir).exists() {
                    continue;
                }
                let mut args = vec![cmd, stack, "--threads", threads, "--out", &out_dir];
                args.extend_from_slice(extra);
                let r = run_bin(dir.path(), &args);
                assert!(
                    r.status.success(),
                    "{cmd} --threads {threads} failed: {}",
                    String::from_utf8_lossy(&r.stderr)
                );
            }
            assert_same_outputs(
                &dir.path().join(format!("{cmd}-{a}")),
                &dir.path().join(format!("{cmd}-{b}")),
            );
        }
    }

    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 120.0, "took {secs:.2} s, budget 120 s");
    println!("criterion 10 PASS  analyze and experiment byte-identical across reruns and 1 vs 4 threads, {secs:.2} s");
}

fn run_bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chansynth"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary should launch")
}

/// Byte-compares two flat output directories. The run receipt is
/// excluded: it records wall-clock timings, which honest reruns cannot
/// reproduce.
fn assert_same_outputs(a: &Path, b: &Path) {
    let list = |p: &Path| -> BTreeSet<String> {
        fs::read_dir(p)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect()
    };
    let names_a = list(a);
    assert_eq!(names_a, list(b), "output sets differ between {a:?} and {b:?}");
    assert!(names_a.len() >= 4, "suspiciously few outputs in {a:?}");
    for name in &names_a {
        if name == "manifest.json" {
            continue;
        }
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name} differs between {a:?} and {b:?}"
        );
    }
}

fn u16le(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn u32le(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn entry(out: &mut Vec<u8>, tag: u16, kind: u16, value: u32) {
    u16le(out, tag);
    u16le(out, kind);
    u32le(out, 1);
    u32le(out, value);
}

/// Minimal little-endian grayscale multi-page fixture: one strip per
/// page, `bits` of 8 or 16, pixel bytes supplied per page.
fn tiny_tiff(width: u32, height: u32, bits: u16, pages: &[&[u8]]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"II");
    u16le(&mut out, 42);
    let first_ifd_pos = out.len();
    u32le(&mut out, 0);

    let mut strip_offsets = Vec::new();
    for data in pages {
        assert_eq!(data.len() as u32, width * height * u32::from(bits / 8));
        strip_offsets.push(out.len() as u32);
        out.extend_from_slice(data);
    }

    let mut prev_link = first_ifd_pos;
    for (page, data) in pages.iter().enumerate() {
        let ifd_at = out.len() as u32;
        out[prev_link..prev_link + 4].copy_from_slice(&ifd_at.to_le_bytes());
        u16le(&mut out, 9);
        entry(&mut out, 0x100, 3, width);
        entry(&mut out, 0x101, 3, height);
        entry(&mut out, 0x102, 3, u32::from(bits));
        entry(&mut out, 0x103, 3, 1);
        entry(&mut out, 0x106, 3, 1);
        entry(&mut out, 0x111, 4, strip_offsets[page]);
        entry(&mut out, 0x115, 3, 1);
        entry(&mut out, 0x116, 4, height);
        entry(&mut out, 0x117, 4, data.len() as u32);
        prev_link = out.len();
        u32le(&mut out, 0);
    }
    out
}
