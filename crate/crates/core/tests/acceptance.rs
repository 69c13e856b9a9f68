//! Acceptance gate. Each test prints exactly one line:
//!
//!   criterion N (name): PASS — detail [12.3s]
//!
//! and fails loudly otherwise. A shared lock serializes the criteria so the
//! per-criterion runtime budgets stay honest under any test threading.

mod support;

use std::panic::AssertUnwindSafe;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use sirst_core::eval::{
    detect, eval_counts, evaluate, pd_at_fa, roc, threshold_grid, Detector,
};
use sirst_core::metrics::MetricsReport;
use sirst_core::net::{
    build_params, forward, soft_iou_loss, wiring, Attention, ForwardOptions, NetworkSpec,
    Transform, Variant,
};
use sirst_core::postproc::{label8, threshold_adaptive, Mask};
use sirst_core::synth::{
    default_size_table, generate_sample, synth_dataset, SceneKind, SynthConfig, TargetKind,
};
use sirst_core::train::{train, AugmentFlags, TrainConfig};
use sirst_core::{Graph, Image, Tensor};

use support::{
    bfs_label, brute_counts, direct_adaptive_threshold, direct_scr, expected_grid, rel_err, Lcg,
};

static GATE: Mutex<()> = Mutex::new(());

/// Runs one criterion under the gate, printing its verdict line. The body
/// returns a short detail string on success.
fn criterion(n: usize, name: &str, budget: Duration, body: impl FnOnce() -> String) {
    let _gate = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let result = std::panic::catch_unwind(AssertUnwindSafe(body));
    let elapsed = start.elapsed();
    let secs = elapsed.as_secs_f64();
    match result {
        Ok(detail) if elapsed <= budget => {
            println!("criterion {n} ({name}): PASS — {detail} [{secs:.1}s]");
        }
        Ok(detail) => {
            println!(
                "criterion {n} ({name}): FAIL — over budget ({secs:.1}s > {}s); {detail}",
                budget.as_secs()
            );
            panic!("criterion {n} exceeded its runtime budget");
        }
        Err(payload) => {
            println!("criterion {n} ({name}): FAIL [{secs:.1}s]");
            std::panic::resume_unwind(payload);
        }
    }
}

// ---------------------------------------------------------------------------
// criterion 1: analytic gradients of the full tiny network

fn grad_check_spec() -> NetworkSpec {
    NetworkSpec {
        depth: 2,
        channels: vec![4, 8, 16],
        mlp_reduction: 4,
        variant: Variant::Full,
        attention: Attention::Full,
        head_levels: vec![0, 1, 2],
        seed: 5,
    }
}

fn grad_check_input() -> (Image, Tensor) {
    // deterministic image with texture at several scales, plus a mask with
    // two small blobs so the loss sees both classes
    let img = Image::from_fn(16, 16, |y, x| {
        0.2 + 0.4 * (((y * 16 + x) % 13) as f64 / 13.0) + 0.2 * (((y * 7 + 3 * x) % 5) as f64 / 5.0)
    });
    let mut mask = vec![0.0; 256];
    for (y, x) in [(3, 4), (3, 5), (4, 4), (11, 12), (12, 12)] {
        mask[y * 16 + x] = 1.0;
    }
    (img, Tensor::new(&[1, 16, 16], mask).unwrap())
}

fn loss_value(spec: &NetworkSpec, params: &sirst_core::params::ParamSet) -> f64 {
    let w = wiring(spec).unwrap();
    let mut g = Graph::new();
    let (img, mask) = grad_check_input();
    let input = g.constant(img.to_tensor());
    let pass = forward(&mut g, spec, &w, params, input, ForwardOptions::default()).unwrap();
    let target = g.constant(mask);
    let loss = soft_iou_loss(&mut g, pass.prob, target).unwrap();
    g.value(loss).item().unwrap()
}

#[test]
fn criterion_1_gradient_oracle() {
    criterion(1, "gradient oracle", Duration::from_secs(60), || {
        const FD_STEP: f64 = 1e-5;
        const TOL: f64 = 1e-4;

        let spec = grad_check_spec();
        let (_, mut params) = build_params(&spec).unwrap();
        let w = wiring(&spec).unwrap();

        // one backward pass for every analytic gradient
        let mut g = Graph::new();
        let (img, mask) = grad_check_input();
        let input = g.constant(img.to_tensor());
        let pass = forward(&mut g, &spec, &w, &params, input, ForwardOptions::default()).unwrap();
        let target = g.constant(mask);
        let loss = soft_iou_loss(&mut g, pass.prob, target).unwrap();
        let grads = g.backward(loss).unwrap();

        let names: Vec<String> = params.iter().map(|p| p.name.clone()).collect();
        let mut checked = 0usize;
        let mut max_err = 0.0f64;
        for name in &names {
            let len = params.get(name).unwrap().value.data().len();
            let analytic = grads.get(name).expect("gradient for every parameter").clone();
            for k in 0..len {
                let orig = params.get(name).unwrap().value.data()[k];
                params.get_mut(name).unwrap().value.data_mut()[k] = orig + FD_STEP;
                let up = loss_value(&spec, &params);
                params.get_mut(name).unwrap().value.data_mut()[k] = orig - FD_STEP;
                let down = loss_value(&spec, &params);
                params.get_mut(name).unwrap().value.data_mut()[k] = orig;

                let fd = (up - down) / (2.0 * FD_STEP);
                let err = rel_err(analytic.data()[k], fd);
                assert!(
                    err < TOL,
                    "{name}[{k}]: analytic {} vs fd {fd} (rel err {err:.3e})",
                    analytic.data()[k]
                );
                max_err = max_err.max(err);
                checked += 1;
            }
        }
        format!("{} parameters, {checked} scalars, max rel err {max_err:.2e}", names.len())
    });
}

// ---------------------------------------------------------------------------
// criterion 2: node grid versus the independent enumerator

fn transform_name(t: Transform) -> &'static str {
    match t {
        Transform::Direct => "direct",
        Transform::Pooled => "pooled",
        Transform::Upsampled => "upsampled",
    }
}

fn check_grid(spec: &NetworkSpec) {
    let built = wiring(spec).unwrap();
    let expected = expected_grid(spec);
    assert_eq!(built.nodes.len(), expected.len(), "node count for {spec:?}");
    for exp in &expected {
        let node = built
            .node(exp.i, exp.j)
            .unwrap_or_else(|| panic!("missing node ({}, {})", exp.i, exp.j));
        let mut inputs: Vec<((usize, usize), &'static str)> = node
            .inputs
            .iter()
            .map(|r| (r.src, transform_name(r.transform)))
            .collect();
        inputs.sort();
        assert_eq!(inputs, exp.inputs, "inputs of ({}, {})", exp.i, exp.j);
        assert_eq!(node.in_channels, exp.in_channels, "in_channels of ({}, {})", exp.i, exp.j);
        assert_eq!(node.out_channels, exp.out_channels, "out_channels of ({}, {})", exp.i, exp.j);
        assert_eq!(node.pool_after, exp.pool_after, "pool_after of ({}, {})", exp.i, exp.j);
    }
}

#[test]
fn criterion_2_wiring_oracle() {
    criterion(2, "wiring oracle", Duration::from_secs(5), || {
        let channels = |depth: usize| -> Vec<usize> {
            (0..=depth).map(|i| 4 << i).collect()
        };
        let mut specs_checked = 0usize;

        for depth in [2usize, 3, 4] {
            let spec = NetworkSpec {
                depth,
                channels: channels(depth),
                mlp_reduction: 4,
                variant: Variant::Full,
                attention: Attention::Full,
                head_levels: (0..=depth).collect(),
                seed: 0,
            };
            let built = wiring(&spec).unwrap();
            // triangular grid: levels i hold I - i + 1 nodes each
            let count: usize = (0..=depth).map(|i| depth - i + 1).sum();
            assert_eq!(built.nodes.len(), count);
            if depth == 4 {
                assert_eq!(count, 15);
            }
            // interior fusion nodes: j dense + 1 pooled + 1 upsampled
            for node in &built.nodes {
                if node.i == 0 || node.j == 0 {
                    continue;
                }
                let dense =
                    node.inputs.iter().filter(|r| r.transform == Transform::Direct).count();
                let pooled =
                    node.inputs.iter().filter(|r| r.transform == Transform::Pooled).count();
                let upsampled =
                    node.inputs.iter().filter(|r| r.transform == Transform::Upsampled).count();
                assert_eq!(
                    (dense, pooled, upsampled),
                    (node.j, 1, 1),
                    "interior node ({}, {})",
                    node.i,
                    node.j
                );
            }
            check_grid(&spec);
            specs_checked += 1;
        }

        // every variant and the summed-fusion channel override at one depth
        for variant in
            [Variant::Full, Variant::PlainSkip, Variant::LeftToRight, Variant::TopToBottom]
        {
            for attention in [Attention::Full, Attention::SumFusion] {
                let spec = NetworkSpec {
                    depth: 3,
                    channels: vec![4, 8, 16, 32],
                    mlp_reduction: 4,
                    variant,
                    attention,
                    head_levels: vec![0, 1, 2, 3],
                    seed: 0,
                };
                check_grid(&spec);
                specs_checked += 1;
            }
        }
        format!("{specs_checked} specs compared node-for-node")
    });
}

// ---------------------------------------------------------------------------
// criterion 3: metrics versus brute force

fn random_mask(h: usize, w: usize, on_fraction: f64, rng: &mut Lcg) -> Mask {
    let mut m = Mask::zeros(h, w);
    for k in 0..h * w {
        if rng.unit() < on_fraction {
            m.data[k] = true;
        }
    }
    m
}

#[test]
fn criterion_3_metrics_oracle() {
    criterion(3, "metrics oracle", Duration::from_secs(30), || {
        let mut rng = Lcg(0x5eed_cafe);
        let mut max_components = 0usize;
        for t in 0..1000usize {
            // densities spanning empty masks to heavy clutter
            let dp = match t % 5 {
                0 => 0.0,
                1 => 0.02,
                2 => 0.08,
                3 => 0.2,
                _ => 0.35,
            };
            let dg = match (t / 5) % 4 {
                0 => 0.0,
                1 => 0.03,
                2 => 0.1,
                _ => 0.25,
            };
            let pred = random_mask(16, 16, dp, &mut rng);
            let gt = random_mask(16, 16, dg, &mut rng);
            let d_thresh = [2.0, 3.0, 4.0][t % 3];

            // clustering equivalence first: labels and counts
            for m in [&pred, &gt] {
                let lm = label8(m);
                let (labels, count) = bfs_label(m);
                assert_eq!(lm.labels, labels, "pair {t}: labels differ");
                assert_eq!(lm.count, count, "pair {t}: component count");
                max_components = max_components.max(count);
            }

            let counts = eval_counts(&pred, &gt, d_thresh).unwrap();
            let brute = brute_counts(&pred, &gt, d_thresh);
            assert_eq!(counts.intersection, brute.intersection, "pair {t}");
            assert_eq!(counts.union, brute.union, "pair {t}");
            assert_eq!(counts.t_correct, brute.t_correct, "pair {t}");
            assert_eq!(counts.t_all, brute.t_all, "pair {t}");
            assert_eq!(counts.p_false, brute.p_false, "pair {t}");
            assert_eq!(counts.p_all, brute.p_all, "pair {t}");

            // the derived ratios come from identical integers, so they must
            // agree exactly as floats
            let any_pred = pred.count() > 0;
            let report = MetricsReport::from_counts(counts, d_thresh, any_pred);
            let brute_iou = if brute.union == 0 {
                1.0
            } else {
                brute.intersection as f64 / brute.union as f64
            };
            assert_eq!(report.iou, brute_iou, "pair {t}: iou");
            if brute.t_all > 0 {
                assert!(report.pd_defined);
                assert_eq!(report.pd, brute.t_correct as f64 / brute.t_all as f64, "pair {t}: pd");
            }
            assert_eq!(report.fa, brute.p_false as f64 / brute.p_all as f64, "pair {t}: fa");
        }
        format!("1000 pairs at d_thresh 2/3/4, up to {max_components} components per mask")
    });
}

// ---------------------------------------------------------------------------
// criterion 4: synthesis contract at the default configuration

/// Component pixels of the mask grouped by label, via the BFS oracle.
fn component_pixels(mask: &Mask) -> Vec<Vec<(usize, usize)>> {
    let (labels, count) = bfs_label(mask);
    let mut groups = vec![Vec::new(); count];
    for y in 0..mask.h {
        for x in 0..mask.w {
            let l = labels[y * mask.w + x];
            if l > 0 {
                groups[l as usize - 1].push((y, x));
            }
        }
    }
    groups
}

fn assert_dirs_identical(a: &std::path::Path, b: &std::path::Path) {
    let list = |d: &std::path::Path| -> Vec<String> {
        let mut v: Vec<String> = std::fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        v.sort();
        v
    };
    let names = list(a);
    assert_eq!(names, list(b), "{} vs {}", a.display(), b.display());
    for name in names {
        let (pa, pb) = (a.join(&name), b.join(&name));
        if pa.is_dir() {
            assert_dirs_identical(&pa, &pb);
        } else {
            assert_eq!(
                std::fs::read(&pa).unwrap(),
                std::fs::read(&pb).unwrap(),
                "{} differs",
                pa.display()
            );
        }
    }
}

#[test]
fn criterion_4_synthesis_contract() {
    criterion(4, "synthesis contract", Duration::from_secs(120), || {
        let config = SynthConfig::default();
        let bound = config.spie_area_bound();

        let mut total_targets = 0usize;
        let mut unclipped = 0usize;
        let mut scr_ok = 0usize;
        let mut spie_ok = 0usize;

        for index in 0..config.count {
            let s = generate_sample(&config, index).unwrap();
            let groups = component_pixels(&s.mask);
            assert_eq!(
                groups.len(),
                s.meta.targets.len(),
                "sample {index}: one mask component per target"
            );
            for t in &s.meta.targets {
                total_targets += 1;
                // join the recorded target to its mask component by centroid
                let (gi, pixels) = groups
                    .iter()
                    .enumerate()
                    .min_by(|(_, a), (_, b)| {
                        let da = centroid_dev(a, t.centroid);
                        let db = centroid_dev(b, t.centroid);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                assert!(
                    centroid_dev(pixels, t.centroid) < 1e-9,
                    "sample {index}: component {gi} centroid off"
                );
                assert_eq!(pixels.len(), t.area, "sample {index}: area mismatch");

                if (pixels.len() as f64) < bound {
                    spie_ok += 1;
                }
                if t.clipped {
                    continue;
                }
                unclipped += 1;

                // background ring rebuilt from scratch: the box around the
                // recorded bbox, minus every labeled pixel in the mask
                let (y0, x0, y1, x1) = t.bbox;
                let ry0 = y0.saturating_sub(config.ring_width);
                let rx0 = x0.saturating_sub(config.ring_width);
                let ry1 = (y1 + config.ring_width).min(s.mask.h - 1);
                let rx1 = (x1 + config.ring_width).min(s.mask.w - 1);
                let mut ring = Vec::new();
                for y in ry0..=ry1 {
                    for x in rx0..=rx1 {
                        if !s.mask.at(y, x) {
                            ring.push((y, x));
                        }
                    }
                }
                let measured = direct_scr(&s.composite, pixels, &ring);
                if (measured - t.scr_requested).abs() / t.scr_requested <= 0.05 {
                    scr_ok += 1;
                }
            }
        }

        let scr_fraction = scr_ok as f64 / unclipped as f64;
        let spie_fraction = spie_ok as f64 / total_targets as f64;
        assert!(
            scr_fraction >= 0.95,
            "scr within 5% for {scr_ok}/{unclipped} = {scr_fraction:.3}"
        );
        assert!(
            spie_fraction >= 0.96,
            "area bound met for {spie_ok}/{total_targets} = {spie_fraction:.3}"
        );

        // same seed, two full dataset writes, byte-for-byte equality
        let tmp = tempfile::tempdir().unwrap();
        let (d1, d2) = (tmp.path().join("a"), tmp.path().join("b"));
        synth_dataset(&config, &d1, false).unwrap();
        synth_dataset(&config, &d2, false).unwrap();
        assert_dirs_identical(&d1, &d2);

        format!(
            "{total_targets} targets: scr ok {scr_fraction:.1}% of {unclipped} unclipped, \
             area bound {spie_fraction:.1}%, regeneration byte-identical",
        )
    });
}

fn centroid_dev(pixels: &[(usize, usize)], centroid: (f64, f64)) -> f64 {
    let n = pixels.len() as f64;
    let cy = pixels.iter().map(|&(y, _)| y as f64).sum::<f64>() / n;
    let cx = pixels.iter().map(|&(_, x)| x as f64).sum::<f64>() / n;
    ((cy - centroid.0).powi(2) + (cx - centroid.1).powi(2)).sqrt()
}

// ---------------------------------------------------------------------------
// toy task shared by criteria 5 and 6

fn toy_synth(seed: u64, count: usize) -> SynthConfig {
    let table: Vec<_> = default_size_table()
        .into_iter()
        .map(|(scene, entries)| {
            let kept: Vec<_> =
                entries.into_iter().filter(|e| e.kind != TargetKind::Extended).collect();
            let total: f64 = kept.iter().map(|e| e.weight).sum();
            let renorm: Vec<_> = kept
                .into_iter()
                .map(|mut e| {
                    e.weight /= total;
                    e
                })
                .collect();
            (scene, renorm)
        })
        .collect();
    SynthConfig {
        count,
        height: 64,
        width: 64,
        scr_values: vec![3.0, 5.0],
        blur_sigmas: vec![0.2, 0.5],
        count_weights: vec![(1, 0.7), (2, 0.3)],
        scenes: SceneKind::ALL.to_vec(),
        size_table: table,
        ring_width: 6,
        seed,
    }
}

fn toy_dataset(seed: u64, count: usize) -> Vec<(Image, Mask)> {
    let cfg = toy_synth(seed, count);
    (0..count)
        .map(|i| {
            let s = generate_sample(&cfg, i).unwrap();
            (s.image, s.mask)
        })
        .collect()
}

fn toy_spec(variant: Variant, seed: u64) -> NetworkSpec {
    NetworkSpec {
        depth: 3,
        channels: vec![8, 16, 32, 64],
        mlp_reduction: 4,
        variant,
        attention: Attention::Full,
        head_levels: vec![0, 1, 2, 3],
        seed,
    }
}

fn toy_train_config(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: 0.05,
        batch_size: 8,
        epochs,
        augment: AugmentFlags::ALL,
        seed,
        checkpoint_every: 0,
    }
}

fn net_masks(det: &Detector, data: &[(Image, Mask)]) -> (Vec<Mask>, Vec<Mask>) {
    let preds: Vec<Mask> = data.iter().map(|(img, _)| detect(det, img).unwrap().mask).collect();
    let gts: Vec<Mask> = data.iter().map(|(_, m)| m.clone()).collect();
    (preds, gts)
}

// ---------------------------------------------------------------------------
// criterion 5: toy end-to-end run

#[test]
fn criterion_5_toy_end_to_end() {
    criterion(5, "toy end-to-end", Duration::from_secs(900), || {
        let train_data = toy_dataset(100, 200);
        let test_data = toy_dataset(200, 50);

        let spec = toy_spec(Variant::Full, 7);
        // 200 samples at batch 8 give 25 steps per epoch; 20 epochs = 500
        let tc = toy_train_config(20, 0);
        let outcome = train(&train_data, &spec, &tc, None, None).unwrap();
        assert!(outcome.final_step <= 500, "step budget");

        let net = Detector::Net {
            spec,
            wiring: outcome.wiring,
            params: outcome.params,
            normalize: true,
        };
        let (preds, gts) = net_masks(&net, &test_data);
        let report = evaluate(&preds, &gts, 3.0).unwrap();
        assert!(report.iou >= 0.50, "iou {:.4}", report.iou);
        assert!(report.pd_defined && report.pd >= 0.90, "pd {:.4}", report.pd);
        assert!(report.fa <= 1e-3, "fa {:.3e}", report.fa);

        // the classic filter must not reach the network's detection rate
        // anywhere at or below the network's false-alarm rate
        let tophat = Detector::TopHat { window: 9 };
        let maps: Vec<Image> =
            test_data.iter().map(|(img, _)| tophat.prob_map(img).unwrap()).collect();
        let points = roc(&maps, &gts, &threshold_grid(41), 3.0).unwrap();
        let tophat_pd = pd_at_fa(&points, report.fa);
        match tophat_pd {
            Some(pd) => assert!(
                report.pd > pd,
                "tophat pd {pd:.4} at fa <= {:.3e} vs net pd {:.4}",
                report.fa,
                report.pd
            ),
            None => {} // no tophat operating point reaches the net's fa
        }

        format!(
            "iou {:.3}, pd {:.3}, fa {:.2e} over 50 held-out images; tophat pd at matched fa {}",
            report.iou,
            report.pd,
            report.fa,
            tophat_pd.map(|p| format!("{p:.3}")).unwrap_or_else(|| "unreachable".into())
        )
    });
}

// ---------------------------------------------------------------------------
// criterion 6: nesting ablation direction over seeds

#[test]
fn criterion_6_ablation_direction() {
    criterion(6, "ablation direction", Duration::from_secs(1800), || {
        let train_data = toy_dataset(100, 200);
        let test_data = toy_dataset(200, 50);

        let mean = |variant: Variant| -> f64 {
            let mut total = 0.0;
            for k in 0..3u64 {
                let spec = toy_spec(variant, 11 + k);
                let tc = toy_train_config(6, k);
                let outcome = train(&train_data, &spec, &tc, None, None).unwrap();
                let det = Detector::Net {
                    spec,
                    wiring: outcome.wiring,
                    params: outcome.params,
                    normalize: true,
                };
                let (preds, gts) = net_masks(&det, &test_data);
                total += evaluate(&preds, &gts, 3.0).unwrap().iou;
            }
            total / 3.0
        };

        let full = mean(Variant::Full);
        let plain = mean(Variant::PlainSkip);
        assert!(
            full >= plain,
            "mean iou over 3 seeds: full {full:.4} < plain skip {plain:.4}"
        );
        format!("mean iou over 3 seeds: full {full:.3} >= plain skip {plain:.3}")
    });
}

// ---------------------------------------------------------------------------
// criterion 7: adaptive threshold versus the direct formula

#[test]
fn criterion_7_adaptive_threshold() {
    criterion(7, "adaptive threshold", Duration::from_secs(5), || {
        let mut rng = Lcg(0xad_a9_71);
        let mut checked = 0usize;
        for t in 0..10_000usize {
            let h = 1 + rng.below(24);
            let w = 1 + rng.below(24);
            let img = match t % 7 {
                // flats and spiked flats exercise both arms of the max
                0 => Image::full(h, w, rng.unit()),
                1 => {
                    let mut img = Image::full(h, w, 0.1);
                    let k = rng.below(h * w);
                    img.data[k] = 0.95;
                    img
                }
                _ => Image::from_fn(h, w, |_, _| rng.unit()),
            };
            let (mask, t_lib) = threshold_adaptive(&img);
            let t_direct = direct_adaptive_threshold(&img);
            assert!(
                t_lib == t_direct,
                "map {t} ({h}x{w}): {t_lib} vs {t_direct}, abs err {:e}",
                (t_lib - t_direct).abs()
            );
            // and the mask is exactly the strict cut at that threshold
            for y in 0..h {
                for x in 0..w {
                    assert_eq!(mask.at(y, x), img.at(y, x) > t_lib, "map {t} at ({y}, {x})");
                }
            }
            checked += 1;
        }
        format!("{checked} maps, max abs err 0")
    });
}

// ---------------------------------------------------------------------------
// criterion 8: matching threshold sweep monotonicity

#[test]
fn criterion_8_deviation_sweep() {
    criterion(8, "deviation sweep", Duration::from_secs(60), || {
        let mut rng = Lcg(0xd5_ee_b);
        let mut pairs = 0usize;
        for t in 0..300usize {
            let dp = [0.01, 0.05, 0.15][t % 3];
            let dg = [0.02, 0.08, 0.2][(t / 3) % 3];
            let pred = random_mask(32, 32, dp, &mut rng);
            let gt = random_mask(32, 32, dg, &mut rng);

            let reports: Vec<MetricsReport> = [2.0, 3.0, 4.0]
                .iter()
                .map(|&d| evaluate(&[pred.clone()], &[gt.clone()], d).unwrap())
                .collect();
            for pair in reports.windows(2) {
                if pair[0].pd_defined {
                    assert!(
                        pair[1].pd >= pair[0].pd,
                        "pair {t}: pd fell from {} to {}",
                        pair[0].pd,
                        pair[1].pd
                    );
                }
                assert!(
                    pair[1].fa <= pair[0].fa,
                    "pair {t}: fa rose from {} to {}",
                    pair[0].fa,
                    pair[1].fa
                );
            }
            pairs += 1;
        }
        format!("{pairs} detection sets swept over d_thresh 2/3/4")
    });
}
