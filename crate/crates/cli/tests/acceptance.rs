//! Acceptance suite: ten numbered criteria, one test each, run in order by
//! the sequential test harness. Every test prints one summary line with the
//! measured values and asserts its own wall-clock budget. Criteria 6-8 share
//! one full-scale pipeline run (5000 series of length 1024, default config)
//! built lazily into a temp directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use aee_core::autoencoder::{AEConfig, AEModel, ConvBlock, Normalization, load_model, save_model};
use aee_core::datagen::{generate_corpus, GeneratorConfig};
use aee_core::ensemble::{aggregate, AeeConfig, ExplanationSet, ScalingBounds};
use aee_core::explain::{
    exact_shapley, exact_shapley_from_table, lrp, lrp_unit_relevance, masked_replacement,
    sampled_kernel_shap, Explanation, ExplainerSettings, LimeConfig, LrpConfig, Method,
    Segmentation, ShapConfig, ShapMode, Target,
};
use aee_core::latent::{dbscan, ClusterLabel};
use aee_core::nn::{mse, mse_grad, ActivationFn, LayerSpec, Mode, Network, Padding, Tensor};
use aee_core::quality::{evaluate, QmConfig, QmReport};
use aee_core::seed::rng_from;
use aee_core::series::{Label, TimeSeries};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_aee")
}

/// Runs one subcommand against `dir` (cwd and --out-dir both inside it) and
/// panics with full output on failure.
fn run_cmd(dir: &Path, args: &[&str]) -> String {
    let out = Command::new(bin())
        .current_dir(dir)
        .arg("--out-dir")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "command {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn median(values: &mut Vec<f64>) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

// ---------------------------------------------------------------- criterion 1

/// Loss of `net` on fixed (input, target), with the dropout stream pinned so
/// repeated evaluations see identical masks.
fn net_loss(net: &Network, x: &Tensor, target: &Tensor, eval_seed: u64) -> f64 {
    let mut rng = rng_from(eval_seed);
    let trace = net.forward_trace(x, Mode::Train, Some(&mut rng)).unwrap();
    mse(trace.output().unwrap(), target).unwrap()
}

/// Max relative error between analytic and central-difference gradients over
/// every parameter and every input coordinate.
fn max_grad_error(net: &mut Network, x: &Tensor, target: &Tensor, eval_seed: u64) -> f64 {
    const H: f64 = 1e-5;
    let mut rng = rng_from(eval_seed);
    let trace = net.forward_trace(x, Mode::Train, Some(&mut rng)).unwrap();
    let upstream = mse_grad(trace.output().unwrap(), target).unwrap();
    let (dx, param_grads) = net.backward(&trace, &upstream).unwrap();
    let analytic = net.flatten_grads(&param_grads).unwrap();

    let rel = |fd: f64, an: f64| (fd - an).abs() / fd.abs().max(an.abs()).max(1.0);
    let mut worst = 0.0f64;

    let base = net.export_params();
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + H;
        net.import_params(&p).unwrap();
        let up = net_loss(net, x, target, eval_seed);
        p[i] = base[i] - H;
        net.import_params(&p).unwrap();
        let down = net_loss(net, x, target, eval_seed);
        worst = worst.max(rel((up - down) / (2.0 * H), analytic[i]));
    }
    net.import_params(&base).unwrap();

    for i in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[i] += H;
        let up = net_loss(net, &xp, target, eval_seed);
        let mut xm = x.clone();
        xm.data_mut()[i] -= H;
        let down = net_loss(net, &xm, target, eval_seed);
        worst = worst.max(rel((up - down) / (2.0 * H), dx.data()[i]));
    }
    worst
}

#[test]
fn c01_gradients_match_central_differences_for_every_layer_type() {
    let started = Instant::now();
    let mut kinds_seen: BTreeSet<&str> = BTreeSet::new();
    let mut worst = 0.0f64;
    let configs = 120usize;

    for i in 0..configs {
        let seed = 9_000 + i as u64;
        let mut rng = rng_from(seed);
        let l = *[12usize, 16, 20, 24].choose(&mut rng).unwrap();
        let filters = rng.gen_range(1..=4);
        let kernel = rng.gen_range(2..=5);
        let units = rng.gen_range(1..=6);

        // Six rotating templates; between them every layer kind appears.
        let (in_shape, mut specs): (Vec<usize>, Vec<LayerSpec>) = match i % 6 {
            0 => (
                vec![1, l],
                vec![
                    LayerSpec::Conv1d {
                        in_channels: 1,
                        filters,
                        kernel_size: kernel,
                        stride: 1,
                        padding: Padding::Same,
                    },
                    LayerSpec::Activation { function: ActivationFn::Relu },
                    LayerSpec::MaxPool1d { pool_size: 2 },
                    LayerSpec::Flatten,
                ],
            ),
            1 => (
                vec![2, l],
                vec![
                    LayerSpec::Conv1d {
                        in_channels: 2,
                        filters,
                        kernel_size: kernel,
                        stride: 2,
                        padding: Padding::Valid,
                    },
                    LayerSpec::Activation { function: ActivationFn::Sigmoid },
                    LayerSpec::Flatten,
                ],
            ),
            2 => (vec![1, l], vec![LayerSpec::Flatten]),
            3 => (
                vec![1, l],
                vec![
                    LayerSpec::Reshape { channels: 2, length: l / 2 },
                    LayerSpec::Upsample1d { factor: 2 },
                    LayerSpec::Conv1d {
                        in_channels: 2,
                        filters,
                        kernel_size: kernel,
                        stride: 1,
                        padding: Padding::Same,
                    },
                    LayerSpec::Activation { function: ActivationFn::Linear },
                    LayerSpec::Flatten,
                ],
            ),
            4 => (
                vec![1, l],
                vec![
                    LayerSpec::Conv1d {
                        in_channels: 1,
                        filters,
                        kernel_size: kernel,
                        stride: 1,
                        padding: Padding::Same,
                    },
                    LayerSpec::Activation { function: ActivationFn::Relu },
                    LayerSpec::Dropout { rate: 0.3 },
                    LayerSpec::Flatten,
                ],
            ),
            _ => (
                vec![1, l],
                vec![
                    LayerSpec::Conv1d {
                        in_channels: 1,
                        filters,
                        kernel_size: kernel,
                        stride: 1,
                        padding: Padding::Valid,
                    },
                    LayerSpec::MaxPool1d { pool_size: 3 },
                    LayerSpec::Activation { function: ActivationFn::Relu },
                    LayerSpec::Flatten,
                ],
            ),
        };

        // Probe the flattened width, then rebuild with a dense head from the
        // same init stream so the prefix parameters are identical.
        let x_data: Vec<f64> =
            (0..in_shape.iter().product::<usize>()).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let x = Tensor::from_vec(in_shape, x_data).unwrap();
        let probe = Network::from_specs(&specs, &mut rng_from(seed)).unwrap();
        let width = probe.forward(&x).unwrap().len();
        specs.push(LayerSpec::Dense { in_dim: width, units });
        specs.push(LayerSpec::Activation {
            function: if i % 2 == 0 { ActivationFn::Sigmoid } else { ActivationFn::Linear },
        });
        let mut net = Network::from_specs(&specs, &mut rng_from(seed)).unwrap();

        for spec in &specs {
            kinds_seen.insert(match spec {
                LayerSpec::Conv1d { .. } => "conv1d",
                LayerSpec::MaxPool1d { .. } => "max_pool1d",
                LayerSpec::Dense { .. } => "dense",
                LayerSpec::Activation { .. } => "activation",
                LayerSpec::Dropout { .. } => "dropout",
                LayerSpec::Flatten => "flatten",
                LayerSpec::Upsample1d { .. } => "upsample1d",
                LayerSpec::Reshape { .. } => "reshape",
            });
        }

        let out_len = net_probe_len(&net, &x, seed);
        let target_data: Vec<f64> = (0..out_len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let target = Tensor::vector(&target_data);
        worst = worst.max(max_grad_error(&mut net, &x, &target, seed + 1));
    }

    assert_eq!(kinds_seen.len(), 8, "layer kinds covered: {kinds_seen:?}");
    assert!(worst <= 1e-5, "max relative gradient error {worst:.2e} > 1e-5");
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 60.0, "gradient check took {secs:.1}s (budget 60s)");
    println!(
        "criterion 01 PASS: {configs} configs over {} layer kinds, max relative error {worst:.2e}, {secs:.1}s",
        kinds_seen.len()
    );
}

fn net_probe_len(net: &Network, x: &Tensor, eval_seed: u64) -> usize {
    let mut rng = rng_from(eval_seed + 1);
    net.forward_trace(x, Mode::Train, Some(&mut rng)).unwrap().output().unwrap().len()
}

// ---------------------------------------------------------------- criterion 2

/// Toy encoder: conv block + flatten + linear dense bottleneck, untrained
/// but deterministic from the seed. Decoder left empty (unused here).
fn toy_encoder(seed: u64, length: usize, latent_dim: usize) -> AEModel {
    let cfg = AEConfig {
        input_length: length,
        latent_dim,
        conv_blocks: vec![ConvBlock { filters: 3, kernel_size: 5, dropout: None, pool: true }],
        dense_units: Vec::new(),
        activation: ActivationFn::Relu,
        ..AEConfig::default()
    };
    let mut rng = rng_from(seed);
    let encoder = Network::from_specs(&cfg.encoder_specs().unwrap(), &mut rng).unwrap();
    AEModel::from_parts(encoder, Network { layers: Vec::new() }, length, latent_dim, Normalization::None)
        .unwrap()
}

#[test]
fn c02_shapley_axioms_exact_and_sampled_agreement() {
    let started = Instant::now();
    let m = 8usize;

    // Efficiency on random value tables.
    let mut worst_eff = 0.0f64;
    for seed in 0..10u64 {
        let mut rng = rng_from(200 + seed);
        let table: Vec<f64> = (0..1usize << m).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let phi = exact_shapley_from_table(m, &table).unwrap();
        let eff = (phi.iter().sum::<f64>() - (table[(1 << m) - 1] - table[0])).abs();
        worst_eff = worst_eff.max(eff);
    }
    assert!(worst_eff <= 1e-9, "efficiency residual {worst_eff:.2e} > 1e-9");

    // Symmetry and null player on a constructed game: players 3 and 4 carry
    // identical weights and a shared interaction; player 2 never matters.
    let w = [0.7, -1.3, 0.0, 2.1, 2.1, -0.4, 1.1, 0.55];
    let v = |mask: &[bool]| -> f64 {
        let s: f64 = mask.iter().zip(&w).filter(|(on, _)| **on).map(|(_, wk)| wk).sum();
        let pair = if mask[3] && mask[4] { 1.5 } else { 0.0 };
        s + 0.8 * s * s + pair
    };
    let phi = exact_shapley(m, v).unwrap();
    assert!(phi[2].abs() <= 1e-9, "null player got {:.2e}", phi[2]);
    assert!((phi[3] - phi[4]).abs() <= 1e-9, "symmetric pair differs by {:.2e}", phi[3] - phi[4]);

    // Sampled KernelSHAP vs exact enumeration on toy-encoder value functions.
    let mut worst_delta = 0.0f64;
    for seed in 0..3u64 {
        let model = toy_encoder(300 + seed, 64, 2);
        let mut rng = rng_from(400 + seed);
        let values: Vec<f64> = (0..64).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let seg = Segmentation::equal(64, m).unwrap();
        let value_fn = |mask: &[bool]| -> f64 {
            let masked = masked_replacement(&values, &seg, mask).unwrap();
            model.encode_values(&masked).unwrap().iter().sum()
        };
        let exact = exact_shapley(m, value_fn).unwrap();
        let sampled = sampled_kernel_shap(m, value_fn, 2048, 777 + seed).unwrap();
        let delta = exact
            .iter()
            .zip(&sampled)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        worst_delta = worst_delta.max(delta);
    }
    assert!(worst_delta <= 5e-2, "sampled vs exact max |delta| {worst_delta:.3} > 0.05");

    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 120.0, "shapley checks took {secs:.1}s (budget 120s)");
    println!(
        "criterion 02 PASS: axioms within 1e-9 (worst efficiency {worst_eff:.1e}), sampled n=2048 max |delta| {worst_delta:.3}, {secs:.1}s"
    );
}

// ---------------------------------------------------------------- criterion 3

#[test]
fn c03_lrp_conserves_relevance_and_zero_input_gives_zero() {
    let started = Instant::now();
    let config = LrpConfig { epsilon: 1e-6 };
    let mut worst_leak = 0.0f64;
    let mut units_checked = 0usize;

    for seed in 0..20u64 {
        let mut rng = rng_from(500 + seed);
        let length = *[32usize, 48, 64].choose(&mut rng).unwrap();
        let latent_dim = rng.gen_range(1..=3);
        let blocks = rng.gen_range(1..=2);
        let conv_blocks: Vec<ConvBlock> = (0..blocks)
            .map(|_| ConvBlock {
                filters: rng.gen_range(2..=4),
                kernel_size: rng.gen_range(3..=7),
                dropout: None,
                pool: rng.gen_bool(0.7),
            })
            .collect();
        let dense_units = if rng.gen_bool(0.4) { vec![rng.gen_range(6..=12)] } else { Vec::new() };
        let cfg = AEConfig {
            input_length: length,
            latent_dim,
            conv_blocks,
            dense_units,
            activation: ActivationFn::Relu,
            ..AEConfig::default()
        };
        let encoder = Network::from_specs(&cfg.encoder_specs().unwrap(), &mut rng).unwrap();
        let mut model = AEModel::from_parts(
            encoder,
            Network { layers: Vec::new() },
            length,
            latent_dim,
            Normalization::None,
        )
        .unwrap();
        // He init leaves biases at zero; shift every parameter a little so
        // conservation is tested with nonzero biases absorbing relevance.
        let mut params = model.encoder.export_params();
        for p in params.iter_mut() {
            *p += rng.gen_range(-0.05..0.05);
        }
        model.encoder.import_params(&params).unwrap();

        let values: Vec<f64> = (0..length).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let latent = model.encode_values(&values).unwrap();
        for (unit, &z) in latent.iter().enumerate() {
            if z.abs() < 1e-6 {
                continue;
            }
            let relevance = lrp_unit_relevance(&model, &values, unit, &config).unwrap();
            let leak = (relevance.iter().sum::<f64>() - z).abs() / z.abs();
            worst_leak = worst_leak.max(leak);
            units_checked += 1;
        }

        // Zero input: every epsilon-rule numerator carries the input value,
        // so relevance must be exactly zero end to end.
        let zero_series =
            TimeSeries { id: format!("z{seed}"), values: vec![0.0; length], label: None };
        let explained = lrp(&model, &zero_series, Target::Combined, &config).unwrap();
        assert!(
            explained.values.iter().all(|v| *v == 0.0),
            "zero input produced nonzero relevance (seed {seed})"
        );
    }

    assert!(units_checked >= 20, "only {units_checked} latent units had usable output");
    assert!(worst_leak <= 0.05, "relevance leak {worst_leak:.4} > 5%");
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 60.0, "lrp checks took {secs:.1}s (budget 60s)");
    println!(
        "criterion 03 PASS: 20 encoders, {units_checked} units, worst leak {:.2}%, zero input exactly zero, {secs:.1}s",
        worst_leak * 100.0
    );
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn c04_ensemble_algebra_properties_hold_on_random_cases() {
    let started = Instant::now();
    let mut rng = rng_from(4_400);
    let all_methods = [Method::Gradcam, Method::Lime, Method::Shap, Method::Lrp];
    let cases = 1_000usize;
    let mut degenerate_cases = 0usize;

    for case in 0..cases {
        let length = rng.gen_range(4..=48);
        let mut methods = all_methods.to_vec();
        methods.shuffle(&mut rng);
        methods.truncate(rng.gen_range(2..=4));

        let bounds = if rng.gen_bool(0.8) {
            ScalingBounds::default()
        } else {
            let a_min = rng.gen_range(-2.0..1.0);
            ScalingBounds { a_min, a_max: a_min + rng.gen_range(0.1..3.0) }
        };
        let constant_case = case % 20 == 0;

        let mut explanations = Vec::new();
        for (k, &method) in methods.iter().enumerate() {
            let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
            let values: Vec<f64> = if constant_case && k == 0 {
                vec![rng.gen_range(-1.0..1.0); length]
            } else {
                (0..length).map(|_| rng.gen_range(-scale..scale)).collect()
            };
            explanations.push(Explanation::new("case", method, Target::Combined, values).unwrap());
        }
        let weights = if rng.gen_bool(0.3) {
            Some(
                methods
                    .iter()
                    .map(|&m| (m, rng.gen_range(0.1..4.0)))
                    .collect::<BTreeMap<_, _>>(),
            )
        } else {
            None
        };

        let set = ExplanationSet::from_explanations(explanations.clone()).unwrap();
        let agg = aggregate(&set, &bounds, weights.as_ref()).unwrap();

        // Bounds.
        for &v in &agg.values {
            assert!(
                v >= bounds.a_min - 1e-12 && v <= bounds.a_max + 1e-12,
                "case {case}: value {v} outside [{}, {}]",
                bounds.a_min,
                bounds.a_max
            );
        }

        // Permutation invariance: insertion order cannot matter.
        let mut shuffled = explanations.clone();
        shuffled.reverse();
        let set2 = ExplanationSet::from_explanations(shuffled).unwrap();
        let agg2 = aggregate(&set2, &bounds, weights.as_ref()).unwrap();
        assert_eq!(agg.values, agg2.values, "case {case}: insertion order changed the output");

        // Positive-affine invariance of any one non-constant method.
        if !constant_case {
            let idx = rng.gen_range(0..explanations.len());
            let a = rng.gen_range(0.1..5.0);
            let b = rng.gen_range(-3.0..3.0);
            let mut transformed = explanations.clone();
            let tv: Vec<f64> = transformed[idx].values.iter().map(|v| a * v + b).collect();
            transformed[idx] =
                Explanation::new("case", transformed[idx].method, Target::Combined, tv).unwrap();
            let set3 = ExplanationSet::from_explanations(transformed).unwrap();
            let agg3 = aggregate(&set3, &bounds, weights.as_ref()).unwrap();
            for (x, y) in agg.values.iter().zip(&agg3.values) {
                assert!(
                    (x - y).abs() <= 1e-9,
                    "case {case}: affine transform moved output by {:.2e}",
                    (x - y).abs()
                );
            }
        } else {
            // Degenerate constant heatmap: flagged, and its contribution is
            // pinned at a_min (checked through the recomputation below).
            assert!(
                agg.degenerate_methods.contains(&methods[0]),
                "case {case}: constant explanation not flagged"
            );
            degenerate_cases += 1;
        }

        // Pointwise recomputation of scale-then-weighted-mean.
        let total: f64 = methods
            .iter()
            .map(|m| weights.as_ref().map_or(1.0, |w| w[m]))
            .sum();
        for t in 0..length {
            let mut expect = 0.0;
            for &m in &methods {
                let e = set.get(m).unwrap();
                let w = weights.as_ref().map_or(1.0, |w| w[&m]) / total;
                let scaled = aee_core::ensemble::scale(&e.values, &bounds).unwrap();
                expect += w * scaled.values[t];
            }
            assert!(
                (expect - agg.values[t]).abs() <= 1e-9,
                "case {case}: recomputed value differs at step {t}"
            );
        }
    }

    assert!(degenerate_cases >= 50);
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 30.0, "ensemble property run took {secs:.1}s (budget 30s)");
    println!(
        "criterion 04 PASS: {cases} random cases ({degenerate_cases} degenerate), bounds/permutation/affine/recompute all hold, {secs:.1}s"
    );
}

// ---------------------------------------------------------------- criterion 5

struct BruteDbscan {
    core: Vec<bool>,
    /// Component id per point; None = outlier. Border points may list more
    /// than one reachable component.
    reachable: Vec<BTreeSet<usize>>,
    components: usize,
}

/// Textbook O(n^2) reference: explicit neighbor sets, connected components
/// over core points, border points marked with every component they touch.
fn brute_dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> BruteDbscan {
    let n = points.len();
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| dist(&points[i], &points[j]) <= eps).collect())
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut comp = vec![usize::MAX; n];
    let mut components = 0;
    for i in 0..n {
        if !core[i] || comp[i] != usize::MAX {
            continue;
        }
        let mut queue = vec![i];
        comp[i] = components;
        while let Some(p) = queue.pop() {
            for &q in &neighbors[p] {
                if core[q] && comp[q] == usize::MAX {
                    comp[q] = components;
                    queue.push(q);
                }
            }
        }
        components += 1;
    }

    let reachable: Vec<BTreeSet<usize>> = (0..n)
        .map(|i| {
            if core[i] {
                BTreeSet::from([comp[i]])
            } else {
                neighbors[i].iter().filter(|&&j| core[j]).map(|&j| comp[j]).collect()
            }
        })
        .collect();
    BruteDbscan { core, reachable, components }
}

#[test]
fn c05_dbscan_matches_bruteforce_reference_up_to_renaming() {
    let started = Instant::now();
    let mut ambiguous_borders = 0usize;

    for set_idx in 0..50u64 {
        let mut rng = rng_from(5_000 + set_idx);
        let blobs = 1 + (set_idx as usize) % 4;
        let centers: Vec<[f64; 3]> = (0..blobs)
            .map(|_| [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)])
            .collect();
        let noise = rng.gen_range(10..=40);
        let spread = rng.gen_range(0.15..0.5);
        let mut points: Vec<Vec<f64>> = Vec::with_capacity(200);
        for k in 0..(200 - noise) {
            let c = centers[k % blobs];
            points.push(vec![
                c[0] + rng.gen_range(-spread..spread),
                c[1] + rng.gen_range(-spread..spread),
                c[2] + rng.gen_range(-spread..spread),
            ]);
        }
        for _ in 0..noise {
            points.push(vec![
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-4.0..4.0),
            ]);
        }
        let eps = rng.gen_range(0.3..0.8);
        let min_pts = rng.gen_range(3..=8);

        let ours = dbscan(&points, eps, min_pts).unwrap();
        let brute = brute_dbscan(&points, eps, min_pts);

        assert_eq!(ours.core, brute.core, "set {set_idx}: core flags differ");
        assert_eq!(
            ours.cluster_count, brute.components,
            "set {set_idx}: cluster count differs"
        );

        // Cluster ids must map 1:1 onto brute components; border points must
        // land in a component they are reachable from.
        let mut rename: BTreeMap<usize, usize> = BTreeMap::new();
        for i in 0..points.len() {
            match ours.labels[i] {
                ClusterLabel::Outlier => {
                    assert!(
                        brute.reachable[i].is_empty(),
                        "set {set_idx}: point {i} flagged outlier but reachable from {:?}",
                        brute.reachable[i]
                    );
                }
                ClusterLabel::Cluster(c) => {
                    assert!(
                        !brute.reachable[i].is_empty(),
                        "set {set_idx}: point {i} clustered but brute says outlier"
                    );
                    if brute.reachable[i].len() > 1 {
                        ambiguous_borders += 1;
                        continue;
                    }
                    let comp = *brute.reachable[i].iter().next().unwrap();
                    match rename.get(&c) {
                        Some(&mapped) => assert_eq!(
                            mapped, comp,
                            "set {set_idx}: cluster {c} maps to two brute components"
                        ),
                        None => {
                            rename.insert(c, comp);
                        }
                    }
                }
            }
        }
        let images: BTreeSet<usize> = rename.values().copied().collect();
        assert_eq!(images.len(), rename.len(), "set {set_idx}: renaming not injective");
    }

    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 60.0, "dbscan oracle run took {secs:.1}s (budget 60s)");
    println!(
        "criterion 05 PASS: 50 sets x 200 points match the O(n^2) reference up to renaming ({ambiguous_borders} multi-reachable border points), {secs:.1}s"
    );
}

// ------------------------------------------------------- shared full pipeline

struct FullRun {
    dir: tempfile::TempDir,
    detect_secs: f64,
    detection: serde_json::Value,
    qm_lock: Mutex<Option<(f64, QmReport)>>,
}

static FULL_RUN: OnceLock<FullRun> = OnceLock::new();

/// One full-scale run of the default pipeline (the shipped defaults ARE the
/// acceptance configuration): gen + train + detect, timed end to end.
fn full_run() -> &'static FullRun {
    FULL_RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let started = Instant::now();
        run_cmd(dir.path(), &["gen"]);
        run_cmd(dir.path(), &["train"]);
        run_cmd(dir.path(), &["detect"]);
        let detect_secs = started.elapsed().as_secs_f64();
        let report = fs::read_to_string(dir.path().join("out/detection_report.json")).unwrap();
        FullRun {
            dir,
            detect_secs,
            detection: serde_json::from_str(&report).unwrap(),
            qm_lock: Mutex::new(None),
        }
    })
}

/// QM stage over Grad-CAM, SHAP, and the ensemble on the full run, cached so
/// criteria 7 and 8 share one invocation.
fn full_qm(run: &'static FullRun) -> (f64, QmReport) {
    let mut guard = run.qm_lock.lock().unwrap();
    if guard.is_none() {
        let started = Instant::now();
        run_cmd(
            run.dir.path(),
            &["qm", "--method", "gradcam", "--method", "shap", "--method", "aee"],
        );
        let secs = started.elapsed().as_secs_f64();
        let text = fs::read_to_string(run.dir.path().join("out/qm_report.json")).unwrap();
        *guard = Some((secs, serde_json::from_str(&text).unwrap()));
    }
    guard.clone().unwrap()
}

#[test]
fn c06_corpus_detection_reaches_f1_targets_within_budget() {
    let run = full_run();
    let metrics = &run.detection["metrics"];
    let nok_f1 = metrics["NOK"]["f1-score"].as_f64().unwrap();
    let ok_f1 = metrics["OK"]["f1-score"].as_f64().unwrap();
    assert!(nok_f1 >= 0.70, "NOK f1 {nok_f1:.4} < 0.70");
    assert!(ok_f1 >= 0.99, "OK f1 {ok_f1:.4} < 0.99");
    assert!(
        run.detect_secs <= 900.0,
        "gen+train+detect took {:.0}s (budget 900s)",
        run.detect_secs
    );
    println!(
        "criterion 06 PASS: NOK f1 {nok_f1:.4} (>= 0.70), OK f1 {ok_f1:.4} (>= 0.99), gen+train+detect {:.0}s (<= 900s)",
        run.detect_secs
    );
}

#[test]
fn c07_explanation_guided_perturbation_separates_from_random() {
    let run = full_run();
    let (secs, report) = full_qm(run);
    assert!(secs <= 600.0, "qm stage took {secs:.0}s (budget 600s)");

    let mut line = String::new();
    let mut aee_rate = 0.0;
    let mut base_rates: Vec<(Method, f64)> = Vec::new();
    for method in [Method::Gradcam, Method::Shap, Method::Aee] {
        let nok: Vec<_> = report
            .results
            .iter()
            .filter(|r| r.method == method && r.label == Label::Nok)
            .collect();
        assert!(!nok.is_empty(), "no NOK results for {method}");
        let mut xai: Vec<f64> = nok.iter().map(|r| r.d_xai).collect();
        let mut random: Vec<f64> = nok.iter().map(|r| r.d_random).collect();
        let med_xai = median(&mut xai);
        let med_random = median(&mut random);
        assert!(
            med_xai > med_random,
            "{method}: median d_xai {med_xai:.5} <= median d_random {med_random:.5}"
        );
        let rate = nok.iter().filter(|r| r.ordering_satisfied).count() as f64 / nok.len() as f64;
        assert!(rate >= 0.70, "{method}: ordering rate {rate:.3} < 0.70");
        if method == Method::Aee {
            aee_rate = rate;
        } else {
            base_rates.push((method, rate));
        }
        line.push_str(&format!("{method} rate {rate:.2} med {med_xai:.4}>{med_random:.4}; "));
    }
    for (method, rate) in base_rates {
        assert!(
            aee_rate >= rate - 0.05,
            "aee ordering rate {aee_rate:.3} more than 5pp below {method} ({rate:.3})"
        );
    }
    println!("criterion 07 PASS: {line}qm stage {secs:.0}s (<= 600s)");
}

#[test]
fn c08_self_distance_is_exactly_zero() {
    // Full-scale report: every instance, every evaluated method.
    let run = full_run();
    let (_, report) = full_qm(run);
    for r in &report.results {
        assert!(
            r.d_self == 0.0,
            "d_self = {:e} for {} / {}",
            r.d_self,
            r.series_id,
            r.method
        );
    }

    // Library-level pass over all five methods on a small labeled corpus.
    let gen = GeneratorConfig {
        length: 64,
        size: 12,
        nok_rate: 0.25,
        master_seed: 808,
        ..GeneratorConfig::default()
    };
    let (dataset, _) = generate_corpus(&gen).unwrap();
    let model = toy_encoder(909, 64, 2);
    let settings = ExplainerSettings {
        lime: LimeConfig { segments: 8, samples: 32, ..LimeConfig::default() },
        shap: ShapConfig { segments: 8, mode: ShapMode::Sampled { samples: 64 }, seed: 3 },
        lrp: LrpConfig::default(),
        aee: AeeConfig::default(),
    };
    let config = QmConfig { trials: 2, ok_sample: Some(3), master_seed: 11, ..QmConfig::default() };
    let methods =
        [Method::Gradcam, Method::Lime, Method::Shap, Method::Lrp, Method::Aee];
    let small = evaluate(&model, &dataset, &methods, &settings, &config).unwrap();
    assert!(!small.results.is_empty());
    for r in &small.results {
        assert!(r.d_self == 0.0, "d_self = {:e} for {} / {}", r.d_self, r.series_id, r.method);
    }
    println!(
        "criterion 08 PASS: d_self identically 0.0 on {} full-scale and {} small-corpus results across all methods",
        report.results.len(),
        small.results.len()
    );
}

// ---------------------------------------------------------------- criterion 9

const SMALL_CONFIG: &str = r#"
master_seed = 20260814

[generator]
length = 64
size = 40
nok_rate = 0.1

[autoencoder]
input_length = 64
latent_dim = 2
conv_blocks = [{ filters = 4, kernel_size = 5 }]

[autoencoder.training]
epochs = 4
batch_size = 8

[dbscan]
min_pts = 3

[explainer.lime]
segments = 8
samples = 32

[explainer.shap]
segments = 8
mode = { kind = "sampled", samples = 64 }

[qm]
methods = ["gradcam", "lrp"]
trials = 2
ok_sample = 3
"#;

/// All files under `dir`, relative, skipping the manifests tree (manifests
/// record wall-clock timings and are exempt from byte identity).
fn artifact_files(dir: &Path) -> Vec<PathBuf> {
    fn walk(root: &Path, current: &Path, out: &mut Vec<PathBuf>) {
        for entry in fs::read_dir(current).unwrap() {
            let path = entry.unwrap().path();
            let rel = path.strip_prefix(root).unwrap().to_path_buf();
            if path.is_dir() {
                if rel == Path::new("manifests") {
                    continue;
                }
                walk(root, &path, out);
            } else {
                out.push(rel);
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

fn run_small_pipeline(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join("pipeline.toml"), SMALL_CONFIG).unwrap();
    for args in [
        vec!["gen"],
        vec!["train"],
        vec!["detect"],
        vec!["explain", "--method", "lime", "--ids", "s00005"],
        vec!["aee", "--ids", "s00005"],
        vec!["qm"],
        vec!["render", "--kind", "heatmap", "--id", "s00005", "--method", "lime"],
        vec!["render", "--kind", "reconstruction", "--id", "s00005"],
        vec!["render", "--kind", "scatter"],
        vec!["render", "--kind", "boxplot"],
        vec!["report"],
    ] {
        run_cmd(dir, &args);
    }
}

#[test]
fn c09_same_seed_full_runs_are_byte_identical() {
    let root = tempfile::tempdir().unwrap();
    let a = root.path().join("a");
    let b = root.path().join("b");
    run_small_pipeline(&a);
    run_small_pipeline(&b);

    let files_a = artifact_files(&a.join("out"));
    let files_b = artifact_files(&b.join("out"));
    assert_eq!(files_a, files_b, "artifact sets differ");
    assert!(files_a.len() >= 15, "only {} artifacts produced", files_a.len());

    let mut compared = 0usize;
    for rel in &files_a {
        let bytes_a = fs::read(a.join("out").join(rel)).unwrap();
        let bytes_b = fs::read(b.join("out").join(rel)).unwrap();
        assert_eq!(bytes_a, bytes_b, "artifact {} differs between runs", rel.display());
        compared += 1;
    }
    println!(
        "criterion 09 PASS: two same-seed full pipeline runs produced {compared} byte-identical artifacts"
    );
}

// --------------------------------------------------------------- criterion 10

#[test]
fn c10_model_save_load_round_trip_preserves_encodes() {
    let dir = tempfile::tempdir().unwrap();
    for k in 0..10u64 {
        let mut rng = rng_from(10_000 + k);
        let length = *[32usize, 48, 64].choose(&mut rng).unwrap();
        let latent_dim = rng.gen_range(2..=4);
        let blocks = rng.gen_range(1..=2);
        let conv_blocks: Vec<ConvBlock> = (0..blocks)
            .map(|_| ConvBlock {
                filters: rng.gen_range(3..=8),
                kernel_size: rng.gen_range(3..=9),
                dropout: None,
                pool: true,
            })
            .collect();
        let cfg = AEConfig {
            input_length: length,
            latent_dim,
            conv_blocks,
            dense_units: if rng.gen_bool(0.5) { vec![rng.gen_range(8..=16)] } else { Vec::new() },
            activation: ActivationFn::Relu,
            ..AEConfig::default()
        };
        let encoder = Network::from_specs(&cfg.encoder_specs().unwrap(), &mut rng).unwrap();
        let decoder = Network::from_specs(&cfg.decoder_specs().unwrap(), &mut rng).unwrap();
        let model = AEModel::from_parts(
            encoder,
            decoder,
            length,
            latent_dim,
            Normalization::PerSeriesMinMax,
        )
        .unwrap();

        let path = dir.path().join(format!("model_{k}.json"));
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();

        for s in 0..3 {
            let values: Vec<f64> = (0..length).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let original = model.encode_values(&values).unwrap();
            let reloaded = loaded.encode_values(&values).unwrap();
            let bits_a: Vec<u64> = original.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = reloaded.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b, "model {k}, series {s}: encode bits differ after reload");
        }
    }
    println!("criterion 10 PASS: 10 random models encode bit-identically after save/load");
}
