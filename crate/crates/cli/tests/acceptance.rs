//! Acceptance suite. Each test prints one `PASS`/`FAIL` line per criterion
//! and fails if any of its criteria fail.
//!
//! Criteria 1-3 and 8 run with the default `cargo test`. The training
//! criteria (4-7) take minutes to hours on one core and are ignored by
//! default:
//!
//! ```text
//! cargo test -p sigt-cli --test acceptance -- --ignored --nocapture --test-threads 1
//! ```

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigt_cli::experiment::{run, DataCache, Experiment, RunOutcome};
use sigt_cli::settings::Settings;
use sigt_models::sigt::SigT;
use sigt_models::{tokenize, Aggregation, CsiNetConfig, FcDnnConfig, LstmConfig, Model, ModelConfig, SigTConfig};
use sigt_phy::{
    bit_errors, ls_estimate, ChannelEstimate, ChannelPool, ChannelRealization, ClassicReceiver, DatasetSpec,
    Detector, FrameConfig, LinkSimulator,
};
use sigt_tensor::gradcheck::{check_inputs, check_params, GradCheckOptions};
use sigt_tensor::{multi_head_attention, Mode, ParamStore, PoolKind, Tape, Tensor, TensorError, Var};
use sigt_train::{train, Batches, RunConfig};

struct Verdicts {
    failed: Vec<String>,
}

impl Verdicts {
    fn new() -> Self {
        Self { failed: Vec::new() }
    }

    fn record(&mut self, id: &str, pass: bool, detail: String) {
        println!("{} criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(id.to_string());
        }
    }

    fn finish(self) {
        assert!(self.failed.is_empty(), "failed criteria: {:?}", self.failed);
    }
}

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape.to_vec(), |_| rng.random_range(-1.0..1.0))
}

fn mini_frame() -> FrameConfig {
    FrameConfig::miniature()
}

// ---------------------------------------------------------------- 1

type OpFn = Box<dyn Fn(&Tape, &[Var]) -> sigt_tensor::Result<Var>>;

fn op_cases(rng: &mut ChaCha8Rng) -> Vec<(&'static str, Vec<Tensor>, OpFn, Mode)> {
    let mut v: Vec<(&'static str, Vec<Tensor>, OpFn, Mode)> = Vec::new();
    let e = Mode::Eval;
    v.push(("matmul", vec![random(&[3, 4], rng), random(&[4, 2], rng)], Box::new(|t, v| t.matmul(v[0], v[1])), e));
    for (a_t, b_t) in [(false, false), (true, false), (false, true), (true, true)] {
        let sa = if a_t { [2, 4, 3] } else { [2, 3, 4] };
        let sb = if b_t { [2, 5, 4] } else { [2, 4, 5] };
        v.push((
            "bmm",
            vec![random(&sa, rng), random(&sb, rng)],
            Box::new(move |t, v| t.bmm(v[0], v[1], a_t, b_t)),
            e,
        ));
    }
    let ab = vec![random(&[2, 3, 4], rng), random(&[4], rng)];
    v.push(("add", ab.clone(), Box::new(|t, v| t.add(v[0], v[1])), e));
    v.push(("sub", ab.clone(), Box::new(|t, v| t.sub(v[0], v[1])), e));
    v.push(("mul", ab, Box::new(|t, v| t.mul(v[0], v[1])), e));
    let x = random(&[3, 5], rng);
    v.push(("relu", vec![x.clone()], Box::new(|t, v| Ok(t.relu(v[0]))), e));
    v.push(("sigmoid", vec![x.clone()], Box::new(|t, v| Ok(t.sigmoid(v[0]))), e));
    v.push(("tanh", vec![x.clone()], Box::new(|t, v| Ok(t.tanh(v[0]))), e));
    v.push(("softmax", vec![x.clone()], Box::new(|t, v| t.softmax(v[0], 1)), e));
    v.push(("layer_norm", vec![x.clone()], Box::new(|t, v| t.layer_norm(v[0], 1e-5)), e));
    let y = random(&[2, 3, 4], rng);
    v.push(("reshape", vec![y.clone()], Box::new(|t, v| t.reshape(v[0], &[6, 4])), e));
    v.push(("permute", vec![y.clone()], Box::new(|t, v| t.permute(v[0], &[2, 0, 1])), e));
    v.push(("transpose", vec![x.clone()], Box::new(|t, v| t.transpose(v[0])), e));
    v.push(("concat", vec![y.clone(), random(&[2, 2, 4], rng)], Box::new(|t, v| t.concat(&[v[0], v[1]], 1)), e));
    v.push(("narrow", vec![y.clone()], Box::new(|t, v| t.narrow(v[0], 2, 1, 2)), e));
    v.push(("sum_axis", vec![y.clone()], Box::new(|t, v| t.sum_axis(v[0], 1)), e));
    v.push(("mean", vec![y.clone()], Box::new(|t, v| Ok(t.mean(v[0]))), e));
    let tok = random(&[2, 8, 3], rng);
    v.push(("avg_pool", vec![tok.clone()], Box::new(|t, v| t.pool_tokens(v[0], 4, PoolKind::Avg)), e));
    v.push(("max_pool", vec![tok.clone()], Box::new(|t, v| t.pool_tokens(v[0], 4, PoolKind::Max)), e));
    v.push((
        "conv1d",
        vec![tok, random(&[12, 3], rng)],
        Box::new(|t, v| {
            let u = t.unfold1d(v[0], 4, 4)?;
            let flat = t.reshape(u, &[4, 12])?;
            t.matmul(flat, v[1])
        }),
        e,
    ));
    v.push((
        "conv2d",
        vec![random(&[1, 4, 3, 2], rng), random(&[18, 2], rng)],
        Box::new(|t, v| {
            let u = t.unfold2d(v[0], 3, 3)?;
            let flat = t.reshape(u, &[12, 18])?;
            t.matmul(flat, v[1])
        }),
        e,
    ));
    v.push(("dropout", vec![x], Box::new(|t, v| t.dropout(v[0], 0.3)), Mode::Train));
    let d = 4;
    v.push((
        "attention",
        vec![
            random(&[2, 3, d], rng),
            random(&[d, d], rng),
            random(&[d, d], rng),
            random(&[d, d], rng),
            random(&[d, d], rng),
        ],
        Box::new(|t, v| multi_head_attention(t, v[0], v[1], v[2], v[3], v[4], 2)),
        e,
    ));
    v
}

fn model_max_err(config: ModelConfig, frame: &FrameConfig, mode: Mode) -> f64 {
    let mut model = Model::new(config, *frame, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let y = Tensor::from_fn(
        vec![3, frame.n_subcarriers, frame.n_rx, frame.n_info, 2],
        |_| rng.random_range(-1.5..1.5),
    );
    let x = Tensor::from_fn(vec![3, frame.n_subcarriers, frame.n_tx, 2], |_| {
        f64::from(rng.random_range(0..=1u8))
    });
    let mut store = model.params_mut().clone();
    let opts = GradCheckOptions {
        retry_step: Some(1e-6),
        max_coords: 40,
        mode,
        seed: 7,
        ..GradCheckOptions::default()
    };
    check_params(
        &mut store,
        |tape, store| {
            let out = model
                .forward_with(tape, store, tape.constant(y.clone()))
                .map_err(|e| TensorError::InvalidArgument {
                    op: "forward",
                    msg: e.to_string(),
                })?;
            let d = tape.sub(out, tape.constant(x.clone()))?;
            Ok(tape.mean(tape.mul(d, d)?))
        },
        &opts,
    )
    .unwrap()
    .max_rel_err()
}

#[test]
fn criterion_1_gradient_integrity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: (f64, String) = (0.0, String::new());
    for (name, inputs, f, mode) in op_cases(&mut rng) {
        let opts = GradCheckOptions {
            mode,
            seed: 3,
            ..GradCheckOptions::default()
        };
        let err = check_inputs(
            &inputs,
            |t, v| {
                let out = f(t, v)?;
                let w = t.constant(random(&t.shape(out), &mut ChaCha8Rng::seed_from_u64(99)));
                Ok(t.sum(t.mul(out, w)?))
            },
            &opts,
        )
        .unwrap()
        .max_rel_err();
        if err >= worst.0 {
            worst = (err, name.to_string());
        }
    }
    let frame = mini_frame();
    let small = SigTConfig {
        depth: 2,
        heads: 2,
        d_model: 8,
        d_ff: 12,
        aggregation: Aggregation::Conv,
        dropout_p: 0.0,
        mlp_hidden: 10,
    };
    let models = [
        ("sigt", ModelConfig::SigT(small), Mode::Eval),
        (
            "sigt-avg",
            ModelConfig::SigT(SigTConfig {
                aggregation: Aggregation::Pool(PoolKind::Avg),
                ..small
            }),
            Mode::Eval,
        ),
        ("sigt-dropout", ModelConfig::SigT(SigTConfig { dropout_p: 0.3, ..small }), Mode::Train),
        ("fcdnn", ModelConfig::FcDnn(FcDnnConfig::default()), Mode::Eval),
        ("csinet", ModelConfig::CsiNet(CsiNetConfig::default()), Mode::Eval),
        (
            "lstm",
            ModelConfig::Lstm(LstmConfig {
                d_model: 8,
                mlp_hidden: 10,
                ..LstmConfig::default()
            }),
            Mode::Eval,
        ),
    ];
    for (name, config, mode) in models {
        let err = model_max_err(config, &frame, mode);
        if err >= worst.0 {
            worst = (err, name.to_string());
        }
    }
    let elapsed = start.elapsed();
    let mut v = Verdicts::new();
    v.record(
        "1",
        worst.0 < 1e-4 && elapsed < Duration::from_secs(120),
        format!(
            "gradient checks on all ops and models: max rel err {:.2e} ({}) < 1e-4, {:.1}s < 120s",
            worst.0,
            worst.1,
            elapsed.as_secs_f64()
        ),
    );
    v.finish();
}

// ---------------------------------------------------------------- 2

/// Gaussian tail probability.
fn q(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

#[test]
fn criterion_2_phy_oracle() {
    let start = Instant::now();
    let cfg = FrameConfig::default();
    let sim = LinkSimulator::new(cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let pool = ChannelPool::generate(&cfg, 50, &mut rng);
    let rx = ClassicReceiver::new(Detector::ZeroForcing);
    let ones = vec![vec![Complex64::new(1.0, 0.0); cfg.n_subcarriers]; cfg.n_tx];
    let (mut err_perfect, mut err_ls, mut total) = (0, 0, 0);
    for f in 0..1000 {
        let chan = pool.get(f % pool.len());
        let pilots = sim.pilot_grids(chan, Complex64::new(1.0, 0.0), f64::INFINITY, &mut rng).unwrap();
        let ls = ls_estimate(&pilots, &ones, cfg.n_rx).unwrap();
        let perfect = ChannelEstimate::perfect(chan, cfg.n_subcarriers);
        let bits: Vec<u8> = (0..cfg.x_len()).map(|_| rng.random_range(0..=1u8)).collect();
        let y = sim.simulate(&bits, chan, f64::INFINITY, &mut rng).unwrap();
        err_perfect += bit_errors(&rx.decode(&cfg, &y, &perfect, 0.0).unwrap(), &bits);
        err_ls += bit_errors(&rx.decode(&cfg, &y, &ls, 0.0).unwrap(), &bits);
        total += bits.len();
    }

    let awgn = FrameConfig {
        n_subcarriers: 256,
        n_tx: 1,
        n_rx: 1,
        n_taps: 1,
        ..FrameConfig::default()
    };
    let sim1 = LinkSimulator::new(awgn).unwrap();
    let chan = ChannelRealization::identity(1, 1);
    let est = ChannelEstimate::perfect(&chan, 256);
    let (mut errors, mut n_bits) = (0usize, 0usize);
    while n_bits < 1_000_000 {
        let bits: Vec<u8> = (0..awgn.x_len()).map(|_| rng.random_range(0..=1u8)).collect();
        let y = sim1.simulate(&bits, &chan, 10.0, &mut rng).unwrap();
        errors += bit_errors(&rx.decode(&awgn, &y, &est, 0.1).unwrap(), &bits);
        n_bits += bits.len();
    }
    let ber = errors as f64 / n_bits as f64;
    let theory = q(10f64.sqrt());
    let elapsed = start.elapsed();
    let mut v = Verdicts::new();
    v.record(
        "2",
        err_perfect == 0 && err_ls == 0 && (ber / theory - 1.0).abs() < 0.10 && elapsed < Duration::from_secs(120),
        format!(
            "noiseless BER over 1000 frames ({total} bits): perfect {err_perfect}, LS {err_ls} errors; \
             AWGN 10 dB BER {ber:.3e} vs Q(sqrt 10) {theory:.3e} ({:+.1}%, limit 10%); {:.1}s < 120s",
            100.0 * (ber / theory - 1.0),
            elapsed.as_secs_f64()
        ),
    );
    v.finish();
}

// ---------------------------------------------------------------- 3

#[test]
fn criterion_3_attention_invariants() {
    let start = Instant::now();
    let cases = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let (mut softmax_err, mut identity_err, mut equiv_err) = (0f64, 0f64, 0f64);
    for case in 0..cases {
        // softmax rows sum to one
        let (r, c) = (rng.random_range(1..6), rng.random_range(1..9));
        let scale = rng.random_range(0.1..50.0);
        let x = Tensor::from_fn(vec![r, c], |_| rng.random_range(-scale..scale));
        let tape = Tape::new();
        let s = tape.value(tape.softmax(tape.constant(x), 1).unwrap());
        for row in s.data().chunks(c) {
            softmax_err = softmax_err.max((row.iter().sum::<f64>() - 1.0).abs());
        }

        // one token attends only to itself: output = its value projection
        let d = 2 * rng.random_range(1..4);
        let ws: Vec<Tensor> = (0..3).map(|_| random(&[d, d], &mut rng)).collect();
        let tok = random(&[1, d], &mut rng);
        let tape = Tape::new();
        let eye = Tensor::from_fn(vec![d, d], |i| if i / d == i % d { 1.0 } else { 0.0 });
        let vs: Vec<Var> = ws.iter().map(|w| tape.constant(w.clone())).collect();
        let out = multi_head_attention(&tape, tape.constant(tok.clone()), vs[0], vs[1], vs[2], tape.constant(eye), 2)
            .unwrap();
        let expect = tape.value(tape.matmul(tape.constant(tok), vs[2]).unwrap());
        identity_err = identity_err.max(tape.value(out).max_abs_diff(&expect));

        // encoder stack commutes with any permutation of the antenna tokens
        let n_rx = rng.random_range(2..8);
        let frame = FrameConfig {
            n_rx,
            n_tx: 1,
            ..mini_frame()
        };
        let config = SigTConfig {
            depth: 2,
            heads: 2,
            d_model: 8,
            d_ff: 12,
            aggregation: Aggregation::Conv,
            dropout_p: 0.0,
            mlp_hidden: 10,
        };
        let mut store = ParamStore::new();
        let net = SigT::new(&mut store, config, &frame, &mut ChaCha8Rng::seed_from_u64(case));
        let y = Tensor::from_fn(vec![2, frame.n_subcarriers, n_rx, frame.n_info, 2], |_| {
            rng.random_range(-1.5..1.5)
        });
        let mut perm: Vec<usize> = (0..n_rx).collect();
        for i in (1..n_rx).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let tape = Tape::new();
        let tokens = tokenize(&tape, tape.constant(y)).unwrap();
        let t = tape.value(tokens);
        let w = t.shape()[2];
        let permuted = Tensor::from_fn(t.shape().to_vec(), |i| {
            let (b, r, c) = (i / (n_rx * w), (i / w) % n_rx, i % w);
            t.at(&[b, perm[r], c])
        });
        let f = tape.value(net.encode(&tape, &store, tokens).unwrap());
        let g = tape.value(net.encode(&tape, &store, tape.constant(permuted)).unwrap());
        for b in 0..2 {
            for r in 0..n_rx {
                for c in 0..8 {
                    equiv_err = equiv_err.max((g.at(&[b, r, c]) - f.at(&[b, perm[r], c])).abs());
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let mut v = Verdicts::new();
    v.record(
        "3",
        softmax_err <= 1e-12 && identity_err <= 1e-12 && equiv_err <= 1e-12 && elapsed < Duration::from_secs(60),
        format!(
            "{cases} random cases each: softmax sum err {softmax_err:.1e}, single-token err {identity_err:.1e}, \
             encoder permutation err {equiv_err:.1e} (all <= 1e-12); {:.1}s < 60s",
            elapsed.as_secs_f64()
        ),
    );
    v.finish();
}

// ---------------------------------------------------------------- 4

#[test]
#[ignore = "trains the full-size model; several minutes"]
fn criterion_4_overfit_smoke_test() {
    let start = Instant::now();
    let frame = FrameConfig::default();
    let spec = DatasetSpec {
        cfg: frame,
        pool_size: 1,
        n_train: 64,
        n_test: 64,
        snr_db: f64::INFINITY,
        seed: 4,
    };
    let data = sigt_phy::generate_dataset(&spec).unwrap();
    let (tr, te) = (Batches::from_dataset(&data.train), Batches::from_dataset(&data.test));
    let mut model = Model::new(ModelConfig::SigT(SigTConfig::default()), frame, 4).unwrap();
    let cfg = RunConfig {
        epochs: 300,
        seed: 4,
        stop_at_train_aacc: Some(0.99),
        eval_batch: 64,
        ..RunConfig::default()
    };
    let report = train(&mut model, &tr, &te, &cfg, |m| {
        if m.epoch % 10 == 0 {
            println!("  epoch {:>3} loss {:.5} train {:.4} ({:.0}s)", m.epoch, m.train_loss, m.train_aacc, m.seconds);
        }
    })
    .unwrap();
    let last = report.metrics.last().unwrap();
    let elapsed = start.elapsed();
    let mut v = Verdicts::new();
    v.record(
        "4",
        last.train_aacc >= 0.99 && elapsed < Duration::from_secs(15 * 60),
        format!(
            "default SigT on 64 noiseless single-channel samples: train AACC {:.4} >= 0.99 at epoch {} (<= 300); \
             {:.0}s < 900s",
            last.train_aacc,
            last.epoch,
            elapsed.as_secs_f64()
        ),
    );
    v.finish();
}

// ---------------------------------------------------------------- 5-7

/// Desk-scale setup: 50-channel pool, 4096/512 samples at 10 dB on a
/// 4-subcarrier, 2x16 antenna frame, with width-reduced networks.
fn desk_settings(extra: &[(&str, &str)]) -> Settings {
    let mut s = Settings::default();
    for (k, v) in [
        ("ns", "4"),
        ("nt", "2"),
        ("nr", "16"),
        ("pool", "50"),
        ("train", "4096"),
        ("test", "512"),
        ("snr", "10"),
        ("batch", "64"),
        ("epochs", "200"),
        ("heads", "4"),
        ("d_model", "32"),
        ("d_ff", "64"),
        ("mlp_hidden", "128"),
        ("fc_hidden", "256,128,64"),
    ] {
        s.set(k, v);
    }
    for (k, v) in extra {
        s.set(k, v);
    }
    s
}

const SEEDS: [u64; 3] = [0, 1, 2];

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[(xs.len() - 1) / 2]
}

/// Runs a configuration at every seed; returns (median best test AACC,
/// median final test AACC).
fn desk_runs(label: &str, extra: &[(&str, &str)], cache: &mut DataCache) -> (f64, f64) {
    let (mut best, mut last) = (Vec::new(), Vec::new());
    for seed in SEEDS {
        let mut s = desk_settings(extra);
        s.set("seed", seed);
        let (exp, data) = Experiment::resolve(&s, cache).unwrap();
        let t = Instant::now();
        let out: RunOutcome = run(&exp, &data, |_| {}).unwrap();
        println!(
            "  {label:<10} seed {seed}: best test {:.4} (epoch {}), final test {:.4}, train {:.4}, {:.0}s",
            out.best.test_aacc,
            out.best_epoch,
            out.final_test_aacc,
            out.epochs.last().unwrap().train_aacc,
            t.elapsed().as_secs_f64()
        );
        best.push(out.best.test_aacc);
        last.push(out.final_test_aacc);
    }
    (median(best), median(last))
}

#[test]
#[ignore = "desk-scale training of six configurations at three seeds; hours"]
fn criteria_5_6_desk_scale_learning_and_orderings() {
    let mut cache = DataCache::default();
    let start = Instant::now();
    let (sigt, sigt_final) = desk_runs("sigt", &[], &mut cache);
    let sigt_time = start.elapsed();
    let (pool, _) = desk_runs("sigt-avg", &[("agg", "avg")], &mut cache);
    let (_, sgd_final) = desk_runs("sigt-sgd", &[("opt", "sgd")], &mut cache);
    let (fc, _) = desk_runs("fcdnn", &[("model", "fcdnn")], &mut cache);
    let (csi, _) = desk_runs("csinet", &[("model", "csinet")], &mut cache);
    let (lstm, _) = desk_runs("lstm", &[("model", "lstm")], &mut cache);

    let mut v = Verdicts::new();
    v.record(
        "5",
        sigt >= 0.60 && sigt_time < Duration::from_secs(2 * 3600),
        format!(
            "SigT median test AACC {sigt:.4} >= 0.60 within 200 epochs; {:.0}s < 7200s",
            sigt_time.as_secs_f64()
        ),
    );
    v.record(
        "6a",
        sigt - fc >= 0.02 && sigt - csi >= 0.02,
        format!(
            "SigT {sigt:.4} vs FC-DNN {fc:.4} ({:+.2} pt) and CSINet {csi:.4} ({:+.2} pt), need >= +2 pt",
            100.0 * (sigt - fc),
            100.0 * (sigt - csi)
        ),
    );
    v.record("6b", sigt >= pool, format!("conv aggregation {sigt:.4} >= avg pooling {pool:.4}"));
    v.record(
        "6c",
        sigt_final > sgd_final,
        format!("final test AACC after 200 epochs: Adam {sigt_final:.4} > SGD {sgd_final:.4}"),
    );
    v.record(
        "6d",
        (lstm - 0.5).abs() <= 0.05,
        format!("LSTM backbone test AACC {lstm:.4} within 0.05 of chance"),
    );
    v.finish();
}

#[test]
#[ignore = "dataset-size sweep at three seeds; hours"]
fn criterion_7_dataset_size_trend() {
    let mut cache = DataCache::default();
    let nbs = [10usize, 50, 100, 200];
    let mut medians = Vec::new();
    for nb in nbs {
        let nb_s = nb.to_string();
        let (m, _) = desk_runs(&format!("nb={nb}"), &[("nb", &nb_s)], &mut cache);
        medians.push(m);
    }
    let ok = medians.windows(2).all(|w| w[1] >= w[0] - 0.01);
    let mut v = Verdicts::new();
    v.record(
        "7",
        ok,
        format!(
            "median test AACC over NB {:?}: {:?}, non-decreasing within 1 pt",
            nbs,
            medians.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>()
        ),
    );
    v.finish();
}

// ---------------------------------------------------------------- 8

fn sigt(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_sigt")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn criterion_8_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name);
    let small = [
        "--ns", "8", "--nt", "2", "--nr", "4", "--train", "96", "--test", "32", "--pool", "5", "--seed", "3",
    ];
    let model = [
        "--d-model", "8", "--d-ff", "16", "--heads", "2", "--mlp-hidden", "16", "--batch", "16", "--epochs", "3",
        "--dropout", "0.2", "-q",
    ];
    let mut checks = Vec::new();

    for name in ["g1", "g2"] {
        let p = d(name);
        let mut a = vec!["generate", "--out", p.to_str().unwrap()];
        a.extend(small);
        assert_eq!(sigt(&a).0, 0);
    }
    let same_files = ["train.sigt", "test.sigt", "manifest.txt"]
        .iter()
        .all(|f| read(&d("g1").join(f)) == read(&d("g2").join(f)));
    checks.push(("generate", same_files));

    let mut stdouts = Vec::new();
    for name in ["t1", "t2"] {
        let p = d(name);
        let mut a = vec!["train", "--out", p.to_str().unwrap()];
        a.extend(small);
        a.extend(model);
        let (code, out) = sigt(&a);
        assert_eq!(code, 0);
        stdouts.push(out);
    }
    let same_train = ["metrics.csv", "summary.csv", "model.sgtc"]
        .iter()
        .all(|f| read(&d("t1").join(f)) == read(&d("t2").join(f)))
        && stdouts[0] == stdouts[1];
    checks.push(("train", same_train));

    let mut a = vec!["sweep", "--axis", "dropout", "--values", "0.2", "--seeds", "1"];
    a.extend(small);
    a.extend(model);
    let (code, sweep_out) = sigt(&a);
    assert_eq!(code, 0);
    checks.push(("sweep == train summary", sweep_out == stdouts[0]));

    let mut a = vec!["sweep", "--axis", "model", "--values", "csinet,classic", "--seeds", "2"];
    a.extend(small);
    a.extend(model);
    let runs: Vec<_> = (0..2).map(|_| sigt(&a)).collect();
    checks.push(("sweep", runs[0].0 == 0 && runs[0] == runs[1]));

    let ck = d("t1").join("model.sgtc");
    let mut a = vec!["eval", "--checkpoint", ck.to_str().unwrap()];
    a.extend(small);
    checks.push(("eval", sigt(&a) == sigt(&a)));

    let mut v = Verdicts::new();
    v.record(
        "8",
        checks.iter().all(|c| c.1),
        format!(
            "byte-identical reruns: {}",
            checks
                .iter()
                .map(|(n, ok)| format!("{n} {}", if *ok { "same" } else { "DIFFERENT" }))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
    v.finish();
}
