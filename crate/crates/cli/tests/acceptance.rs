//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Set `MOTION_STREAM_BLESS=1` to rewrite the golden protocol transcript.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use motion_stream::backend::{MotionBackend, StyleEmbedding, ToyBackend, ToyParams};
use motion_stream::experiment::{run_mode, score, synthetic_motion};
use motion_stream::latent::{blend, Latent};
use motion_stream::metrics::{
    sequence_jitter_terms, total_jitter, vae_loss, LossInputs, LossWeights,
};
use motion_stream::motion::{JointSequence, MotionSequence, TRAJ_DIMS};
use motion_stream::par;
use motion_stream::pipeline::{Mode, PipelineConfig, PipelineState};
use motion_stream_service::{serve_stream, ManualClock, Message, Service, ServiceConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn toy(seed: u64, sigma: f64) -> Arc<dyn MotionBackend> {
    let params = ToyParams {
        noise_sigma: sigma,
        ..ToyParams::default()
    };
    Arc::new(ToyBackend::new(seed, params).unwrap())
}

fn identity_end_to_end() -> Outcome {
    let started = Instant::now();
    let backend: Arc<dyn MotionBackend> =
        Arc::new(ToyBackend::identity(12, 60, 22, 1).map_err(|e| e.to_string())?);
    let input = synthetic_motion(2000, 12, 20.0, 2).unwrap();
    let cfg = PipelineConfig {
        alpha: 1.0,
        ..PipelineConfig::default()
    };
    let em =
        run_mode(&input, &backend, &cfg, &StyleEmbedding::zeros(8)).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure!(
        em.features.len() == input.len(),
        "emitted {} of {} frames",
        em.features.len(),
        input.len()
    );
    let mut worst = 0f64;
    for (t, (got, want)) in em.features.frames().zip(input.frames()).enumerate() {
        for k in 0..TRAJ_DIMS {
            ensure!(
                got[k].to_bits() == want[k].to_bits(),
                "trajectory differs at frame {t}"
            );
        }
        for (g, w) in got.iter().zip(want) {
            worst = worst.max((g - w).abs());
        }
    }
    ensure!(worst <= 1e-12, "max feature error {worst:e}");
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!(
        "max error {worst:.1e}, trajectory bit-exact, {:.2} s",
        elapsed.as_secs_f64()
    ))
}

/// `(emitted joints unchanged, recomputed history joints unchanged)`.
fn causal_run(mode: Mode, k: usize, at: usize) -> (bool, bool) {
    let backend = toy(3, 0.0);
    let cfg = PipelineConfig {
        mode,
        ..PipelineConfig::default()
    };
    let input = synthetic_motion(200, 12, 20.0, 4).unwrap();
    let mut rows: Vec<Vec<f64>> = input.frames().map(<[f64]>::to_vec).collect();
    for v in &mut rows[at][TRAJ_DIMS..] {
        *v -= 3.0;
    }
    let mutated = MotionSequence::from_rows(12, 20.0, &rows).unwrap();
    let prefix = cfg.window + (k - 1) * cfg.stride;
    let run = |seq: &MotionSequence| {
        let mut st = PipelineState::new(
            cfg.clone(),
            Arc::clone(&backend),
            StyleEmbedding::seeded(8, 5),
        )
        .unwrap();
        st.push_frames(&seq.slice(0..prefix).unwrap()).unwrap();
        assert!(at >= st.cursor() + cfg.window);
        let (emitted, produced) = (st.emitted(), st.history().1.len());
        st.push_frames(&seq.slice(prefix..seq.len()).unwrap())
            .unwrap();
        st.finish().unwrap();
        let joints = st.joints().1.slice(0..emitted).unwrap();
        let history = backend
            .features_to_joints(&st.history().1.slice(0..produced).unwrap())
            .unwrap();
        (joints, history)
    };
    let (ja, ha) = run(&input);
    let (jb, hb) = run(&mutated);
    (ja.as_flat() == jb.as_flat(), ha.as_flat() == hb.as_flat())
}

fn causality() -> Outcome {
    let mut checked = 0;
    for k in [1, 4, 12] {
        let cursor = 4 * k;
        for at in [cursor + 60, cursor + 61, cursor + 75] {
            let (emitted, history) = causal_run(Mode::Proposed, k, at);
            ensure!(
                emitted && history,
                "proposed changed earlier output (k={k}, frame {at})"
            );
            checked += 1;
        }
    }
    let (emitted, history) = causal_run(Mode::Noncausal, 5, 80);
    ensure!(emitted, "noncausal changed emitted frames");
    ensure!(
        !history,
        "negative control: noncausal mode passed the causality check"
    );
    Ok(format!(
        "{checked} perturbations bit-identical; noncausal control fails as expected"
    ))
}

fn buffer_boundedness() -> Outcome {
    let params = ToyParams {
        frame_width: 5,
        window: 8,
        tokens: 4,
        channels: 4,
        style_dim: 2,
        joint_count: 2,
        ..ToyParams::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut counts: Vec<usize> = (0..6).map(|_| rng.gen_range(1..=10_000)).collect();
    counts.push(10_000);
    for &strides in &counts {
        let cap = rng.gen_range(1..8);
        let backend: Arc<dyn MotionBackend> =
            Arc::new(ToyBackend::new(strides as u64, params.clone()).unwrap());
        let cfg = PipelineConfig {
            window: 8,
            stride: 2,
            reencode: 4,
            buffer: cap,
            retention: Some(12),
            ..PipelineConfig::default()
        };
        let input = synthetic_motion(8 + 2 * (strides - 1), 5, 20.0, 7).unwrap();
        let mut st = PipelineState::new(cfg, backend, StyleEmbedding::seeded(2, 1)).unwrap();
        let mut steady = None;
        for i in 0..input.len() / 2 {
            st.push_frames(&input.slice(2 * i..2 * i + 2).unwrap())
                .unwrap();
            let n = st.strides();
            ensure!(
                st.buffer().len() <= cap,
                "buffer {} > K={cap}",
                st.buffer().len()
            );
            ensure!(
                n < cap || st.buffer().len() == cap,
                "buffer not full after {n} strides"
            );
            if n > cap + 8 {
                let fp = st.footprint();
                ensure!(
                    *steady.get_or_insert(fp) == fp,
                    "state grew at stride {n}: {fp:?}"
                );
            }
        }
        ensure!(
            st.strides() == strides,
            "ran {} of {strides} strides",
            st.strides()
        );
    }
    Ok(format!("stride counts {counts:?}"))
}

fn blend_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for alpha in [0.0, 0.3, 0.8, 1.0] {
        for _ in 0..50 {
            let (t, c) = (rng.gen_range(1..10), rng.gen_range(1..10));
            let a: Vec<f64> = (0..t * c).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..t * c).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let fresh = Latent::from_flat(t, c, a.clone()).unwrap();
            let recent = Latent::from_flat(t, c, b.clone()).unwrap();
            let out = blend(&fresh, Some(&recent), alpha).unwrap();
            for i in 0..t * c {
                let want = alpha * a[i] + (1.0 - alpha) * b[i];
                ensure!(
                    (out.as_flat()[i] - want).abs() <= 1e-12,
                    "alpha {alpha}, element {i}"
                );
            }
            if alpha == 1.0 {
                ensure!(out == fresh, "alpha = 1 must return the fresh latent");
            }
            ensure!(
                blend(&fresh, None, alpha).unwrap() == fresh,
                "empty buffer must return the fresh latent"
            );
        }
    }
    Ok("200 random tensors over 4 alphas".into())
}

fn brute_jitter(seqs: &[JointSequence]) -> f64 {
    let (mut d, mut n) = (0.0, 0usize);
    for s in seqs {
        for t in 1..s.len().saturating_sub(1) {
            for j in 0..s.joint_count() {
                let (a, b, c) = (s.joint(t - 1, j), s.joint(t, j), s.joint(t + 1, j));
                d += (0..3)
                    .map(|k| (c[k] - 2.0 * b[k] + a[k]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                n += 1;
            }
        }
    }
    d / n as f64
}

fn jitter_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0f64;
    for _ in 0..100 {
        let joints = rng.gen_range(1..23);
        let frames = rng.gen_range(3..80);
        let data: Vec<f64> = (0..frames * joints * 3)
            .map(|_| rng.gen_range(-2.0..2.0))
            .collect();
        let seq = JointSequence::from_flat(joints, data).unwrap();
        let got = total_jitter(std::slice::from_ref(&seq)).unwrap().jitter;
        let want = brute_jitter(std::slice::from_ref(&seq));
        worst = worst.max((got - want).abs() / want);
    }
    ensure!(worst <= 1e-9, "relative error {worst:e}");
    let one = |f: &dyn Fn(f64) -> f64, n: usize| {
        let frames: Vec<Vec<[f64; 3]>> = (0..n).map(|t| vec![[f(t as f64); 3]]).collect();
        JointSequence::from_frames(1, &frames).unwrap()
    };
    let constant = total_jitter(&[one(&|_| 1.5, 10)]).unwrap().jitter;
    let ramp = total_jitter(&[one(&|t| 0.5 * t, 10)]).unwrap().jitter;
    let quad_seq = one(&|t| t * t, 4);
    let (d, n) = sequence_jitter_terms(&quad_seq);
    let quad = total_jitter(&[quad_seq]).unwrap().jitter;
    let oracle = 2.0 * (2.0 * 3f64.sqrt()) / 2.0;
    ensure!(
        constant == 0.0 && ramp == 0.0,
        "constant {constant}, ramp {ramp}"
    );
    ensure!(
        (quad - oracle).abs() <= 1e-6 && (quad - 3.4641).abs() <= 1e-4,
        "quadratic {quad}"
    );
    ensure!(n == 2 && (d - 6.9282).abs() < 1e-4, "D={d} N={n}");
    Ok(format!(
        "max relative error {worst:.1e}; quadratic fixture {quad:.6}"
    ))
}

struct Trial {
    proposed: (f64, f64),
    naive: f64,
    no_reencode: f64,
}

fn paired_trials() -> Vec<Trial> {
    let seeds: Vec<u64> = (0..20).collect();
    par::map(&seeds, |&seed| {
        let backend = toy(100 + seed, 0.1);
        let input = synthetic_motion(400, 12, 20.0, 200 + seed).unwrap();
        let style = StyleEmbedding::seeded(8, 300 + seed);
        let run = |mode| {
            let cfg = PipelineConfig {
                mode,
                ..PipelineConfig::default()
            };
            let em = run_mode(&input, &backend, &cfg, &style).unwrap();
            score(&em, mode, cfg.stride).unwrap()
        };
        let p = run(Mode::Proposed);
        Trial {
            proposed: (p.jitter, p.discontinuity),
            naive: run(Mode::Naive).jitter,
            no_reencode: run(Mode::NoReencode).discontinuity,
        }
    })
}

fn jitter_ordering(trials: &[Trial], elapsed: Duration) -> Outcome {
    let wins = trials.iter().filter(|t| t.proposed.0 < t.naive).count();
    let mean = |f: &dyn Fn(&Trial) -> f64| trials.iter().map(f).sum::<f64>() / trials.len() as f64;
    let detail = format!(
        "{wins}/20 runs; mean jitter proposed {:.4} vs naive {:.4}; {:.1} s",
        mean(&|t| t.proposed.0),
        mean(&|t| t.naive),
        elapsed.as_secs_f64()
    );
    ensure!(wins >= 19, "{detail}");
    ensure!(elapsed < Duration::from_secs(60), "{detail}");
    Ok(detail)
}

fn ablation_direction(trials: &[Trial]) -> Outcome {
    let wins = trials
        .iter()
        .filter(|t| t.no_reencode > t.proposed.1)
        .count();
    let detail = format!("no_reencode discontinuity higher in {wins}/20 runs");
    ensure!(wins >= 18, "{detail}");
    Ok(detail)
}

fn style_responsiveness() -> Outcome {
    let backend = toy(10, 0.0);
    let input = synthetic_motion(200, 12, 20.0, 11).unwrap();
    let mut report = Vec::new();
    for k in [1, 5, 20] {
        let prefix = 60 + (k - 1) * 4;
        let run = |switch: bool| {
            let mut st = PipelineState::new(
                PipelineConfig::default(),
                Arc::clone(&backend),
                StyleEmbedding::seeded(8, 1),
            )
            .unwrap();
            st.push_frames(&input.slice(0..prefix).unwrap()).unwrap();
            let boundary = st.emitted();
            if switch {
                st.set_style(StyleEmbedding::seeded(8, 2)).unwrap();
            }
            st.push_frames(&input.slice(prefix..input.len()).unwrap())
                .unwrap();
            (boundary, st.joints().1.clone())
        };
        let (boundary, base) = run(false);
        let (_, switched) = run(true);
        let first = (0..base.len()).find(|&t| base.frame(t) != switched.frame(t));
        ensure!(
            first == Some(boundary),
            "switch after stride {k}: first change at {first:?}, expected {boundary}"
        );
        report.push(boundary);
    }
    Ok(format!(
        "first changed frame equals next-stride start {report:?}"
    ))
}

fn loss() -> Outcome {
    let feat =
        MotionSequence::from_rows(4, 20.0, &[[0.0, 0.0, 0.0, 1.0], [1.0, 2.0, 3.0, 4.0]]).unwrap();
    let joints = JointSequence::from_flat(1, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
    let target = LossInputs::from_motion(&feat, &joints).unwrap();
    let pred_feat =
        MotionSequence::from_rows(4, 20.0, &[[1.0, 1.0, 1.0, 1.0], [2.0, 3.0, 4.0, 4.0]]).unwrap();
    let pred = LossInputs::from_motion(&pred_feat, &joints).unwrap();
    let w = LossWeights::default();
    let zero = vae_loss(&target, &target, &w).unwrap();
    ensure!(zero.total == 0.0, "self loss {}", zero.total);
    let l = vae_loss(&pred, &target, &w).unwrap();
    ensure!(
        l.total == 2.0 && l.traj == 1.0,
        "two-frame example gave {l:?}"
    );
    let doubled = vae_loss(&pred, &target, &w.scaled(2.0)).unwrap();
    ensure!(
        doubled.total == 2.0 * l.total,
        "doubling weights gave {}",
        doubled.total
    );
    Ok("zero at equality, two-frame example = 2.0, linear in weights".into())
}

fn throughput() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_motion-stream"))
        .args([
            "bench",
            "--frames",
            "1000",
            "--steps",
            "10",
            "--format",
            "structured",
        ])
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "bench failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let rate = report["strides_per_sec"].as_f64().unwrap_or(0.0);
    for stage in [
        "encode",
        "denoise",
        "decode",
        "causal_decode",
        "bookkeeping",
    ] {
        ensure!(
            report["stage_us_per_stride"][stage].is_number(),
            "missing stage {stage}"
        );
    }
    ensure!(rate > 100.0, "{rate:.1} strides/s");
    Ok(format!(
        "{rate:.0} strides/s at 10 steps, per-stage timings reported"
    ))
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// hello, 120 frames with a style switch after frame 80, end.
fn client_script() -> String {
    let seq = synthetic_motion(120, 12, 20.0, 12).unwrap();
    let mut lines = vec![r#"{"type":"hello","config":{"style":"neutral"}}"#.to_string()];
    for (t, f) in seq.frames().enumerate() {
        if t == 80 {
            lines.push(r#"{"type":"style","name":"heavy"}"#.into());
        }
        lines.push(
            Message::Frame {
                t: t as u64,
                values: f.to_vec(),
            }
            .to_line(),
        );
    }
    lines.push(r#"{"type":"end"}"#.into());
    lines.join("\n") + "\n"
}

fn golden_transcript() -> Outcome {
    let (client_path, server_path) = (
        golden_dir().join("session.client.ndjson"),
        golden_dir().join("session.server.ndjson"),
    );
    let bless = std::env::var_os("MOTION_STREAM_BLESS").is_some();
    if bless {
        std::fs::write(&client_path, client_script()).map_err(|e| e.to_string())?;
    }
    let script =
        std::fs::read(&client_path).map_err(|e| format!("{}: {e}", client_path.display()))?;
    let service = Service::new(
        ServiceConfig::default(),
        Arc::new(ManualClock::new(Duration::from_micros(250))),
    )
    .map_err(|e| e.to_string())?;
    let mut transcript = Vec::new();
    serve_stream(&service, script.as_slice(), &mut transcript).map_err(|e| e.to_string())?;
    if bless {
        std::fs::write(&server_path, &transcript).map_err(|e| e.to_string())?;
    }
    let golden =
        std::fs::read(&server_path).map_err(|e| format!("{}: {e}", server_path.display()))?;
    if transcript != golden {
        let line = transcript
            .split(|&b| b == b'\n')
            .zip(golden.split(|&b| b == b'\n'))
            .position(|(a, b)| a != b);
        return Err(format!(
            "transcript differs from golden (first differing line {line:?})"
        ));
    }
    let lines = golden.iter().filter(|&&b| b == b'\n').count();
    Ok(format!(
        "{lines} server lines, {} bytes, byte-identical",
        golden.len()
    ))
}

fn main() -> ExitCode {
    panic::set_hook(Box::new(|_| {}));
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut check = |name, f: &dyn Fn() -> Outcome| {
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        results.push((name, outcome));
    };
    check("identity end-to-end", &identity_end_to_end);
    check("causality bit-test", &causality);
    check("buffer boundedness", &buffer_boundedness);
    check("blend correctness", &blend_correctness);
    check("jitter oracle", &jitter_oracle);
    let started = Instant::now();
    let trials = panic::catch_unwind(paired_trials).ok();
    let elapsed = started.elapsed();
    check("jitter ordering", &|| match &trials {
        Some(t) => jitter_ordering(t, elapsed),
        None => Err("paired runs panicked".into()),
    });
    check("ablation direction", &|| match &trials {
        Some(t) => ablation_direction(t),
        None => Err("paired runs panicked".into()),
    });
    check("style responsiveness", &style_responsiveness);
    check("vae loss", &loss);
    check("throughput", &throughput);
    check("protocol golden transcript", &golden_transcript);

    let failed = results.iter().filter(|(_, r)| r.is_err()).count();
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => println!("FAIL  {name}: {detail}"),
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
