use std::path::Path;
use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use motion_stream::backend::{build_backend, MotionBackend, StyleEmbedding};
use motion_stream::experiment::{score, steady_joints, synthetic_motion};
use motion_stream::io::{load_joints, load_motion, save_joints, save_motion, JointsFile};
use motion_stream::metrics::{sequence_jitter_terms, total_jitter};
use motion_stream::motion::{MotionSequence, DEFAULT_FPS};
use motion_stream::pipeline::{run_offline, Emission, Mode, PipelineConfig, PipelineState};
use motion_stream::timing::percentile;
use motion_stream_service::{Server, Service, ServiceConfig, SystemClock};
use serde_json::json;

use crate::settings::{ConfigArgs, StyleArgs};
use crate::{DataError, Format, Usage};

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn absorb(out: &mut Option<Emission>, em: Emission) -> Result<()> {
    match out {
        None => *out = Some(em),
        Some(acc) => {
            if acc.warmup_frames == acc.len() {
                acc.warmup_frames += em.warmup_frames;
            }
            acc.joints.append(&em.joints)?;
            acc.features = acc.features.concat(&em.features)?;
            acc.strides += em.strides;
        }
    }
    Ok(())
}

/// Feeds `input` one frame at a time, timing every call that completes a
/// stride. Offline mode is one timed batch pass.
pub fn run_timed(
    input: &MotionSequence,
    backend: &Arc<dyn MotionBackend>,
    config: &PipelineConfig,
    style: &StyleEmbedding,
) -> Result<(Emission, Vec<Duration>, Option<PipelineState>)> {
    if config.mode == Mode::Offline {
        let start = Instant::now();
        let em = run_offline(input, backend, config, style)?;
        return Ok((em, vec![start.elapsed()], None));
    }
    if config.mode == Mode::Naive && input.len() < config.window {
        return Err(DataError(format!(
            "the naive baseline needs at least {} frames, input has {}",
            config.window,
            input.len()
        ))
        .into());
    }
    let mut state = PipelineState::new(config.clone(), Arc::clone(backend), style.clone())?;
    let mut out = None;
    let mut latencies = Vec::new();
    for t in 0..input.len() {
        let frame = input.slice(t..t + 1)?;
        let start = Instant::now();
        let em = state.push_frames(&frame)?;
        if !em.is_empty() {
            latencies.push(start.elapsed());
        }
        absorb(&mut out, em)?;
    }
    let start = Instant::now();
    let tail = state.finish()?;
    if !tail.is_empty() {
        latencies.push(start.elapsed());
    }
    absorb(&mut out, tail)?;
    let em = out.ok_or_else(|| DataError("input is empty".into()))?;
    Ok((em, latencies, Some(state)))
}

fn latency_summary(lat: &[Duration]) -> serde_json::Value {
    let q = |p| percentile(lat, p).map(ms);
    json!({
        "count": lat.len(),
        "p50_ms": q(0.5),
        "p90_ms": q(0.9),
        "p99_ms": q(0.99),
        "max_ms": lat.iter().max().copied().map(ms),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

fn load_input(path: &Path, backend: &dyn MotionBackend) -> Result<MotionSequence> {
    let file = load_motion(path).with_context(|| format!("reading {}", path.display()))?;
    let want = backend.descriptor().frame_width;
    if file.sequence.width() != want {
        return Err(DataError(format!(
            "{}: frames have {} values, backend expects {want}",
            path.display(),
            file.sequence.width()
        ))
        .into());
    }
    Ok(file.sequence)
}

pub fn stylize(
    input: &Path,
    out: &Path,
    mode: Mode,
    style: &StyleArgs,
    args: &ConfigArgs,
    format: Format,
) -> Result<()> {
    let cfg = args.service_config()?;
    let backend = build_backend(&cfg.backend)?;
    let seq = load_input(input, backend.as_ref())?;
    let embedding = style.resolve(&cfg, backend.as_ref())?;
    let pipeline = PipelineConfig {
        mode,
        ..cfg.pipeline.clone()
    };
    let (em, latencies, _) = run_timed(&seq, &backend, &pipeline, &embedding)?;
    let file = JointsFile {
        joints: em.joints.clone(),
        fps: seq.fps(),
        warmup: em.warmup_frames,
    };
    save_joints(out, &file).with_context(|| format!("writing {}", out.display()))?;
    let jitter = total_jitter(&[steady_joints(&em)]).ok().map(|r| r.jitter);
    let lat = latency_summary(&latencies);
    match format {
        Format::Structured => println!(
            "{}",
            json!({
                "mode": mode.as_str(),
                "frames_in": seq.len(),
                "frames_out": em.len(),
                "warmup_frames": em.warmup_frames,
                "strides": em.strides,
                "jitter": jitter,
                "latency": lat,
                "out": out.display().to_string(),
            })
        ),
        Format::Text => {
            println!("mode          {mode}");
            println!("frames in     {}", seq.len());
            println!("frames out    {} ({} warm-up)", em.len(), em.warmup_frames);
            println!("strides       {}", em.strides);
            println!("jitter        {} (after warm-up)", fmt_opt(jitter));
            println!(
                "latency ms    p50 {}  p90 {}  p99 {}  max {}",
                fmt_opt(lat["p50_ms"].as_f64()),
                fmt_opt(lat["p90_ms"].as_f64()),
                fmt_opt(lat["p99_ms"].as_f64()),
                fmt_opt(lat["max_ms"].as_f64()),
            );
            println!("wrote         {}", out.display());
        }
    }
    Ok(())
}

pub fn bench(frames: usize, input_seed: u64, args: &ConfigArgs, format: Format) -> Result<()> {
    let cfg = args.service_config()?;
    cfg.pipeline.validate()?;
    if frames < cfg.pipeline.window {
        return Err(Usage(format!(
            "--frames {frames} is shorter than the window of {} frames",
            cfg.pipeline.window
        ))
        .into());
    }
    if cfg.pipeline.mode == Mode::Offline {
        return Err(
            Usage("bench times the streaming modes; offline is a single pass".into()).into(),
        );
    }
    let backend = build_backend(&cfg.backend)?;
    let d = backend.descriptor().frame_width;
    let seq = synthetic_motion(frames, d, DEFAULT_FPS, input_seed)?;
    let style = cfg.catalog(backend.descriptor().style_dim)?[cfg.initial_style()].clone();
    let (em, latencies, state) = run_timed(&seq, &backend, &cfg.pipeline, &style)?;
    let state = state.expect("streaming run");
    let timings = state.timings();
    let busy = timings.total().as_secs_f64();
    let rate = em.strides as f64 / busy;
    let per = |d: Duration| d.as_secs_f64() * 1e6 / em.strides as f64;
    let lat = latency_summary(&latencies);
    match format {
        Format::Structured => {
            let stages: serde_json::Map<String, serde_json::Value> = timings
                .stages()
                .iter()
                .map(|(n, d)| (n.to_string(), json!(per(*d))))
                .collect();
            println!(
                "{}",
                json!({
                    "frames": frames,
                    "strides": em.strides,
                    "steps": cfg.pipeline.steps,
                    "strides_per_sec": rate,
                    "frames_per_sec": em.len() as f64 / busy,
                    "stage_us_per_stride": stages,
                    "latency": lat,
                })
            );
        }
        Format::Text => {
            println!("frames          {frames}");
            println!("strides         {}", em.strides);
            println!("steps           {}", cfg.pipeline.steps);
            println!("strides/sec     {rate:.1}");
            println!("frames/sec      {:.1}", em.len() as f64 / busy);
            println!("stage           us/stride");
            for (name, d) in timings.stages() {
                println!("  {name:<14}{:>10.2}", per(d));
            }
            println!(
                "latency ms      p50 {}  p99 {}  max {}",
                fmt_opt(lat["p50_ms"].as_f64()),
                fmt_opt(lat["p99_ms"].as_f64()),
                fmt_opt(lat["max_ms"].as_f64()),
            );
        }
    }
    Ok(())
}

fn expand(patterns: &[String]) -> Result<Vec<std::path::PathBuf>> {
    let mut paths = Vec::new();
    for pat in patterns {
        let matches: Vec<_> = glob::glob(pat)
            .map_err(|e| Usage(format!("bad pattern `{pat}`: {e}")))?
            .collect::<Result<_, _>>()?;
        if matches.is_empty() {
            return Err(DataError(format!("no files match `{pat}`")).into());
        }
        paths.extend(matches);
    }
    paths.sort();
    paths.dedup();
    Ok(paths)
}

pub fn jitter(patterns: &[String], include_warmup: bool, format: Format) -> Result<()> {
    let paths = expand(patterns)?;
    let mut seqs = Vec::new();
    for p in &paths {
        let file = load_joints(p).with_context(|| format!("reading {}", p.display()))?;
        seqs.push(if include_warmup {
            file.joints
        } else {
            file.steady()
        });
    }
    let pooled = total_jitter(&seqs).map_err(|e| DataError(e.to_string()))?;
    let rows: Vec<(String, f64, usize)> = paths
        .iter()
        .zip(&seqs)
        .map(|(p, s)| {
            let (d, n) = sequence_jitter_terms(s);
            (p.display().to_string(), d, n)
        })
        .collect();
    match format {
        Format::Structured => {
            let files: Vec<_> = rows
                .iter()
                .map(|(p, d, n)| json!({"path": p, "d_sum": d, "n_count": n, "jitter": (*n > 0).then(|| d / *n as f64)}))
                .collect();
            println!("{}", json!({"files": files, "pooled": pooled}));
        }
        Format::Text => {
            println!("{:<40} {:>18} {:>10} {:>14}", "file", "D", "N", "jitter");
            for (p, d, n) in &rows {
                let j = if *n > 0 {
                    format!("{:.8}", d / *n as f64)
                } else {
                    "n/a".into()
                };
                println!("{p:<40} {d:>18.8} {n:>10} {j:>14}");
            }
            println!(
                "{:<40} {:>18.8} {:>10} {:>14.8}",
                "pooled", pooled.d_sum, pooled.n_count, pooled.jitter
            );
        }
    }
    Ok(())
}

pub fn compare(
    input: &Path,
    modes: &[Mode],
    style: &StyleArgs,
    args: &ConfigArgs,
    format: Format,
) -> Result<()> {
    let cfg = args.service_config()?;
    let backend = build_backend(&cfg.backend)?;
    let seq = load_input(input, backend.as_ref())?;
    let embedding = style.resolve(&cfg, backend.as_ref())?;
    let mut scores = Vec::new();
    for &mode in modes {
        let pipeline = PipelineConfig {
            mode,
            ..cfg.pipeline.clone()
        };
        let (em, _, _) = run_timed(&seq, &backend, &pipeline, &embedding)?;
        scores.push(score(&em, mode, pipeline.stride).map_err(|e| DataError(e.to_string()))?);
    }
    match format {
        Format::Structured => println!("{}", serde_json::to_string(&scores)?),
        Format::Text => {
            println!(
                "{:<12} {:>12} {:>14} {:>8}",
                "mode", "jitter", "discontinuity", "frames"
            );
            for s in &scores {
                println!(
                    "{:<12} {:>12.6} {:>14.6} {:>8}",
                    s.mode.as_str(),
                    s.jitter,
                    s.discontinuity,
                    s.frames
                );
            }
        }
    }
    Ok(())
}

pub fn synth(out: &Path, frames: usize, seed: u64, width: usize, fps: f64) -> Result<()> {
    let seq = synthetic_motion(frames, width, fps, seed)?;
    save_motion(out, &seq).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

pub fn serve(config: Option<&Path>, listen: Option<String>) -> Result<()> {
    let mut cfg = match config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    cfg.apply_env()?;
    if let Some(addr) = listen {
        cfg.listen = addr;
    }
    let addr = cfg.listen.clone();
    let service = Arc::new(Service::new(cfg, Arc::new(SystemClock::default()))?);
    let server =
        Server::bind(service, &addr).map_err(|e| Usage(format!("cannot listen on {addr}: {e}")))?;
    let stop = server.shutdown_handle();
    ctrlc::set_handler(move || stop.store(true, Ordering::SeqCst))
        .context("installing signal handler")?;
    eprintln!("listening on {}", server.local_addr()?);
    let summaries = server.run()?;
    for s in &summaries {
        println!("{}", serde_json::to_string(s)?);
    }
    eprintln!("stopped after {} session(s)", summaries.len());
    Ok(())
}
