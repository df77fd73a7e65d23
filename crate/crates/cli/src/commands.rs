//! The `check`, `simulate` and `bench` subcommands. Each returns an exit code
//! and writes its report to the given sink.

use std::io::Write;
use std::path::Path;
use std::thread;
use std::time::Instant;

use anyhow::{Context, Result};
use lpv_fdi::vehicle::simulate as run_scenario;
use lpv_fdi::vehicle::SimLog;
use lpv_fdi::{
    build_stacked, decoupling_ratio, isolability_check, synthesize_analytic, FdiError,
    SynthesizedFilter,
};

use crate::config::Config;
use crate::csv;
use crate::exit;
use crate::manifest::RunManifest;

/// Maps library failures to exit codes; other errors propagate.
fn classify(err: FdiError, report: &mut dyn Write) -> Result<u8> {
    writeln!(report, "error: {err}")?;
    Ok(match err {
        FdiError::NotIsolable { .. } => exit::NOT_ISOLABLE,
        _ => exit::RUNTIME,
    })
}

fn write_output(
    command: &str,
    config_path: &Path,
    cfg: &Config,
    out: &Path,
    body: &str,
    started: Instant,
    digest: bool,
) -> Result<()> {
    std::fs::write(out, body).with_context(|| format!("writing {}", out.display()))?;
    let mut manifest = RunManifest::new(command, config_path, cfg, out);
    manifest.output_sha256 = digest.then(|| csv::digest(body));
    manifest.wall_clock_s = started.elapsed().as_secs_f64();
    manifest
        .write(out)
        .with_context(|| format!("writing manifest for {}", out.display()))?;
    Ok(())
}

/// Rank test over parameter windows spread across one velocity period, plus
/// a synthesis summary for the first window.
pub fn check(cfg: &Config, config_path: &Path, out: Option<&Path>, report: &mut dyn Write) -> Result<u8> {
    let started = Instant::now();
    let plant = cfg.plant();
    let scenario = cfg.scenario();
    let options = cfg.options();
    let mut body = String::new();

    let result = (|| -> lpv_fdi::Result<(usize, usize, Option<SynthesizedFilter>, f64)> {
        let dae = plant.dae()?;
        let windows = scenario.sample_windows(
            plant.params.sample_time,
            scenario.order(),
            cfg.filter.check_windows,
        )?;
        let denominator = scenario.denominator()?;
        let mut isolable = 0;
        let mut first = None;
        let mut ratio = 0.0;
        body.push_str("window,v_first,v_last,rank_h,rank_hf,isolable\n");
        for (i, win) in windows.iter().enumerate() {
            let stk = build_stacked(&dae, win)?;
            let iso = isolability_check(&stk, &options)?;
            let s = win.samples();
            body.push_str(&format!(
                "{i},{},{},{},{},{}\n",
                s[0].first(),
                s[s.len() - 1].first(),
                iso.rank_h,
                iso.rank_hf,
                iso.isolable
            ));
            if iso.isolable {
                isolable += 1;
                if i == 0 {
                    let row = synthesize_analytic(&stk, &options)?;
                    ratio = decoupling_ratio(&row.coeffs, &stk);
                    first = Some(SynthesizedFilter::assemble(row, &stk, denominator.coeffs())?);
                }
            }
        }
        Ok((isolable, windows.len(), first, ratio))
    })();

    let (isolable, total, first, ratio) = match result {
        Ok(v) => v,
        Err(e) => return classify(e, report),
    };
    if let Some(f) = &first {
        body.push_str(&format!(
            "# window 0: column {}, {:?}, decoupling ratio {:.3e}, normalized gain {}\n",
            f.selected_column,
            f.exactness,
            ratio,
            f.normalized_dc_gain()
        ));
    }
    body.push_str(&format!("# isolable at {isolable} of {total} windows\n"));
    report.write_all(body.as_bytes())?;
    if let Some(out) = out {
        write_output("check", config_path, cfg, out, &body, started, false)?;
    }
    Ok(if isolable == total {
        exit::OK
    } else {
        exit::NOT_ISOLABLE
    })
}

/// Runs the scenario and emits the CSV (to `out` with a manifest, or to the
/// report sink).
pub fn simulate(cfg: &Config, config_path: &Path, out: Option<&Path>, report: &mut dyn Write) -> Result<u8> {
    let started = Instant::now();
    let log = match run_scenario(&cfg.scenario(), &cfg.plant(), &cfg.options()) {
        Ok(log) => log,
        Err(e) => return classify(e, report),
    };
    let body = csv::render(&log);
    match out {
        Some(out) => {
            write_output("simulate", config_path, cfg, out, &body, started, true)?;
            writeln!(
                report,
                "wrote {} rows to {} (mean step time {:.3e} s)",
                log.len(),
                out.display(),
                log.mean_synth_time()
            )?;
        }
        None => report.write_all(body.as_bytes())?,
    }
    Ok(exit::OK)
}

/// Mean, median and 99th percentile of per-step times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingStats {
    pub steps: usize,
    pub mean: f64,
    pub median: f64,
    pub p99: f64,
}

impl TimingStats {
    pub fn from_samples(mut xs: Vec<f64>) -> Self {
        if xs.is_empty() {
            return Self {
                steps: 0,
                mean: 0.0,
                median: 0.0,
                p99: 0.0,
            };
        }
        xs.sort_by(f64::total_cmp);
        let n = xs.len();
        let rank = |q: f64| xs[((q * n as f64).ceil() as usize).clamp(1, n) - 1];
        Self {
            steps: n,
            mean: xs.iter().sum::<f64>() / n as f64,
            median: if n % 2 == 1 {
                xs[n / 2]
            } else {
                0.5 * (xs[n / 2 - 1] + xs[n / 2])
            },
            p99: rank(0.99),
        }
    }
}

/// Thread count for `bench`: `FDI_THREADS` if set and positive, otherwise
/// the available parallelism, never more than `jobs`.
pub fn thread_count(jobs: usize) -> usize {
    let cap = std::env::var("FDI_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| thread::available_parallelism().map_or(1, |n| n.get()));
    cap.min(jobs).max(1)
}

fn run_repetitions(cfg: &Config, repetitions: usize, cache: bool) -> lpv_fdi::Result<Vec<SimLog>> {
    let threads = thread_count(repetitions);
    let plant = cfg.plant();
    let options = cfg.options();
    let mut slots: Vec<Option<lpv_fdi::Result<SimLog>>> = vec![None; repetitions];
    thread::scope(|scope| {
        for (t, chunk) in slots.chunks_mut(repetitions.div_ceil(threads)).enumerate() {
            let plant = &plant;
            let options = &options;
            let base = t * repetitions.div_ceil(threads);
            scope.spawn(move || {
                for (i, slot) in chunk.iter_mut().enumerate() {
                    let mut scenario = cfg.scenario();
                    scenario.cache = cache;
                    scenario.seed = cfg.noise.seed.wrapping_add((base + i) as u64);
                    *slot = Some(run_scenario(&scenario, plant, options));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every repetition ran")).collect()
}

/// Timing of repeated scenario runs, with and without the window cache.
pub fn bench(
    cfg: &Config,
    config_path: &Path,
    repetitions: usize,
    out: Option<&Path>,
    report: &mut dyn Write,
) -> Result<u8> {
    anyhow::ensure!(repetitions >= 1, "repetitions must be at least 1");
    let started = Instant::now();
    let h = cfg.model.sample_time;
    let mut body = String::new();
    let mut logs = Vec::new();
    for cache in [false, true] {
        let runs = match run_repetitions(cfg, repetitions, cache) {
            Ok(r) => r,
            Err(e) => return classify(e, report),
        };
        let times = runs
            .iter()
            .flat_map(|l| l.records.iter().map(|r| r.synth_time_s))
            .collect();
        let stats = TimingStats::from_samples(times);
        body.push_str(&format!(
            "[{}]\nrepetitions = {repetitions}\nsteps = {}\nmean_s = {:e}\nmedian_s = {:e}\np99_s = {:e}\n\n",
            if cache { "cached" } else { "uncached" },
            stats.steps,
            stats.mean,
            stats.median,
            stats.p99
        ));
        logs.push((runs, stats));
    }
    let identical = logs[0]
        .0
        .iter()
        .zip(&logs[1].0)
        .all(|(a, b)| a.r_lpv() == b.r_lpv() && a.r_lti() == b.r_lti());
    let mean = logs[0].1.mean;
    let within = mean < h;
    body.push_str(&format!(
        "[summary]\nthreads = {}\nsample_time_s = {h:e}\nmean_below_sample_time = {within}\ncached_residuals_identical = {identical}\n",
        thread_count(repetitions)
    ));
    report.write_all(body.as_bytes())?;
    if let Some(out) = out {
        write_output("bench", config_path, cfg, out, &body, started, false)?;
    }
    Ok(if within && identical {
        exit::OK
    } else {
        exit::RUNTIME
    })
}
