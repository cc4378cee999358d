use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use coopsim::netsim::{bandwidth_report, future_path_packet_bytes, MAX_UDP_PAYLOAD};
use coopsim::sim_engine::{
    export_traces, run_experiment_parallel, run_trial, trial_seed, write_summary_csv, write_trials_csv,
    ExperimentSummary, ScenarioConfig, ScenarioMode,
};

use crate::plot;
use crate::{BandwidthArgs, ExperimentArgs, Format, PlotArgs, RunArgs, ScenarioArgs};

/// Exit status when every command ran but a trial never reached its destination.
const UNFINISHED: u8 = 2;

fn load_scenario(args: &ScenarioArgs) -> Result<(ScenarioConfig, u64)> {
    let mut cfg = if args.scenario == "default" {
        ScenarioConfig::default()
    } else {
        ScenarioConfig::load(Path::new(&args.scenario)).with_context(|| format!("scenario `{}`", args.scenario))?
    };
    for ov in &args.overrides {
        let Some((key, value)) = ov.split_once('=') else {
            bail!("override `{ov}` is not of the form KEY=VALUE");
        };
        cfg.apply_override(key.trim(), value.trim())?;
    }
    let seed = args.seed.unwrap_or(cfg.master_seed);
    Ok((cfg, seed))
}

fn trace_file(mode: ScenarioMode) -> String {
    format!("traces_{}.csv", mode.label())
}

pub fn run(args: &RunArgs) -> Result<ExitCode> {
    let (mut cfg, seed) = load_scenario(&args.scenario)?;
    if let Some(mode) = args.mode {
        cfg.mode = mode;
    }
    let t = run_trial(&cfg, trial_seed(seed, args.trial));
    println!("scenario {} trial {} (seed {})", cfg.mode, args.trial, t.trial_seed);
    for v in &t.vehicles {
        let pass = v
            .passing_time
            .map_or("did not arrive".to_string(), |p| format!("{p:.3} s"));
        let min = v.min_speed_near_zone.map_or("-".to_string(), |s| format!("{s:.3} m/s"));
        println!(
            "  {:<10} launch {:.2} s  passing time {pass}  min speed near zone {min}",
            v.name, v.launch_time
        );
    }
    if let Some(first) = t.first_pass.and_then(|id| t.vehicle(id)) {
        println!("  first through the intersection: {}", first.name);
    }
    for e in &t.mode_log {
        println!("  {:>7.2} s  vehicle {}  {} -> {}", e.t, e.vehicle_id, e.from, e.to);
    }
    println!("  safety violations: {}", t.safety_violations);
    if let Some(path) = &args.traces {
        export_traces(std::slice::from_ref(&t), path).with_context(|| format!("writing {}", path.display()))?;
    }
    if !t.all_finished {
        eprintln!("error: a vehicle did not reach its destination within the horizon");
        return Ok(ExitCode::from(UNFINISHED));
    }
    Ok(ExitCode::SUCCESS)
}

fn write_csv(path: &Path, f: impl FnOnce(BufWriter<File>) -> csv::Result<()>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f(BufWriter::new(file)).with_context(|| format!("writing {}", path.display()))
}

pub fn experiment(args: &ExperimentArgs) -> Result<ExitCode> {
    let (cfg, seed) = load_scenario(&args.scenario)?;
    let modes: Vec<ScenarioMode> = match args.mode {
        Some(m) => vec![m],
        None => ScenarioMode::ALL.to_vec(),
    };
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let summaries: Vec<ExperimentSummary> = modes
        .iter()
        .map(|&m| {
            run_experiment_parallel(
                &cfg.clone().with_mode(m),
                args.trials as usize,
                seed,
                args.jobs as usize,
            )
        })
        .collect();
    let refs: Vec<&ExperimentSummary> = summaries.iter().collect();

    write_csv(&args.out.join("summary.csv"), |w| write_summary_csv(&refs, w))?;
    write_csv(&args.out.join("trials.csv"), |w| write_trials_csv(&refs, w))?;
    for s in &summaries {
        let path = args.out.join(trace_file(s.mode));
        export_traces(&s.trials, &path).with_context(|| format!("writing {}", path.display()))?;
    }

    let mut out = std::io::stdout().lock();
    for s in &summaries {
        write!(out, "{}", s.render_text())?;
    }
    if let [.., rsu] = summaries.as_slice() {
        if let (Some(sa), Some(fast)) = (
            summaries
                .iter()
                .find(|s| s.mode == ScenarioMode::StandAlone)
                .and_then(|s| s.overall_mean),
            (rsu.mode == ScenarioMode::FuturePathWithRsu)
                .then_some(rsu.overall_mean)
                .flatten(),
        ) {
            writeln!(
                out,
                "RSU coordination changes the average passing time by {:+.1}%",
                (fast / sa - 1.0) * 100.0
            )?;
        }
    }
    writeln!(out, "wrote {}", args.out.display())?;

    let unfinished: usize = summaries.iter().map(|s| s.unfinished_trials.len()).sum();
    if unfinished > 0 {
        eprintln!("error: {unfinished} trial(s) ended with a vehicle short of its destination");
        return Ok(ExitCode::from(UNFINISHED));
    }
    Ok(ExitCode::SUCCESS)
}

/// `1234567` as `1,234,567`.
fn grouped(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

pub fn bandwidth(args: &BandwidthArgs) -> Result<ExitCode> {
    if !(args.rate > 0.0 && args.rate.is_finite()) {
        bail!("--rate must be positive");
    }
    if !(args.media > 0.0 && args.media.is_finite()) {
        bail!("--media must be positive");
    }
    let packet = args
        .points
        .map_or(MAX_UDP_PAYLOAD, |n| future_path_packet_bytes(n as usize));
    let r = bandwidth_report(packet, args.rate, args.streams, args.media);
    let mut out = std::io::stdout().lock();
    match args.format {
        Format::Text => {
            let source = match args.points {
                Some(n) => format!("{n}-point future path"),
                None => "largest UDP payload".to_string(),
            };
            writeln!(out, "packet      {} bytes ({source})", grouped(r.packet_bytes as u64))?;
            writeln!(
                out,
                "per stream  {} bps ({} kbps) at {} Hz",
                grouped(r.per_stream_bps.round() as u64),
                r.per_stream_kbps(),
                r.rate_hz
            )?;
            writeln!(
                out,
                "per car     {} bps ({} kbps) over {} streams",
                grouped(r.per_car_bps.round() as u64),
                r.per_car_kbps(),
                r.streams_per_car
            )?;
            writeln!(
                out,
                "capacity    {} cars on a {} bps medium",
                r.capacity_cars,
                grouped(r.media_rate_bps.round() as u64)
            )?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record([
                "packet_bytes",
                "rate_hz",
                "streams_per_car",
                "per_stream_bps",
                "per_car_bps",
                "media_rate_bps",
                "capacity_cars",
            ])?;
            w.write_record([
                r.packet_bytes.to_string(),
                r.rate_hz.to_string(),
                r.streams_per_car.to_string(),
                r.per_stream_bps.to_string(),
                r.per_car_bps.to_string(),
                r.media_rate_bps.to_string(),
                r.capacity_cars.to_string(),
            ])?;
            w.flush()?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn plot(args: &PlotArgs) -> Result<ExitCode> {
    let modes = args
        .scenarios
        .iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<ScenarioMode>().map_err(anyhow::Error::msg))
        .collect::<Result<Vec<_>>>()?;
    if modes.is_empty() {
        bail!("no scenarios selected");
    }
    let out_dir = args.out.as_deref().unwrap_or(&args.traces);
    let mut inputs = Vec::new();
    for &m in &modes {
        let path = args.traces.join(trace_file(m));
        if !path.is_file() {
            bail!("missing traces {}; run `coopsim experiment` first", path.display());
        }
        inputs.push((m, path));
    }
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for (m, path) in inputs {
        let traces = plot::read_traces(&path).with_context(|| format!("reading {}", path.display()))?;
        if traces.is_empty() {
            bail!("{} holds no trace rows", path.display());
        }
        let svg = plot::render_svg(&format!("Speed near the intersection: {}", m.label()), &traces);
        let target = out_dir.join(format!("speed_{}.svg", m.label()));
        fs::write(&target, svg).with_context(|| format!("writing {}", target.display()))?;
        println!("wrote {}", target.display());
    }
    Ok(ExitCode::SUCCESS)
}
