use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::engine::run_trial;
use super::export::{fmt3, fmt_opt};
use super::metrics::TrialMetrics;
use super::scenario::{ScenarioConfig, ScenarioMode};
use super::seeds::trial_seed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VehicleSummary {
    pub vehicle_id: u32,
    pub name: String,
    /// Over the trials in which the vehicle arrived.
    pub mean_passing_time: Option<f64>,
    pub first_pass_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub mode: ScenarioMode,
    pub master_seed: u64,
    pub trials: Vec<TrialMetrics>,
    pub vehicles: Vec<VehicleSummary>,
    /// Mean of all passing times of all vehicles.
    pub overall_mean: Option<f64>,
    /// Trials in which nobody crossed the center.
    pub no_first_pass: usize,
    /// Indices of trials with a vehicle that never arrived.
    pub unfinished_trials: Vec<usize>,
}

impl ExperimentSummary {
    pub fn from_trials(mode: ScenarioMode, master_seed: u64, trials: Vec<TrialMetrics>) -> Self {
        let mut names: BTreeMap<u32, String> = BTreeMap::new();
        let mut times: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        let mut firsts: BTreeMap<u32, usize> = BTreeMap::new();
        let mut no_first_pass = 0;
        for t in &trials {
            for v in &t.vehicles {
                names.entry(v.vehicle_id).or_insert_with(|| v.name.clone());
                let entry = times.entry(v.vehicle_id).or_default();
                if let Some(p) = v.passing_time {
                    entry.push(p);
                }
            }
            match t.first_pass {
                Some(id) => *firsts.entry(id).or_default() += 1,
                None => no_first_pass += 1,
            }
        }
        let mean = |xs: &[f64]| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
        let all: Vec<f64> = times.values().flatten().copied().collect();
        let vehicles = names
            .into_iter()
            .map(|(id, name)| VehicleSummary {
                vehicle_id: id,
                name,
                mean_passing_time: mean(&times[&id]),
                first_pass_count: firsts.get(&id).copied().unwrap_or(0),
            })
            .collect();
        let unfinished_trials = trials
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.all_finished)
            .map(|(i, _)| i)
            .collect();
        Self {
            mode,
            master_seed,
            overall_mean: mean(&all),
            vehicles,
            no_first_pass,
            unfinished_trials,
            trials,
        }
    }

    pub fn all_finished(&self) -> bool {
        self.unfinished_trials.is_empty()
    }

    pub fn first_pass_count(&self, id: u32) -> usize {
        self.vehicles
            .iter()
            .find(|v| v.vehicle_id == id)
            .map_or(0, |v| v.first_pass_count)
    }

    /// Human-readable table.
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "scenario {} ({} trials, seed {})\n",
            self.mode,
            self.trials.len(),
            self.master_seed
        );
        for v in &self.vehicles {
            out.push_str(&format!(
                "  {:<10} passes first {:>3}   mean passing time {} s\n",
                v.name,
                v.first_pass_count,
                fmt_opt(v.mean_passing_time)
            ));
        }
        out.push_str(&format!("  average passing time {} s\n", fmt_opt(self.overall_mean)));
        if !self.unfinished_trials.is_empty() {
            out.push_str(&format!("  unfinished trials: {:?}\n", self.unfinished_trials));
        }
        out
    }
}

/// Runs `n_trials` trials of `cfg` on up to `jobs` threads. Results come back
/// in trial order whatever the scheduling.
pub fn run_experiment_parallel(
    cfg: &ScenarioConfig,
    n_trials: usize,
    master_seed: u64,
    jobs: usize,
) -> ExperimentSummary {
    assert!(n_trials >= 1, "an experiment needs at least one trial");
    let seeds: Vec<u64> = (0..n_trials).map(|i| trial_seed(master_seed, i)).collect();
    let jobs = jobs.clamp(1, n_trials);
    let trials = if jobs == 1 {
        seeds.iter().map(|&s| run_trial(cfg, s)).collect()
    } else {
        let chunk = n_trials.div_ceil(jobs);
        std::thread::scope(|scope| {
            let handles: Vec<_> = seeds
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(|&s| run_trial(cfg, s)).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("trial thread panicked"))
                .collect()
        })
    };
    ExperimentSummary::from_trials(cfg.mode, master_seed, trials)
}

pub fn run_experiment(cfg: &ScenarioConfig, n_trials: usize, master_seed: u64) -> ExperimentSummary {
    run_experiment_parallel(cfg, n_trials, master_seed, 1)
}

/// One row per vehicle per trial.
pub fn write_trials_csv<W: Write>(summaries: &[&ExperimentSummary], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario",
        "trial",
        "seed",
        "vehicle",
        "name",
        "launch_s",
        "passing_time_s",
        "center_cross_s",
        "min_speed_near_zone_mps",
        "stop_gap_to_zone_m",
        "first_speed_drop_m",
        "first_pass",
        "safety_violations",
        "finished",
    ])?;
    for s in summaries {
        for (i, t) in s.trials.iter().enumerate() {
            for v in &t.vehicles {
                w.write_record([
                    s.mode.label().to_string(),
                    i.to_string(),
                    t.trial_seed.to_string(),
                    v.vehicle_id.to_string(),
                    v.name.clone(),
                    fmt3(v.launch_time),
                    fmt_opt(v.passing_time),
                    fmt_opt(v.center_cross_time),
                    fmt_opt(v.min_speed_near_zone),
                    fmt_opt(v.stop_gap_to_zone),
                    fmt_opt(v.first_speed_drop),
                    (t.first_pass == Some(v.vehicle_id)).to_string(),
                    t.safety_violations.to_string(),
                    v.finished().to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-vehicle means and first-pass counts, plus one overall row per scenario.
pub fn write_summary_csv<W: Write>(summaries: &[&ExperimentSummary], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario",
        "vehicle",
        "name",
        "mean_passing_time_s",
        "first_pass_count",
        "trials",
        "unfinished_trials",
    ])?;
    for s in summaries {
        let n = s.trials.len().to_string();
        let unfinished = s.unfinished_trials.len().to_string();
        for v in &s.vehicles {
            w.write_record([
                s.mode.label().to_string(),
                v.vehicle_id.to_string(),
                v.name.clone(),
                fmt_opt(v.mean_passing_time),
                v.first_pass_count.to_string(),
                n.clone(),
                unfinished.clone(),
            ])?;
        }
        w.write_record([
            s.mode.label().to_string(),
            "all".into(),
            "average".into(),
            fmt_opt(s.overall_mean),
            s.trials.len().saturating_sub(s.no_first_pass).to_string(),
            n.clone(),
            unfinished,
        ])?;
    }
    w.flush()?;
    Ok(())
}
