use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::metrics::TrialMetrics;

pub const TRACE_COLUMNS: [&str; 6] = ["trial", "vehicle", "time_s", "signed_dist_m", "speed_mps", "mode"];

pub fn fmt3(x: f64) -> String {
    // avoid printing "-0.000"
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt3).unwrap_or_default()
}

/// Writes every trace sample of every trial, trials in order.
pub fn write_traces<W: Write>(trials: &[TrialMetrics], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for (i, t) in trials.iter().enumerate() {
        let trial = i.to_string();
        for v in &t.vehicles {
            let id = v.vehicle_id.to_string();
            for s in &v.trace {
                w.write_record([
                    trial.as_str(),
                    id.as_str(),
                    &fmt3(s.t),
                    &fmt3(s.signed_dist),
                    &fmt3(s.speed),
                    s.mode.label(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn export_traces(trials: &[TrialMetrics], path: &Path) -> csv::Result<()> {
    let file = BufWriter::new(File::create(path)?);
    write_traces(trials, file)
}
