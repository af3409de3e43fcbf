//! CSV and JSON writers for run and sweep results.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::{RunMeans, RunResult, SweepPoint};
use crate::kpi::RunSummary;
use crate::model::Millis;
use crate::sched::SchedulerKind;
use crate::traffic::{Scenario, StartMode};

pub const TIMESERIES_HEADER: [&str; 11] = [
    "run",
    "scheduler",
    "n_ues",
    "time_s",
    "ue_id",
    "drb_id",
    "qci",
    "is_rt",
    "hol_delay_ms",
    "dmr",
    "throughput_kbps",
];

pub const SWEEP_HEADER: [&str; 6] = [
    "scheduler",
    "n_ues",
    "mean_hol_rt_ms",
    "mean_hol_nrt_ms",
    "mean_dmr",
    "mean_throughput_kbps",
];

/// Formats `x` with six significant digits, switching to exponent
/// notation outside `[1e-5, 1e15)`.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    // exponent after rounding to six digits
    let sci = format!("{x:.5e}");
    let exp: i32 = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .unwrap_or(0);
    if !(-5..15).contains(&exp) {
        return sci;
    }
    let decimals = (5 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

/// One line of `timeseries.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputRow {
    pub run: u32,
    pub scheduler: SchedulerKind,
    pub n_ues: usize,
    pub time_ms: Millis,
    pub ue_id: u32,
    pub drb_id: u32,
    pub qci: u8,
    pub is_rt: bool,
    pub hol_delay_ms: f64,
    pub dmr: f64,
    pub throughput_kbps: f64,
}

impl OutputRow {
    pub fn fields(&self) -> [String; 11] {
        [
            self.run.to_string(),
            self.scheduler.name().to_string(),
            self.n_ues.to_string(),
            fmt_sig6(self.time_ms as f64 / 1000.0),
            self.ue_id.to_string(),
            self.drb_id.to_string(),
            self.qci.to_string(),
            self.is_rt.to_string(),
            fmt_sig6(self.hol_delay_ms),
            fmt_sig6(self.dmr),
            fmt_sig6(self.throughput_kbps),
        ]
    }
}

/// Rows of one run, window by window, bearers in id order inside a window.
pub fn rows_for(result: &RunResult) -> Vec<OutputRow> {
    let s = &result.summary;
    result
        .records
        .iter()
        .map(|r| {
            let d = s
                .drbs
                .iter()
                .find(|d| d.drb_id == r.drb_id)
                .expect("record for unknown bearer");
            OutputRow {
                run: s.run_index,
                scheduler: s.scheduler,
                n_ues: s.n_ues,
                time_ms: r.window_end_ms,
                ue_id: d.ue_id.0,
                drb_id: d.drb_id.0,
                qci: d.qci,
                is_rt: d.is_rt,
                hol_delay_ms: r.mean_hol_delay_ms,
                dmr: r.dmr,
                throughput_kbps: r.throughput_kbps,
            }
        })
        .collect()
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

pub fn write_timeseries<W: Write>(out: W, results: &[RunResult]) -> csv::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(TIMESERIES_HEADER)?;
    for result in results {
        for row in rows_for(result) {
            w.write_record(row.fields())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig6).unwrap_or_default()
}

pub fn write_sweep<W: Write>(out: W, points: &[SweepPoint]) -> csv::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for p in points {
        w.write_record([
            p.scheduler.name().to_string(),
            p.n_ues.to_string(),
            opt(p.means.mean_hol_rt_ms),
            opt(p.means.mean_hol_nrt_ms),
            fmt_sig6(p.means.mean_dmr),
            fmt_sig6(p.means.mean_throughput_kbps),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub scenario: Scenario,
    pub scheduler: SchedulerKind,
    pub duration_ms: Millis,
    pub n_runs: u32,
    pub base_seed: u64,
    pub start_mode: StartMode,
    pub runs: Vec<RunSummary>,
    pub mean: RunMeans,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_sig6(0.0), "0");
        assert_eq!(fmt_sig6(18300.0), "18300.0");
        assert_eq!(fmt_sig6(1.0), "1.00000");
        assert_eq!(fmt_sig6(0.25), "0.250000");
        assert_eq!(fmt_sig6(123.4567), "123.457");
        assert_eq!(fmt_sig6(9.999996), "10.0000");
        assert_eq!(fmt_sig6(-2.5), "-2.50000");
        assert_eq!(fmt_sig6(1.5e-7), "1.50000e-7");
        assert_eq!(fmt_sig6(300.0), "300.000");
    }
}
