//! TOML scenario files.
//!
//! ```toml
//! name = "custom"
//!
//! [cell]
//! bandwidth_rbs = 25
//! bits_per_rb = 732
//! tti_ms = 1
//!
//! [[app]]
//! ue = 1
//! name = "voip"
//! qci = 1
//! deadline_ms = 100
//! interval_ms = 20
//! payload_bytes = 32      # or rate_kbps = 12.8
//! start_ms = 0
//! rt = true
//! ```
//!
//! Several `[[app]]` entries may share a `ue`; each becomes its own bearer.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;
use toml::Spanned;

use crate::model::{CellConfig, QciClass, UeId};
use crate::traffic::{payload_from_rate, AppProfile, Scenario, UeProfiles};
use crate::Error;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    name: Option<String>,
    cell: Option<RawCell>,
    #[serde(default)]
    app: Vec<Spanned<RawApp>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCell {
    bandwidth_rbs: Option<u32>,
    bits_per_rb: Option<u64>,
    tti_ms: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawApp {
    ue: u32,
    name: Option<String>,
    qci: u8,
    deadline_ms: u64,
    interval_ms: u64,
    payload_bytes: Option<u64>,
    rate_kbps: Option<f64>,
    #[serde(default)]
    start_ms: u64,
    rt: bool,
    segment_bytes: Option<u64>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn app_profile(raw: &RawApp) -> Result<AppProfile, String> {
    if raw.interval_ms == 0 {
        return Err("`interval_ms` must be positive".into());
    }
    if raw.deadline_ms == 0 {
        return Err("`deadline_ms` must be positive".into());
    }
    let from_rate = match raw.rate_kbps {
        Some(r) if r <= 0.0 || !r.is_finite() => return Err("`rate_kbps` must be positive".into()),
        Some(r) => Some(payload_from_rate(r, raw.interval_ms as f64)),
        None => None,
    };
    let payload_bits = match (raw.payload_bytes, from_rate) {
        (Some(0), _) => return Err("`payload_bytes` must be positive".into()),
        (Some(bytes), Some(bits)) => {
            if (bytes * 8).abs_diff(bits) > 8 {
                return Err(format!(
                    "`payload_bytes` = {bytes} disagrees with `rate_kbps` ({} bytes per interval)",
                    bits as f64 / 8.0
                ));
            }
            bytes * 8
        }
        (Some(bytes), None) => bytes * 8,
        (None, Some(bits)) if bits > 0 => bits,
        (None, Some(_)) => return Err("`rate_kbps` yields an empty payload".into()),
        (None, None) => return Err("one of `payload_bytes` or `rate_kbps` is required".into()),
    };
    Ok(AppProfile {
        name: raw.name.clone().unwrap_or_else(|| "app".to_string()),
        payload_bits,
        interval_ms: raw.interval_ms,
        qci: QciClass::new(raw.qci, raw.deadline_ms, raw.rt),
        start_offset_ms: raw.start_ms,
        segment_bits: raw.segment_bytes.filter(|&b| b > 0).map(|b| b * 8),
    })
}

/// Parses scenario TOML. `origin` only labels error messages.
pub fn parse_scenario(text: &str, origin: &Path) -> Result<Scenario, Error> {
    let fail = |message: String| Error::ScenarioFile {
        path: origin.to_path_buf(),
        message,
    };
    let raw: RawFile =
        toml::from_str(text).map_err(|e| fail(e.to_string().trim_end().to_string()))?;
    if raw.app.is_empty() {
        return Err(fail("no [[app]] entries".into()));
    }

    let defaults = CellConfig::default();
    let cell = match raw.cell {
        Some(c) => CellConfig {
            bandwidth_rbs: c.bandwidth_rbs.unwrap_or(defaults.bandwidth_rbs),
            tti_ms: c.tti_ms.unwrap_or(defaults.tti_ms),
            bits_per_rb_per_tti: c.bits_per_rb.unwrap_or(defaults.bits_per_rb_per_tti),
        },
        None => defaults,
    };
    cell.validate().map_err(|e| fail(format!("[cell]: {e}")))?;

    let mut ue_profiles: Vec<UeProfiles> = Vec::new();
    for entry in &raw.app {
        let line = line_of(text, entry.span().start);
        let app = app_profile(entry.get_ref()).map_err(|m| fail(format!("line {line}: {m}")))?;
        let ue = UeId(entry.get_ref().ue);
        match ue_profiles.iter_mut().find(|u| u.ue_id == ue) {
            Some(u) => u.apps.push(app),
            None => ue_profiles.push(UeProfiles {
                ue_id: ue,
                apps: vec![app],
            }),
        }
    }

    let scenario = Scenario {
        name: raw.name.unwrap_or_else(|| {
            origin
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "custom".to_string())
        }),
        ue_profiles,
        cell,
    };
    scenario.validate().map_err(|e| fail(e.to_string()))?;
    Ok(scenario)
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_scenario(&text, path)
}

/// Renders a scenario in the file format accepted by [`load_scenario`].
pub fn to_toml(scenario: &Scenario) -> String {
    let mut s = String::new();
    let c = &scenario.cell;
    let _ = writeln!(s, "name = {:?}\n", scenario.name);
    let _ = writeln!(
        s,
        "[cell]\nbandwidth_rbs = {}\nbits_per_rb = {}\ntti_ms = {}",
        c.bandwidth_rbs, c.bits_per_rb_per_tti, c.tti_ms
    );
    for ue in &scenario.ue_profiles {
        for app in &ue.apps {
            let _ = writeln!(s, "\n[[app]]\nue = {}\nname = {:?}", ue.ue_id, app.name);
            let _ = writeln!(
                s,
                "qci = {}\ndeadline_ms = {}\ninterval_ms = {}",
                app.qci.qci, app.qci.deadline_ms, app.interval_ms
            );
            let _ = writeln!(s, "payload_bytes = {}", app.payload_bits.div_ceil(8));
            let _ = writeln!(
                s,
                "start_ms = {}\nrt = {}",
                app.start_offset_ms, app.qci.is_rt
            );
            if let Some(seg) = app.segment_bits {
                let _ = writeln!(s, "segment_bytes = {}", seg.div_ceil(8));
            }
        }
    }
    s
}
