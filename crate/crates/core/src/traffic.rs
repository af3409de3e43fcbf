//! Periodic application traffic and the two built-in validation scenarios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{CellConfig, DrbId, Millis, Packet, QciClass, UeId};
use crate::Error;

/// Start times are spread over this span.
pub const START_SPREAD_MS: Millis = 1000;

/// Constant-bitrate application feeding one bearer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppProfile {
    pub name: String,
    pub payload_bits: u64,
    pub interval_ms: Millis,
    pub qci: QciClass,
    pub start_offset_ms: Millis,
    /// Split each payload into segments of at most this many bits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment_bits: Option<u64>,
}

impl AppProfile {
    pub fn new(name: &str, payload_bits: u64, interval_ms: Millis, qci: QciClass) -> Self {
        assert!(payload_bits > 0 && interval_ms > 0);
        Self {
            name: name.to_string(),
            payload_bits,
            interval_ms,
            qci,
            start_offset_ms: 0,
            segment_bits: None,
        }
    }

    pub fn deadline_ms(&self) -> Millis {
        self.qci.deadline_ms
    }

    pub fn rate_bps(&self) -> f64 {
        self.payload_bits as f64 * 1000.0 / self.interval_ms as f64
    }

    pub fn rate_kbps(&self) -> f64 {
        self.rate_bps() / 1000.0
    }

    /// Whether a payload is due at `now_ms`.
    pub fn fires_at(&self, now_ms: Millis) -> bool {
        now_ms >= self.start_offset_ms && (now_ms - self.start_offset_ms).is_multiple_of(self.interval_ms)
    }

    /// Emits the payload due at `now_ms`, if any. `seq` becomes the packet index.
    pub fn generate(&self, now_ms: Millis, seq: u64) -> Option<Packet> {
        self.fires_at(now_ms)
            .then(|| Packet::new(seq, now_ms, self.payload_bits, self.deadline_ms()))
    }

    /// Segment sizes a single payload is split into (one entry when unsegmented).
    pub fn segment_sizes(&self) -> Vec<u64> {
        match self.segment_bits {
            Some(seg) if seg > 0 && seg < self.payload_bits => {
                let full = self.payload_bits / seg;
                let mut out = vec![seg; full as usize];
                let rest = self.payload_bits % seg;
                if rest > 0 {
                    out.push(rest);
                }
                out
            }
            _ => vec![self.payload_bits],
        }
    }
}

/// Converts a (rate, interval) pair into a per-packet size in bits.
///
/// kbit/s times ms is bits; the result is rounded to the nearest bit.
pub fn payload_from_rate(rate_kbps: f64, interval_ms: f64) -> u64 {
    assert!(
        rate_kbps > 0.0 && interval_ms > 0.0,
        "rate and interval must be positive"
    );
    (rate_kbps * interval_ms).round() as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeProfiles {
    pub ue_id: UeId,
    pub apps: Vec<AppProfile>,
}

/// A cell plus the applications running on each UE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub ue_profiles: Vec<UeProfiles>,
    pub cell: CellConfig,
}

/// One bearer of a scenario, numbered in declaration order starting at 1.
#[derive(Debug, Clone, Copy)]
pub struct BearerSpec<'a> {
    pub drb_id: DrbId,
    pub ue_id: UeId,
    pub app: &'a AppProfile,
}

impl Scenario {
    pub fn n_ues(&self) -> usize {
        self.ue_profiles.len()
    }

    pub fn bearers(&self) -> impl Iterator<Item = BearerSpec<'_>> {
        self.ue_profiles
            .iter()
            .flat_map(|ue| ue.apps.iter().map(move |app| (ue.ue_id, app)))
            .enumerate()
            .map(|(i, (ue_id, app))| BearerSpec {
                drb_id: DrbId(i as u32 + 1),
                ue_id,
                app,
            })
    }

    pub fn offered_load_bps(&self) -> f64 {
        self.bearers().map(|b| b.app.rate_bps()).sum()
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.cell.validate()?;
        if self.ue_profiles.is_empty() {
            return Err(Error::invalid("ue_profiles", "scenario has no UEs"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for ue in &self.ue_profiles {
            if ue.apps.is_empty() {
                return Err(Error::invalid(
                    "apps",
                    format!("UE {} has no applications", ue.ue_id),
                ));
            }
            if !seen.insert(ue.ue_id) {
                return Err(Error::invalid(
                    "ue",
                    format!("UE {} listed twice", ue.ue_id),
                ));
            }
            for app in &ue.apps {
                if app.payload_bits == 0 {
                    return Err(Error::invalid("payload_bytes", "must be positive"));
                }
                if app.interval_ms == 0 {
                    return Err(Error::invalid("interval_ms", "must be positive"));
                }
                if app.qci.deadline_ms == 0 {
                    return Err(Error::invalid("deadline_ms", "must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Replaces every UE's start offset with a uniform draw from the first
    /// second, reproducible from `seed`.
    pub fn randomize_offsets(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for ue in &mut self.ue_profiles {
            let offset = rng.random_range(0..START_SPREAD_MS);
            for app in &mut ue.apps {
                app.start_offset_ms = offset;
            }
        }
    }
}

/// How application start times are placed inside the first second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartMode {
    /// UE i (1-based) of n starts at floor((i-1) * 1000 / n) ms.
    #[default]
    Equal,
    /// Uniform draw per UE from the run seed.
    Random,
}

impl std::str::FromStr for StartMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "equal" => Ok(StartMode::Equal),
            "random" => Ok(StartMode::Random),
            other => Err(Error::invalid(
                "start-mode",
                format!("`{other}` is not one of equal, random"),
            )),
        }
    }
}

pub fn equal_offset(index: usize, n_ues: usize) -> Millis {
    (index as u64 * START_SPREAD_MS) / n_ues as u64
}

fn check_n_ues(n_ues: usize) -> Result<(), Error> {
    if n_ues == 0 {
        return Err(Error::invalid("ues", "at least one UE is required"));
    }
    Ok(())
}

fn assemble(name: &str, apps: Vec<AppProfile>) -> Scenario {
    let n = apps.len();
    let ue_profiles = apps
        .into_iter()
        .enumerate()
        .map(|(i, mut app)| {
            app.start_offset_ms = equal_offset(i, n);
            UeProfiles {
                ue_id: UeId(i as u32 + 1),
                apps: vec![app],
            }
        })
        .collect();
    Scenario {
        name: name.to_string(),
        ue_profiles,
        cell: CellConfig::default(),
    }
}

/// 266 600-bit crash-avoidance payload every 100 ms (2666 kbit/s).
pub fn crash_avoidance(qci: QciClass) -> AppProfile {
    AppProfile::new(
        "crash_avoidance",
        payload_from_rate(2666.0, 100.0),
        100,
        qci,
    )
}

/// One RT UE (QCI 7, 100 ms budget) and `n_ues - 1` NRT UEs (QCI 9,
/// 300 ms budget), all running the same crash-avoidance pattern.
pub fn build_homogeneous(n_ues: usize) -> Result<Scenario, Error> {
    check_n_ues(n_ues)?;
    let apps = (0..n_ues)
        .map(|i| {
            if i == 0 {
                crash_avoidance(QciClass::new(7, 100, true))
            } else {
                crash_avoidance(QciClass::new(9, 300, false))
            }
        })
        .collect();
    Ok(assemble("homogeneous", apps))
}

/// Three RT applications followed by `n_ues - 3` NRT bulk receivers.
/// With fewer than three UEs the RT profiles are assigned in order.
pub fn build_heterogeneous(n_ues: usize) -> Result<Scenario, Error> {
    check_n_ues(n_ues)?;
    let rt = [
        AppProfile::new(
            "voltage_control",
            payload_from_rate(625.0, 1000.0),
            1000,
            QciClass::new(5, 100, true),
        ),
        AppProfile::new(
            "crash_avoidance_qci7",
            payload_from_rate(500.0, 50.0),
            50,
            QciClass::new(7, 100, true),
        ),
        AppProfile {
            name: "crash_avoidance_qci9".into(),
            ..crash_avoidance(QciClass::new(9, 100, true))
        },
    ];
    // 3 MB chunk once per second
    let bulk = AppProfile::new(
        "bulk_transfer",
        3_000_000 * 8,
        1000,
        QciClass::new(9, 1000, false),
    );
    let apps = (0..n_ues)
        .map(|i| rt.get(i).cloned().unwrap_or_else(|| bulk.clone()))
        .collect();
    Ok(assemble("heterogeneous", apps))
}
