//! Append-only run manifests and delimited plot series.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{CaptureMode, Config, Variant};
use crate::control::ControlRecord;
use crate::error::{Error, Result};
use crate::harness::evaluation::{EvaluationReport, PairRecord};
use crate::harness::training::IterationStats;
use crate::io::{read_jsonl, JsonlWriter};
use crate::policy::EpisodeOutcome;

pub const MANIFEST_FORMAT: &str = "tethernet-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub command: String,
    pub root_seed: u64,
    pub variant: Variant,
    pub mode: Option<CaptureMode>,
    pub config: Config,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "kebab-case")]
pub enum ManifestRecord {
    Run(RunInfo),
    Episode {
        index: usize,
        iteration: Option<usize>,
        outcome: EpisodeOutcome,
    },
    Iteration(IterationStats),
    Pair(PairRecord),
    Summary { summary: serde_json::Value },
}

/// Manifest being written; the run record comes first.
pub struct ManifestWriter {
    out: JsonlWriter,
}

impl ManifestWriter {
    pub fn create(path: &Path, run: RunInfo) -> Result<Self> {
        let mut out = JsonlWriter::create(path, MANIFEST_FORMAT, MANIFEST_VERSION)?;
        out.write(&ManifestRecord::Run(run))?;
        Ok(Self { out })
    }

    pub fn append(&mut self, record: &ManifestRecord) -> Result<()> {
        self.out.write(record)
    }

    pub fn summary<T: Serialize>(&mut self, summary: &T) -> Result<()> {
        self.append(&ManifestRecord::Summary {
            summary: serde_json::to_value(summary)?,
        })
    }

    pub fn finish(self) -> Result<()> {
        self.out.finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub run: RunInfo,
    pub records: Vec<ManifestRecord>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let mut records: Vec<ManifestRecord> = read_jsonl(path, MANIFEST_FORMAT, MANIFEST_VERSION)?;
        if records.is_empty() {
            return Err(Error::Malformed {
                kind: MANIFEST_FORMAT.into(),
                reason: "missing run record".into(),
            });
        }
        match records.remove(0) {
            ManifestRecord::Run(run) => Ok(Self { run, records }),
            _ => Err(Error::Malformed {
                kind: MANIFEST_FORMAT.into(),
                reason: "first record is not the run record".into(),
            }),
        }
    }

    pub fn iterations(&self) -> Vec<IterationStats> {
        self.records
            .iter()
            .filter_map(|r| match r {
                ManifestRecord::Iteration(s) => Some(*s),
                _ => None,
            })
            .collect()
    }

    pub fn pairs(&self) -> Vec<&PairRecord> {
        self.records
            .iter()
            .filter_map(|r| match r {
                ManifestRecord::Pair(p) => Some(p),
                _ => None,
            })
            .collect()
    }
}

/// `time,mu,error` rows of the L2 tracking error at every command tick.
pub fn tracking_error_csv(log: &[ControlRecord]) -> String {
    let mut s = String::from("time,mu,error\n");
    for r in log {
        let _ = writeln!(s, "{},{},{}", r.time, r.mu + 1, r.tracking_error());
    }
    s
}

pub fn reward_history_csv(history: &[IterationStats]) -> String {
    let mut s = String::from("iteration,episodes,trailing_mean_reward,batch_mean_reward,success_fraction\n");
    for h in history {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            h.iteration, h.episodes, h.trailing_mean_reward, h.batch_mean_reward, h.success_fraction
        );
    }
    s
}

/// Per-pair fuel of the nominal and policy runs; rejected pairs are left out.
pub fn fuel_delta_csv(pairs: &[&PairRecord]) -> String {
    let mut s = String::from("index,fuel_nominal,fuel_policy,fuel_delta\n");
    for p in pairs {
        if let (Some(o), Some(d)) = (&p.policy, p.fuel_delta) {
            let _ = writeln!(s, "{},{},{},{}", p.index, p.nominal.total_fuel, o.total_fuel, d);
        }
    }
    s
}

pub fn report_pairs(report: &EvaluationReport) -> Vec<&PairRecord> {
    report.pairs.iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Measurement;
    use nalgebra::Vector3;

    #[test]
    fn manifest_round_trip_and_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let run = RunInfo {
            command: "train-policy".into(),
            root_seed: 3,
            variant: Variant::FourMu,
            mode: Some(CaptureMode::SurrogateCapture),
            config: Config::default(),
        };
        let mut w = ManifestWriter::create(&path, run.clone()).unwrap();
        w.summary(&serde_json::json!({"ok": true})).unwrap();
        w.finish().unwrap();
        let m = RunManifest::load(&path).unwrap();
        assert_eq!(m.run, run);
        assert_eq!(m.records.len(), 1);
        assert!(m.iterations().is_empty());
    }

    #[test]
    fn csv_headers_and_rows() {
        let r = ControlRecord {
            time: 0.5,
            mu: 0,
            desired: Vector3::new(3.0, 4.0, 0.0),
            measured: Measurement {
                position: Vector3::zeros(),
                velocity: Vector3::zeros(),
            },
            position: Vector3::zeros(),
            thrust: Vector3::zeros(),
            fuel: 0.0,
        };
        assert_eq!(tracking_error_csv(&[r]), "time,mu,error\n0.5,1,5\n");
        assert_eq!(reward_history_csv(&[]).lines().count(), 1);
    }
}
