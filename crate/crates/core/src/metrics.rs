/*
  Copyright 2026 The kt-core Authors

  Licensed under the Apache License, Version 2.0 (the "License");
  you may not use this file except in compliance with the License.
  You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

  Unless required by applicable law or agreed to in writing, software
  distributed under the License is distributed on an "AS IS" BASIS,
  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
  See the License for the specific language governing permissions and
  limitations under the License.
*/

//! Evaluation statistics: Wilcoxon signed-rank test, paired duration
//! overhead, and per-session result logs.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::playback::{LoadedTrajectory, PlaybackReport};
use crate::scene::{Scene, SceneError};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("all paired differences are zero")]
    Degenerate,
    #[error("{n} nonzero differences is outside the critical-value table for alpha {alpha}")]
    InsufficientData { n: usize, alpha: f64 },
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("results log {path}: {reason}")]
    Log { path: String, reason: String },
}

/// Smallest table entry is n = 6, the minimum sample for the test.
pub const MIN_PAIRS: usize = 6;

/// One-tailed critical values for n = 6..=25.
const CRITICAL_05: [u32; 20] = [2, 3, 5, 8, 10, 13, 17, 21, 25, 30, 35, 41, 47, 53, 60, 67, 75, 83, 91, 100];
/// One-tailed critical values for n = 7..=25; none exists for n = 6.
const CRITICAL_01: [u32; 19] = [0, 1, 3, 5, 7, 9, 12, 15, 19, 23, 27, 32, 37, 43, 49, 55, 62, 69, 76];

/// Critical value W_c for `n` nonzero differences, if tabulated.
pub fn critical_value(n: usize, alpha: f64) -> Result<u32, MetricsError> {
    let (table, first) = if alpha == 0.05 {
        (&CRITICAL_05[..], 6)
    } else if alpha == 0.01 {
        (&CRITICAL_01[..], 7)
    } else {
        return Err(MetricsError::Input(format!(
            "alpha must be 0.05 or 0.01, got {alpha}"
        )));
    };
    n.checked_sub(first)
        .and_then(|i| table.get(i))
        .copied()
        .ok_or(MetricsError::InsufficientData { n, alpha })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    pub subject_id: String,
    pub value_c1: f64,
    pub value_c2: f64,
}

impl PairedSample {
    pub fn new(subject_id: impl Into<String>, value_c1: f64, value_c2: f64) -> Self {
        PairedSample {
            subject_id: subject_id.into(),
            value_c1,
            value_c2,
        }
    }

    pub fn difference(&self) -> f64 {
        self.value_c2 - self.value_c1
    }
}

fn check_finite(samples: &[PairedSample]) -> Result<(), MetricsError> {
    match samples
        .iter()
        .find(|s| !(s.value_c1.is_finite() && s.value_c2.is_finite()))
    {
        Some(s) => Err(MetricsError::Input(format!("non-finite value for '{}'", s.subject_id))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedRanks {
    pub w_plus: f64,
    pub w_minus: f64,
    /// nonzero differences
    pub n: usize,
}

impl SignedRanks {
    pub fn w(&self) -> f64 {
        self.w_plus.min(self.w_minus)
    }
}

/// Rank sums of positive and negative differences. Zero differences are
/// dropped; tied magnitudes share their average rank.
pub fn signed_ranks(differences: &[f64]) -> SignedRanks {
    let mut nonzero: Vec<f64> = differences.iter().copied().filter(|d| *d != 0.0).collect();
    nonzero.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut ranks = SignedRanks {
        w_plus: 0.0,
        w_minus: 0.0,
        n: nonzero.len(),
    };
    let mut i = 0;
    while i < nonzero.len() {
        let mut j = i;
        while j + 1 < nonzero.len() && nonzero[j + 1].abs() == nonzero[i].abs() {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let rank = (i + j + 2) as f64 / 2.0;
        for d in &nonzero[i..=j] {
            if *d > 0.0 {
                ranks.w_plus += rank;
            } else {
                ranks.w_minus += rank;
            }
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WilcoxonResult {
    pub w: f64,
    pub w_critical: u32,
    pub n: usize,
    pub alpha: f64,
    pub reject: bool,
}

impl fmt::Display for WilcoxonResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Wilcoxon signed-rank (one-tailed, alpha={}): n={} W={} W_c={} -> {}",
            self.alpha,
            self.n,
            self.w,
            self.w_critical,
            if self.reject { "reject H0" } else { "do not reject H0" }
        )
    }
}

/// One-tailed Wilcoxon signed-rank test on the paired differences c2 − c1.
pub fn wilcoxon_signed_rank(samples: &[PairedSample], alpha: f64) -> Result<WilcoxonResult, MetricsError> {
    check_finite(samples)?;
    let differences: Vec<f64> = samples.iter().map(PairedSample::difference).collect();
    let ranks = signed_ranks(&differences);
    if ranks.n == 0 {
        return Err(MetricsError::Degenerate);
    }
    let w_critical = critical_value(ranks.n, alpha)?;
    let w = ranks.w();
    Ok(WilcoxonResult {
        w,
        w_critical,
        n: ranks.n,
        alpha,
        reject: w <= w_critical as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Overhead {
    /// mean of c2 − c1
    pub mean_diff: f64,
    /// mean of (c2 − c1) / c1
    pub mean_relative: f64,
}

pub fn duration_overhead(samples: &[PairedSample]) -> Result<Overhead, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::Input("no samples".into()));
    }
    check_finite(samples)?;
    if let Some(s) = samples.iter().find(|s| s.value_c1 <= 0.0) {
        return Err(MetricsError::Input(format!(
            "c1 duration for '{}' must be positive, got {}",
            s.subject_id, s.value_c1
        )));
    }
    let n = samples.len() as f64;
    Ok(Overhead {
        mean_diff: samples.iter().map(PairedSample::difference).sum::<f64>() / n,
        mean_relative: samples.iter().map(|s| s.difference() / s.value_c1).sum::<f64>() / n,
    })
}

/// Paired t statistic of c2 − c1, with n − 1 degrees of freedom.
pub fn paired_t_statistic(samples: &[PairedSample]) -> Result<f64, MetricsError> {
    if samples.len() < 2 {
        return Err(MetricsError::Input("need at least two pairs".into()));
    }
    check_finite(samples)?;
    let d: Vec<f64> = samples.iter().map(PairedSample::difference).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Err(MetricsError::Degenerate);
    }
    Ok(mean / (var / n).sqrt())
}

/// One line of the results log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
    pub duration_s: f64,
    pub states: usize,
    pub cubes_stacked: usize,
}

impl SessionRecord {
    pub fn with_subject(mut self, subject_id: impl Into<String>, condition: impl Into<String>) -> Self {
        self.subject_id = Some(subject_id.into());
        self.condition = Some(condition.into());
        self
    }
}

/// Summarizes a replayed demonstration. The trajectory must come from a
/// finalized file and the playback must have run with a scene.
pub fn session_report(
    trajectory: &LoadedTrajectory,
    playback: &PlaybackReport,
    scene: &Scene,
) -> Result<SessionRecord, MetricsError> {
    if !trajectory.finalized {
        return Err(MetricsError::Input(format!(
            "session '{}' was not finalized",
            trajectory.trajectory.session_id
        )));
    }
    if playback.steps.len() != trajectory.trajectory.states.len() {
        return Err(MetricsError::Input("playback report does not match the trajectory".into()));
    }
    Ok(SessionRecord {
        session_id: trajectory.trajectory.session_id.clone(),
        subject_id: None,
        condition: None,
        duration_s: trajectory.trajectory.duration_ms() as f64 / 1000.0,
        states: trajectory.trajectory.states.len(),
        cubes_stacked: scene.count_stacked()?,
    })
}

pub fn append_record(path: impl AsRef<Path>, record: &SessionRecord) -> Result<(), MetricsError> {
    let path = path.as_ref();
    let log_err = |reason: String| MetricsError::Log {
        path: path.display().to_string(),
        reason,
    };
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| log_err(e.to_string()))?;
    let line = serde_json::to_string(record).map_err(|e| log_err(e.to_string()))?;
    writeln!(file, "{line}").map_err(|e| log_err(e.to_string()))
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<SessionRecord>, MetricsError> {
    let path = path.as_ref();
    let log_err = |reason: String| MetricsError::Log {
        path: path.display().to_string(),
        reason,
    };
    let file = std::fs::File::open(path).map_err(|e| log_err(e.to_string()))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| log_err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| log_err(format!("line {}: {e}", i + 1)))?);
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// stacked-count histogram per condition
    Histogram,
    /// C1 vs C2 per subject: Wilcoxon on stacked counts, duration overhead
    Paired,
}

/// Condition labels compared in paired mode.
pub const CONDITION_1: &str = "C1";
pub const CONDITION_2: &str = "C2";

#[derive(Debug, Clone, PartialEq)]
pub enum Evaluation {
    Histogram(BTreeMap<String, [usize; 5]>),
    Paired {
        pairs: usize,
        stacking: Result<WilcoxonResult, String>,
        durations: Overhead,
    },
}

impl fmt::Display for Evaluation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Evaluation::Histogram(by_condition) => {
                writeln!(f, "{:<12} {:>4} {:>4} {:>4} {:>4} {:>4}", "condition", 0, 1, 2, 3, 4)?;
                for (condition, counts) in by_condition {
                    write!(f, "{condition:<12}")?;
                    for c in counts {
                        write!(f, " {c:>4}")?;
                    }
                    writeln!(f)?;
                }
                Ok(())
            }
            Evaluation::Paired {
                pairs,
                stacking,
                durations,
            } => {
                writeln!(f, "paired subjects: {pairs}")?;
                match stacking {
                    Ok(w) => writeln!(f, "{w}")?,
                    Err(e) => writeln!(f, "Wilcoxon signed-rank: {e}")?,
                }
                writeln!(
                    f,
                    "duration C2-C1: mean {:.2} s, mean overhead {:.1}%",
                    durations.mean_diff,
                    durations.mean_relative * 100.0
                )
            }
        }
    }
}

const STACK_BINS: usize = 5;

pub fn evaluate(records: &[SessionRecord], mode: EvalMode, alpha: f64) -> Result<Evaluation, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Input("results log is empty".into()));
    }
    match mode {
        EvalMode::Histogram => {
            let mut by_condition: BTreeMap<String, [usize; STACK_BINS]> = BTreeMap::new();
            for r in records {
                let bin = r.cubes_stacked.min(STACK_BINS - 1);
                let key = r.condition.clone().unwrap_or_else(|| "all".into());
                by_condition.entry(key).or_default()[bin] += 1;
            }
            Ok(Evaluation::Histogram(by_condition))
        }
        EvalMode::Paired => {
            let (stacks, durations) = pair_records(records)?;
            Ok(Evaluation::Paired {
                pairs: stacks.len(),
                stacking: wilcoxon_signed_rank(&stacks, alpha).map_err(|e| e.to_string()),
                durations: duration_overhead(&durations)?,
            })
        }
    }
}

/// Pairs C1 and C2 records by subject. Each subject needs exactly one of
/// each.
fn pair_records(records: &[SessionRecord]) -> Result<(Vec<PairedSample>, Vec<PairedSample>), MetricsError> {
    let mut by_subject: BTreeMap<&str, (Option<&SessionRecord>, Option<&SessionRecord>)> = BTreeMap::new();
    for r in records {
        let subject = r
            .subject_id
            .as_deref()
            .ok_or_else(|| MetricsError::Input(format!("record '{}' has no subject_id", r.session_id)))?;
        let slot = by_subject.entry(subject).or_default();
        let cell = match r.condition.as_deref() {
            Some(CONDITION_1) => &mut slot.0,
            Some(CONDITION_2) => &mut slot.1,
            other => {
                return Err(MetricsError::Input(format!(
                    "record '{}' has condition {other:?}; expected {CONDITION_1} or {CONDITION_2}",
                    r.session_id
                )))
            }
        };
        if cell.replace(r).is_some() {
            return Err(MetricsError::Input(format!(
                "subject '{subject}' has more than one record for a condition"
            )));
        }
    }
    let unpaired: Vec<&str> = by_subject
        .iter()
        .filter(|(_, (a, b))| a.is_none() || b.is_none())
        .map(|(s, _)| *s)
        .collect();
    if !unpaired.is_empty() {
        return Err(MetricsError::Input(format!("unpaired subjects: {}", unpaired.join(", "))));
    }
    let mut stacks = Vec::new();
    let mut durations = Vec::new();
    for (subject, (c1, c2)) in by_subject {
        let (c1, c2) = (c1.expect("paired"), c2.expect("paired"));
        stacks.push(PairedSample::new(subject, c1.cubes_stacked as f64, c2.cubes_stacked as f64));
        durations.push(PairedSample::new(subject, c1.duration_s, c2.duration_s));
    }
    Ok((stacks, durations))
}
