//! Success criteria, batch evaluation and metric aggregation.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::log::{EpisodeStatus, TrajectoryLog};
use super::policy::PolicySpec;
use super::randomize::RandomizationRanges;
use super::rollout::{run_episode, Episode, RolloutConfig};
use crate::control::CommandSample;
use crate::error::{Error, Result};
use crate::reward::{power, tracking_error};
use crate::terrain::{TerrainConfig, TerrainKind, TerrainSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriteriaMode {
    /// Displacement must exceed a fixed distance.
    FixedDistance,
    /// Displacement must exceed half of `speed * duration`.
    HalfExpected,
}

impl FromStr for CriteriaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" | "fixed_distance" => Ok(CriteriaMode::FixedDistance),
            "half" | "half_expected" => Ok(CriteriaMode::HalfExpected),
            _ => Err(Error::InvalidArgument(format!(
                "unknown criteria `{s}` (expected fixed or half_expected)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessCriteria {
    pub mode: CriteriaMode,
    /// s
    pub duration: f64,
    /// m, fixed mode only.
    pub min_distance: f64,
    /// Commanded speed, m/s.
    pub speed: f64,
}

impl SuccessCriteria {
    pub fn new(mode: CriteriaMode, duration: f64, min_distance: f64, speed: f64) -> Result<Self> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
        }
        Ok(SuccessCriteria {
            mode,
            duration,
            min_distance,
            speed,
        })
    }

    /// Criteria for a log, taking duration and speed from its metadata.
    pub fn for_log(mode: CriteriaMode, min_distance: f64, log: &TrajectoryLog) -> Result<Self> {
        Self::new(mode, log.meta.duration, min_distance, log.meta.command.speed())
    }

    /// Displacement a successful episode must exceed.
    pub fn threshold(&self) -> f64 {
        match self.mode {
            CriteriaMode::FixedDistance => self.min_distance,
            CriteriaMode::HalfExpected => 0.5 * self.speed * self.duration,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub success: bool,
    pub survival: bool,
}

/// No base contact anywhere in the log and no fall, exit or policy failure.
pub fn survived(log: &TrajectoryLog) -> bool {
    !log.any_base_contact()
        && !matches!(
            log.meta.status,
            EpisodeStatus::BaseContact
                | EpisodeStatus::Fell
                | EpisodeStatus::OutOfBounds
                | EpisodeStatus::PolicyError(_)
        )
}

/// Success additionally needs the final planar displacement from the spawn
/// point to exceed the criteria threshold.
pub fn evaluate_success(log: &TrajectoryLog, criteria: &SuccessCriteria) -> Verdict {
    let survival = survived(log);
    Verdict {
        survival,
        success: survival && log.displacement() > criteria.threshold(),
    }
}

/// Aggregation key: terrain name, difficulty level and commanded speed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupKey {
    pub terrain: String,
    pub level: u8,
    pub speed: f64,
}

impl GroupKey {
    pub fn of(log: &TrajectoryLog) -> Self {
        GroupKey {
            terrain: log.meta.terrain.kind.to_string(),
            level: log.meta.terrain.level,
            speed: log.meta.command.speed(),
        }
    }
}

impl Eq for GroupKey {}

impl Ord for GroupKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.terrain
            .cmp(&other.terrain)
            .then(self.level.cmp(&other.level))
            .then(self.speed.total_cmp(&other.speed))
    }
}

impl PartialOrd for GroupKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// What aggregation keeps of one episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub verdict: Verdict,
    /// `None` for a log without steps.
    pub tracking_error: Option<f64>,
    pub power: Option<f64>,
}

impl EpisodeOutcome {
    pub fn from_log(log: &TrajectoryLog, criteria: &SuccessCriteria) -> Self {
        EpisodeOutcome {
            verdict: evaluate_success(log, criteria),
            tracking_error: tracking_error(&log.steps).ok(),
            power: power(&log.steps).ok(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub key: GroupKey,
    pub n: usize,
    /// Fractions in [0, 1].
    pub success_rate: f64,
    pub survival_rate: f64,
    pub tracking_error: Option<f64>,
    pub power: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub groups: Vec<GroupMetrics>,
    /// Mean of the per-group rates; `None` without any non-empty group.
    pub overall_success: Option<f64>,
    pub overall_survival: Option<f64>,
    pub warnings: Vec<String>,
}

/// Mean of `values` summed in sorted order, so the result does not depend on
/// input order.
fn sorted_mean(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

fn rate(outcomes: &[EpisodeOutcome], pick: impl Fn(&Verdict) -> bool) -> f64 {
    outcomes.iter().filter(|o| pick(&o.verdict)).count() as f64 / outcomes.len() as f64
}

/// Per-group means plus the overall mean of group means. Empty groups are
/// skipped and reported in `warnings`.
pub fn aggregate(groups: &[(GroupKey, Vec<EpisodeOutcome>)]) -> MetricsTable {
    let mut table = MetricsTable::default();
    for (key, outcomes) in groups {
        if outcomes.is_empty() {
            let msg = format!("group {}/{}/{} has no episodes, skipped", key.terrain, key.level, key.speed);
            log::warn!("{msg}");
            table.warnings.push(msg);
            continue;
        }
        table.groups.push(GroupMetrics {
            key: key.clone(),
            n: outcomes.len(),
            success_rate: rate(outcomes, |v| v.success),
            survival_rate: rate(outcomes, |v| v.survival),
            tracking_error: sorted_mean(outcomes.iter().filter_map(|o| o.tracking_error).collect()),
            power: sorted_mean(outcomes.iter().filter_map(|o| o.power).collect()),
        });
    }
    table.groups.sort_by(|a, b| a.key.cmp(&b.key));
    table.overall_success = sorted_mean(table.groups.iter().map(|g| g.success_rate).collect());
    table.overall_survival = sorted_mean(table.groups.iter().map(|g| g.survival_rate).collect());
    table
}

/// Collects outcomes by group key.
pub fn group_outcomes(items: impl IntoIterator<Item = (GroupKey, EpisodeOutcome)>) -> Vec<(GroupKey, Vec<EpisodeOutcome>)> {
    let mut map: BTreeMap<GroupKey, Vec<EpisodeOutcome>> = BTreeMap::new();
    for (k, o) in items {
        map.entry(k).or_default().push(o);
    }
    map.into_iter().collect()
}

pub const TSV_HEADER: &str = "terrain\tlevel\tvelocity\tn\tsuccess_pct\tsurvival_pct\ttracking_error\tpower";

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "nan".to_owned(), |x| format!("{x:.digits$}"))
}

impl MetricsTable {
    /// Tab-separated table, one row per group and a final `overall` row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(TSV_HEADER);
        out.push('\n');
        for g in &self.groups {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.2}\t{}\t{:.1}\t{:.1}\t{}\t{}",
                g.key.terrain,
                g.key.level,
                g.key.speed,
                g.n,
                100.0 * g.success_rate,
                100.0 * g.survival_rate,
                opt(g.tracking_error, 4),
                opt(g.power, 2),
            );
        }
        let n: usize = self.groups.iter().map(|g| g.n).sum();
        let _ = writeln!(
            out,
            "overall\t-\t-\t{n}\t{}\t{}\t{}\t{}",
            opt(self.overall_success.map(|v| 100.0 * v), 1),
            opt(self.overall_survival.map(|v| 100.0 * v), 1),
            opt(sorted_mean(self.groups.iter().filter_map(|g| g.tracking_error).collect()), 4),
            opt(sorted_mean(self.groups.iter().filter_map(|g| g.power).collect()), 2),
        );
        out
    }
}

/// A batch of simulated episodes over terrain kinds, levels and speeds.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalPlan {
    pub terrains: Vec<TerrainKind>,
    pub levels: Vec<u8>,
    pub speeds: Vec<f64>,
    /// Episodes per group.
    pub n: usize,
    pub duration: f64,
    pub policy: PolicySpec,
    pub seed: u64,
    /// Draw domain randomization per episode; nominal parameters otherwise.
    pub randomize: bool,
    pub ranges: RandomizationRanges,
    pub criteria: CriteriaMode,
    pub min_distance: f64,
    /// Lateral terrain width, m.
    pub terrain_width: f64,
    pub terrain: TerrainConfig,
    pub rollout: RolloutConfig,
}

impl EvalPlan {
    pub fn new(terrains: Vec<TerrainKind>, levels: Vec<u8>, speeds: Vec<f64>, n: usize) -> Self {
        EvalPlan {
            terrains,
            levels,
            speeds,
            n,
            duration: 20.0,
            policy: PolicySpec::Trot,
            seed: 0,
            randomize: true,
            ranges: RandomizationRanges::default(),
            criteria: CriteriaMode::FixedDistance,
            min_distance: 4.0,
            terrain_width: 8.0,
            terrain: TerrainConfig::default(),
            rollout: RolloutConfig::default(),
        }
    }

    /// Terrain length: the expected run plus slack on both sides of the
    /// centered spawn.
    pub fn terrain_length(&self, speed: f64) -> f64 {
        2.0 * (speed * self.duration * 1.25 + 3.0)
    }

    /// Every episode of the plan, in a fixed order.
    pub fn episodes(&self) -> Vec<Episode> {
        let mut out = Vec::with_capacity(self.terrains.len() * self.levels.len() * self.speeds.len() * self.n);
        for (ti, &kind) in self.terrains.iter().enumerate() {
            for &level in &self.levels {
                for (si, &speed) in self.speeds.iter().enumerate() {
                    for i in 0..self.n {
                        let seed = mix(&[self.seed, ti as u64, u64::from(level), si as u64, i as u64]);
                        let spec = TerrainSpec::new(kind, level, mix(&[seed, 1]))
                            .with_extent([self.terrain_length(speed), self.terrain_width]);
                        let ep = Episode::new(spec, CommandSample::forward(speed), self.duration, seed);
                        out.push(if self.randomize { ep.randomized(&self.ranges) } else { ep });
                    }
                }
            }
        }
        out
    }
}

/// SplitMix64 over a sequence of words.
fn mix(words: &[u64]) -> u64 {
    let mut h = 0x243f_6a88_85a3_08d3u64;
    for &w in words {
        h = h.wrapping_add(w).wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

/// Runs every episode of `plan` in parallel and aggregates the outcomes.
/// With `log_dir`, each trajectory is also written there as
/// `<terrain>_l<level>_v<speed>_<index>.jsonl`.
pub fn run_eval(plan: &EvalPlan, log_dir: Option<&Path>) -> Result<MetricsTable> {
    if plan.n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    for s in &plan.speeds {
        if !(*s >= 0.0) || !s.is_finite() {
            return Err(Error::InvalidArgument(format!("speed must be non-negative, got {s}")));
        }
    }
    if let Some(dir) = log_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let episodes = plan.episodes();
    let results: Vec<(GroupKey, EpisodeOutcome)> = episodes
        .par_iter()
        .enumerate()
        .map(|(idx, ep)| {
            let mut policy = plan.policy.build(plan.rollout.stepper.dt);
            let log = run_episode(ep, policy.as_mut(), &plan.terrain, &plan.rollout)?;
            if let Some(dir) = log_dir {
                let name = format!(
                    "{}_l{}_v{:.2}_{:05}.jsonl",
                    ep.terrain.kind,
                    ep.terrain.level,
                    ep.command.speed(),
                    idx
                );
                log.save(dir.join(name))?;
            }
            let criteria = SuccessCriteria::for_log(plan.criteria, plan.min_distance, &log)?;
            Ok((GroupKey::of(&log), EpisodeOutcome::from_log(&log, &criteria)))
        })
        .collect::<Result<_>>()?;
    let mut groups = group_outcomes(results);
    // Keep requested-but-empty groups visible.
    for &kind in &plan.terrains {
        for &level in &plan.levels {
            for &speed in &plan.speeds {
                let key = GroupKey {
                    terrain: kind.to_string(),
                    level,
                    speed,
                };
                if !groups.iter().any(|(k, _)| *k == key) {
                    groups.push((key, Vec::new()));
                }
            }
        }
    }
    Ok(aggregate(&groups))
}

/// Every `*.jsonl` file directly inside `dir`, sorted by name.
pub fn log_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "jsonl") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Evaluates externally produced logs under the same protocol.
pub fn evaluate_logs(paths: &[PathBuf], mode: CriteriaMode, min_distance: f64) -> Result<MetricsTable> {
    let results: Vec<(GroupKey, EpisodeOutcome)> = paths
        .par_iter()
        .map(|p| {
            let log = TrajectoryLog::ingest(p)?;
            let criteria = SuccessCriteria::for_log(mode, min_distance, &log)?;
            Ok((GroupKey::of(&log), EpisodeOutcome::from_log(&log, &criteria)))
        })
        .collect::<Result<_>>()?;
    Ok(aggregate(&group_outcomes(results)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(success: bool, survival: bool) -> EpisodeOutcome {
        EpisodeOutcome {
            verdict: Verdict { success, survival },
            tracking_error: Some(0.1),
            power: Some(10.0),
        }
    }

    fn key(terrain: &str) -> GroupKey {
        GroupKey {
            terrain: terrain.into(),
            level: 0,
            speed: 1.0,
        }
    }

    #[test]
    fn rates_and_overall() {
        let table = aggregate(&[
            (key("a"), vec![outcome(true, true), outcome(false, true)]),
            (key("b"), vec![outcome(true, true); 3]),
            (key("c"), vec![outcome(false, false)]),
        ]);
        assert_eq!(table.groups[0].success_rate, 0.5);
        assert_eq!(table.groups[1].success_rate, 1.0);
        assert_eq!(table.groups[2].survival_rate, 0.0);
        assert_eq!(table.overall_success, Some(0.5));
    }

    #[test]
    fn empty_group_warns() {
        let table = aggregate(&[(key("a"), vec![outcome(true, true)]), (key("b"), vec![])]);
        assert_eq!(table.groups.len(), 1);
        assert_eq!(table.warnings.len(), 1);
        assert_eq!(table.overall_success, Some(1.0));
    }

    #[test]
    fn tsv_shape() {
        let table = aggregate(&[(key("stones"), vec![outcome(true, true)])]);
        let tsv = table.to_tsv();
        let lines: Vec<_> = tsv.lines().collect();
        assert_eq!(lines[0], TSV_HEADER);
        assert_eq!(lines[1], "stones\t0\t1.00\t1\t100.0\t100.0\t0.1000\t10.00");
        assert!(lines[2].starts_with("overall\t"));
        assert!(lines.iter().all(|l| l.split('\t').count() == 8));
    }

    #[test]
    fn criteria_parse_and_threshold() {
        assert_eq!("half_expected".parse::<CriteriaMode>().unwrap(), CriteriaMode::HalfExpected);
        let c = SuccessCriteria::new(CriteriaMode::HalfExpected, 20.0, 4.0, 0.4).unwrap();
        assert!((c.threshold() - 4.0).abs() < 1e-12);
        assert!(SuccessCriteria::new(CriteriaMode::FixedDistance, 0.0, 4.0, 1.0).is_err());
    }

    #[test]
    fn episode_seeds_distinct() {
        let plan = EvalPlan::new(vec![TerrainKind::Atomic(crate::terrain::AtomicKind::Smooth)], vec![0, 1], vec![0.5, 1.0], 5);
        let eps = plan.episodes();
        assert_eq!(eps.len(), 20);
        let mut seeds: Vec<u64> = eps.iter().map(|e| e.seed).collect();
        seeds.sort();
        seeds.dedup();
        assert_eq!(seeds.len(), 20);
        assert_eq!(plan.episodes(), eps);
    }
}
