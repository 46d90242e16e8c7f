//! Population segmentation into rate groups under a forecast-error limit.
//!
//! Each round builds the optimal-group CV curve of the consumers not yet
//! assigned, takes the smallest size whose minimum-rate group meets the CV
//! threshold, assigns that group and removes it. Rounds repeat until everyone
//! is assigned or no size qualifies.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost_model::{consumer_stats, group_lambda, group_lambda_of};
use crate::error::{Error, Result};
use crate::forecast::{CurveKind, CvCurve, CvPoint, GroupEvaluator};
use crate::fractional_solver::DEFAULT_GAMMA;
use crate::grid::log_spaced;
use crate::ingest::write_atomic;
use crate::types::{CostStats, Dataset, SelectionVector, Window};

/// What happens to consumers left over when no group size meets the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeftoverPolicy {
    /// Serve all of them as one final group that misses the threshold.
    #[default]
    Aggregate,
    /// Leave them unserved.
    Drop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentGroup {
    /// 1-based.
    pub round: usize,
    /// Over the original population indexing.
    pub members: SelectionVector,
    pub size: usize,
    /// Cents/kWh over the training window.
    pub rate: f64,
    /// Validate-window CV, percent.
    pub cv: f64,
    pub threshold_met: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub groups: Vec<SegmentGroup>,
    pub cv_threshold: f64,
    pub leftover_policy: LeftoverPolicy,
    /// Consumers not assigned to any group (drop policy only).
    pub unserved: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentConfig {
    pub cv_threshold: f64,
    /// Candidate sizes; `None` uses [`DEFAULT_GRID_POINTS`] log-spaced sizes
    /// from 10 to the remaining population.
    pub size_grid: Option<Vec<usize>>,
    pub gamma: f64,
    pub leftover_policy: LeftoverPolicy,
}

impl SegmentConfig {
    pub fn new(cv_threshold: f64) -> Self {
        Self {
            cv_threshold,
            size_grid: None,
            gamma: DEFAULT_GAMMA,
            leftover_policy: LeftoverPolicy::Aggregate,
        }
    }
}

pub const DEFAULT_GRID_POINTS: usize = 20;
pub const DEFAULT_GRID_MIN: usize = 10;

/// Smallest optimal-group size whose CV is at most `cv_threshold`.
pub fn min_group_size(curve: &CvCurve, cv_threshold: f64) -> Option<usize> {
    curve
        .of_kind(CurveKind::Optimal)
        .filter(|p| p.cv <= cv_threshold)
        .map(|p| p.m)
        .min()
}

fn round_grid(config: &SegmentConfig, remaining: usize) -> Vec<usize> {
    let mut grid = match &config.size_grid {
        Some(g) => g.iter().map(|&m| m.min(remaining)).filter(|&m| m >= 1).collect(),
        None => log_spaced(DEFAULT_GRID_MIN.min(remaining), remaining, DEFAULT_GRID_POINTS),
    };
    grid.sort_unstable();
    grid.dedup();
    grid
}

struct Candidate {
    m: usize,
    cv: f64,
    members: Vec<usize>,
}

fn evaluate(
    eval: &GroupEvaluator,
    sub_stats: &CostStats,
    remaining: &[usize],
    sizes: &[usize],
    gamma: f64,
) -> Result<Vec<Candidate>> {
    sizes
        .par_iter()
        .map(|&m| {
            let (point, members) =
                crate::forecast::curve_optimal_point(eval, sub_stats, remaining, m, gamma)?;
            Ok(Candidate {
                m,
                cv: point.cv,
                members,
            })
        })
        .collect()
}

/// Segments the whole population.
pub fn segment_population(dataset: &Dataset, config: &SegmentConfig) -> Result<SegmentationResult> {
    if matches!(&config.size_grid, Some(g) if g.is_empty()) {
        return Err(Error::invalid("size grid is empty"));
    }
    if !(config.gamma.is_finite() && config.gamma > 0.0) {
        return Err(Error::invalid(format!("gamma must be > 0, got {}", config.gamma)));
    }
    if !(config.cv_threshold.is_finite() && config.cv_threshold >= 0.0) {
        return Err(Error::invalid("cv threshold must be >= 0"));
    }
    let eval = GroupEvaluator::new(dataset)?;
    let stats = consumer_stats(dataset, Window::Train)?;
    let n = dataset.len();
    let chunk = (2 * rayon::current_num_threads()).max(4);

    let mut remaining: Vec<usize> = (0..n).collect();
    let mut groups = Vec::new();
    let mut unserved = Vec::new();

    while !remaining.is_empty() {
        let round = groups.len() + 1;
        let sub_stats = stats.subset(&remaining)?;
        let grid = round_grid(config, remaining.len());
        if grid.is_empty() {
            return Err(Error::invalid("size grid is empty"));
        }
        let coarse = evaluate(&eval, &sub_stats, &remaining, &grid, config.gamma)?;
        let curve = CvCurve {
            points: coarse
                .iter()
                .map(|c| CvPoint {
                    m: c.m,
                    kind: CurveKind::Optimal,
                    cv: c.cv,
                    ci: None,
                })
                .collect(),
        };

        let Some(m_coarse) = min_group_size(&curve, config.cv_threshold) else {
            match config.leftover_policy {
                LeftoverPolicy::Aggregate => {
                    let cv = match coarse.iter().find(|c| c.m == remaining.len()) {
                        Some(c) => c.cv,
                        None => eval.cv(&remaining)?,
                    };
                    groups.push(SegmentGroup {
                        round,
                        rate: group_lambda_of(&stats, &remaining),
                        members: SelectionVector::from_indices(n, &remaining)?,
                        size: remaining.len(),
                        cv,
                        threshold_met: false,
                    });
                }
                LeftoverPolicy::Drop => unserved = std::mem::take(&mut remaining),
            }
            break;
        };

        let pos = grid.iter().position(|&m| m == m_coarse).expect("grid member");
        let mut chosen = coarse.into_iter().nth(pos).expect("evaluated");
        if pos > 0 {
            // refine within the bracketing pair
            let sizes: Vec<usize> = (grid[pos - 1] + 1..m_coarse).collect();
            for block in sizes.chunks(chunk) {
                let found = evaluate(&eval, &sub_stats, &remaining, block, config.gamma)?
                    .into_iter()
                    .find(|c| c.cv <= config.cv_threshold);
                if let Some(c) = found {
                    chosen = c;
                    break;
                }
            }
        }

        groups.push(SegmentGroup {
            round,
            rate: group_lambda_of(&stats, &chosen.members),
            members: SelectionVector::from_indices(n, &chosen.members)?,
            size: chosen.m,
            cv: chosen.cv,
            threshold_met: true,
        });
        let taken = &groups.last().expect("just pushed").members;
        remaining.retain(|i| !taken.contains(*i));
    }

    Ok(SegmentationResult {
        groups,
        cv_threshold: config.cv_threshold,
        leftover_policy: config.leftover_policy,
        unserved,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// A later threshold-met group is cheaper than the one before it.
    RateOrder {
        round: usize,
        next_round: usize,
        rate: f64,
        next_rate: f64,
        magnitude: f64,
    },
    /// A consumer of group `from_round` would lower the rate of the earlier
    /// group `into_round` by joining it.
    Deviation {
        consumer: usize,
        from_round: usize,
        into_round: usize,
        group_rate: f64,
        joined_rate: f64,
        magnitude: f64,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AuditReport {
    pub pairs_checked: usize,
    pub moves_checked: usize,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks rate ordering and single-consumer deviations between every
/// consecutive pair of threshold-met groups, recomputing rates from `stats`.
pub fn stability_audit(result: &SegmentationResult, stats: &CostStats, gamma: f64) -> AuditReport {
    let slack = 2.0 * gamma;
    let met: Vec<&SegmentGroup> = result.groups.iter().filter(|g| g.threshold_met).collect();
    let mut report = AuditReport::default();
    for pair in met.windows(2) {
        let (g, next) = (pair[0], pair[1]);
        report.pairs_checked += 1;
        let rate = group_lambda(stats, &g.members);
        let next_rate = group_lambda(stats, &next.members);
        if rate > next_rate + slack {
            report.violations.push(Violation::RateOrder {
                round: g.round,
                next_round: next.round,
                rate,
                next_rate,
                magnitude: rate - next_rate,
            });
        }
        let (t0, w0) = g
            .members
            .indices()
            .iter()
            .fold((0.0, 0.0), |(t, w), &i| (t + stats.t()[i], w + stats.w()[i]));
        for j in next.members.indices() {
            report.moves_checked += 1;
            let joined = (t0 + stats.t()[j]) / (w0 + stats.w()[j]);
            if joined < rate - slack {
                report.violations.push(Violation::Deviation {
                    consumer: j,
                    from_round: next.round,
                    into_round: g.round,
                    group_rate: rate,
                    joined_rate: joined,
                    magnitude: rate - joined,
                });
            }
        }
    }
    report
}

#[derive(Serialize)]
struct GroupRecord<'a> {
    round: usize,
    member_ids: Vec<&'a str>,
    size: usize,
    rate_cents_per_kwh: f64,
    cv_percent: f64,
    threshold_met: bool,
}

#[derive(Serialize)]
struct ResultRecord<'a> {
    cv_threshold: f64,
    leftover_policy: LeftoverPolicy,
    groups: Vec<GroupRecord<'a>>,
    unserved_ids: Vec<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    audit: Option<&'a AuditReport>,
}

/// JSON document of a segmentation, with consumer ids resolved.
pub fn segmentation_json(result: &SegmentationResult, dataset: &Dataset, audit: Option<&AuditReport>) -> Result<String> {
    let id = |i: usize| dataset.consumers()[i].id();
    let record = ResultRecord {
        cv_threshold: result.cv_threshold,
        leftover_policy: result.leftover_policy,
        groups: result
            .groups
            .iter()
            .map(|g| GroupRecord {
                round: g.round,
                member_ids: g.members.indices().into_iter().map(id).collect(),
                size: g.size,
                rate_cents_per_kwh: g.rate,
                cv_percent: g.cv,
                threshold_met: g.threshold_met,
            })
            .collect(),
        unserved_ids: result.unserved.iter().map(|&i| id(i)).collect(),
        audit,
    };
    let mut s = serde_json::to_string_pretty(&record)?;
    s.push('\n');
    Ok(s)
}

pub fn write_segmentation_json(
    path: impl AsRef<Path>,
    result: &SegmentationResult,
    dataset: &Dataset,
    audit: Option<&AuditReport>,
) -> Result<()> {
    write_atomic(path.as_ref(), segmentation_json(result, dataset, audit)?.as_bytes())
}

/// `round,size,rate,cv,threshold_met`, one line per group.
pub fn write_rounds_csv(path: impl AsRef<Path>, result: &SegmentationResult) -> Result<()> {
    let mut out = String::from("round,size,rate,cv,threshold_met\n");
    for g in &result.groups {
        writeln!(out, "{},{},{:.6},{:.6},{}", g.round, g.size, g.rate, g.cv, g.threshold_met).expect("string write");
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

/// `consumer_id,group_round,group_rate` in population order; unserved
/// consumers get empty round and rate.
pub fn write_assignments_csv(path: impl AsRef<Path>, result: &SegmentationResult, dataset: &Dataset) -> Result<()> {
    let mut assigned: Vec<Option<&SegmentGroup>> = vec![None; dataset.len()];
    for g in &result.groups {
        for i in g.members.indices() {
            assigned[i] = Some(g);
        }
    }
    let mut out = String::from("consumer_id,group_round,group_rate\n");
    for (c, g) in dataset.consumers().iter().zip(assigned) {
        match g {
            Some(g) => writeln!(out, "{},{},{:.6}", c.id(), g.round, g.rate),
            None => writeln!(out, "{},,", c.id()),
        }
        .expect("string write");
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(m: usize, cv: f64) -> CvPoint {
        CvPoint {
            m,
            kind: CurveKind::Optimal,
            cv,
            ci: None,
        }
    }

    #[test]
    fn first_crossing() {
        let curve = CvCurve {
            points: vec![point(100, 12.0), point(200, 9.0), point(400, 7.0)],
        };
        assert_eq!(min_group_size(&curve, 10.0), Some(200));
        assert_eq!(min_group_size(&curve, 5.0), None);
    }

    #[test]
    fn random_points_are_ignored() {
        let mut p = point(50, 1.0);
        p.kind = CurveKind::Random;
        let curve = CvCurve {
            points: vec![p, point(100, 12.0)],
        };
        assert_eq!(min_group_size(&curve, 10.0), None);
    }

    fn group(round: usize, n: usize, members: &[usize]) -> SegmentGroup {
        SegmentGroup {
            round,
            members: SelectionVector::from_indices(n, members).unwrap(),
            size: members.len(),
            rate: 0.0,
            cv: 0.0,
            threshold_met: true,
        }
    }

    #[test]
    fn misassigned_cheap_consumer_is_flagged() {
        // ratios: 1, 2, 3, 4, 1.2
        let stats = CostStats::new(vec![1.0, 2.0, 3.0, 4.0, 1.2], vec![1.0; 5]).unwrap();
        let result = SegmentationResult {
            groups: vec![group(1, 5, &[0, 1]), group(2, 5, &[2, 3, 4])],
            cv_threshold: 10.0,
            leftover_policy: LeftoverPolicy::Aggregate,
            unserved: vec![],
        };
        let report = stability_audit(&result, &stats, 1e-6);
        assert_eq!(report.pairs_checked, 1);
        assert_eq!(report.moves_checked, 3);
        assert!(matches!(
            report.violations.as_slice(),
            [Violation::Deviation { consumer: 4, from_round: 2, into_round: 1, .. }]
        ));
    }

    #[test]
    fn rate_order_violation_is_flagged() {
        let stats = CostStats::new(vec![5.0, 1.0], vec![1.0; 2]).unwrap();
        let result = SegmentationResult {
            groups: vec![group(1, 2, &[0]), group(2, 2, &[1])],
            cv_threshold: 10.0,
            leftover_policy: LeftoverPolicy::Aggregate,
            unserved: vec![],
        };
        let report = stability_audit(&result, &stats, 1e-6);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::RateOrder { magnitude, .. } if (*magnitude - 4.0).abs() < 1e-12)));
    }

    #[test]
    fn single_group_passes_vacuously() {
        let stats = CostStats::new(vec![5.0, 1.0], vec![1.0; 2]).unwrap();
        let result = SegmentationResult {
            groups: vec![group(1, 2, &[0, 1])],
            cv_threshold: 10.0,
            leftover_policy: LeftoverPolicy::Aggregate,
            unserved: vec![],
        };
        let report = stability_audit(&result, &stats, 1e-6);
        assert!(report.passed());
        assert_eq!(report.pairs_checked, 0);
    }

    #[test]
    fn unmet_groups_are_not_audited() {
        let stats = CostStats::new(vec![5.0, 1.0], vec![1.0; 2]).unwrap();
        let mut last = group(2, 2, &[1]);
        last.threshold_met = false;
        let result = SegmentationResult {
            groups: vec![group(1, 2, &[0]), last],
            cv_threshold: 10.0,
            leftover_policy: LeftoverPolicy::Aggregate,
            unserved: vec![],
        };
        assert!(stability_audit(&result, &stats, 1e-6).passed());
    }

    #[test]
    fn user_grid_is_capped() {
        let mut cfg = SegmentConfig::new(5.0);
        cfg.size_grid = Some(vec![50, 5, 20, 100]);
        assert_eq!(round_grid(&cfg, 30), vec![5, 20, 30]);
        cfg.size_grid = None;
        let g = round_grid(&cfg, 4);
        assert_eq!(g, vec![4]);
    }
}
