use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index;
use rayon::prelude::*;
use serde::Serialize;

use super::{group_load, validate_cv, DEFAULT_AR_ORDER};
use crate::cost_model::consumer_stats;
use crate::error::{Error, Result};
use crate::fractional_solver::solve_min_lambda;
use crate::ingest::write_atomic;
use crate::rng;
use crate::types::{CostStats, Dataset, Window};

/// Backtest CV of arbitrary consumer groups of one dataset.
#[derive(Debug, Clone, Copy)]
pub struct GroupEvaluator<'a> {
    dataset: &'a Dataset,
    order: usize,
}

impl<'a> GroupEvaluator<'a> {
    pub fn new(dataset: &'a Dataset) -> Result<Self> {
        if dataset.validate_days() == 0 {
            return Err(Error::invalid("validate window is empty"));
        }
        Ok(Self {
            dataset,
            order: DEFAULT_AR_ORDER,
        })
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    /// Validate-window CV (percent) of the group formed by `members`.
    pub fn cv(&self, members: &[usize]) -> Result<f64> {
        validate_cv(self.dataset, &group_load(self.dataset, members), self.order)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Random,
    Optimal,
}

impl CurveKind {
    fn label(self) -> &'static str {
        match self {
            CurveKind::Random => "random",
            CurveKind::Optimal => "optimal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvPoint {
    pub m: usize,
    pub kind: CurveKind,
    /// Percent; the trial mean for random groups.
    pub cv: f64,
    /// 95% confidence interval of the random-group mean.
    pub ci: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CvCurve {
    pub points: Vec<CvPoint>,
}

impl CvCurve {
    pub fn of_kind(&self, kind: CurveKind) -> impl Iterator<Item = &CvPoint> {
        self.points.iter().filter(move |p| p.kind == kind)
    }
}

/// Stream index of random trial `trial` at size `m`.
fn trial_stream(m: usize, trial: usize) -> u64 {
    ((m as u64) << 32) | trial as u64
}

fn random_point(eval: &GroupEvaluator, m: usize, trials: usize, seed: u64) -> Result<CvPoint> {
    let n = eval.dataset().len();
    let cvs = (0..trials)
        .into_par_iter()
        .map(|j| {
            let mut rng = rng::stream(seed, trial_stream(m, j));
            let mut members = index::sample(&mut rng, n, m).into_vec();
            members.sort_unstable();
            eval.cv(&members)
        })
        .collect::<Result<Vec<f64>>>()?;
    let k = cvs.len() as f64;
    let mean = cvs.iter().sum::<f64>() / k;
    let half = if cvs.len() > 1 {
        let var = cvs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (k - 1.0);
        1.96 * (var / k).sqrt()
    } else {
        0.0
    };
    Ok(CvPoint {
        m,
        kind: CurveKind::Random,
        cv: mean,
        ci: Some((mean - half, mean + half)),
    })
}

/// CV of the minimum-rate group of each size, using train-window stats.
pub(crate) fn optimal_point(
    eval: &GroupEvaluator,
    stats: &CostStats,
    population: &[usize],
    m: usize,
    gamma: f64,
) -> Result<(CvPoint, Vec<usize>)> {
    let solved = solve_min_lambda(stats, m, gamma)?;
    let members: Vec<usize> = solved.selection.indices().into_iter().map(|i| population[i]).collect();
    let cv = eval.cv(&members)?;
    Ok((
        CvPoint {
            m,
            kind: CurveKind::Optimal,
            cv,
            ci: None,
        },
        members,
    ))
}

/// Random-group and optimal-group CV for each size in `sizes`.
///
/// Every random trial draws its group from its own seed stream, so the curve
/// does not depend on evaluation order.
pub fn cv_curve(
    dataset: &Dataset,
    sizes: &[usize],
    n_random_trials: usize,
    gamma: f64,
    seed: u64,
) -> Result<CvCurve> {
    let eval = GroupEvaluator::new(dataset)?;
    if n_random_trials == 0 {
        return Err(Error::invalid("need at least one random trial"));
    }
    if let Some(&m) = sizes.iter().find(|&&m| m == 0 || m > dataset.len()) {
        return Err(Error::invalid(format!("group size {m} must be in 1..={}", dataset.len())));
    }
    let stats = consumer_stats(dataset, Window::Train)?;
    let population: Vec<usize> = (0..dataset.len()).collect();
    let per_size = sizes
        .par_iter()
        .map(|&m| {
            let random = random_point(&eval, m, n_random_trials, seed)?;
            let (optimal, _) = optimal_point(&eval, &stats, &population, m, gamma)?;
            Ok([random, optimal])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvCurve {
        points: per_size.into_iter().flatten().collect(),
    })
}

/// Writes `M,kind,cv,ci_low,ci_high`; the interval is empty for optimal points.
pub fn write_cv_curve_csv(path: impl AsRef<Path>, curve: &CvCurve) -> Result<()> {
    let mut out = String::from("M,kind,cv,ci_low,ci_high\n");
    for p in &curve.points {
        let (lo, hi) = match p.ci {
            Some((lo, hi)) => (format!("{lo:.6}"), format!("{hi:.6}")),
            None => (String::new(), String::new()),
        };
        writeln!(out, "{},{},{:.6},{lo},{hi}", p.m, p.kind.label(), p.cv).expect("string write");
    }
    write_atomic(path.as_ref(), out.as_bytes())
}
