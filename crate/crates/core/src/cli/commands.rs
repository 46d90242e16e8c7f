use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use lse_rates::cost_model::{consumer_stats, SettlementDesign};
use lse_rates::forecast::{cv_curve, write_cv_curve_csv};
use lse_rates::fractional_solver::{lambda_curve, solve_min_lambda, DEFAULT_GAMMA};
use lse_rates::grid::log_spaced;
use lse_rates::ingest::{
    align, load_meter_csv, load_price_csv, synth_population, write_atomic, write_meter_csv, write_price_csv,
    SynthSpec,
};
use lse_rates::segmentation::{
    segment_population, stability_audit, write_assignments_csv, write_rounds_csv, write_segmentation_json,
    LeftoverPolicy, SegmentConfig,
};
use lse_rates::simulation::{simulate as simulate_group, write_simulation_csv};
use lse_rates::{CostStats, Dataset, Window};

use super::{flag_names, CliError, Common, Config, CurvesArgs, SegmentArgs, SimulateArgs, SolveArgs, SynthArgs};

type CliResult<T = ()> = Result<T, CliError>;

const DEFAULT_TRAIN_FRACTION: f64 = 0.75;
const DEFAULT_CURVE_POINTS: usize = 20;
const DEFAULT_TRIALS: usize = 50;

struct Context {
    cfg: Config,
    out_dir: PathBuf,
    gamma: f64,
    seed: u64,
}

impl Context {
    fn new(common: &Common, subcommand: &str) -> CliResult<Self> {
        let cfg = Config::load(common.config.as_deref(), &flag_names(subcommand))?;
        let gamma = cfg.pick_or(common.gamma, "gamma", DEFAULT_GAMMA)?;
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(CliError::Usage(format!("--gamma must be > 0, got {gamma}")));
        }
        let out_dir = cfg.pick_or(common.out_dir.clone(), "out-dir", PathBuf::from("."))?;
        std::fs::create_dir_all(&out_dir)
            .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", out_dir.display())))?;
        Ok(Self {
            seed: cfg.pick_or(common.seed, "seed", 0)?,
            cfg,
            out_dir,
            gamma,
        })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn dataset(&self, common: &Common) -> CliResult<Dataset> {
        let meter: PathBuf = self.cfg.require(common.meter.clone(), "meter")?;
        let prices: PathBuf = self.cfg.require(common.prices.clone(), "prices")?;
        let split = self.train_fraction(common)?;
        let consumers = load_meter_csv(&meter)?;
        let prices = load_price_csv(&prices)?;
        Ok(align(consumers, prices, split)?)
    }

    fn train_fraction(&self, common: &Common) -> CliResult<f64> {
        let split = self
            .cfg
            .pick_or(common.train_fraction, "train-fraction", DEFAULT_TRAIN_FRACTION)?;
        if !(0.0..=1.0).contains(&split) {
            return Err(CliError::Usage(format!("--train-fraction must be in [0, 1], got {split}")));
        }
        Ok(split)
    }
}

/// Parses a snake_case enum value the same way the config file would.
fn parse_choice<T: DeserializeOwned>(value: &str, flag: &str) -> CliResult<T> {
    serde_json::from_value(serde_json::Value::String(value.to_owned()))
        .map_err(|_| CliError::Usage(format!("invalid value \"{value}\" for --{flag}")))
}

fn check_size(m: usize, n: usize) -> CliResult<usize> {
    if m == 0 || m > n {
        return Err(CliError::Usage(format!("M={m} must be in 1..={n} (population size)")));
    }
    Ok(m)
}

fn check_sizes(mut sizes: Vec<usize>, n: usize) -> CliResult<Vec<usize>> {
    if sizes.is_empty() {
        return Err(CliError::Usage("--sizes is empty".into()));
    }
    for &m in &sizes {
        check_size(m, n)?;
    }
    sizes.sort_unstable();
    sizes.dedup();
    Ok(sizes)
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult {
    let mut s = serde_json::to_string_pretty(value).map_err(lse_rates::Error::from)?;
    s.push('\n');
    Ok(write_atomic(path, s.as_bytes())?)
}

pub fn synth(a: SynthArgs) -> CliResult {
    let ctx = Context::new(&a.common, "synth")?;
    let cfg = &ctx.cfg;
    let mut spec = match cfg.pick(a.spec.clone(), "spec")? {
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Usage(format!("cannot read spec {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("spec {}: {e}", path.display())))?
        }
        None => SynthSpec::new(1000, 120, 0.5, 0),
    };
    if let Some(seed) = cfg.pick(a.common.seed, "seed")? {
        spec.seed = seed;
    }
    if let Some(v) = cfg.pick(a.common.train_fraction, "train-fraction")? {
        spec.train_fraction = v;
    }
    macro_rules! apply {
        ($($field:ident <- $flag:ident, $key:literal;)*) => {
            $(if let Some(v) = cfg.pick(a.$flag, $key)? {
                spec.$field = v;
            })*
        };
    }
    apply! {
        n_consumers <- n, "n";
        n_days <- days, "days";
        fraction_peaky <- fraction_peaky, "fraction-peaky";
        noise_cv <- noise_cv, "noise-cv";
        base_kwh_per_day <- base_kwh, "base-kwh";
        rt_noise_sd <- rt_noise_sd, "rt-noise-sd";
        scale_spread <- scale_spread, "scale-spread";
        shape_spread <- shape_spread, "shape-spread";
        start_date <- start_date, "start-date";
    }
    spec.validate().map_err(CliError::usage)?;

    let population = synth_population(&spec)?;
    let ds = &population.dataset;
    write_meter_csv(ctx.out("meter.csv"), ds.consumers())?;
    write_price_csv(ctx.out("prices.csv"), ds.prices())?;
    let mut labels = String::from("consumer_id,archetype\n");
    for (c, arch) in ds.consumers().iter().zip(&population.archetypes) {
        writeln!(labels, "{},{}", c.id(), arch.label()).expect("string write");
    }
    write_atomic(&ctx.out("archetypes.csv"), labels.as_bytes())?;

    let peaky = population
        .archetypes
        .iter()
        .filter(|a| a.label() == "peaky")
        .count();
    println!(
        "consumers {}  days {} (train {}, validate {})  peaky {}  off_peak {}",
        ds.len(),
        ds.days(),
        ds.train_days(),
        ds.validate_days(),
        peaky,
        ds.len() - peaky
    );
    Ok(())
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    m: usize,
    window: Window,
    lambda_star: f64,
    iterations: usize,
    certificate: f64,
    bracket: (f64, f64),
    member_ids: Vec<&'a str>,
}

pub fn solve(a: SolveArgs) -> CliResult {
    let ctx = Context::new(&a.common, "solve")?;
    let window: Window = match ctx.cfg.pick(a.window.clone(), "window")? {
        Some(w) => parse_choice(&w, "window")?,
        None => Window::Train,
    };
    let m: usize = ctx.cfg.require(a.m, "m")?;
    let ds = ctx.dataset(&a.common)?;
    let m = check_size(m, ds.len())?;
    let stats = consumer_stats(&ds, window)?;
    let result = solve_min_lambda(&stats, m, ctx.gamma)?;
    let members = result.selection.indices();
    let ids: Vec<&str> = members.iter().map(|&i| ds.consumers()[i].id()).collect();

    let mut csv = String::from("consumer_id,t_cents,w_kwh,lambda\n");
    for &i in &members {
        writeln!(
            csv,
            "{},{:.6},{:.6},{:.10}",
            ds.consumers()[i].id(),
            stats.t()[i],
            stats.w()[i],
            stats.ratio(i)
        )
        .expect("string write");
    }
    write_atomic(&ctx.out("selection.csv"), csv.as_bytes())?;
    let summary = SolveSummary {
        m,
        window,
        lambda_star: result.lambda_star,
        iterations: result.iterations,
        certificate: result.certificate(&stats),
        bracket: result.bracket,
        member_ids: ids.clone(),
    };
    write_json(&ctx.out("solve.json"), &summary)?;

    println!("lambda_star {:.10}", summary.lambda_star);
    println!("iterations {}", summary.iterations);
    println!("certificate {:e}", summary.certificate);
    println!("members {}", ids.join(","));
    Ok(())
}

pub fn curves(a: CurvesArgs) -> CliResult {
    let ctx = Context::new(&a.common, "curves")?;
    let trials = ctx.cfg.pick_or(a.trials, "trials", DEFAULT_TRIALS)?;
    if trials == 0 {
        return Err(CliError::Usage("--trials must be ≥ 1".into()));
    }
    let sizes: Option<Vec<usize>> = ctx.cfg.pick(a.sizes.clone(), "sizes")?;
    let ds = ctx.dataset(&a.common)?;
    let sizes = match sizes {
        Some(s) => check_sizes(s, ds.len())?,
        None => log_spaced(1, ds.len(), DEFAULT_CURVE_POINTS),
    };
    if ds.validate_days() == 0 {
        return Err(CliError::Usage("--train-fraction leaves no validate days".into()));
    }

    let stats: CostStats = consumer_stats(&ds, Window::Train)?;
    let lambdas = lambda_curve(&stats, &sizes, ctx.gamma)?;
    let mut csv = String::from("M,lambda_star\n");
    for p in &lambdas {
        writeln!(csv, "{},{:.10}", p.m, p.lambda_star).expect("string write");
    }
    write_atomic(&ctx.out("lambda_curve.csv"), csv.as_bytes())?;

    let cv = cv_curve(&ds, &sizes, trials, ctx.gamma, ctx.seed)?;
    write_cv_curve_csv(ctx.out("cv_curve.csv"), &cv)?;
    println!(
        "sizes {}  lambda_star {:.6}..{:.6}",
        sizes.len(),
        lambdas.first().map_or(f64::NAN, |p| p.lambda_star),
        lambdas.last().map_or(f64::NAN, |p| p.lambda_star)
    );
    Ok(())
}

pub fn segment(a: SegmentArgs) -> CliResult {
    let ctx = Context::new(&a.common, "segment")?;
    let threshold: f64 = ctx.cfg.require(a.cv_threshold, "cv-threshold")?;
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(CliError::Usage(format!("--cv-threshold must be ≥ 0, got {threshold}")));
    }
    let policy: LeftoverPolicy = match ctx.cfg.pick(a.policy.clone(), "policy")? {
        Some(p) => parse_choice(&p, "policy")?,
        None => LeftoverPolicy::Aggregate,
    };
    let sizes: Option<Vec<usize>> = ctx.cfg.pick(a.sizes.clone(), "sizes")?;
    let ds = ctx.dataset(&a.common)?;
    if ds.validate_days() == 0 {
        return Err(CliError::Usage("--train-fraction leaves no validate days".into()));
    }
    let config = SegmentConfig {
        cv_threshold: threshold,
        size_grid: sizes.map(|s| check_sizes(s, ds.len())).transpose()?,
        gamma: ctx.gamma,
        leftover_policy: policy,
    };
    let result = segment_population(&ds, &config)?;
    let stats = consumer_stats(&ds, Window::Train)?;
    let audit = stability_audit(&result, &stats, ctx.gamma);
    write_segmentation_json(ctx.out("segmentation.json"), &result, &ds, Some(&audit))?;
    write_rounds_csv(ctx.out("rounds.csv"), &result)?;
    write_assignments_csv(ctx.out("assignments.csv"), &result, &ds)?;

    let met = result.groups.iter().filter(|g| g.threshold_met).count();
    println!(
        "groups {} (threshold met {})  unserved {}  audit violations {}",
        result.groups.len(),
        met,
        result.unserved.len(),
        audit.violations.len()
    );
    Ok(())
}

fn read_selection(path: &Path, ds: &Dataset) -> CliResult<Vec<usize>> {
    let mut reader = csv::Reader::from_path(path).map_err(lse_rates::Error::from)?;
    let headers = reader.headers().map_err(lse_rates::Error::from)?.clone();
    let col = headers
        .iter()
        .position(|h| h == "consumer_id")
        .ok_or_else(|| CliError::Usage(format!("{}: no consumer_id column", path.display())))?;
    let mut members = Vec::new();
    for record in reader.records() {
        let record = record.map_err(lse_rates::Error::from)?;
        let id = record.get(col).unwrap_or_default();
        let i = ds
            .index_of(id)
            .ok_or_else(|| CliError::Usage(format!("{}: unknown consumer {id}", path.display())))?;
        members.push(i);
    }
    members.sort_unstable();
    members.dedup();
    if members.is_empty() {
        return Err(CliError::Usage(format!("{}: selection is empty", path.display())));
    }
    Ok(members)
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    #[serde(flatten)]
    report: &'a lse_rates::simulation::SimulationReport,
    member_ids: Vec<&'a str>,
}

pub fn simulate(a: SimulateArgs) -> CliResult {
    let ctx = Context::new(&a.common, "simulate")?;
    let design: SettlementDesign = match ctx.cfg.pick(a.design.clone(), "design")? {
        Some(d) => parse_choice(&d, "design")?,
        None => SettlementDesign::OneSided,
    };
    let selection: Option<PathBuf> = ctx.cfg.pick(a.selection.clone(), "selection")?;
    let m: Option<usize> = ctx.cfg.pick(a.m, "m")?;
    let days: Option<usize> = ctx.cfg.pick(a.days, "days")?;
    let ds = ctx.dataset(&a.common)?;
    if ds.validate_days() == 0 {
        return Err(CliError::Usage("--train-fraction leaves no validate days".into()));
    }
    if let Some(k) = days {
        if k == 0 || k > ds.validate_days() {
            return Err(CliError::Usage(format!("--days must be in 1..={}", ds.validate_days())));
        }
    }
    let members = match (selection, m) {
        (Some(_), Some(_)) => return Err(CliError::Usage("give either --selection or --m, not both".into())),
        (Some(path), None) => read_selection(&path, &ds)?,
        (None, Some(m)) => {
            let m = check_size(m, ds.len())?;
            let stats = consumer_stats(&ds, Window::Train)?;
            solve_min_lambda(&stats, m, ctx.gamma)?.selection.indices()
        }
        (None, None) => (0..ds.len()).collect(),
    };

    let report = simulate_group(&ds, &members, design, days)?;
    write_simulation_csv(ctx.out("simulation.csv"), &report)?;
    let summary = SimulationSummary {
        report: &report,
        member_ids: members.iter().map(|&i| ds.consumers()[i].id()).collect(),
    };
    write_json(&ctx.out("summary.json"), &summary)?;
    println!(
        "r_K {:.6}  lambda {:.6}  gap {:.6} ± {:.6}  expected gap {:.6}",
        report.realized_rate, report.lambda, report.gap, report.gap_std_error, report.expected_gap
    );
    Ok(())
}
