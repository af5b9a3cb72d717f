//! Config-driven experiment runner with CSV output.
//!
//! A config is a flat list of `key = value` lines; `#` starts a comment and
//! lists are comma separated. Reals may be written as fractions (`1/8`).

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{refine_uniform, uniform_time_mesh, unit_cube_initial, MeshPair};
use crate::operators::infsup_constant;
use crate::oracle::{check_hbeta_stability, check_log_convexity, check_smoothing, SpectralField};
use crate::solver::{
    solve_backward, BackwardProblem, EpsilonStrategy, ExactSolution, Manufactured, Perturbation, StoppingRule,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Convergence,
    IntervalLength,
    PerturbRandom,
    PerturbMode,
    InfSup,
    StabilityOracle,
}

impl ExperimentKind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "convergence" => Self::Convergence,
            "interval-length" => Self::IntervalLength,
            "perturb-random" => Self::PerturbRandom,
            "perturb-mode" => Self::PerturbMode,
            "infsup" => Self::InfSup,
            "stability-oracle" => Self::StabilityOracle,
            _ => return None,
        })
    }

    fn is_perturbation(self) -> bool {
        matches!(self, Self::PerturbRandom | Self::PerturbMode)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EpsilonChoice {
    Plain,
    DataAware,
    /// One value per entry of `k_range`.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolutionKind {
    /// `(1 + t³) Π sin(πx_i)`.
    PolyCubic,
    /// `exp(d(nπ)²(T - t)) Π sin(nπx_i)`.
    HeatMode { n: usize },
    Zero,
}

impl SolutionKind {
    pub fn build(self, d: usize, t_end: f64) -> Manufactured {
        match self {
            Self::PolyCubic => Manufactured::PolyCubic { d },
            Self::HeatMode { n } => Manufactured::HeatMode { d, n, t_ref: t_end },
            Self::Zero => Manufactured::Zero { d },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub d: usize,
    pub t_end: f64,
    /// Interval lengths `L`; the time interval is `(T - L, T)`.
    pub lengths: Vec<f64>,
    pub k_range: Vec<u32>,
    pub l: usize,
    /// Test degree of the reference space in inf-sup runs.
    pub l_big: usize,
    pub epsilon: EpsilonChoice,
    pub solution: SolutionKind,
    pub seed: u64,
    pub target_norm: f64,
    pub mode_n: usize,
    pub amplitude: f64,
    pub slice_times: Vec<f64>,
    pub output_path: Option<PathBuf>,
    /// The time mesh has `2^(k + offset)` elements on `(0, T)` before
    /// restriction to `(T - L, T)`.
    pub time_level_offset: u32,
    pub max_iter: usize,
    pub stopping: StoppingRule,
    pub beta: f64,
    pub samples: usize,
    pub n_max: usize,
}

const KEYS: &[&str] = &[
    "experiment",
    "d",
    "T",
    "L",
    "k_range",
    "l",
    "l_big",
    "epsilon_strategy",
    "epsilon_values",
    "solution",
    "seed",
    "target_norm",
    "mode_n",
    "amplitude",
    "slice_times",
    "output_path",
    "time_level_offset",
    "max_iter",
    "stop_threshold",
    "beta",
    "samples",
    "n_max",
];

fn parse_real(s: &str) -> Option<f64> {
    let v = match s.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?,
        None => s.parse::<f64>().ok()?,
    };
    v.is_finite().then_some(v)
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|p| !p.is_empty())
}

struct Entries {
    map: HashMap<String, (usize, String)>,
}

impl Entries {
    fn line(&self, key: &str) -> usize {
        self.map.get(key).map_or(0, |e| e.0)
    }

    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn get<T>(&self, key: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => parse(v).map(Some).ok_or_else(|| Error::Config {
                line,
                message: format!("`{key}`: expected {what}, got `{v}`"),
            }),
        }
    }

    fn real(&self, key: &str) -> Result<Option<f64>> {
        self.get(key, "a real number", parse_real)
    }

    fn int<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key, "a nonnegative integer", |s| s.parse::<T>().ok())
    }

    fn reals(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key, "a comma-separated list of reals", |s| {
            split_list(s).map(parse_real).collect::<Option<Vec<_>>>()
        })
    }
}

fn parse_k_range(s: &str) -> Option<Vec<u32>> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (a.trim().parse::<u32>().ok()?, b.trim().parse::<u32>().ok()?);
        return Some((a..=b).collect());
    }
    split_list(s).map(|p| p.parse().ok()).collect()
}

fn parse_solution(s: &str) -> Option<SolutionKind> {
    match s {
        "poly-cubic" => Some(SolutionKind::PolyCubic),
        "zero" => Some(SolutionKind::Zero),
        "heat-mode" => Some(SolutionKind::HeatMode { n: 1 }),
        _ => {
            let n = s.strip_prefix("heat-mode(")?.strip_suffix(')')?.trim().parse().ok()?;
            (n >= 1).then_some(SolutionKind::HeatMode { n })
        }
    }
}

/// Parse and validate a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::Config { line, message: format!("unknown key `{key}`") });
        }
        if map.insert(key.to_string(), (line, value.trim().to_string())).is_some() {
            return Err(Error::Config { line, message: format!("duplicate key `{key}`") });
        }
    }
    let e = Entries { map };
    let invalid = |key: &str, message: String| Error::Config { line: e.line(key), message };

    let experiment = e
        .get("experiment", "an experiment name", ExperimentKind::parse)?
        .ok_or_else(|| invalid("experiment", "missing key `experiment`".into()))?;
    let d: usize = e.int("d")?.ok_or_else(|| invalid("d", "missing key `d`".into()))?;
    if !(1..=2).contains(&d) {
        return Err(invalid("d", format!("`d`: spatial dimension {d} not in {{1, 2}}")));
    }
    let t_end = e.real("T")?.ok_or_else(|| invalid("T", "missing key `T`".into()))?;
    if t_end <= 0.0 {
        return Err(invalid("T", format!("`T`: must be positive, got {t_end}")));
    }
    let lengths = e.reals("L")?.unwrap_or_else(|| vec![t_end]);
    if lengths.is_empty() || lengths.iter().any(|&l| l <= 0.0 || l > t_end * (1.0 + 1e-12)) {
        return Err(invalid("L", format!("`L`: lengths must lie in (0, T], got {lengths:?}")));
    }
    let k_range = match e.get("k_range", "a list of integers or `a..b`", parse_k_range)? {
        Some(k) => k,
        None if experiment == ExperimentKind::StabilityOracle => vec![0],
        None => return Err(invalid("k_range", "missing key `k_range`".into())),
    };
    if k_range.is_empty() || k_range.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("k_range", "`k_range`: must be nonempty and strictly ascending".into()));
    }
    let l = e.int("l")?.unwrap_or(0);
    let l_big = e.int("l_big")?.unwrap_or(1);
    if l > 1 || l_big > 1 {
        return Err(invalid(if l > 1 { "l" } else { "l_big" }, "test degree offset must be 0 or 1".into()));
    }
    if experiment == ExperimentKind::InfSup && l >= l_big {
        return Err(invalid("l_big", format!("`l_big` = {l_big} must exceed `l` = {l}")));
    }
    let epsilon = match e.raw("epsilon_strategy").map(|(_, v)| v) {
        None | Some("plain") => EpsilonChoice::Plain,
        Some("data-aware") => EpsilonChoice::DataAware,
        Some("explicit") => {
            let values = e
                .reals("epsilon_values")?
                .ok_or_else(|| invalid("epsilon_strategy", "explicit strategy needs `epsilon_values`".into()))?;
            if values.len() < k_range.len() {
                return Err(invalid(
                    "epsilon_values",
                    format!("`epsilon_values`: {} values for {} levels", values.len(), k_range.len()),
                ));
            }
            if values.iter().any(|v| *v < 0.0) {
                return Err(invalid("epsilon_values", "`epsilon_values`: must be nonnegative".into()));
            }
            EpsilonChoice::Explicit(values)
        }
        Some(other) => {
            return Err(invalid("epsilon_strategy", format!("`epsilon_strategy`: unknown strategy `{other}`")))
        }
    };
    let solution = e
        .get("solution", "poly-cubic, heat-mode, heat-mode(n) or zero", parse_solution)?
        .unwrap_or(SolutionKind::PolyCubic);
    let seed = e.int("seed")?.unwrap_or(0);
    let target_norm = e.real("target_norm")?.unwrap_or(0.01);
    if target_norm <= 0.0 {
        return Err(invalid("target_norm", "`target_norm`: must be positive".into()));
    }
    let mode_n = e.int("mode_n")?.unwrap_or(1);
    if mode_n == 0 {
        return Err(invalid("mode_n", "`mode_n`: must be at least 1".into()));
    }
    let amplitude = e.real("amplitude")?.unwrap_or(0.05);
    let slice_times = e
        .reals("slice_times")?
        .unwrap_or_else(|| vec![t_end / 4.0, t_end / 2.0, 3.0 * t_end / 4.0, t_end]);
    let l_min = lengths.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * t_end;
    if let Some(t) = slice_times.iter().find(|&&t| t < t_end - l_min - tol || t > t_end + tol) {
        return Err(invalid(
            "slice_times",
            format!("`slice_times`: {t} outside [{}, {t_end}]", t_end - l_min),
        ));
    }
    let output_path = e.raw("output_path").map(|(_, v)| PathBuf::from(v));
    let time_level_offset = e.int("time_level_offset")?.unwrap_or(0);
    let max_iter = e.int("max_iter")?.unwrap_or(5000);
    let stopping = e
        .get("stop_threshold", "a nonnegative real, `manufactured` or `manufactured-coarse`", |s| match s {
            "manufactured" => Some(StoppingRule::Manufactured),
            "manufactured-coarse" => Some(StoppingRule::ManufacturedCoarse),
            _ => parse_real(s).filter(|v| *v >= 0.0).map(StoppingRule::Threshold),
        })?
        .unwrap_or(StoppingRule::Manufactured);
    let beta = e.real("beta")?.unwrap_or(0.5);
    if !(0.0..2.0).contains(&beta) {
        return Err(invalid("beta", format!("`beta`: {beta} outside [0, 2)")));
    }
    let samples = e.int("samples")?.unwrap_or(100);
    let n_max = e.int("n_max")?.unwrap_or(8);
    if n_max == 0 {
        return Err(invalid("n_max", "`n_max`: must be at least 1".into()));
    }

    Ok(ExperimentConfig {
        experiment,
        d,
        t_end,
        lengths,
        k_range,
        l,
        l_big,
        epsilon,
        solution,
        seed,
        target_norm,
        mode_n,
        amplitude,
        slice_times,
        output_path,
        time_level_offset,
        max_iter,
        stopping,
        beta,
        samples,
        n_max,
    })
}

/// One PCG solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveRow {
    pub k: u32,
    /// Interval length, for interval-length runs.
    pub length: Option<f64>,
    /// `plain` or `data-aware`, for perturbation runs.
    pub strategy: Option<String>,
    pub dofs: usize,
    pub epsilon: f64,
    pub pcg_iterations: usize,
    pub stopping_value: f64,
    pub threshold: f64,
    pub converged: bool,
    /// Whether the preconditioned residual history never increased.
    pub residual_monotone: bool,
    pub functional: f64,
    pub functional_interpolant: f64,
    pub err_l2l2: f64,
    pub err_l2h1: f64,
    /// One entry per configured slice time.
    pub slice_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfSupRow {
    pub k: u32,
    pub dofs: usize,
    pub gamma_infsup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub sample: usize,
    pub logconv_violation: f64,
    pub smoothing_sup: f64,
    pub hbeta_ratio_sup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Results {
    Solve { slice_times: Vec<f64>, rows: Vec<SolveRow> },
    InfSup(Vec<InfSupRow>),
    Oracle(Vec<OracleRow>),
}

impl Results {
    pub fn solve_rows(&self) -> &[SolveRow] {
        match self {
            Results::Solve { rows, .. } => rows,
            _ => &[],
        }
    }
}

/// Snap `t` to the nearest breakpoint of the time mesh.
pub fn snap_to_breakpoint(meshes: &MeshPair, t: f64) -> f64 {
    let tm = &meshes.time;
    let snapped = tm.breakpoints()[tm.nearest_breakpoint(t)];
    if (snapped - t).abs() > 0.5 * tm.max_element_length() * (1.0 + 1e-12) {
        log::warn!("slice time {t} snapped to {snapped}, more than half an element away");
    }
    snapped
}

/// Meshes for level `k` and interval length `length`.
pub fn level_meshes(config: &ExperimentConfig, k: u32, length: f64) -> Result<MeshPair> {
    let t_end = config.t_end;
    let full = uniform_time_mesh(0.0, t_end, k + config.time_level_offset)?;
    let time = if (length - t_end).abs() <= 1e-12 * t_end { full } else { full.restrict_from(t_end - length)? };
    let space = refine_uniform(&unit_cube_initial(config.d)?, config.d * k as usize);
    Ok(MeshPair::new(time, space))
}

struct SolveJob {
    index: usize,
    k: u32,
    length: f64,
    strategy: Option<EpsilonStrategy>,
}

fn strategy_name(s: &EpsilonStrategy) -> &'static str {
    match s {
        EpsilonStrategy::Plain => "plain",
        EpsilonStrategy::DataAware => "data-aware",
        EpsilonStrategy::Explicit(_) => "explicit",
    }
}

fn run_solve(config: &ExperimentConfig, job: &SolveJob) -> Result<SolveRow> {
    let meshes = level_meshes(config, job.k, job.length)?;
    let slices: Vec<f64> = config.slice_times.iter().map(|&t| snap_to_breakpoint(&meshes, t)).collect();
    let solution: Arc<dyn ExactSolution> = Arc::new(config.solution.build(config.d, config.t_end));
    let mut problem = BackwardProblem::new(meshes, solution);
    problem.l = config.l;
    problem.epsilon = match (&job.strategy, &config.epsilon) {
        (Some(s), _) => s.clone(),
        (None, EpsilonChoice::Plain) => EpsilonStrategy::Plain,
        (None, EpsilonChoice::DataAware) => EpsilonStrategy::DataAware,
        (None, EpsilonChoice::Explicit(v)) => EpsilonStrategy::Explicit(v[job.index]),
    };
    problem.perturbation = match config.experiment {
        ExperimentKind::PerturbRandom => Perturbation::Random { target_norm: config.target_norm, seed: config.seed },
        ExperimentKind::PerturbMode => Perturbation::Mode { n: config.mode_n, amplitude: config.amplitude },
        _ => Perturbation::None,
    };
    problem.stopping = config.stopping;
    problem.max_iter = config.max_iter;
    problem.slice_times = slices;
    let s = solve_backward(&problem)?;
    let history = &s.report.residual_history;
    Ok(SolveRow {
        k: job.k,
        length: (config.experiment == ExperimentKind::IntervalLength).then_some(job.length),
        strategy: job.strategy.as_ref().map(|s| strategy_name(s).to_string()),
        dofs: s.errors.dofs,
        epsilon: s.epsilon,
        pcg_iterations: s.report.iterations,
        stopping_value: s.report.stopping_value,
        threshold: s.report.threshold,
        converged: s.report.converged,
        residual_monotone: history.windows(2).all(|w| w[1] <= w[0]),
        functional: s.functional,
        functional_interpolant: s.functional_at_interpolant,
        err_l2l2: s.errors.l2l2,
        err_l2h1: s.errors.l2h1,
        slice_errors: s.errors.l2_slices.iter().map(|p| p.1).collect(),
    })
}

/// Collect per-job results in order; the first failure aborts the run.
fn collect_ordered<T>(results: Vec<(u32, Result<T>)>) -> Result<Vec<T>> {
    results
        .into_iter()
        .map(|(k, r)| r.map_err(|e| Error::Experiment { k, source: Box::new(e) }))
        .collect()
}

/// Run every level of the experiment. Levels are computed in parallel on
/// the current rayon pool; rows come back in `k` order.
pub fn run(config: &ExperimentConfig) -> Result<Results> {
    match config.experiment {
        ExperimentKind::InfSup => {
            let out: Vec<_> = config
                .k_range
                .par_iter()
                .map(|&k| {
                    let r = level_meshes(config, k, config.t_end).and_then(|m| {
                        let gamma = infsup_constant(&m, config.l, config.l_big)?;
                        let dofs = m.time.n_nodes() * m.space.n_interior_vertices();
                        Ok(InfSupRow { k, dofs, gamma_infsup: gamma })
                    });
                    (k, r)
                })
                .collect();
            Ok(Results::InfSup(collect_ordered(out)?))
        }
        ExperimentKind::StabilityOracle => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let fields = (0..config.samples)
                .map(|_| SpectralField::random(config.d, config.n_max, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            let out: Vec<_> = fields
                .par_iter()
                .enumerate()
                .map(|(i, u0)| {
                    let r = check_hbeta_stability(u0, config.t_end, config.beta, 200).map(|h| OracleRow {
                        sample: i,
                        logconv_violation: check_log_convexity(u0, config.t_end, 200).max_violation,
                        smoothing_sup: check_smoothing(u0, config.t_end).sup_value,
                        hbeta_ratio_sup: h.max_ratio,
                    });
                    (i as u32, r)
                })
                .collect();
            Ok(Results::Oracle(collect_ordered(out)?))
        }
        _ => {
            let mut jobs = Vec::new();
            let lengths = if config.experiment == ExperimentKind::IntervalLength {
                config.lengths.clone()
            } else {
                vec![config.lengths[0]]
            };
            for &length in &lengths {
                for (index, &k) in config.k_range.iter().enumerate() {
                    if config.experiment.is_perturbation() {
                        for s in [EpsilonStrategy::Plain, EpsilonStrategy::DataAware] {
                            jobs.push(SolveJob { index, k, length, strategy: Some(s) });
                        }
                    } else {
                        jobs.push(SolveJob { index, k, length, strategy: None });
                    }
                }
            }
            let out: Vec<_> = jobs
                .par_iter()
                .map(|job| {
                    let r = run_solve(config, job);
                    if let Ok(row) = &r {
                        log::info!(
                            "k = {}: {} dofs, {} PCG iterations, L2(H1) error {:.3e}",
                            row.k,
                            row.dofs,
                            row.pcg_iterations,
                            row.err_l2h1
                        );
                    }
                    (job.k, r)
                })
                .collect();
            Ok(Results::Solve { slice_times: config.slice_times.clone(), rows: collect_ordered(out)? })
        }
    }
}

/// [`run`] on a dedicated pool of `threads` workers (rayon's default if `None`).
pub fn run_with_threads(config: &ExperimentConfig, threads: Option<usize>) -> Result<Results> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| run(config))
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

const SLICE_PREFIX: &str = "err_slice@";

fn solve_header(slice_times: &[f64], rows: &[SolveRow]) -> Vec<String> {
    let mut h = vec!["k".to_string()];
    if rows.first().is_some_and(|r| r.length.is_some()) {
        h.push("L".into());
    }
    if rows.first().is_some_and(|r| r.strategy.is_some()) {
        h.push("strategy".into());
    }
    for c in [
        "dofs",
        "epsilon",
        "pcg_iterations",
        "stopping_value",
        "threshold",
        "converged",
        "residual_monotone",
        "functional",
        "functional_interpolant",
        "err_l2l2",
        "err_l2h1",
    ] {
        h.push(c.into());
    }
    h.extend(slice_times.iter().map(|t| format!("{SLICE_PREFIX}{t}")));
    h
}

/// Write results as CSV with a header row; reals carry 17 significant digits.
pub fn write_csv(results: &Results, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    match results {
        Results::Solve { slice_times, rows } => {
            w.write_record(solve_header(slice_times, rows))?;
            for r in rows {
                let mut rec = vec![r.k.to_string()];
                if let Some(l) = r.length {
                    rec.push(real(l));
                }
                if let Some(s) = &r.strategy {
                    rec.push(s.clone());
                }
                rec.extend([
                    r.dofs.to_string(),
                    real(r.epsilon),
                    r.pcg_iterations.to_string(),
                    real(r.stopping_value),
                    real(r.threshold),
                    r.converged.to_string(),
                    r.residual_monotone.to_string(),
                    real(r.functional),
                    real(r.functional_interpolant),
                    real(r.err_l2l2),
                    real(r.err_l2h1),
                ]);
                rec.extend(r.slice_errors.iter().map(|e| real(*e)));
                w.write_record(rec)?;
            }
        }
        Results::InfSup(rows) => {
            w.write_record(["k", "dofs", "gamma_infsup"])?;
            for r in rows {
                w.write_record([r.k.to_string(), r.dofs.to_string(), real(r.gamma_infsup)])?;
            }
        }
        Results::Oracle(rows) => {
            w.write_record(["sample", "logconv_violation", "smoothing_sup", "hbeta_ratio_sup"])?;
            for r in rows {
                w.write_record([
                    r.sample.to_string(),
                    real(r.logconv_violation),
                    real(r.smoothing_sup),
                    real(r.hbeta_ratio_sup),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn bad_csv(line: usize, message: String) -> Error {
    Error::Config { line, message }
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, line: usize) -> Result<T> {
    let s = rec.get(idx).ok_or_else(|| bad_csv(line, format!("missing column {idx}")))?;
    s.parse().map_err(|_| bad_csv(line, format!("cannot parse `{s}` in column {idx}")))
}

/// Read a file produced by [`write_csv`]; the layout is inferred from the header.
pub fn read_csv(input: impl Read) -> Result<Results> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let records: Vec<csv::StringRecord> = r.records().collect::<std::result::Result<_, _>>()?;
    let first = header.first().map(String::as_str);
    if first == Some("sample") {
        let rows = records
            .iter()
            .enumerate()
            .map(|(i, rec)| {
                Ok(OracleRow {
                    sample: field(rec, 0, i + 2)?,
                    logconv_violation: field(rec, 1, i + 2)?,
                    smoothing_sup: field(rec, 2, i + 2)?,
                    hbeta_ratio_sup: field(rec, 3, i + 2)?,
                })
            })
            .collect::<Result<_>>()?;
        return Ok(Results::Oracle(rows));
    }
    if header.iter().any(|h| h == "gamma_infsup") {
        let rows = records
            .iter()
            .enumerate()
            .map(|(i, rec)| {
                Ok(InfSupRow { k: field(rec, 0, i + 2)?, dofs: field(rec, 1, i + 2)?, gamma_infsup: field(rec, 2, i + 2)? })
            })
            .collect::<Result<_>>()?;
        return Ok(Results::InfSup(rows));
    }
    if first != Some("k") {
        return Err(bad_csv(1, "unrecognized results header".into()));
    }
    let has_length = header.iter().any(|h| h == "L");
    let has_strategy = header.iter().any(|h| h == "strategy");
    let slice_times = header
        .iter()
        .filter_map(|h| h.strip_prefix(SLICE_PREFIX))
        .map(|t| t.parse::<f64>().map_err(|_| bad_csv(1, format!("bad slice column `{t}`"))))
        .collect::<Result<Vec<_>>>()?;
    let base = 1 + has_length as usize + has_strategy as usize;
    let mut rows = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let line = i + 2;
        let mut c = 1;
        let length = if has_length {
            c += 1;
            Some(field(rec, c - 1, line)?)
        } else {
            None
        };
        let strategy = if has_strategy {
            c += 1;
            Some(field::<String>(rec, c - 1, line)?)
        } else {
            None
        };
        let slice_errors = (0..slice_times.len())
            .map(|j| field(rec, base + 11 + j, line))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(SolveRow {
            k: field(rec, 0, line)?,
            length,
            strategy,
            dofs: field(rec, base, line)?,
            epsilon: field(rec, base + 1, line)?,
            pcg_iterations: field(rec, base + 2, line)?,
            stopping_value: field(rec, base + 3, line)?,
            threshold: field(rec, base + 4, line)?,
            converged: field(rec, base + 5, line)?,
            residual_monotone: field(rec, base + 6, line)?,
            functional: field(rec, base + 7, line)?,
            functional_interpolant: field(rec, base + 8, line)?,
            err_l2l2: field(rec, base + 9, line)?,
            err_l2h1: field(rec, base + 10, line)?,
            slice_errors,
        });
    }
    Ok(Results::Solve { slice_times, rows })
}
