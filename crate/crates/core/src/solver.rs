//! Frank-Wolfe descent on `σ_c` with exact line search, a multi-restart
//! driver sharing one global iteration budget, and an exhaustive oracle
//! for small instances.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{
    normalize_pair, normalized_distortion_gap, trivial_lower_bound, MetricSpace, RHO_WORK_LIMIT,
};
use crate::polytope::{
    lmo, project_to_vertex, vertex_count, MappingPair, SoftBimapping, VERTEX_ENUMERATION_LIMIT,
};
use crate::relaxation::{build_blocks, safe_c_threshold, BlockSystem, SafeC};

/// Absolute tolerance (on normalized distances) for matching the upper
/// bound against the lower bound.
pub const EXACTNESS_TOLERANCE: f64 = 1e-12;

/// Ceiling for automatically chosen `c`.
pub const AUTO_C_CAP: f64 = 1e8;

/// Floor for automatically chosen `c`.
pub const AUTO_C_FLOOR: f64 = 2.0;

/// With a fixed `c` the distortion gap is only computed for the report,
/// so a much smaller work cap applies.
const REPORT_RHO_LIMIT: u128 = 1_000_000;

/// Default for [`SolverConfig::run_iteration_cap`].
pub const DEFAULT_RUN_CAP: usize = 100;

/// How the exponentiation base is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CChoice {
    /// `min(safe threshold, 1e8)`, at least 2; 2 when the distortion gap
    /// is too expensive to compute.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub c: CChoice,
    /// Frank-Wolfe iterations shared by all restarts.
    pub iteration_budget: usize,
    pub gap_tolerance: f64,
    pub max_restarts: Option<usize>,
    pub seed: u64,
    pub parallel_runs: usize,
    /// Iterations after which a single restart is abandoned. Frank-Wolfe
    /// can zig-zag for a long time toward a stationary point inside a
    /// face; without a cap one such run consumes the whole budget.
    pub run_iteration_cap: Option<usize>,
    pub record_traces: bool,
    pub rho_work_limit: u128,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            c: CChoice::Auto,
            iteration_budget: 1000,
            gap_tolerance: 1e-16,
            max_restarts: None,
            seed: 0,
            parallel_runs: 1,
            run_iteration_cap: Some(DEFAULT_RUN_CAP),
            record_traces: false,
            rho_work_limit: RHO_WORK_LIMIT,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iteration_budget == 0 {
            return Err(Error::InvalidParameter("iteration budget must be at least 1".into()));
        }
        if !(self.gap_tolerance >= 0.0) {
            return Err(Error::InvalidParameter("gap tolerance must be nonnegative".into()));
        }
        if self.parallel_runs == 0 {
            return Err(Error::InvalidParameter("parallel runs must be at least 1".into()));
        }
        if self.run_iteration_cap == Some(0) {
            return Err(Error::InvalidParameter("run iteration cap must be at least 1".into()));
        }
        if let CChoice::Fixed(c) = self.c {
            if !(c >= 1.0) || !c.is_finite() {
                return Err(Error::InvalidParameter(format!("c must be >= 1, got {c}")));
            }
        }
        Ok(())
    }
}

/// Iterations left across all restarts. Safe to share between threads.
#[derive(Debug)]
pub struct IterationBudget {
    remaining: AtomicUsize,
}

impl IterationBudget {
    pub fn new(iterations: usize) -> Self {
        Self {
            remaining: AtomicUsize::new(iterations),
        }
    }

    /// Takes one iteration; false once the budget is spent.
    pub fn try_take(&self) -> bool {
        self.remaining
            .fetch_update(Ordering::AcqRel, Ordering::Acquire, |r| r.checked_sub(1))
            .is_ok()
    }

    pub fn remaining(&self) -> usize {
        self.remaining.load(Ordering::Acquire)
    }

    /// Spends everything that is left, stopping all runs at their next
    /// iteration.
    pub fn drain(&self) {
        self.remaining.store(0, Ordering::Release);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub sigma: f64,
    pub gap: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    GapConverged,
    BudgetExhausted,
    /// The per-restart iteration cap was hit first.
    RunCapReached,
}

/// Per-iteration history of one Frank-Wolfe run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    pub termination: Termination,
}

/// Result of an exact line search.
#[derive(Debug, Clone)]
pub struct LineStep {
    pub gamma: f64,
    pub point: SoftBimapping,
}

/// Minimizes `φ(γ) = σ((1−γ)S + γR)` over `[0, 1]`.
pub fn line_search(blocks: &BlockSystem, s: &SoftBimapping, r: &MappingPair) -> Result<LineStep> {
    let dense = s.to_dense();
    let ms = blocks.operator(&dense)?;
    let mr = blocks.operator_at_vertex(r)?;
    let direction = r.to_point().to_dense() - &dense;
    let gamma = optimal_step(&direction, &ms, &mr)?;
    Ok(LineStep {
        gamma,
        point: s.move_toward(r, gamma),
    })
}

/// The step for `φ(γ) = σ(S) + γ⟨D, ∇σ(S)⟩ + γ²σ(D)` with `D = R − S`,
/// using `M(D) = M(R) − M(S)`.
fn optimal_step(direction: &DMatrix<f64>, ms: &DMatrix<f64>, mr: &DMatrix<f64>) -> Result<f64> {
    let linear = 2.0 * direction.dot(ms);
    let quadratic = direction.dot(&(mr - ms));
    if !linear.is_finite() || !quadratic.is_finite() {
        return Err(Error::NonFiniteResult);
    }
    let gamma = if quadratic > 0.0 {
        (-linear / (2.0 * quadratic)).clamp(0.0, 1.0)
    } else if linear + quadratic < 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(gamma)
}

/// Outcome of [`fw_run`].
#[derive(Debug, Clone)]
pub struct FwRun {
    pub point: SoftBimapping,
    pub trace: RunTrace,
    /// Iterations charged to the budget, including the final convergence
    /// check.
    pub iterations: usize,
}

/// Frank-Wolfe from `start` until the gap drops to `config.gap_tolerance`,
/// the shared budget runs out or the run hits its own iteration cap.
///
/// Every iteration takes one unit from `budget`: gradient, linear
/// minimization, gap check and (unless converged) an exact line search.
/// The trace is only filled when `config.record_traces` is set.
pub fn fw_run(
    blocks: &BlockSystem,
    start: SoftBimapping,
    config: &SolverConfig,
    budget: &IterationBudget,
) -> Result<FwRun> {
    let (n, m) = (blocks.n(), blocks.m());
    let mut dense = start.to_dense();
    // M(S); kept up to date through M((1−γ)S + γR) = (1−γ)M(S) + γM(R)
    let mut ms = blocks.operator(&dense)?;
    let mut records = Vec::new();
    let mut iterations = 0;
    let termination = loop {
        if config.run_iteration_cap.is_some_and(|cap| iterations >= cap) {
            break Termination::RunCapReached;
        }
        if !budget.try_take() {
            break Termination::BudgetExhausted;
        }
        iterations += 1;
        let grad = &ms * 2.0;
        let (vertex, _) = lmo(&grad, n, m)?;
        let gap = frank_wolfe_gap(&dense, &grad, &vertex, n);
        let sigma = dense.dot(&ms);
        if !gap.is_finite() || !sigma.is_finite() {
            return Err(Error::NonFiniteResult);
        }
        if gap <= config.gap_tolerance {
            if config.record_traces {
                records.push(TraceRecord { sigma, gap, gamma: 0.0 });
            }
            break Termination::GapConverged;
        }
        let mr = blocks.operator_at_vertex(&vertex)?;
        let mut direction = -&dense;
        for (row, col) in vertex.dense_columns().into_iter().enumerate() {
            direction[(row, col)] += 1.0;
        }
        let gamma = optimal_step(&direction, &ms, &mr)?;
        if config.record_traces {
            records.push(TraceRecord { sigma, gap, gamma });
        }
        if gamma == 0.0 {
            // no descent along the segment; numerically stationary
            break Termination::GapConverged;
        }
        if gamma == 1.0 {
            dense = vertex.to_point().to_dense();
            ms = mr;
        } else {
            dense *= 1.0 - gamma;
            for (row, col) in vertex.dense_columns().into_iter().enumerate() {
                dense[(row, col)] += gamma;
            }
            ms = ms * (1.0 - gamma) + mr * gamma;
        }
    };
    Ok(FwRun {
        point: SoftBimapping::from_dense_unchecked(&dense, n, m),
        trace: RunTrace {
            records,
            termination,
        },
        iterations,
    })
}

/// `⟨S − R, ∇σ(S)⟩` accumulated row by row as `Σ s_ij (g_ij − min_j g_ij)`,
/// so every term is nonnegative in floating point.
fn frank_wolfe_gap(dense: &DMatrix<f64>, grad: &DMatrix<f64>, vertex: &MappingPair, n: usize) -> f64 {
    let m = vertex.m();
    let mut gap = 0.0;
    for (row, col) in vertex.dense_columns().into_iter().enumerate() {
        let cols = if row < n { 0..m } else { m..m + n };
        let best = grad[(row, col)];
        for j in cols {
            gap += dense[(row, j)] * (grad[(row, j)] - best);
        }
    }
    gap
}

/// Everything [`estimate_dgh`] found.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Best mapping pair, oriented as the caller passed the spaces.
    pub best_pair: MappingPair,
    /// Distortion of `best_pair` in input units.
    pub dis_best: f64,
    pub dgh_upper: f64,
    pub dgh_lower: f64,
    /// The upper bound met the lower bound, so the distance is certified.
    pub exact: bool,
    pub c_used: f64,
    /// Distortion gap of the normalized inputs (the scale on which `c` acts).
    pub rho: Option<f64>,
    /// Whether `c_used` is at least the safe threshold for `rho`.
    pub c_certified: Option<bool>,
    pub iterations_used: usize,
    pub restarts_completed: usize,
    pub wall_time: f64,
    pub traces: Option<Vec<RunTrace>>,
    pub notes: Vec<String>,
}

/// The fixed JSON shape of a [`SolveReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReportJson {
    pub dgh_upper: f64,
    pub dgh_lower: f64,
    pub exact: bool,
    pub c: f64,
    pub rho: Option<f64>,
    pub iterations: usize,
    pub restarts: usize,
    pub seconds: f64,
    pub f: Vec<usize>,
    pub g: Vec<usize>,
}

impl SolveReport {
    pub fn to_json(&self) -> SolveReportJson {
        SolveReportJson {
            dgh_upper: self.dgh_upper,
            dgh_lower: self.dgh_lower,
            exact: self.exact,
            c: self.c_used,
            rho: self.rho,
            iterations: self.iterations_used,
            restarts: self.restarts_completed,
            seconds: self.wall_time,
            f: self.best_pair.f.clone(),
            g: self.best_pair.g.clone(),
        }
    }
}

/// The automatic choice of `c` given the safe threshold, if known.
pub fn auto_c(threshold: Option<SafeC>) -> f64 {
    match threshold {
        Some(t) => t.value.min(AUTO_C_CAP).max(AUTO_C_FLOOR),
        None => AUTO_C_FLOOR,
    }
}

struct Best {
    dis: f64,
    restart: usize,
    pair: MappingPair,
}

struct RestartOutcome {
    restart: usize,
    dis: f64,
    pair: MappingPair,
    iterations: usize,
    trace: RunTrace,
}

/// Upper and lower bounds on the Gromov-Hausdorff distance.
///
/// Inputs are oriented so the larger space comes first and normalized to
/// unit diameter. Each restart draws a random start, runs Frank-Wolfe,
/// projects onto the nearest vertex and measures its distortion. The
/// driver stops early once half the best distortion meets the trivial
/// lower bound.
pub fn estimate_dgh(a: &MetricSpace, b: &MetricSpace, config: &SolverConfig) -> Result<SolveReport> {
    config.validate()?;
    let started = Instant::now();
    let swapped = a.size() < b.size();
    let (big, small) = if swapped { (b, a) } else { (a, b) };
    let (x, y, record) = normalize_pair(big, small)?;
    let lower = trivial_lower_bound(&x, &y);
    let mut notes = Vec::new();

    let rho_limit = match config.c {
        CChoice::Auto => config.rho_work_limit,
        CChoice::Fixed(_) => config.rho_work_limit.min(REPORT_RHO_LIMIT),
    };
    let rho = match normalized_distortion_gap(big, small, rho_limit) {
        Ok(r) => Some(r),
        Err(Error::WorkLimitExceeded { .. }) => None,
        Err(e) => return Err(e),
    };
    let threshold = match rho {
        Some(r) => Some(safe_c_threshold(x.size(), y.size(), r)?),
        None => None,
    };
    let c = match config.c {
        CChoice::Fixed(c) => c,
        CChoice::Auto => {
            if threshold.is_none() {
                notes.push("distortion gap unavailable; using c = 2".to_string());
            }
            auto_c(threshold)
        }
    };
    let c_certified = threshold.map(|t| !t.capped && c >= t.value);
    if let Some(t) = threshold {
        if t.capped {
            notes.push("safe threshold exceeds the overflow guard; guarantee not certified".into());
        }
    }

    let blocks = build_blocks(&x, &y, c)?;
    let budget = IterationBudget::new(config.iteration_budget);
    let next_restart = AtomicUsize::new(0);
    let certified = AtomicBool::new(false);
    let best: Mutex<Option<Best>> = Mutex::new(None);
    let traces: Mutex<Vec<(usize, RunTrace)>> = Mutex::new(Vec::new());
    let totals = Mutex::new((0usize, 0usize));

    let worker = || -> Result<()> {
        loop {
            if certified.load(Ordering::Acquire) || budget.remaining() == 0 {
                return Ok(());
            }
            let restart = next_restart.fetch_add(1, Ordering::AcqRel);
            if config.max_restarts.is_some_and(|cap| restart >= cap) {
                return Ok(());
            }
            let Some(outcome) = run_restart(&blocks, config, &budget, restart)? else {
                return Ok(());
            };
            {
                let mut t = totals.lock().unwrap();
                t.0 += outcome.iterations;
                t.1 += 1;
            }
            if config.record_traces {
                traces.lock().unwrap().push((outcome.restart, outcome.trace));
            }
            let mut guard = best.lock().unwrap();
            let improves = match guard.as_ref() {
                None => true,
                Some(cur) => (outcome.dis, outcome.restart) < (cur.dis, cur.restart),
            };
            if improves {
                if 0.5 * outcome.dis <= lower + EXACTNESS_TOLERANCE {
                    certified.store(true, Ordering::Release);
                    budget.drain();
                }
                *guard = Some(Best {
                    dis: outcome.dis,
                    restart: outcome.restart,
                    pair: outcome.pair,
                });
            }
        }
    };

    if config.parallel_runs == 1 {
        worker()?;
    } else {
        std::thread::scope(|scope| -> Result<()> {
            let handles: Vec<_> = (0..config.parallel_runs).map(|_| scope.spawn(&worker)).collect();
            for h in handles {
                h.join().expect("solver worker panicked")?;
            }
            Ok(())
        })?;
    }

    let best = best
        .into_inner()
        .unwrap()
        .expect("a positive budget always completes at least one restart");
    let (iterations_used, restarts_completed) = totals.into_inner().unwrap();
    let best_pair = if swapped { best.pair.swapped() } else { best.pair };
    let half = 0.5 * best.dis;
    let exact = half - lower <= EXACTNESS_TOLERANCE;
    let traces = config.record_traces.then(|| {
        let mut t = traces.into_inner().unwrap();
        t.sort_by_key(|(restart, _)| *restart);
        t.into_iter().map(|(_, trace)| trace).collect()
    });

    Ok(SolveReport {
        best_pair,
        dis_best: record.rescale(best.dis),
        dgh_upper: record.rescale(half),
        dgh_lower: record.rescale(lower),
        exact,
        c_used: c,
        rho,
        c_certified,
        iterations_used,
        restarts_completed,
        wall_time: started.elapsed().as_secs_f64(),
        traces,
        notes,
    })
}

fn run_restart(
    blocks: &BlockSystem,
    config: &SolverConfig,
    budget: &IterationBudget,
    restart: usize,
) -> Result<Option<RestartOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(restart as u64);
    let start = SoftBimapping::random(blocks.n(), blocks.m(), &mut rng);
    let run = fw_run(blocks, start, config, budget)?;
    if run.iterations == 0 {
        return Ok(None);
    }
    let pair = project_to_vertex(&run.point);
    let dis = blocks.distortion(&pair)?;
    Ok(Some(RestartOutcome {
        restart,
        dis,
        pair,
        iterations: run.iterations,
        trace: run.trace,
    }))
}

/// Exact `d_GH` by exhaustive search over all mapping pairs, with one
/// minimizing pair. Works on raw (unnormalized) distances.
///
/// The distortion splits into a part depending only on `f`, a part
/// depending only on `g`, and a cross part; candidates for `f` and `g` are
/// visited in order of their own part so whole tails can be cut once they
/// cannot beat the incumbent.
pub fn brute_force_dgh(a: &MetricSpace, b: &MetricSpace) -> Result<(f64, MappingPair)> {
    brute_force_dgh_with_limit(a, b, VERTEX_ENUMERATION_LIMIT)
}

pub fn brute_force_dgh_with_limit(
    a: &MetricSpace,
    b: &MetricSpace,
    limit: u128,
) -> Result<(f64, MappingPair)> {
    let (n, m) = (a.size(), b.size());
    let count = vertex_count(n, m).unwrap_or(u128::MAX);
    if count > limit {
        return Err(Error::TooLarge { count, limit });
    }
    let fs = sorted_maps(a, b, n, m);
    let gs = sorted_maps(b, a, m, n);

    let mut best_dis = f64::INFINITY;
    let mut best_pair = None;
    for (f_dis, f) in &fs {
        if *f_dis >= best_dis {
            break;
        }
        for (g_dis, g) in &gs {
            let partial = f_dis.max(*g_dis);
            if partial >= best_dis {
                break;
            }
            let mut worst = partial;
            'cross: for (i, &fi) in f.iter().enumerate() {
                for (j, &gj) in g.iter().enumerate() {
                    worst = worst.max((b.get(fi, j) - a.get(i, gj)).abs());
                    if worst >= best_dis {
                        break 'cross;
                    }
                }
            }
            if worst < best_dis {
                best_dis = worst;
                best_pair = Some(MappingPair {
                    f: f.clone(),
                    g: g.clone(),
                });
            }
        }
    }
    Ok((0.5 * best_dis, best_pair.expect("at least one mapping pair exists")))
}

/// All maps `0..len → 0..radix` with their one-sided distortion
/// `max |d_src(i,j) − d_dst(h(i),h(j))|`, sorted ascending.
fn sorted_maps(src: &MetricSpace, dst: &MetricSpace, len: usize, radix: usize) -> Vec<(f64, Vec<usize>)> {
    let mut out = Vec::new();
    let mut map = vec![0usize; len];
    loop {
        let mut worst = 0.0f64;
        for i in 0..len {
            for j in (i + 1)..len {
                worst = worst.max((src.get(i, j) - dst.get(map[i], map[j])).abs());
            }
        }
        out.push((worst, map.clone()));
        let mut pos = 0;
        loop {
            if pos == len {
                out.sort_by(|a, b| a.0.total_cmp(&b.0));
                return out;
            }
            map[pos] += 1;
            if map[pos] < radix {
                break;
            }
            map[pos] = 0;
            pos += 1;
        }
    }
}

/// `½ min dis` over bijections `f` with `g = f⁻¹`, for equal-size spaces.
/// `None` when the sizes differ.
pub fn brute_force_bijective(a: &MetricSpace, b: &MetricSpace) -> Result<Option<(f64, MappingPair)>> {
    let n = a.size();
    if n != b.size() {
        return Ok(None);
    }
    let count: u128 = (1..=n as u128).product();
    if count > VERTEX_ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            count,
            limit: VERTEX_ENUMERATION_LIMIT,
        });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = (f64::INFINITY, perm.clone());
    loop {
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((a.get(i, j) - b.get(perm[i], perm[j])).abs());
            }
        }
        if worst < best.0 {
            best = (worst, perm.clone());
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    let f = best.1;
    let mut g = vec![0; n];
    for (i, &j) in f.iter().enumerate() {
        g[j] = i;
    }
    Ok(Some((0.5 * best.0, MappingPair { f, g })))
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = p.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = p.iter().rposition(|&v| v > p[i]).unwrap();
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}
