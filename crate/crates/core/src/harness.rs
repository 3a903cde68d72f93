//! Experiment plumbing: solving into run records, benchmark statistics,
//! schedule × noise ablations, the unit-gain stopping rule and spike PCA.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anneal::{NoiseDist, ScheduleKind};
use crate::io::{IoError, RunRecord, RUN_RECORD_SCHEMA};
use crate::ising::{IsingProblem, StateVector};
use crate::network::{replica_config, run, Network, NetworkError, RunTrace, SolverConfig, SpikeEvent, TraceRecorder};
use crate::problems::{
    cut_from_energy, cut_value, maxcut_encode, mis_decode, mis_encode, GraphError, ProblemKind, WeightedGraph,
};

/// Best-known Gset cut values, `graph,kind,best_known[,reported_deficit]`.
pub const BUILTIN_SOTA: &str = include_str!("../data/gset_best_known.csv");

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("reference table: {0}")]
    Sota(String),
    #[error("window must exceed overlap (window {window}, overlap {overlap})")]
    BadWindow { window: u64, overlap: u64 },
    #[error("{windows} windows cannot support {components} components")]
    TooFewWindows { windows: usize, components: usize },
    #[error("spike counts have zero variance; projection undefined")]
    Degenerate,
    #[error("eigen-decomposition did not converge")]
    Eigen,
    #[error("no runs requested")]
    NoRuns,
}

/// Published best values keyed by `(graph name, kind)`; names compare
/// case-insensitively.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SotaTable {
    entries: BTreeMap<(String, ProblemKind), f64>,
}

#[derive(Deserialize)]
struct SotaRow {
    graph: String,
    kind: ProblemKind,
    best_known: f64,
}

impl SotaTable {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_SOTA).expect("bundled table is valid")
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut entries = BTreeMap::new();
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        for row in reader.deserialize::<SotaRow>() {
            let row = row.map_err(|e| HarnessError::Sota(e.to_string()))?;
            entries.insert((row.graph.to_ascii_lowercase(), row.kind), row.best_known);
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Sota(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, graph: &str, kind: ProblemKind) -> Option<f64> {
        self.entries.get(&(graph.to_ascii_lowercase(), kind)).copied()
    }

    pub fn insert(&mut self, graph: &str, kind: ProblemKind, value: f64) {
        self.entries.insert((graph.to_ascii_lowercase(), kind), value);
    }

    /// Entries of `other` override ours.
    pub fn merge(&mut self, other: SotaTable) {
        self.entries.extend(other.entries);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn normalized_quality(achieved: f64, sota: Option<f64>) -> Option<f64> {
    sota.filter(|&s| s != 0.0).map(|s| achieved / s)
}

/// A graph together with its Ising encoding.
#[derive(Debug, Clone)]
pub struct Instance {
    pub graph: WeightedGraph,
    pub kind: ProblemKind,
    pub mis_beta: f64,
    pub problem: IsingProblem,
}

impl Instance {
    pub fn new(graph: WeightedGraph, kind: ProblemKind, mis_beta: f64) -> Result<Self, HarnessError> {
        let problem = match kind {
            ProblemKind::Maxcut => maxcut_encode(&graph)?,
            ProblemKind::Mis => mis_encode(&graph, mis_beta)?,
        };
        Ok(Self {
            graph,
            kind,
            mis_beta,
            problem,
        })
    }

    /// Objective (cut weight, or penalized set size) of a state with energy `e`.
    pub fn objective_from_energy(&self, e: f64) -> f64 {
        match self.kind {
            ProblemKind::Maxcut => cut_from_energy(&self.graph, e),
            ProblemKind::Mis => -2.0 * e,
        }
    }

    /// Cut weight, or size of the repaired independent set.
    pub fn value_of(&self, state: &StateVector) -> f64 {
        match self.kind {
            ProblemKind::Maxcut => cut_value(&self.graph, &state.0) as f64,
            ProblemKind::Mis => {
                mis_decode(&self.graph, state, true)
                    .expect("state from this instance")
                    .size as f64
            }
        }
    }

    pub fn record(&self, trace: &RunTrace, cfg: &SolverConfig, wall_time_seconds: Option<f64>) -> RunRecord {
        RunRecord {
            schema_version: RUN_RECORD_SCHEMA,
            problem: self.graph.name.clone(),
            kind: self.kind,
            mis_beta: (self.kind == ProblemKind::Mis).then_some(self.mis_beta),
            config: cfg.clone(),
            best_value: self.value_of(&trace.best_state),
            best_energy: trace.best_energy,
            best_state: trace.best_state.to_bitstring(),
            iterations: trace.iterations,
            wall_time_seconds,
            spike_count: trace.spike_count,
            best_series: trace
                .samples
                .iter()
                .map(|s| (s.iteration, self.objective_from_energy(s.best_energy)))
                .collect(),
            gains: trace
                .improvements
                .iter()
                .map(|&(i, e)| (i, self.objective_from_energy(e)))
                .collect(),
        }
    }
}

/// Log of unit improvements of a maximized objective.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTracker {
    unit: f64,
    reference: f64,
    events: Vec<(u64, f64)>,
}

impl GainTracker {
    /// `baseline` is the objective at iteration 0 and is not itself a gain.
    pub fn new(unit: f64, baseline: f64) -> Self {
        Self {
            unit,
            reference: baseline,
            events: Vec::new(),
        }
    }

    pub fn from_gains(unit: f64, baseline: f64, gains: &[(u64, f64)]) -> Self {
        let mut t = Self::new(unit, baseline);
        for &(i, v) in gains {
            t.observe(i, v);
        }
        t
    }

    /// Records a gain if `value` beats the last recorded one by at least a unit.
    pub fn observe(&mut self, iteration: u64, value: f64) -> bool {
        if value >= self.reference + self.unit * (1.0 - 1e-9) {
            self.reference = value;
            self.events.push((iteration, value));
            true
        } else {
            false
        }
    }

    pub fn events(&self) -> &[(u64, f64)] {
        &self.events
    }

    /// Time to the latest unit gain over elapsed time at `now`: the larger of
    /// the gap since the last gain and the gap between the last two gains
    /// (the first gain is measured from iteration 0). `None` before any gain.
    pub fn ratio(&self, now: u64) -> Option<f64> {
        let &(last, _) = self.events.last()?;
        if now == 0 {
            return None;
        }
        let prev = match self.events.len() {
            1 => 0,
            k => self.events[k - 2].0,
        };
        let gap = now.saturating_sub(last).max(last - prev);
        Some((gap as f64 / now as f64).min(1.0))
    }
}

pub fn stopping_ratio(tracker: &GainTracker, now: u64) -> Option<f64> {
    tracker.ratio(now)
}

/// Smallest nonzero `|ΔH|` among the given flips, the gain unit for
/// problems without a natural one.
pub fn smallest_energy_quantum(deltas: impl IntoIterator<Item = f64>) -> Option<f64> {
    deltas
        .into_iter()
        .map(f64::abs)
        .filter(|&d| d > 1e-12)
        .min_by(f64::total_cmp)
}

/// Stop once the stopping ratio exceeds `ratio`, checked every `check_every`
/// iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HaltRule {
    pub ratio: f64,
    pub check_every: u64,
}

/// One run of `cfg`, optionally cut short by `halt`.
pub fn solve_one(instance: &Instance, cfg: &SolverConfig, halt: Option<HaltRule>) -> Result<RunTrace, HarnessError> {
    let Some(rule) = halt else {
        return Ok(run(&instance.problem, cfg)?);
    };
    let mut net = Network::new(&instance.problem, cfg, None)?;
    let e0 = instance.problem.energy_unchecked(net.spins());
    let mut rec = TraceRecorder::new(cfg, e0, net.spins());
    let mut tracker = GainTracker::new(1.0, instance.objective_from_energy(e0));
    let check = rule.check_every.max(1);
    for _ in 0..cfg.max_iter {
        if let Some(ev) = net.step() {
            rec.spike(ev, net.spins());
            if ev.delta_h < 0.0 {
                tracker.observe(ev.iteration, instance.objective_from_energy(rec.best()));
            }
        }
        let n = net.iteration();
        rec.tick(n, net.last_threshold(), net.temperature());
        if n % check == 0 && tracker.ratio(n).is_some_and(|r| r > rule.ratio) {
            break;
        }
    }
    let spins = net.spins().to_vec();
    Ok(rec.finish(net.iteration(), net.last_threshold(), net.temperature(), spins))
}

fn run_pool<T: Send>(
    instance: &Instance,
    cfgs: &[SolverConfig],
    workers: usize,
    halt: Option<HaltRule>,
    record_time: bool,
    keep: impl Fn(RunRecord, RunTrace) -> T + Sync,
) -> Result<Vec<T>, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| {
        cfgs.par_iter()
            .map(|cfg| {
                let start = Instant::now();
                let trace = solve_one(instance, cfg, halt)?;
                let wall = record_time.then(|| start.elapsed().as_secs_f64());
                Ok(keep(instance.record(&trace, cfg, wall), trace))
            })
            .collect()
    })
}

/// Runs every config on a pool of `workers` threads; output order follows
/// `cfgs`.
pub fn run_jobs(
    instance: &Instance,
    cfgs: &[SolverConfig],
    workers: usize,
    halt: Option<HaltRule>,
    record_time: bool,
) -> Result<Vec<RunRecord>, HarnessError> {
    run_pool(instance, cfgs, workers, halt, record_time, |r, _| r)
}

/// [`run_jobs`], keeping each run's trace.
pub fn run_traces(
    instance: &Instance,
    cfgs: &[SolverConfig],
    workers: usize,
    halt: Option<HaltRule>,
    record_time: bool,
) -> Result<Vec<(RunRecord, RunTrace)>, HarnessError> {
    run_pool(instance, cfgs, workers, halt, record_time, |r, t| (r, t))
}

/// `replicas` runs of `cfg` with derived seeds.
pub fn solve(
    instance: &Instance,
    cfg: &SolverConfig,
    replicas: usize,
    workers: usize,
    halt: Option<HaltRule>,
    record_time: bool,
) -> Result<Vec<RunRecord>, HarnessError> {
    if replicas == 0 {
        return Err(HarnessError::NoRuns);
    }
    let cfgs: Vec<_> = (0..replicas as u64).map(|k| replica_config(cfg, k)).collect();
    run_jobs(instance, &cfgs, workers, halt, record_time)
}

/// First iteration at which the recorded objective reached `target`.
pub fn iterations_to_reach(record: &RunRecord, target: f64) -> Option<u64> {
    if let Some(&(i, v)) = record.best_series.first() {
        if v >= target {
            return Some(i);
        }
    }
    record.gains.iter().find(|g| g.1 >= target).map(|g| g.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (0 for a single value).
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(xs: &[f64]) -> Option<Summary> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some(Summary {
        count: xs.len(),
        mean,
        sd: var.sqrt(),
        min: xs.iter().copied().fold(f64::INFINITY, f64::min),
        max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `0.9·min(σ, IQR/1.34)·n^(−1/5)`, falling back to σ when the IQR is zero.
pub fn silverman_bandwidth(xs: &[f64]) -> f64 {
    let Some(s) = summarize(xs) else { return 0.0 };
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { s.sd.min(iqr / 1.34) } else { s.sd };
    0.9 * spread * (xs.len() as f64).powf(-0.2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Density {
    /// All samples equal.
    Degenerate {
        at: f64,
    },
    Grid {
        bandwidth: f64,
        points: Vec<(f64, f64)>,
    },
}

/// Gaussian kernel density estimate on a grid covering eight bandwidths past
/// the extreme samples, with spacing at most an eighth of a bandwidth.
pub fn kde(xs: &[f64]) -> Option<Density> {
    let s = summarize(xs)?;
    let h = silverman_bandwidth(xs);
    if h.is_nan() || h <= 0.0 {
        return Some(Density::Degenerate { at: s.mean });
    }
    let lo = s.min - 8.0 * h;
    let hi = s.max + 8.0 * h;
    let steps = (((hi - lo) / (h / 8.0)).ceil() as usize).clamp(64, 200_000);
    let norm = 1.0 / (xs.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let points = (0..=steps)
        .map(|k| {
            let x = lo + (hi - lo) * k as f64 / steps as f64;
            let d: f64 = xs.iter().map(|&v| (-0.5 * ((x - v) / h).powi(2)).exp()).sum();
            (x, d * norm)
        })
        .collect();
    Some(Density::Grid { bandwidth: h, points })
}

/// Trapezoidal integral of a density grid.
pub fn integrate(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width bins over `[min, max]`; the last bin is closed.
pub fn histogram(xs: &[f64], bins: usize) -> Vec<Bin> {
    let Some(s) = summarize(xs) else { return Vec::new() };
    let bins = bins.max(1);
    if s.max == s.min {
        return vec![Bin {
            lo: s.min,
            hi: s.max,
            count: xs.len(),
        }];
    }
    let width = (s.max - s.min) / bins as f64;
    let mut out: Vec<Bin> = (0..bins)
        .map(|k| Bin {
            lo: s.min + width * k as f64,
            hi: if k + 1 == bins {
                s.max
            } else {
                s.min + width * (k + 1) as f64
            },
            count: 0,
        })
        .collect();
    for &x in xs {
        let k = (((x - s.min) / width) as usize).min(bins - 1);
        out[k].count += 1;
    }
    out
}

/// Structural descriptors used to group benchmark results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Complexity {
    pub vertices: usize,
    pub edges: usize,
    pub mean_fanout: f64,
    pub max_fanout: usize,
    /// Shannon entropy (bits) of the degree distribution.
    pub degree_entropy: f64,
    /// `3·triangles / connected triples`.
    pub transitivity: f64,
}

pub fn complexity(g: &WeightedGraph) -> Complexity {
    let deg = g.degrees();
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for &d in &deg {
        *hist.entry(d).or_default() += 1;
    }
    let n = g.n as f64;
    let degree_entropy = hist
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0);
    let adj = g.neighbors();
    let mut triangles = 0usize;
    for &(i, j, _) in &g.edges {
        // count each triangle once, at its two smallest vertices
        let (a, b) = (&adj[i], &adj[j]);
        let (mut x, mut y) = (0, 0);
        while x < a.len() && y < b.len() {
            match a[x].cmp(&b[y]) {
                std::cmp::Ordering::Less => x += 1,
                std::cmp::Ordering::Greater => y += 1,
                std::cmp::Ordering::Equal => {
                    if a[x] > j {
                        triangles += 1;
                    }
                    x += 1;
                    y += 1;
                }
            }
        }
    }
    let triples: usize = deg.iter().map(|&d| d * d.saturating_sub(1) / 2).sum();
    Complexity {
        vertices: g.n,
        edges: g.edge_count(),
        mean_fanout: 2.0 * g.edge_count() as f64 / n,
        max_fanout: deg.iter().copied().max().unwrap_or(0),
        degree_entropy,
        transitivity: if triples == 0 {
            0.0
        } else {
            3.0 * triangles as f64 / triples as f64
        },
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub graphs: Vec<WeightedGraph>,
    pub kind: ProblemKind,
    pub mis_beta: f64,
    pub runs: usize,
    pub config: SolverConfig,
    pub sota: SotaTable,
    pub workers: usize,
    pub record_time: bool,
    pub histogram_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphReport {
    pub graph: String,
    pub sota: Option<f64>,
    pub values: Vec<f64>,
    pub qualities: Option<Vec<f64>>,
    /// Of the qualities when a reference exists, else of the raw values.
    pub summary: Summary,
    pub density: Density,
    pub histogram: Vec<Bin>,
    pub complexity: Complexity,
    pub warning: Option<String>,
}

/// Statistics of one graph's runs, computed from the records alone.
pub fn graph_report(
    graph: &str,
    sota: Option<f64>,
    records: &[RunRecord],
    complexity: Complexity,
    bins: usize,
) -> Result<GraphReport, HarnessError> {
    let values: Vec<f64> = records.iter().map(|r| r.best_value).collect();
    let qualities = sota.map(|_| {
        values
            .iter()
            .map(|&v| normalized_quality(v, sota).unwrap_or(f64::NAN))
            .collect::<Vec<_>>()
    });
    let sample = qualities.as_deref().unwrap_or(&values);
    Ok(GraphReport {
        graph: graph.to_string(),
        sota,
        summary: summarize(sample).ok_or(HarnessError::NoRuns)?,
        density: kde(sample).ok_or(HarnessError::NoRuns)?,
        histogram: histogram(sample, bins),
        warning: sota
            .is_none()
            .then(|| format!("no reference value for {graph}; reporting raw values")),
        values,
        qualities,
        complexity,
    })
}

pub fn bench(spec: &BenchmarkSpec) -> Result<Vec<(GraphReport, Vec<RunRecord>)>, HarnessError> {
    let mut out = Vec::with_capacity(spec.graphs.len());
    for g in &spec.graphs {
        let instance = Instance::new(g.clone(), spec.kind, spec.mis_beta)?;
        let records = solve(&instance, &spec.config, spec.runs, spec.workers, None, spec.record_time)?;
        let report = graph_report(
            &g.name,
            spec.sota.get(&g.name, spec.kind),
            &records,
            complexity(g),
            spec.histogram_bins,
        )?;
        out.push((report, records));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub schedule: ScheduleKind,
    pub noise: NoiseDist,
    pub values: Vec<f64>,
    pub qualities: Option<Vec<f64>>,
    pub summary: Summary,
}

/// Every `schedule × noise` cell with `runs` derived seeds each, ordered
/// cell-major. Schedule parameters and the noise mean come from `base`.
pub fn ablation_configs(
    base: &SolverConfig,
    schedules: &[ScheduleKind],
    noises: &[NoiseDist],
    runs: usize,
) -> Vec<(ScheduleKind, NoiseDist, SolverConfig)> {
    let mut out = Vec::with_capacity(schedules.len() * noises.len() * runs);
    for &schedule in schedules {
        for &noise in noises {
            for k in 0..runs as u64 {
                let mut cfg = replica_config(base, k);
                cfg.schedule.kind = schedule;
                cfg.noise.dist = noise;
                out.push((schedule, noise, cfg));
            }
        }
    }
    out
}

pub fn ablate(
    instance: &Instance,
    base: &SolverConfig,
    schedules: &[ScheduleKind],
    noises: &[NoiseDist],
    runs: usize,
    workers: usize,
    sota: Option<f64>,
) -> Result<(Vec<AblationCell>, Vec<RunRecord>), HarnessError> {
    if runs == 0 {
        return Err(HarnessError::NoRuns);
    }
    let grid = ablation_configs(base, schedules, noises, runs);
    let cfgs: Vec<_> = grid.iter().map(|g| g.2.clone()).collect();
    let records = run_jobs(instance, &cfgs, workers, None, false)?;
    let cells = grid
        .chunks(runs)
        .zip(records.chunks(runs))
        .map(|(g, recs)| {
            let values: Vec<f64> = recs.iter().map(|r| r.best_value).collect();
            let qualities = sota.map(|s| values.iter().map(|v| v / s).collect::<Vec<_>>());
            AblationCell {
                schedule: g[0].0,
                noise: g[0].1,
                summary: summarize(qualities.as_deref().unwrap_or(&values)).expect("runs > 0"),
                values,
                qualities,
            }
        })
        .collect();
    Ok((cells, records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    /// First iteration (exclusive) of each window.
    pub window_starts: Vec<u64>,
    /// Projected coordinates, one row per window.
    pub coords: Vec<Vec<f64>>,
    /// Leading eigenvalues of the window covariance, descending.
    pub eigenvalues: Vec<f64>,
    /// Principal directions over neuron pairs, one per component.
    pub loadings: Vec<Vec<f64>>,
    pub total_variance: f64,
    pub explained: f64,
}

pub const PCA_TOLERANCE: f64 = 1e-10;
pub const PCA_MAX_SWEEPS: usize = 10_000;

/// Per-window spike counts (ON and OFF summed per pair), centred and
/// projected onto the top principal directions of their covariance.
/// `spikes` must be sorted by iteration and contain every spike.
pub fn analyze_trace(
    spikes: &[SpikeEvent],
    neurons: usize,
    iterations: u64,
    window: u64,
    overlap: u64,
    components: usize,
) -> Result<PcaResult, HarnessError> {
    if window == 0 || overlap >= window {
        return Err(HarnessError::BadWindow { window, overlap });
    }
    let stride = window - overlap;
    let starts: Vec<u64> = (0..)
        .map(|k| k * stride)
        .take_while(|s| s + window <= iterations)
        .collect();
    if starts.len() < components.max(1) || neurons < components {
        return Err(HarnessError::TooFewWindows {
            windows: starts.len(),
            components,
        });
    }
    let w = starts.len();
    let mut x = DMatrix::<f64>::zeros(w, neurons);
    for (row, &s) in starts.iter().enumerate() {
        let a = spikes.partition_point(|e| e.iteration <= s);
        let b = spikes.partition_point(|e| e.iteration <= s + window);
        for e in &spikes[a..b] {
            x[(row, e.neuron)] += 1.0;
        }
    }
    for c in 0..neurons {
        let mean = x.column(c).mean();
        x.column_mut(c).add_scalar_mut(-mean);
    }
    let cov = x.tr_mul(&x) / w as f64;
    let total: f64 = cov.diagonal().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(HarnessError::Degenerate);
    }
    let eig = SymmetricEigen::try_new(cov, PCA_TOLERANCE, PCA_MAX_SWEEPS).ok_or(HarnessError::Eigen)?;
    let mut order: Vec<usize> = (0..neurons).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut loadings = Vec::with_capacity(components);
    let mut eigenvalues = Vec::with_capacity(components);
    for &k in order.iter().take(components) {
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        // sign: largest-magnitude entry positive, first such entry on ties
        let pivot = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > v[best].abs() + 1e-12 { i } else { best });
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        loadings.push(v);
        eigenvalues.push(eig.eigenvalues[k].max(0.0));
    }
    let coords = (0..w)
        .map(|r| {
            loadings
                .iter()
                .map(|v| x.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    Ok(PcaResult {
        window_starts: starts,
        coords,
        explained: eigenvalues.iter().sum::<f64>() / total,
        eigenvalues,
        loadings,
        total_variance: total,
    })
}
