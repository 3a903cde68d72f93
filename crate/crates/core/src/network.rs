//! ON-OFF neuron pair network and its run loop.
//!
//! Each variable `p` is a pair of integrate-and-fire neurons. The ON neuron
//! can only fire while the variable is down and flips it up; the OFF neuron
//! does the reverse. At rest the OFF potential equals `−ΔH/2` of the down
//! flip and the ON potential is its negative, so a neuron firing when its
//! potential exceeds the noisy threshold `μ` is the acceptance test
//! `ΔH/2 < −μ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anneal::{make_threshold, AnnealError, AnnealSchedule, NoiseConfig, NoiseSampler, ScheduleKind};
use crate::ising::{Domain, IsingError, IsingProblem, StateVector};
use crate::rng::{self, Stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error(transparent)]
    Ising(#[from] IsingError),
    #[error(transparent)]
    Anneal(#[from] AnnealError),
    #[error("problem has a linear term; fold it into a static neuron first")]
    BiasNotFolded,
    #[error("every variable is frozen")]
    NoFreeVariables,
    #[error("RESET constant A = {a} must exceed {required} for this problem and schedule")]
    ResetTooSmall { a: f64, required: f64 },
    #[error("replica count must be at least 1")]
    NoReplicas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arbiter {
    /// Pick one neuron uniformly, then test it against its threshold.
    SelectThenTest,
    /// Test every neuron, then pick one of the active ones uniformly.
    TestThenSelect,
}

impl std::str::FromStr for Arbiter {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "select-then-test" | "select" => Ok(Arbiter::SelectThenTest),
            "test-then-select" | "test" => Ok(Arbiter::TestThenSelect),
            other => Err(format!("unknown arbiter `{other}`")),
        }
    }
}

/// How the pair enforces that only the eligible neuron may fire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gating {
    /// Check the pair's state bits before testing the threshold.
    StateBits,
    /// Ineligible neuron sits `A` below rest, the threshold carries
    /// `A·Bernoulli`, and a spike resets by subtraction.
    Reset,
}

impl std::str::FromStr for Gating {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "state-bits" | "bits" => Ok(Gating::StateBits),
            "reset" => Ok(Gating::Reset),
            other => Err(format!("unknown gating `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iter: u64,
    pub seed: u64,
    pub arbiter: Arbiter,
    pub gating: Gating,
    /// RESET / ON-OFF coupling constant.
    pub a: f64,
    pub schedule: AnnealSchedule,
    pub noise: NoiseConfig,
    /// Energy sampling stride (0: initial and final sample only).
    pub trace_every: u64,
    /// Keep every k-th spike in the trace (0: keep none).
    pub spike_stride: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 1_000_000,
            seed: 0,
            arbiter: Arbiter::SelectThenTest,
            gating: Gating::StateBits,
            a: 1.0e6,
            schedule: AnnealSchedule::default(),
            noise: NoiseConfig::default(),
            trace_every: 0,
            spike_stride: 0,
        }
    }
}

/// Largest temperature the schedule ever produces.
pub fn peak_temperature(s: &AnnealSchedule) -> f64 {
    let first = s.temperature_at(1);
    match s.kind {
        ScheduleKind::ColdRestart => match s.restart_at {
            Some(r) => s.cold_temperature().max(s.temperature_at(r.max(1))),
            None => s.cold_temperature(),
        },
        _ => first,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Variable flipped up.
    On,
    /// Variable flipped down.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub iteration: u64,
    pub neuron: usize,
    pub direction: Direction,
    pub delta_h: f64,
}

/// Snapshot of one ON-OFF pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronPairState {
    pub s_plus: u8,
    pub s_minus: u8,
    pub v_plus: f64,
    pub v_minus: f64,
    pub frozen: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub iteration: u64,
    pub energy: f64,
    pub best_energy: f64,
    /// Last threshold drawn; absent before the first iteration.
    pub threshold: Option<f64>,
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub seed: u64,
    pub iterations: u64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub best_energy: f64,
    pub best_iteration: u64,
    pub best_state: StateVector,
    pub final_state: StateVector,
    pub spike_count: u64,
    pub spikes: Vec<SpikeEvent>,
    pub samples: Vec<TraceSample>,
    /// `(iteration, best energy)` each time the best energy dropped.
    pub improvements: Vec<(u64, f64)>,
}

/// Live network: pair states, membrane potentials, clock and random streams.
pub struct Network<'a> {
    problem: &'a IsingProblem,
    cfg: SolverConfig,
    sampler: NoiseSampler,
    free: Vec<usize>,
    all_free: bool,
    /// Neighbor update scale: a flip by `d` moves field-derived potentials by `κ·Q·d`.
    kappa: f64,
    spins: Vec<i8>,
    v_plus: Vec<f64>,
    v_minus: Vec<f64>,
    iteration: u64,
    last_threshold: f64,
    rng: Stream,
    aux: Stream,
    active: Vec<usize>,
}

impl<'a> Network<'a> {
    pub fn new(
        problem: &'a IsingProblem,
        cfg: &SolverConfig,
        initial: Option<&StateVector>,
    ) -> Result<Self, NetworkError> {
        if problem.bias().is_some() {
            return Err(NetworkError::BiasNotFolded);
        }
        cfg.schedule.validate()?;
        let sampler = NoiseSampler::new(&cfg.noise)?;
        let free = problem.free_indices();
        if free.is_empty() {
            return Err(NetworkError::NoFreeVariables);
        }
        if cfg.gating == Gating::Reset {
            let kappa = if problem.domain() == Domain::Spin { 1.0 } else { 0.5 };
            let field = kappa * problem.couplings().max_row_abs_sum();
            let required = peak_temperature(&cfg.schedule) * sampler.magnitude_bound() + field;
            if cfg.a.is_nan() || cfg.a <= required {
                return Err(NetworkError::ResetTooSmall { a: cfg.a, required });
            }
        }
        let spins = match initial {
            Some(s) => {
                problem.check_state(s)?;
                s.0.clone()
            }
            None => vec![problem.domain().up(); problem.dim()],
        };
        let dim = problem.dim();
        let mut net = Self {
            problem,
            cfg: cfg.clone(),
            sampler,
            all_free: free.len() == dim,
            free,
            kappa: match problem.domain() {
                Domain::Spin => 1.0,
                Domain::Binary => 0.5,
            },
            spins,
            v_plus: vec![0.0; dim],
            v_minus: vec![0.0; dim],
            iteration: 0,
            last_threshold: f64::NAN,
            rng: rng::stream(cfg.seed),
            aux: rng::aux_stream(cfg.seed),
            active: Vec::new(),
        };
        for p in 0..dim {
            let (vp, vm) = net.rest_potentials(p);
            net.v_plus[p] = vp;
            net.v_minus[p] = vm;
        }
        Ok(net)
    }

    /// OFF-neuron rest value: `−ΔH/2` of flipping `p` down.
    fn off_field(&self, p: usize) -> f64 {
        let h = self.problem.local_field(&self.spins, p);
        match self.problem.domain() {
            Domain::Spin => h,
            Domain::Binary => 0.5 * (h + 0.5 * self.problem.couplings().diagonal(p)),
        }
    }

    fn is_up(&self, p: usize) -> bool {
        self.spins[p] == 1
    }

    /// `(v_plus, v_minus)` recomputed from scratch for the current state.
    pub fn rest_potentials(&self, p: usize) -> (f64, f64) {
        let f = self.off_field(p);
        match (self.cfg.gating, self.is_up(p)) {
            (Gating::StateBits, _) => (-f, f),
            (Gating::Reset, true) => (-f - self.cfg.a, f),
            (Gating::Reset, false) => (-f, f - self.cfg.a),
        }
    }

    pub fn pair(&self, p: usize) -> NeuronPairState {
        let up = self.is_up(p);
        NeuronPairState {
            s_plus: u8::from(up),
            s_minus: u8::from(!up),
            v_plus: self.v_plus[p],
            v_minus: self.v_minus[p],
            frozen: self.problem.is_frozen(p),
        }
    }

    pub fn state(&self) -> StateVector {
        StateVector(self.spins.clone())
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn last_threshold(&self) -> f64 {
        self.last_threshold
    }

    pub fn temperature(&self) -> f64 {
        self.cfg.schedule.temperature_at(self.iteration.max(1))
    }

    #[inline]
    fn threshold(&mut self, temp: f64) -> f64 {
        let noise = self.sampler.sample(&mut self.rng);
        let (a, b) = match self.cfg.gating {
            Gating::StateBits => (0.0, 0),
            Gating::Reset => (self.cfg.a, self.sampler.bernoulli(&mut self.aux)),
        };
        make_threshold(temp, noise, a, b, self.cfg.noise.quant)
    }

    /// Which neuron of pair `p` would fire against `mu`, if any.
    #[inline]
    fn fires(&self, p: usize, mu: f64) -> Option<Direction> {
        match self.cfg.gating {
            Gating::StateBits => {
                if self.is_up(p) {
                    (self.v_minus[p] > mu).then_some(Direction::Off)
                } else {
                    (self.v_plus[p] > mu).then_some(Direction::On)
                }
            }
            Gating::Reset => {
                if self.v_plus[p] > mu {
                    Some(Direction::On)
                } else if self.v_minus[p] > mu {
                    Some(Direction::Off)
                } else {
                    None
                }
            }
        }
    }

    /// Advances the clock by one iteration; returns the spike that was let
    /// through by the arbiter, if any.
    pub fn step(&mut self) -> Option<SpikeEvent> {
        self.iteration += 1;
        let temp = self.cfg.schedule.temperature_at(self.iteration);
        let chosen = match self.cfg.arbiter {
            Arbiter::SelectThenTest => {
                let k = rng::index(&mut self.rng, self.free.len());
                let p = if self.all_free { k } else { self.free[k] };
                let mu = self.threshold(temp);
                self.last_threshold = mu;
                self.fires(p, mu).map(|d| (p, d))
            }
            Arbiter::TestThenSelect => {
                let mut active = std::mem::take(&mut self.active);
                active.clear();
                let mut first_mu = f64::NAN;
                for k in 0..self.free.len() {
                    let p = self.free[k];
                    let mu = self.threshold(temp);
                    if k == 0 {
                        first_mu = mu;
                    }
                    if self.fires(p, mu).is_some() {
                        active.push(p);
                    }
                }
                // one selection draw, consumed even when nothing is active
                let r = rand::RngCore::next_u64(&mut self.rng);
                let pick = (!active.is_empty()).then(|| active[((r as u128 * active.len() as u128) >> 64) as usize]);
                self.last_threshold = first_mu;
                self.active = active;
                pick.map(|p| {
                    let d = if self.is_up(p) { Direction::Off } else { Direction::On };
                    (p, d)
                })
            }
        };
        let (p, direction) = chosen?;
        Some(self.apply(p, direction))
    }

    fn apply(&mut self, p: usize, direction: Direction) -> SpikeEvent {
        let fired_potential = match direction {
            Direction::On => self.v_plus[p],
            Direction::Off => self.v_minus[p],
        };
        let old = self.spins[p];
        let new = self.problem.domain().flipped(old);
        self.spins[p] = new;
        let step = self.kappa * f64::from(new - old);
        let (cols, vals) = self.problem.couplings().row(p);
        for (&j, &w) in cols.iter().zip(vals) {
            let j = j as usize;
            let dv = w * step;
            self.v_minus[j] += dv;
            self.v_plus[j] -= dv;
        }
        if self.cfg.gating == Gating::Reset {
            let a = self.cfg.a;
            match direction {
                Direction::On => {
                    self.v_plus[p] -= a;
                    self.v_minus[p] += a;
                }
                Direction::Off => {
                    self.v_minus[p] -= a;
                    self.v_plus[p] += a;
                }
            }
        }
        SpikeEvent {
            iteration: self.iteration,
            neuron: p,
            direction,
            delta_h: -2.0 * fired_potential,
        }
    }

    /// Neurons whose stored potentials differ from a fresh recomputation.
    pub fn rest_violations(&self) -> Vec<usize> {
        (0..self.problem.dim())
            .filter(|&p| (self.v_plus[p], self.v_minus[p]) != self.rest_potentials(p))
            .collect()
    }

    /// Largest absolute gap between stored and recomputed potentials.
    pub fn max_potential_drift(&self) -> f64 {
        (0..self.problem.dim())
            .map(|p| {
                let (vp, vm) = self.rest_potentials(p);
                (self.v_plus[p] - vp).abs().max((self.v_minus[p] - vm).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Executes `cfg.max_iter` iterations from the all-up state.
pub fn run(problem: &IsingProblem, cfg: &SolverConfig) -> Result<RunTrace, NetworkError> {
    run_from(problem, cfg, None)
}

pub fn run_from(
    problem: &IsingProblem,
    cfg: &SolverConfig,
    initial: Option<&StateVector>,
) -> Result<RunTrace, NetworkError> {
    let mut net = Network::new(problem, cfg, initial)?;
    let mut rec = TraceRecorder::new(cfg, problem.energy_unchecked(&net.spins), &net.spins);
    for _ in 0..cfg.max_iter {
        if let Some(ev) = net.step() {
            rec.spike(ev, &net.spins);
        }
        rec.tick(net.iteration, net.last_threshold, net.temperature());
    }
    Ok(rec.finish(net.iteration, net.last_threshold, net.temperature(), net.spins))
}

/// Incremental [`RunTrace`] builder shared by every solver loop.
pub(crate) struct TraceRecorder {
    seed: u64,
    trace_every: u64,
    spike_stride: u64,
    initial_energy: f64,
    energy: f64,
    best: f64,
    best_iteration: u64,
    best_state: Vec<i8>,
    spike_count: u64,
    spikes: Vec<SpikeEvent>,
    samples: Vec<TraceSample>,
    improvements: Vec<(u64, f64)>,
}

impl TraceRecorder {
    pub(crate) fn new(cfg: &SolverConfig, energy: f64, spins: &[i8]) -> Self {
        Self {
            seed: cfg.seed,
            trace_every: cfg.trace_every,
            spike_stride: cfg.spike_stride,
            initial_energy: energy,
            energy,
            best: energy,
            best_iteration: 0,
            best_state: spins.to_vec(),
            spike_count: 0,
            spikes: Vec::new(),
            samples: vec![TraceSample {
                iteration: 0,
                energy,
                best_energy: energy,
                threshold: None,
                temperature: None,
            }],
            improvements: Vec::new(),
        }
    }

    #[inline]
    pub(crate) fn spike(&mut self, ev: SpikeEvent, spins: &[i8]) {
        self.energy += ev.delta_h;
        if self.spike_stride > 0 && self.spike_count.is_multiple_of(self.spike_stride) {
            self.spikes.push(ev);
        }
        self.spike_count += 1;
        if self.energy < self.best {
            self.best = self.energy;
            self.best_iteration = ev.iteration;
            self.best_state.copy_from_slice(spins);
            self.improvements.push((ev.iteration, self.energy));
        }
    }

    pub(crate) fn best(&self) -> f64 {
        self.best
    }

    fn sample(&mut self, iteration: u64, threshold: f64, temperature: f64) {
        self.samples.push(TraceSample {
            iteration,
            energy: self.energy,
            best_energy: self.best,
            threshold: Some(threshold),
            temperature: Some(temperature),
        });
    }

    #[inline]
    pub(crate) fn tick(&mut self, iteration: u64, threshold: f64, temperature: f64) {
        if self.trace_every > 0 && iteration.is_multiple_of(self.trace_every) {
            self.sample(iteration, threshold, temperature);
        }
    }

    pub(crate) fn finish(mut self, iterations: u64, threshold: f64, temperature: f64, spins: Vec<i8>) -> RunTrace {
        if iterations > 0 && self.samples.last().map(|s| s.iteration) != Some(iterations) {
            self.sample(iterations, threshold, temperature);
        }
        RunTrace {
            seed: self.seed,
            iterations,
            initial_energy: self.initial_energy,
            final_energy: self.energy,
            best_energy: self.best,
            best_iteration: self.best_iteration,
            best_state: StateVector(self.best_state),
            final_state: StateVector(spins),
            spike_count: self.spike_count,
            spikes: self.spikes,
            samples: self.samples,
            improvements: self.improvements,
        }
    }
}

/// Config of replica `k`: same settings, seed from [`rng::replica_seed`].
pub fn replica_config(cfg: &SolverConfig, k: u64) -> SolverConfig {
    SolverConfig {
        seed: rng::replica_seed(cfg.seed, k),
        ..cfg.clone()
    }
}

/// Independent replicas, run on rayon's current pool. Results are ordered by
/// replica index and do not depend on scheduling.
pub fn run_parallel(
    problem: &IsingProblem,
    cfg: &SolverConfig,
    replicas: usize,
) -> Result<Vec<RunTrace>, NetworkError> {
    if replicas == 0 {
        return Err(NetworkError::NoReplicas);
    }
    (0..replicas as u64)
        .into_par_iter()
        .map(|k| run(problem, &replica_config(cfg, k)))
        .collect()
}

/// [`run_parallel`] on a dedicated pool of `workers` threads.
pub fn run_parallel_with_workers(
    problem: &IsingProblem,
    cfg: &SolverConfig,
    replicas: usize,
    workers: usize,
) -> Result<Vec<RunTrace>, NetworkError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| run_parallel(problem, cfg, replicas))
}
