use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use neurosa::anneal::{DEFAULT_C, DEFAULT_NOISE_MEAN, DEFAULT_T0};
use neurosa::harness::{
    self, analyze_trace, normalized_quality, BenchmarkSpec, Density, GainTracker, HaltRule, Instance, SotaTable,
};
use neurosa::io::{self, RunRecord};
use neurosa::network::{replica_config, Arbiter, Direction, Gating, SolverConfig, SpikeEvent};
use neurosa::problems::{ProblemKind, DEFAULT_MIS_BETA};
use neurosa::{generators, oracle};
use neurosa::{AnnealSchedule, NoiseConfig, NoiseDist, QuantFormat, ScheduleKind};

#[derive(Parser)]
#[command(
    name = "neurosa",
    version,
    about = "Spiking ON-OFF neuron annealer for MAX-CUT and MIS"
)]
struct Cli {
    /// TOML file with default values for any solver flag; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one graph, possibly with several replicas.
    Solve {
        /// Graph in Gset format.
        graph: PathBuf,
        #[command(flatten)]
        opts: SolverOpts,
        /// Directory for run records and CSV tables.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeated runs over a set of graphs with quality statistics.
    Bench {
        #[arg(required = true)]
        graphs: Vec<PathBuf>,
        #[command(flatten)]
        opts: SolverOpts,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Schedule × noise grid on one graph.
    Ablate {
        graph: PathBuf,
        #[command(flatten)]
        opts: SolverOpts,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long, value_delimiter = ',', default_values = ["fn-log", "inverse-time", "exp-decay"])]
        schedules: Vec<ScheduleKind>,
        #[arg(long, value_delimiter = ',', default_values = ["exponential", "gaussian", "uniform"])]
        noises: Vec<NoiseDist>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact optimum of a small graph by exhaustive search.
    Oracle {
        graph: PathBuf,
        #[arg(long, default_value = "maxcut")]
        kind: ProblemKind,
        #[arg(long, default_value_t = DEFAULT_MIS_BETA)]
        beta: f64,
    },
    /// Write a synthetic instance in Gset format.
    Generate {
        #[arg(value_enum)]
        family: Family,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Vertices (random graphs only).
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Edge probability (random graphs only).
        #[arg(long, default_value_t = 0.1)]
        p: f64,
        out: PathBuf,
    },
    /// Spike PCA and unit-gain log of a recorded run.
    Analyze {
        /// Run record written by `solve`.
        record: PathBuf,
        /// Spike table written by `solve --spike-stride 1`.
        #[arg(long)]
        spikes: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        window: u64,
        /// Defaults to half the window.
        #[arg(long)]
        overlap: Option<u64>,
        #[arg(long, default_value_t = 3)]
        components: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Family {
    /// 800-vertex toroidal ±1 grid.
    G11Class,
    /// 800-vertex union of two planar graphs, unit weights.
    G15Class,
    /// Erdős–Rényi with ±1 weights.
    Random,
}

/// Solver flags; the config file uses the same names.
#[derive(Args, Deserialize, Default, Clone, Debug)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct SolverOpts {
    #[arg(long)]
    kind: Option<ProblemKind>,
    /// MIS edge penalty.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    schedule: Option<ScheduleKind>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    noise: Option<NoiseDist>,
    #[arg(long, allow_negative_numbers = true)]
    noise_mean: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    arbiter: Option<Arbiter>,
    #[arg(long)]
    gating: Option<Gating>,
    /// RESET constant.
    #[arg(long)]
    a: Option<f64>,
    /// Threshold precision: 8, 16, 32 or 64.
    #[arg(long)]
    quant_bits: Option<u32>,
    #[arg(long)]
    cold_t: Option<f64>,
    #[arg(long)]
    restart_at: Option<u64>,
    #[arg(long)]
    trace_every: Option<u64>,
    #[arg(long)]
    spike_stride: Option<u64>,
    /// Reference values, `graph,kind,best_known`; merged over the bundled table.
    #[arg(long)]
    sota: Option<PathBuf>,
    /// Stop once the unit-gain ratio exceeds this value.
    #[arg(long)]
    halt_ratio: Option<f64>,
    #[arg(long)]
    halt_check: Option<u64>,
    /// Store wall time in records (they are then no longer reproducible byte for byte).
    #[arg(long)]
    #[serde(default)]
    record_time: bool,
}

macro_rules! prefer_flags {
    ($flags:expr, $file:expr, $($field:ident),*) => {
        SolverOpts {
            $($field: $flags.$field.or($file.$field),)*
            record_time: $flags.record_time || $file.record_time,
        }
    };
}

impl SolverOpts {
    fn merged(self, file: Option<&SolverOpts>) -> Self {
        let Some(file) = file.cloned() else { return self };
        prefer_flags!(
            self,
            file,
            kind,
            beta,
            iterations,
            seed,
            replicas,
            workers,
            schedule,
            t0,
            c,
            dt,
            noise,
            noise_mean,
            eta,
            arbiter,
            gating,
            a,
            quant_bits,
            cold_t,
            restart_at,
            trace_every,
            spike_stride,
            sota,
            halt_ratio,
            halt_check
        )
    }

    fn kind(&self) -> ProblemKind {
        self.kind.unwrap_or(ProblemKind::Maxcut)
    }

    fn beta(&self) -> f64 {
        self.beta.unwrap_or(DEFAULT_MIS_BETA)
    }

    fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    fn solver_config(&self) -> Result<SolverConfig> {
        let cold = self.cold_t.is_some() || self.restart_at.is_some();
        let kind = self.schedule.unwrap_or(if cold {
            ScheduleKind::ColdRestart
        } else {
            ScheduleKind::FnLog
        });
        let schedule = AnnealSchedule {
            restart_at: self.restart_at,
            cold_t: self.cold_t,
            ..AnnealSchedule::new(
                kind,
                self.t0.unwrap_or(DEFAULT_T0),
                self.c.unwrap_or(DEFAULT_C),
                self.dt.unwrap_or(1.0),
            )
        };
        schedule.validate()?;
        let noise = NoiseConfig {
            target_mean: Some(self.noise_mean.unwrap_or(DEFAULT_NOISE_MEAN)),
            eta: self.eta.unwrap_or(0.0),
            quant: self.quant_bits.map(QuantFormat::from_bits).transpose()?,
            ..NoiseConfig::with_dist(self.noise.unwrap_or(NoiseDist::Exponential))
        };
        let d = SolverConfig::default();
        Ok(SolverConfig {
            max_iter: self.iterations.unwrap_or(d.max_iter),
            seed: self.seed.unwrap_or(d.seed),
            arbiter: self.arbiter.unwrap_or(d.arbiter),
            gating: self.gating.unwrap_or(d.gating),
            a: self.a.unwrap_or(d.a),
            schedule,
            noise,
            trace_every: self.trace_every.unwrap_or(self.iterations.unwrap_or(d.max_iter) / 1000),
            spike_stride: self.spike_stride.unwrap_or(0),
        })
    }

    fn halt(&self) -> Option<HaltRule> {
        self.halt_ratio.map(|ratio| HaltRule {
            ratio,
            check_every: self.halt_check.unwrap_or(1000),
        })
    }

    fn sota(&self) -> Result<SotaTable> {
        let mut t = SotaTable::builtin();
        if let Some(p) = &self.sota {
            t.merge(SotaTable::load(p)?);
        }
        Ok(t)
    }
}

fn load_instance(path: &Path, opts: &SolverOpts) -> Result<Instance> {
    let g = io::read_gset(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Instance::new(g, opts.kind(), opts.beta())?)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn record_stem(r: &RunRecord) -> String {
    format!("{}-{}-seed{}", r.problem, r.kind.name(), r.config.seed)
}

fn fmt_quality(q: Option<f64>) -> String {
    q.map_or_else(|| "-".into(), |q| format!("{q:.5}"))
}

fn solve(graph: &Path, opts: SolverOpts, out: Option<PathBuf>) -> Result<()> {
    let inst = load_instance(graph, &opts)?;
    let cfg = opts.solver_config()?;
    let sota = opts.sota()?.get(&inst.graph.name, inst.kind);
    let replicas = opts.replicas.unwrap_or(1);
    if replicas == 0 {
        bail!("--replicas must be at least 1");
    }
    let cfgs: Vec<_> = (0..replicas as u64).map(|k| replica_config(&cfg, k)).collect();
    let runs = harness::run_traces(&inst, &cfgs, opts.workers(), opts.halt(), opts.record_time)?;
    if let Some(dir) = &out {
        ensure_dir(dir)?;
    }
    println!("seed\tbest\tquality\titerations\tspikes");
    for (rec, trace) in &runs {
        println!(
            "{}\t{}\t{}\t{}\t{}",
            rec.config.seed,
            rec.best_value,
            fmt_quality(normalized_quality(rec.best_value, sota)),
            rec.iterations,
            rec.spike_count
        );
        if let Some(dir) = &out {
            let stem = record_stem(rec);
            io::write_run_record(rec, &dir.join(format!("{stem}.json")))?;
            io::write_series_csv(&dir.join(format!("{stem}.best.csv")), &rec.best_series)?;
            if rec.config.spike_stride > 0 {
                io::write_spikes_csv(&dir.join(format!("{stem}.spikes.csv")), &trace.spikes)?;
            }
        }
    }
    Ok(())
}

fn density_rows(d: &Density) -> Vec<[String; 2]> {
    match d {
        Density::Degenerate { at } => vec![[at.to_string(), "inf".into()]],
        Density::Grid { points, .. } => points.iter().map(|(x, y)| [x.to_string(), y.to_string()]).collect(),
    }
}

fn bench(graphs: &[PathBuf], opts: SolverOpts, runs: usize, bins: usize, out: Option<PathBuf>) -> Result<()> {
    let mut loaded = Vec::new();
    for p in graphs {
        loaded.push(io::read_gset(p).with_context(|| format!("reading {}", p.display()))?);
    }
    let spec = BenchmarkSpec {
        graphs: loaded,
        kind: opts.kind(),
        mis_beta: opts.beta(),
        runs,
        config: opts.solver_config()?,
        sota: opts.sota()?,
        workers: opts.workers(),
        record_time: opts.record_time,
        histogram_bins: bins,
    };
    let reports = harness::bench(&spec)?;
    println!("graph\treference\tmean\tsd\tmin\tmax");
    let mut stats = Vec::new();
    for (rep, records) in &reports {
        if let Some(w) = &rep.warning {
            eprintln!("warning: {w}");
        }
        let s = rep.summary;
        let reference = rep.sota.map_or_else(|| "-".into(), |v| v.to_string());
        println!(
            "{}\t{}\t{:.5}\t{:.5}\t{:.5}\t{:.5}",
            rep.graph, reference, s.mean, s.sd, s.min, s.max
        );
        let c = rep.complexity;
        stats.push(vec![
            rep.graph.clone(),
            reference,
            s.count.to_string(),
            s.mean.to_string(),
            s.sd.to_string(),
            s.min.to_string(),
            s.max.to_string(),
            c.mean_fanout.to_string(),
            c.max_fanout.to_string(),
            c.degree_entropy.to_string(),
            c.transitivity.to_string(),
        ]);
        if let Some(dir) = &out {
            ensure_dir(dir)?;
            for r in records {
                io::write_run_record(r, &dir.join(format!("{}.json", record_stem(r))))?;
            }
            io::write_table(
                &dir.join(format!("{}.kde.csv", rep.graph)),
                &["x", "density"],
                density_rows(&rep.density),
            )?;
            let hist = rep
                .histogram
                .iter()
                .map(|b| [b.lo.to_string(), b.hi.to_string(), b.count.to_string()]);
            io::write_table(
                &dir.join(format!("{}.hist.csv", rep.graph)),
                &["lo", "hi", "count"],
                hist,
            )?;
        }
    }
    if let Some(dir) = &out {
        let header = [
            "graph",
            "reference",
            "runs",
            "mean",
            "sd",
            "min",
            "max",
            "mean_fanout",
            "max_fanout",
            "degree_entropy",
            "transitivity",
        ];
        io::write_table(&dir.join("bench_stats.csv"), &header, stats)?;
    }
    Ok(())
}

fn ablate(
    graph: &Path,
    opts: SolverOpts,
    runs: usize,
    schedules: &[ScheduleKind],
    noises: &[NoiseDist],
    out: Option<PathBuf>,
) -> Result<()> {
    let inst = load_instance(graph, &opts)?;
    let sota = opts.sota()?.get(&inst.graph.name, inst.kind);
    let cfg = opts.solver_config()?;
    let (cells, records) = harness::ablate(&inst, &cfg, schedules, noises, runs, opts.workers(), sota)?;
    println!("schedule\tnoise\tmean\tsd\tmin\tmax");
    let rows: Vec<_> = cells
        .iter()
        .map(|c| {
            let s = c.summary;
            println!(
                "{}\t{}\t{:.5}\t{:.5}\t{:.5}\t{:.5}",
                c.schedule.name(),
                c.noise.name(),
                s.mean,
                s.sd,
                s.min,
                s.max
            );
            vec![
                c.schedule.name().to_string(),
                c.noise.name().to_string(),
                s.count.to_string(),
                s.mean.to_string(),
                s.sd.to_string(),
                s.min.to_string(),
                s.max.to_string(),
            ]
        })
        .collect();
    if let Some(dir) = &out {
        ensure_dir(dir)?;
        io::write_table(
            &dir.join("ablation.csv"),
            &["schedule", "noise", "runs", "mean", "sd", "min", "max"],
            rows,
        )?;
        for r in &records {
            let stem = format!(
                "{}-{}-{}",
                record_stem(r),
                r.config.schedule.kind.name(),
                r.config.noise.dist.name()
            );
            io::write_run_record(r, &dir.join(format!("{stem}.json")))?;
        }
    }
    Ok(())
}

fn run_oracle(graph: &Path, kind: ProblemKind, beta: f64) -> Result<()> {
    let g = io::read_gset(graph)?;
    match kind {
        ProblemKind::Maxcut => {
            let (cut, count) = oracle::max_cut_exact(&g)?;
            let r = oracle::brute_force(&Instance::new(g, kind, beta)?.problem)?;
            println!("max cut {cut} ({count} optimal partitions)");
            println!("ground energy {} state {}", r.best_value, r.best_state.to_bitstring());
        }
        ProblemKind::Mis => {
            let size = oracle::max_independent_set(&g)?;
            println!("maximum independent set size {size}");
        }
    }
    Ok(())
}

fn analyze(
    record: &Path,
    spikes: Option<PathBuf>,
    window: u64,
    overlap: Option<u64>,
    components: usize,
    out: Option<PathBuf>,
) -> Result<()> {
    let rec = io::read_run_record(record)?;
    let baseline = rec.best_series.first().map_or(f64::NEG_INFINITY, |s| s.1);
    let tracker = GainTracker::from_gains(1.0, baseline, &rec.gains);
    match tracker.ratio(rec.iterations) {
        Some(r) => println!("unit-gain ratio at iteration {}: {r:.4}", rec.iterations),
        None => println!("no unit gain recorded"),
    }
    if let Some(dir) = &out {
        ensure_dir(dir)?;
        let rows = tracker.events().iter().map(|&(i, v)| {
            [
                i.to_string(),
                v.to_string(),
                tracker.ratio(i).unwrap_or(0.0).to_string(),
            ]
        });
        io::write_table(&dir.join("gains.csv"), &["iteration", "best_value", "ratio"], rows)?;
    }
    let Some(spikes) = spikes else { return Ok(()) };
    let events: Vec<SpikeEvent> = io::read_spikes_csv(&spikes)?
        .into_iter()
        .map(|(iteration, neuron, direction): (u64, usize, Direction)| SpikeEvent {
            iteration,
            neuron,
            direction,
            delta_h: f64::NAN,
        })
        .collect();
    let pca = analyze_trace(
        &events,
        rec.best_state.len(),
        rec.iterations,
        window,
        overlap.unwrap_or(window / 2),
        components,
    )?;
    println!("{} windows, explained variance {:.4}", pca.coords.len(), pca.explained);
    for (k, l) in pca.eigenvalues.iter().enumerate() {
        println!("  pc{}: {l:.6}", k + 1);
    }
    if let Some(dir) = &out {
        let mut header = vec!["window_start".to_string()];
        header.extend((1..=components).map(|k| format!("pc{k}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = pca.window_starts.iter().zip(&pca.coords).map(|(s, c)| {
            std::iter::once(s.to_string())
                .chain(c.iter().map(f64::to_string))
                .collect::<Vec<_>>()
        });
        io::write_table(&dir.join("pca.csv"), &header, rows)?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let file: Option<SolverOpts> = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?)
        }
        None => None,
    };
    let file = file.as_ref();
    match cli.command {
        Command::Solve { graph, opts, out } => solve(&graph, opts.merged(file), out),
        Command::Bench {
            graphs,
            opts,
            runs,
            bins,
            out,
        } => bench(&graphs, opts.merged(file), runs, bins, out),
        Command::Ablate {
            graph,
            opts,
            runs,
            schedules,
            noises,
            out,
        } => ablate(&graph, opts.merged(file), runs, &schedules, &noises, out),
        Command::Oracle { graph, kind, beta } => run_oracle(&graph, kind, beta),
        Command::Generate {
            family,
            seed,
            n,
            p,
            out,
        } => {
            let g = match family {
                Family::G11Class => generators::g11_class(seed),
                Family::G15Class => generators::g15_class(seed),
                Family::Random => generators::erdos_renyi(n, p, true, seed),
            };
            io::write_gset(&g, &out)?;
            println!("{} vertices, {} edges", g.n, g.edge_count());
            Ok(())
        }
        Command::Analyze {
            record,
            spikes,
            window,
            overlap,
            components,
            out,
        } => analyze(&record, spikes, window, overlap, components, out),
    }
}
