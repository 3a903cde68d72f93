//! Gset text format, JSON run records and CSV trace tables.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Direction, SolverConfig, SpikeEvent};
use crate::problems::{GraphError, ProblemKind, WeightedGraph};

pub const RUN_RECORD_SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("header declares {declared} edges but {found} were read")]
    EdgeCount { declared: usize, found: usize },
    #[error("line {line}: {source}")]
    Graph {
        line: usize,
        #[source]
        source: GraphError,
    },
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: unsupported run-record schema version {found} (expected {RUN_RECORD_SCHEMA})")]
    Schema { path: PathBuf, found: u32 },
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File {
        path: path.to_path_buf(),
        source,
    }
}

fn fields<const K: usize>(line: &str, lineno: usize) -> Result<[i64; K], IoError> {
    let mut out = [0i64; K];
    let mut it = line.split_whitespace();
    for slot in &mut out {
        let tok = it.next().ok_or_else(|| IoError::Parse {
            line: lineno,
            msg: format!("expected {K} integers, got `{line}`"),
        })?;
        *slot = tok.parse().map_err(|_| IoError::Parse {
            line: lineno,
            msg: format!("`{tok}` is not an integer"),
        })?;
    }
    if let Some(extra) = it.next() {
        return Err(IoError::Parse {
            line: lineno,
            msg: format!("unexpected trailing field `{extra}`"),
        });
    }
    Ok(out)
}

/// Reads `n m` followed by `m` lines `i j w` with 1-based vertices. Blank
/// lines are skipped.
pub fn parse_gset<R: Read>(input: R, name: &str) -> Result<WeightedGraph, IoError> {
    let reader = BufReader::new(input);
    let mut header: Option<(usize, usize)> = None;
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    for (k, line) in reader.lines().enumerate() {
        let lineno = k + 1;
        let line = line.map_err(|e| IoError::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        match header {
            None => {
                let [n, m] = fields::<2>(&line, lineno)?;
                if n <= 0 || m < 0 {
                    return Err(IoError::Parse {
                        line: lineno,
                        msg: format!("bad header `{}`", line.trim()),
                    });
                }
                header = Some((n as usize, m as usize));
                edges.reserve(m as usize);
            }
            Some((n, m)) => {
                let [i, j, w] = fields::<3>(&line, lineno)?;
                for v in [i, j] {
                    if v < 1 || v as usize > n {
                        return Err(IoError::Parse {
                            line: lineno,
                            msg: format!("vertex {v} outside 1..={n}"),
                        });
                    }
                }
                if edges.len() == m {
                    return Err(IoError::EdgeCount {
                        declared: m,
                        found: m + 1,
                    });
                }
                let (i, j) = (i as usize - 1, j as usize - 1);
                let source = if i == j {
                    Some(GraphError::SelfLoop(i))
                } else if !seen.insert((i.min(j), i.max(j))) {
                    Some(GraphError::Duplicate(i.min(j), i.max(j)))
                } else {
                    None
                };
                if let Some(source) = source {
                    return Err(IoError::Graph { line: lineno, source });
                }
                edges.push((i, j, w));
            }
        }
    }
    let (n, m) = header.ok_or(IoError::Parse {
        line: 1,
        msg: "missing `n m` header".into(),
    })?;
    if edges.len() != m {
        return Err(IoError::EdgeCount {
            declared: m,
            found: edges.len(),
        });
    }
    Ok(WeightedGraph::new(n, edges, name).expect("checked while reading"))
}

pub fn read_gset(path: &Path) -> Result<WeightedGraph, IoError> {
    let file = fs::File::open(path).map_err(file_err(path))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_gset(file, &name)
}

pub fn format_gset(g: &WeightedGraph) -> String {
    let mut out = format!("{} {}\n", g.n, g.edge_count());
    for &(i, j, w) in &g.edges {
        out.push_str(&format!("{} {} {}\n", i + 1, j + 1, w));
    }
    out
}

pub fn write_gset(g: &WeightedGraph, path: &Path) -> Result<(), IoError> {
    fs::write(path, format_gset(g)).map_err(file_err(path))
}

/// Everything needed to reproduce and report one solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub problem: String,
    pub kind: ProblemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mis_beta: Option<f64>,
    pub config: SolverConfig,
    /// Cut weight, or size of the repaired independent set.
    pub best_value: f64,
    pub best_energy: f64,
    /// `1` for up, `0` for down, one character per variable.
    pub best_state: String,
    pub iterations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
    pub spike_count: u64,
    /// `(iteration, best objective so far)` at each checkpoint.
    pub best_series: Vec<(u64, f64)>,
    /// `(iteration, objective)` at each strict improvement.
    pub gains: Vec<(u64, f64)>,
}

pub fn run_record_json(record: &RunRecord) -> String {
    let mut s = serde_json::to_string_pretty(record).expect("records contain only finite numbers");
    s.push('\n');
    s
}

pub fn write_run_record(record: &RunRecord, path: &Path) -> Result<(), IoError> {
    fs::write(path, run_record_json(record)).map_err(file_err(path))
}

pub fn read_run_record(path: &Path) -> Result<RunRecord, IoError> {
    let text = fs::read_to_string(path).map_err(file_err(path))?;
    let json = |source| IoError::Json {
        path: path.to_path_buf(),
        source,
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(json)?;
    let found = value.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != RUN_RECORD_SCHEMA {
        return Err(IoError::Schema {
            path: path.to_path_buf(),
            found,
        });
    }
    serde_json::from_value(value).map_err(json)
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes a CSV with the given header and rows.
pub fn write_table<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), IoError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(file_err(path))
}

#[derive(Debug, Serialize, Deserialize)]
struct SeriesRow {
    iteration: u64,
    best_value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SpikeRow {
    iteration: u64,
    neuron: usize,
    direction: Direction,
}

pub fn write_series_csv(path: &Path, series: &[(u64, f64)]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    if series.is_empty() {
        w.write_record(["iteration", "best_value"]).map_err(csv_err(path))?;
    }
    for &(iteration, best_value) in series {
        w.serialize(SeriesRow { iteration, best_value })
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(file_err(path))
}

pub fn read_series_csv(path: &Path) -> Result<Vec<(u64, f64)>, IoError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize::<SeriesRow>()
        .map(|row| row.map(|x| (x.iteration, x.best_value)).map_err(csv_err(path)))
        .collect()
}

/// Spike table with columns `iteration,neuron,direction`; `delta_h` is not
/// exported.
pub fn write_spikes_csv(path: &Path, spikes: &[SpikeEvent]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    if spikes.is_empty() {
        w.write_record(["iteration", "neuron", "direction"])
            .map_err(csv_err(path))?;
    }
    for ev in spikes {
        w.serialize(SpikeRow {
            iteration: ev.iteration,
            neuron: ev.neuron,
            direction: ev.direction,
        })
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(file_err(path))
}

pub fn read_spikes_csv(path: &Path) -> Result<Vec<(u64, usize, Direction)>, IoError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize::<SpikeRow>()
        .map(|row| row.map(|x| (x.iteration, x.neuron, x.direction)).map_err(csv_err(path)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::erdos_renyi;
    use crate::network::{run, SolverConfig};
    use crate::problems::maxcut_encode;
    use crate::AnnealSchedule;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<WeightedGraph, IoError> {
        parse_gset(text.as_bytes(), "t")
    }

    #[test]
    fn minimal_files() {
        let g = parse("2 1\n1 2 1").unwrap();
        assert_eq!((g.n, g.edges.clone()), (2, vec![(0, 1, 1)]));
        let g = parse("3 2\n1 2 1\n2 3 -1\n\n").unwrap();
        assert_eq!(g.edges, vec![(0, 1, 1), (1, 2, -1)]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("3 2\n1 2 1\n2 x 1\n", 3),
            ("3 1\n1 4 1\n", 2),
            ("3 2\n1 2 1\n2 3\n", 3),
            ("3 2\n1 2 1 7\n", 2),
            ("3 2\n1 2 1\n2 1 1\n", 3),
            ("3 1\n2 2 1\n", 2),
        ];
        for (text, want) in cases {
            match parse(text) {
                Err(IoError::Parse { line, .. }) | Err(IoError::Graph { line, .. }) => {
                    assert_eq!(line, want, "{text:?}")
                }
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn edge_count_integrity() {
        assert!(matches!(
            parse("3 2\n1 2 1\n"),
            Err(IoError::EdgeCount { declared: 2, found: 1 })
        ));
        assert!(matches!(parse("3 1\n1 2 1\n2 3 1\n"), Err(IoError::EdgeCount { .. })));
        assert!(matches!(parse(""), Err(IoError::Parse { line: 1, .. })));
    }

    proptest! {
        #[test]
        fn gset_round_trip(n in 2usize..40, p in 0.0f64..1.0, seed in any::<u64>()) {
            let mut g = erdos_renyi(n, p, true, seed);
            g.name = "t".into();
            prop_assert_eq!(parse(&format_gset(&g)).unwrap(), g);
        }
    }

    fn record(trace_every: u64) -> RunRecord {
        let g = erdos_renyi(30, 0.2, true, 1);
        let cfg = SolverConfig {
            max_iter: 20_000,
            seed: 9,
            trace_every,
            spike_stride: 1,
            schedule: AnnealSchedule::fn_log(0.3125, 800.0, 1.0),
            ..SolverConfig::default()
        };
        let t = run(&maxcut_encode(&g).unwrap(), &cfg).unwrap();
        RunRecord {
            schema_version: RUN_RECORD_SCHEMA,
            problem: g.name.clone(),
            kind: ProblemKind::Maxcut,
            mis_beta: None,
            config: cfg,
            best_value: 1.0 / 3.0,
            best_energy: t.best_energy,
            best_state: t.best_state.to_bitstring(),
            iterations: t.iterations,
            wall_time_seconds: Some(0.1 + 0.2),
            spike_count: t.spike_count,
            best_series: t.samples.iter().map(|s| (s.iteration, -s.best_energy * 0.1)).collect(),
            gains: t.improvements.clone(),
        }
    }

    #[test]
    fn record_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        for r in [record(0), record(100)] {
            write_run_record(&r, &path).unwrap();
            assert_eq!(read_run_record(&path).unwrap(), r);
        }
        let mut r = record(0);
        r.wall_time_seconds = None;
        write_run_record(&r, &path).unwrap();
        assert!(!fs::read_to_string(&path).unwrap().contains("wall_time"));
        assert_eq!(read_run_record(&path).unwrap(), r);
    }

    #[test]
    fn record_serialization_is_stable() {
        assert_eq!(run_record_json(&record(50)), run_record_json(&record(50)));
    }

    #[test]
    fn schema_version_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let mut r = record(0);
        r.schema_version = 99;
        write_run_record(&r, &path).unwrap();
        assert!(matches!(read_run_record(&path), Err(IoError::Schema { found: 99, .. })));
    }

    #[test]
    fn empty_tables_have_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let spikes = dir.path().join("s.csv");
        write_spikes_csv(&spikes, &[]).unwrap();
        assert_eq!(fs::read_to_string(&spikes).unwrap(), "iteration,neuron,direction\n");
        assert!(read_spikes_csv(&spikes).unwrap().is_empty());
        let series = dir.path().join("b.csv");
        write_series_csv(&series, &[]).unwrap();
        assert_eq!(fs::read_to_string(&series).unwrap(), "iteration,best_value\n");
    }

    #[test]
    fn long_spike_table_round_trip() {
        let g = erdos_renyi(60, 0.1, true, 2);
        let cfg = SolverConfig {
            max_iter: 200_000,
            spike_stride: 1,
            schedule: AnnealSchedule::fn_log(0.3125, 8000.0, 1.0),
            ..SolverConfig::default()
        };
        let t = run(&maxcut_encode(&g).unwrap(), &cfg).unwrap();
        assert!(t.spikes.len() >= 5_000, "{}", t.spikes.len());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_spikes_csv(&path, &t.spikes).unwrap();
        let back = read_spikes_csv(&path).unwrap();
        let want: Vec<_> = t.spikes.iter().map(|e| (e.iteration, e.neuron, e.direction)).collect();
        assert_eq!(back, want);

        let series: Vec<(u64, f64)> = t.improvements.iter().map(|&(i, e)| (i, e / 7.0)).collect();
        write_series_csv(&path, &series).unwrap();
        assert_eq!(read_series_csv(&path).unwrap(), series);
    }
}
