use neurosa::generators::erdos_renyi;
use neurosa::harness::{bench, BenchmarkSpec, Instance, SotaTable};
use neurosa::io::{read_run_record, write_run_record};
use neurosa::network::{run, SolverConfig};
use neurosa::oracle::{brute_force, max_cut_exact};
use neurosa::problems::{maxcut_encode, ProblemKind, DEFAULT_MIS_BETA};
use neurosa::{AnnealSchedule, Domain, StateVector};

fn short() -> SolverConfig {
    SolverConfig {
        max_iter: 200_000,
        seed: 5,
        schedule: AnnealSchedule::fn_log(0.3125, 200.0, 1.0),
        trace_every: 10_000,
        ..SolverConfig::default()
    }
}

#[test]
fn ten_node_graph_has_one_gauge_pair_of_ground_states() {
    let g = erdos_renyi(10, 0.4, true, 1);
    let p = maxcut_encode(&g).unwrap();
    let r = brute_force(&p).unwrap();
    let by_hand = (0..1u64 << 10)
        .map(|m| p.energy(&StateVector::from_mask(m, 10, Domain::Spin)).unwrap())
        .fold(f64::INFINITY, f64::min);
    assert_eq!(r.best_value, by_hand);
    assert_eq!(r.optima_count, 2);
    let other = r.best_state.negated();
    assert_eq!(p.energy(&other).unwrap(), by_hand);

    let t = run(&p, &short()).unwrap();
    assert_eq!(t.best_energy, by_hand);
    assert!(t.best_state == r.best_state || t.best_state == other);
}

#[test]
fn record_survives_disk_and_matches_exact_cut() {
    let g = erdos_renyi(14, 0.3, false, 2);
    let (cut, _) = max_cut_exact(&g).unwrap();
    let inst = Instance::new(g, ProblemKind::Maxcut, DEFAULT_MIS_BETA).unwrap();
    let cfg = short();
    let rec = inst.record(&run(&inst.problem, &cfg).unwrap(), &cfg, None);
    assert_eq!(rec.best_value, cut as f64);
    assert_eq!(rec.best_series.last().unwrap().1, rec.best_value);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    write_run_record(&rec, &path).unwrap();
    assert_eq!(read_run_record(&path).unwrap(), rec);
}

#[test]
fn bench_reports_quality_against_supplied_reference() {
    let graphs: Vec<_> = (0..2).map(|s| erdos_renyi(12, 0.5, false, 30 + s)).collect();
    let mut sota = SotaTable::default();
    for g in &graphs {
        sota.insert(&g.name, ProblemKind::Maxcut, max_cut_exact(g).unwrap().0 as f64);
    }
    let spec = BenchmarkSpec {
        graphs,
        kind: ProblemKind::Maxcut,
        mis_beta: DEFAULT_MIS_BETA,
        runs: 4,
        config: short(),
        sota,
        workers: 2,
        record_time: false,
        histogram_bins: 5,
    };
    for (report, records) in bench(&spec).unwrap() {
        assert_eq!(records.len(), 4);
        assert!(report.warning.is_none());
        let q = report.qualities.unwrap();
        assert!(q.iter().all(|&x| x > 0.0 && x <= 1.0));
        assert_eq!(report.histogram.iter().map(|b| b.count).sum::<usize>(), 4);
    }
}
