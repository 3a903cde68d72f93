//! Ground truth for small instances: exhaustive enumeration, exact MAX-CUT
//! and MIS search, and a plain single-flip annealer.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anneal::{make_threshold, AnnealError, NoiseSampler};
use crate::ising::{IsingError, IsingProblem, StateVector};
use crate::network::{Direction, RunTrace, SolverConfig, SpikeEvent, TraceRecorder};
use crate::problems::WeightedGraph;
use crate::rng;

pub const MAX_BRUTE_FORCE_DIM: usize = 26;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{free} free variables exceed the enumeration limit of {limit}")]
    TooLarge { free: usize, limit: usize },
    #[error("graph has {0} vertices; exact search supports at most 64")]
    GraphTooLarge(usize),
    #[error("no free variables to sample")]
    NoFreeVariables,
    #[error(transparent)]
    Anneal(#[from] AnnealError),
    #[error(transparent)]
    Ising(#[from] IsingError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best_state: StateVector,
    pub best_value: f64,
    pub optima_count: u64,
}

struct Partial {
    best: f64,
    mask: u64,
    count: u64,
}

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn merge(mut acc: Partial, next: Partial) -> Partial {
    if ties(next.best, acc.best) {
        acc.count += next.count;
    } else if next.best < acc.best {
        acc = next;
    }
    acc
}

/// Minimum of `H` over every assignment of the free variables (frozen ones
/// stay at the up value). Enumerates in Gray-code order, one flip per state.
pub fn brute_force(problem: &IsingProblem) -> Result<OracleResult, OracleError> {
    let free = problem.free_indices();
    let m = free.len();
    if m > MAX_BRUTE_FORCE_DIM {
        return Err(OracleError::TooLarge {
            free: m,
            limit: MAX_BRUTE_FORCE_DIM,
        });
    }
    let domain = problem.domain();
    let state_of = |mask: u64| -> Vec<i8> {
        let mut s = vec![domain.up(); problem.dim()];
        for (bit, &p) in free.iter().enumerate() {
            s[p] = if mask >> bit & 1 == 1 {
                domain.up()
            } else {
                domain.down()
            };
        }
        s
    };
    // top bits fixed per chunk, Gray code over the rest
    let top = m.saturating_sub(14).min(6);
    let low = m - top;
    let chunk = |c: u64| -> Partial {
        let base = c << low;
        let mut s = state_of(base);
        let mut e = problem.energy_unchecked(&s);
        let mut acc = Partial {
            best: e,
            mask: base,
            count: 1,
        };
        let mut gray = 0u64;
        for k in 1..(1u64 << low) {
            let bit = k.trailing_zeros() as usize;
            let p = free[bit];
            e += problem.delta_energy_unchecked(&s, p);
            s[p] = domain.flipped(s[p]);
            gray ^= 1 << bit;
            acc = merge(
                acc,
                Partial {
                    best: e,
                    mask: base | gray,
                    count: 1,
                },
            );
        }
        acc
    };
    let partials: Vec<Partial> = (0..1u64 << top).into_par_iter().map(chunk).collect();
    let best = partials.into_iter().reduce(merge).expect("at least one chunk");
    let best_state = StateVector(state_of(best.mask));
    Ok(OracleResult {
        best_value: problem.energy_unchecked(&best_state.0),
        best_state,
        optima_count: best.count,
    })
}

/// Maximum cut by direct enumeration (vertex 0 pinned to one side), with
/// the number of maximizing partitions counted without the pin.
pub fn max_cut_exact(g: &WeightedGraph) -> Result<(i64, u64), OracleError> {
    if g.n > MAX_BRUTE_FORCE_DIM + 1 {
        return Err(OracleError::TooLarge {
            free: g.n,
            limit: MAX_BRUTE_FORCE_DIM + 1,
        });
    }
    let adj = weighted_adjacency(g);
    let mut side = vec![false; g.n];
    let mut cut = 0i64;
    let mut best = 0i64;
    let mut count = 1u64;
    for k in 1..(1u64 << (g.n - 1)) {
        let v = k.trailing_zeros() as usize + 1;
        for &(u, w) in &adj[v] {
            cut += if side[u] == side[v] { w } else { -w };
        }
        side[v] = !side[v];
        if cut > best {
            best = cut;
            count = 1;
        } else if cut == best {
            count += 1;
        }
    }
    Ok((best, 2 * count))
}

fn weighted_adjacency(g: &WeightedGraph) -> Vec<Vec<(usize, i64)>> {
    let mut adj = vec![Vec::new(); g.n];
    for &(i, j, w) in &g.edges {
        adj[i].push((j, w));
        adj[j].push((i, w));
    }
    adj
}

/// Size of a maximum independent set by branch and bound on bitsets.
pub fn max_independent_set(g: &WeightedGraph) -> Result<usize, OracleError> {
    if g.n > 64 {
        return Err(OracleError::GraphTooLarge(g.n));
    }
    let mut nbr = vec![0u64; g.n];
    for &(i, j, _) in &g.edges {
        nbr[i] |= 1 << j;
        nbr[j] |= 1 << i;
    }
    fn search(cand: u64, size: usize, best: &mut usize, nbr: &[u64]) {
        if cand == 0 {
            *best = (*best).max(size);
            return;
        }
        if size + cand.count_ones() as usize <= *best {
            return;
        }
        let v = cand.trailing_zeros() as usize;
        let rest = cand & !(1 << v);
        search(rest & !nbr[v], size + 1, best, nbr);
        if nbr[v] & cand != 0 {
            search(rest, size, best, nbr);
        }
    }
    let all = if g.n == 64 { u64::MAX } else { (1u64 << g.n) - 1 };
    let mut best = 0;
    search(all, 0, &mut best, &nbr);
    Ok(best)
}

/// Acceptance predicate shared with the ON-OFF network: the flip is taken
/// iff `ΔH/2 < −μ`.
#[inline]
pub fn sa_accepts(delta_h: f64, mu: f64) -> bool {
    0.5 * delta_h < -mu
}

/// Single-flip annealer: pick a free variable uniformly, draw the threshold
/// `μ = T_n·N`, accept iff [`sa_accepts`]. Draws come from the same stream
/// and in the same order as the select-then-test network, so with equal
/// configs the two produce the same trajectory. Arbiter, gating and `a` in
/// `cfg` are ignored; a linear term is handled directly.
pub fn reference_sa(
    problem: &IsingProblem,
    cfg: &SolverConfig,
    initial: Option<&StateVector>,
) -> Result<RunTrace, OracleError> {
    cfg.schedule.validate()?;
    let sampler = NoiseSampler::new(&cfg.noise)?;
    let free = problem.free_indices();
    if free.is_empty() {
        return Err(OracleError::NoFreeVariables);
    }
    let domain = problem.domain();
    let mut s = match initial {
        Some(s) => {
            problem.check_state(s)?;
            s.0.clone()
        }
        None => vec![domain.up(); problem.dim()],
    };
    let mut rng = rng::stream(cfg.seed);
    let mut rec = TraceRecorder::new(cfg, problem.energy_unchecked(&s), &s);
    let mut mu = f64::NAN;
    for n in 1..=cfg.max_iter {
        let temp = cfg.schedule.temperature_at(n);
        let p = free[rng::index(&mut rng, free.len())];
        mu = make_threshold(temp, sampler.sample(&mut rng), 0.0, 0, cfg.noise.quant);
        let dh = problem.delta_energy_unchecked(&s, p);
        if sa_accepts(dh, mu) {
            s[p] = domain.flipped(s[p]);
            let direction = if s[p] == domain.up() {
                Direction::On
            } else {
                Direction::Off
            };
            rec.spike(
                SpikeEvent {
                    iteration: n,
                    neuron: p,
                    direction,
                    delta_h: dh,
                },
                &s,
            );
        }
        rec.tick(n, mu, temp);
    }
    let last_t = cfg.schedule.temperature_at(cfg.max_iter.max(1));
    Ok(rec.finish(cfg.max_iter, mu, last_t, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anneal::AnnealSchedule;
    use crate::generators::erdos_renyi;
    use crate::ising::{fold_bias, SymmetricMatrix};
    use crate::network::{run, Arbiter};
    use crate::problems::{cut_from_energy, maxcut_encode, mis_decode, mis_encode, DEFAULT_MIS_BETA};
    use crate::Domain;

    fn sa_cfg(schedule: AnnealSchedule, seed: u64, max_iter: u64) -> SolverConfig {
        SolverConfig {
            schedule,
            seed,
            max_iter,
            spike_stride: 1,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn single_biased_spin() {
        let p = IsingProblem::new(SymmetricMatrix::zeros(1), Some(vec![3.0]), Domain::Spin).unwrap();
        let r = brute_force(&p).unwrap();
        assert_eq!(r.best_state.0, vec![-1]);
        assert_eq!(r.best_value, -3.0);
        assert_eq!(r.optima_count, 1);
    }

    #[test]
    fn size_guard() {
        let p = IsingProblem::spin_from_pairs(27, []).unwrap();
        assert!(matches!(brute_force(&p), Err(OracleError::TooLarge { free: 27, .. })));
    }

    #[test]
    fn gray_code_matches_naive_enumeration() {
        for seed in 0..5 {
            let g = erdos_renyi(14, 0.4, true, seed);
            let p = maxcut_encode(&g).unwrap();
            let mut best = f64::INFINITY;
            let mut count = 0;
            for mask in 0..(1u64 << 14) {
                let e = p.energy(&StateVector::from_mask(mask, 14, Domain::Spin)).unwrap();
                if e < best {
                    best = e;
                    count = 1;
                } else if e == best {
                    count += 1;
                }
            }
            let r = brute_force(&p).unwrap();
            assert_eq!((r.best_value, r.optima_count), (best, count));
            assert_eq!(p.energy(&r.best_state).unwrap(), best);
        }
    }

    #[test]
    fn chunked_enumeration_handles_larger_problems() {
        // 20 variables uses the partitioned path
        let g = erdos_renyi(20, 0.2, true, 9);
        let p = maxcut_encode(&g).unwrap();
        let r = brute_force(&p).unwrap();
        let (cut, count) = max_cut_exact(&g).unwrap();
        assert_eq!(cut_from_energy(&g, r.best_value), cut as f64);
        assert_eq!(r.optima_count, count);
        assert_eq!(r.optima_count % 2, 0);
    }

    #[test]
    fn zero_bias_optima_come_in_pairs() {
        for seed in 0..20 {
            let g = erdos_renyi(10, 0.5, true, 100 + seed);
            let r = brute_force(&maxcut_encode(&g).unwrap()).unwrap();
            assert_eq!(r.optima_count % 2, 0);
        }
    }

    #[test]
    fn ising_optimum_matches_direct_cut_search() {
        for seed in 0..10 {
            let g = erdos_renyi(12, 0.35, seed % 2 == 0, 200 + seed);
            let r = brute_force(&maxcut_encode(&g).unwrap()).unwrap();
            let (cut, _) = max_cut_exact(&g).unwrap();
            assert_eq!(cut_from_energy(&g, r.best_value), cut as f64);
        }
    }

    #[test]
    fn frozen_variables_are_held() {
        let p = IsingProblem::new(
            SymmetricMatrix::from_pairs(3, [(0, 1, 1.0), (1, 2, 1.0)], None).unwrap(),
            Some(vec![0.0, 0.0, 5.0]),
            Domain::Spin,
        )
        .unwrap();
        let folded = fold_bias(&p).unwrap();
        let direct = brute_force(&p).unwrap();
        let via = brute_force(&folded.problem).unwrap();
        assert_eq!(via.best_state.0[0], 1);
        assert_eq!(direct.best_value, via.best_value + folded.offset);
        assert_eq!(folded.project(&via.best_state), direct.best_state);
    }

    #[test]
    fn mis_search_matches_penalized_optimum() {
        let g = erdos_renyi(18, 0.25, false, 31);
        let p = mis_encode(&g, DEFAULT_MIS_BETA).unwrap();
        let r = brute_force(&p).unwrap();
        let sol = mis_decode(&g, &r.best_state, false).unwrap();
        assert!(sol.feasible);
        assert_eq!(sol.size, max_independent_set(&g).unwrap());
        assert_eq!(-2.0 * r.best_value, sol.size as f64);
    }

    #[test]
    fn mis_search_small_cases() {
        let empty = WeightedGraph::new(5, vec![], "").unwrap();
        assert_eq!(max_independent_set(&empty).unwrap(), 5);
        let tri = WeightedGraph::new(3, vec![(0, 1, 1), (1, 2, 1), (0, 2, 1)], "").unwrap();
        assert_eq!(max_independent_set(&tri).unwrap(), 1);
        let path = WeightedGraph::new(5, vec![(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 4, 1)], "").unwrap();
        assert_eq!(max_independent_set(&path).unwrap(), 3);
    }

    #[test]
    fn acceptance_predicate_boundaries() {
        assert!(sa_accepts(-2.0, 0.5));
        assert!(!sa_accepts(-2.0, 1.0));
        assert!(sa_accepts(-2.0, 0.999));
        assert!(sa_accepts(0.0, -1e-12));
        assert!(!sa_accepts(0.0, 0.0));
        assert!(!sa_accepts(4.0, -2.0));
        assert!(sa_accepts(4.0, -2.0001));
    }

    #[test]
    fn frozen_temperature_is_greedy_descent() {
        let g = erdos_renyi(30, 0.2, true, 41);
        let p = maxcut_encode(&g).unwrap();
        let cfg = sa_cfg(AnnealSchedule::constant(1e-12), 3, 20_000);
        let t = reference_sa(&p, &cfg, None).unwrap();
        assert!(t.spikes.iter().all(|s| s.delta_h <= 0.0));
        assert_eq!(t.spike_count as usize, t.spikes.len());
    }

    #[test]
    fn reference_sa_spikes_match_recomputation() {
        let g = erdos_renyi(12, 0.4, true, 42);
        let p = maxcut_encode(&g).unwrap();
        let t = reference_sa(&p, &sa_cfg(AnnealSchedule::fn_log(0.3125, 800.0, 1.0), 7, 50_000), None).unwrap();
        let mut s = vec![1i8; 12];
        let mut e = p.energy_unchecked(&s);
        for ev in &t.spikes {
            s[ev.neuron] = -s[ev.neuron];
            let after = p.energy_unchecked(&s);
            assert_eq!(after - e, ev.delta_h);
            e = after;
        }
        assert_eq!(s, t.final_state.0);
    }

    #[test]
    fn network_runs_in_lockstep_with_reference() {
        for seed in 0..4 {
            let g = erdos_renyi(40, 0.15, true, 300 + seed);
            let p = maxcut_encode(&g).unwrap();
            let mut cfg = sa_cfg(AnnealSchedule::fn_log(0.3125, 2000.0, 1.0), seed, 30_000);
            cfg.trace_every = 1000;
            let a = run(&p, &cfg).unwrap();
            let b = reference_sa(&p, &cfg, None).unwrap();
            assert!(a.spike_count > 100);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn lockstep_holds_for_binary_problems() {
        let g = erdos_renyi(30, 0.2, false, 77);
        let p = mis_encode(&g, DEFAULT_MIS_BETA).unwrap();
        let cfg = sa_cfg(AnnealSchedule::fn_log(0.3125, 500.0, 1.0), 5, 20_000);
        assert_eq!(run(&p, &cfg).unwrap(), reference_sa(&p, &cfg, None).unwrap());
    }

    #[test]
    fn test_then_select_differs_from_reference_stream() {
        let g = erdos_renyi(20, 0.3, true, 8);
        let p = maxcut_encode(&g).unwrap();
        let mut cfg = sa_cfg(AnnealSchedule::fn_log(0.3125, 500.0, 1.0), 1, 2000);
        cfg.arbiter = Arbiter::TestThenSelect;
        let a = run(&p, &cfg).unwrap();
        let b = reference_sa(&p, &cfg, None).unwrap();
        assert_ne!(a.spikes, b.spikes);
    }

    #[test]
    fn biased_reference_agrees_with_folded_network() {
        // the frozen variable is never drawn, so only the folded index shifts
        let p = IsingProblem::new(
            SymmetricMatrix::from_pairs(4, [(0, 1, 1.0), (1, 2, -1.0), (2, 3, 1.0)], None).unwrap(),
            Some(vec![0.5, -1.0, 0.0, 2.0]),
            Domain::Spin,
        )
        .unwrap();
        let folded = fold_bias(&p).unwrap();
        let mut cfg = sa_cfg(AnnealSchedule::fn_log(0.3125, 200.0, 1.0), 2, 5000);
        cfg.trace_every = 0;
        let direct = reference_sa(&p, &cfg, None).unwrap();
        let net = run(&folded.problem, &cfg).unwrap();
        assert_eq!(direct.best_energy, net.best_energy + folded.offset);
        assert_eq!(folded.project(&net.final_state), direct.final_state);
        assert_eq!(direct.spike_count, net.spike_count);
    }
}
