//! MAX-CUT and maximum independent set encodings.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ising::{Domain, IsingError, IsingProblem, StateVector, SymmetricMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    Duplicate(usize, usize),
    #[error("vertex {index} out of range for {n} vertices")]
    OutOfRange { index: usize, n: usize },
    #[error("graph has no vertices")]
    Empty,
    #[error("MIS penalty must lie in (0, 1), got {0}")]
    BadBeta(f64),
    #[error("MIS needs unit edge weights; edge ({0}, {1}) has weight {2}")]
    Weighted(usize, usize, i64),
    #[error(transparent)]
    Ising(#[from] IsingError),
}

/// Undirected graph with integer edge weights, edges stored with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, i64)>,
    pub name: String,
}

impl WeightedGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize, i64)>, name: impl Into<String>) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut out = Vec::with_capacity(edges.len());
        for (i, j, w) in edges {
            for index in [i, j] {
                if index >= n {
                    return Err(GraphError::OutOfRange { index, n });
                }
            }
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            if !seen.insert((a, b)) {
                return Err(GraphError::Duplicate(a, b));
            }
            out.push((a, b, w));
        }
        Ok(Self {
            n,
            edges: out,
            name: name.into(),
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn total_weight(&self) -> i64 {
        self.edges.iter().map(|e| e.2).sum()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(i, j, _) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j, _) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    pub fn is_unweighted(&self) -> bool {
        self.edges.iter().all(|e| e.2 == 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Maxcut,
    Mis,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Maxcut => "maxcut",
            Self::Mis => "mis",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "maxcut" | "max-cut" => Ok(Self::Maxcut),
            "mis" => Ok(Self::Mis),
            other => Err(format!("unknown problem kind `{other}` (expected maxcut or mis)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutSolution {
    pub partition: StateVector,
    pub cut_value: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MisSolution {
    pub members: StateVector,
    pub size: usize,
    pub feasible: bool,
}

fn check_len(g: &WeightedGraph, s: &StateVector) -> Result<(), GraphError> {
    if s.len() != g.n {
        return Err(IsingError::LengthMismatch {
            expected: g.n,
            found: s.len(),
        }
        .into());
    }
    Ok(())
}

/// Spin problem with `Q_ij = Q_ji = w_ij`, so that `H = Σ_{i<j} w_ij s_i s_j`.
pub fn maxcut_encode(g: &WeightedGraph) -> Result<IsingProblem, GraphError> {
    let pairs = g.edges.iter().map(|&(i, j, w)| (i, j, w as f64));
    Ok(IsingProblem::new(
        SymmetricMatrix::from_pairs(g.n, pairs, None)?,
        None,
        Domain::Spin,
    )?)
}

/// Weight of the edges whose endpoints sit on different sides.
pub fn cut_value(g: &WeightedGraph, s: &[i8]) -> i64 {
    g.edges.iter().filter(|&&(i, j, _)| s[i] != s[j]).map(|e| e.2).sum()
}

pub fn maxcut_decode(g: &WeightedGraph, s: &StateVector) -> Result<CutSolution, GraphError> {
    check_len(g, s)?;
    if let Some(index) = s.0.iter().position(|&v| v != 1 && v != -1) {
        return Err(IsingError::DomainViolation {
            index,
            value: s.0[index],
            domain: Domain::Spin,
        }
        .into());
    }
    Ok(CutSolution {
        cut_value: cut_value(g, &s.0),
        partition: s.clone(),
    })
}

/// `cut = (Σw − H)/2` for the encoding of [`maxcut_encode`].
pub fn cut_from_energy(g: &WeightedGraph, energy: f64) -> f64 {
    (g.total_weight() as f64 - energy) / 2.0
}

pub const DEFAULT_MIS_BETA: f64 = 0.75;

/// Binary problem with `Q_ii = −1` and `Q_ij = Q_ji = β` on edges, so that
/// `−2H(x) = |x| − 2β·(violated edges)`.
///
/// For `β > ½` dropping either endpoint of a violated edge strictly improves
/// the objective, so every minimizer is an independent set.
pub fn mis_encode(g: &WeightedGraph, beta: f64) -> Result<IsingProblem, GraphError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(GraphError::BadBeta(beta));
    }
    if let Some(&(i, j, w)) = g.edges.iter().find(|e| e.2 != 1) {
        return Err(GraphError::Weighted(i, j, w));
    }
    let pairs = g.edges.iter().map(|&(i, j, _)| (i, j, beta));
    Ok(IsingProblem::new(
        SymmetricMatrix::from_pairs(g.n, pairs, Some(vec![-1.0; g.n]))?,
        None,
        Domain::Binary,
    )?)
}

/// `|x| − 2β·(violated edges)`.
pub fn mis_objective(g: &WeightedGraph, x: &[i8], beta: f64) -> f64 {
    let size = x.iter().filter(|&&v| v == 1).count() as f64;
    size - 2.0 * beta * violations(g, x) as f64
}

pub fn violations(g: &WeightedGraph, x: &[i8]) -> usize {
    g.edges.iter().filter(|&&(i, j, _)| x[i] == 1 && x[j] == 1).count()
}

/// Reads off size and feasibility. With `repair`, each violated edge (in
/// edge order) loses its lower-degree endpoint, the second endpoint on ties.
pub fn mis_decode(g: &WeightedGraph, x: &StateVector, repair: bool) -> Result<MisSolution, GraphError> {
    check_len(g, x)?;
    if let Some(index) = x.0.iter().position(|&v| v != 0 && v != 1) {
        return Err(IsingError::DomainViolation {
            index,
            value: x.0[index],
            domain: Domain::Binary,
        }
        .into());
    }
    let mut members = x.0.clone();
    if repair {
        let deg = g.degrees();
        for &(i, j, _) in &g.edges {
            if members[i] == 1 && members[j] == 1 {
                let drop = if deg[i] < deg[j] { i } else { j };
                members[drop] = 0;
            }
        }
    }
    Ok(MisSolution {
        size: members.iter().filter(|&&v| v == 1).count(),
        feasible: violations(g, &members) == 0,
        members: StateVector(members),
    })
}

/// Rewrites a binary problem over `x = (1 + s)/2` as a spin problem with a
/// linear term. Returns the problem and the constant `c` with
/// `H_binary(x) = H_spin(s) + c`.
pub fn binary_to_spin(problem: &IsingProblem) -> Result<(IsingProblem, f64), IsingError> {
    if problem.domain() != Domain::Binary {
        return Err(IsingError::WrongDomain(Domain::Binary));
    }
    let q = problem.couplings();
    let dim = problem.dim();
    let mut bias = vec![0.0; dim];
    let mut offset = 0.0;
    for (p, h) in bias.iter_mut().enumerate() {
        let row: f64 = q.row(p).1.iter().sum();
        let d = q.diagonal(p);
        *h = 0.25 * (row + d) + 0.5 * problem.bias_at(p);
        offset += 0.125 * (row + 2.0 * d) + 0.5 * problem.bias_at(p);
    }
    let pairs = q.upper_pairs().map(|(i, j, w)| (i, j, 0.25 * w));
    let spin = IsingProblem::new(SymmetricMatrix::from_pairs(dim, pairs, None)?, Some(bias), Domain::Spin)?;
    Ok((spin, offset))
}
