//! Problem representation for quadratic spin and binary models.
//!
//! The Hamiltonian is `H(s) = ½ sᵀQs + bᵀs` with `Q` stored as a symmetric
//! sparse matrix in compressed-row form. Off-diagonal couplings and the
//! diagonal are kept apart so that single-variable flips only touch one row.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IsingError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("problem dimension must be at least 1")]
    Empty,
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("expected {expected} entries, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("value {value} at position {index} is outside the {domain:?} domain")]
    DomainViolation { index: usize, value: i8, domain: Domain },
    #[error("coupling ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("operation requires the {0:?} domain")]
    WrongDomain(Domain),
}

/// Variable domain of a quadratic model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// s ∈ {−1, +1}
    Spin,
    /// x ∈ {0, 1}
    Binary,
}

impl Domain {
    pub fn contains(self, v: i8) -> bool {
        match self {
            Domain::Spin => v == 1 || v == -1,
            Domain::Binary => v == 0 || v == 1,
        }
    }

    /// Value taken by a variable after flipping `v`.
    #[inline]
    pub fn flipped(self, v: i8) -> i8 {
        match self {
            Domain::Spin => -v,
            Domain::Binary => 1 - v,
        }
    }

    /// The "up" value: +1 for spins, 1 for bits.
    pub fn up(self) -> i8 {
        1
    }

    pub fn down(self) -> i8 {
        match self {
            Domain::Spin => -1,
            Domain::Binary => 0,
        }
    }
}

/// A general (not necessarily symmetric) sparse square-or-not matrix given as
/// coordinate triplets. Duplicate coordinates are summed.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl RawMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, w: f64) {
        self.entries.push((i, j, w));
    }

    /// ½ sᵀMs evaluated directly on the triplets.
    pub fn quadratic_form(&self, s: &[f64]) -> f64 {
        0.5 * self.entries.iter().map(|&(i, j, w)| w * s[i] * s[j]).sum::<f64>()
    }
}

/// Symmetric sparse matrix in compressed-row layout.
///
/// Every off-diagonal entry `(i, j)` is stored in both rows `i` and `j` with
/// identical weight, so symmetry holds exactly by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMatrix {
    dim: usize,
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    diag: Vec<f64>,
}

impl SymmetricMatrix {
    /// Empty (all-zero) matrix.
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            offsets: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
            diag: vec![0.0; dim],
        }
    }

    /// Builds `Q` with `Q_ij = Q_ji = w` for each listed pair (duplicates summed)
    /// and the given diagonal entries.
    pub fn from_pairs<I>(dim: usize, pairs: I, diag: Option<Vec<f64>>) -> Result<Self, IsingError>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); dim];
        let mut diagonal = diag.unwrap_or_else(|| vec![0.0; dim]);
        if diagonal.len() != dim {
            return Err(IsingError::LengthMismatch {
                expected: dim,
                found: diagonal.len(),
            });
        }
        for (i, j, w) in pairs {
            for idx in [i, j] {
                if idx >= dim {
                    return Err(IsingError::IndexOutOfRange { index: idx, dim });
                }
            }
            if !w.is_finite() {
                return Err(IsingError::NonFinite { row: i, col: j });
            }
            if i == j {
                diagonal[i] += w;
            } else {
                *rows[i].entry(j).or_insert(0.0) += w;
                *rows[j].entry(i).or_insert(0.0) += w;
            }
        }
        Ok(Self::from_rows(dim, rows, diagonal))
    }

    fn from_rows(dim: usize, rows: Vec<BTreeMap<usize, f64>>, diag: Vec<f64>) -> Self {
        let mut offsets = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0);
        for row in rows {
            for (j, w) in row {
                if w != 0.0 {
                    cols.push(j as u32);
                    vals.push(w);
                }
            }
            offsets.push(cols.len());
        }
        Self {
            dim,
            offsets,
            cols,
            vals,
            diag,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Off-diagonal entries of row `p` as parallel (column, weight) slices.
    #[inline]
    pub fn row(&self, p: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.offsets[p], self.offsets[p + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    #[inline]
    pub fn diagonal(&self, p: usize) -> f64 {
        self.diag[p]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        let (cols, vals) = self.row(i);
        match cols.binary_search(&(j as u32)) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Number of stored off-diagonal pairs (each counted once).
    pub fn pair_count(&self) -> usize {
        self.cols.len() / 2
    }

    pub fn degree(&self, p: usize) -> usize {
        self.offsets[p + 1] - self.offsets[p]
    }

    pub fn has_diagonal(&self) -> bool {
        self.diag.iter().any(|&d| d != 0.0)
    }

    /// True when every stored weight is an integer.
    pub fn is_integral(&self) -> bool {
        self.vals.iter().chain(self.diag.iter()).all(|w| w.fract() == 0.0)
    }

    /// Largest `Σ_j |Q_pj|` over rows, diagonal included.
    pub fn max_row_abs_sum(&self) -> f64 {
        (0..self.dim)
            .map(|p| self.row(p).1.iter().map(|w| w.abs()).sum::<f64>() + self.diag[p].abs())
            .fold(0.0, f64::max)
    }

    /// Upper-triangular listing `(i, j, Q_ij)` with `i < j`.
    pub fn upper_pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter()
                .zip(vals)
                .filter(move |(&j, _)| (j as usize) > i)
                .map(move |(&j, &w)| (i, j as usize, w))
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.dim]; self.dim];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = self.diag[i];
            let (cols, vals) = self.row(i);
            for (&j, &w) in cols.iter().zip(vals) {
                row[j as usize] = w;
            }
        }
        m
    }
}

/// Returns `(M + Mᵀ)/2`.
pub fn symmetrize(raw: &RawMatrix) -> Result<SymmetricMatrix, IsingError> {
    if raw.rows != raw.cols {
        return Err(IsingError::NotSquare {
            rows: raw.rows,
            cols: raw.cols,
        });
    }
    let dim = raw.rows;
    let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); dim];
    let mut diag = vec![0.0; dim];
    for &(i, j, w) in &raw.entries {
        for idx in [i, j] {
            if idx >= dim {
                return Err(IsingError::IndexOutOfRange { index: idx, dim });
            }
        }
        if !w.is_finite() {
            return Err(IsingError::NonFinite { row: i, col: j });
        }
        if i == j {
            diag[i] += w;
        } else {
            *rows[i].entry(j).or_insert(0.0) += 0.5 * w;
            *rows[j].entry(i).or_insert(0.0) += 0.5 * w;
        }
    }
    Ok(SymmetricMatrix::from_rows(dim, rows, diag))
}

/// Assignment of every variable of a problem.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateVector(pub Vec<i8>);

impl StateVector {
    pub fn uniform(dim: usize, value: i8) -> Self {
        Self(vec![value; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }

    /// Copy with variable `p` flipped.
    pub fn flipped(&self, domain: Domain, p: usize) -> Self {
        let mut out = self.clone();
        out.0[p] = domain.flipped(out.0[p]);
        out
    }

    /// Global spin reversal `s ↦ −s`.
    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|v| -v).collect())
    }

    /// Compact `0`/`1` rendering; `1` marks the up value (+1 or 1).
    pub fn to_bitstring(&self) -> String {
        self.0.iter().map(|&v| if v == 1 { '1' } else { '0' }).collect()
    }

    pub fn from_bitstring(bits: &str, domain: Domain) -> Option<Self> {
        bits.chars()
            .map(|c| match c {
                '1' => Some(domain.up()),
                '0' => Some(domain.down()),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Self)
    }

    /// State whose variable `i` is "up" iff bit `i` of `mask` is set.
    pub fn from_mask(mask: u64, dim: usize, domain: Domain) -> Self {
        Self(
            (0..dim)
                .map(|i| if mask >> i & 1 == 1 { domain.up() } else { domain.down() })
                .collect(),
        )
    }
}

/// A quadratic optimization problem over spins or bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingProblem {
    couplings: SymmetricMatrix,
    bias: Option<Vec<f64>>,
    domain: Domain,
    /// Variables pinned to their current value (static neurons).
    frozen: Vec<bool>,
}

impl IsingProblem {
    pub fn new(couplings: SymmetricMatrix, bias: Option<Vec<f64>>, domain: Domain) -> Result<Self, IsingError> {
        let dim = couplings.dim();
        if dim == 0 {
            return Err(IsingError::Empty);
        }
        if let Some(b) = &bias {
            if b.len() != dim {
                return Err(IsingError::LengthMismatch {
                    expected: dim,
                    found: b.len(),
                });
            }
        }
        let bias = bias.filter(|b| b.iter().any(|&x| x != 0.0));
        Ok(Self {
            couplings,
            bias,
            domain,
            frozen: vec![false; dim],
        })
    }

    /// Spin problem without bias from `(i, j, Q_ij)` pairs.
    pub fn spin_from_pairs<I>(dim: usize, pairs: I) -> Result<Self, IsingError>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        Self::new(SymmetricMatrix::from_pairs(dim, pairs, None)?, None, Domain::Spin)
    }

    pub fn with_frozen(mut self, frozen: Vec<bool>) -> Result<Self, IsingError> {
        if frozen.len() != self.dim() {
            return Err(IsingError::LengthMismatch {
                expected: self.dim(),
                found: frozen.len(),
            });
        }
        self.frozen = frozen;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.couplings.dim()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn couplings(&self) -> &SymmetricMatrix {
        &self.couplings
    }

    pub fn bias(&self) -> Option<&[f64]> {
        self.bias.as_deref()
    }

    #[inline]
    pub fn bias_at(&self, p: usize) -> f64 {
        self.bias.as_ref().map_or(0.0, |b| b[p])
    }

    pub fn frozen(&self) -> &[bool] {
        &self.frozen
    }

    pub fn is_frozen(&self, p: usize) -> bool {
        self.frozen[p]
    }

    /// Indices of variables that may flip.
    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&p| !self.frozen[p]).collect()
    }

    pub fn check_state(&self, s: &StateVector) -> Result<(), IsingError> {
        if s.len() != self.dim() {
            return Err(IsingError::LengthMismatch {
                expected: self.dim(),
                found: s.len(),
            });
        }
        match s.0.iter().position(|&v| !self.domain.contains(v)) {
            Some(index) => Err(IsingError::DomainViolation {
                index,
                value: s.0[index],
                domain: self.domain,
            }),
            None => Ok(()),
        }
    }

    /// `Σ_{j≠p} Q_pj s_j`.
    #[inline]
    pub fn local_field(&self, s: &[i8], p: usize) -> f64 {
        let (cols, vals) = self.couplings.row(p);
        cols.iter().zip(vals).map(|(&j, &w)| w * f64::from(s[j as usize])).sum()
    }

    /// `H(s) = ½ sᵀQs + bᵀs`.
    pub fn energy(&self, s: &StateVector) -> Result<f64, IsingError> {
        self.check_state(s)?;
        Ok(self.energy_unchecked(&s.0))
    }

    pub fn energy_unchecked(&self, s: &[i8]) -> f64 {
        let mut quad = 0.0;
        let mut linear = 0.0;
        for (p, &sp) in s.iter().enumerate() {
            let sp = f64::from(sp);
            quad += sp * (self.local_field(s, p) + self.couplings.diagonal(p) * sp);
            linear += self.bias_at(p) * sp;
        }
        0.5 * quad + linear
    }

    /// `H(s with p flipped) − H(s)` from row `p` alone.
    pub fn delta_energy(&self, s: &StateVector, p: usize) -> Result<f64, IsingError> {
        self.check_state(s)?;
        if p >= self.dim() {
            return Err(IsingError::IndexOutOfRange {
                index: p,
                dim: self.dim(),
            });
        }
        Ok(self.delta_energy_unchecked(&s.0, p))
    }

    #[inline]
    pub fn delta_energy_unchecked(&self, s: &[i8], p: usize) -> f64 {
        let old = s[p];
        let new = self.domain.flipped(old);
        let d = f64::from(new - old);
        let field = self.local_field(s, p) + self.bias_at(p);
        let diag = match self.domain {
            // s² = 1 on both sides of a spin flip
            Domain::Spin => 0.0,
            // x² = x, so (new² − old²) = d
            Domain::Binary => 0.5 * self.couplings.diagonal(p) * d,
        };
        d * field + diag
    }
}

/// A biased spin problem rewritten with a static neuron at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldedProblem {
    pub problem: IsingProblem,
    /// `H_original(s) = H_folded((1, s)) + offset`.
    pub offset: f64,
}

impl FoldedProblem {
    /// Prepends the static `+1` variable.
    pub fn lift(&self, s: &StateVector) -> StateVector {
        let mut v = Vec::with_capacity(s.len() + 1);
        v.push(1);
        v.extend_from_slice(&s.0);
        StateVector(v)
    }

    /// Drops the static variable, gauge-fixing so that it reads `+1`.
    pub fn project(&self, s: &StateVector) -> StateVector {
        let sign = s.0[0];
        StateVector(s.0[1..].iter().map(|&v| v * sign).collect())
    }
}

/// Moves the linear term into couplings with a frozen `+1` variable:
/// `Q'_{0,p+1} = Q'_{p+1,0} = b_p`.
pub fn fold_bias(problem: &IsingProblem) -> Result<FoldedProblem, IsingError> {
    if problem.domain() != Domain::Spin {
        return Err(IsingError::WrongDomain(Domain::Spin));
    }
    let dim = problem.dim();
    let q = problem.couplings();
    let shifted = q.upper_pairs().map(|(i, j, w)| (i + 1, j + 1, w));
    let bias_pairs = (0..dim)
        .map(|p| (0, p + 1, problem.bias_at(p)))
        .filter(|&(_, _, b)| b != 0.0);
    let mut diag = vec![0.0];
    diag.extend((0..dim).map(|p| q.diagonal(p)));
    let couplings = SymmetricMatrix::from_pairs(dim + 1, shifted.chain(bias_pairs), Some(diag))?;
    let mut frozen = vec![true];
    frozen.extend_from_slice(problem.frozen());
    let folded = IsingProblem::new(couplings, None, Domain::Spin)?.with_frozen(frozen)?;
    Ok(FoldedProblem {
        problem: folded,
        offset: 0.0,
    })
}
