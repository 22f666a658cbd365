//! Transient analysis of finite CTMCs by uniformization, and the `[l, u]`
//! probability bound induced by an absorbing truncation state.

pub mod poisson;

use thiserror::Error;

use crate::stategraph::StateGraph;
use poisson::PoissonWeights;

/// Default truncation tolerance for the Poisson tail.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Uniformization rate is this factor times the largest exit rate.
pub const UNIFORMIZATION_FACTOR: f64 = 1.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CtmcError {
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("tolerance must lie in (0, 1), got {0}")]
    InvalidTolerance(f64),
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state index {index} out of range for {len} states")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("the absorbing state cannot be a goal state")]
    AbsorbingInGoal,
    #[error("state graph has no absorbing state")]
    NotClosed,
    #[error("invalid rate {rate} from {row} to {col}")]
    InvalidRate { row: usize, col: usize, rate: f64 },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("time points must be non-decreasing")]
    UnsortedTimes,
}

/// Sparse off-diagonal generator in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    dimension: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    rates: Vec<f64>,
    exit_rates: Vec<f64>,
    absorbing: Option<usize>,
}

impl RateMatrix {
    /// Builds from `(row, col, rate)` triples. Parallel entries are summed;
    /// self-loops and zero rates are dropped.
    pub fn from_entries(
        dimension: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
        absorbing: Option<usize>,
    ) -> Result<Self, CtmcError> {
        let mut triples = Vec::new();
        for (row, col, rate) in entries {
            if row >= dimension || col >= dimension {
                return Err(CtmcError::IndexOutOfRange {
                    index: row.max(col),
                    len: dimension,
                });
            }
            if !rate.is_finite() || rate < 0.0 {
                return Err(CtmcError::InvalidRate { row, col, rate });
            }
            if row != col && rate > 0.0 {
                triples.push((row, col, rate));
            }
        }
        if let Some(a) = absorbing {
            if a >= dimension {
                return Err(CtmcError::IndexOutOfRange {
                    index: a,
                    len: dimension,
                });
            }
        }
        // Stable sort keeps summation order deterministic.
        triples.sort_by_key(|&(r, c, _)| (r, c));
        let mut offsets = vec![0usize; dimension + 1];
        let mut cols: Vec<usize> = Vec::with_capacity(triples.len());
        let mut rates: Vec<f64> = Vec::with_capacity(triples.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triples {
            if last == Some((r, c)) {
                *rates.last_mut().expect("entry present") += v;
            } else {
                cols.push(c);
                rates.push(v);
                offsets[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..dimension {
            offsets[i + 1] += offsets[i];
        }
        let exit_rates = (0..dimension)
            .map(|r| rates[offsets[r]..offsets[r + 1]].iter().sum())
            .collect();
        let mut m = RateMatrix {
            dimension,
            offsets,
            cols,
            rates,
            exit_rates,
            absorbing,
        };
        if let Some(a) = absorbing {
            m = m.make_absorbing(&|i| i == a);
        }
        Ok(m)
    }

    /// Rate matrix of a closed state graph: entry `(s, s')` sums the
    /// propensities of all reactions taking `s` to `s'`.
    pub fn from_graph(graph: &StateGraph) -> Result<Self, CtmcError> {
        let absorbing = graph.absorbing_index().ok_or(CtmcError::NotClosed)?;
        RateMatrix::from_entries(
            graph.len(),
            graph
                .transitions()
                .iter()
                .map(|t| (t.source, t.target, t.rate)),
            Some(absorbing),
        )
    }

    /// Copy with every row selected by `absorb` emptied.
    pub fn make_absorbing(&self, absorb: &dyn Fn(usize) -> bool) -> RateMatrix {
        let mut offsets = vec![0usize; self.dimension + 1];
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut rates = Vec::with_capacity(self.rates.len());
        let mut exit_rates = self.exit_rates.clone();
        for r in 0..self.dimension {
            if absorb(r) {
                exit_rates[r] = 0.0;
            } else {
                let span = self.offsets[r]..self.offsets[r + 1];
                cols.extend_from_slice(&self.cols[span.clone()]);
                rates.extend_from_slice(&self.rates[span]);
            }
            offsets[r + 1] = cols.len();
        }
        RateMatrix {
            dimension: self.dimension,
            offsets,
            cols,
            rates,
            exit_rates,
            absorbing: self.absorbing,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn absorbing_index(&self) -> Option<usize> {
        self.absorbing
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn exit_rate(&self, row: usize) -> f64 {
        self.exit_rates[row]
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.exit_rates.iter().copied().fold(0.0, f64::max)
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.offsets[row]..self.offsets[row + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.rates[span].iter().copied())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.row(row)
            .find(|&(c, _)| c == col)
            .map_or(0.0, |(_, v)| v)
    }
}

/// Probability vector over the states of a chain at a point in time.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probabilities: Vec<f64>,
    time: f64,
}

impl Distribution {
    pub fn new(probabilities: Vec<f64>, time: f64) -> Result<Self, CtmcError> {
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(CtmcError::InvalidDistribution(
                "entries must be finite and non-negative".into(),
            ));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(CtmcError::InvalidDistribution(format!(
                "mass {total} is not 1"
            )));
        }
        if !(time >= 0.0) {
            return Err(CtmcError::NegativeTime(time));
        }
        Ok(Distribution {
            probabilities,
            time,
        })
    }

    /// All mass on one state at time zero.
    pub fn point(dimension: usize, index: usize) -> Result<Self, CtmcError> {
        if index >= dimension {
            return Err(CtmcError::IndexOutOfRange {
                index,
                len: dimension,
            });
        }
        let mut probabilities = vec![0.0; dimension];
        probabilities[index] = 1.0;
        Ok(Distribution {
            probabilities,
            time: 0.0,
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    /// Zeroes the entries selected by `drop`, for multi-phase analyses.
    pub(crate) fn discard(&mut self, drop: &dyn Fn(usize) -> bool) {
        for (i, p) in self.probabilities.iter_mut().enumerate() {
            if drop(i) {
                *p = 0.0;
            }
        }
    }
}

/// `[lower, upper]` with `upper - lower` equal to the mass in the absorbing state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityBound {
    pub lower: f64,
    pub upper: f64,
    pub absorbing_mass: f64,
}

impl ProbabilityBound {
    pub fn epsilon(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }

    /// Bound on the complementary event.
    pub fn complement(&self) -> ProbabilityBound {
        ProbabilityBound {
            lower: 1.0 - self.upper,
            upper: 1.0 - self.lower,
            absorbing_mass: self.absorbing_mass,
        }
    }
}

/// Uniformized DTMC `P = I + Q / rate` stored row-wise.
struct Uniformized<'a> {
    matrix: &'a RateMatrix,
    rate: f64,
    stay: Vec<f64>,
}

impl<'a> Uniformized<'a> {
    fn new(matrix: &'a RateMatrix) -> Self {
        let rate = UNIFORMIZATION_FACTOR * matrix.max_exit_rate();
        let stay = matrix.exit_rates.iter().map(|e| 1.0 - e / rate).collect();
        Uniformized { matrix, rate, stay }
    }

    /// `out = v P`.
    fn step(&self, v: &[f64], out: &mut [f64]) {
        for ((o, &x), &s) in out.iter_mut().zip(v).zip(&self.stay) {
            *o = x * s;
        }
        let m = self.matrix;
        let inv = 1.0 / self.rate;
        for (i, &x) in v.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let scaled = x * inv;
            for k in m.offsets[i]..m.offsets[i + 1] {
                out[m.cols[k]] += scaled * m.rates[k];
            }
        }
    }
}

fn check_tolerance(tolerance: f64) -> Result<(), CtmcError> {
    if tolerance > 0.0 && tolerance < 1.0 {
        Ok(())
    } else {
        Err(CtmcError::InvalidTolerance(tolerance))
    }
}

/// `pi(t0 + t)` from `pi(t0)` by uniformization. The Poisson window drops
/// less than `tolerance` of the mass and the result is not renormalized.
pub fn transient_distribution(
    matrix: &RateMatrix,
    initial: &Distribution,
    t: f64,
    tolerance: f64,
) -> Result<Distribution, CtmcError> {
    if !(t >= 0.0) {
        return Err(CtmcError::NegativeTime(t));
    }
    check_tolerance(tolerance)?;
    if initial.len() != matrix.dimension() {
        return Err(CtmcError::DimensionMismatch {
            expected: matrix.dimension(),
            got: initial.len(),
        });
    }
    let time = initial.time + t;
    let max_exit = matrix.max_exit_rate();
    if t == 0.0 || max_exit == 0.0 {
        return Ok(Distribution {
            probabilities: initial.probabilities.clone(),
            time,
        });
    }
    let dtmc = Uniformized::new(matrix);
    let weights = PoissonWeights::new(dtmc.rate * t, tolerance);
    let n = matrix.dimension();
    let mut v = initial.probabilities.clone();
    let mut next = vec![0.0; n];
    let mut acc = vec![0.0; n];
    let mut included = 0.0;
    for k in 0..=weights.right() {
        if k >= weights.left() {
            let w = weights.weight(k);
            included += w;
            for (a, &x) in acc.iter_mut().zip(&v) {
                *a += w * x;
            }
        }
        if k < weights.right() {
            dtmc.step(&v, &mut next);
            if next == v {
                // Every later power equals this one, so the rest of the
                // Poisson series collapses to a single term.
                let rest = 1.0 - included;
                for (a, &x) in acc.iter_mut().zip(&v) {
                    *a += rest * x;
                }
                break;
            }
            std::mem::swap(&mut v, &mut next);
        }
    }
    Ok(Distribution {
        probabilities: acc,
        time,
    })
}

/// Distributions at each of `times` (non-decreasing, measured from the
/// initial distribution), stepping from one time point to the next. The
/// tolerance is split evenly so total truncation loss stays below it.
pub fn transient_series(
    matrix: &RateMatrix,
    initial: &Distribution,
    times: &[f64],
    tolerance: f64,
) -> Result<Vec<Distribution>, CtmcError> {
    check_tolerance(tolerance)?;
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(CtmcError::UnsortedTimes);
    }
    let per_step = tolerance / times.len().max(1) as f64;
    let mut out: Vec<Distribution> = Vec::with_capacity(times.len());
    let mut elapsed = 0.0;
    let mut current = initial.clone();
    for &t in times {
        if t < 0.0 {
            return Err(CtmcError::NegativeTime(t));
        }
        current = transient_distribution(matrix, &current, t - elapsed, per_step)?;
        current.time = initial.time + t;
        elapsed = t;
        out.push(current.clone());
    }
    Ok(out)
}

/// `l` is the mass on goal states; `u` adds the absorbing-state mass.
pub fn probability_bound(
    distribution: &Distribution,
    goal: &[usize],
    absorbing: usize,
) -> Result<ProbabilityBound, CtmcError> {
    let len = distribution.len();
    if absorbing >= len {
        return Err(CtmcError::IndexOutOfRange {
            index: absorbing,
            len,
        });
    }
    let mut lower = 0.0;
    for &g in goal {
        if g == absorbing {
            return Err(CtmcError::AbsorbingInGoal);
        }
        lower += *distribution
            .probabilities
            .get(g)
            .ok_or(CtmcError::IndexOutOfRange { index: g, len })?;
    }
    let absorbing_mass = distribution.probabilities[absorbing];
    Ok(ProbabilityBound {
        lower,
        upper: lower + absorbing_mass,
        absorbing_mass,
    })
}
