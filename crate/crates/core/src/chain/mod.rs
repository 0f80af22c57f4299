//! Exact h-potentials for finite Markov chains.
//!
//! With a known transition matrix the expected potential increase over a
//! horizon of `N` steps is linear in `h`, so both regularized objectives have
//! closed-form or linear-system optima.

mod file;
pub mod templates;

pub use file::{parse_chain_file, read_chain_file, ChainFile};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Row sums and the initial distribution must hit 1 within this tolerance.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Relative singular value cutoff for the min-norm pseudo-solution.
pub const RANK_CUTOFF: f64 = 1e-10;

/// A finite Markov chain: row-stochastic transitions, an initial distribution
/// and the horizon `N` (number of transitions).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    transition: DMatrix<f64>,
    initial: DVector<f64>,
    horizon: usize,
}

impl ChainSpec {
    pub fn new(transition: DMatrix<f64>, initial: DVector<f64>, horizon: usize) -> Result<Self> {
        let n = transition.nrows();
        if n == 0 {
            return Err(Error::InvalidChain("chain needs at least one state".into()));
        }
        if transition.ncols() != n {
            return Err(Error::InvalidChain(format!(
                "transition matrix is {}x{}, expected square",
                n,
                transition.ncols()
            )));
        }
        if initial.len() != n {
            return Err(Error::InvalidChain(format!(
                "initial vector has {} entries, expected {n}",
                initial.len()
            )));
        }
        if horizon == 0 {
            return Err(Error::InvalidChain("horizon must be positive".into()));
        }
        for (i, row) in transition.row_iter().enumerate() {
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidChain(format!(
                    "row {} has entry {v} outside [0, 1]",
                    i + 1
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidChain(format!("row {} sums to {}", i + 1, round_sum(sum))));
            }
        }
        if let Some(v) = initial.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidChain(format!(
                "initial entry {v} outside [0, 1]"
            )));
        }
        let sum = initial.sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidChain(format!("initial sums to {}", round_sum(sum))));
        }
        Ok(Self {
            transition,
            initial,
            horizon,
        })
    }

    /// Convenience constructor from row-major slices.
    pub fn from_rows(rows: &[&[f64]], initial: &[f64], horizon: usize) -> Result<Self> {
        let n = rows.len();
        let mut t = DMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidChain(format!(
                    "row {} has {} entries, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                t[(i, j)] = v;
            }
        }
        Self::new(t, DVector::from_column_slice(initial), horizon)
    }

    pub fn n(&self) -> usize {
        self.transition.nrows()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.initial
    }

    pub fn with_horizon(mut self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidChain("horizon must be positive".into()));
        }
        self.horizon = horizon;
        Ok(self)
    }

    /// One step of `p ← p T` for a row vector `p`.
    fn advance(&self, p: &DVector<f64>) -> DVector<f64> {
        self.transition.tr_mul(p)
    }

    /// Distributions `p^0, …, p^N`.
    pub fn marginals(&self) -> Vec<DVector<f64>> {
        let mut out = Vec::with_capacity(self.horizon + 1);
        out.push(self.initial.clone());
        for t in 0..self.horizon {
            let next = self.advance(&out[t]);
            out.push(next);
        }
        out
    }

    /// `p^0 T^N − p^0`, the net flow of probability over the horizon.
    pub fn net_flow(&self) -> DVector<f64> {
        propagate(self, self.horizon) - &self.initial
    }
}

/// Regularizer selection for the discrete objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainRegularizer {
    /// `−λ/(2N) ‖h‖²`
    L2,
    /// `−λ/(2N) Σ_t (p^t (T − I) h)² − λω/(2N) ‖h‖²`
    Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub lambda: f64,
    pub omega: f64,
}

impl SolverParams {
    pub fn new(lambda: f64, omega: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidChain(format!(
                "lambda must be strictly positive, got {lambda}"
            )));
        }
        if !(omega >= 0.0) {
            return Err(Error::InvalidChain(format!(
                "omega must be non-negative, got {omega}"
            )));
        }
        Ok(Self { lambda, omega })
    }
}

/// `p^t = p^0 T^t`, by repeated vector-matrix products.
pub fn propagate(chain: &ChainSpec, t: usize) -> DVector<f64> {
    let mut p = chain.initial.clone();
    for _ in 0..t {
        p = chain.advance(&p);
    }
    p
}

/// Optimum under the L2 regularizer: `(p^0 T^N − p^0) / λ`.
pub fn solve_l2(chain: &ChainSpec, params: SolverParams) -> DVector<f64> {
    chain.net_flow() / params.lambda
}

/// The increments `v_t = p^0 (T^{t+1} − T^t)` for `t = 0..N`.
pub fn increments(chain: &ChainSpec) -> Vec<DVector<f64>> {
    chain
        .marginals()
        .windows(2)
        .map(|w| &w[1] - &w[0])
        .collect()
}

/// System matrix `Σ_t v_t v_tᵀ + ωI` of the trajectory-regularized optimum.
pub fn trajectory_system(chain: &ChainSpec, omega: f64) -> DMatrix<f64> {
    let n = chain.n();
    let mut a = DMatrix::identity(n, n) * omega;
    for v in increments(chain) {
        a.ger(1.0, &v, &v, 1.0);
    }
    a
}

/// Optimum under the trajectory regularizer.
///
/// Solves `(Σ_t v_t v_tᵀ + ωI) h = (p^0 T^N − p^0) / λ`. Singular systems
/// (always the case at `ω = 0`, since constant shifts of `h` are free) get
/// the minimum-norm least-squares solution.
pub fn solve_traj_reg(chain: &ChainSpec, params: SolverParams) -> DVector<f64> {
    let a = trajectory_system(chain, params.omega);
    let rhs = chain.net_flow() / params.lambda;
    min_norm_solve(a, &rhs)
}

/// Minimum-norm least-squares solution of `a x = b` with a relative rank
/// cutoff of [`RANK_CUTOFF`].
pub fn min_norm_solve(a: DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return DVector::zeros(b.len());
    }
    svd.solve(b, RANK_CUTOFF * smax)
        .expect("both singular vector sets were requested")
}

/// Per-step expected increments `p^t T h − p^t·h`, computed term by term.
pub fn expected_increments(chain: &ChainSpec, h: &DVector<f64>) -> Vec<f64> {
    increments(chain).iter().map(|v| v.dot(h)).collect()
}

/// Value of the regularized objective at `h`.
pub fn objective_value(
    chain: &ChainSpec,
    h: &DVector<f64>,
    params: SolverParams,
    reg: ChainRegularizer,
) -> Result<f64> {
    if h.len() != chain.n() {
        return Err(Error::Dimension {
            expected: chain.n(),
            got: h.len(),
        });
    }
    let n_steps = chain.horizon() as f64;
    let steps = expected_increments(chain, h);
    let gain = steps.iter().sum::<f64>() / n_steps;
    let norm2 = h.norm_squared();
    let penalty = match reg {
        ChainRegularizer::L2 => params.lambda / (2.0 * n_steps) * norm2,
        ChainRegularizer::Trajectory => {
            let sq: f64 = steps.iter().map(|j| j * j).sum();
            params.lambda / (2.0 * n_steps) * (sq + params.omega * norm2)
        }
    };
    Ok(gain - penalty)
}

/// Row sums for error messages, without float noise in the last digits.
pub(crate) fn round_sum(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}
