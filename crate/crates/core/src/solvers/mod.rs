//! Constrained concave maximizers used by the best responses.
//!
//! Every solver returns a point on the equality budget `sum_k p_k = P_max`.

mod bs;
mod cu;
mod simplex;
mod waterfill;

pub use bs::{bs_ch_best_response, bs_ch_kkt_residual, bs_ch_objective, nash_bs_best_response};
pub use cu::{cu_best_response, cu_gradient, cu_kkt_residual, cu_objective, CuSolution};
pub use simplex::simplex_project;
pub use waterfill::{waterfill, waterfill_kkt_residual, waterfill_objective};

use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    /// Relative stationarity tolerance.
    pub tol_kkt: T,
    /// Relative tolerance on budget closure.
    pub tol_step: T,
    pub max_iters: usize,
    /// Interior guard for the CU problem, as a fraction of each RRH budget.
    pub p_floor: T,
    pub armijo_c: T,
    pub backtrack_beta: T,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol_kkt: T::of(1e-8),
            tol_step: T::of(1e-10),
            max_iters: 10_000,
            p_floor: T::of(1e-12),
            armijo_c: T::of(1e-4),
            backtrack_beta: T::of(0.5),
        }
    }
}

/// Truncated-Poisson shares `g_m(0..=m)` a level-`m` player assigns to each level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelWeights<T> {
    pub m: usize,
    g: Vec<T>,
}

impl<T: Scalar> LevelWeights<T> {
    /// Wraps explicit shares; panics unless they are nonnegative and sum to one.
    pub fn from_raw(m: usize, g: Vec<T>) -> Self {
        assert_eq!(g.len(), m + 1);
        assert!(g.iter().all(|&x| x >= T::zero()));
        let s = g.iter().fold(T::zero(), |a, &b| a + b);
        assert!((s - T::one()).abs() <= T::of(1e-12), "weights sum to {s}");
        Self { m, g }
    }

    #[inline]
    pub fn g(&self, h: usize) -> T {
        self.g[h]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.g
    }
}

/// `g_m(h) = f(h) / sum_{i<=m} f(i)` with `f` the Poisson(`tau`) pmf.
pub fn poisson_level_weights<T: Scalar>(tau: T, m: usize) -> LevelWeights<T> {
    assert!(tau > T::zero(), "tau must be positive");
    // e^-tau cancels in the ratio
    let mut f = Vec::with_capacity(m + 1);
    let mut term = T::one();
    f.push(term);
    for h in 1..=m {
        term = term * tau / T::of_usize(h);
        f.push(term);
    }
    let total = f.iter().fold(T::zero(), |a, &b| a + b);
    LevelWeights {
        m,
        g: f.into_iter().map(|x| x / total).collect(),
    }
}
