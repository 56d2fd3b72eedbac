//! HetNet base-station best responses.

use crate::error::{Error, Result};
use crate::num::{pos, Scalar};
use crate::rates::{Network, PowerProfile};

use super::{waterfill, SolverOptions};

/// Nash best response of BS `bs`: water-filling over
/// `c_ik = |h_ik|^2 d_ik^-alpha / (sigma^2 + interference from everyone else)`.
pub fn nash_bs_best_response<T: Scalar>(
    net: &Network<T>,
    bs: usize,
    p: &PowerProfile<T>,
) -> Vec<T> {
    let c: Vec<T> = (0..net.n_subcarriers())
        .map(|k| net.direct_gain(bs, k) / (net.noise() + net.bs_interference(p, bs, k)))
        .collect();
    waterfill(&c, net.p_max()[bs])
}

/// `(W/L) sum_k log2(1 + c_k p_k / (I_k + D_k p_k))`.
pub fn bs_ch_objective<T: Scalar>(c: &[T], d: &[T], i_prev: &[T], p: &[T], w_over_l: T) -> T {
    (0..c.len()).fold(T::zero(), |acc, k| {
        acc + (c[k] * p[k] / (i_prev[k] + d[k] * p[k])).ln_1p()
    }) * w_over_l
        / T::LN_2()
}

/// Derivative of one term, `(W / (L ln 2)) c I / ((I + D p)(I + (c + D) p))`.
fn marginal<T: Scalar>(c: T, d: T, i: T, p: T, omega: T) -> T {
    omega * c * i / ((i + d * p) * (i + (c + d) * p))
}

/// Power solving `marginal(p) = omega / lambda`, i.e. the positive root of
/// `(I + D p)(I + (c + D) p) = c I lambda`, or zero when the marginal at zero
/// is already below the level.
fn power_at<T: Scalar>(c: T, d: T, i: T, lambda: T) -> T {
    let excess = c * lambda - i;
    if excess <= T::zero() {
        return T::zero();
    }
    let b = c + T::of(2.0) * d;
    let disc = b * b + T::of(4.0) * d * (c + d) * excess / i;
    T::of(2.0) * excess / (b + disc.sqrt())
}

/// Cognitive-hierarchy best response of a BS: maximize
/// `sum_k log2(1 + c_k p_k / (I_k + D_k p_k))` on `sum_k p_k = p_max`.
///
/// Each per-subcarrier stationarity condition is solved in closed form for a
/// given multiplier and the multiplier is bisected until the budget closes.
pub fn bs_ch_best_response<T: Scalar>(
    c: &[T],
    d: &[T],
    i_prev: &[T],
    p_max: T,
    opts: &SolverOptions<T>,
) -> Result<Vec<T>> {
    let l = c.len();
    assert!(l > 0 && d.len() == l && i_prev.len() == l);
    assert!(p_max > T::zero());
    if l == 1 {
        return Ok(vec![p_max]);
    }
    let total = |lambda: T| {
        (0..l).fold(T::zero(), |acc, k| {
            acc + power_at(c[k], d[k], i_prev[k], lambda)
        })
    };
    // lambda = water level in units of I/c; nothing flows below the smallest I/c
    let mut lo = (0..l).map(|k| i_prev[k] / c[k]).fold(T::infinity(), T::min);
    let mut hi = lo.max(T::min_positive_value()) * T::of(2.0) + p_max;
    let mut grow = 0;
    while total(hi) < p_max {
        hi *= T::of(2.0);
        grow += 1;
        if grow > 4000 || !hi.is_finite() {
            return Err(Error::NoConvergence {
                solver: "bs_ch_best_response",
                iterations: grow,
                residual: f64::INFINITY,
                best: vec![],
            });
        }
    }
    let mut iters = 0;
    while iters < opts.max_iters {
        let mid = (lo + hi) / T::of(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) < p_max {
            lo = mid;
        } else {
            hi = mid;
        }
        iters += 1;
    }
    let lambda = (lo + hi) / T::of(2.0);
    let mut p: Vec<T> = (0..l)
        .map(|k| power_at(c[k], d[k], i_prev[k], lambda))
        .collect();
    let s = p.iter().fold(T::zero(), |a, &b| a + b);
    if !(s > T::zero()) || ((s - p_max) / p_max).abs() > opts.tol_step {
        return Err(Error::NoConvergence {
            solver: "bs_ch_best_response",
            iterations: iters,
            residual: ((s - p_max) / p_max).abs().as_f64(),
            best: p.iter().map(|x| x.as_f64()).collect(),
        });
    }
    p.iter_mut().for_each(|x| *x = pos(*x * p_max / s));
    let residual = bs_ch_kkt_residual(c, d, i_prev, &p);
    if residual > opts.tol_kkt {
        return Err(Error::NoConvergence {
            solver: "bs_ch_best_response",
            iterations: iters,
            residual: residual.as_f64(),
            best: p.iter().map(|x| x.as_f64()).collect(),
        });
    }
    Ok(p)
}

/// Largest relative spread of the per-subcarrier marginals over powered
/// subcarriers, and excess marginal on idle ones.
pub fn bs_ch_kkt_residual<T: Scalar>(c: &[T], d: &[T], i_prev: &[T], p: &[T]) -> T {
    let l = c.len();
    let marg: Vec<T> = (0..l)
        .map(|k| marginal(c[k], d[k], i_prev[k], p[k], T::one()))
        .collect();
    let active: Vec<usize> = (0..l).filter(|&k| p[k] > T::zero()).collect();
    if active.is_empty() {
        return T::infinity();
    }
    let mu = active.iter().fold(T::zero(), |a, &k| a + marg[k]) / T::of_usize(active.len());
    (0..l).fold(T::zero(), |r, k| {
        let dev = if p[k] > T::zero() {
            (marg[k] - mu).abs()
        } else {
            pos(marg[k] - mu)
        };
        r.max(dev / mu)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{waterfill, waterfill_objective};

    struct Lcg(u64);
    impl Lcg {
        fn next(&mut self) -> f64 {
            self.0 = self
                .0
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((self.0 >> 11) as f64) / (1u64 << 53) as f64
        }
    }

    #[test]
    fn root_solves_stationarity() {
        let mut g = Lcg(9);
        for _ in 0..200 {
            let (c, d, i) = (g.next() * 3.0, g.next() * 2.0, 0.1 + g.next());
            let lambda = i / c * (1.0 + 5.0 * g.next());
            let p = power_at(c, d, i, lambda);
            let lhs = (i + d * p) * (i + (c + d) * p);
            assert!((lhs - c * i * lambda).abs() <= 1e-12 * lhs);
        }
    }

    #[test]
    fn no_belief_term_is_waterfilling() {
        let mut g = Lcg(1);
        for _ in 0..50 {
            let l = 1 + (g.next() * 6.0) as usize;
            let c: Vec<f64> = (0..l).map(|_| 1e-6 * (0.01 + g.next())).collect();
            let ip: Vec<f64> = (0..l).map(|_| 1e-12 * (1.0 + 50.0 * g.next())).collect();
            let p = bs_ch_best_response(&c, &vec![0.0; l], &ip, 0.5, &SolverOptions::default())
                .unwrap();
            let gains: Vec<f64> = c.iter().zip(&ip).map(|(c, i)| c / i).collect();
            let wf = waterfill(&gains, 0.5);
            for (a, b) in p.iter().zip(&wf) {
                assert!((a - b).abs() <= 1e-10, "{p:?} vs {wf:?}");
            }
        }
    }

    #[test]
    fn one_subcarrier_takes_full_budget() {
        let p =
            bs_ch_best_response(&[1.0], &[0.3], &[1.0], 2.0, &SolverOptions::default()).unwrap();
        assert_eq!(p, vec![2.0]);
    }

    #[test]
    fn two_subcarriers_beat_fine_grid() {
        let mut g = Lcg(44);
        for _ in 0..20 {
            let c = [g.next() + 0.05, g.next() + 0.05];
            let d = [2.0 * g.next(), 2.0 * g.next()];
            let ip = [0.1 + g.next(), 0.1 + g.next()];
            let pm = 1.5;
            let p = bs_ch_best_response(&c, &d, &ip, pm, &SolverOptions::default()).unwrap();
            let best = bs_ch_objective(&c, &d, &ip, &p, 1.0);
            let mut grid = f64::NEG_INFINITY;
            for n in 0..=100_000 {
                let x = pm * n as f64 * 1e-5;
                grid = grid.max(bs_ch_objective(&c, &d, &ip, &[x, pm - x], 1.0));
            }
            assert!(grid <= best + 1e-6, "{grid} > {best}");
        }
    }

    #[test]
    fn kkt_holds_on_random_instances() {
        let mut g = Lcg(12);
        for _ in 0..100 {
            let l = 4;
            let c: Vec<f64> = (0..l).map(|_| 1e-3 * g.next().powi(2) + 1e-9).collect();
            let d: Vec<f64> = (0..l).map(|_| 1e-4 * g.next()).collect();
            let ip: Vec<f64> = (0..l).map(|_| 1e-12 + 1e-8 * g.next()).collect();
            let p = bs_ch_best_response(&c, &d, &ip, 0.1, &SolverOptions::default()).unwrap();
            assert!((p.iter().sum::<f64>() - 0.1).abs() <= 1e-9 * 0.1);
            assert!(bs_ch_kkt_residual(&c, &d, &ip, &p) <= 1e-8);
        }
    }

    #[test]
    fn waterfill_objective_agrees_with_ch_objective_without_belief() {
        let c = [2.0_f64, 1.0];
        let ip = [1.0, 1.0];
        let p = [0.75, 0.25];
        let a = bs_ch_objective(&c, &[0.0, 0.0], &ip, &p, 3.0);
        let b = waterfill_objective(&c, &p, 3.0);
        assert!((a - b).abs() < 1e-15);
    }
}
