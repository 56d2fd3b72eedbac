//! The control unit's joint RRH power problem.
//!
//! With HetNet interference frozen at `e_k`, the CU maximizes
//!
//! ```text
//! F(p) = (W/L) sum_k log2(1 + S_k^2 / e_k),   S_k = sum_i a_ik sqrt(p_ik)
//! ```
//!
//! over the product of per-RRH simplices `sum_k p_ik = P_i`, where
//! `a_ik = |h_ik| d_ik^(-alpha/2)`. `F` is concave (the cross terms
//! `sqrt(p_ik p_jk)` are geometric means) but its gradient blows up as
//! `p_ik -> 0`, which leaves primal gradient methods badly conditioned. The
//! solver therefore works on the dual, and KKT conditions are only checked at
//! coordinates above the floor.

use crate::error::{Error, Result};
use crate::num::{pos, Scalar};

use super::SolverOptions;

#[derive(Debug, Clone, PartialEq)]
pub struct CuSolution<T> {
    /// Powers `[rrh][k]`.
    pub p: Vec<T>,
    pub objective: T,
    pub iterations: usize,
    /// KKT residual of the returned powers, see [`cu_kkt_residual`].
    pub residual: T,
}

fn amplitudes<T: Scalar>(amps: &[T], p: &[T], l: usize) -> Vec<T> {
    let mut s = vec![T::zero(); l];
    for (idx, (&a, &x)) in amps.iter().zip(p).enumerate() {
        s[idx % l] += a * x.sqrt();
    }
    s
}

pub fn cu_objective<T: Scalar>(amps: &[T], e: &[T], p: &[T], w_over_l: T) -> T {
    let l = e.len();
    amplitudes(amps, p, l)
        .iter()
        .zip(e)
        .fold(T::zero(), |acc, (&s, &ek)| acc + (s * s / ek).ln_1p())
        * w_over_l
        / T::LN_2()
}

/// `dF/dp_ik = (W / (L ln 2)) a_ik S_k / (sqrt(p_ik) (e_k + S_k^2))`.
///
/// Expanding `S_k` gives the stationarity numerator
/// `a_ik^2 + (a_ik / sqrt(p_ik)) sum_{l != i} a_lk sqrt(p_lk)`; coordinates at
/// zero power with a nonzero coherent sum get `+inf`.
pub fn cu_gradient<T: Scalar>(amps: &[T], e: &[T], p: &[T], w_over_l: T) -> Vec<T> {
    let l = e.len();
    let s = amplitudes(amps, p, l);
    let omega = w_over_l / T::LN_2();
    amps.iter()
        .zip(p)
        .enumerate()
        .map(|(idx, (&a, &x))| {
            let k = idx % l;
            let denom = e[k] + s[k] * s[k];
            if x > T::zero() {
                omega * a * s[k] / (x.sqrt() * denom)
            } else if s[k] > T::zero() && a > T::zero() {
                T::infinity()
            } else {
                // S_k = a sqrt(p) locally, so the derivative tends to a^2 / e_k
                omega * a * a / denom
            }
        })
        .collect()
}

/// Per-subcarrier maximizer of the Lagrangian for RRH multipliers `lambda`.
///
/// For fixed `S_k` the cheapest split is `sqrt(p_ik) ∝ a_ik / lambda_i`, which
/// leaves a scalar problem in `S_k^2` with solution `(omega A_k - e_k)^+`,
/// `A_k = sum_i a_ik^2 / lambda_i`.
struct Dual<'a, T> {
    amps: &'a [T],
    e: &'a [T],
    p_max: &'a [T],
    omega: T,
    l: usize,
    live: Vec<bool>,
}

struct DualPoint<T> {
    a_sum: Vec<T>,
    s: Vec<T>,
    p: Vec<T>,
}

impl<T: Scalar> Dual<'_, T> {
    fn n(&self) -> usize {
        self.p_max.len()
    }

    fn eval(&self, lambda: &[T]) -> DualPoint<T> {
        let (n, l) = (self.n(), self.l);
        let mut a_sum = vec![T::zero(); l];
        for i in (0..n).filter(|&i| self.live[i]) {
            for k in 0..l {
                let a = self.amps[i * l + k];
                a_sum[k] += a * a / lambda[i];
            }
        }
        let s: Vec<T> = (0..l)
            .map(|k| pos(self.omega * a_sum[k] - self.e[k]))
            .collect();
        let mut p = vec![T::zero(); n * l];
        for i in (0..n).filter(|&i| self.live[i]) {
            for k in (0..l).filter(|&k| s[k] > T::zero()) {
                let a = self.amps[i * l + k];
                let r = a / (lambda[i] * a_sum[k]);
                p[i * l + k] = s[k] * r * r;
            }
        }
        DualPoint { a_sum, s, p }
    }

    /// Dual objective up to a constant; convex in `lambda`.
    fn value(&self, lambda: &[T], pt: &DualPoint<T>) -> T {
        let mut v = T::zero();
        for k in 0..self.l {
            if pt.s[k] > T::zero() {
                v += self.omega * (pt.s[k] / self.e[k]).ln_1p() - pt.s[k] / pt.a_sum[k];
            }
        }
        for i in (0..self.n()).filter(|&i| self.live[i]) {
            v += lambda[i] * self.p_max[i];
        }
        v
    }

    /// `sum_k p_ik - P_i`, the negated dual gradient.
    fn excess(&self, pt: &DualPoint<T>) -> Vec<T> {
        let l = self.l;
        (0..self.n())
            .map(|i| {
                if !self.live[i] {
                    return T::zero();
                }
                pt.p[i * l..(i + 1) * l]
                    .iter()
                    .fold(T::zero(), |a, &b| a + b)
                    - self.p_max[i]
            })
            .collect()
    }

    /// Newton direction solving `J d = -excess`, with
    /// `dp_ik/dlambda_j = q_ik (b_jk (2 s_k / A_k - omega) - 2 s_k delta_ij / lambda_i)`,
    /// `q_ik = p_ik / s_k`, `b_jk = a_jk^2 / lambda_j^2`.
    fn newton(&self, lambda: &[T], pt: &DualPoint<T>, excess: &[T]) -> Option<Vec<T>> {
        let (n, l) = (self.n(), self.l);
        let idx: Vec<usize> = (0..n).filter(|&i| self.live[i]).collect();
        let m = idx.len();
        let mut jac = nalgebra::DMatrix::<f64>::zeros(m, m);
        for k in (0..l).filter(|&k| pt.s[k] > T::zero()) {
            let s = pt.s[k].as_f64();
            let a_sum = pt.a_sum[k].as_f64();
            let coef = 2.0 * s / a_sum - self.omega.as_f64();
            let b: Vec<f64> = idx
                .iter()
                .map(|&j| {
                    let a = self.amps[j * l + k].as_f64();
                    let lj = lambda[j].as_f64();
                    a * a / (lj * lj)
                })
                .collect();
            for (r, &i) in idx.iter().enumerate() {
                let q = pt.p[i * l + k].as_f64() / s;
                if q == 0.0 {
                    continue;
                }
                for (c, &bj) in b.iter().enumerate() {
                    jac[(r, c)] += q * bj * coef;
                }
                jac[(r, r)] -= 2.0 * q * s / lambda[i].as_f64();
            }
        }
        let rhs = nalgebra::DVector::from_iterator(m, idx.iter().map(|&i| -excess[i].as_f64()));
        let d = jac.lu().solve(&rhs)?;
        if d.iter().any(|x| !x.is_finite()) {
            return None;
        }
        let mut out = vec![T::zero(); n];
        for (r, &i) in idx.iter().enumerate() {
            out[i] = T::of(d[r]);
        }
        Some(out)
    }

    /// Multiplicative fallback `lambda_i <- lambda_i sqrt(sum_k p_ik / P_i)`,
    /// clamped to a factor of four either way.
    fn rescale(&self, lambda: &mut [T], excess: &[T]) {
        let (lo, hi) = (T::of(0.25), T::of(4.0));
        for i in (0..self.n()).filter(|&i| self.live[i]) {
            let ratio = (excess[i] + self.p_max[i]) / self.p_max[i];
            lambda[i] *= ratio.sqrt().max(lo).min(hi);
        }
    }
}

fn max_rel_excess<T: Scalar>(excess: &[T], p_max: &[T]) -> T {
    excess
        .iter()
        .zip(p_max)
        .fold(T::zero(), |r, (&x, &pm)| r.max(x.abs() / pm))
}

/// Largest relative deviation from the stationarity system: the marginal
/// `dF/dp_ik` equals the RRH's multiplier on every coordinate above the floor,
/// and no subcarrier left dark by every RRH would pay to switch on.
pub fn cu_kkt_residual<T: Scalar>(
    amps: &[T],
    e: &[T],
    p: &[T],
    p_max: &[T],
    w_over_l: T,
    floor: T,
) -> T {
    let l = e.len();
    let n = p_max.len();
    let g = cu_gradient(amps, e, p, w_over_l);
    let omega = w_over_l / T::LN_2();
    let s = amplitudes(amps, p, l);
    let mut lambda = vec![T::zero(); n];
    let mut r = T::zero();
    for i in 0..n {
        let row = i * l..(i + 1) * l;
        let total = p[row.clone()].iter().fold(T::zero(), |a, &b| a + b);
        if total <= T::zero() {
            continue;
        }
        lambda[i] = row.clone().fold(T::zero(), |a, j| a + p[j] * g[j]) / total;
        for j in row {
            if p[j] > floor * p_max[i] && lambda[i] > T::zero() {
                r = r.max((g[j] - lambda[i]).abs() / lambda[i]);
            }
        }
    }
    for k in (0..l).filter(|&k| s[k] == T::zero()) {
        let a_sum = (0..n)
            .filter(|&i| lambda[i] > T::zero())
            .fold(T::zero(), |acc, i| {
                acc + amps[i * l + k] * amps[i * l + k] / lambda[i]
            });
        r = r.max(pos(omega * a_sum - e[k]) / e[k]);
    }
    r
}

/// Best response of the CU against frozen interference-plus-noise `e_k`.
///
/// Newton's method on the convex dual over the per-RRH multipliers, with
/// backtracking on the dual objective. The Lagrangian maximizer is in closed
/// form and stationary by construction, so the iteration only has to close the
/// budgets. `amps` is `[rrh][k]`. Powers at or below the floor are set to zero
/// and each row is rescaled onto its budget.
pub fn cu_best_response<T: Scalar>(
    amps: &[T],
    e: &[T],
    p_max: &[T],
    w_over_l: T,
    opts: &SolverOptions<T>,
) -> Result<CuSolution<T>> {
    let l = e.len();
    let n = p_max.len();
    assert!(l > 0 && amps.len() == n * l);
    debug_assert!(e.iter().all(|&x| x > T::zero()));
    let lt = T::of_usize(l);
    let equal: Vec<T> = p_max
        .iter()
        .flat_map(|&pm| std::iter::repeat_n(pm / lt, l))
        .collect();
    let live: Vec<bool> = (0..n)
        .map(|i| amps[i * l..(i + 1) * l].iter().any(|&a| a > T::zero()))
        .collect();
    if l == 1 || !live.iter().any(|&x| x) {
        let objective = cu_objective(amps, e, &equal, w_over_l);
        return Ok(CuSolution {
            p: equal,
            objective,
            iterations: 0,
            residual: T::zero(),
        });
    }

    let dual = Dual {
        amps,
        e,
        p_max,
        omega: w_over_l / T::LN_2(),
        l,
        live,
    };
    // start from the mean marginal at equal power
    let g0 = cu_gradient(amps, e, &equal, w_over_l);
    let mut lambda: Vec<T> = (0..n)
        .map(|i| g0[i * l..(i + 1) * l].iter().fold(T::zero(), |a, &b| a + b) / lt)
        .map(|x| {
            if x > T::zero() && x.is_finite() {
                x
            } else {
                T::one()
            }
        })
        .collect();

    let mut pt = dual.eval(&lambda);
    let mut excess = dual.excess(&pt);
    let mut gap = max_rel_excess(&excess, p_max);
    let mut iterations = 0;
    while gap > opts.tol_step {
        if iterations >= opts.max_iters {
            return Err(Error::NoConvergence {
                solver: "cu_best_response",
                iterations,
                residual: gap.as_f64(),
                best: pt.p.iter().map(|x| x.as_f64()).collect(),
            });
        }
        iterations += 1;
        let value = dual.value(&lambda, &pt);
        let mut next = None;
        if let Some(d) = dual.newton(&lambda, &pt, &excess) {
            // slope of the dual along d is -excess . d
            let slope = -excess
                .iter()
                .zip(&d)
                .fold(T::zero(), |a, (&x, &y)| a + x * y);
            let mut t = T::one();
            for (&li, &di) in lambda.iter().zip(&d) {
                if di < T::zero() {
                    t = t.min(T::of(0.75) * li / -di);
                }
            }
            while slope < T::zero() && t > T::of(1e-12) {
                let cand: Vec<T> = lambda.iter().zip(&d).map(|(&x, &y)| x + t * y).collect();
                let cpt = dual.eval(&cand);
                let cex = dual.excess(&cpt);
                let armijo = dual.value(&cand, &cpt) <= value + opts.armijo_c * t * slope;
                // near the solution the dual values agree to rounding; the
                // budget gap is then the better progress measure
                if armijo || max_rel_excess(&cex, p_max) < gap * T::of(0.5) {
                    next = Some((cand, cpt, cex));
                    break;
                }
                t *= opts.backtrack_beta;
            }
        }
        let (cand, cpt, cex) = next.unwrap_or_else(|| {
            let mut cand = lambda.clone();
            dual.rescale(&mut cand, &excess);
            let cpt = dual.eval(&cand);
            let cex = dual.excess(&cpt);
            (cand, cpt, cex)
        });
        lambda = cand;
        pt = cpt;
        excess = cex;
        gap = max_rel_excess(&excess, p_max);
    }

    let mut p = pt.p;
    for i in 0..n {
        let row = &mut p[i * l..(i + 1) * l];
        if !dual.live[i] {
            row.copy_from_slice(&equal[i * l..(i + 1) * l]);
            continue;
        }
        let floor = opts.p_floor * p_max[i];
        let mut kept = T::zero();
        for x in row.iter_mut() {
            if *x <= floor {
                *x = T::zero();
            } else {
                kept += *x;
            }
        }
        row.iter_mut().for_each(|x| *x = *x * p_max[i] / kept);
    }
    let residual = cu_kkt_residual(amps, e, &p, p_max, w_over_l, opts.p_floor);
    if !(residual <= opts.tol_kkt) {
        return Err(Error::NoConvergence {
            solver: "cu_best_response",
            iterations,
            residual: residual.as_f64(),
            best: p.iter().map(|x| x.as_f64()).collect(),
        });
    }
    let objective = cu_objective(amps, e, &p, w_over_l);
    Ok(CuSolution {
        p,
        objective,
        iterations,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::waterfill;

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
    fn single_rrh_reduces_to_waterfill() {
        let mut g = Lcg(3);
        for _ in 0..20 {
            let l = 4;
            let amps: Vec<f64> = (0..l).map(|_| 1e-4 * (0.1 + g.next())).collect();
            let e: Vec<f64> = (0..l).map(|_| 1e-9 * (0.5 + g.next())).collect();
            let sol = cu_best_response(&amps, &e, &[1.0], 25e6, &SolverOptions::default()).unwrap();
            let c: Vec<f64> = amps.iter().zip(&e).map(|(a, e)| a * a / e).collect();
            let wf = waterfill(&c, 1.0);
            for (a, b) in sol.p.iter().zip(&wf) {
                assert!((a - b).abs() <= 1e-8, "{:?} vs {:?}", sol.p, wf);
            }
        }
    }

    #[test]
    fn one_subcarrier_takes_full_budget() {
        let sol = cu_best_response(
            &[1.0, 2.0],
            &[1.0],
            &[0.7, 1.3],
            1.0,
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.p, vec![0.7, 1.3]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut g = Lcg(17);
        let (n, l) = (3, 4);
        for _ in 0..50 {
            let amps: Vec<f64> = (0..n * l).map(|_| 0.1 + g.next()).collect();
            let e: Vec<f64> = (0..l).map(|_| 0.5 + g.next()).collect();
            let p: Vec<f64> = (0..n * l).map(|_| 0.05 + g.next()).collect();
            let grad = cu_gradient(&amps, &e, &p, 2.0);
            for idx in 0..n * l {
                let h = 1e-6;
                let mut up = p.clone();
                let mut dn = p.clone();
                up[idx] += h;
                dn[idx] -= h;
                let fd = (cu_objective(&amps, &e, &up, 2.0) - cu_objective(&amps, &e, &dn, 2.0))
                    / (2.0 * h);
                assert!((fd - grad[idx]).abs() <= 1e-5 * grad[idx].abs());
            }
        }
    }

    #[test]
    fn output_is_budget_feasible_and_stationary() {
        let mut g = Lcg(5);
        for _ in 0..30 {
            let (n, l) = (4, 4);
            let amps: Vec<f64> = (0..n * l).map(|_| 1e-5 * g.next().powi(3)).collect();
            let e: Vec<f64> = (0..l).map(|_| 1e-12 * (1.0 + 100.0 * g.next())).collect();
            let pm = [1.0, 1.0, 2.0, 0.5];
            let sol = cu_best_response(&amps, &e, &pm, 25e6, &SolverOptions::default()).unwrap();
            for i in 0..n {
                let row = &sol.p[i * l..(i + 1) * l];
                let s: f64 = row.iter().sum();
                assert!((s - pm[i]).abs() <= 1e-9 * pm[i]);
                assert!(row.iter().all(|&x| x >= 0.0));
                // stationarity: equal marginal utility on every powered subcarrier
                let grad = cu_gradient(&amps, &e, &sol.p, 25e6);
                let act: Vec<f64> = (0..l)
                    .filter(|&k| row[k] > 1e-9 * pm[i])
                    .map(|k| grad[i * l + k])
                    .collect();
                let mu = act.iter().sum::<f64>() / act.len() as f64;
                for gk in act {
                    assert!((gk - mu).abs() <= 1e-6 * mu, "{gk} vs {mu}");
                }
            }
        }
    }

    #[test]
    fn dual_jacobian_matches_finite_differences() {
        let mut g = Lcg(23);
        let (n, l) = (3, 5);
        for _ in 0..20 {
            let amps: Vec<f64> = (0..n * l).map(|_| 0.2 + g.next()).collect();
            let e: Vec<f64> = (0..l).map(|_| 0.05 + 0.1 * g.next()).collect();
            let pm = vec![1.0; n];
            let dual = Dual {
                amps: &amps,
                e: &e,
                p_max: &pm,
                omega: 1.0,
                l,
                live: vec![true; n],
            };
            let lambda: Vec<f64> = (0..n).map(|_| 0.5 + g.next()).collect();
            let pt = dual.eval(&lambda);
            let ex = dual.excess(&pt);
            let d = dual.newton(&lambda, &pt, &ex).unwrap();
            // the Newton step predicts the linearized change of the excess
            let h = 1e-7;
            let mut pred = ex.clone();
            for (j, &dj) in d.iter().enumerate() {
                let mut up = lambda.clone();
                let mut dn = lambda.clone();
                up[j] += h;
                dn[j] -= h;
                let eu = dual.excess(&dual.eval(&up));
                let ed = dual.excess(&dual.eval(&dn));
                for i in 0..n {
                    pred[i] += (eu[i] - ed[i]) / (2.0 * h) * dj;
                }
            }
            for x in pred {
                assert!(x.abs() <= 1e-5, "{x}");
            }
        }
    }

    #[test]
    fn two_rrh_two_subcarrier_beats_grid() {
        let mut g = Lcg(31);
        for _ in 0..10 {
            let amps: Vec<f64> = (0..4).map(|_| 0.1 + g.next()).collect();
            let e: Vec<f64> = (0..2).map(|_| 0.05 + g.next()).collect();
            let pm = [1.0, 0.6];
            let sol = cu_best_response(&amps, &e, &pm, 1.0, &SolverOptions::default()).unwrap();
            let mut grid = f64::NEG_INFINITY;
            for u in 0..=400 {
                for v in 0..=400 {
                    let (x, y) = (u as f64 / 400.0, v as f64 / 400.0);
                    let q = [x, 1.0 - x, 0.6 * y, 0.6 * (1.0 - y)];
                    grid = grid.max(cu_objective(&amps, &e, &q, 1.0));
                }
            }
            assert!(
                grid <= sol.objective * (1.0 + 1e-9),
                "{grid} > {}",
                sol.objective
            );
        }
    }

    #[test]
    fn dark_subcarriers_satisfy_switch_on_condition() {
        // subcarrier 1 is useless for both RRHs and must stay off
        let amps = [1.0_f64, 1e-4, 1.0, 1e-4];
        let e = [1.0, 1.0];
        let sol = cu_best_response(&amps, &e, &[1.0, 1.0], 1.0, &SolverOptions::default()).unwrap();
        assert_eq!(sol.p, vec![1.0, 0.0, 1.0, 0.0]);
        assert!(sol.residual <= 1e-8);
    }

    #[test]
    fn paper_sized_instances_converge_quickly() {
        let mut g = Lcg(77);
        for _ in 0..20 {
            let (n, l) = (40, 8);
            let amps: Vec<f64> = (0..n * l)
                .map(|_| 1e-6 * g.next().powi(4) / (0.01 + g.next()))
                .collect();
            let e: Vec<f64> = (0..l).map(|_| 1e-12 * (1.0 + 1e4 * g.next())).collect();
            let pm = vec![1.0; n];
            let sol = cu_best_response(&amps, &e, &pm, 12.5e6, &SolverOptions::default()).unwrap();
            assert!(sol.iterations < 100, "{}", sol.iterations);
        }
    }

    #[test]
    fn f32_solution_tracks_f64() {
        let amps = [0.4_f64, 0.9, 0.2, 0.7, 0.3, 0.5];
        let e = [0.2, 0.3, 0.25];
        let pm = [1.0, 2.0];
        let a = cu_best_response(&amps, &e, &pm, 1.0, &SolverOptions::default()).unwrap();
        let amps32: Vec<f32> = amps.iter().map(|&x| x as f32).collect();
        let e32: Vec<f32> = e.iter().map(|&x| x as f32).collect();
        let opts = SolverOptions::<f32> {
            tol_kkt: 1e-4,
            tol_step: 1e-6,
            ..Default::default()
        };
        let b = cu_best_response(&amps32, &e32, &[1.0, 2.0], 1.0, &opts).unwrap();
        for (x, y) in a.p.iter().zip(&b.p) {
            assert!((x - *y as f64).abs() <= 1e-4, "{x} vs {y}");
        }
    }
}
