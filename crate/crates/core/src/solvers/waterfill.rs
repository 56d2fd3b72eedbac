use crate::num::{pos, Scalar};

/// `(W/L) sum_k log2(1 + c_k p_k)`.
pub fn waterfill_objective<T: Scalar>(c: &[T], p: &[T], w_over_l: T) -> T {
    c.iter()
        .zip(p)
        .fold(T::zero(), |acc, (&ck, &pk)| acc + (ck * pk).ln_1p())
        * w_over_l
        / T::LN_2()
}

/// Water-filling over gains `c`: `p_k = (nu - 1/c_k)^+` with the water level
/// `nu` found by bisection so that `sum_k p_k = p_max`.
///
/// After the bisection has isolated the active set, the level is closed exactly
/// on it, so the budget holds to rounding.
pub fn waterfill<T: Scalar>(c: &[T], p_max: T) -> Vec<T> {
    assert!(!c.is_empty());
    assert!(p_max > T::zero());
    debug_assert!(c.iter().all(|&x| x > T::zero()));
    let inv: Vec<T> = c.iter().map(|&x| x.recip()).collect();
    let filled = |nu: T| inv.iter().fold(T::zero(), |acc, &i| acc + pos(nu - i));

    let mut lo = inv.iter().copied().fold(T::infinity(), T::min);
    let mut hi = inv.iter().copied().fold(T::neg_infinity(), T::max) + p_max;
    for _ in 0..2000 {
        let mid = (lo + hi) / T::of(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if filled(mid) < p_max {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu = (lo + hi) / T::of(2.0);

    let mut active: Vec<usize> = (0..c.len()).filter(|&k| inv[k] < nu).collect();
    if active.is_empty() {
        // nu sits on the smallest 1/c_k; that bin alone takes the budget
        let k = (0..c.len())
            .min_by(|&a, &b| inv[a].partial_cmp(&inv[b]).unwrap())
            .unwrap();
        active.push(k);
    }
    loop {
        let n = T::of_usize(active.len());
        let level = (p_max + active.iter().fold(T::zero(), |a, &k| a + inv[k])) / n;
        let before = active.len();
        active.retain(|&k| inv[k] < level);
        if active.len() == before {
            let mut p = vec![T::zero(); c.len()];
            for &k in &active {
                p[k] = level - inv[k];
            }
            return p;
        }
    }
}

/// Largest relative violation of the water-filling KKT conditions:
/// `c_k / (1 + c_k p_k)` equal across active bins and no larger on idle ones.
pub fn waterfill_kkt_residual<T: Scalar>(c: &[T], p: &[T]) -> T {
    let marg: Vec<T> = c
        .iter()
        .zip(p)
        .map(|(&ck, &pk)| ck / (T::one() + ck * pk))
        .collect();
    let active: Vec<usize> = (0..c.len()).filter(|&k| p[k] > T::zero()).collect();
    if active.is_empty() {
        return T::infinity();
    }
    let mu = active.iter().fold(T::zero(), |a, &k| a + marg[k]) / T::of_usize(active.len());
    let mut r = T::zero();
    for k in 0..c.len() {
        let dev = if p[k] > T::zero() {
            (marg[k] - mu).abs()
        } else {
            pos(marg[k] - mu)
        };
        r = r.max(dev / mu);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bin_takes_everything() {
        assert_eq!(waterfill(&[3.7_f64], 2.5), vec![2.5]);
    }

    #[test]
    fn flat_gains_split_evenly() {
        let p = waterfill(&[2.0_f64; 5], 1.0);
        for x in p {
            assert!((x - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn two_bin_example_and_grid_check() {
        let c = [2.0_f64, 1.0];
        let p = waterfill(&c, 1.0);
        assert!((p[0] - 0.75).abs() < 1e-15 && (p[1] - 0.25).abs() < 1e-15);
        let best = waterfill_objective(&c, &p, 1.0);
        let mut grid_best = f64::NEG_INFINITY;
        for i in 0..=10_000 {
            let x = i as f64 * 1e-4;
            grid_best = grid_best.max(waterfill_objective(&c, &[x, 1.0 - x], 1.0));
        }
        assert!(grid_best <= best + 1e-6);
        assert!(waterfill_kkt_residual(&c, &p) < 1e-12);
    }

    #[test]
    fn weak_bins_stay_dry() {
        let p = waterfill(&[100.0_f64, 1e-3, 50.0], 0.1);
        assert_eq!(p[1], 0.0);
        assert!((p.iter().sum::<f64>() - 0.1).abs() < 1e-16);
        assert!(waterfill_kkt_residual(&[100.0, 1e-3, 50.0], &p) < 1e-12);
    }

    #[test]
    fn extreme_dynamic_range() {
        let c = [1e10_f64, 3e9, 1e2, 4e-3];
        let p = waterfill(&c, 0.1);
        let s: f64 = p.iter().sum();
        assert!((s - 0.1).abs() <= 1e-15);
        assert!(waterfill_kkt_residual(&c, &p) < 1e-8);
    }
}
