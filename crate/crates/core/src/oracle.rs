//! Independent checks of the solvers: exhaustive grids, finite differences,
//! midpoint concavity and equilibrium certificates on random instances.
//!
//! Each suite returns its worst observed metric next to the threshold it is
//! judged against, so callers can print or assert on it.

use std::fmt;

use rand::Rng as _;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::equilibrium::{
    solve_che, solve_ne, verify_che, verify_ne, LevelStrategyTable, NeOptions, PlayerKind,
};
use crate::experiments::realize;
use crate::rates::{Network, Player, PowerProfile};
use crate::scenario::{dbm_to_watts, Scenario};
use crate::seed::{derive_seed, rng, Rng};
use crate::solvers::{
    bs_ch_best_response, bs_ch_objective, cu_best_response, cu_gradient, cu_objective,
    poisson_level_weights, waterfill, waterfill_objective, SolverOptions,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub instances: usize,
    /// Worst value of the suite's metric over all instances.
    pub worst: f64,
    pub threshold: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.worst <= self.threshold
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: worst {:.3e} vs threshold {:.1e} over {} instances",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.threshold,
            self.instances
        )
    }
}

/// Outcome of an equilibrium certificate over many seeds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CertificateReport {
    pub seeds: usize,
    /// Seeds whose certificate met the tolerance.
    pub certified: usize,
    /// Seeds excluded because the dynamics did not settle.
    pub non_converged: usize,
    /// Seeds on which a solver returned an error.
    pub errors: usize,
    /// Largest relative unilateral improvement among the checked seeds.
    pub worst: f64,
}

/// Log-2 sum objective maximized exactly over the lattice
/// `p = p_max * n / steps`, `sum n = steps`, by a max-plus dynamic program.
pub fn waterfill_lattice_max(c: &[f64], p_max: f64, steps: usize) -> f64 {
    let term = |k: usize, n: usize| {
        (c[k] * p_max * n as f64 / steps as f64).ln_1p() / std::f64::consts::LN_2
    };
    let mut best: Vec<f64> = (0..=steps).map(|n| term(0, n)).collect();
    for k in 1..c.len() {
        let f: Vec<f64> = (0..=steps).map(|n| term(k, n)).collect();
        let next: Vec<f64> = (0..=steps)
            .map(|j| {
                (0..=j)
                    .map(|n| best[j - n] + f[n])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        best = next;
    }
    best[steps]
}

/// Best CU objective over the `steps x steps` grid of split fractions for two
/// RRHs on two subcarriers. `amps` is `[rrh][k]`.
pub fn cu_grid_max(amps: &[f64], e: &[f64], p_max: [f64; 2], w_over_l: f64, steps: usize) -> f64 {
    assert!(amps.len() == 4 && e.len() == 2);
    let mut best = f64::NEG_INFINITY;
    let mut p = [0.0; 4];
    for u in 0..=steps {
        let x = u as f64 / steps as f64;
        p[0] = p_max[0] * x;
        p[1] = p_max[0] * (1.0 - x);
        for v in 0..=steps {
            let y = v as f64 / steps as f64;
            p[2] = p_max[1] * y;
            p[3] = p_max[1] * (1.0 - y);
            best = best.max(cu_objective(amps, e, &p, w_over_l));
        }
    }
    best
}

/// Best cognitive-hierarchy BS objective over a 1-D grid of splits, `L = 2`.
pub fn bs_ch_grid_max(c: &[f64], d: &[f64], i_prev: &[f64], p_max: f64, steps: usize) -> f64 {
    (0..=steps)
        .map(|n| {
            let x = p_max * n as f64 / steps as f64;
            bs_ch_objective(c, d, i_prev, &[x, p_max - x], 1.0)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `F(p + h e_idx) - F(p - h e_idx)` for the CU objective, with the difference
/// of logarithms and of square roots taken in closed form so nothing cancels.
fn cu_central_difference(
    amps: &[f64],
    e: &[f64],
    p: &[f64],
    w_over_l: f64,
    idx: usize,
    h: f64,
) -> f64 {
    let l = e.len();
    let k = idx % l;
    // S_k at the lower point and the increment between the two points
    let s_lo: f64 = (0..amps.len() / l)
        .map(|i| {
            let j = i * l + k;
            let x = if j == idx { p[j] - h } else { p[j] };
            amps[j] * x.sqrt()
        })
        .sum();
    let ds = amps[idx] * 2.0 * h / ((p[idx] + h).sqrt() + (p[idx] - h).sqrt());
    w_over_l * (ds * (2.0 * s_lo + ds) / (e[k] + s_lo * s_lo)).ln_1p() / std::f64::consts::LN_2
}

/// Largest relative deviation of the analytic CU gradient from central
/// differences with step `h`.
pub fn gradient_error(amps: &[f64], e: &[f64], p: &[f64], w_over_l: f64, h: f64) -> f64 {
    let g = cu_gradient(amps, e, p, w_over_l);
    (0..p.len())
        .map(|idx| {
            let fd = cu_central_difference(amps, e, p, w_over_l, idx, h) / (2.0 * h);
            (fd - g[idx]).abs() / g[idx].abs()
        })
        .fold(0.0, f64::max)
}

fn gaussian_gain(g: &mut Rng, mean_power: f64) -> f64 {
    let re: f64 = StandardNormal.sample(g);
    let im: f64 = StandardNormal.sample(g);
    (re * re + im * im) * mean_power / 2.0
}

/// Log-uniform draw on `[lo, hi]`.
fn log_uniform(g: &mut Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + (hi.ln() - lo.ln()) * g.random::<f64>()).exp()
}

/// Link budget of a random link: `|h|^2 d^-3` with `d` log-uniform in metres.
fn link_gain(g: &mut Rng) -> f64 {
    gaussian_gain(g, 10.0) * log_uniform(g, 5.0, 2000.0).powi(-3)
}

fn noise() -> f64 {
    dbm_to_watts(-90.8)
}

fn random_budget(g: &mut Rng) -> f64 {
    let dbm = [20.0, 27.0, 30.0, 37.0][g.random_range(0..4)];
    dbm_to_watts(dbm)
}

/// Random interference-plus-noise level, noise to 1000x noise.
fn random_floor(g: &mut Rng) -> f64 {
    noise() * log_uniform(g, 1.0, 1e3)
}

/// Water-filling against the lattice oracle with step `1e-3 p_max`;
/// metric is the oracle's relative excess over water-filling.
pub fn waterfill_suite(instances: usize, seed: u64) -> SuiteReport {
    let mut worst = f64::NEG_INFINITY;
    for n in 0..instances {
        let g = &mut rng(derive_seed(seed, &[n as u64]));
        let l = g.random_range(1..=4);
        let c: Vec<f64> = (0..l).map(|_| link_gain(g) / random_floor(g)).collect();
        let pm = random_budget(g);
        let p = waterfill(&c, pm);
        let ours = waterfill_objective(&c, &p, 1.0);
        let grid = waterfill_lattice_max(&c, pm, 1000);
        worst = worst.max((grid - ours) / ours.abs().max(f64::MIN_POSITIVE));
    }
    SuiteReport {
        name: "water-filling vs lattice oracle",
        instances,
        worst,
        threshold: 1e-6,
    }
}

/// Two RRHs, two subcarriers: CU best response against the 1001 x 1001 grid;
/// metric is the relative objective gap in either direction.
pub fn cu_grid_suite(instances: usize, seed: u64) -> SuiteReport {
    let opts = SolverOptions::default();
    let w_over_l = 50e6;
    let mut worst = f64::NEG_INFINITY;
    for n in 0..instances {
        let g = &mut rng(derive_seed(seed, &[n as u64]));
        let amps: Vec<f64> = (0..4).map(|_| link_gain(g).sqrt()).collect();
        let e: Vec<f64> = (0..2).map(|_| random_floor(g)).collect();
        let pm = [
            dbm_to_watts(30.0),
            dbm_to_watts(30.0 - 10.0 * g.random::<f64>()),
        ];
        let metric = match cu_best_response(&amps, &e, &pm, w_over_l, &opts) {
            Ok(sol) => {
                let grid = cu_grid_max(&amps, &e, pm, w_over_l, 1000);
                (sol.objective - grid).abs() / grid
            }
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(metric);
    }
    SuiteReport {
        name: "CU best response vs 2-D grid",
        instances,
        worst,
        threshold: 1e-4,
    }
}

/// Cognitive-hierarchy BS response on two subcarriers against a 1-D grid with
/// step `1e-5 p_max`; metric is the grid's relative excess.
pub fn bs_ch_grid_suite(instances: usize, seed: u64) -> SuiteReport {
    let opts = SolverOptions::default();
    let mut worst = f64::NEG_INFINITY;
    for n in 0..instances {
        let g = &mut rng(derive_seed(seed, &[n as u64]));
        let c: Vec<f64> = (0..2).map(|_| link_gain(g)).collect();
        let d: Vec<f64> = (0..2).map(|_| link_gain(g) * g.random::<f64>()).collect();
        let ip: Vec<f64> = (0..2).map(|_| random_floor(g)).collect();
        let pm = random_budget(g);
        let metric = match bs_ch_best_response(&c, &d, &ip, pm, &opts) {
            Ok(p) => {
                let ours = bs_ch_objective(&c, &d, &ip, &p, 1.0);
                (bs_ch_grid_max(&c, &d, &ip, pm, 100_000) - ours) / ours
            }
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(metric);
    }
    SuiteReport {
        name: "CH base-station response vs 1-D grid",
        instances,
        worst,
        threshold: 1e-6,
    }
}

/// Analytic CU gradient against central differences (step `1e-6 p_max`) at
/// interior points with every power at least `0.01 p_max`.
pub fn gradient_suite(instances: usize, seed: u64) -> SuiteReport {
    let mut worst = 0.0_f64;
    for n in 0..instances {
        let g = &mut rng(derive_seed(seed, &[n as u64]));
        let (rrhs, l) = (g.random_range(1..=4), g.random_range(1..=4));
        let amps: Vec<f64> = (0..rrhs * l).map(|_| link_gain(g).sqrt()).collect();
        let e: Vec<f64> = (0..l).map(|_| random_floor(g)).collect();
        let pm = dbm_to_watts(30.0);
        let p: Vec<f64> = (0..rrhs * l)
            .map(|_| pm * (0.01 + 0.99 * g.random::<f64>()))
            .collect();
        worst = worst.max(gradient_error(&amps, &e, &p, 25e6, 1e-6 * pm));
    }
    SuiteReport {
        name: "CU gradient vs central differences",
        instances,
        worst,
        threshold: 1e-5,
    }
}

fn random_profile(net: &Network<f64>, g: &mut Rng) -> PowerProfile<f64> {
    let l = net.n_subcarriers();
    let mut p = PowerProfile::zeros(net.n_tx(), l);
    let exp = Exp::new(1.0).expect("unit rate");
    for tx in 0..net.n_tx() {
        let w: Vec<f64> = (0..l).map(|_| exp.sample(g)).collect();
        let s: f64 = w.iter().sum();
        for (k, wk) in w.iter().enumerate() {
            p.set(tx, k, net.p_max()[tx] * wk / s);
        }
    }
    p
}

fn lerp(x: &PowerProfile<f64>, y: &PowerProfile<f64>, t: f64) -> PowerProfile<f64> {
    let mut z = x.clone();
    for tx in 0..x.n_tx() {
        for k in 0..x.n_subcarriers() {
            z.set(tx, k, t * x.get(tx, k) + (1.0 - t) * y.get(tx, k));
        }
    }
    z
}

/// Midpoint concavity of the CRAN rate in the RRH powers and of a BS rate in
/// its own power, on random desk-scale networks. Each instance draws one
/// `(x, y, t)` triple per rate; the metric is the violation in bits/s/Hz.
pub fn concavity_suite(instances: usize, seed: u64) -> SuiteReport {
    let scenario = Scenario::default();
    let mut worst = f64::NEG_INFINITY;
    for n in 0..instances {
        let g = &mut rng(derive_seed(seed, &[n as u64]));
        let net = match realize(&scenario, derive_seed(seed, &[n as u64, 1])) {
            Ok(net) => net,
            Err(_) => {
                worst = f64::INFINITY;
                continue;
            }
        };
        let t = g.random::<f64>();
        let k = g.random_range(0..net.n_subcarriers());

        // CRAN: vary the RRH rows, HetNet rows shared
        let x = random_profile(&net, g);
        let mut y = random_profile(&net, g);
        for &b in net.bs() {
            y.row_mut(b).copy_from_slice(x.row(b));
        }
        let z = lerp(&x, &y, t);
        let gap = t * net.cran_rate_k(&x, k) + (1.0 - t) * net.cran_rate_k(&y, k)
            - net.cran_rate_k(&z, k);
        worst = worst.max(gap / net.w_over_l());

        // BS: vary one BS's own power on k
        let b = net.bs()[g.random_range(0..net.bs().len())];
        let mut y = x.clone();
        y.set(b, k, net.p_max()[b] * g.random::<f64>());
        let z = lerp(&x, &y, t);
        let gap = t * net.bs_rate_k(&x, b, k) + (1.0 - t) * net.bs_rate_k(&y, b, k)
            - net.bs_rate_k(&z, b, k);
        worst = worst.max(gap / net.w_over_l());
    }
    SuiteReport {
        name: "rate concavity (midpoint)",
        instances: 2 * instances,
        worst,
        threshold: 1e-9,
    }
}

/// Solves the Nash game on each seed and certifies converged runs with
/// [`verify_ne`].
pub fn ne_certificates(
    scenario: &Scenario<f64>,
    seeds: &[u64],
    opts: &NeOptions<f64>,
    tol: f64,
) -> CertificateReport {
    let mut rep = CertificateReport {
        seeds: seeds.len(),
        ..Default::default()
    };
    for &seed in seeds {
        let net = match realize(scenario, seed) {
            Ok(n) => n,
            Err(_) => {
                rep.errors += 1;
                continue;
            }
        };
        let res = match solve_ne(&net, opts) {
            Ok(r) => r,
            Err(_) => {
                rep.errors += 1;
                continue;
            }
        };
        if !res.converged {
            rep.non_converged += 1;
            continue;
        }
        match verify_ne(&res, &net, &opts.solver) {
            Ok(v) => {
                rep.worst = rep.worst.max(v);
                if v <= tol {
                    rep.certified += 1;
                }
            }
            Err(_) => rep.errors += 1,
        }
    }
    rep
}

/// Largest relative gain in a player's own cognitive-hierarchy utility from
/// random feasible moves away from its played strategy, at step sizes from
/// `1e-4` to a full jump.
pub fn che_perturbation_gain(
    net: &Network<f64>,
    played: &PowerProfile<f64>,
    table: &LevelStrategyTable<f64>,
    trials: usize,
    g: &mut Rng,
) -> crate::Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    let eps = 1e-9 * net.w_over_l();
    for pl in net.players() {
        let m = PlayerKind::of(net, pl).level();
        let w = poisson_level_weights(net.ch_tau(), m);
        let util = |p: &PowerProfile<f64>| match pl {
            Player::Cu => net.utility_ch_cu(m, table, &w, p),
            Player::Bs(b) => net.utility_ch_bs(b, m, table, &w, p.row(b)),
        };
        let base = util(played)?;
        for trial in 0..trials {
            let s = [1e-4, 1e-3, 1e-2, 0.1, 0.5, 1.0][trial % 6];
            let target = random_profile(net, g);
            let mut q = played.clone();
            for tx in net.controlled(pl) {
                for k in 0..net.n_subcarriers() {
                    q.set(tx, k, (1.0 - s) * played.get(tx, k) + s * target.get(tx, k));
                }
            }
            worst = worst.max((util(&q)? - base) / base.max(eps));
        }
    }
    Ok(worst)
}

/// Solves the cognitive-hierarchy game on each seed and certifies it with
/// [`verify_che`] and a random-perturbation search.
pub fn che_certificates(
    scenario: &Scenario<f64>,
    seeds: &[u64],
    opts: &SolverOptions<f64>,
    tol: f64,
) -> CertificateReport {
    let mut rep = CertificateReport {
        seeds: seeds.len(),
        ..Default::default()
    };
    for &seed in seeds {
        let checked = realize(scenario, seed).and_then(|net| {
            let (res, table) = solve_che(&net, opts)?;
            let v = verify_che(&res, &table, &net, opts)?;
            let g = &mut rng(derive_seed(seed, &[0xCE]));
            let pert = che_perturbation_gain(&net, &res.profile, &table, 24, g)?;
            Ok(v.max(pert))
        });
        match checked {
            Ok(v) => {
                rep.worst = rep.worst.max(v);
                if v <= tol {
                    rep.certified += 1;
                }
            }
            Err(_) => rep.errors += 1,
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_oracle_matches_brute_force() {
        let c = [3.0, 1.0, 0.2];
        let steps = 40;
        let mut brute = f64::NEG_INFINITY;
        for a in 0..=steps {
            for b in 0..=steps - a {
                let p =
                    [a as f64, b as f64, (steps - a - b) as f64].map(|x| x * 2.0 / steps as f64);
                brute = brute.max(waterfill_objective(&c, &p, 1.0));
            }
        }
        assert!((waterfill_lattice_max(&c, 2.0, steps) - brute).abs() < 1e-12);
    }

    #[test]
    fn grid_oracles_bracket_known_points() {
        let amps = [1.0, 0.5, 0.3, 0.8];
        let e = [1.0, 1.0];
        let grid = cu_grid_max(&amps, &e, [1.0, 1.0], 1.0, 100);
        let even = cu_objective(&amps, &e, &[0.5, 0.5, 0.5, 0.5], 1.0);
        assert!(grid >= even);
        assert!(
            bs_ch_grid_max(&[1.0, 1.0], &[0.0, 0.0], &[1.0, 1.0], 1.0, 10)
                >= bs_ch_objective(&[1.0, 1.0], &[0.0, 0.0], &[1.0, 1.0], &[0.5, 0.5], 1.0)
        );
    }

    #[test]
    fn stable_difference_matches_plain_difference() {
        let amps = [0.5, 0.7, 0.2, 0.9];
        let e = [0.3, 0.6];
        let p = [0.4, 0.6, 0.5, 0.5];
        for idx in 0..4 {
            let h = 1e-3;
            let mut up = p;
            let mut dn = p;
            up[idx] += h;
            dn[idx] -= h;
            let plain = cu_objective(&amps, &e, &up, 1.0) - cu_objective(&amps, &e, &dn, 1.0);
            assert!((cu_central_difference(&amps, &e, &p, 1.0, idx, h) - plain).abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_error_flags_a_wrong_gradient() {
        // a gradient of the wrong scale must be caught
        let amps = [0.5, 0.7];
        let e = [0.3];
        let p = [0.4, 0.6];
        assert!(gradient_error(&amps, &e, &p, 1.0, 1e-6) < 1e-6);
        let g = cu_gradient(&amps, &e, &p, 1.0);
        let fd = (cu_objective(&amps, &e, &[0.4 + 1e-6, 0.6], 2.0)
            - cu_objective(&amps, &e, &[0.4 - 1e-6, 0.6], 2.0))
            / 2e-6;
        assert!((fd - g[0]).abs() / g[0] > 0.5);
    }

    #[test]
    fn small_suites_pass() {
        for rep in [
            waterfill_suite(5, 1),
            cu_grid_suite(2, 1),
            bs_ch_grid_suite(3, 1),
            gradient_suite(10, 1),
            concavity_suite(20, 1),
        ] {
            assert!(rep.passed(), "{rep}");
        }
    }

    #[test]
    fn equal_power_fails_the_perturbation_search() {
        let net = realize(&Scenario::default(), 3).unwrap();
        let (_, table) = solve_che(&net, &SolverOptions::default()).unwrap();
        let eq = PowerProfile::equal_power(net.p_max(), net.n_subcarriers());
        let gain = che_perturbation_gain(&net, &eq, &table, 24, &mut rng(5)).unwrap();
        assert!(gain > 1e-6);
    }

    #[test]
    fn certificates_on_a_few_seeds() {
        let s = Scenario::default();
        let ne = ne_certificates(&s, &[0, 1, 2], &NeOptions::default(), 1e-6);
        assert_eq!(ne.certified + ne.non_converged, 3, "{ne:?}");
        let che = che_certificates(&s, &[0, 1, 2], &SolverOptions::default(), 1e-6);
        assert_eq!(che.certified, 3, "{che:?}");
    }
}
