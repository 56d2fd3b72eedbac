//! Nash, cognitive-hierarchy and equal-power solutions of the power game,
//! plus verifiers that re-optimize every player against the returned profile.
//!
//! Realized rates are always recomputed from the played profile under the true
//! interference. Cognitive-hierarchy beliefs only shape strategy choice.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::num::{pos, Scalar};
use crate::rates::{Network, Player, PowerProfile};
use crate::scenario::TxKind;
use crate::solvers::{
    bs_ch_best_response, cu_best_response, nash_bs_best_response, poisson_level_weights,
    LevelWeights, SolverOptions,
};

/// Highest hierarchy level; the CU sits here.
pub const TOP_LEVEL: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Concept {
    Ne,
    Che,
    EqualPower,
}

impl Concept {
    pub fn name(self) -> &'static str {
        match self {
            Concept::Ne => "ne",
            Concept::Che => "che",
            Concept::EqualPower => "equal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ne" | "nash" => Some(Concept::Ne),
            "che" | "ch" => Some(Concept::Che),
            "equal" | "equalpower" | "equal_power" => Some(Concept::EqualPower),
            _ => None,
        }
    }
}

/// Player classes rates are reported by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PlayerKind {
    Cran,
    Macro,
    Pico,
    Femto,
}

impl PlayerKind {
    pub const ALL: [PlayerKind; 4] = [
        PlayerKind::Cran,
        PlayerKind::Macro,
        PlayerKind::Pico,
        PlayerKind::Femto,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlayerKind::Cran => "CRAN",
            PlayerKind::Macro => "Macro",
            PlayerKind::Pico => "Pico",
            PlayerKind::Femto => "Femto",
        }
    }

    pub fn of<T: Scalar>(net: &Network<T>, player: Player) -> Self {
        match player {
            Player::Cu => PlayerKind::Cran,
            Player::Bs(b) => match net.kind(b) {
                TxKind::Macro => PlayerKind::Macro,
                TxKind::Pico => PlayerKind::Pico,
                TxKind::Femto => PlayerKind::Femto,
                TxKind::Rrh => unreachable!("RRHs are steered by the CU"),
            },
        }
    }

    /// Hierarchy level: femto 1, pico 2, macro 3, CRAN 4.
    pub fn level(self) -> usize {
        match self {
            PlayerKind::Femto => 1,
            PlayerKind::Pico => 2,
            PlayerKind::Macro => 3,
            PlayerKind::Cran => TOP_LEVEL,
        }
    }
}

/// Level-`h` strategy of every transmitter, `levels[h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelStrategyTable<T> {
    levels: Vec<PowerProfile<T>>,
}

impl<T: Scalar> LevelStrategyTable<T> {
    pub fn from_levels(levels: Vec<PowerProfile<T>>) -> Self {
        Self { levels }
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, h: usize) -> Result<&PowerProfile<T>> {
        self.levels.get(h).ok_or(Error::MissingLevel {
            tx: usize::MAX,
            level: h,
        })
    }

    pub fn level_mut(&mut self, h: usize) -> Result<&mut PowerProfile<T>> {
        self.levels.get_mut(h).ok_or(Error::MissingLevel {
            tx: usize::MAX,
            level: h,
        })
    }

    pub fn power(&self, tx: usize, h: usize, k: usize) -> Result<T> {
        let lvl = self
            .levels
            .get(h)
            .ok_or(Error::MissingLevel { tx, level: h })?;
        if tx >= lvl.n_tx() {
            return Err(Error::MissingLevel { tx, level: h });
        }
        Ok(lvl.get(tx, k))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult<T> {
    pub concept: Concept,
    pub profile: PowerProfile<T>,
    /// True utility of each player under `profile`, in player order.
    pub realized_rates: Vec<(Player, T)>,
    /// Mean realized rate per player of each class present.
    pub per_type_rates: BTreeMap<PlayerKind, T>,
    /// Summed realized rate of each class present.
    pub per_type_totals: BTreeMap<PlayerKind, T>,
    pub total_rate: T,
    pub converged: bool,
    /// Sweeps for NE, levels for CHE, zero for equal power.
    pub iterations: usize,
    pub max_residual: T,
    pub best_response_calls: usize,
}

impl<T: Scalar> EquilibriumResult<T> {
    /// Evaluates the true utilities of `profile`.
    pub fn evaluate(net: &Network<T>, concept: Concept, profile: PowerProfile<T>) -> Self {
        let realized_rates: Vec<(Player, T)> = net
            .players()
            .into_iter()
            .map(|pl| (pl, net.utility(&profile, pl)))
            .collect();
        let mut totals: BTreeMap<PlayerKind, (T, usize)> = BTreeMap::new();
        for &(pl, r) in &realized_rates {
            let e = totals
                .entry(PlayerKind::of(net, pl))
                .or_insert((T::zero(), 0));
            e.0 += r;
            e.1 += 1;
        }
        let total_rate = realized_rates.iter().fold(T::zero(), |a, &(_, r)| a + r);
        Self {
            concept,
            profile,
            per_type_rates: totals
                .iter()
                .map(|(&k, &(s, n))| (k, s / T::of_usize(n)))
                .collect(),
            per_type_totals: totals.iter().map(|(&k, &(s, _))| (k, s)).collect(),
            realized_rates,
            total_rate,
            converged: true,
            iterations: 0,
            max_residual: T::zero(),
            best_response_calls: 0,
        }
    }

    pub fn rate_of(&self, player: Player) -> Option<T> {
        self.realized_rates
            .iter()
            .find(|(p, _)| *p == player)
            .map(|&(_, r)| r)
    }

    /// Debug dump: summary, rates and, per player, the played powers and (when a
    /// level table is given) the powers at every level.
    pub fn to_json(&self, net: &Network<T>, table: Option<&LevelStrategyTable<T>>) -> Value {
        let rows = |p: &PowerProfile<T>, txs: &[usize]| -> Value {
            Value::Array(
                txs.iter()
                    .map(|&t| json!(p.row(t).iter().map(|x| x.as_f64()).collect::<Vec<_>>()))
                    .collect(),
            )
        };
        let mut players = Map::new();
        for pl in net.players() {
            let txs = net.controlled(pl);
            let mut entry = Map::new();
            entry.insert("kind".into(), json!(PlayerKind::of(net, pl).name()));
            entry.insert("transmitters".into(), json!(txs));
            entry.insert("played".into(), rows(&self.profile, &txs));
            if let Some(t) = table {
                let mut levels = Map::new();
                for h in 0..t.n_levels() {
                    levels.insert(h.to_string(), rows(&t.levels[h], &txs));
                }
                entry.insert("levels".into(), Value::Object(levels));
            }
            entry.insert(
                "rate_bps".into(),
                json!(self.rate_of(pl).map(|r| r.as_f64())),
            );
            players.insert(player_label(pl), Value::Object(entry));
        }
        json!({
            "concept": self.concept.name(),
            "converged": self.converged,
            "iterations": self.iterations,
            "max_residual": self.max_residual.as_f64(),
            "best_response_calls": self.best_response_calls,
            "total_rate_bps": self.total_rate.as_f64(),
            "per_type_rates_bps": self
                .per_type_rates
                .iter()
                .map(|(k, v)| (k.name().to_string(), json!(v.as_f64())))
                .collect::<Map<_, _>>(),
            "players": players,
        })
    }
}

pub fn player_label(p: Player) -> String {
    match p {
        Player::Cu => "CU".to_string(),
        Player::Bs(b) => format!("BS{b}"),
    }
}

pub fn solve_equal_power<T: Scalar>(net: &Network<T>) -> EquilibriumResult<T> {
    let profile = PowerProfile::equal_power(net.p_max(), net.n_subcarriers());
    EquilibriumResult::evaluate(net, Concept::EqualPower, profile)
}

fn rrh_budgets<T: Scalar>(net: &Network<T>) -> Vec<T> {
    net.rrh().iter().map(|&i| net.p_max()[i]).collect()
}

fn write_rrh_rows<T: Scalar>(net: &Network<T>, dst: &mut PowerProfile<T>, p: &[T]) {
    let l = net.n_subcarriers();
    for (r, &i) in net.rrh().iter().enumerate() {
        dst.row_mut(i).copy_from_slice(&p[r * l..(r + 1) * l]);
    }
}

fn context(player: Player, level: Option<usize>, e: Error) -> Error {
    let context = match level {
        Some(m) => format!("{} at level {m}", player_label(player)),
        None => player_label(player),
    };
    Error::Solver {
        context,
        source: Box::new(e),
    }
}

/// Exact Nash best response of `player` to `p`, as rows `[controlled tx][k]`.
pub fn nash_best_response<T: Scalar>(
    net: &Network<T>,
    player: Player,
    p: &PowerProfile<T>,
    opts: &SolverOptions<T>,
) -> Result<Vec<T>> {
    match player {
        Player::Cu => {
            let e: Vec<T> = (0..net.n_subcarriers())
                .map(|k| net.noise() + net.cran_interference(p, k))
                .collect();
            cu_best_response(
                &net.cran_amplitudes(),
                &e,
                &rrh_budgets(net),
                net.w_over_l(),
                opts,
            )
            .map(|s| s.p)
            .map_err(|e| context(player, None, e))
        }
        Player::Bs(b) => Ok(nash_bs_best_response(net, b, p)),
    }
}

/// Level-`m` cognitive-hierarchy best response of `player`, as rows
/// `[controlled tx][k]`. Needs the table's levels `0..m`.
pub fn ch_best_response<T: Scalar>(
    net: &Network<T>,
    player: Player,
    m: usize,
    table: &LevelStrategyTable<T>,
    weights: &LevelWeights<T>,
    opts: &SolverOptions<T>,
) -> Result<Vec<T>> {
    debug_assert_eq!(weights.m, m);
    let res = match player {
        Player::Cu => net.ch_cu_interference(m, table, weights).and_then(|e| {
            cu_best_response(
                &net.cran_amplitudes(),
                &e,
                &rrh_budgets(net),
                net.w_over_l(),
                opts,
            )
            .map(|s| s.p)
        }),
        Player::Bs(b) => net
            .ch_bs_terms(b, m, table, weights)
            .and_then(|(d, i_prev)| {
                let c: Vec<T> = (0..net.n_subcarriers())
                    .map(|k| net.direct_gain(b, k))
                    .collect();
                bs_ch_best_response(&c, &d, &i_prev, net.p_max()[b], opts)
            }),
    };
    res.map_err(|e| context(player, Some(m), e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeOptions<T> {
    pub solver: SolverOptions<T>,
    /// Weight of the fresh best response in each update.
    pub damping: T,
    /// Stop once no power moves by more than this fraction of its budget in a sweep.
    pub tol_outer: T,
    pub max_sweeps: usize,
}

impl<T: Scalar> Default for NeOptions<T> {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            damping: T::of(0.5),
            tol_outer: T::of(1e-6),
            max_sweeps: 200,
        }
    }
}

/// Damped Gauss-Seidel best-response dynamics from equal power, CU first.
///
/// Failing to settle within `max_sweeps` is reported through `converged` and
/// `max_residual`, not as an error.
pub fn solve_ne<T: Scalar>(net: &Network<T>, opts: &NeOptions<T>) -> Result<EquilibriumResult<T>> {
    let l = net.n_subcarriers();
    let theta = opts.damping;
    let mut p = PowerProfile::equal_power(net.p_max(), l);
    let players = net.players();
    let mut sweeps = 0;
    let mut calls = 0;
    let mut change = T::infinity();
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        change = T::zero();
        for &pl in &players {
            let br = nash_best_response(net, pl, &p, &opts.solver)?;
            calls += 1;
            for (r, &tx) in net.controlled(pl).iter().enumerate() {
                let pm = net.p_max()[tx];
                let row = p.row_mut(tx);
                for k in 0..l {
                    let next = pos(theta * br[r * l + k] + (T::one() - theta) * row[k]);
                    change = change.max((next - row[k]).abs() / pm);
                    row[k] = next;
                }
            }
        }
        if change <= opts.tol_outer {
            break;
        }
    }
    let mut out = EquilibriumResult::evaluate(net, Concept::Ne, p);
    out.converged = change <= opts.tol_outer;
    out.iterations = sweeps;
    out.max_residual = change;
    out.best_response_calls = calls;
    Ok(out)
}

/// Level `h` strategies of every player given levels `0..h`.
fn level_profile<T: Scalar>(
    net: &Network<T>,
    h: usize,
    table: &LevelStrategyTable<T>,
    opts: &SolverOptions<T>,
) -> Result<(PowerProfile<T>, usize)> {
    let weights = poisson_level_weights(net.ch_tau(), h);
    let mut prof = PowerProfile::zeros(net.n_tx(), net.n_subcarriers());
    let mut calls = 0;
    for pl in net.players() {
        let rows = ch_best_response(net, pl, h, table, &weights, opts)?;
        calls += 1;
        let l = net.n_subcarriers();
        for (r, &tx) in net.controlled(pl).iter().enumerate() {
            prof.row_mut(tx).copy_from_slice(&rows[r * l..(r + 1) * l]);
        }
    }
    Ok((prof, calls))
}

/// Cognitive-hierarchy equilibrium.
///
/// Builds the level table bottom-up (level 0 is equal power; level `h` is every
/// player's CH best response to levels below `h`) and plays each player's
/// strategy at its own level. One pass, no fixed point.
pub fn solve_che<T: Scalar>(
    net: &Network<T>,
    opts: &SolverOptions<T>,
) -> Result<(EquilibriumResult<T>, LevelStrategyTable<T>)> {
    let l = net.n_subcarriers();
    let mut table =
        LevelStrategyTable::from_levels(vec![PowerProfile::equal_power(net.p_max(), l)]);
    let mut calls = 0;
    for h in 1..=TOP_LEVEL {
        let (prof, c) = level_profile(net, h, &table, opts)?;
        calls += c;
        table.levels.push(prof);
    }
    let mut played = PowerProfile::zeros(net.n_tx(), l);
    for pl in net.players() {
        let lvl = PlayerKind::of(net, pl).level();
        for tx in net.controlled(pl) {
            played
                .row_mut(tx)
                .copy_from_slice(table.levels[lvl].row(tx));
        }
    }
    let mut out = EquilibriumResult::evaluate(net, Concept::Che, played);
    out.iterations = TOP_LEVEL;
    out.best_response_calls = calls;
    Ok((out, table))
}

fn improvement<T: Scalar>(net: &Network<T>, best: T, current: T) -> T {
    let eps = net.w_over_l() * T::of(1e-9);
    (best - current) / current.max(eps)
}

/// Largest relative gain any player obtains by deviating unilaterally to its
/// exact best response against `result.profile`.
pub fn verify_ne<T: Scalar>(
    result: &EquilibriumResult<T>,
    net: &Network<T>,
    opts: &SolverOptions<T>,
) -> Result<T> {
    let p = &result.profile;
    let l = net.n_subcarriers();
    let mut worst = T::neg_infinity();
    for pl in net.players() {
        let br = nash_best_response(net, pl, p, opts)?;
        let mut dev = p.clone();
        for (r, &tx) in net.controlled(pl).iter().enumerate() {
            dev.row_mut(tx).copy_from_slice(&br[r * l..(r + 1) * l]);
        }
        worst = worst.max(improvement(net, net.utility(&dev, pl), net.utility(p, pl)));
    }
    Ok(worst)
}

/// Largest relative gain any player obtains in its own level's CH utility by
/// re-optimizing against the fixed level table.
pub fn verify_che<T: Scalar>(
    result: &EquilibriumResult<T>,
    table: &LevelStrategyTable<T>,
    net: &Network<T>,
    opts: &SolverOptions<T>,
) -> Result<T> {
    let p = &result.profile;
    let l = net.n_subcarriers();
    let mut worst = T::neg_infinity();
    for pl in net.players() {
        let m = PlayerKind::of(net, pl).level();
        let weights = poisson_level_weights(net.ch_tau(), m);
        let br = ch_best_response(net, pl, m, table, &weights, opts)?;
        let (best, current) = match pl {
            Player::Cu => {
                let mut dev = p.clone();
                write_rrh_rows(net, &mut dev, &br);
                (
                    net.utility_ch_cu(m, table, &weights, &dev)?,
                    net.utility_ch_cu(m, table, &weights, p)?,
                )
            }
            Player::Bs(b) => (
                net.utility_ch_bs(b, m, table, &weights, &br[..l])?,
                net.utility_ch_bs(b, m, table, &weights, p.row(b))?,
            ),
        };
        worst = worst.max(improvement(net, best, current));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use num_complex::Complex;

    use super::*;
    use crate::channel::ChannelRealization;
    use crate::experiments::realize;
    use crate::scenario::{Deployment, Owner, Scenario, Transmitter, User};
    use crate::solvers::{waterfill, SolverOptions};

    fn desk(seed: u64) -> Network<f64> {
        realize(&Scenario::default(), seed).unwrap()
    }

    fn bs_only(positions: &[(f64, f64)], user_offset: f64, l: usize) -> Network<f64> {
        let txs: Vec<_> = positions
            .iter()
            .enumerate()
            .map(|(id, &(x, y))| Transmitter {
                id,
                kind: TxKind::Pico,
                position: (x, y),
                p_max_w: 0.5,
            })
            .collect();
        let users: Vec<_> = positions
            .iter()
            .enumerate()
            .map(|(id, &(x, y))| User {
                id,
                owner: Owner::Bs(id),
                position: (x + user_offset, y),
            })
            .collect();
        let d = Deployment::from_positions(txs, users);
        let n = positions.len();
        let h: Vec<Complex<f64>> = (0..n * n * l)
            .map(|i| Complex::new(0.5 + ((i * 7919) % 13) as f64 / 13.0, 0.1))
            .collect();
        let c = ChannelRealization::from_gains(n, n, l, 3.0, h);
        let s = Scenario {
            n_subcarriers: l,
            ..Scenario::default()
        };
        Network::build(&s, &d, &c).unwrap()
    }

    fn isolated_waterfill(net: &Network<f64>, b: usize) -> Vec<f64> {
        let c: Vec<f64> = (0..net.n_subcarriers())
            .map(|k| net.direct_gain(b, k) / net.noise())
            .collect();
        waterfill(&c, net.p_max()[b])
    }

    #[test]
    fn equal_power_is_flat_and_budget_exact() {
        let net = desk(1);
        let res = solve_equal_power(&net);
        assert_eq!(res.profile.budget_violation(net.p_max()), 0.0);
        for tx in 0..net.n_tx() {
            let row = res.profile.row(tx);
            assert!(row.iter().all(|&x| x == row[0]));
        }
        assert_eq!(res.best_response_calls, 0);
    }

    #[test]
    fn lone_bs_reaches_waterfilling_in_one_sweep() {
        let net = bs_only(&[(0.0, 0.0)], 20.0, 4);
        let opts = NeOptions {
            damping: 1.0,
            ..NeOptions::default()
        };
        let res = solve_ne(&net, &opts).unwrap();
        assert!(res.converged);
        // the second sweep only confirms the first one's point
        assert!(res.iterations <= 2);
        let wf = isolated_waterfill(&net, 0);
        for (a, b) in res.profile.row(0).iter().zip(&wf) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn far_apart_bss_sit_at_isolated_waterfilling() {
        let net = bs_only(&[(0.0, 0.0), (1e6, 0.0), (0.0, 1e6)], 30.0, 4);
        let res = solve_ne(&net, &NeOptions::default()).unwrap();
        assert!(res.converged);
        for b in 0..3 {
            let wf = isolated_waterfill(&net, b);
            for (a, w) in res.profile.row(b).iter().zip(&wf) {
                assert!((a - w).abs() <= 1e-5 * net.p_max()[b], "{a} vs {w}");
            }
        }
    }

    #[test]
    fn converged_ne_passes_certificate() {
        let mut checked = 0;
        for seed in 0..5 {
            let net = desk(seed);
            let res = solve_ne(&net, &NeOptions::default()).unwrap();
            if res.converged {
                let v = verify_ne(&res, &net, &SolverOptions::default()).unwrap();
                assert!(v <= 1e-6, "seed {seed}: {v}");
                checked += 1;
            }
        }
        assert!(checked >= 4);
    }

    #[test]
    fn equal_power_is_not_an_equilibrium() {
        let net = desk(3);
        let res = solve_equal_power(&net);
        assert!(verify_ne(&res, &net, &SolverOptions::default()).unwrap() > 1e-3);
    }

    #[test]
    fn che_uses_four_calls_per_player_and_passes_certificate() {
        let net = desk(4);
        let (res, table) = solve_che(&net, &SolverOptions::default()).unwrap();
        assert_eq!(res.best_response_calls, 4 * net.players().len());
        assert_eq!(table.n_levels(), TOP_LEVEL + 1);
        assert_eq!(res.iterations, TOP_LEVEL);
        assert!(verify_che(&res, &table, &net, &SolverOptions::default()).unwrap() <= 1e-6);
        assert!(res.profile.budget_violation(net.p_max()) <= 1e-9);
    }

    #[test]
    fn che_plays_each_kind_at_its_level() {
        let net = desk(5);
        let (res, table) = solve_che(&net, &SolverOptions::default()).unwrap();
        for pl in net.players() {
            let lvl = PlayerKind::of(&net, pl).level();
            for tx in net.controlled(pl) {
                assert_eq!(res.profile.row(tx), table.level(lvl).unwrap().row(tx));
            }
        }
        assert_eq!(
            table.level(0).unwrap(),
            &PowerProfile::equal_power(net.p_max(), net.n_subcarriers())
        );
    }

    #[test]
    fn che_is_deterministic() {
        let net = desk(6);
        let a = solve_che(&net, &SolverOptions::default()).unwrap();
        let b = solve_che(&net, &SolverOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn realized_rates_use_true_interference() {
        let net = desk(7);
        let (res, _) = solve_che(&net, &SolverOptions::default()).unwrap();
        for &(pl, r) in &res.realized_rates {
            assert_eq!(r, net.utility(&res.profile, pl));
        }
        let sum: f64 = res.per_type_totals.values().sum();
        assert!((sum - res.total_rate).abs() <= 1e-9 * res.total_rate);
    }

    #[test]
    fn tiny_tau_makes_every_level_a_reply_to_equal_power() {
        // with tau -> 0 all belief mass sits on level 0
        let net = desk(8).with_tau(1e-12);
        let (_, table) = solve_che(&net, &SolverOptions::default()).unwrap();
        let l1 = table.level(1).unwrap();
        for h in 2..=TOP_LEVEL {
            let lh = table.level(h).unwrap();
            for (a, b) in lh.as_slice().iter().zip(l1.as_slice()) {
                assert!(
                    (a - b).abs() <= 1e-6 * b.abs().max(1e-3),
                    "level {h}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn lone_bs_che_is_waterfilling() {
        // with no opponents every level's belief is pure noise
        let net = bs_only(&[(0.0, 0.0)], 5.0, 3);
        let (res, _) = solve_che(&net, &SolverOptions::default()).unwrap();
        let wf = isolated_waterfill(&net, 0);
        for (a, b) in res.profile.row(0).iter().zip(&wf) {
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn json_dump_lists_players_and_levels() {
        let net = desk(9);
        let (res, table) = solve_che(&net, &SolverOptions::default()).unwrap();
        let v = res.to_json(&net, Some(&table));
        assert_eq!(v["concept"], "che");
        let players = v["players"].as_object().unwrap();
        assert_eq!(players.len(), net.players().len());
        let cu = &players["CU"];
        assert_eq!(cu["kind"], "CRAN");
        assert_eq!(cu["levels"].as_object().unwrap().len(), TOP_LEVEL + 1);
        assert_eq!(cu["played"].as_array().unwrap().len(), net.rrh().len());
    }

    #[test]
    fn concept_names_round_trip() {
        for c in [Concept::Ne, Concept::Che, Concept::EqualPower] {
            assert_eq!(Concept::parse(c.name()), Some(c));
        }
        assert_eq!(Concept::parse("qre"), None);
    }

    #[test]
    fn missing_level_is_reported() {
        let net = desk(10);
        let table =
            LevelStrategyTable::from_levels(vec![PowerProfile::equal_power(net.p_max(), 4)]);
        let w = poisson_level_weights(1.0, 2);
        let err = ch_best_response(&net, Player::Cu, 2, &table, &w, &SolverOptions::default());
        assert!(err.is_err());
    }

    #[test]
    fn f32_network_solves() {
        let s = crate::Scenario32::default();
        let net = realize(&s, 2).unwrap();
        let opts = SolverOptions::<f32> {
            tol_kkt: 1e-3,
            tol_step: 1e-5,
            ..Default::default()
        };
        let (res, _) = solve_che(&net, &opts).unwrap();
        assert!(res.total_rate > 0.0);
    }
}
