//! Subcarrier assignment, achievable rates and utilities.
//!
//! Rates are `(W/L) log2(1 + SINR)` in bits/s. The per-frame quantities every
//! formula needs are gathered once into a [`Network`]: for each transmitter,
//! each receiver group (the CRAN user or one BS's user on subcarrier `k`) and
//! each subcarrier, the path gain `|h|^2 d^-alpha` towards the user that group
//! serves on `k`.

use num_complex::Complex;

use crate::channel::ChannelRealization;
use crate::equilibrium::LevelStrategyTable;
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::scenario::{Deployment, Owner, Scenario, TxKind};
use crate::solvers::LevelWeights;

/// Fairness averages `R̄_jk`, laid out `[user][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rbar<T> {
    n_sub: usize,
    values: Vec<T>,
}

impl<T: Scalar> Rbar<T> {
    /// The single-frame convention: every average equals one.
    pub fn ones(n_users: usize, n_sub: usize) -> Self {
        Self {
            n_sub,
            values: vec![T::one(); n_users * n_sub],
        }
    }

    pub fn from_values(n_users: usize, n_sub: usize, values: Vec<T>) -> Self {
        assert_eq!(values.len(), n_users * n_sub);
        assert!(
            values.iter().all(|&v| v > T::zero()),
            "rbar must be positive"
        );
        Self { n_sub, values }
    }

    #[inline]
    pub fn get(&self, user: usize, k: usize) -> T {
        self.values[user * self.n_sub + k]
    }
}

fn argmax_lowest<T: Scalar>(candidates: impl Iterator<Item = (usize, T)>) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (id, v) in candidates {
        match best {
            Some((bid, bv)) if v < bv || (v == bv && id > bid) => {}
            _ => best = Some((id, v)),
        }
    }
    best.map(|(id, _)| id)
}

/// CRAN user served on each subcarrier:
/// `argmax_j sum_i |h_ijk| d_ij^(-alpha/2) / R̄_jk`, ties to the lowest id.
pub fn assign_cran<T: Scalar>(
    c: &ChannelRealization<T>,
    d: &Deployment<T>,
    rbar: &Rbar<T>,
) -> Vec<usize> {
    let half_alpha = c.pathloss_exponent() / T::of(2.0);
    let rrh: Vec<usize> = d.rrh_ids().collect();
    let users: Vec<usize> = d.users_of(Owner::Cran).collect();
    (0..c.n_subcarriers())
        .map(|k| {
            argmax_lowest(users.iter().map(|&j| {
                let metric = rrh.iter().fold(T::zero(), |acc, &i| {
                    acc + c.h_unchecked(i, j, k).norm()
                        * d.distance_unchecked(i, j).powf(-half_alpha)
                });
                (j, metric / rbar.get(j, k))
            }))
            .expect("CRAN has at least one user")
        })
        .collect()
}

/// User of BS `bs` served on each subcarrier: `argmax_j |h_ijk| / R̄_jk`.
pub fn assign_bs<T: Scalar>(
    c: &ChannelRealization<T>,
    d: &Deployment<T>,
    bs: usize,
    rbar: &Rbar<T>,
) -> Vec<usize> {
    let users: Vec<usize> = d.users_of(Owner::Bs(bs)).collect();
    (0..c.n_subcarriers())
        .map(|k| {
            argmax_lowest(
                users
                    .iter()
                    .map(|&j| (j, c.h_unchecked(bs, j, k).norm() / rbar.get(j, k))),
            )
            .expect("BS has at least one user")
        })
        .collect()
}

/// Served user per subcarrier for the CRAN and for every HetNet BS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub cran_user: Vec<usize>,
    /// `(BS transmitter id, served user per subcarrier)` in transmitter order.
    pub bs_user: Vec<(usize, Vec<usize>)>,
}

impl Assignment {
    pub fn new<T: Scalar>(c: &ChannelRealization<T>, d: &Deployment<T>, rbar: &Rbar<T>) -> Self {
        let has_cran = d.rrh_ids().next().is_some() && d.users_of(Owner::Cran).next().is_some();
        Self {
            cran_user: if has_cran {
                assign_cran(c, d, rbar)
            } else {
                Vec::new()
            },
            bs_user: d.bs_ids().map(|b| (b, assign_bs(c, d, b, rbar))).collect(),
        }
    }

    pub fn bs_user(&self, bs: usize) -> Option<&[usize]> {
        self.bs_user
            .iter()
            .find(|(b, _)| *b == bs)
            .map(|(_, v)| v.as_slice())
    }
}

/// Per-transmitter, per-subcarrier transmit powers, row-major `[tx][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile<T> {
    n_sub: usize,
    p: Vec<T>,
}

impl<T: Scalar> PowerProfile<T> {
    pub fn zeros(n_tx: usize, n_sub: usize) -> Self {
        Self {
            n_sub,
            p: vec![T::zero(); n_tx * n_sub],
        }
    }

    /// `P_i,max / L` on every subcarrier.
    pub fn equal_power(p_max: &[T], n_sub: usize) -> Self {
        let l = T::of_usize(n_sub);
        Self {
            n_sub,
            p: p_max
                .iter()
                .flat_map(|&pm| std::iter::repeat_n(pm / l, n_sub))
                .collect(),
        }
    }

    pub fn n_tx(&self) -> usize {
        self.p.len() / self.n_sub.max(1)
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_sub
    }

    #[inline]
    pub fn get(&self, tx: usize, k: usize) -> T {
        self.p[tx * self.n_sub + k]
    }

    #[inline]
    pub fn set(&mut self, tx: usize, k: usize, v: T) {
        self.p[tx * self.n_sub + k] = v;
    }

    pub fn row(&self, tx: usize) -> &[T] {
        &self.p[tx * self.n_sub..(tx + 1) * self.n_sub]
    }

    pub fn row_mut(&mut self, tx: usize) -> &mut [T] {
        &mut self.p[tx * self.n_sub..(tx + 1) * self.n_sub]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.p
    }

    /// Largest relative budget violation `|sum_k p_ik - P_i| / P_i`, or infinity
    /// if any power is negative or non-finite.
    pub fn budget_violation(&self, p_max: &[T]) -> T {
        let mut worst = T::zero();
        for (tx, &pm) in p_max.iter().enumerate() {
            let row = self.row(tx);
            if row.iter().any(|&x| !(x >= T::zero()) || !x.is_finite()) {
                return T::infinity();
            }
            let s = row.iter().fold(T::zero(), |a, &b| a + b);
            worst = worst.max((s - pm).abs() / pm);
        }
        worst
    }
}

/// A game player: the CRAN control unit (which steers every RRH) or one HetNet BS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Player {
    Cu,
    /// Transmitter id of the BS.
    Bs(usize),
}

/// Everything the rate formulas need for one frame.
#[derive(Debug, Clone)]
pub struct Network<T> {
    w_over_l: T,
    noise: T,
    ch_tau: T,
    n_sub: usize,
    kinds: Vec<TxKind>,
    p_max: Vec<T>,
    rrh: Vec<usize>,
    bs: Vec<usize>,
    /// Receiver group of each transmitter: 0 for RRHs, `1 + b` for the b-th BS.
    rx_of: Vec<usize>,
    n_rx: usize,
    /// `[tx][rx][k]`.
    gain: Vec<T>,
    /// RRH-to-CRAN-user channel `h`, `[rrh index][k]`.
    cran_h: Vec<Complex<T>>,
    /// Matching `d^(-alpha/2)`.
    cran_root: Vec<T>,
    has_cu: bool,
}

impl<T: Scalar> Network<T> {
    pub fn new(
        s: &Scenario<T>,
        d: &Deployment<T>,
        c: &ChannelRealization<T>,
        a: &Assignment,
    ) -> Result<Self> {
        let n_sub = c.n_subcarriers();
        let alpha = c.pathloss_exponent();
        let rrh: Vec<usize> = d.rrh_ids().collect();
        let bs: Vec<usize> = d.bs_ids().collect();
        let has_cu = !rrh.is_empty();
        if has_cu && a.cran_user.len() != n_sub {
            return Err(Error::InvalidScenario(
                "RRHs present but no CRAN user assignment".into(),
            ));
        }
        let n_tx = d.n_tx();
        let n_rx = 1 + bs.len();
        let mut rx_of = vec![0; n_tx];
        for (b, &tx) in bs.iter().enumerate() {
            rx_of[tx] = 1 + b;
        }
        let served = |rx: usize, k: usize| -> Option<usize> {
            if rx == 0 {
                a.cran_user.get(k).copied()
            } else {
                a.bs_user(bs[rx - 1]).map(|u| u[k])
            }
        };
        let mut gain = vec![T::zero(); n_tx * n_rx * n_sub];
        for tx in 0..n_tx {
            for rx in 0..n_rx {
                for k in 0..n_sub {
                    if let Some(u) = served(rx, k) {
                        gain[(tx * n_rx + rx) * n_sub + k] =
                            c.gain2_unchecked(tx, u, k) * d.distance_unchecked(tx, u).powf(-alpha);
                    }
                }
            }
        }
        let half_alpha = alpha / T::of(2.0);
        let mut cran_h = Vec::with_capacity(rrh.len() * n_sub);
        let mut cran_root = Vec::with_capacity(rrh.len() * n_sub);
        for &i in &rrh {
            for k in 0..n_sub {
                let u = a.cran_user[k];
                cran_h.push(c.h_unchecked(i, u, k));
                cran_root.push(d.distance_unchecked(i, u).powf(-half_alpha));
            }
        }
        Ok(Self {
            w_over_l: s.w_over_l(),
            noise: s.noise_power_w,
            ch_tau: s.ch_tau,
            n_sub,
            kinds: d.transmitters.iter().map(|t| t.kind).collect(),
            p_max: d.transmitters.iter().map(|t| t.p_max_w).collect(),
            rrh,
            bs,
            rx_of,
            n_rx,
            gain,
            cran_h,
            cran_root,
            has_cu,
        })
    }

    /// Assigns subcarriers with `R̄ = 1` and builds the network.
    pub fn build(s: &Scenario<T>, d: &Deployment<T>, c: &ChannelRealization<T>) -> Result<Self> {
        let a = Assignment::new(c, d, &Rbar::ones(d.n_users(), c.n_subcarriers()));
        Self::new(s, d, c, &a)
    }

    pub fn with_tau(mut self, tau: T) -> Self {
        self.ch_tau = tau;
        self
    }

    pub fn w_over_l(&self) -> T {
        self.w_over_l
    }

    pub fn noise(&self) -> T {
        self.noise
    }

    pub fn ch_tau(&self) -> T {
        self.ch_tau
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_sub
    }

    pub fn n_tx(&self) -> usize {
        self.kinds.len()
    }

    pub fn p_max(&self) -> &[T] {
        &self.p_max
    }

    pub fn kind(&self, tx: usize) -> TxKind {
        self.kinds[tx]
    }

    pub fn rrh(&self) -> &[usize] {
        &self.rrh
    }

    pub fn bs(&self) -> &[usize] {
        &self.bs
    }

    /// Players in the fixed order: the CU (when the CRAN exists) then BSs by id.
    pub fn players(&self) -> Vec<Player> {
        let cu = self.has_cu.then_some(Player::Cu);
        cu.into_iter()
            .chain(self.bs.iter().map(|&b| Player::Bs(b)))
            .collect()
    }

    /// Transmitters whose powers `player` controls.
    pub fn controlled(&self, player: Player) -> Vec<usize> {
        match player {
            Player::Cu => self.rrh.clone(),
            Player::Bs(b) => vec![b],
        }
    }

    /// Path gain from `tx` to the user served by receiver group `rx` on `k`.
    #[inline]
    pub fn gain(&self, tx: usize, rx: usize, k: usize) -> T {
        self.gain[(tx * self.n_rx + rx) * self.n_sub + k]
    }

    #[inline]
    fn rx_of_bs(&self, bs: usize) -> usize {
        debug_assert_ne!(self.kinds[bs], TxKind::Rrh);
        self.rx_of[bs]
    }

    /// `|h_ik|^2 d_ik^-alpha` from BS `bs` to its own user on `k`.
    pub fn direct_gain(&self, bs: usize, k: usize) -> T {
        self.gain(bs, self.rx_of_bs(bs), k)
    }

    /// `|h_ik| d_ik^(-alpha/2)` for the r-th RRH towards the CRAN user on `k`.
    pub fn cran_amplitude(&self, r: usize, k: usize) -> T {
        let i = r * self.n_sub + k;
        self.cran_h[i].norm() * self.cran_root[i]
    }

    /// Amplitudes of all RRHs, `[rrh index][k]`.
    pub fn cran_amplitudes(&self) -> Vec<T> {
        (0..self.cran_h.len())
            .map(|i| self.cran_h[i].norm() * self.cran_root[i])
            .collect()
    }

    /// HetNet interference at the CRAN user on `k` (noise excluded).
    pub fn cran_interference(&self, p: &PowerProfile<T>, k: usize) -> T {
        self.bs
            .iter()
            .fold(T::zero(), |acc, &l| acc + self.gain(l, 0, k) * p.get(l, k))
    }

    /// Interference at BS `bs`'s user on `k` from every other transmitter.
    pub fn bs_interference(&self, p: &PowerProfile<T>, bs: usize, k: usize) -> T {
        let rx = self.rx_of_bs(bs);
        (0..self.n_tx())
            .filter(|&t| t != bs)
            .fold(T::zero(), |acc, t| acc + self.gain(t, rx, k) * p.get(t, k))
    }

    /// Coherent amplitude `sum_i |h_ik| sqrt(p_ik d_ik^-alpha)`.
    pub fn cran_signal_amplitude(&self, p: &PowerProfile<T>, k: usize) -> T {
        self.rrh.iter().enumerate().fold(T::zero(), |acc, (r, &i)| {
            acc + self.cran_amplitude(r, k) * p.get(i, k).sqrt()
        })
    }

    fn log_rate(&self, sinr: T) -> T {
        self.w_over_l * sinr.ln_1p() / T::LN_2()
    }

    /// MISO rate of the CRAN user on subcarrier `k`.
    pub fn cran_rate_k(&self, p: &PowerProfile<T>, k: usize) -> T {
        if !self.has_cu {
            return T::zero();
        }
        let s = self.cran_signal_amplitude(p, k);
        self.log_rate(s * s / (self.noise + self.cran_interference(p, k)))
    }

    /// Rate of BS `bs`'s user on subcarrier `k`.
    pub fn bs_rate_k(&self, p: &PowerProfile<T>, bs: usize, k: usize) -> T {
        let signal = self.direct_gain(bs, k) * p.get(bs, k);
        self.log_rate(signal / (self.noise + self.bs_interference(p, bs, k)))
    }

    pub fn utility_cu(&self, p: &PowerProfile<T>) -> T {
        (0..self.n_sub).fold(T::zero(), |acc, k| acc + self.cran_rate_k(p, k))
    }

    pub fn utility_bs(&self, p: &PowerProfile<T>, bs: usize) -> T {
        (0..self.n_sub).fold(T::zero(), |acc, k| acc + self.bs_rate_k(p, bs, k))
    }

    pub fn utility(&self, p: &PowerProfile<T>, player: Player) -> T {
        match player {
            Player::Cu => self.utility_cu(p),
            Player::Bs(b) => self.utility_bs(p, b),
        }
    }

    /// Per-RRH weights `v_i = h*_ik sqrt(p_ik d^-alpha) / (|h_ik| sum_l sqrt(p_lk d^-alpha))`.
    pub fn beamforming_weights(&self, p: &PowerProfile<T>, k: usize) -> Result<Vec<Complex<T>>> {
        let sqrt_pd: Vec<T> = self
            .rrh
            .iter()
            .enumerate()
            .map(|(r, &i)| self.cran_root[r * self.n_sub + k] * p.get(i, k).sqrt())
            .collect();
        let denom = sqrt_pd.iter().fold(T::zero(), |a, &b| a + b);
        if !(denom > T::zero()) {
            return Err(Error::UndefinedWeights { subcarrier: k });
        }
        Ok(sqrt_pd
            .iter()
            .enumerate()
            .map(|(r, &spd)| {
                let h = self.cran_h[r * self.n_sub + k];
                let phase = if h.norm() > T::zero() {
                    h.conj() / h.norm()
                } else {
                    Complex::new(T::one(), T::zero())
                };
                phase * (spd / denom)
            })
            .collect())
    }

    /// Raw channel of the r-th RRH towards the CRAN user on `k`.
    pub fn cran_channel(&self, r: usize, k: usize) -> Complex<T> {
        self.cran_h[r * self.n_sub + k]
    }

    /// Believed interference (noise excluded) at `player`'s user on `k` under
    /// level-`m` cognitive-hierarchy beliefs.
    ///
    /// A BS believes a share `g_m(m)` of every other transmitter copies its own
    /// power `own_p`, and the shares `g_m(h)`, `h < m`, play their stored level-`h`
    /// strategies. The CU has no same-level term and sums over HetNet BSs only.
    pub fn ch_expected_interference(
        &self,
        player: Player,
        m: usize,
        k: usize,
        table: &LevelStrategyTable<T>,
        weights: &LevelWeights<T>,
        own_p: T,
    ) -> Result<T> {
        let lower = |tx: usize, rx: usize| -> Result<T> {
            let mut acc = T::zero();
            for h in 0..m {
                acc += weights.g(h) * self.gain(tx, rx, k) * table.power(tx, h, k)?;
            }
            Ok(acc)
        };
        match player {
            Player::Cu => {
                let mut e = T::zero();
                for &l in &self.bs {
                    e += lower(l, 0)?;
                }
                Ok(e)
            }
            Player::Bs(i) => {
                let rx = self.rx_of_bs(i);
                let mut same = T::zero();
                let mut e = T::zero();
                for t in (0..self.n_tx()).filter(|&t| t != i) {
                    same += self.gain(t, rx, k);
                    e += lower(t, rx)?;
                }
                Ok(weights.g(m) * same * own_p + e)
            }
        }
    }

    /// Per-subcarrier `(D_m, I_m-1)` of a level-`m` BS: the coefficient of its
    /// own power in the believed interference, and the rest plus noise.
    pub fn ch_bs_terms(
        &self,
        bs: usize,
        m: usize,
        table: &LevelStrategyTable<T>,
        weights: &LevelWeights<T>,
    ) -> Result<(Vec<T>, Vec<T>)> {
        let rx = self.rx_of_bs(bs);
        let mut d = vec![T::zero(); self.n_sub];
        let mut i_prev = vec![self.noise; self.n_sub];
        for t in (0..self.n_tx()).filter(|&t| t != bs) {
            for k in 0..self.n_sub {
                let g = self.gain(t, rx, k);
                d[k] += g;
                for h in 0..m {
                    i_prev[k] += weights.g(h) * g * table.power(t, h, k)?;
                }
            }
        }
        let gm = weights.g(m);
        d.iter_mut().for_each(|x| *x *= gm);
        Ok((d, i_prev))
    }

    /// Noise plus believed HetNet interference `e_k` of a level-`m` CU.
    pub fn ch_cu_interference(
        &self,
        m: usize,
        table: &LevelStrategyTable<T>,
        weights: &LevelWeights<T>,
    ) -> Result<Vec<T>> {
        (0..self.n_sub)
            .map(|k| {
                self.ch_expected_interference(Player::Cu, m, k, table, weights, T::zero())
                    .map(|e| e + self.noise)
            })
            .collect()
    }

    /// Belief-based utility of a level-`m` BS playing `row`.
    pub fn utility_ch_bs(
        &self,
        bs: usize,
        m: usize,
        table: &LevelStrategyTable<T>,
        weights: &LevelWeights<T>,
        row: &[T],
    ) -> Result<T> {
        let mut u = T::zero();
        for (k, &p) in row.iter().enumerate() {
            let e = self.ch_expected_interference(Player::Bs(bs), m, k, table, weights, p)?;
            u += self.log_rate(self.direct_gain(bs, k) * p / (self.noise + e));
        }
        Ok(u)
    }

    /// Belief-based utility of a level-`m` CU whose RRHs play the rows of `p`.
    pub fn utility_ch_cu(
        &self,
        m: usize,
        table: &LevelStrategyTable<T>,
        weights: &LevelWeights<T>,
        p: &PowerProfile<T>,
    ) -> Result<T> {
        let e = self.ch_cu_interference(m, table, weights)?;
        Ok((0..self.n_sub).fold(T::zero(), |acc, k| {
            let s = self.cran_signal_amplitude(p, k);
            acc + self.log_rate(s * s / e[k])
        }))
    }
}
