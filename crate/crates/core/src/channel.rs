//! Rayleigh fading realizations and received-power building blocks.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::scenario::{Deployment, Scenario};
use crate::seed;

/// Complex gains `h_ijk` for every (transmitter, user, subcarrier) triple of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization<T> {
    n_tx: usize,
    n_users: usize,
    n_sub: usize,
    pathloss_exponent: T,
    h: Vec<Complex<T>>,
    gain2: Vec<T>,
}

impl<T: Scalar> ChannelRealization<T> {
    /// Wraps explicit gains laid out as `[tx][user][k]`.
    pub fn from_gains(
        n_tx: usize,
        n_users: usize,
        n_sub: usize,
        pathloss_exponent: T,
        h: Vec<Complex<T>>,
    ) -> Self {
        assert_eq!(h.len(), n_tx * n_users * n_sub, "gain table shape");
        let gain2 = h.iter().map(|z| z.norm_sqr()).collect();
        Self {
            n_tx,
            n_users,
            n_sub,
            pathloss_exponent,
            h,
            gain2,
        }
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_sub
    }

    pub fn pathloss_exponent(&self) -> T {
        self.pathloss_exponent
    }

    #[inline]
    fn idx(&self, tx: usize, user: usize, k: usize) -> usize {
        (tx * self.n_users + user) * self.n_sub + k
    }

    fn check(&self, tx: usize, user: usize, k: usize) -> Result<usize> {
        if tx >= self.n_tx || user >= self.n_users || k >= self.n_sub {
            return Err(Error::UnknownLink { tx, user });
        }
        Ok(self.idx(tx, user, k))
    }

    pub fn h(&self, tx: usize, user: usize, k: usize) -> Result<Complex<T>> {
        Ok(self.h[self.check(tx, user, k)?])
    }

    /// Cached `|h_ijk|^2`.
    pub fn gain2(&self, tx: usize, user: usize, k: usize) -> Result<T> {
        Ok(self.gain2[self.check(tx, user, k)?])
    }

    #[inline]
    pub(crate) fn h_unchecked(&self, tx: usize, user: usize, k: usize) -> Complex<T> {
        self.h[self.idx(tx, user, k)]
    }

    #[inline]
    pub(crate) fn gain2_unchecked(&self, tx: usize, user: usize, k: usize) -> T {
        self.gain2[self.idx(tx, user, k)]
    }

    /// Writes one `tx_id,user_id,k,re,im` row per gain.
    pub fn to_columns(&self) -> String {
        let mut out = String::from("tx_id,user_id,k,re,im\n");
        for tx in 0..self.n_tx {
            for user in 0..self.n_users {
                for k in 0..self.n_sub {
                    let z = self.h_unchecked(tx, user, k);
                    let _ = writeln!(out, "{tx},{user},{k},{},{}", z.re, z.im);
                }
            }
        }
        out
    }

    /// Parses the output of [`ChannelRealization::to_columns`]; dimensions are
    /// inferred from the largest indices and every triple must be present once.
    pub fn from_columns(text: &str, pathloss_exponent: T, origin: &str) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse {
            path: origin.to_string(),
            line,
            msg,
        };
        let mut rows = Vec::new();
        let (mut n_tx, mut n_users, mut n_sub) = (0, 0, 0);
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("tx_id")) {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 5 {
                return Err(perr(i + 1, format!("expected 5 columns, got {}", f.len())));
            }
            let ix = |s: &str| s.parse::<usize>().map_err(|e| perr(i + 1, e.to_string()));
            let fx = |s: &str| s.parse::<f64>().map_err(|e| perr(i + 1, e.to_string()));
            let (tx, user, k) = (ix(f[0])?, ix(f[1])?, ix(f[2])?);
            n_tx = n_tx.max(tx + 1);
            n_users = n_users.max(user + 1);
            n_sub = n_sub.max(k + 1);
            rows.push((
                i + 1,
                tx,
                user,
                k,
                Complex::new(T::of(fx(f[3])?), T::of(fx(f[4])?)),
            ));
        }
        let mut h = vec![Complex::new(T::zero(), T::zero()); n_tx * n_users * n_sub];
        let mut seen = vec![false; h.len()];
        for (line, tx, user, k, z) in rows {
            let idx = (tx * n_users + user) * n_sub + k;
            if std::mem::replace(&mut seen[idx], true) {
                return Err(perr(line, format!("duplicate entry ({tx},{user},{k})")));
            }
            h[idx] = z;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(perr(0, format!("missing entry at flat index {missing}")));
        }
        Ok(Self::from_gains(n_tx, n_users, n_sub, pathloss_exponent, h))
    }

    pub fn dump(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_columns()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path, pathloss_exponent: T) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_columns(&text, pathloss_exponent, &path.display().to_string())
    }
}

/// Draws i.i.d. circularly-symmetric complex Gaussian gains with
/// `E|h|^2 = rayleigh_mean_power`.
pub fn sample_channels<T: Scalar>(
    d: &Deployment<T>,
    s: &Scenario<T>,
    seed: u64,
) -> ChannelRealization<T> {
    let mut rng = seed::rng(seed);
    let scale = (s.rayleigh_mean_power.as_f64() / 2.0).sqrt();
    let n = d.n_tx() * d.n_users() * s.n_subcarriers;
    let h = (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex::new(T::of(scale * re), T::of(scale * im))
        })
        .collect();
    ChannelRealization::from_gains(
        d.n_tx(),
        d.n_users(),
        s.n_subcarriers,
        s.pathloss_exponent,
        h,
    )
}

/// `|h_ijk|^2 p_ik d_ij^-alpha`.
pub fn rx_power<T: Scalar>(
    c: &ChannelRealization<T>,
    d: &Deployment<T>,
    tx: usize,
    user: usize,
    k: usize,
    p: T,
) -> Result<T> {
    let dist = d.distance(tx, user)?;
    Ok(c.gain2(tx, user, k)? * p * dist.powf(-c.pathloss_exponent))
}
