//! Network configuration, node placement and unit conversion.
//!
//! Everything past the configuration boundary is in linear units (watts, hertz,
//! metres). dBm is only accepted by [`dbm_to_watts`] and by the scenario file
//! loader.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::seed;

/// Lower clamp on every transmitter-user distance, in metres.
pub const D_MIN_M: f64 = 1.0;

pub fn dbm_to_watts<T: Scalar>(x_dbm: T) -> T {
    T::of(10.0).powf((x_dbm - T::of(30.0)) / T::of(10.0))
}

pub fn watts_to_dbm<T: Scalar>(x_w: T) -> T {
    T::of(10.0) * x_w.log10() + T::of(30.0)
}

/// Static description of the CRAN + HetNet system.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub n_rrh: usize,
    pub n_cran_users: usize,
    pub n_macro: usize,
    pub n_pico: usize,
    pub n_femto: usize,
    pub users_per_macro: usize,
    pub users_per_pico: usize,
    pub users_per_femto: usize,
    pub n_subcarriers: usize,
    pub bandwidth_hz: T,
    pub noise_power_w: T,
    pub pathloss_exponent: T,
    pub p_max_rrh_w: T,
    pub p_max_macro_w: T,
    pub p_max_pico_w: T,
    pub p_max_femto_w: T,
    pub grid_side_m: T,
    pub radius_macro_m: T,
    pub radius_pico_m: T,
    pub radius_femto_m: T,
    pub rayleigh_mean_power: T,
    pub ch_tau: T,
    pub ch_top_level: usize,
}

impl<T: Scalar> Default for Scenario<T> {
    /// The desk-scale profile.
    fn default() -> Self {
        Self {
            n_rrh: 4,
            n_cran_users: 8,
            n_macro: 1,
            n_pico: 2,
            n_femto: 2,
            users_per_macro: 6,
            users_per_pico: 4,
            users_per_femto: 2,
            n_subcarriers: 4,
            ..Self::full_scale()
        }
    }
}

impl<T: Scalar> Scenario<T> {
    /// The full-size configuration: 40 RRHs, 70 CRAN users, 100 MHz over 8 subcarriers.
    pub fn full_scale() -> Self {
        Self {
            n_rrh: 40,
            n_cran_users: 70,
            n_macro: 5,
            n_pico: 5,
            n_femto: 5,
            users_per_macro: 25,
            users_per_pico: 15,
            users_per_femto: 7,
            n_subcarriers: 8,
            bandwidth_hz: T::of(100e6),
            noise_power_w: dbm_to_watts(T::of(-90.8)),
            pathloss_exponent: T::of(3.0),
            p_max_rrh_w: dbm_to_watts(T::of(30.0)),
            p_max_macro_w: dbm_to_watts(T::of(37.0)),
            p_max_pico_w: dbm_to_watts(T::of(27.0)),
            p_max_femto_w: dbm_to_watts(T::of(20.0)),
            grid_side_m: T::of(3000.0),
            radius_macro_m: T::of(1000.0),
            radius_pico_m: T::of(150.0),
            radius_femto_m: T::of(10.0),
            rayleigh_mean_power: T::of(10.0),
            ch_tau: T::one(),
            ch_top_level: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidScenario(m.to_string()));
        for (name, n) in [
            ("n_rrh", self.n_rrh),
            ("n_cran_users", self.n_cran_users),
            ("users_per_macro", self.users_per_macro),
            ("users_per_pico", self.users_per_pico),
            ("users_per_femto", self.users_per_femto),
            ("n_subcarriers", self.n_subcarriers),
        ] {
            if n == 0 {
                return bad(&format!("{name} must be at least 1"));
            }
        }
        for (name, x) in [
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_power_w", self.noise_power_w),
            ("pathloss_exponent", self.pathloss_exponent),
            ("p_max_rrh_w", self.p_max_rrh_w),
            ("p_max_macro_w", self.p_max_macro_w),
            ("p_max_pico_w", self.p_max_pico_w),
            ("p_max_femto_w", self.p_max_femto_w),
            ("grid_side_m", self.grid_side_m),
            ("radius_macro_m", self.radius_macro_m),
            ("radius_pico_m", self.radius_pico_m),
            ("radius_femto_m", self.radius_femto_m),
            ("rayleigh_mean_power", self.rayleigh_mean_power),
            ("ch_tau", self.ch_tau),
        ] {
            if !(x.is_finite() && x > T::zero()) {
                return bad(&format!("{name} must be finite and > 0, got {x}"));
            }
        }
        if self.ch_top_level != 4 {
            return bad("ch_top_level must be 4 (femto=1, pico=2, macro=3, CRAN=4)");
        }
        Ok(())
    }

    pub fn w_over_l(&self) -> T {
        self.bandwidth_hz / T::of_usize(self.n_subcarriers)
    }

    pub fn p_max(&self, kind: TxKind) -> T {
        match kind {
            TxKind::Rrh => self.p_max_rrh_w,
            TxKind::Macro => self.p_max_macro_w,
            TxKind::Pico => self.p_max_pico_w,
            TxKind::Femto => self.p_max_femto_w,
        }
    }

    pub fn n_hetnet(&self) -> usize {
        self.n_macro + self.n_pico + self.n_femto
    }

    /// Sets one field from its textual form, as written in a scenario file.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn count(v: &str) -> std::result::Result<usize, String> {
            v.parse::<usize>()
                .map_err(|_| format!("expected a non-negative integer, got `{v}`"))
        }
        fn real<T: Scalar>(v: &str) -> std::result::Result<T, String> {
            let x: f64 = v
                .parse()
                .map_err(|_| format!("expected a number, got `{v}`"))?;
            if !x.is_finite() {
                return Err(format!("expected a finite number, got `{v}`"));
            }
            Ok(T::of(x))
        }
        fn power<T: Scalar>(v: &str) -> std::result::Result<T, String> {
            let lower = v.to_ascii_lowercase();
            if let Some(num) = lower.strip_suffix("dbm") {
                Ok(dbm_to_watts(real::<T>(num.trim())?))
            } else if let Some(num) = lower.strip_suffix('w') {
                real(num.trim())
            } else {
                real(v)
            }
        }
        match key {
            "n_rrh" => self.n_rrh = count(value)?,
            "n_cran_users" => self.n_cran_users = count(value)?,
            "n_macro" => self.n_macro = count(value)?,
            "n_pico" => self.n_pico = count(value)?,
            "n_femto" => self.n_femto = count(value)?,
            "users_per_macro" => self.users_per_macro = count(value)?,
            "users_per_pico" => self.users_per_pico = count(value)?,
            "users_per_femto" => self.users_per_femto = count(value)?,
            "n_subcarriers" => self.n_subcarriers = count(value)?,
            "bandwidth_hz" => self.bandwidth_hz = real(value)?,
            "noise_power_w" => self.noise_power_w = power(value)?,
            "pathloss_exponent" => self.pathloss_exponent = real(value)?,
            "p_max_rrh_w" => self.p_max_rrh_w = power(value)?,
            "p_max_macro_w" => self.p_max_macro_w = power(value)?,
            "p_max_pico_w" => self.p_max_pico_w = power(value)?,
            "p_max_femto_w" => self.p_max_femto_w = power(value)?,
            "grid_side_m" => self.grid_side_m = real(value)?,
            "radius_macro_m" => self.radius_macro_m = real(value)?,
            "radius_pico_m" => self.radius_pico_m = real(value)?,
            "radius_femto_m" => self.radius_femto_m = real(value)?,
            "rayleigh_mean_power" => self.rayleigh_mean_power = real(value)?,
            "ch_tau" => self.ch_tau = real(value)?,
            "ch_top_level" => self.ch_top_level = count(value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Parses `key = value` lines on top of the desk-scale defaults.
    pub fn parse_str(text: &str, origin: &str) -> Result<Self> {
        let mut s = Self::default();
        for (line, key, value) in kv_lines(text, origin)? {
            s.set(&key, &value).map_err(|msg| Error::Parse {
                path: origin.to_string(),
                line,
                msg,
            })?;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_str(&text, &path.display().to_string())
    }

    /// Inverse of [`Scenario::parse_str`]; powers written in watts.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("n_rrh", self.n_rrh.to_string());
        put("n_cran_users", self.n_cran_users.to_string());
        put("n_macro", self.n_macro.to_string());
        put("n_pico", self.n_pico.to_string());
        put("n_femto", self.n_femto.to_string());
        put("users_per_macro", self.users_per_macro.to_string());
        put("users_per_pico", self.users_per_pico.to_string());
        put("users_per_femto", self.users_per_femto.to_string());
        put("n_subcarriers", self.n_subcarriers.to_string());
        put("bandwidth_hz", self.bandwidth_hz.to_string());
        put("noise_power_w", format!("{} w", self.noise_power_w));
        put("pathloss_exponent", self.pathloss_exponent.to_string());
        put("p_max_rrh_w", format!("{} w", self.p_max_rrh_w));
        put("p_max_macro_w", format!("{} w", self.p_max_macro_w));
        put("p_max_pico_w", format!("{} w", self.p_max_pico_w));
        put("p_max_femto_w", format!("{} w", self.p_max_femto_w));
        put("grid_side_m", self.grid_side_m.to_string());
        put("radius_macro_m", self.radius_macro_m.to_string());
        put("radius_pico_m", self.radius_pico_m.to_string());
        put("radius_femto_m", self.radius_femto_m.to_string());
        put("rayleigh_mean_power", self.rayleigh_mean_power.to_string());
        put("ch_tau", self.ch_tau.to_string());
        put("ch_top_level", self.ch_top_level.to_string());
        out
    }
}

/// Splits a `key = value` text into `(line number, key, value)` triples.
/// Blank lines and `#` comments are skipped.
pub(crate) fn kv_lines(text: &str, origin: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: idx + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            });
        };
        out.push((idx + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TxKind {
    Rrh,
    Macro,
    Pico,
    Femto,
}

impl TxKind {
    pub fn name(self) -> &'static str {
        match self {
            TxKind::Rrh => "RRH",
            TxKind::Macro => "Macro",
            TxKind::Pico => "Pico",
            TxKind::Femto => "Femto",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transmitter<T> {
    pub id: usize,
    pub kind: TxKind,
    pub position: (T, T),
    pub p_max_w: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Owner {
    Cran,
    /// Transmitter id of the serving BS.
    Bs(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct User<T> {
    pub id: usize,
    pub owner: Owner,
    pub position: (T, T),
}

/// Sampled positions of every node.
///
/// Transmitter ids are RRHs first, then macro, pico and femto BSs. User ids are
/// CRAN users first, then each BS's users in BS order.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment<T> {
    pub transmitters: Vec<Transmitter<T>>,
    pub users: Vec<User<T>>,
    distance: Vec<T>,
}

impl<T: Scalar> Deployment<T> {
    /// Builds a deployment from explicit positions, computing clamped distances.
    pub fn from_positions(transmitters: Vec<Transmitter<T>>, users: Vec<User<T>>) -> Self {
        let d_min = T::of(D_MIN_M);
        let mut distance = Vec::with_capacity(transmitters.len() * users.len());
        for t in &transmitters {
            for u in &users {
                let dx = t.position.0 - u.position.0;
                let dy = t.position.1 - u.position.1;
                distance.push(dx.hypot(dy).max(d_min));
            }
        }
        Self {
            transmitters,
            users,
            distance,
        }
    }

    pub fn n_tx(&self) -> usize {
        self.transmitters.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// Clamped distance `d_ij` in metres.
    pub fn distance(&self, tx: usize, user: usize) -> Result<T> {
        if tx >= self.n_tx() || user >= self.n_users() {
            return Err(Error::UnknownLink { tx, user });
        }
        Ok(self.distance[tx * self.n_users() + user])
    }

    pub(crate) fn distance_unchecked(&self, tx: usize, user: usize) -> T {
        self.distance[tx * self.n_users() + user]
    }

    pub fn rrh_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.transmitters
            .iter()
            .filter(|t| t.kind == TxKind::Rrh)
            .map(|t| t.id)
    }

    pub fn bs_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.transmitters
            .iter()
            .filter(|t| t.kind != TxKind::Rrh)
            .map(|t| t.id)
    }

    pub fn users_of(&self, owner: Owner) -> impl Iterator<Item = usize> + '_ {
        self.users
            .iter()
            .filter(move |u| u.owner == owner)
            .map(|u| u.id)
    }
}

/// Uniform placement of RRHs, BSs and CRAN users on the grid; HetNet users
/// uniform in the coverage disc of their BS.
pub fn sample_deployment<T: Scalar>(s: &Scenario<T>, seed: u64) -> Deployment<T> {
    let mut rng = seed::rng(seed);
    let side = s.grid_side_m.as_f64();
    let square = Uniform::new(0.0, side).expect("grid side > 0");
    let in_square = |rng: &mut seed::Rng| (square.sample(rng), square.sample(rng));

    let mut transmitters = Vec::new();
    let groups = [
        (TxKind::Rrh, s.n_rrh),
        (TxKind::Macro, s.n_macro),
        (TxKind::Pico, s.n_pico),
        (TxKind::Femto, s.n_femto),
    ];
    for (kind, n) in groups {
        for _ in 0..n {
            let id = transmitters.len();
            transmitters.push(Transmitter {
                id,
                kind,
                position: in_square(&mut rng),
                p_max_w: s.p_max(kind).as_f64(),
            });
        }
    }

    let mut users = Vec::new();
    for _ in 0..s.n_cran_users {
        let id = users.len();
        users.push(User {
            id,
            owner: Owner::Cran,
            position: in_square(&mut rng),
        });
    }
    for t in transmitters.iter().filter(|t| t.kind != TxKind::Rrh) {
        let (n, radius) = match t.kind {
            TxKind::Macro => (s.users_per_macro, s.radius_macro_m),
            TxKind::Pico => (s.users_per_pico, s.radius_pico_m),
            TxKind::Femto => (s.users_per_femto, s.radius_femto_m),
            TxKind::Rrh => unreachable!(),
        };
        let radius = radius.as_f64();
        for _ in 0..n {
            let r = radius * rng.random::<f64>().sqrt();
            let theta = std::f64::consts::TAU * rng.random::<f64>();
            let id = users.len();
            users.push(User {
                id,
                owner: Owner::Bs(t.id),
                position: (
                    t.position.0 + r * theta.cos(),
                    t.position.1 + r * theta.sin(),
                ),
            });
        }
    }
    Deployment::<f64>::from_positions(transmitters, users).cast()
}

impl Deployment<f64> {
    /// Converts coordinates into another scalar type.
    pub fn cast<U: Scalar>(&self) -> Deployment<U> {
        Deployment {
            transmitters: self
                .transmitters
                .iter()
                .map(|t| Transmitter {
                    id: t.id,
                    kind: t.kind,
                    position: (U::of(t.position.0), U::of(t.position.1)),
                    p_max_w: U::of(t.p_max_w),
                })
                .collect(),
            users: self
                .users
                .iter()
                .map(|u| User {
                    id: u.id,
                    owner: u.owner,
                    position: (U::of(u.position.0), U::of(u.position.1)),
                })
                .collect(),
            distance: self.distance.iter().map(|&d| U::of(d)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_conversions() {
        assert_eq!(dbm_to_watts(30.0_f64), 1.0);
        assert!((dbm_to_watts(0.0_f64) - 1e-3).abs() < 1e-18);
        // 10^(-12.08) evaluated independently: 8.317637711026709e-13
        let w = dbm_to_watts(-90.8_f64);
        assert!((w - 8.317_637_711_026_709e-13).abs() / w < 1e-12);
    }

    #[test]
    fn watts_dbm_round_trip() {
        for x in [-120.0_f64, -90.8, -3.3, 0.0, 20.0, 37.0, 60.5] {
            assert!((watts_to_dbm(dbm_to_watts(x)) - x).abs() < 1e-12, "{x}");
        }
    }

    #[test]
    fn default_is_valid_and_desk_scale() {
        let s = Scenario::<f64>::default();
        s.validate().unwrap();
        assert_eq!((s.n_rrh, s.n_cran_users, s.n_subcarriers), (4, 8, 4));
        assert_eq!((s.n_macro, s.n_pico, s.n_femto), (1, 2, 2));
        Scenario::<f64>::full_scale().validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut s = Scenario::<f64>::default();
        s.n_rrh = 0;
        assert!(s.validate().is_err());
        let mut s = Scenario::<f64>::default();
        s.ch_tau = 0.0;
        assert!(s.validate().is_err());
        let mut s = Scenario::<f64>::default();
        s.pathloss_exponent = -1.0;
        assert!(s.validate().is_err());
        let mut s = Scenario::<f64>::default();
        s.n_macro = 0;
        s.n_pico = 0;
        s.n_femto = 0;
        assert!(s.validate().is_ok());
    }

    #[test]
    fn parse_file_with_units_and_comments() {
        let text = "# desk\nn_rrh = 6\np_max_rrh_w = 33 dbm  # boosted\np_max_femto_w = 0.2 w\nnoise_power_w = 1e-12\n\n";
        let s = Scenario::<f64>::parse_str(text, "t").unwrap();
        assert_eq!(s.n_rrh, 6);
        assert!((s.p_max_rrh_w - dbm_to_watts(33.0)).abs() < 1e-15);
        assert_eq!(s.p_max_femto_w, 0.2);
        assert_eq!(s.noise_power_w, 1e-12);
    }

    #[test]
    fn parse_rejects_unknown_and_malformed() {
        let e = Scenario::<f64>::parse_str("n_rrh = 2\nfoo = 1\n", "cfg").unwrap_err();
        assert!(e.to_string().contains("cfg:2"), "{e}");
        assert!(Scenario::<f64>::parse_str("n_rrh 2\n", "cfg").is_err());
        assert!(Scenario::<f64>::parse_str("n_rrh = -2\n", "cfg").is_err());
        assert!(Scenario::<f64>::parse_str("ch_tau = 0\n", "cfg").is_err());
    }

    #[test]
    fn kv_round_trip() {
        let s = Scenario::<f64>::full_scale();
        let back = Scenario::<f64>::parse_str(&s.to_kv_string(), "rt").unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = Scenario::<f64>::default();
        assert_eq!(sample_deployment(&s, 7), sample_deployment(&s, 7));
        assert_ne!(sample_deployment(&s, 7), sample_deployment(&s, 8));
    }

    #[test]
    fn macro_users_inside_coverage() {
        let s = Scenario::<f64> {
            n_macro: 1,
            users_per_macro: 25,
            radius_macro_m: 1000.0,
            ..Default::default()
        };
        let d = sample_deployment(&s, 3);
        let macro_id = d
            .transmitters
            .iter()
            .find(|t| t.kind == TxKind::Macro)
            .unwrap()
            .id;
        let users: Vec<_> = d.users_of(Owner::Bs(macro_id)).collect();
        assert_eq!(users.len(), 25);
        for u in users {
            assert!(d.distance(macro_id, u).unwrap() <= 1000.0);
        }
    }

    #[test]
    fn geometry_invariants() {
        let s = Scenario::<f64>::default();
        for seed in 0..20 {
            let d = sample_deployment(&s, seed);
            assert_eq!(d.n_tx(), s.n_rrh + s.n_hetnet());
            assert_eq!(
                d.n_users(),
                s.n_cran_users
                    + s.n_macro * s.users_per_macro
                    + s.n_pico * s.users_per_pico
                    + s.n_femto * s.users_per_femto
            );
            for t in &d.transmitters {
                for u in &d.users {
                    let dist = d.distance(t.id, u.id).unwrap();
                    let euclid = (t.position.0 - u.position.0).hypot(t.position.1 - u.position.1);
                    assert!(dist >= D_MIN_M);
                    assert_eq!(dist, euclid.max(D_MIN_M));
                    if u.owner == Owner::Bs(t.id) {
                        let r = match t.kind {
                            TxKind::Macro => s.radius_macro_m,
                            TxKind::Pico => s.radius_pico_m,
                            TxKind::Femto => s.radius_femto_m,
                            TxKind::Rrh => unreachable!(),
                        };
                        assert!(euclid <= r + 1e-9);
                    }
                }
            }
        }
        assert!(matches!(
            sample_deployment(&s, 0).distance(99, 0),
            Err(Error::UnknownLink { .. })
        ));
    }

    #[test]
    fn cran_users_uniform_on_square() {
        // Mean distance from the centre of a unit square to a uniform point:
        // (sqrt(2) + ln(1 + sqrt(2))) / 6.
        let s = Scenario::<f64> {
            n_cran_users: 1,
            ..Default::default()
        };
        let c = s.grid_side_m / 2.0;
        let n = 10_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for seed in 0..n {
            let d = sample_deployment(&s, seed);
            let u = &d.users[0];
            let r = (u.position.0 - c).hypot(u.position.1 - c);
            sum += r;
            sum_sq += r * r;
        }
        let mean = sum / n as f64;
        let std = (sum_sq / n as f64 - mean * mean).sqrt();
        let expect = s.grid_side_m * (2f64.sqrt() + (1.0 + 2f64.sqrt()).ln()) / 6.0;
        assert!(
            (mean - expect).abs() < 4.0 * std / (n as f64).sqrt(),
            "{mean} vs {expect}"
        );
    }
}
