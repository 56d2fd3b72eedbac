//! Monte Carlo sweeps over one scenario parameter, aggregated per player class
//! and written as CSV.
//!
//! Every cell (value index, realization) gets its own seed derived from the base
//! seed, so results do not depend on scheduling. Cells run in parallel and are
//! merged in cell order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::channel::sample_channels;
use crate::equilibrium::{
    solve_che, solve_equal_power, solve_ne, Concept, EquilibriumResult, NeOptions, PlayerKind,
};
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::rates::Network;
use crate::scenario::{kv_lines, sample_deployment, Scenario};
use crate::seed::{derive_seed, STREAM_CHANNEL, STREAM_DEPLOYMENT};

/// Samples the deployment and channels of one realization and builds its network.
pub fn realize<T: Scalar>(s: &Scenario<T>, seed: u64) -> Result<Network<T>> {
    s.validate()?;
    let d = sample_deployment(s, derive_seed(seed, &[STREAM_DEPLOYMENT]));
    let c = sample_channels(&d, s, derive_seed(seed, &[STREAM_CHANNEL]));
    Network::build(s, &d, &c)
}

/// Solves `net` under `concept`.
pub fn solve_concept<T: Scalar>(
    net: &Network<T>,
    concept: Concept,
    opts: &NeOptions<T>,
) -> Result<EquilibriumResult<T>> {
    match concept {
        Concept::Ne => solve_ne(net, opts),
        Concept::Che => solve_che(net, &opts.solver).map(|(r, _)| r),
        Concept::EqualPower => Ok(solve_equal_power(net)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SweepVariable {
    NRrh,
    PMaxRrh,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::NRrh => "n_rrh",
            SweepVariable::PMaxRrh => "p_max_rrh",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "n_rrh" => Some(SweepVariable::NRrh),
            "p_max_rrh" | "p_max_rrh_w" => Some(SweepVariable::PMaxRrh),
            _ => None,
        }
    }
}

/// Row class of a sweep: one player kind, or the whole system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowKind {
    Cran,
    Macro,
    Pico,
    Femto,
    Total,
}

impl RowKind {
    pub const ALL: [RowKind; 5] = [
        RowKind::Cran,
        RowKind::Macro,
        RowKind::Pico,
        RowKind::Femto,
        RowKind::Total,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RowKind::Cran => "CRAN",
            RowKind::Macro => "Macro",
            RowKind::Pico => "Pico",
            RowKind::Femto => "Femto",
            RowKind::Total => "Total",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn player(self) -> Option<PlayerKind> {
        match self {
            RowKind::Cran => Some(PlayerKind::Cran),
            RowKind::Macro => Some(PlayerKind::Macro),
            RowKind::Pico => Some(PlayerKind::Pico),
            RowKind::Femto => Some(PlayerKind::Femto),
            RowKind::Total => None,
        }
    }
}

impl From<PlayerKind> for RowKind {
    fn from(k: PlayerKind) -> Self {
        match k {
            PlayerKind::Cran => RowKind::Cran,
            PlayerKind::Macro => RowKind::Macro,
            PlayerKind::Pico => RowKind::Pico,
            PlayerKind::Femto => RowKind::Femto,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec<T> {
    pub variable: SweepVariable,
    /// Swept values; RRH counts are whole numbers, RRH budgets are in watts.
    pub values: Vec<T>,
    pub n_realizations: usize,
    pub seed: u64,
    pub concepts: Vec<Concept>,
    /// Base scenario; the swept field is overwritten per value.
    pub scenario: Scenario<T>,
    pub options: NeOptions<T>,
}

impl<T: Scalar> SweepSpec<T> {
    pub fn new(variable: SweepVariable, values: Vec<T>, scenario: Scenario<T>) -> Self {
        Self {
            variable,
            values,
            n_realizations: 50,
            seed: 0,
            concepts: vec![Concept::Ne, Concept::Che, Concept::EqualPower],
            scenario,
            options: NeOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSweep(m));
        if self.values.is_empty() {
            return bad("no sweep values".into());
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("sweep values must be strictly increasing".into());
        }
        if self.n_realizations == 0 {
            return bad("need at least one realization".into());
        }
        if self.concepts.is_empty() {
            return bad("no concepts requested".into());
        }
        let mut seen = self.concepts.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.concepts.len() {
            return bad("concepts listed twice".into());
        }
        for &v in &self.values {
            match self.variable {
                SweepVariable::NRrh => {
                    if v < T::one() || v.fract() != T::zero() {
                        return bad(format!("n_rrh values must be positive integers, got {v}"));
                    }
                }
                SweepVariable::PMaxRrh => {
                    if !(v > T::zero()) || !v.is_finite() {
                        return bad(format!("p_max_rrh values must be positive, got {v}"));
                    }
                }
            }
        }
        self.scenario.validate()
    }

    /// Scenario for the `idx`-th swept value.
    pub fn scenario_at(&self, idx: usize) -> Scenario<T> {
        let mut s = self.scenario.clone();
        let v = self.values[idx];
        match self.variable {
            SweepVariable::NRrh => s.n_rrh = v.to_usize().expect("validated count"),
            SweepVariable::PMaxRrh => s.p_max_rrh_w = v,
        }
        s
    }

    /// Seed of realization `r` at value index `value_idx`.
    pub fn cell_seed(&self, value_idx: usize, r: usize) -> u64 {
        derive_seed(self.seed, &[value_idx as u64, r as u64])
    }

    /// Parses a `key = value` spec. Sweep keys are `variable`, `values`
    /// (comma-separated; RRH budgets accept a `dbm` or `w` suffix),
    /// `realizations`, `seed` and `concepts`; any other key overrides the
    /// desk-scale scenario.
    pub fn parse_str(text: &str, origin: &str) -> Result<Self> {
        Self::parse_with_base(text, origin, Scenario::default())
    }

    /// As [`SweepSpec::parse_str`], with scenario overrides applied to `base`.
    pub fn parse_with_base(text: &str, origin: &str, base: Scenario<T>) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse {
            path: origin.to_string(),
            line,
            msg,
        };
        let mut variable = None;
        let mut raw_values: Option<(usize, String)> = None;
        let mut spec = Self::new(SweepVariable::NRrh, Vec::new(), base);
        for (line, key, value) in kv_lines(text, origin)? {
            match key.as_str() {
                "variable" => {
                    variable =
                        Some(SweepVariable::parse(&value).ok_or_else(|| {
                            perr(line, format!("unknown sweep variable `{value}`"))
                        })?)
                }
                "values" => raw_values = Some((line, value)),
                "realizations" => {
                    spec.n_realizations = value
                        .parse()
                        .map_err(|_| perr(line, format!("expected a count, got `{value}`")))?
                }
                "seed" => {
                    spec.seed = value
                        .parse()
                        .map_err(|_| perr(line, format!("expected a u64 seed, got `{value}`")))?
                }
                "concepts" => {
                    spec.concepts = value
                        .split(',')
                        .map(|c| {
                            Concept::parse(c).ok_or_else(|| {
                                perr(line, format!("unknown concept `{}`", c.trim()))
                            })
                        })
                        .collect::<Result<_>>()?
                }
                _ => spec.scenario.set(&key, &value).map_err(|m| perr(line, m))?,
            }
        }
        spec.variable = variable.ok_or_else(|| perr(0, "missing `variable`".into()))?;
        let (line, raw) = raw_values.ok_or_else(|| perr(0, "missing `values`".into()))?;
        let field = match spec.variable {
            SweepVariable::NRrh => "n_rrh",
            SweepVariable::PMaxRrh => "p_max_rrh_w",
        };
        for item in raw.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            // reuse the scenario's unit handling
            let mut probe = Scenario::<T>::default();
            probe.set(field, item).map_err(|m| perr(line, m))?;
            spec.values.push(match spec.variable {
                SweepVariable::NRrh => T::of_usize(probe.n_rrh),
                SweepVariable::PMaxRrh => probe.p_max_rrh_w,
            });
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path, base: Scenario<T>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_with_base(&text, &path.display().to_string(), base)
    }
}

/// What one concept produced on one realization.
#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome<T> {
    Solved {
        /// Mean realized rate per player of each class present, plus `Total`.
        means: BTreeMap<RowKind, T>,
        /// Summed realized rate of each class present, plus `Total`.
        totals: BTreeMap<RowKind, T>,
        converged: bool,
    },
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord<T> {
    pub value_idx: usize,
    pub realization: usize,
    pub concept: Concept,
    pub outcome: CellOutcome<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T> {
    pub variable: SweepVariable,
    pub value: T,
    pub concept: Concept,
    pub kind: RowKind,
    pub mean: T,
    /// Sample standard deviation across realizations; zero for a single sample.
    pub std: T,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult<T> {
    pub variable: SweepVariable,
    pub values: Vec<T>,
    /// Sorted by value, concept, kind.
    pub rows: Vec<SweepRow<T>>,
    /// Every (value, realization, concept) outcome in cell order.
    pub cells: Vec<CellRecord<T>>,
    /// Realizations skipped because a solver failed, per (value index, concept).
    pub failures: BTreeMap<(usize, Concept), usize>,
    /// Nash runs that hit the sweep limit, per (value index, concept).
    pub non_converged: BTreeMap<(usize, Concept), usize>,
}

/// Welford accumulator.
#[derive(Debug, Clone, Copy)]
struct Running<T> {
    n: usize,
    mean: T,
    m2: T,
}

impl<T: Scalar> Running<T> {
    fn new() -> Self {
        Self {
            n: 0,
            mean: T::zero(),
            m2: T::zero(),
        }
    }

    fn push(&mut self, x: T) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / T::of_usize(self.n);
        self.m2 += d * (x - self.mean);
    }

    fn std(&self) -> T {
        if self.n < 2 {
            T::zero()
        } else {
            (self.m2 / T::of_usize(self.n - 1)).sqrt()
        }
    }
}

fn solve_cell<T: Scalar>(
    net: &Result<Network<T>>,
    concept: Concept,
    opts: &NeOptions<T>,
) -> CellOutcome<T> {
    let net = match net {
        Ok(n) => n,
        Err(e) => return CellOutcome::Failed(e.to_string()),
    };
    match solve_concept(net, concept, opts) {
        Ok(res) => {
            let mut means: BTreeMap<RowKind, T> = res
                .per_type_rates
                .iter()
                .map(|(&k, &v)| (k.into(), v))
                .collect();
            let mut totals: BTreeMap<RowKind, T> = res
                .per_type_totals
                .iter()
                .map(|(&k, &v)| (k.into(), v))
                .collect();
            means.insert(RowKind::Total, res.total_rate);
            totals.insert(RowKind::Total, res.total_rate);
            CellOutcome::Solved {
                means,
                totals,
                converged: res.converged,
            }
        }
        Err(e) => CellOutcome::Failed(e.to_string()),
    }
}

/// Runs every (value, realization) cell and aggregates per (value, concept, kind).
///
/// Kind rows average the per-player mean rate of that class; `Total` rows
/// average the system sum rate.
pub fn run_sweep<T: Scalar>(spec: &SweepSpec<T>) -> Result<SweepResult<T>> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.values.len())
        .flat_map(|v| (0..spec.n_realizations).map(move |r| (v, r)))
        .collect();
    let cells: Vec<CellRecord<T>> = jobs
        .par_iter()
        .flat_map_iter(|&(v, r)| {
            let net = realize(&spec.scenario_at(v), spec.cell_seed(v, r));
            spec.concepts
                .iter()
                .map(|&concept| CellRecord {
                    value_idx: v,
                    realization: r,
                    concept,
                    outcome: solve_cell(&net, concept, &spec.options),
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let mut acc: BTreeMap<(usize, Concept, RowKind), Running<T>> = BTreeMap::new();
    let mut failures = BTreeMap::new();
    let mut non_converged = BTreeMap::new();
    for cell in &cells {
        match &cell.outcome {
            CellOutcome::Solved {
                means, converged, ..
            } => {
                for (&kind, &x) in means {
                    acc.entry((cell.value_idx, cell.concept, kind))
                        .or_insert_with(Running::new)
                        .push(x);
                }
                if !converged {
                    *non_converged
                        .entry((cell.value_idx, cell.concept))
                        .or_insert(0) += 1;
                }
            }
            CellOutcome::Failed(_) => {
                *failures.entry((cell.value_idx, cell.concept)).or_insert(0) += 1;
            }
        }
    }
    let rows = acc
        .into_iter()
        .map(|((v, concept, kind), run)| SweepRow {
            variable: spec.variable,
            value: spec.values[v],
            concept,
            kind,
            mean: run.mean,
            std: run.std(),
            n: run.n,
        })
        .collect();
    Ok(SweepResult {
        variable: spec.variable,
        values: spec.values.clone(),
        rows,
        cells,
        failures,
        non_converged,
    })
}

impl<T: Scalar> SweepResult<T> {
    pub fn row(&self, value_idx: usize, concept: Concept, kind: RowKind) -> Option<&SweepRow<T>> {
        let v = *self.values.get(value_idx)?;
        self.rows
            .iter()
            .find(|r| r.value == v && r.concept == concept && r.kind == kind)
    }

    /// Outcomes of `concept` at value index `value_idx`, by realization.
    pub fn cells_of(
        &self,
        value_idx: usize,
        concept: Concept,
    ) -> impl Iterator<Item = &CellRecord<T>> {
        self.cells
            .iter()
            .filter(move |c| c.value_idx == value_idx && c.concept == concept)
    }
}

pub const CSV_HEADER: &str = "variable,value,concept,kind,mean_rate_bps,std_rate_bps,n";

/// Renders rows as CSV; floats use the shortest representation that reads back
/// to the same value.
pub fn to_csv<T: Scalar>(rows: &[SweepRow<T>]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.variable.name(),
            r.value,
            r.concept.name(),
            r.kind.name(),
            r.mean,
            r.std,
            r.n
        );
    }
    out
}

pub fn emit_csv<T: Scalar>(result: &SweepResult<T>, path: &Path) -> Result<()> {
    std::fs::write(path, to_csv(&result.rows)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Inverse of [`to_csv`].
pub fn parse_csv<T: Scalar + std::str::FromStr>(
    text: &str,
    origin: &str,
) -> Result<Vec<SweepRow<T>>> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(perr(1, format!("expected header `{CSV_HEADER}`"))),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(perr(idx + 1, format!("expected 7 fields, got {}", f.len())));
        }
        let num = |s: &str| {
            s.parse::<T>()
                .map_err(|_| perr(idx + 1, format!("expected a number, got `{s}`")))
        };
        rows.push(SweepRow {
            variable: SweepVariable::parse(f[0])
                .ok_or_else(|| perr(idx + 1, format!("unknown variable `{}`", f[0])))?,
            value: num(f[1])?,
            concept: Concept::parse(f[2])
                .ok_or_else(|| perr(idx + 1, format!("unknown concept `{}`", f[2])))?,
            kind: RowKind::parse(f[3])
                .ok_or_else(|| perr(idx + 1, format!("unknown kind `{}`", f[3])))?,
            mean: num(f[4])?,
            std: num(f[5])?,
            n: f[6]
                .parse()
                .map_err(|_| perr(idx + 1, format!("expected a count, got `{}`", f[6])))?,
        });
    }
    Ok(rows)
}
