//! Monte Carlo success table `p̂(a; Λ)` over the action set and a load grid.
//!
//! Every (action, load) cell draws its frames from its own random stream, so
//! the table is identical whatever the degree of parallelism, and running
//! more trials with the same seed extends each cell's sample rather than
//! replacing it.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::action::{action_set, Action};
use crate::config::{ConfigError, SystemConfig};
use crate::phy::{frame_success, PhyError};
use crate::rng::stream_rng;
use crate::TOOL_VERSION;

pub const TABLE_HEADER: &str = "lambda,d,q,p_hat,trials";

#[derive(Debug, Error)]
pub enum TableError {
    #[error("load grid is empty")]
    EmptyGrid,
    #[error("load grid must be nonnegative and strictly increasing")]
    GridNotIncreasing,
    #[error("trials must be at least 1")]
    ZeroTrials,
    #[error("action {0} is not in the table")]
    UnknownAction(Action),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error("table schema error at line {line}: {reason}")]
    Schema { line: usize, reason: String },
    #[error("table was calibrated for config {found}, current config is {expected}")]
    DigestMismatch { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// `{0, step, 2 step, ...}` up to and including `max` when it falls on the grid.
pub fn default_load_grid(max: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0, "grid step must be positive");
    let points = (max / step + 1e-9).floor() as usize;
    (0..=points).map(|i| i as f64 * step).collect()
}

fn check_grid(grid: &[f64]) -> Result<(), TableError> {
    if grid.is_empty() {
        return Err(TableError::EmptyGrid);
    }
    let increasing = grid.windows(2).all(|w| w[0] < w[1]);
    if !increasing || !grid[0].is_finite() || grid[0] < 0.0 {
        return Err(TableError::GridNotIncreasing);
    }
    Ok(())
}

/// Calibrated success law.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessTable {
    pub load_grid: Vec<f64>,
    pub actions: Vec<Action>,
    /// `p_hat[action][grid point]`.
    pub p_hat: Vec<Vec<f64>>,
    pub trials: u64,
    pub seed: u64,
    pub cfg_digest: String,
}

/// Estimates `p̂(a; Λ)` for every action and grid load from `trials` frames
/// per cell.
pub fn calibrate_table(
    cfg: &SystemConfig,
    load_grid: &[f64],
    trials: u64,
    seed: u64,
) -> Result<SuccessTable, TableError> {
    cfg.validate()?;
    check_grid(load_grid)?;
    if trials == 0 {
        return Err(TableError::ZeroTrials);
    }
    let actions = action_set(cfg.max_reps, cfg.pools);
    let cols = load_grid.len();
    let cells: Vec<(usize, usize)> = (0..actions.len())
        .flat_map(|a| (0..cols).map(move |g| (a, g)))
        .collect();

    let estimates: Vec<f64> = cells
        .par_iter()
        .map(|&(a, g)| {
            let action = actions[a];
            if action.is_idle() {
                return Ok(0.0);
            }
            let mut rng = stream_rng(seed, (a * cols + g) as u64);
            let mut successes = 0u64;
            for _ in 0..trials {
                successes += u64::from(frame_success(action, load_grid[g], cfg, &mut rng)?);
            }
            Ok(successes as f64 / trials as f64)
        })
        .collect::<Result<_, PhyError>>()?;

    Ok(SuccessTable {
        load_grid: load_grid.to_vec(),
        p_hat: estimates.chunks(cols).map(<[f64]>::to_vec).collect(),
        actions,
        trials,
        seed,
        cfg_digest: cfg.digest(),
    })
}

impl SuccessTable {
    pub fn action_index(&self, action: Action) -> Option<usize> {
        self.actions.iter().position(|&a| a == action)
    }

    pub fn row(&self, action: Action) -> Option<&[f64]> {
        self.action_index(action).map(|i| self.p_hat[i].as_slice())
    }

    /// Piecewise-linear interpolation in `Λ`, clamped to the end values
    /// outside the grid. The idle action always returns 0.
    pub fn success_prob(&self, action: Action, lambda: f64) -> Result<f64, TableError> {
        let row = self.row(action).ok_or(TableError::UnknownAction(action))?;
        if action.is_idle() {
            return Ok(0.0);
        }
        Ok(interpolate(&self.load_grid, row, lambda))
    }

    /// `p̂(a; Λ)` for every action of the table, in table order.
    pub fn success_probs(&self, lambda: f64) -> Vec<f64> {
        self.actions
            .iter()
            .zip(&self.p_hat)
            .map(|(a, row)| {
                if a.is_idle() {
                    0.0
                } else {
                    interpolate(&self.load_grid, row, lambda)
                }
            })
            .collect()
    }

    pub fn max_load(&self) -> f64 {
        *self.load_grid.last().expect("nonempty grid")
    }

    pub fn check_digest(&self, cfg: &SystemConfig) -> Result<(), TableError> {
        let expected = cfg.digest();
        if expected == self.cfg_digest {
            Ok(())
        } else {
            Err(TableError::DigestMismatch {
                expected,
                found: self.cfg_digest.clone(),
            })
        }
    }

    /// Serializes to the comma-separated table format. Values use the
    /// shortest decimal form that parses back to the identical `f64`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# seed={}", self.seed).unwrap();
        writeln!(out, "# cfg_digest={}", self.cfg_digest).unwrap();
        writeln!(out, "# version={TOOL_VERSION}").unwrap();
        writeln!(out, "{TABLE_HEADER}").unwrap();
        for (g, lambda) in self.load_grid.iter().enumerate() {
            for (a, action) in self.actions.iter().enumerate() {
                writeln!(
                    out,
                    "{lambda},{},{},{},{}",
                    action.d, action.q, self.p_hat[a][g], self.trials
                )
                .unwrap();
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, TableError> {
        parse_table(text)
    }

    pub fn save(&self, path: &Path) -> Result<(), TableError> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TableError> {
        parse_table(&fs::read_to_string(path)?)
    }
}

pub(crate) fn interpolate(grid: &[f64], values: &[f64], x: f64) -> f64 {
    let last = grid.len() - 1;
    if x <= grid[0] {
        return values[0];
    }
    if x >= grid[last] {
        return values[last];
    }
    let hi = grid.partition_point(|&g| g <= x);
    let lo = hi - 1;
    let t = (x - grid[lo]) / (grid[hi] - grid[lo]);
    values[lo] + t * (values[hi] - values[lo])
}

fn schema(line: usize, reason: impl Into<String>) -> TableError {
    TableError::Schema {
        line,
        reason: reason.into(),
    }
}

fn parse_field<T: std::str::FromStr>(line: usize, name: &str, raw: &str) -> Result<T, TableError> {
    raw.trim()
        .parse()
        .map_err(|_| schema(line, format!("cannot parse {name} from {raw:?}")))
}

fn parse_table(text: &str) -> Result<SuccessTable, TableError> {
    let mut seed = None;
    let mut digest = None;
    let mut header_seen = false;
    let mut rows: Vec<(usize, f64, Action, f64, u64)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((key, value)) = comment.trim().split_once('=') {
                match key.trim() {
                    "seed" => seed = Some(parse_field::<u64>(line, "seed", value)?),
                    "cfg_digest" => digest = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            continue;
        }
        if !header_seen {
            if trimmed != TABLE_HEADER {
                return Err(schema(line, format!("expected header {TABLE_HEADER:?}")));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 5 {
            return Err(schema(line, format!("expected 5 fields, found {}", fields.len())));
        }
        let lambda: f64 = parse_field(line, "lambda", fields[0])?;
        let d: u32 = parse_field(line, "d", fields[1])?;
        let q: u32 = parse_field(line, "q", fields[2])?;
        let p: f64 = parse_field(line, "p_hat", fields[3])?;
        let trials: u64 = parse_field(line, "trials", fields[4])?;
        if !(0.0..=1.0).contains(&p) {
            return Err(schema(line, format!("p_hat {p} outside [0, 1]")));
        }
        rows.push((line, lambda, Action::new(d, q), p, trials));
    }

    let end = text.lines().count();
    let seed = seed.ok_or_else(|| schema(end, "missing '# seed=' comment"))?;
    let cfg_digest = digest.ok_or_else(|| schema(end, "missing '# cfg_digest=' comment"))?;
    if !header_seen {
        return Err(schema(end, "missing header"));
    }
    let Some(&(_, first_lambda, _, _, trials)) = rows.first() else {
        return Err(schema(end, "table has no data rows"));
    };
    if trials == 0 {
        return Err(schema(rows[0].0, "trials must be at least 1"));
    }

    let actions: Vec<Action> = rows.iter().take_while(|r| r.1 == first_lambda).map(|r| r.2).collect();
    let n_actions = actions.len();
    if !rows.len().is_multiple_of(n_actions) {
        return Err(schema(end, "row count is not a multiple of the action count"));
    }
    let n_loads = rows.len() / n_actions;
    let mut load_grid = Vec::with_capacity(n_loads);
    let mut p_hat = vec![vec![0.0; n_loads]; n_actions];
    for (g, block) in rows.chunks(n_actions).enumerate() {
        let lambda = block[0].1;
        load_grid.push(lambda);
        for (a, &(line, l, action, p, t)) in block.iter().enumerate() {
            if l != lambda || action != actions[a] {
                return Err(schema(line, "rows are not a complete (load, action) grid"));
            }
            if t != trials {
                return Err(schema(line, "inconsistent trial counts"));
            }
            if action.is_idle() && p != 0.0 {
                return Err(schema(line, "idle action must have p_hat = 0"));
            }
            p_hat[a][g] = p;
        }
    }
    check_grid(&load_grid).map_err(|e| schema(end, e.to_string()))?;

    Ok(SuccessTable {
        load_grid,
        actions,
        p_hat,
        trials,
        seed,
        cfg_digest,
    })
}

/// Builds a table directly from probabilities, for tests and synthetic
/// studies. Rows follow `actions`; the idle row is forced to zero.
pub fn table_from_rows(
    load_grid: Vec<f64>,
    actions: Vec<Action>,
    mut p_hat: Vec<Vec<f64>>,
) -> Result<SuccessTable, TableError> {
    check_grid(&load_grid)?;
    for (a, row) in actions.iter().zip(p_hat.iter_mut()) {
        if row.len() != load_grid.len() || row.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(schema(0, format!("row for {a} does not match the grid")));
        }
        if a.is_idle() {
            row.iter_mut().for_each(|p| *p = 0.0);
        }
    }
    Ok(SuccessTable {
        load_grid,
        actions,
        p_hat,
        trials: 1,
        seed: 0,
        cfg_digest: String::from("synthetic"),
    })
}

/// Random table with success decreasing in load, used by property checks.
pub fn random_table<R: Rng + ?Sized>(actions: &[Action], load_grid: &[f64], rng: &mut R) -> SuccessTable {
    let rows = actions
        .iter()
        .map(|a| {
            if a.is_idle() {
                return vec![0.0; load_grid.len()];
            }
            let mut p: f64 = rng.random();
            load_grid
                .iter()
                .map(|_| {
                    let v = p;
                    p *= rng.random_range(0.6..1.0);
                    v
                })
                .collect()
        })
        .collect();
    table_from_rows(load_grid.to_vec(), actions.to_vec(), rows).expect("valid synthetic table")
}
