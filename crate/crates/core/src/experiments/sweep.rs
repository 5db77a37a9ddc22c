use rayon::prelude::*;
use serde::Serialize;

use crate::action::Action;
use crate::calibration::SuccessTable;
use crate::mdp::SwitchPoint;
use crate::mean_field::{solve_equilibrium, FixedPointConfig, PopulationConfig};

use super::ExperimentError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub eta: f64,
    pub lambda_star: f64,
    pub avg_aoi: f64,
    pub avg_energy: f64,
    pub rho: f64,
    pub converged: bool,
    pub outer_iters: u32,
    pub load_residual: f64,
    pub dist_residual: f64,
    #[serde(skip)]
    pub policy: Vec<Action>,
    #[serde(skip)]
    pub switch_points: Vec<SwitchPoint>,
    /// Solver failure, if the equilibrium could not be computed at all.
    pub error: Option<String>,
}

/// `points` log-spaced values from `min` to `max` inclusive.
pub fn log_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>, ExperimentError> {
    if !(min > 0.0 && max >= min && max.is_finite()) || points == 0 {
        return Err(ExperimentError::Grid(format!(
            "need 0 < min <= max and at least one point, got [{min}, {max}] x {points}"
        )));
    }
    if points == 1 {
        return Ok(vec![min]);
    }
    let (lo, hi) = (min.ln(), max.ln());
    let step = (hi - lo) / (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points).map(|i| (lo + step * i as f64).exp()).collect();
    grid[0] = min;
    grid[points - 1] = max;
    Ok(grid)
}

/// States where the action changes, as the first AoI of each new action.
pub fn switch_points(policy: &[Action]) -> Vec<SwitchPoint> {
    policy
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1])
        .map(|(s, w)| SwitchPoint {
            delta: s as u32 + 2,
            from: w[0],
            to: w[1],
        })
        .collect()
}

/// One equilibrium per multiplier, solved in parallel. Solver failures
/// become non-converged records carrying the error text.
pub fn sweep_eta(
    eta_grid: &[f64],
    table: &SuccessTable,
    pop: &PopulationConfig,
    fp: &FixedPointConfig,
    delta_max: u32,
) -> Result<Vec<SweepRecord>, ExperimentError> {
    if eta_grid.is_empty() {
        return Err(ExperimentError::Grid("empty grid".into()));
    }
    if eta_grid.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
        return Err(ExperimentError::Grid("multipliers must be finite and >= 0".into()));
    }
    if eta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ExperimentError::Grid("grid must be strictly increasing".into()));
    }
    Ok(eta_grid
        .par_iter()
        .map(|&eta| match solve_equilibrium(eta, table, pop, fp, delta_max) {
            Ok(eq) => SweepRecord {
                eta,
                lambda_star: eq.lambda_star,
                avg_aoi: eq.avg_aoi,
                avg_energy: eq.avg_energy,
                rho: eq.rho,
                converged: eq.converged,
                outer_iters: eq.outer_iters,
                load_residual: eq.load_residual,
                dist_residual: eq.dist_residual,
                switch_points: switch_points(&eq.policy),
                policy: eq.policy,
                error: None,
            },
            Err(e) => SweepRecord {
                eta,
                lambda_star: f64::NAN,
                avg_aoi: f64::NAN,
                avg_energy: f64::NAN,
                rho: f64::NAN,
                converged: false,
                outer_iters: 0,
                load_residual: f64::NAN,
                dist_residual: f64::NAN,
                policy: Vec::new(),
                switch_points: Vec::new(),
                error: Some(e.to_string()),
            },
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::table_from_rows;

    #[test]
    fn log_grid_endpoints_and_spacing() {
        let g = log_grid(1e-3, 1e2, 20).unwrap();
        assert_eq!(g.len(), 20);
        assert_eq!((g[0], g[19]), (1e-3, 1e2));
        let r0 = g[1] / g[0];
        assert!(g.windows(2).all(|w| (w[1] / w[0] - r0).abs() < 1e-9));
        assert!(log_grid(0.0, 1.0, 3).is_err());
        assert!(log_grid(2.0, 1.0, 3).is_err());
        assert_eq!(log_grid(5.0, 5.0, 1).unwrap(), vec![5.0]);
    }

    #[test]
    fn switch_points_mark_changes() {
        let a = Action::new(1, 1);
        let b = Action::new(2, 1);
        let sp = switch_points(&[Action::IDLE, Action::IDLE, a, a, b]);
        assert_eq!(sp.len(), 2);
        assert_eq!((sp[0].delta, sp[1].delta), (3, 5));
    }

    #[test]
    fn sweep_cardinality_and_energy_order() {
        let table = table_from_rows(
            vec![0.0, 5.0, 10.0, 20.0],
            vec![Action::IDLE, Action::new(1, 1), Action::new(2, 1)],
            vec![vec![0.0; 4], vec![0.95, 0.7, 0.5, 0.3], vec![0.99, 0.75, 0.45, 0.2]],
        )
        .unwrap();
        let pop = PopulationConfig::new(30, 3, 1.0).unwrap();
        let grid = log_grid(1e-2, 1e2, 6).unwrap();
        let recs = sweep_eta(&grid, &table, &pop, &FixedPointConfig::default(), 60).unwrap();
        assert_eq!(recs.len(), 6);
        assert!(recs.windows(2).all(|w| w[0].eta < w[1].eta));
        let last = recs.last().unwrap();
        assert!(recs.iter().all(|r| last.avg_energy <= r.avg_energy + 1e-12));
        assert!(sweep_eta(&[1.0, 1.0], &table, &pop, &FixedPointConfig::default(), 60).is_err());
        assert!(sweep_eta(&[], &table, &pop, &FixedPointConfig::default(), 60).is_err());
    }
}
