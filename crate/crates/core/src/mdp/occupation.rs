//! Stationary occupation-measure LP: an independent route to the optimal
//! average cost of small models.

use super::simplex::{self, LinearProgram};
use super::{MdpError, MdpModel};

/// Largest `Δ_max * |A|` solved with the dense tableau.
pub const MAX_LP_SIZE: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct OccupationSolution {
    /// Optimal average cost.
    pub rho: f64,
    /// `x[state][action]`.
    pub x: Vec<Vec<f64>>,
    /// State marginal `m(Δ) = Σ_a x(Δ, a)`.
    pub m: Vec<f64>,
    /// `π(a | Δ)`; states with zero mass put all weight on the first action.
    pub policy: Vec<Vec<f64>>,
}

impl OccupationSolution {
    /// Largest violation of the normalization and flow constraints.
    pub fn feasibility_residual(&self, model: &MdpModel) -> f64 {
        let total: f64 = self.m.iter().sum();
        let mut inflow = vec![0.0; model.n_states()];
        for (s, row) in self.x.iter().enumerate() {
            for (a, &x) in row.iter().enumerate() {
                for (next, prob) in model.transition(s as u32 + 1, a) {
                    inflow[next as usize - 1] += x * prob;
                }
            }
        }
        self.m
            .iter()
            .zip(&inflow)
            .map(|(m, f)| (m - f).abs())
            .fold((total - 1.0).abs(), f64::max)
    }
}

/// Minimizes `Σ x(Δ,a) c(Δ,a)` over stationary occupation measures and
/// recovers the (possibly randomized) policy by conditioning on the state.
pub fn occupation_lp_solve(model: &MdpModel) -> Result<OccupationSolution, MdpError> {
    let ns = model.n_states();
    let na = model.n_actions();
    let size = ns * na;
    if size > MAX_LP_SIZE {
        return Err(MdpError::LpTooLarge {
            size,
            limit: MAX_LP_SIZE,
        });
    }
    let var = |s: usize, a: usize| s * na + a;

    let mut rows = Vec::with_capacity(ns);
    rows.push(vec![1.0; size]);
    let mut flow = vec![vec![0.0; size]; ns];
    for s in 0..ns {
        for a in 0..na {
            flow[s][var(s, a)] += 1.0;
            for (next, prob) in model.transition(s as u32 + 1, a) {
                flow[next as usize - 1][var(s, a)] -= prob;
            }
        }
    }
    // flow rows sum to zero, so the last one is implied by the others
    flow.pop();
    rows.extend(flow);
    let mut b = vec![0.0; ns];
    b[0] = 1.0;
    let c = (0..ns)
        .flat_map(|s| (0..na).map(move |a| (s, a)))
        .map(|(s, a)| model.stage_cost(s as u32 + 1, a))
        .collect();

    let sol = simplex::solve(&LinearProgram { a: rows, b, c })?;
    let x: Vec<Vec<f64>> = sol.x.chunks(na).map(<[f64]>::to_vec).collect();
    let m: Vec<f64> = x.iter().map(|row| row.iter().sum()).collect();
    let policy = x
        .iter()
        .zip(&m)
        .map(|(row, &mass)| {
            if mass > 0.0 {
                row.iter().map(|v| v / mass).collect()
            } else {
                let mut point = vec![0.0; na];
                point[0] = 1.0;
                point
            }
        })
        .collect();
    Ok(OccupationSolution {
        rho: sol.objective,
        x,
        m,
        policy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::Action;
    use crate::mdp::{relative_value_iteration, RviOptions};

    #[test]
    fn truncated_geometric_chain_matches_rvi() {
        let model = MdpModel::new(vec![Action::new(1, 1)], vec![0.5], 0.0, 6).unwrap();
        let lp = occupation_lp_solve(&model).unwrap();
        let rvi = relative_value_iteration(&model, &RviOptions::default(), None).unwrap();
        assert!((lp.rho - rvi.rho).abs() < 1e-8, "{} vs {}", lp.rho, rvi.rho);
        // truncated geometric mean: Σ_{k<6} k 2^-k + 6 * 2^-5
        let closed: f64 = (1..6).map(|k| k as f64 * 0.5f64.powi(k)).sum::<f64>() + 6.0 * 0.5f64.powi(5);
        assert!((lp.rho - closed).abs() < 1e-12);
        assert!(lp.feasibility_residual(&model) < 1e-10);
    }

    #[test]
    fn idle_versus_transmit_matches_rvi() {
        for eta in [0.2, 2.0, 6.0, 40.0] {
            let model = MdpModel::new(vec![Action::IDLE, Action::new(1, 1)], vec![0.0, 0.6], eta, 15).unwrap();
            let lp = occupation_lp_solve(&model).unwrap();
            let rvi = relative_value_iteration(&model, &RviOptions::default(), None).unwrap();
            assert!((lp.rho - rvi.rho).abs() < 1e-8, "eta {eta}: {} vs {}", lp.rho, rvi.rho);
            assert!(lp.feasibility_residual(&model) < 1e-10);
        }
    }

    #[test]
    fn size_guard() {
        let actions = crate::action::action_set(3, 3);
        let p = vec![0.5; 10]
            .into_iter()
            .enumerate()
            .map(|(i, p)| if i == 0 { 0.0 } else { p })
            .collect();
        let model = MdpModel::new(actions, p, 1.0, 501).unwrap();
        assert!(matches!(occupation_lp_solve(&model), Err(MdpError::LpTooLarge { .. })));
    }
}
