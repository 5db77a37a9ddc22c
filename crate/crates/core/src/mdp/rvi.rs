use crate::action::Action;

use super::{argmin_tie_break, MdpError, MdpModel};

#[derive(Debug, Clone, PartialEq)]
pub struct RviOptions {
    /// Stop when the span of `T V - V` is at most `tol`.
    pub tol: f64,
    pub max_iters: u64,
    /// AoI state pinned to `V = 0`.
    pub reference_state: u32,
    /// Weight `τ` of the Bellman update in `V ← (1-τ) V + τ T V`. Values
    /// below 1 make every policy's chain aperiodic without changing the
    /// average cost or the relative values.
    pub step: f64,
}

impl Default for RviOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iters: 1_000_000,
            reference_state: 1,
            step: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdpSolution {
    /// Average cost per frame.
    pub rho: f64,
    /// Relative values `V(Δ)` for `Δ = 1..=Δ_max`, zero at the reference state.
    pub v: Vec<f64>,
    /// Index into the model's action list for each state.
    pub policy_index: Vec<usize>,
    pub policy: Vec<Action>,
    /// `Q(Δ, a)`, row per state.
    pub q_values: Vec<Vec<f64>>,
    pub iterations: u64,
    /// `max_Δ |ρ + V(Δ) - min_a Q(Δ, a)|` at return.
    pub residual: f64,
    /// Every action has zero success probability.
    pub degenerate: bool,
}

impl MdpSolution {
    /// `h(Δ) = V(min(Δ+1, Δ_max)) - V(1)` for every state.
    pub fn h(&self) -> Vec<f64> {
        let n = self.v.len();
        (0..n).map(|s| self.v[(s + 1).min(n - 1)] - self.v[0]).collect()
    }

    pub fn action_at(&self, delta: u32) -> Action {
        self.policy[delta as usize - 1]
    }
}

/// Q-values of every action and the Bellman image `min_a Q` for each state.
fn bellman(model: &MdpModel, v: &[f64], q: &mut [Vec<f64>], tv: &mut [f64]) {
    let v1 = v[0];
    for (s, (q_row, tv_s)) in q.iter_mut().zip(tv.iter_mut()).enumerate() {
        let delta = s as u32 + 1;
        let v_next = v[model.next_state(delta) as usize - 1];
        let mut best = f64::INFINITY;
        for (a, q_sa) in q_row.iter_mut().enumerate() {
            let p = model.p[a];
            *q_sa = model.stage_cost(delta, a) + p * v1 + (1.0 - p) * v_next;
            best = best.min(*q_sa);
        }
        *tv_s = best;
    }
}

/// Relative value iteration for the average-cost Bellman equation
/// `ρ + V(Δ) = min_a Q(Δ, a)`.
///
/// Argmin ties resolve to the lowest energy, then lowest `d`, then lowest
/// `q`. `initial` warm-starts the relative values.
pub fn relative_value_iteration(
    model: &MdpModel,
    opts: &RviOptions,
    initial: Option<&[f64]>,
) -> Result<MdpSolution, MdpError> {
    let n = model.n_states();
    let reference = opts.reference_state as usize;
    if reference < 1 || reference > n {
        return Err(MdpError::InvalidModel(format!(
            "reference state {reference} outside 1..={n}"
        )));
    }
    if !(opts.step > 0.0 && opts.step <= 1.0) {
        return Err(MdpError::InvalidModel(format!("RVI step {} outside (0, 1]", opts.step)));
    }
    let r = reference - 1;

    let mut v = match initial {
        Some(init) if init.len() == n => {
            let base = init[r];
            init.iter().map(|x| x - base).collect()
        }
        _ => vec![0.0; n],
    };
    let mut q = vec![vec![0.0; model.n_actions()]; n];
    let mut tv = vec![0.0; n];
    let mut span = f64::INFINITY;

    for iter in 1..=opts.max_iters {
        bellman(model, &v, &mut q, &mut tv);
        let (lo, hi) = tv
            .iter()
            .zip(&v)
            .map(|(t, x)| t - x)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        span = hi - lo;
        if span <= opts.tol {
            let rho = 0.5 * (hi + lo);
            let policy_index: Vec<usize> = q
                .iter()
                .zip(&tv)
                .map(|(row, &best)| argmin_tie_break(row, &model.actions, best))
                .collect();
            let residual = tv.iter().zip(&v).map(|(t, x)| (rho + x - t).abs()).fold(0.0, f64::max);
            return Ok(MdpSolution {
                rho,
                policy: policy_index.iter().map(|&i| model.actions[i]).collect(),
                policy_index,
                v,
                q_values: q,
                iterations: iter,
                residual,
                degenerate: model.is_degenerate(),
            });
        }
        let step = opts.step;
        for (x, t) in v.iter_mut().zip(&tv) {
            *x += step * (t - *x);
        }
        let base = v[r];
        v.iter_mut().for_each(|x| *x -= base);
    }
    Err(MdpError::NotConverged {
        iterations: opts.max_iters,
        residual: span,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(p: f64, eta: f64, delta_max: u32) -> MdpModel {
        MdpModel::new(vec![Action::new(1, 1)], vec![p], eta, delta_max).unwrap()
    }

    #[test]
    fn geometric_reset_chain_average() {
        let sol = relative_value_iteration(&single(0.5, 0.0, 200), &RviOptions::default(), None).unwrap();
        assert!((sol.rho - 2.0).abs() < 1e-6, "rho = {}", sol.rho);
        assert!(sol.residual <= 1e-9);
        assert_eq!(sol.v[0], 0.0);
    }

    #[test]
    fn certain_delivery_resets_every_frame() {
        let eta = 0.7;
        let sol = relative_value_iteration(&single(1.0, eta, 30), &RviOptions::default(), None).unwrap();
        assert!((sol.rho - (1.0 + eta)).abs() < 1e-9);
        for (i, v) in sol.v.iter().enumerate() {
            assert!((v - i as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_model_absorbs_at_truncation() {
        let m = MdpModel::new(vec![Action::IDLE, Action::new(1, 1)], vec![0.0, 0.0], 1.0, 25).unwrap();
        let sol = relative_value_iteration(&m, &RviOptions::default(), None).unwrap();
        assert!(sol.degenerate);
        assert!((sol.rho - 25.0).abs() < 1e-8);
        assert!(sol.policy.iter().all(|a| a.is_idle()));
    }

    #[test]
    fn periodic_optimal_chain_converges() {
        // idle until the certain action becomes worthwhile: a periodic chain
        let m = MdpModel::new(vec![Action::IDLE, Action::new(1, 1)], vec![0.0, 1.0], 3.0, 20).unwrap();
        let sol = relative_value_iteration(&m, &RviOptions::default(), None).unwrap();
        assert!(sol.residual <= 1e-9);
        let switch = sol.policy.iter().position(|a| !a.is_idle()).unwrap();
        assert!(sol.policy[switch..].iter().all(|a| !a.is_idle()));
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let opts = RviOptions {
            max_iters: 3,
            ..Default::default()
        };
        match relative_value_iteration(&single(0.01, 0.0, 200), &opts, None) {
            Err(MdpError::NotConverged { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn warm_start_reaches_same_solution() {
        let m = MdpModel::new(
            vec![Action::IDLE, Action::new(1, 1), Action::new(1, 2)],
            vec![0.0, 0.4, 0.7],
            1.5,
            60,
        )
        .unwrap();
        let cold = relative_value_iteration(&m, &RviOptions::default(), None).unwrap();
        let warm = relative_value_iteration(&m, &RviOptions::default(), Some(&cold.v)).unwrap();
        assert!(warm.iterations < cold.iterations);
        assert_eq!(warm.policy, cold.policy);
        assert!((warm.rho - cold.rho).abs() < 1e-8);
    }

    #[test]
    fn idle_versus_transmit_threshold() {
        // choose idle at Δ=1 iff η > 0.6 h(1)
        for eta in [0.1, 1.0, 3.0, 10.0] {
            let m = MdpModel::new(vec![Action::IDLE, Action::new(1, 1)], vec![0.0, 0.6], eta, 40).unwrap();
            let sol = relative_value_iteration(&m, &RviOptions::default(), None).unwrap();
            let h1 = sol.h()[0];
            assert_eq!(sol.policy[0].is_idle(), eta > 0.6 * h1, "eta {eta}");
        }
    }

    #[test]
    fn cost_shift_moves_rho_only() {
        let mut m = MdpModel::new(
            vec![Action::IDLE, Action::new(1, 1), Action::new(2, 1)],
            vec![0.0, 0.5, 0.65],
            0.8,
            40,
        )
        .unwrap();
        let base = relative_value_iteration(&m, &RviOptions::default(), None).unwrap();
        m.cost_offset = 3.25;
        let shifted = relative_value_iteration(&m, &RviOptions::default(), None).unwrap();
        assert!((shifted.rho - base.rho - 3.25).abs() < 1e-8);
        assert_eq!(shifted.policy, base.policy);
    }
}
