use crate::action::Action;
use crate::calibration::SuccessTable;

use super::MdpError;

#[derive(Debug, Clone, PartialEq)]
pub struct MdpModel {
    pub delta_max: u32,
    pub actions: Vec<Action>,
    /// Success probability per action at the fixed load.
    pub p: Vec<f64>,
    /// Energy multiplier `η`.
    pub eta: f64,
    /// Constant added to every stage cost.
    pub cost_offset: f64,
}

impl MdpModel {
    pub fn new(actions: Vec<Action>, p: Vec<f64>, eta: f64, delta_max: u32) -> Result<Self, MdpError> {
        if actions.is_empty() {
            return Err(MdpError::InvalidModel("no actions".into()));
        }
        if actions.len() != p.len() {
            return Err(MdpError::InvalidModel(format!(
                "{} actions but {} success probabilities",
                actions.len(),
                p.len()
            )));
        }
        if let Some((a, pa)) = actions.iter().zip(&p).find(|(_, pa)| !(0.0..=1.0).contains(*pa)) {
            return Err(MdpError::InvalidModel(format!("p({a}) = {pa} outside [0, 1]")));
        }
        if actions.iter().zip(&p).any(|(a, &pa)| a.is_idle() && pa != 0.0) {
            return Err(MdpError::InvalidModel("idle action must have p = 0".into()));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(MdpError::InvalidModel(format!("eta = {eta} must be finite and >= 0")));
        }
        if delta_max < 2 {
            return Err(MdpError::InvalidModel("delta_max must be at least 2".into()));
        }
        Ok(Self {
            delta_max,
            actions,
            p,
            eta,
            cost_offset: 0.0,
        })
    }

    pub fn n_states(&self) -> usize {
        self.delta_max as usize
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    /// Successor AoI on failure.
    pub fn next_state(&self, delta: u32) -> u32 {
        (delta + 1).min(self.delta_max)
    }

    /// `Δ + η E(a)` plus the configured offset.
    pub fn stage_cost(&self, delta: u32, action: usize) -> f64 {
        f64::from(delta) + self.eta * f64::from(self.actions[action].energy()) + self.cost_offset
    }

    /// Next-state law as `(state, probability)` pairs; the two entries merge
    /// when the failure branch also lands on state 1.
    pub fn transition(&self, delta: u32, action: usize) -> Vec<(u32, f64)> {
        let p = self.p[action];
        let next = self.next_state(delta);
        let mut law = Vec::with_capacity(2);
        if p > 0.0 {
            law.push((1, p));
        }
        if p < 1.0 {
            match law.iter_mut().find(|(s, _)| *s == next) {
                Some(entry) => entry.1 += 1.0 - p,
                None => law.push((next, 1.0 - p)),
            }
        }
        law
    }

    /// Model on a subset of the actions, in the order given.
    pub fn restrict(&self, indices: &[usize]) -> Self {
        Self {
            actions: indices.iter().map(|&i| self.actions[i]).collect(),
            p: indices.iter().map(|&i| self.p[i]).collect(),
            ..self.clone()
        }
    }

    /// True when no action can ever deliver.
    pub fn is_degenerate(&self) -> bool {
        self.p.iter().all(|&p| p == 0.0)
    }
}

/// Representative-device MDP at load `lambda` using every action of the table.
pub fn build_model(table: &SuccessTable, lambda: f64, eta: f64, delta_max: u32) -> Result<MdpModel, MdpError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(MdpError::InvalidModel(format!("load {lambda} must be finite and >= 0")));
    }
    MdpModel::new(table.actions.clone(), table.success_probs(lambda), eta, delta_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::table_from_rows;

    fn model(p: f64) -> MdpModel {
        MdpModel::new(vec![Action::IDLE, Action::new(1, 1)], vec![0.0, p], 0.5, 10).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let m = model(0.3);
        assert_eq!(m.transition(5, 1), vec![(1, 0.3), (6, 0.7)]);
        let law = m.transition(10, 1);
        assert_eq!(law[1], (10, 0.7));
        assert_eq!(m.transition(4, 0), vec![(5, 1.0)]);
        assert_eq!(m.transition(10, 0), vec![(10, 1.0)]);
    }

    #[test]
    fn stage_cost_includes_energy() {
        let m = model(0.3);
        assert_eq!(m.stage_cost(3, 0), 3.0);
        assert_eq!(m.stage_cost(3, 1), 3.5);
    }

    #[test]
    fn rejects_invalid_models() {
        let a = vec![Action::IDLE, Action::new(1, 1)];
        assert!(MdpModel::new(a.clone(), vec![0.0], 0.0, 5).is_err());
        assert!(MdpModel::new(a.clone(), vec![0.0, 1.2], 0.0, 5).is_err());
        assert!(MdpModel::new(a.clone(), vec![0.1, 0.5], 0.0, 5).is_err());
        assert!(MdpModel::new(a.clone(), vec![0.0, 0.5], -1.0, 5).is_err());
        assert!(MdpModel::new(a, vec![0.0, 0.5], 0.0, 1).is_err());
    }

    #[test]
    fn builds_from_table() {
        let table = table_from_rows(
            vec![0.0, 2.0],
            vec![Action::IDLE, Action::new(1, 1)],
            vec![vec![0.0, 0.0], vec![0.9, 0.5]],
        )
        .unwrap();
        let m = build_model(&table, 1.0, 2.0, 50).unwrap();
        assert!((m.p[1] - 0.7).abs() < 1e-15);
        assert_eq!(m.delta_max, 50);
        assert!(build_model(&table, -1.0, 2.0, 50).is_err());
    }
}
