use std::fmt;

use serde::{Deserialize, Serialize};

/// Access action `(d, q)`: `d` replicas in each of `q` selected pools.
///
/// `(0, 0)` is the idle action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub d: u32,
    pub q: u32,
}

impl Action {
    pub const IDLE: Action = Action { d: 0, q: 0 };

    pub const fn new(d: u32, q: u32) -> Self {
        Self { d, q }
    }

    pub fn is_idle(self) -> bool {
        self == Self::IDLE
    }

    /// Number of transmitted replicas, `d * q`.
    pub fn energy(self) -> u32 {
        self.d * self.q
    }

    /// Whether the action belongs to the action set for `max_reps` and `pools`.
    pub fn is_valid(self, max_reps: u32, pools: u32) -> bool {
        self.is_idle() || ((1..=max_reps).contains(&self.d) && (1..=pools).contains(&self.q))
    }

    /// Ordering key used to break ties: energy, then `d`, then `q`.
    pub fn tie_key(self) -> (u32, u32, u32) {
        (self.energy(), self.d, self.q)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.d, self.q)
    }
}

/// Full action set: idle followed by every `(d, q)` in `d`-major order.
pub fn action_set(max_reps: u32, pools: u32) -> Vec<Action> {
    let mut actions = Vec::with_capacity((max_reps * pools + 1) as usize);
    actions.push(Action::IDLE);
    for d in 1..=max_reps {
        for q in 1..=pools {
            actions.push(Action::new(d, q));
        }
    }
    actions
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_set_cardinality() {
        let actions = action_set(3, 3);
        assert_eq!(actions.len(), 10);
        assert_eq!(actions[0], Action::IDLE);
        assert!(actions.iter().all(|a| a.is_valid(3, 3)));
    }

    #[test]
    fn energy_is_replica_count() {
        assert_eq!(Action::IDLE.energy(), 0);
        assert_eq!(Action::new(2, 3).energy(), 6);
    }

    #[test]
    fn validity() {
        assert!(!Action::new(0, 1).is_valid(3, 3));
        assert!(!Action::new(1, 0).is_valid(3, 3));
        assert!(!Action::new(4, 1).is_valid(3, 3));
        assert!(Action::new(3, 3).is_valid(3, 3));
    }
}
