use serde::Serialize;

use crate::action::Action;
use crate::config::SystemConfig;
use crate::mean_field::Equilibrium;
use crate::phy::{decode_frame, place_replicas};
use crate::rng::stream_rng;

use super::ExperimentError;

/// Relative gap above which the mean-field prediction is flagged.
pub const GAP_THRESHOLD: f64 = 0.15;

/// Frames discarded before averaging: 10% of the run, at least 500.
pub fn default_warmup(frames: u64) -> u64 {
    (frames / 10).max(500)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanFieldGap {
    pub predicted_aoi: f64,
    pub predicted_energy: f64,
    pub aoi_gap: f64,
    pub energy_gap: f64,
    /// Both relative gaps are within [`GAP_THRESHOLD`].
    pub within_threshold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedLoopResult {
    pub device_aoi: Vec<f64>,
    pub device_energy: Vec<f64>,
    pub mean_aoi: f64,
    pub mean_energy: f64,
    /// Time-averaged per-pool replica count from the other devices, per
    /// unit frame time, averaged over devices.
    pub empirical_load: f64,
    pub frames: u64,
    pub warmup: u64,
    pub seed: u64,
    pub prediction: Option<MeanFieldGap>,
}

impl ClosedLoopResult {
    /// Attaches the mean-field `(Δ̄, Ē)` and the relative gaps to it.
    pub fn compare(&mut self, eq: &Equilibrium) -> &MeanFieldGap {
        let rel = |emp: f64, pred: f64| {
            if pred == 0.0 {
                if emp == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (emp - pred).abs() / pred.abs()
            }
        };
        let aoi_gap = rel(self.mean_aoi, eq.avg_aoi);
        let energy_gap = rel(self.mean_energy, eq.avg_energy);
        self.prediction.insert(MeanFieldGap {
            predicted_aoi: eq.avg_aoi,
            predicted_energy: eq.avg_energy,
            aoi_gap,
            energy_gap,
            within_threshold: aoi_gap <= GAP_THRESHOLD && energy_gap <= GAP_THRESHOLD,
        })
    }
}

/// Packet-level run of `N` devices sharing `policy`. Every frame all
/// replicas go through the actual PHY and SIC; there is no success table in
/// the loop. AoI starts at 1 and is capped at the policy length.
pub fn closed_loop_simulate(
    policy: &[Action],
    cfg: &SystemConfig,
    frames: u64,
    warmup: u64,
    seed: u64,
) -> Result<ClosedLoopResult, ExperimentError> {
    cfg.validate()?;
    if frames <= warmup {
        return Err(ExperimentError::Settings(format!(
            "frames {frames} must exceed warmup {warmup}"
        )));
    }
    if policy.is_empty() {
        return Err(ExperimentError::Settings("empty policy".into()));
    }
    if let Some(a) = policy.iter().find(|a| !a.is_valid(cfg.max_reps, cfg.pools)) {
        return Err(ExperimentError::Settings(format!(
            "action {a} not valid for this configuration"
        )));
    }
    let delta_max = policy.len() as u32;
    let n = cfg.n_devices as usize;
    let mut rng = stream_rng(seed, 0);
    let mut aoi = vec![1u32; n];
    let mut aoi_sum = vec![0.0; n];
    let mut energy_sum = vec![0.0; n];
    let mut load_sum = 0.0;
    let mut pools = vec![Vec::new(); cfg.pools as usize];

    for frame in 0..frames {
        pools.iter_mut().for_each(Vec::clear);
        let mut total_energy = 0u64;
        let mut sent = vec![0u32; n];
        for (dev, &delta) in aoi.iter().enumerate() {
            let action = policy[delta as usize - 1];
            if action.is_idle() {
                continue;
            }
            for r in place_replicas(action, dev as u64, cfg, &mut rng)? {
                pools[r.pool as usize].push(r);
            }
            sent[dev] = action.energy();
            total_energy += u64::from(action.energy());
        }
        let delivered = decode_frame(&mut pools, cfg);

        if frame >= warmup {
            for dev in 0..n {
                aoi_sum[dev] += f64::from(aoi[dev]);
                energy_sum[dev] += f64::from(sent[dev]);
            }
            let others: f64 = (0..n).map(|dev| (total_energy - u64::from(sent[dev])) as f64).sum();
            load_sum += others / (n as f64 * f64::from(cfg.pools) * cfg.frame_len);
        }
        for (dev, delta) in aoi.iter_mut().enumerate() {
            *delta = if delivered.contains(&(dev as u64)) {
                1
            } else {
                (*delta + 1).min(delta_max)
            };
        }
    }

    let measured = (frames - warmup) as f64;
    let device_aoi: Vec<f64> = aoi_sum.iter().map(|s| s / measured).collect();
    let device_energy: Vec<f64> = energy_sum.iter().map(|s| s / measured).collect();
    Ok(ClosedLoopResult {
        mean_aoi: device_aoi.iter().sum::<f64>() / n as f64,
        mean_energy: device_energy.iter().sum::<f64>() / n as f64,
        device_aoi,
        device_energy,
        empirical_load: load_sum / measured,
        frames,
        warmup,
        seed,
        prediction: None,
    })
}
