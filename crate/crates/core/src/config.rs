//! Frame, pool and channel parameters shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Rician K-factor used when fading is enabled without an explicit value.
pub const DEFAULT_RICIAN_K: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{field} must be {requirement} (got {value})")]
    OutOfRange {
        field: &'static str,
        requirement: &'static str,
        value: String,
    },
    #[error("packet duration {packet_len} exceeds slot duration {slot_len}")]
    PacketLongerThanSlot { packet_len: f64, slot_len: f64 },
    #[error("max repetitions per pool {max_reps} exceeds slot count {slots}")]
    RepetitionsExceedSlots { max_reps: u32, slots: u32 },
}

fn out_of_range(field: &'static str, requirement: &'static str, value: impl ToString) -> ConfigError {
    ConfigError::OutOfRange {
        field,
        requirement,
        value: value.to_string(),
    }
}

/// System parameters of the uplink.
///
/// `rician_k = None` disables small-scale fading, so every replica arrives
/// with exactly `p_bar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Number of devices `N`.
    pub n_devices: u32,
    /// Number of receiver-side resource pools `R`.
    pub pools: u32,
    /// Logical slots per pool per frame `M`.
    pub slots: u32,
    /// Frame duration `T_f`.
    pub frame_len: f64,
    /// Physical replica duration `T_p`.
    pub packet_len: f64,
    /// Receiver noise power.
    pub noise: f64,
    /// Capture SINR threshold.
    pub gamma_th: f64,
    /// Residual interference factor of a cancelled replica.
    pub epsilon: f64,
    pub rician_k: Option<f64>,
    /// Nominal received power per replica.
    pub p_bar: f64,
    /// Maximum replicas per selected pool `D`.
    pub max_reps: u32,
    /// AoI truncation level.
    pub delta_max: u32,
    pub sic_max_iters: u32,
    /// Propagate decoded packets to their replicas in other pools.
    pub cross_pool_cancel: bool,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_devices: 30,
            pools: 3,
            slots: 3,
            frame_len: 1.0,
            packet_len: 0.25,
            noise: 0.5,
            gamma_th: 2.0,
            epsilon: 0.05,
            rician_k: Some(DEFAULT_RICIAN_K),
            p_bar: 1.0,
            max_reps: 3,
            delta_max: 200,
            sic_max_iters: 64,
            cross_pool_cancel: false,
        }
    }
}

impl SystemConfig {
    /// Slot duration `T_s = T_f / M`.
    pub fn slot_len(&self) -> f64 {
        self.frame_len / f64::from(self.slots)
    }

    pub fn fading_enabled(&self) -> bool {
        self.rician_k.is_some()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_devices < 1 {
            return Err(out_of_range("n_devices", ">= 1", self.n_devices));
        }
        if self.pools < 1 {
            return Err(out_of_range("pools", ">= 1", self.pools));
        }
        if self.slots < 1 {
            return Err(out_of_range("slots", ">= 1", self.slots));
        }
        if !(self.frame_len > 0.0 && self.frame_len.is_finite()) {
            return Err(out_of_range("frame_len", "finite and > 0", self.frame_len));
        }
        if !(self.packet_len > 0.0 && self.packet_len.is_finite()) {
            return Err(out_of_range("packet_len", "finite and > 0", self.packet_len));
        }
        if self.packet_len > self.slot_len() {
            return Err(ConfigError::PacketLongerThanSlot {
                packet_len: self.packet_len,
                slot_len: self.slot_len(),
            });
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return Err(out_of_range("noise", "finite and > 0", self.noise));
        }
        if !(self.gamma_th > 0.0 && self.gamma_th.is_finite()) {
            return Err(out_of_range("gamma_th", "finite and > 0", self.gamma_th));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(out_of_range("epsilon", "in [0, 1]", self.epsilon));
        }
        if let Some(k) = self.rician_k {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(out_of_range("rician_k", "finite and >= 0", k));
            }
        }
        if !(self.p_bar > 0.0 && self.p_bar.is_finite()) {
            return Err(out_of_range("p_bar", "finite and > 0", self.p_bar));
        }
        if self.max_reps < 1 {
            return Err(out_of_range("max_reps", ">= 1", self.max_reps));
        }
        if self.max_reps > self.slots {
            return Err(ConfigError::RepetitionsExceedSlots {
                max_reps: self.max_reps,
                slots: self.slots,
            });
        }
        if self.delta_max < 2 {
            return Err(out_of_range("delta_max", ">= 2", self.delta_max));
        }
        if self.sic_max_iters < 1 {
            return Err(out_of_range("sic_max_iters", ">= 1", self.sic_max_iters));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding of the configuration.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
