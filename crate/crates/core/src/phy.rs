//! Packet-level simulation of one frame.
//!
//! Replicas land in a logical slot of a pool with a residual timing offset
//! `δ ~ U[0, T_s)`, so receptions are asynchronous and overlap fractionally.
//! Each pool runs capture-SIC independently: at every iteration the
//! strongest replica whose SINR clears `γ_th` is decoded and every replica of
//! its packet in that pool drops to the residual factor `ε`. A tagged device
//! succeeds when its packet is decoded in at least one selected pool.

use std::collections::BTreeSet;
use std::ops::Range;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use thiserror::Error;

use crate::action::Action;
use crate::config::SystemConfig;

/// Packet identifier of the tagged device in [`frame_success`].
pub const TAGGED_PACKET: u64 = 0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PhyError {
    #[error("the idle action places no replicas")]
    IdleAction,
    #[error("action {action} is outside the action set")]
    InvalidAction { action: Action },
    #[error("{d} replicas per pool do not fit in {slots} slots")]
    TooManyReplicas { d: u32, slots: u32 },
}

/// Length of the intersection of two half-open intervals.
pub fn overlap_length(a: Range<f64>, b: Range<f64>) -> f64 {
    (a.end.min(b.end) - a.start.max(b.start)).max(0.0)
}

/// Unit-mean Rician power coefficient `|h|^2` with
/// `h = sqrt(K/(K+1)) + CN(0, 1/(K+1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicianFading {
    los: f64,
    scatter_std: f64,
}

impl RicianFading {
    pub fn new(k: f64) -> Self {
        Self {
            los: (k / (k + 1.0)).sqrt(),
            // per real dimension
            scatter_std: (0.5 / (k + 1.0)).sqrt(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let re = self.los + self.scatter_std * re;
        let im = self.scatter_std * im;
        re * re + im * im
    }
}

/// Received-power model of a configuration.
#[derive(Debug, Clone, Copy)]
struct PowerModel {
    p_bar: f64,
    fading: Option<RicianFading>,
}

impl PowerModel {
    fn new(cfg: &SystemConfig) -> Self {
        Self {
            p_bar: cfg.p_bar,
            fading: cfg.rician_k.map(RicianFading::new),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.fading {
            Some(f) => self.p_bar * f.sample(rng),
            None => self.p_bar,
        }
    }
}

/// One transmitted copy of a packet as seen by the receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct Replica {
    pub packet_id: u64,
    pub pool: u32,
    pub slot: u32,
    /// Residual timing offset in `[0, T_s)`.
    pub offset: f64,
    /// Receiver-side start time `slot * T_s + offset`.
    pub start: f64,
    pub power: f64,
    /// Interference factor: 1 before cancellation, `ε` after.
    pub residual: f64,
    pub decoded: bool,
}

impl Replica {
    fn new<R: Rng + ?Sized>(
        packet_id: u64,
        pool: u32,
        slot: u32,
        cfg: &SystemConfig,
        power: &PowerModel,
        rng: &mut R,
    ) -> Self {
        let slot_len = cfg.slot_len();
        let offset = rng.random::<f64>() * slot_len;
        Self {
            packet_id,
            pool,
            slot,
            offset,
            start: f64::from(slot) * slot_len + offset,
            power: power.sample(rng),
            residual: 1.0,
            decoded: false,
        }
    }

    pub fn interval(&self, packet_len: f64) -> Range<f64> {
        self.start..self.start + packet_len
    }
}

fn check_action(action: Action, cfg: &SystemConfig) -> Result<(), PhyError> {
    if action.is_idle() {
        return Err(PhyError::IdleAction);
    }
    if action.d > cfg.slots {
        return Err(PhyError::TooManyReplicas {
            d: action.d,
            slots: cfg.slots,
        });
    }
    if action.d == 0 || action.q == 0 || action.q > cfg.pools {
        return Err(PhyError::InvalidAction { action });
    }
    Ok(())
}

fn place_packet<R: Rng + ?Sized>(
    action: Action,
    packet_id: u64,
    cfg: &SystemConfig,
    power: &PowerModel,
    rng: &mut R,
    out: &mut Vec<Replica>,
) {
    let pools = index::sample(rng, cfg.pools as usize, action.q as usize);
    for pool in pools.iter() {
        let slots = index::sample(rng, cfg.slots as usize, action.d as usize);
        for slot in slots.iter() {
            out.push(Replica::new(packet_id, pool as u32, slot as u32, cfg, power, rng));
        }
    }
}

/// Places the replicas of one packet sent with `action`: `q` distinct pools
/// chosen uniformly, `d` distinct slots in each.
pub fn place_replicas<R: Rng + ?Sized>(
    action: Action,
    packet_id: u64,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<Vec<Replica>, PhyError> {
    check_action(action, cfg)?;
    let mut out = Vec::with_capacity(action.energy() as usize);
    place_packet(action, packet_id, cfg, &PowerModel::new(cfg), rng, &mut out);
    Ok(out)
}

/// Replicas of the tagged device, all carrying [`TAGGED_PACKET`].
pub fn place_tagged_replicas<R: Rng + ?Sized>(
    action: Action,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<Vec<Replica>, PhyError> {
    place_replicas(action, TAGGED_PACKET, cfg, rng)
}

fn background_into<R: Rng + ?Sized>(
    lambda: f64,
    cfg: &SystemConfig,
    power: &PowerModel,
    next_id: &mut u64,
    rng: &mut R,
    pool_out: &mut [Vec<Replica>],
) {
    let mean = lambda * cfg.frame_len;
    let poisson = (mean > 0.0).then(|| Poisson::new(mean).expect("finite positive mean"));
    for (pool, out) in pool_out.iter_mut().enumerate() {
        let count = match &poisson {
            Some(p) => p.sample(rng) as u64,
            None => 0,
        };
        for _ in 0..count {
            let slot = rng.random_range(0..cfg.slots);
            out.push(Replica::new(*next_id, pool as u32, slot, cfg, power, rng));
            *next_id += 1;
        }
    }
}

/// Interfering single-replica packets: a Poisson(`Λ T_f`) count per pool,
/// each with a uniform slot and offset. Packet ids start at `first_id`.
pub fn generate_background<R: Rng + ?Sized>(
    lambda: f64,
    cfg: &SystemConfig,
    first_id: u64,
    rng: &mut R,
) -> Vec<Replica> {
    let mut pools = vec![Vec::new(); cfg.pools as usize];
    let mut next_id = first_id;
    background_into(lambda, cfg, &PowerModel::new(cfg), &mut next_id, rng, &mut pools);
    pools.into_iter().flatten().collect()
}

/// One decoding step of the SIC loop.
#[derive(Debug, Clone, PartialEq)]
pub struct SicStep {
    pub packet_id: u64,
    pub sinr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecodeResult {
    /// Packets decoded in this pool, in decoding order.
    pub decoded_packets: Vec<u64>,
    pub iterations: u32,
    pub trace: Vec<SicStep>,
}

impl DecodeResult {
    pub fn contains(&self, packet_id: u64) -> bool {
        self.decoded_packets.contains(&packet_id)
    }
}

/// Marks every replica of `packet_id` as decoded and cancelled.
fn cancel_packet(replicas: &mut [Replica], packet_id: u64, epsilon: f64) {
    for r in replicas.iter_mut().filter(|r| r.packet_id == packet_id) {
        r.decoded = true;
        r.residual = epsilon;
    }
}

/// Capture-SIC over the replicas of a single pool.
///
/// Replicas already flagged `decoded` (e.g. cancelled from another pool)
/// are not decoded again but keep interfering with their `residual`.
pub fn run_sic_pool(replicas: &mut [Replica], cfg: &SystemConfig) -> DecodeResult {
    let mut result = DecodeResult::default();
    let n = replicas.len();
    if n == 0 {
        return result;
    }
    let tp = cfg.packet_len;
    // Overlap weights L_uv / T_p, symmetric with a zero diagonal.
    let mut weight = vec![0.0; n * n];
    for u in 0..n {
        for v in u + 1..n {
            let w = overlap_length(replicas[u].interval(tp), replicas[v].interval(tp)) / tp;
            weight[u * n + v] = w;
            weight[v * n + u] = w;
        }
    }

    while result.iterations < cfg.sic_max_iters {
        let mut best: Option<(usize, f64)> = None;
        for u in 0..n {
            let ru = &replicas[u];
            if ru.decoded {
                continue;
            }
            let row = &weight[u * n..(u + 1) * n];
            let interference: f64 = replicas
                .iter()
                .zip(row)
                .filter(|(_, &w)| w > 0.0)
                .map(|(rv, &w)| rv.residual * rv.power * w)
                .sum();
            let sinr = ru.power / (cfg.noise + interference);
            if sinr < cfg.gamma_th {
                continue;
            }
            let better = match best {
                None => true,
                Some((b, _)) => {
                    let rb = &replicas[b];
                    ru.power > rb.power || (ru.power == rb.power && ru.packet_id < rb.packet_id)
                }
            };
            if better {
                best = Some((u, sinr));
            }
        }
        let Some((u, sinr)) = best else { break };
        let packet_id = replicas[u].packet_id;
        cancel_packet(replicas, packet_id, cfg.epsilon);
        result.decoded_packets.push(packet_id);
        result.trace.push(SicStep { packet_id, sinr });
        result.iterations += 1;
    }
    result
}

/// Decodes every pool of a frame and returns the set of delivered packets
/// (gateway OR fusion). With `cross_pool_cancel`, packets decoded in one
/// pool are cancelled in the others and SIC is rerun until no pool makes
/// progress.
pub fn decode_frame(pools: &mut [Vec<Replica>], cfg: &SystemConfig) -> BTreeSet<u64> {
    let mut delivered = BTreeSet::new();
    for pool in pools.iter_mut() {
        delivered.extend(run_sic_pool(pool, cfg).decoded_packets);
    }
    if !cfg.cross_pool_cancel {
        return delivered;
    }
    loop {
        let mut progress = false;
        for pool in pools.iter_mut() {
            let pending: Vec<u64> = pool
                .iter()
                .filter(|r| !r.decoded && delivered.contains(&r.packet_id))
                .map(|r| r.packet_id)
                .collect();
            if pending.is_empty() {
                continue;
            }
            for id in pending {
                cancel_packet(pool, id, cfg.epsilon);
            }
            for id in run_sic_pool(pool, cfg).decoded_packets {
                progress |= delivered.insert(id);
            }
        }
        if !progress {
            return delivered;
        }
    }
}

/// Simulates one frame for a tagged device using `action` against Poisson
/// background traffic of per-pool intensity `lambda`.
pub fn frame_success<R: Rng + ?Sized>(
    action: Action,
    lambda: f64,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<bool, PhyError> {
    if action.is_idle() {
        return Ok(false);
    }
    check_action(action, cfg)?;
    let power = PowerModel::new(cfg);
    let mut pools = vec![Vec::new(); cfg.pools as usize];
    let mut tagged = Vec::with_capacity(action.energy() as usize);
    place_packet(action, TAGGED_PACKET, cfg, &power, rng, &mut tagged);
    let mut next_id = TAGGED_PACKET + 1;
    background_into(lambda, cfg, &power, &mut next_id, rng, &mut pools);
    let mut selected: Vec<usize> = tagged.iter().map(|r| r.pool as usize).collect();
    selected.dedup();
    for r in tagged {
        pools[r.pool as usize].push(r);
    }

    if cfg.cross_pool_cancel {
        return Ok(decode_frame(&mut pools, cfg).contains(&TAGGED_PACKET));
    }
    for pool in selected {
        if run_sic_pool(&mut pools[pool], cfg).contains(TAGGED_PACKET) {
            return Ok(true);
        }
    }
    Ok(false)
}
