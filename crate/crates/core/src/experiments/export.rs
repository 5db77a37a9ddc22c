//! Text exports. Every file opens with `#` comment lines carrying the
//! configuration digest, seed and tool version.

use std::fmt::Write;

use crate::action::Action;
use crate::baselines::{IrsaBaseline, RandomizedBaseline};
use crate::mean_field::Equilibrium;
use crate::TOOL_VERSION;

use super::{ClosedLoopResult, SweepRecord};

pub const PARETO_HEADER: &str = "eta,lambda_star,avg_aoi,avg_energy,rho,converged";
pub const POLICY_HEADER: &str = "delta,d,q,V";
pub const BASELINE_HEADER: &str = "kind,parameter,energy,p,avg_aoi,feasible,unreached";

/// Provenance lines shared by every export.
pub fn comment_header(cfg_digest: &str, seed: u64) -> String {
    format!("# cfg_digest={cfg_digest}\n# seed={seed}\n# version={TOOL_VERSION}\n")
}

pub fn pareto_csv(records: &[SweepRecord], cfg_digest: &str, seed: u64) -> String {
    let mut out = comment_header(cfg_digest, seed);
    out.push_str(PARETO_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.eta, r.lambda_star, r.avg_aoi, r.avg_energy, r.rho, r.converged
        )
        .unwrap();
    }
    out
}

pub fn policy_dump(policy: &[Action], v: &[f64], cfg_digest: &str, seed: u64) -> String {
    let mut out = comment_header(cfg_digest, seed);
    out.push_str(POLICY_HEADER);
    out.push('\n');
    write_policy_rows(&mut out, policy, v);
    out
}

fn write_policy_rows(out: &mut String, policy: &[Action], v: &[f64]) {
    for (s, (a, val)) in policy.iter().zip(v).enumerate() {
        writeln!(out, "{},{},{},{}", s + 1, a.d, a.q, val).unwrap();
    }
}

/// Summary lines `key=value` followed by the policy block.
pub fn equilibrium_export(eq: &Equilibrium, cfg_digest: &str, seed: u64) -> String {
    let mut out = comment_header(cfg_digest, seed);
    for (key, value) in [
        ("eta", eq.eta.to_string()),
        ("lambda_star", eq.lambda_star.to_string()),
        ("rho", eq.rho.to_string()),
        ("avg_aoi", eq.avg_aoi.to_string()),
        ("avg_energy", eq.avg_energy.to_string()),
        ("converged", eq.converged.to_string()),
        ("outer_iters", eq.outer_iters.to_string()),
        ("load_residual", eq.load_residual.to_string()),
        ("dist_residual", eq.dist_residual.to_string()),
    ] {
        writeln!(out, "{key}={value}").unwrap();
    }
    out.push_str("[policy]\n");
    out.push_str(POLICY_HEADER);
    out.push('\n');
    write_policy_rows(&mut out, &eq.policy, &eq.v);
    out
}

/// One baseline curve point. Infinite AoI is written as `delta_max` with
/// `unreached=true`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub kind: String,
    pub parameter: f64,
    pub energy: f64,
    pub p: f64,
    pub avg_aoi: f64,
    pub feasible: bool,
}

impl BaselineRow {
    pub fn randomized(b: &RandomizedBaseline) -> Self {
        Self {
            kind: "randomized".into(),
            parameter: 0.0,
            energy: b.energy,
            p: b.p_star,
            avg_aoi: b.avg_aoi,
            feasible: true,
        }
    }

    pub fn irsa(b: &IrsaBaseline) -> Self {
        let (p, avg_aoi) = b
            .mix
            .as_ref()
            .map_or((f64::NAN, f64::NAN), |m| (m.p_success, m.avg_aoi));
        Self {
            kind: "irsa".into(),
            parameter: b.alpha,
            energy: b.budget,
            p,
            avg_aoi,
            feasible: b.feasible,
        }
    }
}

pub fn baseline_csv(rows: &[BaselineRow], delta_max: u32, cfg_digest: &str, seed: u64) -> String {
    let mut out = comment_header(cfg_digest, seed);
    out.push_str(BASELINE_HEADER);
    out.push('\n');
    for r in rows {
        let unreached = r.avg_aoi.is_infinite();
        let aoi = if unreached { f64::from(delta_max) } else { r.avg_aoi };
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.kind, r.parameter, r.energy, r.p, aoi, r.feasible, unreached
        )
        .unwrap();
    }
    out
}

pub fn closed_loop_report(res: &ClosedLoopResult, cfg_digest: &str) -> String {
    let mut out = comment_header(cfg_digest, res.seed);
    for (key, value) in [
        ("frames", res.frames.to_string()),
        ("warmup", res.warmup.to_string()),
        ("empirical_aoi", res.mean_aoi.to_string()),
        ("empirical_energy", res.mean_energy.to_string()),
        ("empirical_load", res.empirical_load.to_string()),
    ] {
        writeln!(out, "{key}={value}").unwrap();
    }
    if let Some(gap) = &res.prediction {
        for (key, value) in [
            ("mean_field_aoi", gap.predicted_aoi.to_string()),
            ("mean_field_energy", gap.predicted_energy.to_string()),
            ("aoi_gap", gap.aoi_gap.to_string()),
            ("energy_gap", gap.energy_gap.to_string()),
            ("within_threshold", gap.within_threshold.to_string()),
        ] {
            writeln!(out, "{key}={value}").unwrap();
        }
    }
    out.push_str("[devices]\ndevice,avg_aoi,avg_energy\n");
    for (i, (a, e)) in res.device_aoi.iter().zip(&res.device_energy).enumerate() {
        writeln!(out, "{i},{a},{e}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_lines() {
        let h = comment_header("abc", 7);
        assert_eq!(h.lines().count(), 3);
        assert!(h.starts_with("# cfg_digest=abc\n# seed=7\n# version="));
    }

    #[test]
    fn policy_dump_rows() {
        let text = policy_dump(&[Action::IDLE, Action::new(2, 1)], &[0.0, 1.5], "d", 1);
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body, vec![POLICY_HEADER, "1,0,0,0", "2,2,1,1.5"]);
    }

    #[test]
    fn infinite_aoi_uses_sentinel() {
        let row = BaselineRow {
            kind: "randomized".into(),
            parameter: 0.0,
            energy: 0.0,
            p: 0.0,
            avg_aoi: f64::INFINITY,
            feasible: true,
        };
        let text = baseline_csv(&[row], 200, "d", 0);
        assert_eq!(text.lines().last().unwrap(), "randomized,0,0,0,200,true,true");
    }
}
