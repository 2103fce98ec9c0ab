//! TOML format for single-cell oracle instances and the report the oracle
//! subcommand prints.

use serde::Deserialize;
use xrsched_core::exact::{
    self, MiniEmbbUe, MiniInstance, MiniPduSet, MiniXrUe, SolveError,
};
use xrsched_core::sched::SchedulerKind;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetSpec {
    size_bits: u64,
    arrival_slot: u32,
    deadline_slot: u32,
}

fn default_a_k() -> f64 {
    1000.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct XrSpec {
    #[serde(default = "default_a_k")]
    a_k: f64,
    bits_per_prb: u64,
    sets: Vec<SetSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbbSpec {
    bits_per_prb: u64,
}

fn default_fraction() -> f64 {
    0.99
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceSpec {
    num_slots: u32,
    num_prbs: u32,
    #[serde(default = "default_fraction")]
    satisfaction_fraction: f64,
    #[serde(default)]
    xr: Vec<XrSpec>,
    #[serde(default)]
    embb: Vec<EmbbSpec>,
}

pub fn load_instance(path: &std::path::Path) -> Result<MiniInstance, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let spec: InstanceSpec = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("instance parse error: {e}")))?;
    Ok(MiniInstance {
        num_slots: spec.num_slots,
        num_prbs: spec.num_prbs,
        satisfaction_fraction: spec.satisfaction_fraction,
        xr: spec
            .xr
            .into_iter()
            .map(|u| MiniXrUe {
                a_k: u.a_k,
                bits_per_prb: u.bits_per_prb,
                sets: u
                    .sets
                    .into_iter()
                    .map(|s| MiniPduSet {
                        size_bits: s.size_bits,
                        arrival_slot: s.arrival_slot,
                        deadline_slot: s.deadline_slot,
                    })
                    .collect(),
            })
            .collect(),
        embb: spec.embb.into_iter().map(|u| MiniEmbbUe { bits_per_prb: u.bits_per_prb }).collect(),
    })
}

/// Solve an instance exactly, cross-check it, and compare the per-TTI
/// heuristic against the optimum. Returns the printable report.
pub fn oracle_report(inst: &MiniInstance) -> Result<String, CliError> {
    let exact = exact::solve_exact(inst).map_err(|e| match e {
        SolveError::BadInstance(msg) => CliError::Config(format!("bad instance: {msg}")),
        too_large @ SolveError::TooLarge { .. } => CliError::Solver(too_large.to_string()),
    })?;
    let heur = exact::heuristic_on_instance(inst, SchedulerKind::Proposed);
    let gap = exact.eval.objective - heur.eval.objective;
    let validation = match exact::validate_solution(inst, &exact) {
        Ok(()) => "ok".to_string(),
        Err(errs) => format!("FAILED: {}", errs.join("; ")),
    };

    let mut out = String::new();
    out.push_str(&format!(
        "instance: {} slots x {} prbs, {} xr, {} embb, fraction {}\n",
        inst.num_slots,
        inst.num_prbs,
        inst.xr.len(),
        inst.embb.len(),
        inst.satisfaction_fraction,
    ));
    out.push_str(&format!(
        "exact:     objective {:.6}, prbs used {}, satisfied {}/{}, nodes {}\n",
        exact.eval.objective,
        exact.eval.prbs_used,
        exact.eval.gamma.iter().filter(|&&g| g).count(),
        inst.xr.len(),
        exact.nodes_visited,
    ));
    out.push_str(&format!(
        "heuristic: objective {:.6}, gap {:.6}\n",
        heur.eval.objective, gap,
    ));
    out.push_str(&format!("validator: {validation}\n"));
    out.push_str("assignment (rows = slots, cols = xr then embb):\n");
    for (s, counts) in exact.assignment.iter().enumerate() {
        let cells: Vec<String> = counts.iter().map(|c| c.to_string()).collect();
        out.push_str(&format!("  slot {s}: [{}]\n", cells.join(", ")));
    }
    if validation != "ok" {
        return Err(CliError::Solver(format!("solution failed validation:\n{out}")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_roundtrip_and_report() {
        let text = r#"
num_slots = 3
num_prbs = 2

[[xr]]
bits_per_prb = 100
sets = [{ size_bits = 150, arrival_slot = 0, deadline_slot = 1 }]

[[embb]]
bits_per_prb = 80
"#;
        let dir = std::env::temp_dir().join("xrsched-instance-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("inst.toml");
        std::fs::write(&path, text).unwrap();
        let inst = load_instance(&path).unwrap();
        assert_eq!(inst.xr.len(), 1);
        assert_eq!(inst.xr[0].a_k, 1000.0);
        assert_eq!(inst.satisfaction_fraction, 0.99);
        let report = oracle_report(&inst).unwrap();
        assert!(report.contains("validator: ok"), "{report}");
        assert!(report.contains("satisfied 1/1"), "{report}");
    }

    #[test]
    fn oversized_instance_is_refused_as_solver_error() {
        let inst = MiniInstance {
            num_slots: 10,
            num_prbs: 64,
            satisfaction_fraction: 0.99,
            xr: vec![
                MiniXrUe {
                    a_k: 1000.0,
                    bits_per_prb: 100,
                    sets: vec![MiniPduSet { size_bits: 1, arrival_slot: 0, deadline_slot: 9 }],
                };
                3
            ],
            embb: vec![MiniEmbbUe { bits_per_prb: 80 }],
        };
        match oracle_report(&inst) {
            Err(CliError::Solver(msg)) => assert!(msg.contains("too large"), "{msg}"),
            other => panic!("expected solver refusal, got {other:?}"),
        }
    }
}
