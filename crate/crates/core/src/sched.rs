//! Scheduling metrics and the per-TTI allocator.
//!
//! The allocator is pure: the engine snapshots per-UE state into candidate
//! records, and the returned allocation list is applied back onto the state.
//! Retransmissions always go first; the scheduler kind only decides how
//! new-transmission candidates are ordered.

use alloc::vec::Vec;

use crate::math;
use crate::traffic::PduSet;

/// Denominator floor for the deadline-proximity term so near-deadline sets
/// get a large but finite priority.
pub const BETA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchedulerKind {
    /// Two-stage PDU-set aware rule: XR by served-fraction/deadline urgency,
    /// then best-effort by proportional fairness.
    Proposed,
    ProportionalFair,
    WeightedProportionalFair,
    MaxLwdf,
}

impl SchedulerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchedulerKind::Proposed => "proposed",
            SchedulerKind::ProportionalFair => "pf",
            SchedulerKind::WeightedProportionalFair => "wpf",
            SchedulerKind::MaxLwdf => "mlwdf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrafficType {
    Xr,
    Embb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    Downlink,
    Special,
    Uplink,
}

impl SlotKind {
    pub fn is_downlink(&self) -> bool {
        matches!(self, SlotKind::Downlink)
    }
}

/// Exponential-average served throughput with a floor that keeps the
/// proportional-fair ratio bounded while a UE is still unserved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputTracker {
    /// Currently achievable full-band rate from the link adaptation.
    pub inst_rate_bps: f64,
    /// Exponentially averaged served rate.
    pub avg_bps: f64,
    pub tau_ttis: f64,
    pub floor_bps: f64,
}

impl ThroughputTracker {
    pub fn new(tau_ttis: f64, floor_bps: f64) -> Self {
        assert!(tau_ttis >= 1.0);
        Self { inst_rate_bps: 0.0, avg_bps: floor_bps, tau_ttis, floor_bps }
    }

    /// Fold one TTI of service (new-transmission bits only) into the average.
    /// Runs every scheduled TTI for every UE, including zero-bit ones.
    pub fn update(&mut self, served_bits: u64, tti_s: f64) {
        let inv = 1.0 / self.tau_ttis;
        self.avg_bps = (1.0 - inv) * self.avg_bps + inv * (served_bits as f64 / tti_s);
    }

    /// Proportional-fair ratio `r / max(R̄, floor)`.
    pub fn pf_ratio(&self) -> f64 {
        self.inst_rate_bps / self.avg_bps.max(self.floor_bps)
    }
}

/// Per-UE QoS knobs used by the weighted schedulers and the optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosParams {
    /// Scheduler weight (weighted proportional fairness).
    pub weight: f64,
    /// Acceptable HoL-deadline violation probability.
    pub delta: f64,
    /// Satisfaction reward in the optimization objective.
    pub a_k: f64,
}

impl QosParams {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err("delta must lie in (0, 1)");
        }
        if !(self.weight > 0.0) {
            return Err("weight must be positive");
        }
        Ok(())
    }
}

/// Fraction of a PDU-set's bits already granted to transport blocks.
pub fn alpha(set: &PduSet) -> f64 {
    assert!(set.total_size_bits > 0, "empty pdu set");
    set.served_bits as f64 / set.total_size_bits as f64
}

/// Remaining fraction of the delay budget: `1 − T/Δ` for head-of-line delay
/// `T` at `now_ms`. Negative once the deadline has passed.
pub fn beta(set: &PduSet, now_ms: f64) -> f64 {
    let budget = set.deadline_ms - set.first_arrival_ms;
    debug_assert!(budget > 0.0);
    1.0 - set.hol_delay_ms(now_ms) / budget
}

/// PDU-set aware priority: `e^α / max(β, ε)` while the budget holds, zero
/// once it is blown (expired sets are handled by a separate stage).
pub fn proposed_metric(set: &PduSet, now_ms: f64) -> f64 {
    proposed_metric_parts(alpha(set), set.hol_delay_ms(now_ms), set.deadline_ms - set.first_arrival_ms)
}

/// Scalar form of [`proposed_metric`] used by the allocator snapshot.
pub fn proposed_metric_parts(alpha: f64, hol_ms: f64, budget_ms: f64) -> f64 {
    if hol_ms >= budget_ms {
        return 0.0;
    }
    let b = 1.0 - hol_ms / budget_ms;
    math::exp(alpha) / b.max(BETA_FLOOR)
}

/// Proportional-fair metric `r/R̄`.
pub fn pf_metric(t: &ThroughputTracker) -> f64 {
    t.pf_ratio()
}

/// Weighted proportional-fair metric `w · r/R̄`.
pub fn wpf_metric(t: &ThroughputTracker, weight: f64) -> f64 {
    weight * t.pf_ratio()
}

/// M-LWDF metric for delay-bounded traffic: `(−ln δ) · (T/Δ) · r/R̄`.
pub fn mlwdf_metric_delay(t: &ThroughputTracker, delta: f64, hol_ms: f64, budget_ms: f64) -> f64 {
    assert!(delta > 0.0 && delta < 1.0, "delta outside (0,1)");
    -math::ln(delta) * (hol_ms / budget_ms) * t.pf_ratio()
}

/// M-LWDF metric for traffic without a deadline: `(−ln δ) · r/R̄`.
pub fn mlwdf_metric_nodelay(t: &ThroughputTracker, delta: f64) -> f64 {
    assert!(delta > 0.0 && delta < 1.0, "delta outside (0,1)");
    -math::ln(delta) * t.pf_ratio()
}

/// A HARQ process waiting for a retransmission grant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetxCandidate {
    pub ue: usize,
    pub traffic: TrafficType,
    pub prbs_needed: u32,
    /// Slot the NACK was processed; older feedback goes first.
    pub feedback_slot: u64,
    pub process_id: u64,
}

/// Head-of-line PDU-set snapshot for an XR candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolInfo {
    pub alpha: f64,
    pub hol_ms: f64,
    pub budget_ms: f64,
}

impl HolInfo {
    pub fn expired(&self) -> bool {
        self.hol_ms >= self.budget_ms
    }
}

/// A UE with new data to send.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewTxCandidate {
    pub ue: usize,
    pub traffic: TrafficType,
    /// Buffered bits; `None` means full-buffer (takes any leftover).
    pub pending_bits: Option<u64>,
    pub bits_per_prb: u32,
    pub pf_ratio: f64,
    pub weight: f64,
    pub delta: f64,
    /// Required for XR candidates, absent for best-effort.
    pub hol: Option<HolInfo>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrantKind {
    NewTx,
    Retx { process_id: u64 },
}

/// One scheduling decision: `prbs` PRBs to `ue`, with the sort key that won
/// them (retransmissions carry 0; they outrank every metric structurally).
/// `stage` is the priority class the grant was served in: 0 for the first
/// new-data class (all of it for the single-list schedulers), then 1 for
/// budget-expired XR and 2 for best-effort under the set-aware scheduler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    pub ue: usize,
    pub prbs: u32,
    pub kind: GrantKind,
    pub metric: f64,
    pub stage: u8,
}

/// Allocate one downlink TTI.
///
/// Phase 1 serves pending retransmissions — XR before best-effort, oldest
/// feedback first — each getting exactly its PRB need or skipped if it no
/// longer fits. Phase 2 orders new transmissions by the scheduler rule and
/// drains each candidate's buffer in turn until PRBs run out.
pub fn allocate_tti(
    kind: SchedulerKind,
    slot: SlotKind,
    retx: &[RetxCandidate],
    new_tx: &[NewTxCandidate],
    available_prbs: u32,
) -> Vec<Allocation> {
    assert!(slot.is_downlink(), "allocation requested on a non-downlink slot");
    let mut out = Vec::new();
    let mut left = available_prbs;

    // Phase 1: retransmissions.
    let mut retx_sorted: Vec<&RetxCandidate> = retx.iter().collect();
    retx_sorted.sort_by_key(|r| {
        let class = match r.traffic {
            TrafficType::Xr => 0u8,
            TrafficType::Embb => 1u8,
        };
        (class, r.feedback_slot, r.process_id, r.ue)
    });
    for r in retx_sorted {
        debug_assert!(r.prbs_needed > 0);
        if r.prbs_needed <= left {
            left -= r.prbs_needed;
            out.push(Allocation {
                ue: r.ue,
                prbs: r.prbs_needed,
                kind: GrantKind::Retx { process_id: r.process_id },
                metric: 0.0,
                stage: 0,
            });
        }
        if left == 0 {
            break;
        }
    }

    // Phase 2: new transmissions in scheduler order.
    let order = rank_new_tx(kind, new_tx);
    for (cand, stage, key) in order {
        if left == 0 {
            break;
        }
        debug_assert!(cand.pending_bits != Some(0), "candidate with empty buffer");
        let need = match cand.pending_bits {
            Some(bits) => {
                debug_assert!(cand.bits_per_prb > 0);
                bits.div_ceil(cand.bits_per_prb as u64).min(left as u64) as u32
            }
            None => left,
        };
        if need > 0 {
            left -= need;
            out.push(Allocation {
                ue: cand.ue,
                prbs: need,
                kind: GrantKind::NewTx,
                metric: key,
                stage,
            });
        }
    }
    out
}

/// Candidates in service order together with the priority class and sort key
/// each was ranked by.
fn rank_new_tx<'a>(
    kind: SchedulerKind,
    new_tx: &'a [NewTxCandidate],
) -> Vec<(&'a NewTxCandidate, u8, f64)> {
    let mut scored: Vec<(u8, f64, &NewTxCandidate)> = Vec::with_capacity(new_tx.len());
    for c in new_tx {
        match kind {
            SchedulerKind::Proposed => match c.traffic {
                TrafficType::Xr => {
                    let h = c.hol.expect("xr candidate without hol state");
                    if h.expired() {
                        // Expired sets drop behind live ones; among themselves
                        // the most nearly complete wins.
                        scored.push((1, math::exp(h.alpha), c));
                    } else {
                        scored.push((0, proposed_metric_parts(h.alpha, h.hol_ms, h.budget_ms), c));
                    }
                }
                TrafficType::Embb => scored.push((2, c.pf_ratio, c)),
            },
            SchedulerKind::ProportionalFair => scored.push((0, c.pf_ratio, c)),
            SchedulerKind::WeightedProportionalFair => {
                scored.push((0, c.weight * c.pf_ratio, c))
            }
            SchedulerKind::MaxLwdf => {
                let m = match c.traffic {
                    TrafficType::Xr => {
                        let h = c.hol.expect("xr candidate without hol state");
                        assert!(c.delta > 0.0 && c.delta < 1.0, "delta outside (0,1)");
                        -math::ln(c.delta) * (h.hol_ms / h.budget_ms) * c.pf_ratio
                    }
                    TrafficType::Embb => {
                        assert!(c.delta > 0.0 && c.delta < 1.0, "delta outside (0,1)");
                        -math::ln(c.delta) * c.pf_ratio
                    }
                };
                scored.push((0, m, c));
            }
        }
    }
    scored.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(b.1.total_cmp(&a.1))
            .then(a.2.ue.cmp(&b.2.ue))
    });
    scored.into_iter().map(|(stage, key, c)| (c, stage, key)).collect()
}
