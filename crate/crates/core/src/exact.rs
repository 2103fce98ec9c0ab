//! Exact reference solver for small scheduling instances.
//!
//! The optimization: assign whole PRBs per slot to UEs, maximizing
//! `Σ_k a_k·γ_k + Σ_e ln(max(R_e, 1))` where `γ_k` says XR UE `k` delivered
//! its required share of PDU-sets inside their windows and `R_e` is the
//! best-effort rate in bits per slot. Ideal links: a PRB always carries
//! `bits_per_prb` bits. Within one UE's grant stream, bits are attributed to
//! sets earliest-deadline-first, which is optimal for the per-UE subproblem,
//! so delivery indicators are a pure function of the PRB count matrix.
//!
//! The solver enumerates per-slot PRB count vectors depth-first with
//! branch-and-bound, seeded with the production heuristic as the incumbent.
//! It refuses instances whose enumeration exceeds the leaf budget.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math;
use crate::sched::{
    allocate_tti, GrantKind, HolInfo, NewTxCandidate, SchedulerKind, SlotKind, ThroughputTracker,
    TrafficType,
};

pub const DEFAULT_LEAF_BUDGET: f64 = 2e7;
/// Refuse to materialize more per-slot count vectors than this.
const MAX_COMPOSITIONS: f64 = 3e6;
const OBJ_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiniPduSet {
    pub size_bits: u64,
    pub arrival_slot: u32,
    pub deadline_slot: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiniXrUe {
    pub a_k: f64,
    pub bits_per_prb: u64,
    pub sets: Vec<MiniPduSet>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiniEmbbUe {
    pub bits_per_prb: u64,
}

/// A single-cell instance small enough to solve exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct MiniInstance {
    pub num_slots: u32,
    pub num_prbs: u32,
    /// Share of an XR UE's sets that must arrive in time for satisfaction.
    pub satisfaction_fraction: f64,
    pub xr: Vec<MiniXrUe>,
    pub embb: Vec<MiniEmbbUe>,
}

impl MiniInstance {
    pub fn num_entities(&self) -> usize {
        self.xr.len() + self.embb.len()
    }

    /// Sets a UE must deliver for satisfaction.
    pub fn quota(&self, k: usize) -> u32 {
        let n = self.xr[k].sets.len() as f64;
        math::ceil(self.satisfaction_fraction * n - 1e-9).max(0.0) as u32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveError {
    BadInstance(String),
    /// Enumeration would blow the budget; the size estimate explains why.
    TooLarge {
        per_slot_vectors: f64,
        num_slots: u32,
        leaves_log10: f64,
        budget_log10: f64,
    },
}

impl core::fmt::Display for SolveError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SolveError::BadInstance(m) => write!(f, "bad instance: {m}"),
            SolveError::TooLarge { per_slot_vectors, num_slots, leaves_log10, budget_log10 } => {
                write!(
                    f,
                    "instance too large for exact search: {per_slot_vectors:.3e} count vectors per slot over {num_slots} slots is ~10^{leaves_log10:.1} leaves (budget 10^{budget_log10:.1})"
                )
            }
        }
    }
}

pub fn validate_instance(inst: &MiniInstance) -> Result<(), SolveError> {
    let err = |m: String| Err(SolveError::BadInstance(m));
    if inst.num_slots == 0 {
        return err("num_slots must be at least 1".into());
    }
    if inst.num_prbs == 0 {
        return err("num_prbs must be at least 1".into());
    }
    if !(0.0..=1.0).contains(&inst.satisfaction_fraction) {
        return err("satisfaction_fraction must lie in [0, 1]".into());
    }
    for (k, ue) in inst.xr.iter().enumerate() {
        if ue.bits_per_prb == 0 {
            return err(format!("xr ue {k}: bits_per_prb must be positive"));
        }
        if !(ue.a_k >= 0.0) {
            return err(format!("xr ue {k}: a_k must be nonnegative"));
        }
        for (i, s) in ue.sets.iter().enumerate() {
            if s.size_bits == 0 {
                return err(format!("xr ue {k} set {i}: empty set"));
            }
            if s.arrival_slot > s.deadline_slot {
                return err(format!("xr ue {k} set {i}: deadline before arrival"));
            }
            if s.deadline_slot >= inst.num_slots {
                return err(format!("xr ue {k} set {i}: deadline outside the horizon"));
            }
        }
    }
    for (e, ue) in inst.embb.iter().enumerate() {
        if ue.bits_per_prb == 0 {
            return err(format!("embb ue {e}: bits_per_prb must be positive"));
        }
    }
    Ok(())
}

/// Everything derived from one assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    /// Per XR UE, per set: delivered inside its window.
    pub y: Vec<Vec<bool>>,
    pub gamma: Vec<bool>,
    /// Bits attributed to set `i` of UE `k` in slot `s`.
    pub z_bits: Vec<Vec<Vec<u64>>>,
    pub embb_bits: Vec<u64>,
    pub prbs_used: u32,
}

/// Evaluate an assignment: `counts[s]` holds per-entity PRB counts (XR UEs
/// first, then best-effort). Bits within a UE stream go to the active set
/// with the earliest deadline.
pub fn evaluate_objective(inst: &MiniInstance, counts: &[Vec<u32>]) -> Evaluation {
    assert_eq!(counts.len(), inst.num_slots as usize, "slot count mismatch");
    for row in counts {
        assert_eq!(row.len(), inst.num_entities(), "entity count mismatch");
        let total: u32 = row.iter().sum();
        assert!(total <= inst.num_prbs, "assignment exceeds the PRB grid");
    }

    let s_total = inst.num_slots as usize;
    let mut y: Vec<Vec<bool>> = Vec::with_capacity(inst.xr.len());
    let mut z: Vec<Vec<Vec<u64>>> = Vec::with_capacity(inst.xr.len());
    let mut gamma = Vec::with_capacity(inst.xr.len());
    let mut objective = 0.0;

    for (k, ue) in inst.xr.iter().enumerate() {
        let mut need: Vec<u64> = ue.sets.iter().map(|s| s.size_bits).collect();
        let mut zk = alloc::vec![alloc::vec![0u64; s_total]; ue.sets.len()];
        for s in 0..s_total {
            let mut supply = counts[s][k] as u64 * ue.bits_per_prb;
            while supply > 0 {
                let active = (0..ue.sets.len())
                    .filter(|&i| {
                        need[i] > 0
                            && ue.sets[i].arrival_slot as usize <= s
                            && s <= ue.sets[i].deadline_slot as usize
                    })
                    .min_by_key(|&i| (ue.sets[i].deadline_slot, i));
                let Some(i) = active else { break };
                let take = need[i].min(supply);
                need[i] -= take;
                supply -= take;
                zk[i][s] += take;
            }
        }
        let yk: Vec<bool> = need.iter().map(|&n| n == 0).collect();
        let delivered = yk.iter().filter(|d| **d).count() as u32;
        let g = delivered >= inst.quota(k);
        if g {
            objective += ue.a_k;
        }
        y.push(yk);
        z.push(zk);
        gamma.push(g);
    }

    let mut embb_bits = Vec::with_capacity(inst.embb.len());
    for (e, ue) in inst.embb.iter().enumerate() {
        let bits: u64 = (0..s_total)
            .map(|s| counts[s][inst.xr.len() + e] as u64 * ue.bits_per_prb)
            .sum();
        let rate = bits as f64 / inst.num_slots as f64;
        objective += math::ln(rate.max(1.0));
        embb_bits.push(bits);
    }

    let prbs_used = counts.iter().map(|row| row.iter().sum::<u32>()).sum();
    Evaluation { objective, y, gamma, z_bits: z, embb_bits, prbs_used }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub assignment: Vec<Vec<u32>>,
    pub eval: Evaluation,
    pub nodes_visited: u64,
    /// Objective the heuristic incumbent achieved before the search.
    pub incumbent_objective: f64,
}

fn binom(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc *= (n - i) as f64 / (i + 1) as f64;
        if acc > 1e300 {
            return f64::INFINITY;
        }
    }
    acc
}

/// All per-slot count vectors with `Σ counts ≤ prbs`, lexicographically
/// ascending, so the depth-first search visits assignments in flat
/// lexicographic order.
fn compositions(entities: usize, prbs: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = alloc::vec![0u32; entities];
    fn rec(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, idx: usize, left: u32) {
        if idx == cur.len() {
            out.push(cur.clone());
            return;
        }
        for c in 0..=left {
            cur[idx] = c;
            rec(out, cur, idx + 1, left - c);
        }
        cur[idx] = 0;
    }
    rec(&mut out, &mut cur, 0, prbs);
    out
}

struct Undo {
    ue: usize,
    set: usize,
    bits: u64,
}

struct Search<'a> {
    inst: &'a MiniInstance,
    comps: Vec<Vec<u32>>,
    counts: Vec<Vec<u32>>,
    need: Vec<Vec<u64>>,
    embb_bits: Vec<u64>,
    best: Best,
    nodes: u64,
    node_cap: u64,
}

#[derive(Clone)]
struct Best {
    objective: f64,
    prbs: u32,
    counts: Vec<Vec<u32>>,
}

impl<'a> Search<'a> {
    /// Objective at a leaf, from incremental state.
    fn leaf_objective(&self) -> f64 {
        let mut obj = 0.0;
        for (k, ue) in self.inst.xr.iter().enumerate() {
            let delivered = self.need[k].iter().filter(|&&n| n == 0).count() as u32;
            if delivered >= self.inst.quota(k) {
                obj += ue.a_k;
            }
        }
        for (e, ue) in self.inst.embb.iter().enumerate() {
            let _ = ue;
            let rate = self.embb_bits[e] as f64 / self.inst.num_slots as f64;
            obj += math::ln(rate.max(1.0));
        }
        obj
    }

    /// Optimistic bound for slots `s..S`: every set can use the whole grid
    /// inside its remaining window, every best-effort UE the whole grid in
    /// every remaining slot.
    fn upper_bound(&self, s: u32) -> f64 {
        let mut ub = 0.0;
        let grid = self.inst.num_prbs as u64;
        for (k, ue) in self.inst.xr.iter().enumerate() {
            let mut reachable = 0u32;
            for (i, set) in ue.sets.iter().enumerate() {
                if self.need[k][i] == 0 {
                    reachable += 1;
                    continue;
                }
                let lo = set.arrival_slot.max(s);
                if lo > set.deadline_slot {
                    continue;
                }
                let window_slots = (set.deadline_slot - lo + 1) as u64;
                if self.need[k][i] <= window_slots * grid * ue.bits_per_prb {
                    reachable += 1;
                }
            }
            if reachable >= self.inst.quota(k) {
                ub += ue.a_k;
            }
        }
        let rem = (self.inst.num_slots - s) as u64;
        for (e, ue) in self.inst.embb.iter().enumerate() {
            let bits = self.embb_bits[e] + rem * grid * ue.bits_per_prb;
            let rate = bits as f64 / self.inst.num_slots as f64;
            ub += math::ln(rate.max(1.0));
        }
        ub
    }

    fn consider_leaf(&mut self, prbs: u32) {
        let obj = self.leaf_objective();
        let better = obj > self.best.objective + OBJ_EPS
            || ((obj - self.best.objective).abs() <= OBJ_EPS
                && (prbs < self.best.prbs
                    || (prbs == self.best.prbs && flat_less(&self.counts, &self.best.counts))));
        if better {
            self.best = Best { objective: obj, prbs, counts: self.counts.clone() };
        }
    }

    fn dfs(&mut self, s: u32, prbs: u32) -> Result<(), SolveError> {
        self.nodes += 1;
        if self.nodes > self.node_cap {
            return Err(SolveError::TooLarge {
                per_slot_vectors: self.comps.len() as f64,
                num_slots: self.inst.num_slots,
                leaves_log10: f64::INFINITY,
                budget_log10: math::log10(self.node_cap as f64),
            });
        }
        if s == self.inst.num_slots {
            self.consider_leaf(prbs);
            return Ok(());
        }
        if self.upper_bound(s) < self.best.objective - OBJ_EPS {
            return Ok(());
        }
        for ci in 0..self.comps.len() {
            let mut journal: Vec<Undo> = Vec::new();
            let slot_prbs: u32 = self.comps[ci].iter().sum();
            // apply
            for k in 0..self.inst.xr.len() {
                let mut supply = self.comps[ci][k] as u64 * self.inst.xr[k].bits_per_prb;
                while supply > 0 {
                    let sets = &self.inst.xr[k].sets;
                    let active = (0..sets.len())
                        .filter(|&i| {
                            self.need[k][i] > 0
                                && sets[i].arrival_slot <= s
                                && s <= sets[i].deadline_slot
                        })
                        .min_by_key(|&i| (sets[i].deadline_slot, i));
                    let Some(i) = active else { break };
                    let take = self.need[k][i].min(supply);
                    self.need[k][i] -= take;
                    supply -= take;
                    journal.push(Undo { ue: k, set: i, bits: take });
                }
            }
            for e in 0..self.inst.embb.len() {
                self.embb_bits[e] +=
                    self.comps[ci][self.inst.xr.len() + e] as u64 * self.inst.embb[e].bits_per_prb;
            }
            self.counts[s as usize].copy_from_slice(&self.comps[ci]);

            let r = self.dfs(s + 1, prbs + slot_prbs);

            // undo
            self.counts[s as usize].iter_mut().for_each(|c| *c = 0);
            for e in 0..self.inst.embb.len() {
                self.embb_bits[e] -=
                    self.comps[ci][self.inst.xr.len() + e] as u64 * self.inst.embb[e].bits_per_prb;
            }
            for u in journal {
                self.need[u.ue][u.set] += u.bits;
            }
            r?;
        }
        Ok(())
    }
}

fn flat_less(a: &[Vec<u32>], b: &[Vec<u32>]) -> bool {
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            if x != y {
                return x < y;
            }
        }
    }
    false
}

pub fn solve_exact(inst: &MiniInstance) -> Result<ExactSolution, SolveError> {
    solve_exact_with_budget(inst, DEFAULT_LEAF_BUDGET)
}

/// Exhaustive branch-and-bound over per-slot PRB count vectors. `leaf_budget`
/// caps the worst-case leaf count before any pruning.
pub fn solve_exact_with_budget(
    inst: &MiniInstance,
    leaf_budget: f64,
) -> Result<ExactSolution, SolveError> {
    validate_instance(inst)?;
    let m = inst.num_entities();
    let per_slot = binom(inst.num_prbs as u64 + m as u64, m as u64);
    let leaves_log10 = inst.num_slots as f64 * math::log10(per_slot);
    if per_slot > MAX_COMPOSITIONS || leaves_log10 > math::log10(leaf_budget) {
        return Err(SolveError::TooLarge {
            per_slot_vectors: per_slot,
            num_slots: inst.num_slots,
            leaves_log10,
            budget_log10: math::log10(leaf_budget),
        });
    }

    // Production heuristic as the incumbent: the exact optimum can only be
    // at least as good.
    let heur = heuristic_on_instance(inst, SchedulerKind::Proposed);
    let incumbent_objective = heur.eval.objective;

    let mut search = Search {
        inst,
        comps: compositions(m, inst.num_prbs),
        counts: alloc::vec![alloc::vec![0u32; m]; inst.num_slots as usize],
        need: inst
            .xr
            .iter()
            .map(|ue| ue.sets.iter().map(|s| s.size_bits).collect())
            .collect(),
        embb_bits: alloc::vec![0u64; inst.embb.len()],
        best: Best {
            objective: heur.eval.objective,
            prbs: heur.eval.prbs_used,
            counts: heur.assignment.clone(),
        },
        nodes: 0,
        node_cap: (leaf_budget * 4.0) as u64,
    };
    search.dfs(0, 0)?;

    let best = search.best.clone();
    let eval = evaluate_objective(inst, &best.counts);
    debug_assert!((eval.objective - best.objective).abs() < 1e-6);
    Ok(ExactSolution {
        assignment: best.counts,
        eval,
        nodes_visited: search.nodes,
        incumbent_objective,
    })
}

/// The production allocator run on the instance's ideal links: every slot is
/// downlink, grants always decode, PF state evolves exactly as in the full
/// simulator (unit slot time, bits-per-slot rates).
pub struct HeuristicRun {
    pub assignment: Vec<Vec<u32>>,
    pub eval: Evaluation,
}

pub fn heuristic_on_instance(inst: &MiniInstance, kind: SchedulerKind) -> HeuristicRun {
    let m = inst.num_entities();
    let s_total = inst.num_slots as usize;
    let mut counts = alloc::vec![alloc::vec![0u32; m]; s_total];
    // granted bits per xr set, FIFO-served like the live buffer walk
    let mut granted: Vec<Vec<u64>> = inst
        .xr
        .iter()
        .map(|ue| alloc::vec![0u64; ue.sets.len()])
        .collect();
    let mut trackers: Vec<ThroughputTracker> =
        (0..m).map(|_| ThroughputTracker::new(100.0, 1e3)).collect();

    for s in 0..inst.num_slots {
        let mut cands: Vec<NewTxCandidate> = Vec::new();
        for (k, ue) in inst.xr.iter().enumerate() {
            trackers[k].inst_rate_bps = (ue.bits_per_prb * inst.num_prbs as u64) as f64;
            // FIFO order: arrival then index, mirroring the live queue.
            let mut order: Vec<usize> = (0..ue.sets.len())
                .filter(|&i| ue.sets[i].arrival_slot <= s)
                .collect();
            order.sort_by_key(|&i| (ue.sets[i].arrival_slot, i));
            let pending: u64 = order
                .iter()
                .map(|&i| ue.sets[i].size_bits - granted[k][i])
                .sum();
            if pending == 0 {
                continue;
            }
            let hol = *order
                .iter()
                .find(|&&i| granted[k][i] < ue.sets[i].size_bits)
                .expect("pending bits without a hol set");
            let set = &ue.sets[hol];
            let budget = (set.deadline_slot - set.arrival_slot + 1) as f64;
            cands.push(NewTxCandidate {
                ue: k,
                traffic: TrafficType::Xr,
                pending_bits: Some(pending),
                bits_per_prb: ue.bits_per_prb as u32,
                pf_ratio: trackers[k].pf_ratio(),
                weight: 1e8,
                delta: 0.01,
                hol: Some(HolInfo {
                    alpha: granted[k][hol] as f64 / set.size_bits as f64,
                    hol_ms: (s - set.arrival_slot) as f64,
                    budget_ms: budget,
                }),
            });
        }
        for (e, ue) in inst.embb.iter().enumerate() {
            let idx = inst.xr.len() + e;
            trackers[idx].inst_rate_bps = (ue.bits_per_prb * inst.num_prbs as u64) as f64;
            cands.push(NewTxCandidate {
                ue: idx,
                traffic: TrafficType::Embb,
                pending_bits: None,
                bits_per_prb: ue.bits_per_prb as u32,
                pf_ratio: trackers[idx].pf_ratio(),
                weight: 1.0,
                delta: 0.01,
                hol: None,
            });
        }

        let allocs = allocate_tti(kind, SlotKind::Downlink, &[], &cands, inst.num_prbs);
        let mut served = alloc::vec![0u64; m];
        for a in &allocs {
            debug_assert_eq!(a.kind, GrantKind::NewTx);
            counts[s as usize][a.ue] = a.prbs;
            if a.ue < inst.xr.len() {
                let k = a.ue;
                let ue = &inst.xr[k];
                let mut cap = a.prbs as u64 * ue.bits_per_prb;
                let mut order: Vec<usize> = (0..ue.sets.len())
                    .filter(|&i| ue.sets[i].arrival_slot <= s)
                    .collect();
                order.sort_by_key(|&i| (ue.sets[i].arrival_slot, i));
                for i in order {
                    if cap == 0 {
                        break;
                    }
                    let left = ue.sets[i].size_bits - granted[k][i];
                    let take = left.min(cap);
                    granted[k][i] += take;
                    cap -= take;
                    served[k] += take;
                }
            } else {
                served[a.ue] = a.prbs as u64 * inst.embb[a.ue - inst.xr.len()].bits_per_prb;
            }
        }
        for (i, t) in trackers.iter_mut().enumerate() {
            t.update(served[i], 1.0);
        }
    }

    let eval = evaluate_objective(inst, &counts);
    HeuristicRun { assignment: counts, eval }
}

/// Independent feasibility checker: verifies a solution against the
/// optimization constraints using only counting arguments (no shared
/// attribution code). Returns all violations found.
pub fn validate_solution(inst: &MiniInstance, sol: &ExactSolution) -> Result<(), Vec<String>> {
    let mut errs: Vec<String> = Vec::new();
    let counts = &sol.assignment;
    let s_total = inst.num_slots as usize;
    let m = inst.num_entities();

    if counts.len() != s_total {
        errs.push(format!("assignment has {} slots, expected {s_total}", counts.len()));
        return Err(errs);
    }
    for (s, row) in counts.iter().enumerate() {
        if row.len() != m {
            errs.push(format!("slot {s}: {} entities, expected {m}", row.len()));
            return Err(errs);
        }
        let total: u32 = row.iter().sum();
        if total > inst.num_prbs {
            errs.push(format!("slot {s}: {total} PRBs exceed the {} grid", inst.num_prbs));
        }
    }

    for (k, ue) in inst.xr.iter().enumerate() {
        let yk = &sol.eval.y[k];
        if yk.len() != ue.sets.len() {
            errs.push(format!("ue {k}: y has wrong length"));
            continue;
        }
        // Hall condition over slot intervals: selected sets whose windows fit
        // inside [s1, s2] can't need more bits than the UE's supply there.
        let supply_in = |s1: u32, s2: u32| -> u64 {
            (s1..=s2).map(|s| counts[s as usize][k] as u64 * ue.bits_per_prb).sum()
        };
        for s1 in 0..inst.num_slots {
            for s2 in s1..inst.num_slots {
                let demand: u64 = ue
                    .sets
                    .iter()
                    .enumerate()
                    .filter(|(i, set)| {
                        yk[*i] && set.arrival_slot >= s1 && set.deadline_slot <= s2
                    })
                    .map(|(_, set)| set.size_bits)
                    .sum();
                if demand > supply_in(s1, s2) {
                    errs.push(format!(
                        "ue {k}: selected sets in slots [{s1},{s2}] need {demand} bits, supply is {}",
                        supply_in(s1, s2)
                    ));
                }
            }
        }
        // gamma implies the quota of delivered sets.
        let delivered = yk.iter().filter(|d| **d).count() as u32;
        if sol.eval.gamma[k] && delivered < inst.quota(k) {
            errs.push(format!(
                "ue {k}: gamma set with only {delivered} of {} required sets",
                inst.quota(k)
            ));
        }
        // z consistency: in-window, inside granted supply, sums match y.
        for (i, set) in ue.sets.iter().enumerate() {
            let zk = &sol.eval.z_bits[k][i];
            let mut sum = 0u64;
            for (s, &bits) in zk.iter().enumerate() {
                if bits == 0 {
                    continue;
                }
                sum += bits;
                let s = s as u32;
                if s < set.arrival_slot || s > set.deadline_slot {
                    errs.push(format!("ue {k} set {i}: bits attributed outside the window at slot {s}"));
                }
                if counts[s as usize][k] == 0 {
                    errs.push(format!("ue {k} set {i}: bits attributed in unallocated slot {s}"));
                }
            }
            if yk[i] && sum != set.size_bits {
                errs.push(format!("ue {k} set {i}: marked delivered but only {sum} bits attributed"));
            }
            if sum > set.size_bits {
                errs.push(format!("ue {k} set {i}: overfull attribution"));
            }
        }
        for s in 0..s_total {
            let used: u64 = (0..ue.sets.len()).map(|i| sol.eval.z_bits[k][i][s]).sum();
            if used > counts[s][k] as u64 * ue.bits_per_prb {
                errs.push(format!("ue {k} slot {s}: attribution exceeds granted supply"));
            }
        }
    }

    // Recompute the objective from gamma and raw counts.
    let mut obj = 0.0;
    for (k, ue) in inst.xr.iter().enumerate() {
        if sol.eval.gamma[k] {
            obj += ue.a_k;
        }
    }
    for (e, ue) in inst.embb.iter().enumerate() {
        let bits: u64 = (0..s_total)
            .map(|s| counts[s][inst.xr.len() + e] as u64 * ue.bits_per_prb)
            .sum();
        if bits != sol.eval.embb_bits[e] {
            errs.push(format!("embb ue {e}: recorded bits disagree with the assignment"));
        }
        obj += math::ln((bits as f64 / inst.num_slots as f64).max(1.0));
    }
    if (obj - sol.eval.objective).abs() > 1e-6 {
        errs.push(format!(
            "objective mismatch: recomputed {obj}, solution says {}",
            sol.eval.objective
        ));
    }

    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MiniInstance {
        MiniInstance {
            num_slots: 3,
            num_prbs: 2,
            satisfaction_fraction: 1.0,
            xr: alloc::vec![MiniXrUe {
                a_k: 1000.0,
                bits_per_prb: 600,
                sets: alloc::vec![
                    MiniPduSet { size_bits: 900, arrival_slot: 0, deadline_slot: 1 },
                    MiniPduSet { size_bits: 600, arrival_slot: 1, deadline_slot: 2 },
                ],
            }],
            embb: alloc::vec![MiniEmbbUe { bits_per_prb: 500 }],
        }
    }

    #[test]
    fn instance_validation() {
        assert!(validate_instance(&tiny()).is_ok());
        let mut bad = tiny();
        bad.xr[0].sets[0].deadline_slot = 5; // horizon is 3 slots
        assert!(matches!(validate_instance(&bad), Err(SolveError::BadInstance(_))));
        let mut bad = tiny();
        bad.satisfaction_fraction = 1.5;
        assert!(validate_instance(&bad).is_err());
    }

    #[test]
    fn quota_rounding() {
        let mut i = tiny();
        i.satisfaction_fraction = 0.99;
        assert_eq!(i.quota(0), 2); // ceil(0.99 * 2)
        i.xr[0].sets = alloc::vec![
            MiniPduSet { size_bits: 1, arrival_slot: 0, deadline_slot: 0 };
            100
        ];
        assert_eq!(i.quota(0), 99); // exactly 0.99 * 100, no float creep
        i.satisfaction_fraction = 1.0;
        assert_eq!(i.quota(0), 100);
    }

    #[test]
    fn evaluation_attributes_bits_edf() {
        let inst = tiny();
        // slot 0: 2 PRBs to XR (1200 bits), slot 1: 1+1, slot 2: 0+2
        let counts = alloc::vec![
            alloc::vec![2u32, 0u32],
            alloc::vec![1, 1],
            alloc::vec![0, 2],
        ];
        let ev = evaluate_objective(&inst, &counts);
        // slot 0: 1200 bits -> set 0 takes 900 (deadline 1), set 1 not arrived,
        // 300 spill to nothing (set 1 arrives slot 1)
        assert_eq!(ev.z_bits[0][0][0], 900);
        assert_eq!(ev.z_bits[0][1][0], 0);
        // slot 1: 600 bits -> set 1
        assert_eq!(ev.z_bits[0][1][1], 600);
        assert_eq!(ev.y[0], alloc::vec![true, true]);
        assert!(ev.gamma[0]);
        // embb: slot1 500 + slot2 1000 = 1500 bits over 3 slots -> rate 500
        assert_eq!(ev.embb_bits[0], 1500);
        let want = 1000.0 + math::ln(500.0);
        assert!((ev.objective - want).abs() < 1e-9);
        assert_eq!(ev.prbs_used, 6);
    }

    #[test]
    fn evaluation_prefers_earlier_deadline() {
        let mut inst = tiny();
        inst.xr[0].sets = alloc::vec![
            MiniPduSet { size_bits: 600, arrival_slot: 0, deadline_slot: 2 },
            MiniPduSet { size_bits: 600, arrival_slot: 0, deadline_slot: 1 },
        ];
        let counts = alloc::vec![
            alloc::vec![1u32, 0u32],
            alloc::vec![1, 0],
            alloc::vec![0, 0],
        ];
        let ev = evaluate_objective(&inst, &counts);
        // set 1 (deadline 1) drains first despite its later index
        assert_eq!(ev.z_bits[0][1][0], 600);
        assert_eq!(ev.z_bits[0][0][1], 600);
        assert_eq!(ev.y[0], alloc::vec![true, true]);
    }

    #[test]
    fn exact_matches_plain_enumeration() {
        // Independent oracle: enumerate every assignment directly and take
        // the best under the same tie-break.
        let inst = tiny();
        let m = inst.num_entities();
        let comps = compositions(m, inst.num_prbs);
        let mut best: Option<(f64, u32, Vec<Vec<u32>>)> = None;
        for a in 0..comps.len() {
            for b in 0..comps.len() {
                for c in 0..comps.len() {
                    let counts = alloc::vec![comps[a].clone(), comps[b].clone(), comps[c].clone()];
                    let ev = evaluate_objective(&inst, &counts);
                    let better = match &best {
                        None => true,
                        Some((obj, prbs, cur)) => {
                            ev.objective > obj + OBJ_EPS
                                || ((ev.objective - obj).abs() <= OBJ_EPS
                                    && (ev.prbs_used < *prbs
                                        || (ev.prbs_used == *prbs && flat_less(&counts, cur))))
                        }
                    };
                    if better {
                        best = Some((ev.objective, ev.prbs_used, counts));
                    }
                }
            }
        }
        let (obj, prbs, counts) = best.unwrap();
        let sol = solve_exact(&inst).unwrap();
        assert!((sol.eval.objective - obj).abs() < 1e-9);
        assert_eq!(sol.eval.prbs_used, prbs);
        assert_eq!(sol.assignment, counts);
        assert!(validate_solution(&inst, &sol).is_ok());
    }

    #[test]
    fn exact_never_below_heuristic() {
        let inst = tiny();
        let h = heuristic_on_instance(&inst, SchedulerKind::Proposed);
        let sol = solve_exact(&inst).unwrap();
        assert!(sol.eval.objective >= h.eval.objective - 1e-9);
        assert!((sol.incumbent_objective - h.eval.objective).abs() < 1e-12);
    }

    #[test]
    fn heuristic_single_feasible_ue_hits_optimum() {
        // One XR UE, no competition, plenty of capacity: draining the buffer
        // earliest-first delivers every set, which is clearly optimal.
        let mut inst = tiny();
        inst.embb.clear();
        let h = heuristic_on_instance(&inst, SchedulerKind::Proposed);
        let sol = solve_exact(&inst).unwrap();
        assert!((h.eval.objective - sol.eval.objective).abs() < 1e-9);
        assert!(h.eval.gamma[0]);
    }

    #[test]
    fn solver_refuses_oversized_instances() {
        let mut inst = tiny();
        inst.num_prbs = 64;
        inst.num_slots = 6;
        inst.xr.push(inst.xr[0].clone());
        match solve_exact(&inst) {
            Err(SolveError::TooLarge { leaves_log10, .. }) => {
                assert!(leaves_log10 > 20.0);
            }
            other => panic!("expected refusal, got {other:?}"),
        }
        // the refusal message carries the size estimate
        let msg = alloc::format!("{}", solve_exact(&inst).unwrap_err());
        assert!(msg.contains("too large"));
    }

    #[test]
    fn validator_catches_corruption() {
        let inst = tiny();
        let sol = solve_exact(&inst).unwrap();

        let mut bad = sol.clone();
        bad.eval.gamma[0] = true;
        bad.eval.y[0] = alloc::vec![false, false];
        let errs = validate_solution(&inst, &bad).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("gamma")));

        let mut bad = sol.clone();
        bad.assignment[0][0] = 99;
        let errs = validate_solution(&inst, &bad).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("exceed")));

        let mut bad = sol.clone();
        // claim an undeliverable set was delivered
        bad.eval.y[0] = alloc::vec![true, true];
        bad.assignment = alloc::vec![alloc::vec![0, 0]; 3];
        bad.eval.z_bits = alloc::vec![alloc::vec![alloc::vec![0; 3]; 2]];
        bad.eval.embb_bits[0] = 0;
        let errs = validate_solution(&inst, &bad).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("need")));
    }

    #[test]
    fn dropping_a_competitor_never_hurts() {
        let inst = tiny();
        let full = solve_exact(&inst).unwrap();
        let mut alone = inst.clone();
        alone.embb.clear();
        let solo = solve_exact(&alone).unwrap();
        // Removing the best-effort UE removes its ln term but frees PRBs for
        // the XR quota: gamma can only stay or improve.
        assert!(solo.eval.gamma[0] as u32 >= full.eval.gamma[0] as u32);
    }

    #[test]
    fn infeasible_quota_costs_gamma() {
        let mut inst = tiny();
        // 2 PRBs * 600 bits over the 2-slot window can't cover 3000 bits.
        inst.xr[0].sets = alloc::vec![MiniPduSet {
            size_bits: 3000,
            arrival_slot: 0,
            deadline_slot: 1
        }];
        let sol = solve_exact(&inst).unwrap();
        assert!(!sol.eval.gamma[0]);
        assert_eq!(sol.eval.y[0], alloc::vec![false]);
        // grid goes to the best-effort UE instead
        assert!(sol.eval.embb_bits[0] > 0);
    }

    #[test]
    fn empty_instance_is_trivial() {
        let inst = MiniInstance {
            num_slots: 2,
            num_prbs: 4,
            satisfaction_fraction: 0.99,
            xr: Vec::new(),
            embb: Vec::new(),
        };
        let sol = solve_exact(&inst).unwrap();
        assert_eq!(sol.eval.objective, 0.0);
        assert_eq!(sol.eval.prbs_used, 0);
        assert!(validate_solution(&inst, &sol).is_ok());
    }

    fn random_instance(rng: &mut impl rand::Rng, single_xr: bool) -> MiniInstance {
        let num_slots = rng.gen_range(2..=4u32);
        let num_prbs = rng.gen_range(2..=3u32);
        let num_xr = if single_xr { 1 } else { rng.gen_range(1..=2usize) };
        let num_embb = if single_xr { 0 } else { rng.gen_range(0..=1usize) };
        let mut xr = Vec::new();
        for _ in 0..num_xr {
            let bpp = rng.gen_range(100..=400u64);
            let num_sets = rng.gen_range(1..=3usize);
            // a fixed per-UE window length keeps FIFO order equal to
            // deadline order, like a constant delay budget
            let window = rng.gen_range(1..=2u32);
            let mut sets = Vec::new();
            for _ in 0..num_sets {
                let arrival = rng.gen_range(0..num_slots);
                let deadline = (arrival + window - 1).min(num_slots - 1);
                sets.push(MiniPduSet {
                    size_bits: rng.gen_range(50..=600u64),
                    arrival_slot: arrival,
                    deadline_slot: deadline,
                });
            }
            sets.sort_by_key(|s| (s.arrival_slot, s.deadline_slot));
            xr.push(MiniXrUe { a_k: 1000.0, bits_per_prb: bpp, sets });
        }
        let embb = (0..num_embb)
            .map(|_| MiniEmbbUe { bits_per_prb: rng.gen_range(100..=400u64) })
            .collect();
        MiniInstance {
            num_slots,
            num_prbs,
            satisfaction_fraction: if rng.gen_bool(0.5) { 1.0 } else { 0.99 },
            xr,
            embb,
        }
    }

    #[test]
    fn random_suite_exact_dominates_and_validates() {
        let mut rng = crate::rng::stream(0x5eed_e7ac);
        for trial in 0..60 {
            let inst = random_instance(&mut rng, false);
            let h = heuristic_on_instance(&inst, SchedulerKind::Proposed);
            let sol = solve_exact(&inst)
                .unwrap_or_else(|e| panic!("trial {trial}: solver refused: {e}"));
            assert!(
                sol.eval.objective >= h.eval.objective - 1e-9,
                "trial {trial}: exact {} below heuristic {}",
                sol.eval.objective,
                h.eval.objective
            );
            if let Err(errs) = validate_solution(&inst, &sol) {
                panic!("trial {trial}: validator rejected the optimum: {errs:?}");
            }
        }
    }

    #[test]
    fn random_single_ue_feasible_instances_solved_exactly_by_heuristic() {
        // One XR UE with a constant window length: the FIFO buffer walk is
        // deadline order, so whenever full-grid service delivers everything,
        // the heuristic ties the optimum.
        let mut rng = crate::rng::stream(0xfee1_600d);
        let mut checked = 0;
        for _ in 0..80 {
            let inst = random_instance(&mut rng, true);
            let full_grid = alloc::vec![alloc::vec![inst.num_prbs]; inst.num_slots as usize];
            if !evaluate_objective(&inst, &full_grid).y[0].iter().all(|&d| d) {
                continue; // infeasible even with the whole grid to itself
            }
            let h = heuristic_on_instance(&inst, SchedulerKind::Proposed);
            let sol = solve_exact(&inst).unwrap();
            assert!(
                (h.eval.objective - sol.eval.objective).abs() < 1e-9,
                "heuristic {} vs exact {} on {inst:?}",
                h.eval.objective,
                sol.eval.objective
            );
            checked += 1;
        }
        assert!(checked >= 30, "only {checked} feasible draws; generator drifted");
    }

    #[test]
    fn heuristic_runs_under_every_policy() {
        let inst = tiny();
        for kind in [
            SchedulerKind::Proposed,
            SchedulerKind::ProportionalFair,
            SchedulerKind::WeightedProportionalFair,
            SchedulerKind::MaxLwdf,
        ] {
            let h = heuristic_on_instance(&inst, kind);
            assert_eq!(h.assignment.len(), inst.num_slots as usize);
            // an assignment produced by the allocator always evaluates cleanly
            assert!(h.eval.objective.is_finite());
        }
    }
}
