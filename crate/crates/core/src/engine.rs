//! The drop engine: lays out cells and UEs, then walks the TDD slot grid
//! feeding arrivals, CQI, HARQ feedback, and per-cell allocation.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::link::{
    chase_combined_sinr_db, cbg_failure_probability, compute_avg_sinr, draw_cbg_outcomes,
    HarqProcess, LinkConfig, Pos, SegmentTarget, TbSegment, TransportBlock, NUM_CBGS,
};
use crate::rng;
use crate::sched::{
    allocate_tti, Allocation, GrantKind, HolInfo, NewTxCandidate, RetxCandidate, SchedulerKind,
    SlotKind, ThroughputTracker, TrafficType,
};
use crate::traffic::{FrameArrival, PduSet, XrTrafficConfig};

/// QoS and fairness knobs shared by all UEs of a traffic class.
#[derive(Debug, Clone, PartialEq)]
pub struct QosConfig {
    pub wpf_xr_weight: f64,
    pub wpf_embb_weight: f64,
    pub delta_xr: f64,
    pub delta_embb: f64,
    /// Per-UE satisfaction reward in the optimization objective.
    pub a_k: f64,
    pub tp_tau_ttis: f64,
    pub tp_floor_bps: f64,
}

impl Default for QosConfig {
    fn default() -> Self {
        Self {
            wpf_xr_weight: 1e8,
            wpf_embb_weight: 1.0,
            delta_xr: 0.01,
            delta_embb: 0.01,
            a_k: 1000.0,
            tp_tau_ttis: 100.0,
            tp_floor_bps: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scheduler: SchedulerKind,
    pub num_cells: u32,
    pub isd_m: f64,
    /// World size; zero means derive from the grid (`isd × cols` by `2.5 × isd`).
    pub world_w_m: f64,
    pub world_h_m: f64,
    pub xr_per_cell: u32,
    pub embb_per_cell: u32,
    pub slot_ms: f64,
    pub tdd_pattern: Vec<SlotKind>,
    pub num_prbs: u32,
    pub duration_ms: f64,
    pub warmup_ms: f64,
    /// Seed for the PHY randomness (CBG decode draws).
    pub seed: u64,
    /// Seed for world randomness: placement, shadowing, and traffic. Keeping
    /// it fixed across scheduler/PSDB variants gives paired comparisons.
    pub world_seed: u64,
    pub traffic: XrTrafficConfig,
    pub link: LinkConfig,
    pub qos: QosConfig,
    pub collect_trace: bool,
    /// Cross-check scheduler-contract invariants every slot, collecting
    /// violations into the result instead of asserting.
    pub validate: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scheduler: SchedulerKind::Proposed,
            num_cells: 12,
            isd_m: 20.0,
            world_w_m: 0.0,
            world_h_m: 0.0,
            xr_per_cell: 3,
            embb_per_cell: 3,
            slot_ms: 0.5,
            tdd_pattern: default_tdd_pattern(),
            num_prbs: 272,
            duration_ms: 10_500.0,
            warmup_ms: 500.0,
            seed: 1,
            world_seed: 1,
            traffic: XrTrafficConfig::default(),
            link: LinkConfig::default(),
            qos: QosConfig::default(),
            collect_trace: false,
            validate: false,
        }
    }
}

/// Three downlink, one special, one uplink slot — the classic DDDSU frame.
pub fn default_tdd_pattern() -> Vec<SlotKind> {
    alloc::vec![
        SlotKind::Downlink,
        SlotKind::Downlink,
        SlotKind::Downlink,
        SlotKind::Special,
        SlotKind::Uplink,
    ]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl core::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError(m));
        if self.num_cells == 0 {
            return err("num_cells must be at least 1".into());
        }
        if !(self.isd_m > 0.0) {
            return err("isd_m must be positive".into());
        }
        if !(self.slot_ms > 0.0) {
            return err("slot_ms must be positive".into());
        }
        if self.num_prbs == 0 {
            return err("num_prbs must be at least 1".into());
        }
        if self.tdd_pattern.is_empty() {
            return err("tdd_pattern must be nonempty".into());
        }
        if !self.tdd_pattern.iter().any(|s| s.is_downlink()) {
            return err("tdd_pattern needs at least one downlink slot".into());
        }
        if !(self.duration_ms > self.warmup_ms) {
            return err(format!(
                "duration_ms ({}) must exceed warmup_ms ({})",
                self.duration_ms, self.warmup_ms
            ));
        }
        if !(self.warmup_ms >= 0.0) {
            return err("warmup_ms must be nonnegative".into());
        }
        if self.traffic.validate().is_err() {
            return err("traffic distributions are inconsistent".into());
        }
        if !(self.traffic.psdb_ms > 0.0) {
            return err("psdb_ms must be positive".into());
        }
        if !(self.traffic.frame_rate_fps > 0.0) {
            return err("frame_rate_fps must be positive".into());
        }
        for (name, d) in [("delta_xr", self.qos.delta_xr), ("delta_embb", self.qos.delta_embb)] {
            if !(d > 0.0 && d < 1.0) {
                return err(format!("{name} must lie in (0, 1)"));
            }
        }
        if !(self.qos.tp_tau_ttis >= 1.0) {
            return err("tp_tau_ttis must be at least 1".into());
        }
        if !(self.qos.wpf_xr_weight > 0.0 && self.qos.wpf_embb_weight > 0.0) {
            return err("scheduler weights must be positive".into());
        }
        if self.link.mcs.is_empty() {
            return err("mcs table must be nonempty".into());
        }
        if self.link.max_harq_tx == 0 {
            return err("max_harq_tx must be at least 1".into());
        }
        if !(self.link.cbg_error_target > 0.0 && self.link.cbg_error_target < 1.0) {
            return err("cbg_error_target must lie in (0, 1)".into());
        }
        Ok(())
    }

    /// World rectangle, derived from the grid when not set explicitly.
    pub fn world_dims(&self) -> (f64, f64) {
        let cols = self.num_cells.div_ceil(2).max(1);
        let w = if self.world_w_m > 0.0 { self.world_w_m } else { self.isd_m * cols as f64 };
        let h = if self.world_h_m > 0.0 { self.world_h_m } else { 2.5 * self.isd_m };
        (w, h)
    }

    pub fn total_slots(&self) -> u64 {
        (self.duration_ms / self.slot_ms) as u64
    }

    pub fn warmup_slot(&self) -> u64 {
        (self.warmup_ms / self.slot_ms) as u64
    }
}

/// Cell sites on a two-row grid with `isd` spacing, centered rows.
pub fn cell_positions(cfg: &SimConfig) -> Vec<Pos> {
    let (_, h) = cfg.world_dims();
    let cols = cfg.num_cells.div_ceil(2).max(1);
    let mut out = Vec::with_capacity(cfg.num_cells as usize);
    for i in 0..cfg.num_cells {
        let row = i / cols;
        let col = i % cols;
        let x = cfg.isd_m / 2.0 + col as f64 * cfg.isd_m;
        let y = if cfg.num_cells == 1 {
            h / 2.0
        } else {
            h / 2.0 + if row == 0 { -cfg.isd_m / 2.0 } else { cfg.isd_m / 2.0 }
        };
        out.push(Pos { x, y });
    }
    out
}

/// Live state of one UE during a drop.
pub struct UeState {
    pub pos: Pos,
    pub traffic: TrafficType,
    pub shadowing_db: Vec<f64>,
    pub avg_sinr_db: f64,
    pub cqi_db: f64,
    pub pending_cqi: Option<(u64, f64)>,
    pub olla_db: f64,
    pub mcs: usize,
    pub arrivals: Vec<FrameArrival>,
    pub next_arrival: usize,
    pub next_set_index: u64,
    pub queue: VecDeque<PduSet>,
    /// Cached sum of un-granted bits across the queue.
    pub pending_bits: u64,
    pub harq: Vec<HarqProcess>,
    pub next_process_id: u64,
    pub tracker: ThroughputTracker,
}

/// Full-buffer guard: best-effort UEs always have data. Calling this for an
/// XR UE is a logic error — their buffer state lives in the PDU-set queue.
pub fn embb_has_data(ue: &UeState) -> bool {
    assert!(
        matches!(ue.traffic, TrafficType::Embb),
        "buffer query for a non-best-effort ue"
    );
    true
}

impl UeState {
    /// First queued set with un-granted bits (the head-of-line set).
    fn hol_set(&self) -> Option<&PduSet> {
        self.queue.iter().find(|s| s.pending_bits() > 0)
    }

    /// Oldest pending set still inside its delay budget.
    fn hol_live_set(&self, now_ms: f64) -> Option<&PduSet> {
        self.queue
            .iter()
            .find(|s| s.pending_bits() > 0 && !s.expired(now_ms))
    }

    /// Oldest pending set whose budget has already run out.
    fn hol_expired_set(&self, now_ms: f64) -> Option<&PduSet> {
        self.queue
            .iter()
            .find(|s| s.pending_bits() > 0 && s.expired(now_ms))
    }

    fn pending_live_bits(&self, now_ms: f64) -> u64 {
        self.queue
            .iter()
            .filter(|s| !s.expired(now_ms))
            .map(|s| s.pending_bits())
            .sum()
    }

    fn has_retx_pending(&self) -> bool {
        self.harq.iter().any(|p| p.awaiting_retx)
    }
}

/// Fate of one PDU-set, recorded when it is delivered or when the drop ends.
#[derive(Debug, Clone, PartialEq)]
pub struct SetOutcome {
    pub cell: u32,
    pub ue: u32,
    pub set_index: u64,
    pub size_bits: u64,
    pub arrival_ms: f64,
    pub deadline_ms: f64,
    pub delivered_ms: Option<f64>,
    /// Inside the measurement window: arrived after warm-up with a deadline
    /// inside the run.
    pub counted: bool,
}

impl SetOutcome {
    pub fn in_time(&self) -> bool {
        matches!(self.delivered_ms, Some(t) if t <= self.deadline_ms)
    }

    /// Delivery delay; `None` when the set never completed.
    pub fn delay_ms(&self) -> Option<f64> {
        self.delivered_ms.map(|t| t - self.arrival_ms)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub slot: u64,
    pub cell: u32,
    pub ue: u32,
    pub metric: f64,
    pub prbs: u32,
    pub is_retx: bool,
}

/// Everything a drop produces.
pub struct DropResult {
    pub scheduler: SchedulerKind,
    pub drop_index: u32,
    pub seed: u64,
    pub sets: Vec<SetOutcome>,
    /// Total queued UEs (buffered bits or pending retransmission) sampled on
    /// each post-warm-up downlink slot, across all cells.
    pub queued_samples: Vec<u32>,
    /// Decoded best-effort bits per cell inside the measurement window.
    pub embb_bits_per_cell: Vec<u64>,
    /// Measurement window length in seconds.
    pub measure_s: f64,
    pub num_xr_ues: u32,
    pub ue_sinrs_db: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub violations: Vec<String>,
}

struct CreditOutcome {
    delivered: Vec<(u64, f64)>, // (set_index, delivered_ms)
    embb_bits: u64,
}

/// Credit segments whose covering CBGs all decoded. Returns delivered sets
/// and newly credited best-effort bits.
fn credit_decodes(queue: &mut VecDeque<PduSet>, tb: &mut TransportBlock, now_end_ms: f64) -> CreditOutcome {
    let mut out = CreditOutcome { delivered: Vec::new(), embb_bits: 0 };
    for i in 0..tb.segments.len() {
        if tb.segments[i].credited || !tb.segment_decoded(i) {
            continue;
        }
        tb.segments[i].credited = true;
        let seg = tb.segments[i];
        match seg.target {
            SegmentTarget::BestEffort => out.embb_bits += seg.bits,
            SegmentTarget::Pdu { set_index, .. } => {
                let slot_pos = queue
                    .iter()
                    .position(|s| s.set_index == set_index)
                    .expect("credited segment for a set no longer queued");
                let set = &mut queue[slot_pos];
                set.decoded_bits += seg.bits;
                debug_assert!(set.decoded_bits <= set.served_bits);
                if set.decoded_bits == set.total_size_bits {
                    set.delivered_at_ms = Some(now_end_ms);
                    out.delivered.push((set_index, now_end_ms));
                }
            }
        }
    }
    out
}

/// Return granted-but-undecoded bits of an abandoned block to the buffer.
fn rollback_uncredited(queue: &mut VecDeque<PduSet>, tb: &TransportBlock, pending_bits: &mut u64) {
    for seg in &tb.segments {
        if seg.credited {
            continue;
        }
        if let SegmentTarget::Pdu { set_index, pdu_index } = seg.target {
            let set = queue
                .iter_mut()
                .find(|s| s.set_index == set_index)
                .expect("rollback for a set no longer queued");
            let pdu = &mut set.pdus[pdu_index as usize];
            pdu.remaining_bits += seg.bits;
            debug_assert!(pdu.remaining_bits <= pdu.size_bits);
            set.served_bits -= seg.bits;
            *pending_bits += seg.bits;
        }
    }
}

/// Pull up to `cap_bits` un-granted bits off the queue in FIFO order,
/// producing the transport-block segment list.
fn build_xr_segments(
    queue: &mut VecDeque<PduSet>,
    pending_bits: &mut u64,
    cap_bits: u64,
    live_first_at: Option<f64>,
) -> Vec<TbSegment> {
    // Baselines drain the buffer as one FIFO byte stream. The set-aware
    // scheduler fills in-budget sets first (oldest first) and lets sets past
    // their budget wait, so a stale backlog can't starve deliverable frames.
    let order: Vec<usize> = match live_first_at {
        None => (0..queue.len()).collect(),
        Some(now_ms) => {
            let (live, expired): (Vec<usize>, Vec<usize>) =
                (0..queue.len()).partition(|&i| !queue[i].expired(now_ms));
            live.into_iter().chain(expired).collect()
        }
    };
    let mut segs: Vec<TbSegment> = Vec::new();
    let mut offset = 0u64;
    let mut left = cap_bits;
    for i in order {
        if left == 0 {
            break;
        }
        let set = &mut queue[i];
        if set.pending_bits() == 0 {
            continue;
        }
        for pdu in set.pdus.iter_mut() {
            if left == 0 {
                break;
            }
            if pdu.remaining_bits == 0 {
                continue;
            }
            let take = pdu.remaining_bits.min(left);
            pdu.remaining_bits -= take;
            set.served_bits += take;
            *pending_bits -= take;
            left -= take;
            segs.push(TbSegment {
                target: SegmentTarget::Pdu { set_index: set.set_index, pdu_index: pdu.pdu_index },
                offset_bits: offset,
                bits: take,
                credited: false,
            });
            offset += take;
        }
    }
    segs
}

fn cap_violations(violations: &mut Vec<String>, msg: String) {
    if violations.len() < 100 {
        violations.push(msg);
    }
}

/// Contract checks on one cell-slot allocation, mirroring the scheduler's
/// documented behavior from the candidate snapshot alone.
fn allocation_violations(
    kind: SchedulerKind,
    slot: u64,
    cell: usize,
    retx: &[RetxCandidate],
    cands: &[NewTxCandidate],
    allocs: &[Allocation],
    num_prbs: u32,
    out: &mut Vec<String>,
) {
    let total: u32 = allocs.iter().map(|a| a.prbs).sum();
    if total > num_prbs {
        cap_violations(out, format!("slot {slot} cell {cell}: allocated {total} of {num_prbs} PRBs"));
    }
    if cands.iter().any(|c| c.pending_bits.is_none()) && total != num_prbs {
        cap_violations(
            out,
            format!("slot {slot} cell {cell}: full-buffer UE present but {total} < {num_prbs} PRBs used"),
        );
    }
    if let Some(first_new) = allocs.iter().position(|a| a.kind == GrantKind::NewTx) {
        if allocs[first_new..].iter().any(|a| matches!(a.kind, GrantKind::Retx { .. })) {
            cap_violations(out, format!("slot {slot} cell {cell}: retransmission after new data"));
        }
    }
    for a in allocs {
        if a.prbs == 0 {
            cap_violations(out, format!("slot {slot} cell {cell}: zero-PRB grant to ue {}", a.ue));
        }
        if let GrantKind::Retx { process_id } = a.kind {
            let want = retx
                .iter()
                .find(|r| r.process_id == process_id && r.ue == a.ue)
                .map(|r| r.prbs_needed);
            if want != Some(a.prbs) {
                cap_violations(
                    out,
                    format!("slot {slot} cell {cell}: retransmission grant size mismatch for ue {}", a.ue),
                );
            }
        }
    }
    if kind == SchedulerKind::Proposed {
        // A grant in a later stage proves the grid was not exhausted, so
        // every earlier-stage candidate must have drained completely. A UE
        // may hold one candidate per stage (in-budget and over-budget bits),
        // so attribution goes through the grant's stage, not just the UE.
        for c in cands.iter().filter(|c| c.traffic == TrafficType::Xr) {
            let c_stage = if c.hol.map_or(false, |h| h.expired()) { 1u8 } else { 0u8 };
            let later_served = allocs
                .iter()
                .any(|g| g.kind == GrantKind::NewTx && g.stage > c_stage);
            if !later_served {
                continue;
            }
            let need = c.pending_bits.unwrap_or(0).div_ceil(c.bits_per_prb as u64) as u32;
            let got: u32 = allocs
                .iter()
                .filter(|g| g.ue == c.ue && g.kind == GrantKind::NewTx && g.stage == c_stage)
                .map(|g| g.prbs)
                .sum();
            if got != need {
                cap_violations(
                    out,
                    format!(
                        "slot {slot} cell {cell}: stage-{c_stage} XR ue {} got {got} of {need} PRBs while a later stage was served",
                        c.ue
                    ),
                );
            }
        }
    }
}

fn accounting_violations(cell: usize, ue_idx: usize, ue: &UeState, slot: u64, out: &mut Vec<String>) {
    let mut pending = 0u64;
    for s in &ue.queue {
        let p = s.pending_bits();
        pending += p;
        if s.served_bits != s.total_size_bits - p {
            cap_violations(
                out,
                format!("slot {slot} cell {cell} ue {ue_idx} set {}: served/pending mismatch", s.set_index),
            );
        }
        if s.decoded_bits > s.served_bits {
            cap_violations(
                out,
                format!("slot {slot} cell {cell} ue {ue_idx} set {}: decoded exceeds served", s.set_index),
            );
        }
    }
    if pending != ue.pending_bits {
        cap_violations(
            out,
            format!("slot {slot} cell {cell} ue {ue_idx}: cached pending {} != actual {pending}", ue.pending_bits),
        );
    }
}

/// Run one drop. All randomness is derived from the config seeds and the
/// drop index, so identical inputs give identical results.
pub fn run_drop(cfg: &SimConfig, drop_index: u32) -> Result<DropResult, ConfigError> {
    cfg.validate()?;

    let cells = cell_positions(cfg);
    let (w, h) = cfg.world_dims();
    let world_base = rng::derive_seed(cfg.world_seed, "world", drop_index as u64);
    let mut phy_rng = rng::substream(rng::derive_seed(cfg.seed, "phy", drop_index as u64), "cbg", 0);

    // Each UE owns a world substream keyed by (class, cell, index): its
    // position (uniform over the cell's coverage area, by rejection) and its
    // per-link shadowing come from that stream alone. Adding UEs of either
    // class therefore never perturbs the worlds of the ones already there,
    // which keeps load sweeps paired.
    let mut ues: Vec<Vec<UeState>> = (0..cfg.num_cells).map(|_| Vec::new()).collect();
    for (class, per_cell, label) in [
        (TrafficType::Xr, cfg.xr_per_cell, "xr-world"),
        (TrafficType::Embb, cfg.embb_per_cell, "embb-world"),
    ] {
        for serving in 0..cfg.num_cells as usize {
            for idx in 0..per_cell {
                let mut ue_rng =
                    rng::substream(world_base, label, ((serving as u64) << 20) | idx as u64);
                let pos = loop {
                    let p = Pos { x: ue_rng.gen::<f64>() * w, y: ue_rng.gen::<f64>() * h };
                    if nearest_cell(p, &cells) == serving {
                        break p;
                    }
                };
                let shadowing: Vec<f64> = (0..cells.len())
                    .map(|_| {
                        let z: f64 = ue_rng.sample(StandardNormal);
                        z * cfg.link.shadowing_sigma_db
                    })
                    .collect();
                let sinr = compute_avg_sinr(pos, serving, &cells, &shadowing, &cfg.link);
                let mcs = cfg.link.mcs.select(sinr);
                ues[serving].push(UeState {
                    pos,
                    traffic: class,
                    shadowing_db: shadowing,
                    avg_sinr_db: sinr,
                    cqi_db: sinr,
                    pending_cqi: None,
                    olla_db: 0.0,
                    mcs,
                    arrivals: Vec::new(),
                    next_arrival: 0,
                    next_set_index: 0,
                    queue: VecDeque::new(),
                    pending_bits: 0,
                    harq: Vec::new(),
                    next_process_id: 0,
                    tracker: ThroughputTracker::new(cfg.qos.tp_tau_ttis, cfg.qos.tp_floor_bps),
                });
            }
        }
    }

    // Pre-draw each XR source's arrival process from its own stream so the
    // traffic is a function of (world seed, drop, ue) alone.
    for (c, cell_ues) in ues.iter_mut().enumerate() {
        for (u, ue) in cell_ues.iter_mut().enumerate() {
            if ue.traffic == TrafficType::Xr {
                let label_idx = ((c as u64) << 20) | u as u64;
                let mut traffic_rng = rng::substream(world_base, "traffic", label_idx);
                ue.arrivals = crate::traffic::generate_frame_arrivals(&cfg.traffic, cfg.duration_ms, &mut traffic_rng);
            }
        }
    }

    let bias_db = cfg.link.bler_bias_db();
    let tti_s = cfg.slot_ms / 1000.0;
    let total_slots = cfg.total_slots();
    let warmup_slot = cfg.warmup_slot();

    let mut outcomes: Vec<SetOutcome> = Vec::new();
    let mut queued_samples: Vec<u32> = Vec::new();
    let mut embb_bits: Vec<u64> = alloc::vec![0; cfg.num_cells as usize];
    let mut trace: Vec<TraceRow> = Vec::new();
    let mut violations: Vec<String> = Vec::new();

    for slot in 0..total_slots {
        let now_ms = slot as f64 * cfg.slot_ms;
        let slot_kind = cfg.tdd_pattern[(slot % cfg.tdd_pattern.len() as u64) as usize];

        for (c, cell_ues) in ues.iter_mut().enumerate() {
            for ue in cell_ues.iter_mut() {
                // Arrivals visible from the slot whose start has passed them.
                while ue.next_arrival < ue.arrivals.len()
                    && ue.arrivals[ue.next_arrival].arrival_ms <= now_ms
                {
                    let a = ue.arrivals[ue.next_arrival];
                    ue.next_arrival += 1;
                    let set = PduSet::new(
                        ue.next_set_index,
                        a.arrival_ms,
                        a.frame_bytes,
                        cfg.traffic.pdu_payload_bytes,
                        cfg.traffic.psdb_ms,
                    );
                    ue.next_set_index += 1;
                    ue.pending_bits += set.total_size_bits;
                    ue.queue.push_back(set);
                }

                // CQI measurement and delayed application.
                if slot % cfg.link.cqi_period_slots == 0 {
                    ue.pending_cqi = Some((slot + cfg.link.cqi_delay_slots, ue.avg_sinr_db));
                }
                if let Some((apply, v)) = ue.pending_cqi {
                    if apply <= slot {
                        ue.cqi_db = v;
                        ue.pending_cqi = None;
                    }
                }

                // HARQ feedback.
                for pi in 0..ue.harq.len() {
                    if ue.harq[pi].feedback_handled || ue.harq[pi].feedback_slot > slot {
                        continue;
                    }
                    ue.harq[pi].feedback_handled = true;
                    if ue.harq[pi].num_transmissions == 1 {
                        let real: u32 = (0..NUM_CBGS)
                            .filter(|&cb| {
                                let (lo, hi) = ue.harq[pi].tb.cbg_range(cb);
                                lo < hi
                            })
                            .count() as u32;
                        let errs = ue.harq[pi].first_tx_cbg_errors;
                        ue.olla_db = crate::link::olla_update(
                            ue.olla_db,
                            cfg.link.olla_step_db,
                            cfg.link.cbg_error_target,
                            cfg.link.olla_clamp_db,
                            errs,
                            real - errs,
                        );
                    }
                    if ue.harq[pi].tb.fully_decoded() {
                        ue.harq[pi].awaiting_retx = false; // done, drop below
                    } else if ue.harq[pi].num_transmissions >= cfg.link.max_harq_tx {
                        let tb = ue.harq[pi].tb.clone();
                        rollback_uncredited(&mut ue.queue, &tb, &mut ue.pending_bits);
                        ue.harq[pi].awaiting_retx = false;
                    } else {
                        ue.harq[pi].awaiting_retx = true;
                    }
                }
                ue.harq.retain(|p| !p.feedback_handled || p.awaiting_retx);
            }

            let _ = c;
        }

        if slot_kind.is_downlink() {
            let mut queued_now: u32 = 0;
            for (c, cell_ues) in ues.iter_mut().enumerate() {
                // Refresh the link working point and candidate snapshot.
                let mut retx: Vec<RetxCandidate> = Vec::new();
                let mut cands: Vec<NewTxCandidate> = Vec::new();
                for (u, ue) in cell_ues.iter_mut().enumerate() {
                    ue.mcs = cfg.link.mcs.select(ue.cqi_db + ue.olla_db);
                    let bpp = cfg.link.mcs.bits_per_prb(ue.mcs);
                    ue.tracker.inst_rate_bps = bpp as f64 * cfg.num_prbs as f64 / tti_s;

                    for p in ue.harq.iter().filter(|p| p.awaiting_retx) {
                        retx.push(RetxCandidate {
                            ue: u,
                            traffic: ue.traffic,
                            prbs_needed: p.retx_prbs().min(cfg.num_prbs),
                            feedback_slot: p.feedback_slot,
                            process_id: p.id,
                        });
                    }

                    match ue.traffic {
                        TrafficType::Xr => {
                            if ue.pending_bits > 0 {
                                let xr_candidate = |pending: u64, anchor: &PduSet| NewTxCandidate {
                                    ue: u,
                                    traffic: TrafficType::Xr,
                                    pending_bits: Some(pending),
                                    bits_per_prb: bpp,
                                    pf_ratio: ue.tracker.pf_ratio(),
                                    weight: cfg.qos.wpf_xr_weight,
                                    delta: cfg.qos.delta_xr,
                                    hol: Some(HolInfo {
                                        alpha: crate::sched::alpha(anchor),
                                        hol_ms: anchor.hol_delay_ms(now_ms),
                                        budget_ms: anchor.deadline_ms - anchor.first_arrival_ms,
                                    }),
                                };
                                if cfg.scheduler == SchedulerKind::Proposed {
                                    // The set-aware scheduler sees the buffer
                                    // in two parts: in-budget sets compete on
                                    // the urgency metric, sets past their
                                    // budget only get what is left after
                                    // every in-budget set in the cell.
                                    let live = ue.pending_live_bits(now_ms);
                                    if let Some(anchor) = ue.hol_live_set(now_ms) {
                                        cands.push(xr_candidate(live, anchor));
                                    }
                                    if let Some(anchor) = ue.hol_expired_set(now_ms) {
                                        cands.push(xr_candidate(ue.pending_bits - live, anchor));
                                    }
                                } else {
                                    // Baselines see one FIFO byte queue.
                                    let hol =
                                        ue.hol_set().expect("pending bits without a hol set");
                                    cands.push(xr_candidate(ue.pending_bits, hol));
                                }
                            }
                        }
                        TrafficType::Embb => {
                            if embb_has_data(ue) {
                                cands.push(NewTxCandidate {
                                    ue: u,
                                    traffic: TrafficType::Embb,
                                    pending_bits: None,
                                    bits_per_prb: bpp,
                                    pf_ratio: ue.tracker.pf_ratio(),
                                    weight: cfg.qos.wpf_embb_weight,
                                    delta: cfg.qos.delta_embb,
                                    hol: None,
                                });
                            }
                        }
                    }

                    if ue.pending_bits > 0 || ue.has_retx_pending() {
                        queued_now += 1;
                    }
                }

                let allocs = allocate_tti(cfg.scheduler, slot_kind, &retx, &cands, cfg.num_prbs);

                if cfg.validate {
                    allocation_violations(
                        cfg.scheduler,
                        slot,
                        c,
                        &retx,
                        &cands,
                        &allocs,
                        cfg.num_prbs,
                        &mut violations,
                    );
                }

                // Apply grants in order; PRB ranges are implicit (disjoint by
                // construction since the counts sum within the grid).
                let now_end_ms = (slot + 1) as f64 * cfg.slot_ms;
                let mut served_newtx: Vec<(usize, u64)> = Vec::new();
                for a in &allocs {
                    let ue = &mut cell_ues[a.ue];
                    match a.kind {
                        GrantKind::Retx { process_id } => {
                            let p = ue
                                .harq
                                .iter_mut()
                                .find(|p| p.id == process_id)
                                .expect("granted retransmission without a process");
                            p.num_transmissions += 1;
                            let eff = chase_combined_sinr_db(ue.avg_sinr_db, p.num_transmissions);
                            let thr = cfg.link.mcs.entries[p.mcs_index].sinr_threshold_db;
                            let pf = cbg_failure_probability(eff, thr, cfg.link.bler_slope_db, bias_db);
                            draw_cbg_outcomes(&mut p.tb, pf, &mut phy_rng);
                            p.feedback_slot = slot + cfg.link.harq_rtt_slots;
                            p.feedback_handled = false;
                            p.awaiting_retx = false;
                            let credit = credit_decodes(&mut ue.queue, &mut p.tb, now_end_ms);
                            apply_credit(
                                credit,
                                c,
                                a.ue,
                                &mut ue.queue,
                                &mut outcomes,
                                &mut embb_bits,
                                slot >= warmup_slot,
                                cfg,
                            );
                        }
                        GrantKind::NewTx => {
                            let bpp = cfg.link.mcs.bits_per_prb(ue.mcs);
                            let cap_bits = a.prbs as u64 * bpp as u64;
                            let segments = match ue.traffic {
                                TrafficType::Xr => build_xr_segments(
                                    &mut ue.queue,
                                    &mut ue.pending_bits,
                                    cap_bits,
                                    (cfg.scheduler == SchedulerKind::Proposed).then_some(now_ms),
                                ),
                                TrafficType::Embb => alloc::vec![TbSegment {
                                    target: SegmentTarget::BestEffort,
                                    offset_bits: 0,
                                    bits: cap_bits,
                                    credited: false,
                                }],
                            };
                            debug_assert!(!segments.is_empty());
                            let mut tb = TransportBlock::new(segments);
                            let thr = cfg.link.mcs.entries[ue.mcs].sinr_threshold_db;
                            let pf = cbg_failure_probability(
                                chase_combined_sinr_db(ue.avg_sinr_db, 1),
                                thr,
                                cfg.link.bler_slope_db,
                                bias_db,
                            );
                            draw_cbg_outcomes(&mut tb, pf, &mut phy_rng);
                            let errors = tb
                                .cbg_decoded
                                .iter()
                                .enumerate()
                                .filter(|(cb, d)| {
                                    let (lo, hi) = tb.cbg_range(*cb);
                                    lo < hi && !**d
                                })
                                .count() as u32;
                            let credit = credit_decodes(&mut ue.queue, &mut tb, now_end_ms);
                            let size = tb.size_bits;
                            let pid = ue.next_process_id;
                            ue.next_process_id += 1;
                            ue.harq.push(HarqProcess {
                                id: pid,
                                tb,
                                mcs_index: ue.mcs,
                                original_prbs: a.prbs,
                                num_transmissions: 1,
                                feedback_slot: slot + cfg.link.harq_rtt_slots,
                                feedback_handled: false,
                                awaiting_retx: false,
                                first_tx_cbg_errors: errors,
                            });
                            served_newtx.push((a.ue, size));
                            apply_credit(
                                credit,
                                c,
                                a.ue,
                                &mut ue.queue,
                                &mut outcomes,
                                &mut embb_bits,
                                slot >= warmup_slot,
                                cfg,
                            );
                        }
                    }
                    if cfg.collect_trace {
                        trace.push(TraceRow {
                            slot,
                            cell: c as u32,
                            ue: a.ue as u32,
                            metric: a.metric,
                            prbs: a.prbs,
                            is_retx: matches!(a.kind, GrantKind::Retx { .. }),
                        });
                    }
                }

                // Throughput averages fold in this TTI for every UE.
                for (u, ue) in cell_ues.iter_mut().enumerate() {
                    let bits: u64 = served_newtx
                        .iter()
                        .filter(|(su, _)| *su == u)
                        .map(|(_, b)| *b)
                        .sum();
                    ue.tracker.update(bits, tti_s);
                    if cfg.validate {
                        accounting_violations(c, u, ue, slot, &mut violations);
                    }
                }
            }
            if slot >= warmup_slot {
                queued_samples.push(queued_now);
            }
        }
    }

    // Whatever is still queued never completed.
    let mut num_xr = 0u32;
    let mut sinrs: Vec<f64> = Vec::new();
    for (c, cell_ues) in ues.iter_mut().enumerate() {
        for (u, ue) in cell_ues.iter_mut().enumerate() {
            sinrs.push(ue.avg_sinr_db);
            if ue.traffic == TrafficType::Xr {
                num_xr += 1;
            }
            for set in ue.queue.drain(..) {
                debug_assert!(set.delivered_at_ms.is_none());
                outcomes.push(set_outcome(c as u32, u as u32, &set, cfg));
            }
        }
    }
    outcomes.sort_by(|a, b| {
        (a.cell, a.ue, a.set_index).cmp(&(b.cell, b.ue, b.set_index))
    });

    Ok(DropResult {
        scheduler: cfg.scheduler,
        drop_index,
        seed: rng::derive_seed(cfg.seed, "drop", drop_index as u64),
        sets: outcomes,
        queued_samples,
        embb_bits_per_cell: embb_bits,
        measure_s: (cfg.duration_ms - cfg.warmup_ms) / 1000.0,
        num_xr_ues: num_xr,
        ue_sinrs_db: sinrs,
        trace,
        violations,
    })
}

#[allow(clippy::too_many_arguments)]
fn apply_credit(
    credit: CreditOutcome,
    cell: usize,
    ue_idx: usize,
    queue: &mut VecDeque<PduSet>,
    outcomes: &mut Vec<SetOutcome>,
    embb_bits: &mut [u64],
    in_window: bool,
    cfg: &SimConfig,
) {
    if in_window {
        embb_bits[cell] += credit.embb_bits;
    }
    for (set_index, _) in credit.delivered {
        let pos = queue
            .iter()
            .position(|s| s.set_index == set_index)
            .expect("delivered set not in queue");
        let set = queue.remove(pos).unwrap();
        outcomes.push(set_outcome(cell as u32, ue_idx as u32, &set, cfg));
    }
}

fn set_outcome(cell: u32, ue: u32, set: &PduSet, cfg: &SimConfig) -> SetOutcome {
    SetOutcome {
        cell,
        ue,
        set_index: set.set_index,
        size_bits: set.total_size_bits,
        arrival_ms: set.first_arrival_ms,
        deadline_ms: set.deadline_ms,
        delivered_ms: set.delivered_at_ms,
        counted: set.first_arrival_ms >= cfg.warmup_ms && set.deadline_ms <= cfg.duration_ms,
    }
}

fn nearest_cell(pos: Pos, cells: &[Pos]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in cells.iter().enumerate() {
        let d = pos.dist(c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}
