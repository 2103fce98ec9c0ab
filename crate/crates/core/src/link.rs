//! Link abstraction: pathloss/shadowing SINR, MCS selection, CBG-level block
//! errors with Chase combining, outer-loop link adaptation, and HARQ state.

use alloc::vec::Vec;
use rand::Rng;

use crate::math;

/// Code block groups per transport block; retransmissions address only the
/// failed groups.
pub const NUM_CBGS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pos {
    pub x: f64,
    pub y: f64,
}

impl Pos {
    pub fn dist(&self, other: &Pos) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        math::sqrt(dx * dx + dy * dy)
    }
}

/// One modulation-and-coding working point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McsEntry {
    pub spectral_efficiency: f64,
    pub sinr_threshold_db: f64,
}

/// MCS ladder ordered by spectral efficiency. Thresholds come from the
/// Shannon inverse `10·log10(2^SE − 1)`, the SINR at which the efficiency is
/// exactly achievable; the error model adds margin around it.
#[derive(Debug, Clone, PartialEq)]
pub struct McsTable {
    pub entries: Vec<McsEntry>,
}

impl Default for McsTable {
    fn default() -> Self {
        // 15 working points from QPSK-low to 256QAM-high.
        const SE: [f64; 15] = [
            0.2, 0.4, 0.7, 1.0, 1.4, 1.8, 2.3, 2.8, 3.4, 4.0, 4.6, 5.3, 6.0, 6.7, 7.4,
        ];
        let entries = SE
            .iter()
            .map(|&se| McsEntry {
                spectral_efficiency: se,
                sinr_threshold_db: 10.0 * math::log10(math::exp2(se) - 1.0),
            })
            .collect();
        Self { entries }
    }
}

impl McsTable {
    /// Data bits one PRB carries at this MCS: SE × 12 subcarriers × 13 data
    /// symbols, floored.
    pub fn bits_per_prb(&self, index: usize) -> u32 {
        let se = self.entries[index].spectral_efficiency;
        math::floor(se * 12.0 * 13.0) as u32
    }

    /// Highest index whose threshold the SINR meets; MCS 0 when below all
    /// thresholds (the link always has a working point).
    pub fn select(&self, sinr_db: f64) -> usize {
        let mut best = 0;
        for (i, e) in self.entries.iter().enumerate() {
            if sinr_db >= e.sinr_threshold_db {
                best = i;
            }
        }
        best
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Radio-link parameters shared by all cells.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub tx_power_dbm: f64,
    pub pathloss_ref_db: f64,
    pub pathloss_exponent: f64,
    pub shadowing_sigma_db: f64,
    pub min_distance_m: f64,
    /// Extra gain on the serving link only, abstracting the beamforming gain
    /// of a large antenna array over the unbeamformed interference.
    pub serving_gain_db: f64,
    pub noise_dbm: f64,
    pub bler_slope_db: f64,
    pub cbg_error_target: f64,
    pub olla_step_db: f64,
    pub olla_clamp_db: f64,
    pub cqi_period_slots: u64,
    pub cqi_delay_slots: u64,
    pub harq_rtt_slots: u64,
    pub max_harq_tx: u32,
    pub mcs: McsTable,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            tx_power_dbm: 31.0,
            pathloss_ref_db: 38.0,
            pathloss_exponent: 2.0,
            shadowing_sigma_db: 4.0,
            min_distance_m: 1.0,
            serving_gain_db: 0.0,
            // -174 dBm/Hz + 10·log10(100 MHz) + 9 dB noise figure ≈ -85 dBm
            noise_dbm: -85.0,
            bler_slope_db: 0.5,
            cbg_error_target: 0.125,
            olla_step_db: 0.1,
            olla_clamp_db: 10.0,
            cqi_period_slots: 5,
            cqi_delay_slots: 2,
            harq_rtt_slots: 5,
            max_harq_tx: 4,
            mcs: McsTable::default(),
        }
    }
}

impl LinkConfig {
    /// Log-distance pathloss in dB at distance `d_m` (clamped below).
    pub fn pathloss_db(&self, d_m: f64) -> f64 {
        let d = d_m.max(self.min_distance_m);
        self.pathloss_ref_db + 10.0 * self.pathloss_exponent * math::log10(d)
    }

    /// Sigmoid midpoint shift making the per-CBG error probability equal the
    /// target exactly at the MCS threshold.
    pub fn bler_bias_db(&self) -> f64 {
        let t = self.cbg_error_target;
        -self.bler_slope_db * math::ln((1.0 - t) / t)
    }
}

/// Wideband SINR for a UE served by `serving`, with every other cell
/// transmitting at full power (full-buffer interference). `shadowing_db[c]`
/// is the fixed shadowing realization of the link to cell `c`.
pub fn compute_avg_sinr(
    ue: Pos,
    serving: usize,
    cells: &[Pos],
    shadowing_db: &[f64],
    cfg: &LinkConfig,
) -> f64 {
    assert_eq!(cells.len(), shadowing_db.len());
    let rx_dbm = |c: usize| {
        cfg.tx_power_dbm - cfg.pathloss_db(ue.dist(&cells[c])) - shadowing_db[c]
    };
    let signal = math::db_to_lin(rx_dbm(serving) + cfg.serving_gain_db);
    let mut denom = math::db_to_lin(cfg.noise_dbm);
    for c in 0..cells.len() {
        if c != serving {
            denom += math::db_to_lin(rx_dbm(c));
        }
    }
    math::lin_to_db(signal / denom)
}

/// Per-CBG failure probability at effective SINR `sinr_eff_db` for an MCS
/// with threshold `thr_db`: a logistic curve with slope `slope_db` shifted by
/// `bias_db` so the target error rate sits on the threshold.
pub fn cbg_failure_probability(sinr_eff_db: f64, thr_db: f64, slope_db: f64, bias_db: f64) -> f64 {
    1.0 / (1.0 + math::exp((sinr_eff_db - thr_db - bias_db) / slope_db))
}

/// Effective SINR after `num_tx` transmissions with Chase combining.
pub fn chase_combined_sinr_db(sinr_db: f64, num_tx: u32) -> f64 {
    assert!(num_tx >= 1);
    sinr_db + 10.0 * math::log10(num_tx as f64)
}

/// Outer-loop link adaptation: each decoded CBG nudges the offset up by
/// `step·t/(1−t)`, each failed CBG pushes it down by `step`, keeping the
/// long-run error rate at `t`. The result is clamped to ±`clamp`.
pub fn olla_update(
    offset_db: f64,
    step_db: f64,
    target: f64,
    clamp_db: f64,
    cbg_errors: u32,
    cbg_successes: u32,
) -> f64 {
    let up = step_db * target / (1.0 - target);
    let next = offset_db - step_db * cbg_errors as f64 + up * cbg_successes as f64;
    next.clamp(-clamp_db, clamp_db)
}

/// Where a stretch of transport-block bits came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentTarget {
    /// Part of an XR PDU (identified per-UE by set and PDU index).
    Pdu { set_index: u64, pdu_index: u32 },
    /// Full-buffer best-effort filler.
    BestEffort,
}

/// A contiguous bit range of a transport block and what it carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TbSegment {
    pub target: SegmentTarget,
    pub offset_bits: u64,
    pub bits: u64,
    /// Set once every CBG overlapping the segment has decoded.
    pub credited: bool,
}

/// One transport block split into [`NUM_CBGS`] equal-share code block groups.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportBlock {
    pub size_bits: u64,
    pub segments: Vec<TbSegment>,
    pub cbg_decoded: [bool; NUM_CBGS],
}

impl TransportBlock {
    pub fn new(segments: Vec<TbSegment>) -> Self {
        let size_bits = segments.iter().map(|s| s.bits).sum();
        let mut cbg_decoded = [false; NUM_CBGS];
        // Tiny blocks can leave trailing groups empty; those are trivially done.
        for (c, d) in cbg_decoded.iter_mut().enumerate() {
            let (lo, hi) = cbg_span(size_bits, c);
            if lo == hi {
                *d = true;
            }
        }
        Self { size_bits, segments, cbg_decoded }
    }

    /// Bit range `[lo, hi)` of CBG `c`.
    pub fn cbg_range(&self, c: usize) -> (u64, u64) {
        cbg_span(self.size_bits, c)
    }

    pub fn failed_cbgs(&self) -> u32 {
        self.cbg_decoded.iter().filter(|d| !**d).count() as u32
    }

    pub fn fully_decoded(&self) -> bool {
        self.failed_cbgs() == 0
    }

    /// Whether every CBG overlapping segment `i` has decoded.
    pub fn segment_decoded(&self, i: usize) -> bool {
        let seg = &self.segments[i];
        let (s_lo, s_hi) = (seg.offset_bits, seg.offset_bits + seg.bits);
        for c in 0..NUM_CBGS {
            let (lo, hi) = self.cbg_range(c);
            if lo < s_hi && s_lo < hi && !self.cbg_decoded[c] {
                return false;
            }
        }
        true
    }
}

fn cbg_span(size_bits: u64, c: usize) -> (u64, u64) {
    let n = NUM_CBGS as u64;
    let c = c as u64;
    (size_bits * c / n, size_bits * (c + 1) / n)
}

/// Draw decode outcomes for all still-failed CBGs of `tb` at failure
/// probability `p_fail`, in CBG order. Returns how many newly decoded.
pub fn draw_cbg_outcomes<R: Rng + ?Sized>(
    tb: &mut TransportBlock,
    p_fail: f64,
    rng: &mut R,
) -> u32 {
    let mut newly = 0;
    for d in tb.cbg_decoded.iter_mut() {
        if !*d {
            let u: f64 = rng.gen();
            if u >= p_fail {
                *d = true;
                newly += 1;
            }
        }
    }
    newly
}

/// One stop-and-wait HARQ process tracking a transport block in flight.
#[derive(Debug, Clone, PartialEq)]
pub struct HarqProcess {
    pub id: u64,
    pub tb: TransportBlock,
    /// MCS of the initial transmission; retransmissions reuse it.
    pub mcs_index: usize,
    pub original_prbs: u32,
    pub num_transmissions: u32,
    /// Slot at which feedback for the latest transmission is processed.
    pub feedback_slot: u64,
    pub feedback_handled: bool,
    /// Feedback arrived with failed CBGs and a retransmission grant is due.
    pub awaiting_retx: bool,
    /// CBG errors of the first transmission (outer-loop input).
    pub first_tx_cbg_errors: u32,
}

impl HarqProcess {
    /// PRBs a retransmission occupies: the failed share of the original
    /// grant, rounded up.
    pub fn retx_prbs(&self) -> u32 {
        let failed = self.tb.failed_cbgs();
        debug_assert!(failed > 0);
        (failed * self.original_prbs).div_ceil(NUM_CBGS as u32)
    }
}
