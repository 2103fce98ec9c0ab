//! XR traffic model: periodic video frames with truncated-Gaussian size and
//! arrival jitter, segmented into fixed-payload PDUs grouped as PDU-sets.

use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::math;

/// Truncated Gaussian parameters. `std == 0` degenerates to a point mass at
/// `mean` (bounds still checked).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedGaussianParams {
    pub mean: f64,
    pub std: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrafficError {
    /// lower ≤ mean ≤ upper violated, bounds inverted, or std negative.
    BadTruncation,
    /// PDU payload must be nonzero.
    ZeroPayload,
}

impl TruncatedGaussianParams {
    pub fn new(mean: f64, std: f64, lower: f64, upper: f64) -> Result<Self, TrafficError> {
        let p = Self { mean, std, lower, upper };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), TrafficError> {
        let ok = self.std >= 0.0
            && self.lower <= self.mean
            && self.mean <= self.upper
            && (self.lower < self.upper || self.std == 0.0)
            && self.mean.is_finite()
            && self.std.is_finite()
            && self.lower.is_finite()
            && self.upper.is_finite();
        if ok {
            Ok(())
        } else {
            Err(TrafficError::BadTruncation)
        }
    }

    /// Draw one sample by rejection. The acceptance window always covers the
    /// mean, so the expected number of attempts is small (< 2 for any window
    /// at least one std wide on one side).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        debug_assert!(self.validate().is_ok());
        if self.std == 0.0 {
            return self.mean;
        }
        loop {
            let z: f64 = rng.sample(StandardNormal);
            let x = self.mean + self.std * z;
            if x >= self.lower && x <= self.upper {
                return x;
            }
        }
    }
}

/// XR source configuration. Frame sizes are drawn in kilobytes (1 kB =
/// 1000 bytes) and rounded to whole bytes; jitter is in milliseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct XrTrafficConfig {
    pub frame_rate_fps: f64,
    pub frame_size_kb: TruncatedGaussianParams,
    pub jitter_ms: TruncatedGaussianParams,
    pub psdb_ms: f64,
    pub pdu_payload_bytes: u32,
}

impl Default for XrTrafficConfig {
    fn default() -> Self {
        Self {
            frame_rate_fps: 60.0,
            frame_size_kb: TruncatedGaussianParams {
                mean: 93.0,
                std: 10.0,
                lower: 46.0,
                upper: 141.0,
            },
            jitter_ms: TruncatedGaussianParams {
                mean: 0.0,
                std: 2.0,
                lower: -4.0,
                upper: 4.0,
            },
            psdb_ms: 15.0,
            pdu_payload_bytes: 1500,
        }
    }
}

impl XrTrafficConfig {
    pub fn validate(&self) -> Result<(), TrafficError> {
        self.frame_size_kb.validate()?;
        self.jitter_ms.validate()?;
        if self.pdu_payload_bytes == 0 {
            return Err(TrafficError::ZeroPayload);
        }
        Ok(())
    }

    /// Mean offered rate in bits per second implied by the configuration
    /// (ignoring truncation skew, which is negligible for symmetric windows).
    pub fn nominal_rate_bps(&self) -> f64 {
        self.frame_size_kb.mean * 1000.0 * 8.0 * self.frame_rate_fps
    }
}

/// One video frame arrival: when it hits the gNB buffer and how big it is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameArrival {
    pub arrival_ms: f64,
    pub frame_bytes: u64,
}

/// Generate all frame arrivals in `[0, duration_ms)`. Frame n is nominally at
/// `n / fps` seconds, shifted by per-frame jitter; output is sorted by the
/// jittered arrival time so a frame delayed past its successor is handled in
/// arrival order.
pub fn generate_frame_arrivals<R: Rng + ?Sized>(
    config: &XrTrafficConfig,
    duration_ms: f64,
    rng: &mut R,
) -> Vec<FrameArrival> {
    let period_ms = 1000.0 / config.frame_rate_fps;
    let mut out = Vec::new();
    let mut n = 0u64;
    loop {
        let nominal = n as f64 * period_ms;
        if nominal >= duration_ms {
            break;
        }
        let jitter = config.jitter_ms.sample(rng);
        let kb = config.frame_size_kb.sample(rng);
        let bytes = math::round(kb * 1000.0).max(1.0) as u64;
        let arrival = (nominal + jitter).max(0.0);
        if arrival < duration_ms {
            out.push(FrameArrival { arrival_ms: arrival, frame_bytes: bytes });
        }
        n += 1;
    }
    out.sort_by(|a, b| a.arrival_ms.partial_cmp(&b.arrival_ms).unwrap());
    out
}

/// One IP packet of a frame. `remaining_bits` counts bits not yet granted in
/// any transport block; it is restored if a HARQ process carrying part of the
/// PDU is abandoned.
#[derive(Debug, Clone, PartialEq)]
pub struct Pdu {
    pub pdu_index: u32,
    pub size_bits: u64,
    pub remaining_bits: u64,
}

/// Split a frame into payload-sized PDUs; the last carries the remainder.
/// Total PDU bits always equal `frame_bytes * 8`.
pub fn segment_frame(frame_bytes: u64, pdu_payload_bytes: u32) -> Vec<Pdu> {
    assert!(pdu_payload_bytes > 0, "pdu payload must be nonzero");
    assert!(frame_bytes > 0, "empty frame");
    let payload = pdu_payload_bytes as u64;
    let n = frame_bytes.div_ceil(payload);
    let mut pdus = Vec::with_capacity(n as usize);
    let mut left = frame_bytes;
    for i in 0..n {
        let b = left.min(payload);
        pdus.push(Pdu {
            pdu_index: i as u32,
            size_bits: b * 8,
            remaining_bits: b * 8,
        });
        left -= b;
    }
    debug_assert_eq!(left, 0);
    pdus
}

/// All PDUs of one video frame, sharing an arrival instant and a delivery
/// deadline `first_arrival_ms + psdb`.
///
/// Bit accounting: `served_bits` counts bits granted into transport blocks
/// (the basis for the served fraction used by the scheduler metric);
/// `decoded_bits` counts bits the UE has successfully decoded. Both are ≤
/// `total_size_bits`; `decoded_bits ≤ served_bits`. A set is delivered when
/// every bit is decoded.
#[derive(Debug, Clone, PartialEq)]
pub struct PduSet {
    pub set_index: u64,
    pub first_arrival_ms: f64,
    pub deadline_ms: f64,
    pub total_size_bits: u64,
    pub pdus: Vec<Pdu>,
    pub served_bits: u64,
    pub decoded_bits: u64,
    pub delivered_at_ms: Option<f64>,
}

impl PduSet {
    pub fn new(
        set_index: u64,
        arrival_ms: f64,
        frame_bytes: u64,
        pdu_payload_bytes: u32,
        psdb_ms: f64,
    ) -> Self {
        let pdus = segment_frame(frame_bytes, pdu_payload_bytes);
        let total: u64 = pdus.iter().map(|p| p.size_bits).sum();
        Self {
            set_index,
            first_arrival_ms: arrival_ms,
            deadline_ms: arrival_ms + psdb_ms,
            total_size_bits: total,
            pdus,
            served_bits: 0,
            decoded_bits: 0,
            delivered_at_ms: None,
        }
    }

    /// Bits not yet granted into any transport block.
    pub fn pending_bits(&self) -> u64 {
        self.pdus.iter().map(|p| p.remaining_bits).sum()
    }

    /// Head-of-line delay at `now_ms`.
    pub fn hol_delay_ms(&self, now_ms: f64) -> f64 {
        now_ms - self.first_arrival_ms
    }

    /// Whether the deadline has passed at `now_ms` (delay ≥ budget).
    pub fn expired(&self, now_ms: f64) -> bool {
        self.hol_delay_ms(now_ms) >= self.deadline_ms - self.first_arrival_ms
    }

    pub fn in_time(&self) -> bool {
        match self.delivered_at_ms {
            Some(t) => t <= self.deadline_ms,
            None => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    #[test]
    fn truncation_validation() {
        assert!(TruncatedGaussianParams::new(93.0, 10.0, 46.0, 141.0).is_ok());
        // mean outside window
        assert_eq!(
            TruncatedGaussianParams::new(10.0, 1.0, 20.0, 30.0).unwrap_err(),
            TrafficError::BadTruncation
        );
        // inverted bounds
        assert!(TruncatedGaussianParams::new(0.0, 1.0, 4.0, -4.0).is_err());
        // negative std
        assert!(TruncatedGaussianParams::new(0.0, -1.0, -4.0, 4.0).is_err());
        // degenerate point mass is fine even with lower == upper
        assert!(TruncatedGaussianParams::new(5.0, 0.0, 5.0, 5.0).is_ok());
    }

    #[test]
    fn zero_std_returns_mean_exactly() {
        let p = TruncatedGaussianParams::new(93.0, 0.0, 46.0, 141.0).unwrap();
        let mut r = rng::stream(1);
        for _ in 0..100 {
            assert_eq!(p.sample(&mut r), 93.0);
        }
    }

    #[test]
    fn samples_respect_bounds() {
        let p = TruncatedGaussianParams::new(0.0, 2.0, -4.0, 4.0).unwrap();
        let mut r = rng::stream(7);
        for _ in 0..100_000 {
            let x = p.sample(&mut r);
            assert!((-4.0..=4.0).contains(&x), "sample {x} out of bounds");
        }
    }

    #[test]
    fn frame_size_sample_mean_near_nominal() {
        // For TN(93, 10, 46, 141) the truncation is ~4.7 std on each side, so
        // the truncated mean is 93 to well under 0.01; Monte Carlo error at
        // 1e5 samples is ~0.03, so ±0.3 is a robust check.
        let p = TruncatedGaussianParams::new(93.0, 10.0, 46.0, 141.0).unwrap();
        let mut r = rng::stream(11);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            acc += p.sample(&mut r);
        }
        let mean = acc / n as f64;
        assert!((mean - 93.0).abs() < 0.3, "mean {mean}");
    }

    #[test]
    fn arrivals_without_jitter_sit_on_frame_grid() {
        let mut cfg = XrTrafficConfig::default();
        cfg.jitter_ms = TruncatedGaussianParams::new(0.0, 0.0, 0.0, 0.0).unwrap();
        let mut r = rng::stream(3);
        let arr = generate_frame_arrivals(&cfg, 50.0, &mut r);
        assert_eq!(arr.len(), 3); // 0, 16.67, 33.33; 50.0 excluded
        assert!((arr[0].arrival_ms - 0.0).abs() < 1e-12);
        assert!((arr[1].arrival_ms - 1000.0 / 60.0).abs() < 1e-9);
        assert!((arr[2].arrival_ms - 2000.0 / 60.0).abs() < 1e-9);
    }

    #[test]
    fn arrivals_sorted_and_jitter_bounded() {
        let cfg = XrTrafficConfig::default();
        let mut r = rng::stream(5);
        let arr = generate_frame_arrivals(&cfg, 10_000.0, &mut r);
        let period = 1000.0 / 60.0;
        assert_eq!(arr.len(), 600);
        for w in arr.windows(2) {
            assert!(w[0].arrival_ms <= w[1].arrival_ms);
        }
        // Every arrival is within 4 ms of some frame grid point.
        for a in &arr {
            let k = math::round(a.arrival_ms / period);
            assert!((a.arrival_ms - k * period).abs() <= 4.0 + 1e-9);
        }
    }

    #[test]
    fn offered_load_matches_nominal_rate() {
        let cfg = XrTrafficConfig::default();
        let mut r = rng::stream(13);
        let dur_ms = 60_000.0;
        let arr = generate_frame_arrivals(&cfg, dur_ms, &mut r);
        let bits: u64 = arr.iter().map(|a| a.frame_bytes * 8).sum();
        let rate = bits as f64 / (dur_ms / 1000.0);
        // 93 kB * 8 * 60 fps = 44.64 Mbps, i.e. the ~45 Mbps single-stream load.
        let target = 45.0e6;
        assert!(
            (rate - target).abs() / target < 0.02,
            "offered {rate:.0} bps vs {target:.0}"
        );
    }

    #[test]
    fn segmentation_exact_multiple() {
        let pdus = segment_frame(93_000, 1500);
        assert_eq!(pdus.len(), 62);
        assert!(pdus.iter().all(|p| p.size_bits == 1500 * 8));
        let total: u64 = pdus.iter().map(|p| p.size_bits).sum();
        assert_eq!(total, 93_000 * 8);
    }

    #[test]
    fn segmentation_with_remainder() {
        let pdus = segment_frame(46_000, 1500);
        // 30 full PDUs + one of 1000 bytes
        assert_eq!(pdus.len(), 31);
        assert_eq!(pdus[30].size_bits, 1000 * 8);
        let total: u64 = pdus.iter().map(|p| p.size_bits).sum();
        assert_eq!(total, 46_000 * 8);
        assert_eq!(pdus[5].pdu_index, 5);
    }

    #[test]
    fn segmentation_single_byte() {
        let pdus = segment_frame(1, 1500);
        assert_eq!(pdus.len(), 1);
        assert_eq!(pdus[0].size_bits, 8);
    }

    #[test]
    fn pdu_set_accounting_fields() {
        let s = PduSet::new(4, 100.0, 3000, 1500, 15.0);
        assert_eq!(s.total_size_bits, 24_000);
        assert_eq!(s.pending_bits(), 24_000);
        assert_eq!(s.served_bits, 0);
        assert_eq!(s.deadline_ms, 115.0);
        assert!(!s.expired(110.0));
        assert!(s.expired(115.0));
        assert!(!s.in_time());
    }

    proptest! {
        #[test]
        fn segmentation_conserves_bytes(bytes in 1u64..2_000_000, payload in 1u32..9000) {
            let pdus = segment_frame(bytes, payload);
            let total: u64 = pdus.iter().map(|p| p.size_bits).sum();
            prop_assert_eq!(total, bytes * 8);
            prop_assert_eq!(pdus.len() as u64, bytes.div_ceil(payload as u64));
            // all but last are full
            for p in &pdus[..pdus.len() - 1] {
                prop_assert_eq!(p.size_bits, payload as u64 * 8);
            }
        }

        #[test]
        fn truncated_samples_in_window(
            mean in -50.0f64..50.0,
            std in 0.0f64..10.0,
            half in 0.1f64..20.0,
            seed in 0u64..1000,
        ) {
            let p = TruncatedGaussianParams::new(mean, std, mean - half, mean + half).unwrap();
            let mut r = rng::stream(seed);
            for _ in 0..64 {
                let x = p.sample(&mut r);
                prop_assert!(x >= p.lower && x <= p.upper);
            }
        }
    }
}
