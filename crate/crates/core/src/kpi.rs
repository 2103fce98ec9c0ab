//! KPI extraction from drop results: satisfaction, XR capacity, delay
//! distributions, queue depth, and best-effort throughput.

use alloc::vec::Vec;

use crate::engine::DropResult;

/// Counted-set delivery record for one XR UE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UeSetStats {
    pub cell: u32,
    pub ue: u32,
    pub in_time: u64,
    pub counted: u64,
}

impl UeSetStats {
    /// A UE is satisfied when its in-time share of counted sets meets the
    /// threshold. UEs whose window held no counted sets pass vacuously; the
    /// caller should ensure runs are long enough that this never matters.
    pub fn satisfied(&self, threshold: f64) -> bool {
        if self.counted == 0 {
            return true;
        }
        self.in_time as f64 >= threshold * self.counted as f64 - 1e-9
    }
}

/// Group a drop's counted sets by UE.
pub fn per_ue_stats(drop: &DropResult) -> Vec<UeSetStats> {
    let mut out: Vec<UeSetStats> = Vec::new();
    for s in drop.sets.iter().filter(|s| s.counted) {
        let entry = match out.iter_mut().find(|u| u.cell == s.cell && u.ue == s.ue) {
            Some(e) => e,
            None => {
                out.push(UeSetStats { cell: s.cell, ue: s.ue, in_time: 0, counted: 0 });
                out.last_mut().unwrap()
            }
        };
        entry.counted += 1;
        if s.in_time() {
            entry.in_time += 1;
        }
    }
    out
}

/// Fraction of UEs (pooled across drops) meeting the per-UE threshold.
pub fn satisfied_fraction(stats: &[UeSetStats], per_ue_threshold: f64) -> f64 {
    assert!(!stats.is_empty(), "no UE statistics to aggregate");
    let n = stats.iter().filter(|u| u.satisfied(per_ue_threshold)).count();
    n as f64 / stats.len() as f64
}

/// XR capacity estimate from a satisfaction-vs-load sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XrCapacity {
    /// The curve crosses the target inside the sweep.
    Interpolated(f64),
    /// Satisfaction never fell below target: capacity is right-censored.
    AtLeast(u32),
    /// Already below target at the lightest load: left-censored.
    Below(u32),
}

impl XrCapacity {
    pub fn value(&self) -> f64 {
        match self {
            XrCapacity::Interpolated(v) => *v,
            XrCapacity::AtLeast(n) => *n as f64,
            XrCapacity::Below(n) => *n as f64,
        }
    }
}

/// Locate the supported XR load: the last downward crossing of `target` on
/// the piecewise-linear satisfaction curve, with censoring at either edge.
/// `points` are `(xr_per_cell, satisfied_fraction)` in increasing load order.
pub fn xr_capacity(points: &[(u32, f64)], target: f64) -> XrCapacity {
    assert!(!points.is_empty());
    for w in points.windows(2) {
        assert!(w[0].0 < w[1].0, "sweep points must increase");
    }
    if points.last().unwrap().1 >= target {
        return XrCapacity::AtLeast(points.last().unwrap().0);
    }
    if points[0].1 < target {
        return XrCapacity::Below(points[0].0);
    }
    // Scan from the heavy end for the last point still meeting the target.
    let mut i = points.len() - 2;
    while points[i].1 < target {
        i -= 1;
    }
    let (n0, r0) = points[i];
    let (n1, r1) = points[i + 1];
    debug_assert!(r0 >= target && r1 < target);
    let frac = (r0 - target) / (r0 - r1);
    XrCapacity::Interpolated(n0 as f64 + frac * (n1 - n0) as f64)
}

/// Complementary CDF of set delays evaluated at `xs`. `None` delays are
/// undelivered sets: an atom at infinity that exceeds any threshold.
pub fn delay_ccdf(delays: &[Option<f64>], xs: &[f64]) -> Vec<f64> {
    assert!(!delays.is_empty());
    xs.iter()
        .map(|&x| {
            let n = delays.iter().filter(|d| d.map_or(true, |v| v > x)).count();
            n as f64 / delays.len() as f64
        })
        .collect()
}

/// Smallest delay d with `P(delay ≤ d) ≥ q`, or `None` when the quantile
/// falls inside the undelivered mass.
pub fn delay_percentile(delays: &[Option<f64>], q: f64) -> Option<f64> {
    assert!(!delays.is_empty());
    assert!((0.0..=1.0).contains(&q));
    let n = delays.len();
    let mut finite: Vec<f64> = delays.iter().filter_map(|d| *d).collect();
    finite.sort_by(f64::total_cmp);
    let k = crate::math::ceil(q * n as f64).max(1.0) as usize;
    if k > finite.len() {
        return None;
    }
    Some(finite[k - 1])
}

pub fn mean_u32(xs: &[u32]) -> f64 {
    assert!(!xs.is_empty());
    xs.iter().map(|&x| x as f64).sum::<f64>() / xs.len() as f64
}

/// Decoded best-effort throughput averaged over cells, in Mbps.
pub fn embb_cell_tp_mbps(drop: &DropResult) -> f64 {
    let bits: u64 = drop.embb_bits_per_cell.iter().sum();
    bits as f64 / drop.embb_bits_per_cell.len() as f64 / drop.measure_s / 1e6
}

/// Ordinary least squares fit with the coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linfit(xs: &[f64], ys: &[f64]) -> LinFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    assert!(sxx > 0.0, "degenerate x values");
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let e = y - (intercept + slope * x);
        ss_res += e * e;
        ss_tot += (y - my) * (y - my);
    }
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else if ss_res == 0.0 { 1.0 } else { 0.0 };
    LinFit { slope, intercept, r2 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stat(in_time: u64, counted: u64) -> UeSetStats {
        UeSetStats { cell: 0, ue: 0, in_time, counted }
    }

    #[test]
    fn satisfaction_threshold_is_exact_at_boundary() {
        // 534/540 = 0.98889 misses the 99% bar; 535/540 = 0.99074 clears it;
        // 99/100 sits exactly on it and must count as satisfied.
        assert!(!stat(534, 540).satisfied(0.99));
        assert!(stat(535, 540).satisfied(0.99));
        assert!(stat(99, 100).satisfied(0.99));
        assert!(!stat(98, 100).satisfied(0.99));
        assert!(stat(0, 0).satisfied(0.99));
    }

    #[test]
    fn satisfied_fraction_counts_ues() {
        let stats = [stat(540, 540), stat(535, 540), stat(534, 540), stat(100, 540)];
        assert!((satisfied_fraction(&stats, 0.99) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn capacity_interpolates_last_crossing() {
        let pts = [(3, 1.0), (4, 0.98), (5, 0.95), (6, 0.85)];
        match xr_capacity(&pts, 0.90) {
            XrCapacity::Interpolated(v) => assert!((v - 5.5).abs() < 1e-12, "{v}"),
            other => panic!("expected interpolation, got {other:?}"),
        }
    }

    #[test]
    fn capacity_censoring() {
        assert_eq!(xr_capacity(&[(3, 0.99), (4, 0.95)], 0.90), XrCapacity::AtLeast(4));
        assert_eq!(xr_capacity(&[(3, 0.80), (4, 0.70)], 0.90), XrCapacity::Below(3));
        // dip-and-recover: last crossing governs
        let pts = [(3, 0.95), (4, 0.85), (5, 0.92), (6, 0.50)];
        match xr_capacity(&pts, 0.90) {
            XrCapacity::Interpolated(v) => {
                let want = 5.0 + (0.92 - 0.90) / (0.92 - 0.50);
                assert!((v - want).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ccdf_with_undelivered_mass() {
        let delays = [Some(1.0), Some(2.0), Some(3.0), None];
        let c = delay_ccdf(&delays, &[0.0, 1.0, 2.5, 3.0, 100.0]);
        assert_eq!(c, alloc::vec![1.0, 0.75, 0.5, 0.25, 0.25]);
    }

    #[test]
    fn percentiles_respect_infinite_tail() {
        let delays = [Some(1.0), Some(2.0), Some(3.0), None];
        assert_eq!(delay_percentile(&delays, 0.5), Some(2.0));
        assert_eq!(delay_percentile(&delays, 0.75), Some(3.0));
        assert_eq!(delay_percentile(&delays, 0.9), None);
        assert_eq!(delay_percentile(&delays, 0.0), Some(1.0));
    }

    #[test]
    fn linfit_perfect_line() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let f = linfit(&xs, &ys);
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linfit_frozen_noisy_example() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 2.9, 5.2, 6.9];
        let f = linfit(&xs, &ys);
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r2 - 0.997008973080757).abs() < 1e-9);
    }

    #[test]
    fn mean_of_queue_samples() {
        assert!((mean_u32(&[1, 2, 3, 6]) - 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn ccdf_monotone_nonincreasing(
            delays in proptest::collection::vec(proptest::option::of(0.0f64..100.0), 1..50),
            mut xs in proptest::collection::vec(0.0f64..120.0, 2..10),
        ) {
            xs.sort_by(f64::total_cmp);
            let c = delay_ccdf(&delays, &xs);
            for w in c.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
            for v in &c {
                prop_assert!((0.0..=1.0).contains(v));
            }
        }

        #[test]
        fn capacity_always_within_sweep(
            ratios in proptest::collection::vec(0.0f64..1.0, 2..8),
        ) {
            let pts: Vec<(u32, f64)> = ratios.iter().enumerate()
                .map(|(i, &r)| (3 + i as u32, r)).collect();
            let cap = xr_capacity(&pts, 0.9);
            let v = cap.value();
            prop_assert!(v >= pts[0].0 as f64 && v <= pts.last().unwrap().0 as f64);
        }
    }
}
