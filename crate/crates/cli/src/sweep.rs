//! Sweep expansion and parallel drop execution. Results are keyed by sweep
//! point and drop index, so aggregation is independent of worker scheduling.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use xrsched_core::engine::run_drop;
use xrsched_core::kpi::{self, UeSetStats};
use xrsched_core::sched::SchedulerKind;

use crate::config::FileConfig;
use crate::CliError;

/// KPIs distilled from one drop of one sweep point.
#[derive(Debug, Clone)]
pub struct DropRow {
    pub scheduler: SchedulerKind,
    pub psdb_ms: f64,
    pub xr_per_cell: u32,
    pub drop: u32,
    /// PHY-stream seed the drop actually ran with.
    pub seed: u64,
    pub satisfied_fraction: f64,
    pub embb_tp_mbps: f64,
    pub queued_ues_per_cell: f64,
    /// Delay from first arrival to last delivered bit for every counted set;
    /// None marks sets still undelivered at the end of the run.
    pub delays_ms: Vec<Option<f64>>,
    /// Fewest counted sets over the drop's XR UEs.
    pub min_counted_sets: u64,
    pub violations: usize,
}

pub struct SweepResults {
    pub rows: Vec<DropRow>,
    pub schedulers: Vec<SchedulerKind>,
    pub psdb_ms: Vec<f64>,
    pub xr_per_cell: Vec<u32>,
    pub drops: u32,
    pub satisfaction_threshold: f64,
    pub capacity_target: f64,
}

impl SweepResults {
    fn point_rows(&self, s: SchedulerKind, psdb: f64, n: u32) -> impl Iterator<Item = &DropRow> {
        self.rows
            .iter()
            .filter(move |r| r.scheduler == s && r.psdb_ms == psdb && r.xr_per_cell == n)
    }

    pub fn mean_satisfaction(&self, s: SchedulerKind, psdb: f64, n: u32) -> f64 {
        mean(self.point_rows(s, psdb, n).map(|r| r.satisfied_fraction))
    }

    pub fn mean_embb_tp(&self, s: SchedulerKind, psdb: f64, n: u32) -> f64 {
        mean(self.point_rows(s, psdb, n).map(|r| r.embb_tp_mbps))
    }

    pub fn mean_queued(&self, s: SchedulerKind, psdb: f64, n: u32) -> f64 {
        mean(self.point_rows(s, psdb, n).map(|r| r.queued_ues_per_cell))
    }

    /// Satisfaction versus load, averaged over drops — the capacity input.
    pub fn satisfaction_curve(&self, s: SchedulerKind, psdb: f64) -> Vec<(u32, f64)> {
        self.xr_per_cell
            .iter()
            .map(|&n| (n, self.mean_satisfaction(s, psdb, n)))
            .collect()
    }

    pub fn capacity(&self, s: SchedulerKind, psdb: f64) -> kpi::XrCapacity {
        kpi::xr_capacity(&self.satisfaction_curve(s, psdb), self.capacity_target)
    }

    /// Counted-set delays pooled over drops at one sweep point.
    pub fn pooled_delays(&self, s: SchedulerKind, psdb: f64, n: u32) -> Vec<Option<f64>> {
        let mut out = Vec::new();
        for r in self.point_rows(s, psdb, n) {
            out.extend_from_slice(&r.delays_ms);
        }
        out
    }

    pub fn min_counted_sets(&self) -> u64 {
        self.rows.iter().map(|r| r.min_counted_sets).min().unwrap_or(0)
    }

    /// PSDB whose satisfaction curve feeds the load-sweep figure: the engine
    /// default when it is swept, otherwise the first listed value.
    pub fn primary_psdb(&self) -> f64 {
        let d = xrsched_core::engine::SimConfig::default().traffic.psdb_ms;
        if self.psdb_ms.contains(&d) {
            d
        } else {
            self.psdb_ms[0]
        }
    }

    pub fn total_violations(&self) -> usize {
        self.rows.iter().map(|r| r.violations).sum()
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0u32);
    for x in xs {
        sum += x;
        n += 1;
    }
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Run one sweep point drop and distill its KPIs.
pub fn run_point_drop(
    file: &FileConfig,
    scheduler: SchedulerKind,
    psdb_ms: f64,
    xr_per_cell: u32,
    drop: u32,
) -> Result<DropRow, CliError> {
    let cfg = file.sim_config(scheduler, psdb_ms, xr_per_cell);
    let res = run_drop(&cfg, drop).map_err(|e| CliError::Config(e.to_string()))?;

    let stats: Vec<UeSetStats> = kpi::per_ue_stats(&res);
    let satisfied = kpi::satisfied_fraction(&stats, file.qos.satisfaction_threshold);
    let delays: Vec<Option<f64>> = res
        .sets
        .iter()
        .filter(|s| s.counted)
        .map(|s| s.delivered_ms.map(|t| t - s.arrival_ms))
        .collect();
    Ok(DropRow {
        scheduler,
        psdb_ms,
        xr_per_cell,
        drop,
        seed: res.seed,
        satisfied_fraction: satisfied,
        embb_tp_mbps: kpi::embb_cell_tp_mbps(&res),
        queued_ues_per_cell: kpi::mean_u32(&res.queued_samples) / cfg.num_cells as f64,
        delays_ms: delays,
        min_counted_sets: stats.iter().map(|u| u.counted).min().unwrap_or(0),
        violations: res.violations.len(),
    })
}

/// Expand the sweep and run every (point, drop) job on a small worker pool.
/// Worker count 0 means one per available core.
pub fn run_sweep(file: &FileConfig, workers: usize) -> Result<SweepResults, CliError> {
    let schedulers = file.schedulers()?;
    let psdbs = file.psdb_ms.to_vec();
    let loads = file.xr_per_cell.to_vec();

    let mut jobs = Vec::new();
    for &s in &schedulers {
        for &p in &psdbs {
            for &n in &loads {
                for d in 0..file.drops {
                    jobs.push((s, p, n, d));
                }
            }
        }
    }

    let workers = if workers == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        workers
    }
    .min(jobs.len().max(1));

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<DropRow>>> = Mutex::new(vec![None; jobs.len()]);
    let failure: Mutex<Option<CliError>> = Mutex::new(None);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() || failure.lock().unwrap().is_some() {
                    return;
                }
                let (s, p, n, d) = jobs[i];
                match run_point_drop(file, s, p, n, d) {
                    Ok(row) => slots.lock().unwrap()[i] = Some(row),
                    Err(e) => *failure.lock().unwrap() = Some(e),
                }
            });
        }
    });

    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let rows: Vec<DropRow> = slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect();

    Ok(SweepResults {
        rows,
        schedulers,
        psdb_ms: psdbs,
        xr_per_cell: loads,
        drops: file.drops,
        satisfaction_threshold: file.qos.satisfaction_threshold,
        capacity_target: file.qos.capacity_target,
    })
}
