//! Figure-data CSVs, per-run drop records, and the run summary. Every file
//! carries the config hash and master seed on its first line; all numbers
//! use fixed-width formatting so equal runs produce equal bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use xrsched_core::kpi::{self, XrCapacity};

use crate::config::{self, FileConfig};
use crate::sweep::SweepResults;
use crate::CliError;

/// CCDF support: 0..100 ms in half-millisecond steps.
fn ccdf_grid() -> Vec<f64> {
    (0..=200).map(|i| i as f64 * 0.5).collect()
}

fn censoring_name(c: &XrCapacity) -> &'static str {
    match c {
        XrCapacity::Interpolated(_) => "interpolated",
        XrCapacity::AtLeast(_) => "at_least",
        XrCapacity::Below(_) => "below",
    }
}

/// Compact float for file names: no trailing ".0".
fn compact(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        format!("{v}")
    }
}

struct CsvFile {
    text: String,
}

impl CsvFile {
    fn new(hash: u64, seed: u64, columns: &str) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "# config_hash={hash:016x} seed={seed}");
        let _ = writeln!(text, "{columns}");
        Self { text }
    }

    fn row(&mut self, line: String) {
        self.text.push_str(&line);
        self.text.push('\n');
    }

    fn write(self, dir: &Path, name: &str) -> Result<PathBuf, CliError> {
        let path = dir.join(name);
        fs::write(&path, self.text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

#[derive(Serialize)]
struct CapacitySummary {
    scheduler: &'static str,
    psdb_ms: f64,
    capacity: f64,
    censoring: &'static str,
}

#[derive(Serialize)]
struct DelaySummary {
    scheduler: &'static str,
    psdb_ms: f64,
    xr_per_cell: u32,
    p95_delay_ms: Option<f64>,
}

#[derive(Serialize)]
struct PointSeed {
    scheduler: &'static str,
    psdb_ms: f64,
    xr_per_cell: u32,
    phy_seed: u64,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    config_hash: String,
    seed: u64,
    fast: bool,
    /// The resolved configuration the sweep actually ran with.
    config: &'a FileConfig,
    drops: u32,
    /// PSDB slice used for the load-sweep satisfaction figure.
    primary_psdb_ms: f64,
    /// Derived PHY seed per sweep point; drop seeds extend these per drop
    /// and appear in the per-run CSVs.
    point_seeds: Vec<PointSeed>,
    /// Fewest counted PDU-sets over every XR UE in the sweep: the sample-size
    /// floor behind the satisfaction statistics (540 needed for the ±1%
    /// confidence bound at the default run length).
    min_counted_sets_per_ue: u64,
    sample_floor_met: bool,
    scheduler_contract_violations: usize,
    capacity: Vec<CapacitySummary>,
    p95_delay: Vec<DelaySummary>,
}

/// Minimum counted sets per XR UE needed for the satisfaction confidence
/// bound; checked on full-length runs and reported in the summary.
pub const SAMPLE_FLOOR_SETS: u64 = 540;

const DROP_COLUMNS: &str = "scheduler,psdb_ms,xr_per_cell,drop,seed,satisfied_fraction,embb_tp_mbps,queued_ues_per_cell,p95_delay_ms,min_counted_sets,violations";

/// Write every artifact for a finished sweep: one CSV per run under drops/,
/// five aggregate figure CSVs, the defaults reference, and the summary.
/// Returns the paths written.
pub fn write_outputs(
    results: &SweepResults,
    file: &FileConfig,
    hash: u64,
    seed: u64,
    fast: bool,
    dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let drops_dir = dir.join("drops");
    fs::create_dir_all(&drops_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", drops_dir.display())))?;
    let mut paths = Vec::new();

    for r in &results.rows {
        let p95 = kpi::delay_percentile(&r.delays_ms, 0.95)
            .map_or_else(|| "inf".into(), |v| format!("{v:.6}"));
        let mut csv = CsvFile::new(hash, seed, DROP_COLUMNS);
        csv.row(format!(
            "{},{:.6},{},{},{},{:.6},{:.6},{:.6},{},{},{}",
            r.scheduler.name(),
            r.psdb_ms,
            r.xr_per_cell,
            r.drop,
            r.seed,
            r.satisfied_fraction,
            r.embb_tp_mbps,
            r.queued_ues_per_cell,
            p95,
            r.min_counted_sets,
            r.violations,
        ));
        let name = format!(
            "drop_{}_psdb{}_n{}_d{}.csv",
            r.scheduler.name(),
            compact(r.psdb_ms),
            r.xr_per_cell,
            r.drop
        );
        paths.push(csv.write(&drops_dir, &name)?);
    }

    let primary = results.primary_psdb();
    let mut fig2 = CsvFile::new(hash, seed, "scheduler,N,ratio");
    for &s in &results.schedulers {
        for &n in &results.xr_per_cell {
            fig2.row(format!(
                "{},{},{:.6}",
                s.name(),
                n,
                results.mean_satisfaction(s, primary, n)
            ));
        }
    }
    paths.push(fig2.write(dir, "fig2_satisfaction.csv")?);

    let mut fig3 = CsvFile::new(hash, seed, "scheduler,psdb_ms,capacity,censoring");
    for &s in &results.schedulers {
        for &p in &results.psdb_ms {
            let c = results.capacity(s, p);
            fig3.row(format!(
                "{},{:.6},{:.6},{}",
                s.name(),
                p,
                c.value(),
                censoring_name(&c)
            ));
        }
    }
    paths.push(fig3.write(dir, "fig3_capacity.csv")?);

    let grid = ccdf_grid();
    let mut fig4 = CsvFile::new(hash, seed, "scheduler,psdb_ms,xr_per_cell,delay_ms,ccdf");
    for &s in &results.schedulers {
        for &p in &results.psdb_ms {
            for &n in &results.xr_per_cell {
                let delays = results.pooled_delays(s, p, n);
                if delays.is_empty() {
                    continue;
                }
                for (x, y) in grid.iter().zip(kpi::delay_ccdf(&delays, &grid)) {
                    fig4.row(format!("{},{:.6},{},{:.1},{:.6}", s.name(), p, n, x, y));
                }
            }
        }
    }
    paths.push(fig4.write(dir, "fig4_ccdf.csv")?);

    let mut fig5 = CsvFile::new(hash, seed, "scheduler,psdb_ms,xr_per_cell,queued_ues_per_cell");
    for &s in &results.schedulers {
        for &p in &results.psdb_ms {
            for &n in &results.xr_per_cell {
                fig5.row(format!(
                    "{},{:.6},{},{:.6}",
                    s.name(),
                    p,
                    n,
                    results.mean_queued(s, p, n)
                ));
            }
        }
    }
    paths.push(fig5.write(dir, "fig5_queued.csv")?);

    let mut fig6 = CsvFile::new(hash, seed, "scheduler,psdb_ms,xr_per_cell,embb_tp_mbps");
    for &s in &results.schedulers {
        for &p in &results.psdb_ms {
            for &n in &results.xr_per_cell {
                fig6.row(format!(
                    "{},{:.6},{},{:.6}",
                    s.name(),
                    p,
                    n,
                    results.mean_embb_tp(s, p, n)
                ));
            }
        }
    }
    paths.push(fig6.write(dir, "fig6_embb_tp.csv")?);

    let reference_path = dir.join("config_reference.toml");
    fs::write(&reference_path, config::reference_toml(hash, seed))
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", reference_path.display())))?;
    paths.push(reference_path);

    let mut capacity = Vec::new();
    for &s in &results.schedulers {
        for &p in &results.psdb_ms {
            let c = results.capacity(s, p);
            capacity.push(CapacitySummary {
                scheduler: s.name(),
                psdb_ms: p,
                capacity: c.value(),
                censoring: censoring_name(&c),
            });
        }
    }
    let mut p95_delay = Vec::new();
    let mut point_seeds = Vec::new();
    for &s in &results.schedulers {
        for &p in &results.psdb_ms {
            for &n in &results.xr_per_cell {
                point_seeds.push(PointSeed {
                    scheduler: s.name(),
                    psdb_ms: p,
                    xr_per_cell: n,
                    phy_seed: file.sim_config(s, p, n).seed,
                });
                let delays = results.pooled_delays(s, p, n);
                if delays.is_empty() {
                    continue;
                }
                p95_delay.push(DelaySummary {
                    scheduler: s.name(),
                    psdb_ms: p,
                    xr_per_cell: n,
                    p95_delay_ms: kpi::delay_percentile(&delays, 0.95),
                });
            }
        }
    }
    let min_counted = results.min_counted_sets();
    let summary = RunSummary {
        config_hash: format!("{hash:016x}"),
        seed,
        fast,
        config: file,
        drops: results.drops,
        primary_psdb_ms: primary,
        point_seeds,
        min_counted_sets_per_ue: min_counted,
        sample_floor_met: min_counted >= SAMPLE_FLOOR_SETS,
        scheduler_contract_violations: results.total_violations(),
        capacity,
        p95_delay,
    };
    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Io(format!("summary serialization failed: {e}")))?;
    fs::write(&path, json + "\n")
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    paths.push(path);

    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::DropRow;
    use xrsched_core::sched::SchedulerKind;

    fn synthetic_row(n: u32, drop: u32, satisfied: f64) -> DropRow {
        DropRow {
            scheduler: SchedulerKind::Proposed,
            psdb_ms: 15.0,
            xr_per_cell: n,
            drop,
            seed: 42,
            satisfied_fraction: satisfied,
            embb_tp_mbps: 30.0,
            queued_ues_per_cell: 2.0,
            delays_ms: vec![Some(5.0), Some(9.0), None],
            min_counted_sets: 600,
            violations: 0,
        }
    }

    fn synthetic_results(loads: &[u32], drops: u32, satisfied: &dyn Fn(u32) -> f64) -> SweepResults {
        let mut rows = Vec::new();
        for &n in loads {
            for d in 0..drops {
                rows.push(synthetic_row(n, d, satisfied(n)));
            }
        }
        SweepResults {
            rows,
            schedulers: vec![SchedulerKind::Proposed],
            psdb_ms: vec![15.0],
            xr_per_cell: loads.to_vec(),
            drops,
            satisfaction_threshold: 0.99,
            capacity_target: 0.90,
        }
    }

    #[test]
    fn one_point_sweep_writes_one_csv_per_run_and_five_aggregates() {
        let results = synthetic_results(&[3, 4], 2, &|_| 1.0);
        let file = FileConfig::parse("scheduler = \"proposed\"\nxr_per_cell = [3, 4]\npsdb_ms = 15.0\ndrops = 2\n").unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_outputs(&results, &file, 0x1, 1, false, dir.path()).unwrap();

        let drop_files = fs::read_dir(dir.path().join("drops")).unwrap().count();
        assert_eq!(drop_files, 4, "one drop CSV per (point, drop) run");
        let aggregates = fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| {
                let n = e.as_ref().unwrap().file_name();
                n.to_string_lossy().starts_with("fig")
            })
            .count();
        assert_eq!(aggregates, 5);
        assert!(dir.path().join("summary.json").exists());
        assert!(dir.path().join("config_reference.toml").exists());

        let fig2 = fs::read_to_string(dir.path().join("fig2_satisfaction.csv")).unwrap();
        let mut lines = fig2.lines();
        assert!(lines.next().unwrap().starts_with("# config_hash="));
        assert_eq!(lines.next().unwrap(), "scheduler,N,ratio");

        let summary = fs::read_to_string(dir.path().join("summary.json")).unwrap();
        assert!(summary.contains("\"config\""));
        assert!(summary.contains("\"phy_seed\""));
    }

    #[test]
    fn capacity_row_interpolates_the_crossing() {
        // Satisfaction 0.95 at 5 UEs and 0.85 at 6 crosses 0.90 halfway.
        let results = synthetic_results(&[5, 6], 1, &|n| if n == 5 { 0.95 } else { 0.85 });
        let file = FileConfig::parse("scheduler = \"proposed\"\nxr_per_cell = [5, 6]\npsdb_ms = 15.0\ndrops = 1\n").unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_outputs(&results, &file, 0x2, 1, false, dir.path()).unwrap();
        let fig3 = fs::read_to_string(dir.path().join("fig3_capacity.csv")).unwrap();
        assert!(fig3.contains("proposed,15.000000,5.500000,interpolated"), "{fig3}");
    }
}
