//! The subcommands, as library functions writing into an output directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sudr_core::data::{counts_to_density, ObservationSeries};

use crate::artifacts::{self, observation_records, write_json, write_records, DataFlags, ObservationRecord};
use crate::config::{RunConfig, Source, SyntheticSpec};
use crate::error::{Error, Result};
use crate::fit::{fit_posterior, Fit};
use crate::jhu::{parse_jhu, JhuFiles, Window};
use crate::manifest::Manifest;
use crate::report::{beta_report, peak_report, BetaReport, PeakReport, PeakRow};
use crate::robustness::{
    backtest_table, run_robustness, summarize_runs, LevelSummary, ModelRun, RobustnessData, RobustnessOptions,
    RunRecord,
};

/// Observations ready for fitting plus the long-format rows describing them.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub obs: ObservationSeries,
    pub records: Vec<ObservationRecord>,
    /// Documented removed density, aligned with `obs`.
    pub removed: Vec<f64>,
    pub flags: DataFlags,
}

/// Resolves a country from the manifest into a data source.
pub fn country_source(manifest: &Manifest, country: &str) -> Result<Source> {
    let entry = manifest.get(country)?;
    Ok(Source::Country {
        name: country.to_string(),
        population: entry.population,
        start: entry.start,
        end: entry.end,
    })
}

pub fn prepare(source: &Source, alpha: f64, jhu_dir: Option<&Path>) -> Result<Prepared> {
    match source {
        Source::Country {
            name,
            population,
            start,
            end,
        } => {
            let dir = jhu_dir.ok_or_else(|| Error::Config("country data needs a JHU CSSE directory".into()))?;
            let series = parse_jhu(&JhuFiles::in_dir(dir), name, *population, Window::new(*start, *end)?)?;
            let active = series.active_documented()?;
            let obs = series.observations(alpha)?;
            let removed = counts_to_density(&series.removed(), obs.scaling())?;
            let dates: Vec<String> = series.dates.iter().map(|d| d.to_string()).collect();
            let records = observation_records(&dates, name, &active.counts, &obs);
            let flags = DataFlags {
                decreasing: series.monotonicity_flags(),
                floored_active: active.floored.iter().map(|&i| dates[i].clone()).collect(),
            };
            Ok(Prepared {
                obs,
                records,
                removed,
                flags,
            })
        }
        Source::Synthetic(spec) => prepare_synthetic(spec),
    }
}

fn prepare_synthetic(spec: &SyntheticSpec) -> Result<Prepared> {
    let ds = spec.generate()?;
    let p = ds.obs.scaling().p();
    let active: Vec<u64> = ds
        .obs
        .values()
        .iter()
        .map(|v| v.map_or(0, |v| (v * p).round() as u64))
        .collect();
    let days: Vec<String> = (1..=ds.obs.len()).map(|t| t.to_string()).collect();
    let records = observation_records(&days, "synthetic", &active, &ds.obs);
    Ok(Prepared {
        obs: ds.obs,
        records,
        removed: ds.documented_removed,
        flags: DataFlags::default(),
    })
}

/// Fits, writes every artifact, then reports non-convergence as an error.
pub fn cmd_fit(config: &RunConfig, jhu_dir: Option<&Path>, out: &Path) -> Result<Fit> {
    let data = prepare(&config.source, config.alpha, jhu_dir)?;
    let fit = fit_posterior(&data.obs, &config.fit_options())?;
    artifacts::write_fit(out, config, &data.records, &data.obs, &data.flags, &fit)?;
    if !fit.summary.converged() {
        return Err(Error::NotConverged {
            max_rhat: fit.summary.max_rhat().unwrap_or(f64::NAN),
            min_ess: fit.summary.min_ess().unwrap_or(f64::NAN),
        });
    }
    Ok(fit)
}

pub const PEAK_REPORT_CSV: &str = "peak_report.csv";
pub const PEAK_REPORT_JSON: &str = "peak_report.json";
pub const BETA_REPORT_JSON: &str = "beta_report.json";

pub fn cmd_peak_report(fit_dirs: &[PathBuf], out: &Path) -> Result<Vec<PeakReport>> {
    let reports = fit_dirs
        .iter()
        .map(|d| peak_report(&artifacts::load_fit(d)?))
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let rows: Vec<PeakRow> = reports.iter().map(PeakRow::from).collect();
    write_records(&out.join(PEAK_REPORT_CSV), &rows)?;
    write_json(&out.join(PEAK_REPORT_JSON), &reports)?;
    Ok(reports)
}

pub fn cmd_beta_report(fit_dirs: &[PathBuf], out: &Path) -> Result<Vec<BetaReport>> {
    let reports = fit_dirs
        .iter()
        .map(|d| beta_report(&artifacts::load_fit(d)?))
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_json(&out.join(BETA_REPORT_JSON), &reports)?;
    Ok(reports)
}

pub const ROBUSTNESS_RUNS: &str = "robustness_runs.csv";
pub const ROBUSTNESS_SUMMARY: &str = "robustness_summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSummary {
    pub levels: Vec<LevelSummary>,
    pub seeds: Vec<u64>,
    pub failures: usize,
}

/// Data per seed: synthetic sources are regenerated with each seed, real
/// data is shared and only the mask changes.
pub fn robustness_datasets(source: &Source, alpha: f64, jhu_dir: Option<&Path>, seeds: &[u64]) -> Result<Vec<(u64, RobustnessData)>> {
    let shared = match source {
        Source::Country { .. } => Some(prepare(source, alpha, jhu_dir)?),
        Source::Synthetic(_) => None,
    };
    seeds
        .iter()
        .map(|&seed| {
            let data = match (&shared, source) {
                (Some(p), _) => p.clone(),
                (None, Source::Synthetic(spec)) => prepare_synthetic(&SyntheticSpec { seed, ..spec.clone() })?,
                (None, Source::Country { .. }) => unreachable!("country data is prepared once"),
            };
            Ok((
                seed,
                RobustnessData {
                    obs: data.obs,
                    removed: data.removed,
                },
            ))
        })
        .collect()
}

pub fn cmd_robustness(
    datasets: &[(u64, RobustnessData)],
    options: &RobustnessOptions,
    out: &Path,
) -> Result<(Vec<ModelRun>, RobustnessSummary)> {
    let runs = run_robustness(datasets, options)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let records: Vec<RunRecord> = runs.iter().map(RunRecord::from).collect();
    write_records(&out.join(ROBUSTNESS_RUNS), &records)?;
    for &level in &options.levels {
        for (seed, _) in datasets {
            let group: Vec<&ModelRun> = runs.iter().filter(|r| r.sparsity == level && r.seed == *seed).collect();
            let (header, rows) = backtest_table(&group);
            let path = out.join(format!("backtest_sparsity{level}_seed{seed}.csv"));
            let mut w = csv::Writer::from_path(&path).map_err(|e| artifacts::csv_error(&path, e))?;
            w.write_record(&header).map_err(|e| artifacts::csv_error(&path, e))?;
            for row in rows {
                w.write_record(&row).map_err(|e| artifacts::csv_error(&path, e))?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
    }
    let failures = runs.iter().filter(|r| r.result.is_err()).count();
    let summary = RobustnessSummary {
        levels: summarize_runs(&runs, &options.levels),
        seeds: datasets.iter().map(|(s, _)| *s).collect(),
        failures,
    };
    write_json(&out.join(ROBUSTNESS_SUMMARY), &summary)?;
    if failures > 0 {
        return Err(Error::PartialFailure {
            failed: failures,
            total: runs.len(),
        });
    }
    Ok((runs, summary))
}

pub const SYNTHETIC_CSV: &str = "synthetic.csv";
pub const SYNTHETIC_SPEC: &str = "synthetic_spec.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRecord {
    pub day: usize,
    pub prevalence: f64,
    pub mean_field: f64,
    pub undocumented: f64,
    pub documented_removed: f64,
}

/// Writes the dataset, its noise-free components and the generating spec.
pub fn cmd_synth(spec: &SyntheticSpec, out: &Path) -> Result<()> {
    let ds = spec.generate()?;
    let prepared = prepare_synthetic(spec)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_records(&out.join(artifacts::OBSERVATIONS), &prepared.records)?;
    let rows: Vec<SyntheticRecord> = (0..ds.obs.len())
        .map(|t| SyntheticRecord {
            day: t + 1,
            prevalence: ds.obs.values()[t].unwrap_or(f64::NAN),
            mean_field: ds.mean_field[t],
            undocumented: ds.undocumented[t],
            documented_removed: ds.documented_removed[t],
        })
        .collect();
    write_records(&out.join(SYNTHETIC_CSV), &rows)?;
    write_json(&out.join(SYNTHETIC_SPEC), spec)
}
