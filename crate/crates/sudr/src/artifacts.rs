//! Files written by a fit and read back by the reports.
//!
//! A fit directory holds `observations.csv`, `samples.csv`, `summary.json`,
//! `diagnostics.json`, `fit_meta.json`, `trajectories.csv` and `bands.csv`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sudr_core::data::ObservationSeries;
use sudr_core::diagnostics::{quantile, PosteriorSummary, ESS_THRESHOLD, RHAT_THRESHOLD};
use sudr_core::hmc::ChainSet;
use sudr_core::ode::{simulate_sudr, DEFAULT_SUBSTEPS};
use sudr_core::posterior::{ModelKind, ParamLayout};
use sudr_core::{ModelParams, PopulationScaling};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fit::Fit;
use crate::jhu::MonotonicityFlag;

pub const OBSERVATIONS: &str = "observations.csv";
pub const SAMPLES: &str = "samples.csv";
pub const SUMMARY: &str = "summary.json";
pub const DIAGNOSTICS: &str = "diagnostics.json";
pub const META: &str = "fit_meta.json";
pub const TRAJECTORIES: &str = "trajectories.csv";
pub const BANDS: &str = "bands.csv";

/// Number of posterior draws whose trajectories are written out.
pub const TRAJECTORY_SAMPLES: usize = 100;

/// One row of the long-format observation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub date: String,
    pub country: String,
    pub active: u64,
    pub prevalence: Option<f64>,
    pub masked: bool,
}

pub fn observation_records(
    dates: &[String],
    country: &str,
    active: &[u64],
    obs: &ObservationSeries,
) -> Vec<ObservationRecord> {
    dates
        .iter()
        .zip(active)
        .zip(obs.values())
        .map(|((date, &active), value)| ObservationRecord {
            date: date.clone(),
            country: country.to_string(),
            active,
            prevalence: *value,
            masked: value.is_none(),
        })
        .collect()
}

pub fn observations_from_records(
    records: &[ObservationRecord],
    scaling: PopulationScaling,
    origin: &str,
) -> Result<ObservationSeries> {
    let values = records.iter().map(|r| r.prevalence).collect();
    Ok(ObservationSeries::new(values, scaling, origin)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub version: String,
    pub config: RunConfig,
    pub population: f64,
    pub alpha: f64,
    pub days: usize,
    pub observed_days: usize,
    pub param_names: Vec<String>,
    pub mode_log_density: f64,
    #[serde(default)]
    pub data_flags: DataFlags,
}

/// Irregularities found in the raw counts. They are recorded, not repaired.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DataFlags {
    /// Days on which a cumulative series decreases.
    pub decreasing: Vec<MonotonicityFlag>,
    /// Dates whose active count was negative and floored to zero.
    pub floored_active: Vec<String>,
}

impl FitMeta {
    pub fn scaling(&self) -> Result<PopulationScaling> {
        Ok(PopulationScaling::new(self.population, self.alpha)?)
    }

    pub fn layout(&self) -> Result<ParamLayout> {
        let kind = ModelKind::Sudr;
        let layout = ParamLayout::new(kind, self.config.degree, &self.config.prior.into());
        if layout.names() != self.param_names {
            return Err(Error::Config("parameter names in fit_meta.json do not match the model".into()));
        }
        Ok(layout)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub median: f64,
    pub q975: f64,
    pub rhat: Option<f64>,
    pub ess: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub converged: bool,
    pub max_rhat: Option<f64>,
    pub min_ess: Option<f64>,
    pub divergences: usize,
    pub draws: usize,
    pub params: Vec<ParamRecord>,
}

impl From<&PosteriorSummary> for SummaryFile {
    fn from(s: &PosteriorSummary) -> Self {
        Self {
            converged: s.converged(),
            max_rhat: s.max_rhat(),
            min_ess: s.min_ess(),
            divergences: s.divergences,
            draws: s.draws,
            params: s
                .params
                .iter()
                .map(|p| ParamRecord {
                    name: p.name.clone(),
                    mean: p.mean,
                    sd: p.sd,
                    q025: p.q025,
                    median: p.median,
                    q975: p.q975,
                    rhat: p.rhat.filter(|r| r.is_finite()),
                    ess: p.ess,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub chain: usize,
    pub step_size: f64,
    pub mean_accept: f64,
    pub divergences: usize,
    pub warmup_divergences: usize,
    pub inv_metric_diagonal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsFile {
    pub converged: bool,
    pub max_rhat: Option<f64>,
    pub min_ess: Option<f64>,
    pub rhat_threshold: f64,
    pub ess_threshold: f64,
    pub mode_log_density: f64,
    pub mode_position: Vec<f64>,
    pub chains: Vec<ChainDiagnostics>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.position() {
        Some(pos) => Error::Malformed {
            path: path.to_path_buf(),
            line: pos.line(),
            message: e.to_string(),
        },
        None => Error::io(path, std::io::Error::other(e)),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::io(path, e),
    })?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| Error::Malformed {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in records {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = open_artifact(path)?;
    csv::Reader::from_reader(file)
        .deserialize()
        .map(|r| r.map_err(|e| csv_error(path, e)))
        .collect()
}

fn open_artifact(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::io(path, e),
    })
}

/// `chain,draw,lp,divergent,<params...>`, constrained values.
pub fn write_samples(path: &Path, chains: &ChainSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["chain".to_string(), "draw".into(), "lp".into(), "divergent".into()];
    header.extend(chains.param_names.iter().cloned());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (c, chain) in chains.chains.iter().enumerate() {
        for (i, draw) in chain.draws.iter().enumerate() {
            let mut rec = vec![
                c.to_string(),
                i.to_string(),
                chain.log_density[i].to_string(),
                u8::from(chain.divergent[i]).to_string(),
            ];
            rec.extend(draw.iter().map(f64::to_string));
            w.write_record(&rec).map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Pooled draws from `samples.csv`, in file order.
pub fn read_samples(path: &Path, param_names: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::Reader::from_reader(open_artifact(path)?);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let names: Vec<&str> = header.iter().skip(4).collect();
    if names != param_names.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            line: 1,
            message: "parameter columns do not match fit_meta.json".into(),
        });
    }
    let mut draws = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let draw = rec
            .iter()
            .skip(4)
            .map(|v| {
                v.parse::<f64>().map_err(|_| Error::Malformed {
                    path: path.to_path_buf(),
                    line,
                    message: format!("bad number {v:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        draws.push(draw);
    }
    if draws.is_empty() {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            line: 1,
            message: "no draws".into(),
        });
    }
    Ok(draws)
}

/// Daily `(i_u, i_d)` for `t = 1..=days`.
pub fn daily_densities(p: &ModelParams, days: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let tr = simulate_sudr(p, days, DEFAULT_SUBSTEPS)?;
    Ok(tr.states[1..].iter().map(|s| (s.i_u, s.i_d)).unzip())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub sample: usize,
    pub draw: usize,
    pub day: usize,
    pub i_u: f64,
    pub i_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRecord {
    pub day: usize,
    pub observed: Option<f64>,
    pub i_u_mean: f64,
    pub i_u_lower: f64,
    pub i_u_upper: f64,
    pub i_d_mean: f64,
    pub i_d_lower: f64,
    pub i_d_upper: f64,
}

/// Trajectories of up to [`TRAJECTORY_SAMPLES`] pooled draws chosen without
/// replacement with `seed`, and 95% pointwise bands over every draw.
pub fn trajectory_outputs(
    draws: &[ModelParams],
    obs: &ObservationSeries,
    seed: u64,
) -> Result<(Vec<TrajectoryRecord>, Vec<BandRecord>)> {
    let days = obs.len();
    let paths = draws
        .iter()
        .map(|p| daily_densities(p, days))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = sample(&mut rng, paths.len(), TRAJECTORY_SAMPLES.min(paths.len()));
    let mut trajectories = Vec::with_capacity(picked.len() * days);
    for (k, idx) in picked.iter().enumerate() {
        let (iu, id) = &paths[idx];
        for t in 0..days {
            trajectories.push(TrajectoryRecord {
                sample: k,
                draw: idx,
                day: t + 1,
                i_u: iu[t],
                i_d: id[t],
            });
        }
    }
    let n = paths.len() as f64;
    let bands = (0..days)
        .map(|t| {
            let iu: Vec<f64> = paths.iter().map(|(u, _)| u[t]).collect();
            let id: Vec<f64> = paths.iter().map(|(_, d)| d[t]).collect();
            BandRecord {
                day: t + 1,
                observed: obs.values()[t],
                i_u_mean: iu.iter().sum::<f64>() / n,
                i_u_lower: quantile(&iu, 0.025),
                i_u_upper: quantile(&iu, 0.975),
                i_d_mean: id.iter().sum::<f64>() / n,
                i_d_lower: quantile(&id, 0.025),
                i_d_upper: quantile(&id, 0.975),
            }
        })
        .collect();
    Ok((trajectories, bands))
}

/// Writes every fit artifact into `dir`, creating it if needed.
pub fn write_fit(
    dir: &Path,
    config: &RunConfig,
    records: &[ObservationRecord],
    obs: &ObservationSeries,
    flags: &DataFlags,
    fit: &Fit,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let scaling = obs.scaling();
    write_records(&dir.join(OBSERVATIONS), records)?;
    write_samples(&dir.join(SAMPLES), &fit.chains)?;
    write_json(&dir.join(SUMMARY), &SummaryFile::from(&fit.summary))?;
    let chains = fit
        .chains
        .chains
        .iter()
        .enumerate()
        .map(|(i, c)| ChainDiagnostics {
            chain: i,
            step_size: c.step_size,
            mean_accept: c.mean_accept(),
            divergences: c.divergent.iter().filter(|d| **d).count(),
            warmup_divergences: c.warmup_divergences,
            inv_metric_diagonal: c.inv_metric.clone(),
        })
        .collect();
    write_json(
        &dir.join(DIAGNOSTICS),
        &DiagnosticsFile {
            converged: fit.summary.converged(),
            max_rhat: fit.summary.max_rhat().filter(|r| r.is_finite()),
            min_ess: fit.summary.min_ess(),
            rhat_threshold: RHAT_THRESHOLD,
            ess_threshold: ESS_THRESHOLD,
            mode_log_density: fit.mode.log_density,
            mode_position: fit.mode.position.clone(),
            chains,
        },
    )?;
    write_json(
        &dir.join(META),
        &FitMeta {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            population: scaling.w(),
            alpha: scaling.alpha(),
            days: obs.len(),
            observed_days: obs.observed_count(),
            param_names: fit.chains.param_names.clone(),
            mode_log_density: fit.mode.log_density,
            data_flags: flags.clone(),
        },
    )?;
    let (trajectories, bands) = trajectory_outputs(&fit.draws()?, obs, config.sampler.seed)?;
    write_records(&dir.join(TRAJECTORIES), &trajectories)?;
    write_records(&dir.join(BANDS), &bands)
}

/// Everything the reports need from a fit directory.
#[derive(Debug, Clone)]
pub struct LoadedFit {
    pub dir: PathBuf,
    pub meta: FitMeta,
    pub records: Vec<ObservationRecord>,
    pub obs: ObservationSeries,
    pub draws: Vec<ModelParams>,
}

pub fn load_fit(dir: &Path) -> Result<LoadedFit> {
    let meta: FitMeta = read_json(&dir.join(META))?;
    let layout = meta.layout()?;
    let records: Vec<ObservationRecord> = read_records(&dir.join(OBSERVATIONS))?;
    let origin = records.first().map_or("", |r| r.country.as_str()).to_string();
    let obs = observations_from_records(&records, meta.scaling()?, &origin)?;
    let draws = read_samples(&dir.join(SAMPLES), &meta.param_names)?
        .iter()
        .map(|d| layout.params_from_constrained(d).map_err(Error::from))
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedFit {
        dir: dir.to_path_buf(),
        meta,
        records,
        obs,
        draws,
    })
}
