//! Acceptance criteria, one PASS/FAIL/SKIP line each.
//!
//! `cargo test -p sudr --test acceptance -- 3 5` runs only the listed
//! criteria. Criterion 4 needs the JHU CSSE global time-series files in
//! `SUDR_JHU_DIR`; the eleven-country pattern check also needs
//! `SUDR_ALL_COUNTRIES=1`.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sudr::artifacts::{self, load_fit};
use sudr::commands::{cmd_fit, cmd_synth, country_source, robustness_datasets};
use sudr::config::{PriorConfig, RunConfig, SamplerConfig, Source, SyntheticSpec};
use sudr::fit::{fit_posterior, FitOptions};
use sudr::manifest::Manifest;
use sudr::report::peak_report;
use sudr::robustness::{run_robustness, summarize_runs, RobustnessOptions, MODELS, SPARSITY_LEVELS};
use sudr::Error;
use sudr_core::bernstein::bernstein_eval;
use sudr_core::diagnostics::split_rhat;
use sudr_core::hmc::{hmc_sample, leapfrog, HmcConfig, LogDensity};
use sudr_core::ode::{simulate_complex_sir, simulate_sudr, DEFAULT_SUBSTEPS};
use sudr_core::posterior::{ModelKind, Posterior};
use sudr_core::prior::PriorSpec;
use sudr_core::{ContagionFunction, EpidemicState, ModelParams, SirState};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

// ---------------------------------------------------------------- 1

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_sum = 0.0f64;
    let mut bounds_ok = true;
    let mut ends_ok = true;
    for _ in 0..1000 {
        let n = rng.random_range(0..=12);
        let xi: Vec<f64> = (0..=n).map(|_| rng.random_range(0.0..50.0)).collect();
        let x: f64 = rng.random();
        let f = ContagionFunction::new(xi.clone()).unwrap();
        let ones = ContagionFunction::new(vec![1.0; n + 1]).unwrap();
        worst_sum = worst_sum.max((bernstein_eval(x, &ones).unwrap() - 1.0).abs());
        let v = bernstein_eval(x, &f).unwrap();
        let (lo, hi) = (f.min_coeff(), f.max_coeff());
        bounds_ok &= v >= lo - 1e-12 && v <= hi + 1e-12;
        ends_ok &= (bernstein_eval(0.0, &f).unwrap() - xi[0]).abs() <= 1e-12
            && (bernstein_eval(1.0, &f).unwrap() - xi[n]).abs() <= 1e-12;
    }

    let mut worst_mass = 0.0f64;
    for (xi, theta, gamma) in [
        (vec![3.0, 1.0, 1.0], 0.8, 1.0),
        (vec![2.0, 10.0, 1.0], 0.3, 0.2),
        (vec![0.5, 6.0, 2.0, 9.0, 1.0, 4.0, 0.2, 3.0, 5.0], 0.9, 0.1),
    ] {
        let p = ModelParams::new(
            ContagionFunction::new(xi).unwrap(),
            theta,
            gamma,
            1e-3,
            EpidemicState::new(0.9, 1e-3, 5e-4, 0.0),
        )
        .unwrap();
        let tr = simulate_sudr(&p, 60, DEFAULT_SUBSTEPS).unwrap();
        let t0 = tr.states[0].total();
        for s in &tr.states {
            worst_mass = worst_mass.max((s.total() - t0).abs());
        }
    }

    // tiny-step Euler on xi = [3, 3, 3], theta 0.8, gamma 0.4, 30 days
    let p = ModelParams::new(
        ContagionFunction::new(vec![3.0; 3]).unwrap(),
        0.8,
        0.4,
        1e-3,
        EpidemicState::new(0.99, 0.01, 0.0, 0.0),
    )
    .unwrap();
    let rk4 = simulate_sudr(&p, 30, DEFAULT_SUBSTEPS).unwrap();
    // converged reference, to show how much of the gap each side carries
    let fine = simulate_sudr(&p, 30, 10_000).unwrap();
    let h = 1e-5;
    let mut y = [0.99, 0.01, 0.0, 0.0];
    let mut worst_euler = 0.0f64;
    let (mut euler_own, mut rk4_own) = (0.0f64, 0.0f64);
    for day in 1..=30 {
        for _ in 0..100_000 {
            let [s, u, d, _] = y;
            let inf = 3.0 * s * u;
            let dy = [-inf, inf - 1.2 * u, 0.8 * u - 0.4 * d, 0.4 * (u + d)];
            for k in 0..4 {
                y[k] += h * dy[k];
            }
        }
        let r = rk4.states[day].to_array();
        let f = fine.states[day].to_array();
        for k in 0..4 {
            worst_euler = worst_euler.max((r[k] - y[k]).abs());
            euler_own = euler_own.max((f[k] - y[k]).abs());
            rk4_own = rk4_own.max((f[k] - r[k]).abs());
        }
    }

    let p = ModelParams::new(
        ContagionFunction::new(vec![2.0, 10.0, 1.0]).unwrap(),
        0.0,
        0.5,
        1e-3,
        EpidemicState::new(0.95, 0.01, 0.0, 0.0),
    )
    .unwrap();
    let sudr = simulate_sudr(&p, 60, DEFAULT_SUBSTEPS).unwrap();
    let csir = simulate_complex_sir(&p.contagion, 0.5, SirState::new(0.95, 0.01, 0.0), 60, DEFAULT_SUBSTEPS).unwrap();
    let worst_reduction = sudr
        .states
        .iter()
        .zip(&csir)
        .map(|(a, b)| (a.s - b.s).abs().max((a.i_u - b.i).abs()).max((a.r - b.r).abs()))
        .fold(0.0, f64::max);

    check(
        worst_sum <= 1e-12 && bounds_ok && ends_ok && worst_mass <= 1e-8 && worst_euler <= 1e-6 && worst_reduction <= 1e-10,
        format!(
            "partition {worst_sum:.1e}, bounds {bounds_ok}, endpoints {ends_ok}, mass drift {worst_mass:.1e}, \
             euler gap {worst_euler:.1e} (euler error {euler_own:.1e}, rk4 error {rk4_own:.1e}), theta=0 gap {worst_reduction:.1e}"
        ),
    )
}

// ---------------------------------------------------------------- 2

struct StandardGaussian(usize);

impl LogDensity for StandardGaussian {
    fn dim(&self) -> usize {
        self.0
    }

    fn log_density(&self, z: &[f64]) -> f64 {
        -0.5 * z.iter().map(|x| x * x).sum::<f64>()
    }

    fn initial_point(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        (0..self.0).map(|_| rng.random_range(-2.0..2.0)).collect()
    }

    fn gradient(&self, z: &[f64]) -> sudr_core::Result<Vec<f64>> {
        Ok(z.iter().map(|x| -x).collect())
    }
}

fn synthetic_truth() -> (ModelParams, SyntheticSpec) {
    let spec = SyntheticSpec::default();
    (spec.truth().unwrap(), spec)
}

fn criterion_2() -> Outcome {
    let config = HmcConfig {
        chains: 4,
        iters: 2000,
        warmup: 1000,
        seed: 2,
        ..HmcConfig::default()
    };
    let set = hmc_sample(&StandardGaussian(3), &config).unwrap();
    let draws: Vec<&Vec<f64>> = set.pooled_draws().collect();
    let n = draws.len() as f64;
    let mut moments_ok = true;
    let mut detail = String::new();
    for i in 0..3 {
        let mean = draws.iter().map(|d| d[i]).sum::<f64>() / n;
        let var = draws.iter().map(|d| (d[i] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        moments_ok &= mean.abs() < 0.05 && (var - 1.0).abs() < 0.1;
        detail.push_str(&format!("mean{i} {mean:+.3} var{i} {var:.3}, "));
    }

    let (_, spec) = synthetic_truth();
    let ds = spec.generate().unwrap();
    let post = Posterior::new(&ds.obs, PriorSpec::default(), ModelKind::Sudr, 2).unwrap();
    let z0 = post.layout().transform(&post.reference_point()).unwrap();
    let p0: Vec<f64> = (0..z0.len()).map(|i| (i as f64 * 0.7).sin()).collect();
    let out = leapfrog(&post, &z0, &p0, 1e-3, 20).unwrap();
    let back_momentum: Vec<f64> = out.point.momentum.iter().map(|m| -m).collect();
    let back = leapfrog(&post, &out.point.position, &back_momentum, 1e-3, 20).unwrap();
    let reversal = back
        .point
        .position
        .iter()
        .zip(&z0)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    // fourth-order central differences as the reference gradient
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_grad = 0.0f64;
    for _ in 0..10 {
        let z: Vec<f64> = z0.iter().map(|v| v + rng.random_range(-0.1..0.1)).collect();
        let g = post.gradient(&z).unwrap();
        let reference: Vec<f64> = (0..z.len())
            .map(|i| {
                let h = 1e-3 * z[i].abs().max(1.0);
                let at = |k: f64| {
                    let mut w = z.clone();
                    w[i] += k * h;
                    post.log_density(&w)
                };
                (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * h)
            })
            .collect();
        let diff = g.iter().zip(&reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = reference.iter().map(|b| b * b).sum::<f64>().sqrt();
        worst_grad = worst_grad.max(diff / norm.max(1.0));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let separated: Vec<Vec<f64>> = [0.0, 5.0]
        .iter()
        .map(|m| (0..1000).map(|_| m + rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let rhat = split_rhat(&separated).unwrap();

    detail.push_str(&format!(
        "reversal {reversal:.1e}, gradient rel err {worst_grad:.1e}, separated R-hat {rhat:.2}"
    ));
    check(moments_ok && reversal <= 1e-10 && worst_grad <= 1e-4 && rhat > 2.0, detail)
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut covered = 0;
    let mut worst_rmse = 0.0f64;
    let mut errors = 0;
    let (truth, base) = synthetic_truth();
    let days = base.days;
    for seed in 1..=10u64 {
        let spec = SyntheticSpec { seed, ..base.clone() };
        let ds = spec.generate().unwrap();
        let mut options = FitOptions {
            degree: 2,
            ..FitOptions::default()
        };
        options.hmc.iters = 1000;
        options.hmc.warmup = 500;
        options.hmc.seed = seed;
        let fit = match fit_posterior(&ds.obs, &options) {
            Ok(f) => f,
            Err(e) => {
                println!("    seed {seed}: fit failed: {e}");
                errors += 1;
                continue;
            }
        };
        let th = fit.summary.get("theta").unwrap();
        let ga = fit.summary.get("gamma").unwrap();
        let hit = th.q025 <= truth.theta && truth.theta <= th.q975 && ga.q025 <= truth.gamma && truth.gamma <= ga.q975;
        covered += usize::from(hit);
        let draws = fit.draws().unwrap();
        let mut mean_iu = vec![0.0; days];
        for d in &draws {
            let (iu, _) = artifacts::daily_densities(d, days).unwrap();
            for (m, v) in mean_iu.iter_mut().zip(iu) {
                *m += v / draws.len() as f64;
            }
        }
        let rmse = (mean_iu.iter().zip(&ds.undocumented).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / days as f64).sqrt();
        worst_rmse = worst_rmse.max(rmse);
        println!(
            "    seed {seed}: theta [{:.3}, {:.3}] gamma [{:.3}, {:.3}] covered {hit} i_u rmse {rmse:.2e} max R-hat {:.2}",
            th.q025,
            th.q975,
            ga.q025,
            ga.q975,
            fit.summary.max_rhat().unwrap_or(f64::NAN)
        );
    }
    let elapsed = start.elapsed();
    let bound = 3.0 * truth.sigma;
    check(
        errors == 0 && covered >= 8 && worst_rmse < bound && elapsed < Duration::from_secs(30 * 60),
        format!(
            "theta and gamma covered in {covered}/10 seeds (need 8), worst i_u rmse {worst_rmse:.2e} (< {bound:.1e}), \
             {errors} failed fits, {:.0} s",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- 4

fn fit_country(manifest: &Manifest, country: &str, jhu: &Path, out: &Path) -> Result<sudr::report::PeakReport, Error> {
    let config = RunConfig {
        source: country_source(manifest, country)?,
        degree: 8,
        alpha: manifest.get(country)?.alpha(),
        prior: PriorConfig::default(),
        sampler: SamplerConfig::default(),
    };
    match cmd_fit(&config, Some(jhu), out) {
        Ok(_) | Err(Error::NotConverged { .. }) => {}
        Err(e) => return Err(e),
    }
    peak_report(&load_fit(out)?)
}

fn criterion_4() -> Outcome {
    let Some(jhu) = std::env::var_os("SUDR_JHU_DIR").map(PathBuf::from) else {
        return Outcome::Skip("set SUDR_JHU_DIR to the JHU CSSE time-series directory".into());
    };
    let manifest = Manifest::builtin();
    let dir = tempfile::tempdir().unwrap();
    let austria = match fit_country(&manifest, "Austria", &jhu, &dir.path().join("Austria")) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(format!("Austria: {e}")),
    };
    let summary: artifacts::SummaryFile = artifacts::read_json(&dir.path().join("Austria").join(artifacts::SUMMARY)).unwrap();
    let mean = |name: &str| summary.params.iter().find(|p| p.name == name).map_or(f64::NAN, |p| p.mean);
    let (theta, gamma) = (mean("theta"), mean("gamma"));
    let ratio = austria.ratio.map_or(f64::NAN, |r| r.mean);
    let mut ok = austria.peak_documented == 9334
        && (theta - 0.97).abs() <= 0.1
        && (gamma - 3.38).abs() <= 0.5
        && (3.5..=6.0).contains(&ratio);
    let mut detail = format!(
        "Austria peak {} (9334), theta {theta:.3} (0.97 +- 0.1), gamma {gamma:.3} (3.38 +- 0.5), ratio {ratio:.2} (3.5..6)",
        austria.peak_documented
    );
    if std::env::var_os("SUDR_ALL_COUNTRIES").is_some() {
        let mut in_band = 0;
        let mut high = true;
        for country in manifest.countries.keys() {
            let r = match fit_country(&manifest, country, &jhu, &dir.path().join(country)) {
                Ok(r) => r.ratio.map_or(f64::NAN, |r| r.mean),
                Err(e) => return Outcome::Fail(format!("{country}: {e}")),
            };
            println!("    {country}: ratio {r:.2}");
            in_band += usize::from((2.0..=6.0).contains(&r));
            if country == "Germany" || country == "United Kingdom" {
                high &= r > 8.0;
            }
        }
        ok &= in_band >= 8 && high;
        detail.push_str(&format!("; {in_band}/11 ratios in [2, 6], Germany and UK above 8: {high}"));
    } else {
        detail.push_str("; eleven-country pattern skipped (SUDR_ALL_COUNTRIES unset)");
    }
    check(ok, detail)
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let (_, spec) = synthetic_truth();
    let seeds: Vec<u64> = (1..=5).collect();
    let datasets = robustness_datasets(&Source::Synthetic(spec), 0.01, None, &seeds).unwrap();
    let options = RobustnessOptions {
        degree: 2,
        sampler: SamplerConfig {
            chains: 2,
            iters: 300,
            warmup: 150,
            mode_starts: 4,
            ..SamplerConfig::default()
        },
        ..RobustnessOptions::default()
    };
    let runs = match run_robustness(&datasets, &options) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let mut ok = true;
    for level in summarize_runs(&runs, &SPARSITY_LEVELS) {
        let m = |name: &str| level.mean_rmse[name].unwrap_or(f64::NAN);
        let (sir, td, csir, sudr) = (m(MODELS[0]), m(MODELS[1]), m(MODELS[2]), m(MODELS[3]));
        let ordered = sudr < td && td < sir && csir <= 2.0 * sudr;
        ok &= ordered;
        let failures: usize = level.failures.values().sum();
        println!(
            "    sparsity {:.2}: sir {sir:.2e} td-sir {td:.2e} complex-sir {csir:.2e} sudr {sudr:.2e} failed runs {failures} ordered {ordered}",
            level.sparsity
        );
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(20 * 60);
    check(
        ok,
        format!(
            "SUDR < time-dependent SIR < SIR and complex SIR within 2x of SUDR at every level, {:.0} s",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let manifest = Manifest::load(&fixture().join("manifest.toml")).unwrap();
    let config = RunConfig {
        source: country_source(&manifest, "Toyland").unwrap(),
        degree: 2,
        alpha: 0.01,
        prior: PriorConfig::default(),
        sampler: SamplerConfig {
            chains: 2,
            iters: 160,
            warmup: 80,
            seed: 11,
            mode_starts: 3,
            ..SamplerConfig::default()
        },
    };
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        match cmd_fit(&config, Some(&fixture()), out) {
            Ok(_) | Err(Error::NotConverged { .. }) => {}
            Err(e) => return Outcome::Fail(format!("toy fit: {e}")),
        }
    }
    let files = [
        artifacts::OBSERVATIONS,
        artifacts::SAMPLES,
        artifacts::SUMMARY,
        artifacts::DIAGNOSTICS,
        artifacts::META,
        artifacts::TRAJECTORIES,
        artifacts::BANDS,
    ];
    let same = |x: &Path, y: &Path| std::fs::read(x).ok().is_some_and(|bytes| std::fs::read(y).ok() == Some(bytes));
    let identical = files.iter().filter(|f| same(&a.join(f), &b.join(f))).count();
    let golden = [artifacts::OBSERVATIONS, artifacts::SUMMARY, artifacts::BANDS];
    let golden_ok = golden.iter().filter(|f| same(&a.join(f), &fixture().join("golden").join(f))).count();

    let spec = SyntheticSpec::default();
    let (s1, s2) = (dir.path().join("s1"), dir.path().join("s2"));
    cmd_synth(&spec, &s1).unwrap();
    cmd_synth(&spec, &s2).unwrap();
    let synth_same = ["observations.csv", "synthetic.csv", "synthetic_spec.json"]
        .iter()
        .all(|f| same(&s1.join(f), &s2.join(f)));

    check(
        identical == files.len() && golden_ok == golden.len() && synth_same,
        format!(
            "{identical}/{} fit artifacts byte-identical, {golden_ok}/{} match the golden files, synthetic output identical {synth_same}",
            files.len(),
            golden.len()
        ),
    )
}

fn main() {
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, &str, fn() -> Outcome); 6] = [
        ("1", "core numerics", criterion_1),
        ("2", "inference on analytic targets", criterion_2),
        ("3", "synthetic parameter recovery", criterion_3),
        ("4", "paper-number reproduction", criterion_4),
        ("5", "robustness ordering", criterion_5),
        ("6", "determinism and golden files", criterion_6),
    ];
    let (mut pass, mut fail, mut skip) = (0, 0, 0);
    for (id, name, run) in criteria {
        if !wanted.is_empty() && !wanted.iter().any(|w| w == id) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => {
                pass += 1;
                ("PASS", d)
            }
            Outcome::Fail(d) => {
                fail += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => {
                skip += 1;
                ("SKIP", d)
            }
        };
        println!("{tag} criterion {id} ({name}, {secs:.0} s): {detail}");
    }
    println!("acceptance: {pass} passed, {fail} failed, {skip} skipped");
}
