//! Study dispatch: builds the module-level configs from a [`RunConfig`],
//! runs the study, and writes the artifacts (pretty JSON with sorted keys,
//! newline-terminated CSV with '.' decimals).

use crate::config::{Command, GeneratorChoice, RunConfig};
use fsde::density::{self, BesovProbeConfig, RateStudyConfig};
use fsde::ensemble::SeedRecord;
use fsde::error::{Error, Result};
use fsde::fbm::{self, Generator};
use fsde::girsanov::{self, GirsanovConfig};
use fsde::library;
use fsde::sde::{self, MomentStudyConfig};
use fsde::volterra::{self, HurstParam, KernelGrid};
use fsde::MonteCarloReport;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub struct RunOutcome {
    pub files: Vec<PathBuf>,
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, bytes)?;
    Ok(path)
}

fn write_report(
    dir: &Path,
    name: &str,
    mut report: MonteCarloReport,
    hash: &str,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    report.config_hash = hash.to_string();
    files.push(write_file(
        dir,
        &format!("{name}.json"),
        report.to_json()?.as_bytes(),
    )?);
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    files.push(write_file(dir, &format!("{name}.csv"), &csv)?);
    Ok(())
}

fn hurst(cfg: &RunConfig) -> Result<HurstParam> {
    HurstParam::new(cfg.hurst)
}

fn generator(cfg: &RunConfig) -> Generator {
    cfg.generator.unwrap_or(GeneratorChoice::Circulant).into()
}

fn coefficient(cfg: &RunConfig) -> Result<sde::CoefficientSpec> {
    let name = cfg
        .coefficient
        .as_deref()
        .ok_or_else(|| Error::invalid("config key 'coefficient' is required"))?;
    library::coefficient(name)
        .ok_or_else(|| Error::invalid(format!("unknown coefficient '{name}'")))
}

fn x0_for(cfg: &RunConfig, dim: usize) -> Result<Vec<f64>> {
    match &cfg.x0 {
        None => Ok(vec![0.0; dim]),
        Some(v) if v.len() == dim => Ok(v.clone()),
        Some(v) => Err(Error::invalid(format!(
            "x0 has {} entries but the coefficients are {dim}-dimensional",
            v.len()
        ))),
    }
}

fn default_beta(h: HurstParam) -> f64 {
    0.9 * h.value()
}

pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(out_dir)?;
    let hash = cfg.config_hash();
    let mut files = Vec::new();
    match cfg.command {
        Command::FbmGen => fbm_gen(cfg, out_dir, &hash, &mut files)?,
        Command::SdeSolve => sde_solve(cfg, out_dir, &hash, &mut files)?,
        Command::Moments => moments(cfg, out_dir, &hash, &mut files)?,
        Command::Girsanov => girsanov_cmd(cfg, out_dir, &hash, &mut files)?,
        Command::DensityRate => density_rate(cfg, out_dir, &hash, &mut files)?,
        Command::BesovProbe => besov_probe_cmd(cfg, out_dir, &hash, &mut files)?,
        Command::KernelValidate => kernel_validate(cfg, out_dir, &hash, &mut files)?,
    }
    Ok(RunOutcome { files })
}

fn fbm_gen(cfg: &RunConfig, dir: &Path, hash: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let h = hurst(cfg)?;
    let gen = generator(cfg);
    let kg = match gen {
        Generator::Kernel => Some(Arc::new(KernelGrid::build(cfg.n_steps, cfg.t_end, h)?)),
        _ => None,
    };
    let mut csv = Vec::new();
    writeln!(csv, "replica,t,x_1")?;
    for r in 0..cfg.n_replicas as u64 {
        let path = fbm::sample_fbm(
            gen,
            cfg.n_steps,
            cfg.t_end,
            1,
            h,
            SeedRecord::new(cfg.seed, r),
            kg.as_ref(),
        )?;
        for i in 0..path.path.len() {
            writeln!(csv, "{r},{},{}", path.path.time(i), path.path.scalar(i))?;
        }
    }
    files.push(write_file(dir, "paths.csv", &csv)?);
    let meta = serde_json::json!({
        "study": "fbm-gen",
        "seed": cfg.seed,
        "config_hash": hash,
        "hurst": cfg.hurst,
        "n_steps": cfg.n_steps,
        "n_replicas": cfg.n_replicas,
        "t_end": cfg.t_end,
    });
    files.push(write_file(
        dir,
        "meta.json",
        serde_json::to_string_pretty(&meta)
            .map_err(|e| Error::Io(e.to_string()))?
            .as_bytes(),
    )?);
    Ok(())
}

fn sde_solve(cfg: &RunConfig, dir: &Path, hash: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let h = hurst(cfg)?;
    let c = coefficient(cfg)?;
    c.validate_for(h)?;
    let x0 = x0_for(cfg, c.dim)?;
    let gen = generator(cfg);
    let kg = match gen {
        Generator::Kernel => Some(Arc::new(KernelGrid::build(cfg.n_steps, cfg.t_end, h)?)),
        _ => None,
    };
    let driver = fbm::sample_fbm(
        gen,
        cfg.n_steps,
        cfg.t_end,
        c.dim,
        h,
        SeedRecord::new(cfg.seed, 0),
        kg.as_ref(),
    )?;
    let x = sde::euler_solve(&c, &x0, &driver)?;
    let mut csv = Vec::new();
    x.path.write_csv(&mut csv)?;
    files.push(write_file(dir, "solution.csv", &csv)?);
    let mut csv = Vec::new();
    driver.path.write_csv(&mut csv)?;
    files.push(write_file(dir, "driver.csv", &csv)?);

    let beta = cfg.beta.unwrap_or(default_beta(h));
    let stats = sde::path_statistics(&x, beta)?;
    let mut report = MonteCarloReport::new("sde-solve", 1, cfg.seed);
    report.insert_samples("sup_norm", &[stats.sup_norm]);
    report.insert_samples("holder_seminorm", &[stats.holder_seminorm]);
    report.diagnostics.insert("beta".into(), beta);
    write_report(dir, "report", report, hash, files)
}

fn moments(cfg: &RunConfig, dir: &Path, hash: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let h = hurst(cfg)?;
    let c = coefficient(cfg)?;
    let x0 = x0_for(cfg, c.dim)?;
    let exp_params = match (cfg.exp_c, cfg.exp_delta) {
        (Some(c_), Some(d)) => Some((c_, d)),
        (None, None) => None,
        _ => {
            return Err(Error::invalid(
                "exp_c and exp_delta must be provided together",
            ))
        }
    };
    let study = MomentStudyConfig {
        coefficients: c,
        x0,
        hurst: h,
        beta: cfg.beta.unwrap_or(default_beta(h)),
        p_list: cfg.p_list.clone().unwrap_or_else(|| vec![2.0, 4.0, 8.0]),
        exp_params,
        n_replicas: cfg.n_replicas,
        n_steps: cfg.n_steps,
        t_end: cfg.t_end,
        seed: cfg.seed,
        generator: generator(cfg),
    };
    let report = sde::moment_study(&study)?;
    write_report(dir, "report", report, hash, files)
}

fn girsanov_cmd(cfg: &RunConfig, dir: &Path, hash: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let h = hurst(cfg)?;
    let c = coefficient(cfg)?;
    let name = cfg
        .drift_functional
        .as_deref()
        .ok_or_else(|| Error::invalid("config key 'drift_functional' is required"))?;
    let hf = library::drift_functional(name, c.dim)
        .ok_or_else(|| Error::invalid(format!("unknown drift functional '{name}'")))?;
    let x0 = x0_for(cfg, c.dim)?;
    let gcfg = GirsanovConfig {
        coefficients: c,
        h: hf,
        hurst: h,
        x0,
        n_replicas: cfg.n_replicas,
        n_steps: cfg.n_steps,
        t_end: cfg.t_end,
        seed: cfg.seed,
    };
    write_report(
        dir,
        "martingale",
        girsanov::martingale_check(&gcfg)?,
        hash,
        files,
    )?;
    write_report(
        dir,
        "measure_change",
        girsanov::measure_change_check(&gcfg)?,
        hash,
        files,
    )?;
    if let Some(c_exp) = cfg.c_exp {
        write_report(
            dir,
            "exp_energy",
            girsanov::exp_energy_check(&gcfg, c_exp)?,
            hash,
            files,
        )?;
    }
    Ok(())
}

fn density_rate(cfg: &RunConfig, dir: &Path, hash: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let h = hurst(cfg)?;
    let c = coefficient(cfg)?;
    let x0 = x0_for(cfg, c.dim)?;
    let eps_list = cfg.eps_grid.clone().unwrap_or_else(|| {
        (2..=6).map(|j| cfg.t_end * 0.5f64.powi(j)).collect()
    });
    let study = RateStudyConfig {
        coefficients: c,
        x0,
        hurst: h,
        beta: cfg.beta,
        eps_list,
        n_replicas: cfg.n_replicas,
        n_steps: cfg.n_steps,
        t_end: cfg.t_end,
        seed: cfg.seed,
        generator: generator(cfg),
    };
    let report = density::approx_error_study(&study)?;
    write_report(dir, "report", report, hash, files)
}

fn besov_probe_cmd(
    cfg: &RunConfig,
    dir: &Path,
    hash: &str,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let h = hurst(cfg)?;
    let c = coefficient(cfg)?;
    c.validate_for(h)?;
    let x0 = x0_for(cfg, c.dim)?;
    let gen = generator(cfg);
    let kg = match gen {
        Generator::Kernel => Some(Arc::new(KernelGrid::build(cfg.n_steps, cfg.t_end, h)?)),
        _ => None,
    };
    let d = c.dim;
    let results = fsde::ensemble::map_replicas(cfg.n_replicas, |r| -> Result<Vec<f64>> {
        let driver = fbm::sample_fbm(
            gen,
            cfg.n_steps,
            cfg.t_end,
            d,
            h,
            SeedRecord::new(cfg.seed, r),
            kg.as_ref(),
        )?;
        let x = sde::euler_solve(&c, &x0, &driver)?;
        Ok(x.path.value(cfg.n_steps).to_vec())
    });
    let mut samples = Vec::with_capacity(cfg.n_replicas * d);
    let mut failures = 0usize;
    for res in results {
        match res {
            Ok(v) => samples.extend_from_slice(&v),
            Err(_) => failures += 1,
        }
    }
    let n_ok = samples.len() / d;

    // Localization weighting: the sample cloud itself approximates the
    // near-degeneracy level set; its resolution is the sampling density.
    let weights = match cfg.delta {
        Some(delta) => {
            let rho = |x: &[f64]| density::min_eigen_rho(&c.diffusion_matrix(x));
            let w: Vec<f64> = (0..n_ok)
                .map(|i| {
                    density::localization_weight(
                        &samples[i * d..(i + 1) * d],
                        delta,
                        rho,
                        &samples,
                    )
                })
                .collect();
            Some(w)
        }
        None => None,
    };

    let h_values = cfg
        .h_grid
        .clone()
        .unwrap_or_else(|| BesovProbeConfig::default().h_values);
    let probe_cfg = BesovProbeConfig {
        m: cfg.m.unwrap_or(2),
        alpha_test: cfg.alpha_test.unwrap_or(0.5),
        freq_levels: density::default_freq_levels(&h_values),
        h_values,
        direction: {
            let mut e = vec![0.0; d];
            e[0] = 1.0;
            e
        },
        bootstrap: 200,
        seed: cfg.seed,
    };
    let report = density::besov_probe_weighted(&samples, d, weights.as_deref(), &probe_cfg)?;
    let mut doc = serde_json::to_value(&report).map_err(|e| Error::Io(e.to_string()))?;
    doc["config_hash"] = serde_json::json!(hash);
    doc["seed"] = serde_json::json!(cfg.seed);
    doc["failures"] = serde_json::json!(failures);
    doc["localized_delta"] = serde_json::json!(cfg.delta);
    files.push(write_file(
        dir,
        "besov.json",
        serde_json::to_string_pretty(&doc)
            .map_err(|e| Error::Io(e.to_string()))?
            .as_bytes(),
    )?);

    // plot-ready marginal density estimates
    for comp in 0..d {
        let col: Vec<f64> = (0..n_ok).map(|i| samples[i * d + comp]).collect();
        match density::kde_density(&col, None, 201) {
            Ok(est) => {
                let mut csv = Vec::new();
                est.write_csv(&mut csv)?;
                files.push(write_file(dir, &format!("kde_c{comp}.csv"), &csv)?);
            }
            Err(_) => continue, // degenerate marginal: no estimate emitted
        }
    }
    Ok(())
}

fn kernel_validate(
    cfg: &RunConfig,
    dir: &Path,
    hash: &str,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let h = hurst(cfg)?;
    let t_end = cfg.t_end;
    let fracs = [0.125, 0.25, 0.5, 0.75, 1.0];
    let mut csv = Vec::new();
    writeln!(csv, "t,s,factorized,covariance,abs_err,gate")?;
    let mut max_ratio: f64 = 0.0;
    for &ft in &fracs {
        for &fs in &fracs {
            let (t, s) = (ft * t_end, fs * t_end);
            let fac = volterra::covariance_factorization(t, s, h)?;
            let cov = volterra::fbm_covariance(t, s, h)?;
            let err = (fac - cov).abs();
            let gate = 1e-3 * (1.0 + cov);
            max_ratio = max_ratio.max(err / gate);
            writeln!(csv, "{t},{s},{fac},{cov},{err},{gate}")?;
        }
    }
    files.push(write_file(dir, "factorization.csv", &csv)?);

    let c_low = volterra::kernel_tail_lower_constant(h);
    let mut csv = Vec::new();
    writeln!(csv, "eps,v_eps,lower_bound,ratio")?;
    let mut min_ratio = f64::INFINITY;
    for j in 3..=8 {
        let eps = t_end * 0.5f64.powi(j);
        let v = volterra::kernel_tail_energy(t_end, eps, h)?;
        let bound = c_low * eps.powf(2.0 * h.value());
        min_ratio = min_ratio.min(v / bound);
        writeln!(csv, "{eps},{v},{bound},{}", v / bound)?;
    }
    files.push(write_file(dir, "tail_energy.csv", &csv)?);

    let mut report = MonteCarloReport::new("kernel-validate", 1, cfg.seed);
    report
        .diagnostics
        .insert("factorization_max_err_over_gate".into(), max_ratio);
    report
        .diagnostics
        .insert("tail_min_ratio_over_bound".into(), min_ratio);
    report
        .diagnostics
        .insert("tail_lower_constant".into(), c_low);
    write_report(dir, "report", report, hash, files)
}

/// `list-library` output: coefficient entries and drift functionals.
pub fn library_listing(json: bool) -> String {
    let entries: Vec<_> = library::catalog().iter().map(|e| e.metadata()).collect();
    if json {
        serde_json::to_string_pretty(&entries).unwrap_or_default()
    } else {
        let mut out = String::new();
        out.push_str("coefficient sets:\n");
        for e in &entries {
            out.push_str(&format!(
                "  {:24} d={} gamma={} K_b={} sup={:?} lambda={:?}  {}\n",
                e.name,
                e.dim,
                e.holder_order,
                e.growth_const,
                e.sigma_sup_bound,
                e.nondegeneracy,
                e.description
            ));
        }
        out.push_str("drift functionals:\n");
        for h in library::drift_catalog(1) {
            out.push_str(&format!(
                "  {:24} lambda={} p={} K={}  {}\n",
                h.name, h.lambda, h.growth_p, h.k_const, h.description
            ));
        }
        out
    }
}
