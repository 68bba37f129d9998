//! Verb implementations. Each experiment writes its outputs into an
//! isolated directory and finishes with a run manifest listing every
//! emitted file with its content hash.

use crate::config::ExperimentConfig;
use kelsim::diagnostics::contraction::{l1_contraction_experiment, ContractionInput};
use kelsim::diagnostics::energy::{energy_audit, EnergyAuditInput, EnergyCutoff};
use kelsim::diagnostics::holder::estimate_holder_exponent;
use kelsim::diagnostics::make_intrinsic_cylinder;
use kelsim::diagnostics::sobolev::sobolev_check;
use kelsim::error::{Error, Result};
use kelsim::io::{export_trajectory, fnv1a64, write_csv_series, OpReport};
use kelsim::system::{run, InitialData, RunConfig, TerminationStatus, TestFunctionBank,
    weak_form_residual, Trajectory};
use serde::Serialize;
use std::path::{Path, PathBuf};

/// Exit codes: 0 completed, 2 config error, 3 blow-up (partial outputs),
/// 4 boundary contact (partial outputs).
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;
pub const EXIT_BOUNDARY: i32 = 4;

pub struct Outputs {
    dir: PathBuf,
    files: Vec<(String, u64)>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn track(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        let rel = path
            .strip_prefix(&self.dir)
            .unwrap_or(path)
            .to_string_lossy()
            .into_owned();
        self.files.push((rel, fnv1a64(&bytes)));
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, serde_json::to_string_pretty(value).unwrap())?;
        self.track(&path)
    }

    fn write_csv(&mut self, name: &str, header: &str, rows: &[(f64, f64)]) -> Result<()> {
        let path = self.dir.join(name);
        write_csv_series(&path, header, rows)?;
        self.track(&path)
    }

    fn finish(mut self) -> Result<()> {
        #[derive(Serialize)]
        struct RunManifest {
            version: u32,
            files: Vec<FileEntry>,
        }
        #[derive(Serialize)]
        struct FileEntry {
            path: String,
            fnv1a64: String,
        }
        self.files.sort();
        let manifest = RunManifest {
            version: 1,
            files: self
                .files
                .iter()
                .map(|(p, h)| FileEntry {
                    path: p.clone(),
                    fnv1a64: format!("{h:016x}"),
                })
                .collect(),
        };
        std::fs::write(
            self.dir.join("run-manifest.json"),
            serde_json::to_string_pretty(&manifest).unwrap(),
        )?;
        Ok(())
    }
}

fn status_exit(status: TerminationStatus) -> i32 {
    match status {
        TerminationStatus::Completed => EXIT_OK,
        TerminationStatus::Blowup => EXIT_BLOWUP,
        TerminationStatus::BoundaryContact => EXIT_BOUNDARY,
    }
}

fn run_trajectory(cfg: &ExperimentConfig, memory_budget: Option<u64>) -> Result<Trajectory> {
    let grid = cfg.grid_spec()?;
    let params = cfg.model_params()?;
    let u0 = cfg.build_field(&cfg.initial, grid)?;
    let v0 = match &cfg.initial_v {
        Some(p) => Some(cfg.build_field(p, grid)?),
        None => None,
    };
    let run_section = cfg
        .run
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("config is missing the run section".into()))?;
    let mut rc = RunConfig::new(params, run_section.t_end, cfg.snapshot_times()?);
    rc.cfl = cfg.cfl_config()?;
    if let Some(budget) = memory_budget {
        rc.memory_budget = budget;
    }
    if let Some(max_steps) = run_section.max_steps {
        rc.max_steps = max_steps;
    }
    run(&rc, &InitialData { u0, v0 })
}

pub fn cmd_simulate(cfg: &ExperimentConfig, out_dir: &Path, budget: Option<u64>) -> Result<i32> {
    let traj = run_trajectory(cfg, budget)?;
    let mut outputs = Outputs::new(out_dir)?;
    let manifest = export_trajectory(out_dir, &traj)?;
    outputs.track(&manifest)?;
    for snap_file in std::fs::read_dir(out_dir)? {
        let p = snap_file?.path();
        let name = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
        if name.ends_with(".field") || name == "mass.csv" {
            outputs.track(&p)?;
        }
    }
    // sup-norm series alongside the mass series
    let linf: Vec<(f64, f64)> = traj
        .snapshots
        .iter()
        .map(|s| (s.t, s.u.max_abs()))
        .collect();
    outputs.write_csv("linf.csv", "sup_norm", &linf)?;

    if let Some(wf) = &cfg.weak_form {
        let bank = TestFunctionBank::seeded(
            &traj.grid,
            traj.t_start(),
            traj.t_end(),
            wf.functions,
            cfg.seed,
        );
        let rep = weak_form_residual(&traj, &bank)?;
        let report = OpReport::new("weak_form_residual")
            .input("functions", wf.functions)
            .input("seed", cfg.seed)
            .term("residual_u", &rep.residual_u)
            .term("residual_v", &rep.residual_v)
            .constant("max_residual_u", rep.max_residual_u)
            .constant("max_residual_v", rep.max_residual_v)
            .flags_from(&rep.flags);
        outputs.write_json("weak_form.json", &report)?;
    }
    outputs.finish()?;
    Ok(status_exit(traj.status))
}

pub fn cmd_contraction(cfg: &ExperimentConfig, out_dir: &Path) -> Result<i32> {
    let section = cfg
        .contraction
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("config is missing the contraction section".into()))?;
    let grid = cfg.grid_spec()?;
    let params = cfg.model_params()?;
    let u0 = cfg.build_field(&cfg.initial, grid)?;
    let u0_hat = cfg.build_field(&section.initial_hat, grid)?;
    let v0 = match &cfg.initial_v {
        Some(p) => Some(cfg.build_field(p, grid)?),
        None => None,
    };
    let sample_times = match (&section.sample_times, section.sample_count) {
        (Some(t), None) => t.clone(),
        (None, Some(k)) => (1..=k)
            .map(|i| section.t_end * i as f64 / k as f64)
            .collect(),
        (None, None) => (1..=8)
            .map(|i| section.t_end * i as f64 / 8.0)
            .collect(),
        (Some(_), Some(_)) => {
            return Err(Error::InvalidInput(
                "give sample_times or sample_count, not both".into(),
            ))
        }
    };
    let input = ContractionInput {
        params,
        cfl: cfg.cfl_config()?,
        t_end: section.t_end,
        sample_times,
        epsilon: section.epsilon,
        c_const: section.c,
    };
    let series = l1_contraction_experiment(
        &input,
        &InitialData {
            u0,
            v0: v0.clone(),
        },
        &InitialData { u0: u0_hat, v0 },
    )?;
    let mut outputs = Outputs::new(out_dir)?;
    let rows: Vec<(f64, f64)> = series.times.iter().cloned().zip(series.d.clone()).collect();
    outputs.write_csv("d_series.csv", "l1_difference", &rows)?;
    let env1: Vec<(f64, f64)> = series
        .times
        .iter()
        .cloned()
        .zip(series.envelope_case1.clone())
        .collect();
    outputs.write_csv("envelope_case1.csv", "gronwall_envelope", &env1)?;
    let env2: Vec<(f64, f64)> = series
        .times
        .iter()
        .cloned()
        .zip(series.envelope_case2.clone())
        .collect();
    outputs.write_csv("envelope_case2.csv", "gronwall_envelope", &env2)?;
    let report = OpReport::new("l1_contraction_experiment")
        .input("t_end", section.t_end)
        .input("epsilon", section.epsilon)
        .input("c", section.c)
        .term("times", &series.times)
        .term("d", &series.d)
        .term("d_plus", &series.d_plus)
        .term("d_minus", &series.d_minus)
        .term("g1", &series.g1)
        .term("g2_case1", &series.g2_case1)
        .term("g2_case2", &series.g2_case2)
        .term("mass", &series.mass)
        .term("mass_hat", &series.mass_hat)
        .constant("lambda_fit", series.lambda_fit)
        .constant("lambda_r2", series.lambda_r2)
        .flags_from(&series.flags);
    outputs.write_json("report.json", &report)?;
    outputs.finish()?;
    Ok(status_exit(series.status))
}

pub fn cmd_holder(cfg: &ExperimentConfig, out_dir: &Path) -> Result<i32> {
    let section = cfg
        .holder
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("config is missing the holder section".into()))?;
    let traj = run_trajectory(cfg, None)?;
    let mut center = [0.0; 3];
    let n = traj.grid.n;
    if section.center.len() != n {
        return Err(Error::InvalidInput("holder center has wrong dimension".into()));
    }
    center[..n].copy_from_slice(&section.center);
    let t0 = section.t0.unwrap_or_else(|| traj.t_end());
    let cyl = make_intrinsic_cylinder(
        &traj,
        &center,
        t0,
        section.radius,
        section.amplitude_divisor,
        section.parent_epsilon,
    )?;
    let fit = estimate_holder_exponent(&traj, &cyl, section.levels)?;
    let mut outputs = Outputs::new(out_dir)?;
    let rows: Vec<(f64, f64)> = fit
        .radii
        .iter()
        .cloned()
        .zip(fit.oscillations.clone())
        .collect();
    outputs.write_csv("oscillation.csv", "osc", &rows)?;
    let report = OpReport::new("estimate_holder_exponent")
        .input("center", &section.center)
        .input("t0", t0)
        .input("radius", section.radius)
        .input("amplitude_divisor", section.amplitude_divisor)
        .input("levels", section.levels)
        .term("radii", &fit.radii)
        .term("oscillations", &fit.oscillations)
        .term("omega", cyl.omega)
        .term("a0", cyl.a0)
        .term("admissible", cyl.admissible)
        .constant("beta", fit.beta)
        .constant("lambda_star", fit.lambda_star)
        .constant("r_squared", fit.r_squared);
    outputs.write_json("report.json", &report)?;
    outputs.finish()?;
    Ok(status_exit(traj.status))
}

pub fn cmd_energy_audit(cfg: &ExperimentConfig, out_dir: &Path) -> Result<i32> {
    let section = cfg
        .energy
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("config is missing the energy section".into()))?;
    let traj = run_trajectory(cfg, None)?;
    let n = traj.grid.n;
    if section.center.len() != n {
        return Err(Error::InvalidInput("energy center has wrong dimension".into()));
    }
    let mut center = [0.0; 3];
    center[..n].copy_from_slice(&section.center);
    let rep = energy_audit(&EnergyAuditInput {
        traj: &traj,
        cutoff: EnergyCutoff {
            center,
            radius: section.radius,
            ramp_fraction: section.ramp_fraction,
        },
        t1: section.t1,
        t2: section.t2,
        level: section.level,
        sign: section.sign,
        a1: section.a1,
        a2: section.a2,
        xi_tol: section.xi_tol,
    })?;
    let mut outputs = Outputs::new(out_dir)?;
    let report = OpReport::new("energy_audit")
        .input("t1", section.t1)
        .input("t2", section.t2)
        .input("level", section.level)
        .input("sign", section.sign)
        .input("radius", section.radius)
        .term("lhs_slice", rep.lhs_slice)
        .term("lhs_gradient", rep.lhs_gradient)
        .term("rhs_grad_eta", rep.rhs_grad_eta)
        .term("rhs_eta_time", rep.rhs_eta_time)
        .term("rhs_initial_slice", rep.rhs_initial_slice)
        .term("rhs_chemotaxis", rep.rhs_chemotaxis)
        .term("level_set_term", rep.level_set_term)
        .constant("c_emp", rep.c_emp)
        .constant("q_tilde", rep.q_tilde)
        .constant("r_tilde", rep.r_tilde)
        .constant("kappa", rep.kappa)
        .flags_from(&rep.flags);
    outputs.write_json("report.json", &report)?;
    outputs.finish()?;
    Ok(status_exit(traj.status))
}

pub fn cmd_sobolev(cfg: &ExperimentConfig, out_dir: &Path) -> Result<i32> {
    let section = cfg
        .sobolev
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("config is missing the sobolev section".into()))?;
    let traj = run_trajectory(cfg, None)?;
    let n = traj.grid.n;
    if section.center.len() != n {
        return Err(Error::InvalidInput("sobolev center has wrong dimension".into()));
    }
    let mut center = [0.0; 3];
    center[..n].copy_from_slice(&section.center);
    // the inequalities are audited on u^m, the regularity object
    let m = traj.params.m;
    let fields: Vec<(f64, kelsim::grid::ScalarField)> = traj
        .snapshots
        .iter()
        .filter(|s| match &section.times {
            Some(times) => times.iter().any(|&t| (t - s.t).abs() <= 1e-9 * (1.0 + t.abs())),
            None => true,
        })
        .map(|s| (s.t, s.u.map(|x| kelsim::density::fpow(x, m))))
        .collect();
    let slices: Vec<(f64, &kelsim::grid::ScalarField)> =
        fields.iter().map(|(t, f)| (*t, f)).collect();
    let rep = sobolev_check(&slices, &center, section.radius)?;
    let mut outputs = Outputs::new(out_dir)?;
    let rows: Vec<(f64, f64)> = rep
        .times
        .iter()
        .cloned()
        .zip(rep.ratio_critical.iter().map(|r| r.unwrap_or(0.0)))
        .collect();
    outputs.write_csv("ratio_critical.csv", "sobolev_ratio", &rows)?;
    let report = OpReport::new("sobolev_check")
        .input("radius", section.radius)
        .input("center", &section.center)
        .term("times", &rep.times)
        .term("ratio_critical", &rep.ratio_critical)
        .term("positivity_measure", rep.positivity_measure)
        .constant("ratio_critical_max", rep.ratio_critical_max)
        .constant("c_weighted", rep.c_weighted)
        .flags_from(&rep.flags);
    outputs.write_json("report.json", &report)?;
    outputs.finish()?;
    Ok(status_exit(traj.status))
}

pub fn cmd_validate(out_dir: &Path) -> Result<i32> {
    let (report, timings) = kelsim::validate::run_suite_with_timings();
    for c in &report.criteria {
        let secs = timings
            .iter()
            .find(|&&(id, _)| id == c.id)
            .map(|&(_, s)| format!(" [{s:.1}s]"))
            .unwrap_or_default();
        eprintln!(
            "criterion {:2} {:32} {}{}",
            c.id,
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            secs
        );
    }
    let mut outputs = Outputs::new(out_dir)?;
    outputs.write_json("report.json", &report)?;
    outputs.finish()?;
    Ok(if report.all_passed { EXIT_OK } else { 1 })
}
