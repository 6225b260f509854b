//! Dispatch of the command-line experiments.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{Initial, RunConfig};
use crate::decomposition::{
    critical_orthogonality_solve, orthogonality_solve, ModulationOptions, Projector,
};
use crate::error::{Result, ZkError};
use crate::evolution::{evolve, modulation_track, tracking_family};
use crate::grid::{CylGrid, Field};
use crate::lab::{growth_rate, holder_probe, lyapunov_quartic_check, mode_field, shoot_graph, Branch, Direction, ShootOptions};
use crate::report::{Diagnostics, Report};
use crate::snapshot::{save_snapshot, SnapshotHeader};
use crate::spectrum::unstable_spectrum;
use crate::speeds;
use crate::waves::{bifurcation_coefficients, line_soliton, FamilyOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Simulate,
    Spectrum,
    Bifurcate,
    Decompose,
    Shoot,
    Quartic,
    Track,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Spectrum => "spectrum",
            Experiment::Bifurcate => "bifurcate",
            Experiment::Decompose => "decompose",
            Experiment::Shoot => "shoot",
            Experiment::Quartic => "quartic",
            Experiment::Track => "track",
        }
    }
}

/// Exit status for an error: 2 validation, 3 numerical guard, 4 I/O.
pub fn exit_status(e: &ZkError) -> i32 {
    match e {
        ZkError::Io(_) | ZkError::Format(_) => 4,
        e if e.is_validation() => 2,
        _ => 3,
    }
}

/// Files written by one run.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    pub report: PathBuf,
    pub files: Vec<PathBuf>,
}

fn grid_of(cfg: &RunConfig) -> Result<Arc<CylGrid>> {
    let g = &cfg.grid;
    CylGrid::new(g.nx, g.ny, g.half_width, g.period)
}

/// Smooth localized random field of unit H^1 norm.
pub fn noise_field(grid: &Arc<CylGrid>, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64, f64)> = (0..12)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.2..1.5),
                rng.gen_range(0..3) as f64,
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let l = grid.period();
    let f = Field::from_fn(grid, |x, y| {
        let env = (-x * x / 16.0).exp();
        env * modes
            .iter()
            .map(|(a, kx, n, ph)| a * (kx * x + n * y / l + ph).cos())
            .sum::<f64>()
    });
    let n = f.norm_h1();
    if n > 0.0 {
        f.scale(1.0 / n)
    } else {
        f
    }
}

/// The configured initial datum.
pub fn initial_datum(cfg: &RunConfig, grid: &Arc<CylGrid>) -> Result<Field> {
    let e = &cfg.experiment;
    let cs = cfg.physics.c_star;
    match e.initial {
        Initial::Zero => Ok(Field::zeros(grid)),
        Initial::Soliton => {
            let q = line_soliton(e.speed.unwrap_or(cs), grid)?;
            Ok(if e.shift == 0.0 { q } else { q.shift_x(e.shift) })
        }
        Initial::Mode => {
            let proj = Projector::at_speed(cs, grid)?;
            let f = mode_field(&proj, cfg.direction())?;
            let mut u = proj.q.clone();
            u.axpy(e.eps, &f);
            Ok(u)
        }
        Initial::Noise => {
            let mut u = line_soliton(cs, grid)?;
            u.axpy(e.eps, &noise_field(grid, cfg.seed));
            Ok(u)
        }
    }
}

/// Human-readable plan of a run, printed by `--dry-run`.
pub fn plan(exp: Experiment, cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let steps: Vec<String> = match exp {
        Experiment::Simulate => vec![
            format!("build the {:?} initial datum", cfg.experiment.initial),
            format!(
                "integrate with {:?} to t = {} (dt = {})",
                cfg.integrator.scheme, cfg.integrator.t_end, cfg.integrator.dt
            ),
            "write diagnostics.csv, snapshots and report.json".into(),
        ],
        Experiment::Spectrum => vec![
            format!("resolve the unstable transverse modes at c* = {}", cfg.physics.c_star),
            "normalize the eigenpairs and check the pairings".into(),
            "write report.json".into(),
        ],
        Experiment::Bifurcate => vec![
            format!("continue the modulated family at amplitudes {:?}", cfg.experiment.amplitudes),
            "fit the speed and mass expansions and compare with the identity".into(),
            "write report.json".into(),
        ],
        Experiment::Decompose => vec![
            format!("build the {:?} initial datum", cfg.experiment.initial),
            "solve the orthogonality conditions and project the remainder".into(),
            "write report.json and remainder.bin".into(),
        ],
        Experiment::Shoot => vec![
            format!(
                "shoot the unstable amplitudes for eps = {} along the decaying mode (k = {}, j = {})",
                cfg.experiment.eps, cfg.experiment.k, cfg.experiment.j
            ),
            format!(
                "Hölder probe over {:?} (linear reference {:?})",
                cfg.experiment.eps_list, cfg.experiment.eps_reference
            ),
            "write report.json".into(),
        ],
        Experiment::Quartic => vec![
            format!("Lyapunov gap along the family at amplitudes {:?}", cfg.experiment.amplitudes),
            format!("gradient-term check at speeds {:?}", cfg.experiment.speeds),
            "write report.json".into(),
        ],
        Experiment::Track => vec![
            format!("integrate the {:?} datum in the frame moving with c*", cfg.experiment.initial),
            "modulate every snapshot; record c, rho, ||v|| and unstable coefficients".into(),
            "write diagnostics.csv and report.json".into(),
        ],
    };
    let v = json!({
        "subcommand": exp.name(),
        "config_hash": cfg.hash(exp.name()),
        "config": cfg,
        "plan": steps,
    });
    serde_json::to_string_pretty(&v).map_err(|e| ZkError::Format(e.to_string()))
}

/// Runs `exp` and writes its artifacts into `out`.
pub fn execute(exp: Experiment, cfg: &RunConfig, out: &Path) -> Result<Artifacts> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let hash = cfg.hash(exp.name());
    let grid = grid_of(cfg)?;
    let mut files = Vec::new();
    let results = match exp {
        Experiment::Simulate => simulate(cfg, &grid, &hash, out, &mut files)?,
        Experiment::Spectrum => spectrum(cfg, &grid)?,
        Experiment::Bifurcate => bifurcate(cfg, &grid)?,
        Experiment::Decompose => decompose(cfg, &grid, &hash, out, &mut files)?,
        Experiment::Shoot => shoot(cfg, &grid)?,
        Experiment::Quartic => quartic(cfg, &grid)?,
        Experiment::Track => track(cfg, &grid, out, &mut files)?,
    };
    let report = Report::new(exp.name(), &hash, results)?;
    let path = out.join("report.json");
    report.write(&path)?;
    Ok(Artifacts { report: path, files })
}

fn rel_drift(series: &[f64]) -> f64 {
    let first = series.first().copied().unwrap_or(0.0);
    let scale = first.abs().max(f64::MIN_POSITIVE);
    series.iter().fold(0.0f64, |m, v| m.max((v - first).abs())) / scale
}

fn simulate(
    cfg: &RunConfig,
    grid: &Arc<CylGrid>,
    hash: &str,
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<serde_json::Value> {
    let u0 = initial_datum(cfg, grid)?;
    let integ = cfg.integrator();
    let traj = evolve(&u0, &integ)?;
    let mut diag = Diagnostics::new(Vec::new());
    for i in 0..traj.times.len() {
        diag.push(vec![
            Some(traj.times[i]),
            Some(traj.mass[i]),
            Some(traj.energy[i]),
            Some(traj.action[i]),
            None,
            None,
            None,
        ])?;
    }
    let csv = out.join("diagnostics.csv");
    diag.write(&csv)?;
    files.push(csv);
    for (n, (t, f)) in traj.snapshots.iter().enumerate() {
        let p = out.join(format!("snapshot_{n:05}.bin"));
        save_snapshot(&p, f, &SnapshotHeader::new(grid, *t, "simulate", hash))?;
        files.push(p);
    }
    let final_t = *traj.times.last().unwrap_or(&0.0);
    let transport_error = match cfg.experiment.initial {
        Initial::Soliton => {
            let c = cfg.experiment.speed.unwrap_or(cfg.physics.c_star);
            let exact = line_soliton(c, grid)?.shift_x(cfg.experiment.shift + c * final_t);
            traj.final_state()
                .map(|u| (u - &exact).norm_l2() / exact.norm_l2())
        }
        _ => None,
    };
    Ok(json!({
        "steps": traj.times.len().saturating_sub(1),
        "t_final": final_t,
        "mass_drift": rel_drift(&traj.mass),
        "energy_drift": rel_drift(&traj.energy),
        "action_drift": rel_drift(&traj.action),
        "transport_error": transport_error,
        "snapshots": traj.snapshots.len(),
    }))
}

#[derive(Serialize)]
struct PairSummary {
    k: usize,
    lambda: f64,
    pairing: f64,
    cross: f64,
}

fn spectrum(cfg: &RunConfig, grid: &Arc<CylGrid>) -> Result<serde_json::Value> {
    let cs = cfg.physics.c_star;
    let l = grid.period();
    let spec = unstable_spectrum(cs, grid)?;
    let mut pairs = Vec::new();
    let mut pass = true;
    for p in &spec.pairs {
        let mut pairing: f64 = 0.0;
        let mut cross: f64 = 0.0;
        for j in 0..2 {
            let fp = p.f_plus(grid, j);
            let lfm = p.l_f_minus(grid, cs, j);
            pairing = pairing.max((fp.dot(&lfm) - 1.0).abs());
            cross = cross.max(fp.dot(&p.l_f_plus(grid, cs, j)).abs());
            cross = cross.max(p.f_minus(grid, j).dot(&p.l_f_minus(grid, cs, j)).abs());
            cross = cross.max(fp.dot(&p.l_f_minus(grid, cs, 1 - j)).abs());
        }
        pass &= pairing <= 1e-6 && cross <= 1e-8;
        pairs.push(PairSummary {
            k: p.k,
            lambda: p.lambda,
            pairing: 1.0 + pairing,
            cross,
        });
    }
    Ok(json!({
        "c_star": cs,
        "threshold": speeds::threshold(l),
        "n0": spec.n0,
        "unstable_dimension": 2 * spec.pairs.len(),
        "critical_index": speeds::critical_index(cs, l),
        "pairs": pairs,
        "pairing_check": pass,
        "kappa_star": spec.kappa_star,
    }))
}

fn bifurcate(cfg: &RunConfig, grid: &Arc<CylGrid>) -> Result<serde_json::Value> {
    let b = bifurcation_coefficients(cfg.physics.c_star, grid, &cfg.experiment.amplitudes, &FamilyOptions::default())?;
    let family: Vec<serde_json::Value> = b
        .waves
        .iter()
        .map(|w| {
            json!({
                "a": w.amplitude(),
                "speed": w.speed,
                "mass": w.profile.norm_l2_sq(),
                "residual": w.residual,
                "iterations": w.newton_iterations,
            })
        })
        .collect();
    Ok(json!({
        "c_star": b.c_star,
        "speed_coef": b.speed_coef,
        "mass_coef": b.mass_coef,
        "mass_coef_identity": b.mass_coef_identity,
        "rel_dev": b.identity_deviation(),
        "fit_residual": b.fit_residual,
        "family": family,
    }))
}

fn decompose(
    cfg: &RunConfig,
    grid: &Arc<CylGrid>,
    hash: &str,
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<serde_json::Value> {
    let cs = cfg.physics.c_star;
    let u = initial_datum(cfg, grid)?;
    // kernel modes at large c* have a large H1 norm; size the tube by the wave
    let base = ModulationOptions::default();
    let opts = ModulationOptions {
        tube_radius: base.tube_radius.max(0.2 * line_soliton(cs, grid)?.norm_h1()),
        ..base
    };
    let st = if speeds::critical_index(cs, grid.period()).is_some() {
        critical_orthogonality_solve(&u, cs, &FamilyOptions::default(), &opts)?
    } else {
        orthogonality_solve(&u, cs, &opts)?
    };
    let proj = Projector::at_speed(cs, grid)?;
    let comp = proj.project(&st.v, cfg.physics.kappa)?;
    let p = out.join("remainder.bin");
    save_snapshot(&p, &st.v, &SnapshotHeader::new(grid, 0.0, "decompose", hash))?;
    files.push(p);
    Ok(json!({
        "c": st.c,
        "rho": st.rho,
        "a": st.a,
        "residuals": st.residuals,
        "iterations": st.iterations,
        "orbit_distance": st.orbit_distance,
        "bound_ratio": st.bound_ratio,
        "lambda_plus": comp.lambda_plus,
        "lambda_minus": comp.lambda_minus,
        "mu1": comp.mu1,
        "mu2": comp.mu2,
        "kernel": comp.a,
        "gamma_form": comp.gamma_form,
        "e_kappa": comp.e_kappa_norm().ok(),
    }))
}

fn shoot(cfg: &RunConfig, grid: &Arc<CylGrid>) -> Result<serde_json::Value> {
    let e = &cfg.experiment;
    let proj = Projector::at_speed(cfg.physics.c_star, grid)?;
    if proj.spectrum.is_empty() {
        return Err(ZkError::Subcritical {
            c: cfg.physics.c_star,
            threshold: speeds::threshold(grid.period()),
        });
    }
    let lambda1 = proj.spectrum.pairs[0].lambda;
    let t_target = e.t_target.unwrap_or(30.0 / lambda1);
    let f = mode_field(&proj, Direction::new(e.k, e.j, Branch::Minus))?;
    let w1 = f.scale(1.0 / f.norm_h1());
    let opts = ShootOptions {
        bracket: e.bracket,
        tol: e.tol,
        max_trials: e.max_trials,
        check_every: e.check_every,
        ..ShootOptions::default()
    };
    let integ = cfg.integrator();
    let eps_tube = cfg.physics.eps_tube;
    let res = shoot_graph(&w1.scale(e.eps), &proj, eps_tube, t_target, &opts, &integ)?;
    let holder = if e.eps_list.is_empty() {
        None
    } else {
        Some(holder_probe(&w1, &proj, &e.eps_list, e.eps_reference, eps_tube, t_target, &opts, &integ)?)
    };
    Ok(json!({
        "lambda_1": lambda1,
        "t_target": t_target,
        "shoot": res,
        "holder": holder,
    }))
}

fn quartic(cfg: &RunConfig, grid: &Arc<CylGrid>) -> Result<serde_json::Value> {
    let e = &cfg.experiment;
    let fit = lyapunov_quartic_check(cfg.physics.c_star, grid, &e.amplitudes, &e.speeds, &FamilyOptions::default())?;
    serde_json::to_value(fit).map_err(|e| ZkError::Format(e.to_string()))
}

fn track(cfg: &RunConfig, grid: &Arc<CylGrid>, out: &Path, files: &mut Vec<PathBuf>) -> Result<serde_json::Value> {
    let cs = cfg.physics.c_star;
    let u0 = initial_datum(cfg, grid)?;
    let mut integ = cfg.integrator();
    integ.frame_speed = cs;
    if integ.snapshot_every == 0 {
        integ.snapshot_every = 1;
    }
    let mut traj = evolve(&u0, &integ)?;
    let opts = ModulationOptions {
        tube_radius: cfg.physics.eps_tube,
        ..ModulationOptions::default()
    };
    let family = tracking_family(cs, grid.period());
    modulation_track(&mut traj, cs, &opts, family.as_ref())?;
    let proj = Projector::at_speed(cs, grid)?;
    let npairs = proj.spectrum.pairs.len();
    let mut names: Vec<String> = proj
        .spectrum
        .pairs
        .iter()
        .flat_map(|p| [format!("lambda_{}_0", p.k), format!("lambda_{}_1", p.k)])
        .collect();
    if family.is_some() {
        names.extend(["a_0".to_string(), "a_1".to_string()]);
    }
    let mut diag = Diagnostics::new(names);
    let mut next = 0;
    for i in 0..traj.times.len() {
        let t = traj.times[i];
        let mut row = vec![Some(t), Some(traj.mass[i]), Some(traj.energy[i]), Some(traj.action[i])];
        let sample = traj.tracking.get(next).filter(|s| (s.t - t).abs() <= 1e-9 * t.abs().max(1.0));
        match sample {
            Some(s) => {
                next += 1;
                row.extend([Some(s.c), Some(s.rho), Some(s.v_norm)]);
                let (_, u) = &traj.snapshots[next - 1];
                let st = orthogonality_solve(u, cs, &ModulationOptions::default()).ok();
                let coefs: Vec<Option<f64>> = match &st {
                    Some(st) => proj.unstable_coefficients(&st.v).into_iter().flatten().map(Some).collect(),
                    None => vec![None; 2 * npairs],
                };
                row.extend(coefs);
                if family.is_some() {
                    row.extend([s.a.map(|a| a[0]), s.a.map(|a| a[1])]);
                }
            }
            None => row.resize(diag.width(), None),
        }
        diag.push(row)?;
    }
    let csv = out.join("diagnostics.csv");
    diag.write(&csv)?;
    files.push(csv);
    let growth = match cfg.experiment.initial {
        Initial::Mode if npairs > 0 => {
            let fit = growth_rate(&proj, cfg.direction(), cfg.experiment.eps, cfg.integrator.t_end, &cfg.integrator(), 10)?;
            Some(json!({
                "lambda_fit": fit.lambda_fit,
                "lambda_eig": fit.lambda_eig,
                "rel_dev": fit.rel_dev,
                "window": fit.window,
            }))
        }
        _ => None,
    };
    let sup_v = traj.tracking.iter().fold(0.0f64, |m, s| m.max(s.v_norm));
    let max_res = traj.tracking.iter().fold(0.0f64, |m, s| m.max(s.residual));
    Ok(json!({
        "samples": traj.tracking.len(),
        "exit_time": traj.exit_time,
        "sup_v_norm": sup_v,
        "max_residual": max_res,
        "final_c": traj.tracking.last().map(|s| s.c),
        "final_rho": traj.tracking.last().map(|s| s.rho),
        "growth": growth,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(exit_status(&ZkError::param("c_star", "bad")), 2);
        assert_eq!(exit_status(&ZkError::Guard("nan".into())), 3);
        assert_eq!(exit_status(&ZkError::Format("short".into())), 4);
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "x");
        assert_eq!(exit_status(&ZkError::Io(io)), 4);
    }

    #[test]
    fn noise_is_seeded() {
        let g = CylGrid::<f64>::new(32, 8, 10.0, 1.0).unwrap();
        let a = noise_field(&g, 5);
        assert_eq!(a.values(), noise_field(&g, 5).values());
        assert_ne!(a.values(), noise_field(&g, 6).values());
        assert!((a.norm_h1() - 1.0).abs() < 1e-12);
    }
}
