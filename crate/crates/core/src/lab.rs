//! Desk-scale experiments around an unstable line soliton: growth rates,
//! tube exits, shooting for the unstable amplitudes, the Hölder probe and
//! the quartic expansion of the Lyapunov action.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::decomposition::{orbit_distance, orthogonality_solve, ModulationOptions, Projector};
use crate::error::{Result, ZkError};
use crate::evolution::{Evolver, Integrator};
use crate::grid::{CylGrid, Field};
use crate::waves::{
    beta, bifurcation_coefficients, fit_even_quadratic, functionals, line_soliton, theta, FamilyOptions, ModulatedWave,
};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    #[default]
    Plus,
    Minus,
}

/// An eigendirection `F_k^{+-,j}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Direction {
    pub k: usize,
    pub j: usize,
    pub branch: Branch,
}

impl Direction {
    pub fn new(k: usize, j: usize, branch: Branch) -> Self {
        Self { k, j, branch }
    }
}

fn pair_index(proj: &Projector, k: usize) -> Result<usize> {
    proj.spectrum
        .pairs
        .iter()
        .position(|p| p.k == k)
        .ok_or_else(|| ZkError::param("direction", format!("mode k = {k} is not unstable at c* = {}", proj.c_star)))
}

/// The field of a direction on the projector grid.
pub fn mode_field(proj: &Projector, dir: Direction) -> Result<Field> {
    if dir.j > 1 {
        return Err(ZkError::param("direction", "j must be 0 or 1"));
    }
    let p = pair_index(proj, dir.k)?;
    Ok(match dir.branch {
        Branch::Plus => proj.f_plus(p, dir.j).clone(),
        Branch::Minus => proj.f_minus(p, dir.j).clone(),
    })
}

/// Flattened unstable coordinates `Lambda_k^{+,j}` of the modulated remainder.
fn unstable_vector(proj: &Projector, v: &Field) -> Vec<f64> {
    proj.unstable_coefficients(v).into_iter().flatten().collect()
}

fn moving(integ: &Integrator, c_star: f64, t_end: f64) -> Integrator {
    let mut out = *integ;
    out.frame_speed = c_star;
    out.t_end = t_end;
    out.action_speed = c_star;
    out
}

/// Least-squares line `y = slope x + intercept` with the standard error of the slope.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(ZkError::Fit(format!("{n} points are not enough for a line")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(ZkError::Fit("abscissae coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let se = if n > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    Ok((slope, intercept, se))
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthFit {
    pub direction: Direction,
    pub eps: f64,
    pub lambda_fit: f64,
    /// Signed eigenvalue of the direction (`-lambda` on the minus branch).
    pub lambda_eig: f64,
    pub rel_dev: f64,
    pub times: Vec<f64>,
    pub coefficients: Vec<f64>,
    /// Samples used in the fit.
    pub window: usize,
}

/// Fits the exponential rate of the tracked coefficient of `direction` for
/// `u0 = Q_{c*} + eps F`.
pub fn growth_rate(
    proj: &Projector,
    dir: Direction,
    eps: f64,
    t_max: f64,
    integ: &Integrator,
    sample_every: usize,
) -> Result<GrowthFit> {
    if !(1e-6..=1e-2).contains(&eps) {
        return Err(ZkError::param("eps", "must lie in [1e-6, 1e-2]"));
    }
    if proj.spectrum.is_empty() {
        return Err(ZkError::param("c_star", "no unstable modes at this speed"));
    }
    let p = pair_index(proj, dir.k)?;
    let lambda = proj.spectrum.pairs[p].lambda;
    let f = mode_field(proj, dir)?;
    let mut u0 = proj.q.clone();
    u0.axpy(eps, &f);
    let run = moving(integ, proj.c_star, t_max);
    let mut ev = Evolver::new(&u0, &run)?;
    let (n, _) = run.steps();
    let every = sample_every.max(1);
    let opts = ModulationOptions::default();
    let coef = |u: &Field| -> Result<f64> {
        let st = orthogonality_solve(u, proj.c_star, &opts)?;
        Ok(match dir.branch {
            Branch::Plus => proj.unstable_coefficients(&st.v)[p][dir.j],
            Branch::Minus => proj.project(&st.v, 1.0)?.lambda_minus[p][dir.j],
        })
    };
    let mut times = vec![0.0];
    let mut coefficients = vec![coef(&ev.frame_field())?];
    for i in 1..=n {
        ev.step()?;
        if i % every != 0 && i != n {
            continue;
        }
        let u = ev.check_guard()?;
        let c = match coef(&u) {
            Ok(c) => c,
            Err(ZkError::OutsideTube { .. }) => break,
            Err(e) => return Err(e),
        };
        times.push(ev.time());
        coefficients.push(c);
        if dir.branch == Branch::Plus && c.abs() > 10.0 * eps {
            break;
        }
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (t, c) in times.iter().zip(&coefficients) {
        let keep = match dir.branch {
            Branch::Plus => c.abs() <= 10.0 * eps,
            Branch::Minus => true,
        };
        if keep && c.abs() > 0.0 {
            xs.push(*t);
            ys.push(c.abs().ln());
        }
    }
    if xs.len() < 3 {
        return Err(ZkError::Fit("the tube was left before a fittable window".into()));
    }
    let (slope, _, _) = linear_fit(&xs, &ys)?;
    let lambda_eig = match dir.branch {
        Branch::Plus => lambda,
        Branch::Minus => -lambda,
    };
    Ok(GrowthFit {
        direction: dir,
        eps,
        lambda_fit: slope,
        lambda_eig,
        rel_dev: (slope - lambda_eig).abs() / lambda.abs(),
        window: xs.len(),
        times,
        coefficients,
    })
}

/// Outcome of one run checked against the tube.
#[derive(Clone, Debug, Serialize)]
pub struct ExitReport {
    /// First time the orbit distance reached the tube radius.
    pub exit_time: Option<f64>,
    pub t_reached: f64,
    pub sup_distance: f64,
    /// Unstable coordinates at the exit (or at the end).
    pub unstable: Vec<f64>,
}

impl ExitReport {
    pub fn survived(&self) -> bool {
        self.exit_time.is_none()
    }
}

/// Integrates `u0` in the frame moving with `c*` and reports the first time
/// `inf_q ||u - tau_q Q_{c*}||_{H^1} >= eps_tube`.
pub fn exit_time(
    u0: &Field,
    proj: &Projector,
    eps_tube: f64,
    t_max: f64,
    integ: &Integrator,
    check_every: usize,
) -> Result<ExitReport> {
    if !(eps_tube > 0.0) {
        return Err(ZkError::param("eps_tube", "must be positive"));
    }
    let c_star = proj.c_star;
    let run = moving(integ, c_star, t_max);
    let mut ev = Evolver::new(u0, &run)?;
    let (n, _) = run.steps();
    let every = check_every.max(1);
    let (d0, _) = orbit_distance(u0, c_star)?;
    let mut sup = d0;
    let mut exit = (d0 >= eps_tube).then_some(0.0);
    let mut last = u0.clone();
    if exit.is_none() {
        for i in 1..=n {
            ev.step()?;
            if i % every != 0 && i != n {
                continue;
            }
            let u = ev.check_guard()?;
            let (d, _) = orbit_distance(&u, c_star)?;
            sup = sup.max(d);
            last = u;
            if d >= eps_tube {
                exit = Some(ev.time());
                break;
            }
        }
    }
    let opts = ModulationOptions {
        tube_radius: f64::INFINITY,
        ..ModulationOptions::default()
    };
    let unstable = match orthogonality_solve(&last, c_star, &opts) {
        Ok(st) => unstable_vector(proj, &st.v),
        Err(_) => vec![0.0; 2 * proj.spectrum.pairs.len()],
    };
    Ok(ExitReport {
        exit_time: exit,
        t_reached: if exit.is_some() { exit.unwrap_or(0.0) } else { ev.time() },
        sup_distance: sup,
        unstable,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct ShootOptions {
    /// Initial bracket `[-bracket, bracket]` for every unstable coordinate.
    pub bracket: f64,
    pub tol: f64,
    pub max_trials: usize,
    pub check_every: usize,
    /// Coordinates smaller than this fraction of the largest one carry no sign.
    pub sign_floor: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self {
            bracket: 1e-2,
            tol: 1e-6,
            max_trials: 80,
            check_every: 5,
            sign_floor: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Trial {
    pub b: Vec<f64>,
    pub exit_time: Option<f64>,
    pub signs: Vec<i8>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShootResult {
    /// The stable-sector datum actually used (unstable part removed).
    #[serde(skip)]
    pub w: Field,
    pub b_star: Vec<f64>,
    pub bracket_width: f64,
    pub t_stay: f64,
    /// Whether the last trial stayed in the tube up to the target time.
    pub survived: bool,
    pub exit_log: Vec<Trial>,
}

impl ShootResult {
    pub fn b_norm(&self) -> f64 {
        self.b_star.iter().map(|b| b * b).sum::<f64>().sqrt()
    }
}

/// `Q_{c*} + w + sum_i b_i F^{+}_i` in the flattened coordinate order.
pub fn shot_datum(proj: &Projector, w: &Field, b: &[f64]) -> Field {
    let mut u = &proj.q + w;
    for (i, bi) in b.iter().enumerate() {
        if *bi != 0.0 {
            u.axpy(*bi, proj.f_plus(i / 2, i % 2));
        }
    }
    u
}

fn signs_of(v: &[f64], floor: f64) -> Vec<i8> {
    let m = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    v.iter()
        .map(|x| {
            if m == 0.0 || x.abs() <= floor * m {
                0
            } else if *x > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect()
}

/// Removes the unstable coordinates of `w`.
pub fn stable_part(proj: &Projector, w: &Field) -> Field {
    let mut out = w.clone();
    for (p, c) in proj.unstable_coefficients(w).iter().enumerate() {
        for j in 0..2 {
            out.axpy(-c[j], proj.f_plus(p, j));
        }
    }
    out
}

/// Bisects the unstable amplitudes so that the trajectory of
/// `Q + w + b F^+` stays in the tube. All coordinates share one trial per
/// step: in the linear regime the sign of each coordinate at the exit is
/// the sign of its own offset from the graph value.
pub fn shoot_graph(
    w: &Field,
    proj: &Projector,
    eps_tube: f64,
    t_target: f64,
    opts: &ShootOptions,
    integ: &Integrator,
) -> Result<ShootResult> {
    let dim = 2 * proj.spectrum.pairs.len();
    if dim == 0 {
        return Err(ZkError::param("c_star", "no unstable directions to shoot"));
    }
    if !(opts.bracket > 0.0) || !(opts.tol > 0.0) {
        return Err(ZkError::param("bracket/tol", "must be positive"));
    }
    let w = stable_part(proj, w);
    if w.norm_h1() >= eps_tube {
        return Err(ZkError::param("w", "the datum does not start inside the tube"));
    }
    let mut log = Vec::new();
    let trial = |b: &[f64], log: &mut Vec<Trial>| -> Result<(ExitReport, Vec<i8>)> {
        let rep = exit_time(&shot_datum(proj, &w, b), proj, eps_tube, t_target, integ, opts.check_every)?;
        let signs = if rep.survived() {
            vec![0; dim]
        } else {
            signs_of(&rep.unstable, opts.sign_floor)
        };
        log.push(Trial {
            b: b.to_vec(),
            exit_time: rep.exit_time,
            signs: signs.clone(),
        });
        Ok((rep, signs))
    };
    // each coordinate must flip sign across its initial bracket
    for i in 0..dim {
        for side in [-1.0, 1.0] {
            let mut b = vec![0.0; dim];
            b[i] = side * opts.bracket;
            let (_, s) = trial(&b, &mut log)?;
            if s[i] as f64 != side {
                return Err(ZkError::Fit(format!(
                    "no sign change of unstable coordinate {i} across +-{}",
                    opts.bracket
                )));
            }
        }
    }
    let mut lo = vec![-opts.bracket; dim];
    let mut hi = vec![opts.bracket; dim];
    let width = |lo: &[f64], hi: &[f64]| lo.iter().zip(hi).fold(0.0f64, |m, (a, b)| m.max(b - a));
    let mut survived = false;
    let mut t_stay = 0.0;
    let mut used = 0;
    while width(&lo, &hi) > opts.tol && used < opts.max_trials {
        let mid: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let (rep, s) = trial(&mid, &mut log)?;
        used += 1;
        t_stay = rep.t_reached;
        if rep.survived() {
            survived = true;
            lo.clone_from(&mid);
            hi = mid;
            break;
        }
        for i in 0..dim {
            match s[i] {
                1 => hi[i] = mid[i],
                -1 => lo[i] = mid[i],
                _ => {
                    lo[i] = mid[i];
                    hi[i] = mid[i];
                }
            }
        }
    }
    let b_star: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(ShootResult {
        w,
        bracket_width: width(&lo, &hi),
        b_star,
        t_stay,
        survived,
        exit_log: log,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HolderPoint {
    pub eps: f64,
    pub b_star: Vec<f64>,
    /// `|b*|` after removing the linear part, when one was measured.
    pub b_norm: f64,
    pub bracket_width: f64,
    /// False when `|b*|` is not resolved by the bracket.
    pub used: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct HolderFit {
    pub exponent: f64,
    /// 95% confidence band of the exponent.
    pub band: (f64, f64),
    pub points: Vec<HolderPoint>,
    /// `b*(eps0) / eps0` at the reference amplitude, if one was given.
    pub linear_part: Option<Vec<f64>>,
    /// Whether the exponent falls in (3/2, 2); reported, never asserted.
    pub in_reference_window: bool,
    #[serde(skip)]
    pub shots: Vec<ShootResult>,
}

/// Slope of `log |b*|` against `log eps` for data `eps * w1`.
///
/// The time stepper shifts the discrete stable subspace by O(dt^4), which
/// gives the numerical graph a small linear part. With `reference = Some(eps0)`
/// that part is measured by one more shot at the tiny amplitude `eps0` and
/// `b*(eps) - (eps / eps0) b*(eps0)` is fitted instead.
#[allow(clippy::too_many_arguments)]
pub fn holder_probe(
    w1: &Field,
    proj: &Projector,
    eps_list: &[f64],
    reference: Option<f64>,
    eps_tube: f64,
    t_target: f64,
    opts: &ShootOptions,
    integ: &Integrator,
) -> Result<HolderFit> {
    let linear = match reference {
        Some(e0) if e0 > 0.0 => {
            let r = shoot_graph(&w1.scale(e0), proj, eps_tube, t_target, opts, integ)?;
            Some((r.b_star.iter().map(|b| b / e0).collect::<Vec<_>>(), r.bracket_width / e0))
        }
        Some(_) => return Err(ZkError::param("reference", "must be positive")),
        None => None,
    };
    let mut points = Vec::new();
    let mut shots = Vec::new();
    for &eps in eps_list {
        let res = shoot_graph(&w1.scale(eps), proj, eps_tube, t_target, opts, integ)?;
        let (b, floor) = match &linear {
            Some((slope, width)) => {
                let d: f64 = res.b_star.iter().zip(slope).map(|(b, s)| (b - eps * s).powi(2)).sum();
                (d.sqrt(), res.bracket_width + eps * width)
            }
            None => (res.b_norm(), res.bracket_width),
        };
        points.push(HolderPoint {
            eps,
            b_star: res.b_star.clone(),
            b_norm: b,
            bracket_width: res.bracket_width,
            used: b > floor.max(opts.tol),
        });
        shots.push(res);
    }
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.used)
        .map(|p| (p.eps.ln(), p.b_norm.ln()))
        .unzip();
    if x.len() < 3 {
        return Err(ZkError::Fit(format!("only {} resolved amplitudes, need 3", x.len())));
    }
    let (slope, _, se) = linear_fit(&x, &y)?;
    let t = StudentsT::new(0.0, 1.0, (x.len() - 2) as f64)
        .map_err(|e| ZkError::Fit(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(HolderFit {
        exponent: slope,
        band: (slope - t * se, slope + t * se),
        points,
        linear_part: linear.map(|l| l.0),
        in_reference_window: slope > 1.5 && slope < 2.0,
        shots,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GradientTermFit {
    pub c: f64,
    /// `(|a|, Delta S, ||d_y Theta||^2)`.
    pub samples: Vec<(f64, f64, f64)>,
    /// Fitted coefficient of `||d_y Theta||^2` after removing the quartic term.
    pub coef_fit: f64,
    /// `(c* - c) / c*`.
    pub coef_paper: f64,
    pub rel_dev: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuarticFit {
    pub c_star: f64,
    /// `(|a|, S_{c*}(Theta) - S_{c*}(Q_{c*}))` at `c = c*`.
    pub samples: Vec<(f64, f64)>,
    pub coef_fit: f64,
    /// `5 c* C_2 ||Q^{3/2} cos||^2 / (48 ||Q||^2)`.
    pub coef_paper: f64,
    pub rel_dev: f64,
    /// Relative residual of the `|a|^4 + |a|^6` model.
    pub fit_residual: f64,
    pub mass_coef: f64,
    pub gradient_terms: Vec<GradientTermFit>,
}

/// `S_c(Theta(a, beta(a, c))) - S_c(Q_c)` and `||d_y Theta(a, beta)||^2`.
pub fn lyapunov_gap(wave: &ModulatedWave, c: f64) -> Result<(f64, f64)> {
    let b = beta(wave, c)?;
    let th = theta(wave, b)?;
    let q = line_soliton(c, wave.grid())?;
    let ds = functionals(&th, c).action - functionals(&q, c).action;
    let dy = th.derivative(crate::grid::Axis::Y, 1)?.norm_l2_sq();
    Ok((ds, dy))
}

/// Compares the numerically evaluated Lyapunov gap along the modulated family
/// with the quartic expansion and, for `c != c*`, with the gradient term.
pub fn lyapunov_quartic_check(
    c_star: f64,
    grid: &Arc<CylGrid>,
    a_values: &[f64],
    c_values: &[f64],
    family: &FamilyOptions,
) -> Result<QuarticFit> {
    if a_values.iter().any(|a| !(*a > 0.0) || *a > 0.1) {
        return Err(ZkError::param("a_values", "amplitudes must lie in (0, 0.1]"));
    }
    let bif = bifurcation_coefficients(c_star, grid, a_values, family)?;
    let coef_paper =
        5.0 * c_star * bif.mass_coef * bif.kernel_norm_sq / (48.0 * bif.q_mass);
    let mut samples = Vec::new();
    for w in &bif.waves {
        let (ds, _) = lyapunov_gap(w, c_star)?;
        samples.push((w.amplitude(), ds));
    }
    // Delta S / a^2 = K a^2 + K6 a^4
    let amps: Vec<f64> = samples.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = samples.iter().map(|p| p.1 / (p.0 * p.0)).collect();
    let (k_fit, _, rel) = fit_even_quadratic(&amps, &ys);
    if rel > 0.1 {
        return Err(ZkError::Fit(format!("quartic model leaves relative residual {rel:.3e}")));
    }
    let mut gradient_terms = Vec::new();
    for &c in c_values.iter().filter(|c| (**c - c_star).abs() > 1e-12 * c_star) {
        let mut rows = Vec::new();
        let (mut num, mut den) = (0.0, 0.0);
        for w in &bif.waves {
            let (ds, dy) = lyapunov_gap(w, c)?;
            let a = w.amplitude();
            let rem = ds - (c / c_star).powf(2.5) * coef_paper * a.powi(4);
            num += rem * dy;
            den += dy * dy;
            rows.push((a, ds, dy));
        }
        let coef_fit = if den > 0.0 { num / den } else { 0.0 };
        let coef_paper = (c_star - c) / c_star;
        gradient_terms.push(GradientTermFit {
            c,
            samples: rows,
            coef_fit,
            coef_paper,
            rel_dev: (coef_fit - coef_paper).abs() / coef_paper.abs(),
        });
    }
    Ok(QuarticFit {
        c_star,
        samples,
        coef_fit: k_fit,
        coef_paper,
        rel_dev: (k_fit - coef_paper).abs() / coef_paper.abs(),
        fit_residual: rel,
        mass_coef: bif.mass_coef,
        gradient_terms,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepEntry {
    pub index: usize,
    pub b_star: Vec<f64>,
    pub sup_corrected: f64,
    pub corrected_exit: Option<f64>,
    pub sup_uncorrected: f64,
    pub uncorrected_exit: Option<f64>,
}

/// For each stable-sector perturbation `eps * p`, shoots for the unstable
/// amplitudes and compares the corrected and uncorrected runs over `[0, t]`.
pub fn stability_sweep(
    proj: &Projector,
    perturbations: &[Field],
    eps: f64,
    t: f64,
    eps_tube: f64,
    opts: &ShootOptions,
    integ: &Integrator,
) -> Result<Vec<SweepEntry>> {
    let mut out = Vec::new();
    for (index, p) in perturbations.iter().enumerate() {
        let w = stable_part(proj, &p.scale(eps));
        let b_star = if eps == 0.0 {
            vec![0.0; 2 * proj.spectrum.pairs.len()]
        } else {
            shoot_graph(&w, proj, eps_tube, t, opts, integ)?.b_star
        };
        let corrected = exit_time(&shot_datum(proj, &w, &b_star), proj, eps_tube, t, integ, opts.check_every)?;
        let uncorrected = exit_time(&(&proj.q + &w), proj, eps_tube, t, integ, opts.check_every)?;
        out.push(SweepEntry {
            index,
            b_star,
            sup_corrected: corrected.sup_distance,
            corrected_exit: corrected.exit_time,
            sup_uncorrected: uncorrected.sup_distance,
            uncorrected_exit: uncorrected.exit_time,
        });
    }
    Ok(out)
}
