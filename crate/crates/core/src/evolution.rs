//! Time integration of the full equation, of the localized modulation
//! system and of the linearized flow, with modulation tracking.

use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::decomposition::{
    critical_orthogonality_solve, cutoff, orthogonality_solve, ModulationOptions,
};
use crate::error::{Result, ZkError};
use crate::grid::{dealias_mask, CylGrid, Field};
use crate::spectrum::apply_hessian;
use crate::speeds;
use crate::waves::{functionals, soliton_dc, soliton_dx, soliton_profile, FamilyOptions};

type Spec = Vec<Complex<f64>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Integrating-factor Runge-Kutta 4.
    Ifrk4,
    /// Exponential time differencing Runge-Kutta 4.
    Etdrk4,
}

#[derive(Clone, Copy, Debug)]
pub struct Integrator {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    pub dealias: bool,
    /// Abort when `max |u|` exceeds this.
    pub blowup_bound: f64,
    /// Speed of the co-moving frame the state is stored in.
    pub frame_speed: f64,
    /// Keep every n-th step as a snapshot (0 keeps only the endpoints).
    pub snapshot_every: usize,
    /// Speed used in the action diagnostic `S_c`.
    pub action_speed: f64,
}

impl Integrator {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            scheme: Scheme::Ifrk4,
            dt,
            t_end,
            dealias: true,
            blowup_bound: 1e3,
            frame_speed: 0.0,
            snapshot_every: 0,
            action_speed: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(ZkError::param("dt", "must be positive"));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(ZkError::param("t_end", "must be nonnegative"));
        }
        if !(self.blowup_bound > 0.0) {
            return Err(ZkError::param("blowup_bound", "must be positive"));
        }
        Ok(())
    }

    /// Number of steps and the step actually used so the horizon is hit exactly.
    pub fn steps(&self) -> (usize, f64) {
        if self.t_end == 0.0 {
            return (0, self.dt);
        }
        let n = (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_end / n as f64)
    }
}

fn to_spec(f: &Field) -> Spec {
    let mut buf: Spec = f.values().iter().map(|&v| Complex::new(v, 0.0)).collect();
    f.grid().fft2(&mut buf, false);
    buf
}

fn from_spec(grid: &Arc<CylGrid>, s: &[Complex<f64>]) -> Field {
    let mut buf = s.to_vec();
    grid.fft2(&mut buf, true);
    // no finiteness check here: the guards of the callers report it
    let mut f = Field::zeros(grid);
    for (o, z) in f.values_mut().iter_mut().zip(buf) {
        *o = z.re;
    }
    f
}

/// Spectral tables shared by the integrators on one grid.
struct Tables {
    grid: Arc<CylGrid>,
    /// `i xi` with the Nyquist mode removed.
    ixi: Vec<Complex<f64>>,
    mask: Vec<bool>,
    dealias: bool,
}

impl Tables {
    fn new(grid: &Arc<CylGrid>, dealias: bool) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut ixi = Vec::with_capacity(nx * ny);
        for m in 0..nx {
            for _ in 0..ny {
                ixi.push(Complex::new(0.0, grid.xi_odd(m)));
            }
        }
        Self {
            grid: grid.clone(),
            ixi,
            mask: dealias_mask(grid),
            dealias,
        }
    }

    /// Symbol of `-d_x Delta + s d_x`.
    fn linear_symbol(&self, frame_speed: f64) -> Spec {
        let g = &self.grid;
        let ny = g.ny();
        let mut out = Vec::with_capacity(g.len());
        for m in 0..g.nx() {
            for n in 0..ny {
                let k2 = g.xi()[m] * g.xi()[m] + g.eta()[n] * g.eta()[n];
                out.push(Complex::new(0.0, g.xi_odd(m) * (k2 + frame_speed)));
            }
        }
        out
    }

    fn filter(&self, s: &mut Spec) {
        if self.dealias {
            for (z, &keep) in s.iter_mut().zip(&self.mask) {
                if !keep {
                    *z = Complex::default();
                }
            }
        }
    }

    /// `-d_x` of the product `f g` in spectral form.
    fn minus_dx_product(&self, f: &Field, g: &Field) -> Spec {
        let prod = f.mul_pointwise(g);
        let mut s = to_spec(&prod);
        self.filter(&mut s);
        for (z, d) in s.iter_mut().zip(&self.ixi) {
            *z = -(*z * d);
        }
        s
    }
}

fn exp_factor(lin: &[Complex<f64>], h: f64) -> Spec {
    lin.iter().map(|l| (l * h).exp()).collect()
}

fn hadamard(a: &[Complex<f64>], b: &[Complex<f64>]) -> Spec {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn axpy_spec(y: &[Complex<f64>], a: f64, x: &[Complex<f64>]) -> Spec {
    y.iter().zip(x).map(|(u, v)| u + v * a).collect()
}

/// Spectral state plus scalar unknowns integrated with the same stages.
#[derive(Clone, Debug)]
struct State {
    spec: Spec,
    scalars: Vec<f64>,
}

impl State {
    fn combine(&self, a: f64, other: &State) -> State {
        State {
            spec: axpy_spec(&self.spec, a, &other.spec),
            scalars: self.scalars.iter().zip(&other.scalars).map(|(x, y)| x + a * y).collect(),
        }
    }

    fn propagate(&self, e: &[Complex<f64>]) -> State {
        State {
            spec: hadamard(&self.spec, e),
            scalars: self.scalars.clone(),
        }
    }
}

/// One integrating-factor RK4 step for `s' = lin s + rhs(s)`.
fn ifrk4_step(
    y: &State,
    t: f64,
    dt: f64,
    e_half: &[Complex<f64>],
    mut rhs: impl FnMut(&State, f64) -> Result<State>,
) -> Result<State> {
    let k1 = rhs(y, t)?;
    let k2 = rhs(&y.combine(dt / 2.0, &k1).propagate(e_half), t + dt / 2.0)?;
    let k3 = rhs(&y.propagate(e_half).combine(dt / 2.0, &k2), t + dt / 2.0)?;
    let k4 = rhs(&y.propagate(e_half).propagate(e_half).combine(dt, &k3.propagate(e_half)), t + dt)?;
    let e1 = y.propagate(e_half).propagate(e_half);
    let mut out = e1.combine(dt / 6.0, &k1.propagate(e_half).propagate(e_half));
    out = out.combine(dt / 3.0, &k2.propagate(e_half));
    out = out.combine(dt / 3.0, &k3.propagate(e_half));
    out = out.combine(dt / 6.0, &k4);
    Ok(out)
}

/// Coefficients of the Cox-Matthews scheme by contour averaging.
struct EtdCoefficients {
    e: Spec,
    e2: Spec,
    q: Spec,
    f1: Spec,
    f2: Spec,
    f3: Spec,
}

impl EtdCoefficients {
    fn new(lin: &[Complex<f64>], h: f64) -> Self {
        const M: usize = 32;
        let roots: Vec<Complex<f64>> = (1..=M)
            .map(|j| {
                let th = std::f64::consts::PI * (j as f64 - 0.5) / M as f64;
                Complex::new(th.cos(), th.sin())
            })
            .collect();
        let mut out = Self {
            e: exp_factor(lin, h),
            e2: exp_factor(lin, h / 2.0),
            q: Vec::with_capacity(lin.len()),
            f1: Vec::with_capacity(lin.len()),
            f2: Vec::with_capacity(lin.len()),
            f3: Vec::with_capacity(lin.len()),
        };
        for l in lin {
            let lh = l * h;
            let (mut q, mut f1, mut f2, mut f3) = (Complex::default(), Complex::default(), Complex::default(), Complex::default());
            // average over the full circle using conjugate symmetry of the real parts
            for r in roots.iter().flat_map(|r| [*r, r.conj()]) {
                let z = lh + r;
                let ez = z.exp();
                let ez2 = (z / 2.0).exp();
                q += (ez2 - 1.0) / z;
                f1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / (z * z * z);
                f2 += (2.0 + z + ez * (z - 2.0)) / (z * z * z);
                f3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / (z * z * z);
            }
            let n = (2 * M) as f64;
            out.q.push(q * h / n);
            out.f1.push(f1 * h / n);
            out.f2.push(f2 * h / n);
            out.f3.push(f3 * h / n);
        }
        out
    }

    fn step(&self, v: &Spec, mut nl: impl FnMut(&Spec) -> Result<Spec>) -> Result<Spec> {
        let nv = nl(v)?;
        let a: Spec = (0..v.len()).map(|i| self.e2[i] * v[i] + self.q[i] * nv[i]).collect();
        let na = nl(&a)?;
        let b: Spec = (0..v.len()).map(|i| self.e2[i] * v[i] + self.q[i] * na[i]).collect();
        let nb = nl(&b)?;
        let c: Spec = (0..v.len()).map(|i| self.e2[i] * a[i] + self.q[i] * (2.0 * nb[i] - nv[i])).collect();
        let nc = nl(&c)?;
        Ok((0..v.len())
            .map(|i| {
                self.e[i] * v[i] + nv[i] * self.f1[i] + 2.0 * (na[i] + nb[i]) * self.f2[i] + nc[i] * self.f3[i]
            })
            .collect())
    }
}

/// A tracked modulation sample.
#[derive(Clone, Debug, Serialize)]
pub struct TrackSample {
    pub t: f64,
    pub c: f64,
    pub rho: f64,
    pub v_norm: f64,
    pub a: Option<[f64; 2]>,
    pub residual: f64,
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    /// Diagnostic times (every accepted step).
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub energy: Vec<f64>,
    pub action: Vec<f64>,
    /// Decimated states in the lab frame.
    pub snapshots: Vec<(f64, Field)>,
    pub tracking: Vec<TrackSample>,
    /// Time of the first tube exit met while tracking.
    pub exit_time: Option<f64>,
    /// Extra per-step series (e.g. modulation parameters of the localized system).
    pub series: Vec<(String, Vec<f64>)>,
}

impl Trajectory {
    pub fn final_state(&self) -> Option<&Field> {
        self.snapshots.last().map(|(_, f)| f)
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.series.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

fn guard(f: &Field, bound: f64, t: f64) -> Result<()> {
    if !f.is_finite() {
        return Err(ZkError::Guard(format!("non-finite state at t = {t}")));
    }
    let m = f.max_abs();
    if m > bound {
        return Err(ZkError::Guard(format!("max |u| = {m:.3e} exceeds {bound:.3e} at t = {t}")));
    }
    Ok(())
}

/// Stepper for `u_t + d_x(Delta u + u^2) = 0`, stored in a frame moving at
/// `frame_speed` (state `w(x, t) = u(x + s t, t)`).
pub struct Evolver {
    tables: Tables,
    integ: Integrator,
    dt: f64,
    e_half: Spec,
    etd: Option<EtdCoefficients>,
    spec: Spec,
    t: f64,
    nonlinear: bool,
}

impl Evolver {
    pub fn new(u0: &Field, integ: &Integrator) -> Result<Self> {
        integ.validate()?;
        if !u0.is_finite() {
            return Err(ZkError::param("u0", "non-finite initial data"));
        }
        let tables = Tables::new(u0.grid(), integ.dealias);
        let (_, dt) = integ.steps();
        let lin = tables.linear_symbol(integ.frame_speed);
        let mut spec = to_spec(u0);
        tables.filter(&mut spec);
        let etd = (integ.scheme == Scheme::Etdrk4).then(|| EtdCoefficients::new(&lin, dt));
        Ok(Self {
            e_half: exp_factor(&lin, dt / 2.0),
            tables,
            integ: *integ,
            dt,
            etd,
            spec,
            t: 0.0,
            nonlinear: true,
        })
    }

    /// Drops the quadratic term (pure linear propagation).
    pub fn linear_only(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Arc<CylGrid> {
        &self.tables.grid
    }

    /// State in the moving frame.
    pub fn frame_field(&self) -> Field {
        from_spec(&self.tables.grid, &self.spec)
    }

    /// Offset of the moving frame, `s t`.
    pub fn frame_offset(&self) -> f64 {
        self.integ.frame_speed * self.t
    }

    /// State in the lab frame.
    pub fn field(&self) -> Field {
        let f = self.frame_field();
        let off = self.frame_offset();
        if off == 0.0 {
            f
        } else {
            f.shift_x(off)
        }
    }

    fn nonlinear_term(&self, s: &Spec) -> Result<Spec> {
        if !self.nonlinear {
            return Ok(vec![Complex::default(); s.len()]);
        }
        let u = from_spec(&self.tables.grid, s);
        Ok(self.tables.minus_dx_product(&u, &u))
    }

    pub fn step(&mut self) -> Result<()> {
        let next = match &self.etd {
            Some(etd) => etd.step(&self.spec, |v| self.nonlinear_term(v))?,
            None => {
                let y = State {
                    spec: self.spec.clone(),
                    scalars: Vec::new(),
                };
                ifrk4_step(&y, self.t, self.dt, &self.e_half, |s, _| {
                    Ok(State {
                        spec: self.nonlinear_term(&s.spec)?,
                        scalars: Vec::new(),
                    })
                })?
                .spec
            }
        };
        self.spec = next;
        self.t += self.dt;
        if self.spec.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(ZkError::Guard(format!("non-finite spectrum at t = {}", self.t)));
        }
        Ok(())
    }

    pub fn check_guard(&self) -> Result<Field> {
        let f = self.frame_field();
        guard(&f, self.integ.blowup_bound, self.t)?;
        Ok(f)
    }
}

/// Integrates the full equation and records diagnostics at every step.
pub fn evolve(u0: &Field, integ: &Integrator) -> Result<Trajectory> {
    let mut ev = Evolver::new(u0, integ)?;
    let (n, _) = integ.steps();
    let mut traj = Trajectory::default();
    let record = |traj: &mut Trajectory, ev: &Evolver, f: &Field, snap: bool| {
        let fun = functionals(f, integ.action_speed);
        traj.times.push(ev.time());
        traj.mass.push(fun.mass);
        traj.energy.push(fun.energy);
        traj.action.push(fun.action);
        if snap {
            traj.snapshots.push((ev.time(), ev.field()));
        }
    };
    let f0 = ev.check_guard()?;
    record(&mut traj, &ev, &f0, true);
    for i in 1..=n {
        ev.step()?;
        let f = ev.check_guard()?;
        let snap = i == n || (integ.snapshot_every > 0 && i % integ.snapshot_every == 0);
        record(&mut traj, &ev, &f, snap);
    }
    Ok(traj)
}

/// Applies per-snapshot modulation and appends the tracked series. A tube
/// exit stops the series and records the exit time.
pub fn modulation_track(
    traj: &mut Trajectory,
    c_star: f64,
    opts: &ModulationOptions,
    family: Option<&FamilyOptions>,
) -> Result<()> {
    traj.tracking.clear();
    traj.exit_time = None;
    for (t, u) in &traj.snapshots {
        let st = match family {
            Some(fam) => critical_orthogonality_solve(u, c_star, fam, opts),
            None => orthogonality_solve(u, c_star, opts),
        };
        match st {
            Ok(s) => traj.tracking.push(TrackSample {
                t: *t,
                c: s.c,
                rho: s.rho,
                v_norm: s.v.norm_l2(),
                a: s.a,
                residual: s.max_residual(),
            }),
            Err(ZkError::OutsideTube { .. }) => {
                traj.exit_time = Some(*t);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

/// Sampled closed-form profiles translated by `s`, `f(x - s)`.
fn translated(grid: &Arc<CylGrid>, s: f64, f: impl Fn(f64) -> f64) -> Field {
    let xs: Vec<f64> = grid.x().iter().map(|&x| f(grid.wrap_x(x - s))).collect();
    Field::from_x_profile(grid, &xs)
}

/// Modulation rates `(rho' - c, c')` of the localized system, written for
/// the co-moving variable `w` with `v = tau_{-rho*} w`.
#[derive(Clone, Copy, Debug)]
pub struct ModulationRates {
    pub rho_dot_minus_c: f64,
    pub c_dot: f64,
    pub chi: f64,
}

/// Parameters of the localized system.
#[derive(Clone, Copy, Debug)]
pub struct LocalizedParams {
    pub c_star: f64,
    pub delta: f64,
    /// Smallest admissible magnitude of the diagonal modulation matrix.
    pub min_pivot: f64,
}

struct LocalizedRhs<'a> {
    tables: &'a Tables,
    p: LocalizedParams,
}

impl LocalizedRhs<'_> {
    /// Time derivative of `(w, c, rho, rho*)` minus the linear `-d_x Delta w` part.
    fn eval(&self, s: &State) -> Result<(State, ModulationRates)> {
        let grid = &self.tables.grid;
        let cs = self.p.c_star;
        let w = from_spec(grid, &s.spec);
        let (c, rho_star) = (s.scalars[0], s.scalars[2]);
        if !(c > 0.0) {
            return Err(ZkError::Guard(format!("speed left (0, inf): c = {c}")));
        }
        let chi = cutoff((w.norm_h1_sq() + (c - cs).powi(2)) / (self.p.delta * self.p.delta));
        let qs = translated(grid, rho_star, |x| soliton_profile(cs, x));
        let dxqs = translated(grid, rho_star, |x| soliton_dx(cs, x));
        let dcqs = translated(grid, rho_star, |x| soliton_dc(cs, x));
        let qc = translated(grid, rho_star, |x| soliton_profile(c, x));
        let dxqc = translated(grid, rho_star, |x| soliton_dx(c, x));
        let dcqc = translated(grid, rho_star, |x| soliton_dc(c, x));
        let diff = &qs - &qc; // Q* - Q_c (translated)

        // (v, L* d_x^2 Q*) = (w, tau L* d_x^2 Q*)
        let l_d2 = apply_hessian(&dxqs.dx1(), &qs, cs);
        let wx = w.dx1();
        let m11 = dxqs.norm_l2_sq() + chi * (wx.dot(&dxqs) + (&dxqc - &dxqs).dot(&dxqs));
        let m22 = -(dcqs.dot(&qs) + chi * (&dcqc - &dcqs).dot(&qs));
        if m11.abs() < self.p.min_pivot || m22.abs() < self.p.min_pivot {
            return Err(ZkError::Singular(format!(
                "modulation matrix diag({m11:.3e}, {m22:.3e})"
            )));
        }
        let w2 = w.mul_pointwise(&w);
        let dw = diff.mul_pointwise(&w);
        // d_x((c - c*) w - w^2 + 2 (Q* - Q_c) w)
        let mut inner1 = w.scale(c - cs);
        inner1.axpy(-1.0, &w2);
        inner1.axpy(2.0, &dw);
        let rhs1 = w.dot(&l_d2) - chi * inner1.dx1().dot(&dxqs);
        // d_x(w^2 - 2 (Q* - Q_c) w)
        let mut inner2 = w2.clone();
        inner2.axpy(-2.0, &dw);
        let rhs2 = chi * inner2.dx1().dot(&qs);
        let rdc = rhs1 / m11;
        let cdot = rhs2 / m22;

        // w_t = -d_x Delta w - 2 d_x(Q* w) + (rho'-c) Q*' - c' dQ*/dc + chi N~
        let t = self.tables;
        let mut out = t.minus_dx_product(&qs, &w);
        for z in out.iter_mut() {
            *z *= 2.0;
        }
        let mut forcing = dxqs.scale(rdc);
        forcing.axpy(-cdot, &dcqs);
        if chi > 0.0 {
            // N~ = d_x[-w^2 + 2 w (Q* - Q_c) + (rho'-c)(Q_c - Q*)] - c' d_c(Q_c - Q*)
            let mut bracket = w2.scale(-1.0);
            bracket.axpy(2.0, &dw);
            bracket.axpy(-rdc, &diff);
            let mut n = bracket.dx1();
            n.axpy(-cdot, &(&dcqc - &dcqs));
            forcing.axpy(chi, &n);
        }
        let mut fs = to_spec(&forcing);
        t.filter(&mut fs);
        for (o, f) in out.iter_mut().zip(&fs) {
            *o += f;
        }
        let rho_dot = c + rdc;
        let rho_star_dot = cs + chi * (rho_dot - cs);
        Ok((
            State {
                spec: out,
                scalars: vec![cdot, rho_dot, rho_star_dot],
            },
            ModulationRates {
                rho_dot_minus_c: rdc,
                c_dot: cdot,
                chi,
            },
        ))
    }
}

/// Result of a localized-system integration.
#[derive(Clone, Debug)]
pub struct LocalizedTrajectory {
    pub times: Vec<f64>,
    pub c: Vec<f64>,
    pub rho: Vec<f64>,
    pub rho_star: Vec<f64>,
    pub chi: Vec<f64>,
    pub v_norm: Vec<f64>,
    /// Final `w`, `v = tau_{-rho*} w`.
    pub w: Field,
}

impl LocalizedTrajectory {
    pub fn final_v(&self) -> Field {
        self.w.shift_x(-*self.rho_star.last().unwrap_or(&0.0))
    }

    /// `tau_rho(v + Q_c)` at the final time.
    pub fn reconstruct(&self) -> Result<Field> {
        let c = *self.c.last().unwrap_or(&1.0);
        let rho = *self.rho.last().unwrap_or(&0.0);
        let q = crate::waves::line_soliton(c, self.w.grid())?;
        Ok((&self.final_v() + &q).shift_x(rho))
    }
}

/// Integrates the localized system for `(v, c, rho)` through the co-moving
/// variable `w`.
pub fn localized_evolve(
    v0: &Field,
    c0: f64,
    rho0: f64,
    params: &LocalizedParams,
    integ: &Integrator,
) -> Result<LocalizedTrajectory> {
    integ.validate()?;
    if !(params.delta > 0.0) {
        return Err(ZkError::param("delta", "must be positive"));
    }
    let grid = v0.grid().clone();
    let tables = Tables::new(&grid, integ.dealias);
    let (n, dt) = integ.steps();
    let e_half = exp_factor(&tables.linear_symbol(0.0), dt / 2.0);
    let rhs = LocalizedRhs { tables: &tables, p: *params };
    let mut spec = to_spec(v0);
    tables.filter(&mut spec);
    let mut y = State {
        spec,
        scalars: vec![c0, rho0, 0.0],
    };
    let mut out = LocalizedTrajectory {
        times: vec![0.0],
        c: vec![c0],
        rho: vec![rho0],
        rho_star: vec![0.0],
        chi: Vec::new(),
        v_norm: vec![v0.norm_l2()],
        w: v0.clone(),
    };
    let mut t = 0.0;
    for _ in 0..n {
        let (_, rates) = rhs.eval(&y)?;
        out.chi.push(rates.chi);
        y = ifrk4_step(&y, t, dt, &e_half, |s, _| Ok(rhs.eval(s)?.0))?;
        t += dt;
        let w = from_spec(&grid, &y.spec);
        guard(&w, integ.blowup_bound, t)?;
        out.times.push(t);
        out.c.push(y.scalars[0]);
        out.rho.push(y.scalars[1]);
        out.rho_star.push(y.scalars[2]);
        out.v_norm.push(w.norm_l2());
        out.w = w;
    }
    let (_, last) = rhs.eval(&y)?;
    out.chi.push(last.chi);
    Ok(out)
}

/// One background sample for the linearized flow.
#[derive(Clone, Debug)]
pub struct BackgroundSample {
    pub t: f64,
    pub v: Field,
    pub c: f64,
    pub rho_dot: f64,
}

/// Background `(v_0, c_0, rho_0')` sampled in time, linearly interpolated.
#[derive(Clone, Debug)]
pub struct Background {
    pub c_star: f64,
    pub samples: Vec<BackgroundSample>,
}

impl Background {
    /// `(v, c, rho') = (0, c*, c*)` for all times up to `horizon`.
    pub fn frozen(c_star: f64, grid: &Arc<CylGrid>, horizon: f64) -> Self {
        let s = |t| BackgroundSample {
            t,
            v: Field::zeros(grid),
            c: c_star,
            rho_dot: c_star,
        };
        Self {
            c_star,
            samples: vec![s(0.0), s(horizon)],
        }
    }

    pub fn horizon(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    fn at(&self, t: f64) -> Result<(Field, f64, f64)> {
        let h = self.horizon();
        if t > h * (1.0 + 1e-12) + 1e-12 || self.samples.is_empty() {
            return Err(ZkError::param("t", format!("{t} beyond the background horizon {h}")));
        }
        let i = self.samples.partition_point(|s| s.t <= t).clamp(1, self.samples.len().max(2) - 1);
        let (a, b) = (&self.samples[i - 1], &self.samples[i.min(self.samples.len() - 1)]);
        let span = b.t - a.t;
        let s = if span > 0.0 { ((t - a.t) / span).clamp(0.0, 1.0) } else { 0.0 };
        let mut v = a.v.scale(1.0 - s);
        v.axpy(s, &b.v);
        Ok((v, a.c + s * (b.c - a.c), a.rho_dot + s * (b.rho_dot - a.rho_dot)))
    }
}

/// Integrates the linearized flow
/// `eta_t = d_x L_{c*} eta - 2 d_x((Q_{c0} - Q_{c*}) eta) + (rho_0' - c*) d_x eta - 2 d_x(v_0 eta)`.
pub fn linearized_evolve(eta0: &Field, background: &Background, integ: &Integrator) -> Result<Trajectory> {
    integ.validate()?;
    if integ.t_end > background.horizon() * (1.0 + 1e-12) {
        return Err(ZkError::param(
            "t_end",
            format!("exceeds the background horizon {}", background.horizon()),
        ));
    }
    let grid = eta0.grid().clone();
    let cs = background.c_star;
    let tables = Tables::new(&grid, integ.dealias);
    let (n, dt) = integ.steps();
    // exact part: -d_x Delta + c* d_x
    let e_half = exp_factor(&tables.linear_symbol(cs), dt / 2.0);
    let rhs = |s: &State, t: f64| -> Result<State> {
        let eta = from_spec(&grid, &s.spec);
        let (v, c0, rho_dot) = background.at(t)?;
        let qc0 = crate::waves::line_soliton(c0, &grid)?;
        // coefficient multiplying eta inside -2 d_x(.): Q* + (Q_c0 - Q*) + v_0 = Q_c0 + v_0
        let coef = &qc0 + &v;
        let mut out = tables.minus_dx_product(&coef, &eta);
        for z in out.iter_mut() {
            *z *= 2.0;
        }
        if rho_dot != cs {
            let mut adv = to_spec(&eta.dx1().scale(rho_dot - cs));
            tables.filter(&mut adv);
            for (o, a) in out.iter_mut().zip(&adv) {
                *o += a;
            }
        }
        Ok(State {
            spec: out,
            scalars: Vec::new(),
        })
    };
    let mut spec = to_spec(eta0);
    tables.filter(&mut spec);
    let mut y = State {
        spec,
        scalars: Vec::new(),
    };
    let mut traj = Trajectory::default();
    let mut t = 0.0;
    let record = |traj: &mut Trajectory, f: &Field, t: f64, snap: bool| {
        traj.times.push(t);
        traj.mass.push(f.norm_l2_sq());
        if snap {
            traj.snapshots.push((t, f.clone()));
        }
    };
    record(&mut traj, eta0, 0.0, true);
    for i in 1..=n {
        y = ifrk4_step(&y, t, dt, &e_half, rhs)?;
        t += dt;
        let f = from_spec(&grid, &y.spec);
        guard(&f, integ.blowup_bound, t)?;
        let snap = i == n || (integ.snapshot_every > 0 && i % integ.snapshot_every == 0);
        record(&mut traj, &f, t, snap);
    }
    Ok(traj)
}

/// Default critical-speed family options when tracking at `c* in CS`.
pub fn tracking_family(c_star: f64, period: f64) -> Option<FamilyOptions> {
    speeds::critical_index(c_star, period).map(|_| FamilyOptions::default())
}
