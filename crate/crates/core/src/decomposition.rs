//! Spectral projections about `Q_{c*}`, the `E_kappa` norm, the mobile
//! quasi-distance and the modulation solvers.

use std::sync::Arc;

use crate::error::{Result, ZkError};
use crate::grid::{CylGrid, Field};
use crate::spectrum::{UnstableSpectrum};
use crate::speeds;
use crate::waves::{
    kernel_modes, line_soliton, scale_to_speed, soliton_derivatives, solve_modulated_family, theta,
    FamilyOptions, ModulatedWave,
};

/// Plateau radius of the weight in the mobile distance.
pub const PLATEAU_C2: f64 = 10.0;

/// `C^infinity` step: 0 for `s <= 0`, 1 for `s >= 1`.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let g = |t: f64| (-1.0 / t).exp();
    g(s) / (g(s) + g(1.0 - s))
}

/// Cutoff equal to 1 on `|r| <= 1` and 0 on `|r| >= 2`.
pub fn cutoff(r: f64) -> f64 {
    1.0 - smooth_step(r.abs() - 1.0)
}

/// Nondecreasing weight equal to 1 below `C2` and to `r` above `2 C2`.
pub fn plateau(r: f64) -> f64 {
    1.0 + (r - 1.0) * smooth_step((r - PLATEAU_C2) / PLATEAU_C2)
}

/// Coefficients of a field in the spectral decomposition about `Q_{c*}`.
#[derive(Clone, Debug)]
pub struct Components {
    /// `Lambda_k^{+,j}`, one `[j = 0, j = 1]` pair per unstable mode.
    pub lambda_plus: Vec<[f64; 2]>,
    pub lambda_minus: Vec<[f64; 2]>,
    pub mu1: f64,
    pub mu2: f64,
    /// Kernel amplitudes, present only at critical speeds.
    pub a: Option<[f64; 2]>,
    pub gamma: Field,
    /// `<gamma, L gamma>`.
    pub gamma_form: f64,
    pub kappa: f64,
    pub c_star: f64,
}

impl Components {
    pub fn is_critical(&self) -> bool {
        self.a.is_some()
    }

    /// Squared `E_kappa` norm of the discrete part.
    pub fn discrete_sq(&self) -> f64 {
        let k2 = self.kappa * self.kappa;
        let lam: f64 = self
            .lambda_plus
            .iter()
            .chain(&self.lambda_minus)
            .map(|p| p[0] * p[0] + p[1] * p[1])
            .sum();
        let a = self.a.map_or(0.0, |a| a[0] * a[0] + a[1] * a[1]);
        lam + k2 * self.mu1 * self.mu1 + self.mu2 * self.mu2 + k2 * a
    }

    /// Squared distance between the discrete parts of two decompositions.
    pub fn discrete_diff_sq(&self, other: &Components) -> f64 {
        let k2 = self.kappa * self.kappa;
        let sq = |a: f64, b: f64| (a - b) * (a - b);
        let mut s = 0.0;
        for (p, q) in self
            .lambda_plus
            .iter()
            .zip(&other.lambda_plus)
            .chain(self.lambda_minus.iter().zip(&other.lambda_minus))
        {
            s += sq(p[0], q[0]) + sq(p[1], q[1]);
        }
        s += k2 * sq(self.mu1, other.mu1) + sq(self.mu2, other.mu2);
        if let (Some(a), Some(b)) = (self.a, other.a) {
            s += k2 * (sq(a[0], b[0]) + sq(a[1], b[1]));
        }
        s
    }

    /// `||u||_{E_kappa}`; rejects a quadratic form that is negative beyond rounding.
    pub fn e_kappa_norm(&self) -> Result<f64> {
        let scale = self.gamma.norm_h1_sq().max(1.0);
        if self.gamma_form < -1e-10 * scale {
            return Err(ZkError::Guard(format!(
                "<gamma, L gamma> = {:.3e} is negative; the projection is broken",
                self.gamma_form
            )));
        }
        Ok((self.discrete_sq() + self.gamma_form.max(0.0)).sqrt())
    }
}

/// Precomputed modes for projecting onto the spectral decomposition at `c*`.
#[derive(Clone, Debug)]
pub struct Projector {
    pub c_star: f64,
    pub spectrum: UnstableSpectrum,
    pub q: Field,
    pub dxq: Field,
    pub dcq: Field,
    dxq_sq: f64,
    dcq_q: f64,
    f_plus: Vec<[Field; 2]>,
    f_minus: Vec<[Field; 2]>,
    l_f_plus: Vec<[Field; 2]>,
    l_f_minus: Vec<[Field; 2]>,
    kernel: Option<[Field; 2]>,
    kernel_sq: [f64; 2],
}

impl Projector {
    pub fn new(spectrum: UnstableSpectrum) -> Result<Self> {
        let grid = spectrum.grid.clone();
        let c = spectrum.c_star;
        let q = line_soliton(c, &grid)?;
        let (dxq, dcq) = soliton_derivatives(c, &grid)?;
        let both = |f: &dyn Fn(usize) -> Field| -> [Field; 2] { [f(0), f(1)] };
        let mut f_plus = Vec::new();
        let mut f_minus = Vec::new();
        let mut l_f_plus = Vec::new();
        let mut l_f_minus = Vec::new();
        for p in &spectrum.pairs {
            f_plus.push(both(&|j| p.f_plus(&grid, j)));
            f_minus.push(both(&|j| p.f_minus(&grid, j)));
            l_f_plus.push(both(&|j| p.l_f_plus(&grid, c, j)));
            l_f_minus.push(both(&|j| p.l_f_minus(&grid, c, j)));
        }
        let (kernel, kernel_sq) = match speeds::critical_index(c, grid.period()) {
            Some(n) => {
                let (k0, k1) = kernel_modes(c, n, &grid);
                let sq = [k0.norm_l2_sq(), k1.norm_l2_sq()];
                (Some([k0, k1]), sq)
            }
            None => (None, [1.0, 1.0]),
        };
        Ok(Self {
            c_star: c,
            dxq_sq: dxq.norm_l2_sq(),
            dcq_q: dcq.dot(&q),
            q,
            dxq,
            dcq,
            f_plus,
            f_minus,
            l_f_plus,
            l_f_minus,
            kernel,
            kernel_sq,
            spectrum,
        })
    }

    pub fn at_speed(c_star: f64, grid: &Arc<CylGrid>) -> Result<Self> {
        Self::new(crate::spectrum::unstable_spectrum(c_star, grid)?)
    }

    pub fn grid(&self) -> &Arc<CylGrid> {
        self.q.grid()
    }

    pub fn is_critical(&self) -> bool {
        self.kernel.is_some()
    }

    pub fn f_plus(&self, pair: usize, j: usize) -> &Field {
        &self.f_plus[pair][j]
    }

    pub fn f_minus(&self, pair: usize, j: usize) -> &Field {
        &self.f_minus[pair][j]
    }

    pub fn kernel(&self) -> Option<&[Field; 2]> {
        self.kernel.as_ref()
    }

    /// `<g, L_{c*} g>` by quadrature of `|grad g|^2 + c* g^2 - 2 Q g^2`.
    pub fn quadratic_form(&self, g: &Field) -> f64 {
        let weighted: f64 = g
            .values()
            .iter()
            .zip(self.q.values())
            .map(|(v, qv)| (self.c_star - 2.0 * qv) * v * v)
            .sum::<f64>()
            * self.grid().cell_area();
        g.gradient_sq() + weighted
    }

    /// Smallest `<g, L g> / ||g||_{H^1}^2` over the gamma parts of `samples`,
    /// a fitted lower bound for the coercivity constant on the gamma sector.
    pub fn coercivity_constant(&self, samples: &[Field], kappa: f64) -> Result<f64> {
        let mut best = f64::INFINITY;
        for s in samples {
            let g = self.project(s, kappa)?.gamma;
            let n = g.norm_h1_sq();
            if n > 0.0 {
                best = best.min(self.quadratic_form(&g) / n);
            }
        }
        Ok(best)
    }

    /// `Lambda_k^{+,j}` for every unstable direction, without forming gamma.
    pub fn unstable_coefficients(&self, u: &Field) -> Vec<[f64; 2]> {
        self.l_f_minus.iter().map(|m| [u.dot(&m[0]), u.dot(&m[1])]).collect()
    }

    pub fn project(&self, u: &Field, kappa: f64) -> Result<Components> {
        if !u.grid().same_shape(self.grid()) {
            return Err(ZkError::ShapeMismatch("field and spectrum grids differ".into()));
        }
        let lambda_plus = self.unstable_coefficients(u);
        let lambda_minus: Vec<[f64; 2]> = self.l_f_plus.iter().map(|m| [u.dot(&m[0]), u.dot(&m[1])]).collect();
        let mu1 = u.dot(&self.dxq) / self.dxq_sq;
        let mu2 = u.dot(&self.q) / self.dcq_q;
        let a = self
            .kernel
            .as_ref()
            .map(|k| [u.dot(&k[0]) / self.kernel_sq[0], u.dot(&k[1]) / self.kernel_sq[1]]);

        let mut gamma = u.clone();
        for (p, (lp, lm)) in lambda_plus.iter().zip(&lambda_minus).enumerate() {
            for j in 0..2 {
                gamma.axpy(-lp[j], &self.f_plus[p][j]);
                gamma.axpy(-lm[j], &self.f_minus[p][j]);
            }
        }
        gamma.axpy(-mu1, &self.dxq);
        gamma.axpy(-mu2, &self.dcq);
        if let (Some(k), Some(a)) = (&self.kernel, a) {
            gamma.axpy(-a[0], &k[0]);
            gamma.axpy(-a[1], &k[1]);
        }
        let gamma_form = self.quadratic_form(&gamma);
        Ok(Components {
            lambda_plus,
            lambda_minus,
            mu1,
            mu2,
            a,
            gamma,
            gamma_form,
            kappa,
            c_star: self.c_star,
        })
    }

    pub fn reconstruct(&self, comp: &Components) -> Field {
        let mut u = comp.gamma.clone();
        for (p, (lp, lm)) in comp.lambda_plus.iter().zip(&comp.lambda_minus).enumerate() {
            for j in 0..2 {
                u.axpy(lp[j], &self.f_plus[p][j]);
                u.axpy(lm[j], &self.f_minus[p][j]);
            }
        }
        u.axpy(comp.mu1, &self.dxq);
        u.axpy(comp.mu2, &self.dcq);
        if let (Some(k), Some(a)) = (&self.kernel, comp.a) {
            u.axpy(a[0], &k[0]);
            u.axpy(a[1], &k[1]);
        }
        u
    }

    /// `||u||_{E_kappa}` of an arbitrary field. The quadratic form of its
    /// gamma part is clamped at zero instead of rejected.
    pub fn e_kappa(&self, u: &Field, kappa: f64) -> Result<f64> {
        let c = self.project(u, kappa)?;
        Ok((c.discrete_sq() + c.gamma_form.max(0.0)).sqrt())
    }

    /// The mobile quasi-distance between `(v0, c0)` and `(v1, c1)`.
    pub fn mobile_distance(
        &self,
        v0: (&Field, f64),
        v1: (&Field, f64),
        delta: f64,
        kappa: f64,
    ) -> Result<MobileDistance> {
        if !(delta > 0.0) || !(kappa > 0.0) {
            return Err(ZkError::param("delta/kappa", "must be positive"));
        }
        if !(v0.1 > 0.0) || !(v1.1 > 0.0) {
            return Err(ZkError::param("c", "speeds must be positive"));
        }
        let p0 = self.project(v0.0, kappa)?;
        let p1 = self.project(v1.0, kappa)?;
        let discrete = p0.discrete_diff_sq(&p1);
        let log_c = (v0.1.ln() - v1.1.ln()).powi(2);

        let weight = |p: &Components| {
            let g = (p.gamma_form.max(0.0)).sqrt();
            plateau(g / delta)
        };
        let orient = [(&p0.gamma, &p1.gamma, weight(&p1)), (&p1.gamma, &p0.gamma, weight(&p0))];
        let mut best = (f64::INFINITY, 0.0, 0usize);
        for (j, (gj, gother, phi)) in orient.iter().enumerate() {
            let objective = |q: f64| -> f64 {
                let diff = *gj - &gother.shift_x(q);
                let e = self.e_kappa(&diff, kappa).unwrap_or(f64::INFINITY);
                e * e + delta * q * q * phi * phi
            };
            let (q, val) = minimize_shift(self.grid(), objective);
            if val < best.0 {
                best = (val, q, j);
            }
        }
        let value = (discrete + best.0 + log_c).max(0.0).sqrt();
        Ok(MobileDistance {
            value,
            shift: best.1,
            orientation: best.2,
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MobileDistance {
    pub value: f64,
    /// Optimal translation `q`.
    pub shift: f64,
    /// Which of the two gamma parts is translated (0: the second one).
    pub orientation: usize,
}

/// Global minimum over `|q| <= X/2`: coarse scan at the grid spacing, then
/// golden-section refinement to 1e-8.
fn minimize_shift(grid: &CylGrid, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let h = grid.dx();
    let half = grid.half_width() / 2.0;
    let steps = (half / h).floor() as i64;
    let mut best = (0.0, f(0.0));
    for s in -steps..=steps {
        if s == 0 {
            continue;
        }
        let q = s as f64 * h;
        let v = f(q);
        if v < best.1 {
            best = (q, v);
        }
    }
    let lo = (best.0 - h).max(-half);
    let hi = (best.0 + h).min(half);
    let (q, v) = golden_section(&f, lo, hi, 1e-8);
    if v < best.1 {
        (q, v)
    } else {
        best
    }
}

pub(crate) fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let m = 0.5 * (a + b);
    (m, f(m))
}

/// `inf_q ||u - tau_q Q_c||_{H^1}` and the minimizing shift. Uses the x
/// spectrum of the transverse mean, so each candidate shift costs O(nx).
pub fn orbit_distance(u: &Field, c: f64) -> Result<(f64, f64)> {
    let grid = u.grid().clone();
    let q = line_soliton(c, &grid)?;
    let nx = grid.nx();
    let mean = u.y_mean();
    let to_line = |v: &[f64]| {
        let mut buf: Vec<num_complex::Complex<f64>> =
            v.iter().map(|&x| num_complex::Complex::new(x, 0.0)).collect();
        grid.fft_x_line(&mut buf, false);
        buf
    };
    let fu = to_line(&mean);
    let qline: Vec<f64> = q.values().iter().step_by(grid.ny()).copied().collect();
    let fq = to_line(&qline);
    let nyq = nx / 2;
    let prod: Vec<num_complex::Complex<f64>> = (0..nx)
        .map(|m| fu[m].conj() * fq[m] * (1.0 + grid.xi()[m] * grid.xi()[m]))
        .collect();
    let y_len = 2.0 * std::f64::consts::PI * grid.period();
    let scale = grid.dx() * y_len / nx as f64;
    // <u, tau_s Q>_{H^1}
    let cross = |s: f64| -> f64 {
        let mut acc = 0.0;
        for m in 0..nx {
            let ph = grid.xi()[m] * s;
            acc += if m == nyq {
                prod[m].re * ph.cos()
            } else {
                (prod[m] * num_complex::Complex::new(ph.cos(), -ph.sin())).re
            };
        }
        acc * scale
    };
    let base = u.norm_h1_sq() + q.norm_h1_sq();
    let dist_sq = |s: f64| base - 2.0 * cross(s);
    let h = grid.dx();
    let mut best = (0.0, dist_sq(0.0));
    for i in 0..nx {
        let s = grid.x()[i];
        let v = dist_sq(s);
        if v < best.1 {
            best = (s, v);
        }
    }
    let (s, v) = golden_section(&dist_sq, best.0 - h, best.0 + h, 1e-10);
    let (s, v) = if v < best.1 { (s, v) } else { best };
    Ok((v.max(0.0).sqrt(), grid.wrap_x(s)))
}

/// A decomposition `u = tau_rho(v + Q_c)` (or `tau_rho(v + Theta(a, c))`).
#[derive(Clone, Debug)]
pub struct ModulationState {
    pub v: Field,
    pub c: f64,
    pub rho: f64,
    pub a: Option<[f64; 2]>,
    /// Orthogonality residuals, normalized by the norms of the test functions.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// `inf_q ||u - tau_q Q_{c*}||_{H^1}` of the input.
    pub orbit_distance: f64,
    /// `(||v||_{H^1} + |c - c*| [+ |a|]) / orbit_distance`.
    pub bound_ratio: f64,
}

impl ModulationState {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ModulationOptions {
    /// Tube radius in H^1 around the soliton orbit.
    pub tube_radius: f64,
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for ModulationOptions {
    fn default() -> Self {
        Self {
            tube_radius: 1.0,
            tol: 1e-12,
            max_iterations: 50,
        }
    }
}

fn solve_small(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Result<Vec<f64>> {
    let n = rhs.len();
    let mat = nalgebra::DMatrix::from_fn(n, n, |i, j| m[i][j]);
    let b = nalgebra::DVector::from_column_slice(&rhs);
    let x = mat
        .lu()
        .solve(&b)
        .ok_or_else(|| ZkError::Singular("modulation Jacobian".into()))?;
    m.clear();
    rhs.clear();
    Ok(x.as_slice().to_vec())
}

/// Finds `(c, rho)` with `(v, Q_{c*}') = (v, Q_{c*}) = 0` for
/// `v = tau_{-rho} u - Q_c`.
pub fn orthogonality_solve(u: &Field, c_star: f64, opts: &ModulationOptions) -> Result<ModulationState> {
    let grid = u.grid().clone();
    let (dist, q0) = orbit_distance(u, c_star)?;
    if !(dist < opts.tube_radius) {
        return Err(ZkError::OutsideTube {
            distance: dist,
            radius: opts.tube_radius,
        });
    }
    let qs = line_soliton(c_star, &grid)?;
    let (dxqs, _) = soliton_derivatives(c_star, &grid)?;
    let norms = [dxqs.norm_l2(), qs.norm_l2()];
    let (mut c, mut rho) = (c_star, q0);
    let eval = |c: f64, rho: f64| -> Result<(Field, Field, [f64; 2])> {
        let w = u.shift_x(-rho);
        let v = &w - &line_soliton(c, &grid)?;
        let g = [v.dot(&dxqs), v.dot(&qs)];
        Ok((w, v, g))
    };
    let (mut w, mut v, mut g) = eval(c, rho)?;
    let scale = u.norm_l2().max(1.0) * norms[0].max(norms[1]);
    let mut iterations = 0;
    while g[0].abs().max(g[1].abs()) > opts.tol * scale {
        if iterations >= opts.max_iterations {
            return Err(ZkError::NewtonFailure(format!(
                "orthogonality solve: residual {:.3e} after {iterations} iterations",
                g[0].abs().max(g[1].abs())
            )));
        }
        let (_, dcq) = soliton_derivatives(c, &grid)?;
        let wx = w.dx1();
        let jac = vec![
            vec![-dcq.dot(&dxqs), wx.dot(&dxqs)],
            vec![-dcq.dot(&qs), wx.dot(&qs)],
        ];
        let step = solve_small(jac, vec![-g[0], -g[1]])?;
        let mut t = 1.0;
        while c + t * step[0] <= 0.0 {
            t *= 0.5;
        }
        c += t * step[0];
        rho += t * step[1];
        (w, v, g) = eval(c, rho)?;
        iterations += 1;
        if !c.is_finite() || !rho.is_finite() {
            return Err(ZkError::NewtonFailure("orthogonality solve diverged".into()));
        }
    }
    let size = v.norm_h1() + (c - c_star).abs();
    Ok(ModulationState {
        residuals: vec![g[0] / norms[0], g[1] / norms[1]],
        bound_ratio: if dist > 0.0 { size / dist } else { 0.0 },
        v,
        c,
        rho: grid.wrap_x(rho),
        a: None,
        iterations,
        orbit_distance: dist,
    })
}

/// The modulated profile and its parameter derivatives at `(a, c)`.
struct ThetaFrame {
    theta: Field,
    dx: Field,
    dc: Field,
    da: [Field; 2],
}

fn theta_frame(wave: &ModulatedWave, c: f64) -> Result<ThetaFrame> {
    let th = theta(wave, c)?;
    let h = 1e-6 * c;
    let dc = (&scale_to_speed(&wave.profile, c + h, wave.c_star) - &scale_to_speed(&wave.profile, c - h, wave.c_star))
        .scale(0.5 / h);
    let da = [
        scale_to_speed(&wave.tangents[0], c, wave.c_star),
        scale_to_speed(&wave.tangents[1], c, wave.c_star),
    ];
    Ok(ThetaFrame {
        dx: th.dx1(),
        theta: th,
        dc,
        da,
    })
}

/// Critical-speed modulation: `(c, rho, a)` with `v = tau_{-rho} u - Theta(a, c)`
/// orthogonal to `Theta`, `d_x Theta` and `d_{a_k} Theta`.
pub fn critical_orthogonality_solve(
    u: &Field,
    c_star: f64,
    family: &FamilyOptions,
    opts: &ModulationOptions,
) -> Result<ModulationState> {
    let grid = u.grid().clone();
    let n0 = speeds::critical_index(c_star, grid.period()).ok_or(ZkError::NotCritical { c: c_star })?;
    let (dist, q0) = orbit_distance(u, c_star)?;
    if !(dist < opts.tube_radius) {
        return Err(ZkError::OutsideTube {
            distance: dist,
            radius: opts.tube_radius,
        });
    }
    // initial amplitudes from the kernel projection of the recentred state
    let (k0, k1) = kernel_modes(c_star, n0, &grid);
    let w0 = u.shift_x(-q0);
    let mut a = [w0.dot(&k0) / k0.norm_l2_sq(), w0.dot(&k1) / k1.norm_l2_sq()];
    let mut c = c_star;
    let mut rho = q0;
    let mut wave: Option<ModulatedWave> = None;
    let mut iterations = 0;
    loop {
        let amp = a[0].hypot(a[1]);
        if amp > family.max_amplitude {
            return Err(ZkError::OutsideTube {
                distance: amp,
                radius: family.max_amplitude,
            });
        }
        let wv = solve_modulated_family(c_star, a, &grid, family, wave.as_ref())?;
        let fr = theta_frame(&wv, c)?;
        let w = u.shift_x(-rho);
        let v = &w - &fr.theta;
        let tests = [&fr.theta, &fr.dx, &fr.da[0], &fr.da[1]];
        let g: Vec<f64> = tests.iter().map(|t| v.dot(t)).collect();
        let norms: Vec<f64> = tests.iter().map(|t| t.norm_l2()).collect();
        let scaled = g
            .iter()
            .zip(&norms)
            .fold(0.0f64, |m, (gi, ni)| m.max(gi.abs() / ni));
        if scaled <= opts.tol * u.norm_l2().max(1.0) {
            let size = v.norm_h1() + (c - c_star).abs() + amp;
            return Ok(ModulationState {
                residuals: g.iter().zip(&norms).map(|(gi, ni)| gi / ni).collect(),
                bound_ratio: if dist > 0.0 { size / dist } else { 0.0 },
                v,
                c,
                rho: grid.wrap_x(rho),
                a: Some(a),
                iterations,
                orbit_distance: dist,
            });
        }
        if iterations >= opts.max_iterations {
            return Err(ZkError::NewtonFailure(format!(
                "critical modulation: residual {scaled:.3e} after {iterations} iterations"
            )));
        }
        // derivative of the first factor only; the neglected part is O(|v|)
        let wx = w.dx1();
        let cols = [fr.dc.scale(-1.0), wx, fr.da[0].scale(-1.0), fr.da[1].scale(-1.0)];
        let jac: Vec<Vec<f64>> = tests
            .iter()
            .map(|t| cols.iter().map(|col| col.dot(t)).collect())
            .collect();
        let step = solve_small(jac, g.iter().map(|x| -x).collect())?;
        let mut t = 1.0;
        while c + t * step[0] <= 0.0 {
            t *= 0.5;
        }
        c += t * step[0];
        rho += t * step[1];
        a[0] += t * step[2];
        a[1] += t * step[3];
        wave = Some(wv);
        iterations += 1;
    }
}
