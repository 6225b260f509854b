//! Line solitons, conserved functionals and the bifurcated family that
//! branches off the line soliton at a critical speed.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Result, ZkError};
use crate::grid::{CylGrid, Field};
use crate::scalar::Real;
use crate::spectrum::differentiation_matrix;
use crate::speeds;

/// Speed parameters of a soliton study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolitonParams {
    pub c: f64,
    pub c_star: f64,
    pub period: f64,
}

impl SolitonParams {
    pub fn new(c: f64, c_star: f64, period: f64) -> Result<Self> {
        check_speed("c", c)?;
        check_speed("c_star", c_star)?;
        if !(period > 0.0) {
            return Err(ZkError::param("L", "must be positive"));
        }
        Ok(Self { c, c_star, period })
    }
}

pub(crate) fn check_speed(name: &str, c: f64) -> Result<()> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(ZkError::param(name, format!("speed {c} must be positive")));
    }
    Ok(())
}

/// `Q_c(x) = (3c/2) sech^2(sqrt(c) x / 2)`.
pub fn soliton_profile<T: Real>(c: T, x: T) -> T {
    let s = (c.sqrt() * x / T::lit(2.0)).cosh().recip();
    T::lit(1.5) * c * s * s
}

/// `dQ_c/dx`.
pub fn soliton_dx<T: Real>(c: T, x: T) -> T {
    let u = c.sqrt() * x / T::lit(2.0);
    let s = u.cosh().recip();
    -T::lit(1.5) * c * c.sqrt() * s * s * u.tanh()
}

/// `dQ_c/dc`.
pub fn soliton_dc<T: Real>(c: T, x: T) -> T {
    let u = c.sqrt() * x / T::lit(2.0);
    let s = u.cosh().recip();
    T::lit(1.5) * s * s - T::lit(0.75) * c.sqrt() * x * s * s * u.tanh()
}

/// Closed-form mass `||Q_c||^2 = 12 pi L c^{3/2}` on the full cylinder.
pub fn soliton_mass(c: f64, period: f64) -> f64 {
    12.0 * std::f64::consts::PI * period * c.powf(1.5)
}

fn sample<T: Real>(grid: &CylGrid<T>, f: impl Fn(T) -> T) -> Vec<T> {
    grid.x().iter().map(|&x| f(x)).collect()
}

/// y-independent field sampling `Q_c`.
pub fn line_soliton<T: Real>(c: T, grid: &Arc<CylGrid<T>>) -> Result<Field<T>> {
    check_speed("c", c.as_f64())?;
    Ok(Field::from_x_profile(grid, &sample(grid, |x| soliton_profile(c, x))))
}

/// `(dQ/dx, dQ/dc)` from the analytic formulas.
pub fn soliton_derivatives<T: Real>(c: T, grid: &Arc<CylGrid<T>>) -> Result<(Field<T>, Field<T>)> {
    check_speed("c", c.as_f64())?;
    Ok((
        Field::from_x_profile(grid, &sample(grid, |x| soliton_dx(c, x))),
        Field::from_x_profile(grid, &sample(grid, |x| soliton_dc(c, x))),
    ))
}

/// The kernel directions `Q_c^{3/2} cos(n y / L)` and `Q_c^{3/2} sin(n y / L)`.
pub fn kernel_modes<T: Real>(c: T, n: usize, grid: &Arc<CylGrid<T>>) -> (Field<T>, Field<T>) {
    let fx = sample(grid, |x| soliton_profile(c, x).powf(T::lit(1.5)));
    let k = T::idx(n) / grid.period();
    let cos: Vec<T> = grid.y().iter().map(|&y| (k * y).cos()).collect();
    let sin: Vec<T> = grid.y().iter().map(|&y| (k * y).sin()).collect();
    (Field::separable(grid, &fx, &cos), Field::separable(grid, &fx, &sin))
}

/// Mass, energy and the action `S_c = E + (c/2) M`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Functionals<T = f64> {
    pub mass: T,
    pub energy: T,
    pub action: T,
}

pub fn functionals<T: Real>(u: &Field<T>, c: T) -> Functionals<T> {
    let mass = u.norm_l2_sq();
    let cubic: T = u.values().iter().map(|&v| v * v * v).sum::<T>() * u.grid().cell_area();
    let energy = T::lit(0.5) * u.gradient_sq() - cubic / T::lit(3.0);
    Functionals {
        mass,
        energy,
        action: energy + c / T::lit(2.0) * mass,
    }
}

/// `-Delta phi + c phi - phi^2`.
pub fn stationary_residual(phi: &Field, c: f64) -> Field {
    let lap = phi.laplacian();
    let mut r = phi.map(|v| c * v - v * v);
    r.axpy(-1.0, &lap);
    r
}

/// A member `phi_{c*}(a)` of the bifurcated family with its speed.
#[derive(Clone, Debug)]
pub struct ModulatedWave {
    pub c_star: f64,
    pub n0: usize,
    pub a: [f64; 2],
    pub profile: Field,
    pub speed: f64,
    /// L2 norm of the stationary residual at the returned profile.
    pub residual: f64,
    /// Multiplier of the rotation-breaking term; vanishes on genuine solutions.
    pub sigma: f64,
    /// `d phi / d a_k`.
    pub tangents: [Field; 2],
    /// `d c / d a_k`.
    pub speed_gradient: [f64; 2],
    pub newton_iterations: usize,
}

impl ModulatedWave {
    pub fn amplitude(&self) -> f64 {
        self.a[0].hypot(self.a[1])
    }

    pub fn grid(&self) -> &Arc<CylGrid> {
        self.profile.grid()
    }

    /// The trivial member `a = 0`: the line soliton itself.
    pub fn trivial(c_star: f64, grid: &Arc<CylGrid>) -> Result<Self> {
        let n0 = speeds::critical_index(c_star, grid.period())
            .ok_or(ZkError::NotCritical { c: c_star })?;
        let q = line_soliton(c_star, grid)?;
        let (k0, k1) = kernel_modes(c_star, n0, grid);
        let residual = stationary_residual(&q, c_star).norm_l2();
        Ok(Self {
            c_star,
            n0,
            a: [0.0, 0.0],
            profile: q,
            speed: c_star,
            residual,
            sigma: 0.0,
            tangents: [k0, k1],
            speed_gradient: [0.0, 0.0],
            newton_iterations: 0,
        })
    }
}

/// Options for the family solver.
#[derive(Clone, Copy, Debug)]
pub struct FamilyOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub max_amplitude: f64,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 30,
            max_amplitude: 0.2,
        }
    }
}

/// Even-in-x restriction of the grid: independent samples `i = 0..=nx/2`.
struct EvenSpace {
    nx: usize,
    ny: usize,
    half: usize,
    weights: Vec<f64>,
}

impl EvenSpace {
    fn new(grid: &CylGrid) -> Self {
        let half = grid.nx() / 2;
        let weights = (0..=half)
            .map(|i| if i == 0 || i == half { 1.0 } else { 2.0 } * grid.cell_area())
            .collect();
        Self {
            nx: grid.nx(),
            ny: grid.ny(),
            half,
            weights,
        }
    }

    fn dim(&self) -> usize {
        (self.half + 1) * self.ny
    }

    fn rep(&self, i: usize) -> usize {
        if i <= self.half {
            i
        } else {
            self.nx - i
        }
    }

    fn restrict(&self, f: &Field) -> Vec<f64> {
        f.values()[..self.dim()].to_vec()
    }

    fn expand(&self, grid: &Arc<CylGrid>, g: &[f64]) -> Field {
        let mut values = vec![0.0; self.nx * self.ny];
        for i in 0..self.nx {
            let r = self.rep(i);
            values[i * self.ny..(i + 1) * self.ny].copy_from_slice(&g[r * self.ny..(r + 1) * self.ny]);
        }
        Field::from_values(grid, values).expect("finite even field")
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..=self.half {
            let w = self.weights[i];
            for j in 0..self.ny {
                let k = i * self.ny + j;
                s += w * a[k] * b[k];
            }
        }
        s
    }
}

/// Newton solve of `-Delta phi + c phi - phi^2 = 0` pinned to the amplitudes
/// `<phi - Q, K_k> = a_k ||K_k||^2`, with unknowns `(phi, c)` and a
/// rotation multiplier. The profile is kept even in x.
pub fn solve_modulated_family(
    c_star: f64,
    a: [f64; 2],
    grid: &Arc<CylGrid>,
    opts: &FamilyOptions,
    initial: Option<&ModulatedWave>,
) -> Result<ModulatedWave> {
    let n0 = speeds::critical_index(c_star, grid.period()).ok_or(ZkError::NotCritical { c: c_star })?;
    let amp = a[0].hypot(a[1]);
    if !amp.is_finite() || amp > opts.max_amplitude {
        return Err(ZkError::param(
            "a",
            format!("|a| = {amp} exceeds the small-amplitude bound {}", opts.max_amplitude),
        ));
    }
    if amp == 0.0 {
        return ModulatedWave::trivial(c_star, grid);
    }

    let space = EvenSpace::new(grid);
    let ne = space.dim();
    let ny = grid.ny();
    let q = line_soliton(c_star, grid)?;
    let (k0f, k1f) = kernel_modes(c_star, n0, grid);
    let kernel = [space.restrict(&k0f), space.restrict(&k1f)];
    let kernel_sq = [space.dot(&kernel[0], &kernel[0]), space.dot(&kernel[1], &kernel[1])];
    let q_even = space.restrict(&q);

    // rotation generator d/dy of the leading-order correction, unit amplitude
    let lead = {
        let mut f = k0f.scale(a[0] / amp);
        f.axpy(a[1] / amp, &k1f);
        f
    };
    let rot = space.restrict(&lead.partial(0, 1));

    let d2x = differentiation_matrix(grid.xi(), 2);
    let d2y = differentiation_matrix(grid.eta(), 2);
    // fold x columns onto the even representatives
    let mut d2x_even = DMatrix::<f64>::zeros(space.half + 1, space.half + 1);
    for i in 0..=space.half {
        for jx in 0..grid.nx() {
            d2x_even[(i, space.rep(jx))] += d2x[(i, jx)];
        }
    }

    let (mut phi, mut speed, mut sigma) = match initial {
        Some(w) if w.c_star == c_star && w.grid().same_shape(grid) => {
            let mut p = space.restrict(&w.profile);
            // first-order predictor along the tangents
            for k in 0..2 {
                let t = space.restrict(&w.tangents[k]);
                for (pi, ti) in p.iter_mut().zip(&t) {
                    *pi += (a[k] - w.a[k]) * ti;
                }
            }
            let s = w.speed + (a[0] - w.a[0]) * w.speed_gradient[0] + (a[1] - w.a[1]) * w.speed_gradient[1];
            (p, s, 0.0)
        }
        _ => {
            let mut p = q_even.clone();
            for k in 0..2 {
                for (pi, ki) in p.iter_mut().zip(&kernel[k]) {
                    *pi += a[k] * ki;
                }
            }
            (p, c_star, 0.0)
        }
    };

    let residual_vec = |phi: &[f64], speed: f64, sigma: f64| -> (DVector<f64>, f64) {
        let full = space.expand(grid, phi);
        let r = stationary_residual(&full, speed);
        let mut out = DVector::zeros(ne + 2);
        let rv = space.restrict(&r);
        for k in 0..ne {
            out[k] = rv[k] + sigma * rot[k];
        }
        let diff: Vec<f64> = phi.iter().zip(&q_even).map(|(p, qv)| p - qv).collect();
        for k in 0..2 {
            out[ne + k] = (space.dot(&diff, &kernel[k]) - a[k] * kernel_sq[k]) / kernel_sq[k];
        }
        let mut pde = 0.0;
        for i in 0..=space.half {
            for j in 0..ny {
                let idx = i * ny + j;
                pde += space.weights[i] * out[idx] * out[idx];
            }
        }
        let norm = (pde + out[ne] * out[ne] + out[ne + 1] * out[ne + 1]).sqrt();
        (out, norm)
    };

    let jacobian = |phi: &[f64], speed: f64| -> DMatrix<f64> {
        let n = ne + 2;
        let mut jm = DMatrix::<f64>::zeros(n, n);
        let hx = space.half + 1;
        for i in 0..hx {
            for j in 0..ny {
                let row = i * ny + j;
                for m in 0..hx {
                    jm[(row, m * ny + j)] -= d2x_even[(i, m)];
                }
                for l in 0..ny {
                    jm[(row, i * ny + l)] -= d2y[(j, l)];
                }
                jm[(row, row)] += speed - 2.0 * phi[row];
                jm[(row, ne)] = phi[row];
                jm[(row, ne + 1)] = rot[row];
            }
        }
        for k in 0..2 {
            for i in 0..hx {
                for j in 0..ny {
                    let col = i * ny + j;
                    jm[(ne + k, col)] = space.weights[i] * kernel[k][col] / kernel_sq[k];
                }
            }
        }
        jm
    };

    let (mut res, mut norm) = residual_vec(&phi, speed, sigma);
    let start_norm = norm;
    let mut iterations = 0;
    while norm > opts.tol {
        if iterations >= opts.max_iterations {
            return Err(ZkError::NewtonFailure(format!(
                "family solve at a = {a:?}: residual {norm:.3e} after {iterations} iterations"
            )));
        }
        let jm = jacobian(&phi, speed);
        let step = jm
            .lu()
            .solve(&(-&res))
            .ok_or_else(|| ZkError::Singular(format!("bordered family Jacobian at a = {a:?}")))?;
        for k in 0..ne {
            phi[k] += step[k];
        }
        speed += step[ne];
        sigma += step[ne + 1];
        let (r, nn) = residual_vec(&phi, speed, sigma);
        res = r;
        norm = nn;
        iterations += 1;
        if !norm.is_finite() || norm > 1e3 * start_norm.max(1e-3) {
            return Err(ZkError::NewtonFailure(format!(
                "family solve at a = {a:?} diverged (residual {norm:.3e})"
            )));
        }
    }

    // tangents from the converged bordered Jacobian
    let lu = jacobian(&phi, speed).lu();
    let mut tangents = Vec::with_capacity(2);
    let mut speed_gradient = [0.0; 2];
    for k in 0..2 {
        let mut rhs = DVector::zeros(ne + 2);
        rhs[ne + k] = 1.0;
        let t = lu
            .solve(&rhs)
            .ok_or_else(|| ZkError::Singular("tangent solve".into()))?;
        tangents.push(space.expand(grid, &t.as_slice()[..ne]));
        speed_gradient[k] = t[ne];
    }
    let t1 = tangents.pop().unwrap();
    let t0 = tangents.pop().unwrap();

    let profile = space.expand(grid, &phi);
    let residual = stationary_residual(&profile, speed).norm_l2();
    Ok(ModulatedWave {
        c_star,
        n0,
        a,
        profile,
        speed,
        residual,
        sigma,
        tangents: [t0, t1],
        speed_gradient,
        newton_iterations: iterations,
    })
}

/// `g(x, y) = f(s x, y)` by evaluating the x Fourier series of `f` at the
/// scaled, periodically wrapped abscissae.
pub fn dilate_x(f: &Field, s: f64) -> Field {
    let grid = f.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let x0 = grid.half_width();
    // x spectra column by column
    let mut cols = vec![Complex::new(0.0, 0.0); nx * ny];
    for j in 0..ny {
        let mut line: Vec<Complex<f64>> = (0..nx).map(|i| Complex::new(f.at(i, j), 0.0)).collect();
        grid.fft_x_line(&mut line, false);
        cols[j * nx..(j + 1) * nx].copy_from_slice(&line);
    }
    let nyq = nx / 2;
    let mut values = vec![0.0; nx * ny];
    let mut basis = vec![Complex::new(0.0, 0.0); nx];
    for i in 0..nx {
        let xt = grid.wrap_x(s * grid.x()[i]) + x0;
        for (m, b) in basis.iter_mut().enumerate() {
            let ph = grid.xi()[m] * xt;
            *b = if m == nyq {
                Complex::new(ph.cos(), 0.0)
            } else {
                Complex::new(ph.cos(), ph.sin())
            };
        }
        for j in 0..ny {
            let col = &cols[j * nx..(j + 1) * nx];
            let mut acc = 0.0;
            for m in 0..nx {
                acc += (col[m] * basis[m]).re;
            }
            values[i * ny + j] = acc / nx as f64;
        }
    }
    Field::from_values(grid, values).expect("finite dilation")
}

/// `Theta(a, c) = (c/c*) phi_{c*}(a)(sqrt(c/c*) x, y)`.
pub fn theta(wave: &ModulatedWave, c: f64) -> Result<Field> {
    check_speed("c", c)?;
    Ok(scale_to_speed(&wave.profile, c, wave.c_star))
}

/// The same dilation applied to any profile (used for `d Theta / d a`).
pub fn scale_to_speed(f: &Field, c: f64, c_star: f64) -> Field {
    let ratio = c / c_star;
    if ratio == 1.0 {
        return f.clone();
    }
    dilate_x(f, ratio.sqrt()).scale(ratio)
}

/// `beta(a, c) = c* ||Q_c||^{4/3} / ||phi_{c*}(a)||^{4/3}`, the speed at which
/// `Theta(a, .)` carries the mass of `Q_c`.
pub fn beta(wave: &ModulatedWave, c: f64) -> Result<f64> {
    check_speed("c", c)?;
    let q_mass = line_soliton(c, wave.grid())?.norm_l2_sq();
    let phi_mass = wave.profile.norm_l2_sq();
    Ok(wave.c_star * (q_mass / phi_mass).powf(2.0 / 3.0))
}

/// Least-squares fit results for the small-amplitude expansions
/// `c(a) = c* + C_*/2 |a|^2 + ..` and `||phi||^2 = ||Q||^2 + C_2/2 |a|^2 + ..`.
#[derive(Clone, Debug)]
pub struct BifurcationCoefficients {
    pub c_star: f64,
    pub speed_coef: f64,
    pub mass_coef: f64,
    /// `3 C_* ||Q||^2 / (2 c*) - 5/2 ||Q^{3/2} cos||^2`.
    pub mass_coef_identity: f64,
    pub q_mass: f64,
    pub kernel_norm_sq: f64,
    pub fit_residual: f64,
    pub amplitudes: Vec<f64>,
    pub waves: Vec<ModulatedWave>,
}

impl BifurcationCoefficients {
    pub fn identity_deviation(&self) -> f64 {
        (self.mass_coef - self.mass_coef_identity).abs() / self.mass_coef_identity.abs()
    }
}

/// Fits `y = p s^2 + r s^4` and returns `(p, r, relative residual)`.
pub(crate) fn fit_even_quadratic(s: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let a = DMatrix::from_fn(s.len(), 2, |i, j| s[i].powi(2 * (j as i32 + 1)));
    let b = DVector::from_column_slice(y);
    let sol = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-14)
        .expect("svd solve");
    let r = &a * &sol - &b;
    let rel = r.norm() / b.norm().max(1e-300);
    (sol[0], sol[1], rel)
}

pub fn bifurcation_coefficients(
    c_star: f64,
    grid: &Arc<CylGrid>,
    amplitudes: &[f64],
    opts: &FamilyOptions,
) -> Result<BifurcationCoefficients> {
    if amplitudes.len() < 3 {
        return Err(ZkError::param("amplitudes", "need at least three amplitudes"));
    }
    let n0 = speeds::critical_index(c_star, grid.period()).ok_or(ZkError::NotCritical { c: c_star })?;
    let q = line_soliton(c_star, grid)?;
    let q_mass = q.norm_l2_sq();
    let (k0, _) = kernel_modes(c_star, n0, grid);
    let kernel_norm_sq = k0.norm_l2_sq();

    let mut waves: Vec<ModulatedWave> = Vec::with_capacity(amplitudes.len());
    let mut dc = Vec::new();
    let mut dm = Vec::new();
    for &s in amplitudes {
        let w = solve_modulated_family(c_star, [s, 0.0], grid, opts, waves.last())?;
        dc.push(w.speed - c_star);
        dm.push(w.profile.norm_l2_sq() - q_mass);
        waves.push(w);
    }
    let (pc, _, rc) = fit_even_quadratic(amplitudes, &dc);
    let (pm, _, rm) = fit_even_quadratic(amplitudes, &dm);
    let fit_residual = rc.max(rm);
    if fit_residual > 1e-2 {
        return Err(ZkError::Fit(format!(
            "quadratic model leaves relative residual {fit_residual:.3e}"
        )));
    }
    let speed_coef = 2.0 * pc;
    let mass_coef = 2.0 * pm;
    Ok(BifurcationCoefficients {
        c_star,
        speed_coef,
        mass_coef,
        mass_coef_identity: 1.5 * speed_coef * q_mass / c_star - 2.5 * kernel_norm_sq,
        q_mass,
        kernel_norm_sq,
        fit_residual,
        amplitudes: amplitudes.to_vec(),
        waves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn wide(nx: usize) -> Arc<CylGrid> {
        CylGrid::new(nx, 8, 30.0, 1.0).unwrap()
    }

    #[test]
    fn closed_form_values() {
        let g = wide(256);
        let q1 = line_soliton(1.0, &g).unwrap();
        let centre = g.nx() / 2;
        for j in 0..g.ny() {
            assert!((q1.at(centre, j) - 1.5).abs() < 1e-15);
        }
        assert!((soliton_profile(4.0f64, 0.0) - 6.0).abs() < 1e-15);
        let c: f64 = 2.5;
        let ratio = soliton_profile(c, 10.0 / c.sqrt()) / soliton_profile(c, 0.0);
        let sech5 = 1.0 / 5f64.cosh();
        assert!((ratio - sech5 * sech5).abs() < 1e-15);
        assert!((ratio - 1.815e-4).abs() < 1e-6);
        assert!(line_soliton(0.0, &g).is_err());
        assert!(line_soliton(-1.0, &g).is_err());
    }

    #[test]
    fn derivative_formulas() {
        for &c in &[0.5, 1.0, 3.2] {
            assert!((soliton_dc::<f64>(c, 0.0) - 1.5).abs() < 1e-15);
            assert_eq!(soliton_dx(c, 0.0), 0.0);
            // central differences of the closed form
            for &x in &[-2.0, -0.3, 0.7, 3.0] {
                let h = 1e-5;
                let fdx = (soliton_profile(c, x + h) - soliton_profile(c, x - h)) / (2.0 * h);
                let fdc = (soliton_profile(c + h, x) - soliton_profile(c - h, x)) / (2.0 * h);
                assert!((fdx - soliton_dx::<f64>(c, x)).abs() < 1e-8);
                assert!((fdc - soliton_dc::<f64>(c, x)).abs() < 1e-8);
            }
        }
        let g = wide(256);
        let q = line_soliton(1.0, &g).unwrap();
        let (_, dcq) = soliton_derivatives(1.0, &g).unwrap();
        assert!((dcq.dot(&q) - 9.0 * PI).abs() < 1e-8 * 9.0 * PI);
    }

    #[test]
    fn soliton_functionals() {
        let g = wide(512);
        let q = line_soliton(1.0, &g).unwrap();
        let f = functionals(&q, 1.0);
        assert!((f.mass - 12.0 * PI).abs() < 1e-6 * 12.0 * PI);
        assert!((f.energy + 18.0 * PI / 5.0).abs() < 1e-6 * 18.0 * PI / 5.0);
        assert!((f.action - 12.0 * PI / 5.0).abs() < 1e-6 * 12.0 * PI / 5.0);
        let z = functionals(&Field::zeros(&g), 1.0);
        assert_eq!((z.mass, z.energy, z.action), (0.0, 0.0, 0.0));
        let q4 = line_soliton(4.0, &g).unwrap();
        assert!((q4.norm_l2_sq() / q.norm_l2_sq() - 8.0).abs() < 1e-6);
        for &c in &[0.5, 1.0, 2.0, 4.0] {
            let qc = line_soliton(c, &g).unwrap();
            let fc = functionals(&qc, c);
            assert!((fc.mass - soliton_mass(c, 1.0)).abs() < 1e-6 * fc.mass);
            let s = 12.0 * PI / 5.0 * c.powf(2.5);
            assert!((fc.action - s).abs() < 1e-6 * s);
        }
    }

    #[test]
    fn soliton_is_stationary() {
        for &c in &[0.5f64, 1.0, 3.2] {
            let g = CylGrid::new(512, 8, 30.0 / c.sqrt(), 1.0).unwrap();
            let q = line_soliton(c, &g).unwrap();
            let r = stationary_residual(&q, c);
            assert!(r.norm_l2() <= 1e-10 * q.norm_l2(), "c = {c}: {}", r.norm_l2());
        }
    }

    #[test]
    fn kernel_mode_norm() {
        let c: f64 = 3.2;
        let g = CylGrid::new(256, 8, 30.0 / c.sqrt(), 1.0).unwrap();
        let (k0, k1) = kernel_modes(c, 2, &g);
        let expected = 36.0 / 5.0 * c.powf(2.5) * PI;
        assert!((k0.norm_l2_sq() - expected).abs() < 1e-8 * expected);
        assert!((k1.norm_l2_sq() - expected).abs() < 1e-8 * expected);
        assert!((expected - 414.3).abs() < 0.1);
    }

    #[test]
    fn dilation_reproduces_scaled_soliton() {
        let c_star: f64 = 3.2;
        let g = CylGrid::new(256, 8, 30.0 / c_star.sqrt(), 1.0).unwrap();
        let w = ModulatedWave::trivial(c_star, &g).unwrap();
        for &c in &[2.9, 3.2, 3.5] {
            let th = theta(&w, c).unwrap();
            let qc = line_soliton(c, &g).unwrap();
            assert!((&th - &qc).max_abs() < 1e-10, "c = {c}");
            assert!((beta(&w, c).unwrap() - c).abs() < 1e-12 * c);
        }
    }

    #[test]
    fn family_rejects_noncritical_speed() {
        let g = CylGrid::new(64, 8, 16.0, 1.0).unwrap();
        assert!(matches!(
            solve_modulated_family(3.0, [0.01, 0.0], &g, &FamilyOptions::default(), None),
            Err(ZkError::NotCritical { .. })
        ));
    }

    #[test]
    fn family_member_properties() {
        let c_star: f64 = 3.2;
        let g = CylGrid::new(128, 8, 30.0 / c_star.sqrt(), 1.0).unwrap();
        let opts = FamilyOptions::default();
        let zero = solve_modulated_family(c_star, [0.0, 0.0], &g, &opts, None).unwrap();
        assert_eq!(zero.speed, c_star);

        let s = 0.05;
        let wa = solve_modulated_family(c_star, [s, 0.0], &g, &opts, None).unwrap();
        let wb = solve_modulated_family(c_star, [0.0, s], &g, &opts, None).unwrap();
        assert!(wa.residual <= 1e-9, "residual {}", wa.residual);
        assert!(wa.sigma.abs() < 1e-8);
        assert!((wa.speed - wb.speed).abs() < 1e-9, "{} vs {}", wa.speed, wb.speed);
        // even in x
        assert!((&wa.profile - &wa.profile.reflect_x()).max_abs() < 1e-13);
        // leading-order shape with O(|a|^2) remainder
        let q = line_soliton(c_star, &g).unwrap();
        let (k0, _) = kernel_modes(c_star, 2, &g);
        let mut lead = q.clone();
        lead.axpy(s, &k0);
        let rem = (&wa.profile - &lead).norm_l2();
        let wh = solve_modulated_family(c_star, [s / 2.0, 0.0], &g, &opts, None).unwrap();
        let mut lead_h = q.clone();
        lead_h.axpy(s / 2.0, &k0);
        let rem_h = (&wh.profile - &lead_h).norm_l2();
        let ratio = rem / rem_h;
        assert!((3.5..4.5).contains(&ratio), "remainder ratio {ratio}");
    }
}
