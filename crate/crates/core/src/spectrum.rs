//! Linearized operators about the line soliton, the transverse-mode
//! reduction and the unstable eigenpairs `+-lambda_k`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Result, ZkError};
use crate::grid::{profile_derivative, CylGrid, Field};
use crate::speeds;
use crate::waves::{check_speed, line_soliton, soliton_profile};

pub use crate::speeds::{critical_index, critical_speed, n0, threshold, unstable_dimension};

/// Eigenvalues with real part at or below this are not counted as unstable.
pub const UNSTABLE_THRESHOLD: f64 = 1e-6;
/// Relative imaginary part tolerated on an unstable eigenvalue.
pub const REALNESS_TOL: f64 = 1e-8;

/// Dense circulant matrix of the spectral multiplier `(i k)^order` on a
/// periodic axis with the given wavenumber table (FFT order). Odd orders drop
/// the Nyquist mode so the matrix stays real.
pub fn differentiation_matrix(wavenumbers: &[f64], order: u32) -> DMatrix<f64> {
    let n = wavenumbers.len();
    let nyq = n / 2;
    let symbol: Vec<Complex<f64>> = wavenumbers
        .iter()
        .enumerate()
        .map(|(m, &k)| {
            if order % 2 == 1 && m == nyq {
                Complex::new(0.0, 0.0)
            } else {
                Complex::new(0.0, k).powu(order)
            }
        })
        .collect();
    let mut kernel = vec![0.0; n];
    for (d, out) in kernel.iter_mut().enumerate() {
        let mut s = 0.0;
        for (m, z) in symbol.iter().enumerate() {
            let phase = 2.0 * std::f64::consts::PI * ((m * d) % n) as f64 / n as f64;
            s += (z * Complex::new(phase.cos(), phase.sin())).re;
        }
        *out = s / n as f64;
    }
    DMatrix::from_fn(n, n, |i, j| kernel[(i + n - j) % n])
}

/// `L_c u = -Delta u + c u - 2 Q_c u`.
pub fn apply_hessian(u: &Field, q: &Field, c: f64) -> Field {
    let lap = u.laplacian();
    let mut out = u.zip_map(q, |v, qv| c * v - 2.0 * qv * v);
    out.axpy(-1.0, &lap);
    out
}

/// `d_x L_c u`.
pub fn apply_flow_linearization(u: &Field, q: &Field, c: f64) -> Field {
    apply_hessian(u, q, c).dx1()
}

/// 1D restriction of `L_c` to the transverse mode `k`:
/// `(-d_x^2 + c + k^2/L^2 - 2 Q_c) f`.
pub fn apply_mode_hessian(grid: &CylGrid, c: f64, k: usize, f: &[f64]) -> Vec<f64> {
    let d2 = profile_derivative(grid, f, 2);
    let shift = c + (k * k) as f64 / (grid.period() * grid.period());
    grid.x()
        .iter()
        .zip(f)
        .zip(&d2)
        .map(|((&x, &fv), &d)| -d + (shift - 2.0 * soliton_profile(c, x)) * fv)
        .collect()
}

/// Dense discretization of `A_k = D_x(-D_x^2 + c + k^2/L^2 - 2 Q_c)`.
#[derive(Clone, Debug)]
pub struct ModeOperator {
    pub k: usize,
    pub c: f64,
    pub matrix: DMatrix<f64>,
}

pub fn mode_operator(c: f64, k: usize, grid: &CylGrid) -> Result<ModeOperator> {
    weighted_mode_operator(c, k, grid, 0.0)
}

/// `A_k` conjugated by `e^{a x}`, i.e. with `D_x` replaced by `D_x - a`.
/// For `0 < a < sqrt(c + k^2/L^2)` the essential spectrum moves to the left
/// half plane and the slowly decaying tail of a near-threshold eigenfunction
/// becomes localized, so the eigenvalue converges on moderate boxes.
pub fn weighted_mode_operator(c: f64, k: usize, grid: &CylGrid, a: f64) -> Result<ModeOperator> {
    check_speed("c", c)?;
    let nx = grid.nx();
    let mut d1 = differentiation_matrix(grid.xi(), 1);
    for i in 0..nx {
        d1[(i, i)] -= a;
    }
    let mut hess = if a == 0.0 { -differentiation_matrix(grid.xi(), 2) } else { -(&d1 * &d1) };
    let shift = c + (k * k) as f64 / (grid.period() * grid.period());
    for (i, &x) in grid.x().iter().enumerate() {
        hess[(i, i)] += shift - 2.0 * soliton_profile(c, x);
    }
    let matrix = &d1 * &hess;
    debug_assert_eq!(matrix.nrows(), nx);
    Ok(ModeOperator { k, c, matrix })
}

/// Leading real eigenvalue of mode `k` on the whole line (weighted space),
/// negative below the instability threshold. Unlike the periodic-box value of
/// [`unstable_spectrum`] it does not depend on the x box once resolved.
pub fn line_growth_rate(c: f64, k: usize, grid: &CylGrid) -> Result<f64> {
    let m = c + (k * k) as f64 / (grid.period() * grid.period());
    let op = weighted_mode_operator(c, k, grid, 0.3 * m.sqrt())?;
    op.eigenvalues()
        .into_iter()
        .filter(|z| z.im.abs() <= REALNESS_TOL * z.norm().max(1.0))
        .map(|z| z.re)
        .max_by(f64::total_cmp)
        .ok_or_else(|| ZkError::Eigen(format!("mode {k}: no real eigenvalue")))
}

impl ModeOperator {
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(f)).as_slice().to_vec()
    }

    pub fn eigenvalues(&self) -> Vec<Complex<f64>> {
        self.matrix.clone().complex_eigenvalues().as_slice().to_vec()
    }

    /// The eigenvalue of largest real part, if it exceeds the unstable
    /// threshold, with a refined real eigenvector.
    pub fn leading_unstable(&self) -> Result<Option<(f64, Vec<f64>)>> {
        let eigs = self.eigenvalues();
        let top = eigs
            .iter()
            .copied()
            .max_by(|a, b| a.re.total_cmp(&b.re))
            .ok_or_else(|| ZkError::Eigen("empty spectrum".into()))?;
        if !(top.re > UNSTABLE_THRESHOLD) {
            return Ok(None);
        }
        if top.im.abs() > REALNESS_TOL * top.norm() {
            return Err(ZkError::Eigen(format!(
                "mode {}: leading unstable eigenvalue {top} is not real",
                self.k
            )));
        }
        Ok(Some(self.refine(top.re)?))
    }

    /// Shifted inverse iteration at `sigma` with Rayleigh updates.
    fn refine(&self, sigma: f64) -> Result<(f64, Vec<f64>)> {
        let n = self.matrix.nrows();
        let mut shifted = self.matrix.clone();
        let sigma = sigma * (1.0 + 1e-12);
        for i in 0..n {
            shifted[(i, i)] -= sigma;
        }
        let lu = shifted.lu();
        let mut v = DVector::from_fn(n, |i, _| {
            let t = i as f64 / n as f64 - 0.5;
            (-40.0 * t * t).exp() * (1.0 + t)
        });
        let mut lambda = sigma;
        for _ in 0..50 {
            let w = lu
                .solve(&v)
                .ok_or_else(|| ZkError::Eigen(format!("mode {}: singular inverse iteration", self.k)))?;
            v = &w / w.norm();
            let av = &self.matrix * &v;
            lambda = v.dot(&av);
            if (&av - &v * lambda).norm() <= 1e-11 * lambda.abs().max(1.0) {
                break;
            }
        }
        let av = &self.matrix * &v;
        let res = (&av - &v * lambda).norm();
        if res > 1e-7 * lambda.abs().max(1.0) {
            return Err(ZkError::Eigen(format!(
                "mode {}: eigenvector residual {res:.3e} after refinement",
                self.k
            )));
        }
        // fix the sign: largest entry positive
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v.neg_mut();
        }
        Ok((lambda, v.as_slice().to_vec()))
    }
}

/// One unstable transverse mode with its normalized profile. The eigenfunctions are
/// `F^{+,j} = f(x) trig_j(k y / L)` and `F^{-,j} = -s f(-x) trig_j(k y / L)`
/// with `trig_0 = cos`, `trig_1 = sin`, and `<F^{+,j}, L F^{-,j}> = 1`.
#[derive(Clone, Debug)]
pub struct UnstablePair {
    pub k: usize,
    pub lambda: f64,
    pub profile: Vec<f64>,
    /// The sign `s` above; `-1` when the raw pairing came out negative.
    pub minus_sign: f64,
    /// Factor applied to the unit-norm eigenvector.
    pub normalization: f64,
}

fn reflect_profile(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    (0..n).map(|i| f[(n - i) % n]).collect()
}

fn dot_x(grid: &CylGrid, f: &[f64], g: &[f64]) -> f64 {
    f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() * grid.dx()
}

/// Rescales a raw eigenvector so that `<F^{+,j}, L F^{-,j}> = 1`.
pub fn normalize_pair(grid: &CylGrid, c: f64, k: usize, lambda: f64, raw: &[f64]) -> Result<UnstablePair> {
    if k == 0 {
        return Err(ZkError::param("k", "transverse mode must be positive"));
    }
    let refl = reflect_profile(raw);
    let l_refl = apply_mode_hessian(grid, c, k, &refl);
    // the y integral of cos^2 or sin^2 over one period is pi L
    let y_factor = std::f64::consts::PI * grid.period();
    let pairing = -y_factor * dot_x(grid, raw, &l_refl);
    if !(pairing.abs() >= 1e-10) {
        return Err(ZkError::Eigen(format!(
            "mode {k}: degenerate pairing {pairing:.3e}"
        )));
    }
    let normalization = 1.0 / pairing.abs().sqrt();
    Ok(UnstablePair {
        k,
        lambda,
        profile: raw.iter().map(|v| v * normalization).collect(),
        minus_sign: pairing.signum(),
        normalization,
    })
}

impl UnstablePair {
    fn trig(&self, grid: &CylGrid, j: usize) -> Vec<f64> {
        let kk = self.k as f64 / grid.period();
        grid.y()
            .iter()
            .map(|&y| if j == 0 { (kk * y).cos() } else { (kk * y).sin() })
            .collect()
    }

    pub fn minus_profile(&self) -> Vec<f64> {
        reflect_profile(&self.profile)
            .into_iter()
            .map(|v| -self.minus_sign * v)
            .collect()
    }

    pub fn f_plus(&self, grid: &Arc<CylGrid>, j: usize) -> Field {
        Field::separable(grid, &self.profile, &self.trig(grid, j))
    }

    pub fn f_minus(&self, grid: &Arc<CylGrid>, j: usize) -> Field {
        Field::separable(grid, &self.minus_profile(), &self.trig(grid, j))
    }

    /// `L F^{+,j}` by the 1D mode operator.
    pub fn l_f_plus(&self, grid: &Arc<CylGrid>, c: f64, j: usize) -> Field {
        let lf = apply_mode_hessian(grid, c, self.k, &self.profile);
        Field::separable(grid, &lf, &self.trig(grid, j))
    }

    pub fn l_f_minus(&self, grid: &Arc<CylGrid>, c: f64, j: usize) -> Field {
        let lf = apply_mode_hessian(grid, c, self.k, &self.minus_profile());
        Field::separable(grid, &lf, &self.trig(grid, j))
    }
}

/// Unstable eigenpairs at a speed, indexed by transverse mode.
#[derive(Clone, Debug)]
pub struct UnstableSpectrum {
    pub c_star: f64,
    pub period: f64,
    /// Mode bound; `1` below the threshold, where nothing is unstable.
    pub n0: usize,
    pub pairs: Vec<UnstablePair>,
    /// `min lambda_k` (0 when empty).
    pub kappa_star: f64,
    /// `max lambda_k` (0 when empty).
    pub kappa_sup: f64,
    pub grid: Arc<CylGrid>,
}

impl UnstableSpectrum {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// All `(pair index, j)` directions, `j = 0` for cos and `1` for sin.
    pub fn directions(&self) -> Vec<(usize, usize)> {
        (0..self.pairs.len()).flat_map(|p| [(p, 0), (p, 1)]).collect()
    }

    pub fn lambda(&self, k: usize) -> Option<f64> {
        self.pairs.iter().find(|p| p.k == k).map(|p| p.lambda)
    }

    pub fn pair(&self, k: usize) -> Option<&UnstablePair> {
        self.pairs.iter().find(|p| p.k == k)
    }
}

/// Solves the dense eigenproblem of every unstable transverse mode.
pub fn unstable_spectrum(c_star: f64, grid: &Arc<CylGrid>) -> Result<UnstableSpectrum> {
    check_speed("c_star", c_star)?;
    let period = grid.period();
    let empty = |n0| UnstableSpectrum {
        c_star,
        period,
        n0,
        pairs: Vec::new(),
        kappa_star: 0.0,
        kappa_sup: 0.0,
        grid: grid.clone(),
    };
    if c_star <= speeds::threshold(period) {
        // nothing should be unstable; a spurious mode 1 means the grid is broken
        if let Some((lambda, _)) = mode_operator(c_star, 1, grid)?.leading_unstable()? {
            return Err(ZkError::Eigen(format!(
                "eigenvalue {lambda:.3e} found below the threshold"
            )));
        }
        return Ok(empty(1));
    }
    let n0 = speeds::n0(c_star, period)?;
    let mut pairs = Vec::with_capacity(n0 - 1);
    for k in 1..n0 {
        let op = mode_operator(c_star, k, grid)?;
        let (lambda, f) = op.leading_unstable()?.ok_or_else(|| {
            ZkError::Eigen(format!(
                "no unstable eigenvalue resolved for mode {k} at c = {c_star}; widen the x box"
            ))
        })?;
        pairs.push(normalize_pair(grid, c_star, k, lambda, &f)?);
    }
    let kappa_star = pairs.iter().map(|p| p.lambda).fold(f64::INFINITY, f64::min);
    let kappa_sup = pairs.iter().map(|p| p.lambda).fold(0.0, f64::max);
    Ok(UnstableSpectrum {
        kappa_star,
        kappa_sup,
        pairs,
        ..empty(n0)
    })
}

/// Transverse modes `k >= 1` whose operator has an eigenvalue above the
/// unstable threshold. Modes with `k^2/L^2 >= 5c/4` have a positive
/// Hessian and are not scanned.
pub fn count_unstable_modes(c: f64, grid: &CylGrid) -> Result<Vec<usize>> {
    check_speed("c", c)?;
    let kmax = (grid.period() * (5.0 * c).sqrt() / 2.0).floor() as usize;
    let mut found = Vec::new();
    for k in 1..=kmax.max(1) {
        if mode_operator(c, k, grid)?.leading_unstable()?.is_some() {
            found.push(k);
        }
    }
    Ok(found)
}

/// `||(-d_x^2 + c + n^2/L^2 - 2 Q_c) Q_c^{3/2}|| / ||Q_c^{3/2}||`, which
/// vanishes exactly at the critical speed `4 n^2 / (5 L^2)`.
pub fn kernel_at_critical(c: f64, n: usize, grid: &CylGrid) -> Result<f64> {
    check_speed("c", c)?;
    let f: Vec<f64> = grid.x().iter().map(|&x| soliton_profile(c, x).powf(1.5)).collect();
    let r = apply_mode_hessian(grid, c, n, &f);
    Ok((dot_x(grid, &r, &r) / dot_x(grid, &f, &f)).sqrt())
}

/// Translation-kernel checks: `(|A_0 Q'|, |A_0 dQ/dc + Q'|)` relative to `|Q'|`.
pub fn translation_kernel_residuals(c: f64, grid: &Arc<CylGrid>) -> Result<(f64, f64)> {
    let op = mode_operator(c, 0, grid)?;
    let (dx, dc) = crate::waves::soliton_derivatives(c, grid)?;
    let ny = grid.ny();
    let col = |f: &Field| -> Vec<f64> { f.values().iter().step_by(ny).copied().collect() };
    let (dxq, dcq) = (col(&dx), col(&dc));
    let norm = dot_x(grid, &dxq, &dxq).sqrt();
    let r1 = op.apply(&dxq);
    let mut r2 = op.apply(&dcq);
    for (r, d) in r2.iter_mut().zip(&dxq) {
        *r += d;
    }
    let _ = line_soliton(c, grid)?;
    Ok((dot_x(grid, &r1, &r1).sqrt() / norm, dot_x(grid, &r2, &r2).sqrt() / norm))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_for(c: f64, nx: usize) -> Arc<CylGrid> {
        CylGrid::new(nx, 8, 30.0 / c.sqrt(), 1.0).unwrap()
    }

    #[test]
    fn line_growth_rate_is_box_independent_and_changes_sign() {
        for c in [0.79, 0.81, 0.9] {
            let a = line_growth_rate(c, 1, &grid_for(c, 256)).unwrap();
            let b = line_growth_rate(c, 1, &CylGrid::new(256, 8, 50.0, 1.0).unwrap()).unwrap();
            assert!((a - b).abs() < 1e-7, "c {c}: {a} vs {b}");
            assert_eq!(a > 0.0, c > threshold(1.0), "c {c}: {a}");
        }
    }

    #[test]
    fn differentiation_matrices_match_fft() {
        let g = CylGrid::<f64>::new(32, 8, 5.0, 1.0).unwrap();
        let f: Vec<f64> = g.x().iter().map(|&x| (-x * x).exp() * (1.0 + x)).collect();
        for order in 1..=3 {
            let m = differentiation_matrix(g.xi(), order);
            let a = (&m * DVector::from_column_slice(&f)).as_slice().to_vec();
            let b = profile_derivative(&g, &f, order);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-10, "order {order}");
            }
        }
    }

    #[test]
    fn translation_kernel() {
        let g = grid_for(1.0, 256);
        let (r1, r2) = translation_kernel_residuals(1.0, &g).unwrap();
        assert!(r1 < 1e-8, "{r1}");
        assert!(r2 < 1e-8, "{r2}");
    }

    #[test]
    fn kernel_identity_at_critical_speed() {
        let g = grid_for(3.2, 256);
        assert!(kernel_at_critical(3.2, 2, &g).unwrap() < 1e-8);
        let g3 = grid_for(3.0, 256);
        let off = kernel_at_critical(3.0, 2, &g3).unwrap();
        assert!((off - 0.25).abs() < 1e-8, "{off}");
    }

    #[test]
    fn spectrum_is_symmetric() {
        let g = grid_for(1.0, 128);
        let op = mode_operator(1.0, 1, &g).unwrap();
        let eigs = op.eigenvalues();
        for z in &eigs {
            let nearest = eigs
                .iter()
                .map(|w| (w + z).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-6 * z.norm().max(1.0), "{z}");
        }
    }

    #[test]
    fn unstable_mode_at_unit_speed() {
        let g = grid_for(1.0, 256);
        let spec = unstable_spectrum(1.0, &g).unwrap();
        assert_eq!(spec.n0, 2);
        assert_eq!(spec.pairs.len(), 1);
        let p = &spec.pairs[0];
        assert!((p.lambda - 0.08189).abs() < 1e-4, "{}", p.lambda);
        // eigenrelation on the full cylinder
        let q = line_soliton(1.0, &g).unwrap();
        for j in 0..2 {
            let fp = p.f_plus(&g, j);
            let fm = p.f_minus(&g, j);
            let ap = apply_flow_linearization(&fp, &q, 1.0);
            let am = apply_flow_linearization(&fm, &q, 1.0);
            assert!((&ap - &fp.scale(p.lambda)).norm_l2() < 1e-8 * fp.norm_l2());
            assert!((&am + &fm.scale(p.lambda)).norm_l2() < 1e-8 * fm.norm_l2());
        }
        assert_eq!(count_unstable_modes(1.0, &g).unwrap(), vec![1]);
    }

    #[test]
    fn pairing_normalization() {
        let g = grid_for(1.0, 256);
        let spec = unstable_spectrum(1.0, &g).unwrap();
        let p = &spec.pairs[0];
        let q = line_soliton(1.0, &g).unwrap();
        for j in 0..2 {
            for jj in 0..2 {
                let lfm = apply_hessian(&p.f_minus(&g, jj), &q, 1.0);
                let v = p.f_plus(&g, j).dot(&lfm);
                let expected = if j == jj { 1.0 } else { 0.0 };
                assert!((v - expected).abs() < 1e-8, "({j},{jj}) {v}");
            }
        }
        let (dxq, _) = crate::waves::soliton_derivatives(1.0, &g).unwrap();
        let lq = apply_hessian(&dxq, &q, 1.0);
        assert!(p.f_plus(&g, 0).dot(&lq).abs() < 1e-8);
    }

    #[test]
    fn subcritical_is_empty() {
        let g = grid_for(0.79, 256);
        let spec = unstable_spectrum(0.79, &g).unwrap();
        assert!(spec.is_empty());
        assert!(n0(0.79, 1.0).is_err());
    }
}
