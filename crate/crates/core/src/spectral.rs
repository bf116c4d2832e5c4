//! Fourier representation on the periodic box `[−Λπ/2, Λπ/2]^d`.
//!
//! Fields are stored row-major with axis 0 slowest. Coefficients are
//! normalized so that `f(x_i) = Σ_j c_j exp(2πi j·i/n)`; the constant phase
//! from the box offset is absorbed into the coefficients. The physical
//! wavenumber of index `j` is `k = 2j/Λ`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("spectral_grid: grid size must be a power of two and at least 4, got {0}")]
    BadSize(usize),
    #[error("spectral_grid: box scale must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("spectral_grid: dimension must be 2 or 3, got {0}")]
    BadDim(usize),
}

#[derive(Clone)]
pub struct Grid {
    dim: usize,
    n: usize,
    lambda: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Signed integer index per position along an axis.
    jvals: Vec<i64>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("lambda", &self.lambda)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.lambda == other.lambda
    }
}

/// Multi-channel spectral coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    pub channels: Vec<Vec<Complex64>>,
}

impl SpectralField {
    pub fn zeros(grid: &Grid, channels: usize) -> Self {
        Self {
            channels: vec![vec![Complex64::new(0.0, 0.0); grid.len()]; channels],
        }
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }
}

impl Grid {
    pub fn new(dim: usize, n: usize, lambda: f64) -> Result<Self, SpectralError> {
        if dim != 2 && dim != 3 {
            return Err(SpectralError::BadDim(dim));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(SpectralError::BadSize(n));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(SpectralError::BadScale(lambda));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let jvals = (0..n)
            .map(|m| if m < n / 2 { m as i64 } else { m as i64 - n as i64 })
            .collect();
        Ok(Self {
            dim,
            n,
            lambda,
            fwd,
            inv,
            jvals,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Period `Λπ` of the box along each axis.
    pub fn period(&self) -> f64 {
        self.lambda * std::f64::consts::PI
    }

    pub fn volume(&self) -> f64 {
        self.period().powi(self.dim as i32)
    }

    pub fn spacing(&self) -> f64 {
        self.period() / self.n as f64
    }

    /// Multi-index of a flat position.
    pub fn unflatten(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        if self.dim == 2 {
            [idx / n, idx % n, 0]
        } else {
            [idx / (n * n), (idx / n) % n, idx % n]
        }
    }

    /// Physical coordinate of a grid point.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let m = self.unflatten(idx);
        let h = self.spacing();
        let x0 = -0.5 * self.period();
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = x0 + m[a] as f64 * h;
        }
        x
    }

    /// Signed integer mode index per axis.
    pub fn mode(&self, idx: usize) -> [i64; 3] {
        let m = self.unflatten(idx);
        let mut j = [0; 3];
        for a in 0..self.dim {
            j[a] = self.jvals[m[a]];
        }
        j
    }

    /// Flat position of a signed mode index, if it is resolved.
    pub fn index_of_mode(&self, j: &[i64]) -> Option<usize> {
        let n = self.n as i64;
        let mut idx = 0usize;
        for &v in &j[..self.dim] {
            if v < -n / 2 || v >= n / 2 {
                return None;
            }
            idx = idx * self.n + v.rem_euclid(n) as usize;
        }
        Some(idx)
    }

    /// Physical wavevector `k = 2j/Λ`.
    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let j = self.mode(idx);
        let s = 2.0 / self.lambda;
        [s * j[0] as f64, s * j[1] as f64, s * j[2] as f64]
    }

    pub fn k_squared(&self, idx: usize) -> f64 {
        let k = self.wavevector(idx);
        k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
    }

    fn is_nyquist(&self, j: &[i64; 3]) -> bool {
        let half = (self.n / 2) as i64;
        j[..self.dim].iter().any(|&v| v == -half)
    }

    fn transform_axis(&self, data: &mut [Complex64], axis: usize, fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let stride = n.pow((self.dim - 1 - axis) as u32);
        if stride == 1 {
            fft.process(data);
            return;
        }
        let block = stride * n;
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for start in (0..data.len()).step_by(block) {
            for off in 0..stride {
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[start + off + i * stride];
                }
                fft.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    data[start + off + i * stride] = *v;
                }
            }
        }
    }

    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        assert_eq!(f.len(), self.len());
        let mut data: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for axis in 0..self.dim {
            self.transform_axis(&mut data, axis, &self.fwd);
        }
        let s = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|c| *c *= s);
        data
    }

    pub fn inverse(&self, c: &[Complex64]) -> Vec<f64> {
        assert_eq!(c.len(), self.len());
        let mut data = c.to_vec();
        for axis in 0..self.dim {
            self.transform_axis(&mut data, axis, &self.inv);
        }
        data.iter().map(|z| z.re).collect()
    }

    pub fn forward_field(&self, channels: &[Vec<f64>]) -> SpectralField {
        SpectralField {
            channels: channels.iter().map(|c| self.forward(c)).collect(),
        }
    }

    pub fn inverse_field(&self, f: &SpectralField) -> Vec<Vec<f64>> {
        f.channels.iter().map(|c| self.inverse(c)).collect()
    }

    /// Multiplies by `(i k_axis)^order`; odd orders drop the Nyquist mode.
    pub fn derivative(&self, c: &[Complex64], axis: usize, order: u32) -> Vec<Complex64> {
        assert!((1..=3).contains(&order), "derivative order must be 1, 2 or 3");
        assert!(axis < self.dim);
        let half = (self.n / 2) as i64;
        let s = 2.0 / self.lambda;
        let mut out = Vec::with_capacity(c.len());
        for (idx, &z) in c.iter().enumerate() {
            let j = self.mode(idx)[axis];
            if order % 2 == 1 && j == -half {
                out.push(Complex64::new(0.0, 0.0));
                continue;
            }
            let ik = Complex64::new(0.0, s * j as f64);
            out.push(z * ik.powu(order));
        }
        out
    }

    pub fn laplacian(&self, c: &[Complex64]) -> Vec<Complex64> {
        c.iter()
            .enumerate()
            .map(|(idx, &z)| -z * self.k_squared(idx))
            .collect()
    }

    /// Spectral divergence of a vector field.
    pub fn divergence(&self, v: &SpectralField) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.len()];
        for a in 0..self.dim {
            let d = self.derivative(&v.channels[a], a, 1);
            for (o, x) in out.iter_mut().zip(d) {
                *o += x;
            }
        }
        out
    }

    /// Per-mode `I − k kᵀ/|k|²`. The mean mode is left alone; Nyquist modes
    /// have no Hermitian partner with the opposite wavevector and are zeroed.
    pub fn leray_project(&self, v: &mut SpectralField) {
        assert_eq!(v.n_channels(), self.dim);
        let d = self.dim;
        for idx in 0..self.len() {
            let j = self.mode(idx);
            if j == [0, 0, 0] {
                continue;
            }
            if self.is_nyquist(&j) {
                for a in 0..d {
                    v.channels[a][idx] = Complex64::new(0.0, 0.0);
                }
                continue;
            }
            let k = self.wavevector(idx);
            let k2 = self.k_squared(idx);
            let mut kv = Complex64::new(0.0, 0.0);
            for a in 0..d {
                kv += v.channels[a][idx] * k[a];
            }
            for a in 0..d {
                v.channels[a][idx] -= kv * (k[a] / k2);
            }
        }
    }

    /// Mask of modes that survive the 2/3 rule.
    pub fn dealias_mask(&self) -> Vec<bool> {
        let cut = (self.n / 3) as i64;
        (0..self.len())
            .map(|idx| self.mode(idx)[..self.dim].iter().all(|j| j.abs() <= cut))
            .collect()
    }

    pub fn dealias(&self, c: &mut [Complex64]) {
        let cut = (self.n / 3) as i64;
        for (idx, z) in c.iter_mut().enumerate() {
            if self.mode(idx)[..self.dim].iter().any(|j| j.abs() > cut) {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Mask keeping the mean mode and the `m` lowest Hermitian pairs
    /// `{j, −j}`, ordered by `|j|²` and then lexicographically.
    pub fn galerkin_mask(&self, m: usize) -> Vec<bool> {
        let n = self.n as i64;
        let wrap = |v: i64| {
            let r = v.rem_euclid(n);
            if r < n / 2 {
                r
            } else {
                r - n
            }
        };
        let mut keys: Vec<(i64, [i64; 3])> = (0..self.len())
            .filter_map(|idx| {
                let j = self.mode(idx);
                if j == [0, 0, 0] {
                    return None;
                }
                let neg = [wrap(-j[0]), wrap(-j[1]), wrap(-j[2])];
                let canon = if j >= neg { j } else { neg };
                if canon != j {
                    return None;
                }
                Some((j.iter().map(|v| v * v).sum(), j))
            })
            .collect();
        keys.sort();
        let kept: std::collections::HashSet<[i64; 3]> =
            keys.iter().take(m).map(|(_, j)| *j).collect();
        (0..self.len())
            .map(|idx| {
                let j = self.mode(idx);
                if j == [0, 0, 0] {
                    return true;
                }
                let neg = [wrap(-j[0]), wrap(-j[1]), wrap(-j[2])];
                kept.contains(&j) || kept.contains(&neg)
            })
            .collect()
    }

    pub fn galerkin_project(&self, v: &mut SpectralField, m: usize) {
        let mask = self.galerkin_mask(m);
        apply_mask(v, &mask);
    }

    /// `∫ f g dx` from coefficients (Parseval).
    pub fn inner(&self, a: &[Complex64], b: &[Complex64]) -> f64 {
        let s: f64 = a.iter().zip(b).map(|(x, y)| (x * y.conj()).re).sum();
        s * self.volume()
    }

    /// `∫ f g dx` by midpoint quadrature on the grid.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.volume() / self.len() as f64
    }
}

pub fn apply_mask(v: &mut SpectralField, mask: &[bool]) {
    for ch in v.channels.iter_mut() {
        for (z, &keep) in ch.iter_mut().zip(mask) {
            if !keep {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    }
}

/// Largest deviation from `c(−j) = conj(c(j))`.
pub fn hermitian_defect(grid: &Grid, c: &[Complex64]) -> f64 {
    let n = grid.n();
    let mut worst = 0.0f64;
    for idx in 0..grid.len() {
        let m = grid.unflatten(idx);
        let mut partner = 0;
        for a in 0..grid.dim() {
            partner = partner * n + (n - m[a]) % n;
        }
        worst = worst.max((c[idx] - c[partner].conj()).norm());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: &Grid, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Sum of random low modes `|j| ≤ kmax`.
    pub(crate) fn band_limited(grid: &Grid, rng: &mut ChaCha8Rng, kmax: i64) -> Vec<f64> {
        let mut c = vec![Complex64::new(0.0, 0.0); grid.len()];
        for idx in 0..grid.len() {
            let j = grid.mode(idx);
            if j.iter().all(|v| v.abs() <= kmax) {
                c[idx] = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        let f = grid.inverse(&c);
        let c = grid.forward(&f);
        grid.inverse(&c)
    }

    #[test]
    fn mode_index_round_trip() {
        for dim in [2, 3] {
            let g = Grid::new(dim, 8, 1.0).unwrap();
            for idx in 0..g.len() {
                assert_eq!(g.index_of_mode(&g.mode(idx)), Some(idx));
            }
            assert_eq!(g.index_of_mode(&[4, 0, 0]), None);
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (dim, n) in [(2, 32), (3, 8)] {
            let grid = Grid::new(dim, n, 1.3).unwrap();
            let f = random_field(&grid, &mut rng);
            let c = grid.forward(&f);
            let back = grid.inverse(&c);
            let err = f.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-12);
            let l2 = grid.integrate(&f.iter().map(|v| v * v).collect::<Vec<_>>());
            assert!((grid.inner(&c, &c) - l2).abs() < 1e-12 * l2);
            assert!(hermitian_defect(&grid, &c) < 1e-13);
        }
    }

    #[test]
    fn derivative_of_sine() {
        let lambda = 1.7;
        let grid = Grid::new(2, 32, lambda).unwrap();
        let f: Vec<f64> = (0..grid.len()).map(|i| (2.0 * grid.point(i)[0] / lambda).sin()).collect();
        let d2 = grid.inverse(&grid.derivative(&grid.forward(&f), 0, 2));
        let k2 = (2.0 / lambda).powi(2);
        for (a, b) in d2.iter().zip(&f) {
            assert!((a + k2 * b).abs() < 1e-12);
        }
        let one = vec![1.0; grid.len()];
        for order in 1..=3 {
            let d = grid.inverse(&grid.derivative(&grid.forward(&one), 1, order));
            assert!(d.iter().all(|v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let grid = Grid::new(2, 64, 1.0).unwrap();
        let f = band_limited(&grid, &mut rng, 3);
        let d = grid.inverse(&grid.derivative(&grid.forward(&f), 1, 1));
        let n = grid.n();
        let h = grid.spacing();
        let coef = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
        let scale = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for idx in 0..grid.len() {
            let (r, c) = (idx / n, idx % n);
            let mut fd = 0.0;
            for (s, w) in coef.iter().enumerate() {
                let p = r * n + (c + s + 1) % n;
                let m = r * n + (c + n - s - 1) % n;
                fd += w * (f[p] - f[m]);
            }
            fd /= h;
            assert!((fd - d[idx]).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn leray_removes_gradients_and_divergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (dim, n) in [(2, 32), (3, 16)] {
            let grid = Grid::new(dim, n, 1.0).unwrap();
            let phi = grid.forward(&band_limited(&grid, &mut rng, 4));
            let mut grad = SpectralField {
                channels: (0..dim).map(|a| grid.derivative(&phi, a, 1)).collect(),
            };
            grid.leray_project(&mut grad);
            assert!(grad.channels.iter().flatten().all(|z| z.norm() < 1e-13));

            let mut v = grid.forward_field(&(0..dim).map(|_| random_field(&grid, &mut rng)).collect::<Vec<_>>());
            grid.leray_project(&mut v);
            let div = grid.inverse(&grid.divergence(&v));
            assert!(div.iter().all(|x| x.abs() < 1e-12));
            let before = v.clone();
            grid.leray_project(&mut v);
            for (a, b) in v.channels.iter().flatten().zip(before.channels.iter().flatten()) {
                assert!((a - b).norm() < 1e-13);
            }
            for ch in &v.channels {
                assert!(hermitian_defect(&grid, ch) < 1e-13);
            }
        }
    }

    #[test]
    fn dealiased_products_have_no_aliasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 32;
        let grid = Grid::new(2, n, 1.0).unwrap();
        let fine = Grid::new(2, 2 * n, 1.0).unwrap();
        let cut = (n / 3) as i64;
        let mut make = || {
            let mut c = grid.forward(&band_limited(&grid, &mut rng, cut));
            grid.dealias(&mut c);
            c
        };
        let (a, b) = (make(), make());
        // same coefficients on the refined grid
        let lift = |c: &[Complex64]| {
            let mut out = vec![Complex64::new(0.0, 0.0); fine.len()];
            for idx in 0..grid.len() {
                let j = grid.mode(idx);
                let m0 = j[0].rem_euclid(2 * n as i64) as usize;
                let m1 = j[1].rem_euclid(2 * n as i64) as usize;
                out[m0 * 2 * n + m1] = c[idx];
            }
            out
        };
        let pa = grid.inverse(&a);
        let pb = grid.inverse(&b);
        let mut coarse = grid.forward(&pa.iter().zip(&pb).map(|(x, y)| x * y).collect::<Vec<_>>());
        grid.dealias(&mut coarse);
        let fa = fine.inverse(&lift(&a));
        let fb = fine.inverse(&lift(&b));
        let prod = fine.forward(&fa.iter().zip(&fb).map(|(x, y)| x * y).collect::<Vec<_>>());
        let mut want = lift(&coarse);
        for idx in 0..fine.len() {
            let j = fine.mode(idx);
            if j[0].abs() <= cut && j[1].abs() <= cut {
                want[idx] -= prod[idx];
            }
        }
        assert!(want.iter().all(|z| z.norm() < 1e-14));

        let mut nyq = vec![Complex64::new(0.0, 0.0); grid.len()];
        nyq[n / 2] = Complex64::new(1.0, 0.0);
        grid.dealias(&mut nyq);
        assert!(nyq.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn galerkin_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let grid = Grid::new(2, 16, 1.0).unwrap();
        let v = grid.forward_field(&[random_field(&grid, &mut rng), random_field(&grid, &mut rng)]);
        let mut all = v.clone();
        grid.galerkin_project(&mut all, grid.len());
        assert_eq!(all, v);

        // modes (0,1) and (2,1): M = 1 keeps only the former
        let mut two = SpectralField::zeros(&grid, 2);
        for (j, amp) in [([0i64, 1], 1.0), ([2, 1], 0.5)] {
            for s in [1i64, -1] {
                let m0 = (s * j[0]).rem_euclid(16) as usize;
                let m1 = (s * j[1]).rem_euclid(16) as usize;
                two.channels[1][m0 * 16 + m1] = Complex64::new(amp, 0.0);
            }
        }
        grid.galerkin_project(&mut two, 1);
        let nonzero: Vec<usize> = (0..grid.len()).filter(|&i| two.channels[1][i].norm() > 0.0).collect();
        assert_eq!(nonzero, vec![1, 15]);

        let mut p = v.clone();
        grid.galerkin_project(&mut p, 7);
        let mut pp = p.clone();
        grid.galerkin_project(&mut pp, 7);
        assert_eq!(p, pp);
        let w = grid.forward_field(&[random_field(&grid, &mut rng), random_field(&grid, &mut rng)]);
        let mut pw = w.clone();
        grid.galerkin_project(&mut pw, 7);
        let lhs: f64 = (0..2).map(|a| grid.inner(&p.channels[a], &w.channels[a])).sum();
        let rhs: f64 = (0..2).map(|a| grid.inner(&v.channels[a], &pw.channels[a])).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        for ch in &p.channels {
            assert!(hermitian_defect(&grid, ch) < 1e-13);
        }
    }

    #[test]
    fn integration_by_parts() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let grid = Grid::new(2, 32, 1.0).unwrap();
        let f = grid.forward(&band_limited(&grid, &mut rng, 6));
        let g = grid.forward(&band_limited(&grid, &mut rng, 6));
        let lhs = grid.inner(&grid.laplacian(&f), &g);
        let rhs: f64 = (0..2)
            .map(|a| grid.inner(&grid.derivative(&f, a, 1), &grid.derivative(&g, a, 1)))
            .sum();
        assert!((lhs + rhs).abs() < 1e-10 * lhs.abs());
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(2, 48, 1.0).is_err());
        assert!(Grid::new(4, 16, 1.0).is_err());
        assert!(Grid::new(2, 16, -1.0).is_err());
    }
}
