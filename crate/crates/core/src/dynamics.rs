//! Right-hand sides of the coupled Q-tensor / Navier-Stokes system and the
//! integrating-factor RK2 time stepper.
//!
//! Conventions: `(∇u)_ij = ∂_j u_i`, `D₀` and `D` are its antisymmetric and
//! symmetric parts, `(div T)_i = ∂_j T_ij`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potential::{BulkPotential, PotentialError};
use crate::spectral::{apply_mask, Grid, SpectralError, SpectralField};
use crate::tensor::{
    frob_dot_components, mat_add, matmul, n_components, physicality_margin, trace,
    trace_free, Mat, Sym0Matrix, ZERO_MAT,
};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("dynamics: blow-up at t = {t}: field norm {norm:e} exceeds 1e8")]
    BlowUp { t: f64, norm: f64 },
    #[error("dynamics: potential failed at grid point {index}, t = {t}: {source}")]
    Potential {
        t: f64,
        index: usize,
        #[source]
        source: PotentialError,
    },
    #[error("dynamics: {0}")]
    Grid(#[from] SpectralError),
    #[error("dynamics: invalid configuration: {0}")]
    InvalidConfig(String),
}

pub const BLOW_UP_NORM: f64 = 1e8;

/// Physical constants and discretization parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dim: usize,
    pub gamma: f64,
    pub l: f64,
    pub theta: f64,
    pub kappa: f64,
    pub nu: f64,
    pub xi: f64,
    pub lambda: f64,
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    /// Mollification index; 0 selects the exact potential.
    pub n_reg: usize,
    /// Galerkin cutoff on the velocity; 0 disables truncation.
    pub m_galerkin: usize,
    pub seed: u64,
    pub output_dir: String,
    pub snapshot_every: usize,
    pub record_every: usize,
    /// Minimum physicality margin of the random initial `Q`.
    pub init_margin: f64,
    /// RMS of the random initial velocity.
    pub u_amplitude: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            gamma: 1.0,
            l: 0.01,
            theta: 1.0,
            kappa: 1.0,
            nu: 0.1,
            xi: 0.0,
            lambda: 1.0,
            n: 64,
            dt: 5e-4,
            t_final: 1.0,
            n_reg: 16,
            m_galerkin: 0,
            seed: 0,
            output_dir: "output".into(),
            snapshot_every: 0,
            record_every: 10,
            init_margin: 0.1,
            u_amplitude: 0.1,
        }
    }
}

impl SimConfig {
    /// Returns the name of the first violated constraint.
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("gamma", self.gamma),
            ("L", self.l),
            ("theta", self.theta),
            ("kappa", self.kappa),
            ("nu", self.nu),
            ("lambda", self.lambda),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(name.into());
            }
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err("T".into());
        }
        if !self.xi.is_finite() {
            return Err("xi".into());
        }
        if self.dim != 2 && self.dim != 3 {
            return Err("dim".into());
        }
        if self.n < 4 || !self.n.is_power_of_two() {
            return Err("n".into());
        }
        if self.record_every == 0 {
            return Err("record_every".into());
        }
        let d = self.dim as f64;
        if !(self.init_margin > 0.0 && self.init_margin <= 1.0 / d) {
            return Err("init_margin".into());
        }
        if !(self.u_amplitude >= 0.0 && self.u_amplitude.is_finite()) {
            return Err("u_amplitude".into());
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Grid values of `Q` (one channel per stored component) and `u`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub q: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
}

impl State {
    pub fn rest(grid: &Grid) -> Self {
        let d = grid.dim();
        Self {
            t: 0.0,
            q: vec![vec![0.0; grid.len()]; n_components(d)],
            u: vec![vec![0.0; grid.len()]; d],
        }
    }

    pub fn homogeneous(grid: &Grid, q0: &Sym0Matrix) -> Self {
        let mut s = Self::rest(grid);
        for (ch, &c) in s.q.iter_mut().zip(q0.components()) {
            ch.iter_mut().for_each(|v| *v = c);
        }
        s
    }

    /// `u = a (sin kx cos ky, −cos kx sin ky)` with `k = 2/Λ`, `Q = 0`.
    pub fn taylor_green(grid: &Grid, amplitude: f64) -> Self {
        assert_eq!(grid.dim(), 2);
        let mut s = Self::rest(grid);
        let k = 2.0 / grid.lambda();
        for idx in 0..grid.len() {
            let x = grid.point(idx);
            s.u[0][idx] = amplitude * (k * x[0]).sin() * (k * x[1]).cos();
            s.u[1][idx] = -amplitude * (k * x[0]).cos() * (k * x[1]).sin();
        }
        s
    }

    pub fn q_at(&self, dim: usize, idx: usize) -> Sym0Matrix {
        let c: Vec<f64> = self.q.iter().map(|ch| ch[idx]).collect();
        Sym0Matrix::from_components(dim, &c)
    }

    /// Leray-projects `u` (and applies the Galerkin cutoff when `m > 0`).
    /// `Q` needs no projection because it is stored in Sym0 components.
    pub fn project(&mut self, grid: &Grid, m_galerkin: usize) {
        let mut uh = grid.forward_field(&self.u);
        grid.leray_project(&mut uh);
        if m_galerkin > 0 {
            grid.galerkin_project(&mut uh, m_galerkin);
        }
        self.u = grid.inverse_field(&uh);
    }

    pub fn min_margin(&self, dim: usize) -> f64 {
        (0..self.q[0].len())
            .map(|i| physicality_margin(&self.q_at(dim, i)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.q
            .iter()
            .chain(self.u.iter())
            .flatten()
            .fold(0.0f64, |a, v| if v.is_nan() { f64::INFINITY } else { a.max(v.abs()) })
    }
}

type Modes = Vec<([i64; 3], Complex64)>;

fn random_modes(dim: usize, rng: &mut ChaCha8Rng, kmax: i64) -> Modes {
    let side = (2 * kmax + 1) as usize;
    (0..side.pow(dim as u32))
        .map(|flat| {
            let mut j = [0i64; 3];
            let mut rest = flat;
            for a in (0..dim).rev() {
                j[a] = (rest % side) as i64 - kmax;
                rest /= side;
            }
            let j2: i64 = j.iter().map(|v| v * v).sum();
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            (j, z / (1.0 + j2 as f64))
        })
        .collect()
}

fn materialize(grid: &Grid, modes: &Modes) -> Vec<f64> {
    let mut c = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (j, z) in modes {
        if let Some(idx) = grid.index_of_mode(j) {
            c[idx] = *z;
        }
    }
    // the real part of the inverse is the field of the Hermitian part
    grid.inverse(&c)
}

/// Random band-limited data (`|j| ≤ 4`): `Q` scaled so that its minimum
/// margin equals `config.init_margin`, `u` divergence-free with RMS
/// `config.u_amplitude`. The same seed gives the same continuum fields on
/// every grid; the margin is measured on a fixed reference grid.
pub fn random_initial_state(config: &SimConfig, grid: &Grid) -> State {
    let d = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let q_modes: Vec<Modes> = (0..n_components(d)).map(|_| random_modes(d, &mut rng, 4)).collect();
    let u_modes: Vec<Modes> = (0..d).map(|_| random_modes(d, &mut rng, 4)).collect();
    let mut state = State::rest(grid);
    for (ch, m) in state.q.iter_mut().zip(&q_modes) {
        *ch = materialize(grid, m);
    }
    for (ch, m) in state.u.iter_mut().zip(&u_modes) {
        *ch = materialize(grid, m);
    }
    state.project(grid, config.m_galerkin);

    let ref_n = grid.n().max(if d == 2 { 128 } else { 32 });
    let reference = Grid::new(d, ref_n, grid.lambda()).expect("reference grid");
    let base: Vec<Vec<f64>> = q_modes.iter().map(|m| materialize(&reference, m)).collect();
    let margin_at = |s: f64| {
        (0..reference.len())
            .map(|i| {
                let c: Vec<f64> = base.iter().map(|ch| s * ch[i]).collect();
                physicality_margin(&Sym0Matrix::from_components(d, &c))
            })
            .fold(f64::INFINITY, f64::min)
    };
    // margin is nonincreasing in the scale, equal to 1/d at zero
    let target = config.init_margin;
    let (mut lo, mut hi) = (0.0, 1.0);
    while margin_at(hi) > target {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if margin_at(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    for ch in state.q.iter_mut() {
        ch.iter_mut().for_each(|v| *v *= s);
    }

    let rms = (state.u.iter().flatten().map(|v| v * v).sum::<f64>() / grid.len() as f64).sqrt();
    if rms > 0.0 {
        let f = config.u_amplitude / rms;
        state.u.iter_mut().flatten().for_each(|v| *v *= f);
    }
    state
}

fn antisym_sym(dim: usize, gradu: &Mat) -> (Mat, Mat) {
    let mut w = ZERO_MAT;
    let mut s = ZERO_MAT;
    for i in 0..dim {
        for j in 0..dim {
            w[i][j] = 0.5 * (gradu[i][j] - gradu[j][i]);
            s[i][j] = 0.5 * (gradu[i][j] + gradu[j][i]);
        }
    }
    (w, s)
}

fn q_prime(q: &Sym0Matrix) -> Mat {
    let d = q.dim();
    let mut m = q.to_mat();
    for (i, row) in m.iter_mut().enumerate().take(d) {
        row[i] += 1.0 / d as f64;
    }
    m
}

/// Full matrix `(D₀+ξD)Q′ − Q′(D₀−ξD) − 2ξQ′ tr[Q∇u]` with `Q′ = Q + I/d`.
pub fn tumbling_matrix(q: &Sym0Matrix, gradu: &Mat, xi: f64) -> Mat {
    let d = q.dim();
    let (w, s) = antisym_sym(d, gradu);
    let qp = q_prime(q);
    let mut left = ZERO_MAT;
    let mut right = ZERO_MAT;
    for i in 0..d {
        for j in 0..d {
            left[i][j] = w[i][j] + xi * s[i][j];
            right[i][j] = w[i][j] - xi * s[i][j];
        }
    }
    let a = matmul(d, &left, &qp);
    let b = matmul(d, &qp, &right);
    let tr = trace(d, &matmul(d, &q.to_mat(), gradu));
    let mut out = ZERO_MAT;
    for i in 0..d {
        for j in 0..d {
            out[i][j] = a[i][j] - b[i][j] - 2.0 * xi * qp[i][j] * tr;
        }
    }
    out
}

pub fn tumbling_s(q: &Sym0Matrix, gradu: &Mat, xi: f64) -> Sym0Matrix {
    trace_free(q.dim(), &tumbling_matrix(q, gradu, xi))
}

/// `−ξ(Q′H + HQ′) + 2ξQ′ tr[QH] − L tr[∂ᵢQ ∂ⱼQ]`; `grad_q[a]` is `∂_a Q`.
pub fn stress_tau(q: &Sym0Matrix, h: &Sym0Matrix, grad_q: &[Sym0Matrix], xi: f64, l: f64) -> Mat {
    let d = q.dim();
    let qp = q_prime(q);
    let hm = h.to_mat();
    let a = matmul(d, &qp, &hm);
    let b = matmul(d, &hm, &qp);
    let tr_qh = q.dot(h);
    let mut out = ZERO_MAT;
    for i in 0..d {
        for j in 0..d {
            let elastic = frob_dot_components(d, grad_q[i].components(), grad_q[j].components());
            out[i][j] = -xi * (a[i][j] + b[i][j]) + 2.0 * xi * qp[i][j] * tr_qh - l * elastic;
        }
    }
    out
}

/// `QH − HQ`.
pub fn stress_sigma(q: &Sym0Matrix, h: &Sym0Matrix) -> Mat {
    let d = q.dim();
    let (qm, hm) = (q.to_mat(), h.to_mat());
    let a = matmul(d, &qm, &hm);
    let b = matmul(d, &hm, &qm);
    let mut out = ZERO_MAT;
    for i in 0..d {
        for j in 0..d {
            out[i][j] = a[i][j] - b[i][j];
        }
    }
    out
}

/// Pointwise physical-space quantities derived from a state.
pub struct Derived {
    pub grad_q: Vec<Vec<Vec<f64>>>,
    pub lap_q: Vec<Vec<f64>>,
    /// `grad_u[i][j] = ∂_j u_i`.
    pub grad_u: Vec<Vec<Vec<f64>>>,
    pub psi: Vec<f64>,
    pub dpsi: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
}

impl Derived {
    pub fn sym0(&self, field: &[Vec<f64>], dim: usize, idx: usize) -> Sym0Matrix {
        let c: Vec<f64> = field.iter().map(|ch| ch[idx]).collect();
        Sym0Matrix::from_components(dim, &c)
    }

    pub fn gradu_at(&self, dim: usize, idx: usize) -> Mat {
        let mut m = ZERO_MAT;
        for i in 0..dim {
            for j in 0..dim {
                m[i][j] = self.grad_u[i][j][idx];
            }
        }
        m
    }

    pub fn grad_q_at(&self, dim: usize, idx: usize) -> Vec<Sym0Matrix> {
        (0..dim).map(|a| self.sym0(&self.grad_q[a], dim, idx)).collect()
    }
}

/// Evaluates the potential at every grid point.
pub fn potential_field(
    potential: &BulkPotential,
    dim: usize,
    q: &[Vec<f64>],
    t: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), DynamicsError> {
    let len = q[0].len();
    let nc = n_components(dim);
    let evals: Vec<Result<(f64, Sym0Matrix), PotentialError>> = (0..len)
        .into_par_iter()
        .map(|idx| {
            let c: Vec<f64> = q.iter().map(|ch| ch[idx]).collect();
            potential.eval(&Sym0Matrix::from_components(dim, &c))
        })
        .collect();
    let mut psi = vec![0.0; len];
    let mut dpsi = vec![vec![0.0; len]; nc];
    for (idx, e) in evals.into_iter().enumerate() {
        let (v, g) = e.map_err(|source| DynamicsError::Potential { t, index: idx, source })?;
        psi[idx] = v;
        for c in 0..nc {
            dpsi[c][idx] = g.components()[c];
        }
    }
    Ok((psi, dpsi))
}

/// Spatial operator, potential and integrating factors for one configuration.
pub struct Dynamics {
    pub config: SimConfig,
    pub grid: Grid,
    pub potential: BulkPotential,
    galerkin: Option<Vec<bool>>,
    decay_q: Vec<f64>,
    decay_u: Vec<f64>,
}

impl Dynamics {
    pub fn new(config: SimConfig) -> Result<Self, DynamicsError> {
        config.validate().map_err(DynamicsError::InvalidConfig)?;
        let potential = BulkPotential::for_index(config.dim, config.n_reg).map_err(|source| {
            DynamicsError::Potential {
                t: 0.0,
                index: 0,
                source,
            }
        })?;
        Self::with_potential(config, potential)
    }

    pub fn with_potential(config: SimConfig, potential: BulkPotential) -> Result<Self, DynamicsError> {
        config.validate().map_err(DynamicsError::InvalidConfig)?;
        let grid = Grid::new(config.dim, config.n, config.lambda)?;
        let galerkin = (config.m_galerkin > 0).then(|| grid.galerkin_mask(config.m_galerkin));
        let decay_q = (0..grid.len())
            .map(|i| (-config.gamma * config.l * grid.k_squared(i) * config.dt).exp())
            .collect();
        let decay_u = (0..grid.len())
            .map(|i| (-config.nu * grid.k_squared(i) * config.dt).exp())
            .collect();
        Ok(Self {
            config,
            grid,
            potential,
            galerkin,
            decay_q,
            decay_u,
        })
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    /// Gradients, Laplacian, potential and `H = LΔQ − θ∂ψ + κQ`.
    pub fn derive(&self, state: &State) -> Result<Derived, DynamicsError> {
        let qh: Vec<_> = state.q.iter().map(|c| self.grid.forward(c)).collect();
        let uh: Vec<_> = state.u.iter().map(|c| self.grid.forward(c)).collect();
        self.derive_spectral(&state.q, &qh, &uh, state.t)
    }

    fn derive_spectral(
        &self,
        q: &[Vec<f64>],
        qh: &[Vec<Complex64>],
        uh: &[Vec<Complex64>],
        t: f64,
    ) -> Result<Derived, DynamicsError> {
        let g = &self.grid;
        let d = self.dim();
        let cfg = &self.config;
        let grad_q: Vec<Vec<Vec<f64>>> = (0..d)
            .map(|a| qh.iter().map(|c| g.inverse(&g.derivative(c, a, 1))).collect())
            .collect();
        let lap_q: Vec<Vec<f64>> = qh.iter().map(|c| g.inverse(&g.laplacian(c))).collect();
        let grad_u: Vec<Vec<Vec<f64>>> = (0..d)
            .map(|i| (0..d).map(|j| g.inverse(&g.derivative(&uh[i], j, 1))).collect())
            .collect();
        let (psi, dpsi) = potential_field(&self.potential, d, q, t)?;
        let h: Vec<Vec<f64>> = (0..q.len())
            .map(|c| {
                (0..g.len())
                    .map(|i| cfg.l * lap_q[c][i] - cfg.theta * dpsi[c][i] + cfg.kappa * q[c][i])
                    .collect()
            })
            .collect();
        Ok(Derived {
            grad_q,
            lap_q,
            grad_u,
            psi,
            dpsi,
            h,
        })
    }

    /// Explicit right-hand side in spectral form. Diffusion `ΓLΔQ` and
    /// `νΔu` are excluded; the integrator treats them exactly.
    fn nonlinear(
        &self,
        qh: &[Vec<Complex64>],
        uh: &[Vec<Complex64>],
        t: f64,
    ) -> Result<(Vec<Vec<Complex64>>, SpectralField), DynamicsError> {
        let g = &self.grid;
        let d = self.dim();
        let nc = n_components(d);
        let cfg = &self.config;
        let q: Vec<Vec<f64>> = qh.iter().map(|c| g.inverse(c)).collect();
        let u: Vec<Vec<f64>> = uh.iter().map(|c| g.inverse(c)).collect();
        let der = self.derive_spectral(&q, qh, uh, t)?;

        let len = g.len();
        let mut rq = vec![vec![0.0; len]; nc];
        let mut stress = vec![vec![vec![0.0; len]; d]; d];
        let mut adv_u = vec![vec![0.0; len]; d];
        for idx in 0..len {
            let qm = der.sym0(&q, d, idx);
            let gu = der.gradu_at(d, idx);
            let h = der.sym0(&der.h, d, idx);
            let gq = der.grad_q_at(d, idx);
            let s = tumbling_s(&qm, &gu, cfg.xi);
            for c in 0..nc {
                let adv: f64 = (0..d).map(|a| u[a][idx] * der.grad_q[a][c][idx]).sum();
                let bulk = -cfg.theta * der.dpsi[c][idx] + cfg.kappa * q[c][idx];
                rq[c][idx] = -adv + s.components()[c] + cfg.gamma * bulk;
            }
            let total = mat_add(d, &stress_tau(&qm, &h, &gq, cfg.xi, cfg.l), &stress_sigma(&qm, &h));
            for i in 0..d {
                for j in 0..d {
                    stress[i][j][idx] = total[i][j];
                }
                adv_u[i][idx] = (0..d).map(|j| u[j][idx] * der.grad_u[i][j][idx]).sum();
            }
        }

        let mut rq_hat: Vec<Vec<Complex64>> = rq.iter().map(|c| g.forward(c)).collect();
        for c in rq_hat.iter_mut() {
            g.dealias(c);
        }
        let mut ru = SpectralField::zeros(g, d);
        for i in 0..d {
            let mut acc: Vec<Complex64> = g.forward(&adv_u[i]).iter().map(|z| -z).collect();
            for j in 0..d {
                let dt = g.derivative(&g.forward(&stress[i][j]), j, 1);
                for (a, b) in acc.iter_mut().zip(dt) {
                    *a += b;
                }
            }
            g.dealias(&mut acc);
            ru.channels[i] = acc;
        }
        g.leray_project(&mut ru);
        if let Some(mask) = &self.galerkin {
            apply_mask(&mut ru, mask);
        }
        Ok((rq_hat, ru))
    }

    /// Full time derivatives `(∂Q/∂t, ∂u/∂t)` on the grid, diffusion included.
    pub fn rhs(&self, state: &State) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), DynamicsError> {
        let g = &self.grid;
        let cfg = &self.config;
        let qh: Vec<_> = state.q.iter().map(|c| g.forward(c)).collect();
        let uh: Vec<_> = state.u.iter().map(|c| g.forward(c)).collect();
        let (nq, nu) = self.nonlinear(&qh, &uh, state.t)?;
        let dq = nq
            .iter()
            .zip(&qh)
            .map(|(n, q)| {
                let lap = g.laplacian(q);
                let v: Vec<Complex64> = n.iter().zip(lap).map(|(a, b)| a + b * (cfg.gamma * cfg.l)).collect();
                g.inverse(&v)
            })
            .collect();
        let du = nu
            .channels
            .iter()
            .zip(&uh)
            .map(|(n, u)| {
                let lap = g.laplacian(u);
                let v: Vec<Complex64> = n.iter().zip(lap).map(|(a, b)| a + b * cfg.nu).collect();
                g.inverse(&v)
            })
            .collect();
        Ok((dq, du))
    }

    /// One integrating-factor Heun step.
    pub fn step(&self, state: &State) -> Result<State, DynamicsError> {
        let g = &self.grid;
        let dt = self.config.dt;
        let qh: Vec<_> = state.q.iter().map(|c| g.forward(c)).collect();
        let uh: Vec<_> = state.u.iter().map(|c| g.forward(c)).collect();
        let (nq0, nu0) = self.nonlinear(&qh, &uh, state.t)?;

        let predict = |v: &[Vec<Complex64>], n: &[Vec<Complex64>], e: &[f64]| -> Vec<Vec<Complex64>> {
            v.iter()
                .zip(n)
                .map(|(vc, nc)| {
                    vc.iter()
                        .zip(nc)
                        .zip(e)
                        .map(|((a, b), f)| (a + b * dt) * f)
                        .collect()
                })
                .collect()
        };
        let q1 = predict(&qh, &nq0, &self.decay_q);
        let u1 = predict(&uh, &nu0.channels, &self.decay_u);
        let (nq1, nu1) = self.nonlinear(&q1, &u1, state.t + dt)?;

        let correct = |v: &[Vec<Complex64>], n0: &[Vec<Complex64>], n1: &[Vec<Complex64>], e: &[f64]| -> Vec<Vec<Complex64>> {
            v.iter()
                .zip(n0)
                .zip(n1)
                .map(|((vc, a), b)| {
                    vc.iter()
                        .zip(a)
                        .zip(b)
                        .zip(e)
                        .map(|(((v, a), b), f)| v * f + (a * f + b) * (0.5 * dt))
                        .collect()
                })
                .collect()
        };
        let qn = correct(&qh, &nq0, &nq1, &self.decay_q);
        let mut un = SpectralField {
            channels: correct(&uh, &nu0.channels, &nu1.channels, &self.decay_u),
        };
        g.leray_project(&mut un);
        if let Some(mask) = &self.galerkin {
            apply_mask(&mut un, mask);
        }
        let next = State {
            t: state.t + dt,
            q: qn.iter().map(|c| g.inverse(c)).collect(),
            u: g.inverse_field(&un),
        };
        let norm = next.max_abs();
        if norm > BLOW_UP_NORM {
            return Err(DynamicsError::BlowUp { t: next.t, norm });
        }
        Ok(next)
    }

    /// Steps until `t_final`, calling `observe(state, step)` at step 0 and
    /// after every step. A state restarted at `t > 0` resumes the schedule.
    pub fn run<F>(&self, initial: State, mut observe: F) -> Result<State, DynamicsError>
    where
        F: FnMut(&State, usize) -> Result<(), DynamicsError>,
    {
        let total = self.config.n_steps();
        let start = (initial.t / self.config.dt).round() as usize;
        let mut state = initial;
        observe(&state, start)?;
        for k in start..total {
            state = self.step(&state)?;
            observe(&state, k + 1)?;
        }
        Ok(state)
    }
}

/// `∇u` full matrix at a point for a single homogeneous gradient, used by
/// the tests and the Python bindings.
pub fn constant_gradient(dim: usize, entries: &[f64]) -> Mat {
    let mut m = ZERO_MAT;
    for i in 0..dim {
        for j in 0..dim {
            m[i][j] = entries[i * dim + j];
        }
    }
    m
}
