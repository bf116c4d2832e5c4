//! Scalar advection-diffusion solvers sharing the simulator's velocity, the
//! comparison certificate `ψ_N(Q) ≤ G + Hc`, and the heat-decay series.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{potential_field, DynamicsError, SimConfig, State, BLOW_UP_NORM};
use crate::potential::{BulkPotential, PotentialError};
use crate::spectral::Grid;
use crate::tensor::frob_dot_components;

#[derive(Debug, Error)]
pub enum ComparisonError {
    #[error("comparison: trajectory does not match configuration: {0}")]
    ConfigMismatch(String),
    #[error("comparison: initial data has nonzero mean {mean:e}")]
    NonZeroMean { mean: f64 },
    #[error("comparison: certificate requires xi = 0, got {xi}")]
    XiNonZero { xi: f64 },
    #[error("comparison: certificate requires N >= 1")]
    ExactPotential,
    #[error("comparison: blow-up at t = {t}")]
    BlowUp { t: f64 },
    #[error("comparison: {0}")]
    Potential(#[from] PotentialError),
    #[error("comparison: {0}")]
    Dynamics(#[from] DynamicsError),
}

/// Integrating-factor Heun stepper for `∂g/∂t + (u·∇)g − ΓLΔg = s`.
pub struct ScalarSolver {
    grid: Grid,
    dt: f64,
    decay: Vec<f64>,
}

impl ScalarSolver {
    pub fn new(grid: &Grid, dt: f64, gamma_l: f64) -> Self {
        let decay = (0..grid.len()).map(|i| (-gamma_l * grid.k_squared(i) * dt).exp()).collect();
        Self {
            grid: grid.clone(),
            dt,
            decay,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn explicit(&self, gh: &[Complex64], u: &[Vec<f64>], source: Option<&[f64]>) -> Vec<Complex64> {
        let g = &self.grid;
        let mut r = source.map_or_else(|| vec![0.0; g.len()], |s| s.to_vec());
        for (a, ua) in u.iter().enumerate() {
            let da = g.inverse(&g.derivative(gh, a, 1));
            for ((ri, ui), di) in r.iter_mut().zip(ua).zip(da) {
                *ri -= ui * di;
            }
        }
        let mut rh = g.forward(&r);
        g.dealias(&mut rh);
        rh
    }

    /// One step with velocity and source given at both ends of the step.
    pub fn step(
        &self,
        values: &[f64],
        u: (&[Vec<f64>], &[Vec<f64>]),
        source: (Option<&[f64]>, Option<&[f64]>),
    ) -> Result<Vec<f64>, ComparisonError> {
        let g = &self.grid;
        let dt = self.dt;
        let gh = g.forward(values);
        let n0 = self.explicit(&gh, u.0, source.0);
        let g1: Vec<Complex64> = gh.iter().zip(&n0).zip(&self.decay).map(|((v, n), e)| (v + n * dt) * e).collect();
        let n1 = self.explicit(&g1, u.1, source.1);
        let next: Vec<Complex64> = gh
            .iter()
            .zip(&n0)
            .zip(&n1)
            .zip(&self.decay)
            .map(|(((v, a), b), e)| v * e + (a * e + b) * (0.5 * dt))
            .collect();
        let out = g.inverse(&next);
        if out.iter().any(|v| !(v.abs() <= BLOW_UP_NORM)) {
            return Err(ComparisonError::BlowUp { t: f64::NAN });
        }
        Ok(out)
    }
}

/// One step with a frozen velocity and source.
pub fn advect_diffuse_step(
    grid: &Grid,
    g: &[f64],
    u: &[Vec<f64>],
    source: Option<&[f64]>,
    dt: f64,
    gamma_l: f64,
) -> Result<Vec<f64>, ComparisonError> {
    ScalarSolver::new(grid, dt, gamma_l).step(g, (u, u), (source, source))
}

pub fn mean(grid: &Grid, g: &[f64]) -> f64 {
    grid.integrate(g) / grid.volume()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateRow {
    pub t: f64,
    /// `sup_x (ψ_N(Q) − G − Hc)`.
    pub defect: f64,
    pub psi_sup: f64,
    pub psi_abs_sup: f64,
    pub g_sup: f64,
    pub hc_sup: f64,
    pub hc_abs_sup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateReport {
    pub rows: Vec<CertificateRow>,
    pub mean_psi0: f64,
    pub source_coefficient: f64,
}

impl CertificateReport {
    pub fn max_defect(&self) -> f64 {
        self.rows.iter().map(|r| r.defect).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest defect over checkpoints after the initial one, floored at 0.
    pub fn max_positive_defect_after_start(&self) -> f64 {
        self.rows.iter().skip(1).map(|r| r.defect).fold(0.0, f64::max)
    }

    pub fn psi_abs_sup(&self) -> f64 {
        self.rows.iter().map(|r| r.psi_abs_sup).fold(0.0, f64::max)
    }

    pub fn tolerance(&self) -> f64 {
        5e-3 * (1.0 + self.psi_abs_sup())
    }

    pub fn passes(&self) -> bool {
        self.max_defect() <= self.tolerance()
    }

    /// `‖Hc(t)‖∞ ≤ |mean ψ_N(Q₀)|·e^T + (Γκ²/2θ)·e^T`, slack `tol`.
    pub fn hc_bound_holds(&self, t_final: f64, tol: f64) -> bool {
        let bound = (self.mean_psi0.abs() + self.source_coefficient) * t_final.exp() + tol;
        self.rows.iter().all(|r| r.hc_abs_sup <= bound)
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("t,defect,psi_sup,G_sup,Hc_sup\n");
        for r in &self.rows {
            s.push_str(&format!("{:e},{:e},{:e},{:e},{:e}\n", r.t, r.defect, r.psi_sup, r.g_sup, r.hc_sup));
        }
        s
    }
}

/// Co-evolves `G` (zero source, data `ψ_N(Q₀)` minus its mean) and `Hc`
/// (source `Γκ²/(2θ)·tr[Q²]`, data the mean of `ψ_N(Q₀)`) along a `Q/u`
/// trajectory.
pub struct Certifier {
    config: SimConfig,
    grid: Grid,
    potential: BulkPotential,
    solver: ScalarSolver,
    g: Vec<f64>,
    hc: Vec<f64>,
    coef: f64,
    mean0: f64,
    rows: Vec<CertificateRow>,
}

fn tr_q2(dim: usize, q: &[Vec<f64>]) -> Vec<f64> {
    (0..q[0].len())
        .map(|i| {
            let c: Vec<f64> = q.iter().map(|ch| ch[i]).collect();
            frob_dot_components(dim, &c, &c)
        })
        .collect()
}

impl Certifier {
    pub fn new(config: &SimConfig, grid: &Grid, initial: &State, n_reg: usize) -> Result<Self, ComparisonError> {
        if config.xi != 0.0 {
            return Err(ComparisonError::XiNonZero { xi: config.xi });
        }
        if n_reg == 0 {
            return Err(ComparisonError::ExactPotential);
        }
        if grid.dim() != config.dim || grid.n() != config.n || grid.lambda() != config.lambda {
            return Err(ComparisonError::ConfigMismatch("grid".into()));
        }
        let potential = BulkPotential::for_index(config.dim, n_reg)?;
        Self::with_potential(config, grid, initial, potential)
    }

    pub fn with_potential(
        config: &SimConfig,
        grid: &Grid,
        initial: &State,
        potential: BulkPotential,
    ) -> Result<Self, ComparisonError> {
        check_shape(config, grid, initial)?;
        let (psi, _) = potential_field(&potential, config.dim, &initial.q, initial.t)?;
        let mean0 = mean(grid, &psi);
        let mut c = Self {
            config: config.clone(),
            grid: grid.clone(),
            solver: ScalarSolver::new(grid, config.dt, config.gamma * config.l),
            potential,
            g: psi.iter().map(|p| p - mean0).collect(),
            hc: vec![mean0; grid.len()],
            coef: config.gamma * config.kappa * config.kappa / (2.0 * config.theta),
            mean0,
            rows: Vec::new(),
        };
        c.checkpoint(initial)?;
        Ok(c)
    }

    /// Advances `G` and `Hc` across one simulator step `prev → next`.
    pub fn advance(&mut self, prev: &State, next: &State) -> Result<(), ComparisonError> {
        let d = self.config.dim;
        let (s0, s1) = (self.source(&prev.q), self.source(&next.q));
        let t = next.t;
        let blow = |e| match e {
            ComparisonError::BlowUp { .. } => ComparisonError::BlowUp { t },
            e => e,
        };
        self.g = self.solver.step(&self.g, (&prev.u, &next.u), (None, None)).map_err(blow)?;
        self.hc = self
            .solver
            .step(&self.hc, (&prev.u, &next.u), (Some(&s0), Some(&s1)))
            .map_err(blow)?;
        debug_assert_eq!(prev.q.len(), crate::tensor::n_components(d));
        Ok(())
    }

    fn source(&self, q: &[Vec<f64>]) -> Vec<f64> {
        tr_q2(self.config.dim, q).into_iter().map(|v| self.coef * v).collect()
    }

    /// Advances across a stored interval `a → b` by linear interpolation
    /// in time at the configured step.
    pub fn advance_interval(&mut self, a: &State, b: &State) -> Result<(), ComparisonError> {
        let steps = ((b.t - a.t) / self.config.dt).round() as usize;
        let lerp = |s: f64| State {
            t: a.t + s * (b.t - a.t),
            q: lerp_fields(&a.q, &b.q, s),
            u: lerp_fields(&a.u, &b.u, s),
        };
        let mut prev = a.clone();
        for k in 1..=steps {
            let next = if k == steps { b.clone() } else { lerp(k as f64 / steps as f64) };
            self.advance(&prev, &next)?;
            prev = next;
        }
        Ok(())
    }

    pub fn checkpoint(&mut self, state: &State) -> Result<CertificateRow, ComparisonError> {
        check_shape(&self.config, &self.grid, state)?;
        let (psi, _) = potential_field(&self.potential, self.config.dim, &state.q, state.t)?;
        let sup = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let abs_sup = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let defect: Vec<f64> = psi.iter().zip(&self.g).zip(&self.hc).map(|((p, g), h)| p - g - h).collect();
        let row = CertificateRow {
            t: state.t,
            defect: sup(&defect),
            psi_sup: sup(&psi),
            psi_abs_sup: abs_sup(&psi),
            g_sup: sup(&self.g),
            hc_sup: sup(&self.hc),
            hc_abs_sup: abs_sup(&self.hc),
        };
        self.rows.push(row.clone());
        Ok(row)
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn hc(&self) -> &[f64] {
        &self.hc
    }

    pub fn report(&self) -> CertificateReport {
        CertificateReport {
            rows: self.rows.clone(),
            mean_psi0: self.mean0,
            source_coefficient: self.coef,
        }
    }
}

fn lerp_fields(a: &[Vec<f64>], b: &[Vec<f64>], s: f64) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (1.0 - s) * p + s * q).collect())
        .collect()
}

fn check_shape(config: &SimConfig, grid: &Grid, s: &State) -> Result<(), ComparisonError> {
    let nc = crate::tensor::n_components(config.dim);
    if s.q.len() != nc || s.u.len() != config.dim || s.q.iter().chain(&s.u).any(|c| c.len() != grid.len()) {
        return Err(ComparisonError::ConfigMismatch("state shape".into()));
    }
    Ok(())
}

/// Runs the certificate along a stored trajectory (states in time order).
pub fn certificate(
    config: &SimConfig,
    grid: &Grid,
    trajectory: &[State],
    n_reg: usize,
) -> Result<CertificateReport, ComparisonError> {
    let first = trajectory
        .first()
        .ok_or_else(|| ComparisonError::ConfigMismatch("empty trajectory".into()))?;
    let mut c = Certifier::new(config, grid, first, n_reg)?;
    for w in trajectory.windows(2) {
        c.advance_interval(&w[0], &w[1])?;
        c.checkpoint(&w[1])?;
    }
    Ok(c.report())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecaySeries {
    pub times: Vec<f64>,
    /// `‖g(t)‖∞ · t^{d/2+γ} / ‖g₀‖₁`.
    pub values: Vec<f64>,
}

impl DecaySeries {
    pub fn sup(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// Evolves zero-mean `g0` under a frozen velocity and samples the decay
/// series at `times` (ascending, multiples of `dt`).
pub fn heat_decay_check(
    grid: &Grid,
    g0: &[f64],
    u: &[Vec<f64>],
    gamma_l: f64,
    dt: f64,
    times: &[f64],
    gamma: f64,
) -> Result<DecaySeries, ComparisonError> {
    let m = mean(grid, g0);
    if m.abs() > 1e-10 {
        return Err(ComparisonError::NonZeroMean { mean: m });
    }
    let l1 = grid.integrate(&g0.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let solver = ScalarSolver::new(grid, dt, gamma_l);
    let p = grid.dim() as f64 / 2.0 + gamma;
    let mut g = g0.to_vec();
    let mut t = 0.0;
    let mut step = 0usize;
    let mut values = Vec::with_capacity(times.len());
    for &target in times {
        let until = (target / dt).round() as usize;
        while step < until {
            g = solver
                .step(&g, (u, u), (None, None))
                .map_err(|_| ComparisonError::BlowUp { t })?;
            step += 1;
            t = step as f64 * dt;
        }
        let sup = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        values.push(sup * target.powf(p) / l1);
    }
    Ok(DecaySeries {
        times: times.to_vec(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Dynamics;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: &Grid, rng: &mut ChaCha8Rng, kmax: i64) -> Vec<f64> {
        let mut c = vec![Complex64::new(0.0, 0.0); grid.len()];
        for (idx, z) in c.iter_mut().enumerate() {
            if grid.mode(idx).iter().all(|j| j.abs() <= kmax) {
                *z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        grid.inverse(&c)
    }

    fn random_velocity(grid: &Grid, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let mut s = State::rest(grid);
        for ch in s.u.iter_mut() {
            *ch = random_field(grid, rng, 3);
        }
        s.project(grid, 0);
        s.u
    }

    #[test]
    fn heat_eigenmode_decays_exactly() {
        let grid = Grid::new(2, 16, 1.0).unwrap();
        let k = 2.0 * 3.0 / grid.lambda();
        let g0: Vec<f64> = (0..grid.len()).map(|i| (k * grid.point(i)[0]).cos()).collect();
        let u = State::rest(&grid).u;
        let (dt, gl) = (1e-3, 0.05);
        let mut g = g0.clone();
        for _ in 0..500 {
            g = advect_diffuse_step(&grid, &g, &u, None, dt, gl).unwrap();
        }
        let f = (-gl * k * k * 0.5).exp();
        assert!(g.iter().zip(&g0).all(|(a, b)| (a - f * b).abs() < 1e-8));
    }

    #[test]
    fn constants_are_preserved_and_mean_is_conserved() {
        let grid = Grid::new(2, 16, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_velocity(&grid, &mut rng);
        let c = vec![0.7; grid.len()];
        let out = advect_diffuse_step(&grid, &c, &u, None, 1e-2, 0.1).unwrap();
        assert!(out.iter().all(|v| (v - 0.7).abs() < 1e-14));

        let solver = ScalarSolver::new(&grid, 1e-3, 0.02);
        let mut g = random_field(&grid, &mut rng, 4);
        let m0 = mean(&grid, &g);
        for _ in 0..1000 {
            g = solver.step(&g, (&u, &u), (None, None)).unwrap();
        }
        assert!((mean(&grid, &g) - m0).abs() < 1e-10);
    }

    #[test]
    fn decay_series_cases() {
        let grid = Grid::new(2, 16, 1.0).unwrap();
        let u = State::rest(&grid).u;
        let k = 2.0 / grid.lambda();
        let g0: Vec<f64> = (0..grid.len()).map(|i| (k * grid.point(i)[1]).sin()).collect();
        let times = [0.5, 1.0, 2.0, 4.0];
        let s = heat_decay_check(&grid, &g0, &u, 0.5, 1e-2, &times, 0.5).unwrap();
        assert!(s.values.last().unwrap() < &s.values[1]);
        let g10: Vec<f64> = g0.iter().map(|v| 10.0 * v).collect();
        let s10 = heat_decay_check(&grid, &g10, &u, 0.5, 1e-2, &times, 0.5).unwrap();
        for (a, b) in s.values.iter().zip(&s10.values) {
            assert!((a - b).abs() < 1e-10 * a.abs());
        }
        let shifted: Vec<f64> = g0.iter().map(|v| v + 1e-3).collect();
        assert!(matches!(
            heat_decay_check(&grid, &shifted, &u, 1.0, 1e-2, &times, 0.5),
            Err(ComparisonError::NonZeroMean { .. })
        ));
    }

    #[test]
    fn rest_trajectory_certificate() {
        let cfg = SimConfig {
            n: 8,
            dt: 1e-2,
            t_final: 0.1,
            ..SimConfig::default()
        };
        let dynm = Dynamics::new(cfg.clone()).unwrap();
        let rest = State::rest(&dynm.grid);
        let mut traj = vec![rest.clone()];
        for k in 1..=10 {
            traj.push(State { t: k as f64 * cfg.dt, ..rest.clone() });
        }
        let rep = certificate(&cfg, &dynm.grid, &traj, 16).unwrap();
        assert!(rep.rows.iter().all(|r| r.defect <= 1e-14 && r.g_sup.abs() < 1e-14));
        assert!(rep.hc_bound_holds(cfg.t_final, 1e-3));

        let bad = SimConfig { xi: 0.5, ..cfg.clone() };
        assert!(matches!(certificate(&bad, &dynm.grid, &traj, 16), Err(ComparisonError::XiNonZero { .. })));
        let other = Grid::new(2, 16, 1.0).unwrap();
        assert!(matches!(certificate(&cfg, &other, &traj, 16), Err(ComparisonError::ConfigMismatch(_))));
    }

    #[test]
    fn homogeneous_certificate_reduces_to_scalar_bound() {
        let cfg = SimConfig {
            n: 8,
            dt: 1e-3,
            t_final: 0.2,
            ..SimConfig::default()
        };
        let dynm = Dynamics::new(cfg.clone()).unwrap();
        let q0 = crate::tensor::Sym0Matrix::from_components(2, &[0.3, 0.1]);
        let s0 = State::homogeneous(&dynm.grid, &q0);
        let mut cert = Certifier::new(&cfg, &dynm.grid, &s0, cfg.n_reg).unwrap();
        let mut prev = s0;
        let mut s = prev.clone();
        for _ in 0..cfg.n_steps() {
            s = dynm.step(&s).unwrap();
            cert.advance(&prev, &s).unwrap();
            prev = s.clone();
        }
        let row = cert.checkpoint(&s).unwrap();
        assert!(cert.g().iter().all(|v| v.abs() < 1e-12));
        assert!(row.defect <= 1e-6, "{row:?}");
    }
}
