//! The Ball-Majumdar entropy potential and its regularizations.
//!
//! Everything is computed in the eigenframe of `Q`. With multipliers `μ`
//! fixed to the gauge `Σ μ_i = 0` the potential is the concave dual
//!
//! ```text
//! ψ(λ)   = max_μ  μ·λ − log Z(μ)
//! ψ_J(λ) = max_μ  μ·λ − log Z(μ) − |μ|²/(4J)
//! ```
//!
//! and in both cases the Frobenius gradient is `V diag(μ) Vᵀ`. The Yosida
//! prox has eigenvalues `λ − μ/(2J)`.

use thiserror::Error;

use crate::quadrature::{gauss_legendre, sphere_area, SphereRule};
use crate::tensor::{
    component_gradient, margin_of_eigenvalues, spectrum, Spectrum, Sym0Matrix,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("singular_potential: non-physical input (margin {margin:e})")]
    NonPhysicalInput { margin: f64 },
    #[error("singular_potential: dual Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular_potential: quadrature under-resolved: {0}")]
    QuadratureUnderResolved(String),
}

/// Margin below which the exact potential refuses to evaluate.
pub const EPS_PHYS: f64 = 1e-9;
pub const DEFAULT_TOL: f64 = 1e-11;
pub const MAX_NEWTON: usize = 100;

/// Lagrange multipliers, gauge-fixed to `Σ μ_i = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Multipliers {
    pub dim: usize,
    pub mu: [f64; 3],
}

impl Multipliers {
    pub fn zero(dim: usize) -> Self {
        Self { dim, mu: [0.0; 3] }
    }

    /// Gauge-fixes an arbitrary vector by removing its mean.
    pub fn from_slice(mu: &[f64]) -> Self {
        let dim = mu.len();
        let mean = mu.iter().sum::<f64>() / dim as f64;
        let mut out = [0.0; 3];
        for i in 0..dim {
            out[i] = mu[i] - mean;
        }
        Self { dim, mu: out }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.mu[..self.dim]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialEval {
    pub psi: f64,
    pub grad: Sym0Matrix,
    pub mu: Multipliers,
    pub log_z: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YosidaEval {
    pub value: f64,
    pub prox: Sym0Matrix,
    pub grad: Sym0Matrix,
    pub mu: Multipliers,
}

#[derive(Clone, Copy, Debug)]
struct Moments {
    log_z: f64,
    m: [f64; 3],
    cov: [[f64; 3]; 3],
}

#[derive(Clone, Copy, Debug)]
struct DualSolution {
    mu: [f64; 3],
    log_z: f64,
}

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Orthonormal basis of the sum-zero subspace of `R^d`, as columns.
fn gauge_basis(dim: usize) -> [[f64; 3]; 2] {
    if dim == 2 {
        [[INV_SQRT2, -INV_SQRT2, 0.0], [0.0; 3]]
    } else {
        let s6 = 1.0 / 6f64.sqrt();
        [[INV_SQRT2, -INV_SQRT2, 0.0], [s6, s6, -2.0 * s6]]
    }
}

/// The exact potential on a fixed sphere quadrature.
#[derive(Clone, Debug)]
pub struct BallMajumdar {
    rule: SphereRule,
    tol: f64,
}

impl BallMajumdar {
    pub fn new(dim: usize) -> Self {
        Self::with_rule(SphereRule::default_for(dim))
    }

    pub fn with_rule(rule: SphereRule) -> Self {
        Self {
            rule,
            tol: DEFAULT_TOL,
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.rule.dim
    }

    pub fn rule(&self) -> &SphereRule {
        &self.rule
    }

    /// `log ∫ exp(Σ μ_i ω_i²) dω` and the moments `⟨ω_i²⟩`.
    pub fn partition_and_moments(&self, mu: &[f64]) -> (f64, [f64; 3]) {
        let mut full = [0.0; 3];
        full[..mu.len()].copy_from_slice(mu);
        let mom = self.moments(&full);
        (mom.log_z, mom.m)
    }

    fn moments(&self, mu: &[f64; 3]) -> Moments {
        let mut smax = f64::NEG_INFINITY;
        for s in &self.rule.sq {
            let v = mu[0] * s[0] + mu[1] * s[1] + mu[2] * s[2];
            smax = smax.max(v);
        }
        let mut z = 0.0;
        let mut m = [0.0; 3];
        let mut c = [[0.0; 3]; 3];
        for (s, &w) in self.rule.sq.iter().zip(&self.rule.weights) {
            let v = mu[0] * s[0] + mu[1] * s[1] + mu[2] * s[2];
            let e = w * (v - smax).exp();
            z += e;
            for i in 0..3 {
                m[i] += e * s[i];
                for j in i..3 {
                    c[i][j] += e * s[i] * s[j];
                }
            }
        }
        for i in 0..3 {
            m[i] /= z;
        }
        for i in 0..3 {
            for j in i..3 {
                c[i][j] = c[i][j] / z - m[i] * m[j];
                c[j][i] = c[i][j];
            }
        }
        Moments {
            log_z: smax + z.ln(),
            m,
            cov: c,
        }
    }

    /// Deterministic starting point from the large-multiplier asymptotics
    /// `⟨ω_i²⟩ ≈ 1/(2|μ_i|)`, with the target moments kept away from zero.
    fn initial_guess(&self, lam: &[f64; 3], rho: f64) -> [f64; 3] {
        let d = self.dim();
        let inv_d = 1.0 / d as f64;
        let mut m0 = [0.0; 3];
        let mut sum = 0.0;
        for i in 0..d {
            m0[i] = (lam[i] + inv_d).max(1e-3);
            sum += m0[i];
        }
        let mut mu = [0.0; 3];
        for i in 0..d {
            m0[i] /= sum;
            mu[i] = -0.5 / m0[i];
            if rho > 0.0 {
                mu[i] += (lam[i] + inv_d - m0[i]) / rho;
            }
        }
        let g = Multipliers::from_slice(&mu[..d]);
        g.mu
    }

    /// Maximizes `μ·λ − log Z(μ) − ρ|μ|²/2` over the sum-zero subspace.
    fn dual_solve(
        &self,
        lam: &[f64; 3],
        rho: f64,
        init: [f64; 3],
        tol: f64,
    ) -> Result<DualSolution, PotentialError> {
        let d = self.dim();
        let k = d - 1;
        let basis = gauge_basis(d);
        let inv_d = 1.0 / d as f64;
        let to_mu = |y: &[f64; 2]| {
            let mut mu = [0.0; 3];
            for a in 0..k {
                for i in 0..d {
                    mu[i] += basis[a][i] * y[a];
                }
            }
            mu
        };
        let objective = |mu: &[f64; 3], mom: &Moments| {
            let mut dot = 0.0;
            let mut nrm = 0.0;
            for i in 0..d {
                dot += mu[i] * lam[i];
                nrm += mu[i] * mu[i];
            }
            dot - mom.log_z - 0.5 * rho * nrm
        };
        let residual_vec = |mu: &[f64; 3], mom: &Moments| {
            let mut v = [0.0; 3];
            for i in 0..d {
                v[i] = lam[i] + inv_d - mom.m[i] - rho * mu[i];
            }
            v
        };
        let inf_norm = |v: &[f64; 3]| v[..d].iter().fold(0.0f64, |a, x| a.max(x.abs()));

        let mut y = [0.0; 2];
        for a in 0..k {
            y[a] = (0..d).map(|i| basis[a][i] * init[i]).sum();
        }
        let mut mu = to_mu(&y);
        let mut mom = self.moments(&mu);
        let mut phi = objective(&mu, &mom);
        let mut v = residual_vec(&mu, &mom);
        let mut resid = inf_norm(&v);

        for _ in 0..MAX_NEWTON {
            if resid <= tol {
                return Ok(DualSolution {
                    mu,
                    log_z: mom.log_z,
                });
            }
            let mut g = [0.0; 2];
            let mut h = [[0.0; 2]; 2];
            for a in 0..k {
                g[a] = (0..d).map(|i| basis[a][i] * v[i]).sum();
                for b in 0..k {
                    let mut s = 0.0;
                    for i in 0..d {
                        for j in 0..d {
                            s += basis[a][i] * mom.cov[i][j] * basis[b][j];
                        }
                    }
                    h[a][b] = -s;
                }
                h[a][a] -= rho;
            }
            // Newton direction solves H Δ = −g
            let mut step = [0.0; 2];
            if k == 1 {
                step[0] = -g[0] / h[0][0];
            } else {
                let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
                step[0] = -(h[1][1] * g[0] - h[0][1] * g[1]) / det;
                step[1] = -(-h[1][0] * g[0] + h[0][0] * g[1]) / det;
            }
            let slope = (0..k).map(|a| g[a] * step[a]).sum::<f64>();
            if !(slope > 0.0) || step.iter().any(|s| !s.is_finite()) {
                step = g;
            }
            let ymax = y[..k].iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let smax = step[..k].iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let cap = 10.0 * ymax.max(1.0);
            if smax > cap {
                for s in step.iter_mut() {
                    *s *= cap / smax;
                }
            }
            let slope = (0..k).map(|a| g[a] * step[a]).sum::<f64>();

            let mut t = 1.0;
            loop {
                let mut yt = y;
                for a in 0..k {
                    yt[a] += t * step[a];
                }
                let mu_t = to_mu(&yt);
                let mom_t = self.moments(&mu_t);
                let phi_t = objective(&mu_t, &mom_t);
                let v_t = residual_vec(&mu_t, &mom_t);
                let resid_t = inf_norm(&v_t);
                // near the optimum the objective stalls at rounding level,
                // where a residual decrease is the usable signal
                let flat = phi_t >= phi - 1e-12 * phi.abs().max(1.0);
                if phi_t >= phi + 1e-4 * t * slope || (flat && resid_t < resid) {
                    y = yt;
                    mu = mu_t;
                    mom = mom_t;
                    phi = phi_t;
                    v = v_t;
                    resid = resid_t;
                    break;
                }
                t *= 0.5;
                if t < 1e-14 {
                    return Err(PotentialError::NoConvergence {
                        iterations: MAX_NEWTON,
                        residual: resid,
                    });
                }
            }
        }
        if resid <= tol {
            return Ok(DualSolution {
                mu,
                log_z: mom.log_z,
            });
        }
        Err(PotentialError::NoConvergence {
            iterations: MAX_NEWTON,
            residual: resid,
        })
    }

    fn check_physical(&self, lambda: &[f64]) -> Result<(), PotentialError> {
        let margin = margin_of_eigenvalues(lambda);
        let sum: f64 = lambda.iter().sum();
        if margin <= EPS_PHYS || !margin.is_finite() || sum.abs() > 1e-10 {
            return Err(PotentialError::NonPhysicalInput { margin });
        }
        Ok(())
    }

    /// Multipliers whose Gibbs density has moments `λ + I/d`.
    pub fn solve_multipliers(&self, lambda: &[f64], tol: f64) -> Result<Multipliers, PotentialError> {
        assert_eq!(lambda.len(), self.dim());
        self.check_physical(lambda)?;
        let mut lam = [0.0; 3];
        lam[..lambda.len()].copy_from_slice(lambda);
        let sol = self.dual_solve(&lam, 0.0, self.initial_guess(&lam, 0.0), tol)?;
        Ok(Multipliers {
            dim: self.dim(),
            mu: sol.mu,
        })
    }

    /// `(ψ, μ, log Z)` at eigenvalues `λ`.
    pub fn psi_eigen(&self, lambda: &[f64]) -> Result<(f64, Multipliers, f64), PotentialError> {
        self.check_physical(lambda)?;
        let mut lam = [0.0; 3];
        lam[..lambda.len()].copy_from_slice(lambda);
        let sol = self.dual_solve(&lam, 0.0, self.initial_guess(&lam, 0.0), self.tol)?;
        let psi: f64 = (0..self.dim()).map(|i| sol.mu[i] * lam[i]).sum::<f64>() - sol.log_z;
        Ok((
            psi,
            Multipliers {
                dim: self.dim(),
                mu: sol.mu,
            },
            sol.log_z,
        ))
    }

    pub fn psi(&self, q: &Sym0Matrix) -> Result<PotentialEval, PotentialError> {
        assert_eq!(q.dim(), self.dim());
        let spec = spectrum(q);
        let (psi, mu, log_z) = self.psi_eigen(spec.eigenvalues())?;
        let grad = Sym0Matrix::from_mat_unchecked(q.dim(), &spec.reconstruct_with(mu.as_slice()));
        Ok(PotentialEval {
            psi,
            grad,
            mu,
            log_z,
        })
    }

    /// Largest deviation between the analytic gradient and central
    /// differences in component coordinates, relative to `max(1, |∇ψ|_∞)`.
    pub fn psi_grad_fd_check(&self, q: &Sym0Matrix, h: f64) -> Result<f64, PotentialError> {
        let eval = self.psi(q)?;
        let analytic = component_gradient(&eval.grad);
        let n = q.components().len();
        let scale = analytic[..n].iter().fold(1.0f64, |a, x| a.max(x.abs()));
        let mut worst = 0.0f64;
        for k in 0..n {
            let mut qp = *q;
            let mut qm = *q;
            qp.components_mut()[k] += h;
            qm.components_mut()[k] -= h;
            let fd = (self.psi(&qp)?.psi - self.psi(&qm)?.psi) / (2.0 * h);
            worst = worst.max((fd - analytic[k]).abs() / scale);
        }
        Ok(worst)
    }

    /// `ψ_J` at eigenvalues `λ` (any real vector with zero sum).
    pub fn yosida_eigen(
        &self,
        lambda: &[f64],
        j: f64,
        init: Option<&Multipliers>,
    ) -> Result<(f64, Multipliers), PotentialError> {
        let d = self.dim();
        let mut lam = [0.0; 3];
        lam[..d].copy_from_slice(lambda);
        let rho = 0.5 / j;
        let start = match init {
            Some(m) => m.mu,
            None => self.initial_guess(&lam, rho),
        };
        let sol = self.dual_solve(&lam, rho, start, self.tol)?;
        let mut value = -sol.log_z;
        let mut nrm = 0.0;
        for i in 0..d {
            value += sol.mu[i] * lam[i];
            nrm += sol.mu[i] * sol.mu[i];
        }
        value -= nrm / (4.0 * j);
        Ok((value, Multipliers { dim: d, mu: sol.mu }))
    }

    /// `min_A J|A − Q|² + ψ(A)` and its minimizer.
    pub fn moreau_yosida(&self, q: &Sym0Matrix, j: f64) -> Result<YosidaEval, PotentialError> {
        assert!(j > 0.0);
        let d = self.dim();
        let spec = spectrum(q);
        let (value, mu) = self.yosida_eigen(spec.eigenvalues(), j, None)?;
        let mut a = [0.0; 3];
        for i in 0..d {
            a[i] = spec.eigenvalues[i] - mu.mu[i] / (2.0 * j);
        }
        Ok(YosidaEval {
            value,
            prox: Sym0Matrix::from_mat_unchecked(d, &spec.reconstruct_with(&a[..d])),
            grad: Sym0Matrix::from_mat_unchecked(d, &spec.reconstruct_with(mu.as_slice())),
            mu,
        })
    }
}

/// `ψ(0)` for the continuum potential.
pub fn psi_at_zero(dim: usize) -> f64 {
    -sphere_area(dim).ln()
}

fn bump(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s)).exp()
    }
}

/// Kernel nodes inside the Frobenius ball of radius `r`, as trace-free
/// matrices, with weights summing to one.
///
/// The node set is invariant under conjugation by permutation matrices so
/// that the eigenvalue function it induces is symmetric.
fn kernel_nodes(dim: usize, r: f64, order: usize) -> Vec<(Sym0Matrix, f64)> {
    let mut nodes = Vec::new();
    if dim == 2 {
        let (x, w) = gauss_legendre(order);
        for i in 0..order {
            for j in 0..order {
                let p = [r * x[i], r * x[j]];
                let s = (p[0] * p[0] + p[1] * p[1]) / (r * r);
                let wt = w[i] * w[j] * bump(s);
                if wt > 0.0 {
                    nodes.push((Sym0Matrix::from_frobenius_coords(2, &p), wt));
                }
            }
        }
    } else {
        // polar rule on the diagonal plane times a product rule off-diagonal
        let (xr, wr) = gauss_legendre(order);
        let n_ang = 6;
        let (xo, wo) = gauss_legendre(order);
        let mut diag = Vec::new();
        for i in 0..order {
            let rad = 0.5 * r * (xr[i] + 1.0);
            let wrad = 0.5 * r * wr[i] * rad;
            for k in 0..n_ang {
                let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n_ang as f64;
                diag.push(([rad * th.cos(), rad * th.sin()], wrad / n_ang as f64));
            }
        }
        for (pd, wd) in &diag {
            for a in 0..order {
                for b in 0..order {
                    for c in 0..order {
                        let p = [pd[0], pd[1], r * xo[a], r * xo[b], r * xo[c]];
                        let s = p.iter().map(|v| v * v).sum::<f64>() / (r * r);
                        let wt = wd * wo[a] * wo[b] * wo[c] * bump(s);
                        if wt > 0.0 {
                            nodes.push((Sym0Matrix::from_frobenius_coords(3, &p), wt));
                        }
                    }
                }
            }
        }
    }
    let total: f64 = nodes.iter().map(|n| n.1).sum();
    for n in nodes.iter_mut() {
        n.1 /= total;
    }
    nodes
}

pub const DEFAULT_KERNEL_ORDER_2D: usize = 12;
pub const DEFAULT_KERNEL_ORDER_3D: usize = 3;

/// `ψ_N`: the Yosida envelope `ψ_J` (`J = N`) averaged against a bump of
/// radius `1/N`, shifted down by `J·m₂` so that it stays below `ψ_J`.
#[derive(Clone, Debug)]
pub struct Mollified {
    base: BallMajumdar,
    n: usize,
    j: f64,
    nodes: Vec<(Sym0Matrix, f64)>,
    m2: f64,
}

impl Mollified {
    pub fn new(dim: usize, n: usize) -> Self {
        let order = if dim == 2 {
            DEFAULT_KERNEL_ORDER_2D
        } else {
            DEFAULT_KERNEL_ORDER_3D
        };
        Self::with_base(BallMajumdar::new(dim), n, order)
    }

    pub fn with_base(base: BallMajumdar, n: usize, kernel_order: usize) -> Self {
        assert!(n >= 1, "mollification index must be positive");
        let dim = base.dim();
        let r = 1.0 / n as f64;
        let nodes = kernel_nodes(dim, r, kernel_order);
        let m2 = nodes.iter().map(|(q, w)| w * q.dot(q)).sum();
        Self {
            base,
            n,
            j: n as f64,
            nodes,
            m2,
        }
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn index(&self) -> usize {
        self.n
    }

    pub fn yosida_parameter(&self) -> f64 {
        self.j
    }

    /// Downward shift `J·Σ w|R|²`; `ψ_N ≥ ψ_J − shift` pointwise.
    pub fn shift(&self) -> f64 {
        self.j * self.m2
    }

    pub fn base(&self) -> &BallMajumdar {
        &self.base
    }

    /// Value and diagonal gradient of the symmetric eigenvalue function.
    pub fn eval_eigen(&self, lambda: &[f64]) -> Result<(f64, [f64; 3]), PotentialError> {
        let d = self.dim();
        let center = Sym0Matrix::diag(lambda);
        let (_, mu0) = self.base.yosida_eigen(lambda, self.j, None)?;
        let mut value = 0.0;
        let mut g = [0.0; 3];
        for (r, w) in &self.nodes {
            let a = center.sub(r);
            let spec = spectrum(&a);
            let (v, mu) = self.base.yosida_eigen(spec.eigenvalues(), self.j, Some(&mu0))?;
            value += w * v;
            let gm = spec.reconstruct_with(mu.as_slice());
            for k in 0..d {
                g[k] += w * gm[k][k];
            }
        }
        Ok((value - self.shift(), g))
    }

    pub fn eval(&self, q: &Sym0Matrix) -> Result<(f64, Sym0Matrix), PotentialError> {
        let spec = spectrum(q);
        self.eval_with_spectrum(&spec)
    }

    fn eval_with_spectrum(&self, spec: &Spectrum) -> Result<(f64, Sym0Matrix), PotentialError> {
        let (value, g) = self.eval_eigen(spec.eigenvalues())?;
        let grad = Sym0Matrix::from_mat_unchecked(self.dim(), &spec.reconstruct_with(&g[..self.dim()]));
        Ok((value, grad))
    }
}

/// Tabulated `d = 2` potential `f(r)` with `r = √(q11² + q12²)`, valid for
/// any isotropic `ψ` (used with `ψ_N`).
///
/// Cubic Hermite interpolation of `(f, f')`; the gradient is the exact
/// derivative of the interpolant, `(f'(r)/(2r))·Q`. Past the table the
/// profile continues as a parabola of curvature `4J`.
#[derive(Clone, Debug)]
pub struct IsotropicTable {
    h: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
    tail_curvature: f64,
}

pub const TABLE_SPACING: f64 = 2e-3;
pub const TABLE_RMAX: f64 = 3.0;

impl IsotropicTable {
    pub fn from_mollified(m: &Mollified) -> Result<Self, PotentialError> {
        assert_eq!(m.dim(), 2, "isotropic table is two-dimensional");
        Self::build(TABLE_SPACING, TABLE_RMAX, 4.0 * m.yosida_parameter(), |r| {
            let (v, g) = m.eval_eigen(&[-r, r])?;
            Ok((v, g[1] - g[0]))
        })
    }

    /// `profile(r)` returns `(f(r), f'(r))`.
    pub fn build<F>(h: f64, rmax: f64, tail_curvature: f64, profile: F) -> Result<Self, PotentialError>
    where
        F: Fn(f64) -> Result<(f64, f64), PotentialError>,
    {
        let count = (rmax / h).ceil() as usize + 1;
        let mut values = Vec::with_capacity(count);
        let mut slopes = Vec::with_capacity(count);
        for i in 0..count {
            let (f, df) = profile(i as f64 * h)?;
            values.push(f);
            slopes.push(if i == 0 { 0.0 } else { df });
        }
        Ok(Self {
            h,
            values,
            slopes,
            tail_curvature,
        })
    }

    pub fn rmax(&self) -> f64 {
        self.h * (self.values.len() - 1) as f64
    }

    /// `(f(r), f'(r), f'(r)/(2r))`.
    pub fn profile(&self, r: f64) -> (f64, f64, f64) {
        let last = self.values.len() - 1;
        let rmax = self.rmax();
        if r >= rmax {
            let dr = r - rmax;
            let f = self.values[last] + self.slopes[last] * dr + 0.5 * self.tail_curvature * dr * dr;
            let df = self.slopes[last] + self.tail_curvature * dr;
            return (f, df, df / (2.0 * r));
        }
        let i = ((r / self.h) as usize).min(last - 1);
        let t = (r - i as f64 * self.h) / self.h;
        let (f0, f1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.slopes[i] * self.h, self.slopes[i + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        let f = (2.0 * t3 - 3.0 * t2 + 1.0) * f0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * f1
            + (t3 - t2) * d1;
        let dt = (6.0 * t2 - 6.0 * t) * f0 + (3.0 * t2 - 4.0 * t + 1.0) * d0 + (-6.0 * t2 + 6.0 * t) * f1 + (3.0 * t2 - 2.0 * t) * d1;
        let df = dt / self.h;
        let ratio = if i == 0 {
            // first cell: f'(0) = 0, so divide the interpolant's derivative
            // analytically by r = t·h
            let c1 = (6.0 * t - 6.0) * f0 + (3.0 * t - 4.0) * d0 + (-6.0 * t + 6.0) * f1 + (3.0 * t - 2.0) * d1;
            let c0 = d0;
            (c1 + c0 / t.max(f64::MIN_POSITIVE)) / (2.0 * self.h * self.h)
        } else {
            df / (2.0 * r)
        };
        (f, df, ratio)
    }

    pub fn eval(&self, q: &Sym0Matrix) -> (f64, Sym0Matrix) {
        let c = q.components();
        let r = c[0].hypot(c[1]);
        let (f, _, ratio) = self.profile(r);
        (f, q.scale(ratio))
    }
}

/// The bulk potential used by the dynamics and diagnostics.
#[derive(Clone, Debug)]
pub enum BulkPotential {
    Exact(BallMajumdar),
    Yosida(BallMajumdar, f64),
    Mollified(Mollified),
    Table(IsotropicTable),
}

impl BulkPotential {
    /// `ψ_N` for `n ≥ 1` (tabulated in `d = 2`), exact `ψ` for `n = 0`.
    pub fn for_index(dim: usize, n: usize) -> Result<Self, PotentialError> {
        if n == 0 {
            return Ok(Self::Exact(BallMajumdar::new(dim)));
        }
        let m = Mollified::new(dim, n);
        if dim == 2 {
            Ok(Self::Table(IsotropicTable::from_mollified(&m)?))
        } else {
            Ok(Self::Mollified(m))
        }
    }

    pub fn eval(&self, q: &Sym0Matrix) -> Result<(f64, Sym0Matrix), PotentialError> {
        match self {
            Self::Exact(b) => b.psi(q).map(|e| (e.psi, e.grad)),
            Self::Yosida(b, j) => b.moreau_yosida(q, *j).map(|e| (e.value, e.grad)),
            Self::Mollified(m) => m.eval(q),
            Self::Table(t) => Ok(t.eval(q)),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Self::Exact(_))
    }
}

/// CSV of `(λ₁…λ_{d−1}, ψ, μ₁…μ_d, log Z)` on the interior barycentric grid
/// `b_i = (a_i + 1/d)/R`, `Σ a_i = R − 1`.
pub fn potential_table(dim: usize, resolution: usize) -> Result<String, PotentialError> {
    let bm = BallMajumdar::new(dim);
    let r = resolution as f64;
    let d = dim as f64;
    let mut header: Vec<String> = (1..dim).map(|i| format!("lambda{i}")).collect();
    header.push("psi".into());
    header.extend((1..=dim).map(|i| format!("mu{i}")));
    header.push("logZ".into());
    let mut out = header.join(",") + "\n";
    let mut row = |a: &[usize]| -> Result<(), PotentialError> {
        let lambda: Vec<f64> = a.iter().map(|&ai| (ai as f64 + 1.0 / d) / r - 1.0 / d).collect();
        let (psi, mu, log_z) = bm.psi_eigen(&lambda)?;
        let mut cells: Vec<String> = lambda[..dim - 1].iter().map(|v| format!("{v:e}")).collect();
        cells.push(format!("{psi:e}"));
        cells.extend(mu.as_slice().iter().map(|v| format!("{v:e}")));
        cells.push(format!("{log_z:e}"));
        out.push_str(&cells.join(","));
        out.push('\n');
        Ok(())
    };
    let top = resolution.saturating_sub(1);
    for a0 in 0..=top {
        if dim == 2 {
            row(&[a0, top - a0])?;
        } else {
            for a1 in 0..=top - a0 {
                row(&[a0, a1, top - a0 - a1])?;
            }
        }
    }
    Ok(out)
}
