//! Property suites run by `nematic verify`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::diagnostics::{cancellation_terms, energy_increase, record};
use crate::dynamics::{random_initial_state, DynamicsError, stress_sigma, stress_tau, tumbling_matrix, Dynamics, SimConfig, State};
use crate::potential::{psi_at_zero, BallMajumdar, BulkPotential, Mollified};
use crate::spectral::{Grid, SpectralField};
use crate::tensor::{n_components, physicality_margin, rotation_from_uniform, trace, Sym0Matrix, ZERO_MAT};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub id: String,
    pub passed: bool,
    pub detail: String,
}

fn check(id: &str, passed: bool, detail: String) -> Check {
    Check {
        id: id.to_string(),
        passed,
        detail,
    }
}

fn random_sym0(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Sym0Matrix {
    let c: Vec<f64> = (0..n_components(dim)).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
    Sym0Matrix::from_components(dim, &c)
}

fn interior(rng: &mut ChaCha8Rng, dim: usize, margin: f64) -> Sym0Matrix {
    loop {
        let q = random_sym0(rng, dim, 0.6);
        if physicality_margin(&q) >= margin {
            return q;
        }
    }
}

fn rotation(rng: &mut ChaCha8Rng, dim: usize) -> crate::tensor::Mat {
    let u: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
    rotation_from_uniform(dim, &u)
}

/// Fixed non-physical test point, uniaxial with leading eigenvalue 5.
pub fn q_bad(dim: usize) -> Sym0Matrix {
    let d: Vec<f64> = (0..dim).map(|i| if i == 0 { 5.0 } else { -5.0 / (dim - 1) as f64 }).collect();
    Sym0Matrix::diag(&d)
}

/// Worst midpoint-convexity excess of `f` over `pairs`.
fn convexity_excess<F>(pairs: &[(Sym0Matrix, Sym0Matrix)], f: F) -> f64
where
    F: Fn(&Sym0Matrix) -> f64,
{
    let mut worst = f64::NEG_INFINITY;
    for (a, b) in pairs {
        let (fa, fb) = (f(a), f(b));
        for t in [0.25, 0.5, 0.75] {
            let m = a.scale(t).add(&b.scale(1.0 - t));
            worst = worst.max(f(&m) - t * fa - (1.0 - t) * fb);
        }
    }
    worst
}

/// P1–P5 for ψ and M1–M6 for ψ_N in `dim`, with `samples` draws per check.
pub fn potential_suite(dim: usize, samples: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bm = BallMajumdar::new(dim);
    let tag = |s: &str| format!("{s}/d{dim}");
    let mut out = Vec::new();
    let psi = |q: &Sym0Matrix| bm.psi(q).map(|e| e.psi).unwrap_or(f64::NAN);

    let p0 = psi(&Sym0Matrix::zero(dim));
    let fd = (0..samples.min(50))
        .map(|_| bm.psi_grad_fd_check(&interior(&mut rng, dim, 0.05), 1e-5).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    out.push(check(
        &tag("P1"),
        (p0 - psi_at_zero(dim)).abs() < 1e-8 && fd < 1e-6,
        format!("psi(0) = {p0:.10}, gradient vs central differences {fd:.2e}"),
    ));

    let low = (0..samples).map(|_| psi(&interior(&mut rng, dim, 1e-3))).fold(f64::INFINITY, f64::min);
    out.push(check(&tag("P2"), low >= p0 - 1e-10, format!("min psi {low:.6} >= psi(0) {p0:.6}")));

    let dir = random_sym0(&mut rng, dim, 1.0);
    let dir = dir.scale(1.0 / dir.norm());
    let ray: Vec<(f64, f64)> = [1e-2, 1e-4, 1e-6]
        .iter()
        .map(|&m| {
            // bisect the scale giving margin m along the ray
            let (mut lo, mut hi) = (0.0, 10.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if physicality_margin(&dir.scale(mid)) > m {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            bm.psi(&dir.scale(lo)).map(|e| (e.psi, e.grad.norm())).unwrap_or((f64::NAN, f64::NAN))
        })
        .collect();
    let up = ray.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1);
    out.push(check(
        &tag("P3"),
        up,
        format!("(psi, |grad psi|) at margins 1e-2, 1e-4, 1e-6: {ray:.4?}"),
    ));

    let phys: Vec<_> = (0..samples)
        .map(|_| (interior(&mut rng, dim, 1e-3), interior(&mut rng, dim, 1e-3)))
        .collect();
    let ex = convexity_excess(&phys, psi);
    out.push(check(&tag("P4"), ex <= 1e-9, format!("worst midpoint excess {ex:.2e}")));

    let iso = (0..samples)
        .map(|_| {
            let q = interior(&mut rng, dim, 1e-3);
            (psi(&q.conjugate(&rotation(&mut rng, dim))) - psi(&q)).abs()
        })
        .fold(0.0, f64::max);
    out.push(check(&tag("P5"), iso <= 1e-9, format!("worst rotation deviation {iso:.2e}")));

    let n_cheap = if dim == 2 { samples } else { samples.div_ceil(4) };
    let m16 = Mollified::new(dim, 16);
    let f16 = |q: &Sym0Matrix| m16.eval(q).map(|v| v.0).unwrap_or(f64::NAN);
    let anywhere: Vec<_> = (0..n_cheap)
        .map(|_| (random_sym0(&mut rng, dim, 1.5), random_sym0(&mut rng, dim, 1.5)))
        .collect();
    let ex = convexity_excess(&anywhere, f16);
    out.push(check(&tag("M1"), ex <= 1e-9, format!("psi_16 worst midpoint excess {ex:.2e} (finite everywhere)")));

    let floor = -(psi_at_zero(dim).abs() + m16.shift());
    let low = (0..n_cheap)
        .map(|_| {
            let scale = rng.random_range(0.0..2.0);
            f16(&random_sym0(&mut rng, dim, scale))
        }).fold(f64::INFINITY, f64::min);
    out.push(check(&tag("M2"), low >= floor, format!("min psi_16 {low:.6} >= {floor:.6}")));

    let ladder: Vec<Mollified> = [4, 8, 16].iter().map(|&n| Mollified::new(dim, n)).collect();
    let mut worst = f64::NEG_INFINITY;
    let mut verr = [0.0f64; 3];
    let mut gerr = [0.0f64; 3];
    for _ in 0..n_cheap {
        let q = interior(&mut rng, dim, 0.05);
        let exact = bm.psi(&q).expect("interior");
        let vals: Vec<_> = ladder.iter().map(|m| m.eval(&q).expect("finite")).collect();
        worst = worst.max(vals[0].0 - vals[1].0).max(vals[1].0 - vals[2].0).max(vals[2].0 - exact.psi);
        for k in 0..3 {
            verr[k] = verr[k].max((vals[k].0 - exact.psi).abs());
            gerr[k] = gerr[k].max(vals[k].1.sub(&exact.grad).norm());
        }
    }
    out.push(check(&tag("M3"), worst <= 1e-10, format!("worst ladder excess {worst:.2e}")));

    let bad = Mollified::new(dim, 64).eval(&q_bad(dim)).map(|v| v.0).unwrap_or(f64::NAN);
    out.push(check(
        &tag("M4"),
        verr[0] > verr[1] && verr[1] > verr[2] && bad > 1e3,
        format!("sup |psi_N - psi| for N = 4, 8, 16: {verr:.4?}; psi_64(Q_bad) = {bad:.1}"),
    ));
    out.push(check(
        &tag("M5"),
        gerr[0] > gerr[1] && gerr[1] > gerr[2],
        format!("sup |grad psi_N - grad psi| for N = 4, 8, 16: {gerr:.4?}"),
    ));

    let (mut c1, c2) = (0.0f64, m16.eval(&Sym0Matrix::zero(dim)).map(|v| v.1.norm()).unwrap_or(f64::NAN));
    let mut finite = c2.is_finite();
    for _ in 0..n_cheap {
        let q = random_sym0(&mut rng, dim, 10.0 / (n_components(dim) as f64).sqrt());
        match m16.eval(&q) {
            Ok((_, g)) => c1 = c1.max((g.norm() - c2).max(0.0) / q.norm()),
            Err(_) => finite = false,
        }
    }
    out.push(check(
        &tag("M6"),
        finite && c1.is_finite(),
        format!("|grad psi_16| <= {c1:.3}|Q| + {c2:.3e} on |Q| <= 10"),
    ));
    out
}

fn band_limited(grid: &Grid, rng: &mut ChaCha8Rng, kmax: i64) -> Vec<f64> {
    let mut c = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (idx, z) in c.iter_mut().enumerate() {
        if grid.mode(idx).iter().all(|j| j.abs() <= kmax) {
            *z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    grid.inverse(&c)
}

pub fn spectral_suite(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for dim in [2, 3] {
        let n = if dim == 2 { 32 } else { 16 };
        let g = Grid::new(dim, n, 1.3).expect("grid");
        let tag = |s: &str| format!("{s}/d{dim}");
        let f = band_limited(&g, &mut rng, 4);
        let h = band_limited(&g, &mut rng, 4);
        let fh = g.forward(&f);
        let phys = g.integrate(&f.iter().map(|v| v * v).collect::<Vec<_>>());
        let spec = g.inner(&fh, &fh);
        let e = (phys - spec).abs() / phys;
        out.push(check(&tag("S1-parseval"), e < 1e-12, format!("relative gap {e:.2e}")));

        let hh = g.forward(&h);
        let lhs = g.inner(&g.laplacian(&fh), &hh);
        let rhs: f64 = (0..dim).map(|a| g.inner(&g.derivative(&fh, a, 1), &g.derivative(&hh, a, 1))).sum();
        let e = (lhs + rhs).abs() / lhs.abs().max(rhs.abs());
        out.push(check(&tag("S2-parts"), e < 1e-10, format!("<lap f, g> + <grad f, grad g> = {e:.2e} rel")));

        let mut v = SpectralField {
            channels: (0..dim).map(|_| g.forward(&band_limited(&g, &mut rng, 4))).collect(),
        };
        g.leray_project(&mut v);
        let once = v.clone();
        g.leray_project(&mut v);
        let idem = v
            .channels
            .iter()
            .flatten()
            .zip(once.channels.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let div = g.inverse(&g.divergence(&v)).iter().fold(0.0f64, |a, x| a.max(x.abs()));
        out.push(check(&tag("S3-leray"), idem < 1e-14 && div < 1e-12, format!("idempotence {idem:.1e}, max |div| {div:.1e}")));

        let k = 2.0 * 3.0 / g.lambda();
        let s: Vec<f64> = (0..g.len()).map(|i| (k * g.point(i)[0]).sin()).collect();
        let ds = g.inverse(&g.derivative(&g.forward(&s), 0, 1));
        let e = (0..g.len()).map(|i| (ds[i] - k * (k * g.point(i)[0]).cos()).abs()).fold(0.0, f64::max);
        out.push(check(&tag("S4-derivative"), e < 1e-11, format!("max error {e:.1e}")));
    }
    out
}

pub fn dynamics_suite(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut sym = 0.0f64;
    for dim in [2, 3] {
        for _ in 0..100 {
            let q = random_sym0(&mut rng, dim, 0.3);
            let h = random_sym0(&mut rng, dim, 1.0);
            let gq: Vec<_> = (0..dim).map(|_| random_sym0(&mut rng, dim, 1.0)).collect();
            let mut gu = ZERO_MAT;
            for row in gu.iter_mut().take(dim) {
                for v in row.iter_mut().take(dim) {
                    *v = rng.random_range(-1.0..1.0);
                }
            }
            let tr = trace(dim, &gu);
            gu[0][0] -= tr;
            let s = tumbling_matrix(&q, &gu, 0.7);
            let tau = stress_tau(&q, &h, &gq, 0.7, 0.1);
            let sigma = stress_sigma(&q, &h);
            sym = sym.max(trace(dim, &s).abs());
            for i in 0..dim {
                for j in 0..dim {
                    sym = sym.max((s[i][j] - s[j][i]).abs()).max((tau[i][j] - tau[j][i]).abs());
                    sym = sym.max((sigma[i][j] + sigma[j][i]).abs());
                }
            }
        }
    }
    out.push(check("D1-symmetry", sym < 1e-13, format!("worst asymmetry/trace {sym:.1e}")));

    let cfg = SimConfig {
        n: 8,
        dt: 1e-3,
        t_final: 1.0,
        ..SimConfig::default()
    };
    let dynm = Dynamics::new(cfg).expect("config");
    let end = dynm.run(State::rest(&dynm.grid), |_, _| Ok(()));
    let still = end.map(|s| s.max_abs()).unwrap_or(f64::NAN);
    out.push(check("D2-rest", still == 0.0, format!("max |field| after 1000 steps {still:e}")));

    let cfg = SimConfig {
        n: 32,
        dt: 1e-3,
        t_final: 0.5,
        nu: 0.1,
        ..SimConfig::default()
    };
    let dynm = Dynamics::new(cfg.clone()).expect("config");
    let s0 = State::taylor_green(&dynm.grid, 1.0);
    let norm = |s: &State| s.u.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let e = dynm
        .run(s0.clone(), |_, _| Ok(()))
        .map(|s| {
            let want = (-2.0 * cfg.nu * (2.0 / cfg.lambda).powi(2) * cfg.t_final).exp();
            (norm(&s) / norm(&s0) - want).abs() / want
        })
        .unwrap_or(f64::NAN);
    out.push(check("D3-taylor-green", e < 1e-6, format!("relative decay error {e:.2e}")));

    let mut worst = 0.0f64;
    for xi in [0.0, 0.7] {
        let cfg = SimConfig {
            n: 16,
            xi,
            n_reg: 0,
            seed: rng.random(),
            init_margin: 0.3,
            ..SimConfig::default()
        };
        let dynm = Dynamics::new(cfg.clone()).expect("config");
        let s = random_initial_state(&cfg, &dynm.grid);
        if let Ok(c) = cancellation_terms(&dynm, &s) {
            let active = if xi == 0.0 { 2 } else { 6 };
            let (di, dj) = c.null_defects();
            worst = c.pair_defects()[..active].iter().fold(worst, |a, &b| a.max(b)).max(di).max(dj);
        } else {
            worst = f64::NAN;
        }
    }
    out.push(check("D4-cancellation", worst < 1e-8, format!("worst relative defect {worst:.2e}")));

    let cfg = SimConfig {
        n: 16,
        dt: 1e-3,
        t_final: 0.1,
        ..SimConfig::default()
    };
    let dynm = Dynamics::new(cfg.clone()).expect("config");
    let mut recs = Vec::new();
    let run = dynm.run(random_initial_state(&cfg, &dynm.grid), |s, k| {
        if k % 10 == 0 {
            recs.push(record(&dynm, s)?);
        }
        Ok(())
    });
    let inc = energy_increase(&recs, 1e-8);
    out.push(check(
        "D5-energy",
        run.is_ok() && inc.is_none() && recs.len() == 11,
        format!("{} records, first increase {inc:?}", recs.len()),
    ));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub measured: f64,
    pub reference: f64,
    pub rel_error: f64,
}

/// 2D Taylor-Green vortex with `Q ≡ 0`: measured `‖u(T)‖/‖u(0)‖` against
/// `exp(−2ν(2/Λ)²T)`.
pub fn taylor_green_scenario(nu: f64, t_final: f64, n: usize, dt: f64) -> Result<ScenarioReport, DynamicsError> {
    let cfg = SimConfig {
        n,
        nu,
        t_final,
        dt,
        ..SimConfig::default()
    };
    let dynm = Dynamics::new(cfg.clone())?;
    let s0 = State::taylor_green(&dynm.grid, 1.0);
    let norm = |s: &State| s.u.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let end = dynm.run(s0.clone(), |_, _| Ok(()))?;
    let measured = norm(&end) / norm(&s0);
    let reference = (-2.0 * nu * (2.0 / cfg.lambda).powi(2) * t_final).exp();
    Ok(ScenarioReport {
        measured,
        reference,
        rel_error: (measured - reference).abs() / reference,
    })
}

/// Spatially constant `Q₀ = diag(r₀, −r₀)` in 2D with the exact potential,
/// against RK4 on the scalar ODE `r' = Γ(κr − θ ∂ψ/∂Q₁₁)` at step `dt/16`.
pub fn homogeneous_scenario(
    kappa: f64,
    theta: f64,
    gamma: f64,
    r0: f64,
    t_final: f64,
    dt: f64,
) -> Result<ScenarioReport, DynamicsError> {
    let cfg = SimConfig {
        n: 4,
        kappa,
        theta,
        gamma,
        dt,
        t_final,
        n_reg: 0,
        ..SimConfig::default()
    };
    let dynm = Dynamics::with_potential(cfg.clone(), BulkPotential::for_index(2, 0).expect("exact potential"))?;
    let q0 = Sym0Matrix::from_components(2, &[r0, 0.0]);
    let measured = dynm.run(State::homogeneous(&dynm.grid, &q0), |_, _| Ok(()))?.q[0][0];

    let bm = BallMajumdar::new(2);
    let rhs = |r: f64| -> Result<f64, DynamicsError> {
        let g = bm
            .psi(&Sym0Matrix::from_components(2, &[r, 0.0]))
            .map_err(|source| DynamicsError::Potential { t: 0.0, index: 0, source })?
            .grad;
        Ok(gamma * (kappa * r - theta * g.components()[0]))
    };
    let steps = 16 * cfg.n_steps();
    let h = t_final / steps as f64;
    let mut r = r0;
    for _ in 0..steps {
        let k1 = rhs(r)?;
        let k2 = rhs(r + 0.5 * h * k1)?;
        let k3 = rhs(r + 0.5 * h * k2)?;
        let k4 = rhs(r + h * k3)?;
        r += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Ok(ScenarioReport {
        measured,
        reference: r,
        rel_error: (measured - r).abs() / r.abs().max(1e-300),
    })
}

pub fn summary_json(checks: &[Check]) -> String {
    serde_json::json!({
        "passed": checks.iter().all(|c| c.passed),
        "checks": checks,
    })
    .to_string()
}
