//! Energy functionals, dissipation residuals, physicality monitoring and the
//! cancellation terms of the energy identity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{DynamicsError, Dynamics, State};
use crate::tensor::{frob, frob_dot_components, matmul, n_components, spectrum, trace, Mat, ZERO_MAT};

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("diagnostics: need at least {needed} records, got {got}")]
    InsufficientRecords { needed: usize, got: usize },
    #[error("diagnostics: physicality violated at t = {t}, grid point {index}: margin {margin:e}")]
    PhysicalityViolated { t: f64, index: usize, margin: f64 },
}

/// One row of `energy.csv` plus the norms behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub t: f64,
    pub e: f64,
    pub f: f64,
    pub dissipation: f64,
    pub residual: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub margin: f64,
    pub psi_sup: f64,
    pub convexity_integral: f64,
    /// Grid index attaining `margin`.
    pub margin_index: usize,
    pub grad_q_sq: f64,
    pub lap_q_sq: f64,
    pub q_sq: f64,
    pub u_sq: f64,
    pub grad_u_sq: f64,
    pub h_sq: f64,
    pub dpsi_sq: f64,
    pub psi_integral: f64,
}

pub const CSV_HEADER: &str = "t,E,F,dissipation,residual,lambda_min,lambda_max,margin,psi_sup,convexity_integral";

impl EnergyRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.t,
            self.e,
            self.f,
            self.dissipation,
            self.residual,
            self.lambda_min,
            self.lambda_max,
            self.margin,
            self.psi_sup,
            self.convexity_integral
        )
    }
}

fn sum_sq(fields: &[&Vec<f64>], idx: usize) -> f64 {
    fields.iter().map(|f| f[idx] * f[idx]).sum()
}

/// Evaluates every diagnostic quantity at one state. Uses the potential of
/// `dynm`, so ψ_N runs are measured with ψ_N.
pub fn record(dynm: &Dynamics, state: &State) -> Result<EnergyRecord, DynamicsError> {
    let g = &dynm.grid;
    let d = dynm.dim();
    let cfg = &dynm.config;
    let der = dynm.derive(state)?;
    let len = g.len();
    let comp = |a: &[Vec<f64>], b: &[Vec<f64>], idx: usize| {
        let x: Vec<f64> = a.iter().map(|c| c[idx]).collect();
        let y: Vec<f64> = b.iter().map(|c| c[idx]).collect();
        frob_dot_components(d, &x, &y)
    };
    let mut grad_q = vec![0.0; len];
    let mut lap = vec![0.0; len];
    let mut qq = vec![0.0; len];
    let mut uu = vec![0.0; len];
    let mut gu = vec![0.0; len];
    let mut hh = vec![0.0; len];
    let mut pp = vec![0.0; len];
    let mut conv = vec![0.0; len];
    let (mut lmin, mut lmax, mut margin, mut at) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, 0);
    for idx in 0..len {
        grad_q[idx] = (0..d).map(|a| comp(&der.grad_q[a], &der.grad_q[a], idx)).sum();
        lap[idx] = comp(&der.lap_q, &der.lap_q, idx);
        qq[idx] = comp(&state.q, &state.q, idx);
        uu[idx] = sum_sq(&state.u.iter().collect::<Vec<_>>(), idx);
        gu[idx] = der.grad_u.iter().flatten().map(|f| f[idx] * f[idx]).sum();
        hh[idx] = comp(&der.h, &der.h, idx);
        pp[idx] = comp(&der.dpsi, &der.dpsi, idx);
        conv[idx] = comp(&der.lap_q, &der.dpsi, idx);
        let sp = spectrum(&state.q_at(d, idx));
        lmin = lmin.min(sp.lambda_min());
        lmax = lmax.max(sp.lambda_max());
        let m = crate::tensor::margin_of_eigenvalues(sp.eigenvalues());
        if m < margin {
            margin = m;
            at = idx;
        }
    }
    let grad_q_sq = g.integrate(&grad_q);
    let lap_q_sq = g.integrate(&lap);
    let q_sq = g.integrate(&qq);
    let u_sq = g.integrate(&uu);
    let grad_u_sq = g.integrate(&gu);
    let h_sq = g.integrate(&hh);
    let psi_integral = g.integrate(&der.psi);
    Ok(EnergyRecord {
        t: state.t,
        e: 0.5 * cfg.l * grad_q_sq + cfg.theta * psi_integral - 0.5 * cfg.kappa * q_sq + 0.5 * u_sq,
        f: 0.5 * grad_u_sq + 0.5 * cfg.l * lap_q_sq,
        dissipation: cfg.gamma * h_sq + cfg.nu * grad_u_sq,
        residual: 0.0,
        lambda_min: lmin,
        lambda_max: lmax,
        margin,
        psi_sup: der.psi.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        convexity_integral: g.integrate(&conv),
        margin_index: at,
        grad_q_sq,
        lap_q_sq,
        q_sq,
        u_sq,
        grad_u_sq,
        h_sq,
        dpsi_sq: g.integrate(&pp),
        psi_integral,
    })
}

pub fn energy_e(dynm: &Dynamics, state: &State) -> Result<f64, DynamicsError> {
    Ok(record(dynm, state)?.e)
}

pub fn energy_f(dynm: &Dynamics, state: &State) -> Result<f64, DynamicsError> {
    Ok(record(dynm, state)?.f)
}

/// `∫ΔQ : ∂ψ/∂Q` with the potential of `dynm`.
pub fn convexity_integral(dynm: &Dynamics, state: &State) -> Result<f64, DynamicsError> {
    Ok(record(dynm, state)?.convexity_integral)
}

/// Tolerance for the sign contract of [`convexity_integral`].
pub fn convexity_tolerance(rec: &EnergyRecord) -> f64 {
    1e-8 * (1.0 + rec.lap_q_sq.sqrt() * rec.dpsi_sq.sqrt())
}

/// Per-interval `|ΔE/Δt + mean dissipation| / max(1, mean dissipation)`.
pub fn dissipation_residual(records: &[EnergyRecord]) -> Result<Vec<f64>, DiagnosticsError> {
    if records.len() < 3 {
        return Err(DiagnosticsError::InsufficientRecords {
            needed: 3,
            got: records.len(),
        });
    }
    Ok(records
        .windows(2)
        .map(|w| {
            let dt = w[1].t - w[0].t;
            let diss = 0.5 * (w[0].dissipation + w[1].dissipation);
            ((w[1].e - w[0].e) / dt + diss).abs() / diss.max(1.0)
        })
        .collect())
}

/// Stores each interval residual on the record that closes it.
pub fn fill_residuals(records: &mut [EnergyRecord]) {
    if let Ok(r) = dissipation_residual(records) {
        for (rec, v) in records[1..].iter_mut().zip(r) {
            rec.residual = v;
        }
    }
}

/// First record index `k+1` with `E(k+1) > E(k) + rel·max(1, |E(k)|)`.
pub fn energy_increase(records: &[EnergyRecord], rel: f64) -> Option<(usize, f64)> {
    records.windows(2).enumerate().find_map(|(k, w)| {
        let excess = w[1].e - w[0].e;
        (excess > rel * w[0].e.abs().max(1.0)).then_some((k + 1, excess))
    })
}

/// Uniform-bound proxies over a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundProxies {
    pub sup_grad_q: f64,
    pub sup_u: f64,
    pub sup_q: f64,
    pub int_lap_q_sq: f64,
    pub int_grad_u_sq: f64,
    pub int_dpsi_sq: f64,
}

pub fn bound_proxies(records: &[EnergyRecord]) -> BoundProxies {
    let sup = |f: fn(&EnergyRecord) -> f64| records.iter().map(f).fold(0.0, f64::max).sqrt();
    let trap = |f: fn(&EnergyRecord) -> f64| {
        records
            .windows(2)
            .map(|w| 0.5 * (w[1].t - w[0].t) * (f(&w[0]) + f(&w[1])))
            .sum::<f64>()
    };
    BoundProxies {
        sup_grad_q: sup(|r| r.grad_q_sq),
        sup_u: sup(|r| r.u_sq),
        sup_q: sup(|r| r.q_sq),
        int_lap_q_sq: trap(|r| r.lap_q_sq),
        int_grad_u_sq: trap(|r| r.grad_u_sq),
        int_dpsi_sq: trap(|r| r.dpsi_sq),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GronwallFit {
    pub c0: f64,
    pub c1: f64,
    pub sup_f: f64,
    /// Largest `dF/dt − (C₀F² + C₁)` over intervals.
    pub max_violation: f64,
    pub holds: bool,
}

/// Fits `dF/dt ≤ C₀F² + C₁` over record intervals, with `F` at interval
/// midpoints, minimizing the mean bound `C₀·mean(F²) + C₁` over `C₀, C₁ ≥ 0`.
pub fn gronwall_tracker(records: &[EnergyRecord]) -> Result<GronwallFit, DiagnosticsError> {
    if records.len() < 2 {
        return Err(DiagnosticsError::InsufficientRecords {
            needed: 2,
            got: records.len(),
        });
    }
    let pts: Vec<(f64, f64)> = records
        .windows(2)
        .map(|w| {
            let fm = 0.5 * (w[0].f + w[1].f);
            (fm * fm, (w[1].f - w[0].f) / (w[1].t - w[0].t))
        })
        .collect();
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let c1_for = |c0: f64| pts.iter().map(|&(x, s)| s - c0 * x).fold(0.0, f64::max);
    // the objective is piecewise linear in C₀; try every breakpoint
    let mut cands = vec![0.0];
    for (i, &(xi, si)) in pts.iter().enumerate() {
        if xi > 0.0 && si > 0.0 {
            cands.push(si / xi);
        }
        for &(xj, sj) in &pts[i + 1..] {
            if xi != xj {
                let c = (si - sj) / (xi - xj);
                if c > 0.0 && c.is_finite() {
                    cands.push(c);
                }
            }
        }
    }
    let (c0, c1) = cands
        .into_iter()
        .map(|c0| (c0, c1_for(c0)))
        .min_by(|a, b| (a.0 * mean_x + a.1).total_cmp(&(b.0 * mean_x + b.1)))
        .expect("nonempty candidates");
    let max_violation = pts.iter().map(|&(x, s)| s - c0 * x - c1).fold(f64::NEG_INFINITY, f64::max);
    let scale = pts.iter().map(|p| p.1.abs()).fold(1.0, f64::max);
    Ok(GronwallFit {
        c0,
        c1,
        sup_f: records.iter().map(|r| r.f).fold(0.0, f64::max),
        max_violation,
        holds: max_violation <= 1e-12 * scale && c0.is_finite() && c1.is_finite(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhysicalityReport {
    pub times: Vec<f64>,
    pub margins: Vec<f64>,
    pub psi_sup: Vec<f64>,
    pub min_margin_after_burn: f64,
    pub floor_holds: bool,
}

/// Margin and `sup ψ` per record; `floor_holds` checks `margin ≥ floor`
/// for `t ≥ t_burn`.
pub fn strict_physicality_report(
    records: &[EnergyRecord],
    t_burn: f64,
    floor: f64,
) -> Result<PhysicalityReport, DiagnosticsError> {
    if let Some(r) = records.iter().find(|r| !(r.margin > 0.0)) {
        return Err(DiagnosticsError::PhysicalityViolated {
            t: r.t,
            index: r.margin_index,
            margin: r.margin,
        });
    }
    let after = records
        .iter()
        .filter(|r| r.t >= t_burn)
        .map(|r| r.margin)
        .fold(f64::INFINITY, f64::min);
    Ok(PhysicalityReport {
        times: records.iter().map(|r| r.t).collect(),
        margins: records.iter().map(|r| r.margin).collect(),
        psi_sup: records.iter().map(|r| r.psi_sup).collect(),
        min_margin_after_burn: after,
        floor_holds: after >= floor,
    })
}

/// Signed contributions of the six cancelling pairs in the energy identity,
/// `pairs[j] = (Q-equation side, u-equation side)`, plus the two null terms.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cancellation {
    pub pairs: [(f64, f64); 6],
    pub null_i: f64,
    pub null_j: f64,
    pub scale_i: f64,
    pub scale_j: f64,
}

impl Cancellation {
    /// `|a + b| / max(|a|, |b|)` per pair; 0 when both vanish.
    pub fn pair_defects(&self) -> [f64; 6] {
        self.pairs.map(|(a, b)| {
            let m = a.abs().max(b.abs());
            if m == 0.0 {
                0.0
            } else {
                (a + b).abs() / m
            }
        })
    }

    pub fn null_defects(&self) -> (f64, f64) {
        let rel = |v: f64, s: f64| if s == 0.0 { v.abs() } else { v.abs() / s };
        (rel(self.null_i, self.scale_i), rel(self.null_j, self.scale_j))
    }
}

fn sym_antisym(d: usize, m: &Mat) -> (Mat, Mat) {
    let mut s = ZERO_MAT;
    let mut w = ZERO_MAT;
    for i in 0..d {
        for j in 0..d {
            s[i][j] = 0.5 * (m[i][j] + m[j][i]);
            w[i][j] = 0.5 * (m[i][j] - m[j][i]);
        }
    }
    (s, w)
}

fn lin(d: usize, terms: &[(f64, &Mat)]) -> Mat {
    let mut out = ZERO_MAT;
    for (c, m) in terms {
        for i in 0..d {
            for j in 0..d {
                out[i][j] += c * m[i][j];
            }
        }
    }
    out
}

fn mat_norm(d: usize, a: &Mat) -> f64 {
    frob(d, a, a).sqrt()
}

/// Evaluates every term of the identity by quadrature. Terms with the
/// bulk force use `W = θ∂ψ/∂Q − κQ`.
pub fn cancellation_terms(dynm: &Dynamics, state: &State) -> Result<Cancellation, DynamicsError> {
    let g = &dynm.grid;
    let d = dynm.dim();
    let cfg = &dynm.config;
    let (l, xi) = (cfg.l, cfg.xi);
    let der = dynm.derive(state)?;
    let len = g.len();
    let mut f = vec![vec![0.0; len]; 16];
    for idx in 0..len {
        let qs = state.q_at(d, idx);
        let q = qs.to_mat();
        let mut qp = q;
        for (i, row) in qp.iter_mut().enumerate().take(d) {
            row[i] += 1.0 / d as f64;
        }
        let mut qm = q;
        for (i, row) in qm.iter_mut().enumerate().take(d) {
            row[i] -= 1.0 / d as f64;
        }
        let lap = der.sym0(&der.lap_q, d, idx).to_mat();
        let dpsi = der.sym0(&der.dpsi, d, idx).to_mat();
        let w = lin(d, &[(cfg.theta, &dpsi), (-cfg.kappa, &q)]);
        let gu = der.gradu_at(d, idx);
        let (om1, om0) = sym_antisym(d, &gu);
        let gq = der.grad_q_at(d, idx);
        let mm = |a: &Mat, b: &Mat| matmul(d, a, b);
        let comm = |a: &Mat, b: &Mat| lin(d, &[(1.0, &mm(a, b)), (-1.0, &mm(b, a))]);
        let acomm = |a: &Mat, b: &Mat| lin(d, &[(1.0, &mm(a, b)), (1.0, &mm(b, a))]);
        let tr_qgu = trace(d, &mm(&q, &gu));

        // Q-equation side
        let mut adv = ZERO_MAT;
        for (a, gqa) in gq.iter().enumerate() {
            adv = lin(d, &[(1.0, &adv), (state.u[a][idx], &gqa.to_mat())]);
        }
        f[0][idx] = l * frob(d, &adv, &lap);
        f[1][idx] = -l * frob(d, &comm(&om0, &q), &lap);
        f[2][idx] = -l * xi * frob(d, &acomm(&om1, &qp), &lap);
        f[3][idx] = 2.0 * l * xi * tr_qgu * frob(d, &qp, &lap);
        f[4][idx] = xi * frob(d, &acomm(&om1, &qp), &w);
        f[5][idx] = -2.0 * xi * frob(d, &qp, &w) * tr_qgu;
        // u-equation side
        let mut t1 = 0.0;
        for i in 0..d {
            for k in 0..d {
                t1 += frob_dot_components(d, gq[i].components(), gq[k].components()) * gu[i][k];
            }
        }
        f[6][idx] = l * t1;
        f[7][idx] = -l * frob(d, &comm(&q, &lap), &gu);
        f[8][idx] = l * xi * frob(d, &acomm(&qp, &lap), &gu);
        f[9][idx] = -2.0 * l * xi * trace(d, &mm(&q, &lap)) * frob(d, &qm, &gu);
        f[10][idx] = -xi * frob(d, &acomm(&qp, &w), &gu);
        f[11][idx] = 2.0 * xi * trace(d, &mm(&q, &w)) * frob(d, &qp, &gu);
        // null terms and their magnitudes
        f[12][idx] = frob(d, &comm(&om0, &q), &w);
        f[13][idx] = l * frob(d, &comm(&q, &w), &gu);
        f[14][idx] = 2.0 * mat_norm(d, &om0) * mat_norm(d, &q) * mat_norm(d, &w);
        f[15][idx] = 2.0 * l * mat_norm(d, &q) * mat_norm(d, &w) * mat_norm(d, &gu);
    }
    let v: Vec<f64> = f.iter().map(|c| g.integrate(c)).collect();
    debug_assert_eq!(n_components(d), state.q.len());
    Ok(Cancellation {
        pairs: std::array::from_fn(|j| (v[j], v[j + 6])),
        null_i: v[12],
        null_j: v[13],
        scale_i: v[14],
        scale_j: v[15],
    })
}
