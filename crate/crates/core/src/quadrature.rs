//! One-dimensional Gauss rules and the sphere rules used for the partition
//! function.

use std::f64::consts::PI;

use crate::potential::PotentialError;

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        0.5 * nf * (nf + 1.0) * x.powi(n as i32 + 1)
    } else {
        nf * (p0 - x * p1) / (1.0 - x * x)
    };
    (p1, dp)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss-Lobatto nodes and weights on `[-1, 1]` (endpoints included).
pub fn gauss_lobatto(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let m = n - 1;
    let mf = m as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    x[0] = -1.0;
    x[m] = 1.0;
    let end_w = 2.0 / (mf * (mf + 1.0));
    w[0] = end_w;
    w[m] = end_w;
    // interior nodes: roots of P'_m, Newton on P'_m with the ODE for P''_m
    for i in 1..=(m / 2) {
        let mut z = (PI * i as f64 / mf).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, z);
            let ddp = (2.0 * z * dp - mf * (mf + 1.0) * p) / (1.0 - z * z);
            let dz = dp / ddp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (p, _) = legendre(m, z);
        let wi = 2.0 / (mf * (mf + 1.0) * p * p);
        x[m - i] = z;
        x[i] = -z;
        w[m - i] = wi;
        w[i] = wi;
    }
    if n % 2 == 1 {
        x[m / 2] = 0.0;
    }
    (x, w)
}

pub const MIN_NODES_2D: usize = 64;
pub const MIN_THETA_3D: usize = 32;
pub const MIN_PHI_3D: usize = 64;
pub const DEFAULT_NODES_2D: usize = 256;
pub const DEFAULT_THETA_3D: usize = 65;
pub const DEFAULT_PHI_3D: usize = 128;

/// Quadrature on `S^{d-1}` for integrands depending only on `ω_i²`.
///
/// Nodes related by the reflections `ω_i → −ω_i` carry identical squared
/// coordinates and are merged, so the stored rule is an octant (quadrant)
/// of the full product rule with multiplicities folded into the weights.
#[derive(Clone, Debug)]
pub struct SphereRule {
    pub dim: usize,
    /// Squared coordinates `ω_i²` per node; unused entries are zero.
    pub sq: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn default_for(dim: usize) -> Self {
        match dim {
            2 => Self::circle(DEFAULT_NODES_2D).expect("default rule is valid"),
            _ => Self::sphere(DEFAULT_THETA_3D, DEFAULT_PHI_3D).expect("default rule is valid"),
        }
    }

    /// Composite trapezoid rule with `n` equispaced nodes on the circle.
    pub fn circle(n: usize) -> Result<Self, PotentialError> {
        if n < MIN_NODES_2D {
            return Err(PotentialError::QuadratureUnderResolved(format!(
                "circle rule needs at least {MIN_NODES_2D} nodes, got {n}"
            )));
        }
        if n % 4 != 0 {
            return Err(PotentialError::QuadratureUnderResolved(format!(
                "circle node count must be a multiple of 4, got {n}"
            )));
        }
        let h = 2.0 * PI / n as f64;
        let mut sq = Vec::new();
        let mut weights = Vec::new();
        for k in 0..=n / 4 {
            let (s, c) = (h * k as f64).sin_cos();
            let mult = if k == 0 || k == n / 4 { 2.0 } else { 4.0 };
            sq.push([c * c, s * s, 0.0]);
            weights.push(mult * h);
        }
        Ok(Self { dim: 2, sq, weights })
    }

    /// Gauss-Lobatto in `cos θ` times trapezoid in `φ`.
    pub fn sphere(n_theta: usize, n_phi: usize) -> Result<Self, PotentialError> {
        if n_theta < MIN_THETA_3D || n_phi < MIN_PHI_3D {
            return Err(PotentialError::QuadratureUnderResolved(format!(
                "sphere rule needs at least {MIN_THETA_3D}x{MIN_PHI_3D} nodes, got {n_theta}x{n_phi}"
            )));
        }
        if n_phi % 4 != 0 {
            return Err(PotentialError::QuadratureUnderResolved(format!(
                "azimuthal node count must be a multiple of 4, got {n_phi}"
            )));
        }
        let (xs, wx) = gauss_lobatto(n_theta);
        let h = 2.0 * PI / n_phi as f64;
        let mut sq = Vec::new();
        let mut weights = Vec::new();
        for (&x, &w) in xs.iter().zip(wx.iter()) {
            if x < 0.0 {
                continue;
            }
            let mult_x = if x == 0.0 { 1.0 } else { 2.0 };
            if x == 1.0 {
                sq.push([0.0, 0.0, 1.0]);
                weights.push(mult_x * w * 2.0 * PI);
                continue;
            }
            let st2 = 1.0 - x * x;
            for k in 0..=n_phi / 4 {
                let (s, c) = (h * k as f64).sin_cos();
                let mult_phi = if k == 0 || k == n_phi / 4 { 2.0 } else { 4.0 };
                sq.push([st2 * c * c, st2 * s * s, x * x]);
                weights.push(mult_x * w * mult_phi * h);
            }
        }
        Ok(Self { dim: 3, sq, weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `|S^{d-1}|` as integrated by the rule.
    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Exact surface area of `S^{d-1}`.
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}
