//! Symmetric trace-free matrices in two and three dimensions.
//!
//! A [`Sym0Matrix`] stores only its independent components:
//!
//! * `d = 2`: `(q11, q12)`
//! * `d = 3`: `(q11, q22, q12, q13, q23)`
//!
//! Full matrices are handled as [`Mat`], a 3×3 array of which only the
//! leading `d×d` block is meaningful.

use std::f64::consts::PI;

/// Dense 3×3 storage; for `d = 2` only the upper-left 2×2 block is used.
pub type Mat = [[f64; 3]; 3];

pub const ZERO_MAT: Mat = [[0.0; 3]; 3];

pub fn identity(dim: usize) -> Mat {
    let mut m = ZERO_MAT;
    for (i, row) in m.iter_mut().enumerate().take(dim) {
        row[i] = 1.0;
    }
    m
}

/// Number of independent components of Sym0(d).
pub const fn n_components(dim: usize) -> usize {
    dim * (dim + 1) / 2 - 1
}

pub fn check_dim(dim: usize) {
    assert!(dim == 2 || dim == 3, "dimension must be 2 or 3, got {dim}");
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sym0Matrix {
    dim: usize,
    comps: [f64; 5],
}

impl Sym0Matrix {
    pub fn zero(dim: usize) -> Self {
        check_dim(dim);
        Self { dim, comps: [0.0; 5] }
    }

    /// Builds from the canonical component vector. Panics if the length does
    /// not match `n_components(dim)`.
    pub fn from_components(dim: usize, comps: &[f64]) -> Self {
        check_dim(dim);
        assert_eq!(
            comps.len(),
            n_components(dim),
            "Sym0({dim}) has {} components",
            n_components(dim)
        );
        let mut c = [0.0; 5];
        c[..comps.len()].copy_from_slice(comps);
        Self { dim, comps: c }
    }

    /// Reads the components of a full matrix assumed symmetric and trace-free.
    /// Off-diagonal entries are averaged; no projection is applied.
    pub fn from_mat_unchecked(dim: usize, m: &Mat) -> Self {
        check_dim(dim);
        let mut c = [0.0; 5];
        if dim == 2 {
            c[0] = 0.5 * (m[0][0] - m[1][1]);
            c[1] = 0.5 * (m[0][1] + m[1][0]);
        } else {
            // keep the diagonal trace-free even when `m` carries rounding in its trace
            let tr = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
            c[0] = m[0][0] - tr;
            c[1] = m[1][1] - tr;
            c[2] = 0.5 * (m[0][1] + m[1][0]);
            c[3] = 0.5 * (m[0][2] + m[2][0]);
            c[4] = 0.5 * (m[1][2] + m[2][1]);
        }
        Self { dim, comps: c }
    }

    pub fn diag(eigs: &[f64]) -> Self {
        let dim = eigs.len();
        let mut m = ZERO_MAT;
        for i in 0..dim {
            m[i][i] = eigs[i];
        }
        trace_free(dim, &m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[f64] {
        &self.comps[..n_components(self.dim)]
    }

    pub fn components_mut(&mut self) -> &mut [f64] {
        let n = n_components(self.dim);
        &mut self.comps[..n]
    }

    pub fn to_mat(&self) -> Mat {
        let c = &self.comps;
        let mut m = ZERO_MAT;
        if self.dim == 2 {
            m[0][0] = c[0];
            m[1][1] = -c[0];
            m[0][1] = c[1];
            m[1][0] = c[1];
        } else {
            m[0][0] = c[0];
            m[1][1] = c[1];
            m[2][2] = -c[0] - c[1];
            m[0][1] = c[2];
            m[1][0] = c[2];
            m[0][2] = c[3];
            m[2][0] = c[3];
            m[1][2] = c[4];
            m[2][1] = c[4];
        }
        m
    }

    /// Frobenius inner product `tr[A B]` of the full matrices.
    pub fn dot(&self, other: &Self) -> f64 {
        frob_dot_components(self.dim, self.components(), other.components())
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        out.comps.iter_mut().for_each(|c| *c *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = *self;
        for (a, b) in out.comps.iter_mut().zip(other.comps.iter()) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// `R Q Rᵀ`.
    pub fn conjugate(&self, r: &Mat) -> Self {
        let m = self.to_mat();
        let rm = matmul(self.dim, r, &m);
        let out = matmul(self.dim, &rm, &transpose(self.dim, r));
        Self::from_mat_unchecked(self.dim, &out)
    }

    /// Coordinates in a Frobenius-orthonormal basis of Sym0(d).
    ///
    /// The first `d - 1` coordinates span the diagonal matrices, the rest the
    /// symmetric off-diagonal directions `(E_ij + E_ji)/√2`.
    pub fn to_frobenius_coords(&self) -> [f64; 5] {
        let c = &self.comps;
        let s2 = std::f64::consts::SQRT_2;
        let mut x = [0.0; 5];
        if self.dim == 2 {
            x[0] = s2 * c[0];
            x[1] = s2 * c[1];
        } else {
            let (q11, q22) = (c[0], c[1]);
            let q33 = -q11 - q22;
            x[0] = (q11 - q22) / s2;
            x[1] = (q11 + q22 - 2.0 * q33) / 6f64.sqrt();
            x[2] = s2 * c[2];
            x[3] = s2 * c[3];
            x[4] = s2 * c[4];
        }
        x
    }

    pub fn from_frobenius_coords(dim: usize, x: &[f64]) -> Self {
        check_dim(dim);
        let s2 = std::f64::consts::SQRT_2;
        let mut c = [0.0; 5];
        if dim == 2 {
            c[0] = x[0] / s2;
            c[1] = x[1] / s2;
        } else {
            // diag = a·(1,-1,0)/√2 + b·(1,1,-2)/√6
            let (a, b) = (x[0], x[1]);
            let s6 = 6f64.sqrt();
            c[0] = a / s2 + b / s6;
            c[1] = -a / s2 + b / s6;
            c[2] = x[2] / s2;
            c[3] = x[3] / s2;
            c[4] = x[4] / s2;
        }
        Self { dim, comps: c }
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.is_finite())
    }
}

/// Frobenius inner product of two component vectors of Sym0(d).
pub fn frob_dot_components(dim: usize, a: &[f64], b: &[f64]) -> f64 {
    if dim == 2 {
        2.0 * (a[0] * b[0] + a[1] * b[1])
    } else {
        a[0] * b[0]
            + a[1] * b[1]
            + (a[0] + a[1]) * (b[0] + b[1])
            + 2.0 * (a[2] * b[2] + a[3] * b[3] + a[4] * b[4])
    }
}

/// Partial derivatives with respect to the stored components of a scalar
/// function whose Frobenius gradient is `g`.
pub fn component_gradient(g: &Sym0Matrix) -> [f64; 5] {
    let c = g.components();
    let mut out = [0.0; 5];
    if g.dim() == 2 {
        out[0] = 2.0 * c[0];
        out[1] = 2.0 * c[1];
    } else {
        out[0] = 2.0 * c[0] + c[1];
        out[1] = c[0] + 2.0 * c[1];
        out[2] = 2.0 * c[2];
        out[3] = 2.0 * c[3];
        out[4] = 2.0 * c[4];
    }
    out
}

pub fn matmul(dim: usize, a: &Mat, b: &Mat) -> Mat {
    let mut out = ZERO_MAT;
    for i in 0..dim {
        for j in 0..dim {
            let mut s = 0.0;
            for k in 0..dim {
                s += a[i][k] * b[k][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn transpose(dim: usize, a: &Mat) -> Mat {
    let mut out = ZERO_MAT;
    for i in 0..dim {
        for j in 0..dim {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn trace(dim: usize, a: &Mat) -> f64 {
    (0..dim).map(|i| a[i][i]).sum()
}

/// `Σ_ij A_ij B_ij`.
pub fn frob(dim: usize, a: &Mat, b: &Mat) -> f64 {
    let mut s = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

pub fn mat_add(dim: usize, a: &Mat, b: &Mat) -> Mat {
    let mut out = ZERO_MAT;
    for i in 0..dim {
        for j in 0..dim {
            out[i][j] = a[i][j] + b[i][j];
        }
    }
    out
}

pub fn mat_scale(dim: usize, a: &Mat, s: f64) -> Mat {
    let mut out = ZERO_MAT;
    for i in 0..dim {
        for j in 0..dim {
            out[i][j] = a[i][j] * s;
        }
    }
    out
}

/// Trace-free symmetric part `(A + Aᵀ)/2 − tr[A]/d · I`.
pub fn trace_free(dim: usize, a: &Mat) -> Sym0Matrix {
    check_dim(dim);
    let tr = trace(dim, a) / dim as f64;
    let mut s = ZERO_MAT;
    for i in 0..dim {
        for j in 0..dim {
            s[i][j] = 0.5 * (a[i][j] + a[j][i]);
        }
        s[i][i] -= tr;
    }
    Sym0Matrix::from_mat_unchecked(dim, &s)
}

/// Eigen-decomposition of a symmetric trace-free matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spectrum {
    pub dim: usize,
    /// Ascending; only the first `dim` entries are meaningful.
    pub eigenvalues: [f64; 3],
    /// Columns are orthonormal eigenvectors, `det = +1`.
    pub frame: Mat,
}

impl Spectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues[..self.dim]
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.dim - 1]
    }

    /// `frame · diag(values) · frameᵀ`.
    pub fn reconstruct_with(&self, values: &[f64]) -> Mat {
        let d = self.dim;
        let v = &self.frame;
        let mut out = ZERO_MAT;
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += v[i][k] * values[k] * v[j][k];
                }
                out[i][j] = s;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Mat {
        self.reconstruct_with(self.eigenvalues())
    }
}

pub fn spectrum(q: &Sym0Matrix) -> Spectrum {
    match q.dim() {
        2 => spectrum2(q),
        _ => spectrum3(q),
    }
}

fn spectrum2(q: &Sym0Matrix) -> Spectrum {
    let (a, b) = (q.comps[0], q.comps[1]);
    let r = a.hypot(b);
    let phi = 0.5 * b.atan2(a);
    let (s, c) = phi.sin_cos();
    let mut frame = ZERO_MAT;
    // columns: e_- = (sin, -cos), e_+ = (cos, sin); det = +1
    frame[0][0] = s;
    frame[1][0] = -c;
    frame[0][1] = c;
    frame[1][1] = s;
    Spectrum {
        dim: 2,
        eigenvalues: [-r, r, 0.0],
        frame,
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = dot3(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

fn quad_form(m: &Mat, u: [f64; 3], v: [f64; 3]) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += u[i] * m[i][j] * v[j];
        }
    }
    s
}

/// Trigonometric roots of the depressed cubic, ascending.
fn cubic_eigenvalues(m: &Mat) -> [f64; 3] {
    let p2 = frob(3, m, m) / 6.0;
    if p2 == 0.0 {
        return [0.0; 3];
    }
    let p = p2.sqrt();
    let b = mat_scale(3, m, 1.0 / p);
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (0.5 * det).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let hi = 2.0 * p * phi.cos();
    let lo = 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    [lo, -hi - lo, hi]
}

fn spectrum3(q: &Sym0Matrix) -> Spectrum {
    let m = q.to_mat();
    let eig = cubic_eigenvalues(&m);
    if eig == [0.0; 3] {
        return Spectrum {
            dim: 3,
            eigenvalues: [0.0; 3],
            frame: identity(3),
        };
    }

    // Eigenvector of the best separated eigenvalue from the largest row cross
    // product, then an exact 2x2 Jacobi rotation in its orthogonal complement.
    let (lo, mid, hi) = (eig[0], eig[1], eig[2]);
    let lam = if hi - mid >= mid - lo { hi } else { lo };
    let mut shifted = m;
    for (i, row) in shifted.iter_mut().enumerate() {
        row[i] -= lam;
    }
    let rows = [shifted[0], shifted[1], shifted[2]];
    let cands = [
        cross(rows[0], rows[1]),
        cross(rows[0], rows[2]),
        cross(rows[1], rows[2]),
    ];
    let mut best = 0;
    for k in 1..3 {
        if dot3(cands[k], cands[k]) > dot3(cands[best], cands[best]) {
            best = k;
        }
    }
    let v = normalize(cands[best]);

    // deterministic complement: Gram-Schmidt on the axis least aligned with v
    let mut axis = 0;
    for k in 1..3 {
        if v[k].abs() < v[axis].abs() {
            axis = k;
        }
    }
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let proj = dot3(e, v);
    let u = normalize([e[0] - proj * v[0], e[1] - proj * v[1], e[2] - proj * v[2]]);
    let w = cross(v, u);

    let a = quad_form(&m, u, u);
    let b = quad_form(&m, u, w);
    let c = quad_form(&m, w, w);
    let theta = 0.5 * (2.0 * b).atan2(a - c);
    let (s, co) = theta.sin_cos();
    let e1 = [
        co * u[0] + s * w[0],
        co * u[1] + s * w[1],
        co * u[2] + s * w[2],
    ];
    let e2 = [
        -s * u[0] + co * w[0],
        -s * u[1] + co * w[1],
        -s * u[2] + co * w[2],
    ];

    let mut pairs = [
        (quad_form(&m, v, v), v),
        (quad_form(&m, e1, e1), e1),
        (quad_form(&m, e2, e2), e2),
    ];
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut frame = ZERO_MAT;
    for (k, (_, vec)) in pairs.iter().enumerate() {
        for i in 0..3 {
            frame[i][k] = vec[i];
        }
    }
    let det = dot3(cross(pairs[0].1, pairs[1].1), pairs[2].1);
    if det < 0.0 {
        for row in frame.iter_mut() {
            row[2] = -row[2];
        }
    }
    let mut values = [pairs[0].0, pairs[1].0, pairs[2].0];
    // rounding can leave a ~1e-17 trace; push it into the middle value
    let tr = values.iter().sum::<f64>();
    values[1] -= tr;
    Spectrum {
        dim: 3,
        eigenvalues: values,
        frame,
    }
}

/// `min(λ_min + 1/d, 1 − 1/d − λ_max)`; positive iff `Q` lies inside the
/// physical region.
pub fn physicality_margin(q: &Sym0Matrix) -> f64 {
    margin_of_eigenvalues(spectrum(q).eigenvalues())
}

pub fn margin_of_eigenvalues(eigs: &[f64]) -> f64 {
    let d = eigs.len() as f64;
    let lo = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo + 1.0 / d).min(1.0 - 1.0 / d - hi)
}

/// Rotation matrix in SO(d) from uniform samples in `[0, 1)`.
///
/// `d = 2` uses `u[0]` as the angle fraction; `d = 3` maps `u[0..3]` to a
/// unit quaternion (Shoemake), giving the Haar measure.
pub fn rotation_from_uniform(dim: usize, u: &[f64]) -> Mat {
    let mut r = ZERO_MAT;
    if dim == 2 {
        let (s, c) = (2.0 * PI * u[0]).sin_cos();
        r[0][0] = c;
        r[0][1] = -s;
        r[1][0] = s;
        r[1][1] = c;
        return r;
    }
    let (u1, u2, u3) = (u[0], u[1], u[2]);
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    let (w, x, y, z) = (
        a * (2.0 * PI * u2).sin(),
        a * (2.0 * PI * u2).cos(),
        b * (2.0 * PI * u3).sin(),
        b * (2.0 * PI * u3).cos(),
    );
    r[0] = [
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - z * w),
        2.0 * (x * z + y * w),
    ];
    r[1] = [
        2.0 * (x * y + z * w),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - x * w),
    ];
    r[2] = [
        2.0 * (x * z - y * w),
        2.0 * (y * z + x * w),
        1.0 - 2.0 * (x * x + y * y),
    ];
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng, dim: usize) -> Mat {
        let mut m = ZERO_MAT;
        for row in m.iter_mut().take(dim) {
            for v in row.iter_mut().take(dim) {
                *v = rng.random_range(-1.0..1.0);
            }
        }
        m
    }

    fn random_sym0(rng: &mut ChaCha8Rng, dim: usize) -> Sym0Matrix {
        trace_free(dim, &random_mat(rng, dim))
    }

    #[test]
    fn trace_free_examples() {
        assert_eq!(trace_free(3, &identity(3)), Sym0Matrix::zero(3));
        let mut d = ZERO_MAT;
        d[0][0] = 1.0;
        d[1][1] = 2.0;
        d[2][2] = 3.0;
        let tf = trace_free(3, &d).to_mat();
        assert_eq!([tf[0][0], tf[1][1], tf[2][2]], [-1.0, 0.0, 1.0]);
        let q = Sym0Matrix::from_components(3, &[0.1, -0.3, 0.2, 0.05, -0.4]);
        assert_eq!(trace_free(3, &q.to_mat()), q);
    }

    #[test]
    fn trace_free_is_projection_orthogonal_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in [2, 3] {
            for _ in 0..1000 {
                let a = random_mat(&mut rng, dim);
                let p = trace_free(dim, &a);
                let pp = trace_free(dim, &p.to_mat());
                let diff = p.sub(&pp).norm();
                assert!(diff <= 1e-13);
                assert!(frob(dim, &p.to_mat(), &identity(dim)).abs() <= 1e-13);
                let m = p.to_mat();
                assert!(trace(dim, &m).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn spectrum_examples() {
        let s = spectrum(&Sym0Matrix::zero(3));
        assert_eq!(s.eigenvalues(), &[0.0, 0.0, 0.0]);
        assert_eq!(s.frame, identity(3));

        let q = Sym0Matrix::from_components(2, &[0.3, 0.4]);
        let s = spectrum(&q);
        assert!((s.eigenvalues[0] + 0.5).abs() < 1e-15);
        assert!((s.eigenvalues[1] - 0.5).abs() < 1e-15);

        let q = Sym0Matrix::diag(&[0.4, -0.1, -0.3]);
        let s = spectrum(&q);
        let expect = [-0.3, -0.1, 0.4];
        for k in 0..3 {
            assert!((s.eigenvalues[k] - expect[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn spectrum_reconstructs_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in [2, 3] {
            for _ in 0..1000 {
                let q = random_sym0(&mut rng, dim);
                let s = spectrum(&q);
                let back = Sym0Matrix::from_mat_unchecked(dim, &s.reconstruct());
                let rel = back.sub(&q).norm() / q.norm().max(1e-300);
                assert!(rel <= 1e-10, "relative reconstruction error {rel}");
                let vtv = matmul(dim, &transpose(dim, &s.frame), &s.frame);
                for i in 0..dim {
                    for j in 0..dim {
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!((vtv[i][j] - want).abs() <= 1e-12);
                    }
                }
                assert!(s.eigenvalues().iter().sum::<f64>().abs() <= 1e-12);
                assert!(s.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }

    #[test]
    fn spectrum_handles_degenerate_eigenvalues() {
        for eigs in [[0.2, 0.2, -0.4], [-0.1, -0.1, 0.2], [1e-9, 1e-9, -2e-9]] {
            let q = Sym0Matrix::diag(&eigs);
            let r = rotation_from_uniform(3, &[0.3, 0.6, 0.1]);
            let q = q.conjugate(&r);
            let s = spectrum(&q);
            let back = Sym0Matrix::from_mat_unchecked(3, &s.reconstruct());
            assert!(back.sub(&q).norm() <= 1e-12 * q.norm().max(1.0));
            let det = dot3(
                cross(
                    [s.frame[0][0], s.frame[1][0], s.frame[2][0]],
                    [s.frame[0][1], s.frame[1][1], s.frame[2][1]],
                ),
                [s.frame[0][2], s.frame[1][2], s.frame[2][2]],
            );
            assert!((det - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn margin_examples() {
        assert!((physicality_margin(&Sym0Matrix::zero(3)) - 1.0 / 3.0).abs() < 1e-15);
        let q = Sym0Matrix::from_components(2, &[0.3, 0.4]);
        assert!(physicality_margin(&q).abs() < 1e-15);
        let q = Sym0Matrix::diag(&[0.4, -0.1, -0.3]);
        assert!((physicality_margin(&q) - 1.0 / 30.0).abs() < 1e-14);
    }

    #[test]
    fn margin_is_rotation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in [2, 3] {
            for _ in 0..1000 {
                let q = random_sym0(&mut rng, dim).scale(0.3);
                let u: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
                let r = rotation_from_uniform(dim, &u);
                let a = physicality_margin(&q);
                let b = physicality_margin(&q.conjugate(&r));
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn frobenius_coordinates_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dim in [2, 3] {
            for _ in 0..100 {
                let a = random_sym0(&mut rng, dim);
                let b = random_sym0(&mut rng, dim);
                let (xa, xb) = (a.to_frobenius_coords(), b.to_frobenius_coords());
                let n = n_components(dim);
                let euclid: f64 = (0..n).map(|k| xa[k] * xb[k]).sum();
                assert!((euclid - a.dot(&b)).abs() < 1e-14);
                let back = Sym0Matrix::from_frobenius_coords(dim, &xa[..n]);
                assert!(back.sub(&a).norm() < 1e-15);
            }
        }
    }
}
