//! Shared numerical kernels.

use crate::error::{Error, Result};

/// Tolerance for the symmetry check on dense operators.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Largest operator the Jacobi oracle accepts.
pub const JACOBI_MAX_DIM: usize = 2048;

const JACOBI_MAX_SWEEPS: usize = 100;

/// `ln Σ exp(v)`, shifted by the maximum so large arguments do not overflow.
///
/// `-∞` entries contribute nothing; an all `-∞` input returns `-∞`.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if max.is_infinite() {
        return Ok(max);
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Real symmetric matrix.
///
/// Dense operators remember their bandwidth so that matrix-vector products on
/// banded matrices (finite-difference Hamiltonians) skip the zero entries.
#[derive(Debug, Clone, PartialEq)]
pub enum HermitianOperator {
    Diagonal(Vec<f64>),
    DenseSymmetric(SymmetricMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    data: Vec<f64>,
    bandwidth: usize,
}

impl SymmetricMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim + col]
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim)
    }
}

impl HermitianOperator {
    pub fn diagonal(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("operator dimension must be at least 1".into()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("operator entries must be finite".into()));
        }
        Ok(Self::Diagonal(entries))
    }

    /// Builds a dense operator; rejects non-square, non-finite or asymmetric input.
    pub fn dense(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidArgument("operator dimension must be at least 1".into()));
        }
        if let Some(r) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::Shape(format!("row {r} has {} entries, expected {dim}", rows[r].len())));
        }
        let data = rows.concat();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("operator entries must be finite".into()));
        }
        let mut bandwidth = 0;
        for a in 0..dim {
            for b in (a + 1)..dim {
                let (x, y) = (data[a * dim + b], data[b * dim + a]);
                if (x - y).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "matrix is not symmetric at ({a}, {b}): {x} vs {y}"
                    )));
                }
                if x != 0.0 || y != 0.0 {
                    bandwidth = bandwidth.max(b - a);
                }
            }
        }
        Ok(Self::DenseSymmetric(SymmetricMatrix { dim, data, bandwidth }))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Diagonal(d) => d.len(),
            Self::DenseSymmetric(m) => m.dim,
        }
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        match self {
            Self::Diagonal(d) => {
                if row == col {
                    d[row]
                } else {
                    0.0
                }
            }
            Self::DenseSymmetric(m) => m.get(row, col),
        }
    }

    pub fn to_dense_rows(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|r| (0..n).map(|c| self.entry(r, c)).collect()).collect()
    }

    /// `out = H x`.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::Diagonal(d) => {
                for ((o, h), v) in out.iter_mut().zip(d).zip(x) {
                    *o = h * v;
                }
            }
            Self::DenseSymmetric(m) => {
                let n = m.dim;
                for (r, o) in out.iter_mut().enumerate() {
                    let lo = r.saturating_sub(m.bandwidth);
                    let hi = (r + m.bandwidth + 1).min(n);
                    let row = &m.data[r * n..(r + 1) * n];
                    *o = row[lo..hi].iter().zip(&x[lo..hi]).map(|(a, b)| a * b).sum();
                }
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out);
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|k| self.entry(k, k)).sum()
    }

    /// Gershgorin bound on the spectral radius: max absolute row sum.
    pub fn gershgorin_radius(&self) -> f64 {
        match self {
            Self::Diagonal(d) => d.iter().fold(0.0, |m, v| m.max(v.abs())),
            Self::DenseSymmetric(m) => m
                .rows()
                .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max),
        }
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        (0..self.dim()).fold(0.0, |m, k| m.max(self.entry(k, k).abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[k]` pairs with `eigenvalues[k]`; unit norm, mutually orthogonal.
    pub eigenvectors: Vec<Vec<f64>>,
    pub sweeps: usize,
}

impl EigenDecomposition {
    /// Index of the eigenvalue closest to `value`, if it lies within `tol`.
    pub fn match_eigenvalue(&self, value: f64, tol: f64) -> Option<usize> {
        self.eigenvalues
            .iter()
            .enumerate()
            .map(|(k, l)| (k, (l - value).abs()))
            .filter(|&(_, d)| d <= tol)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(k, _)| k)
    }
}

/// Cyclic Jacobi eigensolver for real symmetric matrices.
///
/// Every sweep visits each upper-triangular pair once and applies the plane
/// rotation that annihilates it (Rutishauser's formulation). Sweeps stop once
/// the off-diagonal Frobenius norm drops to `1e-12 · ||H||_F`; a final sweep
/// is always run after that point, which with quadratic convergence leaves the
/// off-diagonal mass at rounding level.
pub fn jacobi_eigen(h: &HermitianOperator) -> Result<EigenDecomposition> {
    let n = h.dim();
    if n > JACOBI_MAX_DIM {
        return Err(Error::InvalidArgument(format!(
            "jacobi oracle supports dimension <= {JACOBI_MAX_DIM}, got {n}"
        )));
    }
    let mut a: Vec<f64> = h.to_dense_rows().concat();
    let mut v = vec![0.0; n * n];
    for k in 0..n {
        v[k * n + k] = 1.0;
    }

    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let off_norm = |a: &[f64]| {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += 2.0 * a[p * n + q] * a[p * n + q];
            }
        }
        s.sqrt()
    };
    let threshold = 1e-12 * norm;

    let mut sweeps = 0;
    let mut polished = false;
    loop {
        let off = off_norm(&a);
        if off <= threshold || off == 0.0 {
            if polished || off == 0.0 {
                break;
            }
            polished = true;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, residual: off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[p * n + p], a[q * n + q]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, n, p, q, c, s, t);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x * n + x].total_cmp(&a[y * n + y]));
    Ok(EigenDecomposition {
        eigenvalues: order.iter().map(|&k| a[k * n + k]).collect(),
        eigenvectors: order
            .iter()
            .map(|&k| (0..n).map(|r| v[r * n + k]).collect())
            .collect(),
        sweeps,
    })
}

/// Applies `A ← Jᵀ A J` and `V ← V J` for the rotation in plane `(p, q)`.
#[allow(clippy::too_many_arguments)]
fn rotate(a: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64, t: f64) {
    let apq = a[p * n + q];
    a[p * n + p] -= t * apq;
    a[q * n + q] += t * apq;
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let (arp, arq) = (a[r * n + p], a[r * n + q]);
        let new_p = c * arp - s * arq;
        let new_q = s * arp + c * arq;
        a[r * n + p] = new_p;
        a[p * n + r] = new_p;
        a[r * n + q] = new_q;
        a[q * n + r] = new_q;
    }
    for r in 0..n {
        let (vrp, vrq) = (v[r * n + p], v[r * n + q]);
        v[r * n + p] = c * vrp - s * vrq;
        v[r * n + q] = s * vrp + c * vrq;
    }
}

/// One classical fourth-order Runge-Kutta step of `y' = f(y)`.
///
/// `derivative(y, out)` writes `f(y)` into `out`.
pub fn rk4_step<F>(mut derivative: F, state: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let n = state.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    derivative(state, &mut k1);
    check_finite(&k1)?;
    for i in 0..n {
        tmp[i] = state[i] + 0.5 * dt * k1[i];
    }
    derivative(&tmp, &mut k2);
    check_finite(&k2)?;
    for i in 0..n {
        tmp[i] = state[i] + 0.5 * dt * k2[i];
    }
    derivative(&tmp, &mut k3);
    check_finite(&k3)?;
    for i in 0..n {
        tmp[i] = state[i] + dt * k3[i];
    }
    derivative(&tmp, &mut k4);
    check_finite(&k4)?;

    Ok((0..n)
        .map(|i| state[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            step: 0,
            what: "derivative".into(),
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
