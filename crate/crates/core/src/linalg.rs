//! Dense complex linear algebra for small Hermitian systems.
//!
//! Everything here is sized for n up to ~16: matrices are row-major `Vec`s and
//! the eigensolver is a cyclic complex Jacobi sweep with a closed-form 2x2 path.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const HERMITIAN_TOL: f64 = 1e-12;
const NORM_FLOOR: f64 = 1e-14;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Square complex matrix, row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.6}{:+.6}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { dim, data }
    }

    /// Builds a matrix from rows, checking squareness and finiteness.
    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::NotSquare {
                rows: 0,
                row: 0,
                cols: 0,
            });
        }
        let mut data = Vec::with_capacity(dim * dim);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(Error::NotSquare {
                    rows: dim,
                    row: i,
                    cols: row.len(),
                });
            }
            for (j, z) in row.into_iter().enumerate() {
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                data.push(z);
            }
        }
        Ok(ComplexMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> Vec<Vec<C64>> {
        self.data.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `self += s * other`
    pub fn add_scaled_assign(&mut self, s: f64, other: &ComplexMatrix) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        check_dims(self.dim, other.dim)?;
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[C64]) -> Result<Vec<C64>> {
        check_dims(self.dim, v.len())?;
        Ok(self
            .data
            .chunks(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frobenius inner product `tr(A^H B)`.
    pub fn frobenius_inner(&self, other: &ComplexMatrix) -> C64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// `(A + A^H) / 2`
    pub fn hermitized(&self) -> ComplexMatrix {
        Self::from_fn(self.dim, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.max_abs() <= tol
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matrix add");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matrix sub");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul<f64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: f64) -> ComplexMatrix {
        self.scale_real(rhs)
    }
}

/// A matrix that equals its conjugate transpose (within [`HERMITIAN_TOL`]).
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator(ComplexMatrix);

impl HermitianOperator {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        let deviation = m.hermiticity_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(HermitianOperator(m))
    }

    /// Wraps a matrix known to be Hermitian up to rounding (real combinations
    /// of Hermitian operators, hermitized interpolants).
    pub(crate) fn new_unchecked(m: ComplexMatrix) -> Self {
        debug_assert!(m.hermiticity_deviation() <= 1e-9 * m.max_abs().max(1.0));
        HermitianOperator(m)
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianOperator(ComplexMatrix::zeros(dim))
    }

    pub fn identity(dim: usize) -> Self {
        HermitianOperator(ComplexMatrix::identity(dim))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn scale(&self, s: f64) -> Self {
        HermitianOperator(self.0.scale_real(s))
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: f64, other: &HermitianOperator) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        let mut m = self.0.clone();
        m.add_scaled_assign(s, &other.0);
        Ok(HermitianOperator(m))
    }

    pub fn sigma_x() -> Self {
        pauli_combo(1.0, 0.0, 0.0, 0.0)
    }

    pub fn sigma_y() -> Self {
        pauli_combo(0.0, 1.0, 0.0, 0.0)
    }

    pub fn sigma_z() -> Self {
        pauli_combo(0.0, 0.0, 1.0, 0.0)
    }
}

/// A complex amplitude vector. `new` normalizes; integrator stages may carry
/// slightly unnormalized vectors through `from_amplitudes`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    /// Normalizing constructor.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        normalize(&StateVector { amps })
    }

    /// Takes the amplitudes as given, without normalizing.
    pub fn from_amplitudes(amps: Vec<C64>) -> Self {
        StateVector { amps }
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[k] = C64::new(1.0, 0.0);
        StateVector { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> C64 {
        inner(&self.amps, &other.amps)
    }

    pub fn scaled(&self, s: C64) -> StateVector {
        StateVector {
            amps: self.amps.iter().map(|z| z * s).collect(),
        }
    }
}

/// `<a|b>` for raw amplitude slices.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { left: a, right: b });
    }
    Ok(())
}

/// `[a, b] = ab - ba`; anti-Hermitian for Hermitian inputs.
pub fn commutator(a: &HermitianOperator, b: &HermitianOperator) -> Result<ComplexMatrix> {
    check_dims(a.dim(), b.dim())?;
    let ab = a.0.matmul(&b.0)?;
    let ba = b.0.matmul(&a.0)?;
    Ok(&ab - &ba)
}

/// `<psi|m|psi>` with no reality assertion.
pub fn expectation_complex(m: &ComplexMatrix, psi: &StateVector) -> Result<C64> {
    let mv = m.matvec(psi.amplitudes())?;
    Ok(inner(psi.amplitudes(), &mv))
}

/// `<psi|op|psi>`, real for a Hermitian operator.
pub fn expectation(op: &HermitianOperator, psi: &StateVector) -> Result<f64> {
    let z = expectation_complex(&op.0, psi)?;
    let scale = op.0.max_abs().max(1.0) * psi.norm().powi(2).max(1.0);
    if z.im.abs() > 1e-10 * scale {
        return Err(Error::NotReal { imag: z.im });
    }
    Ok(z.re)
}

pub fn normalize(psi: &StateVector) -> Result<StateVector> {
    let norm = psi.norm();
    if !norm.is_finite() || norm <= NORM_FLOOR {
        return Err(Error::ZeroNorm { norm });
    }
    Ok(StateVector {
        amps: psi.amps.iter().map(|z| z / norm).collect(),
    })
}

/// `cx σx + cy σy + cz σz + cid I` (2x2).
pub fn pauli_combo(cx: f64, cy: f64, cz: f64, cid: f64) -> HermitianOperator {
    HermitianOperator(ComplexMatrix {
        dim: 2,
        data: vec![c(cid + cz, 0.0), c(cx, -cy), c(cx, cy), c(cid - cz, 0.0)],
    })
}

/// Eigendecomposition of a Hermitian operator.
#[derive(Clone, Debug, PartialEq)]
pub struct Eigh {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, `vectors[k]` belongs to `values[k]`.
    pub vectors: Vec<StateVector>,
}

pub fn eigh(op: &HermitianOperator) -> Eigh {
    let n = op.dim();
    let (values, columns) = if n == 2 {
        eigh_2x2(&op.0)
    } else {
        jacobi_eigh(&op.0)
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let values: Vec<f64> = order.iter().map(|&k| values[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| StateVector {
            amps: fix_phase(columns[k].clone()),
        })
        .collect();
    Eigh { values, vectors }
}

/// Rotates the global phase so the first non-negligible component is real
/// and positive.
pub(crate) fn fix_phase(mut v: Vec<C64>) -> Vec<C64> {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-8 * max).copied() {
        let ph = z.conj() / z.norm();
        for a in v.iter_mut() {
            *a *= ph;
        }
    }
    v
}

fn eigh_2x2(m: &ComplexMatrix) -> (Vec<f64>, Vec<Vec<C64>>) {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = m[(0, 1)];
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    if b.norm() == 0.0 {
        return (vec![a, d], vec![vec![one, zero], vec![zero, one]]);
    }
    let mean = 0.5 * (a + d);
    let radius = (0.5 * (a - d)).hypot(b.norm());
    let vals = [mean - radius, mean + radius];
    let vecs = vals
        .iter()
        .map(|&lam| {
            let u1 = [b, C64::new(lam - a, 0.0)];
            let u2 = [C64::new(lam - d, 0.0), b.conj()];
            let u = if (lam - a).abs() >= (lam - d).abs() { u1 } else { u2 };
            let nrm = (u[0].norm_sqr() + u[1].norm_sqr()).sqrt();
            vec![u[0] / nrm, u[1] / nrm]
        })
        .collect();
    (vals.to_vec(), vecs)
}

/// Cyclic Jacobi for complex Hermitian matrices. Each rotation first removes
/// the phase of `a_pq`, then applies a real Givens rotation.
fn jacobi_eigh(m: &ComplexMatrix) -> (Vec<f64>, Vec<Vec<C64>>) {
    const MAX_SWEEPS: usize = 100;
    let n = m.dim;
    let mut a = m.hermitized();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                let phase = apq / r; // e^{i phi}
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = 0.5 * (2.0 * r).atan2(aqq - app);
                let (s, cth) = theta.sin_cos();
                // U acts on columns p, q:
                // U_pp = c, U_pq = s, U_qp = -s e^{-i phi}, U_qq = c e^{-i phi}
                let upp = C64::new(cth, 0.0);
                let upq = C64::new(s, 0.0);
                let uqp = -phase.conj() * s;
                let uqq = phase.conj() * cth;
                // A <- A U
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * upp + akq * uqp;
                    a[(k, q)] = akp * upq + akq * uqq;
                }
                // A <- U^H A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = upp.conj() * apk + uqp.conj() * aqk;
                    a[(q, k)] = upq.conj() * apk + uqq.conj() * aqk;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                // V <- V U
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * upp + vkq * uqp;
                    v[(k, q)] = vkp * upq + vkq * uqq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[(i, i)].re).collect();
    let columns = (0..n).map(|k| (0..n).map(|i| v[(i, k)]).collect()).collect();
    (values, columns)
}
