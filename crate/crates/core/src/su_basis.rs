//! Generalized Gell-Mann generators of su(N) and the Bloch-coordinate
//! conversions built on them.
//!
//! States are written as `rho = I/N + (1/2) theta . lambda` and observables as
//! `X = x0 I + x . lambda`, with the generators normalised to
//! `Tr(lambda_i lambda_j) = 2 delta_ij`.

use std::collections::BTreeMap;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, check_square, hermiticity_defect, trace_product, CMatrix, RMatrix, RVector, ONE, ZERO,
};

/// Entries of the structure constants below this magnitude are dropped.
pub const SPARSE_THRESHOLD: f64 = 1e-12;

/// Hermiticity / trace checks on incoming density matrices.
pub const STATE_TOL: f64 = 1e-10;

/// The ordered family of N^2 - 1 su(N) generators.
///
/// Ordering: all symmetric `E_jk + E_kj` (lexicographic j < k), then all
/// antisymmetric `-i(E_jk - E_kj)` in the same order, then the diagonal
/// members for l = 1..N-1.
#[derive(Debug, Clone)]
pub struct GeneratorBasis {
    dim: usize,
    generators: Vec<CMatrix>,
}

pub fn build_generators(dim: usize) -> Result<GeneratorBasis> {
    GeneratorBasis::new(dim)
}

impl GeneratorBasis {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        let mut generators = Vec::with_capacity(dim * dim - 1);
        let pairs: Vec<(usize, usize)> = (0..dim)
            .flat_map(|j| (j + 1..dim).map(move |k| (j, k)))
            .collect();
        for &(j, k) in &pairs {
            let mut m = CMatrix::zeros(dim, dim);
            m[(j, k)] = ONE;
            m[(k, j)] = ONE;
            generators.push(m);
        }
        for &(j, k) in &pairs {
            let mut m = CMatrix::zeros(dim, dim);
            m[(j, k)] = c(0.0, -1.0);
            m[(k, j)] = c(0.0, 1.0);
            generators.push(m);
        }
        for l in 1..dim {
            let scale = (2.0 / (l * (l + 1)) as f64).sqrt();
            let mut m = CMatrix::zeros(dim, dim);
            for i in 0..l {
                m[(i, i)] = c(scale, 0.0);
            }
            m[(l, l)] = c(-(l as f64) * scale, 0.0);
            generators.push(m);
        }
        Ok(Self { dim, generators })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of generators, N^2 - 1.
    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn generators(&self) -> &[CMatrix] {
        &self.generators
    }

    pub fn generator(&self, i: usize) -> &CMatrix {
        &self.generators[i]
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: n,
            });
        }
        Ok(())
    }

    /// `Re Tr(m lambda_i)` for every generator.
    pub fn trace_coefficients(&self, m: &CMatrix) -> RVector {
        DVector::from_iterator(
            self.len(),
            self.generators.iter().map(|g| trace_product(m, g).re),
        )
    }

    /// `sum_i w_i lambda_i`.
    pub fn combine(&self, w: &RVector) -> Result<CMatrix> {
        self.check_len(w.len())?;
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (g, &wi) in self.generators.iter().zip(w.iter()) {
            if wi != 0.0 {
                out += g * c(wi, 0.0);
            }
        }
        Ok(out)
    }

    pub fn state_to_bloch(&self, rho: &CMatrix) -> Result<BlochVector> {
        check_square(rho, self.dim)?;
        let herm = hermiticity_defect(rho);
        if herm > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix not Hermitian (defect {herm:.3e})"
            )));
        }
        let tr = rho.trace();
        if (tr - ONE).norm() > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "trace is {:.12} + {:.3e}i, expected 1",
                tr.re, tr.im
            )));
        }
        Ok(BlochVector(self.trace_coefficients(rho)))
    }

    /// `I/N + (1/2) theta . lambda`. Positivity is only checked when
    /// `validate_state` is set.
    pub fn bloch_to_state(&self, theta: &BlochVector, validate_state: bool) -> Result<CMatrix> {
        let mut rho = self.combine(&theta.0)? * c(0.5, 0.0);
        for i in 0..self.dim {
            rho[(i, i)] += c(1.0 / self.dim as f64, 0.0);
        }
        if validate_state {
            let min = linalg::min_hermitian_eigenvalue(&rho);
            if min < -STATE_TOL {
                return Err(Error::InvalidState(format!(
                    "Bloch vector lies outside the state space (min eigenvalue {min:.3e})"
                )));
            }
        }
        Ok(rho)
    }

    pub fn observable_from_matrix(&self, x: &CMatrix) -> Result<ObservableRepr> {
        check_square(x, self.dim)?;
        let herm = hermiticity_defect(x);
        if herm > STATE_TOL {
            return Err(Error::NotHermitian(herm));
        }
        Ok(ObservableRepr {
            x0: x.trace().re / self.dim as f64,
            x: self.trace_coefficients(x) * 0.5,
        })
    }

    pub fn observable_to_matrix(&self, obs: &ObservableRepr) -> Result<CMatrix> {
        let mut m = self.combine(&obs.x)?;
        for i in 0..self.dim {
            m[(i, i)] += c(obs.x0, 0.0);
        }
        Ok(m)
    }
}

/// Coefficients of a density matrix in the generator basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochVector(pub RVector);

impl BlochVector {
    pub fn new(theta: Vec<f64>) -> Self {
        Self(DVector::from_vec(theta))
    }

    pub fn zeros(len: usize) -> Self {
        Self(DVector::zeros(len))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// `X = x0 I + x . lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableRepr {
    pub x0: f64,
    pub x: RVector,
}

impl ObservableRepr {
    pub fn new(x0: f64, x: Vec<f64>) -> Self {
        Self {
            x0,
            x: DVector::from_vec(x),
        }
    }
}

/// `<X> = x0 + x . theta`.
pub fn expectation(obs: &ObservableRepr, theta: &BlochVector) -> Result<f64> {
    if obs.x.len() != theta.len() {
        return Err(Error::LengthMismatch {
            expected: obs.x.len(),
            found: theta.len(),
        });
    }
    Ok(obs.x0 + obs.x.dot(&theta.0))
}

/// Structure constants `f` (antisymmetric) and `g` (symmetric), stored sparsely
/// over all index permutations.
#[derive(Debug, Clone)]
pub struct StructureConstants {
    dim: usize,
    len: usize,
    f: BTreeMap<(usize, usize, usize), f64>,
    g: BTreeMap<(usize, usize, usize), f64>,
}

pub fn structure_constants(basis: &GeneratorBasis) -> StructureConstants {
    StructureConstants::new(basis)
}

impl StructureConstants {
    pub fn new(basis: &GeneratorBasis) -> Self {
        let n = basis.len();
        let gens = basis.generators();
        let mut f = BTreeMap::new();
        let mut g = BTreeMap::new();
        for i in 0..n {
            for j in 0..n {
                let prod = &gens[i] * &gens[j];
                for k in 0..n {
                    // t = Tr(l_i l_j l_k); Tr(l_j l_i l_k) = conj(t), so
                    // f = Im(t)/2 and g = Re(t)/2.
                    let t: Complex64 = trace_product(&prod, &gens[k]);
                    let fv = t.im / 2.0;
                    let gv = t.re / 2.0;
                    if fv.abs() >= SPARSE_THRESHOLD {
                        f.insert((i, j, k), fv);
                    }
                    if gv.abs() >= SPARSE_THRESHOLD {
                        g.insert((i, j, k), gv);
                    }
                }
            }
        }
        Self {
            dim: basis.dim(),
            len: n,
            f,
            g,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn f(&self, i: usize, j: usize, k: usize) -> f64 {
        self.f.get(&(i, j, k)).copied().unwrap_or(0.0)
    }

    pub fn g(&self, i: usize, j: usize, k: usize) -> f64 {
        self.g.get(&(i, j, k)).copied().unwrap_or(0.0)
    }

    pub fn f_entries(&self) -> impl Iterator<Item = (&(usize, usize, usize), &f64)> {
        self.f.iter()
    }

    pub fn g_entries(&self) -> impl Iterator<Item = (&(usize, usize, usize), &f64)> {
        self.g.iter()
    }

    /// `[G_s]_ij = sum_k g_ijk s_k`.
    pub fn g_matrix(&self, s: &RVector) -> Result<RMatrix> {
        if s.len() != self.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                found: s.len(),
            });
        }
        let mut out = RMatrix::zeros(self.len, self.len);
        for (&(i, j, k), &v) in &self.g {
            out[(i, j)] += v * s[k];
        }
        Ok(out)
    }
}

pub fn g_matrix(s: &RVector, sc: &StructureConstants) -> Result<RMatrix> {
    sc.g_matrix(s)
}

/// `[A, B]` and `{A, B}` helpers used by the identity checks.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

/// Largest elementwise deviation of the commutator/anticommutator
/// reconstruction identities over all generator pairs.
pub fn reconstruction_defect(basis: &GeneratorBasis, sc: &StructureConstants) -> f64 {
    let n = basis.len();
    let gens = basis.generators();
    let id = linalg::identity(basis.dim());
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut comm = CMatrix::zeros(basis.dim(), basis.dim());
            let mut anti = if i == j {
                &id * c(4.0 / basis.dim() as f64, 0.0)
            } else {
                CMatrix::zeros(basis.dim(), basis.dim())
            };
            for k in 0..n {
                let fv = sc.f(i, j, k);
                if fv != 0.0 {
                    comm += &gens[k] * c(0.0, 2.0 * fv);
                }
                let gv = sc.g(i, j, k);
                if gv != 0.0 {
                    anti += &gens[k] * c(2.0 * gv, 0.0);
                }
            }
            worst = worst
                .max(linalg::max_abs(&(commutator(&gens[i], &gens[j]) - comm)))
                .max(linalg::max_abs(&(anticommutator(&gens[i], &gens[j]) - anti)));
        }
    }
    worst
}

/// Pauli matrices in basis order.
pub fn pauli() -> [CMatrix; 3] {
    let x = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
    let y = CMatrix::from_row_slice(2, 2, &[ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO]);
    let z = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, c(-1.0, 0.0)]);
    [x, y, z]
}
