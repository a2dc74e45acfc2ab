//! Fisher information of measurements on a noisy state, the SLD bound, and
//! the optimal projective measurement for one expectation value.
//!
//! Everything works in Bloch coordinates. A measurement element is written
//! `E_k = e_k0 I + v_k . lambda`, so on the decohered state with Bloch vector
//! `s = A theta + c` the outcome probability is `p_k = e_k0 + v_k . s` and the
//! gradient with respect to the pre-noise Bloch vector is `A^T v_k`.

use nalgebra::DVector;

use crate::channel::{AffineChannel, CONDITION_WARNING, DEFAULT_INJECTIVITY_TOL};
use crate::error::{Error, Result};
use crate::linalg::{self, hermitian_eigen, CMatrix, RMatrix, RVector};
use crate::su_basis::{BlochVector, GeneratorBasis, ObservableRepr, StructureConstants};

/// Outcomes with probability below this are left out of Fisher sums.
pub const P_FLOOR: f64 = 1e-12;
/// Probabilities below `-NEGATIVE_P_TOL` are an error rather than roundoff.
pub const NEGATIVE_P_TOL: f64 = 1e-10;
/// Eigenvalues of a Fisher matrix above `EIGEN_CUTOFF * lambda_max` span its support.
pub const EIGEN_CUTOFF: f64 = 1e-10;
/// Relative residual allowed when testing `x in supp(J)`.
pub const SUPPORT_TOL: f64 = 1e-8;
/// Default relative degeneracy tolerance for spectral decompositions.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// `E(rho)` must have every eigenvalue above this for the SLD to exist.
pub const RANK_TOL: f64 = 1e-10;
/// Relative agreement demanded between `1/Var(Y)`, the classical Fisher
/// information of `P_Y`, and the SLD bound.
pub const OPTIMALITY_TOL: f64 = 1e-8;
/// POVM completeness / positivity checks.
pub const POVM_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Povm {
    dim: usize,
    elements: Vec<CMatrix>,
    e0: Vec<f64>,
    v: Vec<RVector>,
}

impl Povm {
    pub fn new(elements: Vec<CMatrix>, basis: &GeneratorBasis) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidPovm("no elements".into()));
        }
        let dim = basis.dim();
        let mut sum = CMatrix::zeros(dim, dim);
        for (i, e) in elements.iter().enumerate() {
            linalg::check_square(e, dim)?;
            let herm = linalg::hermiticity_defect(e);
            if herm > POVM_TOL {
                return Err(Error::InvalidPovm(format!("element {i} not Hermitian ({herm:.3e})")));
            }
            let min = linalg::min_hermitian_eigenvalue(e);
            if min < -POVM_TOL {
                return Err(Error::InvalidPovm(format!(
                    "element {i} not positive (min eigenvalue {min:.3e})"
                )));
            }
            sum += e;
        }
        let defect = linalg::max_abs(&(sum - linalg::identity(dim)));
        if defect > POVM_TOL {
            return Err(Error::InvalidPovm(format!(
                "elements do not sum to I (defect {defect:.3e})"
            )));
        }
        let e0 = elements.iter().map(|e| e.trace().re / dim as f64).collect();
        let v = elements
            .iter()
            .map(|e| basis.trace_coefficients(e) * 0.5)
            .collect();
        Ok(Self {
            dim,
            elements,
            e0,
            v,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// `(e_k0, v_k)` pairs.
    pub fn coefficients(&self) -> impl Iterator<Item = (f64, &RVector)> {
        self.e0.iter().copied().zip(self.v.iter())
    }

    pub fn probabilities(&self, s: &BlochVector) -> Result<Vec<f64>> {
        outcome_probabilities(&self.e0, &self.v, s)
    }
}

fn outcome_probabilities(e0: &[f64], v: &[RVector], s: &BlochVector) -> Result<Vec<f64>> {
    let mut p = Vec::with_capacity(e0.len());
    for (k, (e, vk)) in e0.iter().zip(v).enumerate() {
        if vk.len() != s.len() {
            return Err(Error::LengthMismatch {
                expected: vk.len(),
                found: s.len(),
            });
        }
        let pk = e + vk.dot(&s.0);
        if pk < -NEGATIVE_P_TOL || !pk.is_finite() {
            return Err(Error::InvalidProbability { index: k, value: pk });
        }
        p.push(pk.max(0.0));
    }
    Ok(p)
}

/// Projective measurement from a spectral decomposition, one projector per
/// distinct eigenvalue.
#[derive(Debug, Clone)]
pub struct ProjectiveMeasurement {
    dim: usize,
    projectors: Vec<CMatrix>,
    eigenvalues: Vec<f64>,
    ranks: Vec<usize>,
    e0: Vec<f64>,
    v: Vec<RVector>,
}

impl ProjectiveMeasurement {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn projectors(&self) -> &[CMatrix] {
        &self.projectors
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn bloch_vectors(&self) -> &[RVector] {
        &self.v
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    /// `V`, with column i the Bloch vector of projector i.
    pub fn v_matrix(&self) -> RMatrix {
        let rows = self.v.first().map_or(0, |v| v.len());
        RMatrix::from_fn(rows, self.v.len(), |r, col| self.v[col][r])
    }

    /// Outcome probabilities on a state with Bloch vector `s`.
    pub fn probabilities(&self, s: &BlochVector) -> Result<Vec<f64>> {
        outcome_probabilities(&self.e0, &self.v, s)
    }

    pub fn to_povm(&self, basis: &GeneratorBasis) -> Result<Povm> {
        Povm::new(self.projectors.clone(), basis)
    }
}

/// Projective measurement of `sigma . e_axis` on a qubit.
pub fn pauli_measurement(axis: usize, basis: &GeneratorBasis) -> Result<ProjectiveMeasurement> {
    let mut y = vec![0.0; basis.len()];
    y[axis] = 1.0;
    spectral_measurement(&ObservableRepr::new(0.0, y), basis, None)
}

/// Spectral decomposition of `y . lambda`; `y0` does not change the projectors.
/// Eigenvalues closer than `degeneracy_tol` (default `1e-9` times the spectral
/// range) share a projector and are averaged.
pub fn spectral_measurement(
    y: &ObservableRepr,
    basis: &GeneratorBasis,
    degeneracy_tol: Option<f64>,
) -> Result<ProjectiveMeasurement> {
    if y.x.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateObservable);
    }
    let op = basis.combine(&y.x)?;
    let (vals, vecs) = hermitian_eigen(&op);
    let range = vals[vals.len() - 1] - vals[0];
    if range <= 0.0 {
        return Err(Error::DegenerateObservable);
    }
    let tol = degeneracy_tol.unwrap_or(DEGENERACY_TOL * range);

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..vals.len() {
        match groups.last_mut() {
            Some(g) if vals[i] - vals[*g.last().expect("non-empty")] <= tol => g.push(i),
            _ => groups.push(vec![i]),
        }
    }

    let dim = basis.dim();
    let mut projectors = Vec::with_capacity(groups.len());
    let mut eigenvalues = Vec::with_capacity(groups.len());
    let mut ranks = Vec::with_capacity(groups.len());
    let mut e0 = Vec::with_capacity(groups.len());
    let mut v = Vec::with_capacity(groups.len());
    for g in groups {
        let mut p = CMatrix::zeros(dim, dim);
        for &i in &g {
            let col = vecs.column(i);
            p += col * col.adjoint();
        }
        let alpha = g.iter().map(|&i| vals[i]).sum::<f64>() / g.len() as f64;
        e0.push(g.len() as f64 / dim as f64);
        v.push(basis.trace_coefficients(&p) * 0.5);
        projectors.push(p);
        eigenvalues.push(alpha);
        ranks.push(g.len());
    }
    Ok(ProjectiveMeasurement {
        dim,
        projectors,
        eigenvalues,
        ranks,
        e0,
        v,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherKind {
    Classical,
    Sld,
}

/// A Fisher information matrix with its support.
#[derive(Debug, Clone)]
pub struct FisherResult {
    pub matrix: RMatrix,
    /// Orthonormal basis of the support (columns) and the matching eigenvalues.
    pub support: RMatrix,
    pub support_eigenvalues: Vec<f64>,
    pub kind: FisherKind,
    /// Outcome indices dropped because `p_k < P_FLOOR`.
    pub excluded_outcomes: Vec<usize>,
}

impl FisherResult {
    pub fn new(matrix: RMatrix, kind: FisherKind, excluded_outcomes: Vec<usize>) -> Self {
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let (vals, vecs) = linalg::symmetric_eigen(&sym);
        let lmax = vals.iter().copied().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..vals.len())
            .filter(|&i| lmax > 0.0 && vals[i] > EIGEN_CUTOFF * lmax)
            .collect();
        let support = RMatrix::from_fn(sym.nrows(), keep.len(), |r, col| vecs[(r, keep[col])]);
        let support_eigenvalues = keep.iter().map(|&i| vals[i]).collect();
        Self {
            matrix: sym,
            support,
            support_eigenvalues,
            kind,
            excluded_outcomes,
        }
    }

    pub fn rank(&self) -> usize {
        self.support_eigenvalues.len()
    }

    /// Pseudo-inverse restricted to the support.
    pub fn pseudo_inverse(&self) -> RMatrix {
        let n = self.matrix.nrows();
        let mut out = RMatrix::zeros(n, n);
        for (k, &lam) in self.support_eigenvalues.iter().enumerate() {
            let u = self.support.column(k);
            out += u * u.transpose() / lam;
        }
        out
    }

    /// `[x . J^+ x]^-1`, or 0 when `x` has a component outside the support.
    /// A zero `x` gives infinity (a constant needs no data).
    pub fn fisher_about_x(&self, x: &RVector) -> f64 {
        let norm = x.norm();
        if norm == 0.0 {
            return f64::INFINITY;
        }
        let coords = self.support.transpose() * x;
        let residual = (x - &self.support * &coords).norm();
        if residual > SUPPORT_TOL * norm {
            return 0.0;
        }
        let quad: f64 = coords
            .iter()
            .zip(&self.support_eigenvalues)
            .map(|(u, lam)| u * u / lam)
            .sum();
        1.0 / quad
    }
}

pub fn fisher_about_x(fr: &FisherResult, x: &RVector) -> f64 {
    fr.fisher_about_x(x)
}

fn output_state(ach: &AffineChannel, theta: &BlochVector) -> Result<BlochVector> {
    ach.apply_bloch(theta)
}

/// `J_ij = sum_k p_k^-1 (A^T v_k)_i (A^T v_k)_j` summed outcome by outcome.
pub fn fisher_matrix_povm(
    povm: &Povm,
    ach: &AffineChannel,
    theta: &BlochVector,
) -> Result<FisherResult> {
    let s = output_state(ach, theta)?;
    let p = povm.probabilities(&s)?;
    let len = s.len();
    let at = ach.a().transpose();
    let mut j = RMatrix::zeros(len, len);
    let mut excluded = Vec::new();
    for (k, ((_, vk), pk)) in povm.coefficients().zip(&p).enumerate() {
        if *pk < P_FLOOR {
            excluded.push(k);
            continue;
        }
        let grad = &at * vk;
        j += &grad * grad.transpose() / *pk;
    }
    Ok(FisherResult::new(j, FisherKind::Classical, excluded))
}

/// `J(P) = A^T K A` with `K = sum_i p_i^-1 v_i v_i^T`.
pub fn fisher_matrix_projection(
    pm: &ProjectiveMeasurement,
    ach: &AffineChannel,
    theta: &BlochVector,
) -> Result<FisherResult> {
    let s = output_state(ach, theta)?;
    let p = pm.probabilities(&s)?;
    let len = s.len();
    let mut k_mat = RMatrix::zeros(len, len);
    let mut excluded = Vec::new();
    for (i, (vi, pi)) in pm.v.iter().zip(&p).enumerate() {
        if *pi < P_FLOOR {
            excluded.push(i);
            continue;
        }
        k_mat += vi * vi.transpose() / *pi;
    }
    let j = ach.a().transpose() * k_mat * ach.a();
    Ok(FisherResult::new(j, FisherKind::Classical, excluded))
}

fn solve_transposed(ach: &AffineChannel, x: &RVector) -> Result<RVector> {
    if x.len() != ach.c().len() {
        return Err(Error::LengthMismatch {
            expected: ach.c().len(),
            found: x.len(),
        });
    }
    ach.a()
        .transpose()
        .lu()
        .solve(x)
        .ok_or(Error::SingularChannel {
            min_singular_value: ach.min_singular_value(),
            tol: DEFAULT_INJECTIVITY_TOL,
        })
}

/// Fisher information about `x . theta` through the generalized inverse of
/// `V`: `[alpha^T Q alpha]^-1` with `alpha = V^-1 y`, `Q = diag(p) - p p^T`
/// and `y = (A^T)^-1 x`. Returns 0 when `y` is not in the span of the `v_i`.
pub fn fisher_projection_vq(
    pm: &ProjectiveMeasurement,
    ach: &AffineChannel,
    theta: &BlochVector,
    x: &RVector,
) -> Result<f64> {
    if !ach.injective() {
        return Err(Error::SingularChannel {
            min_singular_value: ach.min_singular_value(),
            tol: DEFAULT_INJECTIVITY_TOL,
        });
    }
    let y = solve_transposed(ach, x)?;
    let s = output_state(ach, theta)?;
    let p = pm.probabilities(&s)?;
    let v = pm.v_matrix();
    let v_pinv = linalg::svd_pinv(&v, EIGEN_CUTOFF);
    let alpha = &v_pinv * &y;
    let ynorm = y.norm();
    if ynorm == 0.0 {
        return Ok(f64::INFINITY);
    }
    if (&v * &alpha - &y).norm() > SUPPORT_TOL * ynorm {
        return Ok(0.0);
    }
    let m = p.len();
    let q = RMatrix::from_fn(m, m, |i, j| {
        let d = if i == j { p[i] } else { 0.0 };
        d - p[i] * p[j]
    });
    let quad = (alpha.transpose() * q * &alpha)[(0, 0)];
    Ok(1.0 / quad)
}

/// `2/N I + G_s - s s^T`, the Bloch-space form of the state's covariance.
fn sld_kernel(s: &RVector, sc: &StructureConstants) -> Result<RMatrix> {
    let len = s.len();
    let g = sc.g_matrix(s)?;
    Ok(RMatrix::identity(len, len) * (2.0 / sc.dim() as f64) + g - s * s.transpose())
}

fn check_full_rank(s: &BlochVector, basis: &GeneratorBasis) -> Result<()> {
    let rho = basis.bloch_to_state(s, false)?;
    let min = linalg::min_hermitian_eigenvalue(&rho);
    if min <= RANK_TOL {
        return Err(Error::BoundaryState { min_eigenvalue: min });
    }
    Ok(())
}

/// SLD quantum Fisher matrix `A^T (2/N I + G_s - s s^T)^-1 A`, `s = A theta + c`.
pub fn sld_fisher_matrix(
    ach: &AffineChannel,
    theta: &BlochVector,
    basis: &GeneratorBasis,
    sc: &StructureConstants,
) -> Result<FisherResult> {
    let s = output_state(ach, theta)?;
    check_full_rank(&s, basis)?;
    let kernel = sld_kernel(&s.0, sc)?;
    let inv = kernel
        .try_inverse()
        .ok_or(Error::BoundaryState { min_eigenvalue: 0.0 })?;
    let j = ach.a().transpose() * inv * ach.a();
    Ok(FisherResult::new(j, FisherKind::Sld, Vec::new()))
}

/// SLD operators `L_i = a_i I + b_i . lambda` with
/// `b_i = (2/N I + G_s - s s^T)^-1 A e_i` and `a_i = -b_i . s`.
pub fn sld_operators(
    ach: &AffineChannel,
    theta: &BlochVector,
    basis: &GeneratorBasis,
    sc: &StructureConstants,
) -> Result<Vec<CMatrix>> {
    let s = output_state(ach, theta)?;
    check_full_rank(&s, basis)?;
    let kernel = sld_kernel(&s.0, sc)?;
    let lu = kernel.lu();
    (0..s.len())
        .map(|i| {
            let col = ach.a().column(i).into_owned();
            let b = lu
                .solve(&col)
                .ok_or(Error::BoundaryState { min_eigenvalue: 0.0 })?;
            let a = -b.dot(&s.0);
            basis.observable_to_matrix(&ObservableRepr { x0: a, x: b })
        })
        .collect()
}

/// `Var(Y)` on the state with Bloch vector `s`, from the coefficients alone:
/// `(2/N)|y|^2 + y^T G_s y - (y . s)^2`. The offset `y0` drops out exactly.
pub fn variance(y: &ObservableRepr, s: &BlochVector, sc: &StructureConstants) -> Result<f64> {
    if y.x.len() != s.len() {
        return Err(Error::LengthMismatch {
            expected: y.x.len(),
            found: s.len(),
        });
    }
    let g = sc.g_matrix(&s.0)?;
    let ys = y.x.dot(&s.0);
    let second = (2.0 / sc.dim() as f64) * y.x.norm_squared() + (y.x.transpose() * g * &y.x)[(0, 0)];
    Ok(second - ys * ys)
}

/// Solution of `E^dag(Y) = X` together with solve diagnostics.
#[derive(Debug, Clone)]
pub struct OptimalObservable {
    pub y: ObservableRepr,
    pub condition_number: f64,
    pub warning: Option<String>,
}

/// `y = (A^T)^-1 x`, `y0 = x0 - y . c`.
pub fn solve_optimal_observable(
    ach: &AffineChannel,
    obs: &ObservableRepr,
    injectivity_tol: f64,
) -> Result<OptimalObservable> {
    if !ach.check_injective(injectivity_tol) {
        return Err(Error::SingularChannel {
            min_singular_value: ach.min_singular_value(),
            tol: injectivity_tol,
        });
    }
    let y = solve_transposed(ach, &obs.x)?;
    let y0 = obs.x0 - y.dot(ach.c());
    let cond = ach.condition_number();
    let warning = (cond > CONDITION_WARNING)
        .then(|| format!("channel condition number {cond:.3e} exceeds {CONDITION_WARNING:.0e}"));
    Ok(OptimalObservable {
        y: ObservableRepr { x0: y0, x: y },
        condition_number: cond,
        warning,
    })
}

#[derive(Debug, Clone)]
pub struct OptimalMeasurement {
    pub y: ObservableRepr,
    pub measurement: ProjectiveMeasurement,
    /// `1 / Var_{E(rho)}(Y)`.
    pub j_max: f64,
    /// Classical Fisher information of `P_Y` about `x`, via `A^T K A`.
    pub j_classical: f64,
    /// SLD bound about `x`; `None` when `E(rho)` is rank deficient.
    pub j_sld: Option<f64>,
    pub condition_number: f64,
    pub excluded_outcomes: Vec<usize>,
    pub diagnostics: Vec<String>,
}

fn rel_gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(a.abs())
    }
}

/// Chains the operator-equation solve with the spectral decomposition and
/// checks that `1/Var(Y)`, the classical Fisher information of `P_Y`, and the
/// SLD bound coincide.
pub fn optimal_measurement(
    ach: &AffineChannel,
    obs: &ObservableRepr,
    theta: &BlochVector,
    basis: &GeneratorBasis,
    sc: &StructureConstants,
) -> Result<OptimalMeasurement> {
    optimal_measurement_with(ach, obs, theta, basis, sc, DEFAULT_INJECTIVITY_TOL, OPTIMALITY_TOL)
}

pub fn optimal_measurement_with(
    ach: &AffineChannel,
    obs: &ObservableRepr,
    theta: &BlochVector,
    basis: &GeneratorBasis,
    sc: &StructureConstants,
    injectivity_tol: f64,
    optimality_tol: f64,
) -> Result<OptimalMeasurement> {
    if obs.x.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateObservable);
    }
    let solved = solve_optimal_observable(ach, obs, injectivity_tol)?;
    let measurement = spectral_measurement(&solved.y, basis, None)?;
    let s = ach.apply_bloch(theta)?;
    let var = variance(&solved.y, &s, sc)?;
    let j_max = 1.0 / var;

    let classical = fisher_matrix_projection(&measurement, ach, theta)?;
    let j_classical = classical.fisher_about_x(&obs.x);

    let mut diagnostics: Vec<String> = solved.warning.iter().cloned().collect();
    let j_sld = match sld_fisher_matrix(ach, theta, basis, sc) {
        Ok(fr) => Some(fr.fisher_about_x(&obs.x)),
        Err(Error::BoundaryState { min_eigenvalue }) => {
            diagnostics.push(format!(
                "E(rho) is rank deficient (min eigenvalue {min_eigenvalue:.3e}); SLD bound skipped"
            ));
            None
        }
        Err(e) => return Err(e),
    };
    if !classical.excluded_outcomes.is_empty() {
        diagnostics.push(format!(
            "outcomes {:?} have p < {P_FLOOR:e} and were excluded",
            classical.excluded_outcomes
        ));
    }

    let checked = solved.warning.is_none() && var > 0.0 && classical.excluded_outcomes.is_empty();
    if checked {
        let gap_c = rel_gap(j_classical, j_max);
        if gap_c > optimality_tol {
            return Err(Error::OptimalityViolation(format!(
                "classical Fisher information {j_classical:.17e} differs from 1/Var(Y) {j_max:.17e} (relative {gap_c:.3e})"
            )));
        }
        if let Some(jq) = j_sld {
            let gap_q = rel_gap(jq, j_max);
            if gap_q > optimality_tol {
                return Err(Error::OptimalityViolation(format!(
                    "SLD bound {jq:.17e} differs from 1/Var(Y) {j_max:.17e} (relative {gap_q:.3e})"
                )));
            }
        }
    }

    Ok(OptimalMeasurement {
        y: solved.y,
        measurement,
        j_max,
        j_classical,
        j_sld,
        condition_number: solved.condition_number,
        excluded_outcomes: classical.excluded_outcomes,
        diagnostics,
    })
}

/// Qubit tomography baseline: the sample is split evenly between the
/// `sigma_x`, `sigma_y` and `sigma_z` measurements, so the Fisher matrix is
/// `(J_x + J_y + J_z) / 3`.
pub fn tomography_fisher_matrix(
    ach: &AffineChannel,
    theta: &BlochVector,
    basis: &GeneratorBasis,
) -> Result<FisherResult> {
    if basis.dim() != 2 || ach.dim() != 2 {
        return Err(Error::UnsupportedBaseline(ach.dim().max(basis.dim())));
    }
    let mut total = RMatrix::zeros(3, 3);
    let mut excluded = Vec::new();
    for axis in 0..3 {
        let pm = pauli_measurement(axis, basis)?;
        let fr = fisher_matrix_projection(&pm, ach, theta)?;
        total += fr.matrix;
        excluded.extend(fr.excluded_outcomes.iter().map(|k| 2 * axis + k));
    }
    Ok(FisherResult::new(total / 3.0, FisherKind::Classical, excluded))
}

pub fn tomography_fisher(
    x: &RVector,
    ach: &AffineChannel,
    theta: &BlochVector,
    basis: &GeneratorBasis,
) -> Result<f64> {
    Ok(tomography_fisher_matrix(ach, theta, basis)?.fisher_about_x(x))
}

/// `J_optimal / J_tomography` for the same observable and state.
#[derive(Debug, Clone, Copy)]
pub struct TomographyComparison {
    pub j_optimal: f64,
    pub j_tomography: f64,
    pub ratio: f64,
}

pub fn compare_tomography(
    ach: &AffineChannel,
    obs: &ObservableRepr,
    theta: &BlochVector,
    basis: &GeneratorBasis,
    sc: &StructureConstants,
) -> Result<TomographyComparison> {
    if basis.dim() != 2 {
        return Err(Error::UnsupportedBaseline(basis.dim()));
    }
    let opt = optimal_measurement(ach, obs, theta, basis, sc)?;
    let j_tomography = tomography_fisher(&obs.x, ach, theta, basis)?;
    Ok(TomographyComparison {
        j_optimal: opt.j_max,
        j_tomography,
        ratio: opt.j_max / j_tomography,
    })
}

/// `Y + shift I` as coefficients.
pub fn shifted(y: &ObservableRepr, shift: f64) -> ObservableRepr {
    ObservableRepr {
        x0: y.x0 + shift,
        x: y.x.clone(),
    }
}

/// Unit vector `e_i` of length `len`.
pub fn unit(len: usize, i: usize) -> RVector {
    let mut v = DVector::zeros(len);
    v[i] = 1.0;
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{affine_repr, KrausChannel};
    use crate::linalg::{c, max_abs_real};
    use crate::su_basis::{pauli, structure_constants};

    fn qubit() -> (GeneratorBasis, StructureConstants) {
        let b = GeneratorBasis::new(2).unwrap();
        let sc = structure_constants(&b);
        (b, sc)
    }

    fn sz() -> ObservableRepr {
        ObservableRepr::new(0.0, vec![0.0, 0.0, 1.0])
    }

    #[test]
    fn solve_identity_channel_returns_x() {
        let obs = ObservableRepr::new(0.4, vec![0.3, -0.2, 0.5]);
        let sol = solve_optimal_observable(&AffineChannel::identity(2), &obs, 1e-9).unwrap();
        assert_eq!(sol.y, obs);
        assert!(sol.warning.is_none());
    }

    #[test]
    fn solve_dephasing_closed_form() {
        let gamma = 0.8;
        let t_obs = 0.25 * std::f64::consts::PI;
        let obs = ObservableRepr::new(0.0, vec![t_obs.sin(), 0.0, t_obs.cos()]);
        let sol = solve_optimal_observable(&AffineChannel::qubit_dephasing(gamma), &obs, 1e-9).unwrap();
        assert!((sol.y.x[0] - gamma.exp() * t_obs.sin()).abs() < 1e-14);
        assert!((sol.y.x[2] - t_obs.cos()).abs() < 1e-15);
        assert_eq!(sol.y.x0, 0.0);
    }

    #[test]
    fn solve_depolarizing_divides_by_p() {
        let b = GeneratorBasis::new(3).unwrap();
        let p = 0.4;
        let ach = affine_repr(&KrausChannel::depolarizing(3, p).unwrap(), &b).unwrap();
        let x: Vec<f64> = (0..8).map(|i| 0.1 * i as f64 - 0.3).collect();
        let obs = ObservableRepr::new(1.5, x.clone());
        let sol = solve_optimal_observable(&ach, &obs, 1e-9).unwrap();
        for i in 0..8 {
            assert!((sol.y.x[i] - x[i] / p).abs() < 1e-12);
        }
        assert!((sol.y.x0 - 1.5).abs() < 1e-12);
    }

    #[test]
    fn singular_channel_is_reported() {
        let ach = affine_repr(&KrausChannel::depolarizing(2, 0.0).unwrap(), &qubit().0).unwrap();
        match solve_optimal_observable(&ach, &sz(), 1e-9) {
            Err(Error::SingularChannel { min_singular_value, .. }) => assert!(min_singular_value < 1e-12),
            other => panic!("expected singular channel, got {other:?}"),
        }
    }

    #[test]
    fn ill_conditioned_channel_warns() {
        let ach = AffineChannel::qubit_dephasing(20.0);
        let sol = solve_optimal_observable(&ach, &sz(), 1e-9).unwrap();
        assert!(sol.warning.is_some());
        assert!(sol.condition_number > 1e8);
    }

    #[test]
    fn sigma_z_spectral_measurement() {
        let (b, _) = qubit();
        let pm = spectral_measurement(&sz(), &b, None).unwrap();
        assert_eq!(pm.eigenvalues(), &[-1.0, 1.0]);
        let [_, _, z] = pauli();
        let id = linalg::identity(2);
        let plus = (&id + &z) * c(0.5, 0.0);
        let minus = (&id - &z) * c(0.5, 0.0);
        assert!(linalg::max_abs(&(pm.projectors()[1].clone() - plus)) < 1e-15);
        assert!(linalg::max_abs(&(pm.projectors()[0].clone() - minus)) < 1e-15);
    }

    #[test]
    fn identity_observable_is_degenerate() {
        let (b, _) = qubit();
        let y = ObservableRepr::new(2.0, vec![0.0; 3]);
        assert!(matches!(spectral_measurement(&y, &b, None), Err(Error::DegenerateObservable)));
    }

    #[test]
    fn projector_invariants() {
        let b = GeneratorBasis::new(3).unwrap();
        let y = ObservableRepr::new(0.0, vec![0.3, -0.1, 0.2, 0.5, 0.0, -0.4, 0.7, 0.1]);
        let pm = spectral_measurement(&y, &b, None).unwrap();
        assert_eq!(pm.len(), 3);
        let mut sum = CMatrix::zeros(3, 3);
        for (i, pi) in pm.projectors().iter().enumerate() {
            sum += pi;
            for (j, pj) in pm.projectors().iter().enumerate() {
                let prod = pi * pj;
                let want = if i == j { pi.clone() } else { CMatrix::zeros(3, 3) };
                assert!(linalg::max_abs(&(prod - want)) < 1e-10);
            }
        }
        assert!(linalg::max_abs(&(sum - linalg::identity(3))) < 1e-10);
        let vsum: RVector = pm.bloch_vectors().iter().fold(RVector::zeros(8), |a, v| a + v);
        assert!(vsum.norm() < 1e-12);
        // alpha = V^-1 y for non-degenerate Y
        let alpha = linalg::svd_pinv(&pm.v_matrix(), EIGEN_CUTOFF) * &y.x;
        for (a, want) in alpha.iter().zip(pm.eigenvalues()) {
            assert!((a - want).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_eigenvalues_are_merged() {
        // lambda_8 of su(3) has eigenvalues (1, 1, -2)/sqrt(3)
        let b = GeneratorBasis::new(3).unwrap();
        let pm = spectral_measurement(&ObservableRepr::new(0.0, vec![0., 0., 0., 0., 0., 0., 0., 1.]), &b, None).unwrap();
        assert_eq!(pm.len(), 2);
        assert_eq!(pm.ranks(), &[1, 2]);
        // V^-1 y recovers alpha up to a common shift
        let alpha = linalg::svd_pinv(&pm.v_matrix(), EIGEN_CUTOFF) * unit(8, 7);
        let d0 = alpha[0] - pm.eigenvalues()[0];
        let d1 = alpha[1] - pm.eigenvalues()[1];
        assert!((d0 - d1).abs() < 1e-10);
    }

    #[test]
    fn sigma_z_fisher_matrices() {
        let (b, _) = qubit();
        let pm = spectral_measurement(&sz(), &b, None).unwrap();
        let theta = BlochVector::zeros(3);
        let id = AffineChannel::identity(2);
        let fr = fisher_matrix_projection(&pm, &id, &theta).unwrap();
        let ez = unit(3, 2);
        assert!(max_abs_real(&(&fr.matrix - &ez * ez.transpose())) < 1e-14);
        assert_eq!(fr.rank(), 1);

        let deph = AffineChannel::qubit_dephasing(0.6);
        let fr = fisher_matrix_projection(&pm, &deph, &theta).unwrap();
        let want = deph.a().transpose() * (&ez * ez.transpose()) * deph.a();
        assert!(max_abs_real(&(&fr.matrix - want)) < 1e-14);

        let povm = pm.to_povm(&b).unwrap();
        let fp = fisher_matrix_povm(&povm, &deph, &theta).unwrap();
        assert!(max_abs_real(&(&fp.matrix - &fr.matrix)) < 1e-10);
    }

    #[test]
    fn fisher_about_x_support_rule() {
        let ez = unit(3, 2);
        let fr = FisherResult::new(&ez * ez.transpose(), FisherKind::Classical, vec![]);
        assert_eq!(fr.fisher_about_x(&unit(3, 0)), 0.0);
        assert!((fr.fisher_about_x(&ez) - 1.0).abs() < 1e-15);
        // J J+ J = J
        let pinv = fr.pseudo_inverse();
        assert!(max_abs_real(&(&fr.matrix * pinv * &fr.matrix - &fr.matrix)) < 1e-12);
    }

    #[test]
    fn vq_route_sigma_z() {
        let (b, _) = qubit();
        let pm = spectral_measurement(&sz(), &b, None).unwrap();
        let id = AffineChannel::identity(2);
        let theta = BlochVector::zeros(3);
        let j = fisher_projection_vq(&pm, &id, &theta, &unit(3, 2)).unwrap();
        assert!((j - 1.0).abs() < 1e-14);
        assert_eq!(fisher_projection_vq(&pm, &id, &theta, &unit(3, 0)).unwrap(), 0.0);
    }

    #[test]
    fn sld_trivial_cases() {
        let (b, sc) = qubit();
        let theta = BlochVector::zeros(3);
        let fr = sld_fisher_matrix(&AffineChannel::identity(2), &theta, &b, &sc).unwrap();
        assert!(max_abs_real(&(&fr.matrix - RMatrix::identity(3, 3))) < 1e-14);
        assert_eq!(fr.kind, FisherKind::Sld);

        let gamma = 0.3;
        let deph = AffineChannel::qubit_dephasing(gamma);
        let fr = sld_fisher_matrix(&deph, &theta, &b, &sc).unwrap();
        let e2 = (-2.0 * gamma).exp();
        let want = RMatrix::from_diagonal(&DVector::from_vec(vec![e2, e2, 1.0]));
        assert!(max_abs_real(&(&fr.matrix - want)) < 1e-14);

        let ls = sld_operators(&AffineChannel::identity(2), &theta, &b, &sc).unwrap();
        for (l, g) in ls.iter().zip(b.generators()) {
            assert!(linalg::max_abs(&(l - g)) < 1e-14);
        }
    }

    #[test]
    fn sld_rejects_pure_output() {
        let (b, sc) = qubit();
        let pure = BlochVector::new(vec![0.0, 0.0, 1.0]);
        assert!(matches!(
            sld_fisher_matrix(&AffineChannel::identity(2), &pure, &b, &sc),
            Err(Error::BoundaryState { .. })
        ));
    }

    #[test]
    fn variance_examples() {
        let (_, sc) = qubit();
        assert_eq!(variance(&sz(), &BlochVector::zeros(3), &sc).unwrap(), 1.0);
        assert_eq!(variance(&sz(), &BlochVector::new(vec![0.0, 0.0, 1.0]), &sc).unwrap(), 0.0);
    }

    #[test]
    fn optimal_identity_sigma_z() {
        let (b, sc) = qubit();
        let opt = optimal_measurement(&AffineChannel::identity(2), &sz(), &BlochVector::zeros(3), &b, &sc).unwrap();
        assert_eq!(opt.y, sz());
        assert!((opt.j_max - 1.0).abs() < 1e-15);
        assert!((opt.j_classical - 1.0).abs() < 1e-12);
        assert!((opt.j_sld.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn optimal_rejects_zero_observable() {
        let (b, sc) = qubit();
        let zero = ObservableRepr::new(1.0, vec![0.0; 3]);
        assert!(matches!(
            optimal_measurement(&AffineChannel::identity(2), &zero, &BlochVector::zeros(3), &b, &sc),
            Err(Error::DegenerateObservable)
        ));
    }

    #[test]
    fn optimal_on_pure_output_skips_sld() {
        let (b, sc) = qubit();
        let theta = BlochVector::new(vec![0.6, 0.0, 0.8]);
        let opt = optimal_measurement(&AffineChannel::identity(2), &sz(), &theta, &b, &sc).unwrap();
        assert!(opt.j_sld.is_none());
        assert!((opt.j_max - 1.0 / 0.36).abs() < 1e-12);
    }

    #[test]
    fn tomography_baseline() {
        let (b, sc) = qubit();
        let theta = BlochVector::zeros(3);
        let j = tomography_fisher(&unit(3, 2), &AffineChannel::identity(2), &theta, &b).unwrap();
        assert!((j - 1.0 / 3.0).abs() < 1e-14);
        let obs = ObservableRepr::new(0.0, vec![0.5f64.sqrt(), 0.0, 0.5f64.sqrt()]);
        let cmp = compare_tomography(&AffineChannel::qubit_dephasing(0.9), &obs, &theta, &b, &sc).unwrap();
        assert!((cmp.ratio - 3.0).abs() < 1e-12);
        let b3 = GeneratorBasis::new(3).unwrap();
        assert!(matches!(
            tomography_fisher(&unit(8, 0), &AffineChannel::identity(3), &BlochVector::zeros(8), &b3),
            Err(Error::UnsupportedBaseline(3))
        ));
    }

    #[test]
    fn invalid_probabilities() {
        let (b, _) = qubit();
        let pm = spectral_measurement(&sz(), &b, None).unwrap();
        let outside = BlochVector::new(vec![0.0, 0.0, 1.5]);
        assert!(matches!(
            fisher_matrix_projection(&pm, &AffineChannel::identity(2), &outside),
            Err(Error::InvalidProbability { .. })
        ));
    }

    #[test]
    fn probability_floor_excludes_outcomes() {
        let (b, _) = qubit();
        let pm = spectral_measurement(&sz(), &b, None).unwrap();
        let pure = BlochVector::new(vec![0.0, 0.0, 1.0]);
        let fr = fisher_matrix_projection(&pm, &AffineChannel::identity(2), &pure).unwrap();
        assert_eq!(fr.excluded_outcomes, vec![0]);
    }

    #[test]
    fn povm_validation() {
        let (b, _) = qubit();
        let half = linalg::identity(2) * c(0.5, 0.0);
        assert!(Povm::new(vec![half.clone()], &b).is_err());
        assert!(Povm::new(vec![half.clone(), half.clone()], &b).is_ok());
        let [x, _, _] = pauli();
        assert!(Povm::new(vec![&half + &x, &half - &x], &b).is_err());
    }
}
