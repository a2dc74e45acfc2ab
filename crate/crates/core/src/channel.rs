//! Quantum channels in Kraus form and their affine action on Bloch vectors.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{self, c, check_square, max_abs, CMatrix, RMatrix, RVector, ONE, ZERO};
use crate::su_basis::{BlochVector, GeneratorBasis, ObservableRepr};

/// Smallest singular value of `A` below which a channel counts as non-injective.
pub const DEFAULT_INJECTIVITY_TOL: f64 = 1e-9;
/// Condition numbers of `A` above this attach a warning to downstream solves.
pub const CONDITION_WARNING: f64 = 1e8;
/// Completeness and unitarity checks.
pub const CPTP_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct KrausChannel {
    dim: usize,
    kraus: Vec<CMatrix>,
}

impl KrausChannel {
    /// Validates shapes and `sum M^dag M = I`.
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::InvalidParameter("channel needs at least one Kraus operator".into()))?;
        let dim = first.nrows();
        for m in &kraus {
            check_square(m, dim)?;
        }
        let ch = Self { dim, kraus };
        let defect = ch.completeness_defect();
        if defect > CPTP_TOL {
            return Err(Error::NotTracePreserving(defect));
        }
        Ok(ch)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn completeness_defect(&self) -> f64 {
        let mut sum = CMatrix::zeros(self.dim, self.dim);
        for m in &self.kraus {
            sum += m.adjoint() * m;
        }
        max_abs(&(sum - linalg::identity(self.dim)))
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            kraus: vec![linalg::identity(dim)],
        }
    }

    pub fn unitary(u: CMatrix) -> Result<Self> {
        check_square(&u, u.nrows())?;
        let defect = max_abs(&(u.adjoint() * &u - linalg::identity(u.nrows())));
        if defect > CPTP_TOL {
            return Err(Error::NotUnitary(defect));
        }
        Ok(Self {
            dim: u.nrows(),
            kraus: vec![u],
        })
    }

    /// Qubit pure dephasing: off-diagonals scaled by `e^{-gamma}`.
    pub fn qubit_dephasing(gamma: f64) -> Result<Self> {
        if gamma < 0.0 || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dephasing exponent must be finite and >= 0, got {gamma}"
            )));
        }
        let decay = (-gamma).exp();
        let [_, _, z] = crate::su_basis::pauli();
        Self::new(vec![
            linalg::identity(2) * c(((1.0 + decay) / 2.0).sqrt(), 0.0),
            z * c(((1.0 - decay) / 2.0).sqrt(), 0.0),
        ])
    }

    /// `E(rho) = p rho + (1 - p) I/N`, realised with the N^2 Weyl operators.
    pub fn depolarizing(dim: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "depolarizing parameter must lie in [0, 1], got {p}"
            )));
        }
        let n2 = (dim * dim) as f64;
        let omega = std::f64::consts::TAU / dim as f64;
        let mut kraus = Vec::with_capacity(dim * dim);
        for a in 0..dim {
            for b in 0..dim {
                // W_ab |k> = e^{i omega b k} |k + a>
                let mut w = CMatrix::zeros(dim, dim);
                for k in 0..dim {
                    let phase = omega * (b * k) as f64;
                    w[((k + a) % dim, k)] = c(phase.cos(), phase.sin());
                }
                let weight = if a == 0 && b == 0 {
                    p + (1.0 - p) / n2
                } else {
                    (1.0 - p) / n2
                };
                if weight > 0.0 {
                    kraus.push(w * c(weight.sqrt(), 0.0));
                }
            }
        }
        Self::new(kraus)
    }

    /// Qubit amplitude damping towards |0>.
    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!(
                "damping probability must lie in [0, 1], got {gamma}"
            )));
        }
        let m0 = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, c((1.0 - gamma).sqrt(), 0.0)]);
        let m1 = CMatrix::from_row_slice(2, 2, &[ZERO, c(gamma.sqrt(), 0.0), ZERO, ZERO]);
        Self::new(vec![m0, m1])
    }

    fn check_operand(&self, m: &CMatrix) -> Result<()> {
        check_square(m, self.dim)
    }

    /// `sum_i M_i rho M_i^dag`.
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        self.check_operand(rho)?;
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for m in &self.kraus {
            out += m * rho * m.adjoint();
        }
        Ok(out)
    }

    /// `sum_i M_i^dag Y M_i`.
    pub fn adjoint_apply(&self, y: &CMatrix) -> Result<CMatrix> {
        self.check_operand(y)?;
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for m in &self.kraus {
            out += m.adjoint() * y * m;
        }
        Ok(out)
    }

    /// Kraus form of `next . self` (self acts first).
    pub fn then(&self, next: &KrausChannel) -> Result<KrausChannel> {
        if next.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: format!("{}x{}", next.dim, next.dim),
            });
        }
        let kraus = next
            .kraus
            .iter()
            .flat_map(|b| self.kraus.iter().map(move |a| b * a))
            .collect();
        Ok(KrausChannel {
            dim: self.dim,
            kraus,
        })
    }
}

/// Action `theta -> A theta + c` of a channel on Bloch vectors.
#[derive(Debug, Clone)]
pub struct AffineChannel {
    dim: usize,
    a: RMatrix,
    c: RVector,
    min_singular_value: f64,
    max_singular_value: f64,
    injective: bool,
}

impl AffineChannel {
    pub fn new(dim: usize, a: RMatrix, c: RVector) -> Result<Self> {
        let len = dim * dim - 1;
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if a.nrows() != len || a.ncols() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                found: a.nrows().max(a.ncols()),
            });
        }
        if c.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                found: c.len(),
            });
        }
        let sv = linalg::singular_values(&a);
        let min_singular_value = sv[0];
        let max_singular_value = sv[sv.len() - 1];
        Ok(Self {
            dim,
            a,
            c,
            min_singular_value,
            max_singular_value,
            injective: min_singular_value > DEFAULT_INJECTIVITY_TOL,
        })
    }

    pub fn identity(dim: usize) -> Self {
        let len = dim * dim - 1;
        Self::new(dim, RMatrix::identity(len, len), RVector::zeros(len))
            .expect("identity has consistent shape")
    }

    /// `A = diag(e^-gamma, e^-gamma, 1)`, `c = 0`. Negative `gamma` is allowed
    /// here so pulse segments can carry refocusing increments.
    pub fn qubit_dephasing(gamma: f64) -> Self {
        let d = (-gamma).exp();
        Self::new(
            2,
            RMatrix::from_diagonal(&DVector::from_vec(vec![d, d, 1.0])),
            RVector::zeros(3),
        )
        .expect("3x3 dephasing")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a(&self) -> &RMatrix {
        &self.a
    }

    pub fn c(&self) -> &RVector {
        &self.c
    }

    pub fn min_singular_value(&self) -> f64 {
        self.min_singular_value
    }

    pub fn max_singular_value(&self) -> f64 {
        self.max_singular_value
    }

    /// Injectivity at the default tolerance.
    pub fn injective(&self) -> bool {
        self.injective
    }

    pub fn check_injective(&self, tol: f64) -> bool {
        self.min_singular_value > tol
    }

    pub fn condition_number(&self) -> f64 {
        if self.min_singular_value == 0.0 {
            f64::INFINITY
        } else {
            self.max_singular_value / self.min_singular_value
        }
    }

    /// `A theta + c`.
    pub fn apply_bloch(&self, theta: &BlochVector) -> Result<BlochVector> {
        if theta.len() != self.c.len() {
            return Err(Error::LengthMismatch {
                expected: self.c.len(),
                found: theta.len(),
            });
        }
        Ok(BlochVector(&self.a * &theta.0 + &self.c))
    }

    /// Heisenberg-picture action on observable coefficients:
    /// `(y0, y) -> (y0 + y . c, A^T y)`.
    pub fn adjoint_affine(&self, obs: &ObservableRepr) -> Result<ObservableRepr> {
        if obs.x.len() != self.c.len() {
            return Err(Error::LengthMismatch {
                expected: self.c.len(),
                found: obs.x.len(),
            });
        }
        Ok(ObservableRepr {
            x0: obs.x0 + obs.x.dot(&self.c),
            x: self.a.transpose() * &obs.x,
        })
    }

    /// Same channel with `A` multiplied by `factor`; used by the harness
    /// self-test to make sure a wrong `A` is detected.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.dim, &self.a * factor, self.c.clone())
    }
}

/// `A_ij = (1/2) Tr(lambda_i E(lambda_j))`, `c_i = (1/N) Tr(lambda_i E(I))`.
pub fn affine_repr(ch: &KrausChannel, basis: &GeneratorBasis) -> Result<AffineChannel> {
    if ch.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: format!("{}x{}", ch.dim(), ch.dim()),
        });
    }
    let defect = ch.completeness_defect();
    if defect > CPTP_TOL {
        return Err(Error::NotTracePreserving(defect));
    }
    let len = basis.len();
    let mut a = RMatrix::zeros(len, len);
    for (j, gj) in basis.generators().iter().enumerate() {
        let image = ch.apply(gj)?;
        let col = basis.trace_coefficients(&image) * 0.5;
        a.set_column(j, &col);
    }
    let image_id = ch.apply(&linalg::identity(ch.dim()))?;
    let cvec = basis.trace_coefficients(&image_id) / ch.dim() as f64;
    AffineChannel::new(ch.dim(), a, cvec)
}

pub fn adjoint_affine(ach: &AffineChannel, obs: &ObservableRepr) -> Result<ObservableRepr> {
    ach.adjoint_affine(obs)
}

pub fn check_injective(ach: &AffineChannel, tol: f64) -> bool {
    ach.check_injective(tol)
}

/// Affine form of `second . first`: `A = A2 A1`, `c = A2 c1 + c2`.
pub fn compose(second: &AffineChannel, first: &AffineChannel) -> Result<AffineChannel> {
    if second.dim != first.dim {
        return Err(Error::DimensionMismatch {
            expected: first.dim,
            found: format!("{}x{}", second.dim, second.dim),
        });
    }
    AffineChannel::new(
        first.dim,
        &second.a * &first.a,
        &second.a * &first.c + &second.c,
    )
}

/// A channel together with its cached Bloch-space representation.
#[derive(Debug, Clone)]
pub struct Channel {
    pub kraus: KrausChannel,
    pub affine: AffineChannel,
}

impl Channel {
    pub fn from_kraus(kraus: KrausChannel, basis: &GeneratorBasis) -> Result<Self> {
        let affine = affine_repr(&kraus, basis)?;
        Ok(Self { kraus, affine })
    }
}

pub fn unitary_channel(u: CMatrix, basis: &GeneratorBasis) -> Result<Channel> {
    Channel::from_kraus(KrausChannel::unitary(u)?, basis)
}

/// `exp(-i angle sigma_x / 2)`.
pub fn x_rotation(angle: f64) -> CMatrix {
    let (s, co) = (angle / 2.0).sin_cos();
    CMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_real;
    use crate::su_basis::pauli;

    fn qubit() -> GeneratorBasis {
        GeneratorBasis::new(2).unwrap()
    }

    #[test]
    fn identity_channel() {
        let b = qubit();
        let ch = KrausChannel::identity(2);
        let rho = b
            .bloch_to_state(&BlochVector::new(vec![0.1, 0.2, 0.3]), true)
            .unwrap();
        assert_eq!(ch.apply(&rho).unwrap(), rho);
        let ach = affine_repr(&ch, &b).unwrap();
        assert_eq!(max_abs_real(&(ach.a() - RMatrix::identity(3, 3))), 0.0);
        assert_eq!(ach.c().norm(), 0.0);
        assert!(check_injective(&ach, 1e-9));
        assert!((ach.min_singular_value() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn full_dephasing_keeps_diagonal() {
        let mut p0 = CMatrix::zeros(2, 2);
        p0[(0, 0)] = ONE;
        let mut p1 = CMatrix::zeros(2, 2);
        p1[(1, 1)] = ONE;
        let ch = KrausChannel::new(vec![p0, p1]).unwrap();
        let rho = CMatrix::from_row_slice(2, 2, &[c(0.7, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.3, 0.0)]);
        let out = ch.apply(&rho).unwrap();
        assert_eq!(out[(0, 1)], ZERO);
        assert_eq!(out[(0, 0)], rho[(0, 0)]);
    }

    #[test]
    fn dephasing_scales_coherences() {
        let gamma = 0.7;
        let ch = KrausChannel::qubit_dephasing(gamma).unwrap();
        let rho = CMatrix::from_row_slice(2, 2, &[c(0.6, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(0.4, 0.0)]);
        let out = ch.apply(&rho).unwrap();
        assert!((out[(0, 1)] - rho[(0, 1)] * (-gamma).exp()).norm() < 1e-14);
        assert!((out[(1, 1)] - rho[(1, 1)]).norm() < 1e-14);

        let ach = affine_repr(&ch, &qubit()).unwrap();
        let d = (-gamma).exp();
        let want = RMatrix::from_diagonal(&DVector::from_vec(vec![d, d, 1.0]));
        assert!(max_abs_real(&(ach.a() - want)) < 1e-14);
        assert!(ach.c().norm() < 1e-14);

        // E^dag(sigma_x) = e^-gamma sigma_x
        let [x, _, _] = pauli();
        let adj = ch.adjoint_apply(&x).unwrap();
        assert!(max_abs(&(adj - &x * c(d, 0.0))) < 1e-14);
    }

    #[test]
    fn depolarizing_affine() {
        for dim in [2, 3] {
            let b = GeneratorBasis::new(dim).unwrap();
            let p = 0.35;
            let ach = affine_repr(&KrausChannel::depolarizing(dim, p).unwrap(), &b).unwrap();
            let len = b.len();
            assert!(max_abs_real(&(ach.a() - RMatrix::identity(len, len) * p)) < 1e-13);
            assert!(ach.c().norm() < 1e-13);
        }
        let full = affine_repr(&KrausChannel::depolarizing(2, 0.0).unwrap(), &qubit()).unwrap();
        assert!(!full.check_injective(DEFAULT_INJECTIVITY_TOL));
        assert!(!full.injective());
    }

    #[test]
    fn amplitude_damping_is_not_unital() {
        let ach = affine_repr(&KrausChannel::amplitude_damping(0.3).unwrap(), &qubit()).unwrap();
        assert!((ach.c()[2] - 0.3).abs() < 1e-14);
        assert!((ach.a()[(2, 2)] - 0.7).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_channels() {
        let half = linalg::identity(2) * c(0.5, 0.0);
        assert!(matches!(
            KrausChannel::new(vec![half]),
            Err(Error::NotTracePreserving(_))
        ));
        assert!(KrausChannel::new(vec![]).is_err());
        let nonunit = CMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]);
        assert!(matches!(KrausChannel::unitary(nonunit), Err(Error::NotUnitary(_))));
        let ch = KrausChannel::identity(2);
        assert!(ch.apply(&linalg::identity(3)).is_err());
        assert!(ch.adjoint_apply(&linalg::identity(3)).is_err());
        assert!(affine_repr(&ch, &GeneratorBasis::new(3).unwrap()).is_err());
    }

    #[test]
    fn adjoint_preserves_identity() {
        for ch in [
            KrausChannel::qubit_dephasing(0.4).unwrap(),
            KrausChannel::amplitude_damping(0.6).unwrap(),
            KrausChannel::depolarizing(2, 0.2).unwrap(),
        ] {
            let out = ch.adjoint_apply(&linalg::identity(2)).unwrap();
            assert!(max_abs(&(out - linalg::identity(2))) < 1e-10);
        }
    }

    #[test]
    fn adjoint_affine_examples() {
        let id = AffineChannel::identity(2);
        let obs = ObservableRepr::new(0.3, vec![0.1, -0.4, 0.9]);
        assert_eq!(adjoint_affine(&id, &obs).unwrap(), obs);

        let gamma = 0.5;
        let deph = AffineChannel::qubit_dephasing(gamma);
        let ex = ObservableRepr::new(0.0, vec![1.0, 0.0, 0.0]);
        let out = adjoint_affine(&deph, &ex).unwrap();
        assert!((out.x[0] - (-gamma).exp()).abs() < 1e-15);
        assert_eq!(out.x[1], 0.0);
    }

    #[test]
    fn compose_examples() {
        let g1 = 0.2;
        let g2 = 0.45;
        let d = compose(&AffineChannel::qubit_dephasing(g2), &AffineChannel::qubit_dephasing(g1)).unwrap();
        let want = AffineChannel::qubit_dephasing(g1 + g2);
        assert!(max_abs_real(&(d.a() - want.a())) < 1e-15);

        let ch = AffineChannel::qubit_dephasing(0.3);
        let same = compose(&AffineChannel::identity(2), &ch).unwrap();
        assert_eq!(same.a(), ch.a());

        // quarter turn about x after dephasing mixes y and z rows
        let b = qubit();
        let rot = unitary_channel(x_rotation(std::f64::consts::FRAC_PI_2), &b).unwrap();
        let mixed = compose(&rot.affine, &ch).unwrap();
        let e = (-0.3f64).exp();
        // R_x(pi/2): y -> z, z -> -y
        let want = RMatrix::from_row_slice(3, 3, &[e, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, e, 0.0]);
        assert!(max_abs_real(&(mixed.a() - want)) < 1e-14, "{}", mixed.a());

        assert!(compose(&AffineChannel::identity(3), &ch).is_err());
    }

    #[test]
    fn pi_pulse_about_x() {
        let b = qubit();
        let ch = unitary_channel(x_rotation(std::f64::consts::PI), &b).unwrap();
        let want = RMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, -1.0]));
        assert!(max_abs_real(&(ch.affine.a() - want)) < 1e-14);
        let u = unitary_channel(linalg::identity(2), &b).unwrap();
        assert!(max_abs_real(&(u.affine.a() - RMatrix::identity(3, 3))) < 1e-15);
    }
}
