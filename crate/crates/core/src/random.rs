//! Random states, channels, POVMs and observables for property tests and
//! the validation suite. All draws go through a caller-supplied generator.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{affine_repr, AffineChannel, KrausChannel};
use crate::error::{Error, Result};
use crate::linalg::{c, inv_sqrt_hermitian, CMatrix};
use crate::su_basis::{BlochVector, GeneratorBasis, ObservableRepr};

/// Smallest accepted singular value of `A` for [`random_injective_channel`].
pub const INJECTIVE_MARGIN: f64 = 1e-3;
const MAX_ATTEMPTS: usize = 1000;

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    DMatrix::from_fn(rows, cols, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Haar-random unitary (QR of a Ginibre matrix with the phase of `R` fixed).
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    random_isometry(dim, dim, rng)
}

/// `rows x cols` matrix with orthonormal columns.
fn random_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let qr = ginibre(rows, cols, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..cols {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..rows {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Full-rank density matrix: a normalised Wishart draw mixed with `I/N` at
/// weight `floor`, so the smallest eigenvalue is at least `floor / N`.
pub fn random_density<R: Rng + ?Sized>(dim: usize, floor: f64, rng: &mut R) -> CMatrix {
    let g = ginibre(dim, dim, rng);
    let w = &g * g.adjoint();
    let tr = w.trace().re;
    let mixed = CMatrix::identity(dim, dim) * c(1.0 / dim as f64, 0.0);
    w * c((1.0 - floor) / tr, 0.0) + mixed * c(floor, 0.0)
}

pub fn random_bloch<R: Rng + ?Sized>(basis: &GeneratorBasis, floor: f64, rng: &mut R) -> Result<BlochVector> {
    basis.state_to_bloch(&random_density(basis.dim(), floor, rng))
}

/// Channel with `rank` Kraus operators cut from a random isometry.
pub fn random_kraus_channel<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> Result<KrausChannel> {
    if rank == 0 {
        return Err(Error::InvalidParameter("Kraus rank must be >= 1".into()));
    }
    let v = random_isometry(dim * rank, dim, rng);
    let kraus = (0..rank)
        .map(|k| v.rows(k * dim, dim).into_owned())
        .collect();
    KrausChannel::new(kraus)
}

/// Random channel whose affine matrix has smallest singular value above
/// [`INJECTIVE_MARGIN`]. Kraus rank is drawn from `1..=max_rank`.
pub fn random_injective_channel<R: Rng + ?Sized>(
    basis: &GeneratorBasis,
    max_rank: usize,
    rng: &mut R,
) -> Result<(KrausChannel, AffineChannel)> {
    for _ in 0..MAX_ATTEMPTS {
        let rank = rng.random_range(1..=max_rank.max(1));
        let k = random_kraus_channel(basis.dim(), rank, rng)?;
        let a = affine_repr(&k, basis)?;
        if a.min_singular_value() > INJECTIVE_MARGIN {
            return Ok((k, a));
        }
    }
    Err(Error::InvalidParameter(format!(
        "no injective channel found in {MAX_ATTEMPTS} draws"
    )))
}

/// `outcomes`-element POVM `E_k = S^{-1/2} G_k S^{-1/2}` from Wishart `G_k`.
pub fn random_povm<R: Rng + ?Sized>(dim: usize, outcomes: usize, rng: &mut R) -> Vec<CMatrix> {
    let raw: Vec<CMatrix> = (0..outcomes)
        .map(|_| {
            let g = ginibre(dim, dim, rng);
            &g * g.adjoint()
        })
        .collect();
    let total = raw.iter().fold(CMatrix::zeros(dim, dim), |acc, g| acc + g);
    let s = inv_sqrt_hermitian(&total);
    raw.iter().map(|g| &s * g * &s).collect()
}

/// Observable with standard-normal coefficients.
pub fn random_observable<R: Rng + ?Sized>(basis: &GeneratorBasis, rng: &mut R) -> ObservableRepr {
    let x0 = rng.sample(StandardNormal);
    let x = (0..basis.len()).map(|_| rng.sample(StandardNormal)).collect();
    ObservableRepr::new(x0, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eigen, max_abs};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn unitary_is_unitary() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for d in 2..5 {
            let u = random_unitary(d, &mut rng);
            assert!(max_abs(&(u.adjoint() * &u - CMatrix::identity(d, d))) < 1e-12);
        }
    }

    #[test]
    fn density_is_full_rank() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let rho = random_density(3, 0.05, &mut rng);
        let (vals, _) = hermitian_eigen(&rho);
        assert!(vals[0] >= 0.05 / 3.0 - 1e-12);
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn channels_and_povms_are_valid() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let basis = GeneratorBasis::new(3).unwrap();
        let (k, a) = random_injective_channel(&basis, 3, &mut rng).unwrap();
        assert!(k.completeness_defect() < 1e-10);
        assert!(a.min_singular_value() > INJECTIVE_MARGIN);
        let povm = random_povm(3, 5, &mut rng);
        let sum = povm.iter().fold(CMatrix::zeros(3, 3), |acc, e| acc + e);
        assert!(max_abs(&(sum - CMatrix::identity(3, 3))) < 1e-10);
        for e in &povm {
            assert!(hermitian_eigen(e).0[0] > -1e-12);
        }
    }
}
