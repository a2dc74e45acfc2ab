//! Optimal measurements for estimating an expectation value through a known
//! noisy channel.
//!
//! States, observables and channels live in the generalized Bloch
//! representation over the su(N) generators. For an injective channel with
//! affine form `(A, c)` the measurement of `Y = E^dag^{-1}(X)` saturates the
//! quantum Cramér–Rao bound for `<X>`, with Fisher information `1/Var(Y)`.
//!
//! ```
//! use qfisher::channel::AffineChannel;
//! use qfisher::estimation::optimal_measurement;
//! use qfisher::su_basis::{BlochVector, GeneratorBasis, ObservableRepr, StructureConstants};
//!
//! let basis = GeneratorBasis::new(2).unwrap();
//! let sc = StructureConstants::new(&basis);
//! let x = ObservableRepr::new(0.0, vec![1.0, 0.0, 1.0]);
//! let noisy = AffineChannel::qubit_dephasing(0.5);
//! let opt = optimal_measurement(&noisy, &x, &BlochVector::zeros(3), &basis, &sc).unwrap();
//! assert!((opt.y.x[0] - 0.5f64.exp()).abs() < 1e-12);
//! ```

pub mod channel;
pub mod error;
pub mod estimation;
pub mod io;
pub mod linalg;
pub mod quadrature;
pub mod random;
pub mod sampling;
pub mod spin_boson;
pub mod su_basis;
pub mod validation;

pub use channel::{AffineChannel, Channel, KrausChannel};
pub use error::{Error, Result};
pub use estimation::{optimal_measurement, OptimalMeasurement, ProjectiveMeasurement};
pub use su_basis::{BlochVector, GeneratorBasis, ObservableRepr, StructureConstants};
