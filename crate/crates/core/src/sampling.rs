//! Monte Carlo check of the Cramér–Rao bound.
//!
//! Every run draws from its own ChaCha20 substream, keyed by `(seed, run)`,
//! so results do not depend on how runs are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{AffineChannel, DEFAULT_INJECTIVITY_TOL};
use crate::error::{Error, Result};
use crate::estimation::{
    optimal_measurement, pauli_measurement, solve_optimal_observable, tomography_fisher,
    ProjectiveMeasurement,
};
use crate::linalg::RVector;
use crate::su_basis::{expectation, BlochVector, GeneratorBasis, ObservableRepr, StructureConstants};

pub const PRNG_NAME: &str = "chacha20/rand_chacha-0.9 seed_from_u64+set_stream; binomial-chain/rand_distr-0.5";
const SUM_TOL: f64 = 1e-10;
const NEGATIVE_TOL: f64 = 1e-12;
/// Tolerance on the pooled within-run estimate of `n Var(X*)`.
pub const POOLED_TOL: f64 = 0.02;

/// Generator for run `run` of a seeded experiment.
pub fn substream(seed: u64, run: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Multinomial draw of `n` outcomes, as a chain of conditional binomials.
pub fn sample_counts(p: &[f64], n: u64, rng: &mut ChaCha20Rng) -> Result<Vec<u64>> {
    if p.is_empty() {
        return Err(Error::InvalidParameter("empty probability vector".into()));
    }
    for (index, &value) in p.iter().enumerate() {
        if !value.is_finite() || value < -NEGATIVE_TOL {
            return Err(Error::InvalidProbability { index, value });
        }
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidParameter(format!(
            "probabilities sum to {total:.17e}, not 1"
        )));
    }
    let mut counts = vec![0u64; p.len()];
    let mut remaining_n = n;
    let mut remaining_mass = 1.0;
    for (i, &pi) in p.iter().enumerate() {
        if remaining_n == 0 {
            break;
        }
        if i + 1 == p.len() {
            counts[i] = remaining_n;
            break;
        }
        let pi = pi.max(0.0);
        let q = if remaining_mass > 0.0 {
            (pi / remaining_mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let draw = Binomial::new(remaining_n, q)
            .map_err(|e| Error::InvalidParameter(format!("binomial({remaining_n}, {q}): {e}")))?
            .sample(rng);
        counts[i] = draw;
        remaining_n -= draw;
        remaining_mass -= pi;
    }
    Ok(counts)
}

/// Outcome counts of `n` shots of `pm` on the state with Bloch vector
/// `state` (already the channel output).
pub fn sample_outcomes(
    pm: &ProjectiveMeasurement,
    state: &BlochVector,
    n: u64,
    seed: u64,
) -> Result<Vec<u64>> {
    let p = pm.probabilities(state)?;
    sample_counts(&p, n, &mut substream(seed, 0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRun {
    pub seed: u64,
    pub run: u64,
    pub n: u64,
    pub counts: Vec<u64>,
    pub estimate: f64,
    /// Within-run estimate of `n Var(X*)`.
    pub empirical_variance: f64,
}

/// `X* = y0 + sum_i alpha_i count_i / n`.
pub fn estimate_expectation(counts: &[u64], pm: &ProjectiveMeasurement, y0: f64) -> Result<f64> {
    let (mean, _) = weighted_moments(counts, pm.eigenvalues())?;
    Ok(y0 + mean)
}

/// Mean and unbiased sample variance of outcome values given their counts.
fn weighted_moments(counts: &[u64], values: &[f64]) -> Result<(f64, f64)> {
    if counts.len() != values.len() {
        return Err(Error::LengthMismatch {
            expected: values.len(),
            found: counts.len(),
        });
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::InvalidParameter("no samples".into()));
    }
    let nf = n as f64;
    let mean = counts.iter().zip(values).map(|(&c, &v)| c as f64 * v).sum::<f64>() / nf;
    let var = if n > 1 {
        counts
            .iter()
            .zip(values)
            .map(|(&c, &v)| c as f64 * (v - mean) * (v - mean))
            .sum::<f64>()
            / (nf - 1.0)
    } else {
        0.0
    };
    Ok((mean, var))
}

/// How the `n` shots of one run are spent and turned into an estimate.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Strategy {
    /// All shots on one projective measurement; `X* = y0 + mean eigenvalue`.
    Projective {
        measurement: ProjectiveMeasurement,
        y0: f64,
    },
    /// Qubit tomography: shots split evenly over `sigma_x, sigma_y, sigma_z`,
    /// `X* = y0 + y . s_est` with `y = (A^T)^-1 x`.
    QubitTomography {
        axes: [ProjectiveMeasurement; 3],
        y: RVector,
        y0: f64,
    },
}

#[derive(Debug, Clone)]
pub struct CramerRaoSetup {
    pub strategy: Strategy,
    /// Bloch vector of the channel output.
    pub output: BlochVector,
    /// `<X>` on the input state.
    pub exact: f64,
    /// `1 / J(x; strategy)`.
    pub inverse_j: f64,
    pub label: String,
}

impl CramerRaoSetup {
    /// Optimal measurement `P_Y` for `obs` after `ach`.
    pub fn optimal(
        ach: &AffineChannel,
        obs: &ObservableRepr,
        theta: &BlochVector,
        basis: &GeneratorBasis,
        sc: &StructureConstants,
    ) -> Result<Self> {
        let opt = optimal_measurement(ach, obs, theta, basis, sc)?;
        Self::finish(
            Strategy::Projective {
                measurement: opt.measurement,
                y0: opt.y.x0,
            },
            ach,
            obs,
            theta,
            opt.j_classical,
            "optimal",
        )
    }

    /// Even three-way Pauli split on a qubit.
    pub fn tomography(
        ach: &AffineChannel,
        obs: &ObservableRepr,
        theta: &BlochVector,
        basis: &GeneratorBasis,
    ) -> Result<Self> {
        let solved = solve_optimal_observable(ach, obs, DEFAULT_INJECTIVITY_TOL)?;
        let j = tomography_fisher(&obs.x, ach, theta, basis)?;
        let axes = [
            pauli_measurement(0, basis)?,
            pauli_measurement(1, basis)?,
            pauli_measurement(2, basis)?,
        ];
        Self::finish(
            Strategy::QubitTomography {
                axes,
                y: solved.y.x,
                y0: solved.y.x0,
            },
            ach,
            obs,
            theta,
            j,
            "tomography",
        )
    }

    fn finish(
        strategy: Strategy,
        ach: &AffineChannel,
        obs: &ObservableRepr,
        theta: &BlochVector,
        j: f64,
        label: &str,
    ) -> Result<Self> {
        if !(j > 0.0 && j.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Fisher information must be positive and finite, got {j}"
            )));
        }
        Ok(Self {
            strategy,
            output: ach.apply_bloch(theta)?,
            exact: expectation(obs, theta)?,
            inverse_j: 1.0 / j,
            label: label.to_string(),
        })
    }

    /// One run of `n` shots on substream `(seed, run)`.
    pub fn run(&self, n: u64, seed: u64, run: u64) -> Result<SampleRun> {
        let mut rng = substream(seed, run);
        match &self.strategy {
            Strategy::Projective { measurement, y0 } => {
                let p = measurement.probabilities(&self.output)?;
                let counts = sample_counts(&p, n, &mut rng)?;
                let (mean, var) = weighted_moments(&counts, measurement.eigenvalues())?;
                Ok(SampleRun {
                    seed,
                    run,
                    n,
                    counts,
                    estimate: y0 + mean,
                    empirical_variance: var,
                })
            }
            Strategy::QubitTomography { axes, y, y0 } => {
                let mut counts = Vec::with_capacity(6);
                let mut estimate = *y0;
                let mut n_var = 0.0;
                for (a, pm) in axes.iter().enumerate() {
                    let shots = n / 3 + u64::from((a as u64) < n % 3);
                    let p = pm.probabilities(&self.output)?;
                    let c = sample_counts(&p, shots, &mut rng)?;
                    let (mean, var) = weighted_moments(&c, pm.eigenvalues())?;
                    // n Var(X*) = sum_a y_a^2 (n / n_a) Var_a
                    estimate += y[a] * mean;
                    n_var += y[a] * y[a] * (n as f64 / shots as f64) * var;
                    counts.extend(c);
                }
                Ok(SampleRun {
                    seed,
                    run,
                    n,
                    counts,
                    estimate,
                    empirical_variance: n_var,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CramerRaoReport {
    pub strategy: String,
    pub n: u64,
    pub runs: u64,
    pub seed: u64,
    pub prng: String,
    pub exact: f64,
    pub estimate_mean: f64,
    /// `(mean - exact) / standard error of the mean`.
    pub bias_z: f64,
    /// `n` times the unbiased across-run sample variance of `X*`.
    pub n_var: f64,
    /// Mean over runs of the within-run estimate of `n Var(X*)`.
    pub pooled_n_var: f64,
    pub inverse_j: f64,
    /// `(n_var J - 1) / sqrt(2 / (runs - 1))`.
    pub z_score: f64,
    /// Three standard errors of the chi-squared variance estimator.
    pub stat_tol: f64,
    pub pooled_tol: f64,
    pub pass: bool,
}

/// Runs `runs` independent experiments of `n` shots and compares the spread
/// of `X*` with `1 / J`.
pub fn cramer_rao_check(setup: &CramerRaoSetup, n: u64, runs: u64, seed: u64) -> Result<CramerRaoReport> {
    if runs < 2 || n == 0 {
        return Err(Error::InvalidParameter(format!(
            "need n >= 1 and runs >= 2, got n = {n}, runs = {runs}"
        )));
    }
    let results = (0..runs)
        .into_par_iter()
        .map(|r| setup.run(n, seed, r))
        .collect::<Result<Vec<_>>>()?;
    let rf = runs as f64;
    let mean = results.iter().map(|r| r.estimate).sum::<f64>() / rf;
    let var = results
        .iter()
        .map(|r| (r.estimate - mean) * (r.estimate - mean))
        .sum::<f64>()
        / (rf - 1.0);
    let pooled = results.iter().map(|r| r.empirical_variance).sum::<f64>() / rf;
    let n_var = n as f64 * var;
    let sigma_rel = (2.0 / (rf - 1.0)).sqrt();
    let stat_tol = 3.0 * sigma_rel;
    let ratio = n_var / setup.inverse_j;
    let pass = n_var >= (1.0 - stat_tol) * setup.inverse_j
        && (ratio - 1.0).abs() <= stat_tol
        && (pooled / setup.inverse_j - 1.0).abs() <= POOLED_TOL;
    let sem = (setup.inverse_j / (n as f64 * rf)).sqrt();
    Ok(CramerRaoReport {
        strategy: setup.label.clone(),
        n,
        runs,
        seed,
        prng: PRNG_NAME.to_string(),
        exact: setup.exact,
        estimate_mean: mean,
        bias_z: (mean - setup.exact) / sem,
        n_var,
        pooled_n_var: pooled,
        inverse_j: setup.inverse_j,
        z_score: (ratio - 1.0) / sigma_rel,
        stat_tol,
        pooled_tol: POOLED_TOL,
        pass,
    })
}

/// One-sided z-score of `n_var` above a reference `1/J`, in units of the
/// across-run standard error.
pub fn z_above(report: &CramerRaoReport, reference_inverse_j: f64) -> f64 {
    let sigma_rel = (2.0 / (report.runs as f64 - 1.0)).sqrt();
    (report.n_var / reference_inverse_j - 1.0) / sigma_rel
}
