//! JSON spec files in, CSV/JSON results out.
//!
//! Matrices are written as nested row arrays whose entries are either a real
//! number or a `[re, im]` pair.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::channel::{affine_repr, AffineChannel, KrausChannel, DEFAULT_INJECTIVITY_TOL};
use crate::error::{Error, Result};
use crate::estimation::{OptimalMeasurement, TomographyComparison, OPTIMALITY_TOL};
use crate::linalg::{c, CMatrix};
use crate::spin_boson::{
    tilted_observable, BathSpec, PulseSequence, Trajectory, TrajectoryOptions, DEFAULT_REL_TOL, PULSE_MODEL,
};
use crate::su_basis::{BlochVector, GeneratorBasis, ObservableRepr};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

pub type MatrixSpec = Vec<Vec<Entry>>;

fn spec_err(path: &str, message: impl Into<String>) -> Error {
    Error::Spec {
        path: path.to_string(),
        message: message.into(),
    }
}

pub fn matrix_from_spec(spec: &MatrixSpec, path: &str) -> Result<CMatrix> {
    let rows = spec.len();
    if rows == 0 {
        return Err(spec_err(path, "matrix has no rows"));
    }
    let cols = spec[0].len();
    if let Some(r) = spec.iter().position(|row| row.len() != cols) {
        return Err(spec_err(
            &format!("{path}[{r}]"),
            format!("row has {} entries, expected {cols}", spec[r].len()),
        ));
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| match spec[i][j] {
        Entry::Real(x) => c(x, 0.0),
        Entry::Complex([re, im]) => c(re, im),
    }))
}

pub fn matrix_to_spec(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

/// Reads and deserialises a JSON file; parse errors carry the element path.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_json(&text)
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Spec {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinParams {
    pub dim: Option<usize>,
    pub gamma: Option<f64>,
    pub p: Option<f64>,
}

/// Either explicit Kraus operators or a named builtin channel.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub kraus: Option<Vec<MatrixSpec>>,
    pub builtin: Option<String>,
    #[serde(default)]
    pub params: BuiltinParams,
}

fn need(value: Option<f64>, path: &str) -> Result<f64> {
    value.ok_or_else(|| spec_err(path, "missing parameter"))
}

impl ChannelSpec {
    pub fn to_kraus(&self) -> Result<KrausChannel> {
        match (&self.kraus, &self.builtin) {
            (Some(_), Some(_)) => Err(spec_err("builtin", "give either `kraus` or `builtin`, not both")),
            (None, None) => Err(spec_err(".", "channel needs `kraus` or `builtin`")),
            (Some(ops), None) => {
                if ops.is_empty() {
                    return Err(spec_err("kraus", "no Kraus operators"));
                }
                let mats = ops
                    .iter()
                    .enumerate()
                    .map(|(k, m)| matrix_from_spec(m, &format!("kraus[{k}]")))
                    .collect::<Result<Vec<_>>>()?;
                KrausChannel::new(mats)
            }
            (None, Some(name)) => {
                let p = &self.params;
                match name.as_str() {
                    "identity" => Ok(KrausChannel::identity(p.dim.unwrap_or(2))),
                    "dephasing" => KrausChannel::qubit_dephasing(need(p.gamma, "params.gamma")?),
                    "depolarizing" => KrausChannel::depolarizing(p.dim.unwrap_or(2), need(p.p, "params.p")?),
                    "amplitude_damping" => KrausChannel::amplitude_damping(need(p.gamma, "params.gamma")?),
                    other => Err(spec_err(
                        "builtin",
                        format!("unknown channel `{other}` (identity, dephasing, depolarizing, amplitude_damping)"),
                    )),
                }
            }
        }
    }

    pub fn dim(&self) -> Result<usize> {
        Ok(self.to_kraus()?.dim())
    }

    pub fn to_affine(&self, basis: &GeneratorBasis) -> Result<AffineChannel> {
        affine_repr(&self.to_kraus()?, basis)
    }
}

/// `{x0, x}` coefficients, a `matrix`, or the qubit family `theta_obs`
/// (`sin theta sigma_x + cos theta sigma_z`).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub x0: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub matrix: Option<MatrixSpec>,
    pub theta_obs: Option<f64>,
}

impl ObservableSpec {
    pub fn resolve(&self, basis: &GeneratorBasis) -> Result<ObservableRepr> {
        let given = [self.x.is_some(), self.matrix.is_some(), self.theta_obs.is_some()];
        if given.iter().filter(|g| **g).count() != 1 {
            return Err(spec_err(".", "observable needs exactly one of `x`, `matrix`, `theta_obs`"));
        }
        if let Some(m) = &self.matrix {
            if self.x0.is_some() {
                return Err(spec_err("x0", "`x0` only goes with `x`"));
            }
            return basis.observable_from_matrix(&matrix_from_spec(m, "matrix")?);
        }
        if let Some(t) = self.theta_obs {
            if basis.dim() != 2 {
                return Err(spec_err("theta_obs", "`theta_obs` describes a qubit observable"));
            }
            let mut obs = tilted_observable(t);
            obs.x0 = self.x0.unwrap_or(0.0);
            return Ok(obs);
        }
        let x = self.x.clone().unwrap_or_default();
        if x.len() != basis.len() {
            return Err(spec_err(
                "x",
                format!("expected {} coefficients for N = {}, found {}", basis.len(), basis.dim(), x.len()),
            ));
        }
        Ok(ObservableRepr::new(self.x0.unwrap_or(0.0), x))
    }
}

/// `{bloch}` or `{matrix}`; an absent spec means `I/N`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub bloch: Option<Vec<f64>>,
    pub matrix: Option<MatrixSpec>,
}

impl StateSpec {
    pub fn resolve(&self, basis: &GeneratorBasis) -> Result<BlochVector> {
        match (&self.bloch, &self.matrix) {
            (Some(_), Some(_)) => Err(spec_err(".", "give either `bloch` or `matrix`, not both")),
            (None, None) => Ok(BlochVector::zeros(basis.len())),
            (Some(b), None) => {
                if b.len() != basis.len() {
                    return Err(spec_err(
                        "bloch",
                        format!("expected {} components for N = {}, found {}", basis.len(), basis.dim(), b.len()),
                    ));
                }
                let theta = BlochVector::new(b.clone());
                basis.bloch_to_state(&theta, true)?;
                Ok(theta)
            }
            (None, Some(m)) => basis.state_to_bloch(&matrix_from_spec(m, "matrix")?),
        }
    }
}

/// Numerical tolerances shared by the commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub injectivity: f64,
    pub optimality: f64,
    pub quadrature_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            injectivity: DEFAULT_INJECTIVITY_TOL,
            optimality: OPTIMALITY_TOL,
            quadrature_rel: DEFAULT_REL_TOL,
        }
    }
}

impl Tolerances {
    pub const KEYS: [&'static str; 3] = ["injectivity", "optimality", "quadrature_rel"];

    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(spec_err(key, format!("tolerance must be positive, got {value}")));
        }
        match key {
            "injectivity" => self.injectivity = value,
            "optimality" => self.optimality = value,
            "quadrature_rel" => self.quadrature_rel = value,
            _ => {
                return Err(spec_err(
                    key,
                    format!("unknown tolerance (known: {})", Self::KEYS.join(", ")),
                ))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for (k, v) in Self::KEYS.iter().zip([self.injectivity, self.optimality, self.quadrature_rel]) {
            if !(v > 0.0 && v.is_finite()) {
                return Err(spec_err(&format!("tolerances.{k}"), format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn trajectory_options(&self) -> TrajectoryOptions {
        TrajectoryOptions {
            rel_tol: self.quadrature_rel,
            injectivity_tol: self.injectivity,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathEntry {
    pub omega_c: f64,
    #[serde(rename = "kT_over_hbar_omega_c")]
    pub kt_over_hbar_omega_c: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioObservable {
    pub theta_obs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseEntry {
    pub delta_t_omega_c: f64,
    pub tau_fraction: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    pub t_max_omega_c: f64,
    pub points: usize,
}

/// Spin-boson run description. Times are in units of `1/omega_c`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub bath: BathEntry,
    pub observable: ScenarioObservable,
    #[serde(default)]
    pub initial_state: StateSpec,
    #[serde(default)]
    pub pulses: Option<PulseEntry>,
    pub grid: GridEntry,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
}

#[derive(Debug, Clone)]
pub struct ScenarioPlan {
    pub bath: BathSpec,
    pub pulses: Option<PulseSequence>,
    pub theta_obs: f64,
    pub rho0: BlochVector,
    pub grid: Vec<f64>,
    pub tolerances: Tolerances,
}

impl Scenario {
    pub fn plan(&self) -> Result<ScenarioPlan> {
        let bath = BathSpec::new(self.bath.omega_c, self.bath.kt_over_hbar_omega_c).map_err(|e| spec_err("bath", e.to_string()))?;
        let wc = bath.omega_c;
        let pulses = match &self.pulses {
            None => None,
            Some(p) => {
                let dt = p.delta_t_omega_c / wc;
                Some(PulseSequence::new(dt, p.tau_fraction * dt, p.count).map_err(|e| spec_err("pulses", e.to_string()))?)
            }
        };
        if self.grid.points == 0 {
            return Err(spec_err("grid.points", "need at least one grid point"));
        }
        let t_max = self.grid.t_max_omega_c / wc;
        if !(t_max >= 0.0 && t_max.is_finite()) {
            return Err(spec_err("grid.t_max_omega_c", "must be finite and >= 0"));
        }
        let n = self.grid.points;
        let grid = if n == 1 {
            vec![0.0]
        } else {
            (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect()
        };
        let basis = GeneratorBasis::new(2)?;
        let rho0 = self.initial_state.resolve(&basis).map_err(|e| match e {
            Error::Spec { path, message } => spec_err(&format!("initial_state.{path}"), message),
            other => spec_err("initial_state", other.to_string()),
        })?;
        let tolerances = self.tolerances.unwrap_or_default();
        tolerances.validate()?;
        Ok(ScenarioPlan {
            bath,
            pulses,
            theta_obs: self.observable.theta_obs,
            rho0,
            grid,
            tolerances,
        })
    }
}

pub const CSV_HEADER: &str = "t,gamma,theta,phi,J";

/// CSV with 17 significant digits and LF line endings.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for p in &traj.points {
        writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", p.t, p.gamma, p.theta, p.phi, p.j)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub gamma: f64,
    pub theta: f64,
    pub phi: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub a: Vec<Vec<f64>>,
    pub c: Vec<f64>,
}

pub fn trajectory_records(traj: &Trajectory) -> Vec<TrajectoryRecord> {
    traj.points
        .iter()
        .map(|p| TrajectoryRecord {
            t: p.t,
            gamma: p.gamma,
            theta: p.theta,
            phi: p.phi,
            j: p.j,
            a: (0..p.a.nrows()).map(|i| p.a.row(i).iter().copied().collect()).collect(),
            c: p.c.iter().copied().collect(),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelFlags {
    pub spectral_density: &'static str,
    pub pulse_model: &'static str,
    pub units: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryMetadata {
    pub scenario: Scenario,
    pub model: ModelFlags,
    pub tolerances: Tolerances,
    pub columns: Vec<&'static str>,
    pub points: usize,
    pub version: &'static str,
}

impl TrajectoryMetadata {
    pub fn new(scenario: &Scenario, plan: &ScenarioPlan) -> Self {
        Self {
            scenario: scenario.clone(),
            model: ModelFlags {
                spectral_density: "ohmic: D(w) = w exp(-w/omega_c) / 4",
                pulse_model: PULSE_MODEL,
                units: "hbar = 1; t in 1/omega_c; temperature as kT/(hbar omega_c)",
            },
            tolerances: plan.tolerances,
            columns: CSV_HEADER.split(',').collect(),
            points: plan.grid.len(),
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimalReport {
    pub dim: usize,
    pub y0: f64,
    pub y: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub ranks: Vec<usize>,
    pub projectors: Vec<Vec<Vec<[f64; 2]>>>,
    pub j_max: f64,
    pub j_classical: f64,
    pub j_sld: Option<f64>,
    pub condition_number: f64,
    pub excluded_outcomes: Vec<usize>,
    pub diagnostics: Vec<String>,
}

impl OptimalReport {
    pub fn new(opt: &OptimalMeasurement) -> Self {
        Self {
            dim: opt.measurement.dim(),
            y0: opt.y.x0,
            y: opt.y.x.iter().copied().collect(),
            eigenvalues: opt.measurement.eigenvalues().to_vec(),
            ranks: opt.measurement.ranks().to_vec(),
            projectors: opt.measurement.projectors().iter().map(matrix_to_spec).collect(),
            j_max: opt.j_max,
            j_classical: opt.j_classical,
            j_sld: opt.j_sld,
            condition_number: opt.condition_number,
            excluded_outcomes: opt.excluded_outcomes.clone(),
            diagnostics: opt.diagnostics.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TomographyReport {
    pub j_optimal: f64,
    pub j_tomography: f64,
    pub ratio: f64,
}

impl From<TomographyComparison> for TomographyReport {
    fn from(t: TomographyComparison) -> Self {
        Self {
            j_optimal: t.j_optimal,
            j_tomography: t.j_tomography,
            ratio: t.ratio,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin_boson::trajectory;

    #[test]
    fn parses_complex_kraus() {
        let spec: ChannelSpec = parse_json(r#"{"kraus": [[[1, 0], [0, [0, 1]]]]}"#).unwrap();
        let k = spec.to_kraus();
        // diag(1, i) is unitary, so a valid one-operator channel
        assert!(k.is_ok(), "{k:?}");
    }

    #[test]
    fn parse_errors_name_the_path() {
        let err = parse_json::<ChannelSpec>(r#"{"builtin": "dephasing", "params": {"gamma": "x"}}"#).unwrap_err();
        match err {
            Error::Spec { path, .. } => assert_eq!(path, "params.gamma"),
            other => panic!("{other:?}"),
        }
        let err = parse_json::<ChannelSpec>(r#"{"bogus": 1}"#).unwrap_err();
        assert!(matches!(err, Error::Spec { .. }));
    }

    #[test]
    fn builtin_channels() {
        let basis = GeneratorBasis::new(2).unwrap();
        let spec: ChannelSpec = parse_json(r#"{"builtin": "dephasing", "params": {"gamma": 0.5}}"#).unwrap();
        let a = spec.to_affine(&basis).unwrap();
        assert!((a.a()[(0, 0)] - (-0.5f64).exp()).abs() < 1e-14);
        let missing: ChannelSpec = parse_json(r#"{"builtin": "depolarizing"}"#).unwrap();
        assert!(matches!(missing.to_kraus(), Err(Error::Spec { .. })));
        let unknown: ChannelSpec = parse_json(r#"{"builtin": "teleport"}"#).unwrap();
        assert!(unknown.to_kraus().is_err());
    }

    #[test]
    fn observable_and_state_specs() {
        let basis = GeneratorBasis::new(2).unwrap();
        let o: ObservableSpec = parse_json(r#"{"x0": 1.0, "x": [0, 0, 1]}"#).unwrap();
        assert_eq!(o.resolve(&basis).unwrap().x0, 1.0);
        let o: ObservableSpec = parse_json(r#"{"matrix": [[1, 0], [0, -1]]}"#).unwrap();
        assert!((o.resolve(&basis).unwrap().x[2] - 1.0).abs() < 1e-15);
        let o: ObservableSpec = parse_json(r#"{"x": [1, 2]}"#).unwrap();
        assert!(o.resolve(&basis).is_err());
        let s: StateSpec = parse_json(r#"{"bloch": [0, 0, 1.5]}"#).unwrap();
        assert!(s.resolve(&basis).is_err());
        let s = StateSpec::default();
        assert_eq!(s.resolve(&basis).unwrap().0.norm(), 0.0);
    }

    #[test]
    fn tolerance_overrides() {
        let mut t = Tolerances::default();
        t.set("optimality", 1e-6).unwrap();
        assert_eq!(t.optimality, 1e-6);
        assert!(t.set("optimality", -1.0).is_err());
        assert!(t.set("speed", 1.0).is_err());
    }

    const SCENARIO: &str = r#"{
        "bath": {"omega_c": 1.0, "kT_over_hbar_omega_c": 10.0},
        "observable": {"theta_obs": 0.7853981633974483},
        "initial_state": {"bloch": [0, 0, 0]},
        "pulses": null,
        "grid": {"t_max_omega_c": 1.0, "points": 5}
    }"#;

    #[test]
    fn scenario_to_csv() {
        let sc: Scenario = parse_json(SCENARIO).unwrap();
        let plan = sc.plan().unwrap();
        assert_eq!(plan.grid, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let traj = trajectory(&plan.grid, plan.theta_obs, &plan.rho0, None, &plan.bath, plan.tolerances.trajectory_options()).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 6);
        assert!(!text.contains('\r'));
        let first: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(first[0], 0.0);
        assert!((first[2] - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!((first[4] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn scenario_rejects_bad_pulses() {
        let text = SCENARIO.replace("\"pulses\": null", "\"pulses\": {\"delta_t_omega_c\": 0.3, \"tau_fraction\": 1.5, \"count\": 2}");
        let sc: Scenario = parse_json(&text).unwrap();
        assert!(matches!(sc.plan(), Err(Error::Spec { .. })));
    }
}
