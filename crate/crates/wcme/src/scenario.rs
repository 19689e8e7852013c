//! Scenario files: one JSON document describing the system, bath, coupling
//! strength, time grid and solver options. Complex numbers are `[re, im]`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use weakcoupling::bath::{BathModel, SpectralDensity};
use weakcoupling::generators::{centering_correction, Picture};
use weakcoupling::operators::{c64, DensityMatrix, HermitianOperator};
use weakcoupling::oracle::{discretize_bath, TruncatedBath};
use weakcoupling::system::OpenSystem;
use weakcoupling::{spectral::DEFAULT_TAU_DEG, Matrix};

use crate::error::CliError;

pub type MatrixSpec = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub metadata: Metadata,
    /// Bare system Hamiltonian H_S⁽⁰⁾.
    pub hamiltonian: MatrixSpec,
    pub couplings: Vec<MatrixSpec>,
    pub bath: BathSpec,
    pub lambda: f64,
    pub time_grid: TimeGrid,
    #[serde(default)]
    pub options: Options,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSpec>,
    /// Defaults to the highest eigenstate of the renormalized Hamiltonian.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<MatrixSpec>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    /// Physical value of the unit frequency, in s⁻¹.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_frequency: Option<f64>,
    /// Physical magnitudes the dimensionless numbers were derived from.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub magnitudes: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    pub beta: f64,
    #[serde(flatten)]
    pub spectral: SpectralSpec,
    /// Hermitian PSD cross-coupling matrix c_ij; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_matrix: Option<MatrixSpec>,
    /// Reservoir expectations ⟨R_i⟩; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum SpectralSpec {
    OhmicExp {
        s: f64,
        cutoff: f64,
        kappa: f64,
    },
    Tabulated {
        omega: Vec<f64>,
        j: Vec<f64>,
    },
    /// Two-column CSV (omega, J) with a header row, relative to the scenario file.
    TabulatedCsv {
        path: PathBuf,
    },
    Discrete {
        modes: Vec<f64>,
        weights: Vec<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default = "default_spacing")]
    pub spacing: Spacing,
}

fn default_spacing() -> Spacing {
    Spacing::Linear
}

impl TimeGrid {
    pub fn times(&self) -> Result<Vec<f64>, CliError> {
        let bad = |m: &str| CliError::validation("scenario", m.to_string());
        if !(self.start.is_finite() && self.stop.is_finite() && self.start >= 0.0) {
            return Err(bad("time grid bounds must be finite and start >= 0"));
        }
        if self.points == 0 {
            return Err(bad("time grid needs at least one point"));
        }
        if self.points == 1 {
            return Ok(vec![self.start]);
        }
        if !(self.stop > self.start) {
            return Err(bad("time grid must be increasing (stop > start)"));
        }
        let n = (self.points - 1) as f64;
        Ok(match self.spacing {
            Spacing::Linear => (0..self.points)
                .map(|k| self.start + (self.stop - self.start) * k as f64 / n)
                .collect(),
            Spacing::Log => {
                if self.start <= 0.0 {
                    return Err(bad("log spacing needs start > 0"));
                }
                let (a, b) = (self.start.ln(), self.stop.ln());
                (0..self.points).map(|k| (a + (b - a) * k as f64 / n).exp()).collect()
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Equation {
    Davies,
    Redfield,
    Cumulant,
}

impl Equation {
    pub fn name(self) -> &'static str {
        match self {
            Equation::Davies => "davies",
            Equation::Redfield => "redfield",
            Equation::Cumulant => "cumulant",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default = "default_picture")]
    pub picture: Picture,
    #[serde(default)]
    pub include_lamb_stark: bool,
    #[serde(default = "default_true")]
    pub renormalized: bool,
    #[serde(default = "default_equation")]
    pub equation: Equation,
}

fn default_picture() -> Picture {
    Picture::Schrodinger
}
fn default_true() -> bool {
    true
}
fn default_equation() -> Equation {
    Equation::Cumulant
}

impl Default for Options {
    fn default() -> Self {
        Self {
            picture: Picture::Schrodinger,
            include_lamb_stark: false,
            renormalized: true,
            equation: Equation::Cumulant,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub modes: usize,
    pub n_max: usize,
    /// Defaults to 6·cutoff.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_max: Option<f64>,
    /// Modes used for the dense mean-force oracle; defaults to the largest
    /// count within the dense dimension limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub static_modes: Option<usize>,
}

/// A validated scenario turned into library objects.
#[derive(Clone, Debug)]
pub struct Built {
    pub h0: HermitianOperator,
    /// H_S⁽¹⁾ = H_S⁽⁰⁾ + λ Σ ⟨R_i⟩ S_i.
    pub h_ren: HermitianOperator,
    pub couplings: Vec<HermitianOperator>,
    pub bath: BathModel,
    /// Open system on H_S⁽¹⁾ with the centered bath.
    pub system: OpenSystem,
    pub rho0: DensityMatrix,
    pub times: Vec<f64>,
}

fn matrix(spec: &MatrixSpec, what: &str) -> Result<Matrix, CliError> {
    let n = spec.len();
    if n == 0 || spec.iter().any(|r| r.len() != n) {
        return Err(CliError::validation(
            "scenario",
            format!("{what} must be a non-empty square matrix"),
        ));
    }
    if spec.iter().flatten().any(|z| !(z[0].is_finite() && z[1].is_finite())) {
        return Err(CliError::validation(
            "scenario",
            format!("{what} has non-finite entries"),
        ));
    }
    Ok(DMatrix::from_fn(n, n, |r, c| c64(spec[r][c][0], spec[r][c][1])))
}

pub fn matrix_spec(m: &Matrix) -> MatrixSpec {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

fn read_table(path: &Path) -> Result<SpectralDensity, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::validation("scenario", format!("cannot read {}: {e}", path.display())))?;
    let (mut omega, mut j) = (Vec::new(), Vec::new());
    for row in reader.deserialize::<(f64, f64)>() {
        let (w, v) = row.map_err(|e| CliError::validation("scenario", format!("{}: {e}", path.display())))?;
        omega.push(w);
        j.push(v);
    }
    Ok(SpectralDensity::Tabulated { omega, j })
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::validation("scenario", format!("invalid scenario JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Replaces file references by inline data, resolving relative paths
    /// against `base`.
    pub fn resolve_files(&mut self, base: &Path) -> Result<(), CliError> {
        if let SpectralSpec::TabulatedCsv { path } = &self.bath.spectral {
            let full = if path.is_absolute() {
                path.clone()
            } else {
                base.join(path)
            };
            match read_table(&full)? {
                SpectralDensity::Tabulated { omega, j } => self.bath.spectral = SpectralSpec::Tabulated { omega, j },
                _ => unreachable!(),
            }
        }
        Ok(())
    }

    pub fn spectral_density(&self) -> Result<SpectralDensity, CliError> {
        let sd = match &self.bath.spectral {
            SpectralSpec::OhmicExp { s, cutoff, kappa } => SpectralDensity::ohmic(*s, *cutoff, *kappa),
            SpectralSpec::Tabulated { omega, j } => SpectralDensity::Tabulated {
                omega: omega.clone(),
                j: j.clone(),
            },
            SpectralSpec::Discrete { modes, weights } => SpectralDensity::Discrete {
                modes: modes.clone(),
                weights: weights.clone(),
            },
            SpectralSpec::TabulatedCsv { .. } => {
                return Err(CliError::validation(
                    "scenario",
                    "tabulated-csv path was not resolved".into(),
                ))
            }
        };
        sd.validate().map_err(|e| CliError::lib("bath", e))?;
        Ok(sd)
    }

    fn bath_model(&self, spectral: SpectralDensity) -> Result<BathModel, CliError> {
        let n = self.couplings.len();
        let c = match &self.bath.coupling_matrix {
            Some(m) => matrix(m, "bath coupling matrix")?,
            None => Matrix::identity(n, n),
        };
        if c.nrows() != n {
            return Err(CliError::validation(
                "scenario",
                format!("coupling matrix is {}x{} for {n} couplings", c.nrows(), c.ncols()),
            ));
        }
        let offsets = self.bath.offsets.clone().unwrap_or_else(|| vec![0.0; n]);
        BathModel::new(self.bath.beta, spectral, c, offsets).map_err(|e| CliError::lib("bath", e))
    }

    /// Checks every precondition and builds the library objects.
    pub fn build(&self) -> Result<Built, CliError> {
        self.build_with(self.spectral_density()?)
    }

    /// Same as `build` with the bath replaced by the oracle's modes.
    pub fn build_discrete(&self, tb: &TruncatedBath) -> Result<Built, CliError> {
        self.build_with(tb.spectral_density())
    }

    fn build_with(&self, spectral: SpectralDensity) -> Result<Built, CliError> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(CliError::validation(
                "scenario",
                format!("lambda must be finite and >= 0, got {}", self.lambda),
            ));
        }
        if self.couplings.is_empty() {
            return Err(CliError::validation(
                "scenario",
                "at least one coupling operator is required".into(),
            ));
        }
        let h0 = HermitianOperator::new(matrix(&self.hamiltonian, "hamiltonian")?)
            .map_err(|e| CliError::lib("operators", e))?;
        let couplings = self
            .couplings
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let m = matrix(m, &format!("coupling {k}"))?;
                HermitianOperator::new(m).map_err(|e| CliError::lib("operators", e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if couplings.iter().any(|s| s.dim() != h0.dim()) {
            return Err(CliError::validation(
                "scenario",
                "coupling dimension differs from the Hamiltonian".into(),
            ));
        }
        let bath = self.bath_model(spectral)?;
        let scaled: Vec<f64> = bath.offsets.iter().map(|r| r * self.lambda).collect();
        let (_, h_ren) = centering_correction(&h0, &couplings, &scaled).map_err(|e| CliError::lib("generators", e))?;
        let mut centered = bath.clone();
        centered.offsets = vec![0.0; couplings.len()];
        let system = OpenSystem::new(h_ren.clone(), couplings.clone(), centered, self.lambda, DEFAULT_TAU_DEG)
            .map_err(|e| CliError::lib("spectral", e))?;
        self.options_check()?;
        let rho0 = match &self.initial_state {
            Some(m) => DensityMatrix::new(matrix(m, "initial state")?).map_err(|e| CliError::lib("operators", e))?,
            None => {
                let (_, v) = h_ren.eigh();
                let top = v.column(v.ncols() - 1).into_owned();
                DensityMatrix::pure(&top).map_err(|e| CliError::lib("operators", e))?
            }
        };
        if rho0.dim() != h0.dim() {
            return Err(CliError::validation(
                "scenario",
                "initial state dimension differs from the Hamiltonian".into(),
            ));
        }
        let times = self.time_grid.times()?;
        Ok(Built {
            h0,
            h_ren,
            couplings,
            bath,
            system,
            rho0,
            times,
        })
    }

    fn options_check(&self) -> Result<(), CliError> {
        if self.options.renormalized && self.options.include_lamb_stark {
            return Err(CliError::validation(
                "generators",
                "renormalized generators never include the Lamb-Stark term".into(),
            ));
        }
        Ok(())
    }

    pub fn oracle_bath(&self) -> Result<Option<TruncatedBath>, CliError> {
        let Some(spec) = self.oracle else {
            return Ok(None);
        };
        Ok(Some(self.oracle_bath_with(spec.modes, &spec)?))
    }

    pub fn oracle_bath_with(&self, modes: usize, spec: &OracleSpec) -> Result<TruncatedBath, CliError> {
        let sd = self.spectral_density()?;
        if sd.is_discrete() {
            return Err(CliError::validation(
                "oracle",
                "the oracle needs a continuous spectral density".into(),
            ));
        }
        let omega_max = spec.omega_max.unwrap_or(6.0 * sd.scale());
        discretize_bath(&sd, modes, omega_max, spec.n_max).map_err(|e| CliError::lib("oracle", e))
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }
}

/// Names of the bundled presets.
pub const PRESETS: [&str; 3] = ["qubit-ohmic", "atom", "superconducting-qubit"];

fn qubit(name: &str, lambda: f64, beta: f64, cutoff: f64, kappa: f64) -> Scenario {
    let z = [0.0, 0.0];
    Scenario {
        name: name.into(),
        metadata: Metadata::default(),
        hamiltonian: vec![vec![[0.5, 0.0], z], vec![z, [-0.5, 0.0]]],
        couplings: vec![vec![vec![z, [1.0, 0.0]], vec![[1.0, 0.0], z]]],
        bath: BathSpec {
            beta,
            spectral: SpectralSpec::OhmicExp { s: 1.0, cutoff, kappa },
            coupling_matrix: None,
            offsets: None,
        },
        lambda,
        time_grid: TimeGrid {
            start: 0.0,
            stop: 1.0,
            points: 2,
            spacing: Spacing::Linear,
        },
        options: Options::default(),
        oracle: None,
        initial_state: None,
    }
}

/// Decay rate λ²γ(ω₀) of the preset qubits, with γ = J(N + 1).
fn decay_rate(lambda: f64, beta: f64, cutoff: f64, kappa: f64) -> f64 {
    lambda * lambda * kappa * (-1.0 / cutoff).exp() / (1.0 - (-beta).exp())
}

pub fn preset(name: &str) -> Option<Scenario> {
    match name {
        "qubit-ohmic" => {
            let mut s = qubit(name, 0.05, 1.0, 10.0, 1.0);
            let g = decay_rate(0.05, 1.0, 10.0, 1.0);
            s.time_grid = TimeGrid {
                start: 0.1,
                stop: 50.0 / g,
                points: 41,
                spacing: Spacing::Log,
            };
            s.oracle = Some(OracleSpec {
                modes: 5,
                n_max: 4,
                omega_max: Some(60.0),
                static_modes: Some(4),
            });
            s.metadata
                .notes
                .push("qubit ω₀ = 1, σx coupling, Ohmic bath with ω_c = 10ω₀".into());
            Some(s)
        }
        "atom" => {
            // ω ~ 1e15, γ ~ 1e9, ω_c ~ 1e19 rescaled to ω = 1.
            let (lambda, beta, cutoff, kappa) = (0.01, 25.0, 1e4, 1e-2);
            let mut s = qubit(name, lambda, beta, cutoff, kappa);
            let g = decay_rate(lambda, beta, cutoff, kappa);
            s.time_grid = TimeGrid {
                start: 1.0,
                stop: 50.0 / g,
                points: 41,
                spacing: Spacing::Log,
            };
            s.metadata = Metadata {
                reference_frequency: Some(1e15),
                magnitudes: BTreeMap::from([("omega".into(), 1e15), ("gamma".into(), 1e9), ("cutoff".into(), 1e19)]),
                notes: vec!["atom in the electromagnetic field; β chosen for room temperature".into()],
            };
            Some(s)
        }
        "superconducting-qubit" => {
            // ω ~ 5e9, γ ~ 1e4, ω_D ~ 1e13 rescaled to ω = 1.
            let (lambda, beta, cutoff, kappa) = (0.01, 2.0, 2e3, 2e-2);
            let mut s = qubit(name, lambda, beta, cutoff, kappa);
            let g = decay_rate(lambda, beta, cutoff, kappa);
            s.time_grid = TimeGrid {
                start: 1.0,
                stop: 50.0 / g,
                points: 41,
                spacing: Spacing::Log,
            };
            s.metadata = Metadata {
                reference_frequency: Some(5e9),
                magnitudes: BTreeMap::from([("omega".into(), 5e9), ("gamma".into(), 1e4), ("cutoff".into(), 1e13)]),
                notes: vec!["transmon-like qubit with a phonon bath; β chosen for ~20 mK".into()],
            };
            Some(s)
        }
        _ => None,
    }
}

/// Loads `preset:<name>` or a JSON file, resolving tabulated CSV paths.
pub fn load(source: &str) -> Result<(Scenario, Vec<u8>), CliError> {
    if let Some(name) = source.strip_prefix("preset:") {
        let s = preset(name).ok_or_else(|| {
            CliError::validation(
                "scenario",
                format!("unknown preset {name:?}; known: {}", PRESETS.join(", ")),
            )
        })?;
        let bytes = s.to_json().into_bytes();
        return Ok((s, bytes));
    }
    let path = Path::new(source);
    let bytes =
        std::fs::read(path).map_err(|e| CliError::validation("scenario", format!("cannot read {source}: {e}")))?;
    let text =
        std::str::from_utf8(&bytes).map_err(|_| CliError::validation("scenario", "scenario is not UTF-8".into()))?;
    let mut s = Scenario::from_json(text)?;
    s.resolve_files(path.parent().unwrap_or(Path::new(".")))?;
    Ok((s, bytes))
}
