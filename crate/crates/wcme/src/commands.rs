//! The four subcommands. Each returns a typed report and writes its files
//! atomically into the output directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use weakcoupling::cumulant::{
    bare_cumulant_superoperator, br_consistency, cumulant_map, davies_limit_order, evolve_cumulant, gamma_kernel,
    geometric_times, longtime_kernel_orders, second_correction, Time,
};
use weakcoupling::generators::{davies_generator, evolve_redfield, GeneratorOptions, OdeTolerance, Picture};
use weakcoupling::meanforce::{correction_discrepancy, mean_force};
use weakcoupling::operators::{
    c64, gibbs_state, hermitian_eigenvalues, is_cptp, matrix_exponential, trace_distance, Superoperator,
};
use weakcoupling::oracle::{exact_mean_force, exact_reduced_evolution, OracleModel, PropagationOptions, DENSE_LIMIT};
use weakcoupling::spectral::verify_eigenoperator;
use weakcoupling::stationary::{coherence_report, steady_state};
use weakcoupling::system::OpenSystem;
use weakcoupling::Matrix;

use crate::error::{CliError, Context};
use crate::scenario::{matrix_spec, Built, Equation, MatrixSpec, Scenario};

/// Tolerances of the property suite.
pub mod tolerance {
    pub const KMS: f64 = 1e-10;
    pub const PSD: f64 = 1e-9;
    pub const CHOI: f64 = 1e-9;
    pub const TRACE: f64 = 1e-10;
    pub const REDFIELD: f64 = 1e-6;
    pub const LONGTIME_ORDER: f64 = 1.8;
    pub const DAVIES_ORDER: f64 = 0.9;
    pub const EIGENOPERATOR: f64 = 1e-11;
    pub const STEADY_STATE: f64 = 1e-8;
    pub const DENSITY: f64 = 1e-9;
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Writes through a temporary file in `dir` and renames it into place.
pub fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
    use std::io::Write;
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    let path = dir.join(name);
    tmp.persist(&path).map_err(|e| CliError::Io(e.error))?;
    Ok(path)
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

fn rotate(h: &Matrix, t: f64, rho: &Matrix) -> Result<Matrix, CliError> {
    let u = matrix_exponential(&(h * c64(0.0, -t))).module("operators")?;
    Ok(&u * rho * u.adjoint())
}

fn short_rate(sys: &OpenSystem) -> f64 {
    let l2 = sys.lambda * sys.lambda;
    (0..sys.jumps.len())
        .map(|f| sys.gamma(f).iter().map(|z| z.norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
        * l2
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub scenario: String,
    pub scenario_sha256: String,
    pub lambda: f64,
}

fn provenance(s: &Scenario, bytes: &[u8]) -> Provenance {
    Provenance {
        scenario: s.name.clone(),
        scenario_sha256: sha256_hex(bytes),
        lambda: s.lambda,
    }
}

// ---------------------------------------------------------------- evolve

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvolveReport {
    pub provenance: Provenance,
    pub equation: Equation,
    pub picture: Picture,
    pub renormalized: bool,
    pub include_lamb_stark: bool,
    pub basis: String,
    pub schrodinger_method: Option<String>,
    pub points: usize,
    pub max_trace_defect: f64,
    pub min_eigenvalue: f64,
    pub min_choi_eigenvalue: Option<f64>,
    pub final_populations: Vec<f64>,
    pub final_distance_to_gibbs: f64,
    pub warnings: Vec<String>,
    pub csv: String,
}

struct Trajectory {
    states: Vec<Matrix>,
    min_choi: Option<f64>,
    method: Option<String>,
}

fn run_equation(b: &Built, equation: Equation, opts: &crate::scenario::Options) -> Result<Trajectory, CliError> {
    let sys = &b.system;
    let h = sys.hamiltonian.matrix();
    let schrodinger = opts.picture == Picture::Schrodinger;
    let rotate_all = |states: Vec<Matrix>| -> Result<Vec<Matrix>, CliError> {
        if !schrodinger {
            return Ok(states);
        }
        states.iter().zip(&b.times).map(|(r, &t)| rotate(h, t, r)).collect()
    };
    match equation {
        Equation::Cumulant if opts.renormalized => {
            let tr = evolve_cumulant(sys, &b.rho0, &b.times, opts.picture).module("cumulant")?;
            let min_choi = tr.iter().map(|p| p.cptp.min_choi_eig).fold(f64::INFINITY, f64::min);
            let method = schrodinger.then(|| "first-order BCH with rotated kernel".to_string());
            Ok(Trajectory {
                states: tr.into_iter().map(|p| p.rho).collect(),
                min_choi: Some(min_choi),
                method,
            })
        }
        Equation::Cumulant => {
            let mut states = Vec::with_capacity(b.times.len());
            let mut min_choi = f64::INFINITY;
            for &t in &b.times {
                let k =
                    bare_cumulant_superoperator(sys, &gamma_kernel(sys, t).module("cumulant")?).module("cumulant")?;
                let map = k.exp().module("operators")?;
                min_choi = min_choi.min(is_cptp(&map, tolerance::CHOI).min_choi_eig);
                states.push(map.apply(b.rho0.matrix()));
            }
            let method = schrodinger.then(|| "exact rotation of the interaction-picture state".to_string());
            Ok(Trajectory {
                states: rotate_all(states)?,
                min_choi: Some(min_choi),
                method,
            })
        }
        Equation::Redfield => {
            let states = evolve_redfield(sys, &b.rho0, &b.times, opts.renormalized, OdeTolerance::default())
                .module("generators")?;
            let method = schrodinger.then(|| "exact rotation of the interaction-picture state".to_string());
            Ok(Trajectory {
                states: rotate_all(states)?,
                min_choi: None,
                method,
            })
        }
        Equation::Davies => {
            let gopts = GeneratorOptions {
                include_lamb_stark: opts.include_lamb_stark,
                picture: opts.picture,
                renormalized: opts.renormalized,
            };
            let l = davies_generator(sys, &gopts).module("generators")?;
            let states = b
                .times
                .iter()
                .map(|&t| Ok(l.scaled(c64(t, 0.0)).exp().module("operators")?.apply(b.rho0.matrix())))
                .collect::<Result<Vec<_>, CliError>>()?;
            Ok(Trajectory {
                states,
                min_choi: None,
                method: None,
            })
        }
    }
}

pub fn evolve(s: &Scenario, bytes: &[u8], equation: Equation, out: &Path) -> Result<EvolveReport, CliError> {
    let b = s.build()?;
    let tr = run_equation(&b, equation, &s.options)?;
    let d = b.h_ren.dim();
    let gibbs = gibbs_state(&b.h_ren, b.bath.beta).module("operators")?;

    let mut header = vec!["t".to_string()];
    for r in 0..d {
        for c in 0..d {
            header.push(format!("re_rho_{r}_{c}"));
            header.push(format!("im_rho_{r}_{c}"));
        }
    }
    header.extend((0..d).map(|k| format!("population_{k}")));
    header.extend(["coherence", "trace_defect", "min_eigenvalue"].map(String::from));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)
        .map_err(|e| CliError::numerical("cli", e.to_string()))?;

    let mut warnings = Vec::new();
    let (mut max_defect, mut min_eig) = (0.0f64, f64::INFINITY);
    let mut last = None;
    for (&t, rho) in b.times.iter().zip(&tr.states) {
        let rep = coherence_report(rho, &b.h_ren);
        let defect = (rho.trace() - c64(1.0, 0.0)).norm();
        let herm = (rho + rho.adjoint()).scale(0.5);
        let me = hermitian_eigenvalues(&herm)[0];
        max_defect = max_defect.max(defect);
        min_eig = min_eig.min(me);
        let mut row = vec![t.to_string()];
        for r in 0..d {
            for c in 0..d {
                row.push(rho[(r, c)].re.to_string());
                row.push(rho[(r, c)].im.to_string());
            }
        }
        row.extend(rep.populations.iter().map(|p| p.to_string()));
        row.extend([rep.coherence.to_string(), defect.to_string(), me.to_string()]);
        w.write_record(&row)
            .map_err(|e| CliError::numerical("cli", e.to_string()))?;
        last = Some((rho.clone(), rep.populations));
    }
    if max_defect > tolerance::DENSITY || min_eig < -tolerance::DENSITY {
        let msg =
            format!("trajectory leaves the state space: trace defect {max_defect:.2e}, min eigenvalue {min_eig:.2e}");
        if equation == Equation::Redfield {
            warnings.push(format!("{msg} (Redfield is not completely positive)"));
        } else {
            return Err(CliError::numerical(
                if equation == Equation::Cumulant {
                    "cumulant"
                } else {
                    "generators"
                },
                msg,
            ));
        }
    }
    let csv_bytes = w.into_inner().map_err(|e| CliError::numerical("cli", e.to_string()))?;
    let stem = format!("{}_{}", s.name, equation.name());
    let csv_path = write_atomic(out, &format!("{stem}.csv"), &csv_bytes)?;
    let (final_rho, final_pop) = last.unwrap_or((b.rho0.matrix().clone(), vec![]));
    let report = EvolveReport {
        provenance: provenance(s, bytes),
        equation,
        picture: s.options.picture,
        renormalized: s.options.renormalized,
        include_lamb_stark: s.options.include_lamb_stark,
        basis: "eigenbasis of H_S(1) = H_S(0) + lambda sum <R_i> S_i, ascending energy".into(),
        schrodinger_method: tr.method,
        points: b.times.len(),
        max_trace_defect: max_defect,
        min_eigenvalue: min_eig,
        min_choi_eigenvalue: tr.min_choi,
        final_populations: final_pop,
        final_distance_to_gibbs: trace_distance(&final_rho, gibbs.matrix()),
        warnings,
        csv: csv_path.display().to_string(),
    };
    write_atomic(out, &format!("{stem}.json"), &to_json(&report))?;
    Ok(report)
}

// ------------------------------------------------------------- meanforce

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleStatics {
    pub modes: usize,
    pub n_max: usize,
    pub dimension: usize,
    /// Gibbs(H_mf2) built on the oracle's own modes.
    pub distance_mean_force: f64,
    /// Gibbs(H_mf2) built on the continuous bath.
    pub distance_mean_force_continuum: f64,
    pub distance_bare: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeanForceReport {
    pub provenance: Provenance,
    pub h_mf_c1: MatrixSpec,
    /// Without the λ² factor.
    pub h_mf_c2: MatrixSpec,
    pub h_mf: MatrixSpec,
    pub gibbs: MatrixSpec,
    pub commutator_norm: f64,
    pub discrepancy_closed_form: MatrixSpec,
    pub discrepancy_direct: MatrixSpec,
    pub distance_gibbs_bare: f64,
    pub oracle: Option<OracleStatics>,
}

fn bare_system(b: &Built, lambda: f64) -> Result<OpenSystem, CliError> {
    OpenSystem::new(
        b.h0.clone(),
        b.couplings.clone(),
        b.bath.clone(),
        lambda,
        b.system.eig.tolerance(),
    )
    .module("spectral")
}

fn single_coupling(s: &Scenario) -> Result<(), CliError> {
    if s.couplings.len() != 1 {
        return Err(CliError::validation(
            "oracle",
            "the oracle supports a single coupling operator".into(),
        ));
    }
    Ok(())
}

pub fn meanforce(s: &Scenario, bytes: &[u8], out: &Path) -> Result<MeanForceReport, CliError> {
    let b = s.build()?;
    let sys0 = bare_system(&b, s.lambda)?;
    let mf = mean_force(&sys0).module("meanforce")?;
    let disc = correction_discrepancy(&b.system).module("meanforce")?;
    let bare_gibbs = gibbs_state(&b.h0, b.bath.beta).module("operators")?;
    let oracle = match s.oracle {
        None => None,
        Some(spec) => {
            single_coupling(s)?;
            let per_mode = spec.n_max + 1;
            let modes = match spec.static_modes {
                Some(m) => m,
                None => (1..=spec.modes)
                    .rev()
                    .find(|&m| b.h0.dim() * per_mode.pow(m as u32) <= DENSE_LIMIT)
                    .unwrap_or(1),
            };
            let mut tb = s.oracle_bath_with(modes, &spec)?;
            tb.offset = b.bath.offsets[0];
            let model =
                OracleModel::new(b.h0.clone(), b.couplings[0].clone(), tb.clone(), s.lambda).module("oracle")?;
            let exact = exact_mean_force(&model, b.bath.beta).module("oracle")?;
            let bd = s.build_discrete(&tb)?;
            let matched = mean_force(&bare_system(&bd, s.lambda)?).module("meanforce")?;
            Some(OracleStatics {
                modes,
                n_max: spec.n_max,
                dimension: model.dim(),
                distance_mean_force: exact.trace_distance(&matched.gibbs),
                distance_mean_force_continuum: exact.trace_distance(&mf.gibbs),
                distance_bare: exact.trace_distance(&bare_gibbs),
            })
        }
    };
    let report = MeanForceReport {
        provenance: provenance(s, bytes),
        h_mf_c1: matrix_spec(mf.h_c1.matrix()),
        h_mf_c2: matrix_spec(mf.h_c2.matrix()),
        h_mf: matrix_spec(mf.h_mf.matrix()),
        gibbs: matrix_spec(mf.gibbs.matrix()),
        commutator_norm: mf.commutator_norm,
        discrepancy_closed_form: matrix_spec(disc.closed_form.matrix()),
        discrepancy_direct: matrix_spec(disc.direct.matrix()),
        distance_gibbs_bare: mf.gibbs.trace_distance(&bare_gibbs),
        oracle,
    };
    write_atomic(out, &format!("{}_meanforce.json", s.name), &to_json(&report))?;
    Ok(report)
}

// ---------------------------------------------------------------- verify

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// "max" when value ≤ threshold passes, "min" when value ≥ threshold.
    pub kind: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            kind: "max".into(),
            passed: value <= threshold,
            detail,
        }
    }

    fn at_least(name: &str, value: f64, threshold: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            kind: "min".into(),
            passed: value >= threshold,
            detail,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyReport {
    pub provenance: Provenance,
    pub checks: Vec<Check>,
    pub passed: bool,
}

fn sample(times: &[f64], n: usize) -> Vec<f64> {
    let pos: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0).collect();
    if pos.len() <= n {
        return pos;
    }
    (0..n).map(|k| pos[k * (pos.len() - 1) / (n - 1)]).collect()
}

fn dissipation_free(sys: &OpenSystem) -> bool {
    (0..sys.jumps.len()).all(|f| sys.gamma(f).iter().all(|z| z.norm() == 0.0)) && !sys.bath.spectral.is_discrete()
}

pub fn property_checks(s: &Scenario) -> Result<Vec<Check>, CliError> {
    let b = s.build()?;
    let sys = &b.system;
    let beta = sys.bath.beta;
    let wmax = sys.jumps.frequencies.iter().cloned().fold(0.0, f64::max);
    let top = if wmax > 0.0 { 2.0 * wmax } else { 2.0 / beta };
    let omegas: Vec<f64> = (1..=20).map(|k| top * k as f64 / 20.0).collect();
    let mut checks = vec![Check::at_most(
        "kms-rates",
        sys.bath.kms_defect(&omegas),
        tolerance::KMS,
        format!("|gamma(-w) - exp(-beta w) gamma(w)| / |gamma(w)| on 20 points in (0, {top:.3}]"),
    )];

    let grid = sample(&b.times, 12);
    let mut psd = f64::INFINITY;
    let (mut choi, mut defect) = (f64::INFINITY, 0.0f64);
    for &t in &grid {
        psd = psd.min(gamma_kernel(sys, t).module("cumulant")?.psd_ratio());
        let (_, rep) = cumulant_map(sys, t).module("cumulant")?;
        choi = choi.min(rep.min_choi_eig);
        defect = defect.max(rep.trace_defect);
    }
    if grid.is_empty() {
        psd = 0.0;
        choi = 0.0;
    }
    checks.push(Check::at_least(
        "kernel-psd",
        psd,
        -tolerance::PSD,
        format!("min/max eigenvalue of gamma(w,w',t) at {} grid times", grid.len()),
    ));
    checks.push(Check::at_least(
        "cptp-choi",
        choi,
        -tolerance::CHOI,
        "min Choi eigenvalue of exp K(t)".into(),
    ));
    checks.push(Check::at_most(
        "cptp-trace",
        defect,
        tolerance::TRACE,
        "trace defect of exp K(t)".into(),
    ));

    let h = 1e-4 / if wmax > 0.0 { wmax } else { 1.0 };
    let interior: Vec<f64> = sample(&b.times, 12).into_iter().filter(|&t| t > h).collect();
    let interior: Vec<f64> = if interior.len() > 10 {
        interior[1..11].to_vec()
    } else {
        interior
    };
    let mut br: f64 = 0.0;
    for &t in &interior {
        br = br.max(br_consistency(sys, t, h).module("cumulant")?);
    }
    checks.push(Check::at_most(
        "redfield-consistency",
        br,
        tolerance::REDFIELD,
        format!(
            "|dK/dt - L_BR| / |L_BR| at {} times, central difference h = {h:.1e}",
            interior.len()
        ),
    ));

    let scale = sys.bath.spectral.scale();
    let lt_times = geometric_times(20.0 / scale, 200.0 / scale, 6);
    let orders = longtime_kernel_orders(sys, &lt_times).module("cumulant")?;
    let worst = orders.iter().map(|o| o.2.order).fold(f64::INFINITY, f64::min);
    checks.push(Check::at_least(
        "longtime-kernel",
        if orders.is_empty() { f64::INFINITY } else { worst },
        tolerance::LONGTIME_ORDER,
        format!(
            "min fitted decay order of |gamma - gamma_long| over {} entries, t in [20, 200]/cutoff",
            orders.len()
        ),
    ));
    let dl = davies_limit_order(sys, &lt_times).module("cumulant")?;
    let dl_order = if dl.envelope.iter().all(|&e| e <= 1e-14) {
        f64::INFINITY
    } else {
        dl.order
    };
    checks.push(Check::at_least(
        "davies-limit",
        dl_order,
        tolerance::DAVIES_ORDER,
        "fitted decay order of |K(t)/t - L_Davies|".into(),
    ));

    let res = verify_eigenoperator(&sys.eig, &sys.jumps, &b.couplings);
    let hn = sys.hamiltonian.norm().max(1e-300);
    checks.push(Check::at_most(
        "eigenoperators",
        res.max() / hn,
        tolerance::EIGENOPERATOR,
        "max of first-kind, second-kind, completeness and conjugation residuals / |H|".into(),
    ));

    let gibbs = gibbs_state(&b.h_ren, beta).module("operators")?;
    let dist = if dissipation_free(sys) {
        0.0
    } else {
        let l = davies_generator(sys, &GeneratorOptions::default()).module("generators")?;
        let ss = steady_state(&l).module("stationary")?;
        match ss.state {
            Some(rho) => rho.trace_distance(&gibbs),
            None => f64::INFINITY,
        }
    };
    checks.push(Check::at_most(
        "davies-steady-state",
        dist,
        tolerance::STEADY_STATE,
        "trace distance of the renormalized Davies steady state to Gibbs(H_S(1))".into(),
    ));
    Ok(checks)
}

pub fn verify(s: &Scenario, bytes: &[u8], out: &Path) -> Result<VerifyReport, CliError> {
    let checks = property_checks(s)?;
    let passed = checks.iter().all(|c| c.passed);
    let report = VerifyReport {
        provenance: provenance(s, bytes),
        checks,
        passed,
    };
    write_atomic(out, &format!("{}_verify.json", s.name), &to_json(&report))?;
    Ok(report)
}

// --------------------------------------------------------------- compare

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErrorRow {
    pub lambda: f64,
    pub t: f64,
    pub cumulant: f64,
    pub redfield: f64,
    pub davies: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LambdaSummary {
    pub lambda: f64,
    pub max_cumulant: f64,
    pub max_redfield: f64,
    pub max_davies: f64,
    pub oracle_edge_population: f64,
    pub oracle_dropped_weight: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompareReport {
    pub provenance: Provenance,
    pub horizon: f64,
    pub recurrence_time: f64,
    pub modes: usize,
    pub n_max: usize,
    pub summaries: Vec<LambdaSummary>,
    /// max error at λ divided by max error at λ/2.
    pub ratio_cumulant: f64,
    pub ratio_redfield: f64,
    pub ratio_davies: f64,
    /// Short-time ordering cumulant ≤ Redfield (within 10%) ≤ Davies at λ.
    pub ordering_holds: bool,
    pub warnings: Vec<String>,
    pub csv: String,
}

/// Errors of the three equations against the oracle at one λ.
pub fn compare_at(s: &Scenario, times: &[f64]) -> Result<(Vec<ErrorRow>, LambdaSummary, Vec<String>), CliError> {
    single_coupling(s)?;
    let spec = s
        .oracle
        .ok_or_else(|| CliError::validation("cli", "compare needs an oracle block".into()))?;
    let mut tb = s.oracle_bath_with(spec.modes, &spec)?;
    let b = s.build_discrete(&tb)?;
    tb.offset = b.bath.offsets[0];
    let sys = &b.system;
    let lambda = s.lambda;
    let model = OracleModel::new(b.h0.clone(), b.couplings[0].clone(), tb, lambda).module("oracle")?;
    let renormalized = s.options.renormalized;
    let drive = |t: f64| -> weakcoupling::Result<Matrix> {
        Ok(second_correction(sys, Time::At(t))?.matrix() * c64(-lambda * lambda, 0.0))
    };
    let oracle = exact_reduced_evolution(
        &model,
        &b.rho0,
        b.bath.beta,
        times,
        if renormalized { Some(&drive) } else { None },
        &PropagationOptions::default(),
    )
    .module("oracle")?;

    let cum: Vec<Matrix> = if renormalized {
        evolve_cumulant(sys, &b.rho0, times, Picture::Interaction)
            .module("cumulant")?
            .into_iter()
            .map(|p| p.rho)
            .collect()
    } else {
        times
            .iter()
            .map(|&t| {
                let k =
                    bare_cumulant_superoperator(sys, &gamma_kernel(sys, t).module("cumulant")?).module("cumulant")?;
                Ok(k.exp().module("operators")?.apply(b.rho0.matrix()))
            })
            .collect::<Result<_, CliError>>()?
    };
    let red = evolve_redfield(sys, &b.rho0, times, renormalized, OdeTolerance::default()).module("generators")?;
    let gopts = GeneratorOptions {
        include_lamb_stark: s.options.include_lamb_stark,
        picture: Picture::Interaction,
        renormalized,
    };
    let ld: Superoperator = davies_generator(sys, &gopts).module("generators")?;
    let h = sys.hamiltonian.matrix();
    let mut rows = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let exact = rotate(h, -t, &oracle.states[k])?;
        let dav = ld.scaled(c64(t, 0.0)).exp().module("operators")?.apply(b.rho0.matrix());
        rows.push(ErrorRow {
            lambda,
            t,
            cumulant: trace_distance(&exact, &cum[k]),
            redfield: trace_distance(&exact, &red[k]),
            davies: trace_distance(&exact, &dav),
        });
    }
    let mx = |f: fn(&ErrorRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let summary = LambdaSummary {
        lambda,
        max_cumulant: mx(|r| r.cumulant),
        max_redfield: mx(|r| r.redfield),
        max_davies: mx(|r| r.davies),
        oracle_edge_population: oracle.edge_population,
        oracle_dropped_weight: oracle.dropped_weight,
    };
    Ok((rows, summary, oracle.warnings))
}

/// Oracle comparison times: the scenario grid clipped to 0.6 recurrence
/// times, or ten points up to that horizon when fewer than two remain.
pub fn compare_times(s: &Scenario) -> Result<(Vec<f64>, f64, f64), CliError> {
    let spec = s
        .oracle
        .ok_or_else(|| CliError::validation("cli", "compare needs an oracle block".into()))?;
    let tb = s.oracle_bath_with(spec.modes, &spec)?;
    let rec = tb.recurrence_time();
    let horizon = 0.6 * rec;
    let grid: Vec<f64> = s
        .time_grid
        .times()?
        .into_iter()
        .filter(|&t| t > 0.0 && t <= horizon)
        .collect();
    let times = if grid.len() >= 2 {
        grid
    } else {
        (1..=10).map(|k| horizon * k as f64 / 10.0).collect()
    };
    Ok((times, horizon, rec))
}

pub fn compare(s: &Scenario, bytes: &[u8], out: &Path) -> Result<CompareReport, CliError> {
    let spec = s
        .oracle
        .ok_or_else(|| CliError::validation("cli", "compare needs an oracle block".into()))?;
    s.build()?;
    let (times, horizon, rec) = compare_times(s)?;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut warnings = Vec::new();
    for lambda in [s.lambda, s.lambda / 2.0] {
        let (r, sm, w) = compare_at(&s.with_lambda(lambda), &times)?;
        rows.extend(r);
        summaries.push(sm);
        warnings.extend(w);
    }
    let ratio = |f: fn(&LambdaSummary) -> f64| {
        let (a, b) = (f(&summaries[0]), f(&summaries[1]));
        if b > 0.0 {
            a / b
        } else {
            f64::INFINITY
        }
    };
    let b = s.build()?;
    let rate = short_rate(&b.system);
    let ordering_holds = rows
        .iter()
        .filter(|r| r.lambda == s.lambda && (rate == 0.0 || r.t < 1.0 / rate))
        .all(|r| r.cumulant <= 1.1 * r.redfield && r.redfield <= r.davies);
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| CliError::numerical("cli", e.to_string()))?;
    }
    let csv_bytes = w.into_inner().map_err(|e| CliError::numerical("cli", e.to_string()))?;
    let csv_path = write_atomic(out, &format!("{}_compare.csv", s.name), &csv_bytes)?;
    let report = CompareReport {
        provenance: provenance(s, bytes),
        horizon,
        recurrence_time: rec,
        modes: spec.modes,
        n_max: spec.n_max,
        ratio_cumulant: ratio(|x| x.max_cumulant),
        ratio_redfield: ratio(|x| x.max_redfield),
        ratio_davies: ratio(|x| x.max_davies),
        summaries,
        ordering_holds,
        warnings,
        csv: csv_path.display().to_string(),
    };
    write_atomic(out, &format!("{}_compare.json", s.name), &to_json(&report))?;
    Ok(report)
}
