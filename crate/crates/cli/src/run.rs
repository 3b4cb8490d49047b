//! Mode dispatch and artifact writing.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use linfel_core::diagnostics::boundary_corrector;
use linfel_core::functional::{duality_identity_residual, extract_multipliers, normalization_residual};
use linfel_core::solver::solve_adjoint_kernel;
use linfel_core::{
    build_certificate, oracle_1d, BoundaryData, BoundaryPreset, CertificateReport, ContinuationState, EnergyParams,
    Grid, LevelResiduals, Mode, ProblemSpec, ScalarField,
};

use crate::config::{RunConfig, RunMode};
use crate::error::{exit, CliError};
use crate::report::{
    ContinuationSummary, CorrectorSummary, GridSummary, OracleSection, Provenance, Report, Status, HISTORY_FILE,
    REPORT_FILE,
};
use crate::table::{read_field, write_field, write_history};

/// A finished run: the report and the process exit code it implies.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub exit_code: i32,
    pub out_dir: PathBuf,
}

/// Numeric results of a mode before they are packaged.
struct Products {
    e_infty: f64,
    converged: bool,
    untrusted: Vec<f64>,
    anchor_stage: Option<ContinuationSummary>,
    continuation: Option<ContinuationSummary>,
    anchor_distance: Option<f64>,
    certificate: Option<CertificateReport>,
    oracle: Option<OracleSection>,
    corrector: Option<CorrectorSummary>,
    fields: Vec<(&'static str, ScalarField)>,
}

impl Products {
    fn new(e_infty: f64) -> Self {
        Self {
            e_infty,
            converged: true,
            untrusted: Vec::new(),
            anchor_stage: None,
            continuation: None,
            anchor_distance: None,
            certificate: None,
            oracle: None,
            corrector: None,
            fields: Vec::new(),
        }
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn build_grid(config: &RunConfig) -> Result<Arc<Grid>, CliError> {
    Grid::new(&config.grid.extent, &config.grid.nodes)
        .map(Arc::new)
        .map_err(|e| CliError::Config {
            field: "grid".into(),
            message: e.to_string(),
        })
}

pub fn build_spec(config: &RunConfig, grid: &Arc<Grid>) -> Result<ProblemSpec, CliError> {
    let p = &config.problem;
    let boundary = match (&p.boundary, &p.boundary_table) {
        (Some(preset), None) => BoundaryData::from_preset(grid.clone(), preset),
        (None, Some(path)) => Ok(BoundaryData::from_field(read_field(path, grid)?)),
        _ => unreachable!("validated configuration has exactly one boundary source"),
    }
    .map_err(|e| CliError::Config {
        field: "problem.boundary".into(),
        message: e.to_string(),
    })?;
    ProblemSpec::new(p.coefficient.clone(), p.reaction.clone(), boundary).map_err(|e| CliError::Config {
        field: "problem".into(),
        message: e.to_string(),
    })
}

fn certificate_for(
    spec: &ProblemSpec,
    state: &ContinuationState,
    config: &RunConfig,
) -> Result<(ScalarField, CertificateReport), CliError> {
    let (f, e, level) = match &state.kernel {
        Some(k) => (k.f.clone(), 0.0, None),
        None => {
            let last = state.history.last().expect("continuation records at least one level");
            let level = LevelResiduals {
                p: last.p,
                normalization: last.normalization_residual,
                duality: last.duality_residual,
            };
            (state.multipliers.f_p.clone(), state.multipliers.e_p, Some(level))
        }
    };
    let cert = build_certificate(spec, &state.u, &f, e, level, &config.certificate, config.seed)?;
    Ok((f, cert))
}

/// Energies must not drop along the schedule beyond the inner tolerance.
fn check_monotone(state: &ContinuationState, config: &RunConfig) -> Result<(), CliError> {
    let top = state.history.iter().map(|r| r.energy.abs()).fold(1.0, f64::max);
    let allowed = 10.0 * config.solver.inner.gradient_tol * top;
    let defect = state.monotonicity_defect();
    if !(defect <= allowed) {
        return Err(CliError::Invariant(format!(
            "recorded energies decrease by {defect:e} (allowed {allowed:e})"
        )));
    }
    if !state.e_infty_estimate().is_finite() {
        return Err(CliError::Invariant("non-finite e_infty estimate".into()));
    }
    Ok(())
}

fn untrusted(state: &ContinuationState) -> Vec<f64> {
    state.history.iter().filter(|r| !r.converged).map(|r| r.p).collect()
}

fn state_converged(state: &ContinuationState) -> bool {
    state.converged() && state.kernel.as_ref().map_or(true, |k| k.converged)
}

fn solve(config: &RunConfig, spec: &ProblemSpec) -> Result<Products, CliError> {
    let state = linfel_core::run_continuation(spec, &Mode::Construct, &config.solver.continuation())?;
    check_monotone(&state, config)?;
    let (f, cert) = certificate_for(spec, &state, config)?;
    let mut out = Products::new(state.e_infty_estimate());
    out.converged = state_converged(&state);
    out.untrusted = untrusted(&state);
    out.fields = vec![("u", state.u.clone()), ("s", spec.eval_s(&state.u)?), ("f", f)];
    out.continuation = Some(ContinuationSummary::new(&state));
    out.certificate = Some(cert);
    Ok(out)
}

fn certify(config: &RunConfig, spec: &ProblemSpec) -> Result<Products, CliError> {
    let options = config.solver.continuation();
    let (anchor, stage) = match &config.solver.anchor_table {
        Some(path) => (read_field(path, spec.grid())?, None),
        None => {
            let state = linfel_core::run_continuation(spec, &Mode::Construct, &options)?;
            check_monotone(&state, config)?;
            (state.u.clone(), Some(state))
        }
    };
    let mode = Mode::Certify {
        anchor: anchor.clone(),
        sigma: config.solver.sigma,
    };
    let state = linfel_core::run_continuation(spec, &mode, &options)?;
    check_monotone(&state, config)?;
    let (f, cert) = certificate_for(spec, &state, config)?;
    let mut out = Products::new(state.e_infty_estimate());
    out.converged = state_converged(&state) && stage.as_ref().map_or(true, state_converged);
    out.untrusted = untrusted(&state);
    let distance = state
        .u
        .values()
        .iter()
        .zip(spec.boundary().clamped(&anchor)?.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    out.anchor_distance = Some(distance);
    out.fields = vec![
        ("u", state.u.clone()),
        ("s", spec.eval_s(&state.u)?),
        ("f", f),
        ("phi", state.multipliers.phi_p.clone()),
        ("anchor", anchor),
    ];
    out.anchor_stage = stage.as_ref().map(ContinuationSummary::new);
    out.continuation = Some(ContinuationSummary::new(&state));
    out.certificate = Some(cert);
    Ok(out)
}

fn diagnose(config: &RunConfig, spec: &ProblemSpec) -> Result<Products, CliError> {
    let grid = spec.grid();
    let u = match &config.diagnose.field {
        Some(path) => spec.boundary().clamped(&read_field(path, grid)?)?,
        None => spec.boundary().u0().clone(),
    };
    let p = config.solver.p_max;
    let m = extract_multipliers(spec, &u, &EnergyParams::plain(p, grid.dim()))?;
    let (f, e, level) = if m.degenerate {
        (solve_adjoint_kernel(spec, &u)?.f, 0.0, None)
    } else {
        let level = LevelResiduals {
            p,
            normalization: normalization_residual(grid, &m, p),
            duality: duality_identity_residual(spec, &u, &m)?.relative,
        };
        (m.f_p.clone(), m.e_p, Some(level))
    };
    let cert = build_certificate(spec, &u, &f, e, level, &config.certificate, config.seed)?;
    let target = config.diagnose.corrector_target;
    let corrector = boundary_corrector(spec, &ScalarField::constant(grid.clone(), target), &u)?;
    let mut out = Products::new(e);
    out.fields = vec![("u", u.clone()), ("s", spec.eval_s(&u)?), ("f", f), ("corrector", corrector.v)];
    out.corrector = Some(CorrectorSummary {
        target,
        floor_nodes: corrector.floor_nodes,
        collars: corrector.collars,
    });
    out.certificate = Some(cert);
    Ok(out)
}

fn oracle(config: &RunConfig, grid: &Arc<Grid>) -> Result<Products, CliError> {
    let o = config.oracle.as_ref().expect("validated oracle configuration");
    let sol = oracle_1d(o.a, o.b)?;
    let boundary = BoundaryData::from_preset(grid.clone(), &BoundaryPreset::Oracle { a: o.a, b: o.b })?;
    let spec = ProblemSpec::new(Default::default(), Default::default(), boundary)?;
    let u = spec.boundary().u0().clone();
    let f = ScalarField::from_fn(grid.clone(), |x| sol.f(x[0]))?;
    let cert = build_certificate(&spec, &u, &f, sol.e_infty, None, &config.certificate, config.seed)?;
    let brute = o.brute_force.then(|| sol.cross_check(o.brute_nodes, o.brute_starts, config.seed));
    let mut out = Products::new(sol.e_infty);
    out.fields = vec![("u", u.clone()), ("s", spec.eval_s(&u)?), ("f", f)];
    out.oracle = Some(OracleSection::new(&sol, brute));
    out.certificate = Some(cert);
    Ok(out)
}

fn grid_summary(config: &RunConfig) -> GridSummary {
    let spacing = config
        .grid
        .extent
        .iter()
        .zip(&config.grid.nodes)
        .map(|(l, n)| l / (*n as f64 - 1.0))
        .collect();
    GridSummary {
        extent: config.grid.extent.clone(),
        nodes: config.grid.nodes.clone(),
        spacing,
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Runs `mode` on a validated configuration and writes the artifact to
/// `out_dir`. Solver failures after validation still leave a report.
pub fn run(config: &RunConfig, mode: RunMode, out_dir: &Path) -> Result<Outcome, CliError> {
    if let Some(m) = config.mode {
        if m != mode {
            return Err(CliError::Config {
                field: "mode".into(),
                message: format!("config is for {} but the {} subcommand was used", m.name(), mode.name()),
            });
        }
    }
    let mut config = config.clone();
    config.mode = Some(mode);
    config.validate()?;
    let grid = build_grid(&config)?;
    let spec = match mode {
        RunMode::Oracle1d => None,
        _ => Some(build_spec(&config, &grid)?),
    };
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let started = now();

    let result = match (mode, &spec) {
        (RunMode::Solve, Some(s)) => solve(&config, s),
        (RunMode::Certify, Some(s)) => certify(&config, s),
        (RunMode::Diagnose, Some(s)) => diagnose(&config, s),
        _ => oracle(&config, &grid),
    };
    let provenance = |finished| Provenance {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: config.seed,
        started,
        finished,
    };
    let products = match result {
        Ok(p) => p,
        Err(err @ (CliError::Core(_) | CliError::Invariant(_))) => {
            let report = Report {
                mode,
                status: Status {
                    exit_code: exit::INTERNAL,
                    converged: false,
                    untrusted_levels: Vec::new(),
                    message: err.to_string(),
                },
                e_infty_estimate: f64::NAN,
                verdict: false,
                grid: grid_summary(&config),
                anchor_stage: None,
                continuation: None,
                anchor_distance: None,
                certificate: None,
                oracle: None,
                corrector: None,
                tables: Vec::new(),
                config: config.clone(),
                provenance: provenance(now()),
            };
            write_text(&out_dir.join(REPORT_FILE), &report.to_yaml())?;
            return Err(err);
        }
        Err(err) => return Err(err),
    };

    let mut tables = Vec::new();
    for (name, field) in &products.fields {
        let file = format!("{name}.csv");
        write_field(&out_dir.join(&file), field)?;
        tables.push(file);
    }
    let history = products.continuation.as_ref().map_or(&[][..], |c| &c.history[..]);
    write_history(&out_dir.join(HISTORY_FILE), history)?;
    tables.push(HISTORY_FILE.into());

    let exit_code = if products.converged { exit::OK } else { exit::NOT_CONVERGED };
    let message = if products.converged {
        "ok".to_string()
    } else {
        format!("inner solves did not converge at p = {:?}", products.untrusted)
    };
    let report = Report {
        mode,
        status: Status {
            exit_code,
            converged: products.converged,
            untrusted_levels: products.untrusted,
            message,
        },
        e_infty_estimate: products.e_infty,
        verdict: products.certificate.as_ref().is_some_and(|c| c.pass),
        grid: grid_summary(&config),
        anchor_stage: products.anchor_stage,
        continuation: products.continuation,
        anchor_distance: products.anchor_distance,
        certificate: products.certificate,
        oracle: products.oracle,
        corrector: products.corrector,
        tables,
        config: config.clone(),
        provenance: provenance(now()),
    };
    write_text(&out_dir.join(REPORT_FILE), &report.to_yaml())?;
    Ok(Outcome {
        report,
        exit_code,
        out_dir: out_dir.to_path_buf(),
    })
}
