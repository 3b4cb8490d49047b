//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use linfel_cli::config::RunMode;
use linfel_cli::{run, Comparison, Report, RunConfig};
use linfel_core::diagnostics::{almost_minimiser_mc, energy_identities, Bump, BumpShape};
use linfel_core::functional::{energy_p, gradient_energy};
use linfel_core::{
    build_certificate, check_el_system, oracle_1d, run_continuation, BoundaryData, BoundaryPreset, CertificateOptions,
    CoefficientModel, ContinuationOptions, EnergyParams, Grid, McOptions, Mode, ProblemSpec, Reaction, ScalarField,
    ScalarReaction,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

type Outcome = Result<String, String>;

const SCENARIOS: [&str; 7] = [
    "oracle-symmetric",
    "oracle-skew",
    "cubic-1d",
    "zero-data",
    "laplace-2d",
    "aniso-cubic-2d",
    "radial-gradient-2d",
];

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"))
}

fn linfel(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_linfel")).args(args).output().expect("binary runs")
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_spec(n: usize, a: f64, b: f64) -> ProblemSpec {
    let grid = Arc::new(Grid::interval(1.0, n).unwrap());
    let boundary = BoundaryData::from_preset(grid, &BoundaryPreset::Oracle { a, b }).unwrap();
    ProblemSpec::new(CoefficientModel::Identity, Reaction::Zero, boundary).unwrap()
}

fn oracle_multiplier(spec: &ProblemSpec, a: f64, b: f64) -> ScalarField {
    let sol = oracle_1d(a, b).unwrap();
    ScalarField::from_fn(spec.grid().clone(), |x| sol.f(x[0])).unwrap()
}

fn read_column(path: &Path) -> (Vec<f64>, Vec<f64>) {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',').map(|v| v.parse::<f64>().unwrap());
            (it.next().unwrap(), it.last().unwrap())
        })
        .unzip()
}

fn oracle_reproduction() -> Outcome {
    let tmp = TempDir::new().unwrap();
    let start = Instant::now();
    let out = linfel(&["solve", "--config", scenario("oracle-symmetric").to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    let seconds = start.elapsed().as_secs_f64();
    if out.status.code() != Some(0) {
        return Err(format!("solve exited with {:?}", out.status.code()));
    }
    let r = Report::load(&tmp.path().join("report.yaml")).unwrap();
    let e = r.e_infty_estimate;
    let (x, f) = read_column(&tmp.path().join("f.csv"));
    let h = x[1] - x[0];
    // measured nodes only; the clamped ends carry f = 0
    let crossing = (1..f.len() - 2)
        .find(|&i| f[i] * f[i + 1] <= 0.0 && (f[i] != 0.0 || f[i + 1] != 0.0))
        .map(|i| x[i] + h * f[i] / (f[i] - f[i + 1]));
    let Some(crossing) = crossing else {
        return Err("f has no sign change".into());
    };
    let ok = (e - 4.0).abs() <= 0.05 * 4.0 && (crossing - 0.5).abs() <= 2.0 * h && seconds <= 60.0;
    verdict(
        ok,
        format!(
            "e = {e:.4} ({:.2}% off 4), zero crossing {crossing:.5} ({:.2} cells from 0.5), {seconds:.1} s",
            100.0 * (e - 4.0).abs() / 4.0,
            (crossing - 0.5).abs() / h
        ),
    )
}

fn el_certificate() -> Outcome {
    let n = 513;
    let spec = oracle_spec(n, 1.0, 0.0);
    let f = oracle_multiplier(&spec, 1.0, 0.0);
    let u = spec.boundary().u0().clone();
    let c = check_el_system(&spec, &u, &f, 4.0).unwrap();
    let h = spec.grid().h_min();
    let ok = c.el1 <= 1e-12 && c.flatness <= 1e-12 && c.el2 <= 10.0 * h * h && c.sign_violations == 0 && !c.degenerate;
    verdict(
        ok,
        format!(
            "EL1 {:.1e}, flatness {:.1e}, EL2 {:.1e} (limit {:.1e}), {} sign violations",
            c.el1,
            c.flatness,
            c.el2,
            10.0 * h * h,
            c.sign_violations
        ),
    )
}

/// Every bundled scenario in both modes, with the Monte-Carlo section off.
fn scenario_runs() -> Vec<(String, Result<Report, String>)> {
    let tmp = TempDir::new().unwrap();
    let mut out = Vec::new();
    for name in SCENARIOS {
        for mode in [RunMode::Solve, RunMode::Certify] {
            let mut config = RunConfig::load(&scenario(name)).unwrap();
            config.certificate.run_monte_carlo = false;
            let label = format!("{name}/{}", mode.name());
            let dir = tmp.path().join(label.replace('/', "-"));
            let result = run(&config, mode, &dir).map(|o| o.report).map_err(|e| e.to_string());
            out.push((label, result));
        }
    }
    out
}

fn all_levels(runs: &[(String, Result<Report, String>)]) -> Result<Vec<(String, &linfel_core::LevelRecord, f64)>, String> {
    let mut levels = Vec::new();
    for (label, r) in runs {
        let r = r.as_ref().map_err(|e| format!("{label}: {e}"))?;
        for stage in [&r.anchor_stage, &r.continuation].into_iter().flatten() {
            for level in &stage.history {
                levels.push((label.clone(), level, r.config.solver.inner.gradient_tol));
            }
        }
    }
    Ok(levels)
}

fn normalisation(runs: &[(String, Result<Report, String>)]) -> Outcome {
    let levels = all_levels(runs)?;
    let (worst, at) = levels
        .iter()
        .map(|(l, r, _)| (r.normalization_residual, format!("{l} p={}", r.p)))
        .fold((0.0, String::new()), |a, b| if b.0 > a.0 { b } else { a });
    verdict(worst <= 1e-8, format!("{} levels, worst {worst:.1e} at {at}", levels.len()))
}

fn duality(runs: &[(String, Result<Report, String>)]) -> Outcome {
    let levels = all_levels(runs)?;
    let (worst, at) = levels
        .iter()
        .map(|(l, r, _)| (r.duality_residual, format!("{l} p={}", r.p)))
        .fold((0.0, String::new()), |a, b| if b.0 > a.0 { b } else { a });
    verdict(worst <= 1e-10, format!("{} levels, worst {worst:.1e} at {at}", levels.len()))
}

fn monotonicity(runs: &[(String, Result<Report, String>)]) -> Outcome {
    let mut worst = 0.0_f64;
    let mut chains = 0;
    for (label, r) in runs {
        let r = r.as_ref().map_err(|e| format!("{label}: {e}"))?;
        let tol = 10.0 * r.config.solver.inner.gradient_tol;
        for stage in [&r.anchor_stage, &r.continuation].into_iter().flatten() {
            chains += 1;
            for w in stage.history.windows(2) {
                let scale = w[0].energy.abs().max(1.0);
                worst = worst.max((w[0].energy - w[1].energy) / (tol * scale));
            }
        }
    }
    verdict(
        worst <= 1.0,
        format!("{chains} chains, largest drop {worst:.2} x (10 x inner tolerance)"),
    )
}

fn catalogue() -> Vec<(&'static str, usize, CoefficientModel, Reaction)> {
    let g = |g| Reaction::GOfU { g };
    vec![
        ("identity/zero", 1, CoefficientModel::Identity, Reaction::Zero),
        (
            "constant/linear",
            2,
            CoefficientModel::Constant { xx: 1.0, xy: 0.3, yy: 0.7 },
            Reaction::Linear { c0: 0.4, cy: -0.8, cz: [0.5, -0.2] },
        ),
        ("radial/neg-cube", 2, CoefficientModel::Radial { amplitude: 0.5 }, g(ScalarReaction::NegCube)),
        ("identity/power", 2, CoefficientModel::Identity, g(ScalarReaction::Power { alpha: 3.0 })),
        ("constant/sine", 1, CoefficientModel::Constant { xx: 1.5, xy: 0.0, yy: 1.0 }, g(ScalarReaction::Sine)),
        ("radial/exp", 2, CoefficientModel::Radial { amplitude: 0.3 }, g(ScalarReaction::Exp)),
        (
            "identity/polynomial",
            2,
            CoefficientModel::Identity,
            g(ScalarReaction::Polynomial { coeffs: vec![0.2, -1.0, 0.5, -0.3] }),
        ),
        ("radial/sine-gradient", 2, CoefficientModel::Radial { amplitude: 0.4 }, Reaction::SineGradient { scale: 0.7 }),
    ]
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = (0.0_f64, String::new());
    for (name, dim, coefficient, reaction) in catalogue() {
        let grid = Arc::new(if dim == 1 {
            Grid::interval(1.0, 17).unwrap()
        } else {
            Grid::rectangle([1.0, 1.0], [9, 9]).unwrap()
        });
        let boundary = BoundaryData::from_preset(grid.clone(), &BoundaryPreset::Sine { amplitude: 0.6 }).unwrap();
        let spec = ProblemSpec::new(coefficient, reaction, boundary).unwrap();
        let modes: Vec<[f64; 3]> =
            (0..4).map(|_| [rng.random_range(-0.4..0.4), rng.random_range(1.0..3.0), rng.random_range(1.0..3.0)]).collect();
        let free: Vec<f64> = grid
            .free_nodes()
            .iter()
            .map(|&k| {
                let x = grid.coords(k);
                let wave: f64 = modes
                    .iter()
                    .map(|m| m[0] * (m[1] * PI * x[0]).sin() * if dim == 2 { (m[2] * PI * x[1]).sin() } else { 1.0 })
                    .sum();
                spec.boundary().u0().values()[k] + wave
            })
            .collect();
        let u = spec.boundary().assemble(&free).unwrap();
        for p in [2.0, 4.0, 8.0] {
            for sigma in [0.0, 1.0] {
                let params = if sigma == 0.0 {
                    EnergyParams::plain(p, dim)
                } else {
                    EnergyParams::penalised(p, sigma, spec.boundary().u0().clone())
                };
                let grad = gradient_energy(&spec, &u, &params).unwrap();
                let scale = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
                for _ in 0..20 {
                    let slot = rng.random_range(0..grad.len());
                    let node = grid.free_nodes()[slot];
                    let e = |d: f64| {
                        let mut v = u.values().to_vec();
                        v[node] += d;
                        energy_p(&spec, &u.with_values(v).unwrap(), &params).unwrap()
                    };
                    let size = 1.0 + u.values()[node].abs();
                    let err = [1e-3, 1e-4, 1e-5]
                        .iter()
                        .map(|h| {
                            let eps = h * size;
                            let fd = (8.0 * (e(eps) - e(-eps)) - (e(2.0 * eps) - e(-2.0 * eps))) / (12.0 * eps);
                            (fd - grad[slot]).abs() / (grad[slot].abs() + 1e-6 * scale)
                        })
                        .fold(f64::INFINITY, f64::min);
                    if err > worst.0 {
                        worst = (err, format!("{name} p={p} sigma={sigma}"));
                    }
                }
            }
        }
    }
    verdict(
        worst.0 <= 1e-6,
        format!("8 operators x 3 p x 2 sigma x 20 coordinates, worst {:.1e} ({})", worst.0, worst.1),
    )
}

fn almost_minimiser_shadow() -> Outcome {
    let spec = oracle_spec(513, 1.0, 0.0);
    let f = oracle_multiplier(&spec, 1.0, 0.0);
    let u = spec.boundary().u0().clone();
    let options = CertificateOptions {
        monte_carlo: McOptions {
            trials: 200,
            amplitudes: vec![1e-1, 1e-2, 1e-3],
            tolerance: 1e-6,
            ..McOptions::default()
        },
        ..CertificateOptions::default()
    };
    let cert = build_certificate(&spec, &u, &f, 4.0, None, &options, 17).unwrap();
    let h = spec.grid().h_min();
    let passes_2_to_4 = cert.el1_residual <= 1e-12
        && cert.flatness <= 1e-12
        && cert.el2_residual <= 10.0 * h * h
        && cert.sign_violations == 0
        && cert.duality_residual <= 1e-10;
    let mc = cert.almost_min.as_ref().unwrap();
    let good = passes_2_to_4 && mc.trials == 200 && mc.violations == 0;

    let bump = Bump {
        centre: [0.3, 0.0],
        shape: BumpShape::Radial { radius: 0.1 },
    };
    let bad = u.with_values(u.values().iter().zip(bump.sample(spec.grid()).values()).map(|(a, b)| a + 0.1 * b).collect()).unwrap();
    let bad_cert = build_certificate(&spec, &bad, &f, 4.0, None, &options, 17).unwrap();
    let bad_mc = almost_minimiser_mc(&spec, &bad, &options.monte_carlo, 17).unwrap();
    let rejected = !bad_cert.pass && bad_mc.violations > 0;
    verdict(
        good && rejected,
        format!(
            "oracle: {} / {} violations against M = {:.1e}; corrupted: certificate {}, {} violations",
            mc.violations,
            mc.trials,
            mc.admissible_m,
            if bad_cert.pass { "passes" } else { "fails" },
            bad_mc.violations
        ),
    )
}

fn cubic_case() -> Outcome {
    let mut config = RunConfig::load(&scenario("cubic-1d")).unwrap();
    config.solver.p_max = 128.0;
    let solve = |n: usize| {
        let grid = Arc::new(Grid::interval(1.0, n).unwrap());
        let boundary = BoundaryData::from_preset(grid, config.problem.boundary.as_ref().unwrap()).unwrap();
        let spec = ProblemSpec::new(config.problem.coefficient.clone(), config.problem.reaction.clone(), boundary).unwrap();
        let options = ContinuationOptions {
            settle_tol: 1e-12,
            ..config.solver.continuation()
        };
        let state = run_continuation(&spec, &Mode::Construct, &options).unwrap();
        (spec, state)
    };
    let (spec, state) = solve(config.grid.nodes[0]);
    let converged = state.converged();
    let last_p = state.history.last().unwrap().p;
    let el = check_el_system(&spec, &state.u, &state.multipliers.f_p, state.multipliers.e_p).unwrap();
    let coarse = energy_identities(&spec, &state.u).unwrap().energy1.relative;
    let (fine_spec, fine) = solve(2 * config.grid.nodes[0] - 1);
    let fine_res = energy_identities(&fine_spec, &fine.u).unwrap().energy1.relative;
    let ratio = coarse / fine_res;
    verdict(
        converged && last_p == 128.0 && el.flatness <= 0.05 && (3.0..=5.0).contains(&ratio),
        format!(
            "{} levels converged: {converged}, flatness {:.2}% at p = {last_p}, energy identity {coarse:.2e} -> {fine_res:.2e} (ratio {ratio:.2})",
            state.history.len(),
            100.0 * el.flatness
        ),
    )
}

fn zero_branch() -> Outcome {
    let config = RunConfig::load(&scenario("zero-data")).unwrap();
    let grid = Arc::new(Grid::new(&config.grid.extent, &config.grid.nodes).unwrap());
    let boundary = BoundaryData::from_preset(grid.clone(), config.problem.boundary.as_ref().unwrap()).unwrap();
    let spec = ProblemSpec::new(config.problem.coefficient.clone(), config.problem.reaction.clone(), boundary).unwrap();
    let state = run_continuation(&spec, &Mode::Construct, &config.solver.continuation()).unwrap();
    let Some(kernel) = &state.kernel else {
        return Err(format!("kernel solve not triggered, e = {:e}", state.e_infty_estimate()));
    };
    let f = &kernel.f;
    let adj = spec.apply_adjoint(&state.u, f).unwrap();
    let l = spec.assemble_linearization(&state.u).unwrap();
    let wf: Vec<f64> = grid.measured_nodes().iter().map(|&k| grid.weight(k) * f.values()[k].abs()).collect();
    let terms = l.tr_abs_mul_vec(&wf);
    let scale = grid.free_nodes().iter().zip(&terms).map(|(&k, t)| t / grid.weight(k)).fold(0.0, f64::max);
    let residual = grid.free_nodes().iter().map(|&k| adj.values()[k].abs()).fold(0.0, f64::max) / scale;
    let mass: f64 = grid.measured_nodes().iter().map(|&k| grid.weight(k) * f.values()[k].abs()).sum();
    verdict(
        residual <= 1e-8 && (mass - 1.0).abs() <= 1e-12,
        format!(
            "e = {:.1e}, {:?} branch, adjoint residual {residual:.1e} of scale, L1 mass {mass:.15}",
            state.e_infty_estimate(),
            kernel.branch
        ),
    )
}

fn determinism() -> Outcome {
    let tmp = TempDir::new().unwrap();
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for d in &dirs {
        let out = linfel(&["certify", "--config", scenario("laplace-2d").to_str().unwrap(), "--out", d.to_str().unwrap()]);
        if !matches!(out.status.code(), Some(0)) {
            return Err(format!("certify exited with {:?}", out.status.code()));
        }
    }
    let report = Report::load(&dirs[0].join("report.yaml")).unwrap();
    let mut differing = Vec::new();
    for t in &report.tables {
        let (a, b) = (std::fs::read(dirs[0].join(t)).unwrap(), std::fs::read(dirs[1].join(t)).unwrap());
        if a != b {
            differing.push(t.clone());
        }
    }
    let out = linfel(&["compare", dirs[0].to_str().unwrap(), dirs[1].to_str().unwrap()]);
    let cmp: Comparison = serde_yaml::from_slice(&out.stdout).unwrap();
    let zero = cmp.identical
        && cmp.fields.iter().all(|f| f.linf == 0.0 && f.l1 == 0.0)
        && cmp.e_infty_delta == 0.0
        && cmp.history_max_diff == 0.0;
    verdict(
        differing.is_empty() && zero && out.status.code() == Some(0),
        format!(
            "{} tables byte-identical except {:?}; compare identical: {}",
            report.tables.len(),
            differing,
            cmp.identical
        ),
    )
}

fn main() {
    let runs = scenario_runs();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("oracle reproduction", Box::new(oracle_reproduction)),
        ("Euler-Lagrange certificate", Box::new(el_certificate)),
        ("normalisation identity", Box::new(|| normalisation(&runs))),
        ("duality identity", Box::new(|| duality(&runs))),
        ("monotonicity chain", Box::new(|| monotonicity(&runs))),
        ("gradient correctness", Box::new(gradient_check)),
        ("almost-minimiser shadow", Box::new(almost_minimiser_shadow)),
        ("semilinear admissible case", Box::new(cubic_case)),
        ("zero-minimum branch", Box::new(zero_branch)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag}  {name}: {detail}", i + 1);
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
