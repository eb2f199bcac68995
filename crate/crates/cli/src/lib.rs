//! The `seirkit` command line: scenario files in, CSV out.

pub mod csv;
pub mod scenario;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use seirkit::bifurcation::{
    backward4_center_manifold, backward_susceptible_coupling, hopf_limit_cycle_check,
    seir3_center_manifold, sweep_diagram, CenterManifoldCoefficients, NormalForm,
};
use seirkit::equilibria::{dfe, endemic_equilibrium, next_generation_matrix, r0};
use seirkit::integrate::{simulate, StepConfig};
use seirkit::model::{BackwardModel, ClassicalSeir, DynamicalSystem, ModifiedSeir};
use seirkit::sensitivity::{sensitivity_analytic, sensitivity_fd, R0Convention, DEFAULT_REL_STEP};
use seirkit::stability::{
    dfe_stability_report, ee_stability_report, lyapunov_dfe_certificate_seeded, StabilityReport,
    DEFAULT_LYAPUNOV_SEED,
};
use seirkit::ModifiedSeirParams;

use crate::csv::{format_number, write_csv, Cell, CsvTable};
use crate::scenario::{parse_scenario, ModelKind, Scenario, ScenarioError};

/// Relative `--out` paths are resolved against this directory when it is set.
pub const OUT_DIR_ENV: &str = "SEIRKIT_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "seirkit", version, about = "SEIR model analysis: equilibria, stability, bifurcations, simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Io {
    /// Scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output CSV path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ManifoldSystem {
    Seir3,
    Backward4,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// RK4 trajectory of the scenario's model.
    Simulate {
        #[command(flatten)]
        io: Io,
        /// Keep every n-th step (the final time is always kept).
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Basic reproduction number with the next-generation matrices.
    R0 {
        #[command(flatten)]
        io: Io,
        /// Susceptible level of the linearization; defaults to tau/mu.
        #[arg(long)]
        s0: Option<f64>,
    },
    /// Disease-free and endemic equilibria.
    Equilibria {
        #[command(flatten)]
        io: Io,
    },
    /// Local stability of each equilibrium.
    Stability {
        #[command(flatten)]
        io: Io,
    },
    /// Sampled Lyapunov certificate for the disease-free state.
    Lyapunov {
        #[command(flatten)]
        io: Io,
        #[arg(long, default_value_t = DEFAULT_LYAPUNOV_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Radius of the sampled region around the disease-free state.
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
    },
    /// Normalized sensitivity indices of R0.
    Sensitivity {
        #[command(flatten)]
        io: Io,
        /// Use R0 with the recruitment factor tau/mu, adding an index for tau.
        #[arg(long)]
        with_tau: bool,
        #[arg(long, default_value_t = DEFAULT_REL_STEP)]
        rel_step: f64,
    },
    /// Bifurcation diagram of a normal form.
    Bifurcate {
        /// saddle-node, transcritical, pitchfork or hopf.
        #[arg(long)]
        form: String,
        /// Parameter range as min:max.
        #[arg(long, allow_hyphen_values = true, default_value = "-1:1")]
        range: String,
        #[arg(long, default_value_t = 201)]
        n: usize,
        /// Quadratic coefficient of the transcritical form.
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        /// For the Hopf form: integrate from this radius at each parameter and report the cycle.
        #[arg(long)]
        cycle_radius: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 200.0)]
        t_end: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Center-manifold coefficients (a, b) at the threshold.
    CenterManifold {
        #[arg(long, value_enum)]
        system: ManifoldSystem,
        #[command(flatten)]
        io: Io,
        /// Susceptible level of the backward model's disease-free state.
        #[arg(long, default_value_t = 1.0)]
        s0: f64,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Scenario { path: PathBuf, source: ScenarioError },
    #[error(transparent)]
    Core(#[from] seirkit::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if !e.is_validation() => EXIT_NUMERICAL,
            _ => EXIT_VALIDATION,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn load(path: &Path) -> CliResult<Scenario> {
    let text = fs::read_to_string(path)
        .map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    parse_scenario(&text).map_err(|source| CliError::Scenario { path: path.to_path_buf(), source })
}

fn scenario_err(path: &Path) -> impl FnOnce(ScenarioError) -> CliError + '_ {
    move |source| CliError::Scenario { path: path.to_path_buf(), source }
}

fn modified(s: &Scenario, command: &str) -> CliResult<ModifiedSeirParams> {
    s.modified_params().ok_or_else(|| {
        CliError::Usage(format!("{command} needs a seir-modified scenario, got {}", s.model))
    })
}

fn params_comment(s: &Scenario) -> String {
    let listed: Vec<String> =
        s.parameters.iter().map(|(k, v)| format!("{k}={}", format_number(*v))).collect();
    format!("model={} {}", s.model, listed.join(" "))
}

fn simulate_table(s: &Scenario, path: &Path, stride: usize) -> CliResult<CsvTable> {
    if stride == 0 {
        return Err(CliError::Usage("stride must be at least 1".into()));
    }
    let initial = s.initial_state().map_err(scenario_err(path))?;
    let config = *s.step().map_err(scenario_err(path))?;
    let system: Box<dyn DynamicalSystem> = match s.model {
        ModelKind::SeirModified => Box::new(ModifiedSeir::new(s.modified_params().unwrap())),
        ModelKind::SeirClassical => Box::new(ClassicalSeir::new(s.classical_params().unwrap())),
        ModelKind::Backward4 => Box::new(BackwardModel::new(s.backward_params().unwrap())),
    };
    let traj = simulate(system.as_ref(), initial, &config)?;

    let mut header = vec!["t"];
    header.extend_from_slice(s.model.state_names());
    let mut table = CsvTable::new(&header);
    table.comment("fixed-step RK4 trajectory");
    table.comment(params_comment(s));
    table.comment(format!(
        "dt={} t0={} t_end={} stride={stride}",
        format_number(config.dt()),
        format_number(config.t_start()),
        format_number(config.t_end())
    ));
    let last = traj.len() - 1;
    for (k, (t, state)) in traj.times.iter().zip(&traj.states).enumerate() {
        if k % stride == 0 || k == last {
            let mut row = vec![Cell::Num(*t)];
            row.extend(state.iter().map(|v| Cell::Num(*v)));
            table.push(row);
        }
    }
    Ok(table)
}

fn r0_table(s: &Scenario, s0: Option<f64>) -> CliResult<CsvTable> {
    let p = modified(s, "r0")?;
    let level = s0.unwrap_or(p.dfe_susceptible());
    let ngm = next_generation_matrix(&p, level)?;
    let mut table = CsvTable::new(&["quantity", "value"]);
    table.comment("basic reproduction number as the spectral radius of F V^-1 on (E, I)");
    table.comment(params_comment(s));
    table.push(vec!["r0".into(), ngm.value.into()]);
    table.push(vec!["r0_closed_form".into(), r0(&p).into()]);
    table.push(vec!["s0".into(), level.into()]);
    for (name, m) in [("F", &ngm.f_matrix), ("V", &ngm.v_matrix), ("FV_inv", &ngm.ngm)] {
        for i in 0..2 {
            for j in 0..2 {
                table.push(vec![format!("{name}_{}{}", i + 1, j + 1).into(), m[(i, j)].into()]);
            }
        }
    }
    Ok(table)
}

fn equilibria_table(s: &Scenario) -> CliResult<CsvTable> {
    let p = modified(s, "equilibria")?;
    let mut table = CsvTable::new(&["kind", "S", "E", "I", "R", "residual"]);
    table.comment("equilibria of the modified SEIR model; residual is the max-norm of the right-hand side");
    table.comment(params_comment(s));
    table.comment(format!("r0={}", format_number(r0(&p))));
    let points = std::iter::once(dfe(&p)).chain(endemic_equilibrium(&p));
    for (kind, point) in ["disease-free", "endemic"].into_iter().zip(points) {
        let mut row = vec![Cell::from(kind)];
        row.extend(point.state.iter().map(|v| Cell::Num(*v)));
        row.push(point.residual.into());
        table.push(row);
    }
    Ok(table)
}

fn push_report(table: &mut CsvTable, name: &str, report: &StabilityReport) {
    let mut item = |label: String, value: Cell| table.push(vec![name.into(), label.into(), value]);
    item("verdict".into(), report.verdict.as_str().into());
    item("hyperbolicity_tolerance".into(), report.tolerance.into());
    for (k, c) in report.char_poly.coefficients().iter().enumerate() {
        let power = report.char_poly.degree() - k;
        item(format!("char_poly_lambda^{power}"), (*c).into());
    }
    for (k, z) in report.eigenvalues.iter().enumerate() {
        let Complex64 { re, im } = *z;
        item(format!("eigenvalue_{}_re", k + 1), re.into());
        item(format!("eigenvalue_{}_im", k + 1), im.into());
    }
    for c in &report.criteria {
        item(format!("criterion_{}", c.name), c.holds.into());
    }
}

fn stability_table(s: &Scenario) -> CliResult<CsvTable> {
    let p = modified(s, "stability")?;
    let mut table = CsvTable::new(&["equilibrium", "item", "value"]);
    table.comment("local stability from Jacobian eigenvalues, with coefficient criteria");
    table.comment(params_comment(s));
    table.comment(format!("r0={}", format_number(r0(&p))));
    push_report(&mut table, "disease-free", &dfe_stability_report(&p)?);
    if endemic_equilibrium(&p).is_some() {
        push_report(&mut table, "endemic", &ee_stability_report(&p)?);
    }
    Ok(table)
}

fn lyapunov_table(s: &Scenario, seed: u64, samples: usize, radius: f64) -> CliResult<CsvTable> {
    let p = modified(s, "lyapunov")?;
    let cert = lyapunov_dfe_certificate_seeded(&p, samples, radius, seed)?;
    let mut table = CsvTable::new(&["quantity", "value"]);
    table.comment(format!("seed={seed}"));
    table.comment("V = x + y + z + w on states shifted to the disease-free equilibrium");
    table.comment(params_comment(s));
    let rows: [(&str, Cell); 8] = [
        ("samples", (samples as f64).into()),
        ("region_radius", radius.into()),
        ("max_minus_v", cert.max_v_violation.into()),
        ("max_dvdt", cert.max_dvdt.into()),
        ("max_identity_residual", cert.identity_residual.into()),
        ("origin_v", cert.origin_v.into()),
        ("origin_dvdt", cert.origin_dvdt.into()),
        ("certified", cert.verdict.into()),
    ];
    for (name, value) in rows {
        table.push(vec![name.into(), value]);
    }
    Ok(table)
}

fn sensitivity_table(s: &Scenario, with_tau: bool, rel_step: f64) -> CliResult<CsvTable> {
    let p = modified(s, "sensitivity")?;
    let convention =
        if with_tau { R0Convention::TauInclusive } else { R0Convention::UnitSusceptible };
    let mut table =
        CsvTable::new(&["parameter", "analytic", "finite_difference", "abs_rel_gap"]);
    table.comment("normalized sensitivity indices (dR0/dp)(p/R0)");
    table.comment(if with_tau {
        "R0 = eps beta tau / (mu (mu + eps)(mu + gamma))"
    } else {
        "R0 = eps beta / ((mu + eps)(mu + gamma))"
    });
    table.comment(params_comment(s));
    table.comment(format!("relative_step={}", format_number(rel_step)));
    for &which in convention.parameters() {
        let exact = sensitivity_analytic(&p, which, convention)?.value;
        let fd = sensitivity_fd(&p, which, rel_step, convention)?.value;
        let gap = (exact - fd).abs() / exact.abs();
        table.push(vec![which.name().into(), exact.into(), fd.into(), gap.into()]);
    }
    Ok(table)
}

fn parse_range(range: &str) -> CliResult<(f64, f64)> {
    let bad = || CliError::Usage(format!("range must look like min:max, got '{range}'"));
    let (lo, hi) = range.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    Ok((lo, hi))
}

#[allow(clippy::too_many_arguments)]
fn bifurcate_table(
    form: &str,
    range: &str,
    n: usize,
    b: f64,
    cycle_radius: Option<f64>,
    dt: f64,
    t_end: f64,
) -> CliResult<CsvTable> {
    let mut form: NormalForm = form.parse()?;
    if let NormalForm::Transcritical { .. } = form {
        form = NormalForm::Transcritical { b };
    }
    let (lo, hi) = parse_range(range)?;
    let diagram = sweep_diagram(form, lo, hi, n)?;

    if let Some(r) = cycle_radius {
        if form != NormalForm::HopfPolar {
            return Err(CliError::Usage("--cycle-radius applies to the hopf form only".into()));
        }
        let config = StepConfig::new(dt, 0.0, t_end)?;
        let mut table = CsvTable::new(&[
            "param",
            "initial_r",
            "predicted_radius",
            "observed_radius",
            "period",
            "converged",
        ]);
        table.comment("planar Hopf normal form integrated by RK4 from (r, 0)");
        table.comment(format!("dt={} t_end={}", format_number(dt), format_number(t_end)));
        for slice in &diagram.slices {
            let report = hopf_limit_cycle_check(slice.param, r, &config)?;
            table.push(vec![
                slice.param.into(),
                r.into(),
                report.predicted_radius.into(),
                report.observed_radius.into(),
                report.period_observed.unwrap_or(f64::NAN).into(),
                report.converged.into(),
            ]);
        }
        return Ok(table);
    }

    let mut table = CsvTable::new(&["param", "x", "stability"]);
    table.comment(match form {
        NormalForm::SaddleNode => "x' = x^2 + a".to_string(),
        NormalForm::Transcritical { b } => format!("x' = a x - {} x^2", format_number(b)),
        NormalForm::Pitchfork => "x' = x^3 - a x".to_string(),
        NormalForm::HopfPolar => "r' = a r - r^3, theta' = 1".to_string(),
    });
    table.comment(format!("{} equilibria over a in [{}, {}], n={n}", form.name(), format_number(lo), format_number(hi)));
    for p in diagram.points() {
        table.push(vec![p.param.into(), p.x.into(), p.stability.as_str().into()]);
    }
    Ok(table)
}

fn push_vector(table: &mut CsvTable, name: &str, values: &[f64], offset: usize) {
    for (k, v) in values.iter().enumerate() {
        table.push(vec![format!("{name}_{}", k + offset).into(), (*v).into()]);
    }
}

fn manifold_rows(table: &mut CsvTable, c: &CenterManifoldCoefficients) {
    table.push(vec!["critical_param".into(), c.critical_param.into()]);
    table.push(vec!["a".into(), c.a.into()]);
    table.push(vec!["b".into(), c.b.into()]);
    table.push(vec!["classification".into(), c.classification.as_str().into()]);
    table.push(vec!["v_dot_w".into(), c.v_dot_w.into()]);
}

fn center_manifold_table(s: &Scenario, system: ManifoldSystem, s0: f64) -> CliResult<CsvTable> {
    let mut table = CsvTable::new(&["quantity", "value"]);
    match system {
        ManifoldSystem::Seir3 => {
            let p = modified(s, "center-manifold --system seir3")?;
            let c = seir3_center_manifold(&p)?;
            table.comment("center-manifold coefficients of the (S, E, I) system at beta = beta*");
            table.comment("w scaled to w_3 = 1, v scaled to v . w = 1");
            table.comment(params_comment(s));
            manifold_rows(&mut table, &c);
            push_vector(&mut table, "w", &c.w, 1);
            push_vector(&mut table, "v", &c.v, 1);
        }
        ManifoldSystem::Backward4 => {
            let p = s.backward_params().ok_or_else(|| {
                CliError::Usage(format!(
                    "center-manifold --system backward4 needs a backward4 scenario, got {}",
                    s.model
                ))
            })?;
            let c = backward4_center_manifold(&p, s0)?;
            table.comment("center-manifold coefficients of the infected block (x2, x3, x4) at beta2 = beta2*");
            table.comment(format!("x1 held at s0={}; w scaled to w_3 = 1, v to v_2 = 1", format_number(s0)));
            table.comment(params_comment(s));
            manifold_rows(&mut table, &c);
            push_vector(&mut table, "w", &c.w, 2);
            push_vector(&mut table, "v", &c.v, 2);
            table.push(vec![
                "susceptible_coupling_per_w1".into(),
                backward_susceptible_coupling(&p, &c).into(),
            ]);
        }
    }
    Ok(table)
}

fn resolve_out(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn emit(table: &CsvTable, out: Option<&Path>, stdout: &mut dyn Write) -> CliResult<()> {
    match out {
        None => write_csv(table, stdout)
            .map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
        Some(path) => {
            let path = resolve_out(path);
            let io_err = |source| CliError::Io { path: path.clone(), source };
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(io_err)?;
            }
            let mut buf = Vec::new();
            write_csv(table, &mut buf).map_err(io_err)?;
            fs::write(&path, buf).map_err(io_err)?;
            log::info!("wrote {} rows to {}", table.rows.len(), path.display());
            Ok(())
        }
    }
}

fn execute(command: Command, stdout: &mut dyn Write) -> CliResult<()> {
    let (table, out) = match command {
        Command::Simulate { io, stride } => {
            let s = load(&io.scenario)?;
            (simulate_table(&s, &io.scenario, stride)?, io.out)
        }
        Command::R0 { io, s0 } => (r0_table(&load(&io.scenario)?, s0)?, io.out),
        Command::Equilibria { io } => (equilibria_table(&load(&io.scenario)?)?, io.out),
        Command::Stability { io } => (stability_table(&load(&io.scenario)?)?, io.out),
        Command::Lyapunov { io, seed, samples, radius } => {
            (lyapunov_table(&load(&io.scenario)?, seed, samples, radius)?, io.out)
        }
        Command::Sensitivity { io, with_tau, rel_step } => {
            (sensitivity_table(&load(&io.scenario)?, with_tau, rel_step)?, io.out)
        }
        Command::Bifurcate { form, range, n, b, cycle_radius, dt, t_end, out } => {
            (bifurcate_table(&form, &range, n, b, cycle_radius, dt, t_end)?, out)
        }
        Command::CenterManifold { system, io, s0 } => {
            (center_manifold_table(&load(&io.scenario)?, system, s0)?, io.out)
        }
    };
    emit(&table, out.as_deref(), stdout)
}

/// Runs one invocation; `argv` includes the program name. Returns the exit code.
pub fn run_command<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "seirkit: {e}");
            e.exit_code()
        }
    }
}
