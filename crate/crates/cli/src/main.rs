use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use dnnbound::instances::{gen_random_pop, load_qaplib, qap_to_pop, PopInstance};
use dnnbound::polyalg::IndexPartition;
use dnnbound::relaxation::{AssembleOptions, RhoMode};
use dnnbound::solver::{solve_pop, ApgParams, BpParams, BpProgress};
use dnnbound::sparsity::{arrow_cliques, chordal_extend_and_cliques, chordal_random_pattern};
use dnnbound::Error;

mod check;
mod report;

use report::{csv_header, csv_row, SolveReport};

#[derive(Parser)]
#[command(name = "dnnbound", version, about = "Valid lower bounds for binary/box/complementarity POPs")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random sparse instance as JSON.
    Generate(GenerateArgs),
    /// Solve one instance (or a manifest of instances) and report the bound.
    Solve(SolveArgs),
    /// Solve a QAPLIB instance through its penalized POP form.
    Qap(QapArgs),
    /// Run structural self-checks on one instance.
    Check(CheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Arrow,
    Chordal,
}

#[derive(Clone, Copy, ValueEnum)]
enum VarType {
    Bin,
    Box,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    kind: Kind,
    /// Arrow: clique size of the band part.
    #[arg(long, default_value_t = 5)]
    a: usize,
    /// Arrow: size of the shared tail.
    #[arg(long, default_value_t = 2)]
    b: usize,
    /// Arrow: overlap between consecutive band cliques.
    #[arg(long, default_value_t = 2)]
    c: usize,
    /// Arrow: number of cliques.
    #[arg(long, default_value_t = 3)]
    ell: usize,
    /// Chordal: number of variables.
    #[arg(long, default_value_t = 13)]
    n: usize,
    /// Chordal: connection radius of the random geometric graph.
    #[arg(long, default_value_t = 0.4)]
    radio: f64,
    /// Objective degree.
    #[arg(long, default_value_t = 2)]
    degree: u32,
    #[arg(long, value_enum, default_value_t = VarType::Bin)]
    vars: VarType,
    /// Number of complementarity pairs; defaults to none.
    #[arg(long, default_value_t = 0)]
    comp: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Clone, Serialize)]
struct SolverFlags {
    /// Relaxation order; defaults to ceil(total degree / 2).
    #[arg(long)]
    omega: Option<u32>,
    #[arg(long, value_enum, default_value_t = Rho::Trivial)]
    rho: Rho,
    /// Single-clique relaxation instead of the chordal clique cover.
    #[arg(long)]
    dense: bool,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 1e-13)]
    eps: f64,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    #[arg(long, default_value_t = 20_000)]
    k_max: usize,
    #[arg(long, default_value_t = 1.1)]
    eta_r: f64,
    #[arg(long, default_value_t = 100)]
    max_bp: usize,
    /// Raise the initial upper bound by this relative amount if it tests feasible.
    #[arg(long)]
    expand: Option<f64>,
    #[arg(long)]
    no_restart: bool,
    #[arg(long)]
    no_heuristic_stop: bool,
    #[arg(long)]
    no_warm_start: bool,
    #[arg(long)]
    no_scale: bool,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Rho {
    Trivial,
    Submodular,
}

impl SolverFlags {
    fn assemble_options(&self) -> AssembleOptions {
        AssembleOptions {
            omega: self.omega,
            dense: self.dense,
            cover: None,
            rho: match self.rho {
                Rho::Trivial => RhoMode::Trivial,
                Rho::Submodular => RhoMode::Submodular,
            },
        }
    }

    fn bp_params(&self) -> BpParams {
        BpParams {
            tol: self.tol,
            apg: ApgParams {
                eps: self.eps,
                delta: self.delta,
                k_max: self.k_max,
                eta_r: self.eta_r,
                restart: !self.no_restart,
                heuristic_stop: !self.no_heuristic_stop,
                ..ApgParams::default()
            },
            max_iterations: self.max_bp,
            warm_start: !self.no_warm_start,
            scale_objective: !self.no_scale,
            expand: self.expand,
        }
    }
}

#[derive(Args)]
struct OutputFlags {
    /// Write the JSON report here instead of stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Append a table row (instance, d, n, ell, LBv, sec, apgit, bpit, term).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Print BP progress to stderr.
    #[arg(short, long)]
    verbose: bool,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance JSON file.
    #[arg(required_unless_present = "manifest")]
    instance: Option<PathBuf>,
    /// File listing one instance path per line; solved in parallel.
    #[arg(long, conflicts_with = "instance")]
    manifest: Option<PathBuf>,
    /// Worker threads for manifests.
    #[arg(long, env = "DNNBOUND_THREADS")]
    threads: Option<usize>,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    output: OutputFlags,
}

#[derive(Args)]
struct QapArgs {
    /// QAPLIB .dat file.
    instance: PathBuf,
    /// Penalty weight of the assignment constraints.
    #[arg(long, default_value_t = 1e5)]
    lambda: f64,
    /// Use the chordal clique cover instead of one dense clique.
    #[arg(long)]
    sparse: bool,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    output: OutputFlags,
}

#[derive(Args)]
struct CheckArgs {
    instance: PathBuf,
    #[arg(long)]
    omega: Option<u32>,
    #[arg(long)]
    dense: bool,
    /// Random feasible points and projection samples to test.
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
}

fn fail(err: &Error, path: Option<&Path>) -> ExitCode {
    let (kind, message, code) = match err {
        Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => (
            "input",
            format!("instance not found: {}", path.map(|p| p.display().to_string()).unwrap_or_default()),
            2,
        ),
        e if e.is_input_error() => ("input", e.to_string(), 2),
        e => ("numerical", e.to_string(), 3),
    };
    let doc = ErrorReport { error: kind, message };
    eprintln!("{}", serde_json::to_string(&doc).expect("error report serializes"));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Command::Generate(a) => cmd_generate(&a).map_err(|e| (e, None)),
        Command::Solve(a) => cmd_solve(&a),
        Command::Qap(a) => cmd_qap(&a).map_err(|e| (e, Some(a.instance.clone()))),
        Command::Check(a) => cmd_check(&a).map_err(|e| (e, Some(a.instance.clone()))),
    };
    match result {
        Ok(code) => code,
        Err((e, path)) => fail(&e, path.as_deref()),
    }
}

fn cmd_generate(a: &GenerateArgs) -> dnnbound::Result<ExitCode> {
    let cover = match a.kind {
        Kind::Arrow => arrow_cliques(a.a, a.b, a.c, a.ell)?,
        Kind::Chordal => chordal_extend_and_cliques(&chordal_random_pattern(a.n, a.radio, a.seed)?),
    };
    let partition = match a.vars {
        VarType::Bin => IndexPartition::all_binary(cover.n),
        VarType::Box => IndexPartition::all_box(cover.n),
    };
    let mut pop = gen_random_pop(&cover, a.degree, &partition, a.comp, a.seed)?;
    if let Some(serde_json::Value::Object(m)) = pop.provenance.as_mut() {
        let kind = match a.kind {
            Kind::Arrow => serde_json::json!({"kind": "arrow", "a": a.a, "b": a.b, "c": a.c, "ell": a.ell}),
            Kind::Chordal => serde_json::json!({"kind": "chordal", "n": a.n, "radio": a.radio}),
        };
        m.insert("sparsity".into(), kind);
    }
    pop.save(&a.out)?;
    eprintln!("wrote {} (n = {}, {} cliques)", a.out.display(), cover.n, cover.cliques.len());
    Ok(ExitCode::SUCCESS)
}

fn instance_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn run_one(
    id: String,
    pop: &PopInstance,
    flags: &SolverFlags,
    verbose: bool,
    extra: serde_json::Value,
) -> dnnbound::Result<SolveReport> {
    let progress = |p: &BpProgress| {
        if verbose {
            eprintln!(
                "[{id}] bp {:>3}  y_m {:>14.6}  {:?}  |X| {:.2e}  g {:.2e}  apg {:>5}  vl {:.6}",
                p.iteration, p.y0_m, p.verdict, p.x_norm, p.g, p.apg_iterations, p.y0_vl
            );
        }
    };
    let out = solve_pop(pop, &flags.assemble_options(), &flags.bp_params(), progress)?;
    Ok(SolveReport::new(id, pop, &out, serde_json::json!({"solver": flags, "instance": extra})))
}

fn emit(reports: &[SolveReport], output: &OutputFlags, single: bool) -> dnnbound::Result<()> {
    let text = if single {
        serde_json::to_string_pretty(&reports[0])?
    } else {
        serde_json::to_string_pretty(reports)?
    };
    if let Some(p) = &output.csv {
        let fresh = !p.exists();
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(p)?;
        if fresh {
            writeln!(f, "{}", csv_header())?;
        }
        for r in reports {
            writeln!(f, "{}", csv_row(r))?;
        }
    }
    match &output.out {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => match writeln!(std::io::stdout(), "{text}") {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
            r => r?,
        },
    }
    Ok(())
}

fn cmd_solve(a: &SolveArgs) -> Result<ExitCode, (Error, Option<PathBuf>)> {
    let Some(manifest) = &a.manifest else {
        let path = a.instance.clone().expect("clap enforces instance or manifest");
        let pop = PopInstance::load(&path).map_err(|e| (e, Some(path.clone())))?;
        let report = run_one(instance_id(&path), &pop, &a.solver, a.output.verbose, serde_json::json!({"path": path}))
            .map_err(|e| (e, Some(path.clone())))?;
        emit(&[report], &a.output, true).map_err(|e| (e, None))?;
        return Ok(ExitCode::SUCCESS);
    };
    let text = std::fs::read_to_string(manifest).map_err(|e| (e.into(), Some(manifest.clone())))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let paths: Vec<PathBuf> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.threads.unwrap_or(0))
        .build()
        .map_err(|e| (Error::InvalidParameter(e.to_string()), None))?;
    let results: Vec<Result<SolveReport, (Error, Option<PathBuf>)>> = pool.install(|| {
        paths
            .par_iter()
            .map(|p| {
                let pop = PopInstance::load(p).map_err(|e| (e, Some(p.clone())))?;
                run_one(instance_id(p), &pop, &a.solver, a.output.verbose, serde_json::json!({"path": p}))
                    .map_err(|e| (e, Some(p.clone())))
            })
            .collect()
    });
    let reports = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    emit(&reports, &a.output, false).map_err(|e| (e, None))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_qap(a: &QapArgs) -> dnnbound::Result<ExitCode> {
    let q = load_qaplib(&a.instance)?;
    let pop = qap_to_pop(&q, a.lambda)?;
    let mut flags = a.solver.clone();
    flags.dense = !a.sparse;
    if matches!(flags.rho, Rho::Trivial) && !a.sparse {
        flags.rho = Rho::Submodular;
    }
    let extra = serde_json::json!({"path": a.instance, "r": q.r, "lambda": a.lambda});
    let report = run_one(instance_id(&a.instance), &pop, &flags, a.output.verbose, extra)?;
    emit(&[report], &a.output, true)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(a: &CheckArgs) -> dnnbound::Result<ExitCode> {
    let pop = PopInstance::load(&a.instance)?;
    let opts = AssembleOptions { omega: a.omega, dense: a.dense, ..AssembleOptions::default() };
    let results = check::run(&pop, &opts, a.samples, a.seed)?;
    let mut all = true;
    for r in &results {
        println!("{} {:<28} {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
        all &= r.pass;
    }
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
