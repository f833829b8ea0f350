mod config;
mod plot;
mod study;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dgfem::inequalities::records_to_csv;
use dgfem::io::read_mesh;
use dgfem::problems::{checkerboard, kellogg_ratio, poisson, sign_changing_flux, BenchmarkProblem};
use dgfem::{CoefficientField, Error};

use study::{Refinement, Report};

/// P1 finite elements on simplicial meshes with discrete De Giorgi diagnostics.
#[derive(Parser)]
#[command(name = "dgfem", version)]
struct Cli {
    /// Config file of `key = value` lines; `[subcommand]` sections apply to one subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSV, summary and plot files.
    #[arg(long, global = true, default_value = "dgfem-out")]
    out: PathBuf,

    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0x5eed_2024)]
    seed: u64,

    /// Also write a log-log SVG plot.
    #[arg(long, global = true)]
    svg: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemName {
    /// Checkerboard coefficient with ratio `--ratio` and a manufactured singular solution.
    Checkerboard,
    /// Checkerboard with the ratio whose singular exponent is 1/2.
    Kellogg,
    /// Sign-changing flux on (-2, 2)^2.
    SignChanging,
    /// Mirror image of the sign-changing flux problem.
    SignChangingReflected,
    /// -Δu = 1 on the unit square.
    Poisson,
    /// -Δu = 1 on the unit cube.
    Poisson3d,
}

#[derive(Clone, Copy, ValueEnum)]
enum CoefName {
    Identity,
    Checkerboard,
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(long, value_enum, default_value = "checkerboard")]
    problem: ProblemName,

    /// Coefficient ratio of the checkerboard problem.
    #[arg(long, default_value_t = 5.0)]
    ratio: f64,
}

#[derive(Args)]
struct RefineArgs {
    /// Finest refinement level (level `l` has local mesh size `2^-l` times the domain width).
    #[arg(long, default_value_t = 6)]
    levels: u32,

    /// Grade meshes by energy-based Dörfler marking instead of uniform refinement.
    #[arg(long)]
    adaptive: bool,

    #[arg(long, default_value_t = 0.3)]
    mark_fraction: f64,

    /// Fail when the Hölder seminorm grows by more than this many percent per level (levels ≥ 4).
    #[arg(long)]
    max_growth: Option<f64>,
}

impl RefineArgs {
    fn refinement(&self) -> Refinement {
        Refinement {
            levels: self.levels,
            adaptive: self.adaptive,
            fraction: self.mark_fraction,
            max_growth: self.max_growth.map(|p| p / 100.0),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve a benchmark problem on a generated or given mesh.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        refine: RefineArgs,
        /// Mesh file in `dgfem-mesh 1` format; overrides the generated mesh.
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
    /// Print conformity, shape-regularity and nonobtuse certificates of a mesh file.
    AuditMesh {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, value_enum, default_value = "identity")]
        coef: CoefName,
        #[arg(long, default_value_t = 5.0)]
        ratio: f64,
    },
    /// Oscillation decay, Hölder seminorms and Caccioppoli/Poincaré ratios over a mesh family.
    DegiorgiStudy {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        refine: RefineArgs,
    },
    /// Randomized checks of the unconditional lemmas.
    VerifyInequalities {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Picard solve of a quasilinear equation with frozen-coefficient audits.
    QuasilinearStudy {
        #[command(flatten)]
        refine: RefineArgs,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve { .. } => "solve",
            Command::AuditMesh { .. } => "audit-mesh",
            Command::DegiorgiStudy { .. } => "degiorgi-study",
            Command::VerifyInequalities { .. } => "verify-inequalities",
            Command::QuasilinearStudy { .. } => "quasilinear-study",
        }
    }
}

fn problem(args: &ProblemArgs) -> dgfem::Result<BenchmarkProblem> {
    match args.problem {
        ProblemName::Checkerboard => {
            if !(args.ratio > 0.0) {
                return Err(Error::InvalidOperand("ratio must be positive".into()));
            }
            checkerboard(args.ratio)
        }
        ProblemName::Kellogg => checkerboard(kellogg_ratio(0.5)?),
        ProblemName::SignChanging => Ok(sign_changing_flux(false)),
        ProblemName::SignChangingReflected => Ok(sign_changing_flux(true)),
        ProblemName::Poisson => poisson(2),
        ProblemName::Poisson3d => poisson(3),
    }
}

fn run(cli: &Cli) -> dgfem::Result<Report> {
    match &cli.command {
        Command::Solve { problem: p, refine, mesh } => {
            let prob = problem(p)?;
            let mesh = match mesh {
                Some(path) => read_mesh(path)?,
                None => {
                    let r = refine.refinement();
                    let family = if r.adaptive {
                        dgfem::problems::adaptive_family(&prob, &[r.levels], r.fraction)?
                    } else {
                        dgfem::problems::uniform_family(&prob, &[r.levels])?
                    };
                    family.into_iter().next().expect("one level requested")
                }
            };
            study::solve(&prob, mesh)
        }
        Command::AuditMesh { mesh, coef, ratio } => {
            let mesh = read_mesh(mesh)?;
            let a = match coef {
                CoefName::Identity => CoefficientField::identity(),
                CoefName::Checkerboard => checkerboard(*ratio)?.coefficient,
            };
            study::audit_mesh(&mesh, &a)
        }
        Command::DegiorgiStudy { problem: p, refine } => study::degiorgi_study(&problem(p)?, &refine.refinement()),
        Command::VerifyInequalities { trials } => study::verify_inequalities(cli.seed, *trials),
        Command::QuasilinearStudy { refine } => study::quasilinear_study(&refine.refinement()),
    }
}

fn write_outputs(cli: &Cli, report: &Report) -> std::io::Result<Vec<PathBuf>> {
    let name = cli.command.name();
    let dir: &Path = &cli.out;
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |file: String, text: &str| -> std::io::Result<()> {
        let path = dir.join(file);
        std::fs::write(&path, text)?;
        written.push(path);
        Ok(())
    };
    if !report.records.is_empty() {
        put(format!("{name}.csv"), &records_to_csv(&report.records))?;
    }
    put(format!("{name}.txt"), &report.summary)?;
    if cli.svg {
        if let Some(plot) = &report.plot {
            put(format!("{name}.svg"), &plot.to_svg())?;
        }
    }
    for (file, text) in &report.files {
        put(file.clone(), text)?;
    }
    Ok(written)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. }
        | Error::Io(_)
        | Error::InvalidOperand(_)
        | Error::UnsupportedDimension(_)
        | Error::IncompatibleOperands(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    print!("{}", report.summary);
    if !matches!(cli.command, Command::AuditMesh { .. }) {
        match write_outputs(&cli, &report) {
            Ok(paths) => {
                for p in paths {
                    println!("wrote {}", p.display());
                }
            }
            Err(e) => {
                eprintln!("error: writing outputs to {}: {e}", cli.out.display());
                return ExitCode::from(2);
            }
        }
    }
    if report.pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
