use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use spectrahedra::momrelax::{build_containment_relaxation, CheckOptions, ContainmentProblem};
use spectrahedra::pencil::random_pair;
use spectrahedra::posmap::cp_sdfp_problem;
use spectrahedra::radii::circumradius_sq;
use spectrahedra::sdpcore::export_sdpa;
use spectrahedra::sosrelax::build_sos_relaxation;
use spectrahedra::Error;
use spectrahedra_cli::check::{run_check, CheckConfig, Method};
use spectrahedra_cli::input::{input_error, parse_vector, read_pencil, write_pencil};
use spectrahedra_cli::render::{rasterize, to_svg, Mode, RenderConfig};
use spectrahedra_cli::reproduce::{reproduce, Scale};
use spectrahedra_cli::{exit_code_for, EXIT_GOLDEN, EXIT_INPUT};

#[derive(Parser)]
#[command(name = "spectra", version, about = "Containment certificates for spectrahedra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Sdfp,
    Moment,
    Sos,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Slice,
    Project,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportArg {
    Moment,
    Sos,
    Sdfp,
    SdfpExtended,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether S_A is contained in S_B. Exit 0 certified, 1 refuted, 2 inconclusive.
    Check {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        method: MethodArg,
        /// Moment order (with --method all, every order from 2 up to this one).
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long, default_value_t = 0)]
        sos_order: usize,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long = "R", default_value_t = 2.0)]
        big_r: f64,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        /// Skip lineality splitting and pencil reduction.
        #[arg(long)]
        no_reduce: bool,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the moment bound ν²(t) on max ‖x − c‖² over S_A.
    Radius {
        #[arg(long)]
        pencil: PathBuf,
        #[arg(long, default_value_t = 2)]
        order: usize,
        /// Comma-separated center; the origin by default.
        #[arg(long)]
        center: Option<String>,
    },
    /// Write a seeded random pair of pencils as a.json and b.json.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        l: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Constant diagonal of B.
        #[arg(long, default_value_t = 2.0)]
        diag_b: f64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Render S_A over S_B in a plane as SVG.
    Render {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Coordinate plane (x_i, x_j), zero-based.
        #[arg(long, num_args = 2, value_names = ["I", "J"])]
        plane: Option<Vec<usize>>,
        /// First axis as a comma-separated direction; needs --v.
        #[arg(long, requires = "v", conflicts_with = "plane")]
        u: Option<String>,
        #[arg(long, requires = "u")]
        v: Option<String>,
        #[arg(long, value_enum, default_value = "slice")]
        mode: ModeArg,
        #[arg(long)]
        grid: Option<usize>,
        /// umin,umax,vmin,vmax
        #[arg(long)]
        extent: Option<String>,
        #[arg(long, default_value_t = 4)]
        cell_px: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a relaxation or the SDFP in SDPA sparse format.
    Export {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, value_enum, default_value = "moment")]
        what: ExportArg,
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long = "R", default_value_t = 2.0)]
        big_r: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute a reference table as CSV; exit 3 if a golden tolerance fails.
    Reproduce {
        #[arg(long)]
        table: u8,
        #[arg(long, value_enum, default_value = "desk")]
        scale: ScaleArg,
        /// CSV destination; stdout by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Check { a, b, method, order, sos_order, r, big_r, tol, no_reduce, out } => {
            let (pa, pb) = (read_pencil(&a)?, read_pencil(&b)?);
            let method = match method {
                MethodArg::Sdfp => Method::Sdfp,
                MethodArg::Moment => Method::Moment,
                MethodArg::Sos => Method::Sos,
                MethodArg::All => Method::All,
            };
            let cfg = CheckConfig { method, order, sos_order, r, big_r, tol, reduce: !no_reduce };
            let report = run_check(&pa, &pb, &cfg)?;
            print!("{}", report.summary());
            if let Some(path) = out {
                fs::write(&path, serde_json::to_string_pretty(&report)? + "\n").with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(report.exit_code)
        }
        Command::Radius { pencil, order, center } => {
            let p = read_pencil(&pencil)?;
            let c = match center {
                Some(text) => parse_vector(&text)?,
                None => vec![0.0; p.n()],
            };
            match circumradius_sq(&p, &c, order, &CheckOptions::default()) {
                Ok(out) => {
                    println!("{:.6}", out.radius_sq);
                    eprintln!(
                        "order {order}: status {:?}, residuals {:.1e}/{:.1e}/{:.1e}, {} iterations",
                        out.status, out.residuals.primal, out.residuals.dual, out.residuals.gap, out.iterations
                    );
                    Ok(0)
                }
                Err(Error::Unbounded) => {
                    println!("unbounded");
                    eprintln!("no finite bound at order {order}");
                    Ok(2)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Gen { n, k, l, seed, diag_b, out_dir } => {
            let (a, b, draws) = random_pair(n, k, l, diag_b, seed)?;
            fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            let (pa, pb) = (out_dir.join("a.json"), out_dir.join("b.json"));
            write_pencil(&pa, &a)?;
            write_pencil(&pb, &b)?;
            println!("{}\n{}", pa.display(), pb.display());
            eprintln!("seed {seed}: accepted draw {draws}");
            Ok(0)
        }
        Command::Render { a, b, plane, u, v, mode, grid, extent, cell_px, out } => {
            let (pa, pb) = (read_pencil(&a)?, read_pencil(&b)?);
            let mode = match mode {
                ModeArg::Slice => Mode::Slice,
                ModeArg::Project => Mode::Project,
            };
            let n = pa.n();
            let mut cfg = match (plane, u, v) {
                (Some(p), _, _) => RenderConfig::plane(n, p[0], p[1], mode)?,
                (None, Some(u), Some(v)) => RenderConfig { d1: parse_vector(&u)?, d2: parse_vector(&v)?, ..RenderConfig::plane(2, 0, 1, mode)? },
                _ if n == 2 => RenderConfig::plane(2, 0, 1, mode)?,
                _ => return Err(input_error(format!("the pencils have {n} variables; pass --plane I J or --u/--v"))),
            };
            cfg.grid = grid;
            cfg.cell_px = cell_px;
            if let Some(text) = extent {
                let e = parse_vector(&text)?;
                let e: [f64; 4] = e.try_into().map_err(|_| input_error("--extent needs four numbers"))?;
                cfg.extent = Some(e);
            }
            let raster = rasterize(&pa, &pb, &cfg)?;
            let title = format!("{} inside {}", a.display(), b.display());
            fs::write(&out, to_svg(&raster, &title, cfg.cell_px)).with_context(|| format!("writing {}", out.display()))?;
            println!("{}", out.display());
            Ok(0)
        }
        Command::Export { a, b, what, order, r, big_r, out } => {
            let (pa, pb) = (read_pencil(&a)?, read_pencil(&b)?);
            let problem = match what {
                ExportArg::Sdfp => cp_sdfp_problem(&pa, &pb, false)?,
                ExportArg::SdfpExtended => cp_sdfp_problem(&pa, &pb, true)?,
                ExportArg::Moment => build_containment_relaxation(&ContainmentProblem::with_radii(pa, pb, r, big_r)?, order)?.problem,
                ExportArg::Sos => build_sos_relaxation(&ContainmentProblem::with_radii(pa, pb, r, big_r)?, order)?.problem,
            };
            fs::write(&out, export_sdpa(&problem)).with_context(|| format!("writing {}", out.display()))?;
            println!("{}", out.display());
            Ok(0)
        }
        Command::Reproduce { table, scale, out } => {
            let scale = match scale {
                ScaleArg::Desk => Scale::Desk,
                ScaleArg::Full => Scale::Full,
            };
            let run = reproduce(table, scale, &CheckOptions::default())?;
            match out {
                Some(path) => fs::write(&path, &run.csv).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{}", run.csv),
            }
            eprintln!("table {}: {} rows in {:.1}s", run.table, run.rows, run.seconds);
            for f in &run.failures {
                eprintln!("golden mismatch: {f}");
            }
            Ok(if run.failures.is_empty() { 0 } else { EXIT_GOLDEN })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_INPUT as u8),
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
