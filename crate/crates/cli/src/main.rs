use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use iga_c2::basis::{assemble_space, boundary_residual, interface_jump};
use iga_c2::multipatch::load_domain;
use iga_c2::poly2d::SolutionId;
use iga_c2::study::{kappa_slope, run_study, SolutionSpec, StudyConfig};
use iga_c2::solver::ConditionMode;

#[derive(Parser)]
#[command(name = "iga-c2", version, about = "C2-smooth multi-patch splines and a triharmonic solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the discrete space and report its dimensions.
    Space {
        #[arg(long)]
        domain: PathBuf,
        #[arg(short)]
        p: usize,
        #[arg(short)]
        r: usize,
        #[arg(short)]
        k: usize,
        /// Write the basis as JSON.
        #[arg(long)]
        export: Option<PathBuf>,
        /// Sample smoothness and boundary conditions of every function.
        #[arg(long)]
        check: bool,
    },
    /// Run a refinement study for a manufactured solution.
    Solve {
        #[arg(long)]
        domain: PathBuf,
        #[arg(short)]
        p: usize,
        #[arg(short)]
        r: usize,
        /// Comma separated, ascending.
        #[arg(long, value_delimiter = ',', required = true)]
        klist: Vec<usize>,
        /// Built-in solution: a, b, c, d or rect.
        #[arg(long)]
        solution: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also estimate condition numbers.
        #[arg(long)]
        cond: bool,
    },
}

fn space(domain: PathBuf, p: usize, r: usize, k: usize, export: Option<PathBuf>, check: bool) -> Result<()> {
    let dom = load_domain(&domain).with_context(|| format!("loading {}", domain.display()))?;
    let basis = assemble_space(&dom, p, r, k)?;
    println!("patches:  {:?}", basis.patch_dims);
    println!("edges:    {:?}", basis.edge_dims);
    println!("vertices: {:?}", basis.vertex_dims);
    println!("dim:      {}", basis.dim());
    if let Some(path) = export {
        std::fs::write(&path, basis.export_json()?)?;
        println!("basis written to {}", path.display());
    }
    if check {
        let (mut jump, mut bnd) = (0.0f64, 0.0f64);
        for f in &basis.functions {
            jump = jump.max(interface_jump(&dom, &basis, f, 50)?);
            bnd = bnd.max(boundary_residual(&dom, &basis, f, 40)?);
        }
        let rank = basis.gram_rank(dom.patch_count());
        println!("max relative interface jump: {jump:.3e}");
        println!("max boundary residual:       {bnd:.3e}");
        println!("coefficient rank:            {rank} / {}", basis.dim());
        if jump >= 1e-9 || bnd >= 1e-10 || rank != basis.dim() {
            bail!("space check failed");
        }
    }
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.2}"))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Space { domain, p, r, k, export, check } => space(domain, p, r, k, export, check),
        Command::Solve { domain, p, r, klist, solution, out, cond } => {
            let id: SolutionId = solution.parse()?;
            let cfg = StudyConfig {
                domain,
                p,
                r,
                ks: klist,
                solution: SolutionSpec::Builtin(id),
                output: out,
                condition_numbers: cond,
                export_basis: None,
            };
            let report = run_study(&cfg)?;
            println!(
                "{:>4} {:>8} {:>7} {:>10} {:>10} {:>10} {:>10} {:>5} {:>5} {:>5} {:>5} {:>10} {:>10} {:>7} {:>9} {:>8}",
                "k", "h", "dim", "H0", "H1", "H2", "H3", "r0", "r1", "r2", "r3", "kappa", "kappa_D", "cg_it", "residual", "sec"
            );
            for row in &report.rows {
                if let Some(e) = &row.failure {
                    println!("{:>4} failed: {e}", row.k);
                    continue;
                }
                println!(
                    "{:>4} {:>8.5} {:>7} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e} {:>5} {:>5} {:>5} {:>5} {:>10} {:>10} {:>7} {:>9.2e} {:>8.2}",
                    row.k,
                    row.h,
                    row.dim,
                    row.err[0],
                    row.err[1],
                    row.err[2],
                    row.err[3],
                    fmt(row.rate[0]),
                    fmt(row.rate[1]),
                    fmt(row.rate[2]),
                    fmt(row.rate[3]),
                    row.kappa_raw.map_or("-".into(), |x| format!("{x:.3e}")),
                    row.kappa_jacobi.map_or("-".into(), |x| format!("{x:.3e}")),
                    row.iterations,
                    row.residual,
                    row.seconds
                );
            }
            if cond {
                println!(
                    "kappa slope vs h: raw {}, jacobi {}",
                    fmt(kappa_slope(&report.rows, ConditionMode::Raw)),
                    fmt(kappa_slope(&report.rows, ConditionMode::Jacobi))
                );
            }
            if report.rows.iter().any(|r| r.failure.is_some()) {
                bail!("some refinement levels failed");
            }
            Ok(())
        }
    }
}
