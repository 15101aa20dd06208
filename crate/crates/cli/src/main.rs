use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use curvlaw_core::runner::{
    build_model, compare, load_scenario, mesh_csv, oracle_csv, oracle_table, output_root, report_text, run_scenario,
    simulate, verify_run,
};
use curvlaw_core::scenario::Method;
use curvlaw_core::Error;

#[derive(Parser)]
#[command(name = "curvlaw", version, about = "Scalar conservation laws on curved manifolds")]
struct Cli {
    /// Worker threads for the solver kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts under $CURVLAW_OUT (default ./out).
    Run { config: PathBuf },
    /// Recheck the properties of a stored run directory.
    Verify { run_dir: PathBuf },
    /// L^p distance series between two stored trajectories.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Exponent; `inf` for the maximum norm.
        #[arg(long, default_value = "1")]
        p: f64,
    },
    /// Compare the finite-volume run with the characteristics solution.
    Oracle { config: PathBuf },
    /// Print the mesh cells of a scenario as CSV.
    MeshDump { config: PathBuf },
}

/// Exit codes: 0 pass, 1 property failure, 2 invalid input, 3 solver abort.
fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = match e.downcast_ref::<Error>() {
                Some(Error::Config(_) | Error::Data { .. } | Error::Io(_) | Error::Mismatch(_)) => 2,
                Some(_) => 3,
                None => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn verdict_code(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn dispatch(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Run { config } => {
            let s = load_scenario(&config).with_context(|| format!("reading {}", config.display()))?;
            let root = output_root();
            let summary = run_scenario(&s, &root).with_context(|| format!("running {}", s.name))?;
            print!("{}", summary.report);
            println!("artifacts in {}", summary.directory.display());
            Ok(verdict_code(summary.pass))
        }
        Command::Verify { run_dir } => {
            let (run, v) = verify_run(&run_dir).with_context(|| format!("verifying {}", run_dir.display()))?;
            print!("{}", report_text(&run.scenario.name, &v));
            Ok(verdict_code(v.pass()))
        }
        Command::Compare { a, b, p } => {
            let series = compare(&a, &b, p)?;
            println!("time,distance");
            for (t, d) in series {
                println!("{t:.16e},{d:.16e}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { config } => {
            let mut s = load_scenario(&config).with_context(|| format!("reading {}", config.display()))?;
            match s.solver.method {
                Method::Fv | Method::Oracle => s.solver.method = Method::Oracle,
                m => bail!("the oracle compares finite-volume runs, scenario uses `{}`", m.name()),
            }
            let model = build_model(&s)?;
            let members = simulate(&s, &model)?;
            let table = oracle_table(&s, &members[0])?;
            let dir = output_root().join(&s.output);
            std::fs::create_dir_all(&dir)?;
            let path = dir.join("oracle.csv");
            std::fs::write(&path, oracle_csv(&table))?;
            println!(
                "t={} L1 error {:.6e} max|diff| {:.6e} dx {:.6e}",
                table.time, table.l1_error, table.max_diff, table.dx
            );
            println!("table in {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::MeshDump { config } => {
            let s = load_scenario(&config).with_context(|| format!("reading {}", config.display()))?;
            print!("{}", mesh_csv(build_model(&s)?.mesh()));
            Ok(ExitCode::SUCCESS)
        }
    }
}
