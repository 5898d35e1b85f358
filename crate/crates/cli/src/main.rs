use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use more_dwr::config::{load_config, preset, ExperimentConfig, PRESETS};
use more_dwr::driver::{run_full, Progress, RunMode, RunReport};
use more_dwr::output::write_traces;

#[derive(Parser)]
#[command(name = "more-dwr", version, about = "Adaptive POD reduced-order models with goal-oriented error control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the adaptive reduced-order model.
    Run(RunArgs),
    /// Run the adaptive model and a full-order reference, reporting true errors.
    Verify(RunArgs),
    /// List the built-in experiment presets.
    Presets,
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file or the name of a built-in preset.
    config: String,
    /// Relative estimator tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Energy threshold for both bases.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Output directory for the CSV traces and bases.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to MORE_DWR_THREADS, then 1.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Adaptive,
    Verification,
}

fn resolve_config(arg: &str) -> more_dwr::Result<ExperimentConfig> {
    if !Path::new(arg).exists() && PRESETS.iter().any(|(name, _)| *name == arg) {
        return preset(arg);
    }
    load_config(arg)
}

fn threads(flag: Option<usize>) -> Result<usize, String> {
    if let Some(n) = flag {
        return Ok(n.max(1));
    }
    match std::env::var("MORE_DWR_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(|n| n.max(1))
            .map_err(|_| format!("MORE_DWR_THREADS must be a positive integer, got `{v}`")),
        Err(_) => Ok(1),
    }
}

fn print_summary(cfg: &ExperimentConfig, report: &RunReport, out: &Path) {
    let opt = |x: Option<f64>, f: &dyn Fn(f64) -> String| x.map(f).unwrap_or_else(|| "-".into());
    println!("experiment        {}", cfg.name);
    println!("tolerance         {:.4}%", 100.0 * report.tol);
    println!("J(u_N)            {:.6e}", report.goal_rom);
    println!("J(u_h)            {}", opt(report.goal_fom, &|x| format!("{x:.6e}")));
    println!("relative error    {}", opt(report.relative_error, &|x| format!("{:.4}%", 100.0 * x)));
    println!("estimate          {:.6e}", report.eta_total);
    println!("effectivity       {}", opt(report.effectivity, &|x| format!("{x:.4}")));
    println!("FOM solves        {}", report.fom_solves);
    println!("basis size        {} | {}", report.primal_size, report.dual_size);
    if let Some(c) = report.confusion {
        println!("prediction        {} | {} | {} | {}", c[0], c[1], c[2], c[3]);
    }
    println!("wall time ROM     {:.3} s", report.wall_rom);
    println!("wall time FOM     {}", opt(report.wall_fom, &|x| format!("{x:.3} s")));
    println!("speedup           {}", opt(report.speedup, &|x| format!("{x:.2}")));
    for w in &report.warnings {
        println!("warning           {w}");
    }
    println!("traces            {}", out.display());
}

fn run(args: RunArgs, verify: bool) -> Result<(), String> {
    let mut cfg = resolve_config(&args.config).map_err(|e| e.to_string())?;
    if let Some(tol) = args.tol {
        cfg.rom.tol = tol;
    }
    if let Some(eps) = args.eps {
        cfg.rom.eps_primal = eps;
        cfg.rom.eps_dual = eps;
    }
    cfg.mode = match (verify, args.mode) {
        (true, _) => RunMode::Verification,
        (false, Some(ModeArg::Adaptive)) => RunMode::Adaptive,
        (false, Some(ModeArg::Verification)) => RunMode::Verification,
        (false, None) => cfg.mode,
    };
    if let Some(out) = args.out {
        cfg.output = Some(out);
    }
    cfg.validate().map_err(|e| e.to_string())?;
    let threads = threads(args.threads)?;
    let out = cfg.output.clone().unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));

    let fom = cfg.build_model().map_err(|e| e.to_string())?;
    let stderr = std::io::stderr();
    let mut lock = stderr.lock();
    let report = {
        let mut progress = Progress::new(Some(&mut lock as &mut dyn Write));
        run_full(&fom, &cfg.driver_config(threads), cfg.mode, &mut progress).map_err(|e| e.to_string())?
    };
    drop(lock);

    write_traces(&report, &out).map_err(|e| e.to_string())?;
    let save = |name: &str, basis: &more_dwr::pod::ReducedBasis| -> Result<(), String> {
        let file = std::fs::File::create(out.join(name)).map_err(|e| e.to_string())?;
        basis.write_to(&mut std::io::BufWriter::new(file)).map_err(|e| e.to_string())
    };
    save("primal_basis.bin", &report.primal_basis)?;
    save("dual_basis.bin", &report.dual_basis)?;
    let config_text = serde_json::to_string_pretty(&cfg).map_err(|e| e.to_string())?;
    std::fs::write(out.join("config.json"), config_text).map_err(|e| e.to_string())?;
    print_summary(&cfg, &report, &out);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args, false),
        Command::Verify(args) => run(args, true),
        Command::Presets => {
            for (name, _) in PRESETS {
                match preset(name) {
                    Ok(cfg) => println!(
                        "{name:<10} {:?}, {} spatial dofs per field, {} slabs",
                        cfg.equation,
                        cfg.mesh.cells.iter().map(|c| c * cfg.mesh.degree + 1).product::<usize>(),
                        cfg.time.slabs
                    ),
                    Err(e) => println!("{name:<10} invalid: {e}"),
                }
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
