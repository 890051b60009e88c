use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use solidcast::app::{run_campaign, run_deterministic, AppError, CampaignConfig, RunConfig};
use solidcast::mesh::Mesh;

#[derive(Parser)]
#[command(name = "solidcast", version, about = "Alloy solidification with natural convection and uncertainty campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one deterministic simulation.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Solve conduction only.
        #[arg(long)]
        no_convection: bool,
    },
    /// Run a sparse-grid uncertainty campaign.
    Campaign {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Override the sparse-grid level of the configuration.
        #[arg(long)]
        level: Option<usize>,
        #[arg(long)]
        no_convection: bool,
    },
    /// Print mesh statistics.
    MeshInfo { msh: PathBuf },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Run { config, out, no_convection } => {
            let mut cfg = RunConfig::load(&config)?;
            cfg.options.convection &= !no_convection;
            let r = run_deterministic(&cfg, Some(&out))?;
            println!(
                "{} steps to t = {:.6} s{}",
                r.state.step,
                r.state.time,
                if r.stopped_solid { " (fully solid)" } else { "" }
            );
            for (f, v) in &r.functionals {
                println!("{:<28}{v}", f.name());
            }
            println!("results written to {}", out.display());
        }
        Command::Campaign { config, out, workers, level, no_convection } => {
            let mut cfg = CampaignConfig::load(&config)?;
            if let Some(l) = level {
                cfg.level = l.max(1);
            }
            cfg.base.options.convection &= !no_convection;
            let r = run_campaign(&cfg, workers, &out)?;
            println!("level {}: {} samples ({} evaluated), order {}", cfg.level, r.grid.len(), r.evaluated, cfg.pce_order());
            for (k, f) in r.outputs.iter().enumerate() {
                let m = &r.models[k];
                print!("{:<28}mean {:.6e}  sd {:.6e}", f.name(), m.mean(), m.variance().sqrt());
                if let Some(s) = &r.sobol[k] {
                    let totals: Vec<String> =
                        cfg.inputs.iter().zip(&s.total).map(|(i, t)| format!("{}={t:.3}", i.name)).collect();
                    print!("  total Sobol {}", totals.join(" "));
                }
                if let Some(v) = &r.validation {
                    print!("  test error {:.3e}", v[k]);
                }
                println!();
            }
            println!("results written to {}", out.display());
        }
        Command::MeshInfo { msh } => {
            let mesh = Mesh::load_msh(&msh)?;
            let (lo, hi) = mesh.bounding_box();
            println!("cells     {}", mesh.n_cells());
            println!("faces     {} ({} boundary)", mesh.n_faces(), mesh.boundary_faces().count());
            println!("vertices  {}", mesh.vertices.len());
            println!("volume    {:e} m^3", mesh.total_volume());
            println!("bounds    [{}, {}, {}] - [{}, {}, {}] m", lo.x, lo.y, lo.z, hi.x, hi.y, hi.z);
            for p in &mesh.patches {
                println!("patch     {:<16}{} faces", p.name, p.faces.len());
            }
        }
    }
    Ok(())
}
