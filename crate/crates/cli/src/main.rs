//! `bt`: command-line driver for the bounded-transport solver.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bt_core::femcore::{DcDiffusivity, DcOperator};
use bt_core::io::config::{MeshSource, VelocitySource};
use bt_core::io::{run, RunConfig, RunSummary, VtkData};
use bt_core::postproc::{field_stats, sample_line, write_line_csv, write_stats_csv};
use bt_core::xform::TransformKind;
use bt_core::{Error, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

#[derive(Parser, Debug)]
#[command(name = "bt", version, about = "Stabilized advection-reaction solver with bounded concentrations")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for assembly and element loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Execute the solve described by --config.
    Run,
    /// Solve the verification channel.
    Channel {
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        ny: Option<usize>,
        #[arg(long, value_enum, default_value_t = DcChoice::CwdQuad)]
        dc: DcChoice,
        #[arg(long, value_enum, default_value_t = TransformChoice::Upper)]
        transform: TransformChoice,
    },
    /// Print field statistics of a VTK solution.
    Stats {
        vtk: PathBuf,
        /// Scalar field name; all scalar fields when omitted.
        #[arg(long)]
        field: Option<String>,
    },
    /// Sample a scalar field of a VTK solution along a segment.
    Sample {
        vtk: PathBuf,
        #[arg(long, default_value = "c")]
        field: String,
        /// Start point, `x,y[,z]`.
        #[arg(long, value_parser = parse_point)]
        p0: [f64; 3],
        /// End point, `x,y[,z]`.
        #[arg(long, value_parser = parse_point)]
        p1: [f64; 3],
        #[arg(long, default_value_t = 101)]
        n: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DcChoice {
    None,
    IsoLin,
    IsoQuad,
    CwdLin,
    CwdQuad,
    Codina,
}

impl DcChoice {
    fn settings(self) -> (DcOperator, DcDiffusivity) {
        match self {
            DcChoice::None => (DcOperator::None, DcDiffusivity::default()),
            DcChoice::IsoLin => (DcOperator::Isotropic, DcDiffusivity::DcLin),
            DcChoice::IsoQuad => (DcOperator::Isotropic, DcDiffusivity::DcQuad),
            DcChoice::CwdLin => (DcOperator::CwdReference, DcDiffusivity::DcLin),
            DcChoice::CwdQuad => (DcOperator::CwdReference, DcDiffusivity::DcQuad),
            DcChoice::Codina => (DcOperator::CwdPhysical, DcDiffusivity::Codina),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TransformChoice {
    Identity,
    Upper,
}

fn parse_point(s: &str) -> std::result::Result<[f64; 3], String> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|e| e.to_string())?;
    if !(2..=3).contains(&v.len()) {
        return Err(format!("expected 2 or 3 coordinates, got {}", v.len()));
    }
    let mut p = [0.0; 3];
    p[..v.len()].copy_from_slice(&v);
    Ok(p)
}

fn absolute(p: &Path) -> PathBuf {
    std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.to_path_buf())
}

fn load_config(cli: &Cli, required: bool) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None if required => return Err(Error::invalid("--config", "the run command needs a configuration file")),
        None => RunConfig {
            base_dir: absolute(Path::new(".")),
            ..RunConfig::default()
        },
    };
    if let Some(out) = &cli.out {
        cfg.output.dir = absolute(out);
    }
    Ok(cfg)
}

fn report(summary: &RunSummary) {
    let s = &summary.stats;
    println!(
        "min={:e} max={:e} negative_nodes={} negative_volume_fraction={:e}",
        s.min, s.max, s.negative_node_count, s.negative_volume_fraction
    );
    if let Some(o) = &summary.outflow {
        println!("outflow '{}': IH={:e} dPHb={:e}", o.marker, o.ih, o.delta_phb);
    }
    for p in &summary.artifacts {
        info!("wrote {}", p.display());
    }
}

fn scalar(data: &VtkData, path: &Path, field: &str) -> Result<Vec<f64>> {
    data.scalars(field).map(<[f64]>::to_vec).ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        msg: format!("no scalar field named '{field}'"),
    })
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run => report(&run(&load_config(cli, true)?)?),
        Command::Channel { nx, ny, dc, transform } => {
            let mut cfg = load_config(cli, false)?;
            cfg.mesh.source = MeshSource::Channel;
            cfg.velocity.source = VelocitySource::Channel;
            cfg.mesh.nx = nx.unwrap_or(cfg.mesh.nx);
            cfg.mesh.ny = ny.unwrap_or(cfg.mesh.ny);
            (cfg.dc.operator, cfg.dc.diffusivity) = dc.settings();
            cfg.transform.kind = match transform {
                TransformChoice::Identity => TransformKind::Identity,
                TransformChoice::Upper => TransformKind::UpperBound,
            };
            report(&run(&cfg)?);
        }
        Command::Stats { vtk, field } => {
            let data = VtkData::read(vtk)?;
            let mesh = data.to_mesh()?;
            let names: Vec<String> = match field {
                Some(f) => vec![f.clone()],
                None => data.scalar_names(),
            };
            let mut rows = Vec::new();
            for name in names {
                let values = scalar(&data, vtk, &name)?;
                rows.push((name, field_stats(&mesh, &values)?));
            }
            match &cli.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                    write_stats_csv(&dir.join("stats.csv"), &rows)?;
                }
                None => {
                    println!("field,min,max,negative_node_count,negative_volume_fraction");
                    for (name, s) in &rows {
                        println!("{name},{:e},{:e},{},{:e}", s.min, s.max, s.negative_node_count, s.negative_volume_fraction);
                    }
                }
            }
        }
        Command::Sample { vtk, field, p0, p1, n } => {
            let data = VtkData::read(vtk)?;
            let values = scalar(&data, vtk, field)?;
            let samples = sample_line(&data.to_mesh()?, &values, *p0, *p1, *n)?;
            match &cli.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                    write_line_csv(&dir.join(format!("line_{field}.csv")), &samples)?;
                }
                None => {
                    println!("s,value");
                    for p in samples {
                        match p.value {
                            Some(v) => println!("{:e},{v:e}", p.s),
                            None => println!("{:e},", p.s),
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BT_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
