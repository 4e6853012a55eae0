//! Command-line interface.

use std::fs;
use std::path::{Path, PathBuf};

use camloc_core::annotation::AnnotationBundle;
use camloc_core::extrinsics::{CarDimensions, DEFAULT_CLUSTER_RADIUS_M};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::app::{self, AbsoluteContext, RefsDoc, RunOptions};
use crate::error::{AppError, AppResult};
use crate::map::parse_map;
use crate::measure::{self, SensorKind};
use crate::result::ResultDoc;
use crate::schema::{parse_bundle, parse_doc, refs_to_core, to_canonical};
use crate::sweep::{run_sweep, table, SweepConfig};

#[derive(Debug, Parser)]
#[command(name = "camloc", version, about = "Street camera calibration and localization from annotations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Intrinsics, pose and relative camera position from annotation bundles.
    Relative {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Absolute candidate locations from references or map context.
    Absolute {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        context: ContextArgs,
        /// Entry id when the map extract holds several.
        #[arg(long)]
        id: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure with a calibrated camera.
    Sensors {
        #[arg(value_enum)]
        kind: SensorArg,
        /// Result document from `relative` or `absolute`.
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        points: PathBuf,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded synthetic error sweep.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// HTTP service for the annotation UI.
    Serve {
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Glob of bundle documents, one bundle per file.
    #[arg(long)]
    pub bundles: String,
    /// Car length, width and height in meters.
    #[arg(long, value_name = "L,W,H", value_parser = parse_dims)]
    pub dims: Option<CarDimensions>,
    #[arg(long, value_name = "M", default_value_t = DEFAULT_CLUSTER_RADIUS_M)]
    pub cluster_radius: f64,
    /// Bearing of the street the car is parked along, degrees from north.
    #[arg(long, value_name = "DEG", allow_negative_numbers = true)]
    pub street_bearing: Option<f64>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ContextArgs {
    #[arg(long)]
    pub refs: Option<PathBuf>,
    /// Map extract holding the intersection corners.
    #[arg(long)]
    pub intersection: Option<PathBuf>,
    /// Map extract holding the landmark footprint.
    #[arg(long)]
    pub landmark: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SensorArg {
    Scale,
    Height,
    Speed,
}

impl From<SensorArg> for SensorKind {
    fn from(s: SensorArg) -> Self {
        match s {
            SensorArg::Scale => SensorKind::Scale,
            SensorArg::Height => SensorKind::Height,
            SensorArg::Speed => SensorKind::Speed,
        }
    }
}

pub fn parse_dims(s: &str) -> Result<CarDimensions, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    let [l, w, h] = parts[..] else {
        return Err("expected L,W,H".into());
    };
    CarDimensions::new(l, w, h).map_err(|e| e.to_string())
}

fn read(path: &Path) -> AppResult<Vec<u8>> {
    fs::read(path).map_err(|e| AppError::io(path, e))
}

fn write(path: &Path, contents: &str) -> AppResult<()> {
    fs::write(path, contents).map_err(|e| AppError::io(path, e))
}

/// Bundles matching `pattern`, in path order.
pub fn load_bundles(pattern: &str) -> AppResult<Vec<AnnotationBundle>> {
    let paths = glob::glob(pattern).map_err(|e| AppError::Usage {
        message: format!("bad glob `{pattern}`: {e}"),
        field_path: None,
    })?;
    let mut paths: Vec<PathBuf> = paths.filter_map(Result::ok).filter(|p| p.is_file()).collect();
    paths.sort();
    if paths.is_empty() {
        return Err(AppError::usage(format!("no bundle files match `{pattern}`")));
    }
    paths
        .iter()
        .map(|p| parse_bundle(&read(p)?).map_err(|e| e.in_file(p)))
        .collect()
}

fn options(run: &RunArgs) -> RunOptions {
    RunOptions {
        dims: run.dims,
        cluster_radius_m: run.cluster_radius,
        street_bearing_deg: run.street_bearing,
    }
}

fn context(c: &ContextArgs, id: Option<&str>) -> AppResult<(AbsoluteContext, Option<f64>)> {
    if let Some(p) = &c.refs {
        let doc: RefsDoc = parse_doc(&read(p)?).map_err(|e| e.in_file(p))?;
        let refs = refs_to_core(&doc.refs, "refs").map_err(|e| e.in_file(p))?;
        return Ok((AbsoluteContext::Refs(refs), doc.street_bearing_deg));
    }
    if let Some(p) = &c.intersection {
        let m = parse_map(&read(p)?).map_err(|e| e.in_file(p))?;
        return Ok((AbsoluteContext::Intersection(m.intersection(id)?.clone()), None));
    }
    if let Some(p) = &c.landmark {
        let m = parse_map(&read(p)?).map_err(|e| e.in_file(p))?;
        return Ok((AbsoluteContext::Landmark(m.landmark(id)?.clone()), None));
    }
    Err(AppError::usage("one of --refs, --intersection, --landmark is required"))
}

pub fn run(cli: Cli) -> AppResult<()> {
    match cli.command {
        Command::Relative { run, out } => {
            let bundles = load_bundles(&run.bundles)?;
            let r = app::relative(&bundles, &options(&run))?;
            write(&out, &to_canonical(&ResultDoc::from(&r)))
        }
        Command::Absolute { run, context: c, id, out } => {
            let bundles = load_bundles(&run.bundles)?;
            let (ctx, bearing) = context(&c, id.as_deref())?;
            let mut opts = options(&run);
            opts.street_bearing_deg = opts.street_bearing_deg.or(bearing);
            let r = app::absolute(&bundles, &opts, &ctx)?;
            write(&out, &to_canonical(&ResultDoc::from(&r)))
        }
        Command::Sensors {
            kind,
            result,
            points,
            out,
        } => {
            let doc: ResultDoc = parse_doc(&read(&result)?).map_err(|e| e.in_file(&result))?;
            let (k, pose) = doc.camera().to_core("camera").map_err(|e| e.in_file(&result))?;
            let m = measure::measure(kind.into(), &k, &pose, &read(&points)?).map_err(|e| e.in_file(&points))?;
            let text = to_canonical(&m);
            match out {
                Some(p) => write(&p, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Synth { config, out } => {
            let cfg: SweepConfig = parse_doc(&read(&config)?).map_err(|e| e.in_file(&config))?;
            let report = run_sweep(&cfg)?;
            print!("{}", table(&report));
            write(&out, &to_canonical(&report))
        }
        Command::Serve { port, host } => {
            let rt = tokio::runtime::Runtime::new().map_err(|e| AppError::io("tokio runtime", e))?;
            rt.block_on(crate::service::serve(&host, port))
        }
    }
}
