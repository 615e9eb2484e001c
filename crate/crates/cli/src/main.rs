//! Batch command-line driver: sample meshes into layered depth-normal
//! images, combine and offset them, contour them back to meshes, and
//! measure surface error between meshes. One subcommand per operation;
//! results go to files, reports to stdout. Failures print a single
//! machine-parsable `error: <Tag>: <message>` line on stderr and exit 1
//! (operation failures) or 2 (usage errors).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ldni::{
    boolean_solid, bounding_cube, bounding_cube_of, contour, offset_solid, sample_solid, stats,
    symmetric_surface_distance, BooleanConfig, BooleanOp, ContourError, CsgError, GridError,
    GridSpec, LdniSolid, MeshError, MetricsError, NormalMode, Normalization, SampleError,
    TriangleMesh, AXES,
};
use ldni_cli::{read_ldni, read_mesh, write_ldni, write_mesh_auto, LdniFileError, MeshIoError};

/// Solid modeling on layered depth-normal images.
#[derive(Parser)]
#[command(name = "ldni", version, disable_help_subcommand = true)]
struct Cli {
    /// Worker threads for the sampling/boolean/contouring kernels
    /// (default: the LDNI_THREADS environment variable, else all cores).
    /// Output is identical for any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a closed triangle mesh into a solid on a cubic grid.
    Sample {
        /// Input mesh (.obj or .stl).
        #[arg(long = "in")]
        input: PathBuf,
        /// Grid resolution (pixels per side).
        #[arg(long)]
        res: u32,
        /// Normal storage mode.
        #[arg(long, value_enum, default_value_t = NormalsArg::Accurate)]
        normals: NormalsArg,
        /// Empty margin around the mesh, as a fraction of the cube width.
        #[arg(long, default_value_t = 0.05)]
        padding: f64,
        /// Output solid file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Boolean of two solids sampled on the identical grid.
    Boolean {
        /// Operation to apply.
        #[arg(long, value_enum)]
        op: OpArg,
        /// First operand as a solid file (requires --b).
        #[arg(long)]
        a: Option<PathBuf>,
        /// Second operand as a solid file (requires --a).
        #[arg(long)]
        b: Option<PathBuf>,
        /// First operand as a mesh, co-sampled with --mesh-b on one shared
        /// grid (requires --mesh-b and --res).
        #[arg(long)]
        mesh_a: Option<PathBuf>,
        /// Second operand as a mesh (requires --mesh-a and --res).
        #[arg(long)]
        mesh_b: Option<PathBuf>,
        /// Grid resolution for co-sampling.
        #[arg(long)]
        res: Option<u32>,
        /// Normal storage mode for co-sampling.
        #[arg(long, value_enum, default_value_t = NormalsArg::Accurate)]
        normals: NormalsArg,
        /// Empty margin for co-sampling, as a fraction of the cube width.
        #[arg(long, default_value_t = 0.05)]
        padding: f64,
        /// Minimum surviving interval thickness.
        #[arg(long, default_value_t = 1e-5)]
        epsilon: f64,
        /// Output solid file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Offset a solid by a radius (outward if positive, inward if negative).
    Offset {
        /// Input solid file.
        #[arg(long = "in")]
        input: PathBuf,
        /// Offset radius in model units.
        #[arg(long)]
        r: f64,
        /// Minimum surviving interval thickness.
        #[arg(long, default_value_t = 1e-5)]
        epsilon: f64,
        /// Output solid file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct a watertight triangle mesh from a solid.
    Contour {
        /// Input solid file.
        #[arg(long = "in")]
        input: PathBuf,
        /// Output mesh (.obj or .stl).
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure the symmetric surface distance between two meshes.
    Measure {
        /// First mesh.
        #[arg(long)]
        a: PathBuf,
        /// Second mesh.
        #[arg(long)]
        b: PathBuf,
        /// Interior sample points per unit surface area
        /// (default: about 200000 points spread over both meshes).
        #[arg(long)]
        density: Option<f64>,
    },
    /// Print storage statistics of a solid, or dump its samples as points.
    Info {
        /// Input solid file.
        #[arg(long = "in")]
        input: PathBuf,
        /// Emit one "x y z nx ny nz" line per sample instead of statistics.
        #[arg(long)]
        dump_points: bool,
    },
}

/// Normal storage mode flag.
#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum NormalsArg {
    /// Full-precision normals (12 bytes per sample).
    Accurate,
    /// Signed-byte normals (3 bytes per sample).
    Quant8,
}

impl From<NormalsArg> for NormalMode {
    fn from(a: NormalsArg) -> NormalMode {
        match a {
            NormalsArg::Accurate => NormalMode::Accurate,
            NormalsArg::Quant8 => NormalMode::Quantized8,
        }
    }
}

/// Boolean operation flag.
#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum OpArg {
    Union,
    Intersect,
    Difference,
}

impl From<OpArg> for BooleanOp {
    fn from(a: OpArg) -> BooleanOp {
        match a {
            OpArg::Union => BooleanOp::Union,
            OpArg::Intersect => BooleanOp::Intersection,
            OpArg::Difference => BooleanOp::Difference,
        }
    }
}

/// Any failure a subcommand can hit, tagged for single-line reporting.
#[derive(Debug)]
enum CliError {
    MeshIo(MeshIoError),
    LdniFile(LdniFileError),
    Sample(SampleError),
    Csg(CsgError),
    Contour(ContourError),
    Metrics(MetricsError),
    Grid(GridError),
    Mesh(MeshError),
    /// Flag combinations clap's declarative rules cannot express.
    Usage(String),
}

impl CliError {
    /// Stable machine-parsable tag naming the failure kind.
    fn tag(&self) -> &'static str {
        match self {
            CliError::MeshIo(e) => match e {
                MeshIoError::Io(_) => "Io",
                MeshIoError::Parse { .. } => "Parse",
                MeshIoError::NonTriangulablePolygon { .. } => "NonTriangulablePolygon",
                MeshIoError::UnknownExtension(_) => "UnknownExtension",
                MeshIoError::InvalidMesh(_) => "InvalidMesh",
            },
            CliError::LdniFile(e) => match e {
                LdniFileError::Io(_) => "Io",
                LdniFileError::BadMagic => "BadMagic",
                LdniFileError::VersionUnsupported(_) => "VersionUnsupported",
                LdniFileError::BadNormalMode(_) => "BadNormalMode",
                LdniFileError::BadGrid(_) => "BadGrid",
                LdniFileError::TruncatedFile => "TruncatedFile",
                LdniFileError::ParityViolation { .. } => "ParityViolation",
            },
            CliError::Sample(e) => match e {
                SampleError::OpenMesh(_) => "OpenMesh",
                SampleError::MeshOutsideGrid => "MeshOutsideGrid",
                SampleError::ParityViolation { .. } => "ParityViolation",
                SampleError::DegenerateColumn { .. } => "DegenerateColumn",
                SampleError::OutOfGrid => "OutOfGrid",
                SampleError::ImageMismatch => "ImageMismatch",
            },
            CliError::Csg(e) => match e {
                CsgError::GridMismatch => "GridMismatch",
                CsgError::NormalModeMismatch => "NormalModeMismatch",
                CsgError::OffsetOverflow => "OffsetOverflow",
                CsgError::ZeroRadius => "ZeroRadius",
            },
            CliError::Contour(e) => match e {
                ContourError::MissingCluster { .. } => "MissingCluster",
                ContourError::EmptyOutput => "EmptyOutput",
            },
            CliError::Metrics(e) => match e {
                MetricsError::EmptyMesh => "EmptyMesh",
            },
            CliError::Grid(e) => match e {
                GridError::BadResolution(_) => "BadResolution",
                GridError::BadWidth => "BadWidth",
            },
            CliError::Mesh(e) => match e {
                MeshError::IndexOutOfRange { .. } => "IndexOutOfRange",
                MeshError::Empty => "EmptyMesh",
            },
            CliError::Usage(_) => "Usage",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::MeshIo(e) => write!(f, "{e}"),
            CliError::LdniFile(e) => write!(f, "{e}"),
            CliError::Sample(e) => write!(f, "{e}"),
            CliError::Csg(e) => write!(f, "{e}"),
            CliError::Contour(e) => write!(f, "{e}"),
            CliError::Metrics(e) => write!(f, "{e}"),
            CliError::Grid(e) => write!(f, "{e}"),
            CliError::Mesh(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "{m}"),
        }
    }
}

macro_rules! from_error {
    ($variant:ident, $ty:ty) => {
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::$variant(e)
            }
        }
    };
}

from_error!(MeshIo, MeshIoError);
from_error!(LdniFile, LdniFileError);
from_error!(Sample, SampleError);
from_error!(Csg, CsgError);
from_error!(Contour, ContourError);
from_error!(Metrics, MetricsError);
from_error!(Grid, GridError);
from_error!(Mesh, MeshError);

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("LDNI_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    if let Some(n) = threads {
        // Ignore the error if a pool already exists (e.g. under a test
        // harness); results do not depend on the thread count.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.tag(), e);
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Sample {
            input,
            res,
            normals,
            padding,
            out,
        } => {
            let mesh = read_mesh(&input)?;
            let solid = sample_on_bounding_cube(&mesh, res, padding, normals.into())?;
            write_ldni(&solid, &out)?;
            report_solid(&solid, &out);
            Ok(())
        }
        Command::Boolean {
            op,
            a,
            b,
            mesh_a,
            mesh_b,
            res,
            normals,
            padding,
            epsilon,
            out,
        } => {
            let cfg = BooleanConfig { epsilon };
            let (sa, sb) = boolean_operands(a, b, mesh_a, mesh_b, res, normals, padding)?;
            let solid = boolean_solid(&sa, &sb, op.into(), cfg)?;
            write_ldni(&solid, &out)?;
            report_solid(&solid, &out);
            Ok(())
        }
        Command::Offset {
            input,
            r,
            epsilon,
            out,
        } => {
            let solid = read_ldni(&input)?;
            let result = offset_solid(&solid, r, BooleanConfig { epsilon })?;
            write_ldni(&result, &out)?;
            report_solid(&result, &out);
            Ok(())
        }
        Command::Contour { input, out } => {
            let solid = read_ldni(&input)?;
            let mesh = contour(&solid)?;
            write_mesh_auto(&mesh, &out)?;
            println!(
                "wrote {} ({} vertices, {} faces)",
                out.display(),
                mesh.vertices().len(),
                mesh.faces().len()
            );
            Ok(())
        }
        Command::Measure { a, b, density } => {
            let mesh_a = read_mesh(&a)?;
            let mesh_b = read_mesh(&b)?;
            let density = density.unwrap_or_else(|| {
                2e5 / (mesh_a.surface_area() + mesh_b.surface_area()).max(f64::MIN_POSITIVE)
            });
            let report = symmetric_surface_distance(&mesh_a, &mesh_b, density)?;
            println!("e_max {}", report.e_max);
            println!("e_mean {}", report.e_mean);
            println!("sample_count {}", report.sample_count);
            let normalization = match report.normalization {
                Normalization::Absolute => "absolute",
                Normalization::BBoxDiagonal => "bbox-diagonal",
            };
            println!("normalization {normalization}");
            Ok(())
        }
        Command::Info { input, dump_points } => {
            let solid = read_ldni(&input)?;
            if dump_points {
                dump_sample_points(&solid);
            } else {
                print_stats(&solid);
            }
            Ok(())
        }
    }
}

/// Fit a grid of the given resolution around the mesh and sample it.
fn sample_on_bounding_cube(
    mesh: &TriangleMesh,
    res: u32,
    padding: f64,
    mode: NormalMode,
) -> Result<LdniSolid, CliError> {
    let (origin, width) = bounding_cube(mesh, padding);
    let grid = GridSpec::new(origin, width, res)?;
    Ok(sample_solid(mesh, &grid, mode)?)
}

/// Resolve the two boolean operands: either two solid files, or two meshes
/// co-sampled on one shared grid so their columns align exactly.
#[allow(clippy::too_many_arguments)]
fn boolean_operands(
    a: Option<PathBuf>,
    b: Option<PathBuf>,
    mesh_a: Option<PathBuf>,
    mesh_b: Option<PathBuf>,
    res: Option<u32>,
    normals: NormalsArg,
    padding: f64,
) -> Result<(LdniSolid, LdniSolid), CliError> {
    match (a, b, mesh_a, mesh_b) {
        (Some(a), Some(b), None, None) => {
            if res.is_some() {
                return Err(CliError::Usage(
                    "--res applies only to co-sampling with --mesh-a/--mesh-b".into(),
                ));
            }
            Ok((read_ldni(&a)?, read_ldni(&b)?))
        }
        (None, None, Some(ma), Some(mb)) => {
            let res = res.ok_or_else(|| {
                CliError::Usage("co-sampling with --mesh-a/--mesh-b requires --res".into())
            })?;
            let mesh_a = read_mesh(&ma)?;
            let mesh_b = read_mesh(&mb)?;
            let (origin, width) = bounding_cube_of(&[&mesh_a, &mesh_b], padding);
            let grid = GridSpec::new(origin, width, res)?;
            let mode: NormalMode = normals.into();
            Ok((
                sample_solid(&mesh_a, &grid, mode)?,
                sample_solid(&mesh_b, &grid, mode)?,
            ))
        }
        _ => Err(CliError::Usage(
            "give both operands the same way: --a/--b (solid files) or \
             --mesh-a/--mesh-b with --res (meshes co-sampled on one grid)"
                .into(),
        )),
    }
}

fn report_solid(solid: &LdniSolid, out: &Path) {
    println!(
        "wrote {} ({} samples)",
        out.display(),
        solid.total_samples()
    );
}

fn print_stats(solid: &LdniSolid) {
    let grid = solid.grid();
    let st = stats(solid);
    println!("resolution {}", grid.resolution);
    println!(
        "origin {} {} {}",
        grid.origin.x, grid.origin.y, grid.origin.z
    );
    println!("width {}", grid.width);
    let mode = match solid.normal_mode() {
        NormalMode::Accurate => "accurate",
        NormalMode::Quantized8 => "quant8",
    };
    println!("normal_mode {mode}");
    println!("total_samples {}", st.total_samples);
    println!(
        "max_layers {} {} {}",
        st.max_layers[0], st.max_layers[1], st.max_layers[2]
    );
    println!("bytes_estimate {}", st.bytes_estimate);
}

/// One "x y z nx ny nz" line per stored sample, over all three images.
fn dump_sample_points(solid: &LdniSolid) {
    use std::io::Write;
    let grid = solid.grid();
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    for axis in AXES {
        let image = solid.image(axis);
        let origin_along = grid.origin[axis.index()];
        for (u, v, column) in image.columns() {
            let (cu, cv) = grid.ray_uv(axis, u, v);
            for s in column {
                let p = axis.unproject(origin_along + s.depth as f64, cu, cv);
                let n = s.normal;
                writeln!(out, "{} {} {} {} {} {}", p.x, p.y, p.z, n.x, n.y, n.z)
                    .expect("stdout write");
            }
        }
    }
}
