use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use paratensor::czd::LambdaSpec;
use paratensor::datasets::Ordering;
use paratensor::paraproduct::Lattice;
use paratensor::{ScaleTuple, SmoothMap};

#[derive(Parser, Debug)]
#[command(
    name = "paratensor",
    version,
    about = "Tensor Haar paraproduct decompositions on dyadic grids"
)]
pub struct Cli {
    /// Worker threads for the parallel kernels.
    #[arg(long, env = "PARATENSOR_THREADS", global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Split A(f) into its multiscale approximation and residual.
    Decompose(DecomposeArgs),
    /// Heat and potential kernels on random point clouds.
    KernelDemo(KernelDemoArgs),
    /// Cone singularity detection through a band-wise distortion.
    ConeDemo(ConeDemoArgs),
    /// Calderón-Zygmund split of one order of the expansion at one scale.
    CzSplit(CzSplitArgs),
    /// Mixed-Hölder decay report of a tensor.
    Regularity(RegularityArgs),
    /// Synthetic mixed-Hölder field.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    /// DTF base path (reads `<base>.json` and `<base>.bin`).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long, default_value = "heat:eps=1")]
    pub map: SmoothMap,
    /// Scales per axis, e.g. `6,6`; defaults to the full grid depth.
    #[arg(long)]
    pub scales: Option<ScaleTuple>,
    #[arg(long)]
    pub center_means: bool,
    /// Also write every partition term.
    #[arg(long)]
    pub retain_terms: bool,
    #[arg(long, default_value = "full")]
    pub lattice: Lattice,
    /// Drop partitions with more blocks than this.
    #[arg(long)]
    pub max_order: Option<usize>,
}

#[derive(Args, Debug)]
pub struct KernelDemoArgs {
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long, default_value_t = 512)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "pca1")]
    pub ordering: Ordering,
    /// Heat kernel width.
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
    #[arg(long, value_delimiter = ',', default_value = "2000,6000,10000")]
    pub ks: Vec<usize>,
    /// Distance floor; defaults to 1e-3 of the cube diameter.
    #[arg(long)]
    pub floor: Option<f64>,
    #[arg(long)]
    pub center_means: bool,
}

#[derive(Args, Debug)]
pub struct ConeDemoArgs {
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "256,256,128")]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 0.3)]
    pub alpha: f64,
    #[arg(long, default_value_t = 200)]
    pub top_k: usize,
    /// Time indices; defaults to 15,70,115 rescaled to the time axis.
    #[arg(long, value_delimiter = ',')]
    pub slices: Option<Vec<usize>>,
    /// Smallest wavelet scale eligible for detection; defaults to depth - 3.
    #[arg(long)]
    pub min_scale: Option<usize>,
    #[arg(long, default_value_t = 1.0 / 32.0)]
    pub ring_halfwidth: f64,
}

#[derive(Args, Debug)]
pub struct CzSplitArgs {
    /// DTF base path; without it the heat-kernel distance matrix is generated.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long, default_value = "heat:eps=1")]
    pub map: SmoothMap,
    /// Box scale `j`.
    #[arg(long, default_value = "4,4")]
    pub scale: ScaleTuple,
    /// Number of blocks in the partitions kept.
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    /// `0.01`, `inf`, `holder` (exponent estimated from the input) or `holder:alpha=0.3`.
    #[arg(long, default_value = "holder")]
    pub lambda: LambdaSpec,
    #[arg(long)]
    pub center_means: bool,
    #[arg(long, default_value_t = 512)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "pca1")]
    pub ordering: Ordering,
}

#[derive(Args, Debug)]
pub struct RegularityArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// CSV path for the decay report.
    #[arg(long)]
    pub output: PathBuf,
    /// Also decompose with this map and report the residual-to-mapped slope ratio.
    #[arg(long)]
    pub ratio_map: Option<SmoothMap>,
    #[arg(long)]
    pub center_means: bool,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// DTF base path.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "256,256")]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 0.3)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rescale to this sup norm.
    #[arg(long)]
    pub normalize: Option<f64>,
}
