// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

use attnprof::layer::LayerSelect;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub const OUT_DIR_ENV: &str = "ATTNPROF_OUT_DIR";

/// Attention distance, entropy and interdependency analysis of transformer
/// attention dumps.
#[derive(Debug, Parser)]
#[command(name = "attnprof", version, args_override_self = true)]
#[command(after_help = "Exit status: 0 success, 1 usage error, 2 data error.\n\
Output directories default to $ATTNPROF_OUT_DIR, then the current directory.")]
pub struct Cli {
    /// TOML file with one table per subcommand (e.g. [distance], [render.heatmap])
    /// whose keys are flag names; flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that every attention row sums to 1 and holds no negative or
    /// non-finite values.
    Validate(ValidateArgs),
    /// Attention distance per (layer, head).
    Distance(MetricArgs),
    /// Mean attention entropy per (layer, head), in nats.
    Entropy(EntropyArgs),
    /// Attention distance difference (target - baseline) between two corpora.
    Compare(CompareArgs),
    /// Interdependency factor of the domain-level token graph.
    Ifactor(IfactorArgs),
    /// 2-D t-SNE projection of pooled hidden states.
    Tsne(TsneArgs),
    /// Error-adjusted proportion bounds scaled by a pretraining mixture.
    Mixture(MixtureArgs),
    /// Render charts from CSV output.
    #[command(subcommand)]
    Render(RenderCommand),
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Directory of .atns files.
    #[arg(long, value_name = "DIR")]
    pub corpus: PathBuf,

    /// Reject files whose header carries another domain tag.
    #[arg(long)]
    pub domain: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnInvalid {
    Abort,
    Skip,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,

    /// What to do with unreadable or invalid samples.
    #[arg(long, value_enum, default_value_t = OnInvalid::Abort)]
    pub on_invalid: OnInvalid,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,

    /// Report CSV [default: validation.csv in the output directory]
    #[arg(long, value_name = "CSV")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,

    #[command(flatten)]
    pub run: RunArgs,

    /// Output directory [default: $ATTNPROF_OUT_DIR or .]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Skip the heatmap and marginal plots.
    #[arg(long)]
    pub no_plots: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FirstTokenArg {
    Keep,
    Exclude,
    ExcludeRenormalized,
}

#[derive(Debug, Args)]
pub struct EntropyArgs {
    #[command(flatten)]
    pub metric: MetricArgs,

    /// Treatment of attention on the first token.
    #[arg(long, value_enum, default_value_t = FirstTokenArg::Keep)]
    pub first_token: FirstTokenArg,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Baseline corpus directory.
    #[arg(long, value_name = "DIR")]
    pub baseline: PathBuf,

    /// Target corpus directory.
    #[arg(long, value_name = "DIR")]
    pub target: PathBuf,

    /// Domain tag required of baseline files.
    #[arg(long)]
    pub baseline_domain: Option<String>,

    /// Domain tag required of target files.
    #[arg(long)]
    pub target_domain: Option<String>,

    #[command(flatten)]
    pub run: RunArgs,

    /// Output directory [default: $ATTNPROF_OUT_DIR or .]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Skip the heatmap and marginal plots.
    #[arg(long)]
    pub no_plots: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightModeArg {
    Mean,
    Sum,
}

#[derive(Debug, Args)]
pub struct IfactorArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,

    #[command(flatten)]
    pub run: RunArgs,

    /// Layer: first, middle, last or an index.
    #[arg(long, default_value = "middle")]
    pub layer: LayerSelect,

    /// Graph size: the first N tokens of each sample; shorter samples are
    /// left out.
    #[arg(long, default_value_t = 512)]
    pub seq_len: usize,

    /// Edge weights: mean over heads and samples, or their unnormalized sum.
    #[arg(long, value_enum, default_value_t = WeightModeArg::Mean)]
    pub weight_mode: WeightModeArg,

    /// Summary CSV [default: ifactor.csv in the output directory]
    #[arg(long, value_name = "CSV")]
    pub out: Option<PathBuf>,

    /// Also write the graph as i,j,weight triples.
    #[arg(long, value_name = "CSV")]
    pub graph: Option<PathBuf>,

    /// Also write normalized per-token weights.
    #[arg(long, value_name = "CSV")]
    pub token_weights: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Pca,
    Random,
}

#[derive(Debug, Args)]
pub struct TsneArgs {
    /// Directory of .hdns files.
    #[arg(long, value_name = "DIR")]
    pub hidden: PathBuf,

    /// Comma-separated layers: first, middle, last or indices.
    #[arg(long, default_value = "first,middle,last")]
    pub layers: String,

    /// Model layer count for resolving keywords [default: highest layer
    /// present + 1]
    #[arg(long)]
    pub n_layers: Option<usize>,

    /// Target perplexity (lowered for small sets).
    #[arg(long, default_value_t = 30.0)]
    pub perplexity: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,

    /// Step size (lowered to n / 12 for small sets).
    #[arg(long, default_value_t = 200.0)]
    pub learning_rate: f64,

    /// Dimensions kept by PCA before the projection.
    #[arg(long, default_value_t = 50)]
    pub pca_dims: usize,

    #[arg(long, value_enum, default_value_t = InitArg::Pca)]
    pub init: InitArg,

    /// Use the Barnes-Hut gradient with this opening angle instead of the
    /// exact gradient.
    #[arg(long, value_name = "THETA")]
    pub barnes_hut: Option<f64>,

    /// Output directory [default: $ATTNPROF_OUT_DIR or .]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Skip the scatter plots.
    #[arg(long)]
    pub no_plots: bool,
}

#[derive(Debug, Args)]
pub struct MixtureArgs {
    /// Estimated proportion, as a fraction (0.0000849) or percentage (0.00849%).
    #[arg(long)]
    pub p: String,

    /// Absolute error of the estimate, same units as --p.
    #[arg(long, default_value = "0")]
    pub err: String,

    /// Mixture components as name=fraction pairs.
    #[arg(long, value_delimiter = ',', default_value = "web=0.82,code=0.045,arxiv=0.025")]
    pub mix: Vec<String>,

    /// Components to scale by; all of --mix when omitted.
    #[arg(long, value_delimiter = ',', conflicts_with = "component_fraction")]
    pub component: Vec<String>,

    /// Scale by this share directly instead of a named --mix component.
    #[arg(long, value_name = "FRACTION")]
    pub component_fraction: Option<String>,

    /// Bounds CSV [default: mixture.csv in the output directory]
    #[arg(long, value_name = "CSV")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum RenderCommand {
    /// Heatmap SVG from a layer,head,value CSV.
    Heatmap(HeatmapArgs),
    /// Line plot SVG from one or more axis,value CSVs.
    Lines(LinesArgs),
    /// Scatter SVG from a t-SNE CSV.
    Scatter(ScatterArgs),
    /// Token page HTML shaded by attention entropy.
    Tokens(TokensArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Distance,
    Entropy,
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ColorMapArg {
    Sequential,
    Diverging,
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    #[arg(long, default_value_t = 800)]
    pub width: u32,

    #[arg(long, default_value_t = 600)]
    pub height: u32,

    #[arg(long, default_value = "")]
    pub title: String,

    /// Lower end of the colour or y range.
    #[arg(long, requires = "range_max", allow_hyphen_values = true)]
    pub range_min: Option<f64>,

    /// Upper end of the colour or y range.
    #[arg(long, requires = "range_min", allow_hyphen_values = true)]
    pub range_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long, value_name = "CSV")]
    pub input: PathBuf,

    /// What the grid holds; delta grids get a diverging map centred on 0.
    #[arg(long, value_enum, default_value_t = MetricArg::Distance)]
    pub metric: MetricArg,

    /// Override the colour map chosen from --metric.
    #[arg(long, value_enum)]
    pub color_map: Option<ColorMapArg>,

    #[command(flatten)]
    pub spec: SpecArgs,

    #[arg(long, value_name = "SVG")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LinesArgs {
    /// Series CSVs, one line each, labelled by file stem.
    #[arg(long = "input", value_name = "CSV", required = true)]
    pub inputs: Vec<PathBuf>,

    /// Index column name of the inputs (layer, head, position).
    #[arg(long, default_value = "layer")]
    pub axis: String,

    #[command(flatten)]
    pub spec: SpecArgs,

    #[arg(long, value_name = "SVG")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScatterArgs {
    /// CSV with sample_id,domain,layer,x,y rows.
    #[arg(long, value_name = "CSV")]
    pub input: PathBuf,

    /// Layer to plot [default: the first layer in the file]
    #[arg(long)]
    pub layer: Option<usize>,

    #[command(flatten)]
    pub spec: SpecArgs,

    #[arg(long, value_name = "SVG")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TokensArgs {
    /// Attention dump of one sample.
    #[arg(long, value_name = "ATNS")]
    pub sample: PathBuf,

    /// Token strings, one per line [default: token positions]
    #[arg(long, value_name = "TXT")]
    pub tokens: Option<PathBuf>,

    #[arg(long)]
    pub layer: usize,

    /// Head index; all stored heads are averaged when omitted.
    #[arg(long)]
    pub head: Option<usize>,

    #[arg(long, value_name = "HTML")]
    pub out: PathBuf,

    /// Also write position,token,value rows.
    #[arg(long, value_name = "CSV")]
    pub csv: Option<PathBuf>,
}
