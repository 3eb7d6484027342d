// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use attnprof::compare::compare_corpora;
use attnprof::csvio::{self, fmt_sig9, MixtureRow, ValidationRow};
use attnprof::embed::{tsne, EmbeddingSet, GradientMethod, Init, Projection2D, TsneConfig};
use attnprof::interdep::{build_domain_graph, GraphOptions, WeightMode};
use attnprof::layer::LayerSelect;
use attnprof::metrics::{
    analyze_corpus, token_entropies, FirstToken, HeadLayerMatrix, InvalidPolicy, MetricKind,
    MetricSet, RunOptions,
};
use attnprof::mixture::{adjusted_bounds, parse_fraction, scale_by_mix, PretrainMix, ProportionEstimate};
use attnprof::report::{
    render_heatmap, render_line_plot, render_token_entropy_html, scatter_points_svg, ColorMap,
    RenderSpec, Series, TokenEntropyPage,
};
use attnprof::store::{
    hidden_state_files, read_attention_sample, read_hidden_sample, CorpusHandle, TriangularBlock,
    ValidationReport,
};

use crate::args::*;

/// A problem with the invocation rather than the data; exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate(a) => validate(a),
        Command::Distance(a) => metric(a, None),
        Command::Entropy(a) => {
            let first = match a.first_token {
                FirstTokenArg::Keep => FirstToken::Keep,
                FirstTokenArg::Exclude => FirstToken::Exclude,
                FirstTokenArg::ExcludeRenormalized => FirstToken::ExcludeRenormalized,
            };
            metric(a.metric, Some(first))
        }
        Command::Compare(a) => compare(a),
        Command::Ifactor(a) => ifactor(a),
        Command::Tsne(a) => project(a),
        Command::Mixture(a) => mixture(a),
        Command::Render(r) => match r {
            RenderCommand::Heatmap(a) => heatmap(a),
            RenderCommand::Lines(a) => lines(a),
            RenderCommand::Scatter(a) => scatter(a),
            RenderCommand::Tokens(a) => tokens(a),
        },
    }
}

fn out_dir(out: Option<PathBuf>) -> Result<PathBuf> {
    let dir = out
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn out_file(out: Option<PathBuf>, default_name: &str) -> Result<PathBuf> {
    match out {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            Ok(p)
        }
        None => Ok(out_dir(None)?.join(default_name)),
    }
}

fn corpus(a: &CorpusArgs) -> CorpusHandle {
    let c = CorpusHandle::new(&a.corpus);
    match &a.domain {
        Some(d) => c.with_domain(d),
        None => c,
    }
}

fn run_options(r: &RunArgs, first: FirstToken) -> Result<RunOptions> {
    if r.workers == 0 {
        return Err(usage("--workers must be at least 1"));
    }
    Ok(RunOptions {
        workers: r.workers,
        on_invalid: match r.on_invalid {
            OnInvalid::Abort => InvalidPolicy::Abort,
            OnInvalid::Skip => InvalidPolicy::SkipWithWarning,
        },
        first_token: first,
    })
}

fn validate(a: ValidateArgs) -> Result<()> {
    let c = corpus(&a.corpus);
    let files = c.files()?;
    if files.is_empty() {
        bail!("no .atns files in {}", a.corpus.corpus.display());
    }
    let mut rows = Vec::with_capacity(files.len());
    for path in files {
        let mut row = ValidationRow {
            path: path.display().to_string(),
            sample_id: String::new(),
            valid: false,
            max_deviation: 0.0,
            rows_over_tolerance: 0,
            negative_count: 0,
            non_finite_count: 0,
            error: String::new(),
        };
        match check_file(&c, path) {
            Ok(report) => {
                row.sample_id = report.sample_id.clone();
                row.valid = report.is_valid();
                row.max_deviation = report.max_deviation;
                row.rows_over_tolerance = report.rows_over_tolerance;
                row.negative_count = report.negative_count;
                row.non_finite_count = report.non_finite_count;
            }
            Err(e) => row.error = e.to_string(),
        }
        rows.push(row);
    }
    let out = out_file(a.out, "validation.csv")?;
    csvio::write_validation_csv(&out, &rows)?;
    let bad = rows.iter().filter(|r| !r.valid).count();
    println!("{} files checked, {bad} invalid; report in {}", rows.len(), out.display());
    if bad > 0 {
        bail!("{bad} of {} samples failed validation", rows.len());
    }
    Ok(())
}

fn check_file(c: &CorpusHandle, path: &Path) -> Result<ValidationReport> {
    let reader = c.open(path)?;
    let h = reader.header();
    let mut report = ValidationReport::new(&h.sample_id, h.seq_len);
    for (l, hd) in h.blocks() {
        let data = reader.read_block_raw(l, hd)?;
        report.check_block(TriangularBlock::new(h.seq_len, &data)?);
    }
    Ok(report)
}

fn write_grid_outputs(
    dir: &Path,
    stem: &str,
    m: &HeadLayerMatrix,
    title: &str,
    plots: bool,
) -> Result<()> {
    csvio::write_matrix_csv(dir.join(format!("{stem}.csv")), m)?;
    let by_layer = m.marginal_by_layer();
    let by_head = m.marginal_by_head();
    csvio::write_series_csv(dir.join(format!("{stem}_by_layer.csv")), "layer", m.layers(), &by_layer)?;
    csvio::write_series_csv(dir.join(format!("{stem}_by_head.csv")), "head", m.heads(), &by_head)?;
    if plots {
        let spec = RenderSpec::for_matrix(m).with_title(title);
        render_heatmap(m, &spec, dir.join(format!("{stem}.svg")))?;
        for (axis, values) in [("layer", by_layer), ("head", by_head)] {
            let spec = RenderSpec::default()
                .with_title(format!("{title} by {axis}"))
                .with_labels(format!("{axis} (position in grid)"), title);
            render_line_plot(&[Series::new(stem, values)], &spec, dir.join(format!("{stem}_by_{axis}.svg")))?;
        }
    }
    Ok(())
}

fn metric(a: MetricArgs, entropy: Option<FirstToken>) -> Result<()> {
    let c = corpus(&a.corpus);
    let opts = run_options(&a.run, entropy.unwrap_or(FirstToken::Keep))?;
    let set = if entropy.is_some() {
        MetricSet::Entropy
    } else {
        MetricSet::Distance
    };
    let result = analyze_corpus(&c, set, &opts)?;
    let dir = out_dir(a.out)?;
    let (stem, m, title) = match entropy {
        Some(_) => ("entropy", result.entropy.expect("entropy requested"), "Attention entropy (nats)"),
        None => ("distance", result.distance.expect("distance requested"), "Attention distance"),
    };
    write_grid_outputs(&dir, stem, &m, title, !a.no_plots)?;
    let mut summary = vec![
        ("metric", stem.to_string()),
        ("samples_used", result.samples_used.to_string()),
        ("samples_skipped", result.skipped.len().to_string()),
        ("layers", m.n_layers().to_string()),
        ("heads", m.n_heads().to_string()),
        ("overall_mean", fmt_sig9(m.overall_mean())),
    ];
    if let Some(first) = entropy {
        summary.push(("first_token", format!("{first:?}")));
    }
    csvio::write_summary_csv(dir.join(format!("{stem}_summary.csv")), &summary)?;
    for s in &result.skipped {
        eprintln!("skipped {}: {}", s.path.display(), s.reason);
    }
    println!(
        "{stem}: {} samples, {}x{} grid, mean {}; outputs in {}",
        result.samples_used,
        m.n_layers(),
        m.n_heads(),
        fmt_sig9(m.overall_mean()),
        dir.display()
    );
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    let opts = run_options(&a.run, FirstToken::Keep)?;
    let tagged = |root: &Path, d: &Option<String>| {
        let c = CorpusHandle::new(root);
        match d {
            Some(d) => c.with_domain(d),
            None => c,
        }
    };
    let base = tagged(&a.baseline, &a.baseline_domain);
    let target = tagged(&a.target, &a.target_domain);
    let cmp = compare_corpora(&base, &target, &opts)?;
    let dir = out_dir(a.out)?;
    let title = format!("Attention distance difference ({} - {})", cmp.target_tag, cmp.baseline_tag);
    write_grid_outputs(&dir, "delta", &cmp.delta_grid, &title, !a.no_plots)?;
    csvio::write_matrix_csv(dir.join("baseline_distance.csv"), &cmp.baseline)?;
    csvio::write_matrix_csv(dir.join("target_distance.csv"), &cmp.target)?;
    csvio::write_summary_csv(
        dir.join("compare_summary.csv"),
        &[
            ("baseline", cmp.baseline_tag.clone()),
            ("target", cmp.target_tag.clone()),
            ("difference", cmp.operand_label()),
            ("overall_delta", fmt_sig9(cmp.overall_delta)),
        ],
    )?;
    println!(
        "{}: overall {}; outputs in {}",
        title,
        fmt_sig9(cmp.overall_delta),
        dir.display()
    );
    Ok(())
}

fn ifactor(a: IfactorArgs) -> Result<()> {
    if a.seq_len < 2 {
        return Err(usage("--seq-len must be at least 2"));
    }
    let c = corpus(&a.corpus);
    let opts = run_options(&a.run, FirstToken::Keep)?;
    let graph_opts = GraphOptions {
        layer: a.layer,
        n: a.seq_len,
        weight_mode: match a.weight_mode {
            WeightModeArg::Mean => WeightMode::Mean,
            WeightModeArg::Sum => WeightMode::Sum,
        },
    };
    let g = build_domain_graph(&c, &graph_opts, &opts)?;
    let value = g.interdependency_factor()?;
    let tw = g.token_weights();
    let out = out_file(a.out, "ifactor.csv")?;
    csvio::write_summary_csv(
        &out,
        &[
            ("interdependency_factor", fmt_sig9(value)),
            ("nodes", g.n_nodes().to_string()),
            ("layer", g.source_layer.to_string()),
            ("samples_used", g.sample_count.to_string()),
            ("samples_too_short", g.excluded_short.to_string()),
            ("samples_skipped", g.skipped.len().to_string()),
            ("weight_mode", format!("{:?}", g.weight_mode).to_lowercase()),
            ("mean_token_weight", fmt_sig9(tw.mean_weight)),
        ],
    )?;
    if let Some(p) = a.graph {
        csvio::write_graph_csv(out_file(Some(p), "")?, &g.adjacency)?;
    }
    if let Some(p) = a.token_weights {
        let names: Vec<String> = (0..tw.weights.len()).map(|i| i.to_string()).collect();
        csvio::write_token_csv(out_file(Some(p), "")?, &names, &tw.weights)?;
    }
    println!(
        "IF = {} over {} samples at layer {} (N = {}); summary in {}",
        fmt_sig9(value),
        g.sample_count,
        g.source_layer,
        g.n_nodes(),
        out.display()
    );
    Ok(())
}

fn project(a: TsneArgs) -> Result<()> {
    let selects = LayerSelect::parse_list(&a.layers).map_err(usage)?;
    let files = hidden_state_files(&a.hidden)?;
    if files.is_empty() {
        bail!("no .hdns files in {}", a.hidden.display());
    }
    let mut by_layer: BTreeMap<usize, Vec<_>> = BTreeMap::new();
    for f in &files {
        let h = read_hidden_sample(f)?;
        by_layer.entry(h.header.layer).or_default().push(h);
    }
    let n_layers = a
        .n_layers
        .unwrap_or_else(|| by_layer.keys().next_back().map_or(0, |l| l + 1));
    let mut layers: Vec<usize> = selects.iter().map(|s| s.resolve(n_layers)).collect();
    layers.sort_unstable();
    layers.dedup();

    let config = TsneConfig {
        perplexity: a.perplexity,
        iterations: a.iterations,
        learning_rate: a.learning_rate,
        pca_dims: a.pca_dims,
        seed: a.seed,
        init: match a.init {
            InitArg::Pca => Init::Pca,
            InitArg::Random => Init::Random,
        },
        gradient: match a.barnes_hut {
            Some(theta) => GradientMethod::BarnesHut { theta },
            None => GradientMethod::Exact,
        },
        ..Default::default()
    };
    let dir = out_dir(a.out)?;
    let mut results: Vec<(usize, Projection2D)> = Vec::new();
    for layer in layers {
        let samples = by_layer
            .get(&layer)
            .with_context(|| format!("no hidden states for layer {layer}"))?;
        let set = EmbeddingSet::from_hidden(samples)?;
        let p = tsne(&set, &config)?;
        println!(
            "layer {layer}: {} samples, perplexity {}, final KL {}",
            set.len(),
            fmt_sig9(p.perplexity),
            fmt_sig9(p.final_kl)
        );
        if p.uncalibrated_points > 0 {
            log::warn!("layer {layer}: {} points missed the perplexity tolerance", p.uncalibrated_points);
        }
        if !a.no_plots {
            let spec = RenderSpec::default().with_title(format!("t-SNE, layer {layer}"));
            fs::write(dir.join(format!("tsne_layer{layer}.svg")), scatter_points_svg(&p.points, &p.labels, &spec)?)
                .with_context(|| format!("writing to {}", dir.display()))?;
        }
        results.push((layer, p));
    }
    let refs: Vec<(usize, &Projection2D)> = results.iter().map(|(l, p)| (*l, p)).collect();
    csvio::write_projection_csv(dir.join("tsne.csv"), &refs)?;
    println!("outputs in {}", dir.display());
    Ok(())
}

fn mixture(a: MixtureArgs) -> Result<()> {
    let p = parse_fraction(&a.p).map_err(|e| usage(e.to_string()))?;
    let err = parse_fraction(&a.err).map_err(|e| usage(e.to_string()))?;
    let mut parts = Vec::new();
    for item in &a.mix {
        let (name, f) = item
            .split_once('=')
            .ok_or_else(|| usage(format!("--mix entry {item:?} is not name=fraction")))?;
        parts.push((name.trim().to_string(), parse_fraction(f).map_err(|e| usage(e.to_string()))?));
    }
    let mix = PretrainMix::new(parts).map_err(|e| usage(e.to_string()))?;
    let estimate = ProportionEstimate::new(p, err).map_err(|e| usage(e.to_string()))?;
    let bounds = adjusted_bounds(&estimate);
    let mut rows = vec![MixtureRow::from_bounds("adjusted", &bounds)];
    if let Some(f) = &a.component_fraction {
        let f = parse_fraction(f).map_err(|e| usage(e.to_string()))?;
        let s = scale_by_mix(bounds, f).map_err(|e| usage(e.to_string()))?;
        rows.push(MixtureRow::from_bounds(format!("scaled:{}", fmt_sig9(f)), &s));
    } else {
        let names: Vec<String> = if a.component.is_empty() {
            mix.components().iter().map(|(n, _)| n.clone()).collect()
        } else {
            a.component.clone()
        };
        for name in names {
            let s = mix.scale(&name, bounds).map_err(|e| usage(e.to_string()))?;
            rows.push(MixtureRow::from_bounds(format!("scaled:{name}"), &s));
        }
    }
    let out = out_file(a.out, "mixture.csv")?;
    csvio::write_mixture_csv(&out, &rows)?;
    for r in &rows {
        println!(
            "{:<16} lower {} ({}%)  upper {} ({}%)",
            r.quantity,
            fmt_sig9(r.lower),
            fmt_sig9(r.lower_percent),
            fmt_sig9(r.upper),
            fmt_sig9(r.upper_percent)
        );
    }
    Ok(())
}

fn spec_from(s: &SpecArgs) -> Result<RenderSpec> {
    let mut spec = RenderSpec::new(s.width, s.height).map_err(|e| usage(e.to_string()))?;
    spec.title = s.title.clone();
    if let (Some(lo), Some(hi)) = (s.range_min, s.range_max) {
        spec = spec.with_range(lo, hi);
    }
    spec.check().map_err(|e| usage(e.to_string()))?;
    Ok(spec)
}

fn heatmap(a: HeatmapArgs) -> Result<()> {
    let kind = match a.metric {
        MetricArg::Distance => MetricKind::Distance,
        MetricArg::Entropy => MetricKind::Entropy,
        MetricArg::Delta => MetricKind::DeltaDistance,
    };
    let base = spec_from(&a.spec)?;
    let m = csvio::read_matrix_csv(&a.input, kind)?;
    let mut spec = RenderSpec::for_matrix(&m);
    spec.width = base.width;
    spec.height = base.height;
    spec.title = base.title;
    spec.range = base.range;
    if let Some(c) = a.color_map {
        spec.color_map = match c {
            ColorMapArg::Sequential => ColorMap::Sequential,
            ColorMapArg::Diverging => ColorMap::Diverging,
        };
    }
    let out = out_file(Some(a.out), "")?;
    render_heatmap(&m, &spec, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn lines(a: LinesArgs) -> Result<()> {
    let mut series = Vec::new();
    for p in &a.inputs {
        let (_, values) = csvio::read_series_csv(p, &a.axis)?;
        let label = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| p.display().to_string());
        series.push(Series::new(label, values));
    }
    let spec = spec_from(&a.spec)?.with_labels(a.axis.clone(), "value");
    let out = out_file(Some(a.out), "")?;
    render_line_plot(&series, &spec, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn scatter(a: ScatterArgs) -> Result<()> {
    let rows = csvio::read_projection_csv(&a.input)?;
    let layer = match a.layer.or_else(|| rows.first().map(|r| r.layer)) {
        Some(l) => l,
        None => bail!("{} has no points", a.input.display()),
    };
    let rows: Vec<_> = rows.into_iter().filter(|r| r.layer == layer).collect();
    if rows.is_empty() {
        bail!("{} has no points for layer {layer}", a.input.display());
    }
    let points: Vec<[f64; 2]> = rows.iter().map(|r| [r.x, r.y]).collect();
    let labels: Vec<String> = rows.iter().map(|r| r.domain.clone()).collect();
    let mut spec = spec_from(&a.spec)?;
    if spec.title.is_empty() {
        spec.title = format!("t-SNE, layer {layer}");
    }
    let out = out_file(Some(a.out), "")?;
    fs::write(&out, scatter_points_svg(&points, &labels, &spec)?)
        .with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn tokens(a: TokensArgs) -> Result<()> {
    let sample = read_attention_sample(&a.sample)?;
    let h = &sample.header;
    if !h.layer_indices.contains(&a.layer) {
        bail!("{} has no layer {}", a.sample.display(), a.layer);
    }
    let heads = match a.head {
        Some(hd) if h.head_indices.contains(&hd) => vec![hd],
        Some(hd) => bail!("{} has no head {hd}", a.sample.display()),
        None => h.head_indices.clone(),
    };
    let entropies = token_entropies(&sample, a.layer, &heads)?;
    let names: Vec<String> = match &a.tokens {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let names: Vec<String> = text.lines().map(str::to_string).collect();
            if names.len() != h.seq_len {
                bail!("{} lists {} tokens but the sample has {}", p.display(), names.len(), h.seq_len);
            }
            names
        }
        None => (0..h.seq_len).map(|i| format!("[{i}]")).collect(),
    };
    let page = TokenEntropyPage::new(names.clone(), entropies.clone(), a.layer, a.head.unwrap_or(0))?;
    let out = out_file(Some(a.out), "")?;
    render_token_entropy_html(&page, &out)?;
    if let Some(p) = a.csv {
        csvio::write_token_csv(out_file(Some(p), "")?, &names, &entropies)?;
    }
    println!("wrote {}", out.display());
    Ok(())
}
