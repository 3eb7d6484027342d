// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use attnprof::csvio;
use attnprof::metrics::MetricKind;
use attnprof::store::{
    write_attention_sample, write_hidden_sample, AttentionDumpHeader, AttentionSample,
    HiddenStateHeader, HiddenStateSample,
};
use tempfile::TempDir;

fn attnprof(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attnprof"))
        .args(args)
        .current_dir(cwd)
        .env_remove("ATTNPROF_OUT_DIR")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Uniform causal rows: row i spreads 1/(i+1) over positions 0..=i.
fn uniform_corpus(dir: &Path, domain: &str, seq_len: usize, count: usize) {
    fs::create_dir_all(dir).unwrap();
    for k in 0..count {
        let header = AttentionDumpHeader::full(format!("{domain}{k}"), domain, "toy", 2, 3, seq_len);
        let s = AttentionSample::from_fn(header, |_, _, i| vec![1.0 / (i + 1) as f32; i + 1]).unwrap();
        write_attention_sample(dir.join(format!("{domain}{k}.atns")), &s).unwrap();
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * b.abs().max(1.0)
}

#[test]
fn distance_matches_closed_form() {
    let tmp = TempDir::new().unwrap();
    uniform_corpus(&tmp.path().join("web"), "web", 9, 4);
    let o = attnprof(&["distance", "--corpus", "web", "--out", "out", "--workers", "2"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = csvio::read_matrix_csv(tmp.path().join("out/distance.csv"), MetricKind::Distance).unwrap();
    assert_eq!((m.n_layers(), m.n_heads()), (2, 3));
    // sum_i i/2 over 9 rows, divided by 9 rows of unit mass
    assert!(m.values().iter().all(|&v| close(v, 2.0)), "{:?}", m.values());
    for f in ["distance_by_layer.csv", "distance_by_head.csv", "distance_summary.csv", "distance.svg"] {
        assert!(tmp.path().join("out").join(f).exists(), "{f} missing");
    }
}

#[test]
fn entropy_matches_closed_form() {
    let tmp = TempDir::new().unwrap();
    uniform_corpus(&tmp.path().join("c"), "web", 6, 2);
    let o = attnprof(&["entropy", "--corpus", "c", "--out", "o", "--no-plots"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = csvio::read_matrix_csv(tmp.path().join("o/entropy.csv"), MetricKind::Entropy).unwrap();
    let want = (1..=6).map(|k| (k as f64).ln()).sum::<f64>() / 6.0;
    assert!(m.values().iter().all(|&v| close(v, want)));
    assert!(!tmp.path().join("o/entropy.svg").exists());

    let o = attnprof(&["entropy", "--corpus", "c", "--out", "x", "--first-token", "exclude"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = csvio::read_matrix_csv(tmp.path().join("x/entropy.csv"), MetricKind::Entropy).unwrap();
    assert!(m.values().iter().all(|&v| v < want));
}

#[test]
fn out_dir_falls_back_to_environment() {
    let tmp = TempDir::new().unwrap();
    uniform_corpus(&tmp.path().join("c"), "web", 5, 1);
    let o = Command::new(env!("CARGO_BIN_EXE_attnprof"))
        .args(["distance", "--corpus", "c", "--no-plots"])
        .current_dir(tmp.path())
        .env("ATTNPROF_OUT_DIR", "from_env")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(tmp.path().join("from_env/distance.csv").exists());

    let o = attnprof(&["distance", "--corpus", "c", "--no-plots"], tmp.path());
    assert_eq!(code(&o), 0);
    assert!(tmp.path().join("distance.csv").exists());
}

#[test]
fn compare_reports_target_minus_baseline() {
    let tmp = TempDir::new().unwrap();
    uniform_corpus(&tmp.path().join("web"), "web", 5, 2);
    uniform_corpus(&tmp.path().join("code"), "code", 9, 2);
    let o = attnprof(&["compare", "--baseline", "web", "--target", "code", "--out", "o"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = csvio::read_matrix_csv(tmp.path().join("o/delta.csv"), MetricKind::DeltaDistance).unwrap();
    assert!(m.values().iter().all(|&v| close(v, 1.0)), "{:?}", m.values());
    let summary = csvio::read_summary_csv(tmp.path().join("o/compare_summary.csv")).unwrap();
    assert!(summary.iter().any(|(k, v)| k == "difference" && v == "code - web"), "{summary:?}");
    assert!(tmp.path().join("o/baseline_distance.csv").exists());
}

#[test]
fn validate_flags_bad_rows_with_data_exit() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("c");
    uniform_corpus(&dir, "web", 4, 2);
    let o = attnprof(&["validate", "--corpus", "c", "--out", "ok.csv"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let header = AttentionDumpHeader::full("bad", "web", "toy", 2, 3, 4);
    let s = AttentionSample::from_fn(header, |l, _, i| {
        let mut r = vec![1.0 / (i + 1) as f32; i + 1];
        if l == 1 && i == 3 {
            r[0] = -0.25;
        }
        r
    })
    .unwrap();
    write_attention_sample(dir.join("bad.atns"), &s).unwrap();
    let o = attnprof(&["validate", "--corpus", "c", "--out", "v.csv"], tmp.path());
    assert_eq!(code(&o), 2);
    let rows = csvio::read_validation_csv(tmp.path().join("v.csv")).unwrap();
    assert_eq!(rows.len(), 3);
    let bad = rows.iter().find(|r| r.sample_id == "bad").unwrap();
    assert!(!bad.valid);
    assert!(bad.negative_count > 0);
    assert_eq!(rows.iter().filter(|r| r.valid).count(), 2);

    let o = attnprof(&["distance", "--corpus", "c", "--out", "d"], tmp.path());
    assert_eq!(code(&o), 2);
    let o = attnprof(&["distance", "--corpus", "c", "--out", "d", "--on-invalid", "skip", "--no-plots"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn corrupt_file_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("c");
    uniform_corpus(&dir, "web", 4, 1);
    fs::write(dir.join("junk.atns"), b"not a dump").unwrap();
    let o = attnprof(&["validate", "--corpus", "c", "--out", "v.csv"], tmp.path());
    assert_eq!(code(&o), 2);
    let rows = csvio::read_validation_csv(tmp.path().join("v.csv")).unwrap();
    assert!(rows.iter().any(|r| !r.error.is_empty()));
}

#[test]
fn usage_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    uniform_corpus(&tmp.path().join("c"), "web", 4, 1);
    for args in [
        &["distance", "c"][..],
        &["distance", "--corpus", "c", "--bogus"],
        &["distance", "--corpus", "c", "--workers", "0"],
        &["mixture", "--p", "1.5"],
        &["mixture", "--p", "0.2", "--mix", "web=0.5,web"],
        &["mixture", "--p", "0.2", "--component", "books"],
        &["tsne", "--hidden", "h", "--layers", "upper"],
        &["render", "heatmap", "--input", "x.csv", "--out", "x.svg", "--width", "10"],
        &["--config", "missing.toml", "distance", "c"],
    ] {
        let o = attnprof(args, tmp.path());
        assert_eq!(code(&o), 1, "{args:?}: {}", stderr(&o));
    }
    let o = attnprof(&["distance", "--corpus", "nowhere"], tmp.path());
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn help_lists_defaults() {
    let tmp = TempDir::new().unwrap();
    let o = attnprof(&["tsne", "--help"], tmp.path());
    assert_eq!(code(&o), 0);
    let out = String::from_utf8_lossy(&o.stdout);
    for want in ["[default: 30]", "[default: 1000]", "[default: 200]", "[default: first,middle,last]"] {
        assert!(out.contains(want), "missing {want} in\n{out}");
    }
    let o = attnprof(&["ifactor", "--help"], tmp.path());
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("[default: 512]") && out.contains("[default: middle]"), "{out}");
}

#[test]
fn mixture_reproduces_reported_bounds() {
    let tmp = TempDir::new().unwrap();
    let o = attnprof(&["mixture", "--p", "30%", "--err", "5%", "--component", "web"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csvio::read_mixture_csv(tmp.path().join("mixture.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].quantity, "adjusted");
    assert!(close(rows[0].lower_percent, 25.0) && close(rows[0].upper_percent, 35.0));
    assert_eq!(rows[1].quantity, "scaled:web");
    assert!(close(rows[1].lower_percent, 20.5) && close(rows[1].upper_percent, 28.7));
    assert!(close(rows[1].lower, 0.205) && close(rows[1].upper, 0.287));

    let o = attnprof(
        &["mixture", "--p", "0.00849%", "--err", "0.0043%", "--component-fraction", "0.82", "--out", "t1.csv"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("upper 0.0001279 (0.01279%)"), "{stdout}");
    let rows = csvio::read_mixture_csv(tmp.path().join("t1.csv")).unwrap();
    assert_eq!(rows[1].quantity, "scaled:0.82");
    assert!((rows[1].lower_percent - 0.00419 * 0.82).abs() < 1e-7);
    assert!((rows[1].upper_percent - 0.01279 * 0.82).abs() < 1e-7);
}

#[test]
fn config_file_fills_flags_and_command_line_wins() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("run.toml"),
        "[mixture]\np = \"0.5\"\nerr = \"0.1\"\nout = \"cfg.csv\"\n",
    )
    .unwrap();
    let o = attnprof(&["--config", "run.toml", "mixture", "--err", "0.05"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csvio::read_mixture_csv(tmp.path().join("cfg.csv")).unwrap();
    assert!(close(rows[0].lower_percent, 45.0) && close(rows[0].upper_percent, 55.0), "{rows:?}");
}

#[test]
fn ifactor_on_uniform_rows() {
    let tmp = TempDir::new().unwrap();
    uniform_corpus(&tmp.path().join("c"), "web", 6, 3);
    let short = AttentionDumpHeader::full("short", "web", "toy", 2, 3, 2);
    let s = AttentionSample::from_fn(short, |_, _, i| vec![1.0 / (i + 1) as f32; i + 1]).unwrap();
    write_attention_sample(tmp.path().join("c/short.atns"), &s).unwrap();
    let o = attnprof(
        &["ifactor", "--corpus", "c", "--seq-len", "4", "--out", "if.csv", "--graph", "g.csv", "--token-weights", "tw.csv"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = csvio::read_summary_csv(tmp.path().join("if.csv")).unwrap();
    let get = |k: &str| summary.iter().find(|(key, _)| key == k).unwrap().1.clone();
    let off_diagonal = 0.5 + 2.0 / 3.0 + 0.75;
    assert!(close(get("interdependency_factor").parse().unwrap(), off_diagonal / 12.0));
    assert_eq!(get("nodes"), "4");
    assert_eq!(get("samples_used"), "3");
    assert_eq!(get("samples_too_short"), "1");
    let edges = csvio::read_graph_csv(tmp.path().join("g.csv")).unwrap();
    let adj = csvio::edges_to_adjacency(4, &edges).unwrap();
    assert!(close(adj.get(3, 1), 0.25));
    assert_eq!(csvio::read_token_csv(tmp.path().join("tw.csv")).unwrap().len(), 4);
}

fn clustered_hidden(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    for layer in 0..3 {
        for (d, domain) in ["web", "code"].iter().enumerate() {
            for k in 0..12 {
                let header = HiddenStateHeader {
                    sample_id: format!("{domain}{k}"),
                    domain: domain.to_string(),
                    layer,
                    seq_len: 3,
                    d_model: 4,
                };
                let centre = if d == 0 { 8.0 } else { -8.0 };
                let states = (0..12)
                    .map(|i| centre + ((k * 7 + i * 3) % 5) as f32 * 0.1)
                    .collect();
                let s = HiddenStateSample::new(header, states).unwrap();
                write_hidden_sample(dir.join(format!("{domain}{k}_l{layer}.hdns")), &s).unwrap();
            }
        }
    }
}

#[test]
fn tsne_writes_points_per_layer_and_renders() {
    let tmp = TempDir::new().unwrap();
    clustered_hidden(&tmp.path().join("h"));
    let o = attnprof(
        &["tsne", "--hidden", "h", "--layers", "first,last", "--perplexity", "5", "--iterations", "300", "--out", "t"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csvio::read_projection_csv(tmp.path().join("t/tsne.csv")).unwrap();
    assert_eq!(rows.len(), 48);
    assert!(rows.iter().all(|r| r.layer == 0 || r.layer == 2));
    for layer in [0, 2] {
        let pts: Vec<_> = rows.iter().filter(|r| r.layer == layer).collect();
        let mean_x = |dom: &str| {
            let v: Vec<f64> = pts.iter().filter(|r| r.domain == dom).map(|r| r.x).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let spread = pts.iter().map(|r| r.x.abs()).fold(0.0, f64::max);
        assert!((mean_x("web") - mean_x("code")).abs() > 0.1 * spread);
    }
    assert!(tmp.path().join("t/tsne_layer2.svg").exists());
    assert!(!tmp.path().join("t/tsne_layer1.svg").exists());

    let o = attnprof(&["render", "scatter", "--input", "t/tsne.csv", "--layer", "2", "--out", "s.svg"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let svg = fs::read_to_string(tmp.path().join("s.svg")).unwrap();
    assert!(svg.contains("code") && svg.contains("web"));
}

#[test]
fn render_commands_round_trip_csv_output() {
    let tmp = TempDir::new().unwrap();
    uniform_corpus(&tmp.path().join("c"), "web", 5, 1);
    assert_eq!(code(&attnprof(&["distance", "--corpus", "c", "--out", "d", "--no-plots"], tmp.path())), 0);

    let o = attnprof(
        &["render", "heatmap", "--input", "d/distance.csv", "--out", "h.svg", "--title", "D", "--width", "300"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let svg = fs::read_to_string(tmp.path().join("h.svg")).unwrap();
    assert_eq!(svg.matches("class=\"cell\"").count(), 6);
    assert!(svg.contains("width=\"300\""));

    let o = attnprof(
        &["render", "lines", "--input", "d/distance_by_layer.csv", "--out", "l.svg"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(fs::read_to_string(tmp.path().join("l.svg")).unwrap().contains("distance_by_layer"));

    fs::write(tmp.path().join("toks.txt"), "The\ncat\n<sat>\non\nit\n").unwrap();
    let o = attnprof(
        &[
            "render", "tokens", "--sample", "c/web0.atns", "--tokens", "toks.txt", "--layer", "1", "--head", "2",
            "--out", "t.html", "--csv", "t.csv",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let html = fs::read_to_string(tmp.path().join("t.html")).unwrap();
    assert!(html.contains("&lt;sat&gt;"));
    let rows = csvio::read_token_csv(tmp.path().join("t.csv")).unwrap();
    assert_eq!(rows.len(), 5);
    assert!(close(rows[4].value, 5f64.ln()));

    fs::write(tmp.path().join("short.txt"), "a\nb\n").unwrap();
    let o = attnprof(
        &["render", "tokens", "--sample", "c/web0.atns", "--tokens", "short.txt", "--layer", "0", "--out", "u.html"],
        tmp.path(),
    );
    assert_eq!(code(&o), 2);
}
