// SPDX-License-Identifier: MIT OR Apache-2.0

#![allow(dead_code)]

use std::path::Path;

use attnprof::store::{write_attention_sample, AttentionDumpHeader, AttentionSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `rows[layer][head][i]` is row `i` (length `i + 1`) of one block.
pub type Rows = Vec<Vec<Vec<Vec<f32>>>>;

pub struct Generated {
    pub sample: AttentionSample,
    pub rows: Rows,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Softmax-like row: positive weights normalized in f32, with the odd exact
/// zero thrown in.
pub fn random_row(rng: &mut ChaCha8Rng, len: usize) -> Vec<f32> {
    let raw: Vec<f64> = (0..len)
        .map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..1.0f64).powi(3) })
        .collect();
    let sum: f64 = raw.iter().sum();
    if sum == 0.0 {
        let mut r = vec![0.0; len];
        r[len - 1] = 1.0;
        return r;
    }
    raw.iter().map(|v| (v / sum) as f32).collect()
}

pub fn random_sample(
    rng: &mut ChaCha8Rng,
    id: &str,
    domain: &str,
    n_layers: usize,
    n_heads: usize,
    seq_len: usize,
) -> Generated {
    let rows: Rows = (0..n_layers)
        .map(|_| {
            (0..n_heads)
                .map(|_| (0..seq_len).map(|i| random_row(rng, i + 1)).collect())
                .collect()
        })
        .collect();
    let header = AttentionDumpHeader::full(id, domain, "toy", n_layers, n_heads, seq_len);
    let sample = AttentionSample::from_fn(header, |l, h, i| rows[l][h][i].clone()).unwrap();
    Generated { sample, rows }
}

/// Writes `count` random samples with the given grid and seq_len in
/// `1..=max_len` to `dir`.
pub fn random_corpus(
    dir: &Path,
    seed: u64,
    count: usize,
    n_layers: usize,
    n_heads: usize,
    max_len: usize,
) -> Vec<Generated> {
    let mut r = rng(seed);
    (0..count)
        .map(|k| {
            let len = r.random_range(1..=max_len);
            let g = random_sample(&mut r, &format!("s{k:04}"), "web", n_layers, n_heads, len);
            write_attention_sample(dir.join(format!("s{k:04}.atns")), &g.sample).unwrap();
            g
        })
        .collect()
}

/// Direct double sum over all samples and causal pairs, per (layer, head).
pub fn brute_distance(samples: &[&Rows], n_layers: usize, n_heads: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for l in 0..n_layers {
        for h in 0..n_heads {
            let (mut num, mut den) = (0.0f64, 0.0f64);
            for s in samples {
                for (i, row) in s[l][h].iter().enumerate() {
                    for (j, &a) in row.iter().enumerate() {
                        num += a as f64 * (i - j) as f64;
                        den += a as f64;
                    }
                }
            }
            out.push(num / den);
        }
    }
    out
}

/// Token-mean Shannon entropy in nats, per (layer, head).
pub fn brute_entropy(samples: &[&Rows], n_layers: usize, n_heads: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for l in 0..n_layers {
        for h in 0..n_heads {
            let (mut total, mut count) = (0.0f64, 0usize);
            for s in samples {
                for row in &s[l][h] {
                    let mut e = 0.0;
                    for &a in row {
                        let a = a as f64;
                        if a > 0.0 {
                            e -= a * a.ln();
                        }
                    }
                    total += e;
                    count += 1;
                }
            }
            out.push(total / count as f64);
        }
    }
    out
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}
