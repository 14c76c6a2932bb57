//! Independent oracles and the acceptance criteria checks, shared by the
//! acceptance target and the regular integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reqgrid::backend::{Backend, EmbedResponse, MockBackend, ScoreRequest, ScoreResponse};
use reqgrid::metrics::{per_class_prf, weighted_prf, ConfusionMatrix, Prf};
use reqgrid::runner::{self, Config, FamilyFilter, Harness};
use reqgrid::{Error, Result};

pub type Check = std::result::Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- metrics

/// Per-class (P, R, F1) and weighted averages straight from the definitions,
/// counting over the raw label lists.
pub fn brute_prf(pred: &[Option<usize>], gold: &[usize], k: usize) -> (Vec<(f64, f64, f64, u64)>, (f64, f64, f64)) {
    let mut per = Vec::new();
    for c in 0..k {
        let tp = pred.iter().zip(gold).filter(|(p, g)| **p == Some(c) && **g == c).count() as f64;
        let predicted = pred.iter().filter(|p| **p == Some(c)).count() as f64;
        let support = gold.iter().filter(|g| **g == c).count();
        let p = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let r = if support > 0 { tp / support as f64 } else { 0.0 };
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        per.push((p, r, f, support as u64));
    }
    let n = gold.len() as f64;
    let w = |i: usize| {
        per.iter()
            .map(|t| {
                let v = [t.0, t.1, t.2][i];
                v * t.3 as f64
            })
            .sum::<f64>()
            / n
    };
    let weighted = (w(0), w(1), w(2));
    (per, weighted)
}

// ------------------------------------------------------------------ stats

/// Average ranks, written independently of the library.
pub fn ranks_oracle(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let below = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Friedman Q without tie correction (inputs are tie-free).
pub fn friedman_q(m: &[Vec<f64>]) -> f64 {
    let n = m.len() as f64;
    let k = m[0].len();
    let mut sums = vec![0.0; k];
    for row in m {
        for (s, r) in sums.iter_mut().zip(ranks_oracle(row)) {
            *s += r;
        }
    }
    let kf = k as f64;
    12.0 / (n * kf * (kf + 1.0)) * sums.iter().map(|s| s * s).sum::<f64>() - 3.0 * n * (kf + 1.0)
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..k {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Exact permutation distribution of Q under within-row exchangeability:
/// returns (P(Q > q), P(Q >= q)).
pub fn friedman_permutation_p(m: &[Vec<f64>]) -> (f64, f64) {
    let q = friedman_q(m);
    let k = m[0].len();
    let perms = permutations(k);
    let n = m.len();
    let total = perms.len().pow(n as u32);
    let (mut gt, mut ge) = (0usize, 0usize);
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        let permuted: Vec<Vec<f64>> = (0..n)
            .map(|i| perms[idx[i]].iter().map(|&j| m[i][j]).collect())
            .collect();
        let qq = friedman_q(&permuted);
        if qq > q + 1e-9 {
            gt += 1;
        }
        if qq >= q - 1e-9 {
            ge += 1;
        }
        for d in idx.iter_mut() {
            *d += 1;
            if *d < perms.len() {
                break;
            }
            *d = 0;
        }
    }
    (gt as f64 / total as f64, ge as f64 / total as f64)
}

/// Two-sided signed-rank p by enumerating all 2^n sign patterns.
pub fn wilcoxon_enumeration(x: &[f64], y: &[f64]) -> (f64, f64, usize) {
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return (0.0, 1.0, 0);
    }
    let ranks = ranks_oracle(&d.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let total: f64 = ranks.iter().sum();
    let w_plus: f64 = ranks.iter().zip(&d).filter(|(_, v)| **v > 0.0).map(|(r, _)| r).sum();
    let w = w_plus.min(total - w_plus);
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if s.min(total - s) <= w + 1e-9 {
            hits += 1;
        }
    }
    (w, hits as f64 / (1u64 << n) as f64, n)
}

/// Exact two-sided p for tie-free integer ranks 1..n by convolving the
/// null distribution of W+ one rank at a time.
pub fn wilcoxon_exact_untied(n: usize, w: f64) -> f64 {
    let total = n * (n + 1) / 2;
    let mut dist = vec![0f64; total + 1];
    dist[0] = 1.0;
    for r in 1..=n {
        let prev = dist.clone();
        for s in r..=total {
            dist[s] += prev[s - r];
        }
    }
    let all = 2f64.powi(n as i32);
    dist.iter()
        .enumerate()
        .filter(|(s, _)| (*s as f64).min((total - s) as f64) <= w + 1e-9)
        .map(|(_, c)| c)
        .sum::<f64>()
        / all
}

/// Standard normal density.
fn phi(u: f64) -> f64 {
    (-u * u / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Composite Simpson rule.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let h = (b - a) / intervals as f64;
    let mut s = f(a) + f(b);
    for i in 1..intervals {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// Chi-square survival for df 1 (via x = u²) and df 2 (closed form).
pub fn chi_square_sf_oracle(x: f64, df: u32) -> f64 {
    match df {
        1 => 1.0 - simpson(|u| 2.0 * phi(u), 0.0, x.sqrt(), 20_000),
        2 => (-x / 2.0).exp(),
        _ => unimplemented!("oracle covers df 1 and 2"),
    }
}

// ------------------------------------------------------------- grid runs

pub fn canonical_config() -> Config {
    Config::load(workspace_root().join("configs/canonical.toml")).expect("canonical config loads")
}

/// Fails every score request once `left` calls have been served.
pub struct FailAfter {
    pub inner: MockBackend,
    pub left: AtomicI64,
}

impl Backend for FailAfter {
    fn score(&self, req: &ScoreRequest) -> Result<ScoreResponse> {
        if self.left.fetch_sub(1, Ordering::SeqCst) <= 0 {
            return Err(Error::BackendUnavailable {
                attempts: 3,
                message: "simulated outage".into(),
            });
        }
        self.inner.score(req)
    }

    fn embed(&self, texts: &[String]) -> Result<EmbedResponse> {
        self.inner.embed(texts)
    }
}

pub fn run_full(config: &Config, out: &Path) -> Result<runner::RunOutcome> {
    let harness = Harness::from_config(config.clone())?;
    runner::run(&harness, FamilyFilter::All, None, out, false, |_, _, _| {})
}

/// Runs with `model` failing after `calls` score requests, then resumes with
/// a healthy backend. Also returns how many partial prediction files the
/// failed run left behind.
pub fn run_interrupted(config: &Config, out: &Path, model: &str, calls: i64) -> Result<(runner::RunOutcome, usize)> {
    let mut flaky = Harness::from_config(config.clone())?;
    let inner = runner::exec::mock_backend(config, config.model(model)?);
    flaky.set_backend(
        model,
        Arc::new(FailAfter {
            inner,
            left: AtomicI64::new(calls),
        }),
    )?;
    match runner::run(&flaky, FamilyFilter::All, None, out, false, |_, _, _| {}) {
        Err(Error::BackendUnavailable { .. }) => {}
        Err(e) => return Err(e),
        Ok(_) => return Err(Error::Input("the simulated outage never triggered".into())),
    }
    let partials = std::fs::read_dir(out.join("predictions"))
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .filter(|e| e.file_name().to_string_lossy().ends_with(".partial"))
                .count()
        })
        .unwrap_or(0);
    let healthy = Harness::from_config(config.clone())?;
    let outcome = runner::run(&healthy, FamilyFilter::All, None, out, true, |_, _, _| {})?;
    Ok((outcome, partials))
}

pub fn random_prf_instance(r: &mut ChaCha8Rng) -> (Vec<Option<usize>>, Vec<usize>, usize) {
    let k = r.random_range(2..=5);
    let n = r.random_range(1..=20);
    let gold: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
    let pred: Vec<Option<usize>> = (0..n)
        .map(|_| {
            if r.random_bool(0.1) {
                None
            } else {
                Some(r.random_range(0..k))
            }
        })
        .collect();
    (pred, gold, k)
}

pub fn confusion_of(pred: &[Option<usize>], gold: &[usize], k: usize) -> ConfusionMatrix {
    let mut counts = vec![vec![0u64; k]; k];
    let mut abstain = vec![0u64; k];
    for (p, &g) in pred.iter().zip(gold) {
        match p {
            Some(p) => counts[g][*p] += 1,
            None => abstain[g] += 1,
        }
    }
    ConfusionMatrix {
        classes: (0..k).map(|c| format!("C{c}")).collect(),
        counts,
        abstain,
    }
}

/// Library per-class and weighted scores for an index-coded instance.
pub fn library_prf(pred: &[Option<usize>], gold: &[usize], k: usize) -> (Vec<Prf>, Vec<u64>, Prf) {
    let cm = confusion_of(pred, gold, k);
    let (per, _) = per_class_prf(&cm);
    let prfs: Vec<Prf> = per.iter().map(|c| c.prf).collect();
    let supports: Vec<u64> = per.iter().map(|c| c.support).collect();
    let w = weighted_prf(&prfs, &supports).unwrap();
    (prfs, supports, w)
}
