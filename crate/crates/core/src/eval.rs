//! Verification metrics (FAR/FRR/EER, decidability index) over labeled score
//! sets, and the identification benchmark harness (hit rate, penetration
//! rate, query time) over the searchers.

use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{linear_scan, BallTree};
use crate::bitcode::CodeSet;
use crate::error::{Error, Result};
use crate::mih::{substring_balance, MihIndex, QueryStats};
use crate::rng::seeded;

// ---------------------------------------------------------------------------
// Score sets and verification metrics

/// Whether larger scores mean more similar (similarity) or less (distance).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarity {
    Similarity,
    Distance,
}

/// Labeled genuine/imposter comparison scores.
#[derive(Clone, Debug)]
pub struct ScoreSet {
    pub genuine: Vec<f64>,
    pub imposter: Vec<f64>,
    pub polarity: Polarity,
}

impl ScoreSet {
    pub fn new(genuine: Vec<f64>, imposter: Vec<f64>, polarity: Polarity) -> Result<Self> {
        if genuine.is_empty() {
            return Err(Error::Empty("genuine scores"));
        }
        if imposter.is_empty() {
            return Err(Error::Empty("imposter scores"));
        }
        for v in genuine.iter().chain(&imposter) {
            if !v.is_finite() {
                return Err(Error::Degenerate("non-finite score"));
            }
        }
        Ok(Self {
            genuine,
            imposter,
            polarity,
        })
    }

    /// Fraction of imposter scores on the accept side of the threshold.
    fn far_at(&self, threshold: f64) -> f64 {
        let accepted = match self.polarity {
            Polarity::Similarity => self.imposter.iter().filter(|&&s| s >= threshold).count(),
            Polarity::Distance => self.imposter.iter().filter(|&&s| s <= threshold).count(),
        };
        accepted as f64 / self.imposter.len() as f64
    }

    /// Fraction of genuine scores on the reject side of the threshold.
    fn frr_at(&self, threshold: f64) -> f64 {
        let rejected = match self.polarity {
            Polarity::Similarity => self.genuine.iter().filter(|&&s| s < threshold).count(),
            Polarity::Distance => self.genuine.iter().filter(|&&s| s > threshold).count(),
        };
        rejected as f64 / self.genuine.len() as f64
    }
}

/// One operating point of the error tradeoff curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

/// FAR/FRR at each given threshold.
pub fn far_frr_curve(scores: &ScoreSet, thresholds: &[f64]) -> Result<Vec<RocPoint>> {
    if thresholds.is_empty() {
        return Err(Error::Empty("thresholds"));
    }
    Ok(thresholds
        .iter()
        .map(|&t| RocPoint {
            threshold: t,
            far: scores.far_at(t),
            frr: scores.frr_at(t),
        })
        .collect())
}

/// Equal error rate: `(rate, threshold)` where FAR and FRR meet, linearly
/// interpolated between adjacent sampled thresholds when the curves cross
/// between samples.
pub fn eer(scores: &ScoreSet) -> Result<(f64, f64)> {
    let mut thresholds: Vec<f64> = scores
        .genuine
        .iter()
        .chain(&scores.imposter)
        .copied()
        .collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    // Evaluate just beyond both ends so accept-all and reject-all are
    // included in the scan.
    let span = (thresholds[thresholds.len() - 1] - thresholds[0]).max(1.0);
    thresholds.insert(0, thresholds[0] - span * 1e-6);
    thresholds.push(thresholds[thresholds.len() - 1] + span * 1e-6);

    let mut best = (f64::INFINITY, 0.0, 0.0); // |far - frr|, rate, threshold
    let mut prev: Option<(f64, f64, f64)> = None; // threshold, far, frr
    for &t in &thresholds {
        let far = scores.far_at(t);
        let frr = scores.frr_at(t);
        if let Some((pt, pfar, pfrr)) = prev {
            let d_prev = pfar - pfrr;
            let d_cur = far - frr;
            if d_prev.signum() != d_cur.signum() && d_prev != 0.0 && d_cur != 0.0 {
                // The curves cross between pt and t: interpolate both
                // linearly and solve far(lambda) = frr(lambda).
                let lambda = d_prev / (d_prev - d_cur);
                let rate_far = pfar + lambda * (far - pfar);
                let rate_frr = pfrr + lambda * (frr - pfrr);
                let rate = (rate_far + rate_frr) / 2.0;
                let threshold = pt + lambda * (t - pt);
                return Ok((rate, threshold));
            }
        }
        let gap = (far - frr).abs();
        if gap < best.0 {
            best = (gap, (far + frr) / 2.0, t);
        }
        prev = Some((t, far, frr));
    }
    Ok((best.1, best.2))
}

/// Decidability index `|mu_g - mu_i| / sqrt((var_g + var_i) / 2)` with
/// sample statistics.
pub fn decidability_index(scores: &ScoreSet) -> Result<f64> {
    if scores.genuine.len() < 2 || scores.imposter.len() < 2 {
        return Err(Error::Empty("need at least 2 scores on each side"));
    }
    let stats = |xs: &[f64]| {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    };
    let (mu_g, var_g) = stats(&scores.genuine);
    let (mu_i, var_i) = stats(&scores.imposter);
    let denom = ((var_g + var_i) / 2.0).sqrt();
    if denom == 0.0 {
        return Err(Error::Degenerate(
            "both score distributions have zero variance",
        ));
    }
    Ok((mu_g - mu_i).abs() / denom)
}

/// Recall and precision at a decision threshold: genuine scores on the
/// accept side are true positives, imposter scores there are false
/// positives.
pub fn recall_precision(scores: &ScoreSet, threshold: f64) -> Result<(f64, f64)> {
    let accepts = |s: f64| match scores.polarity {
        Polarity::Similarity => s >= threshold,
        Polarity::Distance => s <= threshold,
    };
    let tp = scores.genuine.iter().filter(|&&s| accepts(s)).count() as f64;
    let fp = scores.imposter.iter().filter(|&&s| accepts(s)).count() as f64;
    let recall = tp / scores.genuine.len() as f64;
    if tp + fp == 0.0 {
        return Err(Error::Degenerate("no scores on the accept side"));
    }
    Ok((recall, tp / (tp + fp)))
}

/// Builds a similarity score set (`1 - hamming/k`) from gallery/probe codes:
/// all genuine probe-gallery pairs, plus up to `max_imposters_per_probe`
/// imposter pairs sampled per probe from the seeded stream.
pub fn score_codes(
    gallery: &CodeSet,
    probes: &CodeSet,
    max_imposters_per_probe: usize,
    seed: u64,
) -> Result<ScoreSet> {
    if gallery.width() != probes.width() {
        return Err(Error::WidthMismatch {
            left: gallery.width(),
            right: probes.width(),
        });
    }
    if gallery.is_empty() || probes.is_empty() {
        return Err(Error::Empty("gallery or probes"));
    }
    let k = gallery.width() as f64;
    let mut rng = seeded(seed);
    let mut genuine = Vec::new();
    let mut imposter = Vec::new();
    use rand_core::RngCore;
    for p in 0..probes.len() as u32 {
        let label = probes.label(p);
        for g in 0..gallery.len() as u32 {
            if gallery.label(g) == label {
                let d = probes.code(p).hamming_unchecked(gallery.code(g));
                genuine.push(1.0 - d as f64 / k);
            }
        }
        for _ in 0..max_imposters_per_probe {
            let g = (rng.next_u64() % gallery.len() as u64) as u32;
            if gallery.label(g) != label {
                let d = probes.code(p).hamming_unchecked(gallery.code(g));
                imposter.push(1.0 - d as f64 / k);
            }
        }
    }
    ScoreSet::new(genuine, imposter, Polarity::Similarity)
}

// ---------------------------------------------------------------------------
// Identification benchmark

/// Searcher selection for [`run_benchmark`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    Linear,
    BallTree,
    Mih,
    MihOptimized,
    MihMcom,
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "balltree" => Ok(Self::BallTree),
            "mih" => Ok(Self::Mih),
            "mih_opt" => Ok(Self::MihOptimized),
            "mih_mcom" => Ok(Self::MihMcom),
            other => Err(Error::UnknownEngine(other.to_string())),
        }
    }
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Linear => "linear",
            Self::BallTree => "balltree",
            Self::Mih => "mih",
            Self::MihOptimized => "mih_opt",
            Self::MihMcom => "mih_mcom",
        })
    }
}

/// Benchmark knobs: substring table count for the MIH engines, leaf capacity
/// for the ball tree, and worker pool size (0 = machine parallelism).
///
/// The default leaf capacity (4) is tuned for identification workloads where
/// classes enroll a handful of samples each; larger leaves mix classes and
/// lose pruning.
#[derive(Clone, Copy, Debug)]
pub struct BenchOptions {
    pub t: u32,
    pub leaf_cap: usize,
    pub threads: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            t: 16,
            leaf_cap: 4,
            threads: 0,
        }
    }
}

/// Per-probe outcome.
#[derive(Clone, Debug)]
pub struct ProbeOutcome {
    pub probe: u32,
    pub label: u32,
    pub hit: bool,
    pub stats: QueryStats,
    pub seconds: f64,
}

/// One benchmark run: per-probe outcomes plus the aggregate rates.
///
/// `hit_rate` counts probes whose class appears among the retrieved true
/// r-neighbors, over probes whose class exists in the gallery;
/// `penetration_rate` is the mean fraction of the gallery receiving a
/// full-code comparison per probe.
#[derive(Clone, Debug)]
pub struct IndexRunReport {
    pub engine: Engine,
    pub r: u32,
    pub hit_rate: f64,
    pub penetration_rate: f64,
    pub mean_query_time: f64,
    pub probes: Vec<ProbeOutcome>,
    /// 10th/50th/90th percentile of probe-to-match substring-balance
    /// deviations; reported by the mih_mcom engine.
    pub balance_quantiles: Option<[f64; 3]>,
}

fn quantiles_nearest_rank(sorted: &[f64]) -> [f64; 3] {
    let pick = |q: f64| {
        let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
        sorted[idx]
    };
    [pick(0.10), pick(0.50), pick(0.90)]
}

/// Runs one engine over every probe at radius `r`.
pub fn run_benchmark(
    gallery: &CodeSet,
    probes: &CodeSet,
    engine: Engine,
    r: u32,
    opts: &BenchOptions,
) -> Result<IndexRunReport> {
    if gallery.width() != probes.width() {
        return Err(Error::WidthMismatch {
            left: gallery.width(),
            right: probes.width(),
        });
    }
    if probes.is_empty() {
        return Err(Error::Empty("probes"));
    }
    let n = gallery.len() as f64;
    if gallery.is_empty() {
        return Err(Error::Empty("gallery"));
    }

    enum Prepared {
        Linear,
        Tree(BallTree),
        Index(MihIndex),
    }
    let prepared = match engine {
        Engine::Linear => Prepared::Linear,
        Engine::BallTree => Prepared::Tree(BallTree::build(gallery, opts.leaf_cap)?),
        Engine::Mih | Engine::MihOptimized | Engine::MihMcom => {
            Prepared::Index(MihIndex::build(gallery, opts.t)?)
        }
    };

    // (outcome, balance deviation of the returned match, if any)
    let run_probe = |p: u32| -> Result<(ProbeOutcome, Option<f64>)> {
        let q = probes.code(p);
        let label = probes.label(p);
        let started = Instant::now();
        let (hit, stats, balance) = match &prepared {
            Prepared::Linear => {
                let ids = linear_scan(gallery, q, r)?;
                let stats = QueryStats {
                    candidates_examined: gallery.len() as u64,
                    full_verifications: gallery.len() as u64,
                    tables_probed: 0,
                    true_neighbors: ids.len() as u64,
                };
                (
                    ids.iter().any(|&id| gallery.label(id) == label),
                    stats,
                    None,
                )
            }
            Prepared::Tree(tree) => {
                let (ids, ball_stats) = tree.query(q, r)?;
                let stats = QueryStats {
                    candidates_examined: ball_stats.full_verifications,
                    full_verifications: ball_stats.full_verifications,
                    tables_probed: 0,
                    true_neighbors: ids.len() as u64,
                };
                (
                    ids.iter().any(|&id| gallery.label(id) == label),
                    stats,
                    None,
                )
            }
            Prepared::Index(index) => match engine {
                Engine::Mih => {
                    let (ids, stats) = index.query_rneighbors(q, r)?;
                    (ids.iter().any(|&id| index.label(id) == label), stats, None)
                }
                _ => {
                    let (found, stats) = index.query_optimized(q, r)?;
                    let hit = found.map(|n| index.label(n.id) == label).unwrap_or(false);
                    let balance = match (engine, found) {
                        (Engine::MihMcom, Some(n)) => {
                            Some(substring_balance(q, index.code(n.id), opts.t)?.deviation)
                        }
                        _ => None,
                    };
                    (hit, stats, balance)
                }
            },
        };
        let seconds = started.elapsed().as_secs_f64();
        Ok((
            ProbeOutcome {
                probe: p,
                label,
                hit,
                stats,
                seconds,
            },
            balance,
        ))
    };

    let probe_ids: Vec<u32> = (0..probes.len() as u32).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| Error::InvalidParam(format!("worker pool: {e}")))?;
    let results: Result<Vec<(ProbeOutcome, Option<f64>)>> =
        pool.install(|| probe_ids.par_iter().map(|&p| run_probe(p)).collect());
    let results = results?;

    let gallery_labels: std::collections::HashSet<u32> = gallery.labels().iter().copied().collect();
    let mut eligible = 0u64;
    let mut hits = 0u64;
    let mut penetration_sum = 0.0;
    let mut time_sum = 0.0;
    let mut deviations = Vec::new();
    let mut outcomes = Vec::with_capacity(results.len());
    for (outcome, balance) in results {
        if gallery_labels.contains(&outcome.label) {
            eligible += 1;
            hits += outcome.hit as u64;
        }
        penetration_sum += outcome.stats.full_verifications as f64 / n;
        time_sum += outcome.seconds;
        if let Some(d) = balance {
            deviations.push(d);
        }
        outcomes.push(outcome);
    }
    let balance_quantiles = if engine == Engine::MihMcom && !deviations.is_empty() {
        deviations.sort_by(f64::total_cmp);
        Some(quantiles_nearest_rank(&deviations))
    } else {
        None
    };
    Ok(IndexRunReport {
        engine,
        r,
        hit_rate: if eligible > 0 {
            hits as f64 / eligible as f64
        } else {
            0.0
        },
        penetration_rate: penetration_sum / outcomes.len() as f64,
        mean_query_time: time_sum / outcomes.len() as f64,
        probes: outcomes,
        balance_quantiles,
    })
}

/// One row of the radius sweep.
#[derive(Clone, Copy, Debug)]
pub struct SweepRow {
    pub r: u32,
    pub miss_rate: f64,
    pub penetration_rate: f64,
    pub mean_query_time: f64,
}

/// Collapses swept-radius reports into `(r, miss, penetration, time)` rows
/// sorted by radius.
pub fn miss_vs_penetration(reports: &[IndexRunReport]) -> Result<Vec<SweepRow>> {
    if reports.len() < 2 {
        return Err(Error::Empty("need at least 2 swept radii"));
    }
    let mut rows: Vec<SweepRow> = reports
        .iter()
        .map(|rep| SweepRow {
            r: rep.r,
            miss_rate: 1.0 - rep.hit_rate,
            penetration_rate: rep.penetration_rate,
            mean_query_time: rep.mean_query_time,
        })
        .collect();
    rows.sort_by_key(|row| row.r);
    Ok(rows)
}

/// Writes one CSV row per probe.
pub fn write_probe_csv<W: Write>(w: &mut W, report: &IndexRunReport) -> Result<()> {
    writeln!(
        w,
        "probe,label,hit,candidates_examined,full_verifications,tables_probed,true_neighbors,query_seconds"
    )?;
    for p in &report.probes {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{:.9}",
            p.probe,
            p.label,
            p.hit as u8,
            p.stats.candidates_examined,
            p.stats.full_verifications,
            p.stats.tables_probed,
            p.stats.true_neighbors,
            p.seconds
        )?;
    }
    Ok(())
}

/// Writes one CSV summary row per report (engine x radius).
pub fn write_summary_csv<W: Write>(w: &mut W, reports: &[IndexRunReport]) -> Result<()> {
    writeln!(
        w,
        "engine,r,hit_rate,miss_rate,penetration_rate,mean_query_seconds,balance_p10,balance_p50,balance_p90"
    )?;
    for rep in reports {
        let quantiles = match rep.balance_quantiles {
            Some([a, b, c]) => format!("{a:.6},{b:.6},{c:.6}"),
            None => ",,".to_string(),
        };
        writeln!(
            w,
            "{},{},{:.6},{:.6},{:.6},{:.9},{}",
            rep.engine,
            rep.r,
            rep.hit_rate,
            1.0 - rep.hit_rate,
            rep.penetration_rate,
            rep.mean_query_time,
            quantiles
        )?;
    }
    Ok(())
}
