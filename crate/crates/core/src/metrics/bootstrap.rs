//! Stratified cluster bootstrap for outlet-difference confidence intervals.
//!
//! Articles, not sentences, are the resampling unit: sentences within an
//! article are correlated, so each replicate redraws whole articles with
//! replacement within each outlet, recomputes both proportions from the
//! summed counts, and records the difference. The interval is the 2.5/97.5
//! percentile of the replicate differences.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{metric_fraction, AppealBasis, FeatureCounts, MetricKey};

/// 95% percentile interval of the bootstrap distribution of `p_a - p_b`.
/// Returns `None` when no replicate produced defined proportions on both
/// sides. Fixed seed implies identical intervals.
pub fn bootstrap_ci(
    metric: MetricKey,
    per_article_a: &[FeatureCounts],
    per_article_b: &[FeatureCounts],
    reps: u32,
    seed: u64,
    basis: AppealBasis,
) -> Option<(f64, f64)> {
    if per_article_a.is_empty() || per_article_b.is_empty() || reps == 0 {
        return None;
    }
    // Reduce each article to its (numerator, denominator) pair once.
    let fracs = |articles: &[FeatureCounts]| -> Vec<(u64, u64)> {
        articles.iter().map(|c| metric_fraction(metric, c, basis)).collect()
    };
    let a = fracs(per_article_a);
    let b = fracs(per_article_b);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut resample_p = |pairs: &[(u64, u64)]| -> Option<f64> {
        let mut num = 0u64;
        let mut den = 0u64;
        for _ in 0..pairs.len() {
            let (n, d) = pairs[rng.gen_range(0..pairs.len())];
            num += n;
            den += d;
        }
        (den > 0).then(|| num as f64 / den as f64)
    };

    let mut diffs = Vec::with_capacity(reps as usize);
    for _ in 0..reps {
        let pa = resample_p(&a);
        let pb = resample_p(&b);
        if let (Some(pa), Some(pb)) = (pa, pb) {
            diffs.push(pa - pb);
        }
    }
    if diffs.is_empty() {
        return None;
    }
    diffs.sort_by(|x, y| x.partial_cmp(y).expect("bootstrap diffs are finite"));
    let m = diffs.len();
    let lo = ((m as f64) * 0.025).floor() as usize;
    let hi = (((m as f64) * 0.975).floor() as usize).min(m - 1);
    Some((diffs[lo], diffs[hi]))
}
