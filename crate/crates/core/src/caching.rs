//! Content popularity, caching-vector constructors and exact-size cache
//! placement.
//!
//! File indices are 0-based: file `m` here is the `(m+1)`-th most popular.

use rand::Rng;

use crate::error::{invalid, Error, Result};

/// Library description: `n_files` files, `cache_size` slots per device and
/// the request distribution `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentParams {
    pub n_files: usize,
    pub cache_size: usize,
    /// Zipf exponent the popularity was built from, if any.
    pub beta: Option<f64>,
    pub q: Vec<f64>,
}

impl ContentParams {
    /// Zipf-popular library.
    pub fn zipf(n_files: usize, cache_size: usize, beta: f64) -> Result<Self> {
        let q = zipf_popularity(n_files, beta)?;
        let content = Self {
            n_files,
            cache_size,
            beta: Some(beta),
            q,
        };
        content.validate()?;
        Ok(content)
    }

    /// Library with an explicit popularity vector.
    pub fn with_popularity(cache_size: usize, q: Vec<f64>) -> Result<Self> {
        let content = Self {
            n_files: q.len(),
            cache_size,
            beta: None,
            q,
        };
        content.validate()?;
        Ok(content)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_files == 0 {
            return Err(invalid("n_files", "library must hold at least one file"));
        }
        if self.cache_size == 0 || self.cache_size > self.n_files {
            return Err(invalid(
                "cache_size",
                format!("must lie in 1..={}, got {}", self.n_files, self.cache_size),
            ));
        }
        if self.q.len() != self.n_files {
            return Err(Error::DimensionMismatch {
                expected: self.n_files,
                actual: self.q.len(),
            });
        }
        if self.q.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(invalid("q", "entries must be finite and non-negative"));
        }
        let total: f64 = self.q.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid("q", format!("must sum to 1, sums to {total}")));
        }
        if self.q.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("q", "must be non-increasing"));
        }
        if let Some(beta) = self.beta {
            if !(beta >= 0.0 && beta.is_finite()) {
                return Err(invalid("beta", "must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

/// Zipf request probabilities `q_m ∝ (m+1)^(-β)`.
pub fn zipf_popularity(n_files: usize, beta: f64) -> Result<Vec<f64>> {
    if n_files == 0 {
        return Err(invalid("n_files", "must be at least 1"));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(invalid("beta", "must be finite and non-negative"));
    }
    // The first weight is 1, so the normalizer cannot underflow for large β.
    let weights: Vec<f64> = (1..=n_files).map(|m| (-(beta) * (m as f64).ln()).exp()).collect();
    let total: f64 = weights.iter().rev().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Per-file caching probabilities summing to the cache size.
///
/// Also carries the cumulative segment boundaries used by the slot
/// construction of [`sample_cache_set`].
#[derive(Debug, Clone, PartialEq)]
pub struct CachingVector {
    values: Vec<f64>,
    cache_size: usize,
    boundaries: Vec<f64>,
}

impl CachingVector {
    /// Tolerance on `|Σ c - M|`.
    pub const BUDGET_TOL: f64 = 1e-9;

    pub fn new(values: Vec<f64>, cache_size: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("c", "must not be empty"));
        }
        if let Some(bad) = values.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
            return Err(invalid("c", format!("entries must lie in [0, 1], found {bad}")));
        }
        let total: f64 = values.iter().sum();
        if (total - cache_size as f64).abs() > Self::BUDGET_TOL {
            return Err(invalid(
                "c",
                format!("entries must sum to {cache_size}, sum to {total}"),
            ));
        }
        let mut boundaries = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        boundaries.push(0.0);
        for &c in &values {
            acc += c;
            boundaries.push(acc);
        }
        Ok(Self {
            values,
            cache_size,
            boundaries,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cache_size(&self) -> usize {
        self.cache_size
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Whether the cache set selected by slot offset `u ∈ [0, 1)` holds
    /// file `m`. Agrees with [`CachingVector::files_for_slot`].
    #[inline]
    pub fn slot_contains(&self, u: f64, m: usize) -> bool {
        let lo = self.boundaries[m];
        let hi = self.boundaries[m + 1];
        if hi <= lo {
            return false;
        }
        let i = (lo - u).ceil().max(0.0);
        i < self.cache_size as f64 && u + i < hi
    }

    /// Files hit by the points `u, u+1, …, u+M-1` when the segments of
    /// length `c_m` are laid end to end.
    pub fn files_for_slot(&self, u: f64) -> Vec<usize> {
        let n = self.values.len();
        let mut out = Vec::with_capacity(self.cache_size);
        let mut j = 0;
        for i in 0..self.cache_size {
            let point = u + i as f64;
            while j < n && self.boundaries[j + 1] <= point {
                j += 1;
            }
            let file = if j < n && out.last() != Some(&j) {
                j
            } else {
                // Only reachable through rounding of the budget: fall back to
                // the nearest unused file with positive mass.
                (0..n)
                    .rev()
                    .find(|&f| self.values[f] > 0.0 && !out.contains(&f))
                    .unwrap_or(n - 1)
            };
            out.push(file);
        }
        out
    }
}

/// Caches the `M` most popular files.
pub fn scheme_cpf(content: &ContentParams) -> Result<CachingVector> {
    content.validate()?;
    let mut order: Vec<usize> = (0..content.n_files).collect();
    order.sort_by(|&a, &b| content.q[b].total_cmp(&content.q[a]).then(a.cmp(&b)));
    let mut c = vec![0.0; content.n_files];
    for &m in order.iter().take(content.cache_size) {
        c[m] = 1.0;
    }
    CachingVector::new(c, content.cache_size)
}

/// Uniform random caching, `c_m = M / N_f`.
pub fn scheme_rc(content: &ContentParams) -> Result<CachingVector> {
    content.validate()?;
    let level = content.cache_size as f64 / content.n_files as f64;
    CachingVector::new(vec![level; content.n_files], content.cache_size)
}

/// Popularity-proportional caching capped at one: `c_m = min(1, κ q_m)`
/// with κ set so the budget is met exactly.
pub fn scheme_zipf(content: &ContentParams) -> Result<CachingVector> {
    content.validate()?;
    let kappa = zipf_water_level(&content.q, content.cache_size);
    let mut c: Vec<f64> = if kappa.is_finite() {
        content.q.iter().map(|&q| (kappa * q).min(1.0)).collect()
    } else {
        // Every requested file saturates; unrequested files share the rest.
        let positive = content.q.iter().filter(|&&q| q > 0.0).count();
        let zeros = content.n_files - positive;
        let share = content.cache_size.saturating_sub(positive) as f64 / zeros.max(1) as f64;
        content.q.iter().map(|&q| if q > 0.0 { 1.0 } else { share }).collect()
    };
    // Absorb the rounding residue in the uncapped entries.
    let total: f64 = c.iter().sum();
    let residue = content.cache_size as f64 - total;
    let free: f64 = c.iter().filter(|&&x| x < 1.0).sum();
    if residue != 0.0 && free > 0.0 {
        for x in c.iter_mut().filter(|x| **x < 1.0) {
            *x = (*x + residue * *x / free).clamp(0.0, 1.0);
        }
    }
    CachingVector::new(c, content.cache_size)
}

/// Scalar κ with `Σ min(1, κ q_m) = M`, found by scanning how many of the
/// most popular files saturate.
fn zipf_water_level(q: &[f64], cache_size: usize) -> f64 {
    let mut sorted: Vec<f64> = q.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let budget = cache_size as f64;
    // Suffix sums from the back, so no cancellation accumulates.
    let mut suffix = vec![0.0; sorted.len() + 1];
    for k in (0..sorted.len()).rev() {
        suffix[k] = suffix[k + 1] + sorted[k];
    }
    for k in 0..sorted.len() {
        if k as f64 >= budget || suffix[k] <= 0.0 {
            break;
        }
        // First k files capped at one; the rest share what is left.
        let kappa = (budget - k as f64) / suffix[k];
        if kappa * sorted[k] <= 1.0 + 1e-12 {
            return kappa;
        }
    }
    // Budget covers every file with positive popularity.
    f64::INFINITY
}

/// Draws a cache set of exactly `M` distinct files whose marginal inclusion
/// probabilities equal `c`.
pub fn sample_cache_set<R: Rng + ?Sized>(c: &CachingVector, rng: &mut R) -> Vec<usize> {
    let u: f64 = rng.random();
    c.files_for_slot(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::stats::chi_square_test;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn zipf_reference_profiles() {
        assert_close(
            &zipf_popularity(3, 1.0).unwrap(),
            &[6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0],
            1e-15,
        );
        assert_close(&zipf_popularity(4, 0.0).unwrap(), &[0.25; 4], 1e-15);
        assert!(zipf_popularity(12, 100.0).unwrap()[0] > 1.0 - 1e-10);
        assert!(zipf_popularity(0, 1.0).is_err());
        assert!(zipf_popularity(3, -1.0).is_err());
    }

    #[test]
    fn content_validation() {
        assert!(ContentParams::zipf(12, 2, 0.8).is_ok());
        assert!(ContentParams::zipf(2, 3, 0.8).is_err());
        assert!(ContentParams::with_popularity(1, vec![0.5, 0.4]).is_err());
        assert!(ContentParams::with_popularity(1, vec![0.4, 0.6]).is_err());
    }

    #[test]
    fn cpf_and_rc() {
        let content = ContentParams::zipf(12, 2, 0.8).unwrap();
        let cpf = scheme_cpf(&content).unwrap();
        let mut expected = vec![0.0; 12];
        expected[0] = 1.0;
        expected[1] = 1.0;
        assert_eq!(cpf.values(), &expected[..]);
        let rc = scheme_rc(&content).unwrap();
        assert_close(rc.values(), &[1.0 / 6.0; 12], 1e-15);
        let other = ContentParams::zipf(12, 2, 1.7).unwrap();
        assert_eq!(scheme_rc(&other).unwrap().values(), rc.values());
        let full = ContentParams::zipf(5, 5, 1.0).unwrap();
        assert_eq!(scheme_cpf(&full).unwrap().values(), &[1.0; 5]);
    }

    fn bisection_level(q: &[f64], budget: f64) -> f64 {
        let f = |k: f64| q.iter().map(|&x| (k * x).min(1.0)).sum::<f64>() - budget;
        let (mut lo, mut hi) = (0.0, 1.0);
        while f(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn zipf_caching_matches_bisection_oracle() {
        let content = ContentParams::zipf(3, 1, 1.0).unwrap();
        let c = scheme_zipf(&content).unwrap();
        assert_close(c.values(), &content.q, 1e-15);

        for &(n, m, beta) in &[(12, 2, 0.8), (12, 2, 2.0), (40, 8, 1.0), (20, 19, 0.5), (10, 3, 3.0)] {
            let content = ContentParams::zipf(n, m, beta).unwrap();
            let c = scheme_zipf(&content).unwrap();
            let kappa = bisection_level(&content.q, m as f64);
            let oracle: Vec<f64> = content.q.iter().map(|&x| (kappa * x).min(1.0)).collect();
            assert_close(c.values(), &oracle, 1e-12);
        }
        let uniform = ContentParams::zipf(12, 2, 0.0).unwrap();
        assert_close(
            scheme_zipf(&uniform).unwrap().values(),
            scheme_rc(&uniform).unwrap().values(),
            1e-15,
        );
        let steep = ContentParams::zipf(12, 2, 60.0).unwrap();
        assert_close(
            scheme_zipf(&steep).unwrap().values(),
            scheme_cpf(&steep).unwrap().values(),
            1e-9,
        );
    }

    #[test]
    fn slot_sets_are_exact_size_and_distinct() {
        let content = ContentParams::zipf(12, 4, 0.9).unwrap();
        let c = scheme_zipf(&content).unwrap();
        for i in 0..2000 {
            let u = i as f64 / 2000.0;
            let set = c.files_for_slot(u);
            assert_eq!(set.len(), 4);
            for w in set.windows(2) {
                assert!(w[0] < w[1]);
            }
            for m in 0..12 {
                assert_eq!(c.slot_contains(u, m), set.contains(&m), "u={u} m={m}");
            }
        }
        let cpf = scheme_cpf(&content).unwrap();
        let mut rng = seeded(1);
        for _ in 0..100 {
            assert_eq!(sample_cache_set(&cpf, &mut rng), vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn slot_marginals_match_caching_vector() {
        let content = ContentParams::zipf(12, 3, 0.7).unwrap();
        let c = scheme_zipf(&content).unwrap();
        let draws = 100_000;
        let mut counts = vec![0u64; 12];
        let mut rng = seeded(2);
        for _ in 0..draws {
            for m in sample_cache_set(&c, &mut rng) {
                counts[m] += 1;
            }
        }
        for (m, &k) in counts.iter().enumerate() {
            let pm = c.values()[m];
            let sd = (draws as f64 * pm * (1.0 - pm)).sqrt();
            assert!((k as f64 - draws as f64 * pm).abs() <= 3.0 * sd.max(1e-9), "file {m}");
        }
        // Indicators of one file across draws are Bernoulli(c_m); test the
        // hit/miss split of every file with χ².
        for (m, &k) in counts.iter().enumerate() {
            let pm = c.values()[m];
            if pm <= 0.0 || pm >= 1.0 {
                continue;
            }
            let expected = [draws as f64 * pm, draws as f64 * (1.0 - pm)];
            let (_, p) = chi_square_test(&[k, draws - k], &expected, 0);
            assert!(p > 1e-4, "file {m}: p = {p}");
        }
    }

    #[test]
    fn caching_vector_validation() {
        assert!(CachingVector::new(vec![0.5, 0.6], 1).is_err());
        assert!(CachingVector::new(vec![1.2, -0.2], 1).is_err());
        assert!(CachingVector::new(vec![0.5, 0.5], 1).is_ok());
    }
}
