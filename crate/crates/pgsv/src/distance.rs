//! Distance kernels: squared Euclidean over a dimension prefix, full
//! Euclidean, cosine similarity, and a batched scan form.
//!
//! Every search path in this crate ranks by squared Euclidean distance and
//! applies the square root only at output boundaries. The same scalar kernel
//! is used for single pairs and batched scans, so a given (query, row, d)
//! triple always produces the same f32 no matter which code path computed it.

use crate::error::{Error, Result};

/// Distance metric selector. Euclidean is the default everywhere; cosine is
/// opt-in and no benchmark path uses it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

/// Squared Euclidean distance over the first `d` coordinates.
///
/// Four independent accumulators keep the loop vectorizable while the
/// summation order stays fixed, which makes results reproducible across
/// runs and thread counts.
#[inline]
pub(crate) fn sq_euclidean_prefix_unchecked(a: &[f32], b: &[f32], d: usize) -> f32 {
    debug_assert!(d <= a.len() && d <= b.len());
    let a = &a[..d];
    let b = &b[..d];
    let mut acc0 = 0.0f32;
    let mut acc1 = 0.0f32;
    let mut acc2 = 0.0f32;
    let mut acc3 = 0.0f32;
    let mut i = 0usize;
    while i + 4 <= d {
        let d0 = a[i] - b[i];
        let d1 = a[i + 1] - b[i + 1];
        let d2 = a[i + 2] - b[i + 2];
        let d3 = a[i + 3] - b[i + 3];
        acc0 += d0 * d0;
        acc1 += d1 * d1;
        acc2 += d2 * d2;
        acc3 += d3 * d3;
        i += 4;
    }
    let mut out = (acc0 + acc1) + (acc2 + acc3);
    while i < d {
        let diff = a[i] - b[i];
        out += diff * diff;
        i += 1;
    }
    out
}

/// Squared Euclidean distance over the first `d` coordinates of `a` and `b`.
///
/// Monotone non-decreasing in `d` for fixed inputs.
pub fn sq_euclidean_prefix(a: &[f32], b: &[f32], d: usize) -> Result<f32> {
    let max = a.len().min(b.len());
    if d > max {
        return Err(Error::DimOutOfRange { d, dim: max });
    }
    Ok(sq_euclidean_prefix_unchecked(a, b, d))
}

/// Euclidean distance between two equal-length vectors.
pub fn euclidean(a: &[f32], b: &[f32]) -> Result<f32> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(sq_euclidean_prefix_unchecked(a, b, a.len()).sqrt())
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity, clamped to [-1, 1] against rounding.
pub fn cosine_sim(a: &[f32], b: &[f32]) -> Result<f32> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Metric-dispatched pairwise score: squared distance for Euclidean, the
/// similarity itself for cosine.
pub fn pairwise(metric: Metric, a: &[f32], b: &[f32]) -> Result<f32> {
    match metric {
        Metric::Euclidean => {
            if a.len() != b.len() {
                return Err(Error::LengthMismatch {
                    left: a.len(),
                    right: b.len(),
                });
            }
            Ok(sq_euclidean_prefix_unchecked(a, b, a.len()))
        }
        Metric::Cosine => cosine_sim(a, b),
    }
}

/// All-pairs squared Euclidean between two dense row-major blocks of width
/// `d`. Entry `(q, m)` lands at `q * m_rows + m` and equals
/// `sq_euclidean_prefix(query q, row m, d)` exactly (same kernel).
pub fn batch_sq_euclidean(queries: &[f32], corpus_rows: &[f32], d: usize) -> Result<Vec<f32>> {
    if d == 0 || !queries.len().is_multiple_of(d) || !corpus_rows.len().is_multiple_of(d) {
        return Err(Error::ShapeMismatch {
            data_len: queries.len().max(corpus_rows.len()),
            n_rows: 0,
            dim: d,
        });
    }
    let n_q = queries.len() / d;
    let n_m = corpus_rows.len() / d;
    let mut out = Vec::with_capacity(n_q * n_m);
    for q in 0..n_q {
        let qv = &queries[q * d..(q + 1) * d];
        for m in 0..n_m {
            let mv = &corpus_rows[m * d..(m + 1) * d];
            out.push(sq_euclidean_prefix_unchecked(qv, mv, d));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn rand_vec(rng: &mut StdRng, d: usize) -> Vec<f32> {
        (0..d).map(|_| rng.random::<f32>() * 2.0 - 1.0).collect()
    }

    #[test]
    fn prefix_identity_is_zero() {
        let a = [0.3f32, -1.2, 4.0, 0.0];
        for d in 0..=4 {
            assert_eq!(sq_euclidean_prefix(&a, &a, d).unwrap(), 0.0);
        }
    }

    #[test]
    fn prefix_hand_value() {
        let a = [1.0f32, 0.0];
        let b = [0.0f32, 1.0];
        assert_eq!(sq_euclidean_prefix(&a, &b, 2).unwrap(), 2.0);
    }

    #[test]
    fn prefix_rejects_out_of_range() {
        let a = [1.0f32, 2.0];
        assert!(matches!(
            sq_euclidean_prefix(&a, &a, 3),
            Err(Error::DimOutOfRange { d: 3, dim: 2 })
        ));
    }

    #[test]
    fn prefix_monotone_in_d() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..1000 {
            let a = rand_vec(&mut rng, 64);
            let b = rand_vec(&mut rng, 64);
            let half = sq_euclidean_prefix(&a, &b, 32).unwrap();
            let full = sq_euclidean_prefix(&a, &b, 64).unwrap();
            assert!(half <= full, "prefix distance decreased: {half} > {full}");
        }
    }

    #[test]
    fn euclidean_three_four_five() {
        let a = [3.0f32, 0.0];
        let b = [0.0f32, 4.0];
        assert_eq!(euclidean(&a, &b).unwrap(), 5.0);
        assert_eq!(euclidean(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn euclidean_symmetry() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..200 {
            let a = rand_vec(&mut rng, 17);
            let b = rand_vec(&mut rng, 17);
            assert_eq!(euclidean(&a, &b).unwrap(), euclidean(&b, &a).unwrap());
        }
    }

    #[test]
    fn euclidean_length_mismatch() {
        assert!(matches!(
            euclidean(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn cosine_hand_values() {
        assert_eq!(cosine_sim(&[2.0, 0.0], &[2.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_sim(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine_sim(&[1.0, 1.0], &[-1.0, -1.0]).unwrap(), -1.0);
    }

    #[test]
    fn cosine_rejects_zero_norm() {
        assert!(matches!(
            cosine_sim(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroNorm)
        ));
    }

    #[test]
    fn batch_matches_scalar_calls() {
        let mut rng = StdRng::seed_from_u64(3);
        let d = 24;
        let queries: Vec<f32> = (0..2 * d).map(|_| rng.random::<f32>()).collect();
        let rows: Vec<f32> = (0..3 * d).map(|_| rng.random::<f32>()).collect();
        let got = batch_sq_euclidean(&queries, &rows, d).unwrap();
        assert_eq!(got.len(), 6);
        for q in 0..2 {
            for m in 0..3 {
                let want = sq_euclidean_prefix(
                    &queries[q * d..(q + 1) * d],
                    &rows[m * d..(m + 1) * d],
                    d,
                )
                .unwrap();
                let have = got[q * 3 + m];
                assert!(
                    (have - want).abs() <= 1e-5 * want.abs().max(1.0),
                    "entry ({q},{m}): {have} vs {want}"
                );
            }
        }
    }

    #[test]
    fn batch_self_has_zero_diagonal() {
        let block = [0.5f32, -0.25, 1.5, 2.0, 0.0, -1.0];
        let got = batch_sq_euclidean(&block, &block, 3).unwrap();
        assert_eq!(got[0], 0.0);
        assert_eq!(got[3], 0.0);
    }

    #[test]
    fn batch_single_pair_equals_scalar() {
        let a = [1.0f32, 2.0, 3.0];
        let b = [0.0f32, 2.0, 5.0];
        let got = batch_sq_euclidean(&a, &b, 3).unwrap();
        assert_eq!(got, vec![sq_euclidean_prefix(&a, &b, 3).unwrap()]);
    }

    #[test]
    fn batch_rejects_ragged_shapes() {
        assert!(batch_sq_euclidean(&[1.0, 2.0, 3.0], &[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn normalized_euclidean_and_cosine_rank_identically() {
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..50 {
            let mut rows: Vec<Vec<f32>> = (0..20).map(|_| rand_vec(&mut rng, 12)).collect();
            for r in &mut rows {
                let n = dot(r, r).sqrt();
                for x in r.iter_mut() {
                    *x /= n;
                }
            }
            let q = &rows[0];
            let by_dist = rows
                .iter()
                .enumerate()
                .skip(1)
                .min_by(|a, b| {
                    euclidean(q, a.1)
                        .unwrap()
                        .total_cmp(&euclidean(q, b.1).unwrap())
                })
                .unwrap()
                .0;
            let by_cos = rows
                .iter()
                .enumerate()
                .skip(1)
                .max_by(|a, b| {
                    cosine_sim(q, a.1)
                        .unwrap()
                        .total_cmp(&cosine_sim(q, b.1).unwrap())
                })
                .unwrap()
                .0;
            assert_eq!(by_dist, by_cos);
        }
    }

    #[test]
    fn default_metric_is_euclidean() {
        assert_eq!(Metric::default(), Metric::Euclidean);
        let s = pairwise(Metric::default(), &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(s, 2.0);
    }
}
