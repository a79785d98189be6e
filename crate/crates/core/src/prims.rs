//! Deterministic data-parallel building blocks: scans, stable key-value
//! radix sort, and flag-driven stream compaction. Every pipeline stage is
//! built out of these. None of them mutate their inputs and repeated runs
//! are bit-identical.

use crate::{Error, Result};

/// out[i] = sum of in[0..=i].
pub fn inclusive_scan(values: &[u32]) -> Vec<u32> {
    let mut sum = 0u32;
    values
        .iter()
        .map(|v| {
            sum = sum.wrapping_add(*v);
            sum
        })
        .collect()
}

/// out[0] = 0; out[i] = sum of in[0..i].
pub fn exclusive_scan(values: &[u32]) -> Vec<u32> {
    let mut sum = 0u32;
    values
        .iter()
        .map(|v| {
            let prev = sum;
            sum = sum.wrapping_add(*v);
            prev
        })
        .collect()
}

/// Stable LSD radix sort of (key, value) pairs by key, 8 bits x 4 passes.
/// Equal keys keep their input order.
pub fn radix_sort_pairs(keys: &[u32], values: &[u32]) -> Result<(Vec<u32>, Vec<u32>)> {
    if keys.len() != values.len() {
        return Err(Error::LengthMismatch { left: keys.len(), right: values.len() });
    }
    let n = keys.len();
    let mut src_k = keys.to_vec();
    let mut src_v = values.to_vec();
    let mut dst_k = vec![0u32; n];
    let mut dst_v = vec![0u32; n];
    for pass in 0..4 {
        let shift = pass * 8;
        let mut counts = [0usize; 256];
        for k in &src_k {
            counts[((k >> shift) & 0xff) as usize] += 1;
        }
        let mut offsets = [0usize; 256];
        let mut total = 0;
        for (o, c) in offsets.iter_mut().zip(counts.iter()) {
            *o = total;
            total += c;
        }
        for i in 0..n {
            let digit = ((src_k[i] >> shift) & 0xff) as usize;
            let dst = offsets[digit];
            offsets[digit] += 1;
            dst_k[dst] = src_k[i];
            dst_v[dst] = src_v[i];
        }
        std::mem::swap(&mut src_k, &mut dst_k);
        std::mem::swap(&mut src_v, &mut dst_v);
    }
    Ok((src_k, src_v))
}

/// Drops the entries whose flag is 1 (1 = empty slot), preserving order.
/// Each survivor at index i lands at i - inclusive_scan(flags)[i].
pub fn trim_compact(empty_flags: &[u32], keys: &[u32], values: &[u32]) -> Result<(Vec<u32>, Vec<u32>)> {
    if empty_flags.len() != keys.len() {
        return Err(Error::LengthMismatch { left: empty_flags.len(), right: keys.len() });
    }
    if keys.len() != values.len() {
        return Err(Error::LengthMismatch { left: keys.len(), right: values.len() });
    }
    for (index, &value) in empty_flags.iter().enumerate() {
        if value > 1 {
            return Err(Error::BadTrimFlag { value, index });
        }
    }
    let shifts = inclusive_scan(empty_flags);
    let kept = keys.len() - shifts.last().copied().unwrap_or(0) as usize;
    let mut out_keys = vec![0u32; kept];
    let mut out_values = vec![0u32; kept];
    for i in 0..keys.len() {
        if empty_flags[i] == 0 {
            let dst = i - shifts[i] as usize;
            out_keys[dst] = keys[i];
            out_values[dst] = values[i];
        }
    }
    Ok((out_keys, out_values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inclusive_scan_hand_cases() {
        assert_eq!(inclusive_scan(&[1, 1, 0, 1]), vec![1, 2, 2, 3]);
        assert_eq!(inclusive_scan(&[]), Vec::<u32>::new());
    }

    #[test]
    fn exclusive_scan_hand_cases() {
        assert_eq!(exclusive_scan(&[3, 1, 7]), vec![0, 3, 4]);
        assert_eq!(exclusive_scan(&[5]), vec![0]);
    }

    #[test]
    fn scans_agree_with_sequential_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let values: Vec<u32> = (0..1_000_000).map(|_| rng.random_range(0..8u32)).collect();
        let inc = inclusive_scan(&values);
        let mut sum = 0u32;
        for (i, v) in values.iter().enumerate() {
            sum += v;
            assert_eq!(inc[i], sum);
        }
        // exclusive = inclusive shifted right with 0 injected
        let exc = exclusive_scan(&values);
        assert_eq!(exc[0], 0);
        assert_eq!(&exc[1..], &inc[..inc.len() - 1]);
    }

    #[test]
    fn radix_sort_hand_case() {
        let (k, v) = radix_sort_pairs(&[9, 3, 5], &[0, 1, 2]).unwrap();
        assert_eq!(k, vec![3, 5, 9]);
        assert_eq!(v, vec![1, 2, 0]);
    }

    #[test]
    fn radix_sort_sorted_input_is_identity() {
        let keys: Vec<u32> = (0..1000).collect();
        let values: Vec<u32> = (0..1000).rev().collect();
        let (k, v) = radix_sort_pairs(&keys, &values).unwrap();
        assert_eq!(k, keys);
        assert_eq!(v, values);
    }

    #[test]
    fn radix_sort_length_mismatch_errors() {
        assert!(radix_sort_pairs(&[1, 2], &[1]).is_err());
    }

    #[test]
    fn radix_sort_matches_stable_sort_with_duplicates() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let keys: Vec<u32> = (0..200_000).map(|_| rng.random_range(0..5_000u32)).collect();
        let values: Vec<u32> = (0..200_000).collect();
        let (k, v) = radix_sort_pairs(&keys, &values).unwrap();
        let mut oracle: Vec<(u32, u32)> = keys.iter().copied().zip(values.iter().copied()).collect();
        oracle.sort_by_key(|p| p.0);
        for i in 0..oracle.len() {
            assert_eq!((k[i], v[i]), oracle[i]);
        }
    }

    #[test]
    fn trim_hand_cases() {
        let (k, v) = trim_compact(&[0, 1, 0, 1], &[10, 0, 20, 0], &[0, 1, 2, 3]).unwrap();
        assert_eq!(k, vec![10, 20]);
        assert_eq!(v, vec![0, 2]);
        let (k, v) = trim_compact(&[1, 1], &[1, 2], &[3, 4]).unwrap();
        assert!(k.is_empty() && v.is_empty());
    }

    #[test]
    fn trim_rejects_bad_flags() {
        let err = trim_compact(&[0, 2], &[1, 2], &[3, 4]).unwrap_err();
        assert!(matches!(err, Error::BadTrimFlag { value: 2, index: 1 }));
    }

    #[test]
    fn trim_matches_filter_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let flags: Vec<u32> = (0..n).map(|_| rng.random_range(0..2u32)).collect();
        let keys: Vec<u32> = (0..n).map(|_| rng.random()).collect();
        let values: Vec<u32> = (0..n as u32).collect();
        let (k, v) = trim_compact(&flags, &keys, &values).unwrap();
        let expect: Vec<(u32, u32)> = flags
            .iter()
            .zip(keys.iter().zip(values.iter()))
            .filter(|(f, _)| **f == 0)
            .map(|(_, (k, v))| (*k, *v))
            .collect();
        assert_eq!(k.len(), expect.len());
        for (i, (ek, ev)) in expect.iter().enumerate() {
            assert_eq!((k[i], v[i]), (*ek, *ev));
        }
    }

    proptest! {
        #[test]
        fn radix_sort_is_a_stable_permutation(keys in proptest::collection::vec(0u32..64, 0..300)) {
            let values: Vec<u32> = (0..keys.len() as u32).collect();
            let (k, v) = radix_sort_pairs(&keys, &values).unwrap();
            prop_assert!(k.windows(2).all(|w| w[0] <= w[1]));
            let mut seen = vec![false; keys.len()];
            for (sk, sv) in k.iter().zip(v.iter()) {
                prop_assert_eq!(keys[*sv as usize], *sk);
                prop_assert!(!seen[*sv as usize]);
                seen[*sv as usize] = true;
            }
            // stability: duplicates keep ascending original indices
            for w in k.windows(2).zip(v.windows(2)) {
                if w.0[0] == w.0[1] {
                    prop_assert!(w.1[0] < w.1[1]);
                }
            }
        }

        #[test]
        fn trim_output_length_is_zero_flag_count(flags in proptest::collection::vec(0u32..2, 0..300)) {
            let keys: Vec<u32> = (0..flags.len() as u32).collect();
            let (k, _) = trim_compact(&flags, &keys, &keys).unwrap();
            prop_assert_eq!(k.len(), flags.iter().filter(|f| **f == 0).count());
        }
    }
}
