//! Small exact-combinatorics helpers used by the genome codec: binomial
//! coefficients, lexicographic (un)ranking of k-subsets and permutations,
//! and enumeration of input-usage masks.

use num_bigint::BigUint;

/// Binomial coefficient for the small arguments used by token schemas.
/// Panics on overflow; the largest value needed here is choose(12, 6).
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut res: u64 = 1;
    for i in 0..k {
        res = res * (n - i) / (i + 1);
    }
    res
}

pub fn binomial_big(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let mut res = BigUint::from(1u32);
    for i in 0..k {
        res = res * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    res
}

pub fn factorial(n: u64) -> u64 {
    (1..=n).product::<u64>().max(1)
}

/// The `rank`-th k-subset of `{0, .., n-1}` in lexicographic order.
pub fn unrank_subset(mut rank: u64, n: usize, k: usize) -> Vec<usize> {
    debug_assert!(rank < binomial(n as u64, k as u64));
    let mut out = Vec::with_capacity(k);
    let mut next = 0usize;
    for remaining in (1..=k).rev() {
        loop {
            let with_next = binomial((n - next - 1) as u64, (remaining - 1) as u64);
            if rank < with_next {
                out.push(next);
                next += 1;
                break;
            }
            rank -= with_next;
            next += 1;
        }
    }
    out
}

/// Lexicographic rank of a strictly increasing k-subset of `{0, .., n-1}`.
pub fn rank_subset(subset: &[usize], n: usize) -> u64 {
    let k = subset.len();
    let mut rank = 0u64;
    let mut prev = 0usize;
    for (pos, &element) in subset.iter().enumerate() {
        debug_assert!(element >= prev && element < n);
        for skipped in prev..element {
            rank += binomial((n - skipped - 1) as u64, (k - pos - 1) as u64);
        }
        prev = element + 1;
    }
    rank
}

/// The `rank`-th permutation of `0..n` in lexicographic order (Lehmer code).
pub fn unrank_permutation(mut rank: u64, n: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n);
    for position in (1..=n).rev() {
        let f = factorial(position as u64 - 1);
        let idx = (rank / f) as usize;
        rank %= f;
        out.push(pool.remove(idx));
    }
    out
}

pub fn rank_permutation(perm: &[usize]) -> u64 {
    let n = perm.len();
    let mut pool: Vec<usize> = (0..n).collect();
    let mut rank = 0u64;
    for (position, &value) in perm.iter().enumerate() {
        let idx = pool.iter().position(|&x| x == value).expect("valid permutation");
        rank += idx as u64 * factorial((n - position - 1) as u64);
        pool.remove(idx);
    }
    rank
}

/// Usage masks over `width` selected taps with at least two bits set, in
/// ascending numeric order. Width is at most the maximum in-degree.
pub fn usage_masks(width: usize) -> Vec<u32> {
    (0u32..1 << width).filter(|m| m.count_ones() >= 2).collect()
}
