//! Receiver-pair sequences for phase 2.
//!
//! Every construction here returns pairs of distinct receivers. Full rounds of
//! the complete graph are listed lexicographically; partial rounds are taken
//! from decompositions of `K_N` into regular spanning subgraphs so that any
//! prefix of whole factors keeps every receiver's degree equal.

use super::Endpoint;

pub(super) type Pair = [Endpoint; 2];

fn pair(a: usize, ca: usize, b: usize, cb: usize) -> Pair {
    [Endpoint::new(a, ca), Endpoint::new(b, cb)]
}

/// `{0,1}, {0,2}, …, {N-2,N-1}` on one copy.
pub(super) fn lexicographic_round(n: usize, copy: usize) -> Vec<Pair> {
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            out.push(pair(a, copy, b, copy));
        }
    }
    out
}

/// Factor `s` (`0 ≤ s < N-1`) of the circle-method 1-factorization of `K_N`,
/// `N` even: vertex `N-1` is fixed, the rest sit on a circle of `N-1`.
pub(super) fn circle_factor(n: usize, s: usize, copy: usize) -> Vec<Pair> {
    debug_assert!(n.is_multiple_of(2) && s < n - 1);
    let ring = n - 1;
    let mut out = Vec::with_capacity(n / 2);
    out.push(ordered(s, n - 1, copy));
    for d in 1..n / 2 {
        let a = (s + d) % ring;
        let b = (s + ring - d) % ring;
        out.push(ordered(a, b, copy));
    }
    out
}

/// Difference class `d` (`1 ≤ d ≤ (N-1)/2`) of `K_N`, `N` odd: the `N` edges
/// `{x, x+d mod N}`. Each class is 2-regular, and the classes partition `K_N`.
pub(super) fn difference_class(n: usize, d: usize, copy: usize) -> Vec<Pair> {
    debug_assert!(n % 2 == 1 && d >= 1 && 2 * d < n);
    (0..n).map(|x| ordered(x, (x + d) % n, copy)).collect()
}

/// Perfect matching between the two copies: `(i, 0)` with `(i+1 mod N, 1)`.
pub(super) fn cross_copy_matching(n: usize) -> Vec<Pair> {
    (0..n).map(|i| pair(i, 0, (i + 1) % n, 1)).collect()
}

/// Pairs consecutive endpoints in the order `(0,0) … (N-1,0), (0,1) … (N-1,1)`.
/// With `k·N` even, every pair joins distinct receivers (`N ≥ 2`).
pub(super) fn consecutive_matching(n: usize, k: usize) -> Vec<Pair> {
    let endpoints: Vec<Endpoint> =
        (0..k).flat_map(|c| (0..n).map(move |i| Endpoint::new(i, c))).collect();
    endpoints.chunks_exact(2).map(|w| [w[0], w[1]]).collect()
}

fn ordered(a: usize, b: usize, copy: usize) -> Pair {
    if a < b {
        pair(a, copy, b, copy)
    } else {
        pair(b, copy, a, copy)
    }
}
