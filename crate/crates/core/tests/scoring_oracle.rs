//! Exhaustive oracle for the word-alignment counts.
//!
//! Every pair of word sequences of length ≤ 6 over a 3-word alphabet is
//! aligned twice: once by the DP under test and once by exhaustive
//! enumeration of alignments (branch-and-bound DFS). The DFS tries
//! moves in the documented preference order (match/substitution, then
//! deletion, then insertion), so the first optimal alignment it
//! completes is exactly the one the DP traceback must select.

use lipvsr_core::scoring::{accuracy, align_words, correctness, AlignmentCounts};
use lipvsr_core::rng::rng_from_seed;
use rand::Rng;
use std::collections::HashMap;

/// Minimum edit cost by full enumeration with an admissible bound
/// (remaining cost is at least the length gap).
fn enumerate_min_cost(r: &[u8], h: &[u8], i: usize, j: usize, cost: usize, best: &mut usize) {
    if cost + i.abs_diff(j) > *best {
        return;
    }
    if i == 0 && j == 0 {
        *best = (*best).min(cost);
        return;
    }
    if i > 0 && j > 0 {
        let c = cost + usize::from(r[i - 1] != h[j - 1]);
        enumerate_min_cost(r, h, i - 1, j - 1, c, best);
    }
    if i > 0 {
        enumerate_min_cost(r, h, i - 1, j, cost + 1, best);
    }
    if j > 0 {
        enumerate_min_cost(r, h, i, j - 1, cost + 1, best);
    }
}

/// First optimal alignment in preference-ordered DFS; accumulates
/// counts on the unwind. Returns true once an optimal leaf is reached.
fn preferred_alignment(
    r: &[u8],
    h: &[u8],
    i: usize,
    j: usize,
    cost: usize,
    opt: usize,
    acc: &mut AlignmentCounts,
) -> bool {
    if cost + i.abs_diff(j) > opt {
        return false;
    }
    if i == 0 && j == 0 {
        return cost == opt;
    }
    if i > 0 && j > 0 {
        let eq = r[i - 1] == h[j - 1];
        if preferred_alignment(r, h, i - 1, j - 1, cost + usize::from(!eq), opt, acc) {
            if eq {
                acc.hits += 1;
            } else {
                acc.substitutions += 1;
            }
            return true;
        }
    }
    if i > 0 && preferred_alignment(r, h, i - 1, j, cost + 1, opt, acc) {
        acc.deletions += 1;
        return true;
    }
    if j > 0 && preferred_alignment(r, h, i, j - 1, cost + 1, opt, acc) {
        acc.insertions += 1;
        return true;
    }
    false
}

fn oracle(r: &[u8], h: &[u8]) -> AlignmentCounts {
    let mut best = r.len().max(h.len());
    enumerate_min_cost(r, h, r.len(), h.len(), 0, &mut best);
    let mut acc = AlignmentCounts {
        hits: 0,
        substitutions: 0,
        deletions: 0,
        insertions: 0,
        reference_len: r.len(),
    };
    let found = preferred_alignment(r, h, r.len(), h.len(), 0, best, &mut acc);
    assert!(found, "no alignment at enumerated optimum");
    acc
}

fn all_sequences(max_len: usize, alphabet: u8) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for seq in &frontier {
            for s in 0..alphabet {
                let mut longer = seq.clone();
                longer.push(s);
                out.push(longer.clone());
                next.push(longer);
            }
        }
        frontier = next;
    }
    out
}

/// Counts depend only on the equality pattern, so pairs are deduped by
/// relabeling words in order of first appearance across ref then hyp.
fn canonical_key(r: &[u8], h: &[u8]) -> u64 {
    let mut relabel = [u8::MAX; 3];
    let mut next = 0u8;
    let mut key = 0u64;
    key |= r.len() as u64;
    key |= (h.len() as u64) << 3;
    let mut shift = 6;
    for &s in r.iter().chain(h) {
        if relabel[s as usize] == u8::MAX {
            relabel[s as usize] = next;
            next += 1;
        }
        key |= u64::from(relabel[s as usize]) << shift;
        shift += 2;
    }
    key
}

#[test]
fn alignment_counts_match_exhaustive_oracle() {
    let seqs = all_sequences(6, 3);
    assert_eq!(seqs.len(), 1093);
    let mut cache: HashMap<u64, AlignmentCounts> = HashMap::new();
    for r in &seqs {
        for h in &seqs {
            let got = align_words(r, h);
            let key = canonical_key(r, h);
            let want = *cache.entry(key).or_insert_with(|| oracle(r, h));
            assert_eq!(
                (got.hits, got.substitutions, got.deletions, got.insertions),
                (want.hits, want.substitutions, want.deletions, want.insertions),
                "ref {r:?} hyp {h:?}"
            );
            assert_eq!(got.hits + got.substitutions + got.deletions, r.len());
        }
    }
}

#[test]
fn count_identities_on_random_pairs() {
    let mut rng = rng_from_seed(1007);
    for _ in 0..1000 {
        let n = rng.random_range(0..=12);
        let m = rng.random_range(0..=12);
        let r: Vec<u8> = (0..n).map(|_| rng.random_range(0..5)).collect();
        let h: Vec<u8> = (0..m).map(|_| rng.random_range(0..5)).collect();
        let c = align_words(&r, &h);
        assert_eq!(c.hits + c.substitutions + c.deletions, c.reference_len);
        if c.reference_len > 0 {
            let acc = accuracy(&c).unwrap();
            let cor = correctness(&c).unwrap();
            assert!(acc <= cor + 1e-12, "accuracy {acc} > correctness {cor}");
        }
        // Swapping the sides preserves total cost and exchanges the
        // deletion/insertion roles.
        let swapped = align_words(&h, &r);
        assert_eq!(c.edit_cost(), swapped.edit_cost(), "ref {r:?} hyp {h:?}");
        assert_eq!(swapped.reference_len, h.len());
    }
}

#[test]
fn swap_exchanges_deletions_and_insertions() {
    let mut rng = rng_from_seed(2024);
    for _ in 0..500 {
        let n = rng.random_range(0..=8);
        let m = rng.random_range(0..=8);
        let r: Vec<u8> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let h: Vec<u8> = (0..m).map(|_| rng.random_range(0..3)).collect();
        let fwd = align_words(&r, &h);
        let rev = align_words(&h, &r);
        assert_eq!(fwd.substitutions, rev.substitutions, "ref {r:?} hyp {h:?}");
        assert_eq!(fwd.deletions, rev.insertions, "ref {r:?} hyp {h:?}");
        assert_eq!(fwd.insertions, rev.deletions, "ref {r:?} hyp {h:?}");
        assert_eq!(fwd.hits, rev.hits, "ref {r:?} hyp {h:?}");
    }
}
