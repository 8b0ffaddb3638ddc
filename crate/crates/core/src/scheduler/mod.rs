//! Slot schedules and CSIT tables.
//!
//! A schedule has two phases. Phase 1 serves each `(receiver, copy)` once
//! with the raw messages of every transmitter. Phase 2 serves pairs of
//! endpoints; each endpoint is served exactly `M-1` times so that, together
//! with its phase-1 observation, its receiver collects `M` equations per copy.
//!
//! When the per-copy pair count `N(M-1)/2` is not an integer (and for all
//! `N ≥ M` schedules with odd `N`) messages and slots are doubled (`k = 2`).
//! Phase-2 endpoints then carry their own copy index: a doubled schedule may
//! pair copy 0 of one receiver with copy 1 of another, which is what makes the
//! per-endpoint balance attainable when both `M-1` and `N` are odd.

mod pairing;
mod table;

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use table::{build_csit_table, CsitState, CsitTable, StateCounts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SchemeCase {
    /// `M ≥ N`, except even `M` with odd `N`.
    MGeNGeneral,
    /// `M ≥ N`, `M` even, `N` odd; doubled.
    MGeNEvenMOddN,
    /// `N > M` (or `N ≥ M` when not covered above), `N` even.
    NGeMEvenN,
    /// `N ≥ M`, `N` odd; doubled.
    NGeMOddN,
}

impl SchemeCase {
    pub fn replication(self) -> usize {
        match self {
            SchemeCase::MGeNEvenMOddN | SchemeCase::NGeMOddN => 2,
            SchemeCase::MGeNGeneral | SchemeCase::NGeMEvenN => 1,
        }
    }

    pub fn is_m_ge_n(self) -> bool {
        matches!(self, SchemeCase::MGeNGeneral | SchemeCase::MGeNEvenMOddN)
    }

    pub fn tag(self) -> &'static str {
        match self {
            SchemeCase::MGeNGeneral => "M_GE_N_GENERAL",
            SchemeCase::MGeNEvenMOddN => "M_GE_N_EVEN_M_ODD_N",
            SchemeCase::NGeMEvenN => "N_GE_M_EVEN_N",
            SchemeCase::NGeMOddN => "N_GE_M_ODD_N",
        }
    }
}

impl fmt::Display for SchemeCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Picks the scheme branch for `(M, N)`. Ties (`M = N`) take the `M ≥ N` branch.
pub fn classify_case(m: usize, n: usize) -> Result<SchemeCase> {
    if m == 0 || n == 0 {
        return Err(invalid(format!("M and N must be positive (M={m}, N={n})")));
    }
    Ok(if m >= n {
        if m.is_multiple_of(2) && !n.is_multiple_of(2) {
            SchemeCase::MGeNEvenMOddN
        } else {
            SchemeCase::MGeNGeneral
        }
    } else if n.is_multiple_of(2) {
        SchemeCase::NGeMEvenN
    } else {
        SchemeCase::NGeMOddN
    })
}

/// One copy of one receiver's message block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Endpoint {
    pub receiver: usize,
    pub copy: usize,
}

impl Endpoint {
    pub fn new(receiver: usize, copy: usize) -> Self {
        Self { receiver, copy }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W{}^{}", self.receiver + 1, self.copy + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase1Slot {
    pub slot: usize,
    pub served: Endpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase2Slot {
    pub slot: usize,
    pub pair: [Endpoint; 2],
}

impl Phase2Slot {
    /// The other endpoint of the pair, if `receiver` is served here.
    pub fn partner_of(&self, receiver: usize) -> Option<(Endpoint, Endpoint)> {
        let [a, b] = self.pair;
        if a.receiver == receiver {
            Some((a, b))
        } else if b.receiver == receiver {
            Some((b, a))
        } else {
            None
        }
    }
}

/// What happens in a given slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotRecord {
    Phase1(Phase1Slot),
    Phase2(Phase2Slot),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule")]
pub struct Schedule {
    pub m: usize,
    pub n: usize,
    pub case: SchemeCase,
    pub k: usize,
    pub total_slots: usize,
    pub phase1: Vec<Phase1Slot>,
    pub phase2: Vec<Phase2Slot>,
}

#[derive(Deserialize)]
struct RawSchedule {
    m: usize,
    n: usize,
    case: SchemeCase,
    k: usize,
    total_slots: usize,
    phase1: Vec<Phase1Slot>,
    phase2: Vec<Phase2Slot>,
}

impl TryFrom<RawSchedule> for Schedule {
    type Error = Error;

    fn try_from(r: RawSchedule) -> Result<Self> {
        let s = Schedule {
            m: r.m,
            n: r.n,
            case: r.case,
            k: r.k,
            total_slots: r.total_slots,
            phase1: r.phase1,
            phase2: r.phase2,
        };
        s.validate()?;
        Ok(s)
    }
}

impl Schedule {
    pub fn phase1_len(&self) -> usize {
        self.phase1.len()
    }

    pub fn phase2_len(&self) -> usize {
        self.phase2.len()
    }

    pub fn message_count(&self) -> usize {
        self.k * self.m * self.n
    }

    pub fn slot(&self, t: usize) -> Option<SlotRecord> {
        if t < self.phase1.len() {
            Some(SlotRecord::Phase1(self.phase1[t]))
        } else {
            self.phase2.get(t - self.phase1.len()).map(|p| SlotRecord::Phase2(*p))
        }
    }

    /// Slot in which `endpoint` was broadcast during phase 1.
    pub fn phase1_slot_of(&self, endpoint: Endpoint) -> Option<usize> {
        self.phase1.iter().find(|p| p.served == endpoint).map(|p| p.slot)
    }

    /// Checks lengths, slot numbering, phase-1 coverage and phase-2 balance.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::SchemeConstruction(msg));
        let expected_case = classify_case(self.m, self.n)?;
        if self.n < 2 {
            return bad(format!("N={} leaves no receiver pairs", self.n));
        }
        if self.case != expected_case || self.k != expected_case.replication() {
            return bad(format!(
                "case {} / k={} does not match (M={}, N={})",
                self.case, self.k, self.m, self.n
            ));
        }
        let p1 = self.k * self.n;
        let p2 = self.k * self.n * (self.m - 1) / 2;
        if self.phase1.len() != p1 || self.phase2.len() != p2 {
            return bad(format!(
                "phase lengths {}+{} differ from {p1}+{p2}",
                self.phase1.len(),
                self.phase2.len()
            ));
        }
        if self.total_slots != p1 + p2 || 2 * self.total_slots != self.k * self.n * (self.m + 1) {
            return bad(format!("total slot count {} is inconsistent", self.total_slots));
        }
        let in_range = |e: &Endpoint| e.receiver < self.n && e.copy < self.k;
        let mut served = BTreeMap::new();
        for (t, p) in self.phase1.iter().enumerate() {
            if p.slot != t || !in_range(&p.served) {
                return bad(format!("malformed phase-1 record at position {t}"));
            }
            *served.entry(p.served).or_insert(0usize) += 1;
        }
        if served.len() != p1 || served.values().any(|&c| c != 1) {
            return bad("phase 1 must serve every (receiver, copy) exactly once".into());
        }
        let mut uses: BTreeMap<Endpoint, usize> = BTreeMap::new();
        for (q, p) in self.phase2.iter().enumerate() {
            let [a, b] = p.pair;
            if p.slot != p1 + q || !in_range(&a) || !in_range(&b) {
                return bad(format!("malformed phase-2 record at position {q}"));
            }
            if a.receiver == b.receiver {
                return bad(format!("phase-2 slot {} pairs receiver {} with itself", p.slot, a.receiver));
            }
            *uses.entry(a).or_default() += 1;
            *uses.entry(b).or_default() += 1;
        }
        for r in 0..self.n {
            for c in 0..self.k {
                let e = Endpoint::new(r, c);
                let got = uses.get(&e).copied().unwrap_or(0);
                if got != self.m - 1 {
                    return bad(format!(
                        "receiver {r} copy {c} appears in {got} phase-2 slots, expected {}",
                        self.m - 1
                    ));
                }
            }
        }
        Ok(())
    }

    /// For `N ≥ M` schedules as built: each round of `kN/2` consecutive
    /// phase-2 slots is a perfect matching of all `kN` endpoints.
    pub fn validate_rounds(&self) -> Result<()> {
        if self.case.is_m_ge_n() {
            return Ok(());
        }
        let round = self.k * self.n / 2;
        for (r, chunk) in self.phase2.chunks(round).enumerate() {
            let mut seen = std::collections::BTreeSet::new();
            for p in chunk {
                for e in p.pair {
                    if !seen.insert(e) {
                        return Err(Error::SchemeConstruction(format!(
                            "round {r} serves receiver {} copy {} twice",
                            e.receiver, e.copy
                        )));
                    }
                }
            }
            if seen.len() != self.k * self.n {
                return Err(Error::SchemeConstruction(format!("round {r} does not cover all receivers")));
            }
        }
        Ok(())
    }

    /// Aligned text listing of the transmitted message blocks per slot.
    pub fn render_text(&self) -> String {
        let label = |e: Endpoint| {
            if self.k == 1 {
                format!("W{}", e.receiver + 1)
            } else {
                e.to_string()
            }
        };
        let mut out = format!(
            "M={} N={} case={} k={} T={} (phase 1: {} slots, phase 2: {} slots)\n",
            self.m,
            self.n,
            self.case,
            self.k,
            self.total_slots,
            self.phase1.len(),
            self.phase2.len()
        );
        out.push_str("Time  Phase  Tx\n");
        for p in &self.phase1 {
            out.push_str(&format!("{:<5} {:<6} {}\n", p.slot + 1, 1, label(p.served)));
        }
        for p in &self.phase2 {
            out.push_str(&format!(
                "{:<5} {:<6} {},{}\n",
                p.slot + 1,
                2,
                label(p.pair[0]),
                label(p.pair[1])
            ));
        }
        out
    }
}

fn phase2_pairs(m: usize, n: usize, case: SchemeCase) -> Result<Vec<pairing::Pair>> {
    let k = case.replication();
    let mut pairs = Vec::new();
    if m == 1 {
        return Ok(pairs);
    }
    if case.is_m_ge_n() {
        let q = (m - 1) / (n - 1);
        let r = (m - 1) % (n - 1);
        for _ in 0..q {
            for c in 0..k {
                pairs.extend(pairing::lexicographic_round(n, c));
            }
        }
        if k == 1 {
            if n.is_multiple_of(2) {
                for s in 0..r {
                    pairs.extend(pairing::circle_factor(n, s, 0));
                }
            } else {
                if !r.is_multiple_of(2) {
                    return Err(Error::SchemeConstruction(format!(
                        "odd remainder {r} with odd N={n} cannot be balanced"
                    )));
                }
                for d in 1..=r / 2 {
                    pairs.extend(pairing::difference_class(n, d, 0));
                }
            }
        } else {
            // M even, N odd: r is odd. Even part per copy, then one matching across copies.
            for c in 0..2 {
                for d in 1..=(r - 1) / 2 {
                    pairs.extend(pairing::difference_class(n, d, c));
                }
            }
            pairs.extend(pairing::cross_copy_matching(n));
        }
    } else {
        for _ in 0..m - 1 {
            pairs.extend(pairing::consecutive_matching(n, k));
        }
    }
    Ok(pairs)
}

/// Builds the canonical schedule for `(M, N)` and verifies its balance.
pub fn build_schedule(m: usize, n: usize) -> Result<Schedule> {
    let case = classify_case(m, n)?;
    if n < 2 {
        return Err(Error::UnsupportedConfiguration {
            m,
            n,
            reason: "phase 2 needs at least two receivers".into(),
        });
    }
    let k = case.replication();
    let phase1: Vec<Phase1Slot> = (0..k)
        .flat_map(|c| (0..n).map(move |i| Endpoint::new(i, c)))
        .enumerate()
        .map(|(slot, served)| Phase1Slot { slot, served })
        .collect();
    let offset = phase1.len();
    let phase2 = phase2_pairs(m, n, case)?
        .into_iter()
        .enumerate()
        .map(|(q, pair)| Phase2Slot { slot: offset + q, pair })
        .collect::<Vec<_>>();
    let schedule = Schedule {
        m,
        n,
        case,
        k,
        total_slots: offset + phase2.len(),
        phase1,
        phase2,
    };
    schedule.validate()?;
    schedule.validate_rounds()?;
    Ok(schedule)
}

fn check_permutation(perm: &[usize], len: usize, what: &str) -> Result<()> {
    if perm.len() != len {
        return Err(invalid(format!("{what} permutation has length {}, expected {len}", perm.len())));
    }
    let mut seen = vec![false; len];
    for &p in perm {
        if p >= len || std::mem::replace(&mut seen[p], true) {
            return Err(invalid(format!("{what} permutation is not a bijection on 0..{len}")));
        }
    }
    Ok(())
}

/// Reorders slots within each phase: new position `p` carries what old
/// position `perm[p]` carried.
///
/// Round disjointness of `N ≥ M` schedules is not preserved in general, so the
/// result is validated on per-receiver counts only.
pub fn permute_schedule(s: &Schedule, perm1: &[usize], perm2: &[usize]) -> Result<Schedule> {
    check_permutation(perm1, s.phase1.len(), "phase-1")?;
    check_permutation(perm2, s.phase2.len(), "phase-2")?;
    let offset = s.phase1.len();
    let phase1 = perm1
        .iter()
        .enumerate()
        .map(|(slot, &src)| Phase1Slot { slot, served: s.phase1[src].served })
        .collect();
    let phase2 = perm2
        .iter()
        .enumerate()
        .map(|(q, &src)| Phase2Slot { slot: offset + q, pair: s.phase2[src].pair })
        .collect();
    let out = Schedule { phase1, phase2, ..s.clone() };
    out.validate()?;
    Ok(out)
}

fn factorial(n: usize) -> BigUint {
    (1..=n as u64).fold(BigUint::one(), |acc, x| acc * x)
}

/// Number of distinct within-phase slot orderings: `(kN)! · (kN(M-1)/2)!`.
pub fn count_csit_variants(m: usize, n: usize) -> Result<BigUint> {
    let case = classify_case(m, n)?;
    if n < 2 {
        return Err(Error::UnsupportedConfiguration { m, n, reason: "needs N ≥ 2".into() });
    }
    let k = case.replication();
    Ok(factorial(k * n) * factorial(k * n * (m - 1) / 2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rx(p: &Phase2Slot) -> (usize, usize) {
        (p.pair[0].receiver, p.pair[1].receiver)
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_case(3, 3).unwrap(), SchemeCase::MGeNGeneral);
        assert_eq!(classify_case(4, 3).unwrap(), SchemeCase::MGeNEvenMOddN);
        assert_eq!(classify_case(2, 4).unwrap(), SchemeCase::NGeMEvenN);
        assert_eq!(classify_case(2, 3).unwrap(), SchemeCase::NGeMOddN);
        assert_eq!(classify_case(4, 4).unwrap(), SchemeCase::MGeNGeneral);
        assert!(classify_case(0, 3).is_err());
        assert!(classify_case(3, 0).is_err());
    }

    #[test]
    fn classify_is_exclusive() {
        for m in 1..=12 {
            for n in 1..=12 {
                let mut applicable = Vec::new();
                if m >= n && m % 2 == 0 && n % 2 == 1 {
                    applicable.push(SchemeCase::MGeNEvenMOddN);
                }
                if m >= n && !(m % 2 == 0 && n % 2 == 1) {
                    applicable.push(SchemeCase::MGeNGeneral);
                }
                if m < n && n % 2 == 0 {
                    applicable.push(SchemeCase::NGeMEvenN);
                }
                if m < n && n % 2 == 1 {
                    applicable.push(SchemeCase::NGeMOddN);
                }
                assert_eq!(applicable.len(), 1);
                assert_eq!(classify_case(m, n).unwrap(), applicable[0]);
            }
        }
    }

    #[test]
    fn three_user_schedule() {
        let s = build_schedule(3, 3).unwrap();
        assert_eq!((s.phase1_len(), s.phase2_len(), s.total_slots, s.k), (3, 3, 6, 1));
        let pairs: Vec<_> = s.phase2.iter().map(rx).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn two_user_schedule() {
        let s = build_schedule(2, 2).unwrap();
        assert_eq!(s.total_slots, 3);
        assert_eq!(s.message_count(), 4);
    }

    #[test]
    fn doubled_four_by_three() {
        let s = build_schedule(4, 3).unwrap();
        assert_eq!(s.k, 2);
        assert_eq!(s.total_slots, 15);
        assert_eq!(s.message_count(), 24);
        assert_eq!(s.phase1_len(), 6);
        assert_eq!(s.phase2_len(), 9);
    }

    #[test]
    fn five_by_four_partial_round() {
        let s = build_schedule(5, 4).unwrap();
        assert_eq!((s.k, s.phase2_len()), (1, 8));
        let pairs: Vec<_> = s.phase2.iter().map(rx).collect();
        assert_eq!(&pairs[..6], &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        // Remainder: two disjoint pairs covering all four receivers.
        let (a, b) = (pairs[6], pairs[7]);
        let mut cover = vec![a.0, a.1, b.0, b.1];
        cover.sort();
        assert_eq!(cover, vec![0, 1, 2, 3]);
        let mut count = [0usize; 4];
        for (x, y) in pairs {
            count[x] += 1;
            count[y] += 1;
        }
        assert_eq!(count, [4; 4]);
    }

    #[test]
    fn n_ge_m_rounds_repeat_consecutive_pairs() {
        let s = build_schedule(3, 4).unwrap();
        let pairs: Vec<_> = s.phase2.iter().map(rx).collect();
        assert_eq!(pairs, vec![(0, 1), (2, 3), (0, 1), (2, 3)]);
        let s = build_schedule(2, 3).unwrap();
        assert_eq!(s.k, 2);
        assert_eq!(s.total_slots, 9);
        assert_eq!(
            s.phase2.iter().map(|p| p.pair).collect::<Vec<_>>(),
            vec![
                [Endpoint::new(0, 0), Endpoint::new(1, 0)],
                [Endpoint::new(2, 0), Endpoint::new(0, 1)],
                [Endpoint::new(1, 1), Endpoint::new(2, 1)],
            ]
        );
    }

    #[test]
    fn single_receiver_unsupported() {
        assert!(matches!(build_schedule(3, 1), Err(Error::UnsupportedConfiguration { .. })));
        assert!(build_schedule(0, 3).is_err());
    }

    #[test]
    fn single_transmitter_has_empty_phase2() {
        for n in 2..=8 {
            let s = build_schedule(1, n).unwrap();
            assert!(s.phase2.is_empty());
            assert_eq!(s.total_slots, s.k * n);
        }
    }

    #[test]
    fn grid_builds_and_balances() {
        for m in 1..=8 {
            for n in 2..=8 {
                let s = build_schedule(m, n).unwrap_or_else(|e| panic!("({m},{n}): {e}"));
                assert_eq!(2 * s.total_slots, s.k * n * (m + 1));
                let mut uses = BTreeMap::new();
                for p in &s.phase2 {
                    for e in p.pair {
                        *uses.entry(e).or_insert(0) += 1;
                    }
                }
                for r in 0..n {
                    for c in 0..s.k {
                        assert_eq!(uses.get(&Endpoint::new(r, c)).copied().unwrap_or(0), m - 1);
                    }
                }
            }
        }
    }

    #[test]
    fn swap_phase2_slots() {
        let s = build_schedule(3, 3).unwrap();
        let p = permute_schedule(&s, &[0, 1, 2], &[1, 0, 2]).unwrap();
        let pairs: Vec<_> = p.phase2.iter().map(rx).collect();
        assert_eq!(pairs, vec![(0, 2), (0, 1), (1, 2)]);
        assert_eq!(p.phase2[0].slot, 3);
    }

    #[test]
    fn identity_permutation_is_noop() {
        let s = build_schedule(4, 3).unwrap();
        let id1: Vec<_> = (0..s.phase1_len()).collect();
        let id2: Vec<_> = (0..s.phase2_len()).collect();
        assert_eq!(permute_schedule(&s, &id1, &id2).unwrap(), s);
    }

    #[test]
    fn bad_permutations_rejected() {
        let s = build_schedule(3, 3).unwrap();
        assert!(matches!(permute_schedule(&s, &[0, 1], &[0, 1, 2]), Err(Error::InvalidArgument(_))));
        assert!(permute_schedule(&s, &[0, 1, 1], &[0, 1, 2]).is_err());
        assert!(permute_schedule(&s, &[0, 1, 2], &[0, 1, 3]).is_err());
    }

    #[test]
    fn variant_counts() {
        assert_eq!(count_csit_variants(3, 3).unwrap(), BigUint::from(36u32));
        assert_eq!(count_csit_variants(2, 2).unwrap(), BigUint::from(2u32));
        assert_eq!(count_csit_variants(1, 2).unwrap(), BigUint::from(2u32));
        // (4,3): 6! · 9!
        assert_eq!(count_csit_variants(4, 3).unwrap(), BigUint::from(720u64 * 362_880));
    }

    #[test]
    fn schedule_json_roundtrip_and_rejects_tampering() {
        let s = build_schedule(4, 3).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: Schedule = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["phase2"][0]["pair"][1]["receiver"] = serde_json::json!(0);
        assert!(serde_json::from_value::<Schedule>(v).is_err());
    }

    #[test]
    fn case_tag_serialization() {
        assert_eq!(serde_json::to_string(&SchemeCase::MGeNEvenMOddN).unwrap(), "\"M_GE_N_EVEN_M_ODD_N\"");
        assert_eq!(serde_json::to_string(&SchemeCase::NGeMOddN).unwrap(), "\"N_GE_M_ODD_N\"");
    }

    fn shuffled(len: usize, seed: u64) -> Vec<usize> {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut v: Vec<usize> = (0..len).collect();
        v.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        v
    }

    proptest! {
        #[test]
        fn permutation_keeps_counts(m in 1usize..=7, n in 2usize..=7, seed in any::<u64>()) {
            let s = build_schedule(m, n).unwrap();
            let p1 = shuffled(s.phase1_len(), seed);
            let p2 = shuffled(s.phase2_len(), seed ^ 0x5555);
            let p = permute_schedule(&s, &p1, &p2).unwrap();
            prop_assert!(p.validate().is_ok());
            prop_assert_eq!(p.total_slots, s.total_slots);
        }
    }
}
