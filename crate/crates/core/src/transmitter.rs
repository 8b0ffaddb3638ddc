//! Transmit signals for every slot.
//!
//! Phase 1 sends raw messages. Phase 2 serving endpoints `a` (copy `ca`) and
//! `b` (copy `cb`) at slot `t` sends, from transmitter `j`,
//!
//! ```text
//! X_j(t) = h_bj(t)^-1 · h_bj(t_a) · W_aj^ca  +  h_aj(t)^-1 · h_aj(t_b) · W_bj^cb
//! ```
//!
//! where `t_a`, `t_b` are the phase-1 slots that broadcast `W_a^ca` and
//! `W_b^cb`. At receiver `b` the `W_a` part then arrives as exactly the
//! interference `b` already stored at `t_a`.
//!
//! All channel knowledge flows through a [`CsitView`], which enforces the
//! P/D/N table and logs every read.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, MessageId, MessageSet};
use crate::error::{invalid, Error, Result};
use crate::scheduler::{CsitState, CsitTable, Phase2Slot, Schedule, SlotRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CsitRead {
    pub receiver: usize,
    pub transmitter: usize,
    /// Slot of the coefficient that was read.
    pub slot: usize,
    /// Slot at which the read happened.
    pub read_at: usize,
}

/// Gatekeeper for transmitter-side channel knowledge.
///
/// `h_ij(t')` may be read at slot `t` iff `t' = t` with receiver `i` in state
/// P at `t`, or `t' < t` with receiver `i` in state D at `t'`.
#[derive(Debug)]
pub struct CsitView<'a> {
    channels: &'a ChannelRealization,
    table: &'a CsitTable,
    current: usize,
    reads: Vec<CsitRead>,
    violations: Vec<CsitRead>,
}

impl<'a> CsitView<'a> {
    pub fn new(channels: &'a ChannelRealization, table: &'a CsitTable) -> Self {
        Self { channels, table, current: 0, reads: Vec::new(), violations: Vec::new() }
    }

    pub fn set_slot(&mut self, t: usize) {
        self.current = t;
    }

    pub fn current_slot(&self) -> usize {
        self.current
    }

    pub fn permits(&self, receiver: usize, slot: usize) -> bool {
        if receiver >= self.table.receivers() || slot >= self.table.slots() {
            return false;
        }
        match self.table.state(receiver, slot) {
            CsitState::P => slot == self.current,
            CsitState::D => slot < self.current,
            CsitState::N => false,
        }
    }

    pub fn read(&mut self, receiver: usize, transmitter: usize, slot: usize) -> Result<Complex64> {
        let rec = CsitRead { receiver, transmitter, slot, read_at: self.current };
        if !self.permits(receiver, slot) || transmitter >= self.channels.transmitters() {
            self.violations.push(rec);
            return Err(Error::ContractViolation { receiver, slot, read_at: self.current });
        }
        self.reads.push(rec);
        Ok(self.channels.get(receiver, transmitter, slot))
    }

    pub fn into_audit(self) -> CsitAudit {
        CsitAudit { reads: self.reads, violations: self.violations }
    }
}

/// Everything a [`CsitView`] saw during one plan construction.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CsitAudit {
    pub reads: Vec<CsitRead>,
    pub violations: Vec<CsitRead>,
}

impl CsitAudit {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    /// Re-checks every logged read against the table, independently of the
    /// view's own gate. Returns the number of reads that should not have
    /// been possible (logged violations included).
    pub fn forbidden_reads(&self, table: &CsitTable) -> usize {
        let bad = self
            .reads
            .iter()
            .filter(|r| match table.state(r.receiver, r.slot) {
                CsitState::P => r.read_at != r.slot,
                CsitState::D => r.read_at <= r.slot,
                CsitState::N => true,
            })
            .count();
        bad + self.violations.len()
    }

    /// Every P entry of the table was read, by every transmitter, in its own slot.
    pub fn covers_perfect_states(&self, table: &CsitTable, transmitters: usize) -> bool {
        let got: std::collections::BTreeSet<_> =
            self.reads.iter().map(|r| (r.receiver, r.transmitter, r.slot, r.read_at)).collect();
        (0..table.receivers()).all(|i| {
            (0..table.slots()).all(|t| {
                table.state(i, t) != CsitState::P
                    || (0..transmitters).all(|j| got.contains(&(i, j, t, t)))
            })
        })
    }
}

/// One term `f · W` of a transmitted linear form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub message: MessageId,
    pub coefficient: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotPlan {
    pub slot: usize,
    /// Common amplitude applied to every transmitter in this slot
    /// (1 unless power normalization is on).
    pub gain: f64,
    /// `signals[j]`: the precoding form of transmitter `j`, before `gain`.
    pub signals: Vec<Vec<Term>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmitPlan {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub normalized: bool,
    pub slots: Vec<SlotPlan>,
}

impl TransmitPlan {
    /// `X_j(t)` for every transmitter, given the message symbols.
    pub fn signal(&self, t: usize, messages: &MessageSet) -> Vec<Complex64> {
        let sp = &self.slots[t];
        sp.signals
            .iter()
            .map(|terms| evaluate(terms, messages) * sp.gain)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlanOptions {
    /// Scale each phase-2 slot by `1 / max_j ‖f_j(t)‖` so no transmitter's
    /// form exceeds unit norm. One scale per slot keeps the alignment intact.
    pub normalize: bool,
}

fn evaluate(terms: &[Term], messages: &MessageSet) -> Complex64 {
    terms.iter().map(|t| t.coefficient * messages.get(t.message)).sum()
}

fn phase1_terms(m: usize, record: SlotRecord) -> Result<Vec<Vec<Term>>> {
    let SlotRecord::Phase1(p) = record else {
        return Err(invalid("phase-1 signal requested for a phase-2 slot"));
    };
    Ok((0..m)
        .map(|j| {
            vec![Term {
                message: MessageId { receiver: p.served.receiver, transmitter: j, copy: p.served.copy },
                coefficient: Complex64::new(1.0, 0.0),
            }]
        })
        .collect())
}

/// Raw broadcast: `X_j = W_ij^c` for the served endpoint.
pub fn phase1_signal(record: SlotRecord, messages: &MessageSet) -> Result<Vec<Complex64>> {
    let terms = phase1_terms(messages.transmitters(), record)?;
    Ok(terms.iter().map(|t| evaluate(t, messages)).collect())
}

fn checked_inverse(h: Complex64, receiver: usize, transmitter: usize, slot: usize) -> Result<Complex64> {
    if h.norm_sqr() == 0.0 {
        return Err(Error::InternalConsistency(format!(
            "zero channel h[{receiver}][{transmitter}][{slot}] in precoder"
        )));
    }
    Ok(h.inv())
}

fn phase2_terms(schedule: &Schedule, p: &Phase2Slot, view: &mut CsitView<'_>) -> Result<Vec<Vec<Term>>> {
    let t = p.slot;
    view.set_slot(t);
    let [a, b] = p.pair;
    let missing = || Error::InternalConsistency(format!("slot {t}: pair endpoint never broadcast"));
    let ta = schedule.phase1_slot_of(a).ok_or_else(missing)?;
    let tb = schedule.phase1_slot_of(b).ok_or_else(missing)?;
    (0..schedule.m)
        .map(|j| {
            let hb_now = view.read(b.receiver, j, t)?;
            let hb_then = view.read(b.receiver, j, ta)?;
            let ha_now = view.read(a.receiver, j, t)?;
            let ha_then = view.read(a.receiver, j, tb)?;
            Ok(vec![
                Term {
                    message: MessageId { receiver: a.receiver, transmitter: j, copy: a.copy },
                    coefficient: checked_inverse(hb_now, b.receiver, j, t)? * hb_then,
                },
                Term {
                    message: MessageId { receiver: b.receiver, transmitter: j, copy: b.copy },
                    coefficient: checked_inverse(ha_now, a.receiver, j, t)? * ha_then,
                },
            ])
        })
        .collect()
}

/// Retrospectively precoded signal for a phase-2 slot (unnormalized).
pub fn phase2_precode(
    schedule: &Schedule,
    record: SlotRecord,
    messages: &MessageSet,
    view: &mut CsitView<'_>,
) -> Result<Vec<Complex64>> {
    let SlotRecord::Phase2(p) = record else {
        return Err(invalid("phase-2 precoder called on a phase-1 slot"));
    };
    let terms = phase2_terms(schedule, &p, view)?;
    Ok(terms.iter().map(|t| evaluate(t, messages)).collect())
}

/// Precoding forms for the whole schedule, plus the CSIT audit of how they
/// were obtained.
pub fn build_transmit_plan(
    schedule: &Schedule,
    channels: &ChannelRealization,
    table: &CsitTable,
    options: PlanOptions,
) -> Result<(TransmitPlan, CsitAudit)> {
    if channels.transmitters() != schedule.m
        || channels.receivers() != schedule.n
        || channels.slots() != schedule.total_slots
        || table.receivers() != schedule.n
        || table.slots() != schedule.total_slots
    {
        return Err(invalid("channel / table dimensions do not match the schedule"));
    }
    let mut view = CsitView::new(channels, table);
    let mut slots = Vec::with_capacity(schedule.total_slots);
    for t in 0..schedule.total_slots {
        view.set_slot(t);
        let record = schedule.slot(t).expect("slot within schedule");
        let signals = match record {
            SlotRecord::Phase1(_) => phase1_terms(schedule.m, record)?,
            SlotRecord::Phase2(p) => phase2_terms(schedule, &p, &mut view)?,
        };
        let gain = if options.normalize {
            let peak = signals
                .iter()
                .map(|terms| terms.iter().map(|x| x.coefficient.norm_sqr()).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            if peak > 0.0 { 1.0 / peak } else { 1.0 }
        } else {
            1.0
        };
        slots.push(SlotPlan { slot: t, gain, signals });
    }
    let plan = TransmitPlan {
        m: schedule.m,
        n: schedule.n,
        k: schedule.k,
        normalized: options.normalize,
        slots,
    };
    Ok((plan, view.into_audit()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channels, received_signal, NoiseModel};
    use crate::scheduler::{build_csit_table, build_schedule, permute_schedule};

    fn setup(m: usize, n: usize, seed: u64) -> (Schedule, ChannelRealization, CsitTable) {
        let s = build_schedule(m, n).unwrap();
        let h = generate_channels(m, n, s.total_slots, seed).unwrap();
        let t = build_csit_table(&s);
        (s, h, t)
    }

    fn id(i: usize, j: usize) -> MessageId {
        MessageId { receiver: i, transmitter: j, copy: 0 }
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * a.norm().max(b.norm()).max(1e-300)
    }

    #[test]
    fn phase1_is_raw_messages() {
        let s = build_schedule(3, 3).unwrap();
        let w = MessageSet::random(3, 3, 1, 4, 1.0).unwrap();
        for i in [0, 2] {
            let x = phase1_signal(s.slot(i).unwrap(), &w).unwrap();
            for j in 0..3 {
                assert_eq!(x[j], w.get(id(i, j)));
            }
        }
        let zero = MessageSet::zeros(3, 3, 1).unwrap();
        assert!(phase1_signal(s.slot(1).unwrap(), &zero).unwrap().iter().all(|v| v.norm() == 0.0));
        assert!(phase1_signal(s.slot(4).unwrap(), &w).is_err());
    }

    #[test]
    fn slot_four_precoder_matches_closed_form() {
        let (s, h, table) = setup(3, 3, 21);
        let w = MessageSet::random(3, 3, 1, 22, 1.0).unwrap();
        let mut view = CsitView::new(&h, &table);
        let x = phase2_precode(&s, s.slot(3).unwrap(), &w, &mut view).unwrap();
        // Pair {R1,R2} at slot 4 (index 3); W_1 went out at slot 1, W_2 at slot 2.
        let want = h.get(1, 0, 3).inv() * h.get(1, 0, 0) * w.get(id(0, 0))
            + h.get(0, 0, 3).inv() * h.get(0, 0, 1) * w.get(id(1, 0));
        assert!(close(x[0], want, 1e-13));
        assert!(view.into_audit().is_clean());
    }

    #[test]
    fn slot_six_precoder_matches_closed_form() {
        let (s, h, table) = setup(3, 3, 5);
        let w = MessageSet::random(3, 3, 1, 6, 1.0).unwrap();
        let mut view = CsitView::new(&h, &table);
        let x = phase2_precode(&s, s.slot(5).unwrap(), &w, &mut view).unwrap();
        let want = h.get(2, 0, 5).inv() * h.get(2, 0, 1) * w.get(id(1, 0))
            + h.get(1, 0, 5).inv() * h.get(1, 0, 2) * w.get(id(2, 0));
        assert!(close(x[0], want, 1e-13));
    }

    #[test]
    fn unit_channels_give_plain_sums() {
        let s = build_schedule(3, 3).unwrap();
        let h = ChannelRealization::from_fn(3, 3, 6, |_, _, _| Complex64::new(1.0, 0.0)).unwrap();
        let table = build_csit_table(&s);
        let w = MessageSet::random(3, 3, 1, 1, 1.0).unwrap();
        let mut view = CsitView::new(&h, &table);
        let x = phase2_precode(&s, s.slot(4).unwrap(), &w, &mut view).unwrap();
        for j in 0..3 {
            assert!(close(x[j], w.get(id(0, j)) + w.get(id(2, j)), 1e-15));
        }
    }

    #[test]
    fn precoder_refuses_phase1_slot() {
        let (s, h, table) = setup(3, 3, 1);
        let w = MessageSet::random(3, 3, 1, 1, 1.0).unwrap();
        let mut view = CsitView::new(&h, &table);
        assert!(matches!(
            phase2_precode(&s, s.slot(0).unwrap(), &w, &mut view),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn view_blocks_forbidden_reads() {
        let (_, h, table) = setup(3, 3, 1);
        let mut view = CsitView::new(&h, &table);
        view.set_slot(3);
        // R3 is N at slot 4.
        assert!(matches!(view.read(2, 0, 3), Err(Error::ContractViolation { receiver: 2, slot: 3, .. })));
        // R1 is N at slot 1 (its own phase-1 slot).
        assert!(view.read(0, 0, 0).is_err());
        // D state only after the fact.
        view.set_slot(1);
        assert!(view.read(1, 0, 1).is_err());
        assert!(view.read(1, 0, 0).is_ok());
        // P state at slot 5 is not readable from slot 4.
        view.set_slot(3);
        assert!(view.read(0, 0, 4).is_err());
        let audit = view.into_audit();
        assert_eq!(audit.violations.len(), 4);
        assert_eq!(audit.reads.len(), 1);
    }

    #[test]
    fn plan_shapes() {
        let (s, h, table) = setup(2, 2, 3);
        let (plan, audit) = build_transmit_plan(&s, &h, &table, PlanOptions::default()).unwrap();
        assert_eq!(plan.slots.len(), 3);
        assert!(audit.is_clean());
        let (s, h, table) = setup(3, 3, 3);
        let (plan, _) = build_transmit_plan(&s, &h, &table, PlanOptions::default()).unwrap();
        for t in 0..3 {
            for (j, terms) in plan.slots[t].signals.iter().enumerate() {
                assert_eq!(terms.len(), 1);
                assert_eq!(terms[0].message, id(t, j));
                assert_eq!(terms[0].coefficient, Complex64::new(1.0, 0.0));
            }
        }
        for t in 3..6 {
            for terms in &plan.slots[t].signals {
                assert_eq!(terms.iter().filter(|x| x.coefficient.norm() > 0.0).count(), 2);
            }
        }
    }

    #[test]
    fn audit_is_clean_and_tight_across_grid() {
        for m in 1..=6 {
            for n in 2..=6 {
                let (s, h, table) = setup(m, n, (m * 10 + n) as u64);
                let (_, audit) = build_transmit_plan(&s, &h, &table, PlanOptions::default()).unwrap();
                assert_eq!(audit.forbidden_reads(&table), 0, "({m},{n})");
                assert!(audit.covers_perfect_states(&table, m), "({m},{n})");
            }
        }
    }

    #[test]
    fn full_rounds_read_every_delayed_state() {
        // With whole rounds of all pairs, each D entry is needed by some pair.
        let (s, h, table) = setup(3, 3, 9);
        let (_, audit) = build_transmit_plan(&s, &h, &table, PlanOptions::default()).unwrap();
        for i in 0..3 {
            for t in 0..3 {
                if table.state(i, t) == CsitState::D {
                    assert!(audit.reads.iter().any(|r| r.receiver == i && r.slot == t && r.read_at > t));
                }
            }
        }
    }

    #[test]
    fn retrospective_alignment() {
        for (m, n) in [(3, 3), (4, 3), (2, 4), (2, 3), (5, 4), (6, 5)] {
            let (s, h, table) = setup(m, n, 77);
            let w = MessageSet::random(m, n, s.k, 78, 1.0).unwrap();
            for normalize in [false, true] {
                let (plan, _) = build_transmit_plan(&s, &h, &table, PlanOptions { normalize }).unwrap();
                for p in &s.phase2 {
                    for (me, other) in [(p.pair[0], p.pair[1]), (p.pair[1], p.pair[0])] {
                        // Interference at `me` from `other`'s messages only.
                        let x: Vec<Complex64> = plan.slots[p.slot]
                            .signals
                            .iter()
                            .map(|terms| {
                                terms
                                    .iter()
                                    .filter(|t| t.message.receiver == other.receiver)
                                    .map(|t| t.coefficient * w.get(t.message))
                                    .sum::<Complex64>()
                            })
                            .collect();
                        let now = received_signal(&h, &x, p.slot, me.receiver, &NoiseModel::noiseless()).unwrap();
                        let t_other = s.phase1_slot_of(other).unwrap();
                        let stored = received_signal(&h, &plan.signal(t_other, &w), t_other, me.receiver, &NoiseModel::noiseless()).unwrap();
                        assert!(close(now, stored, 1e-10), "({m},{n}) slot {}", p.slot);
                    }
                }
            }
        }
    }

    #[test]
    fn normalized_forms_have_unit_peak() {
        let (s, h, table) = setup(4, 4, 12);
        let (plan, _) = build_transmit_plan(&s, &h, &table, PlanOptions { normalize: true }).unwrap();
        for sp in &plan.slots {
            let peak = sp
                .signals
                .iter()
                .map(|terms| terms.iter().map(|x| x.coefficient.norm_sqr()).sum::<f64>().sqrt() * sp.gain)
                .fold(0.0, f64::max);
            assert!((peak - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn permuted_schedule_stays_within_csit() {
        let (s, h, _) = setup(3, 3, 2);
        let p = permute_schedule(&s, &[2, 0, 1], &[2, 1, 0]).unwrap();
        let table = build_csit_table(&p);
        let (_, audit) = build_transmit_plan(&p, &h, &table, PlanOptions::default()).unwrap();
        assert_eq!(audit.forbidden_reads(&table), 0);
    }

    #[test]
    fn plan_serializes_per_slot_per_transmitter() {
        let (s, h, table) = setup(2, 2, 3);
        let (plan, _) = build_transmit_plan(&s, &h, &table, PlanOptions::default()).unwrap();
        let v = serde_json::to_value(&plan).unwrap();
        assert_eq!(v["slots"][2]["signals"][1].as_array().unwrap().len(), 2);
        assert_eq!(v["slots"][0]["signals"][0][0]["coefficient"], serde_json::json!([1.0, 0.0]));
        let back: TransmitPlan = serde_json::from_value(v).unwrap();
        assert_eq!(back, plan);
    }
}
