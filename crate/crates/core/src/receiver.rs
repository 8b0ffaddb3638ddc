//! Receiver side: store every observation, subtract stored interference from
//! phase-2 observations, assemble the per-receiver linear system with its
//! noise covariance, and decode.
//!
//! Receivers are assumed to know the effective coefficients of their own
//! observations (global receiver CSI). Each observation carries its
//! noiseless linear form over all messages, built from the plan and the
//! true channels, and the subtraction rows are derived from those forms.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{received_signal, ChannelRealization, MessageId, MessageSet, NoiseModel};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::scheduler::{Schedule, SlotRecord};
use crate::transmitter::TransmitPlan;

/// Condition numbers above this are reported as decode failures.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Relative size of leftover interference tolerated after subtraction.
const ALIGNMENT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ObservationKind {
    /// Phase-1 slot serving this receiver.
    DesiredPhase1,
    /// Phase-1 slot serving someone else; kept for later subtraction.
    InterferencePhase1,
    /// Phase-2 slot serving this receiver: desired part plus aligned interference.
    CombinedPhase2,
    /// Phase-2 slot not serving this receiver.
    Discarded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub slot: usize,
    pub value: Complex64,
    pub kind: ObservationKind,
    /// Copy of this receiver's messages the observation is about
    /// (desired and combined entries).
    pub copy: Option<usize>,
    /// For combined entries: the phase-1 slot whose stored interference the
    /// observation repeats.
    pub linked_slot: Option<usize>,
    /// Amplitude the transmitters applied in this slot.
    pub gain: f64,
    /// Noiseless coefficients over all messages, indexed like [`MessageSet`].
    pub form: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationLog {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub total_slots: usize,
    pub noise_variance: f64,
    /// `entries[receiver]`, in slot order.
    pub entries: Vec<Vec<Observation>>,
}

impl ObservationLog {
    fn message_index(&self, id: MessageId) -> usize {
        (id.receiver * self.m + id.transmitter) * self.k + id.copy
    }

    pub fn get(&self, receiver: usize, slot: usize) -> Option<&Observation> {
        self.entries.get(receiver)?.get(slot)
    }
}

/// Runs every slot of the plan through the channel and classifies what each
/// receiver saw.
pub fn observe_all(
    schedule: &Schedule,
    plan: &TransmitPlan,
    channels: &ChannelRealization,
    messages: &MessageSet,
    noise: &NoiseModel,
) -> Result<ObservationLog> {
    let (m, n, k, slots) = (schedule.m, schedule.n, schedule.k, schedule.total_slots);
    if plan.slots.len() != slots
        || channels.slots() != slots
        || channels.receivers() != n
        || channels.transmitters() != m
        || messages.receivers() != n
        || messages.transmitters() != m
        || messages.copies() != k
    {
        return Err(invalid("plan / channels / messages do not match the schedule"));
    }
    let mut entries = vec![Vec::with_capacity(slots); n];
    for t in 0..slots {
        let x = plan.signal(t, messages);
        let sp = &plan.slots[t];
        let record = schedule.slot(t).expect("slot within schedule");
        for (i, log) in entries.iter_mut().enumerate() {
            let value = received_signal(channels, &x, t, i, noise)?;
            let mut form = vec![Complex64::new(0.0, 0.0); messages.len()];
            for (j, terms) in sp.signals.iter().enumerate() {
                let h = channels.get(i, j, t) * sp.gain;
                for term in terms {
                    form[messages.index(term.message)] += h * term.coefficient;
                }
            }
            let (kind, copy, linked_slot) = match record {
                SlotRecord::Phase1(p) if p.served.receiver == i => {
                    (ObservationKind::DesiredPhase1, Some(p.served.copy), None)
                }
                SlotRecord::Phase1(_) => (ObservationKind::InterferencePhase1, None, None),
                SlotRecord::Phase2(p) => match p.partner_of(i) {
                    Some((me, other)) => {
                        let linked = schedule.phase1_slot_of(other).ok_or_else(|| {
                            Error::InternalConsistency(format!("slot {t}: partner never broadcast"))
                        })?;
                        (ObservationKind::CombinedPhase2, Some(me.copy), Some(linked))
                    }
                    None => (ObservationKind::Discarded, None, None),
                },
            };
            log.push(Observation { slot: t, value, kind, copy, linked_slot, gain: sp.gain, form });
        }
    }
    Ok(ObservationLog {
        m,
        n,
        k,
        total_slots: slots,
        noise_variance: noise.effective_variance(),
        entries,
    })
}

/// One equation recovered by subtraction: `(1/gain)·Y(slot) − Y(linked_slot)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtractionRow {
    pub slot: usize,
    pub linked_slot: usize,
    pub copy: usize,
    /// Coefficients on `W_ij^copy`, `j = 0..M`.
    pub coefficients: Vec<Complex64>,
    pub value: Complex64,
    /// Multiplier applied to the phase-2 observation (`1/gain`).
    pub scale: f64,
}

/// Removes the stored interference from each of the receiver's phase-2
/// observations. Fails if the linked observation is missing or the
/// interference does not cancel.
pub fn cancel_interference(log: &ObservationLog, receiver: usize) -> Result<Vec<SubtractionRow>> {
    let obs = log
        .entries
        .get(receiver)
        .ok_or_else(|| invalid(format!("receiver {receiver} out of range")))?;
    let mut rows = Vec::new();
    for o in obs.iter().filter(|o| o.kind == ObservationKind::CombinedPhase2) {
        let (Some(linked), Some(copy)) = (o.linked_slot, o.copy) else {
            return Err(Error::InternalConsistency(format!("slot {}: combined entry without link", o.slot)));
        };
        let stored = obs
            .get(linked)
            .filter(|s| s.kind == ObservationKind::InterferencePhase1)
            .ok_or_else(|| {
                Error::InternalConsistency(format!(
                    "receiver {receiver}, slot {}: no stored interference at slot {linked}",
                    o.slot
                ))
            })?;
        let scale = 1.0 / o.gain;
        let diff: Vec<Complex64> =
            o.form.iter().zip(&stored.form).map(|(a, b)| a * scale - b).collect();

        let own = |j: usize| log.message_index(MessageId { receiver, transmitter: j, copy });
        let coefficients: Vec<Complex64> = (0..log.m).map(|j| diff[own(j)]).collect();
        let mut leftover = 0.0f64;
        for (idx, v) in diff.iter().enumerate() {
            if !(0..log.m).any(|j| own(j) == idx) {
                leftover = leftover.max(v.norm());
            }
        }
        let reference = stored.form.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if leftover > ALIGNMENT_TOLERANCE * reference.max(f64::MIN_POSITIVE) {
            return Err(Error::InternalConsistency(format!(
                "receiver {receiver}, slot {}: interference does not cancel (residual {leftover:e})",
                o.slot
            )));
        }
        rows.push(SubtractionRow {
            slot: o.slot,
            linked_slot: linked,
            copy,
            coefficients,
            value: o.value * scale - stored.value,
            scale,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSource {
    Direct { slot: usize },
    Subtraction { slot: usize, linked_slot: usize },
}

/// `y = G·w + e`, `Cov(e) = Σ`, over the receiver's `kM` messages ordered
/// `(copy, transmitter)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub receiver: usize,
    pub m: usize,
    pub k: usize,
    pub total_slots: usize,
    pub g: CMatrix,
    pub y: CVector,
    pub sigma: DMatrix<f64>,
    pub sources: Vec<RowSource>,
}

impl LinearSystem {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// The receiver's true messages in column order.
    pub fn truth(&self, messages: &MessageSet) -> CVector {
        CVector::from_fn(self.m * self.k, |col, _| {
            messages.get(MessageId { receiver: self.receiver, transmitter: col % self.m, copy: col / self.m })
        })
    }
}

/// Stacks, per copy, the direct phase-1 equation followed by the `M-1`
/// subtraction equations, and fills in the noise covariance:
/// `σ²` for direct rows, `σ²(scale²+1)` for subtraction rows and `σ²`
/// between subtraction rows that reuse the same stored observation.
pub fn assemble_system(log: &ObservationLog, receiver: usize) -> Result<LinearSystem> {
    let rows = cancel_interference(log, receiver)?;
    let obs = &log.entries[receiver];
    let (m, k) = (log.m, log.k);
    let dim = k * m;
    let mut g = CMatrix::zeros(dim, dim);
    let mut y = CVector::zeros(dim);
    let mut sigma = DMatrix::<f64>::zeros(dim, dim);
    let mut sources = Vec::with_capacity(dim);
    let mut linked = Vec::with_capacity(dim);
    let var = log.noise_variance;

    for c in 0..k {
        let direct: Vec<_> = obs
            .iter()
            .filter(|o| o.kind == ObservationKind::DesiredPhase1 && o.copy == Some(c))
            .collect();
        let subs: Vec<_> = rows.iter().filter(|r| r.copy == c).collect();
        if direct.len() != 1 || subs.len() + 1 != m {
            return Err(Error::SchemeConstruction(format!(
                "receiver {receiver} copy {c}: {} direct + {} subtraction rows, expected 1 + {}",
                direct.len(),
                subs.len(),
                m - 1
            )));
        }
        let d = direct[0];
        let r0 = sources.len();
        for j in 0..m {
            g[(r0, c * m + j)] = d.form[log.message_index(MessageId { receiver, transmitter: j, copy: c })];
        }
        y[r0] = d.value;
        sigma[(r0, r0)] = var;
        sources.push(RowSource::Direct { slot: d.slot });
        linked.push(None);
        for s in subs {
            let r = sources.len();
            for j in 0..m {
                g[(r, c * m + j)] = s.coefficients[j];
            }
            y[r] = s.value;
            sigma[(r, r)] = var * (s.scale * s.scale + 1.0);
            sources.push(RowSource::Subtraction { slot: s.slot, linked_slot: s.linked_slot });
            linked.push(Some(s.linked_slot));
        }
    }
    for a in 0..dim {
        for b in 0..dim {
            if a != b && linked[a].is_some() && linked[a] == linked[b] {
                sigma[(a, b)] = var;
            }
        }
    }
    Ok(LinearSystem { receiver, m, k, total_slots: log.total_slots, g, y, sigma, sources })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeDiagnostics {
    pub receiver: usize,
    pub rank: usize,
    /// 2-norm condition number of `G`, clamped to `f64::MAX`.
    pub condition: f64,
    /// `‖G·ŵ − y‖`.
    pub residual: f64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    /// `None` when the system was too ill-conditioned to trust.
    pub estimate: Option<CVector>,
    pub diagnostics: DecodeDiagnostics,
}

/// Solves the receiver's system. With a nonzero covariance the system is
/// whitened first (generalized least squares); a numerically singular `G`
/// yields a failed outcome rather than an error.
pub fn decode(system: &LinearSystem) -> DecodeOutcome {
    let dim = system.dim();
    let s = linalg::singular_values(&system.g);
    let rank = linalg::numerical_rank(&s, dim);
    let condition = linalg::condition_number(&s).min(f64::MAX);
    let residual_of = |w: &CVector| (&system.g * w - &system.y).norm();
    let fail = |w: CVector| DecodeOutcome {
        estimate: None,
        diagnostics: DecodeDiagnostics {
            receiver: system.receiver,
            rank,
            condition,
            residual: residual_of(&w),
            success: false,
        },
    };
    if rank < dim || condition > CONDITION_LIMIT {
        return fail(linalg::pinv_solve(&system.g, &system.y));
    }
    let noisy = system.sigma.iter().any(|&v| v != 0.0);
    let solved = if noisy {
        linalg::cholesky_lower(&system.sigma).and_then(|l| {
            let a = linalg::whiten(&l, &system.g)?;
            let b = linalg::whiten_vec(&l, &system.y)?;
            linalg::lu_solve(&a, &b)
        })
    } else {
        linalg::lu_solve(&system.g, &system.y)
    };
    match solved {
        Some(w) => DecodeOutcome {
            diagnostics: DecodeDiagnostics {
                receiver: system.receiver,
                rank,
                condition,
                residual: residual_of(&w),
                success: true,
            },
            estimate: Some(w),
        },
        None => fail(linalg::pinv_solve(&system.g, &system.y)),
    }
}
