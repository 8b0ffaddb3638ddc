//! Hand-written 3-user reference. Every transmitted signal, received signal
//! and subtraction identity of the three-receiver instance is spelled out
//! explicitly (1-based, exactly as the scheme is usually written down) and
//! compared with what the general pipeline produced.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{generate_channels, ChannelRealization, MessageId, MessageSet, NoiseModel};
use crate::error::{invalid, Result};
use crate::receiver::{cancel_interference, observe_all, ObservationKind, ObservationLog};
use crate::scheduler::{build_csit_table, build_schedule};
use crate::simulate::derive_seed;
use crate::transmitter::{build_transmit_plan, PlanOptions, TransmitPlan};

const TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleMismatch {
    pub quantity: String,
    pub expected: Complex64,
    pub actual: Complex64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub seed: u64,
    pub checks: usize,
    pub worst_relative_error: f64,
    pub failure: Option<OracleMismatch>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

struct Checker {
    checks: usize,
    worst: f64,
    failure: Option<OracleMismatch>,
}

impl Checker {
    /// Relative error measured against the larger of the expected value and
    /// `scale`, the magnitude of the operands that produced it.
    fn compare(&mut self, quantity: impl FnOnce() -> String, expected: Complex64, actual: Complex64, scale: f64) {
        self.checks += 1;
        let denom = expected.norm().max(scale).max(f64::MIN_POSITIVE);
        let rel = (expected - actual).norm() / denom;
        self.worst = self.worst.max(rel);
        if self.failure.is_none() && (rel.is_nan() || rel > TOLERANCE) {
            self.failure = Some(OracleMismatch { quantity: quantity(), expected, actual, relative_error: rel });
        }
    }

    fn require(&mut self, quantity: impl FnOnce() -> String, ok: bool) {
        self.checks += 1;
        if self.failure.is_none() && !ok {
            let nan = Complex64::new(f64::NAN, f64::NAN);
            self.failure = Some(OracleMismatch { quantity: quantity(), expected: nan, actual: nan, relative_error: f64::NAN });
        }
    }
}

/// Checks a 3×3 pipeline run (unnormalized plan, noiseless log) against the
/// explicit formulas.
pub fn check_three_user(
    seed: u64,
    channels: &ChannelRealization,
    messages: &MessageSet,
    plan: &TransmitPlan,
    log: &ObservationLog,
) -> Result<OracleReport> {
    if channels.transmitters() != 3 || channels.receivers() != 3 || channels.slots() != 6 || plan.normalized {
        return Err(invalid("oracle applies to the unnormalized 3-user instance only"));
    }
    // 1-based accessors.
    let h = |i: usize, j: usize, t: usize| channels.get(i - 1, j - 1, t - 1);
    let w = |i: usize, j: usize| messages.get(MessageId { receiver: i - 1, transmitter: j - 1, copy: 0 });
    let inv = |z: Complex64| Complex64::new(1.0, 0.0) / z;

    // Transmitted signals, x[t][j].
    let mut x = [[Complex64::new(0.0, 0.0); 4]; 7];
    let mut x_scale = [[0.0f64; 4]; 7];
    for j in 1..=3 {
        for t in 1..=3 {
            x[t][j] = w(t, j);
            x_scale[t][j] = w(t, j).norm();
        }
        let a4 = inv(h(2, j, 4)) * h(2, j, 1) * w(1, j);
        let b4 = inv(h(1, j, 4)) * h(1, j, 2) * w(2, j);
        let a5 = inv(h(3, j, 5)) * h(3, j, 1) * w(1, j);
        let b5 = inv(h(1, j, 5)) * h(1, j, 3) * w(3, j);
        let a6 = inv(h(3, j, 6)) * h(3, j, 2) * w(2, j);
        let b6 = inv(h(2, j, 6)) * h(2, j, 3) * w(3, j);
        x[4][j] = a4 + b4;
        x[5][j] = a5 + b5;
        x[6][j] = a6 + b6;
        x_scale[4][j] = a4.norm() + b4.norm();
        x_scale[5][j] = a5.norm() + b5.norm();
        x_scale[6][j] = a6.norm() + b6.norm();
    }

    let mut ck = Checker { checks: 0, worst: 0.0, failure: None };
    for t in 1..=6 {
        let got = plan.signal(t - 1, messages);
        for j in 1..=3 {
            ck.compare(|| format!("X_{j}({t})"), x[t][j], got[j - 1], x_scale[t][j]);
        }
    }

    // Received signals.
    let mut y = [[Complex64::new(0.0, 0.0); 7]; 4];
    let mut y_scale = [[0.0f64; 7]; 4];
    for i in 1..=3 {
        for t in 1..=6 {
            y[i][t] = (1..=3).map(|j| h(i, j, t) * x[t][j]).sum();
            y_scale[i][t] = (1..=3).map(|j| h(i, j, t).norm() * x_scale[t][j]).sum();
            let got = log.get(i - 1, t - 1).map_or(Complex64::new(f64::NAN, 0.0), |o| o.value);
            ck.compare(|| format!("Y_{i}({t})"), y[i][t], got, y_scale[i][t]);
        }
    }

    // Unused observations.
    for (i, t) in [(3, 4), (2, 5), (1, 6)] {
        let kind = log.get(i - 1, t - 1).map(|o| o.kind);
        ck.require(|| format!("Y_{i}({t}) discarded"), kind == Some(ObservationKind::Discarded));
    }

    // Subtraction identities: (receiver, phase-2 slot, stored slot, partner).
    let identities = [(1, 4, 2, 2), (2, 4, 1, 1), (1, 5, 3, 3), (3, 5, 1, 1), (2, 6, 3, 3), (3, 6, 2, 2)];
    for (i, t, stored, b) in identities {
        let ti = i; // phase-1 slot of receiver i
        let coeff = |j: usize| h(i, j, t) * inv(h(b, j, t)) * h(b, j, ti);
        let desired: Complex64 = (1..=3).map(|j| coeff(j) * w(i, j)).sum();
        let desired_scale: f64 = (1..=3).map(|j| (coeff(j) * w(i, j)).norm()).sum();
        let diff = y[i][t] - y[i][stored];
        let diff_scale = y_scale[i][t] + y_scale[i][stored];
        ck.compare(|| format!("Y_{i}({t}) - Y_{i}({stored})"), desired, diff, diff_scale.max(desired_scale));

        let rows = match cancel_interference(log, i - 1) {
            Ok(rows) => rows,
            Err(e) => {
                ck.require(|| format!("R{i} interference cancellation: {e}"), false);
                continue;
            }
        };
        match rows.iter().find(|r| r.slot == t - 1) {
            Some(row) => {
                ck.require(|| format!("R{i} slot {t} subtracts slot {stored}"), row.linked_slot == stored - 1);
                ck.compare(|| format!("R{i} slot {t} subtraction value"), desired, row.value, diff_scale.max(desired_scale));
                for j in 1..=3 {
                    let c = coeff(j);
                    ck.compare(|| format!("R{i} slot {t} coefficient {j}"), c, row.coefficients[j - 1], c.norm());
                }
            }
            None => ck.require(|| format!("R{i} slot {t} subtraction row"), false),
        }
    }

    Ok(OracleReport { seed, checks: ck.checks, worst_relative_error: ck.worst, failure: ck.failure })
}

/// Runs the general pipeline at `(3,3)` for `seed` and checks it against the
/// explicit 3-user formulas.
pub fn oracle_verify_3user(seed: u64) -> Result<OracleReport> {
    let schedule = build_schedule(3, 3)?;
    let channels = generate_channels(3, 3, schedule.total_slots, derive_seed(seed, "channels"))?;
    let messages = MessageSet::random(3, 3, 1, derive_seed(seed, "messages"), 1.0)?;
    let table = build_csit_table(&schedule);
    let (plan, _) = build_transmit_plan(&schedule, &channels, &table, PlanOptions::default())?;
    let log = observe_all(&schedule, &plan, &channels, &messages, &NoiseModel::noiseless())?;
    check_three_user(seed, &channels, &messages, &plan, &log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_zero_passes() {
        let r = oracle_verify_3user(0).unwrap();
        assert!(r.passed(), "{:?}", r.failure);
        assert!(r.checks > 50);
    }

    #[test]
    fn ten_seeds_pass() {
        for seed in 0..10 {
            let r = oracle_verify_3user(seed).unwrap();
            assert!(r.passed(), "seed {seed}: {:?}", r.failure);
        }
    }

    #[test]
    fn dropped_inverse_is_caught_at_slot_four() {
        let schedule = build_schedule(3, 3).unwrap();
        let channels = generate_channels(3, 3, 6, 4).unwrap();
        let messages = MessageSet::random(3, 3, 1, 5, 1.0).unwrap();
        let table = build_csit_table(&schedule);
        let (mut plan, _) = build_transmit_plan(&schedule, &channels, &table, PlanOptions::default()).unwrap();
        // X_1(4): h_21(4)^-1 h_21(1) W_11 becomes h_21(1) W_11.
        plan.slots[3].signals[0][0].coefficient = channels.get(1, 0, 0);
        let log = observe_all(&schedule, &plan, &channels, &messages, &NoiseModel::noiseless()).unwrap();
        let r = check_three_user(4, &channels, &messages, &plan, &log).unwrap();
        assert_eq!(r.failure.unwrap().quantity, "X_1(4)");
    }

    #[test]
    fn normalized_plan_is_rejected() {
        let schedule = build_schedule(3, 3).unwrap();
        let channels = generate_channels(3, 3, 6, 4).unwrap();
        let messages = MessageSet::random(3, 3, 1, 5, 1.0).unwrap();
        let table = build_csit_table(&schedule);
        let (plan, _) = build_transmit_plan(&schedule, &channels, &table, PlanOptions { normalize: true }).unwrap();
        let log = observe_all(&schedule, &plan, &channels, &messages, &NoiseModel::noiseless()).unwrap();
        assert!(check_three_user(0, &channels, &messages, &plan, &log).is_err());
    }
}
