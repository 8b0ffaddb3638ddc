//! DoF claims, checked two ways: exact rational accounting over the
//! schedule, and the empirical pre-log of the simulated sum rate.

mod oracle;
mod sweep;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::receiver::LinearSystem;
use crate::scheduler::{CsitTable, Schedule, SchemeCase};

pub use oracle::{check_three_user, oracle_verify_3user, OracleMismatch, OracleReport};
pub use sweep::{rate_sweep, SweepConfig};

/// Exact fractions, serialized as `"p/q"`.
pub mod ratio_text {
    use num_rational::Ratio;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Ratio<u64>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Ratio<u64>, D::Error> {
        let text = String::deserialize(d)?;
        let (p, q) = text.split_once('/').unwrap_or((text.as_str(), "1"));
        let p: u64 = p.trim().parse().map_err(D::Error::custom)?;
        let q: u64 = q.trim().parse().map_err(D::Error::custom)?;
        if q == 0 {
            return Err(D::Error::custom("zero denominator"));
        }
        Ok(Ratio::new(p, q))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DofReport {
    pub m: usize,
    pub n: usize,
    pub case: SchemeCase,
    pub k: usize,
    pub total_slots: usize,
    pub messages: usize,
    #[serde(with = "ratio_text")]
    pub achieved: Ratio<u64>,
    #[serde(with = "ratio_text")]
    pub closed_form: Ratio<u64>,
    pub equal: bool,
}

/// `kMN / T` against `2M/(M+1)`, both reduced.
pub fn dof_report(schedule: &Schedule) -> DofReport {
    let messages = schedule.message_count();
    let achieved = Ratio::new(messages as u64, schedule.total_slots as u64);
    let m = schedule.m as u64;
    let closed_form = Ratio::new(2 * m, m + 1);
    DofReport {
        m: schedule.m,
        n: schedule.n,
        case: schedule.case,
        k: schedule.k,
        total_slots: schedule.total_slots,
        messages,
        achieved,
        closed_form,
        equal: achieved == closed_form,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateFractions {
    #[serde(with = "ratio_text")]
    pub p: Ratio<u64>,
    #[serde(with = "ratio_text")]
    pub d: Ratio<u64>,
    #[serde(with = "ratio_text")]
    pub n: Ratio<u64>,
}

impl StateFractions {
    pub fn total(&self) -> Ratio<u64> {
        self.p + self.d + self.n
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsitFractions {
    pub per_receiver: Vec<StateFractions>,
    pub aggregate: StateFractions,
}

pub fn csit_fractions(table: &CsitTable) -> CsitFractions {
    let slots = table.slots() as u64;
    let per_receiver = (0..table.receivers())
        .map(|i| {
            let c = table.counts(i);
            StateFractions {
                p: Ratio::new(c.p as u64, slots),
                d: Ratio::new(c.d as u64, slots),
                n: Ratio::new(c.n as u64, slots),
            }
        })
        .collect();
    let cells = slots * table.receivers() as u64;
    let (mut p, mut d, mut n) = (0u64, 0u64, 0u64);
    for i in 0..table.receivers() {
        let c = table.counts(i);
        p += c.p as u64;
        d += c.d as u64;
        n += c.n as u64;
    }
    CsitFractions {
        per_receiver,
        aggregate: StateFractions { p: Ratio::new(p, cells), d: Ratio::new(d, cells), n: Ratio::new(n, cells) },
    }
}

/// How the SNR maps to per-message symbol power (noise variance is 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerAllocation {
    /// Every message symbol gets power `P`.
    #[default]
    EqualSymbol,
    /// `P` is the total over the `M` transmitters: each message gets `P/M`.
    TotalPower,
}

impl PowerAllocation {
    pub fn symbol_power(self, snr_db: f64, transmitters: usize) -> f64 {
        let p = 10f64.powf(snr_db / 10.0);
        match self {
            PowerAllocation::EqualSymbol => p,
            PowerAllocation::TotalPower => p / transmitters as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub snr_db: f64,
    /// Bits per channel use.
    pub sum_rate: f64,
    pub per_receiver: Vec<f64>,
}

/// Gaussian-input rate per receiver, `(1/T)·log₂ det(I + P_s·Gᴴ Σ⁻¹ G)`,
/// summed over receivers. `Σ` must be the unit-noise covariance.
pub fn sum_rate(systems: &[LinearSystem], snr_db: f64, allocation: PowerAllocation) -> Result<RatePoint> {
    let mut per_receiver = Vec::with_capacity(systems.len());
    for sys in systems {
        let ps = allocation.symbol_power(snr_db, sys.m);
        let l = linalg::cholesky_lower(&sys.sigma).ok_or_else(|| {
            Error::InternalConsistency(format!("receiver {}: noise covariance is not positive definite", sys.receiver))
        })?;
        let a = linalg::whiten(&l, &sys.g)
            .ok_or_else(|| Error::InternalConsistency("whitening failed".into()))?;
        per_receiver.push(linalg::log2_det_identity_plus(&a, ps) / sys.total_slots as f64);
    }
    Ok(RatePoint { snr_db, sum_rate: per_receiver.iter().sum(), per_receiver })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// Bits per channel use per doubling of power, i.e. the DoF estimate.
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square deviation of the points from the line.
    pub residual: f64,
}

/// Least-squares line of sum rate against `log₂ P`.
pub fn dof_slope(points: &[RatePoint]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(invalid(format!("slope fit needs at least 3 points, got {}", points.len())));
    }
    let lo = points.iter().map(|p| p.snr_db).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.snr_db).fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 20.0 {
        return Err(invalid(format!("SNR span {:.1} dB is below 20 dB", hi - lo)));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.snr_db / 10.0 * std::f64::consts::LOG2_10).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.sum_rate).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(SlopeFit { slope, intercept, residual })
}
