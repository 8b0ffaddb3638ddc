//! Physical-layer model: i.i.d. Rayleigh fading tensor, additive noise,
//! complex message symbols and the received-signal equation
//! `Y_i(t) = Σ_j h_ij(t) X_j(t) + N_i(t)`.
//!
//! Indices are zero-based throughout: receivers `0..N`, transmitters `0..M`,
//! slots `0..T`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// One draw from CN(0, variance).
pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Ground-truth fading coefficients `h[i][j][t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    m: usize,
    n: usize,
    slots: usize,
    seed: u64,
    h: Vec<Complex64>,
}

impl ChannelRealization {
    /// Builds a realization from explicit coefficients laid out as
    /// `[receiver][transmitter][slot]`. Used for hand-built test channels.
    pub fn from_fn(
        m: usize,
        n: usize,
        slots: usize,
        mut f: impl FnMut(usize, usize, usize) -> Complex64,
    ) -> Result<Self> {
        check_dims(m, n, slots)?;
        let mut h = Vec::with_capacity(m * n * slots);
        for i in 0..n {
            for j in 0..m {
                for t in 0..slots {
                    let v = f(i, j, t);
                    if !v.re.is_finite() || !v.im.is_finite() {
                        return Err(invalid(format!("non-finite channel h[{i}][{j}][{t}]")));
                    }
                    if v.norm_sqr() == 0.0 {
                        return Err(invalid(format!("zero channel h[{i}][{j}][{t}]")));
                    }
                    h.push(v);
                }
            }
        }
        Ok(Self { m, n, slots, seed: 0, h })
    }

    pub fn transmitters(&self) -> usize {
        self.m
    }

    pub fn receivers(&self) -> usize {
        self.n
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn get(&self, receiver: usize, transmitter: usize, slot: usize) -> Complex64 {
        self.h[(receiver * self.m + transmitter) * self.slots + slot]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.h
    }
}

fn check_dims(m: usize, n: usize, slots: usize) -> Result<()> {
    if m == 0 || n == 0 || slots == 0 {
        return Err(invalid(format!(
            "channel dimensions must be positive (M={m}, N={n}, T={slots})"
        )));
    }
    Ok(())
}

/// Draws an `N × M × T` tensor of i.i.d. CN(0,1) coefficients.
///
/// Exact zeros are redrawn so that phase-2 inversions are always defined.
pub fn generate_channels(m: usize, n: usize, slots: usize, seed: u64) -> Result<ChannelRealization> {
    check_dims(m, n, slots)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = (0..m * n * slots)
        .map(|_| loop {
            let v = complex_gaussian(&mut rng, 1.0);
            if v.norm_sqr() > 0.0 {
                break v;
            }
        })
        .collect();
    Ok(ChannelRealization { m, n, slots, seed, h })
}

/// Additive receiver noise. Samples are a pure function of
/// `(seed, receiver, slot)`, so a stored observation and any later reuse of it
/// see the same noise value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub enabled: bool,
    pub variance: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self { enabled: false, variance: 0.0, seed: 0 }
    }

    pub fn unit(seed: u64) -> Self {
        Self { enabled: true, variance: 1.0, seed }
    }

    /// Variance actually applied (zero when disabled).
    pub fn effective_variance(&self) -> f64 {
        if self.enabled {
            self.variance
        } else {
            0.0
        }
    }

    pub fn sample(&self, receiver: usize, slot: usize) -> Complex64 {
        if !self.enabled {
            return Complex64::new(0.0, 0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((receiver as u64) << 32) | slot as u64);
        complex_gaussian(&mut rng, self.variance)
    }
}

/// Identifies `W_ij^c`: the message from transmitter `j` to receiver `i`, copy `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MessageId {
    pub receiver: usize,
    pub transmitter: usize,
    pub copy: usize,
}

/// Complex message symbols `w[i][j][c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageSet {
    m: usize,
    n: usize,
    k: usize,
    w: Vec<Complex64>,
}

impl MessageSet {
    /// i.i.d. CN(0, power) symbols from a seeded stream.
    pub fn random(m: usize, n: usize, k: usize, seed: u64, power: f64) -> Result<Self> {
        check_message_dims(m, n, k)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = (0..m * n * k).map(|_| complex_gaussian(&mut rng, power)).collect();
        Ok(Self { m, n, k, w })
    }

    pub fn zeros(m: usize, n: usize, k: usize) -> Result<Self> {
        check_message_dims(m, n, k)?;
        Ok(Self { m, n, k, w: vec![Complex64::new(0.0, 0.0); m * n * k] })
    }

    pub fn from_fn(
        m: usize,
        n: usize,
        k: usize,
        mut f: impl FnMut(MessageId) -> Complex64,
    ) -> Result<Self> {
        check_message_dims(m, n, k)?;
        let mut w = Vec::with_capacity(m * n * k);
        for receiver in 0..n {
            for transmitter in 0..m {
                for copy in 0..k {
                    w.push(f(MessageId { receiver, transmitter, copy }));
                }
            }
        }
        Ok(Self { m, n, k, w })
    }

    pub fn transmitters(&self) -> usize {
        self.m
    }

    pub fn receivers(&self) -> usize {
        self.n
    }

    pub fn copies(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Flat position of a message; also the column index used by
    /// observation linear forms.
    #[inline]
    pub fn index(&self, id: MessageId) -> usize {
        (id.receiver * self.m + id.transmitter) * self.k + id.copy
    }

    #[inline]
    pub fn get(&self, id: MessageId) -> Complex64 {
        self.w[self.index(id)]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.w
    }
}

fn check_message_dims(m: usize, n: usize, k: usize) -> Result<()> {
    if m == 0 || n == 0 || !(1..=2).contains(&k) {
        return Err(invalid(format!("message set needs M,N ≥ 1 and k ∈ {{1,2}} (M={m}, N={n}, k={k})")));
    }
    Ok(())
}

/// `Σ_j h_ij(t)·x_j + n_i(t)`.
pub fn received_signal(
    channels: &ChannelRealization,
    x: &[Complex64],
    slot: usize,
    receiver: usize,
    noise: &NoiseModel,
) -> Result<Complex64> {
    if slot >= channels.slots {
        return Err(invalid(format!("slot {slot} out of range (T={})", channels.slots)));
    }
    if receiver >= channels.n {
        return Err(invalid(format!("receiver {receiver} out of range (N={})", channels.n)));
    }
    if x.len() != channels.m {
        return Err(invalid(format!(
            "signal vector has {} entries, expected M={}",
            x.len(),
            channels.m
        )));
    }
    let clean: Complex64 = x
        .iter()
        .enumerate()
        .map(|(j, xj)| channels.get(receiver, j, slot) * xj)
        .sum();
    Ok(clean + noise.sample(receiver, slot))
}
