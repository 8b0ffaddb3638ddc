//! Simulator and verifier for the two-phase alternating-CSIT transmission
//! scheme on the M×N SISO X channel.
//!
//! Phase 1 broadcasts every receiver's messages once; phase 2 serves pairs of
//! receivers with retrospectively precoded combinations whose interference
//! replicates an observation the receiver already stored. After subtraction
//! every receiver holds `M` independent equations in its `M` messages, giving
//! `2M/(M+1)` sum degrees of freedom.
//!
//! Module map:
//! - [`channel`]: fading tensor, noise, messages, received-signal equation.
//! - [`scheduler`]: case classification, slot schedule, CSIT table, permutations.
//! - [`transmitter`]: phase-1 broadcast and phase-2 precoding under a CSIT audit.
//! - [`receiver`]: observation log, interference subtraction, decoding.
//! - [`analyzer`]: exact DoF accounting, rate evaluation, slope fit, 3-user oracle.
//! - [`simulate`] / [`verify`]: end-to-end runs and the invariant suite.

pub mod analyzer;
pub mod channel;
mod error;
pub mod linalg;
pub mod receiver;
pub mod scheduler;
pub mod simulate;
pub mod transmitter;
pub mod verify;

pub use channel::{
    generate_channels, received_signal, ChannelRealization, MessageId, MessageSet, NoiseModel,
};
pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use scheduler::{
    build_csit_table, build_schedule, classify_case, count_csit_variants, permute_schedule,
    CsitState, CsitTable, Endpoint, Phase1Slot, Phase2Slot, Schedule, SchemeCase,
};
pub use transmitter::{build_transmit_plan, CsitAudit, CsitView, PlanOptions, TransmitPlan};
pub use receiver::{
    assemble_system, cancel_interference, decode, observe_all, DecodeDiagnostics, DecodeOutcome,
    LinearSystem, ObservationKind, ObservationLog,
};
pub use analyzer::{
    csit_fractions, dof_report, dof_slope, oracle_verify_3user, sum_rate, DofReport,
    PowerAllocation, RatePoint, SlopeFit,
};
