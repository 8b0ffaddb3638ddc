//! The invariant suite behind `xchan verify`.

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analyzer::{csit_fractions, dof_report, oracle_verify_3user};
use crate::error::Result;
use crate::receiver::CONDITION_LIMIT;
use crate::scheduler::{build_csit_table, build_schedule, count_csit_variants, permute_schedule, CsitState};
use crate::simulate::{derive_seed, Instance, SimOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// Largest `M` and `N` covered by the grid checks.
    pub grid: usize,
    /// Seeds per `(M, N)` for the decodability check.
    pub decode_seeds: u64,
    pub oracle_seeds: u64,
    /// Random permutation pairs per configuration.
    pub permutations: usize,
    pub base_seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { grid: 6, decode_seeds: 50, oracle_seeds: 10, permutations: 20, base_seed: 0 }
    }
}

fn check(name: &str, outcome: Result<(bool, String)>) -> CheckResult {
    match outcome {
        Ok((passed, detail)) => CheckResult { name: name.into(), passed, detail },
        Err(e) => CheckResult { name: name.into(), passed: false, detail: format!("error: {e}") },
    }
}

fn oracle(cfg: &VerifyConfig) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for s in 0..cfg.oracle_seeds {
        let r = oracle_verify_3user(cfg.base_seed + s)?;
        if let Some(f) = r.failure {
            return Ok((false, format!("seed {}: {} expected {} got {}", r.seed, f.quantity, f.expected, f.actual)));
        }
        worst = worst.max(r.worst_relative_error);
    }
    Ok((true, format!("{} seeds, worst relative error {worst:.2e}", cfg.oracle_seeds)))
}

fn dof_grid(cfg: &VerifyConfig) -> Result<(bool, String)> {
    let mut count = 0;
    for m in 1..=cfg.grid {
        for n in 2..=cfg.grid {
            let d = dof_report(&build_schedule(m, n)?);
            if !d.equal {
                return Ok((false, format!("({m},{n}): {} ≠ {}", d.achieved, d.closed_form)));
            }
            count += 1;
        }
    }
    Ok((true, format!("{count} configurations equal 2M/(M+1)")))
}

fn csit_tables(cfg: &VerifyConfig) -> Result<(bool, String)> {
    use CsitState::{D, N, P};
    let table = build_csit_table(&build_schedule(3, 3)?);
    let reference = vec![vec![N, D, D, P, P, N], vec![D, N, D, P, N, P], vec![D, D, N, N, P, P]];
    if table.states != reference {
        return Ok((false, "3-user table differs from the reference pattern".into()));
    }
    for m in 1..=cfg.grid {
        for n in 2..=cfg.grid {
            let s = build_schedule(m, n)?;
            let t = build_csit_table(&s);
            let f = csit_fractions(&t);
            for i in 0..n {
                let c = t.counts(i);
                let want = (s.k * (m - 1), s.k * (n - 1), s.total_slots - s.k * (m - 1) - s.k * (n - 1));
                if (c.p, c.d, c.n) != want || f.per_receiver[i].total() != Ratio::from_integer(1) {
                    return Ok((false, format!("({m},{n}) receiver {i}: counts {c:?}, expected {want:?}")));
                }
            }
        }
    }
    Ok((true, "3-user table exact; per-receiver counts and fractions hold".into()))
}

fn balance(cfg: &VerifyConfig) -> Result<(bool, String)> {
    for (m, n) in [(5, 4), (7, 5)] {
        let s = build_schedule(m, n)?;
        let mut uses = vec![0usize; n * s.k];
        for p in &s.phase2 {
            for e in p.pair {
                uses[e.copy * n + e.receiver] += 1;
            }
        }
        if uses.iter().any(|&u| u != m - 1) {
            return Ok((false, format!("({m},{n}) unbalanced: {uses:?}")));
        }
    }
    for m in 1..=cfg.grid.max(8) {
        for n in 2..=cfg.grid.max(8) {
            build_schedule(m, n)?;
        }
    }
    Ok((true, "partial rounds balanced; builder accepts the whole grid".into()))
}

fn decodability(cfg: &VerifyConfig) -> Result<(bool, String)> {
    let (mut runs, mut failures, mut forbidden) = (0usize, 0usize, 0usize);
    let mut worst = 0.0f64;
    for m in 2..=cfg.grid {
        for n in 2..=cfg.grid {
            let s = build_schedule(m, n)?;
            for seed in 0..cfg.decode_seeds {
                let inst = Instance::run(&s, cfg.base_seed + seed, SimOptions::default())?;
                let rep = inst.report();
                forbidden += rep.forbidden_csit_reads;
                for r in rep.receivers {
                    runs += 1;
                    match r.relative_error {
                        Some(e) if r.diagnostics.success => {
                            worst = worst.max(e);
                            if e > 1e-8 {
                                return Ok((false, format!("({m},{n}) seed {seed}: relative error {e:.2e}")));
                            }
                        }
                        _ => {
                            if r.diagnostics.condition <= CONDITION_LIMIT {
                                return Ok((false, format!("({m},{n}) seed {seed}: failure without ill-conditioning")));
                            }
                            failures += 1;
                        }
                    }
                }
            }
        }
    }
    let ok = forbidden == 0 && (failures as f64) < 0.01 * runs as f64;
    Ok((ok, format!("{runs} decodes, {failures} flagged, worst error {worst:.2e}, {forbidden} forbidden CSIT reads")))
}

fn permutations(cfg: &VerifyConfig) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.base_seed, "permutations"));
    for (m, n) in [(3, 3), (4, 4), (2, 4)] {
        let s = build_schedule(m, n)?;
        let seed = cfg.base_seed + 17;
        let canonical = Instance::run(&s, seed, SimOptions::default())?;
        let truth = canonical.decode_all();
        for _ in 0..cfg.permutations {
            let mut p1: Vec<usize> = (0..s.phase1_len()).collect();
            let mut p2: Vec<usize> = (0..s.phase2_len()).collect();
            p1.shuffle(&mut rng);
            p2.shuffle(&mut rng);
            let ps = permute_schedule(&s, &p1, &p2)?;
            let inst = Instance::run(&ps, seed, SimOptions::default())?;
            if inst.audit.forbidden_reads(&inst.table) != 0 {
                return Ok((false, format!("({m},{n}) permuted schedule read forbidden CSIT")));
            }
            for (a, b) in inst.decode_all().iter().zip(&truth) {
                let (Some(x), Some(y)) = (&a.estimate, &b.estimate) else {
                    return Ok((false, format!("({m},{n}) permuted decode failed")));
                };
                if (x - y).norm() > 1e-8 * y.norm() {
                    return Ok((false, format!("({m},{n}) permuted decode differs")));
                }
            }
        }
    }
    let variants = count_csit_variants(3, 3)?;
    let ok = variants == 36u32.into();
    Ok((ok, format!("{} permutations each at (3,3), (4,4), (2,4); (3,3) has {variants} orderings", cfg.permutations)))
}

/// Runs every check and returns one result per check, in a fixed order.
pub fn run_suite(cfg: &VerifyConfig) -> Vec<CheckResult> {
    vec![
        check("three-user oracle", oracle(cfg)),
        check("exact DoF accounting", dof_grid(cfg)),
        check("CSIT tables and fractions", csit_tables(cfg)),
        check("phase-2 balance", balance(cfg)),
        check("noiseless decodability and CSIT audit", decodability(cfg)),
        check("permutation family", permutations(cfg)),
    ]
}
