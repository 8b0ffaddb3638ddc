use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::json;
use xchan::analyzer::{csit_fractions, dof_report, dof_slope, rate_sweep, SweepConfig};
use xchan::simulate::{simulate, SeedReport, SimOptions};
use xchan::verify::{run_suite, VerifyConfig};
use xchan::{build_csit_table, build_schedule, Error};

use crate::config::{ExperimentConfig, Format, Mode};

/// What a run produced: the file body, an optional note for stderr, and
/// whether every check passed.
#[derive(Debug)]
pub struct Output {
    pub body: Vec<u8>,
    pub note: Option<String>,
    pub passed: bool,
}

impl Output {
    fn ok(body: impl Into<Vec<u8>>) -> Self {
        Self { body: body.into(), note: None, passed: true }
    }
}

#[derive(Debug)]
pub enum RunError {
    /// Rejected input; exit status 2.
    Invalid(String),
    /// Anything else; exit status 1.
    Failed(String),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::UnsupportedConfiguration { .. } => RunError::Invalid(e.to_string()),
            _ => RunError::Failed(e.to_string()),
        }
    }
}

fn pretty<T: Serialize>(value: &T) -> Result<Vec<u8>, RunError> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| RunError::Failed(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

fn csv_body(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, RunError> {
    let fail = |e: csv::Error| RunError::Failed(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(&row).map_err(fail)?;
    }
    w.into_inner().map_err(|e| RunError::Failed(e.to_string()))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn schedule(cfg: &ExperimentConfig) -> Result<Output, RunError> {
    let s = build_schedule(cfg.m, cfg.n)?;
    let dof = dof_report(&s);
    let body = match cfg.format {
        Format::Json => pretty(&json!({ "schedule": s, "dof": dof }))?,
        Format::Text => {
            let mut t = s.render_text();
            let _ = writeln!(t, "sum DoF = kMN/T = {}/{} = {}", dof.messages, dof.total_slots, dof.achieved);
            t.into_bytes()
        }
        Format::Csv => {
            let rows = s.phase1.iter().map(|p| {
                vec![(p.slot + 1).to_string(), "1".into(), (p.served.receiver + 1).to_string(), (p.served.copy + 1).to_string(), String::new(), String::new()]
            });
            let rows2 = s.phase2.iter().map(|p| {
                let [a, b] = p.pair;
                vec![
                    (p.slot + 1).to_string(),
                    "2".into(),
                    (a.receiver + 1).to_string(),
                    (a.copy + 1).to_string(),
                    (b.receiver + 1).to_string(),
                    (b.copy + 1).to_string(),
                ]
            });
            csv_body(&strings(&["slot", "phase", "receiver_a", "copy_a", "receiver_b", "copy_b"]), rows.chain(rows2))?
        }
    };
    Ok(Output::ok(body))
}

fn csit_table(cfg: &ExperimentConfig) -> Result<Output, RunError> {
    let table = build_csit_table(&build_schedule(cfg.m, cfg.n)?);
    let fractions = csit_fractions(&table);
    let body = match cfg.format {
        Format::Json => pretty(&json!({ "table": table, "fractions": fractions }))?,
        Format::Text => {
            let mut t = table.render_text();
            t.push('\n');
            for (i, f) in fractions.per_receiver.iter().enumerate() {
                let c = table.counts(i);
                let _ = writeln!(t, "R{}: P={} D={} N={}  fractions {} / {} / {}", i + 1, c.p, c.d, c.n, f.p, f.d, f.n);
            }
            let a = &fractions.aggregate;
            let _ = writeln!(t, "aggregate fractions P={} D={} N={}", a.p, a.d, a.n);
            t.into_bytes()
        }
        Format::Csv => {
            let mut header = vec!["receiver".to_string()];
            header.extend((1..=table.slots()).map(|t| format!("t{t}")));
            let rows = table.states.iter().enumerate().map(|(i, row)| {
                let mut r = vec![(i + 1).to_string()];
                r.extend(row.iter().map(|s| s.to_string()));
                r
            });
            csv_body(&header, rows)?
        }
    };
    Ok(Output::ok(body))
}

fn simulate_mode(cfg: &ExperimentConfig) -> Result<Output, RunError> {
    let options = SimOptions { noise: cfg.noise, normalize: cfg.normalize, symbol_power: 1.0 };
    let reports: Vec<SeedReport> = cfg
        .seeds
        .iter()
        .map(|&seed| simulate(cfg.m, cfg.n, seed, options).map(|i| i.report()))
        .collect::<Result<_, _>>()?;
    let fmt_err = |e: Option<f64>| e.map_or_else(String::new, |v| format!("{v:e}"));
    let body = match cfg.format {
        Format::Json => pretty(&reports)?,
        Format::Csv => {
            let header = strings(&["seed", "receiver", "rank", "condition", "residual", "success", "relative_error", "forbidden_csit_reads"]);
            let rows = reports.iter().flat_map(|rep| {
                rep.receivers.iter().map(move |r| {
                    let d = &r.diagnostics;
                    vec![
                        rep.seed.to_string(),
                        (d.receiver + 1).to_string(),
                        d.rank.to_string(),
                        format!("{:e}", d.condition),
                        format!("{:e}", d.residual),
                        d.success.to_string(),
                        fmt_err(r.relative_error),
                        rep.forbidden_csit_reads.to_string(),
                    ]
                })
            });
            csv_body(&header, rows)?
        }
        Format::Text => {
            let mut t = String::new();
            for rep in &reports {
                let _ = writeln!(t, "seed {} (M={} N={}), forbidden CSIT reads: {}", rep.seed, rep.m, rep.n, rep.forbidden_csit_reads);
                for r in &rep.receivers {
                    let d = &r.diagnostics;
                    let _ = writeln!(
                        t,
                        "  R{}: {} rank={} cond={:.3e} residual={:.3e} error={}",
                        d.receiver + 1,
                        if d.success { "ok  " } else { "FAIL" },
                        d.rank,
                        d.condition,
                        d.residual,
                        r.relative_error.map_or("-".into(), |e| format!("{e:.3e}")),
                    );
                }
            }
            t.into_bytes()
        }
    };
    Ok(Output::ok(body))
}

fn sweep(cfg: &ExperimentConfig) -> Result<Output, RunError> {
    let sc = SweepConfig {
        m: cfg.m,
        n: cfg.n,
        snr_db: cfg.snr_db.clone(),
        draws: cfg.draws,
        base_seed: cfg.seeds[0],
        normalize: cfg.normalize,
        allocation: cfg.allocation,
    };
    let points = rate_sweep(&sc)?;
    let fit = dof_slope(&points)?;
    let target = 2.0 * cfg.m as f64 / (cfg.m as f64 + 1.0);
    let summary = format!(
        "M={} N={} draws={} fitted slope {:.4} (2M/(M+1) = {:.4}, deviation {:.2}%)",
        cfg.m,
        cfg.n,
        cfg.draws,
        fit.slope,
        target,
        (fit.slope - target).abs() / target * 100.0
    );
    let body = match cfg.format {
        Format::Json => pretty(&json!({ "config": sc, "points": points, "fit": fit, "closed_form": target }))?,
        Format::Csv => {
            let mut header = strings(&["snr_db", "sum_rate"]);
            header.extend((1..=cfg.n).map(|i| format!("rate_r{i}")));
            let rows = points.iter().map(|p| {
                let mut r = vec![p.snr_db.to_string(), p.sum_rate.to_string()];
                r.extend(p.per_receiver.iter().map(|v| v.to_string()));
                r
            });
            let body = csv_body(&header, rows)?;
            return Ok(Output { body, note: Some(summary), passed: true });
        }
        Format::Text => {
            let mut t = String::from("snr_db  sum_rate\n");
            for p in &points {
                let _ = writeln!(t, "{:<7} {:.6}", p.snr_db, p.sum_rate);
            }
            let _ = writeln!(t, "{summary}");
            t.into_bytes()
        }
    };
    Ok(Output::ok(body))
}

fn verify(cfg: &ExperimentConfig) -> Result<Output, RunError> {
    let vc = VerifyConfig { grid: cfg.grid, base_seed: cfg.seeds[0], ..VerifyConfig::default() };
    let results = run_suite(&vc);
    let passed = results.iter().all(|r| r.passed);
    let body = match cfg.format {
        Format::Json => pretty(&json!({ "passed": passed, "checks": results }))?,
        _ => {
            let mut t = String::new();
            for r in &results {
                let _ = writeln!(t, "[{}] {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            let _ = writeln!(t, "{} of {} checks passed", results.len() - failed, results.len());
            t.into_bytes()
        }
    };
    Ok(Output { body, note: None, passed })
}

pub fn execute(cfg: &ExperimentConfig) -> Result<Output, RunError> {
    match cfg.mode {
        Mode::Schedule => schedule(cfg),
        Mode::CsitTable => csit_table(cfg),
        Mode::Simulate => simulate_mode(cfg),
        Mode::Sweep => sweep(cfg),
        Mode::Verify => verify(cfg),
    }
}

/// Writes `body` to a temporary file beside `path` and renames it into place,
/// so a failed run never leaves a partial file.
pub fn write_atomic(path: &Path, body: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(body)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
