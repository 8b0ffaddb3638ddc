use std::fmt;

use serde::{Deserialize, Serialize};

use super::Schedule;

/// CSIT availability for one receiver's channels in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CsitState {
    /// Perfect: known to the transmitters in the same slot.
    P,
    /// Delayed: known to the transmitters from any later slot on.
    D,
    /// None.
    N,
}

impl fmt::Display for CsitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CsitState::P => "P",
            CsitState::D => "D",
            CsitState::N => "N",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsitTable {
    /// Number of phase-1 slots; columns `0..phase1_len` belong to phase 1.
    pub phase1_len: usize,
    /// `states[receiver][slot]`.
    pub states: Vec<Vec<CsitState>>,
}

/// Per-receiver tally of states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StateCounts {
    pub p: usize,
    pub d: usize,
    pub n: usize,
}

impl CsitTable {
    pub fn receivers(&self) -> usize {
        self.states.len()
    }

    pub fn slots(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn state(&self, receiver: usize, slot: usize) -> CsitState {
        self.states[receiver][slot]
    }

    pub fn counts(&self, receiver: usize) -> StateCounts {
        let mut c = StateCounts::default();
        for s in &self.states[receiver] {
            match s {
                CsitState::P => c.p += 1,
                CsitState::D => c.d += 1,
                CsitState::N => c.n += 1,
            }
        }
        c
    }

    /// Text table with a phase header row, one column per slot (1-based)
    /// and one row per receiver.
    pub fn render_text(&self) -> String {
        let slots = self.slots();
        let width = slots.to_string().len().max(1);
        let cell = |s: &str| format!(" {s:^width$} |");
        let label_w = format!("R{}", self.receivers()).len().max(4);

        let p1 = self.phase1_len;
        let p2 = slots - p1;
        let span = |cols: usize| cols * (width + 3) - 1;
        let mut out = String::new();
        out.push_str(&format!("{:label_w$} |", ""));
        out.push_str(&format!("{:^w$}|", "Phase 1", w = span(p1)));
        if p2 > 0 {
            out.push_str(&format!("{:^w$}|", "Phase 2", w = span(p2)));
        }
        out.push('\n');
        out.push_str(&format!("{:label_w$} |", "Time"));
        for t in 0..slots {
            out.push_str(&cell(&(t + 1).to_string()));
        }
        out.push('\n');
        for (i, row) in self.states.iter().enumerate() {
            out.push_str(&format!("{:label_w$} |", format!("R{}", i + 1)));
            for s in row {
                out.push_str(&cell(&s.to_string()));
            }
            out.push('\n');
        }
        out
    }
}

/// Phase-1 slot serving receiver `i`: `i` is N, everyone else D.
/// Phase-2 slot serving `{a, b}`: `a` and `b` are P, everyone else N.
pub fn build_csit_table(s: &Schedule) -> CsitTable {
    let mut states = vec![vec![CsitState::N; s.total_slots]; s.n];
    for p in &s.phase1 {
        for (i, row) in states.iter_mut().enumerate() {
            row[p.slot] = if i == p.served.receiver { CsitState::N } else { CsitState::D };
        }
    }
    for p in &s.phase2 {
        for e in p.pair {
            states[e.receiver][p.slot] = CsitState::P;
        }
    }
    CsitTable { phase1_len: s.phase1.len(), states }
}
