//! Turing machines, the (w₁, w₂, q) ∈ ℕ³ configuration coding, and the exact
//! transition map used as the halting oracle.
//!
//! Coding: `w2` holds the tape from the head rightwards with the head symbol
//! in its lowest base-`b` digit; `w1` holds the tape left of the head with
//! the cell adjacent to the head in its lowest digit. States are `1..=m` and
//! `m` is the unique halting state.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TmError {
    #[error("state {q} outside 1..={m}")]
    InvalidState { q: u32, m: u32 },
    #[error("line {line}: {msg}")]
    Validation { line: usize, msg: String },
    #[error("machine file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    L,
    R,
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Action {
    pub write: u32,
    pub moves: Move,
    pub next: u32,
}

/// One entry of the machine file's `rules` array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub q: u32,
    pub a: u32,
    pub write: u32,
    #[serde(rename = "move")]
    pub moves: Move,
    pub next: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MachineFile {
    m: u32,
    b: u32,
    rules: Vec<RuleSpec>,
}

/// Deterministic single-tape machine with states `1..=m` (m halting) over
/// the alphabet `0..b` (0 is blank).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TuringMachine {
    m: u32,
    b: u32,
    table: Vec<Action>,
}

impl TuringMachine {
    /// Builds a machine from a rule list, checking totality and ranges.
    ///
    /// `lines[i]`, when given, is the source line of rule `i` and is used in
    /// validation messages.
    pub fn from_rules(m: u32, b: u32, rules: &[RuleSpec]) -> Result<Self, TmError> {
        Self::from_rules_located(m, b, rules, &[])
    }

    fn from_rules_located(
        m: u32,
        b: u32,
        rules: &[RuleSpec],
        lines: &[usize],
    ) -> Result<Self, TmError> {
        let line_of = |i: usize| lines.get(i).copied().unwrap_or(0);
        if m < 1 {
            return Err(TmError::Validation { line: 1, msg: "m must be positive".into() });
        }
        if b < 2 {
            return Err(TmError::Validation { line: 1, msg: format!("base b = {b} must be >= 2") });
        }
        let working = (m - 1) as usize;
        let mut table: Vec<Option<Action>> = vec![None; working * b as usize];
        for (i, r) in rules.iter().enumerate() {
            let fail = |msg: String| TmError::Validation { line: line_of(i), msg };
            if r.q == 0 || r.q >= m {
                return Err(fail(format!("rule {i}: state q = {} must be in 1..{m}", r.q)));
            }
            if r.a >= b || r.write >= b {
                return Err(fail(format!("rule {i}: symbol outside 0..{b}")));
            }
            if r.next == 0 || r.next > m {
                return Err(fail(format!("rule {i}: next state {} must be in 1..={m}", r.next)));
            }
            let slot = &mut table[(r.q - 1) as usize * b as usize + r.a as usize];
            if slot.is_some() {
                return Err(fail(format!("rule {i}: duplicate rule for (q={}, a={})", r.q, r.a)));
            }
            *slot = Some(Action { write: r.write, moves: r.moves, next: r.next });
        }
        let mut full = Vec::with_capacity(table.len());
        for (idx, slot) in table.into_iter().enumerate() {
            let q = idx / b as usize + 1;
            let a = idx % b as usize;
            match slot {
                Some(act) => full.push(act),
                None => {
                    return Err(TmError::Validation {
                        line: 1,
                        msg: format!("missing rule for (q={q}, a={a})"),
                    })
                }
            }
        }
        Ok(Self { m, b, table: full })
    }

    /// Parses the JSON machine description
    /// `{ "m": .., "b": .., "rules": [ {"q","a","write","move","next"} ] }`.
    pub fn from_json(text: &str) -> Result<Self, TmError> {
        let file: MachineFile = serde_json::from_str(text)
            .map_err(|e| TmError::Validation { line: e.line(), msg: e.to_string() })?;
        let lines = rule_lines(text);
        Self::from_rules_located(file.m, file.b, &file.rules, &lines)
    }

    pub fn to_json(&self) -> String {
        let file = MachineFile { m: self.m, b: self.b, rules: self.rules() };
        serde_json::to_string_pretty(&file).expect("serializable")
    }

    pub fn rules(&self) -> Vec<RuleSpec> {
        (1..self.m)
            .flat_map(|q| (0..self.b).map(move |a| (q, a)))
            .map(|(q, a)| {
                let act = self.action(q, a);
                RuleSpec { q, a, write: act.write, moves: act.moves, next: act.next }
            })
            .collect()
    }

    pub fn num_states(&self) -> u32 {
        self.m
    }

    pub fn base(&self) -> u32 {
        self.b
    }

    /// The rule for a working state `q < m` reading `a`.
    pub fn action(&self, q: u32, a: u32) -> Action {
        self.table[(q - 1) as usize * self.b as usize + a as usize]
    }

    pub fn encode_input(&self, w: impl Into<BigUint>) -> EncodedConfig {
        EncodedConfig { w1: BigUint::zero(), w2: w.into(), q: 1 }
    }

    pub fn halting_config(&self) -> EncodedConfig {
        EncodedConfig { w1: BigUint::zero(), w2: BigUint::zero(), q: self.m }
    }

    /// One transition of f_M; the identity on the halting state.
    pub fn step(&self, c: &EncodedConfig) -> Result<EncodedConfig, TmError> {
        if c.q == 0 || c.q > self.m {
            return Err(TmError::InvalidState { q: c.q, m: self.m });
        }
        if c.q == self.m {
            return Ok(c.clone());
        }
        let b = self.b;
        let a = (&c.w2 % b).to_u32().expect("digit fits u32");
        let act = self.action(c.q, a);
        let (w1, w2) = match act.moves {
            Move::S => (c.w1.clone(), &c.w2 - a + act.write),
            Move::R => (&c.w1 * b + act.write, (&c.w2 - a) / b),
            Move::L => {
                let low = (&c.w1 % b).to_u32().expect("digit fits u32");
                (&c.w1 / b, (&c.w2 - a + act.write) * b + low)
            }
        };
        Ok(EncodedConfig { w1, w2, q: act.next })
    }

    /// Runs from input `w` for at most `max_steps` transitions.
    pub fn run(&self, w: impl Into<BigUint>, max_steps: u64) -> HaltReport {
        self.run_from(self.encode_input(w), max_steps)
    }

    pub fn run_from(&self, start: EncodedConfig, max_steps: u64) -> HaltReport {
        let mut c = start;
        let mut steps = 0;
        while c.q != self.m && steps < max_steps {
            c = self.step(&c).expect("reachable configurations have valid states");
            steps += 1;
        }
        let in_halt_state = c.q == self.m;
        let clean = in_halt_state && c.w1.is_zero() && c.w2.is_zero();
        HaltReport {
            halted: clean,
            dirty_halt: in_halt_state && !clean,
            steps_used: steps,
            final_config: c,
        }
    }

    /// The first `n + 1` configurations of the orbit from `start` (fewer if
    /// the halting state is reached earlier, after which it repeats).
    pub fn orbit(&self, start: &EncodedConfig, n: usize) -> Vec<EncodedConfig> {
        let mut out = Vec::with_capacity(n + 1);
        let mut c = start.clone();
        out.push(c.clone());
        for _ in 0..n {
            c = self.step(&c).expect("valid state");
            out.push(c.clone());
        }
        out
    }
}

/// Source line of every rule object in a machine file, by brace scanning.
fn rule_lines(text: &str) -> Vec<usize> {
    let Some(start) = text.find("\"rules\"") else { return Vec::new() };
    let mut line = 1 + text[..start].matches('\n').count();
    let mut depth = 0i32;
    let mut in_str = false;
    let mut escaped = false;
    let mut out = Vec::new();
    for ch in text[start..].chars() {
        if ch == '\n' {
            line += 1;
        }
        if in_str {
            match (escaped, ch) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_str = false,
                _ => {}
            }
            continue;
        }
        match ch {
            '"' => in_str = true,
            '[' | '{' => {
                if ch == '{' && depth == 1 {
                    out.push(line);
                }
                depth += 1;
            }
            ']' | '}' => {
                depth -= 1;
                if depth == 0 {
                    break;
                }
            }
            _ => {}
        }
    }
    out
}

/// A configuration (w₁, w₂, q) ∈ ℕ³.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncodedConfig {
    pub w1: BigUint,
    pub w2: BigUint,
    pub q: u32,
}

impl EncodedConfig {
    pub fn new(w1: u64, w2: u64, q: u32) -> Self {
        Self { w1: w1.into(), w2: w2.into(), q }
    }

    /// Real-vector relaxation; `None` if a tape half exceeds 2⁵³ and would
    /// not be represented exactly.
    pub fn to_f64(&self) -> Option<[f64; 3]> {
        const EXACT: u64 = 1 << 53;
        let w1 = self.w1.to_u64().filter(|&v| v <= EXACT)?;
        let w2 = self.w2.to_u64().filter(|&v| v <= EXACT)?;
        Some([w1 as f64, w2 as f64, f64::from(self.q)])
    }

    /// Tape window: `left` nearest-to-head first, `right` head cell first,
    /// both without trailing blanks.
    pub fn to_tape(&self, b: u32) -> Tape {
        Tape { left: digits(&self.w1, b), right: digits(&self.w2, b), q: self.q }
    }

    pub fn from_tape(tape: &Tape, b: u32) -> Self {
        Self { w1: undigits(&tape.left, b), w2: undigits(&tape.right, b), q: tape.q }
    }
}

impl fmt::Display for EncodedConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.w1, self.w2, self.q)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tape {
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub q: u32,
}

fn digits(n: &BigUint, b: u32) -> Vec<u32> {
    if n.is_zero() {
        return Vec::new();
    }
    n.to_radix_le(b).into_iter().map(u32::from).collect()
}

fn undigits(d: &[u32], b: u32) -> BigUint {
    d.iter().rev().fold(BigUint::zero(), |acc, &x| acc * b + x)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HaltReport {
    /// Reached the halting configuration (0, 0, m).
    pub halted: bool,
    /// Entered state m without clearing the tape.
    pub dirty_halt: bool,
    pub steps_used: u64,
    pub final_config: EncodedConfig,
}

/// Desk-scale machines used by tests, demos and the acceptance suite.
pub mod catalog {
    use super::{Move, RuleSpec, TuringMachine};

    fn rule(q: u32, a: u32, write: u32, moves: Move, next: u32) -> RuleSpec {
        RuleSpec { q, a, write, moves, next }
    }

    /// Base 10, m = 2: erase digits moving right; halt on the first blank.
    pub fn erase() -> TuringMachine {
        let mut rules = vec![rule(1, 0, 0, Move::S, 2)];
        rules.extend((1..10).map(|a| rule(1, a, 0, Move::R, 1)));
        TuringMachine::from_rules(2, 10, &rules).expect("valid machine")
    }

    /// Base 2, m = 2: blank the head cell and move right forever.
    pub fn forever_right() -> TuringMachine {
        let rules = [rule(1, 0, 0, Move::R, 1), rule(1, 1, 0, Move::R, 1)];
        TuringMachine::from_rules(2, 2, &rules).expect("valid machine")
    }

    /// Base 3, m = 4: binary increment with digits 1 (bit 0) and 2 (bit 1),
    /// least significant bit under the head, then erase the word and halt.
    ///
    /// State 1 propagates the carry, state 2 walks back to the left end,
    /// state 3 erases rightwards up to the first blank.
    pub fn binary_increment() -> TuringMachine {
        let rules = [
            rule(1, 0, 2, Move::L, 2),
            rule(1, 1, 2, Move::L, 2),
            rule(1, 2, 1, Move::R, 1),
            rule(2, 0, 0, Move::R, 3),
            rule(2, 1, 1, Move::L, 2),
            rule(2, 2, 2, Move::L, 2),
            rule(3, 0, 0, Move::S, 4),
            rule(3, 1, 0, Move::R, 3),
            rule(3, 2, 0, Move::R, 3),
        ];
        TuringMachine::from_rules(4, 3, &rules).expect("valid machine")
    }

    pub fn all() -> Vec<(&'static str, TuringMachine)> {
        vec![
            ("erase", erase()),
            ("loop", forever_right()),
            ("increment", binary_increment()),
        ]
    }
}
