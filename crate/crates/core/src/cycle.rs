//! The simulating cycle at the level of its abstract behaviour.
//!
//! A point `y` of a subshift `Y` with automorphism `φ` is spread over blocks
//! of `B` cells; one full cycle of `T` steps applies `σ^D ∘ φ` to the block
//! contents. The suspension system tracks `(y, b, t)` with block phase `b`
//! and cycle phase `t`. Encoded configurations carry four layers per cell
//! and are converted to and from suspension states exactly; the simulating
//! map acts on them by conjugation.
//!
//! Shift convention: `σ` is the left shift `(σy)_j = y_{j+1}`, and the
//! displacement `D` moves block contents `D` blocks to the right, so a cycle
//! maps `y` to `z` with `z_j = φ(y)_{j-D}`. This is the orientation under
//! which the shape transform is `[[1, D], [0, T/B]]`.

use std::collections::BTreeSet;

use num_bigint::{BigInt, BigUint};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::Trajectory;
use crate::shift::{all_windows, compose_rules, Automaton, Configuration, LocalRule, ShiftError, Sym};
use crate::slope::{ShapeTransform, SlopeProgram, TimingModel};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CycleError {
    #[error("block length {b} is shorter than the program layer ({needed} cells)")]
    BlockTooSmall { b: usize, needed: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("malformed configuration: {0}")]
    MalformedConfiguration(String),
    #[error("level {level}: block length {b} is below the minimum {needed}")]
    TowerBlockTooSmall { level: usize, b: BigInt, needed: BigInt },
    #[error(transparent)]
    Shift(#[from] ShiftError),
}

/// The subshift being simulated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum YSpec {
    /// Every configuration over `0..N`.
    Full,
    /// The shift orbits of finitely many periodic words.
    PeriodicPoints(Vec<Vec<Sym>>),
}

#[derive(Debug, Clone)]
pub struct SimParams {
    pub n: usize,
    pub y: YSpec,
    pub phi: LocalRule,
    pub phi_inv: LocalRule,
    pub b: usize,
    pub w: u64,
    pub d: i64,
}

fn apply_word(rule: &LocalRule, word: &[Sym]) -> Vec<Sym> {
    let p = word.len();
    let mut buf = [0 as Sym; 3];
    (0..p)
        .map(|i| {
            for (j, slot) in buf.iter_mut().enumerate() {
                *slot = word[(i + p + j - 1) % p];
            }
            rule.lookup(&buf)
        })
        .collect()
}

fn is_rotation(a: &[Sym], b: &[Sym]) -> bool {
    a.len() == b.len() && (0..a.len().max(1)).any(|r| (0..a.len()).all(|j| a[(j + r) % a.len()] == b[j]))
}

impl SimParams {
    pub fn new(
        n: usize,
        y: YSpec,
        phi: LocalRule,
        phi_inv: LocalRule,
        b: usize,
        w: u64,
        d: i64,
    ) -> Result<Self, CycleError> {
        if n == 0 || b == 0 {
            return Err(CycleError::InvalidParams("N and B must be positive".into()));
        }
        for (name, r) in [("phi", &phi), ("phi_inv", &phi_inv)] {
            if r.alphabet().len() != n {
                return Err(CycleError::InvalidParams(format!(
                    "{name} has {} symbols, N = {n}",
                    r.alphabet().len()
                )));
            }
            if r.range() > 1 {
                return Err(CycleError::InvalidParams(format!("{name} must have range at most 1")));
            }
        }
        let widen = |r: LocalRule| -> Result<LocalRule, CycleError> {
            if r.range() == 1 {
                return Ok(r);
            }
            Ok(LocalRule::from_fn(r.alphabet().clone(), 1, |w| r.lookup(&w[1..2]))?)
        };
        let (phi, phi_inv) = (widen(phi)?, widen(phi_inv)?);
        let p = Self { n, y, phi, phi_inv, b, w, d };
        p.check_inverse()?;
        Ok(p)
    }

    fn check_inverse(&self) -> Result<(), CycleError> {
        match &self.y {
            YSpec::Full => {
                // Range-2 compositions are decided by their 5-windows.
                for (first, second) in [(&self.phi, &self.phi_inv), (&self.phi_inv, &self.phi)] {
                    let c = compose_rules(first, second)?;
                    if let Some(w) = all_windows(self.n, 5).find(|w| c.lookup(w) != w[2]) {
                        return Err(CycleError::InvalidParams(format!(
                            "phi and phi_inv are not mutually inverse on window {w:?}"
                        )));
                    }
                }
            }
            YSpec::PeriodicPoints(points) => {
                if points.is_empty() {
                    return Err(CycleError::InvalidParams("no periodic points given".into()));
                }
                for y in points {
                    if y.is_empty() || y.iter().any(|&s| s as usize >= self.n) {
                        return Err(CycleError::InvalidParams(format!("bad point {y:?}")));
                    }
                    let img = apply_word(&self.phi, y);
                    if apply_word(&self.phi_inv, &img) != *y || apply_word(&self.phi, &apply_word(&self.phi_inv, y)) != *y {
                        return Err(CycleError::InvalidParams(format!(
                            "phi and phi_inv are not mutually inverse on {y:?}"
                        )));
                    }
                    if !points.iter().any(|q| is_rotation(q, &img)) {
                        return Err(CycleError::InvalidParams(format!(
                            "phi maps {y:?} outside the given points"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// The 3-windows the program layer tabulates, in lexicographic order.
    pub fn table_windows(&self) -> Vec<Vec<Sym>> {
        match &self.y {
            YSpec::Full => all_windows(self.n, 3).collect(),
            YSpec::PeriodicPoints(points) => {
                let mut set = BTreeSet::new();
                for y in points {
                    let p = y.len();
                    for i in 0..p {
                        set.insert(vec![y[i], y[(i + 1) % p], y[(i + 2) % p]]);
                    }
                }
                set.into_iter().collect()
            }
        }
    }

    /// Whether `word` (as a periodic point) lies in `Y`.
    pub fn represents(&self, word: &[Sym]) -> bool {
        if word.is_empty() || word.iter().any(|&s| s as usize >= self.n) {
            return false;
        }
        match &self.y {
            YSpec::Full => true,
            YSpec::PeriodicPoints(points) => {
                let c = Configuration::Periodic { word: word.to_vec() };
                points.iter().any(|q| {
                    (0..q.len() as i64).any(|r| Configuration::Periodic { word: q.clone() }.shifted(r) == c)
                })
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CycleError> {
        let file: ParamsFile =
            serde_json::from_str(text).map_err(|e| CycleError::InvalidParams(e.to_string()))?;
        let y = match file.y.kind.as_str() {
            "full" => YSpec::Full,
            "periodic_points" => {
                let data = file
                    .y
                    .data
                    .ok_or_else(|| CycleError::InvalidParams("periodic_points needs data".into()))?;
                let pts: Vec<Vec<Sym>> = serde_json::from_value(data)
                    .map_err(|e| CycleError::InvalidParams(e.to_string()))?;
                YSpec::PeriodicPoints(pts)
            }
            other => return Err(CycleError::InvalidParams(format!("unknown Y kind {other:?}"))),
        };
        let phi = LocalRule::from_json(&file.phi.to_string())?;
        let phi_inv = LocalRule::from_json(&file.phi_inv.to_string())?;
        Self::new(file.n, y, phi, phi_inv, file.b, file.w, file.d)
    }

    pub fn to_json(&self) -> String {
        let (kind, data) = match &self.y {
            YSpec::Full => ("full", None),
            YSpec::PeriodicPoints(p) => ("periodic_points", Some(serde_json::json!(p))),
        };
        let parse = |s: String| serde_json::from_str::<serde_json::Value>(&s).expect("rule json");
        let file = ParamsFile {
            n: self.n,
            y: YFile { kind: kind.into(), data },
            phi: parse(self.phi.to_json()),
            phi_inv: parse(self.phi_inv.to_json()),
            b: self.b,
            w: self.w,
            d: self.d,
        };
        serde_json::to_string_pretty(&file).expect("serializable")
    }
}

#[derive(Serialize, Deserialize)]
struct YFile {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data: Option<serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "Y")]
    y: YFile,
    phi: serde_json::Value,
    phi_inv: serde_json::Value,
    #[serde(rename = "B")]
    b: usize,
    #[serde(rename = "W")]
    w: u64,
    #[serde(rename = "D")]
    d: i64,
}

fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Stage durations of one cycle. All constants are published here.
///
/// * `wl = max(1, ⌈log₂ N⌉)` bits per word.
/// * `c1 = 2⌈log₂ N⌉ + 2`: launching and halting the transmission.
/// * `c2 = c4 = 2·wl`: copying a word in and writing it back.
/// * `c3 = E·(5·wl + 1)`: one uniform-cost comparison per tabulated window,
///   `E` windows.
/// * `c6 = 1`: the resynchronization step.
/// * `C = c1 + c2 + c3 + c4 + c6` and `c5 = C`, so every round costs `B + C`
///   and `T = (B + C)(1 + W + |D|)` exactly. The resync step is counted in
///   the first round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleSchedule {
    pub n: usize,
    pub b: u64,
    pub w: u64,
    pub d: i64,
    pub word_len: u64,
    pub entries: u64,
    pub program_length: u64,
    pub c1: u64,
    pub c2: u64,
    pub c3: u64,
    pub c4: u64,
    pub c5: u64,
    pub c6: u64,
    pub overhead: u64,
    pub transmit: u64,
    pub copy: u64,
    pub lookup: u64,
    pub writeback: u64,
    pub shift_per_block: u64,
    pub wait_per_round: u64,
    pub resync: u64,
    pub t: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Synchronized,
    Transmit,
    Copy,
    Lookup,
    Writeback,
    Shift(u64),
    Wait(u64),
    Resync,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StateToken {
    pub stage: Stage,
    pub phase: u64,
}

fn program_length(entries: u64, word_len: u64, w: u64, d: i64) -> u64 {
    entries * (5 * word_len + 1) + (w + 1) + (d.unsigned_abs() + 2)
}

pub fn build_schedule(p: &SimParams) -> Result<CycleSchedule, CycleError> {
    let lg = ceil_log2(p.n) as u64;
    let word_len = lg.max(1);
    let entries = p.table_windows().len() as u64;
    let b = p.b as u64;
    let prog = program_length(entries, word_len, p.w, p.d);
    if b < prog {
        return Err(CycleError::BlockTooSmall {
            b: p.b,
            needed: prog as usize,
        });
    }
    let c1 = 2 * lg + 2;
    let c2 = 2 * word_len;
    let c3 = entries * (5 * word_len + 1);
    let c4 = 2 * word_len;
    let c6 = 1;
    let overhead = c1 + c2 + c3 + c4 + c6;
    let c5 = overhead;
    let dd = p.d.unsigned_abs();
    let t = (b + c1) + c2 + c3 + c4 + dd * (b + c5) + p.w * (b + c5) + c6;
    Ok(CycleSchedule {
        n: p.n,
        b,
        w: p.w,
        d: p.d,
        word_len,
        entries,
        program_length: prog,
        c1,
        c2,
        c3,
        c4,
        c5,
        c6,
        overhead,
        transmit: b + c1,
        copy: c2,
        lookup: c3,
        writeback: c4,
        shift_per_block: b + c5,
        wait_per_round: b + c5,
        resync: c6,
        t,
    })
}

impl CycleSchedule {
    /// The `T(B)` dependence for the slope engine, at fixed `N` and `φ`.
    pub fn timing_model(&self) -> TimingModel {
        TimingModel {
            overhead: BigInt::from(self.overhead),
            program_fixed: BigInt::from(self.entries * (5 * self.word_len + 1)),
            min_block: BigInt::from(1),
        }
    }

    fn stages(&self) -> Vec<(Stage, u64)> {
        let mut v = vec![
            (Stage::Transmit, self.transmit),
            (Stage::Copy, self.copy),
            (Stage::Lookup, self.lookup),
            (Stage::Writeback, self.writeback),
        ];
        v.extend((0..self.d.unsigned_abs()).map(|r| (Stage::Shift(r), self.shift_per_block)));
        v.extend((0..self.w).map(|r| (Stage::Wait(r), self.wait_per_round)));
        v.push((Stage::Resync, self.resync));
        v
    }

    /// The token every block carries at cycle phase `t`.
    pub fn token(&self, t: u64) -> StateToken {
        assert!(t < self.t, "phase {t} outside a cycle of length {}", self.t);
        if t == 0 {
            return StateToken {
                stage: Stage::Synchronized,
                phase: 0,
            };
        }
        let mut start = 0;
        for (stage, len) in [
            (Stage::Transmit, self.transmit),
            (Stage::Copy, self.copy),
            (Stage::Lookup, self.lookup),
            (Stage::Writeback, self.writeback),
        ] {
            if t < start + len {
                return StateToken {
                    stage,
                    phase: t - start,
                };
            }
            start += len;
        }
        let r = t - start;
        let shifts = self.d.unsigned_abs() * self.shift_per_block;
        if r < shifts {
            return StateToken {
                stage: Stage::Shift(r / self.shift_per_block),
                phase: r % self.shift_per_block,
            };
        }
        let r = r - shifts;
        if r < self.w * self.wait_per_round {
            return StateToken {
                stage: Stage::Wait(r / self.wait_per_round),
                phase: r % self.wait_per_round,
            };
        }
        StateToken {
            stage: Stage::Resync,
            phase: r - self.w * self.wait_per_round,
        }
    }

    /// Inverse of [`token`](Self::token).
    pub fn phase_of(&self, tok: &StateToken) -> Option<u64> {
        if tok.stage == Stage::Synchronized {
            return (tok.phase == 0).then_some(0);
        }
        let mut start = 0;
        for (stage, len) in self.stages() {
            if stage == tok.stage {
                let t = start + tok.phase;
                return (tok.phase < len && t != 0).then_some(t);
            }
            start += len;
        }
        None
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// A point of the suspension system: `y` periodic, `b < B`, `t < T`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SuspensionState {
    pub y: Configuration,
    pub b: u64,
    pub t: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Sigma,
    Phi,
}

fn word_of(y: &Configuration) -> Result<&[Sym], CycleError> {
    match y {
        Configuration::Periodic { word } => Ok(word),
        _ => Err(CycleError::InvalidState("y must be periodic".into())),
    }
}

fn rotate(word: &[Sym], k: i64) -> Vec<Sym> {
    // (result)_j = word_{j+k}
    let p = word.len() as i64;
    (0..p).map(|j| word[(j + k).rem_euclid(p) as usize]).collect()
}

/// One cycle's worth of action on `y`: `z_j = φ(y)_{j-D}`.
pub fn cycle_map(p: &SimParams, word: &[Sym]) -> Vec<Sym> {
    rotate(&apply_word(&p.phi, word), -p.d)
}

pub fn cycle_map_inverse(p: &SimParams, word: &[Sym]) -> Vec<Sym> {
    apply_word(&p.phi_inv, &rotate(word, p.d))
}

fn check_state(s: &SuspensionState, sched: &CycleSchedule) -> Result<(), CycleError> {
    if s.b >= sched.b || s.t >= sched.t {
        return Err(CycleError::InvalidState(format!(
            "(b, t) = ({}, {}) outside B = {}, T = {}",
            s.b, s.t, sched.b, sched.t
        )));
    }
    Ok(())
}

/// `σ_B` and `φ_T` with explicit `(B, T)`, so the laws can be checked for
/// cycle lengths no schedule produces.
pub fn suspension_step(
    s: &SuspensionState,
    gen: Generator,
    cycle: &dyn Fn(&[Sym]) -> Vec<Sym>,
    b_len: u64,
    t_len: u64,
) -> SuspensionState {
    let word = match &s.y {
        Configuration::Periodic { word } => word.as_slice(),
        _ => panic!("suspension states hold periodic points"),
    };
    match gen {
        Generator::Sigma => SuspensionState {
            y: if s.b == 0 {
                Configuration::Periodic { word: rotate(word, 1) }
            } else {
                s.y.clone()
            },
            b: (s.b + 1) % b_len,
            t: s.t,
        },
        Generator::Phi => SuspensionState {
            y: if s.t == 0 {
                Configuration::Periodic { word: cycle(word) }
            } else {
                s.y.clone()
            },
            b: s.b,
            t: (s.t + 1) % t_len,
        },
    }
}

pub fn suspension_unstep(
    s: &SuspensionState,
    gen: Generator,
    cycle_inv: &dyn Fn(&[Sym]) -> Vec<Sym>,
    b_len: u64,
    t_len: u64,
) -> SuspensionState {
    let word = match &s.y {
        Configuration::Periodic { word } => word.as_slice(),
        _ => panic!("suspension states hold periodic points"),
    };
    match gen {
        Generator::Sigma => {
            let b = (s.b + b_len - 1) % b_len;
            SuspensionState {
                y: if b == 0 {
                    Configuration::Periodic { word: rotate(word, -1) }
                } else {
                    s.y.clone()
                },
                b,
                t: s.t,
            }
        }
        Generator::Phi => {
            let t = (s.t + t_len - 1) % t_len;
            SuspensionState {
                y: if t == 0 {
                    Configuration::Periodic { word: cycle_inv(word) }
                } else {
                    s.y.clone()
                },
                b: s.b,
                t,
            }
        }
    }
}

pub fn step_suspension(
    s: &SuspensionState,
    gen: Generator,
    p: &SimParams,
    sched: &CycleSchedule,
) -> Result<SuspensionState, CycleError> {
    check_state(s, sched)?;
    word_of(&s.y)?;
    Ok(suspension_step(s, gen, &|w| cycle_map(p, w), sched.b, sched.t))
}

pub fn unstep_suspension(
    s: &SuspensionState,
    gen: Generator,
    p: &SimParams,
    sched: &CycleSchedule,
) -> Result<SuspensionState, CycleError> {
    check_state(s, sched)?;
    word_of(&s.y)?;
    Ok(suspension_unstep(s, gen, &|w| cycle_map_inverse(p, w), sched.b, sched.t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProgramSym {
    Blank,
    Bit(bool),
    Separator,
    WaitMark,
    WaitEnd,
    /// `true` for a leftward displacement.
    Sign(bool),
    ShiftMark,
    ShiftEnd,
}

impl ProgramSym {
    fn index(self) -> u64 {
        match self {
            ProgramSym::Blank => 0,
            ProgramSym::Bit(false) => 1,
            ProgramSym::Bit(true) => 2,
            ProgramSym::Separator => 3,
            ProgramSym::WaitMark => 4,
            ProgramSym::WaitEnd => 5,
            ProgramSym::Sign(false) => 6,
            ProgramSym::Sign(true) => 7,
            ProgramSym::ShiftMark => 8,
            ProgramSym::ShiftEnd => 9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataSym {
    Blank,
    Bit(bool),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EncodedCell {
    pub block: bool,
    pub program: ProgramSym,
    pub data: DataSym,
    pub token: StateToken,
}

impl EncodedCell {
    /// Injective packing into one integer.
    pub fn code(&self) -> u64 {
        let data = match self.data {
            DataSym::Blank => 0,
            DataSym::Bit(false) => 1,
            DataSym::Bit(true) => 2,
        };
        let (kind, round) = match self.token.stage {
            Stage::Synchronized => (0, 0),
            Stage::Transmit => (1, 0),
            Stage::Copy => (2, 0),
            Stage::Lookup => (3, 0),
            Stage::Writeback => (4, 0),
            Stage::Shift(r) => (5, r),
            Stage::Wait(r) => (6, r),
            Stage::Resync => (7, 0),
        };
        self.block as u64
            | self.program.index() << 1
            | data << 5
            | kind << 7
            | round << 10
            | self.token.phase << 26
    }
}

/// One period (`p·B` cells, coordinate 0 first) of an encoded configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodedConfiguration {
    pub cells: Vec<EncodedCell>,
}

/// The program layer of one block, before the trailing blanks.
pub fn program_word(p: &SimParams, sched: &CycleSchedule) -> Vec<ProgramSym> {
    let wl = sched.word_len as usize;
    let mut out = Vec::with_capacity(sched.program_length as usize);
    let push_word = |out: &mut Vec<ProgramSym>, s: Sym| {
        out.extend((0..wl).rev().map(|k| ProgramSym::Bit((s >> k) & 1 == 1)));
    };
    for w in p.table_windows() {
        for &s in &w {
            push_word(&mut out, s);
        }
        push_word(&mut out, p.phi.lookup(&w));
        push_word(&mut out, p.phi_inv.lookup(&w));
        out.push(ProgramSym::Separator);
    }
    out.extend(std::iter::repeat_n(ProgramSym::WaitMark, p.w as usize));
    out.push(ProgramSym::WaitEnd);
    out.push(ProgramSym::Sign(p.d < 0));
    out.extend(std::iter::repeat_n(ProgramSym::ShiftMark, p.d.unsigned_abs() as usize));
    out.push(ProgramSym::ShiftEnd);
    out
}

/// Block index and offset of cell `x` when blocks start at `-b mod B`.
fn locate(x: i64, b: u64, b_len: u64) -> (i64, u64) {
    let b_len = b_len as i64;
    let start = if b == 0 { 0 } else { b_len - b as i64 };
    let rel = x - start;
    (rel.div_euclid(b_len), rel.rem_euclid(b_len) as u64)
}

/// Precomputed pieces shared by every cell of an encoding.
pub struct Encoder<'a> {
    p: &'a SimParams,
    sched: &'a CycleSchedule,
    program: Vec<ProgramSym>,
}

impl<'a> Encoder<'a> {
    pub fn new(p: &'a SimParams, sched: &'a CycleSchedule) -> Self {
        Self {
            p,
            sched,
            program: program_word(p, sched),
        }
    }

    /// Cell `x` of the encoding of `(y, b, t)`, given `y` and `φ⁻¹(y)`.
    pub fn cell(&self, y: &[Sym], prev: &[Sym], b: u64, t: u64, x: i64) -> EncodedCell {
        let (q, off) = locate(x, b, self.sched.b);
        let q = q.rem_euclid(y.len() as i64) as usize;
        let wl = self.sched.word_len;
        let data = if off < wl {
            DataSym::Bit((y[q] >> (wl - 1 - off)) & 1 == 1)
        } else if off < 2 * wl {
            DataSym::Bit((prev[q] >> (2 * wl - 1 - off)) & 1 == 1)
        } else {
            DataSym::Blank
        };
        EncodedCell {
            block: off == 0,
            program: self
                .program
                .get(off as usize)
                .copied()
                .unwrap_or(ProgramSym::Blank),
            data,
            token: self.sched.token(t),
        }
    }

    pub fn encode(&self, s: &SuspensionState) -> Result<EncodedConfiguration, CycleError> {
        check_state(s, self.sched)?;
        let y = word_of(&s.y)?;
        if !self.p.represents(y) {
            return Err(CycleError::InvalidState(format!("{y:?} is not a point of Y")));
        }
        let prev = apply_word(&self.p.phi_inv, y);
        let len = y.len() as i64 * self.sched.b as i64;
        Ok(EncodedConfiguration {
            cells: (0..len).map(|x| self.cell(y, &prev, s.b, s.t, x)).collect(),
        })
    }

    pub fn decode(&self, c: &EncodedConfiguration) -> Result<SuspensionState, CycleError> {
        let bad = |m: String| Err(CycleError::MalformedConfiguration(m));
        let b_len = self.sched.b as usize;
        let len = c.cells.len();
        if len == 0 || !len.is_multiple_of(b_len) {
            return bad(format!("length {len} is not a positive multiple of B = {b_len}"));
        }
        let starts: Vec<usize> = (0..len).filter(|&x| c.cells[x].block).collect();
        let Some(&start) = starts.first() else {
            return bad("no block start".into());
        };
        if start >= b_len || starts.iter().enumerate().any(|(k, &x)| x != start + k * b_len) {
            return bad("block layer is not periodic with period B".into());
        }
        let b = ((b_len - start) % b_len) as u64;
        let token = c.cells[0].token;
        if c.cells.iter().any(|cell| cell.token != token) {
            return bad("state tokens disagree".into());
        }
        let Some(t) = self.sched.phase_of(&token) else {
            return bad(format!("token {token:?} is not on the schedule"));
        };
        let blocks = len / b_len;
        let wl = self.sched.word_len as usize;
        let mut y = vec![0 as Sym; blocks];
        let mut prev = vec![0 as Sym; blocks];
        for (x, cell) in c.cells.iter().enumerate() {
            let off = (x + b_len - start) % b_len;
            let q = ((x + len - start) % len) / b_len;
            let want = self.program.get(off).copied().unwrap_or(ProgramSym::Blank);
            if cell.program != want {
                return bad(format!("program layer differs at cell {x}"));
            }
            match (cell.data, off < 2 * wl) {
                (DataSym::Bit(bit), true) => {
                    let (slot, k) = if off < wl {
                        (&mut y[q], wl - 1 - off)
                    } else {
                        (&mut prev[q], 2 * wl - 1 - off)
                    };
                    *slot |= (bit as Sym) << k;
                }
                (DataSym::Blank, false) => {}
                _ => return bad(format!("data layer misplaced at cell {x}")),
            }
        }
        if !self.p.represents(&y) {
            return bad(format!("data words {y:?} are not a point of Y"));
        }
        if apply_word(&self.p.phi_inv, &y) != prev {
            return bad("previous words are not the inverse image".into());
        }
        Ok(SuspensionState {
            y: Configuration::Periodic { word: y },
            b,
            t,
        })
    }
}

pub fn encode(
    s: &SuspensionState,
    p: &SimParams,
    sched: &CycleSchedule,
) -> Result<EncodedConfiguration, CycleError> {
    Encoder::new(p, sched).encode(s)
}

pub fn decode(
    c: &EncodedConfiguration,
    p: &SimParams,
    sched: &CycleSchedule,
) -> Result<SuspensionState, CycleError> {
    Encoder::new(p, sched).decode(c)
}

/// One step of the simulating map, by conjugation through the encoding.
pub fn pi_on_encoded(
    c: &EncodedConfiguration,
    p: &SimParams,
    sched: &CycleSchedule,
) -> Result<EncodedConfiguration, CycleError> {
    let e = Encoder::new(p, sched);
    e.encode(&step_suspension(&e.decode(c)?, Generator::Phi, p, sched)?)
}

pub fn pi_inverse_on_encoded(
    c: &EncodedConfiguration,
    p: &SimParams,
    sched: &CycleSchedule,
) -> Result<EncodedConfiguration, CycleError> {
    let e = Encoder::new(p, sched);
    e.encode(&unstep_suspension(&e.decode(c)?, Generator::Phi, p, sched)?)
}

/// The encoded spacetime diagram of one suspension state over a time window,
/// with the cycle's action on `y` precomputed.
pub struct EncodedOrbit<'a> {
    enc: &'a Encoder<'a>,
    b: u64,
    t0: u64,
    k_lo: i64,
    /// `(y, φ⁻¹y)` after `k_lo + j` cycles.
    words: Vec<(Vec<Sym>, Vec<Sym>)>,
}

fn ceil_div(a: i64, b: i64) -> i64 {
    -(-a).div_euclid(b)
}

impl<'a> EncodedOrbit<'a> {
    pub fn new(enc: &'a Encoder<'a>, s: &SuspensionState, t_lo: i64, t_hi: i64) -> Result<Self, CycleError> {
        check_state(s, enc.sched)?;
        let y = word_of(&s.y)?.to_vec();
        let tt = enc.sched.t as i64;
        let t0 = s.t as i64;
        let k_lo = (ceil_div(t0 + t_lo.min(0), tt) - ceil_div(t0, tt)).min(0);
        let k_hi = (ceil_div(t0 + t_hi.max(0), tt) - ceil_div(t0, tt)).max(0);
        let mut back = vec![y.clone()];
        for _ in k_lo..0 {
            let w = cycle_map_inverse(enc.p, back.last().expect("nonempty"));
            back.push(w);
        }
        back.reverse();
        let mut fwd = y;
        let mut all = back;
        for _ in 0..k_hi {
            fwd = cycle_map(enc.p, &fwd);
            all.push(fwd.clone());
        }
        let words = all
            .into_iter()
            .map(|w| {
                let prev = apply_word(&enc.p.phi_inv, &w);
                (w, prev)
            })
            .collect();
        Ok(Self {
            enc,
            b: s.b,
            t0: s.t,
            k_lo,
            words,
        })
    }
}

impl Trajectory for EncodedOrbit<'_> {
    fn value(&self, i: i64, t: i64) -> u64 {
        let tt = self.enc.sched.t as i64;
        let t0 = self.t0 as i64;
        let k = ceil_div(t0 + t, tt) - ceil_div(t0, tt);
        let (y, prev) = &self.words[(k - self.k_lo) as usize];
        let phase = (t0 + t).rem_euclid(tt) as u64;
        self.enc.cell(y, prev, self.b, phase, i).code()
    }
}

/// A finite nest of suspensions, outermost level first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TowerReport {
    pub depth: usize,
    /// Number of states of the nest over the given base, level 1 first:
    /// entry `k` counts level `k+1` over everything below it.
    pub counts: Vec<BigUint>,
    pub state_count: BigUint,
    pub transform: ShapeTransform,
}

/// Counts the states of `Z_1(Z_2(…Z_m(Y)))` and composes the shape
/// transforms. Each level's block must hold its program layer.
pub fn tower(
    prog: &SlopeProgram,
    depth: usize,
    base_count: &BigUint,
    timing: &TimingModel,
) -> Result<TowerReport, CycleError> {
    if depth == 0 || depth > prog.levels.len() {
        return Err(CycleError::InvalidParams(format!(
            "depth {depth} outside 1..={}",
            prog.levels.len()
        )));
    }
    for (k, lv) in prog.levels[..depth].iter().enumerate() {
        let needed = timing.min_block_for(lv.w, lv.d);
        if lv.b < needed {
            return Err(CycleError::TowerBlockTooSmall {
                level: k + 1,
                b: lv.b.clone(),
                needed,
            });
        }
    }
    let mut counts = vec![BigUint::default(); depth];
    let mut acc = base_count.clone();
    for k in (0..depth).rev() {
        let lv = &prog.levels[k];
        let factor = (&lv.b * &lv.t)
            .to_biguint()
            .ok_or_else(|| CycleError::InvalidParams(format!("level {} has negative B·T", k + 1)))?;
        acc *= factor;
        counts[k] = acc.clone();
    }
    Ok(TowerReport {
        depth,
        state_count: acc,
        counts,
        transform: prog.composed_transform(depth),
    })
}

/// Every state whose `y` has period at most `max_period`.
pub fn all_states(p: &SimParams, sched: &CycleSchedule, max_period: usize) -> Vec<SuspensionState> {
    let mut words = Vec::new();
    for period in 1..=max_period {
        words.extend(all_windows(p.n, period).filter(|w| p.represents(w)));
    }
    let mut out = Vec::new();
    for w in words {
        for b in 0..sched.b {
            for t in 0..sched.t {
                out.push(SuspensionState {
                    y: Configuration::Periodic { word: w.clone() },
                    b,
                    t,
                });
            }
        }
    }
    out
}

/// States where `decode ∘ encode` fails, in order.
pub fn round_trip_failures(p: &SimParams, sched: &CycleSchedule, max_period: usize) -> Vec<SuspensionState> {
    let enc = Encoder::new(p, sched);
    all_states(p, sched, max_period)
        .into_par_iter()
        .filter(|s| enc.encode(s).and_then(|c| enc.decode(&c)).as_ref() != Ok(s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::int;
    use crate::shift::Alphabet;
    use crate::slope::LevelParams;

    fn params(phi: LocalRule, phi_inv: LocalRule, b: usize, w: u64, d: i64) -> SimParams {
        SimParams::new(2, YSpec::Full, phi, phi_inv, b, w, d).unwrap()
    }

    fn identity(b: usize, w: u64, d: i64) -> SimParams {
        let id = LocalRule::identity(Alphabet::numeric(2));
        params(id.clone(), id, b, w, d)
    }

    fn shift(b: usize, w: u64, d: i64) -> SimParams {
        let a = Alphabet::numeric(2);
        params(LocalRule::shift(a.clone(), 1), LocalRule::shift(a, -1), b, w, d)
    }

    fn st(word: &[Sym], b: u64, t: u64) -> SuspensionState {
        SuspensionState {
            y: Configuration::Periodic { word: word.to_vec() },
            b,
            t,
        }
    }

    #[test]
    fn published_constants_for_two_symbols() {
        let s = build_schedule(&identity(64, 2, 0)).unwrap();
        assert_eq!((s.c1, s.c2, s.c3, s.c4, s.c6), (4, 2, 48, 2, 1));
        assert_eq!(s.overhead, 57);
        assert_eq!(s.t, (64 + 57) * 3);
        assert_eq!(s.program_length, 53);
    }

    #[test]
    fn cycle_length_is_affine_in_the_block() {
        for b in [64usize, 128, 256] {
            for w in 1..=4 {
                for d in -3..=3i64 {
                    let s = build_schedule(&identity(b, w, d)).unwrap();
                    assert_eq!(s.t, (b as u64 + s.overhead) * (1 + w + d.unsigned_abs()));
                    assert_eq!(s.overhead, 57);
                    if w >= 2 {
                        assert!(s.t >= 2 * s.b);
                    }
                }
            }
        }
        let t = |b, w, d| build_schedule(&identity(b, w, d)).unwrap().t;
        assert_eq!(t(128, 2, 1) - t(64, 2, 1), 64 * 4);
        assert_eq!(t(64, 2, 1), t(64, 3, 0));
    }

    #[test]
    fn short_blocks_are_rejected() {
        assert_eq!(
            build_schedule(&identity(4, 2, 0)),
            Err(CycleError::BlockTooSmall { b: 4, needed: 53 })
        );
    }

    #[test]
    fn non_inverse_rules_are_rejected() {
        let a = Alphabet::numeric(2);
        let r = SimParams::new(2, YSpec::Full, LocalRule::shift(a.clone(), 1), LocalRule::shift(a, 1), 64, 2, 0);
        assert!(matches!(r, Err(CycleError::InvalidParams(_))));
    }

    #[test]
    fn tokens_cover_the_cycle_once() {
        let s = build_schedule(&identity(60, 2, -1)).unwrap();
        for t in 0..s.t {
            let tok = s.token(t);
            assert_eq!(s.phase_of(&tok), Some(t));
            assert_eq!(tok.stage == Stage::Synchronized, t == 0);
        }
        assert_eq!(s.phase_of(&StateToken { stage: Stage::Transmit, phase: 0 }), None);
        assert_eq!(s.token(s.t - 1).stage, Stage::Resync);
    }

    #[test]
    fn suspension_examples() {
        let p = shift(64, 2, 1);
        let s = build_schedule(&p).unwrap();
        let y = [0, 1, 1];
        let a = step_suspension(&st(&y, 0, 5), Generator::Sigma, &p, &s).unwrap();
        assert_eq!(a, st(&[1, 1, 0], 1, 5));
        let b = step_suspension(&st(&y, 3, 5), Generator::Phi, &p, &s).unwrap();
        assert_eq!(b, st(&y, 3, 6));
        let mut c = st(&y, 3, 0);
        for _ in 0..s.t {
            c = step_suspension(&c, Generator::Phi, &p, &s).unwrap();
        }
        // φ = σ and one block to the right cancel.
        assert_eq!(c, st(&y, 3, 0));
        for g in [Generator::Sigma, Generator::Phi] {
            let fwd = step_suspension(&st(&y, 0, 0), g, &p, &s).unwrap();
            assert_eq!(unstep_suspension(&fwd, g, &p, &s).unwrap(), st(&y, 0, 0));
        }
    }

    #[test]
    fn round_trip_small_instance() {
        let p = shift(56, 1, 1);
        let s = build_schedule(&p).unwrap();
        assert!(round_trip_failures(&p, &s, 2).is_empty());
    }

    #[test]
    fn synchronized_encoding_carries_data() {
        let p = shift(60, 2, 0);
        let s = build_schedule(&p).unwrap();
        let y = [0, 1, 1, 0];
        let c = encode(&st(&y, 7, 0), &p, &s).unwrap();
        assert!(c.cells.iter().all(|x| x.token.stage == Stage::Synchronized));
        // Block 0 starts at B - b; its previous word is (σ⁻¹y)_0 = y_3.
        let start = 60 - 7;
        assert!(c.cells[start].block);
        assert_eq!(c.cells[start].data, DataSym::Bit(false));
        assert_eq!(c.cells[start + 1].data, DataSym::Bit(false));
        assert_eq!(c.cells[start + 2].data, DataSym::Blank);
        assert_eq!(c.cells[start + 60].data, DataSym::Bit(true));
    }

    #[test]
    fn full_cycle_of_identity_moves_data_one_block() {
        let p = identity(60, 2, 1);
        let s = build_schedule(&p).unwrap();
        let y = [0, 0, 1, 0, 1];
        let mut c = encode(&st(&y, 2, 0), &p, &s).unwrap();
        for _ in 0..s.t {
            c = pi_on_encoded(&c, &p, &s).unwrap();
        }
        assert_eq!(decode(&c, &p, &s).unwrap(), st(&[1, 0, 0, 1, 0], 2, 0));
    }

    #[test]
    fn one_step_touches_only_tokens() {
        let p = shift(56, 1, 1);
        let s = build_schedule(&p).unwrap();
        let c = encode(&st(&[0, 1], 9, 17), &p, &s).unwrap();
        let d = pi_on_encoded(&c, &p, &s).unwrap();
        for (a, b) in c.cells.iter().zip(&d.cells) {
            assert_eq!((a.block, a.program, a.data), (b.block, b.program, b.data));
            assert_ne!(a.token, b.token);
        }
        assert_eq!(pi_inverse_on_encoded(&d, &p, &s).unwrap(), c);
    }

    #[test]
    fn pi_inverse_is_exhaustively_an_inverse() {
        let p = shift(56, 1, 1);
        let s = build_schedule(&p).unwrap();
        let enc = Encoder::new(&p, &s);
        let bad = all_states(&p, &s, 1).into_par_iter().filter(|st| {
            let c = enc.encode(st).unwrap();
            pi_inverse_on_encoded(&pi_on_encoded(&c, &p, &s).unwrap(), &p, &s).unwrap() != c
        });
        assert_eq!(bad.count(), 0);
    }

    #[test]
    fn malformed_layers_are_rejected() {
        let p = shift(56, 1, 1);
        let s = build_schedule(&p).unwrap();
        let c = encode(&st(&[0, 1], 3, 40), &p, &s).unwrap();
        let mut a = c.clone();
        a.cells[5].token = s.token(41);
        assert!(matches!(decode(&a, &p, &s), Err(CycleError::MalformedConfiguration(_))));
        let mut b = c.clone();
        b.cells[0].block = !b.cells[0].block;
        assert!(decode(&b, &p, &s).is_err());
        let mut d = c;
        d.cells.pop();
        assert!(decode(&d, &p, &s).is_err());
    }

    #[test]
    fn periodic_point_subshift() {
        let a = Alphabet::numeric(3);
        let pts = YSpec::PeriodicPoints(vec![vec![0, 1, 2]]);
        let p = SimParams::new(3, pts, LocalRule::shift(a.clone(), 1), LocalRule::shift(a, -1), 40, 2, 0).unwrap();
        assert_eq!(p.table_windows().len(), 3);
        assert!(p.represents(&[2, 0, 1]));
        assert!(!p.represents(&[2, 1, 0]));
        let s = build_schedule(&p).unwrap();
        assert!(round_trip_failures(&p, &s, 3).is_empty());
    }

    #[test]
    fn params_json_round_trip() {
        let p = shift(64, 2, -1);
        let q = SimParams::from_json(&p.to_json()).unwrap();
        assert_eq!((q.n, q.b, q.w, q.d), (2, 64, 2, -1));
        assert_eq!(q.phi.to_json(), p.phi.to_json());
        assert!(SimParams::from_json("{\"N\":2}").is_err());
    }

    #[test]
    fn tower_counts_and_transform() {
        let lv = LevelParams::idealized(8, 2, 1);
        let prog = SlopeProgram::new(vec![lv.clone(), lv]);
        let base = BigUint::from(6u32);
        let one = tower(&prog, 1, &base, &TimingModel::idealized()).unwrap();
        assert_eq!(one.state_count, BigUint::from(6u32 * 8 * 32));
        let two = tower(&prog, 2, &base, &TimingModel::idealized()).unwrap();
        assert_eq!(two.state_count, BigUint::from(6u32 * 256 * 256));
        assert_eq!(two.transform.m, [[int(1), int(5)], [int(0), int(16)]]);
        let strict = build_schedule(&identity(64, 2, 0)).unwrap().timing_model();
        assert!(matches!(
            tower(&prog, 1, &base, &strict),
            Err(CycleError::TowerBlockTooSmall { level: 1, .. })
        ));
    }
}
