//! The reversible arrow/bracket automaton.
//!
//! A single arrow walks over a landscape of counter-carrying brackets. Every
//! transition touches at most three cells around the arrow, so the automaton
//! is a range-2 block code. Far from the arrow nothing ever changes, and the
//! arrow needs exponentially long to cross nested blocks.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

use crate::dynamics::Family;
use crate::shift::{
    Alphabet, Automaton, Configuration, DefaultAction, LocalRule, ShiftError, Stepper, Sym,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AbError {
    #[error("counter bound n must be at least 1, got {0}")]
    InvalidCounter(u32),
    #[error("transitions conflict on admissible window {window:?}")]
    ConflictingTransitions { window: Vec<Sym> },
    #[error("no crossing within {0} steps")]
    Timeout(u64),
    #[error("configuration has no arrow")]
    NoArrow,
    #[error("arrow at {position} meets a bracket it cannot act on at time {t}")]
    UndefinedEncounter { t: u64, position: i64 },
    #[error("configuration is not admissible: {0}")]
    Inadmissible(String),
    #[error("unknown character `{0}` in arrow/bracket text")]
    BadText(char),
    #[error(transparent)]
    Shift(#[from] ShiftError),
}

/// A symbol of the automaton with counter bound `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ABSymbol {
    Blank,
    ArrowRight,
    ArrowLeft,
    Open(u32),
    Close(u32),
    OpenMarked(u32),
    CloseMarked(u32),
}

impl ABSymbol {
    pub fn is_arrow(self) -> bool {
        matches!(self, ABSymbol::ArrowRight | ABSymbol::ArrowLeft)
    }

    pub fn is_bracket(self) -> bool {
        !matches!(
            self,
            ABSymbol::Blank | ABSymbol::ArrowRight | ABSymbol::ArrowLeft
        )
    }

    /// Left-right reflection: arrows and bracket orientations swap.
    pub fn mirror(self) -> ABSymbol {
        use ABSymbol::*;
        match self {
            Blank => Blank,
            ArrowRight => ArrowLeft,
            ArrowLeft => ArrowRight,
            Open(k) => Close(k),
            Close(k) => Open(k),
            OpenMarked(k) => CloseMarked(k),
            CloseMarked(k) => OpenMarked(k),
        }
    }

    /// Alphabet index for counter bound `n`: blank, the two arrows, then
    /// `Open(0..=n)`, `Close(0..=n)`, `OpenMarked(0..n)`, `CloseMarked(0..n)`.
    pub fn index(self, n: u32) -> Sym {
        use ABSymbol::*;
        let m = n + 1;
        let i = match self {
            Blank => 0,
            ArrowRight => 1,
            ArrowLeft => 2,
            Open(k) => 3 + k,
            Close(k) => 3 + m + k,
            OpenMarked(k) => 3 + 2 * m + k,
            CloseMarked(k) => 3 + 2 * m + n + k,
        };
        i as Sym
    }

    pub fn from_index(i: Sym, n: u32) -> Option<ABSymbol> {
        use ABSymbol::*;
        let i = i as u32;
        let m = n + 1;
        Some(match i {
            0 => Blank,
            1 => ArrowRight,
            2 => ArrowLeft,
            _ if i < 3 + m => Open(i - 3),
            _ if i < 3 + 2 * m => Close(i - 3 - m),
            _ if i < 3 + 2 * m + n => OpenMarked(i - 3 - 2 * m),
            _ if i < 3 + 2 * m + 2 * n => CloseMarked(i - 3 - 2 * m - n),
            _ => return None,
        })
    }

    fn name(self) -> String {
        use ABSymbol::*;
        match self {
            Blank => "-".into(),
            ArrowRight => ">".into(),
            ArrowLeft => "<".into(),
            Open(k) => format!("[{k}"),
            Close(k) => format!("]{k}"),
            OpenMarked(k) => format!("[*{k}"),
            CloseMarked(k) => format!("]*{k}"),
        }
    }
}

/// Number of symbols for counter bound `n`.
pub fn alphabet_size(n: u32) -> usize {
    4 * n as usize + 5
}

pub fn ab_alphabet(n: u32) -> Alphabet {
    let names = (0..alphabet_size(n) as Sym).map(|i| ABSymbol::from_index(i, n).unwrap().name());
    Alphabet::new(names).expect("arrow/bracket names are distinct")
}

/// One rewriting rule on a short pattern containing the arrow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub lhs: Vec<ABSymbol>,
    pub rhs: Vec<ABSymbol>,
}

impl Transition {
    fn new(lhs: Vec<ABSymbol>, rhs: Vec<ABSymbol>) -> Self {
        debug_assert_eq!(lhs.len(), rhs.len());
        Self { lhs, rhs }
    }

    /// Reverse the pattern and reflect every symbol.
    pub fn mirror(&self) -> Transition {
        let m = |w: &[ABSymbol]| w.iter().rev().map(|s| s.mirror()).collect();
        Transition::new(m(&self.lhs), m(&self.rhs))
    }

    fn reversed(&self) -> Transition {
        Transition::new(self.rhs.clone(), self.lhs.clone())
    }

    fn arrow_offset(&self) -> usize {
        self.lhs.iter().position(|s| s.is_arrow()).expect("every pattern has an arrow")
    }
}

/// The six right-moving families; the left-moving ones are their mirrors.
pub fn base_transitions(n: u32) -> Vec<Transition> {
    use ABSymbol::*;
    let (r, l, b) = (ArrowRight, ArrowLeft, Blank);
    let mut out = vec![
        Transition::new(vec![r, b], vec![b, r]),
        Transition::new(vec![r, Open(n), b], vec![b, OpenMarked(n - 1), r]),
    ];
    for k in 1..=n {
        out.push(Transition::new(vec![r, Close(k), b], vec![l, Close(k - 1), b]));
    }
    out.push(Transition::new(vec![r, Close(0), b], vec![b, Close(n), r]));
    for k in 1..n {
        out.push(Transition::new(
            vec![b, OpenMarked(k), l],
            vec![b, OpenMarked(k - 1), r],
        ));
    }
    out.push(Transition::new(vec![b, OpenMarked(0), l], vec![b, Open(n), r]));
    out
}

/// Base transitions followed by their mirrors.
pub fn all_transitions(n: u32) -> Vec<Transition> {
    let base = base_transitions(n);
    let mirrored: Vec<_> = base.iter().map(Transition::mirror).collect();
    base.into_iter().chain(mirrored).collect()
}

/// The automaton for one counter bound, or its time reversal.
#[derive(Debug, Clone)]
pub struct ABSystem {
    n: u32,
    transitions: Vec<Transition>,
    /// Per arrow symbol (right, left): transitions with the arrow's offset.
    by_arrow: [Vec<(usize, usize)>; 2],
    /// The full range-2 table, derived on first use.
    rule: OnceLock<LocalRule>,
    reversed: bool,
}

/// Builds the range-2 automaton with counter bound `n`.
pub fn build_rule(n: u32) -> Result<ABSystem, AbError> {
    if n == 0 {
        return Err(AbError::InvalidCounter(n));
    }
    ABSystem::from_transitions(n, all_transitions(n), false)
}

/// Cell updates caused by the arrow at `a`, or `None` if no pattern matches.
fn fire_at(
    n: u32,
    transitions: &[Transition],
    candidates: &[(usize, usize)],
    get: impl Fn(i64) -> Sym,
    a: i64,
) -> Option<Vec<(i64, Sym)>> {
    for &(ti, off) in candidates {
        let t = &transitions[ti];
        let start = a - off as i64;
        let hit = t
            .lhs
            .iter()
            .enumerate()
            .all(|(j, s)| get(start + j as i64) == s.index(n));
        if hit {
            return Some(
                t.rhs
                    .iter()
                    .enumerate()
                    .map(|(j, s)| (start + j as i64, s.index(n)))
                    .collect(),
            );
        }
    }
    None
}

impl ABSystem {
    fn from_transitions(
        n: u32,
        transitions: Vec<Transition>,
        reversed: bool,
    ) -> Result<Self, AbError> {
        let mut by_arrow: [Vec<(usize, usize)>; 2] = [Vec::new(), Vec::new()];
        for (i, t) in transitions.iter().enumerate() {
            let off = t.arrow_offset();
            let slot = if t.lhs[off] == ABSymbol::ArrowRight { 0 } else { 1 };
            by_arrow[slot].push((i, off));
        }
        check_conflicts(n, &transitions)?;
        Ok(Self {
            n,
            transitions,
            by_arrow,
            rule: OnceLock::new(),
            reversed,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn rule(&self) -> &LocalRule {
        self.rule.get_or_init(|| {
            derive_table(self.n, &self.transitions).expect("conflicts are ruled out at construction")
        })
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    /// The time-reversed automaton: every transition read right to left.
    pub fn inverse(&self) -> Result<ABSystem, AbError> {
        let t = self.transitions.iter().map(Transition::reversed).collect();
        ABSystem::from_transitions(self.n, t, !self.reversed)
    }

    pub fn sym(&self, s: ABSymbol) -> Sym {
        s.index(self.n)
    }

    pub fn decode(&self, s: Sym) -> ABSymbol {
        ABSymbol::from_index(s, self.n).expect("symbol in alphabet")
    }

    fn candidates(&self, s: Sym) -> Option<&[(usize, usize)]> {
        match s {
            1 => Some(&self.by_arrow[0]),
            2 => Some(&self.by_arrow[1]),
            _ => None,
        }
    }

    /// Updates produced by the arrow at `a`; `None` when it is stuck.
    pub fn fire(&self, get: impl Fn(i64) -> Sym, a: i64) -> Option<Vec<(i64, Sym)>> {
        let cands = self.candidates(get(a))?;
        fire_at(self.n, &self.transitions, cands, get, a)
    }

    /// Arrow positions within one period (periodic) or overall (padded).
    pub fn arrows(&self, c: &Configuration) -> Vec<i64> {
        let lo_hi = match c {
            Configuration::Periodic { word } => Some((0, word.len() as i64 - 1)),
            Configuration::Padded { .. } => c.explicit_window(),
        };
        let mut out = Vec::new();
        if let Some((lo, hi)) = lo_hi {
            for i in lo..=hi {
                if matches!(c.get(i), 1 | 2) {
                    out.push(i);
                }
            }
        }
        if let Configuration::Padded { pad, .. } = c {
            if matches!(*pad, 1 | 2) {
                // Infinitely many arrows; report the pad as a sentinel.
                out.push(i64::MIN);
            }
        }
        out
    }

    /// Locally admissible: at most one arrow, no two adjacent brackets,
    /// symbols in range, and the arrow (if any) is not stuck.
    pub fn admissible(&self, c: &Configuration) -> bool {
        admissibility(self, c).is_ok()
    }
}

fn admissibility(sys: &ABSystem, c: &Configuration) -> Result<(), String> {
    let size = alphabet_size(sys.n);
    if let Some(s) = c.symbols().find(|&s| s as usize >= size) {
        return Err(format!("symbol {s} outside the alphabet"));
    }
    if let Configuration::Padded { pad, .. } = c {
        if *pad != 0 {
            return Err("pad must be blank".into());
        }
    }
    let arrows = sys.arrows(c);
    if arrows.len() > 1 {
        return Err(format!("{} arrows", arrows.len()));
    }
    let is_bracket = |s: Sym| s >= 3;
    match c {
        Configuration::Periodic { word } => {
            let p = word.len();
            if p == 1 && is_bracket(word[0]) {
                return Err("adjacent brackets".into());
            }
            for i in 0..p {
                if p > 1 && is_bracket(word[i]) && is_bracket(word[(i + 1) % p]) {
                    return Err("adjacent brackets".into());
                }
            }
        }
        Configuration::Padded { word, .. } => {
            if word.windows(2).any(|w| is_bracket(w[0]) && is_bracket(w[1])) {
                return Err("adjacent brackets".into());
            }
        }
    }
    if let Some(&a) = arrows.first() {
        if sys.fire(|i| c.get(i), a).is_none() {
            return Err(format!("arrow at {a} is stuck"));
        }
    }
    Ok(())
}

/// True iff `c` is admissible for counter bound `n`.
pub fn admissible(c: &Configuration, n: u32) -> bool {
    match build_rule(n) {
        Ok(sys) => sys.admissible(c),
        Err(_) => false,
    }
}

fn window_locally_admissible(w: &[Sym]) -> bool {
    let arrows = w.iter().filter(|&&s| s == 1 || s == 2).count();
    arrows <= 1 && !w.windows(2).any(|p| p[0] >= 3 && p[1] >= 3)
}

/// Placements `(transition, start)` of left-hand sides in a 5-window
/// (center at 0) that cover the center.
fn placements(transitions: &[Transition]) -> Vec<(usize, i64)> {
    let mut out = Vec::new();
    for (ti, t) in transitions.iter().enumerate() {
        let len = t.lhs.len() as i64;
        for start in -2..=0 {
            if start + len > 0 && start + len - 1 <= 2 {
                out.push((ti, start));
            }
        }
    }
    out
}

/// Two placements that fit one locally admissible window but disagree on
/// the center. Blank filling keeps a window admissible, so checking pairs
/// with blanks elsewhere is exhaustive.
fn check_conflicts(n: u32, transitions: &[Transition]) -> Result<(), AbError> {
    let places = placements(transitions);
    for (a, &(t1, s1)) in places.iter().enumerate() {
        for &(t2, s2) in &places[a + 1..] {
            let mut w: [Option<Sym>; 5] = [None; 5];
            let mut fits = true;
            for (t, st) in [(t1, s1), (t2, s2)] {
                for (j, x) in transitions[t].lhs.iter().enumerate() {
                    let slot = &mut w[(st + j as i64 + 2) as usize];
                    match slot {
                        Some(v) if *v != x.index(n) => fits = false,
                        _ => *slot = Some(x.index(n)),
                    }
                }
            }
            if !fits {
                continue;
            }
            let full: Vec<Sym> = w.iter().map(|v| v.unwrap_or(0)).collect();
            let c1 = transitions[t1].rhs[(-s1) as usize].index(n);
            let c2 = transitions[t2].rhs[(-s2) as usize].index(n);
            if c1 != c2 && window_locally_admissible(&full) {
                return Err(AbError::ConflictingTransitions { window: full });
            }
        }
    }
    Ok(())
}

/// Places every transition at every offset covering the center of a
/// 5-window and records the center's new value.
fn derive_table(n: u32, transitions: &[Transition]) -> Result<LocalRule, AbError> {
    let k = alphabet_size(n) as Sym;
    let lhs: Vec<Vec<Sym>> = transitions
        .iter()
        .map(|t| t.lhs.iter().map(|s| s.index(n)).collect())
        .collect();
    let rhs: Vec<Vec<Sym>> = transitions
        .iter()
        .map(|t| t.rhs.iter().map(|s| s.index(n)).collect())
        .collect();
    // Every left-hand side contains an arrow; index them by it.
    let mut by_arrow: HashMap<Sym, Vec<(usize, i64)>> = HashMap::new();
    for (ti, t) in transitions.iter().enumerate() {
        for (j, s) in t.lhs.iter().enumerate() {
            if s.is_arrow() {
                by_arrow.entry(s.index(n)).or_default().push((ti, j as i64));
            }
        }
    }
    let eval_center = |w: &[Sym; 5]| -> Result<Option<Sym>, ()> {
        let mut out: Option<Sym> = None;
        for (p, s) in w.iter().enumerate() {
            let Some(cands) = by_arrow.get(s) else { continue };
            for &(ti, aj) in cands {
                let start = p as i64 - 2 - aj;
                let len = lhs[ti].len() as i64;
                if start > 0 || start + len - 1 < 0 || start < -2 || start + len - 1 > 2 {
                    continue;
                }
                let matches = lhs[ti]
                    .iter()
                    .enumerate()
                    .all(|(j, &x)| w[(start + j as i64 + 2) as usize] == x);
                if matches {
                    let v = rhs[ti][(-start) as usize];
                    match out {
                        Some(prev) if prev != v => return Err(()),
                        _ => out = Some(v),
                    }
                }
            }
        }
        Ok(out)
    };

    let key = |w: &[Sym; 5]| w.iter().fold(0u64, |acc, &s| acc * k as u64 + s as u64);
    let mut entries: HashMap<Vec<Sym>, Sym> = HashMap::new();
    let mut seen: HashSet<u64> = HashSet::new();
    for t in &lhs {
        let len = t.len() as i64;
        for start in -2..=(2 - len + 1) {
            if start > 0 || start + len - 1 < 0 {
                continue;
            }
            let fixed: Vec<(usize, Sym)> = t
                .iter()
                .enumerate()
                .map(|(j, &s)| ((start + j as i64 + 2) as usize, s))
                .collect();
            let free: Vec<usize> = (0..5).filter(|p| !fixed.iter().any(|f| f.0 == *p)).collect();
            let combos = (k as usize).pow(free.len() as u32);
            let mut w = [0 as Sym; 5];
            for &(p, s) in &fixed {
                w[p] = s;
            }
            for mut code in 0..combos {
                for &p in &free {
                    w[p] = (code % k as usize) as Sym;
                    code /= k as usize;
                }
                if !seen.insert(key(&w)) {
                    continue;
                }
                match eval_center(&w) {
                    Ok(Some(v)) if v != w[2] => {
                        entries.insert(w.to_vec(), v);
                    }
                    Ok(_) => {}
                    Err(()) if window_locally_admissible(&w) => {
                        return Err(AbError::ConflictingTransitions { window: w.to_vec() })
                    }
                    Err(()) => {}
                }
            }
        }
    }
    Ok(LocalRule::new(ab_alphabet(n), 2, entries, DefaultAction::Identity)?)
}

impl Automaton for ABSystem {
    fn alphabet_size(&self) -> usize {
        alphabet_size(self.n)
    }

    fn range(&self) -> usize {
        2
    }

    fn step(&self, c: &Configuration) -> Result<Configuration, ShiftError> {
        let changes = self.changes(c)?;
        let mut next = c.clone();
        for (i, s) in changes {
            next.set(i, s);
        }
        if let Configuration::Padded { .. } = next {
            next = next.normalized();
        }
        Ok(next)
    }

    fn changes(&self, c: &Configuration) -> Result<Vec<(i64, Sym)>, ShiftError> {
        let size = alphabet_size(self.n);
        if let Some(s) = c.symbols().find(|&s| s as usize >= size) {
            return Err(ShiftError::AlphabetMismatch(format!(
                "symbol {s} outside an alphabet of size {size}"
            )));
        }
        let short_period = matches!(c, Configuration::Periodic { word } if word.len() < 5);
        let arrows = self.arrows(c);
        if short_period || arrows.len() > 1 {
            // Several arrows may interact; fall back to the block code.
            let next = self.rule().step(c)?;
            return Ok(crate::shift::diff(c, &next));
        }
        let Some(&a) = arrows.first() else {
            return Ok(Vec::new());
        };
        let mut out = self.fire(|i| c.get(i), a).unwrap_or_default();
        out.retain(|&(i, s)| c.get(i) != s);
        if let Some(p) = c.period() {
            for e in &mut out {
                e.0 = e.0.rem_euclid(p as i64);
            }
        }
        Ok(out)
    }

    fn fast_stepper<'a>(&'a self, c: &Configuration) -> Option<Box<dyn Stepper + 'a>> {
        if c.symbols().any(|s| s as usize >= alphabet_size(self.n)) {
            return None;
        }
        Tape::new(self, c).ok().map(|t| Box::new(t) as Box<dyn Stepper + 'a>)
    }
}

impl Stepper for Tape<'_> {
    fn get(&self, i: i64) -> Sym {
        Tape::get(self, i)
    }

    fn advance(&mut self) -> Result<Vec<i64>, ShiftError> {
        let Some(upd) = self.sys.fire(|i| Tape::get(self, i), self.arrow) else {
            // A stuck arrow is a fixed point of the block code.
            return Ok(Vec::new());
        };
        let mut out = Vec::with_capacity(upd.len());
        for (i, s) in upd {
            let cell = &mut self.cells[(i - self.origin) as usize];
            if *cell != s {
                *cell = s;
                out.push(i);
            }
            if s == 1 || s == 2 {
                self.arrow = i;
            }
        }
        self.reserve(self.arrow);
        Ok(out)
    }
}

/// A blank-padded tape with a single arrow, stepped in place.
#[derive(Debug, Clone)]
pub struct Tape<'a> {
    sys: &'a ABSystem,
    cells: Vec<Sym>,
    origin: i64,
    arrow: i64,
}

impl<'a> Tape<'a> {
    pub fn new(sys: &'a ABSystem, c: &Configuration) -> Result<Self, AbError> {
        let (word, anchor) = match c {
            Configuration::Padded { word, pad: 0, anchor } => (word.clone(), *anchor),
            _ => return Err(AbError::Inadmissible("tape needs a blank-padded configuration".into())),
        };
        let arrows = sys.arrows(c);
        let arrow = match arrows.as_slice() {
            [] => return Err(AbError::NoArrow),
            [a] => *a,
            _ => return Err(AbError::Inadmissible("more than one arrow".into())),
        };
        let mut tape = Self {
            sys,
            cells: word,
            origin: anchor,
            arrow,
        };
        tape.reserve(arrow);
        Ok(tape)
    }

    fn reserve(&mut self, a: i64) {
        let lo = a - 4;
        let hi = a + 4;
        if lo < self.origin {
            let grow = (self.origin - lo) as usize + self.cells.len().max(16);
            self.cells.splice(0..0, std::iter::repeat_n(0, grow));
            self.origin -= grow as i64;
        }
        let end = self.origin + self.cells.len() as i64;
        if hi >= end {
            let grow = (hi - end + 1) as usize + self.cells.len().max(16);
            self.cells.resize(self.cells.len() + grow, 0);
        }
    }

    pub fn get(&self, i: i64) -> Sym {
        let k = i - self.origin;
        if k >= 0 && (k as usize) < self.cells.len() {
            self.cells[k as usize]
        } else {
            0
        }
    }

    pub fn arrow(&self) -> i64 {
        self.arrow
    }

    /// Advances one step; `false` if the arrow is stuck.
    pub fn step(&mut self) -> bool {
        let Some(upd) = self.sys.fire(|i| self.get(i), self.arrow) else {
            return false;
        };
        for (i, s) in upd {
            self.cells[(i - self.origin) as usize] = s;
            if s == 1 || s == 2 {
                self.arrow = i;
            }
        }
        self.reserve(self.arrow);
        true
    }

    pub fn slice(&self, lo: i64, hi: i64) -> Vec<Sym> {
        (lo..=hi).map(|i| self.get(i)).collect()
    }

    pub fn to_configuration(&self) -> Configuration {
        Configuration::padded(self.cells.clone(), 0, self.origin).normalized()
    }
}

/// `[-]`, then `[` p `-` p `]`.
pub fn make_preblock(k: u32) -> String {
    let mut p = String::from("[-]");
    for _ in 0..k {
        p = format!("[{p}-{p}]");
    }
    p
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSpec {
    pub level: u32,
    pub n: u32,
    pub word: Vec<ABSymbol>,
}

impl BlockSpec {
    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }

    pub fn syms(&self) -> Vec<Sym> {
        self.word.iter().map(|s| s.index(self.n)).collect()
    }
}

/// The level-`k` pre-block with a blank between every pair of symbols,
/// brackets unmarked at counter `n`.
pub fn make_block(k: u32, n: u32) -> BlockSpec {
    let pre: Vec<char> = make_preblock(k).chars().collect();
    let mut word = Vec::with_capacity(2 * pre.len() - 1);
    for (i, ch) in pre.iter().enumerate() {
        if i > 0 {
            word.push(ABSymbol::Blank);
        }
        word.push(match ch {
            '[' => ABSymbol::Open(n),
            ']' => ABSymbol::Close(n),
            _ => ABSymbol::Blank,
        });
    }
    BlockSpec { level: k, n, word }
}

/// `prefix · block(k, n) · suffix` with the block starting at coordinate 0.
fn framed_block(k: u32, n: u32, left: ABSymbol, right: ABSymbol) -> Configuration {
    let block = make_block(k, n);
    let mut word = vec![left.index(n)];
    word.extend(block.syms());
    word.push(right.index(n));
    Configuration::padded(word, 0, -1).normalized()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossingReport {
    pub level: u32,
    pub n: u32,
    pub width: usize,
    pub steps: u64,
    pub restored: bool,
    pub trace_length: u64,
    /// Largest single-step displacement of the arrow.
    pub max_jump: i64,
}

fn cross(
    sys: &ABSystem,
    k: u32,
    rightward: bool,
    t_limit: u64,
    mut visit: impl FnMut(&Tape),
) -> Result<CrossingReport, AbError> {
    use ABSymbol::*;
    let n = sys.n;
    let block = make_block(k, n).syms();
    let len = block.len() as i64;
    let (start, goal) = if rightward {
        (framed_block(k, n, ArrowRight, Blank), len)
    } else {
        (framed_block(k, n, Blank, ArrowLeft), -1)
    };
    let mut tape = Tape::new(sys, &start)?;
    visit(&tape);
    let mut t = 0u64;
    let mut max_jump = 0;
    loop {
        if tape.arrow() == goal {
            let restored = tape.slice(0, len - 1) == block;
            let arrow_ok = tape.get(goal) == if rightward { 1 } else { 2 };
            let clean = (goal - 2..=goal + 2)
                .filter(|&i| !(0..len).contains(&i) && i != goal)
                .all(|i| tape.get(i) == 0);
            if restored && arrow_ok && clean {
                return Ok(CrossingReport {
                    level: k,
                    n,
                    width: block.len(),
                    steps: t,
                    restored,
                    trace_length: t + 1,
                    max_jump,
                });
            }
        }
        if t >= t_limit {
            return Err(AbError::Timeout(t_limit));
        }
        let before = tape.arrow();
        if !tape.step() {
            return Err(AbError::UndefinedEncounter {
                t,
                position: before,
            });
        }
        max_jump = max_jump.max((tape.arrow() - before).abs());
        t += 1;
        visit(&tape);
    }
}

/// Steps from `→a−` to the first occurrence of `−a→` for `a = block(k, n)`.
pub fn run_crossing(k: u32, n: u32, t_limit: u64) -> Result<CrossingReport, AbError> {
    let sys = build_rule(n)?;
    cross(&sys, k, true, t_limit, |_| {})
}

/// The same crossing on an already built system.
pub fn run_crossing_with(sys: &ABSystem, k: u32, t_limit: u64) -> Result<CrossingReport, AbError> {
    cross(sys, k, true, t_limit, |_| {})
}

/// Intermediate patterns of the two crossings of `block(k, n)`.
#[derive(Debug, Clone)]
pub struct LPatterns {
    pub rightward: Vec<Configuration>,
    pub leftward: Vec<Configuration>,
}

impl LPatterns {
    pub fn all(&self) -> HashSet<Configuration> {
        self.rightward.iter().chain(&self.leftward).cloned().collect()
    }
}

pub fn enumerate_l(k: u32, n: u32, t_limit: u64) -> Result<LPatterns, AbError> {
    let sys = build_rule(n)?;
    let mut rightward = Vec::new();
    cross(&sys, k, true, t_limit, |tape| {
        rightward.push(tape.to_configuration())
    })?;
    let mut leftward = Vec::new();
    cross(&sys, k, false, t_limit, |tape| {
        leftward.push(tape.to_configuration())
    })?;
    Ok(LPatterns {
        rightward,
        leftward,
    })
}

/// The state at time `phase` of the rightward crossing of `block(depth, n)`.
/// Phase 0 is `→a−` itself.
pub fn hierarchical(sys: &ABSystem, depth: u32, phase: u64) -> Result<Configuration, AbError> {
    let start = framed_block(depth, sys.n, ABSymbol::ArrowRight, ABSymbol::Blank);
    let mut tape = Tape::new(sys, &start)?;
    for t in 0..phase {
        if !tape.step() {
            return Err(AbError::UndefinedEncounter {
                t,
                position: tape.arrow(),
            });
        }
    }
    Ok(tape.to_configuration())
}

/// Depth-`depth` crossing states at phases 0 and 1000, each with every
/// admissible removal of a bracket at `20, 80, 140, …` inside the block.
pub fn bracket_removal_family(sys: &ABSystem, depth: u32) -> Result<Family, AbError> {
    let mut members = Vec::new();
    for phase in [0u64, 1000] {
        let base = hierarchical(sys, depth, phase)?;
        members.push(base.clone());
        for j in (20..block_len(depth) as i64).step_by(60) {
            if sys.decode(base.get(j)).is_bracket() {
                let mut c = base.clone();
                c.set(j, 0);
                if sys.admissible(&c) {
                    members.push(c);
                }
            }
        }
    }
    Ok(Family::new(format!("depth-{depth} blocks with removed brackets"), members))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrowTrace {
    /// `(t, position)` for `t = 0..=t_max`; empty for a fixed point.
    pub positions: Vec<(u64, i64)>,
    pub fixed_point: bool,
}

impl ArrowTrace {
    /// `max |position(t) − position(0)|` over `t ≤ t_end`.
    pub fn max_displacement(&self, t_end: u64) -> i64 {
        let Some(&(_, p0)) = self.positions.first() else {
            return 0;
        };
        self.positions
            .iter()
            .take_while(|(t, _)| *t <= t_end)
            .map(|(_, p)| (p - p0).abs())
            .max()
            .unwrap_or(0)
    }
}

/// Arrow coordinate at every step up to `t_max`. The arrow moves at most
/// two cells per step.
pub fn arrow_trace(c: &Configuration, sys: &ABSystem, t_max: u64) -> Result<ArrowTrace, AbError> {
    admissibility(sys, c).map_err(AbError::Inadmissible)?;
    let arrows = sys.arrows(c);
    let Some(&a0) = arrows.first() else {
        return Ok(ArrowTrace {
            positions: Vec::new(),
            fixed_point: true,
        });
    };
    let mut positions = Vec::with_capacity(t_max as usize + 1);
    positions.push((0, a0));
    match c {
        Configuration::Padded { .. } => {
            let mut tape = Tape::new(sys, c)?;
            for t in 1..=t_max {
                if !tape.step() {
                    return Err(AbError::UndefinedEncounter {
                        t: t - 1,
                        position: tape.arrow(),
                    });
                }
                positions.push((t, tape.arrow()));
            }
        }
        Configuration::Periodic { word } => {
            // Unwrap the position so that it is continuous along the orbit.
            let p = word.len() as i64;
            let mut cur = c.clone();
            let mut pos = a0;
            for t in 1..=t_max {
                let before = pos.rem_euclid(p);
                let upd = sys
                    .fire(|i| cur.get(i), before)
                    .ok_or(AbError::UndefinedEncounter {
                        t: t - 1,
                        position: pos,
                    })?;
                let mut moved = 0;
                for &(i, s) in &upd {
                    if s == 1 || s == 2 {
                        moved = i - before;
                    }
                }
                cur = sys.step(&cur)?;
                pos += moved;
                positions.push((t, pos));
            }
        }
    }
    Ok(ArrowTrace {
        positions,
        fixed_point: false,
    })
}

/// Two distinct admissible configurations with the same image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Collision {
    pub first: Vec<Sym>,
    pub second: Vec<Sym>,
    pub image: Vec<Sym>,
}

/// Calls `f` on every word of length `len` that has `arrow` at `arrow_pos`,
/// no other arrow, and no two adjacent brackets (cyclically if asked).
fn for_each_single_arrow_word(
    n: u32,
    len: usize,
    arrow_pos: usize,
    arrow: Sym,
    cyclic: bool,
    f: &mut impl FnMut(&[Sym]),
) {
    fn rec(
        pos: usize,
        w: &mut Vec<Sym>,
        len: usize,
        size: Sym,
        arrow_pos: usize,
        arrow: Sym,
        cyclic: bool,
        f: &mut impl FnMut(&[Sym]),
    ) {
        if pos == len {
            if cyclic && len > 1 && w[0] >= 3 && w[len - 1] >= 3 {
                return;
            }
            f(w);
            return;
        }
        let choices: &mut dyn Iterator<Item = Sym> = if pos == arrow_pos {
            &mut std::iter::once(arrow)
        } else {
            &mut std::iter::once(0).chain(3..size)
        };
        for s in choices {
            if s >= 3 && pos > 0 && w[pos - 1] >= 3 {
                continue;
            }
            w.push(s);
            rec(pos + 1, w, len, size, arrow_pos, arrow, cyclic, f);
            w.pop();
        }
    }
    let mut w = Vec::with_capacity(len);
    rec(0, &mut w, len, alphabet_size(n) as Sym, arrow_pos, arrow, cyclic, f);
}

fn pack(word: &[Sym], bits: u32) -> u128 {
    word.iter().fold(0u128, |acc, &s| (acc << bits) | s as u128)
}

fn unpack(mut code: u128, len: usize, bits: u32) -> Vec<Sym> {
    let mut w = vec![0; len];
    for slot in w.iter_mut().rev() {
        *slot = (code & ((1 << bits) - 1)) as Sym;
        code >>= bits;
    }
    w
}

fn symbol_bits(n: u32) -> u32 {
    usize::BITS - (alphabet_size(n) - 1).leading_zeros()
}

/// Exhaustive search over admissible periodic configurations of exact
/// period `p`. Arrowless points are fixed and never collide; by shift
/// equivariance only images with their arrow at 0 need comparing.
pub fn periodic_collision(sys: &ABSystem, p: usize) -> Result<Option<Collision>, AbError> {
    let bits = symbol_bits(sys.n);
    if p == 0 || p as u32 * bits > 128 {
        return Err(AbError::Inadmissible(format!("period {p} too long to enumerate")));
    }
    let mut seen: HashMap<u128, u128> = HashMap::new();
    let mut found = None;
    for a in -2i64..=2 {
        let pos = a.rem_euclid(p as i64) as usize;
        if a != 0 && pos == 0 && p <= 2 {
            continue;
        }
        for arrow in [1, 2] {
            for_each_single_arrow_word(sys.n, p, pos, arrow, true, &mut |w| {
                if found.is_some() {
                    return;
                }
                let c = Configuration::Periodic { word: w.to_vec() };
                if !sys.admissible(&c) {
                    return;
                }
                let img = match sys.step(&c) {
                    Ok(Configuration::Periodic { word }) => word,
                    _ => return,
                };
                if img.iter().position(|&s| s == 1 || s == 2) != Some(0) {
                    return;
                }
                let key = pack(&img, bits);
                let code = pack(w, bits);
                match seen.get(&key) {
                    Some(&prev) if prev != code => {
                        found = Some(Collision {
                            first: unpack(prev, p, bits),
                            second: w.to_vec(),
                            image: img,
                        })
                    }
                    Some(_) => {}
                    None => {
                        seen.insert(key, code);
                    }
                }
            });
        }
    }
    Ok(found)
}

/// Collision search on the 9-cell window around the image arrow. A collision
/// between single-arrow configurations whose period is at least 9 (or which
/// are blank-padded) restricts to one here, so an empty result proves
/// injectivity on all of them.
pub fn local_collision(sys: &ABSystem) -> Option<Collision> {
    const W: usize = 9;
    const CENTER: i64 = 4;
    let bits = symbol_bits(sys.n);
    let mut seen: HashMap<u128, u128> = HashMap::new();
    let mut found = None;
    for a in -2i64..=2 {
        for arrow in [1, 2] {
            for_each_single_arrow_word(sys.n, W, (CENTER + a) as usize, arrow, false, &mut |w| {
                if found.is_some() {
                    return;
                }
                let get = |i: i64| if (0..W as i64).contains(&i) { w[i as usize] } else { 0 };
                let Some(upd) = sys.fire(get, CENTER + a) else {
                    return;
                };
                let mut img = w.to_vec();
                for (i, s) in upd {
                    img[i as usize] = s;
                }
                if img[CENTER as usize] != 1 && img[CENTER as usize] != 2 {
                    return;
                }
                let key = pack(&img, bits);
                let code = pack(w, bits);
                match seen.get(&key) {
                    Some(&prev) if prev != code => {
                        found = Some(Collision {
                            first: unpack(prev, W, bits),
                            second: w.to_vec(),
                            image: img,
                        })
                    }
                    Some(_) => {}
                    None => {
                        seen.insert(key, code);
                    }
                }
            });
        }
    }
    found
}

/// One character per symbol, for `n ≤ 9`: `-` blank, `>` `<` arrows, `[` `]`
/// for unmarked brackets at counter `n`, `a`.. and `A`.. for unmarked open and
/// close brackets with lower counters, `0`.. and `j`.. for marked ones.
pub fn symbol_char(s: ABSymbol, n: u32) -> char {
    use ABSymbol::*;
    let off = |base: u8, k: u32| (base + k as u8) as char;
    match s {
        Blank => '-',
        ArrowRight => '>',
        ArrowLeft => '<',
        Open(k) if k == n => '[',
        Close(k) if k == n => ']',
        Open(k) => off(b'a', k),
        Close(k) => off(b'A', k),
        OpenMarked(k) => off(b'0', k),
        CloseMarked(k) => off(b'j', k),
    }
}

pub fn parse_char(ch: char, n: u32) -> Result<ABSymbol, AbError> {
    use ABSymbol::*;
    let in_range = |k: u32, top: u32| if k < top { Ok(k) } else { Err(AbError::BadText(ch)) };
    Ok(match ch {
        '-' => Blank,
        '>' => ArrowRight,
        '<' => ArrowLeft,
        '[' => Open(n),
        ']' => Close(n),
        'a'..='i' => Open(in_range(ch as u32 - 'a' as u32, n)?),
        'A'..='I' => Close(in_range(ch as u32 - 'A' as u32, n)?),
        '0'..='8' => OpenMarked(in_range(ch as u32 - '0' as u32, n)?),
        'j'..='r' => CloseMarked(in_range(ch as u32 - 'j' as u32, n)?),
        _ => return Err(AbError::BadText(ch)),
    })
}

pub fn render_text(word: &[Sym], n: u32) -> String {
    word.iter()
        .map(|&s| symbol_char(ABSymbol::from_index(s, n).expect("symbol in alphabet"), n))
        .collect()
}

pub fn parse_text(text: &str, n: u32) -> Result<Vec<Sym>, AbError> {
    text.chars().map(|c| parse_char(c, n).map(|s| s.index(n))).collect()
}

impl fmt::Display for ABSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Length of `block(k, n)`.
pub fn block_len(k: u32) -> usize {
    12 * (1usize << k) - 7
}
