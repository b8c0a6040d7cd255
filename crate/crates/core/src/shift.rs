//! Alphabets, bi-infinite configurations and sliding block codes.
//!
//! Configurations come in two finite representations: a periodic word, or a
//! finite word padded on both sides by a single quiescent symbol. Every
//! coordinate `x_i` is defined for all `i`.

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A symbol, stored as its index in an [`Alphabet`].
pub type Sym = u16;

/// Dense lookup tables are built when the window space is at most this large.
const DENSE_LIMIT: usize = 1 << 22;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShiftError {
    #[error("pad symbol {pad} is not quiescent under the rule")]
    QuiescenceViolation { pad: Sym },
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),
    #[error("conflicting table entries for window {window:?}")]
    ConflictingEntry { window: Vec<Sym> },
    #[error("window {window:?} has length {len}, expected {expected}")]
    BadWindow {
        window: Vec<Sym>,
        len: usize,
        expected: usize,
    },
    #[error("total rule has no entry for window {window:?}")]
    IncompleteTable { window: Vec<Sym> },
    #[error("window space of {0} entries is too large to enumerate")]
    TooLarge(u128),
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("malformed rule file: {0}")]
    Format(String),
}

/// An ordered finite set of named symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
    index: HashMap<String, Sym>,
}

impl Alphabet {
    pub fn new<I, S>(symbols: I) -> Result<Self, ShiftError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(ShiftError::InvalidAlphabet("no symbols".into()));
        }
        if symbols.len() > Sym::MAX as usize {
            return Err(ShiftError::InvalidAlphabet("too many symbols".into()));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if index.insert(s.clone(), i as Sym).is_some() {
                return Err(ShiftError::InvalidAlphabet(format!("duplicate symbol `{s}`")));
            }
        }
        Ok(Self { symbols, index })
    }

    /// The alphabet `{"0", "1", ..., "k-1"}`.
    pub fn numeric(k: usize) -> Self {
        Self::new((0..k).map(|i| i.to_string())).expect("numeric alphabet is valid")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn name(&self, s: Sym) -> &str {
        &self.symbols[s as usize]
    }

    pub fn index_of(&self, name: &str) -> Option<Sym> {
        self.index.get(name).copied()
    }

    pub fn parse_word<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<Sym>, ShiftError> {
        names
            .iter()
            .map(|n| {
                self.index_of(n.as_ref())
                    .ok_or_else(|| ShiftError::UnknownSymbol(n.as_ref().to_string()))
            })
            .collect()
    }
}

/// A point of `Σ^Z` in one of two finite representations.
///
/// Equality and hashing are semantic: two values are equal iff they define
/// the same bi-infinite sequence.
#[derive(Debug, Clone)]
pub enum Configuration {
    /// `x_i = word[i mod p]`.
    Periodic { word: Vec<Sym> },
    /// `x_i = word[i - anchor]` inside the word, `pad` elsewhere.
    Padded { word: Vec<Sym>, pad: Sym, anchor: i64 },
}

impl Configuration {
    pub fn periodic(word: Vec<Sym>) -> Result<Self, ShiftError> {
        if word.is_empty() {
            return Err(ShiftError::InvalidConfiguration("empty period".into()));
        }
        Ok(Configuration::Periodic { word })
    }

    pub fn padded(word: Vec<Sym>, pad: Sym, anchor: i64) -> Self {
        Configuration::Padded { word, pad, anchor }
    }

    pub fn get(&self, i: i64) -> Sym {
        match self {
            Configuration::Periodic { word } => word[i.rem_euclid(word.len() as i64) as usize],
            Configuration::Padded { word, pad, anchor } => {
                let k = i - anchor;
                if k >= 0 && (k as usize) < word.len() {
                    word[k as usize]
                } else {
                    *pad
                }
            }
        }
    }

    /// Overwrites coordinate `i`. A padded word grows to include it.
    pub fn set(&mut self, i: i64, v: Sym) {
        match self {
            Configuration::Periodic { word } => {
                let p = word.len() as i64;
                word[i.rem_euclid(p) as usize] = v;
            }
            Configuration::Padded { word, pad, anchor } => {
                if word.is_empty() {
                    if v == *pad {
                        return;
                    }
                    *anchor = i;
                    word.push(v);
                    return;
                }
                let mut k = i - *anchor;
                if k < 0 {
                    if v == *pad {
                        return;
                    }
                    let grow = (-k) as usize;
                    word.splice(0..0, std::iter::repeat_n(*pad, grow));
                    *anchor = i;
                    k = 0;
                } else if k as usize >= word.len() {
                    if v == *pad {
                        return;
                    }
                    word.resize(k as usize + 1, *pad);
                }
                word[k as usize] = v;
            }
        }
    }

    /// `Some(p)` for periodic configurations.
    pub fn period(&self) -> Option<usize> {
        match self {
            Configuration::Periodic { word } => Some(word.len()),
            Configuration::Padded { .. } => None,
        }
    }

    pub fn pad(&self) -> Option<Sym> {
        match self {
            Configuration::Padded { pad, .. } => Some(*pad),
            Configuration::Periodic { .. } => None,
        }
    }

    /// Coordinates of the explicit word, `[lo, hi]`; `None` if nothing is stored.
    pub fn explicit_window(&self) -> Option<(i64, i64)> {
        match self {
            Configuration::Periodic { word } => Some((0, word.len() as i64 - 1)),
            Configuration::Padded { word, anchor, .. } => {
                if word.is_empty() {
                    None
                } else {
                    Some((*anchor, *anchor + word.len() as i64 - 1))
                }
            }
        }
    }

    /// Smallest window outside of which a padded configuration is all pad.
    pub fn support(&self) -> Option<(i64, i64)> {
        match self.normalized() {
            Configuration::Padded { word, anchor, .. } if !word.is_empty() => {
                Some((anchor, anchor + word.len() as i64 - 1))
            }
            _ => None,
        }
    }

    /// Values on `[lo, hi]`.
    pub fn slice(&self, lo: i64, hi: i64) -> Vec<Sym> {
        (lo..=hi).map(|i| self.get(i)).collect()
    }

    /// `σ^k`, i.e. the result `y` has `y_i = x_{i+k}`.
    pub fn shifted(&self, k: i64) -> Configuration {
        match self {
            Configuration::Periodic { word } => {
                let p = word.len() as i64;
                let r = k.rem_euclid(p) as usize;
                let mut w = word[r..].to_vec();
                w.extend_from_slice(&word[..r]);
                Configuration::Periodic { word: w }
            }
            Configuration::Padded { word, pad, anchor } => Configuration::Padded {
                word: word.clone(),
                pad: *pad,
                anchor: anchor - k,
            },
        }
    }

    /// Canonical form: minimal period, or a word trimmed of pad at both ends.
    pub fn normalized(&self) -> Configuration {
        match self {
            Configuration::Periodic { word } => {
                let p = minimal_period(word);
                Configuration::Periodic {
                    word: word[..p].to_vec(),
                }
            }
            Configuration::Padded { word, pad, anchor } => {
                let start = word.iter().position(|s| s != pad);
                match start {
                    None => Configuration::Padded {
                        word: Vec::new(),
                        pad: *pad,
                        anchor: 0,
                    },
                    Some(s) => {
                        let e = word.iter().rposition(|x| x != pad).unwrap();
                        Configuration::Padded {
                            word: word[s..=e].to_vec(),
                            pad: *pad,
                            anchor: anchor + s as i64,
                        }
                    }
                }
            }
        }
    }

    /// All symbols that appear explicitly (including the pad).
    pub fn symbols(&self) -> impl Iterator<Item = Sym> + '_ {
        let (word, pad) = match self {
            Configuration::Periodic { word } => (word, None),
            Configuration::Padded { word, pad, .. } => (word, Some(*pad)),
        };
        word.iter().copied().chain(pad)
    }
}

fn minimal_period(word: &[Sym]) -> usize {
    let n = word.len();
    (1..=n)
        .find(|&p| n.is_multiple_of(p) && (p..n).all(|i| word[i] == word[i - p]))
        .unwrap_or(n)
}

impl PartialEq for Configuration {
    fn eq(&self, other: &Self) -> bool {
        match (self.normalized(), other.normalized()) {
            (Configuration::Periodic { word: a }, Configuration::Periodic { word: b }) => a == b,
            (
                Configuration::Padded {
                    word: a,
                    pad: pa,
                    anchor: xa,
                },
                Configuration::Padded {
                    word: b,
                    pad: pb,
                    anchor: xb,
                },
            ) => pa == pb && a == b && (a.is_empty() || xa == xb),
            // A padded point equals a periodic one only if both are constant.
            (Configuration::Periodic { word }, Configuration::Padded { word: w, pad, .. })
            | (Configuration::Padded { word: w, pad, .. }, Configuration::Periodic { word }) => {
                w.is_empty() && word.len() == 1 && word[0] == pad
            }
        }
    }
}

impl Eq for Configuration {}

impl Hash for Configuration {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self.normalized() {
            Configuration::Periodic { word } => {
                if word.len() == 1 {
                    // Same hash as the all-pad padded point.
                    word[0].hash(state);
                    0u8.hash(state);
                } else {
                    1u8.hash(state);
                    word.hash(state);
                }
            }
            Configuration::Padded { word, pad, anchor } => {
                if word.is_empty() {
                    pad.hash(state);
                    0u8.hash(state);
                } else {
                    2u8.hash(state);
                    pad.hash(state);
                    anchor.hash(state);
                    word.hash(state);
                }
            }
        }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Configuration::Periodic { word } => write!(f, "({:?})^Z", word),
            Configuration::Padded { word, pad, anchor } => {
                write!(f, "{pad}^∞ @{anchor} {:?} {pad}^∞", word)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefaultAction {
    /// Windows without an entry keep their center symbol.
    Identity,
    /// Every window must have an entry.
    Total,
}

/// Anything that can advance a configuration by one time step.
pub trait Automaton: Sync {
    fn alphabet_size(&self) -> usize;

    fn range(&self) -> usize;

    fn step(&self, c: &Configuration) -> Result<Configuration, ShiftError>;

    /// Cells that change in one step, as `(coordinate, new symbol)`.
    /// Periodic coordinates are reported in `[0, p)`.
    fn changes(&self, c: &Configuration) -> Result<Vec<(i64, Sym)>, ShiftError> {
        let next = self.step(c)?;
        Ok(diff(c, &next))
    }

    /// A specialised in-place stepper for `c`, if the automaton has one.
    fn fast_stepper<'a>(&'a self, _c: &Configuration) -> Option<Box<dyn Stepper + 'a>> {
        None
    }
}

/// An orbit advanced in place.
pub trait Stepper {
    fn get(&self, i: i64) -> Sym;

    /// Advances one step and returns the coordinates whose symbol changed.
    fn advance(&mut self) -> Result<Vec<i64>, ShiftError>;
}

struct ConfigStepper<'a> {
    rule: &'a dyn Automaton,
    c: Configuration,
}

impl Stepper for ConfigStepper<'_> {
    fn get(&self, i: i64) -> Sym {
        self.c.get(i)
    }

    fn advance(&mut self) -> Result<Vec<i64>, ShiftError> {
        let changes = self.rule.changes(&self.c)?;
        let mut out = Vec::with_capacity(changes.len());
        for (i, s) in changes {
            self.c.set(i, s);
            out.push(i);
        }
        Ok(out)
    }
}

/// The fastest available stepper for `rule` started at `c`.
pub fn stepper<'a>(rule: &'a dyn Automaton, c: &Configuration) -> Box<dyn Stepper + 'a> {
    rule.fast_stepper(c).unwrap_or_else(|| {
        Box::new(ConfigStepper {
            rule,
            c: c.clone(),
        })
    })
}

/// Coordinates at which `b` differs from `a`, with `b`'s symbols.
pub fn diff(a: &Configuration, b: &Configuration) -> Vec<(i64, Sym)> {
    match (a, b) {
        (Configuration::Periodic { word: wa }, Configuration::Periodic { word: wb })
            if wa.len() == wb.len() =>
        {
            wa.iter()
                .zip(wb)
                .enumerate()
                .filter(|(_, (x, y))| x != y)
                .map(|(i, (_, y))| (i as i64, *y))
                .collect()
        }
        _ => {
            let (lo, hi) = match (a.explicit_window(), b.explicit_window()) {
                (Some((l1, h1)), Some((l2, h2))) => (l1.min(l2), h1.max(h2)),
                (Some(w), None) | (None, Some(w)) => w,
                (None, None) => return Vec::new(),
            };
            (lo..=hi)
                .filter_map(|i| {
                    let y = b.get(i);
                    (a.get(i) != y).then_some((i, y))
                })
                .collect()
        }
    }
}

/// A sliding block code of range `r` given by a (possibly partial) table.
#[derive(Debug, Clone)]
pub struct LocalRule {
    alphabet: Alphabet,
    range: usize,
    table: HashMap<Vec<Sym>, Sym>,
    default: DefaultAction,
    dense: Option<Vec<Sym>>,
}

impl LocalRule {
    pub fn new<I>(
        alphabet: Alphabet,
        range: usize,
        entries: I,
        default: DefaultAction,
    ) -> Result<Self, ShiftError>
    where
        I: IntoIterator<Item = (Vec<Sym>, Sym)>,
    {
        let width = 2 * range + 1;
        let k = alphabet.len();
        let mut table = HashMap::new();
        for (window, out) in entries {
            if window.len() != width {
                return Err(ShiftError::BadWindow {
                    len: window.len(),
                    window,
                    expected: width,
                });
            }
            if window.iter().chain(std::iter::once(&out)).any(|&s| s as usize >= k) {
                return Err(ShiftError::AlphabetMismatch(format!(
                    "entry {window:?} -> {out} uses symbols outside an alphabet of size {k}"
                )));
            }
            match table.get(&window) {
                Some(&prev) if prev != out => return Err(ShiftError::ConflictingEntry { window }),
                _ => {
                    table.insert(window, out);
                }
            }
        }
        let space = (k as u128).checked_pow(width as u32).unwrap_or(u128::MAX);
        if default == DefaultAction::Total
            && space > table.len() as u128 {
                let missing = all_windows(k, width)
                    .find(|w| !table.contains_key(w))
                    .unwrap_or_default();
                return Err(ShiftError::IncompleteTable { window: missing });
            }
        let mut rule = Self {
            alphabet,
            range,
            table,
            default,
            dense: None,
        };
        if space <= DENSE_LIMIT as u128 {
            let mid = k.pow(range as u32);
            let mut dense: Vec<Sym> = (0..space as usize).map(|idx| ((idx / mid) % k) as Sym).collect();
            for (w, &out) in &rule.table {
                dense[w.iter().fold(0usize, |acc, &s| acc * k + s as usize)] = out;
            }
            rule.dense = Some(dense);
        }
        Ok(rule)
    }

    /// Builds a total rule by evaluating `f` on every window.
    pub fn from_fn<F>(alphabet: Alphabet, range: usize, f: F) -> Result<Self, ShiftError>
    where
        F: Fn(&[Sym]) -> Sym,
    {
        let width = 2 * range + 1;
        let space = (alphabet.len() as u128)
            .checked_pow(width as u32)
            .unwrap_or(u128::MAX);
        if space > DENSE_LIMIT as u128 {
            return Err(ShiftError::TooLarge(space));
        }
        let entries: Vec<_> = all_windows(alphabet.len(), width)
            .map(|w| {
                let out = f(&w);
                (w, out)
            })
            .collect();
        Self::new(alphabet, range, entries, DefaultAction::Total)
    }

    pub fn identity(alphabet: Alphabet) -> Self {
        Self::new(alphabet, 0, std::iter::empty(), DefaultAction::Identity)
            .expect("identity rule is valid")
    }

    /// `σ^k`: the output at `i` is the input at `i + k`.
    pub fn shift(alphabet: Alphabet, k: i64) -> Self {
        let r = k.unsigned_abs() as usize;
        let center = r as i64;
        Self::from_fn(alphabet, r, move |w| w[(center + k) as usize]).expect("shift rule is small")
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn default_action(&self) -> DefaultAction {
        self.default
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<Sym>, &Sym)> {
        self.table.iter()
    }

    fn lookup_table(&self, window: &[Sym]) -> Sym {
        match self.table.get(window) {
            Some(&s) => s,
            None => window[self.range],
        }
    }

    /// Output symbol for a `(2r+1)`-window.
    pub fn lookup(&self, window: &[Sym]) -> Sym {
        match &self.dense {
            Some(dense) => {
                let k = self.alphabet.len();
                let idx = window.iter().fold(0usize, |acc, &s| acc * k + s as usize);
                dense[idx]
            }
            None => self.lookup_table(window),
        }
    }

    fn check_symbols(&self, c: &Configuration) -> Result<(), ShiftError> {
        let k = self.alphabet.len();
        match c.symbols().find(|&s| s as usize >= k) {
            Some(s) => Err(ShiftError::AlphabetMismatch(format!(
                "configuration uses symbol {s}, alphabet has {k}"
            ))),
            None => Ok(()),
        }
    }
}

impl Automaton for LocalRule {
    fn alphabet_size(&self) -> usize {
        self.alphabet.len()
    }

    fn range(&self) -> usize {
        self.range
    }

    fn step(&self, c: &Configuration) -> Result<Configuration, ShiftError> {
        apply_rule(self, c)
    }
}

/// Enumerates all words of length `width` over `0..k` in lexicographic order.
pub fn all_windows(k: usize, width: usize) -> impl Iterator<Item = Vec<Sym>> {
    let total = (k as u128).checked_pow(width as u32).unwrap_or(u128::MAX);
    (0..total).map(move |mut n| {
        let mut w = vec![0 as Sym; width];
        for slot in w.iter_mut().rev() {
            *slot = (n % k as u128) as Sym;
            n /= k as u128;
        }
        w
    })
}

/// One application of a block code.
pub fn apply_rule(rule: &LocalRule, c: &Configuration) -> Result<Configuration, ShiftError> {
    rule.check_symbols(c)?;
    let r = rule.range as i64;
    let width = 2 * rule.range + 1;
    match c {
        Configuration::Periodic { word } => {
            let p = word.len() as i64;
            let mut buf = vec![0 as Sym; width];
            let out = (0..p)
                .map(|i| {
                    for (j, slot) in buf.iter_mut().enumerate() {
                        *slot = word[(i + j as i64 - r).rem_euclid(p) as usize];
                    }
                    rule.lookup(&buf)
                })
                .collect();
            Ok(Configuration::Periodic { word: out })
        }
        Configuration::Padded { word, pad, anchor } => {
            let quiet = vec![*pad; width];
            if rule.lookup(&quiet) != *pad {
                return Err(ShiftError::QuiescenceViolation { pad: *pad });
            }
            if word.is_empty() {
                return Ok(c.clone());
            }
            let lo = anchor - r;
            let hi = anchor + word.len() as i64 - 1 + r;
            let mut buf = vec![0 as Sym; width];
            let out: Vec<Sym> = (lo..=hi)
                .map(|i| {
                    for (j, slot) in buf.iter_mut().enumerate() {
                        *slot = c.get(i + j as i64 - r);
                    }
                    rule.lookup(&buf)
                })
                .collect();
            Ok(Configuration::Padded {
                word: out,
                pad: *pad,
                anchor: lo,
            }
            .normalized())
        }
    }
}

/// The rule `c ↦ first(second(c))`, of range `first.range + second.range`.
pub fn compose_rules(first: &LocalRule, second: &LocalRule) -> Result<LocalRule, ShiftError> {
    if first.alphabet != second.alphabet {
        return Err(ShiftError::AlphabetMismatch(
            "composed rules use different alphabets".into(),
        ));
    }
    let r1 = first.range;
    let r2 = second.range;
    let range = r1 + r2;
    let width = 2 * range + 1;
    let k = first.alphabet.len();
    let space = (k as u128).checked_pow(width as u32).unwrap_or(u128::MAX);
    if space > DENSE_LIMIT as u128 {
        return Err(ShiftError::TooLarge(space));
    }
    let inner_width = 2 * r1 + 1;
    let mut mid = vec![0 as Sym; inner_width];
    let mut entries = Vec::new();
    for w in all_windows(k, width) {
        for (j, slot) in mid.iter_mut().enumerate() {
            *slot = second.lookup(&w[j..j + 2 * r2 + 1]);
        }
        let out = first.lookup(&mid);
        if out != w[range] {
            entries.push((w, out));
        }
    }
    LocalRule::new(first.alphabet.clone(), range, entries, DefaultAction::Identity)
}

/// `[c, ρc, …, ρ^{t_max} c]`.
pub fn orbit<A: Automaton + ?Sized>(
    rule: &A,
    c: &Configuration,
    t_max: usize,
) -> Result<Vec<Configuration>, ShiftError> {
    let mut out = Vec::with_capacity(t_max + 1);
    out.push(c.clone());
    for _ in 0..t_max {
        let next = rule.step(out.last().unwrap())?;
        out.push(next);
    }
    Ok(out)
}

/// True iff the configurations coincide on every coordinate of `[lo, hi]`.
pub fn agree_on(c1: &Configuration, c2: &Configuration, lo: i64, hi: i64) -> bool {
    (lo..=hi).all(|i| c1.get(i) == c2.get(i))
}

#[derive(Debug, Serialize, Deserialize)]
struct RuleEntryFile {
    window: Vec<String>,
    out: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RuleFile {
    symbols: Vec<String>,
    range: usize,
    entries: Vec<RuleEntryFile>,
    default: DefaultAction,
}

impl LocalRule {
    /// Serializes as `{"symbols", "range", "entries", "default"}` with entries
    /// sorted by window.
    pub fn to_json(&self) -> String {
        let mut entries: Vec<_> = self.table.iter().collect();
        entries.sort();
        let file = RuleFile {
            symbols: self.alphabet.symbols.clone(),
            range: self.range,
            entries: entries
                .into_iter()
                .map(|(w, o)| RuleEntryFile {
                    window: w.iter().map(|&s| self.alphabet.name(s).to_string()).collect(),
                    out: self.alphabet.name(*o).to_string(),
                })
                .collect(),
            default: self.default,
        };
        serde_json::to_string_pretty(&file).expect("rule serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ShiftError> {
        let file: RuleFile =
            serde_json::from_str(text).map_err(|e| ShiftError::Format(e.to_string()))?;
        let alphabet = Alphabet::new(file.symbols)?;
        let entries = file
            .entries
            .iter()
            .map(|e| {
                let w = alphabet.parse_word(&e.window)?;
                let o = alphabet
                    .index_of(&e.out)
                    .ok_or_else(|| ShiftError::UnknownSymbol(e.out.clone()))?;
                Ok((w, o))
            })
            .collect::<Result<Vec<_>, ShiftError>>()?;
        Self::new(alphabet, file.range, entries, file.default)
    }
}
