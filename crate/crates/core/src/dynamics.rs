//! Finite-scale analysis of spacetime diagrams: determined regions,
//! scaled prediction polygons, Lyapunov fronts, blocking words and
//! directional probes.
//!
//! Every quantifier over the whole subshift is replaced by a finite family
//! of configurations. Determined regions are therefore upper bounds on the
//! true ones, and Lyapunov fronts are lower bounds.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{Direction, Polygon};
use crate::shift::{stepper, Automaton, Configuration, ShiftError, Sym};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("the configuration family is empty")]
    EmptyFamily,
    #[error("negative times need an inverse rule")]
    InverseRequired,
    #[error("family members must be blank-padded with a common pad symbol")]
    NeedsCommonPad,
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error(transparent)]
    Shift(#[from] ShiftError),
}

/// A finite set of configurations standing in for the subshift.
#[derive(Debug, Clone)]
pub struct Family {
    pub id: String,
    pub members: Vec<Configuration>,
}

impl Family {
    pub fn new(id: impl Into<String>, members: Vec<Configuration>) -> Self {
        Self {
            id: id.into(),
            members,
        }
    }

    /// Every periodic word of length `1..=p_max` over `k` symbols.
    pub fn periodic_points(k: usize, p_max: usize) -> Self {
        let mut members = Vec::new();
        for p in 1..=p_max {
            for w in crate::shift::all_windows(k, p) {
                members.push(Configuration::Periodic { word: w });
            }
        }
        Self::new(format!("periodic(k={k},p<={p_max})"), members)
    }

    /// Every word over `k` symbols on `[-n, n]` padded with symbol 0, and each
    /// of those with one coordinate `j`, `n < |j| ≤ reach`, set to a nonzero
    /// symbol.
    pub fn words_with_flips(k: usize, n: i64, reach: i64) -> Self {
        let width = (2 * n + 1) as usize;
        let mut members = Vec::new();
        for w in crate::shift::all_windows(k, width) {
            let base = Configuration::padded(w, 0, -n);
            members.extend(flips(&base, k, n, reach));
            members.push(base);
        }
        Self::new(format!("words+flips(k={k},n={n},reach={reach})"), members)
    }

    /// `bases` random words on `[-reach, reach]` (seeded), each with all
    /// single-site changes at coordinates `n < |j| ≤ reach`.
    pub fn random_with_flips(k: usize, n: i64, reach: i64, bases: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut members = Vec::new();
        for _ in 0..bases {
            let w: Vec<Sym> = (-reach..=reach).map(|_| rng.gen_range(0..k) as Sym).collect();
            let base = Configuration::padded(w, 0, -reach);
            members.extend(flips(&base, k, n, reach));
            members.push(base);
        }
        Self::new(
            format!("random+flips(k={k},n={n},reach={reach},bases={bases},seed={seed})"),
            members,
        )
    }

    /// Adds `σ^j` of every member for each `j` in `shifts`.
    pub fn with_shifts(mut self, shifts: &[i64]) -> Self {
        let extra: Vec<_> = self
            .members
            .iter()
            .flat_map(|m| shifts.iter().map(move |&j| m.shifted(j)))
            .collect();
        self.members.extend(extra);
        self.id = format!("{}+shifts{:?}", self.id, shifts);
        self
    }
}

fn flips(base: &Configuration, k: usize, n: i64, reach: i64) -> Vec<Configuration> {
    let mut out = Vec::new();
    for j in (-reach..-n).chain(n + 1..=reach) {
        for s in 0..k as Sym {
            if s != base.get(j) {
                let mut c = base.clone();
                c.set(j, s);
                out.push(c);
            }
        }
    }
    out
}

/// Values `(φ^t c)_i` for `t ∈ [t_lo, t_hi]`, `i ∈ [i_lo, i_hi]`, row-major by `t`.
pub fn spacetime(
    rule: &dyn Automaton,
    inverse: Option<&dyn Automaton>,
    c: &Configuration,
    t_range: (i64, i64),
    i_range: (i64, i64),
) -> Result<Vec<Vec<Sym>>, AnalysisError> {
    let (t_lo, t_hi) = t_range;
    let (i_lo, i_hi) = i_range;
    if t_lo > t_hi || i_lo > i_hi {
        return Err(AnalysisError::InvalidRange(format!("{t_range:?} x {i_range:?}")));
    }
    let mut rows = Vec::with_capacity((t_hi - t_lo + 1) as usize);
    if t_lo < 0 {
        let inv = inverse.ok_or(AnalysisError::InverseRequired)?;
        let mut back = Vec::new();
        let mut s = stepper(inv, c);
        for _ in t_lo..0 {
            s.advance()?;
            back.push((i_lo..=i_hi).map(|i| s.get(i)).collect::<Vec<_>>());
        }
        // back[k] is time -(k+1).
        for t in t_lo..=t_hi.min(-1) {
            rows.push(back[(-t - 1) as usize].clone());
        }
    }
    if t_hi >= 0 {
        let mut s = stepper(rule, c);
        for t in 0..=t_hi {
            if t > 0 {
                s.advance()?;
            }
            if t >= t_lo {
                rows.push((i_lo..=i_hi).map(|i| s.get(i)).collect());
            }
        }
    }
    Ok(rows)
}

/// Cells `(i, t)` on which agreement on `[-n, n]` at time 0 forces agreement,
/// relative to a finite family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterminedRegion {
    pub n: i64,
    pub t_range: (i64, i64),
    pub i_range: (i64, i64),
    pub cells: BTreeSet<(i64, i64)>,
    pub family_id: String,
}

impl DeterminedRegion {
    pub fn contains(&self, i: i64, t: i64) -> bool {
        self.cells.contains(&(i, t))
    }

    pub fn points(&self) -> Vec<(i64, i64)> {
        self.cells.iter().copied().collect()
    }

    /// Sorted `(i,t)` pairs, one per line.
    pub fn export(&self) -> String {
        self.cells.iter().map(|(i, t)| format!("({i},{t})\n")).collect()
    }
}

/// Members grouped by their content on `[lo, hi]` at time 0, groups in order
/// of first appearance.
fn group_by_window(members: &[Configuration], lo: i64, hi: i64) -> Vec<Vec<usize>> {
    let mut index: HashMap<Vec<Sym>, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (m, c) in members.iter().enumerate() {
        let key = c.slice(lo, hi);
        match index.get(&key) {
            Some(&g) => groups[g].push(m),
            None => {
                index.insert(key, groups.len());
                groups.push(vec![m]);
            }
        }
    }
    groups
}

pub fn determined_region(
    rule: &dyn Automaton,
    inverse: Option<&dyn Automaton>,
    family: &Family,
    n: i64,
    t_range: (i64, i64),
    i_range: (i64, i64),
) -> Result<DeterminedRegion, AnalysisError> {
    if family.members.is_empty() {
        return Err(AnalysisError::EmptyFamily);
    }
    if t_range.0 < 0 && inverse.is_none() {
        return Err(AnalysisError::InverseRequired);
    }
    let patches: Vec<Vec<Vec<Sym>>> = family
        .members
        .par_iter()
        .map(|c| spacetime(rule, inverse, c, t_range, i_range))
        .collect::<Result<_, _>>()?;
    let rows = patches[0].len();
    let cols = patches[0][0].len();
    let groups = group_by_window(&family.members, -n, n);
    let undetermined = groups
        .par_iter()
        .map(|g| {
            let mut bad = vec![false; rows * cols];
            let first = &patches[g[0]];
            for &m in &g[1..] {
                for (r, row) in patches[m].iter().enumerate() {
                    for (col, v) in row.iter().enumerate() {
                        if *v != first[r][col] {
                            bad[r * cols + col] = true;
                        }
                    }
                }
            }
            bad
        })
        .reduce(
            || vec![false; rows * cols],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x |= y);
                a
            },
        );
    let mut cells = BTreeSet::new();
    for r in 0..rows {
        for col in 0..cols {
            if !undetermined[r * cols + col] {
                cells.insert((i_range.0 + col as i64, t_range.0 + r as i64));
            }
        }
    }
    Ok(DeterminedRegion {
        n,
        t_range,
        i_range,
        cells,
        family_id: family.id.clone(),
    })
}

/// A spacetime diagram given cell by cell, for systems whose symbols do not
/// fit a [`Sym`].
pub trait Trajectory: Sync {
    fn value(&self, i: i64, t: i64) -> u64;
}

/// For each cell, whether all members agreeing on `[-n, n]` at time 0 also
/// agree there.
pub fn determined_cells<T: Trajectory>(members: &[T], n: i64, cells: &[(i64, i64)]) -> Vec<bool> {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (m, y) in members.iter().enumerate() {
        let key: Vec<u64> = (-n..=n).map(|i| y.value(i, 0)).collect();
        match index.get(&key) {
            Some(&g) => groups[g].push(m),
            None => {
                index.insert(key, groups.len());
                groups.push(vec![m]);
            }
        }
    }
    let groups: Vec<Vec<usize>> = groups.into_iter().filter(|g| g.len() > 1).collect();
    cells
        .par_iter()
        .map(|&(i, t)| {
            groups.iter().all(|g| {
                let v = members[g[0]].value(i, t);
                g[1..].iter().all(|&m| members[m].value(i, t) == v)
            })
        })
        .collect()
}

/// The hull of one region scaled by `1/n`.
#[derive(Debug, Clone)]
pub struct ScaledShape {
    pub n: i64,
    pub polygon: Polygon,
    /// Hausdorff distance to the previous shape in the sequence.
    pub hausdorff_to_prev: Option<f64>,
}

pub fn prediction_polygon(regions: &[DeterminedRegion]) -> Vec<ScaledShape> {
    let mut out: Vec<ScaledShape> = Vec::with_capacity(regions.len());
    for r in regions {
        let polygon = Polygon::scaled_hull(&r.points(), r.n.max(1));
        let hausdorff_to_prev = out.last().map(|p| p.polygon.hausdorff(&polygon));
        out.push(ScaledShape {
            n: r.n,
            polygon,
            hausdorff_to_prev,
        });
    }
    out
}

/// Front growth `Λ_t^±` for `t = 0..=t_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LyapunovEstimate {
    pub lambda_plus: Vec<u64>,
    pub lambda_minus: Vec<u64>,
    /// Cap on the window radius; values that reach it are lower bounds only.
    pub horizon: u64,
    pub truncated: bool,
}

impl LyapunovEstimate {
    pub fn ratio_plus(&self, t: usize) -> f64 {
        if t == 0 {
            0.0
        } else {
            self.lambda_plus[t] as f64 / t as f64
        }
    }

    pub fn ratio_minus(&self, t: usize) -> f64 {
        if t == 0 {
            0.0
        } else {
            self.lambda_minus[t] as f64 / t as f64
        }
    }

    /// `t,Lambda_plus,Lambda_minus,ratio_plus,ratio_minus`, one row per step.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,Lambda_plus,Lambda_minus,ratio_plus,ratio_minus\n");
        for t in 0..self.lambda_plus.len() {
            s.push_str(&format!(
                "{t},{},{},{:.6},{:.6}\n",
                self.lambda_plus[t],
                self.lambda_minus[t],
                self.ratio_plus(t),
                self.ratio_minus(t)
            ));
        }
        s
    }
}

/// Per pair, the times at which the rightmost (leftmost) coordinate that has
/// ever differed moves past its initial position, with the overshoot.
fn pair_fronts(
    rule: &dyn Automaton,
    y: &Configuration,
    z: &Configuration,
    t_max: u64,
) -> Result<(Vec<(u64, u64)>, Vec<(u64, u64)>), ShiftError> {
    let (lo, hi) = match (y.explicit_window(), z.explicit_window()) {
        (Some((a, b)), Some((c, d))) => (a.min(c), b.max(d)),
        (Some(w), None) | (None, Some(w)) => w,
        (None, None) => return Ok((Vec::new(), Vec::new())),
    };
    let mut diff: BTreeSet<i64> = (lo..=hi).filter(|&i| y.get(i) != z.get(i)).collect();
    let (Some(&u_min), Some(&u_max)) = (diff.first(), diff.last()) else {
        return Ok((Vec::new(), Vec::new()));
    };
    let mut sy = stepper(rule, y);
    let mut sz = stepper(rule, z);
    let (mut right, mut left) = (u_max, u_min);
    let (mut plus, mut minus) = (Vec::new(), Vec::new());
    for t in 1..=t_max {
        let cy = sy.advance()?;
        let cz = sz.advance()?;
        for i in cy.into_iter().chain(cz) {
            if sy.get(i) != sz.get(i) {
                diff.insert(i);
            } else {
                diff.remove(&i);
            }
        }
        if let Some(&r) = diff.last() {
            if r > right {
                right = r;
                plus.push((t, (right - u_max) as u64));
            }
        }
        if let Some(&l) = diff.first() {
            if l < left {
                left = l;
                minus.push((t, (u_min - left) as u64));
            }
        }
    }
    Ok((plus, minus))
}

fn running_max(mut events: Vec<(u64, u64)>, t_max: u64) -> Vec<u64> {
    events.sort_unstable();
    let mut out = vec![0u64; t_max as usize + 1];
    let mut cur = 0;
    let mut k = 0;
    for (t, slot) in out.iter_mut().enumerate() {
        while k < events.len() && events[k].0 <= t as u64 {
            cur = cur.max(events[k].1);
            k += 1;
        }
        *slot = cur;
    }
    out
}

/// `Λ_t^±` maximised over all family pairs and all window offsets.
///
/// For a pair `(y, z)` differing at most at `u_max` on the right, a window at
/// offset `i` must reach back `i − u_max` once a difference has appeared at
/// or beyond `i` by time `t`; the worst offset is the rightmost coordinate
/// that has differed by then. The left front is symmetric and also ranges
/// over all `s ≤ t`.
pub fn lyapunov_profile(
    rule: &dyn Automaton,
    family: &Family,
    t_max: u64,
    horizon: u64,
) -> Result<LyapunovEstimate, AnalysisError> {
    if family.members.is_empty() {
        return Err(AnalysisError::EmptyFamily);
    }
    let pads: BTreeSet<Option<Sym>> = family.members.iter().map(|c| c.pad()).collect();
    if pads.len() != 1 || pads.contains(&None) {
        return Err(AnalysisError::NeedsCommonPad);
    }
    let m = family.members.len();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|a| (a + 1..m).map(move |b| (a, b))).collect();
    let fronts: Vec<_> = pairs
        .par_iter()
        .map(|&(a, b)| pair_fronts(rule, &family.members[a], &family.members[b], t_max))
        .collect::<Result<_, _>>()?;
    let (mut plus, mut minus) = (Vec::new(), Vec::new());
    for (p, q) in fronts {
        plus.extend(p);
        minus.extend(q);
    }
    let mut lambda_plus = running_max(plus, t_max);
    let mut lambda_minus = running_max(minus, t_max);
    let mut truncated = false;
    for v in lambda_plus.iter_mut().chain(lambda_minus.iter_mut()) {
        if *v > horizon {
            *v = horizon;
            truncated = true;
        }
    }
    Ok(LyapunovEstimate {
        lambda_plus,
        lambda_minus,
        horizon,
        truncated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    BlockingUpTo(u64),
    RefutedAt(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockingReport {
    pub word: Vec<Sym>,
    pub horizon: u64,
    pub verdict: Verdict,
}

/// Coordinates of `c` worth scanning for occurrences of a word of length `len`.
fn occurrence_starts(c: &Configuration, len: usize) -> Vec<i64> {
    match c {
        Configuration::Periodic { word } => (0..word.len() as i64).collect(),
        Configuration::Padded { .. } => match c.explicit_window() {
            Some((lo, hi)) => (lo - len as i64..=hi + 1).collect(),
            None => vec![0],
        },
    }
}

/// How far past `from` the half-line `[from, ∞)` of `c` must be compared.
fn right_extent(c: &Configuration, from: i64) -> i64 {
    match c {
        Configuration::Periodic { word } => word.len() as i64,
        Configuration::Padded { .. } => c
            .explicit_window()
            .map_or(1, |(_, hi)| (hi - from + 2).max(1)),
    }
}

fn left_extent(c: &Configuration, to: i64) -> i64 {
    match c {
        Configuration::Periodic { word } => word.len() as i64,
        Configuration::Padded { .. } => c
            .explicit_window()
            .map_or(1, |(lo, _)| (to - lo + 2).max(1)),
    }
}

struct Occurrence {
    member: usize,
    at: i64,
}

/// First time two occurrences with equal half-lines stop agreeing on them.
fn first_split(
    orbits: &[Vec<Configuration>],
    group: &[Occurrence],
    right: bool,
    len: i64,
    t_max: u64,
) -> Option<u64> {
    let base = &group[0];
    for t in 0..=t_max as usize {
        let a = &orbits[base.member][t];
        for o in &group[1..] {
            let b = &orbits[o.member][t];
            let same = if right {
                let ext = right_extent(a, base.at).max(right_extent(b, o.at));
                (0..ext).all(|k| a.get(base.at + k) == b.get(o.at + k))
            } else {
                let ea = base.at + len - 1;
                let eb = o.at + len - 1;
                let ext = left_extent(a, ea).max(left_extent(b, eb));
                (0..ext).all(|k| a.get(ea - k) == b.get(eb - k))
            };
            if !same {
                return Some(t as u64);
            }
        }
    }
    None
}

/// Tests every word of length `1..=max_len` occurring in the family for the
/// two-sided blocking condition up to `t_max`.
pub fn blocking_word_search(
    rule: &dyn Automaton,
    family: &Family,
    max_len: usize,
    t_max: u64,
) -> Result<Vec<BlockingReport>, AnalysisError> {
    if family.members.is_empty() {
        return Err(AnalysisError::EmptyFamily);
    }
    let orbits: Vec<Vec<Configuration>> = family
        .members
        .par_iter()
        .map(|c| crate::shift::orbit(rule, c, t_max as usize))
        .collect::<Result<_, _>>()?;
    let mut words: BTreeSet<Vec<Sym>> = BTreeSet::new();
    for len in 1..=max_len {
        for c in &family.members {
            for s in occurrence_starts(c, len) {
                words.insert(c.slice(s, s + len as i64 - 1));
            }
        }
    }
    let words: Vec<Vec<Sym>> = words.into_iter().collect();
    let reports = words
        .par_iter()
        .map(|w| {
            let len = w.len() as i64;
            let occ: Vec<Occurrence> = family
                .members
                .iter()
                .enumerate()
                .flat_map(|(m, c)| {
                    occurrence_starts(c, w.len())
                        .into_iter()
                        .filter(move |&s| c.slice(s, s + len - 1) == *w)
                        .map(move |at| Occurrence { member: m, at })
                })
                .collect();
            let mut first: Option<u64> = None;
            for right in [true, false] {
                let mut groups: HashMap<Vec<Sym>, Vec<Occurrence>> = HashMap::new();
                for o in &occ {
                    let c = &family.members[o.member];
                    let key: Vec<Sym> = if right {
                        (0..right_extent(c, o.at)).map(|k| c.get(o.at + k)).collect()
                    } else {
                        let e = o.at + len - 1;
                        (0..left_extent(c, e)).map(|k| c.get(e - k)).collect()
                    };
                    groups.entry(key).or_default().push(Occurrence {
                        member: o.member,
                        at: o.at,
                    });
                }
                for g in groups.values().filter(|g| g.len() > 1) {
                    if let Some(t) = first_split(&orbits, g, right, len, t_max) {
                        first = Some(first.map_or(t, |f: u64| f.min(t)));
                    }
                }
            }
            BlockingReport {
                word: w.clone(),
                horizon: t_max,
                verdict: match first {
                    Some(t) => Verdict::RefutedAt(t),
                    None => Verdict::BlockingUpTo(t_max),
                },
            }
        })
        .collect();
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProbeVerdict {
    ExpansiveAtScale,
    /// Two members agree on the band yet differ at `(i, t)`.
    NotDeterminedAtScale {
        first: usize,
        second: usize,
        cell: (i64, i64),
    },
}

/// Does the band around `dir` determine the `[-extent, extent]²` window for
/// every family pair? The band is observed out to `|i| ≤ extent·(1 + R)`,
/// `R` the larger rule range, so the horizontal band sees everything the
/// window depends on.
pub fn direction_probe(
    rule: &dyn Automaton,
    inverse: Option<&dyn Automaton>,
    family: &Family,
    dir: &Direction,
    extent: i64,
) -> Result<ProbeVerdict, AnalysisError> {
    if family.members.is_empty() {
        return Err(AnalysisError::EmptyFamily);
    }
    let inverse = inverse.ok_or(AnalysisError::InverseRequired)?;
    let reach = rule.range().max(inverse.range()) as i64;
    let wide = extent * (1 + reach);
    let t_range = (-extent, extent);
    let i_range = (-wide, wide);
    let patches: Vec<Vec<Vec<Sym>>> = family
        .members
        .par_iter()
        .map(|c| spacetime(rule, Some(inverse), c, t_range, i_range))
        .collect::<Result<_, _>>()?;
    let band: Vec<(usize, usize)> = (0..patches[0].len())
        .flat_map(|r| (0..patches[0][0].len()).map(move |c| (r, c)))
        .filter(|&(r, c)| dir.contains(i_range.0 + c as i64, t_range.0 + r as i64))
        .collect();
    let mut groups: HashMap<Vec<Sym>, usize> = HashMap::new();
    for (m, p) in patches.iter().enumerate() {
        let key: Vec<Sym> = band.iter().map(|&(r, c)| p[r][c]).collect();
        match groups.get(&key) {
            None => {
                groups.insert(key, m);
            }
            Some(&rep) => {
                for t in -extent..=extent {
                    for i in -extent..=extent {
                        let r = (t - t_range.0) as usize;
                        let c = (i - i_range.0) as usize;
                        if patches[rep][r][c] != p[r][c] {
                            return Ok(ProbeVerdict::NotDeterminedAtScale {
                                first: rep,
                                second: m,
                                cell: (i, t),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(ProbeVerdict::ExpansiveAtScale)
}
