//! Exact slope algebra for nested simulations.
//!
//! Each level `(B, W, D, T)` contributes `α = D·B/T` and `β = B/T`; the
//! nested sum `λ = α₁ + β₁(α₂ + β₂(α₃ + …))` is the inverse slope of the
//! surviving non-expansive direction. Everything here is exact.

use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Line, Polygon};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SlopeError {
    #[error("level {level}: beta = {beta} exceeds 1/2")]
    InvalidLevel { level: usize, beta: BigRational },
    #[error("depth {depth} exceeds the {available} levels of the program")]
    DepthOutOfRange { depth: usize, available: usize },
    #[error("|theta| = {0} is not realizable with wait time at least 2; only |theta| < 1 is")]
    Unrealizable(BigRational),
    #[error("|theta| = {0} exceeds 1; rescale the acting group so the target slope has |theta| <= 1")]
    OutOfRange(BigRational),
    #[error("block length {b} cannot keep the target inside the next interval")]
    BlockTooSmall { b: BigInt },
    #[error("cannot parse `{0}` as a rational number")]
    Parse(String),
    #[error("malformed program: {0}")]
    Format(String),
}

/// One simulation level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelParams {
    pub b: BigInt,
    pub w: u64,
    pub d: i64,
    pub t: BigInt,
}

impl LevelParams {
    /// `T = B(1 + W + |D|)`.
    pub fn idealized(b: i64, w: u64, d: i64) -> Self {
        let b = BigInt::from(b);
        let t = &b * BigInt::from(1 + w + d.unsigned_abs());
        Self { b, w, d, t }
    }

    pub fn t_over_b(&self) -> BigRational {
        BigRational::new(self.t.clone(), self.b.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlphaBeta {
    pub alpha: BigRational,
    pub beta: BigRational,
    /// `T / (B(1 + W + |D|)) − 1`.
    pub epsilon: BigRational,
}

pub fn alpha_beta(p: &LevelParams) -> AlphaBeta {
    let beta = BigRational::new(p.b.clone(), p.t.clone());
    let alpha = &beta * BigInt::from(p.d);
    let ideal = &p.b * BigInt::from(1 + p.w + p.d.unsigned_abs());
    let epsilon = BigRational::new(p.t.clone(), ideal) - BigRational::one();
    AlphaBeta {
        alpha,
        beta,
        epsilon,
    }
}

/// `[[a, b], [c, d]]` acting on column vectors `(x, y)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeTransform {
    pub m: [[BigRational; 2]; 2],
}

impl ShapeTransform {
    pub fn identity() -> Self {
        let (o, z) = (BigRational::one(), BigRational::zero());
        Self {
            m: [[o.clone(), z.clone()], [z, o]],
        }
    }

    pub fn apply(&self, v: &(BigRational, BigRational)) -> (BigRational, BigRational) {
        (
            &self.m[0][0] * &v.0 + &self.m[0][1] * &v.1,
            &self.m[1][0] * &v.0 + &self.m[1][1] * &v.1,
        )
    }

    /// `self · other`.
    pub fn compose(&self, other: &ShapeTransform) -> ShapeTransform {
        let a = &self.m;
        let b = &other.m;
        let e = |i: usize, j: usize| &a[i][0] * &b[0][j] + &a[i][1] * &b[1][j];
        ShapeTransform {
            m: [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]],
        }
    }

    pub fn determinant(&self) -> BigRational {
        &self.m[0][0] * &self.m[1][1] - &self.m[0][1] * &self.m[1][0]
    }
}

/// `A = [[1, D], [0, T/B]]`: fixes `(±1, 0)` and sends `(0, 1)` to `(D, T/B)`.
pub fn shape_transform(p: &LevelParams) -> ShapeTransform {
    ShapeTransform {
        m: [
            [BigRational::one(), BigRational::from_integer(BigInt::from(p.d))],
            [BigRational::zero(), p.t_over_b()],
        ],
    }
}

/// A schedule of levels, optionally with the target it was built for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlopeProgram {
    pub theta: Option<BigRational>,
    pub levels: Vec<LevelParams>,
}

impl SlopeProgram {
    pub fn new(levels: Vec<LevelParams>) -> Self {
        Self {
            theta: None,
            levels,
        }
    }

    /// `(λ_m, Π_{k≤m} β_k)`.
    pub fn lambda_eval(&self, m: usize) -> Result<(BigRational, BigRational), SlopeError> {
        if m > self.levels.len() {
            return Err(SlopeError::DepthOutOfRange {
                depth: m,
                available: self.levels.len(),
            });
        }
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        let ab: Vec<AlphaBeta> = self.levels[..m].iter().map(alpha_beta).collect();
        for (k, x) in ab.iter().enumerate() {
            if x.beta > half {
                return Err(SlopeError::InvalidLevel {
                    level: k + 1,
                    beta: x.beta.clone(),
                });
            }
        }
        let mut lambda = BigRational::zero();
        for x in ab.iter().rev() {
            lambda = &x.alpha + &x.beta * lambda;
        }
        let bound = ab.iter().fold(BigRational::one(), |acc, x| acc * &x.beta);
        Ok((lambda, bound))
    }

    /// `A₁ ⋯ A_m`.
    pub fn composed_transform(&self, m: usize) -> ShapeTransform {
        self.levels[..m.min(self.levels.len())]
            .iter()
            .fold(ShapeTransform::identity(), |acc, p| acc.compose(&shape_transform(p)))
    }

    pub fn to_json(&self) -> Result<String, SlopeError> {
        let (lambda, bound) = self.lambda_eval(self.levels.len())?;
        let file = ProgramFile {
            theta: self.theta.as_ref().map(|t| format!("{}/{}", t.numer(), t.denom())),
            levels: self
                .levels
                .iter()
                .map(|l| LevelFile {
                    b: l.b.to_string(),
                    w: l.w,
                    d: l.d,
                    t: l.t.to_string(),
                })
                .collect(),
            lambda: RatFile::from(&lambda),
            bound: RatFile::from(&bound),
        };
        Ok(serde_json::to_string_pretty(&file).expect("program serializes"))
    }

    /// Parses a program and checks the stored `lambda` and `bound`.
    pub fn from_json(text: &str) -> Result<Self, SlopeError> {
        let file: ProgramFile =
            serde_json::from_str(text).map_err(|e| SlopeError::Format(e.to_string()))?;
        let big = |s: &str| BigInt::from_str(s).map_err(|_| SlopeError::Parse(s.to_string()));
        let levels = file
            .levels
            .iter()
            .map(|l| {
                Ok(LevelParams {
                    b: big(&l.b)?,
                    w: l.w,
                    d: l.d,
                    t: big(&l.t)?,
                })
            })
            .collect::<Result<Vec<_>, SlopeError>>()?;
        for l in &levels {
            if !l.b.is_positive() || !l.t.is_positive() {
                return Err(SlopeError::Format("B and T must be positive".into()));
            }
        }
        let theta = file.theta.as_deref().map(parse_rational).transpose()?;
        let prog = SlopeProgram { theta, levels };
        let (lambda, bound) = prog.lambda_eval(prog.levels.len())?;
        if file.lambda.to_rational()? != lambda || file.bound.to_rational()? != bound {
            return Err(SlopeError::Format("stored lambda or bound disagrees with the levels".into()));
        }
        Ok(prog)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LevelFile {
    #[serde(rename = "B")]
    b: String,
    #[serde(rename = "W")]
    w: u64,
    #[serde(rename = "D")]
    d: i64,
    #[serde(rename = "T")]
    t: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RatFile {
    num: String,
    den: String,
}

impl RatFile {
    fn from(r: &BigRational) -> Self {
        Self {
            num: r.numer().to_string(),
            den: r.denom().to_string(),
        }
    }

    fn to_rational(&self) -> Result<BigRational, SlopeError> {
        let n = BigInt::from_str(&self.num).map_err(|_| SlopeError::Parse(self.num.clone()))?;
        let d = BigInt::from_str(&self.den).map_err(|_| SlopeError::Parse(self.den.clone()))?;
        if d.is_zero() {
            return Err(SlopeError::Parse(format!("{}/{}", self.num, self.den)));
        }
        Ok(BigRational::new(n, d))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ProgramFile {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    theta: Option<String>,
    levels: Vec<LevelFile>,
    lambda: RatFile,
    bound: RatFile,
}

/// The quadrilateral `A₁⋯A_m(Δ)` for the `ℓ¹` unit ball `Δ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapePolygon {
    /// `(1, 0)`, `(x, y)`, `(−1, 0)`, `(−x, −y)`.
    pub vertices: Vec<(BigRational, BigRational)>,
    pub upper: (BigRational, BigRational),
}

impl ShapePolygon {
    /// Slopes `y/(x − 1)` and `y/(x + 1)` of the two upper sides; `None` for a
    /// vertical side.
    pub fn upper_side_slopes(&self) -> (Option<BigRational>, Option<BigRational>) {
        let (x, y) = &self.upper;
        let s = |den: BigRational| (!den.is_zero()).then(|| y / den);
        (s(x - BigRational::one()), s(x + BigRational::one()))
    }

    /// Inverse slopes `(x − 1)/y` and `(x + 1)/y`; they bracket `x/y`.
    pub fn upper_inverse_slopes(&self) -> (BigRational, BigRational) {
        let (x, y) = &self.upper;
        ((x - BigRational::one()) / y, (x + BigRational::one()) / y)
    }

    /// Slopes of the two lower sides, from `(−x, −y)` to `(±1, 0)`.
    pub fn lower_side_slopes(&self) -> (Option<BigRational>, Option<BigRational>) {
        let (x, y) = &self.upper;
        let s = |den: BigRational| (!den.is_zero()).then(|| y / den);
        (s(x + BigRational::one()), s(x - BigRational::one()))
    }

    pub fn to_polygon(&self) -> Polygon {
        Polygon::new(self.vertices.clone())
    }
}

pub fn delta_polygon(prog: &SlopeProgram, m: usize) -> ShapePolygon {
    let a = prog.composed_transform(m);
    let (o, z) = (BigRational::one(), BigRational::zero());
    let upper = a.apply(&(z.clone(), o.clone()));
    let lower = (-upper.0.clone(), -upper.1.clone());
    ShapePolygon {
        vertices: vec![(o.clone(), z.clone()), upper.clone(), (-o, z), lower],
        upper,
    }
}

/// How the cycle length `T` depends on the block length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimingModel {
    /// `C` in `T = (B + C)(1 + W + |D|)`; 0 is the idealized schedule.
    pub overhead: BigInt,
    /// Part of the minimum block length that does not depend on `W`, `D`.
    pub program_fixed: BigInt,
    pub min_block: BigInt,
}

impl TimingModel {
    pub fn idealized() -> Self {
        Self {
            overhead: BigInt::zero(),
            program_fixed: BigInt::zero(),
            min_block: BigInt::one(),
        }
    }

    pub fn cycle_length(&self, b: &BigInt, w: u64, d: i64) -> BigInt {
        (b + &self.overhead) * BigInt::from(1 + w + d.unsigned_abs())
    }

    /// Smallest admissible `B` for `(W, D)`: the program layer must fit.
    pub fn min_block_for(&self, w: u64, d: i64) -> BigInt {
        let prog = if self.program_fixed.is_zero() {
            BigInt::one()
        } else {
            &self.program_fixed + BigInt::from(w + 1 + d.unsigned_abs() + 2)
        };
        prog.max(self.min_block.clone())
    }

    pub fn level(&self, b: BigInt, w: u64, d: i64) -> LevelParams {
        let t = self.cycle_length(&b, w, d);
        LevelParams { b, w, d, t }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BPolicy {
    /// Least `B` that puts the next target at most halfway from its ideal
    /// position to 1, so later levels keep room.
    Midpoint,
    /// A fixed `B` at every level.
    Fixed(BigInt),
}

fn ceil_div(a: &BigRational) -> BigInt {
    let (q, r) = a.numer().div_rem(a.denom());
    if r.is_positive() {
        q + 1
    } else {
        q
    }
}

/// Least `s = W + D` with `W ≥ 2`, `D = ⌊θ(s + 1)⌋`, for `θ ∈ [0, 1)`.
///
/// `W ≥ 2` means `θ(s + 1) < s − 1`, i.e. `s > (1 + θ)/(1 − θ)`.
pub fn choose_wd(theta: &BigRational) -> (u64, i64) {
    let one = BigRational::one();
    let bound = (&one + theta) / (&one - theta);
    let s: BigInt = (bound.floor().to_integer() + BigInt::one()).max(BigInt::from(2));
    let s = s.to_u64().expect("cycle length fits");
    let d = (theta * BigRational::from_integer(BigInt::from(s + 1)))
        .floor()
        .to_integer()
        .to_i64()
        .expect("displacement fits");
    (s - d as u64, d)
}

/// Greedy interval nesting: at each level pick `(W, D)`, then `B`, so that
/// `θ ∈ [α, α + β)`, and recurse on `(θ − α)/β`. Negative targets realize
/// `|θ|` and flip every `D`.
pub fn realize_slope(
    theta: &BigRational,
    depth: usize,
    timing: &TimingModel,
    policy: &BPolicy,
) -> Result<SlopeProgram, SlopeError> {
    let one = BigRational::one();
    let mag = theta.abs();
    if mag > one {
        return Err(SlopeError::OutOfRange(mag));
    }
    if mag == one {
        return Err(SlopeError::Unrealizable(mag));
    }
    let sign = if theta.is_negative() { -1 } else { 1 };
    let mut cur = mag;
    let mut levels = Vec::with_capacity(depth);
    for _ in 0..depth {
        let (w, d) = choose_wd(&cur);
        let k = BigRational::from_integer(BigInt::from(1 + w + d as u64));
        let ideal = &cur * &k - BigRational::from_integer(BigInt::from(d));
        let floor = timing.min_block_for(w, d);
        let b = match policy {
            BPolicy::Midpoint => {
                // θ' = ideal + θ·k·C/B ≤ (ideal + 1)/2.
                let c = BigRational::from_integer(timing.overhead.clone());
                let need = BigRational::from_integer(BigInt::from(2)) * &cur * &k * c / (&one - &ideal);
                ceil_div(&need).max(floor)
            }
            BPolicy::Fixed(b) => {
                if *b < floor {
                    return Err(SlopeError::BlockTooSmall { b: b.clone() });
                }
                b.clone()
            }
        };
        let level = timing.level(b, w, d);
        let ab = alpha_beta(&level);
        let next = (&cur - &ab.alpha) / &ab.beta;
        if next.is_negative() || next >= one {
            return Err(SlopeError::BlockTooSmall { b: level.b });
        }
        cur = next;
        levels.push(level);
    }
    if sign < 0 {
        for l in &mut levels {
            l.d = -l.d;
        }
    }
    Ok(SlopeProgram {
        theta: Some(theta.clone()),
        levels,
    })
}

/// Per level, whether the closure of the next target interval sits inside
/// the open current one. Fails only on the lower endpoint when `D = 0`.
pub fn nesting_report(prog: &SlopeProgram) -> Vec<bool> {
    let one = BigRational::one();
    prog.levels
        .iter()
        .map(|l| {
            let ab = alpha_beta(l);
            let lo = ab.alpha.abs();
            lo.is_positive() && lo + &ab.beta < one
        })
        .collect()
}

/// `λ = 0` is the time axis; otherwise the line `t = i/λ`.
pub fn direction_of(lambda: &BigRational) -> Line {
    if lambda.is_zero() {
        Line::Vertical
    } else {
        Line::Slope(lambda.recip())
    }
}

/// Accepts `p/q`, an integer, or a finite decimal such as `-0.4142`.
pub fn parse_rational(s: &str) -> Result<BigRational, SlopeError> {
    let err = || SlopeError::Parse(s.to_string());
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str(p.trim()).map_err(|_| err())?;
        let q = BigInt::from_str(q.trim()).map_err(|_| err())?;
        if q.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(p, q));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac.is_empty()
        || !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac.chars().all(|c| c.is_ascii_digit())
    {
        return Err(err());
    }
    let digits = format!("{int_part}{frac}");
    let num = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| err())?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    let r = BigRational::new(num, den);
    Ok(if neg { -r } else { r })
}
