//! `expansive-lab`: experiments, diagrams and reports over `expansive-core`.
//!
//! Exit codes: 0 success, 2 usage or domain error, 3 I/O failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use expansive_core::arrow_bracket::{
    alphabet_size, arrow_trace, bracket_removal_family, build_rule, hierarchical, render_text,
    run_crossing_with,
};
use expansive_core::cycle::{build_schedule, tower, SimParams, YSpec};
use expansive_core::dynamics::{blocking_word_search, determined_region, lyapunov_profile, Family, Verdict};
use expansive_core::geometry::Line;
use expansive_core::render::{diagram, to_pgm, to_text};
use expansive_core::slope::{direction_of, parse_rational, realize_slope, BPolicy, SlopeError, TimingModel};
use expansive_core::{Alphabet, Automaton, Configuration, LocalRule, Sym};
use num_bigint::BigUint;
use serde_json::json;

#[derive(Parser)]
#[command(name = "expansive-lab", version, about = "Expansive-direction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Space-time diagram of a block crossing in the arrow/bracket automaton.
    AbRun {
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 0)]
        level: u32,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Txt)]
        format: Format,
    },
    /// Crossing times and restoration over ranges of `n` and level.
    AbCross {
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        n: (i64, i64),
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        level: (i64, i64),
        #[arg(long, default_value_t = 100_000_000)]
        t_limit: u64,
        #[arg(long)]
        csv: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Determined region of a shift or the identity over a full 2-shift family.
    Region {
        #[arg(long, value_enum)]
        rule: SimpleRule,
        /// Shift amount for `--rule shift`.
        #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
        d: i64,
        #[arg(long)]
        n: i64,
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        trange: (i64, i64),
        /// Defaults to the band the family can resolve.
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        irange: Option<(i64, i64)>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lyapunov fronts as CSV or a JSON summary.
    Lyapunov {
        #[arg(long, value_enum)]
        system: System,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        tmax: u64,
        /// Block depth of the arrow/bracket family.
        #[arg(long, default_value_t = 6)]
        depth: u32,
        #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
        d: i64,
        #[arg(long)]
        csv: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Blocking-word verdicts for a shift or the identity.
    Blocking {
        #[arg(long, value_enum)]
        rule: SimpleRule,
        #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
        d: i64,
        #[arg(long, default_value_t = 6)]
        max_len: usize,
        #[arg(long, default_value_t = 1000)]
        tmax: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nested simulation parameters realizing a slope.
    Realize {
        #[arg(long, allow_hyphen_values = true)]
        theta: String,
        #[arg(long, default_value_t = 20)]
        depth: usize,
        /// Simulation parameters whose schedule fixes the timing model.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// State counts and composed shape transform of a simulation tower.
    Tower {
        #[arg(long, allow_hyphen_values = true)]
        theta: String,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        /// Number of base states.
        #[arg(long, default_value_t = 2)]
        base: u64,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Space-time diagram of a rule from a JSON file on a periodic word.
    Render {
        /// Rule JSON file.
        #[arg(long)]
        rule: PathBuf,
        /// Initial period as symbol indices, e.g. `0110` or `0,1,10`.
        #[arg(long)]
        word: String,
        #[arg(long)]
        steps: usize,
        /// Columns; defaults to one period.
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        cols: Option<(i64, i64)>,
        #[arg(long, value_enum, default_value_t = Format::Pgm)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Pgm,
    Txt,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimpleRule {
    Shift,
    Identity,
}

#[derive(Clone, Copy, ValueEnum)]
enum System {
    Ab,
    Shift,
    Identity,
}

enum Failure {
    Domain(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

type Res<T> = Result<T, Failure>;

fn domain(e: impl std::fmt::Display) -> Failure {
    Failure::Domain(e.to_string())
}

/// `a..b` (inclusive) or a single integer.
fn parse_range(s: &str) -> Result<(i64, i64), String> {
    let bad = || format!("expected `a..b` or an integer, got `{s}`");
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
        None => {
            let v = s.trim().parse().map_err(|_| bad())?;
            (v, v)
        }
    };
    if lo > hi {
        return Err(format!("empty range `{s}`"));
    }
    Ok((lo, hi))
}

fn emit(out: Option<&Path>, text: &str) -> Res<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Io(e.to_string())),
    }
}

fn simple_rule(rule: SimpleRule, d: i64) -> (LocalRule, LocalRule) {
    let a = Alphabet::numeric(2);
    match rule {
        SimpleRule::Shift => (LocalRule::shift(a.clone(), d), LocalRule::shift(a, -d)),
        SimpleRule::Identity => (LocalRule::identity(a.clone()), LocalRule::identity(a)),
    }
}

fn ab_run(n: u32, level: u32, steps: usize, out: Option<&Path>, format: Format) -> Res<()> {
    let sys = build_rule(n).map_err(domain)?;
    let c = hierarchical(&sys, level, 0).map_err(domain)?;
    let (mut lo, mut hi) = c.explicit_window().unwrap_or((0, 0));
    let trace = arrow_trace(&c, &sys, steps as u64).map_err(domain)?;
    for &(_, p) in &trace.positions {
        lo = lo.min(p - 1);
        hi = hi.max(p + 1);
    }
    let rows = diagram(&sys, &c, steps, lo, hi).map_err(domain)?;
    let text = match format {
        Format::Pgm => to_pgm(&rows, alphabet_size(n)),
        Format::Txt => rows.iter().map(|r| render_text(r, n) + "\n").collect(),
    };
    emit(out, &text)
}

fn ab_cross(n: (i64, i64), level: (i64, i64), t_limit: u64, csv: bool, out: Option<&Path>) -> Res<()> {
    if n.0 < 1 || level.0 < 0 {
        return Err(domain("need n >= 1 and level >= 0"));
    }
    let mut rows = Vec::new();
    for k in level.0..=level.1 {
        for m in n.0..=n.1 {
            let sys = build_rule(m as u32).map_err(domain)?;
            rows.push(run_crossing_with(&sys, k as u32, t_limit).map_err(domain)?);
        }
    }
    let text = if csv {
        let mut s = String::from("level,n,steps,restored\n");
        for r in &rows {
            s.push_str(&format!("{},{},{},{}\n", r.level, r.n, r.steps, r.restored));
        }
        s
    } else {
        let v: Vec<_> = rows
            .iter()
            .map(|r| {
                json!({"level": r.level, "n": r.n, "width": r.width, "steps": r.steps,
                       "restored": r.restored, "max_jump": r.max_jump})
            })
            .collect();
        serde_json::to_string_pretty(&v).expect("json") + "\n"
    };
    emit(out, &text)
}

fn region(
    rule: SimpleRule,
    d: i64,
    n: i64,
    trange: (i64, i64),
    irange: Option<(i64, i64)>,
    out: Option<&Path>,
) -> Res<()> {
    if n < 0 {
        return Err(domain("n must be nonnegative"));
    }
    let (f, inv) = simple_rule(rule, d);
    let d = if matches!(rule, SimpleRule::Shift) { d } else { 0 };
    let tm = trange.0.abs().max(trange.1.abs());
    let reach = n + d.abs() * tm + 2;
    let irange = irange.unwrap_or((-reach + 2, reach - 2));
    let reach = reach.max(irange.0.abs()).max(irange.1.abs()) + d.abs() * tm;
    let fam = Family::words_with_flips(2, n, reach);
    let reg = determined_region(&f, Some(&inv), &fam, n, trange, irange).map_err(domain)?;
    emit(out, &reg.export())
}

#[allow(clippy::too_many_arguments)]
fn lyapunov(system: System, n: u32, tmax: u64, depth: u32, d: i64, csv: bool, out: Option<&Path>) -> Res<()> {
    let horizon = 10 * tmax.max(1);
    let est = match system {
        System::Ab => {
            let sys = build_rule(n).map_err(domain)?;
            let fam = bracket_removal_family(&sys, depth).map_err(domain)?;
            lyapunov_profile(&sys, &fam, tmax, horizon)
        }
        System::Shift | System::Identity => {
            let rule = if matches!(system, System::Shift) { SimpleRule::Shift } else { SimpleRule::Identity };
            let (f, _) = simple_rule(rule, d);
            let fam = Family::words_with_flips(2, n as i64, n as i64 + 4);
            lyapunov_profile(&f, &fam, tmax, horizon)
        }
    }
    .map_err(domain)?;
    let text = if csv {
        est.to_csv()
    } else {
        let t = tmax as usize;
        let v = json!({
            "t": tmax,
            "Lambda_plus": est.lambda_plus[t],
            "Lambda_minus": est.lambda_minus[t],
            "ratio_plus": est.ratio_plus(t),
            "ratio_minus": est.ratio_minus(t),
            "truncated": est.truncated,
        });
        serde_json::to_string_pretty(&v).expect("json") + "\n"
    };
    emit(out, &text)
}

fn blocking(rule: SimpleRule, d: i64, max_len: usize, tmax: u64, out: Option<&Path>) -> Res<()> {
    let (f, _) = simple_rule(rule, d);
    let fam = Family::words_with_flips(2, max_len as i64 / 2, max_len as i64);
    let reports = blocking_word_search(&f, &fam, max_len, tmax).map_err(domain)?;
    let mut s = String::from("word,verdict,t\n");
    for r in reports {
        let word: String = r.word.iter().map(|v| v.to_string()).collect();
        let (verdict, t) = match r.verdict {
            Verdict::BlockingUpTo(t) => ("blocking", t),
            Verdict::RefutedAt(t) => ("refuted", t),
        };
        s.push_str(&format!("{word},{verdict},{t}\n"));
    }
    emit(out, &s)
}

/// The schedule timing of `--params`, or of the two-symbol identity at
/// `B = 64, W = 2, D = 0` by default.
fn timing(params: Option<&Path>) -> Res<TimingModel> {
    let p = match params {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            SimParams::from_json(&text).map_err(domain)?
        }
        None => {
            let id = LocalRule::identity(Alphabet::numeric(2));
            SimParams::new(2, YSpec::Full, id.clone(), id, 64, 2, 0).map_err(domain)?
        }
    };
    Ok(build_schedule(&p).map_err(domain)?.timing_model())
}

fn theta_arg(s: &str) -> Res<num_rational::BigRational> {
    parse_rational(s).map_err(domain)
}

fn slope_failure(e: SlopeError) -> Failure {
    match e {
        SlopeError::OutOfRange(_) => Failure::Domain(format!(
            "{e}: exchanging the two generators turns slope theta into 1/theta, so realize 1/theta instead"
        )),
        e => domain(e),
    }
}

fn realize(theta: &str, depth: usize, params: Option<&Path>, out: Option<&Path>) -> Res<()> {
    if depth == 0 {
        return Err(domain("depth must be at least 1"));
    }
    let theta = theta_arg(theta)?;
    let timing = timing(params)?;
    let prog = realize_slope(&theta, depth, &timing, &BPolicy::Midpoint).map_err(slope_failure)?;
    let (lambda, bound) = prog.lambda_eval(depth).map_err(slope_failure)?;
    if let Some(path) = out {
        emit(Some(path), &(prog.to_json().map_err(slope_failure)? + "\n"))?;
    }
    let direction = match direction_of(&lambda) {
        Line::Vertical => "vertical".to_string(),
        Line::Slope(s) => s.to_string(),
    };
    // numer < 2^a and denom ≥ 2^(b−1) give bound < 2^(a−b+1).
    let exp = bound.numer().bits() as i64 - bound.denom().bits() as i64 + 1;
    let scale = if bound.numer().bits() == 0 { "bound = 0".to_string() } else { format!("bound < 2^{exp}") };
    emit(None, &format!("lambda {lambda} bound {bound} ({scale}) direction {direction}\n"))
}

fn tower_cmd(theta: &str, depth: usize, base: u64, params: Option<&Path>, out: Option<&Path>) -> Res<()> {
    let theta = theta_arg(theta)?;
    let timing = timing(params)?;
    let prog = realize_slope(&theta, depth.max(1), &timing, &BPolicy::Midpoint).map_err(slope_failure)?;
    let rep = tower(&prog, depth, &BigUint::from(base), &timing).map_err(domain)?;
    let m = &rep.transform.m;
    let v = json!({
        "depth": rep.depth,
        "levels": prog.levels[..depth].iter()
            .map(|l| json!({"B": l.b.to_string(), "W": l.w, "D": l.d, "T": l.t.to_string()}))
            .collect::<Vec<_>>(),
        "counts": rep.counts.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        "state_count": rep.state_count.to_string(),
        "transform": [[m[0][0].to_string(), m[0][1].to_string()], [m[1][0].to_string(), m[1][1].to_string()]],
    });
    emit(out, &(serde_json::to_string_pretty(&v).expect("json") + "\n"))
}

fn parse_word(s: &str) -> Res<Vec<Sym>> {
    let bad = || domain(format!("cannot parse word `{s}`"));
    if s.contains(',') {
        s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
    } else {
        s.chars().map(|c| c.to_digit(10).map(|v| v as Sym).ok_or_else(bad)).collect()
    }
}

fn render(
    rule: &Path,
    word: &str,
    steps: usize,
    cols: Option<(i64, i64)>,
    format: Format,
    out: Option<&Path>,
) -> Res<()> {
    let text = fs::read_to_string(rule).map_err(|e| Failure::Io(format!("{}: {e}", rule.display())))?;
    let rule = LocalRule::from_json(&text).map_err(domain)?;
    let c = Configuration::periodic(parse_word(word)?).map_err(domain)?;
    let (lo, hi) = cols.unwrap_or_else(|| c.explicit_window().expect("periodic"));
    let rows = diagram(&rule, &c, steps, lo, hi).map_err(domain)?;
    let k = rule.alphabet_size();
    let text = match format {
        Format::Pgm => to_pgm(&rows, k),
        Format::Txt if k <= 36 => to_text(&rows, |s| char::from_digit(s as u32, 36).expect("small symbol")),
        Format::Txt => return Err(domain("text output needs at most 36 symbols")),
    };
    emit(out, &text)
}

fn run(cli: Cli) -> Res<()> {
    match cli.command {
        Command::AbRun {
            n,
            level,
            steps,
            out,
            format,
        } => ab_run(n, level, steps, out.as_deref(), format),
        Command::AbCross {
            n,
            level,
            t_limit,
            csv,
            out,
        } => ab_cross(n, level, t_limit, csv, out.as_deref()),
        Command::Region {
            rule,
            d,
            n,
            trange,
            irange,
            out,
        } => region(rule, d, n, trange, irange, out.as_deref()),
        Command::Lyapunov {
            system,
            n,
            tmax,
            depth,
            d,
            csv,
            out,
        } => lyapunov(system, n, tmax, depth, d, csv, out.as_deref()),
        Command::Blocking {
            rule,
            d,
            max_len,
            tmax,
            out,
        } => blocking(rule, d, max_len, tmax, out.as_deref()),
        Command::Realize {
            theta,
            depth,
            params,
            out,
        } => realize(&theta, depth, params.as_deref(), out.as_deref()),
        Command::Tower {
            theta,
            depth,
            base,
            params,
            out,
        } => tower_cmd(&theta, depth, base, params.as_deref(), out.as_deref()),
        Command::Render {
            rule,
            word,
            steps,
            cols,
            format,
            out,
        } => render(&rule, &word, steps, cols, format, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = std::env::var("EXPANSIVE_LAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Only fails if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Domain(m) => eprintln!("error: {m}"),
                Failure::Io(m) => eprintln!("I/O error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
