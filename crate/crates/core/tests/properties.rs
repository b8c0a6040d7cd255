//! Invariants checked on random inputs.

use expansive_core::arrow_bracket::{build_rule, ABSymbol, ABSystem};
use expansive_core::cycle::{suspension_step, Generator, SuspensionState};
use expansive_core::dynamics::{determined_region, Family};
use expansive_core::slope::{realize_slope, BPolicy, TimingModel};
use expansive_core::{apply_rule, compose_rules, Alphabet, Automaton, Configuration, LocalRule, Sym};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use proptest::prelude::*;

fn rule_strategy(max_k: usize, range: usize) -> impl Strategy<Value = LocalRule> {
    (2..=max_k).prop_flat_map(move |k| {
        let width = 2 * range + 1;
        prop::collection::vec(0..k as Sym, k.pow(width as u32)).prop_map(move |table| {
            LocalRule::from_fn(Alphabet::numeric(k), range, |w| {
                table[w.iter().fold(0usize, |acc, &s| acc * k + s as usize)]
            })
            .expect("small rule")
        })
    })
}

fn word_for(k: usize, max_p: usize) -> impl Strategy<Value = Vec<Sym>> {
    prop::collection::vec(0..k as Sym, 1..=max_p)
}

fn rule_and_word(max_k: usize, range: usize, max_p: usize) -> impl Strategy<Value = (LocalRule, Vec<Sym>)> {
    rule_strategy(max_k, range).prop_flat_map(move |r| {
        let k = r.alphabet().len();
        (Just(r), word_for(k, max_p))
    })
}

/// Admissible periodic arrow/bracket words: brackets never adjacent, at most
/// one arrow, and the arrow not stuck.
fn ab_word(sys: &ABSystem, min_p: usize, max_p: usize) -> impl Strategy<Value = Configuration> + '_ {
    let n = sys.n();
    let k = (4 * n + 5) as Sym;
    (
        prop::collection::vec(3..k, min_p..=max_p),
        prop::collection::vec(any::<bool>(), max_p),
        any::<prop::sample::Index>(),
        0..3u8,
    )
        .prop_filter_map("stuck arrow", move |(brackets, keep, at, arrow)| {
            let p = brackets.len();
            let mut w: Vec<Sym> = (0..p).map(|i| if keep[i] { brackets[i] } else { 0 }).collect();
            for i in 0..p {
                if w[i] >= 3 && w[(i + 1) % p] >= 3 {
                    w[(i + 1) % p] = 0;
                }
            }
            if arrow > 0 {
                let blanks: Vec<usize> = (0..p).filter(|&i| w[i] == 0).collect();
                if blanks.is_empty() {
                    return None;
                }
                w[blanks[at.index(blanks.len())]] = arrow as Sym;
            }
            let c = Configuration::periodic(w).ok()?;
            sys.admissible(&c).then_some(c)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rules_commute_with_the_shift((r, w) in rule_and_word(3, 1, 8), k in -8i64..8) {
        let c = Configuration::periodic(w).unwrap();
        prop_assert_eq!(
            apply_rule(&r, &c.shifted(k)).unwrap(),
            apply_rule(&r, &c).unwrap().shifted(k)
        );
    }

    #[test]
    fn composition_law(f in rule_strategy(4, 1), seed in any::<u64>(), w in word_for(4, 6)) {
        let k = f.alphabet().len();
        let g = LocalRule::from_fn(Alphabet::numeric(k), 1, |x| {
            ((x[0] as u64 * 3 + x[1] as u64 * 5 + x[2] as u64 * 7 + seed) % k as u64) as Sym
        }).unwrap();
        let w: Vec<Sym> = w.into_iter().map(|s| s % k as Sym).collect();
        let c = Configuration::periodic(w).unwrap();
        let fg = compose_rules(&f, &g).unwrap();
        prop_assert_eq!(apply_rule(&fg, &c).unwrap(), apply_rule(&f, &apply_rule(&g, &c).unwrap()).unwrap());
    }

    #[test]
    fn one_step_is_local((r, w) in rule_and_word(3, 1, 6), j in -10i64..10, v in 0..3 as Sym) {
        let k = r.alphabet().len() as Sym;
        let mut x = Configuration::padded(w.clone(), 0, -3);
        let base = Configuration::padded(w, 0, -3);
        x.set(j, v % k);
        if apply_rule(&r, &Configuration::padded(vec![0; 3], 0, 0)).is_err() {
            return Ok(());
        }
        let a = apply_rule(&r, &base).unwrap();
        let b = apply_rule(&r, &x).unwrap();
        for i in -20..20 {
            if (i - j).abs() > 1 {
                prop_assert_eq!(a.get(i), b.get(i));
            }
        }
    }
}

fn n2() -> &'static ABSystem {
    use std::sync::OnceLock;
    static SYS: OnceLock<ABSystem> = OnceLock::new();
    SYS.get_or_init(|| build_rule(2).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fast_step_matches_table(c in ab_word(n2(), 5, 14)) {
        let sys = n2();
        prop_assert_eq!(sys.step(&c).unwrap(), apply_rule(sys.rule(), &c).unwrap());
    }

    #[test]
    fn arrows_are_conserved_and_steps_deterministic(c in ab_word(n2(), 3, 14)) {
        let sys = n2();
        let d = sys.step(&c).unwrap();
        prop_assert_eq!(sys.arrows(&c).len(), sys.arrows(&d).len());
        prop_assert_eq!(sys.step(&c).unwrap(), d);
    }

    #[test]
    fn inverse_undoes_a_step(c in ab_word(n2(), 3, 14)) {
        let sys = n2();
        let inv = sys.inverse().unwrap();
        let d = sys.step(&c).unwrap();
        prop_assert!(inv.admissible(&d));
        prop_assert_eq!(inv.step(&d).unwrap(), c);
    }

    #[test]
    fn arrowless_words_are_fixed(c in ab_word(n2(), 3, 14)) {
        let sys = n2();
        if sys.arrows(&c).is_empty() {
            prop_assert_eq!(sys.step(&c).unwrap(), c);
        }
    }

    #[test]
    fn mirror_is_an_involution(i in 0..13 as Sym) {
        let s = ABSymbol::from_index(i, 2).unwrap();
        prop_assert_eq!(s.mirror().mirror(), s);
        prop_assert_eq!(ABSymbol::from_index(s.index(2), 2), Some(s));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn regions_grow_with_the_window(d in -1i64..=1, n in 1i64..3) {
        let a = Alphabet::numeric(2);
        let r = LocalRule::shift(a.clone(), d);
        let inv = LocalRule::shift(a, -d);
        let fam = Family::words_with_flips(2, n + 1, n + 8);
        let small = determined_region(&r, Some(&inv), &fam, n, (-3, 3), (-6, 6)).unwrap();
        let big = determined_region(&r, Some(&inv), &fam, n + 1, (-3, 3), (-6, 6)).unwrap();
        prop_assert!(small.cells.is_subset(&big.cells));
    }

    #[test]
    fn realized_slopes_converge(p in -999i64..=999, depth in 1usize..12) {
        let theta = BigRational::new(BigInt::from(p), BigInt::from(1000));
        for timing in [TimingModel::idealized(), TimingModel {
            overhead: BigInt::from(57),
            program_fixed: BigInt::from(48),
            min_block: BigInt::from(1),
        }] {
            let prog = realize_slope(&theta, depth, &timing, &BPolicy::Midpoint).unwrap();
            for m in 1..=depth {
                let (lambda, bound) = prog.lambda_eval(m).unwrap();
                prop_assert!((&lambda - &theta).abs() <= bound);
            }
        }
    }

    #[test]
    fn suspension_generators_commute(
        w in word_for(2, 6),
        b_len in 1u64..12,
        t_len in 1u64..60,
        b in 0u64..12,
        t in 0u64..60,
        d in -2i64..=2,
    ) {
        let cycle = |y: &[Sym]| {
            let p = y.len() as i64;
            (0..p).map(|j| 1 - y[(j + 1 - d).rem_euclid(p) as usize]).collect::<Vec<Sym>>()
        };
        let s = SuspensionState {
            y: Configuration::Periodic { word: w },
            b: b % b_len,
            t: t % t_len,
        };
        let go = |s: &SuspensionState, g| suspension_step(s, g, &cycle, b_len, t_len);
        prop_assert_eq!(
            go(&go(&s, Generator::Sigma), Generator::Phi),
            go(&go(&s, Generator::Phi), Generator::Sigma)
        );
    }
}
