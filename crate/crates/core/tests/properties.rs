use nalgebra::DMatrix;
use proptest::prelude::*;
use sckmc::csl::{check_property, parse_property, Arith, ArithOp, CmpOp, CslProperty, StatePredicate};
use sckmc::ctmc::{transient_distribution, Distribution, RateMatrix};
use sckmc::model::{parse_model, SckModel, State};
use sckmc::ssa::{simulate, EventSchedule};
use sckmc::stategraph::{build_approximate_graph, BuildOptions, StateGraph, TerminationThreshold};

const TOGGLE: &str = include_str!("../../../models/toggle.sck");
const TOGGLE_RESPONSE: &str = include_str!("../../../models/toggle_response.sck");

fn birth_death(kb: f64, kd: f64, x0: u32) -> SckModel {
    parse_model(&format!(
        "param kb = {kb}\nparam kd = {kd}\nspecies X = {x0}\n\
         reaction birth: {{X: 1}} @ kb\nreaction death: {{X: -1}} @ kd * [X]\n"
    ))
    .unwrap()
}

fn graph(model: &SckModel, delta: f64) -> StateGraph {
    build_approximate_graph(
        model,
        TerminationThreshold::new(delta).unwrap(),
        &BuildOptions::default(),
    )
    .unwrap()
}

fn toggle_state() -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0u32..500, 5)
}

fn arith() -> impl Strategy<Value = Arith> {
    let leaf = prop_oneof![
        (0u32..1000).prop_map(|n| Arith::Num(f64::from(n))),
        prop::sample::select(vec!["LacI", "TetR", "GFP"]).prop_map(|s| Arith::Species(s.into())),
    ];
    leaf.prop_recursive(3, 8, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Arith::Neg(Box::new(a))),
            (
                prop::sample::select(vec![ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div]),
                inner.clone(),
                inner
            )
                .prop_map(|(op, a, b)| Arith::Binary(op, Box::new(a), Box::new(b))),
        ]
    })
}

fn predicate() -> impl Strategy<Value = StatePredicate> {
    let ops = vec![CmpOp::Lt, CmpOp::Le, CmpOp::Eq, CmpOp::Ne, CmpOp::Ge, CmpOp::Gt];
    let leaf = prop_oneof![
        Just(StatePredicate::True),
        Just(StatePredicate::False),
        (prop::sample::select(ops), arith(), arith())
            .prop_map(|(op, a, b)| StatePredicate::Compare(op, a, b)),
    ];
    leaf.prop_recursive(3, 10, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|p| StatePredicate::Not(Box::new(p))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| StatePredicate::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| StatePredicate::Or(Box::new(a), Box::new(b))),
        ]
    })
}

/// Random generator over `n` states with rates in `[0, 5)`.
fn chain() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (2usize..7).prop_flat_map(|n| (Just(n), prop::collection::vec(0.0f64..5.0, n * n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn propensities_are_finite_and_non_negative(counts in toggle_state()) {
        let m = parse_model(TOGGLE).unwrap();
        let s = State::new(counts);
        for r in 0..m.reaction_count() {
            let a = m.propensity(r, &s).unwrap();
            prop_assert!(a.is_finite() && a >= 0.0, "reaction {r}: {a}");
        }
    }

    #[test]
    fn applying_then_reversing_recovers_state(counts in toggle_state()) {
        let m = parse_model(TOGGLE).unwrap();
        let s = State::new(counts);
        for (r, reaction) in m.reactions().iter().enumerate() {
            if let Ok(next) = m.apply(r, &s) {
                let back: Vec<i64> = reaction.state_change.iter().map(|v| -v).collect();
                prop_assert_eq!(next.offset(&back), Some(s.clone()));
            }
        }
    }

    #[test]
    fn boundary_species_never_change(counts in toggle_state()) {
        let m = parse_model(TOGGLE_RESPONSE).unwrap();
        let s = State::new(counts);
        let boundary: Vec<usize> = m.species().iter().enumerate()
            .filter(|(_, sp)| sp.boundary).map(|(i, _)| i).collect();
        prop_assert!(!boundary.is_empty());
        for r in 0..m.reaction_count() {
            if let Ok(next) = m.apply(r, &s) {
                for &b in &boundary {
                    prop_assert_eq!(next.get(b), s.get(b));
                }
            }
        }
    }

    #[test]
    fn model_display_round_trips(kb in 0.01f64..10.0, kd in 0.001f64..2.0, x0 in 0u32..50) {
        let m = birth_death(kb, kd, x0);
        prop_assert_eq!(parse_model(&m.to_string()).unwrap(), m);
    }

    #[test]
    fn predicate_display_round_trips(p in predicate()) {
        let text = format!("F(t <= 1, {p})");
        let parsed = parse_property(&text).unwrap();
        match parsed {
            CslProperty::Finally { target, .. } => prop_assert_eq!(target, p),
            other => prop_assert!(false, "parsed as {other:?}"),
        }
    }

    #[test]
    fn property_display_round_trips(
        p in predicate(), q in predicate(), a in 0u32..100, w in 1u32..100,
    ) {
        let text = format!("U(t >= {a} & t <= {}, {p}, {q})", a + w);
        let parsed = parse_property(&text).unwrap();
        prop_assert_eq!(parse_property(&parsed.to_string()).unwrap(), parsed);
    }

    #[test]
    fn transient_matches_matrix_exponential((n, rates) in chain(), t in 0.0f64..3.0) {
        let entries: Vec<(usize, usize, f64)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .zip(&rates)
            .filter(|((i, j), _)| i != j)
            .map(|((i, j), &r)| (i, j, r))
            .collect();
        let m = RateMatrix::from_entries(n, entries.iter().copied(), None).unwrap();
        let mut q = DMatrix::<f64>::zeros(n, n);
        for &(i, j, r) in &entries {
            q[(i, j)] += r;
            q[(i, i)] -= r;
        }
        let tol = 1e-10;
        let d = transient_distribution(&m, &Distribution::point(n, 0).unwrap(), t, tol).unwrap();
        let e = (q * t).exp();
        let total = d.total();
        prop_assert!(total >= 1.0 - tol && total <= 1.0 + 1e-12, "{total}");
        for j in 0..n {
            prop_assert!((d.probabilities()[j] - e[(0, j)]).abs() <= 10.0 * tol,
                "state {j}: {} vs {}", d.probabilities()[j], e[(0, j)]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn indicators_in_unit_interval(delta in 1e-9f64..1e-2, kb in 0.5f64..4.0, kd in 0.05f64..0.5) {
        let g = graph(&birth_death(kb, kd, 0), delta);
        prop_assert!(g.kappa().iter().all(|k| (0.0..=1.0).contains(k)));
        prop_assert!(g.kappa_next().iter().all(|k| (0.0..=1.0).contains(k)));
    }

    #[test]
    fn state_counts_never_shrink(delta in 1e-9f64..1e-2, kb in 0.5f64..4.0, kd in 0.05f64..0.5) {
        let g = graph(&birth_death(kb, kd, 0), delta);
        let counts = &g.report().state_counts;
        prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
        prop_assert_eq!(*counts.last().unwrap(), g.state_count());
    }

    #[test]
    fn closed_graph_out_degree_matches_enabled_reactions(
        delta in 1e-9f64..1e-3, kb in 0.5f64..4.0, kd in 0.05f64..0.5, x0 in 0u32..20,
    ) {
        let m = birth_death(kb, kd, x0);
        let g = graph(&m, delta);
        for (i, s) in g.states().iter().enumerate() {
            let enabled = (0..m.reaction_count())
                .filter(|&r| m.propensity(r, s).unwrap() > 0.0)
                .count();
            prop_assert_eq!(g.successors(i).len(), enabled, "state {}", s);
        }
        let abs = g.absorbing_index().unwrap();
        prop_assert!(g.successors(abs).is_empty());
    }

    #[test]
    fn bounds_ordered_and_monotone_in_horizon(
        b in 0.5f64..40.0, extra in 0.0f64..20.0, k in 1u32..15, delta in 1e-9f64..1e-4,
    ) {
        let m = birth_death(1.0, 0.1, 0);
        let g = graph(&m, delta);
        let p1 = parse_property(&format!("F(t <= {b}, X >= {k})")).unwrap();
        let p2 = p1.with_upper(b + extra);
        let r1 = check_property(&m, &g, &p1, 1e-10).unwrap();
        let r2 = check_property(&m, &g, &p2, 1e-10).unwrap();
        prop_assert!(r1.lower <= r1.upper && r2.lower <= r2.upper);
        prop_assert!(r1.lower >= 0.0 && r1.upper <= 1.0 + 1e-12);
        prop_assert!(r2.lower >= r1.lower - 2e-10, "{r1:?} {r2:?}");
    }

    #[test]
    fn simulation_is_deterministic_per_seed(seed in any::<u64>()) {
        let m = parse_model(TOGGLE_RESPONSE).unwrap();
        let a = simulate(&m, 500.0, &EventSchedule::default(), seed, 50.0).unwrap();
        let b = simulate(&m, 500.0, &EventSchedule::default(), seed, 50.0).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.times.len(), 11);
        let iptg = m.species_index("IPTG").unwrap();
        prop_assert!(a.states.iter().all(|s| s.get(iptg) == 100));
    }
}
