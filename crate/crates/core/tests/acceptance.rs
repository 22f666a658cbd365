//! End-to-end acceptance checks on the bundled models. Prints one line per
//! check and one PASS/FAIL line per criterion; exits non-zero if any fail.

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use sckmc::csl::{check_property, parse_property, CslProperty};
use sckmc::ctmc::{transient_series, Distribution, ProbabilityBound, RateMatrix, DEFAULT_TOLERANCE};
use sckmc::model::{parse_model, SckModel, State};
use sckmc::ssa::{self, EventSchedule};
use sckmc::stategraph::{
    build_approximate_graph, build_bounded_reference, depth_indicator_sums, BuildOptions,
    SpeciesBounds, StateGraph, TerminationThreshold,
};

const TOGGLE: &str = include_str!("../../../models/toggle.sck");
const TOGGLE_RESPONSE: &str = include_str!("../../../models/toggle_response.sck");
const TOGGLE_FAILURE: &str = include_str!("../../../models/toggle_failure.sck");
const BIRTH_DEATH: &str = include_str!("../../../models/birth_death.sck");
const PROPERTY: &str = include_str!("../../../models/toggle.csl");

const DELTAS: [f64; 4] = [1e-5, 1e-6, 1e-7, 1e-9];

/// Published figures for one toggle experiment.
struct Published {
    p_ref: f64,
    epsilons: [f64; 4],
    states: [usize; 4],
}

const RESPONSE: Published = Published {
    p_ref: 0.991789007,
    epsilons: [1.20e-3, 8.84e-5, 7.84e-6, 5.98e-8],
    states: [6171, 7394, 8623, 11394],
};

const FAILURE: Published = Published {
    p_ref: 0.013098589,
    epsilons: [4.46e-3, 5.03e-4, 6.89e-5, 1.73e-7],
    states: [2703, 3489, 4306, 6697],
};

struct Criterion {
    checks: Vec<(bool, String)>,
}

impl Criterion {
    fn new() -> Self {
        Criterion { checks: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: String) {
        println!("    {} {what}", if ok { "ok  " } else { "FAIL" });
        self.checks.push((ok, what));
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|(ok, _)| *ok)
    }
}

struct ToggleRun {
    model: SckModel,
    reference: StateGraph,
    p_ref: f64,
    graphs: Vec<StateGraph>,
    bounds: Vec<ProbabilityBound>,
    elapsed: Duration,
}

fn property() -> CslProperty {
    let line = PROPERTY
        .lines()
        .find(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .expect("property line");
    parse_property(line).expect("bundled property parses")
}

fn toggle_run(text: &str, published: &Published, c: &mut Criterion) -> ToggleRun {
    let start = Instant::now();
    let prop = property();
    let full = parse_model(text).unwrap();
    let observed = prop.species();
    let observed: Vec<&str> = observed.iter().map(String::as_str).collect();
    let model = full.lump_reporters(&observed).unwrap();
    c.check(
        model.species_count() == full.species_count() - 1,
        format!(
            "reporter GFP lumped away: tracked species {:?}",
            model.species_names()
        ),
    );
    let bounds: Vec<(&str, u32)> = ["LacI", "TetR", "GFP"]
        .into_iter()
        .filter(|s| model.species_index(s).is_some())
        .map(|s| (s, 300))
        .collect();
    let reference = build_bounded_reference(
        &model,
        &SpeciesBounds::new(&model, &bounds).unwrap(),
        10_000_000,
    )
    .unwrap();
    c.check(
        reference.state_count() == 90_601,
        format!("reference states {} == 90601", reference.state_count()),
    );
    let rb = check_property(&model, &reference, &prop, DEFAULT_TOLERANCE).unwrap();
    let p_ref = rb.lower;
    c.check(
        (p_ref - published.p_ref).abs() <= 1e-6,
        format!(
            "p_ref {p_ref:.9} vs {:.9} (diff {:.3e}, tolerance 1e-6)",
            published.p_ref,
            (p_ref - published.p_ref).abs()
        ),
    );
    let mut graphs = Vec::new();
    let mut results = Vec::new();
    for (i, &delta) in DELTAS.iter().enumerate() {
        let g = build_approximate_graph(
            &model,
            TerminationThreshold::new(delta).unwrap(),
            &BuildOptions::default(),
        )
        .unwrap();
        let b = check_property(&model, &g, &prop, DEFAULT_TOLERANCE).unwrap();
        let slack = 2.0 * DEFAULT_TOLERANCE;
        c.check(
            b.lower <= p_ref + slack && p_ref <= b.upper + slack,
            format!(
                "delta {delta:e}: [{:.9}, {:.9}] contains p_ref {p_ref:.9}",
                b.lower, b.upper
            ),
        );
        let paper_eps = published.epsilons[i];
        let eps = b.epsilon();
        c.check(
            eps <= 2.0 * paper_eps && eps >= paper_eps / 2.0,
            format!("delta {delta:e}: epsilon {eps:.3e} within 2x of {paper_eps:.2e}"),
        );
        let want = published.states[i] as f64;
        let got = g.state_count() as f64;
        c.check(
            (got - want).abs() <= 0.1 * want,
            format!(
                "delta {delta:e}: {} states within 10% of {}",
                g.state_count(),
                published.states[i]
            ),
        );
        graphs.push(g);
        results.push(b);
    }
    let elapsed = start.elapsed();
    c.check(
        elapsed < Duration::from_secs(300),
        format!("runtime {:.1}s < 300s", elapsed.as_secs_f64()),
    );
    ToggleRun {
        model,
        reference,
        p_ref,
        graphs,
        bounds: results,
        elapsed,
    }
}

/// Dense generator assembled straight from the model's propensities over the
/// graph's states, with every exit from the state set sent to one extra
/// absorbing column.
fn dense_generator(model: &SckModel, states: &[State]) -> DMatrix<f64> {
    let n = states.len();
    let index: HashMap<&State, usize> = states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut q = DMatrix::<f64>::zeros(n + 1, n + 1);
    for (i, s) in states.iter().enumerate() {
        for r in 0..model.reaction_count() {
            let a = model.propensity(r, s).unwrap();
            if a == 0.0 {
                continue;
            }
            let target = model.apply(r, s).unwrap();
            let j = index.get(&target).copied().unwrap_or(n);
            if j != i {
                q[(i, j)] += a;
                q[(i, i)] -= a;
            }
        }
    }
    q
}

fn birth_death_criterion(c: &mut Criterion) -> (Duration, StateGraph, StateGraph, SckModel) {
    let start = Instant::now();
    let model = parse_model(BIRTH_DEATH).unwrap();
    let g = build_approximate_graph(
        &model,
        TerminationThreshold::new(1e-9).unwrap(),
        &BuildOptions::default(),
    )
    .unwrap();
    c.check(
        g.state_count() == 28,
        format!("delta 1e-9: {} states == 28", g.state_count()),
    );
    let times = [10.0, 20.0, 30.0, 40.0, 50.0];
    let m = RateMatrix::from_graph(&g).unwrap();
    let p0 = Distribution::point(m.dimension(), 0).unwrap();
    let series = transient_series(&m, &p0, &times, DEFAULT_TOLERANCE).unwrap();
    let q = dense_generator(&model, g.states());
    let mut worst_oracle: f64 = 0.0;
    for (d, &t) in series.iter().zip(&times) {
        let e = (&q * t).exp();
        for (j, p) in d.probabilities().iter().enumerate() {
            worst_oracle = worst_oracle.max((p - e[(0, j)]).abs());
        }
    }
    c.check(
        worst_oracle <= 1e-8,
        format!("max error vs dense matrix exponential {worst_oracle:.3e} <= 1e-8"),
    );

    let bounds = SpeciesBounds::new(&model, &[("X", 299)]).unwrap();
    let reference = build_bounded_reference(&model, &bounds, 10_000).unwrap();
    c.check(
        reference.state_count() == 300,
        format!("reference states {} == 300", reference.state_count()),
    );
    let rm = RateMatrix::from_graph(&reference).unwrap();
    let rp0 = Distribution::point(rm.dimension(), 0).unwrap();
    let rseries = transient_series(&rm, &rp0, &times, DEFAULT_TOLERANCE).unwrap();
    let mut worst_ref: f64 = 0.0;
    for (d, rd) in series.iter().zip(&rseries) {
        for (i, s) in g.states().iter().enumerate() {
            let j = reference.index_of(s).expect("approximate state in reference");
            worst_ref = worst_ref.max((d.probabilities()[i] - rd.probabilities()[j]).abs());
        }
    }
    c.check(
        worst_ref <= 1e-5,
        format!("max per-state error vs 300-state reference {worst_ref:.3e} <= 1e-5"),
    );
    let elapsed = start.elapsed();
    c.check(
        elapsed < Duration::from_secs(10),
        format!("runtime {:.2}s < 10s", elapsed.as_secs_f64()),
    );
    (elapsed, g, reference, model)
}

fn pi_monotone(g: &StateGraph) -> Result<usize, String> {
    let trace = depth_indicator_sums(g).map_err(|e| e.to_string())?;
    for w in trace.windows(2) {
        if w[1].sum > w[0].sum + 1e-12 {
            return Err(format!(
                "sum rose from {} (depth {}) to {} (depth {})",
                w[0].sum, w[0].depth, w[1].sum, w[1].depth
            ));
        }
    }
    Ok(trace.len())
}

fn mass_checks(g: &StateGraph, times: &[f64]) -> (bool, bool, f64, f64) {
    let m = RateMatrix::from_graph(g).unwrap();
    let abs = g.absorbing_index().unwrap();
    let p0 = Distribution::point(m.dimension(), 0).unwrap();
    let series = transient_series(&m, &p0, times, DEFAULT_TOLERANCE).unwrap();
    let mut mass_ok = true;
    let mut worst_mass: f64 = 0.0;
    let mut monotone = true;
    let mut last = 0.0;
    for d in &series {
        let total = d.total();
        worst_mass = worst_mass.max((1.0 - total).abs());
        mass_ok &= (1.0 - DEFAULT_TOLERANCE..=1.0 + 1e-12).contains(&total);
        let a = d.probabilities()[abs];
        monotone &= a >= last;
        last = a;
    }
    (mass_ok, monotone, worst_mass, last)
}

fn subset(small: &StateGraph, big: &StateGraph) -> bool {
    small.states().iter().all(|s| big.index_of(s).is_some())
}

fn mean_over(rows: &[Vec<f64>], col: usize, from: f64, to: f64) -> f64 {
    let picked: Vec<f64> = rows
        .iter()
        .filter(|r| r[0] >= from && r[0] <= to)
        .map(|r| r[col])
        .collect();
    picked.iter().sum::<f64>() / picked.len() as f64
}

fn main() -> ExitCode {
    let mut verdicts = Vec::new();
    let mut report = |n: usize, name: &str, c: &Criterion| {
        let pass = c.passed();
        println!(
            "criterion {n} ({name}): {}",
            if pass { "PASS" } else { "FAIL" }
        );
        verdicts.push((n, name.to_string(), pass));
    };

    println!("criterion 1: response-rate reference bracketing");
    let mut c1 = Criterion::new();
    let response = toggle_run(TOGGLE_RESPONSE, &RESPONSE, &mut c1);
    report(1, "response-rate reference bracketing", &c1);

    println!("criterion 2: failure-rate reproduction");
    let mut c2 = Criterion::new();
    let failure = toggle_run(TOGGLE_FAILURE, &FAILURE, &mut c2);
    report(2, "failure-rate reproduction", &c2);

    println!("criterion 3: birth-death transient accuracy");
    let mut c3 = Criterion::new();
    let (bd_elapsed, bd_graph, bd_reference, bd_model) = birth_death_criterion(&mut c3);
    report(3, "birth-death transient accuracy", &c3);

    println!("criterion 4: invariants");
    let mut c4 = Criterion::new();
    for (name, run) in [("response", &response), ("failure", &failure)] {
        for (g, delta) in run.graphs.iter().zip(DELTAS) {
            match pi_monotone(g) {
                Ok(n) => c4.check(true, format!("(a) {name} delta {delta:e}: {n} indicator sums non-increasing")),
                Err(e) => c4.check(false, format!("(a) {name} delta {delta:e}: {e}")),
            }
        }
    }
    match pi_monotone(&bd_graph) {
        Ok(n) => c4.check(true, format!("(a) birth-death: {n} indicator sums non-increasing")),
        Err(e) => c4.check(false, format!("(a) birth-death: {e}")),
    }
    let toggle_times: Vec<f64> = (0..=21).map(|i| 100.0 * i as f64).collect();
    let bd_times = [0.0, 10.0, 20.0, 30.0, 40.0, 50.0];
    for (name, g, times) in [
        ("response delta 1e-5", &response.graphs[0], &toggle_times[..]),
        ("failure delta 1e-5", &failure.graphs[0], &toggle_times[..]),
        ("birth-death delta 1e-9", &bd_graph, &bd_times[..]),
    ] {
        let (mass_ok, monotone, worst, abs_mass) = mass_checks(g, times);
        c4.check(
            mass_ok,
            format!("(b) {name}: mass within [1 - tol, 1] (worst deviation {worst:.2e})"),
        );
        c4.check(
            monotone,
            format!("(c) {name}: absorbing mass non-decreasing (final {abs_mass:.3e})"),
        );
    }
    for (name, run) in [("response", &response), ("failure", &failure)] {
        let eps: Vec<f64> = run.bounds.iter().map(|b| b.epsilon()).collect();
        c4.check(
            eps.windows(2).all(|w| w[1] <= w[0]),
            format!("(d) {name}: epsilon non-increasing as delta shrinks {eps:?}"),
        );
        for w in run.graphs.windows(2) {
            c4.check(
                subset(&w[0], &w[1]),
                format!(
                    "    {name}: {} states nested in {} states of the next threshold",
                    w[0].state_count(),
                    w[1].state_count()
                ),
            );
        }
        for (g, delta) in run.graphs.iter().zip(DELTAS) {
            c4.check(
                subset(g, &run.reference),
                format!("(e) {name} delta {delta:e}: approximate states within the reference"),
            );
        }
    }
    c4.check(
        subset(&bd_graph, &bd_reference),
        "(e) birth-death: approximate states within the reference".to_string(),
    );
    let again = build_approximate_graph(
        &response.model,
        TerminationThreshold::new(1e-6).unwrap(),
        &BuildOptions::default(),
    )
    .unwrap();
    c4.check(
        again == response.graphs[1],
        "(f) response delta 1e-6: rebuild is identical".to_string(),
    );
    let bd_again = build_approximate_graph(
        &bd_model,
        TerminationThreshold::new(1e-9).unwrap(),
        &BuildOptions::default(),
    )
    .unwrap();
    c4.check(
        bd_again == bd_graph,
        "(f) birth-death delta 1e-9: rebuild is identical".to_string(),
    );
    report(4, "invariants", &c4);

    println!("criterion 5: simulation cross-check");
    let mut c5 = Criterion::new();
    let ssa_model = parse_model(TOGGLE_RESPONSE).unwrap();
    let est = ssa::estimate_probability(&ssa_model, &property(), 10_000, 2024).unwrap();
    let window = response.bounds[0];
    let lo = window.lower - 3.0 * est.std_error;
    let hi = window.upper + 3.0 * est.std_error;
    c5.check(
        est.estimate >= lo && est.estimate <= hi,
        format!(
            "10^4 runs: estimate {:.5} (se {:.2e}) within [{lo:.5}, {hi:.5}]",
            est.estimate, est.std_error
        ),
    );
    let toggle = parse_model(TOGGLE).unwrap();
    let schedule = EventSchedule::new(
        &toggle,
        &[
            (5000.0, "IPTG", 100),
            (10000.0, "IPTG", 0),
            (15000.0, "aTc", 100),
            (20000.0, "aTc", 0),
        ],
    )
    .unwrap();
    let avg = ssa::average_trajectories(&toggle, 25_000.0, &schedule, 7, 100.0, 100).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("average.csv");
    ssa::write_average_csv(
        &avg,
        &toggle.species_names(),
        std::fs::File::create(&path).unwrap(),
    )
    .unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (lac, tet) = (col("LacI"), col("TetR"));
    let windows = [
        ("before IPTG", 4000.0, 5000.0, true),
        ("after IPTG", 9000.0, 10000.0, false),
        ("before aTc", 14000.0, 15000.0, false),
        ("after aTc", 19000.0, 20000.0, true),
    ];
    for (label, from, to, lac_high) in windows {
        let l = mean_over(&rows, lac, from, to);
        let t = mean_over(&rows, tet, from, to);
        let ok = if lac_high {
            l > 40.0 && t < 10.0
        } else {
            l < 10.0 && t > 40.0
        };
        c5.check(
            ok,
            format!(
                "averaged CSV {label} ({from}-{to}s): LacI {l:.1}, TetR {t:.1} ({})",
                if lac_high { "LacI high" } else { "LacI low" }
            ),
        );
    }
    report(5, "simulation cross-check", &c5);

    println!("criterion 6: desk-scale budgets");
    let mut c6 = Criterion::new();
    c6.check(
        response.elapsed < Duration::from_secs(300),
        format!("criterion 1 took {:.1}s (< 300s)", response.elapsed.as_secs_f64()),
    );
    c6.check(
        failure.elapsed < Duration::from_secs(300),
        format!("criterion 2 took {:.1}s (< 300s)", failure.elapsed.as_secs_f64()),
    );
    c6.check(
        bd_elapsed < Duration::from_secs(10),
        format!("criterion 3 took {:.2}s (< 10s)", bd_elapsed.as_secs_f64()),
    );
    report(6, "desk-scale budgets", &c6);

    println!();
    println!("reference p: response {:.9}, failure {:.9}", response.p_ref, failure.p_ref);
    let failed: Vec<_> = verdicts.iter().filter(|v| !v.2).collect();
    for (n, name, pass) in &verdicts {
        println!("{} criterion {n}: {name}", if *pass { "PASS" } else { "FAIL" });
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
