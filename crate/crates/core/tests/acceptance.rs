//! Acceptance criteria, one line of output each. Runs without the libtest
//! harness so the lines are always shown; exits non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use codiag::automaton::{deduce_dfa, SiteId, StochasticAutomaton};
use codiag::codiagnoser::{analyze_codiagnosability, build_codiagnoser, check_codiagnosability, enumerate_cycles};
use codiag::fixtures;
use codiag::observer::{build_logical_diagnoser, condition_function, Label};
use codiag::stochastic::{
    build_stochastic_diagnoser, classify_recurrence, is_diagnosable_centralized, stochastic_diagnoser_for_mask,
    StochasticDiagnoser,
};
use codiag::verifier::{decay_curve, witness_probability, DecayMode, NonDetectionQuery, Verifier, DECAY_THRESHOLD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MATRIX_TOLERANCE: f64 = 1e-9;
const CLOSED_FORM_TOLERANCE: f64 = 1e-9;
const RETURN_TOLERANCE: f64 = 1e-6;
const SAMPLING_SIGMAS: f64 = 4.0;
const SAMPLING_TRIALS: u64 = 10_000;
const CORPUS_SIZE: usize = 200;
const CORPUS_SEED: u64 = 0x5eed_c0d1a6;
const TRACE_BOUND: usize = 8;
const CHAIN_COUNT: usize = 300;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<String, String> {
    let took = start.elapsed();
    ensure(took < limit, format!("took {took:?}, limit {limit:?}"))?;
    Ok(format!("{took:.2?}"))
}

fn estimate_id(a: &StochasticAutomaton, sd: &StochasticDiagnoser, compact: &str) -> Result<usize, String> {
    sd.logical()
        .states()
        .iter()
        .position(|e| e.render_compact(a) == compact)
        .ok_or(format!("no estimate {compact}"))
}

fn check_matrix(
    a: &StochasticAutomaton,
    sd: &StochasticDiagnoser,
    name: &str,
    from: &str,
    event: &str,
    expected: &[&[f64]],
) -> Result<(), String> {
    let id = estimate_id(a, sd, from)?;
    let m = sd
        .matrix(id, a.event_id(event).map_err(|e| e.to_string())?)
        .ok_or(format!("{name}: missing matrix"))?;
    let got = m.to_rows();
    let shape_ok = got.len() == expected.len() && got.iter().zip(expected).all(|(g, e)| g.len() == e.len());
    ensure(shape_ok, format!("{name}: shape {got:?}"))?;
    for (g, e) in got.iter().flatten().zip(expected.iter().flat_map(|r| r.iter())) {
        ensure(
            (g - e).abs() <= MATRIX_TOLERANCE,
            format!("{name}: {got:?} vs {expected:?}"),
        )?;
    }
    Ok(())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let a = fixtures::split_detection();
    let v = check_codiagnosability(&a, &a.site_masks(), a.class_id("F").unwrap()).map_err(|e| e.to_string())?;
    ensure(v.codiagnosable, "expected codiagnosable")?;
    ensure(
        v.per_site_centralized == [false, false],
        format!("per-site {:?}", v.per_site_centralized),
    )?;
    let t = within_time(start, Duration::from_secs(1))?;
    Ok(format!("codiagnosable, neither site alone diagnoses ({t})"))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let b = fixtures::shared_blind_spot();
    let an = analyze_codiagnosability(&b, &b.site_masks(), b.class_id("F").unwrap()).map_err(|e| e.to_string())?;
    ensure(!an.verdict.codiagnosable, "expected not codiagnosable")?;
    let cycle = an.verdict.witness_cycle.as_ref().ok_or("missing witness")?;
    ensure(cycle.len() == 1, format!("witness has {} states", cycle.len()))?;
    let state = an.codiagnoser.render_state(&b, cycle[0].0);
    let event = cycle[0].1.render(&b, "eps");
    ensure(
        state == "({2F,3F,4N},{2F,3F,4N,5F},{2F,3F,4N})" && event == "(a,a,a)",
        format!("witness {state} {event}"),
    )?;
    let t = within_time(start, Duration::from_secs(1))?;
    Ok(format!("not codiagnosable, self-loop on {state} under {event} ({t})"))
}

fn criterion_3() -> Outcome {
    let a = fixtures::split_detection();
    let s1 = build_stochastic_diagnoser(&a, SiteId(0)).map_err(|e| e.to_string())?;
    let mixed = "2F 3F 4N 5F";
    check_matrix(&a, &s1, "ex3 site1 0N/a", "0N", "a", &[&[0.35, 0.15, 0.2, 0.24]])?;
    check_matrix(&a, &s1, "ex3 site1 0N/b", "0N", "b", &[&[0.06]])?;
    check_matrix(
        &a,
        &s1,
        "ex3 site1 mixed/a",
        mixed,
        "a",
        &[
            &[0.7, 0.3, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 0.0, 0.0, 0.8],
        ],
    )?;
    check_matrix(
        &a,
        &s1,
        "ex3 site1 mixed/b",
        mixed,
        "b",
        &[&[0.0], &[0.0], &[0.0], &[0.2]],
    )?;

    let b = fixtures::shared_blind_spot();
    let b1 = build_stochastic_diagnoser(&b, SiteId(0)).map_err(|e| e.to_string())?;
    check_matrix(&b, &b1, "ex4 site1 0N/a", "0N", "a", &[&[0.392, 0.168, 0.14, 0.24]])?;
    let b2 = build_stochastic_diagnoser(&b, SiteId(1)).map_err(|e| e.to_string())?;
    check_matrix(&b, &b2, "ex4 site2 1N/a", "1N", "a", &[&[0.56, 0.24, 0.2]])?;
    check_matrix(
        &b,
        &b2,
        "ex4 site2 2F3F4N/a",
        "2F 3F 4N",
        "a",
        &[&[0.7, 0.3, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]],
    )?;
    Ok("all seven matrices within 1e-9".into())
}

fn criterion_4() -> Outcome {
    let sets = |a: &StochasticAutomaton| -> BTreeSet<String> {
        build_logical_diagnoser(&deduce_dfa(a), &a.global_mask())
            .states()
            .iter()
            .map(|e| e.render_compact(a))
            .collect()
    };
    let owned = |xs: &[&str]| -> BTreeSet<String> { xs.iter().map(|s| s.to_string()).collect() };
    let a = fixtures::split_detection();
    let b = fixtures::shared_blind_spot();
    ensure(
        sets(&a) == owned(&["0N", "3F", "6F", "2F 4N 5F"]),
        format!("ex1 global {:?}", sets(&a)),
    )?;
    ensure(
        sets(&b) == owned(&["0N", "5F", "6F", "1N", "2F 3F 4N"]),
        format!("ex4 global {:?}", sets(&b)),
    )?;
    for (m, expected) in [
        (
            &a,
            owned(&[
                "({3F},{2F,3F,4N,5F},{3F})",
                "({2F,4N,5F},{2F,3F,4N,5F},{2F,4N,5F,6F})",
                "({6F},{6F},{2F,4N,5F,6F})",
            ]),
        ),
        (
            &b,
            owned(&[
                "({2F,3F,4N},{2F,3F,4N,5F},{2F,3F,4N})",
                "({5F},{2F,3F,4N,5F},{5F,6F})",
                "({6F},{6F},{5F,6F})",
            ]),
        ),
    ] {
        let c = build_codiagnoser(m, &m.site_masks());
        let cycles = enumerate_cycles(&c, |_| true);
        ensure(cycles.len() == 3, format!("{} cycles", cycles.len()))?;
        let mut loops = BTreeSet::new();
        for cy in &cycles {
            ensure(
                cy.len() == 1 && cy[0].1.render(m, "eps") == "(a,a,a)",
                "cycle is not an (a,a,a) self-loop",
            )?;
            loops.insert(c.render_state(m, cy[0].0));
        }
        ensure(loops == expected, format!("cycle states {loops:?}"))?;
    }
    Ok("global diagnosers and both cycle inventories match".into())
}

fn criterion_5() -> Outcome {
    let a = fixtures::split_detection();
    let t = |s: &str| a.trace(s).unwrap();
    for n in 2..=12 {
        let tail = vec!["a"; n - 2].join(" ");
        let c1 = format!("a c {tail}");
        let c2 = format!("a b {tail}");
        let p1 = witness_probability(&a, &t("d f"), &t(c1.trim())).map_err(|e| e.to_string())?;
        let p2 = witness_probability(&a, &t("f"), &t(c2.trim())).map_err(|e| e.to_string())?;
        ensure(
            (p1 - 0.21).abs() < 1e-12 && (p2 - 0.16).abs() < 1e-12,
            format!("n={n}: {p1} {p2}"),
        )?;
    }
    let v = Verifier::new(&a);
    for n in 1..=12 {
        let q = |seed: &str, site| NonDetectionQuery {
            seed: t(seed),
            horizon: n,
            site: SiteId(site),
            class: a.class_id("F").unwrap(),
        };
        let p1 = v.exact(&q("f", 0)).map_err(|e| e.to_string())?;
        let p2 = v.exact(&q("d f", 1)).map_err(|e| e.to_string())?;
        let e1 = 0.8f64.powi(n as i32);
        let e2 = 0.7f64.powi(n as i32);
        ensure(
            (p1 - e1).abs() <= CLOSED_FORM_TOLERANCE && (p2 - e2).abs() <= CLOSED_FORM_TOLERANCE,
            format!("n={n}: {p1} vs {e1}, {p2} vs {e2}"),
        )?;
    }
    Ok("0.21 and 0.16 witnesses; 0.8^n and 0.7^n for n=1..12".into())
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let a = fixtures::split_detection();
    let b = fixtures::shared_blind_spot();
    let sites = [SiteId(0), SiteId(1)];
    let mut summary = Vec::new();
    for (model, name) in [(&a, "ex1"), (&b, "ex4")] {
        let f = model.class_id("F").unwrap();
        let exact = decay_curve(model, &sites, f, 25, DecayMode::Exact).map_err(|e| e.to_string())?;
        let sampled = decay_curve(
            model,
            &sites,
            f,
            25,
            DecayMode::Sampled {
                trials: SAMPLING_TRIALS,
                rng_seed: 2024,
            },
        )
        .map_err(|e| e.to_string())?;
        for (ex, sa) in exact.iter().zip(&sampled) {
            for (site, pts) in &ex.per_site {
                for (pe, ps) in pts.iter().zip(&sa.per_site[site]) {
                    let se = (pe.probability * (1.0 - pe.probability) / SAMPLING_TRIALS as f64).sqrt();
                    ensure(
                        (pe.probability - ps.probability).abs() <= SAMPLING_SIGMAS * se + 1e-12,
                        format!(
                            "{name} seed {} site {site} n={}: sampled {} exact {}",
                            model.render_trace(&ex.seed),
                            pe.n,
                            ps.probability,
                            pe.probability
                        ),
                    )?;
                }
            }
        }
        if name == "ex1" {
            for c in &exact {
                let m = c.final_min().unwrap();
                ensure(
                    m < DECAY_THRESHOLD,
                    format!("ex1 seed {} ends at {m}", a.render_trace(&c.seed)),
                )?;
                summary.push(format!("{}:{m:.2e}", a.render_trace(&c.seed)));
            }
        } else {
            let df = exact
                .iter()
                .find(|c| b.render_trace(&c.seed) == "d f")
                .ok_or("ex4 seed d f missing")?;
            let floor = df.min_envelope.iter().map(|&(_, p)| p).fold(f64::INFINITY, f64::min);
            ensure(floor >= 0.2, format!("ex4 d f envelope dips to {floor}"))?;
            summary.push(format!("ex4 d f floor {floor}"));
        }
    }
    let t = within_time(start, Duration::from_secs(10))?;
    Ok(format!("{} ({t})", summary.join(", ")))
}

fn criterion_7() -> Outcome {
    let corpus = common::corpus(CORPUS_SIZE, 2, CORPUS_SEED);
    let mut yes = 0;
    for (i, a) in corpus.automata.iter().enumerate() {
        let global = a.global_mask();
        let f = a.class_id("F").unwrap();
        let v = check_codiagnosability(a, std::slice::from_ref(&global), f).map_err(|e| e.to_string())?;
        let sd = stochastic_diagnoser_for_mask(a, &global).map_err(|e| e.to_string())?;
        ensure(
            v.codiagnosable == is_diagnosable_centralized(&sd, f),
            format!("instance {i} disagrees"),
        )?;
        yes += usize::from(v.codiagnosable);
    }
    Ok(format!(
        "{} instances agree ({yes} diagnosable; {} divergent draws skipped)",
        corpus.automata.len(),
        corpus.divergent
    ))
}

fn criterion_8() -> Outcome {
    let corpus = common::corpus(CORPUS_SIZE, 2, CORPUS_SEED);
    let mut premises = 0;
    for (i, a) in corpus.automata.iter().enumerate() {
        let v = check_codiagnosability(a, &a.site_masks(), a.class_id("F").unwrap()).map_err(|e| e.to_string())?;
        if v.per_site_centralized.iter().any(|&d| d) {
            premises += 1;
            ensure(
                v.codiagnosable,
                format!("instance {i}: a site diagnoses alone but verdict is false"),
            )?;
        }
    }
    ensure(premises > 0, "no instance exercises the premise")?;
    Ok(format!(
        "{premises} instances with a diagnosing site, zero counterexamples"
    ))
}

fn criterion_9() -> Outcome {
    let corpus = common::corpus(CORPUS_SIZE, 2, CORPUS_SEED);
    let mut checked = 0usize;
    for (i, a) in corpus.automata.iter().enumerate() {
        let dfa = deduce_dfa(a);
        let f = a.class_id("F").unwrap();
        let mut masks = a.site_masks();
        masks.push(a.global_mask());
        for mask in &masks {
            let diag = build_logical_diagnoser(&dfa, mask);
            for obs in common::observations_up_to(a, mask, TRACE_BOUND) {
                let id = diag.run(&obs).ok_or(format!("instance {i}: observation undefined"))?;
                let expected = common::inverse_projection(a, mask, &obs, true);
                let got: BTreeSet<(_, Label)> = diag.estimate(id).members().iter().copied().collect();
                ensure(
                    got == expected,
                    format!("instance {i}: estimate mismatch for {}", a.render_trace(&obs)),
                )?;
                let all_failed = common::inverse_projection(a, mask, &obs, false)
                    .iter()
                    .all(|&(_, l)| l.contains(f));
                let cond = condition_function(&diag, &obs, f).map_err(|e| e.to_string())?;
                ensure(cond == all_failed, format!("instance {i}: condition mismatch"))?;
                checked += 1;
            }
        }
    }
    Ok(format!(
        "{checked} observations across {} instances",
        corpus.automata.len()
    ))
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(CORPUS_SEED);
    let mut recurrent = 0;
    let mut nodes = 0;
    for i in 0..CHAIN_COUNT {
        let chain = common::random_chain(&mut rng);
        let report = classify_recurrence(&chain);
        for x in 0..chain.len() {
            let rho = common::return_probability(&chain, x);
            let by_algebra = (rho - 1.0).abs() <= RETURN_TOLERANCE;
            ensure(
                by_algebra == report.is_recurrent(x),
                format!("chain {i} node {x}: rho {rho}, scc says {}", report.is_recurrent(x)),
            )?;
            recurrent += usize::from(by_algebra);
            nodes += 1;
        }
    }
    Ok(format!("{CHAIN_COUNT} chains, {nodes} nodes ({recurrent} recurrent)"))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("1 split-detection end to end", criterion_1),
        ("2 shared-blind-spot end to end", criterion_2),
        ("3 stochastic diagnoser matrices", criterion_3),
        ("4 diagnoser and codiagnoser topologies", criterion_4),
        ("5 probabilistic witnesses and closed forms", criterion_5),
        ("6 behavioral cross-validation", criterion_6),
        ("7 single-site reduction", criterion_7),
        ("8 one diagnosing site suffices", criterion_8),
        ("9 diagnoser against inverse projection", criterion_9),
        ("10 recurrence against return probabilities", criterion_10),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("criterion {name}: PASS - {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {name}: FAIL - {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
