//! Random valid automata and independent oracles shared by the integration
//! tests.

#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use codiag::automaton::{
    project, validate, AutomatonBuilder, EventId, ObservationMask, StateId, StochasticAutomaton, Trace,
};
use codiag::observer::Label;
use codiag::stochastic::{stochastic_diagnoser_for_mask, MarkovChain};
use codiag::Error;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MAX_STATES: usize = 6;
pub const MAX_EVENTS: usize = 5;

/// One draw: 1..=6 states, 2..=5 events of which `f` is the only failure
/// event, each other event observable at a random subset of the sites.
/// Returns `None` when the draw is not admissible.
pub fn random_automaton(rng: &mut ChaCha8Rng, sites: usize) -> Option<StochasticAutomaton> {
    let n_states = rng.random_range(1..=MAX_STATES);
    let n_events = rng.random_range(2..=MAX_EVENTS);
    let states: Vec<String> = (0..n_states).map(|i| i.to_string()).collect();
    let mut b = AutomatonBuilder::new(sites);
    b.states(states.iter().map(String::as_str));
    b.failure_event("f", "F");
    let mut names = vec!["f".to_string()];
    for i in 1..n_events {
        let name = format!("e{i}");
        let observed: Vec<usize> = (1..=sites).filter(|_| rng.random_bool(0.6)).collect();
        b.event(&name, &observed);
        names.push(name);
    }
    for (i, q) in states.iter().enumerate() {
        // the initial state usually offers the failure so most draws can fail
        let mut chosen: Vec<usize> = (0..n_events)
            .filter(|&e| rng.random_bool(if i == 0 && e == 0 { 0.8 } else { 0.45 }))
            .collect();
        if chosen.is_empty() {
            chosen.push(rng.random_range(0..n_events));
        }
        let weights: Vec<f64> = chosen.iter().map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = weights.iter().sum();
        for (e, w) in chosen.iter().zip(&weights) {
            let target = &states[rng.random_range(0..n_states)];
            b.transition(q, &names[*e], target, w / total);
        }
    }
    let a = b.build().ok()?;
    validate(&a).is_admissible().then_some(a)
}

pub struct Corpus {
    pub automata: Vec<StochasticAutomaton>,
    /// Admissible draws dropped because some site's unobservable region
    /// traps probability mass.
    pub divergent: usize,
}

/// `count` admissible automata with `sites` sites whose site and global
/// stochastic diagnosers all exist, deterministically from `seed`.
pub fn corpus(count: usize, sites: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut automata = Vec::with_capacity(count);
    let mut divergent = 0;
    while automata.len() < count {
        let Some(a) = random_automaton(&mut rng, sites) else {
            continue;
        };
        let mut masks = a.site_masks();
        masks.push(a.global_mask());
        let ok = masks.iter().all(|m| match stochastic_diagnoser_for_mask(&a, m) {
            Err(Error::DivergentUnobservableMass { .. }) => false,
            other => {
                other.unwrap();
                true
            }
        });
        if ok {
            automata.push(a);
        } else {
            divergent += 1;
        }
    }
    Corpus { automata, divergent }
}

pub fn automaton_from_seed(seed: u64, sites: usize) -> StochasticAutomaton {
    corpus(1, sites, seed).automata.pop().unwrap()
}

/// Every `(state, label)` some plant trace with observation `observed`
/// leads to. With `settled`, only traces that are empty or end in an
/// observable event count; otherwise trailing unobservable events are
/// allowed. Explores the product of the plant with the positions of the
/// observed word.
pub fn inverse_projection(
    a: &StochasticAutomaton,
    mask: &ObservationMask,
    observed: &Trace,
    settled: bool,
) -> BTreeSet<(StateId, Label)> {
    // node: (state, label, position in word, last move was observable or start)
    let start = (a.initial(), Label::NORMAL, 0usize, true);
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some((q, l, pos, _)) = queue.pop_front() {
        for t in a.outgoing(q) {
            let l2 = l.after(a.event(t.event).failure_class);
            let node = if mask.observes(t.event) {
                if observed.0.get(pos) != Some(&t.event) {
                    continue;
                }
                (t.target, l2, pos + 1, true)
            } else {
                (t.target, l2, pos, false)
            };
            if seen.insert(node) {
                queue.push_back(node);
            }
        }
    }
    seen.into_iter()
        .filter(|&(_, _, pos, fresh)| pos == observed.len() && (fresh || !settled))
        .map(|(q, l, _, _)| (q, l))
        .collect()
}

/// Distinct observations of all plant traces of length at most `max_len`.
pub fn observations_up_to(a: &StochasticAutomaton, mask: &ObservationMask, max_len: usize) -> BTreeSet<Trace> {
    let mut out = BTreeSet::from([Trace::empty()]);
    let mut frontier: BTreeSet<(StateId, Trace)> = BTreeSet::from([(a.initial(), Trace::empty())]);
    for _ in 0..max_len {
        let mut next = BTreeSet::new();
        for (q, obs) in &frontier {
            for t in a.outgoing(*q) {
                let mut o = obs.clone();
                if mask.observes(t.event) {
                    o.push(t.event);
                }
                next.insert((t.target, o));
            }
        }
        out.extend(next.iter().map(|(_, o)| o.clone()));
        frontier = next;
    }
    out
}

pub fn projects_equal(a: &Trace, b: &Trace, mask: &ObservationMask) -> bool {
    project(a, mask) == project(b, mask)
}

/// Random row-stochastic chain on 1..=12 nodes with sparse support.
pub fn random_chain(rng: &mut ChaCha8Rng) -> MarkovChain {
    let n = rng.random_range(1..=12);
    let density = rng.random_range(0.05..0.5);
    let rows = (0..n)
        .map(|_| {
            let mut targets: Vec<usize> = (0..n).filter(|_| rng.random_bool(density)).collect();
            if targets.is_empty() {
                targets.push(rng.random_range(0..n));
            }
            let weights: Vec<f64> = targets.iter().map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = weights.iter().sum();
            targets.into_iter().zip(weights).map(|(t, w)| (t, w / total)).collect()
        })
        .collect();
    MarkovChain::new(rows)
}

/// Probability of ever returning to `x` after leaving it, from a linear
/// solve for hitting probabilities over the nodes that can reach `x`.
pub fn return_probability(chain: &MarkovChain, x: usize) -> f64 {
    let n = chain.len();
    // nodes other than x that can reach x
    let mut reaches = vec![false; n];
    let mut changed = true;
    while changed {
        changed = false;
        for y in 0..n {
            if y != x && !reaches[y] && chain.rows[y].iter().any(|&(z, w)| w > 0.0 && (z == x || reaches[z])) {
                reaches[y] = true;
                changed = true;
            }
        }
    }
    let idx: Vec<usize> = (0..n).filter(|&y| reaches[y]).collect();
    let pos = |y: usize| idx.iter().position(|&v| v == y);
    let k = idx.len();
    let mut m = DMatrix::<f64>::identity(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    for (i, &y) in idx.iter().enumerate() {
        for &(z, w) in &chain.rows[y] {
            if z == x {
                rhs[i] += w;
            } else if let Some(j) = pos(z) {
                m[(i, j)] -= w;
            }
        }
    }
    let hit = if k == 0 {
        DVector::zeros(0)
    } else {
        m.lu().solve(&rhs).expect("nodes reaching x leak towards x")
    };
    chain.rows[x]
        .iter()
        .map(|&(z, w)| if z == x { w } else { pos(z).map_or(0.0, |j| w * hit[j]) })
        .sum()
}

/// All events of the automaton in id order.
pub fn event_ids(a: &StochasticAutomaton) -> Vec<EventId> {
    a.event_ids().collect()
}
