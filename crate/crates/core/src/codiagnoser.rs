//! The codiagnoser: a product of the global diagnoser with every local
//! diagnoser, where a local coordinate moves only on events its site
//! observes. Codiagnosability fails exactly when the product has a cycle of
//! states that are F-uncertain at every site and carry a uniform recurrent
//! component bearing the failure class.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::automaton::{
    deduce_dfa, validate, DeterministicAutomaton, EventId, FailureClass, ObservationMask, StochasticAutomaton, Trace,
};
use crate::error::{Error, Result};
use crate::graph;
use crate::observer::{classify, Certainty, Label, LogicalDiagnoser, Member};
use crate::stochastic::{
    diagnosable_with, stochastic_diagnoser_for_mask, ComponentNode, RecurrenceAnalysis, StochasticDiagnoser,
};

/// Estimate ids into the global and local diagnosers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CodiagState {
    pub global: usize,
    pub locals: Vec<usize>,
}

/// An observable event together with what each site sees of it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CodiagEvent {
    pub driver: EventId,
    pub per_site: Vec<Option<EventId>>,
}

impl CodiagEvent {
    /// `(a,a,eps)`-style tuple; `epsilon` is substituted for silent sites.
    pub fn render(&self, automaton: &StochasticAutomaton, epsilon: &str) -> String {
        let mut parts = vec![automaton.event_name(self.driver)];
        parts.extend(
            self.per_site
                .iter()
                .map(|e| e.map_or(epsilon, |e| automaton.event_name(e))),
        );
        format!("({})", parts.join(","))
    }
}

#[derive(Clone, Debug)]
pub struct Codiagnoser {
    dfa: DeterministicAutomaton,
    global: LogicalDiagnoser,
    locals: Vec<LogicalDiagnoser>,
    states: Vec<CodiagState>,
    index: HashMap<CodiagState, usize>,
    transitions: Vec<Vec<(CodiagEvent, usize)>>,
    parent: Vec<Option<(usize, CodiagEvent)>>,
}

/// Per-coordinate strings leading to a codiagnoser state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReachabilityWitness {
    pub global: Trace,
    pub locals: Vec<Trace>,
}

impl Codiagnoser {
    pub fn initial(&self) -> usize {
        0
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[CodiagState] {
        &self.states
    }

    pub fn state(&self, id: usize) -> &CodiagState {
        &self.states[id]
    }

    pub fn id_of(&self, state: &CodiagState) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn site_count(&self) -> usize {
        self.locals.len()
    }

    pub fn global(&self) -> &LogicalDiagnoser {
        &self.global
    }

    pub fn locals(&self) -> &[LogicalDiagnoser] {
        &self.locals
    }

    pub fn transitions_from(&self, id: usize) -> &[(CodiagEvent, usize)] {
        &self.transitions[id]
    }

    pub fn step(&self, id: usize, driver: EventId) -> Option<usize> {
        self.transitions[id]
            .iter()
            .find(|(e, _)| e.driver == driver)
            .map(|&(_, t)| t)
    }

    pub fn edges(&self) -> Vec<(usize, &CodiagEvent, usize)> {
        self.transitions
            .iter()
            .enumerate()
            .flat_map(|(s, row)| row.iter().map(move |(e, t)| (s, e, *t)))
            .collect()
    }

    /// Distinct events used by some transition, sorted by driver.
    pub fn alphabet(&self) -> Vec<CodiagEvent> {
        let mut events: Vec<CodiagEvent> = self.edges().into_iter().map(|(_, e, _)| e.clone()).collect();
        events.sort();
        events.dedup();
        events
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        self.transitions
            .iter()
            .map(|row| row.iter().map(|&(_, t)| t).collect())
            .collect()
    }

    /// True when every local coordinate is F-uncertain.
    pub fn is_f_uncertain(&self, id: usize, class: FailureClass) -> bool {
        self.states[id]
            .locals
            .iter()
            .zip(&self.locals)
            .all(|(&l, diag)| classify(diag.estimate(l), class) == Certainty::FUncertain)
    }

    /// `({3F},{2F,3F,4N,5F},{3F})`
    pub fn render_state(&self, automaton: &StochasticAutomaton, id: usize) -> String {
        let state = &self.states[id];
        let mut parts = vec![braces(automaton, &self.global, state.global)];
        parts.extend(
            state
                .locals
                .iter()
                .zip(&self.locals)
                .map(|(&l, diag)| braces(automaton, diag, l)),
        );
        format!("({})", parts.join(","))
    }
}

fn braces(automaton: &StochasticAutomaton, diag: &LogicalDiagnoser, id: usize) -> String {
    format!("{{{}}}", diag.estimate(id).render_compact(automaton).replace(' ', ","))
}

/// Builds the reachable product from fresh diagnosers for the given site
/// masks; the global diagnoser uses their union.
pub fn build_codiagnoser(automaton: &StochasticAutomaton, masks: &[ObservationMask]) -> Codiagnoser {
    let dfa = deduce_dfa(automaton);
    let global = crate::observer::build_logical_diagnoser(&dfa, &ObservationMask::union(masks));
    let locals = masks
        .iter()
        .map(|m| crate::observer::build_logical_diagnoser(&dfa, m))
        .collect();
    codiagnoser_from(dfa, global, locals)
}

/// Breadth-first product construction. States are numbered in discovery
/// order; drivers are tried in event id order.
pub fn codiagnoser_from(
    dfa: DeterministicAutomaton,
    global: LogicalDiagnoser,
    locals: Vec<LogicalDiagnoser>,
) -> Codiagnoser {
    let initial = CodiagState {
        global: global.initial(),
        locals: locals.iter().map(|d| d.initial()).collect(),
    };
    let mut states = vec![initial.clone()];
    let mut index = HashMap::from([(initial, 0usize)]);
    let mut transitions = vec![Vec::new()];
    let mut parent = vec![None];
    let mut queue = VecDeque::from([0usize]);
    let drivers: Vec<EventId> = global.mask().observable.iter().copied().collect();

    while let Some(id) = queue.pop_front() {
        for &driver in &drivers {
            let Some(next_global) = global.step(states[id].global, driver) else {
                continue;
            };
            let mut next_locals = Vec::with_capacity(locals.len());
            let mut per_site = Vec::with_capacity(locals.len());
            let mut defined = true;
            for (&l, diag) in states[id].locals.iter().zip(&locals) {
                if diag.mask().observes(driver) {
                    match diag.step(l, driver) {
                        Some(t) => next_locals.push(t),
                        None => {
                            defined = false;
                            break;
                        }
                    }
                    per_site.push(Some(driver));
                } else {
                    next_locals.push(l);
                    per_site.push(None);
                }
            }
            if !defined {
                continue;
            }
            let event = CodiagEvent { driver, per_site };
            let target = CodiagState {
                global: next_global,
                locals: next_locals,
            };
            let target_id = match index.get(&target) {
                Some(&t) => t,
                None => {
                    let t = states.len();
                    states.push(target.clone());
                    index.insert(target, t);
                    transitions.push(Vec::new());
                    parent.push(Some((id, event.clone())));
                    queue.push_back(t);
                    t
                }
            };
            transitions[id].push((event, target_id));
        }
    }

    Codiagnoser {
        dfa,
        global,
        locals,
        states,
        index,
        transitions,
        parent,
    }
}

/// Strings recorded by the breadth-first construction; the initial state
/// gets empty strings.
pub fn reachability_witness(codiag: &Codiagnoser, state: usize) -> Result<ReachabilityWitness> {
    if state >= codiag.state_count() {
        return Err(Error::UnreachableState(state));
    }
    let mut events = Vec::new();
    let mut cur = state;
    while let Some((prev, event)) = &codiag.parent[cur] {
        events.push(event);
        cur = *prev;
    }
    events.reverse();
    Ok(ReachabilityWitness {
        global: events.iter().map(|e| e.driver).collect(),
        locals: (0..codiag.site_count())
            .map(|i| events.iter().filter_map(|e| e.per_site[i]).collect())
            .collect(),
    })
}

/// A member shared by every local estimate of a codiagnoser state that is
/// recurrent in every site's component chain, bears the class, and is
/// reached by one plant trace `witness` whose label and local projections
/// land exactly on it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniformRecurrentF {
    pub state: usize,
    pub shared: Member,
    pub witness: Trace,
}

/// Reachable part of the synchronous product of the plant (with label) and
/// every local diagnoser, with breadth-first parents.
struct JointReach {
    index: HashMap<(Member, Vec<usize>), usize>,
    parent: Vec<Option<(usize, EventId)>>,
}

impl JointReach {
    fn build(codiag: &Codiagnoser) -> Self {
        let dfa = &codiag.dfa;
        let start = (
            (dfa.initial, Label::NORMAL),
            codiag.locals.iter().map(|d| d.initial()).collect::<Vec<_>>(),
        );
        let mut nodes = vec![start.clone()];
        let mut index = HashMap::from([(start, 0usize)]);
        let mut parent = vec![None];
        let mut queue = VecDeque::from([0usize]);
        while let Some(id) = queue.pop_front() {
            let ((q, label), locals) = nodes[id].clone();
            'events: for e in (0..dfa.event_count()).map(EventId) {
                let Some(next) = dfa.step(q, e) else { continue };
                let mut next_locals = locals.clone();
                for (l, diag) in next_locals.iter_mut().zip(&codiag.locals) {
                    if diag.mask().observes(e) {
                        match diag.step(*l, e) {
                            Some(t) => *l = t,
                            None => continue 'events,
                        }
                    }
                }
                let node = ((next, label.after(dfa.failure_class(e))), next_locals);
                if !index.contains_key(&node) {
                    index.insert(node.clone(), nodes.len());
                    nodes.push(node);
                    parent.push(Some((id, e)));
                    queue.push_back(nodes.len() - 1);
                }
            }
        }
        JointReach { index, parent }
    }

    fn trace_to(&self, member: Member, locals: &[usize]) -> Option<Trace> {
        let mut cur = *self.index.get(&(member, locals.to_vec()))?;
        let mut events = Vec::new();
        while let Some((prev, e)) = self.parent[cur] {
            events.push(e);
            cur = prev;
        }
        events.reverse();
        Some(Trace(events))
    }
}

/// All uniform recurrent components bearing `class` in one codiagnoser
/// state. `sites[i]` must be the recurrence analysis of the stochastic
/// diagnoser whose logical part is local diagnoser `i`.
pub fn find_uniform_recurrent_f(
    codiag: &Codiagnoser,
    sites: &[RecurrenceAnalysis],
    state: usize,
    class: FailureClass,
) -> Vec<UniformRecurrentF> {
    uniform_with(codiag, &JointReach::build(codiag), sites, state, class)
}

fn uniform_with(
    codiag: &Codiagnoser,
    joint: &JointReach,
    sites: &[RecurrenceAnalysis],
    state: usize,
    class: FailureClass,
) -> Vec<UniformRecurrentF> {
    let locals = &codiag.states[state].locals;
    let Some(first) = codiag.locals.first() else {
        return Vec::new();
    };
    first
        .estimate(locals[0])
        .members()
        .iter()
        .filter(|&&(q, l)| {
            l.contains(class)
                && locals
                    .iter()
                    .zip(&codiag.locals)
                    .zip(sites)
                    .all(|((&est, diag), analysis)| {
                        diag.estimate(est).contains(&(q, l))
                            && analysis.is_recurrent(&ComponentNode {
                                estimate: est,
                                state: q,
                                label: l,
                            })
                    })
        })
        .filter_map(|&shared| {
            joint
                .trace_to(shared, locals)
                .map(|witness| UniformRecurrentF { state, shared, witness })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub codiagnosable: bool,
    /// `(state, event)` pairs: each event leads from its state to the next
    /// pair's state, the last one back to the first.
    pub witness_cycle: Option<Vec<(usize, CodiagEvent)>>,
    pub per_site_centralized: Vec<bool>,
}

/// Everything built while deciding codiagnosability.
#[derive(Clone, Debug)]
pub struct CodiagnosabilityAnalysis {
    pub class: FailureClass,
    pub global: StochasticDiagnoser,
    pub sites: Vec<StochasticDiagnoser>,
    pub recurrence: Vec<RecurrenceAnalysis>,
    pub codiagnoser: Codiagnoser,
    /// Uniform recurrent components of every F-uncertain state that has any.
    pub uniform: BTreeMap<usize, Vec<UniformRecurrentF>>,
    pub verdict: Verdict,
}

pub fn check_codiagnosability(
    automaton: &StochasticAutomaton,
    masks: &[ObservationMask],
    class: FailureClass,
) -> Result<Verdict> {
    analyze_codiagnosability(automaton, masks, class).map(|a| a.verdict)
}

pub fn analyze_codiagnosability(
    automaton: &StochasticAutomaton,
    masks: &[ObservationMask],
    class: FailureClass,
) -> Result<CodiagnosabilityAnalysis> {
    let report = validate(automaton);
    if !report.is_admissible() {
        return Err(Error::ValidationFailed(report));
    }
    if class.0 >= automaton.failure_classes().len() {
        return Err(Error::UnknownFailureClass(class.0.to_string()));
    }

    // build the global and local stochastic diagnosers
    let global = stochastic_diagnoser_for_mask(automaton, &ObservationMask::union(masks))?;
    let sites = masks
        .iter()
        .map(|m| stochastic_diagnoser_for_mask(automaton, m))
        .collect::<Result<Vec<_>>>()?;
    let recurrence: Vec<RecurrenceAnalysis> = sites.iter().map(RecurrenceAnalysis::of).collect();
    let per_site_centralized = sites
        .iter()
        .zip(&recurrence)
        .map(|(sd, r)| diagnosable_with(sd, r, class))
        .collect();

    // the product
    let codiagnoser = codiagnoser_from(
        deduce_dfa(automaton),
        global.logical().clone(),
        sites.iter().map(|sd| sd.logical().clone()).collect(),
    );

    let mut analysis = CodiagnosabilityAnalysis {
        class,
        global,
        sites,
        recurrence,
        codiagnoser,
        uniform: BTreeMap::new(),
        verdict: Verdict {
            codiagnosable: true,
            witness_cycle: None,
            per_site_centralized,
        },
    };

    // no cycle at all: nothing can violate the condition
    let adj = analysis.codiagnoser.adjacency();
    if !graph::has_cycle(&adj) {
        return Ok(analysis);
    }

    // states that are F-uncertain everywhere and carry a uniform component
    let joint = JointReach::build(&analysis.codiagnoser);
    for id in 0..analysis.codiagnoser.state_count() {
        if !analysis.codiagnoser.is_f_uncertain(id, class) {
            continue;
        }
        let found = uniform_with(&analysis.codiagnoser, &joint, &analysis.recurrence, id, class);
        if !found.is_empty() {
            analysis.uniform.insert(id, found);
        }
    }

    let qualifying = |v: usize| analysis.uniform.contains_key(&v);
    let induced: Vec<Vec<usize>> = adj
        .iter()
        .enumerate()
        .map(|(v, succ)| {
            if qualifying(v) {
                succ.iter().copied().filter(|&w| qualifying(w)).collect()
            } else {
                Vec::new()
            }
        })
        .collect();
    let sccs = graph::strongly_connected_components(&induced);
    let start = analysis
        .uniform
        .keys()
        .copied()
        .find(|&v| sccs.is_cyclic(&induced, sccs.component_of[v]));
    if let Some(start) = start {
        let nodes = graph::shortest_cycle_through(&induced, start, qualifying).expect("node lies on a cycle");
        analysis.verdict.codiagnosable = false;
        analysis.verdict.witness_cycle = Some(label_cycle(&analysis.codiagnoser, &nodes));
    }
    Ok(analysis)
}

/// Attaches to each hop of a node cycle the lowest-driver event realizing it.
fn label_cycle(codiag: &Codiagnoser, nodes: &[usize]) -> Vec<(usize, CodiagEvent)> {
    nodes
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let next = nodes[(i + 1) % nodes.len()];
            let event = codiag.transitions[v]
                .iter()
                .find(|&&(_, t)| t == next)
                .map(|(e, _)| e.clone())
                .expect("cycle follows existing edges");
            (v, event)
        })
        .collect()
}

/// Every simple cycle of the subgraph induced by `restriction`, with each
/// choice of parallel edges reported separately.
pub fn enumerate_cycles(codiag: &Codiagnoser, restriction: impl Fn(usize) -> bool) -> Vec<Vec<(usize, CodiagEvent)>> {
    let adj: Vec<Vec<usize>> = codiag
        .adjacency()
        .into_iter()
        .enumerate()
        .map(|(v, succ)| {
            if restriction(v) {
                succ.into_iter().filter(|&w| restriction(w)).collect()
            } else {
                Vec::new()
            }
        })
        .collect();
    let mut cycles = Vec::new();
    for nodes in graph::simple_cycles(&adj) {
        let mut partial: Vec<Vec<(usize, CodiagEvent)>> = vec![Vec::new()];
        for (i, &v) in nodes.iter().enumerate() {
            let next = nodes[(i + 1) % nodes.len()];
            let options: Vec<&CodiagEvent> = codiag.transitions[v]
                .iter()
                .filter(|&&(_, t)| t == next)
                .map(|(e, _)| e)
                .collect();
            partial = partial
                .into_iter()
                .flat_map(|prefix| {
                    options.iter().map(move |&e| {
                        let mut p = prefix.clone();
                        p.push((v, e.clone()));
                        p
                    })
                })
                .collect();
        }
        cycles.extend(partial);
    }
    cycles
}
