//! Stochastic automata, observation masks, traces and the language-level
//! operations every later construction builds on.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph;

/// Absolute tolerance for per-state probability sums.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// Default cap on continuation length for explicit enumeration.
pub const DEFAULT_ENUMERATION_BOUND: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventId(pub usize);

/// Index of a failure type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FailureClass(pub usize);

/// Zero-based site index. Rendered one-based (`site 1` is `SiteId(0)`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SiteId(pub usize);

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0 + 1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventDecl {
    pub name: String,
    /// Sites at which the event is observable; empty means unobservable
    /// everywhere.
    pub observable_at: BTreeSet<SiteId>,
    pub failure_class: Option<FailureClass>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub source: StateId,
    pub event: EventId,
    pub target: StateId,
    pub probability: f64,
}

/// A finite automaton whose transitions carry occurrence probabilities.
///
/// The transition list is kept as given so that [`validate`] can report
/// nondeterminism and bad probabilities; lookups through [`Self::step`]
/// resolve to the first transition declared for a `(state, event)` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticAutomaton {
    state_names: Vec<String>,
    initial: StateId,
    events: Vec<EventDecl>,
    failure_classes: Vec<String>,
    sites: usize,
    transitions: Vec<Transition>,
    table: Vec<Vec<Option<usize>>>,
    padding_event: Option<EventId>,
}

impl StochasticAutomaton {
    fn assemble(
        state_names: Vec<String>,
        initial: StateId,
        events: Vec<EventDecl>,
        failure_classes: Vec<String>,
        sites: usize,
        transitions: Vec<Transition>,
        padding_event: Option<EventId>,
    ) -> Self {
        let mut table = vec![vec![None; events.len()]; state_names.len()];
        for (i, t) in transitions.iter().enumerate() {
            let slot = &mut table[t.source.0][t.event.0];
            if slot.is_none() {
                *slot = Some(i);
            }
        }
        StochasticAutomaton {
            state_names,
            initial,
            events,
            failure_classes,
            sites,
            transitions,
            table,
            padding_event,
        }
    }

    pub fn state_count(&self) -> usize {
        self.state_names.len()
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.state_names.len()).map(StateId)
    }

    pub fn event_ids(&self) -> impl Iterator<Item = EventId> {
        (0..self.events.len()).map(EventId)
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn site_ids(&self) -> impl Iterator<Item = SiteId> {
        (0..self.sites).map(SiteId)
    }

    pub fn events(&self) -> &[EventDecl] {
        &self.events
    }

    pub fn event(&self, id: EventId) -> &EventDecl {
        &self.events[id.0]
    }

    pub fn failure_classes(&self) -> &[String] {
        &self.failure_classes
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// The self-loop event added by [`make_deadlock_free`], if any.
    pub fn padding_event(&self) -> Option<EventId> {
        self.padding_event
    }

    pub fn state_name(&self, id: StateId) -> &str {
        &self.state_names[id.0]
    }

    pub fn event_name(&self, id: EventId) -> &str {
        &self.events[id.0].name
    }

    pub fn class_name(&self, class: FailureClass) -> &str {
        &self.failure_classes[class.0]
    }

    pub fn state_id(&self, name: &str) -> Result<StateId> {
        self.state_names
            .iter()
            .position(|s| s == name)
            .map(StateId)
            .ok_or_else(|| Error::UnknownState(name.to_string()))
    }

    pub fn event_id(&self, name: &str) -> Result<EventId> {
        self.events
            .iter()
            .position(|e| e.name == name)
            .map(EventId)
            .ok_or_else(|| Error::UnknownEvent(name.to_string()))
    }

    pub fn class_id(&self, name: &str) -> Result<FailureClass> {
        self.failure_classes
            .iter()
            .position(|c| c == name)
            .map(FailureClass)
            .ok_or_else(|| Error::UnknownFailureClass(name.to_string()))
    }

    /// The unique transition for `(state, event)`, as `(target, probability)`.
    pub fn step(&self, state: StateId, event: EventId) -> Option<(StateId, f64)> {
        self.table[state.0][event.0].map(|i| {
            let t = &self.transitions[i];
            (t.target, t.probability)
        })
    }

    /// Outgoing transitions of `state`, ordered by event id.
    pub fn outgoing(&self, state: StateId) -> impl Iterator<Item = &Transition> + '_ {
        self.table[state.0]
            .iter()
            .filter_map(move |slot| slot.map(|i| &self.transitions[i]))
    }

    pub fn site_mask(&self, site: SiteId) -> Result<ObservationMask> {
        if site.0 >= self.sites {
            return Err(Error::SiteOutOfRange {
                site: site.0 + 1,
                sites: self.sites,
            });
        }
        let observable = self
            .event_ids()
            .filter(|&e| self.event(e).observable_at.contains(&site))
            .collect();
        Ok(ObservationMask {
            site: MaskSite::Site(site),
            observable,
        })
    }

    pub fn site_masks(&self) -> Vec<ObservationMask> {
        self.site_ids()
            .map(|s| self.site_mask(s).expect("site in range"))
            .collect()
    }

    /// Union of all site masks.
    pub fn global_mask(&self) -> ObservationMask {
        let observable = self
            .event_ids()
            .filter(|&e| !self.event(e).observable_at.is_empty())
            .collect();
        ObservationMask {
            site: MaskSite::Global,
            observable,
        }
    }

    /// Parses a whitespace-separated list of event names.
    pub fn trace(&self, text: &str) -> Result<Trace> {
        text.split_whitespace()
            .map(|name| self.event_id(name))
            .collect::<Result<Vec<_>>>()
            .map(Trace)
    }

    pub fn render_trace(&self, trace: &Trace) -> String {
        if trace.is_empty() {
            return "eps".to_string();
        }
        trace.iter().map(|&e| self.event_name(e)).collect::<Vec<_>>().join(" ")
    }

    /// Runs the trace from `from`, returning the final state if every step
    /// is defined.
    pub fn run(&self, from: StateId, trace: &Trace) -> Option<StateId> {
        trace
            .iter()
            .try_fold(from, |q, &e| self.step(q, e).map(|(next, _)| next))
    }
}

/// Incremental constructor for [`StochasticAutomaton`] keyed by names.
#[derive(Debug, Default)]
pub struct AutomatonBuilder {
    state_names: Vec<String>,
    initial: Option<String>,
    events: Vec<EventDecl>,
    failure_classes: Vec<String>,
    sites: usize,
    transitions: Vec<(String, String, String, f64)>,
}

impl AutomatonBuilder {
    pub fn new(sites: usize) -> Self {
        AutomatonBuilder {
            sites,
            ..Default::default()
        }
    }

    pub fn state(&mut self, name: &str) -> &mut Self {
        if !self.state_names.iter().any(|s| s == name) {
            self.state_names.push(name.to_string());
        }
        self
    }

    pub fn states<'a>(&mut self, names: impl IntoIterator<Item = &'a str>) -> &mut Self {
        for n in names {
            self.state(n);
        }
        self
    }

    pub fn initial(&mut self, name: &str) -> &mut Self {
        self.initial = Some(name.to_string());
        self
    }

    /// Declares an event observable at the given one-based sites.
    pub fn event(&mut self, name: &str, sites: &[usize]) -> &mut Self {
        self.events.push(EventDecl {
            name: name.to_string(),
            observable_at: sites.iter().map(|&s| SiteId(s - 1)).collect(),
            failure_class: None,
        });
        self
    }

    /// Declares an unobservable failure event of the named class.
    pub fn failure_event(&mut self, name: &str, class: &str) -> &mut Self {
        let class = self.class_index(class);
        self.events.push(EventDecl {
            name: name.to_string(),
            observable_at: BTreeSet::new(),
            failure_class: Some(class),
        });
        self
    }

    /// Declares an event with full control over observability and class.
    pub fn event_decl(&mut self, name: &str, sites: &[usize], class: Option<&str>) -> &mut Self {
        let class = class.map(|c| self.class_index(c));
        self.events.push(EventDecl {
            name: name.to_string(),
            observable_at: sites.iter().map(|&s| SiteId(s - 1)).collect(),
            failure_class: class,
        });
        self
    }

    fn class_index(&mut self, class: &str) -> FailureClass {
        match self.failure_classes.iter().position(|c| c == class) {
            Some(i) => FailureClass(i),
            None => {
                self.failure_classes.push(class.to_string());
                FailureClass(self.failure_classes.len() - 1)
            }
        }
    }

    pub fn transition(&mut self, source: &str, event: &str, target: &str, probability: f64) -> &mut Self {
        self.transitions
            .push((source.into(), event.into(), target.into(), probability));
        self
    }

    pub fn build(&self) -> Result<StochasticAutomaton> {
        let state = |name: &str| {
            self.state_names
                .iter()
                .position(|s| s == name)
                .map(StateId)
                .ok_or_else(|| Error::UnknownState(name.to_string()))
        };
        let event = |name: &str| {
            self.events
                .iter()
                .position(|e| e.name == name)
                .map(EventId)
                .ok_or_else(|| Error::UnknownEvent(name.to_string()))
        };
        let initial = match &self.initial {
            Some(name) => state(name)?,
            None if !self.state_names.is_empty() => StateId(0),
            None => return Err(Error::UnknownState("<initial>".into())),
        };
        for decl in &self.events {
            if let Some(site) = decl.observable_at.iter().find(|s| s.0 >= self.sites) {
                return Err(Error::SiteOutOfRange {
                    site: site.0 + 1,
                    sites: self.sites,
                });
            }
        }
        let transitions = self
            .transitions
            .iter()
            .map(|(s, e, t, p)| {
                Ok(Transition {
                    source: state(s)?,
                    event: event(e)?,
                    target: state(t)?,
                    probability: *p,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StochasticAutomaton::assemble(
            self.state_names.clone(),
            initial,
            self.events.clone(),
            self.failure_classes.clone(),
            self.sites,
            transitions,
            None,
        ))
    }
}

/// A finite event sequence.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Trace(pub Vec<EventId>);

impl Trace {
    pub fn empty() -> Self {
        Trace(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, EventId> {
        self.0.iter()
    }

    pub fn final_event(&self) -> Option<EventId> {
        self.0.last().copied()
    }

    /// All prefixes, shortest first, including the empty trace and the
    /// trace itself.
    pub fn prefix_closure(&self) -> Vec<Trace> {
        (0..=self.0.len()).map(|k| Trace(self.0[..k].to_vec())).collect()
    }

    pub fn concat(&self, other: &Trace) -> Trace {
        let mut events = self.0.clone();
        events.extend_from_slice(&other.0);
        Trace(events)
    }

    pub fn push(&mut self, event: EventId) {
        self.0.push(event);
    }
}

impl FromIterator<EventId> for Trace {
    fn from_iter<I: IntoIterator<Item = EventId>>(iter: I) -> Self {
        Trace(iter.into_iter().collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MaskSite {
    Site(SiteId),
    Global,
}

impl fmt::Display for MaskSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskSite::Site(s) => write!(f, "site {s}"),
            MaskSite::Global => write!(f, "global"),
        }
    }
}

/// The set of events a site (or the union of all sites) can see.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ObservationMask {
    pub site: MaskSite,
    pub observable: BTreeSet<EventId>,
}

impl ObservationMask {
    pub fn new(site: MaskSite, observable: impl IntoIterator<Item = EventId>) -> Self {
        ObservationMask {
            site,
            observable: observable.into_iter().collect(),
        }
    }

    pub fn observes(&self, event: EventId) -> bool {
        self.observable.contains(&event)
    }

    pub fn union<'a>(masks: impl IntoIterator<Item = &'a ObservationMask>) -> ObservationMask {
        let observable = masks.into_iter().flat_map(|m| m.observable.iter().copied()).collect();
        ObservationMask {
            site: MaskSite::Global,
            observable,
        }
    }
}

/// Erases every event the mask does not observe.
pub fn project(trace: &Trace, mask: &ObservationMask) -> Trace {
    trace.iter().copied().filter(|&e| mask.observes(e)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Nondeterministic {
        state: String,
        event: String,
    },
    InvalidProbability {
        state: String,
        event: String,
        probability: f64,
    },
    ProbabilitySum {
        state: String,
        sum: f64,
    },
    ObservableFailure {
        event: String,
    },
    UnobservableCycle {
        states: Vec<String>,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Nondeterministic { state, event } => {
                write!(f, "state {state}: more than one transition on {event}")
            }
            Violation::InvalidProbability {
                state,
                event,
                probability,
            } => write!(
                f,
                "state {state}: transition on {event} has probability {probability} outside (0, 1]"
            ),
            Violation::ProbabilitySum { state, sum } => {
                write!(f, "state {state}: outgoing probabilities sum to {sum}, not 1")
            }
            Violation::ObservableFailure { event } => {
                write!(f, "failure event {event} is observable")
            }
            Violation::UnobservableCycle { states } => {
                write!(f, "cycle of unobservable events through states {}", states.join(", "))
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

/// Checks determinism, probability ranges, liveness (row sums), failure
/// unobservability and the absence of globally unobservable cycles.
pub fn validate(automaton: &StochasticAutomaton) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen = HashMap::new();
    for t in automaton.transitions() {
        if seen.insert((t.source, t.event), t.target).is_some() {
            violations.push(Violation::Nondeterministic {
                state: automaton.state_name(t.source).into(),
                event: automaton.event_name(t.event).into(),
            });
        }
        if !(t.probability > 0.0 && t.probability <= 1.0 + PROBABILITY_TOLERANCE) {
            violations.push(Violation::InvalidProbability {
                state: automaton.state_name(t.source).into(),
                event: automaton.event_name(t.event).into(),
                probability: t.probability,
            });
        }
    }
    for q in automaton.states() {
        let sum: f64 = automaton
            .transitions()
            .iter()
            .filter(|t| t.source == q)
            .map(|t| t.probability)
            .sum();
        if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            violations.push(Violation::ProbabilitySum {
                state: automaton.state_name(q).into(),
                sum,
            });
        }
    }
    for decl in automaton.events() {
        if decl.failure_class.is_some() && !decl.observable_at.is_empty() {
            violations.push(Violation::ObservableFailure {
                event: decl.name.clone(),
            });
        }
    }
    let mask = automaton.global_mask();
    let adj = unobservable_graph(automaton, &mask, automaton.padding_event());
    let sccs = graph::strongly_connected_components(&adj);
    for c in 0..sccs.components.len() {
        if sccs.is_cyclic(&adj, c) {
            violations.push(Violation::UnobservableCycle {
                states: sccs.components[c]
                    .iter()
                    .map(|&q| automaton.state_name(StateId(q)).to_string())
                    .collect(),
            });
        }
    }
    ValidationReport { violations }
}

fn unobservable_graph(
    automaton: &StochasticAutomaton,
    mask: &ObservationMask,
    skip: Option<EventId>,
) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); automaton.state_count()];
    for t in automaton.transitions() {
        if !mask.observes(t.event) && Some(t.event) != skip {
            adj[t.source.0].push(t.target.0);
        }
    }
    adj
}

/// True iff the transitions on events the mask does not observe form an
/// acyclic graph.
pub fn check_no_unobservable_cycles(automaton: &StochasticAutomaton, mask: &ObservationMask) -> bool {
    !graph::has_cycle(&unobservable_graph(automaton, mask, None))
}

/// The logical skeleton of a stochastic automaton: same states and events,
/// with a partial transition function defined exactly where the probability
/// is positive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeterministicAutomaton {
    pub initial: StateId,
    next: Vec<Vec<Option<StateId>>>,
    failure_class: Vec<Option<FailureClass>>,
}

impl DeterministicAutomaton {
    pub fn state_count(&self) -> usize {
        self.next.len()
    }

    pub fn event_count(&self) -> usize {
        self.failure_class.len()
    }

    pub fn step(&self, state: StateId, event: EventId) -> Option<StateId> {
        self.next[state.0][event.0]
    }

    pub fn failure_class(&self, event: EventId) -> Option<FailureClass> {
        self.failure_class[event.0]
    }

    pub fn run(&self, from: StateId, trace: &Trace) -> Option<StateId> {
        trace.iter().try_fold(from, |q, &e| self.step(q, e))
    }

    pub fn accepts(&self, trace: &Trace) -> bool {
        self.run(self.initial, trace).is_some()
    }

    /// All edges as `(source, event, target)` in state-then-event order.
    pub fn edges(&self) -> Vec<(StateId, EventId, StateId)> {
        self.next
            .iter()
            .enumerate()
            .flat_map(|(q, row)| {
                row.iter()
                    .enumerate()
                    .filter_map(move |(e, t)| t.map(|t| (StateId(q), EventId(e), t)))
            })
            .collect()
    }
}

pub fn deduce_dfa(automaton: &StochasticAutomaton) -> DeterministicAutomaton {
    let mut next = vec![vec![None; automaton.event_count()]; automaton.state_count()];
    for q in automaton.states() {
        for t in automaton.outgoing(q) {
            if t.probability > 0.0 {
                next[q.0][t.event.0] = Some(t.target);
            }
        }
    }
    DeterministicAutomaton {
        initial: automaton.initial(),
        next,
        failure_class: automaton.events().iter().map(|e| e.failure_class).collect(),
    }
}

/// Product of transition probabilities along the run of `trace` from
/// `from`; zero if the run is undefined.
pub fn trace_probability(automaton: &StochasticAutomaton, from: StateId, trace: &Trace) -> f64 {
    let mut q = from;
    let mut p = 1.0;
    for &e in trace.iter() {
        match automaton.step(q, e) {
            Some((next, prob)) => {
                p *= prob;
                q = next;
            }
            None => return 0.0,
        }
    }
    p
}

/// Every length-`n` continuation of `prefix` with its probability
/// conditioned on the prefix, sorted by trace.
pub fn enumerate_continuations(automaton: &StochasticAutomaton, prefix: &Trace, n: usize) -> Result<Vec<(Trace, f64)>> {
    enumerate_continuations_within(automaton, prefix, n, DEFAULT_ENUMERATION_BOUND)
}

pub fn enumerate_continuations_within(
    automaton: &StochasticAutomaton,
    prefix: &Trace,
    n: usize,
    bound: usize,
) -> Result<Vec<(Trace, f64)>> {
    if n > bound {
        return Err(Error::HorizonTooLarge { requested: n, bound });
    }
    if trace_probability(automaton, automaton.initial(), prefix) <= 0.0 {
        return Err(Error::PrefixNotInLanguage(automaton.render_trace(prefix)));
    }
    let start = automaton
        .run(automaton.initial(), prefix)
        .expect("prefix has positive probability");
    Ok(continuations_from(automaton, start, n))
}

/// Length-`n` paths from `state` with their probabilities.
pub fn continuations_from(automaton: &StochasticAutomaton, state: StateId, n: usize) -> Vec<(Trace, f64)> {
    let mut frontier = vec![(Trace::empty(), state, 1.0)];
    for _ in 0..n {
        let mut next = Vec::new();
        for (trace, q, p) in frontier {
            for t in automaton.outgoing(q) {
                let mut extended = trace.clone();
                extended.push(t.event);
                next.push((extended, t.target, p * t.probability));
            }
        }
        frontier = next;
    }
    let mut out: Vec<(Trace, f64)> = frontier.into_iter().map(|(t, _, p)| (t, p)).collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Traces of length at most `max_len` that end in an event of `class`,
/// ordered by length then event ids.
pub fn failure_seeds(automaton: &StochasticAutomaton, class: FailureClass, max_len: usize) -> Vec<Trace> {
    let mut seeds = Vec::new();
    let mut frontier = vec![(Trace::empty(), automaton.initial())];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for (trace, q) in frontier {
            for t in automaton.outgoing(q) {
                let mut extended = trace.clone();
                extended.push(t.event);
                if automaton.event(t.event).failure_class == Some(class) {
                    seeds.push(extended.clone());
                }
                next.push((extended, t.target));
            }
        }
        frontier = next;
    }
    seeds.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    seeds
}

/// Adds one fresh event, unobservable at every site, as a probability-one
/// self-loop on each state without outgoing transitions. Live automata are
/// returned unchanged.
pub fn make_deadlock_free(automaton: &StochasticAutomaton) -> StochasticAutomaton {
    let deadlocked: Vec<StateId> = automaton
        .states()
        .filter(|&q| automaton.outgoing(q).next().is_none())
        .collect();
    if deadlocked.is_empty() {
        return automaton.clone();
    }
    let mut name = String::from("tick");
    while automaton.events().iter().any(|e| e.name == name) {
        name.push('\'');
    }
    let mut events = automaton.events.clone();
    events.push(EventDecl {
        name,
        observable_at: BTreeSet::new(),
        failure_class: None,
    });
    let padding = EventId(events.len() - 1);
    let mut transitions = automaton.transitions.clone();
    transitions.extend(deadlocked.into_iter().map(|q| Transition {
        source: q,
        event: padding,
        target: q,
        probability: 1.0,
    }));
    StochasticAutomaton::assemble(
        automaton.state_names.clone(),
        automaton.initial,
        events,
        automaton.failure_classes.clone(),
        automaton.sites,
        transitions,
        Some(padding),
    )
}
