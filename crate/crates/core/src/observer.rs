//! Logical diagnosers: label-augmented subset construction under an
//! observation mask.
//!
//! A diagnoser state (an [`Estimate`]) is the set of `(state, label)` pairs
//! the plant can be in right after the last observed event. The initial
//! estimate is `{(q0, N)}` without closure; unobservable moves are folded
//! into each observable step instead.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use crate::automaton::{
    DeterministicAutomaton, EventId, FailureClass, ObservationMask, StateId, StochasticAutomaton, Trace,
};
use crate::error::{Error, Result};

/// Failure label: either normal (`N`) or a nonempty set of failure classes,
/// stored as a bitmask with the empty mask meaning normal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(u64);

impl Label {
    pub const NORMAL: Label = Label(0);

    pub fn of(class: FailureClass) -> Label {
        Label(1 << class.0)
    }

    pub fn is_normal(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, class: FailureClass) -> bool {
        self.0 & (1 << class.0) != 0
    }

    pub fn with(self, class: FailureClass) -> Label {
        Label(self.0 | (1 << class.0))
    }

    /// Label after taking an event of the given class (if any).
    pub fn after(self, class: Option<FailureClass>) -> Label {
        match class {
            Some(c) => self.with(c),
            None => self,
        }
    }

    pub fn classes(self) -> impl Iterator<Item = FailureClass> {
        (0..64).filter(move |i| self.0 & (1 << i) != 0).map(FailureClass)
    }

    pub fn render(self, automaton: &StochasticAutomaton) -> String {
        if self.is_normal() {
            return "N".to_string();
        }
        self.classes()
            .map(|c| automaton.class_name(c))
            .collect::<Vec<_>>()
            .join("+")
    }
}

pub type Member = (StateId, Label);

/// A set of `(state, label)` pairs kept sorted by state id then label.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Estimate(Vec<Member>);

impl Estimate {
    pub fn new(members: impl IntoIterator<Item = Member>) -> Self {
        let set: BTreeSet<Member> = members.into_iter().collect();
        Estimate(set.into_iter().collect())
    }

    pub fn initial(q0: StateId) -> Self {
        Estimate(vec![(q0, Label::NORMAL)])
    }

    pub fn members(&self) -> &[Member] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, member: &Member) -> bool {
        self.0.binary_search(member).is_ok()
    }

    pub fn position(&self, member: &Member) -> Option<usize> {
        self.0.binary_search(member).ok()
    }

    /// `{(2,F),(4,N)}`
    pub fn render(&self, automaton: &StochasticAutomaton) -> String {
        let inner: Vec<String> = self
            .0
            .iter()
            .map(|&(q, l)| format!("({},{})", automaton.state_name(q), l.render(automaton)))
            .collect();
        format!("{{{}}}", inner.join(","))
    }

    /// Compact figure-style rendering: `2F 4N`.
    pub fn render_compact(&self, automaton: &StochasticAutomaton) -> String {
        self.0
            .iter()
            .map(|&(q, l)| format!("{}{}", automaton.state_name(q), l.render(automaton)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Certainty {
    FCertain,
    FUncertain,
    FFree,
}

impl fmt::Display for Certainty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Certainty::FCertain => "certain",
            Certainty::FUncertain => "uncertain",
            Certainty::FFree => "free",
        })
    }
}

pub fn classify(estimate: &Estimate, class: FailureClass) -> Certainty {
    let bearing = estimate.members().iter().filter(|(_, l)| l.contains(class)).count();
    if bearing == 0 {
        Certainty::FFree
    } else if bearing == estimate.len() {
        Certainty::FCertain
    } else {
        Certainty::FUncertain
    }
}

/// All pairs reachable from the seed through events the mask does not
/// observe, labels accumulating the failure classes crossed. Seed members
/// are included; terminates on unobservable cycles.
pub fn unobservable_reach<'a>(
    dfa: &DeterministicAutomaton,
    seed: impl IntoIterator<Item = &'a Member>,
    mask: &ObservationMask,
) -> BTreeSet<Member> {
    let mut reached: BTreeSet<Member> = BTreeSet::new();
    let mut stack: Vec<Member> = Vec::new();
    for &m in seed {
        if reached.insert(m) {
            stack.push(m);
        }
    }
    while let Some((q, l)) = stack.pop() {
        for e in (0..dfa.event_count()).map(EventId) {
            if mask.observes(e) {
                continue;
            }
            if let Some(next) = dfa.step(q, e) {
                let m = (next, l.after(dfa.failure_class(e)));
                if reached.insert(m) {
                    stack.push(m);
                }
            }
        }
    }
    reached
}

/// The estimate reached from `estimate` on observable `event`, or `None` if
/// no consistent run exists.
pub fn observable_step(
    dfa: &DeterministicAutomaton,
    estimate: &Estimate,
    event: EventId,
    mask: &ObservationMask,
) -> Option<Estimate> {
    let reach = unobservable_reach(dfa, estimate.members(), mask);
    let targets: BTreeSet<Member> = reach
        .into_iter()
        .filter_map(|(q, l)| dfa.step(q, event).map(|t| (t, l.after(dfa.failure_class(event)))))
        .collect();
    (!targets.is_empty()).then(|| Estimate(targets.into_iter().collect()))
}

#[derive(Clone, Debug)]
pub struct LogicalDiagnoser {
    mask: ObservationMask,
    states: Vec<Estimate>,
    index: HashMap<Estimate, usize>,
    transitions: Vec<BTreeMap<EventId, usize>>,
}

impl LogicalDiagnoser {
    pub fn mask(&self) -> &ObservationMask {
        &self.mask
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Estimate] {
        &self.states
    }

    pub fn estimate(&self, id: usize) -> &Estimate {
        &self.states[id]
    }

    pub fn id_of(&self, estimate: &Estimate) -> Option<usize> {
        self.index.get(estimate).copied()
    }

    pub fn step(&self, id: usize, event: EventId) -> Option<usize> {
        self.transitions[id].get(&event).copied()
    }

    pub fn transitions_from(&self, id: usize) -> impl Iterator<Item = (EventId, usize)> + '_ {
        self.transitions[id].iter().map(|(&e, &t)| (e, t))
    }

    /// All edges as `(source, event, target)`.
    pub fn edges(&self) -> Vec<(usize, EventId, usize)> {
        (0..self.states.len())
            .flat_map(|s| self.transitions_from(s).map(move |(e, t)| (s, e, t)))
            .collect()
    }

    /// Runs an observation from the initial estimate.
    pub fn run(&self, observed: &Trace) -> Option<usize> {
        observed.iter().try_fold(self.initial(), |id, &e| self.step(id, e))
    }
}

/// Breadth-first subset construction; estimate ids follow discovery order
/// with observable events tried in id order.
pub fn build_logical_diagnoser(dfa: &DeterministicAutomaton, mask: &ObservationMask) -> LogicalDiagnoser {
    let initial = Estimate::initial(dfa.initial);
    let mut states = vec![initial.clone()];
    let mut index = HashMap::from([(initial, 0usize)]);
    let mut transitions = vec![BTreeMap::new()];
    let mut queue = VecDeque::from([0usize]);
    while let Some(id) = queue.pop_front() {
        for &event in &mask.observable {
            let Some(target) = observable_step(dfa, &states[id], event, mask) else {
                continue;
            };
            let target_id = match index.get(&target) {
                Some(&t) => t,
                None => {
                    let t = states.len();
                    states.push(target.clone());
                    index.insert(target, t);
                    transitions.push(BTreeMap::new());
                    queue.push_back(t);
                    t
                }
            };
            transitions[id].insert(event, target_id);
        }
    }
    LogicalDiagnoser {
        mask: mask.clone(),
        states,
        index,
        transitions,
    }
}

/// `true` (condition value 1) iff the estimate reached by `observed` is
/// certain of the failure class.
pub fn condition_function(diagnoser: &LogicalDiagnoser, observed: &Trace, class: FailureClass) -> Result<bool> {
    let id = diagnoser
        .run(observed)
        .ok_or_else(|| Error::UndefinedObservation(format!("{:?}", observed.0)))?;
    Ok(classify(diagnoser.estimate(id), class) == Certainty::FCertain)
}
