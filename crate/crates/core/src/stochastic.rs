//! Stochastic diagnosers: a logical diagnoser plus, for every observable
//! step, the matrix of probabilities carrying each source component to each
//! target component. The component-level Markov chain derived from those
//! matrices decides which components are recurrent.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::DMatrix;

use crate::automaton::{deduce_dfa, EventId, FailureClass, ObservationMask, SiteId, StateId, StochasticAutomaton};
use crate::error::{Error, Result};
use crate::graph;
use crate::observer::{
    build_logical_diagnoser, classify, unobservable_reach, Certainty, Label, LogicalDiagnoser, Member,
};

/// Observable probability below this counts as no escape from a
/// locally unobservable region.
const ESCAPE_EPSILON: f64 = 1e-12;

/// Dense row-major matrix; rows index source components, columns target
/// components, both in estimate member order.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    fn zeros(rows: usize, cols: usize) -> Self {
        TransitionMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    fn add(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct StochasticDiagnoser {
    logical: LogicalDiagnoser,
    matrices: BTreeMap<(usize, EventId), TransitionMatrix>,
    initial_mass: Vec<f64>,
}

impl StochasticDiagnoser {
    pub fn logical(&self) -> &LogicalDiagnoser {
        &self.logical
    }

    pub fn matrix(&self, source: usize, event: EventId) -> Option<&TransitionMatrix> {
        self.matrices.get(&(source, event))
    }

    pub fn matrices(&self) -> impl Iterator<Item = ((usize, EventId), &TransitionMatrix)> {
        self.matrices.iter().map(|(&k, m)| (k, m))
    }

    pub fn initial_mass(&self) -> &[f64] {
        &self.initial_mass
    }
}

pub fn build_stochastic_diagnoser(automaton: &StochasticAutomaton, site: SiteId) -> Result<StochasticDiagnoser> {
    stochastic_diagnoser_for_mask(automaton, &automaton.site_mask(site)?)
}

/// Builds the stochastic diagnoser for an arbitrary mask.
///
/// Entry `(row (q,l), col (q',l'))` of the matrix for `(estimate, event)` is
/// the total probability of all runs `u event` from `q` to `q'` with `u`
/// unobservable under the mask and the label moving from `l` to `l'`. The
/// sum over `u` is the row of `(I - U)^-1` restricted to the region
/// reachable without observation, where `U` is the one-step unobservable
/// matrix over `(state, label)` pairs.
pub fn stochastic_diagnoser_for_mask(
    automaton: &StochasticAutomaton,
    mask: &ObservationMask,
) -> Result<StochasticDiagnoser> {
    let dfa = deduce_dfa(automaton);
    let logical = build_logical_diagnoser(&dfa, mask);
    let mut matrices = BTreeMap::new();

    for (id, estimate) in logical.states().iter().enumerate() {
        let region: Vec<Member> = unobservable_reach(&dfa, estimate.members(), mask).into_iter().collect();
        let position: HashMap<Member, usize> = region.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        let n = region.len();

        let mut successors = vec![Vec::new(); n];
        let mut unobservable = DMatrix::<f64>::zeros(n, n);
        let mut escape = vec![0.0; n];
        for (i, &(q, l)) in region.iter().enumerate() {
            for t in automaton.outgoing(q) {
                if mask.observes(t.event) {
                    escape[i] += t.probability;
                } else {
                    let j = position[&(t.target, l.after(automaton.event(t.event).failure_class))];
                    unobservable[(i, j)] += t.probability;
                    successors[i].push(j);
                }
            }
        }

        let leaks = can_reach_escape(&successors, &escape);
        if let Some(i) = (0..n).find(|&i| !leaks[i]) {
            return Err(Error::DivergentUnobservableMass {
                site: mask.site.to_string(),
                state: automaton.state_name(region[i].0).to_string(),
            });
        }

        let visits = (DMatrix::<f64>::identity(n, n) - unobservable)
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::DivergentUnobservableMass {
                site: mask.site.to_string(),
                state: automaton.state_name(estimate.members()[0].0).to_string(),
            })?;

        for (event, target_id) in logical.transitions_from(id) {
            let target = logical.estimate(target_id);
            let class = automaton.event(event).failure_class;
            let mut matrix = TransitionMatrix::zeros(estimate.len(), target.len());
            for (row, member) in estimate.members().iter().enumerate() {
                let from = position[member];
                for j in reachable_from(&successors, from) {
                    let (q, l) = region[j];
                    if let Some((next, p)) = automaton.step(q, event) {
                        let col = target
                            .position(&(next, l.after(class)))
                            .expect("observable step target is in the successor estimate");
                        matrix.add(row, col, visits[(from, j)] * p);
                    }
                }
            }
            matrices.insert((id, event), matrix);
        }
    }

    Ok(StochasticDiagnoser {
        logical,
        matrices,
        initial_mass: vec![1.0],
    })
}

fn can_reach_escape(successors: &[Vec<usize>], escape: &[f64]) -> Vec<bool> {
    let n = successors.len();
    let mut predecessors = vec![Vec::new(); n];
    for (i, succ) in successors.iter().enumerate() {
        for &j in succ {
            predecessors[j].push(i);
        }
    }
    let mut leaks: Vec<bool> = escape.iter().map(|&e| e > ESCAPE_EPSILON).collect();
    let mut stack: Vec<usize> = (0..n).filter(|&i| leaks[i]).collect();
    while let Some(j) = stack.pop() {
        for &i in &predecessors[j] {
            if !leaks[i] {
                leaks[i] = true;
                stack.push(i);
            }
        }
    }
    leaks
}

fn reachable_from(successors: &[Vec<usize>], start: usize) -> Vec<usize> {
    let mut seen = vec![false; successors.len()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(i) = stack.pop() {
        for &j in &successors[i] {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    (0..successors.len()).filter(|&i| seen[i]).collect()
}

/// A finite Markov chain as sparse rows of `(target, weight)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MarkovChain {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl MarkovChain {
    pub fn new(rows: Vec<Vec<(usize, f64)>>) -> Self {
        MarkovChain { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row_sum(&self, node: usize) -> f64 {
        self.rows[node].iter().map(|&(_, w)| w).sum()
    }

    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.rows[from].iter().filter(|&&(t, _)| t == to).map(|&(_, w)| w).sum()
    }

    fn support(&self) -> Vec<Vec<usize>> {
        self.rows
            .iter()
            .map(|row| row.iter().filter(|&&(_, w)| w > 0.0).map(|&(t, _)| t).collect())
            .collect()
    }

    /// Distribution after one step.
    pub fn advance(&self, mass: &[f64]) -> Vec<f64> {
        let mut next = vec![0.0; self.len()];
        for (i, row) in self.rows.iter().enumerate() {
            if mass[i] == 0.0 {
                continue;
            }
            for &(j, w) in row {
                next[j] += mass[i] * w;
            }
        }
        next
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ComponentNode {
    pub estimate: usize,
    pub state: StateId,
    pub label: Label,
}

impl ComponentNode {
    pub fn member(&self) -> Member {
        (self.state, self.label)
    }
}

/// The Markov chain whose nodes are the `(estimate, member)` components of
/// a stochastic diagnoser.
#[derive(Clone, Debug)]
pub struct ComponentChain {
    pub nodes: Vec<ComponentNode>,
    pub chain: MarkovChain,
    index: HashMap<ComponentNode, usize>,
}

impl ComponentChain {
    pub fn index_of(&self, node: &ComponentNode) -> Option<usize> {
        self.index.get(node).copied()
    }

    pub fn weight(&self, from: &ComponentNode, to: &ComponentNode) -> f64 {
        match (self.index_of(from), self.index_of(to)) {
            (Some(i), Some(j)) => self.chain.weight(i, j),
            _ => 0.0,
        }
    }
}

/// Per-event matrix entries between the same pair of components are summed.
pub fn component_chain(sd: &StochasticDiagnoser) -> ComponentChain {
    let logical = sd.logical();
    let mut nodes = Vec::new();
    let mut offsets = Vec::with_capacity(logical.state_count());
    for (id, estimate) in logical.states().iter().enumerate() {
        offsets.push(nodes.len());
        nodes.extend(estimate.members().iter().map(|&(state, label)| ComponentNode {
            estimate: id,
            state,
            label,
        }));
    }
    let mut weights: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); nodes.len()];
    for ((source, event), matrix) in sd.matrices() {
        let target = logical.step(source, event).expect("matrix implies transition");
        for r in 0..matrix.rows() {
            for c in 0..matrix.cols() {
                let w = matrix.get(r, c);
                if w > 0.0 {
                    *weights[offsets[source] + r].entry(offsets[target] + c).or_insert(0.0) += w;
                }
            }
        }
    }
    let index = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    ComponentChain {
        nodes,
        chain: MarkovChain::new(weights.into_iter().map(|row| row.into_iter().collect()).collect()),
        index,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RecurrenceReport {
    pub recurrent: BTreeSet<usize>,
    pub transient: BTreeSet<usize>,
}

impl RecurrenceReport {
    pub fn is_recurrent(&self, node: usize) -> bool {
        self.recurrent.contains(&node)
    }
}

/// A node is recurrent iff its strongly connected component has no
/// positive-weight edge leaving it.
pub fn classify_recurrence(chain: &MarkovChain) -> RecurrenceReport {
    let adj = chain.support();
    let sccs = graph::strongly_connected_components(&adj);
    let mut report = RecurrenceReport::default();
    for c in 0..sccs.components.len() {
        let target = if sccs.is_closed(&adj, c) {
            &mut report.recurrent
        } else {
            &mut report.transient
        };
        target.extend(sccs.components[c].iter().copied());
    }
    report
}

/// Component chain and its recurrence classification for one diagnoser.
#[derive(Clone, Debug)]
pub struct RecurrenceAnalysis {
    pub chain: ComponentChain,
    pub report: RecurrenceReport,
}

impl RecurrenceAnalysis {
    pub fn of(sd: &StochasticDiagnoser) -> Self {
        let chain = component_chain(sd);
        let report = classify_recurrence(&chain.chain);
        RecurrenceAnalysis { chain, report }
    }

    pub fn is_recurrent(&self, node: &ComponentNode) -> bool {
        self.chain.index_of(node).is_some_and(|i| self.report.is_recurrent(i))
    }

    pub fn recurrent_bearing(&self, class: FailureClass) -> BTreeSet<ComponentNode> {
        self.report
            .recurrent
            .iter()
            .map(|&i| self.chain.nodes[i])
            .filter(|n| n.label.contains(class))
            .collect()
    }
}

pub fn recurrent_f_components(sd: &StochasticDiagnoser, class: FailureClass) -> BTreeSet<ComponentNode> {
    RecurrenceAnalysis::of(sd).recurrent_bearing(class)
}

/// Centralized check: every estimate holding a recurrent component that
/// bears the class must be certain of it.
pub fn is_diagnosable_centralized(sd: &StochasticDiagnoser, class: FailureClass) -> bool {
    diagnosable_with(sd, &RecurrenceAnalysis::of(sd), class)
}

pub(crate) fn diagnosable_with(sd: &StochasticDiagnoser, analysis: &RecurrenceAnalysis, class: FailureClass) -> bool {
    analysis
        .recurrent_bearing(class)
        .iter()
        .all(|n| classify(sd.logical().estimate(n.estimate), class) == Certainty::FCertain)
}

/// Probability mass still on transient nodes after `n` steps from `node`.
pub fn transient_escape_bound(chain: &MarkovChain, node: usize, n: usize) -> f64 {
    let report = classify_recurrence(chain);
    let mut mass = vec![0.0; chain.len()];
    mass[node] = 1.0;
    for _ in 0..n {
        mass = chain.advance(&mass);
    }
    report.transient.iter().map(|&i| mass[i]).sum()
}
