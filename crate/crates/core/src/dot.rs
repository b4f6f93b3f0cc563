//! Graphviz export. Node `nK` is state/estimate `K` in the machine's own
//! numbering; the initial node is drawn with a double border.

use std::fmt::Write as _;

use crate::automaton::StochasticAutomaton;
use crate::codiagnoser::Codiagnoser;
use crate::observer::LogicalDiagnoser;
use crate::stochastic::StochasticDiagnoser;

fn quote(text: &str) -> String {
    format!("\"{}\"", text.replace('\\', "\\\\").replace('"', "\\\""))
}

struct Dot {
    out: String,
}

impl Dot {
    fn new(name: &str) -> Self {
        let mut out = String::new();
        let _ = writeln!(out, "digraph {} {{", quote(name));
        out.push_str("  rankdir=LR;\n  node [shape=box];\n");
        Dot { out }
    }

    fn node(&mut self, id: usize, label: &str, initial: bool) {
        let _ = write!(self.out, "  n{id} [label={}", quote(label));
        if initial {
            self.out.push_str(", peripheries=2");
        }
        self.out.push_str("];\n");
    }

    fn edge(&mut self, from: usize, to: usize, label: &str) {
        let _ = writeln!(self.out, "  n{from} -> n{to} [label={}];", quote(label));
    }

    fn finish(mut self) -> String {
        self.out.push_str("}\n");
        self.out
    }
}

/// Plant states with `(event, probability)` edges.
pub fn automaton_dot(automaton: &StochasticAutomaton) -> String {
    let mut dot = Dot::new("automaton");
    for q in automaton.states() {
        dot.node(q.0, automaton.state_name(q), q == automaton.initial());
    }
    for t in automaton.transitions() {
        dot.edge(
            t.source.0,
            t.target.0,
            &format!("({}, {})", automaton.event_name(t.event), t.probability),
        );
    }
    dot.finish()
}

pub fn logical_diagnoser_dot(automaton: &StochasticAutomaton, diagnoser: &LogicalDiagnoser) -> String {
    let mut dot = Dot::new(&format!("diagnoser {}", diagnoser.mask().site));
    for (id, est) in diagnoser.states().iter().enumerate() {
        dot.node(id, &est.render(automaton), id == diagnoser.initial());
    }
    for (s, e, t) in diagnoser.edges() {
        dot.edge(s, t, automaton.event_name(e));
    }
    dot.finish()
}

/// Edges carry the event and its matrix, rows separated by `;`.
pub fn stochastic_diagnoser_dot(automaton: &StochasticAutomaton, sd: &StochasticDiagnoser) -> String {
    let diagnoser = sd.logical();
    let mut dot = Dot::new(&format!("stochastic diagnoser {}", diagnoser.mask().site));
    for (id, est) in diagnoser.states().iter().enumerate() {
        dot.node(id, &est.render(automaton), id == diagnoser.initial());
    }
    for ((s, e), matrix) in sd.matrices() {
        let t = diagnoser.step(s, e).expect("matrix implies transition");
        let rows: Vec<String> = matrix
            .to_rows()
            .iter()
            .map(|r| r.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(" "))
            .collect();
        dot.edge(s, t, &format!("{} [{}]", automaton.event_name(e), rows.join("; ")));
    }
    dot.finish()
}

/// Codiagnoser edges are tuples with `ε` for sites that see nothing.
pub fn codiagnoser_dot(automaton: &StochasticAutomaton, codiag: &Codiagnoser) -> String {
    let mut dot = Dot::new("codiagnoser");
    for id in 0..codiag.state_count() {
        dot.node(id, &codiag.render_state(automaton, id), id == codiag.initial());
    }
    for (s, e, t) in codiag.edges() {
        dot.edge(s, t, &e.render(automaton, "ε"));
    }
    dot.finish()
}
