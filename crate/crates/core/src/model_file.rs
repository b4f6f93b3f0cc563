//! Line-oriented model files.
//!
//! ```text
//! # comment
//! states 0 1 2
//! init 0
//! sites 2
//! event a obs 1 2
//! event f fail F
//! trans 0 f 1 0.3
//! ```
//!
//! `fail` without a class name puts the event in class `F`.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::automaton::{AutomatonBuilder, StochasticAutomaton};
use crate::error::{Error, Result};

pub const DEFAULT_FAILURE_CLASS: &str = "F";

struct EventLine {
    line: usize,
    name: String,
    sites: Vec<(usize, usize)>,
    class: Option<String>,
}

struct TransLine {
    line: usize,
    source: String,
    event: String,
    target: String,
    probability: f64,
}

pub fn parse_model(text: &str) -> Result<StochasticAutomaton> {
    let mut states: Vec<(usize, String)> = Vec::new();
    let mut init: Option<(usize, String)> = None;
    let mut sites: Option<usize> = None;
    let mut events: Vec<EventLine> = Vec::new();
    let mut transitions: Vec<TransLine> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens = tokenize(content);
        let Some(&(keyword_col, keyword)) = tokens.first() else {
            continue;
        };
        let rest = &tokens[1..];
        let parse_err = |column: usize, message: String| Error::Parse { line, column, message };
        let end_col = content.trim_end().len() + 1;
        match keyword {
            "states" => {
                if rest.is_empty() {
                    return Err(parse_err(end_col, "expected at least one state id".into()));
                }
                for &(_, s) in rest {
                    states.push((line, s.to_string()));
                }
            }
            "init" => {
                let [(_, id)] = rest else {
                    return Err(parse_err(keyword_col, "expected `init <state>`".into()));
                };
                if init.is_some() {
                    return Err(Error::Semantic {
                        line,
                        message: "initial state declared twice".into(),
                    });
                }
                init = Some((line, id.to_string()));
            }
            "sites" => {
                let [(col, m)] = rest else {
                    return Err(parse_err(keyword_col, "expected `sites <count>`".into()));
                };
                let m: usize = m
                    .parse()
                    .map_err(|_| parse_err(*col, format!("invalid site count `{m}`")))?;
                if sites.is_some() {
                    return Err(Error::Semantic {
                        line,
                        message: "site count declared twice".into(),
                    });
                }
                sites = Some(m);
            }
            "event" => {
                let Some(&(_, name)) = rest.first() else {
                    return Err(parse_err(end_col, "expected event id".into()));
                };
                let mut decl = EventLine {
                    line,
                    name: name.to_string(),
                    sites: Vec::new(),
                    class: None,
                };
                let mut i = 1;
                let mut seen_obs = false;
                let mut seen_fail = false;
                while i < rest.len() {
                    let (col, word) = rest[i];
                    match word {
                        "obs" if !seen_obs => {
                            seen_obs = true;
                            i += 1;
                            while i < rest.len() && rest[i].1 != "fail" {
                                let (c, s) = rest[i];
                                let site: usize = s.parse().map_err(|_| parse_err(c, format!("invalid site `{s}`")))?;
                                decl.sites.push((c, site));
                                i += 1;
                            }
                        }
                        "fail" if !seen_fail => {
                            seen_fail = true;
                            i += 1;
                            match rest.get(i) {
                                Some(&(_, class)) if class != "obs" => {
                                    decl.class = Some(class.to_string());
                                    i += 1;
                                }
                                _ => decl.class = Some(DEFAULT_FAILURE_CLASS.to_string()),
                            }
                        }
                        other => return Err(parse_err(col, format!("unexpected `{other}` in event declaration"))),
                    }
                }
                events.push(decl);
            }
            "trans" => {
                let [(_, src), (_, ev), (_, dst), (pcol, p)] = rest else {
                    return Err(parse_err(
                        keyword_col,
                        "expected `trans <src> <event> <dst> <prob>`".into(),
                    ));
                };
                let probability: f64 = p
                    .parse()
                    .map_err(|_| parse_err(*pcol, format!("invalid probability `{p}`")))?;
                transitions.push(TransLine {
                    line,
                    source: src.to_string(),
                    event: ev.to_string(),
                    target: dst.to_string(),
                    probability,
                });
            }
            other => return Err(parse_err(keyword_col, format!("unknown directive `{other}`"))),
        }
    }

    let semantic = |line: usize, message: String| Error::Semantic { line, message };
    let sites = sites.ok_or_else(|| semantic(text.lines().count().max(1), "missing `sites` declaration".into()))?;
    if states.is_empty() {
        return Err(semantic(1, "missing `states` declaration".into()));
    }

    let mut builder = AutomatonBuilder::new(sites);
    let mut state_set = HashSet::new();
    for (line, s) in &states {
        if !state_set.insert(s.clone()) {
            return Err(semantic(*line, format!("state `{s}` declared twice")));
        }
        builder.state(s);
    }
    match &init {
        Some((line, id)) => {
            if !state_set.contains(id) {
                return Err(semantic(*line, format!("undeclared state `{id}`")));
            }
            builder.initial(id);
        }
        None => return Err(semantic(1, "missing `init` declaration".into())),
    }

    let mut event_set = HashSet::new();
    for e in &events {
        if !event_set.insert(e.name.clone()) {
            return Err(semantic(e.line, format!("event `{}` declared twice", e.name)));
        }
        let mut site_list = Vec::new();
        for &(_, site) in &e.sites {
            if site == 0 || site > sites {
                return Err(semantic(
                    e.line,
                    format!("site {site} out of range 1..={sites} for event `{}`", e.name),
                ));
            }
            site_list.push(site);
        }
        builder.event_decl(&e.name, &site_list, e.class.as_deref());
    }

    let mut pairs = HashSet::new();
    for t in &transitions {
        for s in [&t.source, &t.target] {
            if !state_set.contains(s) {
                return Err(semantic(t.line, format!("undeclared state `{s}`")));
            }
        }
        if !event_set.contains(&t.event) {
            return Err(semantic(t.line, format!("undeclared event `{}`", t.event)));
        }
        if !(t.probability > 0.0 && t.probability <= 1.0) {
            return Err(semantic(
                t.line,
                format!("probability {} out of range (0, 1]", t.probability),
            ));
        }
        if !pairs.insert((t.source.clone(), t.event.clone())) {
            return Err(semantic(
                t.line,
                format!("duplicate transition from `{}` on `{}`", t.source, t.event),
            ));
        }
        builder.transition(&t.source, &t.event, &t.target, t.probability);
    }
    builder.build()
}

fn tokenize(content: &str) -> Vec<(usize, &str)> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, ch) in content.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push((s + 1, &content[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push((s + 1, &content[s..]));
    }
    tokens
}

/// Writes a model back out in the same grammar. Probabilities use Rust's
/// shortest round-tripping float formatting.
pub fn serialize_model(automaton: &StochasticAutomaton) -> String {
    let mut out = String::new();
    let states: Vec<&str> = automaton.states().map(|q| automaton.state_name(q)).collect();
    let _ = writeln!(out, "states {}", states.join(" "));
    let _ = writeln!(out, "init {}", automaton.state_name(automaton.initial()));
    let _ = writeln!(out, "sites {}", automaton.sites());
    for decl in automaton.events() {
        let _ = write!(out, "event {}", decl.name);
        if !decl.observable_at.is_empty() {
            out.push_str(" obs");
            for s in &decl.observable_at {
                let _ = write!(out, " {s}");
            }
        }
        if let Some(class) = decl.failure_class {
            let _ = write!(out, " fail {}", automaton.class_name(class));
        }
        out.push('\n');
    }
    for t in automaton.transitions() {
        let _ = writeln!(
            out,
            "trans {} {} {} {}",
            automaton.state_name(t.source),
            automaton.event_name(t.event),
            automaton.state_name(t.target),
            t.probability
        );
    }
    out
}
