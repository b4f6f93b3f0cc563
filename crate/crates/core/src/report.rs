//! End-to-end analysis of one model and its serializable report. Traces and
//! events are rendered by name; an empty trace or a silent site is `eps`.

use serde::{Deserialize, Serialize};

use crate::automaton::{FailureClass, SiteId, StochasticAutomaton, Trace};
use crate::codiagnoser::{analyze_codiagnosability, reachability_witness, CodiagnosabilityAnalysis};
use crate::error::{Error, Result};
use crate::observer::LogicalDiagnoser;
use crate::stochastic::StochasticDiagnoser;
use crate::verifier::{behaviorally_codiagnosable, decay_curve, DecayCurve, DecayMode, DECAY_HORIZON, DECAY_THRESHOLD};

pub const EPSILON: &str = "eps";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Simulation {
    pub horizon: usize,
    pub trials: u64,
    pub rng_seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PipelineOptions {
    /// Failure class by name; the model's first class when absent.
    pub class: Option<String>,
    /// One-based site for the single-site centralized check.
    pub site: Option<usize>,
    pub simulation: Option<Simulation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub model: ModelSummary,
    pub class: String,
    pub verdict: VerdictReport,
    pub centralized_site: Option<SiteCheck>,
    pub global_diagnoser: DiagnoserReport,
    pub site_diagnosers: Vec<SiteReport>,
    pub codiagnoser: CodiagnoserReport,
    pub decay: DecayReport,
    pub simulation: Option<DecayReport>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub states: usize,
    pub events: usize,
    pub transitions: usize,
    pub sites: usize,
    pub failure_classes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleStep {
    pub state: String,
    pub event: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub codiagnosable: bool,
    pub witness_cycle: Option<Vec<CycleStep>>,
    pub per_site_centralized: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteCheck {
    pub site: usize,
    pub diagnosable: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub event: String,
    pub to: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnoserReport {
    pub states: Vec<String>,
    pub transitions: Vec<Edge>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub from: usize,
    pub event: String,
    pub to: usize,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteReport {
    pub site: usize,
    pub observable: Vec<String>,
    pub diagnoser: DiagnoserReport,
    pub matrices: Vec<MatrixReport>,
    /// `estimate:(state,label)` for every recurrent component bearing the class.
    pub recurrent_failure_components: Vec<String>,
    pub centrally_diagnosable: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformReport {
    pub state: usize,
    pub shared: String,
    pub witness: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodiagStateReport {
    pub label: String,
    pub f_uncertain: bool,
    pub witness_global: String,
    pub witness_sites: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodiagnoserReport {
    pub states: Vec<CodiagStateReport>,
    pub transitions: Vec<Edge>,
    pub uniform_recurrent: Vec<UniformReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePointReport {
    pub n: usize,
    pub probability: f64,
    pub standard_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteCurveReport {
    pub site: usize,
    pub points: Vec<CurvePointReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub seed: String,
    pub per_site: Vec<SiteCurveReport>,
    pub min_at_horizon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub mode: String,
    pub horizon: usize,
    pub trials: Option<u64>,
    pub rng_seed: Option<u64>,
    pub threshold: f64,
    pub behaviorally_codiagnosable: bool,
    pub curves: Vec<CurveReport>,
}

/// Everything the pipeline computed, with the report built from it.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub analysis: CodiagnosabilityAnalysis,
    pub exact_curves: Vec<DecayCurve>,
    pub sampled_curves: Option<Vec<DecayCurve>>,
    pub report: Report,
}

impl PipelineOutput {
    /// 0 when the question asked (codiagnosability, or centralized
    /// diagnosability with a site selected) is answered yes, otherwise 1.
    pub fn exit_code(&self) -> i32 {
        let yes = match &self.report.centralized_site {
            Some(check) => check.diagnosable,
            None => self.report.verdict.codiagnosable,
        };
        if yes {
            0
        } else {
            1
        }
    }
}

pub fn render_trace(automaton: &StochasticAutomaton, trace: &Trace) -> String {
    if trace.is_empty() {
        EPSILON.to_string()
    } else {
        automaton.render_trace(trace)
    }
}

pub fn resolve_class(automaton: &StochasticAutomaton, name: Option<&str>) -> Result<FailureClass> {
    match name {
        Some(n) => automaton.class_id(n),
        None if !automaton.failure_classes().is_empty() => Ok(FailureClass(0)),
        None => Err(Error::UnknownFailureClass(
            crate::model_file::DEFAULT_FAILURE_CLASS.into(),
        )),
    }
}

/// Build diagnosers and the codiagnoser, decide codiagnosability, then
/// compute exact decay curves and (optionally) sampled ones.
pub fn run_pipeline(automaton: &StochasticAutomaton, options: &PipelineOptions) -> Result<PipelineOutput> {
    let class = resolve_class(automaton, options.class.as_deref())?;
    if let Some(site) = options.site {
        if site == 0 || site > automaton.sites() {
            return Err(Error::SiteOutOfRange {
                site,
                sites: automaton.sites(),
            });
        }
    }
    let analysis = analyze_codiagnosability(automaton, &automaton.site_masks(), class)?;
    let sites: Vec<SiteId> = automaton.site_ids().collect();
    let exact_curves = decay_curve(automaton, &sites, class, DECAY_HORIZON, DecayMode::Exact)?;
    let sampled_curves = options
        .simulation
        .map(|s| {
            decay_curve(
                automaton,
                &sites,
                class,
                s.horizon,
                DecayMode::Sampled {
                    trials: s.trials,
                    rng_seed: s.rng_seed,
                },
            )
        })
        .transpose()?;

    let report = Report {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        model: ModelSummary {
            states: automaton.state_count(),
            events: automaton.event_count(),
            transitions: automaton.transitions().len(),
            sites: automaton.sites(),
            failure_classes: automaton.failure_classes().to_vec(),
        },
        class: automaton.class_name(class).to_string(),
        verdict: verdict_report(automaton, &analysis),
        centralized_site: options.site.map(|site| SiteCheck {
            site,
            diagnosable: analysis.verdict.per_site_centralized[site - 1],
        }),
        global_diagnoser: diagnoser_report(automaton, analysis.global.logical()),
        site_diagnosers: (0..analysis.sites.len())
            .map(|i| site_report(automaton, &analysis, i))
            .collect(),
        codiagnoser: codiagnoser_report(automaton, &analysis),
        decay: decay_report(automaton, &exact_curves, DECAY_HORIZON, None),
        simulation: options
            .simulation
            .as_ref()
            .zip(sampled_curves.as_ref())
            .map(|(s, curves)| decay_report(automaton, curves, s.horizon, Some(s))),
    };
    Ok(PipelineOutput {
        analysis,
        exact_curves,
        sampled_curves,
        report,
    })
}

fn verdict_report(automaton: &StochasticAutomaton, analysis: &CodiagnosabilityAnalysis) -> VerdictReport {
    let v = &analysis.verdict;
    VerdictReport {
        codiagnosable: v.codiagnosable,
        witness_cycle: v.witness_cycle.as_ref().map(|cycle| {
            cycle
                .iter()
                .map(|(s, e)| CycleStep {
                    state: analysis.codiagnoser.render_state(automaton, *s),
                    event: e.render(automaton, EPSILON),
                })
                .collect()
        }),
        per_site_centralized: v.per_site_centralized.clone(),
    }
}

fn diagnoser_report(automaton: &StochasticAutomaton, diagnoser: &LogicalDiagnoser) -> DiagnoserReport {
    DiagnoserReport {
        states: diagnoser.states().iter().map(|e| e.render(automaton)).collect(),
        transitions: diagnoser
            .edges()
            .into_iter()
            .map(|(from, e, to)| Edge {
                from,
                event: automaton.event_name(e).to_string(),
                to,
            })
            .collect(),
    }
}

fn site_report(automaton: &StochasticAutomaton, analysis: &CodiagnosabilityAnalysis, i: usize) -> SiteReport {
    let sd: &StochasticDiagnoser = &analysis.sites[i];
    let logical = sd.logical();
    SiteReport {
        site: i + 1,
        observable: logical
            .mask()
            .observable
            .iter()
            .map(|&e| automaton.event_name(e).to_string())
            .collect(),
        diagnoser: diagnoser_report(automaton, logical),
        matrices: sd
            .matrices()
            .map(|((from, e), m)| MatrixReport {
                from,
                event: automaton.event_name(e).to_string(),
                to: logical.step(from, e).expect("matrix implies transition"),
                rows: m.to_rows(),
            })
            .collect(),
        recurrent_failure_components: analysis.recurrence[i]
            .recurrent_bearing(analysis.class)
            .iter()
            .map(|n| {
                format!(
                    "{}:({},{})",
                    n.estimate,
                    automaton.state_name(n.state),
                    n.label.render(automaton)
                )
            })
            .collect(),
        centrally_diagnosable: analysis.verdict.per_site_centralized[i],
    }
}

fn codiagnoser_report(automaton: &StochasticAutomaton, analysis: &CodiagnosabilityAnalysis) -> CodiagnoserReport {
    let c = &analysis.codiagnoser;
    CodiagnoserReport {
        states: (0..c.state_count())
            .map(|id| {
                let w = reachability_witness(c, id).expect("constructed state");
                CodiagStateReport {
                    label: c.render_state(automaton, id),
                    f_uncertain: c.is_f_uncertain(id, analysis.class),
                    witness_global: render_trace(automaton, &w.global),
                    witness_sites: w.locals.iter().map(|t| render_trace(automaton, t)).collect(),
                }
            })
            .collect(),
        transitions: c
            .edges()
            .into_iter()
            .map(|(from, e, to)| Edge {
                from,
                event: e.render(automaton, EPSILON),
                to,
            })
            .collect(),
        uniform_recurrent: analysis
            .uniform
            .values()
            .flatten()
            .map(|u| UniformReport {
                state: u.state,
                shared: format!(
                    "({},{})",
                    automaton.state_name(u.shared.0),
                    u.shared.1.render(automaton)
                ),
                witness: render_trace(automaton, &u.witness),
            })
            .collect(),
    }
}

fn decay_report(
    automaton: &StochasticAutomaton,
    curves: &[DecayCurve],
    horizon: usize,
    simulation: Option<&Simulation>,
) -> DecayReport {
    DecayReport {
        mode: if simulation.is_some() { "sampled" } else { "exact" }.to_string(),
        horizon,
        trials: simulation.map(|s| s.trials),
        rng_seed: simulation.map(|s| s.rng_seed),
        threshold: DECAY_THRESHOLD,
        behaviorally_codiagnosable: behaviorally_codiagnosable(curves, DECAY_THRESHOLD),
        curves: curves
            .iter()
            .map(|c| CurveReport {
                seed: render_trace(automaton, &c.seed),
                per_site: c
                    .per_site
                    .iter()
                    .map(|(site, pts)| SiteCurveReport {
                        site: site.0 + 1,
                        points: pts
                            .iter()
                            .map(|p| CurvePointReport {
                                n: p.n,
                                probability: p.probability,
                                standard_error: p.standard_error,
                            })
                            .collect(),
                    })
                    .collect(),
                min_at_horizon: c.final_min().unwrap_or(1.0),
            })
            .collect(),
    }
}
