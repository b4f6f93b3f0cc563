//! Behavioral oracle: the probability that a site has not become certain of
//! a failure `n` steps after it happened, computed exactly and by sampling.
//!
//! Continuations of length `n` are distributed by the per-state event
//! probabilities. A site "detects" once its diagnoser estimate is certain of
//! the class; certainty is absorbing, so the non-detection probability never
//! increases with `n`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::automaton::{
    deduce_dfa, enumerate_continuations, failure_seeds, project, trace_probability, FailureClass, SiteId, StateId,
    StochasticAutomaton, Trace,
};
use crate::error::{Error, Result};
use crate::observer::{build_logical_diagnoser, classify, Certainty, LogicalDiagnoser};

/// Threshold the min-over-sites envelope must fall below at
/// [`DECAY_HORIZON`] for the behavioral indicator to hold.
pub const DECAY_THRESHOLD: f64 = 0.01;
pub const DECAY_HORIZON: usize = 25;
/// Failure seeds considered by [`decay_curve`] have at most this length.
pub const SEED_LENGTH: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NonDetectionQuery {
    pub seed: Trace,
    pub horizon: usize,
    pub site: SiteId,
    pub class: FailureClass,
}

/// One site's diagnoser together with the plant, for repeated queries.
#[derive(Clone, Debug)]
pub struct Verifier<'a> {
    automaton: &'a StochasticAutomaton,
    diagnosers: Vec<LogicalDiagnoser>,
}

impl<'a> Verifier<'a> {
    pub fn new(automaton: &'a StochasticAutomaton) -> Self {
        let dfa = deduce_dfa(automaton);
        let diagnosers = automaton
            .site_masks()
            .iter()
            .map(|m| build_logical_diagnoser(&dfa, m))
            .collect();
        Verifier { automaton, diagnosers }
    }

    pub fn diagnoser(&self, site: SiteId) -> Result<&LogicalDiagnoser> {
        self.diagnosers.get(site.0).ok_or(Error::SiteOutOfRange {
            site: site.0 + 1,
            sites: self.diagnosers.len(),
        })
    }

    /// Post-seed plant state and site estimate.
    fn start(&self, query: &NonDetectionQuery) -> Result<(StateId, usize)> {
        let a = self.automaton;
        let last = query.seed.final_event();
        if last.map(|e| a.event(e).failure_class) != Some(Some(query.class)) {
            return Err(Error::NotAFailureSeed(a.render_trace(&query.seed)));
        }
        if trace_probability(a, a.initial(), &query.seed) <= 0.0 {
            return Err(Error::PrefixNotInLanguage(a.render_trace(&query.seed)));
        }
        let diag = self.diagnoser(query.site)?;
        let q = a.run(a.initial(), &query.seed).expect("seed is in the language");
        let observed = project(&query.seed, diag.mask());
        let est = diag
            .run(&observed)
            .ok_or_else(|| Error::UndefinedObservation(a.render_trace(&observed)))?;
        Ok((q, est))
    }

    fn certain(&self, site: SiteId, estimate: usize, class: FailureClass) -> bool {
        classify(self.diagnosers[site.0].estimate(estimate), class) == Certainty::FCertain
    }

    /// Non-detection probabilities for horizons `0..=max_n` in one forward
    /// pass over (plant state, site estimate) mass.
    pub fn exact_curve(&self, seed: &Trace, site: SiteId, class: FailureClass, max_n: usize) -> Result<Vec<f64>> {
        let query = NonDetectionQuery {
            seed: seed.clone(),
            horizon: max_n,
            site,
            class,
        };
        let start = self.start(&query)?;
        let diag = &self.diagnosers[site.0];
        let mut mass: BTreeMap<(StateId, usize), f64> = BTreeMap::from([(start, 1.0)]);
        let mut curve = Vec::with_capacity(max_n + 1);
        for n in 0..=max_n {
            // detected mass can be dropped: certainty is absorbing
            mass.retain(|&(_, est), _| !self.certain(site, est, class));
            // `+ 0.0` turns the empty sum (-0.0) into 0.0
            curve.push((mass.values().sum::<f64>() + 0.0).clamp(0.0, 1.0));
            if n == max_n {
                break;
            }
            let mut next: BTreeMap<(StateId, usize), f64> = BTreeMap::new();
            for (&(q, est), &p) in &mass {
                for t in self.automaton.outgoing(q) {
                    let est2 = if diag.mask().observes(t.event) {
                        diag.step(est, t.event)
                            .expect("plant move is consistent with the estimate")
                    } else {
                        est
                    };
                    *next.entry((t.target, est2)).or_insert(0.0) += p * t.probability;
                }
            }
            mass = next;
        }
        Ok(curve)
    }

    pub fn exact(&self, query: &NonDetectionQuery) -> Result<f64> {
        Ok(self.exact_curve(&query.seed, query.site, query.class, query.horizon)?[query.horizon])
    }

    /// Sums over every length-`n` continuation explicitly; bounded by the
    /// enumeration limit. Used to cross-check [`Verifier::exact`].
    pub fn exact_by_enumeration(&self, query: &NonDetectionQuery) -> Result<f64> {
        self.start(query)?;
        let diag = &self.diagnosers[query.site.0];
        let mut total = 0.0;
        for (t, p) in enumerate_continuations(self.automaton, &query.seed, query.horizon)? {
            let observed = project(&query.seed.concat(&t), diag.mask());
            let est = diag.run(&observed).expect("observation of a language trace");
            if !self.certain(query.site, est, query.class) {
                total += p;
            }
        }
        Ok(total)
    }

    /// One random continuation of length `steps`; entry `n` tells whether
    /// the site is still uncertain after `n` steps.
    fn sample_path(
        &self,
        start: (StateId, usize),
        query: &NonDetectionQuery,
        steps: usize,
        rng: &mut ChaCha8Rng,
    ) -> Vec<bool> {
        let diag = &self.diagnosers[query.site.0];
        let (mut q, mut est) = start;
        let mut undetected = Vec::with_capacity(steps + 1);
        undetected.push(!self.certain(query.site, est, query.class));
        for _ in 0..steps {
            if !undetected.last().copied().unwrap_or(false) {
                undetected.push(false);
                continue;
            }
            let draw: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = None;
            for t in self.automaton.outgoing(q) {
                acc += t.probability;
                chosen = Some(t);
                if draw < acc {
                    break;
                }
            }
            if let Some(t) = chosen {
                q = t.target;
                if diag.mask().observes(t.event) {
                    est = diag
                        .step(est, t.event)
                        .expect("plant move is consistent with the estimate");
                }
            }
            undetected.push(!self.certain(query.site, est, query.class));
        }
        undetected
    }

    /// Undetected counts for horizons `0..=max_n` over `trials` sampled
    /// paths. Trial `i` draws from stream `i` of a ChaCha8 generator keyed
    /// by `rng_seed`, so the result does not depend on scheduling.
    fn sample_counts(&self, query: &NonDetectionQuery, max_n: usize, trials: u64, rng_seed: u64) -> Result<Vec<u64>> {
        let start = self.start(query)?;
        Ok((0..trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
                rng.set_stream(trial);
                self.sample_path(start, query, max_n, &mut rng)
                    .into_iter()
                    .map(u64::from)
                    .collect::<Vec<u64>>()
            })
            .reduce(
                || vec![0; max_n + 1],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            ))
    }

    /// `(estimate, standard error)` with `se = sqrt(p(1-p)/trials)`.
    pub fn sample(&self, query: &NonDetectionQuery, trials: u64, rng_seed: u64) -> Result<(f64, f64)> {
        let counts = self.sample_counts(query, query.horizon, trials.max(1), rng_seed)?;
        Ok(estimate(counts[query.horizon], trials.max(1)))
    }
}

fn estimate(count: u64, trials: u64) -> (f64, f64) {
    let p = count as f64 / trials as f64;
    (p, (p * (1.0 - p) / trials as f64).sqrt())
}

pub fn exact_nondetection(automaton: &StochasticAutomaton, query: &NonDetectionQuery) -> Result<f64> {
    Verifier::new(automaton).exact(query)
}

pub fn sample_nondetection(
    automaton: &StochasticAutomaton,
    query: &NonDetectionQuery,
    trials: u64,
    rng_seed: u64,
) -> Result<(f64, f64)> {
    Verifier::new(automaton).sample(query, trials, rng_seed)
}

/// Probability of `continuation` given that `seed` has occurred.
pub fn witness_probability(automaton: &StochasticAutomaton, seed: &Trace, continuation: &Trace) -> Result<f64> {
    if trace_probability(automaton, automaton.initial(), seed) <= 0.0 {
        return Err(Error::PrefixNotInLanguage(automaton.render_trace(seed)));
    }
    let q = automaton
        .run(automaton.initial(), seed)
        .expect("seed is in the language");
    let p = trace_probability(automaton, q, continuation);
    if p <= 0.0 {
        return Err(Error::PrefixNotInLanguage(
            automaton.render_trace(&seed.concat(continuation)),
        ));
    }
    Ok(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayMode {
    Exact,
    Sampled { trials: u64, rng_seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub n: usize,
    pub probability: f64,
    /// Zero in exact mode.
    pub standard_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayCurve {
    pub seed: Trace,
    pub per_site: BTreeMap<SiteId, Vec<CurvePoint>>,
    /// Pointwise minimum over sites, as `(n, probability)`.
    pub min_envelope: Vec<(usize, f64)>,
}

impl DecayCurve {
    pub fn final_min(&self) -> Option<f64> {
        self.min_envelope.last().map(|&(_, p)| p)
    }
}

/// Curves for `n = 1..=max_n` for every failure seed of length at most
/// [`SEED_LENGTH`], in seed order.
pub fn decay_curve(
    automaton: &StochasticAutomaton,
    sites: &[SiteId],
    class: FailureClass,
    max_n: usize,
    mode: DecayMode,
) -> Result<Vec<DecayCurve>> {
    let verifier = Verifier::new(automaton);
    for &s in sites {
        verifier.diagnoser(s)?;
    }
    failure_seeds(automaton, class, SEED_LENGTH)
        .into_iter()
        .map(|seed| {
            let mut per_site = BTreeMap::new();
            for &site in sites {
                let points: Vec<CurvePoint> = match mode {
                    DecayMode::Exact => verifier
                        .exact_curve(&seed, site, class, max_n)?
                        .into_iter()
                        .enumerate()
                        .skip(1)
                        .map(|(n, probability)| CurvePoint {
                            n,
                            probability,
                            standard_error: 0.0,
                        })
                        .collect(),
                    DecayMode::Sampled { trials, rng_seed } => {
                        let trials = trials.max(1);
                        let query = NonDetectionQuery {
                            seed: seed.clone(),
                            horizon: max_n,
                            site,
                            class,
                        };
                        verifier
                            .sample_counts(&query, max_n, trials, rng_seed)?
                            .into_iter()
                            .enumerate()
                            .skip(1)
                            .map(|(n, count)| {
                                let (probability, standard_error) = estimate(count, trials);
                                CurvePoint {
                                    n,
                                    probability,
                                    standard_error,
                                }
                            })
                            .collect()
                    }
                };
                per_site.insert(site, points);
            }
            let min_envelope = (1..=max_n)
                .map(|n| {
                    let min = per_site
                        .values()
                        .map(|pts| pts[n - 1].probability)
                        .fold(f64::INFINITY, f64::min);
                    (n, if min.is_finite() { min } else { 1.0 })
                })
                .collect();
            Ok(DecayCurve {
                seed,
                per_site,
                min_envelope,
            })
        })
        .collect()
}

/// For every seed, some site's non-detection probability at the last
/// horizon is below `threshold`.
pub fn behaviorally_codiagnosable(curves: &[DecayCurve], threshold: f64) -> bool {
    curves.iter().all(|c| c.final_min().is_some_and(|p| p < threshold))
}
