//! `codiag MODEL [options]`: decide codiagnosability of a model file.
//!
//! Exit status: 0 codiagnosable (or, with `--site`, centrally diagnosable
//! at that site), 1 not, 2 on any input or validation error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use codiag::automaton::StochasticAutomaton;
use codiag::dot;
use codiag::model_file::parse_model;
use codiag::report::{render_trace, run_pipeline, PipelineOptions, PipelineOutput, Simulation};
use codiag::verifier::DecayCurve;

#[derive(Parser, Debug)]
#[command(
    name = "codiag",
    version,
    about = "Decentralized diagnosability of stochastic discrete event systems"
)]
struct Args {
    /// Model file.
    model: PathBuf,

    /// Print only the verdict.
    #[arg(long)]
    check: bool,

    /// Write the full JSON report here.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,

    /// Write DOT files for every machine into this directory.
    #[arg(long, value_name = "DIR")]
    dot: Option<PathBuf>,

    /// Estimate non-detection curves by Monte-Carlo sampling.
    #[arg(long)]
    simulate: bool,

    /// Horizon for sampled curves.
    #[arg(long, value_name = "N", default_value_t = 25)]
    n: usize,

    /// Sampled continuations per point.
    #[arg(long, value_name = "T", default_value_t = 10_000)]
    trials: u64,

    /// Random seed for sampling.
    #[arg(long, value_name = "S", env = "CODIAG_SEED", default_value_t = 0)]
    seed: u64,

    /// Also run the centralized check for this site (1-based); the exit
    /// status then reflects that check.
    #[arg(long, value_name = "I")]
    site: Option<usize>,

    /// Failure class to analyze (defaults to the first declared).
    #[arg(long, value_name = "NAME")]
    class: Option<String>,

    /// Write decay curves as CSV (`seed,site,n,probability`). Sampled curves
    /// when `--simulate` is given, exact ones otherwise.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(args: &Args) -> Result<u8, String> {
    let text = fs::read_to_string(&args.model).map_err(|e| format!("{}: {e}", args.model.display()))?;
    let automaton = parse_model(&text).map_err(|e| format!("{}:{e}", args.model.display()))?;
    let options = PipelineOptions {
        class: args.class.clone(),
        site: args.site,
        simulation: args.simulate.then_some(Simulation {
            horizon: args.n,
            trials: args.trials,
            rng_seed: args.seed,
        }),
    };
    let out = run_pipeline(&automaton, &options).map_err(|e| e.to_string())?;

    print_summary(&out, args.check);
    if let Some(path) = &args.report {
        let mut json = serde_json::to_string_pretty(&out.report).map_err(|e| e.to_string())?;
        json.push('\n');
        fs::write(path, json).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if let Some(dir) = &args.dot {
        write_dot(dir, &automaton, &out)?;
    }
    if let Some(path) = &args.csv {
        let curves = out.sampled_curves.as_ref().unwrap_or(&out.exact_curves);
        write_csv(path, &automaton, curves)?;
    }
    Ok(u8::try_from(out.exit_code()).unwrap_or(2))
}

fn print_summary(out: &PipelineOutput, check_only: bool) {
    let r = &out.report;
    println!("codiagnosable: {}", r.verdict.codiagnosable);
    if let Some(cycle) = &r.verdict.witness_cycle {
        println!("witness cycle:");
        for step in cycle {
            println!("  {} --{}-->", step.state, step.event);
        }
    }
    if let Some(check) = &r.centralized_site {
        println!("site {} centrally diagnosable: {}", check.site, check.diagnosable);
    }
    if check_only {
        return;
    }
    for (i, d) in r.verdict.per_site_centralized.iter().enumerate() {
        println!(
            "site {}: {} diagnoser states, centrally diagnosable: {d}",
            i + 1,
            r.site_diagnosers[i].diagnoser.states.len()
        );
    }
    println!(
        "codiagnoser: {} states, {} transitions",
        r.codiagnoser.states.len(),
        r.codiagnoser.transitions.len()
    );
    for (label, decay) in std::iter::once(("exact", &r.decay)).chain(r.simulation.iter().map(|s| ("sampled", s))) {
        println!(
            "{label} non-detection at n={}: behaviorally codiagnosable: {}",
            decay.horizon, decay.behaviorally_codiagnosable
        );
        for c in &decay.curves {
            println!("  seed {}: min over sites {:.6}", c.seed, c.min_at_horizon);
        }
    }
}

fn write_dot(dir: &Path, automaton: &StochasticAutomaton, out: &PipelineOutput) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let an = &out.analysis;
    let mut files = vec![
        ("automaton.dot".to_string(), dot::automaton_dot(automaton)),
        (
            "global_diagnoser.dot".to_string(),
            dot::logical_diagnoser_dot(automaton, an.global.logical()),
        ),
        (
            "codiagnoser.dot".to_string(),
            dot::codiagnoser_dot(automaton, &an.codiagnoser),
        ),
    ];
    for (i, sd) in an.sites.iter().enumerate() {
        files.push((
            format!("site{}_diagnoser.dot", i + 1),
            dot::logical_diagnoser_dot(automaton, sd.logical()),
        ));
        files.push((
            format!("site{}_stochastic.dot", i + 1),
            dot::stochastic_diagnoser_dot(automaton, sd),
        ));
    }
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(())
}

fn write_csv(path: &Path, automaton: &StochasticAutomaton, curves: &[DecayCurve]) -> Result<(), String> {
    let err = |e: csv::Error| format!("{}: {e}", path.display());
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["seed", "site", "n", "probability"]).map_err(err)?;
    for c in curves {
        let seed = render_trace(automaton, &c.seed);
        for (site, points) in &c.per_site {
            for p in points {
                w.write_record([
                    seed.clone(),
                    (site.0 + 1).to_string(),
                    p.n.to_string(),
                    p.probability.to_string(),
                ])
                .map_err(err)?;
            }
        }
    }
    w.flush().map_err(|e| format!("{}: {e}", path.display()))
}
