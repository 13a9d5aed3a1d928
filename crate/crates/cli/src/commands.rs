use std::fs;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use cnflab::generators::{gadget_extra_assignment, gen_gadget, FamilySpec, GadgetSpec, GenError};
use cnflab::learner::{sample_complexity_sweep, sweep_csv, LearnError, TruthOracle};
use cnflab::resilience::{resilience_theta_with, ResilienceError};
use cnflab::reveal::{estimate_nice_probability, RevealError};
use cnflab::solutions::{enumerate_solutions_with, marginal_counts, tv_between, EnumerationLimits, SolutionError};
use cnflab::structure::{check_well_behaved, CheckLimits, PropertyParams, ASYMPTOTIC_PRESET};
use cnflab::{kds_parameters, parse_dimacs, write_dimacs, Assignment, CnfFormula, ExactProb, Rng, PRNG_ID};

use crate::config::{apply_param_overrides, validate_config, validate_reveal_config, ConfigError};
use crate::{CliError, Command, Family, FileArgs, GadgetVerifyArgs, GenerateArgs, LearnArgs, PropsArgs, RevealSimArgs, SweepArgs, TvArgs};

type CliResult<T> = Result<T, CliError>;

impl From<SolutionError> for CliError {
    fn from(e: SolutionError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<LearnError> for CliError {
    fn from(e: LearnError) -> Self {
        match e {
            LearnError::Invalid(m) => CliError::Usage(m),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<ResilienceError> for CliError {
    fn from(e: ResilienceError) -> Self {
        match e {
            ResilienceError::Invalid(m) => CliError::Usage(m),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<RevealError> for CliError {
    fn from(e: RevealError) -> Self {
        match e {
            RevealError::Invalid(m) => CliError::Usage(m),
            other => CliError::Domain(other.to_string()),
        }
    }
}

fn config_errors(errors: Vec<ConfigError>) -> CliError {
    CliError::Usage(
        errors
            .iter()
            .map(ConfigError::to_string)
            .collect::<Vec<_>>()
            .join("\n"),
    )
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, P: Serialize> {
    config: &'a C,
    tool_version: &'static str,
    prng: &'static str,
    wall_time_ms: f64,
    payload: P,
}

fn envelope_json<C: Serialize, P: Serialize>(config: &C, payload: P, start: Instant) -> String {
    let env = Envelope {
        config,
        tool_version: env!("CARGO_PKG_VERSION"),
        prng: PRNG_ID,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        payload,
    };
    serde_json::to_string_pretty(&env).expect("envelopes serialize")
}

fn emit<C: Serialize, P: Serialize>(config: &C, payload: P, start: Instant) {
    println!("{}", envelope_json(config, payload, start));
}

fn read_text(path: &str) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {path}: {e}")))
}

fn write_text(path: &str, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Domain(format!("cannot write {path}: {e}")))
}

fn read_formula(path: &str) -> CliResult<CnfFormula> {
    parse_dimacs(&read_text(path)?).map_err(|e| CliError::Usage(format!("{path}: {e}")))
}

fn read_json(path: &str) -> CliResult<Value> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Usage(format!("{path}: invalid JSON: {e}")))
}

fn limits(max_vars: usize) -> CliResult<EnumerationLimits> {
    if max_vars > cnflab::solutions::HARD_MAX_VARS {
        return Err(CliError::Usage(format!(
            "--max-vars is at most {}",
            cnflab::solutions::HARD_MAX_VARS
        )));
    }
    Ok(EnumerationLimits::new(max_vars))
}

fn bitstrings(n: usize, words: &[u64]) -> Vec<String> {
    words.iter().map(|&w| Assignment::from_bits(n, w).to_bitstring()).collect()
}

pub fn run(command: &Command) -> CliResult<()> {
    let start = Instant::now();
    match command {
        Command::Generate(a) => generate(a, start),
        Command::Enumerate(a) => {
            let f = read_formula(&a.input.file)?;
            let set = enumerate_solutions_with(&f, a.cap, limits(a.input.max_vars)?)?;
            let payload = json!({
                "n": f.num_vars(),
                "count": set.count(),
                "solutions": bitstrings(f.num_vars(), set.words()),
            });
            emit(command, payload, start);
            Ok(())
        }
        Command::Count(a) => {
            let f = read_formula(&a.file)?;
            let set = enumerate_solutions_with(&f, None, limits(a.max_vars)?)?;
            emit(command, json!({"n": f.num_vars(), "count": set.count()}), start);
            Ok(())
        }
        Command::Sample(a) => {
            let f = read_formula(&a.input.file)?;
            let set = enumerate_solutions_with(&f, None, limits(a.input.max_vars)?)?;
            let words = set.sample_words(a.t, &mut Rng::new(a.seed))?;
            emit(command, json!({"n": f.num_vars(), "samples": bitstrings(f.num_vars(), &words)}), start);
            Ok(())
        }
        Command::Marginal(a) => marginal(command, a, start),
        Command::Tv(a) => tv(command, a, start),
        Command::Learn(a) => learn(command, a, start),
        Command::Sweep(a) => sweep(a, start),
        Command::Resilience(a) => {
            let f = read_formula(&a.input.file)?;
            let r = resilience_theta_with(&f, a.k, limits(a.input.max_vars)?)?;
            let payload = json!({
                "theta": r.theta,
                "theta_f64": r.theta.as_ref().map(ExactProb::to_f64),
                "zero_set_size": r.zero_set_size,
                "argmin": r.argmin.map(|c| c.to_dimacs()),
                "candidates": r.candidates,
            });
            emit(command, payload, start);
            Ok(())
        }
        Command::Props(a) => props(command, a, start),
        Command::RevealSim(a) => reveal_sim(a, start),
        Command::GadgetVerify(a) => gadget_verify(command, a, start),
    }
}

fn need<T>(value: Option<T>, flag: &str, family: Family) -> CliResult<T> {
    value.ok_or_else(|| CliError::Usage(format!("--{flag} is required for the {family:?} family").to_lowercase()))
}

fn generate(a: &GenerateArgs, start: Instant) -> CliResult<()> {
    let k = a.k;
    let (spec, n, seed) = match a.family {
        Family::Disjoint => (FamilySpec::Disjoint { k }, need(a.n, "n", a.family)?, Some(need(a.seed, "seed", a.family)?)),
        Family::Gadget => (
            FamilySpec::Gadget { k, restricted: a.restricted },
            k * need(a.ell, "ell", a.family)?,
            None,
        ),
        Family::Hard => {
            let ell = need(a.ell, "ell", a.family)?;
            let m = need(a.m, "m", a.family)?;
            let seed = match a.index {
                Some(_) => None,
                None => Some(need(a.seed, "seed", a.family)?),
            };
            (FamilySpec::Hard { k, ell, index: a.index }, m * k * ell, seed)
        }
        Family::Random => (
            FamilySpec::Random { k, alpha: need(a.alpha, "alpha", a.family)? },
            need(a.n, "n", a.family)?,
            Some(need(a.seed, "seed", a.family)?),
        ),
        Family::Linear => (
            FamilySpec::Linear { k, d: need(a.d, "d", a.family)?, clauses: a.clauses },
            need(a.n, "n", a.family)?,
            Some(need(a.seed, "seed", a.family)?),
        ),
        Family::Counterexample => (FamilySpec::Counterexample { k }, 2 * k.max(1) - 2, None),
    };
    let formula = spec.instantiate(n, seed.unwrap_or(0))?;
    let dimacs = write_dimacs(&formula);
    match &a.out {
        None => println!("{dimacs}"),
        Some(path) => {
            write_text(path, &dimacs)?;
            let payload = json!({
                "family": spec,
                "n": formula.num_vars(),
                "clauses": formula.len(),
                "kds": kds_parameters(&formula),
                "dimacs": path,
            });
            let config = json!({"command": "generate", "args": a});
            write_text(&format!("{path}.json"), &envelope_json(&config, payload, start))?;
        }
    }
    Ok(())
}

fn marginal(command: &Command, a: &FileArgs, start: Instant) -> CliResult<()> {
    let f = read_formula(&a.file)?;
    let (count, trues) = marginal_counts(&f, limits(a.max_vars)?)?;
    if count == 0 {
        return Err(SolutionError::Unsatisfiable.into());
    }
    let marginals: Vec<ExactProb> = trues.iter().map(|&t| ExactProb::new(t, count)).collect();
    emit(command, json!({"n": f.num_vars(), "count": count, "marginals": marginals}), start);
    Ok(())
}

fn tv(command: &Command, a: &TvArgs, start: Instant) -> CliResult<()> {
    let fa = read_formula(&a.a)?;
    let fb = read_formula(&a.b)?;
    if fa.num_vars() != fb.num_vars() {
        return Err(CliError::Domain(format!(
            "variable counts differ: {} has n = {}, {} has n = {}",
            a.a,
            fa.num_vars(),
            a.b,
            fb.num_vars()
        )));
    }
    let lim = limits(a.max_vars)?;
    let d = tv_between(
        &enumerate_solutions_with(&fa, None, lim)?,
        &enumerate_solutions_with(&fb, None, lim)?,
    )?;
    emit(command, json!({"tv": d, "tv_f64": d.to_f64()}), start);
    Ok(())
}

fn learn(command: &Command, a: &LearnArgs, start: Instant) -> CliResult<()> {
    let f = read_formula(&a.input.file)?;
    let oracle = TruthOracle::with_limits(&f, a.k, limits(a.input.max_vars)?)?;
    let mut table = oracle.empty_table();
    for w in oracle.solutions().sample_words(a.t, &mut Rng::new(a.seed))? {
        table.observe_word(w);
    }
    let success = oracle.learned_equivalent(&table)?;
    let tv = if a.tv {
        match oracle.learned_tv(&table) {
            Ok(d) => Some(d),
            Err(LearnError::Solutions(SolutionError::Unsatisfiable)) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    let learned = table.to_formula();
    if let Some(path) = &a.learned_out {
        write_text(path, &write_dimacs(&learned))?;
    }
    let payload = json!({
        "n": f.num_vars(),
        "k": a.k,
        "t": a.t,
        "seed": a.seed,
        "success": success,
        "learned_clauses": learned.len(),
        "tv": tv,
    });
    emit(command, payload, start);
    Ok(())
}

fn sweep(a: &SweepArgs, start: Instant) -> CliResult<()> {
    let raw = read_json(&a.config)?;
    let cfg = validate_config(&raw).map_err(config_errors)?;
    if let Some(jobs) = cfg.jobs {
        // A --jobs flag has already built the pool and takes precedence.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let result = sample_complexity_sweep(&cfg.sweep)?;
    let csv = sweep_csv(&result);
    let out = a.out.clone().or(cfg.out.clone());
    let t_star: Vec<Value> = result
        .t_star
        .iter()
        .map(|(n, t)| json!({"n": n, "t_star": t}))
        .collect();
    let payload = match &out {
        Some(path) => {
            write_text(path, &csv)?;
            json!({"t_star": t_star, "csv_path": path})
        }
        None => json!({"t_star": t_star, "csv": csv}),
    };
    emit(&json!({"command": "sweep", "config": raw, "out": out}), payload, start);
    Ok(())
}

fn props(command: &Command, a: &PropsArgs, start: Instant) -> CliResult<()> {
    let f = read_formula(&a.file)?;
    if a.preset != ASYMPTOTIC_PRESET {
        return Err(CliError::Usage(format!("unknown preset {}; known: {ASYMPTOTIC_PRESET}", a.preset)));
    }
    let alpha = a.alpha.unwrap_or(f.len() as f64 / f.num_vars().max(1) as f64);
    let mut params = PropertyParams::asymptotic(a.k, alpha);
    if let Some(path) = &a.params {
        params = apply_param_overrides(params, &read_json(path)?).map_err(config_errors)?;
    }
    let check = CheckLimits {
        growth_ell: a.growth_ell,
        expansion_ell: a.expansion_ell,
        degree_one_size: a.degree_one_size,
        max_subsets: a.max_subsets,
    };
    let report = check_well_behaved(&f, &params, Some(&a.preset), check);
    emit(command, report, start);
    Ok(())
}

fn reveal_sim(a: &RevealSimArgs, start: Instant) -> CliResult<()> {
    let f = read_formula(&a.file)?;
    let raw = read_json(&a.config)?;
    let cfg = validate_reveal_config(&raw).map_err(config_errors)?;
    let task = cfg.task().map_err(CliError::Usage)?;
    let est = estimate_nice_probability(
        &f,
        &task,
        &cfg.params,
        cfg.trials,
        cfg.seed,
        limits(cfg.max_vars)?,
        cfg.keep_traces,
    )?;
    let payload = json!({"task": task, "estimate": est, "fraction_f64": est.fraction.to_f64()});
    emit(&json!({"command": "reveal-sim", "file": a.file, "config": raw}), payload, start);
    Ok(())
}

fn gadget_verify(command: &Command, a: &GadgetVerifyArgs, start: Instant) -> CliResult<()> {
    let (k, ell) = (a.k, a.ell);
    let n = k * ell;
    let lim = limits(cnflab::solutions::HARD_MAX_VARS)?;
    let unrestricted = gen_gadget(GadgetSpec { k, ell, restricted: false })?;
    let restricted = gen_gadget(GadgetSpec { k, ell, restricted: true })?;
    let omega_u = enumerate_solutions_with(&unrestricted, None, lim)?;
    let omega_r = enumerate_solutions_with(&restricted, None, lim)?;
    let ratio = ExactProb::new(omega_r.count(), omega_u.count());
    let bound = |bits: usize| ExactProb::new((1u64 << bits) - 1, 1u64 << bits);
    let lower = bound((k - 2) * ell);
    let upper = bound(k * ell);
    let extra: Vec<u64> = omega_u
        .words()
        .iter()
        .copied()
        .filter(|w| omega_r.words().binary_search(w).is_err())
        .collect();
    let expected = Assignment::from_bools(&gadget_extra_assignment(k, ell));
    let extra_matches = extra.len() == 1 && Some(extra[0]) == expected.as_bits();
    let pass = lower <= ratio && ratio <= upper && extra_matches;
    let payload = json!({
        "n": n,
        "unrestricted": omega_u.count(),
        "restricted": omega_r.count(),
        "ratio": ratio,
        "lower": lower,
        "upper": upper,
        "extra": bitstrings(n, &extra),
        "extra_matches": extra_matches,
        "kds_unrestricted": kds_parameters(&unrestricted),
        "kds_restricted": kds_parameters(&restricted),
        "pass": pass,
    });
    emit(command, payload, start);
    if pass {
        Ok(())
    } else {
        Err(CliError::Domain("gadget bounds violated".into()))
    }
}
