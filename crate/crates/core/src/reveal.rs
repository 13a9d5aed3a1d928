//! Revealing process for lower-bounding the marginal of one variable of a forbidden
//! pattern, the nice-result predicate, and iterative elimination.
//!
//! Under a pinning `σ`, a good clause is frozen when it is unsatisfied and has at most
//! `ζk` unpinned good variables, and blocked when it is unsatisfied, not frozen, and every
//! unpinned good variable of it lies in some frozen clause. Two clauses are neighbors
//! under `σ` when they share an unpinned variable.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{simplify, Assignment, Clause, CnfFormula, Pinning, Var};
use crate::exact::ExactProb;
use crate::rng::{derive_seed, Rng};
use crate::solutions::{enumerate_solutions_with, project_bits, EnumerationLimits, SolutionError};
use crate::structure::{connected_components, identify_bad, modified_bad_sets, BadParams, BadSets, PropertyParams};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RevealError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("assignment disagrees with the prefix at variable {var}")]
    InconsistentPrefix { var: Var },
    #[error("assignment does not satisfy the formula")]
    NotSolution,
    #[error("clause {clause} is not bad")]
    NotBad { clause: usize },
    #[error("no solution agrees with the prefix")]
    InfeasiblePrefix,
    #[error(transparent)]
    Solutions(#[from] SolutionError),
}

/// Absorbs rounding in thresholds such as `ζk − 1`.
const THRESHOLD_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevealParams {
    pub k: usize,
    pub alpha: f64,
    pub p_hd: f64,
    pub eps_bd: f64,
    pub zeta: f64,
}

impl RevealParams {
    pub fn zeta_k(&self) -> f64 {
        self.zeta * self.k as f64
    }

    fn bad_params(&self) -> BadParams {
        BadParams {
            k: self.k,
            p_hd: self.p_hd,
            eps_bd: self.eps_bd,
            alpha: self.alpha,
        }
    }
}

impl From<&PropertyParams> for RevealParams {
    fn from(p: &PropertyParams) -> Self {
        RevealParams {
            k: p.k,
            alpha: p.alpha,
            p_hd: p.p_hd,
            eps_bd: p.eps_bd,
            zeta: p.zeta,
        }
    }
}

/// One step of the chain rule over a pattern `σ*` on `vbl(c*)`: the values of the
/// first `i` variables are fixed and the marginal of the next one is in question.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevealTask {
    pub target: Var,
    pub target_value: bool,
    pub prefix: Vec<(Var, bool)>,
    pub c_star_vars: Vec<Var>,
}

impl RevealTask {
    /// Task for position `i` (0-based) of the forbidden pattern of `c`, taking the
    /// clause's variables in increasing order.
    pub fn from_clause(c: &Clause, i: usize) -> Result<Self, RevealError> {
        let forbidden = c
            .forbidden()
            .ok_or_else(|| RevealError::Invalid("tautological clause".into()))?;
        let vars = c.vars();
        if i >= vars.len() {
            return Err(RevealError::Invalid(format!("position {i} outside a clause of {} variables", vars.len())));
        }
        Ok(RevealTask {
            target: vars[i],
            target_value: forbidden[i],
            prefix: vars[..i].iter().copied().zip(forbidden[..i].iter().copied()).collect(),
            c_star_vars: vars.to_vec(),
        })
    }

    pub fn prefix_pinning(&self) -> Pinning {
        Pinning::from_pairs(self.prefix.iter().copied())
    }

    fn validate(&self, n: usize) -> Result<(), RevealError> {
        let out_of_range = std::iter::once(self.target)
            .chain(self.prefix.iter().map(|p| p.0))
            .chain(self.c_star_vars.iter().copied())
            .find(|&v| v >= n);
        if let Some(v) = out_of_range {
            return Err(RevealError::Invalid(format!("variable {v} out of range for n = {n}")));
        }
        if self.prefix.iter().any(|p| p.0 == self.target) {
            return Err(RevealError::Invalid("target is part of the prefix".into()));
        }
        if self.prefix_pinning().len() != self.prefix.len() {
            return Err(RevealError::Invalid("prefix repeats a variable".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ClauseClassification {
    pub frozen: BTreeSet<usize>,
    pub blocked: BTreeSet<usize>,
    pub satisfied: BTreeSet<usize>,
    pub other: BTreeSet<usize>,
}

fn unpinned_good(c: &Clause, sigma: &Pinning, bad: &BadSets) -> usize {
    c.vars()
        .iter()
        .filter(|&&v| !sigma.contains(v) && !bad.v_bad.contains(&v))
        .count()
}

pub fn classify_clauses(
    formula: &CnfFormula,
    sigma: &Pinning,
    bad: &BadSets,
    zeta: f64,
    k: usize,
) -> ClauseClassification {
    let zeta_k = zeta * k as f64;
    let mut out = ClauseClassification::default();
    for (i, c) in formula.clauses().iter().enumerate() {
        if c.satisfied_under(sigma) {
            out.satisfied.insert(i);
        } else if !bad.c_bad.contains(&i) && unpinned_good(c, sigma, bad) as f64 <= zeta_k + THRESHOLD_SLACK {
            out.frozen.insert(i);
        }
    }
    let frozen_vars: BTreeSet<Var> = out
        .frozen
        .iter()
        .flat_map(|&i| formula.clause(i).vars().iter().copied())
        .collect();
    for (i, c) in formula.clauses().iter().enumerate() {
        if out.satisfied.contains(&i) || out.frozen.contains(&i) {
            continue;
        }
        let covered = c
            .vars()
            .iter()
            .filter(|&&v| !sigma.contains(v) && !bad.v_bad.contains(&v))
            .all(|v| frozen_vars.contains(v));
        if !bad.c_bad.contains(&i) && covered {
            out.blocked.insert(i);
        } else {
            out.other.insert(i);
        }
    }
    out
}

/// Unpinned good variables `v` such that every good clause containing `v` is satisfied or
/// keeps more than `ζk − 1` unpinned good variables besides `v`.
pub fn alive_variables(
    formula: &CnfFormula,
    sigma: &Pinning,
    bad: &BadSets,
    zeta: f64,
    k: usize,
) -> BTreeSet<Var> {
    let zeta_k = zeta * k as f64;
    let mut alive: BTreeSet<Var> = (0..formula.num_vars())
        .filter(|&v| !sigma.contains(v) && !bad.v_bad.contains(&v))
        .collect();
    for (i, c) in formula.clauses().iter().enumerate() {
        if bad.c_bad.contains(&i) || c.satisfied_under(sigma) {
            continue;
        }
        if (unpinned_good(c, sigma, bad) as f64 - 1.0) <= zeta_k - 1.0 + THRESHOLD_SLACK {
            for v in c.vars() {
                alive.remove(v);
            }
        }
    }
    alive
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AssociatedComponent {
    pub interior: BTreeSet<usize>,
    /// The interior and its neighbors under `σ`.
    pub ext: BTreeSet<usize>,
}

impl AssociatedComponent {
    pub fn neighbors(&self) -> impl Iterator<Item = usize> + '_ {
        self.ext.difference(&self.interior).copied()
    }
}

/// Neighbors of clause `c` through unpinned variables.
fn unpinned_neighbors<'a>(
    formula: &'a CnfFormula,
    occ: &'a [Vec<usize>],
    sigma: &'a Pinning,
    c: usize,
) -> impl Iterator<Item = usize> + 'a {
    formula
        .clause(c)
        .vars()
        .iter()
        .filter(|&&v| !sigma.contains(v))
        .flat_map(move |&v| occ[v].iter().copied())
        .filter(move |&d| d != c)
}

/// Closure of `{c}` under adding frozen, blocked, and bad clauses that neighbor it under
/// `σ`.
pub fn associated_component(
    formula: &CnfFormula,
    sigma: &Pinning,
    bad: &BadSets,
    zeta: f64,
    k: usize,
    c: usize,
) -> Result<AssociatedComponent, RevealError> {
    associated_component_in(formula, &formula.occurrences(), sigma, bad, zeta, k, c)
}

fn associated_component_in(
    formula: &CnfFormula,
    occ: &[Vec<usize>],
    sigma: &Pinning,
    bad: &BadSets,
    zeta: f64,
    k: usize,
    c: usize,
) -> Result<AssociatedComponent, RevealError> {
    if c >= formula.len() || !bad.c_bad.contains(&c) {
        return Err(RevealError::NotBad { clause: c });
    }
    let class = classify_clauses(formula, sigma, bad, zeta, k);
    let joins = |d: usize| class.frozen.contains(&d) || class.blocked.contains(&d) || bad.c_bad.contains(&d);
    let mut interior = BTreeSet::from([c]);
    let mut stack = vec![c];
    while let Some(x) = stack.pop() {
        for d in unpinned_neighbors(formula, occ, sigma, x) {
            if joins(d) && interior.insert(d) {
                stack.push(d);
            }
        }
    }
    let mut ext = interior.clone();
    for &x in &interior {
        ext.extend(unpinned_neighbors(formula, occ, sigma, x));
    }
    Ok(AssociatedComponent { interior, ext })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RevealAudit {
    /// `(step, clause)`: an unsatisfied good clause that dropped to at most `ζk − 1`
    /// unpinned good variables when the variable of that step was revealed.
    pub good_clause_drops: Vec<(usize, usize)>,
    /// Neighbors of the final associated component that are not satisfied.
    pub unsatisfied_neighbors: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RevealResult {
    pub s: BTreeSet<Var>,
    pub tau_s: Pinning,
    pub c0: Option<usize>,
    /// Revealed variables beyond the prefix, in order.
    pub trace: Vec<Var>,
    pub audit: RevealAudit,
}

/// Bad sets used by [`reveal`] once `c0` is fixed.
pub fn reveal_bad_sets(formula: &CnfFormula, task: &RevealTask, params: &RevealParams, c0: usize) -> BadSets {
    let base = identify_bad(formula, &params.bad_params());
    modified_bad_sets(formula, &base, &task.c_star_vars, &task.prefix_pinning(), c0, params.k).sets
}

fn low_good_clauses(formula: &CnfFormula, sigma: &Pinning, bad: &BadSets, zeta_k: f64) -> BTreeSet<usize> {
    (0..formula.len())
        .filter(|i| !bad.c_bad.contains(i))
        .filter(|&i| {
            let c = formula.clause(i);
            !c.satisfied_under(sigma) && unpinned_good(c, sigma, bad) as f64 <= zeta_k - 1.0 + THRESHOLD_SLACK
        })
        .collect()
}

/// Reveals variables of `tau` around the first unsatisfied clause through the target,
/// always taking the smallest alive variable of the associated component's exterior.
pub fn reveal(
    formula: &CnfFormula,
    tau: &Assignment,
    task: &RevealTask,
    params: &RevealParams,
) -> Result<RevealResult, RevealError> {
    Revealer::new(formula, task, params)?.reveal(tau)
}

/// [`reveal`] with the per-task work done once. The clause `c0` depends only on the
/// prefix, so the bad sets are shared by every assignment.
pub struct Revealer<'a> {
    formula: &'a CnfFormula,
    task: &'a RevealTask,
    params: &'a RevealParams,
    occ: Vec<Vec<usize>>,
    /// `c0` and its bad sets; `None` when the process stops before revealing.
    setup: Option<(usize, BadSets)>,
}

impl<'a> Revealer<'a> {
    pub fn new(formula: &'a CnfFormula, task: &'a RevealTask, params: &'a RevealParams) -> Result<Self, RevealError> {
        task.validate(formula.num_vars())?;
        let prefix = task.prefix_pinning();
        let k = params.k;
        let c0 = (0..formula.len())
            .find(|&i| formula.clause(i).contains_var(task.target) && !formula.clause(i).satisfied_under(&prefix))
            .filter(|_| params.alpha >= 1.0 / (k as f64).powi(3));
        Ok(Revealer {
            formula,
            task,
            params,
            occ: formula.occurrences(),
            setup: c0.map(|c0| (c0, reveal_bad_sets(formula, task, params, c0))),
        })
    }

    pub fn reveal(&self, tau: &Assignment) -> Result<RevealResult, RevealError> {
        let n = self.formula.num_vars();
        if tau.len() != n {
            return Err(RevealError::Invalid(format!("assignment has {} variables, formula has {n}", tau.len())));
        }
        if let Some(&(var, _)) = self.task.prefix.iter().find(|&&(v, b)| tau.get(v) != b) {
            return Err(RevealError::InconsistentPrefix { var });
        }
        if !self.formula.satisfied_by(tau) {
            return Err(RevealError::NotSolution);
        }
        let mut state = self.start();
        while let Some(v) = self.next_var(&state)? {
            self.pin(&mut state, v, tau.get(v));
        }
        self.finish(state)
    }

    fn start(&self) -> RevealState {
        let tau_s = self.task.prefix_pinning();
        let low = match &self.setup {
            Some((_, bad)) => low_good_clauses(self.formula, &tau_s, bad, self.params.zeta_k()),
            None => BTreeSet::new(),
        };
        RevealState {
            tau_s,
            trace: Vec::new(),
            low,
            good_clause_drops: Vec::new(),
        }
    }

    /// Smallest alive variable of the associated component's exterior.
    fn next_var(&self, state: &RevealState) -> Result<Option<Var>, RevealError> {
        let Some((c0, bad)) = &self.setup else { return Ok(None) };
        let (formula, params) = (self.formula, self.params);
        let component = associated_component_in(formula, &self.occ, &state.tau_s, bad, params.zeta, params.k, *c0)?;
        let alive = alive_variables(formula, &state.tau_s, bad, params.zeta, params.k);
        Ok(alive
            .iter()
            .copied()
            .find(|&v| component.ext.iter().any(|&c| formula.clause(c).contains_var(v))))
    }

    fn pin(&self, state: &mut RevealState, v: Var, value: bool) {
        let (_, bad) = self.setup.as_ref().expect("pinning only happens after setup");
        state.tau_s.insert(v, value);
        state.trace.push(v);
        let now = low_good_clauses(self.formula, &state.tau_s, bad, self.params.zeta_k());
        let step = state.trace.len() - 1;
        state.good_clause_drops.extend(now.difference(&state.low).map(|&c| (step, c)));
        state.low = now;
    }

    fn finish(&self, state: RevealState) -> Result<RevealResult, RevealError> {
        let s: BTreeSet<Var> = state.tau_s.domain().collect();
        let Some((c0, bad)) = &self.setup else {
            return Ok(RevealResult {
                s,
                tau_s: state.tau_s,
                c0: None,
                trace: Vec::new(),
                audit: RevealAudit::default(),
            });
        };
        let params = self.params;
        let component = associated_component_in(self.formula, &self.occ, &state.tau_s, bad, params.zeta, params.k, *c0)?;
        let unsatisfied_neighbors = component
            .neighbors()
            .filter(|&c| !self.formula.clause(c).satisfied_under(&state.tau_s))
            .collect();
        Ok(RevealResult {
            s,
            tau_s: state.tau_s,
            c0: Some(*c0),
            trace: state.trace,
            audit: RevealAudit {
                good_clause_drops: state.good_clause_drops,
                unsatisfied_neighbors,
            },
        })
    }

    /// Results for every assignment in `words`, all agreeing with the prefix, as
    /// `(result, preimage size)`. Assignments sharing the values revealed so far share
    /// the next step, so the process is walked once per branch instead of once per
    /// assignment.
    fn reveal_all(&self, words: Vec<u64>) -> Result<Vec<(RevealResult, u64)>, RevealError> {
        let mut out = Vec::new();
        if words.is_empty() {
            return Ok(out);
        }
        let mut stack = vec![(self.start(), words)];
        while let Some((state, words)) = stack.pop() {
            match self.next_var(&state)? {
                None => out.push((self.finish(state)?, words.len() as u64)),
                Some(v) => {
                    let (ones, zeros): (Vec<u64>, Vec<u64>) = words.into_iter().partition(|&w| (w >> v) & 1 == 1);
                    for (value, part) in [(false, zeros), (true, ones)] {
                        if !part.is_empty() {
                            let mut child = state.clone();
                            self.pin(&mut child, v, value);
                            stack.push((child, part));
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone)]
struct RevealState {
    tau_s: Pinning,
    trace: Vec<Var>,
    /// Unsatisfied good clauses at or below `ζk − 1` unpinned good variables.
    low: BTreeSet<usize>,
    good_clause_drops: Vec<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NiceDiagnosis {
    /// Nice because the target occurs in no clause after simplification.
    Isolated,
    /// Nice with the target in a small, well-shaped component.
    Nice,
    TargetRevealed,
    Prefix,
    SmallClauses,
    Exceptional,
    Size,
}

impl NiceDiagnosis {
    pub fn is_nice(self) -> bool {
        matches!(self, NiceDiagnosis::Isolated | NiceDiagnosis::Nice)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NiceReport {
    pub nice: bool,
    pub diagnosis: NiceDiagnosis,
    /// Component of the target in the simplified formula, as clause indices of
    /// `simplify(formula, tau_s)`.
    pub component: Vec<usize>,
    /// The clause of the component with fewer than `ζk − 1` variables, if exactly one.
    pub exceptional: Option<usize>,
}

/// Component of the clause graph of `formula` containing a clause with `target`.
pub fn target_component(formula: &CnfFormula, target: Var) -> Vec<usize> {
    connected_components(formula)
        .into_iter()
        .find(|comp| comp.iter().any(|&c| formula.clause(c).contains_var(target)))
        .unwrap_or_default()
}

/// Evaluates the nice-result conditions. Clause sizes count every variable remaining
/// after simplification.
pub fn is_nice(formula: &CnfFormula, result: &RevealResult, task: &RevealTask, zeta: f64, k: usize) -> NiceReport {
    let report = |diagnosis: NiceDiagnosis, component: Vec<usize>, exceptional| NiceReport {
        nice: diagnosis.is_nice(),
        diagnosis,
        component,
        exceptional,
    };
    if result.s.contains(&task.target) || result.tau_s.contains(task.target) {
        return report(NiceDiagnosis::TargetRevealed, Vec::new(), None);
    }
    if task.prefix.iter().any(|&(v, b)| result.tau_s.get(v) != Some(b)) {
        return report(NiceDiagnosis::Prefix, Vec::new(), None);
    }
    let phi = simplify(formula, &result.tau_s);
    let component = target_component(&phi, task.target);
    if component.is_empty() {
        return report(NiceDiagnosis::Isolated, component, None);
    }
    let floor = zeta * k as f64 - 1.0;
    let small: Vec<usize> = component
        .iter()
        .copied()
        .filter(|&c| (phi.clause(c).len() as f64) + THRESHOLD_SLACK < floor)
        .collect();
    if small.len() > 1 {
        return report(NiceDiagnosis::SmallClauses, component, None);
    }
    let exceptional = small.first().copied();
    if let Some(c) = exceptional {
        let clause = phi.clause(c);
        if clause.vars() == [task.target] && !clause.lits()[0].eval(task.target_value) {
            return report(NiceDiagnosis::Exceptional, component, exceptional);
        }
    }
    let log_n = (formula.num_vars().max(1) as f64).log2();
    if component.len() as f64 > log_n + THRESHOLD_SLACK {
        return report(NiceDiagnosis::Size, component, exceptional);
    }
    report(NiceDiagnosis::Nice, component, exceptional)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EliminationStep {
    pub clause: usize,
    /// Degree-one variables of the clause other than the target, increasing.
    pub vars: Vec<Var>,
    /// Projection of the clause's forbidden pattern onto `vars`.
    pub forbidden: Vec<bool>,
}

impl EliminationStep {
    /// Complement of the forbidden projection, which satisfies the clause when `vars`
    /// is nonempty.
    pub fn satisfying_pinning(&self) -> Pinning {
        Pinning::from_pairs(self.vars.iter().copied().zip(self.forbidden.iter().map(|b| !b)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum Elimination {
    Done { steps: Vec<EliminationStep> },
    /// No removable clause while more than one remained.
    Stuck { steps: Vec<EliminationStep>, remaining: Vec<usize> },
}

impl Elimination {
    pub fn steps(&self) -> &[EliminationStep] {
        match self {
            Elimination::Done { steps } | Elimination::Stuck { steps, .. } => steps,
        }
    }
}

/// Repeatedly removes the smallest-index clause of the target's component, other than
/// `exceptional`, having at least `ζk/2 − 2` degree-one variables besides the target.
/// Tautological clauses, which `simplify` never leaves behind, are ignored.
pub fn iterative_elimination(
    simplified: &CnfFormula,
    target: Var,
    zeta: f64,
    k: usize,
    exceptional: Option<usize>,
) -> Elimination {
    let threshold = zeta * k as f64 / 2.0 - 2.0;
    let mut remaining = target_component(simplified, target);
    remaining.retain(|&c| !simplified.clause(c).is_tautology());
    let mut steps = Vec::new();
    while remaining.len() > 1 {
        let mut degree: BTreeMap<Var, usize> = BTreeMap::new();
        for &c in &remaining {
            for &v in simplified.clause(c).vars() {
                *degree.entry(v).or_default() += 1;
            }
        }
        let single = |c: usize| -> Vec<Var> {
            simplified
                .clause(c)
                .vars()
                .iter()
                .copied()
                .filter(|&v| v != target && degree[&v] == 1)
                .collect()
        };
        let chosen = remaining
            .iter()
            .copied()
            .filter(|&c| Some(c) != exceptional)
            .find(|&c| single(c).len() as f64 + THRESHOLD_SLACK >= threshold);
        let Some(c) = chosen else {
            return Elimination::Stuck { steps, remaining };
        };
        let vars = single(c);
        let clause = simplified.clause(c);
        let forbidden = vars
            .iter()
            .map(|&v| clause.forbidden_value(v).expect("simplified clauses are not tautologies"))
            .collect();
        steps.push(EliminationStep {
            clause: c,
            vars,
            forbidden,
        });
        remaining.retain(|&d| d != c);
    }
    Elimination::Done { steps }
}

/// 95% Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    const Z: f64 = 1.959964;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + Z * Z / n;
    let center = (p + Z * Z / (2.0 * n)) / denom;
    let half = Z * (p * (1.0 - p) / n + Z * Z / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NiceEstimate {
    pub trials: u64,
    pub nice: u64,
    pub fraction: ExactProb,
    pub ci95: (f64, f64),
    pub diagnoses: BTreeMap<NiceDiagnosis, u64>,
    /// Results of the first few trials.
    pub sample_traces: Vec<RevealResult>,
}

/// Samples solutions agreeing with the prefix, reveals around the target, and counts
/// nice results. Trial `t` draws with seed `derive_seed(seed, [t])`.
pub fn estimate_nice_probability(
    formula: &CnfFormula,
    task: &RevealTask,
    params: &RevealParams,
    trials: u64,
    seed: u64,
    limits: EnumerationLimits,
    keep_traces: usize,
) -> Result<NiceEstimate, RevealError> {
    task.validate(formula.num_vars())?;
    let pool = enumerate_solutions_with(formula, None, limits)?.restricted_to(&task.prefix_pinning())?;
    if pool.is_empty() {
        return Err(RevealError::InfeasiblePrefix);
    }
    let revealer = Revealer::new(formula, task, params)?;
    let outcomes: Vec<(RevealResult, NiceDiagnosis)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = Rng::new(derive_seed(seed, &[t]));
            let y = pool.get(rng.below(pool.count()) as usize);
            let result = revealer.reveal(&y)?;
            let diagnosis = is_nice(formula, &result, task, params.zeta, params.k).diagnosis;
            Ok((result, diagnosis))
        })
        .collect::<Result<_, RevealError>>()?;
    let mut diagnoses = BTreeMap::new();
    for (_, d) in &outcomes {
        *diagnoses.entry(*d).or_insert(0u64) += 1;
    }
    let nice = outcomes.iter().filter(|(_, d)| d.is_nice()).count() as u64;
    Ok(NiceEstimate {
        trials,
        nice,
        fraction: if trials == 0 { ExactProb::zero() } else { ExactProb::new(nice, trials) },
        ci95: wilson_interval(nice, trials),
        diagnoses,
        sample_traces: outcomes.into_iter().take(keep_traces).map(|(r, _)| r).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GibbsReport {
    /// Solutions agreeing with the prefix.
    pub runs: u64,
    /// Distinct revealing results over those solutions.
    pub outputs: usize,
    /// Results whose preimage differs from the solutions agreeing with them.
    pub inconsistent: Vec<Pinning>,
    /// Runs whose audit recorded a good clause dropping to the frozen threshold.
    pub good_clause_drops: u64,
    /// Runs ending with an unsatisfied neighbor of the associated component.
    pub unsatisfied_neighbors: u64,
}

/// Checks by enumeration that each revealing result is produced by exactly the
/// prefix-consistent solutions that agree with it, and tallies audit failures.
pub fn check_gibbs_consistency(
    formula: &CnfFormula,
    task: &RevealTask,
    params: &RevealParams,
    limits: EnumerationLimits,
) -> Result<GibbsReport, RevealError> {
    let revealer = Revealer::new(formula, task, params)?;
    let pool = enumerate_solutions_with(formula, None, limits)?.restricted_to(&task.prefix_pinning())?;
    let results = revealer.reveal_all(pool.words().to_vec())?;
    let failing = |bad: fn(&RevealAudit) -> bool| -> u64 {
        results.iter().filter(|(r, _)| bad(&r.audit)).map(|&(_, size)| size).sum()
    };
    let mut report = GibbsReport {
        runs: results.iter().map(|&(_, size)| size).sum(),
        outputs: 0,
        inconsistent: Vec::new(),
        good_clause_drops: failing(|a| !a.good_clause_drops.is_empty()),
        unsatisfied_neighbors: failing(|a| !a.unsatisfied_neighbors.is_empty()),
    };
    // Every solution agrees with its own result, so a result is consistent exactly when
    // its preimage is as large as the set of solutions agreeing with it.
    let mut preimages: BTreeMap<Pinning, u64> = BTreeMap::new();
    for (r, size) in results {
        *preimages.entry(r.tau_s).or_default() += size;
    }
    let mut by_domain: BTreeMap<Vec<Var>, Vec<(&Pinning, u64)>> = BTreeMap::new();
    for (p, &size) in &preimages {
        by_domain.entry(p.domain().collect()).or_default().push((p, size));
    }
    for (vars, outputs) in by_domain {
        let mut agreeing: HashMap<u64, u64> = HashMap::new();
        for &w in pool.words() {
            *agreeing.entry(project_bits(w, &vars)).or_default() += 1;
        }
        for (p, size) in outputs {
            let key = p.iter().enumerate().fold(0u64, |acc, (i, (_, b))| acc | (u64::from(b) << i));
            if agreeing.get(&key).copied().unwrap_or(0) != size {
                report.inconsistent.push(p.clone());
            }
        }
    }
    report.outputs = preimages.len();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::{parse_dimacs, Lit};
    use crate::generators::{gen_random_cnf, RandomCnfSpec};
    use proptest::prelude::*;

    fn f(text: &str) -> CnfFormula {
        parse_dimacs(text).unwrap()
    }

    fn no_bad() -> BadSets {
        BadSets::default()
    }

    #[test]
    fn classification_examples() {
        let phi = f("p cnf 8 2\n1 2 3 4 0\n5 6 7 8 0");
        let class = classify_clauses(&phi, &Pinning::new(), &no_bad(), 0.5, 4);
        assert_eq!(class.other, BTreeSet::from([0, 1]));
        assert!(class.frozen.is_empty() && class.blocked.is_empty());
        // Two of four pinned against the clause leaves ζk = 2 good variables.
        let sigma = Pinning::from_pairs([(0, false), (1, false)]);
        let class = classify_clauses(&phi, &sigma, &no_bad(), 0.5, 4);
        assert_eq!(class.frozen, BTreeSet::from([0]));
        let sigma = Pinning::from_pairs([(0, true)]);
        assert_eq!(classify_clauses(&phi, &sigma, &no_bad(), 0.5, 4).satisfied, BTreeSet::from([0]));
    }

    #[test]
    fn blocked_clause_example() {
        // Pinning x1, x2, x7, x8 false freezes the outer clauses with two good variables
        // each; the middle clause keeps three good variables, all inside frozen clauses.
        let phi = f("p cnf 9 3\n1 2 3 4 0\n3 4 5 9 0\n5 6 7 8 0");
        let bad = BadSets { v_bad: BTreeSet::from([8]), ..BadSets::default() };
        let sigma = Pinning::from_pairs([(0, false), (1, false), (6, false), (7, false)]);
        let class = classify_clauses(&phi, &sigma, &bad, 0.5, 4);
        assert_eq!(class.frozen, BTreeSet::from([0, 2]));
        assert_eq!(class.blocked, BTreeSet::from([1]));
        let unfrozen = Pinning::from_pairs([(0, false), (1, false)]);
        assert!(classify_clauses(&phi, &unfrozen, &bad, 0.5, 4).blocked.is_empty());
    }

    #[test]
    fn alive_examples() {
        let phi = f("p cnf 8 2\n1 2 3 4 0\n5 6 7 8 0");
        let all: BTreeSet<Var> = (0..8).collect();
        assert_eq!(alive_variables(&phi, &Pinning::new(), &no_bad(), 0.5, 4), all);
        // ζk = 2 is integral: a clause with exactly 2 unpinned good variables blocks both.
        let sigma = Pinning::from_pairs([(0, false), (1, false)]);
        let alive = alive_variables(&phi, &sigma, &no_bad(), 0.5, 4);
        assert!(!alive.contains(&2) && !alive.contains(&3));
        let bad = BadSets { v_bad: BTreeSet::from([4]), ..BadSets::default() };
        assert!(!alive_variables(&phi, &Pinning::new(), &bad, 0.5, 4).contains(&4));
    }

    #[test]
    fn associated_component_examples() {
        let phi = f("p cnf 12 3\n1 2 3 4 0\n4 5 6 7 0\n7 8 9 10 0");
        let bad = BadSets { c_bad: BTreeSet::from([0]), v_bad: (0..4).collect(), ..BadSets::default() };
        let alone = associated_component(&phi, &Pinning::new(), &bad, 0.25, 4, 0).unwrap();
        assert_eq!(alone.interior, BTreeSet::from([0]));
        assert_eq!(alone.ext, BTreeSet::from([0, 1]));
        // Pinning x5, x6, x8, x9, x10 false leaves one unpinned good variable in each good
        // clause, so both freeze; the chain links through x4 and x7.
        let sigma = Pinning::from_pairs([(4, false), (5, false), (7, false), (8, false), (9, false)]);
        let bad2 = BadSets { c_bad: BTreeSet::from([0]), v_bad: (0..4).collect(), ..BadSets::default() };
        let chain = associated_component(&phi, &sigma, &bad2, 0.25, 4, 0).unwrap();
        assert_eq!(chain.interior, BTreeSet::from([0, 1, 2]));
        assert_eq!(
            associated_component(&phi, &sigma, &bad2, 0.25, 4, 1),
            Err(RevealError::NotBad { clause: 1 })
        );
        let isolated = f("p cnf 8 2\n1 2 3 4 0\n5 6 7 8 0");
        let r = associated_component(&isolated, &Pinning::new(), &bad, 0.25, 4, 0).unwrap();
        assert_eq!(r.interior, BTreeSet::from([0]));
        assert_eq!(r.ext, BTreeSet::from([0]));
    }

    fn params(k: usize, alpha: f64) -> RevealParams {
        RevealParams { k, alpha, p_hd: 1e9, eps_bd: 0.5, zeta: 0.5 }
    }

    #[test]
    fn early_return_cases() {
        let phi = f("p cnf 6 2\n1 2 3 0\n-1 4 5 0");
        let task = RevealTask::from_clause(phi.clause(0), 1).unwrap();
        let tau = Assignment::from_bools(&[false, true, false, false, false, false]);
        let low_density = reveal(&phi, &tau, &task, &params(3, 0.01)).unwrap();
        assert_eq!(low_density.tau_s, task.prefix_pinning());
        assert_eq!(low_density.c0, None);
        // Target x4 only occurs in a clause satisfied by the prefix x1 = False.
        let task = RevealTask { target: 3, target_value: false, prefix: vec![(0, false)], c_star_vars: vec![0, 3] };
        let tau = Assignment::from_bools(&[false, true, false, false, true, false]);
        let r = reveal(&phi, &tau, &task, &params(3, 1.0)).unwrap();
        assert_eq!((r.c0, r.s.len()), (None, 1));
        assert_eq!(is_nice(&phi, &r, &task, 0.5, 3).diagnosis, NiceDiagnosis::Isolated);
    }

    #[test]
    fn reveal_rejects_bad_inputs() {
        let phi = f("p cnf 3 1\n1 2 3 0");
        let task = RevealTask::from_clause(phi.clause(0), 1).unwrap();
        let inconsistent = Assignment::from_bools(&[true, true, true]);
        assert_eq!(
            reveal(&phi, &inconsistent, &task, &params(3, 1.0)),
            Err(RevealError::InconsistentPrefix { var: 0 })
        );
        let unsat = Assignment::from_bools(&[false, false, false]);
        assert_eq!(reveal(&phi, &unsat, &task, &params(3, 1.0)), Err(RevealError::NotSolution));
    }

    #[test]
    fn nice_failure_diagnoses() {
        let phi = f("p cnf 4 2\n1 2 0\n-2 3 4 0");
        let task = RevealTask { target: 1, target_value: false, prefix: vec![(0, false)], c_star_vars: vec![0, 1] };
        let base = RevealResult {
            s: BTreeSet::from([0]),
            tau_s: Pinning::from_pairs([(0, false)]),
            c0: None,
            trace: vec![],
            audit: RevealAudit::default(),
        };
        // Simplified clause {x2} is forbidden by x2 = False.
        assert_eq!(is_nice(&phi, &base, &task, 0.75, 4).diagnosis, NiceDiagnosis::Exceptional);
        let satisfied_target = RevealTask { target_value: true, ..task.clone() };
        let r = is_nice(&phi, &base, &satisfied_target, 0.75, 4);
        assert_eq!((r.diagnosis, r.exceptional), (NiceDiagnosis::Nice, Some(0)));
        let revealed = RevealResult { s: BTreeSet::from([0, 1]), ..base.clone() };
        assert_eq!(is_nice(&phi, &revealed, &task, 0.75, 4).diagnosis, NiceDiagnosis::TargetRevealed);
        let wrong_prefix = RevealResult { tau_s: Pinning::from_pairs([(0, true)]), ..base.clone() };
        assert_eq!(is_nice(&phi, &wrong_prefix, &task, 0.75, 4).diagnosis, NiceDiagnosis::Prefix);
        let tiny = RevealResult { s: BTreeSet::new(), tau_s: Pinning::new(), ..base };
        let no_prefix = RevealTask { prefix: vec![], ..task };
        assert_eq!(is_nice(&phi, &tiny, &no_prefix, 1.25, 4).diagnosis, NiceDiagnosis::SmallClauses);
    }

    #[test]
    fn size_diagnosis() {
        // A chain of 4 clauses through the target at n = 8: log₂ 8 = 3 < 4.
        let phi = f("p cnf 8 4\n1 2 3 0\n3 4 5 0\n5 6 7 0\n7 8 1 0");
        let task = RevealTask { target: 0, target_value: true, prefix: vec![], c_star_vars: vec![0] };
        let r = RevealResult { s: BTreeSet::new(), tau_s: Pinning::new(), c0: None, trace: vec![], audit: RevealAudit::default() };
        let report = is_nice(&phi, &r, &task, 0.5, 3);
        assert_eq!(report.diagnosis, NiceDiagnosis::Size);
        assert_eq!(report.component.len(), 4);
    }

    #[test]
    fn elimination_examples() {
        let one = f("p cnf 4 1\n1 2 3 4 0");
        assert_eq!(iterative_elimination(&one, 0, 0.5, 4, None), Elimination::Done { steps: vec![] });
        // Two clauses meeting only in x1; with ζk/2 − 2 = 2 each has 4 private variables.
        let two = f("p cnf 9 2\n1 2 3 4 5 0\n1 -6 -7 -8 -9 0");
        let out = iterative_elimination(&two, 0, 1.6, 5, None);
        let Elimination::Done { steps } = out else { panic!("stuck") };
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].clause, 0);
        assert_eq!(steps[0].vars, vec![1, 2, 3, 4]);
        assert_eq!(steps[0].forbidden, vec![false; 4]);
        let stuck = iterative_elimination(&two, 0, 1.6, 5, Some(0));
        assert!(matches!(stuck, Elimination::Done { ref steps } if steps[0].clause == 1));
        let tight = f("p cnf 3 3\n1 2 0\n2 3 0\n1 3 0");
        assert!(matches!(iterative_elimination(&tight, 0, 1.0, 10, None), Elimination::Stuck { .. }));
    }

    #[test]
    fn wilson_interval_values() {
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
        let (lo, hi) = wilson_interval(10, 10);
        assert!((hi - 1.0).abs() < 1e-12 && (lo - 0.7225).abs() < 1e-4);
    }

    #[test]
    fn estimate_early_return_always_nice() {
        let phi = gen_random_cnf(RandomCnfSpec { k: 4, n: 16, alpha: 0.25, seed: 3 }).unwrap();
        let c = Clause::new((0..4).map(|v| Lit::pos(v * 3)));
        let task = RevealTask::from_clause(&c, 2).unwrap();
        let p = RevealParams { alpha: 0.01, ..params(4, 0.25) };
        let est = estimate_nice_probability(&phi, &task, &p, 40, 9, EnumerationLimits::default(), 2).unwrap();
        assert_eq!((est.nice, est.fraction.clone()), (40, ExactProb::one()));
        assert_eq!(est.sample_traces.len(), 2);
        assert!(est.sample_traces.iter().all(|r| r.c0.is_none()));
        let infeasible = f("p cnf 3 1\n1 0");
        let task = RevealTask { target: 1, target_value: true, prefix: vec![(0, false)], c_star_vars: vec![0, 1] };
        assert_eq!(
            estimate_nice_probability(&infeasible, &task, &p, 5, 0, EnumerationLimits::default(), 0),
            Err(RevealError::InfeasiblePrefix)
        );
    }

    fn random_case() -> impl Strategy<Value = (CnfFormula, usize)> {
        (0u64..1000, 1usize..4).prop_map(|(seed, i)| {
            (gen_random_cnf(RandomCnfSpec { k: 4, n: 12, alpha: 1.5, seed }).unwrap(), i)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn reveal_invariants_on_small_instances((phi, i) in random_case()) {
            let c_star = phi.clause(0).clone();
            prop_assume!(!c_star.is_tautology() && c_star.len() > i);
            let task = RevealTask::from_clause(&c_star, i).unwrap();
            let p = RevealParams { k: 4, alpha: 1.5, p_hd: 2.0, eps_bd: 0.5, zeta: 0.5 };
            let pool = enumerate_solutions_with(&phi, None, EnumerationLimits::default()).unwrap()
                .restricted_to(&task.prefix_pinning()).unwrap();
            for y in pool.iter().take(16) {
                let r = reveal(&phi, &y, &task, &p).unwrap();
                prop_assert!(!r.s.contains(&task.target));
                prop_assert!(task.prefix.iter().all(|(v, _)| r.s.contains(v)));
                prop_assert!(r.audit.good_clause_drops.is_empty());
                prop_assert!(r.audit.unsatisfied_neighbors.is_empty());
                prop_assert_eq!(r.s.iter().copied().collect::<Vec<_>>(), r.tau_s.domain().collect::<Vec<_>>());
            }
            let gibbs = check_gibbs_consistency(&phi, &task, &p, EnumerationLimits::default()).unwrap();
            prop_assert_eq!(gibbs.runs, pool.count());
            let results: Vec<Pinning> = pool.iter().map(|y| reveal(&phi, &y, &task, &p).unwrap().tau_s).collect();
            let outputs: BTreeSet<&Pinning> = results.iter().collect();
            let naive_consistent = pool
                .iter()
                .zip(&results)
                .all(|(y, own)| outputs.iter().all(|&q| q == own || !y.agrees_with(q)));
            prop_assert_eq!(gibbs.outputs, outputs.len());
            prop_assert_eq!(gibbs.inconsistent.is_empty(), naive_consistent);
            prop_assert!(naive_consistent);
        }

        #[test]
        fn elimination_steps_are_disjoint_and_replay((phi, _) in random_case(), zeta in 0.0f64..1.5) {
            let phi = simplify(&phi, &Pinning::new());
            prop_assume!(!phi.is_empty());
            let target = phi.clause(0).vars()[0];
            let out = iterative_elimination(&phi, target, zeta, 4, None);
            let steps = out.steps();
            let mut seen = BTreeSet::new();
            for s in steps {
                prop_assert!(!s.vars.contains(&target));
                prop_assert!(s.vars.iter().all(|&v| seen.insert(v)));
            }
            if let Elimination::Done { steps } = &out {
                let mut pin = Pinning::new();
                for s in steps {
                    pin = pin.union(&s.satisfying_pinning()).unwrap();
                }
                for s in steps.iter().filter(|s| !s.vars.is_empty()) {
                    prop_assert!(phi.clause(s.clause).satisfied_under(&pin));
                }
                let comp = target_component(&phi, target);
                let removed: BTreeSet<usize> = steps.iter().map(|s| s.clause).collect();
                prop_assert!(comp.iter().filter(|c| !removed.contains(c)).count() <= 1);
            }
        }
    }
}
