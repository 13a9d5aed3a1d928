//! θ-resilience, local uniformity, large-intersection clause sets and pin sequences.

use std::collections::HashSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::cnf::{Clause, CnfFormula, Pinning, Var};
use crate::exact::ExactProb;
use crate::learner::colex_subsets;
use crate::solutions::{
    enumerate_solutions_with, marginal_counts, EnumerationLimits, PatternCounter, SolutionError,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResilienceError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Solutions(#[from] SolutionError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResilienceReport {
    /// Least nonzero forbidden-pattern probability over candidate clauses.
    pub theta: Option<ExactProb>,
    /// Candidates whose forbidden pattern never occurs.
    pub zero_set_size: u64,
    /// First candidate (colex variable set, then pattern) attaining `theta`.
    pub argmin: Option<Clause>,
    /// Candidates considered: size-`k` clauses on distinct variables not in the formula.
    pub candidates: u64,
}

/// Exact θ over every size-`k` clause on distinct variables that is not a clause of
/// the formula. Clauses sharing a variable set with a formula clause but differing in
/// polarity are candidates.
pub fn resilience_theta(formula: &CnfFormula, k: usize) -> Result<ResilienceReport, ResilienceError> {
    resilience_theta_with(formula, k, EnumerationLimits::default())
}

pub fn resilience_theta_with(
    formula: &CnfFormula,
    k: usize,
    limits: EnumerationLimits,
) -> Result<ResilienceReport, ResilienceError> {
    let n = formula.num_vars();
    if k == 0 || k > n || k > crate::learner::MAX_K {
        return Err(ResilienceError::Invalid(format!("need 1 ≤ k ≤ n, got k = {k}, n = {n}")));
    }
    let set = enumerate_solutions_with(formula, None, limits)?;
    if set.is_empty() {
        return Err(SolutionError::Unsatisfiable.into());
    }
    let counter = PatternCounter::new(&set);
    let own: HashSet<&Clause> = formula.clauses().iter().filter(|c| !c.is_tautology()).collect();
    let subsets = colex_subsets(n, k);
    // Per subset: (zero count, candidate count, min nonzero (count, pattern)).
    let per_subset: Vec<(u64, u64, Option<(u64, u64)>)> = subsets
        .par_iter()
        .map(|vars| {
            let counts = counter.pattern_counts(vars);
            let mut zeros = 0;
            let mut candidates = 0;
            let mut best: Option<(u64, u64)> = None;
            for (p, &c) in counts.iter().enumerate() {
                if own.contains(&Clause::from_forbidden_bits(vars, p as u64)) {
                    continue;
                }
                candidates += 1;
                if c == 0 {
                    zeros += 1;
                } else if best.is_none_or(|(b, _)| c < b) {
                    best = Some((c, p as u64));
                }
            }
            (zeros, candidates, best)
        })
        .collect();
    let mut report = ResilienceReport {
        theta: None,
        zero_set_size: 0,
        argmin: None,
        candidates: 0,
    };
    let mut best: Option<(u64, usize, u64)> = None;
    for (s, &(zeros, candidates, min)) in per_subset.iter().enumerate() {
        report.zero_set_size += zeros;
        report.candidates += candidates;
        if let Some((c, p)) = min {
            if best.is_none_or(|(b, _, _)| c < b) {
                best = Some((c, s, p));
            }
        }
    }
    if let Some((c, s, p)) = best {
        report.theta = Some(ExactProb::new(c, set.count()));
        report.argmin = Some(Clause::from_forbidden_bits(&subsets[s], p));
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalUniformityReport {
    /// Largest `max(Pr[v = 1], Pr[v = 0])` over variables.
    pub max_marginal: ExactProb,
    pub argmax: Option<Var>,
    /// `(1/2)·e^{1/t}`.
    pub bound: f64,
    pub holds: bool,
    /// Whether `2^{k_min} ≥ 2e·d_max·t` and `t ≥ k_max`.
    pub condition_holds: bool,
}

pub fn local_uniformity_condition(formula: &CnfFormula, t: f64) -> bool {
    let p = formula.params();
    2f64.powi(p.k_min as i32) >= 2.0 * std::f64::consts::E * p.d_max as f64 * t
        && t >= p.k_max as f64
}

pub fn check_local_uniformity(
    formula: &CnfFormula,
    t: f64,
) -> Result<LocalUniformityReport, ResilienceError> {
    check_local_uniformity_with(formula, t, EnumerationLimits::default())
}

pub fn check_local_uniformity_with(
    formula: &CnfFormula,
    t: f64,
    limits: EnumerationLimits,
) -> Result<LocalUniformityReport, ResilienceError> {
    if !(t > 0.0) {
        return Err(ResilienceError::Invalid("t must be positive".into()));
    }
    let (total, trues) = marginal_counts(formula, limits)?;
    if total == 0 {
        return Err(SolutionError::Unsatisfiable.into());
    }
    let mut best: Option<(u64, Var)> = None;
    for (v, &c) in trues.iter().enumerate() {
        let m = c.max(total - c);
        if best.is_none_or(|(b, _)| m > b) {
            best = Some((m, v));
        }
    }
    let max_marginal = match best {
        Some((m, _)) => ExactProb::new(m, total),
        None => ExactProb::new(1, 2),
    };
    let bound = 0.5 * (1.0 / t).exp();
    Ok(LocalUniformityReport {
        holds: max_marginal.to_f64() <= bound,
        max_marginal,
        argmax: best.map(|b| b.1),
        bound,
        condition_holds: local_uniformity_condition(formula, t),
    })
}

/// `k/p + p·s/2`, the intersection threshold under which at most `p` clauses can meet a
/// fixed clause (valid when `p ≥ 1` and the threshold is at most `k`).
pub fn intersection_count_threshold(k: usize, p: f64, s: usize) -> f64 {
    k as f64 / p + p * s as f64 / 2.0
}

/// Indices of non-tautological clauses sharing at least `t1` variables with `c_star`.
pub fn large_intersection_clauses(formula: &CnfFormula, c_star: &Clause, t1: f64) -> Vec<usize> {
    formula
        .clauses()
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_tautology())
        .filter(|(_, c)| {
            let shared = c.vars().iter().filter(|&&v| c_star.contains_var(v)).count();
            shared as f64 >= t1
        })
        .map(|(i, _)| i)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PinSequence {
    /// Variables pinned in order, with their values.
    Pins(Vec<(Var, bool)>),
    /// Some clause has exactly the variables of `c*`.
    SameVarSet { clause: usize },
    /// A clause of the large-intersection set has no unpinned variable outside `c*`.
    Infeasible { clause: usize },
}

/// Greedy pinning that satisfies every clause sharing at least `t1` variables with
/// `c_star`, using only variables outside `c_star`.
///
/// Clauses are visited by increasing number of variables outside `c*` (ties by index);
/// each still-unsatisfied clause gets its smallest unpinned outside variable pinned to
/// the value satisfying it.
pub fn find_pin_sequence(formula: &CnfFormula, c_star: &Clause, t1: f64) -> PinSequence {
    if let Some(i) = formula
        .clauses()
        .iter()
        .position(|c| !c.is_tautology() && c.vars() == c_star.vars())
    {
        return PinSequence::SameVarSet { clause: i };
    }
    let outside = |c: &Clause| -> Vec<Var> {
        c.vars()
            .iter()
            .copied()
            .filter(|&v| !c_star.contains_var(v))
            .collect()
    };
    let mut order = large_intersection_clauses(formula, c_star, t1);
    order.sort_by_key(|&i| (outside(formula.clause(i)).len(), i));
    let mut pinning = Pinning::new();
    let mut pins = Vec::new();
    for i in order {
        let c = formula.clause(i);
        if c.satisfied_under(&pinning) {
            continue;
        }
        let Some(v) = outside(c).into_iter().find(|&v| !pinning.contains(v)) else {
            return PinSequence::Infeasible { clause: i };
        };
        let value = !c.forbidden_value(v).expect("non-tautological clause");
        pinning.insert(v, value);
        pins.push((v, value));
    }
    PinSequence::Pins(pins)
}
