//! Well-behavedness checks for random CNFs and bad-set identification.
//!
//! The clause graph `G_Φ` has one vertex per clause and an edge between clauses that
//! share a variable. Logarithms are base 2.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::ops::ControlFlow;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};

use rayon::prelude::*;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{CnfFormula, Pinning, Var};
use crate::exact::ExactProb;
use crate::learner::colex_subsets;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("clause set is not connected in the clause graph")]
    Disconnected,
    #[error("connected-set size {ell} exceeds the limit {limit}")]
    SizeLimit { ell: usize, limit: usize },
    #[error("trace step {step}: {msg}")]
    Replay { step: usize, msg: String },
}

/// Default largest set size for [`count_connected_sets`].
pub const DEFAULT_CONNECTED_SET_LIMIT: usize = 6;

/// Parameters of the well-behavedness definition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertyParams {
    pub k: usize,
    pub alpha: f64,
    pub p_hd: f64,
    pub eps_bd: f64,
    pub eta: f64,
    pub rho: f64,
    pub zeta: f64,
    pub beta: f64,
}

/// Name of the preset built by [`PropertyParams::asymptotic`].
pub const ASYMPTOTIC_PRESET: &str = "asymptotic";

impl PropertyParams {
    /// `p_hd = 12k^7, ε_bd = k^{-1/5}, η = k^{-2/5}, ρ = 2^{-k}, ζ = 2k^{-1/5},
    /// β = 1 − k^{-1/5}`.
    pub fn asymptotic(k: usize, alpha: f64) -> Self {
        let kf = k as f64;
        PropertyParams {
            k,
            alpha,
            p_hd: 12.0 * kf.powi(7),
            eps_bd: kf.powf(-0.2),
            eta: kf.powf(-0.4),
            rho: 2f64.powi(-(k as i32)),
            zeta: 2.0 * kf.powf(-0.2),
            beta: 1.0 - kf.powf(-0.2),
        }
    }

    pub fn bad_params(&self) -> BadParams {
        BadParams {
            k: self.k,
            p_hd: self.p_hd,
            eps_bd: self.eps_bd,
            alpha: self.alpha,
        }
    }
}

/// Sorted, deduplicated neighbor lists of the clause graph.
pub fn clause_graph(formula: &CnfFormula) -> Vec<Vec<usize>> {
    let occ = formula.occurrences();
    formula
        .clauses()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut nb: Vec<usize> = c
                .vars()
                .iter()
                .flat_map(|&v| occ[v].iter().copied())
                .filter(|&j| j != i)
                .collect();
            nb.sort_unstable();
            nb.dedup();
            nb
        })
        .collect()
}

#[cfg(test)]
fn shared_vars(formula: &CnfFormula, i: usize, j: usize) -> usize {
    let b = formula.clause(j);
    formula
        .clause(i)
        .vars()
        .iter()
        .filter(|&&v| b.contains_var(v))
        .count()
}

/// Visits connected vertex sets containing `root`, each exactly once, up to `max_size`
/// vertices. With `root_is_min`, only sets whose smallest vertex is `root` are visited.
///
/// Extension-set enumeration: a set grows only by vertices adjacent to its newest
/// member and to no earlier member.
pub fn for_each_connected_set<F>(
    adj: &[Vec<usize>],
    root: usize,
    max_size: usize,
    root_is_min: bool,
    mut visit: F,
) -> ControlFlow<()>
where
    F: FnMut(&[usize]) -> ControlFlow<()>,
{
    if max_size == 0 {
        return ControlFlow::Continue(());
    }
    let allowed = |u: usize| if root_is_min { u > root } else { u != root };
    let ext: Vec<usize> = adj[root].iter().copied().filter(|&u| allowed(u)).collect();
    let mut sub = vec![root];
    let mut closed: Vec<usize> = vec![0; adj.len()];
    mark(adj, &mut closed, root, 1);
    extend(adj, &mut sub, ext, max_size, &allowed, &mut closed, &mut visit)
}

fn mark(adj: &[Vec<usize>], closed: &mut [usize], v: usize, delta: isize) {
    let bump = |c: &mut usize| *c = (*c as isize + delta) as usize;
    bump(&mut closed[v]);
    for &u in &adj[v] {
        bump(&mut closed[u]);
    }
}

fn extend<F, A>(
    adj: &[Vec<usize>],
    sub: &mut Vec<usize>,
    mut ext: Vec<usize>,
    max_size: usize,
    allowed: &A,
    closed: &mut Vec<usize>,
    visit: &mut F,
) -> ControlFlow<()>
where
    F: FnMut(&[usize]) -> ControlFlow<()>,
    A: Fn(usize) -> bool,
{
    visit(sub)?;
    if sub.len() == max_size {
        return ControlFlow::Continue(());
    }
    while let Some(w) = ext.pop() {
        let mut next = ext.clone();
        for &u in &adj[w] {
            if allowed(u) && closed[u] == 0 && !next.contains(&u) {
                next.push(u);
            }
        }
        sub.push(w);
        mark(adj, closed, w, 1);
        let flow = extend(adj, sub, next, max_size, allowed, closed, visit);
        mark(adj, closed, w, -1);
        sub.pop();
        flow?;
    }
    ControlFlow::Continue(())
}

/// Number of connected clause sets of size `ell` that contain clause `c`.
pub fn count_connected_sets(
    formula: &CnfFormula,
    c: usize,
    ell: usize,
    limit: usize,
) -> Result<u64, StructureError> {
    if ell > limit {
        return Err(StructureError::SizeLimit { ell, limit });
    }
    if c >= formula.len() {
        return Err(StructureError::Invalid(format!("no clause {c}")));
    }
    let adj = clause_graph(formula);
    let mut count = 0u64;
    let _ = for_each_connected_set(&adj, c, ell, false, |s| {
        if s.len() == ell {
            count += 1;
        }
        ControlFlow::Continue(())
    });
    Ok(count)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClauseSizeReport {
    pub pass: bool,
    /// First non-tautological clause with fewer than `k − 2` variables.
    pub witness: Option<usize>,
}

pub fn check_clause_sizes(formula: &CnfFormula, k: usize) -> ClauseSizeReport {
    let witness = formula
        .clauses()
        .iter()
        .position(|c| !c.is_tautology() && c.len() + 2 < k);
    ClauseSizeReport {
        pass: witness.is_none(),
        witness,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IntersectionReport {
    pub pass: bool,
    /// `(i, j, shared)` for the first pair sharing more than `bound` variables.
    pub witness: Option<(usize, usize, usize)>,
}

pub fn check_pairwise_intersection(formula: &CnfFormula, bound: usize) -> IntersectionReport {
    let occ = formula.occurrences();
    let mut counts = vec![0usize; formula.len()];
    for (i, c) in formula.clauses().iter().enumerate() {
        if c.is_tautology() {
            continue;
        }
        let mut touched = Vec::new();
        for &v in c.vars() {
            for &j in &occ[v] {
                if j > i && !formula.clause(j).is_tautology() {
                    if counts[j] == 0 {
                        touched.push(j);
                    }
                    counts[j] += 1;
                }
            }
        }
        touched.sort_unstable();
        let hit = touched.iter().find(|&&j| counts[j] > bound).copied();
        let found = hit.map(|j| (i, j, counts[j]));
        for j in touched {
            counts[j] = 0;
        }
        if found.is_some() {
            return IntersectionReport {
                pass: false,
                witness: found,
            };
        }
    }
    IntersectionReport {
        pass: true,
        witness: None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BadParams {
    pub k: usize,
    pub p_hd: f64,
    pub eps_bd: f64,
    pub alpha: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub clause: usize,
    /// Bad variables of the clause when it was added.
    pub trigger: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BadSets {
    pub v_bad: BTreeSet<Var>,
    pub c_bad: BTreeSet<usize>,
    pub trace: Vec<TraceStep>,
}

impl BadSets {
    pub fn is_bad_var(&self, v: Var) -> bool {
        self.v_bad.contains(&v)
    }

    pub fn is_bad_clause(&self, c: usize) -> bool {
        self.c_bad.contains(&c)
    }
}

/// Variables whose degree exceeds `p_hd·α`.
pub fn high_degree_vars(formula: &CnfFormula, params: &BadParams) -> BTreeSet<Var> {
    let threshold = params.p_hd * params.alpha;
    formula
        .degrees()
        .iter()
        .enumerate()
        .filter(|&(_, &d)| d as f64 > threshold)
        .map(|(v, _)| v)
        .collect()
}

/// Fixed point of the bad-set growth: starting from the high-degree variables, a clause
/// with more than `ε_bd·k` bad variables becomes bad along with all its variables. The
/// smallest eligible clause index is taken at each step.
pub fn identify_bad(formula: &CnfFormula, params: &BadParams) -> BadSets {
    let rank: Vec<usize> = (0..formula.len()).collect();
    identify_bad_with_order(formula, params, &rank)
}

/// As [`identify_bad`], taking the eligible clause of least `rank` at each step.
pub fn identify_bad_with_order(formula: &CnfFormula, params: &BadParams, rank: &[usize]) -> BadSets {
    assert_eq!(rank.len(), formula.len());
    let threshold = params.eps_bd * params.k as f64;
    let occ = formula.occurrences();
    let mut sets = BadSets {
        v_bad: high_degree_vars(formula, params),
        ..BadSets::default()
    };
    let mut counts = vec![0usize; formula.len()];
    let mut eligible: BTreeSet<(usize, usize)> = BTreeSet::new();
    let add_var = |v: Var, counts: &mut Vec<usize>, eligible: &mut BTreeSet<(usize, usize)>, c_bad: &BTreeSet<usize>| {
        for &c in &occ[v] {
            counts[c] += 1;
            if counts[c] as f64 > threshold && !c_bad.contains(&c) {
                eligible.insert((rank[c], c));
            }
        }
    };
    for &v in &sets.v_bad.clone() {
        add_var(v, &mut counts, &mut eligible, &sets.c_bad);
    }
    while let Some((_, c)) = eligible.pop_first() {
        sets.c_bad.insert(c);
        sets.trace.push(TraceStep {
            clause: c,
            trigger: counts[c],
        });
        for &v in formula.clause(c).vars() {
            if sets.v_bad.insert(v) {
                add_var(v, &mut counts, &mut eligible, &sets.c_bad);
            }
        }
    }
    sets
}

/// Rebuilds the bad sets from the high-degree variables and a trace, checking that each
/// step was admissible and recorded its trigger count correctly.
pub fn replay_bad_sets(
    formula: &CnfFormula,
    params: &BadParams,
    trace: &[TraceStep],
) -> Result<BadSets, StructureError> {
    let threshold = params.eps_bd * params.k as f64;
    let mut sets = BadSets {
        v_bad: high_degree_vars(formula, params),
        ..BadSets::default()
    };
    for (step, t) in trace.iter().enumerate() {
        let fail = |msg: String| StructureError::Replay { step, msg };
        if t.clause >= formula.len() {
            return Err(fail(format!("no clause {}", t.clause)));
        }
        if sets.c_bad.contains(&t.clause) {
            return Err(fail(format!("clause {} already bad", t.clause)));
        }
        let c = formula.clause(t.clause);
        let bad = c.vars().iter().filter(|v| sets.v_bad.contains(v)).count();
        if bad != t.trigger {
            return Err(fail(format!("trigger {} but {bad} bad variables", t.trigger)));
        }
        if bad as f64 <= threshold {
            return Err(fail(format!("clause {} not above threshold", t.clause)));
        }
        sets.c_bad.insert(t.clause);
        sets.v_bad.extend(c.vars().iter().copied());
        sets.trace.push(*t);
    }
    Ok(sets)
}

/// Clauses outside `c_bad` with more than `ε_bd·k` bad variables (empty at a fixed point).
pub fn fixed_point_violations(formula: &CnfFormula, params: &BadParams, sets: &BadSets) -> Vec<usize> {
    let threshold = params.eps_bd * params.k as f64;
    (0..formula.len())
        .filter(|c| !sets.c_bad.contains(c))
        .filter(|&c| {
            formula.clause(c).vars().iter().filter(|v| sets.v_bad.contains(v)).count() as f64
                > threshold
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModifiedBadSets {
    pub sets: BadSets,
    /// Clauses sharing at least `2k^{4/5}` variables with `c*`.
    pub c_intersect: Vec<usize>,
    /// `k^{4/5} − 2`.
    pub intersect_bound: f64,
    pub intersect_within_bound: bool,
}

impl ModifiedBadSets {
    /// Largest number of bad variables in a clause outside `c_bad`.
    pub fn max_bad_in_good_clause(&self, formula: &CnfFormula) -> usize {
        self.good_clause_counts(formula).map(|(b, _)| b).max().unwrap_or(0)
    }

    /// Smallest number of good variables in a clause outside `c_bad`.
    pub fn min_good_in_good_clause(&self, formula: &CnfFormula) -> Option<usize> {
        self.good_clause_counts(formula).map(|(_, g)| g).min()
    }

    fn good_clause_counts<'a>(&'a self, formula: &'a CnfFormula) -> impl Iterator<Item = (usize, usize)> + 'a {
        (0..formula.len())
            .filter(|c| !self.sets.c_bad.contains(c))
            .map(move |c| {
                let vars = formula.clause(c).vars();
                let bad = vars.iter().filter(|v| self.sets.v_bad.contains(v)).count();
                (bad, vars.len() - bad)
            })
    }
}

/// `ε_bd·k + 5k^{4/5} − 3`: the most bad variables a good clause can hold after the
/// modification, given pairwise intersections of at most 3.
pub fn good_clause_bad_bound(k: usize, eps_bd: f64) -> f64 {
    eps_bd * k as f64 + 5.0 * (k as f64).powf(0.8) - 3.0
}

/// `(1 − ε_bd)k − 5k^{4/5}`: the fewest good variables a good clause can hold.
pub fn good_clause_good_bound(k: usize, eps_bd: f64) -> f64 {
    (1.0 - eps_bd) * k as f64 - 5.0 * (k as f64).powf(0.8)
}

/// Extends `base` with the clauses meeting `c*` in at least `2k^{4/5}` variables, the
/// prefix variables, and `c0`.
pub fn modified_bad_sets(
    formula: &CnfFormula,
    base: &BadSets,
    c_star_vars: &[Var],
    prefix: &Pinning,
    c0: usize,
    k: usize,
) -> ModifiedBadSets {
    let kf = k as f64;
    let threshold = 2.0 * kf.powf(0.8);
    let c_intersect: Vec<usize> = (0..formula.len())
        .filter(|&c| {
            let vars = formula.clause(c).vars();
            vars.iter().filter(|v| c_star_vars.contains(v)).count() as f64 >= threshold
        })
        .collect();
    let mut sets = base.clone();
    for &c in c_intersect.iter().chain([&c0]) {
        sets.c_bad.insert(c);
        sets.v_bad.extend(formula.clause(c).vars().iter().copied());
    }
    sets.v_bad.extend(prefix.domain());
    let intersect_bound = kf.powf(0.8) - 2.0;
    ModifiedBadSets {
        intersect_within_bound: c_intersect.len() as f64 <= intersect_bound,
        sets,
        c_intersect,
        intersect_bound,
    }
}

struct SearchOutcome<W> {
    explored: u64,
    witness: Option<W>,
    complete: bool,
}

/// Runs `test` on every connected clause set of size `2..=size_limit`, in parallel over
/// the smallest member. The witness reported is the first one found under the root of
/// least index, so it does not depend on scheduling unless the budget runs out.
fn search_connected_sets<W, F>(adj: &[Vec<usize>], size_limit: usize, max_subsets: u64, test: F) -> SearchOutcome<W>
where
    W: Send,
    F: Fn(&[usize]) -> Option<W> + Sync,
{
    let spent = AtomicU64::new(0);
    let first_failing_root = AtomicUsize::new(usize::MAX);
    let per_root: Vec<(u64, Option<W>, bool)> = (0..adj.len())
        .into_par_iter()
        .map(|root| {
            let mut explored = 0u64;
            let mut witness = None;
            let mut exhausted = false;
            let _ = for_each_connected_set(adj, root, size_limit, true, |s| {
                if s.len() < 2 {
                    return ControlFlow::Continue(());
                }
                if first_failing_root.load(Ordering::Relaxed) < root {
                    return ControlFlow::Break(());
                }
                if spent.fetch_add(1, Ordering::Relaxed) >= max_subsets {
                    exhausted = true;
                    return ControlFlow::Break(());
                }
                explored += 1;
                match test(s) {
                    Some(w) => {
                        witness = Some(w);
                        first_failing_root.fetch_min(root, Ordering::Relaxed);
                        ControlFlow::Break(())
                    }
                    None => ControlFlow::Continue(()),
                }
            });
            (explored, witness, exhausted)
        })
        .collect();
    let explored = per_root.iter().map(|r| r.0).sum();
    let complete = !per_root.iter().any(|r| r.2);
    let witness = per_root.into_iter().find_map(|r| r.1);
    SearchOutcome {
        explored,
        witness,
        complete,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DegreeOneReport {
    pub pass: bool,
    /// False when the subset budget ran out before the search finished.
    pub complete: bool,
    pub explored: u64,
    pub size_limit: usize,
    /// A clause set with fewer than two clauses holding `β·k` private variables.
    pub witness: Option<Vec<usize>>,
}

/// Absorbs rounding in products such as `(6/7)·7`.
const THRESHOLD_SLACK: f64 = 1e-9;

/// Clauses of `set` with at least `β·k` variables that occur in no other clause of `set`.
pub fn clauses_with_private_vars(formula: &CnfFormula, set: &[usize], beta: f64, k: usize) -> usize {
    set.iter()
        .filter(|&&c| {
            let private = formula
                .clause(c)
                .vars()
                .iter()
                .filter(|&&v| set.iter().all(|&d| d == c || !formula.clause(d).contains_var(v)))
                .count();
            private as f64 + THRESHOLD_SLACK >= beta * k as f64
        })
        .count()
}

/// Checks that every clause set of size `2..=size_limit` has at least two clauses with
/// `β·k` private variables.
///
/// Only connected sets are enumerated. A disconnected set passes whenever each of its
/// components does and every clause has `β·k` variables; sets that fail only because of
/// a short clause are caught by pairing that clause with a non-adjacent clause.
pub fn check_degree_one_property(
    formula: &CnfFormula,
    beta: f64,
    k: usize,
    size_limit: usize,
    max_subsets: u64,
) -> DegreeOneReport {
    let adj = clause_graph(formula);
    let SearchOutcome {
        mut explored,
        mut witness,
        complete,
    } = search_connected_sets(&adj, size_limit, max_subsets, |s| {
        (clauses_with_private_vars(formula, s, beta, k) < 2).then(|| {
            let mut w = s.to_vec();
            w.sort_unstable();
            w
        })
    });
    if witness.is_none() && complete && size_limit >= 2 {
        'short: for c in 0..formula.len() {
            if formula.clause(c).len() as f64 + THRESHOLD_SLACK >= beta * k as f64 {
                continue;
            }
            for d in 0..formula.len() {
                if d != c && adj[c].binary_search(&d).is_err() {
                    let mut w = vec![c, d];
                    w.sort_unstable();
                    explored += 1;
                    if clauses_with_private_vars(formula, &w, beta, k) < 2 {
                        witness = Some(w);
                        break 'short;
                    }
                }
            }
        }
    }
    DegreeOneReport {
        pass: witness.is_none() && complete,
        complete,
        explored,
        size_limit,
        witness,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpansionVerdict {
    /// Every relevant clause set was checked with an exact worst case.
    ProvedPass,
    /// No violation found, but some worst cases came from the greedy adversary or the
    /// size range was truncated.
    HeuristicPass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExpansionWitness {
    pub clauses: Vec<usize>,
    pub subsets: Vec<Vec<Var>>,
    pub union: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionReport {
    pub verdict: ExpansionVerdict,
    /// Largest set size examined.
    pub ell_max: usize,
    pub explored: u64,
    pub witness: Option<ExpansionWitness>,
}

const EXHAUSTIVE_BUDGET: u64 = 100_000;

fn binom(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, i| acc.saturating_mul((n - i) as u64) / (i as u64 + 1))
}

/// Smallest `|∪ S_i|` over `S_i ⊆ vbl(c_i)` with `|S_i| = b`, and the choice attaining it.
/// Exact when the bool is true.
fn min_union(formula: &CnfFormula, set: &[usize], b: usize) -> (usize, Vec<Vec<Var>>, bool) {
    let vars: Vec<&[Var]> = set.iter().map(|&c| formula.clause(c).vars()).collect();
    if set.len() == 2 {
        let shared: Vec<Var> = vars[0].iter().copied().filter(|v| vars[1].contains(v)).collect();
        let t = shared.len().min(b);
        let pick = |vs: &[Var]| -> Vec<Var> {
            let mut s: Vec<Var> = shared[..t].to_vec();
            s.extend(vs.iter().copied().filter(|v| !shared[..t].contains(v)).take(b - t));
            s.sort_unstable();
            s
        };
        return (2 * b - t, vec![pick(vars[0]), pick(vars[1])], true);
    }
    let choices: u64 = vars
        .iter()
        .map(|v| binom(v.len(), b))
        .fold(1u64, |a, x| a.saturating_mul(x));
    if set.len() == 3 && choices <= EXHAUSTIVE_BUDGET {
        let options: Vec<Vec<Vec<Var>>> = vars
            .iter()
            .map(|vs| {
                colex_subsets(vs.len(), b)
                    .into_iter()
                    .map(|idx| idx.iter().map(|&i| vs[i]).collect())
                    .collect()
            })
            .collect();
        let mut best = (usize::MAX, Vec::new());
        for a in &options[0] {
            for bb in &options[1] {
                for c in &options[2] {
                    let u: HashSet<Var> = a.iter().chain(bb).chain(c).copied().collect();
                    if u.len() < best.0 {
                        best = (u.len(), vec![a.clone(), bb.clone(), c.clone()]);
                    }
                }
            }
        }
        return (best.0, best.1, true);
    }
    // Coordinate descent: each S_i prefers variables already used by the others.
    let mut chosen: Vec<Vec<Var>> = vars
        .iter()
        .enumerate()
        .map(|(i, vs)| {
            let mut sorted: Vec<Var> = vs.to_vec();
            sorted.sort_by_key(|v| {
                std::cmp::Reverse(vars.iter().enumerate().filter(|&(j, o)| j != i && o.contains(v)).count())
            });
            sorted.truncate(b);
            sorted
        })
        .collect();
    for _ in 0..4 {
        for i in 0..chosen.len() {
            let others: HashSet<Var> = chosen
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .flat_map(|(_, s)| s.iter().copied())
                .collect();
            let mut sorted: Vec<Var> = vars[i].to_vec();
            sorted.sort_by_key(|v| !others.contains(v));
            sorted.truncate(b);
            chosen[i] = sorted;
        }
    }
    let union: HashSet<Var> = chosen.iter().flatten().copied().collect();
    (union.len(), chosen, false)
}

/// For clause sets of size `2..=min(ell_limit, ρ·|C|)`, checks that any choice of
/// `S_i ⊆ vbl(c_i)` with `|S_i| ≥ B` has `|∪ S_i| > (1 − η)·B·ℓ`.
///
/// Only connected sets are examined: unions over different components are disjoint,
/// so the bound adds up across components. Sets containing a clause with fewer than
/// `B` variables are vacuous.
pub fn check_edge_expansion(
    formula: &CnfFormula,
    rho: f64,
    eta: f64,
    b: usize,
    ell_limit: usize,
    max_subsets: u64,
) -> ExpansionReport {
    let full_range = (rho * formula.len() as f64).floor() as usize;
    let ell_max = ell_limit.min(full_range);
    let adj = clause_graph(formula);
    let all_exact = AtomicBool::new(true);
    let SearchOutcome {
        explored,
        witness,
        complete,
    } = search_connected_sets(&adj, ell_max, max_subsets, |s| {
        if s.iter().any(|&c| formula.clause(c).len() < b) {
            return None;
        }
        let (union, subsets, is_exact) = min_union(formula, s, b);
        if !is_exact {
            all_exact.store(false, Ordering::Relaxed);
        }
        (union as f64 <= (1.0 - eta) * (b * s.len()) as f64).then(|| ExpansionWitness {
            clauses: s.to_vec(),
            subsets,
            union,
        })
    });
    let exact = complete && ell_limit >= full_range && all_exact.load(Ordering::Relaxed);
    let verdict = match (&witness, exact) {
        (Some(_), _) => ExpansionVerdict::Fail,
        (None, true) => ExpansionVerdict::ProvedPass,
        (None, false) => ExpansionVerdict::HeuristicPass,
    };
    ExpansionReport {
        verdict,
        ell_max,
        explored,
        witness,
    }
}

/// Re-checks an expansion witness from scratch.
pub fn expansion_witness_valid(formula: &CnfFormula, eta: f64, b: usize, w: &ExpansionWitness) -> bool {
    let subsets_ok = w.clauses.len() == w.subsets.len()
        && w.clauses.iter().zip(&w.subsets).all(|(&c, s)| {
            let mut uniq = s.clone();
            uniq.sort_unstable();
            uniq.dedup();
            uniq.len() >= b && s.iter().all(|&v| formula.clause(c).contains_var(v))
        });
    let union: HashSet<Var> = w.subsets.iter().flatten().copied().collect();
    subsets_ok
        && union.len() == w.union
        && (union.len() as f64) <= (1.0 - eta) * (b * w.clauses.len()) as f64
}

pub fn is_connected(formula: &CnfFormula, set: &[usize]) -> bool {
    if set.is_empty() {
        return true;
    }
    let members: HashSet<usize> = set.iter().copied().collect();
    let adj = clause_graph(formula);
    let mut seen = HashSet::from([set[0]]);
    let mut queue = VecDeque::from([set[0]]);
    while let Some(c) = queue.pop_front() {
        for &d in &adj[c] {
            if members.contains(&d) && seen.insert(d) {
                queue.push_back(d);
            }
        }
    }
    seen.len() == members.len()
}

/// Connected components of the clause graph, each sorted, ordered by smallest member.
pub fn connected_components(formula: &CnfFormula) -> Vec<Vec<usize>> {
    let adj = clause_graph(formula);
    let mut comp = vec![usize::MAX; formula.len()];
    let mut out = Vec::new();
    for start in 0..formula.len() {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![start];
        comp[start] = id;
        let mut i = 0;
        while i < members.len() {
            for &d in &adj[members[i]] {
                if comp[d] == usize::MAX {
                    comp[d] = id;
                    members.push(d);
                }
            }
            i += 1;
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BadFractionReport {
    pub fraction: ExactProb,
    /// `12k^5 / ((1−η)(ε_bd−η)·p_hd)`.
    pub bound: f64,
    /// Whether the component has at least `log₂ n` clauses.
    pub applies: bool,
    /// `bound − fraction`.
    pub slack: f64,
}

pub fn bad_fraction_bound(k: usize, eta: f64, eps_bd: f64, p_hd: f64) -> f64 {
    12.0 * (k as f64).powi(5) / ((1.0 - eta) * (eps_bd - eta) * p_hd)
}

pub fn bad_fraction_in_component(
    formula: &CnfFormula,
    component: &[usize],
    bad: &BadSets,
    params: &PropertyParams,
) -> Result<BadFractionReport, StructureError> {
    if component.is_empty() {
        return Err(StructureError::Invalid("empty component".into()));
    }
    if component.iter().any(|&c| c >= formula.len()) {
        return Err(StructureError::Invalid("clause index out of range".into()));
    }
    if !is_connected(formula, component) {
        return Err(StructureError::Disconnected);
    }
    let members: BTreeSet<usize> = component.iter().copied().collect();
    let hits = members.iter().filter(|c| bad.c_bad.contains(c)).count();
    let fraction = ExactProb::new(hits as u64, members.len() as u64);
    let bound = bad_fraction_bound(params.k, params.eta, params.eps_bd, params.p_hd);
    Ok(BadFractionReport {
        slack: bound - fraction.to_f64(),
        applies: members.len() as f64 >= (formula.num_vars().max(1) as f64).log2(),
        fraction,
        bound,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthReport {
    pub ell: usize,
    /// Largest number of connected sets of size `ell` through one clause.
    pub max_count: u64,
    /// `n^3 (e k^2 α)^ell`.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WellBehavedReport {
    pub preset: Option<String>,
    pub params: PropertyParams,
    pub clause_sizes: ClauseSizeReport,
    pub intersection: IntersectionReport,
    pub bad_sets: BadSets,
    pub bad_components: Vec<BadFractionReport>,
    pub growth: Vec<GrowthReport>,
    pub edge_expansion: ExpansionReport,
    pub degree_one: DegreeOneReport,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckLimits {
    pub growth_ell: usize,
    pub expansion_ell: usize,
    pub degree_one_size: usize,
    pub max_subsets: u64,
}

impl Default for CheckLimits {
    fn default() -> Self {
        CheckLimits {
            growth_ell: 3,
            expansion_ell: 3,
            degree_one_size: 3,
            max_subsets: 1_000_000,
        }
    }
}

/// Runs every property check under `params`.
pub fn check_well_behaved(
    formula: &CnfFormula,
    params: &PropertyParams,
    preset: Option<&str>,
    limits: CheckLimits,
) -> WellBehavedReport {
    let k = params.k;
    let bad_sets = identify_bad(formula, &params.bad_params());
    let bad_components = connected_components(formula)
        .iter()
        .map(|c| bad_fraction_in_component(formula, c, &bad_sets, params).expect("components are connected"))
        .collect();
    let n = formula.num_vars() as f64;
    let growth = (1..=limits.growth_ell)
        .map(|ell| {
            let max_count = (0..formula.len())
                .map(|c| count_connected_sets(formula, c, ell, usize::MAX).unwrap_or(0))
                .max()
                .unwrap_or(0);
            let bound = n.powi(3) * (std::f64::consts::E * (k * k) as f64 * params.alpha).powi(ell as i32);
            GrowthReport {
                ell,
                max_count,
                bound,
                pass: max_count as f64 <= bound,
            }
        })
        .collect();
    WellBehavedReport {
        preset: preset.map(str::to_string),
        params: *params,
        clause_sizes: check_clause_sizes(formula, k),
        intersection: check_pairwise_intersection(formula, 3),
        bad_sets,
        bad_components,
        growth,
        edge_expansion: check_edge_expansion(formula, params.rho, params.eta, k, limits.expansion_ell, limits.max_subsets),
        degree_one: check_degree_one_property(formula, params.beta, k, limits.degree_one_size, limits.max_subsets),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::{parse_dimacs, Clause};
    use crate::generators::{gen_counterexample, gen_disjoint_family, gen_gadget, gen_random_cnf, GadgetSpec, RandomCnfSpec};
    use proptest::prelude::*;

    fn f(text: &str) -> CnfFormula {
        parse_dimacs(text).unwrap()
    }

    fn brute_connected_sets(formula: &CnfFormula, c: usize, ell: usize) -> u64 {
        let m = formula.len();
        (0u64..1 << m)
            .filter(|&mask| mask.count_ones() as usize == ell && (mask >> c) & 1 == 1)
            .filter(|&mask| {
                let set: Vec<usize> = (0..m).filter(|&i| (mask >> i) & 1 == 1).collect();
                is_connected(formula, &set)
            })
            .count() as u64
    }

    #[test]
    fn connected_set_examples() {
        let isolated = f("p cnf 4 2\n1 2 0\n3 4 0");
        assert_eq!(count_connected_sets(&isolated, 0, 1, 6).unwrap(), 1);
        assert_eq!(count_connected_sets(&isolated, 0, 2, 6).unwrap(), 0);
        let path = f("p cnf 4 3\n1 2 0\n2 3 0\n3 4 0");
        assert_eq!(count_connected_sets(&path, 1, 2, 6).unwrap(), 2);
        assert_eq!(count_connected_sets(&path, 0, 3, 6).unwrap(), 1);
        assert_eq!(
            count_connected_sets(&path, 0, 7, 6),
            Err(StructureError::SizeLimit { ell: 7, limit: 6 })
        );
    }

    #[test]
    fn clause_size_examples() {
        let g = gen_gadget(GadgetSpec { k: 4, ell: 3, restricted: true }).unwrap();
        assert!(check_clause_sizes(&g, 4).pass);
        let short = f("p cnf 5 2\n1 2 3 4 5 0\n1 1 1 2 0");
        let r = check_clause_sizes(&short, 5);
        assert_eq!(r.witness, Some(1));
        assert!(short.clause(1).len() + 2 < 5);
    }

    #[test]
    fn intersection_examples() {
        assert!(check_pairwise_intersection(&gen_disjoint_family(3, 12, 1).unwrap(), 0).pass);
        let g = gen_gadget(GadgetSpec { k: 5, ell: 2, restricted: false }).unwrap();
        assert!(check_pairwise_intersection(&g, 3).pass);
        let r = check_pairwise_intersection(&g, 2);
        let (i, j, s) = r.witness.unwrap();
        assert_eq!((i, j, s), (0, 1, 3));
        assert_eq!(shared_vars(&g, i, j), s);
        assert!(check_pairwise_intersection(&gen_counterexample(5).unwrap(), 2).pass);
        assert!(!check_pairwise_intersection(&gen_counterexample(5).unwrap(), 1).pass);
    }

    #[test]
    fn identify_bad_examples() {
        let phi = f("p cnf 6 3\n1 2 3 0\n1 4 5 0\n1 6 -2 0");
        let quiet = BadParams { k: 3, p_hd: 10.0, eps_bd: 0.5, alpha: 1.0 };
        assert_eq!(identify_bad(&phi, &quiet), BadSets::default());
        // Star: variable 1 has degree 3 > p_hd·α = 2 and ε_bd·k = 0.9 < 1.
        let star = BadParams { k: 3, p_hd: 2.0, eps_bd: 0.3, alpha: 1.0 };
        let sets = identify_bad(&phi, &star);
        assert_eq!(sets.c_bad, BTreeSet::from([0, 1, 2]));
        assert_eq!(sets.v_bad, (0..6).collect());
        assert_eq!(
            sets.trace,
            vec![
                TraceStep { clause: 0, trigger: 1 },
                TraceStep { clause: 1, trigger: 1 },
                TraceStep { clause: 2, trigger: 2 },
            ]
        );
        assert!(fixed_point_violations(&phi, &star, &sets).is_empty());
    }

    #[test]
    fn cascade_respects_smallest_index() {
        // Clause 2 becomes eligible only after clause 1 turns its variables bad.
        let phi = f("p cnf 7 3\n5 6 7 0\n1 2 3 0\n2 3 4 0\n");
        let params = BadParams { k: 3, p_hd: 0.5, eps_bd: 0.5, alpha: 1.0 };
        let sets = identify_bad(&phi, &params);
        assert_eq!(sets.trace.first().map(|t| t.clause), Some(0));
        let replayed = replay_bad_sets(&phi, &params, &sets.trace).unwrap();
        assert_eq!(replayed, sets);
        let mut broken = sets.trace.clone();
        broken[0].trigger += 1;
        assert!(matches!(replay_bad_sets(&phi, &params, &broken), Err(StructureError::Replay { step: 0, .. })));
    }

    #[test]
    fn modified_sets_examples() {
        let phi = f("p cnf 9 2\n1 2 3 0\n4 5 6 0");
        let base = BadSets::default();
        let m = modified_bad_sets(&phi, &base, &[6, 7, 8], &Pinning::new(), 1, 3);
        assert_eq!(m.sets.c_bad, BTreeSet::from([1]));
        assert_eq!(m.sets.v_bad, BTreeSet::from([3, 4, 5]));
        assert!(m.c_intersect.is_empty());
        let prefix = Pinning::from_pairs([(6, true)]);
        let m = modified_bad_sets(&phi, &base, &[6, 7, 8], &prefix, 1, 3);
        assert!(m.sets.v_bad.contains(&6));
        assert!(m.max_bad_in_good_clause(&phi) as f64 <= good_clause_bad_bound(3, 3f64.powf(-0.2)));
    }

    #[test]
    fn degree_one_examples() {
        let two = f("p cnf 6 2\n1 2 3 0\n4 5 6 0");
        let r = check_degree_one_property(&two, 1.0, 3, 4, 1000);
        assert!(r.pass && r.complete);
        let same = f("p cnf 3 3\n1 2 3 0\n-1 2 3 0\n1 -2 3 0");
        let r = check_degree_one_property(&same, 0.1, 3, 3, 1000);
        assert!(!r.pass);
        let w = r.witness.unwrap();
        assert!(clauses_with_private_vars(&same, &w, 0.1, 3) < 2);
        let short = f("p cnf 6 2\n1 0\n4 5 6 0");
        let r = check_degree_one_property(&short, 1.0, 3, 2, 1000);
        assert_eq!(r.witness, Some(vec![0, 1]));
    }

    #[test]
    fn edge_expansion_examples() {
        let k = 6;
        let two = f("p cnf 9 2\n1 2 3 4 5 6 0\n1 2 3 7 8 9 0");
        // Union 2k − 3 = 9 against (1 − η)·2k = 12(1 − η).
        let pass = check_edge_expansion(&two, 1.0, 0.3, k, 2, 1000);
        assert_eq!(pass.verdict, ExpansionVerdict::ProvedPass);
        let fail = check_edge_expansion(&two, 1.0, 0.2, k, 2, 1000);
        assert_eq!(fail.verdict, ExpansionVerdict::Fail);
        let w = fail.witness.unwrap();
        assert_eq!(w.union, 9);
        assert!(expansion_witness_valid(&two, 0.2, k, &w));
        let disjoint = gen_disjoint_family(3, 12, 4).unwrap();
        let r = check_edge_expansion(&disjoint, 1.0, 0.01, 3, 4, 1000);
        assert_ne!(r.verdict, ExpansionVerdict::Fail);
        let tiny = check_edge_expansion(&two, 0.0, 0.9, k, 5, 1000);
        assert_eq!((tiny.verdict, tiny.ell_max), (ExpansionVerdict::ProvedPass, 0));
    }

    #[test]
    fn three_clause_exhaustive_matches_brute_force() {
        let phi = f("p cnf 8 3\n1 2 3 4 0\n3 4 5 6 0\n1 6 7 8 0");
        let (u, subsets, exact) = min_union(&phi, &[0, 1, 2], 3);
        assert!(exact);
        let w = ExpansionWitness { clauses: vec![0, 1, 2], subsets, union: u };
        assert!(expansion_witness_valid(&phi, 1.0 - u as f64 / 9.0, 3, &w));
        // {1,3,4}, {3,4,6}, {1,6,7}: union of 5.
        assert_eq!(u, 5);
    }

    #[test]
    fn bad_fraction_examples() {
        let phi = f("p cnf 6 3\n1 2 3 0\n3 4 5 0\n5 6 1 0");
        let params = PropertyParams::asymptotic(3, 1.0);
        let none = bad_fraction_in_component(&phi, &[0, 1, 2], &BadSets::default(), &params).unwrap();
        assert!(none.fraction.is_zero());
        let all = BadSets { c_bad: BTreeSet::from([0, 1, 2]), ..BadSets::default() };
        let r = bad_fraction_in_component(&phi, &[0, 1, 2], &all, &params).unwrap();
        assert_eq!(r.fraction, ExactProb::one());
        assert!(r.applies);
        let apart = f("p cnf 6 2\n1 2 0\n3 4 0");
        assert_eq!(
            bad_fraction_in_component(&apart, &[0, 1], &all, &params),
            Err(StructureError::Disconnected)
        );
    }

    #[test]
    fn planted_hub_fraction() {
        // Variable 1 sits in clauses 0..4; clause 5 is far away.
        let phi = f("p cnf 14 6\n1 2 3 0\n1 4 5 0\n1 6 7 0\n1 8 9 0\n-9 10 11 0\n12 13 14 0");
        let params = PropertyParams { p_hd: 3.0, eps_bd: 0.3, ..PropertyParams::asymptotic(3, 1.0) };
        let bad = identify_bad(&phi, &params.bad_params());
        assert_eq!(bad.c_bad, BTreeSet::from([0, 1, 2, 3, 4]));
        let comps = connected_components(&phi);
        assert_eq!(comps, vec![vec![0, 1, 2, 3, 4], vec![5]]);
        let r = bad_fraction_in_component(&phi, &comps[0], &bad, &params).unwrap();
        assert_eq!(r.fraction, ExactProb::one());
    }

    #[test]
    fn asymptotic_preset_values() {
        let p = PropertyParams::asymptotic(32, 2.0);
        assert_eq!(p.p_hd, 12.0 * 32f64.powi(7));
        assert!((p.eps_bd - 0.5).abs() < 1e-12);
        assert!((p.eta - 0.25).abs() < 1e-12);
        assert!((p.zeta - 1.0).abs() < 1e-12);
        assert!((p.beta - 0.5).abs() < 1e-12);
        assert_eq!(p.rho, 2f64.powi(-32));
    }

    #[test]
    fn well_behaved_report_runs() {
        let phi = gen_random_cnf(RandomCnfSpec { k: 5, n: 60, alpha: 1.0, seed: 2 }).unwrap();
        let params = PropertyParams { rho: 0.05, ..PropertyParams::asymptotic(5, 1.0) };
        let r = check_well_behaved(&phi, &params, Some(ASYMPTOTIC_PRESET), CheckLimits::default());
        assert!(r.bad_sets.v_bad.is_empty());
        assert_eq!(r.growth.len(), 3);
        assert!(r.growth.iter().all(|g| g.pass));
    }

    fn arb_formula() -> impl Strategy<Value = CnfFormula> {
        (6usize..12).prop_flat_map(|n| {
            let clause = prop::collection::vec((0..n, any::<bool>()), 1..4)
                .prop_map(|ls| Clause::new(ls.into_iter().map(|(v, s)| crate::cnf::Lit { var: v, negated: s })));
            prop::collection::vec(clause, 1..9).prop_map(move |cs| CnfFormula::new(n, cs).unwrap())
        })
    }

    proptest! {
        #[test]
        fn connected_set_counts_match_brute_force(phi in arb_formula(), ell in 1usize..5) {
            for c in 0..phi.len() {
                prop_assert_eq!(count_connected_sets(&phi, c, ell, 6).unwrap(), brute_connected_sets(&phi, c, ell));
            }
        }

        #[test]
        fn identify_bad_is_a_replayable_fixed_point(phi in arb_formula(), p_hd in 0.5f64..4.0, eps in 0.1f64..0.9, seed in any::<u64>()) {
            let params = BadParams { k: 3, p_hd, eps_bd: eps, alpha: 1.0 };
            let sets = identify_bad(&phi, &params);
            prop_assert!(sets.v_bad.is_superset(&high_degree_vars(&phi, &params)));
            prop_assert!(fixed_point_violations(&phi, &params, &sets).is_empty());
            prop_assert_eq!(&replay_bad_sets(&phi, &params, &sets.trace).unwrap(), &sets);
            let mut rank: Vec<usize> = (0..phi.len()).collect();
            crate::rng::Rng::new(seed).shuffle(&mut rank);
            let other = identify_bad_with_order(&phi, &params, &rank);
            prop_assert_eq!((&other.v_bad, &other.c_bad), (&sets.v_bad, &sets.c_bad));
        }

        #[test]
        fn intersection_witness_revalidates(phi in arb_formula(), bound in 0usize..3) {
            let r = check_pairwise_intersection(&phi, bound);
            match r.witness {
                Some((i, j, s)) => prop_assert!(s > bound && shared_vars(&phi, i, j) == s),
                None => {
                    for i in 0..phi.len() {
                        for j in i + 1..phi.len() {
                            if !phi.clause(i).is_tautology() && !phi.clause(j).is_tautology() {
                                prop_assert!(shared_vars(&phi, i, j) <= bound);
                            }
                        }
                    }
                }
            }
        }

        #[test]
        fn degree_one_agrees_with_all_subsets(phi in arb_formula(), beta in 0.2f64..1.0) {
            let r = check_degree_one_property(&phi, beta, 3, 3, u64::MAX);
            let m = phi.len();
            let brute_fail = (0u64..1 << m)
                .filter(|s| (2..=3).contains(&s.count_ones()))
                .any(|s| {
                    let set: Vec<usize> = (0..m).filter(|&i| (s >> i) & 1 == 1).collect();
                    clauses_with_private_vars(&phi, &set, beta, 3) < 2
                });
            prop_assert_eq!(r.pass, !brute_fail);
            if let Some(w) = r.witness {
                prop_assert!(clauses_with_private_vars(&phi, &w, beta, 3) < 2);
            }
        }
    }
}
