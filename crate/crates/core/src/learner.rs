//! Valiant's clause-elimination learner, exact-learning trials and sample-complexity sweeps.
//!
//! The learner keeps every size-`k` clause whose forbidden pattern never appears in the
//! samples. [`PatternTable`] stores the dual view: for every `k`-subset of variables, the
//! set of patterns seen on it.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{Assignment, Clause, CnfError, CnfFormula, Var};
use crate::exact::ExactProb;
use crate::generators::{FamilySpec, GenError};
use crate::rng::{derive_seed, Rng};
use crate::solutions::{
    enumerate_solutions_with, project_bits, tv_between, EnumerationLimits, PatternCounter,
    SolutionError, SolutionSet,
};

/// Largest clause width the pattern table supports.
pub const MAX_K: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Solutions(#[from] SolutionError),
    #[error(transparent)]
    Generator(#[from] GenError),
    #[error(transparent)]
    Cnf(#[from] CnfError),
}

fn invalid(msg: impl Into<String>) -> LearnError {
    LearnError::Invalid(msg.into())
}

/// All `k`-subsets of `0..n` in colex order.
pub fn colex_subsets(n: usize, k: usize) -> Vec<Vec<Var>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut c: Vec<Var> = (0..k).collect();
    loop {
        out.push(c.clone());
        let mut i = 0;
        while i < k && c[i] + 1 == if i + 1 < k { c[i + 1] } else { n } {
            i += 1;
        }
        if i == k {
            return out;
        }
        c[i] += 1;
        for (j, x) in c.iter_mut().enumerate().take(i) {
            *x = j;
        }
    }
}

/// For every `k`-subset `S` (colex order), the set of patterns observed on `S`, as a
/// `2^k`-bit mask. Pattern bit `i` is the value of the `i`-th smallest variable of `S`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternTable {
    n: usize,
    k: usize,
    subsets: Vec<Vec<Var>>,
    words_per_subset: usize,
    bits: Vec<u64>,
}

impl PatternTable {
    pub fn new(n: usize, k: usize) -> Result<Self, LearnError> {
        if k == 0 || k > n {
            return Err(invalid(format!("need 1 ≤ k ≤ n, got k = {k}, n = {n}")));
        }
        if k > MAX_K {
            return Err(invalid(format!("k = {k} exceeds {MAX_K}")));
        }
        let subsets = colex_subsets(n, k);
        let words_per_subset = ((1usize << k) / 64).max(1);
        let bits = vec![0; subsets.len() * words_per_subset];
        Ok(PatternTable {
            n,
            k,
            subsets,
            words_per_subset,
            bits,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn subsets(&self) -> &[Vec<Var>] {
        &self.subsets
    }

    fn mark(&mut self, s: usize, pattern: u64) {
        self.bits[s * self.words_per_subset + (pattern / 64) as usize] |= 1 << (pattern % 64);
    }

    pub fn is_observed(&self, s: usize, pattern: u64) -> bool {
        (self.bits[s * self.words_per_subset + (pattern / 64) as usize] >> (pattern % 64)) & 1 == 1
    }

    /// Records a packed sample (`n ≤ 64`).
    pub fn observe_word(&mut self, word: u64) {
        for s in 0..self.subsets.len() {
            let p = project_bits(word, &self.subsets[s]);
            self.mark(s, p);
        }
    }

    pub fn observe(&mut self, a: &Assignment) {
        assert_eq!(a.len(), self.n, "sample length differs from n");
        match a.as_bits() {
            Some(w) => self.observe_word(w),
            None => {
                for s in 0..self.subsets.len() {
                    let p = self.subsets[s]
                        .iter()
                        .enumerate()
                        .fold(0u64, |acc, (i, &v)| acc | ((a.get(v) as u64) << i));
                    self.mark(s, p);
                }
            }
        }
    }

    /// Number of (subset, pattern) pairs never observed, i.e. surviving clauses.
    pub fn unobserved(&self) -> usize {
        let total = self.subsets.len() << self.k;
        let seen: usize = self.bits.iter().map(|w| w.count_ones() as usize).sum();
        total - seen
    }

    /// The surviving clauses, by subset in colex order and then by pattern.
    pub fn surviving_clauses(&self) -> Vec<Clause> {
        let mut out = Vec::new();
        for (s, vars) in self.subsets.iter().enumerate() {
            for p in 0..1u64 << self.k {
                if !self.is_observed(s, p) {
                    out.push(Clause::from_forbidden_bits(vars, p));
                }
            }
        }
        out
    }

    pub fn to_formula(&self) -> CnfFormula {
        CnfFormula::new(self.n, self.surviving_clauses()).expect("subsets lie in 0..n")
    }

    /// Whether every pattern recorded here is recorded in `other`.
    pub fn is_subset_of(&self, other: &PatternTable) -> bool {
        self.bits.len() == other.bits.len()
            && self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0)
    }
}

/// Learns from samples by elimination, building a [`PatternTable`] sample by sample.
pub fn valiant_learn(n: usize, k: usize, samples: &[Assignment]) -> Result<CnfFormula, LearnError> {
    let mut table = PatternTable::new(n, k)?;
    for a in samples {
        if a.len() != n {
            return Err(invalid("sample length differs from n"));
        }
        table.observe(a);
    }
    Ok(table.to_formula())
}

/// Clause-major elimination: for every candidate clause, scan every sample.
pub fn valiant_learn_clause_major(
    n: usize,
    k: usize,
    samples: &[Assignment],
) -> Result<CnfFormula, LearnError> {
    if k == 0 || k > n || k > MAX_K {
        return Err(invalid(format!("need 1 ≤ k ≤ min(n, {MAX_K})")));
    }
    let mut clauses = Vec::new();
    for vars in colex_subsets(n, k) {
        for p in 0..1u64 << k {
            let candidate = Clause::from_forbidden_bits(&vars, p);
            if samples.iter().all(|a| candidate.satisfied_by(a)) {
                clauses.push(candidate);
            }
        }
    }
    Ok(CnfFormula::new(n, clauses)?)
}

/// Replaces each clause with fewer than `k` variables by all of its size-`k` extensions.
/// Size-`k` clauses and tautologies are kept as they are; duplicates are dropped.
pub fn extend_short_clauses(formula: &CnfFormula, k: usize) -> Result<CnfFormula, LearnError> {
    let n = formula.num_vars();
    if n < k {
        return Err(invalid(format!("n = {n} is smaller than k = {k}")));
    }
    let mut out: Vec<Clause> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for c in formula.clauses() {
        if c.is_tautology() || c.len() >= k {
            if c.len() > k && !c.is_tautology() {
                return Err(invalid(format!("clause {c} has more than k = {k} variables")));
            }
            if seen.insert(c.clone()) {
                out.push(c.clone());
            }
            continue;
        }
        let others: Vec<Var> = (0..n).filter(|&v| !c.contains_var(v)).collect();
        let extra = k - c.len();
        for pick in colex_subsets(others.len(), extra) {
            let vars: Vec<Var> = pick.iter().map(|&i| others[i]).collect();
            for p in 0..1u64 << extra {
                let lits = c.lits().iter().copied().chain(vars.iter().enumerate().map(|(i, &v)| {
                    crate::cnf::Lit {
                        var: v,
                        negated: (p >> i) & 1 == 1,
                    }
                }));
                let ext = Clause::new(lits);
                if seen.insert(ext.clone()) {
                    out.push(ext);
                }
            }
        }
    }
    Ok(CnfFormula::new(n, out)?)
}

/// `ceil((k·ln(2n) − ln δ) / θ)`. Values within a relative `1e-12` above an integer
/// are rounded down to it, so float noise cannot bump an exact integer bound.
pub fn predicted_sample_bound(
    theta: &ExactProb,
    n: usize,
    k: usize,
    delta: f64,
) -> Result<u64, LearnError> {
    if theta.is_zero() {
        return Err(invalid("theta must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta must lie in (0, 1)"));
    }
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    let x = (k as f64 * (2.0 * n as f64).ln() - delta.ln()) / theta.to_f64();
    let snapped = x.round();
    let t = if (x - snapped).abs() <= 1e-12 * x.abs().max(1.0) {
        snapped
    } else {
        x.ceil()
    };
    Ok(t.max(0.0) as u64)
}

/// Ground truth for repeated trials: its solutions and the full table of patterns
/// they realize.
///
/// When every clause of the truth has at most `k` variables, the learner's output is
/// equivalent to the truth exactly when the sample table equals the full table: any
/// missing pattern leaves a clause that some solution violates, and with nothing
/// missing the output is the set of all size-`k` clauses valid on the truth.
#[derive(Clone, Debug)]
pub struct TruthOracle {
    formula: CnfFormula,
    solutions: SolutionSet,
    table: PatternTable,
    k: usize,
    k_expressible: bool,
    limits: EnumerationLimits,
}

impl TruthOracle {
    pub fn new(truth: &CnfFormula, k: usize) -> Result<Self, LearnError> {
        Self::with_limits(truth, k, EnumerationLimits::default())
    }

    pub fn with_limits(
        truth: &CnfFormula,
        k: usize,
        limits: EnumerationLimits,
    ) -> Result<Self, LearnError> {
        let solutions = enumerate_solutions_with(truth, None, limits)?;
        if solutions.is_empty() {
            return Err(SolutionError::Unsatisfiable.into());
        }
        let mut table = PatternTable::new(truth.num_vars(), k)?;
        let counter = PatternCounter::new(&solutions);
        let seen: Vec<Vec<u64>> = table
            .subsets
            .par_iter()
            .map(|vars| counter.pattern_counts(vars))
            .collect();
        for (s, counts) in seen.iter().enumerate() {
            for (p, &c) in counts.iter().enumerate() {
                if c > 0 {
                    table.mark(s, p as u64);
                }
            }
        }
        let k_expressible = truth
            .clauses()
            .iter()
            .all(|c| c.is_tautology() || c.len() <= k);
        Ok(TruthOracle {
            formula: truth.clone(),
            solutions,
            table,
            k,
            k_expressible,
            limits,
        })
    }

    pub fn solutions(&self) -> &SolutionSet {
        &self.solutions
    }

    pub fn table(&self) -> &PatternTable {
        &self.table
    }

    pub fn formula(&self) -> &CnfFormula {
        &self.formula
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn empty_table(&self) -> PatternTable {
        PatternTable::new(self.formula.num_vars(), self.k).expect("validated in constructor")
    }

    /// Whether the learner's output for `samples` has the truth's solution set.
    pub fn learned_equivalent(&self, samples: &PatternTable) -> Result<bool, LearnError> {
        if self.k_expressible {
            Ok(samples == &self.table)
        } else {
            let learned = enumerate_solutions_with(&samples.to_formula(), None, self.limits)?;
            Ok(learned == self.solutions)
        }
    }

    /// Total variation distance between the truth and the learner's output.
    pub fn learned_tv(&self, samples: &PatternTable) -> Result<ExactProb, LearnError> {
        let learned = enumerate_solutions_with(&samples.to_formula(), None, self.limits)?;
        if learned.is_empty() {
            return Err(SolutionError::Unsatisfiable.into());
        }
        Ok(tv_between(&self.solutions, &learned)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub family: Option<FamilySpec>,
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub seed: u64,
    pub success: bool,
    pub learned_clauses: usize,
    pub tv: Option<ExactProb>,
    pub wall_time_ms: f64,
}

/// Samples `t` uniform solutions of `truth`, learns, and records whether the result is
/// equivalent to `truth`.
pub fn exact_learning_trial(
    truth: &CnfFormula,
    k: usize,
    t: usize,
    seed: u64,
) -> Result<TrialRecord, LearnError> {
    let oracle = TruthOracle::new(truth, k)?;
    trial_with_oracle(&oracle, t, seed, false)
}

pub fn trial_with_oracle(
    oracle: &TruthOracle,
    t: usize,
    seed: u64,
    with_tv: bool,
) -> Result<TrialRecord, LearnError> {
    let start = Instant::now();
    let mut rng = Rng::new(seed);
    let mut table = oracle.empty_table();
    for w in oracle.solutions.sample_words(t, &mut rng)? {
        table.observe_word(w);
    }
    let success = oracle.learned_equivalent(&table)?;
    let tv = if with_tv {
        Some(oracle.learned_tv(&table)?)
    } else {
        None
    };
    Ok(TrialRecord {
        family: None,
        n: oracle.formula.num_vars(),
        k: oracle.k,
        t,
        seed,
        success,
        learned_clauses: table.unobserved(),
        tv,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub family: FamilySpec,
    pub n_values: Vec<usize>,
    /// Strictly increasing sample counts.
    pub t_grid: Vec<usize>,
    pub trials: usize,
    pub delta: f64,
    pub seed_base: u64,
    /// Learner clause width; defaults to the family's `k`.
    pub k: Option<usize>,
    pub max_vars: usize,
}

impl SweepConfig {
    pub fn new(family: FamilySpec, n_values: Vec<usize>, t_grid: Vec<usize>, seed_base: u64) -> Self {
        SweepConfig {
            family,
            n_values,
            t_grid,
            trials: 200,
            delta: 0.1,
            seed_base,
            k: None,
            max_vars: crate::solutions::DEFAULT_MAX_VARS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepRow {
    pub family: String,
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub trials: usize,
    pub successes: usize,
    pub t_star_flag: bool,
    pub seed_base: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// `T*(n)` per entry of `n_values`: least grid `T` reaching success rate `1 − δ`.
    pub t_star: Vec<(usize, Option<usize>)>,
}

impl SweepResult {
    pub fn t_star_of(&self, n: usize) -> Option<usize> {
        self.t_star.iter().find(|(m, _)| *m == n).and_then(|(_, t)| *t)
    }
}

/// Seed of the truth formula for `n`.
pub fn sweep_instance_seed(seed_base: u64, n: usize) -> u64 {
    derive_seed(seed_base, &[n as u64, 0])
}

/// Seed of the sample stream of trial `trial` at `n`.
pub fn sweep_trial_seed(seed_base: u64, n: usize, trial: usize) -> u64 {
    derive_seed(seed_base, &[n as u64, 1, trial as u64])
}

/// Per `n`, one truth formula is drawn from the family; each trial draws a single sample
/// stream and evaluates every grid point on its prefix, so success is monotone in `T`
/// within a trial.
pub fn sample_complexity_sweep(cfg: &SweepConfig) -> Result<SweepResult, LearnError> {
    if cfg.t_grid.is_empty() || cfg.t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("t_grid must be nonempty and strictly increasing"));
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(invalid("delta must lie in (0, 1)"));
    }
    let k = cfg.k.unwrap_or_else(|| cfg.family.k());
    let limits = EnumerationLimits::new(cfg.max_vars);
    let mut rows = Vec::new();
    let mut t_star = Vec::new();
    for &n in &cfg.n_values {
        let truth = cfg.family.instantiate(n, sweep_instance_seed(cfg.seed_base, n))?;
        let oracle = TruthOracle::with_limits(&truth, k, limits)?;
        let t_max = *cfg.t_grid.last().expect("nonempty");
        let outcomes: Vec<Vec<bool>> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| -> Result<Vec<bool>, LearnError> {
                let mut rng = Rng::new(sweep_trial_seed(cfg.seed_base, n, trial));
                let mut table = oracle.empty_table();
                let mut out = Vec::with_capacity(cfg.t_grid.len());
                let mut grid = cfg.t_grid.iter().peekable();
                for drawn in 0..=t_max {
                    while grid.next_if(|&&t| t == drawn).is_some() {
                        out.push(oracle.learned_equivalent(&table)?);
                    }
                    if drawn < t_max {
                        let w = oracle.solutions.sample_words(1, &mut rng)?[0];
                        table.observe_word(w);
                    }
                }
                Ok(out)
            })
            .collect::<Result<_, _>>()?;
        let successes: Vec<usize> = (0..cfg.t_grid.len())
            .map(|g| outcomes.iter().filter(|o| o[g]).count())
            .collect();
        let star = (0..cfg.t_grid.len())
            .find(|&g| successes[g] as f64 >= (1.0 - cfg.delta) * cfg.trials as f64);
        t_star.push((n, star.map(|g| cfg.t_grid[g])));
        for (g, &t) in cfg.t_grid.iter().enumerate() {
            rows.push(SweepRow {
                family: cfg.family.name().to_string(),
                n,
                k,
                t,
                trials: cfg.trials,
                successes: successes[g],
                t_star_flag: star == Some(g),
                seed_base: cfg.seed_base,
            });
        }
    }
    Ok(SweepResult { rows, t_star })
}

pub const SWEEP_CSV_HEADER: &str = "family,n,k,T,trials,successes,t_star_flag,seed_base";

pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in &result.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.family, r.n, r.k, r.t, r.trials, r.successes, r.t_star_flag as u8, r.seed_base
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::parse_dimacs;
    use crate::solutions::{enumerate_solutions, equivalent};
    use proptest::prelude::*;

    fn f(text: &str) -> CnfFormula {
        parse_dimacs(text).unwrap()
    }

    fn bits(n: usize, ws: &[u64]) -> Vec<Assignment> {
        ws.iter().map(|&w| Assignment::from_bits(n, w)).collect()
    }

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn colex_order() {
        assert_eq!(
            colex_subsets(4, 2),
            vec![vec![0, 1], vec![0, 2], vec![1, 2], vec![0, 3], vec![1, 3], vec![2, 3]]
        );
        assert_eq!(colex_subsets(5, 3).len(), 10);
        assert_eq!(colex_subsets(3, 3), vec![vec![0, 1, 2]]);
        assert!(colex_subsets(2, 3).is_empty());
    }

    #[test]
    fn learn_examples() {
        // TT, TF, FT with variable 0 in bit 0.
        let learned = valiant_learn(2, 2, &bits(2, &[0b11, 0b01, 0b10])).unwrap();
        assert_eq!(learned.clauses(), &[Clause::from_dimacs(&[1, 2])]);

        let truth = f("p cnf 3 1\n1 2 3 0");
        let all: Vec<Assignment> = enumerate_solutions(&truth, None).unwrap().iter().collect();
        let learned = valiant_learn(3, 3, &all).unwrap();
        assert!(equivalent(&learned, &truth).unwrap());
        assert_eq!(learned.clauses(), truth.clauses());

        let everything = bits(3, &(0..8).collect::<Vec<_>>());
        assert!(valiant_learn(3, 2, &everything).unwrap().is_empty());
        assert_eq!(valiant_learn(5, 2, &[]).unwrap().len(), 4 * binom(5, 2));
    }

    #[test]
    fn wide_patterns_use_multiple_words() {
        let samples = bits(8, &[0, 255, 0b1010_1010]);
        let a = valiant_learn(8, 7, &samples).unwrap();
        let b = valiant_learn_clause_major(8, 7, &samples).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8 * 128 - 3 * 8);
    }

    #[test]
    fn extend_examples() {
        let phi = f("p cnf 3 1\n1 0");
        let ext = extend_short_clauses(&phi, 2).unwrap();
        assert_eq!(
            ext.clauses(),
            &[
                Clause::from_dimacs(&[1, 2]),
                Clause::from_dimacs(&[1, -2]),
                Clause::from_dimacs(&[1, 3]),
                Clause::from_dimacs(&[1, -3]),
            ]
        );
        assert!(equivalent(&phi, &ext).unwrap());
        let same = f("p cnf 3 2\n1 2 0\n-2 3 0");
        assert_eq!(extend_short_clauses(&same, 2).unwrap(), same);
        assert!(extend_short_clauses(&f("p cnf 2 1\n1 0"), 3).is_err());
    }

    #[test]
    fn sample_bound_examples() {
        let b = predicted_sample_bound(&ExactProb::new(1, 7), 3, 3, 0.1).unwrap();
        assert_eq!(b, 54);
        // k ln(2n) − ln δ = 1 with n = 1, k = 1, δ = 2/e.
        let delta = 2.0 / std::f64::consts::E;
        assert_eq!(predicted_sample_bound(&ExactProb::one(), 1, 1, delta).unwrap(), 1);
        let full = predicted_sample_bound(&ExactProb::new(1, 10), 20, 3, 0.05).unwrap();
        let half = predicted_sample_bound(&ExactProb::new(1, 5), 20, 3, 0.05).unwrap();
        assert!(half == full / 2 || half == full.div_ceil(2));
        assert!(predicted_sample_bound(&ExactProb::zero(), 3, 3, 0.1).is_err());
        assert!(predicted_sample_bound(&ExactProb::one(), 3, 3, 1.0).is_err());
    }

    #[test]
    fn trial_examples() {
        let truth = f("p cnf 3 1\n1 2 3 0");
        let r = exact_learning_trial(&truth, 3, 0, 1).unwrap();
        assert!(!r.success);
        assert_eq!(r.learned_clauses, 8);
        let wins = (0..100)
            .filter(|&s| exact_learning_trial(&truth, 3, 200, s).unwrap().success)
            .count();
        assert!(wins >= 99);
        let free = CnfFormula::empty(2);
        assert!(!exact_learning_trial(&free, 2, 0, 0).unwrap().success);
    }

    #[test]
    fn oracle_shortcut_matches_enumeration() {
        let truth = f("p cnf 5 3\n1 -2 0\n3 4 -5 0\n2 5 0");
        let oracle = TruthOracle::new(&truth, 3).unwrap();
        for seed in 0..40 {
            let mut rng = crate::rng::Rng::new(seed);
            let mut table = oracle.empty_table();
            for w in oracle.solutions().sample_words(seed as usize, &mut rng).unwrap() {
                table.observe_word(w);
            }
            let fast = oracle.learned_equivalent(&table).unwrap();
            let slow = equivalent(&truth, &table.to_formula()).unwrap();
            assert_eq!(fast, slow, "seed {seed}");
            match oracle.learned_tv(&table) {
                Ok(tv) => assert_eq!(tv.is_zero(), fast),
                Err(LearnError::Solutions(SolutionError::Unsatisfiable)) => assert!(!fast),
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn oracle_table_matches_observing_every_solution() {
        let truth = f("p cnf 6 3\n1 -2 0\n3 4 -5 0\n2 5 6 0");
        let oracle = TruthOracle::new(&truth, 3).unwrap();
        let mut direct = oracle.empty_table();
        for &w in oracle.solutions().words() {
            direct.observe_word(w);
        }
        assert_eq!(&direct, oracle.table());
    }

    #[test]
    fn wide_truth_falls_back_to_enumeration() {
        let truth = f("p cnf 4 1\n1 2 3 4 0");
        let oracle = TruthOracle::new(&truth, 2).unwrap();
        let mut table = oracle.empty_table();
        for &w in oracle.solutions().words() {
            table.observe_word(w);
        }
        assert!(!oracle.learned_equivalent(&table).unwrap());
    }

    #[test]
    fn sweep_is_monotone_and_reproducible() {
        let mut cfg = SweepConfig::new(FamilySpec::Disjoint { k: 2 }, vec![4, 6], vec![0, 5, 10, 20, 40], 3);
        cfg.trials = 30;
        let a = sample_complexity_sweep(&cfg).unwrap();
        assert_eq!(sweep_csv(&a), sweep_csv(&sample_complexity_sweep(&cfg).unwrap()));
        for rows in a.rows.chunks(5) {
            assert!(rows.windows(2).all(|w| w[0].successes <= w[1].successes));
            assert_eq!(rows.iter().filter(|r| r.t_star_flag).count(), 1);
        }
        assert_eq!(a.rows[0].successes, 0);
        assert!(a.t_star_of(6).is_some());
        assert!(sweep_csv(&a).starts_with("family,n,k,T,trials,successes,t_star_flag,seed_base\ndisjoint,4,2,0,30,0,0,3\n"));
        cfg.t_grid = vec![5, 5];
        assert!(sample_complexity_sweep(&cfg).is_err());
    }

    proptest! {
        #[test]
        fn sample_and_clause_major_agree(n in 2usize..6, k in 1usize..4, ws in prop::collection::vec(any::<u64>(), 0..12)) {
            prop_assume!(k <= n);
            let samples = bits(n, &ws);
            prop_assert_eq!(valiant_learn(n, k, &samples).unwrap(), valiant_learn_clause_major(n, k, &samples).unwrap());
        }

        #[test]
        fn samples_satisfy_output_and_clauses_shrink(n in 2usize..7, k in 1usize..4, ws in prop::collection::vec(any::<u64>(), 0..15), split in 0usize..15) {
            prop_assume!(k <= n);
            let samples = bits(n, &ws);
            let split = split.min(samples.len());
            let full = valiant_learn(n, k, &samples).unwrap();
            let prefix = valiant_learn(n, k, &samples[..split]).unwrap();
            prop_assert!(samples.iter().all(|a| full.satisfied_by(a)));
            prop_assert!(full.clauses().iter().all(|c| prefix.contains_clause(c)));
        }

        #[test]
        fn extension_preserves_solutions(ws in prop::collection::vec(prop::collection::vec((1i64..=6, any::<bool>()), 1..=3), 0..5)) {
            let clauses = ws.iter().map(|c| Clause::from_dimacs(&c.iter().map(|&(x, s)| if s { -x } else { x }).collect::<Vec<_>>())).collect();
            let phi = CnfFormula::new(6, clauses).unwrap();
            let ext = extend_short_clauses(&phi, 3).unwrap();
            prop_assert!(ext.clauses().iter().all(|c| c.is_tautology() || c.len() == 3));
            prop_assert!(equivalent(&phi, &ext).unwrap());
        }
    }
}
