//! Exact solution-space engine over packed assignments.
//!
//! Assignments of `n ≤ 64` variables are `u64` words with bit `v` holding variable
//! `v`. Enumeration walks all `2^n` words in fixed-size blocks; each block first
//! drops clauses decided by its high bits, then tests the survivors word by word.
//! Blocks run in parallel and are merged in block order, so every result is
//! independent of the worker count.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use rayon::prelude::*;
use thiserror::Error;

use crate::cnf::{Assignment, Clause, CnfFormula, Pinning, Var};
use crate::exact::ExactProb;
use crate::rng::Rng;

pub const DEFAULT_MAX_VARS: usize = 30;
/// Largest `n` any limit may be raised to.
pub const HARD_MAX_VARS: usize = 40;

const BLOCK_BITS: usize = 14;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolutionError {
    #[error("n = {n} exceeds the enumeration limit {limit}")]
    TooManyVars { n: usize, limit: usize },
    #[error("more than {cap} solutions")]
    CapExceeded { cap: usize },
    #[error("formula is unsatisfiable")]
    Unsatisfiable,
    #[error("conditioning event has probability zero")]
    ZeroMassCondition,
    #[error("variable counts differ: n = {a} vs n = {b}")]
    MismatchedVars { a: usize, b: usize },
    #[error("clause is a tautology and has no forbidden pattern")]
    TautologicalClause,
    #[error("variables must be distinct")]
    SameVariable,
    #[error("variable {var} out of range for n = {n}")]
    VarOutOfRange { var: Var, n: usize },
    #[error("no solution found in {attempts} rejection attempts")]
    RejectionBudget { attempts: u64 },
}

/// Upper bound on `n` for exhaustive enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumerationLimits {
    pub max_vars: usize,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        EnumerationLimits {
            max_vars: DEFAULT_MAX_VARS,
        }
    }
}

impl EnumerationLimits {
    pub fn new(max_vars: usize) -> Self {
        EnumerationLimits {
            max_vars: max_vars.min(HARD_MAX_VARS),
        }
    }

    fn check(&self, n: usize) -> Result<(), SolutionError> {
        if n > self.max_vars.min(HARD_MAX_VARS) {
            Err(SolutionError::TooManyVars {
                n,
                limit: self.max_vars.min(HARD_MAX_VARS),
            })
        } else {
            Ok(())
        }
    }
}

/// Extracts the bits of `word` at positions `vars` into a dense pattern: bit `i` of the
/// result is bit `vars[i]` of `word`.
#[inline]
pub fn project_bits(word: u64, vars: &[Var]) -> u64 {
    vars.iter()
        .enumerate()
        .fold(0u64, |acc, (i, &v)| acc | (((word >> v) & 1) << i))
}

struct Packed {
    n: usize,
    clauses: Vec<(u64, u64)>,
}

impl Packed {
    fn new(formula: &CnfFormula, limits: EnumerationLimits) -> Result<Self, SolutionError> {
        limits.check(formula.num_vars())?;
        Ok(Packed {
            n: formula.num_vars(),
            clauses: formula.clauses().iter().filter_map(Clause::masks).collect(),
        })
    }

    fn blocks(&self) -> (u64, u64) {
        let block_bits = self.n.min(BLOCK_BITS);
        (1u64 << (self.n - block_bits), 1u64 << block_bits)
    }

    /// Calls `visit` on every solution inside block `b`, in increasing order.
    fn scan_block(&self, b: u64, block_len: u64, mut visit: impl FnMut(u64)) {
        let base = b * block_len;
        let low = block_len - 1;
        let mut live = Vec::with_capacity(self.clauses.len());
        for &(m, f) in &self.clauses {
            let (mh, fh) = (m & !low, f & !low);
            if base & mh != fh {
                continue;
            }
            if m & low == 0 {
                return;
            }
            live.push((m & low, f & low));
        }
        for x in 0..block_len {
            if live.iter().all(|&(m, f)| x & m != f) {
                visit(base | x);
            }
        }
    }

    fn fold<A, I, F, M>(&self, identity: I, fold: F, merge: M) -> A
    where
        A: Send,
        I: Fn() -> A + Sync,
        F: Fn(&mut A, u64) + Sync,
        M: Fn(A, A) -> A,
    {
        let (blocks, block_len) = self.blocks();
        let parts: Vec<A> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut acc = identity();
                self.scan_block(b, block_len, |x| fold(&mut acc, x));
                acc
            })
            .collect();
        parts.into_iter().fold(identity(), merge)
    }
}

/// All satisfying assignments, sorted by packed value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolutionSet {
    n: usize,
    words: Vec<u64>,
}

impl SolutionSet {
    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn count(&self) -> u64 {
        self.words.len() as u64
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Packed solutions in increasing order.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> Assignment {
        Assignment::from_bits(self.n, self.words[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = Assignment> + '_ {
        self.words.iter().map(|&w| Assignment::from_bits(self.n, w))
    }

    pub fn contains(&self, a: &Assignment) -> bool {
        a.len() == self.n
            && a.as_bits()
                .is_some_and(|w| self.words.binary_search(&w).is_ok())
    }

    /// Number of solutions agreeing with `p`.
    pub fn count_agreeing(&self, p: &Pinning) -> Result<u64, SolutionError> {
        let (dom, val) = self.pinning_masks(p)?;
        Ok(self.words.iter().filter(|&&w| w & dom == val).count() as u64)
    }

    /// Solutions agreeing with `p`, as a new set.
    pub fn restricted_to(&self, p: &Pinning) -> Result<SolutionSet, SolutionError> {
        let (dom, val) = self.pinning_masks(p)?;
        Ok(SolutionSet {
            n: self.n,
            words: self.words.iter().copied().filter(|&w| w & dom == val).collect(),
        })
    }

    fn pinning_masks(&self, p: &Pinning) -> Result<(u64, u64), SolutionError> {
        if let Some(v) = p.max_var().filter(|&v| v >= self.n) {
            return Err(SolutionError::VarOutOfRange { var: v, n: self.n });
        }
        Ok(p.masks().expect("n ≤ 64"))
    }

    /// `Pr[X agrees with event | X agrees with condition]` for uniform `X` in the set.
    pub fn conditional_prob(
        &self,
        condition: &Pinning,
        event: &Pinning,
    ) -> Result<ExactProb, SolutionError> {
        let (cd, cv) = self.pinning_masks(condition)?;
        let (ed, ev) = self.pinning_masks(event)?;
        let mut total = 0u64;
        let mut hit = 0u64;
        for &w in &self.words {
            if w & cd == cv {
                total += 1;
                if w & ed == ev {
                    hit += 1;
                }
            }
        }
        if total == 0 {
            return Err(SolutionError::ZeroMassCondition);
        }
        Ok(ExactProb::new(hit, total))
    }

    /// Probability that a uniform member matches the forbidden pattern of `c`.
    pub fn forbidden_pattern_prob(&self, c: &Clause) -> Result<ExactProb, SolutionError> {
        if c.is_tautology() {
            return Err(SolutionError::TautologicalClause);
        }
        if self.is_empty() {
            return Err(SolutionError::Unsatisfiable);
        }
        let p = Pinning::from_pairs(
            c.vars()
                .iter()
                .copied()
                .zip(c.forbidden().expect("not a tautology")),
        );
        Ok(ExactProb::new(self.count_agreeing(&p)?, self.count()))
    }

    /// Draws `t` members uniformly and independently by index.
    pub fn sample(&self, t: usize, rng: &mut Rng) -> Result<Vec<Assignment>, SolutionError> {
        Ok(self
            .sample_words(t, rng)?
            .into_iter()
            .map(|w| Assignment::from_bits(self.n, w))
            .collect())
    }

    pub fn sample_words(&self, t: usize, rng: &mut Rng) -> Result<Vec<u64>, SolutionError> {
        if self.is_empty() {
            return Err(SolutionError::Unsatisfiable);
        }
        Ok((0..t)
            .map(|_| self.words[rng.below(self.count()) as usize])
            .collect())
    }
}

/// Per-variable bit columns over the members of a [`SolutionSet`], for counting the
/// patterns a set of variables takes across all solutions.
#[derive(Clone, Debug)]
pub struct PatternCounter {
    total: u64,
    columns: Vec<Vec<u64>>,
}

impl PatternCounter {
    pub fn new(set: &SolutionSet) -> Self {
        let words = set.len().div_ceil(64);
        let mut columns = vec![vec![0u64; words]; set.num_vars()];
        for (i, &w) in set.words().iter().enumerate() {
            let mut rest = w;
            while rest != 0 {
                let v = rest.trailing_zeros() as usize;
                columns[v][i / 64] |= 1 << (i % 64);
                rest &= rest - 1;
            }
        }
        PatternCounter {
            total: set.count(),
            columns,
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Entry `b` is the number of solutions whose values on `vars` form pattern `b`
    /// (bit `i` of `b` is the value of `vars[i]`).
    ///
    /// Counts solutions with all of `T ⊆ vars` true by AND-ing columns, then inverts the
    /// superset sums.
    pub fn pattern_counts(&self, vars: &[Var]) -> Vec<u64> {
        let k = vars.len();
        let mut g = vec![0i64; 1 << k];
        let words = self.columns.first().map_or(0, Vec::len);
        let mut scratch = vec![0u64; words];
        for (mask, slot) in g.iter_mut().enumerate() {
            if mask == 0 {
                *slot = self.total as i64;
                continue;
            }
            scratch.iter_mut().for_each(|x| *x = u64::MAX);
            for (i, &v) in vars.iter().enumerate() {
                if (mask >> i) & 1 == 1 {
                    for (x, c) in scratch.iter_mut().zip(&self.columns[v]) {
                        *x &= c;
                    }
                }
            }
            *slot = scratch.iter().map(|x| x.count_ones() as i64).sum();
        }
        for i in 0..k {
            for mask in 0..1usize << k {
                if (mask >> i) & 1 == 0 {
                    g[mask] -= g[mask | (1 << i)];
                }
            }
        }
        g.into_iter().map(|x| x as u64).collect()
    }
}

pub fn enumerate_solutions(
    formula: &CnfFormula,
    cap: Option<usize>,
) -> Result<SolutionSet, SolutionError> {
    enumerate_solutions_with(formula, cap, EnumerationLimits::default())
}

pub fn enumerate_solutions_with(
    formula: &CnfFormula,
    cap: Option<usize>,
    limits: EnumerationLimits,
) -> Result<SolutionSet, SolutionError> {
    let packed = Packed::new(formula, limits)?;
    let words = packed.fold(
        Vec::new,
        |acc, x| acc.push(x),
        |mut a, b| {
            a.extend(b);
            a
        },
    );
    if let Some(cap) = cap {
        if words.len() > cap {
            return Err(SolutionError::CapExceeded { cap });
        }
    }
    Ok(SolutionSet {
        n: formula.num_vars(),
        words,
    })
}

pub fn count_solutions(formula: &CnfFormula) -> Result<u64, SolutionError> {
    count_solutions_with(formula, EnumerationLimits::default())
}

pub fn count_solutions_with(
    formula: &CnfFormula,
    limits: EnumerationLimits,
) -> Result<u64, SolutionError> {
    let packed = Packed::new(formula, limits)?;
    Ok(packed.fold(|| 0u64, |acc, _| *acc += 1, |a, b| a + b))
}

/// Solution count and, per variable, the number of solutions setting it true.
pub fn marginal_counts(
    formula: &CnfFormula,
    limits: EnumerationLimits,
) -> Result<(u64, Vec<u64>), SolutionError> {
    let packed = Packed::new(formula, limits)?;
    let n = formula.num_vars();
    Ok(packed.fold(
        || (0u64, vec![0u64; n]),
        |acc, x| {
            acc.0 += 1;
            let mut rest = x;
            while rest != 0 {
                acc.1[rest.trailing_zeros() as usize] += 1;
                rest &= rest - 1;
            }
        },
        |mut a, b| {
            a.0 += b.0;
            for (x, y) in a.1.iter_mut().zip(b.1) {
                *x += y;
            }
            a
        },
    ))
}

pub fn sample_uniform(
    formula: &CnfFormula,
    t: usize,
    seed: u64,
) -> Result<Vec<Assignment>, SolutionError> {
    let set = enumerate_solutions(formula, None)?;
    set.sample(t, &mut Rng::new(seed))
}

/// Uniform sampling without enumeration: draw uniform assignments until one satisfies
/// the formula. Exact, but each sample may use up to `max_attempts` draws.
pub fn sample_rejection(
    formula: &CnfFormula,
    t: usize,
    seed: u64,
    max_attempts: u64,
) -> Result<Vec<Assignment>, SolutionError> {
    let mut rng = Rng::new(seed);
    let n = formula.num_vars();
    let mut out = Vec::with_capacity(t);
    for _ in 0..t {
        let mut found = None;
        for _ in 0..max_attempts {
            let mut a = Assignment::all_false(n);
            for v in 0..n {
                a.set(v, rng.coin());
            }
            if formula.satisfied_by(&a) {
                found = Some(a);
                break;
            }
        }
        out.push(found.ok_or(SolutionError::RejectionBudget {
            attempts: max_attempts,
        })?);
    }
    Ok(out)
}

pub fn conditional_prob(
    formula: &CnfFormula,
    condition: &Pinning,
    event: &Pinning,
) -> Result<ExactProb, SolutionError> {
    enumerate_solutions(formula, None)?.conditional_prob(condition, event)
}

pub fn forbidden_pattern_prob(
    formula: &CnfFormula,
    c: &Clause,
) -> Result<ExactProb, SolutionError> {
    if c.is_tautology() {
        return Err(SolutionError::TautologicalClause);
    }
    enumerate_solutions(formula, None)?.forbidden_pattern_prob(c)
}

/// Total variation distance between the uniform distributions on two solution sets.
pub fn tv_between(a: &SolutionSet, b: &SolutionSet) -> Result<ExactProb, SolutionError> {
    if a.num_vars() != b.num_vars() {
        return Err(SolutionError::MismatchedVars {
            a: a.num_vars(),
            b: b.num_vars(),
        });
    }
    if a.is_empty() || b.is_empty() {
        return Err(SolutionError::Unsatisfiable);
    }
    let (x, y) = (a.words(), b.words());
    let (mut i, mut j, mut common) = (0, 0, 0u64);
    while i < x.len() && j < y.len() {
        match x[i].cmp(&y[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let na = BigInt::from(a.count());
    let nb = BigInt::from(b.count());
    let c = BigInt::from(common);
    let shared = BigRational::new(c.clone(), na.clone()) - BigRational::new(c.clone(), nb.clone());
    let only_a = BigRational::new(&na - &c, na);
    let only_b = BigRational::new(&nb - &c, nb);
    let total = shared.abs() + only_a + only_b;
    Ok(ExactProb::from_rational(total / BigInt::from(2)))
}

pub fn tv_distance(a: &CnfFormula, b: &CnfFormula) -> Result<ExactProb, SolutionError> {
    if a.num_vars() != b.num_vars() {
        return Err(SolutionError::MismatchedVars {
            a: a.num_vars(),
            b: b.num_vars(),
        });
    }
    tv_between(&enumerate_solutions(a, None)?, &enumerate_solutions(b, None)?)
}

/// `Σ_{x,y} |P(u=x, v=y) − P(u=x)·P(v=y)|` over uniform members of `set`.
pub fn correlation_dc_in(set: &SolutionSet, u: Var, v: Var) -> Result<ExactProb, SolutionError> {
    if u == v {
        return Err(SolutionError::SameVariable);
    }
    for w in [u, v] {
        if w >= set.num_vars() {
            return Err(SolutionError::VarOutOfRange {
                var: w,
                n: set.num_vars(),
            });
        }
    }
    if set.is_empty() {
        return Err(SolutionError::Unsatisfiable);
    }
    let mut joint = [[0u64; 2]; 2];
    for &w in set.words() {
        joint[((w >> u) & 1) as usize][((w >> v) & 1) as usize] += 1;
    }
    let total = BigInt::from(set.count());
    let mut sum = BigInt::from(0);
    for x in 0..2 {
        for y in 0..2 {
            let pu = BigInt::from(joint[x][0] + joint[x][1]);
            let pv = BigInt::from(joint[0][y] + joint[1][y]);
            let diff = &total * BigInt::from(joint[x][y]) - pu * pv;
            sum += diff.abs();
        }
    }
    Ok(ExactProb::from_rational(BigRational::new(
        sum,
        &total * &total,
    )))
}

pub fn correlation_dc(formula: &CnfFormula, u: Var, v: Var) -> Result<ExactProb, SolutionError> {
    if u == v {
        return Err(SolutionError::SameVariable);
    }
    correlation_dc_in(&enumerate_solutions(formula, None)?, u, v)
}

/// Whether two formulas over the same variables have identical solution sets.
/// Formulas over different variable counts are never equivalent.
pub fn equivalent(a: &CnfFormula, b: &CnfFormula) -> Result<bool, SolutionError> {
    if a.num_vars() != b.num_vars() {
        return Ok(false);
    }
    Ok(enumerate_solutions(a, None)? == enumerate_solutions(b, None)?)
}
