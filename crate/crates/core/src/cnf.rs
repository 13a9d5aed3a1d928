//! CNF data model: literals, canonical clauses, formulas, assignments and pinnings.
//!
//! Variables are 0-based internally and 1-based in DIMACS text.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Variable index in `0..n`.
pub type Var = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CnfError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("variable {var} out of range for n = {n}")]
    VarOutOfRange { var: Var, n: usize },
}

/// A literal `v` or `¬v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Lit {
    pub var: Var,
    pub negated: bool,
}

impl Lit {
    pub fn pos(var: Var) -> Self {
        Lit { var, negated: false }
    }

    pub fn neg(var: Var) -> Self {
        Lit { var, negated: true }
    }

    /// Builds a literal from a nonzero signed 1-based DIMACS integer.
    pub fn from_dimacs(x: i64) -> Option<Self> {
        if x == 0 {
            return None;
        }
        Some(Lit {
            var: (x.unsigned_abs() - 1) as Var,
            negated: x < 0,
        })
    }

    pub fn to_dimacs(self) -> i64 {
        let v = self.var as i64 + 1;
        if self.negated {
            -v
        } else {
            v
        }
    }

    /// Truth value of the literal when its variable takes `value`.
    pub fn eval(self, value: bool) -> bool {
        value != self.negated
    }
}

/// A disjunction of literals in canonical form.
///
/// Literals are sorted by `(var, negated)` with duplicates removed. A clause holding
/// both polarities of some variable is a tautology; it is satisfied by every
/// assignment and has no forbidden pattern.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Clause {
    lits: Vec<Lit>,
    vars: Vec<Var>,
    tautology: bool,
}

impl Clause {
    pub fn new<I: IntoIterator<Item = Lit>>(lits: I) -> Self {
        let mut lits: Vec<Lit> = lits.into_iter().collect();
        lits.sort_unstable();
        lits.dedup();
        let mut vars: Vec<Var> = lits.iter().map(|l| l.var).collect();
        vars.dedup();
        let tautology = vars.len() != lits.len();
        Clause {
            lits,
            vars,
            tautology,
        }
    }

    /// Clause over `vars` whose forbidden assignment is `forbidden`.
    ///
    /// A forbidden value `true` means the literal on that variable is negative.
    pub fn from_forbidden(vars: &[Var], forbidden: &[bool]) -> Self {
        assert_eq!(vars.len(), forbidden.len());
        Clause::new(
            vars.iter()
                .zip(forbidden)
                .map(|(&var, &negated)| Lit { var, negated }),
        )
    }

    /// Clause over `vars` whose forbidden pattern has bit `i` equal to the value of `vars[i]`.
    pub fn from_forbidden_bits(vars: &[Var], bits: u64) -> Self {
        Clause::new(vars.iter().enumerate().map(|(i, &var)| Lit {
            var,
            negated: (bits >> i) & 1 == 1,
        }))
    }

    pub fn from_dimacs(lits: &[i64]) -> Self {
        Clause::new(lits.iter().filter_map(|&x| Lit::from_dimacs(x)))
    }

    pub fn lits(&self) -> &[Lit] {
        &self.lits
    }

    /// Distinct variables, strictly increasing.
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn is_tautology(&self) -> bool {
        self.tautology
    }

    pub fn contains_var(&self, v: Var) -> bool {
        self.vars.binary_search(&v).is_ok()
    }

    /// Forbidden value of `v`, or `None` if `v` is absent or the clause is a tautology.
    pub fn forbidden_value(&self, v: Var) -> Option<bool> {
        if self.tautology {
            return None;
        }
        self.vars
            .binary_search(&v)
            .ok()
            .map(|i| self.lits[i].negated)
    }

    /// Forbidden assignment aligned with `vars()`; `None` for tautologies.
    pub fn forbidden(&self) -> Option<Vec<bool>> {
        if self.tautology {
            None
        } else {
            Some(self.lits.iter().map(|l| l.negated).collect())
        }
    }

    /// Forbidden pattern packed so that bit `i` is the value of `vars()[i]`.
    pub fn forbidden_bits(&self) -> Option<u64> {
        if self.tautology || self.vars.len() > 64 {
            return None;
        }
        Some(
            self.lits
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, l)| acc | ((l.negated as u64) << i)),
        )
    }

    /// `(var_mask, forbidden_mask)` over a packed assignment of at most 64 variables.
    /// The clause is violated by `a` iff `a & var_mask == forbidden_mask`.
    pub(crate) fn masks(&self) -> Option<(u64, u64)> {
        if self.tautology {
            return None;
        }
        let mut var_mask = 0u64;
        let mut forbidden_mask = 0u64;
        for l in &self.lits {
            debug_assert!(l.var < 64);
            var_mask |= 1 << l.var;
            if l.negated {
                forbidden_mask |= 1 << l.var;
            }
        }
        Some((var_mask, forbidden_mask))
    }

    /// True iff `a` does not match the forbidden pattern (always true for tautologies).
    pub fn satisfied_by(&self, a: &Assignment) -> bool {
        self.tautology || self.lits.iter().any(|l| l.eval(a.get(l.var)))
    }

    pub fn status(&self, p: &Pinning) -> ClauseStatus {
        if self.tautology {
            return ClauseStatus::Satisfied;
        }
        let mut free = Vec::new();
        for l in &self.lits {
            match p.get(l.var) {
                Some(value) if l.eval(value) => return ClauseStatus::Satisfied,
                Some(_) => {}
                None => free.push(l.var),
            }
        }
        if free.is_empty() {
            ClauseStatus::Violated
        } else {
            ClauseStatus::Undetermined(free)
        }
    }

    /// True iff some pinned variable satisfies its literal.
    pub fn satisfied_under(&self, p: &Pinning) -> bool {
        matches!(self.status(p), ClauseStatus::Satisfied)
    }

    pub fn to_dimacs(&self) -> String {
        let mut s = String::new();
        for l in &self.lits {
            s.push_str(&l.to_dimacs().to_string());
            s.push(' ');
        }
        s.push('0');
        s
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_dimacs())
    }
}

pub fn clause_satisfied(clause: &Clause, a: &Assignment) -> bool {
    clause.satisfied_by(a)
}

pub fn clause_status(clause: &Clause, p: &Pinning) -> ClauseStatus {
    clause.status(p)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClauseStatus {
    Satisfied,
    Violated,
    /// Unpinned variables of the clause, increasing.
    Undetermined(Vec<Var>),
}

/// Full truth assignment packed 64 variables per word; bit `v` is the value of variable `v`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    n: usize,
    words: Vec<u64>,
}

impl Assignment {
    pub fn all_false(n: usize) -> Self {
        Assignment {
            n,
            words: vec![0; n.div_ceil(64)],
        }
    }

    /// Assignment of `n ≤ 64` variables from packed bits.
    pub fn from_bits(n: usize, bits: u64) -> Self {
        assert!(n <= 64);
        let mut a = Assignment::all_false(n);
        if n > 0 {
            a.words[0] = if n == 64 { bits } else { bits & ((1u64 << n) - 1) };
        }
        a
    }

    pub fn from_bools(values: &[bool]) -> Self {
        let mut a = Assignment::all_false(values.len());
        for (v, &b) in values.iter().enumerate() {
            a.set(v, b);
        }
        a
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, v: Var) -> bool {
        debug_assert!(v < self.n);
        (self.words[v / 64] >> (v % 64)) & 1 == 1
    }

    pub fn set(&mut self, v: Var, value: bool) {
        assert!(v < self.n, "variable {v} out of range for n = {}", self.n);
        let bit = 1u64 << (v % 64);
        if value {
            self.words[v / 64] |= bit;
        } else {
            self.words[v / 64] &= !bit;
        }
    }

    /// Packed bits when `n ≤ 64`.
    pub fn as_bits(&self) -> Option<u64> {
        match self.words.len() {
            0 => Some(0),
            1 => Some(self.words[0]),
            _ => None,
        }
    }

    /// `'1'`/`'0'` per variable, variable 0 first.
    pub fn to_bitstring(&self) -> String {
        (0..self.n)
            .map(|v| if self.get(v) { '1' } else { '0' })
            .collect()
    }

    pub fn from_bitstring(s: &str) -> Option<Self> {
        let values: Option<Vec<bool>> = s
            .chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect();
        values.map(|v| Assignment::from_bools(&v))
    }

    pub fn agrees_with(&self, p: &Pinning) -> bool {
        p.iter().all(|(v, value)| self.get(v) == value)
    }

    /// Restriction of the assignment to `vars`.
    pub fn restrict(&self, vars: impl IntoIterator<Item = Var>) -> Pinning {
        let mut p = Pinning::new();
        for v in vars {
            p.insert(v, self.get(v));
        }
        p
    }
}

/// Partial assignment: a domain Λ and a value for each variable in it.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pinning {
    values: BTreeMap<Var, bool>,
}

impl Pinning {
    pub fn new() -> Self {
        Pinning::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (Var, bool)>>(pairs: I) -> Self {
        Pinning {
            values: pairs.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, v: Var, value: bool) -> Option<bool> {
        self.values.insert(v, value)
    }

    pub fn get(&self, v: Var) -> Option<bool> {
        self.values.get(&v).copied()
    }

    pub fn contains(&self, v: Var) -> bool {
        self.values.contains_key(&v)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Domain variables in increasing order.
    pub fn domain(&self) -> impl Iterator<Item = Var> + '_ {
        self.values.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, bool)> + '_ {
        self.values.iter().map(|(&v, &b)| (v, b))
    }

    /// Union with `other`; `None` if the two disagree on a shared variable.
    pub fn union(&self, other: &Pinning) -> Option<Pinning> {
        let mut out = self.clone();
        for (v, b) in other.iter() {
            if let Some(prev) = out.insert(v, b) {
                if prev != b {
                    return None;
                }
            }
        }
        Some(out)
    }

    pub fn max_var(&self) -> Option<Var> {
        self.values.keys().next_back().copied()
    }

    /// Packed `(domain_mask, value_mask)` when every domain variable is below 64.
    pub(crate) fn masks(&self) -> Option<(u64, u64)> {
        let mut dom = 0u64;
        let mut val = 0u64;
        for (v, b) in self.iter() {
            if v >= 64 {
                return None;
            }
            dom |= 1 << v;
            if b {
                val |= 1 << v;
            }
        }
        Some((dom, val))
    }
}

/// `(k_min, k_max, d_max, s_max)` over the non-tautological clauses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KdsParams {
    pub k_min: usize,
    pub k_max: usize,
    pub d_max: usize,
    pub s_max: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnfFormula {
    n: usize,
    clauses: Vec<Clause>,
    params: KdsParams,
}

impl CnfFormula {
    pub fn new(n: usize, clauses: Vec<Clause>) -> Result<Self, CnfError> {
        for c in &clauses {
            if let Some(&v) = c.vars().last() {
                if v >= n {
                    return Err(CnfError::VarOutOfRange { var: v, n });
                }
            }
        }
        let params = compute_kds(n, &clauses);
        Ok(CnfFormula { n, clauses, params })
    }

    pub fn empty(n: usize) -> Self {
        CnfFormula {
            n,
            clauses: Vec::new(),
            params: KdsParams::default(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn clause(&self, i: usize) -> &Clause {
        &self.clauses[i]
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn params(&self) -> KdsParams {
        self.params
    }

    pub fn satisfied_by(&self, a: &Assignment) -> bool {
        self.clauses.iter().all(|c| c.satisfied_by(a))
    }

    /// For each variable, the indices of clauses containing it (tautologies included).
    pub fn occurrences(&self) -> Vec<Vec<usize>> {
        let mut occ = vec![Vec::new(); self.n];
        for (i, c) in self.clauses.iter().enumerate() {
            for &v in c.vars() {
                occ[v].push(i);
            }
        }
        occ
    }

    /// Number of clauses containing each variable (tautologies included).
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for c in &self.clauses {
            for &v in c.vars() {
                deg[v] += 1;
            }
        }
        deg
    }

    pub fn contains_clause(&self, c: &Clause) -> bool {
        self.clauses.iter().any(|d| d == c)
    }

    /// Formula with the same clause set in a different order.
    pub fn with_clauses(&self, clauses: Vec<Clause>) -> Result<Self, CnfError> {
        CnfFormula::new(self.n, clauses)
    }
}

fn compute_kds(n: usize, clauses: &[Clause]) -> KdsParams {
    let active: Vec<usize> = (0..clauses.len())
        .filter(|&i| !clauses[i].is_tautology())
        .collect();
    if active.is_empty() {
        return KdsParams::default();
    }
    let k_min = active.iter().map(|&i| clauses[i].len()).min().unwrap_or(0);
    let k_max = active.iter().map(|&i| clauses[i].len()).max().unwrap_or(0);
    let mut occ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &i in &active {
        for &v in clauses[i].vars() {
            occ[v].push(i);
        }
    }
    let d_max = occ.iter().map(Vec::len).max().unwrap_or(0);
    let mut s_max = 0;
    let mut shared: HashMap<usize, usize> = HashMap::new();
    for &i in &active {
        shared.clear();
        for &v in clauses[i].vars() {
            for &j in &occ[v] {
                if j > i {
                    *shared.entry(j).or_insert(0) += 1;
                }
            }
        }
        if let Some(&m) = shared.values().max() {
            s_max = s_max.max(m);
        }
    }
    KdsParams {
        k_min,
        k_max,
        d_max,
        s_max,
    }
}

pub fn kds_parameters(formula: &CnfFormula) -> KdsParams {
    formula.params()
}

/// Removes satisfied clauses and deletes pinned variables from the rest.
///
/// The variable count is kept, so pinned variables simply stop occurring. A clause
/// violated by `p` becomes the empty clause.
pub fn simplify(formula: &CnfFormula, p: &Pinning) -> CnfFormula {
    let clauses = formula
        .clauses()
        .iter()
        .filter_map(|c| match c.status(p) {
            ClauseStatus::Satisfied => None,
            ClauseStatus::Violated => Some(Clause::new([])),
            ClauseStatus::Undetermined(_) => {
                Some(Clause::new(c.lits().iter().copied().filter(|l| !p.contains(l.var))))
            }
        })
        .collect();
    CnfFormula::new(formula.num_vars(), clauses).expect("simplify keeps variables in range")
}

pub fn parse_dimacs(text: &str) -> Result<CnfFormula, CnfError> {
    let err = |line: usize, msg: String| CnfError::Parse { line, msg };
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<i64> = Vec::new();
    let mut last_line = 0;
    'lines: for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(err(line_no, "duplicate header".into()));
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
                return Err(err(line_no, format!("malformed header `{line}`")));
            }
            let n = parts[2]
                .parse()
                .map_err(|_| err(line_no, format!("bad variable count `{}`", parts[2])))?;
            let m = parts[3]
                .parse()
                .map_err(|_| err(line_no, format!("bad clause count `{}`", parts[3])))?;
            header = Some((n, m));
            continue;
        }
        let Some((n, _)) = header else {
            return Err(err(line_no, "clause before header".into()));
        };
        for tok in line.split_whitespace() {
            if tok == "%" {
                break 'lines;
            }
            let x: i64 = tok
                .parse()
                .map_err(|_| err(line_no, format!("bad literal `{tok}`")))?;
            if x == 0 {
                clauses.push(Clause::from_dimacs(&current));
                current.clear();
            } else {
                if x.unsigned_abs() as usize > n {
                    return Err(err(
                        line_no,
                        format!("variable {} out of range for n = {n}", x.unsigned_abs()),
                    ));
                }
                current.push(x);
            }
        }
    }
    let Some((n, m)) = header else {
        return Err(err(last_line.max(1), "missing `p cnf` header".into()));
    };
    if !current.is_empty() {
        return Err(err(last_line, "last clause is not terminated by 0".into()));
    }
    if clauses.len() != m {
        return Err(err(
            last_line.max(1),
            format!("header declares {m} clauses, found {}", clauses.len()),
        ));
    }
    CnfFormula::new(n, clauses).map_err(|e| err(last_line, e.to_string()))
}

/// DIMACS text with lines joined by `\n` and no trailing newline.
pub fn write_dimacs(formula: &CnfFormula) -> String {
    let mut out = format!("p cnf {} {}", formula.num_vars(), formula.len());
    for c in formula.clauses() {
        out.push('\n');
        out.push_str(&c.to_dimacs());
    }
    out
}
