//! Seeded constructors for the formula families used in experiments.
//!
//! Every generator is a pure function of its parameters and seed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{Clause, CnfFormula, Lit, Var};
use crate::rng::Rng;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenError {
    #[error("k = {k} does not divide n = {n}")]
    Indivisible { k: usize, n: usize },
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> GenError {
    GenError::Invalid(msg.into())
}

fn build(n: usize, clauses: Vec<Clause>) -> CnfFormula {
    CnfFormula::new(n, clauses).expect("generator keeps variables in range")
}

/// `n/k` disjoint clauses, one variable from each of `k` groups, all forbidding all-False.
pub fn gen_disjoint_family(k: usize, n: usize, seed: u64) -> Result<CnfFormula, GenError> {
    check_disjoint(k, n)?;
    let mut rng = Rng::new(seed);
    let perms: Vec<Vec<usize>> = (1..k).map(|_| rng.permutation(n / k)).collect();
    disjoint_family_from_permutations(k, n, &perms)
}

fn check_disjoint(k: usize, n: usize) -> Result<(), GenError> {
    if k < 2 {
        return Err(invalid("disjoint family needs k ≥ 2"));
    }
    if n == 0 || !n.is_multiple_of(k) {
        return Err(GenError::Indivisible { k, n });
    }
    Ok(())
}

/// Clause `i` is `{i} ∪ {g·(n/k) + perms[g−1][i] : g = 1..k}`.
pub fn disjoint_family_from_permutations(
    k: usize,
    n: usize,
    perms: &[Vec<usize>],
) -> Result<CnfFormula, GenError> {
    check_disjoint(k, n)?;
    let size = n / k;
    if perms.len() != k - 1 || perms.iter().any(|p| p.len() != size) {
        return Err(invalid("need k − 1 permutations of n/k elements"));
    }
    let clauses = (0..size)
        .map(|i| {
            let mut lits = vec![Lit::pos(i)];
            for (g, p) in perms.iter().enumerate() {
                lits.push(Lit::pos((g + 1) * size + p[i]));
            }
            Clause::new(lits)
        })
        .collect();
    Ok(build(n, clauses))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GadgetSpec {
    pub k: usize,
    pub ell: usize,
    pub restricted: bool,
}

impl GadgetSpec {
    pub fn num_vars(&self) -> usize {
        self.k * self.ell
    }

    /// Index of the variable in layer `layer` (1-based) at position `pos` (1-based).
    pub fn var(&self, layer: usize, pos: usize) -> Var {
        (layer - 1) * self.k + (pos - 1)
    }
}

fn gadget_clauses(spec: &GadgetSpec, offset: Var) -> Vec<Clause> {
    let GadgetSpec { k, ell, restricted } = *spec;
    let mut clauses = Vec::with_capacity(k * ell);
    for layer in 1..ell {
        // odd layers forbid all-True, even layers all-False
        let negated = layer % 2 == 1;
        for j in 1..=k {
            let lits = (1..=k)
                .filter(|&r| r != j)
                .map(|r| spec.var(layer, r))
                .chain([spec.var(layer + 1, j)])
                .map(|v| Lit {
                    var: v + offset,
                    negated,
                });
            clauses.push(Clause::new(lits));
        }
    }
    if restricted {
        clauses.push(Clause::new((1..=k).map(|j| Lit::neg(spec.var(1, j) + offset))));
    }
    clauses
}

pub fn gen_gadget(spec: GadgetSpec) -> Result<CnfFormula, GenError> {
    if spec.k < 2 || spec.ell < 1 {
        return Err(invalid("gadget needs k ≥ 2 and ell ≥ 1"));
    }
    Ok(build(spec.num_vars(), gadget_clauses(&spec, 0)))
}

/// The unique assignment accepted by the unrestricted gadget and rejected by the
/// restricted one: odd layers all-True, even layers all-False.
pub fn gadget_extra_assignment(k: usize, ell: usize) -> Vec<bool> {
    (0..k * ell).map(|v| (v / k).is_multiple_of(2)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardFamilySpec {
    pub k: usize,
    pub ell: usize,
    pub m: usize,
    /// Bit `j` (least significant first) marks block `j` as restricted.
    pub index: u64,
}

impl HardFamilySpec {
    pub fn num_vars(&self) -> usize {
        self.m * self.k * self.ell
    }

    pub fn block_restricted(&self, j: usize) -> bool {
        (self.index >> j) & 1 == 1
    }
}

pub fn gen_hard_family(spec: HardFamilySpec) -> Result<CnfFormula, GenError> {
    if spec.k < 2 || spec.ell < 1 || spec.m < 1 {
        return Err(invalid("hard family needs k ≥ 2, ell ≥ 1, m ≥ 1"));
    }
    if spec.m < 64 && spec.index >> spec.m != 0 {
        return Err(invalid(format!("index {} not below 2^{}", spec.index, spec.m)));
    }
    if spec.m > 64 {
        return Err(invalid("m > 64 not supported"));
    }
    let block = spec.k * spec.ell;
    let mut clauses = Vec::new();
    for j in 0..spec.m {
        let g = GadgetSpec {
            k: spec.k,
            ell: spec.ell,
            restricted: spec.block_restricted(j),
        };
        clauses.extend(gadget_clauses(&g, j * block));
    }
    Ok(build(spec.num_vars(), clauses))
}

/// Number of blocks in which two hard-family indices differ.
pub fn index_distance(i: u64, j: u64) -> u32 {
    (i ^ j).count_ones()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomCnfSpec {
    pub k: usize,
    pub n: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl RandomCnfSpec {
    pub fn num_clauses(&self) -> usize {
        (self.alpha * self.n as f64).floor() as usize
    }
}

/// `floor(alpha·n)` clauses of `k` literals, each literal an independent uniform draw
/// `x < 2n` read as variable `x / 2`, negated iff `x` is odd.
pub fn gen_random_cnf(spec: RandomCnfSpec) -> Result<CnfFormula, GenError> {
    if spec.n == 0 || spec.k == 0 {
        return Err(invalid("random CNF needs n ≥ 1 and k ≥ 1"));
    }
    if !(spec.alpha > 0.0 && spec.alpha.is_finite()) {
        return Err(invalid("alpha must be positive"));
    }
    let mut rng = Rng::new(spec.seed);
    let two_n = 2 * spec.n as u64;
    let clauses = (0..spec.num_clauses())
        .map(|_| {
            Clause::new((0..spec.k).map(|_| {
                let x = rng.below(two_n);
                Lit {
                    var: (x / 2) as Var,
                    negated: x % 2 == 1,
                }
            }))
        })
        .collect();
    Ok(build(spec.n, clauses))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearCnfSpec {
    pub k: usize,
    pub d: usize,
    pub n: usize,
    /// Requested clause count; defaults to `floor(n·d/k)`.
    pub clauses: Option<usize>,
    pub seed: u64,
}

/// Greedy random linear CNF: random `k`-sets with random polarities, rejecting any that
/// would share two variables with an earlier clause or push a degree above `d`. Stops
/// at the requested count or after `50 · requested` rejections.
pub fn gen_linear_cnf_with(spec: LinearCnfSpec) -> Result<CnfFormula, GenError> {
    let LinearCnfSpec { k, d, n, .. } = spec;
    if k < 2 || d < 1 {
        return Err(invalid("linear CNF needs k ≥ 2 and d ≥ 1"));
    }
    if n < k {
        return Err(invalid("linear CNF needs n ≥ k"));
    }
    let requested = spec.clauses.unwrap_or(n * d / k);
    let budget = 50 * requested;
    let mut rng = Rng::new(spec.seed);
    let mut occ: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut clauses: Vec<Clause> = Vec::new();
    let mut rejections = 0;
    while clauses.len() < requested && rejections < budget {
        let mut vars: Vec<Var> = Vec::with_capacity(k);
        while vars.len() < k {
            let v = rng.below_usize(n);
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        vars.sort_unstable();
        let lits: Vec<Lit> = vars
            .iter()
            .map(|&v| Lit {
                var: v,
                negated: rng.coin(),
            })
            .collect();
        let mut shared = vec![0usize; clauses.len()];
        let ok = vars.iter().all(|&v| {
            occ[v].len() < d
                && occ[v].iter().all(|&c| {
                    shared[c] += 1;
                    shared[c] < 2
                })
        });
        if !ok {
            rejections += 1;
            continue;
        }
        for &v in &vars {
            occ[v].push(clauses.len());
        }
        clauses.push(Clause::new(lits));
    }
    Ok(build(n, clauses))
}

pub fn gen_linear_cnf(k: usize, d: usize, n: usize, seed: u64) -> Result<CnfFormula, GenError> {
    gen_linear_cnf_with(LinearCnfSpec {
        k,
        d,
        n,
        clauses: None,
        seed,
    })
}

/// `c1 = v1 ∨ … ∨ vk` and `c2 = v1 ∨ v'2 ∨ … ∨ v'(k−1) ∨ ¬vk` on `2k − 2` variables;
/// the fresh `v'j` are indices `k .. 2k−3`.
pub fn gen_counterexample(k: usize) -> Result<CnfFormula, GenError> {
    if k < 2 {
        return Err(invalid("counterexample needs k ≥ 2"));
    }
    let c1 = Clause::new((0..k).map(Lit::pos));
    let c2 = Clause::new(
        [Lit::pos(0), Lit::neg(k - 1)]
            .into_iter()
            .chain((k..2 * k - 2).map(Lit::pos)),
    );
    Ok(build(2 * k - 2, vec![c1, c2]))
}

/// A family parameterized by the variable count, for sweeps and the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FamilySpec {
    Disjoint {
        k: usize,
    },
    Gadget {
        k: usize,
        restricted: bool,
    },
    Hard {
        k: usize,
        ell: usize,
        /// Fixed block index; drawn from the seed when absent.
        index: Option<u64>,
    },
    Random {
        k: usize,
        alpha: f64,
    },
    Linear {
        k: usize,
        d: usize,
        clauses: Option<usize>,
    },
    Counterexample {
        k: usize,
    },
}

impl FamilySpec {
    pub fn name(&self) -> &'static str {
        match self {
            FamilySpec::Disjoint { .. } => "disjoint",
            FamilySpec::Gadget { .. } => "gadget",
            FamilySpec::Hard { .. } => "hard",
            FamilySpec::Random { .. } => "random",
            FamilySpec::Linear { .. } => "linear",
            FamilySpec::Counterexample { .. } => "counterexample",
        }
    }

    pub fn k(&self) -> usize {
        match *self {
            FamilySpec::Disjoint { k }
            | FamilySpec::Gadget { k, .. }
            | FamilySpec::Hard { k, .. }
            | FamilySpec::Random { k, .. }
            | FamilySpec::Linear { k, .. }
            | FamilySpec::Counterexample { k } => k,
        }
    }

    pub fn instantiate(&self, n: usize, seed: u64) -> Result<CnfFormula, GenError> {
        match *self {
            FamilySpec::Disjoint { k } => gen_disjoint_family(k, n, seed),
            FamilySpec::Gadget { k, restricted } => {
                if k == 0 || !n.is_multiple_of(k) {
                    return Err(GenError::Indivisible { k, n });
                }
                gen_gadget(GadgetSpec {
                    k,
                    ell: n / k,
                    restricted,
                })
            }
            FamilySpec::Hard { k, ell, index } => {
                let block = k * ell;
                if block == 0 || !n.is_multiple_of(block) {
                    return Err(GenError::Indivisible { k: block, n });
                }
                let m = n / block;
                if m > 63 {
                    return Err(invalid("hard family supports at most 63 blocks"));
                }
                let index = index.unwrap_or_else(|| Rng::new(seed).below(1 << m));
                gen_hard_family(HardFamilySpec { k, ell, m, index })
            }
            FamilySpec::Random { k, alpha } => gen_random_cnf(RandomCnfSpec { k, n, alpha, seed }),
            FamilySpec::Linear { k, d, clauses } => gen_linear_cnf_with(LinearCnfSpec {
                k,
                d,
                n,
                clauses,
                seed,
            }),
            FamilySpec::Counterexample { k } => {
                if k < 2 || n != 2 * k - 2 {
                    return Err(invalid(format!("counterexample with k = {k} has n = 2k − 2")));
                }
                gen_counterexample(k)
            }
        }
    }
}
