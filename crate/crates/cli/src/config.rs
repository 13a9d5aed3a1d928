//! Schema checks for JSON experiment configs, reporting every problem with its JSON path.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use cnflab::generators::FamilySpec;
use cnflab::learner::SweepConfig;
use cnflab::reveal::{RevealParams, RevealTask};
use cnflab::solutions::{DEFAULT_MAX_VARS, HARD_MAX_VARS};
use cnflab::structure::PropertyParams;
use cnflab::Clause;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub msg: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.msg)
    }
}

#[derive(Default)]
struct Checker {
    errors: Vec<ConfigError>,
}

impl Checker {
    fn err(&mut self, path: &str, msg: impl Into<String>) {
        self.errors.push(ConfigError {
            path: path.to_string(),
            msg: msg.into(),
        });
    }

    fn object<'a>(&mut self, v: &'a Value, path: &str, allowed: &[&str]) -> Option<&'a Map<String, Value>> {
        let Some(obj) = v.as_object() else {
            self.err(path, "expected an object");
            return None;
        };
        for key in obj.keys() {
            if !allowed.contains(&key.as_str()) {
                self.err(&format!("{path}.{key}"), "unknown key");
            }
        }
        Some(obj)
    }

    fn uint(&mut self, obj: &Map<String, Value>, path: &str, key: &str, required: bool) -> Option<u64> {
        let p = format!("{path}.{key}");
        match obj.get(key) {
            None if required => {
                self.err(&p, "missing required key");
                None
            }
            None => None,
            Some(v) => {
                let out = v.as_u64();
                if out.is_none() {
                    self.err(&p, "expected a non-negative integer");
                }
                out
            }
        }
    }

    fn uint_list(&mut self, obj: &Map<String, Value>, path: &str, key: &str, min: u64) -> Option<Vec<u64>> {
        let p = format!("{path}.{key}");
        let Some(v) = obj.get(key) else {
            self.err(&p, "missing required key");
            return None;
        };
        let Some(items) = v.as_array() else {
            self.err(&p, "expected an array");
            return None;
        };
        if items.is_empty() {
            self.err(&p, "must not be empty");
        }
        let mut out = Vec::new();
        for (i, item) in items.iter().enumerate() {
            match item.as_u64() {
                Some(x) if x >= min => out.push(x),
                _ => self.err(&format!("{p}[{i}]"), format!("expected an integer ≥ {min}")),
            }
        }
        (out.len() == items.len()).then_some(out)
    }

    fn unit_interval(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        let p = format!("{path}.{key}");
        let v = obj.get(key)?;
        match v.as_f64() {
            Some(x) if x > 0.0 && x < 1.0 => Some(x),
            _ => {
                self.err(&p, "expected a number in (0, 1)");
                None
            }
        }
    }

    fn max_vars(&mut self, obj: &Map<String, Value>, path: &str) -> Option<usize> {
        let m = self.uint(obj, path, "max_vars", false)?;
        if m as usize > HARD_MAX_VARS {
            self.err(&format!("{path}.max_vars"), format!("at most {HARD_MAX_VARS}"));
        }
        Some(m as usize)
    }

    fn typed<T: for<'de> Deserialize<'de>>(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<T> {
        let p = format!("{path}.{key}");
        let Some(v) = obj.get(key) else {
            self.err(&p, "missing required key");
            return None;
        };
        match T::deserialize(v) {
            Ok(x) => Some(x),
            Err(e) => {
                self.err(&p, e.to_string());
                None
            }
        }
    }

    fn finish<T>(self, value: Option<T>) -> Result<T, Vec<ConfigError>> {
        match value {
            Some(v) if self.errors.is_empty() => Ok(v),
            _ => Err(self.errors),
        }
    }
}

/// Sweep config file: the sweep parameters plus optional parallelism and CSV path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepFile {
    pub sweep: SweepConfig,
    pub jobs: Option<usize>,
    pub out: Option<String>,
}

const SWEEP_KEYS: &[&str] = &[
    "family", "n_values", "t_grid", "trials", "delta", "seed_base", "k", "max_vars", "jobs", "out",
];

pub fn validate_config(json: &Value) -> Result<SweepFile, Vec<ConfigError>> {
    let mut c = Checker::default();
    let Some(obj) = c.object(json, "$", SWEEP_KEYS) else {
        return Err(c.errors);
    };
    let family: Option<FamilySpec> = c.typed(obj, "$", "family");
    let n_values = c.uint_list(obj, "$", "n_values", 1);
    let t_grid = c.uint_list(obj, "$", "t_grid", 0);
    if let Some(grid) = &t_grid {
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            c.err("$.t_grid", "must be strictly increasing");
        }
    }
    let trials = c.uint(obj, "$", "trials", false);
    if trials == Some(0) {
        c.err("$.trials", "must be positive");
    }
    let delta = c.unit_interval(obj, "$", "delta");
    let seed_base = c.uint(obj, "$", "seed_base", true);
    let k = c.uint(obj, "$", "k", false);
    let max_vars = c.max_vars(obj, "$");
    let jobs = c.uint(obj, "$", "jobs", false);
    if jobs == Some(0) {
        c.err("$.jobs", "must be positive");
    }
    let out = match obj.get("out") {
        None => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            c.err("$.out", "expected a string path");
            None
        }
    };
    let built = (|| {
        let mut sweep = SweepConfig::new(
            family?,
            n_values?.into_iter().map(|n| n as usize).collect(),
            t_grid?.into_iter().map(|t| t as usize).collect(),
            seed_base?,
        );
        sweep.trials = trials.map_or(sweep.trials, |t| t as usize);
        sweep.delta = delta.unwrap_or(sweep.delta);
        sweep.k = k.map(|k| k as usize);
        sweep.max_vars = max_vars.unwrap_or(DEFAULT_MAX_VARS);
        Some(SweepFile {
            sweep,
            jobs: jobs.map(|j| j as usize),
            out,
        })
    })();
    c.finish(built)
}

/// `reveal-sim` config: the candidate clause in DIMACS literals, the chain-rule position
/// (0-based, over the clause's variables in increasing order), and the parameters.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RevealSimConfig {
    pub clause: Vec<i64>,
    pub position: usize,
    pub trials: u64,
    pub seed: u64,
    pub params: RevealParams,
    pub keep_traces: usize,
    pub max_vars: usize,
}

impl RevealSimConfig {
    pub fn task(&self) -> Result<RevealTask, String> {
        RevealTask::from_clause(&Clause::from_dimacs(&self.clause), self.position).map_err(|e| e.to_string())
    }
}

const REVEAL_KEYS: &[&str] = &["clause", "position", "trials", "seed", "params", "keep_traces", "max_vars"];

pub fn validate_reveal_config(json: &Value) -> Result<RevealSimConfig, Vec<ConfigError>> {
    let mut c = Checker::default();
    let Some(obj) = c.object(json, "$", REVEAL_KEYS) else {
        return Err(c.errors);
    };
    let clause: Option<Vec<i64>> = c.typed(obj, "$", "clause");
    if let Some(lits) = &clause {
        if lits.is_empty() || lits.contains(&0) {
            c.err("$.clause", "expected nonzero DIMACS literals");
        }
    }
    let position = c.uint(obj, "$", "position", true);
    let trials = c.uint(obj, "$", "trials", true);
    let seed = c.uint(obj, "$", "seed", true);
    let params: Option<RevealParams> = c.typed(obj, "$", "params");
    let keep_traces = c.uint(obj, "$", "keep_traces", false);
    let max_vars = c.max_vars(obj, "$");
    let built = (|| {
        Some(RevealSimConfig {
            clause: clause?,
            position: position? as usize,
            trials: trials?,
            seed: seed?,
            params: params?,
            keep_traces: keep_traces.unwrap_or(3) as usize,
            max_vars: max_vars.unwrap_or(DEFAULT_MAX_VARS),
        })
    })();
    c.finish(built)
}

const PARAM_KEYS: &[&str] = &["k", "alpha", "p_hd", "eps_bd", "eta", "rho", "zeta", "beta"];

/// Applies a partial override object to a property-parameter preset.
pub fn apply_param_overrides(base: PropertyParams, json: &Value) -> Result<PropertyParams, Vec<ConfigError>> {
    let mut c = Checker::default();
    let Some(obj) = c.object(json, "$", PARAM_KEYS) else {
        return Err(c.errors);
    };
    let mut merged = serde_json::to_value(base).expect("parameters serialize");
    for (key, v) in obj {
        if PARAM_KEYS.contains(&key.as_str()) {
            merged[key] = v.clone();
        }
    }
    let parsed = match PropertyParams::deserialize(&merged) {
        Ok(p) => Some(p),
        Err(e) => {
            c.err("$", e.to_string());
            None
        }
    };
    c.finish(parsed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn minimal() -> Value {
        json!({
            "family": {"kind": "disjoint", "k": 2},
            "n_values": [8, 16],
            "t_grid": [0, 4, 8],
            "seed_base": 7
        })
    }

    fn paths(errors: &[ConfigError]) -> Vec<&str> {
        errors.iter().map(|e| e.path.as_str()).collect()
    }

    #[test]
    fn minimal_sweep_config_is_accepted() {
        let cfg = validate_config(&minimal()).unwrap();
        assert_eq!(cfg.sweep.seed_base, 7);
        assert_eq!(cfg.sweep.trials, 200);
        assert_eq!(cfg.sweep.delta, 0.1);
        assert_eq!(cfg.sweep.family, FamilySpec::Disjoint { k: 2 });
        assert_eq!(cfg.jobs, None);
    }

    #[test]
    fn negative_grid_entry_is_located() {
        let mut v = minimal();
        v["t_grid"] = json!([0, -3, 8]);
        assert_eq!(paths(&validate_config(&v).unwrap_err()), vec!["$.t_grid[1]"]);
    }

    #[test]
    fn missing_seed_base_is_rejected() {
        let mut v = minimal();
        v.as_object_mut().unwrap().remove("seed_base");
        assert_eq!(paths(&validate_config(&v).unwrap_err()), vec!["$.seed_base"]);
    }

    #[test]
    fn unknown_keys_and_multiple_errors_are_all_listed() {
        let mut v = minimal();
        v["colour"] = json!("red");
        v["delta"] = json!(1.5);
        v["family"] = json!({"kind": "disjoint"});
        let errs = validate_config(&v).unwrap_err();
        let mut p = paths(&errs);
        p.sort_unstable();
        assert_eq!(p, vec!["$.colour", "$.delta", "$.family"]);
    }

    #[test]
    fn reveal_config_round_trip() {
        let v = json!({
            "clause": [1, -4, 7],
            "position": 1,
            "trials": 10,
            "seed": 3,
            "params": {"k": 3, "alpha": 1.0, "p_hd": 100.0, "eps_bd": 0.5, "zeta": 0.5}
        });
        let cfg = validate_reveal_config(&v).unwrap();
        let task = cfg.task().unwrap();
        assert_eq!((task.target, task.target_value), (3, true));
        assert_eq!(task.prefix, vec![(0, false)]);
        let mut bad = v.clone();
        bad["params"]["zeta"] = json!("x");
        assert_eq!(paths(&validate_reveal_config(&bad).unwrap_err()), vec!["$.params"]);
    }

    #[test]
    fn overrides_replace_only_given_fields() {
        let base = PropertyParams::asymptotic(5, 1.0);
        let p = apply_param_overrides(base, &json!({"zeta": 0.25})).unwrap();
        assert_eq!(p.zeta, 0.25);
        assert_eq!(p.p_hd, base.p_hd);
        assert_eq!(paths(&apply_param_overrides(base, &json!({"gamma": 1})).unwrap_err()), vec!["$.gamma"]);
    }
}
