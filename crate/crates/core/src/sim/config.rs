//! TOML scenario files.
//!
//! ```toml
//! [defaults]
//! nsim = 2000
//! B = 2000
//! seed = 20240101
//! methods = ["GT", "Z-score"]
//!
//! [[scenario]]
//! id = "n16"
//! n = 16
//! m_list = [5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20]
//! mu = -0.58
//! sigma_w = 1.31
//! sigma_b = 1.15
//! rho0 = 2.1
//! alpha = 0.05
//!
//! [[scenario]]
//! id = "balanced"
//! n = 20
//! m = 10
//! rho = 3.0
//! var_frac = [0.2, 0.4, 0.8]
//! ratio = ["1:3", "1:1", "3:1"]
//! rho0 = 3.0
//! ```
//!
//! A scenario gives either `mu`/`sigma_w`/`sigma_b` or `rho`/`var_frac`/`ratio`.
//! Array-valued `var_frac` or `ratio` expand into one scenario per cell
//! (fraction outer, ratio inner); cell `k` uses `seed + k`. Keys in
//! `[defaults]` apply to every scenario unless the scenario sets them or
//! uses the other spelling (`m` vs `m_list`, direct vs cell parameters).
//! Every invalid field is reported, not just the first.

use std::path::Path;
use std::str::FromStr;

use toml::{Table, Value};

use super::{BalancedCell, MSpec, Scenario};
use crate::data::{Hypothesis, LmmParams, Method};
use crate::error::{Error, Result};
use crate::ztest::NullVariance;

const KEYS: &[&str] = &[
    "id", "table", "n", "m", "m_list", "mu", "sigma_w", "sigma_b", "rho", "var_frac", "ratio", "rho0", "alpha",
    "nsim", "B", "seed", "methods", "null_variance",
];

/// Alternative spellings of the same setting; a scenario's choice hides the
/// other one inherited from `[defaults]`.
const EXCLUSIVE: [(&[&str], &[&str]); 2] = [
    (&["m"], &["m_list"]),
    (&["mu", "sigma_w", "sigma_b"], &["rho", "var_frac", "ratio"]),
];

const DEFAULT_NSIM: usize = 2_000;
const DEFAULT_B: usize = 2_000;
const DEFAULT_SEED: u64 = 1;
const DEFAULT_ALPHA: f64 = 0.05;

pub fn load_config(path: &Path) -> Result<Vec<Scenario>> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<Vec<Scenario>> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        let (line, column) = e
            .span()
            .map(|s| line_col(text, s.start))
            .unwrap_or((0, 0));
        Error::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let mut errs = Vec::new();
    for key in root.keys() {
        if key != "scenario" && key != "defaults" {
            errs.push(format!("unknown top-level key `{key}`"));
        }
    }
    let defaults = match root.get("defaults") {
        None => Table::new(),
        Some(Value::Table(t)) => t.clone(),
        Some(_) => {
            errs.push("`defaults` must be a table".into());
            Table::new()
        }
    };
    check_keys("defaults", &defaults, &mut errs);
    let blocks = match root.get("scenario") {
        Some(Value::Array(a)) => a.clone(),
        Some(_) => {
            errs.push("`scenario` must be an array of tables ([[scenario]])".into());
            Vec::new()
        }
        None => {
            errs.push("no [[scenario]] blocks".into());
            Vec::new()
        }
    };
    let mut out = Vec::new();
    for (i, block) in blocks.iter().enumerate() {
        let Value::Table(own) = block else {
            errs.push(format!("scenario[{i}] must be a table"));
            continue;
        };
        let loc = format!("scenario[{i}]");
        check_keys(&loc, own, &mut errs);
        let mut merged = defaults.clone();
        for (a, b) in EXCLUSIVE {
            for (mine, theirs) in [(a, b), (b, a)] {
                if mine.iter().any(|k| own.contains_key(*k)) {
                    for k in theirs.iter() {
                        merged.remove(*k);
                    }
                }
            }
        }
        for (k, v) in own {
            merged.insert(k.clone(), v.clone());
        }
        let mut f = Fields { loc, t: &merged, errs: &mut errs };
        if let Some(mut scs) = f.scenarios(i) {
            out.append(&mut scs);
        }
    }
    let mut seen = std::collections::HashSet::new();
    for sc in &out {
        if !seen.insert(sc.id.clone()) {
            errs.push(format!("duplicate scenario id `{}`", sc.id));
        }
    }
    if errs.is_empty() {
        Ok(out)
    } else {
        Err(Error::Config(errs))
    }
}

fn line_col(text: &str, offset: usize) -> (u64, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() as u64 + 1;
    let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, column)
}

fn check_keys(loc: &str, t: &Table, errs: &mut Vec<String>) {
    for key in t.keys() {
        if !KEYS.contains(&key.as_str()) {
            errs.push(format!("{loc}: unknown key `{key}`"));
        }
    }
}

struct Fields<'a> {
    loc: String,
    t: &'a Table,
    errs: &'a mut Vec<String>,
}

impl Fields<'_> {
    fn err(&mut self, key: &str, msg: impl std::fmt::Display) {
        self.errs.push(format!("{}.{key}: {msg}", self.loc));
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        match self.t.get(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.err(key, format!("expected a number, found {}", other.type_str()));
                None
            }
        }
    }

    fn count(&mut self, key: &str) -> Option<usize> {
        match self.t.get(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            Value::Integer(_) => {
                self.err(key, "must be non-negative");
                None
            }
            other => {
                self.err(key, format!("expected an integer, found {}", other.type_str()));
                None
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.t.get(key)? {
            Value::String(s) => Some(s.clone()),
            other => {
                self.err(key, format!("expected a string, found {}", other.type_str()));
                None
            }
        }
    }

    fn list<T>(&mut self, key: &str, mut item: impl FnMut(&Value) -> std::result::Result<T, String>) -> Option<Vec<T>> {
        let v = self.t.get(key)?;
        let items = match v {
            Value::Array(a) => a.clone(),
            scalar => vec![scalar.clone()],
        };
        let mut out = Vec::new();
        for (j, it) in items.iter().enumerate() {
            match item(it) {
                Ok(x) => out.push(x),
                Err(e) => self.err(&format!("{key}[{j}]"), e),
            }
        }
        if out.is_empty() && items.is_empty() {
            self.err(key, "must not be empty");
        }
        (out.len() == items.len() && !out.is_empty()).then_some(out)
    }

    fn positive(&mut self, key: &str) -> Option<f64> {
        let x = self.float(key)?;
        if x > 0.0 && x.is_finite() {
            Some(x)
        } else {
            self.err(key, "must be positive and finite");
            None
        }
    }

    fn scenarios(&mut self, index: usize) -> Option<Vec<Scenario>> {
        let id = self.string("id").unwrap_or_else(|| format!("scenario{}", index + 1));
        let table = self.string("table").unwrap_or_else(|| id.clone());
        let n = self.count("n");
        if self.t.get("n").is_none() {
            self.err("n", "is required");
        }
        let n = n.filter(|&n| {
            let ok = n >= 2;
            if !ok {
                self.errs.push(format!("{}.n: must be at least 2", self.loc));
            }
            ok
        });
        let m = match (self.t.contains_key("m"), self.t.contains_key("m_list")) {
            (true, true) => {
                self.err("m", "give either m or m_list, not both");
                None
            }
            (false, false) => {
                self.err("m", "one of m or m_list is required");
                None
            }
            (true, false) => match self.count("m") {
                Some(0) => {
                    self.err("m", "must be positive");
                    None
                }
                other => other.map(MSpec::Constant),
            },
            (false, true) => self
                .list("m_list", |v| match v {
                    Value::Integer(i) if *i >= 1 => Ok(*i as usize),
                    _ => Err("expected a positive integer".into()),
                })
                .map(MSpec::List),
        };
        if let (Some(n), Some(MSpec::List(list))) = (n, &m) {
            if list.len() != n {
                self.err("m_list", format!("has {} entries but n = {n}", list.len()));
            }
        }
        if let Some(m) = &m {
            if m.sizes(n.unwrap_or(2)).iter().all(|&x| x <= 1) {
                self.err("m", "at least one group needs two or more observations");
            }
        }

        let rho0 = self.positive("rho0");
        if !self.t.contains_key("rho0") {
            self.err("rho0", "is required");
        }
        let alpha = self.float("alpha").unwrap_or(DEFAULT_ALPHA);
        let alpha = if alpha > 0.0 && alpha < 1.0 {
            Some(alpha)
        } else {
            self.err("alpha", "must be in (0, 1)");
            None
        };
        let hyp = rho0.zip(alpha).and_then(|(r, a)| Hypothesis::new(r, a).ok());
        let nsim = self.count("nsim").unwrap_or(DEFAULT_NSIM);
        if nsim == 0 {
            self.err("nsim", "must be at least 1");
        }
        let b = self.count("B").unwrap_or(DEFAULT_B);
        let seed = match self.t.get("seed") {
            None => Some(DEFAULT_SEED),
            Some(Value::Integer(i)) => Some(*i as u64),
            Some(other) => {
                let ty = other.type_str();
                self.err("seed", format!("expected an integer, found {ty}"));
                None
            }
        };
        let methods = if self.t.contains_key("methods") {
            self.list("methods", |v| match v {
                Value::String(s) => Method::from_str(s).map_err(|e| e.to_string()),
                _ => Err("expected a method name".into()),
            })
        } else {
            Some(Method::ALL.to_vec())
        };
        if methods.as_deref().unwrap_or(&Method::ALL).iter().any(|m| m.is_generalized()) && b < 100 {
            self.err("B", "must be at least 100");
        }
        let null_variance = match self.string("null_variance") {
            None => Some(NullVariance::default()),
            Some(s) => match NullVariance::from_str(&s) {
                Ok(v) => Some(v),
                Err(e) => {
                    self.err("null_variance", e);
                    None
                }
            },
        };

        let direct = ["mu", "sigma_w", "sigma_b"].iter().any(|k| self.t.contains_key(*k));
        let cells = ["rho", "var_frac", "ratio"].iter().any(|k| self.t.contains_key(*k));
        let designs: Option<Vec<(LmmParams, Option<BalancedCell>)>> = match (direct, cells) {
            (true, true) => {
                self.err("mu", "give either mu/sigma_w/sigma_b or rho/var_frac/ratio");
                None
            }
            (false, false) => {
                self.err("mu", "true parameters are required (mu/sigma_w/sigma_b or rho/var_frac/ratio)");
                None
            }
            (true, false) => self.direct_params().map(|p| vec![(p, None)]),
            (false, true) => self.cell_params(),
        };

        let (n, m, hyp, seed, methods, null_variance, designs) =
            (n?, m?, hyp?, seed?, methods?, null_variance?, designs?);
        let expand = designs.len() > 1;
        Some(
            designs
                .into_iter()
                .enumerate()
                .map(|(k, (params, cell))| Scenario {
                    id: match (expand, &cell) {
                        (true, Some(c)) => format!("{id}-f{}-r{}", c.var_frac, c.ratio_label()),
                        _ => id.clone(),
                    },
                    table: table.clone(),
                    n,
                    m: m.clone(),
                    params,
                    hyp,
                    nsim,
                    b,
                    seed: seed.wrapping_add(k as u64),
                    methods: methods.clone(),
                    null_variance,
                    cell,
                })
                .collect(),
        )
    }

    fn direct_params(&mut self) -> Option<LmmParams> {
        let mut missing = false;
        for key in ["mu", "sigma_w", "sigma_b"] {
            if !self.t.contains_key(key) {
                self.err(key, "is required alongside the other direct parameters");
                missing = true;
            }
        }
        let mu = self.float("mu");
        let sw = self.float("sigma_w");
        let sb = self.float("sigma_b");
        if missing {
            return None;
        }
        let (mu, sw, sb) = (mu?, sw?, sb?);
        if sw < 0.0 {
            self.err("sigma_w", "must be non-negative");
        }
        if sb < 0.0 {
            self.err("sigma_b", "must be non-negative");
        }
        if sw < 0.0 || sb < 0.0 {
            return None;
        }
        match LmmParams::from_sd(mu, sw, sb) {
            Ok(p) => Some(p),
            Err(e) => {
                self.err("mu", e);
                None
            }
        }
    }

    fn cell_params(&mut self) -> Option<Vec<(LmmParams, Option<BalancedCell>)>> {
        let mut missing = false;
        for key in ["rho", "var_frac", "ratio"] {
            if !self.t.contains_key(key) {
                self.err(key, "is required alongside the other cell parameters");
                missing = true;
            }
        }
        let rho = self.positive("rho");
        let fracs = self.list("var_frac", |v| match v {
            Value::Float(x) if (0.0..=1.0).contains(x) => Ok(*x),
            Value::Integer(i) if (0..=1).contains(i) => Ok(*i as f64),
            _ => Err("expected a number in [0, 1]".into()),
        });
        let ratios = self.list("ratio", parse_ratio);
        if missing {
            return None;
        }
        let (rho, fracs, ratios) = (rho?, fracs?, ratios?);
        let mut out = Vec::new();
        for &var_frac in &fracs {
            for &ratio in &ratios {
                let cell = BalancedCell { var_frac, ratio };
                match cell.params(rho) {
                    Ok(p) => out.push((p, Some(cell))),
                    Err(e) => {
                        self.err("var_frac", e);
                        return None;
                    }
                }
            }
        }
        Some(out)
    }
}

/// `σ_w²:σ_b²` as a positive number or an `"a:b"` string.
fn parse_ratio(v: &Value) -> std::result::Result<f64, String> {
    let r = match v {
        Value::Float(x) => *x,
        Value::Integer(i) => *i as f64,
        Value::String(s) => {
            let (a, b) = s.split_once(':').ok_or_else(|| format!("`{s}` is not of the form a:b"))?;
            let a: f64 = a.trim().parse().map_err(|_| format!("`{s}` is not of the form a:b"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("`{s}` is not of the form a:b"))?;
            a / b
        }
        _ => return Err("expected a number or an \"a:b\" string".into()),
    };
    if r > 0.0 && r.is_finite() {
        Ok(r)
    } else {
        Err("ratio must be positive and finite".into())
    }
}
