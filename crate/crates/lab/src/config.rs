//! TOML run configuration.
//!
//! Every key is addressed by its dotted path, so diagnostics read like
//! `chain.gamma: required`. Physical constraints are checked at load time,
//! before any computation.

use std::path::Path;

use toml::{Table, Value};

use vflip_core::hydro::Scheme;
use vflip_core::profile::{FourierSeries, PeriodicField, PotentialProfile};

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    Unpinned,
    /// `nu = 0` is accepted and means the unpinned chain without tension.
    Pinned { nu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Particle,
    MomentMc,
    Ode,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Self::Particle => "particle",
            Self::MomentMc => "moment_mc",
            Self::Ode => "ode",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSection {
    pub sizes: Vec<usize>,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanSection {
    /// Macroscopic times; the chain is observed at `t N^2`.
    pub times: Vec<f64>,
    pub ensemble: usize,
    pub block_l: usize,
    pub cutoff_m: Option<f64>,
    pub engine: Engine,
    /// Ceiling on the expected number of flips over the whole ensemble.
    pub max_events: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeSection {
    pub grid: usize,
    pub dt: f64,
    pub scheme: Scheme,
    pub t_final: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChecksSection {
    /// Bound on weak errors at the largest N, relative to the profile amplitude.
    pub weak_error: f64,
    /// Relative tolerance on the fitted diffusivity.
    pub diffusivity: f64,
    /// Random states per flip rate in `verify-identities`.
    pub identity_states: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub chain: ChainSection,
    pub profile: PotentialProfile,
    pub plan: PlanSection,
    pub pde: PdeSection,
    pub checks: ChecksSection,
    pub seed: u64,
}

/// `beta(q) = 1 / (1 + 0.2 cos 2 pi q)`, `lambda(q) = 0.2 sin 2 pi q`.
pub fn default_profile() -> PotentialProfile {
    PotentialProfile::cosine_temperature(0.2, 0.2).expect("default profile is valid")
}

fn err(path: &str, msg: impl std::fmt::Display) -> LabError {
    LabError::Config(format!("{path}: {msg}"))
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

/// A table together with its dotted path.
#[derive(Clone, Copy)]
struct Node<'a> {
    path: &'a str,
    table: Option<&'a Table>,
}

impl<'a> Node<'a> {
    fn key(&self, k: &str) -> String {
        if self.path.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.path)
        }
    }

    fn get(&self, k: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(k))
    }

    fn only(&self, allowed: &[&str]) -> LabResult<()> {
        if let Some(t) = self.table {
            if let Some(k) = t.keys().find(|k| !allowed.contains(&k.as_str())) {
                return Err(err(&self.key(k), "unknown key"));
            }
        }
        Ok(())
    }

    fn f64_opt(&self, k: &str) -> LabResult<Option<f64>> {
        self.get(k).map(|v| number(&self.key(k), v)).transpose()
    }

    fn f64_req(&self, k: &str) -> LabResult<f64> {
        self.f64_opt(k)?.ok_or_else(|| err(&self.key(k), "required"))
    }

    fn usize_opt(&self, k: &str) -> LabResult<Option<usize>> {
        self.get(k).map(|v| count(&self.key(k), v)).transpose()
    }

    fn str_opt(&self, k: &str) -> LabResult<Option<&'a str>> {
        match self.get(k) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(err(&self.key(k), format_args!("expected a string, found {}", type_name(v)))),
        }
    }
}

fn number(path: &str, v: &Value) -> LabResult<f64> {
    let x = match v {
        Value::Float(x) => *x,
        Value::Integer(i) => *i as f64,
        _ => return Err(err(path, format_args!("expected a number, found {}", type_name(v)))),
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(err(path, "must be finite"))
    }
}

fn count(path: &str, v: &Value) -> LabResult<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        Value::Integer(_) => Err(err(path, "must be nonnegative")),
        _ => Err(err(path, format_args!("expected an integer, found {}", type_name(v)))),
    }
}

fn numbers(path: &str, v: &Value) -> LabResult<Vec<f64>> {
    match v {
        Value::Array(a) => a
            .iter()
            .enumerate()
            .map(|(i, x)| number(&format!("{path}[{i}]"), x))
            .collect(),
        _ => Err(err(path, format_args!("expected an array, found {}", type_name(v)))),
    }
}

fn subtable<'a>(parent: &Node<'a>, k: &str, path: &'a str) -> LabResult<Node<'a>> {
    match parent.get(k) {
        None => Ok(Node { path, table: None }),
        Some(Value::Table(t)) => Ok(Node {
            path,
            table: Some(t),
        }),
        Some(v) => Err(err(path, format_args!("expected a table, found {}", type_name(v)))),
    }
}

fn series(path: &str, v: &Value) -> LabResult<FourierSeries> {
    let t = match v {
        Value::Table(t) => t,
        _ => return Err(err(path, format_args!("expected a table, found {}", type_name(v)))),
    };
    let node = Node {
        path,
        table: Some(t),
    };
    node.only(&["constant", "cos", "sin"])?;
    let list = |k: &str| -> LabResult<Vec<f64>> {
        node.get(k).map(|v| numbers(&node.key(k), v)).transpose().map(Option::unwrap_or_default)
    };
    Ok(FourierSeries {
        constant: node.f64_opt("constant")?.unwrap_or(0.0),
        cos: list("cos")?,
        sin: list("sin")?,
    })
}

/// A field given as a number, `{ series = {..} }`, `{ inverse_series = {..} }`
/// (the reciprocal of a series) or `{ table = [..] }` (samples at `j / M`).
fn field(path: &str, v: &Value) -> LabResult<PeriodicField> {
    let t = match v {
        Value::Table(t) => t,
        Value::Float(_) | Value::Integer(_) => return Ok(PeriodicField::constant(number(path, v)?)),
        _ => return Err(err(path, format_args!("expected a table, found {}", type_name(v)))),
    };
    let node = Node {
        path,
        table: Some(t),
    };
    node.only(&["series", "inverse_series", "table"])?;
    if t.len() != 1 {
        return Err(err(path, "give exactly one of series, inverse_series, table"));
    }
    let (k, inner) = t.iter().next().expect("one entry");
    let key = node.key(k);
    match k.as_str() {
        "series" => Ok(PeriodicField::Series(series(&key, inner)?)),
        "inverse_series" => Ok(PeriodicField::InverseSeries(series(&key, inner)?)),
        _ => {
            let samples = numbers(&key, inner)?;
            PeriodicField::table(&samples).map_err(|e| LabError::at(&key, e))
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> LabResult<Self> {
        let root: Table = text
            .parse()
            .map_err(|e: toml::de::Error| LabError::Config(format!("config: {}", e.message())))?;
        let top = Node {
            path: "",
            table: Some(&root),
        };
        top.only(&["seed", "model", "chain", "profile", "plan", "pde", "checks"])?;

        let seed = match top.get("seed") {
            None => 0,
            Some(v) => count("seed", v)? as u64,
        };

        let m = subtable(&top, "model", "model")?;
        m.only(&["kind", "nu"])?;
        let model = match m.str_opt("kind")?.unwrap_or("unpinned") {
            "unpinned" => {
                if m.get("nu").is_some() {
                    return Err(err("model.nu", "only valid with kind = \"pinned\""));
                }
                ModelKind::Unpinned
            }
            "pinned" => {
                let nu = m.f64_req("nu")?;
                if nu < 0.0 {
                    return Err(LabError::Physics(format!("model.nu: must be nonnegative, got {nu}")));
                }
                ModelKind::Pinned { nu }
            }
            other => return Err(err("model.kind", format_args!("unknown model {other:?}"))),
        };

        let c = subtable(&top, "chain", "chain")?;
        c.only(&["N", "gamma"])?;
        let gamma = c.f64_req("gamma")?;
        if !(gamma > 0.0) {
            return Err(LabError::Physics(format!("chain.gamma: must be positive, got {gamma}")));
        }
        let sizes = match c.get("N") {
            None => vec![32, 64, 128],
            Some(Value::Array(a)) => a
                .iter()
                .enumerate()
                .map(|(i, v)| count(&format!("chain.N[{i}]"), v))
                .collect::<LabResult<Vec<_>>>()?,
            Some(v) => vec![count("chain.N", v)?],
        };
        if sizes.is_empty() {
            return Err(err("chain.N", "needs at least one size"));
        }
        if let Some(i) = sizes.iter().position(|&n| n < 2) {
            return Err(err(&format!("chain.N[{i}]"), "chain needs at least two sites"));
        }

        let p = subtable(&top, "profile", "profile")?;
        p.only(&["beta", "lambda"])?;
        let default = default_profile();
        let beta = p.get("beta").map(|v| field("profile.beta", v)).transpose()?;
        let lambda = p.get("lambda").map(|v| field("profile.lambda", v)).transpose()?;
        let profile = PotentialProfile::new(
            beta.unwrap_or(default.beta),
            lambda.unwrap_or(default.lambda),
        )
        .map_err(|e| {
            let key = match e {
                vflip_core::Error::NonPositiveBeta(_) => "profile.beta",
                _ => "profile.lambda",
            };
            LabError::at(key, e)
        })?;

        let pl = subtable(&top, "plan", "plan")?;
        pl.only(&["times", "ensemble", "block_l", "cutoff_M", "engine", "max_events"])?;
        let times = match pl.get("times") {
            None => vec![0.01, 0.05],
            Some(v) => numbers("plan.times", v)?,
        };
        if times.is_empty() {
            return Err(err("plan.times", "needs at least one time"));
        }
        for (i, w) in times.windows(2).enumerate() {
            if w[1] < w[0] {
                return Err(err(&format!("plan.times[{}]", i + 1), "times must be nondecreasing"));
            }
        }
        if times[0] < 0.0 {
            return Err(err("plan.times[0]", "times must be nonnegative"));
        }
        let ensemble = pl.usize_opt("ensemble")?.unwrap_or(1000);
        if ensemble == 0 {
            return Err(err("plan.ensemble", "must be at least 1"));
        }
        let block_l = pl.usize_opt("block_l")?.unwrap_or(1);
        if let Some(&n) = sizes.iter().find(|&&n| block_l == 0 || n % block_l != 0) {
            return Err(LabError::Physics(format!(
                "plan.block_l: block width {block_l} does not divide N = {n}"
            )));
        }
        let cutoff_m = match pl.get("cutoff_M") {
            None => None,
            Some(Value::String(s)) if s == "inf" => None,
            Some(v) => {
                let m = number("plan.cutoff_M", v)?;
                if !(m > 0.0) {
                    return Err(LabError::Physics(format!("plan.cutoff_M: must be positive, got {m}")));
                }
                Some(m)
            }
        };
        let engine = match pl.str_opt("engine")?.unwrap_or("particle") {
            "particle" => Engine::Particle,
            "moment_mc" => Engine::MomentMc,
            "ode" => Engine::Ode,
            other => return Err(err("plan.engine", format_args!("unknown engine {other:?}"))),
        };
        let max_events = pl.f64_opt("max_events")?.unwrap_or(1e10);
        if !(max_events > 0.0) {
            return Err(err("plan.max_events", "must be positive"));
        }

        let d = subtable(&top, "pde", "pde")?;
        d.only(&["grid", "dt", "scheme", "t_final"])?;
        let grid = d.usize_opt("grid")?.unwrap_or(512);
        if grid < 3 {
            return Err(err("pde.grid", "needs at least three points"));
        }
        let dt = d.f64_opt("dt")?.unwrap_or(1e-5);
        if !(dt > 0.0) {
            return Err(err("pde.dt", "must be positive"));
        }
        let scheme = match d.str_opt("scheme")?.unwrap_or("semi_implicit") {
            "semi_implicit" => Scheme::SemiImplicit,
            "explicit" => Scheme::Explicit,
            other => return Err(err("pde.scheme", format_args!("unknown scheme {other:?}"))),
        };
        let t_final = d.f64_opt("t_final")?.unwrap_or(*times.last().expect("nonempty"));
        if t_final < 0.0 {
            return Err(err("pde.t_final", "must be nonnegative"));
        }

        let k = subtable(&top, "checks", "checks")?;
        k.only(&["weak_error", "diffusivity", "identity_states"])?;
        let checks = ChecksSection {
            weak_error: k.f64_opt("weak_error")?.unwrap_or(0.05),
            diffusivity: k.f64_opt("diffusivity")?.unwrap_or(0.15),
            identity_states: k.usize_opt("identity_states")?.unwrap_or(10_000),
        };

        Ok(Self {
            model,
            chain: ChainSection { sizes, gamma },
            profile,
            plan: PlanSection {
                times,
                ensemble,
                block_l,
                cutoff_m,
                engine,
                max_events,
            },
            pde: PdeSection {
                grid,
                dt,
                scheme,
                t_final,
            },
            checks,
            seed,
        })
    }
}
