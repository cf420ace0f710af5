//! Registered scenarios: each one builds a structure and rule from a small
//! typed parameter set, runs replicas, and produces a summary.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;

use rand::{Rng, SeedableRng};
use serde::Serialize;
use serde_json::json;

use super::config::config_hash;
use crate::error::{invalid, Error, Result};
use crate::field::{
    find_stationary_points, psi_matrix, single_source_jacobian, stationary_sigma, StationaryPoint,
};
use crate::numerics::{eigenvalues, SmallMatrix};
use crate::rules::{FixedPointSet, TypeRule};
use crate::sim::{
    monte_carlo_with, spread, wilson_interval, Colors, MonteCarloSummary, Replica, SimConfig,
    SimRng, SnapshotSchedule, Trajectory,
};
use crate::structure::{make_a_theta, CommunityStructure};

/// Number of replica trajectories written out in full.
const KEEP_TRAJECTORIES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(u64),
    Float(f64),
    Text(String),
    List(Vec<f64>),
}

impl ParamValue {
    /// Parses `text` as the same kind of value as `self`.
    fn parse_like(&self, key: &str, text: &str) -> Result<ParamValue> {
        let bad = |e: &dyn fmt::Display| invalid(format!("bad value `{text}` for `{key}`: {e}"));
        Ok(match self {
            ParamValue::Int(_) => {
                // accept 2e5 style integers
                let v: f64 = text.trim().parse().map_err(|e| bad(&e))?;
                if v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
                    return Err(bad(&"expected a nonnegative integer"));
                }
                ParamValue::Int(v as u64)
            }
            ParamValue::Float(_) => ParamValue::Float(text.trim().parse().map_err(|e| bad(&e))?),
            ParamValue::Text(_) => ParamValue::Text(text.trim().to_string()),
            ParamValue::List(_) => ParamValue::List(parse_list(text).map_err(|e| bad(&e))?),
        })
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Text(v) => f.write_str(v),
            ParamValue::List(v) => {
                let items: Vec<String> = v.iter().map(f64::to_string).collect();
                write!(f, "[{}]", items.join(","))
            }
        }
    }
}

pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    let inner = text.trim().trim_start_matches('[').trim_end_matches(']');
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| invalid(format!("bad number `{v}`: {e}")))
        })
        .collect()
}

/// Named, typed scenario parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Params(BTreeMap<String, ParamValue>);

impl Params {
    fn new(entries: &[(&str, ParamValue)]) -> Self {
        Self(
            entries
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
        )
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn get(&self, key: &str) -> Option<&ParamValue> {
        self.0.get(key)
    }

    /// Applies `key=value`, type-checked against the default.
    pub fn set(&mut self, key: &str, text: &str) -> Result<()> {
        let current = self.0.get(key).ok_or_else(|| {
            let known: Vec<&str> = self.keys().collect();
            invalid(format!(
                "unknown parameter `{key}` (known: {})",
                known.join(", ")
            ))
        })?;
        let v = current.parse_like(key, text)?;
        self.0.insert(key.to_string(), v);
        Ok(())
    }

    pub fn apply(&mut self, overrides: &[(String, String)]) -> Result<()> {
        for (k, v) in overrides {
            self.set(k, v)?;
        }
        Ok(())
    }

    fn float(&self, key: &str) -> f64 {
        match self.0.get(key) {
            Some(ParamValue::Float(v)) => *v,
            Some(ParamValue::Int(v)) => *v as f64,
            other => panic!("parameter `{key}` is not numeric: {other:?}"),
        }
    }

    fn int(&self, key: &str) -> u64 {
        match self.0.get(key) {
            Some(ParamValue::Int(v)) => *v,
            other => panic!("parameter `{key}` is not an integer: {other:?}"),
        }
    }

    fn text(&self, key: &str) -> &str {
        match self.0.get(key) {
            Some(ParamValue::Text(v)) => v,
            other => panic!("parameter `{key}` is not text: {other:?}"),
        }
    }

    fn list(&self, key: &str) -> &[f64] {
        match self.0.get(key) {
            Some(ParamValue::List(v)) => v,
            other => panic!("parameter `{key}` is not a list: {other:?}"),
        }
    }
}

pub fn parse_override(text: &str) -> Result<(String, String)> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| invalid(format!("expected key=value, got `{text}`")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

pub struct Experiment {
    pub name: &'static str,
    pub about: &'static str,
    defaults: fn() -> Params,
    run: fn(&Params, u64) -> Result<Outcome>,
}

impl Experiment {
    pub fn defaults(&self) -> Params {
        (self.defaults)()
    }
}

pub fn registry() -> Vec<Experiment> {
    vec![
        Experiment {
            name: "majority-theta",
            about: "symmetric two-community majority rule; frequency of split limits",
            defaults: || {
                Params::new(&[
                    ("theta", ParamValue::Float(0.05)),
                    ("m", ParamValue::Int(3)),
                    ("T", ParamValue::Int(200_000)),
                    ("seeds", ParamValue::Int(200)),
                    ("mu", ParamValue::List(vec![0.5, 0.5])),
                    ("colors", ParamValue::Text("random".into())),
                    ("split", ParamValue::Float(0.5)),
                ])
            },
            run: run_majority_theta,
        },
        Experiment {
            name: "random-visible",
            about: "random-visible rule on the symmetric structure; synchronization at 1/2",
            defaults: || {
                Params::new(&[
                    ("theta", ParamValue::Float(0.05)),
                    ("m", ParamValue::Int(3)),
                    ("T", ParamValue::Int(200_000)),
                    ("seeds", ParamValue::Int(100)),
                    ("mu", ParamValue::List(vec![0.5, 0.5])),
                    ("colors", ParamValue::Text("balanced".into())),
                    ("band", ParamValue::Float(0.1)),
                ])
            },
            run: run_random_visible,
        },
        Experiment {
            name: "minority-det-negative",
            about: "minority rule with strong cross-attraction (det A < 0); split limits",
            defaults: || {
                Params::new(&[
                    ("theta", ParamValue::Float(10.0)),
                    ("m", ParamValue::Int(3)),
                    ("T", ParamValue::Int(200_000)),
                    ("seeds", ParamValue::Int(200)),
                    ("mu", ParamValue::List(vec![0.5, 0.5])),
                    ("colors", ParamValue::Text("random".into())),
                    ("split", ParamValue::Float(0.4)),
                ])
            },
            run: run_minority_det_negative,
        },
        Experiment {
            name: "touchpoint-invisible",
            about: "touchpoint rule (1/4,0,1,1) with community 1 invisible to community 2",
            defaults: || {
                Params::new(&[
                    ("theta", ParamValue::Float(10.0)),
                    ("T", ParamValue::Int(200_000)),
                    ("seeds", ParamValue::Int(100)),
                    ("mu", ParamValue::List(vec![0.8, 0.2])),
                    ("colors", ParamValue::Text("random".into())),
                ])
            },
            run: run_touchpoint_invisible,
        },
        Experiment {
            name: "three-cycle-minority",
            about: "minority rule on the directed three-cycle; sustained oscillation for m >= 7",
            defaults: || {
                Params::new(&[
                    ("m", ParamValue::Int(7)),
                    ("T", ParamValue::Int(1_000_000)),
                    ("seeds", ParamValue::Int(20)),
                    ("colors", ParamValue::Text("random".into())),
                    ("amplitude", ParamValue::Float(0.1)),
                    ("band", ParamValue::Float(0.05)),
                ])
            },
            run: run_three_cycle,
        },
        Experiment {
            name: "linear-sync",
            about: "linear rule on a random three-community structure; common random limit",
            defaults: || {
                Params::new(&[
                    ("m", ParamValue::Int(3)),
                    ("T", ParamValue::Int(1_000_000)),
                    ("seeds", ParamValue::Int(50)),
                    ("structure_seed", ParamValue::Int(11)),
                    ("colors", ParamValue::Text("balanced".into())),
                    ("tol", ParamValue::Float(0.05)),
                ])
            },
            run: run_linear_sync,
        },
        Experiment {
            name: "period-two",
            about: "minority rule with A = [[0,1],[1,0]]; limits on a period-two orbit of R",
            defaults: || {
                Params::new(&[
                    ("m", ParamValue::Int(3)),
                    ("T", ParamValue::Int(200_000)),
                    ("seeds", ParamValue::Int(100)),
                    ("mu", ParamValue::List(vec![0.5, 0.5])),
                    ("colors", ParamValue::Text("random".into())),
                    ("split", ParamValue::Float(0.5)),
                ])
            },
            run: run_period_two,
        },
    ]
}

pub fn find(name: &str) -> Result<Experiment> {
    registry()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownExperiment(name.to_string()))
}

/// The scenario's headline: a labelled frequency with its Wilson interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Headline {
    pub statistic: String,
    pub count: usize,
    pub n: usize,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Headline {
    fn new(statistic: &str, count: usize, n: usize) -> Self {
        let (lo, hi) = wilson_interval(count, n);
        Self {
            statistic: statistic.to_string(),
            count,
            n,
            estimate: count as f64 / n as f64,
            lo,
            hi,
        }
    }
}

/// Everything a scenario produces. Files are written by [`write_outcome`].
#[derive(Debug, Clone)]
pub struct Outcome {
    pub headline: Headline,
    /// Extra headline-style frequencies (e.g. a control statistic).
    pub extra: Vec<Headline>,
    pub median_spread: f64,
    pub mc: MonteCarloSummary,
    pub per_replica: Vec<BTreeMap<String, f64>>,
    pub details: serde_json::Value,
    pub trajectories: Vec<Trajectory>,
    pub side_files: Vec<(String, String)>,
}

impl Outcome {
    pub fn statistic(&self, name: &str) -> Option<&Headline> {
        std::iter::once(&self.headline)
            .chain(&self.extra)
            .find(|h| h.statistic == name)
    }
}

pub struct Run {
    pub name: String,
    pub params: Params,
    pub seed: u64,
    pub config_hash: String,
    pub outcome: Outcome,
}

pub fn run_experiment(name: &str, overrides: &[(String, String)], seed: u64) -> Result<Run> {
    let exp = find(name)?;
    let mut params = exp.defaults();
    params.apply(overrides)?;
    let hash = config_hash(&json!({ "experiment": name, "params": params, "seed": seed }));
    let outcome = (exp.run)(&params, seed)?;
    Ok(Run {
        name: name.to_string(),
        params,
        seed,
        config_hash: hash,
        outcome,
    })
}

struct Scenario {
    config: SimConfig,
    seeds: usize,
    label: Box<dyn Fn(&[f64]) -> String + Sync>,
    /// Extra per-replica numbers computed from the trajectory.
    extras: Box<dyn Fn(&Trajectory) -> BTreeMap<String, f64> + Sync>,
}

struct ScenarioResult {
    mc: MonteCarloSummary,
    per_replica: Vec<BTreeMap<String, f64>>,
    trajectories: Vec<Trajectory>,
    median_spread: f64,
}

fn run_scenario(sc: Scenario) -> Result<ScenarioResult> {
    let results = monte_carlo_with(&sc.config, sc.seeds, |index, t| {
        let replica = Replica {
            index,
            seed: t.seed,
            label: (sc.label)(&t.terminal.z),
            z: t.terminal.z.clone(),
            y: t.terminal.y.clone(),
        };
        let mut extras = (sc.extras)(&t);
        extras.insert("spread".into(), spread(&t.terminal.z));
        let keep = (index < KEEP_TRAJECTORIES).then_some(t);
        (replica, extras, keep)
    })?;
    let mut replicas = Vec::with_capacity(results.len());
    let mut per_replica = Vec::with_capacity(results.len());
    let mut trajectories = Vec::new();
    for (r, e, t) in results {
        replicas.push(r);
        per_replica.push(e);
        trajectories.extend(t);
    }
    let spreads: Vec<f64> = per_replica.iter().map(|e| e["spread"]).collect();
    Ok(ScenarioResult {
        mc: MonteCarloSummary::from_replicas(sc.config.seed, replicas),
        per_replica,
        trajectories,
        median_spread: median(&spreads),
    })
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn sim_config(rule: TypeRule, cs: CommunityStructure, p: &Params, seed: u64) -> Result<SimConfig> {
    let mut cfg = SimConfig::new(rule, cs, p.int("T"), seed);
    cfg.colors = p.text("colors").parse::<Colors>()?;
    cfg.snapshot = SnapshotSchedule::Log;
    cfg.validate()?;
    Ok(cfg)
}

fn seeds(p: &Params) -> Result<usize> {
    match p.int("seeds") {
        0 => Err(invalid("seeds must be at least 1")),
        s => Ok(s as usize),
    }
}

fn symmetric(theta: f64, mu: &[f64]) -> Result<CommunityStructure> {
    let ones = SmallMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]])?;
    CommunityStructure::new(make_a_theta(&ones, theta)?, mu.to_vec())
}

fn stationary_table(rule: &TypeRule, cs: &CommunityStructure) -> Vec<StationaryPoint> {
    find_stationary_points(rule, cs, None).unwrap_or_default()
}

fn count_label(mc: &MonteCarloSummary, label: &str) -> usize {
    mc.labels.get(label).map_or(0, |s| s.count)
}

fn split_outcome(
    rule: TypeRule,
    cs: CommunityStructure,
    p: &Params,
    seed: u64,
    details: serde_json::Value,
) -> Result<Outcome> {
    let threshold = p.float("split");
    let sc = Scenario {
        config: sim_config(rule, cs, p, seed)?,
        seeds: seeds(p)?,
        label: Box::new(move |z: &[f64]| {
            if (z[0] - z[1]).abs() > threshold {
                "split"
            } else {
                "together"
            }
            .into()
        }),
        extras: Box::new(|_| BTreeMap::new()),
    };
    let res = run_scenario(sc)?;
    let n = res.mc.n_seeds;
    Ok(Outcome {
        headline: Headline::new("split", count_label(&res.mc, "split"), n),
        extra: Vec::new(),
        median_spread: res.median_spread,
        mc: res.mc,
        per_replica: res.per_replica,
        details,
        trajectories: res.trajectories,
        side_files: Vec::new(),
    })
}

fn run_majority_theta(p: &Params, seed: u64) -> Result<Outcome> {
    let rule = TypeRule::majority(p.int("m") as usize)?;
    let cs = symmetric(p.float("theta"), p.list("mu"))?;
    let details = json!({
        "rule": rule.name(),
        "A": cs.a().rows(),
        "mu": cs.mu(),
        "stationary_points": stationary_table(&rule, &cs),
    });
    split_outcome(rule, cs, p, seed, details)
}

fn run_minority_det_negative(p: &Params, seed: u64) -> Result<Outcome> {
    let rule = TypeRule::minority(p.int("m") as usize)?;
    let cs = symmetric(p.float("theta"), p.list("mu"))?;
    let fixed: Vec<f64> = rule.fixed_points()?.points().iter().map(|f| f.z).collect();
    let details = json!({
        "rule": rule.name(),
        "A": cs.a().rows(),
        "mu": cs.mu(),
        "det_sign": cs.det_sign_2x2()?,
        "rule_fixed_points": fixed,
        "stationary_points": stationary_table(&rule, &cs),
    });
    split_outcome(rule, cs, p, seed, details)
}

fn run_period_two(p: &Params, seed: u64) -> Result<Outcome> {
    let rule = TypeRule::minority(p.int("m") as usize)?;
    let cs =
        CommunityStructure::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]], p.list("mu").to_vec())?;
    let nu = cs.solve_nu()?.nu;
    let base = rule.fixed_points()?;
    let mut cycles = Vec::new();
    if let Ok(FixedPointSet::Isolated(points)) = rule.composite_fixed_points() {
        for fp in points.iter().filter(|f| !base.contains(f.z, 1e-7)) {
            let z = [fp.z, rule.eval(fp.z)];
            let jac = single_source_jacobian(&rule, &cs, &nu, &z).expect("anti-diagonal structure");
            let spec = eigenvalues(&jac)?;
            cycles.push(json!({
                "z": z,
                "composite_slope": fp.rprime,
                "jacobian": jac.rows(),
                "max_re_eig": spec.max_re(),
            }));
        }
    }
    let details = json!({ "rule": rule.name(), "A": cs.a().rows(), "mu": cs.mu(), "nu": nu, "period_two": cycles });
    split_outcome(rule, cs, p, seed, details)
}

fn run_random_visible(p: &Params, seed: u64) -> Result<Outcome> {
    let rule = TypeRule::random_visible(p.int("m") as usize)?;
    let cs = symmetric(p.float("theta"), p.list("mu"))?;
    let band = p.float("band");
    let sc = Scenario {
        config: sim_config(rule.clone(), cs.clone(), p, seed)?,
        seeds: seeds(p)?,
        label: Box::new(move |z: &[f64]| {
            if z.iter().all(|v| (v - 0.5).abs() < band) {
                "near-half"
            } else {
                "away"
            }
            .into()
        }),
        extras: Box::new(|t| {
            let dev = t
                .terminal
                .z
                .iter()
                .map(|v| (v - 0.5).abs())
                .fold(0.0, f64::max);
            BTreeMap::from([("max_dev_from_half".to_string(), dev)])
        }),
    };
    let res = run_scenario(sc)?;
    let n = res.mc.n_seeds;
    let details = json!({
        "rule": rule.name(),
        "A": cs.a().rows(),
        "mu": cs.mu(),
        "stationary_points": stationary_table(&rule, &cs),
    });
    Ok(Outcome {
        headline: Headline::new("near-half", count_label(&res.mc, "near-half"), n),
        extra: Vec::new(),
        median_spread: res.median_spread,
        mc: res.mc,
        per_replica: res.per_replica,
        details,
        trajectories: res.trajectories,
        side_files: Vec::new(),
    })
}

fn run_touchpoint_invisible(p: &Params, seed: u64) -> Result<Outcome> {
    let rule = TypeRule::touchpoint()?;
    let theta = p.float("theta");
    let cs =
        CommunityStructure::from_rows(&[vec![1.0, 0.0], vec![theta, 1.0]], p.list("mu").to_vec())?;
    let fixed: Vec<f64> = rule.fixed_points()?.points().iter().map(|f| f.z).collect();
    let targets = fixed.clone();
    let nearest = move |v: f64| -> f64 {
        *targets
            .iter()
            .min_by(|a, b| (*a - v).abs().total_cmp(&(*b - v).abs()))
            .expect("fixed points exist")
    };
    let sc = Scenario {
        config: sim_config(rule.clone(), cs.clone(), p, seed)?,
        seeds: seeds(p)?,
        label: Box::new(move |z: &[f64]| {
            let a = nearest(z[0]);
            let b = nearest(z[1]);
            if a == b { "same" } else { "different" }.into()
        }),
        extras: Box::new(|_| BTreeMap::new()),
    };
    let res = run_scenario(sc)?;
    let n = res.mc.n_seeds;
    let nu = cs.solve_nu()?;
    let details = json!({
        "rule": rule.name(),
        "A": cs.a().rows(),
        "mu": cs.mu(),
        "nu": nu.nu,
        "rule_fixed_points": fixed,
        "stationary_points": stationary_table(&rule, &cs),
    });
    Ok(Outcome {
        headline: Headline::new("different", count_label(&res.mc, "different"), n),
        extra: Vec::new(),
        median_spread: res.median_spread,
        mc: res.mc,
        per_replica: res.per_replica,
        details,
        trajectories: res.trajectories,
        side_files: Vec::new(),
    })
}

pub fn three_cycle_structure() -> Result<CommunityStructure> {
    CommunityStructure::uniform(&[
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
        vec![1.0, 0.0, 0.0],
    ])
}

fn run_three_cycle(p: &Params, seed: u64) -> Result<Outcome> {
    let m = p.int("m") as usize;
    let rule = TypeRule::minority(m)?;
    let cs = three_cycle_structure()?;
    let amp = p.float("amplitude");
    let band = p.float("band");
    let sc = Scenario {
        config: sim_config(rule.clone(), cs.clone(), p, seed)?,
        seeds: seeds(p)?,
        label: Box::new(move |z: &[f64]| {
            if z.iter().all(|v| (v - 0.5).abs() < band) {
                "near-half"
            } else {
                "away"
            }
            .into()
        }),
        extras: Box::new(|t| {
            (0..t.terminal.z.len())
                .map(|i| (format!("amplitude_{}", i + 1), t.late_amplitude(i)))
                .collect()
        }),
    };
    let res = run_scenario(sc)?;
    let n = res.mc.n_seeds;
    let oscillating = res
        .per_replica
        .iter()
        .filter(|e| e["amplitude_1"] > amp)
        .count();
    let nu = cs.solve_nu()?.nu;
    let centre = [0.5; 3];
    let jac =
        single_source_jacobian(&rule, &cs, &nu, &centre).expect("three-cycle is single-source");
    let spectrum = eigenvalues(&jac)?;
    let details = json!({
        "rule": rule.name(),
        "A": cs.a().rows(),
        "rprime_half": rule.deriv(0.5, 1),
        "centre_jacobian": jac.rows(),
        "centre_eigenvalues": spectrum.eigenvalues.iter().map(|l| [l.re, l.im]).collect::<Vec<_>>(),
        "window": "final half of the snapshot list",
    });
    Ok(Outcome {
        headline: Headline::new("oscillating", oscillating, n),
        extra: vec![Headline::new(
            "near-half",
            count_label(&res.mc, "near-half"),
            n,
        )],
        median_spread: res.median_spread,
        mc: res.mc,
        per_replica: res.per_replica,
        details,
        trajectories: res.trajectories,
        side_files: Vec::new(),
    })
}

/// Attractiveness entries uniform on `[0.1, 1)` and community weights
/// uniform on `[0.2, 1)` (normalized), from `seed`.
pub fn random_structure(n: usize, seed: u64) -> Result<CommunityStructure> {
    let mut rng = SimRng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.gen_range(0.1..1.0)).collect())
        .collect();
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = w.iter().sum();
    let mut mu: Vec<f64> = w.iter().map(|v| v / total).collect();
    // absorb rounding so the weights sum to one
    let rest: f64 = mu[..n - 1].iter().sum();
    mu[n - 1] = 1.0 - rest;
    CommunityStructure::from_rows(&rows, mu)
}

fn run_linear_sync(p: &Params, seed: u64) -> Result<Outcome> {
    let rule = TypeRule::linear(p.int("m") as usize)?;
    let cs = random_structure(3, p.int("structure_seed"))?;
    if !cs.gamma().common_reachability() {
        return Err(Error::Precondition(
            "generated structure lacks common reachability".into(),
        ));
    }
    let nu = cs.solve_nu()?.nu;
    let sigma = stationary_sigma(&cs, &psi_matrix(&cs, &nu)?)?;
    let tol = p.float("tol");
    let (sig, nu_c) = (sigma.clone(), nu.clone());
    let sc = Scenario {
        config: sim_config(rule.clone(), cs.clone(), p, seed)?,
        seeds: seeds(p)?,
        label: Box::new(move |z: &[f64]| if spread(z) < tol { "synced" } else { "spread" }.into()),
        extras: Box::new(move |t| {
            let m: f64 = (0..sig.len())
                .map(|i| sig[i] * t.terminal.y[i] * t.terminal.z[i] / nu_c[i])
                .sum();
            BTreeMap::from([("M".to_string(), m)])
        }),
    };
    let res = run_scenario(sc)?;
    let n = res.mc.n_seeds;
    let limits: Vec<f64> = res.per_replica.iter().map(|e| e["M"]).collect();
    let mean = limits.iter().sum::<f64>() / limits.len() as f64;
    let sd = if limits.len() > 1 {
        (limits.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (limits.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut side_files = Vec::new();
    if let Some(t) = res.trajectories.first() {
        let report = crate::field::sync_diagnostic(t, &cs)?;
        let mut csv = String::from("n,spread,M\n");
        for k in 0..report.n.len() {
            writeln!(
                csv,
                "{},{},{}",
                report.n[k], report.spread[k], report.m_n[k]
            )
            .unwrap();
        }
        side_files.push(("sync_0.csv".to_string(), csv));
    }
    let details = json!({
        "rule": rule.name(),
        "A": cs.a().rows(),
        "mu": cs.mu(),
        "nu": nu,
        "sigma": sigma,
        "limit_mean": mean,
        "limit_sd": sd,
    });
    Ok(Outcome {
        headline: Headline::new("synced", count_label(&res.mc, "synced"), n),
        extra: Vec::new(),
        median_spread: res.median_spread,
        mc: res.mc,
        per_replica: res.per_replica,
        details,
        trajectories: res.trajectories,
        side_files,
    })
}

/// Writes `summary.json`, `replicas.csv`, `report.txt`, trajectory CSVs
/// and any side files into `dir`.
pub fn write_outcome(run: &Run, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let o = &run.outcome;
    std::fs::write(dir.join("summary.json"), summary_json(run) + "\n")?;
    std::fs::write(dir.join("replicas.csv"), replicas_csv(o))?;
    std::fs::write(dir.join("report.txt"), report(run))?;
    for (k, t) in o.trajectories.iter().enumerate() {
        std::fs::write(dir.join(format!("trajectory_{k}.csv")), t.to_csv())?;
    }
    for (name, body) in &o.side_files {
        std::fs::write(dir.join(name), body)?;
    }
    Ok(())
}

pub fn summary_json(run: &Run) -> String {
    let o = &run.outcome;
    let seeds: Vec<u64> = o.mc.replicas.iter().map(|r| r.seed).collect();
    let value = json!({
        "experiment": run.name,
        "params": run.params,
        "base_seed": run.seed,
        "config_hash": run.config_hash,
        "seeds": seeds,
        "headline": o.headline,
        "extra": o.extra,
        "labels": o.mc.labels,
        "median_spread": o.median_spread,
        "details": o.details,
    });
    serde_json::to_string_pretty(&value).expect("summary serializes")
}

pub fn replicas_csv(o: &Outcome) -> String {
    let n = o.mc.replicas.first().map_or(0, |r| r.z.len());
    let extra_keys: Vec<String> = o
        .per_replica
        .first()
        .map(|e| e.keys().cloned().collect())
        .unwrap_or_default();
    let mut out = String::from("index,seed,label");
    for i in 1..=n {
        write!(out, ",Z_{i}").unwrap();
    }
    for i in 1..=n {
        write!(out, ",Y_{i}").unwrap();
    }
    for k in &extra_keys {
        write!(out, ",{k}").unwrap();
    }
    out.push('\n');
    for (r, e) in o.mc.replicas.iter().zip(&o.per_replica) {
        write!(out, "{},{},{}", r.index, r.seed, r.label).unwrap();
        for v in r.z.iter().chain(&r.y) {
            write!(out, ",{v}").unwrap();
        }
        for k in &extra_keys {
            write!(out, ",{}", e[k]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn report(run: &Run) -> String {
    let o = &run.outcome;
    let mut s = String::new();
    writeln!(s, "experiment: {}", run.name).unwrap();
    let params: Vec<String> = run
        .params
        .0
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    writeln!(s, "parameters: {}", params.join(" ")).unwrap();
    writeln!(
        s,
        "base seed: {}   config hash: {}",
        run.seed, run.config_hash
    )
    .unwrap();
    for h in std::iter::once(&o.headline).chain(&o.extra) {
        writeln!(
            s,
            "{}: {}/{} = {:.4}  (95% Wilson interval {:.4} .. {:.4})",
            h.statistic, h.count, h.n, h.estimate, h.lo, h.hi
        )
        .unwrap();
    }
    writeln!(
        s,
        "median terminal spread max|Z_i - Z_j|: {:.4}",
        o.median_spread
    )
    .unwrap();
    writeln!(s, "labels:").unwrap();
    for (label, stat) in &o.mc.labels {
        writeln!(s, "  {label:<12} {:>5}  {:.4}", stat.count, stat.frequency).unwrap();
    }
    s
}
