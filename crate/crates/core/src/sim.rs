//! The growth process: degree- and attractiveness-weighted attachment with
//! replacement, type assignment by the rule, and the edge-end ledgers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rules::TypeRule;
use crate::structure::CommunityStructure;

pub type SimRng = Xoshiro256StarStar;

/// 97.5% standard normal quantile.
const WILSON_Z: f64 = 1.959_963_984_540_054;

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Types of the seed vertices of the default initial graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Colors {
    /// Independent fair coin per seed vertex, drawn from the run's generator.
    #[default]
    Random,
    /// `true` = red, one entry per community.
    Fixed(Vec<bool>),
    /// One red and one blue seed vertex in every community.
    Balanced,
}

impl std::str::FromStr for Colors {
    type Err = crate::Error;

    /// `random`, or a comma list of `red`/`blue` (also `r`/`b`, `1`/`0`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("random") {
            return Ok(Colors::Random);
        }
        if s.eq_ignore_ascii_case("balanced") {
            return Ok(Colors::Balanced);
        }
        s.trim_matches(|c| c == '[' || c == ']' || c == '(' || c == ')')
            .split(',')
            .map(|c| match c.trim().to_ascii_lowercase().as_str() {
                "red" | "r" | "1" => Ok(true),
                "blue" | "b" | "0" => Ok(false),
                other => Err(invalid(format!("unknown colour `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Colors::Fixed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitVertex {
    pub community: usize,
    pub red: bool,
    pub degree: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitialGraph {
    pub vertices: Vec<InitVertex>,
}

impl InitialGraph {
    /// One vertex per community carrying `m` self-loops (degree `2m`); two
    /// per community, one of each type, for [`Colors::Balanced`].
    pub fn default_for(
        n_communities: usize,
        m: usize,
        colors: &Colors,
        rng: &mut SimRng,
    ) -> Result<Self> {
        let reds: Vec<bool> = match colors {
            Colors::Balanced => {
                let vertices = (0..n_communities)
                    .flat_map(|community| {
                        [true, false].map(|red| InitVertex {
                            community,
                            red,
                            degree: 2 * m as u64,
                        })
                    })
                    .collect();
                return Ok(Self { vertices });
            }
            Colors::Random => (0..n_communities).map(|_| rng.gen::<bool>()).collect(),
            Colors::Fixed(c) => {
                if c.len() != n_communities {
                    return Err(invalid(format!(
                        "{} colours given for {n_communities} communities",
                        c.len()
                    )));
                }
                c.clone()
            }
        };
        let vertices = reds
            .into_iter()
            .enumerate()
            .map(|(community, red)| InitVertex {
                community,
                red,
                degree: 2 * m as u64,
            })
            .collect();
        Ok(Self { vertices })
    }

    pub fn n0(&self) -> usize {
        self.vertices.len()
    }

    pub fn validate(&self, n_communities: usize, m: usize) -> Result<()> {
        let mut seen = vec![false; n_communities];
        for (idx, v) in self.vertices.iter().enumerate() {
            if v.community >= n_communities {
                return Err(invalid(format!(
                    "vertex {idx} is in community {} of {n_communities}",
                    v.community
                )));
            }
            if v.degree == 0 {
                return Err(invalid(format!("vertex {idx} has degree 0")));
            }
            seen[v.community] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(invalid(format!("community {c} has no initial vertex")));
        }
        let total: u64 = self.vertices.iter().map(|v| v.degree).sum();
        let want = 2 * m as u64 * self.n0() as u64;
        if total != want {
            return Err(invalid(format!(
                "initial degrees sum to {total}, expected 2 m n0 = {want}"
            )));
        }
        Ok(())
    }
}

/// Per-community edge-end rosters plus vertex records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphState {
    m: usize,
    n0: u64,
    n: u64,
    community: Vec<u8>,
    red: Vec<bool>,
    /// Each vertex id appears once per incident edge-end.
    rosters: Vec<Vec<u32>>,
    d: Vec<u64>,
    r: Vec<u64>,
}

impl GraphState {
    pub fn new(init: &InitialGraph, n_communities: usize, m: usize) -> Result<Self> {
        init.validate(n_communities, m)?;
        let mut state = Self {
            m,
            n0: init.n0() as u64,
            n: 0,
            community: Vec::with_capacity(init.n0()),
            red: Vec::with_capacity(init.n0()),
            rosters: vec![Vec::new(); n_communities],
            d: vec![0; n_communities],
            r: vec![0; n_communities],
        };
        for (id, v) in init.vertices.iter().enumerate() {
            state.community.push(v.community as u8);
            state.red.push(v.red);
            let roster = &mut state.rosters[v.community];
            roster.extend(std::iter::repeat_n(id as u32, v.degree as usize));
            state.d[v.community] += v.degree;
            if v.red {
                state.r[v.community] += v.degree;
            }
        }
        Ok(state)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n0(&self) -> u64 {
        self.n0
    }

    /// Steps taken so far.
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn vertex_count(&self) -> usize {
        self.red.len()
    }

    pub fn n_communities(&self) -> usize {
        self.d.len()
    }

    /// Edge-ends per community.
    pub fn d(&self) -> &[u64] {
        &self.d
    }

    /// Edge-ends at red vertices per community.
    pub fn r(&self) -> &[u64] {
        &self.r
    }

    pub fn is_red(&self, v: usize) -> bool {
        self.red[v]
    }

    pub fn community_of(&self, v: usize) -> usize {
        self.community[v] as usize
    }

    pub fn degree(&self, v: usize) -> usize {
        self.rosters[self.community_of(v)]
            .iter()
            .filter(|&&w| w as usize == v)
            .count()
    }

    pub fn total_edge_ends(&self) -> u64 {
        self.d.iter().sum()
    }

    /// Community shares of edge-ends.
    pub fn y(&self) -> Vec<f64> {
        let total = self.total_edge_ends() as f64;
        self.d.iter().map(|&d| d as f64 / total).collect()
    }

    /// Red share of edge-ends within each community.
    pub fn z(&self) -> Vec<f64> {
        self.r
            .iter()
            .zip(&self.d)
            .map(|(&r, &d)| r as f64 / d as f64)
            .collect()
    }

    /// `(x_{1,1}, x_{1,2}, ..., x_{N,1}, x_{N,2})`.
    pub fn x(&self) -> Vec<f64> {
        let total = self.total_edge_ends() as f64;
        self.r
            .iter()
            .zip(&self.d)
            .flat_map(|(&r, &d)| [r as f64 / total, (d - r) as f64 / total])
            .collect()
    }

    pub fn conserved(&self) -> bool {
        self.total_edge_ends() == 2 * self.m as u64 * (self.n + self.n0)
    }

    /// Full recount of rosters against the ledgers.
    pub fn audit(&self) -> Result<()> {
        if !self.conserved() {
            return Err(invalid(format!(
                "edge-end total {} differs from 2m(n+n0) = {}",
                self.total_edge_ends(),
                2 * self.m as u64 * (self.n + self.n0)
            )));
        }
        for (i, roster) in self.rosters.iter().enumerate() {
            if roster.len() as u64 != self.d[i] {
                return Err(invalid(format!(
                    "roster {i} has {} entries, D = {}",
                    roster.len(),
                    self.d[i]
                )));
            }
            let reds = roster.iter().filter(|&&v| self.red[v as usize]).count() as u64;
            if reds != self.r[i] {
                return Err(invalid(format!(
                    "roster {i} has {reds} red entries, R = {}",
                    self.r[i]
                )));
            }
            if let Some(&v) = roster
                .iter()
                .find(|&&v| self.community[v as usize] as usize != i)
            {
                return Err(invalid(format!("vertex {v} is filed under community {i}")));
            }
        }
        Ok(())
    }
}

/// A running instance of the process.
#[derive(Debug, Clone)]
pub struct Simulation {
    rule: TypeRule,
    cs: CommunityStructure,
    state: GraphState,
    rng: SimRng,
    cum_mu: Vec<f64>,
    weights: Vec<f64>,
    picks: Vec<u32>,
}

impl Simulation {
    pub fn new(rule: TypeRule, cs: CommunityStructure, colors: &Colors, seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let init = InitialGraph::default_for(cs.n(), rule.m(), colors, &mut rng)?;
        Self::with_initial(rule, cs, &init, rng)
    }

    pub fn with_initial(
        rule: TypeRule,
        cs: CommunityStructure,
        init: &InitialGraph,
        rng: SimRng,
    ) -> Result<Self> {
        if cs.n() > u8::MAX as usize {
            return Err(invalid("too many communities"));
        }
        let state = GraphState::new(init, cs.n(), rule.m())?;
        let mut acc = 0.0;
        let cum_mu = cs
            .mu()
            .iter()
            .map(|&p| {
                acc += p;
                acc
            })
            .collect();
        let n = cs.n();
        let m = rule.m();
        Ok(Self {
            rule,
            cs,
            state,
            rng,
            cum_mu,
            weights: vec![0.0; n],
            picks: Vec::with_capacity(m),
        })
    }

    pub fn state(&self) -> &GraphState {
        &self.state
    }

    pub fn rule(&self) -> &TypeRule {
        &self.rule
    }

    pub fn structure(&self) -> &CommunityStructure {
        &self.cs
    }

    /// Exact probability that the next newcomer is red given it joins
    /// community `i`: each draw is red with probability
    /// `Σ_k α_{k,i} R_k / Σ_k α_{k,i} D_k`, independently.
    pub fn red_probability(&self, i: usize) -> f64 {
        let n = self.cs.n();
        let num: f64 = (0..n)
            .map(|k| self.cs.alpha(k, i) * self.state.r[k] as f64)
            .sum();
        let den: f64 = (0..n)
            .map(|k| self.cs.alpha(k, i) * self.state.d[k] as f64)
            .sum();
        self.rule.eval(num / den)
    }

    /// Adds one vertex. Returns its community and type.
    pub fn step(&mut self) -> (usize, bool) {
        let n_comm = self.cs.n();
        let u: f64 = self.rng.gen();
        let i = self
            .cum_mu
            .iter()
            .position(|&c| u < c)
            .unwrap_or(n_comm - 1);

        let mut total = 0.0;
        for k in 0..n_comm {
            let w = self.cs.alpha(k, i) * self.state.d[k] as f64;
            self.weights[k] = w;
            total += w;
        }
        assert!(total > 0.0, "community {i} has zero attachment weight");

        self.picks.clear();
        let mut k_red = 0;
        for _ in 0..self.rule.m() {
            let u = self.rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut k = n_comm;
            for (c, &w) in self.weights.iter().enumerate() {
                acc += w;
                if w > 0.0 && u < acc {
                    k = c;
                    break;
                }
            }
            if k == n_comm {
                // rounding left u past the last partial sum
                k = self
                    .weights
                    .iter()
                    .rposition(|&w| w > 0.0)
                    .expect("positive weight");
            }
            let roster = &self.state.rosters[k];
            let v = roster[self.rng.gen_range(0..roster.len() as u64) as usize];
            if self.state.red[v as usize] {
                k_red += 1;
            }
            self.picks.push(v);
        }

        let red = self.rng.gen::<f64>() < self.rule.p()[k_red];

        for &v in &self.picks {
            let k = self.state.community[v as usize] as usize;
            self.state.rosters[k].push(v);
            self.state.d[k] += 1;
            if self.state.red[v as usize] {
                self.state.r[k] += 1;
            }
        }
        let id = u32::try_from(self.state.red.len()).expect("vertex ids fit in u32");
        let m = self.rule.m();
        self.state.community.push(i as u8);
        self.state.red.push(red);
        self.state.rosters[i].extend(std::iter::repeat_n(id, m));
        self.state.d[i] += m as u64;
        if red {
            self.state.r[i] += m as u64;
        }
        self.state.n += 1;
        debug_assert!(self.state.conserved());
        (i, red)
    }

    /// Runs to `steps` total steps, recording snapshots.
    pub fn run(&mut self, steps: u64, schedule: &SnapshotSchedule, seed: u64) -> Trajectory {
        let mut snapshots = Vec::new();
        let mut next = self.state.n;
        let record = |state: &GraphState| Snapshot {
            n: state.n,
            y: state.y(),
            z: state.z(),
        };
        snapshots.push(record(&self.state));
        loop {
            next = schedule.next_after(next, steps);
            if next > steps || self.state.n >= steps {
                break;
            }
            while self.state.n < next {
                self.step();
            }
            snapshots.push(record(&self.state));
        }
        while self.state.n < steps {
            self.step();
        }
        if snapshots.last().map(|s| s.n) != Some(self.state.n) {
            snapshots.push(record(&self.state));
        }
        Trajectory {
            seed,
            m: self.rule.m(),
            n0: self.state.n0,
            snapshots,
            terminal: Terminal::of(&self.state),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "stride")]
pub enum SnapshotSchedule {
    Every(u64),
    /// Every step to 1000, then growing by 1% per snapshot.
    #[default]
    Log,
    Final,
}

impl SnapshotSchedule {
    /// First snapshot time after `n` (may exceed `end`).
    pub fn next_after(&self, n: u64, end: u64) -> u64 {
        match *self {
            SnapshotSchedule::Every(s) => n + s.max(1),
            SnapshotSchedule::Log => {
                if n < 1000 {
                    n + 1
                } else {
                    n + (n / 100).max(1)
                }
            }
            SnapshotSchedule::Final => end.max(n + 1),
        }
    }
}

impl std::str::FromStr for SnapshotSchedule {
    type Err = crate::Error;

    /// `log`, `final`, or a stride such as `1000`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "log" => Ok(Self::Log),
            "final" => Ok(Self::Final),
            other => match other.parse::<u64>() {
                Ok(0) => Err(invalid("snapshot stride must be at least 1")),
                Ok(k) => Ok(Self::Every(k)),
                Err(_) => Err(invalid(format!("unknown snapshot schedule `{other}`"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub n: u64,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Terminal {
    pub n: u64,
    pub vertices: usize,
    pub d: Vec<u64>,
    pub r: Vec<u64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl Terminal {
    fn of(state: &GraphState) -> Self {
        Self {
            n: state.n,
            vertices: state.vertex_count(),
            d: state.d.clone(),
            r: state.r.clone(),
            y: state.y(),
            z: state.z(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub seed: u64,
    pub m: usize,
    pub n0: u64,
    pub snapshots: Vec<Snapshot>,
    pub terminal: Terminal,
}

impl Trajectory {
    pub fn to_csv(&self) -> String {
        let n = self.terminal.d.len();
        let mut out = String::from("n");
        for i in 1..=n {
            write!(out, ",Y_{i}").unwrap();
        }
        for i in 1..=n {
            write!(out, ",Z_{i}").unwrap();
        }
        out.push('\n');
        for s in &self.snapshots {
            write!(out, "{}", s.n).unwrap();
            for v in s.y.iter().chain(&s.z) {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Max minus min of `Z_i` over snapshots with index in the final half.
    pub fn late_amplitude(&self, i: usize) -> f64 {
        let half = &self.snapshots[self.snapshots.len() / 2..];
        let (lo, hi) = half
            .iter()
            .map(|s| s.z[i])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        hi - lo
    }
}

/// Spread `max_{i,j} |Z_i - Z_j|`.
pub fn spread(z: &[f64]) -> f64 {
    let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub rule: TypeRule,
    pub cs: CommunityStructure,
    pub steps: u64,
    pub seed: u64,
    pub colors: Colors,
    pub snapshot: SnapshotSchedule,
}

impl SimConfig {
    pub fn new(rule: TypeRule, cs: CommunityStructure, steps: u64, seed: u64) -> Self {
        Self {
            rule,
            cs,
            steps,
            seed,
            colors: Colors::Random,
            snapshot: SnapshotSchedule::Log,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(invalid("the number of steps must be at least 1"));
        }
        if self.steps > u32::MAX as u64 / 2 {
            return Err(invalid(format!(
                "{} steps exceeds the supported maximum",
                self.steps
            )));
        }
        if let SnapshotSchedule::Every(0) = self.snapshot {
            return Err(invalid("snapshot stride must be at least 1"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn run(&self) -> Result<Trajectory> {
        self.validate()?;
        let mut sim = Simulation::new(self.rule.clone(), self.cs.clone(), &self.colors, self.seed)?;
        Ok(sim.run(self.steps, &self.snapshot, self.seed))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelStat {
    pub count: usize,
    pub frequency: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replica {
    pub index: usize,
    pub seed: u64,
    pub label: String,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub base_seed: u64,
    pub n_seeds: usize,
    pub labels: BTreeMap<String, LabelStat>,
    pub replicas: Vec<Replica>,
}

impl MonteCarloSummary {
    pub fn frequency(&self, label: &str) -> f64 {
        self.labels.get(label).map_or(0.0, |s| s.frequency)
    }

    pub fn from_replicas(base_seed: u64, replicas: Vec<Replica>) -> Self {
        let n = replicas.len();
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for r in &replicas {
            *counts.entry(r.label.clone()).or_default() += 1;
        }
        let labels = counts
            .into_iter()
            .map(|(label, count)| {
                let (lo, hi) = wilson_interval(count, n);
                (
                    label,
                    LabelStat {
                        count,
                        frequency: count as f64 / n as f64,
                        wilson_lo: lo,
                        wilson_hi: hi,
                    },
                )
            })
            .collect();
        Self {
            base_seed,
            n_seeds: n,
            labels,
            replicas,
        }
    }
}

/// Seed of replica `index` under base seed `base`.
pub fn replica_seed(base: u64, index: usize) -> u64 {
    base ^ index as u64
}

/// Runs `n_seeds` replicas in parallel and applies `f` to each trajectory.
/// Results are ordered by replica index.
pub fn monte_carlo_with<T, F>(config: &SimConfig, n_seeds: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, Trajectory) -> T + Sync,
{
    if n_seeds == 0 {
        return Err(invalid("at least one seed is required"));
    }
    config.validate()?;
    (0..n_seeds)
        .into_par_iter()
        .map(|idx| {
            config
                .with_seed(replica_seed(config.seed, idx))
                .run()
                .map(|t| f(idx, t))
        })
        .collect()
}

/// Runs replicas and labels each by its terminal `Z` vector.
pub fn monte_carlo<C>(
    config: &SimConfig,
    n_seeds: usize,
    classifier: C,
) -> Result<MonteCarloSummary>
where
    C: Fn(&[f64]) -> String + Sync,
{
    let replicas = monte_carlo_with(config, n_seeds, |index, t| Replica {
        index,
        seed: t.seed,
        label: classifier(&t.terminal.z),
        z: t.terminal.z,
        y: t.terminal.y,
    })?;
    Ok(MonteCarloSummary::from_replicas(config.seed, replicas))
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}
