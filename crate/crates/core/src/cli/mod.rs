//! Command line front end: rule analysis, structure queries, simulation,
//! Monte Carlo runs, registered experiments and sweeps.

pub mod config;
pub mod experiments;
pub mod sweep;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::error::{invalid, Error, Result};
use crate::field::{find_stationary_points, theta_crit_bisect, ThetaCrit};
use crate::rules::{FixedPointSet, TypeRule};
use crate::sim::{monte_carlo, spread, MonteCarloSummary, SimConfig};
use crate::structure::{make_a_theta, CommunityStructure};
use config::RunConfig;
use experiments::parse_list;

#[derive(Debug, Parser)]
#[command(
    name = "pacomm",
    version,
    about = "Two-type preferential attachment with communities"
)]
pub struct Cli {
    /// TOML or JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed (overrides the configuration file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fixed points of R and their classification.
    AnalyzeRule(RuleArgs),
    /// Limiting edge-end measure of a community structure.
    SolveNu(StructureArgs),
    /// Stationary points of the restricted field, as CSV.
    StationaryPoints {
        #[command(flatten)]
        rule: RuleArgs,
        #[command(flatten)]
        structure: StructureArgs,
        /// Comma list of theta values (requires --a1).
        #[arg(long)]
        thetas: Option<String>,
        /// Newton starts per coordinate.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Brackets the theta at which a stationary branch changes stability.
    ThetaCrit {
        #[command(flatten)]
        rule: RuleArgs,
        #[command(flatten)]
        structure: StructureArgs,
        /// Starting point of the branch, comma separated.
        #[arg(long)]
        z_start: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
    },
    /// One trajectory, written as CSV.
    Simulate(SimArgs),
    /// Replicas with labelled terminal states.
    MonteCarlo {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        seeds: Option<usize>,
        /// `split:<t>`, `band:<centre>:<width>` or `spread:<t>`.
        #[arg(long)]
        classifier: Option<String>,
    },
    /// A registered scenario.
    Experiment {
        /// Scenario name; omit with --list.
        name: Option<String>,
        /// Parameter override `key=value`, repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        list: bool,
    },
    /// Sweeps one parameter of an experiment or analytic target.
    Sweep {
        /// Experiment name, `minority-rprime` or `majority-branch`.
        #[arg(long)]
        target: String,
        #[arg(long)]
        param: String,
        /// Comma separated values.
        #[arg(long)]
        values: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct RuleArgs {
    /// e.g. `majority:m=3`, `minority:m=7`, `explicit:p=[0.25,0,1,1]`.
    #[arg(long)]
    pub rule: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct StructureArgs {
    /// Attractiveness rows separated by `;`, entries by `,`.
    #[arg(long = "a")]
    pub a: Option<String>,
    /// Base matrix for the theta family.
    #[arg(long = "a1")]
    pub a1: Option<String>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub mu: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub rule: RuleArgs,
    #[command(flatten)]
    pub structure: StructureArgs,
    /// Number of steps T.
    #[arg(long)]
    pub steps: Option<u64>,
    /// `random`, `balanced` or a list like `red,blue`.
    #[arg(long)]
    pub colors: Option<String>,
    /// `log`, `final` or a stride.
    #[arg(long)]
    pub snapshot: Option<String>,
}

pub fn parse_matrix(text: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';').map(parse_list).collect()
}

/// Runs the command line and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Executes a parsed command and returns what it prints.
pub fn run(cli: Cli) -> Result<String> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::AnalyzeRule(r) => {
            r.merge(&mut cfg);
            analyze_rule(&cfg.rule()?, out)
        }
        Command::SolveNu(s) => {
            s.merge(&mut cfg)?;
            solve_nu(&cfg.structure()?, out)
        }
        Command::StationaryPoints {
            rule,
            structure,
            thetas,
            grid,
        } => {
            rule.merge(&mut cfg);
            structure.merge(&mut cfg)?;
            stationary_points(&cfg, thetas.as_deref(), grid, out)
        }
        Command::ThetaCrit {
            rule,
            structure,
            z_start,
            from,
            to,
        } => {
            rule.merge(&mut cfg);
            structure.merge(&mut cfg)?;
            theta_crit(&cfg, &parse_list(&z_start)?, from, to, out)
        }
        Command::Simulate(s) => {
            s.merge(&mut cfg)?;
            let traj = cfg.sim_config()?.run()?;
            emit(out, traj.to_csv())
        }
        Command::MonteCarlo {
            sim,
            seeds,
            classifier,
        } => {
            sim.merge(&mut cfg)?;
            if seeds.is_some() {
                cfg.seeds = seeds;
            }
            if classifier.is_some() {
                cfg.classifier = classifier;
            }
            monte_carlo_cmd(&cfg, out)
        }
        Command::Experiment { name, set, list } => {
            if list {
                let mut s = String::new();
                for e in experiments::registry() {
                    let params: Vec<String> = e
                        .defaults()
                        .keys()
                        .map(|k| format!("{k}={}", e.defaults().get(k).unwrap()))
                        .collect();
                    writeln!(
                        s,
                        "{:<22} {}\n{:<22} defaults: {}",
                        e.name,
                        e.about,
                        "",
                        params.join(" ")
                    )
                    .unwrap();
                }
                return Ok(s);
            }
            let name = name.ok_or_else(|| invalid("experiment name required (or --list)"))?;
            let overrides = set
                .iter()
                .map(|s| experiments::parse_override(s))
                .collect::<Result<Vec<_>>>()?;
            let run = experiments::run_experiment(&name, &overrides, cfg.seed.unwrap_or(0))?;
            if let Some(dir) = out {
                experiments::write_outcome(&run, dir)?;
            }
            Ok(experiments::report(&run))
        }
        Command::Sweep {
            target,
            param,
            values,
            set,
        } => {
            let overrides = set
                .iter()
                .map(|s| experiments::parse_override(s))
                .collect::<Result<Vec<_>>>()?;
            let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
            let rows = sweep::sweep(&target, &param, &values, &overrides, cfg.seed.unwrap_or(0))?;
            emit(out, sweep::to_csv(&rows))
        }
    }
}

impl RuleArgs {
    fn merge(self, cfg: &mut RunConfig) {
        if self.rule.is_some() {
            cfg.rule = self.rule;
        }
    }
}

impl StructureArgs {
    fn merge(self, cfg: &mut RunConfig) -> Result<()> {
        let s = &mut cfg.structure;
        if let Some(a) = self.a {
            s.a = Some(parse_matrix(&a)?);
            s.a1 = None;
            s.theta = None;
            s.n = None;
        }
        if let Some(a1) = self.a1 {
            s.a1 = Some(parse_matrix(&a1)?);
            s.a = None;
            s.n = None;
        }
        if self.theta.is_some() {
            s.theta = self.theta;
        }
        if let Some(mu) = self.mu {
            s.mu = Some(parse_list(&mu)?);
        }
        Ok(())
    }
}

impl SimArgs {
    fn merge(self, cfg: &mut RunConfig) -> Result<()> {
        self.rule.merge(cfg);
        self.structure.merge(cfg)?;
        if self.steps.is_some() {
            cfg.steps = self.steps;
        }
        if self.colors.is_some() {
            cfg.colors = self.colors;
        }
        if self.snapshot.is_some() {
            cfg.snapshot = self.snapshot;
        }
        Ok(())
    }
}

/// Writes `text` to `out` when given, otherwise returns it for printing.
fn emit(out: Option<&Path>, text: String) -> Result<String> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn analyze_rule(rule: &TypeRule, out: Option<&Path>) -> Result<String> {
    let fixed = rule.fixed_points()?;
    let mut s = String::new();
    writeln!(s, "rule {}  m={}  p={:?}", rule.name(), rule.m(), rule.p()).unwrap();
    writeln!(
        s,
        "increasing: {}  colour-symmetric: {}",
        rule.is_increasing(),
        rule.is_colour_symmetric()
    )
    .unwrap();
    match &fixed {
        FixedPointSet::Continuum => writeln!(s, "every z in [0,1] is fixed").unwrap(),
        FixedPointSet::Isolated(points) => {
            writeln!(s, "{:>20}  {:>20}  {:<18} linear", "z", "R'(z)", "kind").unwrap();
            for p in points {
                writeln!(
                    s,
                    "{:>20}  {:>20}  {:<18} {}",
                    p.z,
                    p.rprime,
                    p.kind.to_string(),
                    p.linear
                )
                .unwrap();
            }
        }
    }
    let two_point = rule.check_two_point_condition().ok();
    if let Some(tp) = &two_point {
        writeln!(s, "two-point condition around {}: {}", tp.z_star, tp.holds).unwrap();
    }
    if let Some(path) = out {
        let value = json!({
            "rule": rule.name(),
            "m": rule.m(),
            "p": rule.p(),
            "continuum": matches!(fixed, FixedPointSet::Continuum),
            "fixed_points": fixed.points(),
            "two_point": two_point,
        });
        emit(
            Some(path),
            serde_json::to_string_pretty(&value).expect("serializes") + "\n",
        )?;
    }
    Ok(s)
}

fn solve_nu(cs: &CommunityStructure, out: Option<&Path>) -> Result<String> {
    let nu = cs.solve_nu()?;
    let text = serde_json::to_string_pretty(&json!({
        "nu": nu.nu,
        "residual": nu.residual,
        "iterations": nu.iterations,
        "common_reachability": cs.gamma().common_reachability(),
    }))
    .expect("serializes")
        + "\n";
    emit(out, text)
}

fn stationary_points(
    cfg: &RunConfig,
    thetas: Option<&str>,
    grid: Option<usize>,
    out: Option<&Path>,
) -> Result<String> {
    let rule = cfg.rule()?;
    let cases: Vec<(Option<f64>, CommunityStructure)> = match thetas {
        Some(list) => {
            let a1 = cfg
                .structure
                .a1
                .as_ref()
                .ok_or_else(|| invalid("--thetas needs a base matrix --a1"))?;
            let a1 = crate::numerics::SmallMatrix::from_rows(a1)?;
            let mu = cfg
                .structure
                .mu
                .clone()
                .unwrap_or_else(|| vec![1.0 / a1.dim() as f64; a1.dim()]);
            parse_list(list)?
                .into_iter()
                .map(|t| {
                    Ok((
                        Some(t),
                        CommunityStructure::new(make_a_theta(&a1, t)?, mu.clone())?,
                    ))
                })
                .collect::<Result<_>>()?
        }
        None => vec![(cfg.structure.theta, cfg.structure()?)],
    };
    let n = cases[0].1.n();
    let mut csv = String::from("theta");
    for i in 1..=n {
        write!(csv, ",z_{i}").unwrap();
    }
    csv.push_str(",max_re_eig,stability\n");
    for (theta, cs) in &cases {
        for p in find_stationary_points(&rule, cs, grid)? {
            let t = theta.map(|t| t.to_string()).unwrap_or_default();
            write!(csv, "{t}").unwrap();
            for z in &p.z {
                write!(csv, ",{z}").unwrap();
            }
            writeln!(csv, ",{},{}", p.max_re, p.stability).unwrap();
        }
    }
    emit(out, csv)
}

fn theta_crit(
    cfg: &RunConfig,
    z_start: &[f64],
    from: f64,
    to: f64,
    out: Option<&Path>,
) -> Result<String> {
    let rule = cfg.rule()?;
    let a1 = cfg
        .structure
        .a1
        .as_ref()
        .ok_or_else(|| invalid("theta-crit needs a base matrix --a1"))?;
    let a1 = crate::numerics::SmallMatrix::from_rows(a1)?;
    let mu = cfg
        .structure
        .mu
        .clone()
        .unwrap_or_else(|| vec![1.0 / a1.dim() as f64; a1.dim()]);
    if z_start.len() != a1.dim() {
        return Err(invalid(format!(
            "z-start has {} entries, structure has {}",
            z_start.len(),
            a1.dim()
        )));
    }
    let family = |t: f64| CommunityStructure::new(make_a_theta(&a1, t)?, mu.clone());
    let text = match theta_crit_bisect(&rule, family, z_start, from, to)? {
        ThetaCrit::Crossing { lo, hi } => format!("crossing in [{lo}, {hi}]\n"),
        ThetaCrit::NoCrossing {
            theta_end,
            max_re_end,
        } => {
            format!("no crossing up to theta = {theta_end} (max Re = {max_re_end})\n")
        }
    };
    emit(out, text)
}

/// Terminal-state classifier from `split:<t>`, `band:<c>:<w>` or `spread:<t>`.
pub fn parse_classifier(spec: &str) -> Result<Box<dyn Fn(&[f64]) -> String + Sync>> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| invalid(format!("bad classifier number `{s}`: {e}")))
    };
    Ok(match parts.as_slice() {
        ["split", t] => {
            let t = num(t)?;
            Box::new(move |z: &[f64]| if spread(z) > t { "split" } else { "together" }.into())
        }
        ["spread", t] => {
            let t = num(t)?;
            Box::new(move |z: &[f64]| if spread(z) < t { "synced" } else { "spread" }.into())
        }
        ["band", c, w] => {
            let (c, w) = (num(c)?, num(w)?);
            Box::new(move |z: &[f64]| {
                if z.iter().all(|v| (v - c).abs() < w) {
                    "in-band"
                } else {
                    "out"
                }
                .into()
            })
        }
        _ => return Err(invalid(format!("unknown classifier `{spec}`"))),
    })
}

fn monte_carlo_cmd(cfg: &RunConfig, out: Option<&Path>) -> Result<String> {
    let sim: SimConfig = cfg.sim_config()?;
    let seeds = cfg
        .seeds
        .ok_or_else(|| Error::Config("missing `seeds`".into()))?;
    let classifier = parse_classifier(cfg.classifier.as_deref().unwrap_or("spread:0.05"))?;
    let summary: MonteCarloSummary = monte_carlo(&sim, seeds, classifier)?;
    let value = json!({
        "config_hash": cfg.hash(),
        "base_seed": summary.base_seed,
        "n_seeds": summary.n_seeds,
        "labels": summary.labels,
        "replicas": summary.replicas,
    });
    emit(
        out,
        serde_json::to_string_pretty(&value).expect("serializes") + "\n",
    )
}
