use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use locokernel::config::KernelConfig;
use locokernel::control::{CommandSample, Leg};
use locokernel::encoder::{encode, full_observation, EncoderParams, DEFAULT_HEADS};
use locokernel::harness::{evaluate_logs, log_files, run_eval, CriteriaMode, EvalPlan, PolicySpec};
use locokernel::observation::{HeightmapDrift, ObservationFrame, RobotState};
use locokernel::reward::{compute_rewards, StepContext};
use locokernel::stability::{evaluate, StabilityKind};
use locokernel::terrain::{generate_terrain_with, Heightfield, TerrainKind, TerrainSpec};
use locokernel::{Error, Result};

#[derive(Parser)]
#[command(name = "locokernel", version, about = "Quadruped locomotion kernel: terrain, observations, rewards and evaluation")]
struct Cli {
    /// TOML configuration file; defaults apply to anything it omits.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a terrain heightfield.
    Terrain(TerrainArgs),
    /// Build an observation frame for a robot state on a terrain.
    Obs(ObsArgs),
    /// Write freshly initialized encoder parameters.
    Params(ParamsArgs),
    /// Run the encoder on an observation frame.
    Encode(EncodeArgs),
    /// Signed stability margin of a robot state.
    Stability(StabilityArgs),
    /// Reward breakdown of one step.
    Reward(RewardArgs),
    /// Foot position of one leg.
    Fk(FkArgs),
    /// Batch evaluation, simulated or from ingested logs.
    Eval(EvalArgs),
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Args)]
struct TerrainSel {
    /// Terrain kind, e.g. `stones` or `rough+gaps`.
    #[arg(long, default_value = "smooth")]
    kind: TerrainKind,
    #[arg(long, default_value_t = 0)]
    level: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Extent as `LENGTHxWIDTH` in meters.
    #[arg(long, value_parser = parse_extent)]
    extent: Option<[f64; 2]>,
}

impl TerrainSel {
    fn spec(&self) -> TerrainSpec {
        let spec = TerrainSpec::new(self.kind, self.level, self.seed);
        match self.extent {
            Some(e) => spec.with_extent(e),
            None => spec,
        }
    }
}

#[derive(Args)]
struct TerrainArgs {
    #[command(flatten)]
    sel: TerrainSel,
    /// Output heightfield text file; a summary is printed without it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ObsArgs {
    /// Heightfield file; generated from the selection flags otherwise.
    #[arg(long)]
    heightfield: Option<PathBuf>,
    #[command(flatten)]
    sel: TerrainSel,
    /// Robot state JSON; a robot standing at the origin otherwise.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Base-frame command `vx,vy,wz`.
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,0")]
    command: [f64; 3],
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ParamsArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_HEADS)]
    heads: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    params: PathBuf,
    /// Observation frame JSON as written by `obs`.
    #[arg(long)]
    frame: PathBuf,
    /// Also print the attention weights.
    #[arg(long)]
    attention: bool,
}

#[derive(Args)]
struct StabilityArgs {
    #[arg(long)]
    state: PathBuf,
    /// cop, com or cp.
    #[arg(long, default_value = "cop")]
    kind: StabilityKind,
    /// Terrain height under the base, for the capture point.
    #[arg(long, default_value_t = 0.0)]
    ground: f64,
}

#[derive(Args)]
struct RewardArgs {
    /// Step context JSON.
    #[arg(long)]
    context: PathBuf,
}

#[derive(Args)]
struct FkArgs {
    /// FR, FL, RR or RL.
    #[arg(long, value_parser = parse_leg)]
    leg: Leg,
    /// Joint angles `abduction,hip,knee` in radians.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    q: [f64; 3],
}

#[derive(Args)]
struct EvalArgs {
    /// Comma-separated terrain kinds.
    #[arg(long, value_delimiter = ',', default_value = "smooth")]
    terrain: Vec<TerrainKind>,
    /// Levels as `A..B` (inclusive) or a comma list.
    #[arg(long, value_parser = parse_levels, default_value = "0")]
    levels: Levels,
    /// Episodes per group.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value = "scripted:trot")]
    policy: PolicySpec,
    /// Comma-separated command speeds, m/s; the configured sweep otherwise.
    #[arg(long, value_delimiter = ',')]
    speed: Vec<f64>,
    /// Episode length, s.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// fixed or half_expected.
    #[arg(long)]
    criteria: Option<CriteriaMode>,
    /// Use nominal physics instead of per-episode randomization.
    #[arg(long)]
    no_randomize: bool,
    /// Evaluate the `*.jsonl` logs in this directory instead of simulating.
    #[arg(long)]
    ingest: Option<PathBuf>,
    /// Write every simulated trajectory here.
    #[arg(long)]
    logs: Option<PathBuf>,
    /// Results table; printed to stdout without it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, all cores by default.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Debug)]
struct Levels(Vec<u8>);

fn parse_levels(s: &str) -> std::result::Result<Levels, String> {
    let bad = |_| format!("bad level list `{s}`");
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u8, u8) = (a.trim().parse().map_err(bad)?, b.trim().parse().map_err(bad)?);
        if a > b {
            return Err(format!("empty level range `{s}`"));
        }
        return Ok(Levels((a..=b).collect()));
    }
    s.split(',').map(|v| v.trim().parse().map_err(bad)).collect::<std::result::Result<_, _>>().map(Levels)
}

fn parse_floats<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let v: Vec<f64> = s
        .split(|c| c == ',' || c == 'x')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected {N} values, got {}", v.len()))
}

fn parse_extent(s: &str) -> std::result::Result<[f64; 2], String> {
    parse_floats::<2>(s)
}

fn parse_vec3(s: &str) -> std::result::Result<[f64; 3], String> {
    parse_floats::<3>(s)
}

fn parse_leg(s: &str) -> std::result::Result<Leg, String> {
    Leg::ALL
        .into_iter()
        .find(|l| l.label().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown leg `{s}` (expected FR, FL, RR or RL)"))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn standing_state(hf: &Heightfield, cfg: &KernelConfig) -> Result<RobotState> {
    let env = locokernel::harness::KinematicEnv::new(
        hf,
        cfg.control,
        cfg.stepper.clone(),
        locokernel::harness::RandomizedParams::nominal(),
        CommandSample::forward(0.0),
        [0.0, 0.0],
        0.0,
    )?;
    Ok(env.state().clone())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => KernelConfig::load(p)?,
        None => KernelConfig::default(),
    };
    match cli.command {
        Command::Terrain(a) => {
            let spec = a.sel.spec();
            let hf = generate_terrain_with(&spec, &cfg.terrain)?;
            match a.out {
                Some(p) => hf.save(&p)?,
                None => {
                    let voids = hf.cell_kinds().iter().filter(|k| **k == locokernel::terrain::CellKind::Void).count();
                    let (lo, hi) = hf
                        .heights()
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &h| (lo.min(h), hi.max(h)));
                    emit(
                        None,
                        &format!(
                            "{} level {} seed {}: {}x{} cells at {} m, heights [{lo:.3}, {hi:.3}], {voids} void\n",
                            spec.kind,
                            spec.level,
                            spec.seed,
                            hf.rows(),
                            hf.cols(),
                            hf.resolution()
                        ),
                    )?;
                }
            }
        }
        Command::Obs(a) => {
            let hf = match &a.heightfield {
                Some(p) => Heightfield::load(p)?,
                None => generate_terrain_with(&a.sel.spec(), &cfg.terrain)?,
            };
            let state = match &a.state {
                Some(p) => read_json(p)?,
                None => standing_state(&hf, &cfg)?,
            };
            state.validate()?;
            let frame = ObservationFrame::build(
                &hf,
                &state,
                &a.command,
                &[0.0; locokernel::NUM_JOINTS],
                &HeightmapDrift::default(),
                &cfg.observation,
            )?;
            emit(a.out.as_deref(), &json(&frame))?;
        }
        Command::Params(a) => {
            EncoderParams::init(a.seed, a.heads)?.save(&a.out)?;
        }
        Command::Encode(a) => {
            let params = EncoderParams::load(&a.params)?;
            let frame: ObservationFrame = read_json(&a.frame)?;
            frame.validate()?;
            let out = encode(&frame, &params)?;
            #[derive(Serialize)]
            struct Encoded<'a> {
                z: &'a [f64],
                observation: Vec<f64>,
                #[serde(skip_serializing_if = "Option::is_none")]
                attention: Option<&'a [Vec<f64>]>,
            }
            let report = Encoded {
                z: out.z(),
                observation: full_observation(&frame, &params)?,
                attention: a.attention.then_some(&out.attention.weights[..]),
            };
            emit(None, &json(&report))?;
        }
        Command::Stability(a) => {
            let state: RobotState = read_json(&a.state)?;
            state.validate()?;
            let result = evaluate(&state, a.kind, a.ground, &cfg.reward.stability)?;
            emit(None, &json(&result))?;
        }
        Command::Reward(a) => {
            let ctx: StepContext = read_json(&a.context)?;
            emit(None, &json(&compute_rewards(&ctx, &cfg.reward)?))?;
        }
        Command::Fk(a) => {
            let p = cfg.control.geometry.forward_kinematics(a.leg, a.q);
            emit(None, &format!("{} {} {}\n", p[0], p[1], p[2]))?;
        }
        Command::Eval(a) => {
            let criteria = a.criteria.unwrap_or(cfg.eval.criteria);
            if let Some(jobs) = a.jobs {
                // Only fails if a global pool already exists, which is harmless.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
            }
            let table = if let Some(dir) = &a.ingest {
                let files = log_files(dir)?;
                if files.is_empty() {
                    return Err(Error::InvalidArgument(format!("no .jsonl logs in {}", dir.display())));
                }
                log::info!("evaluating {} logs from {}", files.len(), dir.display());
                evaluate_logs(&files, criteria, cfg.eval.min_distance)?
            } else {
                let speeds = if a.speed.is_empty() { cfg.eval.speeds.clone() } else { a.speed };
                let mut plan = EvalPlan::new(a.terrain, a.levels.0, speeds, a.n.unwrap_or(cfg.eval.n));
                plan.duration = a.duration.unwrap_or(cfg.eval.duration);
                plan.policy = a.policy;
                plan.seed = a.seed;
                plan.randomize = cfg.eval.randomize && !a.no_randomize;
                plan.ranges = cfg.randomization.clone();
                plan.criteria = criteria;
                plan.min_distance = cfg.eval.min_distance;
                plan.terrain_width = cfg.eval.terrain_width;
                plan.terrain = cfg.terrain.clone();
                plan.rollout = cfg.rollout();
                log::info!(
                    "running {} episodes",
                    plan.terrains.len() * plan.levels.len() * plan.speeds.len() * plan.n
                );
                run_eval(&plan, a.logs.as_deref())?
            };
            for w in &table.warnings {
                eprintln!("warning: {w}");
            }
            emit(a.out.as_deref(), &table.to_tsv())?;
        }
        Command::Config => emit(None, &cfg.to_toml())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
