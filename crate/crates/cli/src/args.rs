use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use influence_core::simulation::ThetaTransform;

use crate::config::{parse_transform, Alpha, KernelKind, LensChoice, RunConfig};

/// Cascade influence estimation and pairwise-comparison ranking.
#[derive(Debug, Parser)]
#[command(name = "influence", version, propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-user influence from a file of retweet cascades.
    Influence(InfluenceArgs),
    /// Build a following or lexical embedding cache for the homophilic lenses.
    Embed(EmbedArgs),
    /// Quicksort ranking with a synthetic noisy worker, then a pooled fit.
    Simulate(SimulateArgs),
    /// Mean rank correlation over a grid of target counts and budgets.
    BudgetGrid(BudgetGridArgs),
    /// Estimate the worker noise from an observed accuracy.
    FitNoise(FitNoiseArgs),
    /// Expected worker accuracy as a function of noise.
    NoiseCurve(NoiseCurveArgs),
    /// Fit intensities to a comparison log.
    Rank(RankArgs),
    /// Compare an estimated ranking with a ground truth.
    Eval(EvalArgs),
    /// Run the annotation service.
    Serve(ServeArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Influence(_) => "influence",
            Command::Embed(_) => "embed",
            Command::Simulate(_) => "simulate",
            Command::BudgetGrid(_) => "budget-grid",
            Command::FitNoise(_) => "fit-noise",
            Command::NoiseCurve(_) => "noise-curve",
            Command::Rank(_) => "rank",
            Command::Eval(_) => "eval",
            Command::Serve(_) => "serve",
        }
    }

    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Influence(a) => &a.common,
            Command::Embed(a) => &a.common,
            Command::Simulate(a) => &a.common,
            Command::BudgetGrid(a) => &a.common,
            Command::FitNoise(a) => &a.common,
            Command::NoiseCurve(a) => &a.common,
            Command::Rank(a) => &a.common,
            Command::Eval(a) => &a.common,
            Command::Serve(a) => &a.common,
        }
    }

    /// Layers this command's flags over `cfg`.
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(seed) = self.common().seed {
            cfg.seed = seed;
        }
        match self {
            Command::Influence(a) => a.model.apply(cfg),
            Command::Embed(a) => a.model.apply(cfg),
            Command::Simulate(a) => {
                a.sim.apply(cfg);
                set(&mut cfg.simulation.n_targets, a.n_targets);
                set(&mut cfg.simulation.budget, a.budget);
            }
            Command::BudgetGrid(a) => {
                a.sim.apply(cfg);
                set(&mut cfg.simulation.replications, a.replications);
            }
            Command::FitNoise(_) | Command::Eval(_) => {}
            Command::NoiseCurve(a) => {
                a.sim.apply(cfg);
                set(&mut cfg.simulation.n_targets, a.n_targets);
            }
            Command::Rank(a) => set(&mut cfg.ranking.lambda, a.lambda),
            Command::Serve(a) => {
                set(&mut cfg.ranking.lambda, a.lambda);
                set(&mut cfg.service.ban_threshold, a.ban_threshold);
                set(&mut cfg.service.lease_timeout_secs, a.lease_timeout);
                set(&mut cfg.service.batch_size, a.batch_size);
                set(&mut cfg.service.parallelism, a.parallelism);
            }
        }
    }
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base seed for every random stream.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 1 forces the sequential path. Defaults to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Shape of the memory kernel that decays a tweet's excitation over time.
    #[arg(long, value_enum)]
    pub kernel: Option<KernelKind>,
    /// Decay rate r of the memory kernel.
    #[arg(long)]
    pub r: Option<f64>,
    /// Cutoff c of the power-law kernel (seconds).
    #[arg(long)]
    pub c: Option<f64>,
    /// Exponent b applied to follower-count marks; 0 ignores marks.
    #[arg(long)]
    pub mark_exponent: Option<f64>,
    /// Lens used for pairwise conductance between users.
    #[arg(long, value_enum)]
    pub conductance: Option<LensChoice>,
    /// Baseline conductance beta, the floor for users with no tie.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Share alpha of its capital an event passes to its parent, or `disabled`.
    #[arg(long)]
    pub alpha: Option<Alpha>,
    /// Number of most-followed users spanning the following embedding.
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Hash buckets of the lexical embedding.
    #[arg(long)]
    pub dimension: Option<usize>,
    /// Largest cascade accepted; bigger cascades are rejected.
    #[arg(long)]
    pub max_events: Option<usize>,
}

impl ModelArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.kernel.kind, self.kernel);
        set(&mut cfg.kernel.r, self.r);
        set(&mut cfg.kernel.c, self.c);
        set(&mut cfg.marks.b, self.mark_exponent);
        set(&mut cfg.conductance.lens, self.conductance);
        set(&mut cfg.conductance.beta, self.beta);
        set(&mut cfg.capital.alpha, self.alpha);
        set(&mut cfg.conductance.top_k, self.top_k);
        set(&mut cfg.conductance.dimension, self.dimension);
        set(&mut cfg.engine.max_events, self.max_events);
    }
}

#[derive(Debug, Args)]
pub struct ConductanceInputs {
    /// Follower edges, CSV `user,follower` meaning "follower follows user".
    #[arg(long)]
    pub followers: Option<PathBuf>,
    /// User documents, one JSON object `{user, text}` per line.
    #[arg(long)]
    pub documents: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InfluenceArgs {
    /// Cascades, one JSON object `{cascade_id, events: [{user, t, mark}]}` per line.
    #[arg(long)]
    pub cascades: PathBuf,
    #[command(flatten)]
    pub inputs: ConductanceInputs,
    /// Prebuilt embedding cache for the following or lexical lens.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// User influence CSV `user,score,tweet_count`; `-` for stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
    /// Optional per-tweet CSV `cascade_id,index,user,score`.
    #[arg(long)]
    pub tweets_out: Option<PathBuf>,
    /// Skip malformed lines and rejected cascades instead of failing.
    #[arg(long)]
    pub skip_bad: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub inputs: ConductanceInputs,
    /// Cache file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Build time recorded in the cache header, in Unix seconds. Defaults to now.
    #[arg(long)]
    pub built_at: Option<u64>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Worker noise lambda; larger values push answers toward coin flips.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Exponent of the power law the latent intensities are drawn from.
    #[arg(long)]
    pub exponent: Option<f64>,
    /// Maximum number of quicksort runs.
    #[arg(long)]
    pub runs_cap: Option<u32>,
    /// How raw power-law draws become intensities.
    #[arg(long, value_parser = parse_transform)]
    pub transform: Option<ThetaTransform>,
}

impl SimArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let s = &mut cfg.simulation;
        set(&mut s.lambda, self.lambda);
        set(&mut s.exponent, self.exponent);
        set(&mut s.runs_cap, self.runs_cap);
        set(&mut s.transform, self.transform);
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of synthetic targets.
    #[arg(long = "targets")]
    pub n_targets: Option<usize>,
    /// Comparison budget; the last quicksort run is cut short when it runs out.
    #[arg(long)]
    pub budget: Option<u64>,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Comparison log, one JSON record per line.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// True intensities, CSV `target,theta`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Fitted ranking, CSV `target,theta,rank,percentile`.
    #[arg(long)]
    pub ranking: Option<PathBuf>,
    /// Summary JSON; `-` for stdout.
    #[arg(long, default_value = "-")]
    pub summary: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct BudgetGridArgs {
    /// Target counts, comma separated.
    #[arg(long = "targets", value_delimiter = ',', num_args = 1..)]
    pub n_list: Vec<usize>,
    /// Budgets, comma separated.
    #[arg(long = "budgets", value_delimiter = ',', num_args = 1..)]
    pub budgets: Vec<u64>,
    /// Replications per cell.
    #[arg(long)]
    pub replications: Option<usize>,
    /// Replace lambda by the value at which workers reach this accuracy on
    /// the last listed cell.
    #[arg(long)]
    pub calibrate: Option<f64>,
    /// Grid CSV `n,budget,mean_spearman,stddev,replications`; `-` for stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct FitNoiseArgs {
    /// Comparison log whose pairs the accuracy refers to.
    #[arg(long)]
    pub records: PathBuf,
    /// Proxy intensities that decide the correct answer, CSV with an id
    /// column and a `score` or `theta` column.
    #[arg(long)]
    pub proxy: PathBuf,
    /// Proxy column to read.
    #[arg(long)]
    pub proxy_column: Option<String>,
    /// Observed accuracy. Without this or --summary, the agreement of the
    /// log with the proxy is used.
    #[arg(long, conflicts_with = "summary")]
    pub accuracy: Option<f64>,
    /// Take the accuracy from a `simulate` summary.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Result JSON; `-` for stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct NoiseCurveArgs {
    /// Intensities, CSV with an id column and a `score` or `theta` column.
    /// Sampled from the simulation settings when absent.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Comparison log supplying the pairs; all pairs when absent.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Number of sampled targets when --truth is absent.
    #[arg(long = "targets")]
    pub n_targets: Option<usize>,
    /// Grid points, log spaced.
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lambda_min: f64,
    #[arg(long, default_value_t = 1e3)]
    pub lambda_max: f64,
    /// Curve CSV `lambda,expected_accuracy`; `-` for stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Comparison log, one JSON record per line.
    #[arg(long)]
    pub records: PathBuf,
    /// Optional file listing every target, one per line, so targets never
    /// compared still appear.
    #[arg(long)]
    pub targets: Option<PathBuf>,
    /// Noise lambda held fixed during the fit.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Ranking CSV `target,theta,rank,percentile`; `-` for stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Estimated scores, CSV with an id column and a score column.
    #[arg(long)]
    pub estimate: PathBuf,
    /// Ground-truth scores in the same format.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub estimate_column: Option<String>,
    #[arg(long)]
    pub truth_column: Option<String>,
    /// Metrics JSON; `-` for stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Target profiles, one JSON object per line.
    #[arg(long)]
    pub targets: PathBuf,
    /// Proxy profiles, one JSON object per line.
    #[arg(long)]
    pub proxies: PathBuf,
    /// Event log; replayed if it exists.
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Port to bind; 0 picks a free one.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Make sure at least this many quicksort runs are requested.
    #[arg(long)]
    pub runs: Option<u32>,
    /// Token expected in the x-admin-token header of admin requests.
    #[arg(long)]
    pub admin_token: Option<String>,
    /// Noise lambda of the live ranking estimate.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Accuracy on clear-cut pairs below which a worker is banned.
    #[arg(long)]
    pub ban_threshold: Option<f64>,
    /// Seconds before an unanswered task returns to the queue.
    #[arg(long)]
    pub lease_timeout: Option<u64>,
    /// Tasks per batch.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Quicksort partitions with questions in flight at once.
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}
