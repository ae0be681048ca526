//! The `elvis` command line.
//!
//! Every subcommand writes into an `--out` directory and leaves a
//! `<subcommand>.manifest.json` next to its artifacts recording the full
//! argument set. All randomness comes from named seeds.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::baselines::{CentroidScorer, RandomScorer};
use crate::corpus::{corpus_stats, load_features, load_reviews, write_reviews, write_table};
use crate::dataset::{
    build_test_cases, build_train_set, filter_corpus, read_cases, read_pairs, split_holdout,
    write_cases, write_pairs, HoldoutPolicy,
};
use crate::eval::{evaluate_method, ElvisScorer, EvalFilters, Scorer};
use crate::group::{cold_start_explain, rank_for_user, UserSelector};
use crate::model::{load_checkpoint, save_checkpoint, ElvisModel, ModelConfig};
use crate::synth::{generate_synthetic, SynthConfig};
use crate::training::{grid_search, train, GridConfig, TrainConfig};

#[derive(Debug, Parser)]
#[command(
    name = "elvis",
    version,
    about = "Personalized photo explanations for item recommendations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic corpus with planted user tastes.
    Synth(SynthArgs),
    /// Corpus statistics and histograms.
    Stats(StatsArgs),
    /// Filter a corpus and hold out one review per user.
    Split(SplitArgs),
    /// Build the labeled training pairs and the test cases.
    Build(BuildArgs),
    /// Train a model on labeled pairs.
    Train(TrainArgs),
    /// Select the learning rate on a development split.
    Grid(GridArgs),
    /// Evaluate a method on test cases.
    Eval(EvalArgs),
    /// Rank an item's photos for one user.
    Rank(RankArgs),
    /// Rank an item's photos for a group of users.
    ExplainGroup(ExplainArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub users: usize,
    #[arg(long, default_value_t = 40)]
    pub items: usize,
    #[arg(long, default_value_t = 4)]
    pub clusters: usize,
    #[arg(long, default_value_t = 32)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 5.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.35)]
    pub review_p: f64,
    #[arg(long, default_value_t = 1)]
    pub min_photos: usize,
    #[arg(long, default_value_t = 4)]
    pub max_photos: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    #[arg(long)]
    pub reviews: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Drop photo-less reviews and repeated (user, item) reviews first.
    #[arg(long)]
    pub filter: bool,
    /// With `--test`, also write a totals table for the split.
    #[arg(long, requires = "test")]
    pub train: Option<PathBuf>,
    #[arg(long, requires = "train")]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub reviews: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed_split: u64,
    /// `random` or `recent`.
    #[arg(long, default_value = "random")]
    pub holdout: String,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub seed_sample: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 256)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 512)]
    pub hidden_dim: usize,
    #[arg(long, default_value_t = 1)]
    pub hidden_layers: usize,
    #[arg(long, default_value_t = 0.2)]
    pub dropout: f64,
    #[arg(long, default_value_t = 3)]
    pub seed_init: u64,
}

impl ModelArgs {
    fn config(&self, feature_dim: usize) -> ModelConfig {
        ModelConfig {
            feature_dim,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            hidden_layers: self.hidden_layers,
            dropout_rate: self.dropout,
            seed: self.seed_init,
            ..ModelConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LoopArgs {
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1024)]
    pub batch: usize,
    #[arg(long, default_value_t = 4)]
    pub seed_shuffle: u64,
    #[arg(long, default_value_t = 5)]
    pub seed_dropout: u64,
}

impl LoopArgs {
    fn config(&self, lr: f64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch,
            base_lr: lr,
            shuffle_seed: self.seed_shuffle,
            dropout_seed: self.seed_dropout,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: LoopArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "5e-3,1e-3,5e-4,1e-4,5e-5"
    )]
    pub lr_grid: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed_split: u64,
    #[arg(long, default_value_t = 2)]
    pub seed_sample: u64,
    #[arg(long, default_value = "random")]
    pub holdout: String,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: LoopArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Elvis,
    Random,
    Centroid,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Held-out reviews; the cases are built from them.
    #[arg(long, required_unless_present = "cases")]
    pub test: Option<PathBuf>,
    /// Cases written by `build`, instead of `--test`.
    #[arg(long, conflicts_with = "test")]
    pub cases: Option<PathBuf>,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, required_if_eq("method", "elvis"))]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Elvis)]
    pub method: Method,
    /// Runs averaged for stochastic methods.
    #[arg(long, default_value_t = 10)]
    pub repetitions: usize,
    #[arg(long, default_value_t = 6)]
    pub seed_baseline: u64,
    #[arg(long, default_value_t = 10)]
    pub min_candidates: usize,
    #[arg(long, default_value_t = 10)]
    pub min_user_photos: usize,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct RankArgs {
    /// Corpus providing the item's photos.
    #[arg(long)]
    pub reviews: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub user: String,
    #[arg(long)]
    pub item: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ExplainArgs {
    #[arg(long)]
    pub reviews: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub item: String,
    /// `all`, `reviewers`, `raters-below:<r>` or a file with one user id per line.
    #[arg(long, default_value = "all")]
    pub users: String,
    #[arg(long, default_value_t = 1)]
    pub top: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parse `args` (program name first) and run; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_manifest(command: &Command, dir: &Path) -> anyhow::Result<()> {
    let name = serde_json::to_value(command)?
        .as_object()
        .and_then(|o| o.keys().next().cloned())
        .unwrap_or_else(|| "run".into());
    let manifest = serde_json::json!({
        "program": "elvis",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
    });
    let path = dir.join(format!("{name}.manifest.json"));
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: PathBuf, body: String) -> anyhow::Result<()> {
    fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
}

pub fn run(command: &Command) -> anyhow::Result<()> {
    let out = match command {
        Command::Synth(a) => synth(a)?,
        Command::Stats(a) => stats(a)?,
        Command::Split(a) => split(a)?,
        Command::Build(a) => build(a)?,
        Command::Train(a) => train_cmd(a)?,
        Command::Grid(a) => grid(a)?,
        Command::Eval(a) => eval(a)?,
        Command::Rank(a) => rank(a)?,
        Command::ExplainGroup(a) => explain(a)?,
    };
    write_manifest(command, out)
}

fn synth(a: &SynthArgs) -> anyhow::Result<&Path> {
    let cfg = SynthConfig {
        num_users: a.users,
        num_items: a.items,
        clusters: a.clusters,
        review_p: a.review_p,
        photos_per_review: (a.min_photos, a.max_photos),
        feature_dim: a.feature_dim,
        separation: a.separation,
        noise: a.noise,
        seed: a.seed,
    };
    let data = generate_synthetic(&cfg)?;
    create_dir(&a.out)?;
    data.write(&a.out)?;
    log::info!(
        "{} users, {} items, {} reviews, {} photos",
        data.corpus.users().len(),
        data.corpus.items().len(),
        data.corpus.reviews().len(),
        data.corpus.num_photos()
    );
    Ok(&a.out)
}

fn stats(a: &StatsArgs) -> anyhow::Result<&Path> {
    let mut corpus = load_reviews(&a.reviews)?;
    if a.filter {
        corpus = filter_corpus(&corpus);
    }
    create_dir(&a.out)?;
    let report = corpus_stats(&corpus);
    report.write_csv(&a.out)?;
    if let (Some(train), Some(test)) = (&a.train, &a.test) {
        let train = corpus_stats(&load_reviews(train)?);
        let test = corpus_stats(&load_reviews(test)?);
        write_table(
            &[("all", &report), ("train", &train), ("test", &test)],
            a.out.join("table.csv"),
        )?;
    }
    Ok(&a.out)
}

fn holdout(s: &str) -> anyhow::Result<HoldoutPolicy> {
    s.parse::<HoldoutPolicy>().map_err(anyhow::Error::msg)
}

fn split(a: &SplitArgs) -> anyhow::Result<&Path> {
    let policy = holdout(&a.holdout)?;
    let corpus = filter_corpus(&load_reviews(&a.reviews)?);
    let (train, test) = split_holdout(&corpus, a.seed_split, policy);
    create_dir(&a.out)?;
    write_reviews(&train, a.out.join("train.tsv"))?;
    write_reviews(&test, a.out.join("test.tsv"))?;
    log::info!(
        "{} training reviews, {} held out",
        train.reviews().len(),
        test.reviews().len()
    );
    Ok(&a.out)
}

fn build(a: &BuildArgs) -> anyhow::Result<&Path> {
    let train = load_reviews(&a.train)?;
    let test = load_reviews(&a.test)?;
    let set = build_train_set(&train, a.seed_sample)?;
    let cases = build_test_cases(&train, &test);
    create_dir(&a.out)?;
    write_pairs(&set.pairs, a.out.join("pairs.tsv"))?;
    write_cases(&cases, a.out.join("cases.tsv"))?;
    log::info!("{} pairs, {} test cases", set.pairs.len(), cases.len());
    Ok(&a.out)
}

fn train_cmd(a: &TrainArgs) -> anyhow::Result<&Path> {
    let pairs = read_pairs(&a.pairs)?;
    let store = load_features(&a.features)?;
    let mut users: Vec<String> = pairs.iter().map(|p| p.user_id.clone()).collect();
    users.sort();
    users.dedup();
    let mut model = ElvisModel::<f32>::init_for_users(a.model.config(store.dim()), users)?;
    let history = train(&mut model, &pairs, &store, &a.run.config(a.lr))?;
    create_dir(&a.out)?;
    save_checkpoint(&model, a.out.join("model.elvm"))?;
    history.write_csv(a.out.join("history.csv"))?;
    if let Some(last) = history.epochs.last() {
        log::info!(
            "{} steps, final mean loss {:.5}",
            history.steps,
            last.mean_loss
        );
    }
    Ok(&a.out)
}

fn grid(a: &GridArgs) -> anyhow::Result<&Path> {
    let train_corpus = load_reviews(&a.train)?;
    let store = load_features(&a.features)?;
    let cfg = GridConfig {
        lr_grid: a.lr_grid.clone(),
        split_seed: a.seed_split,
        sample_seed: a.seed_sample,
        holdout: holdout(&a.holdout)?,
        filters: EvalFilters::NONE,
        workers: a.workers,
    };
    let report = grid_search(
        &train_corpus,
        &store,
        &a.model.config(store.dim()),
        &a.run.config(a.lr_grid.first().copied().unwrap_or(1e-3)),
        &cfg,
    )?;
    create_dir(&a.out)?;
    write_text(a.out.join("grid.csv"), report.to_csv())?;
    write_text(a.out.join("best_lr.txt"), format!("{}\n", report.best_lr))?;
    log::info!(
        "best learning rate {} over {} dev cases",
        report.best_lr,
        report.dev_cases
    );
    Ok(&a.out)
}

fn eval(a: &EvalArgs) -> anyhow::Result<&Path> {
    let train_corpus = load_reviews(&a.train)?;
    let cases = match (&a.cases, &a.test) {
        (Some(path), _) => read_cases(path, &train_corpus)?,
        (None, Some(test)) => build_test_cases(&train_corpus, &load_reviews(test)?),
        (None, None) => bail!("either --test or --cases is required"),
    };
    let store = load_features(&a.features)?;
    let filters = EvalFilters {
        min_candidates: a.min_candidates,
        min_user_train_photos: a.min_user_photos,
    };
    let model = match &a.model {
        Some(path) if a.method == Method::Elvis => Some(load_checkpoint(path)?),
        _ => None,
    };
    let scorer: Box<dyn Scorer + '_> = match a.method {
        Method::Elvis => Box::new(ElvisScorer {
            model: model
                .as_ref()
                .context("--model is required for --method elvis")?,
            store: &store,
        }),
        Method::Random => Box::new(RandomScorer {
            seed: a.seed_baseline,
        }),
        Method::Centroid => Box::new(CentroidScorer { store: &store }),
    };
    let report = evaluate_method(scorer.as_ref(), &cases, &filters, a.repetitions, a.workers)?;
    create_dir(&a.out)?;
    report.write_csv(&a.out)?;
    log::info!(
        "{}: {} cases, top-10 {:.2}%, median percentile {:.2}",
        report.method,
        report.case_count,
        report.top_n[9],
        report.median_percentile
    );
    Ok(&a.out)
}

fn rank(a: &RankArgs) -> anyhow::Result<&Path> {
    let corpus = load_reviews(&a.reviews)?;
    let store = load_features(&a.features)?;
    let model = load_checkpoint(&a.model)?;
    let user = model.user_index(&a.user)?;
    let ranked = rank_for_user(&model, user, &a.item, &corpus, &store)?;
    let mut body = String::from("photo_id,score,rank\n");
    for (i, (f, s)) in ranked.iter().enumerate() {
        body.push_str(&format!("{f},{s},{}\n", i + 1));
    }
    create_dir(&a.out)?;
    write_text(a.out.join("rank.csv"), body)?;
    Ok(&a.out)
}

fn explain(a: &ExplainArgs) -> anyhow::Result<&Path> {
    let selector: UserSelector = a.users.parse().map_err(anyhow::Error::msg)?;
    let corpus = load_reviews(&a.reviews)?;
    let store = load_features(&a.features)?;
    let model = load_checkpoint(&a.model)?;
    let users = selector.resolve(&model, &corpus, &a.item)?;
    let top = cold_start_explain(&model, &users, &a.item, &corpus, &store, a.top)?;
    let mut body = String::from("photo_id,phi,rank\n");
    for (i, g) in top.iter().enumerate() {
        body.push_str(&format!("{},{},{}\n", g.photo_id, g.phi, i + 1));
    }
    create_dir(&a.out)?;
    write_text(a.out.join("explain.csv"), body)?;
    log::info!("group of {} users", users.len());
    Ok(&a.out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_nonzero() {
        assert_ne!(main_with(["elvis", "frobnicate"]), 0);
        assert_ne!(main_with(["elvis", "split", "--bogus"]), 0);
    }

    #[test]
    fn missing_input_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let cli = Cli::try_parse_from([
            "elvis",
            "split",
            "--reviews",
            "/nonexistent/reviews.tsv",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .unwrap();
        let err = run(&cli.command).unwrap_err();
        assert!(format!("{err:#}").contains("/nonexistent/reviews.tsv"));
    }

    #[test]
    fn grid_defaults_parse() {
        let cli = Cli::try_parse_from([
            "elvis",
            "grid",
            "--train",
            "t",
            "--features",
            "f",
            "--out",
            "o",
        ])
        .unwrap();
        let Command::Grid(g) = cli.command else {
            panic!()
        };
        assert_eq!(g.lr_grid, vec![5e-3, 1e-3, 5e-4, 1e-4, 5e-5]);
        assert_eq!(g.run.epochs, 100);
        assert_eq!(g.run.batch, 1024);
        assert_eq!(g.model.dropout, 0.2);
    }
}
