//! Subcommand bodies. Each returns the names of the files it wrote.

use std::path::{Path, PathBuf};

use log::info;
use netquality_core::clustering::{self, gap_statistic, kmeans, ClusterModel, GapConfig, GapResult};
use netquality_core::matching::run_experiment;
use netquality_core::metrics::{
    self, correlation_spectrum, degree_beauty_correlation, gini, lorenz_curve, majority_illusion, shuffle_null_model,
    BeautyProfiles, Direction, IllusionReport, SpectrumCurve,
};
use netquality_core::recommend::{evaluate, recommend_bb, recommend_cn, RecEvaluation, Recommendation, Rule};
use netquality_core::scoring::{cronbach_alpha, decile_curve, rescale_to_5pt, BeautyScore, RatingMatrix};
use netquality_core::stats::spearman_rho;
use netquality_core::synth::{self, SynthConfig};
use netquality_core::{GraphSnapshot, IngestWarning, TemporalGraph, Week};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::{ClusterConfig, MatchConfig, MetricsConfig, RecommendConfig};
use crate::error::{CliError, Result};
use crate::io::{self, RecordCounts};

pub struct Context {
    pub data: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

impl Context {
    fn data(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| CliError::Usage(String::from("--data DIR is required")))
    }

    fn config<T: DeserializeOwned + Default>(&self) -> Result<T> {
        self.config.as_deref().map_or_else(|| Ok(T::default()), io::read_json)
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn load(&self) -> Result<(TemporalGraph, Vec<IngestWarning>, RecordCounts)> {
        let dir = self.data()?;
        let loaded = io::load_graph(dir)?;
        info!(
            "loaded {} users and {} edges from {}",
            loaded.0.user_count(),
            loaded.0.edge_count(),
            dir.display()
        );
        Ok(loaded)
    }

    fn file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

/// Outputs written plus the seed that was actually used.
pub struct Outcome {
    pub files: Vec<String>,
    pub seed: u64,
}

fn outcome(files: &[&str], seed: u64) -> Outcome {
    Outcome {
        files: files.iter().map(|s| s.to_string()).collect(),
        seed,
    }
}

fn warning_text(w: &IngestWarning, favorites: &Path) -> String {
    match w {
        IngestWarning::UnknownPhoto { record, photo } => {
            // Header on line 1 for CSV; JSONL records start on line 1.
            let offset = if favorites.extension().is_some_and(|e| e == "csv") {
                2
            } else {
                1
            };
            format!(
                "{}:{}: favorite of unknown photo {} dropped",
                favorites.display(),
                record + offset,
                photo.0
            )
        }
    }
}

#[derive(Serialize)]
struct IngestSummary {
    records: RecordCounts,
    users: usize,
    edges: usize,
    photos: usize,
    favorites: usize,
    group_memberships: usize,
    last_week: Option<u32>,
    warnings: Vec<String>,
}

pub fn ingest_check(ctx: &Context) -> Result<Outcome> {
    let (g, warnings, records) = ctx.load()?;
    let favorites = io::stream_path(ctx.data()?, "favorites")?;
    let warnings: Vec<String> = warnings.iter().map(|w| warning_text(w, &favorites)).collect();
    for w in &warnings {
        log::warn!("{w}");
    }
    let summary = IngestSummary {
        records,
        users: g.user_count(),
        edges: g.edge_count(),
        photos: g.photo_count(),
        favorites: g.favorite_count(),
        group_memberships: g.group_event_count(),
        last_week: g.last_week().map(|w| w.0),
        warnings,
    };
    io::write_json(&ctx.file("ingest.json"), &summary)?;
    Ok(outcome(&["ingest.json"], ctx.seed()))
}

/// Snapshot and the matching profiles: everything, or only what precedes
/// the start of `week`.
fn view(g: &TemporalGraph, week: Option<u32>) -> (GraphSnapshot, BeautyProfiles) {
    match week {
        None => (g.final_snapshot(), metrics::overall_profiles(g)),
        Some(0) => (
            g.snapshot_at(Week(0)),
            BeautyProfiles::from_values(vec![None; g.user_count()]),
        ),
        Some(w) => (g.snapshot_at(Week(w)), metrics::profiles_through(g, Week(w - 1))),
    }
}

fn favorites_received(g: &TemporalGraph) -> Vec<f64> {
    g.users().iter().map(|u| u.favorites_received.len() as f64).collect()
}

fn lorenz_rows(values: &[f64]) -> Result<Vec<[String; 2]>> {
    Ok(lorenz_curve(values)?
        .into_iter()
        .map(|(x, y)| [x.to_string(), y.to_string()])
        .collect())
}

#[derive(Serialize)]
struct MetricsSummary {
    week: Option<u32>,
    users: usize,
    profiled: usize,
    edges: usize,
    mean_beauty: Option<f64>,
    rho_indegree: Option<f64>,
    rho_outdegree: Option<f64>,
    gini_favorites: Option<f64>,
    gini_beauty: Option<f64>,
}

pub fn metrics(ctx: &Context) -> Result<Outcome> {
    let cfg: MetricsConfig = ctx.config()?;
    let (g, _, _) = ctx.load()?;
    let (s, p) = view(&g, cfg.week);
    let beauty: Vec<f64> = p.profiled().map(|(_, b)| b).collect();
    let favs = favorites_received(&g);
    let favs: Vec<f64> = p.profiled().map(|(i, _)| favs[i]).collect();
    let summary = MetricsSummary {
        week: cfg.week,
        users: s.node_count(),
        profiled: p.profiled_count(),
        edges: s.edge_count(),
        mean_beauty: netquality_core::stats::mean(&beauty),
        rho_indegree: degree_beauty_correlation(&s, &p, Direction::In).ok(),
        rho_outdegree: degree_beauty_correlation(&s, &p, Direction::Out).ok(),
        gini_favorites: gini(&favs).ok(),
        gini_beauty: gini(&beauty).ok(),
    };
    let header = ["pop_share", "resource_share"];
    let mut files = vec!["metrics.json"];
    if summary.gini_favorites.is_some() {
        io::write_csv(&ctx.file("lorenz_favorites.csv"), &header, lorenz_rows(&favs)?)?;
        files.push("lorenz_favorites.csv");
    }
    if summary.gini_beauty.is_some() {
        io::write_csv(&ctx.file("lorenz_beauty.csv"), &header, lorenz_rows(&beauty)?)?;
        files.push("lorenz_beauty.csv");
    }
    io::write_json(&ctx.file("metrics.json"), &summary)?;
    Ok(outcome(&files, ctx.seed()))
}

fn null_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_add(i as u64)
}

#[derive(Serialize)]
struct CurveSummary {
    seed: Option<u64>,
    population: usize,
    non_empty_bins: usize,
    rank_trend: Option<f64>,
    weighted_slope: Option<f64>,
}

impl CurveSummary {
    fn of(c: &SpectrumCurve, seed: Option<u64>) -> Self {
        CurveSummary {
            seed,
            population: c.population(),
            non_empty_bins: c.points.len(),
            rank_trend: c.rank_trend().ok(),
            weighted_slope: c.weighted_slope(),
        }
    }
}

#[derive(Serialize)]
struct SpectrumSummary {
    week: Option<u32>,
    bins: usize,
    observed: CurveSummary,
    shuffled: Vec<CurveSummary>,
}

pub fn spectrum(ctx: &Context) -> Result<Outcome> {
    let cfg: MetricsConfig = ctx.config()?;
    if cfg.bins == 0 {
        return Err(CliError::Usage(String::from("bins must be ≥ 1")));
    }
    let (g, _, _) = ctx.load()?;
    let (s, p) = view(&g, cfg.week);
    let seed = ctx.seed();
    let curve = correlation_spectrum(&s, &p, cfg.bins);
    let shuffled: Vec<CurveSummary> = (0..cfg.shuffles)
        .into_par_iter()
        .map(|i| {
            let k = null_seed(seed, i);
            CurveSummary::of(&correlation_spectrum(&s, &shuffle_null_model(&p, k), cfg.bins), Some(k))
        })
        .collect();
    io::write_csv(
        &ctx.file("spectrum.csv"),
        &["bin_center", "b_nn", "count", "variance"],
        curve.points.iter().map(|b| {
            [
                b.center.to_string(),
                b.b_nn.to_string(),
                b.count.to_string(),
                b.variance.to_string(),
            ]
        }),
    )?;
    let summary = SpectrumSummary {
        week: cfg.week,
        bins: cfg.bins,
        observed: CurveSummary::of(&curve, None),
        shuffled,
    };
    io::write_json(&ctx.file("spectrum.json"), &summary)?;
    Ok(outcome(&["spectrum.csv", "spectrum.json"], seed))
}

#[derive(Serialize)]
struct IllusionLine {
    seed: Option<u64>,
    threshold: f64,
    q: f64,
    share: f64,
    excess: f64,
}

impl IllusionLine {
    fn of(r: &IllusionReport, seed: Option<u64>) -> Self {
        IllusionLine {
            seed,
            threshold: r.threshold,
            q: r.global_fraction,
            share: r.share,
            excess: r.excess(),
        }
    }
}

#[derive(Serialize)]
struct IllusionSummary {
    week: Option<u32>,
    observed: IllusionLine,
    shuffled: Vec<IllusionLine>,
    mean_shuffled_excess: Option<f64>,
}

pub fn illusion(ctx: &Context) -> Result<Outcome> {
    let cfg: MetricsConfig = ctx.config()?;
    let (g, _, _) = ctx.load()?;
    let (s, p) = view(&g, cfg.week);
    let seed = ctx.seed();
    let threshold = cfg.threshold.into();
    let report = majority_illusion(&s, &p, threshold)?;
    let shuffled = (0..cfg.shuffles)
        .into_par_iter()
        .map(|i| {
            let k = null_seed(seed, i);
            majority_illusion(&s, &shuffle_null_model(&p, k), threshold).map(|r| IllusionLine::of(&r, Some(k)))
        })
        .collect::<netquality_core::Result<Vec<_>>>()?;
    io::write_csv(
        &ctx.file("illusion.csv"),
        &["node", "neighbor_fraction"],
        report
            .neighbor_fractions
            .iter()
            .map(|&(i, f)| [s.id(i).0.to_string(), f.to_string()]),
    )?;
    let excesses: Vec<f64> = shuffled.iter().map(|l| l.excess).collect();
    let summary = IllusionSummary {
        week: cfg.week,
        observed: IllusionLine::of(&report, None),
        mean_shuffled_excess: netquality_core::stats::mean(&excesses),
        shuffled,
    };
    io::write_json(&ctx.file("illusion.json"), &summary)?;
    Ok(outcome(&["illusion.csv", "illusion.json"], seed))
}

#[derive(Serialize)]
struct MatchOutput {
    config: MatchConfig,
    seed: u64,
    report: netquality_core::matching::ExperimentReport,
}

pub fn match_experiment(ctx: &Context) -> Result<Outcome> {
    let cfg: MatchConfig = ctx.config()?;
    let seed = ctx.seed.or(cfg.seed).unwrap_or(0);
    let spec = cfg.spec(seed)?;
    let (g, _, _) = ctx.load()?;
    let report = run_experiment(&g, &spec)?;
    if let Some(f) = &report.failure {
        log::warn!("{f}");
    }
    io::write_json(
        &ctx.file("match.json"),
        &MatchOutput {
            config: cfg,
            seed,
            report,
        },
    )?;
    Ok(outcome(&["match.json"], seed))
}

#[derive(Serialize)]
struct ClusterSummary {
    cluster: usize,
    label: String,
    centroid: [f64; 3],
    size: usize,
    share: f64,
    mean_photos: f64,
    mean_active_weeks: f64,
}

struct Clustering {
    features: clustering::UserFeatures,
    gap: Option<GapResult>,
    model: ClusterModel,
}

fn cluster_users(g: &TemporalGraph, cfg: &ClusterConfig, seed: u64) -> Result<Clustering> {
    let features = clustering::features(g, &metrics::overall_profiles(g));
    let (gap, k) = match cfg.k {
        Some(k) => (None, k),
        None => {
            let gap = gap_statistic(
                &features.points,
                GapConfig {
                    k_min: cfg.k_min,
                    k_max: cfg.k_max,
                    references: cfg.references,
                    seed,
                },
            )?;
            let k = gap.k;
            (Some(gap), k)
        }
    };
    let model = ClusterModel::from_kmeans(kmeans(&features.points, k, seed)?);
    Ok(Clustering { features, gap, model })
}

fn label_name(model: &ClusterModel, c: usize) -> String {
    model
        .label_of(c)
        .map_or_else(|| format!("cluster_{c}"), |l| l.name().to_string())
}

#[derive(Serialize)]
struct ClusteringOutput {
    k: usize,
    users: usize,
    degenerate: [bool; 3],
    gap: Option<GapResult>,
    clusters: Vec<ClusterSummary>,
}

pub fn cluster(ctx: &Context) -> Result<Outcome> {
    let cfg: ClusterConfig = ctx.config()?;
    let (g, _, _) = ctx.load()?;
    let seed = ctx.seed();
    let c = cluster_users(&g, &cfg, seed)?;
    let m = &c.model;
    let n = c.features.users.len();
    let mut clusters: Vec<ClusterSummary> = (0..m.k)
        .map(|k| ClusterSummary {
            cluster: k,
            label: label_name(m, k),
            centroid: m.centroids[k],
            size: 0,
            share: 0.0,
            mean_photos: 0.0,
            mean_active_weeks: 0.0,
        })
        .collect();
    for (&index, &k) in c.features.indices.iter().zip(&m.assignments) {
        let u = g.user(index);
        let s = &mut clusters[k];
        s.size += 1;
        s.mean_photos += u.photos.len() as f64;
        s.mean_active_weeks += u.active_weeks() as f64;
    }
    for s in &mut clusters {
        if s.size > 0 {
            s.mean_photos /= s.size as f64;
            s.mean_active_weeks /= s.size as f64;
            s.share = s.size as f64 / n as f64;
        }
    }
    io::write_csv(
        &ctx.file("clusters.csv"),
        &["user", "cluster", "label"],
        c.features
            .users
            .iter()
            .zip(&m.assignments)
            .map(|(u, &k)| [u.0.to_string(), k.to_string(), label_name(m, k)]),
    )?;
    let output = ClusteringOutput {
        k: m.k,
        users: n,
        degenerate: c.features.degenerate,
        gap: c.gap,
        clusters,
    };
    io::write_json(&ctx.file("clusters.json"), &output)?;
    Ok(outcome(&["clusters.csv", "clusters.json"], seed))
}

#[derive(Serialize)]
struct RuleSummary {
    rule: Rule,
    recipients_without_recommendation: usize,
    evaluation: Option<RecEvaluation>,
}

#[derive(Serialize)]
struct RecommendOutput {
    band: f64,
    week: Option<u32>,
    recipients: usize,
    forlorn_users: usize,
    rules: Vec<RuleSummary>,
}

pub fn recommend(ctx: &Context) -> Result<Outcome> {
    let cfg: RecommendConfig = ctx.config()?;
    if !(cfg.band.is_finite() && cfg.band >= 0.0) {
        return Err(CliError::Usage(String::from("band must be ≥ 0")));
    }
    let (g, _, _) = ctx.load()?;
    let seed = ctx.seed();
    let (s, p) = view(&g, cfg.week);
    let c = cluster_users(&g, &cfg.clusters, seed)?;
    let mut forlorn = vec![false; g.user_count()];
    for (&index, &k) in c.features.indices.iter().zip(&c.model.assignments) {
        forlorn[index] = c.model.label_of(k) == Some(clustering::ClusterLabel::ForlornBeauty);
    }
    let recipients: Vec<usize> = p.profiled().map(|(i, _)| i).collect();
    let pairs = recipients
        .par_iter()
        .map(|&u| Ok((recommend_cn(&s, u), recommend_bb(&s, &p, u, cfg.band)?)))
        .collect::<netquality_core::Result<Vec<(Option<Recommendation>, Option<Recommendation>)>>>()?;
    let cn: Vec<Recommendation> = pairs.iter().filter_map(|x| x.0).collect();
    let bb: Vec<Recommendation> = pairs.iter().filter_map(|x| x.1).collect();
    io::write_csv(
        &ctx.file("recommendations.csv"),
        &["u", "rule", "r", "score"],
        pairs.iter().flat_map(|(a, b)| [a, b]).flatten().map(|r| {
            [
                r.recipient.0.to_string(),
                r.rule.code().to_string(),
                r.candidate.0.to_string(),
                r.score.to_string(),
            ]
        }),
    )?;
    let favs = favorites_received(&g);
    let summary = |rule: Rule, recs: &[Recommendation]| -> Result<RuleSummary> {
        let evaluation = if recs.is_empty() {
            None
        } else {
            Some(evaluate(&s, recs, &p, &favs, &forlorn)?)
        };
        Ok(RuleSummary {
            rule,
            recipients_without_recommendation: recipients.len() - recs.len(),
            evaluation,
        })
    };
    let output = RecommendOutput {
        band: cfg.band,
        week: cfg.week,
        recipients: recipients.len(),
        forlorn_users: forlorn.iter().filter(|&&f| f).count(),
        rules: vec![summary(Rule::CommonNeighbors, &cn)?, summary(Rule::BeautyBand, &bb)?],
    };
    io::write_json(&ctx.file("recommend.json"), &output)?;
    Ok(outcome(&["recommendations.csv", "recommend.json"], seed))
}

#[derive(Serialize)]
struct SynthSummary {
    config: SynthConfig,
    follows: usize,
    photos: usize,
    favorites: usize,
    group_memberships: usize,
}

pub fn synth(ctx: &Context) -> Result<Outcome> {
    let mut cfg: SynthConfig = ctx.config()?;
    if let Some(seed) = ctx.seed {
        cfg.seed = seed;
    }
    let streams = synth::generate(&cfg)?;
    io::write_streams(&ctx.out, &streams)?;
    let seed = cfg.seed;
    let summary = SynthSummary {
        follows: streams.follows.len(),
        photos: streams.photos.len(),
        favorites: streams.favorites.len(),
        group_memberships: streams.groups.len(),
        config: cfg,
    };
    io::write_json(&ctx.file("synth.json"), &summary)?;
    Ok(outcome(
        &["follows.csv", "photos.csv", "favorites.csv", "groups.csv", "synth.json"],
        seed,
    ))
}

#[derive(Serialize)]
struct Decile {
    lo: f64,
    hi: f64,
    mean_human: Option<f64>,
}

#[derive(Serialize)]
struct Validation {
    items: usize,
    raters: usize,
    cronbach_alpha: Option<f64>,
    spearman: Option<f64>,
    spearman_5pt: Option<f64>,
    deciles: Vec<Decile>,
}

pub fn validate_scores(ctx: &Context) -> Result<Outcome> {
    let dir = ctx.data()?;
    let ratings = io::load_ratings(&dir.join("ratings.csv"))?;
    let scores_path = dir.join("scores.csv");
    let scores: std::collections::HashMap<u64, f64> = io::load_scores(&scores_path)?.into_iter().collect();
    let m = RatingMatrix::from_ratings(&ratings)?;
    let human = m.item_means();
    let mut predicted = Vec::with_capacity(m.items.len());
    for item in &m.items {
        let s = *scores.get(item).ok_or_else(|| CliError::Input {
            path: scores_path.clone(),
            message: format!("no score for rated item {item}"),
        })?;
        predicted.push(s);
    }
    let grades: Vec<f64> = predicted
        .iter()
        .map(|&s| BeautyScore::new(s).map(|b| f64::from(rescale_to_5pt(b))))
        .collect::<netquality_core::Result<_>>()?;
    let deciles = decile_curve(&predicted, &human)?
        .iter()
        .enumerate()
        .map(|(k, &mean_human)| Decile {
            lo: k as f64 / 10.0,
            hi: (k + 1) as f64 / 10.0,
            mean_human,
        })
        .collect();
    let v = Validation {
        items: m.items.len(),
        raters: m.raters.len(),
        cronbach_alpha: cronbach_alpha(&m).ok(),
        spearman: spearman_rho(&predicted, &human).ok(),
        spearman_5pt: spearman_rho(&grades, &human).ok(),
        deciles,
    };
    io::write_json(&ctx.file("validation.json"), &v)?;
    Ok(outcome(&["validation.json"], ctx.seed()))
}
