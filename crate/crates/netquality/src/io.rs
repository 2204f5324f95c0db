//! Event-stream and result files.
//!
//! A data directory holds `follows`, `photos`, `favorites` and `groups`,
//! each as `<name>.csv` (header row required) or `<name>.jsonl` with the
//! same field names. Photos carry either `beauty` or the classifier triple
//! `p_lq,p_mq,p_hq`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use netquality_core::scoring::{beauty_score, HumanRating, QualityTriple};
use netquality_core::synth::EventStreams;
use netquality_core::{
    FavoriteEvent, FollowEvent, GraphBuilder, GroupEvent, GroupId, IngestWarning, PhotoEvent, PhotoId, TemporalGraph,
    UserId,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const STREAMS: [&str; 4] = ["follows", "photos", "favorites", "groups"];

#[derive(Deserialize)]
struct FollowRow {
    src: u64,
    dst: u64,
    t: u64,
}

#[derive(Deserialize)]
struct PhotoRow {
    owner: u64,
    photo: u64,
    t: u64,
    beauty: Option<f64>,
    p_lq: Option<f64>,
    p_mq: Option<f64>,
    p_hq: Option<f64>,
}

#[derive(Deserialize)]
struct FavoriteRow {
    actor: u64,
    photo: u64,
    t: u64,
}

#[derive(Deserialize)]
struct GroupRow {
    member: u64,
    group: u64,
    t: u64,
}

#[derive(Deserialize)]
struct RatingRow {
    item: u64,
    rater: u64,
    grade: i64,
}

#[derive(Deserialize)]
struct ScoreRow {
    item: u64,
    score: f64,
}

/// Locates `<name>.csv` or `<name>.jsonl` in `dir`; a missing stream is
/// reported under its CSV name.
pub fn stream_path(dir: &Path, name: &str) -> Result<PathBuf> {
    let csv = dir.join(format!("{name}.csv"));
    if csv.is_file() {
        return Ok(csv);
    }
    let jsonl = dir.join(format!("{name}.jsonl"));
    if jsonl.is_file() {
        return Ok(jsonl);
    }
    Err(CliError::io(
        &csv,
        std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
    ))
}

fn is_jsonl(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "jsonl")
}

/// Calls `f` on every record with its 1-based line number.
fn for_each_row<T, F>(path: &Path, mut f: F) -> Result<usize>
where
    T: DeserializeOwned,
    F: FnMut(T) -> std::result::Result<(), String>,
{
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut count = 0;
    if is_jsonl(path) {
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line_no = i as u64 + 1;
            let line = line.map_err(|e| CliError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: T = serde_json::from_str(&line).map_err(|e| CliError::parse(path, line_no, e))?;
            f(row).map_err(|m| CliError::parse(path, line_no, m))?;
            count += 1;
        }
        return Ok(count);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(path, e)),
        }
        let line_no = record.position().map_or(0, |p| p.line());
        let row: T = record
            .deserialize(Some(&headers))
            .map_err(|e| CliError::parse(path, line_no, csv_message(&e)))?;
        f(row).map_err(|m| CliError::parse(path, line_no, m))?;
        count += 1;
    }
    Ok(count)
}

fn csv_message(e: &csv::Error) -> String {
    match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
        _ => e.to_string(),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(1, |p| p.line());
    CliError::parse(path, line, csv_message(&e))
}

fn seconds(t: u64) -> std::result::Result<i64, String> {
    i64::try_from(t).map_err(|_| format!("timestamp {t} out of range"))
}

fn photo_beauty(row: &PhotoRow) -> std::result::Result<f64, String> {
    match (row.beauty, row.p_lq, row.p_mq, row.p_hq) {
        (Some(b), _, _, _) => Ok(b),
        (None, Some(l), Some(m), Some(h)) => QualityTriple::new(l, m, h)
            .map(|q| beauty_score(&q).value())
            .map_err(|e| e.to_string()),
        _ => Err(String::from("photo needs either beauty or p_lq,p_mq,p_hq")),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RecordCounts {
    pub follows: usize,
    pub photos: usize,
    pub favorites: usize,
    pub groups: usize,
}

/// Ingests the four streams of `dir`.
pub fn load_graph(dir: &Path) -> Result<(TemporalGraph, Vec<IngestWarning>, RecordCounts)> {
    let mut b = GraphBuilder::new();
    let follows = for_each_row(&stream_path(dir, "follows")?, |r: FollowRow| {
        b.add_follow(FollowEvent {
            src: UserId(r.src),
            dst: UserId(r.dst),
            t: seconds(r.t)?,
        })
        .map_err(|e| e.to_string())
    })?;
    let photos = for_each_row(&stream_path(dir, "photos")?, |r: PhotoRow| {
        b.add_photo(PhotoEvent {
            owner: UserId(r.owner),
            photo: PhotoId(r.photo),
            t: seconds(r.t)?,
            beauty: photo_beauty(&r)?,
        })
        .map_err(|e| e.to_string())
    })?;
    let favorites = for_each_row(&stream_path(dir, "favorites")?, |r: FavoriteRow| {
        b.add_favorite(FavoriteEvent {
            actor: UserId(r.actor),
            photo: PhotoId(r.photo),
            t: seconds(r.t)?,
        })
        .map_err(|e| e.to_string())
    })?;
    let groups = for_each_row(&stream_path(dir, "groups")?, |r: GroupRow| {
        b.add_group(GroupEvent {
            member: UserId(r.member),
            group: GroupId(r.group),
            t: seconds(r.t)?,
        })
        .map_err(|e| e.to_string())
    })?;
    let (g, warnings) = b.build()?;
    let counts = RecordCounts {
        follows,
        photos,
        favorites,
        groups,
    };
    Ok((g, warnings, counts))
}

pub fn load_ratings(path: &Path) -> Result<Vec<HumanRating>> {
    let mut out = Vec::new();
    for_each_row(path, |r: RatingRow| {
        out.push(HumanRating::new(r.item, r.rater, r.grade).map_err(|e| e.to_string())?);
        Ok(())
    })?;
    Ok(out)
}

pub fn load_scores(path: &Path) -> Result<Vec<(u64, f64)>> {
    let mut out = Vec::new();
    for_each_row(path, |r: ScoreRow| {
        if !(0.0..=1.0).contains(&r.score) {
            return Err(format!("score {} outside [0, 1]", r.score));
        }
        out.push((r.item, r.score));
        Ok(())
    })?;
    Ok(out)
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes a CSV file from a header and pre-formatted rows.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let err = |e: csv::Error| CliError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::json(path, e))
}

/// Writes the four streams as CSV into `dir`.
pub fn write_streams(dir: &Path, s: &EventStreams) -> Result<()> {
    write_csv(
        &dir.join("follows.csv"),
        &["src", "dst", "t"],
        s.follows
            .iter()
            .map(|e| [e.src.0.to_string(), e.dst.0.to_string(), e.t.to_string()]),
    )?;
    write_csv(
        &dir.join("photos.csv"),
        &["owner", "photo", "t", "beauty"],
        s.photos.iter().map(|e| {
            [
                e.owner.0.to_string(),
                e.photo.0.to_string(),
                e.t.to_string(),
                e.beauty.to_string(),
            ]
        }),
    )?;
    write_csv(
        &dir.join("favorites.csv"),
        &["actor", "photo", "t"],
        s.favorites
            .iter()
            .map(|e| [e.actor.0.to_string(), e.photo.0.to_string(), e.t.to_string()]),
    )?;
    write_csv(
        &dir.join("groups.csv"),
        &["member", "group", "t"],
        s.groups
            .iter()
            .map(|e| [e.member.0.to_string(), e.group.0.to_string(), e.t.to_string()]),
    )
}
