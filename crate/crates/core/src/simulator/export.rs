use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::feed::{ImpressionEvent, SurveyRecord};
use super::world::World;
use crate::error::{Error, Result};
use crate::features::{ItemFeatures, UserFeatures};
use crate::seed;
use crate::survey::{Engagement, SurveyShow};

pub const TRAIN_FILE: &str = "train.jsonl";
pub const EVAL_FILE: &str = "eval.jsonl";
pub const ORACLE_FILE: &str = "oracle.jsonl";

/// Observable attributes of the user and item of an impression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventAttrs {
    pub language: u32,
    pub region: u32,
    pub device: u32,
    pub activity: f64,
    pub pref_signal: Vec<f64>,
    pub history_submissions: u32,
    pub quality_signal: Vec<f64>,
    pub issue_signal: f64,
}

/// One line of a train/eval file. Carries nothing unobservable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub user_id: u64,
    pub impression_index: u32,
    pub item_id: u64,
    pub author_id: u64,
    pub attrs: EventAttrs,
    pub engagement: Engagement,
    pub survey: SurveyRecord,
}

impl EventRow {
    pub fn user_features(&self) -> UserFeatures {
        let a = &self.attrs;
        UserFeatures {
            user_id: self.user_id,
            language: a.language,
            region: a.region,
            device: a.device,
            activity: a.activity,
            pref_signal: a.pref_signal.clone(),
            history_submissions: a.history_submissions,
        }
    }

    pub fn item_features(&self) -> ItemFeatures {
        ItemFeatures {
            item_id: self.item_id,
            author_id: self.author_id,
            quality_signal: self.attrs.quality_signal.clone(),
            issue_signal: self.attrs.issue_signal,
        }
    }

    /// The survey show of this impression, if one was shown.
    pub fn survey_show(&self) -> Option<SurveyShow> {
        self.survey.shown.then(|| SurveyShow {
            kind: self.survey.kind,
            user: self.user_features(),
            item: self.item_features(),
            submitted: self.survey.submitted,
            answers: self.survey.answers.clone(),
        })
    }
}

pub fn survey_shows(rows: &[EventRow]) -> Vec<SurveyShow> {
    rows.iter().filter_map(EventRow::survey_show).collect()
}

/// Sidecar line: the ground truth of one impression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub user_id: u64,
    pub impression_index: u32,
    pub p_ans_ss: f64,
    pub p_like_ans: f64,
    pub p_like_ss: f64,
    pub p_dislike_ans: f64,
    pub p_inappropriate: f64,
    pub latent_answers: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub eval_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            eval_fraction: 0.2,
            seed: 0,
        }
    }
}

/// Deterministic user-level split: users are ordered by a seeded hash and
/// the first `round(eval_fraction · n)` go to evaluation.
pub fn split_users(user_ids: &BTreeSet<u64>, split: &SplitConfig) -> Result<(BTreeSet<u64>, BTreeSet<u64>)> {
    if !(0.0..=1.0).contains(&split.eval_fraction) {
        return Err(Error::config(format!(
            "eval fraction {} outside [0, 1]",
            split.eval_fraction
        )));
    }
    let mut order: Vec<(u64, u64)> = user_ids
        .iter()
        .map(|&id| (seed::derive_indexed(split.seed, "split", id), id))
        .collect();
    order.sort_unstable();
    let n_eval = (split.eval_fraction * user_ids.len() as f64).round() as usize;
    let eval = order[..n_eval].iter().map(|p| p.1).collect();
    let train = order[n_eval..].iter().map(|p| p.1).collect();
    Ok((train, eval))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportSummary {
    pub train_users: usize,
    pub eval_users: usize,
    pub train_events: usize,
    pub eval_events: usize,
}

pub fn event_row(world: &World, event: &ImpressionEvent) -> Result<EventRow> {
    let user = world.user(event.user_id)?;
    let item = world.item(event.item_id)?;
    Ok(EventRow {
        user_id: event.user_id,
        impression_index: event.impression_index,
        item_id: event.item_id,
        author_id: event.author_id,
        attrs: EventAttrs {
            language: user.language,
            region: user.region,
            device: user.device,
            activity: user.activity,
            pref_signal: user.pref_signal.clone(),
            history_submissions: user.history_submissions,
            quality_signal: item.quality_signal.clone(),
            issue_signal: item.issue_signal,
        },
        engagement: event.engagement,
        survey: event.survey.clone(),
    })
}

pub fn oracle_row(event: &ImpressionEvent) -> OracleRow {
    let t = &event.truth;
    OracleRow {
        user_id: event.user_id,
        impression_index: event.impression_index,
        p_ans_ss: t.p_ans_ss,
        p_like_ans: t.p_like_ans,
        p_like_ss: t.p_like_ss,
        p_dislike_ans: t.p_dislike_ans,
        p_inappropriate: t.p_inappropriate,
        latent_answers: t.latent_answers.clone(),
    }
}

/// Writes `train.jsonl`, `eval.jsonl` and the `oracle.jsonl` sidecar into `dir`.
/// Rows are in (user id, impression index) order.
pub fn export_dataset(world: &World, events: &[ImpressionEvent], split: &SplitConfig, dir: &Path) -> Result<ExportSummary> {
    if events.is_empty() {
        return Err(Error::InvalidInput("no events to export".into()));
    }
    let mut sorted: Vec<&ImpressionEvent> = events.iter().collect();
    sorted.sort_by_key(|e| (e.user_id, e.impression_index));
    let users: BTreeSet<u64> = sorted.iter().map(|e| e.user_id).collect();
    let (train_users, eval_users) = split_users(&users, split)?;

    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut train = JsonlWriter::create(&dir.join(TRAIN_FILE))?;
    let mut eval = JsonlWriter::create(&dir.join(EVAL_FILE))?;
    let mut oracle = JsonlWriter::create(&dir.join(ORACLE_FILE))?;
    let (mut n_train, mut n_eval) = (0, 0);
    for event in sorted {
        event.validate()?;
        let row = event_row(world, event)?;
        if eval_users.contains(&event.user_id) {
            eval.write(&row)?;
            n_eval += 1;
        } else {
            train.write(&row)?;
            n_train += 1;
        }
        oracle.write(&oracle_row(event))?;
    }
    train.finish()?;
    eval.finish()?;
    oracle.finish()?;
    Ok(ExportSummary {
        train_users: train_users.len(),
        eval_users: eval_users.len(),
        train_events: n_train,
        eval_events: n_eval,
    })
}

pub fn read_events(path: &Path) -> Result<Vec<EventRow>> {
    read_jsonl(path)
}

/// Sidecar access, separate from the event loaders so training code never
/// sees ground truth.
pub mod oracle {
    use super::*;

    pub type OracleIndex = BTreeMap<(u64, u32), OracleRow>;

    pub fn read_oracle(path: &Path) -> Result<OracleIndex> {
        let rows: Vec<OracleRow> = read_jsonl(path)?;
        let mut index = BTreeMap::new();
        for r in rows {
            let key = (r.user_id, r.impression_index);
            if index.insert(key, r).is_some() {
                return Err(Error::Format(format!(
                    "{}: duplicate oracle row for user {} impression {}",
                    path.display(),
                    key.0,
                    key.1
                )));
            }
        }
        Ok(index)
    }

    pub fn lookup<'a>(index: &'a OracleIndex, row: &EventRow) -> Result<&'a OracleRow> {
        index.get(&(row.user_id, row.impression_index)).ok_or_else(|| {
            Error::MissingDependency(format!(
                "no oracle row for user {} impression {}",
                row.user_id, row.impression_index
            ))
        })
    }

    /// Rebuilds full events from exported rows and their sidecar entries.
    pub fn join_events(rows: &[EventRow], index: &OracleIndex) -> Result<Vec<ImpressionEvent>> {
        rows.iter()
            .map(|row| {
                let o = lookup(index, row)?;
                Ok(ImpressionEvent {
                    user_id: row.user_id,
                    impression_index: row.impression_index,
                    item_id: row.item_id,
                    author_id: row.author_id,
                    engagement: row.engagement,
                    survey: row.survey.clone(),
                    truth: super::super::feed::GroundTruth {
                        p_ans_ss: o.p_ans_ss,
                        p_like_ans: o.p_like_ans,
                        p_like_ss: o.p_like_ss,
                        p_dislike_ans: o.p_dislike_ans,
                        p_inappropriate: o.p_inappropriate,
                        latent_answers: o.latent_answers.clone(),
                    },
                })
            })
            .collect()
    }
}

pub(crate) struct JsonlWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl JsonlWriter {
    pub(crate) fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    pub(crate) fn write<T: Serialize>(&mut self, value: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, value)?;
        self.out.write_all(b"\n").map_err(|e| Error::io(&self.path, e))
    }

    pub(crate) fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(value);
    }
    Ok(out)
}
