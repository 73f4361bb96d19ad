//! Fixed-order example encoding.
//!
//! A [`FeatureVector`] holds the hashed bucket of every categorical field and
//! the normalized numeric attributes of one (user, item, author) example. The
//! model turns it into a dense input by concatenating one learned embedding per
//! categorical field (in [`CATEGORICAL_FIELDS`] order) followed by the numeric
//! block (in [`FeatureSchema::numeric_fields`] order).

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::mix64;

pub const DEFAULT_ID_BUCKETS: usize = 1 << 16;

pub const USER_ID: &str = "user_id";
pub const ITEM_ID: &str = "item_id";
pub const AUTHOR_ID: &str = "author_id";
pub const LANGUAGE: &str = "language";
pub const REGION: &str = "region";
pub const DEVICE: &str = "device";
pub const ACTIVITY: &str = "activity";
pub const PREF_SIGNAL: &str = "pref_signal";
pub const QUALITY_SIGNAL: &str = "quality_signal";
pub const ISSUE_SIGNAL: &str = "issue_signal";
pub const HISTORY_SUBMISSIONS: &str = "history_submissions";

pub const CATEGORICAL_FIELDS: [&str; 6] = [USER_ID, ITEM_ID, AUTHOR_ID, LANGUAGE, REGION, DEVICE];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserFeatures {
    pub user_id: u64,
    pub language: u32,
    pub region: u32,
    pub device: u32,
    pub activity: f64,
    /// Noisy observation of the user's taste vector.
    pub pref_signal: Vec<f64>,
    /// Surveys submitted over the user's history window.
    pub history_submissions: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemFeatures {
    pub item_id: u64,
    pub author_id: u64,
    /// Noisy observation of the item's latent vector.
    pub quality_signal: Vec<f64>,
    /// Noisy observed rate of negative engagement on the item.
    pub issue_signal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSchema {
    pub id_buckets: usize,
    pub language_buckets: usize,
    pub region_buckets: usize,
    pub device_buckets: usize,
    pub pref_dim: usize,
    pub quality_dim: usize,
    /// Adds the normalized history submission count (submit model only).
    pub include_history: bool,
    pub history_window: u32,
}

impl Default for FeatureSchema {
    fn default() -> Self {
        Self {
            id_buckets: DEFAULT_ID_BUCKETS,
            language_buckets: 8,
            region_buckets: 8,
            device_buckets: 4,
            pref_dim: 4,
            quality_dim: 4,
            include_history: false,
            history_window: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Bucket index per categorical field.
    pub buckets: Vec<usize>,
    pub numeric: Vec<f64>,
}

impl FeatureSchema {
    pub fn validate(&self) -> Result<()> {
        if self.bucket_counts().contains(&0) {
            return Err(Error::config("every categorical field needs at least one bucket"));
        }
        if self.include_history && self.history_window == 0 {
            return Err(Error::config("history window must be positive"));
        }
        Ok(())
    }

    pub fn bucket_counts(&self) -> [usize; 6] {
        [
            self.id_buckets,
            self.id_buckets,
            self.id_buckets,
            self.language_buckets,
            self.region_buckets,
            self.device_buckets,
        ]
    }

    /// Numeric groups and their widths, in layout order.
    pub fn numeric_fields(&self) -> Vec<(&'static str, usize)> {
        let mut fields = vec![
            (ACTIVITY, 1),
            (PREF_SIGNAL, self.pref_dim),
            (QUALITY_SIGNAL, self.quality_dim),
            (ISSUE_SIGNAL, 1),
        ];
        if self.include_history {
            fields.push((HISTORY_SUBMISSIONS, 1));
        }
        fields.retain(|(_, w)| *w > 0);
        fields
    }

    pub fn numeric_dim(&self) -> usize {
        self.numeric_fields().iter().map(|(_, w)| w).sum()
    }

    pub fn dense_dim(&self, embedding_dim: usize) -> usize {
        CATEGORICAL_FIELDS.len() * embedding_dim + self.numeric_dim()
    }

    pub fn feature_names(&self) -> Vec<&'static str> {
        CATEGORICAL_FIELDS
            .iter()
            .copied()
            .chain(self.numeric_fields().into_iter().map(|(n, _)| n))
            .collect()
    }

    /// Slot range of a named feature inside the dense model input.
    pub fn slots(&self, name: &str, embedding_dim: usize) -> Result<Range<usize>> {
        if let Some(i) = CATEGORICAL_FIELDS.iter().position(|f| *f == name) {
            return Ok(i * embedding_dim..(i + 1) * embedding_dim);
        }
        let mut offset = CATEGORICAL_FIELDS.len() * embedding_dim;
        for (field, width) in self.numeric_fields() {
            if field == name {
                return Ok(offset..offset + width);
            }
            offset += width;
        }
        Err(Error::unknown("feature", name))
    }

    pub fn encode(&self, user: &UserFeatures, item: &ItemFeatures) -> Result<FeatureVector> {
        if user.pref_signal.len() != self.pref_dim {
            return Err(Error::config(format!(
                "user preference signal has dim {}, schema expects {}",
                user.pref_signal.len(),
                self.pref_dim
            )));
        }
        if item.quality_signal.len() != self.quality_dim {
            return Err(Error::config(format!(
                "item quality signal has dim {}, schema expects {}",
                item.quality_signal.len(),
                self.quality_dim
            )));
        }
        let buckets = vec![
            hash_bucket(user.user_id, self.id_buckets),
            hash_bucket(item.item_id, self.id_buckets),
            hash_bucket(item.author_id, self.id_buckets),
            user.language as usize % self.language_buckets,
            user.region as usize % self.region_buckets,
            user.device as usize % self.device_buckets,
        ];
        let mut numeric = Vec::with_capacity(self.numeric_dim());
        numeric.push(user.activity);
        numeric.extend_from_slice(&user.pref_signal);
        numeric.extend_from_slice(&item.quality_signal);
        numeric.push(item.issue_signal);
        if self.include_history {
            numeric.push(f64::from(user.history_submissions) / f64::from(self.history_window));
        }
        Ok(FeatureVector { buckets, numeric })
    }

    pub fn check(&self, features: &FeatureVector) -> Result<()> {
        let counts = self.bucket_counts();
        if features.buckets.len() != counts.len()
            || features.buckets.iter().zip(counts).any(|(&b, n)| b >= n)
        {
            return Err(Error::config("feature vector buckets do not match the schema"));
        }
        if features.numeric.len() != self.numeric_dim() {
            return Err(Error::config(format!(
                "feature vector has {} numeric slots, schema expects {}",
                features.numeric.len(),
                self.numeric_dim()
            )));
        }
        Ok(())
    }
}

pub fn hash_bucket(id: u64, buckets: usize) -> usize {
    (mix64(id) % buckets as u64) as usize
}
